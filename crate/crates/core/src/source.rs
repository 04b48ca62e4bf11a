//! Phase-randomised weak coherent pulse source.
//!
//! Once the global phase is traced out a coherent pulse is a Poisson mixture
//! of Fock states, so the source samples photon numbers directly. Every
//! photon of a pulse carries the same BB84 state.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::io::csv_writer;
use crate::statistics::{poisson_pmf, DEFAULT_N_MAX};

pub const DEFAULT_SIGNAL_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

impl Basis {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Basis {
        if rng.random_bool(0.5) {
            Basis::Diagonal
        } else {
            Basis::Rectilinear
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Basis::Rectilinear => "rectilinear",
            Basis::Diagonal => "diagonal",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Basis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rectilinear" | "Z" | "z" => Ok(Basis::Rectilinear),
            "diagonal" | "X" | "x" => Ok(Basis::Diagonal),
            other => Err(format!("unknown basis `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PulseClass {
    Signal,
    Decoy,
}

impl PulseClass {
    pub const ALL: [PulseClass; 2] = [PulseClass::Signal, PulseClass::Decoy];

    pub fn label(self) -> &'static str {
        match self {
            PulseClass::Signal => "signal",
            PulseClass::Decoy => "decoy",
        }
    }
}

impl fmt::Display for PulseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PulseClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "signal" => Ok(PulseClass::Signal),
            "decoy" => Ok(PulseClass::Decoy),
            other => Err(format!("unknown pulse class `{other}`")),
        }
    }
}

/// One of the four BB84 polarisation states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhotonState {
    pub basis: Basis,
    pub bit: u8,
}

impl PhotonState {
    pub fn new(basis: Basis, bit: u8) -> Self {
        debug_assert!(bit <= 1);
        PhotonState { basis, bit }
    }

    /// The orthogonal state in the same basis.
    pub fn flipped(self) -> Self {
        PhotonState {
            basis: self.basis,
            bit: self.bit ^ 1,
        }
    }

    pub fn all() -> [PhotonState; 4] {
        [
            PhotonState::new(Basis::Rectilinear, 0),
            PhotonState::new(Basis::Rectilinear, 1),
            PhotonState::new(Basis::Diagonal, 0),
            PhotonState::new(Basis::Diagonal, 1),
        ]
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let basis = Basis::random(rng);
        let bit = u8::from(rng.random_bool(0.5));
        PhotonState { basis, bit }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    /// Mean photon number of signal pulses.
    pub mu: f64,
    /// Mean photon number of decoy pulses.
    pub mu_prime: f64,
    pub signal_fraction: f64,
    pub n_max: u32,
}

impl SourceConfig {
    pub fn new(mu: f64, mu_prime: f64) -> Result<Self> {
        let config = SourceConfig {
            mu,
            mu_prime,
            signal_fraction: DEFAULT_SIGNAL_FRACTION,
            n_max: DEFAULT_N_MAX,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_signal_fraction(mut self, fraction: f64) -> Result<Self> {
        self.signal_fraction = fraction;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::domain("mu", self.mu, "mu > 0"));
        }
        if !(self.mu_prime > 0.0 && self.mu_prime.is_finite()) {
            return Err(Error::domain("mu_prime", self.mu_prime, "mu_prime > 0"));
        }
        if self.mu == self.mu_prime {
            return Err(Error::Config(
                "decoy intensity must differ from signal intensity".into(),
            ));
        }
        if !(self.signal_fraction > 0.0 && self.signal_fraction < 1.0) {
            return Err(Error::domain(
                "signal_fraction",
                self.signal_fraction,
                "0 < fraction < 1",
            ));
        }
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be positive".into()));
        }
        Ok(())
    }

    pub fn mean(&self, class: PulseClass) -> f64 {
        match class {
            PulseClass::Signal => self.mu,
            PulseClass::Decoy => self.mu_prime,
        }
    }
}

/// One emitted pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseRecord {
    pub id: u64,
    pub class: PulseClass,
    pub basis: Basis,
    pub bit: u8,
    pub photon_count: u32,
    /// Always true: the phase is never revealed, only the Fock mixture is.
    pub phase_randomized: bool,
}

impl PulseRecord {
    pub fn state(&self) -> PhotonState {
        PhotonState::new(self.basis, self.bit)
    }
}

/// Inverse-CDF sampler over the truncated Poisson law; the tail beyond
/// `n_max` is assigned to `n_max`.
#[derive(Debug, Clone)]
struct PhotonNumberSampler {
    cdf: Vec<f64>,
}

impl PhotonNumberSampler {
    fn new(mean: f64, n_max: u32) -> Result<Self> {
        let mut cdf = Vec::with_capacity(n_max as usize);
        let mut acc = 0.0;
        for n in 0..n_max {
            acc += poisson_pmf(n, mean)?;
            cdf.push(acc);
        }
        Ok(PhotonNumberSampler { cdf })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u) as u32
    }
}

/// A configured source ready to emit pulses.
#[derive(Debug, Clone)]
pub struct Source {
    config: SourceConfig,
    signal: PhotonNumberSampler,
    decoy: PhotonNumberSampler,
}

impl Source {
    pub fn new(config: SourceConfig) -> Result<Self> {
        config.validate()?;
        let signal = PhotonNumberSampler::new(config.mu, config.n_max)?;
        let decoy = PhotonNumberSampler::new(config.mu_prime, config.n_max)?;
        Ok(Source {
            config,
            signal,
            decoy,
        })
    }

    pub fn config(&self) -> &SourceConfig {
        &self.config
    }

    /// Emits the next pulse. Draw order is class, basis, bit, photon number,
    /// so a given stream state always yields the same record.
    pub fn emit_pulse<R: Rng + ?Sized>(&self, id: u64, rng: &mut R) -> PulseRecord {
        let class = if rng.random_bool(self.config.signal_fraction) {
            PulseClass::Signal
        } else {
            PulseClass::Decoy
        };
        let basis = Basis::random(rng);
        let bit = u8::from(rng.random_bool(0.5));
        let photon_count = match class {
            PulseClass::Signal => self.signal.sample(rng),
            PulseClass::Decoy => self.decoy.sample(rng),
        };
        PulseRecord {
            id,
            class,
            basis,
            bit,
            photon_count,
            phase_randomized: true,
        }
    }
}

/// The photon states of a pulse: `photon_count` copies of its BB84 state.
pub fn encode_states(pulse: &PulseRecord) -> Vec<PhotonState> {
    vec![pulse.state(); pulse.photon_count as usize]
}

pub const PULSE_CSV_HEADER: [&str; 5] = ["id", "class", "basis", "bit", "photon_count"];

/// Writes pulses as `id,class,basis,bit,photon_count`.
pub fn write_pulses_csv<W: Write>(pulses: &[PulseRecord], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(PULSE_CSV_HEADER)?;
    for p in pulses {
        w.write_record([
            p.id.to_string(),
            p.class.label().to_string(),
            p.basis.label().to_string(),
            p.bit.to_string(),
            p.photon_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pulses_csv<R: Read>(input: R) -> Result<Vec<PulseRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(PULSE_CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            reason: format!(
                "unexpected header `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut pulses = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |reason: String| Error::Parse { line, reason };
        if record.len() != PULSE_CSV_HEADER.len() {
            return Err(bad(format!("expected 5 fields, found {}", record.len())));
        }
        let id = record[0].parse().map_err(|e| bad(format!("id: {e}")))?;
        let class = record[1].parse().map_err(bad)?;
        let basis = record[2].parse().map_err(bad)?;
        let bit: u8 = record[3].parse().map_err(|e| bad(format!("bit: {e}")))?;
        if bit > 1 {
            return Err(bad(format!("bit must be 0 or 1, found {bit}")));
        }
        let photon_count = record[4]
            .parse()
            .map_err(|e| bad(format!("photon_count: {e}")))?;
        pulses.push(PulseRecord {
            id,
            class,
            basis,
            bit,
            photon_count,
            phase_randomized: true,
        });
    }
    Ok(pulses)
}
