//! The quantum channel between Alice and Bob, with pluggable eavesdroppers.
//!
//! Eve is granted a lossless channel and perfect memory: whatever she does
//! not capture reaches Bob's apparatus without further loss. The passive
//! channel and the per-photon splitting attack therefore produce the same
//! forwarded photon-number law, which is what makes the attack invisible to
//! photon counting.

pub mod kernel;
pub mod solver;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::source::{encode_states, Basis, PhotonState, PulseRecord};

pub use kernel::{apply_cmp, si_error_probability, si_unitary, QubitJointState, SiUnitary};
pub use solver::{
    check_blocking_infeasibility, solve_blocking_distribution, BlockingInfeasibility,
    EveStrategySolution,
};

/// How Eve prepares the photon she inserts during a splitting-and-resending
/// attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubstituteModel {
    /// Measure the removed photon in a random basis and resend the result.
    #[default]
    InterceptResend,
    /// Send one of the four BB84 states uniformly at random.
    RandomState,
}

impl SubstituteModel {
    pub fn label(self) -> &'static str {
        match self {
            SubstituteModel::InterceptResend => "intercept-resend",
            SubstituteModel::RandomState => "random-state",
        }
    }
}

impl fmt::Display for SubstituteModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SubstituteModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "intercept-resend" => Ok(SubstituteModel::InterceptResend),
            "random-state" => Ok(SubstituteModel::RandomState),
            other => Err(format!("unknown substitute model `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Attack {
    /// Passive lossy channel.
    #[default]
    None,
    /// Eve captures each photon with probability `1 - eta`.
    Pns,
    /// Splitting plus resending of a substitute photon on multiphoton pulses.
    Pnsr(SubstituteModel),
    /// Per-photon splitting, plus a symmetric individual attack on
    /// single-photon pulses modelled at the error-rate level.
    Si { qber: f64 },
    /// Passive loss, then the entangling probe applied to every forwarded
    /// photon (the product U⊗U on pairs).
    Cmp { alpha: f64 },
}

impl Attack {
    pub fn name(&self) -> &'static str {
        match self {
            Attack::None => "none",
            Attack::Pns => "pns",
            Attack::Pnsr(_) => "pnsr",
            Attack::Si { .. } => "si",
            Attack::Cmp { .. } => "cmp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// End-to-end transmittance, detector efficiency included.
    pub eta: f64,
    /// Probability that a forwarded photon arrives with its bit flipped.
    pub channel_error: f64,
    pub attack: Attack,
}

impl ChannelConfig {
    pub fn new(eta: f64, attack: Attack) -> Result<Self> {
        let config = ChannelConfig {
            eta,
            channel_error: 0.0,
            attack,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_channel_error(mut self, channel_error: f64) -> Result<Self> {
        self.channel_error = channel_error;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::domain("eta", self.eta, "0 < eta <= 1"));
        }
        if !(0.0..=0.5).contains(&self.channel_error) {
            return Err(Error::domain(
                "channel_error",
                self.channel_error,
                "0 <= error <= 0.5",
            ));
        }
        match self.attack {
            Attack::Si { qber } if !(0.0..=0.5).contains(&qber) => {
                Err(Error::domain("si qber", qber, "0 <= qber <= 0.5"))
            }
            Attack::Cmp { alpha } if !(0.0..=1.0).contains(&alpha) => {
                Err(Error::domain("alpha", alpha, "0 <= alpha <= 1"))
            }
            _ => Ok(()),
        }
    }
}

/// What leaves the channel for one pulse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelOutcome {
    pub pulse_id: u64,
    /// Photons reaching Bob. When `substituted` is set, Eve's photon is the
    /// last entry.
    pub forwarded_states: Vec<PhotonState>,
    pub eve_captured: u32,
    pub substituted: bool,
    /// Eve holds at least one photon and at least one photon was forwarded.
    pub tagged: bool,
}

impl ChannelOutcome {
    fn new(pulse_id: u64, forwarded_states: Vec<PhotonState>, eve_captured: u32) -> Self {
        let tagged = eve_captured > 0 && !forwarded_states.is_empty();
        ChannelOutcome {
            pulse_id,
            forwarded_states,
            eve_captured,
            substituted: false,
            tagged,
        }
    }

    pub fn forwarded(&self) -> u32 {
        self.forwarded_states.len() as u32
    }
}

fn apply_noise<R: Rng + ?Sized>(states: &mut [PhotonState], error: f64, rng: &mut R) {
    if error > 0.0 {
        for s in states {
            if rng.random_bool(error) {
                *s = s.flipped();
            }
        }
    }
}

/// Splits the photons of `pulse` independently: each is forwarded with
/// probability `eta`, the rest are returned as the captured count.
fn thin<R: Rng + ?Sized>(pulse: &PulseRecord, eta: f64, rng: &mut R) -> (Vec<PhotonState>, u32) {
    let mut forwarded = 0u32;
    for _ in 0..pulse.photon_count {
        if rng.random_bool(eta) {
            forwarded += 1;
        }
    }
    (
        vec![pulse.state(); forwarded as usize],
        pulse.photon_count - forwarded,
    )
}

/// Passive loss: every photon survives independently with probability eta.
pub fn transmit_lossy<R: Rng + ?Sized>(
    pulse: &PulseRecord,
    config: &ChannelConfig,
    rng: &mut R,
) -> ChannelOutcome {
    let (mut forwarded, _lost) = thin(pulse, config.eta, rng);
    apply_noise(&mut forwarded, config.channel_error, rng);
    ChannelOutcome::new(pulse.id, forwarded, 0)
}

/// Per-photon splitting: Eve keeps each photon with probability `1 - eta`
/// and forwards the rest losslessly.
pub fn attack_pns<R: Rng + ?Sized>(
    pulse: &PulseRecord,
    config: &ChannelConfig,
    rng: &mut R,
) -> ChannelOutcome {
    let (mut forwarded, captured) = thin(pulse, config.eta, rng);
    apply_noise(&mut forwarded, config.channel_error, rng);
    ChannelOutcome::new(pulse.id, forwarded, captured)
}

fn substitute<R: Rng + ?Sized>(
    original: PhotonState,
    model: SubstituteModel,
    rng: &mut R,
) -> PhotonState {
    match model {
        SubstituteModel::InterceptResend => {
            let eve_basis = Basis::random(rng);
            let outcome = if eve_basis == original.basis {
                original.bit
            } else {
                u8::from(rng.random_bool(0.5))
            };
            PhotonState::new(eve_basis, outcome)
        }
        SubstituteModel::RandomState => PhotonState::random(rng),
    }
}

/// Splitting and resending. Pulses with two or more photons lose one photon
/// to Eve and gain a substitute, and all of them are forwarded so Bob sees
/// the emitted photon count. Empty and single-photon pulses take the
/// per-photon splitting path.
pub fn attack_pnsr<R: Rng + ?Sized>(
    pulse: &PulseRecord,
    config: &ChannelConfig,
    model: SubstituteModel,
    rng: &mut R,
) -> ChannelOutcome {
    if pulse.photon_count < 2 {
        return attack_pns(pulse, config, rng);
    }
    let mut forwarded = encode_states(pulse);
    forwarded.pop();
    apply_noise(&mut forwarded, config.channel_error, rng);
    let mut sub = substitute(pulse.state(), model, rng);
    if config.channel_error > 0.0 && rng.random_bool(config.channel_error) {
        sub = sub.flipped();
    }
    forwarded.push(sub);
    let mut outcome = ChannelOutcome::new(pulse.id, forwarded, 1);
    outcome.substituted = true;
    outcome
}

/// Per-photon splitting with an error-rate-level symmetric individual attack
/// on single-photon pulses: the forwarded photon is flipped with
/// probability `qber`.
pub fn attack_si<R: Rng + ?Sized>(
    pulse: &PulseRecord,
    config: &ChannelConfig,
    qber: f64,
    rng: &mut R,
) -> ChannelOutcome {
    let mut outcome = attack_pns(pulse, config, rng);
    if pulse.photon_count == 1 && qber > 0.0 {
        apply_noise(&mut outcome.forwarded_states, qber, rng);
    }
    outcome
}

/// Per-state flip probabilities of the entangling probe, in
/// [`PhotonState::all`] order.
fn cmp_flip_table(alpha: f64) -> Result<[f64; 4]> {
    let mut table = [0.0; 4];
    for (slot, state) in table.iter_mut().zip(PhotonState::all()) {
        *slot = si_error_probability(alpha, state)?;
    }
    Ok(table)
}

fn state_index(s: PhotonState) -> usize {
    let b = match s.basis {
        Basis::Rectilinear => 0,
        Basis::Diagonal => 2,
    };
    b + s.bit as usize
}

fn cmp_with_table<R: Rng + ?Sized>(
    pulse: &PulseRecord,
    config: &ChannelConfig,
    flips: &[f64; 4],
    rng: &mut R,
) -> ChannelOutcome {
    let mut outcome = transmit_lossy(pulse, config, rng);
    for s in &mut outcome.forwarded_states {
        let p = flips[state_index(*s)];
        if p > 0.0 && rng.random_bool(p) {
            *s = s.flipped();
        }
    }
    outcome
}

/// Passive loss followed by the entangling probe on each forwarded photon.
/// Probing a pair with U⊗U flips each photon with the single-photon
/// probability, so photons are handled independently here.
pub fn attack_cmp<R: Rng + ?Sized>(
    pulse: &PulseRecord,
    config: &ChannelConfig,
    alpha: f64,
    rng: &mut R,
) -> Result<ChannelOutcome> {
    let flips = cmp_flip_table(alpha)?;
    Ok(cmp_with_table(pulse, config, &flips, rng))
}

/// A validated channel with per-attack tables precomputed.
#[derive(Debug, Clone)]
pub struct Channel {
    config: ChannelConfig,
    cmp_flips: [f64; 4],
}

impl Channel {
    pub fn new(config: ChannelConfig) -> Result<Self> {
        config.validate()?;
        let cmp_flips = match config.attack {
            Attack::Cmp { alpha } => cmp_flip_table(alpha)?,
            _ => [0.0; 4],
        };
        Ok(Channel { config, cmp_flips })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    pub fn transmit<R: Rng + ?Sized>(&self, pulse: &PulseRecord, rng: &mut R) -> ChannelOutcome {
        let config = &self.config;
        match config.attack {
            Attack::None => transmit_lossy(pulse, config, rng),
            Attack::Pns => attack_pns(pulse, config, rng),
            Attack::Pnsr(model) => attack_pnsr(pulse, config, model, rng),
            Attack::Si { qber } => attack_si(pulse, config, qber, rng),
            Attack::Cmp { .. } => cmp_with_table(pulse, config, &self.cmp_flips, rng),
        }
    }
}
