//! BB84 sessions: emission, transmission, detection, sifting, decoy
//! verification and raw-key extraction.
//!
//! The simulator keeps full ground truth, so error rates are measured by
//! comparing Alice's and Bob's bits directly instead of sacrificing part of
//! the key.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::channel::{Channel, ChannelConfig, ChannelOutcome};
use crate::detector::{
    detect, expected_matched_error_rates, expected_resolved_distribution, DetectionEvent,
    DetectorConfig, MeasuredBit,
};
use crate::error::{Error, Result};
use crate::io::{csv_writer, fmt_sig9};
use crate::rng::stream;
use crate::security::delta_bound;
use crate::source::{PulseClass, PulseRecord, Source, SourceConfig};
use crate::statistics::{
    chi_square_gof, CountHistogram, GofResult, Probability, DEFAULT_SIGNIFICANCE, GOF_CLASSES,
};

pub const MIN_SESSION_PULSES: u64 = 10_000;
/// Pulses per independently seeded work unit.
pub const BATCH_SIZE: u64 = 8192;
/// Sifted events a class needs before its statistics are trusted.
pub const MIN_SIFTED_PER_CLASS: u64 = 1000;
/// Error-rate cells with fewer events are reported but not tested.
pub const MIN_QBER_EVENTS: u64 = 20;
/// Width of the binomial consistency bands, in standard deviations.
pub const QBER_SIGMAS: f64 = 3.0;
/// Photon classes compared between signal and decoy.
pub const CROSS_CLASS_MAX_N: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub source: SourceConfig,
    pub channel: ChannelConfig,
    pub detector: DetectorConfig,
    pub n_pulses: u64,
    pub master_seed: u64,
    pub significance: f64,
}

impl SessionConfig {
    pub fn new(
        source: SourceConfig,
        channel: ChannelConfig,
        detector: DetectorConfig,
        n_pulses: u64,
        master_seed: u64,
    ) -> Result<Self> {
        let config = SessionConfig {
            source,
            channel,
            detector,
            n_pulses,
            master_seed,
            significance: DEFAULT_SIGNIFICANCE,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.channel.validate()?;
        self.detector.validate()?;
        if self.n_pulses < MIN_SESSION_PULSES {
            return Err(Error::Config(format!(
                "n_pulses must be at least {MIN_SESSION_PULSES}, got {}",
                self.n_pulses
            )));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::domain(
                "significance",
                self.significance,
                "0 < significance < 1",
            ));
        }
        Ok(())
    }
}

/// One pulse followed from Alice to Bob.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseTrace {
    pub pulse: PulseRecord,
    pub outcome: ChannelOutcome,
    pub detection: DetectionEvent,
}

impl PulseTrace {
    pub fn detected(&self) -> bool {
        self.detection.resolved_count > 0
    }

    pub fn bases_match(&self) -> bool {
        self.pulse.basis == self.detection.bob_basis
    }

    /// Some click disagrees with Alice's bit.
    pub fn any_click_wrong(&self) -> bool {
        self.detection.click_bits().any(|b| b != self.pulse.bit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub config: SessionConfig,
    pub traces: Vec<PulseTrace>,
}

impl SessionLog {
    pub fn class_traces(&self, class: PulseClass) -> impl Iterator<Item = &PulseTrace> {
        self.traces.iter().filter(move |t| t.pulse.class == class)
    }
}

/// Runs every pulse of the session. Batch `b` draws from stream `b` of the
/// master seed, so the log does not depend on the thread count.
pub fn run_session(config: &SessionConfig) -> Result<SessionLog> {
    config.validate()?;
    let source = Source::new(config.source.clone())?;
    let channel = Channel::new(config.channel.clone())?;
    let detector = &config.detector;
    let n_batches = config.n_pulses.div_ceil(BATCH_SIZE);
    let batches: Vec<Vec<PulseTrace>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(config.master_seed, b);
            let start = b * BATCH_SIZE;
            let end = (start + BATCH_SIZE).min(config.n_pulses);
            (start..end)
                .map(|id| {
                    let pulse = source.emit_pulse(id, &mut rng);
                    let outcome = channel.transmit(&pulse, &mut rng);
                    let detection = detect(&outcome, detector, &mut rng);
                    PulseTrace {
                        pulse,
                        outcome,
                        detection,
                    }
                })
                .collect()
        })
        .collect();
    Ok(SessionLog {
        config: config.clone(),
        traces: batches.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiftedRecord {
    pub pulse_id: u64,
    pub class: PulseClass,
    pub alice_bit: u8,
    pub bob_bit: u8,
    /// Resolved click count.
    pub photon_class: u32,
    pub error: bool,
}

impl SiftedRecord {
    /// Multiphoton events count for statistics but never enter the key.
    pub fn key_eligible(&self) -> bool {
        self.photon_class == 1
    }
}

/// Keeps basis-matched events with at least one click and an unambiguous
/// bit, in pulse order.
pub fn sift(log: &SessionLog) -> Vec<SiftedRecord> {
    log.traces
        .iter()
        .filter(|t| t.bases_match())
        .filter_map(|t| match t.detection.measured_bit {
            MeasuredBit::Bit(bob_bit) => Some(SiftedRecord {
                pulse_id: t.pulse.id,
                class: t.pulse.class,
                alice_bit: t.pulse.bit,
                bob_bit,
                photon_class: t.detection.resolved_count,
                error: bob_bit != t.pulse.bit,
            }),
            MeasuredBit::Ambiguous => None,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Secure,
    EavesdropperDetected,
    Inconclusive,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Secure => "secure",
            Verdict::EavesdropperDetected => "eavesdropper_detected",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Error rate among basis-matched events with `n` clicks. An event is in
/// error when any of its clicks disagrees with Alice, so conflicting
/// multi-click events count as errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberCell {
    pub n: u32,
    pub events: u64,
    pub errors: u64,
    /// Rate expected from channel noise and dark clicks alone.
    pub expected: Option<f64>,
}

impl QberCell {
    pub fn rate(&self) -> Option<f64> {
        (self.events > 0).then(|| self.errors as f64 / self.events as f64)
    }

    /// Observed minus expected rate, with the binomial variance of the
    /// observed rate under the expectation.
    fn excess(&self) -> Option<(f64, f64)> {
        if self.events < MIN_QBER_EVENTS {
            return None;
        }
        let m = self.expected.unwrap_or(0.0);
        let n = self.events as f64;
        Some((self.rate()? - m, m * (1.0 - m) / n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub class: PulseClass,
    pub mean_photons: f64,
    pub histogram: CountHistogram,
    /// Click-count law expected without an eavesdropper.
    pub expected: Vec<f64>,
    pub gof: GofResult,
    /// Cells `n = 1..GOF_CLASSES`, the last one pooling larger counts.
    pub qber_per_n: Vec<QberCell>,
    pub sifted: u64,
    /// Pulses with at least one click.
    pub detected: u64,
    /// Detected pulses Eve holds a photon of; ground truth only.
    pub tagged: u64,
    /// Whether each `e_n` with enough events stays within the band
    /// predicted from `e_1`.
    pub qber_within_consistent: bool,
}

impl ClassReport {
    pub fn tagged_fraction(&self) -> f64 {
        if self.detected == 0 {
            0.0
        } else {
            self.tagged as f64 / self.detected as f64
        }
    }

    pub fn qber(&self, n: u32) -> Option<f64> {
        self.qber_per_n
            .iter()
            .find(|c| c.n == n)
            .and_then(QberCell::rate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub signal: ClassReport,
    pub decoy: ClassReport,
    /// `e_n` agrees between signal and decoy for `n = 1..=CROSS_CLASS_MAX_N`.
    pub qber_cross_consistent: bool,
    pub qber_consistency: bool,
    /// Error rate over all sifted events.
    pub qber: f64,
    /// Ground-truth tagged fraction among detected signal pulses; not
    /// observable by Bob.
    pub delta_empirical: Probability,
    /// Analytic bound `mu (1 - eta)`.
    pub delta_bound: Probability,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn class(&self, class: PulseClass) -> &ClassReport {
        match class {
            PulseClass::Signal => &self.signal,
            PulseClass::Decoy => &self.decoy,
        }
    }
}

fn qber_cells(log: &SessionLog, class: PulseClass, expected: &[Option<f64>]) -> Vec<QberCell> {
    let top = GOF_CLASSES as u32 - 1;
    let mut cells: Vec<QberCell> = (1..=top)
        .map(|n| QberCell {
            n,
            events: 0,
            errors: 0,
            expected: expected[n as usize - 1],
        })
        .collect();
    for t in log
        .class_traces(class)
        .filter(|t| t.detected() && t.bases_match())
    {
        let cell = &mut cells[(t.detection.resolved_count.min(top) - 1) as usize];
        cell.events += 1;
        if t.any_click_wrong() {
            cell.errors += 1;
        }
    }
    cells
}

/// One-sided check that no multi-click cell exceeds its expected rate by
/// more than the single-click cell does.
fn within_class_consistent(cells: &[QberCell]) -> bool {
    let (base, base_var) = cells[0].excess().unwrap_or((0.0, 0.0));
    cells[1..].iter().all(|c| match c.excess() {
        None => true,
        Some((excess, var)) => {
            let slack = 0.5 / c.events as f64;
            excess - base <= QBER_SIGMAS * (var + base_var).sqrt() + slack
        }
    })
}

/// Two-sided check that signal and decoy exceed their expected rates by the
/// same amount for `n = 1..=CROSS_CLASS_MAX_N`.
fn cross_class_consistent(a: &[QberCell], b: &[QberCell]) -> bool {
    a.iter()
        .zip(b)
        .filter(|(x, _)| x.n <= CROSS_CLASS_MAX_N)
        .all(|(x, y)| match (x.excess(), y.excess()) {
            (Some((ex, vx)), Some((ey, vy))) => {
                let slack = 0.5 * (1.0 / x.events as f64 + 1.0 / y.events as f64);
                (ex - ey).abs() <= QBER_SIGMAS * (vx + vy).sqrt() + slack
            }
            _ => true,
        })
}

fn class_report(
    sifted: &[SiftedRecord],
    log: &SessionLog,
    class: PulseClass,
) -> Result<ClassReport> {
    let config = &log.config;
    let mean_photons = config.channel.eta * config.source.mean(class);
    let histogram = CountHistogram::from_values(
        log.class_traces(class).map(|t| t.detection.resolved_count),
        GOF_CLASSES,
    );
    let expected = expected_resolved_distribution(
        mean_photons,
        config.channel.channel_error,
        &config.detector,
        GOF_CLASSES,
    )?;
    let gof = chi_square_gof(&histogram, &expected, config.significance)?;
    let expected_errors = expected_matched_error_rates(
        mean_photons,
        config.channel.channel_error,
        &config.detector,
        GOF_CLASSES,
    )?;
    let qber_per_n = qber_cells(log, class, &expected_errors);
    let (detected, tagged) = log
        .class_traces(class)
        .filter(|t| t.detected())
        .fold((0u64, 0u64), |(d, g), t| {
            (d + 1, g + u64::from(t.outcome.tagged))
        });
    Ok(ClassReport {
        class,
        mean_photons,
        histogram,
        expected,
        gof,
        qber_within_consistent: within_class_consistent(&qber_per_n),
        qber_per_n,
        sifted: sifted.iter().filter(|r| r.class == class).count() as u64,
        detected,
        tagged,
    })
}

/// Checks the click-count statistics of both intensities against the
/// no-eavesdropper model and compares per-click-count error rates within
/// and across intensities. Too few sifted events give an inconclusive
/// verdict.
pub fn verify(sifted: &[SiftedRecord], log: &SessionLog) -> Result<VerificationReport> {
    let signal = class_report(sifted, log, PulseClass::Signal)?;
    let decoy = class_report(sifted, log, PulseClass::Decoy)?;
    let qber_cross_consistent = cross_class_consistent(&signal.qber_per_n, &decoy.qber_per_n);
    let qber_consistency =
        qber_cross_consistent && signal.qber_within_consistent && decoy.qber_within_consistent;

    let errors = sifted.iter().filter(|r| r.error).count();
    let qber = if sifted.is_empty() {
        0.0
    } else {
        errors as f64 / sifted.len() as f64
    };
    let delta_empirical = Probability::new(signal.tagged_fraction())?;
    let config = &log.config;

    let verdict = if signal.sifted < MIN_SIFTED_PER_CLASS || decoy.sifted < MIN_SIFTED_PER_CLASS {
        Verdict::Inconclusive
    } else if signal.gof.pass && decoy.gof.pass && qber_consistency {
        Verdict::Secure
    } else {
        Verdict::EavesdropperDetected
    };
    Ok(VerificationReport {
        signal,
        decoy,
        qber_cross_consistent,
        qber_consistency,
        qber,
        delta_empirical,
        delta_bound: delta_bound(config.source.mu, config.channel.eta)?,
        verdict,
    })
}

/// Aligned raw keys. Positions are the pulse ids the bits came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawKey {
    pub pulse_ids: Vec<u64>,
    pub alice: Vec<u8>,
    pub bob: Vec<u8>,
}

impl RawKey {
    pub fn len(&self) -> usize {
        self.alice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice.is_empty()
    }

    pub fn mismatches(&self) -> usize {
        self.alice
            .iter()
            .zip(&self.bob)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Single-click sifted bits of both intensities, in order. Refused unless
/// verification found the session secure.
pub fn extract_raw_key(sifted: &[SiftedRecord], report: &VerificationReport) -> Result<RawKey> {
    if report.verdict != Verdict::Secure {
        return Err(Error::KeyRefused(report.verdict));
    }
    let mut key = RawKey::default();
    for r in sifted.iter().filter(|r| r.key_eligible()) {
        key.pulse_ids.push(r.pulse_id);
        key.alice.push(r.alice_bit);
        key.bob.push(r.bob_bit);
    }
    Ok(key)
}

pub const LOG_CSV_HEADER: [&str; 13] = [
    "pulse_id",
    "class",
    "basis",
    "bit",
    "photon_count",
    "forwarded",
    "eve_captured",
    "substituted",
    "tagged",
    "bob_basis",
    "resolved_count",
    "measured_bit",
    "dark_clicks",
];

pub fn write_log_csv<W: Write>(log: &SessionLog, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(LOG_CSV_HEADER)?;
    for t in &log.traces {
        let flag = |b: bool| if b { "1" } else { "0" };
        w.write_record([
            t.pulse.id.to_string().as_str(),
            t.pulse.class.label(),
            t.pulse.basis.label(),
            &t.pulse.bit.to_string(),
            &t.pulse.photon_count.to_string(),
            &t.outcome.forwarded().to_string(),
            &t.outcome.eve_captured.to_string(),
            flag(t.outcome.substituted),
            flag(t.outcome.tagged),
            t.detection.bob_basis.label(),
            &t.detection.resolved_count.to_string(),
            &t.detection.measured_bit.to_string(),
            &t.detection.dark_clicks.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const REPORT_CSV_HEADER: [&str; 7] = [
    "class",
    "n",
    "observed",
    "expected",
    "qber_events",
    "qber_errors",
    "e_n",
];

/// Per class and click count: observed and expected pulses, and the error
/// tally among basis-matched events. Row `n = GOF_CLASSES - 1` pools larger
/// counts; `e_n` is empty where no events were seen.
pub fn write_report_csv<W: Write>(report: &VerificationReport, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(REPORT_CSV_HEADER)?;
    for c in [&report.signal, &report.decoy] {
        let total = c.histogram.total() as f64;
        for (n, (&observed, &p)) in c.histogram.counts().iter().zip(&c.expected).enumerate() {
            let cell = (n > 0).then(|| c.qber_per_n[n - 1]);
            w.write_record([
                c.class.label().to_string(),
                n.to_string(),
                observed.to_string(),
                fmt_sig9(p * total),
                cell.map_or(String::new(), |q| q.events.to_string()),
                cell.map_or(String::new(), |q| q.errors.to_string()),
                cell.and_then(|q| q.rate()).map_or(String::new(), fmt_sig9),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict: {}", self.verdict)?;
        writeln!(f, "qber: {}", fmt_sig9(self.qber))?;
        for c in [&self.signal, &self.decoy] {
            writeln!(
                f,
                "{}: sifted {}, click-count chi2 {} (df {}, p {}) {}",
                c.class,
                c.sifted,
                fmt_sig9(c.gof.statistic),
                c.gof.degrees_of_freedom,
                fmt_sig9(c.gof.p_value),
                if c.gof.pass { "pass" } else { "fail" },
            )?;
            let rates: Vec<String> = c
                .qber_per_n
                .iter()
                .map(|q| match q.rate() {
                    Some(r) => format!("e_{}={} ({})", q.n, fmt_sig9(r), q.events),
                    None => format!("e_{}=- (0)", q.n),
                })
                .collect();
            writeln!(f, "{}: {}", c.class, rates.join(" "))?;
        }
        writeln!(
            f,
            "qber consistency: within {} / {}, across {}",
            self.signal.qber_within_consistent,
            self.decoy.qber_within_consistent,
            self.qber_cross_consistent
        )?;
        writeln!(
            f,
            "tagged fraction (ground truth): signal {}, decoy {}",
            fmt_sig9(self.signal.tagged_fraction()),
            fmt_sig9(self.decoy.tagged_fraction())
        )?;
        write!(
            f,
            "tagged fraction bound mu(1-eta): {}",
            fmt_sig9(self.delta_bound.get())
        )
    }
}
