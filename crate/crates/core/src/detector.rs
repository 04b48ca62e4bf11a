//! Bob's photon-number-resolving receiver.
//!
//! A balanced beam-splitter tree spreads the arriving photons over
//! `n_ports` equally likely output ports. Each port ends in a polarising
//! beam splitter set to Bob's basis, with one single-photon detector (SPD)
//! on each of its two outputs, so the receiver has `2 * n_ports` SPDs. SPD
//! `2 * port + b` registers bit `b`. Two photons hitting the same SPD give a
//! single click.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::channel::ChannelOutcome;
use crate::error::{Error, Result};
use crate::io::csv_writer;
use crate::source::Basis;

pub const DEFAULT_PORTS: u32 = 16;
pub const DEFAULT_DARK_COUNT: f64 = 1e-5;

/// Which detector count stands in for `N` in the dark-count budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetCount {
    /// Leaf ports of the splitter tree.
    #[default]
    Ports,
    /// Every SPD, two per port.
    Spds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub n_ports: u32,
    /// Dark-click probability per SPD per pulse slot.
    pub e_dark: f64,
    pub budget_count: BudgetCount,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            n_ports: DEFAULT_PORTS,
            e_dark: DEFAULT_DARK_COUNT,
            budget_count: BudgetCount::Ports,
        }
    }
}

impl DetectorConfig {
    pub fn new(n_ports: u32, e_dark: f64) -> Result<Self> {
        let config = DetectorConfig {
            n_ports,
            e_dark,
            budget_count: BudgetCount::Ports,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ports == 0 || !self.n_ports.is_power_of_two() {
            return Err(Error::Config(format!(
                "n_ports must be a positive power of two, got {}",
                self.n_ports
            )));
        }
        if !(0.0..1.0).contains(&self.e_dark) {
            return Err(Error::domain("e_dark", self.e_dark, "0 <= e_dark < 1"));
        }
        Ok(())
    }

    pub fn spd_count(&self) -> u32 {
        2 * self.n_ports
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasuredBit {
    Bit(u8),
    Ambiguous,
}

impl MeasuredBit {
    pub fn bit(self) -> Option<u8> {
        match self {
            MeasuredBit::Bit(b) => Some(b),
            MeasuredBit::Ambiguous => None,
        }
    }
}

impl fmt::Display for MeasuredBit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasuredBit::Bit(b) => write!(f, "{b}"),
            MeasuredBit::Ambiguous => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionEvent {
    pub pulse_id: u64,
    /// Sorted, distinct SPD indices.
    pub clicked_spds: Vec<u32>,
    pub resolved_count: u32,
    pub measured_bit: MeasuredBit,
    pub bob_basis: Basis,
    /// SPDs whose dark-count process fired, whether or not a photon also
    /// hit them.
    pub dark_clicks: u32,
    pub multiphoton: bool,
}

impl DetectionEvent {
    /// The bit registered by each click.
    pub fn click_bits(&self) -> impl Iterator<Item = u8> + '_ {
        self.clicked_spds.iter().map(|spd| (spd & 1) as u8)
    }
}

/// Sends the forwarded photons of `outcome` through the receiver.
///
/// Draw order: Bob's basis, then port and (for mismatched bases) branch of
/// each photon, then the dark-count process over the SPDs.
pub fn detect<R: Rng + ?Sized>(
    outcome: &ChannelOutcome,
    config: &DetectorConfig,
    rng: &mut R,
) -> DetectionEvent {
    let bob_basis = Basis::random(rng);
    let mut clicked = Vec::with_capacity(outcome.forwarded_states.len());
    for photon in &outcome.forwarded_states {
        let port = rng.random_range(0..config.n_ports);
        let bit = if photon.basis == bob_basis {
            photon.bit
        } else {
            u8::from(rng.random_bool(0.5))
        };
        clicked.push(2 * port + u32::from(bit));
    }
    let mut dark_clicks = 0;
    if config.e_dark > 0.0 {
        let gaps = Geometric::new(config.e_dark).expect("e_dark validated in (0, 1)");
        let spds = u64::from(config.spd_count());
        let mut next = gaps.sample(rng);
        while next < spds {
            clicked.push(next as u32);
            dark_clicks += 1;
            next += 1 + gaps.sample(rng);
        }
    }
    clicked.sort_unstable();
    clicked.dedup();

    let resolved_count = clicked.len() as u32;
    let measured_bit = match clicked.first() {
        None => MeasuredBit::Ambiguous,
        Some(&first) => {
            let b = (first & 1) as u8;
            if clicked.iter().all(|spd| (spd & 1) as u8 == b) {
                MeasuredBit::Bit(b)
            } else {
                MeasuredBit::Ambiguous
            }
        }
    };
    DetectionEvent {
        pulse_id: outcome.pulse_id,
        clicked_spds: clicked,
        resolved_count,
        measured_bit,
        bob_basis,
        dark_clicks,
        multiphoton: resolved_count >= 2,
    }
}

/// Probability that at least two of `n_photons` photons with the same
/// measured polarisation land on one SPD: `1 - prod_{k<n} (1 - k / n_ports)`.
pub fn collision_probability(n_photons: u32, config: &DetectorConfig) -> Result<f64> {
    if n_photons < 2 {
        return Err(Error::domain(
            "n_photons",
            f64::from(n_photons),
            "n_photons >= 2",
        ));
    }
    let ports = f64::from(config.n_ports);
    let distinct: f64 = (1..n_photons)
        .map(|k| (1.0 - f64::from(k) / ports).max(0.0))
        .product();
    Ok(1.0 - distinct)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarkCountBudget {
    /// `N * e_dark`.
    pub dark_load: f64,
    /// `mu * eta / 2`, the rate of detected multiphoton pulses.
    pub allowance: f64,
    pub pass: bool,
}

/// Dark clicks must stay below the multiphoton detection rate they would
/// otherwise drown: passes iff `N * e_dark < mu * eta / 2`.
pub fn check_dark_count_budget(config: &DetectorConfig, mu: f64, eta: f64) -> DarkCountBudget {
    let n = match config.budget_count {
        BudgetCount::Ports => config.n_ports,
        BudgetCount::Spds => config.spd_count(),
    };
    let dark_load = f64::from(n) * config.e_dark;
    let allowance = mu * eta / 2.0;
    DarkCountBudget {
        dark_load,
        allowance,
        pass: config.e_dark == 0.0 || dark_load < allowance,
    }
}

/// Law of the resolved click count when the number of photons reaching the
/// receiver is `Poisson(mean_photons)` and each photon is independently
/// flipped with probability `flip`. Classes `0..n_classes - 1` plus overflow.
///
/// Poisson splitting makes every SPD an independent Bernoulli: with matching
/// bases the photons spread over the `n_ports` SPDs of the sent bit (rate
/// `1 - flip`) and of the other bit (rate `flip`); with mismatched bases
/// they spread evenly over all SPDs. The two cases are equally likely.
pub fn expected_resolved_distribution(
    mean_photons: f64,
    flip: f64,
    config: &DetectorConfig,
    n_classes: usize,
) -> Result<Vec<f64>> {
    if !(mean_photons >= 0.0) {
        return Err(Error::domain("mean_photons", mean_photons, "mean >= 0"));
    }
    config.validate()?;
    let n = config.n_ports;
    let per_spd = |mean: f64| 1.0 - (-mean).exp() * (1.0 - config.e_dark);
    let nf = f64::from(n);
    let matched = convolve(
        &binomial_head(n, per_spd(mean_photons * (1.0 - flip) / nf), n_classes),
        &binomial_head(n, per_spd(mean_photons * flip / nf), n_classes),
        n_classes,
    );
    let mismatched = binomial_head(2 * n, per_spd(mean_photons / (2.0 * nf)), n_classes);
    let mut out: Vec<f64> = matched
        .iter()
        .zip(&mismatched)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let head: f64 = out[..n_classes - 1].iter().sum();
    out[n_classes - 1] = (1.0 - head).max(0.0);
    Ok(out)
}

/// `Binomial(trials, p)` probabilities for `0..len - 1`; the last slot is
/// left for the caller's overflow class.
fn binomial_head(trials: u32, p: f64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let q = 1.0 - p;
    let mut term = q.powi(trials as i32);
    for (k, slot) in out.iter_mut().enumerate().take(trials as usize + 1) {
        *slot = term;
        if p == 0.0 {
            break;
        }
        term *= f64::from(trials - k as u32) / (k as f64 + 1.0) * p / q;
    }
    out
}

fn convolve(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if i + j < len {
                out[i + j] += x * y;
            }
        }
    }
    out
}

/// Under the same model as [`expected_resolved_distribution`], restricted
/// to matching bases: for `k = 1..n_classes - 1` clicks (the last entry
/// pooling larger counts), the probability that some click carries the
/// wrong bit. Entry `k - 1` is `None` when `k` clicks are impossible.
pub fn expected_matched_error_rates(
    mean_photons: f64,
    flip: f64,
    config: &DetectorConfig,
    n_classes: usize,
) -> Result<Vec<Option<f64>>> {
    if !(mean_photons >= 0.0) {
        return Err(Error::domain("mean_photons", mean_photons, "mean >= 0"));
    }
    config.validate()?;
    let n = config.n_ports;
    let nf = f64::from(n);
    let per_spd = |mean: f64| 1.0 - (-mean).exp() * (1.0 - config.e_dark);
    let right = binomial_head(n, per_spd(mean_photons * (1.0 - flip) / nf), n_classes);
    let p_wrong = per_spd(mean_photons * flip / nf);
    let wrong = binomial_head(n, p_wrong, n_classes);
    let all = convolve(&right, &wrong, n_classes);
    let none_wrong = (1.0 - p_wrong).powi(n as i32);
    let last = n_classes - 1;
    let rate =
        |total: f64, clean: f64| (total > 0.0).then(|| (1.0 - clean / total).clamp(0.0, 1.0));
    let mut out: Vec<Option<f64>> = (1..last)
        .map(|k| rate(all[k], right[k] * none_wrong))
        .collect();
    let tail_all = 1.0 - all[..last].iter().sum::<f64>();
    let tail_clean = none_wrong * (1.0 - right[..last].iter().sum::<f64>());
    // the pooled class comes from a complement; below 1e-12 it is rounding noise
    out.push(if tail_all > 1e-12 {
        rate(tail_all, tail_clean.max(0.0))
    } else {
        None
    });
    Ok(out)
}

pub const DETECTION_CSV_HEADER: [&str; 5] = [
    "pulse_id",
    "resolved_count",
    "bob_basis",
    "measured_bit",
    "dark_clicks",
];

/// Writes `pulse_id,resolved_count,bob_basis,measured_bit,dark_clicks`; an
/// ambiguous measured bit is written as `-`.
pub fn write_detections_csv<W: Write>(events: &[DetectionEvent], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(DETECTION_CSV_HEADER)?;
    for e in events {
        w.write_record([
            e.pulse_id.to_string(),
            e.resolved_count.to_string(),
            e.bob_basis.label().to_string(),
            e.measured_bit.to_string(),
            e.dark_clicks.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::source::PhotonState;

    fn outcome(states: Vec<PhotonState>) -> ChannelOutcome {
        ChannelOutcome {
            pulse_id: 7,
            forwarded_states: states,
            eve_captured: 0,
            substituted: false,
            tagged: false,
        }
    }

    /// Enumerates every assignment of photons to ports and counts those
    /// where two share a port.
    fn enumerate_collisions(n_photons: u32, ports: u32) -> f64 {
        let total = (ports as u64).pow(n_photons);
        let mut hits = 0u64;
        for code in 0..total {
            let mut seen = vec![false; ports as usize];
            let mut c = code;
            let mut collided = false;
            for _ in 0..n_photons {
                let p = (c % ports as u64) as usize;
                c /= ports as u64;
                collided |= seen[p];
                seen[p] = true;
            }
            if collided {
                hits += 1;
            }
        }
        hits as f64 / total as f64
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::new(16, 1e-5).is_ok());
        assert!(DetectorConfig::new(0, 1e-5).is_err());
        assert!(DetectorConfig::new(12, 1e-5).is_err());
        assert!(DetectorConfig::new(16, 1.0).is_err());
        assert_eq!(DetectorConfig::new(16, 0.0).unwrap().spd_count(), 32);
    }

    #[test]
    fn nothing_arrives_nothing_clicks() {
        let config = DetectorConfig::new(16, 0.0).unwrap();
        let ev = detect(&outcome(vec![]), &config, &mut stream(1, 0));
        assert_eq!(ev.resolved_count, 0);
        assert_eq!(ev.measured_bit, MeasuredBit::Ambiguous);
        assert!(!ev.multiphoton);
        assert_eq!(ev.pulse_id, 7);
    }

    #[test]
    fn single_photon_matching_basis_is_exact() {
        let config = DetectorConfig::new(16, 0.0).unwrap();
        let mut rng = stream(2, 0);
        let mut matched = 0;
        for i in 0..10_000 {
            let s = PhotonState::new(
                if i % 2 == 0 {
                    Basis::Rectilinear
                } else {
                    Basis::Diagonal
                },
                (i / 2 % 2) as u8,
            );
            let ev = detect(&outcome(vec![s]), &config, &mut rng);
            assert_eq!(ev.resolved_count, 1);
            if ev.bob_basis == s.basis {
                matched += 1;
                assert_eq!(ev.measured_bit, MeasuredBit::Bit(s.bit));
            }
        }
        assert!(matched > 4500 && matched < 5500);
    }

    #[test]
    fn collision_formula_matches_enumeration() {
        assert_eq!(
            collision_probability(2, &DetectorConfig::new(1, 0.0).unwrap()).unwrap(),
            1.0
        );
        for &(n, ports) in &[(2u32, 16u32), (3, 64), (2, 4), (4, 8), (3, 2)] {
            let cfg = DetectorConfig::new(ports, 0.0).unwrap();
            let analytic = collision_probability(n, &cfg).unwrap();
            assert!((analytic - enumerate_collisions(n, ports)).abs() < 1e-12);
        }
        let p = collision_probability(3, &DetectorConfig::new(64, 0.0).unwrap()).unwrap();
        assert!((p - (1.0 - 63.0 / 64.0 * 62.0 / 64.0)).abs() < 1e-15);
        assert!((p - 0.046_386_718_75).abs() < 1e-12);
        assert!(collision_probability(1, &DetectorConfig::default()).is_err());
    }

    #[test]
    fn simulated_two_photon_collisions() {
        let config = DetectorConfig::new(16, 0.0).unwrap();
        let s = PhotonState::new(Basis::Rectilinear, 1);
        let mut rng = stream(3, 0);
        let mut trials = 0u32;
        let mut collisions = 0u32;
        while trials < 100_000 {
            let ev = detect(&outcome(vec![s, s]), &config, &mut rng);
            if ev.bob_basis != s.basis {
                continue;
            }
            trials += 1;
            if ev.resolved_count == 1 {
                collisions += 1;
            }
        }
        let rate = f64::from(collisions) / f64::from(trials);
        assert!((rate - 1.0 / 16.0).abs() <= 0.005, "{rate}");
    }

    #[test]
    fn dark_clicks_hit_each_spd_at_the_configured_rate() {
        let config = DetectorConfig::new(16, 1e-3).unwrap();
        let mut rng = stream(4, 0);
        let pulses = 200_000u32;
        let mut per_spd = vec![0u64; 32];
        let mut total = 0u64;
        for _ in 0..pulses {
            let ev = detect(&outcome(vec![]), &config, &mut rng);
            total += u64::from(ev.dark_clicks);
            for &spd in &ev.clicked_spds {
                per_spd[spd as usize] += 1;
            }
        }
        let trials = f64::from(pulses) * 32.0;
        let rate = total as f64 / trials;
        let sigma = (1e-3 * (1.0 - 1e-3) / trials).sqrt();
        assert!((rate - 1e-3).abs() <= 3.0 * sigma, "{rate}");
        // Rough uniformity: no SPD is starved or flooded.
        let mean = total as f64 / 32.0;
        assert!(per_spd
            .iter()
            .all(|&c| (c as f64 - mean).abs() < 5.0 * mean.sqrt()));
    }

    #[test]
    fn dark_clicks_do_not_depend_on_photons() {
        let config = DetectorConfig::new(16, 1e-3).unwrap();
        let mut rng = stream(5, 0);
        let s = PhotonState::new(Basis::Diagonal, 0);
        let pulses = 200_000u32;
        let total: u64 = (0..pulses)
            .map(|_| u64::from(detect(&outcome(vec![s, s, s]), &config, &mut rng).dark_clicks))
            .sum();
        let trials = f64::from(pulses) * 32.0;
        let rate = total as f64 / trials;
        assert!((rate - 1e-3).abs() <= 3.0 * (1e-3 / trials).sqrt());
    }

    #[test]
    fn conflicting_clicks_are_ambiguous() {
        let config = DetectorConfig::new(1024, 0.0).unwrap();
        let mut rng = stream(6, 0);
        let a = PhotonState::new(Basis::Rectilinear, 0);
        let mut seen_conflict = false;
        for _ in 0..1000 {
            let ev = detect(&outcome(vec![a, a.flipped()]), &config, &mut rng);
            if ev.bob_basis == Basis::Rectilinear {
                assert_eq!(ev.resolved_count, 2);
                assert_eq!(ev.measured_bit, MeasuredBit::Ambiguous);
                assert!(ev.multiphoton);
                seen_conflict = true;
            }
        }
        assert!(seen_conflict);
    }

    #[test]
    fn dark_count_budget_examples() {
        let cfg = DetectorConfig::new(16, 1e-5).unwrap();
        let b = check_dark_count_budget(&cfg, 0.1, 0.1);
        assert!((b.dark_load - 1.6e-4).abs() < 1e-18);
        assert!((b.allowance - 5e-3).abs() < 1e-18);
        assert!(b.pass);
        let b = check_dark_count_budget(&DetectorConfig::new(1024, 1e-5).unwrap(), 0.1, 0.1);
        assert!((b.dark_load - 1.024e-2).abs() < 1e-15);
        assert!(!b.pass);
        assert!(
            check_dark_count_budget(&DetectorConfig::new(1 << 20, 0.0).unwrap(), 1e-9, 1e-9).pass
        );
        let spds = DetectorConfig {
            budget_count: BudgetCount::Spds,
            ..cfg
        };
        assert!((check_dark_count_budget(&spds, 0.1, 0.1).dark_load - 3.2e-4).abs() < 1e-18);
    }

    #[test]
    fn expected_distribution_reduces_to_poisson() {
        use crate::statistics::poisson_classes;
        let cfg = DetectorConfig::new(1 << 20, 0.0).unwrap();
        let model = expected_resolved_distribution(0.02, 0.0, &cfg, 6).unwrap();
        let poisson = poisson_classes(0.02, 6).unwrap();
        for (a, b) in model.iter().zip(&poisson) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!((model.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expected_distribution_matches_simulation() {
        use crate::statistics::{chi_square_gof, CountHistogram};
        use rand_distr::Poisson;
        let cfg = DetectorConfig::new(4, 2e-3).unwrap();
        let mean = 0.6;
        let flip = 0.1;
        let model = expected_resolved_distribution(mean, flip, &cfg, 6).unwrap();
        let mut rng = stream(7, 0);
        let poisson = Poisson::new(mean).unwrap();
        let mut hist = CountHistogram::new(6);
        for _ in 0..200_000 {
            let k = poisson.sample(&mut rng) as usize;
            let s = PhotonState::random(&mut rng);
            let states: Vec<PhotonState> = (0..k)
                .map(|_| {
                    if rng.random_bool(flip) {
                        s.flipped()
                    } else {
                        s
                    }
                })
                .collect();
            hist.record(detect(&outcome(states), &cfg, &mut rng).resolved_count);
        }
        let r = chi_square_gof(&hist, &model, 0.01).unwrap();
        assert!(r.pass, "{r:?} {hist:?} {model:?}");
    }

    #[test]
    fn matched_error_rates_match_simulation() {
        use rand_distr::Poisson;
        let clean =
            expected_matched_error_rates(0.3, 0.0, &DetectorConfig::new(16, 0.0).unwrap(), 6)
                .unwrap();
        assert!(clean[..3].iter().all(|r| *r == Some(0.0)));

        let cfg = DetectorConfig::new(4, 5e-3).unwrap();
        let (mean, flip) = (0.4, 0.05);
        let model = expected_matched_error_rates(mean, flip, &cfg, 6).unwrap();
        let mut rng = stream(9, 0);
        let poisson = Poisson::new(mean).unwrap();
        let mut events = [0u64; 5];
        let mut errors = [0u64; 5];
        while events[0] < 100_000 {
            let k = poisson.sample(&mut rng) as usize;
            let s = PhotonState::random(&mut rng);
            let states: Vec<PhotonState> = (0..k)
                .map(|_| {
                    if rng.random_bool(flip) {
                        s.flipped()
                    } else {
                        s
                    }
                })
                .collect();
            let ev = detect(&outcome(states), &cfg, &mut rng);
            if ev.bob_basis != s.basis || ev.resolved_count == 0 {
                continue;
            }
            let cell = ev.resolved_count.min(5) as usize - 1;
            events[cell] += 1;
            if ev.click_bits().any(|b| b != s.bit) {
                errors[cell] += 1;
            }
        }
        for cell in 0..2 {
            let m = model[cell].unwrap();
            let n = events[cell] as f64;
            let rate = errors[cell] as f64 / n;
            assert!(
                (rate - m).abs() <= 4.0 * (m * (1.0 - m) / n).sqrt(),
                "{cell}: {rate} vs {m}"
            );
        }
    }

    proptest::proptest! {
        #[test]
        fn collision_probability_is_a_probability_growing_with_photons(
            log_ports in 0u32..12,
            n in 2u32..40,
        ) {
            let cfg = DetectorConfig::new(1 << log_ports, 0.0).unwrap();
            let p = collision_probability(n, &cfg).unwrap();
            let q = collision_probability(n + 1, &cfg).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&p));
            proptest::prop_assert!(q >= p);
        }

        #[test]
        fn click_count_law_is_normalised(
            mean in 0.0f64..3.0,
            flip in 0.0f64..0.5,
            log_ports in 0u32..8,
            e_dark in 0.0f64..1e-2,
        ) {
            let cfg = DetectorConfig::new(1 << log_ports, e_dark).unwrap();
            let law = expected_resolved_distribution(mean, flip, &cfg, 6).unwrap();
            proptest::prop_assert!(law.iter().all(|p| *p >= 0.0));
            proptest::prop_assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let errors = expected_matched_error_rates(mean, flip, &cfg, 6).unwrap();
            proptest::prop_assert!(errors.iter().flatten().all(|e| (0.0..=1.0).contains(e)));
        }
    }

    #[test]
    fn detection_csv_layout() {
        let config = DetectorConfig::new(2, 0.0).unwrap();
        let ev = detect(
            &outcome(vec![PhotonState::new(Basis::Diagonal, 1)]),
            &config,
            &mut stream(8, 0),
        );
        let mut buf = Vec::new();
        write_detections_csv(std::slice::from_ref(&ev), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("pulse_id,resolved_count,bob_basis,measured_bit,dark_clicks")
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("7,1,"));
        assert!(row.ends_with(&format!(",{},0", ev.measured_bit)));
    }
}
