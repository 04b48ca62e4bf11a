//! Numeric kernels shared by the rest of the crate: Poisson photon
//! statistics, binary entropy, Pearson goodness-of-fit and bisection.
//!
//! Everything here is pure and allocation-light so it can be evaluated over
//! parameter grids from any number of threads.

use std::fmt;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Photon-number truncation used throughout the simulator. For mean photon
/// numbers at or below one the mass above this bound is negligible next to
/// Monte Carlo noise, and it is lumped into the top class.
pub const DEFAULT_N_MAX: u32 = 10;

/// Default significance for the photon-number goodness-of-fit tests.
pub const DEFAULT_SIGNIFICANCE: f64 = 0.01;

/// Classes `0..=4` plus an overflow class for `n >= 5`.
pub const GOF_CLASSES: usize = 6;

/// Pearson cells with fewer expected events than this are pooled.
const MIN_EXPECTED_PER_CELL: f64 = 5.0;

const BISECT_MAX_ITER: usize = 500;

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain("probability", value, "0 <= p <= 1"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Event counts per photon-number class. The last class is an overflow
/// class collecting every value at or above its index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl CountHistogram {
    /// An empty histogram with classes `0..n_classes - 1` and one overflow class.
    pub fn new(n_classes: usize) -> Self {
        assert!(
            n_classes >= 2,
            "histogram needs at least one class plus overflow"
        );
        CountHistogram {
            counts: vec![0; n_classes],
            total: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        assert!(
            counts.len() >= 2,
            "histogram needs at least one class plus overflow"
        );
        let total = counts.iter().sum();
        CountHistogram { counts, total }
    }

    pub fn from_values<I>(values: I, n_classes: usize) -> Self
    where
        I: IntoIterator<Item = u32>,
    {
        let mut hist = CountHistogram::new(n_classes);
        for v in values {
            hist.record(v);
        }
        hist
    }

    pub fn record(&mut self, value: u32) {
        let class = (value as usize).min(self.counts.len() - 1);
        self.counts[class] += 1;
        self.total += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    /// Index of the overflow class.
    pub fn overflow_class(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn merge(&mut self, other: &CountHistogram) {
        assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }
}

/// `mean^n e^{-mean} / n!`.
pub fn poisson_pmf(n: u32, mean: f64) -> Result<f64> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::domain("mean", mean, "mean >= 0"));
    }
    let mut p = (-mean).exp();
    for k in 1..=n {
        p *= mean / f64::from(k);
    }
    Ok(p)
}

/// Poisson probabilities for classes `0..n_classes - 1` with the remaining
/// mass in the last (overflow) class.
pub fn poisson_classes(mean: f64, n_classes: usize) -> Result<Vec<f64>> {
    assert!(n_classes >= 2);
    let mut probs = Vec::with_capacity(n_classes);
    for n in 0..n_classes as u32 - 1 {
        probs.push(poisson_pmf(n, mean)?);
    }
    let head: f64 = probs.iter().sum();
    probs.push((1.0 - head).max(0.0));
    Ok(probs)
}

/// Shannon entropy of a Bernoulli(x) variable in bits, with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("x", x, "0 <= x <= 1"));
    }
    Ok(entropy_term(x) + entropy_term(1.0 - x))
}

fn entropy_term(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Probability that a nonempty pulse of mean photon number `mu` carries
/// more than one photon: `(1 - e^{-mu}(1 + mu)) / (1 - e^{-mu})`.
pub fn multiphoton_given_nonempty(mu: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::domain("mu", mu, "mu > 0"));
    }
    // -expm1 keeps both numerator and denominator accurate for tiny mu.
    let nonempty = -(-mu).exp_m1();
    let multi = nonempty - mu * (-mu).exp();
    Ok((multi / nonempty).clamp(0.0, 1.0))
}

/// First-order form `mu / 2` of [`multiphoton_given_nonempty`].
pub fn multiphoton_given_nonempty_approx(mu: f64) -> f64 {
    mu / 2.0
}

/// Outcome of a Pearson chi-square goodness-of-fit test.
#[derive(Debug, Clone, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub significance: f64,
    /// Number of Pearson cells after pooling sparse classes.
    pub cells: usize,
    pub pass: bool,
}

/// Pearson chi-square test of `observed` against class probabilities
/// `expected` (same class layout, overflow last).
///
/// Classes whose expected count falls below five are pooled into a single
/// cell; if that cell is itself sparse it is folded into the least populated
/// remaining cell. Pooling depends only on expected counts, so the statistic
/// does not depend on how classes are labelled.
pub fn chi_square_gof(
    observed: &CountHistogram,
    expected: &[f64],
    significance: f64,
) -> Result<GofResult> {
    if expected.len() != observed.n_classes() {
        return Err(Error::Dimension {
            expected: observed.n_classes(),
            actual: expected.len(),
        });
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::domain("significance", significance, "0 < alpha < 1"));
    }
    if let Some(&bad) = expected.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain("expected probability", bad, "0 <= p <= 1"));
    }
    let mass: f64 = expected.iter().sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::domain(
            "sum of expected probabilities",
            mass,
            "1 within 1e-9",
        ));
    }
    if observed.total() < 100 {
        return Err(Error::domain(
            "observed total",
            observed.total() as f64,
            "at least 100 events",
        ));
    }

    let total = observed.total() as f64;
    // (observed, expected count) per cell
    let mut dense: Vec<(f64, f64)> = Vec::with_capacity(expected.len());
    let mut pooled = (0.0, 0.0);
    let mut any_pooled = false;
    for (class, (&obs, &p)) in observed.counts().iter().zip(expected).enumerate() {
        if p == 0.0 {
            if obs > 0 {
                return Err(Error::DegenerateClass {
                    class,
                    observed: obs,
                });
            }
            continue;
        }
        let e = p * total;
        if e < MIN_EXPECTED_PER_CELL {
            pooled.0 += obs as f64;
            pooled.1 += e;
            any_pooled = true;
        } else {
            dense.push((obs as f64, e));
        }
    }
    if any_pooled {
        if pooled.1 >= MIN_EXPECTED_PER_CELL || dense.is_empty() {
            dense.push(pooled);
        } else {
            let smallest = dense
                .iter_mut()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("dense is nonempty");
            smallest.0 += pooled.0;
            smallest.1 += pooled.1;
        }
    }

    let statistic: f64 = dense.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = dense.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("dof is positive");
        dist.sf(statistic)
    };
    Ok(GofResult {
        statistic,
        degrees_of_freedom: dof,
        p_value,
        significance,
        cells: dense.len(),
        pass: p_value >= significance,
    })
}

/// Bisection for a sign change of `f` on `[lo, hi]`. Returns the midpoint of
/// a bracket no wider than `tol` that still contains the sign change.
pub fn bisect_root<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::domain("tol", tol, "tol > 0"));
    }
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::Bracketing { lo, hi, f_lo, f_hi });
    }
    for _ in 0..BISECT_MAX_ITER {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}
