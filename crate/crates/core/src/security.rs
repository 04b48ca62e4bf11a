//! Information rates, tagged-fraction bounds and the asymptotic key rate.
//!
//! Alice and Bob share `I_AB = 1 - h(e)`. Eve learns everything about a
//! tagged pulse and runs the symmetric individual attack on the rest, so
//! `I_AE = (1 - p_tagged) H_SI(e) + p_tagged` with the tagged share bounded
//! by `mu`. A key can be distilled iff `I_AB > I_AE`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::{csv_writer, fmt_sig9};
use crate::statistics::{binary_entropy, bisect_root, Probability};

/// Bracket and tolerance for threshold searches.
pub const THRESHOLD_BRACKET: (f64, f64) = (1e-6, 0.5 - 1e-6);
pub const DEFAULT_THRESHOLD_TOL: f64 = 1e-6;

fn check_qber(e: f64) -> Result<()> {
    if (0.0..=0.5).contains(&e) {
        Ok(())
    } else {
        Err(Error::domain("e", e, "0 <= e <= 0.5"))
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if (0.0..=1.0).contains(&mu) {
        Ok(())
    } else {
        Err(Error::domain("mu", mu, "0 <= mu <= 1"))
    }
}

/// Mutual information between Alice and Bob per sifted bit.
pub fn info_ab(e: f64) -> Result<f64> {
    check_qber(e)?;
    Ok(1.0 - binary_entropy(e)?)
}

/// Eve's information per single-photon bit under the symmetric individual
/// attack that causes QBER `e`: `1 - h((1 + 2 sqrt(e - e^2)) / 2)`.
pub fn si_info(e: f64) -> Result<f64> {
    check_qber(e)?;
    let p = 0.5 + (e - e * e).sqrt();
    Ok(1.0 - binary_entropy(p.min(1.0))?)
}

/// Eve's information with the tagged share bounded by `mu`.
pub fn info_ae(e: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok((1.0 - mu) * si_info(e)? + mu)
}

/// Like [`info_ae`] with the tighter tagged share `mu (1 - eta)`.
pub fn info_ae_tight(e: f64, mu: f64, eta: f64) -> Result<f64> {
    let tagged = delta_bound(mu, eta)?.get();
    Ok((1.0 - tagged) * si_info(e)? + tagged)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub mu: f64,
    /// QBER below which `I_AB > I_AE`; 0 when there is no such QBER.
    pub qber: f64,
    pub insecure_everywhere: bool,
}

/// The QBER at which `info_ab` and `info_ae` cross, for tagged share `mu`.
pub fn security_threshold(mu: f64, tol: f64) -> Result<Threshold> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::domain("mu", mu, "0 < mu < 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tol", tol, "tol > 0"));
    }
    let gap = |e: f64| info_ab(e).unwrap() - info_ae(e, mu).unwrap();
    let (lo, hi) = THRESHOLD_BRACKET;
    if gap(lo) <= 0.0 {
        return Ok(Threshold {
            mu,
            qber: 0.0,
            insecure_everywhere: true,
        });
    }
    let qber = bisect_root(gap, lo, hi, tol)?;
    Ok(Threshold {
        mu,
        qber,
        insecure_everywhere: false,
    })
}

/// Asymptotic key fraction `(1 - d) - h(e) - (1 - d) h(e / (1 - d))`.
///
/// When `e / (1 - d)` exceeds one half the last entropy is taken as 1.
/// Negative rates are returned unchanged.
pub fn gllp_rate(e: f64, delta: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&e) {
        return Err(Error::domain("e", e, "0 <= e <= 0.5"));
    }
    if delta == 1.0 {
        return Err(Error::DegenerateChannel(delta));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::domain("delta", delta, "0 <= delta < 1"));
    }
    let kept = 1.0 - delta;
    let untagged = e / kept;
    let h_untagged = if untagged > 0.5 {
        1.0
    } else {
        binary_entropy(untagged)?
    };
    Ok(kept - binary_entropy(e)? - kept * h_untagged)
}

/// Tagged fraction `mu (1 - eta)` of a lossy channel under splitting;
/// never above `mu`.
pub fn delta_bound(mu: f64, eta: f64) -> Result<Probability> {
    check_mu(mu)?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain("eta", eta, "0 < eta <= 1"));
    }
    Probability::new(mu * (1.0 - eta))
}

/// `p_m / p_d`, clamped to `[0, 1]`.
pub fn delta_from_counts(p_m: Probability, p_d: Probability) -> Result<Probability> {
    if p_d.get() == 0.0 {
        return Err(Error::DegenerateChannel(0.0));
    }
    Probability::new((p_m.get() / p_d.get()).clamp(0.0, 1.0))
}

/// Tagged-fraction bound from a signal/decoy pair,
/// `mu e^{-mu} / (mu' e^{-mu'})`.
pub fn decoy_delta_bound(mu: f64, mu_prime: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::domain("mu", mu, "mu > 0"));
    }
    if !(mu_prime > 0.0) {
        return Err(Error::domain("mu_prime", mu_prime, "mu_prime > 0"));
    }
    Ok(mu / mu_prime * (mu_prime - mu).exp())
}

/// First-order rate `mu eta / 2` at which Bob detects multiphoton pulses.
pub fn multiphoton_detect_prob(mu: f64, eta: f64) -> Result<Probability> {
    if !(mu >= 0.0) {
        return Err(Error::domain("mu", mu, "mu >= 0"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain("eta", eta, "0 <= eta <= 1"));
    }
    Probability::new((mu * eta / 2.0).min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecuritySummary {
    pub qber: Probability,
    pub mu: f64,
    pub eta: f64,
    pub i_ab: f64,
    pub h_si: f64,
    pub i_ae: f64,
    pub delta_bound: Probability,
    pub delta_decoy_bound: f64,
    /// Key rate with the tagged fraction bounded by `mu`.
    pub gllp_rate: f64,
    pub threshold_qber: Probability,
    pub secure: bool,
}

impl SecuritySummary {
    pub fn evaluate(qber: f64, mu: f64, mu_prime: f64, eta: f64) -> Result<Self> {
        let i_ab = info_ab(qber)?;
        let i_ae = info_ae(qber, mu)?;
        let threshold = security_threshold(mu, DEFAULT_THRESHOLD_TOL)?;
        Ok(SecuritySummary {
            qber: Probability::new(qber)?,
            mu,
            eta,
            i_ab,
            h_si: si_info(qber)?,
            i_ae,
            delta_bound: delta_bound(mu, eta)?,
            delta_decoy_bound: decoy_delta_bound(mu, mu_prime)?,
            gllp_rate: gllp_rate(qber, mu)?,
            threshold_qber: Probability::new(threshold.qber)?,
            secure: i_ab > i_ae,
        })
    }
}

pub const SWEEP_CSV_HEADER: [&str; 5] = ["mu", "e", "i_ab", "i_ae", "gllp_rate"];

/// One row per `(mu, e)` pair, `mu` outermost. The key rate uses `delta = mu`.
pub fn write_sweep_csv<W: Write>(mus: &[f64], qbers: &[f64], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for &mu in mus {
        for &e in qbers {
            w.write_record([
                fmt_sig9(mu),
                fmt_sig9(e),
                fmt_sig9(info_ab(e)?),
                fmt_sig9(info_ae(e, mu)?),
                fmt_sig9(gllp_rate(e, mu)?),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn info_ab_values() {
        assert_eq!(info_ab(0.0).unwrap(), 1.0);
        assert_eq!(info_ab(0.5).unwrap(), 0.0);
        assert!(close(info_ab(0.11).unwrap(), 0.500_084_041_835_472, 1e-14));
        assert!(info_ab(0.51).is_err());
        assert!(info_ab(-0.01).is_err());
    }

    #[test]
    fn si_info_values() {
        assert!(close(si_info(0.0).unwrap(), 0.0, 1e-15));
        assert!(close(si_info(0.5).unwrap(), 1.0, 1e-15));
        assert!(close(si_info(0.135).unwrap(), 0.369_829_77, 1e-8));
        assert!(close(si_info(0.135).unwrap(), 0.3697, 5e-4));
    }

    #[test]
    fn info_ae_values() {
        assert_eq!(info_ae(0.0, 0.0).unwrap(), 0.0);
        for e in [0.0, 0.1, 0.3, 0.5] {
            assert!(close(info_ae(e, 1.0).unwrap(), 1.0, 1e-15));
        }
        assert!(close(info_ae(0.135, 0.1).unwrap(), 0.432_846_79, 1e-8));
        assert!(info_ae(0.1, 1.5).is_err());
        assert!(info_ae_tight(0.135, 0.1, 0.1).unwrap() < info_ae(0.135, 0.1).unwrap());
    }

    #[test]
    fn thresholds() {
        for (mu, oracle) in [
            (0.1, 0.134_232_52),
            (0.2, 0.121_194_29),
            (0.3, 0.107_310_57),
        ] {
            let t = security_threshold(mu, DEFAULT_THRESHOLD_TOL).unwrap();
            assert!(!t.insecure_everywhere);
            assert!(close(t.qber, oracle, 2e-6), "{mu}: {}", t.qber);
        }
        let t = security_threshold(0.999, DEFAULT_THRESHOLD_TOL).unwrap();
        assert!(t.qber < 0.005);
        assert!(security_threshold(0.0, 1e-6).is_err());
        assert!(security_threshold(0.1, 0.0).is_err());
    }

    #[test]
    fn threshold_decreases_in_mu() {
        let grid: Vec<f64> = (0..10).map(|i| 0.05 + 0.05 * f64::from(i)).collect();
        let t: Vec<f64> = grid
            .iter()
            .map(|&mu| security_threshold(mu, DEFAULT_THRESHOLD_TOL).unwrap().qber)
            .collect();
        assert!(t.windows(2).all(|w| w[1] < w[0]), "{t:?}");
    }

    #[test]
    fn gllp_values() {
        assert_eq!(gllp_rate(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(gllp_rate(0.0, 0.1).unwrap(), 0.9);
        assert!(close(gllp_rate(0.05, 0.1).unwrap(), 0.335_013_96, 1e-8));
        assert!(matches!(
            gllp_rate(0.05, 1.0),
            Err(Error::DegenerateChannel(_))
        ));
        // e / (1 - d) above one half saturates the entropy term
        let r = gllp_rate(0.3, 0.5).unwrap();
        assert!(close(r, 0.5 - binary_entropy(0.3).unwrap() - 0.5, 1e-15));
        assert!(r < 0.0);
    }

    #[test]
    fn delta_values() {
        assert_eq!(delta_bound(0.1, 1.0).unwrap().get(), 0.0);
        assert!(close(delta_bound(0.1, 1e-9).unwrap().get(), 0.1, 1e-9));
        assert!(close(delta_bound(0.1, 0.1).unwrap().get(), 0.09, 1e-15));
        assert!(delta_bound(0.1, 0.0).is_err());

        let p = |x| Probability::new(x).unwrap();
        assert_eq!(delta_from_counts(p(0.0), p(0.05)).unwrap().get(), 0.0);
        assert_eq!(delta_from_counts(p(0.05), p(0.05)).unwrap().get(), 1.0);
        assert!(close(
            delta_from_counts(p(0.005), p(0.05)).unwrap().get(),
            0.1,
            1e-15
        ));
        assert!(delta_from_counts(p(0.0), p(0.0)).is_err());
    }

    #[test]
    fn decoy_bound_values() {
        assert_eq!(decoy_delta_bound(0.3, 0.3).unwrap(), 1.0);
        assert!(close(
            decoy_delta_bound(0.1, 0.5).unwrap(),
            0.298_364_94,
            1e-8
        ));
        assert!(close(
            decoy_delta_bound(0.2, 0.6).unwrap(),
            0.497_274_90,
            1e-8
        ));
        assert!(decoy_delta_bound(0.0, 0.5).is_err());
    }

    #[test]
    fn multiphoton_rate_values() {
        assert!(close(
            multiphoton_detect_prob(0.1, 0.1).unwrap().get(),
            0.005,
            1e-15
        ));
        assert_eq!(multiphoton_detect_prob(0.1, 0.0).unwrap().get(), 0.0);
    }

    #[test]
    fn summary_flags_security() {
        let s = SecuritySummary::evaluate(0.05, 0.1, 0.5, 0.1).unwrap();
        assert!(s.secure);
        assert!(s.i_ab > s.i_ae);
        assert!(close(s.threshold_qber.get(), 0.134_232_52, 2e-6));
        let s = SecuritySummary::evaluate(0.2, 0.1, 0.5, 0.1).unwrap();
        assert!(!s.secure);
        assert!(s.gllp_rate < 0.0);
    }

    #[test]
    fn sweep_csv_layout() {
        let mut buf = Vec::new();
        write_sweep_csv(&[0.1], &[0.0, 0.05], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "mu,e,i_ab,i_ae,gllp_rate");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.100000000,0,1.00000000,"));
    }

    proptest! {
        #[test]
        fn crossing_brackets_the_threshold(mu in 0.05f64..0.5) {
            let tol = 1e-6;
            let t = security_threshold(mu, tol).unwrap().qber;
            let gap = |e: f64| info_ab(e).unwrap() - info_ae(e, mu).unwrap();
            prop_assert!(gap(t - tol) > 0.0);
            prop_assert!(gap(t + tol) < 0.0);
        }

        #[test]
        fn zero_error_rate_is_one_minus_delta(delta in 0.0f64..=0.9) {
            prop_assert_eq!(gllp_rate(0.0, delta).unwrap(), 1.0 - delta);
        }

        #[test]
        fn tagged_bound_never_exceeds_mu(mu in 0.0f64..1.0, eta in 1e-9f64..=1.0) {
            prop_assert!(delta_bound(mu, eta).unwrap().get() <= mu);
        }

        #[test]
        fn si_info_is_increasing(a in 0.0f64..0.5, b in 0.0f64..0.5) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(si_info(lo).unwrap() < si_info(hi).unwrap());
        }

        #[test]
        fn information_rates_in_unit_interval(e in 0.0f64..=0.5, mu in 0.0f64..=1.0) {
            let ab = info_ab(e).unwrap();
            let si = si_info(e).unwrap();
            let ae = info_ae(e, mu).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((-1e-15..=1.0 + 1e-15).contains(&si));
            prop_assert!((-1e-15..=1.0 + 1e-15).contains(&ae));
        }
    }
}
