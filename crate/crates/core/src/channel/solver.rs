//! What Eve has to do to hide a photon-number-splitting attack in the loss.
//!
//! Two strategies are compared:
//!
//! * **Pulse-level blocking.** Eve removes one photon from an `n`-photon
//!   pulse with probability `P(n)` so that Bob's photon-number law matches
//!   the passive `Poisson(eta * mu)`. Balancing class by class gives a
//!   cascade for `P(n)` that depends on the intensity, so a decoy intensity
//!   exposes it, and at two photons it cannot be satisfied at all.
//! * **Per-photon capture.** Eve forwards `i` of `m` photons with
//!   probability `f_m(i)`. Matching every Taylor coefficient in the
//!   intensity of `e^{mu} * P_loss(i; mu)` pins `f_m(i)` down uniquely, and
//!   the result does not depend on the intensity at all.

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::{csv_writer, fmt_sig9};
use crate::statistics::poisson_pmf;

/// Largest residual accepted for the per-photon solution.
pub const FORWARD_RESIDUAL_TOL: f64 = 1e-9;

/// Extra source photon numbers summed beyond `n_max` when computing
/// residuals, so truncation does not show up in them.
const RESIDUAL_TAIL: u32 = 40;

/// Two-photon balance with blocking probability `2 eta (1 - eta)`: the
/// surviving two-photon mass (`lhs`) against the passive two-photon mass
/// (`rhs`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockingInfeasibility {
    pub mu: f64,
    pub eta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// `lhs > rhs`: Bob would see too many two-photon pulses.
    pub holds: bool,
}

/// Evaluates whether blocking two-photon pulses with probability
/// `2 eta (1 - eta)` still leaves Bob with an excess of two-photon events.
pub fn check_blocking_infeasibility(mu: f64, eta: f64) -> Result<BlockingInfeasibility> {
    if !(mu > 0.0) {
        return Err(Error::domain("mu", mu, "mu > 0"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain("eta", eta, "0 < eta < 1"));
    }
    let p_block2 = 2.0 * eta * (1.0 - eta);
    let lhs = poisson_pmf(2, mu)? * (1.0 - p_block2);
    let rhs = poisson_pmf(2, eta * mu)?;
    Ok(BlockingInfeasibility {
        mu,
        eta,
        lhs,
        rhs,
        gap: lhs - rhs,
        holds: lhs > rhs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EveStrategySolution {
    pub mu: f64,
    pub mu_prime: f64,
    pub eta: f64,
    pub n_max: u32,
    /// Pulse-level blocking probabilities `P(0..=n_max)` balancing the
    /// signal intensity.
    pub blocking_signal: Vec<f64>,
    /// The same cascade balanced against the decoy intensity.
    pub blocking_decoy: Vec<f64>,
    /// `(e^{mu (1 - eta)} - 1) / mu`.
    pub p_block1_exact: f64,
    /// Small-intensity limit `1 - eta`.
    pub p_block1_first_order: f64,
    /// One-photon balance solved for `P(2)` after substituting the
    /// first-order `P(1) = 1 - eta`.
    pub p_block2_chained: f64,
    /// Small-intensity limit `2 eta (1 - eta)`.
    pub p_block2_first_order: f64,
    /// Whether one blocking cascade serves both intensities within
    /// probability bounds.
    pub blocking_feasible: bool,
    /// Row `m` is the law of the number of forwarded photons `0..=m` for an
    /// `m`-photon pulse.
    pub per_n_forward_dist: Vec<Vec<f64>>,
    /// Per forwarded count `n`, the worse of the two intensities'
    /// `|sum_m P(m) f_m(n) - P_loss(n)|`.
    pub residuals: Vec<f64>,
    /// The per-photon solution is a set of distributions with residuals
    /// below [`FORWARD_RESIDUAL_TOL`].
    pub feasible: bool,
    pub infeasibility: BlockingInfeasibility,
}

fn blocking_cascade(mu: f64, eta: f64, n_max: u32) -> Result<Vec<f64>> {
    let mut p = vec![0.0; n_max as usize + 1];
    for n in 0..n_max {
        let emitted = poisson_pmf(n, mu)?;
        let next = poisson_pmf(n + 1, mu)?;
        let target = poisson_pmf(n, eta * mu)?;
        p[n as usize + 1] = (target - emitted * (1.0 - p[n as usize])) / next;
    }
    Ok(p)
}

/// `f_m(n)` for `m = 0..=m_max`, obtained from the power series of
/// `e^{mu} * P_loss(n; mu)` in `mu`: the coefficient of `mu^m`, times `m!`.
fn forward_law_by_series(eta: f64, m_max: u32) -> Vec<Vec<f64>> {
    let m_max = m_max as usize;
    let mut inv_fact = vec![1.0f64; m_max + 1];
    for k in 1..=m_max {
        inv_fact[k] = inv_fact[k - 1] / k as f64;
    }
    let mut rows: Vec<Vec<f64>> = (0..=m_max).map(|m| vec![0.0; m + 1]).collect();
    for n in 0..=m_max {
        // P_loss(n; mu) = (eta mu)^n / n! * sum_i (-eta mu)^i / i!
        let lead = eta.powi(n as i32) * inv_fact[n];
        let loss_coeff = |j: usize| -> f64 {
            if j < n {
                0.0
            } else {
                let i = j - n;
                lead * (-eta).powi(i as i32) * inv_fact[i]
            }
        };
        let mut m_fact = 1.0f64;
        for m in 0..=m_max {
            if m > 0 {
                m_fact *= m as f64;
            }
            if m < n {
                continue;
            }
            // Cauchy product with e^{mu} = sum_k mu^k / k!
            let coeff: f64 = (n..=m).map(|j| loss_coeff(j) * inv_fact[m - j]).sum();
            rows[m][n] = m_fact * coeff;
        }
    }
    rows
}

fn forward_residuals(law: &[Vec<f64>], mu: f64, eta: f64, n_max: u32) -> Result<Vec<f64>> {
    let m_top = law.len() as u32 - 1;
    let mut out = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        let mut reached = 0.0;
        for m in n..=m_top {
            reached += poisson_pmf(m, mu)? * law[m as usize][n as usize];
        }
        out.push((reached - poisson_pmf(n, eta * mu)?).abs());
    }
    Ok(out)
}

/// Solves both strategies for signal intensity `mu`, decoy intensity
/// `mu_prime` and transmittance `eta` on photon numbers up to `n_max`.
pub fn solve_blocking_distribution(
    mu: f64,
    mu_prime: f64,
    eta: f64,
    n_max: u32,
) -> Result<EveStrategySolution> {
    if eta == 0.0 || eta == 1.0 {
        return Err(Error::DegenerateChannel(eta));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain("eta", eta, "0 < eta < 1"));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::domain("mu", mu, "mu > 0"));
    }
    if !(mu_prime > 0.0 && mu_prime.is_finite()) {
        return Err(Error::domain("mu_prime", mu_prime, "mu_prime > 0"));
    }
    if n_max < 2 {
        return Err(Error::Config("n_max must be at least 2".into()));
    }

    let blocking_signal = blocking_cascade(mu, eta, n_max)?;
    let blocking_decoy = blocking_cascade(mu_prime, eta, n_max)?;
    let in_range = |v: &[f64]| v.iter().all(|p| (0.0..=1.0).contains(p));
    let intensity_gap = blocking_signal
        .iter()
        .zip(&blocking_decoy)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let blocking_feasible = in_range(&blocking_signal)
        && in_range(&blocking_decoy)
        && intensity_gap <= FORWARD_RESIDUAL_TOL;

    let p_block1_exact = (mu * (1.0 - eta)).exp_m1() / mu;
    let p_block1_first_order = 1.0 - eta;
    // mu e^{-mu} (1 - P1) + P2 mu^2/2 e^{-mu} = eta mu e^{-eta mu}, P1 = 1 - eta
    let p_block2_chained = 2.0 * eta * (mu * (1.0 - eta)).exp_m1() / mu;
    let p_block2_first_order = 2.0 * eta * (1.0 - eta);

    let law = forward_law_by_series(eta, n_max + RESIDUAL_TAIL);
    let res_signal = forward_residuals(&law, mu, eta, n_max)?;
    let res_decoy = forward_residuals(&law, mu_prime, eta, n_max)?;
    let residuals: Vec<f64> = res_signal
        .iter()
        .zip(&res_decoy)
        .map(|(a, b)| a.max(*b))
        .collect();

    let per_n_forward_dist: Vec<Vec<f64>> = law
        .into_iter()
        .take(n_max as usize + 1)
        .map(|row| {
            // cancellation in the alternating series can leave -1e-13 where the law is ~0
            row.into_iter()
                .map(|f| if f < 0.0 && f > -1e-12 { 0.0 } else { f })
                .collect()
        })
        .collect();
    let rows_are_laws = per_n_forward_dist.iter().all(|row| {
        row.iter().all(|f| (0.0..=1.0).contains(f)) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    });
    let feasible = rows_are_laws && residuals.iter().all(|r| *r <= FORWARD_RESIDUAL_TOL);

    Ok(EveStrategySolution {
        mu,
        mu_prime,
        eta,
        n_max,
        blocking_signal,
        blocking_decoy,
        p_block1_exact,
        p_block1_first_order,
        p_block2_chained,
        p_block2_first_order,
        blocking_feasible,
        per_n_forward_dist,
        residuals,
        feasible,
        infeasibility: check_blocking_infeasibility(mu, eta)?,
    })
}

impl EveStrategySolution {
    /// Writes `n,p_eve_signal,p_eve_decoy,f_0..f_{n_max},residual`, one row
    /// per photon number; forwarding probabilities above `n` are left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        let mut header = vec!["n".to_string(), "p_eve_signal".into(), "p_eve_decoy".into()];
        header.extend((0..=self.n_max).map(|i| format!("f_{i}")));
        header.push("residual".into());
        w.write_record(&header)?;
        for n in 0..=self.n_max as usize {
            let mut row = vec![
                n.to_string(),
                fmt_sig9(self.blocking_signal[n]),
                fmt_sig9(self.blocking_decoy[n]),
            ];
            for i in 0..=self.n_max as usize {
                row.push(
                    self.per_n_forward_dist[n]
                        .get(i)
                        .map(|&f| fmt_sig9(f))
                        .unwrap_or_default(),
                );
            }
            row.push(fmt_sig9(self.residuals[n]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(m: u32, i: u32, eta: f64) -> f64 {
        let mut c = 1.0;
        for k in 0..i {
            c = c * f64::from(m - k) / f64::from(k + 1);
        }
        c * eta.powi(i as i32) * (1.0 - eta).powi((m - i) as i32)
    }

    #[test]
    fn degenerate_channels_rejected() {
        assert!(matches!(
            solve_blocking_distribution(0.1, 0.5, 1.0, 10),
            Err(Error::DegenerateChannel(_))
        ));
        assert!(matches!(
            solve_blocking_distribution(0.1, 0.5, 0.0, 10),
            Err(Error::DegenerateChannel(_))
        ));
        assert!(solve_blocking_distribution(0.1, 0.5, 1.2, 10).is_err());
        assert!(solve_blocking_distribution(-0.1, 0.5, 0.1, 10).is_err());
    }

    #[test]
    fn single_photon_blocking_reference() {
        let s = solve_blocking_distribution(0.1, 0.5, 0.1, 10).unwrap();
        // (e^{0.09} - 1) / 0.1 to 40 digits
        assert!((s.p_block1_exact - 0.941_742_837_052_103_6).abs() < 1e-12);
        assert!((s.blocking_signal[1] - s.p_block1_exact).abs() < 1e-12);
        assert!((s.p_block1_first_order - 0.9).abs() < 1e-15);
        assert_eq!(s.blocking_signal[0], 0.0);
    }

    #[test]
    fn per_photon_law_is_binomial_and_intensity_free() {
        for &eta in &[0.05, 0.1, 0.5, 0.9] {
            let a = solve_blocking_distribution(0.1, 0.5, eta, 10).unwrap();
            let b = solve_blocking_distribution(0.3, 0.9, eta, 10).unwrap();
            assert_eq!(a.per_n_forward_dist, b.per_n_forward_dist);
            assert!(a.feasible, "eta {eta}: {:?}", a.residuals);
            for (m, row) in a.per_n_forward_dist.iter().enumerate() {
                assert_eq!(row.len(), m + 1);
                for (i, f) in row.iter().enumerate() {
                    let oracle = binomial(m as u32, i as u32, eta);
                    assert!(
                        (f - oracle).abs() < 1e-10,
                        "eta {eta} m {m} i {i}: {f} vs {oracle}"
                    );
                }
            }
            assert!(a.residuals.iter().all(|r| *r < 1e-12));
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let s = solve_blocking_distribution(0.1, 0.5, 0.1, 10).unwrap();
        for row in &s.per_n_forward_dist {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pulse_blocking_depends_on_intensity() {
        let s = solve_blocking_distribution(0.1, 0.5, 0.1, 10).unwrap();
        assert!((s.blocking_signal[1] - s.blocking_decoy[1]).abs() > 1e-3);
        assert!(!s.blocking_feasible);
        assert!(s.feasible);
    }

    #[test]
    fn infeasibility_examples() {
        assert!(check_blocking_infeasibility(0.1, 0.1).unwrap().holds);
        assert!(check_blocking_infeasibility(0.3, 0.5).unwrap().holds);
        let near_lossless = check_blocking_infeasibility(0.1, 1.0 - 1e-7).unwrap();
        assert!(near_lossless.gap.abs() < 1e-8);
        assert!(check_blocking_infeasibility(0.1, 1.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let s = solve_blocking_distribution(0.1, 0.5, 0.1, 3).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "n,p_eve_signal,p_eve_decoy,f_0,f_1,f_2,f_3,residual"
        );
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,0,1.00000000,,,,"));
        assert!(lines[2].starts_with("1,0.941742837,"));
    }
}
