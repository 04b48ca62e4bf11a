//! State-vector kernel for the entangling single-photon probe and its
//! two-photon product.
//!
//! The probe acts on a photon qubit `A` and a fresh ancilla `E`:
//! `U|0,0> = |0,0>` and `U|1,0> = alpha|1,0> + beta|0,1>`, completed to a
//! real rotation on the `{|1,0>, |0,1>}` block. Basis index of a
//! single-photon state is `2a + e`; for a pair it is `8a1 + 4e1 + 2a2 + e2`.
//!
//! This kernel is used to check that probing each photon of a pair with
//! `U⊗U` leaves every photon with the single-photon error rate. The Monte
//! Carlo path only consumes the resulting flip probabilities.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::source::{Basis, PhotonState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Amplitudes over the (photon ⊗ ancilla)^k computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitJointState {
    amplitudes: Vec<Complex64>,
}

fn photon_amplitudes(state: PhotonState) -> [Complex64; 2] {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    match (state.basis, state.bit) {
        (Basis::Rectilinear, 0) => [ONE, ZERO],
        (Basis::Rectilinear, _) => [ZERO, ONE],
        (Basis::Diagonal, 0) => [h, h],
        (Basis::Diagonal, _) => [h, -h],
    }
}

impl QubitJointState {
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        match amplitudes.len() {
            4 | 16 => Ok(QubitJointState { amplitudes }),
            n => Err(Error::Dimension {
                expected: 16,
                actual: n,
            }),
        }
    }

    /// `|state>_A |0>_E`.
    pub fn photon_with_ancilla(state: PhotonState) -> Self {
        let [c0, c1] = photon_amplitudes(state);
        QubitJointState {
            amplitudes: vec![c0, ZERO, c1, ZERO],
        }
    }

    /// Two copies of `state`, each with a fresh ancilla.
    pub fn photon_pair_with_ancillas(state: PhotonState) -> Self {
        let single = Self::photon_with_ancilla(state);
        let mut amplitudes = vec![ZERO; 16];
        for (i, &x) in single.amplitudes.iter().enumerate() {
            for (j, &y) in single.amplitudes.iter().enumerate() {
                amplitudes[4 * i + j] = x * y;
            }
        }
        QubitJointState { amplitudes }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn photons(&self) -> usize {
        if self.amplitudes.len() == 16 {
            2
        } else {
            1
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Probability that measuring photon `photon` in the basis of `prepared`
    /// yields the other bit.
    pub fn photon_error_probability(&self, photon: usize, prepared: PhotonState) -> Result<f64> {
        let photons = self.photons();
        if photon >= photons {
            return Err(Error::Dimension {
                expected: photons,
                actual: photon + 1,
            });
        }
        let wrong = photon_amplitudes(prepared.flipped());
        // Bit position of this photon's system qubit in the basis index.
        let shift = 2 * (photons - 1 - photon) + 1;
        let mask = 1usize << shift;
        let mut p = 0.0;
        for rest in (0..self.amplitudes.len()).filter(|i| i & mask == 0) {
            let amp = wrong[0].conj() * self.amplitudes[rest]
                + wrong[1].conj() * self.amplitudes[rest | mask];
            p += amp.norm_sqr();
        }
        Ok(p)
    }
}

/// The probe as a 4x4 matrix acting on `|a, e>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiUnitary {
    pub alpha: f64,
    pub beta: f64,
    matrix: [[Complex64; 4]; 4],
}

/// Builds the probe for overlap `alpha`, with `beta = sqrt(1 - alpha^2)`.
pub fn si_unitary(alpha: f64) -> Result<SiUnitary> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain("alpha", alpha, "0 <= alpha <= 1"));
    }
    let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
    let a = Complex64::new(alpha, 0.0);
    let b = Complex64::new(beta, 0.0);
    // columns: |00>, |01>, |10>, |11>
    let matrix = [
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, a, b, ZERO],
        [ZERO, -b, a, ZERO],
        [ZERO, ZERO, ZERO, ONE],
    ];
    Ok(SiUnitary {
        alpha,
        beta,
        matrix,
    })
}

impl SiUnitary {
    pub fn matrix(&self) -> &[[Complex64; 4]; 4] {
        &self.matrix
    }

    fn apply_block(&self, v: [Complex64; 4]) -> [Complex64; 4] {
        let mut out = [ZERO; 4];
        for (r, row) in self.matrix.iter().enumerate() {
            out[r] = row.iter().zip(&v).map(|(m, x)| m * x).sum();
        }
        out
    }

    /// Applies the probe to a single photon and its ancilla.
    pub fn apply(&self, state: &QubitJointState) -> Result<QubitJointState> {
        let v: [Complex64; 4] =
            state
                .amplitudes
                .as_slice()
                .try_into()
                .map_err(|_| Error::Dimension {
                    expected: 4,
                    actual: state.dimension(),
                })?;
        Ok(QubitJointState {
            amplitudes: self.apply_block(v).to_vec(),
        })
    }

    /// Largest entry of `|U^dagger U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                let dot: Complex64 = (0..4)
                    .map(|k| self.matrix[k][i].conj() * self.matrix[k][j])
                    .sum();
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }
}

/// Applies `U⊗U` to a photon pair with ancillas (dimension 16).
pub fn apply_cmp(state: &QubitJointState, alpha: f64) -> Result<QubitJointState> {
    if state.dimension() != 16 {
        return Err(Error::Dimension {
            expected: 16,
            actual: state.dimension(),
        });
    }
    let u = si_unitary(alpha)?;
    let mut amps = state.amplitudes.clone();
    // First pair (a1, e1): stride 4 over the high block.
    for low in 0..4 {
        let idx = [low, 4 + low, 8 + low, 12 + low];
        let out = u.apply_block(idx.map(|i| amps[i]));
        for (i, v) in idx.into_iter().zip(out) {
            amps[i] = v;
        }
    }
    // Second pair (a2, e2): contiguous blocks of four.
    for high in 0..4 {
        let idx = [4 * high, 4 * high + 1, 4 * high + 2, 4 * high + 3];
        let out = u.apply_block(idx.map(|i| amps[i]));
        for (i, v) in idx.into_iter().zip(out) {
            amps[i] = v;
        }
    }
    Ok(QubitJointState { amplitudes: amps })
}

/// Error probability the probe induces on a single photon prepared in
/// `state`, measured in the preparation basis.
pub fn si_error_probability(alpha: f64, state: PhotonState) -> Result<f64> {
    let u = si_unitary(alpha)?;
    let out = u.apply(&QubitJointState::photon_with_ancilla(state))?;
    out.photon_error_probability(0, state)
}
