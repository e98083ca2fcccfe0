//! Three-basis state tomography and fidelity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::QubitState;
use crate::error::{invalid, Result};

/// Measurement basis. Readout in `X` or `Y` maps the `+X`/`+Y` eigenstate
/// onto `|1⟩` with a global quarter-turn before the projective measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    /// Drive phase of the basis-change quarter-turn, `None` for `Z`.
    pub fn readout_pulse_phase(self) -> Option<f64> {
        match self {
            // +X → +Z is a quarter turn about -Y.
            Basis::X => Some(std::f64::consts::FRAC_PI_2),
            // +Y → +Z is a quarter turn about +X.
            Basis::Y => Some(0.0),
            Basis::Z => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Basis::X => 'X',
            Basis::Y => 'Y',
            Basis::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'X' | 'x' => Some(Basis::X),
            'Y' | 'y' => Some(Basis::Y),
            'Z' | 'z' => Some(Basis::Z),
            _ => None,
        }
    }
}

/// 2×2 density matrix in the `(|0⟩, |1⟩)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub [[Complex64; 2]; 2]);

impl DensityMatrix {
    /// `(I + r·σ)/2` with the Bloch orientation of [`QubitState::bloch_vector`].
    pub fn from_bloch(r: [f64; 3]) -> Self {
        let [x, y, z] = r;
        let half = |v: f64| Complex64::new(v / 2.0, 0.0);
        // σx = [[0,1],[1,0]], σy = [[0,i],[-i,0]], σz = diag(-1, 1)
        DensityMatrix([
            [half(1.0 - z), Complex64::new(x / 2.0, y / 2.0)],
            [Complex64::new(x / 2.0, -y / 2.0), half(1.0 + z)],
        ])
    }

    pub fn pure(s: &QubitState) -> Self {
        let a = [s.amp0, s.amp1];
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i] * a[j].conj();
            }
        }
        DensityMatrix(m)
    }

    pub fn maximally_mixed() -> Self {
        Self::from_bloch([0.0, 0.0, 0.0])
    }

    pub fn bloch_vector(&self) -> [f64; 3] {
        let m = &self.0;
        [2.0 * m[0][1].re, 2.0 * m[0][1].im, (m[1][1] - m[0][0]).re]
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let m = &self.0;
        m[0][0].im.abs() <= tol
            && m[1][1].im.abs() <= tol
            && (m[0][1] - m[1][0].conj()).norm() <= tol
    }

    /// Mix with the identity: Bloch vector scaled by `shrink`.
    pub fn depolarized(&self, shrink: f64) -> Self {
        let r = self.bloch_vector();
        Self::from_bloch([r[0] * shrink, r[1] * shrink, r[2] * shrink])
    }
}

/// Reconstructed state together with a flag set when the raw Bloch vector
/// had length > 1 and was rescaled onto the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tomography {
    pub rho: DensityMatrix,
    pub projected: bool,
}

/// Density matrix from the excited-state probabilities measured in the
/// `X`, `Y` and `Z` bases: `r_i = 2p_i − 1`.
pub fn tomography_reconstruct(px: f64, py: f64, pz: f64) -> Result<Tomography> {
    for (name, p) in [("px", px), ("py", py), ("pz", pz)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("{name} must lie in [0, 1], got {p}")));
        }
    }
    let mut r = [2.0 * px - 1.0, 2.0 * py - 1.0, 2.0 * pz - 1.0];
    let len = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let projected = len > 1.0;
    if projected {
        r.iter_mut().for_each(|v| *v /= len);
    }
    Ok(Tomography { rho: DensityMatrix::from_bloch(r), projected })
}

/// `⟨ψ|ρ|ψ⟩`, clamped to `[0, 1]`.
pub fn state_fidelity(rho: &DensityMatrix, target: &QubitState) -> Result<f64> {
    if !rho.is_hermitian(1e-9) {
        return Err(invalid("density matrix is not Hermitian"));
    }
    if (rho.trace() - Complex64::new(1.0, 0.0)).norm() > 1e-9 {
        return Err(invalid(format!("density matrix trace is {}, expected 1", rho.trace())));
    }
    let a = [target.amp0, target.amp1];
    let mut f = Complex64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            f += a[i].conj() * rho.0[i][j] * a[j];
        }
    }
    Ok(f.re.clamp(0.0, 1.0))
}
