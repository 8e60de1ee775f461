//! Dense plane-wave solver for one electron in a periodic sum of Gaussian
//! wells.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, hermitian_deviation, CMat, EigenOrder, ZERO};
use crate::pwbasis::{Cell, PlaneWaveBasis};

/// Attractive Gaussian well `-depth · exp(-|r - center|² / 2 width²)`,
/// repeated periodically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianWell {
    pub center: [f64; 3],
    pub depth: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub wells: Vec<GaussianWell>,
    /// Constant added to the potential (Hartree).
    #[serde(default)]
    pub offset: f64,
}

impl PotentialSpec {
    /// Fourier coefficient V(G) with the `1/V` convention, so that
    /// `V(r) = Σ_G V(G) e^{iG·r}`.
    pub fn fourier(&self, g: [f64; 3], volume: f64) -> Complex64 {
        let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        let mut v = ZERO;
        for w in &self.wells {
            let amp = -w.depth * (2.0 * PI * w.width * w.width).powf(1.5) / volume
                * (-0.5 * g2 * w.width * w.width).exp();
            let phase = -(g[0] * w.center[0] + g[1] * w.center[1] + g[2] * w.center[2]);
            v += Complex64::from_polar(amp, phase);
        }
        if g2 == 0.0 {
            v += self.offset;
        }
        v
    }

    fn validate(&self) -> Result<()> {
        for w in &self.wells {
            if !(w.width > 0.0) || !w.depth.is_finite() || w.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!("bad Gaussian well {w:?}")));
            }
        }
        if !self.offset.is_finite() {
            return Err(Error::InvalidInput("potential offset is not finite".into()));
        }
        Ok(())
    }
}

/// Orbitals as plane-wave coefficient columns, `ψ_p = Σ_g C_gp e^{ig·r}/√V`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalSet {
    coefficients: CMat,
    eigenvalues: Vec<f64>,
    n_occ: usize,
}

impl OrbitalSet {
    pub fn new(coefficients: CMat, eigenvalues: Vec<f64>, n_occ: usize) -> Result<Self> {
        let nb = coefficients.ncols();
        if eigenvalues.len() != nb {
            return Err(Error::Dimension(format!(
                "{} eigenvalues for {nb} orbitals",
                eigenvalues.len()
            )));
        }
        if n_occ > nb {
            return Err(Error::InvalidInput(format!("n_occ = {n_occ} exceeds {nb} orbitals")));
        }
        if eigenvalues.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidInput("non-finite orbital energy".into()));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            return Err(Error::Invariant("orbital energies must be nondecreasing".into()));
        }
        let gram = coefficients.adjoint() * &coefficients;
        let dev = crate::linalg::max_abs_diff(&gram, &CMat::identity(nb, nb));
        if dev > 1e-10 {
            return Err(Error::Invariant(format!(
                "orbitals are not orthonormal (deviation {dev:e})"
            )));
        }
        Ok(OrbitalSet {
            coefficients,
            eigenvalues,
            n_occ,
        })
    }

    pub fn coefficients(&self) -> &CMat {
        &self.coefficients
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n_occ(&self) -> usize {
        self.n_occ
    }

    pub fn n_orbitals(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn n_virt(&self) -> usize {
        self.n_orbitals() - self.n_occ
    }

    pub fn with_occupied(mut self, n_occ: usize) -> Result<Self> {
        if n_occ > self.n_orbitals() {
            return Err(Error::InvalidInput(format!(
                "n_occ = {n_occ} exceeds {} orbitals",
                self.n_orbitals()
            )));
        }
        self.n_occ = n_occ;
        Ok(self)
    }

    /// Keeps the first `n` orbitals.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n < self.n_occ || n > self.n_orbitals() {
            return Err(Error::InvalidInput(format!(
                "cannot keep {n} of {} orbitals with {} occupied",
                self.n_orbitals(),
                self.n_occ
            )));
        }
        Ok(OrbitalSet {
            coefficients: self.coefficients.columns(0, n).into_owned(),
            eigenvalues: self.eigenvalues[..n].to_vec(),
            n_occ: self.n_occ,
        })
    }
}

/// Dense one-electron Hamiltonian `½|g|² δ_gg′ + V(g − g′)`.
pub fn one_electron_matrix(cell: &Cell, basis: &PlaneWaveBasis, potential: &PotentialSpec) -> CMat {
    let n = basis.len();
    let volume = cell.volume();
    let m = basis.millers();
    CMat::from_fn(n, n, |i, j| {
        let d = [m[i][0] - m[j][0], m[i][1] - m[j][1], m[i][2] - m[j][2]];
        let mut x = potential.fourier(cell.cartesian(d), volume);
        if i == j {
            x += basis.kinetic(i);
        }
        x
    })
}

/// Lowest `n_bands` eigenpairs of the one-electron Hamiltonian, with the
/// first `n_occ` marked doubly occupied.
pub fn solve_mean_field(
    cell: &Cell,
    basis: &PlaneWaveBasis,
    potential: &PotentialSpec,
    n_bands: usize,
    n_occ: usize,
) -> Result<OrbitalSet> {
    potential.validate()?;
    if n_bands == 0 || n_bands > basis.len() {
        return Err(Error::InvalidInput(format!(
            "n_bands = {n_bands} must lie in 1..={} (plane waves)",
            basis.len()
        )));
    }
    let h = one_electron_matrix(cell, basis, potential);
    let scale = crate::linalg::max_abs(&h).max(1.0);
    let dev = hermitian_deviation(&h);
    if dev > 1e-10 * scale {
        return Err(Error::Invariant(format!(
            "assembled one-electron matrix is not Hermitian (deviation {dev:e})"
        )));
    }
    let (vals, vecs) = eigh(&h, EigenOrder::Ascending)?;
    OrbitalSet::new(
        vecs.columns(0, n_bands).into_owned(),
        vals[..n_bands].to_vec(),
        n_occ,
    )
}
