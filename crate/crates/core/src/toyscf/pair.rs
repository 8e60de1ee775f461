//! Orbital-pair densities on the difference grid, split into reflection
//! (j = 0) and anti-reflection (j = 1) channels.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_deviation, max_abs, CMat, I, ZERO};
use crate::pwbasis::{Cell, PlaneWaveBasis};

use super::meanfield::OrbitalSet;

/// Pair-density coefficients `C_pq(G) = ∫_cell e^{-iG·r} ψ*_p ψ_q`, stored as
/// the Hermitian channels `η_0 = (C(G) + C(−G))/2` and
/// `η_1 = (C(G) − C(−G))/2i` for each half-space representative of `grid`.
#[derive(Debug, Clone)]
pub struct PairDensityTensor {
    grid: PlaneWaveBasis,
    n_orbitals: usize,
    channels: Vec<[CMat; 2]>,
}

impl PairDensityTensor {
    /// `channels[k]` belongs to `grid.halfspace()[k]`. Both channels must be
    /// Hermitian and the origin's j = 1 channel must vanish.
    pub fn from_channels(grid: PlaneWaveBasis, channels: Vec<[CMat; 2]>) -> Result<Self> {
        if channels.len() != grid.halfspace().len() {
            return Err(Error::Dimension(format!(
                "{} channel pairs for a half-space of {}",
                channels.len(),
                grid.halfspace().len()
            )));
        }
        let n = channels.first().map_or(0, |c| c[0].nrows());
        for (k, pair) in channels.iter().enumerate() {
            for (j, m) in pair.iter().enumerate() {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::Dimension(format!(
                        "pair density at half-space index {k}, j = {j} is {}x{}, expected {n}x{n}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "non-finite pair density at half-space index {k}, j = {j}"
                    )));
                }
                let dev = hermitian_deviation(m);
                if dev > 1e-10 * max_abs(m).max(1.0) {
                    return Err(Error::Invariant(format!(
                        "pair density at G = {:?}, j = {j} is not Hermitian (deviation {dev:e})",
                        grid.millers()[grid.halfspace()[k]]
                    )));
                }
            }
        }
        if let Some(first) = channels.first() {
            let dev = max_abs(&first[1]);
            if dev > 1e-10 {
                return Err(Error::Invariant(format!(
                    "anti-reflection channel at G = 0 must vanish (max {dev:e})"
                )));
            }
        }
        Ok(PairDensityTensor {
            grid,
            n_orbitals: n,
            channels,
        })
    }

    pub fn grid(&self) -> &PlaneWaveBasis {
        &self.grid
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    /// Channel `j` at half-space position `k`.
    pub fn eta(&self, k: usize, j: usize) -> &CMat {
        &self.channels[k][j]
    }

    pub fn channels(&self) -> &[[CMat; 2]] {
        &self.channels
    }

    /// Reassembled `C(G)` for any grid index.
    pub fn full(&self, index: usize) -> CMat {
        let hs = self.grid.halfspace();
        if let Some(k) = hs.iter().position(|&i| i == index) {
            &self.channels[k][0] + self.channels[k][1].map(|z| z * I)
        } else {
            let neg = self.grid.negated(index);
            let k = hs
                .iter()
                .position(|&i| i == neg)
                .expect("every grid point or its negation is in the half-space");
            &self.channels[k][0] - self.channels[k][1].map(|z| z * I)
        }
    }

    /// Keeps the first `n` orbitals.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.n_orbitals {
            return Err(Error::Dimension(format!(
                "cannot keep {n} of {} orbitals",
                self.n_orbitals
            )));
        }
        Ok(PairDensityTensor {
            grid: self.grid.clone(),
            n_orbitals: n,
            channels: self
                .channels
                .iter()
                .map(|[a, b]| [a.view((0, 0), (n, n)).into_owned(), b.view((0, 0), (n, n)).into_owned()])
                .collect(),
        })
    }

    /// Applies `C′ = R† C R` to every channel (orbital rotation `ψ′ = ψ R`).
    pub fn rotated(&self, r: &CMat) -> Result<Self> {
        if r.nrows() != self.n_orbitals {
            return Err(Error::Dimension(format!(
                "rotation has {} rows for {} orbitals",
                r.nrows(),
                self.n_orbitals
            )));
        }
        let channels = self
            .channels
            .iter()
            .map(|[a, b]| [r.adjoint() * a * r, r.adjoint() * b * r])
            .collect();
        Ok(PairDensityTensor {
            grid: self.grid.clone(),
            n_orbitals: r.ncols(),
            channels,
        })
    }
}

/// `C(G)` as a matrix product over the orbital basis rows that stay inside
/// the basis after a shift by G.
fn pair_matrix(coeffs: &CMat, basis: &PlaneWaveBasis, shift: [i32; 3]) -> CMat {
    let nb = coeffs.ncols();
    let mut rows_a = Vec::new();
    let mut rows_b = Vec::new();
    for (g, m) in basis.millers().iter().enumerate() {
        if let Some(k) = basis.index_of([m[0] + shift[0], m[1] + shift[1], m[2] + shift[2]]) {
            rows_a.push(g);
            rows_b.push(k);
        }
    }
    if rows_a.is_empty() {
        return CMat::from_element(nb, nb, ZERO);
    }
    let a = coeffs.select_rows(rows_a.iter());
    let b = coeffs.select_rows(rows_b.iter());
    a.adjoint() * b
}

/// Pair densities on an explicit grid. Passing the orbital grid instead of
/// the difference grid drops large-|G| components (lossy).
pub fn pair_density_on(
    orbitals: &OrbitalSet,
    basis: &PlaneWaveBasis,
    grid: PlaneWaveBasis,
) -> Result<PairDensityTensor> {
    let coeffs = orbitals.coefficients();
    if coeffs.nrows() != basis.len() {
        return Err(Error::Dimension(format!(
            "orbitals have {} plane-wave rows, basis has {}",
            coeffs.nrows(),
            basis.len()
        )));
    }
    let channels: Vec<[CMat; 2]> = grid
        .halfspace()
        .par_iter()
        .map(|&gi| {
            let m = grid.millers()[gi];
            let plus = pair_matrix(coeffs, basis, m);
            let minus = pair_matrix(coeffs, basis, [-m[0], -m[1], -m[2]]);
            let eta0 = (&plus + &minus).scale(0.5);
            let eta1 = (&plus - &minus).map(|z| z * (-0.5 * I));
            [sym(eta0), sym(eta1)]
        })
        .collect();
    PairDensityTensor::from_channels(grid, channels)
}

fn sym(m: CMat) -> CMat {
    (&m + m.adjoint()).scale(0.5)
}

/// Pair densities on the full difference grid of `basis`.
pub fn pair_density(
    orbitals: &OrbitalSet,
    basis: &PlaneWaveBasis,
    cell: &Cell,
) -> Result<PairDensityTensor> {
    let grid = basis.difference_grid(cell)?;
    pair_density_on(orbitals, basis, grid)
}
