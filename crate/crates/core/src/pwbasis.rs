//! Periodic cells, plane-wave G-vector grids and the regularized Coulomb
//! kernel.
//!
//! Cutoffs cross the API boundary in eV; everything inside is Hartree atomic
//! units (Bohr, Bohr⁻¹, Hartree).

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HARTREE_EV: f64 = 27.211_386_245_988;

pub type Miller = [i32; 3];

/// A periodic simulation cell. Rows of `lattice` are the lattice vectors in
/// Bohr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    lattice: [[f64; 3]; 3],
    #[serde(skip)]
    volume: f64,
}

impl Cell {
    pub fn new(lattice: [[f64; 3]; 3]) -> Result<Self> {
        if lattice.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("lattice contains non-finite entries".into()));
        }
        let det = Self::matrix_of(&lattice).determinant();
        let scale: f64 = lattice
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
            .product();
        if scale == 0.0 || det.abs() <= 1e-12 * scale {
            return Err(Error::InvalidInput("lattice matrix is singular".into()));
        }
        Ok(Cell {
            lattice,
            volume: det.abs(),
        })
    }

    pub fn cubic(a: f64) -> Result<Self> {
        Self::new([[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]])
    }

    /// Orthorhombic cell with edge lengths `a`, `b`, `c`.
    pub fn orthorhombic(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    fn matrix_of(lattice: &[[f64; 3]; 3]) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| lattice[i][j])
    }

    pub fn lattice(&self) -> &[[f64; 3]; 3] {
        &self.lattice
    }

    pub fn volume(&self) -> f64 {
        if self.volume > 0.0 {
            self.volume
        } else {
            Self::matrix_of(&self.lattice).determinant().abs()
        }
    }

    /// Reciprocal vectors as rows, `a_i · b_j = 2π δ_ij`.
    pub fn reciprocal(&self) -> [[f64; 3]; 3] {
        let a = Self::matrix_of(&self.lattice);
        let inv = a.try_inverse().expect("validated lattice is invertible");
        let b = inv.transpose() * (2.0 * PI);
        [
            [b[(0, 0)], b[(0, 1)], b[(0, 2)]],
            [b[(1, 0)], b[(1, 1)], b[(1, 2)]],
            [b[(2, 0)], b[(2, 1)], b[(2, 2)]],
        ]
    }

    pub fn cartesian(&self, m: Miller) -> [f64; 3] {
        let b = self.reciprocal();
        let mut g = [0.0; 3];
        for (i, bi) in b.iter().enumerate() {
            for k in 0..3 {
                g[k] += f64::from(m[i]) * bi[k];
            }
        }
        g
    }

    /// Supercell obtained by scaling each lattice vector.
    pub fn supercell(&self, reps: [u32; 3]) -> Result<Self> {
        let mut lat = self.lattice;
        for (i, row) in lat.iter_mut().enumerate() {
            for x in row.iter_mut() {
                *x *= f64::from(reps[i]);
            }
        }
        Self::new(lat)
    }
}

/// An ordered set of G-vectors closed under negation.
#[derive(Debug, Clone)]
pub struct PlaneWaveBasis {
    cutoff_ha: f64,
    cutoff_ev: f64,
    millers: Vec<Miller>,
    gvecs: Vec<[f64; 3]>,
    norms: Vec<f64>,
    halfspace: Vec<usize>,
    negation: Vec<usize>,
    lookup: HashMap<Miller, usize>,
}

fn is_positive(m: Miller) -> bool {
    m.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0)
}

fn neg(m: Miller) -> Miller {
    [-m[0], -m[1], -m[2]]
}

/// All G with ½|G|² ≤ `cutoff_ev` (converted to Hartree), sorted
/// lexicographically by Miller index.
pub fn build_basis(cell: &Cell, cutoff_ev: f64) -> Result<PlaneWaveBasis> {
    if !(cutoff_ev > 0.0) || !cutoff_ev.is_finite() {
        return Err(Error::InvalidInput(format!(
            "cutoff must be positive and finite, got {cutoff_ev}"
        )));
    }
    let ecut = cutoff_ev / HARTREE_EV;
    let gmax = (2.0 * ecut).sqrt();
    let mut bounds = [0i32; 3];
    for (i, a) in cell.lattice().iter().enumerate() {
        let len = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        bounds[i] = (len * gmax / (2.0 * PI)).floor() as i32 + 1;
    }
    let mut millers = Vec::new();
    for m0 in -bounds[0]..=bounds[0] {
        for m1 in -bounds[1]..=bounds[1] {
            for m2 in -bounds[2]..=bounds[2] {
                let m = [m0, m1, m2];
                let g = cell.cartesian(m);
                if 0.5 * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) <= ecut {
                    millers.push(m);
                }
            }
        }
    }
    if millers.len() == 1 {
        log::warn!("cutoff {cutoff_ev} eV keeps only G = 0");
    }
    let mut basis = PlaneWaveBasis::from_millers(cell, millers, ecut)?;
    basis.cutoff_ev = cutoff_ev;
    Ok(basis)
}

impl PlaneWaveBasis {
    /// Builds a basis from an arbitrary Miller set. The set must contain the
    /// origin and be closed under negation.
    pub fn from_millers(cell: &Cell, mut millers: Vec<Miller>, cutoff_ha: f64) -> Result<Self> {
        millers.sort_unstable();
        millers.dedup();
        let lookup: HashMap<Miller, usize> =
            millers.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        if !lookup.contains_key(&[0, 0, 0]) {
            return Err(Error::InvalidInput("G-vector set lacks the origin".into()));
        }
        let mut negation = Vec::with_capacity(millers.len());
        for &m in &millers {
            match lookup.get(&neg(m)) {
                Some(&j) => negation.push(j),
                None => {
                    return Err(Error::Invariant(format!(
                        "G-vector set is not closed under negation: {m:?} present, {:?} missing",
                        neg(m)
                    )))
                }
            }
        }
        let gvecs: Vec<[f64; 3]> = millers.iter().map(|&m| cell.cartesian(m)).collect();
        let norms = gvecs
            .iter()
            .map(|g| (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt())
            .collect();
        let origin = lookup[&[0, 0, 0]];
        let mut halfspace = vec![origin];
        halfspace.extend(
            millers
                .iter()
                .enumerate()
                .filter(|(_, &m)| is_positive(m))
                .map(|(i, _)| i),
        );
        Ok(PlaneWaveBasis {
            cutoff_ha,
            cutoff_ev: cutoff_ha * HARTREE_EV,
            millers,
            gvecs,
            norms,
            halfspace,
            negation,
            lookup,
        })
    }

    /// The set of all differences g − g′ of this basis: the grid on which
    /// orbital-pair densities live.
    pub fn difference_grid(&self, cell: &Cell) -> Result<Self> {
        let mut set = std::collections::BTreeSet::new();
        for a in &self.millers {
            for b in &self.millers {
                set.insert([a[0] - b[0], a[1] - b[1], a[2] - b[2]]);
            }
        }
        Self::from_millers(cell, set.into_iter().collect(), 4.0 * self.cutoff_ha)
    }

    pub fn len(&self) -> usize {
        self.millers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.millers.is_empty()
    }

    pub fn cutoff_ha(&self) -> f64 {
        self.cutoff_ha
    }

    /// Cutoff in eV as originally requested.
    pub fn cutoff_ev(&self) -> f64 {
        self.cutoff_ev
    }

    pub fn millers(&self) -> &[Miller] {
        &self.millers
    }

    pub fn gvec(&self, i: usize) -> [f64; 3] {
        self.gvecs[i]
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn kinetic(&self, i: usize) -> f64 {
        0.5 * self.norms[i] * self.norms[i]
    }

    /// Indices of one representative per {G, −G} pair, origin first.
    pub fn halfspace(&self) -> &[usize] {
        &self.halfspace
    }

    pub fn negated(&self, i: usize) -> usize {
        self.negation[i]
    }

    pub fn index_of(&self, m: Miller) -> Option<usize> {
        self.lookup.get(&m).copied()
    }

    pub fn origin(&self) -> usize {
        self.halfspace[0]
    }

    /// Smallest nonzero |G| on the grid, if any.
    pub fn min_nonzero_norm(&self) -> Option<f64> {
        self.norms
            .iter()
            .copied()
            .filter(|&g| g > 0.0)
            .min_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regularization", rename_all = "snake_case")]
pub enum Regularization {
    /// Coulomb kernel truncated at the radius of the sphere with the cell's
    /// volume.
    SphericalTruncation,
    /// Externally supplied regularized G = 0 value (before halving).
    UserValue { v0: f64 },
}

/// Coulomb kernel values on a basis, with the regularized G = 0 entry.
#[derive(Debug, Clone)]
pub struct CoulombKernel {
    values: Vec<f64>,
    origin: usize,
    v_reg0: f64,
    regularization: Regularization,
}

/// Regularized G = 0 value `2π R_c² / V` with `R_c = (3V/4π)^{1/3}`.
pub fn spherical_truncation_v0(volume: f64) -> f64 {
    let rc = (3.0 * volume / (4.0 * PI)).cbrt();
    2.0 * PI * rc * rc / volume
}

pub fn coulomb_kernel(
    basis: &PlaneWaveBasis,
    cell: &Cell,
    regularization: Regularization,
) -> Result<CoulombKernel> {
    let volume = cell.volume();
    let v_reg0 = match regularization {
        Regularization::SphericalTruncation => spherical_truncation_v0(volume),
        Regularization::UserValue { v0 } => {
            if !v0.is_finite() || v0 < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "user-supplied v(0) must be finite and non-negative, got {v0}"
                )));
            }
            v0
        }
    };
    let origin = basis.origin();
    let values = (0..basis.len())
        .map(|i| {
            if i == origin {
                v_reg0
            } else {
                let g = basis.norm(i);
                4.0 * PI / (volume * g * g)
            }
        })
        .collect();
    Ok(CoulombKernel {
        values,
        origin,
        v_reg0,
        regularization,
    })
}

impl CoulombKernel {
    /// v(G), with the regularized value at the origin.
    pub fn v(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Half-space weight v′(G): v(G) away from the origin, v(0)/2 at it.
    pub fn weight(&self, i: usize) -> f64 {
        if i == self.origin {
            0.5 * self.v_reg0
        } else {
            self.values[i]
        }
    }

    pub fn v_reg0(&self) -> f64 {
        self.v_reg0
    }

    pub fn v0_prime(&self) -> f64 {
        0.5 * self.v_reg0
    }

    /// Always true: the G = 0 half-space weight is v(0)/2.
    pub fn halved_zero(&self) -> bool {
        true
    }

    pub fn regularization(&self) -> Regularization {
        self.regularization
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
