//! Dense two-body tensor κ_pqrs for oracle-scale instances.
//!
//! The two-body operator is `½ Σ κ_pqrs E†_pq E_rs`. The soft part is
//! `κ̃_pqrs = 2 Σ_j Σ_{G ∈ half-space} v′(G) η*_pq,j(G) η_rs,j(G)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::HamiltonianInstance;
use crate::linalg::{CMat, ZERO};
use crate::pwbasis::CoulombKernel;

use super::pair::PairDensityTensor;
use super::paw::PawBlock;

/// Orbital-count guard for every O(N_b⁴) dense path.
pub const MAX_ORACLE_ORBITALS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Kappa {
    n: usize,
    data: Vec<Complex64>,
}

impl Kappa {
    pub fn zeros(n: usize) -> Self {
        Kappa {
            n,
            data: vec![ZERO; n.pow(4)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        ((p * self.n + q) * self.n + r) * self.n + s
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> Complex64 {
        self.data[self.idx(p, q, r, s)]
    }

    #[inline]
    pub fn set(&mut self, p: usize, q: usize, r: usize, s: usize, z: Complex64) {
        let i = self.idx(p, q, r, s);
        self.data[i] = z;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &Kappa) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn add(&self, other: &Kappa) -> Kappa {
        assert_eq!(self.n, other.n);
        Kappa {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// Adds `scale · X*_pq Y_rs` for every index.
    pub fn add_outer(&mut self, scale: f64, x: &CMat, y: &CMat) {
        let n = self.n;
        self.data
            .par_chunks_mut(n * n)
            .enumerate()
            .for_each(|(pq, chunk)| {
                let xc = x[(pq / n, pq % n)].conj() * scale;
                if xc == ZERO {
                    return;
                }
                for r in 0..n {
                    for s in 0..n {
                        chunk[r * n + s] += xc * y[(r, s)];
                    }
                }
            });
    }

    /// Tensor seen from rotated orbitals `ψ′ = ψ R` (R may be rectangular):
    /// `κ′_pqrs = Σ R_ap R*_bq R*_cr R_ds κ_abcd`.
    pub fn transform(&self, r: &CMat) -> Result<Kappa> {
        if r.nrows() != self.n {
            return Err(Error::Dimension(format!(
                "rotation has {} rows for {} orbitals",
                r.nrows(),
                self.n
            )));
        }
        let n = self.n;
        let m = r.ncols();
        // One index at a time; `conj[k]` says whether slot k uses R or R*.
        let conj = [false, true, true, false];
        let mut cur = self.data.clone();
        let mut dims = [n, n, n, n];
        for slot in 0..4 {
            let mut new_dims = dims;
            new_dims[slot] = m;
            let mut next = vec![ZERO; new_dims.iter().product()];
            let strides = |d: &[usize; 4]| [d[1] * d[2] * d[3], d[2] * d[3], d[3], 1];
            let so = strides(&dims);
            let sn = strides(&new_dims);
            for i0 in 0..new_dims[0] {
                for i1 in 0..new_dims[1] {
                    for i2 in 0..new_dims[2] {
                        for i3 in 0..new_dims[3] {
                            let idx = [i0, i1, i2, i3];
                            let mut acc = ZERO;
                            for a in 0..n {
                                let mut src = idx;
                                src[slot] = a;
                                let w = r[(a, idx[slot])];
                                let w = if conj[slot] { w.conj() } else { w };
                                let o = src[0] * so[0] + src[1] * so[1] + src[2] * so[2] + src[3];
                                acc += w * cur[o];
                            }
                            next[i0 * sn[0] + i1 * sn[1] + i2 * sn[2] + i3] = acc;
                        }
                    }
                }
            }
            cur = next;
            dims = new_dims;
        }
        Ok(Kappa { n: m, data: cur })
    }

    /// Largest violation of `κ_pqrs = κ*_qpsr` and `κ_pqrs = κ*_rspq`.
    pub fn symmetry_deviation(&self) -> f64 {
        let n = self.n;
        let mut dev = 0.0_f64;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let x = self.get(p, q, r, s);
                        dev = dev
                            .max((x - self.get(q, p, s, r).conj()).norm())
                            .max((x - self.get(r, s, p, q).conj()).norm())
                            .max((x - self.get(s, r, q, p)).norm());
                    }
                }
            }
        }
        dev
    }
}

pub(crate) fn guard(n: usize) -> Result<()> {
    if n > MAX_ORACLE_ORBITALS {
        return Err(Error::GuardRail(format!(
            "dense two-body tensor limited to N_b <= {MAX_ORACLE_ORBITALS}, got {n}"
        )));
    }
    Ok(())
}

/// Soft part by the half-space sum.
pub fn kappa_soft(pd: &PairDensityTensor, kernel: &CoulombKernel) -> Result<Kappa> {
    let n = pd.n_orbitals();
    guard(n)?;
    if kernel.len() != pd.grid().len() {
        return Err(Error::Dimension(format!(
            "kernel has {} entries, pair-density grid has {}",
            kernel.len(),
            pd.grid().len()
        )));
    }
    let mut k = Kappa::zeros(n);
    for (pos, &gi) in pd.grid().halfspace().iter().enumerate() {
        let w = 2.0 * kernel.weight(gi);
        for j in 0..2 {
            let eta = pd.eta(pos, j);
            k.add_outer(w, eta, eta);
        }
    }
    Ok(k)
}

/// PAW part `Σ_a Σ C^a D*_{pq,i₁i₂} D_{rs,i₃i₄}`.
pub fn kappa_paw(blocks: &[PawBlock], n: usize) -> Result<Kappa> {
    guard(n)?;
    let mut k = Kappa::zeros(n);
    for b in blocks {
        if b.n_orbitals() != n {
            return Err(Error::Dimension(format!(
                "atom {} has overlaps for {} orbitals, expected {n}",
                b.atom_id,
                b.n_orbitals()
            )));
        }
        let na = b.n_a();
        let ds: Vec<CMat> = (0..na * na).map(|c| b.d_matrix(c / na, c % na)).collect();
        for (c12, d12) in ds.iter().enumerate() {
            let mut t = CMat::from_element(n, n, ZERO);
            for (c34, d34) in ds.iter().enumerate() {
                let coef = b.c(c12 / na, c12 % na, c34 / na, c34 % na);
                if coef != 0.0 {
                    t += d34.scale(coef);
                }
            }
            // Σ_{34} C D_{34} is already folded into t; the outer product
            // conjugates its first argument.
            k.add_outer(1.0, d12, &t);
        }
    }
    Ok(k)
}

/// Full κ of an instance: soft half-space sum plus all PAW blocks.
pub fn kappa_oracle(inst: &HamiltonianInstance) -> Result<Kappa> {
    let soft = kappa_soft(&inst.pair_density, &inst.kernel)?;
    let paw = kappa_paw(&inst.paw_blocks, inst.n_orbitals())?;
    Ok(soft.add(&paw))
}
