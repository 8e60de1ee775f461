//! Double factorization of the two-body term into squared one-body
//! operators.
//!
//! The Hamiltonian is written as
//! `H = H⁰ + Σ_pq h^corr_pq E_pq + Σ_t w_t (Σ_pq L_t,pq E_pq)²`
//! where each `L_t = u diag(f) u†` is Hermitian. Soft terms have one `t` per
//! half-space G and parity channel j with `L = η_j(G)` and `w = v′(G)`. PAW
//! terms come from the eigendecomposition of each atom's pair tensor and
//! carry `w = ½ sign(ε) |ε|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{HamiltonianInstance, MatrixJson, SquareMatrixJson};
use crate::linalg::{
    eigh, eigh_real, hermitian_deviation, max_abs, reassemble, CMat, EigenOrder, RMat, ZERO,
};
use crate::pwbasis::{CoulombKernel, Miller};
use crate::toyscf::kappa::guard;
use crate::toyscf::{compound_pairs, Kappa, PairDensityTensor, PawBlock};

/// Entries at or below this magnitude are treated as zero when counting
/// parameters.
pub const PARAMETER_FLOOR: f64 = 1e-10;

/// Pair-tensor eigenvalues below this fraction of the largest are dropped.
const PAW_EPS_RELATIVE_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftFactor {
    pub miller: Miller,
    pub gnorm: f64,
    pub j: u8,
    /// v′(G).
    pub weight: f64,
    pub f: Vec<f64>,
    #[serde(with = "matrix_serde")]
    pub u: CMat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PawFactor {
    pub atom_id: usize,
    /// Compound pair labelling this eigenvector slot.
    pub pair: (usize, usize),
    /// |ε|.
    pub eps: f64,
    pub sign: i8,
    pub f: Vec<f64>,
    #[serde(with = "matrix_serde")]
    pub u: CMat,
}

impl PawFactor {
    pub fn weight(&self) -> f64 {
        0.5 * f64::from(self.sign) * self.eps
    }
}

mod matrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        j.to_matrix("u").map_err(serde::de::Error::custom)
    }
}

/// A weighted squared term viewed through its spectrum only.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTerm {
    pub weight: f64,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneBodyTerm {
    pub h: CMat,
    /// `h − ½ Σ_r κ_rprq`.
    pub h_corrected: CMat,
    /// `h + ½ Σ_r (2κ_rrpq − κ_rprq)`.
    pub h_prime: CMat,
    /// Eigenvalues of `h_prime`, ascending.
    pub eps_prime: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedHamiltonian {
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub constant: f64,
    pub one_body: OneBodyTerm,
    pub soft: Vec<SoftFactor>,
    pub paw: Vec<PawFactor>,
    pub truncation_delta: f64,
    /// Size of the pair-density grid.
    pub n_pw_pair: usize,
    /// Size of the orbital grid.
    pub n_pw_orbital: usize,
    /// `n_a` for each PAW block.
    pub paw_sizes: Vec<usize>,
    pub volume: f64,
    /// Smallest nonzero |G| on the pair grid (0 if there is none).
    pub g_min: f64,
}

fn hermitian_or_err(m: &CMat, what: &str) -> Result<CMat> {
    let dev = hermitian_deviation(m);
    if dev > 1e-10 * max_abs(m).max(1.0) {
        return Err(Error::Invariant(format!(
            "{what} is not Hermitian (deviation {dev:e})"
        )));
    }
    Ok((m + m.adjoint()).scale(0.5))
}

/// Eigendecomposition with the conventions used for every factor: descending
/// |f|, phase-fixed columns, and `f = 0, u = I` for the zero matrix.
fn decompose(m: &CMat, what: &str) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    if max_abs(m) == 0.0 {
        return Ok((vec![0.0; n], CMat::identity(n, n)));
    }
    eigh(m, EigenOrder::DescendingMagnitude)
        .map_err(|e| Error::NoConvergence(format!("{what}: {e}")))
}

/// Per-(G, j) eigendecompositions over the half-space, in half-space order
/// with j = 0 before j = 1.
pub fn factor_soft(pd: &PairDensityTensor, kernel: &CoulombKernel) -> Result<Vec<SoftFactor>> {
    check_kernel(pd, kernel)?;
    let grid = pd.grid();
    let out: Vec<Result<[SoftFactor; 2]>> = grid
        .halfspace()
        .par_iter()
        .enumerate()
        .map(|(k, &gi)| {
            let m = grid.millers()[gi];
            let make = |j: usize| -> Result<SoftFactor> {
                let what = format!("pair density at G = {m:?}, j = {j}");
                let eta = hermitian_or_err(pd.eta(k, j), &what)?;
                let (f, u) = decompose(&eta, &what)?;
                Ok(SoftFactor {
                    miller: m,
                    gnorm: grid.norm(gi),
                    j: j as u8,
                    weight: kernel.weight(gi),
                    f,
                    u,
                })
            };
            Ok([make(0)?, make(1)?])
        })
        .collect();
    let mut factors = Vec::with_capacity(2 * out.len());
    for r in out {
        factors.extend(r?);
    }
    Ok(factors)
}

/// Eigenvalues only, for sweeps where storing rotations is wasteful.
pub fn soft_spectrum(pd: &PairDensityTensor, kernel: &CoulombKernel) -> Result<Vec<(f64, SpectralTerm)>> {
    check_kernel(pd, kernel)?;
    let grid = pd.grid();
    let out: Vec<Result<[(f64, SpectralTerm); 2]>> = grid
        .halfspace()
        .par_iter()
        .enumerate()
        .map(|(k, &gi)| {
            let make = |j: usize| -> Result<(f64, SpectralTerm)> {
                let eta = pd.eta(k, j);
                let mut f: Vec<f64> = if max_abs(eta) == 0.0 {
                    vec![0.0; eta.nrows()]
                } else {
                    let sym = (eta + eta.adjoint()).scale(0.5);
                    sym.symmetric_eigenvalues().iter().copied().collect()
                };
                f.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
                Ok((
                    grid.norm(gi),
                    SpectralTerm {
                        weight: kernel.weight(gi),
                        f,
                    },
                ))
            };
            Ok([make(0)?, make(1)?])
        })
        .collect();
    let mut terms = Vec::with_capacity(2 * out.len());
    for r in out {
        terms.extend(r?);
    }
    Ok(terms)
}

fn check_kernel(pd: &PairDensityTensor, kernel: &CoulombKernel) -> Result<()> {
    if kernel.len() != pd.grid().len() {
        return Err(Error::Dimension(format!(
            "kernel has {} entries, pair-density grid has {}",
            kernel.len(),
            pd.grid().len()
        )));
    }
    Ok(())
}

/// Compound pair `(i, j)`, eigenvalue `ε_m` and Hermitian `L_m`.
pub type PawLMatrix = ((usize, usize), f64, CMat);

/// The Hermitian matrices `L_m` and their pair-tensor eigenvalues `ε_m` for
/// one atom, before the final eigendecomposition.
pub fn paw_l_matrices(block: &PawBlock) -> Result<Vec<PawLMatrix>> {
    let na = block.n_a();
    let pairs = compound_pairs(na);
    let np = pairs.len();
    let m = RMat::from_fn(np, np, |k, l| {
        let (a, b) = pairs[k];
        let (c, d) = pairs[l];
        let scale = if a == b { 0.5 } else { 1.0 } * if c == d { 0.5 } else { 1.0 };
        scale * block.c(a, b, c, d)
    });
    let (eps, o) = eigh_real(&m, EigenOrder::DescendingMagnitude)?;
    let largest = eps.first().map_or(0.0, |e| e.abs());
    let s: Vec<CMat> = pairs
        .iter()
        .map(|&(a, b)| {
            let d = block.d_matrix(a, b);
            &d + d.adjoint()
        })
        .collect();
    let nb = block.n_orbitals();
    let mut out = Vec::new();
    for (mi, &e) in eps.iter().enumerate() {
        if largest == 0.0 || e.abs() <= PAW_EPS_RELATIVE_FLOOR * largest {
            continue;
        }
        let mut l = CMat::from_element(nb, nb, ZERO);
        for (k, sk) in s.iter().enumerate() {
            let w = o[(k, mi)];
            if w != 0.0 {
                l += sk.scale(w);
            }
        }
        out.push((pairs[mi], e, l));
    }
    Ok(out)
}

/// Signed eigendecomposition of every PAW block.
pub fn factor_paw(blocks: &[PawBlock]) -> Result<Vec<PawFactor>> {
    let mut factors = Vec::new();
    for b in blocks {
        for (pair, e, l) in paw_l_matrices(b)? {
            let what = format!("PAW factor of atom {} at pair {pair:?}", b.atom_id);
            let l = hermitian_or_err(&l, &what)?;
            let (f, u) = decompose(&l, &what)?;
            factors.push(PawFactor {
                atom_id: b.atom_id,
                pair,
                eps: e.abs(),
                sign: if e < 0.0 { -1 } else { 1 },
                f,
                u,
            });
        }
    }
    Ok(factors)
}

fn finish_one_body(h: &CMat, exchange: &CMat, coulomb: &CMat) -> Result<OneBodyTerm> {
    let h_corrected = hermitian_or_err(&(h - exchange.scale(0.5)), "corrected one-body matrix")?;
    let h_prime = hermitian_or_err(&(&h_corrected + coulomb), "h′")?;
    let (eps_prime, _) = eigh(&h_prime, EigenOrder::Ascending)?;
    Ok(OneBodyTerm {
        h: h.clone(),
        h_corrected,
        h_prime,
        eps_prime,
    })
}

/// Dense path: contracts κ directly.
pub fn effective_one_body(h: &CMat, kappa: &Kappa) -> Result<OneBodyTerm> {
    let n = h.nrows();
    if kappa.n() != n {
        return Err(Error::Dimension(format!(
            "κ is for {} orbitals, h for {n}",
            kappa.n()
        )));
    }
    let mut exchange = CMat::from_element(n, n, ZERO);
    let mut coulomb = CMat::from_element(n, n, ZERO);
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                exchange[(p, q)] += kappa.get(r, p, r, q);
                coulomb[(p, q)] += kappa.get(r, r, p, q);
            }
        }
    }
    finish_one_body(h, &exchange, &coulomb)
}

/// Factor path: `Σ_r κ_rprq = Σ_t 2w_t (L_t²)_pq` and
/// `Σ_r κ_rrpq = Σ_t 2w_t tr(L_t) L_t,pq`.
pub fn effective_one_body_from_terms<'a>(
    h: &CMat,
    terms: impl IntoIterator<Item = (f64, &'a CMat)>,
) -> Result<OneBodyTerm> {
    let n = h.nrows();
    let mut exchange = CMat::from_element(n, n, ZERO);
    let mut coulomb = CMat::from_element(n, n, ZERO);
    for (w, l) in terms {
        exchange += (l * l).scale(2.0 * w);
        coulomb += l * (l.trace() * 2.0 * w);
    }
    finish_one_body(h, &exchange, &coulomb)
}

/// Runs both factorizations and the one-body correction.
pub fn factorize(inst: &HamiltonianInstance) -> Result<FactorizedHamiltonian> {
    let soft = factor_soft(&inst.pair_density, &inst.kernel)?;
    let paw = factor_paw(&inst.paw_blocks)?;
    let mut terms: Vec<(f64, CMat)> = Vec::new();
    let pd = &inst.pair_density;
    for (k, &gi) in pd.grid().halfspace().iter().enumerate() {
        for j in 0..2 {
            terms.push((inst.kernel.weight(gi), pd.eta(k, j).clone()));
        }
    }
    for b in &inst.paw_blocks {
        for (_, e, l) in paw_l_matrices(b)? {
            terms.push((0.5 * e, l));
        }
    }
    let one_body = effective_one_body_from_terms(&inst.h, terms.iter().map(|(w, l)| (*w, l)))?;
    Ok(FactorizedHamiltonian {
        n_orbitals: inst.n_orbitals(),
        n_electrons: inst.electrons(),
        constant: inst.constant,
        one_body,
        soft,
        paw,
        truncation_delta: 0.0,
        n_pw_pair: pd.grid().len(),
        n_pw_orbital: inst.basis.len(),
        paw_sizes: inst.paw_blocks.iter().map(|b| b.n_a()).collect(),
        volume: inst.cell.volume(),
        g_min: pd.grid().min_nonzero_norm().unwrap_or(0.0),
    })
}

/// Threshold below which a soft eigenvalue at |G| is discarded.
pub fn soft_threshold(delta: f64, gnorm: f64, g_min: f64) -> f64 {
    let g = if gnorm > 0.0 { gnorm } else { g_min };
    (delta * g).max(PARAMETER_FLOOR)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("δ must be non-negative, got {delta}")));
    }
    Ok(())
}

/// Zeroes every soft eigenvalue with `|f| ≤ δ|G|` (δ·G_min at the origin)
/// and every eigenvalue at or below the parameter floor. The one-body term is
/// left as computed from the untruncated factors.
pub fn truncate(fh: &FactorizedHamiltonian, delta: f64) -> Result<FactorizedHamiltonian> {
    check_delta(delta)?;
    let mut out = fh.clone();
    for s in &mut out.soft {
        let t = soft_threshold(delta, s.gnorm, fh.g_min);
        for x in &mut s.f {
            if x.abs() <= t {
                *x = 0.0;
            }
        }
    }
    for p in &mut out.paw {
        for x in &mut p.f {
            if x.abs() <= PARAMETER_FLOOR {
                *x = 0.0;
            }
        }
    }
    out.truncation_delta = delta;
    Ok(out)
}

/// Applies the truncation rule to bare spectra.
pub fn truncate_spectrum(terms: &mut [(f64, SpectralTerm)], delta: f64, g_min: f64) -> Result<()> {
    check_delta(delta)?;
    for (g, t) in terms.iter_mut() {
        let th = soft_threshold(delta, *g, g_min);
        for x in &mut t.f {
            if x.abs() <= th {
                *x = 0.0;
            }
        }
    }
    Ok(())
}

impl FactorizedHamiltonian {
    /// All squared terms as (weight, f) pairs, soft first.
    pub fn spectrum(&self) -> Vec<SpectralTerm> {
        self.soft
            .iter()
            .map(|s| SpectralTerm {
                weight: s.weight,
                f: s.f.clone(),
            })
            .chain(self.paw.iter().map(|p| SpectralTerm {
                weight: p.weight(),
                f: p.f.clone(),
            }))
            .collect()
    }

    /// All squared terms as (weight, L = u diag(f) u†).
    pub fn l_matrices(&self) -> Vec<(f64, CMat)> {
        self.soft
            .iter()
            .map(|s| (s.weight, reassemble(&s.u, &s.f)))
            .chain(self.paw.iter().map(|p| (p.weight(), reassemble(&p.u, &p.f))))
            .collect()
    }

    /// Eigenvalues above the parameter floor; each stands for one rotation
    /// column.
    pub fn surviving_parameters(&self) -> usize {
        self.soft
            .iter()
            .flat_map(|s| s.f.iter())
            .chain(self.paw.iter().flat_map(|p| p.f.iter()))
            .filter(|x| x.abs() > PARAMETER_FLOOR)
            .count()
    }

    pub fn check_unitarity(&self, tol: f64) -> Result<()> {
        for s in &self.soft {
            let d = crate::linalg::unitarity_deviation(&s.u);
            if d > tol {
                return Err(Error::Invariant(format!(
                    "soft rotation at G = {:?}, j = {} deviates from unitarity by {d:e}",
                    s.miller, s.j
                )));
            }
        }
        for p in &self.paw {
            let d = crate::linalg::unitarity_deviation(&p.u);
            if d > tol {
                return Err(Error::Invariant(format!(
                    "PAW rotation of atom {} at {:?} deviates from unitarity by {d:e}",
                    p.atom_id, p.pair
                )));
            }
        }
        Ok(())
    }
}

/// `κ_pqrs = Σ_t 2 w_t L_t,qp L_t,rs` from the stored factors.
pub fn reconstruct_kappa(fh: &FactorizedHamiltonian) -> Result<Kappa> {
    guard(fh.n_orbitals)?;
    let mut k = Kappa::zeros(fh.n_orbitals);
    for (w, l) in fh.l_matrices() {
        if w != 0.0 && max_abs(&l) > 0.0 {
            k.add_outer(2.0 * w, &l, &l);
        }
    }
    Ok(k)
}

/// Serialized factor file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorsFile {
    pub version: u32,
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub constant_ha: f64,
    pub truncation_delta: f64,
    pub n_pw_pair: usize,
    pub n_pw_orbital: usize,
    pub paw_sizes: Vec<usize>,
    pub volume_bohr3: f64,
    pub g_min: f64,
    pub h: SquareMatrixJson,
    pub h_corrected: SquareMatrixJson,
    pub h_prime: SquareMatrixJson,
    pub eps_prime: Vec<f64>,
    pub soft: Vec<SoftFactor>,
    pub paw: Vec<PawFactor>,
}

impl FactorizedHamiltonian {
    pub fn to_file(&self) -> FactorsFile {
        FactorsFile {
            version: crate::instance::SCHEMA_VERSION,
            n_orbitals: self.n_orbitals,
            n_electrons: self.n_electrons,
            constant_ha: self.constant,
            truncation_delta: self.truncation_delta,
            n_pw_pair: self.n_pw_pair,
            n_pw_orbital: self.n_pw_orbital,
            paw_sizes: self.paw_sizes.clone(),
            volume_bohr3: self.volume,
            g_min: self.g_min,
            h: SquareMatrixJson::from_matrix(&self.one_body.h),
            h_corrected: SquareMatrixJson::from_matrix(&self.one_body.h_corrected),
            h_prime: SquareMatrixJson::from_matrix(&self.one_body.h_prime),
            eps_prime: self.one_body.eps_prime.clone(),
            soft: self.soft.clone(),
            paw: self.paw.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("factors serialize");
        s.push('\n');
        s
    }

    pub fn from_file(f: FactorsFile) -> Result<Self> {
        let n = f.n_orbitals;
        let one_body = OneBodyTerm {
            h: f.h.to_matrix("h")?,
            h_corrected: f.h_corrected.to_matrix("h_corrected")?,
            h_prime: f.h_prime.to_matrix("h_prime")?,
            eps_prime: f.eps_prime,
        };
        for m in [&one_body.h, &one_body.h_corrected, &one_body.h_prime] {
            if m.nrows() != n {
                return Err(Error::Dimension(format!("one-body matrix is not {n}x{n}")));
            }
            hermitian_or_err(m, "one-body matrix")?;
        }
        for s in &f.soft {
            if s.f.len() != n || s.u.nrows() != n || s.u.ncols() != n {
                return Err(Error::Dimension(format!("soft factor at {:?} has wrong size", s.miller)));
            }
        }
        for p in &f.paw {
            if p.f.len() != n || p.u.nrows() != n || p.u.ncols() != n {
                return Err(Error::Dimension(format!("PAW factor of atom {} has wrong size", p.atom_id)));
            }
        }
        let fh = FactorizedHamiltonian {
            n_orbitals: n,
            n_electrons: f.n_electrons,
            constant: f.constant_ha,
            one_body,
            soft: f.soft,
            paw: f.paw,
            truncation_delta: f.truncation_delta,
            n_pw_pair: f.n_pw_pair,
            n_pw_orbital: f.n_pw_orbital,
            paw_sizes: f.paw_sizes,
            volume: f.volume_bohr3,
            g_min: f.g_min,
        };
        fh.check_unitarity(1e-10)?;
        Ok(fh)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: FactorsFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            pointer: crate::instance::json_pointer(e.path()),
            message: e.inner().to_string(),
        })?;
        Self::from_file(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    #[test]
    fn zero_matrix_gives_identity() {
        let (f, u) = decompose(&CMat::from_element(3, 3, ZERO), "zero").unwrap();
        assert_eq!(f, vec![0.0; 3]);
        assert_eq!(u, CMat::identity(3, 3));
    }

    #[test]
    fn one_by_one() {
        let m = CMat::from_element(1, 1, ONE * -0.25);
        let (f, u) = decompose(&m, "scalar").unwrap();
        assert_eq!(f, vec![-0.25]);
        assert_eq!(u[(0, 0)], ONE);
    }

    #[test]
    fn threshold_at_origin_uses_g_min() {
        assert_eq!(soft_threshold(2.0, 0.0, 0.5), 1.0);
        assert_eq!(soft_threshold(2.0, 3.0, 0.5), 6.0);
        assert_eq!(soft_threshold(0.0, 3.0, 0.5), PARAMETER_FLOOR);
    }
}
