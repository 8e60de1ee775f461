//! Dense Fock-space verification: direct and factored Hamiltonian assembly,
//! Hermitian block encodings and the Chebyshev square.
//!
//! Spin orbitals are bits: spatial orbital `p` with spin α is bit `p`, with
//! spin β bit `N_b + p`. Determinants are normal-ordered by ascending bit
//! index and listed in ascending bitstring order.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::factorize::{FactorizedHamiltonian, OneBodyTerm};
use crate::linalg::{eigh, psd_sqrt, CMat, EigenOrder, ONE, ZERO};
use crate::toyscf::Kappa;

pub const MAX_FOCK_ORBITALS: usize = 6;
pub const MAX_FOCK_DIMENSION: usize = 2000;

#[derive(Debug, Clone)]
pub struct FockSpace {
    n_orbitals: usize,
    n_electrons: usize,
    two_sz: Option<i32>,
    states: Vec<u64>,
    index: HashMap<u64, usize>,
}

/// Sparse real operator as (row, column, value) triples.
#[derive(Debug, Clone, Default)]
pub struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseOp {
    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::from_element(self.dim, self.dim, ZERO);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// `coef · self · rhs` added into `out`.
    fn mul_add(&self, coef: Complex64, rhs: &CMat, out: &mut CMat) {
        for &(i, j, v) in &self.entries {
            let c = coef * v;
            for k in 0..rhs.ncols() {
                out[(i, k)] += c * rhs[(j, k)];
            }
        }
    }
}

impl FockSpace {
    /// All determinants with `n_electrons` electrons in `2 N_b` spin orbitals.
    pub fn new(n_orbitals: usize, n_electrons: usize) -> Result<Self> {
        Self::build(n_orbitals, n_electrons, None)
    }

    /// Only determinants with `2 S_z = n_α − n_β` equal to `two_sz`.
    pub fn with_sz(n_orbitals: usize, n_electrons: usize, two_sz: i32) -> Result<Self> {
        Self::build(n_orbitals, n_electrons, Some(two_sz))
    }

    fn build(n_orbitals: usize, n_electrons: usize, two_sz: Option<i32>) -> Result<Self> {
        if n_orbitals == 0 || n_orbitals > MAX_FOCK_ORBITALS {
            return Err(Error::GuardRail(format!(
                "Fock space limited to 1..={MAX_FOCK_ORBITALS} spatial orbitals, got {n_orbitals}"
            )));
        }
        if n_electrons > 2 * n_orbitals {
            return Err(Error::InvalidInput(format!(
                "{n_electrons} electrons do not fit in {n_orbitals} orbitals"
            )));
        }
        let nso = 2 * n_orbitals;
        let alpha_mask = (1u64 << n_orbitals) - 1;
        let states: Vec<u64> = (0u64..(1u64 << nso))
            .filter(|s| s.count_ones() as usize == n_electrons)
            .filter(|s| {
                two_sz.is_none_or(|t| {
                    let na = (s & alpha_mask).count_ones() as i32;
                    let nb = (s >> n_orbitals).count_ones() as i32;
                    na - nb == t
                })
            })
            .collect();
        if states.len() > MAX_FOCK_DIMENSION {
            return Err(Error::GuardRail(format!(
                "Fock-space dimension {} exceeds {MAX_FOCK_DIMENSION}",
                states.len()
            )));
        }
        if states.is_empty() {
            return Err(Error::InvalidInput("empty Fock-space sector".into()));
        }
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(FockSpace {
            n_orbitals,
            n_electrons,
            two_sz,
            states,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn two_sz(&self) -> Option<i32> {
        self.two_sz
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.index.get(&state).copied()
    }

    /// Occupation (0, 1 or 2) of spatial orbital `p` in state `i`.
    pub fn occupation(&self, i: usize, p: usize) -> u32 {
        let s = self.states[i];
        (((s >> p) & 1) + ((s >> (self.n_orbitals + p)) & 1)) as u32
    }

    fn check_index(&self, p: usize) -> Result<()> {
        if p >= self.n_orbitals {
            return Err(Error::InvalidInput(format!(
                "orbital index {p} out of range for {} orbitals",
                self.n_orbitals
            )));
        }
        Ok(())
    }

    /// `E_pq = Σ_σ a†_pσ a_qσ` in sparse form.
    pub fn excitation_sparse(&self, p: usize, q: usize) -> Result<SparseOp> {
        self.check_index(p)?;
        self.check_index(q)?;
        let mut entries = Vec::new();
        for (col, &s) in self.states.iter().enumerate() {
            for spin in 0..2 {
                let off = spin * self.n_orbitals;
                if let Some((t, sign)) = excite(s, off + p, off + q) {
                    if let Some(&row) = self.index.get(&t) {
                        entries.push((row, col, sign));
                    }
                }
            }
        }
        Ok(SparseOp {
            dim: self.dim(),
            entries,
        })
    }

    pub fn excitation_operator(&self, p: usize, q: usize) -> Result<CMat> {
        Ok(self.excitation_sparse(p, q)?.to_dense())
    }

    pub fn number_operator(&self) -> CMat {
        CMat::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j {
                Complex64::new(self.states[i].count_ones() as f64, 0.0)
            } else {
                ZERO
            }
        })
    }

    pub fn sz_operator(&self) -> CMat {
        let mask = (1u64 << self.n_orbitals) - 1;
        CMat::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j {
                let s = self.states[i];
                let d = (s & mask).count_ones() as f64 - (s >> self.n_orbitals).count_ones() as f64;
                Complex64::new(0.5 * d, 0.0)
            } else {
                ZERO
            }
        })
    }

    fn all_excitations(&self) -> Result<Vec<SparseOp>> {
        let n = self.n_orbitals;
        (0..n * n).map(|k| self.excitation_sparse(k / n, k % n)).collect()
    }

    /// State indices grouped by the number of spin-α electrons.
    pub fn alpha_sectors(&self) -> Vec<Vec<usize>> {
        let mask = (1u64 << self.n_orbitals) - 1;
        let mut out = vec![Vec::new(); self.n_orbitals + 1];
        for (i, &s) in self.states.iter().enumerate() {
            out[(s & mask).count_ones() as usize].push(i);
        }
        out.retain(|v| !v.is_empty());
        out
    }

    /// Fock-space image of a one-body rotation `u` (`a†_q ↦ Σ_p a†_p u_pq`
    /// on both spins): `⟨I|Û|J⟩ = det u[Iα, Jα] · det u[Iβ, Jβ]`.
    pub fn rotation_operator(&self, u: &CMat) -> Result<CMat> {
        let n = self.n_orbitals;
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::Dimension(format!("rotation must be {n}x{n}")));
        }
        let all: Vec<usize> = (0..self.dim()).collect();
        Ok(self.rotation_block(u, &all))
    }

    /// Rows and columns `idx` of the rotation operator.
    fn rotation_block(&self, u: &CMat, idx: &[usize]) -> CMat {
        let n = self.n_orbitals;
        let mask = (1u64 << n) - 1;
        // Compound matrices: det u[I, J] for every pair of equal-size subsets.
        let mut minors: HashMap<(u64, u64), Complex64> = HashMap::new();
        let mut minor = |rows: u64, cols: u64| -> Complex64 {
            if rows.count_ones() != cols.count_ones() {
                return ZERO;
            }
            if rows == 0 {
                return ONE;
            }
            *minors.entry((rows, cols)).or_insert_with(|| {
                let r: Vec<usize> = (0..n).filter(|&k| (rows >> k) & 1 == 1).collect();
                let c: Vec<usize> = (0..n).filter(|&k| (cols >> k) & 1 == 1).collect();
                CMat::from_fn(r.len(), c.len(), |a, b| u[(r[a], c[b])]).determinant()
            })
        };
        let mut out = CMat::from_element(idx.len(), idx.len(), ZERO);
        for (a, &i) in idx.iter().enumerate() {
            let si = self.states[i];
            for (b, &j) in idx.iter().enumerate() {
                let sj = self.states[j];
                let x = minor(si & mask, sj & mask);
                if x != ZERO {
                    out[(a, b)] = x * minor(si >> n, sj >> n);
                }
            }
        }
        out
    }
}

/// `a†_p a_q |s⟩` as (new state, sign), or `None` if it vanishes.
fn excite(s: u64, p: usize, q: usize) -> Option<(u64, f64)> {
    if (s >> q) & 1 == 0 {
        return None;
    }
    let below = |x: u64, k: usize| (x & ((1u64 << k) - 1)).count_ones();
    let mut sign = below(s, q);
    let t = s & !(1u64 << q);
    if (t >> p) & 1 == 1 {
        return None;
    }
    sign += below(t, p);
    let t = t | (1u64 << p);
    Some((t, if sign % 2 == 0 { 1.0 } else { -1.0 }))
}

fn check_dims(n: usize, fock: &FockSpace) -> Result<()> {
    if fock.n_orbitals() != n {
        return Err(Error::Dimension(format!(
            "Hamiltonian has {n} orbitals, Fock space {}",
            fock.n_orbitals()
        )));
    }
    Ok(())
}

fn one_body_part(h: &CMat, constant: f64, exc: &[SparseOp], fock: &FockSpace) -> CMat {
    let n = fock.n_orbitals();
    let d = fock.dim();
    let mut out = CMat::identity(d, d).scale(constant);
    for (k, e) in exc.iter().enumerate() {
        let c = h[(k / n, k % n)];
        if c == ZERO {
            continue;
        }
        for &(i, j, v) in &e.entries {
            out[(i, j)] += c * v;
        }
    }
    out
}

/// `H = H⁰ + Σ (h − ½Σ_r κ_rprq) E_pq + ½ Σ κ_pqrs E_qp E_rs`.
pub fn fock_hamiltonian_direct(
    one_body: &OneBodyTerm,
    kappa: &Kappa,
    constant: f64,
    fock: &FockSpace,
) -> Result<CMat> {
    let n = kappa.n();
    check_dims(n, fock)?;
    let exc = fock.all_excitations()?;
    let d = fock.dim();
    let mut out = one_body_part(&one_body.h_corrected, constant, &exc, fock);
    for p in 0..n {
        for q in 0..n {
            // B = Σ_rs κ_pqrs E_rs
            let mut b = CMat::from_element(d, d, ZERO);
            for (k, e) in exc.iter().enumerate() {
                let c = kappa.get(p, q, k / n, k % n);
                if c == ZERO {
                    continue;
                }
                for &(i, j, v) in &e.entries {
                    b[(i, j)] += c * v;
                }
            }
            exc[q * n + p].mul_add(Complex64::new(0.5, 0.0), &b, &mut out);
        }
    }
    Ok(out)
}

/// Shared sparsity pattern of every `Σ_pq L_pq E_pq`: CSR rows of unique
/// (row, column) slots, each a list of (pq index, matrix element).
struct Pattern {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    terms: Vec<Vec<(usize, f64)>>,
}

impl Pattern {
    fn new(exc: &[SparseOp], d: usize) -> Self {
        let mut slots: Vec<HashMap<usize, Vec<(usize, f64)>>> = vec![HashMap::new(); d];
        for (k, e) in exc.iter().enumerate() {
            for &(i, j, v) in &e.entries {
                slots[i].entry(j).or_default().push((k, v));
            }
        }
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut terms = Vec::new();
        for row in slots {
            let mut row: Vec<_> = row.into_iter().collect();
            row.sort_by_key(|(j, _)| *j);
            for (j, t) in row {
                cols.push(j);
                terms.push(t);
            }
            row_start.push(cols.len());
        }
        Pattern { row_start, cols, terms }
    }

    fn values(&self, l: &CMat) -> Vec<Complex64> {
        let n = l.nrows();
        self.terms
            .iter()
            .map(|t| t.iter().map(|&(k, v)| l[(k / n, k % n)] * v).sum())
            .collect()
    }

    /// `out += w A²` for `A` with entries `vals` on this pattern.
    fn add_square(&self, vals: &[Complex64], w: f64, out: &mut CMat) {
        let d = self.row_start.len() - 1;
        for i in 0..d {
            for a in self.row_start[i]..self.row_start[i + 1] {
                let k = self.cols[a];
                let x = vals[a] * w;
                if x == ZERO {
                    continue;
                }
                for b in self.row_start[k]..self.row_start[k + 1] {
                    out[(i, self.cols[b])] += x * vals[b];
                }
            }
        }
    }
}

/// `H = H⁰ + Σ h^corr_pq E_pq + Σ_t w_t (Σ_pq L_t,pq E_pq)²`.
pub fn fock_hamiltonian_factored(fh: &FactorizedHamiltonian, fock: &FockSpace) -> Result<CMat> {
    check_dims(fh.n_orbitals, fock)?;
    let exc = fock.all_excitations()?;
    let pattern = Pattern::new(&exc, fock.dim());
    let mut out = one_body_part(&fh.one_body.h_corrected, fh.constant, &exc, fock);
    for (w, l) in fh.l_matrices() {
        if w == 0.0 || crate::linalg::max_abs(&l) == 0.0 {
            continue;
        }
        pattern.add_square(&pattern.values(&l), w, &mut out);
    }
    Ok(out)
}

/// Same as [`fock_hamiltonian_factored`] but each square is built as
/// `Û (Σ_p f_p n̂_p)² Û†` from determinants of the rotation.
///
/// Within a sector of fixed spin-α count `Û = Λ^a(u) ⊗ Λ^b(u)` (compound
/// matrices), and with `x_I = Σ_{p∈I} f_p` the diagonal factor splits as
/// `x_α² + 2 x_α x_β + x_β²`, so each square is a sum of three Kronecker
/// products of compound-space matrices.
pub fn fock_hamiltonian_rotated(fh: &FactorizedHamiltonian, fock: &FockSpace) -> Result<CMat> {
    check_dims(fh.n_orbitals, fock)?;
    let exc = fock.all_excitations()?;
    let n = fh.n_orbitals;
    let mut out = one_body_part(&fh.one_body.h_corrected, fh.constant, &exc, fock);
    let strings = Strings::new(n);
    let mask = (1u64 << n) - 1;
    let coords: Vec<(usize, usize, usize, usize)> = fock
        .states()
        .iter()
        .map(|&s| {
            let (a, b) = (s & mask, s >> n);
            (a.count_ones() as usize, strings.rank[&a], b.count_ones() as usize, strings.rank[&b])
        })
        .collect();
    let sectors = fock.alpha_sectors();
    let terms = fh
        .soft
        .iter()
        .map(|s| (s.weight, &s.f, &s.u))
        .chain(fh.paw.iter().map(|p| (p.weight(), &p.f, &p.u)));
    for (w, f, u) in terms {
        if w == 0.0 || f.iter().all(|x| *x == 0.0) {
            continue;
        }
        // p[k][m] = Λ^k(u) diag(x^m) Λ^k(u)†
        let p: Vec<[CMat; 3]> = (0..=n).map(|k| strings.moments(u, f, k)).collect();
        for sector in &sectors {
            for &i in sector {
                let (ka, ia, kb, ib) = coords[i];
                for &j in sector {
                    let (_, ja, _, jb) = coords[j];
                    let v = p[ka][2][(ia, ja)] * p[kb][0][(ib, jb)]
                        + 2.0 * p[ka][1][(ia, ja)] * p[kb][1][(ib, jb)]
                        + p[ka][0][(ia, ja)] * p[kb][2][(ib, jb)];
                    out[(i, j)] += v * w;
                }
            }
        }
    }
    Ok(out)
}

/// Occupation strings of `n` orbitals grouped by electron count.
struct Strings {
    by_count: Vec<Vec<u64>>,
    rank: HashMap<u64, usize>,
}

impl Strings {
    fn new(n: usize) -> Self {
        let mut by_count = vec![Vec::new(); n + 1];
        let mut rank = HashMap::new();
        for s in 0..(1u64 << n) {
            let k = s.count_ones() as usize;
            rank.insert(s, by_count[k].len());
            by_count[k].push(s);
        }
        Strings { by_count, rank }
    }

    fn moments(&self, u: &CMat, f: &[f64], k: usize) -> [CMat; 3] {
        let n = u.nrows();
        let strs = &self.by_count[k];
        let idx = |s: u64| -> Vec<usize> { (0..n).filter(|&t| (s >> t) & 1 == 1).collect() };
        let sets: Vec<Vec<usize>> = strs.iter().map(|&s| idx(s)).collect();
        let c = strs.len();
        let compound = CMat::from_fn(c, c, |a, b| {
            if k == 0 {
                ONE
            } else {
                CMat::from_fn(k, k, |r, t| u[(sets[a][r], sets[b][t])]).determinant()
            }
        });
        let x: Vec<f64> = sets.iter().map(|s| s.iter().map(|&p| f[p]).sum()).collect();
        let with = |m: i32| {
            let mut scaled = compound.clone();
            for (col, xv) in x.iter().enumerate() {
                scaled.column_mut(col).scale_mut(xv.powi(m));
            }
            scaled * compound.adjoint()
        };
        [with(0), with(1), with(2)]
    }
}

/// Ascending eigenvalues of a dense Hermitian matrix.
pub fn spectrum(h: &CMat) -> Result<Vec<f64>> {
    Ok(eigh(h, EigenOrder::Ascending)?.0)
}

/// Ascending eigenvalues of a number-conserving Fock-space operator,
/// diagonalized one spin-α sector at a time. Falls back to the full matrix
/// if `h` couples sectors.
pub fn fock_spectrum(h: &CMat, fock: &FockSpace) -> Result<Vec<f64>> {
    let sectors = fock.alpha_sectors();
    let mut label = vec![0; fock.dim()];
    for (k, s) in sectors.iter().enumerate() {
        for &i in s {
            label[i] = k;
        }
    }
    let scale = crate::linalg::max_abs(h).max(1.0);
    let coupled = (0..h.nrows()).any(|i| (0..h.ncols()).any(|j| label[i] != label[j] && h[(i, j)].norm() > 1e-14 * scale));
    if coupled {
        return spectrum(h);
    }
    let mut ev = Vec::with_capacity(fock.dim());
    for s in &sectors {
        let block = CMat::from_fn(s.len(), s.len(), |a, b| h[(s[a], s[b])]);
        ev.extend(spectrum(&block)?);
    }
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

#[derive(Debug, Clone)]
pub struct BlockEncoding {
    pub matrix: CMat,
    pub alpha: f64,
    pub coding_dim: usize,
}

/// Largest |eigenvalue| of a Hermitian matrix.
pub fn spectral_norm(a: &CMat) -> Result<f64> {
    let (v, _) = eigh(a, EigenOrder::DescendingMagnitude)?;
    Ok(v.first().map_or(0.0, |x| x.abs()))
}

/// `[[A/α, B], [B, −A/α]]` with `B = sqrt(I − (A/α)²)`.
pub fn hermitian_block_encoding(a: &CMat, alpha: f64) -> Result<BlockEncoding> {
    let m = a.nrows();
    if a.ncols() != m {
        return Err(Error::Dimension("block encoding needs a square matrix".into()));
    }
    let herm = crate::linalg::hermitian_deviation(a);
    if herm > 1e-12 * crate::linalg::max_abs(a).max(1.0) {
        return Err(Error::Invariant(format!("matrix is not Hermitian (deviation {herm:e})")));
    }
    let norm = spectral_norm(a)?;
    if !(alpha > 0.0) || alpha < norm * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!(
            "subnormalization too small: α = {alpha} < ‖A‖ = {norm}"
        )));
    }
    let x = a.unscale(alpha);
    let x = (&x + x.adjoint()).scale(0.5);
    let b = psd_sqrt(&(CMat::identity(m, m) - &x * &x), 1e-14)?;
    let mut u = CMat::from_element(2 * m, 2 * m, ZERO);
    u.view_mut((0, 0), (m, m)).copy_from(&x);
    u.view_mut((0, m), (m, m)).copy_from(&b);
    u.view_mut((m, 0), (m, m)).copy_from(&b);
    u.view_mut((m, m), (m, m)).copy_from(&(-&x));
    Ok(BlockEncoding {
        matrix: u,
        alpha,
        coding_dim: m,
    })
}

/// `U R U` for `R = diag(I, −I)`, or `diag(−I, I)` when `flipped`.
pub fn reflect_product(be: &BlockEncoding, flipped: bool) -> CMat {
    let m = be.coding_dim;
    let mut r = CMat::identity(2 * m, 2 * m);
    for k in 0..2 * m {
        let top = k < m;
        if top == flipped {
            r[(k, k)] = -ONE;
        }
    }
    &be.matrix * r * &be.matrix
}

/// `U R U`, checking that its top-left block equals `2(A/α)² − I`.
pub fn chebyshev_square(be: &BlockEncoding) -> Result<CMat> {
    let m = be.coding_dim;
    let prod = reflect_product(be, false);
    let x = be.matrix.view((0, 0), (m, m)).into_owned();
    let target = (&x * &x).scale(2.0) - CMat::identity(m, m);
    let dev = crate::linalg::max_abs_diff(&prod.view((0, 0), (m, m)).into_owned(), &target);
    if dev > 1e-12 {
        return Err(Error::Invariant(format!(
            "Chebyshev square deviates from 2(A/α)² − I by {dev:e}"
        )));
    }
    Ok(prod)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_and_order() {
        let f = FockSpace::new(3, 2).unwrap();
        assert_eq!(f.dim(), 15);
        assert!(f.states().windows(2).all(|w| w[0] < w[1]));
        let s = FockSpace::with_sz(3, 2, 0).unwrap();
        assert_eq!(s.dim(), 9);
        assert!(FockSpace::new(7, 2).is_err());
    }

    #[test]
    fn number_operator_diagonal() {
        let f = FockSpace::new(3, 3).unwrap();
        for p in 0..3 {
            let e = f.excitation_operator(p, p).unwrap();
            for i in 0..f.dim() {
                assert_eq!(e[(i, i)].re, f64::from(f.occupation(i, p)));
            }
        }
    }

    #[test]
    fn one_by_one_encoding() {
        let a = CMat::from_element(1, 1, Complex64::new(0.5, 0.0));
        let be = hermitian_block_encoding(&a, 1.0).unwrap();
        let s3 = 3f64.sqrt() / 2.0;
        assert!((be.matrix[(0, 1)].re - s3).abs() < 1e-15);
        assert!((be.matrix[(1, 1)].re + 0.5).abs() < 1e-15);
        let c = chebyshev_square(&be).unwrap();
        assert!((c[(0, 0)].re + 0.5).abs() < 1e-14);
        assert!(hermitian_block_encoding(&a, 0.4).is_err());
    }
}
