//! Dense linear-algebra helpers shared by the factorization and verification
//! layers.
//!
//! Everything here works on `nalgebra` dynamic matrices with `Complex64`
//! entries. Eigendecompositions are post-processed into a deterministic form
//! (fixed ordering and a fixed eigenvector phase) so that factor files and
//! data-volume counts are reproducible across runs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Eigenpair ordering applied after a Hermitian decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenOrder {
    Ascending,
    Descending,
    /// Descending by absolute value; ties keep ascending-value order.
    DescendingMagnitude,
}

/// Largest absolute entry of `a - a†`.
pub fn hermitian_deviation(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Largest absolute entry of `u†u - I`.
pub fn unitarity_deviation(u: &CMat) -> f64 {
    let g = u.adjoint() * u;
    let n = g.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            dev = dev.max((g[(i, j)] - target).norm());
        }
    }
    dev
}

/// Rotates `col` so that its largest-magnitude component is real and
/// positive. The first index within a relative 1e-12 of the maximum wins.
pub fn fix_phase(mut col: nalgebra::DVectorViewMut<'_, Complex64>) {
    let max = col.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if max == 0.0 {
        return;
    }
    let pivot = col
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-12))
        .unwrap_or(0);
    let z = col[pivot];
    let phase = z.conj() / z.norm();
    for c in col.iter_mut() {
        *c *= phase;
    }
}

/// Eigendecomposition of a Hermitian matrix. Eigenvector columns are phase
/// fixed and ordered according to `order`.
pub fn eigh(a: &CMat, order: EigenOrder) -> Result<(Vec<f64>, CMat)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(format!(
            "eigh expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    // Symmetrize before handing to the solver so round-off in the input does
    // not leak into the eigenvalues.
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NoConvergence("Hermitian eigendecomposition".into()))?;
    Ok(reorder(&eig.eigenvalues, &eig.eigenvectors, order))
}

fn reorder(values: &DVector<f64>, vectors: &CMat, order: EigenOrder) -> (Vec<f64>, CMat) {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    // Stable base order: ascending value, then original index.
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    match order {
        EigenOrder::Ascending => {}
        EigenOrder::Descending => idx.reverse(),
        EigenOrder::DescendingMagnitude => {
            idx.sort_by(|&i, &j| values[j].abs().total_cmp(&values[i].abs()));
        }
    }
    let mut out = CMat::zeros(vectors.nrows(), n);
    let mut vals = Vec::with_capacity(n);
    for (k, &i) in idx.iter().enumerate() {
        vals.push(values[i]);
        out.set_column(k, &vectors.column(i));
        fix_phase(out.column_mut(k));
    }
    (vals, out)
}

/// Eigendecomposition of a real symmetric matrix, ascending unless told
/// otherwise. The largest component of each eigenvector is made positive.
pub fn eigh_real(a: &RMat, order: EigenOrder) -> Result<(Vec<f64>, RMat)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), RMat::zeros(0, 0)));
    }
    let sym = (a + a.transpose()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NoConvergence("real symmetric eigendecomposition".into()))?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .total_cmp(&eig.eigenvalues[j])
            .then(i.cmp(&j))
    });
    match order {
        EigenOrder::Ascending => {}
        EigenOrder::Descending => idx.reverse(),
        EigenOrder::DescendingMagnitude => idx.sort_by(|&i, &j| {
            eig.eigenvalues[j]
                .abs()
                .total_cmp(&eig.eigenvalues[i].abs())
        }),
    }
    let mut out = RMat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (k, &i) in idx.iter().enumerate() {
        vals.push(eig.eigenvalues[i]);
        let mut col = eig.eigenvectors.column(i).into_owned();
        let max = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if let Some(p) = col.iter().position(|x| x.abs() >= max * (1.0 - 1e-12)) {
            if col[p] < 0.0 {
                col.neg_mut();
            }
        }
        out.set_column(k, &col);
    }
    Ok((vals, out))
}

/// `u diag(f) u†`.
pub fn reassemble(u: &CMat, f: &[f64]) -> CMat {
    let mut scaled = u.clone();
    for (k, &fk) in f.iter().enumerate() {
        scaled.column_mut(k).scale_mut(fk);
    }
    scaled * u.adjoint()
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Eigenvalues in `[-clamp, 0)` are treated as zero; anything more negative
/// is an error.
pub fn psd_sqrt(a: &CMat, clamp: f64) -> Result<CMat> {
    let (vals, u) = eigh(a, EigenOrder::Ascending)?;
    let mut roots = Vec::with_capacity(vals.len());
    for v in vals {
        if v < -clamp {
            return Err(Error::Invariant(format!(
                "square root of a matrix with eigenvalue {v:e}"
            )));
        }
        roots.push(v.max(0.0).sqrt());
    }
    Ok(reassemble(&u, &roots))
}

pub fn to_complex(a: &RMat) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMat::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        (&a + a.adjoint()).scale(0.5)
    }

    #[test]
    fn eigh_reassembles_and_is_unitary() {
        for seed in 0..10 {
            let a = random_hermitian(6, seed);
            let (f, u) = eigh(&a, EigenOrder::DescendingMagnitude).unwrap();
            assert!(unitarity_deviation(&u) < 1e-12);
            assert!(max_abs_diff(&reassemble(&u, &f), &a) < 1e-12);
            for w in f.windows(2) {
                assert!(w[0].abs() >= w[1].abs());
            }
            for k in 0..6 {
                let col = u.column(k);
                let max = col.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
                let p = col.iter().position(|z| z.norm() >= max * (1.0 - 1e-12)).unwrap();
                assert!(col[p].im.abs() < 1e-14 && col[p].re > 0.0);
            }
        }
    }

    #[test]
    fn eigh_is_bit_stable() {
        let a = random_hermitian(5, 3);
        let (f1, u1) = eigh(&a, EigenOrder::Ascending).unwrap();
        let (f2, u2) = eigh(&a, EigenOrder::Ascending).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(u1, u2);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let b = random_hermitian(4, 9);
        let a = &b * &b;
        let r = psd_sqrt(&a, 1e-14).unwrap();
        assert!(max_abs_diff(&(&r * &r), &a) < 1e-12);
        assert!(psd_sqrt(&(-&a), 1e-14).is_err());
    }
}
