//! Atom-centred PAW two-body blocks and a seeded generator for desk-scale
//! stand-ins.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::CMat;

/// One atom's PAW correction: projector overlaps `P_pi = ⟨ψ_p|p_i⟩` and the
/// real tensor `C_{i₁i₂i₃i₄}` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PawBlock {
    pub atom_id: usize,
    n_a: usize,
    proj_overlaps: CMat,
    ctensor: Vec<f64>,
}

impl PawBlock {
    /// Validates shapes and the three index symmetries the factorization
    /// relies on: `(i₁i₂) ↔ (i₃i₄)`, `i₁ ↔ i₂` and `i₃ ↔ i₄`.
    pub fn new(atom_id: usize, proj_overlaps: CMat, ctensor: Vec<f64>) -> Result<Self> {
        let n_a = proj_overlaps.ncols();
        if n_a == 0 {
            return Err(Error::InvalidInput(format!("atom {atom_id}: n_a must be at least 1")));
        }
        if ctensor.len() != n_a.pow(4) {
            return Err(Error::Dimension(format!(
                "atom {atom_id}: ctensor has {} entries, expected {}",
                ctensor.len(),
                n_a.pow(4)
            )));
        }
        if ctensor.iter().any(|x| !x.is_finite())
            || proj_overlaps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidInput(format!("atom {atom_id}: non-finite PAW data")));
        }
        let block = PawBlock {
            atom_id,
            n_a,
            proj_overlaps,
            ctensor,
        };
        block.check_symmetry()?;
        Ok(block)
    }

    fn check_symmetry(&self) -> Result<()> {
        let n = self.n_a;
        let tol = 1e-12 * self.ctensor.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let x = self.c(a, b, c, d);
                        let checks = [
                            ("pair swap (i1 i2) <-> (i3 i4)", self.c(c, d, a, b)),
                            ("index swap i1 <-> i2", self.c(b, a, c, d)),
                            ("index swap i3 <-> i4", self.c(a, b, d, c)),
                        ];
                        for (name, y) in checks {
                            if (x - y).abs() > tol {
                                return Err(Error::Invariant(format!(
                                    "atom {}: ctensor violates {name} at ({a},{b},{c},{d})",
                                    self.atom_id
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_orbitals(&self) -> usize {
        self.proj_overlaps.nrows()
    }

    pub fn proj_overlaps(&self) -> &CMat {
        &self.proj_overlaps
    }

    pub fn ctensor(&self) -> &[f64] {
        &self.ctensor
    }

    pub fn c(&self, i1: usize, i2: usize, i3: usize, i4: usize) -> f64 {
        let n = self.n_a;
        self.ctensor[((i1 * n + i2) * n + i3) * n + i4]
    }

    /// `D_{pq,i₁i₂} = P_{p i₁} P*_{q i₂}` as an `N_b × N_b` matrix.
    pub fn d_matrix(&self, i1: usize, i2: usize) -> CMat {
        let p = &self.proj_overlaps;
        CMat::from_fn(p.nrows(), p.nrows(), |a, b| p[(a, i1)] * p[(b, i2)].conj())
    }

    /// Block seen from rotated orbitals `ψ′ = ψ R`.
    pub fn rotated(&self, r: &CMat) -> Result<Self> {
        if r.nrows() != self.n_orbitals() {
            return Err(Error::Dimension(format!(
                "rotation has {} rows for {} orbitals",
                r.nrows(),
                self.n_orbitals()
            )));
        }
        Ok(PawBlock {
            atom_id: self.atom_id,
            n_a: self.n_a,
            proj_overlaps: r.adjoint() * &self.proj_overlaps,
            ctensor: self.ctensor.clone(),
        })
    }
}

/// Compound pair index list `(i₁ ≤ i₂)` in lexicographic order.
pub fn compound_pairs(n_a: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(n_a * (n_a + 1) / 2);
    for i in 0..n_a {
        for j in i..n_a {
            v.push((i, j));
        }
    }
    v
}

/// Random block with a symmetric but generally indefinite pair matrix and
/// uniform complex projector overlaps. Deterministic in `seed`.
pub fn synthesize_paw_block(
    atom_id: usize,
    n_a: usize,
    n_orbitals: usize,
    seed: u64,
    magnitude: f64,
) -> Result<PawBlock> {
    if n_a == 0 {
        return Err(Error::InvalidInput("n_a must be at least 1".into()));
    }
    if !magnitude.is_finite() {
        return Err(Error::InvalidInput("magnitude must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = compound_pairs(n_a);
    let np = pairs.len();
    let mut m = vec![0.0; np * np];
    for k in 0..np {
        for l in k..np {
            let x = magnitude * rng.random_range(-1.0..1.0);
            m[k * np + l] = x;
            m[l * np + k] = x;
        }
    }
    let pair_index = |a: usize, b: usize| {
        let (i, j) = if a <= b { (a, b) } else { (b, a) };
        pairs.iter().position(|&p| p == (i, j)).expect("pair exists")
    };
    let mut ctensor = vec![0.0; n_a.pow(4)];
    for a in 0..n_a {
        for b in 0..n_a {
            for c in 0..n_a {
                for d in 0..n_a {
                    ctensor[((a * n_a + b) * n_a + c) * n_a + d] =
                        m[pair_index(a, b) * np + pair_index(c, d)];
                }
            }
        }
    }
    let proj = CMat::from_fn(n_orbitals, n_a, |_, _| {
        let re = rng.random_range(-0.5..0.5);
        let im = rng.random_range(-0.5..0.5);
        Complex64::new(re, im)
    });
    PawBlock::new(atom_id, proj, ctensor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_symmetric() {
        let a = synthesize_paw_block(0, 3, 4, 11, 0.2).unwrap();
        let b = synthesize_paw_block(0, 3, 4, 11, 0.2).unwrap();
        assert_eq!(a, b);
        let c = synthesize_paw_block(0, 3, 4, 12, 0.2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn asymmetric_tensor_rejected() {
        let good = synthesize_paw_block(1, 2, 3, 5, 1.0).unwrap();
        let mut t = good.ctensor().to_vec();
        t[1] += 0.1;
        let err = PawBlock::new(1, good.proj_overlaps().clone(), t).unwrap_err();
        assert!(err.to_string().contains("ctensor violates"));
    }

    #[test]
    fn zero_magnitude() {
        let b = synthesize_paw_block(0, 2, 3, 1, 0.0).unwrap();
        assert!(b.ctensor().iter().all(|&x| x == 0.0));
    }
}
