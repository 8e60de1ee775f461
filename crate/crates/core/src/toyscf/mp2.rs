//! Closed-shell MP2 energy, the approximate-MP2 virtual density matrix and
//! natural-orbital compression of the virtual space.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{eigh, CMat, EigenOrder, ZERO};

use super::kappa::{guard, Kappa};
use super::meanfield::OrbitalSet;

/// Energy denominators smaller than this (Hartree) are rejected.
pub const DENOMINATOR_GUARD: f64 = 1e-10;

fn check(orbitals: &OrbitalSet, kappa: &Kappa) -> Result<()> {
    guard(kappa.n())?;
    if kappa.n() != orbitals.n_orbitals() {
        return Err(Error::Dimension(format!(
            "κ is for {} orbitals, orbital set has {}",
            kappa.n(),
            orbitals.n_orbitals()
        )));
    }
    if orbitals.n_occ() == 0 || orbitals.n_virt() == 0 {
        return Err(Error::InvalidInput(
            "MP2 needs at least one occupied and one virtual orbital".into(),
        ));
    }
    Ok(())
}

fn denominator(x: f64, what: &str) -> Result<f64> {
    if x.abs() < DENOMINATOR_GUARD {
        return Err(Error::DegenerateGap(format!("{what} = {x:e} Ha")));
    }
    Ok(x)
}

/// `E₂ = Re Σ_{ij∈occ} Σ_{ab∈virt} κ_aijb (2κ*_aijb − κ*_bija) / (ε_i + ε_j − ε_a − ε_b)`.
pub fn mp2_energy(orbitals: &OrbitalSet, kappa: &Kappa) -> Result<f64> {
    check(orbitals, kappa)?;
    let e = orbitals.eigenvalues();
    let no = orbitals.n_occ();
    let n = orbitals.n_orbitals();
    let mut total = 0.0;
    for i in 0..no {
        for j in 0..no {
            for a in no..n {
                for b in no..n {
                    let den = denominator(
                        e[i] + e[j] - e[a] - e[b],
                        &format!("ε_{i} + ε_{j} − ε_{a} − ε_{b}"),
                    )?;
                    let direct = kappa.get(a, i, j, b);
                    let exch = kappa.get(b, i, j, a);
                    total += (direct * (2.0 * direct - exch).conj()).re / den;
                }
            }
        }
    }
    Ok(total)
}

/// `D_ab = Σ_{c∈virt} Σ_{i∈occ} κ_icbi κ*_icai / [(ε_b+ε_c−2ε_i)(ε_a+ε_c−2ε_i)]`
/// over the virtual block.
pub fn mp2_density(orbitals: &OrbitalSet, kappa: &Kappa) -> Result<CMat> {
    check(orbitals, kappa)?;
    let e = orbitals.eigenvalues();
    let no = orbitals.n_occ();
    let n = orbitals.n_orbitals();
    let nv = n - no;
    // x[i][c][a] = κ_icai / (ε_a + ε_c − 2ε_i)
    let mut x = vec![ZERO; no * nv * nv];
    for i in 0..no {
        for c in 0..nv {
            for a in 0..nv {
                let den = denominator(
                    e[no + a] + e[no + c] - 2.0 * e[i],
                    &format!("ε_{} + ε_{} − 2ε_{i}", no + a, no + c),
                )?;
                x[(i * nv + c) * nv + a] = kappa.get(i, no + c, no + a, i) / den;
            }
        }
    }
    let mut d = CMat::from_element(nv, nv, ZERO);
    for a in 0..nv {
        for b in 0..nv {
            let mut acc = ZERO;
            for i in 0..no {
                for c in 0..nv {
                    let base = (i * nv + c) * nv;
                    acc += x[base + b] * x[base + a].conj();
                }
            }
            d[(a, b)] = acc;
        }
    }
    Ok(d)
}

#[derive(Debug, Clone)]
pub struct NaturalOrbitals {
    pub orbitals: OrbitalSet,
    /// `N_b × (n_occ + n_keep)` map from the input orbitals: `ψ′ = ψ R`.
    pub rotation: CMat,
    /// Eigenvalues of D, descending (all of them, not only the kept ones).
    pub occupations: Vec<f64>,
}

/// Rotates the virtual block onto the leading eigenvectors of `d` and
/// semi-canonicalizes the kept virtuals. Occupied orbitals are unchanged.
pub fn natural_orbitals(orbitals: &OrbitalSet, d: &CMat, n_keep: usize) -> Result<NaturalOrbitals> {
    let no = orbitals.n_occ();
    let nv = orbitals.n_virt();
    if d.nrows() != nv || d.ncols() != nv {
        return Err(Error::Dimension(format!(
            "density matrix is {}x{}, expected {nv}x{nv}",
            d.nrows(),
            d.ncols()
        )));
    }
    if n_keep == 0 || n_keep > nv {
        return Err(Error::InvalidInput(format!(
            "n_keep = {n_keep} must lie in 1..={nv}"
        )));
    }
    let (occ, w) = eigh(d, EigenOrder::Descending)?;
    let wk = w.columns(0, n_keep).into_owned();
    let ev = &orbitals.eigenvalues()[no..];
    let fock = CMat::from_fn(n_keep, n_keep, |a, b| {
        let mut acc = ZERO;
        for (c, &e) in ev.iter().enumerate() {
            acc += wk[(c, a)].conj() * e * wk[(c, b)];
        }
        acc
    });
    let (semi, v) = eigh(&fock, EigenOrder::Ascending)?;
    let virt_rot = &wk * &v;
    let n_new = no + n_keep;
    let mut rotation = CMat::from_element(orbitals.n_orbitals(), n_new, ZERO);
    for i in 0..no {
        rotation[(i, i)] = Complex64::new(1.0, 0.0);
    }
    rotation
        .view_mut((no, no), (nv, n_keep))
        .copy_from(&virt_rot);
    let coeffs = orbitals.coefficients() * &rotation;
    let mut energies = orbitals.eigenvalues()[..no].to_vec();
    energies.extend(semi);
    Ok(NaturalOrbitals {
        orbitals: OrbitalSet::new(coeffs, energies, no)?,
        rotation,
        occupations: occ,
    })
}
