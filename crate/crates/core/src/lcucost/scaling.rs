//! λ₂ and Γ scaling sweeps over toy instance families.
//!
//! Sweeps never store soft rotations: each (G, j) block is reduced to its
//! eigenvalues.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorize::{soft_spectrum, truncate_spectrum, SpectralTerm};
use crate::pwbasis::{build_basis, coulomb_kernel, Cell};
use crate::toyscf::{pair_density, solve_mean_field, GaussianWell, PotentialSpec, ToySystem};

use super::{loglog_fit, surviving_in, term_lambda};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalingFamily {
    /// One cell and basis; only the number of orbitals changes.
    Orbitals {
        system: ToySystem,
        n_b: Vec<usize>,
        #[serde(default)]
        delta: f64,
        #[serde(default = "default_beth")]
        beth: u64,
    },
    /// Supercells of a primitive cell, wells replicated, with a fixed number
    /// of orbitals per well.
    Supercells {
        system: ToySystem,
        reps: Vec<[u32; 3]>,
        orbitals_per_atom: usize,
        #[serde(default)]
        delta: f64,
        #[serde(default = "default_beth")]
        beth: u64,
    },
}

fn default_beth() -> u64 {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    /// N_b for orbital sweeps, N_A for supercell sweeps.
    pub size: usize,
    pub n_orbitals: usize,
    pub n_atoms: usize,
    pub n_pw_orbital: usize,
    pub n_pw_pair: usize,
    pub lambda_two_body: f64,
    pub surviving_parameters: u64,
    pub gamma_nonzero: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    pub lambda_slope: f64,
    pub gamma_slope: f64,
}

impl ScalingStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "size,n_orbitals,n_atoms,n_pw_orbital,n_pw_pair,lambda_two_body,surviving_parameters,gamma_nonzero\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{:.12e},{},{}\n",
                r.size,
                r.n_orbitals,
                r.n_atoms,
                r.n_pw_orbital,
                r.n_pw_pair,
                r.lambda_two_body,
                r.surviving_parameters,
                r.gamma_nonzero
            ));
        }
        s.push_str(&format!("# lambda_slope,{:.6}\n# gamma_slope,{:.6}\n", self.lambda_slope, self.gamma_slope));
        s
    }
}

fn soft_summary(terms: &[(f64, SpectralTerm)]) -> (f64, u64) {
    let spectra: Vec<SpectralTerm> = terms.iter().map(|(_, t)| t.clone()).collect();
    let lambda = spectra.iter().map(term_lambda).sum();
    (lambda, surviving_in(&spectra))
}

pub fn lambda_scaling_study(family: &ScalingFamily) -> Result<ScalingStudy> {
    let rows = match family {
        ScalingFamily::Orbitals {
            system,
            n_b,
            delta,
            beth,
        } => orbital_rows(system, n_b, *delta, *beth)?,
        ScalingFamily::Supercells {
            system,
            reps,
            orbitals_per_atom,
            delta,
            beth,
        } => supercell_rows(system, reps, *orbitals_per_atom, *delta, *beth)?,
    };
    if rows.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "a scaling study needs at least 4 sizes, got {}",
            rows.len()
        )));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.size as f64).collect();
    let lam: Vec<f64> = rows.iter().map(|r| r.lambda_two_body).collect();
    let gam: Vec<f64> = rows.iter().map(|r| r.gamma_nonzero as f64).collect();
    let (lambda_slope, _) = loglog_fit(&xs, &lam)?;
    let (gamma_slope, _) = loglog_fit(&xs, &gam)?;
    Ok(ScalingStudy {
        rows,
        lambda_slope,
        gamma_slope,
    })
}

fn orbital_rows(system: &ToySystem, n_b: &[usize], delta: f64, beth: u64) -> Result<Vec<ScalingRow>> {
    if n_b.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "a scaling study needs at least 4 sizes, got {}",
            n_b.len()
        )));
    }
    let max_nb = *n_b.iter().max().expect("non-empty");
    let cell = Cell::new(system.lattice_bohr)?;
    let basis = build_basis(&cell, system.cutoff_ev)?;
    let orbitals = solve_mean_field(&cell, &basis, &system.potential, max_nb, system.n_occ.min(max_nb))?;
    let full = pair_density(&orbitals, &basis, &cell)?;
    let kernel = coulomb_kernel(full.grid(), &cell, system.kernel)?;
    let g_min = full.grid().min_nonzero_norm().unwrap_or(0.0);
    let mut rows = Vec::with_capacity(n_b.len());
    for &nb in n_b {
        let pd = full.truncated(nb)?;
        let mut terms = soft_spectrum(&pd, &kernel)?;
        truncate_spectrum(&mut terms, delta, g_min)?;
        let (lambda, surviving) = soft_summary(&terms);
        rows.push(ScalingRow {
            size: nb,
            n_orbitals: nb,
            n_atoms: system.potential.wells.len(),
            n_pw_orbital: basis.len(),
            n_pw_pair: pd.grid().len(),
            lambda_two_body: lambda,
            surviving_parameters: surviving,
            gamma_nonzero: u128::from(surviving) * nb as u128 * u128::from(beth),
        });
    }
    Ok(rows)
}

/// Wells of the primitive cell repeated over a supercell.
pub fn replicate_wells(cell: &Cell, wells: &[GaussianWell], reps: [u32; 3]) -> Vec<GaussianWell> {
    let lat = cell.lattice();
    let mut out = Vec::new();
    for a in 0..reps[0] {
        for b in 0..reps[1] {
            for c in 0..reps[2] {
                for w in wells {
                    let mut center = w.center;
                    for k in 0..3 {
                        center[k] += f64::from(a) * lat[0][k] + f64::from(b) * lat[1][k] + f64::from(c) * lat[2][k];
                    }
                    out.push(GaussianWell { center, ..*w });
                }
            }
        }
    }
    out
}

fn supercell_rows(
    system: &ToySystem,
    reps: &[[u32; 3]],
    per_atom: usize,
    delta: f64,
    beth: u64,
) -> Result<Vec<ScalingRow>> {
    let prim = Cell::new(system.lattice_bohr)?;
    let mut rows = Vec::with_capacity(reps.len());
    for &r in reps {
        let cell = prim.supercell(r)?;
        let wells = replicate_wells(&prim, &system.potential.wells, r);
        let n_atoms = wells.len();
        let potential = PotentialSpec {
            wells,
            offset: system.potential.offset,
        };
        let basis = build_basis(&cell, system.cutoff_ev)?;
        let nb = per_atom * n_atoms;
        let orbitals = solve_mean_field(&cell, &basis, &potential, nb, (n_atoms / 2).max(1))?;
        let pd = pair_density(&orbitals, &basis, &cell)?;
        let kernel = coulomb_kernel(pd.grid(), &cell, system.kernel)?;
        let g_min = pd.grid().min_nonzero_norm().unwrap_or(0.0);
        let mut terms = soft_spectrum(&pd, &kernel)?;
        truncate_spectrum(&mut terms, delta, g_min)?;
        let (lambda, surviving) = soft_summary(&terms);
        rows.push(ScalingRow {
            size: n_atoms,
            n_orbitals: nb,
            n_atoms,
            n_pw_orbital: basis.len(),
            n_pw_pair: pd.grid().len(),
            lambda_two_body: lambda,
            surviving_parameters: surviving,
            gamma_nonzero: u128::from(surviving) * nb as u128 * u128::from(beth),
        });
    }
    Ok(rows)
}

/// Four wells in a cubic box; N_b from 10 to 60 at a fixed plane-wave basis.
pub fn default_orbital_family() -> ScalingFamily {
    let a = 8.0;
    let wells = [
        [3.1, 4.0, 4.0],
        [4.5, 4.1, 3.9],
        [5.9, 3.9, 4.1],
        [7.3, 4.05, 4.0],
    ]
    .iter()
    .map(|&c| GaussianWell {
        center: c,
        depth: 1.2,
        width: 0.9,
    })
    .collect();
    ScalingFamily::Orbitals {
        system: ToySystem {
            lattice_bohr: [[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]],
            cutoff_ev: 100.0,
            potential: PotentialSpec { wells, offset: 0.0 },
            n_bands: 60,
            n_occ: 2,
            paw: Vec::new(),
            kernel: crate::pwbasis::Regularization::SphericalTruncation,
            constant_ha: 0.0,
        },
        n_b: vec![10, 20, 30, 40, 50, 60],
        delta: 0.0,
        beth: 20,
    }
}

/// Two wells per cubic primitive cell; 1×1×1 to 2×2×2 supercells.
pub fn default_supercell_family() -> ScalingFamily {
    let a = 4.0;
    let wells = vec![
        GaussianWell {
            center: [0.0, 0.0, 0.0],
            depth: 1.5,
            width: 0.8,
        },
        GaussianWell {
            center: [1.9, 2.0, 2.1],
            depth: 1.5,
            width: 0.8,
        },
    ];
    ScalingFamily::Supercells {
        system: ToySystem {
            lattice_bohr: [[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]],
            cutoff_ev: 134.0,
            potential: PotentialSpec { wells, offset: 0.0 },
            n_bands: 0,
            n_occ: 1,
            paw: Vec::new(),
            kernel: crate::pwbasis::Regularization::SphericalTruncation,
            constant_ha: 0.0,
        },
        reps: vec![[1, 1, 1], [2, 1, 1], [2, 2, 1], [2, 2, 2]],
        orbitals_per_atom: 4,
        delta: 0.0,
        beth: 20,
    }
}
