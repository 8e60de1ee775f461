//! Desk-scale instance source: a plane-wave one-electron solver, pair
//! densities, the dense κ oracle, MP2 natural orbitals and synthetic PAW
//! blocks.

pub mod kappa;
pub mod meanfield;
pub mod mp2;
pub mod pair;
pub mod paw;

pub use kappa::{kappa_oracle, kappa_paw, kappa_soft, Kappa, MAX_ORACLE_ORBITALS};
pub use meanfield::{solve_mean_field, GaussianWell, OrbitalSet, PotentialSpec};
pub use mp2::{mp2_density, mp2_energy, natural_orbitals, NaturalOrbitals};
pub use pair::{pair_density, pair_density_on, PairDensityTensor};
pub use paw::{compound_pairs, synthesize_paw_block, PawBlock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{HamiltonianInstance, PairGrid};
use crate::linalg::{to_complex, RMat};
use crate::pwbasis::{build_basis, Cell, Regularization};

/// Parameters of one synthetic PAW block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PawSynth {
    pub n_a: usize,
    pub seed: u64,
    pub magnitude: f64,
}

/// Recipe for a toy instance: Gaussian wells in a cell, solved in a
/// plane-wave basis, optionally decorated with synthetic PAW blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySystem {
    pub lattice_bohr: [[f64; 3]; 3],
    pub cutoff_ev: f64,
    pub potential: PotentialSpec,
    pub n_bands: usize,
    pub n_occ: usize,
    #[serde(default)]
    pub paw: Vec<PawSynth>,
    #[serde(default = "default_regularization")]
    pub kernel: Regularization,
    #[serde(default)]
    pub constant_ha: f64,
}

fn default_regularization() -> Regularization {
    Regularization::SphericalTruncation
}

impl ToySystem {
    /// The same system repeated `reps` times: wells and PAW blocks are
    /// replicated (PAW seeds offset per copy), bands and occupations scale
    /// with the number of cells.
    pub fn supercell(&self, reps: [u32; 3]) -> Result<ToySystem> {
        let prim = Cell::new(self.lattice_bohr)?;
        let cell = prim.supercell(reps)?;
        let copies = reps.iter().map(|&r| r as usize).product::<usize>();
        let paw = (0..copies as u64)
            .flat_map(|c| {
                self.paw.iter().map(move |s| PawSynth {
                    seed: s.seed.wrapping_add(c.wrapping_mul(0x9E37_79B9)),
                    ..*s
                })
            })
            .collect();
        Ok(ToySystem {
            lattice_bohr: *cell.lattice(),
            potential: PotentialSpec {
                wells: crate::lcucost::scaling::replicate_wells(&prim, &self.potential.wells, reps),
                offset: self.potential.offset,
            },
            n_bands: self.n_bands * copies,
            n_occ: self.n_occ * copies,
            paw,
            ..self.clone()
        })
    }

    /// Solves the one-electron problem and assembles the instance with
    /// `h = diag(ε)`.
    pub fn build(&self) -> Result<HamiltonianInstance> {
        let cell = Cell::new(self.lattice_bohr)?;
        let basis = build_basis(&cell, self.cutoff_ev)?;
        let orbitals = solve_mean_field(&cell, &basis, &self.potential, self.n_bands, self.n_occ)?;
        if self.n_occ == 0 || self.n_occ >= self.n_bands {
            return Err(Error::InvalidInput(format!(
                "need 0 < n_occ < n_bands, got n_occ = {} and n_bands = {}",
                self.n_occ, self.n_bands
            )));
        }
        let h = to_complex(&RMat::from_diagonal(&nalgebra::DVector::from_vec(
            orbitals.eigenvalues().to_vec(),
        )));
        let blocks = self
            .paw
            .iter()
            .enumerate()
            .map(|(a, s)| synthesize_paw_block(a, s.n_a, self.n_bands, s.seed, s.magnitude))
            .collect::<Result<Vec<_>>>()?;
        HamiltonianInstance::from_orbitals(
            cell,
            basis,
            orbitals,
            h,
            self.constant_ha,
            blocks,
            self.kernel,
            PairGrid::Difference,
        )
    }
}

/// Named toy systems used by the CLI and the fixtures.
pub fn preset(name: &str) -> Option<ToySystem> {
    let well = |center: [f64; 3], depth: f64, width: f64| GaussianWell { center, depth, width };
    let cube = |a: f64| [[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]];
    let base = ToySystem {
        lattice_bohr: cube(6.0),
        cutoff_ev: 60.0,
        potential: PotentialSpec {
            wells: vec![well([1.5, 3.0, 3.0], 1.0, 0.9), well([4.4, 3.1, 2.9], 0.8, 1.1)],
            offset: 0.0,
        },
        n_bands: 4,
        n_occ: 2,
        paw: Vec::new(),
        kernel: Regularization::SphericalTruncation,
        constant_ha: 0.0,
    };
    match name {
        "small" => Some(base),
        "paw" => Some(ToySystem {
            n_bands: 5,
            paw: vec![
                PawSynth { n_a: 2, seed: 7, magnitude: 0.3 },
                PawSynth { n_a: 3, seed: 19, magnitude: 0.2 },
            ],
            ..base
        }),
        "six" => Some(ToySystem {
            n_bands: 6,
            n_occ: 3,
            paw: vec![PawSynth { n_a: 2, seed: 3, magnitude: 0.25 }],
            ..base
        }),
        "medium" => Some(ToySystem {
            lattice_bohr: cube(8.0),
            cutoff_ev: 100.0,
            n_bands: 12,
            n_occ: 3,
            paw: vec![PawSynth { n_a: 4, seed: 5, magnitude: 0.2 }],
            ..base
        }),
        _ => None,
    }
}

pub const PRESETS: [&str; 4] = ["small", "paw", "six", "medium"];
