//! `HamiltonianInstance` and its JSON file format.
//!
//! Complex matrices are stored as parallel row-major `re`/`im` arrays.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_deviation, max_abs, CMat};
use crate::pwbasis::{build_basis, coulomb_kernel, Cell, CoulombKernel, Miller, PlaneWaveBasis, Regularization};
use crate::toyscf::{pair_density_on, OrbitalSet, PairDensityTensor, PawBlock};

pub const SCHEMA_VERSION: u32 = 1;

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat) -> Self {
        let mut re = Vec::with_capacity(m.len());
        let mut im = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            re,
            im,
        }
    }

    pub fn to_matrix(&self, what: &str) -> Result<CMat> {
        let n = self.rows * self.cols;
        if self.re.len() != n || self.im.len() != n {
            return Err(Error::Dimension(format!(
                "{what}: {}x{} matrix needs {n} re and im entries, got {} and {}",
                self.rows,
                self.cols,
                self.re.len(),
                self.im.len()
            )));
        }
        Ok(CMat::from_fn(self.rows, self.cols, |i, j| {
            let k = i * self.cols + j;
            Complex64::new(self.re[k], self.im[k])
        }))
    }
}

/// Square complex matrix with side `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrixJson {
    pub n: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl SquareMatrixJson {
    pub fn from_matrix(m: &CMat) -> Self {
        let g = MatrixJson::from_matrix(m);
        SquareMatrixJson {
            n: g.rows,
            re: g.re,
            im: g.im,
        }
    }

    pub fn to_matrix(&self, what: &str) -> Result<CMat> {
        MatrixJson {
            rows: self.n,
            cols: self.n,
            re: self.re.clone(),
            im: self.im.clone(),
        }
        .to_matrix(what)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairGrid {
    /// All differences of orbital-grid vectors (exact convolution).
    #[default]
    Difference,
    /// The orbital grid itself; drops large-|G| pair components.
    Orbital,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellJson {
    pub lattice_bohr: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisJson {
    pub cutoff_ev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntryJson {
    pub miller: Miller,
    pub eta0: SquareMatrixJson,
    pub eta1: SquareMatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PairDensityJson {
    /// Half-space representatives with both channels, origin first.
    Explicit { entries: Vec<PairEntryJson> },
    FromOrbitals {
        coefficients: MatrixJson,
        eigenvalues: Vec<f64>,
        n_occ: usize,
        #[serde(default)]
        grid: PairGrid,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PawBlockJson {
    pub atom_id: usize,
    pub n_a: usize,
    pub proj_overlaps: MatrixJson,
    pub ctensor_flat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub cell: CellJson,
    pub basis: BasisJson,
    pub constant_ha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_electrons: Option<usize>,
    pub h: SquareMatrixJson,
    pub pair_density: PairDensityJson,
    #[serde(default)]
    pub paw_blocks: Vec<PawBlockJson>,
    pub kernel: Regularization,
}

/// A validated second-quantized Hamiltonian: one-body matrix, constant,
/// soft pair densities with their kernel, and PAW blocks.
#[derive(Debug, Clone)]
pub struct HamiltonianInstance {
    pub cell: Cell,
    /// Orbital plane-wave basis.
    pub basis: PlaneWaveBasis,
    pub h: CMat,
    pub constant: f64,
    pub pair_density: PairDensityTensor,
    pub paw_blocks: Vec<PawBlock>,
    /// Coulomb kernel on the pair-density grid.
    pub kernel: CoulombKernel,
    pub orbitals: Option<OrbitalSet>,
    pub pair_grid: PairGrid,
    pub n_electrons: Option<usize>,
    pub description: Option<String>,
}

impl HamiltonianInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn from_orbitals(
        cell: Cell,
        basis: PlaneWaveBasis,
        orbitals: OrbitalSet,
        h: CMat,
        constant: f64,
        paw_blocks: Vec<PawBlock>,
        regularization: Regularization,
        pair_grid: PairGrid,
    ) -> Result<Self> {
        let grid = match pair_grid {
            PairGrid::Difference => basis.difference_grid(&cell)?,
            PairGrid::Orbital => basis.clone(),
        };
        let pair_density = pair_density_on(&orbitals, &basis, grid)?;
        let kernel = coulomb_kernel(pair_density.grid(), &cell, regularization)?;
        let n_electrons = Some(2 * orbitals.n_occ());
        let inst = HamiltonianInstance {
            cell,
            basis,
            h,
            constant,
            pair_density,
            paw_blocks,
            kernel,
            orbitals: Some(orbitals),
            pair_grid,
            n_electrons,
            description: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Instance from explicitly given pair densities.
    pub fn explicit(
        cell: Cell,
        basis: PlaneWaveBasis,
        h: CMat,
        constant: f64,
        pair_density: PairDensityTensor,
        paw_blocks: Vec<PawBlock>,
        regularization: Regularization,
    ) -> Result<Self> {
        let kernel = coulomb_kernel(pair_density.grid(), &cell, regularization)?;
        let inst = HamiltonianInstance {
            cell,
            basis,
            h,
            constant,
            pair_density,
            paw_blocks,
            kernel,
            orbitals: None,
            pair_grid: PairGrid::Difference,
            n_electrons: None,
            description: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn n_orbitals(&self) -> usize {
        self.h.nrows()
    }

    /// Number of electrons: explicit value, else twice the occupied count,
    /// else `N_b` (half filling).
    pub fn electrons(&self) -> usize {
        self.n_electrons
            .or_else(|| self.orbitals.as_ref().map(|o| 2 * o.n_occ()))
            .unwrap_or(self.n_orbitals())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.h.nrows();
        if self.h.ncols() != n {
            return Err(Error::Dimension(format!(
                "h must be square, got {}x{}",
                n,
                self.h.ncols()
            )));
        }
        if self.h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) || !self.constant.is_finite() {
            return Err(Error::InvalidInput("non-finite one-body data".into()));
        }
        let dev = hermitian_deviation(&self.h);
        if dev > 1e-12 * max_abs(&self.h).max(1.0) {
            return Err(Error::Invariant(format!(
                "h must be Hermitian (max |h - h†| = {dev:e})"
            )));
        }
        if self.pair_density.n_orbitals() != n {
            return Err(Error::Dimension(format!(
                "pair densities are for {} orbitals, h for {n}",
                self.pair_density.n_orbitals()
            )));
        }
        if self.kernel.len() != self.pair_density.grid().len() {
            return Err(Error::Dimension("kernel and pair-density grid differ in size".into()));
        }
        for b in &self.paw_blocks {
            if b.n_orbitals() != n {
                return Err(Error::Dimension(format!(
                    "atom {}: projector overlaps have {} rows, expected {n}",
                    b.atom_id,
                    b.n_orbitals()
                )));
            }
        }
        if let Some(ne) = self.n_electrons {
            if ne > 2 * n {
                return Err(Error::InvalidInput(format!(
                    "{ne} electrons do not fit in {n} spatial orbitals"
                )));
            }
        }
        Ok(())
    }

    /// Same physics in rotated orbitals `ψ′ = ψ R` with unitary square `R`.
    pub fn rotated(&self, r: &CMat) -> Result<Self> {
        let h = r.adjoint() * &self.h * r;
        let pair_density = self.pair_density.rotated(r)?;
        let paw_blocks = self
            .paw_blocks
            .iter()
            .map(|b| b.rotated(r))
            .collect::<Result<Vec<_>>>()?;
        let mut out = self.clone();
        out.h = (&h + h.adjoint()).scale(0.5);
        out.pair_density = pair_density;
        out.paw_blocks = paw_blocks;
        out.orbitals = None;
        out.n_electrons = Some(self.electrons());
        Ok(out)
    }

    pub fn to_file(&self) -> InstanceFile {
        let pair_density = match &self.orbitals {
            Some(o) => PairDensityJson::FromOrbitals {
                coefficients: MatrixJson::from_matrix(o.coefficients()),
                eigenvalues: o.eigenvalues().to_vec(),
                n_occ: o.n_occ(),
                grid: self.pair_grid,
            },
            None => {
                let grid = self.pair_density.grid();
                PairDensityJson::Explicit {
                    entries: grid
                        .halfspace()
                        .iter()
                        .enumerate()
                        .map(|(k, &gi)| PairEntryJson {
                            miller: grid.millers()[gi],
                            eta0: SquareMatrixJson::from_matrix(self.pair_density.eta(k, 0)),
                            eta1: SquareMatrixJson::from_matrix(self.pair_density.eta(k, 1)),
                        })
                        .collect(),
                }
            }
        };
        InstanceFile {
            version: SCHEMA_VERSION,
            description: self.description.clone(),
            cell: CellJson {
                lattice_bohr: *self.cell.lattice(),
            },
            basis: BasisJson {
                cutoff_ev: self.basis.cutoff_ev(),
            },
            constant_ha: self.constant,
            n_electrons: self.n_electrons,
            h: SquareMatrixJson::from_matrix(&self.h),
            pair_density,
            paw_blocks: self
                .paw_blocks
                .iter()
                .map(|b| PawBlockJson {
                    atom_id: b.atom_id,
                    n_a: b.n_a(),
                    proj_overlaps: MatrixJson::from_matrix(b.proj_overlaps()),
                    ctensor_flat: b.ctensor().to_vec(),
                })
                .collect(),
            kernel: self.kernel.regularization(),
        }
    }

    /// Canonical serialized form (pretty JSON with a trailing newline).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        if file.version != SCHEMA_VERSION {
            return Err(Error::Schema {
                pointer: "/version".into(),
                message: format!("unsupported schema version {} (expected {SCHEMA_VERSION})", file.version),
            });
        }
        let cell = Cell::new(file.cell.lattice_bohr)?;
        let basis = build_basis(&cell, file.basis.cutoff_ev)?;
        let h = file.h.to_matrix("h")?;
        let mut blocks = Vec::with_capacity(file.paw_blocks.len());
        for (k, b) in file.paw_blocks.iter().enumerate() {
            let p = b.proj_overlaps.to_matrix(&format!("paw_blocks[{k}].proj_overlaps"))?;
            if p.ncols() != b.n_a {
                return Err(Error::Schema {
                    pointer: format!("/paw_blocks/{k}/n_a"),
                    message: format!("n_a = {} but proj_overlaps has {} columns", b.n_a, p.ncols()),
                });
            }
            blocks.push(PawBlock::new(b.atom_id, p, b.ctensor_flat.clone())?);
        }
        let mut inst = match file.pair_density {
            PairDensityJson::FromOrbitals {
                coefficients,
                eigenvalues,
                n_occ,
                grid,
            } => {
                let c = coefficients.to_matrix("pair_density.coefficients")?;
                if c.nrows() != basis.len() {
                    return Err(Error::Dimension(format!(
                        "orbital coefficients have {} rows, the {} eV basis has {} plane waves",
                        c.nrows(),
                        file.basis.cutoff_ev,
                        basis.len()
                    )));
                }
                let orbitals = OrbitalSet::new(c, eigenvalues, n_occ)?;
                Self::from_orbitals(cell, basis, orbitals, h, file.constant_ha, blocks, file.kernel, grid)?
            }
            PairDensityJson::Explicit { entries } => {
                let mut millers = Vec::with_capacity(2 * entries.len());
                for e in &entries {
                    millers.push(e.miller);
                    millers.push([-e.miller[0], -e.miller[1], -e.miller[2]]);
                }
                let cutoff = millers
                    .iter()
                    .map(|&m| {
                        let g = cell.cartesian(m);
                        0.5 * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
                    })
                    .fold(0.0, f64::max);
                let grid = PlaneWaveBasis::from_millers(&cell, millers, cutoff)?;
                if grid.halfspace().len() != entries.len() {
                    return Err(Error::Schema {
                        pointer: "/pair_density/entries".into(),
                        message: "entries must list each ±G pair exactly once".into(),
                    });
                }
                let mut channels = Vec::with_capacity(entries.len());
                for &gi in grid.halfspace() {
                    let m = grid.millers()[gi];
                    let (k, e) = entries
                        .iter()
                        .enumerate()
                        .find(|(_, e)| e.miller == m || e.miller == [-m[0], -m[1], -m[2]])
                        .expect("grid built from entries");
                    let eta0 = e.eta0.to_matrix(&format!("pair_density.entries[{k}].eta0"))?;
                    let mut eta1 = e.eta1.to_matrix(&format!("pair_density.entries[{k}].eta1"))?;
                    if e.miller != m {
                        // Stored for −G: η₀(−G) = η₀(G), η₁(−G) = −η₁(G).
                        eta1.neg_mut();
                    }
                    channels.push([eta0, eta1]);
                }
                let pd = PairDensityTensor::from_channels(grid, channels)?;
                Self::explicit(cell, basis, h, file.constant_ha, pd, blocks, file.kernel)?
            }
        };
        inst.n_electrons = file.n_electrons.or(inst.n_electrons);
        inst.description = file.description;
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(parse_json(text)?)
    }

    pub fn ingest(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical serialization.
    pub fn checksum(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

/// Deserializes any JSON document, reporting schema errors with a pointer
/// to the offending field.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        pointer: json_pointer(e.path()),
        message: e.inner().to_string(),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// RFC 6901 pointer for a serde path.
pub fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}
