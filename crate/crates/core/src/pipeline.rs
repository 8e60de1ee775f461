//! End-to-end runs: instance → factorization → truncation → λ/Γ → QPE cost
//! → surface-code resources, with every intermediate quantity and the
//! invariant checks collected into one report.

use std::path::PathBuf;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::besim::{fock_hamiltonian_direct, fock_hamiltonian_factored, fock_hamiltonian_rotated, fock_spectrum, FockSpace, MAX_FOCK_DIMENSION, MAX_FOCK_ORBITALS};
use crate::downsample::{expand_plan, from_mha, to_mha, ErrorBudget, Sign};
use crate::error::{Error, Result};
use crate::factorize::{factorize, reconstruct_kappa, truncate, FactorizedHamiltonian};
use crate::instance::{sha256_hex, HamiltonianInstance};
use crate::lcucost::{qpe_cost, CostConfig, CostReport};
use crate::linalg::{max_abs_diff, unitarity_deviation};
use crate::qec::{physical_resources, PhysicalResources, QecConfig};
use crate::toyscf::{kappa_oracle, ToySystem, MAX_ORACLE_ORBITALS};

/// Tolerance for the dense identity checks.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;
const UNITARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    /// Instance JSON file.
    Path(PathBuf),
    /// Toy system solved in place.
    System(ToySystem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub source: InstanceSource,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub qec: QecConfig,
    #[serde(default)]
    pub verify: bool,
    /// Added to every synthetic PAW seed of a toy system.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub stage: String,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(stage: &str, name: &str, value: f64, tolerance: f64) -> InvariantCheck {
    InvariantCheck {
        stage: stage.into(),
        name: name.into(),
        value,
        tolerance,
        pass: value.is_finite() && value <= tolerance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub description: Option<String>,
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub n_pw_orbital: usize,
    pub n_pw_pair: usize,
    pub volume_bohr3: f64,
    pub paw_block_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationSummary {
    pub soft_terms: usize,
    pub paw_terms: usize,
    pub negative_paw_terms: usize,
    pub surviving_parameters_untruncated: usize,
    pub surviving_parameters: usize,
    pub truncation_delta: f64,
    pub max_unitarity_deviation: f64,
    /// `max |κ(factors) − κ(oracle)|` when the oracle is affordable.
    pub kappa_reconstruction_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockVerification {
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub dimension: usize,
    pub factored_vs_direct: f64,
    pub rotated_vs_direct: f64,
    pub lambda: f64,
    pub spectral_half_width: f64,
    pub ground_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub config_sha256: String,
    pub input_sha256: String,
    pub instance: InstanceSummary,
    pub factorization: FactorizationSummary,
    pub cost: CostReport,
    pub qec: PhysicalResources,
    pub verification: Option<FockVerification>,
    pub invariants: Vec<InvariantCheck>,
    pub pass: bool,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{name}: {m}")),
        Error::Dimension(m) => Error::Dimension(format!("{name}: {m}")),
        Error::Invariant(m) => Error::Invariant(format!("{name}: {m}")),
        Error::NoConvergence(m) => Error::NoConvergence(format!("{name}: {m}")),
        Error::GuardRail(m) => Error::GuardRail(format!("{name}: {m}")),
        Error::DegenerateGap(m) => Error::DegenerateGap(format!("{name}: {m}")),
        Error::Infeasible(m) => Error::Infeasible(format!("{name}: {m}")),
        other => other,
    })
}

/// Loads or synthesizes the instance; returns it with the checksum of the
/// bytes it came from.
pub fn load_instance(source: &InstanceSource, seed: u64) -> Result<(HamiltonianInstance, String)> {
    match source {
        InstanceSource::Path(p) => {
            let text = std::fs::read_to_string(p)?;
            let inst = HamiltonianInstance::from_json(&text)?;
            Ok((inst, sha256_hex(text.as_bytes())))
        }
        InstanceSource::System(sys) => {
            let mut sys = sys.clone();
            for s in &mut sys.paw {
                s.seed = s.seed.wrapping_add(seed);
            }
            let inst = sys.build()?;
            let bytes = serde_json::to_vec(&sys)?;
            Ok((inst, sha256_hex(&bytes)))
        }
    }
}

fn max_unitarity(fh: &FactorizedHamiltonian) -> f64 {
    fh.soft
        .iter()
        .map(|s| unitarity_deviation(&s.u))
        .chain(fh.paw.iter().map(|p| unitarity_deviation(&p.u)))
        .fold(0.0, f64::max)
}

/// Dense Fock-space checks of an untruncated factorization.
pub fn verify_fock(inst: &HamiltonianInstance, fh: &FactorizedHamiltonian) -> Result<FockVerification> {
    let n = inst.n_orbitals();
    if n > MAX_FOCK_ORBITALS {
        return Err(Error::GuardRail(format!(
            "Fock-space verification allows at most {MAX_FOCK_ORBITALS} orbitals, got {n}"
        )));
    }
    let fock = FockSpace::new(n, inst.electrons())?;
    if fock.dim() > MAX_FOCK_DIMENSION {
        return Err(Error::GuardRail(format!("Fock dimension {} too large", fock.dim())));
    }
    let kappa = kappa_oracle(inst)?;
    let direct = fock_hamiltonian_direct(&fh.one_body, &kappa, fh.constant, &fock)?;
    let factored = fock_hamiltonian_factored(fh, &fock)?;
    let rotated = fock_hamiltonian_rotated(fh, &fock)?;
    let ev = fock_spectrum(&direct, &fock)?;
    let lambda = crate::lcucost::lambda_total(fh)?.lambda_total;
    Ok(FockVerification {
        n_orbitals: n,
        n_electrons: inst.electrons(),
        dimension: fock.dim(),
        factored_vs_direct: max_abs_diff(&factored, &direct),
        rotated_vs_direct: max_abs_diff(&rotated, &direct),
        lambda,
        spectral_half_width: 0.5 * (ev[ev.len() - 1] - ev[0]),
        ground_energy: ev[0],
    })
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport> {
    let (inst, input_sha256) = stage("ingest", load_instance(&config.source, config.seed))?;
    let mut invariants = Vec::new();
    let full = stage("factorize", factorize(&inst))?;
    let unitarity = max_unitarity(&full);
    invariants.push(check("factorize", "rotation unitarity", unitarity, UNITARITY_TOLERANCE));
    let kappa_err = if inst.n_orbitals() <= MAX_ORACLE_ORBITALS {
        let oracle = stage("factorize", kappa_oracle(&inst))?;
        let rebuilt = stage("factorize", reconstruct_kappa(&full))?;
        let err = rebuilt.max_abs_diff(&oracle);
        invariants.push(check("factorize", "κ reconstruction", err, 1e-10 * oracle.max_abs().max(1.0)));
        Some(err)
    } else {
        None
    };
    let verification = if config.verify {
        let v = stage("verify", verify_fock(&inst, &full))?;
        invariants.push(check("verify", "factored vs direct", v.factored_vs_direct, IDENTITY_TOLERANCE));
        invariants.push(check("verify", "rotated vs direct", v.rotated_vs_direct, IDENTITY_TOLERANCE));
        invariants.push(check(
            "verify",
            "spectral half-width exceeds λ by",
            (v.spectral_half_width - v.lambda).max(0.0),
            0.0,
        ));
        Some(v)
    } else {
        None
    };
    let fh = stage("truncate", truncate(&full, config.delta))?;
    let cost = stage("estimate", qpe_cost(&fh, &config.cost))?;
    invariants.push(check(
        "estimate",
        "λ₂ dual-path relative difference",
        (cost.lambda.lambda_two_body - cost.lambda.lambda_two_body_per_factor).abs()
            / cost.lambda.lambda_two_body.abs().max(f64::MIN_POSITIVE),
        1e-10,
    ));
    let qec = stage(
        "qec",
        physical_resources(&config.qec, cost.logical_qubits as u64, cost.toffoli_total as f64),
    )?;
    invariants.push(check(
        "qec",
        "modelled failure probability",
        qec.logical_failure + qec.distillation_failure,
        config.qec.p_fail_log + config.qec.p_fail_msd,
    ));
    let pass = invariants.iter().all(|c| c.pass);
    let config_sha256 = sha256_hex(&serde_json::to_vec(config)?);
    Ok(PipelineReport {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        config_sha256,
        input_sha256,
        instance: InstanceSummary {
            description: inst.description.clone(),
            n_orbitals: inst.n_orbitals(),
            n_electrons: inst.electrons(),
            n_pw_orbital: inst.basis.len(),
            n_pw_pair: inst.pair_density.grid().len(),
            volume_bohr3: inst.cell.volume(),
            paw_block_sizes: inst.paw_blocks.iter().map(|b| b.n_a()).collect(),
        },
        factorization: FactorizationSummary {
            soft_terms: full.soft.len(),
            paw_terms: full.paw.len(),
            negative_paw_terms: full.paw.iter().filter(|p| p.sign < 0).count(),
            surviving_parameters_untruncated: full.surviving_parameters(),
            surviving_parameters: fh.surviving_parameters(),
            truncation_delta: config.delta,
            max_unitarity_deviation: unitarity,
            kappa_reconstruction_error: kappa_err,
        },
        cost,
        qec,
        verification,
        invariants,
        pass,
    })
}

/// Inputs for replaying the down-sampling workflow at toy scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowConfig {
    /// Primitive cell; `n_bands` is ignored in favour of `n_b`.
    pub system: ToySystem,
    /// Supercell repetitions for levels 1, 2 and 3.
    pub levels: [[u32; 3]; 3],
    /// (n_b, n_b', n_b'') orbitals per primitive cell.
    pub n_b: [usize; 3],
    pub budget_mha: Decimal,
    pub consumed_mha: Decimal,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub qec: QecConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowRow {
    pub cell: [u32; 3],
    pub level: u32,
    pub sign: Sign,
    pub n_orbitals: usize,
    pub orbitals_per_atom: f64,
    pub eps_qpe_mha: Decimal,
    pub lambda: f64,
    pub logical_qubits: u128,
    pub toffolis: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowReport {
    pub config: WorkflowConfig,
    pub budget: ErrorBudget,
    pub rows: Vec<WorkflowRow>,
    /// Surface-code resources for the most expensive run.
    pub qec_largest: PhysicalResources,
    pub largest_row: usize,
}

pub fn replay_downsampling(cfg: &WorkflowConfig) -> Result<WorkflowReport> {
    let [nb, nbp, nbpp] = cfg.n_b;
    let mut budget = ErrorBudget::total(from_mha(cfg.budget_mha));
    budget.eps_orb = from_mha(cfg.consumed_mha);
    let plan = stage("plan", expand_plan(nb, nbp, nbpp)?.with_budgets(&budget))?;
    let atoms_per_cell = cfg.system.potential.wells.len().max(1);
    let mut rows = Vec::with_capacity(plan.runs.len());
    for (run, eps) in plan.runs.iter().zip(&plan.budgets) {
        let reps = cfg.levels[(run.cell - 1) as usize];
        let prim = ToySystem {
            n_bands: run.n_b,
            ..cfg.system.clone()
        };
        let sys = prim.supercell(reps)?;
        let inst = stage(&format!("build level {}", run.cell), sys.build())?;
        let fh = truncate(&factorize(&inst)?, cfg.delta)?;
        let cost_cfg = CostConfig {
            eps_qpe: f64::try_from(*eps).map_err(|_| Error::InvalidInput("ε_QPE out of range".into()))?,
            ..cfg.cost
        };
        let cost = stage(&format!("estimate level {}", run.cell), qpe_cost(&fh, &cost_cfg))?;
        rows.push(WorkflowRow {
            cell: reps,
            level: run.cell,
            sign: run.sign,
            n_orbitals: inst.n_orbitals(),
            orbitals_per_atom: run.n_b as f64 / atoms_per_cell as f64,
            eps_qpe_mha: to_mha(*eps),
            lambda: cost.lambda.lambda_total,
            logical_qubits: cost.logical_qubits,
            toffolis: cost.toffoli_total,
        });
    }
    let largest_row = (0..rows.len())
        .max_by_key(|&i| (rows[i].toffolis, std::cmp::Reverse(i)))
        .expect("five runs");
    let big = &rows[largest_row];
    let qec_largest = stage(
        "qec",
        physical_resources(&cfg.qec, big.logical_qubits as u64, big.toffolis as f64),
    )?;
    Ok(WorkflowReport {
        config: cfg.clone(),
        budget: plan.totals.expect("budgets assigned"),
        rows,
        qec_largest,
        largest_row,
    })
}
