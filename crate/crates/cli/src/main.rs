use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rust_decimal::Decimal;
use serde::de::DeserializeOwned;

use pwpaw::downsample::{convergence_table, expand_plan, from_mha, ConvergenceFamily, ErrorBudget};
use pwpaw::factorize::{factorize, truncate, FactorizedHamiltonian};
use pwpaw::instance::HamiltonianInstance;
use pwpaw::lcucost::scaling::{default_orbital_family, default_supercell_family, lambda_scaling_study, ScalingFamily};
use pwpaw::lcucost::{qpe_cost, CostConfig};
use pwpaw::pipeline::{replay_downsampling, run_pipeline, verify_fock, InstanceSource, PipelineConfig, WorkflowConfig, IDENTITY_TOLERANCE};
use pwpaw::qec::{physical_resources, Factory, QecConfig};
use pwpaw::toyscf::{preset, ToySystem, PRESETS};
use pwpaw::upaw::{fit_pseudo_radial, verify_setup, FitOptions, FourierPenalty, RadialInput};
use pwpaw::Error;

#[derive(Parser)]
#[command(name = "pwpaw", version, about = "Qubitized phase-estimation resource estimates for plane-wave PAW Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a toy instance file from a preset or a system description.
    Synth(SynthArgs),
    /// Factorize an instance and write the factors.
    Factorize(FactorizeArgs),
    /// λ, Γ, QROAM and Toffoli/qubit counts.
    Estimate(EstimateArgs),
    /// Dense Fock-space identity checks on a small instance.
    Verify(VerifyArgs),
    /// λ₂ and Γ scaling sweeps.
    Scaling(ScalingArgs),
    /// Down-sampling plan with per-run ε_QPE, or a convergence table.
    Downsample(DownsampleArgs),
    /// Fit unitary-PAW pseudo partial waves.
    UpawFit(UpawArgs),
    /// Surface-code physical resources.
    Qec(QecArgs),
    /// Full run from instance to physical resources.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Source {
    /// Instance JSON file.
    #[arg(long, conflicts_with_all = ["system", "preset"])]
    instance: Option<PathBuf>,
    /// Toy system JSON file.
    #[arg(long, conflicts_with = "preset")]
    system: Option<PathBuf>,
    /// Built-in toy system.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// Added to the seeds of synthetic PAW blocks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CostArgs {
    /// Phase-estimation error in mHa.
    #[arg(long, default_value = "1.6", value_parser = positive_f64)]
    eps_mha: f64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    beth: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    aleph: u64,
    /// Fix the QROAM parameter (a power of two).
    #[arg(long, value_parser = power_of_two)]
    kr: Option<u64>,
}

impl CostArgs {
    fn config(&self) -> CostConfig {
        CostConfig {
            beth: self.beth,
            aleph: self.aleph,
            eps_qpe: self.eps_mha * 1e-3,
            kr: self.kr,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    source: Source,
    /// Store pair densities explicitly instead of orbital coefficients.
    #[arg(long)]
    explicit: bool,
    #[arg(long)]
    description: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct FactorizeArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative_f64)]
    delta: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    source: Source,
    /// Factors file written by `factorize`, used instead of an instance.
    #[arg(long, conflicts_with_all = ["instance", "system", "preset"])]
    factors: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative_f64)]
    delta: f64,
    #[command(flatten)]
    cost: CostArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ScalingArgs {
    /// `orbitals`, `supercells`, or a family JSON file.
    #[arg(long, default_value = "orbitals")]
    family: String,
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct DownsampleArgs {
    #[arg(long, required_unless_present = "convergence")]
    nb: Option<usize>,
    #[arg(long, required_unless_present = "convergence")]
    nbp: Option<usize>,
    #[arg(long, required_unless_present = "convergence")]
    nbpp: Option<usize>,
    /// Total error budget in mHa.
    #[arg(long, default_value = "1.6", value_parser = decimal)]
    budget_mha: Decimal,
    /// Budget already spent on non-QPE errors, in mHa.
    #[arg(long, default_value = "0", value_parser = decimal)]
    consumed_mha: Decimal,
    /// Convergence-family JSON; prints an MP2 convergence table instead.
    #[arg(long)]
    convergence: Option<PathBuf>,
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct UpawArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = positive_f64)]
    ra: f64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    p: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    m: u64,
    /// Penalise Fourier components above this |G| (Bohr⁻¹).
    #[arg(long, value_parser = positive_f64)]
    gmax: Option<f64>,
    #[arg(long, value_parser = positive_f64, requires = "gmax")]
    gupper: Option<f64>,
    #[arg(long, default_value = "1e-8", value_parser = positive_f64)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct QecOverrides {
    /// Physical error rate.
    #[arg(long = "p", value_parser = probability)]
    p_phys: Option<f64>,
    /// Factory catalog JSON (list of factories).
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Code-cycle time in seconds.
    #[arg(long, value_parser = positive_f64)]
    cycle_time: Option<f64>,
    #[arg(long)]
    allow_even_distance: bool,
}

impl QecOverrides {
    fn config(&self) -> Result<QecConfig, Error> {
        let mut c = QecConfig::default();
        if let Some(p) = self.p_phys {
            c.p_phys = p;
        }
        if let Some(t) = self.cycle_time {
            c.cycle_time_s = t;
        }
        if let Some(path) = &self.catalog {
            c.factory_catalog = read_json::<Vec<Factory>>(path)?;
        }
        c.allow_even_distance = self.allow_even_distance;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct QecArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    logical_qubits: u64,
    #[arg(long, value_parser = positive_f64)]
    toffolis: f64,
    #[command(flatten)]
    qec: QecOverrides,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    source: Source,
    /// Down-sampling workflow JSON; replays the five runs instead.
    #[arg(long, conflicts_with_all = ["instance", "system", "preset"])]
    workflow: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative_f64)]
    delta: f64,
    #[command(flatten)]
    cost: CostArgs,
    #[command(flatten)]
    qec: QecOverrides,
    /// Run the Fock-space identity checks inline.
    #[arg(long)]
    verify: bool,
    #[command(flatten)]
    output: Output,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be positive, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn nonnegative_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be non-negative, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn probability(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x < 1.0 => Ok(x),
        Ok(x) => Err(format!("must lie in (0, 1), got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn power_of_two(s: &str) -> Result<u64, String> {
    match s.parse::<u64>() {
        Ok(k) if k.is_power_of_two() => Ok(k),
        Ok(k) => Err(format!("must be a power of two, got {k}")),
        Err(e) => Err(e.to_string()),
    }
}

fn decimal(s: &str) -> Result<Decimal, String> {
    Decimal::from_str(s)
        .or_else(|_| Decimal::from_scientific(s))
        .map_err(|e| e.to_string())
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// Bad flags, unreadable or malformed input.
    Usage(String),
    /// An invariant or numerical check failed.
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::Schema { .. } | Error::Io(_) | Error::Json(_) | Error::Dimension(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Invariant(e.to_string()),
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    pwpaw::instance::parse_json(&fs::read_to_string(path)?)
}

fn emit(output: &Output, text: &str) -> Result<(), Error> {
    match &output.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn toy_system(src: &Source) -> Result<Option<ToySystem>, Error> {
    if let Some(name) = &src.preset {
        return Ok(preset(name));
    }
    if let Some(p) = &src.system {
        return Ok(Some(read_json(p)?));
    }
    Ok(None)
}

fn instance_source(src: &Source) -> Result<InstanceSource, Failure> {
    if let Some(p) = &src.instance {
        return Ok(InstanceSource::Path(p.clone()));
    }
    match toy_system(src)? {
        Some(sys) => Ok(InstanceSource::System(sys)),
        None => Err(Failure::Usage("one of --instance, --system or --preset is required".into())),
    }
}

fn load(src: &Source) -> Result<HamiltonianInstance, Failure> {
    let source = instance_source(src)?;
    Ok(pwpaw::pipeline::load_instance(&source, src.seed)?.0)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth(a) => {
            let mut inst = load(&a.source)?;
            if a.explicit {
                inst.orbitals = None;
            }
            if a.description.is_some() {
                inst.description = a.description;
            }
            emit(&a.output, &inst.to_json())?;
        }
        Command::Factorize(a) => {
            let inst = load(&a.source)?;
            let fh = truncate(&factorize(&inst)?, a.delta)?;
            emit(&a.output, &fh.to_json())?;
        }
        Command::Estimate(a) => {
            let fh = match &a.factors {
                Some(p) => FactorizedHamiltonian::from_json(&fs::read_to_string(p).map_err(Error::from)?)?,
                None => factorize(&load(&a.source)?)?,
            };
            let fh = truncate(&fh, a.delta)?;
            let report = qpe_cost(&fh, &a.cost.config())?;
            emit(&a.output, &pretty(&report))?;
        }
        Command::Verify(a) => {
            let inst = load(&a.source)?;
            let fh = factorize(&inst)?;
            let v = verify_fock(&inst, &fh)?;
            emit(&a.output, &pretty(&v))?;
            let worst = v.factored_vs_direct.max(v.rotated_vs_direct);
            if !(worst <= IDENTITY_TOLERANCE) {
                return Err(Failure::Invariant(format!(
                    "Fock-space identity off by {worst:e} (tolerance {IDENTITY_TOLERANCE:e})"
                )));
            }
            if v.lambda < v.spectral_half_width {
                return Err(Failure::Invariant(format!(
                    "λ = {} is below the spectral half-width {}",
                    v.lambda, v.spectral_half_width
                )));
            }
        }
        Command::Scaling(a) => {
            let family: ScalingFamily = match a.family.as_str() {
                "orbitals" => default_orbital_family(),
                "supercells" => default_supercell_family(),
                path => read_json(Path::new(path))?,
            };
            let study = lambda_scaling_study(&family)?;
            emit(&a.output, &if a.csv { study.to_csv() } else { pretty(&study) })?;
        }
        Command::Downsample(a) => {
            if let Some(path) = &a.convergence {
                let family: ConvergenceFamily = read_json(path)?;
                let table = convergence_table(&family)?;
                emit(&a.output, &if a.csv { table.to_csv() } else { pretty(&table) })?;
                return Ok(());
            }
            let (nb, nbp, nbpp) = (a.nb.unwrap_or(0), a.nbp.unwrap_or(0), a.nbpp.unwrap_or(0));
            let mut budget = ErrorBudget::total(from_mha(a.budget_mha));
            budget.eps_orb = from_mha(a.consumed_mha);
            let plan = expand_plan(nb, nbp, nbpp)?.with_budgets(&budget)?;
            emit(&a.output, &pretty(&plan))?;
        }
        Command::UpawFit(a) => {
            let input: RadialInput = read_json(&a.input)?;
            let opts = FitOptions {
                r_a: a.ra,
                p: a.p as usize,
                m: a.m as usize,
                penalty: a.gmax.map(|g| FourierPenalty {
                    g_max: g,
                    g_upper: a.gupper,
                }),
                tolerance: a.tol,
            };
            let setup = fit_pseudo_radial(&input.channels, &opts)?;
            emit(&a.output, &pretty(&setup))?;
            let report = verify_setup(&setup, &input.channels);
            if !report.pass {
                let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
                return Err(Failure::Invariant(format!("verification failed: {}", failed.join(", "))));
            }
        }
        Command::Qec(a) => {
            let config = a.qec.config()?;
            let r = physical_resources(&config, a.logical_qubits, a.toffolis)?;
            emit(&a.output, &pretty(&r))?;
        }
        Command::Pipeline(a) => {
            if let Some(path) = &a.workflow {
                let cfg: WorkflowConfig = read_json(path)?;
                let report = replay_downsampling(&cfg)?;
                emit(&a.output, &pretty(&report))?;
                return Ok(());
            }
            let config = PipelineConfig {
                source: instance_source(&a.source)?,
                delta: a.delta,
                cost: a.cost.config(),
                qec: a.qec.config()?,
                verify: a.verify,
                seed: a.source.seed,
            };
            let report = run_pipeline(&config)?;
            emit(&a.output, &report.to_json())?;
            if !report.pass {
                let failed: Vec<_> = report
                    .invariants
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| format!("{}: {}", c.stage, c.name))
                    .collect();
                return Err(Failure::Invariant(format!("invariant checks failed: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invariant(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
