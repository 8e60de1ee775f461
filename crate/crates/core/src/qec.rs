//! Surface-code physical resource model: code distance, magic-state
//! factories, physical qubits and runtime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A CCZ magic-state factory. Footprint and timing are external catalog
/// data, not derived here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factory {
    pub name: String,
    /// Failure probability per output CCZ state.
    pub output_error: f64,
    /// Physical qubits per factory.
    pub footprint_qubits: u64,
    /// Code cycles per output state.
    pub cycles_per_state: f64,
    /// (d_X, d_Z, d_m) of the final distillation level.
    pub distances: [u32; 3],
    /// Where the numbers come from.
    pub source: String,
}

/// Tile count `n_L = a·n + ⌈√(b·n)⌉ + c` for `n` algorithm qubits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutModel {
    pub linear: u64,
    pub sqrt_coeff: u64,
    pub constant: u64,
}

impl LayoutModel {
    /// Fast-block layout: `2n + ⌈√(8n)⌉ + 1`.
    pub const FAST_BLOCK: LayoutModel = LayoutModel {
        linear: 2,
        sqrt_coeff: 8,
        constant: 1,
    };

    pub fn tiles(&self, n: u64) -> u64 {
        self.linear * n + ceil_sqrt(self.sqrt_coeff * n) + self.constant
    }
}

fn ceil_sqrt(x: u64) -> u64 {
    let mut r = (x as f64).sqrt() as u64;
    while r * r < x {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= x {
        r -= 1;
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QecConfig {
    pub p_phys: f64,
    pub p_thr: f64,
    pub prefactor: f64,
    pub p_fail_log: f64,
    pub p_fail_msd: f64,
    /// Logical cycles per Toffoli.
    pub cycles_per_toffoli: u64,
    pub cycle_time_s: f64,
    pub allow_even_distance: bool,
    pub layout: LayoutModel,
    pub factory_catalog: Vec<Factory>,
}

impl Default for QecConfig {
    fn default() -> Self {
        QecConfig {
            p_phys: 1e-4,
            p_thr: 0.01,
            prefactor: 0.1,
            p_fail_log: 0.009,
            p_fail_msd: 0.001,
            cycles_per_toffoli: 3,
            cycle_time_s: 1e-6,
            allow_even_distance: false,
            layout: LayoutModel::FAST_BLOCK,
            factory_catalog: default_catalog(),
        }
    }
}

/// Seed catalog. All entries are approximate figures for p = 1e-4 and are
/// meant to be replaced by a user-supplied catalog file.
pub fn default_catalog() -> Vec<Factory> {
    vec![
        Factory {
            name: "(15-to-1)_{11,5,5} x (8-to-CCZ)_{15,7,9}".into(),
            output_error: 1e-13,
            footprint_qubits: 6_000,
            cycles_per_state: 40.0,
            distances: [15, 7, 9],
            source: "illustrative placeholder (approximate)".into(),
        },
        Factory {
            name: "(15-to-1)_{13,5,5} x (8-to-CCZ)_{21,9,9}".into(),
            output_error: 1e-17,
            footprint_qubits: 9_000,
            cycles_per_state: 50.0,
            distances: [21, 9, 9],
            source: "illustrative placeholder (approximate)".into(),
        },
        Factory {
            name: "(15-to-1)^4_{9,3,3} x (8-to-CCZ)_{25,9,9}".into(),
            output_error: 5e-22,
            footprint_qubits: 12_000,
            cycles_per_state: 60.0,
            distances: [25, 9, 9],
            source: "two-level CCZ synthillation factory; approximate external figures".into(),
        },
    ]
}

impl QecConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_phys", self.p_phys),
            ("p_thr", self.p_thr),
            ("p_fail_log", self.p_fail_log),
            ("p_fail_msd", self.p_fail_msd),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidInput(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.p_phys >= self.p_thr {
            return Err(Error::InvalidInput(format!(
                "below threshold required: p = {} >= p_thr = {}",
                self.p_phys, self.p_thr
            )));
        }
        if !(self.prefactor > 0.0) || !(self.cycle_time_s > 0.0) || self.cycles_per_toffoli == 0 {
            return Err(Error::InvalidInput("prefactor, cycle time and cycles per Toffoli must be positive".into()));
        }
        Ok(())
    }

    /// Logical error per patch per logical cycle at distance `d`.
    pub fn logical_error_rate(&self, d: u32) -> f64 {
        self.prefactor * (self.p_phys / self.p_thr).powf(f64::from(d + 1) / 2.0)
    }

    fn per_cycle_budget(&self, n_toff: f64, n_qubits: f64) -> f64 {
        self.p_fail_log / (self.cycles_per_toffoli as f64 * n_toff * n_qubits)
    }
}

/// Smallest admissible d (odd unless even distances are enabled) with
/// `A (p/p_thr)^{(d+1)/2} ≤ p_fail^log / (3 N_Toff N_qubits)`.
pub fn code_distance(config: &QecConfig, n_toff: f64, n_qubits: f64) -> Result<u32> {
    config.validate()?;
    if !(n_toff > 0.0) || !(n_qubits > 0.0) || !n_toff.is_finite() || !n_qubits.is_finite() {
        return Err(Error::InvalidInput("Toffoli and qubit counts must be positive".into()));
    }
    let budget = config.per_cycle_budget(n_toff, n_qubits);
    let ok = |d: u32| config.logical_error_rate(d) <= budget;
    let step = if config.allow_even_distance { 1 } else { 2 };
    // Closed form for (d+1)/2, then settle against the inequality itself.
    let x = (budget / config.prefactor).ln() / (config.p_phys / config.p_thr).ln();
    let mut d = (2.0 * x - 1.0).ceil().max(1.0) as u32;
    if step == 2 && d.is_multiple_of(2) {
        d += 1;
    }
    while !ok(d) {
        d += step;
    }
    while d > step && ok(d - step) {
        d -= step;
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalResources {
    pub code_distance: u32,
    pub logical_qubits: u64,
    pub logical_tiles: u64,
    pub factory: String,
    pub factories_count: u64,
    pub factory_qubits: u64,
    pub algorithm_qubits: u64,
    pub physical_qubits_total: u64,
    pub runtime_cycles: f64,
    pub runtime_seconds: f64,
    pub logical_failure: f64,
    pub distillation_failure: f64,
}

/// Distance, factory choice and totals for an algorithm of `logical_qubits`
/// qubits and `n_toff` Toffolis.
pub fn physical_resources(config: &QecConfig, logical_qubits: u64, n_toff: f64) -> Result<PhysicalResources> {
    config.validate()?;
    if logical_qubits == 0 || !(n_toff > 0.0) {
        return Err(Error::InvalidInput("logical qubits and Toffolis must be positive".into()));
    }
    let tiles = config.layout.tiles(logical_qubits);
    let d = code_distance(config, n_toff, tiles as f64)?;
    let target = config.p_fail_msd / n_toff;
    let logical_cycle = f64::from(d);
    let state_interval = config.cycles_per_toffoli as f64 * logical_cycle;
    let mut best: Option<(&Factory, u64)> = None;
    for f in &config.factory_catalog {
        if f.output_error > target {
            continue;
        }
        let count = ((f.cycles_per_state / state_interval).ceil() as u64).max(1);
        let cost = count * f.footprint_qubits;
        // Cheapest total footprint; ties keep catalog order.
        if best.is_none_or(|(bf, bc)| cost < bc * bf.footprint_qubits) {
            best = Some((f, count));
        }
    }
    let (factory, count) = best.ok_or_else(|| {
        let best_available = config
            .factory_catalog
            .iter()
            .min_by(|a, b| a.output_error.total_cmp(&b.output_error))
            .map(|f| format!("{} ({:e})", f.name, f.output_error))
            .unwrap_or_else(|| "empty catalog".into());
        Error::Infeasible(format!(
            "no factory reaches output error {target:e}; best available: {best_available}"
        ))
    })?;
    let d2 = u64::from(d) * u64::from(d);
    let algorithm_qubits = (2 * d2 - 1) * tiles;
    let factory_qubits = count * factory.footprint_qubits;
    let runtime_cycles = config.cycles_per_toffoli as f64 * n_toff * logical_cycle;
    let logical_failure = config.cycles_per_toffoli as f64 * n_toff * tiles as f64 * config.logical_error_rate(d);
    Ok(PhysicalResources {
        code_distance: d,
        logical_qubits,
        logical_tiles: tiles,
        factory: factory.name.clone(),
        factories_count: count,
        factory_qubits,
        algorithm_qubits,
        physical_qubits_total: algorithm_qubits + factory_qubits,
        runtime_cycles,
        runtime_seconds: runtime_cycles * config.cycle_time_s,
        logical_failure,
        distillation_failure: n_toff * factory.output_error,
    })
}
