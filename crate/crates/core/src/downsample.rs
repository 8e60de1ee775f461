//! Down-sampling energy bookkeeping: the five-run telescoping plan, error
//! budget allocation and MP2 orbital-convergence tables.

use num_traits::Num;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pwbasis::{build_basis, coulomb_kernel, Cell};
use crate::toyscf::{kappa_soft, mp2_energy, pair_density, solve_mean_field, PotentialSpec, ToySystem};
use crate::lcucost::scaling::replicate_wells;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn apply<T: Num>(self, x: T) -> T {
        match self {
            Sign::Plus => x,
            Sign::Minus => T::zero() - x,
        }
    }
}

/// One QPE job: supercell level `cell` with `n_b` orbitals per primitive cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub cell: u32,
    pub n_b: usize,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownsamplePlan {
    /// (supercell level, orbitals) pairs in increasing level.
    pub levels: Vec<(u32, usize)>,
    pub runs: Vec<Run>,
    /// Per-run ε_QPE in Hartree, filled by [`DownsamplePlan::with_budgets`].
    #[serde(default)]
    pub budgets: Vec<Decimal>,
    #[serde(default)]
    pub totals: Option<ErrorBudget>,
}

/// `E_ds(3) = E(1,n_b'') + E(2,n_b') − E(1,n_b') + E(3,n_b) − E(2,n_b)`.
pub fn expand_plan(n_b: usize, n_bp: usize, n_bpp: usize) -> Result<DownsamplePlan> {
    if !(n_b < n_bp && n_bp < n_bpp) {
        return Err(Error::InvalidInput(format!(
            "orbital counts must satisfy n_b < n_b' < n_b'', got {n_b}, {n_bp}, {n_bpp}"
        )));
    }
    if n_b == 0 {
        return Err(Error::InvalidInput("n_b must be positive".into()));
    }
    use Sign::*;
    let runs = vec![
        Run { cell: 1, n_b: n_bpp, sign: Plus },
        Run { cell: 2, n_b: n_bp, sign: Plus },
        Run { cell: 1, n_b: n_bp, sign: Minus },
        Run { cell: 3, n_b, sign: Plus },
        Run { cell: 2, n_b, sign: Minus },
    ];
    Ok(DownsamplePlan {
        levels: vec![(1, n_bpp), (2, n_bp), (3, n_b)],
        runs,
        budgets: Vec::new(),
        totals: None,
    })
}

impl DownsamplePlan {
    /// Signed sum of `energy(cell, n_b)` over the runs.
    pub fn telescoping_sum<T: Num + Clone>(&self, mut energy: impl FnMut(u32, usize) -> T) -> T {
        self.runs
            .iter()
            .fold(T::zero(), |acc, r| acc + r.sign.apply(energy(r.cell, r.n_b)))
    }

    /// The recursion `E_ds(n+1) = E_ds(n) + E(n+1, m_{n+1}) − E(n, m_{n+1})`
    /// started from `E_ds(1) = E(1, m_1)`.
    pub fn recursion<T: Num + Clone>(&self, mut energy: impl FnMut(u32, usize) -> T) -> T {
        let mut levels = self.levels.iter();
        let Some(&(c0, m0)) = levels.next() else {
            return T::zero();
        };
        let mut e = energy(c0, m0);
        for &(c, m) in levels {
            e = e + energy(c, m) - energy(c - 1, m);
        }
        e
    }

    pub fn with_budgets(mut self, budget: &ErrorBudget) -> Result<Self> {
        let (per_run, totals) = allocate_budget(budget, self.runs.len())?;
        self.budgets = per_run;
        self.totals = Some(totals);
        Ok(self)
    }
}

/// Error budget components in Hartree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub eps_tot: Decimal,
    pub eps_qpe: Decimal,
    pub eps_trunc: Decimal,
    pub eps_be: Decimal,
    pub eps_orb: Decimal,
    pub eps_pw: Decimal,
    pub eps_paw: Decimal,
}

impl ErrorBudget {
    /// Budget with `eps_tot` and nothing yet spent.
    pub fn total(eps_tot: Decimal) -> Self {
        ErrorBudget {
            eps_tot,
            eps_qpe: Decimal::ZERO,
            eps_trunc: Decimal::ZERO,
            eps_be: Decimal::ZERO,
            eps_orb: Decimal::ZERO,
            eps_pw: Decimal::ZERO,
            eps_paw: Decimal::ZERO,
        }
    }

    pub fn consumed(&self) -> Decimal {
        self.eps_trunc + self.eps_be + self.eps_orb + self.eps_pw + self.eps_paw
    }

    pub fn residual(&self) -> Decimal {
        self.eps_tot - self.consumed()
    }

    /// Sum of all components minus the total; zero when balanced.
    pub fn imbalance(&self) -> Decimal {
        self.consumed() + self.eps_qpe - self.eps_tot
    }
}

/// Equal split of the residual over `n_runs`. Any rounding remainder of the
/// decimal division goes to the last run so the budgets sum exactly.
pub fn allocate_budget(budget: &ErrorBudget, n_runs: usize) -> Result<(Vec<Decimal>, ErrorBudget)> {
    allocate_weighted(budget, &vec![Decimal::ONE; n_runs])
}

/// Split of the residual proportional to `weights` (for example λ per run).
pub fn allocate_weighted(budget: &ErrorBudget, weights: &[Decimal]) -> Result<(Vec<Decimal>, ErrorBudget)> {
    if weights.is_empty() {
        return Err(Error::InvalidInput("need at least one run".into()));
    }
    if weights.iter().any(|w| *w <= Decimal::ZERO) {
        return Err(Error::InvalidInput("run weights must be positive".into()));
    }
    let residual = budget.residual();
    if residual <= Decimal::ZERO {
        return Err(Error::Infeasible(format!(
            "budget exhausted before QPE: total {} Ha, consumed {} Ha",
            budget.eps_tot,
            budget.consumed()
        )));
    }
    let wsum: Decimal = weights.iter().copied().sum();
    let mut out: Vec<Decimal> = weights.iter().map(|w| residual * *w / wsum).collect();
    let assigned: Decimal = out[..out.len() - 1].iter().copied().sum();
    *out.last_mut().expect("non-empty") = residual - assigned;
    let totals = ErrorBudget {
        eps_qpe: residual,
        ..budget.clone()
    };
    Ok((out, totals))
}

/// Hartree to mHa.
pub fn to_mha(x: Decimal) -> Decimal {
    x * Decimal::ONE_THOUSAND
}

/// mHa to Hartree.
pub fn from_mha(x: Decimal) -> Decimal {
    x / Decimal::ONE_THOUSAND
}

/// Toy family for orbital-convergence tables: a primitive cell and one
/// supercell, with `n_b` counted per primitive cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFamily {
    pub system: ToySystem,
    pub supercell: [u32; 3],
    pub n_b: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_b: usize,
    /// MP2 correlation energy of the primitive cell (Ha).
    pub e_primitive: f64,
    /// MP2 correlation energy of the supercell per primitive cell (Ha).
    pub e_supercell: f64,
    /// Supercell mode: `E_S(n_b) − E_S(n_max)`.
    pub dev_supercell: f64,
    /// Same deviation accumulated from consecutive differences.
    pub dev_supercell_telescoped: f64,
    /// Down-sampling mode: `E_P(n_max) + E_S(n_b) − E_P(n_b) − E_S(n_max)`.
    pub dev_downsampled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "n_b,e_primitive_ha,e_supercell_ha,dev_supercell_mha,dev_supercell_telescoped_mha,dev_downsampled_mha\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.12e},{:.12e},{:.9},{:.9},{:.9}\n",
                r.n_b,
                r.e_primitive,
                r.e_supercell,
                1e3 * r.dev_supercell,
                1e3 * r.dev_supercell_telescoped,
                1e3 * r.dev_downsampled
            ));
        }
        s
    }
}

/// MP2 correlation energy per primitive cell for each `n_b` (per primitive
/// cell) on the cell obtained by repeating the primitive `reps` times.
fn mp2_series(system: &ToySystem, reps: [u32; 3], n_b: &[usize]) -> Result<Vec<f64>> {
    let prim = Cell::new(system.lattice_bohr)?;
    let cell = prim.supercell(reps)?;
    let n_cells = reps.iter().map(|&r| r as usize).product::<usize>();
    let potential = PotentialSpec {
        wells: replicate_wells(&prim, &system.potential.wells, reps),
        offset: system.potential.offset,
    };
    let basis = build_basis(&cell, system.cutoff_ev)?;
    let n_max = n_b.iter().copied().max().unwrap_or(0) * n_cells;
    let n_occ = system.n_occ * n_cells;
    let orbitals = solve_mean_field(&cell, &basis, &potential, n_max, n_occ)?;
    let mut out = Vec::with_capacity(n_b.len());
    for &m in n_b {
        let orb = orbitals.truncated(m * n_cells)?;
        let pd = pair_density(&orb, &basis, &cell)?;
        let kernel = coulomb_kernel(pd.grid(), &cell, system.kernel)?;
        let kappa = kappa_soft(&pd, &kernel)?;
        let e = mp2_energy(&orb, &kappa).map_err(|e| match e {
            Error::DegenerateGap(msg) => Error::DegenerateGap(format!(
                "MP2 on {reps:?} supercell with n_b = {m}: {msg}"
            )),
            other => other,
        })?;
        out.push(e / n_cells as f64);
    }
    Ok(out)
}

/// Deviations of the MP2 correlation energy from the largest-`n_b` value,
/// in supercell and down-sampling modes.
pub fn convergence_table(family: &ConvergenceFamily) -> Result<ConvergenceTable> {
    let mut n_b = family.n_b.clone();
    n_b.sort_unstable();
    n_b.dedup();
    if n_b.len() < 2 {
        return Err(Error::InvalidInput("need at least two orbital counts".into()));
    }
    if n_b[0] <= family.system.n_occ {
        return Err(Error::InvalidInput(format!(
            "every n_b must exceed n_occ = {}",
            family.system.n_occ
        )));
    }
    let prim = mp2_series(&family.system, [1, 1, 1], &n_b)?;
    let sup = mp2_series(&family.system, family.supercell, &n_b)?;
    let last = n_b.len() - 1;
    let rows = (0..n_b.len())
        .map(|k| {
            let telescoped = -(k..last).map(|t| sup[t + 1] - sup[t]).sum::<f64>();
            ConvergenceRow {
                n_b: n_b[k],
                e_primitive: prim[k],
                e_supercell: sup[k],
                dev_supercell: sup[k] - sup[last],
                dev_supercell_telescoped: telescoped,
                dev_downsampled: prim[last] + sup[k] - prim[k] - sup[last],
            }
        })
        .collect();
    Ok(ConvergenceTable { rows })
}
