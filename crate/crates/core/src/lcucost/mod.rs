//! Subnormalization, data volume, QROAM trade-off and qubitized-QPE logical
//! cost model.

pub mod scaling;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorize::{FactorizedHamiltonian, SpectralTerm, PARAMETER_FLOOR};

/// Walk-operator calls per unit of `λ/ε` in phase estimation.
pub const QPE_ITERATION_CONSTANT: f64 = PI / 2.0;

/// Ancilla qubits for control, flags and the rotation target, counted once.
pub const CONTROL_OVERHEAD_QUBITS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    /// Rotation angle bits ℶ.
    pub beth: u64,
    /// Keep-probability bits ℵ.
    pub aleph: u64,
    /// Phase-estimation error in Hartree.
    pub eps_qpe: f64,
    /// Forced QROAM parameter; chosen optimally when absent.
    pub kr: Option<u64>,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            beth: 20,
            aleph: 10,
            eps_qpe: 1.6e-3,
            kr: None,
        }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beth < 1 || self.aleph < 1 {
            return Err(Error::InvalidInput("beth and aleph must be at least 1".into()));
        }
        if !(self.eps_qpe > 0.0) || !self.eps_qpe.is_finite() {
            return Err(Error::InvalidInput(format!(
                "eps_qpe must be positive, got {}",
                self.eps_qpe
            )));
        }
        if let Some(k) = self.kr {
            check_power_of_two(k)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub lambda_total: f64,
    pub lambda_one_body: f64,
    pub lambda_two_body: f64,
    pub lambda_soft: f64,
    pub lambda_paw: f64,
    /// λ₂ accumulated factor by factor.
    pub lambda_two_body_per_factor: f64,
    /// `Σ_pq ξ^{(j)}_pq` for j = 0, 1.
    pub xi_sum: [f64; 2],
    pub xi_max: [f64; 2],
}

/// `(Σ_p |f_p|)² |w| / 2` for one squared term.
pub fn term_lambda(t: &SpectralTerm) -> f64 {
    let s: f64 = t.f.iter().map(|x| x.abs()).sum();
    0.5 * t.weight.abs() * s * s
}

/// λ from the one-body spectrum, soft terms (as ξ matrices) and PAW terms.
///
/// Each soft term at a half-space G contributes `4 v′(G) |f_p||f_q|` to
/// `ξ^{(j)}_pq`, which is the full-grid sum `Σ_{G≠0} 2 v(G) |f_p||f_q|` plus
/// the G = 0 entry `4 v′(0) |f_p||f_q|`. Then
/// `λ = Σ_p |ε′_p| + ⅛ Σ_j Σ_pq ξ^{(j)}_pq + ¼ Σ |ε| (Σ_p |f_p|)²`.
pub fn lambda_from_parts(
    eps_prime: &[f64],
    soft: &[(u8, SpectralTerm)],
    paw: &[(f64, Vec<f64>)],
    n_orbitals: usize,
) -> LambdaReport {
    let lambda_one_body: f64 = eps_prime.iter().map(|e| e.abs()).sum();
    let n = n_orbitals;
    let mut xi = [vec![0.0; n * n], vec![0.0; n * n]];
    for (j, t) in soft {
        let w = 4.0 * t.weight.abs();
        let xj = &mut xi[usize::from(*j)];
        for (p, fp) in t.f.iter().enumerate() {
            if *fp == 0.0 {
                continue;
            }
            for (q, fq) in t.f.iter().enumerate() {
                xj[p * n + q] += w * fp.abs() * fq.abs();
            }
        }
    }
    let xi_sum = [xi[0].iter().sum::<f64>(), xi[1].iter().sum::<f64>()];
    let xi_max = [
        xi[0].iter().copied().fold(0.0, f64::max),
        xi[1].iter().copied().fold(0.0, f64::max),
    ];
    let lambda_soft = 0.125 * (xi_sum[0] + xi_sum[1]);
    let lambda_paw: f64 = paw
        .iter()
        .map(|(eps, f)| {
            let s: f64 = f.iter().map(|x| x.abs()).sum();
            0.25 * eps.abs() * s * s
        })
        .sum();
    let per_factor: f64 = soft.iter().map(|(_, t)| term_lambda(t)).sum::<f64>()
        + paw
            .iter()
            .map(|(eps, f)| {
                term_lambda(&SpectralTerm {
                    weight: 0.5 * eps,
                    f: f.clone(),
                })
            })
            .sum::<f64>();
    let lambda_two_body = lambda_soft + lambda_paw;
    LambdaReport {
        lambda_total: lambda_one_body + lambda_two_body,
        lambda_one_body,
        lambda_two_body,
        lambda_soft,
        lambda_paw,
        lambda_two_body_per_factor: per_factor,
        xi_sum,
        xi_max,
    }
}

/// λ of a factorized Hamiltonian; fails if the two λ₂ routes disagree by
/// more than 1e-10 relative.
pub fn lambda_total(fh: &FactorizedHamiltonian) -> Result<LambdaReport> {
    if fh.one_body.eps_prime.len() != fh.n_orbitals {
        return Err(Error::InvalidInput("factorization lacks the h′ spectrum".into()));
    }
    let soft: Vec<(u8, SpectralTerm)> = fh
        .soft
        .iter()
        .map(|s| {
            (
                s.j,
                SpectralTerm {
                    weight: s.weight,
                    f: s.f.clone(),
                },
            )
        })
        .collect();
    let paw: Vec<(f64, Vec<f64>)> = fh
        .paw
        .iter()
        .map(|p| (f64::from(p.sign) * p.eps, p.f.clone()))
        .collect();
    let r = lambda_from_parts(&fh.one_body.eps_prime, &soft, &paw, fh.n_orbitals);
    check_dual(&r)?;
    Ok(r)
}

fn check_dual(r: &LambdaReport) -> Result<()> {
    let diff = (r.lambda_two_body - r.lambda_two_body_per_factor).abs();
    if diff > 1e-10 * r.lambda_two_body.abs().max(f64::MIN_POSITIVE) && diff > 0.0 {
        return Err(Error::Invariant(format!(
            "λ₂ routes disagree: {} vs {}",
            r.lambda_two_body, r.lambda_two_body_per_factor
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaReport {
    pub l: u64,
    pub gamma_nominal: u128,
    pub gamma_nonzero: u128,
    pub surviving_parameters: u64,
}

/// `L = N_pw + Σ_a n_a(n_a+1)/2` with `N_pw` the pair-density grid size.
pub fn l_count(n_pw_pair: usize, paw_sizes: &[usize]) -> u64 {
    (n_pw_pair + paw_sizes.iter().map(|n| n * (n + 1) / 2).sum::<usize>()) as u64
}

pub fn gamma(fh: &FactorizedHamiltonian, config: &CostConfig) -> GammaReport {
    let l = l_count(fh.n_pw_pair, &fh.paw_sizes);
    let nb = fh.n_orbitals as u128;
    let surviving = fh.surviving_parameters() as u64;
    GammaReport {
        l,
        gamma_nominal: u128::from(l) * nb * nb * u128::from(config.beth),
        gamma_nonzero: u128::from(surviving) * nb * u128::from(config.beth),
        surviving_parameters: surviving,
    }
}

/// Eigenvalues above the floor across a set of spectra.
pub fn surviving_in(terms: &[SpectralTerm]) -> u64 {
    terms
        .iter()
        .flat_map(|t| t.f.iter())
        .filter(|x| x.abs() > PARAMETER_FLOOR)
        .count() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QroamCost {
    pub kr: u64,
    pub toffolis: u128,
    pub qubits: u128,
}

fn check_power_of_two(k: u64) -> Result<()> {
    if k == 0 || !k.is_power_of_two() {
        return Err(Error::InvalidInput(format!("k_r must be a power of 2, got {k}")));
    }
    Ok(())
}

/// Smallest `m ≥ 0` with `2^m ≥ num/den`, i.e. `⌈log₂(num/den)⌉` clamped at 0.
pub fn ceil_log2_ratio(num: u128, den: u128) -> u32 {
    let mut m = 0;
    while den << m < num {
        m += 1;
    }
    m
}

/// QROAM over `L N_b` items of `N_b ℶ` bits:
/// Toffolis `⌈L N_b / k⌉ + N_b ℶ (k − 1)`,
/// qubits `N_b ℶ k + ⌈log₂(L N_b / k)⌉`.
pub fn qroam_cost(l: u64, n_b: u64, beth: u64, kr: u64) -> Result<QroamCost> {
    check_power_of_two(kr)?;
    let items = u128::from(l) * u128::from(n_b);
    let width = u128::from(n_b) * u128::from(beth);
    let k = u128::from(kr);
    Ok(QroamCost {
        kr,
        toffolis: items.div_ceil(k) + width * (k - 1),
        qubits: width * k + u128::from(ceil_log2_ratio(items, k)),
    })
}

/// Toffoli-optimal `k_r` over powers of two; ties go to the smaller `k_r`.
pub fn optimal_qroam(l: u64, n_b: u64, beth: u64) -> Result<QroamCost> {
    let items = u128::from(l) * u128::from(n_b);
    let mut best = qroam_cost(l, n_b, beth, 1)?;
    let mut k: u64 = 2;
    while u128::from(k) <= 2 * items.max(1) {
        let c = qroam_cost(l, n_b, beth, k)?;
        if c.toffolis < best.toffolis {
            best = c;
        }
        k = match k.checked_mul(2) {
            Some(x) => x,
            None => break,
        };
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub lambda: LambdaReport,
    pub gamma: GammaReport,
    pub n_orbitals: usize,
    pub qroam: QroamCost,
    pub iterations: u128,
    pub toffolis_per_iteration: u128,
    pub toffoli_total: u128,
    pub logical_qubits: u128,
    pub breakdown: BTreeMap<String, u128>,
    pub config: CostConfig,
}

pub fn qpe_iterations(lambda: f64, eps_qpe: f64) -> Result<u128> {
    if !(eps_qpe > 0.0) {
        return Err(Error::InvalidInput(format!("eps_qpe must be positive, got {eps_qpe}")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("λ must be finite and non-negative, got {lambda}")));
    }
    Ok((QPE_ITERATION_CONSTANT * lambda / eps_qpe).ceil().max(1.0) as u128)
}

/// Per-iteration Toffolis and logical qubits from λ, L and N_b.
pub fn cost_model(
    lambda: &LambdaReport,
    gamma: GammaReport,
    n_orbitals: usize,
    config: &CostConfig,
) -> Result<CostReport> {
    config.validate()?;
    let nb = n_orbitals as u64;
    let l = gamma.l;
    let qroam = match config.kr {
        Some(k) => qroam_cost(l, nb, config.beth, k)?,
        None => optimal_qroam(l, nb, config.beth)?,
    };
    let iterations = qpe_iterations(lambda.lambda_total, config.eps_qpe)?;
    let log_l = ceil_log2_ratio(u128::from(l), 1);
    let nb128 = u128::from(nb);
    let beth = u128::from(config.beth);
    let mut bd = BTreeMap::new();
    bd.insert("qroam_load_unload".to_string(), 2 * qroam.toffolis);
    bd.insert(
        "rotations".to_string(),
        2 * 4 * nb128 * beth.saturating_sub(2),
    );
    bd.insert(
        "state_preparation".to_string(),
        u128::from(l) + (1u128 << log_l) + u128::from(config.aleph),
    );
    bd.insert("sign_bit".to_string(), 1);
    let per_iter: u128 = bd.values().sum();
    let log_iter = ceil_log2_ratio(iterations, 1);
    let mut qb = BTreeMap::new();
    qb.insert("qubits_system".to_string(), 2 * nb128);
    qb.insert("qubits_qroam".to_string(), qroam.qubits);
    qb.insert("qubits_term_index".to_string(), u128::from(log_l));
    qb.insert("qubits_keep_probability".to_string(), u128::from(config.aleph));
    qb.insert("qubits_phase_register".to_string(), u128::from(log_iter));
    qb.insert("qubits_control".to_string(), u128::from(CONTROL_OVERHEAD_QUBITS));
    qb.insert("qubits_sign".to_string(), 1);
    let logical_qubits: u128 = qb.values().sum();
    for (k, v) in &qb {
        bd.insert(k.clone(), *v);
    }
    Ok(CostReport {
        lambda: lambda.clone(),
        gamma,
        n_orbitals,
        qroam,
        iterations,
        toffolis_per_iteration: per_iter,
        toffoli_total: iterations * per_iter,
        logical_qubits,
        breakdown: bd,
        config: *config,
    })
}

pub fn qpe_cost(fh: &FactorizedHamiltonian, config: &CostConfig) -> Result<CostReport> {
    config.validate()?;
    let lambda = lambda_total(fh)?;
    let g = gamma(fh, config);
    cost_model(&lambda, g, fh.n_orbitals, config)
}

/// Least-squares slope and intercept of `ln y` against `ln x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension("x and y lengths differ".into()));
    }
    if xs.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "a scaling fit needs at least 4 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all sizes are equal".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qroam_worked_example() {
        // L N_b = 1024, N_b ℶ = 160, k = 4.
        let c = qroam_cost(128, 8, 20, 4).unwrap();
        assert_eq!(c.toffolis, 736);
        assert_eq!(c.qubits, 648);
        let c1 = qroam_cost(128, 8, 20, 1).unwrap();
        assert_eq!(c1.toffolis, 1024);
        assert_eq!(c1.qubits, 160 + 10);
        assert!(qroam_cost(128, 8, 20, 3).is_err());
        assert!(qroam_cost(128, 8, 20, 0).is_err());
    }

    #[test]
    fn iterations_boundary() {
        assert_eq!(qpe_iterations(1.0, PI / 2.0).unwrap(), 1);
        assert!(qpe_iterations(1.0, 0.0).is_err());
        assert!(qpe_iterations(1.0, -1.0).is_err());
    }

    #[test]
    fn ceil_log2() {
        assert_eq!(ceil_log2_ratio(1024, 4), 8);
        assert_eq!(ceil_log2_ratio(1025, 4), 9);
        assert_eq!(ceil_log2_ratio(3, 4), 0);
        assert_eq!(ceil_log2_ratio(1, 1), 0);
    }

    #[test]
    fn fit_needs_four_points() {
        assert!(loglog_fit(&[1.0, 2.0, 3.0], &[1.0, 4.0, 9.0]).is_err());
        let xs = [10.0, 20.0, 30.0, 40.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let (s, _) = loglog_fit(&xs, &ys).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }
}
