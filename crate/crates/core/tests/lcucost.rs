mod common;

use common::*;
use proptest::prelude::*;
use pwpaw::besim::{fock_hamiltonian_direct, fock_spectrum, FockSpace};
use pwpaw::factorize::{factorize, truncate, SpectralTerm};
use pwpaw::lcucost::*;
use pwpaw::toyscf::{kappa_oracle, preset};
use rand::Rng;

/// `⌈log₂ x⌉` for a positive rational by repeated doubling.
fn ceil_log2(num: u128, den: u128) -> u128 {
    let mut m = 0;
    let mut p = den;
    while p < num {
        p *= 2;
        m += 1;
    }
    m
}

fn qroam_table() -> Vec<(u64, u64, u64, u64)> {
    let mut r = rng(2024);
    (0..50)
        .map(|_| {
            (
                r.random_range(1..100_000u64),
                r.random_range(1..200u64),
                r.random_range(1..40u64),
                1u64 << r.random_range(0..12u32),
            )
        })
        .collect()
}

#[test]
fn qroam_matches_display_on_table() {
    for (l, nb, beth, k) in qroam_table() {
        let c = qroam_cost(l, nb, beth, k).unwrap();
        let items = u128::from(l * nb);
        let width = u128::from(nb * beth);
        let k = u128::from(k);
        let tof = items.div_ceil(k) + width * (k - 1);
        let qubits = width * k + ceil_log2(items, k);
        assert_eq!((c.toffolis, c.qubits), (tof, qubits), "L={l} N_b={nb} ℶ={beth} k={k}");
    }
}

#[test]
fn qroam_worked_values() {
    let c = qroam_cost(128, 8, 20, 4).unwrap();
    assert_eq!((c.toffolis, c.qubits), (736, 648));
    let c = qroam_cost(128, 8, 20, 1).unwrap();
    assert_eq!((c.toffolis, c.qubits), (1024, 160 + 10));
    assert!(qroam_cost(128, 8, 20, 3).is_err());
    assert!(qroam_cost(128, 8, 20, 0).is_err());
}

#[test]
fn optimizer_is_local_minimum() {
    for (l, nb, beth, _) in qroam_table() {
        let best = optimal_qroam(l, nb, beth).unwrap();
        let k = best.kr;
        if k > 1 {
            assert!(best.toffolis <= qroam_cost(l, nb, beth, k / 2).unwrap().toffolis);
        }
        assert!(best.toffolis <= qroam_cost(l, nb, beth, 2 * k).unwrap().toffolis);
    }
}

/// Restricted to powers of two, the best k lies within a factor √2 of
/// √(X/Y), so the optimum is at most (√2 + 1/√2)√(XY) − Y + 1. The tighter
/// 2√(XY) + Y + 1 holds only when a power of two lands close enough.
#[test]
fn optimizer_within_power_of_two_bound() {
    let mut tight_misses = 0;
    for (l, nb, beth, _) in qroam_table() {
        let best = optimal_qroam(l, nb, beth).unwrap();
        let x = (l * nb) as f64;
        let y = (nb * beth) as f64;
        let cost = best.toffolis as f64;
        assert!(cost <= 1.5 * 2f64.sqrt() * (x * y).sqrt() + 1.0, "L={l} N_b={nb} ℶ={beth}");
        if cost > 2.0 * (x * y).sqrt() + y + 1.0 {
            tight_misses += 1;
        }
    }
    println!("{tight_misses} of 50 tuples exceed 2√(XY) + Y + 1");
}

#[test]
fn one_orbital_soft_lambda() {
    let v = 0.37;
    let t = SpectralTerm { weight: v, f: vec![1.0] };
    let r = lambda_from_parts(&[0.0], &[(0, t)], &[], 1);
    assert!((r.lambda_two_body - 0.5 * v).abs() < 1e-16);
    assert!((r.lambda_two_body_per_factor - 0.5 * v).abs() < 1e-16);
    assert!((r.xi_sum[0] - 4.0 * v).abs() < 1e-16);
}

#[test]
fn zero_factors_leave_one_body_lambda() {
    let eps = [-1.5, 0.25, 2.0];
    let t = SpectralTerm { weight: 1.0, f: vec![0.0; 3] };
    let r = lambda_from_parts(&eps, &[(1, t)], &[(0.7, vec![0.0; 3])], 3);
    assert_eq!(r.lambda_total, 3.75);
    assert_eq!(r.lambda_two_body, 0.0);
}

#[test]
fn lambda_bounds_spectral_half_width() {
    for seed in [60, 61, 62] {
        let mut sys = random_system(seed, 4);
        sys.n_bands = 4;
        sys.n_occ = 2;
        let inst = sys.build().unwrap();
        let fh = factorize(&inst).unwrap();
        let lam = lambda_total(&fh).unwrap();
        let fock = FockSpace::new(4, 4).unwrap();
        let k = kappa_oracle(&inst).unwrap();
        let h = fock_hamiltonian_direct(&fh.one_body, &k, fh.constant, &fock).unwrap();
        let ev = fock_spectrum(&h, &fock).unwrap();
        let half = 0.5 * (ev[ev.len() - 1] - ev[0]);
        assert!(lam.lambda_total >= half, "λ = {} < {half}", lam.lambda_total);
        assert!((lam.lambda_total - lam.lambda_one_body - lam.lambda_two_body).abs() <= 1e-12 * lam.lambda_total);
    }
}

#[test]
fn gamma_arithmetic() {
    assert_eq!(l_count(8, &[2]), 11);
    let inst = preset("small").unwrap().build().unwrap();
    let fh = factorize(&inst).unwrap();
    let g = gamma(&fh, &CostConfig::default());
    assert_eq!(g.l, fh.n_pw_pair as u64);
    assert_eq!(g.gamma_nominal, u128::from(g.l) * 16 * 20);
    assert_eq!(g.gamma_nonzero, u128::from(g.surviving_parameters) * 4 * 20);
    // L = 11, N_b = 10, ℶ = 20
    assert_eq!(11u128 * 10 * 10 * 20, 22_000);
}

#[test]
fn iteration_boundary_and_linearity() {
    assert_eq!(qpe_iterations(1.0, std::f64::consts::FRAC_PI_2).unwrap(), 1);
    assert!(qpe_iterations(1.0, 0.0).is_err());
    let a = qpe_iterations(3.3, 1e-3).unwrap();
    let b = qpe_iterations(6.6, 1e-3).unwrap();
    assert!(b == 2 * a || b + 1 == 2 * a);
}

#[test]
fn report_totals_are_consistent() {
    let inst = preset("paw").unwrap().build().unwrap();
    let fh = truncate(&factorize(&inst).unwrap(), 1e-4).unwrap();
    let r = qpe_cost(&fh, &CostConfig::default()).unwrap();
    assert_eq!(r.toffoli_total, r.iterations * r.toffolis_per_iteration);
    let per_iter: u128 = ["qroam_load_unload", "rotations", "state_preparation", "sign_bit"]
        .iter()
        .map(|k| r.breakdown[*k])
        .sum();
    assert_eq!(per_iter, r.toffolis_per_iteration);
    let qubits: u128 = r.breakdown.iter().filter(|(k, _)| k.starts_with("qubits_")).map(|(_, v)| v).sum();
    assert_eq!(qubits, r.logical_qubits);
    assert!(r.breakdown["qubits_system"] == 2 * r.n_orbitals as u128);
    let bad = CostConfig { eps_qpe: -1.0, ..CostConfig::default() };
    assert!(qpe_cost(&fh, &bad).is_err());
}

#[test]
fn two_size_self_consistency() {
    let base = preset("small").unwrap();
    let cost = |reps: [u32; 3]| {
        let inst = base.supercell(reps).unwrap().build().unwrap();
        let fh = factorize(&inst).unwrap();
        qpe_cost(&fh, &CostConfig::default()).unwrap()
    };
    let a = cost([1, 1, 1]);
    let b = cost([2, 1, 1]);
    let model = 2f64.powf(1.5) * b.lambda.lambda_total / a.lambda.lambda_total;
    let ratio = b.toffoli_total as f64 / a.toffoli_total as f64;
    assert!((ratio / model - 1.0).abs() <= 0.25, "ratio {ratio} model {model}");
}

#[test]
fn fitter_recovers_exact_power() {
    let xs = [10.0, 20.0, 30.0, 40.0, 50.0];
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
    let (s, _) = loglog_fit(&xs, &ys).unwrap();
    assert!((s - 2.0).abs() < 0.01);
    assert!(loglog_fit(&xs[..3], &ys[..3]).is_err());
}

fn synthetic_lambda(scale: f64) -> LambdaReport {
    let t = SpectralTerm { weight: scale, f: vec![0.5, -0.25, 0.125] };
    lambda_from_parts(&[scale, -scale], &[(0, t)], &[], 3)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn toffolis_monotone(e1 in 1e-5f64..1e-1, e2 in 1e-5f64..1e-1, s1 in 0.1f64..100.0, s2 in 0.1f64..100.0, l in 1u64..5000) {
        let g = GammaReport { l, gamma_nominal: 0, gamma_nonzero: 0, surviving_parameters: 0 };
        let run = |eps: f64, s: f64| {
            let cfg = CostConfig { eps_qpe: eps, ..CostConfig::default() };
            cost_model(&synthetic_lambda(s), g, 3, &cfg).unwrap().toffoli_total
        };
        let (elo, ehi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(run(elo, 1.0) >= run(ehi, 1.0));
        let (slo, shi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(run(1e-3, slo) <= run(1e-3, shi));
    }

    #[test]
    fn lambda_dual_paths_agree(seed in 0u64..100_000) {
        let inst = random_instance(seed, 6);
        let fh = factorize(&inst).unwrap();
        let r = lambda_total(&fh).unwrap();
        prop_assert!((r.lambda_two_body - r.lambda_two_body_per_factor).abs() <= 1e-10 * r.lambda_two_body);
        prop_assert!((r.lambda_total - r.lambda_one_body - r.lambda_two_body).abs() <= 1e-12 * r.lambda_total);
    }
}
