mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use pwpaw::besim::*;
use pwpaw::factorize::{effective_one_body, factorize, FactorizedHamiltonian};
use pwpaw::linalg::{max_abs, max_abs_diff, hermitian_deviation, unitarity_deviation, CMat, ZERO};
use pwpaw::toyscf::{kappa_oracle, Kappa, PawSynth};
use rand::Rng;

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn dimension_and_lexicographic_order() {
    for n in 1..=4 {
        for e in 0..=2 * n {
            let f = FockSpace::new(n, e).unwrap();
            assert_eq!(f.dim() as u64, binomial(2 * n as u64, e as u64));
            assert!(f.states().windows(2).all(|w| w[0] < w[1]));
        }
    }
    assert!(FockSpace::new(MAX_FOCK_ORBITALS + 1, 2).is_err());
    assert!(FockSpace::new(3, 7).is_err());
}

#[test]
fn excitations_match_string_oracle() {
    for (n, e) in [(2, 2), (3, 3), (3, 4), (4, 3)] {
        let f = FockSpace::new(n, e).unwrap();
        for p in 0..n {
            for q in 0..n {
                let got = f.excitation_operator(p, q).unwrap();
                let want = excitation_by_strings(f.states(), n, p, q);
                assert_eq!(max_abs_diff(&got, &want), 0.0, "E_{p}{q} in ({n}, {e})");
                let back = f.excitation_operator(q, p).unwrap();
                assert_eq!(max_abs_diff(&got.adjoint(), &back), 0.0);
            }
        }
        assert!(f.excitation_operator(n, 0).is_err());
    }
}

#[test]
fn number_operator_counts_occupations() {
    let f = FockSpace::new(3, 3).unwrap();
    for p in 0..3 {
        let e = f.excitation_operator(p, p).unwrap();
        for i in 0..f.dim() {
            assert_eq!(e[(i, i)].re, f.occupation(i, p) as f64);
        }
    }
}

#[test]
fn unitary_group_commutators() {
    let f = FockSpace::new(3, 3).unwrap();
    let e: Vec<Vec<CMat>> = (0..3).map(|p| (0..3).map(|q| f.excitation_operator(p, q).unwrap()).collect()).collect();
    let d = f.dim();
    let zero = CMat::from_element(d, d, ZERO);
    for p in 0..3 {
        for q in 0..3 {
            for r in 0..3 {
                for s in 0..3 {
                    let lhs = &e[p][q] * &e[r][s] - &e[r][s] * &e[p][q];
                    let mut rhs = zero.clone();
                    if q == r {
                        rhs += &e[p][s];
                    }
                    if p == s {
                        rhs -= &e[r][q];
                    }
                    assert_eq!(max_abs_diff(&lhs, &rhs), 0.0);
                }
            }
        }
    }
}

#[test]
fn diagonal_one_body_spectrum() {
    let h = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.3, 0.0),
        Complex64::new(0.9, 0.0),
    ]));
    let ob = effective_one_body(&h, &Kappa::zeros(3)).unwrap();
    let f = FockSpace::new(3, 2).unwrap();
    let m = fock_hamiltonian_direct(&ob, &Kappa::zeros(3), 0.25, &f).unwrap();
    let mut want: Vec<f64> = (0..f.dim())
        .map(|i| 0.25 + (0..3).map(|p| f.occupation(i, p) as f64 * h[(p, p)].re).sum::<f64>())
        .collect();
    want.sort_by(f64::total_cmp);
    let got = spectrum(&m).unwrap();
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-13);
    }
}

/// Real 8-fold symmetric two-orbital integrals with only J and K nonzero.
fn two_orbital_kappa(j00: f64, j11: f64, j01: f64, k01: f64) -> Kappa {
    let mut k = Kappa::zeros(2);
    let set = |k: &mut Kappa, p, q, r, s, v: f64| {
        for (a, b, c, d) in [(p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r), (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p)] {
            k.set(a, b, c, d, Complex64::new(v, 0.0));
        }
    };
    set(&mut k, 0, 0, 0, 0, j00);
    set(&mut k, 1, 1, 1, 1, j11);
    set(&mut k, 0, 0, 1, 1, j01);
    set(&mut k, 0, 1, 0, 1, k01);
    k
}

#[test]
fn two_electron_two_orbital_ci() {
    let (h0, h1) = (-1.2, -0.4);
    let (j00, j11, j01, k01) = (0.65, 0.7, 0.6, 0.18);
    let k = two_orbital_kappa(j00, j11, j01, k01);
    let h = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::new(h0, 0.0), Complex64::new(h1, 0.0)]));
    let ob = effective_one_body(&h, &k).unwrap();
    let f = FockSpace::new(2, 2).unwrap();
    let m = fock_hamiltonian_direct(&ob, &k, 0.0, &f).unwrap();
    let got = spectrum(&m).unwrap();
    // Closed-shell block [[2h₀ + J₀₀, K], [K, 2h₁ + J₁₁]], open-shell singlet
    // h₀ + h₁ + J₀₁ + K and the triplet h₀ + h₁ + J₀₁ − K (three times).
    let a = 2.0 * h0 + j00;
    let d = 2.0 * h1 + j11;
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + k01 * k01).sqrt();
    let mut want = vec![mid - rad, mid + rad, h0 + h1 + j01 + k01];
    want.extend([h0 + h1 + j01 - k01; 3]);
    want.sort_by(f64::total_cmp);
    for (x, y) in got.iter().zip(&want) {
        assert!((x - y).abs() < 1e-12, "{got:?} vs {want:?}");
    }
}

fn small_instance(seed: u64, nb: usize, paw: Vec<PawSynth>) -> pwpaw::instance::HamiltonianInstance {
    let mut sys = random_system(seed, nb);
    sys.n_bands = nb;
    sys.n_occ = nb / 2;
    sys.paw = paw;
    sys.build().unwrap()
}

#[test]
fn direct_is_hermitian_and_spin_conserving() {
    let inst = small_instance(70, 3, vec![PawSynth { n_a: 2, seed: 1, magnitude: 0.3 }]);
    let fh = factorize(&inst).unwrap();
    let k = kappa_oracle(&inst).unwrap();
    let f = FockSpace::new(3, 3).unwrap();
    let h = fock_hamiltonian_direct(&fh.one_body, &k, fh.constant, &f).unwrap();
    assert!(hermitian_deviation(&h) <= 1e-12);
    let sz = f.sz_operator();
    assert!(max_abs(&(&h * &sz - &sz * &h)) <= 1e-12);
}

#[test]
fn factored_equals_direct_soft_only_and_indefinite_paw() {
    let soft = small_instance(71, 3, Vec::new());
    let mut paw = None;
    for s in 0..50 {
        let inst = small_instance(72, 3, vec![PawSynth { n_a: 2, seed: s, magnitude: 0.4 }]);
        if factorize(&inst).unwrap().paw.iter().any(|p| p.sign < 0) {
            paw = Some(inst);
            break;
        }
    }
    for inst in [soft, paw.expect("an indefinite block within 50 seeds")] {
        let fh = factorize(&inst).unwrap();
        let f = FockSpace::new(3, 3).unwrap();
        let direct = fock_hamiltonian_direct(&fh.one_body, &kappa_oracle(&inst).unwrap(), fh.constant, &f).unwrap();
        let factored = fock_hamiltonian_factored(&fh, &f).unwrap();
        let rotated = fock_hamiltonian_rotated(&fh, &f).unwrap();
        assert!(max_abs_diff(&direct, &factored) <= 1e-9);
        assert!(max_abs_diff(&direct, &rotated) <= 1e-9);
    }
}

#[test]
fn zero_factors_give_one_body_only() {
    let inst = small_instance(73, 3, Vec::new());
    let mut fh: FactorizedHamiltonian = factorize(&inst).unwrap();
    for s in &mut fh.soft {
        s.f.iter_mut().for_each(|x| *x = 0.0);
    }
    let f = FockSpace::new(3, 2).unwrap();
    let got = fock_hamiltonian_factored(&fh, &f).unwrap();
    let want = fock_hamiltonian_direct(&fh.one_body, &Kappa::zeros(3), fh.constant, &f).unwrap();
    assert!(max_abs_diff(&got, &want) <= 1e-14);
}

#[test]
fn rotation_operator_is_unitary_and_maps_excitations() {
    let mut r = rng(5);
    let u = random_unitary(&mut r, 3);
    let f = FockSpace::new(3, 3).unwrap();
    let big = f.rotation_operator(&u).unwrap();
    assert!(unitarity_deviation(&big) <= 1e-12);
    // Û E_pq Û† = Σ_rs u_rp u*_sq E_rs
    let e: Vec<Vec<CMat>> = (0..3).map(|p| (0..3).map(|q| f.excitation_operator(p, q).unwrap()).collect()).collect();
    let lhs = &big * &e[0][1] * big.adjoint();
    let mut rhs = CMat::from_element(f.dim(), f.dim(), ZERO);
    for a in 0..3 {
        for b in 0..3 {
            rhs += &e[a][b] * (u[(a, 0)] * u[(b, 1)].conj());
        }
    }
    assert!(max_abs_diff(&lhs, &rhs) <= 1e-12);
}

#[test]
fn ground_energy_invariant_under_orbital_rotation() {
    let inst = small_instance(74, 4, vec![PawSynth { n_a: 2, seed: 9, magnitude: 0.3 }]);
    let mut r = rng(6);
    let u = random_unitary(&mut r, 4);
    let rot = inst.rotated(&u).unwrap();
    let f = FockSpace::new(4, 4).unwrap();
    let ground = |i: &pwpaw::instance::HamiltonianInstance| {
        let k = kappa_oracle(i).unwrap();
        let ob = effective_one_body(&i.h, &k).unwrap();
        let h = fock_hamiltonian_direct(&ob, &k, i.constant, &f).unwrap();
        fock_spectrum(&h, &f).unwrap()[0]
    };
    assert!((ground(&inst) - ground(&rot)).abs() <= 1e-8);
}

#[test]
fn block_encoding_rejects_small_alpha_and_non_hermitian() {
    let mut r = rng(8);
    let a = random_hermitian(&mut r, 3);
    let norm = spectral_norm(&a).unwrap();
    assert!(hermitian_block_encoding(&a, 0.5 * norm).is_err());
    let mut b = a.clone();
    b[(0, 1)] += Complex64::new(0.1, 0.0);
    assert!(hermitian_block_encoding(&b, 10.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn chebyshev_square_identities(seed in 0u64..1_000_000, m in 1usize..=8, slack in 1.0f64..3.0) {
        let mut r = rng(seed);
        let a = random_hermitian(&mut r, m);
        let alpha = spectral_norm(&a).unwrap().max(1e-3) * slack;
        let be = hermitian_block_encoding(&a, alpha).unwrap();
        prop_assert!(unitarity_deviation(&be.matrix) <= 1e-12);
        let top = be.matrix.view((0, 0), (m, m)).into_owned();
        prop_assert!(max_abs_diff(&top, &a.unscale(alpha)) <= 1e-12);
        let x = a.unscale(alpha);
        let target = (&x * &x).scale(2.0) - CMat::identity(m, m);
        let sq = reflect_product(&be, false).view((0, 0), (m, m)).into_owned();
        prop_assert!(max_abs_diff(&sq, &target) <= 1e-12);
        let flipped = reflect_product(&be, true).view((0, 0), (m, m)).into_owned();
        prop_assert!(max_abs_diff(&flipped, &(-target)) <= 1e-12);
        prop_assert!(chebyshev_square(&be).is_ok());
    }

    #[test]
    fn random_spaces_obey_commutators(n in 1usize..=3, seed in 0u64..1000) {
        let mut r = rng(seed);
        let e = r.random_range(0..=2 * n);
        let f = FockSpace::new(n, e).unwrap();
        let (p, q, s) = (r.random_range(0..n), r.random_range(0..n), r.random_range(0..n));
        // [E_pq, E_qs] = E_ps − δ_ps E_qq
        let epq = f.excitation_operator(p, q).unwrap();
        let eqs = f.excitation_operator(q, s).unwrap();
        let mut rhs = f.excitation_operator(p, s).unwrap();
        if p == s {
            rhs -= f.excitation_operator(q, q).unwrap();
        }
        prop_assert_eq!(max_abs_diff(&(&epq * &eqs - &eqs * &epq), &rhs), 0.0);
    }
}
