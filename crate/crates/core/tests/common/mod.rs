#![allow(dead_code)]

use num_complex::Complex64;
use pwpaw::instance::HamiltonianInstance;
use pwpaw::linalg::{CMat, RMat, ZERO};
use pwpaw::pwbasis::Regularization;
use pwpaw::toyscf::{GaussianWell, Kappa, PawSynth, PotentialSpec, ToySystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&a + a.adjoint()).scale(0.5)
}

pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    a.qr().q()
}

/// Random well system in a small orthorhombic cell: N_b in 2..=max_nb,
/// up to two PAW blocks with n_a ≤ 4.
pub fn random_system(seed: u64, max_nb: usize) -> ToySystem {
    let mut r = rng(seed);
    let a = r.random_range(4.5..6.0);
    let b = r.random_range(4.5..6.0);
    let c = r.random_range(4.5..6.0);
    let wells = (0..r.random_range(1..=3))
        .map(|_| GaussianWell {
            center: [r.random_range(0.0..a), r.random_range(0.0..b), r.random_range(0.0..c)],
            depth: r.random_range(0.5..1.5),
            width: r.random_range(0.7..1.3),
        })
        .collect();
    let n_bands = r.random_range(2..=max_nb);
    let n_occ = r.random_range(1..n_bands);
    let paw = (0..r.random_range(0..=2))
        .map(|_| PawSynth {
            n_a: r.random_range(1..=4),
            seed: r.random(),
            magnitude: r.random_range(0.05..0.4),
        })
        .collect();
    ToySystem {
        lattice_bohr: [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]],
        cutoff_ev: r.random_range(30.0..50.0),
        potential: PotentialSpec { wells, offset: 0.0 },
        n_bands,
        n_occ,
        paw,
        kernel: Regularization::SphericalTruncation,
        constant_ha: r.random_range(-1.0..1.0),
    }
}

pub fn random_instance(seed: u64, max_nb: usize) -> HamiltonianInstance {
    random_system(seed, max_nb).build().expect("random toy system builds")
}

/// κ summed over the full pair grid from C_pq(G) = Σ_g c*_{g,p} c_{g+G,q},
/// plus the PAW part from projector overlaps, with no half-space folding.
pub fn full_grid_kappa(inst: &HamiltonianInstance) -> Kappa {
    let orb = inst.orbitals.as_ref().expect("instance has orbitals");
    let c = orb.coefficients();
    let n = c.ncols();
    let basis = &inst.basis;
    let grid = inst.pair_density.grid();
    let mut k = Kappa::zeros(n);
    for gi in 0..grid.len() {
        let m = grid.millers()[gi];
        let mut cg = CMat::from_element(n, n, ZERO);
        for (g, mg) in basis.millers().iter().enumerate() {
            let Some(h) = basis.index_of([mg[0] + m[0], mg[1] + m[1], mg[2] + m[2]]) else {
                continue;
            };
            for p in 0..n {
                for q in 0..n {
                    cg[(p, q)] += c[(g, p)].conj() * c[(h, q)];
                }
            }
        }
        let v = inst.kernel.v(gi);
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let z = k.get(p, q, r, s) + cg[(p, q)].conj() * cg[(r, s)] * v;
                        k.set(p, q, r, s, z);
                    }
                }
            }
        }
    }
    for b in &inst.paw_blocks {
        let pm = b.proj_overlaps();
        let na = b.n_a();
        let d = |p: usize, q: usize, i: usize, j: usize| pm[(p, i)] * pm[(q, j)].conj();
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let mut acc = ZERO;
                        for i1 in 0..na {
                            for i2 in 0..na {
                                for i3 in 0..na {
                                    for i4 in 0..na {
                                        acc += d(p, q, i1, i2).conj() * d(r, s, i3, i4) * b.c(i1, i2, i3, i4);
                                    }
                                }
                            }
                        }
                        k.set(p, q, r, s, k.get(p, q, r, s) + acc);
                    }
                }
            }
        }
    }
    k
}

/// Cyclic Jacobi eigenvalues of a real symmetric matrix, ascending.
pub fn jacobi_eigenvalues(a: &RMat) -> Vec<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = cs * akp - sn * akq;
                    a[(k, q)] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = cs * apk - sn * aqk;
                    a[(q, k)] = sn * apk + cs * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of a Hermitian matrix through its real 2n×2n embedding;
/// every eigenvalue appears twice there, so every other one is kept.
pub fn jacobi_hermitian(h: &CMat) -> Vec<f64> {
    let n = h.nrows();
    let big = RMat::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    jacobi_eigenvalues(&big).into_iter().step_by(2).collect()
}

/// Spin orbital `(p, σ)` to bit index: α at p, β at N_b + p.
pub fn spin_orbital(n_b: usize, p: usize, beta: bool) -> usize {
    if beta {
        n_b + p
    } else {
        p
    }
}

/// `a_k |s⟩` with the Jordan-Wigner sign `(−1)^{#occupied below k}`.
pub fn annihilate(state: u64, k: usize) -> Option<(u64, f64)> {
    if state >> k & 1 == 0 {
        return None;
    }
    let below = (state & ((1u64 << k) - 1)).count_ones();
    Some((state ^ (1 << k), if below.is_multiple_of(2) { 1.0 } else { -1.0 }))
}

pub fn create(state: u64, k: usize) -> Option<(u64, f64)> {
    if state >> k & 1 == 1 {
        return None;
    }
    let below = (state & ((1u64 << k) - 1)).count_ones();
    Some((state | (1 << k), if below.is_multiple_of(2) { 1.0 } else { -1.0 }))
}

/// Applies a string of operators right to left: `(create?, spin orbital)`.
pub fn apply_string(state: u64, ops: &[(bool, usize)]) -> Option<(u64, f64)> {
    let mut s = state;
    let mut sign = 1.0;
    for &(cr, k) in ops.iter().rev() {
        let (t, x) = if cr { create(s, k)? } else { annihilate(s, k)? };
        s = t;
        sign *= x;
    }
    Some((s, sign))
}

/// Dense `E_pq = Σ_σ a†_pσ a_qσ` on an ordered list of states.
pub fn excitation_by_strings(states: &[u64], n_b: usize, p: usize, q: usize) -> CMat {
    let d = states.len();
    let mut m = CMat::from_element(d, d, ZERO);
    for (j, &s) in states.iter().enumerate() {
        for beta in [false, true] {
            let ops = [(true, spin_orbital(n_b, p, beta)), (false, spin_orbital(n_b, q, beta))];
            if let Some((t, sign)) = apply_string(s, &ops) {
                let i = states.iter().position(|&x| x == t).expect("state in space");
                m[(i, j)] += Complex64::new(sign, 0.0);
            }
        }
    }
    m
}

/// Second-order Rayleigh-Schrödinger energy over double excitations with
/// H₀ = Σ ε_p n̂_p and the two-body operator assembled from string-built E_pq.
pub fn fock_mp2_oracle(eps: &[f64], k: &Kappa, n_occ: usize) -> f64 {
    let n = eps.len();
    let fock = pwpaw::besim::FockSpace::new(n, 2 * n_occ).unwrap();
    let states = fock.states();
    let e: Vec<Vec<CMat>> = (0..n)
        .map(|p| (0..n).map(|q| excitation_by_strings(states, n, p, q)).collect())
        .collect();
    let d = states.len();
    let mut v = CMat::from_element(d, d, ZERO);
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let x = k.get(p, q, r, s);
                    if x != ZERO {
                        v += (&e[q][p] * &e[r][s]) * (x * 0.5);
                    }
                }
            }
        }
    }
    let occ_mask: u64 = (0..n_occ).fold(0, |m, p| m | 1 << p | 1 << (n + p));
    let reference = states.iter().position(|&s| s == occ_mask).unwrap();
    let h0 = |s: u64| (0..2 * n).filter(|&b| s >> b & 1 == 1).map(|b| eps[b % n]).sum::<f64>();
    let e0 = h0(occ_mask);
    let mut total = 0.0;
    for (i, &s) in states.iter().enumerate() {
        if (s & occ_mask).count_ones() as usize != 2 * n_occ - 2 {
            continue;
        }
        total += v[(i, reference)].norm_sqr() / (e0 - h0(s));
    }
    total
}
