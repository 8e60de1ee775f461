use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use pwpaw::upaw::*;

const C2: f64 = 0.353_553_390_593_273_8; // 1 / (2√2)

fn r1(r: f64) -> f64 {
    2.0 * (-r).exp()
}

fn r2(r: f64) -> f64 {
    C2 * (2.0 - r) * (-r / 2.0).exp()
}

fn r1_d(r: f64, k: usize) -> f64 {
    2.0 * (-1f64).powi(k as i32) * (-r).exp()
}

fn r2_d(r: f64, k: usize) -> f64 {
    let e = (-r / 2.0).exp();
    match k {
        0 => r2(r),
        1 => C2 * e * (r / 2.0 - 2.0),
        2 => C2 * e * (1.5 - r / 4.0),
        _ => unreachable!(),
    }
}

fn fitted(penalty: Option<FourierPenalty>) -> (Vec<RadialFunction>, PseudoRadialSetup) {
    let ch = hydrogenic_pair(20.0, 0.01);
    let mut opts = FitOptions::new(1.2, 3, 2);
    opts.penalty = penalty;
    let s = fit_pseudo_radial(&ch, &opts).unwrap();
    (ch, s)
}

#[test]
fn hydrogenic_residuals_against_analytic_oracle() {
    let (_, s) = fitted(None);
    let ra = 1.2;
    // Boundary derivatives against closed forms.
    for k in 0..3 {
        let d0 = (s.channels[0].polynomial_derivative(ra, k) - r1_d(ra, k)).abs();
        let d1 = (s.channels[1].polynomial_derivative(ra, k) - r2_d(ra, k)).abs();
        assert!(d0 <= 1e-8 && d1 <= 1e-8, "derivative {k}: {d0:e} {d1:e}");
    }
    // Overlaps by high-order Gauss-Legendre on the analytic functions.
    let gl = GaussLegendre::new(NonZeroUsize::new(120).unwrap());
    let ae = [r1, r2];
    for i in 0..2 {
        for j in 0..2 {
            let (a, b) = (&s.channels[i], &s.channels[j]);
            let o = gl.integrate(0.0, ra, |r| r * r * (a.polynomial(r) * b.polynomial(r) - ae[i](r) * ae[j](r)));
            assert!(o.abs() <= 1e-8, "O[{i}{j}] = {o:e}");
        }
    }
}

#[test]
fn outside_region_is_identical() {
    let (ch, s) = fitted(None);
    for (c, f) in s.channels.iter().zip(&ch) {
        for (r, v) in f.grid.iter().zip(&f.values).filter(|(r, _)| **r >= 1.2) {
            assert_eq!(c.evaluate(*r), *v);
        }
    }
}

#[test]
fn polynomial_is_even_and_sized() {
    let (_, s) = fitted(None);
    for c in &s.channels {
        assert_eq!(c.coefficients.len(), 5);
        for r in [0.1, 0.5, 1.0] {
            assert_eq!(c.polynomial(r), c.polynomial(-r));
        }
    }
}

#[test]
fn even_polynomial_input_is_reproduced() {
    let h = 0.01;
    let grid: Vec<f64> = (0..=800).map(|i| i as f64 * h).collect();
    let poly = |r: f64| {
        let x = r * r;
        0.02 * x.powi(4) - 0.1 * x.powi(3) + 0.3 * x * x - 0.8 * x + 1.0
    };
    let ch = vec![RadialFunction::new(0, grid.clone(), grid.iter().map(|&r| poly(r)).collect()).unwrap()];
    let s = fit_pseudo_radial(&ch, &FitOptions::new(1.5, 3, 2)).unwrap();
    for r in [0.0, 0.3, 0.9, 1.4] {
        assert!((s.channels[0].polynomial(r) - poly(r)).abs() < 1e-9, "r = {r}");
    }
    assert!(s.residuals.iter().all(|r| r.value < 1e-9));
}

#[test]
fn single_channel_conserves_norm() {
    let ch = vec![hydrogenic_pair(20.0, 0.01).remove(1)];
    let s = fit_pseudo_radial(&ch, &FitOptions::new(1.2, 3, 2)).unwrap();
    let gl = GaussLegendre::new(NonZeroUsize::new(120).unwrap());
    let p = &s.channels[0];
    let lhs = gl.integrate(0.0, 1.2, |r| r * r * p.polynomial(r).powi(2));
    let rhs = gl.integrate(0.0, 1.2, |r| r * r * r2(r).powi(2));
    assert!((lhs - rhs).abs() < 1e-8);
}

#[test]
fn corrupted_coefficient_fails_verification() {
    let (ch, mut s) = fitted(None);
    assert!(verify_setup(&s, &ch).pass);
    s.channels[0].coefficients[0] += 1e-3;
    let v = verify_setup(&s, &ch);
    assert!(!v.pass);
    assert!(v.checks.iter().any(|c| c.name.starts_with("overlap") && !c.pass));
}

#[test]
fn fourier_penalty_lowers_the_tail() {
    let pen = FourierPenalty::new(4.0);
    let (_, plain) = fitted(None);
    let (ch, smooth) = fitted(Some(pen));
    let before = fourier_tail(&plain, &pen).unwrap();
    let after = fourier_tail(&smooth, &pen).unwrap();
    assert!(after < before, "tail {before:e} -> {after:e}");
    assert!(verify_setup(&smooth, &ch).pass);
}

#[test]
fn bad_inputs_rejected() {
    let ch = hydrogenic_pair(5.0, 0.01);
    assert!(fit_pseudo_radial(&ch, &FitOptions::new(6.0, 3, 2)).is_err());
    assert!(fit_pseudo_radial(&ch, &FitOptions::new(1.2, 0, 2)).is_err());
    // Two channels need three overlap constraints: M = 1 cannot carry them.
    assert!(fit_pseudo_radial(&ch, &FitOptions::new(1.2, 3, 1)).is_err());
}

#[test]
fn setup_json_round_trip() {
    let (_, s) = fitted(None);
    let text = serde_json::to_string(&s).unwrap();
    assert!(text.contains("\"P\":3") && text.contains("\"M\":2"));
    let back: PseudoRadialSetup = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
}
