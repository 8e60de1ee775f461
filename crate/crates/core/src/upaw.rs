//! Unitary-PAW pseudo partial waves: even polynomials inside the
//! augmentation sphere that match the all-electron radial functions at the
//! boundary and keep their overlaps, so the PAW overlap correction vanishes.
//!
//! Inside `r_a` the polynomial is fitted in the scaled variable `s = r/r_a`
//! and converted to powers of `r²` on output.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on every constraint residual.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

const INTERP_POINTS: usize = 8;
const GL_PER_INTERVAL: usize = 6;
const MAX_NEWTON: usize = 200;
const MAX_PENALTY_STEPS: usize = 400;

/// Radial part `R(r)` of a partial wave `φ = r^l R(r) Y_lm` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialFunction {
    pub l: u32,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(l: u32, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let f = RadialFunction { l, grid, values };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.len() != self.values.len() {
            return Err(Error::Dimension(format!(
                "grid has {} points, values {}",
                self.grid.len(),
                self.values.len()
            )));
        }
        if self.grid.len() < 2 * INTERP_POINTS {
            return Err(Error::InvalidInput(format!(
                "radial grid needs at least {} points",
                2 * INTERP_POINTS
            )));
        }
        if self.grid[0] < 0.0 || self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("radial grid must be nonnegative and strictly increasing".into()));
        }
        if self.values.iter().chain(&self.grid).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("radial function has non-finite entries".into()));
        }
        Ok(())
    }

    /// Local Lagrange interpolation through the nearest grid points.
    pub fn interpolate(&self, r: f64) -> f64 {
        interpolate(&self.grid, &self.values, r)
    }
}

/// Finite-difference weights for derivatives `0..=m` at `z` on nodes `x`.
/// Returns `c[k][j]`, the weight of node `j` in derivative `k`.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Start index of the `width`-point window centred on `z`.
fn window(grid: &[f64], z: f64, width: usize) -> usize {
    let k = grid.partition_point(|&g| g < z);
    k.saturating_sub(width / 2).min(grid.len() - width)
}

fn interpolate(grid: &[f64], values: &[f64], r: f64) -> f64 {
    if let Ok(i) = grid.binary_search_by(|g| g.total_cmp(&r)) {
        return values[i];
    }
    let s = window(grid, r, INTERP_POINTS);
    let w = fd_weights(r, &grid[s..s + INTERP_POINTS], 0);
    w[0].iter().zip(&values[s..]).map(|(a, b)| a * b).sum()
}

/// `∫_a^b f dr` for samples `f` on `grid`, integrating a local
/// `INTERP_POINTS`-point interpolant by Gauss-Legendre on each interval.
/// `a` may lie below the first grid point.
pub fn grid_integral(grid: &[f64], f: &[f64], a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let rule = GaussLegendre::new(NonZeroUsize::new(GL_PER_INTERVAL).expect("nonzero"));
    let mut edges: Vec<f64> = vec![a];
    edges.extend(grid.iter().copied().filter(|&g| g > a && g < b));
    edges.push(b);
    edges
        .windows(2)
        .map(|w| {
            let s = window(grid, 0.5 * (w[0] + w[1]), INTERP_POINTS);
            let xs = &grid[s..s + INTERP_POINTS];
            let fs = &f[s..s + INTERP_POINTS];
            rule.integrate(w[0], w[1], |r| {
                fd_weights(r, xs, 0)[0].iter().zip(fs).map(|(a, b)| a * b).sum::<f64>()
            })
        })
        .sum()
}

/// Which grid points feed a boundary derivative estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    Centered,
    /// Only points at or beyond `r_a`.
    Outside,
}

/// Derivatives `0..=m` of the tabulated function at `z`.
pub fn grid_derivatives(f: &RadialFunction, z: f64, m: usize, stencil: Stencil) -> Result<Vec<f64>> {
    let width = match stencil {
        Stencil::Centered => m + 2 * 4,
        Stencil::Outside => m + 6,
    };
    let g = &f.grid;
    let start = match stencil {
        Stencil::Centered => window(g, z, width),
        Stencil::Outside => g.partition_point(|&r| r < z - 1e-12 * z.abs().max(1.0)),
    };
    if start + width > g.len() {
        return Err(Error::InvalidInput(format!(
            "r = {z} is too close to the end of the radial grid"
        )));
    }
    let w = fd_weights(z, &g[start..start + width], m);
    Ok(w.iter()
        .map(|wk| wk.iter().zip(&f.values[start..]).map(|(a, b)| a * b).sum())
        .collect())
}

fn falling(n: usize, m: usize) -> f64 {
    (0..m).map(|t| (n as f64) - t as f64).product()
}

/// One fitted channel. `coefficients[p]` multiplies `(r²)^{P+M−1−p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoChannel {
    pub l: u32,
    pub grid: Vec<f64>,
    pub ae_values: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub r_a: f64,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "M")]
    pub m: usize,
}

impl PseudoChannel {
    /// Polynomial part, valid for any `r`.
    pub fn polynomial(&self, r: f64) -> f64 {
        let x = r * r;
        self.coefficients.iter().fold(0.0, |acc, c| acc * x + c)
    }

    /// `k`-th derivative of the polynomial part.
    pub fn polynomial_derivative(&self, r: f64, k: usize) -> f64 {
        let deg = self.coefficients.len() - 1;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(p, c)| {
                let n = 2 * (deg - p);
                if n < k {
                    0.0
                } else {
                    c * falling(n, k) * r.powi((n - k) as i32)
                }
            })
            .sum()
    }

    /// Piecewise pseudo function: polynomial inside `r_a`, the all-electron
    /// function outside.
    pub fn evaluate(&self, r: f64) -> f64 {
        if r < self.r_a {
            self.polynomial(r)
        } else {
            interpolate(&self.grid, &self.ae_values, r)
        }
    }

    fn ae(&self) -> RadialFunction {
        RadialFunction {
            l: self.l,
            grid: self.grid.clone(),
            values: self.ae_values.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub kind: String,
    pub channels: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoRadialSetup {
    pub channels: Vec<PseudoChannel>,
    pub residuals: Vec<Residual>,
    /// `O_ij = ⟨φ̃_i|φ̃_j⟩ − ⟨φ_i|φ_j⟩` over the sphere; zero across different l.
    pub overlap_diff: Vec<Vec<f64>>,
    #[serde(default)]
    pub fourier_penalty: Option<FourierPenalty>,
    #[serde(default)]
    pub fourier_tail: Option<f64>,
    pub tolerance: f64,
}

/// Penalty `∫_{G_max}^{G_up} G⁴ b(G)² dG` on the l = 0 channels, with
/// `b(G) = 4π ∫ r² φ̃(r) j₀(Gr) dr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierPenalty {
    pub g_max: f64,
    /// Upper end of the penalised band; defaults to `3 g_max`.
    #[serde(default)]
    pub g_upper: Option<f64>,
}

impl FourierPenalty {
    pub fn new(g_max: f64) -> Self {
        FourierPenalty { g_max, g_upper: None }
    }

    fn upper(&self) -> f64 {
        self.g_upper.unwrap_or(3.0 * self.g_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub r_a: f64,
    pub p: usize,
    pub m: usize,
    pub penalty: Option<FourierPenalty>,
    pub tolerance: f64,
}

impl FitOptions {
    pub fn new(r_a: f64, p: usize, m: usize) -> Self {
        FitOptions {
            r_a,
            p,
            m,
            penalty: None,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

fn j0(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}

fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.pseudo_inverse(smax * 1e-13).expect("u and v requested")
}

/// Linear algebra of the fit in scaled coefficients `a` (powers of s²).
struct Problem {
    n_ch: usize,
    k: usize,
    r_a: f64,
    /// Particular solution of the boundary conditions, per channel.
    a0: Vec<DVector<f64>>,
    /// Null-space basis of the boundary conditions, K × M.
    null: DMatrix<f64>,
    /// `∫_0^{r_a} r^{2l+2} s^{2k+2k'} dr` per channel.
    gram: Vec<DMatrix<f64>>,
    /// Overlap pairs (i, j, target).
    pairs: Vec<(usize, usize, f64)>,
    /// Quadratic tail model per l = 0 channel: `‖D z_c + e_c‖²`.
    tail: Vec<Option<(DMatrix<f64>, DVector<f64>)>>,
}

impl Problem {
    fn coeffs(&self, z: &DVector<f64>, c: usize) -> DVector<f64> {
        let m = self.null.ncols();
        &self.a0[c] + &self.null * z.rows(c * m, m)
    }

    fn constraints(&self, z: &DVector<f64>) -> DVector<f64> {
        let a: Vec<_> = (0..self.n_ch).map(|c| self.coeffs(z, c)).collect();
        DVector::from_iterator(
            self.pairs.len(),
            self.pairs
                .iter()
                .map(|&(i, j, t)| a[i].dot(&(&self.gram[i] * &a[j])) - t),
        )
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let m = self.null.ncols();
        let a: Vec<_> = (0..self.n_ch).map(|c| self.coeffs(z, c)).collect();
        let mut jac = DMatrix::zeros(self.pairs.len(), self.n_ch * m);
        for (row, &(i, j, _)) in self.pairs.iter().enumerate() {
            let gi = self.null.transpose() * (&self.gram[i] * &a[j]);
            let gj = self.null.transpose() * (&self.gram[i] * &a[i]);
            for t in 0..m {
                jac[(row, i * m + t)] += gi[t];
                jac[(row, j * m + t)] += gj[t];
            }
        }
        jac
    }

    fn penalty(&self, z: &DVector<f64>) -> f64 {
        let m = self.null.ncols();
        self.tail
            .iter()
            .enumerate()
            .filter_map(|(c, t)| t.as_ref().map(|(d, e)| (d * z.rows(c * m, m) + e).norm_squared()))
            .sum()
    }

    fn penalty_gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let m = self.null.ncols();
        let mut g = DVector::zeros(z.len());
        for (c, t) in self.tail.iter().enumerate() {
            if let Some((d, e)) = t {
                let r = d * z.rows(c * m, m) + e;
                g.rows_mut(c * m, m).copy_from(&(2.0 * d.transpose() * r));
            }
        }
        g
    }

    /// Damped Gauss-Newton with minimum-norm steps.
    fn restore(&self, mut z: DVector<f64>, target: f64, max_iter: usize) -> (DVector<f64>, f64) {
        let mut f = self.constraints(&z);
        let mut norm = f.amax();
        for _ in 0..max_iter {
            if norm <= target {
                break;
            }
            let step = -pinv(&self.jacobian(&z)) * &f;
            let mut alpha = 1.0;
            let mut improved = false;
            while alpha > 1e-6 {
                let trial = &z + alpha * &step;
                let ft = self.constraints(&trial);
                if ft.amax() < norm {
                    z = trial;
                    f = ft;
                    norm = f.amax();
                    improved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (z, norm)
    }

    fn to_channel(&self, z: &DVector<f64>, c: usize, ae: &RadialFunction, p: usize) -> PseudoChannel {
        let a = self.coeffs(z, c);
        let coefficients = (0..self.k)
            .rev()
            .map(|k| a[k] / self.r_a.powi(2 * k as i32))
            .collect();
        PseudoChannel {
            l: ae.l,
            grid: ae.grid.clone(),
            ae_values: ae.values.clone(),
            coefficients,
            r_a: self.r_a,
            p,
            m: self.k - p,
        }
    }
}

fn check_inputs(channels: &[RadialFunction], opts: &FitOptions) -> Result<()> {
    if channels.is_empty() {
        return Err(Error::InvalidInput("no radial channels given".into()));
    }
    if opts.p == 0 || opts.m == 0 {
        return Err(Error::InvalidInput("P and M must be at least 1".into()));
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    for c in channels {
        c.validate()?;
        if c.grid != channels[0].grid {
            return Err(Error::InvalidInput("all channels must share one radial grid".into()));
        }
    }
    let g = &channels[0].grid;
    let inside = g.partition_point(|&r| r < opts.r_a);
    if !(opts.r_a > g[0]) || inside < INTERP_POINTS || g.len() - inside < opts.p + 6 + INTERP_POINTS {
        return Err(Error::InvalidInput(format!(
            "r_a = {} is outside the usable radial grid [{}, {}]",
            opts.r_a,
            g[0],
            g[g.len() - 1]
        )));
    }
    let mut ls: Vec<u32> = channels.iter().map(|c| c.l).collect();
    ls.sort_unstable();
    ls.dedup();
    for l in ls {
        let n = channels.iter().filter(|c| c.l == l).count();
        if n * opts.m < n * (n + 1) / 2 {
            return Err(Error::Infeasible(format!(
                "l = {l}: {n} channels give {} overlap constraints but only {} free coefficients",
                n * (n + 1) / 2,
                n * opts.m
            )));
        }
    }
    Ok(())
}

fn build_problem(channels: &[RadialFunction], opts: &FitOptions) -> Result<Problem> {
    let (r_a, p) = (opts.r_a, opts.p);
    let k = opts.p + opts.m;
    // Boundary rows in s = r / r_a: d^m/dr^m s^{2k} at s = 1 is (2k)_m / r_a^m.
    let b = DMatrix::from_fn(p, k, |m, kk| falling(2 * kk, m) / r_a.powi(m as i32));
    let svd = b.clone().svd(true, true);
    let v_t = svd.v_t.as_ref().expect("requested");
    let full_vt = {
        // Complete the row space to an orthonormal basis of R^K.
        let mut q = DMatrix::<f64>::identity(k, k);
        q.view_mut((0, 0), (v_t.nrows(), k)).copy_from(v_t);
        q.transpose().qr().q()
    };
    let null = full_vt.columns(p, k - p).into_owned();
    let b_pinv = pinv(&b);
    let g = &channels[0].grid;
    let inside: Vec<usize> = (0..g.len()).filter(|&i| g[i] <= r_a).collect();

    let mut a0 = Vec::with_capacity(channels.len());
    let mut gram = Vec::with_capacity(channels.len());
    let mut tail = Vec::with_capacity(channels.len());
    for ch in channels {
        let targets = DVector::from_vec(grid_derivatives(ch, r_a, p - 1, Stencil::Centered)?);
        let part = &b_pinv * targets;
        // Least-squares start inside the sphere.
        let design = DMatrix::from_fn(inside.len(), k, |row, kk| (g[inside[row]] / r_a).powi(2 * kk as i32));
        let rhs = DVector::from_fn(inside.len(), |row, _| ch.values[inside[row]]) - &design * &part;
        let z = pinv(&(&design * &null)) * rhs;
        a0.push(&part + &null * z);
        let l = ch.l as i32;
        gram.push(DMatrix::from_fn(k, k, |i, j| {
            r_a.powi(2 * l + 3) / (2.0 * (i + j) as f64 + 2.0 * l as f64 + 3.0)
        }));
        tail.push(match opts.penalty {
            Some(pen) if ch.l == 0 => Some(tail_model(ch, r_a, k, &pen)?),
            _ => None,
        });
    }
    let mut pairs = Vec::new();
    for i in 0..channels.len() {
        for j in i..channels.len() {
            if channels[i].l != channels[j].l {
                continue;
            }
            let l = channels[i].l as i32;
            let prod: Vec<f64> = g
                .iter()
                .zip(channels[i].values.iter().zip(&channels[j].values))
                .map(|(r, (x, y))| r.powi(2 * l + 2) * x * y)
                .collect();
            pairs.push((i, j, grid_integral(g, &prod, 0.0, r_a)));
        }
    }
    let tail = tail
        .into_iter()
        .zip(&a0)
        .map(|(t, a)| {
            t.map(|(bk, bout, w)| {
                let d = DMatrix::from_fn(bk.nrows(), null.ncols(), |q, c| w[q] * (bk.row(q) * null.column(c))[0]);
                let e = DVector::from_fn(bk.nrows(), |q, _| w[q] * (bout[q] + (bk.row(q) * a)[0]));
                (d, e)
            })
        })
        .collect();
    Ok(Problem {
        n_ch: channels.len(),
        k,
        r_a,
        a0,
        null,
        gram,
        pairs,
        tail,
    })
}

/// Tail quadrature: rows `B_k(G_q)`, outside contributions `b_out(G_q)` and
/// weights `√w_q G_q²`.
#[allow(clippy::type_complexity)]
fn tail_model(ch: &RadialFunction, r_a: f64, k: usize, pen: &FourierPenalty) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>)> {
    let (g0, g1) = (pen.g_max, pen.upper());
    if !(g0 > 0.0 && g1 > g0) {
        return Err(Error::InvalidInput(format!("Fourier band [{g0}, {g1}] is empty")));
    }
    let four_pi = 4.0 * std::f64::consts::PI;
    let outer = GaussLegendre::new(NonZeroUsize::new(96).expect("nonzero"));
    let inner = GaussLegendre::new(NonZeroUsize::new(160).expect("nonzero"));
    let pts: Vec<(f64, f64)> = outer
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * ((g1 - g0) * x + g1 + g0), 0.5 * (g1 - g0) * w))
        .collect();
    let g = &ch.grid;
    let r_end = g[g.len() - 1];
    let mut bk = DMatrix::zeros(pts.len(), k);
    let mut bout = Vec::with_capacity(pts.len());
    let mut w = Vec::with_capacity(pts.len());
    for (q, &(gq, wq)) in pts.iter().enumerate() {
        for kk in 0..k {
            bk[(q, kk)] = four_pi
                * inner.integrate(0.0, r_a, |r| r * r * (r / r_a).powi(2 * kk as i32) * j0(gq * r));
        }
        let samples: Vec<f64> = g.iter().zip(&ch.values).map(|(r, v)| r * r * v * j0(gq * r)).collect();
        bout.push(four_pi * grid_integral(g, &samples, r_a, r_end));
        w.push(wq.sqrt() * gq * gq);
    }
    Ok((bk, bout, w))
}

fn report(setup: &mut PseudoRadialSetup, channels: &[RadialFunction]) -> Result<()> {
    let v = verify_setup(setup, channels);
    setup.overlap_diff = v.overlap_diff.clone();
    setup.residuals = v.residuals;
    Ok(())
}

/// Fits one polynomial per channel (shared `r_a`, `P`, `M`).
pub fn fit_pseudo_radial(channels: &[RadialFunction], opts: &FitOptions) -> Result<PseudoRadialSetup> {
    check_inputs(channels, opts)?;
    let problem = build_problem(channels, opts)?;
    let m = problem.null.ncols();
    let inner_tol = 1e-3 * opts.tolerance;
    let (mut z, mut norm) = problem.restore(DVector::zeros(channels.len() * m), inner_tol, MAX_NEWTON);
    if norm > opts.tolerance {
        return Err(Error::NoConvergence(format!(
            "overlap constraints stagnated at max residual {norm:e} (tolerance {:e})",
            opts.tolerance
        )));
    }
    if opts.penalty.is_some() {
        let mut phi = problem.penalty(&z);
        let mut t = 0.0;
        for _ in 0..MAX_PENALTY_STEPS {
            let g = problem.penalty_gradient(&z);
            let jac = problem.jacobian(&z);
            let pg = &g - pinv(&jac) * (&jac * &g);
            let pn = pg.norm();
            if pn <= 1e-14 * g.norm().max(1e-300) {
                break;
            }
            if t == 0.0 {
                t = 0.1 * z.norm().max(1.0) / pn;
            }
            let mut accepted = false;
            while t * pn > 1e-14 * z.norm().max(1.0) {
                let (trial, tn) = problem.restore(&z - t * &pg, inner_tol, 30);
                let tp = problem.penalty(&trial);
                if tn <= inner_tol && tp < phi {
                    let gain = (phi - tp) / phi.max(1e-300);
                    z = trial;
                    phi = tp;
                    norm = tn;
                    accepted = true;
                    t *= 2.0;
                    if gain < 1e-12 {
                        accepted = false;
                    }
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
    debug_assert!(norm <= opts.tolerance);
    let channels_out = channels
        .iter()
        .enumerate()
        .map(|(c, ae)| problem.to_channel(&z, c, ae, opts.p))
        .collect();
    let mut setup = PseudoRadialSetup {
        channels: channels_out,
        residuals: Vec::new(),
        overlap_diff: Vec::new(),
        fourier_penalty: opts.penalty,
        fourier_tail: opts.penalty.map(|_| problem.penalty(&z)),
        tolerance: opts.tolerance,
    };
    report(&mut setup, channels)?;
    Ok(setup)
}

/// `∫_{G_max}^{G_up} G⁴ b(G)² dG` summed over the l = 0 channels of a setup.
pub fn fourier_tail(setup: &PseudoRadialSetup, penalty: &FourierPenalty) -> Result<f64> {
    let mut total = 0.0;
    for ch in setup.channels.iter().filter(|c| c.l == 0) {
        let k = ch.coefficients.len();
        let (bk, bout, w) = tail_model(&ch.ae(), ch.r_a, k, penalty)?;
        // bk is in scaled powers: a_k (scaled) = c_k r_a^{2k}.
        for q in 0..bk.nrows() {
            let inside: f64 = (0..k)
                .map(|kk| bk[(q, kk)] * ch.coefficients[k - 1 - kk] * ch.r_a.powi(2 * kk as i32))
                .sum();
            total += (w[q] * (inside + bout[q])).powi(2);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub residuals: Vec<Residual>,
    pub overlap_diff: Vec<Vec<f64>>,
    pub pass: bool,
}

/// Recomputes every constraint on a grid refined by midpoint insertion.
/// Boundary derivatives of the all-electron side use one-sided stencils
/// from outside the sphere.
pub fn verify_setup(setup: &PseudoRadialSetup, channels: &[RadialFunction]) -> VerifyReport {
    let tol = setup.tolerance;
    let mut checks = Vec::new();
    let mut residuals = Vec::new();
    let n = setup.channels.len();
    let push = |checks: &mut Vec<Check>, residuals: &mut Vec<Residual>, kind: &str, chs: Vec<usize>, value: f64| {
        let name = format!("{kind}{chs:?}");
        checks.push(Check {
            name,
            value,
            tolerance: tol,
            pass: value.is_finite() && value <= tol,
        });
        residuals.push(Residual {
            kind: kind.into(),
            channels: chs,
            value,
        });
    };
    if channels.len() != n {
        push(&mut checks, &mut residuals, "channel_count", vec![], f64::INFINITY);
    }
    for (c, ch) in setup.channels.iter().enumerate() {
        let ae = channels.get(c).cloned().unwrap_or_else(|| ch.ae());
        // Outside identity at every grid point beyond r_a.
        let outside = ae
            .grid
            .iter()
            .zip(&ae.values)
            .filter(|(r, _)| **r >= ch.r_a)
            .map(|(r, v)| (ch.evaluate(*r) - v).abs())
            .fold(0.0, f64::max);
        push(&mut checks, &mut residuals, "outside_identity", vec![c], outside);
        match grid_derivatives(&ae, ch.r_a, ch.p - 1, Stencil::Outside) {
            Ok(d) => {
                for (k, dk) in d.iter().enumerate() {
                    let diff = (ch.polynomial_derivative(ch.r_a, k) - dk).abs();
                    push(&mut checks, &mut residuals, &format!("derivative_{k}"), vec![c], diff);
                }
            }
            Err(_) => push(&mut checks, &mut residuals, "derivative", vec![c], f64::INFINITY),
        }
    }
    let mut overlap_diff = vec![vec![0.0; n]; n];
    if let Some(first) = setup.channels.first() {
        let r_a = first.r_a;
        let mut fine: Vec<f64> = Vec::new();
        let g = &first.grid;
        for w in g.windows(2).filter(|w| w[0] < r_a) {
            fine.push(w[0]);
            let mid = 0.5 * (w[0] + w[1]);
            if mid < r_a {
                fine.push(mid);
            }
        }
        fine.push(r_a);
        fine.sort_by(f64::total_cmp);
        fine.dedup();
        if fine.len() < INTERP_POINTS {
            push(&mut checks, &mut residuals, "overlap_grid", vec![], f64::INFINITY);
        } else {
            for i in 0..n {
                for j in i..n {
                    let (a, b) = (&setup.channels[i], &setup.channels[j]);
                    if a.l != b.l {
                        continue;
                    }
                    let aei = channels.get(i).cloned().unwrap_or_else(|| a.ae());
                    let aej = channels.get(j).cloned().unwrap_or_else(|| b.ae());
                    let l = a.l as i32;
                    let ps: Vec<f64> = fine.iter().map(|&r| r.powi(2 * l + 2) * a.polynomial(r) * b.polynomial(r)).collect();
                    let ae: Vec<f64> = fine
                        .iter()
                        .map(|&r| r.powi(2 * l + 2) * aei.interpolate(r) * aej.interpolate(r))
                        .collect();
                    let o = grid_integral(&fine, &ps, 0.0, r_a) - grid_integral(&fine, &ae, 0.0, r_a);
                    overlap_diff[i][j] = o;
                    overlap_diff[j][i] = o;
                    push(&mut checks, &mut residuals, "overlap", vec![i, j], o.abs());
                }
            }
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    VerifyReport {
        checks,
        residuals,
        overlap_diff,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialInput {
    pub channels: Vec<RadialFunction>,
}

/// Hydrogenic 1s and 2s radial functions on a uniform grid.
pub fn hydrogenic_pair(r_max: f64, h: f64) -> Vec<RadialFunction> {
    let n = (r_max / h).round() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let s1 = grid.iter().map(|r| 2.0 * (-r).exp()).collect();
    let s2 = grid
        .iter()
        .map(|r| (1.0 / (2.0 * 2f64.sqrt())) * (2.0 - r) * (-r / 2.0).exp())
        .collect();
    vec![
        RadialFunction {
            l: 0,
            grid: grid.clone(),
            values: s1,
        },
        RadialFunction {
            l: 0,
            grid,
            values: s2,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_weights_exact_on_cubic() {
        let x = [0.0, 0.3, 0.7, 1.2, 1.5];
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t.powi(3);
        let w = fd_weights(0.9, &x, 2);
        let d: Vec<f64> = w.iter().map(|wk| wk.iter().zip(&x).map(|(a, t)| a * f(*t)).sum()).collect();
        assert!((d[0] - f(0.9)).abs() < 1e-12);
        assert!((d[1] - (-2.0 + 1.5 * 0.81)).abs() < 1e-12);
        assert!((d[2] - 3.0 * 0.9).abs() < 1e-11);
    }

    #[test]
    fn hydrogenic_fit_converges() {
        let ch = hydrogenic_pair(20.0, 0.01);
        let s = fit_pseudo_radial(&ch, &FitOptions::new(1.2, 3, 2)).unwrap();
        let v = verify_setup(&s, &ch);
        assert!(v.pass, "{:?}", v.checks);
    }
}
