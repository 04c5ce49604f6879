//! Exact per-mode theory of `Y_tt − ΔY_t − ∂₁²Y = f`.
//!
//! Each Fourier mode obeys `ŷ'' + |ξ|²ŷ' + ξ₁²ŷ = f̂` with symbol roots
//! `λ± = −(|ξ|² ± √(|ξ|⁴ − 4ξ₁²))/2`.
use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::etd::{apply2, EtdTable, Mat2};
use crate::grid::{wrap_index, Grid, SpectralField};
use crate::lp::CutoffPair;

/// Relative discriminant below which the double-root form is used.
pub const DOUBLE_ROOT_TOL: f64 = 1e-10;

/// `Low`: `|ξ|² ≤ 2|ξ₁|`, complex (parabolic) pair. `High`: real slow/fast pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Low,
    High,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Low => "low",
            Regime::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEigen {
    pub xi: (f64, f64),
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    pub regime: Regime,
}

pub fn regime(xi1: f64, xi2: f64) -> Regime {
    if xi1 * xi1 + xi2 * xi2 <= 2.0 * xi1.abs() {
        Regime::Low
    } else {
        Regime::High
    }
}

/// Roots of `λ² + |ξ|²λ + ξ₁² = 0`; the slow root uses the cancellation-free
/// form `λ₋ = −2ξ₁²/(|ξ|² + √(|ξ|⁴ − 4ξ₁²))`.
pub fn eigenvalues(xi1: f64, xi2: f64) -> Result<ModeEigen> {
    let k2 = xi1 * xi1 + xi2 * xi2;
    if k2 == 0.0 {
        return Err(Error::InvalidParameter("zero frequency has no eigenpair".into()));
    }
    let (lp, lm) = roots(xi1, k2);
    Ok(ModeEigen {
        xi: (xi1, xi2),
        lambda_plus: lp,
        lambda_minus: lm,
        regime: regime(xi1, xi2),
    })
}

fn roots(xi1: f64, k2: f64) -> (Complex64, Complex64) {
    let disc = k2 * k2 - 4.0 * xi1 * xi1;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let lp = -(k2 + sq) / 2.0;
        let lm = if k2 + sq > 0.0 {
            -2.0 * xi1 * xi1 / (k2 + sq)
        } else {
            0.0
        };
        (lp.into(), lm.into())
    } else {
        let im = (-disc).sqrt() / 2.0;
        (Complex64::new(-k2 / 2.0, -im), Complex64::new(-k2 / 2.0, im))
    }
}

/// `e^z − 1` without cancellation for small `|z|`.
fn cexpm1(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(
        z.re.exp_m1() * c - 2.0 * half * half,
        z.re.exp() * s,
    )
}

/// Exact solution `(ŷ(t), ŷ_t(t))` of the homogeneous mode equation.
pub fn mode_solution(xi1: f64, xi2: f64, y0: Complex64, y1: Complex64, t: f64) -> (Complex64, Complex64) {
    let k2 = xi1 * xi1 + xi2 * xi2;
    let disc = k2 * k2 - 4.0 * xi1 * xi1;
    if disc.abs() <= DOUBLE_ROOT_TOL * k2 * k2 {
        let lam = -k2 / 2.0;
        let el = (lam * t).exp();
        let b = y1 - y0 * lam;
        let y = (y0 + b * t) * el;
        return (y, b * el + y * lam);
    }
    let (lp, lm) = roots(xi1, k2);
    let d = lp - lm;
    let em = (lm * t).exp();
    // (e^{λ₊t} − e^{λ₋t})/(λ₊ − λ₋)
    let psi = em * cexpm1(d * t) / d;
    let y = y0 * (em - lm * psi) + y1 * psi;
    let yt = -y0 * (lp * lm) * psi + y1 * (em + lp * psi);
    (y, yt)
}

/// Real 2×2 propagator `[[∂ŷ/∂y₀, ∂ŷ/∂y₁], [∂ŷ_t/∂y₀, ∂ŷ_t/∂y₁]]` at time `t`.
pub fn mode_propagator(xi1: f64, xi2: f64, t: f64) -> Mat2 {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    let (a, c) = mode_solution(xi1, xi2, one, zero, t);
    let (b, d) = mode_solution(xi1, xi2, zero, one, t);
    [a.re, b.re, c.re, d.re]
}

/// First-order system matrix of the mode equation acting on `(ŷ, ŷ_t)`.
pub fn mode_matrix(xi1: f64, xi2: f64) -> Mat2 {
    [0.0, 1.0, -xi1 * xi1, -(xi1 * xi1 + xi2 * xi2)]
}

/// Exponential propagator table of the linear Lagrangian operator.
pub fn lagrangian_table(grid: &Grid, dt: f64) -> EtdTable {
    let g = grid.clone();
    let exact = move |i: usize, j: usize| mode_propagator(g.xi1(i), g.xi2(j), dt);
    EtdTable::new(
        grid,
        dt,
        |i, j| mode_matrix(grid.xi1(i), grid.xi2(j)),
        Some(&exact),
    )
}

/// Vector field as a pair of spectral components.
pub type Vec2 = [SpectralField; 2];

/// Known forcing `f(t)` sampled by the integrator.
pub struct LinearForcing<'a> {
    pub f: &'a dyn Fn(f64) -> Vec2,
    /// Integrator steps between stored samples.
    pub substeps: usize,
}

/// Stored states `(Ŷ, Ŷ_t)` at uniformly spaced times.
#[derive(Debug, Clone)]
pub struct LinearTrajectory {
    pub times: Vec<f64>,
    pub y: Vec<Vec2>,
    pub yt: Vec<Vec2>,
    pub forced: bool,
}

/// Evolves `(Y₀, Y₁)` to `t_final`, storing `samples` uniformly spaced states.
///
/// Without forcing every sample is the exact per-mode solution. With forcing the
/// exponential trapezoid rule (`f` linearly interpolated per step) is used; it is
/// second order in the step.
pub fn evolve_linear(
    y0: &Vec2,
    y1: &Vec2,
    t_final: f64,
    samples: usize,
    forcing: Option<&LinearForcing>,
) -> Result<LinearTrajectory> {
    if samples < 2 || !(t_final > 0.0) {
        return Err(Error::InvalidParameter(
            "need t_final > 0 and at least two samples".into(),
        ));
    }
    let grid = y0[0].grid().clone();
    for f in y0.iter().chain(y1) {
        if *f.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    let dt = t_final / (samples - 1) as f64;
    let times: Vec<f64> = (0..samples).map(|n| n as f64 * dt).collect();
    match forcing {
        None => {
            let mut y = Vec::with_capacity(samples);
            let mut yt = Vec::with_capacity(samples);
            for &t in &times {
                let (a, b) = propagate_exact(&grid, y0, y1, t);
                y.push(a);
                yt.push(b);
            }
            Ok(LinearTrajectory {
                times,
                y,
                yt,
                forced: false,
            })
        }
        Some(fc) => {
            let sub = fc.substeps.max(1);
            let h = dt / sub as f64;
            let table = lagrangian_table(&grid, h);
            let mut state = (y0.clone(), y1.clone());
            let mut y = vec![state.0.clone()];
            let mut yt = vec![state.1.clone()];
            let mut t = 0.0;
            let mut f_now = (fc.f)(t);
            for _ in 1..samples {
                for _ in 0..sub {
                    let f_next = (fc.f)(t + h);
                    state = exp_trapezoid(&table, &state, &f_now, &f_next);
                    f_now = f_next;
                    t += h;
                }
                y.push(state.0.clone());
                yt.push(state.1.clone());
            }
            Ok(LinearTrajectory {
                times,
                y,
                yt,
                forced: true,
            })
        }
    }
}

fn propagate_exact(grid: &Grid, y0: &Vec2, y1: &Vec2, t: f64) -> (Vec2, Vec2) {
    let mut y = [SpectralField::zeros(grid), SpectralField::zeros(grid)];
    let mut yt = y.clone();
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let p = mode_propagator(grid.xi1(i), grid.xi2(j), t);
            let k = grid.idx(i, j);
            for c in 0..2 {
                let [a, b] = apply2(&p, [y0[c].data()[k], y1[c].data()[k]]);
                y[c].data_mut()[k] = a;
                yt[c].data_mut()[k] = b;
            }
        }
    }
    (y, yt)
}

fn exp_trapezoid(table: &EtdTable, s: &(Vec2, Vec2), f0: &Vec2, f1: &Vec2) -> (Vec2, Vec2) {
    let mut out = s.clone();
    let n = s.0[0].data().len();
    for c in 0..2 {
        for k in 0..n {
            let z = [s.0[c].data()[k], s.1[c].data()[k]];
            let e = apply2(&table.e[k], z);
            let a = f0[c].data()[k];
            let b = f1[c].data()[k] - a;
            let w1 = &table.w1[k];
            let w2 = &table.w2[k];
            out.0[c].data_mut()[k] = e[0] + w1[1] * a + w2[1] * b;
            out.1[c].data_mut()[k] = e[1] + w1[3] * a + w2[3] * b;
        }
    }
    out
}

/// Block energy `g_{j,k}²` of `(Y, Y_t)`, summed over both components:
/// `½(‖Y_t‖² + ‖∂₁Y‖² + ¼‖ΔY‖²) − ¼(Y_t | ΔY)` on `Δ_jΔ_k^h`.
pub fn block_energy(y: &Vec2, yt: &Vec2, j: i32, k: i32) -> f64 {
    let g = y[0].grid();
    let c = CutoffPair;
    let mut acc = 0.0;
    for a in 0..g.nx() {
        let wk = c.phi_j(k, g.xi1(a).abs());
        if wk == 0.0 {
            continue;
        }
        for b in 0..g.ny() {
            let w = wk * c.phi_j(j, g.xi_sq(a, b).sqrt());
            if w == 0.0 {
                continue;
            }
            acc += w * w * mode_energy_density(g, a, b, y, yt);
        }
    }
    acc * g.area()
}

fn mode_energy_density(g: &Grid, a: usize, b: usize, y: &Vec2, yt: &Vec2) -> f64 {
    let x1 = g.xi1(a);
    let k2 = g.xi_sq(a, b);
    let mut e = 0.0;
    for c in 0..2 {
        let p = y[c].at(a, b);
        let v = yt[c].at(a, b);
        e += 0.5 * v.norm_sqr()
            + 0.5 * x1 * x1 * p.norm_sqr()
            + 0.125 * k2 * k2 * p.norm_sqr()
            + 0.25 * k2 * (v * p.conj()).re;
    }
    e
}

/// `g_{j,k}²` for every block with nonzero support, in one pass.
pub fn block_energies(y: &Vec2, yt: &Vec2) -> BTreeMap<(i32, i32), f64> {
    let g = y[0].grid();
    let c = CutoffPair;
    let mut out = BTreeMap::new();
    for a in 0..g.nx() {
        let hk = c.active(g.xi1(a).abs());
        if hk.is_empty() {
            continue;
        }
        for b in 0..g.ny() {
            let d = mode_energy_density(g, a, b, y, yt);
            for (j, wj) in c.active(g.xi_sq(a, b).sqrt()) {
                for &(k, wk) in &hk {
                    *out.entry((j, k)).or_insert(0.0) += (wj * wk).powi(2) * d;
                }
            }
        }
    }
    for v in out.values_mut() {
        *v *= g.area();
    }
    out
}

/// Energies of the `ξ₁ = 0` stratum, which no horizontal block sees, per isotropic block.
pub fn shear_block_energies(y: &Vec2, yt: &Vec2) -> BTreeMap<i32, f64> {
    let g = y[0].grid();
    let c = CutoffPair;
    let mut out = BTreeMap::new();
    for a in 0..g.nx() {
        if g.xi1(a) != 0.0 {
            continue;
        }
        for b in 0..g.ny() {
            let d = mode_energy_density(g, a, b, y, yt);
            for (j, wj) in c.active(g.xi_sq(a, b).sqrt()) {
                *out.entry(j).or_insert(0.0) += wj * wj * d;
            }
        }
    }
    for v in out.values_mut() {
        *v *= g.area();
    }
    out
}

/// Least-squares slope of a log-amplitude tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted exponent `r` in `|ŷ(t)| ~ e^{rt}` (negative for decay).
    pub rate: f64,
    /// `|r|` times the fit window length.
    pub efolds: f64,
    /// False when the window spans less than one e-folding (rate still reported).
    pub sufficient: bool,
}

/// Fits `log a(t)` over the last half of the samples.
pub fn fit_tail(times: &[f64], amplitude: &[f64]) -> Result<DecayFit> {
    let n = times.len();
    if n < 4 || amplitude.len() != n {
        return Err(Error::InvalidParameter("decay fit needs at least four samples".into()));
    }
    let start = n / 2;
    let pts: Vec<(f64, f64)> = (start..n)
        .filter(|&k| amplitude[k] > 0.0)
        .map(|k| (times[k], amplitude[k].ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidParameter("amplitude vanishes on the fit window".into()));
    }
    let m = pts.len() as f64;
    let tb = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let lb = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tb).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tb) * (p.1 - lb)).sum();
    let rate = sxy / sxx;
    let window = pts[pts.len() - 1].0 - pts[0].0;
    let efolds = rate.abs() * window;
    Ok(DecayFit {
        rate,
        efolds,
        sufficient: efolds >= 1.0,
    })
}

/// Decay exponent of the mode with integer wavenumbers `(m, n)`, using the
/// amplitude `(|ŷ¹|² + |ŷ²|²)^{1/2}`.
pub fn measured_decay_rate(traj: &LinearTrajectory, m: i64, n: i64) -> Result<DecayFit> {
    let g = traj.y[0][0].grid();
    let k = g.idx(wrap_index(m, g.nx()), wrap_index(n, g.ny()));
    let amp: Vec<f64> = traj
        .y
        .iter()
        .map(|y| (y[0].data()[k].norm_sqr() + y[1].data()[k].norm_sqr()).sqrt())
        .collect();
    fit_tail(&traj.times, &amp)
}

/// CSV rows `(xi1, xi2, lambda_plus_re, lambda_plus_im, lambda_minus_re, lambda_minus_im, regime)`
/// over the nonzero lattice.
pub fn write_dispersion_csv(grid: &Grid, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "xi1",
        "xi2",
        "lambda_plus_re",
        "lambda_plus_im",
        "lambda_minus_re",
        "lambda_minus_im",
        "regime",
    ])?;
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let (a, b) = (grid.xi1(i), grid.xi2(j));
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let e = eigenvalues(a, b)?;
            w.write_record([
                a.to_string(),
                b.to_string(),
                e.lambda_plus.re.to_string(),
                e.lambda_plus.im.to_string(),
                e.lambda_minus.re.to_string(),
                e.lambda_minus.im.to_string(),
                e.regime.as_str().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// CSV rows `(t, j, k, g_sq)` for a trajectory.
pub fn write_block_energy_csv(traj: &LinearTrajectory, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "j", "k", "g_sq"])?;
    for (n, &t) in traj.times.iter().enumerate() {
        for ((j, k), g2) in block_energies(&traj.y[n], &traj.yt[n]) {
            w.write_record([t.to_string(), j.to_string(), k.to_string(), g2.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
