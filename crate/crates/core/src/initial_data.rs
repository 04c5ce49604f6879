//! Admissible initial data.
//!
//! Two routes are provided. On the torus the data are built Lagrangian-first:
//! a measure-preserving map `X₀` is the time-one flow of an incompressible
//! stream function, and `ψ₀`, `ψ̃₀` are read off from `X₀⁻¹(x) = (x₁ − ψ̃₀, x₂ + ψ₀)`.
//! For a concentrated `ψ₀` the companion potential is marched in `x₁` from the
//! left edge of the box, which is then treated as an unwrapped strip.
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid, RealField};
use crate::interp::{sample_at, Bicubic, X1Boundary};
use crate::lp::{a_ks_norm, sobolev_norm};

/// Contraction threshold for the flow-map fixed point.
pub const EPS0: f64 = 0.1;

/// One term `amp·cos(2π(m x₁/lx + n x₂/ly) + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub m: i64,
    pub n: i64,
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `exp(−|x − c|²/w²)`, periodized.
    Gaussian { center: [f64; 2], width: f64 },
    Trig { modes: Vec<TrigMode> },
}

/// Scalar `amplitude·shape` on a periodic box.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFunction {
    pub amplitude: f64,
    pub shape: Shape,
    lx: f64,
    ly: f64,
}

fn gauss1(x: f64, c: f64, w: f64, l: f64) -> (f64, f64) {
    let (mut v, mut d) = (0.0, 0.0);
    for img in -2..=2 {
        let z = (x - c + img as f64 * l) / w;
        let e = (-z * z).exp();
        v += e;
        d += -2.0 * z / w * e;
    }
    (v, d)
}

impl StreamFunction {
    pub fn new(grid: &Grid, amplitude: f64, shape: Shape) -> Self {
        StreamFunction {
            amplitude,
            shape,
            lx: grid.lx(),
            ly: grid.ly(),
        }
    }

    pub fn zero(grid: &Grid) -> Self {
        Self::new(grid, 0.0, Shape::Trig { modes: vec![] })
    }

    /// Value and gradient at a point.
    pub fn eval(&self, x1: f64, x2: f64) -> (f64, [f64; 2]) {
        let a = self.amplitude;
        match &self.shape {
            Shape::Gaussian { center, width } => {
                let (g1, d1) = gauss1(x1, center[0], *width, self.lx);
                let (g2, d2) = gauss1(x2, center[1], *width, self.ly);
                (a * g1 * g2, [a * d1 * g2, a * g1 * d2])
            }
            Shape::Trig { modes } => {
                let (k1, k2) = (2.0 * PI / self.lx, 2.0 * PI / self.ly);
                let mut v = 0.0;
                let mut g = [0.0; 2];
                for md in modes {
                    let (p1, p2) = (k1 * md.m as f64, k2 * md.n as f64);
                    let (s, c) = (p1 * x1 + p2 * x2 + md.phase).sin_cos();
                    v += md.amp * c;
                    g[0] -= md.amp * p1 * s;
                    g[1] -= md.amp * p2 * s;
                }
                (a * v, [a * g[0], a * g[1]])
            }
        }
    }

    /// `∇^⊥χ = (−∂₂χ, ∂₁χ)`.
    pub fn velocity(&self, x1: f64, x2: f64) -> [f64; 2] {
        let (_, g) = self.eval(x1, x2);
        [-g[1], g[0]]
    }

    pub fn sample(&self, grid: &Grid) -> RealField {
        RealField::from_fn(grid, |x, y| self.eval(x, y).0)
    }

    pub fn sample_velocity(&self, grid: &Grid) -> [RealField; 2] {
        [
            RealField::from_fn(grid, |x, y| self.velocity(x, y)[0]),
            RealField::from_fn(grid, |x, y| self.velocity(x, y)[1]),
        ]
    }
}

/// Displacement `Φ_t(y) − y` of the flow of `∇^⊥χ` at every node (RK4, `steps` steps).
pub fn flow_displacement(grid: &Grid, stream: &StreamFunction, t: f64, steps: usize) -> [RealField; 2] {
    let h = t / steps.max(1) as f64;
    let mut d0 = Vec::with_capacity(grid.len());
    let mut d1 = Vec::with_capacity(grid.len());
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let y = [grid.x1(i), grid.x2(j)];
            let mut x = y;
            for _ in 0..steps.max(1) {
                let k1 = stream.velocity(x[0], x[1]);
                let k2 = stream.velocity(x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]);
                let k3 = stream.velocity(x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]);
                let k4 = stream.velocity(x[0] + h * k3[0], x[1] + h * k3[1]);
                for c in 0..2 {
                    x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                }
            }
            d0.push(x[0] - y[0]);
            d1.push(x[1] - y[1]);
        }
    }
    [RealField::from_vec(grid, d0), RealField::from_vec(grid, d1)]
}

/// Fourth-order finite difference in `x₁` on the unwrapped strip (one-sided at the edges).
pub fn fd4_x1(f: &RealField) -> RealField {
    let g = f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let h12 = 12.0 * g.dx();
    let v = |i: usize, j: usize| f.at(i, j);
    let mut out = vec![0.0; g.len()];
    for j in 0..ny {
        for i in 0..nx {
            let d = if i >= 2 && i + 2 < nx {
                -v(i + 2, j) + 8.0 * v(i + 1, j) - 8.0 * v(i - 1, j) + v(i - 2, j)
            } else if i == 0 {
                -25.0 * v(0, j) + 48.0 * v(1, j) - 36.0 * v(2, j) + 16.0 * v(3, j) - 3.0 * v(4, j)
            } else if i == 1 {
                -3.0 * v(0, j) - 10.0 * v(1, j) + 18.0 * v(2, j) - 6.0 * v(3, j) + v(4, j)
            } else if i == nx - 1 {
                25.0 * v(i, j) - 48.0 * v(i - 1, j) + 36.0 * v(i - 2, j) - 16.0 * v(i - 3, j)
                    + 3.0 * v(i - 4, j)
            } else {
                3.0 * v(i + 1, j) + 10.0 * v(i, j) - 18.0 * v(i - 1, j) + 6.0 * v(i - 2, j)
                    - v(i - 3, j)
            };
            out[g.idx(i, j)] = d / h12;
        }
    }
    RealField::from_vec(g, out)
}

/// Gradient with the `x₁` derivative taken per `boundary` and `x₂` spectrally.
pub fn gradient(f: &RealField, boundary: X1Boundary) -> [RealField; 2] {
    let s = f.to_spectral();
    let d1 = match boundary {
        X1Boundary::Periodic => s.dx1().to_real(),
        X1Boundary::Clamped => fd4_x1(f),
    };
    [d1, s.dx2().to_real()]
}

/// Companion potential `ψ̃₀` with the `x₁` treatment needed to differentiate
/// and interpolate it.
#[derive(Debug, Clone)]
pub struct CompanionPotential {
    pub field: RealField,
    pub boundary: X1Boundary,
    /// `max|ψ̃₀|` on the last column (zero for periodic data).
    pub tail_jump: f64,
}

impl CompanionPotential {
    pub fn periodic(field: RealField) -> Self {
        CompanionPotential {
            field,
            boundary: X1Boundary::Periodic,
            tail_jump: 0.0,
        }
    }
}

struct ColumnDx2 {
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
    xi: Vec<f64>,
}

impl ColumnDx2 {
    fn new(g: &Grid) -> Self {
        let mut p = FftPlanner::new();
        let ny = g.ny();
        ColumnDx2 {
            fwd: p.plan_fft_forward(ny),
            inv: p.plan_fft_inverse(ny),
            xi: (0..ny)
                .map(|j| if g.is_nyquist_y(j) { 0.0 } else { g.xi2(j) })
                .collect(),
        }
    }

    fn apply(&self, col: &[f64]) -> Vec<f64> {
        let n = col.len();
        let mut buf: Vec<Complex64> = col.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        for (b, &k) in buf.iter_mut().zip(&self.xi) {
            *b *= Complex64::new(0.0, k / n as f64);
        }
        self.inv.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }
}

/// Solves `(1+∂₂ψ₀)∂₁ψ̃₀ − ∂₁ψ₀∂₂ψ̃₀ = ∂₂ψ₀` with `ψ̃₀ = 0` on the first column,
/// marching in `x₁` with RK4 and spectral `x₂` derivatives.
pub fn solve_companion_potential(psi0: &RealField) -> Result<CompanionPotential> {
    let g = psi0.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let s = psi0.to_spectral();
    let grad_inf = s.dx1().to_real().max_abs().max(s.dx2().to_real().max_abs());
    if grad_inf >= 0.5 {
        return Err(Error::Precondition(format!(
            "‖∇ψ₀‖∞ = {grad_inf} must be below 1/2"
        )));
    }
    let peak = psi0.max_abs();
    let edge = (0..ny)
        .map(|j| psi0.at(0, j).abs().max(psi0.at(nx - 1, j).abs()))
        .fold(0.0, f64::max);
    if peak > 0.0 && edge > 1e-10 * peak {
        return Err(Error::Precondition(format!(
            "ψ₀ is not concentrated away from the x₁ edges (edge/peak = {:e})",
            edge / peak
        )));
    }
    // coefficients on the half-step lattice
    let fine = Grid::new(2 * nx, ny, g.lx(), g.ly())?;
    let a = s.dx1().resample(&fine).to_real();
    let b = s.dx2().resample(&fine).to_real();
    let col = |f: &RealField, i: usize| -> Vec<f64> { (0..ny).map(|j| f.at(i % (2 * nx), j)).collect() };
    let d2 = ColumnDx2::new(g);
    let rhs = |i_fine: usize, w: &[f64]| -> Vec<f64> {
        let (ca, cb) = (col(&a, i_fine), col(&b, i_fine));
        let dw = d2.apply(w);
        (0..ny).map(|j| (cb[j] + ca[j] * dw[j]) / (1.0 + cb[j])).collect()
    };
    let h = g.dx();
    let mut out = vec![0.0; g.len()];
    let mut w = vec![0.0; ny];
    for i in 0..nx - 1 {
        let k1 = rhs(2 * i, &w);
        let t: Vec<f64> = (0..ny).map(|j| w[j] + 0.5 * h * k1[j]).collect();
        let k2 = rhs(2 * i + 1, &t);
        let t: Vec<f64> = (0..ny).map(|j| w[j] + 0.5 * h * k2[j]).collect();
        let k3 = rhs(2 * i + 1, &t);
        let t: Vec<f64> = (0..ny).map(|j| w[j] + h * k3[j]).collect();
        let k4 = rhs(2 * i + 2, &t);
        for j in 0..ny {
            w[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            out[g.idx(i + 1, j)] = w[j];
        }
    }
    let tail_jump = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(CompanionPotential {
        field: RealField::from_vec(g, out),
        boundary: X1Boundary::Clamped,
        tail_jump,
    })
}

/// Pointwise `det U₀ = (1+∂₂ψ₀)(1−∂₁ψ̃₀) + ∂₂ψ̃₀∂₁ψ₀`.
pub fn det_u0(psi0: &RealField, psitilde0: &CompanionPotential) -> Result<RealField> {
    if psi0.grid() != psitilde0.field.grid() {
        return Err(Error::GridMismatch);
    }
    let gp = gradient(psi0, X1Boundary::Periodic);
    let gt = gradient(&psitilde0.field, psitilde0.boundary);
    let g = psi0.grid();
    let d = (0..g.len())
        .map(|k| {
            (1.0 + gp[1].data()[k]) * (1.0 - gt[0].data()[k]) + gt[1].data()[k] * gp[0].data()[k]
        })
        .collect();
    Ok(RealField::from_vec(g, d))
}

/// Result of the `Y₀` fixed point.
#[derive(Debug, Clone)]
pub struct FlowMapInit {
    pub y0: [RealField; 2],
    pub iterations: usize,
    pub last_change: f64,
    /// Max-norm residuals of `∂₁Y₀¹ = ∂₂ψ₀∘X₀`, `∂₂Y₀¹ = ∂₂ψ̃₀∘X₀`,
    /// `∂₁Y₀² = −∂₁ψ₀∘X₀`, `∂₂Y₀² = −∂₁ψ̃₀∘X₀`.
    pub residuals: [f64; 4],
}

/// Picard iteration of `Y₀¹ = ψ̃₀(y+Y₀)`, `Y₀² = −ψ₀(y+Y₀)` with bicubic interpolation.
pub fn build_flow_map_initial(psi0: &RealField, psitilde0: &CompanionPotential) -> Result<FlowMapInit> {
    let g = psi0.grid();
    if psitilde0.field.grid() != g {
        return Err(Error::GridMismatch);
    }
    let bd = psitilde0.boundary;
    let gp = gradient(psi0, X1Boundary::Periodic);
    let gt = gradient(&psitilde0.field, bd);
    let size = gp[0].max_abs().max(gp[1].max_abs()) + gt[0].max_abs().max(gt[1].max_abs());
    if size > EPS0 {
        return Err(Error::Precondition(format!(
            "‖∇ψ₀‖∞ + ‖∇ψ̃₀‖∞ = {size} exceeds {EPS0}"
        )));
    }
    let nodes = |y: &[RealField; 2]| -> [RealField; 2] {
        [
            RealField::from_fn(g, |x, _| x).zip_map(&y[0], |a, b| a + b),
            RealField::from_fn(g, |_, x| x).zip_map(&y[1], |a, b| a + b),
        ]
    };
    let mut y = [RealField::zeros(g), RealField::zeros(g)];
    let mut last_change = f64::INFINITY;
    let mut prev_change = f64::INFINITY;
    let mut growth = 0;
    let max_iter = 100;
    for it in 1..=max_iter {
        let pts = nodes(&y);
        let next = [
            sample_at(&psitilde0.field, &pts, bd),
            sample_at(psi0, &pts, X1Boundary::Periodic).scale(-1.0),
        ];
        let change = (&next[0] - &y[0]).max_abs().max((&next[1] - &y[1]).max_abs());
        y = next;
        growth = if change > prev_change { growth + 1 } else { 0 };
        prev_change = change;
        last_change = change;
        if change < 1e-12 {
            let residuals = gradient_residuals(psi0, psitilde0, &y);
            return Ok(FlowMapInit {
                y0: y,
                iterations: it,
                last_change,
                residuals,
            });
        }
        if growth >= 3 {
            return Err(Error::NoConvergence {
                iterations: it,
                last_change,
                contraction: change / prev_change.max(1e-300),
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_change,
        contraction: size,
    })
}

fn gradient_residuals(psi0: &RealField, psitilde0: &CompanionPotential, y0: &[RealField; 2]) -> [f64; 4] {
    let g = psi0.grid();
    let bd = psitilde0.boundary;
    let gp = gradient(psi0, X1Boundary::Periodic);
    let gt = gradient(&psitilde0.field, bd);
    let pts = [
        RealField::from_fn(g, |x, _| x).zip_map(&y0[0], |a, b| a + b),
        RealField::from_fn(g, |_, x| x).zip_map(&y0[1], |a, b| a + b),
    ];
    let gy1 = gradient(&y0[0], bd);
    let gy2 = gradient(&y0[1], bd);
    let at = |f: &RealField, b: X1Boundary| sample_at(f, &pts, b);
    let r = |lhs: &RealField, rhs: RealField| (lhs - &rhs).max_abs();
    [
        r(&gy1[0], at(&gp[1], X1Boundary::Periodic)),
        r(&gy1[1], at(&gt[1], bd)),
        r(&gy2[0], at(&gp[0], X1Boundary::Periodic).scale(-1.0)),
        r(&gy2[1], at(&gt[0], bd).scale(-1.0)),
    ]
}

/// `Y₁(y) = u₀(y + Y₀(y))` by bicubic interpolation.
pub fn seed_lagrangian_velocity(u0: &[RealField; 2], y0: &[RealField; 2]) -> [RealField; 2] {
    let g = u0[0].grid();
    let pts = [
        RealField::from_fn(g, |x, _| x).zip_map(&y0[0], |a, b| a + b),
        RealField::from_fn(g, |_, x| x).zip_map(&y0[1], |a, b| a + b),
    ];
    [
        sample_at(&u0[0], &pts, X1Boundary::Periodic),
        sample_at(&u0[1], &pts, X1Boundary::Periodic),
    ]
}

/// `∇_{Y₀}·Y₁ = Σ b_{ℓj}∂_ℓY₁ʲ` with the adjugate of `I + ∇Y₀`, pointwise.
pub fn lagrangian_divergence(y0: &[RealField; 2], y1: &[RealField; 2], boundary: X1Boundary) -> RealField {
    let gy1 = gradient(&y0[0], boundary);
    let gy2 = gradient(&y0[1], boundary);
    let gv1 = gradient(&y1[0], boundary);
    let gv2 = gradient(&y1[1], boundary);
    let g = y0[0].grid();
    let d = (0..g.len())
        .map(|k| {
            let b11 = 1.0 + gy2[1].data()[k];
            let b12 = -gy1[1].data()[k];
            let b21 = -gy2[0].data()[k];
            let b22 = 1.0 + gy1[0].data()[k];
            b11 * gv1[0].data()[k] + b21 * gv1[1].data()[k] + b12 * gv2[0].data()[k] + b22 * gv2[1].data()[k]
        })
        .collect();
    RealField::from_vec(g, d)
}

/// Eulerian and Lagrangian initial fields together.
#[derive(Debug, Clone)]
pub struct InitialDatum {
    pub psi0: RealField,
    pub psitilde0: CompanionPotential,
    pub u0: [RealField; 2],
    pub y0: [RealField; 2],
    pub y1: [RealField; 2],
}

impl InitialDatum {
    pub fn zero(grid: &Grid) -> Self {
        let z = RealField::zeros(grid);
        InitialDatum {
            psi0: z.clone(),
            psitilde0: CompanionPotential::periodic(z.clone()),
            u0: [z.clone(), z.clone()],
            y0: [z.clone(), z.clone()],
            y1: [z.clone(), z],
        }
    }

    /// Periodic data: `X₀` is the time-one flow of `transport`, `u₀ = ∇^⊥ω`.
    pub fn from_flow(grid: &Grid, transport: &StreamFunction, velocity: &StreamFunction, steps: usize) -> Self {
        let y0 = flow_displacement(grid, transport, 1.0, steps);
        let back = flow_displacement(grid, &StreamFunction { amplitude: -transport.amplitude, ..transport.clone() }, 1.0, steps);
        let psi0 = back[1].clone();
        let psitilde0 = back[0].scale(-1.0);
        let u0 = velocity.sample_velocity(grid);
        let mut v1 = Vec::with_capacity(grid.len());
        let mut v2 = Vec::with_capacity(grid.len());
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                let k = grid.idx(i, j);
                let u = velocity.velocity(grid.x1(i) + y0[0].data()[k], grid.x2(j) + y0[1].data()[k]);
                v1.push(u[0]);
                v2.push(u[1]);
            }
        }
        InitialDatum {
            psi0,
            psitilde0: CompanionPotential::periodic(psitilde0),
            u0,
            y0,
            y1: [RealField::from_vec(grid, v1), RealField::from_vec(grid, v2)],
        }
    }

    /// Strip data: companion potential by marching, `Y₀` by fixed point, `Y₁` by composition.
    pub fn from_potential(psi0: RealField, u0: [RealField; 2]) -> Result<(Self, FlowMapInit)> {
        let psitilde0 = solve_companion_potential(&psi0)?;
        let init = build_flow_map_initial(&psi0, &psitilde0)?;
        let y1 = seed_lagrangian_velocity(&u0, &init.y0);
        Ok((
            InitialDatum {
                psi0,
                psitilde0,
                u0,
                y0: init.y0.clone(),
                y1,
            },
            init.clone(),
        ))
    }

    pub fn boundary(&self) -> X1Boundary {
        self.psitilde0.boundary
    }

    pub fn grid(&self) -> &Grid {
        self.psi0.grid()
    }

    pub fn scaled_velocity(&self, c: f64) -> [RealField; 2] {
        [self.u0[0].scale(c), self.u0[1].scale(c)]
    }
}

/// Smallness norms of one datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport {
    pub k: u32,
    pub s: f64,
    pub s1: f64,
    pub s2: f64,
    /// `‖ψ₀‖_{A_{k+1,s}}`
    pub psi0_a: f64,
    pub psi0_a_truncated: bool,
    /// `‖u₀‖_{Ḣ^{k−1}} + ‖u₀‖_{Ḣ^{s₂}}`
    pub u0_hk_s2: f64,
    /// `‖∇ψ₀‖_{Ḣ^{s₁+1}} + ‖∇ψ₀‖_{Ḣ^{s₂}}`
    pub grad_psi0: f64,
    /// `‖∇ψ̃₀‖_{Ḣ^{s₁+1}} + ‖∇ψ̃₀‖_{Ḣ^{s₂+1}}` (periodic data only)
    pub grad_psitilde0: Option<f64>,
    /// `‖u₀‖_{Ḣ^{s₁+1}} + ‖u₀‖_{Ḣ^{s₂}}`
    pub u0_s1_s2: f64,
    /// `‖∂₁Y₀‖_{Ḣ^{s₂}}`
    pub d1_y0_s2: Option<f64>,
    /// `‖ΔY₀‖_{Ḣ^{s₁}} + ‖ΔY₀‖_{Ḣ^{s₂}}`
    pub lap_y0: Option<f64>,
    /// `‖Y₁‖_{Ḣ^{s₁+1}} + ‖Y₁‖_{Ḣ^{s₂}}`
    pub y1_s1_s2: Option<f64>,
    /// `‖ψ̃₀‖_{H^k}`
    pub psitilde0_hk: f64,
    /// `‖ψ̃₀‖_{H^k} / ‖ψ₀‖_{A_{k+1,s}}`
    pub companion_ratio: Option<f64>,
}

fn hom2(v: &[RealField; 2], s: f64) -> Result<f64> {
    let a = sobolev_norm(&v[0].to_spectral(), s, true)?;
    let b = sobolev_norm(&v[1].to_spectral(), s, true)?;
    Ok((a * a + b * b).sqrt())
}

fn strip_hk(f: &RealField, boundary: X1Boundary, k: u32) -> f64 {
    let mut total = 0.0;
    let mut row = vec![f.clone()];
    for order in 0..=k {
        for d in &row {
            total += d.l2_norm().powi(2);
        }
        if order == k {
            break;
        }
        let mut next = Vec::with_capacity(row.len() + 1);
        for (idx, d) in row.iter().enumerate() {
            let gr = gradient(d, boundary);
            if idx == 0 {
                next.push(gr[0].clone());
            }
            next.push(gr[1].clone());
        }
        row = next;
    }
    total.sqrt()
}

/// Evaluates the smallness hypotheses. Norms needing Fourier series of `Y₀`,
/// `Y₁` or `ψ̃₀` are omitted for strip data.
pub fn smallness_report(datum: &InitialDatum, k: u32, s: f64, s1: f64, s2: f64) -> Result<SmallnessReport> {
    let periodic = datum.boundary() == X1Boundary::Periodic;
    let aks = a_ks_norm(&datum.psi0, k + 1, s);
    let gp = crate::grid::to_spectral2(&gradient(&datum.psi0, X1Boundary::Periodic)).map(|f| f.to_real());
    let grad_psi0 = hom2(&gp, s1 + 1.0)? + hom2(&gp, s2)?;
    let u0_hk_s2 = hom2(&datum.u0, k as f64 - 1.0)? + hom2(&datum.u0, s2)?;
    let u0_s1_s2 = hom2(&datum.u0, s1 + 1.0)? + hom2(&datum.u0, s2)?;
    let psitilde0_hk = strip_hk(&datum.psitilde0.field, datum.boundary(), k);
    let (grad_psitilde0, d1_y0_s2, lap_y0, y1_s1_s2) = if periodic {
        let gt = gradient(&datum.psitilde0.field, X1Boundary::Periodic);
        let d1: [RealField; 2] = [
            crate::grid::spectral_derivative(&datum.y0[0], Axis::X1, 1),
            crate::grid::spectral_derivative(&datum.y0[1], Axis::X1, 1),
        ];
        let lap: [RealField; 2] = [
            datum.y0[0].to_spectral().laplacian().to_real(),
            datum.y0[1].to_spectral().laplacian().to_real(),
        ];
        (
            Some(hom2(&gt, s1 + 1.0)? + hom2(&gt, s2 + 1.0)?),
            Some(hom2(&d1, s2)?),
            Some(hom2(&lap, s1)? + hom2(&lap, s2)?),
            Some(hom2(&datum.y1, s1 + 1.0)? + hom2(&datum.y1, s2)?),
        )
    } else {
        (None, None, None, None)
    };
    let companion_ratio = (aks.value > 0.0).then(|| psitilde0_hk / aks.value);
    Ok(SmallnessReport {
        k,
        s,
        s1,
        s2,
        psi0_a: aks.value,
        psi0_a_truncated: aks.truncation_warning,
        u0_hk_s2,
        grad_psi0,
        grad_psitilde0,
        u0_s1_s2,
        d1_y0_s2,
        lap_y0,
        y1_s1_s2,
        psitilde0_hk,
        companion_ratio,
    })
}

/// Bicubic evaluation of a field with value and gradient, exported for diagnostics.
pub fn eval_grad(f: &RealField, boundary: X1Boundary, x1: f64, x2: f64) -> (f64, f64, f64) {
    Bicubic::with_boundary(f, boundary).eval_grad(x1, x2)
}
