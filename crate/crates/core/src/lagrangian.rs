//! Flow-map formulation. With `X(t,y) = y + Y(t,y)`:
//!
//! ```text
//! Y_tt − ΔY_t − ∂₁²Y = f(Y,q) = (∇_Y·∇_Y − Δ)Y_t − ∇_Y q
//! ∇_Y·Y_t = 0,   ∇·Y = ρ(Y) = ∂₁Y²∂₂Y¹ − ∂₁Y¹∂₂Y²
//! ```
//!
//! with `∇_Y = 𝓐_Yᵀ∇` and `𝓐_Y = [[1+∂₂Y², −∂₂Y¹], [−∂₁Y², 1+∂₁Y¹]]`.
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::etd::EtdTable;
use crate::eulerian::EulerState;
use crate::grid::{Grid, RealField, SpectralField};
use crate::interp::{compose_nodes, sample_at, Bicubic, X1Boundary};
use crate::linear::lagrangian_table;
use crate::ops::{self, pointwise, Field2};

/// `(Y, Y_t, q)` at time `t`.
#[derive(Debug, Clone)]
pub struct FlowMapState {
    pub y: Field2,
    pub yt: Field2,
    pub q: RealField,
    pub t: f64,
}

impl FlowMapState {
    pub fn zero(grid: &Grid) -> Self {
        let z = RealField::zeros(grid);
        FlowMapState {
            y: [z.clone(), z.clone()],
            yt: [z.clone(), z.clone()],
            q: z,
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.q.grid()
    }
}

/// Entries of `𝓐_Y` at every node.
#[derive(Debug, Clone)]
pub struct AdjugateField {
    pub b11: RealField,
    pub b12: RealField,
    pub b21: RealField,
    pub b22: RealField,
}

impl AdjugateField {
    pub fn identity(grid: &Grid) -> Self {
        let (o, z) = (RealField::constant(grid, 1.0), RealField::zeros(grid));
        AdjugateField {
            b11: o.clone(),
            b12: z.clone(),
            b21: z,
            b22: o,
        }
    }

    /// `Σ_j b_{mj} v^j`.
    pub fn apply(&self, v: &Field2) -> Field2 {
        [
            pointwise([&self.b11, &self.b12, &v[0], &v[1]], |[a, b, x, y]| a * x + b * y),
            pointwise([&self.b21, &self.b22, &v[0], &v[1]], |[a, b, x, y]| a * x + b * y),
        ]
    }

    /// `Σ_m b_{mj} v^m`.
    pub fn apply_transpose(&self, v: &Field2) -> Field2 {
        [
            pointwise([&self.b11, &self.b21, &v[0], &v[1]], |[a, b, x, y]| a * x + b * y),
            pointwise([&self.b12, &self.b22, &v[0], &v[1]], |[a, b, x, y]| a * x + b * y),
        ]
    }
}

/// `grad_y[i][j] = ∂ⱼYⁱ`.
pub fn adjugate(grad_y: &[Field2; 2]) -> AdjugateField {
    AdjugateField {
        b11: grad_y[1][1].map(|v| 1.0 + v),
        b12: grad_y[0][1].scale(-1.0),
        b21: grad_y[1][0].scale(-1.0),
        b22: grad_y[0][0].map(|v| 1.0 + v),
    }
}

/// `det(I + ∇Y)` pointwise.
pub fn det_field(grad_y: &[Field2; 2]) -> RealField {
    pointwise(
        [&grad_y[0][0], &grad_y[0][1], &grad_y[1][0], &grad_y[1][1]],
        |[a, b, c, d]| (1.0 + a) * (1.0 + d) - b * c,
    )
}

/// `ρ(Y) = ∂₁Y²∂₂Y¹ − ∂₁Y¹∂₂Y²`, dealiased.
pub fn rho(y: &Field2) -> RealField {
    rho_from(&ops::jacobian(y))
}

fn rho_from(j: &[Field2; 2]) -> RealField {
    let r = pointwise([&j[0][0], &j[0][1], &j[1][0], &j[1][1]], |[a, b, c, d]| c * b - a * d);
    ops::dealiased(&r)
}

/// `∇_Y q = 𝓐ᵀ∇q`.
pub fn lagrangian_gradient(q: &RealField, adj: &AdjugateField) -> Field2 {
    adj.apply_transpose(&ops::grad(q))
}

/// `∇_Y·v = ∇·(𝓐v)`, evaluated as `Σ b_{mj}∂_m vʲ`.
pub fn lagrangian_divergence(v: &Field2, adj: &AdjugateField) -> RealField {
    let jv = ops::jacobian(v);
    pointwise(
        [&adj.b11, &adj.b12, &adj.b21, &adj.b22, &jv[0][0], &jv[0][1], &jv[1][0], &jv[1][1]],
        |[b11, b12, b21, b22, a, b, c, d]| b11 * a + b21 * b + b12 * c + b22 * d,
    )
}

/// `𝓐_Y·(1+∂₁Y¹, ∂₁Y²) − (det(I+∇Y), 0)`.
pub fn magnetic_pullback_check(y: &Field2) -> Field2 {
    let j = ops::jacobian(y);
    let adj = adjugate(&j);
    let det = det_field(&j);
    let b = [j[0][0].map(|v| 1.0 + v), j[1][0].clone()];
    let r = adj.apply(&b);
    [&r[0] - &det, r[1].clone()]
}

/// `∇_Y·∂₁²Y` in the two divergence forms
/// (i) `∇·((𝓐−I)∂₁²Y) + ∂₁²ρ(Y)` and
/// (ii) `∂₁(∂₂Y²∂₁²Y¹ + ∂₁Y²∂₁∂₂Y¹ − ∂₁(∂₁Y¹∂₂Y²)) + ∂₂(−∂₁Y²∂₁²Y¹ + ∂₁Y¹∂₁²Y²)`.
pub fn stretching_forms(y: &Field2) -> (RealField, RealField) {
    let j = ops::jacobian(y);
    let s: [SpectralField; 2] = [y[0].to_spectral(), y[1].to_spectral()];
    let d11: Field2 = std::array::from_fn(|c| s[c].derivative(crate::grid::Axis::X1, 2).to_real());
    let d12y1 = s[0].dx1().dx2().to_real();
    let adj = adjugate(&j);
    let a_minus = AdjugateField {
        b11: adj.b11.map(|v| v - 1.0),
        b12: adj.b12,
        b21: adj.b21,
        b22: adj.b22.map(|v| v - 1.0),
    };
    let mut f1 = ops::div_spectral(&a_minus.apply(&d11));
    let r = pointwise([&j[0][0], &j[0][1], &j[1][0], &j[1][1]], |[a, b, c, d]| c * b - a * d);
    f1 += &r.to_spectral().derivative(crate::grid::Axis::X1, 2);
    let inner = pointwise([&j[0][0], &j[1][1]], |[a, d]| a * d).to_spectral().dx1().to_real();
    let v1 = pointwise(
        [&j[1][1], &d11[0], &j[1][0], &d12y1, &inner],
        |[y22, a, y21, m, i]| y22 * a + y21 * m - i,
    );
    let v2 = pointwise([&j[1][0], &d11[0], &j[0][0], &d11[1]], |[y21, a, y11, b]| -y21 * a + y11 * b);
    let f2 = ops::div_spectral(&[v1, v2]);
    (f1.dealias().to_real(), f2.dealias().to_real())
}

/// Outcome of the pressure fixed point.
#[derive(Debug, Clone)]
pub struct PressureSolve {
    pub q: RealField,
    pub iterations: usize,
    pub last_change: f64,
    /// `‖form (i) − form (ii)‖_{L∞}` of `∇_Y·∂₁²Y`.
    pub forms_gap: f64,
}

/// Solves `∇·(𝓐𝓐ᵀ∇q) = g` by `q ← Δ⁻¹(g − ∇·((𝓐𝓐ᵀ − I)∇q))`, stopping when the
/// successive `L²` change is below `tol·‖q‖`.
pub fn solve_lagrangian_poisson(
    adj: &AdjugateField,
    source: &SpectralField,
    guess: Option<&RealField>,
    tol: f64,
    max_iter: usize,
) -> Result<(RealField, usize, f64)> {
    let g = source.grid().clone();
    let k11 = pointwise([&adj.b11, &adj.b12], |[a, b]| a * a + b * b - 1.0);
    let k12 = pointwise([&adj.b11, &adj.b12, &adj.b21, &adj.b22], |[a, b, c, d]| a * c + b * d);
    let k22 = pointwise([&adj.b21, &adj.b22], |[c, d]| c * c + d * d - 1.0);
    let mut q = guess.cloned().unwrap_or_else(|| RealField::zeros(&g));
    let (mut last, mut prev) = (f64::INFINITY, f64::INFINITY);
    for it in 1..=max_iter {
        let gq = ops::grad(&q);
        let flux = [
            pointwise([&k11, &k12, &gq[0], &gq[1]], |[a, b, x, y]| a * x + b * y),
            pointwise([&k12, &k22, &gq[0], &gq[1]], |[a, b, x, y]| a * x + b * y),
        ];
        let rhs = source - &ops::div_spectral(&flux);
        let next = rhs.dealias().inverse_laplacian().to_real();
        let change = (&next - &q).l2_norm();
        let scale = next.l2_norm();
        q = next;
        prev = last;
        last = change;
        if change <= tol * scale || scale == 0.0 {
            return Ok((q, it, change));
        }
        if !change.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_change: last,
        contraction: last / prev,
    })
}

/// Lagrangian pressure from `Δq = −∇·((𝓐−I)𝓐ᵀ∇q) − ∇·((𝓐ᵀ−I)∇q) + ∇·(∂_t𝓐 Y_t) + ∇_Y·∂₁²Y`.
pub fn pressure_solve(
    y: &Field2,
    yt: &Field2,
    guess: Option<&RealField>,
    tol: f64,
    max_iter: usize,
) -> Result<PressureSolve> {
    let j = ops::jacobian(y);
    if ops::frobenius_inf(&j) > 0.5 {
        return Err(Error::Precondition("‖∇Y‖∞ exceeds 1/2".into()));
    }
    let adj = adjugate(&j);
    let (form_i, form_ii) = stretching_forms(y);
    let source = pressure_source(yt, &form_i);
    let (q, iterations, last_change) = solve_lagrangian_poisson(&adj, &source, guess, tol, max_iter)?;
    Ok(PressureSolve {
        q,
        iterations,
        last_change,
        forms_gap: (&form_i - &form_ii).max_abs(),
    })
}

fn pressure_source(yt: &Field2, stretching: &RealField) -> SpectralField {
    let jt = ops::jacobian(yt);
    // ∂_t𝓐 has the entry pattern of 𝓐 − I applied to Y_t
    let dta = adjugate(&jt);
    let dta = AdjugateField {
        b11: dta.b11.map(|v| v - 1.0),
        b12: dta.b12,
        b21: dta.b21,
        b22: dta.b22.map(|v| v - 1.0),
    };
    let mut s = ops::div_spectral(&dta.apply(yt));
    s += &stretching.to_spectral();
    s.dealias()
}

/// Viscous part `(∇_Y·∇_Y − Δ)Y_t` in the direct form.
pub fn viscous_direct(adj: &AdjugateField, yt: &Field2) -> Field2 {
    std::array::from_fn(|c| {
        let w = lagrangian_gradient(&yt[c], adj);
        let v = lagrangian_divergence(&w, adj);
        &v - &ops::laplacian(&yt[c])
    })
}

/// Viscous part as `∂₁𝐅₁ + ∂₂𝐅₂` with
/// `𝐅₁ = (2∂₂Y² + |∂₂Y|²)∂₁Y_t − (1+∂₂Y²)∂₁Y²∂₂Y_t − (1+∂₁Y¹)∂₂Y¹∂₂Y_t` and
/// `𝐅₂ = (2∂₁Y¹ + |∂₁Y|²)∂₂Y_t − (1+∂₂Y²)∂₁Y²∂₁Y_t − (1+∂₁Y¹)∂₂Y¹∂₁Y_t`.
pub fn viscous_divergence_form(y: &Field2, yt: &Field2) -> Field2 {
    let j = ops::jacobian(y);
    let [[y11, y12], [y21, y22]] = &j;
    let c11 = pointwise([y22, y12], |[a, b]| 2.0 * a + a * a + b * b);
    let c22 = pointwise([y11, y21], |[a, b]| 2.0 * a + a * a + b * b);
    let c12 = pointwise([y22, y21, y11, y12], |[a, b, c, d]| -(1.0 + a) * b - (1.0 + c) * d);
    std::array::from_fn(|c| {
        let gt = ops::grad(&yt[c]);
        let f1 = pointwise([&c11, &c12, &gt[0], &gt[1]], |[a, b, x, y]| a * x + b * y);
        let f2 = pointwise([&c22, &c12, &gt[1], &gt[0]], |[a, b, x, y]| a * x + b * y);
        ops::div(&[f1, f2])
    })
}

/// `f(Y, q) = (∇_Y·∇_Y − Δ)Y_t − ∇_Y q` (direct form, not dealiased).
pub fn rhs_f(y: &Field2, yt: &Field2, q: &RealField) -> Field2 {
    let adj = adjugate(&ops::jacobian(y));
    let v = viscous_direct(&adj, yt);
    let gq = lagrangian_gradient(q, &adj);
    ops::sub2(&v, &gq)
}

/// `f` with the viscous part in divergence form.
pub fn rhs_f_divergence(y: &Field2, yt: &Field2, q: &RealField) -> Field2 {
    let adj = adjugate(&ops::jacobian(y));
    let v = viscous_divergence_form(y, yt);
    ops::sub2(&v, &lagrangian_gradient(q, &adj))
}

/// `u∘Φ` with `Φ(y) = y + Ψ(y)`, bicubic.
pub fn compose(u: &RealField, displacement: &Field2) -> Result<RealField> {
    let j = ops::jacobian(displacement);
    let n = ops::frobenius_inf(&j);
    if n >= 1.0 {
        return Err(Error::Precondition(format!("‖∇Ψ‖∞ = {n} is not below 1")));
    }
    Ok(compose_nodes(u, displacement, X1Boundary::Periodic))
}

/// Displacement `X⁻¹(x) − x` at every node by Newton on the bicubic interpolant of `Y`.
pub fn invert_flow_map(y: &Field2) -> Result<Field2> {
    let g = y[0].grid();
    if ops::frobenius_inf(&ops::jacobian(y)) > 0.5 {
        return Err(Error::Precondition("‖∇Y‖∞ exceeds 1/2".into()));
    }
    let b1 = Bicubic::new(&y[0]);
    let b2 = Bicubic::new(&y[1]);
    let mut d0 = Vec::with_capacity(g.len());
    let mut d1 = Vec::with_capacity(g.len());
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let x = [g.x1(i), g.x2(j)];
            let k = g.idx(i, j);
            let mut p = [x[0] - y[0].data()[k], x[1] - y[1].data()[k]];
            let mut done = false;
            for _ in 0..50 {
                let (v1, a, b) = b1.eval_grad(p[0], p[1]);
                let (v2, c, d) = b2.eval_grad(p[0], p[1]);
                let r = [p[0] + v1 - x[0], p[1] + v2 - x[1]];
                if r[0].abs().max(r[1].abs()) < 1e-13 {
                    done = true;
                    break;
                }
                let (m11, m12, m21, m22) = (1.0 + a, b, c, 1.0 + d);
                let det = m11 * m22 - m12 * m21;
                p[0] -= (m22 * r[0] - m12 * r[1]) / det;
                p[1] -= (-m21 * r[0] + m11 * r[1]) / det;
            }
            if !done {
                return Err(Error::NoConvergence {
                    iterations: 50,
                    last_change: f64::NAN,
                    contraction: f64::NAN,
                });
            }
            d0.push(p[0] - x[0]);
            d1.push(p[1] - x[1]);
        }
    }
    Ok([RealField::from_vec(g, d0), RealField::from_vec(g, d1)])
}

/// Zero-mean potential with gradient closest to `v`, and `‖curl v‖/‖∇v‖`.
pub fn integrate_gradient(v: &Field2) -> (RealField, f64) {
    let s = [v[0].to_spectral(), v[1].to_spectral()];
    let mut d = s[0].dx1();
    d += &s[1].dx2();
    let phi = d.inverse_laplacian().to_real();
    let curl = (&s[1].dx1() - &s[0].dx2()).l2_norm();
    let full = (s[0].dx1().l2_norm().powi(2)
        + s[0].dx2().l2_norm().powi(2)
        + s[1].dx1().l2_norm().powi(2)
        + s[1].dx2().l2_norm().powi(2))
    .sqrt();
    (phi, if full > 0.0 { curl / full } else { 0.0 })
}

/// Eulerian fields recovered from a flow-map state.
#[derive(Debug, Clone)]
pub struct EulerianView {
    pub state: EulerState,
    pub psitilde: RealField,
    /// Relative curl of the recovered `∇ψ` and `∇ψ̃`.
    pub curl_residual: [f64; 2],
    pub inverse: Field2,
}

/// `u = Y_t∘X⁻¹`, `∇ψ = (−∂₁Y², ∂₁Y¹)∘X⁻¹`, `∇ψ̃ = (−∂₂Y², ∂₂Y¹)∘X⁻¹`,
/// `p = q∘X⁻¹ − |∇(x₂+ψ)|²` (zero mean).
pub fn to_eulerian(state: &FlowMapState) -> Result<EulerianView> {
    let inv = invert_flow_map(&state.y)?;
    let pts = ops::displaced_nodes(&inv);
    let at = |f: &RealField| sample_at(f, &pts, X1Boundary::Periodic);
    let j = ops::jacobian(&state.y);
    let gpsi = [at(&j[1][0]).scale(-1.0), at(&j[0][0])];
    let gtil = [at(&j[1][1]).scale(-1.0), at(&j[0][1])];
    let (psi, c1) = integrate_gradient(&gpsi);
    let (psitilde, c2) = integrate_gradient(&gtil);
    let u = [at(&state.yt[0]), at(&state.yt[1])];
    let p = pointwise([&at(&state.q), &gpsi[0], &gpsi[1]], |[q, a, b]| q - a * a - (1.0 + b).powi(2));
    Ok(EulerianView {
        state: EulerState {
            psi,
            u,
            p: p.remove_mean(),
            t: state.t,
        },
        psitilde,
        curl_residual: [c1, c2],
        inverse: inv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangianConfig {
    pub dt: f64,
    #[serde(default = "default_tol")]
    pub pressure_tol: f64,
    #[serde(default = "default_iter")]
    pub pressure_max_iter: usize,
    /// Drop `f` entirely.
    #[serde(default)]
    pub linear_only: bool,
    /// Project `Y` back onto `∇·Y = ρ(Y)` after every step.
    #[serde(default)]
    pub divergence_correction: bool,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_iter() -> usize {
    200
}

impl LagrangianConfig {
    pub fn new(dt: f64) -> Self {
        LagrangianConfig {
            dt,
            pressure_tol: default_tol(),
            pressure_max_iter: default_iter(),
            linear_only: false,
            divergence_correction: false,
        }
    }
}

/// Invariant monitors of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub t: f64,
    /// `max|det(I+∇Y) − 1|`
    pub det_err: f64,
    /// `‖∇·Y − ρ(Y)‖_{L²}`
    pub constraint_err: f64,
    /// `‖∇_Y·Y_t‖_{L²}`
    pub div_err: f64,
    /// pointwise max of `|∇Y|`
    pub grad_inf: f64,
    /// `½(‖Y_t‖² + ‖∂₁Y‖²)`
    pub energy: f64,
    /// `‖∇_Y Y_t‖²`
    pub dissipation: f64,
    pub pressure_iterations: usize,
}

pub fn monitor(state: &FlowMapState, pressure_iterations: usize) -> Monitor {
    let j = ops::jacobian(&state.y);
    let adj = adjugate(&j);
    let det = det_field(&j);
    let c = &(&ops::div(&state.y) - &rho_from(&j));
    let div_err = lagrangian_divergence(&state.yt, &adj).l2_norm();
    let d1 = [j[0][0].clone(), j[1][0].clone()];
    let grad_t: [Field2; 2] = std::array::from_fn(|k| lagrangian_gradient(&state.yt[k], &adj));
    Monitor {
        t: state.t,
        det_err: det.map(|v| v - 1.0).max_abs(),
        constraint_err: c.l2_norm(),
        div_err,
        grad_inf: ops::frobenius_inf(&j),
        energy: 0.5 * (ops::l2_norm2(&state.yt).powi(2) + ops::l2_norm2(&d1).powi(2)),
        dissipation: ops::l2_norm2(&grad_t[0]).powi(2) + ops::l2_norm2(&grad_t[1]).powi(2),
        pressure_iterations,
    }
}

/// Exponential stepper: the linear symbol exactly per mode, `f` by ETD2
/// (ETD2RK on the first step), `q` refreshed at every evaluation of `f`.
pub struct LagrangianSolver {
    cfg: LagrangianConfig,
    table: EtdTable,
    grid: Grid,
    y: [SpectralField; 2],
    yt: [SpectralField; 2],
    q: RealField,
    t: f64,
    prev_f: Option<[SpectralField; 2]>,
    last_iterations: usize,
    steps: usize,
}

impl LagrangianSolver {
    /// Dealiases `(Y₀, Y₁)` and solves for `q` at the initial time.
    pub fn new(y0: &Field2, y1: &Field2, cfg: LagrangianConfig) -> Result<Self> {
        if !(cfg.dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        let grid = y0[0].grid().clone();
        for f in y0.iter().chain(y1) {
            if *f.grid() != grid {
                return Err(Error::GridMismatch);
            }
            if let Some(k) = f.data().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(k));
            }
        }
        let y = [y0[0].to_spectral().dealias(), y0[1].to_spectral().dealias()];
        let yt = [y1[0].to_spectral().dealias(), y1[1].to_spectral().dealias()];
        let mut s = LagrangianSolver {
            table: lagrangian_table(&grid, cfg.dt),
            q: RealField::zeros(&grid),
            grid,
            cfg,
            y,
            yt,
            t: 0.0,
            prev_f: None,
            last_iterations: 0,
            steps: 0,
        };
        s.check_gradient()?;
        if !cfg.linear_only {
            let (y, yt) = (s.real(&s.y), s.real(&s.yt));
            let p = pressure_solve(&y, &yt, None, cfg.pressure_tol, cfg.pressure_max_iter)?;
            s.q = p.q;
            s.last_iterations = p.iterations;
        }
        Ok(s)
    }

    fn real(&self, v: &[SpectralField; 2]) -> Field2 {
        [v[0].to_real(), v[1].to_real()]
    }

    fn check_gradient(&self) -> Result<()> {
        let n = ops::frobenius_inf(&ops::jacobian(&self.real(&self.y)));
        if !(n <= 0.5) {
            return Err(Error::Aborted {
                t: self.t,
                reason: format!("‖∇Y‖∞ = {n} exceeds 1/2"),
            });
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn config(&self) -> &LagrangianConfig {
        &self.cfg
    }

    pub fn state(&self) -> FlowMapState {
        FlowMapState {
            y: self.real(&self.y),
            yt: self.real(&self.yt),
            q: self.q.clone(),
            t: self.t,
        }
    }

    pub fn spectral(&self) -> (&[SpectralField; 2], &[SpectralField; 2]) {
        (&self.y, &self.yt)
    }

    pub fn monitor(&self) -> Monitor {
        monitor(&self.state(), self.last_iterations)
    }

    /// `f` at a spectral state, updating the stored pressure.
    fn forcing(&mut self, y: &[SpectralField; 2], yt: &[SpectralField; 2]) -> Result<[SpectralField; 2]> {
        if self.cfg.linear_only {
            return Ok([SpectralField::zeros(&self.grid), SpectralField::zeros(&self.grid)]);
        }
        let (yr, ytr) = (self.real(y), self.real(yt));
        let p = pressure_solve(&yr, &ytr, Some(&self.q), self.cfg.pressure_tol, self.cfg.pressure_max_iter)?;
        self.q = p.q;
        self.last_iterations = p.iterations;
        let f = rhs_f(&yr, &ytr, &self.q);
        Ok([f[0].to_spectral().dealias(), f[1].to_spectral().dealias()])
    }

    fn advance(
        &self,
        y: &[SpectralField; 2],
        yt: &[SpectralField; 2],
        f: &[SpectralField; 2],
        df: Option<&[SpectralField; 2]>,
    ) -> ([SpectralField; 2], [SpectralField; 2]) {
        let (mut ny, mut nyt) = (y.clone(), yt.clone());
        let zero = Complex64::default();
        for c in 0..2 {
            for k in 0..self.grid.len() {
                let z = [y[c].data()[k], yt[c].data()[k]];
                let a = [zero, f[c].data()[k]];
                let b = [zero, df.map_or(zero, |d| d[c].data()[k])];
                let r = self.table.update(k, z, a, b);
                ny[c].data_mut()[k] = r[0];
                nyt[c].data_mut()[k] = r[1];
            }
        }
        (ny, nyt)
    }

    /// One step. Aborts when `‖∇Y‖∞ > ½` or the state is not finite; the
    /// previous state is kept in that case.
    pub fn step(&mut self) -> Result<()> {
        let saved_q = self.q.clone();
        let (y, yt) = (self.y.clone(), self.yt.clone());
        let f0 = self.forcing(&y, &yt)?;
        let (mut ny, nyt) = match self.prev_f.take() {
            Some(prev) => {
                let d = [&f0[0] - &prev[0], &f0[1] - &prev[1]];
                self.advance(&y, &yt, &f0, Some(&d))
            }
            None => {
                let (ay, ayt) = self.advance(&y, &yt, &f0, None);
                let fa = self.forcing(&ay, &ayt)?;
                let d = [&fa[0] - &f0[0], &fa[1] - &f0[1]];
                let z = [SpectralField::zeros(&self.grid), SpectralField::zeros(&self.grid)];
                let (cy, cyt) = self.advance(&z, &z, &z, Some(&d));
                (
                    [&ay[0] + &cy[0], &ay[1] + &cy[1]],
                    [&ayt[0] + &cyt[0], &ayt[1] + &cyt[1]],
                )
            }
        };
        if self.cfg.divergence_correction {
            ny = correct_constraint(&ny);
        }
        let finite = ny.iter().chain(&nyt).all(|f| f.data().iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        let old = (std::mem::replace(&mut self.y, ny), std::mem::replace(&mut self.yt, nyt));
        let bad = if finite { self.check_gradient().err() } else {
            Some(Error::Aborted { t: self.t, reason: "non-finite flow-map state".into() })
        };
        if let Some(e) = bad {
            self.y = old.0;
            self.yt = old.1;
            self.q = saved_q;
            self.prev_f = Some(f0);
            return Err(e);
        }
        self.prev_f = Some(f0);
        self.t += self.cfg.dt;
        self.steps += 1;
        Ok(())
    }

    /// Refreshes `q` for the current state (it otherwise lags one evaluation behind).
    pub fn refresh_pressure(&mut self) -> Result<()> {
        if self.cfg.linear_only {
            return Ok(());
        }
        let (y, yt) = (self.real(&self.y), self.real(&self.yt));
        let p = pressure_solve(&y, &yt, Some(&self.q), self.cfg.pressure_tol, self.cfg.pressure_max_iter)?;
        self.q = p.q;
        self.last_iterations = p.iterations;
        Ok(())
    }
}

/// `Y ← Y + ∇φ` with `Δφ = ρ(Y) − ∇·Y`.
fn correct_constraint(y: &[SpectralField; 2]) -> [SpectralField; 2] {
    let yr = [y[0].to_real(), y[1].to_real()];
    let mut d = rho(&yr).to_spectral();
    d -= &ops::div_spectral(&yr);
    let phi = d.dealias().inverse_laplacian();
    [&y[0] + &phi.dx1(), &y[1] + &phi.dx2()]
}
