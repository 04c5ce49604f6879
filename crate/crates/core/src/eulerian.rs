//! Direct solver for the perturbation system around the uniform field:
//!
//! ```text
//! ψ_t + u·∇ψ + u² = 0
//! u_t + u·∇u − Δu + (∂₁∂₂ψ, (Δ+∂₂²)ψ) = −∇p − (div[∂₁ψ∇ψ], div[∂₂ψ∇ψ])
//! div u = 0
//! ```
//!
//! `u²` is the second velocity component, not a square.
//!
//! After Leray projection a divergence-free mode carries `u = a·e^⊥` with
//! `e^⊥ = (−ξ₂, ξ₁)/|ξ|`, and the linear part acting on `(ψ̂, a)` is
//! `[[0, −ξ₁/|ξ|], [ξ₁|ξ|, −|ξ|²]]`. That matrix is stepped exactly per mode,
//! the transport and magnetic stresses explicitly (ETD2).
use std::cell::OnceCell;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::etd::{EtdTable, Mat2};
use crate::grid::{Grid, RealField, SpectralField};
use crate::ops::{self, pointwise, Field2};

/// Eulerian unknowns at one time.
#[derive(Debug, Clone)]
pub struct EulerState {
    pub psi: RealField,
    pub u: Field2,
    pub p: RealField,
    pub t: f64,
}

impl EulerState {
    pub fn zero(grid: &Grid) -> Self {
        let z = RealField::zeros(grid);
        EulerState {
            psi: z.clone(),
            u: [z.clone(), z.clone()],
            p: z,
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.psi.grid()
    }
}

/// Derivative symbol with the Nyquist entries removed, as used by `dx1`/`dx2`.
fn xi_eff(g: &Grid, i: usize, j: usize) -> (f64, f64) {
    let a = if g.is_nyquist_x(i) { 0.0 } else { g.xi1(i) };
    let b = if g.is_nyquist_y(j) { 0.0 } else { g.xi2(j) };
    (a, b)
}

/// `v − ∇Δ⁻¹(∇·v)`.
pub fn leray_project(v: &Field2) -> Field2 {
    let g = v[0].grid().clone();
    let mut a = v[0].to_spectral();
    let mut b = v[1].to_spectral();
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let (x1, x2) = xi_eff(&g, i, j);
            let k2 = x1 * x1 + x2 * x2;
            if k2 == 0.0 {
                continue;
            }
            let k = g.idx(i, j);
            let d = (a.data()[k] * x1 + b.data()[k] * x2) / k2;
            a.data_mut()[k] -= d * x1;
            b.data_mut()[k] -= d * x2;
        }
    }
    [a.to_real(), b.to_real()]
}

fn linear_matrix(xi1: f64, xi2: f64) -> Mat2 {
    let k = (xi1 * xi1 + xi2 * xi2).sqrt();
    if k == 0.0 {
        return [0.0; 4];
    }
    [0.0, -xi1 / k, xi1 * k, -k * k]
}

/// Nonlinear terms `(−u·∇ψ, −u·∇u − div(∇ψ⊗∇ψ))`, dealiased, before projection.
pub fn nonlinear_terms(psi: &RealField, u: &Field2) -> (SpectralField, [SpectralField; 2]) {
    let gp = ops::grad(psi);
    let j = ops::jacobian(u);
    let npsi = pointwise([&u[0], &u[1], &gp[0], &gp[1]], |[a, b, p, q]| -(a * p + b * q));
    let adv: Field2 = std::array::from_fn(|c| {
        pointwise([&u[0], &u[1], &j[c][0], &j[c][1]], |[a, b, p, q]| a * p + b * q)
    });
    let t11 = pointwise([&gp[0]], |[a]| a * a);
    let t12 = pointwise([&gp[0], &gp[1]], |[a, b]| a * b);
    let t22 = pointwise([&gp[1]], |[b]| b * b);
    let s12 = t12.to_spectral();
    let mag = [
        &t11.to_spectral().dx1() + &s12.dx2(),
        &s12.dx1() + &t22.to_spectral().dx2(),
    ];
    let nu = std::array::from_fn(|c| {
        let mut s = adv[c].to_spectral();
        s += &mag[c];
        s.scale(-1.0).dealias()
    });
    (npsi.to_spectral().dealias(), nu)
}

/// `p = −2∂₂ψ + (−Δ)⁻¹div(u·∇u + div(∇ψ⊗∇ψ))`, zero mean.
pub fn pressure_euler(psi: &RealField, u: &Field2) -> RealField {
    let (_, nu) = nonlinear_terms(psi, u);
    let mut d = nu[0].dx1();
    d += &nu[1].dx2();
    // nu carries the minus sign, so (−Δ)⁻¹div(−nu) = Δ⁻¹div(nu)
    let mut p = d.inverse_laplacian();
    p += &psi.to_spectral().dx2().scale(-2.0);
    p.remove_mean().to_real()
}

/// `‖∇u‖_{L∞} + ‖∇ψ‖²_{L∞}` on the twice-refined grid (pointwise Frobenius and Euclidean norms).
pub fn blowup_integrand(psi: &RealField, u: &Field2) -> Result<f64> {
    let fine = psi.grid().refined(2)?;
    let up = |f: &RealField| f.to_spectral().resample(&fine).to_real();
    let gp = ops::grad(&up(psi));
    let j = ops::jacobian(&[up(&u[0]), up(&u[1])]);
    let gu = ops::frobenius_inf(&j);
    let gpsi = pointwise([&gp[0], &gp[1]], |[a, b]| a * a + b * b).max_abs();
    Ok(gu + gpsi)
}

/// Energy `E = ½(‖∇ψ‖² + ‖u‖²)`, dissipation `D = ‖∇u‖²` and `dD/dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub e: f64,
    pub d: f64,
    pub d_dot: f64,
}

/// `|ΔE/Δt + D̄|` with `D̄` the Hermite-corrected trapezoid average of `D` over the step.
pub fn energy_ledger_update(prev: &EnergyRecord, next: &EnergyRecord) -> f64 {
    let h = next.t - prev.t;
    let integral = 0.5 * h * (prev.d + next.d) + h * h / 12.0 * (prev.d_dot - next.d_dot);
    ((next.e - prev.e) + integral).abs() / h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerConfig {
    pub dt: f64,
    /// Drop the transport and magnetic stress terms.
    #[serde(default)]
    pub linear_only: bool,
}

/// ETD2 stepper for the reduced `(ψ̂, a)` system.
pub struct EulerSolver {
    cfg: EulerConfig,
    table: EtdTable,
    grid: Grid,
    psi: SpectralField,
    a: SpectralField,
    mean_u: [f64; 2],
    t: f64,
    prev_n: Option<[SpectralField; 2]>,
    /// Nonlinear term at the current state, once computed.
    n_now: OnceCell<[SpectralField; 2]>,
    steps: usize,
}

impl EulerSolver {
    /// Projects and dealiases the data; `p` of the input is ignored.
    pub fn new(init: &EulerState, cfg: EulerConfig) -> Result<Self> {
        if !(cfg.dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        let grid = init.grid().clone();
        if *init.u[0].grid() != grid || *init.u[1].grid() != grid {
            return Err(Error::GridMismatch);
        }
        for f in [&init.psi, &init.u[0], &init.u[1]] {
            if let Some(k) = f.data().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(k));
            }
        }
        let table = EtdTable::new(
            &grid,
            cfg.dt,
            |i, j| {
                let (a, b) = xi_eff(&grid, i, j);
                linear_matrix(a, b)
            },
            None,
        );
        let u = [init.u[0].to_spectral().dealias(), init.u[1].to_spectral().dealias()];
        let a = to_amplitude(&grid, &u);
        Ok(EulerSolver {
            cfg,
            table,
            psi: init.psi.to_spectral().dealias(),
            a,
            mean_u: [u[0].mean(), u[1].mean()],
            grid,
            t: init.t,
            prev_n: None,
            n_now: OnceCell::new(),
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn config(&self) -> &EulerConfig {
        &self.cfg
    }

    pub fn velocity_spectral(&self) -> [SpectralField; 2] {
        from_amplitude(&self.grid, &self.a, self.mean_u)
    }

    pub fn psi(&self) -> RealField {
        self.psi.to_real()
    }

    pub fn velocity(&self) -> Field2 {
        let u = self.velocity_spectral();
        [u[0].to_real(), u[1].to_real()]
    }

    /// Current state with the pressure recovered.
    pub fn state(&self) -> EulerState {
        let psi = self.psi();
        let u = self.velocity();
        let p = pressure_euler(&psi, &u);
        EulerState { psi, u, p, t: self.t }
    }

    fn reduced_nonlinear(&self, psi: &SpectralField, a: &SpectralField) -> [SpectralField; 2] {
        if self.cfg.linear_only {
            return [SpectralField::zeros(&self.grid), SpectralField::zeros(&self.grid)];
        }
        let u = from_amplitude(&self.grid, a, self.mean_u);
        let (np, nu) = nonlinear_terms(&psi.to_real(), &[u[0].to_real(), u[1].to_real()]);
        [np, to_amplitude(&self.grid, &nu)]
    }

    fn advance(&self, z: &[SpectralField; 2], n: &[SpectralField; 2], dn: Option<&[SpectralField; 2]>) -> [SpectralField; 2] {
        let mut out = z.clone();
        let zero = [Complex64::default(); 2];
        for k in 0..self.grid.len() {
            let zz = [z[0].data()[k], z[1].data()[k]];
            let a = [n[0].data()[k], n[1].data()[k]];
            let b = dn.map_or(zero, |d| [d[0].data()[k], d[1].data()[k]]);
            let r = self.table.update(k, zz, a, b);
            out[0].data_mut()[k] = r[0];
            out[1].data_mut()[k] = r[1];
        }
        out
    }

    /// One step; on a non-finite result the state is left untouched.
    pub fn step(&mut self) -> Result<()> {
        let z = [self.psi.clone(), self.a.clone()];
        let n0 = match self.n_now.take() {
            Some(n) => n,
            None => self.reduced_nonlinear(&z[0], &z[1]),
        };
        let next = match &self.prev_n {
            Some(prev) => {
                let d = [&n0[0] - &prev[0], &n0[1] - &prev[1]];
                self.advance(&z, &n0, Some(&d))
            }
            None => {
                let a = self.advance(&z, &n0, None);
                let na = self.reduced_nonlinear(&a[0], &a[1]);
                let d = [&na[0] - &n0[0], &na[1] - &n0[1]];
                let mut out = a;
                let zero = [SpectralField::zeros(&self.grid), SpectralField::zeros(&self.grid)];
                let corr = self.advance(&zero, &zero, Some(&d));
                out[0] += &corr[0];
                out[1] += &corr[1];
                out
            }
        };
        let finite = next.iter().all(|f| f.data().iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        if !finite {
            return Err(Error::Aborted {
                t: self.t,
                reason: "non-finite Eulerian state".into(),
            });
        }
        let [psi, a] = next;
        self.psi = psi;
        self.a = a;
        self.prev_n = Some(n0);
        self.t += self.cfg.dt;
        self.steps += 1;
        Ok(())
    }

    /// Energy, dissipation and its time derivative for the current state.
    pub fn energy_record(&self) -> EnergyRecord {
        let g = &self.grid;
        let n = self.n_now.get_or_init(|| self.reduced_nonlinear(&self.psi, &self.a));
        let (mut e, mut d, mut dd) = (0.0, 0.0, 0.0);
        for i in 0..g.nx() {
            for j in 0..g.ny() {
                let k = g.idx(i, j);
                let (x1, x2) = xi_eff(g, i, j);
                let k2 = x1 * x1 + x2 * x2;
                let (p, a) = (self.psi.data()[k], self.a.data()[k]);
                e += 0.5 * k2 * (p.norm_sqr() + if k2 > 0.0 { a.norm_sqr() / k2 } else { 0.0 });
                if k2 == 0.0 {
                    continue;
                }
                let kk = k2.sqrt();
                let adot = p * (x1 * kk) - a * k2 + n[1].data()[k];
                d += k2 * a.norm_sqr();
                dd += 2.0 * k2 * (a.conj() * adot).re;
            }
        }
        let area = g.area();
        let mean = 0.5 * area * (self.mean_u[0].powi(2) + self.mean_u[1].powi(2));
        EnergyRecord {
            t: self.t,
            e: area * e + mean,
            d: area * d,
            d_dot: area * dd,
        }
    }
}

/// Amplitude `a` with `u = a·e^⊥`; the `ξ = 0` entry is left zero.
fn to_amplitude(g: &Grid, u: &[SpectralField; 2]) -> SpectralField {
    let mut a = SpectralField::zeros(g);
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let (x1, x2) = xi_eff(g, i, j);
            let k = (x1 * x1 + x2 * x2).sqrt();
            if k == 0.0 {
                continue;
            }
            let idx = g.idx(i, j);
            a.data_mut()[idx] = (u[0].data()[idx] * (-x2) + u[1].data()[idx] * x1) / k;
        }
    }
    a
}

fn from_amplitude(g: &Grid, a: &SpectralField, mean: [f64; 2]) -> [SpectralField; 2] {
    let mut u = [SpectralField::zeros(g), SpectralField::zeros(g)];
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let (x1, x2) = xi_eff(g, i, j);
            let k = (x1 * x1 + x2 * x2).sqrt();
            if k == 0.0 {
                continue;
            }
            let idx = g.idx(i, j);
            u[0].data_mut()[idx] = a.data()[idx] * (-x2 / k);
            u[1].data_mut()[idx] = a.data()[idx] * (x1 / k);
        }
    }
    u[0].data_mut()[0] = Complex64::new(mean[0], 0.0);
    u[1].data_mut()[0] = Complex64::new(mean[1], 0.0);
    u
}
