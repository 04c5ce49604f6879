//! Bicubic (Keys, a = −1/2) interpolation on the periodic grid.
use serde::{Deserialize, Serialize};

use crate::grid::RealField;

const A: f64 = -0.5;

/// Treatment of `x₁` outside `[0, lx)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum X1Boundary {
    /// Wrap around the torus.
    Periodic,
    /// Constant extension of the first/last column (unwrapped strip in `x₁`).
    Clamped,
}

#[inline]
fn kernel(s: f64) -> f64 {
    let x = s.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

#[inline]
fn kernel_deriv(s: f64) -> f64 {
    let x = s.abs();
    let d = if x <= 1.0 {
        (3.0 * (A + 2.0) * x - 2.0 * (A + 3.0)) * x
    } else if x < 2.0 {
        (3.0 * A * x - 10.0 * A) * x + 8.0 * A
    } else {
        0.0
    };
    d * s.signum()
}

/// Interpolant of a sampled field.
#[derive(Debug, Clone, Copy)]
pub struct Bicubic<'a> {
    field: &'a RealField,
    x1: X1Boundary,
}

impl<'a> Bicubic<'a> {
    pub fn new(field: &'a RealField) -> Self {
        Bicubic {
            field,
            x1: X1Boundary::Periodic,
        }
    }

    pub fn with_boundary(field: &'a RealField, x1: X1Boundary) -> Self {
        Bicubic { field, x1 }
    }

    fn stencil(&self, x1: f64, x2: f64) -> ([usize; 4], [f64; 4], [f64; 4], [usize; 4], [f64; 4], [f64; 4]) {
        let g = self.field.grid();
        let (nx, ny) = (g.nx() as i64, g.ny() as i64);
        let u = x1 / g.dx();
        let v = x2 / g.dy();
        let (i0, j0) = (u.floor(), v.floor());
        let (tu, tv) = (u - i0, v - j0);
        let (i0, j0) = (i0 as i64, j0 as i64);
        let mut ii = [0usize; 4];
        let mut jj = [0usize; 4];
        let mut wu = [0.0; 4];
        let mut wv = [0.0; 4];
        let mut du = [0.0; 4];
        let mut dv = [0.0; 4];
        for k in 0..4 {
            let off = k as i64 - 1;
            let s = tu - off as f64;
            wu[k] = kernel(s);
            du[k] = kernel_deriv(s) / g.dx();
            ii[k] = match self.x1 {
                X1Boundary::Periodic => (i0 + off).rem_euclid(nx) as usize,
                X1Boundary::Clamped => (i0 + off).clamp(0, nx - 1) as usize,
            };
            let s = tv - off as f64;
            wv[k] = kernel(s);
            dv[k] = kernel_deriv(s) / g.dy();
            jj[k] = (j0 + off).rem_euclid(ny) as usize;
        }
        (ii, wu, du, jj, wv, dv)
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let (ii, wu, _, jj, wv, _) = self.stencil(x1, x2);
        let mut acc = 0.0;
        for a in 0..4 {
            let mut row = 0.0;
            for b in 0..4 {
                row += wv[b] * self.field.at(ii[a], jj[b]);
            }
            acc += wu[a] * row;
        }
        acc
    }

    /// Value and gradient of the interpolant.
    pub fn eval_grad(&self, x1: f64, x2: f64) -> (f64, f64, f64) {
        let (ii, wu, du, jj, wv, dv) = self.stencil(x1, x2);
        let (mut f, mut fx, mut fy) = (0.0, 0.0, 0.0);
        for a in 0..4 {
            let (mut r, mut rd) = (0.0, 0.0);
            for b in 0..4 {
                let s = self.field.at(ii[a], jj[b]);
                r += wv[b] * s;
                rd += dv[b] * s;
            }
            f += wu[a] * r;
            fx += du[a] * r;
            fy += wu[a] * rd;
        }
        (f, fx, fy)
    }
}

/// Samples `f(y + d(y))` at every grid node.
pub fn compose_nodes(f: &RealField, d: &[RealField; 2], x1: X1Boundary) -> RealField {
    let g = f.grid();
    let interp = Bicubic::with_boundary(f, x1);
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            out.push(interp.eval(g.x1(i) + d[0].at(i, j), g.x2(j) + d[1].at(i, j)));
        }
    }
    RealField::from_vec(g, out)
}

/// Samples `f` at arbitrary points given per grid node.
pub fn sample_at(f: &RealField, points: &[RealField; 2], x1: X1Boundary) -> RealField {
    let g = f.grid();
    let interp = Bicubic::with_boundary(f, x1);
    let out = (0..g.len())
        .map(|k| interp.eval(points[0].data()[k], points[1].data()[k]))
        .collect();
    RealField::from_vec(g, out)
}
