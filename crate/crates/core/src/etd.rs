//! Per-mode exponential propagators for `z' = M(ξ) z + N` with `z ∈ ℂ²`.
//!
//! For a step `h` each mode stores `e^{hM}`, `hφ₁(hM)` and `hφ₂(hM)`, read off
//! the exponential of the augmented block matrix `[[hM, I, 0], [0, 0, I], [0, 0, 0]]`.
use std::collections::HashMap;

use nalgebra::Matrix6;
use num_complex::Complex64;

use crate::grid::Grid;

/// Row-major real 2×2 matrix.
pub type Mat2 = [f64; 4];

#[inline]
pub fn apply2(m: &Mat2, z: [Complex64; 2]) -> [Complex64; 2] {
    [m[0] * z[0] + m[1] * z[1], m[2] * z[0] + m[3] * z[1]]
}

/// `(e^{hM}, hφ₁(hM), hφ₂(hM))`.
pub fn phi_matrices(m: &Mat2, h: f64) -> (Mat2, Mat2, Mat2) {
    let mut c = Matrix6::<f64>::zeros();
    for r in 0..2 {
        for s in 0..2 {
            c[(r, s)] = h * m[2 * r + s];
        }
        c[(r, r + 2)] = 1.0;
        c[(r + 2, r + 4)] = 1.0;
    }
    let e = c.exp();
    let block = |off: usize, scale: f64| -> Mat2 {
        [
            scale * e[(0, off)],
            scale * e[(0, off + 1)],
            scale * e[(1, off)],
            scale * e[(1, off + 1)],
        ]
    };
    (block(0, 1.0), block(2, h), block(4, h))
}

/// Propagator coefficients for every mode of a grid at a fixed step.
#[derive(Debug, Clone)]
pub struct EtdTable {
    pub dt: f64,
    pub e: Vec<Mat2>,
    pub w1: Vec<Mat2>,
    pub w2: Vec<Mat2>,
}

impl EtdTable {
    /// `matrix(i, j)` gives `M` at DFT index `(i, j)`; `exact(i, j)`, when given,
    /// replaces the Padé value of `e^{hM}` by a closed form.
    pub fn new(
        grid: &Grid,
        dt: f64,
        matrix: impl Fn(usize, usize) -> Mat2,
        exact: Option<&dyn Fn(usize, usize) -> Mat2>,
    ) -> Self {
        let n = grid.len();
        let mut e = Vec::with_capacity(n);
        let mut w1 = Vec::with_capacity(n);
        let mut w2 = Vec::with_capacity(n);
        let mut cache: HashMap<[u64; 4], (Mat2, Mat2, Mat2)> = HashMap::new();
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                let m = matrix(i, j);
                let key = m.map(f64::to_bits);
                let (ee, a, b) = *cache.entry(key).or_insert_with(|| phi_matrices(&m, dt));
                e.push(match exact {
                    Some(f) => f(i, j),
                    None => ee,
                });
                w1.push(a);
                w2.push(b);
            }
        }
        EtdTable { dt, e, w1, w2 }
    }
}

impl EtdTable {
    /// `e^{hM}z + hφ₁(hM)a + hφ₂(hM)b` at mode `k`.
    #[inline]
    pub fn update(&self, k: usize, z: [Complex64; 2], a: [Complex64; 2], b: [Complex64; 2]) -> [Complex64; 2] {
        let e = apply2(&self.e[k], z);
        let p = apply2(&self.w1[k], a);
        let q = apply2(&self.w2[k], b);
        [e[0] + p[0] + q[0], e[1] + p[1] + q[1]]
    }
}
