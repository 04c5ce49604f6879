//! Periodic box, discrete Fourier transform contract and spectral calculus.
//!
//! Coefficients are those of the expansion `u(x) = Σ ĉ(ξ) e^{iξ·x}`, so a
//! pure mode has coefficient one and `‖u‖²_{L²} = lx·ly·Σ|ĉ|²`.
//! Samples are stored row-major in `(x₁, x₂)`: index `i·ny + j` holds
//! `u(i·dx, j·dy)`.
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Coordinate direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X1,
    X2,
}

struct GridInner {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    xi1: Vec<f64>,
    xi2: Vec<f64>,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on `[0, lx) × [0, ly)`. Cheap to clone.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("nx", &self.nx())
            .field("ny", &self.ny())
            .field("lx", &self.lx())
            .field("ly", &self.ly())
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.nx() == other.nx()
                && self.ny() == other.ny()
                && self.lx() == other.lx()
                && self.ly() == other.ly())
    }
}

/// Signed integer wavenumber of DFT index `i` for `n` samples.
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// DFT index of signed wavenumber `m`.
pub fn wrap_index(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 8 {
                return Err(Error::InvalidGrid(format!("{name} = {n} is below 8")));
            }
            if n % 2 != 0 {
                return Err(Error::InvalidGrid(format!("{name} = {n} is odd")));
            }
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "box lengths must be positive, got ({lx}, {ly})"
            )));
        }
        let mut planner = FftPlanner::new();
        let xi1 = (0..nx)
            .map(|i| TWO_PI / lx * signed_index(i, nx) as f64)
            .collect();
        let xi2 = (0..ny)
            .map(|j| TWO_PI / ly * signed_index(j, ny) as f64)
            .collect();
        Ok(Grid {
            inner: Arc::new(GridInner {
                nx,
                ny,
                lx,
                ly,
                xi1,
                xi2,
                fwd_x: planner.plan_fft_forward(nx),
                inv_x: planner.plan_fft_inverse(nx),
                fwd_y: planner.plan_fft_forward(ny),
                inv_y: planner.plan_fft_inverse(ny),
            }),
        })
    }

    /// Square `n × n` grid on `[0, 2π)²`.
    pub fn square(n: usize) -> Result<Self> {
        Grid::new(n, n, TWO_PI, TWO_PI)
    }

    pub fn nx(&self) -> usize {
        self.inner.nx
    }
    pub fn ny(&self) -> usize {
        self.inner.ny
    }
    pub fn lx(&self) -> f64 {
        self.inner.lx
    }
    pub fn ly(&self) -> f64 {
        self.inner.ly
    }
    pub fn len(&self) -> usize {
        self.inner.nx * self.inner.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn dx(&self) -> f64 {
        self.lx() / self.nx() as f64
    }
    pub fn dy(&self) -> f64 {
        self.ly() / self.ny() as f64
    }
    pub fn area(&self) -> f64 {
        self.lx() * self.ly()
    }
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.inner.ny + j
    }
    pub fn x1(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }
    pub fn x2(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    /// Integer wavenumbers `(m, n)` at DFT index `(i, j)`.
    pub fn mode(&self, i: usize, j: usize) -> (i64, i64) {
        (signed_index(i, self.nx()), signed_index(j, self.ny()))
    }
    #[inline]
    pub fn xi1(&self, i: usize) -> f64 {
        self.inner.xi1[i]
    }
    #[inline]
    pub fn xi2(&self, j: usize) -> f64 {
        self.inner.xi2[j]
    }
    pub fn xi1_all(&self) -> &[f64] {
        &self.inner.xi1
    }
    pub fn xi2_all(&self) -> &[f64] {
        &self.inner.xi2
    }
    #[inline]
    pub fn xi_sq(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.inner.xi1[i], self.inner.xi2[j]);
        a * a + b * b
    }
    pub fn is_nyquist_x(&self, i: usize) -> bool {
        i == self.nx() / 2
    }
    pub fn is_nyquist_y(&self, j: usize) -> bool {
        j == self.ny() / 2
    }

    /// Smallest nonzero and largest frequency magnitude on the lattice.
    pub fn xi_range(&self) -> (f64, f64) {
        let f1 = TWO_PI / self.lx();
        let f2 = TWO_PI / self.ly();
        let hi1 = f1 * (self.nx() / 2) as f64;
        let hi2 = f2 * (self.ny() / 2) as f64;
        (f1.min(f2), (hi1 * hi1 + hi2 * hi2).sqrt())
    }

    /// Same box sampled `factor` times more finely in each direction.
    pub fn refined(&self, factor: usize) -> Result<Grid> {
        Grid::new(
            self.nx() * factor,
            self.ny() * factor,
            self.lx(),
            self.ly(),
        )
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let (nx, ny) = (self.nx(), self.ny());
        let (fx, fy) = if forward {
            (&self.inner.fwd_x, &self.inner.fwd_y)
        } else {
            (&self.inner.inv_x, &self.inner.inv_y)
        };
        let mut scratch =
            vec![Complex64::default(); fy.get_inplace_scratch_len().max(fx.get_inplace_scratch_len())];
        fy.process_with_scratch(data, &mut scratch);
        let mut t = vec![Complex64::default(); nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                t[j * nx + i] = data[i * ny + j];
            }
        }
        fx.process_with_scratch(&mut t, &mut scratch);
        for j in 0..ny {
            for i in 0..nx {
                data[i * ny + j] = t[j * nx + i];
            }
        }
    }
}

/// Same as `Grid::new`.
pub fn make_grid(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Grid> {
    Grid::new(nx, ny, lx, ly)
}

/// Real samples on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: Grid,
    data: Vec<f64>,
}

/// Fourier coefficients on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    data: Vec<Complex64>,
}

impl RealField {
    /// Wraps samples after checking length and finiteness.
    pub fn new(grid: &Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples, got {}",
                grid.len(),
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(RealField {
            grid: grid.clone(),
            data,
        })
    }

    pub(crate) fn from_vec(grid: &Grid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        RealField {
            grid: grid.clone(),
            data,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        RealField {
            grid: grid.clone(),
            data: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for i in 0..grid.nx() {
            let x1 = grid.x1(i);
            for j in 0..grid.ny() {
                data.push(f(x1, grid.x2(j)));
            }
        }
        RealField {
            grid: grid.clone(),
            data,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    /// Forward transform without the finiteness check of [`to_spectral`].
    pub fn to_spectral(&self) -> SpectralField {
        let mut c: Vec<Complex64> = self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.grid.transform(&mut c, true);
        let s = 1.0 / self.grid.len() as f64;
        for v in &mut c {
            *v *= s;
        }
        SpectralField {
            grid: self.grid.clone(),
            data: c,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField::from_vec(&self.grid, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> RealField {
        assert!(self.grid == other.grid, "grid mismatch");
        RealField::from_vec(
            &self.grid,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> RealField {
        self.map(|v| c * v)
    }

    /// `self += c·other`.
    pub fn axpy(&mut self, c: f64, other: &RealField) {
        assert!(self.grid == other.grid, "grid mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }
    pub fn integral(&self) -> f64 {
        self.sum() * self.grid.cell_area()
    }
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
    pub fn inner(&self, other: &RealField) -> f64 {
        assert!(self.grid == other.grid, "grid mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_area()
    }
    /// Grid-quadrature L² norm (exact for band-limited fields).
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }
    pub fn remove_mean(&self) -> RealField {
        let m = self.mean();
        self.map(|v| v - m)
    }
}

impl SpectralField {
    pub fn new(grid: &Grid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(SpectralField {
            grid: grid.clone(),
            data,
        })
    }

    pub(crate) fn from_vec(grid: &Grid, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        SpectralField {
            grid: grid.clone(),
            data,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        SpectralField {
            grid: grid.clone(),
            data: vec![Complex64::default(); grid.len()],
        }
    }

    /// Single Fourier mode `amp·e^{i(m x₁ + n x₂)·2π/L}` (complex-valued field).
    pub fn single_mode(grid: &Grid, m: i64, n: i64, amp: Complex64) -> Self {
        let mut s = Self::zeros(grid);
        let k = grid.idx(wrap_index(m, grid.nx()), wrap_index(n, grid.ny()));
        s.data[k] = amp;
        s
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[self.grid.idx(i, j)]
    }
    /// Coefficient of the signed mode `(m, n)`.
    pub fn coeff(&self, m: i64, n: i64) -> Complex64 {
        self.at(wrap_index(m, self.grid.nx()), wrap_index(n, self.grid.ny()))
    }

    /// Inverse transform; the imaginary part is discarded.
    pub fn to_real(&self) -> RealField {
        let mut c = self.data.clone();
        self.grid.transform(&mut c, false);
        RealField::from_vec(&self.grid, c.into_iter().map(|v| v.re).collect())
    }

    /// Inverse transform keeping complex samples.
    pub fn to_complex_samples(&self) -> Vec<Complex64> {
        let mut c = self.data.clone();
        self.grid.transform(&mut c, false);
        c
    }

    /// Multiplies each coefficient by `symbol(i, j)` (DFT indices).
    pub fn apply(&self, symbol: impl Fn(usize, usize) -> Complex64) -> SpectralField {
        let ny = self.grid.ny();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, &c)| c * symbol(k / ny, k % ny))
            .collect();
        SpectralField::from_vec(&self.grid, data)
    }

    /// Multiplies each coefficient by a real symbol of `(ξ₁, ξ₂)`.
    pub fn apply_real(&self, symbol: impl Fn(f64, f64) -> f64) -> SpectralField {
        let g = &self.grid;
        self.apply(|i, j| Complex64::new(symbol(g.xi1(i), g.xi2(j)), 0.0))
    }

    /// `(iξ_axis)^order`, with the Nyquist symbol of odd orders set to zero.
    pub fn derivative(&self, axis: Axis, order: u32) -> SpectralField {
        let g = self.grid.clone();
        let odd = order % 2 == 1;
        let i_pow = Complex64::i().powu(order);
        self.apply(move |i, j| {
            let (xi, nyq) = match axis {
                Axis::X1 => (g.xi1(i), g.is_nyquist_x(i)),
                Axis::X2 => (g.xi2(j), g.is_nyquist_y(j)),
            };
            if odd && nyq {
                Complex64::default()
            } else {
                i_pow * xi.powi(order as i32)
            }
        })
    }

    pub fn dx1(&self) -> SpectralField {
        self.derivative(Axis::X1, 1)
    }
    pub fn dx2(&self) -> SpectralField {
        self.derivative(Axis::X2, 1)
    }
    pub fn grad(&self) -> [SpectralField; 2] {
        [self.dx1(), self.dx2()]
    }

    pub fn laplacian(&self) -> SpectralField {
        let g = self.grid.clone();
        self.apply(move |i, j| Complex64::new(-g.xi_sq(i, j), 0.0))
    }

    /// `Δ^{-1}` on the zero-mean part; the result has zero mean.
    pub fn inverse_laplacian(&self) -> SpectralField {
        let g = self.grid.clone();
        self.apply(move |i, j| {
            let k2 = g.xi_sq(i, j);
            if k2 == 0.0 {
                Complex64::default()
            } else {
                Complex64::new(-1.0 / k2, 0.0)
            }
        })
    }

    /// 2/3 rule: zero every mode with `|m| > nx/3` or `|n| > ny/3`.
    pub fn dealias(&self) -> SpectralField {
        let mut out = self.clone();
        out.dealias_in_place();
        out
    }

    pub fn dealias_in_place(&mut self) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        for i in 0..nx {
            let m = signed_index(i, nx).unsigned_abs() as usize;
            for j in 0..ny {
                let n = signed_index(j, ny).unsigned_abs() as usize;
                if 3 * m > nx || 3 * n > ny {
                    self.data[i * ny + j] = Complex64::default();
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.data[0].re
    }

    pub fn remove_mean(&self) -> SpectralField {
        let mut out = self.clone();
        out.data[0] = Complex64::default();
        out
    }

    pub fn scale(&self, c: f64) -> SpectralField {
        SpectralField::from_vec(&self.grid, self.data.iter().map(|&v| v * c).collect())
    }

    pub fn scale_complex(&self, c: Complex64) -> SpectralField {
        SpectralField::from_vec(&self.grid, self.data.iter().map(|&v| v * c).collect())
    }

    pub fn axpy(&mut self, c: f64, other: &SpectralField) {
        assert!(self.grid == other.grid, "grid mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * c;
        }
    }

    /// Real L² inner product via Plancherel.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        assert!(self.grid == other.grid, "grid mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a * b.conj()).re)
            .sum::<f64>()
            * self.grid.area()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.area()).sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.data.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Zero-pads or truncates the spectrum onto `target` (same box).
    /// The Nyquist line is split symmetrically when padding so real fields stay real.
    pub fn resample(&self, target: &Grid) -> SpectralField {
        assert!(
            self.grid.lx() == target.lx() && self.grid.ly() == target.ly(),
            "resample needs the same box"
        );
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (tx, ty) = (target.nx(), target.ny());
        let mut out = vec![Complex64::default(); target.len()];
        for i in 0..nx {
            let m = signed_index(i, nx);
            let mx: Vec<(i64, f64)> = if tx > nx && i == nx / 2 {
                vec![(m, 0.5), (-m, 0.5)]
            } else {
                vec![(m, 1.0)]
            };
            for j in 0..ny {
                let n = signed_index(j, ny);
                let ny_list: Vec<(i64, f64)> = if ty > ny && j == ny / 2 {
                    vec![(n, 0.5), (-n, 0.5)]
                } else {
                    vec![(n, 1.0)]
                };
                let c = self.data[i * ny + j];
                for &(mm, wx) in &mx {
                    if 2 * mm.unsigned_abs() as usize > tx {
                        continue;
                    }
                    for &(nn, wy) in &ny_list {
                        if 2 * nn.unsigned_abs() as usize > ty {
                            continue;
                        }
                        let k = target.idx(wrap_index(mm, tx), wrap_index(nn, ty));
                        out[k] += c * (wx * wy);
                    }
                }
            }
        }
        SpectralField::from_vec(target, out)
    }

    /// Trigonometric interpolant evaluated at an arbitrary point.
    pub fn eval_at(&self, x1: f64, x2: f64) -> f64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let ex: Vec<(Complex64, Complex64)> = (0..nx)
            .map(|i| {
                let a = self.grid.xi1(i) * x1;
                (Complex64::from_polar(1.0, a), Complex64::from_polar(1.0, -a))
            })
            .collect();
        let ey: Vec<(Complex64, Complex64)> = (0..ny)
            .map(|j| {
                let a = self.grid.xi2(j) * x2;
                (Complex64::from_polar(1.0, a), Complex64::from_polar(1.0, -a))
            })
            .collect();
        let mut acc = Complex64::default();
        for i in 0..nx {
            let px = if self.grid.is_nyquist_x(i) {
                (ex[i].0 + ex[i].1) * 0.5
            } else {
                ex[i].0
            };
            for j in 0..ny {
                let py = if self.grid.is_nyquist_y(j) {
                    (ey[j].0 + ey[j].1) * 0.5
                } else {
                    ey[j].0
                };
                acc += self.data[i * ny + j] * px * py;
            }
        }
        acc.re
    }
}

/// Validated forward transform.
pub fn to_spectral(f: &RealField) -> Result<SpectralField> {
    if let Some(k) = f.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    Ok(f.to_spectral())
}

/// Validated inverse transform (real part).
pub fn from_spectral(s: &SpectralField) -> Result<RealField> {
    if let Some(k) = s.data.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite(k));
    }
    Ok(s.to_real())
}

pub fn spectral_derivative(u: &RealField, axis: Axis, order: u32) -> RealField {
    u.to_spectral().derivative(axis, order).to_real()
}

pub fn inverse_laplacian(u: &RealField) -> RealField {
    u.to_spectral().inverse_laplacian().to_real()
}

/// Inverse Laplacian for a caller that asserts solvability: fails when the
/// mean exceeds `tol`.
pub fn inverse_laplacian_checked(u: &RealField, tol: f64) -> Result<RealField> {
    let m = u.mean();
    if m.abs() > tol {
        return Err(Error::Precondition(format!(
            "Poisson source has mean {m:e}, tolerance {tol:e}"
        )));
    }
    Ok(inverse_laplacian(u))
}

pub fn dealias(s: &SpectralField) -> SpectralField {
    s.dealias()
}

/// Spectral divergence of a vector field.
pub fn divergence(v: &[SpectralField; 2]) -> SpectralField {
    let mut d = v[0].dx1();
    d += &v[1].dx2();
    d
}

/// Dealiased pointwise product of two real fields.
pub fn product(a: &RealField, b: &RealField) -> SpectralField {
    (a * b).to_spectral().dealias()
}

macro_rules! field_ops {
    ($t:ty, $elem:ty) => {
        impl Add<&$t> for &$t {
            type Output = $t;
            fn add(self, rhs: &$t) -> $t {
                assert!(self.grid == rhs.grid, "grid mismatch");
                <$t>::from_vec(
                    &self.grid,
                    self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
                )
            }
        }
        impl Sub<&$t> for &$t {
            type Output = $t;
            fn sub(self, rhs: &$t) -> $t {
                assert!(self.grid == rhs.grid, "grid mismatch");
                <$t>::from_vec(
                    &self.grid,
                    self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
                )
            }
        }
        impl Neg for &$t {
            type Output = $t;
            fn neg(self) -> $t {
                <$t>::from_vec(&self.grid, self.data.iter().map(|a| -a).collect())
            }
        }
        impl AddAssign<&$t> for $t {
            fn add_assign(&mut self, rhs: &$t) {
                assert!(self.grid == rhs.grid, "grid mismatch");
                for (a, b) in self.data.iter_mut().zip(&rhs.data) {
                    *a += b;
                }
            }
        }
        impl SubAssign<&$t> for $t {
            fn sub_assign(&mut self, rhs: &$t) {
                assert!(self.grid == rhs.grid, "grid mismatch");
                for (a, b) in self.data.iter_mut().zip(&rhs.data) {
                    *a -= b;
                }
            }
        }
        impl Mul<f64> for &$t {
            type Output = $t;
            fn mul(self, c: f64) -> $t {
                <$t>::from_vec(&self.grid, self.data.iter().map(|a| a * c).collect())
            }
        }
    };
}

field_ops!(RealField, f64);
field_ops!(SpectralField, Complex64);

impl Mul<&RealField> for &RealField {
    type Output = RealField;
    fn mul(self, rhs: &RealField) -> RealField {
        self.zip_map(rhs, |a, b| a * b)
    }
}

/// Converts a vector of spectral components to samples.
pub fn to_real2(v: &[SpectralField; 2]) -> [RealField; 2] {
    [v[0].to_real(), v[1].to_real()]
}

pub fn to_spectral2(v: &[RealField; 2]) -> [SpectralField; 2] {
    [v[0].to_spectral(), v[1].to_spectral()]
}
