//! Physical-space helpers shared by the two solvers.
use crate::grid::{RealField, SpectralField};

/// Vector field as a pair of sampled components.
pub type Field2 = [RealField; 2];

/// `out[k] = f(a₀[k], …, a_{N−1}[k])`.
pub fn pointwise<const N: usize>(fields: [&RealField; N], f: impl Fn([f64; N]) -> f64) -> RealField {
    let g = fields[0].grid();
    let data = (0..g.len())
        .map(|k| f(std::array::from_fn(|n| fields[n].data()[k])))
        .collect();
    RealField::from_vec(g, data)
}

pub fn grad(f: &RealField) -> Field2 {
    let s = f.to_spectral();
    [s.dx1().to_real(), s.dx2().to_real()]
}

/// `J[i][j] = ∂ⱼvⁱ`.
pub fn jacobian(v: &Field2) -> [Field2; 2] {
    [grad(&v[0]), grad(&v[1])]
}

pub fn div(v: &Field2) -> RealField {
    div_spectral(v).to_real()
}

pub fn div_spectral(v: &Field2) -> SpectralField {
    let mut s = v[0].to_spectral().dx1();
    s += &v[1].to_spectral().dx2();
    s
}

pub fn laplacian(f: &RealField) -> RealField {
    f.to_spectral().laplacian().to_real()
}

pub fn dealiased(f: &RealField) -> RealField {
    f.to_spectral().dealias().to_real()
}

pub fn l2_norm2(v: &Field2) -> f64 {
    (v[0].l2_norm().powi(2) + v[1].l2_norm().powi(2)).sqrt()
}

pub fn max_abs2(v: &Field2) -> f64 {
    v[0].max_abs().max(v[1].max_abs())
}

/// Pointwise maximum of the Frobenius norm of a 2×2 field.
pub fn frobenius_inf(j: &[Field2; 2]) -> f64 {
    pointwise([&j[0][0], &j[0][1], &j[1][0], &j[1][1]], |[a, b, c, d]| {
        (a * a + b * b + c * c + d * d).sqrt()
    })
    .max_abs()
}

pub fn sub2(a: &Field2, b: &Field2) -> Field2 {
    [&a[0] - &b[0], &a[1] - &b[1]]
}

pub fn scale2(a: &Field2, c: f64) -> Field2 {
    [a[0].scale(c), a[1].scale(c)]
}

/// Node coordinates displaced by `d`.
pub fn displaced_nodes(d: &Field2) -> Field2 {
    let g = d[0].grid();
    [
        RealField::from_fn(g, |x, _| x).zip_map(&d[0], |a, b| a + b),
        RealField::from_fn(g, |_, y| y).zip_map(&d[1], |a, b| a + b),
    ]
}
