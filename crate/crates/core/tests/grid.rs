use std::f64::consts::PI;

use mhd2d_core::grid::{
    dealias, from_spectral, inverse_laplacian, inverse_laplacian_checked, make_grid, product,
    spectral_derivative, to_spectral, Axis, Grid, RealField, SpectralField,
};
use mhd2d_core::sample;
use num_complex::Complex64;
use proptest::prelude::*;

fn rel(a: &RealField, b: &RealField) -> f64 {
    (a - b).l2_norm() / b.l2_norm().max(1e-300)
}

#[test]
fn frequency_set_of_small_grid() {
    let g = make_grid(8, 8, 2.0 * PI, 2.0 * PI).unwrap();
    let mut ms: Vec<i64> = (0..8).map(|i| g.mode(i, 0).0).collect();
    ms.sort();
    assert_eq!(ms, (-4..=3).collect::<Vec<_>>());
    assert_eq!(g.mode(0, 0), (0, 0));
    assert_eq!(g.xi1(0), 0.0);
    assert_eq!(g.xi2(0), 0.0);
}

#[test]
fn max_frequency_of_64_grid() {
    let g = make_grid(64, 64, 2.0 * PI, 2.0 * PI).unwrap();
    let m = (0..64).map(|i| g.xi1(i).abs()).fold(0.0, f64::max);
    assert!((m - 32.0).abs() < 1e-12);
}

#[test]
fn rejects_bad_sizes() {
    assert!(make_grid(8, 6, 1.0, 1.0).is_err());
    assert!(make_grid(9, 8, 1.0, 1.0).is_err());
    assert!(make_grid(8, 8, 0.0, 1.0).is_err());
}

#[test]
fn index_frequency_map_is_bijective() {
    let g = make_grid(16, 12, 3.0, 5.0).unwrap();
    let mut seen = std::collections::HashSet::new();
    for i in 0..16 {
        for j in 0..12 {
            assert!(seen.insert(g.mode(i, j)));
        }
    }
    assert_eq!(seen.len(), 16 * 12);
}

#[test]
fn sine_coefficients() {
    let g = Grid::square(16).unwrap();
    let u = RealField::from_fn(&g, |x, _| x.sin());
    let s = to_spectral(&u).unwrap();
    assert!((s.coeff(1, 0) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
    assert!((s.coeff(-1, 0) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
    let rest: f64 = s.data().iter().map(|c| c.norm()).sum::<f64>() - 1.0;
    assert!(rest.abs() < 1e-14);
}

#[test]
fn constant_has_unit_mean_coefficient() {
    let g = Grid::square(8).unwrap();
    let s = to_spectral(&RealField::constant(&g, 1.0)).unwrap();
    assert!((s.coeff(0, 0).re - 1.0).abs() < 1e-15);
}

#[test]
fn non_finite_rejected() {
    let g = Grid::square(8).unwrap();
    let mut d = vec![0.0; 64];
    d[5] = f64::NAN;
    assert!(RealField::new(&g, d.clone()).is_err());
    let mut u = RealField::zeros(&g);
    u.data_mut()[3] = f64::INFINITY;
    assert!(to_spectral(&u).is_err());
}

#[test]
fn derivative_examples() {
    let g = Grid::square(32).unwrap();
    let u = RealField::from_fn(&g, |x, _| x.sin());
    let d = spectral_derivative(&u, Axis::X1, 1);
    let c = RealField::from_fn(&g, |x, _| x.cos());
    assert!((&d - &c).max_abs() < 1e-12);

    let mode = SpectralField::single_mode(&g, 1, 2, Complex64::new(1.0, 0.0));
    let lap = mode.laplacian();
    assert!((lap.coeff(1, 2) + 5.0).norm() < 1e-12);
    let inv = lap.inverse_laplacian();
    assert!((inv.coeff(1, 2) - 1.0).norm() < 1e-14);
}

#[test]
fn odd_derivative_kills_nyquist() {
    let g = Grid::square(16).unwrap();
    let u = RealField::from_fn(&g, |x, y| (8.0 * x).cos() + (8.0 * y).cos());
    let s = u.to_spectral();
    assert!(s.dx1().max_abs_coeff() < 1e-14);
    assert!(s.dx2().max_abs_coeff() < 1e-14);
    assert!(s.derivative(Axis::X1, 2).max_abs_coeff() > 1.0);
}

// Second finite difference of a fixed trigonometric polynomial converges at O(h²)
// to the spectral second derivative.
#[test]
fn second_derivative_matches_finite_difference_at_second_order() {
    let f = |x: f64, y: f64| (x + 2.0 * y).sin() + 0.5 * (3.0 * y).cos() * x.cos();
    let mut errs = Vec::new();
    for n in [32usize, 64, 128] {
        let g = Grid::square(n).unwrap();
        let u = RealField::from_fn(&g, f);
        let spec = spectral_derivative(&u, Axis::X2, 2);
        let h = g.dy();
        let fd = RealField::from_fn(&g, |x, y| (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h));
        errs.push((&spec - &fd).max_abs());
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
    }
}

#[test]
fn inverse_laplacian_examples() {
    let g = Grid::square(32).unwrap();
    let z = inverse_laplacian(&RealField::zeros(&g));
    assert_eq!(z.max_abs(), 0.0);
    let u = RealField::from_fn(&g, |x, _| (3.0 * x).cos());
    let v = inverse_laplacian(&u);
    let exact = RealField::from_fn(&g, |x, _| -(3.0 * x).cos() / 9.0);
    assert!((&v - &exact).max_abs() < 1e-14);
    let shifted = u.map(|a| a + 0.3);
    assert!(inverse_laplacian_checked(&shifted, 1e-10).is_err());
    assert!(inverse_laplacian_checked(&u, 1e-10).is_ok());
}

#[test]
fn dealias_examples() {
    let g = Grid::square(64).unwrap();
    let a = SpectralField::single_mode(&g, 22, 0, Complex64::new(1.0, 0.0));
    assert_eq!(dealias(&a).max_abs_coeff(), 0.0);
    let b = SpectralField::single_mode(&g, 10, 10, Complex64::new(1.0, 0.0));
    assert_eq!(dealias(&b), b);
}

// Product of two fields band-limited to N/3 on the fine 2N grid is exact; its
// truncation to the coarse band must equal the dealiased coarse product.
#[test]
fn dealiased_product_matches_fine_grid_oracle() {
    let g = Grid::square(64).unwrap();
    let fine = g.refined(2).unwrap();
    let mut r = sample::rng(7);
    let a = sample::band_limited(&g, 21, 0.0, &mut r);
    let b = sample::band_limited(&g, 21, 0.0, &mut r);
    let coarse = product(&a, &b);
    let af = a.to_spectral().resample(&fine).to_real();
    let bf = b.to_spectral().resample(&fine).to_real();
    let exact = (&af * &bf).to_spectral().resample(&g).dealias();
    let err = (&coarse - &exact).max_abs_coeff();
    assert!(err < 1e-12, "err {err}");
}

#[test]
fn resample_pad_then_truncate_is_identity() {
    let g = Grid::square(16).unwrap();
    let mut r = sample::rng(3);
    let u = sample::band_limited(&g, 8, 0.0, &mut r).to_spectral();
    let back = u.resample(&g.refined(2).unwrap()).resample(&g);
    assert!((&back - &u).max_abs_coeff() < 1e-15);
    let uf = u.resample(&g.refined(2).unwrap()).to_real();
    // fine samples at even nodes reproduce the coarse samples
    let uc = u.to_real();
    for i in 0..16 {
        for j in 0..16 {
            assert!((uf.at(2 * i, 2 * j) - uc.at(i, j)).abs() < 1e-13);
        }
    }
}

#[test]
fn eval_at_reproduces_nodes_and_shifts() {
    let g = Grid::square(16).unwrap();
    let u = RealField::from_fn(&g, |x, y| (2.0 * x - y).sin() + (x + 3.0 * y).cos());
    let s = u.to_spectral();
    assert!((s.eval_at(g.x1(3), g.x2(5)) - u.at(3, 5)).abs() < 1e-13);
    let v = s.eval_at(0.123, 1.7);
    let exact = (2.0f64 * 0.123 - 1.7).sin() + (0.123f64 + 3.0 * 1.7).cos();
    assert!((v - exact).abs() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn round_trip_and_plancherel(seed in 0u64..1000, band in 2usize..8) {
        let g = Grid::new(16, 24, 2.0 * PI, 3.0).unwrap();
        let mut r = sample::rng(seed);
        let u = sample::band_limited(&g, band, 0.0, &mut r).map(|v| v + 0.1);
        let s = to_spectral(&u).unwrap();
        let back = from_spectral(&s).unwrap();
        prop_assert!(rel(&back, &u) < 1e-12);
        let quad = u.l2_norm();
        prop_assert!((s.l2_norm() - quad).abs() < 1e-12 * quad);
    }

    #[test]
    fn derivative_commutes_with_round_trip(seed in 0u64..1000) {
        let g = Grid::square(16).unwrap();
        let mut r = sample::rng(seed);
        let u = sample::band_limited(&g, 6, 0.0, &mut r);
        let once = spectral_derivative(&u, Axis::X1, 1);
        let twice = spectral_derivative(&from_spectral(&to_spectral(&u).unwrap()).unwrap(), Axis::X1, 1);
        prop_assert!((&once - &twice).max_abs() < 1e-12);
    }

    #[test]
    fn inverse_laplacian_inverts_on_zero_mean(seed in 0u64..1000) {
        let g = Grid::square(32).unwrap();
        let mut r = sample::rng(seed);
        let u = sample::band_limited(&g, 10, 0.0, &mut r);
        let back = inverse_laplacian(&u).to_spectral().laplacian().to_real();
        prop_assert!(rel(&back, &u) < 1e-12);
    }
}
