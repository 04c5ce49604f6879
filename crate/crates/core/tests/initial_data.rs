use std::f64::consts::PI;

use mhd2d_core::grid::{Grid, RealField};
use mhd2d_core::initial_data::*;
use mhd2d_core::interp::X1Boundary;
use mhd2d_core::Error;

fn gaussian(g: &Grid, eps: f64, w: f64) -> RealField {
    StreamFunction::new(g, eps, Shape::Gaussian { center: [PI, PI], width: w }).sample(g)
}

fn box_grid(n: usize) -> Grid {
    Grid::new(n, n, 2.0 * PI, 2.0 * PI).unwrap()
}

fn trig(g: &Grid, amp: f64, modes: &[(i64, i64, f64, f64)]) -> StreamFunction {
    StreamFunction::new(
        g,
        amp,
        Shape::Trig {
            modes: modes
                .iter()
                .map(|&(m, n, a, p)| TrigMode { m, n, amp: a, phase: p })
                .collect(),
        },
    )
}

#[test]
fn stream_function_gradient_matches_difference_quotient() {
    let g = box_grid(16);
    for s in [
        StreamFunction::new(&g, 0.3, Shape::Gaussian { center: [1.0, 2.0], width: 0.7 }),
        trig(&g, 0.2, &[(1, 2, 1.0, 0.3), (-3, 1, 0.5, 1.1)]),
    ] {
        let h = 1e-6;
        for &(x, y) in &[(0.3, 0.4), (2.0, 5.9), (6.1, 0.05)] {
            let (_, gr) = s.eval(x, y);
            let d1 = (s.eval(x + h, y).0 - s.eval(x - h, y).0) / (2.0 * h);
            let d2 = (s.eval(x, y + h).0 - s.eval(x, y - h).0) / (2.0 * h);
            assert!((gr[0] - d1).abs() < 1e-8 && (gr[1] - d2).abs() < 1e-8);
        }
    }
}

#[test]
fn gaussian_is_periodized() {
    let g = box_grid(16);
    let s = StreamFunction::new(&g, 1.0, Shape::Gaussian { center: [0.2, 6.0], width: 1.0 });
    let a = s.eval(0.1, 0.3).0;
    let b = s.eval(0.1 + 2.0 * PI, 0.3 - 2.0 * PI).0;
    assert!((a - b).abs() < 1e-14);
}

#[test]
fn shear_flow_displacement_is_exact() {
    // χ = a sin(x₂) gives u = (−a cos x₂, 0), so Φ_t(y) = y − t a cos(y₂) e₁.
    let g = box_grid(16);
    let s = trig(&g, 0.3, &[(0, 1, 1.0, -PI / 2.0)]);
    let d = flow_displacement(&g, &s, 1.0, 4);
    let want = RealField::from_fn(&g, |_, y| -0.3 * y.cos());
    assert!((&d[0] - &want).max_abs() < 1e-13);
    assert!(d[1].max_abs() < 1e-13);
}

#[test]
fn companion_vanishes_for_x2_independent_potential() {
    let g = box_grid(64);
    let psi = RealField::from_fn(&g, |x, _| 1e-2 * (-(x - PI).powi(2) / 0.25).exp());
    let c = solve_companion_potential(&psi).unwrap();
    assert_eq!(c.boundary, X1Boundary::Clamped);
    assert!(c.field.max_abs() == 0.0);
    assert_eq!(c.tail_jump, 0.0);
}

#[test]
fn companion_first_order_is_running_integral() {
    let eps = 1e-4;
    let w = 0.5;
    let g = box_grid(128);
    let psi = gaussian(&g, eps, w);
    let c = solve_companion_potential(&psi).unwrap();
    // ∂₁ψ̃ = ∂₂ψ₀ + O(ε²): integrate the analytic ∂₂ψ₀ with composite Simpson.
    let d2 = |x: f64, y: f64| {
        let z = (y - PI) / w;
        eps * (-(x - PI).powi(2) / (w * w)).exp() * (-2.0 * z / w) * (-z * z).exp()
    };
    let mut worst: f64 = 0.0;
    for i in (0..g.nx()).step_by(7) {
        for j in (0..g.ny()).step_by(5) {
            let (x, y) = (g.x1(i), g.x2(j));
            let n = 2000;
            let h = x / n as f64;
            let mut s = d2(0.0, y) + d2(x, y);
            for k in 1..n {
                s += if k % 2 == 1 { 4.0 } else { 2.0 } * d2(k as f64 * h, y);
            }
            let want = s * h / 3.0;
            worst = worst.max((c.field.at(i, j) - want).abs());
        }
    }
    assert!(worst < 10.0 * eps * eps, "worst {worst:e}");
}

#[test]
fn companion_rejects_large_or_spread_data() {
    let g = box_grid(64);
    let big = gaussian(&g, 1.0, 0.5);
    assert!(matches!(solve_companion_potential(&big), Err(Error::Precondition(_))));
    let spread = RealField::from_fn(&g, |x, y| 1e-3 * (x.sin() + y.cos()));
    assert!(matches!(solve_companion_potential(&spread), Err(Error::Precondition(_))));
}

#[test]
fn det_of_zero_data_is_one() {
    let g = box_grid(16);
    let z = RealField::zeros(&g);
    let d = det_u0(&z, &CompanionPotential::periodic(z.clone())).unwrap();
    assert!(d.data().iter().all(|&v| v == 1.0));
}

#[test]
fn det_of_marched_companion_is_one() {
    let g = box_grid(256);
    let psi = gaussian(&g, 1e-3, 0.5);
    let c = solve_companion_potential(&psi).unwrap();
    let d = det_u0(&psi, &c).unwrap();
    let err = d.map(|v| v - 1.0).max_abs();
    assert!(err < 1e-6, "{err:e}");
}

#[test]
fn det_of_flow_map_data_is_one() {
    let g = box_grid(64);
    let transport = trig(&g, 0.02, &[(1, 1, 1.0, 0.2), (2, -1, 0.5, 1.0)]);
    let d = InitialDatum::from_flow(&g, &transport, &StreamFunction::zero(&g), 64);
    let det = det_u0(&d.psi0, &d.psitilde0).unwrap();
    assert!(det.map(|v| v - 1.0).max_abs() < 1e-9);
}

#[test]
fn det_rejects_mismatched_grids() {
    let a = RealField::zeros(&box_grid(16));
    let b = CompanionPotential::periodic(RealField::zeros(&box_grid(32)));
    assert!(matches!(det_u0(&a, &b), Err(Error::GridMismatch)));
}

#[test]
fn picard_on_zero_data() {
    let g = box_grid(16);
    let z = RealField::zeros(&g);
    let r = build_flow_map_initial(&z, &CompanionPotential::periodic(z.clone())).unwrap();
    assert_eq!(r.iterations, 1);
    assert!(r.y0[0].max_abs() == 0.0 && r.y0[1].max_abs() == 0.0);
}

#[test]
fn picard_recovers_flow_map_displacement() {
    let err = |n: usize| {
        let g = box_grid(n);
        let transport = trig(&g, 0.01, &[(1, 1, 1.0, 0.2), (2, -1, 0.5, 1.0)]);
        let d = InitialDatum::from_flow(&g, &transport, &StreamFunction::zero(&g), 64);
        let r = build_flow_map_initial(&d.psi0, &d.psitilde0).unwrap();
        assert!(r.residuals.iter().all(|&v| v < 1e-5), "{:?}", r.residuals);
        (&r.y0[0] - &d.y0[0]).max_abs().max((&r.y0[1] - &d.y0[1]).max_abs())
    };
    let (a, b) = (err(64), err(128));
    assert!(a < 1e-5 && b < a / 6.0, "{a:e} {b:e}");
}

#[test]
fn picard_first_order_expansion() {
    let eps = 1e-4;
    let g = box_grid(128);
    let psi = gaussian(&g, eps, 0.5);
    let c = solve_companion_potential(&psi).unwrap();
    let r = build_flow_map_initial(&psi, &c).unwrap();
    assert!(r.last_change < 1e-12);
    let e1 = (&r.y0[0] - &c.field).max_abs();
    let e2 = (&r.y0[1] + &psi).max_abs();
    assert!(e1 < 10.0 * eps * eps && e2 < 10.0 * eps * eps, "{e1:e} {e2:e}");
}

#[test]
fn picard_gradient_relations_converge() {
    let res = |n: usize| {
        let g = box_grid(n);
        let psi = gaussian(&g, 1e-2, 0.5);
        let c = solve_companion_potential(&psi).unwrap();
        let r = build_flow_map_initial(&psi, &c).unwrap();
        r.residuals.iter().cloned().fold(0.0, f64::max)
    };
    let (a, b) = (res(64), res(128));
    assert!(b < a / 4.0, "{a:e} {b:e}");
}

#[test]
fn picard_rejects_large_data() {
    let g = box_grid(32);
    let psi = RealField::from_fn(&g, |x, y| 0.2 * (x + y).sin());
    let z = CompanionPotential::periodic(RealField::zeros(&g));
    assert!(matches!(build_flow_map_initial(&psi, &z), Err(Error::Precondition(_))));
}

#[test]
fn seeding_constant_velocity() {
    let g = box_grid(32);
    let u = [RealField::constant(&g, 0.7), RealField::constant(&g, -0.2)];
    let y0 = [RealField::from_fn(&g, |x, _| 0.01 * x.sin()), RealField::zeros(&g)];
    let y1 = seed_lagrangian_velocity(&u, &y0);
    assert!((&y1[0] - &u[0]).max_abs() < 1e-14 && (&y1[1] - &u[1]).max_abs() < 1e-14);
}

#[test]
fn seeded_velocity_is_lagrangian_divergence_free() {
    let run = |n: usize| {
        let g = box_grid(n);
        let transport = trig(&g, 0.02, &[(1, 1, 1.0, 0.2), (2, -1, 0.5, 1.0)]);
        let vel = trig(&g, 0.05, &[(1, 2, 1.0, 0.0), (0, 1, 0.4, 0.3)]);
        let d = InitialDatum::from_flow(&g, &transport, &vel, 64);
        let div = lagrangian_divergence(&d.y0, &d.y1, X1Boundary::Periodic);
        assert!(div.max_abs() < 1e-9, "{:e}", div.max_abs());
        let y1 = seed_lagrangian_velocity(&d.u0, &d.y0);
        (&y1[0] - &d.y1[0]).max_abs().max((&y1[1] - &d.y1[1]).max_abs())
    };
    let (a, b) = (run(64), run(128));
    assert!(a < 1e-4 && b < a / 6.0, "{a:e} {b:e}");
}

#[test]
fn strip_datum_round_trip() {
    let g = box_grid(64);
    let psi = gaussian(&g, 1e-3, 0.5);
    let u = [RealField::zeros(&g), RealField::zeros(&g)];
    let (d, init) = InitialDatum::from_potential(psi, u).unwrap();
    assert_eq!(d.boundary(), X1Boundary::Clamped);
    assert!(init.iterations < 10);
    assert!(d.y1[0].max_abs() == 0.0);
}

#[test]
fn smallness_is_homogeneous() {
    let g = box_grid(64);
    let transport = trig(&g, 0.01, &[(1, 1, 1.0, 0.2)]);
    let vel = trig(&g, 0.05, &[(1, 2, 1.0, 0.0)]);
    let d = InitialDatum::from_flow(&g, &transport, &vel, 32);
    let mut d2 = d.clone();
    d2.psi0 = d.psi0.scale(3.0);
    d2.u0 = d.scaled_velocity(3.0);
    let a = smallness_report(&d, 4, 2.0, 1.5, -0.75).unwrap();
    let b = smallness_report(&d2, 4, 2.0, 1.5, -0.75).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1e-300);
    assert!(close(b.psi0_a, 3.0 * a.psi0_a));
    assert!(close(b.u0_hk_s2, 3.0 * a.u0_hk_s2));
    assert!(close(b.grad_psi0, 3.0 * a.grad_psi0));
    assert!(close(b.u0_s1_s2, 3.0 * a.u0_s1_s2));
    assert!(a.grad_psitilde0.is_some() && a.lap_y0.is_some());
}

#[test]
fn smallness_of_strip_datum_omits_torus_norms() {
    let g = Grid::new(128, 32, 16.0, 2.0 * PI).unwrap();
    let psi = StreamFunction::new(&g, 1e-3, Shape::Gaussian { center: [8.0, PI], width: 0.8 }).sample(&g);
    let (d, _) = InitialDatum::from_potential(psi, [RealField::zeros(&g), RealField::zeros(&g)]).unwrap();
    let r = smallness_report(&d, 4, 2.0, 1.5, -0.75).unwrap();
    assert!(r.lap_y0.is_none() && r.grad_psitilde0.is_none());
    assert!(r.companion_ratio.unwrap().is_finite());
}
