//! Named experiments. Each writes its artifacts under the output directory and
//! fills a [`Report`] with the assertions it checks.
use std::fs::{self, File};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use mhd2d_core::diagnostics::{
    block_energy_max_increase, decay_table, regime_constant, smallness_margin, EnergyLedger, Horizontal, Quantity,
};
use mhd2d_core::eulerian::{blowup_integrand, energy_ledger_update, EulerConfig, EulerSolver, EulerState};
use mhd2d_core::grid::{product, Grid, RealField, SpectralField};
use mhd2d_core::initial_data::{det_u0, flow_displacement, smallness_report, InitialDatum, StreamFunction};
use mhd2d_core::interp::X1Boundary;
use mhd2d_core::io::write_snapshot;
use mhd2d_core::lagrangian::{
    adjugate, compose, det_field, magnetic_pullback_check, rho, rhs_f, rhs_f_divergence, stretching_forms,
    to_eulerian, FlowMapState, LagrangianConfig, LagrangianSolver,
};
use mhd2d_core::linear::{
    eigenvalues, evolve_linear, fit_tail, measured_decay_rate, mode_solution, write_block_energy_csv, Regime,
};
use mhd2d_core::lp::{aniso_norm, besov_norm, block, block_range, bony_decompose, make_cutoffs, sobolev_norm, Direction};
use mhd2d_core::ops::{self, Field2};
use mhd2d_core::sample::{band_limited, rng};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{Construction, ExperimentConfig};
use crate::report::Report;

type Recipe = fn(&mut Run) -> Result<()>;

pub const RECIPES: [(&str, &str, Recipe); 13] = [
    ("dispersion", "λ± over the frequency lattice with fitted slow-mode decay", dispersion),
    ("linear-decay", "linearized run; per-mode decay rates against λ₋", linear_decay),
    ("block-energy", "linearized run; anisotropic block energies and regime decay table", block_energy),
    ("energy-identity", "Eulerian energy balance and its order under dt halving", energy_identity),
    ("lagrangian-smalldata", "flow-map run with invariant monitors and the bootstrap functionals", lagrangian_smalldata),
    ("eulerian-smalldata", "Eulerian run with energy ledger and divergence monitor", eulerian_smalldata),
    ("cross-validate", "Lagrangian against Eulerian from the same data, two resolutions", cross_validate),
    ("build-initial-data", "initial data, constraint residuals and smallness report", build_initial_data),
    ("norms-selftest", "partition of unity, almost orthogonality, Bernstein, homogeneity", norms_selftest),
    ("bony-selftest", "paraproduct reconstruction in both directions", bony_selftest),
    ("roundtrip", "initial data → flow-map state → Eulerian fields", roundtrip),
    ("identities", "adjugate, determinant, stretching and forcing identities on random fields", identities),
    ("composition", "L² isometry of composition with a measure-preserving map", composition),
];

pub fn names() -> Vec<&'static str> {
    RECIPES.iter().map(|r| r.0).collect()
}

pub fn find(name: &str) -> Result<Recipe> {
    match RECIPES.iter().find(|r| r.0 == name) {
        Some(r) => Ok(r.2),
        None => bail!("unknown experiment `{name}`; available: {}", names().join(", ")),
    }
}

pub struct Run {
    pub cfg: ExperimentConfig,
    pub grid: Grid,
    pub out: PathBuf,
    pub report: Report,
}

impl Run {
    pub fn new(name: &str, cfg: ExperimentConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        let out = cfg.output_dir(name);
        Ok(Run { cfg, grid, out, report: Report::new(name) })
    }

    fn tol(&self, name: &str, default: f64) -> f64 {
        self.cfg.tolerance(name, default)
    }

    fn ledger_file(&self, name: &str) -> Result<File> {
        let dir = self.out.join("ledgers");
        fs::create_dir_all(&dir)?;
        Ok(File::create(dir.join(name))?)
    }

    fn csv(&self, name: &str) -> Result<csv::Writer<File>> {
        Ok(csv::Writer::from_writer(self.ledger_file(name)?))
    }

    fn field(&self, name: &str, f: &RealField, t: f64) -> Result<()> {
        write_snapshot(&self.out.join("fields"), name, f, t)?;
        Ok(())
    }

    fn json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        fs::write(self.out.join(name), serde_json::to_string_pretty(value)? + "\n")?;
        Ok(())
    }

    fn stream(&self, shape: &mhd2d_core::initial_data::Shape, g: &Grid) -> StreamFunction {
        StreamFunction::new(g, self.cfg.initial.amplitude, shape.clone())
    }

    fn datum_on(&self, g: &Grid) -> Result<InitialDatum> {
        let ini = &self.cfg.initial;
        Ok(match ini.construction {
            Construction::Flow => InitialDatum::from_flow(
                g,
                &self.stream(&ini.transport, g),
                &self.stream(&ini.velocity, g),
                ini.flow_steps,
            ),
            Construction::Potential => {
                let psi0 = self.stream(&ini.psi0, g).sample(g);
                let u0 = self.stream(&ini.velocity, g).sample_velocity(g);
                InitialDatum::from_potential(psi0, u0)?.0
            }
        })
    }

    /// Data on a periodic box, as required by the flow-map solver.
    fn periodic_datum_on(&self, g: &Grid) -> Result<InitialDatum> {
        let d = self.datum_on(g)?;
        if d.boundary() != X1Boundary::Periodic {
            bail!("flow-map runs need periodic data; set initial.construction = \"flow\"");
        }
        Ok(d)
    }

    fn random_field(&self, r: &mut impl rand::Rng, band: usize) -> RealField {
        band_limited(&self.grid, band, 1.0, r).scale(self.cfg.initial.amplitude)
    }
}

fn euler_state(d: &InitialDatum) -> EulerState {
    EulerState { psi: d.psi0.clone(), u: d.u0.clone(), p: RealField::zeros(d.grid()), t: 0.0 }
}

fn lattice(g: &Grid) -> impl Iterator<Item = (i64, i64, f64, f64)> + '_ {
    (0..g.nx()).flat_map(move |i| {
        (0..g.ny()).filter_map(move |j| {
            let (m, n) = g.mode(i, j);
            let (a, b) = (g.xi1(i), g.xi2(j));
            (m != 0 || n != 0).then_some((m, n, a, b))
        })
    })
}

fn dispersion(run: &mut Run) -> Result<()> {
    let g = run.grid.clone();
    let t_final = run.cfg.time.t_final;
    let samples = run.cfg.samples;
    let mut w = run.csv("dispersion.csv")?;
    w.write_record([
        "m", "n", "xi1", "xi2", "lambda_plus_re", "lambda_plus_im", "lambda_minus_re", "lambda_minus_im", "regime",
        "fitted_rate", "deviation",
    ])?;
    let (mut vieta, mut worst) = (0.0f64, 0.0f64);
    let y0 = Complex64::new(1.0, 0.0);
    for (m, n, a, b) in lattice(&g) {
        let e = eigenvalues(a, b)?;
        let k2 = a * a + b * b;
        let p = e.lambda_plus * e.lambda_minus;
        vieta = vieta
            .max((e.lambda_plus + e.lambda_minus + k2).norm() / k2)
            .max(if a == 0.0 { p.norm() } else { (p - a * a).norm() / (a * a) });
        // slow eigenmode, fitted over a window of about twenty e-folds
        let lm = e.lambda_minus;
        let window = if lm.re < 0.0 { t_final.min(20.0 / -lm.re) } else { t_final };
        let times: Vec<f64> = (0..samples).map(|k| window * k as f64 / (samples - 1) as f64).collect();
        let amp: Vec<f64> = times.iter().map(|&t| mode_solution(a, b, y0, lm * y0, t).0.norm()).collect();
        let rate = fit_tail(&times, &amp)?.rate;
        let dev = if lm.re == 0.0 { rate.abs() } else { ((rate - lm.re) / lm.re).abs() };
        worst = worst.max(dev);
        w.serialize((
            m, n, a, b, e.lambda_plus.re, e.lambda_plus.im, lm.re, lm.im, e.regime.as_str(), rate, dev,
        ))?;
    }
    w.flush()?;
    let tv = run.tol("vieta", 1e-12);
    let tf = run.tol("dispersion_fit", 1e-3);
    run.report.below("max relative Vieta residual", vieta, tv);
    run.report.below("max deviation of fitted slow rate from Re λ₋", worst, tf);
    Ok(())
}

fn linear_decay(run: &mut Run) -> Result<()> {
    let g = run.grid.clone();
    let mut r = rng(run.cfg.seed);
    let band = g.nx().min(g.ny()) / 4;
    let mut f = || run.random_field(&mut r, band).to_spectral();
    let (y0, y1) = ([f(), f()], [f(), f()]);
    let traj = evolve_linear(&y0, &y1, run.cfg.time.t_final, run.cfg.samples, None)?;
    write_block_energy_csv(&traj, run.ledger_file("block_energy.csv")?)?;
    let mut w = run.csv("mode_rates.csv")?;
    w.write_record(["m", "n", "fitted_rate", "lambda_minus_re", "deviation", "efolds"])?;
    let mut worst = 0.0f64;
    // real, well separated roots plus one shear mode
    for (m, n) in [(1i64, 2i64), (1, 3), (2, 3), (3, 0), (4, 0), (0, 2)] {
        if m.unsigned_abs() as usize > band || n.unsigned_abs() as usize > band {
            continue;
        }
        let (a, b) = (2.0 * std::f64::consts::PI * m as f64 / g.lx(), 2.0 * std::f64::consts::PI * n as f64 / g.ly());
        let lm = eigenvalues(a, b)?.lambda_minus.re;
        let fit = measured_decay_rate(&traj, m, n)?;
        let dev = if lm == 0.0 { fit.rate.abs() } else { ((fit.rate - lm) / lm).abs() };
        worst = worst.max(dev);
        w.serialize((m, n, fit.rate, lm, dev, fit.efolds))?;
    }
    w.flush()?;
    let last = traj.times.len() - 1;
    for c in 0..2 {
        run.field(&format!("y{}", c + 1), &traj.y[last][c].to_real(), traj.times[last])?;
    }
    let tol = run.tol("decay_rate", 1e-3);
    run.report.below("max deviation of fitted mode rate from Re λ₋", worst, tol);
    Ok(())
}

fn block_energy(run: &mut Run) -> Result<()> {
    let g = run.grid.clone();
    let mut r = rng(run.cfg.seed);
    let band = 5 * g.nx().min(g.ny()) / 16;
    let mut f = || run.random_field(&mut r, band).to_spectral();
    let (y0, y1) = ([f(), f()], [f(), f()]);
    let traj = evolve_linear(&y0, &y1, run.cfg.time.t_final, run.cfg.samples, None)?;
    let mut ledger = EnergyLedger::new();
    for n in 0..traj.times.len() {
        ledger.record(traj.times[n], &traj.y[n], &traj.yt[n], None, &[])?;
    }
    let rows = decay_table(&ledger)?;
    ledger.write_csv(run.ledger_file("energy.csv")?)?;
    let mut w = run.csv("decay_table.csv")?;
    w.write_record(["j", "k", "regime", "initial_mass", "rate", "efolds", "predicted_scale", "lambda_minus", "c"])?;
    for row in &rows {
        let k = match row.k {
            Horizontal::K(k) => k.to_string(),
            Horizontal::Shear => "shear".into(),
        };
        w.serialize((
            row.j,
            k,
            row.regime.as_str(),
            row.initial_mass,
            row.rate,
            row.efolds,
            row.predicted_scale,
            row.lambda_minus,
            row.c,
        ))?;
    }
    w.flush()?;
    let c = regime_constant(&rows).unwrap_or(0.0);
    let low = rows.iter().filter(|r| r.regime == Regime::Low && matches!(r.k, Horizontal::K(_))).count();
    let tol = run.tol("block_energy_increase", 1e-12);
    run.report.positive("recorded regime constant c", c);
    run.report.at_least("low-regime blocks fitted", low as f64, 1.0);
    run.report.below("max relative increase of g²_{j,k} between records", block_energy_max_increase(&ledger), tol);
    Ok(())
}

fn energy_identity(run: &mut Run) -> Result<()> {
    let d = run.datum_on(&run.grid)?;
    let init = euler_state(&d);
    let dt = run.cfg.time.dt;
    let t_final = run.cfg.time.t_final;
    let balance = |dt: f64, mut w: Option<&mut csv::Writer<File>>| -> Result<f64> {
        let mut s = EulerSolver::new(&init, EulerConfig { dt, linear_only: false })?;
        let mut prev = s.energy_record();
        let e0 = prev.e;
        let mut worst = 0.0f64;
        for _ in 0..(t_final / dt).round() as usize {
            s.step()?;
            let next = s.energy_record();
            let res = energy_ledger_update(&prev, &next);
            worst = worst.max(res);
            if let Some(w) = w.as_mut() {
                w.serialize((next.t, next.e, next.d, res / e0))?;
            }
            prev = next;
        }
        Ok(worst / e0)
    };
    let mut w = run.csv("energy_balance.csv")?;
    w.write_record(["t", "energy", "dissipation", "residual_over_e0"])?;
    let a = balance(dt, Some(&mut w))?;
    w.flush()?;
    let b = balance(dt / 2.0, None)?;
    let tol = run.tol("energy_residual", 1e-6);
    let order = run.tol("order_ratio", 3.5);
    run.report.below("max per-unit-time balance residual / E(0)", a, tol);
    run.report.at_least("residual ratio under dt halving", a / b, order);
    Ok(())
}

#[derive(Serialize)]
struct LagrangianSummary {
    ledger: mhd2d_core::diagnostics::LedgerSummary,
    curly_e0: f64,
    sup_curly_e: f64,
    sup_a3: [f64; 4],
    c1_empirical: f64,
    c2_empirical: f64,
    /// `∫₀^T‖∂ᵢY‖²_{Ḣ^{s₂+1}} dt` for `i = 1, 2`.
    anisotropy_integrals: [f64; 2],
}

fn lagrangian_smalldata(run: &mut Run) -> Result<()> {
    run.cfg.check_functional_exponents()?;
    let g = run.grid.clone();
    let d = run.periodic_datum_on(&g)?;
    let mut s = LagrangianSolver::new(&d.y0, &d.y1, LagrangianConfig::new(run.cfg.time.dt))?;
    let mut ledger = EnergyLedger::new();
    let mut monitors = Vec::new();
    let every = run.cfg.time.record_every;
    for k in 0..=run.cfg.steps() {
        if k > 0 {
            s.step()?;
        }
        let m = s.monitor();
        if k % every == 0 {
            let (y, yt) = s.spectral();
            let q = s.state().q.to_spectral();
            ledger.record(s.time(), y, yt, Some(&q), &[("energy", m.energy), ("dissipation", m.dissipation)])?;
        }
        monitors.push(m);
    }
    ledger.write_csv(run.ledger_file("energy.csv")?)?;
    let mut w = run.csv("monitors.csv")?;
    w.write_record([
        "t", "det_err", "constraint_err", "div_err", "grad_inf", "energy", "dissipation", "pressure_iterations",
    ])?;
    for m in &monitors {
        w.serialize((m.t, m.det_err, m.constraint_err, m.div_err, m.grad_inf, m.energy, m.dissipation, m.pressure_iterations))?;
    }
    w.flush()?;
    let (s1, s2) = (run.cfg.exponents.s1, run.cfg.exponents.s2);
    let margin = smallness_margin(&ledger, s1, s2)?;
    let mut w = run.csv("bootstrap.csv")?;
    w.write_record(["t", "curly_e", "ratio", "grad_y_b1", "grad_y_b2", "y_s1_plus_2", "y_s2_plus_2"])?;
    for n in 0..margin.times.len() {
        let a = margin.a3[n];
        w.serialize((margin.times[n], margin.curly_e[n], margin.ratio[n], a[0], a[1], a[2], a[3]))?;
    }
    w.flush()?;
    let st = s.state();
    for (name, f) in [("y1", &st.y[0]), ("y2", &st.y[1]), ("yt1", &st.yt[0]), ("yt2", &st.yt[1]), ("q", &st.q)] {
        run.field(name, f, st.t)?;
    }
    run.json(
        "summary.json",
        &LagrangianSummary {
            ledger: ledger.summary(&[s1, s2])?,
            curly_e0: margin.curly_e0,
            sup_curly_e: margin.sup_curly_e,
            sup_a3: margin.sup_a3,
            c1_empirical: margin.c1_empirical,
            c2_empirical: margin.c2_empirical,
            anisotropy_integrals: [ledger.l2_sq(Quantity::D1Y, s2 + 1.0), ledger.l2_sq(Quantity::D2Y, s2 + 1.0)],
        },
    )?;
    let worst = |f: fn(&mhd2d_core::lagrangian::Monitor) -> f64| monitors.iter().map(f).fold(0.0, f64::max);
    let tv = run.tol("volume", 1e-4);
    let tc = run.tol("constraint", 1e-4);
    run.report.below("max |det(I+∇Y) − 1|", worst(|m| m.det_err), tv);
    run.report.below("max ‖∇·Y − ρ(Y)‖_{L²}", worst(|m| m.constraint_err), tc);
    run.report.less_than("max ‖∇Y‖_{L∞}", worst(|m| m.grad_inf), 0.5);
    run.report.at_least("sup 𝓔_T (finite, nonnegative)", margin.sup_curly_e, 0.0);
    Ok(())
}

fn eulerian_smalldata(run: &mut Run) -> Result<()> {
    let d = run.datum_on(&run.grid)?;
    let mut s = EulerSolver::new(&euler_state(&d), EulerConfig { dt: run.cfg.time.dt, linear_only: false })?;
    let mut w = run.csv("energy.csv")?;
    w.write_record(["t", "energy", "dissipation", "balance_residual", "divergence", "grad_psi_inf_sq"])?;
    let mut prev = s.energy_record();
    let e0 = prev.e;
    let (mut res, mut div) = (0.0f64, 0.0f64);
    let every = run.cfg.time.record_every;
    for k in 1..=run.cfg.steps() {
        s.step()?;
        let next = s.energy_record();
        let r = energy_ledger_update(&prev, &next);
        res = res.max(r);
        prev = next;
        if k % every == 0 {
            let st = s.state();
            let dv = ops::div(&st.u).max_abs();
            div = div.max(dv);
            w.serialize((next.t, next.e, next.d, r, dv, blowup_integrand(&st.psi, &st.u)?))?;
        }
    }
    w.flush()?;
    let st = s.state();
    for (name, f) in [("psi", &st.psi), ("u1", &st.u[0]), ("u2", &st.u[1]), ("p", &st.p)] {
        run.field(name, f, st.t)?;
    }
    let tol = run.tol("energy_residual", 1e-6);
    let td = run.tol("divergence", 1e-10);
    run.report.below("max per-unit-time balance residual / E(0)", res / e0, tol);
    run.report.below("max |∇·u| at records", div, td);
    Ok(())
}

fn cross_validate(run: &mut Run) -> Result<()> {
    let g = run.grid.clone();
    let coarse = Grid::new(g.nx() / 2, g.ny() / 2, g.lx(), g.ly())?;
    let (dt, t_final) = (run.cfg.time.dt, run.cfg.time.t_final);
    let gap = |g: &Grid, dt: f64| -> Result<(f64, EulerState)> {
        let d = run.periodic_datum_on(g)?;
        let mut lag = LagrangianSolver::new(&d.y0, &d.y1, LagrangianConfig::new(dt))?;
        let mut eul = EulerSolver::new(&euler_state(&d), EulerConfig { dt, linear_only: false })?;
        for _ in 0..(t_final / dt).round() as usize {
            lag.step()?;
            eul.step()?;
        }
        let v = to_eulerian(&lag.state())?;
        let e = eul.state();
        let psi_e = e.psi.remove_mean();
        let num = ((&v.state.psi - &psi_e).l2_norm().powi(2) + ops::l2_norm2(&ops::sub2(&v.state.u, &e.u)).powi(2)).sqrt();
        let den = (psi_e.l2_norm().powi(2) + ops::l2_norm2(&e.u).powi(2)).sqrt();
        Ok((num / den, v.state))
    };
    let (a, _) = gap(&coarse, 2.0 * dt)?;
    let (b, from_lag) = gap(&g, dt)?;
    for (name, f) in [("psi_from_lagrangian", &from_lag.psi), ("u1_from_lagrangian", &from_lag.u[0]), ("u2_from_lagrangian", &from_lag.u[1])] {
        run.field(name, f, from_lag.t)?;
    }
    let mut w = run.csv("cross_validation.csv")?;
    w.write_record(["nx", "ny", "dt", "relative_gap"])?;
    w.serialize((coarse.nx(), coarse.ny(), 2.0 * dt, a))?;
    w.serialize((g.nx(), g.ny(), dt, b))?;
    w.flush()?;
    let tol = run.tol("formulation_gap", 5e-3);
    run.report.below("relative L² gap of (ψ, u)", b, tol);
    run.report.less_than("gap at full resolution / gap at half resolution", b / a, 1.0);
    Ok(())
}

fn build_initial_data(run: &mut Run) -> Result<()> {
    let g = run.grid.clone();
    let ini = run.cfg.initial.clone();
    let e = run.cfg.exponents.clone();
    run.cfg.check_functional_exponents()?;
    let (d, iterations) = match ini.construction {
        Construction::Flow => (run.datum_on(&g)?, None),
        Construction::Potential => {
            let psi0 = run.stream(&ini.psi0, &g).sample(&g);
            let u0 = run.stream(&ini.velocity, &g).sample_velocity(&g);
            let (d, init) = InitialDatum::from_potential(psi0, u0)?;
            let mut w = run.csv("flow_map_residuals.csv")?;
            w.write_record(["d1_y1", "d2_y1", "d1_y2", "d2_y2"])?;
            w.serialize(init.residuals)?;
            w.flush()?;
            (d, Some(init.iterations))
        }
    };
    let det_err = match ini.construction {
        Construction::Potential => det_u0(&d.psi0, &d.psitilde0)?.map(|v| v - 1.0).max_abs(),
        Construction::Flow => det_field(&ops::jacobian(&d.y0)).map(|v| v - 1.0).max_abs(),
    };
    run.json("smallness.json", &smallness_report(&d, e.k, e.s, e.s1, e.s2)?)?;
    for (name, f) in [
        ("psi0", &d.psi0),
        ("psitilde0", &d.psitilde0.field),
        ("u0_1", &d.u0[0]),
        ("u0_2", &d.u0[1]),
        ("y0_1", &d.y0[0]),
        ("y0_2", &d.y0[1]),
        ("y1_1", &d.y1[0]),
        ("y1_2", &d.y1[1]),
    ] {
        run.field(name, f, 0.0)?;
    }
    let tol = run.tol("det_u0", 1e-6);
    run.report.below("max |det U₀ − 1|", det_err, tol);
    if let Some(it) = iterations {
        run.report.below("flow-map fixed-point iterations", it as f64, 30.0);
    }
    Ok(())
}

fn norms_selftest(run: &mut Run) -> Result<()> {
    let g = run.grid.clone();
    let mut r = rng(run.cfg.seed);
    let c = make_cutoffs();
    let mut pu = 0.0f64;
    for k in 0..100_000 {
        let tau = 1e-3 + k as f64 * 1e-3;
        let s: f64 = (-40..60).map(|j| c.phi_j(j, tau)).sum();
        pu = pu.max((s - 1.0).abs());
    }
    let (lo, hi) = block_range(&g, Direction::Iso);
    let band = g.nx().min(g.ny()) / 2 - 1;
    let mut overlap = 0.0f64;
    let (mut violations, mut homog) = (0usize, 0.0f64);
    let mut w = run.csv("bernstein.csv")?;
    w.write_record(["sample", "j", "l2", "grad_l2", "upper_margin", "lower_margin"])?;
    for n in 0..run.cfg.samples {
        let u = band_limited(&g, band, 0.0, &mut r).to_spectral();
        if n % 10 == 0 {
            for j in lo..=hi {
                let bj = block(&u, Direction::Iso, j);
                for jj in (j + 2)..=hi {
                    overlap = overlap.max(block(&bj, Direction::Iso, jj).max_abs_coeff());
                }
            }
        }
        let j = lo + (n % (hi - lo + 1) as usize) as i32;
        let v = block(&u, Direction::Iso, j);
        let nv = v.l2_norm();
        if nv > 0.0 {
            let gv = (v.dx1().l2_norm().powi(2) + v.dx2().l2_norm().powi(2)).sqrt();
            let upper = 8.0 / 3.0 * 2f64.powi(j) * nv;
            let lower = 4.0 / 3.0 / 2f64.powi(j) * gv;
            if gv > upper || nv > lower {
                violations += 1;
            }
            w.serialize((n, j, nv, gv, (upper - gv) / upper, (lower - nv) / lower))?;
        }
        let scaled = u.scale(3.5);
        for s in [-0.75, 0.5, 1.5] {
            let a = sobolev_norm(&u, s, true)?;
            homog = homog.max((sobolev_norm(&scaled, s, true)? - 3.5 * a).abs() / a);
            let b = besov_norm(&u, s, 2.0, 1.0)?;
            homog = homog.max((besov_norm(&scaled, s, 2.0, 1.0)? - 3.5 * b).abs() / b);
        }
        let a = aniso_norm(&u, 0.5, -0.25);
        homog = homog.max((aniso_norm(&scaled, 0.5, -0.25) - 3.5 * a).abs() / a);
    }
    w.flush()?;
    let tp = run.tol("partition", 1e-12);
    let th = run.tol("homogeneity", 1e-12);
    run.report.below("max |Σ_j φ_j − 1|", pu, tp);
    run.report.below("max coefficient of Δ_j'Δ_j u, |j − j'| ≥ 2", overlap, 0.0);
    run.report.below("Bernstein violations", violations as f64, 0.0);
    run.report.below("max relative homogeneity defect of norms", homog, th);
    Ok(())
}

fn bony_selftest(run: &mut Run) -> Result<()> {
    let g = run.grid.clone();
    let mut r = rng(run.cfg.seed);
    let band = g.nx().min(g.ny()) / 3;
    let mut w = run.csv("bony.csv")?;
    w.write_record(["sample", "direction", "relative_error"])?;
    let mut worst = 0.0f64;
    for n in 0..(run.cfg.samples / 10).max(1) {
        let a = band_limited(&g, band, 0.0, &mut r).map(|v| v - 0.3);
        let b = band_limited(&g, band, 0.0, &mut r).map(|v| v + 1.1);
        let direct: SpectralField = product(&a, &b);
        for (label, dir) in [("iso", Direction::Iso), ("horizontal", Direction::Horizontal)] {
            let p = bony_decompose(&a.to_spectral(), &b.to_spectral(), dir)?;
            let e = (&p.total() - &direct).l2_norm() / direct.l2_norm();
            worst = worst.max(e);
            w.serialize((n, label, e))?;
        }
    }
    w.flush()?;
    let tol = run.tol("bony", 1e-10);
    run.report.below("max relative reconstruction error T_a b + T_b a + R(a,b) − ab", worst, tol);
    Ok(())
}

fn roundtrip(run: &mut Run) -> Result<()> {
    let g = run.grid.clone();
    let d = run.periodic_datum_on(&g)?;
    let lag = LagrangianSolver::new(&d.y0, &d.y1, LagrangianConfig::new(run.cfg.time.dt))?;
    let state: FlowMapState = lag.state();
    let v = to_eulerian(&state)?;
    let rel = |a: &RealField, b: &RealField| {
        let b = b.remove_mean();
        (&a.remove_mean() - &b).l2_norm() / b.l2_norm()
    };
    let res = [
        ("psi", rel(&v.state.psi, &d.psi0)),
        ("psitilde", rel(&v.psitilde, &d.psitilde0.field)),
        ("u", ops::l2_norm2(&ops::sub2(&v.state.u, &d.u0)) / ops::l2_norm2(&d.u0)),
    ];
    run.field("psi", &v.state.psi, 0.0)?;
    run.field("psitilde", &v.psitilde, 0.0)?;
    let tol = run.tol("roundtrip", 1e-4);
    let mut w = run.csv("roundtrip.csv")?;
    w.write_record(["quantity", "relative_residual"])?;
    for (name, r) in res {
        w.serialize((name, r))?;
        run.report.below(&format!("relative L² residual of {name}"), r, tol);
    }
    for (name, c) in [("curl of recovered ∇ψ", v.curl_residual[0]), ("curl of recovered ∇ψ̃", v.curl_residual[1])] {
        w.serialize((name, c))?;
        run.report.below(name, c, tol);
    }
    w.flush()?;
    Ok(())
}

fn random_displacement(g: &Grid, amp: f64, r: &mut impl rand::Rng) -> Field2 {
    let band = g.nx().min(g.ny()) / 8;
    let y = [band_limited(g, band, 2.0, r), band_limited(g, band, 2.0, r)];
    let n = ops::frobenius_inf(&ops::jacobian(&y));
    ops::scale2(&y, amp / n)
}

fn identities(run: &mut Run) -> Result<()> {
    let g = run.grid.clone();
    let mut r = rng(run.cfg.seed);
    let mut worst = [0.0f64; 5];
    for _ in 0..run.cfg.samples {
        let y = random_displacement(&g, 0.4, &mut r);
        let j = ops::jacobian(&y);
        let adj = adjugate(&j);
        let det = det_field(&j);
        for k in 0..g.len() {
            let m = [[1.0 + j[0][0].data()[k], j[0][1].data()[k]], [j[1][0].data()[k], 1.0 + j[1][1].data()[k]]];
            let b = [[adj.b11.data()[k], adj.b12.data()[k]], [adj.b21.data()[k], adj.b22.data()[k]]];
            for row in 0..2 {
                for col in 0..2 {
                    let p = m[row][0] * b[0][col] + m[row][1] * b[1][col];
                    let want = if row == col { det.data()[k] } else { 0.0 };
                    worst[0] = worst[0].max((p - want).abs());
                }
            }
        }
        worst[1] = worst[1].max((&(&ops::div(&y) - &rho(&y)).map(|v| v + 1.0) - &det).max_abs());
        let (fi, fii) = stretching_forms(&y);
        worst[2] = worst[2].max((&fi - &fii).max_abs() / fi.max_abs().max(1.0));
        let yt = random_displacement(&g, 0.3, &mut r);
        let q = band_limited(&g, 4, 2.0, &mut r);
        let fa = rhs_f(&y, &yt, &q);
        worst[3] = worst[3].max(ops::max_abs2(&ops::sub2(&fa, &rhs_f_divergence(&y, &yt, &q))) / ops::max_abs2(&fa));
        worst[4] = worst[4].max(ops::max_abs2(&magnetic_pullback_check(&y)));
    }
    let tol = run.tol("identities", 1e-10);
    let names = [
        "(I+∇Y)·adj − det·I",
        "det − (1 + ∇·Y − ρ(Y))",
        "stretching term, two forms",
        "forcing f, direct vs divergence form",
        "adjugate pullback of the uniform field",
    ];
    let mut w = run.csv("identities.csv")?;
    w.write_record(["identity", "max_residual"])?;
    for (name, v) in names.iter().zip(worst) {
        w.serialize((name, v))?;
        run.report.below(name, v, tol);
    }
    w.flush()?;
    Ok(())
}

fn composition(run: &mut Run) -> Result<()> {
    let defect = |g: &Grid| -> Result<f64> {
        let disp = flow_displacement(g, &run.stream(&run.cfg.initial.transport, g), 1.0, run.cfg.initial.flow_steps);
        let u = RealField::from_fn(g, |a, b| (3.0 * a + b).sin() + 0.5 * (a - 4.0 * b).cos());
        let v = compose(&u, &disp)?;
        Ok((v.l2_norm() - u.l2_norm()).abs() / u.l2_norm())
    };
    let g = run.grid.clone();
    let fine = Grid::new(2 * g.nx(), 2 * g.ny(), g.lx(), g.ly())?;
    let (a, b) = (defect(&g)?, defect(&fine)?);
    let mut w = run.csv("composition.csv")?;
    w.write_record(["nx", "ny", "isometry_defect"])?;
    w.serialize((g.nx(), g.ny(), a))?;
    w.serialize((fine.nx(), fine.ny(), b))?;
    w.flush()?;
    let tol = run.tol("isometry", 1e-3);
    run.report.below("|‖u∘Φ‖ − ‖u‖| / ‖u‖", a, tol);
    run.report.at_least("defect ratio under grid doubling", a / b, 4.0);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut n = names();
        n.sort();
        n.dedup();
        assert_eq!(n.len(), RECIPES.len());
    }

    #[test]
    fn unknown_name_lists_recipes() {
        let e = find("nope").err().unwrap().to_string();
        assert!(e.contains("dispersion") && e.contains("bony-selftest"));
    }
}
