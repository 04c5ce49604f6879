//! Run bookkeeping: per-block norm masses over time, the composite functionals
//! `E_T^s` and `𝓔_T^{s₁,s₂}`, and decay fits of the block energies `g_{j,k}²`.
//!
//! Every norm is assembled from isotropic block masses `‖Δ_j v‖²_{L²}`, so
//! `Ḣ^σ` is realized as `Ḃ^σ_{2,2}` and a Chemin–Lerner `L̃^∞_T` norm is the
//! block sum of per-block running maxima over the stored times.
use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpectralField;
use crate::linear::{block_energies, eigenvalues, fit_tail, shear_block_energies, Regime};
use crate::lp::{block_range, iso_masses, CutoffPair, Direction};

/// Fields whose block masses are tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Yt,
    D1Y,
    D2Y,
    /// Second component of `Y` only.
    Y2,
    Y,
    GradY,
    GradQ,
}

impl Quantity {
    pub const ALL: [Quantity; 7] = [
        Quantity::Yt,
        Quantity::D1Y,
        Quantity::D2Y,
        Quantity::Y2,
        Quantity::Y,
        Quantity::GradY,
        Quantity::GradQ,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::Yt => "yt",
            Quantity::D1Y => "d1y",
            Quantity::D2Y => "d2y",
            Quantity::Y2 => "y2",
            Quantity::Y => "y",
            Quantity::GradY => "grad_y",
            Quantity::GradQ => "grad_q",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.as_str() == s)
    }
}

/// Horizontal index of a block-table entry; `Shear` collects `ξ₁ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizontal {
    K(i32),
    Shear,
}

pub type BlockKey = (i32, Horizontal);

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    /// `‖Δ_j v‖²` per quantity and block, one map per stored time.
    pub masses: Vec<BTreeMap<(Quantity, i32), f64>>,
    /// `g_{j,k}²` per stored time.
    pub block_table: Vec<BTreeMap<BlockKey, f64>>,
    /// Free scalar channels aligned with `times`.
    pub channels: BTreeMap<String, Vec<f64>>,
    pub fits: Vec<DecayRow>,
}

fn vector_masses(parts: &[SpectralField], range: (i32, i32)) -> BTreeMap<i32, f64> {
    let mut out: BTreeMap<i32, f64> = (range.0..=range.1).map(|j| (j, 0.0)).collect();
    for p in parts {
        for (j, m) in iso_masses(p) {
            *out.entry(j).or_insert(0.0) += m;
        }
    }
    out
}

fn check_finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("non-finite ledger value in {what}")))
    }
}

impl Default for EnergyLedger {
    fn default() -> Self {
        Self::new()
    }
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self {
            times: Vec::new(),
            masses: Vec::new(),
            block_table: Vec::new(),
            channels: BTreeMap::new(),
            fits: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn has_q(&self) -> bool {
        self.masses
            .first()
            .is_some_and(|m| m.keys().any(|(q, _)| *q == Quantity::GradQ))
    }

    /// Appends the state `(Ŷ, Ŷ_t, q̂)` at time `t` with extra scalar channels.
    ///
    /// Times must increase strictly, `q` must be present at every record or at
    /// none, and every record must carry the same scalar channel names.
    pub fn record(
        &mut self,
        t: f64,
        y: &[SpectralField; 2],
        yt: &[SpectralField; 2],
        q: Option<&SpectralField>,
        scalars: &[(&str, f64)],
    ) -> Result<()> {
        if !self.is_empty() {
            if q.is_some() != self.has_q() {
                return Err(Error::InvalidParameter(
                    "pressure must be recorded at every time or never".into(),
                ));
            }
        }
        let grid = y[0].grid();
        let range = block_range(grid, Direction::Iso);
        let d1y = [y[0].dx1(), y[1].dx1()];
        let d2y = [y[0].dx2(), y[1].dx2()];
        let grad_y = [y[0].dx1(), y[0].dx2(), y[1].dx1(), y[1].dx2()];
        let mut masses = BTreeMap::new();
        let mut put = |qty: Quantity, m: BTreeMap<i32, f64>| {
            for (j, v) in m {
                masses.insert((qty, j), v);
            }
        };
        put(Quantity::Yt, vector_masses(yt, range));
        put(Quantity::D1Y, vector_masses(&d1y, range));
        put(Quantity::D2Y, vector_masses(&d2y, range));
        put(Quantity::Y2, vector_masses(&y[1..], range));
        put(Quantity::Y, vector_masses(y, range));
        put(Quantity::GradY, vector_masses(&grad_y, range));
        if let Some(q) = q {
            put(Quantity::GradQ, vector_masses(&q.grad(), range));
        }
        let table = block_table(y, yt);
        self.push(t, masses, table, scalars.iter().map(|&(n, v)| (n.to_string(), v)).collect())
    }

    fn push(
        &mut self,
        t: f64,
        masses: BTreeMap<(Quantity, i32), f64>,
        table: BTreeMap<BlockKey, f64>,
        scalars: BTreeMap<String, f64>,
    ) -> Result<()> {
        check_finite(t, "time")?;
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::InvalidParameter(format!(
                    "ledger time {t} does not follow {last}"
                )));
            }
        }
        for v in masses.values().chain(table.values()) {
            check_finite(*v, "block masses")?;
        }
        for (n, v) in &scalars {
            check_finite(*v, n)?;
        }
        if !self.times.is_empty() {
            let same = self.channels.len() == scalars.len()
                && scalars.keys().all(|k| self.channels.contains_key(k));
            if !same {
                return Err(Error::InvalidParameter(
                    "scalar channels must match the first record".into(),
                ));
            }
        }
        for (n, v) in scalars {
            self.channels.entry(n).or_default().push(v);
        }
        self.times.push(t);
        self.masses.push(masses);
        self.block_table.push(table);
        Ok(())
    }

    /// Ledger restricted to the first `n` records.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            times: self.times[..n].to_vec(),
            masses: self.masses[..n].to_vec(),
            block_table: self.block_table[..n].to_vec(),
            channels: self.channels.iter().map(|(k, v)| (k.clone(), v[..n].to_vec())).collect(),
            fits: Vec::new(),
        }
    }

    fn blocks(&self, q: Quantity) -> Vec<i32> {
        self.masses
            .first()
            .map(|m| m.keys().filter(|(qq, _)| *qq == q).map(|&(_, j)| j).collect())
            .unwrap_or_default()
    }

    fn mass(&self, n: usize, q: Quantity, j: i32) -> f64 {
        self.masses[n].get(&(q, j)).copied().unwrap_or(0.0)
    }

    /// `‖v‖²_{Ḣ^σ}` at record `n`.
    pub fn sobolev_sq(&self, n: usize, q: Quantity, sigma: f64) -> f64 {
        self.blocks(q)
            .into_iter()
            .map(|j| 4f64.powf(j as f64 * sigma) * self.mass(n, q, j))
            .sum()
    }

    /// `‖v‖²_{L̃^∞_T(Ḣ^σ)}` over all records.
    pub fn sup_sq(&self, q: Quantity, sigma: f64) -> f64 {
        self.blocks(q)
            .into_iter()
            .map(|j| {
                let m = (0..self.len()).map(|n| self.mass(n, q, j)).fold(0.0, f64::max);
                4f64.powf(j as f64 * sigma) * m
            })
            .sum()
    }

    /// `‖v‖²_{L²_T(Ḣ^σ)}`.
    pub fn l2_sq(&self, q: Quantity, sigma: f64) -> f64 {
        let v: Vec<f64> = (0..self.len()).map(|n| self.sobolev_sq(n, q, sigma)).collect();
        trapezoid(&self.times, &v)
    }

    /// `‖v‖²_{L¹_T(Ḣ^σ)}`.
    pub fn l1_sq(&self, q: Quantity, sigma: f64) -> f64 {
        let v: Vec<f64> = (0..self.len()).map(|n| self.sobolev_sq(n, q, sigma).sqrt()).collect();
        trapezoid(&self.times, &v).powi(2)
    }

    /// `‖v‖_{L̃^∞_T(Ḃ^σ_{2,1})}`.
    pub fn sup_besov1(&self, q: Quantity, sigma: f64) -> f64 {
        self.blocks(q)
            .into_iter()
            .map(|j| {
                let m = (0..self.len()).map(|n| self.mass(n, q, j)).fold(0.0, f64::max);
                2f64.powf(j as f64 * sigma) * m.sqrt()
            })
            .sum()
    }

    /// Long-format CSV `t,channel,value`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "channel", "value"])?;
        for n in 0..self.len() {
            let t = self.times[n].to_string();
            for (&(q, j), v) in &self.masses[n] {
                w.write_record([t.as_str(), &format!("mass/{}/{j}", q.as_str()), &v.to_string()])?;
            }
            for (&(j, k), v) in &self.block_table[n] {
                let k = match k {
                    Horizontal::K(k) => k.to_string(),
                    Horizontal::Shear => "shear".into(),
                };
                w.write_record([t.as_str(), &format!("g2/{j}/{k}"), &v.to_string()])?;
            }
            for (name, v) in &self.channels {
                w.write_record([t.as_str(), name, &v[n].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut ledger = Self::new();
        let mut current: Option<(f64, BTreeMap<(Quantity, i32), f64>, BTreeMap<BlockKey, f64>, BTreeMap<String, f64>)> =
            None;
        let bad = |s: &str| Error::InvalidParameter(format!("malformed ledger row: {s}"));
        for rec in r.records() {
            let rec = rec?;
            let (t, name, value) = (&rec[0], &rec[1], &rec[2]);
            let t: f64 = t.parse().map_err(|_| bad(t))?;
            let value: f64 = value.parse().map_err(|_| bad(value))?;
            if current.as_ref().is_none_or(|c| c.0 != t) {
                if let Some((t0, m, b, s)) = current.take() {
                    ledger.push(t0, m, b, s)?;
                }
                current = Some((t, BTreeMap::new(), BTreeMap::new(), BTreeMap::new()));
            }
            let cur = current.as_mut().expect("row group");
            let parts: Vec<&str> = name.split('/').collect();
            match parts.as_slice() {
                ["mass", q, j] => {
                    let q = Quantity::parse(q).ok_or_else(|| bad(name))?;
                    cur.1.insert((q, j.parse().map_err(|_| bad(name))?), value);
                }
                ["g2", j, k] => {
                    let k = if *k == "shear" {
                        Horizontal::Shear
                    } else {
                        Horizontal::K(k.parse().map_err(|_| bad(name))?)
                    };
                    cur.2.insert((j.parse().map_err(|_| bad(name))?, k), value);
                }
                _ => {
                    cur.3.insert(name.to_string(), value);
                }
            }
        }
        if let Some((t0, m, b, s)) = current {
            ledger.push(t0, m, b, s)?;
        }
        Ok(ledger)
    }
}

/// Trapezoid rule on (possibly non-uniform) sample times.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// `g_{j,k}²` for every populated block, plus the `ξ₁ = 0` stratum.
pub fn block_table(y: &[SpectralField; 2], yt: &[SpectralField; 2]) -> BTreeMap<BlockKey, f64> {
    let mut out: BTreeMap<BlockKey, f64> = block_energies(y, yt)
        .into_iter()
        .map(|((j, k), v)| ((j, Horizontal::K(k)), v))
        .collect();
    for (j, v) in shear_block_energies(y, yt) {
        out.insert((j, Horizontal::Shear), v);
    }
    out
}

/// The eleven summands of `E_T^s` in display order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalE {
    pub s: f64,
    pub summands: [f64; 11],
    pub total: f64,
}

pub const FUNCTIONAL_LABELS: [&str; 11] = [
    "yt_sup_s",
    "yt_sup_s+1",
    "d1y_sup_s",
    "y2_sup_s+1",
    "y_sup_s+2",
    "yt_l2_s+1",
    "yt_l2_s+2",
    "d1y_l2_s+1",
    "y2_l2_s+2",
    "grad_q_l2_s",
    "grad_q_l1_s",
];

#[allow(non_snake_case)]
pub fn functional_E(ledger: &EnergyLedger, s: f64) -> Result<FunctionalE> {
    if !ledger.has_q() {
        return Err(Error::InvalidParameter("functional needs the pressure channel".into()));
    }
    use Quantity::*;
    let summands = [
        ledger.sup_sq(Yt, s),
        ledger.sup_sq(Yt, s + 1.0),
        ledger.sup_sq(D1Y, s),
        ledger.sup_sq(Y2, s + 1.0),
        ledger.sup_sq(Y, s + 2.0),
        ledger.l2_sq(Yt, s + 1.0),
        ledger.l2_sq(Yt, s + 2.0),
        ledger.l2_sq(D1Y, s + 1.0),
        ledger.l2_sq(Y2, s + 2.0),
        ledger.l2_sq(GradQ, s),
        ledger.l1_sq(GradQ, s),
    ];
    Ok(FunctionalE {
        s,
        summands,
        total: summands.iter().sum(),
    })
}

/// `E_0^s` from the first record, with `Y₁ = Y_t(0)`.
#[allow(non_snake_case)]
pub fn initial_E(ledger: &EnergyLedger, s: f64) -> f64 {
    if ledger.is_empty() {
        return 0.0;
    }
    use Quantity::*;
    ledger.sobolev_sq(0, Yt, s)
        + ledger.sobolev_sq(0, Yt, s + 1.0)
        + ledger.sobolev_sq(0, D1Y, s)
        + ledger.sobolev_sq(0, Y, s + 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallnessMargin {
    pub s1: f64,
    pub s2: f64,
    pub times: Vec<f64>,
    /// `𝓔_T` for each truncation `T = times[n]`.
    pub curly_e: Vec<f64>,
    /// `‖∇Y‖_{L̃^∞(Ḃ¹_{2,1})}`, `‖∇Y‖_{L̃^∞(Ḃ²_{2,1})}`, `‖Y‖_{L̃^∞(Ḣ^{s₁+2})}`, `‖Y‖_{L̃^∞(Ḣ^{s₂+2})}`.
    pub a3: Vec<[f64; 4]>,
    pub curly_e0: f64,
    /// `𝓔_T/𝓔₀` (zero when both vanish).
    pub ratio: Vec<f64>,
    pub sup_curly_e: f64,
    pub sup_a3: [f64; 4],
    /// Empirical bootstrap constant `max_T 𝓔_T/𝓔₀`.
    pub c1_empirical: f64,
    /// Empirical `max_T Σ(a3)/𝓔_T^{1/2}`.
    pub c2_empirical: f64,
}

pub fn smallness_margin(ledger: &EnergyLedger, s1: f64, s2: f64) -> Result<SmallnessMargin> {
    let e0 = initial_E(ledger, s1) + initial_E(ledger, s2);
    let mut out = SmallnessMargin {
        s1,
        s2,
        times: ledger.times.clone(),
        curly_e: Vec::with_capacity(ledger.len()),
        a3: Vec::with_capacity(ledger.len()),
        curly_e0: e0,
        ratio: Vec::with_capacity(ledger.len()),
        sup_curly_e: 0.0,
        sup_a3: [0.0; 4],
        c1_empirical: 0.0,
        c2_empirical: 0.0,
    };
    for n in 1..=ledger.len() {
        let part = ledger.truncated(n);
        let e = functional_E(&part, s1)?.total + functional_E(&part, s2)?.total;
        let a3 = [
            part.sup_besov1(Quantity::GradY, 1.0),
            part.sup_besov1(Quantity::GradY, 2.0),
            part.sup_sq(Quantity::Y, s1 + 2.0).sqrt(),
            part.sup_sq(Quantity::Y, s2 + 2.0).sqrt(),
        ];
        let ratio = if e == 0.0 { 0.0 } else { e / e0 };
        out.sup_curly_e = out.sup_curly_e.max(e);
        for (m, v) in out.sup_a3.iter_mut().zip(a3) {
            *m = m.max(v);
        }
        out.c1_empirical = out.c1_empirical.max(ratio);
        if e > 0.0 {
            out.c2_empirical = out.c2_empirical.max(a3.iter().sum::<f64>() / e.sqrt());
        }
        out.curly_e.push(e);
        out.a3.push(a3);
        out.ratio.push(ratio);
    }
    Ok(out)
}

/// Fitted decay of one block next to the regime prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub j: i32,
    pub k: Horizontal,
    pub initial_mass: f64,
    /// Fitted exponent of `g_{j,k}(t)`; negative for decay.
    pub rate: f64,
    pub efolds: f64,
    pub regime: Regime,
    /// `2^{2j}` (low) or `2^{2(k−j)}` (high); zero for the shear stratum.
    pub predicted_scale: f64,
    /// Real part of `λ₋` at the block's center frequency, with `|ξ₁|` capped at `|ξ|`.
    pub lambda_minus: f64,
    /// `−rate/predicted_scale`, absent for the shear stratum.
    pub c: Option<f64>,
}

/// Mass below which a block is skipped.
pub const DECAY_MASS_FLOOR: f64 = 1e-14;

/// Center of the dyadic annulus `j`, on the plateau of `φ_j`.
pub fn block_center(j: i32) -> f64 {
    let c = CutoffPair;
    let (lo, hi) = c.phi_support();
    (lo * hi).sqrt() * 2f64.powi(j)
}

/// Per-block decay fits over the last half of the ledger.
pub fn decay_table(ledger: &EnergyLedger) -> Result<Vec<DecayRow>> {
    let keys: Vec<BlockKey> = {
        let mut all: Vec<BlockKey> = ledger.block_table.iter().flat_map(|m| m.keys().copied()).collect();
        all.sort();
        all.dedup();
        all
    };
    let mut rows = Vec::new();
    for key in keys {
        let g2: Vec<f64> = ledger
            .block_table
            .iter()
            .map(|m| m.get(&key).copied().unwrap_or(0.0))
            .collect();
        if g2.iter().copied().fold(0.0, f64::max) < DECAY_MASS_FLOOR {
            continue;
        }
        let amp: Vec<f64> = g2.iter().map(|v| v.max(0.0).sqrt()).collect();
        let fit = fit_tail(&ledger.times, &amp)?;
        let (j, k) = key;
        let rad = block_center(j);
        let row = match k {
            Horizontal::K(k) => {
                let reg = if rad * rad <= 2.0 * block_center(k) {
                    Regime::Low
                } else {
                    Regime::High
                };
                let x1 = block_center(k).min(rad);
                let x2 = (rad * rad - x1 * x1).sqrt();
                let scale = match reg {
                    Regime::Low => 4f64.powi(j),
                    Regime::High => 4f64.powi(k - j),
                };
                DecayRow {
                    j,
                    k: Horizontal::K(k),
                    initial_mass: g2[0],
                    rate: fit.rate,
                    efolds: fit.efolds,
                    regime: reg,
                    predicted_scale: scale,
                    lambda_minus: eigenvalues(x1, x2)?.lambda_minus.re,
                    c: Some(-fit.rate / scale),
                }
            }
            Horizontal::Shear => DecayRow {
                j,
                k,
                initial_mass: g2[0],
                rate: fit.rate,
                efolds: fit.efolds,
                regime: Regime::High,
                predicted_scale: 0.0,
                lambda_minus: 0.0,
                c: None,
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

/// The single constant `c` with every horizontal block decaying at least at `c`
/// times its regime scale: the minimum over rows.
pub fn regime_constant(rows: &[DecayRow]) -> Option<f64> {
    rows.iter().filter_map(|r| r.c).reduce(f64::min)
}

/// Largest relative increase of any `g_{j,k}²` between consecutive records.
pub fn block_energy_max_increase(ledger: &EnergyLedger) -> f64 {
    let mut worst: f64 = 0.0;
    for w in ledger.block_table.windows(2) {
        for (key, &b) in &w[1] {
            let a = w[0].get(key).copied().unwrap_or(0.0);
            if b > a {
                worst = worst.max((b - a) / a.max(f64::MIN_POSITIVE));
            }
        }
    }
    worst
}

/// JSON summary of a ledger.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub records: usize,
    pub t_final: f64,
    pub functionals: Vec<FunctionalE>,
    pub final_channels: BTreeMap<String, f64>,
    pub fits: Vec<DecayRow>,
}

impl EnergyLedger {
    pub fn summary(&self, exponents: &[f64]) -> Result<LedgerSummary> {
        let functionals = if self.has_q() {
            exponents.iter().map(|&s| functional_E(self, s)).collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(LedgerSummary {
            records: self.len(),
            t_final: self.times.last().copied().unwrap_or(0.0),
            functionals,
            final_channels: self
                .channels
                .iter()
                .filter_map(|(k, v)| v.last().map(|x| (k.clone(), *x)))
                .collect(),
            fits: self.fits.clone(),
        })
    }
}
