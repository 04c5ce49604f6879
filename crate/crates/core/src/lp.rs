//! Dyadic frequency analysis: cutoffs, isotropic/horizontal/vertical blocks,
//! Besov-type norms and Bony's paraproduct split.
//!
//! `χ` is a C^∞ step equal to one on `[0, 3/4]` and vanishing from `4/3` on;
//! `φ(τ) = χ(τ/2) − χ(τ)` so every partition sum telescopes exactly.
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, RealField, SpectralField};

const CHI_FLAT: f64 = 0.75;
const CHI_EDGE: f64 = 4.0 / 3.0;

fn bump_exp(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// C^∞ step: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = bump_exp(x);
        a / (a + bump_exp(1.0 - x))
    }
}

/// Radial cutoffs `(φ, χ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CutoffPair;

impl CutoffPair {
    pub fn chi(&self, tau: f64) -> f64 {
        smooth_step((CHI_EDGE - tau) / (CHI_EDGE - CHI_FLAT))
    }

    pub fn phi(&self, tau: f64) -> f64 {
        self.chi(0.5 * tau) - self.chi(tau)
    }

    pub fn phi_support(&self) -> (f64, f64) {
        (CHI_FLAT, 2.0 * CHI_EDGE)
    }

    pub fn chi_support(&self) -> (f64, f64) {
        (0.0, CHI_EDGE)
    }

    /// `φ(2^{-j} τ)`.
    #[inline]
    pub fn phi_j(&self, j: i32, tau: f64) -> f64 {
        self.phi(tau * 2f64.powi(-j))
    }

    /// `χ(2^{-j} τ)`.
    #[inline]
    pub fn chi_j(&self, j: i32, tau: f64) -> f64 {
        self.chi(tau * 2f64.powi(-j))
    }

    /// The (at most two) indices `j` with `φ(2^{-j}τ) ≠ 0`, with weights.
    pub fn active(&self, tau: f64) -> Vec<(i32, f64)> {
        if tau <= 0.0 {
            return Vec::new();
        }
        let top = (tau / CHI_FLAT).log2().floor() as i32;
        (top - 2..=top + 1)
            .filter_map(|j| {
                let w = self.phi_j(j, tau);
                (w != 0.0).then_some((j, w))
            })
            .collect()
    }
}

pub fn make_cutoffs() -> CutoffPair {
    CutoffPair
}

/// Smallest `N₀` with `Δ_jΔ_k^h = 0` whenever `j < k − N₀`: the isotropic
/// annulus `|ξ| ≤ (8/3)2^j` must miss `|ξ₁| ≥ (3/4)2^k`.
pub fn aniso_offset() -> i32 {
    let c = CutoffPair;
    let (lo, hi) = c.phi_support();
    let mut n0 = 0;
    while lo * 2f64.powi(n0 + 1) <= hi {
        n0 += 1;
    }
    n0
}

/// Frequency variable a block acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `|ξ|`
    Iso,
    /// `|ξ₁|`
    Horizontal,
    /// `|ξ₂|`
    Vertical,
}

fn freq(grid: &Grid, dir: Direction, i: usize, j: usize) -> f64 {
    match dir {
        Direction::Iso => grid.xi_sq(i, j).sqrt(),
        Direction::Horizontal => grid.xi1(i).abs(),
        Direction::Vertical => grid.xi2(j).abs(),
    }
}

/// Block indices that can be nonzero on `grid` for `dir`.
pub fn block_range(grid: &Grid, dir: Direction) -> (i32, i32) {
    let (lo, hi) = match dir {
        Direction::Iso => grid.xi_range(),
        Direction::Horizontal => {
            let f = 2.0 * std::f64::consts::PI / grid.lx();
            (f, f * (grid.nx() / 2) as f64)
        }
        Direction::Vertical => {
            let f = 2.0 * std::f64::consts::PI / grid.ly();
            (f, f * (grid.ny() / 2) as f64)
        }
    };
    let (a, b) = CutoffPair.phi_support();
    ((lo / b).log2().floor() as i32, (hi / a).log2().ceil() as i32)
}

/// `Δ_j` (or its horizontal/vertical analogue) applied to `u`.
pub fn block(u: &SpectralField, dir: Direction, j: i32) -> SpectralField {
    let g = u.grid().clone();
    let c = CutoffPair;
    u.apply(|a, b| c.phi_j(j, freq(&g, dir, a, b)).into())
}

/// `S_j = χ(2^{-j}·)`.
pub fn low_pass(u: &SpectralField, dir: Direction, j: i32) -> SpectralField {
    let g = u.grid().clone();
    let c = CutoffPair;
    u.apply(|a, b| c.chi_j(j, freq(&g, dir, a, b)).into())
}

pub fn block_iso(u: &SpectralField, j: i32) -> SpectralField {
    block(u, Direction::Iso, j)
}
pub fn block_h(u: &SpectralField, k: i32) -> SpectralField {
    block(u, Direction::Horizontal, k)
}
pub fn block_v(u: &SpectralField, l: i32) -> SpectralField {
    block(u, Direction::Vertical, l)
}
pub fn low_pass_iso(u: &SpectralField, j: i32) -> SpectralField {
    low_pass(u, Direction::Iso, j)
}
pub fn low_pass_h(u: &SpectralField, k: i32) -> SpectralField {
    low_pass(u, Direction::Horizontal, k)
}
pub fn low_pass_v(u: &SpectralField, l: i32) -> SpectralField {
    low_pass(u, Direction::Vertical, l)
}

/// `Δ_jΔ_k^h u`.
pub fn block_jk(u: &SpectralField, j: i32, k: i32) -> SpectralField {
    let g = u.grid().clone();
    let c = CutoffPair;
    u.apply(|a, b| {
        let w = c.phi_j(j, g.xi_sq(a, b).sqrt()) * c.phi_j(k, g.xi1(a).abs());
        w.into()
    })
}

/// Index of a block in a [`DyadicBlockSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockIndex {
    J(i32),
    JK(i32, i32),
}

/// A field split into its nonzero dyadic blocks.
#[derive(Debug, Clone)]
pub struct DyadicBlockSet {
    pub source: SpectralField,
    pub blocks: BTreeMap<BlockIndex, SpectralField>,
    pub range: (i32, i32),
    /// `S_{j_lo} u` minus the mean: content below the lowest stored block.
    pub residue: SpectralField,
}

impl DyadicBlockSet {
    pub fn iso(u: &SpectralField) -> Self {
        let range = block_range(u.grid(), Direction::Iso);
        let mut blocks = BTreeMap::new();
        for j in range.0..=range.1 {
            let b = block_iso(u, j);
            if b.max_abs_coeff() > 0.0 {
                blocks.insert(BlockIndex::J(j), b);
            }
        }
        let residue = low_pass_iso(u, range.0).remove_mean();
        DyadicBlockSet {
            source: u.clone(),
            blocks,
            range,
            residue,
        }
    }

    /// All nonzero `Δ_jΔ_k^h` blocks.
    pub fn aniso(u: &SpectralField) -> Self {
        let range = block_range(u.grid(), Direction::Iso);
        let hr = block_range(u.grid(), Direction::Horizontal);
        let n0 = aniso_offset();
        let mut blocks = BTreeMap::new();
        for j in range.0..=range.1 {
            for k in hr.0..=hr.1.min(j + n0) {
                let b = block_jk(u, j, k);
                if b.max_abs_coeff() > 0.0 {
                    blocks.insert(BlockIndex::JK(j, k), b);
                }
            }
        }
        let residue = low_pass_iso(u, range.0).remove_mean();
        DyadicBlockSet {
            source: u.clone(),
            blocks,
            range,
            residue,
        }
    }

    /// Sum of all blocks plus the residue.
    pub fn reconstruct(&self) -> SpectralField {
        let mut acc = self.residue.clone();
        for b in self.blocks.values() {
            acc += b;
        }
        acc
    }
}

/// Squared L² masses `‖Δ_j u‖²` of every nonzero isotropic block.
pub fn iso_masses(u: &SpectralField) -> BTreeMap<i32, f64> {
    let g = u.grid();
    let c = CutoffPair;
    let mut out = BTreeMap::new();
    for a in 0..g.nx() {
        for b in 0..g.ny() {
            let v = u.at(a, b).norm_sqr();
            if v == 0.0 {
                continue;
            }
            for (j, w) in c.active(g.xi_sq(a, b).sqrt()) {
                *out.entry(j).or_insert(0.0) += w * w * v;
            }
        }
    }
    for v in out.values_mut() {
        *v *= g.area();
    }
    out
}

/// Squared L² masses `‖Δ_jΔ_k^h u‖²` of every nonzero anisotropic block.
pub fn aniso_masses(u: &SpectralField) -> BTreeMap<(i32, i32), f64> {
    let g = u.grid();
    let c = CutoffPair;
    let mut out = BTreeMap::new();
    for a in 0..g.nx() {
        let hk = c.active(g.xi1(a).abs());
        if hk.is_empty() {
            continue;
        }
        for b in 0..g.ny() {
            let v = u.at(a, b).norm_sqr();
            if v == 0.0 {
                continue;
            }
            for (j, wj) in c.active(g.xi_sq(a, b).sqrt()) {
                for &(k, wk) in &hk {
                    *out.entry((j, k)).or_insert(0.0) += (wj * wk).powi(2) * v;
                }
            }
        }
    }
    for v in out.values_mut() {
        *v *= g.area();
    }
    out
}

/// Norm families of the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    SobolevHom,
    SobolevInhom,
    Besov,
    Aniso,
    CheminLerner,
    AKs,
}

/// Exportable norm evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub kind: NormKind,
    pub exponents: Vec<f64>,
    pub value: f64,
}

fn check_index(name: &str, v: f64) -> Result<()> {
    if v >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must lie in [1, ∞]")))
    }
}

/// `ℓ^r` (or `L^r` counting measure) norm of nonnegative terms.
fn lr_sum(terms: impl Iterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        terms.fold(0.0, f64::max)
    } else {
        terms.map(|t| t.powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

/// `‖u‖_{Ḣ^s}` (homogeneous, mean excluded) or `‖u‖_{H^s}` with weight `(1+|ξ|²)^s`.
pub fn sobolev_norm(u: &SpectralField, s: f64, homogeneous: bool) -> Result<f64> {
    if homogeneous && s <= -1.0 {
        return Err(Error::InvalidParameter(format!(
            "homogeneous exponent s = {s} ≤ -1 is outside the supported range"
        )));
    }
    let g = u.grid();
    let mut acc = 0.0;
    for a in 0..g.nx() {
        for b in 0..g.ny() {
            let k2 = g.xi_sq(a, b);
            let w = if homogeneous {
                if k2 == 0.0 {
                    continue;
                }
                k2.powf(s)
            } else {
                (1.0 + k2).powf(s)
            };
            acc += w * u.at(a, b).norm_sqr();
        }
    }
    Ok((acc * g.area()).sqrt())
}

/// `L^p` norm of a real field; `p ≠ 2` uses a 2× oversampled evaluation.
pub fn lp_norm(u: &SpectralField, p: f64) -> Result<f64> {
    check_index("p", p)?;
    if p == 2.0 {
        return Ok(u.l2_norm());
    }
    let fine = u.grid().refined(2)?;
    let f = u.resample(&fine).to_real();
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let sum: f64 = f.data().iter().map(|v| v.abs().powf(p)).sum();
    Ok((sum * fine.cell_area()).powf(1.0 / p))
}

/// `‖u‖_{Ḃ^s_{p,r}} = ‖(2^{js}‖Δ_j u‖_{L^p})_j‖_{ℓ^r}` over resolved blocks.
pub fn besov_norm(u: &SpectralField, s: f64, p: f64, r: f64) -> Result<f64> {
    check_index("p", p)?;
    check_index("r", r)?;
    let terms: Vec<f64> = if p == 2.0 {
        iso_masses(u)
            .into_iter()
            .map(|(j, m)| 2f64.powf(j as f64 * s) * m.sqrt())
            .collect()
    } else {
        let (lo, hi) = block_range(u.grid(), Direction::Iso);
        (lo..=hi)
            .map(|j| Ok(2f64.powf(j as f64 * s) * lp_norm(&block_iso(u, j), p)?))
            .collect::<Result<_>>()?
    };
    Ok(lr_sum(terms.into_iter(), r))
}

/// `‖u‖_{B^{s₁,s₂}} = Σ_{j,k} 2^{js₁}2^{ks₂}‖Δ_jΔ_k^h u‖_{L²}`.
pub fn aniso_norm(u: &SpectralField, s1: f64, s2: f64) -> f64 {
    let n0 = aniso_offset();
    aniso_masses(u)
        .into_iter()
        .map(|((j, k), m)| {
            debug_assert!(k <= j + n0, "block ({j},{k}) beyond the support offset");
            2f64.powf(j as f64 * s1 + k as f64 * s2) * m.sqrt()
        })
        .sum()
}

/// Chemin–Lerner norm `‖u‖_{L̃^λ_T(Ḃ^s_{p,r})}` from samples uniformly spaced on `[0, T]`:
/// per-block trapezoid in time, then the weighted `ℓ^r` sum.
pub fn chemin_lerner_norm(
    series: &[SpectralField],
    lambda: f64,
    s: f64,
    p: f64,
    r: f64,
    t_final: f64,
) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::InvalidParameter(
            "Chemin-Lerner norm needs at least two time samples".into(),
        ));
    }
    check_index("lambda", lambda)?;
    check_index("p", p)?;
    check_index("r", r)?;
    let grid = series[0].grid();
    let (lo, hi) = block_range(grid, Direction::Iso);
    let dt = t_final / (series.len() - 1) as f64;
    let mut per_block: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for u in series {
        if p == 2.0 {
            let masses = iso_masses(u);
            for j in lo..=hi {
                per_block
                    .entry(j)
                    .or_default()
                    .push(masses.get(&j).copied().unwrap_or(0.0).sqrt());
            }
        } else {
            for j in lo..=hi {
                per_block.entry(j).or_default().push(lp_norm(&block_iso(u, j), p)?);
            }
        }
    }
    let terms = per_block.into_iter().map(|(j, a)| {
        let tn = if lambda.is_infinite() {
            a.iter().copied().fold(0.0, f64::max)
        } else {
            trapezoid(&a.iter().map(|v| v.powf(lambda)).collect::<Vec<_>>(), dt).powf(1.0 / lambda)
        };
        2f64.powf(j as f64 * s) * tn
    });
    Ok(lr_sum(terms, r))
}

/// Composite trapezoid rule on uniform samples.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Weighted norm `max_{|α|≤k} sup_{x₁} ⟨x̃₁⟩^s ‖∂^α f(x₁,·)‖_{L²_v}`, `x̃₁ = x₁ − lx/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AksNorm {
    pub value: f64,
    /// Share of the squared column mass sitting in the two edge columns.
    pub boundary_fraction: f64,
    pub truncation_warning: bool,
}

pub fn a_ks_norm(f: &RealField, k: u32, s: f64) -> AksNorm {
    let g = f.grid();
    let spec = f.to_spectral();
    let half = 0.5 * g.lx();
    let column_norms = |h: &RealField| -> Vec<f64> {
        (0..g.nx())
            .map(|i| {
                let ss: f64 = (0..g.ny()).map(|j| h.at(i, j).powi(2)).sum();
                (ss * g.dy()).sqrt()
            })
            .collect()
    };
    let mut value: f64 = 0.0;
    for order in 0..=k {
        for a in 0..=order {
            let b = order - a;
            let d = spec
                .derivative(crate::grid::Axis::X1, a)
                .derivative(crate::grid::Axis::X2, b)
                .to_real();
            for (i, c) in column_norms(&d).into_iter().enumerate() {
                let xt = g.x1(i) - half;
                value = value.max((1.0 + xt * xt).powf(0.5 * s) * c);
            }
        }
    }
    let cols = column_norms(f);
    let total: f64 = cols.iter().map(|c| c * c).sum();
    let edge = cols[0].powi(2) + cols[g.nx() - 1].powi(2);
    let boundary_fraction = if total > 0.0 { edge / total } else { 0.0 };
    AksNorm {
        value,
        boundary_fraction,
        truncation_warning: boundary_fraction > 1e-8,
    }
}

/// Bony split `ab = T(a,b) + T(b,a) + R(a,b)`, each part dealiased.
#[derive(Debug, Clone)]
pub struct BonyParts {
    pub t: SpectralField,
    pub tbar: SpectralField,
    pub r: SpectralField,
}

impl BonyParts {
    pub fn total(&self) -> SpectralField {
        let mut s = self.t.clone();
        s += &self.tbar;
        s += &self.r;
        s
    }
}

/// Part of `u` with zero frequency in the direction's variable: the mean
/// (isotropic) or the x₁-average (horizontal).
fn zero_part(u: &SpectralField, dir: Direction) -> SpectralField {
    let g = u.grid().clone();
    u.apply(|a, b| {
        let z = match dir {
            Direction::Iso => g.xi_sq(a, b) == 0.0,
            Direction::Horizontal => g.xi1(a) == 0.0,
            Direction::Vertical => g.xi2(b) == 0.0,
        };
        if z { 1.0 } else { 0.0 }.into()
    })
}

fn paraproduct(a: &SpectralField, b: &SpectralField, dir: Direction) -> RealField {
    let (lo, hi) = block_range(a.grid(), dir);
    let mut acc = RealField::zeros(a.grid());
    for j in lo..=hi {
        let bj = block(b, dir, j);
        if bj.max_abs_coeff() == 0.0 {
            continue;
        }
        acc += &(&low_pass(a, dir, j - 1).to_real() * &bj.to_real());
    }
    acc
}

/// Paraproducts `T(a,b) = Σ S_{j−1}a Δ_j b`, `T̄ = T(b,a)` and the remainder
/// `R = Σ Δ_j a (Δ_{j−1}+Δ_j+Δ_{j+1}) b`; the zero-frequency product of the two
/// inputs is booked in `R` so the three parts sum to `ab` exactly.
pub fn bony_decompose(a: &SpectralField, b: &SpectralField, dir: Direction) -> Result<BonyParts> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    if dir == Direction::Vertical {
        return Err(Error::InvalidParameter(
            "Bony split is provided for iso and horizontal directions".into(),
        ));
    }
    let t = paraproduct(a, b, dir);
    let tbar = paraproduct(b, a, dir);
    let (lo, hi) = block_range(a.grid(), dir);
    let mut r = &zero_part(a, dir).to_real() * &zero_part(b, dir).to_real();
    for j in lo..=hi {
        let aj = block(a, dir, j);
        if aj.max_abs_coeff() == 0.0 {
            continue;
        }
        let mut near = block(b, dir, j - 1);
        near += &block(b, dir, j);
        near += &block(b, dir, j + 1);
        r += &(&aj.to_real() * &near.to_real());
    }
    Ok(BonyParts {
        t: t.to_spectral().dealias(),
        tbar: tbar.to_spectral().dealias(),
        r: r.to_spectral().dealias(),
    })
}
