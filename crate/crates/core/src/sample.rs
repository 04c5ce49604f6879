//! Seeded random fields for property suites and experiment data.
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grid::{signed_index, Grid, RealField, SpectralField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real field whose modes satisfy `|m|, |n| ≤ band` with Gaussian
/// coefficients damped by `(1 + m² + n²)^{-decay/2}`; zero mean.
pub fn band_limited(grid: &Grid, band: usize, decay: f64, rng: &mut impl Rng) -> RealField {
    let noise = RealField::from_vec(
        grid,
        (0..grid.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
    );
    let s = noise.to_spectral();
    let (nx, ny) = (grid.nx(), grid.ny());
    let b = band as i64;
    let filtered = s.apply(|i, j| {
        let m = signed_index(i, nx);
        let n = signed_index(j, ny);
        if (m == 0 && n == 0) || m.abs() > b || n.abs() > b || 2 * m.unsigned_abs() as usize == nx
            || 2 * n.unsigned_abs() as usize == ny
        {
            Complex64::default()
        } else {
            Complex64::new((1.0 + (m * m + n * n) as f64).powf(-decay / 2.0), 0.0)
        }
    });
    let f = filtered.to_real();
    let norm = f.l2_norm();
    if norm > 0.0 {
        f.scale(1.0 / norm)
    } else {
        f
    }
}

/// Random field supported on the modes where `mask(m, n)` holds, unit L² norm.
pub fn masked(grid: &Grid, mask: impl Fn(i64, i64) -> bool, rng: &mut impl Rng) -> RealField {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut c = SpectralField::zeros(grid);
    for i in 0..nx {
        for j in 0..ny {
            let (m, n) = grid.mode(i, j);
            let nyq = 2 * m.unsigned_abs() as usize == nx || 2 * n.unsigned_abs() as usize == ny;
            if nyq || !mask(m, n) || !mask(-m, -n) {
                continue;
            }
            // Fill one representative of each ± pair and mirror it.
            if (m, n) < (-m, -n) {
                continue;
            }
            let v = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let k = grid.idx(i, j);
            let kk = grid.idx(crate::grid::wrap_index(-m, nx), crate::grid::wrap_index(-n, ny));
            if k == kk {
                c.data_mut()[k] = Complex64::new(v.re, 0.0);
            } else {
                c.data_mut()[k] = v;
                c.data_mut()[kk] = v.conj();
            }
        }
    }
    let f = c.to_real();
    let norm = f.l2_norm();
    if norm > 0.0 {
        f.scale(1.0 / norm)
    } else {
        f
    }
}
