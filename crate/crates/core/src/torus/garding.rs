use crate::error::{Error, Result};
use crate::ndf::PsiSpec;
use crate::sampling::Refinement;
use crate::symcalc::{verify_ellipticity, Symbol};

use super::grid::{TorusGrid, TorusGridFn};
use super::ops::{bilinear_form, sobolev_norm_sq};

/// Sweep resolution, as a fraction of the ellipticity constant.
const DELTA_STEPS: usize = 128;

/// Ellipticity is measured on `|xi| >= 1`.
const ELLIPTIC_RADIUS: f64 = 1.0;

/// `Im B(u, u)` tolerated, relative to `|B(u, u)|`, for real multipliers.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Margin applied to `lambda_est` when it is used as a resolvent shift.
pub const LAMBDA_MARGIN: f64 = 0.10;

/// Tolerated growth of the fitted `lambda` from bandwidth `N/8` to `N/4`.
const LAMBDA_GROWTH: f64 = 0.10;
const LAMBDA_FLOOR: f64 = 1e-9;

/// One row of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GardingRow {
    pub delta: f64,
    pub lambda_coarse: f64,
    pub lambda_fine: f64,
    pub stable: bool,
}

/// Fitted constants of `Re B(u, u) >= delta ||u||^2_{psi, m/2} - lambda ||u||^2_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GardingEstimate {
    /// Ellipticity constant on `|xi| >= 1`.
    pub delta0: f64,
    /// Largest swept `delta` whose `lambda` stays bounded as the test
    /// functions get rougher.
    pub delta_est: f64,
    pub lambda_est: f64,
    pub pass: bool,
    pub samples: usize,
    pub rows: Vec<GardingRow>,
}

impl GardingEstimate {
    /// `lambda_est` with the safety margin, for use in resolvent solves.
    pub fn solve_shift(&self) -> f64 {
        self.lambda_est * (1.0 + LAMBDA_MARGIN)
    }
}

/// `(||u||^2_{psi, m/2}, Re B(u, u), ||u||^2_0)` per test function.
type Sample = (f64, f64, f64);

fn test_functions(grid: TorusGrid, bandwidth: usize, count: usize, seed: u64) -> Vec<TorusGridFn> {
    let mut out = Vec::new();
    for axis in 0..grid.dim {
        for k in 0..=bandwidth as i64 {
            let mut wave = vec![0i64; grid.dim];
            wave[axis] = k;
            out.push(TorusGridFn::from_real_fn(grid, |x| {
                (wave[axis] as f64 * 2.0 * std::f64::consts::PI / grid.period * x[axis]).cos()
            }));
        }
    }
    for i in 0..count as u64 {
        out.push(TorusGridFn::random_band_limited(
            grid,
            bandwidth,
            seed.wrapping_add(i),
            true,
        ));
    }
    out
}

fn sample(p: &Symbol, psi: &PsiSpec, m: f64, u: &TorusGridFn) -> Result<Sample> {
    let b = bilinear_form(p, u, u)?;
    if p.is_x_independent() && b.im.abs() > SYMMETRY_TOL * b.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::SymmetryIntegrity(format!(
            "Im B(u,u) = {:e} against |B(u,u)| = {:e}",
            b.im,
            b.norm()
        )));
    }
    Ok((
        sobolev_norm_sq(psi, m / 2.0, u)?,
        b.re,
        sobolev_norm_sq(psi, 0.0, u)?,
    ))
}

/// Smallest `lambda >= 0` making every sample satisfy the inequality at
/// `delta`. Deficits at rounding level count as zero.
fn min_lambda(delta: f64, samples: &[Sample]) -> f64 {
    samples
        .iter()
        .filter(|s| s.2 > 0.0)
        .map(|&(a, b, c)| {
            let deficit = delta * a - b;
            if deficit <= 1e-12 * (delta * a).abs().max(b.abs()) {
                0.0
            } else {
                deficit / c
            }
        })
        .fold(0.0, f64::max)
}

/// Fit the Garding constants of `p` on `grid` from pure cosine modes and
/// `sample_count` seeded random real functions, at bandwidth `N/8` and then
/// `N/4`. `delta` sweeps `j delta0 / 128` for `j = 256, ..., 1`; the first
/// value whose `lambda` does not grow with the bandwidth is reported.
pub fn garding_probe(
    p: &Symbol,
    psi: &PsiSpec,
    m: f64,
    sample_count: usize,
    seed: u64,
    grid: TorusGrid,
) -> Result<GardingEstimate> {
    if p.dim() != grid.dim || psi.dim != grid.dim {
        return Err(Error::Input("symbol, psi and grid dimensions differ".into()));
    }
    let ell = verify_ellipticity(
        p,
        psi,
        m,
        ELLIPTIC_RADIUS,
        &Refinement::torus(grid.dim, grid.points_per_dim),
    )?;
    let delta0 = ell.delta0.max(0.0);
    let n = grid.points_per_dim;
    let collect = |bw: usize, seed: u64| -> Result<Vec<Sample>> {
        use rayon::prelude::*;
        test_functions(grid, bw, sample_count, seed)
            .par_iter()
            .map(|u| sample(p, psi, m, u))
            .collect()
    };
    let coarse = collect(n / 8, seed)?;
    let fine = collect(n / 4, seed.wrapping_add(1 << 32))?;
    let mut rows = Vec::with_capacity(2 * DELTA_STEPS);
    let mut chosen: Option<GardingRow> = None;
    for j in (1..=2 * DELTA_STEPS).rev() {
        let delta = j as f64 / DELTA_STEPS as f64 * delta0;
        let lc = min_lambda(delta, &coarse);
        let lf = min_lambda(delta, &fine);
        let row = GardingRow {
            delta,
            lambda_coarse: lc,
            lambda_fine: lf,
            stable: lf <= (1.0 + LAMBDA_GROWTH) * lc + LAMBDA_FLOOR,
        };
        rows.push(row);
        if row.stable && chosen.is_none() {
            chosen = Some(row);
        }
    }
    let (delta_est, lambda_est) = chosen.map_or((0.0, f64::INFINITY), |r| (r.delta, r.lambda_fine));
    Ok(GardingEstimate {
        delta0,
        delta_est,
        lambda_est,
        pass: ell.pass && delta0 > 0.0 && delta_est >= delta0 / 4.0,
        samples: coarse.len() + fine.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::SmoothFn;

    fn grid() -> TorusGrid {
        TorusGrid::standard(1, 64).unwrap()
    }

    #[test]
    fn shifted_laplacian_is_exact() {
        let psi = PsiSpec::quadratic(1);
        let p = Symbol::shifted_psi(SmoothFn::Const(1.0), 1.0, psi.clone()).unwrap();
        let g = garding_probe(&p, &psi, 2.0, 8, 3, grid()).unwrap();
        assert_eq!(g.delta0, 1.0);
        assert_eq!(g.delta_est, 1.0);
        assert_eq!(g.lambda_est, 0.0);
        assert!(g.pass);
    }

    #[test]
    fn laplacian_needs_unit_shift() {
        let psi = PsiSpec::quadratic(1);
        let g = garding_probe(&Symbol::psi(psi.clone()), &psi, 2.0, 8, 3, grid()).unwrap();
        assert_eq!(g.delta_est, 1.0);
        assert!((g.lambda_est - 1.0).abs() < 1e-12);
        assert!(g.pass);
    }

    #[test]
    fn variable_coefficient_passes() {
        let psi = PsiSpec::quadratic(1);
        let p = Symbol::shifted_psi(SmoothFn::sin(2.0, 1.0), 1.0, psi.clone()).unwrap();
        let g = garding_probe(&p, &psi, 2.0, 8, 5, grid()).unwrap();
        assert!(g.pass && g.delta_est > 0.0, "{g:?}");
    }

    #[test]
    fn order_deficit_fails() {
        let psi = PsiSpec::quadratic(1);
        let p = Symbol::shifted_psi(SmoothFn::Const(1.0), 1.0, psi.clone()).unwrap();
        let g = garding_probe(&p, &psi, 4.0, 4, 3, grid()).unwrap();
        assert!(!g.pass);
    }
}
