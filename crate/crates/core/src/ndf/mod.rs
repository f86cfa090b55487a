//! Continuous negative definite functions and state-dependent Bernstein
//! families, with numerical checks of their defining properties.

mod bernstein;
mod psi;

pub use bernstein::{eval_bernstein_family, BernsteinFamily, BernsteinSpec, Growth, K_MAX};
pub use psi::{eval_psi, LevyAtom, LevyData, PsiKind, PsiSpec, StableAtoms, ATOM_FLOOR};

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};
use crate::report::{ClassEntry, ClassReport, Location, ReportKind};
use crate::sampling::{fit_constants, multi_indices, rho, Refinement};

/// Default absolute tolerance on Bernstein sign checks.
pub const SIGN_TOL: f64 = 1e-8;

/// Jets of the frequency coordinates at `xi`, truncated at `order`.
pub(crate) fn xi_jets(xi: &[f64], order: usize) -> Vec<Jet> {
    let space = JetSpace::get(xi.len(), order);
    xi.iter()
        .enumerate()
        .map(|(i, &v)| Jet::variable(&space, i, v))
        .collect()
}

pub(crate) fn as_u8(multi: &[usize]) -> Vec<u8> {
    multi.iter().map(|&e| e as u8).collect()
}

/// Check `|d^alpha (1 + psi)| <= c (1 + psi)^{(2 - rho(|alpha|))/2}` for
/// `|alpha| <= max_order` on both grids of `refinement`.
///
/// Non-finite derivatives (kinks of `psi`) fail their entry with the point
/// where they occurred.
pub fn verify_lambda_class(
    psi: &PsiSpec,
    max_order: usize,
    refinement: &Refinement,
) -> Result<ClassReport> {
    if max_order > K_MAX {
        return Err(Error::Input(format!("max_order {max_order} exceeds {K_MAX}")));
    }
    if refinement.coarse.dim != psi.dim {
        return Err(Error::Input("grid and psi dimensions differ".into()));
    }
    let alphas = multi_indices(psi.dim, max_order);
    let pairs: Vec<(Vec<usize>, Vec<usize>)> =
        alphas.iter().map(|a| (a.clone(), Vec::new())).collect();
    let multis: Vec<Vec<u8>> = alphas.iter().map(|a| as_u8(a)).collect();
    let entries = fit_constants(refinement, &pairs, |_x, xi, out| {
        let jet = psi.jet(&xi_jets(xi, max_order)).add_scalar(1.0);
        let base = jet.value();
        for ((alpha, multi), slot) in alphas.iter().zip(&multis).zip(out.iter_mut()) {
            let k: usize = alpha.iter().sum();
            let weight = base.powf((2.0 - rho(k)) / 2.0);
            *slot = jet.derivative(multi).abs() / weight;
        }
        Ok(())
    })?;
    let mut report = ClassReport::new(ReportKind::LambdaClass, psi.name());
    report.claimed_order = Some(2.0);
    report.entries = entries;
    Ok(report.finalize())
}

/// Check `f >= 0` and `(-1)^{k-1} d^k f / ds^k >= -tol` for `1 <= k <= max_k`.
///
/// Entry `k` records the smallest signed value seen and where.
pub fn verify_bernstein(
    family: &BernsteinFamily,
    x_samples: &[Vec<f64>],
    s_grid: &[f64],
    max_k: usize,
    tol: f64,
) -> Result<ClassReport> {
    if max_k > family.k_max {
        return Err(Error::Capability(format!(
            "{}: s-derivatives available up to order {}, {max_k} requested",
            family.name(),
            family.k_max
        )));
    }
    if s_grid.iter().any(|&s| s.is_nan() || s <= 0.0) {
        return Err(Error::Input("s grid must lie in (0, inf)".into()));
    }
    let xs: Vec<Vec<f64>> = if x_samples.is_empty() {
        vec![vec![0.0; family.min_dim()]]
    } else {
        x_samples.to_vec()
    };
    let space = JetSpace::get(1, max_k);
    let mut worst: Vec<(f64, Location)> = vec![(f64::INFINITY, Location::default()); max_k + 1];
    for x in &xs {
        let xj: Vec<Jet> = x.iter().map(|&v| Jet::constant(&space, v)).collect();
        for &s in s_grid {
            let f = family.jet(&xj, &Jet::variable(&space, 0, s))?;
            for (k, w) in worst.iter_mut().enumerate() {
                let sign = if k % 2 == 1 || k == 0 { 1.0 } else { -1.0 };
                let v = sign * f.derivative(&[k as u8]);
                let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
                if v < w.0 {
                    *w = (
                        v,
                        Location {
                            x: x.clone(),
                            xi: vec![s],
                        },
                    );
                }
            }
        }
    }
    let mut report = ClassReport::new(ReportKind::Bernstein, family.name());
    report.epsilon = tol;
    report.window = s_grid
        .iter()
        .copied()
        .fold(None, |acc: Option<(f64, f64)>, s| match acc {
            None => Some((s, s)),
            Some((lo, hi)) => Some((lo.min(s), hi.max(s))),
        });
    report.entries = worst
        .into_iter()
        .enumerate()
        .map(|(k, (v, location))| ClassEntry {
            alpha: vec![k],
            beta: Vec::new(),
            constant: v,
            coarse_constant: v,
            location,
            finite: v.is_finite(),
            stable: true,
            pass: v.is_finite() && v >= -tol,
        })
        .collect();
    Ok(report.finalize())
}

/// Pointwise envelopes of a family and power-law lower bounds on the upper
/// decade of the sample grids.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeFit {
    pub s: Vec<f64>,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    /// `f0(s) >= c0 * s^rho0` on `window`.
    pub c0: f64,
    pub rho0: f64,
    /// `psi(xi) >= c1 * |xi|^rho1` on `window`, when a psi was supplied.
    pub c1: Option<f64>,
    pub rho1: Option<f64>,
    pub window: (f64, f64),
}

/// Least-squares power law through `(t, v)`, then shrink the prefactor until
/// `v >= c t^rho` holds at every sample.
pub fn fit_power_lower_bound(t: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(v)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&t, &v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Degenerate(
            "fewer than two positive samples on the fitting range".into(),
        ));
    }
    if pts.len() < t.len() {
        return Err(Error::Degenerate(
            "function vanishes on part of the fitting range".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let mut c = (my - slope * mx).exp();
    for (&ti, &vi) in t.iter().zip(v) {
        c = c.min(vi / ti.powf(slope));
    }
    Ok((c, slope))
}

/// Envelopes `f0 = min_x f`, `f1 = max_x f` and the growth constants of
/// `f0` and (optionally) `psi`, fitted on the upper decade of `s_grid`.
///
/// The psi fit samples `xi = t e_j` for every coordinate axis `j` and every
/// `t` in the same upper decade, keeping the smallest value per `t`.
pub fn envelope_and_growth(
    family: &BernsteinFamily,
    x_samples: &[Vec<f64>],
    s_grid: &[f64],
    psi: Option<&PsiSpec>,
) -> Result<EnvelopeFit> {
    let lo = s_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo <= 1e-2 && hi >= 1e4) {
        return Err(Error::Input(format!(
            "s grid [{lo:e}, {hi:e}] must cover [1e-2, 1e4]"
        )));
    }
    let xs: Vec<Vec<f64>> = if x_samples.is_empty() {
        vec![vec![0.0; family.min_dim()]]
    } else {
        x_samples.to_vec()
    };
    let mut s: Vec<f64> = s_grid.to_vec();
    s.sort_by(f64::total_cmp);
    let mut f0 = Vec::with_capacity(s.len());
    let mut f1 = Vec::with_capacity(s.len());
    for &si in &s {
        let mut lo_v = f64::INFINITY;
        let mut hi_v = f64::NEG_INFINITY;
        for x in &xs {
            let v = eval_bernstein_family(family, x, si)?;
            lo_v = lo_v.min(v);
            hi_v = hi_v.max(v);
        }
        f0.push(lo_v);
        f1.push(hi_v);
    }
    let window = (hi / 10.0, hi);
    let (ts, vs): (Vec<f64>, Vec<f64>) = s
        .iter()
        .zip(&f0)
        .filter(|(&si, _)| si >= window.0)
        .map(|(&a, &b)| (a, b))
        .unzip();
    if vs.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate(format!(
            "{}: lower envelope vanishes on [{:e}, {:e}]",
            family.name(),
            window.0,
            window.1
        )));
    }
    let (c0, rho0) = fit_power_lower_bound(&ts, &vs)?;
    let (c1, rho1) = match psi {
        Some(psi) => {
            let vals: Vec<f64> = ts
                .iter()
                .map(|&t| {
                    (0..psi.dim)
                        .map(|j| {
                            let mut xi = vec![0.0; psi.dim];
                            xi[j] = t;
                            eval_psi(psi, &xi)
                        })
                        .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
                })
                .collect::<Result<_>>()?;
            let (c, r) = fit_power_lower_bound(&ts, &vals)?;
            (Some(c), Some(r))
        }
        None => (None, None),
    };
    Ok(EnvelopeFit {
        s,
        f0,
        f1,
        c0,
        rho0,
        c1,
        rho1,
        window,
    })
}

/// Largest excess of `sqrt(psi(a + b))` over `sqrt(psi(a)) + sqrt(psi(b))`
/// over all pairs of `points`, relative to `1 + max psi`.
pub fn subadditivity_excess(psi: &PsiSpec, points: &[Vec<f64>]) -> Result<f64> {
    let roots: Vec<f64> = points
        .iter()
        .map(|p| eval_psi(psi, p).map(f64::sqrt))
        .collect::<Result<_>>()?;
    let mut worst = f64::NEG_INFINITY;
    let mut sum = vec![0.0; psi.dim];
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate() {
            for ((s, x), y) in sum.iter_mut().zip(a).zip(b) {
                *s = x + y;
            }
            let lhs = eval_psi(psi, &sum)?.sqrt();
            let scale = 1.0 + lhs.max(roots[i]).max(roots[j]);
            worst = worst.max((lhs - roots[i] - roots[j]) / scale);
        }
    }
    Ok(worst)
}

/// `(1 - e^{-u}) - u / (1 + u)` with `u = a t`; non-negative for `u >= 0`.
pub fn saturation_gap(a: f64, t: f64) -> f64 {
    let u = a * t;
    -(-u).exp_m1() - u / (1.0 + u)
}
