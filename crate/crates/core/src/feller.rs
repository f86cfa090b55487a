//! Necessary consequences of Feller generation, checked on the discrete
//! torus: the positive maximum principle, positivity and sup-norm
//! contraction of the stepped semigroup, and agreement with Bochner
//! subordination for x-independent symbols.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ndf::{BernsteinFamily, BernsteinSpec, PsiSpec};
use crate::report::{fmt_f64, join_f64, verdict};
use crate::symcalc::{subordinate_symbol, PhaseFunction, Symbol};
use crate::torus::{exact_multiplier_evolve, semigroup_evolve, Scheme, SemigroupRun, TorusGrid, TorusGridFn};

/// Stated at the top of every CSV: the checks certify consequences of
/// generation, not generation itself.
pub const REPORT_NOTE: &str =
    "# discrete torus checks of necessary consequences; generation on R^n is not certified";

/// Scale-free PMP tolerance factor.
pub const PMP_TOL: f64 = 1e-8;
/// Slack below zero tolerated in positivity checks.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Slack above `sup |u0|` tolerated in contraction checks.
pub const CONTRACTION_TOL: f64 = 1e-9;
/// Agreement required of the exact semigroup law.
pub const SEMIGROUP_LAW_TOL: f64 = 1e-12;

/// Trials whose test function varies less than this are skipped.
const FLAT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FellerCheck {
    pub name: String,
    pub trials: usize,
    pub skipped: usize,
    /// Largest violation seen, in the check's own units; zero when none.
    pub worst_violation: f64,
    pub tolerance: f64,
    pub location: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FellerReport {
    pub checks: Vec<FellerCheck>,
    /// Seeds, bandwidths and schemes behind the trials.
    pub inventory: Vec<String>,
    /// `tau1 + tau0 + sigma (2 + tau1)`, when supplied.
    pub budget: Option<f64>,
}

impl FellerReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.budget.is_none_or(|b| b < 1.0)
    }

    pub fn check(&self, name: &str) -> Option<&FellerCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn merge(mut self, other: FellerReport) -> Self {
        self.checks.extend(other.checks);
        self.inventory.extend(other.inventory);
        self.budget = self.budget.or(other.budget);
        self
    }

    /// Columns: check, trials, worst_violation, location, verdict; a
    /// budget row follows when a budget is attached.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{REPORT_NOTE}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["check", "trials", "worst_violation", "location", "verdict"])?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                c.trials.to_string(),
                fmt_f64(c.worst_violation),
                join_f64(&c.location),
                verdict(c.pass).to_string(),
            ])?;
        }
        if let Some(b) = self.budget {
            w.write_record([
                "budget".to_string(),
                String::new(),
                fmt_f64(b),
                String::new(),
                verdict(b < 1.0).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One line for CI: overall verdict, then `name=verdict` per check.
    pub fn summary(&self) -> String {
        let mut s = format!("feller verdict={}", verdict(self.pass()));
        for c in &self.checks {
            s.push_str(&format!(" {}={}", c.name, verdict(c.pass)));
        }
        if let Some(b) = self.budget {
            s.push_str(&format!(" budget={b}"));
        }
        s
    }
}

/// Trigonometric polynomial `sum c_k exp(i k . x)` over its nonzero modes.
struct TrigPoly {
    modes: Vec<(Vec<f64>, Complex64)>,
}

impl TrigPoly {
    fn new(u: &TorusGridFn) -> Self {
        let g = u.grid;
        let scale = (g.len() as f64).sqrt();
        let c = u.coefficients();
        let top = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let modes = c
            .iter()
            .enumerate()
            .filter(|(k, v)| !g.is_nyquist(*k) && v.norm() > 1e-15 * top)
            .map(|(k, v)| (g.frequency(k), v / scale))
            .collect();
        TrigPoly { modes }
    }

    /// Value, gradient and Hessian (real parts) at `x`.
    fn taylor(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let n = x.len();
        let (mut v, mut g, mut h) = (0.0, vec![0.0; n], vec![vec![0.0; n]; n]);
        for (k, c) in &self.modes {
            let phase: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
            let e = c * Complex64::from_polar(1.0, phase);
            v += e.re;
            for i in 0..n {
                g[i] -= k[i] * e.im;
                for j in 0..n {
                    h[i][j] -= k[i] * k[j] * e.re;
                }
            }
        }
        (v, g, h)
    }

    /// `-p(x, D) u` evaluated at an arbitrary point, and `max_k |p(x, k)|`
    /// over the modes of `u`.
    fn generator_at(&self, p: &dyn PhaseFunction, x: &[f64]) -> Result<(f64, f64)> {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut top = 0.0f64;
        for (k, c) in &self.modes {
            let pv = p.eval_complex(x, k)?;
            top = top.max(pv.norm());
            let phase: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
            acc -= pv * c * Complex64::from_polar(1.0, phase);
        }
        Ok((acc.re, top))
    }
}

/// Solve `h d = -g` for `n <= 3` by Gaussian elimination with pivoting.
fn newton_step(h: &[Vec<f64>], g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let mut a: Vec<Vec<f64>> = h
        .iter()
        .zip(g)
        .map(|(row, gi)| row.iter().copied().chain([-gi]).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..=n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut d = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * d[c]).sum();
        d[r] = (a[r][n] - s) / a[r][r];
    }
    Some(d)
}

/// Move from a grid maximum to the nearby continuum maximum of `u`. Steps
/// that leave the cell or fail to increase `u` are rejected.
fn refine_max(poly: &TrigPoly, x0: &[f64], cell: f64) -> Vec<f64> {
    let mut x = x0.to_vec();
    let (mut best, _, _) = poly.taylor(&x);
    for _ in 0..20 {
        let (_, g, h) = poly.taylor(&x);
        let Some(d) = newton_step(&h, &g) else { break };
        let cand: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        if cand.iter().zip(x0).any(|(a, b)| (a - b).abs() > cell) {
            break;
        }
        let (v, _, _) = poly.taylor(&cand);
        if v < best {
            break;
        }
        let small = d.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-15;
        best = v;
        x = cand;
        if small {
            break;
        }
    }
    x
}

/// Random real test function with a nonnegative global maximum: band
/// `N/8`, shifted so that `max u = a sup|v - max v|` for uniform `a`.
fn pmp_trial(grid: TorusGrid, seed: u64) -> TorusGridFn {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = TorusGridFn::random_band_limited(grid, (grid.points_per_dim / 8).max(1), seed, true);
    let (lo, hi) = (v.min_real(), v.max_real());
    let a: f64 = rng.random();
    let shift = -hi + a * (hi - lo);
    TorusGridFn {
        grid,
        values: v.values.iter().map(|z| Complex64::new(z.re + shift, 0.0)).collect(),
    }
}

/// Check `(A u)(x0) <= tol` with `A = -p(x, D)` at the maximum `x0` of
/// each trial function. The maximum is refined off the grid so that the
/// check is made where the principle actually applies.
pub fn check_positive_maximum_principle(
    p: &dyn PhaseFunction,
    grid: TorusGrid,
    trials: usize,
    seed: u64,
) -> Result<FellerReport> {
    if p.dim() != grid.dim {
        return Err(Error::Input("symbol and grid dimensions differ".into()));
    }
    // (violation, tolerance, location) or None for a skipped trial
    let results: Vec<Option<(f64, f64, Vec<f64>)>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let u = pmp_trial(grid, seed.wrapping_add(i));
            let (lo, hi) = (u.min_real(), u.max_real());
            if hi - lo < FLAT_TOL * u.sup_norm().max(1.0) {
                return Ok(None);
            }
            let j0 = (0..grid.len())
                .max_by(|&a, &b| u.values[a].re.total_cmp(&u.values[b].re))
                .expect("non-empty grid");
            let poly = TrigPoly::new(&u);
            let x = refine_max(&poly, &grid.point(j0), grid.spacing());
            let (au, top) = poly.generator_at(p, &x)?;
            let tol = PMP_TOL * u.sup_norm() * top;
            Ok(Some((au, tol, x)))
        })
        .collect::<Result<_>>()?;
    let mut check = FellerCheck {
        name: "positive-maximum-principle".into(),
        trials,
        skipped: 0,
        worst_violation: 0.0,
        tolerance: 0.0,
        location: Vec::new(),
        pass: true,
    };
    // worst violation relative to its own tolerance decides the verdict
    let mut worst_ratio = f64::NEG_INFINITY;
    for r in results {
        match r {
            None => check.skipped += 1,
            Some((au, tol, x)) => {
                let ratio = if tol > 0.0 { au / tol } else { au.signum() * f64::INFINITY };
                if ratio > worst_ratio {
                    worst_ratio = ratio;
                    check.worst_violation = au.max(0.0);
                    check.tolerance = tol;
                    check.location = x;
                }
                if au > tol {
                    check.pass = false;
                }
            }
        }
    }
    Ok(FellerReport {
        checks: vec![check],
        inventory: vec![format!(
            "pmp: {trials} trials, seeds {seed}..{}, bandwidth {}, N={}",
            seed.wrapping_add(trials as u64),
            (grid.points_per_dim / 8).max(1),
            grid.points_per_dim
        )],
        budget: None,
    })
}

/// Positivity (when `u0 >= 0`), `sup |u_n| <= sup |u0|`, and a
/// nonincreasing sup-norm along the run.
pub fn check_positivity_contraction(run: &SemigroupRun, u0: &TorusGridFn) -> FellerReport {
    let sup0 = u0.sup_norm();
    let nonneg = u0.is_real(0.0) && u0.min_real() >= 0.0;
    let mut positivity = FellerCheck {
        name: "positivity".into(),
        trials: if nonneg { run.snapshots.len() } else { 0 },
        skipped: if nonneg { 0 } else { run.snapshots.len() },
        worst_violation: 0.0,
        tolerance: POSITIVITY_TOL,
        location: Vec::new(),
        pass: true,
    };
    let mut contraction = FellerCheck {
        name: "sup-contraction".into(),
        trials: run.snapshots.len(),
        skipped: 0,
        worst_violation: 0.0,
        tolerance: CONTRACTION_TOL,
        location: Vec::new(),
        pass: true,
    };
    let mut monotone = FellerCheck {
        name: "sup-monotone".into(),
        ..contraction.clone()
    };
    let mut prev = sup0;
    for (step, u) in run.snapshots.iter().enumerate() {
        let t = step as f64 * run.dt;
        if nonneg {
            let (j, m) = u
                .values
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.re))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty grid");
            if -m > positivity.worst_violation {
                positivity.worst_violation = -m;
                positivity.location = [vec![t], u.grid.point(j)].concat();
            }
        }
        let s = u.sup_norm();
        if s - sup0 > contraction.worst_violation {
            contraction.worst_violation = s - sup0;
            contraction.location = vec![t];
        }
        if s - prev > monotone.worst_violation {
            monotone.worst_violation = s - prev;
            monotone.location = vec![t];
        }
        prev = s;
    }
    for c in [&mut positivity, &mut contraction, &mut monotone] {
        c.pass = c.worst_violation <= c.tolerance;
    }
    let mut checks = vec![positivity, contraction, monotone];
    if let Some(e) = &run.aborted {
        checks.push(FellerCheck {
            name: format!("run-complete ({e})"),
            trials: run.steps,
            skipped: run.steps + 1 - run.snapshots.len(),
            worst_violation: 0.0,
            tolerance: 0.0,
            location: Vec::new(),
            pass: false,
        });
    }
    FellerReport {
        checks,
        inventory: vec![format!(
            "run: {} dt={} steps={}",
            run.scheme.name(),
            run.dt,
            run.steps
        )],
        budget: None,
    }
}

/// Settings of the stepped side of a subordination comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepping {
    pub dt: f64,
    pub scheme: Scheme,
}

impl Default for Stepping {
    fn default() -> Self {
        Stepping {
            dt: 1e-2,
            scheme: Scheme::CrankNicolson,
        }
    }
}

/// Relative sup-norm gap between `exp(-t f(psi(D))) u0`, applied
/// spectrally, and the stepped semigroup of the symbol `f(psi(xi))`; also
/// checks `T_t = T_{2t/3} T_{t/3}` for the exact multiplier.
pub fn check_subordination_consistency(
    f: &BernsteinSpec,
    psi: &PsiSpec,
    t: f64,
    u0: &TorusGridFn,
    tol: f64,
    stepping: Stepping,
) -> Result<FellerReport> {
    if !f.is_x_independent() {
        return Err(Error::Input("subordination consistency needs an x-independent family".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Input(format!("time {t} must be nonnegative")));
    }
    let family = BernsteinFamily::new(f.clone());
    let p = subordinate_symbol(&family, &Symbol::psi(psi.clone()), 2.0)?;
    let exact = exact_multiplier_evolve(&p, u0, t)?;
    let steps = (t / stepping.dt).round() as usize;
    let dt = if steps == 0 { stepping.dt } else { t / steps as f64 };
    let run = semigroup_evolve(&p, u0, dt, steps, stepping.scheme, &[])?.into_result()?;
    let scale = exact.sup_norm().max(f64::MIN_POSITIVE);
    let gap_fn = |a: &TorusGridFn, b: &TorusGridFn| -> Result<(f64, Vec<f64>)> {
        let d = a.axpy(Complex64::new(-1.0, 0.0), b)?;
        let j = (0..d.values.len())
            .max_by(|&i, &k| d.values[i].norm().total_cmp(&d.values[k].norm()))
            .expect("non-empty grid");
        Ok((d.sup_norm() / scale, d.grid.point(j)))
    };
    let (gap, at) = gap_fn(run.last(), &exact)?;
    let split = exact_multiplier_evolve(&p, &exact_multiplier_evolve(&p, u0, t / 3.0)?, 2.0 * t / 3.0)?;
    let (law, law_at) = gap_fn(&split, &exact)?;
    Ok(FellerReport {
        checks: vec![
            FellerCheck {
                name: "subordination-consistency".into(),
                trials: 1,
                skipped: 0,
                worst_violation: gap,
                tolerance: tol,
                location: at,
                pass: gap <= tol,
            },
            FellerCheck {
                name: "semigroup-law".into(),
                trials: 1,
                skipped: 0,
                worst_violation: law,
                tolerance: SEMIGROUP_LAW_TOL,
                location: law_at,
                pass: law <= SEMIGROUP_LAW_TOL,
            },
        ],
        inventory: vec![format!(
            "subordination: f={} psi={} t={t} {} dt={dt} steps={steps}",
            f.name(),
            psi.name(),
            stepping.scheme.name()
        )],
        budget: None,
    })
}

/// Smooth bump `exp(-w (1 - cos(x_i - pi)))` product over axes, with values
/// in `(0, 1]`.
pub fn smooth_bump(grid: TorusGrid, concentration: f64) -> TorusGridFn {
    let s = 2.0 * PI / grid.period;
    TorusGridFn::from_real_fn(grid, |x| {
        x.iter()
            .map(|&xi| (-concentration * (1.0 - (s * xi - PI).cos())).exp())
            .product()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::SmoothFn;
    use crate::symcalc::variable_order_example_symbol;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::standard(1, n).unwrap()
    }

    #[test]
    fn cosine_at_maximum() {
        let p = Symbol::psi(PsiSpec::quadratic(1));
        let u = TorusGridFn::from_real_fn(grid(32), |x| x[0].cos());
        let poly = TrigPoly::new(&u);
        let x = refine_max(&poly, &[0.0], grid(32).spacing());
        let (au, _) = poly.generator_at(&p, &x).unwrap();
        assert!((au + 1.0).abs() < 1e-14);
    }

    #[test]
    fn refinement_finds_off_grid_maximum() {
        let u = TorusGridFn::from_real_fn(grid(32), |x| (x[0] - 0.05).cos());
        let poly = TrigPoly::new(&u);
        let x = refine_max(&poly, &[0.0], grid(32).spacing());
        assert!((x[0] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn pmp_for_heat_and_variable_order() {
        let heat = Symbol::psi(PsiSpec::quadratic(1));
        let r = check_positive_maximum_principle(&heat, grid(64), 40, 1).unwrap();
        assert!(r.pass(), "{r:?}");
        let q = Symbol::shifted_psi(SmoothFn::Const(1.0), 1.0, PsiSpec::quadratic(1)).unwrap();
        let p = variable_order_example_symbol(&q, SmoothFn::sin(0.6, 0.3)).unwrap();
        let r = check_positive_maximum_principle(&p, grid(64), 20, 9).unwrap();
        assert!(r.pass(), "{r:?}");
    }

    #[test]
    fn pmp_catches_wrong_sign() {
        let anti = Symbol::psi(PsiSpec::quadratic(1)).scaled(-1.0);
        let r = check_positive_maximum_principle(&anti, grid(32), 10, 1).unwrap();
        assert!(!r.pass());
    }

    #[test]
    fn heat_run_is_positive_and_contractive() {
        let p = Symbol::psi(PsiSpec::quadratic(1));
        let u0 = TorusGridFn::from_real_fn(grid(32), |x| 1.0 + x[0].cos());
        let run = semigroup_evolve(&p, &u0, 1e-2, 50, Scheme::ImplicitEuler, &[]).unwrap();
        let r = check_positivity_contraction(&run, &u0);
        assert!(r.pass(), "{r:?}");
        assert_eq!(r.checks.len(), 3);
    }

    #[test]
    fn growing_run_fails_contraction() {
        let p = Symbol::constant(1, -1.0);
        let u0 = TorusGridFn::from_real_fn(grid(16), |_| 1.0);
        let run = semigroup_evolve(&p, &u0, 1e-2, 5, Scheme::ImplicitEuler, &[]).unwrap();
        let r = check_positivity_contraction(&run, &u0);
        assert!(!r.check("sup-contraction").unwrap().pass);
        assert!(r.check("positivity").unwrap().pass);
    }

    #[test]
    fn subordination_examples() {
        let psi = PsiSpec::quadratic(1);
        let u0 = TorusGridFn::mode(grid(32), &[2]);
        let r = check_subordination_consistency(&BernsteinSpec::sqrt(), &psi, 1.0, &u0, 1e-4, Stepping::default())
            .unwrap();
        assert!(r.pass(), "{r:?}");
        let r0 = check_subordination_consistency(&BernsteinSpec::Identity, &psi, 0.0, &u0, 0.0, Stepping::default())
            .unwrap();
        assert_eq!(r0.check("subordination-consistency").unwrap().worst_violation, 0.0);
    }

    #[test]
    fn csv_and_summary() {
        let mut r = FellerReport {
            checks: vec![FellerCheck {
                name: "positivity".into(),
                trials: 3,
                skipped: 0,
                worst_violation: 0.0,
                tolerance: 1e-10,
                location: vec![0.5],
                pass: true,
            }],
            inventory: vec![],
            budget: None,
        };
        r = r.with_budget(1.5);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with('#'));
        assert_eq!(r.summary(), "feller verdict=fail positivity=pass budget=1.5");
    }
}
