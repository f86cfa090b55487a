use std::io::Write;

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndf::PsiSpec;
use crate::report::fmt_f64;
use crate::symcalc::PhaseFunction;

use super::grid::{fft_nd, TorusGrid, TorusGridFn};
use super::ops::{sobolev_norm, DiscreteOperator};

/// Default relative residual target.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Krylov dimension before a restart.
const RESTART: usize = 60;

/// Iteration cap `10 * N * n` used when the caller passes zero.
pub fn default_max_iter(grid: &TorusGrid) -> usize {
    10 * grid.points_per_dim * grid.dim
}

/// Result of a resolvent solve.
#[derive(Debug, Clone)]
pub struct Solve {
    pub u: TorusGridFn,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Bound operator `p(x, D) + lambda` with its diagonal preconditioner.
pub struct Resolvent<'a> {
    op: DiscreteOperator<'a>,
    lambda: f64,
    precond: Vec<Complex64>,
}

impl<'a> Resolvent<'a> {
    pub fn new(p: &'a dyn PhaseFunction, lambda: f64, grid: TorusGrid) -> Result<Self> {
        let op = DiscreteOperator::new(p, grid)?;
        let precond = op
            .median_multiplier()?
            .into_iter()
            .map(|m| {
                let d = m + lambda;
                if d.norm() > 1e-300 {
                    d.inv()
                } else {
                    Complex64::new(1.0, 0.0)
                }
            })
            .collect();
        Ok(Resolvent {
            op,
            lambda,
            precond,
        })
    }

    pub fn operator(&self) -> &DiscreteOperator<'a> {
        &self.op
    }

    fn apply_shifted(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let f = TorusGridFn {
            grid: self.op.grid(),
            values: u.to_vec(),
        };
        let pu = self.op.apply(&f)?;
        Ok(pu
            .values
            .iter()
            .zip(u)
            .map(|(a, b)| a + b * self.lambda)
            .collect())
    }

    fn precondition(&self, y: &[Complex64]) -> Vec<Complex64> {
        let g = self.op.grid();
        let mut c = y.to_vec();
        fft_nd(&mut c, g.dim, g.points_per_dim, FftDirection::Forward);
        for (v, m) in c.iter_mut().zip(&self.precond) {
            *v *= m;
        }
        fft_nd(&mut c, g.dim, g.points_per_dim, FftDirection::Inverse);
        c
    }

    /// Solve `(p(x, D) + lambda) u = f` by right-preconditioned restarted
    /// GMRES; `max_iter = 0` selects the default cap.
    pub fn solve(&self, f: &TorusGridFn, tol: f64, max_iter: usize) -> Result<Solve> {
        let grid = self.op.grid();
        if !f.grid.same_as(&grid) {
            return Err(Error::Input("right-hand side lives on a different grid".into()));
        }
        let max_iter = if max_iter == 0 {
            default_max_iter(&grid)
        } else {
            max_iter
        };
        let len = grid.len();
        let b = &f.values;
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(Solve {
                u: TorusGridFn::zeros(grid),
                iterations: 0,
                residual: 0.0,
                history: vec![0.0],
                warnings: Vec::new(),
            });
        }
        let mut x = vec![Complex64::new(0.0, 0.0); len];
        let mut history = vec![1.0];
        let mut iterations = 0;
        let restart = RESTART.min(len);
        let mut previous = f64::INFINITY;
        loop {
            let ax = self.apply_shifted(&x)?;
            let r: Vec<Complex64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
            let beta = norm(&r);
            let rel = beta / bnorm;
            if rel <= tol {
                *history.last_mut().expect("non-empty") = rel;
                return Ok(Solve {
                    u: TorusGridFn { grid, values: x },
                    iterations,
                    residual: rel,
                    history,
                    warnings: Vec::new(),
                });
            }
            // a whole cycle without progress: the residual sits at its
            // rounding floor above tol
            if iterations >= max_iter || rel >= previous {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: rel,
                    history,
                });
            }
            previous = rel;
            let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|c| c / beta).collect()];
            let mut h = vec![vec![Complex64::new(0.0, 0.0); restart]; restart + 1];
            let mut cs = vec![0.0f64; restart];
            let mut sn = vec![Complex64::new(0.0, 0.0); restart];
            let mut g = vec![Complex64::new(0.0, 0.0); restart + 1];
            g[0] = Complex64::new(beta, 0.0);
            let mut used = 0;
            for j in 0..restart {
                let z = self.precondition(&v[j]);
                let mut w = self.apply_shifted(&z)?;
                for (i, vi) in v.iter().enumerate() {
                    let hij = dot(vi, &w);
                    h[i][j] = hij;
                    for (a, b) in w.iter_mut().zip(vi) {
                        *a -= hij * b;
                    }
                }
                let wn = norm(&w);
                h[j + 1][j] = Complex64::new(wn, 0.0);
                for i in 0..j {
                    let t = h[i][j];
                    let u = h[i + 1][j];
                    h[i][j] = t * cs[i] + sn[i] * u;
                    h[i + 1][j] = -sn[i].conj() * t + u * cs[i];
                }
                let (a, bb) = (h[j][j], h[j + 1][j]);
                let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
                if den == 0.0 {
                    cs[j] = 1.0;
                    sn[j] = Complex64::new(0.0, 0.0);
                } else if a.norm() == 0.0 {
                    cs[j] = 0.0;
                    sn[j] = bb.conj() / den * Complex64::new(1.0, 0.0);
                } else {
                    cs[j] = a.norm() / den;
                    sn[j] = (a / a.norm()) * bb.conj() / den;
                }
                h[j][j] = Complex64::new(cs[j], 0.0) * a + sn[j] * bb;
                h[j + 1][j] = Complex64::new(0.0, 0.0);
                g[j + 1] = -sn[j].conj() * g[j];
                g[j] *= cs[j];
                iterations += 1;
                used = j + 1;
                let rel = g[j + 1].norm() / bnorm;
                history.push(rel);
                if rel <= tol || wn == 0.0 || iterations >= max_iter {
                    break;
                }
                v.push(w.iter().map(|c| c / wn).collect());
            }
            // back substitution for the Krylov coefficients
            let mut y = vec![Complex64::new(0.0, 0.0); used];
            for i in (0..used).rev() {
                let mut s = g[i];
                for k in i + 1..used {
                    s -= h[i][k] * y[k];
                }
                y[i] = s / h[i][i];
            }
            let mut update = vec![Complex64::new(0.0, 0.0); len];
            for (yi, vi) in y.iter().zip(&v) {
                for (a, b) in update.iter_mut().zip(vi) {
                    *a += yi * b;
                }
            }
            for (a, b) in x.iter_mut().zip(self.precondition(&update)) {
                *a += b;
            }
        }
    }
}

/// Solve `(p(x, D) + lambda) u = f` to relative residual `tol`.
pub fn resolvent_solve(
    p: &dyn PhaseFunction,
    lambda: f64,
    f: &TorusGridFn,
    tol: f64,
    max_iter: usize,
) -> Result<Solve> {
    Resolvent::new(p, lambda, f.grid)?.solve(f, tol, max_iter)
}

/// Solve with `lambda` checked against a coercivity threshold; a value below
/// the threshold still runs but carries a warning.
pub fn resolvent_solve_checked(
    p: &dyn PhaseFunction,
    lambda: f64,
    lambda_threshold: f64,
    f: &TorusGridFn,
    tol: f64,
    max_iter: usize,
) -> Result<Solve> {
    let mut s = resolvent_solve(p, lambda, f, tol, max_iter)?;
    if lambda < lambda_threshold {
        s.warnings.push(format!(
            "lambda={lambda} below the coercivity threshold {lambda_threshold}"
        ));
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ImplicitEuler => "implicit-euler",
            Scheme::CrankNicolson => "crank-nicolson",
        }
    }
}

/// Per-step trace of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub min_real: f64,
    pub max_real: f64,
    pub sup_norm: f64,
    pub mean: Complex64,
    pub sobolev: Vec<f64>,
}

/// Discrete semigroup trajectory.
#[derive(Debug, Clone)]
pub struct SemigroupRun {
    pub scheme: Scheme,
    pub dt: f64,
    pub steps: usize,
    pub snapshots: Vec<TorusGridFn>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Norms `||u||_{psi, s}` tracked per step.
    pub norms: Vec<(PsiSpec, f64)>,
    /// Set when an inner solve failed; the trace stops at that step.
    pub aborted: Option<Error>,
}

impl SemigroupRun {
    pub fn last(&self) -> &TorusGridFn {
        self.snapshots.last().expect("at least the initial state")
    }

    pub fn is_complete(&self) -> bool {
        self.aborted.is_none()
    }

    /// `Err` with the abort cause, when the run stopped early.
    pub fn into_result(self) -> Result<SemigroupRun> {
        match self.aborted {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }

    /// Columns: step, t, min_real, max_real, sup_norm, then one column per
    /// tracked Sobolev norm.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["step", "t", "min_real", "max_real", "sup_norm"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for (psi, s) in &self.norms {
            header.push(format!("norm[{};{s}]", psi.name()));
        }
        w.write_record(&header)?;
        for d in &self.diagnostics {
            let mut row = vec![
                d.step.to_string(),
                fmt_f64(d.t),
                fmt_f64(d.min_real),
                fmt_f64(d.max_real),
                fmt_f64(d.sup_norm),
            ];
            row.extend(d.sobolev.iter().map(|v| fmt_f64(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn diagnose(step: usize, t: f64, u: &TorusGridFn, norms: &[(PsiSpec, f64)]) -> Result<StepDiagnostics> {
    Ok(StepDiagnostics {
        step,
        t,
        min_real: u.min_real(),
        max_real: u.max_real(),
        sup_norm: u.sup_norm(),
        mean: u.mean(),
        sobolev: norms
            .iter()
            .map(|(psi, s)| sobolev_norm(psi, *s, u))
            .collect::<Result<_>>()?,
    })
}

/// Step `u' = -p(x, D) u` from `u0`.
///
/// Implicit Euler solves `(p + 1/dt) u_{n+1} = u_n / dt`; Crank-Nicolson
/// solves `(p + 2/dt) u_{n+1} = (2/dt) u_n - p u_n`.
pub fn semigroup_evolve(
    p: &dyn PhaseFunction,
    u0: &TorusGridFn,
    dt: f64,
    steps: usize,
    scheme: Scheme,
    norms: &[(PsiSpec, f64)],
) -> Result<SemigroupRun> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Input(format!("time step {dt} must be positive")));
    }
    let shift = match scheme {
        Scheme::ImplicitEuler => 1.0 / dt,
        Scheme::CrankNicolson => 2.0 / dt,
    };
    let resolvent = Resolvent::new(p, shift, u0.grid)?;
    let mut run = SemigroupRun {
        scheme,
        dt,
        steps,
        snapshots: vec![u0.clone()],
        diagnostics: vec![diagnose(0, 0.0, u0, norms)?],
        norms: norms.to_vec(),
        aborted: None,
    };
    let mut u = u0.clone();
    for step in 1..=steps {
        let rhs = match scheme {
            Scheme::ImplicitEuler => u.scale(Complex64::new(shift, 0.0)),
            Scheme::CrankNicolson => {
                let pu = resolvent.operator().apply(&u)?;
                u.scale(Complex64::new(shift, 0.0))
                    .axpy(Complex64::new(-1.0, 0.0), &pu)?
            }
        };
        match resolvent.solve(&rhs, DEFAULT_TOL * 1e-2, 0) {
            Ok(s) => u = s.u,
            Err(cause) => {
                run.aborted = Some(Error::AbortedRun {
                    completed: step - 1,
                    requested: steps,
                    cause: Box::new(cause),
                });
                return Ok(run);
            }
        }
        run.diagnostics
            .push(diagnose(step, step as f64 * dt, &u, norms)?);
        run.snapshots.push(u.clone());
    }
    Ok(run)
}

/// `exp(-t p(D)) u0` for an x-independent symbol; `t = 0` is the identity.
pub fn exact_multiplier_evolve(p: &dyn PhaseFunction, u0: &TorusGridFn, t: f64) -> Result<TorusGridFn> {
    if !p.is_x_independent() {
        return Err(Error::Capability(
            "exact evolution needs an x-independent symbol".into(),
        ));
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let g = u0.grid;
    let origin = vec![0.0; g.dim];
    let mut c = u0.coefficients();
    for (k, v) in c.iter_mut().enumerate() {
        if g.is_nyquist(k) {
            *v = Complex64::new(0.0, 0.0);
        } else {
            *v *= (-p.eval_complex(&origin, &g.frequency(k))? * t).exp();
        }
    }
    TorusGridFn::from_coefficients(g, c)
}

/// One row of a regularity table.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityRow {
    pub s: f64,
    pub coarse: f64,
    pub fine: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityTable {
    pub rows: Vec<RegularityRow>,
    /// Largest `s` whose norm changed by at most `stability_tol` under
    /// refinement.
    pub largest_stable_s: Option<f64>,
    /// `sup |u| / ||u||_{psi0, s*}` at the embedding index.
    pub embedding_ratio: Option<f64>,
    pub embedding_s: f64,
}

/// Solve at `N` and `2N` (the right-hand side refined spectrally) and
/// tabulate `||u||_{psi0, s}` for every `s` in `s_list`.
pub fn regularity_probe(
    p: &dyn PhaseFunction,
    lambda: f64,
    f: &TorusGridFn,
    psi0: &PsiSpec,
    s_list: &[f64],
    embedding_s: f64,
    stability_tol: f64,
) -> Result<RegularityTable> {
    let coarse = resolvent_solve(p, lambda, f, DEFAULT_TOL, 0)?.u;
    let f_fine = f.refine(2 * f.grid.points_per_dim)?;
    let fine = resolvent_solve(p, lambda, &f_fine, DEFAULT_TOL, 0)?.u;
    let mut rows = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let a = sobolev_norm(psi0, s, &coarse)?;
        let b = sobolev_norm(psi0, s, &fine)?;
        let stable = if a == 0.0 { b == 0.0 } else { ((b - a) / a).abs() <= stability_tol };
        rows.push(RegularityRow {
            s,
            coarse: a,
            fine: b,
            stable,
        });
    }
    let largest_stable_s = rows
        .iter()
        .filter(|r| r.stable)
        .map(|r| r.s)
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))));
    let en = sobolev_norm(psi0, embedding_s, &fine)?;
    let embedding_ratio = (en > 0.0).then(|| fine.sup_norm() / en);
    Ok(RegularityTable {
        rows,
        largest_stable_s,
        embedding_ratio,
        embedding_s,
    })
}
