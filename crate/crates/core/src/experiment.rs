//! Runs one configured task and writes its artifacts.
//!
//! Every CSV starts with a `#` comment line naming the task, the seed and
//! the wall-clock time; everything after it is a deterministic function of
//! the configuration.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::{Construction, ExperimentConfig, FieldConfig, NormReference, Task};
use crate::error::{Error, Result};
use crate::feller::{
    check_positive_maximum_principle, check_positivity_contraction, check_subordination_consistency,
    FellerReport, Stepping,
};
use crate::ndf::{verify_bernstein, verify_lambda_class, PsiSpec};
use crate::report::{fmt_f64, verdict, ClassReport};
use crate::sampling::{log_space, Refinement};
use crate::symcalc::{
    compose_symbols_leading, fit_budget, reference_functions, reference_pair, sigma_refinement,
    verify_symbol_class, Symbol,
};
use crate::torus::{garding_probe, regularity_probe, resolvent_solve, semigroup_evolve, TorusGridFn};

/// What a task produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub task: Task,
    pub pass: bool,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

/// Bump used when no initial state is configured.
const DEFAULT_CONCENTRATION: f64 = 4.0;

/// Seed streams within a task.
const STREAM_FIELD: u64 = 0;
const STREAM_PROBE: u64 = 1;

struct Sink<'a> {
    cfg: &'a ExperimentConfig,
    task: Task,
    dir: &'a Path,
    artifacts: Vec<PathBuf>,
}

impl Sink<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.artifacts.push(path);
        Ok(BufWriter::new(file))
    }

    fn csv(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let mut out = self.create(name)?;
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(out, "# subord {} seed={} written_at_unix={secs}", self.task.name(), self.cfg.seed)?;
        body(&mut out)?;
        out.flush()?;
        Ok(())
    }

    fn class(&mut self, name: &str, report: &ClassReport) -> Result<()> {
        self.csv(name, |w| report.write_csv(w))
    }

    fn dump(&mut self, name: &str, u: &TorusGridFn) -> Result<()> {
        if !self.cfg.output.dumps {
            return Ok(());
        }
        let mut out = self.create(name)?;
        u.write_dump(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

fn class_summary(r: &ClassReport) -> String {
    match r.first_failure() {
        Some(e) => format!(
            "{} {}: first failure alpha={:?} beta={:?} constant={:e}",
            r.kind.name(),
            verdict(r.pass),
            e.alpha,
            e.beta,
            e.constant
        ),
        None => format!("{} {}", r.kind.name(), verdict(r.pass)),
    }
}

fn torus_refinement(cfg: &ExperimentConfig) -> Refinement {
    Refinement::torus(cfg.grid.dim, cfg.grid.points)
}

/// The reference function used for Sobolev norms and Garding.
fn norm_psi(cfg: &ExperimentConfig) -> Result<PsiSpec> {
    match cfg.params.norm_reference {
        NormReference::Psi => cfg.psi(),
        NormReference::Psi0 => {
            let (f0, f1, c0, c1) = cfg.envelopes()?;
            Ok(reference_pair(&f0, &f1, c0, c1, &cfg.psi()?)?.0)
        }
    }
}

fn sobolev_list(cfg: &ExperimentConfig) -> Result<Vec<(PsiSpec, f64)>> {
    if cfg.params.s_list.is_empty() {
        return Ok(Vec::new());
    }
    let psi = norm_psi(cfg)?;
    Ok(cfg.params.s_list.iter().map(|&s| (psi.clone(), s)).collect())
}

fn field_or(cfg: &ExperimentConfig, task: Task, given: &Option<FieldConfig>, default: FieldConfig) -> Result<TorusGridFn> {
    cfg.field(given.as_ref().unwrap_or(&default), cfg.seed_for(task, STREAM_FIELD))
}

/// Human-readable plan of what `run_experiment` would do.
pub fn plan(cfg: &ExperimentConfig, task: Task) -> Result<String> {
    cfg.require_for(task)?;
    let mut s = String::new();
    let g = &cfg.grid;
    let p = &cfg.params;
    writeln!(s, "task: {}", task.name()).unwrap();
    writeln!(s, "seed: {}", cfg.seed).unwrap();
    writeln!(s, "grid: dim={} N={} L={}", g.dim, g.points, g.period).unwrap();
    if cfg.psi.is_some() {
        writeln!(s, "psi: {}", cfg.psi()?.name()).unwrap();
    }
    if cfg.family.is_some() {
        writeln!(s, "family: {}", cfg.family()?.name()).unwrap();
    }
    if cfg.symbol.is_some() {
        let sym = cfg.symbol()?;
        writeln!(s, "symbol: {} (order {}, lower order {})", sym.metadata, sym.order, sym.lower_order).unwrap();
        for w in &sym.warnings {
            writeln!(s, "warning: {w}").unwrap();
        }
    }
    if cfg.right.is_some() {
        writeln!(s, "right: {}", cfg.right_symbol()?.metadata).unwrap();
    }
    let detail = match task {
        Task::CheckLambda => format!("max order {}", p.max_alpha),
        Task::CheckBernstein => format!(
            "s in [{}, {}] ({} points), k <= {}, tol {}",
            p.s_range[0], p.s_range[1], p.s_count, p.max_k, p.bernstein_tol
        ),
        Task::CheckSymbol => format!(
            "claimed order {}, class {:?}, |alpha| <= {}, |beta| <= {}, epsilon {}",
            p.claimed_order.map_or("from symbol".into(), |m| m.to_string()),
            p.class,
            p.max_alpha,
            p.max_beta,
            p.epsilon
        ),
        Task::Compose => "leading term and remainder class".into(),
        Task::ReferenceFunctions => {
            let (f0, f1, c0, c1) = cfg.envelopes()?;
            format!("f0={} c0={c0}, f1={} c1={c1}, lambda {}", f0.name(), f1.name(), p.lambda)
        }
        Task::Garding => format!(
            "order {}, {} random samples, norms over {:?}",
            p.claimed_order.unwrap_or(2.0),
            p.samples,
            p.norm_reference
        ),
        Task::Solve => format!("lambda {}, tol {}, s list {:?}", p.lambda, p.tol, p.s_list),
        Task::Evolve => format!("{} steps of dt={} ({})", p.steps, p.dt, p.scheme.name()),
        Task::Feller => format!(
            "{} maximum-principle trials, {} steps of dt={} ({}), t={}",
            p.trials,
            p.steps,
            p.dt,
            p.scheme.name(),
            p.t
        ),
    };
    writeln!(s, "parameters: {detail}").unwrap();
    writeln!(s, "output: {}", cfg.output.dir.display()).unwrap();
    Ok(s)
}

/// Execute `task`. Verdict failures come back as `pass = false`; errors
/// leave whatever artifacts were already written in place.
pub fn run_experiment(cfg: &ExperimentConfig, task: Task) -> Result<Outcome> {
    cfg.require_for(task)?;
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut sink = Sink {
        cfg,
        task,
        dir: &dir,
        artifacts: Vec::new(),
    };
    let p = &cfg.params;
    let (pass, summary) = match task {
        Task::CheckLambda => {
            let r = verify_lambda_class(&cfg.psi()?, p.max_alpha, &torus_refinement(cfg))?;
            sink.class("check-lambda.csv", &r)?;
            (r.pass, class_summary(&r))
        }
        Task::CheckBernstein => {
            let grid = cfg.grid()?;
            let xs: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.point(i)).collect();
            let s = log_space(p.s_range[0], p.s_range[1], p.s_count);
            let r = verify_bernstein(&cfg.family()?, &xs, &s, p.max_k, p.bernstein_tol)?;
            sink.class("check-bernstein.csv", &r)?;
            (r.pass, class_summary(&r))
        }
        Task::CheckSymbol => {
            let sym = cfg.symbol()?;
            let m = p.claimed_order.unwrap_or(sym.order);
            let r = verify_symbol_class(&sym, m, &cfg.psi()?, cfg.class_check(), &torus_refinement(cfg))?;
            sink.class("check-symbol.csv", &r)?;
            (r.pass, class_summary(&r))
        }
        Task::Compose => {
            let c = compose_symbols_leading(&cfg.symbol()?, &cfg.right_symbol()?, cfg.grid.points)?;
            sink.class("compose.csv", &c.remainder)?;
            (
                c.remainder.pass,
                format!("{}; sup remainder {:e}", class_summary(&c.remainder), c.max_abs_remainder),
            )
        }
        Task::ReferenceFunctions => {
            let (f0, f1, c0, c1) = cfg.envelopes()?;
            let refinement = sigma_refinement(cfg.grid.dim);
            let rf = reference_functions(&f0, &f1, c0, c1, &cfg.psi()?, &refinement)?;
            sink.class("reference-functions.csv", &rf.sigma_report)?;
            let mut summary = format!("sigma={} below one half: {}", rf.sigma, rf.sigma_below_half);
            for w in &rf.warnings {
                summary.push_str(&format!("; warning: {w}"));
            }
            let mut pass = rf.sigma_report.pass;
            if cfg.symbol.is_some() {
                let sym = cfg.symbol()?;
                let mut r = refinement.clone();
                if !sym.is_x_independent() {
                    r.coarse = r.coarse.with_torus_x(cfg.grid.points);
                    r.fine = r.fine.with_torus_x(cfg.grid.points);
                }
                let fit = fit_budget(&sym, p.lambda, &rf.psi0, &rf.psi1, rf.sigma, p.max_alpha, p.max_beta, &r)?;
                sink.class("budget.csv", &fit.report())?;
                pass &= fit.pass();
                summary.push_str(&format!(
                    "; tau1={:?} tau0={:?} budget={:?}",
                    fit.tau1,
                    fit.tau0,
                    fit.budget()
                ));
            }
            (pass, summary)
        }
        Task::Garding => {
            let m = p.claimed_order.unwrap_or(2.0);
            let seed = cfg.seed_for(task, STREAM_PROBE);
            let g = garding_probe(&cfg.symbol()?, &norm_psi(cfg)?, m, p.samples, seed, cfg.grid()?)?;
            sink.csv("garding.csv", |w| {
                let mut w = csv::Writer::from_writer(w);
                w.write_record(["delta", "lambda_coarse", "lambda_fine", "stable"])?;
                for r in &g.rows {
                    w.write_record([
                        fmt_f64(r.delta),
                        fmt_f64(r.lambda_coarse),
                        fmt_f64(r.lambda_fine),
                        r.stable.to_string(),
                    ])?;
                }
                w.flush()?;
                Ok(())
            })?;
            (
                g.pass,
                format!(
                    "garding {}: delta0={} delta={} lambda={} over {} samples",
                    verdict(g.pass),
                    g.delta0,
                    g.delta_est,
                    g.lambda_est,
                    g.samples
                ),
            )
        }
        Task::Solve => {
            let sym = cfg.symbol()?;
            let bw = cfg.grid.points / 4;
            let f = field_or(cfg, task, &p.rhs, FieldConfig::Random { bandwidth: bw, real: true })?;
            let s = resolvent_solve(&sym, p.lambda, &f, p.tol, p.max_iter)?;
            sink.dump("solve-u.tgf", &s.u)?;
            sink.csv("solve.csv", |w| {
                let mut w = csv::Writer::from_writer(w);
                w.write_record(["iteration", "relative_residual"])?;
                for (i, r) in s.history.iter().enumerate() {
                    w.write_record([i.to_string(), fmt_f64(*r)])?;
                }
                w.flush()?;
                Ok(())
            })?;
            let mut summary = format!("solve converged in {} iterations, residual {:e}", s.iterations, s.residual);
            for w in &s.warnings {
                summary.push_str(&format!("; warning: {w}"));
            }
            if !p.s_list.is_empty() {
                let psi = norm_psi(cfg)?;
                let embed = p.s_list.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let t = regularity_probe(&sym, p.lambda, &f, &psi, &p.s_list, embed, p.stability_tol)?;
                sink.csv("regularity.csv", |w| {
                    let mut w = csv::Writer::from_writer(w);
                    w.write_record(["s", "norm_n", "norm_2n", "stable"])?;
                    for r in &t.rows {
                        w.write_record([fmt_f64(r.s), fmt_f64(r.coarse), fmt_f64(r.fine), r.stable.to_string()])?;
                    }
                    w.flush()?;
                    Ok(())
                })?;
                summary.push_str(&format!("; largest stable s {:?}", t.largest_stable_s));
            }
            (true, summary)
        }
        Task::Evolve => {
            let sym = cfg.symbol()?;
            let u0 = field_or(cfg, task, &p.initial, FieldConfig::Bump { concentration: DEFAULT_CONCENTRATION })?;
            let run = semigroup_evolve(&sym, &u0, p.dt, p.steps, p.scheme, &sobolev_list(cfg)?)?;
            sink.csv("evolve.csv", |w| run.write_csv(w))?;
            sink.dump("evolve-u.tgf", run.last())?;
            let summary = match &run.aborted {
                Some(e) => format!("evolve aborted: {e}"),
                None => format!("evolve completed {} steps, final sup {:e}", run.steps, run.last().sup_norm()),
            };
            (run.is_complete(), summary)
        }
        Task::Feller => {
            let sym = cfg.symbol()?;
            let grid = cfg.grid()?;
            let mut report = check_positive_maximum_principle(&sym, grid, p.trials, cfg.seed_for(task, STREAM_PROBE))?;
            let u0 = field_or(cfg, task, &p.initial, FieldConfig::Bump { concentration: DEFAULT_CONCENTRATION })?;
            let run = semigroup_evolve(&sym, &u0, p.dt, p.steps, p.scheme, &[])?;
            report = report.merge(check_positivity_contraction(&run, &u0));
            report = report.merge(subordination(cfg, &sym, &u0)?);
            sink.csv("feller.csv", |w| report.write_csv(w))?;
            let summary = report.summary();
            (report.pass(), summary)
        }
    };
    Ok(Outcome {
        task,
        pass,
        summary,
        artifacts: sink.artifacts,
    })
}

/// Subordination consistency, when the symbol is `f(psi)` for an
/// x-independent family applied to the bare `psi`. Always stepped with
/// Crank-Nicolson; `params.scheme` only drives the positivity trace.
fn subordination(cfg: &ExperimentConfig, sym: &Symbol, u0: &TorusGridFn) -> Result<FellerReport> {
    let empty = FellerReport::default();
    let Some(sc) = &cfg.symbol else { return Ok(empty) };
    let bare = sc.shift == 0.0 && sc.coeff == crate::smooth::SmoothFn::Const(1.0);
    let Some(f) = cfg.family.as_ref().filter(|f| f.is_x_independent()) else { return Ok(empty) };
    if sc.construction != Construction::Subordinate || !bare || !sym.is_x_independent() {
        return Ok(empty);
    }
    // second order, so the stepping error stays below the comparison tolerance
    let stepping = Stepping {
        dt: cfg.params.dt,
        ..Stepping::default()
    };
    check_subordination_consistency(f, &cfg.psi()?, cfg.params.t, u0, cfg.params.consistency_tol, stepping)
}
