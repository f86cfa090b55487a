use crate::error::{Error, Result};
use crate::ndf::{eval_psi, BernsteinSpec, PsiSpec};
use crate::report::{ClassReport, ReportKind};
use crate::sampling::Refinement;

use super::symbol::Symbol;
use super::verify::{smallest_passing_order, ClassCheck, ORDER_LATTICE};

/// The pair `psi0 <= psi1` built from envelopes, with the fitted `sigma`
/// such that `(1 + psi1)^{1/2}` has order `1 + sigma` over `psi0`.
#[derive(Debug, Clone)]
pub struct ReferenceFunctions {
    pub psi0: PsiSpec,
    pub psi1: PsiSpec,
    pub sigma: f64,
    pub sigma_report: ClassReport,
    /// `sigma < 1/2`, necessary for the generation budget to close.
    pub sigma_below_half: bool,
    pub warnings: Vec<String>,
}

/// Log-spaced xi samples in `[1e-2, 1e2]` against a box `2^20` times wider.
/// The origin is excluded, so kinks of `psi` there do not enter the fit.
pub fn sigma_refinement(dim: usize) -> Refinement {
    Refinement::xi_log(dim, 1e-2, 1e2, 8, 20)
}

/// `psi0 = c0 f0(psi)` and `psi1 = c1 f1(psi)`, without the sigma fit.
pub fn reference_pair(
    f0: &BernsteinSpec,
    f1: &BernsteinSpec,
    c0: f64,
    c1: f64,
    psi: &PsiSpec,
) -> Result<(PsiSpec, PsiSpec)> {
    if !(c0 > 0.0 && c1 > 0.0) {
        return Err(Error::Input(format!("scales must be positive, got c0={c0}, c1={c1}")));
    }
    if !(f0.is_x_independent() && f1.is_x_independent()) {
        return Err(Error::Input("envelopes must not depend on x".into()));
    }
    Ok((
        PsiSpec::subordinate(psi.clone(), f0.clone(), c0)?,
        PsiSpec::subordinate(psi.clone(), f1.clone(), c1)?,
    ))
}

/// `psi1 = c1 f1(psi)`, `psi0 = c0 f0(psi)`, and the smallest `sigma` in
/// `[0, 1]` on the order lattice with `(1 + psi1)^{1/2}` in
/// `S^{1 + sigma, psi0}`.
pub fn reference_functions(
    f0: &BernsteinSpec,
    f1: &BernsteinSpec,
    c0: f64,
    c1: f64,
    psi: &PsiSpec,
    refinement: &Refinement,
) -> Result<ReferenceFunctions> {
    let (psi0, psi1) = reference_pair(f0, f1, c0, c1, psi)?;
    let mut warnings = Vec::new();
    let mut worst: Option<(f64, Vec<f64>)> = None;
    for xi in &refinement.coarse.xi {
        let gap = eval_psi(&psi0, xi)? - eval_psi(&psi1, xi)?;
        if gap > 0.0 && worst.as_ref().is_none_or(|w| gap > w.0) {
            worst = Some((gap, xi.clone()));
        }
    }
    if let Some((gap, xi)) = worst {
        warnings.push(format!("psi0 exceeds psi1 by {gap:e} at xi={xi:?}"));
    }
    let root = Symbol::psi(psi1.clone()).powf(1.0, 0.5);
    let steps = (1.0 / ORDER_LATTICE).round() as usize;
    let (j, mut report) = smallest_passing_order(
        &root,
        1.0,
        steps,
        &psi0,
        ClassCheck::rho(2, 0, 0.0),
        refinement,
        ReportKind::Sigma,
    )?;
    let Some(j) = j else {
        return Err(Error::Incompatible(format!(
            "(1+{})^(1/2) is not of order 2 over {}",
            psi1.name(),
            psi0.name()
        )));
    };
    let sigma = j as f64 * ORDER_LATTICE;
    report.sigma = Some(sigma);
    let sigma_below_half = sigma < 0.5;
    report.pass = report.pass && sigma_below_half;
    Ok(ReferenceFunctions {
        psi0,
        psi1,
        sigma,
        sigma_report: report,
        sigma_below_half,
        warnings,
    })
}
