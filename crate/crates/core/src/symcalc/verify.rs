use crate::error::{Error, Result};
use crate::ndf::{as_u8, eval_psi, PsiSpec};
use crate::report::{ClassEntry, ClassReport, Location, ReportKind};
use crate::sampling::{fit_constants, multi_indices, rho, sweep_sup, Refinement};

use super::symbol::{Symbol, SymbolClass};

/// Resolution of every fitted order (sigma, tau0, tau1).
pub const ORDER_LATTICE: f64 = 1.0 / 64.0;

/// Default slack added to claimed orders.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Bounds requested from a class check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassCheck {
    pub class: SymbolClass,
    pub max_alpha: usize,
    pub max_beta: usize,
    pub epsilon: f64,
}

impl ClassCheck {
    pub fn rho(max_alpha: usize, max_beta: usize, epsilon: f64) -> Self {
        ClassCheck {
            class: SymbolClass::Rho,
            max_alpha,
            max_beta,
            epsilon,
        }
    }
}

fn index_pairs(dim: usize, max_alpha: usize, max_beta: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let alphas = multi_indices(dim, max_alpha);
    let betas = multi_indices(dim, max_beta);
    betas
        .iter()
        .flat_map(|b| alphas.iter().map(move |a| (a.clone(), b.clone())))
        .collect()
}

/// Exponent of `(1 + psi)` that bounds an `(alpha, .)` derivative.
pub(crate) fn weight_exponent(order: f64, class: SymbolClass, abs_alpha: usize) -> f64 {
    match class {
        SymbolClass::Rho => (order - rho(abs_alpha)) / 2.0,
        SymbolClass::Zero => order / 2.0,
    }
}

/// Derivative jets are computed once per point; ratios for several claimed
/// orders are then cheap. Returns `|d^beta_x d^alpha_xi p|` and `1 + psi`.
fn derivative_table(
    p: &Symbol,
    psi: &PsiSpec,
    pairs: &[(Vec<usize>, Vec<usize>)],
    order: usize,
    x: &[f64],
    xi: &[f64],
    out: &mut [f64],
) -> Result<f64> {
    let jet = p.jet(x, xi, order)?;
    for ((alpha, beta), slot) in pairs.iter().zip(out.iter_mut()) {
        let multi: Vec<u8> = as_u8(beta).into_iter().chain(as_u8(alpha)).collect();
        *slot = jet.derivative(&multi).abs();
    }
    Ok(1.0 + eval_psi(psi, xi)?)
}

/// Fit `c_{alpha,beta} = sup |d^beta_x d^alpha_xi p| / (1 + psi)^{w}` with
/// `w = (m + eps - rho(|alpha|))/2` (or `(m + eps)/2` in the 0-class) on
/// both grids of `refinement`.
pub fn verify_symbol_class(
    p: &Symbol,
    claimed_m: f64,
    psi: &PsiSpec,
    check: ClassCheck,
    refinement: &Refinement,
) -> Result<ClassReport> {
    if psi.dim != p.dim() || refinement.coarse.dim != p.dim() {
        return Err(Error::Input("symbol, psi and grid dimensions differ".into()));
    }
    let pairs = index_pairs(p.dim(), check.max_alpha, check.max_beta);
    let jet_order = check.max_alpha + check.max_beta;
    let exponents: Vec<f64> = pairs
        .iter()
        .map(|(a, _)| weight_exponent(claimed_m + check.epsilon, check.class, a.iter().sum()))
        .collect();
    let entries = fit_constants(refinement, &pairs, |x, xi, out| {
        let base = derivative_table(p, psi, &pairs, jet_order, x, xi, out)?;
        for (slot, w) in out.iter_mut().zip(&exponents) {
            *slot /= base.powf(*w);
        }
        Ok(())
    })?;
    let mut report = ClassReport::new(ReportKind::SymbolClass, p.metadata.clone());
    report.claimed_order = Some(claimed_m);
    report.epsilon = check.epsilon;
    report.entries = entries;
    Ok(report.finalize())
}

/// Smallest order `base + j * ORDER_LATTICE`, `0 <= j <= steps`, at which
/// `p` passes the class check, found by bisection (passing is monotone in
/// the order). Returns the index and the passing report, or `None` when even
/// the largest order fails.
pub(crate) fn smallest_passing_order(
    p: &Symbol,
    base: f64,
    steps: usize,
    psi: &PsiSpec,
    check: ClassCheck,
    refinement: &Refinement,
    kind: ReportKind,
) -> Result<(Option<usize>, ClassReport)> {
    let pairs = index_pairs(p.dim(), check.max_alpha, check.max_beta);
    let jet_order = check.max_alpha + check.max_beta;
    // Sample |derivatives| and 1 + psi once per point; store per grid.
    let sample = |grid: &crate::sampling::PhaseGrid| -> Result<Vec<(Vec<f64>, f64, usize)>> {
        use rayon::prelude::*;
        let nxi = grid.xi.len();
        (0..grid.len())
            .into_par_iter()
            .map(|flat| {
                let (x, xi) = (&grid.x[flat / nxi], &grid.xi[flat % nxi]);
                let mut d = vec![0.0; pairs.len()];
                let b = derivative_table(p, psi, &pairs, jet_order, x, xi, &mut d)?;
                Ok((d, b, flat))
            })
            .collect()
    };
    let coarse = sample(&refinement.coarse)?;
    let fine = sample(&refinement.fine)?;

    let evaluate = |j: usize| -> ClassReport {
        let order = base + j as f64 * ORDER_LATTICE + check.epsilon;
        let entries = pairs
            .iter()
            .enumerate()
            .map(|(e, (alpha, beta))| {
                let w = weight_exponent(order, check.class, alpha.iter().sum());
                let sup = |rows: &[(Vec<f64>, f64, usize)], grid: &crate::sampling::PhaseGrid| {
                    let mut best = (f64::NEG_INFINITY, 0usize);
                    let mut bad = None;
                    for (d, b, flat) in rows {
                        let r = d[e] / b.powf(w);
                        if !r.is_finite() {
                            bad.get_or_insert(*flat);
                        } else if r > best.0 {
                            best = (r, *flat);
                        }
                    }
                    let nxi = grid.xi.len();
                    let at = bad.unwrap_or(best.1);
                    let loc = Location {
                        x: grid.x[at / nxi].clone(),
                        xi: grid.xi[at % nxi].clone(),
                    };
                    (bad.is_none(), best.0.max(0.0), loc)
                };
                let (cf, cv, _) = sup(&coarse, &refinement.coarse);
                let (ff, fv, loc) = sup(&fine, &refinement.fine);
                let finite = cf && ff;
                let stable = finite
                    && fv <= cv * (1.0 + refinement.growth_tol) + crate::sampling::GROWTH_FLOOR;
                ClassEntry {
                    alpha: alpha.clone(),
                    beta: beta.clone(),
                    constant: if ff { fv } else { f64::INFINITY },
                    coarse_constant: if cf { cv } else { f64::INFINITY },
                    location: loc,
                    finite,
                    stable,
                    pass: stable,
                }
            })
            .collect();
        let mut report = ClassReport::new(kind, p.metadata.clone());
        report.claimed_order = Some(order - check.epsilon);
        report.epsilon = check.epsilon;
        report.entries = entries;
        report.finalize()
    };

    let top = evaluate(steps);
    if !top.pass {
        return Ok((None, top));
    }
    let bottom = evaluate(0);
    if bottom.pass {
        return Ok((Some(0), bottom));
    }
    let (mut lo, mut hi) = (0usize, steps);
    let mut best = top;
    // invariant: lo fails, hi passes
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let r = evaluate(mid);
        if r.pass {
            hi = mid;
            best = r;
        } else {
            lo = mid;
        }
    }
    Ok((Some(hi), best))
}

/// Outcome of an ellipticity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipticity {
    /// `inf q / (1 + psi)^{m/2}` over `|xi| >= R` on the fine grid.
    pub delta0: f64,
    pub coarse_delta0: f64,
    pub location: Location,
    pub pass: bool,
}

/// `delta0 = inf_{|xi| >= R} q(x, xi) / (1 + psi(xi))^{m/2}`; passes when
/// positive and not shrinking by more than the growth tolerance under
/// refinement.
pub fn verify_ellipticity(
    q: &Symbol,
    psi: &PsiSpec,
    m: f64,
    radius: f64,
    refinement: &Refinement,
) -> Result<Ellipticity> {
    let restrict = |grid: &crate::sampling::PhaseGrid| {
        let mut g = grid.clone();
        g.xi.retain(|xi| xi.iter().map(|v| v * v).sum::<f64>().sqrt() >= radius);
        g
    };
    let coarse = restrict(&refinement.coarse);
    let fine = restrict(&refinement.fine);
    if coarse.is_empty() || fine.is_empty() {
        return Err(Error::Input(format!("no grid points with |xi| >= {radius}")));
    }
    let eval = |x: &[f64], xi: &[f64], out: &mut [f64]| -> Result<()> {
        let v = q.eval(x, xi)? / (1.0 + eval_psi(psi, xi)?).powf(m / 2.0);
        out[0] = -v;
        Ok(())
    };
    let c = sweep_sup(&coarse, 1, eval)?.remove(0);
    let f = sweep_sup(&fine, 1, eval)?.remove(0);
    let finite = c.is_finite() && f.is_finite();
    let (delta0, coarse_delta0) = (-f.value, -c.value);
    let pass = finite && delta0 > 0.0 && delta0 >= coarse_delta0 * (1.0 - refinement.growth_tol);
    Ok(Ellipticity {
        delta0,
        coarse_delta0,
        location: Location { x: f.x, xi: f.xi },
        pass,
    })
}

/// Fitted exponents of the generation budget.
#[derive(Debug, Clone)]
pub struct BudgetFit {
    /// Smallest `tau1` with `p` in `S^{2 + tau1, psi1}`.
    pub tau1: Option<f64>,
    /// Smallest `tau0` with `1/(p + lambda)` in `S^{-2 + tau0, psi0}`.
    pub tau0: Option<f64>,
    pub sigma: f64,
    pub tau1_report: ClassReport,
    pub tau0_report: ClassReport,
}

impl BudgetFit {
    /// `tau1 + tau0 + sigma (2 + tau1)`, when both exponents were found.
    pub fn budget(&self) -> Option<f64> {
        Some(crate::report::feller_budget(self.tau0?, self.tau1?, self.sigma))
    }

    pub fn pass(&self) -> bool {
        self.budget().is_some_and(|b| b < 1.0)
    }

    /// Summary report carrying the three exponents and the budget.
    pub fn report(&self) -> ClassReport {
        let mut r = ClassReport::new(ReportKind::Budget, self.tau1_report.subject.clone());
        r.tau0 = self.tau0;
        r.tau1 = self.tau1;
        r.sigma = Some(self.sigma);
        r.entries = self
            .tau1_report
            .entries
            .iter()
            .chain(&self.tau0_report.entries)
            .cloned()
            .collect();
        r = r.finalize();
        r.pass = self.pass();
        r
    }
}

/// Largest exponent searched when fitting `tau0` and `tau1`.
pub const TAU_MAX: f64 = 4.0;

/// Fit `tau1` and `tau0` on the order lattice with zero slack.
pub fn fit_budget(
    p: &Symbol,
    lambda: f64,
    psi0: &PsiSpec,
    psi1: &PsiSpec,
    sigma: f64,
    max_alpha: usize,
    max_beta: usize,
    refinement: &Refinement,
) -> Result<BudgetFit> {
    let steps = (TAU_MAX / ORDER_LATTICE).round() as usize;
    let check = ClassCheck::rho(max_alpha, max_beta, 0.0);
    let (j1, tau1_report) =
        smallest_passing_order(p, 2.0, steps, psi1, check, refinement, ReportKind::Budget)?;
    let inv = super::symbol::inverse_symbol(p, lambda)?;
    let (j0, tau0_report) =
        smallest_passing_order(&inv, -2.0, steps, psi0, check, refinement, ReportKind::Budget)?;
    Ok(BudgetFit {
        tau1: j1.map(|j| j as f64 * ORDER_LATTICE),
        tau0: j0.map(|j| j as f64 * ORDER_LATTICE),
        sigma,
        tau1_report,
        tau0_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::SmoothFn;

    fn one_plus_xi2() -> Symbol {
        Symbol::shifted_psi(SmoothFn::Const(1.0), 1.0, PsiSpec::quadratic(1)).unwrap()
    }

    #[test]
    fn quadratic_symbol_class() {
        let r = Refinement::torus(1, 32);
        let psi = PsiSpec::quadratic(1);
        let rep =
            verify_symbol_class(&one_plus_xi2(), 2.0, &psi, ClassCheck::rho(2, 2, 0.0), &r).unwrap();
        assert!(rep.pass);
        assert!((rep.entry(&[0], &[0]).unwrap().constant - 1.0).abs() < 1e-15);
        assert!(rep.entry(&[1], &[0]).unwrap().constant <= 2.0);
        let bad =
            verify_symbol_class(&one_plus_xi2(), 1.0, &psi, ClassCheck::rho(2, 2, 0.0), &r).unwrap();
        assert!(!bad.pass);
        let f = bad.first_failure().unwrap();
        assert_eq!((f.alpha.clone(), f.beta.clone()), (vec![0], vec![0]));
    }

    #[test]
    fn ellipticity_examples() {
        let r = Refinement::torus(1, 32);
        let psi = PsiSpec::quadratic(1);
        let e = verify_ellipticity(&one_plus_xi2(), &psi, 2.0, 0.0, &r).unwrap();
        assert!(e.pass && (e.delta0 - 1.0).abs() < 1e-15);
        let xi2 = Symbol::psi(psi.clone());
        assert!(!verify_ellipticity(&xi2, &psi, 2.0, 0.0, &r).unwrap().pass);
        let e1 = verify_ellipticity(&xi2, &psi, 2.0, 1.0, &r).unwrap();
        assert!(e1.pass && (e1.delta0 - 0.5).abs() < 1e-15);
        let vc = Symbol::shifted_psi(SmoothFn::sin(2.0, 1.0), 1.0, psi.clone()).unwrap();
        let ev = verify_ellipticity(&vc, &psi, 2.0, 0.0, &r).unwrap();
        // the x-grid hits 3 pi / 2 exactly when N is divisible by 4
        assert!((ev.delta0 - 1.0).abs() < 1e-12);
        assert!(matches!(
            verify_ellipticity(&vc, &psi, 2.0, 1e6, &r),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn smallest_order_of_quadratic_is_two() {
        let r = Refinement::xi_log(1, 1e-2, 1e2, 8, 20);
        let psi = PsiSpec::quadratic(1);
        let (j, rep) = smallest_passing_order(
            &one_plus_xi2(),
            0.0,
            256,
            &psi,
            ClassCheck::rho(2, 0, 0.0),
            &r,
            ReportKind::SymbolClass,
        )
        .unwrap();
        assert_eq!(j, Some(128));
        assert!(rep.pass);
    }
}
