use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};
use crate::ndf::{BernsteinFamily, PsiSpec};
use crate::smooth::SmoothFn;

/// Which estimate of the symbol class applies: derivatives in `xi` gain
/// `rho(|alpha|)` powers, or gain nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolClass {
    Rho,
    Zero,
}

/// Values of `p + lambda` at or below this are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

type ScalarFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

enum Kernel {
    /// `coeff(x) * (shift + psi(xi))`.
    Affine {
        coeff: SmoothFn,
        shift: f64,
        psi: PsiSpec,
    },
    Subordinate {
        family: BernsteinFamily,
        inner: Symbol,
    },
    /// `(shift + inner)^{exponent(x)}`.
    Power {
        inner: Symbol,
        shift: f64,
        exponent: SmoothFn,
    },
    /// `t (1 - exp(-4 t))` with `t = (1 + inner)^{alpha(x)/2}`.
    VariableOrder {
        inner: Symbol,
        alpha: SmoothFn,
    },
    Inverse {
        inner: Symbol,
        lambda: f64,
    },
    Product(Symbol, Symbol),
    Sum(Symbol, Symbol),
    Scaled(f64, Symbol),
    /// `-sum_j d_{xi_j} q1 * d_{x_j} q2`.
    CrossTerm(Symbol, Symbol),
    /// Opaque closure differentiated by finite differences.
    Closure(Arc<ScalarFn>),
}

fn coords(x: &[f64], xi: &[f64], order: usize) -> (Vec<Jet>, Vec<Jet>) {
    let n = x.len();
    let space = JetSpace::get(2 * n, order);
    let xj = (0..n).map(|i| Jet::variable(&space, i, x[i])).collect();
    let xij = (0..n).map(|i| Jet::variable(&space, n + i, xi[i])).collect();
    (xj, xij)
}

fn smooth_pow(base: &Jet, exponent: &SmoothFn, x: &[Jet]) -> Jet {
    if exponent.is_constant() {
        base.powf(exponent.eval(&[]))
    } else {
        (&exponent.jet(x, base) * &base.ln()).exp()
    }
}

impl Kernel {
    fn jet(&self, x: &[f64], xi: &[f64], order: usize) -> Result<Jet> {
        let domain = |message: String| Error::Domain {
            x: x.to_vec(),
            xi: xi.to_vec(),
            message,
        };
        match self {
            Kernel::Affine { coeff, shift, psi } => {
                let (xj, xij) = coords(x, xi, order);
                let a = coeff.jet(&xj, &xij[0]);
                Ok(&a * &psi.jet(&xij).add_scalar(*shift))
            }
            Kernel::Subordinate { family, inner } => {
                let s = inner.kernel.jet(x, xi, order)?;
                if s.value() < 0.0 {
                    return Err(domain(format!(
                        "subordinated symbol argument {} is negative",
                        s.value()
                    )));
                }
                let (xj, _) = coords(x, xi, order);
                family.jet(&xj, &s)
            }
            Kernel::Power {
                inner,
                shift,
                exponent,
            } => {
                let base = inner.kernel.jet(x, xi, order)?.add_scalar(*shift);
                if base.value() <= 0.0 {
                    return Err(domain(format!("power base {} is not positive", base.value())));
                }
                let (xj, _) = coords(x, xi, order);
                Ok(smooth_pow(&base, exponent, &xj))
            }
            Kernel::VariableOrder { inner, alpha } => {
                let base = inner.kernel.jet(x, xi, order)?.add_scalar(1.0);
                if base.value() <= 0.0 {
                    return Err(domain(format!("1 + q = {} is not positive", base.value())));
                }
                let (xj, _) = coords(x, xi, order);
                let half = halve(alpha);
                let t = smooth_pow(&base, &half, &xj);
                let saturation = (-t.scale(-4.0).exp()).add_scalar(1.0);
                Ok(&t * &saturation)
            }
            Kernel::Inverse { inner, lambda } => {
                let d = inner.kernel.jet(x, xi, order)?.add_scalar(*lambda);
                if d.value() <= SINGULAR_TOL {
                    return Err(Error::NearSingular {
                        x: x.to_vec(),
                        xi: xi.to_vec(),
                        value: d.value(),
                    });
                }
                Ok(d.recip())
            }
            Kernel::Product(a, b) => {
                Ok(&a.kernel.jet(x, xi, order)? * &b.kernel.jet(x, xi, order)?)
            }
            Kernel::Sum(a, b) => Ok(&a.kernel.jet(x, xi, order)? + &b.kernel.jet(x, xi, order)?),
            Kernel::Scaled(c, a) => Ok(a.kernel.jet(x, xi, order)?.scale(*c)),
            Kernel::CrossTerm(q1, q2) => {
                let n = x.len();
                let j1 = q1.kernel.jet(x, xi, order + 1)?;
                let j2 = q2.kernel.jet(x, xi, order + 1)?;
                let mut acc = Jet::constant(&JetSpace::get(2 * n, order), 0.0);
                for j in 0..n {
                    acc = &acc - &(&j1.differentiate(n + j) * &j2.differentiate(j));
                }
                Ok(acc)
            }
            Kernel::Closure(f) => Ok(finite_difference_jet(f.as_ref(), x, xi, order)),
        }
    }

    fn is_x_independent(&self) -> bool {
        match self {
            Kernel::Affine { coeff, .. } => coeff.is_constant(),
            Kernel::Subordinate { family, inner } => {
                family.is_x_independent() && inner.is_x_independent()
            }
            Kernel::Power { inner, exponent, .. } => {
                exponent.is_constant() && inner.is_x_independent()
            }
            Kernel::VariableOrder { inner, alpha } => {
                alpha.is_constant() && inner.is_x_independent()
            }
            Kernel::Inverse { inner, .. } | Kernel::Scaled(_, inner) => inner.is_x_independent(),
            Kernel::Product(a, b) | Kernel::Sum(a, b) => {
                a.is_x_independent() && b.is_x_independent()
            }
            Kernel::CrossTerm(q1, q2) => q1.is_x_independent() || q2.is_x_independent(),
            Kernel::Closure(_) => false,
        }
    }
}

fn halve(f: &SmoothFn) -> SmoothFn {
    match f {
        SmoothFn::Const(c) => SmoothFn::Const(c / 2.0),
        SmoothFn::Trig(t) => {
            let mut t = t.clone();
            t.offset /= 2.0;
            t.amplitude /= 2.0;
            SmoothFn::Trig(t)
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Central tensor stencil for the mixed derivative `multi` with steps `h`.
fn stencil(f: &ScalarFn, z: &[f64], multi: &[u8], h: &[f64]) -> f64 {
    let n = z.len() / 2;
    let active: Vec<usize> = (0..z.len()).filter(|&i| multi[i] > 0).collect();
    let mut counters = vec![0usize; active.len()];
    let mut point = z.to_vec();
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for (slot, &i) in active.iter().enumerate() {
            let e = multi[i] as usize;
            let j = counters[slot];
            weight *= if j % 2 == 0 { 1.0 } else { -1.0 } * binomial(e, j) / h[i].powi(e as i32);
            point[i] = z[i] + (e as f64 / 2.0 - j as f64) * h[i];
        }
        total += weight * f(&point[..n], &point[n..]);
        let mut slot = 0;
        loop {
            if slot == active.len() {
                return total;
            }
            counters[slot] += 1;
            if counters[slot] <= multi[active[slot]] as usize {
                break;
            }
            counters[slot] = 0;
            slot += 1;
        }
    }
}

/// Taylor jet of a closure from central differences with one Richardson pass.
///
/// The step for a derivative of total degree `k` at coordinate `z_i` is
/// `max(1, |z_i|) * eps^{1/(k+2)}`, which balances truncation against
/// roundoff for second-order stencils.
fn finite_difference_jet(f: &ScalarFn, x: &[f64], xi: &[f64], order: usize) -> Jet {
    let space = JetSpace::get(2 * x.len(), order);
    let z: Vec<f64> = x.iter().chain(xi).copied().collect();
    let coeffs = space
        .monomials()
        .iter()
        .map(|multi| {
            let degree: usize = multi.iter().map(|&e| e as usize).sum();
            if degree == 0 {
                return f(x, xi);
            }
            let base = f64::EPSILON.powf(1.0 / (degree as f64 + 2.0));
            let h: Vec<f64> = z.iter().map(|v| v.abs().max(1.0) * base).collect();
            let half: Vec<f64> = h.iter().map(|v| v / 2.0).collect();
            let coarse = stencil(f, &z, multi, &h);
            let fine = stencil(f, &z, multi, &half);
            let d = (4.0 * fine - coarse) / 3.0;
            let fact: f64 = multi
                .iter()
                .map(|&e| (1..=e as usize).product::<usize>() as f64)
                .product();
            d / fact
        })
        .collect();
    Jet::from_coeffs(&space, coeffs)
}

/// A real symbol `p(x, xi)` with derivative access, claimed order and
/// reference function.
#[derive(Clone)]
pub struct Symbol {
    kernel: Arc<Kernel>,
    dim: usize,
    /// Claimed order `m` in the scale of `psi`.
    pub order: f64,
    /// Order of the ellipticity lower bound, `m` for `q >= d (1 + psi)^{m/2}`.
    pub lower_order: f64,
    pub psi: PsiSpec,
    pub class: SymbolClass,
    pub metadata: String,
    pub warnings: Vec<String>,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("metadata", &self.metadata)
            .field("dim", &self.dim)
            .field("order", &self.order)
            .field("psi", &self.psi.name())
            .field("class", &self.class)
            .finish()
    }
}

impl Symbol {
    fn build(kernel: Kernel, dim: usize, order: f64, psi: PsiSpec, metadata: String) -> Symbol {
        Symbol {
            kernel: Arc::new(kernel),
            dim,
            order,
            lower_order: order,
            psi,
            class: SymbolClass::Rho,
            metadata,
            warnings: Vec::new(),
        }
    }

    /// `q(x, xi) = coeff(x) * (shift + psi(xi))`, of order 2.
    pub fn shifted_psi(coeff: SmoothFn, shift: f64, psi: PsiSpec) -> Result<Symbol> {
        if coeff.min_dim() > psi.dim {
            return Err(Error::Input(format!(
                "coefficient uses axis {} of a {}-dimensional symbol",
                coeff.min_dim() - 1,
                psi.dim
            )));
        }
        let dim = psi.dim;
        let metadata = match (&coeff, shift) {
            (SmoothFn::Const(c), s) if *c == 1.0 && s == 0.0 => psi.name(),
            (SmoothFn::Const(c), s) if *c == 1.0 => format!("{s}+{}", psi.name()),
            (_, s) => format!("a(x)({s}+{})", psi.name()),
        };
        Ok(Symbol::build(
            Kernel::Affine {
                coeff,
                shift,
                psi: psi.clone(),
            },
            dim,
            2.0,
            psi,
            metadata,
        ))
    }

    /// `q(xi) = psi(xi)`.
    pub fn psi(psi: PsiSpec) -> Symbol {
        Symbol::shifted_psi(SmoothFn::Const(1.0), 0.0, psi).expect("constant coefficient")
    }

    /// `p = c`, order 0 against the quadratic reference function.
    pub fn constant(dim: usize, c: f64) -> Symbol {
        let mut s = Symbol::build(
            Kernel::Affine {
                coeff: SmoothFn::Const(c),
                shift: 1.0,
                psi: PsiSpec::zero(dim),
            },
            dim,
            0.0,
            PsiSpec::quadratic(dim),
            format!("{c}"),
        );
        s.lower_order = 0.0;
        s
    }

    /// Symbol given by an opaque closure; derivatives by finite differences.
    pub fn from_fn<F>(dim: usize, order: f64, psi: PsiSpec, name: impl Into<String>, f: F) -> Symbol
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Symbol::build(Kernel::Closure(Arc::new(f)), dim, order, psi, name.into())
    }

    pub fn product(a: &Symbol, b: &Symbol) -> Result<Symbol> {
        a.check_same_dim(b)?;
        let mut s = Symbol::build(
            Kernel::Product(a.clone(), b.clone()),
            a.dim,
            a.order + b.order,
            a.psi.clone(),
            format!("({})*({})", a.metadata, b.metadata),
        );
        s.lower_order = a.lower_order + b.lower_order;
        Ok(s)
    }

    pub fn sum(a: &Symbol, b: &Symbol) -> Result<Symbol> {
        a.check_same_dim(b)?;
        Ok(Symbol::build(
            Kernel::Sum(a.clone(), b.clone()),
            a.dim,
            a.order.max(b.order),
            a.psi.clone(),
            format!("({})+({})", a.metadata, b.metadata),
        ))
    }

    pub fn scaled(&self, c: f64) -> Symbol {
        let mut s = Symbol::build(
            Kernel::Scaled(c, self.clone()),
            self.dim,
            self.order,
            self.psi.clone(),
            format!("{c}*({})", self.metadata),
        );
        s.lower_order = self.lower_order;
        s
    }

    /// `(shift + self)^e`, with the claimed order scaled by `e`.
    pub fn powf(&self, shift: f64, e: f64) -> Symbol {
        let mut s = Symbol::build(
            Kernel::Power {
                inner: self.clone(),
                shift,
                exponent: SmoothFn::Const(e),
            },
            self.dim,
            self.order * e,
            self.psi.clone(),
            format!("({shift}+{})^{e}", self.metadata),
        );
        s.lower_order = self.lower_order * e;
        s
    }

    /// `-sum_j d_{xi_j} q1 * d_{x_j} q2`, the imaginary part of the first
    /// correction in the composition expansion.
    pub(crate) fn cross_term(q1: &Symbol, q2: &Symbol) -> Result<Symbol> {
        q1.check_same_dim(q2)?;
        Ok(Symbol::build(
            Kernel::CrossTerm(q1.clone(), q2.clone()),
            q1.dim,
            q1.order + q2.order - 1.0,
            q1.psi.clone(),
            format!("-d_xi({})d_x({})", q1.metadata, q2.metadata),
        ))
    }

    fn check_same_dim(&self, other: &Symbol) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Input(format!(
                "symbols of dimension {} and {} cannot be combined",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn with_order(mut self, order: f64) -> Symbol {
        self.order = order;
        self
    }

    pub fn with_lower_order(mut self, order: f64) -> Symbol {
        self.lower_order = order;
        self
    }

    pub fn with_psi(mut self, psi: PsiSpec) -> Symbol {
        self.psi = psi;
        self
    }

    pub fn with_class(mut self, class: SymbolClass) -> Symbol {
        self.class = class;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_x_independent(&self) -> bool {
        self.kernel.is_x_independent()
    }

    fn check_point(&self, x: &[f64], xi: &[f64]) -> Result<()> {
        if x.len() != self.dim || xi.len() != self.dim {
            return Err(Error::Input(format!(
                "symbol is {}-dimensional, got x of length {} and xi of length {}",
                self.dim,
                x.len(),
                xi.len()
            )));
        }
        Ok(())
    }

    /// Jet in the variables `(x_1..x_n, xi_1..xi_n)` truncated at `order`.
    pub fn jet(&self, x: &[f64], xi: &[f64], order: usize) -> Result<Jet> {
        self.check_point(x, xi)?;
        self.kernel.jet(x, xi, order)
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Result<f64> {
        Ok(self.jet(x, xi, 0)?.value())
    }

    /// `d^beta_x d^alpha_xi p(x, xi)`.
    pub fn deriv(&self, alpha: &[usize], beta: &[usize], x: &[f64], xi: &[f64]) -> Result<f64> {
        if alpha.len() != self.dim || beta.len() != self.dim {
            return Err(Error::Input("multi-index length differs from dimension".into()));
        }
        let order = alpha.iter().chain(beta).sum();
        let multi: Vec<u8> = beta.iter().chain(alpha).map(|&e| e as u8).collect();
        Ok(self.jet(x, xi, order)?.derivative(&multi))
    }
}

/// A function on phase space that can be applied as an operator on the
/// torus: real symbols, and complex symbols from composition.
pub trait PhaseFunction: Sync {
    fn dim(&self) -> usize;
    fn eval_complex(&self, x: &[f64], xi: &[f64]) -> Result<Complex64>;
    fn is_x_independent(&self) -> bool;
    fn is_real(&self) -> bool;
    fn label(&self) -> String;
}

impl PhaseFunction for Symbol {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_complex(&self, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        Ok(Complex64::new(self.eval(x, xi)?, 0.0))
    }

    fn is_x_independent(&self) -> bool {
        Symbol::is_x_independent(self)
    }

    fn is_real(&self) -> bool {
        true
    }

    fn label(&self) -> String {
        self.metadata.clone()
    }
}

/// `re + i im`.
#[derive(Debug, Clone)]
pub struct ComplexSymbol {
    pub re: Symbol,
    pub im: Option<Symbol>,
}

impl ComplexSymbol {
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        let re = self.re.eval(x, xi)?;
        let im = match &self.im {
            Some(s) => s.eval(x, xi)?,
            None => 0.0,
        };
        Ok(Complex64::new(re, im))
    }

    pub fn deriv(
        &self,
        alpha: &[usize],
        beta: &[usize],
        x: &[f64],
        xi: &[f64],
    ) -> Result<Complex64> {
        let re = self.re.deriv(alpha, beta, x, xi)?;
        let im = match &self.im {
            Some(s) => s.deriv(alpha, beta, x, xi)?,
            None => 0.0,
        };
        Ok(Complex64::new(re, im))
    }
}

impl PhaseFunction for ComplexSymbol {
    fn dim(&self) -> usize {
        self.re.dim
    }

    fn eval_complex(&self, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        self.eval(x, xi)
    }

    fn is_x_independent(&self) -> bool {
        self.re.is_x_independent() && self.im.as_ref().is_none_or(|s| s.is_x_independent())
    }

    fn is_real(&self) -> bool {
        self.im.is_none()
    }

    fn label(&self) -> String {
        match &self.im {
            Some(im) => format!("{} + i({})", self.re.metadata, im.metadata),
            None => self.re.metadata.clone(),
        }
    }
}

/// `p(x, xi) = f(x, q(x, xi))`, with the caller's claimed order.
pub fn subordinate_symbol(family: &BernsteinFamily, q: &Symbol, claimed_order: f64) -> Result<Symbol> {
    if family.min_dim() > q.dim {
        return Err(Error::Input(format!(
            "family uses axis {} of a {}-dimensional symbol",
            family.min_dim() - 1,
            q.dim
        )));
    }
    Ok(Symbol::build(
        Kernel::Subordinate {
            family: family.clone(),
            inner: q.clone(),
        },
        q.dim,
        claimed_order,
        q.psi.clone(),
        format!("{}[{}]", family.name(), q.metadata),
    ))
}

fn order_spread(f: &SmoothFn, dim: usize, what: &str) -> Result<(f64, f64)> {
    if f.min_dim() > dim {
        return Err(Error::Input(format!("{what} uses an axis beyond dimension {dim}")));
    }
    let (lo, hi) = f.bounds();
    if !(lo > 0.0 && hi <= 1.0) {
        return Err(Error::Input(format!(
            "{what} must take values in (0, 1], range is [{lo}, {hi}]"
        )));
    }
    Ok((lo, hi))
}

/// `q(x, xi)^{m(x)}`; order `2 sup m`. A spread `sup m - inf m >= 1/2` is
/// recorded as a warning.
pub fn hoh_power_symbol(q: &Symbol, m_fn: SmoothFn) -> Result<Symbol> {
    let (mu, m) = order_spread(&m_fn, q.dim, "order function")?;
    let mut s = Symbol::build(
        Kernel::Power {
            inner: q.clone(),
            shift: 0.0,
            exponent: m_fn,
        },
        q.dim,
        q.order * m,
        q.psi.clone(),
        format!("({})^m(x)", q.metadata),
    );
    s.lower_order = q.lower_order * mu;
    if m - mu >= 0.5 {
        s.warnings.push(format!(
            "order spread {} >= 1/2; the symbol-class statement does not apply",
            m - mu
        ));
    }
    Ok(s)
}

/// `(1 + q)^{alpha(x)/2} (1 - exp(-4 (1 + q)^{alpha(x)/2}))`; order
/// `sup alpha`, ellipticity order `inf alpha`.
pub fn variable_order_example_symbol(q: &Symbol, alpha_fn: SmoothFn) -> Result<Symbol> {
    let (lo, hi) = order_spread(&alpha_fn, q.dim, "alpha")?;
    let mut s = Symbol::build(
        Kernel::VariableOrder {
            inner: q.clone(),
            alpha: alpha_fn,
        },
        q.dim,
        hi,
        q.psi.clone(),
        format!("saturated(1+{})^(alpha(x)/2)", q.metadata),
    );
    s.lower_order = lo;
    if (hi - lo) / 2.0 >= 0.5 {
        s.warnings.push(format!(
            "order spread {} >= 1/2; the symbol-class statement does not apply",
            (hi - lo) / 2.0
        ));
    }
    Ok(s)
}

/// `1 / (p + lambda)`; claimed order `-lower_order(p)`.
pub fn inverse_symbol(p: &Symbol, lambda: f64) -> Result<Symbol> {
    if !(lambda >= 0.0) {
        return Err(Error::Input(format!("lambda={lambda} must be non-negative")));
    }
    let mut s = Symbol::build(
        Kernel::Inverse {
            inner: p.clone(),
            lambda,
        },
        p.dim,
        -p.lower_order,
        p.psi.clone(),
        format!("1/({}+{lambda})", p.metadata),
    );
    s.lower_order = -p.order;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndf::BernsteinSpec;

    fn one_plus_xi2() -> Symbol {
        Symbol::shifted_psi(SmoothFn::Const(1.0), 1.0, PsiSpec::quadratic(1)).unwrap()
    }

    #[test]
    fn sqrt_subordination_closed_form() {
        let q = Symbol::shifted_psi(SmoothFn::Const(1.0), 1.0, PsiSpec::quadratic(2)).unwrap();
        let p = subordinate_symbol(&BernsteinSpec::sqrt().into(), &q, 1.0).unwrap();
        assert!((p.eval(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 26f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn saturated_family_at_origin() {
        let f = BernsteinFamily::new(BernsteinSpec::saturated(SmoothFn::Const(1.0)));
        let p = subordinate_symbol(&f, &one_plus_xi2(), 1.0).unwrap();
        let v = p.eval(&[0.3], &[0.0]).unwrap();
        assert!((v - (1.0 - (-4.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn negative_argument_is_domain_error() {
        let q = Symbol::shifted_psi(SmoothFn::Const(-1.0), 0.0, PsiSpec::quadratic(1)).unwrap();
        let p = subordinate_symbol(&BernsteinSpec::sqrt().into(), &q, 1.0).unwrap();
        match p.eval(&[0.0], &[2.0]) {
            Err(Error::Domain { xi, .. }) => assert_eq!(xi, vec![2.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hoh_power_spot_value() {
        let p = hoh_power_symbol(&one_plus_xi2(), SmoothFn::sin(0.5, 0.2)).unwrap();
        assert!(p.warnings.is_empty());
        let v = p.eval(&[std::f64::consts::FRAC_PI_2], &[1.0]).unwrap();
        assert!((v - 2f64.powf(0.7)).abs() < 1e-14);
        let w = hoh_power_symbol(&one_plus_xi2(), SmoothFn::sin(0.5, 0.3)).unwrap();
        assert_eq!(w.warnings.len(), 1);
    }

    #[test]
    fn variable_order_example_values() {
        let zero = Symbol::psi(PsiSpec::zero(1));
        let p = variable_order_example_symbol(&zero, SmoothFn::Const(1.0)).unwrap();
        assert!((p.eval(&[1.0], &[5.0]).unwrap() - (1.0 - (-4.0f64).exp())).abs() < 1e-15);
        let q = Symbol::psi(PsiSpec::quadratic(1));
        let p = variable_order_example_symbol(&q, SmoothFn::Const(1.0)).unwrap();
        let ratio = p.eval(&[0.0], &[10.0]).unwrap() / 101f64.sqrt();
        assert!((ratio - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_values() {
        let p = inverse_symbol(&one_plus_xi2(), 1.0).unwrap();
        assert_eq!(p.eval(&[0.0], &[0.0]).unwrap(), 0.5);
        let z = inverse_symbol(&Symbol::psi(PsiSpec::zero(1)), 1.0).unwrap();
        assert_eq!(z.eval(&[0.0], &[7.0]).unwrap(), 1.0);
        let base =
            variable_order_example_symbol(&Symbol::psi(PsiSpec::quadratic(1)), SmoothFn::Const(1.0))
                .unwrap();
        let inv = inverse_symbol(&base, 2.0).unwrap();
        let r = 2f64.sqrt();
        let expect = 1.0 / (2.0 + (1.0 - (-4.0 * r).exp()) * r);
        let got = inv.eval(&[0.0], &[1.0]).unwrap();
        assert!((got - expect).abs() < 1e-15, "{got} vs {expect}");
        assert!(matches!(
            inverse_symbol(&Symbol::psi(PsiSpec::zero(1)), 0.0).unwrap().eval(&[0.0], &[0.0]),
            Err(Error::NearSingular { .. })
        ));
    }

    #[test]
    fn closure_symbol_matches_exact_derivatives() {
        let exact = Symbol::shifted_psi(SmoothFn::sin(2.0, 1.0), 1.0, PsiSpec::quadratic(1)).unwrap();
        let fd = Symbol::from_fn(1, 2.0, PsiSpec::quadratic(1), "fd", |x, xi| {
            (2.0 + x[0].sin()) * (1.0 + xi[0] * xi[0])
        });
        for (a, b) in [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (0, 2)] {
            let e = exact.deriv(&[a], &[b], &[0.7], &[1.3]).unwrap();
            let d = fd.deriv(&[a], &[b], &[0.7], &[1.3]).unwrap();
            assert!((e - d).abs() <= 1e-6 * (1.0 + e.abs()), "({a},{b}): {e} vs {d}");
        }
    }

    #[test]
    fn cross_term_of_variable_coefficient() {
        // q1 = xi^2, q2 = (2 + cos x) xi^2: -d_xi q1 d_x q2 = 2 xi sin(x) xi^2
        let q1 = Symbol::psi(PsiSpec::quadratic(1));
        let q2 = Symbol::shifted_psi(SmoothFn::cos(2.0, 1.0), 0.0, PsiSpec::quadratic(1)).unwrap();
        let c = Symbol::cross_term(&q1, &q2).unwrap();
        let (x, xi) = (0.4f64, 1.5f64);
        assert!((c.eval(&[x], &[xi]).unwrap() - 2.0 * x.sin() * xi.powi(3)).abs() < 1e-13);
    }
}
