use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};
use crate::smooth::SmoothFn;

/// Highest s-derivative order the built-in checks request by default.
pub const K_MAX: usize = 6;

/// Serializable description of a (possibly state-dependent) Bernstein
/// family `f(x, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BernsteinSpec {
    /// `f(s) = s`.
    Identity,
    /// `f(x, s) = s^{a(x)}`; Bernstein when `0 <= a <= 1`.
    Power { exponent: SmoothFn },
    /// `f(s) = log(1 + s)`.
    Log1p,
    /// `f(s) = 1 - exp(-rate s)`.
    Exponential { rate: f64 },
    /// `f(x, s) = s^{alpha(x)/2} (1 - exp(-4 s^{alpha(x)/2}))`.
    Saturated { alpha: SmoothFn },
    /// `factor * inner`.
    Scaled {
        factor: f64,
        inner: Box<BernsteinSpec>,
    },
    /// `outer(inner(s))`.
    Compose {
        outer: Box<BernsteinSpec>,
        inner: Box<BernsteinSpec>,
    },
}

fn pow_smooth(s: &Jet, exponent: &SmoothFn, x: &[Jet]) -> Jet {
    match exponent {
        SmoothFn::Const(e) => s.powf(*e),
        _ if exponent.is_constant() => s.powf(exponent.eval(&[])),
        _ => {
            let e = exponent.jet(x, s);
            if s.value() == 0.0 && s.order() == 0 {
                // 0^{a(x)} with a > 0
                return Jet::constant(s.space(), 0.0);
            }
            (&e * &s.ln()).exp()
        }
    }
}

impl BernsteinSpec {
    pub fn sqrt() -> Self {
        BernsteinSpec::Power {
            exponent: SmoothFn::Const(0.5),
        }
    }

    pub fn power(e: f64) -> Self {
        BernsteinSpec::Power {
            exponent: SmoothFn::Const(e),
        }
    }

    pub fn saturated(alpha: SmoothFn) -> Self {
        BernsteinSpec::Saturated { alpha }
    }

    pub fn name(&self) -> String {
        match self {
            BernsteinSpec::Identity => "id".into(),
            BernsteinSpec::Power { exponent } => format!("s^{}", smooth_name(exponent)),
            BernsteinSpec::Log1p => "log1p".into(),
            BernsteinSpec::Exponential { rate } => format!("1-exp(-{rate}s)"),
            BernsteinSpec::Saturated { alpha } => {
                format!("s^(a/2)(1-exp(-4s^(a/2)))[a={}]", smooth_name(alpha))
            }
            BernsteinSpec::Scaled { factor, inner } => format!("{factor}*{}", inner.name()),
            BernsteinSpec::Compose { outer, inner } => {
                format!("{}o{}", outer.name(), inner.name())
            }
        }
    }

    pub fn is_x_independent(&self) -> bool {
        match self {
            BernsteinSpec::Identity | BernsteinSpec::Log1p | BernsteinSpec::Exponential { .. } => {
                true
            }
            BernsteinSpec::Power { exponent } => exponent.is_constant(),
            BernsteinSpec::Saturated { alpha } => alpha.is_constant(),
            BernsteinSpec::Scaled { inner, .. } => inner.is_x_independent(),
            BernsteinSpec::Compose { outer, inner } => {
                outer.is_x_independent() && inner.is_x_independent()
            }
        }
    }

    /// Spatial dimension the coefficient maps need.
    pub fn min_dim(&self) -> usize {
        match self {
            BernsteinSpec::Power { exponent } => exponent.min_dim(),
            BernsteinSpec::Saturated { alpha } => alpha.min_dim(),
            BernsteinSpec::Scaled { inner, .. } => inner.min_dim(),
            BernsteinSpec::Compose { outer, inner } => outer.min_dim().max(inner.min_dim()),
            _ => 0,
        }
    }

    /// Jet of `f(x, s)`; `x` may be empty for x-independent families.
    pub fn jet(&self, x: &[Jet], s: &Jet) -> Jet {
        match self {
            BernsteinSpec::Identity => s.clone(),
            BernsteinSpec::Power { exponent } => pow_smooth(s, exponent, x),
            BernsteinSpec::Log1p => s.add_scalar(1.0).ln(),
            BernsteinSpec::Exponential { rate } => (-s.scale(-*rate).exp()).add_scalar(1.0),
            BernsteinSpec::Saturated { alpha } => {
                let half = match alpha {
                    SmoothFn::Const(a) => SmoothFn::Const(a / 2.0),
                    SmoothFn::Trig(t) => {
                        let mut t = t.clone();
                        t.offset /= 2.0;
                        t.amplitude /= 2.0;
                        SmoothFn::Trig(t)
                    }
                };
                let t = pow_smooth(s, &half, x);
                let saturation = (-t.scale(-4.0).exp()).add_scalar(1.0);
                &t * &saturation
            }
            BernsteinSpec::Scaled { factor, inner } => inner.jet(x, s).scale(*factor),
            BernsteinSpec::Compose { outer, inner } => outer.jet(x, &inner.jet(x, s)),
        }
    }

    /// Known pointwise lower/upper envelopes, valid for `s >= 1`.
    fn envelopes(&self) -> Option<(BernsteinSpec, BernsteinSpec)> {
        match self {
            _ if self.is_x_independent() => Some((self.clone(), self.clone())),
            BernsteinSpec::Power { exponent } => {
                let (lo, hi) = exponent.bounds();
                Some((BernsteinSpec::power(lo), BernsteinSpec::power(hi)))
            }
            BernsteinSpec::Saturated { alpha } => {
                let (lo, hi) = alpha.bounds();
                Some((
                    BernsteinSpec::saturated(SmoothFn::Const(lo)),
                    BernsteinSpec::saturated(SmoothFn::Const(hi)),
                ))
            }
            _ => None,
        }
    }

    /// Power lower bound `f(x, s) >= c s^rho` on `s >= 1`, when known.
    fn growth(&self) -> Option<Growth> {
        match self {
            BernsteinSpec::Identity => Some(Growth { c: 1.0, rho: 1.0 }),
            BernsteinSpec::Power { exponent } => {
                let (lo, _) = exponent.bounds();
                (lo > 0.0).then_some(Growth { c: 1.0, rho: lo })
            }
            BernsteinSpec::Saturated { alpha } => {
                let (lo, _) = alpha.bounds();
                (lo > 0.0).then_some(Growth {
                    c: 1.0 - (-4.0f64).exp(),
                    rho: lo / 2.0,
                })
            }
            BernsteinSpec::Scaled { factor, inner } => inner.growth().map(|g| Growth {
                c: g.c * factor,
                rho: g.rho,
            }),
            _ => None,
        }
    }
}

fn smooth_name(f: &SmoothFn) -> String {
    match f {
        SmoothFn::Const(c) => format!("{c}"),
        SmoothFn::Trig(t) => format!("({}+{}{:?}(x{}))", t.offset, t.amplitude, t.kind, t.axis),
    }
}

/// `f(y0, s) >= c * s^rho` for large `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub c: f64,
    pub rho: f64,
}

type DerivFn = dyn Fn(f64, usize) -> Option<f64> + Send + Sync;

#[derive(Clone)]
enum Repr {
    Spec(BernsteinSpec),
    /// x-independent closure returning the k-th s-derivative, or `None`
    /// when that order is unavailable.
    Closure { name: String, derivs: Arc<DerivFn> },
}

/// A state-dependent Bernstein family with envelope and growth metadata.
#[derive(Clone)]
pub struct BernsteinFamily {
    repr: Repr,
    pub envelope_f0: Option<BernsteinSpec>,
    pub envelope_f1: Option<BernsteinSpec>,
    pub growth: Option<Growth>,
    pub k_max: usize,
}

impl fmt::Debug for BernsteinFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BernsteinFamily")
            .field("name", &self.name())
            .field("envelope_f0", &self.envelope_f0)
            .field("envelope_f1", &self.envelope_f1)
            .field("growth", &self.growth)
            .finish()
    }
}

impl From<BernsteinSpec> for BernsteinFamily {
    fn from(spec: BernsteinSpec) -> Self {
        BernsteinFamily::new(spec)
    }
}

impl BernsteinFamily {
    pub fn new(spec: BernsteinSpec) -> Self {
        let (f0, f1) = match spec.envelopes() {
            Some((a, b)) => (Some(a), Some(b)),
            None => (None, None),
        };
        let growth = spec.growth();
        BernsteinFamily {
            repr: Repr::Spec(spec),
            envelope_f0: f0,
            envelope_f1: f1,
            growth,
            k_max: K_MAX,
        }
    }

    /// x-independent family given by its s-derivatives `derivs(s, k)`
    /// (`k = 0` is the value), available for `k <= k_max`.
    pub fn from_derivatives<F>(name: impl Into<String>, k_max: usize, derivs: F) -> Self
    where
        F: Fn(f64, usize) -> f64 + Send + Sync + 'static,
    {
        BernsteinFamily {
            repr: Repr::Closure {
                name: name.into(),
                derivs: Arc::new(move |s, k| (k <= k_max).then(|| derivs(s, k))),
            },
            envelope_f0: None,
            envelope_f1: None,
            growth: None,
            k_max,
        }
    }

    pub fn spec(&self) -> Option<&BernsteinSpec> {
        match &self.repr {
            Repr::Spec(s) => Some(s),
            Repr::Closure { .. } => None,
        }
    }

    pub fn name(&self) -> String {
        match &self.repr {
            Repr::Spec(s) => s.name(),
            Repr::Closure { name, .. } => name.clone(),
        }
    }

    pub fn is_x_independent(&self) -> bool {
        match &self.repr {
            Repr::Spec(s) => s.is_x_independent(),
            Repr::Closure { .. } => true,
        }
    }

    pub fn min_dim(&self) -> usize {
        match &self.repr {
            Repr::Spec(s) => s.min_dim(),
            Repr::Closure { .. } => 0,
        }
    }

    /// Jet of `f(x, s)` by the chain rule; closure families compose their
    /// s-derivatives with the jet of `s`.
    pub fn jet(&self, x: &[Jet], s: &Jet) -> Result<Jet> {
        if s.value() < 0.0 {
            return Err(Error::Input(format!("Bernstein argument s={} < 0", s.value())));
        }
        match &self.repr {
            Repr::Spec(spec) => Ok(spec.jet(x, s)),
            Repr::Closure { name, derivs } => {
                let order = s.order();
                let d: Option<Vec<f64>> = (0..=order).map(|k| derivs(s.value(), k)).collect();
                let d = d.ok_or_else(|| {
                    Error::Capability(format!("{name}: s-derivatives up to order {order} unavailable"))
                })?;
                Ok(s.compose(&d))
            }
        }
    }

    /// `d^k f / ds^k (x, s)`.
    pub fn ds(&self, x: &[f64], s: f64, k: usize) -> Result<f64> {
        if let Repr::Closure { name, derivs } = &self.repr {
            if s < 0.0 {
                return Err(Error::Input(format!("Bernstein argument s={s} < 0")));
            }
            return derivs(s, k).ok_or_else(|| {
                Error::Capability(format!("{name}: s-derivative of order {k} unavailable"))
            });
        }
        let space = JetSpace::get(1, k);
        let sj = Jet::variable(&space, 0, s);
        let xj: Vec<Jet> = x.iter().map(|&v| Jet::constant(&space, v)).collect();
        Ok(self.jet(&xj, &sj)?.derivative(&[k as u8]))
    }
}

/// `f(x, s)` for `s >= 0`.
pub fn eval_bernstein_family(family: &BernsteinFamily, x: &[f64], s: f64) -> Result<f64> {
    if s < 0.0 || s.is_nan() {
        return Err(Error::Input(format!("Bernstein argument s={s} < 0")));
    }
    if x.len() < family.min_dim() {
        return Err(Error::Input(format!(
            "family needs x of length >= {}, got {}",
            family.min_dim(),
            x.len()
        )));
    }
    family.ds(x, s, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_values() {
        let f = BernsteinFamily::new(BernsteinSpec::saturated(SmoothFn::Const(1.0)));
        assert_eq!(eval_bernstein_family(&f, &[0.0], 0.0).unwrap(), 0.0);
        let v1 = eval_bernstein_family(&f, &[0.0], 1.0).unwrap();
        assert!((v1 - (1.0 - (-4.0f64).exp())).abs() < 1e-15);
        let v4 = eval_bernstein_family(&f, &[0.0], 4.0).unwrap();
        assert!((v4 - 2.0 * (1.0 - (-8.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn negative_argument_is_rejected() {
        let f = BernsteinFamily::new(BernsteinSpec::Identity);
        assert!(matches!(
            eval_bernstein_family(&f, &[], -1.0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn x_dependent_power_uses_local_exponent() {
        let f = BernsteinFamily::new(BernsteinSpec::Power {
            exponent: SmoothFn::sin(0.5, 0.25),
        });
        let x = std::f64::consts::FRAC_PI_2;
        let v = eval_bernstein_family(&f, &[x], 16.0).unwrap();
        assert!((v - 16f64.powf(0.75)).abs() < 1e-12);
        assert_eq!(eval_bernstein_family(&f, &[x], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn closure_family_reports_capability() {
        let f = BernsteinFamily::from_derivatives("s", 1, |s, k| match k {
            0 => s,
            1 => 1.0,
            _ => 0.0,
        });
        assert_eq!(f.ds(&[], 2.0, 1).unwrap(), 1.0);
        assert!(matches!(f.ds(&[], 2.0, 2), Err(Error::Capability(_))));
    }

    #[test]
    fn envelopes_of_variable_order_family() {
        let f = BernsteinFamily::new(BernsteinSpec::saturated(SmoothFn::sin(0.6, 0.3)));
        assert_eq!(
            f.envelope_f0,
            Some(BernsteinSpec::saturated(SmoothFn::Const(0.6 - 0.3)))
        );
        let g = f.growth.unwrap();
        assert!((g.rho - 0.15).abs() < 1e-15);
    }
}
