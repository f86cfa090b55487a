use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};
use crate::ndf::bernstein::BernsteinSpec;

/// Symmetric jump atom `(y, w)` of a discretised Levy measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyAtom {
    pub y: Vec<f64>,
    pub w: f64,
}

/// Quadrature of the one-dimensional symmetric `r`-stable Levy measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableAtoms {
    pub r: f64,
    pub count: usize,
    pub cutoff: f64,
}

/// Smallest jump size used when generating quadrature atoms.
pub const ATOM_FLOOR: f64 = 1e-4;

/// x-independent Levy triplet `(c, d, a)` with a finite atomic jump measure.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LevyData {
    #[serde(default)]
    pub drift: Vec<f64>,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub atoms: Vec<LevyAtom>,
    /// Generated atoms, expanded into `atoms` by [`PsiSpec::prepare`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable: Option<StableAtoms>,
}

impl LevyData {
    /// Symmetric atoms for `|xi|^r = C_r * int (1 - cos(y xi)) |y|^{-1-r} dy`
    /// (one dimension, `0 < r < 2`), log-spaced in `|y| in [1e-4, cutoff]`
    /// with a midpoint rule in `log |y|`. `count` is the total atom count.
    pub fn symmetric_stable(r: f64, count: usize, cutoff: f64) -> Result<Vec<LevyAtom>> {
        if !(r > 0.0 && r < 2.0) {
            return Err(Error::Input(format!("stable index r={r} outside (0, 2)")));
        }
        if count < 2 || cutoff <= ATOM_FLOOR {
            return Err(Error::Input("stable quadrature needs count >= 2 and cutoff > 1e-4".into()));
        }
        let norm = r * 2f64.powf(r - 1.0) * gamma((1.0 + r) / 2.0)
            / (std::f64::consts::PI.sqrt() * gamma(1.0 - r / 2.0));
        let per_side = count / 2;
        let (lo, hi) = (ATOM_FLOOR.ln(), cutoff.ln());
        let step = (hi - lo) / per_side as f64;
        let mut atoms = Vec::with_capacity(2 * per_side);
        for i in 0..per_side {
            let y = (lo + (i as f64 + 0.5) * step).exp();
            let w = norm * y.powf(-r) * step;
            atoms.push(LevyAtom { y: vec![y], w });
            atoms.push(LevyAtom { y: vec![-y], w });
        }
        Ok(atoms)
    }
}

/// Built-in continuous negative definite functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PsiKind {
    /// `psi = 0`.
    Zero,
    /// `|xi|^r`, `0 < r <= 2`.
    Power { r: f64 },
    /// `|xi|^2`.
    Quadratic,
    /// `log(1 + |xi|^2)`.
    Log,
    /// `sqrt(eps^2 + |xi|^2) - eps`.
    Mollified { eps: f64 },
    /// `c + xi.a.xi + sum_i w_i (1 - cos(y_i . xi))`.
    Levy(LevyData),
    /// `scale * f(base(xi))` for an x-independent Bernstein function `f`.
    Subordinate {
        base: Box<PsiSpec>,
        family: BernsteinSpec,
        #[serde(default = "unit")]
        scale: f64,
    },
}

fn unit() -> f64 {
    1.0
}

/// A continuous negative definite function on `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: PsiKind,
}

/// Slack below zero tolerated before an evaluation is declared corrupt.
const NEGATIVE_TOL: f64 = 1e-12;

impl PsiSpec {
    pub fn new(dim: usize, kind: PsiKind) -> Result<Self> {
        PsiSpec { dim, kind }.prepare()
    }

    pub fn zero(dim: usize) -> Self {
        PsiSpec { dim, kind: PsiKind::Zero }
    }

    pub fn quadratic(dim: usize) -> Self {
        PsiSpec {
            dim,
            kind: PsiKind::Quadratic,
        }
    }

    pub fn power(dim: usize, r: f64) -> Result<Self> {
        PsiSpec::new(dim, PsiKind::Power { r })
    }

    pub fn log(dim: usize) -> Self {
        PsiSpec { dim, kind: PsiKind::Log }
    }

    pub fn mollified(dim: usize, eps: f64) -> Result<Self> {
        PsiSpec::new(dim, PsiKind::Mollified { eps })
    }

    pub fn levy(dim: usize, data: LevyData) -> Result<Self> {
        PsiSpec::new(dim, PsiKind::Levy(data))
    }

    /// `scale * f(base)`.
    pub fn subordinate(base: PsiSpec, family: BernsteinSpec, scale: f64) -> Result<Self> {
        let dim = base.dim;
        PsiSpec::new(
            dim,
            PsiKind::Subordinate {
                base: Box::new(base),
                family,
                scale,
            },
        )
    }

    /// Validate parameters and expand generated Levy atoms.
    pub fn prepare(mut self) -> Result<Self> {
        if self.dim == 0 || self.dim > 3 {
            return Err(Error::Input(format!("psi dimension {} outside 1..=3", self.dim)));
        }
        let dim = self.dim;
        match &mut self.kind {
            PsiKind::Zero | PsiKind::Quadratic | PsiKind::Log => {}
            PsiKind::Power { r } => {
                if !(*r > 0.0 && *r <= 2.0) {
                    return Err(Error::Input(format!("power exponent r={r} outside (0, 2]")));
                }
            }
            PsiKind::Mollified { eps } => {
                if *eps <= 0.0 {
                    return Err(Error::Input("mollifier eps must be positive".into()));
                }
            }
            PsiKind::Levy(data) => {
                if let Some(gen) = data.stable.take() {
                    if dim != 1 {
                        return Err(Error::Input("stable quadrature is one-dimensional".into()));
                    }
                    data.atoms
                        .extend(LevyData::symmetric_stable(gen.r, gen.count, gen.cutoff)?);
                }
                validate_levy(dim, data)?;
            }
            PsiKind::Subordinate { base, family, scale } => {
                if base.dim != dim {
                    return Err(Error::Input("subordinated psi dimension mismatch".into()));
                }
                if !family.is_x_independent() {
                    return Err(Error::Input(
                        "psi subordination needs an x-independent Bernstein function".into(),
                    ));
                }
                if *scale <= 0.0 {
                    return Err(Error::Input("subordination scale must be positive".into()));
                }
                let prepared = std::mem::replace(base.as_mut(), PsiSpec::zero(dim)).prepare()?;
                **base = prepared;
            }
        }
        Ok(self)
    }

    pub fn name(&self) -> String {
        match &self.kind {
            PsiKind::Zero => "zero".into(),
            PsiKind::Power { r } => format!("|xi|^{r}"),
            PsiKind::Quadratic => "|xi|^2".into(),
            PsiKind::Log => "log(1+|xi|^2)".into(),
            PsiKind::Mollified { eps } => format!("sqrt({eps}^2+|xi|^2)-{eps}"),
            PsiKind::Levy(d) => format!("levy(c={}, atoms={})", d.c, d.atoms.len()),
            PsiKind::Subordinate { base, family, scale } => {
                format!("{scale}*{}({})", family.name(), base.name())
            }
        }
    }

    /// Jet of `psi` given jets of the frequency coordinates.
    pub fn jet(&self, xi: &[Jet]) -> Jet {
        let like = &xi[0];
        match &self.kind {
            PsiKind::Zero => Jet::constant(like.space(), 0.0),
            PsiKind::Quadratic => norm_sq(xi),
            PsiKind::Power { r } => {
                if *r == 2.0 {
                    norm_sq(xi)
                } else {
                    norm_sq(xi).powf(r / 2.0)
                }
            }
            PsiKind::Log => norm_sq(xi).add_scalar(1.0).ln(),
            PsiKind::Mollified { eps } => norm_sq(xi).add_scalar(eps * eps).sqrt().add_scalar(-eps),
            PsiKind::Levy(data) => {
                let mut acc = Jet::constant(like.space(), data.c);
                for (k, row) in data.a.iter().enumerate() {
                    for (l, &akl) in row.iter().enumerate() {
                        if akl != 0.0 {
                            acc = &acc + &(&xi[k] * &xi[l]).scale(akl);
                        }
                    }
                }
                for atom in &data.atoms {
                    let mut phase = Jet::constant(like.space(), 0.0);
                    for (yj, xj) in atom.y.iter().zip(xi) {
                        phase = &phase + &xj.scale(*yj);
                    }
                    let one_minus_cos = (-phase.cos()).add_scalar(1.0);
                    acc = &acc + &one_minus_cos.scale(atom.w);
                }
                acc
            }
            PsiKind::Subordinate { base, family, scale } => {
                let inner = base.jet(xi);
                family.jet(&[], &inner).scale(*scale)
            }
        }
    }

    /// Scalar evaluation without input checks.
    pub fn value(&self, xi: &[f64]) -> f64 {
        match &self.kind {
            PsiKind::Zero => 0.0,
            PsiKind::Quadratic => xi.iter().map(|v| v * v).sum(),
            PsiKind::Power { r } => {
                let n2: f64 = xi.iter().map(|v| v * v).sum();
                n2.powf(r / 2.0)
            }
            PsiKind::Log => xi.iter().map(|v| v * v).sum::<f64>().ln_1p(),
            PsiKind::Mollified { eps } => {
                let n2: f64 = xi.iter().map(|v| v * v).sum();
                (eps * eps + n2).sqrt() - eps
            }
            PsiKind::Levy(data) => {
                let mut acc = data.c;
                for (k, row) in data.a.iter().enumerate() {
                    for (l, &akl) in row.iter().enumerate() {
                        acc += akl * xi[k] * xi[l];
                    }
                }
                for atom in &data.atoms {
                    let phase: f64 = atom.y.iter().zip(xi).map(|(y, x)| y * x).sum();
                    acc += atom.w * (1.0 - phase.cos());
                }
                acc
            }
            PsiKind::Subordinate { base, family, scale } => {
                let space = JetSpace::get(1, 0);
                let s = Jet::constant(&space, base.value(xi));
                scale * family.jet(&[], &s).value()
            }
        }
    }
}

fn norm_sq(xi: &[Jet]) -> Jet {
    let mut acc = &xi[0] * &xi[0];
    for v in &xi[1..] {
        acc = &acc + &(v * v);
    }
    acc
}

fn validate_levy(dim: usize, data: &LevyData) -> Result<()> {
    if data.drift.iter().any(|&d| d != 0.0) {
        return Err(Error::Input(
            "non-zero drift gives a complex-valued psi, which is not supported".into(),
        ));
    }
    if data.c < 0.0 {
        return Err(Error::Input("killing constant c must be non-negative".into()));
    }
    if !data.a.is_empty() {
        if data.a.len() != dim || data.a.iter().any(|r| r.len() != dim) {
            return Err(Error::Input(format!("diffusion matrix must be {dim}x{dim}")));
        }
        for k in 0..dim {
            for l in 0..dim {
                if (data.a[k][l] - data.a[l][k]).abs() > 1e-12 {
                    return Err(Error::Input("diffusion matrix must be symmetric".into()));
                }
            }
        }
        if !principal_minors_nonnegative(&data.a) {
            return Err(Error::Input("diffusion matrix must be positive semidefinite".into()));
        }
    }
    for atom in &data.atoms {
        if atom.y.len() != dim {
            return Err(Error::Input("levy atom dimension mismatch".into()));
        }
        if !(atom.w >= 0.0 && atom.w.is_finite()) {
            return Err(Error::Input("levy atom weights must be finite and non-negative".into()));
        }
    }
    Ok(())
}

fn principal_minors_nonnegative(a: &[Vec<f64>]) -> bool {
    let n = a.len();
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let det = match idx.len() {
            1 => a[idx[0]][idx[0]],
            2 => a[idx[0]][idx[0]] * a[idx[1]][idx[1]] - a[idx[0]][idx[1]] * a[idx[1]][idx[0]],
            _ => {
                let m = |i: usize, j: usize| a[idx[i]][idx[j]];
                m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                    - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                    + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
            }
        };
        if det < -1e-12 {
            return false;
        }
    }
    true
}

/// Evaluate `psi(xi)`, checking the dimension and sign.
pub fn eval_psi(psi: &PsiSpec, xi: &[f64]) -> Result<f64> {
    if xi.len() != psi.dim {
        return Err(Error::Input(format!(
            "xi has length {}, psi is {}-dimensional",
            xi.len(),
            psi.dim
        )));
    }
    let v = psi.value(xi);
    if v.is_nan() || v < -NEGATIVE_TOL * (1.0 + v.abs()) {
        return Err(Error::NumericalIntegrity(format!(
            "psi({xi:?}) = {v:e} is negative"
        )));
    }
    Ok(v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_values() {
        let psi = PsiSpec::quadratic(2);
        assert_eq!(eval_psi(&psi, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(eval_psi(&psi, &[1.0, 2.0]).unwrap(), 5.0);
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let psi = PsiSpec::quadratic(2);
        assert!(matches!(eval_psi(&psi, &[1.0]), Err(Error::Input(_))));
    }

    #[test]
    fn power_one_against_stable_quadrature() {
        let psi = PsiSpec::power(1, 1.0).unwrap();
        assert_eq!(eval_psi(&psi, &[3.0]).unwrap(), 3.0);
        let levy = PsiSpec::levy(
            1,
            LevyData {
                stable: Some(StableAtoms {
                    r: 1.0,
                    count: 10_000,
                    cutoff: 100.0,
                }),
                ..Default::default()
            },
        )
        .unwrap();
        let q = eval_psi(&levy, &[3.0]).unwrap();
        assert!((q - 3.0).abs() / 3.0 < 0.02, "quadrature gave {q}");
    }

    #[test]
    fn levy_psi_at_origin_is_killing_rate() {
        let psi = PsiSpec::levy(
            1,
            LevyData {
                c: 0.5,
                atoms: vec![LevyAtom { y: vec![1.0], w: 2.0 }],
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(eval_psi(&psi, &[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn drift_is_rejected() {
        let err = PsiSpec::levy(
            1,
            LevyData {
                drift: vec![1.0],
                ..Default::default()
            },
        );
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn indefinite_diffusion_is_rejected() {
        let err = PsiSpec::levy(
            2,
            LevyData {
                a: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
                ..Default::default()
            },
        );
        assert!(err.is_err());
    }

    #[test]
    fn jet_value_matches_scalar() {
        let space = JetSpace::get(1, 2);
        for psi in [
            PsiSpec::log(1),
            PsiSpec::mollified(1, 0.5).unwrap(),
            PsiSpec::power(1, 0.7).unwrap(),
        ] {
            let xi = Jet::variable(&space, 0, 1.3);
            assert!((psi.jet(&[xi]).value() - psi.value(&[1.3])).abs() < 1e-14);
        }
    }

    #[test]
    fn parses_from_toml() {
        let psi: PsiSpec = toml::from_str("dim = 1\nkind = \"power\"\nr = 1.5\n").unwrap();
        assert_eq!(psi, PsiSpec::power(1, 1.5).unwrap());
    }
}
