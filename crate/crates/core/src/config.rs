//! TOML experiment configuration.
//!
//! ```toml
//! task = "check-symbol"        # optional; must match the subcommand if set
//! seed = 7
//!
//! [grid]
//! dim = 1
//! points = 128                 # N per dimension
//! period = 6.283185307179586   # L, defaults to 2 pi
//!
//! [psi]
//! dim = 1
//! kind = "quadratic"
//!
//! [family]
//! kind = "saturated"
//! alpha = { kind = "sin", offset = 0.6, amplitude = 0.3 }
//!
//! [symbol]
//! construction = "variable-order-example"
//! shift = 1.0
//! exponent = { kind = "sin", offset = 0.6, amplitude = 0.3 }
//!
//! [params]
//! claimed_order = 0.9
//!
//! [output]
//! dir = "out"
//! ```
//!
//! `psi` and `family` use the serialized forms of [`PsiSpec`] and
//! [`BernsteinSpec`]. The base symbol of every construction is
//! `q(x, xi) = coeff(x) (shift + psi(xi))`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndf::{BernsteinFamily, BernsteinSpec, PsiSpec};
use crate::smooth::SmoothFn;
use crate::symcalc::{
    hoh_power_symbol, inverse_symbol, subordinate_symbol, variable_order_example_symbol, ClassCheck,
    Symbol, SymbolClass, DEFAULT_EPSILON,
};
use crate::torus::{Scheme, TorusGrid, TorusGridFn, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    CheckLambda,
    CheckBernstein,
    CheckSymbol,
    Compose,
    ReferenceFunctions,
    Garding,
    Solve,
    Evolve,
    Feller,
}

impl Task {
    pub const ALL: [Task; 9] = [
        Task::CheckLambda,
        Task::CheckBernstein,
        Task::CheckSymbol,
        Task::Compose,
        Task::ReferenceFunctions,
        Task::Garding,
        Task::Solve,
        Task::Evolve,
        Task::Feller,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::CheckLambda => "check-lambda",
            Task::CheckBernstein => "check-bernstein",
            Task::CheckSymbol => "check-symbol",
            Task::Compose => "compose",
            Task::ReferenceFunctions => "reference-functions",
            Task::Garding => "garding",
            Task::Solve => "solve",
            Task::Evolve => "evolve",
            Task::Feller => "feller",
        }
    }

    /// Stream id used to split the configured seed.
    pub(crate) fn stream(self) -> u64 {
        Task::ALL.iter().position(|&t| t == self).unwrap() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one_dim")]
    pub dim: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "two_pi")]
    pub period: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dim: 1,
            points: default_points(),
            period: two_pi(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    /// The base symbol `q` itself.
    Psi,
    Subordinate,
    HohPower,
    VariableOrderExample,
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub construction: Construction,
    #[serde(default = "unit_fn")]
    pub coeff: SmoothFn,
    #[serde(default)]
    pub shift: f64,
    /// Claimed order of a subordinate symbol; defaults to 2.
    pub order: Option<f64>,
    /// `m(x)` for hoh-power, `alpha(x)` for variable-order-example.
    pub exponent: Option<SmoothFn>,
    /// Shift of an inverse.
    pub lambda: Option<f64>,
    /// Symbol being inverted.
    pub inner: Option<Box<SymbolConfig>>,
}

/// Reference function of Sobolev norms and the Garding probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormReference {
    /// `[psi]` itself.
    Psi,
    /// `c0 f0(psi)` from the lower envelope.
    Psi0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassName {
    Rho,
    Zero,
}

/// Test functions on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldConfig {
    /// `exp(i k . x)`.
    Mode { k: Vec<i64> },
    /// `cos(k . x)`.
    Cosine { k: Vec<i64> },
    /// `exp(-concentration (1 - cos(x - pi)))` per axis, peaked mid-period.
    Bump { concentration: f64 },
    /// Seeded random band-limited function.
    Random {
        bandwidth: usize,
        #[serde(default = "yes")]
        real: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub f0: BernsteinSpec,
    pub f1: BernsteinSpec,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default = "one")]
    pub c1: f64,
}

/// Task parameters; each task reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub claimed_order: Option<f64>,
    #[serde(default = "default_class")]
    pub class: ClassName,
    #[serde(default = "two")]
    pub max_alpha: usize,
    #[serde(default = "two")]
    pub max_beta: usize,
    #[serde(default = "default_max_k")]
    pub max_k: usize,
    #[serde(default = "default_bernstein_tol")]
    pub bernstein_tol: f64,
    #[serde(default = "default_s_range")]
    pub s_range: [f64; 2],
    #[serde(default = "default_s_count")]
    pub s_count: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Zero means `10 N n`.
    #[serde(default)]
    pub max_iter: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Final time of the subordination comparison.
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "default_consistency_tol")]
    pub consistency_tol: f64,
    /// Sobolev indices tracked by solve and evolve.
    #[serde(default)]
    pub s_list: Vec<f64>,
    #[serde(default = "default_stability_tol")]
    pub stability_tol: f64,
    #[serde(default = "default_norm_reference")]
    pub norm_reference: NormReference,
    pub rhs: Option<FieldConfig>,
    pub initial: Option<FieldConfig>,
}

impl Default for Params {
    fn default() -> Self {
        toml::from_str("").expect("every parameter has a default")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Write `TGF1` grid dumps of solutions.
    #[serde(default = "yes")]
    pub dumps: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out(),
            dumps: true,
        }
    }
}

/// One experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Option<Task>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    pub psi: Option<PsiSpec>,
    pub family: Option<BernsteinSpec>,
    pub symbol: Option<SymbolConfig>,
    /// Right factor of a composition.
    pub right: Option<SymbolConfig>,
    pub reference: Option<ReferenceConfig>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one_dim() -> usize {
    1
}
fn default_points() -> usize {
    64
}
fn two_pi() -> f64 {
    std::f64::consts::TAU
}
fn unit_fn() -> SmoothFn {
    SmoothFn::Const(1.0)
}
fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}
fn default_dt() -> f64 {
    1e-2
}
fn default_steps() -> usize {
    100
}
fn default_scheme() -> Scheme {
    Scheme::CrankNicolson
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_class() -> ClassName {
    ClassName::Rho
}
fn default_max_k() -> usize {
    4
}
fn default_bernstein_tol() -> f64 {
    1e-8
}
fn default_s_range() -> [f64; 2] {
    [1e-3, 1e3]
}
fn default_s_count() -> usize {
    241
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_trials() -> usize {
    200
}
fn default_samples() -> usize {
    16
}
fn default_consistency_tol() -> f64 {
    1e-4
}
fn default_stability_tol() -> f64 {
    0.05
}
fn default_norm_reference() -> NormReference {
    NormReference::Psi
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    /// Parse and validate; parse errors carry the line number.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().trim().to_string();
            match e.span() {
                Some(span) => Error::Config(format!("line {}: {msg}", line_of(text, span.start))),
                None => Error::Config(msg),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Check ranges and that every name the tasks will need resolves.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(1..=3).contains(&g.dim) {
            return Err(Error::Config(format!("grid.dim={} outside 1..=3", g.dim)));
        }
        if g.points < 4 || g.points % 2 != 0 {
            return Err(Error::Config(format!("grid.points={} must be even and >= 4", g.points)));
        }
        if !(g.period > 0.0 && g.period.is_finite()) {
            return Err(Error::Config(format!("grid.period={} must be positive", g.period)));
        }
        let p = &self.params;
        if !(p.lambda >= 0.0) {
            return Err(Error::Config(format!("params.lambda={} must be >= 0", p.lambda)));
        }
        if !(p.dt > 0.0) {
            return Err(Error::Config(format!("params.dt={} must be positive", p.dt)));
        }
        if !(p.epsilon >= 0.0) {
            return Err(Error::Config(format!("params.epsilon={} must be >= 0", p.epsilon)));
        }
        if !(p.tol > 0.0 && p.tol < 1.0) {
            return Err(Error::Config(format!("params.tol={} outside (0, 1)", p.tol)));
        }
        if !(p.s_range[0] > 0.0 && p.s_range[0] < p.s_range[1]) || p.s_count < 2 {
            return Err(Error::Config("params.s_range must be increasing and positive, s_count >= 2".into()));
        }
        if !(p.t >= 0.0) {
            return Err(Error::Config(format!("params.t={} must be >= 0", p.t)));
        }
        if let Some(psi) = &self.psi {
            if psi.dim != g.dim {
                return Err(Error::Config(format!("psi.dim={} differs from grid.dim={}", psi.dim, g.dim)));
            }
            psi.clone().prepare().map_err(|e| Error::Config(format!("psi: {e}")))?;
        }
        for (name, s) in [("symbol", &self.symbol), ("right", &self.right)] {
            if let Some(s) = s {
                s.validate(name, self.family.is_some())?;
            }
        }
        Ok(())
    }

    /// Check that `task` has the sections it needs.
    pub fn require_for(&self, task: Task) -> Result<()> {
        if let Some(t) = self.task {
            if t != task {
                return Err(Error::Config(format!(
                    "config is for task {} but {} was requested",
                    t.name(),
                    task.name()
                )));
            }
        }
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("task {} needs [{what}]", task.name())))
            }
        };
        match task {
            Task::CheckLambda => need(self.psi.is_some(), "psi"),
            Task::CheckBernstein => need(self.family.is_some(), "family"),
            Task::CheckSymbol => {
                need(self.symbol.is_some(), "symbol")?;
                need(self.psi.is_some(), "psi")
            }
            Task::Compose => {
                need(self.symbol.is_some(), "symbol")?;
                need(self.right.is_some(), "right")
            }
            Task::ReferenceFunctions => {
                need(self.psi.is_some(), "psi")?;
                need(self.family.is_some() || self.reference.is_some(), "family] or [reference")
            }
            Task::Garding => {
                need(self.symbol.is_some(), "symbol")?;
                need(self.psi.is_some(), "psi")
            }
            Task::Solve | Task::Evolve | Task::Feller => need(self.symbol.is_some(), "symbol"),
        }
    }

    pub fn psi(&self) -> Result<PsiSpec> {
        self.psi
            .clone()
            .ok_or_else(|| Error::Config("missing [psi]".into()))?
            .prepare()
    }

    pub fn family(&self) -> Result<BernsteinFamily> {
        self.family
            .clone()
            .map(BernsteinFamily::new)
            .ok_or_else(|| Error::Config("missing [family]".into()))
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.grid.dim, self.grid.points, self.grid.period)
    }

    /// Lower and upper envelopes: `[reference]` if given, otherwise those
    /// of the family (both equal to the family when it is x-independent).
    pub fn envelopes(&self) -> Result<(BernsteinSpec, BernsteinSpec, f64, f64)> {
        if let Some(r) = &self.reference {
            return Ok((r.f0.clone(), r.f1.clone(), r.c0, r.c1));
        }
        let spec = self
            .family
            .clone()
            .ok_or_else(|| Error::Config("missing [family] or [reference]".into()))?;
        if spec.is_x_independent() {
            return Ok((spec.clone(), spec, 1.0, 1.0));
        }
        let fam = BernsteinFamily::new(spec);
        match (fam.envelope_f0.clone(), fam.envelope_f1.clone()) {
            (Some(f0), Some(f1)) => Ok((f0, f1, 1.0, 1.0)),
            _ => Err(Error::Config(format!(
                "family {} has no closed-form envelopes; give [reference]",
                fam.name()
            ))),
        }
    }

    pub fn symbol(&self) -> Result<Symbol> {
        let cfg = self.symbol.as_ref().ok_or_else(|| Error::Config("missing [symbol]".into()))?;
        self.build(cfg)
    }

    pub fn right_symbol(&self) -> Result<Symbol> {
        let cfg = self.right.as_ref().ok_or_else(|| Error::Config("missing [right]".into()))?;
        self.build(cfg)
    }

    fn build(&self, cfg: &SymbolConfig) -> Result<Symbol> {
        let psi = match &self.psi {
            Some(_) => self.psi()?,
            None => PsiSpec::quadratic(self.grid.dim),
        };
        let q = || Symbol::shifted_psi(cfg.coeff.clone(), cfg.shift, psi.clone());
        let exponent = || {
            cfg.exponent
                .clone()
                .ok_or_else(|| Error::Config("construction needs `exponent`".into()))
        };
        match cfg.construction {
            Construction::Psi => q(),
            Construction::Subordinate => subordinate_symbol(&self.family()?, &q()?, cfg.order.unwrap_or(2.0)),
            Construction::HohPower => hoh_power_symbol(&q()?, exponent()?),
            Construction::VariableOrderExample => variable_order_example_symbol(&q()?, exponent()?),
            Construction::Inverse => {
                let inner = cfg
                    .inner
                    .as_ref()
                    .ok_or_else(|| Error::Config("inverse needs [symbol.inner]".into()))?;
                inverse_symbol(&self.build(inner)?, cfg.lambda.unwrap_or(1.0))
            }
        }
    }

    pub fn class_check(&self) -> ClassCheck {
        let p = &self.params;
        ClassCheck {
            class: match p.class {
                ClassName::Rho => SymbolClass::Rho,
                ClassName::Zero => SymbolClass::Zero,
            },
            max_alpha: p.max_alpha,
            max_beta: p.max_beta,
            epsilon: p.epsilon,
        }
    }

    /// Seed of one random stream of one task; streams never collide.
    pub fn seed_for(&self, task: Task, stream: u64) -> u64 {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(task.stream() * 64 + stream);
        rng.random()
    }

    pub fn field(&self, cfg: &FieldConfig, seed: u64) -> Result<TorusGridFn> {
        let grid = self.grid()?;
        let axes = |k: &Vec<i64>| {
            if k.len() == grid.dim {
                Ok(())
            } else {
                Err(Error::Config(format!("mode {k:?} needs {} entries", grid.dim)))
            }
        };
        Ok(match cfg {
            FieldConfig::Mode { k } => {
                axes(k)?;
                TorusGridFn::mode(grid, k)
            }
            FieldConfig::Cosine { k } => {
                axes(k)?;
                let w = 2.0 * std::f64::consts::PI / grid.period;
                TorusGridFn::from_real_fn(grid, |x| {
                    (w * k.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum::<f64>()).cos()
                })
            }
            FieldConfig::Bump { concentration } => crate::feller::smooth_bump(grid, *concentration),
            FieldConfig::Random { bandwidth, real } => {
                TorusGridFn::random_band_limited(grid, *bandwidth, seed, *real)
            }
        })
    }
}

impl SymbolConfig {
    fn validate(&self, name: &str, have_family: bool) -> Result<()> {
        let err = |m: &str| Err(Error::Config(format!("[{name}]: {m}")));
        match self.construction {
            Construction::Subordinate if !have_family => err("subordinate needs [family]"),
            Construction::HohPower | Construction::VariableOrderExample if self.exponent.is_none() => {
                err("construction needs `exponent`")
            }
            Construction::Inverse => match &self.inner {
                None => err("inverse needs `inner`"),
                Some(_) if self.lambda.is_some_and(|l| !(l >= 0.0)) => err("lambda must be >= 0"),
                Some(inner) => inner.validate(name, have_family),
            },
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const VARIABLE_ORDER: &str = r#"
seed = 3
[grid]
points = 32
[psi]
dim = 1
kind = "quadratic"
[symbol]
construction = "variable-order-example"
shift = 1.0
exponent = { kind = "sin", offset = 0.6, amplitude = 0.3 }
[params]
claimed_order = 0.9
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ExperimentConfig::from_toml(VARIABLE_ORDER).unwrap();
        assert_eq!(cfg.grid.points, 32);
        assert_eq!(cfg.params.lambda, 1.0);
        let p = cfg.symbol().unwrap();
        assert!((p.order - 0.9).abs() < 1e-15);
        assert!((p.lower_order - 0.3).abs() < 1e-15);
        cfg.require_for(Task::CheckSymbol).unwrap();
        assert!(cfg.require_for(Task::Compose).is_err());
    }

    #[test]
    fn parse_error_names_the_line() {
        let bad = "seed = 1\n[grid]\npoints = \"many\"\n";
        let e = ExperimentConfig::from_toml(bad).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let typo = "seed = 1\n\n[params]\nlamda = 2.0\n";
        let e = ExperimentConfig::from_toml(typo).unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
    }

    #[test]
    fn validation_catches_ranges_and_names() {
        assert!(ExperimentConfig::from_toml("[grid]\npoints = 7\n").is_err());
        assert!(ExperimentConfig::from_toml("[params]\nlambda = -1.0\n").is_err());
        let no_family = "[symbol]\nconstruction = \"subordinate\"\n";
        assert!(ExperimentConfig::from_toml(no_family).is_err());
        let cfg = ExperimentConfig::from_toml("task = \"solve\"\n").unwrap();
        assert!(cfg.require_for(Task::Evolve).is_err());
    }

    #[test]
    fn inverse_nests() {
        let text = r#"
[symbol]
construction = "inverse"
lambda = 2.0
[symbol.inner]
construction = "psi"
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let p = cfg.symbol().unwrap();
        assert!((p.eval(&[0.0], &[1.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn seed_streams_are_distinct_and_stable() {
        let cfg = ExperimentConfig::from_toml("seed = 9\n").unwrap();
        let a = cfg.seed_for(Task::Feller, 0);
        assert_eq!(a, cfg.seed_for(Task::Feller, 0));
        assert_ne!(a, cfg.seed_for(Task::Feller, 1));
        assert_ne!(a, cfg.seed_for(Task::Garding, 0));
    }

    #[test]
    fn x_dependent_family_uses_envelopes() {
        let text = r#"
[family]
kind = "saturated"
alpha = { kind = "sin", offset = 0.6, amplitude = 0.3 }
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let (f0, f1, _, _) = cfg.envelopes().unwrap();
        let level = |f: &BernsteinSpec| match f {
            BernsteinSpec::Saturated { alpha: SmoothFn::Const(a) } => *a,
            other => panic!("unexpected envelope {other:?}"),
        };
        assert!((level(&f0) - 0.3).abs() < 1e-15);
        assert!((level(&f1) - 0.9).abs() < 1e-15);
    }
}
