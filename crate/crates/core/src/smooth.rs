//! Smooth bounded coefficient maps `x -> a(x)` used for variable orders and
//! variable coefficients.

use serde::{Deserialize, Serialize};

use crate::jet::Jet;

/// A `C_b^inf` function of the spatial variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SmoothFn {
    Const(f64),
    Trig(TrigFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigKind {
    Sin,
    Cos,
}

/// `offset + amplitude * sin(frequency * x[axis])` (or cos).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigFn {
    pub kind: TrigKind,
    pub offset: f64,
    pub amplitude: f64,
    #[serde(default = "one")]
    pub frequency: f64,
    #[serde(default)]
    pub axis: usize,
}

fn one() -> f64 {
    1.0
}

impl SmoothFn {
    pub fn constant(c: f64) -> Self {
        SmoothFn::Const(c)
    }

    pub fn sin(offset: f64, amplitude: f64) -> Self {
        SmoothFn::Trig(TrigFn {
            kind: TrigKind::Sin,
            offset,
            amplitude,
            frequency: 1.0,
            axis: 0,
        })
    }

    pub fn cos(offset: f64, amplitude: f64) -> Self {
        SmoothFn::Trig(TrigFn {
            kind: TrigKind::Cos,
            offset,
            amplitude,
            frequency: 1.0,
            axis: 0,
        })
    }

    pub fn is_constant(&self) -> bool {
        match self {
            SmoothFn::Const(_) => true,
            SmoothFn::Trig(t) => t.amplitude == 0.0 || t.frequency == 0.0,
        }
    }

    /// Largest axis index referenced, plus one.
    pub fn min_dim(&self) -> usize {
        match self {
            SmoothFn::Const(_) => 0,
            SmoothFn::Trig(t) => t.axis + 1,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SmoothFn::Const(c) => *c,
            SmoothFn::Trig(t) => {
                let arg = t.frequency * x.get(t.axis).copied().unwrap_or(0.0);
                let wave = match t.kind {
                    TrigKind::Sin => arg.sin(),
                    TrigKind::Cos => arg.cos(),
                };
                t.offset + t.amplitude * wave
            }
        }
    }

    pub fn jet(&self, x: &[Jet], like: &Jet) -> Jet {
        match self {
            SmoothFn::Const(c) => Jet::constant(like.space(), *c),
            SmoothFn::Trig(t) => {
                let arg = x[t.axis].scale(t.frequency);
                let wave = match t.kind {
                    TrigKind::Sin => arg.sin(),
                    TrigKind::Cos => arg.cos(),
                };
                wave.scale(t.amplitude).add_scalar(t.offset)
            }
        }
    }

    /// Exact infimum and supremum over all of `R^n`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            SmoothFn::Const(c) => (*c, *c),
            SmoothFn::Trig(t) => {
                if t.frequency == 0.0 {
                    let v = self.eval(&vec![0.0; t.axis + 1]);
                    return (v, v);
                }
                let a = t.amplitude.abs();
                (t.offset - a, t.offset + a)
            }
        }
    }
}
