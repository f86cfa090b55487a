//! Phase-space sample grids and the refinement protocol shared by every
//! class check.

use std::f64::consts::PI;

/// Finite sample of phase space: every `x` is paired with every `xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub dim: usize,
    pub x: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
}

fn cartesian(dim: usize, axis: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(dim)];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

impl PhaseGrid {
    /// Torus points `2 pi j / N` paired with the symmetric integer lattice
    /// `-N/2..=N/2` in each dimension.
    pub fn torus(dim: usize, points_per_dim: usize) -> Self {
        let x_axis: Vec<f64> = (0..points_per_dim)
            .map(|j| 2.0 * PI * j as f64 / points_per_dim as f64)
            .collect();
        let half = (points_per_dim / 2) as i64;
        let xi_axis: Vec<f64> = (-half..=half).map(|k| k as f64).collect();
        PhaseGrid {
            dim,
            x: cartesian(dim, &x_axis),
            xi: cartesian(dim, &xi_axis),
        }
    }

    /// Symmetric lattice `{-R, -R + h, ..., R}` per dimension at `x = 0`.
    pub fn xi_lattice(dim: usize, half_extent: f64, spacing: f64) -> Self {
        let steps = (half_extent / spacing).round() as i64;
        let axis: Vec<f64> = (-steps..=steps).map(|k| k as f64 * spacing).collect();
        PhaseGrid {
            dim,
            x: vec![vec![0.0; dim]],
            xi: cartesian(dim, &axis),
        }
    }

    /// Log-spaced magnitudes in `[min, max]`, both signs, along every
    /// coordinate axis; the origin is excluded.
    pub fn xi_log(dim: usize, min: f64, max: f64, count: usize) -> Self {
        let mags = log_space(min, max, count);
        let mut xi = Vec::with_capacity(2 * dim * count);
        for axis in 0..dim {
            for &m in &mags {
                for sign in [-1.0, 1.0] {
                    let mut p = vec![0.0; dim];
                    p[axis] = sign * m;
                    xi.push(p);
                }
            }
        }
        PhaseGrid {
            dim,
            x: vec![vec![0.0; dim]],
            xi,
        }
    }

    /// Replace the spatial samples by the `N`-point torus grid.
    pub fn with_torus_x(mut self, points_per_dim: usize) -> Self {
        let x_axis: Vec<f64> = (0..points_per_dim)
            .map(|j| 2.0 * PI * j as f64 / points_per_dim as f64)
            .collect();
        self.x = cartesian(self.dim, &x_axis);
        self
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn log_space(min: f64, max: f64, count: usize) -> Vec<f64> {
    assert!(min > 0.0 && max > min && count >= 2);
    let (a, b) = (min.ln(), max.ln());
    let mut out: Vec<f64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect();
    out[0] = min;
    out[count - 1] = max;
    out
}

/// A coarse grid, its refinement, and the tolerated growth of fitted
/// suprema between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub coarse: PhaseGrid,
    pub fine: PhaseGrid,
    pub growth_tol: f64,
}

/// Default tolerated growth of a fitted constant under one refinement.
pub const DEFAULT_GROWTH_TOL: f64 = 0.10;

impl Refinement {
    pub fn new(coarse: PhaseGrid, fine: PhaseGrid) -> Self {
        Refinement {
            coarse,
            fine,
            growth_tol: DEFAULT_GROWTH_TOL,
        }
    }

    /// `N` points per dimension refined to `2N`; the xi-box doubles with it.
    pub fn torus(dim: usize, points_per_dim: usize) -> Self {
        Refinement::new(
            PhaseGrid::torus(dim, points_per_dim),
            PhaseGrid::torus(dim, 2 * points_per_dim),
        )
    }

    /// Lattice of half-extent `R` refined to `2R` at the same spacing.
    pub fn xi_lattice(dim: usize, half_extent: f64, spacing: f64) -> Self {
        Refinement::new(
            PhaseGrid::xi_lattice(dim, half_extent, spacing),
            PhaseGrid::xi_lattice(dim, 2.0 * half_extent, spacing),
        )
    }

    /// Log-spaced xi-box `[min, max]` against `[min, max * 2^doublings]`
    /// at the same density per decade.
    pub fn xi_log(dim: usize, min: f64, max: f64, per_decade: usize, doublings: u32) -> Self {
        let fine_max = max * 2f64.powi(doublings as i32);
        let count = |hi: f64| ((hi / min).log10() * per_decade as f64).ceil() as usize + 1;
        Refinement::new(
            PhaseGrid::xi_log(dim, min, max, count(max)),
            PhaseGrid::xi_log(dim, min, fine_max, count(fine_max)),
        )
    }

    pub fn with_growth_tol(mut self, tol: f64) -> Self {
        self.growth_tol = tol;
        self
    }
}

/// Running supremum of one quantity over a sweep.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Extremum {
    pub value: f64,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    /// First point (in sweep order) where the quantity was not finite.
    pub nonfinite: Option<(Vec<f64>, Vec<f64>)>,
}

impl Extremum {
    fn empty() -> Self {
        Extremum {
            value: f64::NEG_INFINITY,
            x: Vec::new(),
            xi: Vec::new(),
            nonfinite: None,
        }
    }

    fn offer(&mut self, v: f64, x: &[f64], xi: &[f64]) {
        if !v.is_finite() {
            if self.nonfinite.is_none() {
                self.nonfinite = Some((x.to_vec(), xi.to_vec()));
            }
            return;
        }
        if v > self.value {
            self.value = v;
            self.x = x.to_vec();
            self.xi = xi.to_vec();
        }
    }

    fn merge(&mut self, other: Extremum) {
        if self.nonfinite.is_none() {
            self.nonfinite = other.nonfinite;
        }
        if other.value > self.value {
            self.value = other.value;
            self.x = other.x;
            self.xi = other.xi;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.nonfinite.is_none()
    }
}

const SWEEP_CHUNK: usize = 512;

/// Supremum of `entries` quantities over every `(x, xi)` of the grid.
///
/// `eval` fills one value per entry at a point. Work is split into fixed
/// chunks and merged in chunk order, so results do not depend on the
/// thread count.
pub(crate) fn sweep_sup<F>(
    grid: &PhaseGrid,
    entries: usize,
    eval: F,
) -> crate::error::Result<Vec<Extremum>>
where
    F: Fn(&[f64], &[f64], &mut [f64]) -> crate::error::Result<()> + Sync,
{
    use rayon::prelude::*;

    let nxi = grid.xi.len();
    let total = grid.len();
    let chunks: Vec<usize> = (0..total.div_ceil(SWEEP_CHUNK)).collect();
    let partial: Vec<crate::error::Result<Vec<Extremum>>> = chunks
        .par_iter()
        .map(|&c| {
            let mut local = vec![Extremum::empty(); entries];
            let mut buf = vec![0.0; entries];
            let end = ((c + 1) * SWEEP_CHUNK).min(total);
            for flat in c * SWEEP_CHUNK..end {
                let x = &grid.x[flat / nxi];
                let xi = &grid.xi[flat % nxi];
                eval(x, xi, &mut buf)?;
                for (acc, &v) in local.iter_mut().zip(&buf) {
                    acc.offer(v, x, xi);
                }
            }
            Ok(local)
        })
        .collect();

    let mut out = vec![Extremum::empty(); entries];
    for part in partial {
        for (acc, p) in out.iter_mut().zip(part?) {
            acc.merge(p);
        }
    }
    Ok(out)
}

/// Absolute slack added to the growth test so that constants at roundoff
/// level do not flag as unstable.
pub const GROWTH_FLOOR: f64 = 1e-12;

/// Fit one supremum per `(alpha, beta)` pair on both grids of a refinement.
///
/// `eval` writes the ratio of each pair at a point. An entry passes when it
/// is finite on both grids and grows by at most `growth_tol` under refinement.
pub(crate) fn fit_constants<F>(
    refinement: &Refinement,
    pairs: &[(Vec<usize>, Vec<usize>)],
    eval: F,
) -> crate::error::Result<Vec<crate::report::ClassEntry>>
where
    F: Fn(&[f64], &[f64], &mut [f64]) -> crate::error::Result<()> + Sync,
{
    use crate::report::{ClassEntry, Location};

    let coarse = sweep_sup(&refinement.coarse, pairs.len(), &eval)?;
    let fine = sweep_sup(&refinement.fine, pairs.len(), &eval)?;
    Ok(pairs
        .iter()
        .zip(coarse.into_iter().zip(fine))
        .map(|((alpha, beta), (c, f))| {
            let finite = c.is_finite() && f.is_finite();
            let (value, location) = match (&f.nonfinite, &c.nonfinite) {
                (Some((x, xi)), _) | (None, Some((x, xi))) => (
                    f64::INFINITY,
                    Location {
                        x: x.clone(),
                        xi: xi.clone(),
                    },
                ),
                _ => (f.value.max(0.0), Location { x: f.x, xi: f.xi }),
            };
            let coarse_value = if c.is_finite() { c.value.max(0.0) } else { f64::INFINITY };
            let stable = finite
                && value <= coarse_value * (1.0 + refinement.growth_tol) + GROWTH_FLOOR;
            ClassEntry {
                alpha: alpha.clone(),
                beta: beta.clone(),
                constant: value,
                coarse_constant: coarse_value,
                location,
                finite,
                stable,
                pass: finite && stable,
            }
        })
        .collect())
}

/// All multi-indices in `dim` variables with total degree `<= order`,
/// ordered by degree.
pub fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for deg in 0..=order {
        let mut cur = vec![0usize; dim];
        push_degree(&mut out, &mut cur, 0, deg);
    }
    out
}

fn push_degree(out: &mut Vec<Vec<usize>>, cur: &mut [usize], pos: usize, remaining: usize) {
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == cur.len() - 1 {
        cur[pos] = remaining;
        out.push(cur.to_vec());
        cur[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e;
        push_degree(out, cur, pos + 1, remaining - e);
    }
    cur[pos] = 0;
}

/// Gain exponent `rho(k) = min(k, 2)`.
pub fn rho(k: usize) -> f64 {
    k.min(2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_grid_sizes() {
        let g = PhaseGrid::torus(1, 8);
        assert_eq!(g.x.len(), 8);
        assert_eq!(g.xi.len(), 9);
        assert_eq!(g.xi.first().unwrap()[0], -4.0);
        let g2 = PhaseGrid::torus(2, 4);
        assert_eq!(g2.x.len(), 16);
        assert_eq!(g2.xi.len(), 25);
    }

    #[test]
    fn refinement_contains_coarse_xi() {
        let r = Refinement::torus(1, 16);
        for xi in &r.coarse.xi {
            assert!(r.fine.xi.contains(xi));
        }
    }

    #[test]
    fn log_grid_excludes_origin() {
        let g = PhaseGrid::xi_log(1, 1e-2, 1e2, 9);
        assert_eq!(g.xi.len(), 18);
        assert!(g.xi.iter().all(|p| p[0] != 0.0));
    }
}
