use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::ndf::eval_psi;
use crate::report::{ClassEntry, ClassReport, Location, ReportKind};
use crate::sampling::{multi_indices, GROWTH_FLOOR, DEFAULT_GROWTH_TOL};
use crate::torus::{fft_nd, TorusGrid};

use super::symbol::{ComplexSymbol, Symbol};
use super::verify::weight_exponent;
use super::SymbolClass;

/// Largest fine-grid size on which the discrete composition is extracted.
pub const COMPOSE_LIMIT: usize = 4096;

/// Highest x-derivative order probed on the remainder.
const REMAINDER_MAX_BETA: usize = 2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Leading part of a composition and the class check of what is left over.
#[derive(Debug, Clone)]
pub struct Composition {
    /// `q1 q2 + sum_j d_{xi_j} q1 D_{x_j} q2` with `D = -i d`.
    pub leading: ComplexSymbol,
    /// 0-class check of `sigma - leading` at order `m1 + m2 - 2`.
    pub remainder: ClassReport,
    /// `sup |sigma - leading|` over both probe grids.
    pub max_abs_remainder: f64,
}

/// Symbol of `q1(x, D) q2(x, D)` at `(x_j, k)` for every probe frequency
/// `|k_i| <= N/4`. Rows are indexed like `probe`, columns by grid point.
///
/// `q2(x, D) e_k = q2(x, k) e_k` exactly, so each column needs only the
/// spectrum of `x -> q2(x, k)` and one application of `q1`.
fn discrete_composition(
    q1: &Symbol,
    q2: &Symbol,
    grid: TorusGrid,
    probe: &[usize],
) -> Result<Vec<Vec<Complex64>>> {
    let len = grid.len();
    let (dim, n) = (grid.dim, grid.points_per_dim);
    let points: Vec<Vec<f64>> = (0..len).map(|j| grid.point(j)).collect();
    let waves: Vec<Vec<i64>> = (0..len).map(|r| grid.wavenumber(r)).collect();
    let origin = vec![0.0; dim];
    // q1(x_j, m) for x-dependent q1, row-major by j
    let q1_table: Option<Vec<f64>> = if q1.is_x_independent() {
        None
    } else {
        let rows: Vec<Vec<f64>> = points
            .par_iter()
            .map(|x| {
                (0..len)
                    .map(|m| {
                        if grid.is_nyquist(m) {
                            Ok(0.0)
                        } else {
                            q1.eval(x, &grid.frequency(m))
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Some(rows.concat())
    };
    let sqrt_len = (len as f64).sqrt();
    probe
        .par_iter()
        .map(|&k| {
            let xi = grid.frequency(k);
            if q2.is_x_independent() {
                // q1(x, D) q2(D) e_k = q1(x, k) q2(k) e_k
                let right = q2.eval(&origin, &xi)?;
                return points
                    .iter()
                    .map(|x| Ok(Complex64::new(q1.eval(x, &xi)? * right, 0.0)))
                    .collect();
            }
            let g: Vec<Complex64> = {
                let mut g = points
                    .iter()
                    .map(|x| Ok(Complex64::new(q2.eval(x, &xi)?, 0.0)))
                    .collect::<Result<Vec<_>>>()?;
                fft_nd(&mut g, dim, n, FftDirection::Forward);
                g
            };
            // target mode of r + k, or None when it is a Nyquist mode
            let shifted: Vec<Option<usize>> = waves
                .iter()
                .map(|r| {
                    let m: Vec<i64> = r.iter().zip(&waves[k]).map(|(a, b)| a + b).collect();
                    let idx = grid.mode_index(&m);
                    (!grid.is_nyquist(idx)).then_some(idx)
                })
                .collect();
            match &q1_table {
                None => {
                    let mut t = vec![ZERO; len];
                    for r in 0..len {
                        if g[r] == ZERO {
                            continue;
                        }
                        if let Some(m) = shifted[r] {
                            t[r] = g[r] * q1.eval(&origin, &grid.frequency(m))?;
                        }
                    }
                    fft_nd(&mut t, dim, n, FftDirection::Inverse);
                    Ok(t)
                }
                Some(table) => {
                    let twiddle: Vec<Complex64> = (0..n)
                        .map(|s| {
                            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * s as f64 / n as f64)
                        })
                        .collect();
                    let col = (0..len)
                        .map(|j| {
                            let jidx = grid.index(j);
                            let mut acc = ZERO;
                            for r in 0..len {
                                let Some(m) = shifted[r] else { continue };
                                if g[r] == ZERO {
                                    continue;
                                }
                                let phase: i64 = waves[r]
                                    .iter()
                                    .zip(&jidx)
                                    .map(|(&a, &b)| a * b as i64)
                                    .sum();
                                acc += g[r]
                                    * table[j * len + m]
                                    * twiddle[phase.rem_euclid(n as i64) as usize];
                            }
                            acc / sqrt_len
                        })
                        .collect();
                    Ok(col)
                }
            }
        })
        .collect()
}

/// Frequencies with `|k_i| <= N/4` in every coordinate.
fn probe_modes(grid: &TorusGrid) -> Vec<usize> {
    let quarter = (grid.points_per_dim / 4) as i64;
    (0..grid.len())
        .filter(|&k| grid.wavenumber(k).iter().all(|v| v.abs() <= quarter))
        .collect()
}

/// Per-(beta) suprema of the weighted remainder on one grid, with the
/// location of each and the plain sup of `|sigma - leading|`.
fn remainder_sup(
    q1: &Symbol,
    q2: &Symbol,
    leading: &ComplexSymbol,
    grid: TorusGrid,
    betas: &[Vec<usize>],
    exponent: f64,
) -> Result<(Vec<(f64, Location)>, f64)> {
    let probe = probe_modes(&grid);
    let sigma = discrete_composition(q1, q2, grid, &probe)?;
    let len = grid.len();
    let (dim, n) = (grid.dim, grid.points_per_dim);
    let mut best = vec![(0.0f64, Location::default()); betas.len()];
    let mut max_abs = 0.0f64;
    for (col, &k) in sigma.iter().zip(&probe) {
        let xi = grid.frequency(k);
        let weight = (1.0 + eval_psi(&q1.psi, &xi)?).powf(exponent);
        let mut r = (0..len)
            .map(|j| Ok(col[j] - leading.eval(&grid.point(j), &xi)?))
            .collect::<Result<Vec<Complex64>>>()?;
        max_abs = r.iter().map(|v| v.norm()).fold(max_abs, f64::max);
        fft_nd(&mut r, dim, n, FftDirection::Forward);
        for (slot, beta) in best.iter_mut().zip(betas) {
            let mut d = r.clone();
            for (m, v) in d.iter_mut().enumerate() {
                if grid.is_nyquist(m) {
                    *v = ZERO;
                    continue;
                }
                let f = grid.frequency(m);
                for (fi, &b) in f.iter().zip(beta) {
                    *v *= Complex64::new(0.0, *fi).powu(b as u32);
                }
            }
            fft_nd(&mut d, dim, n, FftDirection::Inverse);
            for (j, v) in d.iter().enumerate() {
                let ratio = v.norm() / weight;
                if !ratio.is_finite() || ratio > slot.0 {
                    *slot = (
                        ratio,
                        Location {
                            x: grid.point(j),
                            xi: xi.clone(),
                        },
                    );
                }
            }
        }
    }
    Ok((best, max_abs))
}

/// Leading composition symbol of `q1(x, D) q2(x, D)` and a class check of
/// the exact discrete composition minus it, on the `N`-point torus and its
/// `2N` refinement.
pub fn compose_symbols_leading(q1: &Symbol, q2: &Symbol, points_per_dim: usize) -> Result<Composition> {
    if q1.psi != q2.psi {
        return Err(Error::Input(format!(
            "reference functions differ: {} vs {}",
            q1.psi.name(),
            q2.psi.name()
        )));
    }
    if q1.dim() != q2.dim() {
        return Err(Error::Input("symbols of different dimension".into()));
    }
    let coarse = TorusGrid::standard(q1.dim(), points_per_dim)?;
    let fine = TorusGrid::standard(q1.dim(), 2 * points_per_dim)?;
    if fine.len() > COMPOSE_LIMIT {
        return Err(Error::Capability(format!(
            "composition oracle limited to {COMPOSE_LIMIT} points, refinement needs {}",
            fine.len()
        )));
    }
    let product = Symbol::product(q1, q2)?;
    let cross = Symbol::cross_term(q1, q2)?;
    let leading = ComplexSymbol {
        re: product,
        im: (!q2.is_x_independent()).then_some(cross),
    };
    let order = q1.order + q2.order - 2.0;
    let exponent = weight_exponent(order, SymbolClass::Zero, 0);
    let betas = multi_indices(q1.dim(), REMAINDER_MAX_BETA);
    let (c, abs_c) = remainder_sup(q1, q2, &leading, coarse, &betas, exponent)?;
    let (f, abs_f) = remainder_sup(q1, q2, &leading, fine, &betas, exponent)?;
    let entries = betas
        .iter()
        .zip(c.into_iter().zip(f))
        .map(|(beta, ((cv, _), (fv, loc)))| {
            let finite = cv.is_finite() && fv.is_finite();
            let stable = finite && fv <= cv * (1.0 + DEFAULT_GROWTH_TOL) + GROWTH_FLOOR;
            ClassEntry {
                alpha: vec![0; q1.dim()],
                beta: beta.clone(),
                constant: fv,
                coarse_constant: cv,
                location: loc,
                finite,
                stable,
                pass: stable,
            }
        })
        .collect();
    let mut remainder = ClassReport::new(
        ReportKind::Remainder,
        format!("({}) o ({})", q1.metadata, q2.metadata),
    );
    remainder.claimed_order = Some(order);
    remainder.entries = entries;
    Ok(Composition {
        leading,
        remainder: remainder.finalize(),
        max_abs_remainder: abs_c.max(abs_f),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndf::PsiSpec;
    use crate::smooth::SmoothFn;
    use crate::torus::composition_symbol;

    fn xi2() -> Symbol {
        Symbol::psi(PsiSpec::quadratic(1))
    }

    fn coeff_xi2(c: SmoothFn) -> Symbol {
        Symbol::shifted_psi(c, 0.0, PsiSpec::quadratic(1)).unwrap()
    }

    #[test]
    fn constant_coefficients_compose_by_product() {
        let c = compose_symbols_leading(&xi2(), &xi2(), 64).unwrap();
        assert!(c.leading.im.is_none());
        assert_eq!(c.max_abs_remainder, 0.0);
        assert!(c.remainder.pass);
        assert_eq!(c.leading.eval(&[0.4], &[3.0]).unwrap(), Complex64::new(81.0, 0.0));
    }

    #[test]
    fn cross_term_vanishes_for_constant_right_factor() {
        let a = coeff_xi2(SmoothFn::sin(2.0, 1.0));
        let c = compose_symbols_leading(&a, &xi2(), 64).unwrap();
        assert!(c.max_abs_remainder < 1e-10, "{}", c.max_abs_remainder);
        assert!(c.remainder.pass);
    }

    #[test]
    fn variable_right_factor_has_order_two_remainder() {
        let b = coeff_xi2(SmoothFn::cos(2.0, 1.0));
        let c = compose_symbols_leading(&xi2(), &b, 64).unwrap();
        let x = 0.7;
        let lead = c.leading.eval(&[x], &[3.0]).unwrap();
        let expect = Complex64::new((2.0 + x.cos()) * 81.0, 2.0 * x.sin() * 27.0);
        assert!((lead - expect).norm() < 1e-12);
        assert!(c.remainder.pass, "{:?}", c.remainder.first_failure());
        // exact remainder k^2 cos x against (1 + k^2)
        let c00 = c.remainder.entry(&[0], &[0]).unwrap().constant;
        assert!(c00 <= 1.0 && c00 > 0.9);
        let bad = compose_symbols_leading(&xi2(), &b.clone().with_order(1.0), 64).unwrap();
        assert!(!bad.remainder.pass);
    }

    #[test]
    fn columns_match_dense_oracle() {
        let a = coeff_xi2(SmoothFn::sin(2.0, 1.0));
        let b = coeff_xi2(SmoothFn::cos(2.0, 1.0));
        let grid = TorusGrid::standard(1, 32).unwrap();
        let probe = probe_modes(&grid);
        let cols = discrete_composition(&a, &b, grid, &probe).unwrap();
        let dense = composition_symbol(&a, &b, grid).unwrap();
        let len = grid.len();
        for (col, &k) in cols.iter().zip(&probe) {
            for (j, v) in col.iter().enumerate() {
                let d = dense[j * len + k];
                assert!((v - d).norm() <= 1e-9 * (1.0 + d.norm()), "{v} vs {d}");
            }
        }
    }

    #[test]
    fn mismatched_reference_is_rejected() {
        let a = Symbol::psi(PsiSpec::power(1, 1.0).unwrap());
        assert!(matches!(
            compose_symbols_leading(&a, &xi2(), 16),
            Err(Error::Input(_))
        ));
    }
}
