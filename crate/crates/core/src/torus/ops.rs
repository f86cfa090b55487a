use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::ndf::{eval_psi, PsiSpec};
use crate::symcalc::PhaseFunction;

use super::grid::{fft_nd, TorusGrid, TorusGridFn};

/// Largest `N^{2n}` for which symbol values are tabulated up front.
pub const TABLE_LIMIT: usize = 1 << 22;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

enum Repr<'a> {
    /// x-independent symbol: one value per frequency.
    Multiplier(Vec<Complex64>),
    /// `p(x_j, k)` at `j * len + k`.
    Table(Vec<Complex64>),
    Lazy(&'a dyn PhaseFunction),
}

/// A symbol bound to a torus grid, ready for repeated application.
///
/// The Nyquist frequencies are always dropped from the input spectrum.
pub struct DiscreteOperator<'a> {
    grid: TorusGrid,
    repr: Repr<'a>,
    twiddle: Vec<Complex64>,
    wavenumbers: Vec<Vec<i64>>,
    nyquist: Vec<bool>,
}

impl<'a> DiscreteOperator<'a> {
    pub fn new(p: &'a dyn PhaseFunction, grid: TorusGrid) -> Result<Self> {
        if p.dim() != grid.dim {
            return Err(Error::Input(format!(
                "{}-dimensional symbol on a {}-dimensional grid",
                p.dim(),
                grid.dim
            )));
        }
        let len = grid.len();
        let freqs: Vec<Vec<f64>> = (0..len).map(|k| grid.frequency(k)).collect();
        let nyquist: Vec<bool> = (0..len).map(|k| grid.is_nyquist(k)).collect();
        let repr = if p.is_x_independent() {
            let origin = vec![0.0; grid.dim];
            let mult = (0..len)
                .map(|k| {
                    if nyquist[k] {
                        Ok(ZERO)
                    } else {
                        p.eval_complex(&origin, &freqs[k])
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Repr::Multiplier(mult)
        } else if len * len <= TABLE_LIMIT {
            let rows: Vec<Vec<Complex64>> = (0..len)
                .into_par_iter()
                .map(|j| {
                    let x = grid.point(j);
                    (0..len)
                        .map(|k| {
                            if nyquist[k] {
                                Ok(ZERO)
                            } else {
                                p.eval_complex(&x, &freqs[k])
                            }
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            Repr::Table(rows.concat())
        } else {
            Repr::Lazy(p)
        };
        let n = grid.points_per_dim;
        Ok(DiscreteOperator {
            grid,
            repr,
            twiddle: (0..n)
                .map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64))
                .collect(),
            wavenumbers: (0..len).map(|k| grid.wavenumber(k)).collect(),
            nyquist,
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn is_multiplier(&self) -> bool {
        matches!(self.repr, Repr::Multiplier(_))
    }

    /// `p(x_j, k)` for every lattice point and frequency, or the multiplier.
    fn symbol_row(&self, j: usize) -> Result<std::borrow::Cow<'_, [Complex64]>> {
        let len = self.grid.len();
        match &self.repr {
            Repr::Multiplier(m) => Ok(std::borrow::Cow::Borrowed(m)),
            Repr::Table(t) => Ok(std::borrow::Cow::Borrowed(&t[j * len..(j + 1) * len])),
            Repr::Lazy(p) => {
                let x = self.grid.point(j);
                (0..len)
                    .map(|k| {
                        if self.nyquist[k] {
                            Ok(ZERO)
                        } else {
                            p.eval_complex(&x, &self.grid.frequency(k))
                        }
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(std::borrow::Cow::Owned)
            }
        }
    }

    /// Median over `x` of the real and imaginary parts of `p(x, k)`.
    pub fn median_multiplier(&self) -> Result<Vec<Complex64>> {
        let len = self.grid.len();
        if let Repr::Multiplier(m) = &self.repr {
            return Ok(m.clone());
        }
        let rows: Vec<Vec<Complex64>> = (0..len)
            .map(|j| self.symbol_row(j).map(|r| r.into_owned()))
            .collect::<Result<_>>()?;
        let median = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            let m = v.len();
            if m % 2 == 1 {
                v[m / 2]
            } else {
                0.5 * (v[m / 2 - 1] + v[m / 2])
            }
        };
        Ok((0..len)
            .map(|k| {
                let re = median(rows.iter().map(|r| r[k].re).collect());
                let im = median(rows.iter().map(|r| r[k].im).collect());
                Complex64::new(re, im)
            })
            .collect())
    }

    /// `p(x, D) u` on the lattice.
    pub fn apply(&self, u: &TorusGridFn) -> Result<TorusGridFn> {
        if !u.grid.same_as(&self.grid) {
            return Err(Error::Input("operator and function live on different grids".into()));
        }
        let mut c = u.coefficients();
        for (v, &nyq) in c.iter_mut().zip(&self.nyquist) {
            if nyq {
                *v = ZERO;
            }
        }
        let (dim, n) = (self.grid.dim, self.grid.points_per_dim);
        if let Repr::Multiplier(m) = &self.repr {
            for (v, p) in c.iter_mut().zip(m) {
                *v *= p;
            }
            fft_nd(&mut c, dim, n, FftDirection::Inverse);
            return Ok(TorusGridFn {
                grid: self.grid,
                values: c,
            });
        }
        let len = self.grid.len();
        let norm = (len as f64).powf(-0.5);
        let values = (0..len)
            .into_par_iter()
            .map(|j| {
                let row = self.symbol_row(j)?;
                let jidx = self.grid.index(j);
                let mut acc = ZERO;
                for k in 0..len {
                    if c[k] == ZERO {
                        continue;
                    }
                    let phase: i64 = self.wavenumbers[k]
                        .iter()
                        .zip(&jidx)
                        .map(|(&kk, &jj)| kk * jj as i64)
                        .sum();
                    acc += row[k] * c[k] * self.twiddle[phase.rem_euclid(n as i64) as usize];
                }
                Ok(acc * norm)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TorusGridFn {
            grid: self.grid,
            values,
        })
    }

    /// Dense lattice matrix, row-major, built column by column.
    pub fn dense_matrix(&self) -> Result<Vec<Complex64>> {
        let len = self.grid.len();
        let mut m = vec![ZERO; len * len];
        for l in 0..len {
            let mut e = TorusGridFn::zeros(self.grid);
            e.values[l] = Complex64::new(1.0, 0.0);
            let col = self.apply(&e)?;
            for (j, v) in col.values.iter().enumerate() {
                m[j * len + l] = *v;
            }
        }
        Ok(m)
    }

    /// Matrix of the operator in the basis of lattice modes `exp(i k . x)`,
    /// row-major with rows and columns in FFT storage order.
    pub fn fourier_matrix(&self) -> Result<Vec<Complex64>> {
        let len = self.grid.len();
        let (dim, n) = (self.grid.dim, self.grid.points_per_dim);
        let mut m = vec![ZERO; len * len];
        if let Repr::Multiplier(mult) = &self.repr {
            for k in 0..len {
                m[k * len + k] = mult[k];
            }
            return Ok(m);
        }
        let rows: Vec<Vec<Complex64>> = (0..len)
            .map(|j| self.symbol_row(j).map(|r| r.into_owned()))
            .collect::<Result<_>>()?;
        let norm = (len as f64).powf(-0.5);
        for k in 0..len {
            if self.nyquist[k] {
                continue;
            }
            // x -> p(x, k) expanded as sum_r c_r exp(i r . x)
            let mut g: Vec<Complex64> = rows.iter().map(|r| r[k]).collect();
            fft_nd(&mut g, dim, n, FftDirection::Forward);
            for (r, c) in g.iter().enumerate() {
                if *c == ZERO {
                    continue;
                }
                let target: Vec<i64> = self.wavenumbers[k]
                    .iter()
                    .zip(&self.wavenumbers[r])
                    .map(|(a, b)| a + b)
                    .collect();
                m[self.grid.mode_index(&target) * len + k] += c * norm;
            }
        }
        Ok(m)
    }
}

/// `p(x, D) u` with `p` evaluated at `(x_j, 2 pi k / L)`.
pub fn apply_pdo(p: &dyn PhaseFunction, u: &TorusGridFn) -> Result<TorusGridFn> {
    DiscreteOperator::new(p, u.grid)?.apply(u)
}

/// `(L/N)^n sum_k (1 + psi(k))^s |u_hat(k)|^2`, square-rooted.
pub fn sobolev_norm(psi: &PsiSpec, s: f64, u: &TorusGridFn) -> Result<f64> {
    Ok(sobolev_norm_sq(psi, s, u)?.sqrt())
}

pub(crate) fn sobolev_norm_sq(psi: &PsiSpec, s: f64, u: &TorusGridFn) -> Result<f64> {
    if psi.dim != u.grid.dim {
        return Err(Error::Input("psi and grid dimensions differ".into()));
    }
    let c = u.coefficients();
    let mut acc = 0.0;
    for (k, v) in c.iter().enumerate() {
        let w = if s == 0.0 {
            1.0
        } else {
            (1.0 + eval_psi(psi, &u.grid.frequency(k))?).powf(s)
        };
        acc += w * v.norm_sqr();
    }
    Ok(acc * u.grid.cell_volume())
}

/// `B(u, v) = (p(x, D) u, v)_0`.
pub fn bilinear_form(p: &dyn PhaseFunction, u: &TorusGridFn, v: &TorusGridFn) -> Result<Complex64> {
    u.check_grid(v)?;
    apply_pdo(p, u)?.inner(v)
}

/// Symbol of `q1(x, D) q2(x, D)` on the lattice, `sigma(x_j, k)` at
/// `j * len + k`, extracted from the product of Fourier-basis matrices.
pub fn composition_symbol(
    q1: &dyn PhaseFunction,
    q2: &dyn PhaseFunction,
    grid: TorusGrid,
) -> Result<Vec<Complex64>> {
    let len = grid.len();
    if q1.is_x_independent() && q2.is_x_independent() {
        // multipliers compose exactly; skip the transform roundoff
        let origin = vec![0.0; grid.dim];
        let mut diag = Vec::with_capacity(len);
        for k in 0..len {
            diag.push(if grid.is_nyquist(k) {
                ZERO
            } else {
                let xi = grid.frequency(k);
                q1.eval_complex(&origin, &xi)? * q2.eval_complex(&origin, &xi)?
            });
        }
        return Ok((0..len * len).map(|i| diag[i % len]).collect());
    }
    let m1 = DiscreteOperator::new(q1, grid)?.fourier_matrix()?;
    let m2 = DiscreteOperator::new(q2, grid)?.fourier_matrix()?;
    let prod: Vec<Complex64> = (0..len)
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = &m1[i * len..(i + 1) * len];
            let m2 = &m2;
            (0..len).map(move |k| {
                let mut acc = ZERO;
                for (l, a) in row.iter().enumerate() {
                    if *a != ZERO {
                        acc += a * m2[l * len + k];
                    }
                }
                acc
            })
        })
        .collect();
    let (dim, n) = (grid.dim, grid.points_per_dim);
    let scale = (len as f64).sqrt();
    let mut sigma = vec![ZERO; len * len];
    let s = 2.0 * PI / grid.period;
    for k in 0..len {
        let mut col: Vec<Complex64> = (0..len).map(|l| prod[l * len + k]).collect();
        fft_nd(&mut col, dim, n, FftDirection::Inverse);
        let kk = grid.wavenumber(k);
        for (j, v) in col.iter().enumerate() {
            let phase: f64 = kk
                .iter()
                .zip(grid.point(j))
                .map(|(&a, x)| a as f64 * s * x)
                .sum();
            sigma[j * len + k] = v * scale * Complex64::from_polar(1.0, -phase);
        }
    }
    Ok(sigma)
}
