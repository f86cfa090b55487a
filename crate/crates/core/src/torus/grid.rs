use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic lattice with `points_per_dim^dim` points on `[0, L)^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    pub dim: usize,
    pub points_per_dim: usize,
    pub period: f64,
}

impl TorusGrid {
    pub fn new(dim: usize, points_per_dim: usize, period: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Input(format!("torus dimension {dim} outside 1..=3")));
        }
        if points_per_dim < 8 || !points_per_dim.is_power_of_two() {
            return Err(Error::Input(format!(
                "points per dimension {points_per_dim} must be a power of two >= 8"
            )));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Input(format!("period {period} must be positive")));
        }
        Ok(TorusGrid {
            dim,
            points_per_dim,
            period,
        })
    }

    /// `[0, 2 pi)^dim`.
    pub fn standard(dim: usize, points_per_dim: usize) -> Result<Self> {
        TorusGrid::new(dim, points_per_dim, 2.0 * PI)
    }

    pub fn len(&self) -> usize {
        self.points_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-axis indices of a flat row-major index.
    pub fn index(&self, flat: usize) -> Vec<usize> {
        let n = self.points_per_dim;
        let mut out = vec![0; self.dim];
        let mut rest = flat;
        for slot in out.iter_mut().rev() {
            *slot = rest % n;
            rest /= n;
        }
        out
    }

    pub fn flat(&self, index: &[usize]) -> usize {
        index
            .iter()
            .fold(0, |acc, &i| acc * self.points_per_dim + i)
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.points_per_dim as f64
    }

    /// Quadrature weight `(L/N)^dim` of one lattice point.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        self.index(flat).iter().map(|&j| j as f64 * h).collect()
    }

    /// Signed integer frequency `k in {-N/2, ..., N/2 - 1}` per axis, in FFT
    /// storage order.
    pub fn wavenumber(&self, flat: usize) -> Vec<i64> {
        let n = self.points_per_dim as i64;
        self.index(flat)
            .iter()
            .map(|&i| if (i as i64) < n / 2 { i as i64 } else { i as i64 - n })
            .collect()
    }

    /// Physical frequency `2 pi k / L`.
    pub fn frequency(&self, flat: usize) -> Vec<f64> {
        let s = 2.0 * PI / self.period;
        self.wavenumber(flat).iter().map(|&k| k as f64 * s).collect()
    }

    /// True when any component sits on the unpaired Nyquist frequency.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let half = (self.points_per_dim / 2) as i64;
        self.wavenumber(flat).iter().any(|&k| k == -half)
    }

    /// Flat storage index of an integer wavenumber (taken modulo N).
    pub fn mode_index(&self, k: &[i64]) -> usize {
        let n = self.points_per_dim as i64;
        let idx: Vec<usize> = k.iter().map(|&v| v.rem_euclid(n) as usize).collect();
        self.flat(&idx)
    }

    pub fn same_as(&self, other: &TorusGrid) -> bool {
        self == other
    }
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    type Cache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;
    static PLANS: OnceLock<Cache> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((n, direction == FftDirection::Forward))
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction))
        .clone()
}

/// In-place unitary DFT along every axis of a row-major `n^dim` array.
pub(crate) fn fft_nd(data: &mut [Complex64], dim: usize, n: usize, direction: FftDirection) {
    let fft = plan(n, direction);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for start in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
    let scale = (n as f64).powf(-(dim as f64) / 2.0);
    for v in data.iter_mut() {
        *v *= scale;
    }
}

const DUMP_MAGIC: &[u8; 4] = b"TGF1";

/// Complex samples on a torus lattice, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGridFn {
    pub grid: TorusGrid,
    pub values: Vec<Complex64>,
}

impl TorusGridFn {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalIntegrity("grid function has non-finite values".into()));
        }
        Ok(TorusGridFn { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        TorusGridFn {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn<F: Fn(&[f64]) -> Complex64>(grid: TorusGrid, f: F) -> Self {
        let values = (0..grid.len()).map(|j| f(&grid.point(j))).collect();
        TorusGridFn { grid, values }
    }

    pub fn from_real_fn<F: Fn(&[f64]) -> f64>(grid: TorusGrid, f: F) -> Self {
        TorusGridFn::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// `exp(i k . x)` for an integer wavenumber `k`.
    pub fn mode(grid: TorusGrid, k: &[i64]) -> Self {
        let s = 2.0 * PI / grid.period;
        TorusGridFn::from_fn(grid, |x| {
            let phase: f64 = k.iter().zip(x).map(|(&k, &x)| k as f64 * s * x).sum();
            Complex64::from_polar(1.0, phase)
        })
    }

    /// Function with the given unitary Fourier coefficients.
    pub fn from_coefficients(grid: TorusGrid, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::Input("coefficient count differs from grid size".into()));
        }
        fft_nd(&mut coeffs, grid.dim, grid.points_per_dim, FftDirection::Inverse);
        Ok(TorusGridFn {
            grid,
            values: coeffs,
        })
    }

    /// Seeded random trigonometric polynomial with `|k_i| <= bandwidth` and
    /// coefficients of size `1 / (1 + |k|^2)`. Real when `real` is set.
    pub fn random_band_limited(grid: TorusGrid, bandwidth: usize, seed: u64, real: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = (grid.points_per_dim / 2) as i64;
        let bw = (bandwidth as i64).min(half - 1);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        for flat in 0..grid.len() {
            let k = grid.wavenumber(flat);
            if k.iter().any(|v| v.abs() > bw) {
                continue;
            }
            let k2: i64 = k.iter().map(|v| v * v).sum();
            let amp = 1.0 / (1.0 + k2 as f64);
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            coeffs[flat] = Complex64::new(re, im) * amp;
        }
        if real {
            let sym = coeffs.clone();
            for flat in 0..grid.len() {
                let k = grid.wavenumber(flat);
                let neg: Vec<i64> = k.iter().map(|v| -v).collect();
                let partner = sym[grid.mode_index(&neg)];
                coeffs[flat] = (sym[flat] + partner.conj()) * 0.5;
            }
        }
        let mut u = TorusGridFn::from_coefficients(grid, coeffs).expect("sizes match");
        if real {
            for v in &mut u.values {
                v.im = 0.0;
            }
        }
        u
    }

    /// Unitary forward transform, in FFT storage order.
    pub fn coefficients(&self) -> Vec<Complex64> {
        let mut c = self.values.clone();
        fft_nd(&mut c, self.grid.dim, self.grid.points_per_dim, FftDirection::Forward);
        c
    }

    /// Coefficient of `exp(i k . x)` in the sense `u = sum c_k exp(i k . x)`.
    pub fn mode_amplitude(&self, k: &[i64]) -> Complex64 {
        let c = self.coefficients();
        c[self.grid.mode_index(k)] / (self.grid.len() as f64).sqrt()
    }

    /// Resample on a finer grid by zero-padding the spectrum. The Nyquist
    /// mode of the source is split symmetrically.
    pub fn refine(&self, points_per_dim: usize) -> Result<Self> {
        let fine = TorusGrid::new(self.grid.dim, points_per_dim, self.grid.period)?;
        if points_per_dim < self.grid.points_per_dim {
            return Err(Error::Input("refinement must not coarsen the grid".into()));
        }
        let c = self.coefficients();
        let scale = (fine.len() as f64 / self.grid.len() as f64).sqrt();
        let half = (self.grid.points_per_dim / 2) as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
        for (flat, &v) in c.iter().enumerate() {
            let k = self.grid.wavenumber(flat);
            let nyq: Vec<usize> = (0..k.len()).filter(|&i| k[i] == -half).collect();
            let share = v * scale / (1u32 << nyq.len()) as f64;
            for mask in 0u32..(1 << nyq.len()) {
                let mut kk = k.clone();
                for (b, &i) in nyq.iter().enumerate() {
                    if mask & (1 << b) != 0 {
                        kk[i] = half;
                    }
                }
                out[fine.mode_index(&kk)] += share;
            }
        }
        TorusGridFn::from_coefficients(fine, out)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `(L/N)^n sum |u_j|^2`, square-rooted.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `(L/N)^n sum u_j conj(v_j)`.
    pub fn inner(&self, other: &TorusGridFn) -> Result<Complex64> {
        self.check_grid(other)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn check_grid(&self, other: &TorusGridFn) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::Input(format!(
                "grid mismatch: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
    }

    pub fn max_real(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    pub fn is_real(&self, tol: f64) -> bool {
        let scale = self.sup_norm().max(1.0);
        self.values.iter().all(|v| v.im.abs() <= tol * scale)
    }

    pub fn scale(&self, c: Complex64) -> TorusGridFn {
        TorusGridFn {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: Complex64, other: &TorusGridFn) -> Result<TorusGridFn> {
        self.check_grid(other)?;
        Ok(TorusGridFn {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        })
    }

    /// Write the little-endian `TGF1` dump: magic, `u32 n`, `u32 N` per
    /// dimension, `f64 L`, then row-major `(f64 re, f64 im)` pairs.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&(self.grid.dim as u32).to_le_bytes())?;
        for _ in 0..self.grid.dim {
            out.write_all(&(self.grid.points_per_dim as u32).to_le_bytes())?;
        }
        out.write_all(&self.grid.period.to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Input("not a TGF1 grid dump".into()));
        }
        let mut u32buf = [0u8; 4];
        input.read_exact(&mut u32buf)?;
        let dim = u32::from_le_bytes(u32buf) as usize;
        if !(1..=3).contains(&dim) {
            return Err(Error::Input(format!("dump dimension {dim} outside 1..=3")));
        }
        let mut sizes = Vec::with_capacity(dim);
        for _ in 0..dim {
            input.read_exact(&mut u32buf)?;
            sizes.push(u32::from_le_bytes(u32buf) as usize);
        }
        if sizes.iter().any(|&s| s != sizes[0]) {
            return Err(Error::Input("dumps with unequal axis sizes are not supported".into()));
        }
        let mut f64buf = [0u8; 8];
        input.read_exact(&mut f64buf)?;
        let grid = TorusGrid::new(dim, sizes[0], f64::from_le_bytes(f64buf))?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            input.read_exact(&mut f64buf)?;
            let re = f64::from_le_bytes(f64buf);
            input.read_exact(&mut f64buf)?;
            values.push(Complex64::new(re, f64::from_le_bytes(f64buf)));
        }
        TorusGridFn::new(grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_in_storage_order() {
        let g = TorusGrid::standard(1, 8).unwrap();
        let ks: Vec<i64> = (0..8).map(|j| g.wavenumber(j)[0]).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert!(g.is_nyquist(4));
        assert_eq!(g.mode_index(&[-1]), 7);
    }

    #[test]
    fn single_mode_coefficient() {
        let g = TorusGrid::standard(2, 16).unwrap();
        let u = TorusGridFn::mode(g, &[3, -2]);
        let a = u.mode_amplitude(&[3, -2]);
        assert!((a - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        assert!(u.mode_amplitude(&[1, 1]).norm() < 1e-13);
    }

    #[test]
    fn real_random_functions_are_real() {
        let g = TorusGrid::standard(2, 16).unwrap();
        let u = TorusGridFn::random_band_limited(g, 4, 3, true);
        assert!(u.values.iter().all(|v| v.im == 0.0));
        let c = u.coefficients();
        for flat in 0..g.len() {
            let k = g.wavenumber(flat);
            if k.iter().any(|v| v.abs() > 4) {
                assert!(c[flat].norm() < 1e-12);
            }
        }
        let again = TorusGridFn::random_band_limited(g, 4, 3, true);
        assert_eq!(u, again);
    }

    #[test]
    fn refine_keeps_samples() {
        let g = TorusGrid::standard(1, 16).unwrap();
        let u = TorusGridFn::random_band_limited(g, 4, 1, false);
        let f = u.refine(64).unwrap();
        for j in 0..16 {
            assert!((f.values[4 * j] - u.values[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn dump_round_trip() {
        let g = TorusGrid::new(2, 8, 3.0).unwrap();
        let u = TorusGridFn::random_band_limited(g, 3, 9, false);
        let mut buf = Vec::new();
        u.write_dump(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 16 * 64);
        assert_eq!(&buf[..4], b"TGF1");
        assert_eq!(TorusGridFn::read_dump(&buf[..]).unwrap(), u);
        assert!(TorusGridFn::read_dump(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::standard(1, 12).is_err());
        assert!(TorusGrid::standard(4, 8).is_err());
        assert!(TorusGrid::standard(1, 4).is_err());
    }
}
