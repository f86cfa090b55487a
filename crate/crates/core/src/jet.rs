//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients of a smooth function around a
//! base point, up to a fixed total degree, in a fixed number of variables.
//! Arithmetic and elementary functions act on jets exactly (up to
//! floating-point rounding), so composing built-in symbols through jets
//! yields every mixed partial derivative by the multivariate chain rule.
//!
//! Coefficients are stored as Taylor coefficients, i.e. `d^a f / a!`.
//! [`Jet::derivative`] converts back.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Monomial layout and product table for jets of given `nvars` / `order`.
pub struct JetSpace {
    nvars: usize,
    order: usize,
    monomials: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    products: Vec<(u32, u32, u32)>,
    // per variable: (source index, index in the order-1 space, multiplicity)
    diff_maps: Vec<Vec<(usize, usize, f64)>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("nvars", &self.nvars)
            .field("order", &self.order)
            .field("len", &self.monomials.len())
            .finish()
    }
}

fn enumerate_monomials(nvars: usize, order: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for deg in 0..=order {
        let mut current = vec![0u8; nvars];
        fill(&mut out, &mut current, 0, deg);
    }
    out
}

fn fill(out: &mut Vec<Vec<u8>>, current: &mut [u8], pos: usize, remaining: usize) {
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == current.len() - 1 {
        current[pos] = remaining as u8;
        out.push(current.to_vec());
        current[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e as u8;
        fill(out, current, pos + 1, remaining - e);
    }
    current[pos] = 0;
}

impl JetSpace {
    fn build(nvars: usize, order: usize) -> Self {
        let monomials = enumerate_monomials(nvars, order);
        let degrees: Vec<usize> = monomials
            .iter()
            .map(|m| m.iter().map(|&e| e as usize).sum())
            .collect();
        let lookup: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();

        let mut products = Vec::new();
        for (i, mi) in monomials.iter().enumerate() {
            for (j, mj) in monomials.iter().enumerate() {
                if degrees[i] + degrees[j] > order {
                    continue;
                }
                let sum: Vec<u8> = mi.iter().zip(mj).map(|(a, b)| a + b).collect();
                let k = lookup[&sum];
                products.push((i as u32, j as u32, k as u32));
            }
        }

        let mut diff_maps = Vec::with_capacity(nvars);
        if order > 0 {
            let lower = enumerate_monomials(nvars, order - 1);
            let lower_lookup: HashMap<Vec<u8>, usize> = lower
                .iter()
                .enumerate()
                .map(|(i, m)| (m.clone(), i))
                .collect();
            for v in 0..nvars {
                let mut map = Vec::new();
                for (i, m) in monomials.iter().enumerate() {
                    if m[v] == 0 {
                        continue;
                    }
                    let mut reduced = m.clone();
                    reduced[v] -= 1;
                    if let Some(&dst) = lower_lookup.get(&reduced) {
                        map.push((i, dst, m[v] as f64));
                    }
                }
                diff_maps.push(map);
            }
        }

        JetSpace {
            nvars,
            order,
            monomials,
            lookup,
            products,
            diff_maps,
        }
    }

    /// Shared space for `nvars` variables truncated at total degree `order`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Vec<u8>] {
        &self.monomials
    }

    pub fn index_of(&self, multi: &[u8]) -> Option<usize> {
        self.lookup.get(multi).copied()
    }
}

/// Truncated Taylor polynomial around an implicit base point.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.space.nvars)
            .field("order", &self.space.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Jet {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    /// The coordinate function `t_var` shifted to `value` at the base point.
    pub fn variable(space: &Arc<JetSpace>, var: usize, value: f64) -> Jet {
        let mut jet = Jet::constant(space, value);
        if space.order > 0 {
            let mut e = vec![0u8; space.nvars];
            e[var] = 1;
            let idx = space.lookup[&e];
            jet.coeffs[idx] = 1.0;
        }
        jet
    }

    /// Jet with the given Taylor coefficients, in `space.monomials()` order.
    pub fn from_coeffs(space: &Arc<JetSpace>, coeffs: Vec<f64>) -> Jet {
        assert_eq!(coeffs.len(), space.len(), "coefficient count mismatch");
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Taylor coefficient of the given monomial (zero beyond the truncation).
    pub fn coeff(&self, multi: &[u8]) -> f64 {
        self.space
            .index_of(multi)
            .map(|i| self.coeffs[i])
            .unwrap_or(0.0)
    }

    /// Mixed partial derivative `d^multi f` at the base point.
    pub fn derivative(&self, multi: &[u8]) -> f64 {
        let scale: f64 = multi.iter().map(|&e| factorial(e as usize)).product();
        self.coeff(multi) * scale
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    fn check_space(&self, other: &Jet) {
        assert!(
            Arc::ptr_eq(&self.space, &other.space),
            "jets from different spaces combined"
        );
    }

    fn mul_ref(&self, other: &Jet) -> Jet {
        self.check_space(other);
        let mut out = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.space.products {
            let a = self.coeffs[i as usize];
            if a == 0.0 {
                continue;
            }
            out[k as usize] += a * other.coeffs[j as usize];
        }
        Jet {
            space: self.space.clone(),
            coeffs: out,
        }
    }

    /// `g(self)` where `derivs[k] = g^(k)(self.value())` for `k <= order`.
    ///
    /// Non-finite derivatives poison every coefficient they touch, so a
    /// function that is not smooth at the base point yields a non-finite jet.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let order = self.space.order;
        assert!(derivs.len() > order, "need derivatives up to the jet order");
        let mut nilpotent = self.clone();
        nilpotent.coeffs[0] = 0.0;

        let mut out = Jet::constant(&self.space, derivs[0]);
        let mut power = Jet::constant(&self.space, 1.0);
        for (k, &d) in derivs.iter().enumerate().take(order + 1).skip(1) {
            power = power.mul_ref(&nilpotent);
            let scale = d / factorial(k);
            if scale == 0.0 {
                continue;
            }
            for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs).skip(1) {
                *o += scale * p;
            }
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&vec![e; self.space.order + 1])
    }

    pub fn ln(&self) -> Jet {
        let u = self.value();
        let mut d = Vec::with_capacity(self.space.order + 1);
        d.push(u.ln());
        for k in 1..=self.space.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign * factorial(k - 1) / u.powi(k as i32));
        }
        self.compose(&d)
    }

    pub fn powf(&self, r: f64) -> Jet {
        let u = self.value();
        let mut d = Vec::with_capacity(self.space.order + 1);
        let mut falling = 1.0;
        for k in 0..=self.space.order {
            if k > 0 {
                falling *= r - (k as f64 - 1.0);
            }
            if falling == 0.0 {
                d.push(0.0);
            } else {
                d.push(falling * u.powf(r - k as f64));
            }
        }
        self.compose(&d)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.space.order).map(|k| cycle[k % 4]).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.space.order).map(|k| cycle[k % 4]).collect();
        self.compose(&d)
    }

    /// `self^y` for a jet exponent, via `exp(y ln self)`; requires a positive base.
    pub fn pow_jet(&self, exponent: &Jet) -> Jet {
        (exponent * &self.ln()).exp()
    }

    pub fn div(&self, other: &Jet) -> Jet {
        self * &other.recip()
    }

    /// Partial derivative in `var`, returned in the space of order - 1.
    pub fn differentiate(&self, var: usize) -> Jet {
        let order = self.space.order;
        assert!(order > 0, "cannot differentiate an order-0 jet");
        let lower = JetSpace::get(self.space.nvars, order - 1);
        let mut coeffs = vec![0.0; lower.len()];
        for &(src, dst, mult) in &self.space.diff_maps[var] {
            coeffs[dst] += mult * self.coeffs[src];
        }
        Jet {
            space: lower,
            coeffs,
        }
    }

    /// Drop every coefficient above `space.order()`.
    pub fn truncate(&self, space: &Arc<JetSpace>) -> Jet {
        assert_eq!(space.nvars, self.space.nvars);
        assert!(space.order <= self.space.order);
        let coeffs = space
            .monomials
            .iter()
            .map(|m| self.coeff(m))
            .collect();
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    /// Largest total degree retained.
    pub fn order(&self) -> usize {
        self.space.order
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &'a Jet) -> Jet {
        self.mul_ref(rhs)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_ref(&rhs)
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &'a Jet) -> Jet {
        self.check_space(rhs);
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &'a Jet) -> Jet {
        self.check_space(rhs);
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var1(order: usize, x0: f64) -> Jet {
        let space = JetSpace::get(1, order);
        Jet::variable(&space, 0, x0)
    }

    #[test]
    fn monomial_count_matches_binomial() {
        // C(n + K, K)
        assert_eq!(JetSpace::get(2, 4).len(), 15);
        assert_eq!(JetSpace::get(4, 4).len(), 70);
        assert_eq!(JetSpace::get(1, 0).len(), 1);
    }

    #[test]
    fn exp_derivatives_are_exp() {
        let j = var1(5, 0.3).exp();
        for k in 0..=5u8 {
            assert!((j.derivative(&[k]) - 0.3f64.exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn powf_matches_closed_form() {
        let j = var1(3, 2.0).powf(1.5);
        assert!((j.derivative(&[0]) - 2f64.powf(1.5)).abs() < 1e-14);
        assert!((j.derivative(&[1]) - 1.5 * 2f64.sqrt()).abs() < 1e-14);
        assert!((j.derivative(&[2]) - 0.75 / 2f64.sqrt()).abs() < 1e-14);
        assert!((j.derivative(&[3]) + 0.375 / 2f64.powf(1.5)).abs() < 1e-14);
    }

    #[test]
    fn sqrt_of_square_at_origin_is_not_smooth() {
        let space = JetSpace::get(1, 2);
        let t = Jet::variable(&space, 0, 0.0);
        let abs = (&t * &t).sqrt();
        assert_eq!(abs.value(), 0.0);
        assert!(!abs.derivative(&[1]).is_finite());
    }

    #[test]
    fn integer_power_at_zero_stays_finite() {
        let space = JetSpace::get(1, 4);
        let t = Jet::variable(&space, 0, 0.0);
        let sq = (&t * &t).powf(1.0);
        assert!(sq.is_finite());
        assert_eq!(sq.derivative(&[2]), 2.0);
    }

    #[test]
    fn mixed_partials_of_product() {
        // f(x, y) = x^2 y^3 at (1, 2): f_xy = 2x * 3y^2 = 24
        let space = JetSpace::get(2, 4);
        let x = Jet::variable(&space, 0, 1.0);
        let y = Jet::variable(&space, 1, 2.0);
        let f = &(&x * &x) * &(&(&y * &y) * &y);
        assert!((f.derivative(&[1, 1]) - 24.0).abs() < 1e-12);
        assert!((f.derivative(&[2, 2]) - 2.0 * 6.0 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn differentiate_lowers_order() {
        let space = JetSpace::get(2, 3);
        let x = Jet::variable(&space, 0, 0.5);
        let y = Jet::variable(&space, 1, -1.0);
        let f = (&x * &y).sin();
        let fx = f.differentiate(0);
        assert_eq!(fx.order(), 2);
        // d/dx sin(xy) = y cos(xy); d/dy of that = cos(xy) - xy sin(xy)
        let xy = -0.5f64;
        assert!((fx.value() - (-1.0) * xy.cos()).abs() < 1e-14);
        assert!((fx.derivative(&[0, 1]) - (xy.cos() - xy * xy.sin())).abs() < 1e-13);
    }

    #[test]
    fn ln_inverts_exp() {
        let j = var1(4, 0.7);
        let round = j.exp().ln();
        for (a, b) in round.coeffs().iter().zip(j.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
