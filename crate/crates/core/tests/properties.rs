//! Randomised invariants of the library.

use num_complex::Complex64;
use proptest::prelude::*;

use subord::feller::check_positive_maximum_principle;
use subord::ndf::{
    eval_psi, saturation_gap, subadditivity_excess, verify_bernstein, verify_lambda_class, BernsteinFamily,
    BernsteinSpec, PsiSpec,
};
use subord::sampling::{log_space, Refinement};
use subord::smooth::SmoothFn;
use subord::symcalc::{
    compose_symbols_leading, inverse_symbol, subordinate_symbol, verify_symbol_class, ClassCheck,
    PhaseFunction, Symbol,
};
use subord::torus::{apply_pdo, bilinear_form, resolvent_solve, sobolev_norm, TorusGrid, TorusGridFn};

fn builtin_psi() -> impl Strategy<Value = PsiSpec> {
    prop_oneof![
        Just(PsiSpec::quadratic(1)),
        (0.1f64..=2.0).prop_map(|r| PsiSpec::power(1, r).unwrap()),
        Just(PsiSpec::log(1)),
        (0.05f64..1.0).prop_map(|e| PsiSpec::mollified(1, e).unwrap()),
        (0.1f64..1.0).prop_map(|a| {
            PsiSpec::subordinate(PsiSpec::quadratic(1), BernsteinSpec::saturated(SmoothFn::Const(a)), 1.0)
                .unwrap()
        }),
    ]
}

fn bernstein_builtin() -> impl Strategy<Value = BernsteinSpec> {
    prop_oneof![
        Just(BernsteinSpec::Identity),
        Just(BernsteinSpec::sqrt()),
        Just(BernsteinSpec::Log1p),
        (0.1f64..5.0).prop_map(|rate| BernsteinSpec::Exponential { rate }),
        (0.1f64..=1.0).prop_map(|e| BernsteinSpec::power(e)),
        (0.1f64..=1.0).prop_map(|a| BernsteinSpec::saturated(SmoothFn::Const(a))),
    ]
}

fn grid(n: usize) -> TorusGrid {
    TorusGrid::standard(1, n).unwrap()
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_nonnegative_and_even(psi in builtin_psi(), xi in -1e3f64..1e3) {
        let a = eval_psi(&psi, &[xi]).unwrap();
        let b = eval_psi(&psi, &[-xi]).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn psi_root_is_subadditive(psi in builtin_psi(), pts in prop::collection::vec(-50f64..50.0, 2..12)) {
        let points: Vec<Vec<f64>> = pts.into_iter().map(|v| vec![v]).collect();
        prop_assert!(subadditivity_excess(&psi, &points).unwrap() <= 1e-12);
    }

    #[test]
    fn square_root_closes_bernstein(inner in bernstein_builtin()) {
        let s = log_space(1e-3, 1e3, 61);
        let x = vec![vec![0.0]];
        let check = |f: BernsteinSpec| verify_bernstein(&BernsteinFamily::new(f), &x, &s, 4, 1e-8).unwrap().pass;
        prop_assume!(check(inner.clone()));
        let composed = BernsteinSpec::Compose { outer: Box::new(BernsteinSpec::sqrt()), inner: Box::new(inner) };
        prop_assert!(check(composed));
    }

    #[test]
    fn lambda_class_pass_survives_refinement(eps in 0.05f64..1.0) {
        let psi = PsiSpec::mollified(1, eps).unwrap();
        let coarse = verify_lambda_class(&psi, 2, &Refinement::torus(1, 32)).unwrap();
        prop_assume!(coarse.pass);
        prop_assert!(verify_lambda_class(&psi, 2, &Refinement::torus(1, 64)).unwrap().pass);
    }

    #[test]
    fn subordinate_derivatives_match_differences(x in 0f64..6.28, xi in 0.5f64..20.0) {
        let fam: BernsteinFamily = BernsteinSpec::saturated(SmoothFn::sin(0.6, 0.3)).into();
        let q = Symbol::shifted_psi(SmoothFn::Const(1.0), 1.0, PsiSpec::quadratic(1)).unwrap();
        let p = subordinate_symbol(&fam, &q, 0.9).unwrap();
        let h = 1e-5;
        let fd_xi = (p.eval(&[x], &[xi + h]).unwrap() - p.eval(&[x], &[xi - h]).unwrap()) / (2.0 * h);
        let fd_x = (p.eval(&[x + h], &[xi]).unwrap() - p.eval(&[x - h], &[xi]).unwrap()) / (2.0 * h);
        let d_xi = p.deriv(&[1], &[0], &[x], &[xi]).unwrap();
        let d_x = p.deriv(&[0], &[1], &[x], &[xi]).unwrap();
        prop_assert!((d_xi - fd_xi).abs() <= 1e-5 * d_xi.abs().max(1e-3), "{d_xi} vs {fd_xi}");
        prop_assert!((d_x - fd_x).abs() <= 1e-5 * d_x.abs().max(1e-3), "{d_x} vs {fd_x}");
    }

    #[test]
    fn identity_subordination_is_exact(x in 0f64..6.28, xi in -30f64..30.0, a in 1usize..3, b in 0usize..3) {
        let q = Symbol::shifted_psi(SmoothFn::cos(2.0, 1.0), 0.5, PsiSpec::quadratic(1)).unwrap();
        let p = subordinate_symbol(&BernsteinSpec::Identity.into(), &q, 2.0).unwrap();
        prop_assert_eq!(p.eval(&[x], &[xi]).unwrap(), q.eval(&[x], &[xi]).unwrap());
        prop_assert_eq!(p.deriv(&[a], &[b], &[x], &[xi]).unwrap(), q.deriv(&[a], &[b], &[x], &[xi]).unwrap());
    }

    #[test]
    fn frozen_symbol_root_is_subadditive(x in 0f64..6.28, pts in prop::collection::vec(-40f64..40.0, 2..10)) {
        let fam: BernsteinFamily = BernsteinSpec::saturated(SmoothFn::sin(0.6, 0.3)).into();
        let p = subordinate_symbol(&fam, &Symbol::psi(PsiSpec::quadratic(1)), 0.9).unwrap();
        let root = |v: f64| p.eval(&[x], &[v]).unwrap().sqrt();
        for &u in &pts {
            for &v in &pts {
                let lhs = root(u + v);
                prop_assert!(lhs - root(u) - root(v) <= 1e-12 * (1.0 + lhs));
            }
        }
    }

    #[test]
    fn inverse_times_shifted_is_one(x in 0f64..6.28, xi in -1e3f64..1e3, lambda in 0.1f64..10.0) {
        let q = Symbol::shifted_psi(SmoothFn::sin(2.0, 1.0), 0.0, PsiSpec::quadratic(1)).unwrap();
        let inv = inverse_symbol(&q, lambda).unwrap();
        let prod = inv.eval(&[x], &[xi]).unwrap() * (q.eval(&[x], &[xi]).unwrap() + lambda);
        prop_assert!((prod - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn constant_coefficient_composition_is_pointwise(a in 0.1f64..5.0, b in 0.1f64..5.0, r in 0.5f64..=2.0) {
        let psi = PsiSpec::power(1, r).unwrap();
        let q1 = Symbol::shifted_psi(SmoothFn::Const(a), 1.0, psi.clone()).unwrap();
        let q2 = Symbol::shifted_psi(SmoothFn::Const(b), 0.0, psi).unwrap();
        let c = compose_symbols_leading(&q1, &q2, 16).unwrap();
        prop_assert_eq!(c.max_abs_remainder, 0.0);
        prop_assert!(c.leading.im.is_none());
        for xi in [-3.0, 0.0, 0.7, 5.0] {
            let want = q1.eval(&[0.0], &[xi]).unwrap() * q2.eval(&[0.0], &[xi]).unwrap();
            prop_assert_eq!(c.leading.eval(&[1.0], &[xi]).unwrap(), Complex64::new(want, 0.0));
        }
    }

    #[test]
    fn multiplier_acts_coefficientwise(psi in builtin_psi(), seed in any::<u64>()) {
        let g = grid(64);
        let p = Symbol::psi(psi);
        let u = TorusGridFn::random_band_limited(g, 31, seed, false);
        let got = apply_pdo(&p, &u).unwrap().coefficients();
        let want: Vec<Complex64> = u
            .coefficients()
            .iter()
            .enumerate()
            .map(|(k, c)| if g.is_nyquist(k) { Complex64::new(0.0, 0.0) } else { c * p.eval(&[0.0], &g.frequency(k)).unwrap() })
            .collect();
        prop_assert!(rel_err(&got, &want) <= 1e-12);
    }

    #[test]
    fn plancherel(seed in any::<u64>(), real in any::<bool>(), n in prop::sample::select(vec![16usize, 64, 256])) {
        let u = TorusGridFn::random_band_limited(grid(n), n / 2, seed, real);
        let a = sobolev_norm(&PsiSpec::quadratic(1), 0.0, &u).unwrap();
        let b = u.l2_norm();
        prop_assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn real_multipliers_are_symmetric(psi in builtin_psi(), seed in any::<u64>()) {
        let u = TorusGridFn::random_band_limited(grid(64), 20, seed, false);
        let b = bilinear_form(&Symbol::psi(psi), &u, &u).unwrap();
        prop_assert!(b.im.abs() <= 1e-10 * b.norm());
    }

    #[test]
    fn resolvent_identity(psi in builtin_psi(), l in 0.1f64..5.0, m in 0.1f64..5.0, seed in any::<u64>()) {
        let p = Symbol::psi(psi);
        let f = TorusGridFn::random_band_limited(grid(64), 20, seed, false);
        let solve = |lam: f64, rhs: &TorusGridFn| resolvent_solve(&p, lam, rhs, 1e-12, 0).unwrap().u;
        let lhs = solve(l, &f).axpy(Complex64::new(-1.0, 0.0), &solve(m, &f)).unwrap();
        let rhs = solve(l, &solve(m, &f)).scale(Complex64::new(m - l, 0.0));
        let scale = f.l2_norm() / l.min(m);
        let gap: f64 = lhs.axpy(Complex64::new(-1.0, 0.0), &rhs).unwrap().l2_norm();
        prop_assert!(gap <= 1e-9 * scale, "{gap} vs {scale}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn saturation_inequality(a in 0f64..=1e3, t in 0f64..=1e3) {
        prop_assert!(saturation_gap(a, t) >= -f64::EPSILON);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn class_pass_is_monotone_in_order(a in 1.0f64..3.0, b in 0.0f64..0.9, bump in 0.0f64..1.0) {
        let q = Symbol::shifted_psi(SmoothFn::sin(a, b.min(a - 0.1)), 1.0, PsiSpec::quadratic(1)).unwrap();
        let check = ClassCheck::rho(2, 1, 0.1);
        let r = Refinement::torus(1, 32);
        let psi = PsiSpec::quadratic(1);
        let low = verify_symbol_class(&q, 2.0, &psi, check, &r).unwrap();
        prop_assume!(low.pass);
        prop_assert!(verify_symbol_class(&q, 2.0 + bump, &psi, check, &r).unwrap().pass);
    }

    #[test]
    fn pmp_verdict_ignores_positive_scaling(c in 0.01f64..100.0, seed in any::<u64>()) {
        let fam: BernsteinFamily = BernsteinSpec::saturated(SmoothFn::sin(0.6, 0.3)).into();
        let p = subordinate_symbol(&fam, &Symbol::psi(PsiSpec::quadratic(1)), 0.9).unwrap();
        let scaled = p.scaled(c);
        prop_assert!(scaled.dim() == p.dim() && !PhaseFunction::is_x_independent(&scaled));
        let a = check_positive_maximum_principle(&p, grid(64), 20, seed).unwrap();
        let b = check_positive_maximum_principle(&scaled, grid(64), 20, seed).unwrap();
        prop_assert_eq!(a.pass(), b.pass());
        let (ca, cb) = (&a.checks[0], &b.checks[0]);
        prop_assert_eq!(&ca.location, &cb.location);
        prop_assert_eq!(ca.skipped, cb.skipped);
    }
}
