use proptest::prelude::*;

use rieszcert::matrix::SymMat2;
use rieszcert::measures::*;
use rieszcert::Params;

const E: f64 = std::f64::consts::E;

fn pr(p: f64, tau: f64) -> Params {
    Params::new(p, tau).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn mass_and_barycenter() {
    let m = ContinuousLaminate::new(pr(4.0, 0.0), 100.0, Family::Standard).unwrap();
    assert!(close(m.mass(), 1.0, 1e-14));
    let b = m.barycenter();
    assert!((b.a11 - 1.0).abs() < 1e-12 && (b.a22 - 1.0).abs() < 1e-12 && b.a12 == 0.0);
    let f = ContinuousLaminate::new(pr(4.0, 0.0), 100.0, Family::Flipped).unwrap();
    assert!((f.barycenter().a11 + 1.0).abs() < 1e-12);
    for fam in [Family::Standard, Family::Flipped] {
        let nu = CompositeLaminate::nu(pr(3.0, 0.5), 1e6, fam).unwrap();
        assert!(close(nu.mass(), 1.0, 1e-14));
        assert!(nu.barycenter().frobenius() < 1e-12);
        let one = nu.integrate(&Integrand::constant(1.0), Quadrature::ClosedForm).unwrap();
        assert!(close(one, 1.0, 1e-14));
    }
}

#[test]
fn phi_integrals_at_two() {
    let m = ContinuousLaminate::new(pr(2.0, 0.0), E, Family::Standard).unwrap();
    for q in [Quadrature::ClosedForm, Quadrature::default()] {
        let i2 = m.integrate(&Integrand::phi2(pr(2.0, 0.0)), q).unwrap();
        let i1 = m.integrate(&Integrand::phi1(pr(2.0, 0.0)), q).unwrap();
        assert!(close(i2, 6.0, 1e-9), "{i2}");
        assert!(close(i1, 2.0, 1e-9), "{i1}");
    }
}

#[test]
fn atom_term_uses_tau() {
    // the atom diag(N, N) contributes (2 tau N)^p N^-p
    let p = pr(3.0, 0.7);
    let m = ContinuousLaminate::new(p, 50.0, Family::Standard).unwrap();
    let k = p.k_lam;
    let log_term = p.p * ((1.0 - k).powi(2) + 0.49 * (1.0 + k).powi(2)).powf(1.5) * 50f64.ln();
    let i1 = m.integrate(&Integrand::phi1(p), Quadrature::ClosedForm).unwrap();
    assert!(close(i1, log_term + 1.4f64.powi(3), 1e-12), "{i1}");
}

#[test]
fn nu_ratio_at_two() {
    let p = pr(2.0, 0.0);
    for &l in &[5.0f64, 20.0] {
        let nu = CompositeLaminate::nu(p, l.exp(), Family::Standard).unwrap();
        let want = (0.25 * 2.0 * l + 0.25 * 4.0 + 0.5) / (0.25 * (2.0 * l + 4.0) + 0.5);
        let r = ratio(&p, &nu, Quadrature::ClosedForm).unwrap();
        assert!(close(r, want, 1e-13), "{r} {want}");
    }
}

#[test]
fn burkholder_constant_examples() {
    assert!(close(pr(4.0 / 3.0, 0.0).c_b, 3f64.powf(4.0 / 3.0), 1e-14));
    assert!((pr(4.0 / 3.0, 0.0).c_b - 4.3267).abs() < 1e-4);
    assert_eq!(pr(4.0, 0.0).c_b, 81.0);
}

#[test]
fn ratio_converges_for_moderate_p() {
    for &(p, t) in &[(3.0, 0.5), (1.5, 0.5)] {
        let q = pr(p, t);
        let mut last = f64::INFINITY;
        for &l in &[10.0, 20.0, 40.0] {
            let nu = CompositeLaminate::nu_for(q, f64::exp(l)).unwrap();
            let err = (q.c_b - ratio(&q, &nu, Quadrature::ClosedForm).unwrap()).abs();
            assert!(err * l <= 10.0 * (1.0 + q.c_b), "{p} {t} {l}: {err}");
            assert!(err <= last);
            last = err;
        }
    }
}

#[test]
fn biconvex_examples() {
    let xy = Integrand::diagonal_homogeneous(|x, y| x * y, 2.0);
    for &k in &[0.1, 0.5, 0.9] {
        for &n in &[10.0, 1e3, 1e6] {
            let s = verify_biconvex_inequality(k, n, &xy, Quadrature::ClosedForm).unwrap();
            assert!(s.abs() <= 1e-9, "{k} {n}: {s}");
        }
    }
    let x2 = Integrand::diagonal_homogeneous(|x, _| x * x, 2.0);
    let s = verify_biconvex_inequality(0.5, 1e12, &x2, Quadrature::ClosedForm).unwrap();
    assert!((s - 0.25).abs() <= 1e-6, "{s}");
    let one = Integrand::constant(1.0);
    let s = verify_biconvex_inequality(0.3, 100.0, &one, Quadrature::ClosedForm).unwrap();
    assert!(s.abs() < 1e-14);
    assert!(verify_biconvex_inequality(1.0, 10.0, &one, Quadrature::ClosedForm).is_err());
}

#[test]
fn biconvex_library() {
    let softplus = |x: f64| if x > 30.0 { x } else { x.exp().ln_1p() };
    let library: Vec<Integrand> = vec![
        Integrand::diagonal(|x, y| 2.0 * x * y - x + 3.0 * y + 1.0),
        Integrand::diagonal(|x, y| x * x + y * y),
        Integrand::diagonal(|x, y| (x * x + 1e-6).sqrt() + (y * y + 1e-6).sqrt()),
        Integrand::diagonal(move |x, y| softplus(x) * softplus(y)),
    ];
    for f in &library {
        for &k in &[-0.5, 0.2, 0.6] {
            let s = verify_biconvex_inequality(k, 40.0, f, Quadrature::default()).unwrap();
            assert!(s >= -1e-9, "{k}: {s}");
        }
    }
    let concave = Integrand::diagonal(|x, _| -x * x);
    assert!(verify_biconvex_inequality(0.5, 10.0, &concave, Quadrature::default()).is_err());
}

#[test]
fn splitting_examples() {
    let c = verify_splitting_inequalities(0.0, 1.0, 0.1, |_, y| y * y, 1e-12).unwrap();
    assert!(close(c.lambda, 10.0 / 11.0, 1e-15));
    assert!(c.lambda_barycenter_defect < 1e-15 && c.mu_barycenter_defect < 1e-15);
    assert!(c.second_variable && c.first_variable);
    let affine = |x: f64, y: f64| 2.0 * x - 3.0 * y + 0.5;
    let c = verify_splitting_inequalities(0.4, 2.0, 0.3, affine, 1e-12).unwrap();
    assert!(c.second_variable && c.first_variable);
    let l = lambda_eps(0.4, 2.0, 0.3);
    let lhs = affine(2.0, 2.0);
    let rhs = l * affine(2.0, 2.3) + (1.0 - l) * affine(2.0, 0.8);
    assert!((lhs - rhs).abs() < 1e-12);
    assert!(verify_splitting_inequalities(0.0, 0.5, 0.1, affine, 1e-12).is_err());
}

fn params_strategy() -> impl Strategy<Value = Params> {
    (1.2f64..6.0, 0.0f64..2.0).prop_map(|(p, t)| pr(p, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_form_matches_adaptive(q in params_strategy(), l in 0.5f64..12.0, flipped in prop::bool::ANY) {
        let fam = if flipped { Family::Flipped } else { Family::Standard };
        let m = ContinuousLaminate::new(q, l.exp(), fam).unwrap();
        let ad = Quadrature::Adaptive { tol: 1e-10 };
        for f in [Integrand::phi1(q), Integrand::phi2(q), Integrand::constant(1.0)] {
            let a = m.integrate(&f, Quadrature::ClosedForm).unwrap();
            let b = m.integrate(&f, ad).unwrap();
            prop_assert!(close(a, b, 1e-8), "{} {}", a, b);
        }
        let one = Integrand::new(|_| 1.0);
        prop_assert!(close(m.integrate(&one, ad).unwrap(), m.mass(), 1e-9));
        let tr = Integrand::new(|a| a.a11);
        prop_assert!((m.integrate(&tr, ad).unwrap() - m.barycenter().a11).abs() <= 1e-8);
        let tr = Integrand::new(|a| a.a22);
        prop_assert!((m.integrate(&tr, ad).unwrap() - m.barycenter().a22).abs() <= 1e-8);
    }

    #[test]
    fn jensen_for_single_entry_convex(q in params_strategy(), l in 1.0f64..8.0, c in -2.0f64..2.0, which in 0usize..3) {
        let nu = CompositeLaminate::nu_for(q, l.exp()).unwrap();
        let entry = move |a: &SymMat2| match which { 0 => a.a11, 1 => a.a22, _ => a.a12 };
        let f = Integrand::new(move |a| { let x = entry(a) - c; (x * x + 1.0).sqrt() });
        let lhs = f.eval(&nu.barycenter());
        let rhs = nu.integrate(&f, Quadrature::default()).unwrap();
        prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()), "{} {}", lhs, rhs);
    }

    #[test]
    fn biconvex_slack_nonnegative(k in -0.8f64..0.8, n in 2.0f64..200.0, a in 0.0f64..2.0, b in -1.0f64..1.0) {
        let f = Integrand::diagonal(move |x, y| a * x * x + b * x * y + y * y + (x * x + 1.0).sqrt());
        let s = verify_biconvex_inequality(k, n, &f, Quadrature::default()).unwrap();
        prop_assert!(s >= -1e-9, "{}", s);
    }
}
