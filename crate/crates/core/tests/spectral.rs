use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rieszcert::grid::GridFunction2D;
use rieszcert::spectral::*;
use rieszcert::{Error, Params};

fn pr(p: f64, tau: f64) -> Params {
    Params::new(p, tau).unwrap()
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

fn random_field(n: usize, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut f = SpectralField::from_real(n, 1.0, &vals).unwrap();
    f.remove_mean();
    f
}

fn band_limited(n: usize, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> =
        (0..6).map(|_| (rng.gen_range(1..5) as f64, rng.gen_range(0..5) as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.0))).collect();
    SpectralField::from_fn(n, 1.0, move |x, y| {
        c(modes.iter().map(|&(a, b, w, ph)| w * (PI * (a * x + b * y) + ph).cos()).sum())
    })
    .unwrap()
}

#[test]
fn cosine_is_an_eigenfunction() {
    let l = 1.5;
    let f = SpectralField::from_fn(64, l, |x, _| c((PI * x / l).cos())).unwrap();
    let r1 = f.riesz_square(1).unwrap();
    let r2 = f.riesz_square(2).unwrap();
    let neg: Vec<Complex64> = f.values().iter().map(|v| -v).collect();
    assert!(max_diff(r1.values(), &neg) < 1e-12);
    assert!(r2.values().iter().all(|v| v.norm() < 1e-12));
}

#[test]
fn squares_sum_to_minus_identity() {
    for seed in 0..5 {
        let f = random_field(48, seed);
        let a = f.riesz_square(1).unwrap();
        let b = f.riesz_square(2).unwrap();
        let s: Vec<Complex64> = a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect();
        let neg: Vec<Complex64> = f.values().iter().map(|v| -v).collect();
        assert!(max_diff(&s, &neg) <= 1e-12, "{seed}");
    }
}

#[test]
fn squares_commute() {
    let f = band_limited(64, 9);
    let ab = f.riesz_square(2).unwrap().riesz_square(1).unwrap();
    let ba = f.riesz_square(1).unwrap().riesz_square(2).unwrap();
    assert!(max_diff(ab.values(), ba.values()) <= 1e-12);
}

#[test]
fn cosine_norm_ratio() {
    let f = SpectralField::from_fn(64, 1.0, |x, _| c((PI * x).cos())).unwrap();
    let r = norm_ratio(&pr(2.0, 0.0), &f).unwrap();
    assert!((r.ratio - 1.0).abs() < 1e-12);
    for &(p, t) in &[(3.0, 0.5), (1.5, 2.0), (4.0, 1.0)] {
        let r = norm_ratio(&pr(p, t), &f).unwrap();
        assert!((r.ratio - (1.0 + t * t).sqrt()).abs() < 1e-10, "{p} {t}: {r:?}");
        assert!((r.ratio - r.ratio_via_phi).abs() < 1e-10);
    }
    let zero = SpectralField::new(16, 1.0, vec![c(0.0); 256]).unwrap();
    assert!(matches!(norm_ratio(&pr(2.0, 0.0), &zero), Err(Error::ZeroDenominator(_))));
}

#[test]
fn mean_is_removed_and_reported() {
    let f = SpectralField::from_fn(32, 1.0, |x, _| c((PI * x).cos() + 0.25)).unwrap();
    let r = norm_ratio(&pr(2.0, 0.0), &f).unwrap();
    assert!((r.mean_correction - 0.25).abs() < 1e-12);
    assert!((r.ratio - 1.0).abs() < 1e-12);
}

fn bump(n: usize) -> GridFunction2D {
    GridFunction2D::from_fn(n, 1.0, |x, y| {
        if x.abs() > 0.85 || y.abs() > 0.85 {
            0.0
        } else {
            (-(x * x + 2.0 * y * y) / 0.02).exp() * (1.0 + x)
        }
    })
    .unwrap()
}

#[test]
fn cross_check_on_bump() {
    let e = cross_check_identity(&bump(1024)).unwrap();
    assert!(e <= 1e-6, "{e}");
    let coarse = cross_check_identity(&bump(256)).unwrap();
    assert!(coarse > e);
    assert_eq!(cross_check_identity(&GridFunction2D::zeros(64, 1.0).unwrap()).unwrap(), 0.0);
    let wide = GridFunction2D::from_fn(128, 1.0, |x, y| (-(x * x + y * y)).exp()).unwrap();
    assert!(matches!(cross_check_identity(&wide), Err(Error::Wraparound(_))));
}

#[test]
fn heat_identity_at_zero() {
    let f = band_limited(32, 1);
    assert_eq!(f.heat_extension(0.0).unwrap(), f);
    assert!(f.heat_extension(-1.0).is_err());
}

#[test]
fn heat_on_gaussian() {
    let l = 1.0;
    let s = l / 16.0;
    let t = s * s;
    let n = 256;
    let g = |x: f64, y: f64, var: f64| ((x - l).powi(2) + (y - l).powi(2)) / (2.0 * var);
    let f = SpectralField::from_fn(n, l, |x, y| c((-g(x, y, s * s)).exp())).unwrap();
    let want = SpectralField::from_fn(n, l, |x, y| c(s * s / (s * s + t) * (-g(x, y, s * s + t)).exp())).unwrap();
    let got = f.heat_extension(t).unwrap();
    let peak = want.values().iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let err = max_diff(got.values(), want.values()) / peak;
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn heat_semigroup() {
    let f = band_limited(64, 4);
    let two = f.heat_extension(0.1).unwrap().heat_extension(0.2).unwrap();
    let one = f.heat_extension(0.3).unwrap();
    assert!(max_diff(two.values(), one.values()) <= 1e-12);
}

#[test]
fn parseval() {
    let f = random_field(64, 7);
    let n2 = 64.0 * 64.0;
    let e: f64 = f.values().iter().map(|v| v.norm_sqr()).sum();
    let hat: f64 = f.forward().iter().map(|v| v.norm_sqr()).sum::<f64>() / n2;
    assert!((e - hat).abs() <= 1e-12 * e);
    let back = f.from_hat(f.forward());
    assert!(max_diff(back.values(), f.values()) <= 1e-12);
}

fn tile(f: &SpectralField) -> SpectralField {
    let n = f.n();
    let m = 2 * n;
    let mut v = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            v.push(f.values()[(i % n) * n + j % n]);
        }
    }
    SpectralField::new(m, f.half_period(), v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn l2_ratio_bounded(seed in 0u64..10_000) {
        let r = norm_ratio(&pr(2.0, 0.0), &random_field(32, seed)).unwrap();
        prop_assert!(r.ratio <= 1.0 + 1e-10, "{}", r.ratio);
    }

    #[test]
    fn dilation_invariance(seed in 0u64..10_000, p in 1.2f64..5.0, tau in 0.0f64..2.0) {
        let q = pr(p, tau);
        let f = random_field(16, seed);
        let base = norm_ratio(&q, &f).unwrap().ratio;
        let tiled = norm_ratio(&q, &tile(&f)).unwrap().ratio;
        prop_assert!((base - tiled).abs() <= 1e-10 * base, "{} {}", base, tiled);
        let stretched = SpectralField::new(16, 3.7, f.values().to_vec()).unwrap();
        let s = norm_ratio(&q, &stretched).unwrap().ratio;
        prop_assert!((base - s).abs() <= 1e-10 * base);
    }
}
