//! Probability measures on symmetric 2x2 matrices.
//!
//! [`ContinuousLaminate`] is the one-parameter family with density
//! `t^{-p-1}/(1-k)` on the rays `diag(s k t, t)` and `diag(s t, k t)`,
//! `t in [1, N]`, and an atom `N^{-p}` at `diag(s N, N)`, where `s = 1` for
//! the standard family and `s = -1` for the flipped one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymMat2;
use crate::params::Params;
use crate::quadrature::adaptive_simpson;

pub const DEFAULT_TOL: f64 = 1e-10;
const WEIGHT_SUM_TOL: f64 = 1e-12;
const MIDPOINT_SAMPLES: usize = 200;

pub fn phi1(params: &Params, a: &SymMat2) -> f64 {
    let d = a.a11 - a.a22;
    let s = a.a11 + a.a22;
    (d * d + params.tau * params.tau * s * s).powf(params.p / 2.0)
}

pub fn phi2(params: &Params, a: &SymMat2) -> f64 {
    (a.a11 + a.a22).abs().powf(params.p)
}

/// A test function on matrices, optionally tagged with a degree of
/// homogeneity `d` (`f(cA) = c^d f(A)` for `c > 0`), which enables the
/// closed-form integration mode.
pub struct Integrand {
    f: Box<dyn Fn(&SymMat2) -> f64 + Send + Sync>,
    degree: Option<f64>,
}

impl Integrand {
    pub fn new(f: impl Fn(&SymMat2) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Box::new(f), degree: None }
    }

    pub fn homogeneous(f: impl Fn(&SymMat2) -> f64 + Send + Sync + 'static, degree: f64) -> Self {
        Self { f: Box::new(f), degree: Some(degree) }
    }

    /// A function of the diagonal entries.
    pub fn diagonal(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(move |a| f(a.a11, a.a22))
    }

    pub fn diagonal_homogeneous(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, degree: f64) -> Self {
        Self::homogeneous(move |a| f(a.a11, a.a22), degree)
    }

    pub fn phi1(params: Params) -> Self {
        Self::homogeneous(move |a| phi1(&params, a), params.p)
    }

    pub fn phi2(params: Params) -> Self {
        Self::homogeneous(move |a| phi2(&params, a), params.p)
    }

    pub fn constant(c: f64) -> Self {
        Self::homogeneous(move |_| c, 0.0)
    }

    pub fn eval(&self, a: &SymMat2) -> f64 {
        (self.f)(a)
    }

    pub fn degree(&self) -> Option<f64> {
        self.degree
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Quadrature {
    /// Exact antiderivatives of `t^a`; needs a homogeneous integrand.
    ClosedForm,
    /// Adaptive Simpson on `log t`, tolerance relative to `1 + |integral|`.
    Adaptive { tol: f64 },
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::Adaptive { tol: DEFAULT_TOL }
    }
}

/// Operations shared by all measures here.
pub trait MatrixMeasure {
    fn mass(&self) -> f64;
    fn barycenter(&self) -> SymMat2;
    fn integrate(&self, f: &Integrand, q: Quadrature) -> Result<f64>;
}

/// Finitely many weighted atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, SymMat2)>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(f64, SymMat2)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::WeightSum(0.0));
        }
        for (w, a) in &atoms {
            if !(*w > 0.0 && *w <= 1.0 + WEIGHT_SUM_TOL) || !a.is_finite() {
                return Err(Error::InvalidParameter(format!("atom weight {w} at {a:?}")));
            }
        }
        let total: f64 = atoms.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightSum(total));
        }
        Ok(Self { atoms })
    }

    pub fn dirac(a: SymMat2) -> Self {
        Self { atoms: vec![(1.0, a)] }
    }

    pub fn atoms(&self) -> &[(f64, SymMat2)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn expect(&self, f: impl Fn(&SymMat2) -> f64) -> f64 {
        self.atoms.iter().map(|(w, a)| w * f(a)).sum()
    }
}

impl MatrixMeasure for AtomicMeasure {
    fn mass(&self) -> f64 {
        self.atoms.iter().map(|(w, _)| w).sum()
    }

    fn barycenter(&self) -> SymMat2 {
        self.atoms.iter().fold(SymMat2::ZERO, |acc, (w, a)| acc + *w * *a)
    }

    fn integrate(&self, f: &Integrand, _q: Quadrature) -> Result<f64> {
        Ok(self.expect(|a| f.eval(a)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Rays in the positive quadrant, barycenter `diag(1, 1)`.
    Standard,
    /// First entries negated, barycenter `diag(-1, 1)`.
    Flipped,
}

impl Family {
    /// The family whose ratio tends to the sharp constant for this `p`.
    pub fn for_p(p: f64) -> Self {
        if p > 2.0 {
            Family::Flipped
        } else {
            Family::Standard
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Family::Standard => 1.0,
            Family::Flipped => -1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct LaminateSpec {
    family: Family,
    p: f64,
    tau: f64,
    n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LaminateSpec", into = "LaminateSpec")]
pub struct ContinuousLaminate {
    params: Params,
    n: f64,
    family: Family,
}

impl TryFrom<LaminateSpec> for ContinuousLaminate {
    type Error = Error;
    fn try_from(s: LaminateSpec) -> Result<Self> {
        Self::new(Params::new(s.p, s.tau)?, s.n, s.family)
    }
}

impl From<ContinuousLaminate> for LaminateSpec {
    fn from(m: ContinuousLaminate) -> Self {
        LaminateSpec { family: m.family, p: m.params.p, tau: m.params.tau, n: m.n }
    }
}

impl ContinuousLaminate {
    pub fn new(params: Params, n: f64, family: Family) -> Result<Self> {
        if !(n.is_finite() && n > 1.0) {
            return Err(Error::InvalidParameter(format!("N must be > 1, got {n}")));
        }
        Ok(Self { params, n, family })
    }

    pub fn for_params(params: Params, n: f64) -> Result<Self> {
        Self::new(params, n, Family::for_p(params.p))
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn k(&self) -> f64 {
        self.params.k_lam
    }

    pub fn ray_a(&self, t: f64) -> SymMat2 {
        SymMat2::diag(self.family.sign() * self.k() * t, t)
    }

    pub fn ray_b(&self, t: f64) -> SymMat2 {
        SymMat2::diag(self.family.sign() * t, self.k() * t)
    }

    pub fn atom(&self) -> SymMat2 {
        SymMat2::diag(self.family.sign() * self.n, self.n)
    }

    pub fn atom_weight(&self) -> f64 {
        self.n.powf(-self.params.p)
    }

    /// Density of each ray with respect to `dt`.
    pub fn density(&self, t: f64) -> f64 {
        t.powf(-self.params.p - 1.0) / (1.0 - self.k())
    }

    /// `∫_1^N t^{a-1} dt`.
    fn power_integral(&self, a: f64) -> f64 {
        if a == 0.0 {
            self.n.ln()
        } else {
            (self.n.powf(a) - 1.0) / a
        }
    }

    /// Mass carried by the two rays for `t in [lo, hi]`.
    pub fn ray_mass(&self, lo: f64, hi: f64) -> f64 {
        let p = self.params.p;
        2.0 * (lo.powf(-p) - hi.powf(-p)) / (p * (1.0 - self.k()))
    }
}

impl MatrixMeasure for ContinuousLaminate {
    fn mass(&self) -> f64 {
        2.0 * self.power_integral(-self.params.p) / (1.0 - self.k()) + self.atom_weight()
    }

    fn barycenter(&self) -> SymMat2 {
        let m1 = self.power_integral(1.0 - self.params.p) / (1.0 - self.k());
        let w = self.atom_weight();
        let s = self.family.sign();
        let c = (1.0 + self.k()) * m1;
        SymMat2::diag(s * (c + w * self.n), c + w * self.n)
    }

    fn integrate(&self, f: &Integrand, q: Quadrature) -> Result<f64> {
        let atom = f.eval(&self.atom()) * self.atom_weight();
        let p = self.params.p;
        let scale = 1.0 / (1.0 - self.k());
        match q {
            Quadrature::ClosedForm => {
                let d = f.degree().ok_or_else(|| {
                    Error::InvalidParameter("closed-form mode needs a homogeneous integrand".into())
                })?;
                let unit = f.eval(&self.ray_a(1.0)) + f.eval(&self.ray_b(1.0));
                Ok(scale * unit * self.power_integral(d - p) + atom)
            }
            Quadrature::Adaptive { tol } => {
                let g = |s: f64| {
                    let t = s.exp();
                    (f.eval(&self.ray_a(t)) + f.eval(&self.ray_b(t))) * (-p * s).exp()
                };
                let len = self.n.ln();
                let rough = adaptive_simpson(&g, 0.0, len, 1e-3 * len.max(1.0)).unwrap_or(0.0);
                let v = adaptive_simpson(&g, 0.0, len, tol * (1.0 + rough.abs()))?;
                Ok(scale * v + atom)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Piece {
    Continuous(ContinuousLaminate),
    Atomic(AtomicMeasure),
}

impl MatrixMeasure for Piece {
    fn mass(&self) -> f64 {
        match self {
            Piece::Continuous(m) => m.mass(),
            Piece::Atomic(m) => m.mass(),
        }
    }

    fn barycenter(&self) -> SymMat2 {
        match self {
            Piece::Continuous(m) => m.barycenter(),
            Piece::Atomic(m) => m.barycenter(),
        }
    }

    fn integrate(&self, f: &Integrand, q: Quadrature) -> Result<f64> {
        match self {
            Piece::Continuous(m) => m.integrate(f, q),
            Piece::Atomic(m) => m.integrate(f, q),
        }
    }
}

/// A convex combination of measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeLaminate {
    pieces: Vec<(f64, Piece)>,
}

impl CompositeLaminate {
    pub fn new(pieces: Vec<(f64, Piece)>) -> Result<Self> {
        let total: f64 = pieces.iter().map(|(w, _)| w).sum();
        if pieces.iter().any(|(w, _)| !(*w > 0.0)) || (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightSum(total));
        }
        Ok(Self { pieces })
    }

    /// `1/4 m + 1/4 δ_X + 1/2 δ_diag(0,-1)` with `X = diag(-s, 1)`: the
    /// continuous laminate completed to barycenter zero.
    pub fn nu(params: Params, n: f64, family: Family) -> Result<Self> {
        let m = ContinuousLaminate::new(params, n, family)?;
        let s = family.sign();
        Self::new(vec![
            (0.25, Piece::Continuous(m)),
            (0.25, Piece::Atomic(AtomicMeasure::dirac(SymMat2::diag(-s, 1.0)))),
            (0.5, Piece::Atomic(AtomicMeasure::dirac(SymMat2::diag(0.0, -1.0)))),
        ])
    }

    pub fn nu_for(params: Params, n: f64) -> Result<Self> {
        Self::nu(params, n, Family::for_p(params.p))
    }

    pub fn pieces(&self) -> &[(f64, Piece)] {
        &self.pieces
    }
}

impl MatrixMeasure for CompositeLaminate {
    fn mass(&self) -> f64 {
        self.pieces.iter().map(|(w, m)| w * m.mass()).sum()
    }

    fn barycenter(&self) -> SymMat2 {
        self.pieces.iter().fold(SymMat2::ZERO, |acc, (w, m)| acc + *w * m.barycenter())
    }

    fn integrate(&self, f: &Integrand, q: Quadrature) -> Result<f64> {
        let mut total = 0.0;
        for (w, m) in &self.pieces {
            total += w * m.integrate(f, q)?;
        }
        Ok(total)
    }
}

/// `∫φ1 dm / ∫φ2 dm`.
pub fn ratio(params: &Params, m: &impl MatrixMeasure, q: Quadrature) -> Result<f64> {
    let num = m.integrate(&Integrand::phi1(*params), q)?;
    let den = m.integrate(&Integrand::phi2(*params), q)?;
    if den <= 0.0 {
        return Err(Error::ZeroDenominator("integral of phi2"));
    }
    Ok(num / den)
}

/// Randomized midpoint convexity test of `(x, y) -> f(diag(x, y))` along
/// each coordinate direction over `[-r, r]^2`; a heuristic gate.
pub fn midpoint_biconvexity_check(f: &Integrand, r: f64, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = |x: f64, y: f64| f.eval(&SymMat2::diag(x, y));
    for axis in 0..2 {
        for _ in 0..MIDPOINT_SAMPLES {
            let x = rng.gen_range(-r..=r);
            let y = rng.gen_range(-r..=r);
            let h = rng.gen_range(0.0..=r);
            let (lo, hi) = if axis == 0 { (g(x - h, y), g(x + h, y)) } else { (g(x, y - h), g(x, y + h)) };
            let mid = g(x, y);
            if mid > 0.5 * (lo + hi) + 1e-12 * (1.0 + mid.abs()) {
                return Err(Error::NotBiconvex { x, y, axis });
            }
        }
    }
    Ok(())
}

/// `RHS - LHS` of
/// `f(1,1) <= (1/(1-k)) ∫_1^N (f(kt,t) + f(t,kt)) t^{-2/(1-k)} dt/t + f(N,N) N^{-2/(1-k)}`
/// for `f` evaluated on diagonal matrices. The right side is the integral
/// of `f` against the standard laminate with `p = 2/(1-k)`.
pub fn verify_biconvex_inequality(k: f64, n: f64, f: &Integrand, q: Quadrature) -> Result<f64> {
    if !(k > -1.0 && k < 1.0) {
        return Err(Error::InvalidParameter(format!("k must lie in (-1, 1), got {k}")));
    }
    midpoint_biconvexity_check(f, n + 1.0, 0x5eed)?;
    let params = Params::new(2.0 / (1.0 - k), 0.0)?;
    let m = ContinuousLaminate::new(params, n, Family::Standard)?;
    Ok(m.integrate(f, q)? - f.eval(&SymMat2::diag(1.0, 1.0)))
}

/// `λ^ε = 1 - ε/(t(1-k) + ε)`.
pub fn lambda_eps(k: f64, t: f64, eps: f64) -> f64 {
    1.0 - eps / (t * (1.0 - k) + eps)
}

/// `μ^ε = 1 - ε/(t(1-k) + ε(1-k))`.
pub fn mu_eps(k: f64, t: f64, eps: f64) -> f64 {
    1.0 - eps / (t * (1.0 - k) + eps * (1.0 - k))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SplittingCheck {
    pub lambda: f64,
    pub mu: f64,
    /// `f(t,t) <= λ f(t,t+ε) + (1-λ) f(t,kt)`.
    pub second_variable: bool,
    /// `f(t,t+ε) <= μ f(t+ε,t+ε) + (1-μ) f(k(t+ε),t+ε)`.
    pub first_variable: bool,
    pub lambda_barycenter_defect: f64,
    pub mu_barycenter_defect: f64,
}

pub fn verify_splitting_inequalities(
    k: f64,
    t: f64,
    eps: f64,
    f: impl Fn(f64, f64) -> f64,
    tol: f64,
) -> Result<SplittingCheck> {
    if !(t >= 1.0 && eps > 0.0 && eps <= t) {
        return Err(Error::InvalidParameter(format!("need t >= 1 and 0 < eps <= t, got t={t}, eps={eps}")));
    }
    let l = lambda_eps(k, t, eps);
    let m = mu_eps(k, t, eps);
    let te = t + eps;
    let lhs1 = f(t, t);
    let rhs1 = l * f(t, te) + (1.0 - l) * f(t, k * t);
    let lhs2 = f(t, te);
    let rhs2 = m * f(te, te) + (1.0 - m) * f(k * te, te);
    Ok(SplittingCheck {
        lambda: l,
        mu: m,
        second_variable: lhs1 <= rhs1 + tol * (1.0 + lhs1.abs()),
        first_variable: lhs2 <= rhs2 + tol * (1.0 + lhs2.abs()),
        lambda_barycenter_defect: (l * te + (1.0 - l) * k * t - t).abs(),
        mu_barycenter_defect: (m * te + (1.0 - m) * k * te - t).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pr(p: f64, t: f64) -> Params {
        Params::new(p, t).unwrap()
    }

    #[test]
    fn phi_examples() {
        let p = pr(3.0, 1.0);
        assert_eq!(phi1(&pr(2.0, 0.0), &SymMat2::diag(1.0, 1.0)), 0.0);
        assert_eq!(phi1(&pr(2.0, 0.0), &SymMat2::diag(-1.0, 1.0)), 4.0);
        assert!((phi1(&p, &SymMat2::diag(0.0, -1.0)) - 2f64.powf(1.5)).abs() < 1e-15);
        assert_eq!(phi2(&p, &SymMat2::diag(-1.0, 1.0)), 0.0);
        assert_eq!(phi2(&pr(2.0, 0.0), &SymMat2::diag(1.0, 1.0)), 4.0);
        assert_eq!(phi2(&pr(4.0, 0.0), &SymMat2::diag(0.0, -1.0)), 1.0);
    }

    #[test]
    fn atomic_validation() {
        let a = SymMat2::diag(1.0, 2.0);
        assert!(AtomicMeasure::new(vec![(0.5, a), (0.4, a)]).is_err());
        assert!(AtomicMeasure::new(vec![]).is_err());
        let m = AtomicMeasure::new(vec![(0.5, a), (0.5, -a)]).unwrap();
        assert_eq!(m.barycenter(), SymMat2::ZERO);
    }

    #[test]
    fn laminate_mass_and_barycenter() {
        let m = ContinuousLaminate::new(pr(4.0, 0.0), 100.0, Family::Standard).unwrap();
        assert!((m.mass() - 1.0).abs() < 1e-14);
        let b = m.barycenter();
        assert!((b.a11 - 1.0).abs() < 1e-12 && (b.a22 - 1.0).abs() < 1e-12);
        let f = ContinuousLaminate::new(pr(4.0, 0.0), 100.0, Family::Flipped).unwrap();
        assert!((f.barycenter().a11 + 1.0).abs() < 1e-12);
        assert!(ContinuousLaminate::new(pr(4.0, 0.0), 1.0, Family::Flipped).is_err());
    }

    #[test]
    fn nu_barycenter_zero() {
        for &(p, fam) in &[(1.5, Family::Standard), (4.0, Family::Flipped)] {
            let nu = CompositeLaminate::nu(pr(p, 0.3), 50.0, fam).unwrap();
            assert!((nu.mass() - 1.0).abs() < 1e-14);
            assert!(nu.barycenter().frobenius() < 1e-12);
        }
    }

    #[test]
    fn closed_form_needs_degree() {
        let m = ContinuousLaminate::new(pr(2.0, 0.0), 3.0, Family::Standard).unwrap();
        let f = Integrand::new(|a| a.a11);
        assert!(m.integrate(&f, Quadrature::ClosedForm).is_err());
        assert!(m.integrate(&f, Quadrature::default()).is_ok());
    }

    #[test]
    fn serde_round_trip() {
        let nu = CompositeLaminate::nu(pr(4.0, 0.5), 20.0, Family::Flipped).unwrap();
        let s = serde_json::to_string(&nu).unwrap();
        let back: CompositeLaminate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, nu);
        let bad = s.replace("\"n\":20.0", "\"n\":0.5");
        assert!(serde_json::from_str::<CompositeLaminate>(&bad).is_err());
    }

    #[test]
    fn splitting_examples() {
        let c = verify_splitting_inequalities(0.0, 1.0, 0.1, |_, y| y * y, 1e-12).unwrap();
        assert!((c.lambda - 10.0 / 11.0).abs() < 1e-15);
        assert!(c.second_variable && c.first_variable);
        assert!(c.lambda_barycenter_defect < 1e-15 && c.mu_barycenter_defect < 1e-15);
        assert!(verify_splitting_inequalities(0.0, 0.5, 0.1, |x, _| x, 0.0).is_err());
    }

    #[test]
    fn biconvex_rejects_concave() {
        let f = Integrand::diagonal(|x, _| -x * x);
        assert!(matches!(
            verify_biconvex_inequality(0.5, 10.0, &f, Quadrature::default()),
            Err(Error::NotBiconvex { .. })
        ));
    }
}
