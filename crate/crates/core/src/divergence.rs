//! φ-divergences and their convex conjugates.
//!
//! A divergence is usable by the solvers when φ is convex on `[domain_lo, ∞)`
//! with φ(1) = 0, φ′(1) = 0 and φ″(1) > 0. The two built-in families are
//! checked by the unit tests; user-supplied ones are checked numerically when
//! constructed through [`PhiDivergence::custom`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{DroError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DivergenceKind {
    /// φ(z) = z ln z − z + 1, φ*(ζ) = eᶻ − 1.
    RelativeEntropy,
    /// φ(z) = (z − 1)², φ*(ζ) = ζ + ζ²/4 for ζ ≥ −2 and −1 below.
    ModifiedChiSquare,
    Custom(String),
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RelativeEntropy => f.write_str("relative-entropy"),
            Self::ModifiedChiSquare => f.write_str("modified-chi-square"),
            Self::Custom(name) => write!(f, "custom:{name}"),
        }
    }
}

impl FromStr for DivergenceKind {
    type Err = DroError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kl" | "relative-entropy" | "relative_entropy" | "relativeentropy" => {
                Ok(Self::RelativeEntropy)
            }
            "chi2" | "modified-chi-square" | "modified_chi_square" | "modifiedchisquare" => {
                Ok(Self::ModifiedChiSquare)
            }
            other => Err(DroError::InvalidArgument(format!("unknown divergence `{other}`"))),
        }
    }
}

pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Callables describing a user-defined divergence, plus φ′(1), φ″(1), φ‴(1).
#[derive(Clone)]
pub struct PhiFunctions<T> {
    pub phi: ScalarFn<T>,
    pub phi_d1: ScalarFn<T>,
    pub phi_d2: ScalarFn<T>,
    pub phi_d3: ScalarFn<T>,
    pub conj: ScalarFn<T>,
    pub conj_d1: ScalarFn<T>,
    pub conj_d2: ScalarFn<T>,
    pub domain_lo: T,
    pub d1_at_one: T,
    pub d2_at_one: T,
    pub d3_at_one: T,
}

#[derive(Clone)]
enum Repr<T> {
    RelativeEntropy,
    ModifiedChiSquare,
    Custom(Arc<PhiFunctions<T>>),
}

/// Handle to a validated φ-divergence. Cheap to clone and share across threads.
#[derive(Clone)]
pub struct PhiDivergence<T> {
    kind: DivergenceKind,
    repr: Repr<T>,
}

impl<T: Scalar> fmt::Debug for PhiDivergence<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiDivergence").field("kind", &self.kind).finish()
    }
}

impl<T: Scalar> PhiDivergence<T> {
    pub fn relative_entropy() -> Self {
        Self {
            kind: DivergenceKind::RelativeEntropy,
            repr: Repr::RelativeEntropy,
        }
    }

    pub fn modified_chi_square() -> Self {
        Self {
            kind: DivergenceKind::ModifiedChiSquare,
            repr: Repr::ModifiedChiSquare,
        }
    }

    /// Built-in family for `kind`; custom kinds must go through [`Self::custom`].
    pub fn from_kind(kind: &DivergenceKind) -> Result<Self> {
        match kind {
            DivergenceKind::RelativeEntropy => Ok(Self::relative_entropy()),
            DivergenceKind::ModifiedChiSquare => Ok(Self::modified_chi_square()),
            DivergenceKind::Custom(name) => Err(DroError::InvalidArgument(format!(
                "custom divergence `{name}` needs its callables"
            ))),
        }
    }

    /// Registers a user-defined divergence after checking φ(1) = φ′(1) = 0,
    /// φ″(1) > 0, convexity and the Fenchel identity on a probe grid.
    pub fn custom(name: impl Into<String>, funcs: PhiFunctions<T>) -> Result<Self> {
        let d = Self {
            kind: DivergenceKind::Custom(name.into()),
            repr: Repr::Custom(Arc::new(funcs)),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn kind(&self) -> &DivergenceKind {
        &self.kind
    }

    pub fn domain_lo(&self) -> T {
        match &self.repr {
            Repr::RelativeEntropy | Repr::ModifiedChiSquare => T::zero(),
            Repr::Custom(f) => f.domain_lo,
        }
    }

    pub fn phi(&self, z: T) -> T {
        if z < self.domain_lo() || z.is_nan() {
            return T::infinity();
        }
        match &self.repr {
            Repr::RelativeEntropy => {
                if z == T::zero() {
                    T::one()
                } else {
                    z * z.ln() - z + T::one()
                }
            }
            Repr::ModifiedChiSquare => (z - T::one()).powi(2),
            Repr::Custom(f) => (f.phi)(z),
        }
    }

    pub fn phi_d1(&self, z: T) -> T {
        match &self.repr {
            Repr::RelativeEntropy => z.ln(),
            Repr::ModifiedChiSquare => T::lit(2.0) * (z - T::one()),
            Repr::Custom(f) => (f.phi_d1)(z),
        }
    }

    pub fn phi_d2(&self, z: T) -> T {
        match &self.repr {
            Repr::RelativeEntropy => z.recip(),
            Repr::ModifiedChiSquare => T::lit(2.0),
            Repr::Custom(f) => (f.phi_d2)(z),
        }
    }

    pub fn phi_d3(&self, z: T) -> T {
        match &self.repr {
            Repr::RelativeEntropy => -(z * z).recip(),
            Repr::ModifiedChiSquare => T::zero(),
            Repr::Custom(f) => (f.phi_d3)(z),
        }
    }

    /// Convex conjugate φ*(ζ) = sup_z { zζ − φ(z) }.
    pub fn conj(&self, zeta: T) -> T {
        match &self.repr {
            Repr::RelativeEntropy => zeta.exp_m1(),
            Repr::ModifiedChiSquare => {
                if zeta >= T::lit(-2.0) {
                    zeta + zeta * zeta / T::lit(4.0)
                } else {
                    -T::one()
                }
            }
            Repr::Custom(f) => (f.conj)(zeta),
        }
    }

    /// (φ*)′(ζ); the adversarial likelihood ratio at argument ζ.
    pub fn conj_d1(&self, zeta: T) -> T {
        match &self.repr {
            Repr::RelativeEntropy => zeta.exp(),
            Repr::ModifiedChiSquare => (T::one() + zeta / T::lit(2.0)).max(T::zero()),
            Repr::Custom(f) => (f.conj_d1)(zeta),
        }
    }

    /// (φ*)′(ζ) − 1 without cancellation for small ζ.
    pub fn conj_d1_minus_one(&self, zeta: T) -> T {
        match &self.repr {
            Repr::RelativeEntropy => zeta.exp_m1(),
            Repr::ModifiedChiSquare => (zeta / T::lit(2.0)).max(-T::one()),
            Repr::Custom(f) => (f.conj_d1)(zeta) - T::one(),
        }
    }

    pub fn conj_d2(&self, zeta: T) -> T {
        match &self.repr {
            Repr::RelativeEntropy => zeta.exp(),
            Repr::ModifiedChiSquare => {
                if zeta > T::lit(-2.0) {
                    T::lit(0.5)
                } else {
                    T::zero()
                }
            }
            Repr::Custom(f) => (f.conj_d2)(zeta),
        }
    }

    /// φ″(1).
    pub fn curvature(&self) -> T {
        match &self.repr {
            Repr::Custom(f) => f.d2_at_one,
            _ => self.phi_d2(T::one()),
        }
    }

    /// φ‴(1).
    pub fn third_derivative_at_one(&self) -> T {
        match &self.repr {
            Repr::Custom(f) => f.d3_at_one,
            _ => self.phi_d3(T::one()),
        }
    }

    /// Largest ζ at which (φ*)′ can be evaluated without overflow.
    pub(crate) fn conj_arg_limit(&self) -> T {
        match &self.repr {
            Repr::RelativeEntropy => T::max_exp_arg(),
            _ => T::infinity(),
        }
    }

    /// Coefficients of φ*(ζ) = ζ + α₂ζ²/2 + α₃ζ³/6 + o(ζ³):
    /// α₂ = 1/φ″(1), α₃ = −φ‴(1)/φ″(1)³.
    pub fn conjugate_taylor_coeffs(&self) -> (T, T) {
        let d2 = self.curvature();
        let d3 = self.third_derivative_at_one();
        (d2.recip(), -d3 / (d2 * d2 * d2))
    }

    /// Σ_{pᵢ>0} pᵢ φ(qᵢ/pᵢ), or +∞ when `q` is not a distribution supported
    /// on the support of `p`.
    pub fn divergence(&self, q: &[T], p: &[T]) -> Result<T> {
        if q.len() != p.len() {
            return Err(DroError::InvalidArgument(format!(
                "weight vectors differ in length ({} vs {})",
                q.len(),
                p.len()
            )));
        }
        if let Some(bad) = q.iter().chain(p).find(|&&w| w < T::zero() || w.is_nan()) {
            return Err(DroError::InvalidArgument(format!("negative or NaN weight {bad}")));
        }
        let tol = T::lit(1e-9).max(T::epsilon() * T::from_usize_lossy(4 * p.len().max(1)));
        let p_sum: T = p.iter().copied().sum();
        if (p_sum - T::one()).abs() > tol {
            return Err(DroError::InvalidArgument(format!(
                "reference weights sum to {p_sum}, not 1"
            )));
        }
        let mut q_sum = T::zero();
        let mut total = T::zero();
        for (&qi, &pi) in q.iter().zip(p) {
            if pi > T::zero() {
                q_sum = q_sum + qi;
                total = total + pi * self.phi(qi / pi);
            } else if qi > T::zero() {
                return Ok(T::infinity());
            }
        }
        if (q_sum - T::one()).abs() > tol {
            return Ok(T::infinity());
        }
        Ok(total)
    }

    fn validate(&self) -> Result<()> {
        let fail = |reason: String| DroError::InvalidDivergence {
            name: self.kind.to_string(),
            reason,
        };
        let tight = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
        let one = T::one();
        if self.domain_lo() < T::zero() || self.domain_lo() >= one {
            return Err(fail(format!("domain lower end {} not in [0, 1)", self.domain_lo())));
        }
        if self.phi(one).abs() > tight {
            return Err(fail(format!("phi(1) = {} != 0", self.phi(one))));
        }
        if self.phi_d1(one).abs() > tight {
            return Err(fail(format!("phi'(1) = {} != 0", self.phi_d1(one))));
        }
        if let Repr::Custom(f) = &self.repr {
            if f.d1_at_one.abs() > tight {
                return Err(fail(format!("declared phi'(1) = {} != 0", f.d1_at_one)));
            }
            let loose = T::lit(1e-8);
            for (declared, evaluated, label) in [
                (f.d2_at_one, (f.phi_d2)(one), "phi''(1)"),
                (f.d3_at_one, (f.phi_d3)(one), "phi'''(1)"),
            ] {
                if (declared - evaluated).abs() > loose * (one + declared.abs()) {
                    return Err(fail(format!(
                        "declared {label} = {declared} disagrees with callable ({evaluated})"
                    )));
                }
            }
        }
        if !(self.curvature() > T::zero()) {
            return Err(fail(format!("phi''(1) = {} is not positive", self.curvature())));
        }
        let fenchel_tol = T::lit(1e-9).max(T::epsilon() * T::lit(256.0));
        for z in probe_grid::<T>().into_iter().filter(|&z| z > self.domain_lo()) {
            let d2 = self.phi_d2(z);
            if d2 < -tight {
                return Err(fail(format!("phi''({z}) = {d2} < 0: not convex")));
            }
            let slope = self.phi_d1(z);
            let lhs = self.conj(slope);
            let rhs = z * slope - self.phi(z);
            if (lhs - rhs).abs() > fenchel_tol * (one + rhs.abs()) {
                return Err(fail(format!(
                    "Fenchel identity fails at z = {z}: phi*(phi'(z)) = {lhs}, z phi'(z) - phi(z) = {rhs}"
                )));
            }
        }
        Ok(())
    }
}

fn probe_grid<T: Scalar>() -> Vec<T> {
    [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.5, 2.0, 3.0, 5.0]
        .iter()
        .map(|&v| T::lit(v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn both() -> [PhiDivergence<f64>; 2] {
        [PhiDivergence::relative_entropy(), PhiDivergence::modified_chi_square()]
    }

    #[test]
    fn builtins_pass_validation() {
        for d in both() {
            d.validate().unwrap();
        }
        PhiDivergence::<f32>::relative_entropy().validate().unwrap();
        PhiDivergence::<f32>::modified_chi_square().validate().unwrap();
    }

    #[test]
    fn relative_entropy_derivatives_at_one() {
        let d = PhiDivergence::<f64>::relative_entropy();
        assert_eq!(d.curvature(), 1.0);
        assert_eq!(d.third_derivative_at_one(), -1.0);
        assert_eq!(d.conj(0.0), 0.0);
        assert_eq!(d.conj_d1(0.0), 1.0);
    }

    #[test]
    fn divergence_of_identical_weights_is_zero() {
        for d in both() {
            assert_eq!(d.divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        }
    }

    #[test]
    fn relative_entropy_two_point_value() {
        let d = PhiDivergence::<f64>::relative_entropy();
        let v = d.divergence(&[2.0 / 3.0, 1.0 / 3.0], &[0.5, 0.5]).unwrap();
        let expected = (2.0 / 3.0) * (4.0_f64 / 3.0).ln() + (1.0 / 3.0) * (2.0_f64 / 3.0).ln();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.056633).abs() < 1e-6);
    }

    #[test]
    fn support_violation_gives_infinity() {
        for d in both() {
            assert_eq!(d.divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), f64::INFINITY);
            assert_eq!(d.divergence(&[0.7, 0.7], &[0.5, 0.5]).unwrap(), f64::INFINITY);
        }
    }

    #[test]
    fn divergence_argument_errors() {
        let d = PhiDivergence::<f64>::relative_entropy();
        assert!(matches!(d.divergence(&[1.0], &[0.5, 0.5]), Err(DroError::InvalidArgument(_))));
        assert!(matches!(
            d.divergence(&[1.5, -0.5], &[0.5, 0.5]),
            Err(DroError::InvalidArgument(_))
        ));
    }

    #[test]
    fn taylor_coefficients() {
        assert_eq!(PhiDivergence::<f64>::relative_entropy().conjugate_taylor_coeffs(), (1.0, 1.0));
        assert_eq!(PhiDivergence::<f64>::modified_chi_square().conjugate_taylor_coeffs(), (0.5, 0.0));
    }

    #[test]
    fn second_difference_of_conjugate_matches_alpha2() {
        let h = 1e-4;
        for d in both() {
            let (a2, _) = d.conjugate_taylor_coeffs();
            let fd = (d.conj(h) - 2.0 * d.conj(0.0) + d.conj(-h)) / (h * h);
            assert!((fd - a2).abs() < 1e-6, "{:?}: {fd} vs {a2}", d.kind());
        }
    }

    #[test]
    fn conjugate_taylor_remainder_vanishes() {
        for d in both() {
            let (a2, a3) = d.conjugate_taylor_coeffs();
            let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3]
                .iter()
                .map(|&z: &f64| {
                    ((d.conj(z) - z - a2 * z * z / 2.0 - a3 * z.powi(3) / 6.0) / z.powi(3)).abs()
                })
                .collect();
            assert!(ratios.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{ratios:?}");
            assert!(ratios[2] < 1e-2);
        }
    }

    #[test]
    fn chi_square_conjugate_is_piecewise() {
        let d = PhiDivergence::<f64>::modified_chi_square();
        assert_eq!(d.conj(-3.0), -1.0);
        assert_eq!(d.conj(-2.0), -1.0);
        assert_eq!(d.conj(2.0), 3.0);
        assert_eq!(d.conj_d1(-4.0), 0.0);
    }

    fn shifted_kl(break_phi1: bool) -> PhiFunctions<f64> {
        let shift = if break_phi1 { 0.1 } else { 0.0 };
        PhiFunctions {
            phi: Arc::new(move |z: f64| z * z.ln() - z + 1.0 + shift),
            phi_d1: Arc::new(|z: f64| z.ln()),
            phi_d2: Arc::new(|z: f64| 1.0 / z),
            phi_d3: Arc::new(|z: f64| -1.0 / (z * z)),
            conj: Arc::new(move |s: f64| s.exp_m1() - shift),
            conj_d1: Arc::new(|s: f64| s.exp()),
            conj_d2: Arc::new(|s: f64| s.exp()),
            domain_lo: 0.0,
            d1_at_one: 0.0,
            d2_at_one: 1.0,
            d3_at_one: -1.0,
        }
    }

    #[test]
    fn custom_registration_validates() {
        let ok = PhiDivergence::custom("kl-copy", shifted_kl(false)).unwrap();
        assert_eq!(ok.kind(), &DivergenceKind::Custom("kl-copy".into()));
        assert!((ok.conj(0.3) - 0.3_f64.exp_m1()).abs() < 1e-15);
        let err = PhiDivergence::custom("bad", shifted_kl(true)).unwrap_err();
        assert!(matches!(err, DroError::InvalidDivergence { .. }));

        let mut wrong_conj = shifted_kl(false);
        wrong_conj.conj = Arc::new(|s: f64| s + s * s);
        assert!(PhiDivergence::custom("bad-conj", wrong_conj).is_err());

        let mut concave = shifted_kl(false);
        concave.phi_d2 = Arc::new(|z: f64| 1.0 - z);
        concave.d2_at_one = 0.0;
        assert!(PhiDivergence::custom("concave", concave).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("kl".parse::<DivergenceKind>().unwrap(), DivergenceKind::RelativeEntropy);
        assert_eq!(
            "modified-chi-square".parse::<DivergenceKind>().unwrap(),
            DivergenceKind::ModifiedChiSquare
        );
        assert!("tv".parse::<DivergenceKind>().is_err());
    }
}
