//! The map-under-test abstraction and Jacobian validation.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, matrix_finite, Matrix, Vector};

pub type EvalFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// Default sampling box half-width when a map does not carry its own hint.
pub const DEFAULT_DOMAIN_RADIUS: f64 = 10.0;

/// A C¹ map Rⁿ → Rⁿ with an analytic Jacobian.
///
/// Evaluation closures are pure, so a single instance can be shared across
/// worker threads.
#[derive(Clone)]
pub struct MapUnderTest {
    name: String,
    dim: usize,
    eval: EvalFn,
    jacobian: JacobianFn,
    domain_hint: Option<f64>,
}

impl MapUnderTest {
    pub fn new<F, J>(name: impl Into<String>, dim: usize, eval: F, jacobian: J) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        assert!(dim > 0, "map dimension must be positive");
        MapUnderTest {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            jacobian: Arc::new(jacobian),
            domain_hint: None,
        }
    }

    pub fn with_domain_hint(mut self, radius: f64) -> Self {
        self.domain_hint = Some(radius);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain_hint(&self) -> Option<f64> {
        self.domain_hint
    }

    /// Half-width of the sampling box `[-R, R]ⁿ`.
    pub fn domain_radius(&self) -> f64 {
        self.domain_hint.unwrap_or(DEFAULT_DOMAIN_RADIUS)
    }

    pub fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Raw evaluation; may return non-finite entries.
    pub fn eval(&self, x: &Vector) -> Vector {
        (self.eval)(x)
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        (self.jacobian)(x)
    }

    pub fn try_eval(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        let fx = self.eval(x);
        if !all_finite(&fx) {
            return Err(Error::NonFinite { map: self.name.clone(), point: x.iter().copied().collect() });
        }
        Ok(fx)
    }

    pub fn try_jacobian(&self, x: &Vector) -> Result<Matrix> {
        self.check_dim(x)?;
        let j = self.jacobian(x);
        if !matrix_finite(&j) {
            return Err(Error::NonFiniteJacobian { map: self.name.clone(), point: x.iter().copied().collect() });
        }
        Ok(j)
    }

    /// The map `x ↦ f(u + x)`, which moves the base point `u` to the origin.
    pub fn translated(&self, u: &Vector) -> MapUnderTest {
        let eval = Arc::clone(&self.eval);
        let jac = Arc::clone(&self.jacobian);
        let (ue, uj) = (u.clone(), u.clone());
        MapUnderTest {
            name: format!("{}@translated", self.name),
            dim: self.dim,
            eval: Arc::new(move |x: &Vector| eval(&(&ue + x))),
            jacobian: Arc::new(move |x: &Vector| jac(&(&uj + x))),
            domain_hint: self.domain_hint,
        }
    }
}

impl fmt::Debug for MapUnderTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapUnderTest")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain_hint", &self.domain_hint)
            .finish()
    }
}

/// The classical global-inversion conditions, in implication order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "1")]
    Isometry,
    #[serde(rename = "2")]
    Expansive,
    #[serde(rename = "3")]
    UniformLowerBound,
    #[serde(rename = "starstar")]
    IntegralCondition,
    #[serde(rename = "4")]
    Plastock,
    #[serde(rename = "5")]
    Katriel,
    #[serde(rename = "star")]
    WeightedPalaisSmale,
    #[serde(rename = "6")]
    Rabier,
}

impl Condition {
    /// 1 ⇒ 2 ⇒ 3 ⇒ ⋆⋆ ⇒ 4 ⇒ 5 ⇒ ⋆ ⇒ 6.
    pub const CHAIN: [Condition; 8] = [
        Condition::Isometry,
        Condition::Expansive,
        Condition::UniformLowerBound,
        Condition::IntegralCondition,
        Condition::Plastock,
        Condition::Katriel,
        Condition::WeightedPalaisSmale,
        Condition::Rabier,
    ];

    /// Conditions that coincide for maps on Rⁿ.
    pub const FINITE_DIM_EQUIVALENT: [Condition; 4] =
        [Condition::Plastock, Condition::Katriel, Condition::WeightedPalaisSmale, Condition::Rabier];

    pub fn key(self) -> &'static str {
        match self {
            Condition::Isometry => "1",
            Condition::Expansive => "2",
            Condition::UniformLowerBound => "3",
            Condition::IntegralCondition => "starstar",
            Condition::Plastock => "4",
            Condition::Katriel => "5",
            Condition::WeightedPalaisSmale => "star",
            Condition::Rabier => "6",
        }
    }

    pub fn from_key(key: &str) -> Option<Condition> {
        Condition::CHAIN.iter().copied().find(|c| c.key() == key)
    }

    /// Conditions implied by this one.
    pub fn downstream(self) -> impl Iterator<Item = Condition> {
        Condition::CHAIN.into_iter().filter(move |c| *c > self)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Central-difference validation of the analytic Jacobian.
///
/// Returns the maximum over points and entries of
/// `|analytic - numeric| / (1 + |analytic|)`.
pub fn jacobian_check(map: &MapUnderTest, points: &[Vector], step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    if points.is_empty() {
        return Err(Error::InvalidArgument("jacobian_check needs at least one point".into()));
    }
    let n = map.dim();
    let mut worst = 0.0_f64;
    for x in points {
        let analytic = map.try_jacobian(x)?;
        map.try_eval(x)?;
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += step;
            xm[k] -= step;
            let fp = map.try_eval(&xp)?;
            let fm = map.try_eval(&xm)?;
            let column = (fp - fm) / (2.0 * step);
            for i in 0..n {
                let a = analytic[(i, k)];
                let dev = (a - column[i]).abs() / (1.0 + a.abs());
                worst = worst.max(dev);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;

    fn square() -> MapUnderTest {
        MapUnderTest::new(
            "square",
            1,
            |x: &Vector| x.map(|t| t * t),
            |x: &Vector| Matrix::from_element(1, 1, 2.0 * x[0]),
        )
    }

    #[test]
    fn chain_order_and_keys() {
        let keys: Vec<_> = Condition::CHAIN.iter().map(|c| c.key()).collect();
        assert_eq!(keys, ["1", "2", "3", "starstar", "4", "5", "star", "6"]);
        assert_eq!(Condition::from_key("starstar"), Some(Condition::IntegralCondition));
        assert_eq!(Condition::Katriel.downstream().collect::<Vec<_>>(), [Condition::WeightedPalaisSmale, Condition::Rabier]);
    }

    #[test]
    fn translation_moves_base_point() {
        let m = square().translated(&vector(&[3.0]));
        assert_eq!(m.eval(&vector(&[1.0]))[0], 16.0);
        assert_eq!(m.jacobian(&vector(&[0.0]))[(0, 0)], 6.0);
    }

    #[test]
    fn non_finite_values_are_reported_with_location() {
        let m = MapUnderTest::new(
            "blowup",
            1,
            |x: &Vector| x.map(|t| 1.0 / t),
            |x: &Vector| Matrix::from_element(1, 1, -1.0 / (x[0] * x[0])),
        );
        let err = jacobian_check(&m, &[vector(&[0.0])], 1e-5).unwrap_err();
        match err {
            Error::NonFiniteJacobian { point, .. } | Error::NonFinite { point, .. } => assert_eq!(point, vec![0.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jacobian_check_rejects_bad_arguments() {
        assert!(jacobian_check(&square(), &[vector(&[1.0])], 0.0).is_err());
        assert!(jacobian_check(&square(), &[], 1e-5).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(square().try_eval(&vector(&[1.0, 2.0])), Err(Error::Dimension { expected: 1, got: 2 })));
    }
}
