//! The residual functional `F_y(x) = ½|f(x) − y|²`, its criticality measure,
//! weights, and the Banach constant of the Jacobian.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{smallest_singular_value, Vector};
use crate::map_model::MapUnderTest;

/// `F_y` bound to a map and a target.
#[derive(Debug, Clone)]
pub struct TargetFunctional<'a> {
    map: &'a MapUnderTest,
    target: Vector,
}

/// Everything one descent step needs at a point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub residual_norm: f64,
    pub gradient: Vector,
}

impl Evaluation {
    pub fn criticality(&self) -> f64 {
        self.gradient.norm()
    }
}

impl<'a> TargetFunctional<'a> {
    pub fn new(map: &'a MapUnderTest, target: Vector) -> Result<Self> {
        map.check_dim(&target)?;
        Ok(TargetFunctional { map, target })
    }

    pub fn map(&self) -> &'a MapUnderTest {
        self.map
    }

    pub fn target(&self) -> &Vector {
        &self.target
    }

    pub fn residual(&self, x: &Vector) -> Result<Vector> {
        Ok(self.map.try_eval(x)? - &self.target)
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        let r = self.residual(x)?;
        let v = 0.5 * r.norm_squared();
        if !v.is_finite() {
            return Err(self.non_finite(x));
        }
        Ok(v)
    }

    /// `∇F_y(x) = df(x)ᵀ (f(x) − y)`.
    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(self.evaluate(x)?.gradient)
    }

    pub fn evaluate(&self, x: &Vector) -> Result<Evaluation> {
        let r = self.residual(x)?;
        let value = 0.5 * r.norm_squared();
        if !value.is_finite() {
            return Err(self.non_finite(x));
        }
        let j = self.map.try_jacobian(x)?;
        let gradient = j.tr_mul(&r);
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteJacobian { map: self.map.name().to_string(), point: x.iter().copied().collect() });
        }
        Ok(Evaluation { value, residual_norm: r.norm(), gradient })
    }

    /// λ_{F_y}(x). `F_y` is C¹ for the Euclidean norm, so this is the
    /// gradient norm.
    pub fn criticality(&self, x: &Vector) -> Result<f64> {
        Ok(self.evaluate(x)?.criticality())
    }

    /// `λ_{F_y}(x)·(1 + h(|x|))`.
    pub fn weighted_criticality(&self, w: &Weight, x: &Vector) -> Result<f64> {
        let c = self.criticality(x)?;
        Ok(w.scale(c, x.norm()))
    }

    /// `λ_{F_y}(x) − Sur df(x)·|f(x) − y|`, which is never negative.
    pub fn claim1_residual(&self, x: &Vector) -> Result<f64> {
        let e = self.evaluate(x)?;
        let sur = banach_constant(self.map, x)?;
        Ok(e.criticality() - sur * e.residual_norm)
    }

    fn non_finite(&self, x: &Vector) -> Error {
        Error::NonFinite { map: self.map.name().to_string(), point: x.iter().copied().collect() }
    }
}

/// Banach constant `Sur df(x)`: the smallest singular value of the Jacobian.
///
/// A singular Jacobian yields `0.0`; see [`is_local_diffeomorphism_at`].
pub fn banach_constant(map: &MapUnderTest, x: &Vector) -> Result<f64> {
    let j = map.try_jacobian(x)?;
    Ok(smallest_singular_value(&j))
}

pub fn is_local_diffeomorphism_at(map: &MapUnderTest, x: &Vector) -> Result<bool> {
    Ok(banach_constant(map, x)? > 0.0)
}

/// Criticality of the Euclidean norm at `z`: 1 away from the origin, 0 at it.
pub fn norm_criticality(z: &Vector) -> f64 {
    if z.iter().any(|c| *c != 0.0) {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Zero,
    Cerami,
    DerivedFromMap,
    Custom,
}

/// What is known about `∫₀^∞ dρ / (1 + h(ρ)) = ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DivergenceStatus {
    Proved,
    NotFalsifiedUpTo { radius: f64 },
    Falsified,
}

#[derive(Clone)]
enum Profile {
    Zero,
    Linear,
    Table(Vec<[f64; 2]>),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// A non-decreasing weight `h : [0, ∞) → [0, ∞)`.
#[derive(Clone)]
pub struct Weight {
    kind: WeightKind,
    profile: Profile,
    divergence: DivergenceStatus,
}

impl Weight {
    pub fn zero() -> Weight {
        Weight { kind: WeightKind::Zero, profile: Profile::Zero, divergence: DivergenceStatus::Proved }
    }

    /// `h(ρ) = ρ`.
    pub fn cerami() -> Weight {
        Weight { kind: WeightKind::Cerami, profile: Profile::Linear, divergence: DivergenceStatus::Proved }
    }

    /// Tabulated `(ρ, h)` pairs, linearly interpolated and held constant
    /// outside the grid.
    pub fn tabulated(kind: WeightKind, grid: Vec<[f64; 2]>, divergence: DivergenceStatus) -> Result<Weight> {
        if grid.is_empty() {
            return Err(Error::InvalidArgument("weight grid is empty".into()));
        }
        for (i, [rho, h]) in grid.iter().enumerate() {
            if !rho.is_finite() || !h.is_finite() || *h < 0.0 || *rho < 0.0 {
                return Err(Error::InvalidArgument(format!("weight grid entry {i} = ({rho}, {h}) is not a finite non-negative pair")));
            }
            if i > 0 {
                let [prev_rho, prev_h] = grid[i - 1];
                if *rho <= prev_rho {
                    return Err(Error::InvalidArgument(format!("weight grid radii must increase (entry {i})")));
                }
                if *h < prev_h {
                    return Err(Error::InvalidArgument(format!("weight must be non-decreasing (entry {i}: {h} < {prev_h})")));
                }
            }
        }
        Ok(Weight { kind, profile: Profile::Table(grid), divergence })
    }

    /// An arbitrary closure. Monotonicity is not verified here; use
    /// [`Weight::check_monotone`].
    pub fn custom<F>(h: F) -> Weight
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Weight {
            kind: WeightKind::Custom,
            profile: Profile::Function(Arc::new(h)),
            divergence: DivergenceStatus::NotFalsifiedUpTo { radius: 0.0 },
        }
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn divergence_status(&self) -> DivergenceStatus {
        self.divergence
    }

    pub fn with_divergence_status(mut self, status: DivergenceStatus) -> Weight {
        self.divergence = status;
        self
    }

    pub fn grid(&self) -> Option<&[[f64; 2]]> {
        match &self.profile {
            Profile::Table(g) => Some(g),
            _ => None,
        }
    }

    pub fn h(&self, rho: f64) -> f64 {
        match &self.profile {
            Profile::Zero => 0.0,
            Profile::Linear => rho,
            Profile::Function(f) => f(rho),
            Profile::Table(grid) => interpolate(grid, rho),
        }
    }

    /// `c · (1 + h(|x|))`; exactly `c` for the zero weight.
    pub fn scale(&self, c: f64, x_norm: f64) -> f64 {
        match self.profile {
            Profile::Zero => c,
            _ => c * (1.0 + self.h(x_norm)),
        }
    }

    /// Checks `h ≥ 0` and monotonicity over an increasing grid; returns the
    /// first offending pair of radii.
    pub fn check_monotone(&self, radii: &[f64]) -> std::result::Result<(), (f64, f64)> {
        if let Some(&first) = radii.first() {
            if self.h(first) < 0.0 {
                return Err((first, first));
            }
        }
        for pair in radii.windows(2) {
            if self.h(pair[1]) < self.h(pair[0]) {
                return Err((pair[0], pair[1]));
            }
        }
        Ok(())
    }
}

fn interpolate(grid: &[[f64; 2]], rho: f64) -> f64 {
    let first = grid[0];
    let last = grid[grid.len() - 1];
    if rho <= first[0] {
        return first[1];
    }
    if rho >= last[0] {
        return last[1];
    }
    let idx = grid.partition_point(|p| p[0] <= rho);
    let [r0, h0] = grid[idx - 1];
    let [r1, h1] = grid[idx];
    h0 + (h1 - h0) * (rho - r0) / (r1 - r0)
}

impl PartialEq for Weight {
    /// Closure-backed weights compare equal only to clones of themselves.
    fn eq(&self, other: &Weight) -> bool {
        let same_profile = match (&self.profile, &other.profile) {
            (Profile::Zero, Profile::Zero) | (Profile::Linear, Profile::Linear) => true,
            (Profile::Table(a), Profile::Table(b)) => a == b,
            (Profile::Function(a), Profile::Function(b)) => Arc::ptr_eq(a, b),
            _ => false,
        };
        same_profile && self.kind == other.kind && self.divergence == other.divergence
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight")
            .field("kind", &self.kind)
            .field("grid_len", &self.grid().map(|g| g.len()))
            .field("divergence", &self.divergence)
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct WeightRecord {
    kind: WeightKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<[f64; 2]>>,
    divergence_status: DivergenceStatus,
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WeightRecord { kind: self.kind, grid: self.grid().map(|g| g.to_vec()), divergence_status: self.divergence }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = WeightRecord::deserialize(d)?;
        let w = match (rec.kind, rec.grid) {
            (WeightKind::Zero, _) => Weight::zero(),
            (WeightKind::Cerami, _) => Weight::cerami(),
            (kind, Some(grid)) => Weight::tabulated(kind, grid, rec.divergence_status).map_err(serde::de::Error::custom)?,
            (kind, None) => return Err(serde::de::Error::custom(format!("weight of kind {kind:?} needs a grid"))),
        };
        Ok(w.with_divergence_status(rec.divergence_status))
    }
}
