//! Hadamard integral profile, the weight it induces, and the divergence test
//! for the weight integral.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::map_model::MapUnderTest;
use crate::sampling;
use crate::variational::{banach_constant, DivergenceStatus, Weight, WeightKind};

/// Relative growth over the last doubling below which an integral counts as converged.
pub const CONVERGED_GROWTH: f64 = 1e-3;
pub const INTEGRAL_PANELS: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub rho: f64,
    pub inf_estimate: f64,
    pub varrho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HadamardProfile {
    pub r_max: f64,
    pub shells: usize,
    pub per_shell: usize,
    pub seed: u64,
    pub rows: Vec<ProfileRow>,
}

impl HadamardProfile {
    fn interpolate(&self, r: f64, pick: impl Fn(&ProfileRow) -> f64) -> f64 {
        let rows = &self.rows;
        if r <= 0.0 {
            return pick(&rows[0]);
        }
        if r >= self.r_max {
            return pick(&rows[rows.len() - 1]);
        }
        let idx = rows.partition_point(|row| row.rho <= r).max(1);
        let (a, b) = (&rows[idx - 1], &rows[idx]);
        pick(a) + (pick(b) - pick(a)) * (r - a.rho) / (b.rho - a.rho)
    }

    /// `ϱ(r)`, linearly interpolated on the shell grid; clamped at `r_max`.
    pub fn varrho_at(&self, r: f64) -> f64 {
        self.interpolate(r, |row| row.varrho)
    }

    /// Relative growth of `ϱ` from `r_max/2` to `r_max`.
    pub fn last_doubling_growth(&self) -> f64 {
        let half = self.varrho_at(0.5 * self.r_max);
        let full = self.varrho_at(self.r_max);
        if half > 0.0 {
            (full - half) / half
        } else {
            f64::INFINITY
        }
    }
}

/// Running minimum of the Banach constant over shells `ρ_k = r_max·k/shells`
/// and its trapezoidal integral `ϱ`.
pub fn hadamard_profile(
    map: &MapUnderTest,
    r_max: f64,
    shells: usize,
    per_shell: usize,
    seed: u64,
) -> Result<HadamardProfile> {
    if shells < 8 {
        return Err(Error::InvalidArgument(format!("hadamard profile needs at least 8 shells, got {shells}")));
    }
    if !(r_max > 0.0 && r_max.is_finite()) || per_shell == 0 {
        return Err(Error::InvalidArgument("r_max must be positive and per_shell nonzero".into()));
    }
    let n = map.dim();
    let mut rng = sampling::stream(seed, map.name(), "starstar");
    let origin = Vector::zeros(n);
    let mut running = banach_constant(map, &origin)?;
    let mut rows = vec![ProfileRow { rho: 0.0, inf_estimate: running, varrho: 0.0 }];
    for k in 1..=shells {
        let rho = r_max * k as f64 / shells as f64;
        for p in sampling::sphere_points(&mut rng, n, rho, per_shell) {
            running = running.min(banach_constant(map, &p)?);
        }
        let prev = rows[k - 1];
        let varrho = prev.varrho + 0.5 * (rho - prev.rho) * (prev.inf_estimate + running);
        rows.push(ProfileRow { rho, inf_estimate: running, varrho });
    }
    Ok(HadamardProfile { r_max, shells, per_shell, seed, rows })
}

/// `h(ρ) = α / inf_{|x|≤ρ} Sur df(x) − 1` with `α = Sur df(0)`, tabulated on
/// the profile's shells.
pub fn derive_weight_from_profile(profile: &HadamardProfile) -> Result<Weight> {
    let alpha = profile.rows[0].inf_estimate;
    let mut grid = Vec::with_capacity(profile.rows.len());
    for row in &profile.rows {
        let h = alpha / row.inf_estimate - 1.0;
        if row.inf_estimate <= 0.0 || !h.is_finite() {
            return Err(Error::WeightUndefined { radius: row.rho });
        }
        grid.push([row.rho, h.max(0.0)]);
    }
    Weight::tabulated(WeightKind::DerivedFromMap, grid, DivergenceStatus::NotFalsifiedUpTo { radius: profile.r_max })
}

pub fn derive_weight(map: &MapUnderTest, r_max: f64, shells: usize, per_shell: usize, seed: u64) -> Result<Weight> {
    derive_weight_from_profile(&hadamard_profile(map, r_max, shells, per_shell, seed)?)
}

/// Trapezoidal `I(r) = ∫₀^r dρ / (1 + h(ρ))` at `r/2` and `r`.
pub fn weight_integral(w: &Weight, r_max: f64) -> (f64, f64) {
    let panels = INTEGRAL_PANELS;
    let dr = r_max / panels as f64;
    let g = |r: f64| 1.0 / (1.0 + w.h(r));
    let mut acc = 0.0;
    let mut half = 0.0;
    let mut prev = g(0.0);
    for i in 1..=panels {
        let cur = g(dr * i as f64);
        acc += 0.5 * dr * (prev + cur);
        prev = cur;
        if i == panels / 2 {
            half = acc;
        }
    }
    (half, acc)
}

/// Divergence can only be falsified: `I` converging over the last doubling
/// of the radius is evidence of a finite integral.
pub fn check_integral_divergence(w: &Weight, r_max: f64) -> Result<DivergenceStatus> {
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("r_max must be positive, got {r_max}")));
    }
    let (half, full) = weight_integral(w, r_max);
    if full - half < CONVERGED_GROWTH * half {
        Ok(DivergenceStatus::Falsified)
    } else {
        Ok(DivergenceStatus::NotFalsifiedUpTo { radius: r_max })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use std::f64::consts::PI;

    #[test]
    fn identity_profile_is_exact() {
        let p = hadamard_profile(&gallery::identity(2), 4.0, 16, 8, 1).unwrap();
        for row in &p.rows {
            assert!((row.varrho - row.rho).abs() < 1e-12);
        }
        assert!((p.varrho_at(1.3) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn profile_construction_invariants() {
        let p = hadamard_profile(&gallery::complex_exp(), 6.0, 64, 16, 7).unwrap();
        assert!(p.rows.windows(2).all(|w| w[1].inf_estimate <= w[0].inf_estimate));
        assert!(p.rows.windows(2).all(|w| w[1].varrho >= w[0].varrho));
        assert!(hadamard_profile(&gallery::identity(2), 1.0, 7, 8, 1).is_err());
    }

    #[test]
    fn shifted_sine_closed_form() {
        let p = hadamard_profile(&gallery::shifted_sine(2.0, 1.0), PI, 256, 2, 42).unwrap();
        for r in [0.5, 1.0, 2.0, 3.0] {
            assert!((p.varrho_at(r) - (2.0 * r + f64::sin(r))).abs() <= 1e-3);
        }
    }

    #[test]
    fn derived_weights() {
        let w = derive_weight(&gallery::identity(2), 5.0, 16, 8, 1).unwrap();
        assert!(w.grid().unwrap().iter().all(|[_, h]| *h == 0.0));
        let w = derive_weight(&gallery::shifted_sine(2.0, 1.0), PI, 256, 2, 1).unwrap();
        for rho in [0.0, 0.7, 1.9, 3.0] {
            assert!((w.h(rho) - (3.0 / (2.0 + rho.cos()) - 1.0)).abs() < 1e-3);
        }
        let sq = MapUnderTest::new("square", 1, |x: &Vector| x.map(|t| t * t), |x: &Vector| {
            crate::linalg::Matrix::from_element(1, 1, 2.0 * x[0])
        });
        assert!(matches!(derive_weight(&sq, 1.0, 8, 2, 1), Err(Error::WeightUndefined { radius }) if radius == 0.0));
    }

    #[test]
    fn integral_divergence_examples() {
        assert!(matches!(check_integral_divergence(&Weight::zero(), 20.0).unwrap(), DivergenceStatus::NotFalsifiedUpTo { .. }));
        assert!(matches!(check_integral_divergence(&Weight::cerami(), 20.0).unwrap(), DivergenceStatus::NotFalsifiedUpTo { .. }));
        let exp = Weight::custom(|r| r.exp() - 1.0);
        assert_eq!(check_integral_divergence(&exp, 20.0).unwrap(), DivergenceStatus::Falsified);
        let (_, full) = weight_integral(&exp, 20.0);
        assert!((full - (1.0 - (-20f64).exp())).abs() < 1e-6);
    }
}
