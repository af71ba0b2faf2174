//! Sampled evaluators for the classical global-inversion criteria, the ⋆
//! falsifiers, and the implication audit.

pub mod audit;
pub mod conditions;
pub mod profile;
pub mod search;
pub mod star;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::descent::{CriticalSequenceWitness, DescentConfig};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::map_model::{Condition, MapUnderTest};
use crate::variational::{banach_constant, TargetFunctional, Weight};

pub use audit::{audit_implications, gallery_audit, Anomaly, GalleryAudit};
pub use profile::{check_integral_divergence, derive_weight, hadamard_profile, HadamardProfile};

/// Witness values must replay within `REPLAY_TOL·max(1, |stored|)`.
pub const REPLAY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    CertifiedSampled,
    Falsified,
    Inconclusive,
}

/// Concrete data behind a falsified verdict. Every stored quantity can be
/// recomputed from the map alone; see [`Witness::replay`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    PointPair { x: Vec<f64>, u: Vec<f64>, image_distance: f64, distance: f64 },
    BanachSequence { points: Vec<Vec<f64>>, banach_constants: Vec<f64> },
    SublevelSequence {
        target: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        varrho: Option<f64>,
        points: Vec<Vec<f64>>,
        residual_norms: Vec<f64>,
        banach_constants: Vec<f64>,
    },
    SphereMinima { radii: Vec<f64>, points: Vec<Vec<f64>>, image_norms: Vec<f64> },
    Profile { r_max: f64, shells: usize, per_shell: usize, seed: u64, radii: Vec<f64>, varrho: Vec<f64> },
    Descent { target: Vec<f64>, weight: Weight, witness: CriticalSequenceWitness },
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REPLAY_TOL * b.abs().max(1.0)
}

fn vec_of(p: &[f64]) -> Vector {
    Vector::from_column_slice(p)
}

pub(crate) fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

impl Witness {
    /// Recomputes the stored quantities; returns the first index that does
    /// not reproduce.
    pub fn replay(&self, map: &MapUnderTest) -> Result<Option<usize>> {
        let check_len = |a: usize, b: usize| {
            if a == b {
                Ok(())
            } else {
                Err(Error::Schema(format!("witness arrays have lengths {a} and {b}")))
            }
        };
        let point = |p: &[f64]| -> Result<Vector> {
            let v = vec_of(p);
            map.check_dim(&v)?;
            Ok(v)
        };
        match self {
            Witness::PointPair { x, u, image_distance, distance } => {
                let (x, u) = (point(x)?, point(u)?);
                let a = (map.try_eval(&x)? - map.try_eval(&u)?).norm();
                Ok((!close(a, *image_distance) || !close((&x - &u).norm(), *distance)).then_some(0))
            }
            Witness::BanachSequence { points, banach_constants } => {
                check_len(points.len(), banach_constants.len())?;
                for (i, (p, s)) in points.iter().zip(banach_constants).enumerate() {
                    if !close(banach_constant(map, &point(p)?)?, *s) {
                        return Ok(Some(i));
                    }
                }
                Ok(None)
            }
            Witness::SublevelSequence { target, points, residual_norms, banach_constants, .. } => {
                check_len(points.len(), residual_norms.len())?;
                check_len(points.len(), banach_constants.len())?;
                let y = point(target)?;
                for i in 0..points.len() {
                    let x = point(&points[i])?;
                    let r = (map.try_eval(&x)? - &y).norm();
                    if !close(r, residual_norms[i]) || !close(banach_constant(map, &x)?, banach_constants[i]) {
                        return Ok(Some(i));
                    }
                }
                Ok(None)
            }
            Witness::SphereMinima { radii, points, image_norms } => {
                check_len(points.len(), radii.len())?;
                check_len(points.len(), image_norms.len())?;
                for i in 0..points.len() {
                    let x = point(&points[i])?;
                    if !close(map.try_eval(&x)?.norm(), image_norms[i]) || !close(x.norm(), radii[i]) {
                        return Ok(Some(i));
                    }
                }
                Ok(None)
            }
            Witness::Profile { r_max, shells, per_shell, seed, radii, varrho } => {
                check_len(radii.len(), varrho.len())?;
                let p = hadamard_profile(map, *r_max, *shells, *per_shell, *seed)?;
                Ok(radii.iter().zip(varrho).position(|(r, v)| !close(p.varrho_at(*r), *v)))
            }
            Witness::Descent { target, weight, witness } => {
                witness.validate()?;
                let f = TargetFunctional::new(map, point(target)?)?;
                witness.first_mismatch(&f, weight, REPLAY_TOL)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubVerdict {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

/// The ⋆ verdict split into its two halves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarParts {
    pub dagger: SubVerdict,
    pub double_dagger: SubVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<StarParts>,
    pub note: String,
}

impl ConditionVerdict {
    pub fn certified(note: impl Into<String>) -> Self {
        ConditionVerdict { status: Status::CertifiedSampled, witness: None, estimate: None, parts: None, note: note.into() }
    }

    pub fn falsified(witness: Witness, note: impl Into<String>) -> Self {
        ConditionVerdict { status: Status::Falsified, witness: Some(witness), estimate: None, parts: None, note: note.into() }
    }

    pub fn inconclusive(note: impl Into<String>) -> Self {
        ConditionVerdict { status: Status::Inconclusive, witness: None, estimate: None, parts: None, note: note.into() }
    }

    pub fn with_estimate(mut self, estimate: f64) -> Self {
        self.estimate = Some(estimate);
        self
    }

    /// Every witness attached to this verdict, including the ⋆ halves.
    pub fn witnesses(&self) -> Vec<&Witness> {
        let mut out: Vec<&Witness> = self.witness.iter().collect();
        if let Some(parts) = &self.parts {
            for sub in [&parts.dagger, &parts.double_dagger] {
                if let Some(w) = &sub.witness {
                    if !out.contains(&w) {
                        out.push(w);
                    }
                }
            }
        }
        out
    }
}

/// How `check` chooses the weight for the ⋆ evaluator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum WeightSpec {
    Zero,
    Cerami,
    Derived,
    File(String),
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Zero => f.write_str("zero"),
            WeightSpec::Cerami => f.write_str("cerami"),
            WeightSpec::Derived => f.write_str("derived"),
            WeightSpec::File(p) => f.write_str(p),
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "zero" => WeightSpec::Zero,
            "cerami" => WeightSpec::Cerami,
            "derived" => WeightSpec::Derived,
            "" => return Err(Error::InvalidArgument("empty weight spec".into())),
            path => WeightSpec::File(path.to_string()),
        })
    }
}

impl From<WeightSpec> for String {
    fn from(w: WeightSpec) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for WeightSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl WeightSpec {
    /// Resolves to a concrete weight. `derived` needs the map's derived
    /// weight; when that is undefined the zero weight is used.
    pub fn resolve(&self, derived: Option<&Weight>) -> Result<Weight> {
        Ok(match self {
            WeightSpec::Zero => Weight::zero(),
            WeightSpec::Cerami => Weight::cerami(),
            WeightSpec::Derived => derived.cloned().unwrap_or_else(Weight::zero),
            WeightSpec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidArgument(format!("cannot read weight file {path}: {e}")))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidArgument(format!("weight file {path} is not a weight: {e}")))?
            }
        })
    }
}

/// Full effective configuration of a criteria run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
    /// Target for conditions 5 and 6; the origin when absent.
    pub target: Option<Vec<f64>>,
    pub weight: WeightSpec,
    pub criteria: Vec<Condition>,
    pub profile_radius: f64,
    pub shells: usize,
    pub per_shell: usize,
    pub plastock_radii: Vec<f64>,
    pub varrho_list: Vec<f64>,
    pub rabier_iters: usize,
    pub descent: DescentConfig,
}

impl CheckConfig {
    pub fn new(radius: f64, samples: usize, seed: u64) -> Self {
        CheckConfig {
            radius,
            samples,
            seed,
            target: None,
            weight: WeightSpec::Derived,
            criteria: Condition::CHAIN.to_vec(),
            profile_radius: 2.0 * radius,
            shells: 256,
            per_shell: 64,
            plastock_radii: vec![radius / 8.0, radius / 4.0, radius / 2.0, radius],
            varrho_list: vec![0.5, 1.0, 2.0, 4.0],
            rabier_iters: 2000,
            descent: DescentConfig::new(&[]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if self.samples < 2 {
            return bad(format!("need at least 2 samples, got {}", self.samples));
        }
        if self.criteria.is_empty() {
            return bad("criteria list is empty".into());
        }
        let increasing = |v: &[f64]| !v.is_empty() && v[0] > 0.0 && v.windows(2).all(|p| p[1] > p[0]);
        if !increasing(&self.plastock_radii) || !increasing(&self.varrho_list) {
            return bad("plastock_radii and varrho_list must be positive and increasing".into());
        }
        if self.rabier_iters == 0 || self.per_shell == 0 {
            return bad("rabier_iters and per_shell must be positive".into());
        }
        let mut d = self.descent.clone();
        d.start.clear();
        d.validate()
    }
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig::new(10.0, 2000, 42)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub map: String,
    pub verdicts: BTreeMap<Condition, ConditionVerdict>,
    pub sampling: Sampling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_weight: Option<Weight>,
    pub anomalies: Vec<Anomaly>,
}

impl CriteriaReport {
    pub fn status(&self, c: Condition) -> Option<Status> {
        self.verdicts.get(&c).map(|v| v.status)
    }
}

fn numerical_guard(r: Result<ConditionVerdict>) -> Result<ConditionVerdict> {
    match r {
        Err(e) if e.is_numerical() => Ok(ConditionVerdict::inconclusive(format!("numerical failure: {e}"))),
        other => other,
    }
}

/// Runs the selected evaluators on one map. Each condition draws from its
/// own `(seed, map, condition)` stream, so the cells run concurrently
/// without affecting the result.
pub fn check_all(map: &MapUnderTest, cfg: &CheckConfig) -> Result<CriteriaReport> {
    cfg.validate()?;
    let n = map.dim();
    let y = match &cfg.target {
        Some(t) => {
            let v = vec_of(t);
            map.check_dim(&v)?;
            v
        }
        None => Vector::zeros(n),
    };
    let profile = hadamard_profile(map, cfg.profile_radius, cfg.shells, cfg.per_shell, cfg.seed)?;
    let derived = match profile::derive_weight_from_profile(&profile) {
        Ok(w) => {
            let status = check_integral_divergence(&w, cfg.profile_radius)?;
            Some(w.with_divergence_status(status))
        }
        Err(Error::WeightUndefined { .. }) => None,
        Err(e) => return Err(e),
    };
    let star_weight = cfg.weight.resolve(derived.as_ref())?;

    let mut criteria = cfg.criteria.clone();
    criteria.sort();
    criteria.dedup();
    let results: Vec<(Condition, Result<ConditionVerdict>)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|&c| {
                let (y, profile, star_weight) = (&y, &profile, &star_weight);
                s.spawn(move || (c, numerical_guard(run_condition(map, cfg, c, y, profile, star_weight))))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criteria worker panicked")).collect()
    });
    let mut verdicts = BTreeMap::new();
    for (c, r) in results {
        verdicts.insert(c, r?);
    }
    let anomalies = audit::report_anomalies(map.name(), &verdicts);
    Ok(CriteriaReport {
        map: map.name().to_string(),
        verdicts,
        sampling: Sampling { radius: cfg.radius, samples: cfg.samples, seed: cfg.seed },
        derived_weight: derived,
        anomalies,
    })
}

fn run_condition(
    map: &MapUnderTest,
    cfg: &CheckConfig,
    c: Condition,
    y: &Vector,
    profile: &HadamardProfile,
    star_weight: &Weight,
) -> Result<ConditionVerdict> {
    use conditions::*;
    let (r, n, seed) = (cfg.radius, cfg.samples, cfg.seed);
    match c {
        Condition::Isometry => check_isometry(map, r, n, seed),
        Condition::Expansive => check_expansive(map, r, n, seed),
        Condition::UniformLowerBound => check_uniform_lower_bound(map, r, n, seed),
        Condition::IntegralCondition => Ok(integral_condition_verdict(profile)),
        Condition::Plastock => check_plastock(map, &cfg.plastock_radii, cfg.per_shell, n, seed),
        Condition::Katriel => check_katriel(map, y, &cfg.varrho_list, n, r, seed, &cfg.descent),
        Condition::WeightedPalaisSmale => {
            let grid = star::default_y_grid(map.dim());
            let starts = star::default_starts(map.dim(), r);
            star::check_star(map, star_weight, &grid, &starts, &cfg.descent)
        }
        Condition::Rabier => check_rabier(map, y, r, cfg.rabier_iters, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    #[test]
    fn weight_spec_round_trip() {
        for s in ["zero", "cerami", "derived", "/tmp/w.json"] {
            let w: WeightSpec = s.parse().unwrap();
            assert_eq!(w.to_string(), s);
            let j = serde_json::to_string(&w).unwrap();
            assert_eq!(serde_json::from_str::<WeightSpec>(&j).unwrap(), w);
        }
    }

    #[test]
    fn verdict_keys_serialize_as_condition_tags() {
        let mut verdicts = BTreeMap::new();
        verdicts.insert(Condition::IntegralCondition, ConditionVerdict::inconclusive("x"));
        verdicts.insert(Condition::Isometry, ConditionVerdict::certified("y"));
        let j = serde_json::to_value(&verdicts).unwrap();
        assert_eq!(j["starstar"]["status"], "inconclusive");
        assert_eq!(j["1"]["status"], "certified_sampled");
        let back: BTreeMap<Condition, ConditionVerdict> = serde_json::from_value(j).unwrap();
        assert_eq!(back, verdicts);
    }

    #[test]
    fn pair_witness_replays() {
        let d = gallery::diagonal(&[2.0, 3.0]);
        let w = Witness::PointPair { x: vec![1.0, 0.0], u: vec![0.0, 0.0], image_distance: 2.0, distance: 1.0 };
        assert_eq!(w.replay(&d).unwrap(), None);
        let bad = Witness::PointPair { x: vec![1.0, 0.0], u: vec![0.0, 0.0], image_distance: 2.001, distance: 1.0 };
        assert_eq!(bad.replay(&d).unwrap(), Some(0));
    }

    #[test]
    fn config_validation() {
        assert!(CheckConfig::default().validate().is_ok());
        let c = CheckConfig { samples: 1, ..CheckConfig::default() };
        assert!(c.validate().is_err());
        let c = CheckConfig { varrho_list: vec![1.0, 0.5], ..CheckConfig::default() };
        assert!(c.validate().is_err());
    }
}
