//! Weighted-criticality descent on `F_y`: produces either a solution of
//! `f(x) = y` or a recorded near-critical sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::map_model::MapUnderTest;
use crate::variational::{Evaluation, TargetFunctional, Weight};

pub const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 200;
const STEP_CAP_FACTOR: f64 = 10.0;
/// `|∇F| ≤ STALL_RATIO·|f − y|` marks a point whose Jacobian is numerically singular.
const STALL_RATIO: f64 = 1e-6;

/// `εₙ = 10^{−n/2}` for `n = 1..=count`.
pub fn default_schedule(count: usize) -> Vec<f64> {
    (1..=count).map(|n| 10f64.powf(-(n as f64) / 2.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub start: Vec<f64>,
    pub residual_tol: f64,
    pub criticality_targets: Vec<f64>,
    pub max_iters: usize,
    pub escape_norm: f64,
    pub f_bound_window: f64,
}

impl DescentConfig {
    pub fn new(start: &[f64]) -> Self {
        DescentConfig {
            start: start.to_vec(),
            residual_tol: 1e-10,
            criticality_targets: default_schedule(30),
            max_iters: 20_000,
            escape_norm: 10.0,
            f_bound_window: 1e-3,
        }
    }

    pub fn with_start(&self, start: &[f64]) -> Self {
        DescentConfig { start: start.to_vec(), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.start.iter().any(|v| !v.is_finite()) {
            return bad("start point must be finite");
        }
        if !(self.residual_tol > 0.0) || !(self.escape_norm > 0.0) || !(self.f_bound_window > 0.0) {
            return bad("residual_tol, escape_norm and f_bound_window must be positive");
        }
        let eps = &self.criticality_targets;
        if eps.is_empty() || eps.len() > self.max_iters {
            return bad("criticality_targets must be nonempty and no longer than max_iters");
        }
        if !(eps[0] > 0.0) || eps.windows(2).any(|p| !(p[1] < p[0] && p[1] > 0.0)) {
            return bad("criticality_targets must be positive and strictly decreasing");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    ConvergedToSolution,
    ConvergedToCriticalNonsolution,
    EscapedToInfinity,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSequenceWitness {
    pub points: Vec<Vec<f64>>,
    pub f_values: Vec<f64>,
    pub weighted_criticalities: Vec<f64>,
    pub level: f64,
    pub classification: Classification,
}

impl CriticalSequenceWitness {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn final_point(&self) -> Option<Vector> {
        self.points.last().map(|p| Vector::from_column_slice(p))
    }

    pub fn final_weighted_criticality(&self) -> Option<f64> {
        self.weighted_criticalities.last().copied()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if n == 0 || self.f_values.len() != n || self.weighted_criticalities.len() != n {
            return Err(Error::Schema(format!(
                "witness lists must have equal nonzero length (points {n}, f_values {}, weighted_criticalities {})",
                self.f_values.len(),
                self.weighted_criticalities.len()
            )));
        }
        Ok(())
    }

    /// Recomputes every stored value and returns the first index whose value
    /// or weighted criticality differs by more than `tol·max(1, |stored|)`.
    pub fn first_mismatch(&self, f: &TargetFunctional<'_>, w: &Weight, tol: f64) -> Result<Option<usize>> {
        let close = |a: f64, b: f64| (a - b).abs() <= tol * b.abs().max(1.0);
        for (i, p) in self.points.iter().enumerate() {
            let x = Vector::from_column_slice(p);
            f.map().check_dim(&x)?;
            let e = f.evaluate(&x)?;
            let wc = w.scale(e.criticality(), x.norm());
            if !close(e.value, self.f_values[i]) || !close(wc, self.weighted_criticalities[i]) {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub witness: CriticalSequenceWitness,
    pub final_point: Vector,
    pub iterations: usize,
    pub diagnostic: Option<String>,
}

struct Checkpoints {
    points: Vec<Vector>,
    f_values: Vec<f64>,
    wcs: Vec<f64>,
}

impl Checkpoints {
    fn push(&mut self, x: &Vector, f: f64, wc: f64) {
        self.points.push(x.clone());
        self.f_values.push(f);
        self.wcs.push(wc);
    }

    /// Last three checkpoints lie beyond `escape_norm` with strictly growing
    /// norms, bounded F spread, and increments that are not collapsing.
    fn escaping(&self, cfg: &DescentConfig) -> bool {
        let n = self.points.len();
        if n < 3 {
            return false;
        }
        let norms: Vec<f64> = self.points[n - 3..].iter().map(|p| p.norm()).collect();
        if norms.iter().any(|r| *r <= cfg.escape_norm) || !(norms[0] < norms[1] && norms[1] < norms[2]) {
            return false;
        }
        let fs = &self.f_values[n - 3..];
        let spread = fs.iter().cloned().fold(f64::MIN, f64::max) - fs.iter().cloned().fold(f64::MAX, f64::min);
        if spread >= cfg.f_bound_window {
            return false;
        }
        let (d1, d2) = (norms[1] - norms[0], norms[2] - norms[1]);
        d2 >= 0.5 * d1
    }

    /// Successive distances over the tail (checkpoints then `x`) are shrinking.
    fn converging(&self, x: &Vector) -> bool {
        let mut tail: Vec<&Vector> = self.points.iter().rev().take(3).collect();
        tail.reverse();
        if tail.last().is_none_or(|p| *p != x) {
            tail.push(x);
        }
        let k = tail.len();
        if k < 3 {
            return false;
        }
        let d1 = (tail[k - 2] - tail[k - 3]).norm();
        let d2 = (tail[k - 1] - tail[k - 2]).norm();
        d2 <= 0.5 * d1 || d2 <= 1e-8 * (1.0 + x.norm())
    }
}

fn is_stalled_nonsolution(e: &Evaluation) -> bool {
    e.criticality() <= STALL_RATIO * e.residual_norm
}

/// Gradient descent with Armijo backtracking on `F_y`, recording the first
/// iterate whose weighted criticality drops below each `εₙ`.
pub fn minimize(f: &TargetFunctional<'_>, w: &Weight, cfg: &DescentConfig) -> Result<DescentOutcome> {
    cfg.validate()?;
    let mut x = Vector::from_column_slice(&cfg.start);
    f.map().check_dim(&x)?;
    let mut e = f.evaluate(&x)?;
    let targets = &cfg.criticality_targets;
    let mut k = 0;
    let mut cps = Checkpoints { points: Vec::new(), f_values: Vec::new(), wcs: Vec::new() };
    let mut prev: Option<(Vector, Vector)> = None;
    let mut t_prev = 1.0;
    let mut diagnostic = None;

    let mut iter = 0;
    let classification = loop {
        let wc = w.scale(e.criticality(), x.norm());
        if k < targets.len() && wc <= targets[k] {
            cps.push(&x, e.value, wc);
            while k < targets.len() && wc <= targets[k] {
                k += 1;
            }
            if cps.escaping(cfg) {
                break Classification::EscapedToInfinity;
            }
        }
        if e.residual_norm <= cfg.residual_tol {
            break Classification::ConvergedToSolution;
        }
        if k == targets.len() {
            if is_stalled_nonsolution(&e) && cps.converging(&x) {
                break Classification::ConvergedToCriticalNonsolution;
            }
            diagnostic = Some("criticality schedule exhausted without a convergent tail".into());
            break Classification::BudgetExhausted;
        }
        let gnorm = e.gradient.norm();
        if gnorm == 0.0 {
            break Classification::ConvergedToCriticalNonsolution;
        }
        if iter >= cfg.max_iters {
            diagnostic = Some(format!("iteration budget {} reached", cfg.max_iters));
            break Classification::BudgetExhausted;
        }

        let mut t = match &prev {
            Some((px, pg)) => {
                let s = &x - px;
                let yv = &e.gradient - pg;
                let sy = s.dot(&yv);
                if sy > 0.0 {
                    s.norm_squared() / sy
                } else {
                    2.0 * t_prev
                }
            }
            None => 1.0,
        };
        t = t.min(STEP_CAP_FACTOR * (1.0 + x.norm()) / gnorm);

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = &x - t * &e.gradient;
            if trial == x {
                break;
            }
            match f.evaluate(&trial) {
                Ok(te) if te.value <= e.value - ARMIJO_C * t * gnorm * gnorm => {
                    accepted = Some((trial, te));
                    break;
                }
                Ok(_) => {}
                Err(err) if err.is_numerical() => {}
                Err(err) => return Err(err),
            }
            t *= 0.5;
        }
        match accepted {
            Some((nx, ne)) => {
                prev = Some((std::mem::replace(&mut x, nx), std::mem::replace(&mut e, ne).gradient));
                t_prev = t;
                iter += 1;
            }
            None => {
                if is_stalled_nonsolution(&e) && cps.converging(&x) {
                    break Classification::ConvergedToCriticalNonsolution;
                }
                diagnostic = Some(format!("line search step underflow at iteration {iter}"));
                break Classification::BudgetExhausted;
            }
        }
    };

    let wc = w.scale(e.criticality(), x.norm());
    let fresh = cps.points.last().is_none_or(|p| *p != x);
    if cps.wcs.last().is_none_or(|last| wc <= *last) && fresh {
        cps.push(&x, e.value, wc);
    }
    let witness = CriticalSequenceWitness {
        points: cps.points.iter().map(|p| p.iter().copied().collect()).collect(),
        f_values: cps.f_values,
        weighted_criticalities: cps.wcs,
        level: e.value,
        classification,
    };
    Ok(DescentOutcome { witness, final_point: x, iterations: iter, diagnostic })
}

/// Outcome of the numerical form of the lower-semicontinuity lemma on a witness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitPointCheck {
    /// The tail converges and weighted criticality decays, so the lemma applies.
    pub applicable: bool,
    pub final_criticality: f64,
    pub min_weighted_criticality: f64,
    pub holds: bool,
}

/// If the recorded iterates converge and their weighted criticalities go to
/// zero, the criticality at the final iterate must not exceed the smallest
/// recorded weighted criticality (plus `tol`).
pub fn limit_point_check(
    f: &TargetFunctional<'_>,
    witness: &CriticalSequenceWitness,
    tol: f64,
) -> Result<LimitPointCheck> {
    witness.validate()?;
    let pts: Vec<Vector> = witness.points.iter().map(|p| Vector::from_column_slice(p)).collect();
    let last = pts.last().unwrap();
    let final_criticality = f.criticality(last)?;
    let min_wc = witness.weighted_criticalities.iter().cloned().fold(f64::INFINITY, f64::min);
    let n = pts.len();
    let applicable = n >= 3 && {
        let d1 = (&pts[n - 2] - &pts[n - 3]).norm();
        let d2 = (&pts[n - 1] - &pts[n - 2]).norm();
        d2 <= d1 && min_wc <= witness.weighted_criticalities[0]
    };
    let holds = !applicable || final_criticality <= min_wc + tol;
    Ok(LimitPointCheck { applicable, final_criticality, min_weighted_criticality: min_wc, holds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub classifications: Vec<Classification>,
    pub witnesses: Vec<CriticalSequenceWitness>,
    /// A start converged to a point with `f(x̂) ≠ y` and vanishing criticality,
    /// which forces `Sur df(x̂) = 0`.
    pub contradicts_local_diffeomorphism: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveOutcome {
    Solved { solution: Vec<f64>, start_index: usize, residual: f64, witness: CriticalSequenceWitness },
    Failed(FailureReport),
}

impl SolveOutcome {
    pub fn solution(&self) -> Option<Vector> {
        match self {
            SolveOutcome::Solved { solution, .. } => Some(Vector::from_column_slice(solution)),
            SolveOutcome::Failed(_) => None,
        }
    }
}

/// Runs [`minimize`] from each start in order and returns the first solution.
pub fn solve(map: &MapUnderTest, y: &Vector, w: &Weight, starts: &[Vector]) -> Result<SolveOutcome> {
    solve_with(map, y, w, starts, &DescentConfig::new(&vec![0.0; map.dim()]))
}

/// As [`solve`], with every setting except the start taken from `template`.
pub fn solve_with(
    map: &MapUnderTest,
    y: &Vector,
    w: &Weight,
    starts: &[Vector],
    template: &DescentConfig,
) -> Result<SolveOutcome> {
    if starts.is_empty() {
        return Err(Error::InvalidArgument("multistart list is empty".into()));
    }
    let f = TargetFunctional::new(map, y.clone())?;
    let mut classifications = Vec::with_capacity(starts.len());
    let mut witnesses = Vec::with_capacity(starts.len());
    for (i, s) in starts.iter().enumerate() {
        let start: Vec<f64> = s.iter().copied().collect();
        let out = minimize(&f, w, &template.with_start(&start))?;
        if out.witness.classification == Classification::ConvergedToSolution {
            let residual = f.residual(&out.final_point)?.norm();
            return Ok(SolveOutcome::Solved {
                solution: out.final_point.iter().copied().collect(),
                start_index: i,
                residual,
                witness: out.witness,
            });
        }
        classifications.push(out.witness.classification);
        witnesses.push(out.witness);
    }
    let contradicts = classifications.contains(&Classification::ConvergedToCriticalNonsolution);
    Ok(SolveOutcome::Failed(FailureReport { classifications, witnesses, contradicts_local_diffeomorphism: contradicts }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::linalg::{vector, Matrix};

    fn square() -> MapUnderTest {
        MapUnderTest::new("square", 1, |x: &Vector| x.map(|t| t * t), |x: &Vector| {
            Matrix::from_element(1, 1, 2.0 * x[0])
        })
    }

    #[test]
    fn schedule_is_half_decades() {
        let s = default_schedule(30);
        assert_eq!(s.len(), 30);
        assert!((s[0] - 10f64.powf(-0.5)).abs() < 1e-15);
        assert!((s[29] - 1e-15).abs() < 1e-28);
    }

    #[test]
    fn config_validation() {
        let mut c = DescentConfig::new(&[0.0]);
        assert!(c.validate().is_ok());
        c.criticality_targets = vec![1.0, 1.0];
        assert!(c.validate().is_err());
        c.criticality_targets = vec![];
        assert!(c.validate().is_err());
        let mut c = DescentConfig::new(&[0.0]);
        c.residual_tol = 0.0;
        assert!(c.validate().is_err());
        let mut c = DescentConfig::new(&[f64::NAN]);
        c.max_iters = 5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn identity_quadratic_bowl() {
        let id = gallery::identity(2);
        let f = TargetFunctional::new(&id, vector(&[2.0, -1.0])).unwrap();
        let out = minimize(&f, &Weight::zero(), &DescentConfig::new(&[0.0, 0.0])).unwrap();
        assert_eq!(out.witness.classification, Classification::ConvergedToSolution);
        assert!((&out.final_point - vector(&[2.0, -1.0])).norm() <= 1e-10);
    }

    #[test]
    fn arctan_escapes() {
        let at = gallery::arctan();
        let f = TargetFunctional::new(&at, vector(&[2.0])).unwrap();
        let mut cfg = DescentConfig::new(&[0.0]);
        cfg.escape_norm = 1e3;
        let out = minimize(&f, &Weight::zero(), &cfg).unwrap();
        let wit = &out.witness;
        assert_eq!(wit.classification, Classification::EscapedToInfinity, "{:?}", out.diagnostic);
        assert!(out.final_point.norm() > 1e3);
        assert!(wit.level > 0.090 && wit.level < 0.095, "level {}", wit.level);
        assert!(wit.final_weighted_criticality().unwrap() <= 1e-4);
    }

    #[test]
    fn singular_minimum_is_a_critical_nonsolution() {
        let sq = square();
        let f = TargetFunctional::new(&sq, vector(&[-1.0])).unwrap();
        let out = minimize(&f, &Weight::zero(), &DescentConfig::new(&[1.3])).unwrap();
        assert_eq!(out.witness.classification, Classification::ConvergedToCriticalNonsolution, "{:?}", out.diagnostic);
        assert!(out.final_point[0].abs() < 1e-6);
        assert!((out.witness.level - 0.5).abs() < 1e-10);
    }

    #[test]
    fn recorded_sequences_are_monotone() {
        let ss = gallery::shifted_sine(2.0, 1.0);
        let f = TargetFunctional::new(&ss, vector(&[5.0])).unwrap();
        let out = minimize(&f, &Weight::cerami(), &DescentConfig::new(&[-4.0])).unwrap();
        let w = &out.witness;
        w.validate().unwrap();
        assert!(w.f_values.windows(2).all(|p| p[1] <= p[0]));
        assert!(w.weighted_criticalities.windows(2).all(|p| p[1] <= p[0]));
        assert_eq!(w.first_mismatch(&f, &Weight::cerami(), 1e-9).unwrap(), None);
    }

    #[test]
    fn limit_point_lemma_on_converging_run() {
        let sq = square();
        let f = TargetFunctional::new(&sq, vector(&[-1.0])).unwrap();
        let out = minimize(&f, &Weight::zero(), &DescentConfig::new(&[0.7])).unwrap();
        let check = limit_point_check(&f, &out.witness, 1e-12).unwrap();
        assert!(check.applicable);
        assert!(check.holds);
    }

    #[test]
    fn solve_identity_and_saturating() {
        let id = gallery::identity(2);
        let y = vector(&[0.3, -7.0]);
        let out = solve(&id, &y, &Weight::zero(), &[vector(&[0.0, 0.0])]).unwrap();
        assert!((out.solution().unwrap() - &y).norm() <= 1e-10);

        let sat = gallery::saturating();
        let starts = [vector(&[-2.0]), vector(&[0.0]), vector(&[2.0])];
        match solve(&sat, &vector(&[2.0]), &Weight::zero(), &starts).unwrap() {
            SolveOutcome::Failed(rep) => {
                assert!(rep.classifications.iter().all(|c| *c == Classification::EscapedToInfinity), "{:?}", rep.classifications);
                assert!(!rep.contradicts_local_diffeomorphism);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn failure_flags_singular_critical_points() {
        let sq = square();
        match solve(&sq, &vector(&[-1.0]), &Weight::zero(), &[vector(&[0.5])]).unwrap() {
            SolveOutcome::Failed(rep) => assert!(rep.contradicts_local_diffeomorphism),
            other => panic!("unexpected {other:?}"),
        }
        assert!(solve(&sq, &vector(&[1.0]), &Weight::zero(), &[]).is_err());
    }

    #[test]
    fn witness_json_has_exact_fields() {
        let id = gallery::identity(2);
        let f = TargetFunctional::new(&id, vector(&[1.0, 1.0])).unwrap();
        let out = minimize(&f, &Weight::zero(), &DescentConfig::new(&[0.0, 0.0])).unwrap();
        let v = serde_json::to_value(&out.witness).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["classification", "f_values", "level", "points", "weighted_criticalities"]);
        assert_eq!(v["classification"], "converged_to_solution");
    }
}
