//! Evaluators for conditions 1)–6) and the ⋆⋆ verdict.

use rand::Rng;

use super::profile::{HadamardProfile, CONVERGED_GROWTH};
use super::search::{descend, norms_increasing, Trace};
use super::{to_vec, ConditionVerdict, Witness};
use crate::descent::{minimize, DescentConfig};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::map_model::MapUnderTest;
use crate::sampling;
use crate::variational::{banach_constant, TargetFunctional, Weight};

pub const ISOMETRY_TOL: f64 = 1e-9;
/// Lower bounds below this are treated as zero.
pub const POSITIVITY_FLOOR: f64 = 1e-6;
/// A ball-R minimum below this fraction of the ball-R/2 minimum is a decreasing trend.
pub const TREND_FACTOR: f64 = 0.9;
pub const STABILITY_TOL: f64 = 0.05;
/// ⋆⋆ is certified when `ϱ` still grows by this fraction over the last doubling.
pub const HADAMARD_GROWTH: f64 = 0.1;
/// A coercivity sweep plateaus when the last minimum is below this multiple of the previous one.
pub const COERCIVE_GROWTH: f64 = 1.1;
pub const RABIER_MERIT: f64 = 1e-8;
pub const RABIER_STALL: f64 = 1e-6;
pub const DISCOVERY_SIGMA: f64 = 1e-4;
pub const DISCOVERY_DRIFT: f64 = 1e-4;
const SHELLS: usize = 8;

fn pairs<R: Rng>(rng: &mut R, n: usize, radius: f64, count: usize) -> Vec<(Vector, Vector)> {
    sampling::shell_stratified(rng, n, radius, count, SHELLS)
        .into_iter()
        .map(|x| loop {
            let u = sampling::in_ball(rng, n, radius);
            if (&x - &u).norm() > 1e-12 {
                break (x.clone(), u);
            }
        })
        .collect()
}

fn require_samples(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n}")));
    }
    Ok(())
}

/// Condition 1): `|f(x) − f(u)| = |x − u|` on sampled pairs.
pub fn check_isometry(map: &MapUnderTest, radius: f64, samples: usize, seed: u64) -> Result<ConditionVerdict> {
    require_samples(samples)?;
    let mut rng = sampling::stream(seed, map.name(), "1");
    for (x, u) in pairs(&mut rng, map.dim(), radius, samples) {
        let a = (map.try_eval(&x)? - map.try_eval(&u)?).norm();
        let d = (&x - &u).norm();
        if (a - d).abs() > ISOMETRY_TOL * (1.0 + d) {
            return Ok(ConditionVerdict::falsified(
                Witness::PointPair { x: to_vec(&x), u: to_vec(&u), image_distance: a, distance: d },
                format!("|f(x) - f(u)| = {a} but |x - u| = {d}"),
            ));
        }
    }
    Ok(ConditionVerdict::certified(format!("{samples} pairs preserve distance within {ISOMETRY_TOL}·(1+d)")))
}

struct PairMin {
    ratio: f64,
    witness: Witness,
}

fn min_pair_ratio<R: Rng>(map: &MapUnderTest, rng: &mut R, radius: f64, samples: usize) -> Result<PairMin> {
    let mut best: Option<PairMin> = None;
    for (x, u) in pairs(rng, map.dim(), radius, samples) {
        let a = (map.try_eval(&x)? - map.try_eval(&u)?).norm();
        let d = (&x - &u).norm();
        let ratio = a / d;
        if best.as_ref().is_none_or(|b| ratio < b.ratio) {
            let witness = Witness::PointPair { x: to_vec(&x), u: to_vec(&u), image_distance: a, distance: d };
            best = Some(PairMin { ratio, witness });
        }
    }
    Ok(best.expect("at least one pair"))
}

/// Condition 2): expansivity, with the minimum pair ratio as `alpha_estimate`.
pub fn check_expansive(map: &MapUnderTest, radius: f64, samples: usize, seed: u64) -> Result<ConditionVerdict> {
    require_samples(samples)?;
    let mut rng = sampling::stream(seed, map.name(), "2");
    let full = min_pair_ratio(map, &mut rng, radius, samples)?;
    let half = min_pair_ratio(map, &mut rng, 0.5 * radius, samples)?;
    let note = format!("minimum pair ratio {} on radius {radius}, {} on radius {}", full.ratio, half.ratio, 0.5 * radius);
    let trend_ok = full.ratio >= TREND_FACTOR * half.ratio;
    let best = if half.ratio < full.ratio { half } else { full };
    let alpha = best.ratio;
    let verdict = if alpha < POSITIVITY_FLOOR {
        ConditionVerdict::falsified(best.witness, note)
    } else if trend_ok {
        ConditionVerdict::certified(note)
    } else {
        ConditionVerdict::inconclusive(format!("decreasing with the ball: {note}"))
    };
    Ok(verdict.with_estimate(alpha))
}

struct PointMin {
    sigma: f64,
    x: Vector,
}

fn min_sigma<R: Rng>(map: &MapUnderTest, rng: &mut R, radius: f64, samples: usize) -> Result<PointMin> {
    let mut best = PointMin { sigma: f64::INFINITY, x: Vector::zeros(map.dim()) };
    for x in sampling::shell_stratified(rng, map.dim(), radius, samples, SHELLS) {
        let s = banach_constant(map, &x)?;
        if s < best.sigma {
            best = PointMin { sigma: s, x };
        }
    }
    Ok(best)
}

/// Condition 3): `|df(x)v| ≥ alpha|v|` with the sampled minimum Banach constant as alpha.
pub fn check_uniform_lower_bound(map: &MapUnderTest, radius: f64, samples: usize, seed: u64) -> Result<ConditionVerdict> {
    require_samples(samples)?;
    let mut rng = sampling::stream(seed, map.name(), "3");
    let full = min_sigma(map, &mut rng, radius, samples)?;
    let half = min_sigma(map, &mut rng, 0.5 * radius, samples)?;
    let trend_ok = full.sigma >= TREND_FACTOR * half.sigma;
    let best = if half.sigma < full.sigma { &half } else { &full };
    let alpha = best.sigma;
    if alpha < POSITIVITY_FLOOR {
        return Ok(ConditionVerdict::falsified(
            Witness::BanachSequence { points: vec![to_vec(&best.x)], banach_constants: vec![alpha] },
            format!("Banach constant {alpha:e} below {POSITIVITY_FLOOR}"),
        )
        .with_estimate(alpha));
    }
    if !trend_ok {
        return Ok(ConditionVerdict::inconclusive(format!(
            "minimum Banach constant falls from {} (radius {}) to {} (radius {radius})",
            half.sigma,
            0.5 * radius,
            full.sigma
        ))
        .with_estimate(alpha));
    }
    Ok(ConditionVerdict::certified(format!("minimum Banach constant {alpha}")).with_estimate(alpha))
}

/// ⋆⋆ verdict from the growth of `ϱ` over the last doubling of the profile radius.
pub fn integral_condition_verdict(profile: &HadamardProfile) -> ConditionVerdict {
    let growth = profile.last_doubling_growth();
    let half = 0.5 * profile.r_max;
    let radii = vec![half, profile.r_max];
    let varrho: Vec<f64> = radii.iter().map(|r| profile.varrho_at(*r)).collect();
    let note = format!("varrho({half}) = {}, varrho({}) = {}, growth {growth}", varrho[0], profile.r_max, varrho[1]);
    if growth < CONVERGED_GROWTH {
        let w = Witness::Profile {
            r_max: profile.r_max,
            shells: profile.shells,
            per_shell: profile.per_shell,
            seed: profile.seed,
            radii,
            varrho,
        };
        ConditionVerdict::falsified(w, note).with_estimate(growth)
    } else if growth >= HADAMARD_GROWTH {
        ConditionVerdict::certified(note).with_estimate(growth)
    } else {
        ConditionVerdict::inconclusive(note).with_estimate(growth)
    }
}

/// Extremum over the first `n`, `2n` and `4n` values; stable when both
/// doublings move it by less than [`STABILITY_TOL`].
fn doubling_stable(values: &[f64], n: usize, pick: fn(f64, f64) -> f64) -> (f64, bool) {
    let ext = |k: usize| values[..k.min(values.len())].iter().cloned().fold(values[0], pick);
    let (e1, e2, e4) = (ext(n), ext(2 * n), ext(4 * n));
    let rel = |a: f64, b: f64| (a - b).abs() <= STABILITY_TOL * b.abs();
    (e4, rel(e1, e2) && rel(e2, e4))
}

/// Condition 4): bounded inverse derivative on balls and norm-coercivity.
pub fn check_plastock(
    map: &MapUnderTest,
    radii: &[f64],
    per_shell: usize,
    samples: usize,
    seed: u64,
) -> Result<ConditionVerdict> {
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument("plastock radii must be positive and increasing".into()));
    }
    require_samples(samples)?;
    let n = map.dim();
    let mut rng = sampling::stream(seed, map.name(), "4");
    let mut bounded = true;
    let mut sups = Vec::new();
    for &rho in radii {
        let pts = sampling::shell_stratified(&mut rng, n, rho, 4 * samples, SHELLS);
        let mut inv = Vec::with_capacity(pts.len());
        for p in &pts {
            let s = banach_constant(map, p)?;
            if s == 0.0 {
                return Ok(ConditionVerdict::falsified(
                    Witness::BanachSequence { points: vec![to_vec(p)], banach_constants: vec![0.0] },
                    format!("singular Jacobian inside the ball of radius {rho}"),
                ));
            }
            inv.push(1.0 / s);
        }
        let (sup, stable) = doubling_stable(&inv, samples, f64::max);
        bounded &= stable;
        sups.push(sup);
    }

    let mut points = Vec::with_capacity(radii.len());
    let mut norms = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut best: Option<(Vector, f64)> = None;
        for p in sampling::sphere_points(&mut rng, n, r, per_shell) {
            let m = map.try_eval(&p)?.norm();
            if best.as_ref().is_none_or(|b| m < b.1) {
                best = Some((p, m));
            }
        }
        let (p, m) = best.expect("sphere sample");
        points.push(to_vec(&p));
        norms.push(m);
    }
    let k = norms.len();
    let note = format!("sup 1/Sur df per ball {sups:?}; min |f| per sphere {norms:?}");
    if k >= 2 && norms[k - 1] < COERCIVE_GROWTH * norms[k - 2] {
        let w = Witness::SphereMinima { radii: radii.to_vec(), points, image_norms: norms };
        return Ok(ConditionVerdict::falsified(w, format!("coercivity plateau: {note}")));
    }
    if k < 2 || !bounded {
        return Ok(ConditionVerdict::inconclusive(format!("not stable under sample doubling: {note}")));
    }
    Ok(ConditionVerdict::certified(note))
}

fn log_sigma(map: &MapUnderTest, x: &Vector) -> Option<f64> {
    banach_constant(map, x).ok().map(f64::ln)
}

fn sublevel_witness(map: &MapUnderTest, y: &Vector, varrho: Option<f64>, trace: &Trace) -> Result<Witness> {
    let mut residual_norms = Vec::with_capacity(trace.points.len());
    let mut banach_constants = Vec::with_capacity(trace.points.len());
    for p in &trace.points {
        residual_norms.push((map.try_eval(p)? - y).norm());
        banach_constants.push(banach_constant(map, p)?);
    }
    Ok(Witness::SublevelSequence {
        target: to_vec(y),
        varrho,
        points: trace.points.iter().map(to_vec).collect(),
        residual_norms,
        banach_constants,
    })
}

struct Candidate {
    x: Vector,
    residual: f64,
    sigma: f64,
    primary: bool,
}

/// Condition 5): the Banach constant stays bounded below on every sublevel
/// `{|f(x) − y| < ϱ}`.
pub fn check_katriel(
    map: &MapUnderTest,
    y: &Vector,
    varrho_list: &[f64],
    samples: usize,
    radius: f64,
    seed: u64,
    descent: &DescentConfig,
) -> Result<ConditionVerdict> {
    if varrho_list.is_empty() || varrho_list[0] <= 0.0 || varrho_list.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument("varrho list must be positive and increasing".into()));
    }
    require_samples(samples)?;
    map.check_dim(y)?;
    let n = map.dim();
    let top = *varrho_list.last().unwrap();
    let mut rng = sampling::stream(seed, map.name(), "5");
    let mut pool: Vec<Candidate> = Vec::new();
    let admit = |x: Vector, primary: bool, pool: &mut Vec<Candidate>| -> Result<()> {
        let residual = (map.try_eval(&x)? - y).norm();
        if residual < top {
            let sigma = banach_constant(map, &x)?;
            pool.push(Candidate { x, residual, sigma, primary });
        }
        Ok(())
    };
    let per_ball = (samples / 2).max(1);
    for scale in [0.125, 0.25, 0.5, 1.0, 2.0, 4.0] {
        for (i, x) in sampling::shell_stratified(&mut rng, n, scale * radius, per_ball, SHELLS).into_iter().enumerate() {
            admit(x, i < per_ball / 2, &mut pool)?;
        }
    }
    let f = TargetFunctional::new(map, y.clone())?;
    for s in super::star::default_starts(n, radius) {
        let out = minimize(&f, &Weight::zero(), &descent.with_start(&to_vec(&s)))?;
        for p in &out.witness.points {
            admit(Vector::from_column_slice(p), true, &mut pool)?;
        }
        admit(out.final_point, true, &mut pool)?;
    }

    let mut all_certified = true;
    let mut overall = f64::INFINITY;
    let mut notes = Vec::new();
    for &varrho in varrho_list {
        let mut level: Vec<&Candidate> = pool.iter().filter(|c| c.residual < varrho).collect();
        if level.is_empty() {
            all_certified = false;
            notes.push(format!("varrho {varrho}: no samples"));
            continue;
        }
        level.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
        let inf_full = level[0].sigma;
        let inf_primary = level.iter().find(|c| c.primary).map_or(f64::INFINITY, |c| c.sigma);
        let phi = |x: &Vector| -> Option<f64> {
            let r = (map.try_eval(x).ok()? - y).norm();
            (r < varrho).then(|| log_sigma(map, x)).flatten()
        };
        let mut inf_search = f64::INFINITY;
        for seed_point in level.iter().take(3) {
            let trace = descend(&phi, &seed_point.x, 500, &mut |t: &Trace| {
                t.values.last().is_some_and(|v| v.exp() <= POSITIVITY_FLOOR)
            });
            let low = trace.values.iter().cloned().fold(f64::INFINITY, f64::min).exp();
            if low <= POSITIVITY_FLOOR {
                let w = sublevel_witness(map, y, Some(varrho), &trace)?;
                return Ok(ConditionVerdict::falsified(
                    w,
                    format!("Banach constant {low:e} inside the sublevel |f(x) - y| < {varrho}"),
                )
                .with_estimate(low));
            }
            inf_search = inf_search.min(low);
        }
        let inf = inf_full.min(inf_search);
        let rel = |a: f64| (a - inf_full).abs() <= STABILITY_TOL * inf_full;
        let stable = rel(inf_primary) && rel(inf_search.min(inf_full));
        all_certified &= stable && inf >= POSITIVITY_FLOOR;
        overall = overall.min(inf);
        notes.push(format!("varrho {varrho}: inf {inf} over {} samples{}", level.len(), if stable { "" } else { " (unstable)" }));
    }
    let note = notes.join("; ");
    let verdict = if all_certified { ConditionVerdict::certified(note) } else { ConditionVerdict::inconclusive(note) };
    Ok(if overall.is_finite() { verdict.with_estimate(overall) } else { verdict })
}

/// Condition 6): no sequence with `f(x_n) → y` and `Sur df(x_n) → 0`.
///
/// The first stage descends `|f − y|² + Sur df²` toward the given target.
/// The second descends `ln Sur df` alone and, if the images settle while the
/// Banach constant vanishes along a growing trajectory, reports the limit
/// image as the offending target.
pub fn check_rabier(map: &MapUnderTest, y: &Vector, radius: f64, iters: usize, seed: u64) -> Result<ConditionVerdict> {
    map.check_dim(y)?;
    let n = map.dim();
    let mut starts = super::star::default_starts(n, radius);
    let mut rng = sampling::stream(seed, map.name(), "6");
    starts.extend((0..4).map(|_| sampling::in_ball(&mut rng, n, radius)));

    let merit = |x: &Vector| -> Option<f64> {
        let r = (map.try_eval(x).ok()? - y).norm_squared();
        let s = banach_constant(map, x).ok()?;
        Some(r + s * s)
    };
    let mut min_merit = f64::INFINITY;
    for s in &starts {
        let trace = descend(&merit, s, iters, &mut |t: &Trace| {
            *t.values.last().unwrap() < RABIER_MERIT && norms_increasing(&t.points)
        });
        let last = *trace.values.last().unwrap_or(&f64::INFINITY);
        min_merit = min_merit.min(last);
        if last < RABIER_MERIT {
            let growing = norms_increasing(&trace.points);
            let w = sublevel_witness(map, y, None, &trace)?;
            let how = if growing { "along a growing trajectory" } else { "at a limit point" };
            return Ok(ConditionVerdict::falsified(w, format!("merit {last:e} {how}")).with_estimate(last));
        }
    }

    let phi = |x: &Vector| log_sigma(map, x);
    let settled = |t: &Trace| -> bool {
        let k = t.points.len();
        if k < 3 || t.values[k - 1].exp() > DISCOVERY_SIGMA || !norms_increasing(&t.points) {
            return false;
        }
        let Ok(last) = map.try_eval(&t.points[k - 1]) else { return false };
        t.points[k - 3..k - 1]
            .iter()
            .all(|p| map.try_eval(p).is_ok_and(|v| (v - &last).norm() <= DISCOVERY_DRIFT))
    };
    for s in &starts {
        let trace = descend(&phi, s, iters, &mut |t: &Trace| settled(t));
        if settled(&trace) {
            let y_star = map.try_eval(trace.points.last().unwrap())?;
            let w = sublevel_witness(map, &y_star, None, &trace)?;
            let sigma = trace.values.last().unwrap().exp();
            return Ok(ConditionVerdict::falsified(
                w,
                format!("images settle at {:?} while the Banach constant falls to {sigma:e}", to_vec(&y_star)),
            )
            .with_estimate(sigma));
        }
    }
    if min_merit >= RABIER_STALL {
        Ok(ConditionVerdict::certified(format!("merit stalls at {min_merit} or above")).with_estimate(min_merit))
    } else {
        Ok(ConditionVerdict::inconclusive(format!("merit reached {min_merit:e} without a growing trajectory"))
            .with_estimate(min_merit))
    }
}
