//! Numerical mountain pass between two preimages of the same target.
//!
//! Paths are stored relative to the base preimage `u`; every evaluation is
//! at `u + p`, so a band over `x ↦ f(u + x)` based at the origin performs the
//! same floating-point operations.

use serde::{Deserialize, Serialize};

use crate::descent::{minimize, Classification, CriticalSequenceWitness, DescentConfig, ARMIJO_C};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::map_model::MapUnderTest;
use crate::sampling;
use crate::variational::{banach_constant, TargetFunctional, Weight};

pub const OPENNESS_SPHERE_SAMPLES: usize = 32;
pub const OPENNESS_MAX_HALVINGS: i32 = 20;
const STEP_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Openness {
    pub alpha: f64,
    pub r: f64,
}

/// `alpha = ½·Sur df(u)`; `r` is the largest dyadic radius whose sampled
/// sphere keeps the Banach constant at or above ¾ of its value at `u`.
pub fn estimate_openness(map: &MapUnderTest, u: &Vector) -> Result<Openness> {
    map.check_dim(u)?;
    let sigma0 = banach_constant(map, u)?;
    if sigma0 <= 0.0 {
        return Err(Error::NotLocalDiffeomorphism { point: u.iter().copied().collect() });
    }
    let mut rng = sampling::stream(0, map.name(), "openness");
    for j in 0..=OPENNESS_MAX_HALVINGS {
        let r = 2f64.powi(-j);
        let mut ok = true;
        for p in sampling::sphere_points(&mut rng, map.dim(), r, OPENNESS_SPHERE_SAMPLES) {
            if banach_constant(map, &(u + p))? < 0.75 * sigma0 {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(Openness { alpha: 0.5 * sigma0, r });
        }
    }
    Err(Error::Precondition(format!(
        "no dyadic radius down to 2^-{OPENNESS_MAX_HALVINGS} keeps the Banach constant above 3/4 of {sigma0}"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountainPassGeometry {
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    pub r: f64,
    pub alpha: f64,
    pub rho: f64,
    /// `min F(u + p) − rho` over `32·n` sampled points with `|p| = r`.
    pub sphere_margin: f64,
}

impl MountainPassGeometry {
    pub fn new(f: &TargetFunctional<'_>, u: &Vector, e: &Vector, open: Openness) -> Result<Self> {
        f.map().check_dim(u)?;
        f.map().check_dim(e)?;
        if !(open.alpha > 0.0 && open.r > 0.0) {
            return Err(Error::InvalidArgument("alpha and r must be positive".into()));
        }
        let rho = 0.5 * open.alpha * open.alpha * open.r * open.r;
        let n = f.map().dim();
        let mut rng = sampling::stream(0, f.map().name(), "sphere-margin");
        let mut margin = f64::INFINITY;
        for p in sampling::sphere_points(&mut rng, n, open.r, OPENNESS_SPHERE_SAMPLES * n) {
            margin = margin.min(f.value(&(u + p))? - rho);
        }
        Ok(MountainPassGeometry {
            u: u.iter().copied().collect(),
            e: e.iter().copied().collect(),
            r: open.r,
            alpha: open.alpha,
            rho,
            sphere_margin: margin,
        })
    }

    pub fn u(&self) -> Vector {
        Vector::from_column_slice(&self.u)
    }

    pub fn e(&self) -> Vector {
        Vector::from_column_slice(&self.e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    pub nodes: usize,
    pub iters: usize,
    /// Weighted criticality below which the final argmax counts as near-critical.
    pub criticality_tol: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig { nodes: 64, iters: 20_000, criticality_tol: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct BandOutcome {
    pub witness: CriticalSequenceWitness,
    /// Final path in original coordinates.
    pub path: Vec<Vector>,
    pub iterations: usize,
    pub level_ge_rho: bool,
}

/// Resamples a polyline at uniform chord length; endpoints are copied bit-for-bit.
pub fn reparametrize(nodes: &[Vector]) -> Vec<Vector> {
    let k = nodes.len();
    let mut cum = vec![0.0; k];
    for i in 1..k {
        cum[i] = cum[i - 1] + (&nodes[i] - &nodes[i - 1]).norm();
    }
    let total = cum[k - 1];
    if total == 0.0 {
        return nodes.to_vec();
    }
    let mut out = Vec::with_capacity(k);
    out.push(nodes[0].clone());
    let mut seg = 0;
    for j in 1..k - 1 {
        let s = total * j as f64 / (k - 1) as f64;
        while seg + 1 < k - 1 && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        out.push(&nodes[seg] + (&nodes[seg + 1] - &nodes[seg]) * t);
    }
    out.push(nodes[k - 1].clone());
    out
}

fn path_values(f: &TargetFunctional<'_>, u: &Vector, nodes: &[Vector]) -> Result<Vec<f64>> {
    nodes.iter().map(|p| f.value(&(u + p))).collect()
}

fn argmax(vals: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] {
            best = i;
        }
    }
    best
}

fn chord_length(nodes: &[Vector]) -> f64 {
    nodes.windows(2).map(|p| (&p[1] - &p[0]).norm()).sum()
}

/// F at the midpoint of `a`–`b` does not exceed `level`.
fn midpoint_below(f: &TargetFunctional<'_>, u: &Vector, a: &Vector, b: &Vector, level: f64) -> bool {
    f.value(&(u + (a + b) * 0.5)).is_ok_and(|v| v <= level)
}

/// Every segment midpoint of the path lies at or below `level`.
fn midpoints_below(f: &TargetFunctional<'_>, u: &Vector, nodes: &[Vector], level: f64) -> bool {
    nodes.windows(2).all(|p| midpoint_below(f, u, &p[0], &p[1], level))
}

/// Armijo step on node `i` from `0.5·spacing` downward; returns the new value
/// and position. Steps that lift an adjacent segment midpoint above `level`
/// are refused, so the path cannot hop across a ridge between nodes.
#[allow(clippy::too_many_arguments)]
fn armijo_move(
    f: &TargetFunctional<'_>,
    u: &Vector,
    nodes: &[Vector],
    i: usize,
    value: f64,
    gradient: &Vector,
    spacing: f64,
    level: f64,
) -> Option<(f64, Vector)> {
    let gn = gradient.norm();
    if gn == 0.0 {
        return None;
    }
    let node = &nodes[i];
    let mut step = 0.5 * spacing / gn;
    for _ in 0..STEP_HALVINGS {
        let moved = node - gradient * step;
        if let Ok(v) = f.value(&(u + &moved)) {
            if v <= value - ARMIJO_C * step * gn * gn
                && midpoint_below(f, u, &nodes[i - 1], &moved, level)
                && midpoint_below(f, u, &moved, &nodes[i + 1], level)
            {
                return Some((v, moved));
            }
        }
        step *= 0.5;
    }
    None
}

/// Descends whichever nodes of a resampled path exceed `level` until none do.
/// `None` means the resampled path, nodes and segment midpoints, could not be
/// brought under `level`.
fn settle(
    f: &TargetFunctional<'_>,
    u: &Vector,
    mut nodes: Vec<Vector>,
    level: f64,
    spacing: f64,
    budget: usize,
) -> Result<Option<(Vec<Vector>, Vec<f64>)>> {
    let mut vals = match path_values(f, u, &nodes) {
        Ok(v) => v,
        Err(e) if e.is_numerical() => return Ok(None),
        Err(e) => return Err(e),
    };
    for _ in 0..budget {
        let i = argmax(&vals);
        if vals[i] <= level {
            return Ok(midpoints_below(f, u, &nodes, level).then_some((nodes, vals)));
        }
        if i == 0 || i == nodes.len() - 1 {
            return Ok(None);
        }
        let g = f.gradient(&(u + &nodes[i]))?;
        match armijo_move(f, u, &nodes, i, vals[i], &g, spacing, level) {
            Some((v, p)) => {
                vals[i] = v;
                nodes[i] = p;
            }
            None => return Ok(None),
        }
    }
    Ok(None)
}

/// Lowers the path maximum of `F_y` between `u` and `u + e` by descending the
/// argmax node and resampling the path at uniform chord length.
///
/// Resampling can lift nodes above the current level; those are descended
/// in turn, and if that fails the step is kept without resampling, so the
/// recorded level never increases. Stops after `iters` steps or when the
/// level has not dropped for `10·nodes` steps.
pub fn elastic_band(
    f: &TargetFunctional<'_>,
    geom: &MountainPassGeometry,
    w: &Weight,
    cfg: &BandConfig,
) -> Result<BandOutcome> {
    let k = cfg.nodes;
    if k < 16 {
        return Err(Error::InvalidArgument(format!("band needs at least 16 nodes, got {k}")));
    }
    let u = geom.u();
    let e = geom.e();
    f.map().check_dim(&u)?;
    f.map().check_dim(&e)?;
    let bound = geom.rho * (1.0 + 1e-9);
    let (f0, fe) = (f.value(&u)?, f.value(&(&u + &e))?);
    if f0 > bound || fe > bound {
        return Err(Error::Precondition(format!(
            "endpoint values F(u) = {f0:e}, F(u + e) = {fe:e} must not exceed rho = {:e}",
            geom.rho
        )));
    }
    if e.norm() < geom.r {
        return Err(Error::Precondition(format!("|e| = {} is below r = {}", e.norm(), geom.r)));
    }

    let mut nodes: Vec<Vector> = (0..k).map(|i| &e * (i as f64 / (k - 1) as f64)).collect();
    nodes[0] = Vector::zeros(e.len());
    nodes[k - 1] = e.clone();
    let mut vals = path_values(f, &u, &nodes)?;

    let mut points = Vec::new();
    let mut f_values = Vec::new();
    let mut wcs = Vec::new();
    let mut record = |x: &Vector, v: f64, wc: f64| {
        points.push(x.iter().copied().collect::<Vec<f64>>());
        f_values.push(v);
        wcs.push(wc);
    };

    let mut iterations = 0;
    let patience = 10 * k;
    let mut best = f64::INFINITY;
    let mut last_drop = 0;
    loop {
        let j = argmax(&vals);
        let level = vals[j];
        let x = &u + &nodes[j];
        let ev = f.evaluate(&x)?;
        let gn = ev.gradient.norm();
        record(&x, level, w.scale(gn, x.norm()));
        if level < best {
            best = level;
            last_drop = iterations;
        }
        if iterations >= cfg.iters || iterations - last_drop >= patience || j == 0 || j == k - 1 || gn == 0.0 {
            break;
        }
        let spacing = chord_length(&nodes) / (k - 1) as f64;
        let Some(moved) = armijo_move(f, &u, &nodes, j, level, &ev.gradient, spacing, level) else {
            break;
        };
        let (fm, moved) = moved;
        let mut plain = nodes.clone();
        plain[j] = moved;
        let mut plain_vals = vals.clone();
        plain_vals[j] = fm;
        let resampled = reparametrize(&plain);
        (nodes, vals) = match settle(f, &u, resampled, level, spacing, 4 * k)? {
            Some(done) => done,
            None => (plain, plain_vals),
        };
        iterations += 1;
    }

    let level = vals[argmax(&vals)];
    let norms: Vec<f64> = points.iter().map(|p| Vector::from_column_slice(p).norm()).collect();
    let quarter = (norms.len() / 4).max(1);
    let early = norms[..(norms.len() / 10).max(1)].iter().cloned().fold(0.0, f64::max);
    let late = norms[norms.len() - quarter..].iter().cloned().fold(0.0, f64::max);
    let near_critical = wcs.last().is_some_and(|wc| *wc <= cfg.criticality_tol);
    let classification = if near_critical && late > 2.0 * early {
        Classification::EscapedToInfinity
    } else if near_critical {
        Classification::ConvergedToCriticalNonsolution
    } else {
        Classification::BudgetExhausted
    };
    let witness = CriticalSequenceWitness { points, f_values, weighted_criticalities: wcs, level, classification };
    Ok(BandOutcome {
        witness,
        path: nodes.iter().map(|p| &u + p).collect(),
        iterations,
        level_ge_rho: level >= geom.rho - 1e-9,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsifierConfig {
    pub descent: DescentConfig,
    pub band: BandConfig,
}

impl FalsifierConfig {
    pub fn new(dim: usize) -> Self {
        FalsifierConfig { descent: DescentConfig::new(&vec![0.0; dim]), band: BandConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum InjectivityVerdict {
    TwoPreimagesFound {
        preimages: [Vec<f64>; 2],
        geometry: MountainPassGeometry,
        witness: CriticalSequenceWitness,
        band_iterations: usize,
        level_ge_rho: bool,
    },
    NoEvidence {
        solutions_found: usize,
    },
}

/// Looks for two distinct preimages of `y` and, if found, runs the band
/// between them.
pub fn injectivity_falsifier(
    map: &MapUnderTest,
    y: &Vector,
    starts: &[Vector],
    w: &Weight,
    cfg: &FalsifierConfig,
) -> Result<InjectivityVerdict> {
    let f = TargetFunctional::new(map, y.clone())?;
    let sep = 10.0 * cfg.descent.residual_tol;
    let mut sols: Vec<Vector> = Vec::new();
    for s in starts {
        let start: Vec<f64> = s.iter().copied().collect();
        let out = minimize(&f, w, &cfg.descent.with_start(&start))?;
        if out.witness.classification != Classification::ConvergedToSolution {
            continue;
        }
        if let Some(first) = sols.first() {
            if (&out.final_point - first).norm() > sep {
                return mountain_pass(&f, first.clone(), out.final_point, w, cfg);
            }
        } else {
            sols.push(out.final_point);
        }
    }
    Ok(InjectivityVerdict::NoEvidence { solutions_found: sols.len() })
}

fn mountain_pass(
    f: &TargetFunctional<'_>,
    u: Vector,
    second: Vector,
    w: &Weight,
    cfg: &FalsifierConfig,
) -> Result<InjectivityVerdict> {
    let e = &second - &u;
    let mut open = estimate_openness(f.map(), &u)?;
    while open.r > e.norm() {
        open.r *= 0.5;
    }
    let geometry = MountainPassGeometry::new(f, &u, &e, open)?;
    let band = elastic_band(f, &geometry, w, &cfg.band)?;
    Ok(InjectivityVerdict::TwoPreimagesFound {
        preimages: [u.iter().copied().collect(), second.iter().copied().collect()],
        geometry,
        witness: band.witness,
        band_iterations: band.iterations,
        level_ge_rho: band.level_ge_rho,
    })
}
