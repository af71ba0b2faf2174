//! Brute-force ground truth for n ≤ 2: grid scans of a box and 1-D root and
//! minimum finders.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{largest_singular_value, smallest_singular_value, Vector};
use crate::map_model::MapUnderTest;

pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetGrid {
    /// Targets cover `[−half_width, half_width]ⁿ`.
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl Default for TargetGrid {
    fn default() -> Self {
        TargetGrid { half_width: 2.0, points_per_axis: 21 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub image_distance: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridVerdict {
    pub box_radius: f64,
    pub resolution: usize,
    pub injective_on_box: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision: Option<Collision>,
    pub covered_targets: f64,
    pub target_grid: TargetGrid,
    pub min_f_norm_on_boundary: f64,
}

/// Grid point and image padded to two coordinates.
struct Sample {
    x: [f64; 2],
    fx: [f64; 2],
    tol: f64,
    sigma: f64,
    boundary: bool,
}

fn axis(r: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| -r + 2.0 * r * i as f64 / (k - 1) as f64).collect()
}

fn evaluate_grid(map: &MapUnderTest, radius: f64, res: usize, image_tol: Option<f64>) -> Result<Vec<Sample>> {
    let n = map.dim();
    let total = res.pow(n as u32);
    let ax = axis(radius, res);
    let h = 2.0 * radius / (res - 1) as f64;
    let cell = h * (n as f64).sqrt();
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(16);
    let chunk = total.div_ceil(workers);
    let eval_range = |lo: usize, hi: usize| -> Result<Vec<Sample>> {
        (lo..hi)
            .map(|idx| {
                let (i, j) = (idx % res, idx / res);
                let coords: Vec<f64> = if n == 1 { vec![ax[i]] } else { vec![ax[i], ax[j]] };
                let x = Vector::from_vec(coords);
                let fx = map.try_eval(&x)?;
                let jac = map.try_jacobian(&x)?;
                let tol = image_tol.unwrap_or(3.0 * cell * largest_singular_value(&jac));
                let sigma = smallest_singular_value(&jac);
                let boundary = i == 0 || i == res - 1 || (n == 2 && (j == 0 || j == res - 1));
                Ok(Sample { x: pad(&x), fx: pad(&fx), tol, sigma, boundary })
            })
            .collect()
    };
    let parts: Vec<Result<Vec<Sample>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let eval_range = &eval_range;
                s.spawn(move || eval_range(w * chunk, ((w + 1) * chunk).min(total)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("grid worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(total);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn pad(v: &Vector) -> [f64; 2] {
    [v[0], if v.len() > 1 { v[1] } else { 0.0 }]
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn level_of(tol: f64) -> i32 {
    tol.max(f64::MIN_POSITIVE).log2().ceil() as i32
}

fn cell_key(level: i32, y: &[f64; 2]) -> (i32, [i64; 2]) {
    let size = 2f64.powi(level);
    (level, [(y[0] / size).floor() as i64, (y[1] / size).floor() as i64])
}

/// Images bucketed by the cell size matching each point's own tolerance.
struct ImageHash {
    cells: HashMap<(i32, [i64; 2]), Vec<usize>>,
    levels: Vec<i32>,
    dim: usize,
}

impl ImageHash {
    fn build(samples: &[Sample], dim: usize) -> Self {
        let mut cells: HashMap<(i32, [i64; 2]), Vec<usize>> = HashMap::new();
        for (i, s) in samples.iter().enumerate() {
            cells.entry(cell_key(level_of(s.tol), &s.fx)).or_default().push(i);
        }
        let mut levels: Vec<i32> = cells.keys().map(|k| k.0).collect();
        levels.sort_unstable();
        levels.dedup();
        ImageHash { cells, levels, dim }
    }

    /// Calls `visit` on every stored index within one cell of `y` at each level ≥ `min_level`.
    fn visit(&self, y: &[f64; 2], min_level: i32, mut visit: impl FnMut(usize) -> bool) -> bool {
        let n = self.dim;
        for &level in self.levels.iter().filter(|l| **l >= min_level) {
            let (_, base) = cell_key(level, y);
            let offsets: &[[i64; 2]] = if n == 1 {
                &[[-1, 0], [0, 0], [1, 0]]
            } else {
                &[[-1, -1], [-1, 0], [-1, 1], [0, -1], [0, 0], [0, 1], [1, -1], [1, 0], [1, 1]]
            };
            for off in offsets {
                let key = (level, [base[0] + off[0], base[1] + off[1]]);
                if let Some(ids) = self.cells.get(&key) {
                    for &i in ids {
                        if visit(i) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

/// Scans `[−R, R]ⁿ` on a `resolutionⁿ` grid for image collisions, target
/// coverage and the smallest image norm on the boundary.
///
/// Each grid point gets the image tolerance `3·h·√n·‖df(x)‖` unless
/// `image_tol` fixes one. Two points collide when their images are within
/// the larger tolerance and they are farther apart than both two grid cell
/// diagonals and twice that tolerance over the smaller Banach constant, so
/// that neighbours on one local branch never count.
pub fn grid_scan(map: &MapUnderTest, radius: f64, resolution: usize, image_tol: Option<f64>) -> Result<GridVerdict> {
    grid_scan_with(map, radius, resolution, image_tol, TargetGrid::default())
}

pub fn grid_scan_with(
    map: &MapUnderTest,
    radius: f64,
    resolution: usize,
    image_tol: Option<f64>,
    targets: TargetGrid,
) -> Result<GridVerdict> {
    let n = map.dim();
    if n > 2 {
        return Err(Error::InvalidArgument(format!("grid oracle supports n <= 2, got {n}")));
    }
    if resolution < 16 {
        return Err(Error::InvalidArgument(format!("resolution must be at least 16, got {resolution}")));
    }
    if (resolution as f64).powi(n as i32) > MAX_GRID_POINTS as f64 {
        return Err(Error::InvalidArgument(format!("{resolution}^{n} grid points exceed {MAX_GRID_POINTS}")));
    }
    if !(radius > 0.0) || image_tol.is_some_and(|t| !(t > 0.0)) || targets.points_per_axis < 2 {
        return Err(Error::InvalidArgument("radius, image_tol and target grid must be positive".into()));
    }
    let samples = evaluate_grid(map, radius, resolution, image_tol)?;
    let hash = ImageHash::build(&samples, n);
    let h = 2.0 * radius / (resolution - 1) as f64;
    let min_sep = 2.0 * h * (n as f64).sqrt();

    let mut collision = None;
    for sj in samples.iter() {
        let found = hash.visit(&sj.fx, level_of(sj.tol), |i| {
            let si = &samples[i];
            let tol = si.tol.max(sj.tol);
            let sep = dist(&si.x, &sj.x);
            if sep <= min_sep || sep <= 2.0 * tol / si.sigma.min(sj.sigma) {
                return false;
            }
            let image_distance = dist(&si.fx, &sj.fx);
            if image_distance <= tol {
                collision = Some(Collision {
                    x: si.x[..n].to_vec(),
                    u: sj.x[..n].to_vec(),
                    image_distance,
                    tolerance: tol,
                });
                return true;
            }
            false
        });
        if found {
            break;
        }
    }

    let t_axis = axis(targets.half_width, targets.points_per_axis);
    let target_points: Vec<[f64; 2]> = if n == 1 {
        t_axis.iter().map(|t| [*t, 0.0]).collect()
    } else {
        t_axis.iter().flat_map(|a| t_axis.iter().map(move |b| [*a, *b])).collect()
    };
    let hits = target_points
        .iter()
        .filter(|y| hash.visit(y, i32::MIN, |i| dist(&samples[i].fx, y) <= samples[i].tol))
        .count();
    let origin = [0.0; 2];
    let min_boundary =
        samples.iter().filter(|s| s.boundary).map(|s| dist(&s.fx, &origin)).fold(f64::INFINITY, f64::min);

    Ok(GridVerdict {
        box_radius: radius,
        resolution,
        injective_on_box: collision.is_none(),
        collision,
        covered_targets: hits as f64 / target_points.len() as f64,
        target_grid: targets,
        min_f_norm_on_boundary: min_boundary,
    })
}

/// Bisection for a sign change of `g` on `[a, b]`.
pub fn bisect_root_1d(g: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let (mut glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if !(glo * ghi < 0.0) {
        return Err(Error::InvalidArgument(format!("g({lo}) = {glo} and g({hi}) = {ghi} do not bracket a root")));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() <= tol {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            return Err(Error::InvalidArgument(format!("bracket collapsed at {mid} with |g| = {} above {tol}", gm.abs())));
        }
        if (gm < 0.0) == (glo < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
}

/// Golden-section search for the minimum of a unimodal `g` on `[a, b]`;
/// returns `(argmin, min)`.
pub fn golden_min_1d(g: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut gc, mut gd) = (g(c), g(d));
    while hi - lo > tol {
        if gc < gd {
            hi = d;
            d = c;
            gd = gc;
            c = hi - inv_phi * (hi - lo);
            gc = g(c);
        } else {
            lo = c;
            c = d;
            gc = gd;
            d = lo + inv_phi * (hi - lo);
            gd = g(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, g(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    #[test]
    fn bisection_examples() {
        assert!(bisect_root_1d(|t| t, -1.0, 2.0, 1e-12).unwrap().abs() <= 1e-12);
        let r = bisect_root_1d(|t| 2.0 * t + t.sin() - 5.0, 0.0, 5.0, 1e-12).unwrap();
        assert!((2.0 * r + r.sin() - 5.0).abs() <= 1e-12);
        let r = bisect_root_1d(|t| t + t * t * t - 10.0, 0.0, 3.0, 1e-12).unwrap();
        assert!((r + r.powi(3) - 10.0).abs() <= 1e-12);
        assert!(bisect_root_1d(|t| t * t + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn golden_section() {
        let (x, v) = golden_min_1d(|t| (t - 0.3).powi(2), -2.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9 && v < 1e-18);
    }

    #[test]
    fn identity_scan() {
        let v = grid_scan(&gallery::identity(2), 3.0, 101, None).unwrap();
        assert!(v.injective_on_box);
        assert_eq!(v.covered_targets, 1.0);
        assert!((v.min_f_norm_on_boundary - 3.0).abs() < 1e-12);
    }

    #[test]
    fn complex_exp_collides_across_period() {
        let v = grid_scan(&gallery::complex_exp(), 8.0, 401, None).unwrap();
        assert!(!v.injective_on_box);
        let c = v.collision.unwrap();
        assert!(c.image_distance <= c.tolerance);
        let h = 16.0 / 400.0;
        let sep = (Vector::from_vec(c.x) - Vector::from_vec(c.u)).norm();
        assert!(sep > 2.0 * h);
    }

    #[test]
    fn guards() {
        assert!(grid_scan(&gallery::identity(2), 1.0, 8, None).is_err());
        assert!(grid_scan(&gallery::identity(2), 1.0, 4000, None).is_err());
        let three = gallery::diagonal(&[1.0, 2.0, 3.0]);
        assert!(grid_scan(&three, 1.0, 16, None).is_err());
    }
}
