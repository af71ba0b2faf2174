//! Derivative-free-gradient descent used by the directed searches of the
//! Katriel and Rabier checkers.

use crate::descent::ARMIJO_C;
use crate::linalg::Vector;

const MAX_HALVINGS: usize = 60;

/// Central-difference gradient; `None` if any probe is undefined.
pub fn fd_gradient(phi: &dyn Fn(&Vector) -> Option<f64>, x: &Vector) -> Option<Vector> {
    let h = 1e-6 * (1.0 + x.norm());
    let mut g = Vector::zeros(x.len());
    for i in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (phi(&xp)? - phi(&xm)?) / (2.0 * h);
    }
    g.iter().all(|v| v.is_finite()).then_some(g)
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub points: Vec<Vector>,
    pub values: Vec<f64>,
}

/// Monotone descent on `phi` with Barzilai–Borwein trial steps and Armijo
/// backtracking. `phi` returning `None` marks a point as inadmissible.
/// Every accepted iterate is recorded; `stop` sees each one.
pub fn descend(
    phi: &dyn Fn(&Vector) -> Option<f64>,
    x0: &Vector,
    max_iters: usize,
    stop: &mut dyn FnMut(&Trace) -> bool,
) -> Trace {
    let mut trace = Trace::default();
    let Some(mut v) = phi(x0) else {
        return trace;
    };
    let mut x = x0.clone();
    trace.points.push(x.clone());
    trace.values.push(v);
    if stop(&trace) {
        return trace;
    }
    let mut prev: Option<(Vector, Vector)> = None;
    let mut t_prev = 1.0;
    for _ in 0..max_iters {
        let Some(g) = fd_gradient(phi, &x) else {
            break;
        };
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        let mut t = match &prev {
            Some((px, pg)) => {
                let s = &x - px;
                let sy = s.dot(&(&g - pg));
                if sy > 0.0 {
                    s.norm_squared() / sy
                } else {
                    2.0 * t_prev
                }
            }
            None => 1.0 / gn,
        };
        t = t.min(10.0 * (1.0 + x.norm()) / gn);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = &x - &g * t;
            if trial == x {
                break;
            }
            if let Some(tv) = phi(&trial) {
                if tv <= v - ARMIJO_C * t * gn * gn {
                    accepted = Some((trial, tv));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((nx, nv)) = accepted else {
            break;
        };
        prev = Some((std::mem::replace(&mut x, nx), g));
        v = nv;
        t_prev = t;
        trace.points.push(x.clone());
        trace.values.push(v);
        if stop(&trace) {
            break;
        }
    }
    trace
}

/// The last three recorded norms increase strictly.
pub fn norms_increasing(points: &[Vector]) -> bool {
    let n = points.len();
    n >= 3 && {
        let r: Vec<f64> = points[n - 3..].iter().map(|p| p.norm()).collect();
        r[0] < r[1] && r[1] < r[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;

    #[test]
    fn descends_a_quadratic() {
        let phi = |x: &Vector| Some((x[0] - 1.0).powi(2) + 4.0 * (x[1] + 2.0).powi(2));
        let tr = descend(&phi, &vector(&[5.0, 5.0]), 500, &mut |t| *t.values.last().unwrap() < 1e-14);
        let last = tr.points.last().unwrap();
        assert!((last - vector(&[1.0, -2.0])).norm() < 1e-6);
        assert!(tr.values.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn respects_inadmissible_region() {
        let phi = |x: &Vector| if x[0] > -1.0 { Some(x[0]) } else { None };
        let tr = descend(&phi, &vector(&[3.0]), 200, &mut |_| false);
        assert!(tr.points.iter().all(|p| p[0] > -1.0));
        assert!(tr.points.last().unwrap()[0] < -0.99);
    }
}
