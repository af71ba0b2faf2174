//! Dense linear algebra helpers over `nalgebra` dynamic storage.

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Above this dimension the smallest singular value is found by inverse
/// power iteration instead of a full SVD.
pub const FULL_SVD_MAX_DIM: usize = 64;

pub fn vector(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

pub fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn matrix_finite(m: &Matrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Smallest singular value of a square matrix, clamped to zero when it is
/// indistinguishable from rank deficiency at working precision.
pub fn smallest_singular_value(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.nrows() <= FULL_SVD_MAX_DIM {
        let sv = m.clone().svd(false, false).singular_values;
        let smin = sv.min();
        let smax = sv.max();
        clamp_degenerate(smin, smax, m.nrows())
    } else {
        smallest_singular_value_inverse_power(m, 500, 1e-13)
    }
}

pub fn largest_singular_value(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

fn clamp_degenerate(smin: f64, smax: f64, n: usize) -> f64 {
    if !(smin > (n as f64) * f64::EPSILON * smax) {
        0.0
    } else {
        smin
    }
}

/// Inverse power iteration on `(MᵀM)⁻¹ = M⁻¹M⁻ᵀ`, realised with one LU
/// factorisation and two triangular solves per step.
pub fn smallest_singular_value_inverse_power(m: &Matrix, max_iter: usize, tol: f64) -> f64 {
    let n = m.nrows();
    let lu = m.clone().lu();
    let lu_t = m.transpose().lu();
    let mut v = Vector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0_f64;
    for _ in 0..max_iter {
        let w = match lu_t.solve(&v) {
            Some(w) => w,
            None => return 0.0,
        };
        let z = match lu.solve(&w) {
            Some(z) => z,
            None => return 0.0,
        };
        let norm = z.norm();
        if !norm.is_finite() || norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&z);
        v = z / norm;
        if (next - lambda).abs() <= tol * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return 0.0;
    }
    let smin = 1.0 / lambda.sqrt();
    // Cheap upper bound for the degeneracy test.
    let smax = m.norm();
    clamp_degenerate(smin, smax, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_smallest_singular_value() {
        let m = Matrix::from_diagonal(&vector(&[2.0, 3.0]));
        assert_relative_eq!(smallest_singular_value(&m), 2.0, epsilon = 1e-14);
        assert_relative_eq!(largest_singular_value(&m), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_matrix_clamps_to_zero() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(smallest_singular_value(&m), 0.0);
    }

    #[test]
    fn inverse_power_route_matches_svd() {
        let n = 80;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0 + i as f64 * 0.25;
            if i + 1 < n {
                m[(i, i + 1)] = 0.3;
            }
        }
        let svd = m.clone().svd(false, false).singular_values.min();
        let routed = smallest_singular_value(&m);
        assert_relative_eq!(routed, svd, max_relative = 1e-9);
    }

    #[test]
    fn inverse_power_singular_is_zero() {
        let mut m = Matrix::identity(70, 70);
        m[(3, 3)] = 0.0;
        assert_eq!(smallest_singular_value(&m), 0.0);
    }
}
