//! Deterministic sample streams. Each stream is keyed by
//! `(seed, map name, tag)` so concurrent checkers never share state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::Vector;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(state, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

pub fn stream_seed(seed: u64, map_name: &str, tag: &str) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    h = fnv1a(h, &[0xff]);
    h = fnv1a(h, map_name.as_bytes());
    h = fnv1a(h, &[0xff]);
    fnv1a(h, tag.as_bytes())
}

pub fn stream(seed: u64, map_name: &str, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, map_name, tag))
}

pub fn unit_direction<R: Rng>(rng: &mut R, n: usize) -> Vector {
    loop {
        let v = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Uniform point in the shell `a ≤ |x| ≤ b`.
pub fn in_shell<R: Rng>(rng: &mut R, n: usize, a: f64, b: f64) -> Vector {
    let d = n as i32;
    let u: f64 = rng.gen();
    let r = (a.powi(d) + u * (b.powi(d) - a.powi(d))).powf(1.0 / n as f64);
    unit_direction(rng, n) * r
}

pub fn in_ball<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Vector {
    in_shell(rng, n, 0.0, radius)
}

/// `count` points split evenly over `shells` concentric shells of the ball.
pub fn shell_stratified<R: Rng>(rng: &mut R, n: usize, radius: f64, count: usize, shells: usize) -> Vec<Vector> {
    let shells = shells.max(1);
    (0..count)
        .map(|i| {
            let k = i % shells;
            let a = radius * k as f64 / shells as f64;
            let b = radius * (k + 1) as f64 / shells as f64;
            in_shell(rng, n, a, b)
        })
        .collect()
}

/// Points on the sphere `|x| = r`: both points for n = 1, equispaced angles
/// (random phase) for n = 2, random directions otherwise.
pub fn sphere_points<R: Rng>(rng: &mut R, n: usize, r: f64, count: usize) -> Vec<Vector> {
    match n {
        1 => vec![Vector::from_element(1, -r), Vector::from_element(1, r)],
        2 => {
            let phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU / count as f64;
            (0..count)
                .map(|k| {
                    let th = phase + std::f64::consts::TAU * k as f64 / count as f64;
                    Vector::from_column_slice(&[r * th.cos(), r * th.sin()])
                })
                .collect()
        }
        _ => (0..count).map(|_| unit_direction(rng, n) * r).collect(),
    }
}
