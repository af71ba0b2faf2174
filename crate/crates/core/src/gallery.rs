//! Registry of analytic test maps with known ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::map_model::{Condition, MapUnderTest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriState {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub injective: TriState,
    pub surjective: TriState,
    pub norm_coercive: TriState,
    #[serde(flatten)]
    pub conditions: BTreeMap<Condition, TriState>,
}

impl Truth {
    fn all(state: TriState) -> Truth {
        Truth {
            injective: state,
            surjective: state,
            norm_coercive: state,
            conditions: Condition::CHAIN.iter().map(|c| (*c, state)).collect(),
        }
    }

    fn with(mut self, cond: Condition, state: TriState) -> Truth {
        self.conditions.insert(cond, state);
        self
    }

    pub fn condition(&self, cond: Condition) -> TriState {
        self.conditions.get(&cond).copied().unwrap_or(TriState::Unknown)
    }

    /// First `(upstream, downstream)` pair marked yes/no, if any.
    pub fn chain_violation(&self) -> Option<(Condition, Condition)> {
        for up in Condition::CHAIN {
            if self.condition(up) != TriState::Yes {
                continue;
            }
            if let Some(down) = up.downstream().find(|d| self.condition(*d) == TriState::No) {
                return Some((up, down));
            }
        }
        None
    }
}

#[derive(Debug, Clone)]
pub struct GalleryEntry {
    pub map: MapUnderTest,
    pub truth: Truth,
    pub provenance: String,
    pub local_diffeomorphism: bool,
}

#[derive(Debug, Serialize)]
struct GalleryListing<'a> {
    name: &'a str,
    dim: usize,
    truth: &'a Truth,
    provenance: &'a str,
}

pub fn identity(n: usize) -> MapUnderTest {
    MapUnderTest::new("identity", n, |x: &Vector| x.clone(), move |_: &Vector| Matrix::identity(n, n))
}

pub fn diagonal(d: &[f64]) -> MapUnderTest {
    let diag = Vector::from_column_slice(d);
    let dj = diag.clone();
    MapUnderTest::new(
        "diagonal",
        d.len(),
        move |x: &Vector| x.component_mul(&diag),
        move |_: &Vector| Matrix::from_diagonal(&dj),
    )
}

/// `t ↦ a·t + b·sin t`.
pub fn shifted_sine(a: f64, b: f64) -> MapUnderTest {
    MapUnderTest::new(
        "shifted-sine",
        1,
        move |x: &Vector| x.map(|t| a * t + b * t.sin()),
        move |x: &Vector| Matrix::from_element(1, 1, a + b * x[0].cos()),
    )
}

/// `t ↦ a·t + b·t³`.
pub fn cubic_drift(a: f64, b: f64) -> MapUnderTest {
    MapUnderTest::new(
        "cubic-drift",
        1,
        move |x: &Vector| x.map(|t| a * t + b * t * t * t),
        move |x: &Vector| Matrix::from_element(1, 1, a + 3.0 * b * x[0] * x[0]),
    )
}

pub fn arctan() -> MapUnderTest {
    MapUnderTest::new(
        "arctan",
        1,
        |x: &Vector| x.map(f64::atan),
        |x: &Vector| Matrix::from_element(1, 1, 1.0 / (1.0 + x[0] * x[0])),
    )
}

/// `t ↦ 1 − e^{−t}`.
pub fn saturating() -> MapUnderTest {
    MapUnderTest::new(
        "saturating",
        1,
        |x: &Vector| x.map(|t| -(-t).exp_m1()),
        |x: &Vector| Matrix::from_element(1, 1, (-x[0]).exp()),
    )
}

/// `(x₁, x₂) ↦ (e^{x₁} cos x₂, e^{x₁} sin x₂)`.
pub fn complex_exp() -> MapUnderTest {
    MapUnderTest::new(
        "complex-exp",
        2,
        |x: &Vector| {
            let r = x[0].exp();
            Vector::from_column_slice(&[r * x[1].cos(), r * x[1].sin()])
        },
        |x: &Vector| {
            let r = x[0].exp();
            let (s, c) = x[1].sin_cos();
            Matrix::from_row_slice(2, 2, &[r * c, -r * s, r * s, r * c])
        },
    )
}

/// The shipped gallery.
pub fn register_gallery() -> Vec<GalleryEntry> {
    use Condition::*;
    use TriState::*;

    let global = Truth::all(Yes);
    let not_isometry = Truth::all(Yes).with(Isometry, No);
    let mut arctan_truth = Truth::all(No);
    arctan_truth.injective = Yes;
    let mut saturating_truth = Truth::all(No);
    saturating_truth.injective = Yes;

    vec![
        GalleryEntry {
            map: identity(2),
            truth: global,
            provenance: "isometry; every condition in the chain holds".into(),
            local_diffeomorphism: true,
        },
        GalleryEntry {
            map: diagonal(&[2.0, 3.0]),
            truth: not_isometry.clone(),
            provenance: "linear with singular values 2 and 3: expansive with rate 2, not distance preserving".into(),
            local_diffeomorphism: true,
        },
        GalleryEntry {
            map: shifted_sine(2.0, 1.0),
            truth: not_isometry.clone(),
            provenance: "f'(t) = 2 + cos t lies in [1, 3]: expansive by the mean value theorem".into(),
            local_diffeomorphism: true,
        },
        GalleryEntry {
            map: cubic_drift(1.0, 1.0),
            truth: not_isometry,
            provenance: "f'(t) = 1 + 3t² ≥ 1: expansive and norm-coercive".into(),
            local_diffeomorphism: true,
        },
        GalleryEntry {
            map: arctan(),
            truth: arctan_truth,
            provenance: "strictly increasing with range (−π/2, π/2); f' = 1/(1+t²) is not integrable-divergent".into(),
            local_diffeomorphism: true,
        },
        GalleryEntry {
            map: saturating(),
            truth: saturating_truth,
            provenance: "strictly increasing with range (−∞, 1); bounded on t → +∞".into(),
            local_diffeomorphism: true,
        },
        GalleryEntry {
            map: complex_exp(),
            truth: Truth::all(No),
            provenance: "2π-periodic in x₂ (not injective); image omits the origin; σ_min = e^{x₁}".into(),
            local_diffeomorphism: true,
        },
    ]
}

pub fn gallery_json() -> Result<String> {
    let gallery = register_gallery();
    let listing: Vec<_> = gallery
        .iter()
        .map(|e| GalleryListing { name: e.map.name(), dim: e.map.dim(), truth: &e.truth, provenance: &e.provenance })
        .collect();
    Ok(serde_json::to_string_pretty(&listing)?)
}

/// Resolves a map spec of the form `name` or `name:c1,c2,...`.
///
/// Coefficients: `identity:n`, `diagonal:d1,..,dn`, `shifted-sine:a,b`
/// (a·t + b·sin t) and `cubic-drift:a,b` (a·t + b·t³).
pub fn lookup_map(spec: &str) -> Result<MapUnderTest> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n.trim(), Some(p)),
        None => (spec.trim(), None),
    };
    let coeffs = match params {
        Some(p) => p
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad coefficient `{s}` in map spec `{spec}`"))))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let expect = |k: usize| -> Result<()> {
        if coeffs.len() != k {
            return Err(Error::InvalidArgument(format!("map `{name}` takes {k} coefficient(s), got {}", coeffs.len())));
        }
        Ok(())
    };
    let map = match name {
        "identity" => match params {
            None => identity(2),
            Some(_) => {
                expect(1)?;
                let n = coeffs[0];
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!("identity dimension must be a positive integer, got {n}")));
                }
                identity(n as usize)
            }
        },
        "diagonal" => match params {
            None => diagonal(&[2.0, 3.0]),
            Some(_) => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidArgument("diagonal needs at least one entry".into()));
                }
                diagonal(&coeffs)
            }
        },
        "shifted-sine" => match params {
            None => shifted_sine(2.0, 1.0),
            Some(_) => {
                expect(2)?;
                shifted_sine(coeffs[0], coeffs[1])
            }
        },
        "cubic-drift" => match params {
            None => cubic_drift(1.0, 1.0),
            Some(_) => {
                expect(2)?;
                cubic_drift(coeffs[0], coeffs[1])
            }
        },
        "arctan" | "saturating" | "complex-exp" => {
            expect(0)?;
            match name {
                "arctan" => arctan(),
                "saturating" => saturating(),
                _ => complex_exp(),
            }
        }
        _ => return Err(Error::UnknownMap(spec.to_string())),
    };
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;

    #[test]
    fn gallery_has_the_seven_maps() {
        let names: Vec<_> = register_gallery().iter().map(|e| e.map.name().to_string()).collect();
        assert_eq!(names, ["identity", "diagonal", "shifted-sine", "cubic-drift", "arctan", "saturating", "complex-exp"]);
    }

    #[test]
    fn identity_truth_is_all_yes() {
        let g = register_gallery();
        let id = &g[0].truth;
        assert!(Condition::CHAIN.iter().all(|c| id.condition(*c) == TriState::Yes));
    }

    #[test]
    fn arctan_and_complex_exp_truth() {
        let g = register_gallery();
        let at = &g[4].truth;
        assert_eq!(at.surjective, TriState::No);
        assert_eq!(at.condition(Condition::WeightedPalaisSmale), TriState::No);
        assert_eq!(at.condition(Condition::Rabier), TriState::No);
        let ce = &g[6].truth;
        assert_eq!(ce.injective, TriState::No);
        assert_eq!(ce.surjective, TriState::No);
    }

    #[test]
    fn truth_respects_chain() {
        for e in register_gallery() {
            assert_eq!(e.truth.chain_violation(), None, "{}", e.map.name());
        }
        let broken = Truth::all(TriState::Yes).with(Condition::Katriel, TriState::No);
        assert_eq!(broken.chain_violation(), Some((Condition::Isometry, Condition::Katriel)));
    }

    #[test]
    fn lookup_specs() {
        assert_eq!(lookup_map("identity:1").unwrap().dim(), 1);
        let d = lookup_map("diagonal:1,2,4").unwrap();
        assert_eq!(d.eval(&vector(&[1.0, 1.0, 1.0])), vector(&[1.0, 2.0, 4.0]));
        assert!(matches!(lookup_map("nope"), Err(Error::UnknownMap(_))));
        assert!(lookup_map("shifted-sine:1").is_err());
        assert!(lookup_map("arctan:2").is_err());
        assert!(lookup_map("identity:0").is_err());
    }

    #[test]
    fn listing_json_shape() {
        let v: serde_json::Value = serde_json::from_str(&gallery_json().unwrap()).unwrap();
        let first = &v[0];
        assert_eq!(first["name"], "identity");
        assert_eq!(first["dim"], 2);
        assert_eq!(first["truth"]["1"], "yes");
        assert_eq!(first["truth"]["starstar"], "yes");
        assert!(first["provenance"].is_string());
    }
}
