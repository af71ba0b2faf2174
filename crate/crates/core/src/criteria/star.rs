//! The weighted Palais–Smale condition ⋆, split into † (no critical
//! sequence at a positive level) and ‡ (critical sequences at level zero
//! have convergent subsequences).

use super::{to_vec, ConditionVerdict, Status, StarParts, SubVerdict, Witness};
use crate::descent::{minimize, Classification, DescentConfig};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::map_model::MapUnderTest;
use crate::variational::{TargetFunctional, Weight};

/// Levels at or below this count as zero.
pub const ZERO_LEVEL: f64 = 1e-6;
/// Final weighted criticality that counts as vanishing for a run that ran out of budget.
pub const VANISHING_CRITICALITY: f64 = 1e-4;

fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
}

/// 11 targets in `[−3, 3]` for n = 1, a 5×5 grid for n = 2, `{−3, 0, 3}ⁿ` above.
pub fn default_y_grid(n: usize) -> Vec<Vector> {
    let axis = match n {
        1 => linspace(-3.0, 3.0, 11),
        2 => linspace(-3.0, 3.0, 5),
        _ => vec![-3.0, 0.0, 3.0],
    };
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                axis.iter().map(move |a| {
                    let mut q = p.clone();
                    q.push(*a);
                    q
                })
            })
            .collect();
    }
    out.into_iter().map(Vector::from_vec).collect()
}

/// The origin and `±R/4` along each axis.
pub fn default_starts(n: usize, radius: f64) -> Vec<Vector> {
    let mut out = vec![Vector::zeros(n)];
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut v = Vector::zeros(n);
            v[i] = sign * radius / 4.0;
            out.push(v);
        }
    }
    out
}

pub fn check_star(
    map: &MapUnderTest,
    w: &Weight,
    y_grid: &[Vector],
    starts: &[Vector],
    template: &DescentConfig,
) -> Result<ConditionVerdict> {
    if y_grid.is_empty() || starts.is_empty() {
        return Err(Error::InvalidArgument("check_star needs targets and starts".into()));
    }
    let mut dagger: Option<Witness> = None;
    let mut ddagger: Option<Witness> = None;
    let mut all_converged = true;
    let mut runs = 0;
    'targets: for y in y_grid {
        let f = TargetFunctional::new(map, y.clone())?;
        for s in starts {
            let out = minimize(&f, w, &template.with_start(&to_vec(s)))?;
            runs += 1;
            let wit = out.witness;
            let positive = wit.level > ZERO_LEVEL;
            let vanishing = wit.final_weighted_criticality().is_some_and(|c| c <= VANISHING_CRITICALITY);
            let slot = match wit.classification {
                Classification::ConvergedToSolution => continue,
                Classification::EscapedToInfinity if positive => Some(&mut dagger),
                Classification::EscapedToInfinity => Some(&mut ddagger),
                Classification::BudgetExhausted if positive && vanishing => Some(&mut dagger),
                _ => None,
            };
            all_converged = false;
            if let Some(slot) = slot {
                if slot.is_none() {
                    *slot = Some(Witness::Descent { target: to_vec(y), weight: w.clone(), witness: wit });
                }
            }
            if dagger.is_some() && ddagger.is_some() {
                break 'targets;
            }
        }
    }
    let sub = |wit: Option<Witness>| SubVerdict {
        status: match (&wit, all_converged) {
            (Some(_), _) => Status::Falsified,
            (None, true) => Status::CertifiedSampled,
            (None, false) => Status::Inconclusive,
        },
        witness: wit,
    };
    let parts = StarParts { dagger: sub(dagger), double_dagger: sub(ddagger) };
    let status = conjunction(parts.dagger.status, parts.double_dagger.status);
    let witness = parts.dagger.witness.clone().or_else(|| parts.double_dagger.witness.clone());
    let note = format!(
        "{runs} descent runs over {} targets; dagger {:?}, double dagger {:?}",
        y_grid.len(),
        parts.dagger.status,
        parts.double_dagger.status
    );
    Ok(ConditionVerdict { status, witness, estimate: None, parts: Some(parts), note })
}

/// ⋆ holds iff both halves hold.
pub fn conjunction(a: Status, b: Status) -> Status {
    match (a, b) {
        (Status::Falsified, _) | (_, Status::Falsified) => Status::Falsified,
        (Status::CertifiedSampled, Status::CertifiedSampled) => Status::CertifiedSampled,
        _ => Status::Inconclusive,
    }
}
