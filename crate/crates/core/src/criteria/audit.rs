//! Cross-checks verdicts against the implication chain, the
//! finite-dimensional equivalence of {4, 5, ⋆, 6}, and gallery truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_all, CheckConfig, ConditionVerdict, CriteriaReport, Status};
use crate::error::{Error, Result};
use crate::gallery::{register_gallery, GalleryEntry, TriState};
use crate::map_model::Condition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Anomaly {
    /// An upstream condition is certified while one it implies is falsified.
    ChainViolation { map: String, upstream: Condition, downstream: Condition },
    /// The equivalent block {4, 5, ⋆, 6} mixes falsified and certified verdicts.
    EquivalenceBlock { map: String, falsified: Vec<Condition>, certified: Vec<Condition> },
    TruthContradiction { map: String, condition: Condition, truth: TriState, status: Status },
}

pub fn report_anomalies(map: &str, verdicts: &BTreeMap<Condition, ConditionVerdict>) -> Vec<Anomaly> {
    let status = |c: Condition| verdicts.get(&c).map(|v| v.status);
    let mut out = Vec::new();
    for &up in &Condition::CHAIN {
        if status(up) != Some(Status::CertifiedSampled) {
            continue;
        }
        for down in up.downstream() {
            if status(down) == Some(Status::Falsified) {
                out.push(Anomaly::ChainViolation { map: map.to_string(), upstream: up, downstream: down });
            }
        }
    }
    let pick = |s: Status| -> Vec<Condition> {
        Condition::FINITE_DIM_EQUIVALENT.iter().copied().filter(|c| status(*c) == Some(s)).collect()
    };
    let (falsified, certified) = (pick(Status::Falsified), pick(Status::CertifiedSampled));
    if !falsified.is_empty() && !certified.is_empty() {
        out.push(Anomaly::EquivalenceBlock { map: map.to_string(), falsified, certified });
    }
    out
}

/// Audits one report per gallery map. All reports must share one sampling budget.
pub fn audit_implications(gallery: &[GalleryEntry], reports: &[CriteriaReport]) -> Result<Vec<Anomaly>> {
    if let Some(first) = reports.first() {
        if reports.iter().any(|r| r.sampling != first.sampling) {
            return Err(Error::InvalidArgument("reports use different sampling budgets".into()));
        }
    }
    let mut out = Vec::new();
    for entry in gallery {
        let name = entry.map.name();
        let report = reports
            .iter()
            .find(|r| r.map == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no report for gallery map {name}")))?;
        out.extend(report_anomalies(name, &report.verdicts));
        for (&c, v) in &report.verdicts {
            let truth = entry.truth.condition(c);
            let clash = matches!(
                (truth, v.status),
                (TriState::Yes, Status::Falsified) | (TriState::No, Status::CertifiedSampled)
            );
            if clash {
                out.push(Anomaly::TruthContradiction { map: name.to_string(), condition: c, truth, status: v.status });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalleryAudit {
    pub reports: Vec<CriteriaReport>,
    pub anomalies: Vec<Anomaly>,
}

/// Checks every gallery map with one budget (maps run concurrently) and audits the result.
pub fn gallery_audit(cfg: &CheckConfig) -> Result<GalleryAudit> {
    if cfg.target.is_some() {
        return Err(Error::InvalidArgument("gallery-audit uses each map's origin as target; drop --target".into()));
    }
    let gallery = register_gallery();
    let results: Vec<Result<CriteriaReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = gallery.iter().map(|e| s.spawn(move || check_all(&e.map, cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("audit worker panicked")).collect()
    });
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    let anomalies = audit_implications(&gallery, &reports)?;
    Ok(GalleryAudit { reports, anomalies })
}
