//! Versioned JSON reports, witness replay and CSV tables.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::criteria::{CheckConfig, CriteriaReport, GalleryAudit, HadamardProfile, WeightSpec, Witness};
use crate::descent::{DescentConfig, SolveOutcome};
use crate::error::{Error, Result};
use crate::gallery::lookup_map;
use crate::mountain_pass::{FalsifierConfig, InjectivityVerdict};
use crate::variational::Weight;

pub const SCHEMA_VERSION: u32 = 1;

/// Pretty printer that writes every float with 17 significant digits.
struct FixedDigits<'a>(PrettyFormatter<'a>);

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes to indented JSON with 17 significant digits per float and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub map: String,
    pub target: Vec<f64>,
    pub weight: WeightSpec,
    pub resolved_weight: Weight,
    pub starts: Vec<Vec<f64>>,
    pub descent: DescentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpassConfig {
    pub map: String,
    pub target: Vec<f64>,
    pub weight: WeightSpec,
    pub resolved_weight: Weight,
    pub starts: Vec<Vec<f64>>,
    pub falsifier: FalsifierConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRunConfig {
    pub map: String,
    #[serde(flatten)]
    pub check: CheckConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub map: String,
    pub r_max: f64,
    pub shells: usize,
    pub per_shell: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileResult {
    pub profile: HadamardProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_weight: Option<Weight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Run {
    Solve { config: SolveConfig, result: SolveOutcome },
    Mpass { config: MpassConfig, result: InjectivityVerdict },
    Check { config: CheckRunConfig, result: CriteriaReport },
    GalleryAudit { config: CheckConfig, result: GalleryAudit },
    Profile { config: ProfileConfig, result: ProfileResult },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    #[serde(flatten)]
    pub run: Run,
}

/// A witness together with the map spec it replays against.
#[derive(Debug, Clone, PartialEq)]
pub struct Replayable {
    pub map: String,
    pub witness: Witness,
}

impl Report {
    pub fn new(run: Run) -> Self {
        Report { schema_version: SCHEMA_VERSION, run }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Report> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            other => return Err(Error::Schema(format!("expected schema_version {SCHEMA_VERSION}, found {other:?}"))),
        }
        serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))
    }

    /// Every witness in the result, in report order.
    pub fn witnesses(&self) -> Vec<Replayable> {
        let descent = |map: &str, target: &[f64], weight: &Weight, w: &crate::descent::CriticalSequenceWitness| Replayable {
            map: map.to_string(),
            witness: Witness::Descent { target: target.to_vec(), weight: weight.clone(), witness: w.clone() },
        };
        let from_check = |map: &str, r: &CriteriaReport| -> Vec<Replayable> {
            r.verdicts
                .values()
                .flat_map(|v| v.witnesses())
                .map(|w| Replayable { map: map.to_string(), witness: w.clone() })
                .collect()
        };
        match &self.run {
            Run::Solve { config, result } => match result {
                SolveOutcome::Solved { witness, .. } => {
                    vec![descent(&config.map, &config.target, &config.resolved_weight, witness)]
                }
                SolveOutcome::Failed(f) => {
                    f.witnesses.iter().map(|w| descent(&config.map, &config.target, &config.resolved_weight, w)).collect()
                }
            },
            Run::Mpass { config, result } => match result {
                InjectivityVerdict::TwoPreimagesFound { witness, .. } => {
                    vec![descent(&config.map, &config.target, &config.resolved_weight, witness)]
                }
                InjectivityVerdict::NoEvidence { .. } => Vec::new(),
            },
            Run::Check { config, result } => from_check(&config.map, result),
            Run::GalleryAudit { result, .. } => result.reports.iter().flat_map(|r| from_check(&r.map, r)).collect(),
            Run::Profile { config, result } => {
                let p = &result.profile;
                vec![Replayable {
                    map: config.map.clone(),
                    witness: Witness::Profile {
                        r_max: p.r_max,
                        shells: p.shells,
                        per_shell: p.per_shell,
                        seed: p.seed,
                        radii: p.rows.iter().map(|r| r.rho).collect(),
                        varrho: p.rows.iter().map(|r| r.varrho).collect(),
                    },
                }]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReplayStatus {
    Ok { witnesses: usize },
    /// `witness` indexes [`Report::witnesses`]; `index` is the first stored entry that did not reproduce.
    Mismatch { witness: usize, index: usize },
}

pub fn replay_report(report: &Report) -> Result<ReplayStatus> {
    let all = report.witnesses();
    for (k, r) in all.iter().enumerate() {
        let map = lookup_map(&r.map)?;
        if let Some(index) = r.witness.replay(&map)? {
            return Ok(ReplayStatus::Mismatch { witness: k, index });
        }
    }
    Ok(ReplayStatus::Ok { witnesses: all.len() })
}

/// Re-evaluates every witness stored in the report at `path`.
pub fn replay(path: impl AsRef<Path>) -> Result<ReplayStatus> {
    let text = std::fs::read_to_string(path.as_ref())?;
    replay_report(&Report::from_json(&text)?)
}

/// `<stem>.profile.csv` and `<stem>.witness.csv` next to a report path.
pub fn csv_paths(report_path: &Path) -> (PathBuf, PathBuf) {
    let stem = report_path.with_extension("");
    let with = |suffix: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    };
    (with(".profile.csv"), with(".witness.csv"))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_profile_csv(path: &Path, profile: &HadamardProfile) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rho", "inf_estimate", "varrho"])?;
    for r in &profile.rows {
        w.write_record([num(r.rho), num(r.inf_estimate), num(r.varrho)])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per recorded point of every descent or band witness. Returns
/// false, writing nothing, when there are no such witnesses.
pub fn write_witness_csv(path: &Path, witnesses: &[Replayable]) -> Result<bool> {
    let traj: Vec<(usize, &crate::descent::CriticalSequenceWitness)> = witnesses
        .iter()
        .enumerate()
        .filter_map(|(k, r)| match &r.witness {
            Witness::Descent { witness, .. } => Some((k, witness)),
            _ => None,
        })
        .collect();
    if traj.is_empty() {
        return Ok(false);
    }
    let dim = traj.iter().flat_map(|(_, w)| w.points.iter().map(Vec::len)).max().unwrap_or(0);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["witness".to_string(), "index".into(), "f_value".into(), "weighted_criticality".into()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (k, wit) in traj {
        for (i, p) in wit.points.iter().enumerate() {
            let mut row = vec![k.to_string(), i.to_string(), num(wit.f_values[i]), num(wit.weighted_criticalities[i])];
            row.extend(p.iter().map(|v| num(*v)));
            row.resize(4 + dim, String::new());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(true)
}
