//! Command-line front end. `main.rs` only forwards to [`main_with`].

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::criteria::profile::{derive_weight_from_profile, hadamard_profile};
use crate::criteria::star::default_starts;
use crate::criteria::{check_all, check_integral_divergence, gallery_audit, CheckConfig, WeightSpec};
use crate::descent::{solve_with, DescentConfig};
use crate::error::{Error, Result};
use crate::gallery::{gallery_json, lookup_map};
use crate::linalg::Vector;
use crate::map_model::{Condition, MapUnderTest};
use crate::mountain_pass::{injectivity_falsifier, FalsifierConfig};
use crate::report::{
    csv_paths, replay, write_profile_csv, write_witness_csv, CheckRunConfig, MpassConfig, ProfileConfig,
    ProfileResult, Report, ReplayStatus, Run, SolveConfig,
};
use crate::variational::Weight;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
/// `replay` found a stored value that does not reproduce.
pub const EXIT_MISMATCH: i32 = 1;

/// Shells and samples per shell behind `derived` weights and `profile`.
pub const PROFILE_SHELLS: usize = 256;
pub const PROFILE_PER_SHELL: usize = 64;

#[derive(Debug, Parser)]
#[command(name = "invertkit", version, about = "Global inversion diagnostics for nonlinear maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve f(x) = y by weighted descent from each start in turn.
    Solve(RunArgs),
    /// Look for two preimages of y and run the mountain-pass band between them.
    Mpass(RunArgs),
    /// Evaluate the criteria chain on one map.
    Check(RunArgs),
    /// Check every gallery map with one budget and audit the implications.
    GalleryAudit(RunArgs),
    /// Tabulate the Hadamard profile and derived weight up to --radius.
    Profile(RunArgs),
    /// Re-evaluate every witness stored in a report.
    Replay { report: PathBuf },
    /// List the gallery maps with their ground truth.
    Gallery,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Map spec, e.g. `arctan` or `shifted-sine:2,1`.
    #[arg(long)]
    pub map: Option<String>,
    /// Target vector, e.g. `1,0`. Defaults to the origin.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<String>,
    /// zero, cerami, derived, or a path to a weight JSON file.
    #[arg(long)]
    pub weight: Option<String>,
    #[arg(long, default_value_t = 10.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_residual: f64,
    /// `all` or a comma list of 1, 2, 3, starstar, 4, 5, star, 6.
    #[arg(long, default_value = "all")]
    pub criteria: String,
    /// Report path; CSV tables go next to it. Without it the report is printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Semicolon-separated start vectors, e.g. `0,0;0,6`.
    #[arg(long, allow_hyphen_values = true)]
    pub starts: Option<String>,
}

pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    let inner = s.trim().trim_start_matches(['(', '[']).trim_end_matches([')', ']']);
    let parts: Vec<&str> = inner.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
    if parts.is_empty() {
        return Err(Error::InvalidArgument(format!("empty vector literal `{s}`")));
    }
    parts
        .iter()
        .map(|p| match p.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::InvalidArgument(format!("malformed vector literal `{s}`"))),
        })
        .collect()
}

pub fn parse_starts(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_vector).collect()
}

pub fn parse_criteria(s: &str) -> Result<Vec<Condition>> {
    if s.trim() == "all" {
        return Ok(Condition::CHAIN.to_vec());
    }
    s.split(',')
        .map(|k| Condition::from_key(k.trim()).ok_or_else(|| Error::InvalidArgument(format!("unknown criterion `{k}`"))))
        .collect()
}

impl RunArgs {
    fn map(&self) -> Result<(String, MapUnderTest)> {
        let spec = self.map.clone().ok_or_else(|| Error::InvalidArgument("--map is required".into()))?;
        let map = lookup_map(&spec)?;
        Ok((spec, map))
    }

    fn target(&self, map: &MapUnderTest) -> Result<Option<Vec<f64>>> {
        let Some(t) = &self.target else { return Ok(None) };
        let y = parse_vector(t)?;
        map.check_dim(&Vector::from_column_slice(&y))?;
        Ok(Some(y))
    }

    fn starts(&self, map: &MapUnderTest) -> Result<Vec<Vec<f64>>> {
        let starts = match &self.starts {
            Some(s) => parse_starts(s)?,
            None => default_starts(map.dim(), self.radius).iter().map(|v| v.iter().copied().collect()).collect(),
        };
        if starts.is_empty() {
            return Err(Error::InvalidArgument("--starts is empty".into()));
        }
        for s in &starts {
            map.check_dim(&Vector::from_column_slice(s))?;
        }
        Ok(starts)
    }

    fn weight_spec(&self, default: WeightSpec) -> Result<WeightSpec> {
        self.weight.as_deref().map_or(Ok(default), str::parse)
    }

    fn positive_radius(&self) -> Result<()> {
        if self.radius > 0.0 && self.radius.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("--radius must be positive, got {}", self.radius)))
        }
    }

    fn descent(&self) -> Result<DescentConfig> {
        let mut d = DescentConfig::new(&[]);
        d.residual_tol = self.tol_residual;
        d.validate()?;
        Ok(d)
    }

    fn check_config(&self, target: Option<Vec<f64>>) -> Result<CheckConfig> {
        let mut c = CheckConfig::new(self.radius, self.samples, self.seed);
        c.target = target;
        c.weight = self.weight_spec(WeightSpec::Derived)?;
        c.criteria = parse_criteria(&self.criteria)?;
        c.descent = self.descent()?;
        c.validate()?;
        Ok(c)
    }
}

/// Resolves a weight spec; `derived` tabulates the map's profile up to twice the radius.
fn resolve_weight(spec: &WeightSpec, map: &MapUnderTest, radius: f64, seed: u64) -> Result<Weight> {
    let derived = match spec {
        WeightSpec::Derived => {
            let p = hadamard_profile(map, 2.0 * radius, PROFILE_SHELLS, PROFILE_PER_SHELL, seed)?;
            match derive_weight_from_profile(&p) {
                Ok(w) => {
                    let status = check_integral_divergence(&w, 2.0 * radius)?;
                    Some(w.with_divergence_status(status))
                }
                Err(Error::WeightUndefined { .. }) => None,
                Err(e) => return Err(e),
            }
        }
        _ => None,
    };
    spec.resolve(derived.as_ref())
}

fn vectors(v: &[Vec<f64>]) -> Vec<Vector> {
    v.iter().map(|p| Vector::from_column_slice(p)).collect()
}

/// Executes one of the report-producing subcommands.
pub fn run(command: &Command) -> Result<Report> {
    let run = match command {
        Command::Solve(a) => {
            a.positive_radius()?;
            let (spec, map) = a.map()?;
            let target = a.target(&map)?.unwrap_or_else(|| vec![0.0; map.dim()]);
            let weight = a.weight_spec(WeightSpec::Zero)?;
            let resolved = resolve_weight(&weight, &map, a.radius, a.seed)?;
            let starts = a.starts(&map)?;
            let descent = a.descent()?;
            let result =
                solve_with(&map, &Vector::from_column_slice(&target), &resolved, &vectors(&starts), &descent)?;
            let config = SolveConfig { map: spec, target, weight, resolved_weight: resolved, starts, descent };
            Run::Solve { config, result }
        }
        Command::Mpass(a) => {
            a.positive_radius()?;
            let (spec, map) = a.map()?;
            let target = a.target(&map)?.unwrap_or_else(|| vec![0.0; map.dim()]);
            let weight = a.weight_spec(WeightSpec::Zero)?;
            let resolved = resolve_weight(&weight, &map, a.radius, a.seed)?;
            let starts = a.starts(&map)?;
            let mut falsifier = FalsifierConfig::new(0);
            falsifier.descent = a.descent()?;
            let y = Vector::from_column_slice(&target);
            let result = injectivity_falsifier(&map, &y, &vectors(&starts), &resolved, &falsifier)?;
            let config = MpassConfig { map: spec, target, weight, resolved_weight: resolved, starts, falsifier };
            Run::Mpass { config, result }
        }
        Command::Check(a) => {
            let (spec, map) = a.map()?;
            let check = a.check_config(a.target(&map)?)?;
            let result = check_all(&map, &check)?;
            Run::Check { config: CheckRunConfig { map: spec, check }, result }
        }
        Command::GalleryAudit(a) => {
            if a.map.is_some() {
                return Err(Error::InvalidArgument("gallery-audit runs every gallery map; drop --map".into()));
            }
            if a.target.is_some() {
                return Err(Error::InvalidArgument("gallery-audit uses each map's origin as target; drop --target".into()));
            }
            let config = a.check_config(None)?;
            let result = gallery_audit(&config)?;
            Run::GalleryAudit { config, result }
        }
        Command::Profile(a) => {
            a.positive_radius()?;
            let (spec, map) = a.map()?;
            let profile = hadamard_profile(&map, a.radius, PROFILE_SHELLS, PROFILE_PER_SHELL, a.seed)?;
            let (derived_weight, note) = match derive_weight_from_profile(&profile) {
                Ok(w) => {
                    let status = check_integral_divergence(&w, a.radius)?;
                    (Some(w.with_divergence_status(status)), None)
                }
                Err(e @ Error::WeightUndefined { .. }) => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            let config = ProfileConfig {
                map: spec,
                r_max: a.radius,
                shells: PROFILE_SHELLS,
                per_shell: PROFILE_PER_SHELL,
                seed: a.seed,
            };
            Run::Profile { config, result: ProfileResult { profile, derived_weight, note } }
        }
        Command::Replay { .. } | Command::Gallery => {
            return Err(Error::InvalidArgument("subcommand does not produce a report".into()));
        }
    };
    Ok(Report::new(run))
}

/// Writes the report to `out` (plus CSV tables) or to stdout.
pub fn emit(report: &Report, out: Option<&std::path::Path>) -> Result<()> {
    let json = report.to_json()?;
    let Some(out) = out else {
        return write_stdout(&json);
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out, json)?;
    let (profile_csv, witness_csv) = csv_paths(out);
    if let Run::Profile { result, .. } = &report.run {
        write_profile_csv(&profile_csv, &result.profile)?;
    }
    write_witness_csv(&witness_csv, &report.witnesses())?;
    Ok(())
}

/// Writes to stdout; a closed pipe on the reading side is not an error.
fn write_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Gallery => {
            write_stdout(&(gallery_json()? + "\n"))?;
            Ok(EXIT_OK)
        }
        Command::Replay { report } => {
            let status = replay(report)?;
            write_stdout(&crate::report::to_json(&status)?)?;
            Ok(match status {
                ReplayStatus::Ok { .. } => EXIT_OK,
                ReplayStatus::Mismatch { .. } => EXIT_MISMATCH,
            })
        }
        Command::Solve(a) | Command::Mpass(a) | Command::Check(a) | Command::GalleryAudit(a) | Command::Profile(a) => {
            let report = run(&cli.command)?;
            emit(&report, a.out.as_deref())?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_literals() {
        assert_eq!(parse_vector("1,0").unwrap(), vec![1.0, 0.0]);
        assert_eq!(parse_vector("(1, -2.5)").unwrap(), vec![1.0, -2.5]);
        assert_eq!(parse_vector("[3e-1]").unwrap(), vec![0.3]);
        assert!(parse_vector("1,x").is_err());
        assert!(parse_vector("").is_err());
        assert!(parse_vector("nan").is_err());
        assert_eq!(parse_starts("0,0;0,6; 0,-6").unwrap().len(), 3);
    }

    #[test]
    fn criteria_lists() {
        assert_eq!(parse_criteria("all").unwrap().len(), 8);
        assert_eq!(parse_criteria("1,starstar,star").unwrap(), vec![Condition::Isometry, Condition::IntegralCondition, Condition::WeightedPalaisSmale]);
        assert!(parse_criteria("7").is_err());
    }
}
