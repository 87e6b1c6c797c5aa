//! Batch driver behind the `pencil` binary: run configured experiments,
//! write figure data and run audits.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pencil_core::continuation::{
    classify_asymptotics, emit_curves, make_grid, sweep, Classification, ClassifyOptions, GridOptions, PointCounts,
    SweepOptions, SweepReport,
};
use pencil_core::fem1d::ProblemConfig;
use pencil_core::io::{csv_bytes, write_atomic, write_json, Format};
use pencil_core::oracles::{corrupt_positive_curve, random_pencil, run_audit_suite, AuditOptions, AuditReport};
use pencil_core::pencil::reference_5x5;
use pencil_core::sturm1d;
use pencil_core::{Mode, Pencil, PencilError, PencilSpec};

/// Element count of the built-in interval finite-element pencil.
pub const FIG2_ELEMS: usize = 32;
/// t-values at which the interval eigenfunctions are sampled.
pub const FIG2_TS: [f64; 4] = [1.5, 5.0, 100.0, 1e5];

#[derive(Debug)]
pub enum CliError {
    /// Malformed input or unusable paths; exit code 2.
    Input(String),
    /// Some enabled audit failed; exit code 1.
    AuditFailed(PathBuf),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::AuditFailed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "error: {m}"),
            CliError::AuditFailed(p) => write!(f, "audit failed; report at {}", p.display()),
        }
    }
}

impl From<PencilError> for CliError {
    fn from(e: PencilError) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    #[serde(alias = "paper5x5")]
    Pencil5x5,
    Fig2,
}

impl std::str::FromStr for Builtin {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| CliError::Input(format!("unknown builtin {s:?} (expected pencil5x5 or fig2)")))
    }
}

/// Exactly one problem source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSource {
    Builtin(Builtin),
    Pencil(PencilSpec),
    Fem1d(ProblemConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub n_points: usize,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { t_min: -1e6, t_max: 1e6, n_points: 400, scale: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AuditToggles {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Asymptotic classification; defaults to on for matrix pencils and off
    /// for finite-element pencils, whose curves approach their limits too
    /// slowly for a fixed-tolerance match.
    #[serde(default)]
    pub classify: Option<bool>,
    #[serde(default = "vc_samples")]
    pub vc_samples: usize,
    #[serde(default = "vc_points")]
    pub vc_points: usize,
    /// Corrupts one positive curve before auditing.
    #[serde(default)]
    pub negative_control: bool,
}

fn yes() -> bool {
    true
}

fn vc_samples() -> usize {
    64
}

fn vc_points() -> usize {
    5
}

impl Default for AuditToggles {
    fn default() -> Self {
        Self { enabled: true, classify: None, vc_samples: vc_samples(), vc_points: vc_points(), negative_control: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSource,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub audits: AuditToggles,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

impl RunConfig {
    pub fn builtin(b: Builtin) -> Self {
        let grid = match b {
            Builtin::Pencil5x5 => GridSpec::default(),
            Builtin::Fig2 => GridSpec { t_min: -1e4, t_max: 1e4, n_points: 200, scale: 1.0 },
        };
        Self {
            problem: ProblemSource::Builtin(b),
            grid,
            audits: AuditToggles::default(),
            seed: 0,
            out: None,
            format: Format::Csv,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("malformed config {}: {e}", path.display())))
    }

    pub fn pencil(&self) -> CliResult<Pencil> {
        Ok(match &self.problem {
            ProblemSource::Builtin(Builtin::Pencil5x5) => reference_5x5(),
            ProblemSource::Builtin(Builtin::Fig2) => ProblemConfig::fig2(FIG2_ELEMS).assemble()?,
            ProblemSource::Pencil(spec) => spec.clone().into_pencil()?,
            ProblemSource::Fem1d(cfg) => cfg.assemble()?,
        })
    }

    fn classify_enabled(&self) -> bool {
        self.audits.classify.unwrap_or(matches!(
            self.problem,
            ProblemSource::Builtin(Builtin::Pencil5x5) | ProblemSource::Pencil(_)
        ))
    }
}

/// Machine-readable summary written next to the curves.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub mode: Mode,
    pub threshold: Option<f64>,
    pub singular_times: Vec<f64>,
    pub limiting_positives: Vec<f64>,
    pub limiting_negatives: Vec<f64>,
    pub limiting_infinity: Option<usize>,
    pub curve_count: usize,
    pub reappearances: Vec<ReappearanceRow>,
    pub classification: Option<Classification>,
    pub counts: Vec<PointCounts>,
    pub warnings: Vec<String>,
    pub audits_passed: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReappearanceRow {
    pub curve_id: usize,
    pub singular_time: f64,
    pub first_t: f64,
}

pub struct RunOutcome {
    pub report: SweepReport,
    pub audit: Option<AuditReport>,
    pub curves_path: PathBuf,
    pub audit_path: Option<PathBuf>,
    pub summary_path: PathBuf,
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

/// Sweep, classify and audit one pencil, writing curves, summary and audit
/// report. Returns the outcome even when audits fail.
pub fn sweep_and_audit(p: &Pencil, cfg: &RunConfig, out: &Path, format: Format, stem: &str) -> CliResult<RunOutcome> {
    ensure_dir(out)?;
    let grid = make_grid(
        cfg.grid.t_min,
        cfg.grid.t_max,
        cfg.grid.n_points,
        p,
        GridOptions { scale: cfg.grid.scale, ..GridOptions::default() },
    )?;
    let mut report = sweep(p, &grid, SweepOptions::default())?;
    let limiting = p.limiting_spectrum().ok();
    if cfg.classify_enabled() {
        let lim = limiting.clone().ok_or_else(|| CliError::Input("the limiting problem is not solvable".into()))?;
        report = classify_asymptotics(report, &lim, p.negative_limit_count(), ClassifyOptions::default())?;
    }
    report.limiting = limiting;
    if cfg.audits.negative_control && corrupt_positive_curve(&mut report).is_none() {
        return Err(CliError::Input("negative control needs a positive curve with at least 3 points".into()));
    }
    let audit = cfg.audits.enabled.then(|| {
        run_audit_suite(
            p,
            &report,
            AuditOptions { seed: cfg.seed, vc_samples: cfg.audits.vc_samples, vc_points: cfg.audits.vc_points },
        )
    });
    let curves_path = out.join(format!("{stem}curves.{}", format.extension()));
    emit_curves(&report, format, &curves_path)?;
    let audit_path = match &audit {
        Some(a) => {
            let path = out.join(format!("{stem}audit.json"));
            write_json(&path, a)?;
            Some(path)
        }
        None => None,
    };
    let summary = Summary {
        mode: report.mode,
        threshold: report.threshold,
        singular_times: report.singular_times.clone(),
        limiting_positives: report.limiting.as_ref().map(|l| l.positive_values()).unwrap_or_default(),
        limiting_negatives: report.limiting.as_ref().map(|l| l.negative_values()).unwrap_or_default(),
        limiting_infinity: report.limiting.as_ref().map(|l| l.infinity_multiplicity),
        curve_count: report.curves.len(),
        reappearances: report
            .curves
            .iter()
            .filter_map(|c| match c.origin {
                pencil_core::continuation::CurveOrigin::ReappearsFrom(ts) => {
                    Some(ReappearanceRow { curve_id: c.id, singular_time: ts, first_t: c.first_t() })
                }
                _ => None,
            })
            .collect(),
        classification: report.classification.clone(),
        counts: report.counts.clone(),
        warnings: report.warnings.clone(),
        audits_passed: audit.as_ref().map(|a| a.passed()),
    };
    let summary_path = out.join(format!("{stem}summary.json"));
    write_json(&summary_path, &summary)?;
    report.audits = audit.clone();
    Ok(RunOutcome { report, audit, curves_path, audit_path, summary_path })
}

fn out_dir(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn verdict(outcome: RunOutcome) -> CliResult<RunOutcome> {
    match (&outcome.audit, &outcome.audit_path) {
        (Some(a), Some(path)) if !a.passed() => Err(CliError::AuditFailed(path.clone())),
        _ => Ok(outcome),
    }
}

/// The `run` command: exit 0 iff every enabled audit passes.
pub fn run_config(cfg: &RunConfig, out: Option<&Path>, format: Option<Format>) -> CliResult<RunOutcome> {
    let p = cfg.pencil()?;
    let out = out_dir(cfg, out);
    verdict(sweep_and_audit(&p, cfg, &out, format.unwrap_or(cfg.format), "")?)
}

pub fn print_audit(audit: &AuditReport) {
    for c in &audit.checks {
        let state = match (&c.skipped, c.passed, c.informational) {
            (Some(_), _, _) => "SKIP",
            (None, true, _) => "PASS",
            (None, false, true) => "INFO",
            (None, false, false) => "FAIL",
        };
        println!("{state} {:<24} worst margin {:>12.4e} over {} samples", c.name, c.worst_margin, c.samples);
        if let (false, Some(w)) = (c.passed, &c.witness) {
            println!("     witness t = {}: {}", w.t, w.detail);
        }
    }
}

/// The `audit` command on a configured problem.
pub fn audit_config(cfg: &RunConfig, out: Option<&Path>) -> CliResult<AuditReport> {
    let p = cfg.pencil()?;
    let out = out_dir(cfg, out);
    let cfg = RunConfig { audits: AuditToggles { enabled: true, ..cfg.audits }, ..cfg.clone() };
    let outcome = sweep_and_audit(&p, &cfg, &out, cfg.format, "")?;
    let audit = outcome.audit.clone().expect("audits enabled");
    print_audit(&audit);
    verdict(outcome).map(|_| audit)
}

#[derive(Clone, Debug, Serialize)]
pub struct RandomAuditRow {
    pub seed: u64,
    pub dim: usize,
    pub passed: bool,
    pub failed_checks: Vec<String>,
}

/// Audits random fixed-mode pencils with seeds seed..seed + n.
pub fn audit_random(n: usize, seed: u64, out: &Path) -> CliResult<Vec<RandomAuditRow>> {
    ensure_dir(out)?;
    let mut rows = Vec::with_capacity(n);
    for s in seed..seed + n as u64 {
        let dim = 2 + (s % 5) as usize;
        let p = random_pencil(s, dim)?;
        let cfg = RunConfig {
            grid: GridSpec { t_min: -1e3, t_max: 1e3, n_points: 120, scale: 1.0 },
            audits: AuditToggles { classify: Some(false), vc_samples: 32, vc_points: 3, ..AuditToggles::default() },
            seed: s,
            ..RunConfig::builtin(Builtin::Pencil5x5)
        };
        let outcome = sweep_and_audit(&p, &cfg, &out.join(format!("seed{s}")), Format::Csv, "")?;
        let audit = outcome.audit.expect("audits enabled");
        rows.push(RandomAuditRow {
            seed: s,
            dim,
            passed: audit.passed(),
            failed_checks: audit.failures().iter().map(|c| c.name.clone()).collect(),
        });
    }
    let path = out.join("random_audit.json");
    write_json(&path, &rows)?;
    for r in &rows {
        println!("{} seed {} (d = {})", if r.passed { "PASS" } else { "FAIL" }, r.seed, r.dim);
    }
    if rows.iter().all(|r| r.passed) {
        Ok(rows)
    } else {
        Err(CliError::AuditFailed(path))
    }
}

fn write_table<T: Serialize>(rows: &[T], header: &[&str], format: Format, path: &Path) -> CliResult<()> {
    let bytes = match format {
        Format::Csv => csv_bytes(rows, header)?,
        Format::Json => {
            let mut b = serde_json::to_vec_pretty(rows).map_err(PencilError::from)?;
            b.push(b'\n');
            b
        }
    };
    Ok(write_atomic(path, &bytes)?)
}

/// Eigenfunction samples at the four interval-problem t-values plus the λ(t), u(0)
/// table. Returns the written paths.
pub fn reproduce_fig2(out: &Path, format: Format) -> CliResult<Vec<PathBuf>> {
    ensure_dir(out)?;
    let ext = format.extension();
    let mut paths = Vec::new();
    let xs = sturm1d::uniform_samples(400);
    for &t in &FIG2_TS {
        let pair = sturm1d::shooting_pair(t)?;
        let us = sturm1d::eigenfunction_sample(&pair, &xs)?;
        let rows: Vec<sturm1d::SampleRow> = xs.iter().zip(us).map(|(&x, u)| sturm1d::SampleRow { x, u }).collect();
        let path = out.join(format!("fig2_eigenfunction_t{t}.{ext}"));
        write_table(&rows, &["x", "u"], format, &path)?;
        paths.push(path);
    }
    let rows = sturm1d::principal_table(&FIG2_TS)?;
    let path = out.join(format!("fig2_principal.{ext}"));
    write_table(&rows, &["t", "lambda", "u0"], format, &path)?;
    paths.push(path);
    Ok(paths)
}

/// Full compactified sweep of the 5×5 pencil with classification and
/// singular-time annotations.
pub fn reproduce_fig3(out: &Path, format: Format, seed: u64) -> CliResult<RunOutcome> {
    let cfg = RunConfig { seed, ..RunConfig::builtin(Builtin::Pencil5x5) };
    verdict(sweep_and_audit(&reference_5x5(), &cfg, out, format, "fig3_")?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        assert_eq!("pencil5x5".parse::<Builtin>().unwrap(), Builtin::Pencil5x5);
        assert_eq!("paper5x5".parse::<Builtin>().unwrap(), Builtin::Pencil5x5);
        assert_eq!("fig2".parse::<Builtin>().unwrap(), Builtin::Fig2);
        assert!("fig9".parse::<Builtin>().is_err());
    }

    #[test]
    fn config_schema() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"problem": {"builtin": "pencil5x5"}, "grid": {"tMin": -10, "tMax": 10, "nPoints": 50}, "seed": 3}"#,
        )
        .unwrap();
        assert_eq!(cfg.grid.scale, 1.0);
        assert!(cfg.audits.enabled);
        assert!(cfg.classify_enabled());
        assert!(serde_json::from_str::<RunConfig>(r#"{"problem": {"builtin": "pencil5x5"}, "extra": 1}"#).is_err());
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input(String::new()).exit_code(), 2);
        assert_eq!(CliError::AuditFailed(PathBuf::new()).exit_code(), 1);
    }
}
