use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;
use weingarten::geometry::{
    check_codazzi_flat, check_supp_identities, compute_geometry, extrinsic_oracle_euclidean,
    RefinementStudy,
};
use weingarten::io::{write_field, write_geometry, write_monitor};
use weingarten::monitor::monitor;
use weingarten::problem::{AssumptionReport, Point};
use weingarten::selftest;
use weingarten::solver::{continuation_solve_with, ContinuationStatus};
use weingarten::{ScalarField, SphereMesh};

use crate::config::{Config, ConfigError, RunConfig};
use crate::report::{HistoryEntry, RunReport, RunStatus, Timings};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] weingarten::Error),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot serialise report: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    Ok((path, BufWriter::new(file)))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let (path, mut w) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.into(),
        source,
    })
}

/// Outcome of `solve`: the report is also written to `out/report.json`.
#[derive(Debug)]
pub struct SolveOutcome {
    pub report: RunReport,
    pub solution: Option<ScalarField>,
}

impl SolveOutcome {
    pub fn exit_code(&self) -> i32 {
        self.report.status.exit_code()
    }
}

/// Assumption check, continuation with per-state monitoring, then output.
pub fn cmd_solve(cfg: &Config, out: &Path, force: bool) -> Result<SolveOutcome, CliError> {
    let t_total = Instant::now();
    let run: RunConfig = cfg.run_config()?;
    ensure_dir(out)?;

    let t0 = Instant::now();
    let assumptions = run.spec.check_assumptions(run.samples);
    let mut timings = Timings {
        assumptions_s: t0.elapsed().as_secs_f64(),
        ..Default::default()
    };
    let mut report = RunReport {
        status: RunStatus::Error,
        config: cfg.echo(),
        problem: run.spec.summary(),
        forced: force,
        assumptions,
        continuation: None,
        history: vec![],
        total_newton_iterations: 0,
        barrier_violations: 0,
        final_t: None,
        final_residual: None,
        files: BTreeMap::new(),
        timings: Timings::default(),
        error: None,
    };
    let assumptions_ok = report.assumptions.passed();
    if !assumptions_ok && !force {
        report.status = RunStatus::AssumptionFail;
        timings.total_s = t_total.elapsed().as_secs_f64();
        report.timings = timings;
        let path = write_json(out, "report.json", &report)?;
        report
            .files
            .insert("report".into(), path.display().to_string());
        return Ok(SolveOutcome {
            report,
            solution: None,
        });
    }

    let t1 = Instant::now();
    let spec = &run.spec;
    let mut history = Vec::new();
    let mut hook_error = None;
    let result =
        continuation_solve_with(
            spec,
            &run.mesh,
            &run.solver,
            |state| match compute_geometry(&state.r, &spec.profile, run.solver.exec) {
                Ok(g) => history.push(HistoryEntry {
                    state: state.clone(),
                    monitor: monitor(&g, spec, state.t, &run.monitor),
                }),
                Err(e) => {
                    hook_error.get_or_insert(e);
                }
            },
        );
    timings.solve_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let mut solution = None;
    match result {
        Err(e) => {
            report.status = RunStatus::Error;
            report.error = Some(e.to_string());
        }
        Ok(res) => {
            report.total_newton_iterations = res.total_newton_iterations();
            let last = res.last();
            report.final_t = Some(last.t);
            report.final_residual = Some(last.residual_norm);
            report.status = if res.converged() {
                RunStatus::Converged
            } else {
                RunStatus::Breakdown
            };
            if let Some(e) = hook_error {
                report.status = RunStatus::Error;
                report.error = Some(format!("monitor failed: {e}"));
            }
            report.continuation = Some(res.status.clone());
            if assumptions_ok {
                report.barrier_violations = history
                    .iter()
                    .filter(|h: &&HistoryEntry| !h.monitor.barrier_ok)
                    .count();
            }
            let (p, mut w) = create(out, "solution.csv")?;
            write_field(&mut w, &last.r)?;
            report
                .files
                .insert("solution".into(), p.display().to_string());
            let geom = compute_geometry(&last.r, &spec.profile, run.solver.exec)?;
            let (p, mut w) = create(out, "geometry.csv")?;
            write_geometry(&mut w, &geom)?;
            report
                .files
                .insert("geometry".into(), p.display().to_string());
            solution = Some(last.r.clone());
        }
    }
    report.history = history;
    let (p, mut w) = create(out, "monitor.csv")?;
    write_monitor(&mut w, &report.monitor_records())?;
    report
        .files
        .insert("monitor".into(), p.display().to_string());
    report.files.insert(
        "report".into(),
        out.join("report.json").display().to_string(),
    );
    timings.output_s = t2.elapsed().as_secs_f64();
    timings.total_s = t_total.elapsed().as_secs_f64();
    report.timings = timings;
    write_json(out, "report.json", &report)?;
    Ok(SolveOutcome { report, solution })
}

pub fn cmd_check_assumptions(cfg: &Config) -> Result<AssumptionReport, CliError> {
    let run = cfg.run_config()?;
    Ok(run.spec.check_assumptions(run.samples))
}

#[derive(Debug, Clone, Serialize)]
pub struct ToleranceCheck {
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl ToleranceCheck {
    fn new(value: f64, tolerance: f64) -> Self {
        Self {
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub rows: Vec<(usize, f64)>,
    pub ratios: Vec<f64>,
    pub finest: ToleranceCheck,
    pub last_ratio: ToleranceCheck,
    pub passed: bool,
}

/// Residuals at the finest resolution must be `<= 1e-4` and the last
/// refinement ratio at least 8, unless the residual is already at round-off.
pub const IDENTITY_TOL: f64 = 1e-4;
pub const MIN_RATIO: f64 = 8.0;
/// Max relative error of the curvatures against the extrinsic oracle.
pub const ORACLE_TOL: f64 = 1e-5;

impl StudyReport {
    fn from(study: RefinementStudy) -> Self {
        let ratios = study.ratios();
        let finest = ToleranceCheck::new(study.finest().unwrap_or(f64::INFINITY), IDENTITY_TOL);
        let last = ratios.last().copied().unwrap_or(0.0);
        let at_roundoff = finest.value <= 1e-11;
        let last_ratio = ToleranceCheck {
            value: last,
            tolerance: MIN_RATIO,
            passed: last >= MIN_RATIO || at_roundoff,
        };
        let passed = finest.passed && last_ratio.passed;
        Self {
            rows: study.rows,
            ratios,
            finest,
            last_ratio,
            passed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub oracle: Option<ToleranceCheck>,
    pub oracle_skipped: Option<String>,
    pub support_identities: StudyReport,
    pub codazzi: Option<StudyReport>,
    pub codazzi_skipped: Option<String>,
    pub passed: bool,
}

fn field_from_expr(
    mesh: Arc<SphereMesh>,
    e: &weingarten::problem::FExpr,
) -> weingarten::Result<ScalarField> {
    ScalarField::from_fn(mesh, |th, ph| {
        e.eval(&Point {
            r: 0.0,
            th,
            ph,
            nur: 0.0,
        })
    })
}

/// Extrinsic oracle on `verify.r` at the configured mesh (euclidean only),
/// support-function and Codazzi refinement studies on `verify.r_axisym`.
pub fn cmd_verify_geometry(cfg: &Config) -> Result<VerifyReport, CliError> {
    let profile = cfg.warp()?;
    let res = cfg.resolution()?;
    let v = cfg.verify()?;
    let euclidean = matches!(profile.kind(), weingarten::warp::WarpKind::Euclidean);

    let (oracle, oracle_skipped) = if euclidean {
        let mesh = res.build()?;
        let r = field_from_expr(mesh, &v.r)?;
        let geom = compute_geometry(&r, &profile, weingarten::Execution::default())?;
        let exact = extrinsic_oracle_euclidean(&r)?;
        let err = geom.nodes().iter().zip(&exact).fold(0.0f64, |m, (n, k)| {
            let scale = k[0].abs().max(k[1].abs());
            m.max((n.kappa[0] - k[0]).abs() / scale)
                .max((n.kappa[1] - k[1]).abs() / scale)
        });
        (Some(ToleranceCheck::new(err, ORACLE_TOL)), None)
    } else {
        (
            None,
            Some(
                "the extrinsic oracle embeds in flat space; warp.kind must be euclidean"
                    .to_string(),
            ),
        )
    };

    let reduced_geom = |n: usize| -> weingarten::Result<weingarten::GraphGeometry> {
        let mesh = SphereMesh::build(n, 1, true)?;
        compute_geometry(
            &field_from_expr(mesh, &v.r_axisym)?,
            &profile,
            weingarten::Execution::default(),
        )
    };
    let supp = RefinementStudy::run(&v.n_reduced, |n| {
        Ok(check_supp_identities(&reduced_geom(n)?, &profile)?.max())
    })?;
    let support_identities = StudyReport::from(supp);
    let (codazzi, codazzi_skipped) = match profile.space_form_curvature() {
        Some(_) => {
            let s = RefinementStudy::run(&v.n_reduced, |n| {
                check_codazzi_flat(&reduced_geom(n)?, &profile)
            })?;
            (Some(StudyReport::from(s)), None)
        }
        None => (
            None,
            Some("Codazzi check needs a space-form warp".to_string()),
        ),
    };
    let passed = oracle.as_ref().is_none_or(|o| o.passed)
        && support_identities.passed
        && codazzi.as_ref().is_none_or(|c| c.passed);
    Ok(VerifyReport {
        oracle,
        oracle_skipped,
        support_identities,
        codazzi,
        codazzi_skipped,
        passed,
    })
}

/// Seed of the property suite run by `selftest`.
pub const SELFTEST_SEED: u64 = 20_240_601;

pub fn cmd_selftest() -> selftest::SelftestReport {
    selftest::run(SELFTEST_SEED)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub status: RunStatus,
    pub dir: String,
    pub final_t: Option<f64>,
    pub error: Option<String>,
}

/// One `solve` per value of `key`, each into `out/<key>=<value>/`.
pub fn cmd_sweep(
    cfg: &Config,
    key: &str,
    values: &[String],
    out: &Path,
    force: bool,
) -> Result<Vec<SweepRow>, CliError> {
    ensure_dir(out)?;
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut c = cfg.clone();
        c.set(key, value.as_str())?;
        let dir = out.join(format!("{key}={value}"));
        let row = match cmd_solve(&c, &dir, force) {
            Ok(o) => SweepRow {
                value: value.clone(),
                status: o.report.status,
                dir: dir.display().to_string(),
                final_t: o.report.final_t,
                error: o.report.error,
            },
            Err(CliError::Config(e)) => return Err(e.into()),
            Err(e) => SweepRow {
                value: value.clone(),
                status: RunStatus::Error,
                dir: dir.display().to_string(),
                final_t: None,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    write_json(out, "sweep.json", &rows)?;
    Ok(rows)
}

/// Worst exit code of a sweep: any failure wins over success.
pub fn sweep_exit_code(rows: &[SweepRow]) -> i32 {
    rows.iter()
        .map(|r| r.status.exit_code())
        .find(|&c| c != 0)
        .unwrap_or(0)
}

/// Text form of a continuation status for terminal output.
pub fn describe(status: &Option<ContinuationStatus>) -> String {
    match status {
        Some(ContinuationStatus::Converged) => "converged".into(),
        Some(ContinuationStatus::Breakdown {
            t_from,
            t_to,
            reason,
        }) => {
            format!("breakdown between t = {t_from} and t = {t_to}: {reason}")
        }
        None => "not run".into(),
    }
}
