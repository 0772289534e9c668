//! Experiment orchestration: single runs, theta sweeps, convergence studies,
//! and re-reading persisted runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::btransform::{b_residual, transform_to_b, BTransformParams};
use crate::config::{parse_config, RunManifest, SweepSpec};
use crate::diagnostics::record;
use crate::dynamics::{evolve, integrate_fixed, BlowupCause, Direction, Terminal, ThetaParam, Trajectory};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, format_diagnostics, format_paths, format_riccati, read_snapshot, write_snapshot, write_text};
use crate::lagrangian::{
    advect, blowup_bound, invariant_residual, invariant_residual_theta0, riccati_trace, run_time_bound, RiccatiRegime,
};
use crate::scenarios::{validate, validate_about, HypothesisReport, Regime};
use crate::spectral::Field;

pub const SWEEP_HEADER: &str = "theta,outcome,t_detect,t_star,bound_satisfied,peak_slope,detail";
pub const CONVERGENCE_HEADER: &str = "kind,n,dt,error,ratio";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    /// The slope detector or the step-size floor fired.
    Blowup,
    /// The state turned non-finite before the detector fired.
    Failed,
}

impl RunStatus {
    pub fn exit_code(self) -> u8 {
        match self {
            RunStatus::Completed => 0,
            RunStatus::Blowup => 2,
            RunStatus::Failed => 1,
        }
    }

    fn of(traj: &Trajectory) -> Self {
        match traj.blowup() {
            None => RunStatus::Completed,
            Some(r) if r.cause == BlowupCause::NonFinite => RunStatus::Failed,
            Some(_) => RunStatus::Blowup,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub terminal: Terminal,
    pub steps: usize,
    pub t_last: f64,
    pub peak_slope: f64,
    pub hypotheses: HypothesisReport,
    pub warnings: Vec<String>,
    /// Breaking-time bound as stated by the theorem, and in run time.
    pub t_star: Option<f64>,
    pub t_star_run: Option<f64>,
    pub riccati_regime: Option<RiccatiRegime>,
    /// `d' + kappa d² <= 1e-3 d²` at every recorded time.
    pub riccati_holds: Option<bool>,
    /// Largest relative deviation of the characteristic invariant.
    pub invariant_residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub trajectory: Trajectory,
    pub report: RunReport,
    /// Every file written.
    pub artifacts: Vec<PathBuf>,
}

struct Executed {
    trajectory: Trajectory,
    report: RunReport,
    riccati: Option<crate::lagrangian::RiccatiTrace>,
    paths: Vec<crate::lagrangian::CharacteristicPath>,
}

fn hypotheses(manifest: &RunManifest, u0: &Field) -> Result<HypothesisReport> {
    let theta = manifest.config.theta;
    match manifest.x_star {
        Some(x) => validate_about(u0, theta, x),
        None => validate(u0, theta),
    }
}

fn breaking_bound(u0: &Field, theta: ThetaParam, hyp: &HypothesisReport) -> Option<f64> {
    let applies = hyp
        .applicable_theorems
        .iter()
        .any(|r| matches!(r, Regime::BlowupI | Regime::BlowupII));
    let x_star = hyp.odd_about?;
    if !applies {
        return None;
    }
    blowup_bound(u0, x_star, theta).ok()
}

fn execute(manifest: &RunManifest, with_extras: bool) -> Result<Executed> {
    let theta = manifest.config.theta;
    let scenario = manifest.scenario.build(manifest.grid)?;
    let hyp = hypotheses(manifest, &scenario.u0)?;
    let t_star = breaking_bound(&scenario.u0, theta, &hyp);
    let t_star_run = t_star.map(|t| run_time_bound(t, theta));
    let mut trajectory = evolve(&scenario.u0, &manifest.config)?;
    if let Some(b) = trajectory.blowup_mut() {
        b.theoretical_bound = t_star_run;
    }
    let regime = RiccatiRegime::of(theta);
    let riccati = match hyp.odd_about {
        Some(x) if with_extras && regime != RiccatiRegime::NotApplicable => Some(riccati_trace(&trajectory, x, theta)?),
        _ => None,
    };
    let paths = if with_extras && !manifest.seeds.is_empty() {
        advect(&trajectory, &manifest.seeds, theta)?
    } else {
        Vec::new()
    };
    let invariant = if paths.is_empty() {
        None
    } else if theta.is_zero() {
        Some(invariant_residual_theta0(&paths, &scenario.m0))
    } else {
        Some(invariant_residual(&paths, &scenario.m0, theta)?)
    };
    let report = RunReport {
        status: RunStatus::of(&trajectory),
        terminal: trajectory.terminal.clone(),
        steps: trajectory.steps,
        t_last: trajectory.t_last(),
        peak_slope: trajectory.peak_slope,
        hypotheses: hyp,
        warnings: scenario.warnings.clone(),
        t_star,
        t_star_run,
        riccati_regime: riccati.as_ref().map(|r| r.regime),
        riccati_holds: riccati.as_ref().map(|r| r.inequality_holds(1e-3)),
        invariant_residual: invariant,
    };
    Ok(Executed {
        trajectory,
        report,
        riccati,
        paths,
    })
}

fn snapshot_name(index: usize) -> String {
    format!("{index:06}.csv")
}

/// Execute a run and write its artifacts under the manifest's output directory.
pub fn run(manifest: &RunManifest) -> Result<RunOutcome> {
    let out = &manifest.outputs;
    let root = out.root();
    let manifest_path = out.file(&out.manifest);
    write_text(&manifest_path, &manifest.to_json()?)?;
    let mut artifacts = vec![manifest_path];
    let ex = execute(manifest, true)?;
    let snap_dir = root.join(&out.snapshots);
    if snap_dir.exists() {
        for entry in fs::read_dir(&snap_dir).map_err(|e| Error::io(&snap_dir, e))? {
            let p = entry.map_err(|e| Error::io(&snap_dir, e))?.path();
            if p.extension().is_some_and(|x| x == "csv") {
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    fs::create_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
    let theta = manifest.config.theta.value();
    for (i, (t, u)) in ex.trajectory.times.iter().zip(&ex.trajectory.states).enumerate() {
        let p = snap_dir.join(snapshot_name(i));
        write_snapshot(&p, u, *t, theta)?;
        artifacts.push(p);
    }
    let diag = out.file(&out.diagnostics);
    write_text(&diag, &format_diagnostics(&ex.trajectory.diagnostics))?;
    artifacts.push(diag);
    if let Some(tr) = &ex.riccati {
        let p = out.file(&out.riccati);
        write_text(&p, &format_riccati(tr))?;
        artifacts.push(p);
    }
    if !ex.paths.is_empty() {
        let p = out.file(&out.paths);
        write_text(&p, &format_paths(&ex.paths))?;
        artifacts.push(p);
    }
    let report = out.file(&out.report);
    write_text(&report, &serde_json::to_string_pretty(&ex.report)?)?;
    artifacts.push(report);
    Ok(RunOutcome {
        status: ex.report.status,
        trajectory: ex.trajectory,
        report: ex.report,
        artifacts,
    })
}

/// Re-read a run directory written by [`run`]: its manifest and recorded states.
pub fn load_run(dir: &Path) -> Result<(RunManifest, Trajectory)> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest = parse_config(&text)?;
    let snap_dir = dir.join(&manifest.outputs.snapshots);
    let mut files: Vec<PathBuf> = fs::read_dir(&snap_dir)
        .map_err(|e| Error::io(&snap_dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(&snap_dir, err)))
        .collect::<Result<Vec<_>>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "csv"));
    files.sort();
    if files.is_empty() {
        return Err(Error::Format {
            path: snap_dir,
            message: "no snapshots".into(),
        });
    }
    let theta = manifest.config.theta;
    let (mut times, mut states, mut diagnostics) = (Vec::new(), Vec::new(), Vec::new());
    for f in &files {
        let s = read_snapshot(f)?;
        if s.field.grid() != &manifest.grid {
            return Err(Error::GridMismatch);
        }
        if s.theta != theta.value() {
            return Err(Error::Format {
                path: f.clone(),
                message: format!("theta {} differs from the manifest's {}", s.theta, theta.value()),
            });
        }
        diagnostics.push(record(s.time, &s.field, theta, None)?);
        times.push(s.time);
        states.push(s.field);
    }
    let report_path = dir.join(&manifest.outputs.report);
    let report: Option<RunReport> = match fs::read_to_string(&report_path) {
        Ok(t) => Some(serde_json::from_str(&t)?),
        Err(_) => None,
    };
    let peak = diagnostics.iter().map(|d| d.sup_ux).fold(0.0, f64::max);
    let traj = Trajectory {
        grid: manifest.grid,
        theta,
        times,
        states,
        diagnostics,
        terminal: report.as_ref().map_or(Terminal::Completed, |r| r.terminal.clone()),
        steps: report.as_ref().map_or(0, |r| r.steps),
        peak_slope: report.as_ref().map_or(peak, |r| r.peak_slope),
    };
    Ok((manifest, traj))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BTransformSummary {
    pub theta: f64,
    pub b: f64,
    pub c0: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub shift: f64,
    pub drift: f64,
    pub snapshots: usize,
    /// Largest b-equation residual; needs at least five snapshots.
    pub residual: Option<f64>,
}

/// Map a persisted run into the b-equation frame; writes `b-transform/` inside `dir`.
pub fn transform_run(dir: &Path, c0: f64, gamma: f64, alpha: f64) -> Result<BTransformSummary> {
    let (manifest, traj) = load_run(dir)?;
    let params = BTransformParams::new(manifest.config.theta.value(), c0, gamma, alpha)?;
    let bt = transform_to_b(&traj, params)?;
    let out = dir.join("b-transform");
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    for (i, (tau, w)) in bt.taus.iter().zip(&bt.states).enumerate() {
        write_snapshot(&out.join(snapshot_name(i)), w, *tau, params.theta)?;
    }
    let summary = BTransformSummary {
        theta: params.theta,
        b: params.b(),
        c0,
        gamma,
        alpha,
        shift: params.shift(),
        drift: params.drift(),
        snapshots: bt.states.len(),
        residual: if bt.states.len() >= 5 { Some(b_residual(&bt)?) } else { None },
    };
    write_text(&out.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepOutcome {
    Completed,
    BlowupBelow,
    BlowupAbove,
    Error,
}

impl SweepOutcome {
    pub fn tag(self) -> &'static str {
        match self {
            SweepOutcome::Completed => "completed",
            SweepOutcome::BlowupBelow => "blowup-below",
            SweepOutcome::BlowupAbove => "blowup-above",
            SweepOutcome::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub outcome: SweepOutcome,
    pub t_detect: Option<f64>,
    /// Breaking-time bound in run time, where a theorem supplies one.
    pub t_star: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub peak_slope: Option<f64>,
    pub detail: String,
}

fn sweep_row(manifest: &RunManifest) -> SweepRow {
    let theta = manifest.config.theta.value();
    match execute(manifest, false) {
        Ok(ex) => {
            let b = ex.trajectory.blowup();
            let outcome = match b {
                None => SweepOutcome::Completed,
                Some(r) if r.cause == BlowupCause::NonFinite => SweepOutcome::Error,
                Some(r) if r.direction == Direction::Below => SweepOutcome::BlowupBelow,
                Some(_) => SweepOutcome::BlowupAbove,
            };
            let detail = match b {
                Some(r) if r.cause == BlowupCause::NonFinite => "non-finite state".to_string(),
                Some(r) if r.cause == BlowupCause::DtUnderflow => "step size underflow".to_string(),
                _ => String::new(),
            };
            SweepRow {
                theta,
                outcome,
                t_detect: b.map(|r| r.t_detect),
                t_star: ex.report.t_star_run,
                bound_satisfied: b.and_then(|r| r.bound_satisfied()),
                peak_slope: Some(ex.trajectory.peak_slope),
                detail,
            }
        }
        Err(e) => SweepRow {
            theta,
            outcome: SweepOutcome::Error,
            t_detect: None,
            t_star: None,
            bound_satisfied: None,
            peak_slope: None,
            detail: e.to_string(),
        },
    }
}

/// One row per theta, in increasing theta; each run is single-threaded and
/// rows do not depend on the worker count.
pub fn sweep_rows(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.theta_values.is_empty() {
        return Err(Error::Config {
            path: "theta_values".into(),
            message: "must not be empty".into(),
        });
    }
    let mut thetas = spec.theta_values.clone();
    thetas.sort_by(|a, b| a.value().total_cmp(&b.value()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    Ok(pool.install(|| thetas.par_iter().map(|&t| sweep_row(&spec.base.with_theta(t))).collect()))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn format_sweep(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_f64(r.theta),
            r.outcome.tag(),
            opt(r.t_detect),
            opt(r.t_star),
            r.bound_satisfied.map(|b| b.to_string()).unwrap_or_default(),
            opt(r.peak_slope),
            r.detail.replace([',', '\n'], ";")
        );
    }
    s
}

/// Run the sweep and write its table; returns the rows and the table path.
pub fn sweep(spec: &SweepSpec) -> Result<(Vec<SweepRow>, PathBuf)> {
    let rows = sweep_rows(spec)?;
    let out = &spec.base.outputs;
    let path = out.file(&out.sweep);
    write_text(&path, &format_sweep(&rows))?;
    Ok((rows, path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// `space` or `time`.
    pub kind: String,
    pub n: usize,
    pub dt: f64,
    pub error: f64,
    /// Error of the previous row over this one.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Richardson estimate from steps `dt`, `dt/2`, `dt/4`.
    pub temporal_order: f64,
}

fn solve_at(manifest: &RunManifest, n: usize, dt: f64) -> Result<Field> {
    let g = crate::spectral::Grid::new(n, manifest.grid.length(), manifest.grid.origin())?;
    let u0 = manifest.scenario.build(g)?.u0;
    integrate_fixed(&u0, manifest.config.theta, dt, manifest.config.t_end)
}

/// Spatial errors at `n, 2n, 4n` against `8n` with a fixed step `dt_max`, and
/// temporal differences for steps `dt_max`, `dt_max/2`, `dt_max/4` at `n`.
pub fn convergence_study(manifest: &RunManifest) -> Result<ConvergenceReport> {
    let n = manifest.grid.n();
    let dt = manifest.config.dt_max;
    let levels = [n, 2 * n, 4 * n, 8 * n];
    let sols = levels
        .par_iter()
        .map(|&k| solve_at(manifest, k, dt))
        .collect::<Result<Vec<_>>>()?;
    let reference = &sols[3];
    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    for (k, sol) in levels[..3].iter().zip(&sols) {
        let stride = reference.grid().n() / k;
        let error = sol
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - reference.values()[i * stride]).abs())
            .fold(0.0, f64::max);
        rows.push(ConvergenceRow {
            kind: "space".into(),
            n: *k,
            dt,
            error,
            ratio: prev.map(|p| p / error),
        });
        prev = Some(error);
    }
    let steps = [dt, dt / 2.0, dt / 4.0];
    let timed = steps
        .par_iter()
        .map(|&h| solve_at(manifest, n, h))
        .collect::<Result<Vec<_>>>()?;
    let d1 = timed[0].max_diff(&timed[1])?;
    let d2 = timed[1].max_diff(&timed[2])?;
    rows.push(ConvergenceRow {
        kind: "time".into(),
        n,
        dt: steps[0],
        error: d1,
        ratio: None,
    });
    rows.push(ConvergenceRow {
        kind: "time".into(),
        n,
        dt: steps[1],
        error: d2,
        ratio: Some(d1 / d2),
    });
    Ok(ConvergenceReport {
        rows,
        temporal_order: (d1 / d2).log2(),
    })
}

pub fn format_convergence(report: &ConvergenceReport) -> String {
    let mut s = String::from(CONVERGENCE_HEADER);
    s.push('\n');
    for r in &report.rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.kind, r.n, fmt_f64(r.dt), fmt_f64(r.error), opt(r.ratio));
    }
    s
}

/// Run the study and write its table.
pub fn convergence(manifest: &RunManifest) -> Result<(ConvergenceReport, PathBuf)> {
    let report = convergence_study(manifest)?;
    let out = &manifest.outputs;
    let path = out.file(&out.convergence);
    write_text(&path, &format_convergence(&report))?;
    Ok((report, path))
}
