//! `run`, `validate` and `sweep`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nudgeflow_core::driver::{
    observe, run_assimilated_streaming, run_reference_streaming, sort_rows, sweep_row, InitialGuess, MetricSample,
    RunOutput, RunReport, Setup, SweepRow, Truth,
};
use nudgeflow_core::observation::{interpolation_constant, SparseGrid};
use nudgeflow_core::scenarios::Scenario;
use nudgeflow_core::NodalField;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::io::{snapshot_raster, write_raster_file, write_stream, write_sweep, MetricsWriter};

/// Outcome of one simulation inside a command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStatus {
    pub label: String,
    pub dir: PathBuf,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub runs: Vec<RunStatus>,
}

impl RunSummary {
    pub fn all_completed(&self) -> bool {
        self.runs.iter().all(|r| r.error.is_none())
    }
}

/// Directory name of the run with relaxation `mu`.
pub fn mu_dir_name(mu: f64) -> String {
    format!("mu_{mu}")
}

/// Snapshot file name for time `t`.
pub fn snapshot_name(t: f64) -> String {
    format!("theta_t{t}.raster")
}

fn sink_error(e: impl std::fmt::Display) -> nudgeflow_core::Error {
    nudgeflow_core::Error::Input(e.to_string())
}

/// Streams metrics to `dir/metrics.csv` and writes a snapshot at the first
/// level reaching each requested time.
fn logged_run(
    dir: &Path,
    setup: &Setup,
    snapshots: &[f64],
    run: impl FnOnce(&mut dyn FnMut(&MetricSample, &NodalField) -> nudgeflow_core::Result<()>) -> nudgeflow_core::Result<RunOutput>,
) -> Result<RunOutput> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut metrics = MetricsWriter::create(&dir.join("metrics.csv"))?;
    let mut pending: Vec<f64> = snapshots.to_vec();
    pending.sort_by(f64::total_cmp);
    pending.dedup();
    let mut next = 0;
    let out = run(&mut |s, theta| {
        metrics.push(s).map_err(sink_error)?;
        let tol = 1e-9 * s.t.abs().max(1.0);
        while next < pending.len() && pending[next] <= s.t + tol {
            let raster = snapshot_raster(&setup.mesh, theta).map_err(sink_error)?;
            write_raster_file(&dir.join(snapshot_name(pending[next])), &raster).map_err(sink_error)?;
            next += 1;
        }
        Ok(())
    })?;
    Ok(out)
}

/// Plain-text summary of a finished or failed run.
pub fn report_text(scenario: &Scenario, mu: f64, hbar: Option<f64>, outcome: &Result<RunReport>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {}", scenario.name);
    let _ = writeln!(s, "mesh {}x{}", scenario.nx, scenario.ny);
    let _ = writeln!(s, "mu {mu}");
    if let Some(h) = hbar {
        let _ = writeln!(s, "hbar {h}");
    }
    let report = match outcome {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(s, "status failed: {e:#}");
            return s;
        }
    };
    let _ = writeln!(s, "status completed");
    let _ = writeln!(s, "levels {}", report.samples.len());
    if let Some(p) = report.plateau() {
        let _ = writeln!(s, "plateau_R_percent {p}");
    }
    if let Some(p) = report.interp_plateau() {
        let _ = writeln!(s, "interp_plateau_percent {p}");
    }
    match report.decay_fit() {
        Ok(f) => {
            let _ = writeln!(s, "decay_rate {} r2 {} window {} {}", f.rate, f.r2, f.window.0, f.window.1);
        }
        Err(_) if report.r_series().is_empty() => {}
        Err(e) => {
            let _ = writeln!(s, "decay_rate unavailable: {e}");
        }
    }
    let (lo, hi) = report.range();
    let _ = writeln!(s, "range {lo} {hi}");
    let _ = writeln!(s, "max_mass_residual {:e}", report.max_mass_residual());
    if !report.flux.is_empty() {
        let _ = writeln!(s, "max_flux_residual {:e}", report.max_flux_residual());
    }
    let _ = writeln!(s, "pressure_iterations {}", report.pressure_iterations);
    let _ = writeln!(
        s,
        "transport_iterations {} (max per step {})",
        report.transport_iterations, report.max_transport_iterations
    );
    s
}

fn write_report(dir: &Path, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), text).with_context(|| format!("writing report in {}", dir.display()))
}

fn status(label: String, dir: PathBuf, outcome: &Result<RunReport>) -> RunStatus {
    RunStatus {
        label,
        dir,
        error: outcome.as_ref().err().map(|e| format!("{e:#}")),
    }
}

/// Reference run, then one nudged run per relaxation parameter in parallel.
/// Returns an error only when nothing could be attempted.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let scenario = cfg.build_scenario()?;
    let out = cfg.resolved_output();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let base = Setup::new(&scenario, None)?;
    let mut summary = RunSummary::default();

    let ref_dir = out.join("reference");
    let theta0 = base.initial_state(&scenario, InitialGuess::Exact)?;
    let reference = logged_run(&ref_dir, &base, &cfg.snapshots, |sink| {
        run_reference_streaming(&scenario, &base, theta0, &cfg.driver, sink)
    });
    let ref_report = reference.as_ref().map(|o| o.report.clone()).map_err(|e| anyhow::anyhow!("{e:#}"));
    write_report(&ref_dir, &report_text(&scenario, 0.0, None, &ref_report))?;
    summary.runs.push(status("reference".into(), ref_dir, &ref_report));

    let mus = cfg.mu_list(&scenario);
    let truth = match (&scenario.exact, &reference) {
        (Some(f), _) => Truth::Analytic(f.as_ref()),
        (None, Ok(r)) => Truth::Reference(&r.trajectory),
        (None, Err(e)) => {
            let why = format!("no reference trajectory to observe: {e:#}");
            for &mu in &mus {
                let dir = out.join(mu_dir_name(mu));
                let failed = Err(anyhow::anyhow!("{why}"));
                write_report(&dir, &report_text(&scenario, mu, Some(scenario.hbar), &failed))?;
                summary.runs.push(status(mu_dir_name(mu), dir, &failed));
            }
            return Ok(summary);
        }
    };
    let setup = Setup::with_hbar(&scenario, scenario.hbar, cfg.functional)?;
    let obs = observe(&scenario, &setup, truth)?;
    write_stream(File::create(out.join("stream.csv"))?, &obs)?;

    let results: Vec<Result<RunStatus>> = mus
        .par_iter()
        .map(|&mu| {
            let dir = out.join(mu_dir_name(mu));
            let outcome = logged_run(&dir, &setup, &cfg.snapshots, |sink| {
                run_assimilated_streaming(&scenario, &setup, mu, scenario.initial_guess, &obs, Some(truth), &cfg.driver, sink)
            })
            .map(|o| o.report);
            write_report(&dir, &report_text(&scenario, mu, Some(scenario.hbar), &outcome))?;
            Ok(status(mu_dir_name(mu), dir, &outcome))
        })
        .collect();
    for r in results {
        summary.runs.push(r?);
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckLevel {
    Pass,
    Warn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub level: CheckLevel,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.level {
            CheckLevel::Pass => "pass",
            CheckLevel::Warn => "warn",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        level: if ok { CheckLevel::Pass } else { CheckLevel::Warn },
        detail: detail.into(),
    }
}

/// Static checks of a configuration: model assumptions, lattice alignment
/// and the stability proxy `μ c₀² ħ² < D_*`.
pub fn validate(cfg: &RunConfig) -> Result<Vec<Check>> {
    let scenario = cfg.build_scenario()?;
    let mesh = scenario.mesh()?;
    let a = scenario.check_assumptions(32);
    let mut out: Vec<Check> = a
        .flags()
        .iter()
        .map(|&(name, ok)| check(name, ok, if ok { "holds on the sampled lattice" } else { "violated on the sampled lattice" }))
        .collect();

    let mut hbars = vec![scenario.hbar];
    if let Some(s) = &cfg.sweep {
        hbars.extend(&s.hbars);
    }
    hbars.sort_by(f64::total_cmp);
    hbars.dedup();
    let mus: Vec<f64> = cfg
        .mu_list(&scenario)
        .into_iter()
        .chain(cfg.sweep.iter().flat_map(|s| s.mus.iter().copied()))
        .collect();
    let mu_max = mus.iter().copied().fold(0.0, f64::max);
    for &h in &hbars {
        match SparseGrid::new(&mesh, h, cfg.functional) {
            Ok(g) => {
                let (sx, sy) = g.stride();
                out.push(check(format!("lattice hbar={h}"), true, format!("{} points, stride {sx}x{sy}", g.len())));
                match interpolation_constant(&mesh, cfg.functional, &[h]) {
                    Ok(c0) => {
                        let lhs = mu_max * c0 * c0 * h * h;
                        out.push(check(
                            format!("stability hbar={h}"),
                            lhs < a.d_min,
                            format!("mu c0^2 hbar^2 = {lhs:e} vs D_min = {:e} (c0 {c0:.4}, mu {mu_max})", a.d_min),
                        ));
                    }
                    Err(e) => out.push(check(format!("stability hbar={h}"), false, e.to_string())),
                }
            }
            Err(e) => out.push(check(format!("lattice hbar={h}"), false, e.to_string())),
        }
    }
    Ok(out)
}

/// Every `(μ, ħ)` pair, rows run in parallel and written sorted by `(ħ, μ)`
/// to `sweep.csv`. Failed rows carry their error.
pub fn sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let sweep = cfg.sweep.as_ref().context("config has no [sweep] section")?;
    let scenario = cfg.build_scenario()?;
    let out = cfg.resolved_output();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let base = Setup::new(&scenario, None)?;
    let reference = match scenario.exact {
        Some(_) => None,
        None => {
            let theta0 = base.initial_state(&scenario, InitialGuess::Exact)?;
            let dir = out.join("reference");
            Some(logged_run(&dir, &base, &[], |sink| run_reference_streaming(&scenario, &base, theta0, &cfg.driver, sink))?.trajectory)
        }
    };
    let truth = match (&scenario.exact, &reference) {
        (Some(f), _) => Truth::Analytic(f.as_ref()),
        (None, Some(r)) => Truth::Reference(r),
        (None, None) => unreachable!("reference computed above"),
    };
    let setups: Vec<_> = sweep
        .hbars
        .iter()
        .map(|&h| {
            Setup::with_hbar(&scenario, h, cfg.functional)
                .and_then(|s| observe(&scenario, &s, truth).map(|o| (s, o)))
                .map_err(|e| e.to_string())
        })
        .collect();
    let jobs: Vec<(usize, f64)> = (0..setups.len())
        .flat_map(|k| sweep.mus.iter().map(move |&mu| (k, mu)))
        .collect();
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(k, mu)| {
            let hbar = sweep.hbars[k];
            match &setups[k] {
                Ok((setup, obs)) => sweep_row(&scenario, setup, mu, hbar, obs, truth, &cfg.driver),
                Err(e) => SweepRow {
                    mu,
                    hbar,
                    plateau: None,
                    interp_plateau: None,
                    rate: None,
                    error: Some(e.clone()),
                },
            }
        })
        .collect();
    sort_rows(&mut rows);
    write_sweep(File::create(out.join("sweep.csv"))?, &rows)?;
    Ok(rows)
}
