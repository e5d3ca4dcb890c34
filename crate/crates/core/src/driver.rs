//! Coarse/fine time marching, twin experiments and their metrics.
//!
//! Each coarse interval `(t_{n−1}, t_n]` freezes the mobility at
//! `θ̂(t_{n−1})`, refreshes the velocity (pressure solve plus conservative
//! flux, or the prescribed law) and then takes `m` transport steps.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fields::{l2_distance, l2_distance_fn, l2_norm, l2_norm_fn, NodalField};
use crate::flux::{max_residual, postprocess_flux, raw_fem_residuals};
use crate::linalg::{SolverConfig, SparseMatrix};
use crate::math::{linear_fit, ln, round};
use crate::mesh::{Point, StructuredMesh};
use crate::observation::{FunctionalKind, ObservationStream, SparseGrid};
use crate::pressure::{solve_pressure, PressureProblem};
use crate::scenarios::{Flow, Scenario};
use crate::transport::{
    prescribed_face_velocities, FaceVelocities, StepInputs, Transport, TransportCoefficients, TransportStep,
};

/// Uniform coarse levels `t_n = t_0 + nΔT` with `m` equal fine substeps each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePartition {
    start: f64,
    coarse_dt: f64,
    n_coarse: usize,
    fine_per_coarse: usize,
}

impl TimePartition {
    pub fn uniform(start: f64, coarse_dt: f64, n_coarse: usize, fine_per_coarse: usize) -> Result<Self> {
        if !(coarse_dt > 0.0 && coarse_dt.is_finite() && start.is_finite()) || n_coarse == 0 || fine_per_coarse == 0 {
            return Err(Error::invalid(format!(
                "bad partition start={start} dt={coarse_dt} M={n_coarse} m={fine_per_coarse}"
            )));
        }
        Ok(Self {
            start,
            coarse_dt,
            n_coarse,
            fine_per_coarse,
        })
    }

    /// Partition covering `[start, end]` with the given coarse and fine steps,
    /// which must divide evenly.
    pub fn from_steps(start: f64, end: f64, coarse_dt: f64, fine_dt: f64) -> Result<Self> {
        let n = (end - start) / coarse_dt;
        let m = coarse_dt / fine_dt;
        let (nr, mr) = (round(n), round(m));
        if !(nr >= 1.0 && mr >= 1.0) || (n - nr).abs() > 1e-9 * nr || (m - mr).abs() > 1e-9 * mr {
            return Err(Error::Configuration(format!(
                "steps {coarse_dt}/{fine_dt} do not divide [{start}, {end}]"
            )));
        }
        Self::uniform(start, coarse_dt, nr as usize, mr as usize)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.coarse_time(self.n_coarse)
    }

    pub fn n_coarse(&self) -> usize {
        self.n_coarse
    }

    pub fn fine_per_coarse(&self) -> usize {
        self.fine_per_coarse
    }

    pub fn coarse_dt(&self) -> f64 {
        self.coarse_dt
    }

    pub fn fine_dt(&self) -> f64 {
        self.coarse_dt / self.fine_per_coarse as f64
    }

    pub fn coarse_time(&self, n: usize) -> f64 {
        self.start + n as f64 * self.coarse_dt
    }

    /// `s_{j,n}`, with `s_{0,n} = t_{n−1}` and `s_{m,n} = t_n` exactly.
    pub fn fine_time(&self, n: usize, j: usize) -> f64 {
        if j == self.fine_per_coarse {
            return self.coarse_time(n);
        }
        self.coarse_time(n - 1) + j as f64 * self.fine_dt()
    }

    pub fn coarse_levels(&self) -> Vec<f64> {
        (0..=self.n_coarse).map(|n| self.coarse_time(n)).collect()
    }

    /// All fine levels in order, starting with `t_0`.
    pub fn fine_levels(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_coarse * self.fine_per_coarse + 1);
        v.push(self.start);
        for n in 1..=self.n_coarse {
            for j in 1..=self.fine_per_coarse {
                v.push(self.fine_time(n, j));
            }
        }
        v
    }

    pub fn truncated(&self, n_coarse: usize) -> Result<Self> {
        Self::uniform(self.start, self.coarse_dt, n_coarse, self.fine_per_coarse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VelocityUpdate {
    /// Computed from the initial state only.
    Once,
    /// Recomputed at the start of every coarse interval.
    #[default]
    EveryCoarseStep,
}

/// Initial state of the assimilated run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialGuess {
    #[default]
    Zero,
    /// `P_ħ(θ₀)`.
    Interpolated,
    /// Nodal interpolant of the true `θ₀`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverConfig {
    pub pressure: SolverConfig,
    pub transport: SolverConfig,
    pub functional: FunctionalKind,
    /// Record the per-step mass audit.
    pub audit_mass: bool,
    /// Also record the flux residual of the raw finite element pressure.
    pub raw_flux_check: bool,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            pressure: SolverConfig {
                rel_tol: 1e-8,
                ..SolverConfig::default()
            },
            transport: SolverConfig {
                rel_tol: 1e-12,
                ..SolverConfig::bicgstab()
            },
            functional: FunctionalKind::PointValue,
            audit_mass: true,
            raw_flux_check: false,
        }
    }
}

/// States at every fine level, `t_0` first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<NodalField>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&NodalField> {
        self.states.last()
    }

    /// State stored at time `t` (matched to 1e-9 of the span).
    pub fn at(&self, t: f64) -> Option<&NodalField> {
        let span = self.times.last().zip(self.times.first()).map_or(1.0, |(b, a)| (b - a).abs().max(1e-300));
        let i = self.times.partition_point(|&s| s < t - 1e-9 * span);
        (i < self.times.len() && (self.times[i] - t).abs() <= 1e-9 * span).then(|| &self.states[i])
    }
}

/// What the assimilated run is measured against.
#[derive(Clone, Copy)]
pub enum Truth<'a> {
    Analytic(&'a (dyn Fn(Point, f64) -> f64 + Send + Sync)),
    Reference(&'a Trajectory),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub t: f64,
    /// Whether `t` is a coarse level.
    pub coarse: bool,
    /// `R(θ̂;t)` in percent.
    pub r: Option<f64>,
    /// `R̃(θ̂;t)`: against the reconstructed measurements, in percent.
    pub r_tilde: Option<f64>,
    /// `R(P_ħθ;t)`: interpolation error of the measurements (coarse levels).
    pub r_interp: Option<f64>,
    /// Relative mass-balance residual of the step ending at `t`.
    pub mass_residual: Option<f64>,
    pub range_min: f64,
    pub range_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxRecord {
    pub t: f64,
    /// Largest control-volume residual of the postprocessed flux.
    pub max_residual: f64,
    /// Same for the raw finite element flux, when requested.
    pub raw_residual: Option<f64>,
    /// `max(1, ‖g‖_∞)` over the control-volume source integrals' points.
    pub source_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub mu: f64,
    pub hbar: Option<f64>,
    pub samples: Vec<MetricSample>,
    pub flux: Vec<FluxRecord>,
    pub pressure_iterations: usize,
    pub transport_iterations: usize,
    pub max_transport_iterations: usize,
}

impl RunReport {
    pub fn coarse_samples(&self) -> impl Iterator<Item = &MetricSample> {
        self.samples.iter().filter(|s| s.coarse)
    }

    /// `(t, R)` pairs, fine levels included.
    pub fn r_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().filter_map(|s| s.r.map(|r| (s.t, r))).collect()
    }

    pub fn r_coarse_series(&self) -> Vec<(f64, f64)> {
        self.coarse_samples().filter_map(|s| s.r.map(|r| (s.t, r))).collect()
    }

    pub fn max_mass_residual(&self) -> f64 {
        self.samples.iter().filter_map(|s| s.mass_residual).fold(0.0, f64::max)
    }

    pub fn max_flux_residual(&self) -> f64 {
        self.flux.iter().map(|f| f.max_residual).fold(0.0, f64::max)
    }

    /// Smallest and largest nodal value over the run.
    pub fn range(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.range_min), hi.max(s.range_max)))
    }

    /// Mean `R` over the last quarter of the samples.
    pub fn plateau(&self) -> Option<f64> {
        plateau(&self.r_series(), 0.25)
    }

    /// Mean interpolation error `R(P_ħθ)` over the last quarter of the coarse levels.
    pub fn interp_plateau(&self) -> Option<f64> {
        let s: Vec<(f64, f64)> = self.coarse_samples().filter_map(|s| s.r_interp.map(|r| (s.t, r))).collect();
        plateau(&s, 0.25)
    }

    /// Decay rate fitted to the coarse-level `R` before it flattens, or to
    /// every level when the coarse series flattens too soon to fit.
    pub fn decay_fit(&self) -> Result<DecayFit> {
        match fit_pre_plateau(&self.r_coarse_series()) {
            Err(Error::DegenerateWindow(_)) => fit_pre_plateau(&self.r_series()),
            other => other,
        }
    }

    /// Mean `R` over the coarse levels in the last quarter.
    pub fn coarse_plateau(&self) -> Option<f64> {
        plateau(&self.r_coarse_series(), 0.25)
    }
}

/// Mean of the last `fraction` of the values (at least one).
pub fn plateau(samples: &[(f64, f64)], fraction: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let k = ((samples.len() as f64 * fraction) as usize).max(1);
    let tail = &samples[samples.len() - k..];
    Some(tail.iter().map(|s| s.1).sum::<f64>() / k as f64)
}

/// Least-squares fit of `ln R = a + ξ t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

pub fn fit_decay_rate(samples: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if pts.len() < 3 {
        return Err(Error::DegenerateWindow(format!(
            "{} samples in [{}, {}]",
            pts.len(),
            window.0,
            window.1
        )));
    }
    if let Some(&(t, r)) = pts.iter().find(|&&(_, r)| !(r > 0.0)) {
        return Err(Error::DegenerateWindow(format!("R = {r} at t = {t}")));
    }
    let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| ln(p.1)).collect();
    let (rate, intercept, r2) = linear_fit(&t, &y);
    Ok(DecayFit {
        rate,
        intercept,
        r2,
        window,
        samples: pts.len(),
    })
}

/// `[t_0, t]` where `t` is the first sample whose relative change from its
/// predecessor is below `tol` (5% by default); the whole span if none.
pub fn pre_plateau_window(samples: &[(f64, f64)], tol: f64) -> (f64, f64) {
    let Some(first) = samples.first() else {
        return (0.0, 0.0);
    };
    for w in samples.windows(2) {
        let (a, b) = (w[0].1, w[1].1);
        if (b - a).abs() <= tol * a.abs() {
            return (first.0, w[0].0);
        }
    }
    (first.0, samples[samples.len() - 1].0)
}

pub fn fit_pre_plateau(samples: &[(f64, f64)]) -> Result<DecayFit> {
    fit_decay_rate(samples, pre_plateau_window(samples, 0.05))
}

/// Coarse intervals (from the second on) where `R(t_n)` does not exceed `R`
/// at the preceding fine level `s_{m−1,n}`: `(holding, checked)`.
pub fn coarse_recovery(report: &RunReport, partition: &TimePartition) -> (usize, usize) {
    let m = partition.fine_per_coarse();
    if m < 2 {
        return (0, 0);
    }
    let mut ok = 0;
    let mut total = 0;
    for n in 2..=partition.n_coarse() {
        let end = n * m;
        let (Some(a), Some(b)) = (report.samples.get(end - 1), report.samples.get(end)) else {
            break;
        };
        if let (Some(before), Some(after)) = (a.r, b.r) {
            total += 1;
            if after <= before {
                ok += 1;
            }
        }
    }
    (ok, total)
}

/// Mesh, sparse grid and transport operator parts shared by the runs of a scenario.
pub struct Setup {
    pub mesh: StructuredMesh,
    pub grid: Option<SparseGrid>,
}

impl Setup {
    pub fn new(scenario: &Scenario, kind: Option<FunctionalKind>) -> Result<Self> {
        let mesh = scenario.mesh()?;
        let grid = match kind {
            Some(k) => Some(SparseGrid::new(&mesh, scenario.hbar, k)?),
            None => None,
        };
        Ok(Self { mesh, grid })
    }

    pub fn with_hbar(scenario: &Scenario, hbar: f64, kind: FunctionalKind) -> Result<Self> {
        let mesh = scenario.mesh()?;
        let grid = Some(SparseGrid::new(&mesh, hbar, kind)?);
        Ok(Self { mesh, grid })
    }

    pub fn grid(&self) -> Result<&SparseGrid> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::Configuration("no sparse grid configured".to_string()))
    }

    pub fn initial_state(&self, scenario: &Scenario, guess: InitialGuess) -> Result<NodalField> {
        let exact = NodalField::from_fn(&self.mesh, |p| (scenario.theta0)(p));
        match guess {
            InitialGuess::Zero => Ok(NodalField::zeros(&self.mesh)),
            InitialGuess::Exact => Ok(exact),
            InitialGuess::Interpolated => self.grid()?.apply_ph(&exact),
        }
    }
}

/// Velocity for the interval starting from `theta`, with its flux record.
pub fn interval_velocity(
    scenario: &Scenario,
    mesh: &StructuredMesh,
    theta: &NodalField,
    t: f64,
    cfg: &DriverConfig,
) -> Result<(FaceVelocities, Option<FluxRecord>, usize)> {
    match &scenario.flow {
        Flow::Prescribed(law) => {
            let v = prescribed_face_velocities(mesh, &|p| {
                let th = theta.eval(mesh, p).unwrap_or(0.0);
                law(p, th)
            });
            Ok((v, None, 0))
        }
        Flow::Darcy {
            mobility,
            source,
            pressure_boundary,
        } => {
            let problem = PressureProblem {
                mesh,
                mobility: &|p, th| mobility(p, th),
                source: &|p| source(p),
                boundary: &|p| pressure_boundary(p),
            };
            let (p, stats) = solve_pressure(&problem, theta, &cfg.pressure)?;
            let flux = postprocess_flux(&problem, &p, theta)?;
            let raw_residual = if cfg.raw_flux_check {
                Some(max_residual(&raw_fem_residuals(&problem, &p, theta)?))
            } else {
                None
            };
            let source_scale = mesh.vertices().map(|x| source(x).abs()).fold(1.0, f64::max);
            let record = FluxRecord {
                t,
                max_residual: flux.max_residual(),
                raw_residual,
                source_scale,
            };
            Ok((flux.face_velocities(mesh), Some(record), stats.iterations))
        }
    }
}

/// One marched level handed to the visitor.
pub struct Level<'a> {
    pub index: usize,
    pub t: f64,
    pub coarse: bool,
    pub theta: &'a NodalField,
    pub mass_residual: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarchStats {
    pub flux: Vec<FluxRecord>,
    pub pressure_iterations: usize,
    pub transport_iterations: usize,
    pub max_transport_iterations: usize,
}

/// Algorithm driver shared by reference and assimilated runs: `μ = 0` runs
/// never touch the grid or the observations.
pub fn march(
    scenario: &Scenario,
    setup: &Setup,
    mu: f64,
    theta0: NodalField,
    observations: Option<&ObservationStream>,
    cfg: &DriverConfig,
    visit: &mut dyn FnMut(Level<'_>) -> Result<()>,
) -> Result<MarchStats> {
    let mesh = &setup.mesh;
    theta0.check(mesh)?;
    let grid = if mu > 0.0 { Some(setup.grid()?) } else { None };
    let coeffs = TransportCoefficients {
        diffusion: &|p| (scenario.diffusion)(p),
        reaction: &|p| (scenario.reaction)(p),
        source: &|p, t| (scenario.forcing)(p, t),
        boundary: &|p, t| (scenario.theta_boundary)(p, t),
        mu,
        mass: scenario.mass,
    };
    let transport = Transport::new(mesh, coeffs, grid)?;
    let part = &scenario.partition;
    let mut stats = MarchStats::default();
    let mut theta = theta0;
    visit(Level {
        index: 0,
        t: part.start(),
        coarse: true,
        theta: &theta,
        mass_residual: None,
    })?;
    let mut velocity: Option<FaceVelocities> = None;
    let mut index = 0;
    for n in 1..=part.n_coarse() {
        let refresh = velocity.is_none() || scenario.velocity_update == VelocityUpdate::EveryCoarseStep;
        if refresh {
            let (v, rec, it) = interval_velocity(scenario, mesh, &theta, part.coarse_time(n - 1), cfg)?;
            stats.flux.extend(rec);
            stats.pressure_iterations += it;
            velocity = Some(v);
        }
        let op = transport.operator(velocity.as_deref().expect("set above"), part.fine_dt())?;
        let mut next_source = None;
        for j in 1..=part.fine_per_coarse() {
            let step = TransportStep::new(part.fine_time(n, j - 1), part.fine_time(n, j))?;
            let mut inputs = StepInputs {
                step,
                source_prev: Vec::new(),
                source_next: transport.source_integrals(step.s_next),
                gamma_prev: Vec::new(),
                gamma_next: Vec::new(),
            };
            inputs.source_prev = next_source.take().unwrap_or_else(|| transport.source_integrals(step.s_prev));
            if mu > 0.0 {
                let obs = observations.ok_or(Error::ObservationGap { time: step.s_prev })?;
                inputs.gamma_prev = obs.interpolate_in_time(step.s_prev)?;
                inputs.gamma_next = obs.interpolate_in_time(step.s_next)?;
            }
            let (next, st) = op.step(&theta, &inputs, &cfg.transport)?;
            stats.transport_iterations += st.iterations;
            stats.max_transport_iterations = stats.max_transport_iterations.max(st.iterations);
            let mass_residual = if cfg.audit_mass {
                Some(op.audit(&theta, &next, &inputs)?.relative())
            } else {
                None
            };
            next_source = Some(core::mem::take(&mut inputs.source_next));
            theta = next;
            index += 1;
            visit(Level {
                index,
                t: step.s_next,
                coarse: j == part.fine_per_coarse(),
                theta: &theta,
                mass_residual,
            })?;
        }
    }
    Ok(stats)
}

fn percent(dist: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        100.0 * dist / norm
    } else if dist == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Metrics of `theta` at time `t` against `truth`.
struct Metrics<'a> {
    mesh: &'a StructuredMesh,
    truth: Option<Truth<'a>>,
    grid: Option<&'a SparseGrid>,
    observations: Option<&'a ObservationStream>,
}

impl Metrics<'_> {
    fn sample(&self, level: &Level<'_>) -> Result<MetricSample> {
        let mesh = self.mesh;
        let (range_min, range_max) = level.theta.min_max();
        let mut s = MetricSample {
            t: level.t,
            coarse: level.coarse,
            r: None,
            r_tilde: None,
            r_interp: None,
            mass_residual: level.mass_residual,
            range_min,
            range_max,
        };
        let interp = match (self.grid, self.observations) {
            (Some(g), Some(obs)) => Some(g.reconstruct(&obs.interpolate_in_time(level.t)?)?),
            _ => None,
        };
        match self.truth {
            Some(Truth::Analytic(f)) => {
                let exact = |p: Point| f(p, level.t);
                let norm = l2_norm_fn(mesh, &exact);
                s.r = Some(percent(l2_distance_fn(mesh, level.theta, &exact), norm));
                if let Some(pi) = &interp {
                    s.r_tilde = Some(percent(l2_distance(mesh, level.theta, pi), norm));
                    if level.coarse {
                        s.r_interp = Some(percent(l2_distance_fn(mesh, pi, &exact), norm));
                    }
                }
            }
            Some(Truth::Reference(traj)) => {
                let reference = traj.at(level.t).ok_or(Error::ObservationGap { time: level.t })?;
                let norm = l2_norm(mesh, reference);
                s.r = Some(percent(l2_distance(mesh, level.theta, reference), norm));
                if let Some(pi) = &interp {
                    s.r_tilde = Some(percent(l2_distance(mesh, level.theta, pi), norm));
                    if level.coarse {
                        s.r_interp = Some(percent(l2_distance(mesh, pi, reference), norm));
                    }
                }
            }
            None => {}
        }
        Ok(s)
    }
}

/// Result of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub report: RunReport,
}

fn finish(mu: f64, hbar: Option<f64>, samples: Vec<MetricSample>, trajectory: Trajectory, stats: MarchStats) -> RunOutput {
    RunOutput {
        trajectory,
        report: RunReport {
            mu,
            hbar,
            samples,
            flux: stats.flux,
            pressure_iterations: stats.pressure_iterations,
            transport_iterations: stats.transport_iterations,
            max_transport_iterations: stats.max_transport_iterations,
        },
    }
}

/// Called with every metric sample and its state as the run advances.
pub type SampleSink<'s> = &'s mut dyn FnMut(&MetricSample, &NodalField) -> Result<()>;

#[allow(clippy::too_many_arguments)]
fn run_with(
    scenario: &Scenario,
    setup: &Setup,
    mu: f64,
    theta0: NodalField,
    observations: Option<&ObservationStream>,
    metrics: &Metrics<'_>,
    cfg: &DriverConfig,
    sink: SampleSink<'_>,
) -> Result<RunOutput> {
    let mut traj = Trajectory::default();
    let mut samples = Vec::new();
    let stats = march(scenario, setup, mu, theta0, observations, cfg, &mut |level| {
        let s = metrics.sample(&level)?;
        sink(&s, level.theta)?;
        samples.push(s);
        traj.times.push(level.t);
        traj.states.push(level.theta.clone());
        Ok(())
    })?;
    Ok(finish(mu, metrics.grid.map(|g| g.hbar()), samples, traj, stats))
}

/// Un-nudged run from `theta0`; metrics against the closed-form solution
/// when the scenario has one.
pub fn run_reference_from(scenario: &Scenario, setup: &Setup, theta0: NodalField, cfg: &DriverConfig) -> Result<RunOutput> {
    run_reference_streaming(scenario, setup, theta0, cfg, &mut |_, _| Ok(()))
}

/// [`run_reference_from`] feeding every sample to `sink` as it is produced.
pub fn run_reference_streaming(
    scenario: &Scenario,
    setup: &Setup,
    theta0: NodalField,
    cfg: &DriverConfig,
    sink: SampleSink<'_>,
) -> Result<RunOutput> {
    let metrics = Metrics {
        mesh: &setup.mesh,
        truth: scenario.exact.as_deref().map(Truth::Analytic),
        grid: None,
        observations: None,
    };
    run_with(scenario, setup, 0.0, theta0, None, &metrics, cfg, sink)
}

/// Reference run from the nodal interpolant of the true `θ₀`.
pub fn run_reference(scenario: &Scenario, setup: &Setup, cfg: &DriverConfig) -> Result<RunOutput> {
    let theta0 = setup.initial_state(scenario, InitialGuess::Exact)?;
    run_reference_from(scenario, setup, theta0, cfg)
}

/// Measurements of the truth at every coarse level.
pub fn observe(scenario: &Scenario, setup: &Setup, truth: Truth<'_>) -> Result<ObservationStream> {
    let grid = setup.grid()?;
    let mut stream = ObservationStream::new();
    for t in scenario.partition.coarse_levels() {
        let gamma = match truth {
            Truth::Analytic(f) => grid.sample_fn(&setup.mesh, &|p| f(p, t))?,
            Truth::Reference(traj) => grid.sample(traj.at(t).ok_or(Error::ObservationGap { time: t })?)?,
        };
        stream.push(t, gamma)?;
    }
    Ok(stream)
}

/// Nudged run fed by `observations` and scored against `truth`.
pub fn run_assimilated(
    scenario: &Scenario,
    setup: &Setup,
    mu: f64,
    guess: InitialGuess,
    observations: &ObservationStream,
    truth: Option<Truth<'_>>,
    cfg: &DriverConfig,
) -> Result<RunOutput> {
    run_assimilated_streaming(scenario, setup, mu, guess, observations, truth, cfg, &mut |_, _| Ok(()))
}

/// [`run_assimilated`] feeding every sample to `sink` as it is produced.
#[allow(clippy::too_many_arguments)]
pub fn run_assimilated_streaming(
    scenario: &Scenario,
    setup: &Setup,
    mu: f64,
    guess: InitialGuess,
    observations: &ObservationStream,
    truth: Option<Truth<'_>>,
    cfg: &DriverConfig,
    sink: SampleSink<'_>,
) -> Result<RunOutput> {
    let theta0 = setup.initial_state(scenario, guess)?;
    let grid = setup.grid.as_ref();
    let metrics = Metrics {
        mesh: &setup.mesh,
        truth,
        grid,
        observations: grid.map(|_| observations),
    };
    run_with(scenario, setup, mu, theta0, Some(observations), &metrics, cfg, sink)
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mu: f64,
    pub hbar: f64,
    pub plateau: Option<f64>,
    pub interp_plateau: Option<f64>,
    pub rate: Option<f64>,
    pub error: Option<String>,
}

/// Runs every `(μ, ħ)` pair sequentially against the closed-form solution or,
/// without one, a single reference run. Rows sorted by `(ħ, μ)`.
pub fn mu_sweep(scenario: &Scenario, mus: &[f64], hbars: &[f64], cfg: &DriverConfig) -> Result<Vec<SweepRow>> {
    let base = Setup::new(scenario, None)?;
    let reference = match scenario.exact {
        Some(_) => None,
        None => Some(run_reference(scenario, &base, cfg)?.trajectory),
    };
    let mut rows = Vec::new();
    for &hbar in hbars {
        let setup = match Setup::with_hbar(scenario, hbar, cfg.functional) {
            Ok(s) => s,
            Err(e) => {
                rows.extend(mus.iter().map(|&mu| failed_row(mu, hbar, &e)));
                continue;
            }
        };
        let truth = match (&scenario.exact, &reference) {
            (Some(f), _) => Truth::Analytic(f.as_ref()),
            (None, Some(r)) => Truth::Reference(r),
            (None, None) => unreachable!("reference computed above"),
        };
        let obs = observe(scenario, &setup, truth)?;
        for &mu in mus {
            rows.push(sweep_row(scenario, &setup, mu, hbar, &obs, truth, cfg));
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn sweep_row(
    scenario: &Scenario,
    setup: &Setup,
    mu: f64,
    hbar: f64,
    obs: &ObservationStream,
    truth: Truth<'_>,
    cfg: &DriverConfig,
) -> SweepRow {
    match run_assimilated(scenario, setup, mu, scenario.initial_guess, obs, Some(truth), cfg) {
        Ok(out) => SweepRow {
            mu,
            hbar,
            plateau: out.report.plateau(),
            interp_plateau: out.report.interp_plateau(),
            rate: out.report.decay_fit().ok().map(|f| f.rate),
            error: None,
        },
        Err(e) => failed_row(mu, hbar, &e),
    }
}

fn failed_row(mu: f64, hbar: f64, e: &Error) -> SweepRow {
    SweepRow {
        mu,
        hbar,
        plateau: None,
        interp_plateau: None,
        rate: None,
        error: Some(e.to_string()),
    }
}

pub fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| a.hbar.total_cmp(&b.hbar).then(a.mu.total_cmp(&b.mu)));
}

/// Explicit one-coarse-step matrices of a run, for cross-checking against an
/// independent assembly: pressure system, local flux, and the transport
/// system of the first fine step.
pub struct CoarseStepMatrices {
    pub pressure: (SparseMatrix, Vec<f64>),
    pub pressure_solution: NodalField,
    pub segment_flux: Vec<[f64; 4]>,
    pub transport: (SparseMatrix, Vec<f64>),
}

pub fn first_step_matrices(
    scenario: &Scenario,
    setup: &Setup,
    mu: f64,
    theta0: &NodalField,
    observations: Option<&ObservationStream>,
    cfg: &DriverConfig,
) -> Result<CoarseStepMatrices> {
    let mesh = &setup.mesh;
    let Flow::Darcy {
        mobility,
        source,
        pressure_boundary,
    } = &scenario.flow
    else {
        return Err(Error::Configuration("needs a Darcy flow scenario".to_string()));
    };
    let problem = PressureProblem {
        mesh,
        mobility: &|p, th| mobility(p, th),
        source: &|p| source(p),
        boundary: &|p| pressure_boundary(p),
    };
    let pressure = crate::pressure::assemble_pressure(&problem, theta0)?;
    let (p, _) = solve_pressure(&problem, theta0, &cfg.pressure)?;
    let flux = postprocess_flux(&problem, &p, theta0)?;
    let grid = if mu > 0.0 { Some(setup.grid()?) } else { None };
    let coeffs = TransportCoefficients {
        diffusion: &|p| (scenario.diffusion)(p),
        reaction: &|p| (scenario.reaction)(p),
        source: &|p, t| (scenario.forcing)(p, t),
        boundary: &|p, t| (scenario.theta_boundary)(p, t),
        mu,
        mass: scenario.mass,
    };
    let transport = Transport::new(mesh, coeffs, grid)?;
    let part = &scenario.partition;
    let op = transport.operator(&flux.face_velocities(mesh), part.fine_dt())?;
    let step = TransportStep::new(part.fine_time(1, 0), part.fine_time(1, 1))?;
    let inputs = StepInputs::gather(&transport, step, observations)?;
    Ok(CoarseStepMatrices {
        pressure,
        pressure_solution: p,
        segment_flux: flux.segment_flux,
        transport: op.assemble(theta0, &inputs)?,
    })
}
