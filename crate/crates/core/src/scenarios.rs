//! Problem definitions for the four validation examples, manufactured
//! forcing, raster inputs, wells and constitutive laws.
//!
//! Inputs that exist only as pictures (the Example 3 source, permeability and
//! initial plume, the Example 4 saltwater pockets) are replaced by seeded
//! stand-ins with the stated ranges.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::driver::{InitialGuess, TimePartition, VelocityUpdate};
use crate::error::{Error, Result};
use crate::math::{cos, exp, floor, ln, powi, sin, sqrt, PI};
use crate::mesh::{BoundarySpec, Point, StructuredMesh};
use crate::transport::MassKind;

pub type SpaceField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type SpaceTimeField = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
/// Mobility `κ(x, θ)`.
pub type Mobility = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
/// Velocity as a function of position and local concentration.
pub type VelocityLaw = Arc<dyn Fn(Point, f64) -> Point + Send + Sync>;

#[derive(Clone)]
pub enum Flow {
    /// Darcy velocity given in closed form from `θ̂`, no pressure solve.
    Prescribed(VelocityLaw),
    /// `v = −κ(θ̂)∇p` with `−∇·(κ∇p) = g` and `p` prescribed on `Γ_D`.
    Darcy {
        mobility: Mobility,
        source: SpaceField,
        pressure_boundary: SpaceField,
    },
}

/// Which structural assumptions of the model hold, from sampling the
/// coefficients on a lattice of points and times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assumptions {
    /// `0 ≤ θ ≤ 1` for the initial condition (and the exact solution where known).
    pub a1_initial_range: bool,
    /// `0 < D_* ≤ D ≤ D^*`.
    pub a2_diffusion: bool,
    /// `0 < κ_* ≤ κ ≤ κ^*`.
    pub a3_mobility: bool,
    pub a4_reaction: bool,
    pub a5_source_g: bool,
    pub a6_forcing: bool,
    /// `g + 2q ≥ 0` and `g + q ≥ f ≥ 0`.
    pub a7_sign: bool,
    pub d_min: f64,
    pub d_max: f64,
}

impl Assumptions {
    pub fn all(&self) -> bool {
        self.a1_initial_range
            && self.a2_diffusion
            && self.a3_mobility
            && self.a4_reaction
            && self.a5_source_g
            && self.a6_forcing
            && self.a7_sign
    }

    pub fn flags(&self) -> [(&'static str, bool); 7] {
        [
            ("A1", self.a1_initial_range),
            ("A2", self.a2_diffusion),
            ("A3", self.a3_mobility),
            ("A4", self.a4_reaction),
            ("A5", self.a5_source_g),
            ("A6", self.a6_forcing),
            ("A7", self.a7_sign),
        ]
    }
}

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub boundary: BoundarySpec,
    pub diffusion: SpaceField,
    /// `q`.
    pub reaction: SpaceField,
    /// `f`.
    pub forcing: SpaceTimeField,
    /// `θ` on `Γ_D`.
    pub theta_boundary: SpaceTimeField,
    pub flow: Flow,
    /// True initial condition.
    pub theta0: SpaceField,
    /// Closed-form solution when one is known.
    pub exact: Option<SpaceTimeField>,
    pub partition: TimePartition,
    pub velocity_update: VelocityUpdate,
    pub mu: f64,
    pub hbar: f64,
    pub initial_guess: InitialGuess,
    pub mass: MassKind,
}

impl Scenario {
    pub fn mesh(&self) -> Result<StructuredMesh> {
        StructuredMesh::new(self.nx, self.ny, self.lx, self.ly, self.boundary)
    }

    /// Same problem on an `n × n` mesh.
    pub fn with_resolution(mut self, nx: usize, ny: usize) -> Self {
        self.nx = nx;
        self.ny = ny;
        self
    }

    /// Keeps the first `n` coarse intervals.
    pub fn with_coarse_steps(mut self, n: usize) -> Result<Self> {
        self.partition = self.partition.truncated(n)?;
        Ok(self)
    }

    /// `g`, zero for a prescribed velocity.
    pub fn pressure_source(&self) -> SpaceField {
        match &self.flow {
            Flow::Darcy { source, .. } => source.clone(),
            Flow::Prescribed(_) => Arc::new(|_| 0.0),
        }
    }

    /// Samples the coefficients on a `n × n` lattice at the start, middle and
    /// end of the horizon.
    pub fn check_assumptions(&self, n: usize) -> Assumptions {
        let n = n.max(2);
        let t_end = self.partition.end();
        let times = [self.partition.start(), 0.5 * (self.partition.start() + t_end), t_end];
        let points: Vec<Point> = (0..=n)
            .flat_map(|j| {
                (0..=n).map(move |i| Point::new(self.lx * i as f64 / n as f64, self.ly * j as f64 / n as f64))
            })
            .collect();
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        let mut a1 = points.iter().all(|&p| in_unit((self.theta0)(p)));
        if let Some(exact) = &self.exact {
            a1 &= times.iter().all(|&t| points.iter().all(|&p| in_unit(exact(p, t))));
        }
        let (mut d_min, mut d_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &p in &points {
            let d = (self.diffusion)(p);
            d_min = d_min.min(d);
            d_max = d_max.max(d);
        }
        let a2 = d_min > 0.0 && d_max.is_finite();
        let a3 = match &self.flow {
            Flow::Prescribed(_) => true,
            Flow::Darcy { mobility, .. } => points.iter().all(|&p| {
                (0..=4).all(|k| {
                    let v = mobility(p, k as f64 / 4.0);
                    v > 0.0 && v.is_finite()
                })
            }),
        };
        let g = self.pressure_source();
        let a4 = points.iter().all(|&p| (self.reaction)(p).is_finite());
        let a5 = points.iter().all(|&p| g(p).is_finite());
        let a6 = times.iter().all(|&t| points.iter().all(|&p| (self.forcing)(p, t).is_finite()));
        let a7 = times.iter().all(|&t| {
            points.iter().all(|&p| {
                let (gv, qv, fv) = (g(p), (self.reaction)(p), (self.forcing)(p, t));
                gv + 2.0 * qv >= 0.0 && gv + qv >= fv && fv >= 0.0
            })
        });
        Assumptions {
            a1_initial_range: a1,
            a2_diffusion: a2,
            a3_mobility: a3,
            a4_reaction: a4,
            a5_source_g: a5,
            a6_forcing: a6,
            a7_sign: a7,
            d_min,
            d_max,
        }
    }
}

/// Closed-form concentration and velocity used to manufacture `f`.
#[derive(Clone)]
pub struct Manufactured {
    pub theta: SpaceTimeField,
    pub theta_t: SpaceTimeField,
    pub grad: Arc<dyn Fn(Point, f64) -> Point + Send + Sync>,
    pub laplacian: SpaceTimeField,
    /// `(v, ∇·v)`.
    pub velocity: Arc<dyn Fn(Point, f64) -> (Point, f64) + Send + Sync>,
}

/// `f = ∂_tθ − DΔθ + v·∇θ + θ∇·v + qθ` for constant `D` and `q`.
pub fn manufactured_forcing(m: &Manufactured, d: f64, q: f64) -> SpaceTimeField {
    let m = m.clone();
    Arc::new(move |p, t| {
        let th = (m.theta)(p, t);
        let (v, div) = (m.velocity)(p, t);
        (m.theta_t)(p, t) - d * (m.laplacian)(p, t) + v.dot((m.grad)(p, t)) + th * div + q * th
    })
}

/// `(x − x²)(y − y²)`, its gradient and Laplacian.
fn bubble(p: Point) -> (f64, Point, f64) {
    let (bx, by) = (p.x - p.x * p.x, p.y - p.y * p.y);
    let g = Point::new((1.0 - 2.0 * p.x) * by, bx * (1.0 - 2.0 * p.y));
    (bx * by, g, -2.0 * (bx + by))
}

/// `v(θ) = 1 / (1 + θ)`.
pub fn example1_speed(theta: f64) -> f64 {
    1.0 / (1.0 + theta)
}

pub fn example1_solution() -> Manufactured {
    Manufactured {
        theta: Arc::new(|p, t| bubble(p).0 * exp(-t)),
        theta_t: Arc::new(|p, t| -bubble(p).0 * exp(-t)),
        grad: Arc::new(|p, t| {
            let g = bubble(p).1;
            Point::new(g.x * exp(-t), g.y * exp(-t))
        }),
        laplacian: Arc::new(|p, t| bubble(p).2 * exp(-t)),
        velocity: Arc::new(|p, t| {
            let (b, g, _) = bubble(p);
            let th = b * exp(-t);
            let w = example1_speed(th);
            // ∂_x w + ∂_y w = −(θ_x + θ_y) / (1 + θ)²
            let div = -(g.x + g.y) * exp(-t) * w * w;
            (Point::new(w, w), div)
        }),
    }
}

pub fn example2_solution() -> Manufactured {
    Manufactured {
        theta: Arc::new(|p, t| (p.x - p.x * p.x) * exp(t)),
        theta_t: Arc::new(|p, t| (p.x - p.x * p.x) * exp(t)),
        grad: Arc::new(|p, t| Point::new((1.0 - 2.0 * p.x) * exp(t), 0.0)),
        laplacian: Arc::new(|_, t| -2.0 * exp(t)),
        velocity: Arc::new(|_, _| (Point::new(1.0, 0.0), 0.0)),
    }
}

/// Unit square, `Γ_D = ∂Ω`, `D = 1`, `q = 0`, velocity `(v(θ), v(θ))`,
/// `θ = (x − x²)(y − y²)e^{−t}`. Velocity refreshed every 10 fine steps of 0.002.
pub fn example1() -> Scenario {
    let m = example1_solution();
    let theta = m.theta.clone();
    Scenario {
        name: "example1".into(),
        nx: 100,
        ny: 100,
        lx: 1.0,
        ly: 1.0,
        boundary: BoundarySpec::all_dirichlet(),
        diffusion: Arc::new(|_| 1.0),
        reaction: Arc::new(|_| 0.0),
        forcing: manufactured_forcing(&m, 1.0, 0.0),
        theta_boundary: theta.clone(),
        flow: Flow::Prescribed(Arc::new(|_, th| {
            let w = example1_speed(th);
            Point::new(w, w)
        })),
        theta0: {
            let th = theta.clone();
            Arc::new(move |p| th(p, 0.0))
        },
        exact: Some(theta),
        partition: TimePartition::uniform(0.0, 0.02, 50, 10).expect("static partition"),
        velocity_update: VelocityUpdate::EveryCoarseStep,
        mu: 100.0,
        hbar: 0.1,
        initial_guess: InitialGuess::Zero,
        mass: MassKind::Consistent,
    }
}

/// Unit square, `Γ_D = {x = 0} ∪ {x = 1}`, `κ = D = 1`, `g = q = 0`,
/// `(p, θ) = (1 − x, (x − x²)eᵗ)`. One velocity solve, 50×50, `Δt = 0.02`.
pub fn example2() -> Scenario {
    let m = example2_solution();
    let theta = m.theta.clone();
    Scenario {
        name: "example2".into(),
        nx: 50,
        ny: 50,
        lx: 1.0,
        ly: 1.0,
        boundary: BoundarySpec::dirichlet_left_right(),
        diffusion: Arc::new(|_| 1.0),
        reaction: Arc::new(|_| 0.0),
        forcing: manufactured_forcing(&m, 1.0, 0.0),
        theta_boundary: theta.clone(),
        flow: Flow::Darcy {
            mobility: Arc::new(|_, _| 1.0),
            source: Arc::new(|_| 0.0),
            pressure_boundary: Arc::new(|p| 1.0 - p.x),
        },
        theta0: {
            let th = theta.clone();
            Arc::new(move |p| th(p, 0.0))
        },
        exact: Some(theta),
        partition: TimePartition::uniform(0.0, 0.02, 50, 1).expect("static partition"),
        velocity_update: VelocityUpdate::Once,
        mu: 10.0,
        hbar: 0.1,
        initial_guess: InitialGuess::Zero,
        mass: MassKind::Consistent,
    }
}

/// Gridded values at cell centres with bilinear lookup between centres and
/// constant extension to the domain edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    /// Row-major from the bottom row (`y` smallest).
    values: Vec<f64>,
}

pub type PermeabilityRaster = Raster;

impl Raster {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, values: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 || !(lx > 0.0 && ly > 0.0) {
            return Err(Error::Input(format!("bad raster header {nx} {ny} {lx} {ly}")));
        }
        if values.len() != nx * ny {
            return Err(Error::Input(format!("raster has {} values, expected {}", values.len(), nx * ny)));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Input(format!("raster value {v} is not finite")));
        }
        Ok(Self { nx, ny, lx, ly, values })
    }

    pub fn from_fn(nx: usize, ny: usize, lx: f64, ly: f64, f: impl Fn(Point) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(Point::new(
                    (i as f64 + 0.5) * lx / nx as f64,
                    (j as f64 + 0.5) * ly / ny as f64,
                )));
            }
        }
        Self::new(nx, ny, lx, ly, values)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.lx, self.ly)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        Point::new(
            (i as f64 + 0.5) * self.lx / self.nx as f64,
            (j as f64 + 0.5) * self.ly / self.ny as f64,
        )
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn require_positive(&self) -> Result<()> {
        match self.values.iter().find(|&&v| v <= 0.0) {
            Some(v) => Err(Error::Input(format!("raster value {v} is not positive"))),
            None => Ok(()),
        }
    }

    pub fn value_at(&self, p: Point) -> f64 {
        let axis = |x: f64, l: f64, n: usize| -> (usize, usize, f64) {
            let s = (x / l * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (floor(s) as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, s - i0 as f64)
        };
        let (i0, i1, tx) = axis(p.x, self.lx, self.nx);
        let (j0, j1, ty) = axis(p.y, self.ly, self.ny);
        let bottom = self.get(i0, j0) * (1.0 - tx) + self.get(i1, j0) * tx;
        let top = self.get(i0, j1) * (1.0 - tx) + self.get(i1, j1) * tx;
        bottom * (1.0 - ty) + top * ty
    }

    /// Log-linear map of a positive raster onto `[lo, hi]`.
    pub fn rescaled_log(&self, lo: f64, hi: f64) -> Result<Self> {
        self.require_positive()?;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::invalid(format!("bad target range [{lo}, {hi}]")));
        }
        let (a, b) = self.min_max();
        let (la, lb) = (ln(a), ln(b));
        let values = self
            .values
            .iter()
            .map(|&v| {
                let s = if lb > la { (ln(v) - la) / (lb - la) } else { 0.0 };
                exp(ln(lo) + s * (ln(hi) - ln(lo))).clamp(lo, hi)
            })
            .collect();
        Self::new(self.nx, self.ny, self.lx, self.ly, values)
    }

    /// Smooth random log-permeability: a sum of Fourier modes with random
    /// phases and amplitudes decaying with wave number, mapped onto
    /// `[exp(ln_lo), exp(ln_hi)]`.
    pub fn stand_in_permeability(n: usize, lx: f64, ly: f64, seed: u64, ln_lo: f64, ln_hi: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(f64, f64, f64, f64)> = (0..32)
            .map(|_| {
                let kx = rng.random_range(-6i32..=6) as f64;
                let ky = rng.random_range(0i32..=6) as f64;
                let amp = rng.random_range(0.5..1.0) / (1.0 + sqrt(kx * kx + ky * ky));
                let phase = rng.random_range(0.0..2.0 * PI);
                (kx, ky, amp, phase)
            })
            .collect();
        let raw = Self::from_fn(n, n, lx, ly, |p| {
            modes
                .iter()
                .map(|&(kx, ky, a, ph)| a * cos(2.0 * PI * (kx * p.x / lx + ky * p.y / ly) + ph))
                .sum::<f64>()
        })?;
        let (a, b) = raw.min_max();
        let values = raw
            .values
            .iter()
            .map(|&v| exp(ln_lo + (v - a) / (b - a) * (ln_hi - ln_lo)))
            .collect();
        Self::new(n, n, lx, ly, values)
    }
}

/// `(1 − r²/R²)²` inside the disc of radius `R`, zero outside.
pub fn bump(center: Point, radius: f64, p: Point) -> f64 {
    let (dx, dy) = (p.x - center.x, p.y - center.y);
    let s = (dx * dx + dy * dy) / (radius * radius);
    if s >= 1.0 {
        0.0
    } else {
        powi(1.0 - s, 2)
    }
}

/// Well modelled as a smooth bump with a peak rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Well {
    pub center: Point,
    pub radius: f64,
    pub peak: f64,
}

impl Well {
    pub fn rate(&self, p: Point) -> f64 {
        self.peak * bump(self.center, self.radius, p)
    }

    /// `∫ rate = peak · πR²/3`.
    pub fn total(&self) -> f64 {
        self.peak * PI * self.radius * self.radius / 3.0
    }
}

/// `κ(θ) = k (1 − θ + θ/16)⁻⁴`.
pub fn example3_mobility(k: f64, theta: f64) -> f64 {
    k / powi(1.0 - theta + theta / 16.0, 4)
}

/// Quarter-power mixing rule `ν(θ) = (θ μ_s^{-1/4} + (1 − θ) μ_w^{-1/4})⁻⁴`.
pub fn quarter_power_viscosity(theta: f64, mu_s: f64, mu_w: f64) -> f64 {
    let r = theta / sqrt(sqrt(mu_s)) + (1.0 - theta) / sqrt(sqrt(mu_w));
    1.0 / powi(r, 4)
}

/// Inputs of Example 3.
#[derive(Clone)]
pub struct Example3Data {
    pub permeability: Raster,
    pub source: SpaceField,
    pub initial: SpaceField,
}

impl Example3Data {
    pub fn from_rasters(permeability: Raster, source: Raster, initial: Raster) -> Result<Self> {
        permeability.require_positive()?;
        Ok(Self {
            permeability,
            source: Arc::new(move |p| source.value_at(p)),
            initial: Arc::new(move |p| initial.value_at(p).clamp(0.0, 1.0)),
        })
    }

    /// Seeded random permeability with `ln k ∈ [−2, 2]`, two injection wells
    /// and a two-lobed initial plume.
    pub fn stand_in(seed: u64, raster_n: usize) -> Result<Self> {
        let permeability = Raster::stand_in_permeability(raster_n, 1.0, 1.0, seed, -2.0, 2.0)?;
        let wells = [
            Well { center: Point::new(0.2, 0.25), radius: 0.08, peak: 400.0 },
            Well { center: Point::new(0.75, 0.8), radius: 0.08, peak: 250.0 },
        ];
        let lobes = [(Point::new(0.45, 0.5), 0.22, 1.0), (Point::new(0.68, 0.35), 0.15, 0.8)];
        Ok(Self {
            permeability,
            source: Arc::new(move |p| wells.iter().map(|w| w.rate(p)).sum()),
            initial: Arc::new(move |p| {
                lobes
                    .iter()
                    .map(|&(c, r, a)| a * bump(c, r, p))
                    .fold(0.0, f64::max)
            }),
        })
    }
}

/// Unit square, `Γ_D = ∂Ω`, `D = 0.01`, `q = f = 0`, `κ = k(x)(1 − θ + θ/16)⁻⁴`,
/// 240×240, fine step 0.0004, coarse step 0.002.
pub fn example3(data: Example3Data) -> Result<Scenario> {
    data.permeability.require_positive()?;
    let k = data.permeability;
    Ok(Scenario {
        name: "example3".into(),
        nx: 240,
        ny: 240,
        lx: 1.0,
        ly: 1.0,
        boundary: BoundarySpec::all_dirichlet(),
        diffusion: Arc::new(|_| 0.01),
        reaction: Arc::new(|_| 0.0),
        forcing: Arc::new(|_, _| 0.0),
        theta_boundary: Arc::new(|_, _| 0.0),
        flow: Flow::Darcy {
            mobility: Arc::new(move |p, th| example3_mobility(k.value_at(p), th)),
            source: data.source,
            pressure_boundary: Arc::new(|_| 0.0),
        },
        theta0: data.initial,
        exact: None,
        partition: TimePartition::uniform(0.0, 0.002, 15, 5)?,
        velocity_update: VelocityUpdate::EveryCoarseStep,
        mu: 1000.0,
        hbar: 1.0 / 30.0,
        initial_guess: InitialGuess::Interpolated,
        mass: MassKind::Consistent,
    })
}

pub const DAY: f64 = 86_400.0;
pub const HOUR: f64 = 3_600.0;

/// Well and fluid parameters of Example 4 (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example4Params {
    pub side: f64,
    pub injection: Well,
    pub discharge: Well,
    pub mu_saltwater: f64,
    pub mu_water: f64,
    pub diffusion: f64,
    pub tide_period: f64,
}

impl Default for Example4Params {
    fn default() -> Self {
        let side = 240.0;
        let radius = 0.05 * side;
        Self {
            side,
            injection: Well { center: Point::new(190.0, 190.0), radius, peak: 0.0005 },
            discharge: Well { center: Point::new(50.0, 50.0), radius, peak: 0.002 },
            mu_saltwater: 0.00108,
            mu_water: 0.001,
            diffusion: 0.00001,
            tide_period: DAY,
        }
    }
}

impl Example4Params {
    /// `B` with period `tide_period`.
    pub fn tide_frequency(&self) -> f64 {
        2.0 * PI / self.tide_period
    }

    /// `θ̃(t) = 0.45 sin(Bt) + 0.5`.
    pub fn injected(&self, t: f64) -> f64 {
        0.45 * sin(self.tide_frequency() * t) + 0.5
    }
}

#[derive(Clone)]
pub struct Example4Data {
    /// Intrinsic permeability before rescaling onto `[1e-9, 1e-7]`.
    pub permeability: Raster,
    pub initial: SpaceField,
    pub params: Example4Params,
}

impl Example4Data {
    /// Seeded permeability and two saltwater pockets near the upper-left and
    /// lower-right corners.
    pub fn stand_in(seed: u64, raster_n: usize) -> Result<Self> {
        let params = Example4Params::default();
        let s = params.side;
        let permeability = Raster::stand_in_permeability(raster_n, s, s, seed, 0.0, 4.0)?;
        let pockets = [(Point::new(0.18 * s, 0.82 * s), 0.16 * s), (Point::new(0.82 * s, 0.18 * s), 0.16 * s)];
        Ok(Self {
            permeability,
            initial: Arc::new(move |p| pockets.iter().map(|&(c, r)| bump(c, r, p)).fold(0.0, f64::max)),
            params,
        })
    }
}

/// Saltwater intrusion: 240 m square, `κ = k(x)/ν(θ)`, tidal injection well
/// and a discharge well, coarse step 2 days, fine step 2 hours, 30 days.
pub fn example4(data: Example4Data) -> Result<Scenario> {
    let k = data.permeability.rescaled_log(1e-9, 1e-7)?;
    let p = data.params;
    let (inj, dis) = (p.injection, p.discharge);
    Ok(Scenario {
        name: "example4".into(),
        nx: 240,
        ny: 240,
        lx: p.side,
        ly: p.side,
        boundary: BoundarySpec::all_dirichlet(),
        diffusion: Arc::new(move |_| p.diffusion),
        reaction: Arc::new(move |x| dis.rate(x)),
        forcing: Arc::new(move |x, t| inj.rate(x) * p.injected(t)),
        theta_boundary: Arc::new(|_, _| 0.0),
        flow: Flow::Darcy {
            mobility: Arc::new(move |x, th| k.value_at(x) / quarter_power_viscosity(th, p.mu_saltwater, p.mu_water)),
            source: Arc::new(move |x| inj.rate(x) - dis.rate(x)),
            pressure_boundary: Arc::new(|_| 0.0),
        },
        theta0: data.initial,
        exact: None,
        partition: TimePartition::uniform(0.0, 2.0 * DAY, 15, 24)?,
        velocity_update: VelocityUpdate::EveryCoarseStep,
        mu: 0.00001,
        hbar: 40.0,
        initial_guess: InitialGuess::Interpolated,
        mass: MassKind::Consistent,
    })
}
