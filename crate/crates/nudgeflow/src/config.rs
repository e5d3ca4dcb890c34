//! Run configuration: INI-style `key = value` lines under section headers.
//! The grammar is documented in `docs/config.md`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ini::Ini;
use nudgeflow_core::driver::{DriverConfig, InitialGuess, TimePartition};
use nudgeflow_core::observation::FunctionalKind;
use nudgeflow_core::scenarios::{
    example1, example2, example3, example4, Example3Data, Example4Data, Scenario,
};
use nudgeflow_core::transport::MassKind;

use crate::io::read_raster_file;

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "NUDGEFLOW_OUTPUT_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Syntax(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("missing key `{key}` in [{section}]")]
    MissingKey { section: String, key: String },
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error("input file {path}: {reason}")]
    Input { path: PathBuf, reason: String },
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioId {
    Example1,
    Example2,
    Example3,
    Example4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub id: ScenarioId,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    /// Seed of the stand-in rasters used when no file is given.
    pub seed: u64,
    pub permeability: Option<PathBuf>,
    pub source: Option<PathBuf>,
    pub initial: Option<PathBuf>,
    pub coarse_steps: Option<usize>,
    pub coarse_dt: Option<f64>,
    pub fine_dt: Option<f64>,
    pub mass: Option<MassKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub mus: Vec<f64>,
    pub hbars: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    /// Relaxation parameters; empty means the scenario default.
    pub mus: Vec<f64>,
    pub hbar: Option<f64>,
    pub initial: Option<InitialGuess>,
    pub functional: FunctionalKind,
    pub driver: DriverConfig,
    pub output_dir: PathBuf,
    pub snapshots: Vec<f64>,
    pub sweep: Option<SweepConfig>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "scenario",
        &[
            "name",
            "nx",
            "ny",
            "seed",
            "permeability",
            "source",
            "initial",
            "coarse_steps",
            "coarse_dt",
            "fine_dt",
            "mass",
        ],
    ),
    ("assimilation", &["mu", "hbar", "initial", "functional"]),
    (
        "solver",
        &["pressure_rel_tol", "transport_rel_tol", "max_iter", "audit_mass", "raw_flux_check"],
    ),
    ("output", &["dir", "snapshots"]),
    ("sweep", &["mu", "hbar"]),
];

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.trim().parse().map_err(|_| bad(key, v, "not a number"))?;
    if !x.is_finite() {
        return Err(bad(key, v, "not finite"));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| bad(key, v, "not a non-negative integer"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, v, "expected true or false")),
    }
}

/// Comma-separated numbers; fractions `a/b` are accepted (`1/30`).
pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.split_once('/') {
            Some((a, b)) => {
                let (a, b) = (parse_f64(key, a)?, parse_f64(key, b)?);
                if b == 0.0 {
                    return Err(bad(key, s, "division by zero"));
                }
                Ok(a / b)
            }
            None => parse_f64(key, s),
        })
        .collect()
}

fn parse_single(key: &str, v: &str) -> Result<f64> {
    match parse_list(key, v)?.as_slice() {
        [x] => Ok(*x),
        _ => Err(bad(key, v, "expected one value")),
    }
}

fn parse_guess(key: &str, v: &str) -> Result<InitialGuess> {
    match v.trim() {
        "zero" => Ok(InitialGuess::Zero),
        "interpolated" => Ok(InitialGuess::Interpolated),
        "exact" => Ok(InitialGuess::Exact),
        _ => Err(bad(key, v, "expected zero, interpolated or exact")),
    }
}

fn parse_functional(key: &str, v: &str) -> Result<FunctionalKind> {
    match v.trim() {
        "point" => Ok(FunctionalKind::PointValue),
        "average" => Ok(FunctionalKind::CellAverage),
        _ => Err(bad(key, v, "expected point or average")),
    }
}

fn parse_mass(key: &str, v: &str) -> Result<MassKind> {
    match v.trim() {
        "consistent" => Ok(MassKind::Consistent),
        "lumped" => Ok(MassKind::Lumped),
        _ => Err(bad(key, v, "expected consistent or lumped")),
    }
}

fn parse_id(v: &str) -> Result<ScenarioId> {
    match v.trim() {
        "example1" => Ok(ScenarioId::Example1),
        "example2" => Ok(ScenarioId::Example2),
        "example3" => Ok(ScenarioId::Example3),
        "example4" => Ok(ScenarioId::Example4),
        _ => Err(bad("name", v, "expected example1 .. example4")),
    }
}

impl RunConfig {
    /// Parses a config; relative input paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        for (section, props) in ini.iter() {
            let Some(name) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(ConfigError::UnknownKey {
                        section: String::new(),
                        key: k.into(),
                    });
                }
                continue;
            };
            let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == name) else {
                return Err(ConfigError::UnknownSection(name.into()));
            };
            for (k, _) in props.iter() {
                if !keys.contains(&k) {
                    return Err(ConfigError::UnknownKey {
                        section: name.into(),
                        key: k.into(),
                    });
                }
            }
        }
        let get = |section: &str, key: &str| ini.section(Some(section)).and_then(|s| s.get(key));
        let path = |key: &str| get("scenario", key).map(|p| base_dir.join(p.trim()));

        let name = get("scenario", "name").ok_or(ConfigError::MissingKey {
            section: "scenario".into(),
            key: "name".into(),
        })?;
        let opt = |section: &str, key: &str| get(section, key).map(|v| (key.to_string(), v.to_string()));
        let scenario = ScenarioConfig {
            id: parse_id(name)?,
            nx: opt("scenario", "nx").map(|(k, v)| parse_usize(&k, &v)).transpose()?,
            ny: opt("scenario", "ny").map(|(k, v)| parse_usize(&k, &v)).transpose()?,
            seed: opt("scenario", "seed")
                .map(|(k, v)| v.trim().parse::<u64>().map_err(|_| bad(&k, &v, "not an integer")))
                .transpose()?
                .unwrap_or(1),
            permeability: path("permeability"),
            source: path("source"),
            initial: path("initial"),
            coarse_steps: opt("scenario", "coarse_steps").map(|(k, v)| parse_usize(&k, &v)).transpose()?,
            coarse_dt: opt("scenario", "coarse_dt").map(|(k, v)| parse_single(&k, &v)).transpose()?,
            fine_dt: opt("scenario", "fine_dt").map(|(k, v)| parse_single(&k, &v)).transpose()?,
            mass: opt("scenario", "mass").map(|(k, v)| parse_mass(&k, &v)).transpose()?,
        };

        let mut driver = DriverConfig::default();
        if let Some((k, v)) = opt("solver", "pressure_rel_tol") {
            driver.pressure.rel_tol = parse_single(&k, &v)?;
        }
        if let Some((k, v)) = opt("solver", "transport_rel_tol") {
            driver.transport.rel_tol = parse_single(&k, &v)?;
        }
        if let Some((k, v)) = opt("solver", "max_iter") {
            let n = parse_usize(&k, &v)?;
            driver.pressure.max_iter = Some(n);
            driver.transport.max_iter = Some(n);
        }
        if let Some((k, v)) = opt("solver", "audit_mass") {
            driver.audit_mass = parse_bool(&k, &v)?;
        }
        if let Some((k, v)) = opt("solver", "raw_flux_check") {
            driver.raw_flux_check = parse_bool(&k, &v)?;
        }
        let functional = opt("assimilation", "functional")
            .map(|(k, v)| parse_functional(&k, &v))
            .transpose()?
            .unwrap_or_default();
        driver.functional = functional;
        driver.pressure.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        driver.transport.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let sweep = match (opt("sweep", "mu"), opt("sweep", "hbar")) {
            (None, None) => None,
            (Some((km, vm)), Some((kh, vh))) => Some(SweepConfig {
                mus: parse_list(&km, &vm)?,
                hbars: parse_list(&kh, &vh)?,
            }),
            _ => return Err(ConfigError::Invalid("[sweep] needs both mu and hbar".into())),
        };

        let cfg = Self {
            scenario,
            mus: opt("assimilation", "mu").map(|(k, v)| parse_list(&k, &v)).transpose()?.unwrap_or_default(),
            hbar: opt("assimilation", "hbar").map(|(k, v)| parse_single(&k, &v)).transpose()?,
            initial: opt("assimilation", "initial").map(|(k, v)| parse_guess(&k, &v)).transpose()?,
            functional,
            driver,
            output_dir: get("output", "dir").map_or_else(|| PathBuf::from("out").join(name.trim()), |d| PathBuf::from(d.trim())),
            snapshots: opt("output", "snapshots").map(|(k, v)| parse_list(&k, &v)).transpose()?.unwrap_or_default(),
            sweep,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Input {
            path: path.into(),
            reason: e.to_string(),
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn check(&self) -> Result<()> {
        let all_mu = self.mus.iter().chain(self.sweep.iter().flat_map(|s| s.mus.iter()));
        for &mu in all_mu {
            if mu < 0.0 {
                return Err(ConfigError::Invalid(format!("mu {mu} must be >= 0")));
            }
        }
        let all_h = self.hbar.iter().chain(self.sweep.iter().flat_map(|s| s.hbars.iter()));
        for &h in all_h {
            if h <= 0.0 {
                return Err(ConfigError::Invalid(format!("hbar {h} must be positive")));
            }
        }
        if matches!(self.scenario.nx, Some(0)) || matches!(self.scenario.ny, Some(0)) {
            return Err(ConfigError::Invalid("mesh resolution must be positive".into()));
        }
        if self.scenario.coarse_steps == Some(0) {
            return Err(ConfigError::Invalid("coarse_steps must be positive".into()));
        }
        if self.scenario.fine_dt.is_some() && self.scenario.coarse_dt.is_none() {
            return Err(ConfigError::Invalid("fine_dt needs coarse_dt".into()));
        }
        Ok(())
    }

    /// Output directory with [`OUTPUT_ROOT_ENV`] applied to relative paths.
    pub fn resolved_output(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    /// Relaxation parameters to run: the configured list or the scenario default.
    pub fn mu_list(&self, scenario: &Scenario) -> Vec<f64> {
        if self.mus.is_empty() {
            vec![scenario.mu]
        } else {
            self.mus.clone()
        }
    }

    /// Builds the scenario with every override applied, and checks the
    /// snapshot times against its horizon.
    pub fn build_scenario(&self) -> Result<Scenario> {
        let c = &self.scenario;
        let input = |p: &Path, e: nudgeflow_core::Error| ConfigError::Input {
            path: p.into(),
            reason: e.to_string(),
        };
        let raster = |p: &PathBuf, side: f64| {
            let r = read_raster_file(p).map_err(|e| ConfigError::Input {
                path: p.clone(),
                reason: e.to_string(),
            })?;
            let (lx, ly) = r.extent();
            if (lx - side).abs() > 1e-9 * side || (ly - side).abs() > 1e-9 * side {
                return Err(ConfigError::Input {
                    path: p.clone(),
                    reason: format!("raster covers {lx} x {ly}, domain is {side} x {side}"),
                });
            }
            Ok(r)
        };
        let core = |e: nudgeflow_core::Error| ConfigError::Invalid(e.to_string());
        let mut s = match c.id {
            ScenarioId::Example1 => example1(),
            ScenarioId::Example2 => example2(),
            ScenarioId::Example3 => {
                let data = match (&c.permeability, &c.source, &c.initial) {
                    (None, None, None) => Example3Data::stand_in(c.seed, 64).map_err(core)?,
                    (Some(k), Some(g), Some(t)) => {
                        Example3Data::from_rasters(raster(k, 1.0)?, raster(g, 1.0)?, raster(t, 1.0)?).map_err(|e| input(k, e))?
                    }
                    _ => {
                        return Err(ConfigError::Invalid(
                            "example3 needs all of permeability, source and initial, or none".into(),
                        ))
                    }
                };
                example3(data).map_err(core)?
            }
            ScenarioId::Example4 => {
                if c.source.is_some() {
                    return Err(ConfigError::Invalid("example4 takes no source raster".into()));
                }
                let mut data = Example4Data::stand_in(c.seed, 48).map_err(core)?;
                if let Some(k) = &c.permeability {
                    let r = raster(k, data.params.side)?;
                    r.require_positive().map_err(|e| input(k, e))?;
                    data.permeability = r;
                }
                if let Some(t) = &c.initial {
                    let r = raster(t, data.params.side)?;
                    data.initial = Arc::new(move |p| r.value_at(p));
                }
                example4(data).map_err(core)?
            }
        };
        if c.nx.is_some() || c.ny.is_some() {
            let nx = c.nx.unwrap_or(s.nx);
            s = s.with_resolution(nx, c.ny.unwrap_or(nx));
        }
        if let Some(m) = c.mass {
            s.mass = m;
        }
        if let Some(h) = self.hbar {
            s.hbar = h;
        }
        if let Some(g) = self.initial {
            s.initial_guess = g;
        }
        if let Some(cdt) = c.coarse_dt {
            let n = c.coarse_steps.unwrap_or(s.partition.n_coarse());
            let fine = c.fine_dt.unwrap_or(cdt / s.partition.fine_per_coarse() as f64);
            let start = s.partition.start();
            s.partition = TimePartition::from_steps(start, start + n as f64 * cdt, cdt, fine).map_err(core)?;
        } else if let Some(n) = c.coarse_steps {
            s = s.with_coarse_steps(n).map_err(core)?;
        }
        let (t0, t1) = (s.partition.start(), s.partition.end());
        let tol = 1e-9 * (t1 - t0).abs().max(1.0);
        for &t in &self.snapshots {
            if t < t0 - tol || t > t1 + tol {
                return Err(ConfigError::Invalid(format!("snapshot time {t} outside [{t0}, {t1}]")));
            }
        }
        Ok(s)
    }
}
