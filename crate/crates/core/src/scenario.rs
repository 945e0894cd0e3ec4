//! Scenario files.
//!
//! A scenario is a TOML document read as flat dotted keys:
//!
//! ```toml
//! grid.n = 128
//! grid.half_width = 10.0
//! potential.kind = "harmonic"
//! potential.params.omega = 1.0
//! state.kind = "gaussian"
//! state.center_x = 1.0
//! evolve.dt = 1e-3
//! evolve.t_final = 6.283185307179586
//! ```
//!
//! | key | default |
//! |-----|---------|
//! | `grid.n`, `grid.half_width` | required |
//! | `potential.kind` | required: `constant`, `linear`, `harmonic`, `quartic`, `polynomial`, `piecewise_linear`, `driven_linear` |
//! | `potential.params.value` | constant |
//! | `potential.params.slope`, `potential.params.offset` | linear (offset 0) |
//! | `potential.params.omega` | harmonic |
//! | `potential.params.lambda` | quartic, `λ x⁴` |
//! | `potential.params.coeffs` | polynomial, ascending powers |
//! | `potential.params.times`, `.slopes`, `.offsets` | driven_linear schedule |
//! | `potential.breakpoints`, `potential.values` | piecewise_linear |
//! | `potential.delta` | replace the potential by its linearization with this linearity length |
//! | `state.kind` | `gaussian`; or `cat` |
//! | `state.center_x`, `state.center_p` | 0 |
//! | `state.sigma_x`, `state.sigma_p` | `1/√2` |
//! | `state.separation`, `state.sigma` | 3, 0.5 |
//! | `evolve.engine` | `vonneumann`; or `classical`, `qq` |
//! | `evolve.dt` | 1e-3 |
//! | `evolve.t_final` or `evolve.n_steps` | `t_final = 1` |
//! | `evolve.record_every` | `n_steps / 50` |
//! | `evolve.tail_threshold` | 1e-6 |
//! | `evolve.kinetic` | true |
//! | `evolve.allow_coarse_dt` | false |
//! | `noise.nu` | number or per-cell list; enables the noise section |
//! | `noise.seed`, `noise.realizations`, `noise.mode` | 0, 1000, `quenched` |
//! | `probes` | list of `[i, j]` index pairs |
//! | `output.dir` | none |
//! | `output.snapshot_every` | 0: first and last record only |
//!
//! When `t_final` is not a multiple of `dt`, the step is shortened so that the
//! run ends exactly at `t_final`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use toml::Value;

use crate::error::{Error, Result};
use crate::evolvers::{EvolverConfig, DEFAULT_TAIL_THRESHOLD};
use crate::grid::GridSpec;
use crate::potentials::{linearize, LinearSchedule, PiecewiseLinearPotential, Potential, Spacing};
use crate::state::{
    density_to_phase_space, make_cat_state, make_gaussian_phase_space, phase_space_to_density,
    DensityGrid, PhaseSpaceDistribution,
};
use crate::stochastic::{NoiseMode, NoiseSpec};

const KNOWN_KEYS: &[&str] = &[
    "grid.n",
    "grid.half_width",
    "potential.kind",
    "potential.params.value",
    "potential.params.slope",
    "potential.params.offset",
    "potential.params.omega",
    "potential.params.lambda",
    "potential.params.coeffs",
    "potential.params.times",
    "potential.params.slopes",
    "potential.params.offsets",
    "potential.breakpoints",
    "potential.values",
    "potential.delta",
    "state.kind",
    "state.center_x",
    "state.center_p",
    "state.sigma_x",
    "state.sigma_p",
    "state.separation",
    "state.sigma",
    "evolve.engine",
    "evolve.dt",
    "evolve.t_final",
    "evolve.n_steps",
    "evolve.record_every",
    "evolve.tail_threshold",
    "evolve.kinetic",
    "evolve.allow_coarse_dt",
    "noise.nu",
    "noise.seed",
    "noise.realizations",
    "noise.mode",
    "probes",
    "output.dir",
    "output.snapshot_every",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineKind {
    Classical,
    Qq,
    VonNeumann,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Classical => "classical",
            EngineKind::Qq => "qq",
            EngineKind::VonNeumann => "vonneumann",
        }
    }
}

impl std::str::FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(EngineKind::Classical),
            "qq" => Ok(EngineKind::Qq),
            "vonneumann" | "von_neumann" => Ok(EngineKind::VonNeumann),
            other => Err(Error::validation(
                "evolve.engine",
                format!("expected classical, qq or vonneumann, got `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateSpec {
    Gaussian {
        center_x: f64,
        center_p: f64,
        sigma_x: f64,
        sigma_p: f64,
    },
    Cat {
        separation: f64,
        sigma: f64,
    },
}

impl StateSpec {
    pub fn phase_space(&self, grid: GridSpec) -> Result<PhaseSpaceDistribution> {
        match *self {
            StateSpec::Gaussian {
                center_x,
                center_p,
                sigma_x,
                sigma_p,
            } => make_gaussian_phase_space(center_x, center_p, sigma_x, sigma_p, grid),
            StateSpec::Cat { separation, sigma } => {
                Ok(density_to_phase_space(&make_cat_state(separation, sigma, grid)?))
            }
        }
    }

    pub fn density(&self, grid: GridSpec) -> Result<DensityGrid> {
        match *self {
            StateSpec::Cat { separation, sigma } => make_cat_state(separation, sigma, grid),
            StateSpec::Gaussian { .. } => Ok(phase_space_to_density(&self.phase_space(grid)?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NuSpec {
    Uniform(f64),
    PerCell(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSettings {
    pub nu: NuSpec,
    pub seed: u64,
    pub realizations: usize,
    pub mode: NoiseMode,
}

impl NoiseSettings {
    pub fn spec(&self, grid: &GridSpec) -> Result<NoiseSpec> {
        match &self.nu {
            NuSpec::Uniform(nu) => NoiseSpec::uniform(grid, *nu, self.seed),
            NuSpec::PerCell(nu) => NoiseSpec::new(nu.clone(), self.seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub grid: GridSpec,
    pub potential: Potential,
    pub state: StateSpec,
    pub engine: EngineKind,
    pub evolve: EvolverConfig,
    pub noise: Option<NoiseSettings>,
    pub probes: Vec<(usize, usize)>,
    pub output_dir: Option<PathBuf>,
    pub snapshot_every: usize,
    /// SHA-256 of the canonical key listing, overrides included.
    pub hash: String,
}

impl Scenario {
    pub fn initial_density(&self) -> Result<DensityGrid> {
        self.state.density(self.grid)
    }

    pub fn initial_phase_space(&self) -> Result<PhaseSpaceDistribution> {
        self.state.phase_space(self.grid)
    }

    pub fn noise_spec(&self) -> Result<Option<NoiseSpec>> {
        self.noise.as_ref().map(|n| n.spec(&self.grid)).transpose()
    }
}

/// Read and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    load_scenario_with(path, &[])
}

/// As [`load_scenario`], with `key = value` overrides applied before validation.
pub fn load_scenario_with(path: &Path, overrides: &[(String, Value)]) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, overrides)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

pub fn parse_scenario(text: &str, overrides: &[(String, Value)]) -> Result<Scenario> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().trim().to_string(),
    })?;
    let mut flat = BTreeMap::new();
    flatten("", &table, &mut flat);
    for (k, v) in overrides {
        flat.insert(k.clone(), v.clone());
    }
    if let Some(key) = flat.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(Error::validation(key.clone(), "unknown key"));
    }
    let hash = {
        let mut h = Sha256::new();
        for (k, v) in &flat {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    };
    Fields(flat).build(hash)
}

struct Fields(BTreeMap<String, Value>);

fn type_error(key: &str, expected: &str) -> Error {
    Error::validation(key, format!("expected {expected}"))
}

impl Fields {
    fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(type_error(key, "a number")),
        }
    }

    fn f64_req(&self, key: &str) -> Result<f64> {
        self.f64_opt(key)?
            .ok_or_else(|| Error::validation(key, "required but missing"))
    }

    fn positive(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let v = match default {
            Some(d) => self.f64_opt(key)?.unwrap_or(d),
            None => self.f64_req(key)?,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::validation(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn uint_opt(&self, key: &str) -> Result<Option<u64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(type_error(key, "a non-negative integer")),
        }
    }

    fn bool_opt(&self, key: &str) -> Result<Option<bool>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(type_error(key, "true or false")),
        }
    }

    fn str_opt(&self, key: &str) -> Result<Option<&str>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(type_error(key, "a string")),
        }
    }

    fn list_opt(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(type_error(key, "a list of numbers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(type_error(key, "a list of numbers")),
        }
    }

    fn list_req(&self, key: &str) -> Result<Vec<f64>> {
        self.list_opt(key)?
            .ok_or_else(|| Error::validation(key, "required but missing"))
    }

    fn in_key(key: &'static str) -> impl Fn(Error) -> Error {
        move |e| match e {
            e @ Error::Validation { .. } => e,
            other => Error::validation(key, other.to_string()),
        }
    }

    fn potential(&self, grid: &GridSpec) -> Result<Potential> {
        let kind = self
            .str_opt("potential.kind")?
            .ok_or_else(|| Error::validation("potential.kind", "required but missing"))?;
        let p = |name: &str| format!("potential.params.{name}");
        let v = match kind {
            "constant" => Potential::Constant {
                value: self.f64_req(&p("value"))?,
            },
            "linear" => Potential::Linear {
                slope: self.f64_req(&p("slope"))?,
                offset: self.f64_opt(&p("offset"))?.unwrap_or(0.0),
            },
            "harmonic" => Potential::Harmonic {
                omega: self.f64_req(&p("omega"))?,
            },
            "quartic" => Potential::Quartic {
                lambda: self.f64_req(&p("lambda"))?,
            },
            "polynomial" => Potential::Polynomial {
                coeffs: self.list_req(&p("coeffs"))?,
            },
            "piecewise_linear" => Potential::PiecewiseLinear(
                PiecewiseLinearPotential::new(
                    self.list_req("potential.breakpoints")?,
                    self.list_req("potential.values")?,
                )
                .map_err(Self::in_key("potential.breakpoints"))?,
            ),
            "driven_linear" => {
                let times = self.list_req(&p("times"))?;
                let slopes = self.list_req(&p("slopes"))?;
                let offsets = self.list_opt(&p("offsets"))?.unwrap_or(vec![0.0; times.len()]);
                Potential::DrivenLinear(LinearSchedule {
                    times,
                    slopes,
                    offsets,
                })
            }
            other => {
                return Err(Error::validation(
                    "potential.kind",
                    format!("unknown kind `{other}`"),
                ))
            }
        };
        v.validate().map_err(Self::in_key("potential.params"))?;
        match self.f64_opt("potential.delta")? {
            None => Ok(v),
            Some(delta) => {
                if v.is_time_dependent() {
                    return Err(Error::validation(
                        "potential.delta",
                        "cannot linearize a time-dependent potential",
                    ));
                }
                let range = (-grid.half_width(), grid.half_width());
                Ok(Potential::PiecewiseLinear(
                    linearize(&v, &Spacing::Uniform(delta), range).map_err(Self::in_key("potential.delta"))?,
                ))
            }
        }
    }

    fn state(&self) -> Result<StateSpec> {
        let gaussian_keys = ["state.center_x", "state.center_p", "state.sigma_x", "state.sigma_p"];
        let cat_keys = ["state.separation", "state.sigma"];
        let kind = self.str_opt("state.kind")?.unwrap_or("gaussian");
        let (spec, foreign): (_, &[&str]) = match kind {
            "gaussian" => {
                let s = 0.5f64.sqrt();
                (
                    StateSpec::Gaussian {
                        center_x: self.f64_opt("state.center_x")?.unwrap_or(0.0),
                        center_p: self.f64_opt("state.center_p")?.unwrap_or(0.0),
                        sigma_x: self.positive("state.sigma_x", Some(s))?,
                        sigma_p: self.positive("state.sigma_p", Some(s))?,
                    },
                    &cat_keys,
                )
            }
            "cat" => {
                let separation = self.f64_opt("state.separation")?.unwrap_or(3.0);
                if !(separation.is_finite() && separation >= 0.0) {
                    return Err(Error::validation("state.separation", "must be non-negative"));
                }
                (
                    StateSpec::Cat {
                        separation,
                        sigma: self.positive("state.sigma", Some(0.5))?,
                    },
                    &gaussian_keys,
                )
            }
            other => {
                return Err(Error::validation(
                    "state.kind",
                    format!("expected gaussian or cat, got `{other}`"),
                ))
            }
        };
        if let Some(k) = foreign.iter().find(|k| self.has(k)) {
            return Err(Error::validation(*k, format!("does not apply to state.kind = {kind}")));
        }
        Ok(spec)
    }

    fn evolve(&self) -> Result<EvolverConfig> {
        let dt = self.positive("evolve.dt", Some(1e-3))?;
        let (dt, n_steps) = match (self.f64_opt("evolve.t_final")?, self.uint_opt("evolve.n_steps")?) {
            (Some(_), Some(_)) => {
                return Err(Error::validation(
                    "evolve.n_steps",
                    "give either evolve.t_final or evolve.n_steps, not both",
                ))
            }
            (None, Some(n)) => (dt, n as usize),
            (t, None) => {
                let t = t.unwrap_or(1.0);
                if !(t.is_finite() && t > 0.0) {
                    return Err(Error::validation("evolve.t_final", format!("must be positive, got {t}")));
                }
                let n = (t / dt - 1e-9).ceil().max(1.0);
                (t / n, n as usize)
            }
        };
        if n_steps == 0 {
            return Err(Error::validation("evolve.n_steps", "must be at least 1"));
        }
        let record_every = match self.uint_opt("evolve.record_every")? {
            Some(0) => return Err(Error::validation("evolve.record_every", "must be at least 1")),
            Some(r) => r as usize,
            None => (n_steps / 50).max(1),
        };
        Ok(EvolverConfig {
            dt,
            n_steps,
            record_every,
            tail_threshold: self.positive("evolve.tail_threshold", Some(DEFAULT_TAIL_THRESHOLD))?,
            kinetic: self.bool_opt("evolve.kinetic")?.unwrap_or(true),
            allow_coarse_dt: self.bool_opt("evolve.allow_coarse_dt")?.unwrap_or(false),
        })
    }

    fn noise(&self, grid: &GridSpec) -> Result<Option<NoiseSettings>> {
        let nu = match self.0.get("noise.nu") {
            None => {
                if let Some(k) = ["noise.seed", "noise.realizations", "noise.mode"]
                    .into_iter()
                    .find(|k| self.has(k))
                {
                    return Err(Error::validation(k, "noise settings need noise.nu"));
                }
                return Ok(None);
            }
            Some(Value::Array(_)) => NuSpec::PerCell(self.list_req("noise.nu")?),
            Some(_) => NuSpec::Uniform(self.f64_req("noise.nu")?),
        };
        let settings = NoiseSettings {
            nu,
            seed: self.uint_opt("noise.seed")?.unwrap_or(0),
            realizations: self.uint_opt("noise.realizations")?.unwrap_or(1000) as usize,
            mode: self.str_opt("noise.mode")?.unwrap_or("quenched").parse()?,
        };
        if settings.realizations == 0 {
            return Err(Error::validation("noise.realizations", "must be at least 1"));
        }
        let spec = settings.spec(grid)?;
        if spec.nu.len() != grid.n() {
            return Err(Error::validation(
                "noise.nu",
                format!("has {} cells, grid has {}", spec.nu.len(), grid.n()),
            ));
        }
        Ok(Some(settings))
    }

    fn probes(&self, grid: &GridSpec) -> Result<Vec<(usize, usize)>> {
        let bad = || type_error("probes", "a list of [i, j] index pairs");
        let Some(v) = self.0.get("probes") else {
            return Ok(Vec::new());
        };
        let Value::Array(items) = v else { return Err(bad()) };
        items
            .iter()
            .map(|item| {
                let Value::Array(pair) = item else { return Err(bad()) };
                match pair.as_slice() {
                    [Value::Integer(i), Value::Integer(j)]
                        if (0..grid.n() as i64).contains(i) && (0..grid.n() as i64).contains(j) =>
                    {
                        Ok((*i as usize, *j as usize))
                    }
                    [Value::Integer(_), Value::Integer(_)] => Err(Error::validation(
                        "probes",
                        format!("indices must lie in 0..{}", grid.n()),
                    )),
                    _ => Err(bad()),
                }
            })
            .collect()
    }

    fn build(self, hash: String) -> Result<Scenario> {
        let n = self
            .uint_opt("grid.n")?
            .ok_or_else(|| Error::validation("grid.n", "required but missing"))?;
        let half_width = self.positive("grid.half_width", None)?;
        let grid = GridSpec::new(n as usize, half_width).map_err(Self::in_key("grid.n"))?;
        let scenario = Scenario {
            grid,
            potential: self.potential(&grid)?,
            state: self.state()?,
            engine: self.str_opt("evolve.engine")?.unwrap_or("vonneumann").parse()?,
            evolve: self.evolve()?,
            noise: self.noise(&grid)?,
            probes: self.probes(&grid)?,
            output_dir: self.str_opt("output.dir")?.map(PathBuf::from),
            snapshot_every: self.uint_opt("output.snapshot_every")?.unwrap_or(0) as usize,
            hash,
        };
        // everything a run needs is checked before any computation
        scenario.evolve.validate(&grid)?;
        scenario.initial_phase_space().map_err(Self::in_key("state.kind"))?;
        Ok(scenario)
    }
}
