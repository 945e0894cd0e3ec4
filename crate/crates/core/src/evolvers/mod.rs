//! Time evolution engines.
//!
//! All engines use Strang splitting: a kinetic half step, a full potential
//! step evaluated at the step midpoint, and another kinetic half step.
//! Consecutive kinetic halves are fused between recorded steps.

mod classical;
mod qq;
mod spectrum;

pub use classical::{liouville_evolve_xp, ClassicalEngine};
pub(crate) use qq::run_qq;
pub use qq::{qq_liouville_evolve, von_neumann_evolve, QqEngine};
pub use spectrum::{dense_generator, hamiltonian_levels, laplacian, GeneratorSpectrum, MAX_DENSE_POINTS};

use log::warn;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::state::StateDiagnostics;

/// Boundary tail above which a warning is logged once per run.
pub const TAIL_WARNING: f64 = 1e-10;

/// Default boundary tail at which a run is aborted.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-6;

/// `dt ≤ DT_GUARD · h²` keeps the kinetic phase resolved.
pub const DT_GUARD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct EvolverConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub record_every: usize,
    pub tail_threshold: f64,
    /// With `false` the kinetic factor is skipped, which together with a zero
    /// potential switches the Hamiltonian off.
    pub kinetic: bool,
    /// Accept steps above the `dt` guard with a warning instead of an error.
    pub allow_coarse_dt: bool,
}

impl Default for EvolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_steps: 1,
            record_every: 1,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
            kinetic: true,
            allow_coarse_dt: false,
        }
    }
}

impl EvolverConfig {
    pub fn new(dt: f64, n_steps: usize) -> Self {
        Self {
            dt,
            n_steps,
            ..Self::default()
        }
    }

    pub fn recording_every(mut self, record_every: usize) -> Self {
        self.record_every = record_every;
        self
    }

    pub fn without_kinetic(mut self) -> Self {
        self.kinetic = false;
        self
    }

    pub fn final_time(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    /// Check the configuration against `grid`; returns warnings to surface.
    pub fn validate(&self, grid: &GridSpec) -> Result<Vec<String>> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::validation("evolve.dt", format!("must be positive, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(Error::validation("evolve.n_steps", "must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::validation("evolve.record_every", "must be at least 1"));
        }
        if !(self.tail_threshold > 0.0) {
            return Err(Error::validation("evolve.tail_threshold", "must be positive"));
        }
        let mut warnings = Vec::new();
        let limit = DT_GUARD * grid.spacing().powi(2);
        if self.kinetic && self.dt > limit {
            let msg = format!("dt = {} exceeds the guard {limit:.3e} = {DT_GUARD}·h²", self.dt);
            if !self.allow_coarse_dt {
                return Err(Error::validation("evolve.dt", msg));
            }
            warn!("{msg}");
            warnings.push(msg);
        }
        Ok(warnings)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub diagnostics: Vec<StateDiagnostics>,
    pub warnings: Vec<String>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&S> {
        self.states.last()
    }
}

/// What the shared driver needs from an engine.
pub(crate) trait Splitting {
    type State;

    fn kinetic(&mut self, tau: f64);
    fn potential(&mut self, t_mid: f64, tau: f64);
    fn snapshot(&self, time: f64) -> Self::State;
    fn diagnose(&self, state: &Self::State) -> StateDiagnostics;
    fn boundary_tail(&self) -> f64;
    fn is_finite(&self) -> bool;
}

/// One unfused Strang step of signed length `dt` starting at `t`.
pub(crate) fn strang_step<E: Splitting>(engine: &mut E, t: f64, dt: f64, kinetic: bool) {
    if kinetic {
        engine.kinetic(0.5 * dt);
    }
    engine.potential(t + 0.5 * dt, dt);
    if kinetic {
        engine.kinetic(0.5 * dt);
    }
}

pub(crate) fn drive<E: Splitting>(
    engine: &mut E,
    t0: f64,
    cfg: &EvolverConfig,
    mut warnings: Vec<String>,
    with_diagnostics: bool,
) -> Result<Trajectory<E::State>> {
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        diagnostics: Vec::new(),
        warnings: Vec::new(),
    };
    let mut worst = 0.0;
    let mut record = |engine: &E, t: f64, traj: &mut Trajectory<E::State>, warnings: &mut Vec<String>| {
        let state = engine.snapshot(t);
        if with_diagnostics {
            let d = engine.diagnose(&state);
            crate::state::report_negativity(&d, t, &mut worst, warnings);
            traj.diagnostics.push(d);
        }
        traj.times.push(t);
        traj.states.push(state);
    };
    record(engine, t0, &mut traj, &mut warnings);

    let dt = cfg.dt;
    let mut pending_half = false;
    let mut tail_warned = false;
    for step in 1..=cfg.n_steps {
        let t = t0 + (step - 1) as f64 * dt;
        if cfg.kinetic {
            engine.kinetic(if pending_half { dt } else { 0.5 * dt });
        }
        engine.potential(t + 0.5 * dt, dt);
        pending_half = cfg.kinetic;

        if cfg.kinetic {
            let tail = engine.boundary_tail();
            if tail > cfg.tail_threshold {
                return Err(Error::BoundaryContamination {
                    step,
                    tail,
                    threshold: cfg.tail_threshold,
                });
            }
            if tail > TAIL_WARNING && !tail_warned {
                let msg = format!("boundary tail {tail:.3e} above {TAIL_WARNING:.0e} at step {step}");
                warn!("{msg}");
                warnings.push(msg);
                tail_warned = true;
            }
        }

        if step % cfg.record_every == 0 || step == cfg.n_steps {
            if pending_half {
                engine.kinetic(0.5 * dt);
                pending_half = false;
            }
            if !engine.is_finite() {
                return Err(Error::Numeric(format!("state became non-finite at step {step}")));
            }
            record(engine, t0 + step as f64 * dt, &mut traj, &mut warnings);
        }
    }
    traj.warnings = warnings;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let g = GridSpec::new(128, 10.0).unwrap();
        assert!(EvolverConfig::new(1e-3, 10).validate(&g).unwrap().is_empty());
        assert!(EvolverConfig::new(0.0, 10).validate(&g).is_err());
        assert!(EvolverConfig::new(1e-3, 0).validate(&g).is_err());
        let coarse = EvolverConfig::new(0.01, 10);
        assert!(coarse.validate(&g).unwrap_err().is_configuration());
        let allowed = EvolverConfig {
            allow_coarse_dt: true,
            ..coarse.clone()
        };
        assert_eq!(allowed.validate(&g).unwrap().len(), 1);
        // the guard only concerns the kinetic factor
        assert!(coarse.without_kinetic().validate(&g).is_ok());
    }
}
