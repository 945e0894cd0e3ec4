//! Classical Liouville evolution on the phase-space lattice.
//!
//! ```text
//! ∂t f = -p ∂x f + v'(x) ∂p f
//! ```
//!
//! Free streaming is an exact spectral shift in `x` for each momentum column.
//! The force kick is applied in the mixed picture, where it is the pointwise
//! phase `exp(-i τ y v'(x))`.

use ndarray::Array2;
use num_complex::Complex64;

use super::{drive, strang_step, EvolverConfig, Splitting, Trajectory};
use crate::error::Result;
use crate::grid::{odd_wavenumbers, signed_mode, GridSpec};
use crate::potentials::Potential;
use crate::spectral::AxisFft;
use crate::state::{
    diagnostics, frame_ratio, phase_space_to_density, PhaseSpaceDistribution, StateDiagnostics,
};

pub struct ClassicalEngine {
    grid: GridSpec,
    values: Array2<Complex64>,
    fft: AxisFft,
    kx: Vec<f64>,
    lags: Vec<f64>,
    potential: Potential,
    force_cache: Option<(f64, Vec<f64>)>,
}

impl ClassicalEngine {
    pub fn new(f0: &PhaseSpaceDistribution, v: &Potential) -> Result<Self> {
        v.validate()?;
        let grid = *f0.grid();
        let nn = grid.phase_n();
        let kx = odd_wavenumbers(nn, 2.0 * grid.half_width());
        // The forward transform along p maps mode j to lag -j·h; the
        // unpaired Nyquist lag gets no kick.
        let lags = (0..nn)
            .map(|j| {
                if j == nn / 2 {
                    0.0
                } else {
                    -(signed_mode(j, nn) as f64) * grid.dy()
                }
            })
            .collect();
        Ok(Self {
            grid,
            values: f0.values().mapv(|v| Complex64::new(v, 0.0)),
            fft: AxisFft::new(nn),
            kx,
            lags,
            potential: v.clone(),
            force_cache: None,
        })
    }

    pub fn state(&self, time: f64) -> PhaseSpaceDistribution {
        PhaseSpaceDistribution::new(self.grid, self.values.mapv(|z| z.re), time)
            .expect("engine keeps a valid grid")
    }

    /// One unfused Strang step; negative `dt` runs backwards.
    pub fn step(&mut self, t: f64, dt: f64) {
        strang_step(self, t, dt, true);
    }

    fn forces(&mut self, t: f64) -> Vec<f64> {
        let static_potential = !self.potential.is_time_dependent();
        if let Some((_, f)) = self.force_cache.as_ref().filter(|_| static_potential) {
            return f.clone();
        }
        let f: Vec<f64> = (0..self.grid.phase_n())
            .map(|i| self.potential.derivative_at(self.grid.phase_x(i), t))
            .collect();
        self.force_cache = Some((t, f.clone()));
        f
    }
}

impl Splitting for ClassicalEngine {
    type State = PhaseSpaceDistribution;

    fn kinetic(&mut self, tau: f64) {
        let inv = 1.0 / self.grid.phase_n() as f64;
        let grid = self.grid;
        let kx = &self.kx;
        // column k holds momentum p_k; shift x by p_k τ
        self.fft.filter_cols(&mut self.values, |k, m| {
            Complex64::from_polar(inv, -kx[m] * grid.momentum(k) * tau)
        });
    }

    fn potential(&mut self, t_mid: f64, tau: f64) {
        let inv = 1.0 / self.grid.phase_n() as f64;
        let force = self.forces(t_mid);
        let lags = &self.lags;
        self.fft.filter_rows(&mut self.values, |i, j| {
            Complex64::from_polar(inv, -tau * lags[j] * force[i])
        });
    }

    fn snapshot(&self, time: f64) -> PhaseSpaceDistribution {
        self.state(time)
    }

    fn diagnose(&self, state: &PhaseSpaceDistribution) -> StateDiagnostics {
        diagnostics(&phase_space_to_density(state))
    }

    fn boundary_tail(&self) -> f64 {
        frame_ratio(&self.values, |z| z.norm())
    }

    fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.is_finite())
    }
}

/// Evolve a phase-space ensemble under the Liouville equation.
pub fn liouville_evolve_xp(
    f0: &PhaseSpaceDistribution,
    v: &Potential,
    cfg: &EvolverConfig,
) -> Result<Trajectory<PhaseSpaceDistribution>> {
    let warnings = cfg.validate(f0.grid())?;
    let mut engine = ClassicalEngine::new(f0, v)?;
    drive(&mut engine, f0.time(), cfg, warnings, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::make_gaussian_phase_space;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::new(64, 8.0).unwrap()
    }

    #[test]
    fn harmonic_quarter_period_rotates_phase_space() {
        let g = grid();
        let f0 = make_gaussian_phase_space(1.0, 0.0, 0.5, 0.5, g).unwrap();
        let dt = PI / 2.0 / 1000.0;
        let traj = liouville_evolve_xp(&f0, &Potential::Harmonic { omega: 1.0 }, &EvolverConfig::new(dt, 1000).recording_every(1000)).unwrap();
        let f = traj.last().unwrap();
        let (x, p) = f.mean();
        assert!(x.abs() < g.phase_dx(), "x = {x}");
        assert!((p + 1.0).abs() < g.dp(), "p = {p}");
        let (i, k) = f.argmax();
        assert!(g.phase_x(i).abs() <= g.phase_dx());
        assert!((g.momentum(k) + 1.0).abs() <= g.dp());
        assert!((f.mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn free_streaming_shifts_position() {
        let g = GridSpec::new(80, 10.0).unwrap();
        let f0 = make_gaussian_phase_space(-1.0, 1.0, 0.5, 0.5, g).unwrap();
        let traj = liouville_evolve_xp(&f0, &Potential::Constant { value: 2.0 }, &EvolverConfig::new(4e-3, 500).recording_every(500)).unwrap();
        let (x, p) = traj.last().unwrap().mean();
        assert!((x - 1.0).abs() < 1e-9, "x = {x}");
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_steps_of_recording_reproduce_initial_state() {
        let g = grid();
        let f0 = make_gaussian_phase_space(0.0, 0.5, 0.6, 0.6, g).unwrap();
        let traj = liouville_evolve_xp(&f0, &Potential::Harmonic { omega: 1.0 }, &EvolverConfig::new(1e-3, 3)).unwrap();
        assert_eq!(traj.states[0], f0);
        assert_eq!(traj.times, vec![0.0, 1e-3, 2e-3, 3e-3]);
    }

    #[test]
    fn reversed_step_restores_state() {
        let g = GridSpec::new(32, 6.0).unwrap();
        let f0 = make_gaussian_phase_space(0.5, 0.2, 0.7, 0.7, g).unwrap();
        let mut e = ClassicalEngine::new(&f0, &Potential::Quartic { lambda: 0.25 }).unwrap();
        e.step(0.0, 0.01);
        e.step(0.01, -0.01);
        let err = e
            .state(0.0)
            .values()
            .iter()
            .zip(f0.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10);
    }
}
