//! Engines in the `(Q, q)` picture.
//!
//! ```text
//! i ∂t f(Q, q) = { H_Q - H_q + W(Q, q) } f,   H = -½ ∂² + v
//! ```
//!
//! where `W = ℰ` for the Hilbert-space form of the Liouville equation and
//! `W = 0` for the von Neumann equation. An optional static potential offset
//! `δV` enters as `δV(Q) - δV(q)`.

use ndarray::Array2;
use num_complex::Complex64;

use super::{drive, strang_step, EvolverConfig, Splitting, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{wavenumbers, GridSpec};
use crate::potentials::{Potential, SuperoperatorField};
use crate::spectral::AxisFft;
use crate::state::{diagnostics, frame_ratio, DensityGrid, StateDiagnostics};

/// Hermiticity defect, relative to the largest element, accepted on input.
const HERMITIAN_TOLERANCE: f64 = 1e-9;

pub struct QqEngine {
    grid: GridSpec,
    values: Array2<Complex64>,
    fft: AxisFft,
    k2: Vec<f64>,
    potential: Potential,
    superop: Option<Array2<f64>>,
    noise: Option<Vec<f64>>,
    kinetic_cache: Vec<(u64, Vec<Complex64>, Vec<Complex64>)>,
    phase_cache: Vec<(u64, Array2<Complex64>)>,
}

impl QqEngine {
    fn new(f0: &DensityGrid, v: &Potential, superop: Option<Array2<f64>>) -> Result<Self> {
        v.validate()?;
        let scale = f0.values().iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
        let defect = f0.hermiticity_defect();
        if defect > HERMITIAN_TOLERANCE * scale {
            return Err(Error::Domain(format!(
                "initial state is not Hermitian (defect {defect:.3e})"
            )));
        }
        let grid = *f0.grid();
        let n = grid.n();
        let k2 = wavenumbers(n, 2.0 * grid.half_width())
            .into_iter()
            .map(|k| k * k)
            .collect();
        Ok(Self {
            grid,
            values: f0.values().clone(),
            fft: AxisFft::new(n),
            k2,
            potential: v.clone(),
            superop,
            noise: None,
            kinetic_cache: Vec::new(),
            phase_cache: Vec::new(),
        })
    }

    /// Hilbert-space form of the Liouville equation, including `ℰ`.
    pub fn liouville(f0: &DensityGrid, v: &Potential, field: &SuperoperatorField) -> Result<Self> {
        if field.grid() != f0.grid() {
            return Err(Error::Config(format!(
                "superoperator field on {:?} does not match state grid {:?}",
                field.grid(),
                f0.grid()
            )));
        }
        Self::new(f0, v, Some(field.values().clone()))
    }

    /// Von Neumann equation: the potential enters only as `v(Q) - v(q)`.
    pub fn von_neumann(f0: &DensityGrid, v: &Potential) -> Result<Self> {
        Self::new(f0, v, None)
    }

    /// Replace the static potential offset `δV` sampled on the position lattice.
    pub fn set_noise(&mut self, noise: Option<Vec<f64>>) -> Result<()> {
        if let Some(dv) = &noise {
            if dv.len() != self.grid.n() {
                return Err(Error::Config(format!(
                    "noise field has {} samples, grid has {}",
                    dv.len(),
                    self.grid.n()
                )));
            }
        }
        self.noise = noise;
        self.phase_cache.clear();
        Ok(())
    }

    pub fn with_noise(mut self, noise: Vec<f64>) -> Result<Self> {
        self.set_noise(Some(noise))?;
        Ok(self)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.values
    }

    pub fn state(&self, time: f64) -> DensityGrid {
        DensityGrid::new(self.grid, self.values.clone(), time).expect("engine keeps a valid grid")
    }

    /// One unfused Strang step; negative `dt` runs backwards.
    pub fn step(&mut self, t: f64, dt: f64, kinetic: bool) {
        strang_step(self, t, dt, kinetic);
    }

    /// Exponent field `W(Q, q)` of the potential factor at time `t`.
    pub fn exponent(&self, t: f64) -> Array2<f64> {
        let x = self.grid.coords();
        let mut v: Vec<f64> = x.iter().map(|&x| self.potential.value_at(x, t)).collect();
        if let Some(dv) = &self.noise {
            for (vi, d) in v.iter_mut().zip(dv) {
                *vi += d;
            }
        }
        let n = self.grid.n();
        Array2::from_shape_fn((n, n), |(a, b)| {
            let w = v[a] - v[b];
            match &self.superop {
                Some(e) => w + e[[a, b]],
                None => w,
            }
        })
    }

    fn kinetic_factors(&mut self, tau: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let key = tau.to_bits();
        if let Some((_, r, c)) = self.kinetic_cache.iter().find(|(k, _, _)| *k == key) {
            return (r.clone(), c.clone());
        }
        let inv_n = 1.0 / self.grid.n() as f64;
        let rows: Vec<Complex64> = self
            .k2
            .iter()
            .map(|k2| Complex64::from_polar(inv_n, 0.5 * tau * k2))
            .collect();
        let cols: Vec<Complex64> = self
            .k2
            .iter()
            .map(|k2| Complex64::from_polar(inv_n, -0.5 * tau * k2))
            .collect();
        if self.kinetic_cache.len() >= 4 {
            self.kinetic_cache.remove(0);
        }
        self.kinetic_cache.push((key, rows.clone(), cols.clone()));
        (rows, cols)
    }
}

impl Splitting for QqEngine {
    type State = DensityGrid;

    fn kinetic(&mut self, tau: f64) {
        let (rows, cols) = self.kinetic_factors(tau);
        // rows run along q, columns along Q
        self.fft.filter_rows(&mut self.values, |_, k| rows[k]);
        self.fft.filter_cols(&mut self.values, |_, k| cols[k]);
    }

    fn potential(&mut self, t_mid: f64, tau: f64) {
        if self.potential.is_time_dependent() {
            let w = self.exponent(t_mid);
            self.values
                .zip_mut_with(&w, |z, &w| *z *= Complex64::from_polar(1.0, -tau * w));
            return;
        }
        let key = tau.to_bits();
        if !self.phase_cache.iter().any(|(k, _)| *k == key) {
            let phase = self.exponent(t_mid).mapv(|w| Complex64::from_polar(1.0, -tau * w));
            if self.phase_cache.len() >= 2 {
                self.phase_cache.remove(0);
            }
            self.phase_cache.push((key, phase));
        }
        let (_, phase) = self.phase_cache.iter().find(|(k, _)| *k == key).unwrap();
        self.values.zip_mut_with(phase, |z, p| *z *= p);
    }

    fn snapshot(&self, time: f64) -> DensityGrid {
        self.state(time)
    }

    fn diagnose(&self, state: &DensityGrid) -> StateDiagnostics {
        diagnostics(state)
    }

    fn boundary_tail(&self) -> f64 {
        frame_ratio(&self.values, |z| z.norm())
    }

    fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.is_finite())
    }
}

/// Run an engine under `cfg`, recording diagnostics if asked.
pub(crate) fn run_qq(
    engine: &mut QqEngine,
    t0: f64,
    cfg: &EvolverConfig,
    with_diagnostics: bool,
) -> Result<Trajectory<DensityGrid>> {
    let warnings = cfg.validate(&engine.grid)?;
    drive(engine, t0, cfg, warnings, with_diagnostics)
}

/// Evolve `f0` under the Hilbert-space form of the Liouville equation.
pub fn qq_liouville_evolve(
    f0: &DensityGrid,
    v: &Potential,
    field: &SuperoperatorField,
    cfg: &EvolverConfig,
) -> Result<Trajectory<DensityGrid>> {
    let mut engine = QqEngine::liouville(f0, v, field)?;
    run_qq(&mut engine, f0.time(), cfg, true)
}

/// Evolve `f0` under the von Neumann equation.
pub fn von_neumann_evolve(
    f0: &DensityGrid,
    v: &Potential,
    cfg: &EvolverConfig,
) -> Result<Trajectory<DensityGrid>> {
    let mut engine = QqEngine::von_neumann(f0, v)?;
    run_qq(&mut engine, f0.time(), cfg, true)
}
