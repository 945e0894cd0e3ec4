//! Experiment pipelines and their reports.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::causet::{void_probability_mc, SprinkleRegion, VoidEstimate};
use crate::error::{Error, Result};
use crate::evolvers::{
    dense_generator, liouville_evolve_xp, qq_liouville_evolve, von_neumann_evolve, EvolverConfig,
    Trajectory,
};
use crate::grid::GridSpec;
use crate::potentials::{
    midpoint_term, superoperator_field, PiecewiseLinearPotential, Potential,
};
use crate::rng::{stream, Domain};
use crate::scenario::{EngineKind, Scenario, StateSpec};
use crate::state::{phase_space_to_density, DensityGrid, PhaseSpaceDistribution, StateDiagnostics};
use crate::stochastic::{
    compare_ensemble_vs_lindblad, decay_predict, ensemble_evolve, lindblad_evolve, EnsembleComparison,
};

/// Pass/fail thresholds of the studies.
pub mod thresholds {
    /// Pairwise max-norm distance between engines for potentials with `ℰ ≡ 0`.
    pub const EQUIVALENCE_DISTANCE: f64 = 1e-6;
    /// `|Tr f(t) - Tr f(0)|`.
    pub const TRACE_DRIFT: f64 = 1e-9;
    /// `max |f(Q,q) - conj f(q,Q)|` over a run.
    pub const HERMITICITY_DRIFT: f64 = 1e-9;
    /// Classical-vs-quantum distance expected at `t = 1` for anharmonic potentials.
    pub const DIVERGENCE_AT_UNIT_TIME: f64 = 1e-3;
    /// Sample times for the growth check of the divergence.
    pub const DIVERGENCE_SAMPLES: [f64; 5] = [0.5, 0.75, 1.0, 1.25, 1.5];
    /// Relative error of the fitted decay coefficient with the Hamiltonian off.
    pub const DECAY_FIT_RELATIVE: f64 = 0.05;
    /// Fitted decay coefficient accepted as zero for vanishing noise.
    pub const DECAY_FIT_ZERO: f64 = 1e-10;
    pub const DIAGONAL_CONSTANCY: f64 = 1e-12;
    /// Stepped Lindblad evolution against the closed form with the Hamiltonian off.
    pub const LINDBLAD_CLOSED_FORM: f64 = 1e-8;
    /// Error ratio per halving of `dt` for a second-order method.
    pub const STRANG_RATIO: f64 = 4.0;
    pub const STRANG_RATIO_RELATIVE: f64 = 0.2;
    pub const SPECTRUM_SYMMETRY: f64 = 1e-8;
    pub const SEGMENT_SUM: f64 = 1e-12;
    pub const MIDPOINT_IDENTITY: f64 = 1e-12;
    pub const VOID_SIGMAS: f64 = 3.0;
    pub const MC_SLOPE: f64 = -0.5;
    pub const MC_SLOPE_TOLERANCE: f64 = 0.15;
}

use thresholds as th;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Above(f64),
    Within { target: f64, tolerance: f64 },
}

impl Bound {
    pub fn holds(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost(t) => v <= t,
            Bound::AtLeast(t) => v >= t,
            Bound::Above(t) => v > t,
            Bound::Within { target, tolerance } => (v - target).abs() <= tolerance,
        }
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::AtMost(t) => write!(f, "<= {t:e}"),
            Bound::AtLeast(t) => write!(f, ">= {t:e}"),
            Bound::Above(t) => write!(f, "> {t:e}"),
            Bound::Within { target, tolerance } => write!(f, "{target} ± {tolerance}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// `None` for informational values.
    pub bound: Option<Bound>,
    pub note: Option<String>,
}

impl Metric {
    pub fn judged(name: impl Into<String>, value: f64, bound: Bound) -> Self {
        Self {
            name: name.into(),
            value,
            bound: Some(bound),
            note: None,
        }
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: None,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> Option<bool> {
        self.bound.map(|b| b.holds(self.value))
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.bound, self.passed()) {
            (Some(b), Some(ok)) => write!(
                f,
                "{} {} = {:.6e} (required {b})",
                if ok { "PASS" } else { "FAIL" },
                self.name,
                self.value
            )?,
            _ => write!(f, "INFO {} = {:.6e}", self.name, self.value)?,
        }
        if let Some(n) = &self.note {
            write!(f, " [{n}]")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub study: String,
    pub scenario_hash: Option<String>,
    pub metrics: Vec<Metric>,
    pub wall_time: f64,
    pub seeds: BTreeMap<String, u64>,
    pub warnings: Vec<String>,
}

impl RunReport {
    fn new(study: &str, scenario: Option<&Scenario>) -> Self {
        Self {
            study: study.into(),
            scenario_hash: scenario.map(|s| s.hash.clone()),
            metrics: Vec::new(),
            wall_time: 0.0,
            seeds: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.metrics.iter().all(|m| m.passed() != Some(false))
    }

    pub fn failures(&self) -> impl Iterator<Item = &Metric> {
        self.metrics.iter().filter(|m| m.passed() == Some(false))
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    fn push(&mut self, m: Metric) {
        self.metrics.push(m);
    }

    fn warn_from(&mut self, warnings: &[String]) {
        for w in warnings {
            if !self.warnings.contains(w) {
                self.warnings.push(w.clone());
            }
        }
    }
}

/// Numeric table with named columns; the first column is the abscissa.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Snapshot {
    Density(DensityGrid),
    PhaseSpace(PhaseSpaceDistribution),
}

/// Everything a study hands to the output writer.
#[derive(Clone, Debug)]
pub struct StudyOutput {
    pub report: RunReport,
    pub tables: Vec<Table>,
    pub snapshots: Vec<(String, Snapshot)>,
}

pub fn max_norm(a: &DensityGrid, b: &DensityGrid) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Continuum 2-norm `(Σ |a - b|² h²)^½`.
pub fn l2_norm(a: &DensityGrid, b: &DensityGrid) -> f64 {
    let h = a.grid().spacing();
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
        * h
}

fn drift(diags: &[StateDiagnostics]) -> (f64, f64) {
    let tr0 = diags.first().map(|d| d.trace).unwrap_or_default();
    let trace = diags.iter().map(|d| (d.trace - tr0).norm()).fold(0.0, f64::max);
    let herm = diags.iter().map(|d| d.hermiticity_defect).fold(0.0, f64::max);
    (trace, herm)
}

/// Records to keep as snapshots: first, last and every `every`-th.
fn snapshot_indices(len: usize, every: usize) -> Vec<usize> {
    (0..len)
        .filter(|&i| i == 0 || i + 1 == len || (every > 0 && i % every == 0))
        .collect()
}

fn nearest_record(times: &[f64], t: f64, spacing: f64) -> Option<usize> {
    let (i, d) = times
        .iter()
        .enumerate()
        .map(|(i, s)| (i, (s - t).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    (d <= 0.5 * spacing + 1e-9).then_some(i)
}

fn with_snapshots<S: Clone>(
    out: &mut Vec<(String, Snapshot)>,
    engine: &str,
    traj: &Trajectory<S>,
    every: usize,
    wrap: impl Fn(S) -> Snapshot,
) {
    for i in snapshot_indices(traj.len(), every) {
        out.push((format!("{engine}_{i:05}"), wrap(traj.states[i].clone())));
    }
}

/// Single-engine run of a scenario.
pub fn run_evolve(scenario: &Scenario) -> Result<StudyOutput> {
    let start = Instant::now();
    let mut report = RunReport::new("evolve", Some(scenario));
    let v = &scenario.potential;
    let cfg = &scenario.evolve;
    let engine = scenario.engine;
    let mut snapshots = Vec::new();
    let (densities, diags, warnings) = match engine {
        EngineKind::Classical => {
            let f0 = scenario.initial_phase_space()?;
            let traj = liouville_evolve_xp(&f0, v, cfg).map_err(|e| e.in_engine("classical"))?;
            with_snapshots(&mut snapshots, "classical", &traj, scenario.snapshot_every, Snapshot::PhaseSpace);
            let d: Vec<_> = traj.states.iter().map(phase_space_to_density).collect();
            (d, traj.diagnostics, traj.warnings)
        }
        EngineKind::Qq | EngineKind::VonNeumann => {
            let f0 = phase_space_or_density(scenario)?;
            let traj = if engine == EngineKind::Qq {
                qq_liouville_evolve(&f0, v, &superoperator_field(v, &scenario.grid), cfg)
            } else {
                von_neumann_evolve(&f0, v, cfg)
            }
            .map_err(|e| e.in_engine(engine.name()))?;
            with_snapshots(&mut snapshots, engine.name(), &traj, scenario.snapshot_every, Snapshot::Density);
            (traj.states, traj.diagnostics, traj.warnings)
        }
    };
    let (trace, herm) = drift(&diags);
    report.push(Metric::judged("trace_drift", trace, Bound::AtMost(th::TRACE_DRIFT)));
    report.push(Metric::judged("hermiticity_drift", herm, Bound::AtMost(th::HERMITICITY_DRIFT)));
    let min_density = diags.iter().map(|d| d.min_reconstructed_density).fold(f64::INFINITY, f64::min);
    report.push(Metric::info("min_reconstructed_density", min_density));
    report.warn_from(&warnings);

    let mut diag_table = Table::new(
        "diagnostics",
        &["t", "trace_re", "trace_im", "hermiticity_defect", "min_density"],
    );
    for (s, d) in densities.iter().zip(&diags) {
        diag_table.rows.push(vec![
            s.time(),
            d.trace.re,
            d.trace.im,
            d.hermiticity_defect,
            d.min_reconstructed_density,
        ]);
    }
    let mut tables = vec![diag_table];
    for (k, &(i, j)) in scenario.probes.iter().enumerate() {
        let mut t = Table::new(format!("probe_{k}"), &["t", "abs_f", "re", "im"]);
        for s in &densities {
            let z = s.values()[[i, j]];
            t.rows.push(vec![s.time(), z.norm(), z.re, z.im]);
        }
        tables.push(t);
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(StudyOutput {
        report,
        tables,
        snapshots,
    })
}

/// The `(Q, q)` engines start from the density of the phase-space state so all
/// engines share one initial ensemble.
fn phase_space_or_density(s: &Scenario) -> Result<DensityGrid> {
    Ok(phase_space_to_density(&s.initial_phase_space()?))
}

pub const PAIRS: [(&str, &str); 3] = [
    ("classical", "qq"),
    ("classical", "vonneumann"),
    ("qq", "vonneumann"),
];

/// Run the classical, `(Q, q)` and von Neumann engines from one initial
/// ensemble and compare them over time.
///
/// For potentials with `ℰ ≡ 0` the engines must agree. Otherwise the pairwise
/// distances are recorded and the study checks that the classical and quantum
/// evolutions separate by `t = 1` and keep separating.
pub fn run_equivalence_study(scenario: &Scenario) -> Result<StudyOutput> {
    let start = Instant::now();
    let mut report = RunReport::new("equivalence", Some(scenario));
    let v = &scenario.potential;
    let cfg = &scenario.evolve;
    let f0 = scenario.initial_phase_space()?;
    let rho0 = phase_space_to_density(&f0);
    let field = superoperator_field(v, &scenario.grid);

    let (classical, (qq, vn)) = rayon::join(
        || liouville_evolve_xp(&f0, v, cfg).map_err(|e| e.in_engine("classical")),
        || {
            rayon::join(
                || qq_liouville_evolve(&rho0, v, &field, cfg).map_err(|e| e.in_engine("qq")),
                || von_neumann_evolve(&rho0, v, cfg).map_err(|e| e.in_engine("vonneumann")),
            )
        },
    );
    let (classical, qq, vn) = (classical?, qq?, vn?);
    let classical_rho: Vec<DensityGrid> = classical.states.iter().map(phase_space_to_density).collect();
    let times = vn.times.clone();

    let series = |name: &str| -> &[DensityGrid] {
        match name {
            "classical" => &classical_rho,
            "qq" => &qq.states,
            _ => &vn.states,
        }
    };
    let equivalent = field.max_abs() == 0.0;
    let mut tables = Vec::new();
    for (a, b) in PAIRS {
        let mut t = Table::new(format!("distance_{a}_{b}"), &["t", "maxnorm", "l2"]);
        for ((x, y), &time) in series(a).iter().zip(series(b)).zip(&times) {
            t.rows.push(vec![time, max_norm(x, y), l2_norm(x, y)]);
        }
        let worst = t.column("maxnorm").unwrap().into_iter().fold(0.0, f64::max);
        let name = format!("max_distance_{a}_{b}");
        report.push(if equivalent {
            Metric::judged(name, worst, Bound::AtMost(th::EQUIVALENCE_DISTANCE))
        } else {
            Metric::info(name, worst).with_note(format!(
                "{} potential: expected above {:e}",
                v.kind_name(),
                th::EQUIVALENCE_DISTANCE
            ))
        });
        tables.push(t);
    }

    if !equivalent {
        let d = tables[1].column("maxnorm").unwrap();
        let spacing = cfg.dt * cfg.record_every as f64;
        match nearest_record(&times, 1.0, spacing) {
            Some(i) => report.push(Metric::judged(
                "classical_vonneumann_distance_at_t1",
                d[i],
                Bound::AtLeast(th::DIVERGENCE_AT_UNIT_TIME),
            )),
            None => report.warnings.push("no record near t = 1; divergence not judged".into()),
        }
        let samples: Option<Vec<usize>> = th::DIVERGENCE_SAMPLES
            .iter()
            .map(|&t| nearest_record(&times, t, spacing))
            .collect();
        match samples {
            Some(idx) => {
                let min_step = idx.windows(2).map(|w| d[w[1]] - d[w[0]]).fold(f64::INFINITY, f64::min);
                report.push(
                    Metric::judged("classical_vonneumann_min_growth", min_step, Bound::Above(0.0))
                        .with_note("smallest increase between successive sample times"),
                );
            }
            None => report
                .warnings
                .push("records do not cover the growth sample times; growth not judged".into()),
        }
    }

    for (name, diags) in [
        ("classical", &classical.diagnostics),
        ("qq", &qq.diagnostics),
        ("vonneumann", &vn.diagnostics),
    ] {
        let (trace, herm) = drift(diags);
        report.push(Metric::judged(format!("trace_drift_{name}"), trace, Bound::AtMost(th::TRACE_DRIFT)));
        report.push(Metric::judged(
            format!("hermiticity_drift_{name}"),
            herm,
            Bound::AtMost(th::HERMITICITY_DRIFT),
        ));
    }
    report.push(Metric::info("superoperator_max_abs", field.max_abs()));
    for w in [&classical.warnings, &qq.warnings, &vn.warnings] {
        report.warn_from(w);
    }

    let mut snapshots = Vec::new();
    let every = scenario.snapshot_every;
    with_snapshots(&mut snapshots, "classical", &classical, every, Snapshot::PhaseSpace);
    with_snapshots(&mut snapshots, "qq", &qq, every, Snapshot::Density);
    with_snapshots(&mut snapshots, "vonneumann", &vn, every, Snapshot::Density);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(StudyOutput {
        report,
        tables,
        snapshots,
    })
}

/// Exact harmonic evolution of a Gaussian ensemble: a rotation of phase space.
fn rotated_gaussian(grid: GridSpec, state: &StateSpec, omega: f64, t: f64) -> Result<PhaseSpaceDistribution> {
    let StateSpec::Gaussian {
        center_x,
        center_p,
        sigma_x,
        sigma_p,
    } = *state
    else {
        return Err(Error::validation("state.kind", "the order study needs a gaussian state"));
    };
    let nn = grid.phase_n();
    let eval = |t: f64| {
        let (c, s) = ((omega * t).cos(), (omega * t).sin());
        Array2::from_shape_fn((nn, nn), |(i, k)| {
            let (x, p) = (grid.phase_x(i), grid.momentum(k));
            let u = (x * c - p * s / omega - center_x) / sigma_x;
            let w = (p * c + omega * x * s - center_p) / sigma_p;
            (-0.5 * (u * u + w * w)).exp()
        })
    };
    // same normalization as the initial state
    let mass = eval(0.0).sum() * grid.phase_cell();
    PhaseSpaceDistribution::new(grid, eval(t) / mass, t)
}

/// Error against the exact harmonic solution at `dt`, `dt/2` and `dt/4`.
pub fn run_order_study(scenario: &Scenario) -> Result<StudyOutput> {
    let start = Instant::now();
    let mut report = RunReport::new("order", Some(scenario));
    let Potential::Harmonic { omega } = scenario.potential else {
        return Err(Error::validation("potential.kind", "the order study needs a harmonic potential"));
    };
    if omega == 0.0 {
        return Err(Error::validation("potential.params.omega", "must be non-zero"));
    }
    let grid = scenario.grid;
    let cfg = &scenario.evolve;
    let t_final = cfg.final_time();
    let f0 = scenario.initial_phase_space()?;
    let rho0 = phase_space_to_density(&f0);
    let exact = rotated_gaussian(grid, &scenario.state, omega, t_final)?;
    let exact_rho = phase_space_to_density(&exact);
    let v = &scenario.potential;

    let runs: Vec<(f64, f64, f64)> = [1usize, 2, 4]
        .par_iter()
        .map(|&k| {
            let c = EvolverConfig {
                dt: cfg.dt / k as f64,
                n_steps: cfg.n_steps * k,
                record_every: cfg.n_steps * k,
                ..cfg.clone()
            };
            let classical = liouville_evolve_xp(&f0, v, &c).map_err(|e| e.in_engine("classical"))?;
            let vn = von_neumann_evolve(&rho0, v, &c).map_err(|e| e.in_engine("vonneumann"))?;
            let ec = classical
                .last()
                .unwrap()
                .values()
                .iter()
                .zip(exact.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok((c.dt, ec, max_norm(vn.last().unwrap(), &exact_rho)))
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new("order_errors", &["dt", "classical", "vonneumann"]);
    for &(dt, a, b) in &runs {
        table.rows.push(vec![dt, a, b]);
    }
    let ratio_bound = Bound::Within {
        target: th::STRANG_RATIO,
        tolerance: th::STRANG_RATIO * th::STRANG_RATIO_RELATIVE,
    };
    for (col, name) in [(1, "classical"), (2, "vonneumann")] {
        let e: Vec<f64> = runs.iter().map(|r| [r.0, r.1, r.2][col]).collect();
        report.push(Metric::judged(format!("ratio_{name}_dt_over_half"), e[0] / e[1], ratio_bound));
        report.push(Metric::judged(format!("ratio_{name}_half_over_quarter"), e[1] / e[2], ratio_bound));
        report.push(Metric::info(format!("error_{name}_dt"), e[0]));
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(StudyOutput {
        report,
        tables: vec![table],
        snapshots: Vec::new(),
    })
}

/// Weighted least squares for `y = c x` through the origin; returns `(c, σ_c)`.
fn fit_through_origin(x: &[f64], y: &[f64], sigma: &[f64]) -> (f64, f64) {
    let weighted = sigma.iter().all(|s| *s > 0.0);
    let w = |i: usize| if weighted { 1.0 / (sigma[i] * sigma[i]) } else { 1.0 };
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..x.len() {
        sxy += w(i) * x[i] * y[i];
        sxx += w(i) * x[i] * x[i];
    }
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let err = if weighted && sxx > 0.0 { sxx.recip().sqrt() } else { 0.0 };
    (c, err)
}

/// Fit of `|f(t)| = |f(0)| exp(-c t²)` to one probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub coefficient: f64,
    pub stderr: f64,
    pub predicted: f64,
    pub points: usize,
}

/// Probe points where a curve is fitted; records whose mean is within five
/// standard errors of zero carry no decay information and are skipped.
pub fn fit_decay(times: &[f64], abs_f: &[f64], stderr: &[f64], f0: f64, predicted: f64) -> DecayFit {
    let (mut x, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..times.len() {
        if times[i] > 0.0 && abs_f[i] > 0.0 && abs_f[i] > 5.0 * stderr[i] {
            x.push(times[i] * times[i]);
            y.push(-(abs_f[i] / f0).ln());
            s.push(stderr[i] / abs_f[i]);
        }
    }
    let (coefficient, err) = fit_through_origin(&x, &y, &s);
    DecayFit {
        coefficient,
        stderr: err,
        predicted,
        points: x.len(),
    }
}

/// Cat state under quenched noise, against the Lindblad stepper and the closed form.
pub fn run_decoherence_study(scenario: &Scenario) -> Result<StudyOutput> {
    let start = Instant::now();
    let mut report = RunReport::new("decoherence", Some(scenario));
    let Some(noise) = &scenario.noise else {
        return Err(Error::validation("noise.nu", "the decoherence study needs noise settings"));
    };
    let StateSpec::Cat { separation, .. } = scenario.state else {
        return Err(Error::validation("state.kind", "the decoherence study needs state.kind = \"cat\""));
    };
    if noise.realizations < 2 {
        return Err(Error::validation("noise.realizations", "at least 2 are needed for error bars"));
    }
    let grid = scenario.grid;
    let spec = noise.spec(&grid)?;
    let v = &scenario.potential;
    let cfg = &scenario.evolve;
    let f0 = scenario.initial_density()?;
    let hamiltonian_off = !cfg.kinetic && matches!(v, Potential::Constant { .. });
    report.seeds.insert("noise".into(), spec.seed);

    let (ens, lind) = rayon::join(
        || ensemble_evolve(&f0, v, &spec, noise.realizations, noise.mode, cfg),
        || lindblad_evolve(&f0, v, &spec.nu, cfg).map_err(|e| e.in_engine("lindblad")),
    );
    let (ens, lind) = (ens?, lind?);
    report.warn_from(&ens.warnings);
    report.warn_from(&lind.warnings);

    let probes = if scenario.probes.is_empty() {
        let plus = grid.nearest_index(0.5 * separation);
        let minus = grid.nearest_index(-0.5 * separation);
        match (plus, minus) {
            (Some(a), Some(b)) => vec![(a, b), (a, a)],
            _ => return Err(Error::validation("state.separation", "cat peaks lie outside the grid")),
        }
    } else {
        scenario.probes.clone()
    };

    let predictions: Vec<DensityGrid> = ens
        .times
        .iter()
        .map(|&t| decay_predict(&f0, &spec.nu, t - f0.time()))
        .collect::<Result<_>>()?;
    let se_abs: Vec<Array2<f64>> = (0..ens.times.len())
        .map(|r| ens.stderr_abs(r).expect("at least two realizations"))
        .collect();

    let mut tables = Vec::new();
    for (k, &(i, j)) in probes.iter().enumerate() {
        let mut t = Table::new(format!("decay_probe_{k}"), &["t", "abs_f", "predicted", "stderr"]);
        let mut lt = Table::new(format!("lindblad_probe_{k}"), &["t", "abs_f"]);
        for r in 0..ens.times.len() {
            let z = ens.mean[r].values()[[i, j]];
            let (se_re, se_im) = {
                let (a, b) = &ens.stderr.as_ref().unwrap()[r];
                (a[[i, j]], b[[i, j]])
            };
            // standard error of |z| to first order
            let se = if z.norm() > 0.0 {
                ((z.re * se_re).powi(2) + (z.im * se_im).powi(2)).sqrt() / z.norm()
            } else {
                se_abs[r][[i, j]]
            };
            t.rows.push(vec![ens.times[r], z.norm(), predictions[r].values()[[i, j]].norm(), se]);
            lt.rows.push(vec![lind.times[r], lind.states[r].values()[[i, j]].norm()]);
        }
        let z0 = f0.values()[[i, j]].norm();
        if i == j {
            let flat = ens
                .mean
                .iter()
                .map(|m| (m.values()[[i, j]] - f0.values()[[i, j]]).norm())
                .fold(0.0, f64::max);
            let name = format!("diagonal_probe_{k}_max_change");
            report.push(if hamiltonian_off {
                Metric::judged(name, flat, Bound::AtMost(th::DIAGONAL_CONSTANCY))
            } else {
                Metric::info(name, flat)
            });
        } else {
            let nu2 = |a: usize| spec.nu[a] * spec.nu[a];
            let predicted = 0.5 * (nu2(i) + nu2(j));
            let fit = fit_decay(
                &t.column("t").unwrap(),
                &t.column("abs_f").unwrap(),
                &t.column("stderr").unwrap(),
                z0,
                predicted,
            );
            let name = format!("decay_probe_{k}_coefficient");
            report.push(
                match (hamiltonian_off, predicted > 0.0) {
                    (true, true) => Metric::judged(
                        name,
                        fit.coefficient,
                        Bound::Within {
                            target: predicted,
                            tolerance: th::DECAY_FIT_RELATIVE * predicted,
                        },
                    ),
                    (true, false) => Metric::judged(name, fit.coefficient, Bound::AtMost(th::DECAY_FIT_ZERO)),
                    (false, _) => Metric::info(name, fit.coefficient),
                }
                .with_note(format!(
                    "predicted {predicted}, fit stderr {:.3e}, {} points",
                    fit.stderr, fit.points
                )),
            );
        }
        tables.push(t);
        tables.push(lt);
    }

    if hamiltonian_off {
        let worst = lind
            .states
            .iter()
            .zip(&predictions)
            .map(|(a, b)| max_norm(a, b))
            .fold(0.0, f64::max);
        report.push(Metric::judged(
            "lindblad_vs_closed_form",
            worst,
            Bound::AtMost(th::LINDBLAD_CLOSED_FORM),
        ));
    }
    let (trace, _) = drift(&lind.diagnostics);
    report.push(Metric::judged("lindblad_trace_drift", trace, Bound::AtMost(th::TRACE_DRIFT)));

    let cmp = compare_ensemble_vs_lindblad(&ens, &lind)?;
    let failing = cmp
        .passed
        .iter()
        .zip(&cmp.judged)
        .filter(|(p, j)| **j && !**p)
        .count();
    report.push(
        Metric::judged("ensemble_vs_lindblad_failing_times", failing as f64, Bound::AtMost(0.0)).with_note(
            format!("{} of {} records judged", cmp.judged.iter().filter(|j| **j).count(), cmp.judged.len()),
        ),
    );
    tables.push(comparison_table(&cmp));
    report.push(Metric::info("realizations", noise.realizations as f64));
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(StudyOutput {
        report,
        tables,
        snapshots: vec![
            ("ensemble_final".into(), Snapshot::Density(ens.mean.last().unwrap().clone())),
            ("lindblad_final".into(), Snapshot::Density(lind.last().unwrap().clone())),
        ],
    })
}

fn comparison_table(cmp: &EnsembleComparison) -> Table {
    let mut t = Table::new(
        "ensemble_vs_lindblad",
        &["t", "maxnorm", "l2", "stderr_l2", "outlier_fraction", "judged", "pass"],
    );
    for r in 0..cmp.times.len() {
        t.rows.push(vec![
            cmp.times[r],
            cmp.max_norm[r],
            cmp.l2[r],
            cmp.stderr_l2[r],
            cmp.outlier_fraction[r],
            cmp.judged[r] as u8 as f64,
            cmp.passed[r] as u8 as f64,
        ]);
    }
    t
}

/// Empirical emptiness of a sprinkled region against the exact and bare laws.
pub fn run_void_study(region: &SprinkleRegion, trials: usize, seed: u64) -> Result<(StudyOutput, VoidEstimate)> {
    let start = Instant::now();
    let mut report = RunReport::new("void", None);
    report.seeds.insert("sprinkle".into(), seed);
    let est = void_probability_mc(region, trials, seed)?;
    report.push(Metric::info("empirical", est.empirical));
    report.push(Metric::info("analytic_exact", est.analytic_exact));
    report.push(Metric::info("analytic_bare", est.analytic_bare));
    report.push(Metric::info("stderr", est.stderr));
    report.push(Metric::judged(
        "deviation_in_stderr",
        est.deviation_in_stderr(),
        Bound::AtMost(th::VOID_SIGMAS),
    ));
    let mut t = Table::new(
        "void",
        &["dr", "rho", "duration", "trials", "empirical", "stderr", "exact", "bare"],
    );
    t.rows.push(vec![
        region.dr,
        region.density,
        region.duration,
        trials as f64,
        est.empirical,
        est.stderr,
        est.analytic_exact,
        est.analytic_bare,
    ]);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((
        StudyOutput {
            report,
            tables: vec![t],
            snapshots: Vec::new(),
        },
        est,
    ))
}

/// Piecewise-linear potential with `n` random interior breakpoints on `[-range, range]`.
pub fn random_piecewise_linear(n: usize, range: f64, seed: u64) -> Result<PiecewiseLinearPotential> {
    let mut rng = stream(seed, Domain::Sprinkle, u64::MAX);
    let mut points: Vec<f64> = (0..n).map(|_| rng.random_range(-range..range)).collect();
    points.push(-range);
    points.push(range);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let values = points.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
    PiecewiseLinearPotential::new(points, values)
}

/// Algebraic identities of the potentials: vanishing and antisymmetry of `ℰ`,
/// exact segment sums, and the midpoint identity.
pub fn run_segment_check(seed: u64, pairs: usize) -> Result<StudyOutput> {
    let start = Instant::now();
    let mut report = RunReport::new("segcheck", None);
    report.seeds.insert("segcheck".into(), seed);
    let grid = GridSpec::new(128, 10.0)?;
    let pl = random_piecewise_linear(50, 10.0, seed)?;
    let mut rng = stream(seed, Domain::Sprinkle, u64::MAX - 1);
    let draws: Vec<(f64, f64)> = (0..pairs)
        .map(|_| (rng.random_range(-10.0..=10.0), rng.random_range(-10.0..=10.0)))
        .collect();
    let seg = draws
        .iter()
        .map(|&(q, big_q)| Ok((pl.segment_sum(q, big_q)? - (pl.value(big_q) - pl.value(q))).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    report.push(Metric::judged("segment_sum_max_error", seg, Bound::AtMost(th::SEGMENT_SUM)));

    let mut vanishing: Vec<Potential> = vec![Potential::Constant { value: 1.3 }];
    for g in [0.5, 1.0, 2.0] {
        vanishing.push(Potential::Linear { slope: g, offset: 0.0 });
    }
    for omega in [0.5, 1.0, 2.0] {
        vanishing.push(Potential::Harmonic { omega });
    }
    let vanish = vanishing
        .iter()
        .map(|v| superoperator_field(v, &grid).max_abs())
        .fold(0.0, f64::max);
    report.push(Metric::judged("superoperator_max_abs_up_to_harmonic", vanish, Bound::AtMost(0.0)));
    let quartic = Potential::Quartic { lambda: 1.0 };
    report.push(Metric::judged(
        "superoperator_max_abs_quartic",
        superoperator_field(&quartic, &grid).max_abs(),
        Bound::AtLeast(1.0),
    ));
    let mut all = vanishing.clone();
    all.push(quartic.clone());
    all.push(Potential::Polynomial {
        coeffs: vec![0.1, -0.2, 0.3, 0.05, -0.01],
    });
    all.push(Potential::PiecewiseLinear(pl.clone()));
    let anti = all
        .iter()
        .map(|v| superoperator_field(v, &grid).antisymmetry_defect())
        .fold(0.0, f64::max);
    report.push(Metric::judged("superoperator_antisymmetry", anti, Bound::AtMost(0.0)));

    let mid = vanishing
        .iter()
        .flat_map(|v| {
            draws
                .iter()
                .map(move |&(q, big_q)| (midpoint_term(v, q, big_q) - (v.value(big_q) - v.value(q))).abs())
        })
        .fold(0.0, f64::max);
    report.push(Metric::judged("midpoint_identity_up_to_harmonic", mid, Bound::AtMost(th::MIDPOINT_IDENTITY)));
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(StudyOutput {
        report,
        tables: Vec::new(),
        snapshots: Vec::new(),
    })
}

/// Symmetry of the dense generator spectrum for each potential.
pub fn run_spectrum_study(potentials: &[Potential], grid: &GridSpec) -> Result<StudyOutput> {
    let start = Instant::now();
    let mut report = RunReport::new("spectrum", None);
    let mut tables = Vec::new();
    for (k, v) in potentials.iter().enumerate() {
        let s = dense_generator(v, grid)?;
        report.push(Metric::judged(
            format!("symmetry_defect_{k}_{}", v.kind_name()),
            s.symmetry_defect(),
            Bound::AtMost(th::SPECTRUM_SYMMETRY),
        ));
        let mut t = Table::new(format!("spectrum_{k}_{}", v.kind_name()), &["index", "eigenvalue"]);
        for (i, e) in s.eigenvalues.iter().enumerate() {
            t.rows.push(vec![i as f64, *e]);
        }
        tables.push(t);
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(StudyOutput {
        report,
        tables,
        snapshots: Vec::new(),
    })
}

/// Least-squares slope of `log10 y` against `log10 x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// RMS over off-diagonal elements of `|mean - predicted|`.
pub fn off_diagonal_rms(mean: &Array2<Complex64>, predicted: &Array2<Complex64>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for ((a, b), z) in mean.indexed_iter() {
        if a != b {
            sum += (z - predicted[[a, b]]).norm_sqr();
            count += 1;
        }
    }
    (sum / count as f64).sqrt()
}
