//! Potential fluctuations, noisy ensembles and their Lindblad limit.
//!
//! Each realization evolves under `v + δV_k` with `δV_k(x_i)` independent
//! Gaussians of standard deviation `ν(x_i)`. The ensemble average of the
//! off-diagonal phase `exp(-i (δV(x) - δV(y)) t)` is
//!
//! ```text
//! exp(-½ t² (ν²(x) + ν²(y)))
//! ```
//!
//! which is also the closed-form solution of the time-dependent Lindblad
//! equation when the Hamiltonian is switched off.

use ndarray::Array2;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::evolvers::{drive, run_qq, EvolverConfig, QqEngine, Splitting, Trajectory, TAIL_WARNING};
use crate::grid::GridSpec;
use crate::potentials::Potential;
use crate::rng::{stream, Domain};
use crate::state::{diagnostics, DensityGrid, StateDiagnostics};

/// `|diff|` allowed where the standard error vanishes.
pub const ZERO_ERROR_TOLERANCE: f64 = 1e-10;

/// Fraction of elements allowed outside three standard errors.
pub const OUTLIER_FRACTION: f64 = 0.01;

/// Differences below this fraction of the largest Lindblad element never count as outliers.
pub const NEGLIGIBLE_DIFFERENCE: f64 = 1e-8;

/// Times with `t · max ν` above this are reported but not judged.
pub const JUDGED_NOISE_TIME: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    /// `ν(x_i)` per grid cell.
    pub nu: Vec<f64>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(nu: Vec<f64>, seed: u64) -> Result<Self> {
        let spec = Self { nu, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(grid: &GridSpec, nu: f64, seed: u64) -> Result<Self> {
        Self::new(vec![nu; grid.n()], seed)
    }

    pub fn validate(&self) -> Result<()> {
        match self.nu.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            Some(i) => Err(Error::validation(
                "noise.nu",
                format!("must be finite and non-negative, got {} at cell {i}", self.nu[i]),
            )),
            None => Ok(()),
        }
    }

    pub fn max_nu(&self) -> f64 {
        self.nu.iter().copied().fold(0.0, f64::max)
    }

    fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.nu.len() != grid.n() {
            return Err(Error::Config(format!(
                "noise has {} cells, grid has {}",
                self.nu.len(),
                grid.n()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseMode {
    /// One field per realization, static over the whole run.
    Quenched,
    /// A fresh field every step. Exploratory; it does not produce the `t²` law.
    Resampled,
}

impl NoiseMode {
    pub fn name(self) -> &'static str {
        match self {
            NoiseMode::Quenched => "quenched",
            NoiseMode::Resampled => "resampled",
        }
    }
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quenched" => Ok(NoiseMode::Quenched),
            "resampled" => Ok(NoiseMode::Resampled),
            other => Err(Error::validation(
                "noise.mode",
                format!("expected `quenched` or `resampled`, got `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseField {
    pub values: Vec<f64>,
    pub seed: u64,
    pub index: u64,
}

fn draw(nu: &[f64], rng: &mut impl rand::Rng) -> Vec<f64> {
    nu.iter()
        .map(|&s| {
            let z: f64 = StandardNormal.sample(rng);
            s * z
        })
        .collect()
}

/// Field of realization `k`.
pub fn sample_noise(spec: &NoiseSpec, k: u64) -> NoiseField {
    let mut rng = stream(spec.seed, Domain::QuenchedNoise, k);
    NoiseField {
        values: draw(&spec.nu, &mut rng),
        seed: spec.seed,
        index: k,
    }
}

/// Running mean and centred second moments, merged pairwise.
#[derive(Clone, Debug)]
struct Moments {
    count: usize,
    mean: Vec<Array2<Complex64>>,
    m2_re: Vec<Array2<f64>>,
    m2_im: Vec<Array2<f64>>,
}

impl Moments {
    fn single(states: Vec<DensityGrid>) -> Self {
        let mean: Vec<_> = states.into_iter().map(DensityGrid::into_values).collect();
        let zeros: Vec<_> = mean.iter().map(|m| Array2::zeros(m.raw_dim())).collect();
        Self {
            count: 1,
            mean,
            m2_re: zeros.clone(),
            m2_im: zeros,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for r in 0..self.mean.len() {
            let mb = &other.mean[r];
            let ma = &mut self.mean[r];
            let m2_re = &mut self.m2_re[r];
            let m2_im = &mut self.m2_im[r];
            ndarray::Zip::from(ma)
                .and(mb)
                .and(m2_re)
                .and(m2_im)
                .and(&other.m2_re[r])
                .and(&other.m2_im[r])
                .for_each(|a, b, sr, si, br, bi| {
                    let d = b - *a;
                    *a += d * (nb / n);
                    *sr += br + d.re * d.re * na * nb / n;
                    *si += bi + d.im * d.im * na * nb / n;
                });
        }
        self.count += other.count;
        self
    }
}

#[derive(Clone, Debug)]
pub struct EnsembleReport {
    pub n_realizations: usize,
    pub mode: NoiseMode,
    pub times: Vec<f64>,
    pub mean: Vec<DensityGrid>,
    /// Standard errors of the real and imaginary parts of the mean; absent for a single realization.
    pub stderr: Option<Vec<(Array2<f64>, Array2<f64>)>>,
    /// Largest `ν` of the noise that produced the ensemble.
    pub max_nu: f64,
    pub warnings: Vec<String>,
}

impl EnsembleReport {
    /// `|SE|` combining real and imaginary parts.
    pub fn stderr_abs(&self, record: usize) -> Option<Array2<f64>> {
        let (re, im) = &self.stderr.as_ref()?[record];
        Some(ndarray::Zip::from(re).and(im).map_collect(|a, b| a.hypot(*b)))
    }
}

fn run_realization(
    f0: &DensityGrid,
    v: &Potential,
    spec: &NoiseSpec,
    k: u64,
    mode: NoiseMode,
    cfg: &EvolverConfig,
) -> Result<Trajectory<DensityGrid>> {
    let mut engine = QqEngine::von_neumann(f0, v)?;
    match mode {
        NoiseMode::Quenched => {
            engine.set_noise(Some(sample_noise(spec, k).values))?;
            run_qq(&mut engine, f0.time(), cfg, false)
        }
        NoiseMode::Resampled => run_resampled(engine, f0.time(), spec, k, cfg),
    }
}

fn run_resampled(
    mut engine: QqEngine,
    t0: f64,
    spec: &NoiseSpec,
    k: u64,
    cfg: &EvolverConfig,
) -> Result<Trajectory<DensityGrid>> {
    let mut warnings = cfg.validate(engine.grid())?;
    let mut rng = stream(spec.seed, Domain::ResampledNoise, k);
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![engine.state(t0)],
        diagnostics: Vec::new(),
        warnings: Vec::new(),
    };
    let mut warned = false;
    for step in 1..=cfg.n_steps {
        let t = t0 + (step - 1) as f64 * cfg.dt;
        engine.set_noise(Some(draw(&spec.nu, &mut rng)))?;
        engine.step(t, cfg.dt, cfg.kinetic);
        if cfg.kinetic {
            let tail = engine.boundary_tail();
            if tail > cfg.tail_threshold {
                return Err(Error::BoundaryContamination {
                    step,
                    tail,
                    threshold: cfg.tail_threshold,
                });
            }
            if tail > TAIL_WARNING && !warned {
                warnings.push(format!("boundary tail {tail:.3e} above {TAIL_WARNING:.0e} at step {step}"));
                warned = true;
            }
        }
        if step % cfg.record_every == 0 || step == cfg.n_steps {
            let time = t0 + step as f64 * cfg.dt;
            traj.times.push(time);
            traj.states.push(engine.state(time));
        }
    }
    traj.warnings = warnings;
    Ok(traj)
}

fn accumulate(
    lo: usize,
    hi: usize,
    job: &(dyn Fn(usize) -> Result<Trajectory<DensityGrid>> + Sync),
) -> Result<(Moments, Vec<f64>, Vec<String>)> {
    if hi - lo == 1 {
        let traj = job(lo).map_err(|e| Error::Realization {
            index: lo,
            source: Box::new(e),
        })?;
        return Ok((Moments::single(traj.states), traj.times, traj.warnings));
    }
    let mid = lo + (hi - lo) / 2;
    let (a, b) = rayon::join(|| accumulate(lo, mid, job), || accumulate(mid, hi, job));
    let (a, times, mut warnings) = a?;
    let (b, _, wb) = b?;
    for w in wb {
        if !warnings.contains(&w) {
            warnings.push(w);
        }
    }
    Ok((a.merge(b), times, warnings))
}

/// Average `m` noisy von Neumann runs from `f0`.
///
/// Realization `k` uses the stream `(spec.seed, k)`; the reduction tree is
/// fixed by `m`, so the result does not depend on thread scheduling.
pub fn ensemble_evolve(
    f0: &DensityGrid,
    v: &Potential,
    spec: &NoiseSpec,
    m: usize,
    mode: NoiseMode,
    cfg: &EvolverConfig,
) -> Result<EnsembleReport> {
    if m == 0 {
        return Err(Error::validation("noise.realizations", "must be at least 1"));
    }
    spec.validate()?;
    spec.check_grid(f0.grid())?;
    cfg.validate(f0.grid())?;
    v.validate()?;
    let job = |k: usize| run_realization(f0, v, spec, k as u64, mode, cfg);
    let (moments, times, warnings) = accumulate(0, m, &job)?;
    let grid = *f0.grid();
    let mean = moments
        .mean
        .iter()
        .zip(&times)
        .map(|(a, &t)| DensityGrid::new(grid, a.clone(), t))
        .collect::<Result<Vec<_>>>()?;
    let stderr = (m > 1).then(|| {
        let norm = 1.0 / (m as f64 * (m - 1) as f64);
        moments
            .m2_re
            .iter()
            .zip(&moments.m2_im)
            .map(|(r, i)| (r.mapv(|x| (x * norm).sqrt()), i.mapv(|x| (x * norm).sqrt())))
            .collect()
    });
    Ok(EnsembleReport {
        n_realizations: m,
        mode,
        times,
        mean,
        stderr,
        max_nu: spec.max_nu(),
        warnings,
    })
}

/// Von Neumann engine followed by the off-diagonal damping of the noise average.
struct LindbladEngine {
    inner: QqEngine,
    nu2: Vec<f64>,
}

impl Splitting for LindbladEngine {
    type State = DensityGrid;

    fn kinetic(&mut self, tau: f64) {
        self.inner.kinetic(tau);
    }

    fn potential(&mut self, t_mid: f64, tau: f64) {
        self.inner.potential(t_mid, tau);
        // the unitary potential phase and the damping are both diagonal in (Q, q),
        // so applying them back to back equals the symmetric half/whole/half split
        let rate = t_mid * tau;
        let nu2 = &self.nu2;
        self.inner.values_mut().indexed_iter_mut().for_each(|((a, b), z)| {
            if a != b {
                *z *= (-rate * (nu2[a] + nu2[b])).exp();
            }
        });
    }

    fn snapshot(&self, time: f64) -> DensityGrid {
        self.inner.state(time)
    }

    fn diagnose(&self, state: &DensityGrid) -> StateDiagnostics {
        diagnostics(state)
    }

    fn boundary_tail(&self) -> f64 {
        self.inner.boundary_tail()
    }

    fn is_finite(&self) -> bool {
        self.inner.is_finite()
    }
}

/// Integrate `∂t f = -i[H, f] - t({ν², f} - 2 ν f ν)` with the Kronecker
/// regularization, under which the diagonal is untouched by the dissipator.
pub fn lindblad_evolve(
    f0: &DensityGrid,
    v: &Potential,
    nu: &[f64],
    cfg: &EvolverConfig,
) -> Result<Trajectory<DensityGrid>> {
    let spec = NoiseSpec::new(nu.to_vec(), 0)?;
    spec.check_grid(f0.grid())?;
    let warnings = cfg.validate(f0.grid())?;
    let mut engine = LindbladEngine {
        inner: QqEngine::von_neumann(f0, v)?,
        nu2: nu.iter().map(|s| s * s).collect(),
    };
    drive(&mut engine, f0.time(), cfg, warnings, true)
}

/// Closed-form noise average with the Hamiltonian neglected.
pub fn decay_predict(f0: &DensityGrid, nu: &[f64], t: f64) -> Result<DensityGrid> {
    NoiseSpec::new(nu.to_vec(), 0)?.check_grid(f0.grid())?;
    let mut out = f0.clone().with_time(f0.time() + t);
    out.values_mut().indexed_iter_mut().for_each(|((a, b), z)| {
        if a != b {
            *z *= (-0.5 * t * t * (nu[a] * nu[a] + nu[b] * nu[b])).exp();
        }
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleComparison {
    pub times: Vec<f64>,
    pub max_norm: Vec<f64>,
    pub l2: Vec<f64>,
    /// Grid 2-norm of `|SE|`.
    pub stderr_l2: Vec<f64>,
    /// Fraction of elements with `|diff| > 3 |SE|`.
    pub outlier_fraction: Vec<f64>,
    /// Largest `|diff|` among elements with zero standard error.
    pub zero_error_residual: Vec<f64>,
    pub judged: Vec<bool>,
    pub passed: Vec<bool>,
}

impl EnsembleComparison {
    pub fn pass(&self) -> bool {
        self.passed.iter().zip(&self.judged).all(|(p, j)| *p || !*j)
    }
}

/// Compare an ensemble average with a Lindblad trajectory recorded at the same times.
///
/// A judged time passes when the grid 2-norm of the difference is within three
/// times that of the standard error, at most [`OUTLIER_FRACTION`] of elements
/// lie beyond three standard errors, and elements with zero standard error
/// agree to [`ZERO_ERROR_TOLERANCE`].
pub fn compare_ensemble_vs_lindblad(
    report: &EnsembleReport,
    traj: &Trajectory<DensityGrid>,
) -> Result<EnsembleComparison> {
    if report.stderr.is_none() {
        return Err(Error::Config(
            "standard errors need at least two realizations".into(),
        ));
    }
    if report.times.len() != traj.times.len()
        || report.times.iter().zip(&traj.times).any(|(a, b)| (a - b).abs() > 1e-9)
    {
        return Err(Error::Config("ensemble and Lindblad runs record different times".into()));
    }
    let mut out = EnsembleComparison {
        times: report.times.clone(),
        max_norm: Vec::new(),
        l2: Vec::new(),
        stderr_l2: Vec::new(),
        outlier_fraction: Vec::new(),
        zero_error_residual: Vec::new(),
        judged: Vec::new(),
        passed: Vec::new(),
    };
    for (r, (mean, lind)) in report.mean.iter().zip(&traj.states).enumerate() {
        if mean.grid() != lind.grid() {
            return Err(Error::Config(format!(
                "grid mismatch: {:?} vs {:?}",
                mean.grid(),
                lind.grid()
            )));
        }
        let h = mean.grid().spacing();
        let se = report.stderr_abs(r).expect("checked above");
        let floor = NEGLIGIBLE_DIFFERENCE * lind.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
        let (mut max, mut sum, mut se_sum, mut outliers, mut zero_res) = (0.0f64, 0.0, 0.0, 0usize, 0.0f64);
        for ((a, b), s) in mean.values().iter().zip(lind.values()).zip(&se) {
            let d = (a - b).norm();
            max = max.max(d);
            sum += d * d;
            se_sum += s * s;
            if *s == 0.0 {
                zero_res = zero_res.max(d);
            } else if d > 3.0 * s && d > floor {
                outliers += 1;
            }
        }
        let l2 = sum.sqrt() * h;
        let se_l2 = se_sum.sqrt() * h;
        let frac = outliers as f64 / se.len() as f64;
        out.max_norm.push(max);
        out.l2.push(l2);
        out.stderr_l2.push(se_l2);
        out.outlier_fraction.push(frac);
        out.zero_error_residual.push(zero_res);
        out.judged.push(report.times[r] * report.max_nu <= JUDGED_NOISE_TIME);
        out.passed
            .push(l2 <= 3.0 * se_l2 && frac <= OUTLIER_FRACTION && zero_res <= ZERO_ERROR_TOLERANCE);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolvers::von_neumann_evolve;
    use crate::state::make_cat_state;

    fn cat() -> DensityGrid {
        make_cat_state(3.0, 0.5, GridSpec::new(32, 8.0).unwrap()).unwrap()
    }

    fn zero() -> Potential {
        Potential::Constant { value: 0.0 }
    }

    #[test]
    fn noise_statistics() {
        let spec = NoiseSpec::new(vec![1.0], 3).unwrap();
        let m = 100_000;
        let xs: Vec<f64> = (0..m).map(|k| sample_noise(&spec, k).values[0]).collect();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        assert!(mean.abs() < 4.0 / (m as f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn noise_is_deterministic_and_scaled() {
        let g = GridSpec::new(16, 4.0).unwrap();
        let spec = NoiseSpec::uniform(&g, 0.7, 11).unwrap();
        assert_eq!(sample_noise(&spec, 4), sample_noise(&spec, 4));
        assert_ne!(sample_noise(&spec, 4).values, sample_noise(&spec, 5).values);
        let quiet = NoiseSpec::uniform(&g, 0.0, 11).unwrap();
        assert!(sample_noise(&quiet, 2).values.iter().all(|v| *v == 0.0));
        assert!(NoiseSpec::new(vec![1.0, -0.1], 0).is_err());
    }

    #[test]
    fn decay_prediction_arithmetic() {
        let g = GridSpec::new(8, 2.0).unwrap();
        let f0 = DensityGrid::new(g, Array2::from_elem((8, 8), Complex64::new(1.0, 0.0)), 0.0).unwrap();
        let mut nu = [1.0; 8];
        nu[1] = 3f64.sqrt();
        let f = decay_predict(&f0, &nu, 2.0).unwrap();
        assert!((f.values()[[0, 1]].re - (-8.0f64).exp()).abs() < 1e-15);
        assert!((f.values()[[0, 2]].re - (-4.0f64).exp()).abs() < 1e-15);
        assert_eq!(f.values()[[1, 1]].re, 1.0);
        assert_eq!(decay_predict(&f0, &nu, 0.0).unwrap().values(), f0.values());
    }

    #[test]
    fn lindblad_without_hamiltonian_matches_closed_form() {
        let f0 = cat();
        let nu = vec![1.0; 32];
        let cfg = EvolverConfig::new(1e-3, 1000).recording_every(250).without_kinetic();
        let traj = lindblad_evolve(&f0, &zero(), &nu, &cfg).unwrap();
        let predicted = decay_predict(&f0, &nu, 1.0).unwrap();
        let last = traj.last().unwrap();
        let err = last
            .values()
            .iter()
            .zip(predicted.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "err {err}");
        for d in &traj.diagnostics {
            assert!((d.trace - traj.diagnostics[0].trace).norm() < 1e-12);
        }
        for i in 0..32 {
            assert_eq!(last.values()[[i, i]], f0.values()[[i, i]]);
        }
        // off-diagonal magnitudes never grow
        for w in traj.states.windows(2) {
            for (a, b) in w[0].values().iter().zip(w[1].values()) {
                assert!(b.norm() <= a.norm());
            }
        }
    }

    #[test]
    fn silent_noise_reduces_to_von_neumann() {
        let g = GridSpec::new(64, 8.0).unwrap();
        let f0 = make_cat_state(3.0, 0.5, g).unwrap();
        let v = Potential::Harmonic { omega: 0.5 };
        let cfg = EvolverConfig::new(0.005, 20).recording_every(10);
        let vn = von_neumann_evolve(&f0, &v, &cfg).unwrap();
        let spec = NoiseSpec::uniform(&g, 0.0, 1).unwrap();
        let ens = ensemble_evolve(&f0, &v, &spec, 3, NoiseMode::Quenched, &cfg).unwrap();
        let lind = lindblad_evolve(&f0, &v, &spec.nu, &cfg).unwrap();
        for ((a, b), c) in ens.mean.iter().zip(&vn.states).zip(&lind.states) {
            assert_eq!(a.values(), b.values());
            assert_eq!(c.values(), b.values());
        }
        let cmp = compare_ensemble_vs_lindblad(&ens, &lind).unwrap();
        assert!(cmp.pass());
        assert!(cmp.zero_error_residual.iter().all(|r| *r <= ZERO_ERROR_TOLERANCE));
    }

    #[test]
    fn quenched_ensemble_follows_decay_law() {
        let f0 = cat();
        let spec = NoiseSpec::uniform(f0.grid(), 1.0, 7).unwrap();
        let cfg = EvolverConfig::new(0.01, 200).recording_every(25).without_kinetic();
        let ens = ensemble_evolve(&f0, &zero(), &spec, 400, NoiseMode::Quenched, &cfg).unwrap();
        // diagonal is untouched in every realization
        for s in &ens.mean {
            for i in 0..32 {
                assert!((s.values()[[i, i]] - f0.values()[[i, i]]).norm() < 1e-12);
            }
        }
        let lind = lindblad_evolve(&f0, &zero(), &spec.nu, &cfg).unwrap();
        let cmp = compare_ensemble_vs_lindblad(&ens, &lind).unwrap();
        assert!(cmp.pass(), "{cmp:?}");
    }

    #[test]
    fn ensemble_is_independent_of_thread_count() {
        let f0 = cat();
        let spec = NoiseSpec::uniform(f0.grid(), 0.5, 9).unwrap();
        let cfg = EvolverConfig::new(0.05, 4).without_kinetic();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ensemble_evolve(&f0, &zero(), &spec, 37, NoiseMode::Quenched, &cfg).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.stderr, b.stderr);
    }

    #[test]
    fn single_realization_cannot_be_compared() {
        let f0 = cat();
        let spec = NoiseSpec::uniform(f0.grid(), 1.0, 1).unwrap();
        let cfg = EvolverConfig::new(0.1, 2).without_kinetic();
        let ens = ensemble_evolve(&f0, &zero(), &spec, 1, NoiseMode::Quenched, &cfg).unwrap();
        assert!(ens.stderr.is_none());
        let lind = lindblad_evolve(&f0, &zero(), &spec.nu, &cfg).unwrap();
        assert!(compare_ensemble_vs_lindblad(&ens, &lind).unwrap_err().is_configuration());
    }

    #[test]
    fn mismatched_noise_grid_is_rejected() {
        let f0 = cat();
        let spec = NoiseSpec::new(vec![1.0; 8], 1).unwrap();
        let cfg = EvolverConfig::new(0.1, 2).without_kinetic();
        let err = ensemble_evolve(&f0, &zero(), &spec, 2, NoiseMode::Quenched, &cfg).unwrap_err();
        assert!(err.is_configuration());
    }

    #[test]
    fn resampled_mode_runs_and_differs() {
        let f0 = cat();
        let spec = NoiseSpec::uniform(f0.grid(), 1.0, 2).unwrap();
        let cfg = EvolverConfig::new(0.1, 10).recording_every(5).without_kinetic();
        let q = ensemble_evolve(&f0, &zero(), &spec, 20, NoiseMode::Quenched, &cfg).unwrap();
        let r = ensemble_evolve(&f0, &zero(), &spec, 20, NoiseMode::Resampled, &cfg).unwrap();
        assert_eq!(q.times, r.times);
        assert_ne!(q.mean, r.mean);
    }

    #[test]
    fn realization_errors_carry_the_index() {
        let g = GridSpec::new(32, 8.0).unwrap();
        let f0 = make_cat_state(3.0, 0.5, g).unwrap();
        let spec = NoiseSpec::uniform(&g, 0.1, 1).unwrap();
        // any nonzero edge value trips a vanishing threshold on the first step
        let cfg = EvolverConfig {
            tail_threshold: 1e-300,
            ..EvolverConfig::new(0.005, 5)
        };
        match ensemble_evolve(&f0, &zero(), &spec, 2, NoiseMode::Quenched, &cfg).unwrap_err() {
            Error::Realization { index, source } => {
                assert_eq!(index, 0);
                assert!(matches!(*source, Error::BoundaryContamination { .. }));
            }
            e => panic!("unexpected {e}"),
        }
    }
}
