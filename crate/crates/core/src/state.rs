//! State containers and the transform chain between the phase-space `(x, p)`,
//! mixed `(x, y)` and density-matrix `(Q, q)` pictures.
//!
//! Conventions (with `ħ = m = 1`):
//!
//! ```text
//! f(x, y) = ∫ dp e^{ipy} f(x, p)
//! f(x, p) = (1/2π) ∫ dy e^{-ipy} f(x, y)
//! Q = x + y/2,  q = x - y/2
//! ```
//!
//! With this pair the trace `∫ dQ f(Q, Q)` equals the total phase-space
//! probability and `f(x, p)` is the Wigner function of the density matrix.

use std::f64::consts::PI;

use log::warn;
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{signed_mode, GridSpec};
use crate::spectral::{fft2, AxisFft};

/// Largest admissible boundary value of an initial state, relative to its peak.
pub const INITIAL_TAIL_LIMIT: f64 = 1e-12;

/// Classical ensemble density on the `2n × 2n` phase-space lattice, indexed `[x][p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceDistribution {
    grid: GridSpec,
    values: Array2<f64>,
    time: f64,
}

/// Partially transformed state on the `2n × 2n` mixed lattice, indexed `[x][y]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedDistribution {
    grid: GridSpec,
    values: Array2<Complex64>,
    time: f64,
}

/// Matrix elements `f(Q, q)` on the `n × n` position lattice, indexed `[Q][q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    grid: GridSpec,
    values: Array2<Complex64>,
    time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDiagnostics {
    pub trace: Complex64,
    /// `max |f(Q,q) - conj f(q,Q)|`.
    pub hermiticity_defect: f64,
    /// Minimum of the reconstructed `f(x, p)`. Negative values are reported,
    /// never clipped.
    pub min_reconstructed_density: f64,
}

fn check_shape(what: &str, shape: &[usize], expected: usize) -> Result<()> {
    if shape != [expected, expected] {
        return Err(Error::Config(format!(
            "{what} needs a {expected}x{expected} array, got {}x{}",
            shape[0], shape[1]
        )));
    }
    Ok(())
}

fn check_finite<'a>(what: &str, mut values: impl Iterator<Item = &'a f64>) -> Result<()> {
    if values.any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// Largest magnitude on the outer frame of a square array relative to its
/// largest magnitude overall. Zero for an all-zero array.
pub(crate) fn frame_ratio<T>(a: &Array2<T>, abs: impl Fn(&T) -> f64) -> f64 {
    let max = a.iter().map(&abs).fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    frame_max(a, abs) / max
}

fn frame_max<T>(a: &Array2<T>, abs: impl Fn(&T) -> f64) -> f64 {
    let (r, c) = a.dim();
    let mut edge: f64 = 0.0;
    for i in 0..r {
        edge = edge.max(abs(&a[[i, 0]])).max(abs(&a[[i, c - 1]]));
    }
    for j in 0..c {
        edge = edge.max(abs(&a[[0, j]])).max(abs(&a[[r - 1, j]]));
    }
    edge
}

impl PhaseSpaceDistribution {
    pub fn new(grid: GridSpec, values: Array2<f64>, time: f64) -> Result<Self> {
        check_shape("phase-space distribution", values.shape(), grid.phase_n())?;
        check_finite("phase-space distribution", values.iter())?;
        Ok(Self { grid, values, time })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// `Σ f Δx Δp`.
    pub fn mass(&self) -> f64 {
        self.values.sum() * self.grid.phase_cell()
    }

    /// Lattice indices `(i_x, i_p)` of the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = ((0, 0), f64::NEG_INFINITY);
        for ((i, k), &v) in self.values.indexed_iter() {
            if v > best.1 {
                best = ((i, k), v);
            }
        }
        best.0
    }

    /// Mean `(x, p)` of the distribution. Not meaningful for states that wrap
    /// around the periodic boundary.
    pub fn mean(&self) -> (f64, f64) {
        let (mut m, mut mx, mut mp) = (0.0, 0.0, 0.0);
        for ((i, k), &v) in self.values.indexed_iter() {
            m += v;
            mx += v * self.grid.phase_x(i);
            mp += v * self.grid.momentum(k);
        }
        (mx / m, mp / m)
    }

    /// See [`DensityGrid::boundary_tail`].
    pub fn boundary_tail(&self) -> f64 {
        frame_ratio(&self.values, |v| v.abs())
    }
}

impl MixedDistribution {
    pub fn new(grid: GridSpec, values: Array2<Complex64>, time: f64) -> Result<Self> {
        check_shape("mixed distribution", values.shape(), grid.phase_n())?;
        Ok(Self { grid, values, time })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

impl DensityGrid {
    pub fn new(grid: GridSpec, values: Array2<Complex64>, time: f64) -> Result<Self> {
        check_shape("density grid", values.shape(), grid.n())?;
        if values.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numeric("density grid contains non-finite values".into()));
        }
        Ok(Self { grid, values, time })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// `h Σ_a f(Q_a, Q_a)`.
    pub fn trace(&self) -> Complex64 {
        self.values.diag().sum() * self.grid.spacing()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.grid.n();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a..n {
                let d = (self.values[[a, b]] - self.values[[b, a]].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Largest magnitude on the lattice boundary relative to the largest
    /// magnitude overall; measures how close the state is to wrapping around.
    pub fn boundary_tail(&self) -> f64 {
        frame_ratio(&self.values, |z| z.norm())
    }

    /// The state with `Q` and `q` swapped and values conjugated.
    pub fn adjoint(&self) -> Self {
        let values = Array2::from_shape_fn(self.values.dim(), |(a, b)| self.values[[b, a]].conj());
        Self {
            grid: self.grid,
            values,
            time: self.time,
        }
    }
}

/// Apply a centred length-`2n` DFT along every row: rows are indexed from
/// `-n` to `n - 1` on both the input and the output side.
pub(crate) fn centred_rows(
    a: &mut Array2<Complex64>,
    fft: &mut AxisFft,
    inverse: bool,
    scale: f64,
) {
    let len = fft.len();
    let half = len / 2;
    let data = a.as_slice_mut().expect("standard layout");
    for row in data.chunks_exact_mut(len) {
        row.rotate_left(half);
        if inverse {
            fft.inverse(row);
        } else {
            fft.forward(row);
        }
        row.rotate_left(half);
        for z in row.iter_mut() {
            *z *= scale;
        }
    }
}

/// `f(x, y_j) = Δp Σ_k e^{i p_k y_j} f(x, p_k)` along every `x` row.
pub(crate) fn p_to_y(grid: &GridSpec, a: &mut Array2<Complex64>, fft: &mut AxisFft) {
    centred_rows(a, fft, true, grid.dp());
}

/// `f(x, p_k) = (h/2π) Σ_j e^{-i p_k y_j} f(x, y_j)` along every `x` row.
pub(crate) fn y_to_p(grid: &GridSpec, a: &mut Array2<Complex64>, fft: &mut AxisFft) {
    centred_rows(a, fft, false, grid.dy() / (2.0 * PI));
}

pub fn xp_to_xy(f: &PhaseSpaceDistribution) -> MixedDistribution {
    let mut values = f.values.mapv(|v| Complex64::new(v, 0.0));
    p_to_y(&f.grid, &mut values, &mut AxisFft::new(f.grid.phase_n()));
    MixedDistribution {
        grid: f.grid,
        values,
        time: f.time,
    }
}

/// Full complex inverse of [`xp_to_xy`]; the imaginary part vanishes for
/// inputs with `f(x,-y) = conj f(x,y)`.
pub fn xy_to_xp_complex(f: &MixedDistribution) -> Array2<Complex64> {
    let mut values = f.values.clone();
    y_to_p(&f.grid, &mut values, &mut AxisFft::new(f.grid.phase_n()));
    values
}

/// Inverse of [`xp_to_xy`], keeping the real part.
pub fn xy_to_xp(f: &MixedDistribution) -> PhaseSpaceDistribution {
    let values = xy_to_xp_complex(f).mapv(|z| z.re);
    PhaseSpaceDistribution {
        grid: f.grid,
        values,
        time: f.time,
    }
}

/// Gather `f(Q, q)` from the mixed lattice. Every `(Q, q)` point is an `(x, y)`
/// lattice point, so no interpolation happens. Points with `|Q - q| > L` are
/// read from their periodic image inside `|y| ≤ L`; on `|Q - q| = L` the two
/// images are averaged.
pub fn xy_to_qq(f: &MixedDistribution, target: &GridSpec) -> Result<DensityGrid> {
    if f.grid != *target {
        return Err(Error::Config(format!(
            "mixed state on {:?} cannot be remapped onto {:?}",
            f.grid, target
        )));
    }
    let values = gather_qq(&f.grid, &f.values);
    Ok(DensityGrid {
        grid: f.grid,
        values,
        time: f.time,
    })
}

pub(crate) fn gather_qq(grid: &GridSpec, xy: &Array2<Complex64>) -> Array2<Complex64> {
    let n = grid.n();
    let nn = 2 * n;
    let half = (n / 2) as i64;
    let ni = n as i64;
    Array2::from_shape_fn((n, n), |(a, b)| {
        let s = a + b;
        let d = a as i64 - b as i64;
        let direct = |s: usize, d: i64| xy[[s, (d + ni) as usize]];
        let image_s = (s + n) % nn;
        if d.abs() < half {
            direct(s, d)
        } else if d > half {
            direct(image_s, d - ni)
        } else if d < -half {
            direct(image_s, d + ni)
        } else {
            0.5 * (direct(s, d) + direct(image_s, -d))
        }
    })
}

/// Spectral inverse of [`xy_to_qq`]: the trigonometric interpolant of
/// `f(Q, q)` evaluated on the mixed lattice and windowed to `|y| ≤ L`.
pub fn qq_to_xy(f: &DensityGrid) -> MixedDistribution {
    MixedDistribution {
        grid: f.grid,
        values: scatter_xy(&f.grid, &f.values),
        time: f.time,
    }
}

pub(crate) fn scatter_xy(grid: &GridSpec, qq: &Array2<Complex64>) -> Array2<Complex64> {
    let n = grid.n();
    let nn = 2 * n;
    let half = n / 2;
    let mut coeffs = qq.clone();
    fft2(&mut coeffs, &mut AxisFft::new(n), false);

    // Nyquist modes are split evenly between ±n/2 so the interpolant is real
    // for real data.
    let modes = |i: usize| -> [(i64, f64); 2] {
        if i == half {
            [(-(half as i64), 0.5), (half as i64, 0.5)]
        } else {
            [(signed_mode(i, n), 1.0), (0, 0.0)]
        }
    };
    let wrap = |m: i64| m.rem_euclid(nn as i64) as usize;
    let norm = 1.0 / (n * n) as f64;
    let mut big = Array2::<Complex64>::zeros((nn, nn));
    for ((i1, i2), &c) in coeffs.indexed_iter() {
        let c = c * norm;
        for (m1, w1) in modes(i1) {
            for (m2, w2) in modes(i2) {
                if w1 * w2 != 0.0 {
                    big[[wrap(m1 + m2), wrap(m1 - m2)]] += c * (w1 * w2);
                }
            }
        }
    }
    fft2(&mut big, &mut AxisFft::new(nn), true);

    Array2::from_shape_fn((nn, nn), |(s, j)| {
        if j.abs_diff(n) > half {
            Complex64::default()
        } else {
            big[[s, (j + n) % nn]]
        }
    })
}

pub fn phase_space_to_density(f: &PhaseSpaceDistribution) -> DensityGrid {
    let xy = xp_to_xy(f);
    DensityGrid {
        grid: f.grid,
        values: gather_qq(&f.grid, &xy.values),
        time: f.time,
    }
}

/// Reconstruct the phase-space picture (Wigner function) of a density grid.
pub fn density_to_phase_space(f: &DensityGrid) -> PhaseSpaceDistribution {
    xy_to_xp(&qq_to_xy(f))
}

pub fn diagnostics(f: &DensityGrid) -> StateDiagnostics {
    let wigner = xy_to_xp_complex(&qq_to_xy(f));
    let min_reconstructed_density = wigner.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if min_reconstructed_density < 0.0 {
        log::debug!(
            "reconstructed phase-space density reaches {min_reconstructed_density:.3e} at t = {}",
            f.time
        );
    }
    StateDiagnostics {
        trace: f.trace(),
        hermiticity_defect: f.hermiticity_defect(),
        min_reconstructed_density,
    }
}

/// Normalized Gaussian ensemble centred on `(center_x, center_p)`.
pub fn make_gaussian_phase_space(
    center_x: f64,
    center_p: f64,
    sigma_x: f64,
    sigma_p: f64,
    grid: GridSpec,
) -> Result<PhaseSpaceDistribution> {
    for (name, s) in [("sigma_x", sigma_x), ("sigma_p", sigma_p)] {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {s}")));
        }
    }
    if !(center_x.is_finite() && center_p.is_finite()) {
        return Err(Error::Domain("Gaussian centre must be finite".into()));
    }
    let nn = grid.phase_n();
    let raw = Array2::from_shape_fn((nn, nn), |(i, k)| {
        let u = (grid.phase_x(i) - center_x) / sigma_x;
        let w = (grid.momentum(k) - center_p) / sigma_p;
        (-0.5 * (u * u + w * w)).exp()
    });
    // The analytic peak is 1, so the frame maximum is already relative.
    let tail = frame_max(&raw, |v| *v);
    if tail > INITIAL_TAIL_LIMIT {
        return Err(Error::Domain(format!(
            "Gaussian at ({center_x}, {center_p}) with widths ({sigma_x}, {sigma_p}) \
             reaches {tail:.2e} of its peak at the grid boundary"
        )));
    }
    let mass = raw.sum() * grid.phase_cell();
    PhaseSpaceDistribution::new(grid, raw / mass, 0.0)
}

/// Density grid `ψ(Q) ψ*(q)` of a wave function sampled on the position lattice,
/// normalized to unit trace.
pub fn pure_state(psi: &[Complex64], grid: GridSpec) -> Result<DensityGrid> {
    let n = grid.n();
    if psi.len() != n {
        return Err(Error::Config(format!(
            "wave function has {} samples, grid has {n}",
            psi.len()
        )));
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.spacing();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Domain("wave function has zero or non-finite norm".into()));
    }
    let values = Array2::from_shape_fn((n, n), |(a, b)| psi[a] * psi[b].conj() / norm);
    DensityGrid::new(grid, values, 0.0)
}

/// Superposition of two Gaussian packets of width `sigma` at `±separation/2`.
pub fn make_cat_state(separation: f64, sigma: f64, grid: GridSpec) -> Result<DensityGrid> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Domain(format!("cat-state sigma must be positive, got {sigma}")));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::Domain(format!(
            "cat-state separation must be non-negative, got {separation}"
        )));
    }
    let packet = |x: f64, c: f64| (-(x - c).powi(2) / (4.0 * sigma * sigma)).exp();
    let psi: Vec<Complex64> = grid
        .coords()
        .into_iter()
        .map(|x| Complex64::new(packet(x, 0.5 * separation) + packet(x, -0.5 * separation), 0.0))
        .collect();
    let peak = psi.iter().map(|z| z.re).fold(0.0, f64::max);
    let edge = psi[0].re.max(psi[grid.n() - 1].re);
    if edge > INITIAL_TAIL_LIMIT * peak {
        return Err(Error::Domain(format!(
            "cat state with separation {separation} and sigma {sigma} does not fit in [-{0}, {0})",
            grid.half_width()
        )));
    }
    pure_state(&psi, grid)
}

/// Warn when a state has developed negative reconstructed densities; after the
/// first warning, only when the minimum has doubled in magnitude.
pub(crate) fn report_negativity(
    d: &StateDiagnostics,
    time: f64,
    worst: &mut f64,
    warnings: &mut Vec<String>,
) {
    if d.min_reconstructed_density < -1e-9 && d.min_reconstructed_density < 2.0 * *worst {
        *worst = d.min_reconstructed_density;
        let msg = format!(
            "negative reconstructed phase-space density {:.3e} at t = {time}",
            d.min_reconstructed_density
        );
        warn!("{msg}");
        warnings.push(msg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GridSpec {
        GridSpec::new(128, 10.0).unwrap()
    }

    fn max_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn coherent() -> PhaseSpaceDistribution {
        let s = 0.5f64.sqrt();
        make_gaussian_phase_space(0.0, 0.0, s, s, grid()).unwrap()
    }

    #[test]
    fn gaussian_is_normalized_with_peak_at_centre() {
        let f = coherent();
        assert!((f.mass() - 1.0).abs() < 1e-9);
        let g = grid();
        let f = make_gaussian_phase_space(1.0, 0.0, 0.7, 0.7, g).unwrap();
        let (i, k) = f.argmax();
        assert!((g.phase_x(i) - 1.0).abs() <= 0.5 * g.phase_dx());
        assert!(g.momentum(k).abs() <= 0.5 * g.dp());
    }

    #[test]
    fn gaussian_touching_boundary_is_rejected() {
        let err = make_gaussian_phase_space(8.0, 0.0, 1.0, 1.0, grid()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(make_gaussian_phase_space(0.0, 0.0, 0.0, 1.0, grid()).is_err());
    }

    #[test]
    fn minimum_uncertainty_gaussian_stays_positive() {
        let rho = phase_space_to_density(&coherent());
        let d = diagnostics(&rho);
        assert!(d.min_reconstructed_density >= -1e-9, "{}", d.min_reconstructed_density);
        assert!((d.trace.re - 1.0).abs() < 1e-9);
        assert!(d.trace.im.abs() < 1e-12);
    }

    #[test]
    fn p_independent_state_concentrates_at_zero_lag() {
        let g = GridSpec::new(16, 4.0).unwrap();
        let f = PhaseSpaceDistribution::new(g, Array2::from_elem((32, 32), 1.0), 0.0).unwrap();
        let xy = xp_to_xy(&f);
        for ((_, j), z) in xy.values().indexed_iter() {
            if j == g.n() {
                assert!((z.re - g.dp() * 32.0).abs() < 1e-12);
            } else {
                assert!(z.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn mixed_transform_matches_direct_sum() {
        let g = GridSpec::new(16, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals = Array2::from_shape_fn((32, 32), |_| rng.random::<f64>());
        let f = PhaseSpaceDistribution::new(g, vals.clone(), 0.0).unwrap();
        let xy = xp_to_xy(&f);
        for _ in 0..3 {
            let i = rng.random_range(0..32);
            let j = rng.random_range(0..32);
            let direct: Complex64 = (0..32)
                .map(|k| {
                    Complex64::from_polar(g.dp(), g.momentum(k) * g.lag(j)) * vals[[i, k]]
                })
                .sum();
            assert!((direct - xy.values()[[i, j]]).norm() < 1e-12);
            // real input: f(x, -y) = conj f(x, y)
            if j != 0 {
                let mirrored = xy.values()[[i, 32 - j]];
                assert!((mirrored - xy.values()[[i, j]].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn point_mass_at_zero_lag_lands_on_diagonal() {
        let g = GridSpec::new(16, 4.0).unwrap();
        let mut xy = Array2::zeros((32, 32));
        xy[[10, g.n()]] = Complex64::new(1.0, 0.0);
        let rho = xy_to_qq(&MixedDistribution::new(g, xy, 0.0).unwrap(), &g).unwrap();
        for ((a, b), z) in rho.values().indexed_iter() {
            let expected = if a == 5 && b == 5 { 1.0 } else { 0.0 };
            assert_eq!(z.re, expected);
        }
    }

    #[test]
    fn remap_onto_other_grid_is_a_configuration_error() {
        let g = GridSpec::new(16, 4.0).unwrap();
        let other = GridSpec::new(16, 5.0).unwrap();
        let xy = MixedDistribution::new(g, Array2::zeros((32, 32)), 0.0).unwrap();
        assert!(xy_to_qq(&xy, &other).unwrap_err().is_configuration());
    }

    #[test]
    fn real_phase_space_gives_hermitian_density() {
        let g = GridSpec::new(32, 6.0).unwrap();
        let f = make_gaussian_phase_space(0.5, -0.3, 0.6, 0.9, g).unwrap();
        assert!(phase_space_to_density(&f).hermiticity_defect() < 1e-12);
    }

    #[test]
    fn localized_state_survives_full_chain() {
        let f = coherent();
        let back = density_to_phase_space(&phase_space_to_density(&f));
        let err = f
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn parseval_on_the_lag_transform() {
        let g = GridSpec::new(16, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vals = Array2::from_shape_fn((32, 32), |_| rng.random::<f64>() - 0.5);
        let f = PhaseSpaceDistribution::new(g, vals.clone(), 0.0).unwrap();
        let xy = xp_to_xy(&f);
        let lhs: f64 = xy.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * g.dy();
        let rhs: f64 = vals.iter().map(|v| v * v).sum::<f64>() * g.dp() * 2.0 * PI;
        assert!(((lhs - rhs) / rhs).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_are_invariant_under_adjoint() {
        let rho = make_cat_state(3.0, 0.5, GridSpec::new(64, 8.0).unwrap()).unwrap();
        let a = diagnostics(&rho);
        let b = diagnostics(&rho.adjoint());
        assert!((a.trace - b.trace).norm() < 1e-14);
        assert!((a.hermiticity_defect - b.hermiticity_defect).abs() < 1e-14);
        assert!((a.min_reconstructed_density - b.min_reconstructed_density).abs() < 1e-12);
        // cat states have an interference fringe with negative Wigner values
        assert!(a.min_reconstructed_density < 0.0);
    }

    #[test]
    fn planted_defect_is_detected() {
        let mut rho = make_cat_state(2.0, 0.5, GridSpec::new(32, 8.0).unwrap()).unwrap();
        rho.values_mut()[[3, 20]] += Complex64::new(0.0, 1e-3);
        assert!(rho.hermiticity_defect() >= 1e-3);
    }

    #[test]
    fn cat_state_has_unit_trace() {
        let rho = make_cat_state(4.0, 0.6, GridSpec::new(64, 10.0).unwrap()).unwrap();
        assert!((rho.trace() - 1.0).norm() < 1e-12);
        assert!(make_cat_state(18.0, 0.8, GridSpec::new(64, 10.0).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn qq_roundtrip_is_identity(seed in any::<u64>()) {
            let g = GridSpec::new(16, 2.5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals = Array2::from_shape_fn((16, 16), |_| {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let rho = DensityGrid::new(g, vals, 0.0).unwrap();
            let back = xy_to_qq(&qq_to_xy(&rho), &g).unwrap();
            prop_assert!(max_diff(rho.values(), back.values()) < 1e-12);
        }

        #[test]
        fn xp_xy_roundtrip_is_identity(seed in any::<u64>()) {
            let g = GridSpec::new(8, 1.5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals = Array2::from_shape_fn((16, 16), |_| 1e3 * (rng.random::<f64>() - 0.5));
            let f = PhaseSpaceDistribution::new(g, vals.clone(), 0.0).unwrap();
            let back = xy_to_xp(&xp_to_xy(&f));
            let err = vals.iter().zip(back.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err < 1e-12 * 1e3);
        }

        #[test]
        fn hermitian_input_keeps_real_wigner(seed in any::<u64>()) {
            let g = GridSpec::new(8, 2.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut vals = Array2::<Complex64>::zeros((8, 8));
            for a in 0..8 {
                for b in a..8 {
                    let z = Complex64::new(rng.random::<f64>(), if a == b { 0.0 } else { rng.random::<f64>() });
                    vals[[a, b]] = z;
                    vals[[b, a]] = z.conj();
                }
            }
            let w = xy_to_xp_complex(&qq_to_xy(&DensityGrid::new(g, vals, 0.0).unwrap()));
            prop_assert!(w.iter().all(|z| z.im.abs() < 1e-12));
        }
    }
}
