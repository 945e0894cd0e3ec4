//! Uniform periodic grids.
//!
//! A [`GridSpec`] fixes the position lattice `Q, q ∈ [-L, L)` with `n` points
//! and spacing `h = 2L/n`. Everything else is derived from it:
//!
//! * the phase-space lattice `(x, p)` has `2n × 2n` points, `x` with spacing
//!   `h/2` on `[-L, L)` and `p` with spacing `π/(2L)` centred on zero;
//! * the mixed lattice `(x, y)` shares the `x` axis and has `y` spacing `h`
//!   on `[-2L, 2L)`, which makes `y` the discrete Fourier partner of `p`.
//!
//! With these choices every `(Q, q)` lattice point `(x + y/2, x - y/2)` is an
//! `(x, y)` lattice point, so going from `(x, y)` to `(Q, q)` is a pure
//! gather with no interpolation.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Smallest accepted number of points per axis.
pub const MIN_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    n: usize,
    half_width: f64,
}

impl GridSpec {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < MIN_POINTS || n % 2 != 0 {
            return Err(Error::Domain(format!(
                "grid needs an even number of points >= {MIN_POINTS}, got {n}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Domain(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self { n, half_width })
    }

    /// Points per axis of the position lattice.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Position lattice spacing `h`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Position of lattice index `i` (also used for `Q` and `q`).
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// Index of the lattice point nearest to `x`, if inside `[-L, L)`.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        let i = ((x + self.half_width) / self.spacing()).round();
        (i >= 0.0 && (i as usize) < self.n).then_some(i as usize)
    }

    /// Points per axis of the phase-space and mixed lattices.
    pub fn phase_n(&self) -> usize {
        2 * self.n
    }

    /// Spacing of the fine `x` axis shared by the phase-space and mixed lattices.
    pub fn phase_dx(&self) -> f64 {
        0.5 * self.spacing()
    }

    pub fn phase_x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.phase_dx()
    }

    pub fn dp(&self) -> f64 {
        PI / (2.0 * self.half_width)
    }

    /// Momentum at index `k`; the axis is `[-n dp, n dp)`.
    pub fn momentum(&self, k: usize) -> f64 {
        (k as f64 - self.n as f64) * self.dp()
    }

    /// Largest representable momentum magnitude.
    pub fn momentum_half_width(&self) -> f64 {
        self.n as f64 * self.dp()
    }

    pub fn dy(&self) -> f64 {
        self.spacing()
    }

    /// Separation coordinate `y` at index `j`; the axis is `[-2L, 2L)`.
    pub fn lag(&self, j: usize) -> f64 {
        (j as f64 - self.n as f64) * self.dy()
    }

    /// Area element of the phase-space lattice.
    pub fn phase_cell(&self) -> f64 {
        self.phase_dx() * self.dp()
    }
}

/// Signed mode number for FFT index `i` of a length-`len` transform.
pub(crate) fn signed_mode(i: usize, len: usize) -> i64 {
    if i < len / 2 {
        i as i64
    } else {
        i as i64 - len as i64
    }
}

/// Angular wavenumbers of a length-`len` FFT over period `period`, in FFT order.
/// The Nyquist entry carries `-π len / period`.
pub(crate) fn wavenumbers(len: usize, period: f64) -> Vec<f64> {
    let base = 2.0 * PI / period;
    (0..len).map(|i| signed_mode(i, len) as f64 * base).collect()
}

/// Like [`wavenumbers`] but with the Nyquist entry zeroed, as required for odd
/// derivatives of real data.
pub(crate) fn odd_wavenumbers(len: usize, period: f64) -> Vec<f64> {
    let mut k = wavenumbers(len, period);
    k[len / 2] = 0.0;
    k
}
