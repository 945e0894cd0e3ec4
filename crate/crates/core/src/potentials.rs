//! Potentials, the anharmonic superoperator field `ℰ(Q, q)` and the
//! piecewise-linear machinery.
//!
//! ```text
//! ℰ(Q, q) = (Q - q) v'((Q + q)/2) - v(Q) + v(q)
//! ```
//!
//! For polynomial potentials `ℰ` is evaluated from its Taylor form about the
//! midpoint `u = (Q + q)/2` with `d = Q - q`,
//!
//! ```text
//! ℰ = -2 Σ_{odd j ≥ 3} v^{(j)}(u) (d/2)^j / j!
//! ```
//!
//! which contains no terms at all below cubic order, so `ℰ` is exactly zero
//! for constant, linear and harmonic potentials rather than zero up to
//! cancellation error.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Linear coefficients that switch at fixed times; between switches the
/// force is spatially constant and time independent.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSchedule {
    /// Switch times, strictly increasing, starting at 0.
    pub times: Vec<f64>,
    pub slopes: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl LinearSchedule {
    pub fn validate(&self) -> Result<()> {
        let m = self.times.len();
        if m == 0 || self.slopes.len() != m || self.offsets.len() != m {
            return Err(Error::Domain(
                "linear schedule needs equally many times, slopes and offsets".into(),
            ));
        }
        if self.times[0] != 0.0 {
            return Err(Error::Domain("linear schedule must start at t = 0".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("schedule times must be strictly increasing".into()));
        }
        let all = self.times.iter().chain(&self.slopes).chain(&self.offsets);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Domain("schedule entries must be finite".into()));
        }
        Ok(())
    }

    /// `(slope, offset)` in force at time `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let i = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        (self.slopes[i], self.offsets[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearPotential {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseLinearPotential {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(Error::Domain(format!(
                "piecewise-linear potential needs at least two breakpoints and one value per \
                 breakpoint (got {} breakpoints, {} values)",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Domain("breakpoints and values must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("breakpoints must be strictly increasing".into()));
        }
        let slopes: Vec<f64> = breakpoints
            .windows(2)
            .zip(values.windows(2))
            .map(|(s, v)| (v[1] - v[0]) / (s[1] - s[0]))
            .collect();
        if slopes.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("segment slopes must be finite".into()));
        }
        Ok(Self {
            breakpoints,
            values,
            slopes,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// `δ_n = s_{n+1} - s_n`.
    pub fn linearity_lengths(&self) -> Vec<f64> {
        self.breakpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    /// Segment used at `x`. A breakpoint belongs to the segment on its left;
    /// points outside the range use the nearest end segment.
    fn segment(&self, x: f64) -> usize {
        self.breakpoints
            .partition_point(|&s| s < x)
            .saturating_sub(1)
            .min(self.slopes.len() - 1)
    }

    /// Linear interpolation inside the range, linear extrapolation outside.
    pub fn value(&self, x: f64) -> f64 {
        let k = self.segment(x);
        self.values[k] + self.slopes[k] * (x - self.breakpoints[k])
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.slopes[self.segment(x)]
    }

    /// `v(Q) - v(q)` as a sum of midpoint terms over the straight segments
    /// between `q` and `Q`, with partial end segments.
    pub fn segment_sum(&self, q: f64, big_q: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        for x in [q, big_q] {
            if !(x >= lo && x <= hi) {
                return Err(Error::Domain(format!(
                    "{x} lies outside the breakpoint range [{lo}, {hi}]"
                )));
            }
        }
        if q > big_q {
            return Ok(-self.segment_sum(big_q, q)?);
        }
        let first = self.breakpoints.partition_point(|&s| s <= q);
        let last = self.breakpoints.partition_point(|&s| s < big_q);
        let mut sum = 0.0;
        let mut a = q;
        for &b in self.breakpoints[first..last.max(first)].iter().chain([big_q].iter()) {
            sum += (b - a) * self.derivative(0.5 * (a + b));
            a = b;
        }
        Ok(sum)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Constant { value: f64 },
    /// `slope·x + offset`.
    Linear { slope: f64, offset: f64 },
    /// `ω² x² / 2`.
    Harmonic { omega: f64 },
    /// `λ x⁴`.
    Quartic { lambda: f64 },
    /// `Σ c_k x^k`.
    Polynomial { coeffs: Vec<f64> },
    PiecewiseLinear(PiecewiseLinearPotential),
    /// Linear potential with time-dependent coefficients.
    DrivenLinear(LinearSchedule),
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("potential parameter {name} must be finite")))
            }
        };
        match self {
            Potential::Constant { value } => finite("value", *value),
            Potential::Linear { slope, offset } => {
                finite("slope", *slope)?;
                finite("offset", *offset)
            }
            Potential::Harmonic { omega } => finite("omega", *omega),
            Potential::Quartic { lambda } => finite("lambda", *lambda),
            Potential::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::Domain("polynomial needs at least one coefficient".into()));
                }
                coeffs.iter().try_for_each(|c| finite("coefficient", *c))
            }
            Potential::PiecewiseLinear(_) => Ok(()),
            Potential::DrivenLinear(s) => s.validate(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Potential::Constant { .. } => "constant",
            Potential::Linear { .. } => "linear",
            Potential::Harmonic { .. } => "harmonic",
            Potential::Quartic { .. } => "quartic",
            Potential::Polynomial { .. } => "polynomial",
            Potential::PiecewiseLinear(_) => "piecewise_linear",
            Potential::DrivenLinear(_) => "driven_linear",
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Potential::DrivenLinear(s) if s.times.len() > 1)
    }

    /// Power-series coefficients at time `t`, if the potential is a polynomial.
    pub fn coefficients_at(&self, t: f64) -> Option<Vec<f64>> {
        match self {
            Potential::Constant { value } => Some(vec![*value]),
            Potential::Linear { slope, offset } => Some(vec![*offset, *slope]),
            Potential::Harmonic { omega } => Some(vec![0.0, 0.0, 0.5 * omega * omega]),
            Potential::Quartic { lambda } => Some(vec![0.0, 0.0, 0.0, 0.0, *lambda]),
            Potential::Polynomial { coeffs } => Some(coeffs.clone()),
            Potential::PiecewiseLinear(_) => None,
            Potential::DrivenLinear(s) => {
                let (slope, offset) = s.at(t);
                Some(vec![offset, slope])
            }
        }
    }

    /// True when `ℰ` vanishes identically: polynomials of degree at most two.
    pub fn has_vanishing_superoperator(&self) -> bool {
        match self.coefficients_at(0.0) {
            Some(c) => c.iter().skip(3).all(|&v| v == 0.0),
            None => false,
        }
    }

    pub fn value_at(&self, x: f64, t: f64) -> f64 {
        match self {
            Potential::PiecewiseLinear(p) => p.value(x),
            _ => horner(&self.coefficients_at(t).unwrap(), x),
        }
    }

    pub fn derivative_at(&self, x: f64, t: f64) -> f64 {
        match self {
            Potential::PiecewiseLinear(p) => p.derivative(x),
            _ => {
                let c = self.coefficients_at(t).unwrap();
                let d: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect();
                horner(&d, x)
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.value_at(x, 0.0)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.derivative_at(x, 0.0)
    }

    /// `ℰ(Q, q)` at a single point.
    pub fn superoperator(&self, big_q: f64, q: f64) -> f64 {
        match self.coefficients_at(0.0) {
            Some(c) => taylor_superoperator(&odd_derivative_series(&c), big_q, q),
            None => midpoint_term(self, q, big_q) - self.value(big_q) + self.value(q),
        }
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

fn binomial(k: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// For each odd `j ≥ 3`, the coefficients of `v^{(j)}(u)/j!` as a polynomial in `u`.
fn odd_derivative_series(c: &[f64]) -> Vec<(i32, Vec<f64>)> {
    (3..c.len())
        .step_by(2)
        .map(|j| {
            let series = (j..c.len()).map(|k| c[k] * binomial(k, j)).collect();
            (j as i32, series)
        })
        .collect()
}

fn taylor_superoperator(series: &[(i32, Vec<f64>)], big_q: f64, q: f64) -> f64 {
    let u = 0.5 * (big_q + q);
    let half_d = 0.5 * (big_q - q);
    -2.0 * series
        .iter()
        .map(|(j, s)| half_d.powi(*j) * horner(s, u))
        .sum::<f64>()
}

/// `(Q - q) v'((Q + q)/2)`, the single-segment midpoint approximation of `v(Q) - v(q)`.
pub fn midpoint_term(v: &Potential, q: f64, big_q: f64) -> f64 {
    (big_q - q) * v.derivative(0.5 * (big_q + q))
}

/// Dense `ℰ(Q, q)` on the position lattice, indexed `[Q][q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperoperatorField {
    grid: GridSpec,
    values: Array2<f64>,
}

impl SuperoperatorField {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.grid.n();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                worst = worst.max((self.values[[a, b]] + self.values[[b, a]]).abs());
            }
        }
        worst
    }
}

/// Build `ℰ` on the grid. Only the upper triangle is evaluated; the lower
/// triangle is its negation, so antisymmetry holds bit for bit.
pub fn superoperator_field(v: &Potential, grid: &GridSpec) -> SuperoperatorField {
    let n = grid.n();
    let x = grid.coords();
    let series = v.coefficients_at(0.0).map(|c| odd_derivative_series(&c));
    let eval = |a: usize, b: usize| match &series {
        Some(s) => taylor_superoperator(s, x[a], x[b]),
        None => v.superoperator(x[a], x[b]),
    };
    let mut values = Array2::<f64>::zeros((n, n));
    for a in 0..n {
        for b in a + 1..n {
            let e = eval(a, b);
            values[[a, b]] = e;
            values[[b, a]] = -e;
        }
    }
    SuperoperatorField {
        grid: *grid,
        values,
    }
}

/// Breakpoint spacing for [`linearize`].
#[derive(Clone, Debug, PartialEq)]
pub enum Spacing {
    Uniform(f64),
    List(Vec<f64>),
}

/// Sample `potential` at breakpoints `start + Σ δ_n` covering `range`.
pub fn linearize(
    potential: &Potential,
    spacing: &Spacing,
    range: (f64, f64),
) -> Result<PiecewiseLinearPotential> {
    let (start, end) = range;
    if !(start.is_finite() && end.is_finite() && end > start) {
        return Err(Error::Domain(format!("invalid linearization range [{start}, {end}]")));
    }
    let slack = 1e-12 * (end - start).abs().max(1.0);
    let breakpoints = match spacing {
        Spacing::Uniform(delta) => {
            if !(delta.is_finite() && *delta > 0.0) {
                return Err(Error::Domain(format!("linearity length must be positive, got {delta}")));
            }
            let steps = ((end - start) / delta - 1e-9).ceil().max(1.0) as usize;
            (0..=steps).map(|k| start + k as f64 * delta).collect::<Vec<_>>()
        }
        Spacing::List(deltas) => {
            if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                return Err(Error::Domain("linearity lengths must be positive".into()));
            }
            let mut points = vec![start];
            let mut s = start;
            for d in deltas {
                s += d;
                points.push(s);
            }
            if s < end - slack {
                return Err(Error::Domain(format!(
                    "linearity lengths reach {s}, short of the range end {end}"
                )));
            }
            points
        }
    };
    let values = breakpoints.iter().map(|&s| potential.value(s)).collect();
    PiecewiseLinearPotential::new(breakpoints, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::new(128, 10.0).unwrap()
    }

    /// Direct scalar evaluation of `(Q - q) v'(u) - v(Q) + v(q)` for `v = x⁴`.
    fn quartic_direct(big_q: f64, q: f64) -> f64 {
        let u = 0.5 * (big_q + q);
        (big_q - q) * 4.0 * u.powi(3) - big_q.powi(4) + q.powi(4)
    }

    #[test]
    fn superoperator_vanishes_up_to_harmonic() {
        for v in [
            Potential::Constant { value: 3.0 },
            Potential::Linear { slope: 2.0, offset: -1.0 },
            Potential::Harmonic { omega: 0.5 },
            Potential::Polynomial { coeffs: vec![1.0, -2.0, 0.3, 0.0] },
        ] {
            assert_eq!(superoperator_field(&v, &grid()).max_abs(), 0.0, "{v:?}");
            assert!(v.has_vanishing_superoperator());
        }
        let quartic = Potential::Quartic { lambda: 1.0 };
        assert!(!quartic.has_vanishing_superoperator());
        assert!(superoperator_field(&quartic, &grid()).max_abs() > 0.0);
    }

    #[test]
    fn quartic_superoperator_matches_scalar_formula() {
        let v = Potential::Quartic { lambda: 1.0 };
        assert!((v.superoperator(1.0, 0.0) + 0.5).abs() < 1e-15);
        assert_eq!(v.superoperator(0.0, 1.0), -v.superoperator(1.0, 0.0));
        for (a, b) in [(2.0, -1.5), (0.3, 0.9), (-3.0, 4.0)] {
            let e = v.superoperator(a, b);
            assert!((e - quartic_direct(a, b)).abs() < 1e-12 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn midpoint_examples() {
        let quartic = Potential::Quartic { lambda: 1.0 };
        assert_eq!(midpoint_term(&quartic, 0.0, 2.0), 8.0);
        let harmonic = Potential::Harmonic { omega: 1.0 };
        assert_eq!(midpoint_term(&harmonic, -1.0, 3.0), 4.0);
        assert_eq!(harmonic.value(3.0) - harmonic.value(-1.0), 4.0);
        assert_eq!(midpoint_term(&quartic, 1.7, 1.7), 0.0);
    }

    fn abs_potential() -> PiecewiseLinearPotential {
        let s: Vec<f64> = (-3..=3).map(f64::from).collect();
        let v = s.iter().map(|x: &f64| x.abs()).collect();
        PiecewiseLinearPotential::new(s, v).unwrap()
    }

    #[test]
    fn segment_sum_of_absolute_value() {
        let p = abs_potential();
        assert_eq!(p.segment_sum(-1.0, 2.0).unwrap(), 1.0);
        assert_eq!(p.segment_sum(0.4, 0.4).unwrap(), 0.0);
        assert_eq!(p.segment_sum(2.0, -1.0).unwrap(), -1.0);
        assert!(p.segment_sum(-4.0, 0.0).unwrap_err().is_configuration());
    }

    #[test]
    fn breakpoint_derivative_uses_left_segment() {
        let p = abs_potential();
        assert_eq!(p.derivative(0.0), -1.0);
        assert_eq!(p.derivative(1.0), 1.0);
        assert_eq!(p.derivative(-3.0), -1.0);
        // extrapolation outside the range
        assert_eq!(p.value(5.0), 5.0);
    }

    #[test]
    fn invalid_breakpoints_are_rejected() {
        assert!(PiecewiseLinearPotential::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(PiecewiseLinearPotential::new(vec![0.0], vec![1.0]).is_err());
        assert!(PiecewiseLinearPotential::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn linearized_harmonic_obeys_interpolation_bound() {
        let g = grid();
        let omega = 1.3;
        let v = Potential::Harmonic { omega };
        let delta = g.spacing() / 4.0;
        let pl = linearize(&v, &Spacing::Uniform(delta), (-g.half_width(), g.half_width())).unwrap();
        let bound = omega * omega / 8.0 * delta * delta + 1e-12;
        for x in g.coords() {
            assert!((pl.value(x) - v.value(x)).abs() <= bound);
        }
        // between the grid points as well
        for k in 0..1000 {
            let x = -10.0 + 0.02 * k as f64 + 0.0071;
            assert!((pl.value(x) - v.value(x)).abs() <= bound);
        }
    }

    #[test]
    fn linearized_linear_is_exact() {
        let v = Potential::Linear { slope: -0.7, offset: 2.0 };
        let pl = linearize(&v, &Spacing::Uniform(0.37), (-5.0, 5.0)).unwrap();
        for k in 0..100 {
            let x = -5.0 + 0.1 * k as f64;
            assert!((pl.value(x) - v.value(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn linearized_quartic_samples_breakpoints() {
        let v = Potential::Quartic { lambda: 1.0 };
        let pl = linearize(&v, &Spacing::Uniform(0.5), (-2.0, 2.0)).unwrap();
        let expected: Vec<f64> = (0..9).map(|k| -2.0 + 0.5 * k as f64).collect();
        assert_eq!(pl.breakpoints(), expected.as_slice());
        for (s, val) in pl.breakpoints().iter().zip(pl.values()) {
            assert_eq!(*val, s.powi(4));
        }
    }

    #[test]
    fn short_delta_list_is_a_domain_error() {
        let v = Potential::Harmonic { omega: 1.0 };
        let err = linearize(&v, &Spacing::List(vec![1.0, 1.0]), (-2.0, 2.0)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(linearize(&v, &Spacing::List(vec![1.5, 1.5, 1.0]), (-2.0, 2.0)).is_ok());
    }

    #[test]
    fn schedule_switches_at_given_times() {
        let s = LinearSchedule {
            times: vec![0.0, 1.0],
            slopes: vec![1.0, -2.0],
            offsets: vec![0.0, 0.5],
        };
        s.validate().unwrap();
        assert_eq!(s.at(0.5), (1.0, 0.0));
        assert_eq!(s.at(1.0), (-2.0, 0.5));
        let v = Potential::DrivenLinear(s);
        assert!(v.is_time_dependent());
        assert_eq!(v.value_at(2.0, 3.0), -3.5);
        assert!(v.has_vanishing_superoperator());
    }

    proptest! {
        #[test]
        fn midpoint_minus_difference_is_superoperator(
            c in proptest::collection::vec(-1.0f64..1.0, 1..7),
            q in -3.0f64..3.0,
            big_q in -3.0f64..3.0,
        ) {
            let v = Potential::Polynomial { coeffs: c };
            let lhs = midpoint_term(&v, q, big_q) - (v.value(big_q) - v.value(q));
            prop_assert!((lhs - v.superoperator(big_q, q)).abs() < 1e-10);
        }

        #[test]
        fn field_is_antisymmetric(lambda in -2.0f64..2.0, c3 in -1.0f64..1.0) {
            let g = GridSpec::new(16, 3.0).unwrap();
            let v = Potential::Polynomial { coeffs: vec![0.0, 0.1, 0.2, c3, lambda] };
            prop_assert_eq!(superoperator_field(&v, &g).antisymmetry_defect(), 0.0);
        }

        #[test]
        fn segment_sum_matches_difference(
            q in -3.0f64..3.0,
            big_q in -3.0f64..3.0,
            vals in proptest::collection::vec(-5.0f64..5.0, 7),
        ) {
            let s: Vec<f64> = (-3..=3).map(f64::from).collect();
            let p = PiecewiseLinearPotential::new(s, vals).unwrap();
            let sum = p.segment_sum(q, big_q).unwrap();
            prop_assert!((sum - (p.value(big_q) - p.value(q))).abs() < 1e-12);
            prop_assert_eq!(p.segment_sum(big_q, q).unwrap(), -sum);
        }
    }
}
