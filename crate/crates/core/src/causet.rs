//! Poisson sprinkling and the probability of an empty region.
//!
//! Elements are sprinkled with density `ρ` per unit 4-volume, so a region of
//! 4-volume `V₄` is empty with probability `exp(-ρ V₄)`. The bare estimate
//! `exp(-Δr³)` drops the geometric factor `4π/3`; both are reported.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

/// Fewest trials accepted by [`void_probability_mc`].
pub const MIN_TRIALS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Geometry {
    /// Spatial ball of radius `Δr` times a time interval.
    BallTimesInterval,
    /// Spatial cube of side `2Δr` times a time interval.
    Box,
}

impl std::str::FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ball" | "ball_times_interval" => Ok(Geometry::BallTimesInterval),
            "box" => Ok(Geometry::Box),
            other => Err(Error::validation(
                "geometry",
                format!("expected `ball` or `box`, got `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SprinkleRegion {
    pub dr: f64,
    pub duration: f64,
    pub geometry: Geometry,
    /// Elements per unit 4-volume.
    pub density: f64,
}

impl SprinkleRegion {
    /// Ball of radius `dr` lasting one time unit at unit density.
    pub fn ball(dr: f64) -> Self {
        Self {
            dr,
            duration: 1.0,
            geometry: Geometry::BallTimesInterval,
            density: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, value) in [("dr", self.dr), ("duration", self.duration), ("rho", self.density)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(key, format!("must be positive, got {value}")));
            }
        }
        Ok(())
    }

    pub fn spatial_volume(&self) -> f64 {
        match self.geometry {
            Geometry::BallTimesInterval => 4.0 / 3.0 * PI * self.dr.powi(3),
            Geometry::Box => (2.0 * self.dr).powi(3),
        }
    }

    pub fn four_volume(&self) -> f64 {
        self.spatial_volume() * self.duration
    }

    pub fn expected_count(&self) -> f64 {
        self.density * self.four_volume()
    }

    /// `exp(-ρ V₄)`.
    pub fn void_probability(&self) -> f64 {
        (-self.expected_count()).exp()
    }
}

/// `(exp(-Δr³), exp(-(4π/3) Δr³))` for a unit-density ball lasting one time unit.
pub fn void_probability_analytic(dr: f64) -> Result<(f64, f64)> {
    let region = SprinkleRegion::ball(dr);
    region.validate()?;
    Ok(((-dr.powi(3)).exp(), region.void_probability()))
}

/// One sprinkling as `[t, x, y, z]` points; deterministic in `(seed, trial)`.
pub fn sprinkle(region: &SprinkleRegion, seed: u64, trial: u64) -> Result<Vec<[f64; 4]>> {
    region.validate()?;
    let mut rng = stream(seed, Domain::Sprinkle, trial);
    let count = Poisson::new(region.expected_count())
        .map_err(|e| Error::Domain(format!("poisson mean: {e}")))?
        .sample(&mut rng) as usize;
    let r = region.dr;
    let points = (0..count)
        .map(|_| {
            let t = rng.random::<f64>() * region.duration;
            loop {
                let p = [0; 3].map(|_| (2.0 * rng.random::<f64>() - 1.0) * r);
                let inside = match region.geometry {
                    Geometry::Box => true,
                    Geometry::BallTimesInterval => p.iter().map(|c| c * c).sum::<f64>() <= r * r,
                };
                if inside {
                    break [t, p[0], p[1], p[2]];
                }
            }
        })
        .collect();
    Ok(points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoidEstimate {
    pub region: SprinkleRegion,
    /// `exp(-Δr³)`.
    pub analytic_bare: f64,
    /// `exp(-ρ V₄)`.
    pub analytic_exact: f64,
    pub empirical: f64,
    /// Binomial standard error of the empirical fraction under the exact law.
    pub stderr: f64,
    pub empty_trials: usize,
    pub n_trials: usize,
}

impl VoidEstimate {
    pub fn deviation_in_stderr(&self) -> f64 {
        let d = (self.empirical - self.analytic_exact).abs();
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.deviation_in_stderr() <= sigmas
    }
}

/// Fraction of `n_trials` independent sprinklings with no element in `region`.
pub fn void_probability_mc(region: &SprinkleRegion, n_trials: usize, seed: u64) -> Result<VoidEstimate> {
    region.validate()?;
    if n_trials < MIN_TRIALS {
        return Err(Error::validation(
            "trials",
            format!("need at least {MIN_TRIALS}, got {n_trials}"),
        ));
    }
    let empty_trials = (0..n_trials as u64)
        .into_par_iter()
        .map(|k| sprinkle(region, seed, k).map(|pts| pts.is_empty() as usize))
        .sum::<Result<usize>>()?;
    let exact = region.void_probability();
    Ok(VoidEstimate {
        region: *region,
        analytic_bare: (-region.dr.powi(3)).exp(),
        analytic_exact: exact,
        empirical: empty_trials as f64 / n_trials as f64,
        stderr: (exact * (1.0 - exact) / n_trials as f64).sqrt(),
        empty_trials,
        n_trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_values() {
        let (bare, exact) = void_probability_analytic(1.0).unwrap();
        assert!((bare - (-1.0f64).exp()).abs() < 1e-15);
        assert!((exact - (-4.0 * PI / 3.0).exp()).abs() < 1e-15);
        let (bare, _) = void_probability_analytic(2.0).unwrap();
        assert!((bare - 3.3546e-4).abs() < 1e-8);
        let (p, e) = void_probability_analytic(1e-6).unwrap();
        assert!(1.0 - p < 1e-15 && 1.0 - e < 1e-15);
        assert!(void_probability_analytic(0.0).is_err());
    }

    #[test]
    fn void_probability_decreases_with_radius_and_density() {
        let mut prev = 1.0;
        for dr in [0.1, 0.5, 1.0, 1.5] {
            let p = SprinkleRegion::ball(dr).void_probability();
            assert!(p < prev);
            prev = p;
        }
        let thin = SprinkleRegion::ball(1.0);
        let dense = SprinkleRegion { density: 2.0, ..thin };
        assert!(dense.void_probability() < thin.void_probability());
    }

    #[test]
    fn sprinkle_counts_are_poisson() {
        // cube side 2Δr with 8Δr³ = 10
        let region = SprinkleRegion {
            dr: (10.0f64 / 8.0).cbrt(),
            geometry: Geometry::Box,
            ..SprinkleRegion::ball(1.0)
        };
        assert!((region.four_volume() - 10.0).abs() < 1e-12);
        let trials = 10_000;
        let counts: Vec<f64> = (0..trials)
            .map(|k| sprinkle(&region, 5, k).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / trials as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        assert!((mean - 10.0).abs() < 0.4, "mean {mean}");
        assert!((var - 10.0).abs() < 1.0, "var {var}");
    }

    #[test]
    fn sprinkled_points_lie_in_the_region() {
        let region = SprinkleRegion {
            duration: 2.0,
            ..SprinkleRegion::ball(1.3)
        };
        for k in 0..50 {
            for [t, x, y, z] in sprinkle(&region, 1, k).unwrap() {
                assert!((0.0..2.0).contains(&t));
                assert!(x * x + y * y + z * z <= 1.3 * 1.3);
            }
        }
        assert_eq!(sprinkle(&region, 1, 7).unwrap(), sprinkle(&region, 1, 7).unwrap());
    }

    #[test]
    fn tiny_region_is_almost_always_empty() {
        let est = void_probability_mc(&SprinkleRegion::ball(1e-3), 1000, 2).unwrap();
        assert!(est.empty_trials >= 999);
    }

    #[test]
    fn large_void_never_occurs() {
        let est = void_probability_mc(&SprinkleRegion::ball(3.0), 100_000, 4).unwrap();
        assert_eq!(est.empty_trials, 0);
        assert!(est.within(3.0));
    }

    #[test]
    fn box_emptiness_matches_exact_law() {
        let region = SprinkleRegion {
            geometry: Geometry::Box,
            ..SprinkleRegion::ball(0.4)
        };
        let est = void_probability_mc(&region, 20_000, 8).unwrap();
        assert!(est.within(3.0), "{est:?}");
    }

    #[test]
    fn preconditions() {
        let zero_density = SprinkleRegion {
            density: 0.0,
            ..SprinkleRegion::ball(1.0)
        };
        assert!(void_probability_mc(&zero_density, 1000, 0).is_err());
        assert!(void_probability_mc(&SprinkleRegion::ball(1.0), 99, 0).is_err());
    }
}
