//! Dense generator of the `(Q, q)` evolution on small grids.
//!
//! ```text
//! G = -½ D ⊗ 1 + ½ 1 ⊗ D + diag(v(Q) - v(q) + ℰ(Q, q))
//! ```
//!
//! with `D` the periodic second-difference Laplacian. `G` is real symmetric
//! and the swap `S: (Q, q) → (q, Q)` gives `S G S = -G`, so the spectrum is
//! symmetric about zero.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::potentials::{superoperator_field, Potential};

/// Largest grid accepted by [`dense_generator`]; the matrix has `n⁴` entries.
pub const MAX_DENSE_POINTS: usize = 32;

#[derive(Clone, Debug)]
pub struct GeneratorSpectrum {
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

impl GeneratorSpectrum {
    /// `max_i |λ_i + λ_{N-1-i}|` over the sorted spectrum.
    pub fn symmetry_defect(&self) -> f64 {
        let e = &self.eigenvalues;
        e.iter()
            .zip(e.iter().rev())
            .map(|(a, b)| (a + b).abs())
            .fold(0.0, f64::max)
    }
}

/// Periodic second-difference Laplacian on `n` points of spacing `h`.
pub fn laplacian(n: usize, h: f64) -> DMatrix<f64> {
    let c = 1.0 / (h * h);
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -2.0 * c
        } else if (i + 1) % n == j || (j + 1) % n == i {
            c
        } else {
            0.0
        }
    })
}

/// Levels of the one-dimensional finite-difference Hamiltonian `-½ D + v`.
pub fn hamiltonian_levels(v: &Potential, grid: &GridSpec) -> Vec<f64> {
    let n = grid.n();
    let mut h = laplacian(n, grid.spacing()) * -0.5;
    for (i, x) in grid.coords().into_iter().enumerate() {
        h[(i, i)] += v.value(x);
    }
    sorted(SymmetricEigen::new(h).eigenvalues.iter().copied().collect())
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

pub fn dense_generator(v: &Potential, grid: &GridSpec) -> Result<GeneratorSpectrum> {
    let n = grid.n();
    if n > MAX_DENSE_POINTS {
        return Err(Error::Config(format!(
            "dense generator limited to {MAX_DENSE_POINTS} points per axis, got {n}"
        )));
    }
    v.validate()?;
    let d = laplacian(n, grid.spacing());
    let field = superoperator_field(v, grid);
    let x = grid.coords();
    let dim = n * n;
    let index = |a: usize, b: usize| a * n + b;
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    for a in 0..n {
        for b in 0..n {
            let row = index(a, b);
            g[(row, row)] = v.value(x[a]) - v.value(x[b]) + field.values()[[a, b]];
            for c in 0..n {
                // -½ D acting on Q, +½ D acting on q
                g[(row, index(c, b))] -= 0.5 * d[(a, c)];
                g[(row, index(a, c))] += 0.5 * d[(b, c)];
            }
        }
    }
    let eigenvalues = sorted(SymmetricEigen::new(g.clone()).eigenvalues.iter().copied().collect());
    Ok(GeneratorSpectrum {
        matrix: g,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_symmetric_and_swap_odd() {
        let g = GridSpec::new(8, 3.0).unwrap();
        let s = dense_generator(&Potential::Quartic { lambda: 1.0 }, &g).unwrap();
        let m = &s.matrix;
        assert_eq!((m - m.transpose()).amax(), 0.0);
        let n = 8;
        let swap = |i: usize| (i % n) * n + i / n;
        for i in 0..n * n {
            for j in 0..n * n {
                assert!((m[(swap(i), swap(j))] + m[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn free_spectrum_is_symmetric() {
        let g = GridSpec::new(8, 3.0).unwrap();
        let s = dense_generator(&Potential::Constant { value: 0.0 }, &g).unwrap();
        assert!(s.symmetry_defect() < 1e-10);
    }

    #[test]
    fn harmonic_spectrum_is_level_differences() {
        let g = GridSpec::new(16, 3.5).unwrap();
        let v = Potential::Harmonic { omega: 1.0 };
        let levels = hamiltonian_levels(&v, &g);
        let mut diffs: Vec<f64> = levels
            .iter()
            .flat_map(|a| levels.iter().map(move |b| a - b))
            .collect();
        diffs.sort_by(f64::total_cmp);
        let s = dense_generator(&v, &g).unwrap();
        for (a, b) in s.eigenvalues.iter().zip(&diffs) {
            assert!((a - b).abs() < 1e-8);
        }
        for gap in [levels[1] - levels[0], levels[2] - levels[1]] {
            assert!((gap - 1.0).abs() < 0.1, "gap {gap}");
        }
    }

    #[test]
    fn large_grids_are_refused() {
        let g = GridSpec::new(64, 5.0).unwrap();
        assert!(dense_generator(&Potential::Constant { value: 0.0 }, &g)
            .unwrap_err()
            .is_configuration());
    }
}
