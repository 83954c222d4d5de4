//! Dense symmetric eigensolves, wrapped so numeric failures surface as
//! [`Error::Numeric`] instead of panics.

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Eigenvalues ascending, columns of the returned matrix the matching
/// orthonormal eigenvectors.
pub fn sym_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::numeric(format!("symmetric eigensolve failed: {e:?}")))?;
    let vals: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    Ok((vals, evd.U().to_owned()))
}

/// Eigenvalues only, ascending.
pub fn sym_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::numeric(format!("symmetric eigensolve failed: {e:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Walk matrix of the 6-cycle: spectrum cos(2*pi*k/6).
    fn cycle_walk(n: usize) -> Mat<f64> {
        Mat::from_fn(n, n, |i, j| {
            if (i + 1) % n == j || (j + 1) % n == i {
                0.5
            } else {
                0.0
            }
        })
    }

    #[test]
    fn cycle_spectrum_is_cosines_ascending() {
        let vals = sym_eigenvalues(&cycle_walk(6)).unwrap();
        let expect = [-1.0, -0.5, -0.5, 0.5, 0.5, 1.0];
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn eigenvectors_satisfy_their_pairs_and_are_orthonormal() {
        let a = cycle_walk(8);
        let (vals, u) = sym_eigen(&a).unwrap();
        for k in 0..8 {
            for i in 0..8 {
                let av: f64 = (0..8).map(|j| a[(i, j)] * u[(j, k)]).sum();
                assert!((av - vals[k] * u[(i, k)]).abs() < 1e-10);
            }
        }
        for p in 0..8 {
            for q in 0..8 {
                let dot: f64 = (0..8).map(|i| u[(i, p)] * u[(i, q)]).sum();
                let expect = if p == q { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
    }
}
