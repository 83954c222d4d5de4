//! Spectral certificates.
//!
//! Three jobs: certify the two-sided gap of a layer's walk matrix (dense
//! eigensolve up to a size threshold, deflated power iteration above it),
//! measure the mean-zero contraction factor of a transfer matrix, and trace
//! return-probability decay of the lazy walk.

pub mod cheeger;

pub use cheeger::{
    ball, ball_cheeger, cheeger_brute, cheeger_search, BallExpansionRow, CheegerResult, Heuristic,
    SearchInit, MAX_BRUTE_UNIVERSE,
};

use faer::Mat;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{ExpanderLayer, LeveledGraph, VertexId};
use crate::linalg::sym_eigen;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMethod {
    /// Full symmetric eigendecomposition of the walk matrix.
    Dense,
    /// Power iteration on the squared walk matrix with the constant
    /// eigenvector deflated.
    Iterative,
}

impl GapMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            GapMethod::Dense => "dense",
            GapMethod::Iterative => "iterative",
        }
    }
}

/// Certified two-sided gap of a layer walk matrix W: `gap = 1 - mu_star`
/// where `mu_star = max(|lambda| : lambda an eigenvalue of W on mean-zero)`.
///
/// `residual` is an eigenpair check: `max|W u - lambda u|` for the extremal
/// pair on the dense path, `max|W^2 u - mu_star^2 u|` on the iterative path.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub gap: f64,
    pub mu_star: f64,
    pub method: GapMethod,
    pub residual: f64,
    pub iterations: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct GapOptions {
    /// Largest layer solved densely.
    pub dense_threshold: u64,
    /// Residual tolerance for the iterative path.
    pub tol: f64,
    /// Iteration cap for the iterative path.
    pub max_iter: u64,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions {
            dense_threshold: 4096,
            tol: 1e-8,
            max_iter: 100_000,
        }
    }
}

pub fn expander_gap(layer: &ExpanderLayer) -> Result<SpectralReport> {
    expander_gap_with(layer, &GapOptions::default())
}

pub fn expander_gap_with(layer: &ExpanderLayer, opts: &GapOptions) -> Result<SpectralReport> {
    let m = layer.num_vertices;
    if m < 2 {
        return Err(Error::invalid_argument(
            "spectral gap is undefined for the single-vertex layer",
        ));
    }
    if m <= opts.dense_threshold {
        dense_gap(layer)
    } else {
        iterative_gap(layer, opts)
    }
}

pub(crate) fn walk_matrix(layer: &ExpanderLayer) -> Mat<f64> {
    let m = layer.num_vertices as usize;
    let mut w = Mat::zeros(m, m);
    for &(a, b) in &layer.edges {
        w[(a as usize, b as usize)] += 1.0 / 3.0;
        w[(b as usize, a as usize)] += 1.0 / 3.0;
    }
    w
}

fn dense_gap(layer: &ExpanderLayer) -> Result<SpectralReport> {
    let m = layer.num_vertices as usize;
    let w = walk_matrix(layer);
    let (vals, u) = sym_eigen(&w)?;
    // the constant vector is always an exact eigenvector at 1; anything else
    // means w was not a walk matrix
    if (vals[m - 1] - 1.0).abs() > 1e-10 {
        return Err(Error::numeric(format!(
            "walk matrix top eigenvalue {} deviates from 1",
            vals[m - 1]
        )));
    }
    let (mu_star, sel) = if vals[0].abs() >= vals[m - 2].abs() {
        (vals[0].abs(), 0)
    } else {
        (vals[m - 2].abs(), m - 2)
    };
    let mut residual = 0.0f64;
    for i in 0..m {
        let wu: f64 = (0..m).map(|j| w[(i, j)] * u[(j, sel)]).sum();
        residual = residual.max((wu - vals[sel] * u[(i, sel)]).abs());
    }
    Ok(SpectralReport {
        gap: 1.0 - mu_star,
        mu_star,
        method: GapMethod::Dense,
        residual,
        iterations: 0,
    })
}

/// Power iteration for the top eigenvalue of W^2 restricted to mean-zero.
/// W^2 folds both spectral ends into [0, 1], so its deflated top eigenvalue
/// is exactly mu_star^2.
fn iterative_gap(layer: &ExpanderLayer, opts: &GapOptions) -> Result<SpectralReport> {
    let m = layer.num_vertices as usize;
    let lists = layer.neighbor_lists();
    let matvec = |x: &[f64], out: &mut [f64]| {
        for (i, list) in lists.iter().enumerate() {
            out[i] = list.iter().map(|&j| x[j as usize]).sum::<f64>() / 3.0;
        }
    };
    let deflate = |x: &mut [f64]| {
        let mean = x.iter().sum::<f64>() / m as f64;
        x.iter_mut().for_each(|v| *v -= mean);
    };
    let normalize = |x: &mut [f64]| {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
        }
        norm
    };

    let mut rng = ChaCha8Rng::seed_from_u64(layer.generator_seed ^ 0x9a2f_51ed);
    let mut x: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
    deflate(&mut x);
    if normalize(&mut x) == 0.0 {
        return Err(Error::numeric("degenerate start vector"));
    }

    let mut tmp = vec![0.0; m];
    let mut y = vec![0.0; m];
    for iter in 1..=opts.max_iter {
        matvec(&x, &mut tmp);
        matvec(&tmp, &mut y);
        deflate(&mut y);
        let rho: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let residual = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - rho * a).abs())
            .fold(0.0f64, f64::max);
        if residual <= opts.tol {
            let mu_star = rho.max(0.0).sqrt();
            return Ok(SpectralReport {
                gap: 1.0 - mu_star,
                mu_star,
                method: GapMethod::Iterative,
                residual,
                iterations: iter,
            });
        }
        std::mem::swap(&mut x, &mut y);
        if normalize(&mut x) == 0.0 {
            return Err(Error::numeric("power iterate collapsed to zero"));
        }
    }
    Err(Error::numeric(format!(
        "gap iteration did not reach tol {} within {} steps",
        opts.tol, opts.max_iter
    )))
}

/// Largest amplification of a mean-zero input under a transfer matrix, in the
/// level-weighted L2 norms (input level carries twice the points of the
/// output level, hence the factor 2).
///
/// With P0 the mean-zero projector, this is the top eigenvalue of
/// `2 * P0 M^T M P0`, square-rooted.
pub fn mean_zero_contraction(matrix: &Mat<f64>) -> Result<f64> {
    let rows = matrix.nrows();
    let cols = matrix.ncols();
    if cols != 2 * rows {
        return Err(Error::invalid_argument(format!(
            "transfer matrix must be n x 2n, got {rows} x {cols}"
        )));
    }
    // g = M^T M, then b = 2 * P0 g P0 with (P0)_{ij} = delta_{ij} - 1/cols
    let g = Mat::from_fn(cols, cols, |i, j| {
        (0..rows).map(|r| matrix[(r, i)] * matrix[(r, j)]).sum::<f64>()
    });
    let row_mean: Vec<f64> = (0..cols)
        .map(|i| (0..cols).map(|j| g[(i, j)]).sum::<f64>() / cols as f64)
        .collect();
    let total_mean = row_mean.iter().sum::<f64>() / cols as f64;
    let b = Mat::from_fn(cols, cols, |i, j| {
        2.0 * (g[(i, j)] - row_mean[i] - row_mean[j] + total_mean)
    });
    let vals = crate::linalg::sym_eigenvalues(&b)?;
    Ok(vals[cols - 1].max(0.0).sqrt())
}

/// Return-probability trace of the lazy walk started at `v`: rows
/// `(t, p_t, p_t^(1/t))` for even `t` up to `t_max`.
#[derive(Debug, Clone, Copy)]
pub struct ReturnRow {
    pub t: u32,
    pub p_t: f64,
    pub p_t_root: f64,
}

pub fn return_exponent(g: &LeveledGraph, v: VertexId, t_max: u32) -> Result<Vec<ReturnRow>> {
    if !g.contains(v) {
        return Err(Error::invalid_argument(format!("vertex {v} not in graph")));
    }
    if t_max < 2 {
        return Err(Error::invalid_argument("t_max must be at least 2"));
    }
    let mut mu = vec![0.0; g.num_vertices()];
    mu[v.flat()] = 1.0;
    let mut rows = Vec::with_capacity(t_max as usize / 2);
    for t in 1..=t_max {
        mu = g.step_measure(&mu);
        if t % 2 == 0 {
            let p_t = mu[v.flat()];
            rows.push(ReturnRow {
                t,
                p_t,
                p_t_root: p_t.powf(1.0 / t as f64),
            });
        }
    }
    Ok(rows)
}

// ============================================================================
// tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_expander_layer, build_graph, ExpanderConfig, ExpanderModel};

    fn layer(m: u64, seed: u64) -> ExpanderLayer {
        build_expander_layer(m, ExpanderModel::Pairing, 0.02, 100, seed).unwrap()
    }

    #[test]
    fn forced_layer_gaps_are_exact() {
        let triple = build_expander_layer(2, ExpanderModel::Pairing, 0.0, 1, 1).unwrap();
        let r = expander_gap(&triple).unwrap();
        assert!(r.gap.abs() < 1e-12, "triple edge is bipartite: gap 0");
        assert!((r.mu_star - 1.0).abs() < 1e-12);

        let k4 = build_expander_layer(4, ExpanderModel::Pairing, 0.0, 1, 1).unwrap();
        let r = expander_gap(&k4).unwrap();
        assert!((r.gap - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.mu_star - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dense_reports_carry_small_eigenpair_residuals() {
        let r = expander_gap(&layer(64, 3)).unwrap();
        assert_eq!(r.method, GapMethod::Dense);
        assert!(r.residual < 1e-10, "residual {}", r.residual);
        assert!(r.gap > 0.02 && r.gap < 1.0);
    }

    #[test]
    fn iterative_path_agrees_with_dense_on_small_layers() {
        for seed in [5u64, 11, 17] {
            let l = layer(128, seed);
            let dense = expander_gap(&l).unwrap();
            let iter = expander_gap_with(
                &l,
                &GapOptions {
                    dense_threshold: 1, // force the iterative path
                    ..GapOptions::default()
                },
            )
            .unwrap();
            assert_eq!(iter.method, GapMethod::Iterative);
            assert!(iter.iterations > 0);
            assert!(
                (dense.mu_star - iter.mu_star).abs() < 1e-6,
                "seed {seed}: dense {} vs iterative {}",
                dense.mu_star,
                iter.mu_star
            );
        }
    }

    #[test]
    fn single_vertex_layer_has_no_gap() {
        let l = build_expander_layer(1, ExpanderModel::Pairing, 0.0, 1, 1).unwrap();
        assert!(expander_gap(&l).is_err());
    }

    #[test]
    fn mean_zero_contraction_rejects_non_halving_shapes() {
        assert!(mean_zero_contraction(&Mat::zeros(3, 5)).is_err());
    }

    #[test]
    fn mean_zero_contraction_of_the_depth_one_averaging_map_is_zero() {
        // M f = (f0 + f1)/2 kills every mean-zero input
        let m = Mat::from_fn(1, 2, |_, _| 0.5);
        assert!(mean_zero_contraction(&m).unwrap() < 1e-12);
    }

    #[test]
    fn mean_zero_contraction_matches_a_hand_computable_case() {
        // selector M f = (f0, f2): M P0 (M P0)^T = [[3/4, -1/4], [-1/4, 3/4]]
        // has top eigenvalue 1, so sigma = sqrt(2 * 1)
        let m = Mat::from_fn(2, 4, |i, j| if j == 2 * i { 1.0 } else { 0.0 });
        let sigma = mean_zero_contraction(&m).unwrap();
        assert!((sigma - std::f64::consts::SQRT_2).abs() < 1e-12, "sigma {sigma}");
    }

    #[test]
    fn return_probability_after_two_steps_from_the_root_is_one_half() {
        let g = build_graph(4, 1, &ExpanderConfig::default()).unwrap();
        let rows = return_exponent(&g, VertexId::ROOT, 8).unwrap();
        assert_eq!(rows[0].t, 2);
        assert!((rows[0].p_t - 0.5).abs() < 1e-14);
        assert!((rows[0].p_t_root - 0.5f64.sqrt()).abs() < 1e-14);
        assert_eq!(rows.len(), 4);
        // mass never exceeds 1 and decays monotonically at early times
        assert!(rows.iter().all(|r| r.p_t > 0.0 && r.p_t <= 1.0));
    }

    #[test]
    fn return_rows_validate_arguments() {
        let g = build_graph(2, 1, &ExpanderConfig::default()).unwrap();
        assert!(return_exponent(&g, VertexId::new(5, 0), 4).is_err());
        assert!(return_exponent(&g, VertexId::ROOT, 1).is_err());
    }
}
