//! Transfer operators between consecutive levels, harmonic measures, and the
//! density-decay report.
//!
//! The transfer operator at level n sends densities on level n to densities
//! on level n+1: for the first-hit kernel p(x, y) of the walk started at
//! x in level n and stopped on level n+1,
//!
//! ```text
//! (T f)(y) = 2 * sum_x f(x) p(x, y)
//! ```
//!
//! where densities are taken relative to the uniform measure on their level
//! (so f == 1 is the uniform density, and the factor 2 is the level-size
//! ratio). Row sums of p are 1 (the walk lands somewhere); column sums are
//! 1/2 (time reversal: each target splits evenly among twice as many
//! sources), which makes T preserve both total mass and centering.
//!
//! Matrices are materialized only up to [`MATERIALIZE_CAP`]; past that,
//! measures are pushed level to level by [`propagate_measure`], which never
//! builds the operator.

mod solve;

pub use solve::{AbsorbedChain, Absorption, Extension, DENSE_STATE_LIMIT};

use faer::Mat;

use crate::error::{Error, Result};
use crate::graph::{LeveledGraph, VertexId};
use crate::spectral;

/// Deepest level whose transfer matrix may be materialized.
pub const MATERIALIZE_CAP: u32 = 10;

/// Exact and propagated harmonic measures must agree to this.
pub const PROPAGATION_CROSS_CHECK_TOL: f64 = 1e-9;

const DENSE_RESIDUAL_TOL: f64 = 1e-10;
const SWEEP_RESIDUAL_TOL: f64 = 1e-8;

fn check_chain_residual(chain: &AbsorbedChain, residual: f64, what: &str) -> Result<()> {
    let tol = if chain.is_dense() {
        DENSE_RESIDUAL_TOL
    } else {
        SWEEP_RESIDUAL_TOL
    };
    if residual > tol {
        return Err(Error::numeric(format!(
            "{what}: solve residual {residual:.3e} exceeds {tol:.0e} \
             (target level {})",
            chain.target_level()
        )));
    }
    Ok(())
}

// ============================================================================
// densities
// ============================================================================

/// Which weighted norm to take on a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormP {
    L1,
    L2,
    LInf,
}

/// A function on one level, read as a density relative to the uniform
/// measure there.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDensity {
    pub level: u32,
    pub values: Vec<f64>,
    /// True when the mean against uniform is (numerically) zero.
    pub mean_zero: bool,
}

impl LevelDensity {
    pub fn new(level: u32, values: Vec<f64>) -> Result<Self> {
        let expect = 1usize << level;
        if values.len() != expect {
            return Err(Error::invalid_argument(format!(
                "level {level} holds {expect} vertices, got {} values",
                values.len()
            )));
        }
        let mean = values.iter().sum::<f64>() / expect as f64;
        Ok(LevelDensity {
            level,
            values,
            mean_zero: mean.abs() <= 1e-9,
        })
    }

    pub fn constant(level: u32, value: f64) -> Self {
        LevelDensity {
            level,
            values: vec![value; 1usize << level],
            mean_zero: value.abs() <= 1e-9,
        }
    }

    /// Mean against the uniform measure on the level.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn norm(&self, p: NormP) -> f64 {
        level_norm(self, p)
    }
}

/// Norm against the uniform measure: (2^-n sum |f|^p)^(1/p), or max |f|.
pub fn level_norm(f: &LevelDensity, p: NormP) -> f64 {
    let w = (f.values.len() as f64).recip();
    match p {
        NormP::L1 => w * f.values.iter().map(|v| v.abs()).sum::<f64>(),
        NormP::L2 => (w * f.values.iter().map(|v| v * v).sum::<f64>()).sqrt(),
        NormP::LInf => f.values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
    }
}

// ============================================================================
// harmonic measures
// ============================================================================

/// How a harmonic measure was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureMethod {
    Exact,
    MonteCarlo { walks: u64, censored: u64 },
}

/// First-hit distribution on a level for a walk from `start`.
#[derive(Debug, Clone)]
pub struct HarmonicMeasure {
    pub level: u32,
    pub start: VertexId,
    pub weights: Vec<f64>,
    pub method: MeasureMethod,
    /// Per-vertex standard errors; Monte Carlo only.
    pub std_errors: Option<Vec<f64>>,
}

impl HarmonicMeasure {
    pub fn point_mass(v: VertexId) -> Self {
        let mut weights = vec![0.0; 1usize << v.level];
        weights[v.index as usize] = 1.0;
        HarmonicMeasure {
            level: v.level,
            start: v,
            weights,
            method: MeasureMethod::Exact,
            std_errors: None,
        }
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Density of a measure relative to uniform, centered: f = 2^n mu - 1.
pub fn density_from_measure(mu: &HarmonicMeasure) -> LevelDensity {
    let scale = (1u64 << mu.level) as f64;
    let values: Vec<f64> = mu.weights.iter().map(|w| scale * w - 1.0).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    LevelDensity {
        level: mu.level,
        values,
        mean_zero: mean.abs() <= 1e-9,
    }
}

/// One-level push of a measure through the walk, without materializing the
/// operator. Works at any depth the chain solver accepts.
pub fn propagate_measure(g: &LeveledGraph, mu: &HarmonicMeasure) -> Result<HarmonicMeasure> {
    if mu.level + 1 > g.depth() {
        return Err(Error::invalid_argument(format!(
            "cannot propagate past the bottom level {}",
            g.depth()
        )));
    }
    let chain = AbsorbedChain::new(g, mu.level + 1)?;
    propagate_with(&chain, g, mu)
}

/// [`propagate_measure`] against a prebuilt chain, so a caller pushing
/// several measures through the same level shares one factorization.
fn propagate_with(
    chain: &AbsorbedChain,
    g: &LeveledGraph,
    mu: &HarmonicMeasure,
) -> Result<HarmonicMeasure> {
    debug_assert_eq!(chain.target_level(), mu.level + 1);
    let mut source = vec![0.0; chain.interior_size()];
    let range = g.level_range(mu.level);
    source[range].copy_from_slice(&mu.weights);
    let a = chain.absorb_from(&source)?;
    check_chain_residual(chain, a.residual, "measure propagation")?;
    Ok(HarmonicMeasure {
        level: mu.level + 1,
        start: mu.start,
        weights: a.weights,
        method: mu.method.clone(),
        std_errors: None,
    })
}

fn check_measure_query(g: &LeveledGraph, start: VertexId, level: u32) -> Result<()> {
    if !g.contains(start) {
        return Err(Error::invalid_argument(format!(
            "start {start} not in graph"
        )));
    }
    if level > g.depth() {
        return Err(Error::invalid_argument(format!(
            "level {level} exceeds depth {}",
            g.depth()
        )));
    }
    if start.level > level {
        return Err(Error::invalid_argument(format!(
            "start {start} lies below target level {level}"
        )));
    }
    Ok(())
}

/// First-hit distribution via a single absorbed solve.
pub fn harmonic_measure_direct(
    g: &LeveledGraph,
    start: VertexId,
    level: u32,
) -> Result<HarmonicMeasure> {
    check_measure_query(g, start, level)?;
    if start.level == level {
        return Ok(HarmonicMeasure::point_mass(start));
    }
    let chain = AbsorbedChain::new(g, level)?;
    let a = chain.absorb_from_vertex(start)?;
    check_chain_residual(&chain, a.residual, "direct harmonic measure")?;
    Ok(HarmonicMeasure {
        level,
        start,
        weights: a.weights,
        method: MeasureMethod::Exact,
        std_errors: None,
    })
}

/// First-hit distribution via level-by-level propagation, cross-checked
/// against the direct solve; disagreement beyond
/// [`PROPAGATION_CROSS_CHECK_TOL`] is a numeric error.
pub fn harmonic_measure_exact(
    g: &LeveledGraph,
    start: VertexId,
    level: u32,
) -> Result<HarmonicMeasure> {
    check_measure_query(g, start, level)?;
    let mut mu = HarmonicMeasure::point_mass(start);
    while mu.level < level {
        mu = propagate_measure(g, &mu)?;
    }
    let direct = harmonic_measure_direct(g, start, level)?;
    let max_diff = mu
        .weights
        .iter()
        .zip(&direct.weights)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if max_diff > PROPAGATION_CROSS_CHECK_TOL {
        return Err(Error::numeric(format!(
            "propagated and direct harmonic measures at level {level} \
             disagree by {max_diff:.3e}"
        )));
    }
    Ok(mu)
}

// ============================================================================
// transfer operator
// ============================================================================

/// Materialized first-hit kernel p(x, y) from level n to level n+1,
/// 2^n x 2^(n+1).
#[derive(Debug, Clone)]
pub struct TransferOperator {
    level: u32,
    matrix: Mat<f64>,
    solve_residual: f64,
}

/// Exact operator norms of T on densities. The L1 -> L1 norm is the largest
/// row sum of p (attained at a point-mass density); the sup -> sup norm is
/// twice the largest column sum (attained at f == 1).
#[derive(Debug, Clone, Copy)]
pub struct OperatorNorms {
    pub norm_1to1: f64,
    pub norm_inf_to_inf: f64,
    pub col_sum_max: f64,
    pub col_sum_min: f64,
}

impl TransferOperator {
    pub fn level(&self) -> u32 {
        self.level
    }

    /// The kernel p(x, y), rows indexed by level n, columns by level n+1.
    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn solve_residual(&self) -> f64 {
        self.solve_residual
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.matrix.nrows())
            .map(|x| (0..self.matrix.ncols()).map(|y| self.matrix[(x, y)]).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.matrix.ncols())
            .map(|y| (0..self.matrix.nrows()).map(|x| self.matrix[(x, y)]).sum())
            .collect()
    }

    pub fn norms(&self) -> OperatorNorms {
        operator_norms(self)
    }

    pub fn apply(&self, f: &LevelDensity) -> Result<LevelDensity> {
        apply_transfer(self, f)
    }

    /// Largest L2 -> L2 stretch over mean-zero densities.
    pub fn mean_zero_contraction(&self) -> Result<f64> {
        spectral::mean_zero_contraction(&self.matrix)
    }
}

/// Materializes the transfer operator at level n by one batched absorbed
/// solve per level (one factorization, 2^n right-hand sides).
pub fn transfer_matrix(g: &LeveledGraph, n: u32) -> Result<TransferOperator> {
    if n > MATERIALIZE_CAP {
        return Err(Error::invalid_argument(format!(
            "level {n} exceeds the materialization cap {MATERIALIZE_CAP}; \
             push measures with propagate_measure instead"
        )));
    }
    if n + 1 > g.depth() {
        return Err(Error::invalid_argument(format!(
            "transfer at level {n} needs depth at least {}, graph has {}",
            n + 1,
            g.depth()
        )));
    }
    let chain = AbsorbedChain::new(g, n + 1)?;
    let starts: Vec<VertexId> = (0..(1u64 << n)).map(|i| VertexId::new(n, i)).collect();
    let (rows, residual) = chain.absorb_from_vertices(&starts)?;
    check_chain_residual(&chain, residual, "transfer materialization")?;
    let matrix = Mat::from_fn(rows.len(), rows[0].len(), |x, y| rows[x][y]);
    Ok(TransferOperator {
        level: n,
        matrix,
        solve_residual: residual,
    })
}

/// (T f)(y) = 2 sum_x f(x) p(x, y): density on level n to density on n+1.
pub fn apply_transfer(op: &TransferOperator, f: &LevelDensity) -> Result<LevelDensity> {
    if f.level != op.level {
        return Err(Error::invalid_argument(format!(
            "operator at level {} applied to density at level {}",
            op.level, f.level
        )));
    }
    let na = op.matrix.nrows();
    let nb = op.matrix.ncols();
    let mut values = vec![0.0; nb];
    for x in 0..na {
        let fx = f.values[x];
        if fx == 0.0 {
            continue;
        }
        for (y, slot) in values.iter_mut().enumerate() {
            *slot += 2.0 * fx * op.matrix[(x, y)];
        }
    }
    LevelDensity::new(op.level + 1, values)
}

pub fn operator_norms(op: &TransferOperator) -> OperatorNorms {
    let norm_1to1 = op
        .row_sums()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let cols = op.col_sums();
    let col_sum_max = cols.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let col_sum_min = cols.iter().copied().fold(f64::INFINITY, f64::min);
    OperatorNorms {
        norm_1to1,
        norm_inf_to_inf: 2.0 * col_sum_max,
        col_sum_max,
        col_sum_min,
    }
}

// ============================================================================
// step decomposition
// ============================================================================

/// The three one-step factors of the transfer operator at level n, as
/// matrices acting on densities:
///
/// - `s1` (2^(n+1) x 2^n): copy from the parent, entry 1 at (y, parent(y));
/// - `s2` (2^n x 2^n): expander step within the level, 1/3 per edge slot;
/// - `s3` (2^(n-1) x 2^n): average the two children, entries 1/2.
#[derive(Debug, Clone)]
pub struct StepOperators {
    pub level: u32,
    pub s1: Mat<f64>,
    pub s2: Mat<f64>,
    pub s3: Mat<f64>,
}

pub fn step_operators(g: &LeveledGraph, n: u32) -> Result<StepOperators> {
    if n == 0 {
        return Err(Error::invalid_argument(
            "step operators need a level with a parent; the root level has none",
        ));
    }
    if n >= g.depth() {
        return Err(Error::invalid_argument(format!(
            "step operators at level {n} need depth > {n}, graph has {}",
            g.depth()
        )));
    }
    let layer = g.layer(n).ok_or_else(|| {
        Error::invalid_argument(format!("graph carries no expander layer at level {n}"))
    })?;
    let size = 1usize << n;
    let mut s1 = Mat::zeros(2 * size, size);
    for y in 0..2 * size {
        s1[(y, y / 2)] = 1.0;
    }
    let s2 = spectral::walk_matrix(layer);
    let mut s3 = Mat::zeros(size / 2, size);
    for z in 0..size / 2 {
        s3[(z, 2 * z)] = 0.5;
        s3[(z, 2 * z + 1)] = 0.5;
    }
    Ok(StepOperators {
        level: n,
        s1,
        s2,
        s3,
    })
}

/// T on densities is 2 p^T.
fn density_matrix(op: &TransferOperator) -> Mat<f64> {
    Mat::from_fn(op.matrix.ncols(), op.matrix.nrows(), |y, x| {
        2.0 * op.matrix[(x, y)]
    })
}

/// Largest entry of T_n - (1/3 S1 + 1/2 T_n S2 + 1/6 T_n T_(n-1) S3).
///
/// The identity is the first-step decomposition of the walk from level n:
/// mass moves down (1/3, averaged over the two children through S1's
/// adjoint), within the level (1/2, one expander step then transfer), or up
/// (1/6, through level n-1 and two transfers). The factors are used exactly
/// as built; nothing is renormalized to force agreement.
pub fn decomposition_residual(g: &LeveledGraph, n: u32) -> Result<f64> {
    if !(2..=MATERIALIZE_CAP - 1).contains(&n) {
        return Err(Error::invalid_argument(format!(
            "decomposition is checked for levels 2..={}, got {n}",
            MATERIALIZE_CAP - 1
        )));
    }
    let t_n = density_matrix(&transfer_matrix(g, n)?);
    let t_prev = density_matrix(&transfer_matrix(g, n - 1)?);
    let ops = step_operators(g, n)?;
    let within = &t_n * &ops.s2;
    let above = &t_n * &(&t_prev * &ops.s3);
    let mut worst = 0.0f64;
    for y in 0..t_n.nrows() {
        for x in 0..t_n.ncols() {
            let rhs = ops.s1[(y, x)] / 3.0 + within[(y, x)] / 2.0 + above[(y, x)] / 6.0;
            worst = worst.max((t_n[(y, x)] - rhs).abs());
        }
    }
    Ok(worst)
}

// ============================================================================
// density decay report
// ============================================================================

/// Certified spectral gap of the expander layer at `level`, computing one if
/// the layer carries no certificate.
pub fn layer_gap(g: &LeveledGraph, level: u32) -> Result<f64> {
    let layer = g.layer(level).ok_or_else(|| {
        Error::invalid_argument(format!("graph carries no expander layer at level {level}"))
    })?;
    match layer.certified_gap() {
        Some(gap) => Ok(gap),
        None => Ok(spectral::expander_gap(layer)?.gap),
    }
}

/// One level of the two-source decay report.
#[derive(Debug, Clone)]
pub struct DecayRow {
    pub n: u32,
    /// Norms of the first source's centered density at this level.
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    /// sum_y |mu_u(y) - mu_v(y)|; total variation is half of this.
    pub sum_abs_diff: f64,
    pub tv: f64,
    /// Certified gap of this level's expander layer, when one exists.
    pub lambda: Option<f64>,
    /// 1 - lambda/2, the per-level L2 contraction bound.
    pub bound: Option<f64>,
    /// l2 at the next level over l2 here; empty on the last row.
    pub ratio_l2: Option<f64>,
}

/// Pushes point masses at `u` and `v` down level by level and records how
/// their first-hit measures merge. Exact solves throughout; the two
/// measures share one chain factorization per level.
pub fn liouville_report(
    g: &LeveledGraph,
    u: VertexId,
    v: VertexId,
    n_max: u32,
) -> Result<Vec<DecayRow>> {
    for w in [u, v] {
        if !g.contains(w) {
            return Err(Error::invalid_argument(format!("vertex {w} not in graph")));
        }
    }
    if n_max > g.depth() {
        return Err(Error::invalid_argument(format!(
            "report depth {n_max} exceeds graph depth {}",
            g.depth()
        )));
    }
    let n0 = u.level.max(v.level);
    if n_max < n0 {
        return Err(Error::invalid_argument(format!(
            "report depth {n_max} lies above the deeper source level {n0}"
        )));
    }
    let mut mu_u = HarmonicMeasure::point_mass(u);
    let mut mu_v = HarmonicMeasure::point_mass(v);
    while mu_u.level < n0 {
        mu_u = propagate_measure(g, &mu_u)?;
    }
    while mu_v.level < n0 {
        mu_v = propagate_measure(g, &mu_v)?;
    }
    let mut rows = Vec::with_capacity((n_max - n0 + 1) as usize);
    for n in n0..=n_max {
        let f_u = density_from_measure(&mu_u);
        let sum_abs_diff: f64 = mu_u
            .weights
            .iter()
            .zip(&mu_v.weights)
            .map(|(a, b)| (a - b).abs())
            .sum();
        let lambda = if n >= 1 && g.layer(n).is_some() {
            Some(layer_gap(g, n)?)
        } else {
            None
        };
        rows.push(DecayRow {
            n,
            l1: f_u.norm(NormP::L1),
            l2: f_u.norm(NormP::L2),
            linf: f_u.norm(NormP::LInf),
            sum_abs_diff,
            tv: 0.5 * sum_abs_diff,
            lambda,
            bound: lambda.map(|l| 1.0 - l / 2.0),
            ratio_l2: None,
        });
        if n < n_max {
            let chain = AbsorbedChain::new(g, n + 1)?;
            mu_u = propagate_with(&chain, g, &mu_u)?;
            mu_v = propagate_with(&chain, g, &mu_v)?;
        }
    }
    for i in 0..rows.len().saturating_sub(1) {
        if rows[i].l2 > 0.0 {
            rows[i].ratio_l2 = Some(rows[i + 1].l2 / rows[i].l2);
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
    use crate::graph::{build_graph, build_unbalanced_tree, ExpanderConfig};

    fn standard(depth: u32, seed: u64) -> LeveledGraph {
        build_graph(depth, seed, &ExpanderConfig::default()).unwrap()
    }

    #[test]
    fn root_transfer_is_the_even_split() {
        let g = standard(2, 1);
        let t = transfer_matrix(&g, 0).unwrap();
        assert_eq!((t.matrix().nrows(), t.matrix().ncols()), (1, 2));
        assert!((t.matrix()[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((t.matrix()[(0, 1)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn level_one_transfer_is_the_same_for_every_seed() {
        // level 1 carries the unique triple-edge expander, so the kernel is
        // seed-free: 11/36 onto each of the start's own children, 7/36 onto
        // the far pair
        for (depth, seed) in [(4, 1), (3, 42)] {
            let t = transfer_matrix(&standard(depth, seed), 1).unwrap();
            let expect = [
                [11.0, 11.0, 7.0, 7.0],
                [7.0, 7.0, 11.0, 11.0],
            ];
            for x in 0..2 {
                for y in 0..4 {
                    assert!(
                        (t.matrix()[(x, y)] - expect[x][y] / 36.0).abs() < 1e-12,
                        "seed {seed} entry ({x},{y})"
                    );
                }
            }
        }
    }

    #[test]
    fn rows_sum_to_one_and_columns_to_a_half() {
        let g = standard(5, 3);
        for n in 0..=3u32 {
            let t = transfer_matrix(&g, n).unwrap();
            for (x, s) in t.row_sums().into_iter().enumerate() {
                assert!((s - 1.0).abs() < 1e-10, "row {x} at level {n}: {s}");
            }
            for (y, s) in t.col_sums().into_iter().enumerate() {
                assert!((s - 0.5).abs() < 1e-9, "col {y} at level {n}: {s}");
            }
            assert!(t.solve_residual() < 1e-10);
        }
    }

    #[test]
    fn both_operator_norms_are_one() {
        let t = transfer_matrix(&standard(5, 8), 3).unwrap();
        let norms = t.norms();
        assert!((norms.norm_1to1 - 1.0).abs() < 1e-10);
        assert!((norms.norm_inf_to_inf - 1.0).abs() < 1e-9);
        assert!(norms.col_sum_max - norms.col_sum_min < 1e-9);
    }

    #[test]
    fn materialization_is_refused_past_the_cap_with_a_pointer_onward() {
        let g = standard(3, 1);
        let err = transfer_matrix(&g, 3).unwrap_err();
        assert!(err.to_string().contains("depth"), "{err}");
        let err = transfer_matrix(&standard(2, 1), 11).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("propagate_measure"), "{msg}");
    }

    #[test]
    fn uniform_density_is_a_fixed_point() {
        let g = standard(4, 2);
        let t = transfer_matrix(&g, 2).unwrap();
        let out = t.apply(&LevelDensity::constant(2, 1.0)).unwrap();
        assert_eq!(out.level, 3);
        for v in &out.values {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn applying_to_a_point_mass_density_reads_off_a_kernel_row() {
        let g = standard(4, 6);
        let n = 2u32;
        let t = transfer_matrix(&g, n).unwrap();
        let x0 = VertexId::new(n, 1);
        let f = density_from_measure(&HarmonicMeasure::point_mass(x0));
        let out = t.apply(&f).unwrap();
        // 2 sum_x (2^n 1_{x0} - 1) p(x, y) = 2^(n+1) p(x0, y) - 1
        let row = HarmonicMeasure {
            level: n + 1,
            start: x0,
            weights: (0..t.matrix().ncols())
                .map(|y| t.matrix()[(1, y)])
                .collect(),
            method: MeasureMethod::Exact,
            std_errors: None,
        };
        let expect = density_from_measure(&row);
        for (a, b) in out.values.iter().zip(&expect.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn transfer_preserves_the_mean() {
        let g = standard(4, 4);
        let t = transfer_matrix(&g, 2).unwrap();
        let f = LevelDensity::new(2, vec![3.0, -1.0, -1.0, -1.0]).unwrap();
        assert!(f.mean_zero);
        let out = t.apply(&f).unwrap();
        assert!(out.mean().abs() < 1e-9);
        assert!(out.mean_zero);

        let g1 = LevelDensity::new(2, vec![2.0, 1.0, 0.5, 0.5]).unwrap();
        let out = t.apply(&g1).unwrap();
        assert!((out.mean() - g1.mean()).abs() < 1e-9);
    }

    #[test]
    fn level_one_contraction_is_two_ninths() {
        // centered kernel rows are (+-2, +-2, -+2, -+2)/36, so the mean-zero
        // singular value is sqrt(2) * sqrt(2)/9
        let t = transfer_matrix(&standard(3, 5), 1).unwrap();
        let sigma = t.mean_zero_contraction().unwrap();
        assert!((sigma - 2.0 / 9.0).abs() < 1e-10, "{sigma}");
    }

    #[test]
    fn contraction_beats_the_layer_gap_bound() {
        let g = standard(5, 1);
        for n in 2..=3u32 {
            let sigma = transfer_matrix(&g, n)
                .unwrap()
                .mean_zero_contraction()
                .unwrap();
            let bound = 1.0 - layer_gap(&g, n).unwrap() / 2.0;
            assert!(sigma <= 1.0 + 1e-12);
            assert!(sigma <= bound + 1e-6, "level {n}: {sigma} vs {bound}");
        }
    }

    #[test]
    fn density_arithmetic_and_norms() {
        assert!(LevelDensity::new(2, vec![1.0; 3]).is_err());
        let f = LevelDensity::constant(3, 2.5);
        assert!((f.norm(NormP::L1) - 2.5).abs() < 1e-15);
        assert!((f.norm(NormP::L2) - 2.5).abs() < 1e-15);
        assert!((f.norm(NormP::LInf) - 2.5).abs() < 1e-15);

        // centered point mass at level k: |f|_1 = 2(1 - 2^-k),
        // |f|_2 = sqrt(2^k - 1), |f|_inf = 2^k - 1
        let k = 4u32;
        let f = density_from_measure(&HarmonicMeasure::point_mass(VertexId::new(k, 3)));
        assert!(f.mean_zero);
        assert!((f.norm(NormP::L1) - 2.0 * (1.0 - 0.0625)).abs() < 1e-12);
        assert!((f.norm(NormP::L2) - 15.0f64.sqrt()).abs() < 1e-12);
        assert!((f.norm(NormP::LInf) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn step_operator_shapes_and_row_laws() {
        let g = standard(4, 7);
        let ops = step_operators(&g, 2).unwrap();
        assert_eq!((ops.s1.nrows(), ops.s1.ncols()), (8, 4));
        assert_eq!((ops.s2.nrows(), ops.s2.ncols()), (4, 4));
        assert_eq!((ops.s3.nrows(), ops.s3.ncols()), (2, 4));
        for y in 0..8 {
            let s: f64 = (0..4).map(|x| ops.s1[(y, x)]).sum();
            assert!((s - 1.0).abs() < 1e-15);
            assert!((ops.s1[(y, y / 2)] - 1.0).abs() < 1e-15);
        }
        for i in 0..4 {
            let s: f64 = (0..4).map(|j| ops.s2[(i, j)]).sum();
            assert!((s - 1.0).abs() < 1e-12, "expander row {i}");
            for j in 0..4 {
                assert!((ops.s2[(i, j)] - ops.s2[(j, i)]).abs() < 1e-15);
            }
        }
        // sibling-alternating densities average to zero under s3
        let alt = [1.0, -1.0, 1.0, -1.0];
        for z in 0..2 {
            let s: f64 = (0..4).map(|x| ops.s3[(z, x)] * alt[x]).sum();
            assert!(s.abs() < 1e-15);
        }
        assert!(step_operators(&g, 0).is_err());
        assert!(step_operators(&g, 4).is_err());
        assert!(step_operators(&build_unbalanced_tree(3).unwrap(), 1).is_err());
    }

    #[test]
    fn one_step_decomposition_closes() {
        let g = standard(5, 1);
        for n in 2..=3u32 {
            let r = decomposition_residual(&g, n).unwrap();
            assert!(r < 1e-10, "level {n}: residual {r}");
        }
        assert!(decomposition_residual(&g, 1).is_err());
        assert!(decomposition_residual(&g, MATERIALIZE_CAP).is_err());
    }

    #[test]
    fn direct_and_propagated_measures_agree() {
        let g = standard(5, 9);
        let direct = harmonic_measure_direct(&g, VertexId::ROOT, 4).unwrap();
        let exact = harmonic_measure_exact(&g, VertexId::ROOT, 4).unwrap();
        assert!((direct.total() - 1.0).abs() < 1e-12);
        assert!((exact.total() - 1.0).abs() < 1e-12);
        for (a, b) in exact.weights.iter().zip(&direct.weights) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(exact.method, MeasureMethod::Exact);
    }

    #[test]
    fn measure_queries_are_validated() {
        let g = standard(3, 1);
        assert!(harmonic_measure_direct(&g, VertexId::new(4, 0), 3).is_err());
        assert!(harmonic_measure_direct(&g, VertexId::new(2, 0), 1).is_err());
        assert!(harmonic_measure_direct(&g, VertexId::ROOT, 4).is_err());
        let same = harmonic_measure_direct(&g, VertexId::new(2, 3), 2).unwrap();
        assert_eq!(same.weights[3], 1.0);
    }

    #[test]
    fn unbalanced_level_two_measure_solves_the_root_mixing_exactly() {
        // not the product (1/9, 2/9, 2/9, 4/9): the walk returns to the root
        // from the right child more often (2/5 vs 1/4), shifting mass left.
        // Solving h10 = r/4 + (1/4, 1/2, 0, 0), h11 = 2r/5 + (0, 0, 1/5, 2/5),
        // r = h10/3 + 2 h11/3 gives r = (5, 10, 8, 16)/39.
        let g = build_unbalanced_tree(3).unwrap();
        let mu = harmonic_measure_exact(&g, VertexId::ROOT, 2).unwrap();
        let expect = [5.0 / 39.0, 10.0 / 39.0, 8.0 / 39.0, 16.0 / 39.0];
        for (a, b) in mu.weights.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{:?}", mu.weights);
        }
    }

    #[test]
    fn decay_report_tracks_the_merging_of_two_sources() {
        let g = standard(5, 2);
        let u = VertexId::new(2, 0);
        let v = VertexId::new(2, 1);
        let rows = liouville_report(&g, u, v, 5).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].n, 2);

        // disjoint point masses at the first row
        assert!((rows[0].sum_abs_diff - 2.0).abs() < 1e-12);
        assert!((rows[0].l2 - 3.0f64.sqrt()).abs() < 1e-12);

        for w in rows.windows(2) {
            assert!(w[1].sum_abs_diff <= w[0].sum_abs_diff + 1e-12);
        }
        for (i, r) in rows.iter().enumerate() {
            assert!((r.tv - 0.5 * r.sum_abs_diff).abs() < 1e-15);
            assert!(r.linf <= 3.0 + 1e-9, "sup density bound at row {i}");
            let lambda = r.lambda.expect("every level carries a layer");
            assert!(lambda > 0.0);
            assert!((r.bound.unwrap() - (1.0 - lambda / 2.0)).abs() < 1e-15);
            if i + 1 < rows.len() {
                let ratio = r.ratio_l2.expect("interior rows carry the ratio");
                assert!((ratio - rows[i + 1].l2 / r.l2).abs() < 1e-12);
            } else {
                assert!(r.ratio_l2.is_none());
            }
        }
    }

    #[test]
    fn decay_report_accepts_sources_on_different_levels() {
        let g = standard(4, 3);
        let rows = liouville_report(&g, VertexId::ROOT, VertexId::new(2, 2), 4).unwrap();
        assert_eq!(rows[0].n, 2);
        // the root's measure is strictly positive everywhere, the point
        // mass is not, so the sources have not fully merged
        assert!(rows[0].sum_abs_diff > 0.0);
        assert!(liouville_report(&g, VertexId::ROOT, VertexId::new(2, 2), 1).is_err());
        assert!(liouville_report(&g, VertexId::ROOT, VertexId::new(5, 0), 4).is_err());
    }
}
