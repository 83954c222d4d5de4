//! Monte Carlo walks: empirical harmonic measures and the visit-count law.
//!
//! Every walk draws from its own counter-based stream — seed the cipher with
//! the master seed, select the walk index as the stream — so walk i sees the
//! same randomness no matter which worker runs it or in what order. Workers
//! only split the index range; results are merged by integer addition. The
//! worker count therefore changes wall time and nothing else, bit for bit.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{LeveledGraph, VertexId};
use crate::operator::{HarmonicMeasure, MeasureMethod};

/// Default per-walk step budget; exceeding it censors the walk.
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy)]
pub struct WalkConfig {
    pub master_seed: u64,
    pub walks: u64,
    /// Worker threads. Affects speed only, never results.
    pub workers: usize,
    pub max_steps: u64,
}

impl WalkConfig {
    pub fn new(master_seed: u64, walks: u64) -> Self {
        WalkConfig {
            master_seed,
            walks,
            workers: 1,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }
}

/// The stream for one walk: same master seed, stream = walk index.
pub fn walk_rng(master_seed: u64, walk_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(walk_index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbsorbedWalk {
    pub vertex: VertexId,
    pub steps: u64,
}

/// One walk from `start`, stopped on first arrival at `target_level`.
/// `None` means the step budget ran out first (a censored walk).
pub fn run_absorbed_walk(
    g: &LeveledGraph,
    start: VertexId,
    target_level: u32,
    rng: &mut ChaCha8Rng,
    max_steps: u64,
) -> Result<Option<AbsorbedWalk>> {
    if !g.contains(start) {
        return Err(Error::invalid_argument(format!(
            "start {start} not in graph"
        )));
    }
    if target_level > g.depth() || start.level > target_level {
        return Err(Error::invalid_argument(format!(
            "walk from {start} cannot be absorbed at level {target_level} (depth {})",
            g.depth()
        )));
    }
    if start.level == target_level {
        return Ok(Some(AbsorbedWalk {
            vertex: start,
            steps: 0,
        }));
    }
    // the walk moves one level at a time, so first arrival at the target
    // level is the first time the flat index reaches its range
    let absorbed_at = (1usize << target_level) - 1;
    let mut flat = start.flat();
    for step in 1..=max_steps {
        let slots = g.slot_targets(flat);
        flat = slots[rng.random_range(0..slots.len())] as usize;
        if flat >= absorbed_at {
            return Ok(Some(AbsorbedWalk {
                vertex: VertexId::from_flat(flat),
                steps: step,
            }));
        }
    }
    Ok(None)
}

fn run_pool<T, F>(workers: usize, job: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    if workers <= 1 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::numeric(format!("worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Empirical first-hit distribution on `level` from `walks` independent
/// walks started at `start`. Weights are counts over uncensored walks;
/// std_errors are the per-vertex binomial errors.
pub fn mc_harmonic_measure(
    g: &LeveledGraph,
    start: VertexId,
    level: u32,
    cfg: &WalkConfig,
) -> Result<HarmonicMeasure> {
    // validate once up front so worker errors cannot depend on scheduling
    let mut probe = walk_rng(cfg.master_seed, 0);
    run_absorbed_walk(g, start, level, &mut probe, 1)?;
    if cfg.walks == 0 {
        return Err(Error::invalid_argument("need at least one walk"));
    }
    let nb = 1usize << level;
    let base = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    let (counts, censored) = run_pool(cfg.workers, || {
        (0..cfg.walks)
            .into_par_iter()
            .fold(
                || (vec![0u64; nb], 0u64),
                |(mut counts, mut censored), i| {
                    let mut rng = base.clone();
                    rng.set_stream(i);
                    match run_absorbed_walk(g, start, level, &mut rng, cfg.max_steps).unwrap() {
                        Some(w) => counts[w.vertex.index as usize] += 1,
                        None => censored += 1,
                    }
                    (counts, censored)
                },
            )
            .reduce(
                || (vec![0u64; nb], 0u64),
                |(mut a, ca), (b, cb)| {
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x += y;
                    }
                    (a, ca + cb)
                },
            )
    })?;
    let valid = cfg.walks - censored;
    if valid == 0 {
        return Err(Error::numeric(format!(
            "all {} walks were censored at {} steps",
            cfg.walks, cfg.max_steps
        )));
    }
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / valid as f64).collect();
    let std_errors = weights
        .iter()
        .map(|&p| (p * (1.0 - p) / valid as f64).sqrt())
        .collect();
    Ok(HarmonicMeasure {
        level,
        start,
        weights,
        method: MeasureMethod::MonteCarlo {
            walks: cfg.walks,
            censored,
        },
        std_errors: Some(std_errors),
    })
}

/// Histogram summary of the visit-count experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitStats {
    /// histogram[v] = number of walks with exactly v visits.
    pub histogram: Vec<u64>,
    pub walks: u64,
    pub censored: u64,
}

impl VisitStats {
    pub fn valid(&self) -> u64 {
        self.walks - self.censored
    }

    /// Sample mean of the visit count.
    pub fn mean(&self) -> f64 {
        let total: f64 = self
            .histogram
            .iter()
            .enumerate()
            .map(|(v, &c)| v as f64 * c as f64)
            .sum();
        total / self.valid() as f64
    }

    /// Unbiased sample variance.
    pub fn variance_estimate(&self) -> f64 {
        let n = self.valid();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let ss: f64 = self
            .histogram
            .iter()
            .enumerate()
            .map(|(v, &c)| c as f64 * (v as f64 - mean) * (v as f64 - mean))
            .sum();
        ss / (n - 1) as f64
    }

    pub fn std_error_of_mean(&self) -> f64 {
        (self.variance_estimate() / self.valid() as f64).sqrt()
    }

    /// Fraction of walks that never visited the level.
    pub fn zero_fraction(&self) -> f64 {
        self.histogram.first().copied().unwrap_or(0) as f64 / self.valid() as f64
    }

    /// Binomial standard error of [`Self::zero_fraction`].
    pub fn zero_fraction_std_error(&self) -> f64 {
        let p = self.zero_fraction();
        (p * (1.0 - p) / self.valid() as f64).sqrt()
    }
}

/// Counts visits to the level above `y` before the walk from `y` first
/// leaves the ball above it.
///
/// With n = y.level - 1, a visit is a time t >= 1 with the walker in level
/// n, and the clock stops at the first t >= 1 with the walker below level n
/// (outside the ball of levels 0..=n). The first step either moves up into
/// level n (one parent slot out of six) or already ends the experiment, so
/// the count is 0 with probability 5/6 and otherwise geometric: from level
/// n, two of six slots exit down, three stay put, and one starts an excursion
/// above that almost surely returns.
pub fn mc_expected_visits(g: &LeveledGraph, y: VertexId, cfg: &WalkConfig) -> Result<VisitStats> {
    if !g.contains(y) {
        return Err(Error::invalid_argument(format!("vertex {y} not in graph")));
    }
    if y.level < 2 {
        return Err(Error::invalid_argument(format!(
            "visit counting needs y at level 2 or deeper, got {y}"
        )));
    }
    if cfg.walks == 0 {
        return Err(Error::invalid_argument("need at least one walk"));
    }
    let n = y.level - 1;
    // the ball of levels 0..=n is exactly the flat range below this bound
    let outside = (1usize << (n + 1)) - 1;
    let level_n = g.level_range(n);
    let base = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    let start_flat = y.flat();
    let (histogram, censored) = run_pool(cfg.workers, || {
        (0..cfg.walks)
            .into_par_iter()
            .fold(
                || (Vec::<u64>::new(), 0u64),
                |(mut hist, mut censored), i| {
                    let mut rng = base.clone();
                    rng.set_stream(i);
                    let mut flat = start_flat;
                    let mut visits = 0usize;
                    let mut done = false;
                    for _ in 0..cfg.max_steps {
                        let slots = g.slot_targets(flat);
                        flat = slots[rng.random_range(0..slots.len())] as usize;
                        if level_n.contains(&flat) {
                            visits += 1;
                        } else if flat >= outside {
                            done = true;
                            break;
                        }
                    }
                    if done {
                        if hist.len() <= visits {
                            hist.resize(visits + 1, 0);
                        }
                        hist[visits] += 1;
                    } else {
                        censored += 1;
                    }
                    (hist, censored)
                },
            )
            .reduce(
                || (Vec::new(), 0u64),
                |(mut a, ca), (b, cb)| {
                    if a.len() < b.len() {
                        a.resize(b.len(), 0);
                    }
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x += y;
                    }
                    (a, ca + cb)
                },
            )
    })?;
    if cfg.walks == censored {
        return Err(Error::numeric(format!(
            "all {} walks were censored at {} steps",
            cfg.walks, cfg.max_steps
        )));
    }
    Ok(VisitStats {
        histogram,
        walks: cfg.walks,
        censored,
    })
}

/// Pearson chi-square of `histogram[1..]` against Geometric(p) on 1, 2, ...
#[derive(Debug, Clone, Copy)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Tests the positive part of a visit histogram against the geometric law
/// with success probability `p`. Trailing values are pooled so every bin
/// expects at least `min_expected` observations; no parameter is estimated,
/// so dof = bins - 1.
pub fn geometric_chi_square(
    histogram: &[u64],
    p: f64,
    min_expected: f64,
) -> Result<ChiSquareTest> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::invalid_argument(format!(
            "success probability must lie in (0, 1), got {p}"
        )));
    }
    let n1: u64 = histogram.iter().skip(1).sum();
    if n1 == 0 {
        return Err(Error::invalid_argument(
            "no positive observations to test against the geometric law",
        ));
    }
    let total = n1 as f64;
    let q = 1.0 - p;
    let count = |v: usize| histogram.get(v).copied().unwrap_or(0) as f64;
    let max_v = histogram.len() - 1;

    // single bins while they expect enough mass, then one pooled tail
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut v = 1usize;
    loop {
        let expect_single = total * p * q.powi(v as i32 - 1);
        let expect_tail = total * q.powi(v as i32 - 1);
        if expect_single < min_expected || v >= max_v {
            let observed: f64 = (v..=max_v).map(count).sum();
            if expect_tail < min_expected {
                if let Some(last) = bins.last_mut() {
                    last.0 += observed;
                    last.1 += expect_tail;
                } else {
                    bins.push((observed, expect_tail));
                }
            } else {
                bins.push((observed, expect_tail));
            }
            break;
        }
        bins.push((count(v), expect_single));
        v += 1;
    }
    if bins.len() < 2 {
        return Err(Error::invalid_argument(format!(
            "only {} usable bin(s); need more observations for a chi-square test",
            bins.len()
        )));
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = bins.len() - 1;
    let dist = statrs::distribution::ChiSquared::new(dof as f64)
        .map_err(|e| Error::numeric(format!("chi-square with {dof} dof: {e}")))?;
    use statrs::distribution::ContinuousCDF;
    let p_value = 1.0 - dist.cdf(statistic);
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value,
    })
}

// ============================================================================
// tests
// ============================================================================
