//! Per-level 3-regular expander layers.
//!
//! Layer sizes 1, 2 and 4 admit exactly one 3-regular multigraph without
//! self-loops (empty / triple edge / K4), so those are hardwired. From 8
//! vertices up, layers are sampled either from the pairing model (uniform
//! perfect matching on the 3m half-edge stubs) or as a Hamiltonian cycle plus
//! a random perfect matching, resampling until the graph is simple and the
//! certified two-sided spectral gap clears the requested floor.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{expander_gap, SpectralReport};

/// Generator used for a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpanderModel {
    /// Structurally determined layers (sizes 1, 2, 4).
    Forced,
    /// Uniform perfect matching on the 3m half-edge stubs, conditioned on simplicity.
    Pairing,
    /// Hamiltonian cycle plus a random perfect matching avoiding cycle edges.
    CycleMatching,
}

impl ExpanderModel {
    pub fn as_str(self) -> &'static str {
        match self {
            ExpanderModel::Forced => "forced",
            ExpanderModel::Pairing => "pairing",
            ExpanderModel::CycleMatching => "cycle_matching",
        }
    }
}

/// A 3-regular multigraph on the vertices of one tree level.
///
/// `edges` holds unordered pairs in canonical form (`a < b`, sorted
/// lexicographically); a repeated pair encodes edge multiplicity. The size-1
/// layer is the empty graph.
#[derive(Debug, Clone)]
pub struct ExpanderLayer {
    pub level: u32,
    pub num_vertices: u64,
    pub edges: Vec<(u32, u32)>,
    /// Generator provenance; `None` for layers loaded from a file.
    pub model: Option<ExpanderModel>,
    pub generator_seed: u64,
    /// Eigensolve certificate attached at construction time.
    pub certificate: Option<SpectralReport>,
}

impl ExpanderLayer {
    /// Certified two-sided gap, if this layer carries a certificate.
    pub fn certified_gap(&self) -> Option<f64> {
        self.certificate.as_ref().map(|c| c.gap)
    }

    /// Neighbor lists with multiplicity, each sorted ascending.
    ///
    /// Every vertex of a layer with >= 2 vertices has exactly 3 entries.
    pub fn neighbor_lists(&self) -> Vec<Vec<u32>> {
        let mut lists = vec![Vec::new(); self.num_vertices as usize];
        for &(a, b) in &self.edges {
            lists[a as usize].push(b);
            lists[b as usize].push(a);
        }
        for list in &mut lists {
            list.sort_unstable();
        }
        lists
    }

    /// Checks 3-regularity (vacuous for the single-vertex layer).
    pub fn check_degrees(&self) -> Result<()> {
        if self.num_vertices == 1 {
            if !self.edges.is_empty() {
                return Err(Error::validation("size-1 layer must have no edges"));
            }
            return Ok(());
        }
        let mut degree = vec![0u32; self.num_vertices as usize];
        for &(a, b) in &self.edges {
            if a == b {
                return Err(Error::validation(format!(
                    "self-loop at vertex {a} in level-{} layer",
                    self.level
                )));
            }
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        if let Some(v) = degree.iter().position(|&d| d != 3) {
            return Err(Error::validation(format!(
                "vertex {v} of level-{} layer has degree {}, expected 3",
                self.level, degree[v]
            )));
        }
        Ok(())
    }
}

/// Stable per-level seed derivation from the master seed (splitmix64 step).
pub fn layer_seed(master_seed: u64, level: u32) -> u64 {
    let mut z = master_seed.wrapping_add((level as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds a certified 3-regular layer on `num_vertices` (a power of two).
///
/// Sizes 1, 2 and 4 are forced and ignore `min_gap` (the triple edge has gap
/// exactly 0); larger sizes resample up to `max_retries` times until the graph
/// is simple and the certified gap reaches `min_gap`.
///
/// # Errors
/// `InvalidArgument` for a non-power-of-two size, an out-of-range `min_gap`,
/// or `Forced` requested at size >= 8; `GenerationFailed` when the retry
/// budget is exhausted.
pub fn build_expander_layer(
    num_vertices: u64,
    model: ExpanderModel,
    min_gap: f64,
    max_retries: u32,
    seed: u64,
) -> Result<ExpanderLayer> {
    if num_vertices == 0 || !num_vertices.is_power_of_two() {
        return Err(Error::invalid_argument(format!(
            "layer size must be a power of two, got {num_vertices}"
        )));
    }
    if !(0.0..1.0).contains(&min_gap) {
        return Err(Error::invalid_argument(format!(
            "min_gap must lie in [0, 1), got {min_gap}"
        )));
    }
    let level = num_vertices.trailing_zeros();

    if num_vertices <= 4 {
        let edges: Vec<(u32, u32)> = match num_vertices {
            1 => Vec::new(),
            2 => vec![(0, 1), (0, 1), (0, 1)],
            _ => vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        };
        let mut layer = ExpanderLayer {
            level,
            num_vertices,
            edges,
            model: Some(ExpanderModel::Forced),
            generator_seed: seed,
            certificate: None,
        };
        if num_vertices > 1 {
            layer.certificate = Some(expander_gap(&layer)?);
        }
        return Ok(layer);
    }

    if model == ExpanderModel::Forced {
        return Err(Error::invalid_argument(format!(
            "forced layers exist only for sizes 1, 2, 4; got {num_vertices}"
        )));
    }

    let m = num_vertices as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_gap = f64::NEG_INFINITY;
    for _attempt in 0..max_retries {
        let edges = match model {
            ExpanderModel::Pairing => sample_pairing(m, &mut rng),
            ExpanderModel::CycleMatching => sample_cycle_matching(m, &mut rng),
            ExpanderModel::Forced => unreachable!(),
        };
        let Some(edges) = edges else { continue };
        let mut layer = ExpanderLayer {
            level,
            num_vertices,
            edges,
            model: Some(model),
            generator_seed: seed,
            certificate: None,
        };
        let report = expander_gap(&layer)?;
        if report.gap >= min_gap {
            layer.certificate = Some(report);
            return Ok(layer);
        }
        best_gap = best_gap.max(report.gap);
    }
    Err(Error::GenerationFailed {
        num_vertices,
        best_gap: if best_gap.is_finite() { best_gap } else { 0.0 },
        min_gap,
        attempts: max_retries,
    })
}

/// One pairing-model draw; `None` if the matching produced a loop or parallel edge.
fn sample_pairing(m: u32, rng: &mut ChaCha8Rng) -> Option<Vec<(u32, u32)>> {
    let mut stubs: Vec<u32> = (0..3 * m).collect();
    stubs.shuffle(rng);
    let mut edges = Vec::with_capacity(3 * m as usize / 2);
    for pair in stubs.chunks_exact(2) {
        let (a, b) = (pair[0] / 3, pair[1] / 3);
        if a == b {
            return None;
        }
        edges.push((a.min(b), a.max(b)));
    }
    edges.sort_unstable();
    if edges.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some(edges)
}

/// Hamiltonian cycle + vertex perfect matching; `None` if the matching reuses a cycle edge.
fn sample_cycle_matching(m: u32, rng: &mut ChaCha8Rng) -> Option<Vec<(u32, u32)>> {
    let mut vertices: Vec<u32> = (0..m).collect();
    vertices.shuffle(rng);
    let mut edges: Vec<(u32, u32)> = (0..m)
        .map(|i| {
            let j = (i + 1) % m;
            (i.min(j), i.max(j))
        })
        .collect();
    for pair in vertices.chunks_exact(2) {
        let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        // adjacent on the cycle -> would duplicate a cycle edge
        if b - a == 1 || (a == 0 && b == m - 1) {
            return None;
        }
        edges.push((a, b));
    }
    edges.sort_unstable();
    Some(edges)
}

// ============================================================================
// tests
// ============================================================================
