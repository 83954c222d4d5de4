//! Leveled graphs: a depth-N binary tree whose levels each carry a 3-regular
//! expander, plus an unbalanced-tree variant used as a contrast case.
//!
//! The lazy step law gives every vertex of the standard variant exactly six
//! step slots, each of probability 1/6: one parent slot, two child slots and
//! three expander slots. Slots whose neighbor does not exist (the root's
//! parent, the bottom level's children, level 0's expander) degenerate to
//! self-loops, so the root keeps 4/6 of its mass in place and the bottom
//! level serves as an absorbing frontier only. The unbalanced variant has no
//! expanders; its step law is uniform over the incident tree-edge multiset
//! with right-child edges doubled.

mod expander;
mod io;

pub use expander::{build_expander_layer, layer_seed, ExpanderLayer, ExpanderModel};
pub use io::{deserialize_graph, read_graph_file, serialize_graph, write_graph_file};

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Address of a vertex: `index` runs over `0..2^level` within its level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId {
    pub level: u32,
    pub index: u64,
}

impl VertexId {
    pub const ROOT: VertexId = VertexId { level: 0, index: 0 };

    pub fn new(level: u32, index: u64) -> Self {
        VertexId { level, index }
    }

    pub fn parent(self) -> Option<VertexId> {
        (self.level > 0).then(|| VertexId::new(self.level - 1, self.index >> 1))
    }

    pub fn left_child(self) -> VertexId {
        VertexId::new(self.level + 1, 2 * self.index)
    }

    pub fn right_child(self) -> VertexId {
        VertexId::new(self.level + 1, 2 * self.index + 1)
    }

    /// Level-order position: level n starts at flat index `2^n - 1`.
    pub fn flat(self) -> usize {
        ((1u64 << self.level) - 1 + self.index) as usize
    }

    pub fn from_flat(flat: usize) -> VertexId {
        let level = (flat as u64 + 1).ilog2();
        VertexId::new(level, flat as u64 + 1 - (1 << level))
    }
}

impl std::fmt::Display for VertexId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.level, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphVariant {
    Standard,
    UnbalancedTree,
}

impl GraphVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphVariant::Standard => "standard",
            GraphVariant::UnbalancedTree => "unbalanced",
        }
    }
}

/// Expander generation knobs for [`build_graph`].
#[derive(Debug, Clone, Copy)]
pub struct ExpanderConfig {
    pub model: ExpanderModel,
    pub min_gap: f64,
    pub max_retries: u32,
}

impl Default for ExpanderConfig {
    fn default() -> Self {
        ExpanderConfig {
            model: ExpanderModel::Pairing,
            min_gap: 0.02,
            max_retries: 100,
        }
    }
}

/// Flat CSR table of step slots; targets are level-order flat indices.
#[derive(Debug, Clone, PartialEq)]
struct SlotTable {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl SlotTable {
    fn slots(&self, flat: usize) -> &[u32] {
        &self.targets[self.offsets[flat] as usize..self.offsets[flat + 1] as usize]
    }
}

/// A finite leveled graph of the given depth with its step law materialized.
#[derive(Debug, Clone)]
pub struct LeveledGraph {
    variant: GraphVariant,
    depth: u32,
    master_seed: u64,
    /// One layer per level `0..=depth` for the standard variant; empty otherwise.
    layers: Vec<ExpanderLayer>,
    slots: SlotTable,
}

impl PartialEq for LeveledGraph {
    /// Structural equality: variant, depth, seed and the per-level edge multisets.
    fn eq(&self, other: &Self) -> bool {
        self.variant == other.variant
            && self.depth == other.depth
            && self.master_seed == other.master_seed
            && self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.edges == b.edges)
    }
}

pub const MAX_DEPTH: u32 = 30;

/// Builds the standard variant: binary tree of `depth` with a certified
/// expander on every level, layer seeds derived from `master_seed`.
///
/// # Errors
/// `InvalidArgument` for unreasonable depths; `GenerationFailed` if some layer
/// cannot reach `config.min_gap` within the retry budget.
pub fn build_graph(depth: u32, master_seed: u64, config: &ExpanderConfig) -> Result<LeveledGraph> {
    if depth > MAX_DEPTH {
        return Err(Error::invalid_argument(format!(
            "depth {depth} exceeds the supported maximum {MAX_DEPTH}"
        )));
    }
    let mut layers = Vec::with_capacity(depth as usize + 1);
    for level in 0..=depth {
        layers.push(build_expander_layer(
            1u64 << level,
            config.model,
            config.min_gap,
            config.max_retries,
            layer_seed(master_seed, level),
        )?);
    }
    Ok(assemble(GraphVariant::Standard, depth, master_seed, layers))
}

/// Builds the unbalanced-tree variant: no expanders, left tree edges have
/// multiplicity 1 and right tree edges multiplicity 2.
pub fn build_unbalanced_tree(depth: u32) -> Result<LeveledGraph> {
    if depth > MAX_DEPTH {
        return Err(Error::invalid_argument(format!(
            "depth {depth} exceeds the supported maximum {MAX_DEPTH}"
        )));
    }
    Ok(assemble(GraphVariant::UnbalancedTree, depth, 0, Vec::new()))
}

/// Assembles the slot table. Used by the builders and the deserializer.
pub(crate) fn assemble(
    variant: GraphVariant,
    depth: u32,
    master_seed: u64,
    layers: Vec<ExpanderLayer>,
) -> LeveledGraph {
    let num_vertices = ((1u64 << (depth + 1)) - 1) as usize;
    let mut offsets = Vec::with_capacity(num_vertices + 1);
    let mut targets = Vec::new();
    offsets.push(0u32);

    match variant {
        GraphVariant::Standard => {
            let neighbor_lists: Vec<Vec<Vec<u32>>> =
                layers.iter().map(|l| l.neighbor_lists()).collect();
            for flat in 0..num_vertices {
                let v = VertexId::from_flat(flat);
                let self_flat = flat as u32;
                // slot 0: parent (or self at the root)
                targets.push(v.parent().map_or(self_flat, |p| p.flat() as u32));
                // slots 1-2: children (or selves on the bottom level)
                if v.level < depth {
                    targets.push(v.left_child().flat() as u32);
                    targets.push(v.right_child().flat() as u32);
                } else {
                    targets.push(self_flat);
                    targets.push(self_flat);
                }
                // slots 3-5: expander neighbors (or selves on level 0)
                if v.level == 0 {
                    targets.extend_from_slice(&[self_flat; 3]);
                } else {
                    let base = ((1u64 << v.level) - 1) as u32;
                    for &n in &neighbor_lists[v.level as usize][v.index as usize] {
                        targets.push(base + n);
                    }
                }
                offsets.push(targets.len() as u32);
            }
        }
        GraphVariant::UnbalancedTree => {
            for flat in 0..num_vertices {
                let v = VertexId::from_flat(flat);
                if let Some(p) = v.parent() {
                    let mult = if v.index % 2 == 0 { 1 } else { 2 };
                    for _ in 0..mult {
                        targets.push(p.flat() as u32);
                    }
                }
                if v.level < depth {
                    targets.push(v.left_child().flat() as u32);
                    targets.push(v.right_child().flat() as u32);
                    targets.push(v.right_child().flat() as u32);
                }
                offsets.push(targets.len() as u32);
            }
        }
    }

    LeveledGraph {
        variant,
        depth,
        master_seed,
        layers,
        slots: SlotTable { offsets, targets },
    }
}

impl LeveledGraph {
    pub fn variant(&self) -> GraphVariant {
        self.variant
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn layers(&self) -> &[ExpanderLayer] {
        &self.layers
    }

    pub fn layer(&self, level: u32) -> Option<&ExpanderLayer> {
        self.layers.get(level as usize)
    }

    pub fn num_vertices(&self) -> usize {
        ((1u64 << (self.depth + 1)) - 1) as usize
    }

    pub fn level_size(&self, level: u32) -> u64 {
        1u64 << level
    }

    /// Flat-index range of level `n` in level order.
    pub fn level_range(&self, level: u32) -> std::ops::Range<usize> {
        let start = ((1u64 << level) - 1) as usize;
        start..(start + (1usize << level))
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.level <= self.depth && v.index < (1u64 << v.level)
    }

    /// Raw step slots of a vertex (flat target indices, uniform probability each).
    pub fn slot_targets(&self, flat: usize) -> &[u32] {
        self.slots.slots(flat)
    }

    /// Aggregated one-step law at `v` as exact probabilities, sorted by target.
    /// Self-loop slots merge into a single entry.
    pub fn step_distribution(&self, v: VertexId) -> Result<Vec<(VertexId, Ratio<u64>)>> {
        if !self.contains(v) {
            return Err(Error::invalid_argument(format!("vertex {v} not in graph")));
        }
        let slots = self.slot_targets(v.flat());
        let total = slots.len() as u64;
        let mut counts: Vec<(u32, u64)> = Vec::with_capacity(slots.len());
        let mut sorted = slots.to_vec();
        sorted.sort_unstable();
        for t in sorted {
            match counts.last_mut() {
                Some((last, c)) if *last == t => *c += 1,
                _ => counts.push((t, 1)),
            }
        }
        Ok(counts
            .into_iter()
            .map(|(t, c)| (VertexId::from_flat(t as usize), Ratio::new(c, total)))
            .collect())
    }

    /// One step of the kernel acting on a measure over all vertices
    /// (`out = mu P`). A slotless vertex (depth-0 unbalanced root) keeps its mass.
    pub fn step_measure(&self, mu: &[f64]) -> Vec<f64> {
        assert_eq!(mu.len(), self.num_vertices(), "measure length mismatch");
        let mut out = vec![0.0; mu.len()];
        for u in 0..mu.len() {
            if mu[u] == 0.0 {
                continue;
            }
            let slots = self.slot_targets(u);
            if slots.is_empty() {
                out[u] += mu[u];
                continue;
            }
            let w = mu[u] / slots.len() as f64;
            for &t in slots {
                out[t as usize] += w;
            }
        }
        out
    }
}

// ============================================================================
// tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ratio(n: u64, d: u64) -> Ratio<u64> {
        Ratio::new(n, d)
    }

    #[test]
    fn vertex_flat_round_trip_and_tree_arithmetic() {
        for flat in 0..127usize {
            let v = VertexId::from_flat(flat);
            assert_eq!(v.flat(), flat);
        }
        let v = VertexId::new(3, 5);
        assert_eq!(v.parent(), Some(VertexId::new(2, 2)));
        assert_eq!(v.left_child(), VertexId::new(4, 10));
        assert_eq!(v.right_child(), VertexId::new(4, 11));
        assert_eq!(VertexId::ROOT.parent(), None);
    }

    #[test]
    fn standard_interior_step_masses_are_one_sixth_one_third_one_half() {
        let g = build_graph(4, 1, &ExpanderConfig::default()).unwrap();
        let v = VertexId::new(2, 1);
        let dist = g.step_distribution(v).unwrap();
        let total: Ratio<u64> = dist.iter().map(|(_, p)| *p).sum();
        assert_eq!(total, ratio(1, 1));

        let parent_mass: Ratio<u64> = dist
            .iter()
            .filter(|(t, _)| t.level == 1)
            .map(|(_, p)| *p)
            .sum();
        let child_mass: Ratio<u64> = dist
            .iter()
            .filter(|(t, _)| t.level == 3)
            .map(|(_, p)| *p)
            .sum();
        let level_mass: Ratio<u64> = dist
            .iter()
            .filter(|(t, _)| t.level == 2)
            .map(|(_, p)| *p)
            .sum();
        assert_eq!(parent_mass, ratio(1, 6));
        assert_eq!(child_mass, ratio(1, 3));
        assert_eq!(level_mass, ratio(1, 2));
    }

    #[test]
    fn root_keeps_four_sixths_and_splits_rest_between_children() {
        let g = build_graph(3, 9, &ExpanderConfig::default()).unwrap();
        let dist = g.step_distribution(VertexId::ROOT).unwrap();
        assert_eq!(
            dist,
            vec![
                (VertexId::ROOT, ratio(2, 3)),
                (VertexId::new(1, 0), ratio(1, 6)),
                (VertexId::new(1, 1), ratio(1, 6)),
            ]
        );
    }

    #[test]
    fn bottom_level_vertices_self_loop_on_their_child_slots() {
        let g = build_graph(2, 1, &ExpanderConfig::default()).unwrap();
        let v = VertexId::new(2, 3);
        let dist = g.step_distribution(v).unwrap();
        let self_mass = dist
            .iter()
            .find(|(t, _)| *t == v)
            .map(|(_, p)| *p)
            .unwrap();
        assert_eq!(self_mass, ratio(1, 3), "two missing child slots -> 2/6 self-mass");
    }

    #[test]
    fn depth_zero_graph_is_a_single_vertex_with_full_self_mass() {
        let g = build_graph(0, 4, &ExpanderConfig::default()).unwrap();
        assert_eq!(g.num_vertices(), 1);
        let dist = g.step_distribution(VertexId::ROOT).unwrap();
        assert_eq!(dist, vec![(VertexId::ROOT, ratio(1, 1))]);
    }

    #[test]
    fn unbalanced_root_steps_left_one_third_right_two_thirds() {
        let g = build_unbalanced_tree(3).unwrap();
        let dist = g.step_distribution(VertexId::ROOT).unwrap();
        assert_eq!(
            dist,
            vec![
                (VertexId::new(1, 0), ratio(1, 3)),
                (VertexId::new(1, 1), ratio(2, 3)),
            ]
        );
    }

    #[test]
    fn unbalanced_interior_slot_counts_depend_on_child_side() {
        let g = build_unbalanced_tree(3).unwrap();
        // left child: parent x1 + left x1 + right x2 = 4 slots
        let left = VertexId::new(1, 0);
        assert_eq!(g.slot_targets(left.flat()).len(), 4);
        // right child: parent x2 + left x1 + right x2 = 5 slots
        let right = VertexId::new(1, 1);
        assert_eq!(g.slot_targets(right.flat()).len(), 5);
        let dist = g.step_distribution(right).unwrap();
        assert_eq!(
            dist,
            vec![
                (VertexId::ROOT, ratio(2, 5)),
                (VertexId::new(2, 2), ratio(1, 5)),
                (VertexId::new(2, 3), ratio(2, 5)),
            ]
        );
        // bottom-level leaves step straight back to the parent
        let leaf = VertexId::new(3, 1);
        let dist = g.step_distribution(leaf).unwrap();
        assert_eq!(dist, vec![(VertexId::new(2, 0), ratio(1, 1))]);
    }

    #[test]
    fn builds_are_deterministic_per_seed() {
        let a = build_graph(5, 42, &ExpanderConfig::default()).unwrap();
        let b = build_graph(5, 42, &ExpanderConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = build_graph(5, 43, &ExpanderConfig::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn every_layer_of_a_build_carries_a_certificate() {
        let g = build_graph(6, 2, &ExpanderConfig::default()).unwrap();
        for level in 1..=6u32 {
            let layer = g.layer(level).unwrap();
            layer.check_degrees().unwrap();
            assert!(
                layer.certificate.is_some(),
                "level {level} should be certified at build time"
            );
        }
    }

    #[test]
    fn step_measure_conserves_mass_and_matches_distribution() {
        let g = build_graph(3, 7, &ExpanderConfig::default()).unwrap();
        let mut mu = vec![0.0; g.num_vertices()];
        let v = VertexId::new(2, 2);
        mu[v.flat()] = 1.0;
        let out = g.step_measure(&mu);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for (t, p) in g.step_distribution(v).unwrap() {
            let expect = *p.numer() as f64 / *p.denom() as f64;
            assert!((out[t.flat()] - expect).abs() < 1e-15);
        }
    }

    proptest! {
        // the step kernel of the standard variant is symmetric: slot counts
        // from u to v and from v to u agree (tree edges are mutual, expander
        // edges contribute one slot at each endpoint)
        #[test]
        fn standard_kernel_is_symmetric(seed in 0u64..50, depth in 1u32..5) {
            let g = build_graph(depth, seed, &ExpanderConfig::default()).unwrap();
            for u in 0..g.num_vertices() {
                for &t in g.slot_targets(u) {
                    let forward = g.slot_targets(u).iter().filter(|&&x| x == t).count();
                    let back = g.slot_targets(t as usize).iter().filter(|&&x| x == u as u32).count();
                    prop_assert_eq!(forward, back);
                }
            }
        }

        #[test]
        fn step_distribution_always_sums_to_one(seed in 0u64..20, depth in 0u32..5) {
            let g = build_graph(depth, seed, &ExpanderConfig::default()).unwrap();
            for flat in 0..g.num_vertices() {
                let v = VertexId::from_flat(flat);
                let total: Ratio<u64> = g.step_distribution(v).unwrap().iter().map(|(_, p)| *p).sum();
                prop_assert_eq!(total, Ratio::new(1u64, 1u64));
            }
        }
    }
}
