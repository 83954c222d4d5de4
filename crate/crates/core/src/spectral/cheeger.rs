//! Edge-expansion diagnostics.
//!
//! Boundaries count *distinct* vertices and ignore self-loop slots. Two
//! conventions coexist:
//!
//! * full-graph (`cheeger_brute`, `cheeger_search`): the boundary of S is
//!   every vertex outside S adjacent to S anywhere in the graph;
//! * induced (`ball_cheeger`): S ranges over subsets of a ball of at most
//!   half its size, and only boundary vertices inside the ball count.
//!
//! Bottom-level vertices have clipped neighborhoods (their child slots fold
//! back as self-loops), so every entry point refuses sets that touch the
//! bottom level: ratios there would measure the truncation, not the graph.

use std::collections::BTreeSet;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{LeveledGraph, VertexId};

#[derive(Debug, Clone)]
pub struct CheegerResult {
    pub ratio: f64,
    pub witness: Vec<VertexId>,
    pub boundary_size: usize,
    /// True when every admissible subset was enumerated.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, Copy)]
pub enum SearchInit {
    Singleton(VertexId),
    Ball { center: VertexId, radius: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heuristic {
    Greedy,
    Anneal,
}

/// Hard cap on exhaustive universes: 2^20 subsets.
pub const MAX_BRUTE_UNIVERSE: usize = 20;

// --- fixed-width bitsets over at most 256 "relevant" vertices ---

const WORDS: usize = 4;
type Bits = [u64; WORDS];

fn bit_set(b: &mut Bits, i: usize) {
    b[i / 64] |= 1 << (i % 64);
}

fn bor(a: &Bits, b: &Bits) -> Bits {
    std::array::from_fn(|i| a[i] | b[i])
}

fn bdiff(a: &Bits, b: &Bits) -> Bits {
    std::array::from_fn(|i| a[i] & !b[i])
}

fn bcount(a: &Bits) -> u32 {
    a.iter().map(|w| w.count_ones()).sum()
}

struct Exhaustive<'a> {
    member_bit: &'a [Bits],
    nbr_mask: &'a [Bits],
    max_size: usize,
    best_ratio: f64,
    best_mask: u64,
    best_boundary: usize,
}

impl Exhaustive<'_> {
    /// Depth-first over subsets, include-branch first, so ties keep the
    /// lexicographically earliest witness.
    fn dfs(&mut self, idx: usize, mask: u64, s: Bits, n: Bits, size: usize) {
        if idx == self.member_bit.len() {
            if size == 0 {
                return;
            }
            let boundary = bcount(&bdiff(&n, &s)) as usize;
            let ratio = boundary as f64 / size as f64;
            if ratio < self.best_ratio {
                self.best_ratio = ratio;
                self.best_mask = mask;
                self.best_boundary = boundary;
            }
            return;
        }
        if size < self.max_size {
            self.dfs(
                idx + 1,
                mask | (1 << idx),
                bor(&s, &self.member_bit[idx]),
                bor(&n, &self.nbr_mask[idx]),
                size + 1,
            );
        }
        self.dfs(idx + 1, mask, s, n, size);
    }
}

/// Compact maps for a universe: relevant vertex list, per-member bit and
/// distinct-neighbor mask. `restrict` limits neighbor masks to the universe
/// itself (the induced convention).
fn masks(
    g: &LeveledGraph,
    universe: &[u32],
    restrict: bool,
) -> Result<(Vec<Bits>, Vec<Bits>)> {
    let members: BTreeSet<u32> = universe.iter().copied().collect();
    let mut relevant: BTreeSet<u32> = members.clone();
    if !restrict {
        for &u in universe {
            for &t in g.slot_targets(u as usize) {
                if t != u {
                    relevant.insert(t);
                }
            }
        }
    }
    if relevant.len() > WORDS * 64 {
        return Err(Error::invalid_argument(format!(
            "universe closure has {} vertices; the exhaustive path handles at most {}",
            relevant.len(),
            WORDS * 64
        )));
    }
    let index: std::collections::HashMap<u32, usize> =
        relevant.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let mut member_bit = Vec::with_capacity(universe.len());
    let mut nbr_mask = Vec::with_capacity(universe.len());
    for &u in universe {
        let mut mb = [0u64; WORDS];
        bit_set(&mut mb, index[&u]);
        member_bit.push(mb);
        let mut nm = [0u64; WORDS];
        for &t in g.slot_targets(u as usize) {
            if t == u || (restrict && !members.contains(&t)) {
                continue;
            }
            bit_set(&mut nm, index[&t]);
        }
        nbr_mask.push(nm);
    }
    Ok((member_bit, nbr_mask))
}

fn check_universe(g: &LeveledGraph, universe: &[VertexId]) -> Result<Vec<u32>> {
    if universe.is_empty() {
        return Err(Error::invalid_argument("universe is empty"));
    }
    let mut flats = Vec::with_capacity(universe.len());
    for &v in universe {
        if !g.contains(v) {
            return Err(Error::invalid_argument(format!("vertex {v} not in graph")));
        }
        if v.level >= g.depth() {
            return Err(Error::invalid_argument(format!(
                "vertex {v} lies on the clipped bottom level {}",
                g.depth()
            )));
        }
        flats.push(v.flat() as u32);
    }
    let distinct: BTreeSet<u32> = flats.iter().copied().collect();
    if distinct.len() != flats.len() {
        return Err(Error::invalid_argument("universe has repeated vertices"));
    }
    Ok(flats)
}

fn witness_from_mask(universe: &[u32], mask: u64) -> Vec<VertexId> {
    let mut w: Vec<VertexId> = universe
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &f)| VertexId::from_flat(f as usize))
        .collect();
    w.sort_unstable();
    w
}

/// Exact minimum of |boundary(S)| / |S| over nonempty S within `universe`,
/// full-graph boundary convention.
pub fn cheeger_brute(
    g: &LeveledGraph,
    universe: &[VertexId],
    max_exhaustive: usize,
) -> Result<CheegerResult> {
    let flats = check_universe(g, universe)?;
    let cap = max_exhaustive.min(MAX_BRUTE_UNIVERSE);
    if flats.len() > cap {
        return Err(Error::invalid_argument(format!(
            "universe of {} exceeds the exhaustive cap {cap}; use cheeger_search",
            flats.len()
        )));
    }
    let (member_bit, nbr_mask) = masks(g, &flats, false)?;
    let mut ex = Exhaustive {
        member_bit: &member_bit,
        nbr_mask: &nbr_mask,
        max_size: flats.len(),
        best_ratio: f64::INFINITY,
        best_mask: 0,
        best_boundary: 0,
    };
    ex.dfs(0, 0, [0; WORDS], [0; WORDS], 0);
    Ok(CheegerResult {
        ratio: ex.best_ratio,
        witness: witness_from_mask(&flats, ex.best_mask),
        boundary_size: ex.best_boundary,
        exhaustive: true,
    })
}

/// Full-graph ratio of an explicit set; also the search objective.
fn full_ratio(g: &LeveledGraph, s: &BTreeSet<u32>) -> (f64, usize) {
    let mut boundary = BTreeSet::new();
    for &u in s {
        for &t in g.slot_targets(u as usize) {
            if t != u && !s.contains(&t) {
                boundary.insert(t);
            }
        }
    }
    (boundary.len() as f64 / s.len() as f64, boundary.len())
}

/// Distinct neighbors of S above the bottom level, not already members.
fn growth_candidates(g: &LeveledGraph, s: &BTreeSet<u32>) -> Vec<u32> {
    let mut out = BTreeSet::new();
    for &u in s {
        for &t in g.slot_targets(u as usize) {
            if t != u
                && !s.contains(&t)
                && (VertexId::from_flat(t as usize).level as u32) < g.depth()
            {
                out.insert(t);
            }
        }
    }
    out.into_iter().collect()
}

/// Heuristic minimization of the full-graph ratio. Deterministic for a fixed
/// seed; the result is an upper bound on the true minimum, never a claim.
pub fn cheeger_search(
    g: &LeveledGraph,
    init: SearchInit,
    size_budget: usize,
    heuristic: Heuristic,
    seed: u64,
) -> Result<CheegerResult> {
    let start: Vec<VertexId> = match init {
        SearchInit::Singleton(v) => vec![v],
        SearchInit::Ball { center, radius } => {
            if center.level + radius >= g.depth() {
                return Err(Error::invalid_argument(format!(
                    "ball of radius {radius} at {center} can reach the bottom level"
                )));
            }
            ball(g, center, radius)?
        }
    };
    let flats = check_universe(g, &start)?;
    if flats.len() > size_budget {
        return Err(Error::invalid_argument(format!(
            "initial set of {} exceeds size budget {size_budget}",
            flats.len()
        )));
    }
    let mut s: BTreeSet<u32> = flats.into_iter().collect();
    match heuristic {
        Heuristic::Greedy => greedy(g, &mut s, size_budget),
        Heuristic::Anneal => anneal(g, &mut s, size_budget, seed),
    }
    let (ratio, boundary_size) = full_ratio(g, &s);
    let mut witness: Vec<VertexId> = s
        .iter()
        .map(|&f| VertexId::from_flat(f as usize))
        .collect();
    witness.sort_unstable();
    Ok(CheegerResult {
        ratio,
        witness,
        boundary_size,
        exhaustive: false,
    })
}

fn greedy(g: &LeveledGraph, s: &mut BTreeSet<u32>, size_budget: usize) {
    let (mut ratio, _) = full_ratio(g, s);
    while s.len() < size_budget {
        let mut best: Option<(f64, u32)> = None;
        for c in growth_candidates(g, s) {
            s.insert(c);
            let (r, _) = full_ratio(g, s);
            s.remove(&c);
            if r < ratio && best.is_none_or(|(br, _)| r < br) {
                best = Some((r, c));
            }
        }
        match best {
            Some((r, c)) => {
                s.insert(c);
                ratio = r;
            }
            None => break,
        }
    }
}

fn anneal(g: &LeveledGraph, s: &mut BTreeSet<u32>, size_budget: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut cur, _) = full_ratio(g, s);
    let mut best = (cur, s.clone());
    let mut temp = 0.5f64;
    let steps = 500 + 200 * size_budget as u64;
    for _ in 0..steps {
        let grow = s.len() < size_budget && (s.len() <= 1 || rng.random::<f64>() < 0.5);
        if grow {
            let cands = growth_candidates(g, s);
            if cands.is_empty() {
                continue;
            }
            let c = cands[rng.random_range(0..cands.len())];
            s.insert(c);
            let (r, _) = full_ratio(g, s);
            if r <= cur || rng.random::<f64>() < ((cur - r) / temp).exp() {
                cur = r;
            } else {
                s.remove(&c);
            }
        } else {
            if s.len() <= 1 {
                continue;
            }
            let members: Vec<u32> = s.iter().copied().collect();
            let c = members[rng.random_range(0..members.len())];
            s.remove(&c);
            let (r, _) = full_ratio(g, s);
            if r <= cur || rng.random::<f64>() < ((cur - r) / temp).exp() {
                cur = r;
            } else {
                s.insert(c);
            }
        }
        if cur < best.0 {
            best = (cur, s.clone());
        }
        temp *= 0.995;
    }
    *s = best.1;
}

/// Closed ball in graph distance (self-loop slots do not extend it),
/// sorted in level order.
pub fn ball(g: &LeveledGraph, center: VertexId, radius: u32) -> Result<Vec<VertexId>> {
    if !g.contains(center) {
        return Err(Error::invalid_argument(format!("vertex {center} not in graph")));
    }
    let mut dist = std::collections::HashMap::new();
    dist.insert(center.flat() as u32, 0u32);
    let mut frontier = vec![center.flat() as u32];
    for d in 1..=radius {
        let mut next = Vec::new();
        for &u in &frontier {
            for &t in g.slot_targets(u as usize) {
                if t != u && !dist.contains_key(&t) {
                    dist.insert(t, d);
                    next.push(t);
                }
            }
        }
        frontier = next;
    }
    let mut flats: Vec<u32> = dist.into_keys().collect();
    flats.sort_unstable();
    Ok(flats
        .into_iter()
        .map(|f| VertexId::from_flat(f as usize))
        .collect())
}

#[derive(Debug, Clone)]
pub struct BallExpansionRow {
    pub radius: u32,
    pub ball_size: usize,
    pub result: CheegerResult,
}

/// Induced expansion profile of the balls of radius 1..=radius around
/// `center`: min over subsets of at most half the ball, boundary counted
/// inside the ball. Exhaustive when the ball has at most
/// [`MAX_BRUTE_UNIVERSE`] vertices, greedy otherwise.
pub fn ball_cheeger(
    g: &LeveledGraph,
    center: VertexId,
    radius: u32,
) -> Result<Vec<BallExpansionRow>> {
    if !g.contains(center) {
        return Err(Error::invalid_argument(format!("vertex {center} not in graph")));
    }
    if center.level + radius >= g.depth() {
        return Err(Error::invalid_argument(format!(
            "ball of radius {radius} at {center} can reach the clipped bottom level {}",
            g.depth()
        )));
    }
    let mut rows = Vec::with_capacity(radius as usize);
    for r in 1..=radius {
        let b = ball(g, center, r)?;
        let flats: Vec<u32> = b.iter().map(|v| v.flat() as u32).collect();
        let result = induced_expansion(g, &flats)?;
        rows.push(BallExpansionRow {
            radius: r,
            ball_size: b.len(),
            result,
        });
    }
    Ok(rows)
}

fn induced_ratio(g: &LeveledGraph, s: &BTreeSet<u32>, members: &BTreeSet<u32>) -> (f64, usize) {
    let mut boundary = BTreeSet::new();
    for &u in s {
        for &t in g.slot_targets(u as usize) {
            if t != u && !s.contains(&t) && members.contains(&t) {
                boundary.insert(t);
            }
        }
    }
    (boundary.len() as f64 / s.len() as f64, boundary.len())
}

fn induced_expansion(g: &LeveledGraph, universe: &[u32]) -> Result<CheegerResult> {
    let half = (universe.len() / 2).max(1);
    if universe.len() <= MAX_BRUTE_UNIVERSE {
        let (member_bit, nbr_mask) = masks(g, universe, true)?;
        let mut ex = Exhaustive {
            member_bit: &member_bit,
            nbr_mask: &nbr_mask,
            max_size: half,
            best_ratio: f64::INFINITY,
            best_mask: 0,
            best_boundary: 0,
        };
        ex.dfs(0, 0, [0; WORDS], [0; WORDS], 0);
        return Ok(CheegerResult {
            ratio: ex.best_ratio,
            witness: witness_from_mask(universe, ex.best_mask),
            boundary_size: ex.best_boundary,
            exhaustive: true,
        });
    }

    // greedy fallback: best singleton, then grow inside the ball up to half
    let members: BTreeSet<u32> = universe.iter().copied().collect();
    let mut s = BTreeSet::from([*universe
        .iter()
        .min_by(|&&a, &&b| {
            let ra = induced_ratio(g, &BTreeSet::from([a]), &members).0;
            let rb = induced_ratio(g, &BTreeSet::from([b]), &members).0;
            ra.total_cmp(&rb).then(a.cmp(&b))
        })
        .expect("nonempty universe")]);
    let (mut ratio, mut boundary) = induced_ratio(g, &s, &members);
    while s.len() < half {
        let mut best: Option<(f64, usize, u32)> = None;
        for &c in &members {
            if s.contains(&c) {
                continue;
            }
            s.insert(c);
            let (r, bd) = induced_ratio(g, &s, &members);
            s.remove(&c);
            if r < ratio && best.is_none_or(|(br, _, _)| r < br) {
                best = Some((r, bd, c));
            }
        }
        match best {
            Some((r, bd, c)) => {
                s.insert(c);
                ratio = r;
                boundary = bd;
            }
            None => break,
        }
    }
    let mut witness: Vec<VertexId> = s
        .iter()
        .map(|&f| VertexId::from_flat(f as usize))
        .collect();
    witness.sort_unstable();
    Ok(CheegerResult {
        ratio,
        witness,
        boundary_size: boundary,
        exhaustive: false,
    })
}

// ============================================================================
// tests
// ============================================================================
