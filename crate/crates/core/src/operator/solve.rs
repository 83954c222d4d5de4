//! Absorbed-chain solver: the walk below a target level, with that level
//! absorbing.
//!
//! Interior states are every vertex above the target level (flat indices
//! `0..2^t-1`), absorbing states the level itself. Two solve routes share one
//! interface: a dense LU of (I - Q) whenever the whole chain has at most
//! [`DENSE_STATE_LIMIT`] states, damped fixed-point sweeps beyond that. The
//! substochastic interior block has spectral radius < 1 (every interior
//! vertex leads to the target), so the sweeps converge at a geometric rate.
//!
//! Both directions of the chain are exposed: absorption measures ("where
//! does mass injected at the source leave?", a transpose solve) and harmonic
//! extension ("expected boundary value seen from each interior vertex", a
//! forward solve). Reported residuals are recomputed from the returned
//! iterate, never inferred from the solver's own stopping rule.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;

use crate::error::{Error, Result};
use crate::graph::{LeveledGraph, VertexId};

/// Largest total chain size (interior + absorbing) solved by dense LU.
pub const DENSE_STATE_LIMIT: usize = 4097;

enum ChainMethod {
    Dense { lu: PartialPivLu<f64> },
    Sweep { damping: f64, tol: f64, max_iter: u64 },
}

pub struct AbsorbedChain<'g> {
    graph: &'g LeveledGraph,
    target: u32,
    interior: usize,
    method: ChainMethod,
}

/// Absorption weights over the target level from a given source.
#[derive(Debug, Clone)]
pub struct Absorption {
    pub weights: Vec<f64>,
    pub residual: f64,
    pub iterations: u64,
}

/// Interior expected values of a boundary function.
#[derive(Debug, Clone)]
pub struct Extension {
    pub values: Vec<f64>,
    pub residual: f64,
    pub iterations: u64,
}

impl<'g> AbsorbedChain<'g> {
    fn validate(g: &LeveledGraph, target: u32) -> Result<()> {
        if target == 0 || target > g.depth() {
            return Err(Error::invalid_argument(format!(
                "target level {target} must lie in 1..={}",
                g.depth()
            )));
        }
        Ok(())
    }

    /// Dense when the chain fits [`DENSE_STATE_LIMIT`], sweeps otherwise.
    pub fn new(g: &'g LeveledGraph, target: u32) -> Result<Self> {
        AbsorbedChain::validate(g, target)?;
        let interior = (1usize << target) - 1;
        let total = 2 * interior + 1;
        let mut chain = AbsorbedChain {
            graph: g,
            target,
            interior,
            method: ChainMethod::Sweep {
                damping: 1.0,
                tol: 1e-12,
                max_iter: 1_000_000,
            },
        };
        if total <= DENSE_STATE_LIMIT {
            chain.method = ChainMethod::Dense {
                lu: chain.interior_matrix().partial_piv_lu(),
            };
        }
        Ok(chain)
    }

    /// Sweep route regardless of size, for dense/sweep agreement checks.
    pub fn new_sweep(
        g: &'g LeveledGraph,
        target: u32,
        damping: f64,
        tol: f64,
        max_iter: u64,
    ) -> Result<Self> {
        AbsorbedChain::validate(g, target)?;
        if !(0.0 < damping && damping <= 1.0) {
            return Err(Error::invalid_argument(format!(
                "damping must lie in (0, 1], got {damping}"
            )));
        }
        Ok(AbsorbedChain {
            graph: g,
            target,
            interior: (1usize << target) - 1,
            method: ChainMethod::Sweep {
                damping,
                tol,
                max_iter,
            },
        })
    }

    /// Absorption measure of a unit mass started at `v`.
    pub fn absorb_from_vertex(&self, v: VertexId) -> Result<Absorption> {
        if !self.graph.contains(v) {
            return Err(Error::invalid_argument(format!("vertex {v} not in graph")));
        }
        if v.level >= self.target {
            return Err(Error::invalid_argument(format!(
                "start {v} must lie strictly above target level {}",
                self.target
            )));
        }
        let mut source = vec![0.0; self.interior];
        source[v.flat()] = 1.0;
        self.absorb_from(&source)
    }

    /// Absorption measure of an arbitrary source over the interior:
    /// solves (I - Q)^T nu = source, then pushes the visit counts `nu`
    /// through the one-step law onto the target level.
    pub fn absorb_from(&self, source: &[f64]) -> Result<Absorption> {
        let ni = self.interior;
        if source.len() != ni {
            return Err(Error::invalid_argument(format!(
                "source length {} does not match interior size {ni}",
                source.len()
            )));
        }
        let (nu, iterations) = match &self.method {
            ChainMethod::Dense { lu } => {
                let mut rhs = Mat::from_fn(ni, 1, |i, _| source[i]);
                lu.solve_transpose_in_place(rhs.as_mut());
                ((0..ni).map(|i| rhs[(i, 0)]).collect::<Vec<f64>>(), 0)
            }
            ChainMethod::Sweep {
                damping,
                tol,
                max_iter,
            } => self.sweep_transpose(source, *damping, *tol, *max_iter)?,
        };
        let residual = self.transpose_residual(&nu, source);
        Ok(Absorption {
            weights: self.scatter_to_boundary(&nu),
            residual,
            iterations,
        })
    }

    /// Batched absorption rows for several interior starts (dense route
    /// only): one factorization, one multi-column solve.
    pub fn absorb_from_vertices(&self, starts: &[VertexId]) -> Result<(Vec<Vec<f64>>, f64)> {
        let ChainMethod::Dense { lu } = &self.method else {
            // sweep route: no batching to share, just loop
            let mut rows = Vec::with_capacity(starts.len());
            let mut residual = 0.0f64;
            for &v in starts {
                let a = self.absorb_from_vertex(v)?;
                residual = residual.max(a.residual);
                rows.push(a.weights);
            }
            return Ok((rows, residual));
        };
        let ni = self.interior;
        for &v in starts {
            if !self.graph.contains(v) || v.level >= self.target {
                return Err(Error::invalid_argument(format!(
                    "start {v} must lie strictly above target level {}",
                    self.target
                )));
            }
        }
        let mut rhs = Mat::zeros(ni, starts.len());
        for (k, &v) in starts.iter().enumerate() {
            rhs[(v.flat(), k)] = 1.0;
        }
        lu.solve_transpose_in_place(rhs.as_mut());
        let mut rows = Vec::with_capacity(starts.len());
        let mut residual = 0.0f64;
        let mut nu = vec![0.0; ni];
        let mut source = vec![0.0; ni];
        for (k, &v) in starts.iter().enumerate() {
            for i in 0..ni {
                nu[i] = rhs[(i, k)];
            }
            source[v.flat()] = 1.0;
            residual = residual.max(self.transpose_residual(&nu, &source));
            source[v.flat()] = 0.0;
            rows.push(self.scatter_to_boundary(&nu));
        }
        Ok((rows, residual))
    }

    /// Expected boundary value at each interior vertex: solves
    /// (I - Q) w = R f for a function `f` on the target level.
    pub fn harmonic_extension(&self, f: &[f64]) -> Result<Extension> {
        let ni = self.interior;
        if f.len() != ni + 1 {
            return Err(Error::invalid_argument(format!(
                "boundary function length {} does not match level size {}",
                f.len(),
                ni + 1
            )));
        }
        let rf = self.boundary_pull(f);
        let (values, iterations) = match &self.method {
            ChainMethod::Dense { lu } => {
                let mut rhs = Mat::from_fn(ni, 1, |i, _| rf[i]);
                lu.solve_in_place(rhs.as_mut());
                ((0..ni).map(|i| rhs[(i, 0)]).collect::<Vec<f64>>(), 0)
            }
            ChainMethod::Sweep {
                damping,
                tol,
                max_iter,
            } => self.sweep_forward(&rf, *damping, *tol, *max_iter)?,
        };
        let residual = self.forward_residual(&values, &rf);
        Ok(Extension {
            values,
            residual,
            iterations,
        })
    }

    /// nu <- (1-w) nu + w (source + Q^T nu), stopping on the sup-norm
    /// increment, which for w = 1 equals the current residual.
    fn sweep_transpose(
        &self,
        source: &[f64],
        damping: f64,
        tol: f64,
        max_iter: u64,
    ) -> Result<(Vec<f64>, u64)> {
        let ni = self.interior;
        let g = self.graph;
        let mut nu = vec![0.0f64; ni];
        let mut y = vec![0.0f64; ni];
        for iter in 1..=max_iter {
            y.copy_from_slice(source);
            for u in 0..ni {
                if nu[u] == 0.0 {
                    continue;
                }
                let slots = g.slot_targets(u);
                let w = nu[u] / slots.len() as f64;
                for &t in slots {
                    if (t as usize) < ni {
                        y[t as usize] += w;
                    }
                }
            }
            let mut delta = 0.0f64;
            for i in 0..ni {
                let next = (1.0 - damping) * nu[i] + damping * y[i];
                delta = delta.max((next - nu[i]).abs());
                nu[i] = next;
            }
            if delta <= tol {
                return Ok((nu, iter));
            }
        }
        Err(Error::numeric(format!(
            "absorption sweep did not reach tol {tol} within {max_iter} iterations"
        )))
    }

    /// w <- (1-d) w + d (R f + Q w), gather form.
    fn sweep_forward(
        &self,
        rf: &[f64],
        damping: f64,
        tol: f64,
        max_iter: u64,
    ) -> Result<(Vec<f64>, u64)> {
        let ni = self.interior;
        let g = self.graph;
        let mut w = vec![0.0f64; ni];
        for iter in 1..=max_iter {
            let mut delta = 0.0f64;
            for u in 0..ni {
                let slots = g.slot_targets(u);
                let mut acc = 0.0;
                for &t in slots {
                    if (t as usize) < ni {
                        acc += w[t as usize];
                    }
                }
                let next = (1.0 - damping) * w[u] + damping * (rf[u] + acc / slots.len() as f64);
                delta = delta.max((next - w[u]).abs());
                w[u] = next;
            }
            if delta <= tol {
                return Ok((w, iter));
            }
        }
        Err(Error::numeric(format!(
            "extension sweep did not reach tol {tol} within {max_iter} iterations"
        )))
    }

    /// max |(I - Q)^T nu - source|.
    fn transpose_residual(&self, nu: &[f64], source: &[f64]) -> f64 {
        let ni = self.interior;
        let g = self.graph;
        let mut r: Vec<f64> = (0..ni).map(|i| nu[i] - source[i]).collect();
        for u in 0..ni {
            if nu[u] == 0.0 {
                continue;
            }
            let slots = g.slot_targets(u);
            let w = nu[u] / slots.len() as f64;
            for &t in slots {
                if (t as usize) < ni {
                    r[t as usize] -= w;
                }
            }
        }
        r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// max |(I - Q) w - R f|.
    fn forward_residual(&self, w: &[f64], rf: &[f64]) -> f64 {
        let ni = self.interior;
        let g = self.graph;
        let mut worst = 0.0f64;
        for u in 0..ni {
            let slots = g.slot_targets(u);
            let mut acc = 0.0;
            for &t in slots {
                if (t as usize) < ni {
                    acc += w[t as usize];
                }
            }
            worst = worst.max((w[u] - acc / slots.len() as f64 - rf[u]).abs());
        }
        worst
    }
}

impl AbsorbedChain<'_> {
    pub fn is_dense(&self) -> bool {
        matches!(self.method, ChainMethod::Dense { .. })
    }

    pub fn target_level(&self) -> u32 {
        self.target
    }

    pub fn interior_size(&self) -> usize {
        self.interior
    }

    /// Number of absorbing states.
    pub fn boundary_size(&self) -> usize {
        self.interior + 1
    }

    /// Dense (I - Q) over the interior.
    fn interior_matrix(&self) -> Mat<f64> {
        let ni = self.interior;
        let mut a = Mat::zeros(ni, ni);
        for u in 0..ni {
            a[(u, u)] += 1.0;
            let slots = self.graph.slot_targets(u);
            let w = 1.0 / slots.len() as f64;
            for &t in slots {
                if (t as usize) < ni {
                    a[(u, t as usize)] -= w;
                }
            }
        }
        a
    }

    /// Pushes visit counts through the one-step law onto the target level.
    fn scatter_to_boundary(&self, nu: &[f64]) -> Vec<f64> {
        let ni = self.interior;
        let mut h = vec![0.0; ni + 1];
        for u in 0..ni {
            if nu[u] == 0.0 {
                continue;
            }
            let slots = self.graph.slot_targets(u);
            let w = nu[u] / slots.len() as f64;
            for &t in slots {
                if (t as usize) >= ni {
                    h[t as usize - ni] += w;
                }
            }
        }
        h
    }

    /// (R f)(u): one-step expected boundary value, zero off the last
    /// interior level.
    fn boundary_pull(&self, f: &[f64]) -> Vec<f64> {
        let ni = self.interior;
        let mut rf = vec![0.0; ni];
        for (u, slot) in rf.iter_mut().enumerate() {
            let slots = self.graph.slot_targets(u);
            let mut acc = 0.0;
            for &t in slots {
                if (t as usize) >= ni {
                    acc += f[t as usize - ni];
                }
            }
            *slot = acc / slots.len() as f64;
        }
        rf
    }
}

// ============================================================================
// tests
// ============================================================================
