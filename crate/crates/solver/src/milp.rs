//! Best-bound branch and bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::lp::{solve_lp_with, Basis, Direction, LpProblem, LpStatus};
use crate::simplex::SimplexOptions;
use crate::SolverError;

#[derive(Clone, Debug)]
pub struct MilpProblem {
    pub lp: LpProblem,
    /// Indices of the binary variables. Their bounds are clamped to `[0, 1]`.
    pub binaries: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct MilpOptions {
    pub abs_gap: f64,
    pub node_limit: usize,
    pub integrality_tol: f64,
    /// Run the rounding heuristic every this many nodes (0 disables it).
    pub rounding_every: usize,
    pub simplex: SimplexOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            abs_gap: 1e-6,
            node_limit: 100_000,
            integrality_tol: 1e-6,
            rounding_every: 20,
            simplex: SimplexOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Search stopped at the node limit; the incumbent, if any, is the best found.
    NodeLimit,
}

#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Objective of the incumbent in the problem's own sense.
    pub objective: f64,
    /// Best proven bound in the problem's own sense.
    pub bound: f64,
    /// `|objective - bound|`, infinite without an incumbent.
    pub gap: f64,
    pub nodes: usize,
}

struct Node {
    id: usize,
    // Bound in the minimization sense.
    bound: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    basis: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: the smallest bound, then the smallest id, comes out first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Search<'a> {
    p: &'a MilpProblem,
    opts: &'a MilpOptions,
    sign: f64,
    best: f64,
    incumbent: Option<Vec<f64>>,
}

impl Search<'_> {
    /// Fixes the binaries at the rounded values of `x`, re-solves, and keeps the
    /// result if it improves the incumbent.
    fn try_incumbent(&mut self, x: &[f64], lower: &[f64], upper: &[f64]) -> Result<(), SolverError> {
        let mut lp = self.p.lp.clone();
        lp.lower = lower.to_vec();
        lp.upper = upper.to_vec();
        for &j in &self.p.binaries {
            let v = x[j].round().clamp(0.0, 1.0);
            if v < lower[j] || v > upper[j] {
                return Ok(());
            }
            lp.lower[j] = v;
            lp.upper[j] = v;
        }
        let sol = solve_lp_with(&lp, None, &self.opts.simplex)?;
        if sol.status == LpStatus::Optimal {
            let obj = self.sign * sol.objective;
            if obj < self.best {
                let mut xs = sol.x;
                for &j in &self.p.binaries {
                    xs[j] = xs[j].round();
                }
                self.best = obj;
                self.incumbent = Some(xs);
            }
        }
        Ok(())
    }
}

pub fn solve_milp(p: &MilpProblem, opts: &MilpOptions) -> Result<MilpSolution, SolverError> {
    p.lp.validate()?;
    let sign = match p.lp.direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let mut lower = p.lp.lower.clone();
    let mut upper = p.lp.upper.clone();
    for &j in &p.binaries {
        if j >= p.lp.num_vars() {
            return Err(SolverError::Dimension(format!("binary index {j} out of range")));
        }
        lower[j] = lower[j].max(0.0).ceil();
        upper[j] = upper[j].min(1.0).floor();
    }
    let mut search = Search {
        p,
        opts,
        sign,
        best: f64::INFINITY,
        incumbent: None,
    };
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        id: 0,
        bound: f64::NEG_INFINITY,
        lower,
        upper,
        basis: None,
    });
    let mut next_id = 1;
    let mut nodes = 0usize;
    let mut global_bound = f64::NEG_INFINITY;
    let mut hit_limit = false;
    let mut lp = p.lp.clone();

    while let Some(node) = heap.pop() {
        if node.bound >= search.best - opts.abs_gap {
            // Best-bound order: every remaining node is at least as bad.
            global_bound = node.bound;
            heap.clear();
            break;
        }
        if nodes >= opts.node_limit {
            global_bound = node.bound;
            heap.push(node);
            hit_limit = true;
            break;
        }
        nodes += 1;
        lp.lower.clone_from(&node.lower);
        lp.upper.clone_from(&node.upper);
        let sol = solve_lp_with(&lp, node.basis.as_ref(), &opts.simplex)?;
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Ok(MilpSolution {
                    status: MilpStatus::Unbounded,
                    incumbent: None,
                    objective: sign * f64::NEG_INFINITY,
                    bound: sign * f64::NEG_INFINITY,
                    gap: f64::INFINITY,
                    nodes,
                })
            }
            LpStatus::Optimal => {}
        }
        let obj = sign * sol.objective;
        if obj >= search.best - opts.abs_gap {
            continue;
        }
        // Most fractional binary, lowest index on ties.
        let mut branch = None;
        let mut frac_best = opts.integrality_tol;
        for &j in &p.binaries {
            let f = (sol.x[j] - sol.x[j].floor()).min(sol.x[j].ceil() - sol.x[j]);
            if f > frac_best {
                frac_best = f;
                branch = Some(j);
            }
        }
        let Some(j) = branch else {
            search.try_incumbent(&sol.x, &node.lower, &node.upper)?;
            continue;
        };
        if opts.rounding_every > 0 && (nodes == 1 || nodes % opts.rounding_every == 0) {
            search.try_incumbent(&sol.x, &node.lower, &node.upper)?;
        }
        for v in [0.0, 1.0] {
            let mut lo = node.lower.clone();
            let mut up = node.upper.clone();
            lo[j] = v;
            up[j] = v;
            heap.push(Node {
                id: next_id,
                bound: obj,
                lower: lo,
                upper: up,
                basis: sol.basis.clone(),
            });
            next_id += 1;
        }
    }
    if !hit_limit {
        // Exhausted or pruned: the incumbent is proven within the gap.
        global_bound = if global_bound == f64::NEG_INFINITY {
            search.best
        } else {
            global_bound.min(search.best)
        };
    }

    let status = if hit_limit {
        MilpStatus::NodeLimit
    } else if search.incumbent.is_some() {
        MilpStatus::Optimal
    } else {
        MilpStatus::Infeasible
    };
    let objective = if search.incumbent.is_some() { sign * search.best } else { f64::NAN };
    let gap = if search.incumbent.is_some() {
        (search.best - global_bound).max(0.0)
    } else {
        f64::INFINITY
    };
    Ok(MilpSolution {
        status,
        incumbent: search.incumbent,
        objective,
        bound: sign * global_bound,
        gap,
        nodes,
    })
}
