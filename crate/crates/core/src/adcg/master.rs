//! Master problems: the big-M MILP and the exact vertex scan.

use std::collections::HashMap;

use dispatch_solver::{
    solve_lp_warm, solve_milp, Basis, Direction, LpProblem, LpStatus, MilpOptions, MilpProblem, MilpStatus, RowSense,
    SparseMatrix,
};

use super::{AdcgError, AdcgOptions, RegionPolyhedron};
use crate::builder::LinearSystem;
use crate::geometry;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MasterKind {
    /// Big-M MILP over `(u, ζ, θ, Δw)`.
    Milp,
    /// Evaluate the dual violation at every vertex of the region. Exact
    /// because the violation is convex in Δw.
    VertexScan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MasterResult {
    pub u_star: Vec<f64>,
    pub dw_star: Vec<f64>,
    pub r: f64,
    /// MILP auxiliaries; empty for the vertex scan.
    pub zeta: Vec<f64>,
    pub theta: Vec<bool>,
    /// Vertices evaluated (vertex scan) or branch-and-bound nodes (MILP).
    pub work: usize,
}

/// `R(Δw) = max (b − C·Δw)ᵀu` over `Bᵀu = 0`, `u ∈ [−1, 0]`, with a warm
/// basis kept across objectives and a per-vertex cache.
pub struct DualEvaluator {
    lp: LpProblem,
    basis: Option<Basis>,
    cache: HashMap<Vec<i64>, (f64, Vec<f64>)>,
}

fn key(x: &[f64]) -> Vec<i64> {
    x.iter().map(|v| (v * 1e10).round() as i64).collect()
}

impl DualEvaluator {
    pub fn new(model: &LinearSystem) -> Self {
        let m = model.num_rows();
        let ny = model.num_y();
        let lp = LpProblem {
            direction: Direction::Maximize,
            objective: vec![0.0; m],
            matrix: model.b_mat.transpose(),
            senses: vec![RowSense::Eq; ny],
            rhs: vec![0.0; ny],
            lower: vec![-1.0; m],
            upper: vec![0.0; m],
        };
        Self { lp, basis: None, cache: HashMap::new() }
    }

    /// Violation and maximizing `u` at `dw`.
    pub fn eval(&mut self, model: &LinearSystem, dw: &[f64]) -> Result<(f64, Vec<f64>), AdcgError> {
        let k = key(dw);
        if let Some(hit) = self.cache.get(&k) {
            return Ok(hit.clone());
        }
        self.lp.objective = model.rhs_at(dw);
        let s = solve_lp_warm(&self.lp, self.basis.as_ref())?;
        if s.status != LpStatus::Optimal {
            // u = 0 is always feasible and the box bounds the objective.
            return Err(AdcgError::MasterUnresolved(format!("dual LP returned {:?}", s.status)));
        }
        self.basis = s.basis.clone();
        let out = (s.objective.max(0.0), s.x);
        self.cache.insert(k, out.clone());
        Ok(out)
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }
}

fn scan(ev: &mut DualEvaluator, model: &LinearSystem, region: &RegionPolyhedron) -> Result<MasterResult, AdcgError> {
    if region.empty {
        return Err(AdcgError::MasterInfeasible);
    }
    let verts = geometry::vertices(region)?;
    if verts.is_empty() {
        return Err(AdcgError::MasterInfeasible);
    }
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for v in &verts {
        let (r, u) = ev.eval(model, v)?;
        if best.as_ref().is_none_or(|b| r > b.0) {
            best = Some((r, u, v.clone()));
        }
    }
    let (r, u_star, dw_star) = best.expect("at least one vertex");
    Ok(MasterResult { u_star, dw_star, r, zeta: Vec::new(), theta: Vec::new(), work: verts.len() })
}

/// Big-M master with `M` given per region row. Returns the result and
/// whether any `ζ_i` ended within `1e-3·M_i` of its bound.
fn milp(
    model: &LinearSystem,
    region: &RegionPolyhedron,
    big_m: &[f64],
    opts: &MilpOptions,
) -> Result<(MasterResult, bool), AdcgError> {
    let m = model.num_rows();
    let ny = model.num_y();
    let d = model.num_dw();
    let n = region.num_rows();
    let (u0, z0, t0, w0) = (0, m, m + n, m + 2 * n);
    let nv = m + 2 * n + d;
    let radius = region.box_radius().max(1.0);
    let mut objective = vec![0.0; nv];
    objective[..m].copy_from_slice(&model.rhs);
    objective[z0..z0 + n].copy_from_slice(&region.h);
    let mut lower = vec![0.0; nv];
    let mut upper = vec![0.0; nv];
    for j in 0..m {
        lower[u0 + j] = -1.0;
    }
    for i in 0..n {
        lower[z0 + i] = -big_m[i];
        upper[t0 + i] = 1.0;
    }
    for j in 0..d {
        lower[w0 + j] = -2.0 * radius;
        upper[w0 + j] = 2.0 * radius;
    }
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut senses = Vec::new();
    let mut rhs = Vec::new();
    // Bᵀu = 0.
    for col in model.b_mat.transpose().to_rows() {
        rows.push(col);
        senses.push(RowSense::Eq);
        rhs.push(0.0);
    }
    debug_assert_eq!(rows.len(), ny);
    // Cᵀu + Hᵀζ = 0.
    for (j, col) in model.c_mat.transpose().to_rows().into_iter().enumerate() {
        let mut r = col;
        for i in 0..n {
            if region.h_mat[i][j] != 0.0 {
                r.push((z0 + i, region.h_mat[i][j]));
            }
        }
        rows.push(r);
        senses.push(RowSense::Eq);
        rhs.push(0.0);
    }
    for i in 0..n {
        let hw: Vec<(usize, f64)> =
            (0..d).filter(|&j| region.h_mat[i][j] != 0.0).map(|j| (w0 + j, region.h_mat[i][j])).collect();
        rows.push(hw.clone());
        senses.push(RowSense::Ge);
        rhs.push(region.h[i]);
        let mut slack = hw;
        slack.push((t0 + i, -big_m[i]));
        rows.push(slack);
        senses.push(RowSense::Le);
        rhs.push(region.h[i]);
        rows.push(vec![(z0 + i, 1.0), (t0 + i, -big_m[i])]);
        senses.push(RowSense::Ge);
        rhs.push(-big_m[i]);
    }
    let lp = LpProblem {
        direction: Direction::Maximize,
        objective,
        matrix: SparseMatrix::from_rows(nv, &rows),
        senses,
        rhs,
        lower,
        upper,
    };
    let p = MilpProblem { lp, binaries: (t0..t0 + n).collect() };
    let s = solve_milp(&p, opts)?;
    match s.status {
        MilpStatus::Optimal => {}
        MilpStatus::Infeasible => return Err(AdcgError::MasterInfeasible),
        other => return Err(AdcgError::MasterUnresolved(format!("MILP status {other:?}"))),
    }
    let x = s.incumbent.expect("optimal MILP has an incumbent");
    let zeta = x[z0..z0 + n].to_vec();
    let at_bound = zeta.iter().zip(big_m).any(|(z, mm)| *z <= -mm + 1e-3 * mm);
    let res = MasterResult {
        u_star: x[u0..u0 + m].to_vec(),
        dw_star: x[w0..w0 + d].to_vec(),
        r: s.objective.max(0.0),
        zeta,
        theta: x[t0..t0 + n].iter().map(|&t| t > 0.5).collect(),
        work: s.nodes,
    };
    Ok((res, at_bound))
}

/// MILP solve with the big-M audit: double `M` while some `ζ_i` sits on its bound.
fn milp_audited(model: &LinearSystem, region: &RegionPolyhedron, opts: &AdcgOptions) -> Result<MasterResult, AdcgError> {
    if region.empty {
        return Err(AdcgError::MasterInfeasible);
    }
    let mut big_m = match opts.big_m {
        Some(m) => vec![m; region.num_rows()],
        None => region.big_m(),
    };
    for _ in 0..20 {
        let (res, at_bound) = milp(model, region, &big_m, &opts.milp)?;
        if !at_bound {
            return Ok(res);
        }
        log::warn!("big-M audit: a ζ bound is active, doubling M");
        for v in &mut big_m {
            *v *= 2.0;
        }
    }
    Err(AdcgError::MasterUnresolved("big-M audit did not settle after 20 doublings".into()))
}

pub(super) fn solve(
    ev: &mut DualEvaluator,
    model: &LinearSystem,
    region: &RegionPolyhedron,
    opts: &AdcgOptions,
) -> Result<MasterResult, AdcgError> {
    match opts.master {
        MasterKind::VertexScan => scan(ev, model, region),
        MasterKind::Milp => milp_audited(model, region, opts),
    }
}

/// One master solve, independent of any loop state.
pub fn master_step(model: &LinearSystem, region: &RegionPolyhedron, kind: MasterKind) -> Result<MasterResult, AdcgError> {
    if model.num_dw() != region.dim() {
        return Err(AdcgError::Dimension { model: model.num_dw(), region: region.dim() });
    }
    let opts = AdcgOptions { master: kind, ..AdcgOptions::default() };
    solve(&mut DualEvaluator::new(model), model, region, &opts)
}
