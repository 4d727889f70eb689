//! Ground-truth labels for uncertainty points: loss-minimizing relaxation
//! refined to the true cones, followed by a tightness audit.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use dispatch_solver::{
    solve_lp_with, Basis, Direction, LpProblem, LpStatus, RowSense, SimplexOptions, SolverError, SparseMatrix,
};

use crate::builder::{build_tcr, ApproxConfig, BuildError, LinearSystem, Var};
use crate::netmodel::NetworkCase;

/// Default audit tolerance on `|P² + Q² − v·ℓ|`, p.u.².
pub const TOL_EXACT: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("grid has {points} points, above the cap of {cap}")]
    GridTooLarge { points: usize, cap: usize },
    #[error("grid spec: {0}")]
    Grid(String),
    #[error("point has {found} coordinates, the case has {expected} RPG units")]
    Dimension { expected: usize, found: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    FeasibleExact,
    RelaxationOnly,
    Infeasible,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::FeasibleExact => "feasible_exact",
            Label::RelaxationOnly => "relaxation_only",
            Label::Infeasible => "infeasible",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleLabel {
    pub dw: Vec<f64>,
    pub label: Label,
    /// Largest cone gap at the optimum; infinite when infeasible.
    pub residual: f64,
    /// `(p^c, q^c)` per generator when feasible.
    pub recourse: Option<Vec<(f64, f64)>>,
    /// Minimized losses when feasible.
    pub losses: Option<f64>,
}

/// Cone gap over all lines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeResidual {
    /// `max |P² + Q² − v·ℓ|`.
    pub max_abs: f64,
    /// `max (v·ℓ − P² − Q²)`, the relaxation side.
    pub max_slack: f64,
    /// `max (P² + Q² − v·ℓ)`, the side no exact point can have.
    pub max_excess: f64,
}

/// Cone residual of a `y` vector of a system built from `case`.
pub fn cone_residual(y: &[f64], model: &LinearSystem, case: &NetworkCase) -> ConeResidual {
    let idx = case.bus_index();
    let mut r = ConeResidual { max_abs: 0.0, max_slack: 0.0, max_excess: 0.0 };
    for (li, line) in case.lines.iter().enumerate() {
        let g = |v: Var| model.vars.get(v).map_or(0.0, |c| y[c]);
        let (p, q, l, v) = (g(Var::P(li)), g(Var::Q(li)), g(Var::L(li)), g(Var::V(idx[&line.from])));
        let gap = p * p + q * q - v * l;
        r.max_abs = r.max_abs.max(gap.abs());
        r.max_excess = r.max_excess.max(gap);
        r.max_slack = r.max_slack.max(-gap);
    }
    r
}

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub tol_exact: f64,
    /// Refinement stops once every cone and circle holds within this much.
    pub cone_tol: f64,
    pub max_rounds: usize,
    /// Cap on pooled cuts kept per chunk.
    pub pool_cap: usize,
    /// Smallest cone depth of the oracle's own system; finer than the
    /// region model so tangent cuts only mop up a tiny excess.
    pub k: usize,
    pub lp_optimality_tol: f64,
    pub lp_feasibility_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol_exact: TOL_EXACT,
            cone_tol: 1e-7,
            max_rounds: 30,
            pool_cap: 400,
            k: 14,
            lp_optimality_tol: 1e-9,
            lp_feasibility_tol: 1e-9,
        }
    }
}

/// Valid inequalities for the exact model, shared between nearby points.
#[derive(Clone, Debug, Default)]
pub struct CutPool {
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    basis: Option<Basis>,
}

impl CutPool {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

struct LineCols {
    p: usize,
    q: usize,
    l: usize,
    v: usize,
    s_max: f64,
}

/// Loss-minimization oracle over the TCR system of one case.
pub struct Oracle<'a> {
    case: &'a NetworkCase,
    model: LinearSystem,
    base: LpProblem,
    kept: Vec<usize>,
    lines: Vec<LineCols>,
    simplex: SimplexOptions,
    loss_scale: f64,
    pub opts: OracleOptions,
}

impl<'a> Oracle<'a> {
    pub fn new(case: &'a NetworkCase, cfg: &ApproxConfig, opts: OracleOptions) -> Result<Self, OracleError> {
        let model = build_tcr(case, &ApproxConfig { k: cfg.k.max(opts.k), ..cfg.clone() })?;
        let mut obj = vec![0.0; model.num_y()];
        for (li, line) in case.lines.iter().enumerate() {
            obj[model.vars.col(Var::L(li))] = line.r;
        }
        // Per-unit resistances are tiny; unscaled, the reduced cost of an
        // inflated ℓ falls under the optimality tolerance and the cone stays slack.
        let loss_scale = case.lines.iter().map(|l| l.r).fold(0.0f64, f64::max).max(1e-12);
        for c in &mut obj {
            *c /= loss_scale;
        }
        let (base, kept) = model.lp_at(&vec![0.0; model.num_dw()], &obj, Direction::Minimize);
        let idx = case.bus_index();
        let lines = case
            .lines
            .iter()
            .enumerate()
            .map(|(li, l)| LineCols {
                p: model.vars.col(Var::P(li)),
                q: model.vars.col(Var::Q(li)),
                l: model.vars.col(Var::L(li)),
                v: model.vars.col(Var::V(idx[&l.from])),
                s_max: l.s_max,
            })
            .collect();
        let simplex = SimplexOptions {
            optimality_tol: opts.lp_optimality_tol,
            feasibility_tol: opts.lp_feasibility_tol,
            ..SimplexOptions::default()
        };
        Ok(Self { case, model, base, kept, lines, simplex, loss_scale, opts })
    }

    pub fn model(&self) -> &LinearSystem {
        &self.model
    }

    /// Adds cuts for every violated cone or circle; returns how many.
    fn separate(&self, x: &[f64], pool: &mut CutPool) -> usize {
        let mut added = 0;
        for lc in &self.lines {
            let (p, q, l, v) = (x[lc.p], x[lc.q], x[lc.l], x[lc.v]);
            // ‖(2P, 2Q, v − ℓ)‖ ≤ v + ℓ, cut ∇f·z ≤ 0 (f is 1-homogeneous).
            let n = (4.0 * p * p + 4.0 * q * q + (v - l) * (v - l)).sqrt();
            if n - (v + l) > self.opts.cone_tol && n > 1e-12 {
                pool.rows.push(vec![
                    (lc.p, 4.0 * p / n),
                    (lc.q, 4.0 * q / n),
                    (lc.v, (v - l) / n - 1.0),
                    (lc.l, -(v - l) / n - 1.0),
                ]);
                pool.rhs.push(0.0);
                added += 1;
            }
            let s = (p * p + q * q).sqrt();
            if s - lc.s_max > self.opts.cone_tol && s > 0.0 {
                pool.rows.push(vec![(lc.p, p / s), (lc.q, q / s)]);
                pool.rhs.push(lc.s_max);
                added += 1;
            }
        }
        added
    }

    fn lp_with(&self, rhs: &[f64], pool: &CutPool) -> LpProblem {
        let mut lp = self.base.clone();
        if !pool.rows.is_empty() {
            let mut rows = self.base.matrix.to_rows();
            rows.extend(pool.rows.iter().cloned());
            lp.matrix = SparseMatrix::from_rows(self.base.num_vars(), &rows);
            lp.senses.extend(std::iter::repeat(RowSense::Le).take(pool.rows.len()));
        }
        lp.rhs = rhs.to_vec();
        lp.rhs.extend_from_slice(&pool.rhs);
        lp
    }

    /// Classifies `dw`, drawing on and extending `pool`.
    pub fn classify_with(&self, dw: &[f64], pool: &mut CutPool) -> Result<SampleLabel, OracleError> {
        if dw.len() != self.model.num_dw() {
            return Err(OracleError::Dimension { expected: self.model.num_dw(), found: dw.len() });
        }
        let full = self.model.rhs_at(dw);
        let rhs: Vec<f64> = self.kept.iter().map(|&i| full[i]).collect();
        let mut x = Vec::new();
        let mut objective = 0.0;
        for round in 0..=self.opts.max_rounds {
            let lp = self.lp_with(&rhs, pool);
            let warm = pool.basis.clone().map(|b| {
                let have = b.rows.len();
                b.with_added_rows(lp.num_rows().saturating_sub(have))
            });
            let s = match solve_lp_with(&lp, warm.as_ref(), &self.simplex) {
                Err(SolverError::IterationLimit(_)) if warm.is_some() => {
                    log::warn!("warm solve at {dw:?} stalled, retrying cold");
                    solve_lp_with(&lp, None, &self.simplex)?
                }
                other => other?,
            };
            match s.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => {
                    return Ok(SampleLabel {
                        dw: dw.to_vec(),
                        label: Label::Infeasible,
                        residual: f64::INFINITY,
                        recourse: None,
                        losses: None,
                    });
                }
                LpStatus::Unbounded => {
                    return Err(OracleError::Solver(SolverError::Numerical("loss minimization unbounded".into())));
                }
            }
            pool.basis = s.basis.clone();
            x = s.x;
            objective = s.objective * self.loss_scale;
            if round == self.opts.max_rounds || self.separate(&x, pool) == 0 {
                break;
            }
        }
        if pool.rows.len() > self.opts.pool_cap {
            let drop = pool.rows.len() - self.opts.pool_cap;
            pool.rows.drain(..drop);
            pool.rhs.drain(..drop);
            pool.basis = None;
        }
        let res = cone_residual(&x, &self.model, self.case);
        let label = if res.max_abs <= self.opts.tol_exact { Label::FeasibleExact } else { Label::RelaxationOnly };
        let recourse = (0..self.case.generators.len())
            .map(|g| (x[self.model.vars.col(Var::Pc(g))], x[self.model.vars.col(Var::Qc(g))]))
            .collect();
        Ok(SampleLabel { dw: dw.to_vec(), label, residual: res.max_abs, recourse: Some(recourse), losses: Some(objective) })
    }

    pub fn classify(&self, dw: &[f64]) -> Result<SampleLabel, OracleError> {
        self.classify_with(dw, &mut CutPool::default())
    }
}

/// One-shot classification.
pub fn classify_sample(
    case: &NetworkCase,
    cfg: &ApproxConfig,
    dw: &[f64],
    tol_exact: f64,
) -> Result<SampleLabel, OracleError> {
    Oracle::new(case, cfg, OracleOptions { tol_exact, ..OracleOptions::default() })?.classify(dw)
}

/// Regular grid: per-dimension closed ranges sampled at `resolution`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub ranges: Vec<(f64, f64)>,
    pub resolution: f64,
}

impl GridSpec {
    fn axis(&self, d: usize) -> Vec<f64> {
        let (lo, hi) = self.ranges[d];
        let n = ((hi - lo) / self.resolution + 1e-9).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * self.resolution).collect()
    }

    pub fn axes(&self) -> Vec<Vec<f64>> {
        (0..self.ranges.len()).map(|d| self.axis(d)).collect()
    }

    pub fn len(&self) -> usize {
        self.axes().iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Area (volume) each grid point stands for.
    pub fn cell(&self) -> f64 {
        self.resolution.powi(self.ranges.len() as i32)
    }

    /// Points in row-major order, first dimension slowest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for axis in self.axes() {
            out = out.into_iter().flat_map(|p| axis.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
        }
        out
    }

    fn validate(&self) -> Result<(), OracleError> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(OracleError::Grid(format!("resolution must be positive, got {}", self.resolution)));
        }
        if self.ranges.iter().any(|&(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(OracleError::Grid("every range needs finite lo ≤ hi".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub grid: GridSpec,
    pub labels: Vec<SampleLabel>,
    pub exact: usize,
    pub relaxation_only: usize,
    pub infeasible: usize,
    pub seconds: f64,
}

impl SweepResult {
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.labels.iter().map(|l| l.dw.clone()).collect()
    }

    pub fn exact_flags(&self) -> Vec<bool> {
        self.labels.iter().map(|l| l.label == Label::FeasibleExact).collect()
    }

    /// Exact plus relaxation-only: the optimistic reference.
    pub fn relaxed_flags(&self) -> Vec<bool> {
        self.labels.iter().map(|l| l.label != Label::Infeasible).collect()
    }

    pub fn to_csv(&self) -> String {
        let d = self.grid.ranges.len();
        let mut s = String::new();
        for j in 0..d {
            let _ = write!(s, "dw{},", j + 1);
        }
        s.push_str("label,residual\n");
        for l in &self.labels {
            for v in &l.dw {
                let _ = write!(s, "{v:e},");
            }
            if l.residual.is_finite() {
                let _ = writeln!(s, "{},{:e}", l.label.as_str(), l.residual);
            } else {
                let _ = writeln!(s, "{},", l.label.as_str());
            }
        }
        s
    }
}

/// Default cap on sweep size.
pub const GRID_CAP: usize = 250_000;

/// Labels every grid point. Points sharing all but the last coordinate form
/// a chunk that runs sequentially with its own cut pool; chunks run in
/// parallel, so results do not depend on the thread count.
pub fn sweep(
    case: &NetworkCase,
    cfg: &ApproxConfig,
    grid: &GridSpec,
    opts: &OracleOptions,
    cap: usize,
) -> Result<SweepResult, OracleError> {
    grid.validate()?;
    if grid.ranges.len() != case.rpg_units.len() {
        return Err(OracleError::Dimension { expected: case.rpg_units.len(), found: grid.ranges.len() });
    }
    let total = grid.len();
    if total > cap {
        return Err(OracleError::GridTooLarge { points: total, cap });
    }
    let start = Instant::now();
    let oracle = Oracle::new(case, cfg, opts.clone())?;
    let points = grid.points();
    let chunk = grid.axes().last().map_or(1, Vec::len).max(1);
    let labels: Vec<Vec<SampleLabel>> = points
        .par_chunks(chunk)
        .map(|pts| {
            let mut pool = CutPool::default();
            pts.iter().map(|p| oracle.classify_with(p, &mut pool)).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let labels: Vec<SampleLabel> = labels.into_iter().flatten().collect();
    let count = |l: Label| labels.iter().filter(|s| s.label == l).count();
    Ok(SweepResult {
        grid: grid.clone(),
        exact: count(Label::FeasibleExact),
        relaxation_only: count(Label::RelaxationOnly),
        infeasible: count(Label::Infeasible),
        labels,
        seconds: start.elapsed().as_secs_f64(),
    })
}
