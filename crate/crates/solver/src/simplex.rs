//! Bounded revised primal simplex.
//!
//! Every row gets an activity variable `r_i` with `A x - r = 0`, so row
//! senses become bounds on `r`. Phase 1 minimizes the sum of bound
//! violations of the basic variables (composite phase 1); phase 2 runs on the
//! true objective. The ratio test is the two-pass Harris test, pricing is
//! Dantzig. A long run without progress first triggers a small bound
//! perturbation (removed again before the final verdict), then Bland's rule.

use crate::lp::{Basis, Direction, LpProblem, LpSolution, LpStatus, RowSense, VarStatus};
use crate::lu::LuFactors;
use crate::sparse::SparseMatrix;
use crate::SolverError;

const NONE: usize = usize::MAX;

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// Bound violation tolerated in a feasible point, on the scaled problem.
    pub feasibility_tol: f64,
    /// Reduced cost magnitude below which a column is not priced in.
    pub optimality_tol: f64,
    /// Smallest pivot accepted by the ratio test.
    pub pivot_tol: f64,
    pub max_iterations: usize,
    pub refactor_interval: usize,
    /// Geometric power-of-two scaling of rows and columns.
    pub scaling: bool,
    /// Iterations without progress before perturbing, and again before Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-7,
            pivot_tol: 1e-9,
            max_iterations: 200_000,
            refactor_interval: 100,
            scaling: true,
            bland_after: 1000,
        }
    }
}

struct Model {
    n: usize,
    m: usize,
    a: SparseMatrix,
    cost: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
}

impl Model {
    fn new(p: &LpProblem, scaling: bool) -> Self {
        let n = p.num_vars();
        let m = p.num_rows();
        let (row_scale, col_scale) = if scaling {
            geometric_scaling(&p.matrix)
        } else {
            (vec![1.0; m], vec![1.0; n])
        };
        let mut a = p.matrix.clone();
        {
            let cp = a.col_ptr().to_vec();
            let ri = a.row_indices().to_vec();
            let vals = a.values_mut();
            for j in 0..n {
                for k in cp[j]..cp[j + 1] {
                    vals[k] *= row_scale[ri[k]] * col_scale[j];
                }
            }
        }
        let sign = match p.direction {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        };
        let mut cost = vec![0.0; n + m];
        let mut lo = vec![0.0; n + m];
        let mut up = vec![0.0; n + m];
        for j in 0..n {
            cost[j] = sign * p.objective[j] * col_scale[j];
            lo[j] = p.lower[j] / col_scale[j];
            up[j] = p.upper[j] / col_scale[j];
        }
        for i in 0..m {
            let b = p.rhs[i] * row_scale[i];
            let (l, u) = match p.senses[i] {
                RowSense::Le => (f64::NEG_INFINITY, b),
                RowSense::Ge => (b, f64::INFINITY),
                RowSense::Eq => (b, b),
            };
            lo[n + i] = l;
            up[n + i] = u;
        }
        Self {
            n,
            m,
            a,
            cost,
            lo,
            up,
            row_scale,
            col_scale,
        }
    }

    fn column(&self, j: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        if j < self.n {
            out.extend(self.a.col_iter(j));
        } else {
            out.push((j - self.n, -1.0));
        }
    }

    /// `y . a_j`
    fn dot_col(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.a.col_iter(j).map(|(i, v)| v * y[i]).sum()
        } else {
            -y[j - self.n]
        }
    }
}

fn pow2(x: f64) -> f64 {
    if !x.is_finite() || x <= 0.0 {
        1.0
    } else {
        2f64.powi(x.log2().round() as i32)
    }
}

fn geometric_scaling(a: &SparseMatrix) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (a.nrows(), a.ncols());
    let mut rs = vec![1.0; m];
    let mut cs = vec![1.0; n];
    for _ in 0..4 {
        let mut rmin = vec![f64::INFINITY; m];
        let mut rmax = vec![0.0f64; m];
        for j in 0..n {
            for (i, v) in a.col_iter(j) {
                let s = (v * cs[j]).abs();
                rmin[i] = rmin[i].min(s);
                rmax[i] = rmax[i].max(s);
            }
        }
        for i in 0..m {
            if rmax[i] > 0.0 {
                rs[i] = pow2(1.0 / (rmin[i] * rmax[i]).sqrt());
            }
        }
        for j in 0..n {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for (i, v) in a.col_iter(j) {
                let s = (v * rs[i]).abs();
                lo = lo.min(s);
                hi = hi.max(s);
            }
            if hi > 0.0 {
                cs[j] = pow2(1.0 / (lo * hi).sqrt());
            }
        }
    }
    (rs, cs)
}

struct State<'a> {
    md: &'a Model,
    opts: &'a SimplexOptions,
    head: Vec<usize>,
    pos_of: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    lu: Option<LuFactors>,
    scratch: Vec<(usize, f64)>,
    iterations: usize,
    /// Working bounds; widened while a stall perturbation is active.
    lo: Vec<f64>,
    up: Vec<f64>,
    perturbed: bool,
}

enum Step {
    Optimal,
    Infeasible,
    Unbounded,
    Continue,
}

impl<'a> State<'a> {
    fn new(md: &'a Model, opts: &'a SimplexOptions, warm: Option<&Basis>) -> Self {
        let big_n = md.n + md.m;
        let mut status = vec![VarStatus::AtLower; big_n];
        match warm {
            Some(b) if b.vars.len() == md.n && b.rows.len() == md.m => {
                status[..md.n].copy_from_slice(&b.vars);
                status[md.n..].copy_from_slice(&b.rows);
            }
            _ => {
                for s in status[md.n..].iter_mut() {
                    *s = VarStatus::Basic;
                }
                for s in status[..md.n].iter_mut() {
                    *s = VarStatus::AtLower;
                }
            }
        }
        let mut head: Vec<usize> = (0..big_n).filter(|&j| status[j] == VarStatus::Basic).collect();
        if head.len() > md.m {
            for &j in &head[md.m..] {
                status[j] = VarStatus::AtLower;
            }
            head.truncate(md.m);
        }
        if head.len() < md.m {
            for i in 0..md.m {
                if head.len() == md.m {
                    break;
                }
                let j = md.n + i;
                if status[j] != VarStatus::Basic {
                    status[j] = VarStatus::Basic;
                    head.push(j);
                }
            }
        }
        let mut st = Self {
            md,
            opts,
            pos_of: vec![NONE; big_n],
            head,
            status,
            x: vec![0.0; big_n],
            lu: None,
            scratch: Vec::new(),
            iterations: 0,
            lo: md.lo.clone(),
            up: md.up.clone(),
            perturbed: false,
        };
        for (p, &j) in st.head.iter().enumerate() {
            st.pos_of[j] = p;
        }
        for j in 0..big_n {
            if st.status[j] != VarStatus::Basic {
                st.place_nonbasic(j, st.status[j]);
            }
        }
        st
    }

    /// Puts nonbasic `j` on the bound named by `hint`, falling back to
    /// whichever bound is finite.
    fn place_nonbasic(&mut self, j: usize, hint: VarStatus) {
        let (l, u) = (self.lo[j], self.up[j]);
        let s = match hint {
            VarStatus::AtUpper if u.is_finite() => VarStatus::AtUpper,
            VarStatus::AtLower if l.is_finite() => VarStatus::AtLower,
            _ if l.is_finite() => VarStatus::AtLower,
            _ if u.is_finite() => VarStatus::AtUpper,
            _ => VarStatus::Free,
        };
        self.status[j] = s;
        self.x[j] = match s {
            VarStatus::AtLower => l,
            VarStatus::AtUpper => u,
            _ => 0.0,
        };
    }

    fn factorize(&mut self) {
        loop {
            let md = self.md;
            let head = &self.head;
            let res = LuFactors::factorize(md.m, |p, out| md.column(head[p], out));
            match res {
                Ok(lu) => {
                    self.lu = Some(lu);
                    break;
                }
                Err(sing) => {
                    for (&p, &r) in sing.positions.iter().zip(&sing.free_rows) {
                        let old = self.head[p];
                        let near = if (self.x[old] - self.up[old]).abs() < (self.x[old] - self.lo[old]).abs() {
                            VarStatus::AtUpper
                        } else {
                            VarStatus::AtLower
                        };
                        self.pos_of[old] = NONE;
                        self.place_nonbasic(old, near);
                        let s = md.n + r;
                        self.head[p] = s;
                        self.pos_of[s] = p;
                        self.status[s] = VarStatus::Basic;
                    }
                }
            }
        }
        self.compute_basic();
    }

    fn compute_basic(&mut self) {
        let md = self.md;
        let mut rhs = vec![0.0; md.m];
        for j in 0..md.n + md.m {
            if self.status[j] != VarStatus::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                if j < md.n {
                    for (i, v) in md.a.col_iter(j) {
                        rhs[i] -= v * xj;
                    }
                } else {
                    rhs[j - md.n] += xj;
                }
            }
        }
        self.lu.as_mut().unwrap().ftran(&mut rhs);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = rhs[p];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let tol = self.opts.feasibility_tol;
        let v = self.x[j];
        if v < self.lo[j] - tol {
            -1.0
        } else if v > self.up[j] + tol {
            1.0
        } else {
            0.0
        }
    }

    fn duals(&mut self, phase1: bool) -> Vec<f64> {
        let mut cb: Vec<f64> = self
            .head
            .iter()
            .map(|&j| if phase1 { self.infeasibility(j) } else { self.md.cost[j] })
            .collect();
        self.lu.as_mut().unwrap().btran(&mut cb);
        cb
    }

    fn iterate(&mut self, phase1: bool, bland: bool) -> Result<Step, SolverError> {
        let md = self.md;
        let otol = self.opts.optimality_tol;
        let y = self.duals(phase1);

        // Pricing.
        let mut enter = NONE;
        let mut enter_dir = 0.0;
        let mut best = 0.0;
        for j in 0..md.n + md.m {
            let s = self.status[j];
            if s == VarStatus::Basic || self.md.lo[j] == self.md.up[j] {
                continue;
            }
            let c = if phase1 { 0.0 } else { md.cost[j] };
            let d = c - md.dot_col(j, &y);
            let dir = match s {
                VarStatus::AtLower if d < -otol => 1.0,
                VarStatus::AtUpper if d > otol => -1.0,
                VarStatus::Free if d.abs() > otol => -d.signum(),
                _ => continue,
            };
            if bland {
                enter = j;
                enter_dir = dir;
                break;
            }
            if d.abs() > best {
                best = d.abs();
                enter = j;
                enter_dir = dir;
            }
        }
        if enter == NONE {
            return Ok(if phase1 { Step::Infeasible } else { Step::Optimal });
        }

        let mut alpha = vec![0.0; md.m];
        md.column(enter, &mut self.scratch);
        for &(i, v) in &self.scratch {
            alpha[i] = v;
        }
        self.lu.as_mut().unwrap().ftran(&mut alpha);

        // Ratio test. Basic variable at position p moves at rate -dir * alpha_p.
        let ftol = self.opts.feasibility_tol;
        let ptol = self.opts.pivot_tol;
        let mut cand: Vec<(usize, f64, f64, bool)> = Vec::new(); // (pos, ratio, |alpha|, to_upper)
        let mut theta_max = f64::INFINITY;
        for p in 0..md.m {
            let a = alpha[p];
            if a.abs() <= ptol {
                continue;
            }
            let j = self.head[p];
            let rate = -enter_dir * a;
            let v = self.x[j];
            let (l, u) = (self.lo[j], self.up[j]);
            let (bound, to_upper) = if rate < 0.0 {
                if phase1 && v < l - ftol {
                    continue;
                } else if phase1 && v > u + ftol {
                    (u, true)
                } else {
                    (l, false)
                }
            } else if phase1 && v > u + ftol {
                continue;
            } else if phase1 && v < l - ftol {
                (l, false)
            } else {
                (u, true)
            };
            if !bound.is_finite() {
                continue;
            }
            let dist = (v - bound).abs();
            let ratio = dist / rate.abs();
            let relaxed = (dist + ftol) / rate.abs();
            theta_max = theta_max.min(if bland { ratio } else { relaxed });
            cand.push((p, ratio, a.abs(), to_upper));
        }
        let flip = self.up[enter] - self.lo[enter];
        if theta_max == f64::INFINITY && !flip.is_finite() {
            if phase1 {
                return Err(SolverError::Numerical("phase 1 ray without breakpoint".into()));
            }
            return Ok(Step::Unbounded);
        }

        let (t, leave) = if flip.is_finite() && flip <= theta_max {
            (flip, None)
        } else {
            let mut pick: Option<(usize, f64, f64, bool)> = None;
            for &c in &cand {
                if c.1 > theta_max {
                    continue;
                }
                pick = match pick {
                    None => Some(c),
                    Some(b) => {
                        let better = if bland {
                            c.1 < b.1 || (c.1 == b.1 && self.head[c.0] < self.head[b.0])
                        } else {
                            c.2 > b.2
                        };
                        if better {
                            Some(c)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
            let c = pick.ok_or_else(|| SolverError::Numerical("empty ratio test".into()))?;
            (c.1.max(0.0), Some((c.0, c.3)))
        };

        self.x[enter] += enter_dir * t;
        if t != 0.0 {
            for p in 0..md.m {
                if alpha[p] != 0.0 {
                    let j = self.head[p];
                    self.x[j] -= enter_dir * alpha[p] * t;
                }
            }
        }
        match leave {
            None => {
                self.status[enter] = if enter_dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[enter] = if enter_dir > 0.0 { self.up[enter] } else { self.lo[enter] };
            }
            Some((p, to_upper)) => {
                let j = self.head[p];
                self.pos_of[j] = NONE;
                if to_upper {
                    self.status[j] = VarStatus::AtUpper;
                    self.x[j] = self.up[j];
                } else {
                    self.status[j] = VarStatus::AtLower;
                    self.x[j] = self.lo[j];
                }
                self.head[p] = enter;
                self.pos_of[enter] = p;
                self.status[enter] = VarStatus::Basic;
                self.lu.as_mut().unwrap().update(p, &alpha);
            }
        }
        Ok(Step::Continue)
    }

    fn any_infeasible(&self) -> bool {
        self.head.iter().any(|&j| self.infeasibility(j) != 0.0)
    }

    /// Progress measure of the current phase: total infeasibility in
    /// phase 1, objective in phase 2.
    fn metric(&self, phase1: bool) -> f64 {
        if phase1 {
            self.head.iter().map(|&j| (self.lo[j] - self.x[j]).max(0.0) + (self.x[j] - self.up[j]).max(0.0)).sum()
        } else {
            (0..self.md.n).map(|j| self.md.cost[j] * self.x[j]).sum()
        }
    }

    /// Widens every non-fixed finite bound by a small deterministic amount so
    /// degenerate vertices split apart.
    fn perturb(&mut self, scale: f64) {
        let mut seed = 0x9e37_79b9_7f4a_7c15u64;
        for j in 0..self.md.n + self.md.m {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            if self.md.lo[j] == self.md.up[j] {
                continue;
            }
            let r = (seed >> 11) as f64 / (1u64 << 53) as f64;
            let mag = |b: f64| scale * (1.0 + r) * b.abs().max(1.0);
            if self.lo[j].is_finite() {
                self.lo[j] -= mag(self.lo[j]);
            }
            if self.up[j].is_finite() {
                self.up[j] += mag(self.up[j]);
            }
        }
        self.perturbed = true;
        self.reseat_nonbasics();
    }

    fn unperturb(&mut self) {
        self.lo.copy_from_slice(&self.md.lo);
        self.up.copy_from_slice(&self.md.up);
        self.perturbed = false;
        self.reseat_nonbasics();
    }

    fn reseat_nonbasics(&mut self) {
        for j in 0..self.md.n + self.md.m {
            if self.status[j] != VarStatus::Basic {
                self.place_nonbasic(j, self.status[j]);
            }
        }
        self.factorize();
    }

    fn run(&mut self) -> Result<LpStatus, SolverError> {
        self.factorize();
        let mut stall = 0usize;
        let mut perturbations = 0u32;
        // Best metric seen per phase; phase flips do not count as progress.
        let mut best = [f64::INFINITY; 2];
        let mut confirmed = false;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Err(SolverError::IterationLimit(self.iterations));
            }
            let lu = self.lu.as_ref().unwrap();
            if lu.num_etas() >= self.opts.refactor_interval || lu.eta_nnz() > 20 * self.md.m.max(50) {
                self.factorize();
            }
            let phase1 = self.any_infeasible();
            let metric = self.metric(phase1);
            let b = &mut best[usize::from(phase1)];
            if metric < *b - 1e-12 * (1.0 + b.abs().min(1e12)) {
                *b = metric;
                stall = 0;
            } else {
                stall += 1;
            }
            if stall >= self.opts.bland_after && perturbations < 3 {
                log::debug!("simplex stalled at iteration {}, perturbing bounds", self.iterations);
                if self.perturbed {
                    self.unperturb();
                }
                self.perturb(5e-7 * 10f64.powi(perturbations as i32));
                perturbations += 1;
                stall = 0;
                best = [f64::INFINITY; 2];
                continue;
            }
            let bland = stall >= self.opts.bland_after;
            let step = self.iterate(phase1, bland)?;
            match step {
                Step::Continue => {
                    self.iterations += 1;
                    confirmed = false;
                }
                terminal => {
                    // Re-verify on a fresh factorization before trusting the verdict.
                    if !confirmed && self.lu.as_ref().unwrap().num_etas() > 0 {
                        self.factorize();
                        confirmed = true;
                        continue;
                    }
                    if self.perturbed && !matches!(terminal, Step::Unbounded) {
                        self.unperturb();
                        best = [f64::INFINITY; 2];
                        stall = 0;
                        confirmed = false;
                        continue;
                    }
                    match terminal {
                        Step::Optimal => {
                            if self.any_infeasible() {
                                confirmed = false;
                                continue;
                            }
                            return Ok(LpStatus::Optimal);
                        }
                        Step::Infeasible => return Ok(LpStatus::Infeasible),
                        Step::Unbounded => return Ok(LpStatus::Unbounded),
                        Step::Continue => unreachable!(),
                    }
                }
            }
        }
    }
}

pub(crate) fn solve(
    problem: &LpProblem,
    warm: Option<&Basis>,
    opts: &SimplexOptions,
) -> Result<LpSolution, SolverError> {
    let md = Model::new(problem, opts.scaling);
    let mut st = State::new(&md, opts, warm);
    let status = st.run()?;
    let (n, m) = (md.n, md.m);
    let sign = match problem.direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let x: Vec<f64> = (0..n).map(|j| st.x[j] * md.col_scale[j]).collect();
    let (duals, reduced_costs) = if status == LpStatus::Optimal {
        let y = st.duals(false);
        let duals = (0..m).map(|i| sign * y[i] * md.row_scale[i]).collect();
        let rc = (0..n)
            .map(|j| {
                if st.status[j] == VarStatus::Basic {
                    0.0
                } else {
                    sign * (md.cost[j] - md.dot_col(j, &y)) / md.col_scale[j]
                }
            })
            .collect();
        (duals, rc)
    } else {
        (vec![0.0; m], vec![0.0; n])
    };
    let objective = match status {
        LpStatus::Optimal => problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum(),
        LpStatus::Infeasible => f64::NAN,
        LpStatus::Unbounded => sign * f64::NEG_INFINITY,
    };
    let basis = (status == LpStatus::Optimal).then(|| Basis {
        vars: st.status[..n].to_vec(),
        rows: st.status[n..].to_vec(),
    });
    Ok(LpSolution {
        status,
        x,
        duals,
        reduced_costs,
        objective,
        iterations: st.iterations,
        basis,
    })
}
