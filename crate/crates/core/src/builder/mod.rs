//! Assembly of the linear systems `B·y + C·Δw ≤ b` whose projections onto
//! Δw are the TCR and LA dispatchable regions.

mod cone;
mod export;

use std::collections::HashMap;
use std::fmt;

use dispatch_solver::{Direction, LpProblem, RowSense, SparseMatrix};

use crate::netmodel::{validate, NetworkCase, ValidationReport};

pub use cone::{
    approx_error, btn_lift, ch_cut, circle_outer_facets, soc_outer_facets, CutRegime, FacetSet, LinearCut,
};
pub use export::{export_system, SystemDump};

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid case:\n{0}")]
    Case(ValidationReport),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ApproxConfig {
    /// Cone approximation depth.
    pub k: usize,
    /// Number of rotated squares approximating each power circle.
    pub t: usize,
    pub include_circle: bool,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self { k: 6, t: 4, include_circle: true }
    }
}

impl ApproxConfig {
    pub fn validate(&self) -> Result<(), BuildError> {
        if self.k < 2 {
            return Err(BuildError::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if self.t < 1 {
            return Err(BuildError::Config("t must be at least 1".into()));
        }
        Ok(())
    }
}

/// Semantic owner of a `y` column. Indices refer to positions in the case's
/// line, bus and generator lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    P(usize),
    Q(usize),
    L(usize),
    V(usize),
    Pc(usize),
    Qc(usize),
    M(usize),
    MPrime(usize),
    PPrime(usize),
    QPrime(usize),
    /// First-stage variable of cone 0 (P, Q, m) or cone 1 (P', Q', m').
    Alpha0 { line: usize, cone: u8 },
    Beta { line: usize, cone: u8, n: usize },
    /// Column of a system not built from a network case.
    Aux(usize),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VariableMap {
    cols: Vec<Var>,
    names: Vec<String>,
    index: HashMap<Var, usize>,
    /// RPG unit owning each Δw column.
    pub dw_units: Vec<usize>,
    pub dw_names: Vec<String>,
}

impl VariableMap {
    fn push(&mut self, v: Var, name: String) -> usize {
        let j = self.cols.len();
        self.cols.push(v);
        self.names.push(name);
        self.index.insert(v, j);
        j
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn get(&self, v: Var) -> Option<usize> {
        self.index.get(&v).copied()
    }

    /// Column of `v`; panics if the model has no such variable.
    pub fn col(&self, v: Var) -> usize {
        self.index[&v]
    }

    pub fn var(&self, col: usize) -> Var {
        self.cols[col]
    }

    pub fn name(&self, col: usize) -> &str {
        &self.names[col]
    }
}

/// Equation family that produced a row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowTag {
    Balance,
    Voltage,
    Capacity,
    Ramp,
    Circle,
    Bounds,
    ChCut,
    ConeLink,
    Btn,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RowTag::Balance => "balance",
            RowTag::Voltage => "voltage",
            RowTag::Capacity => "capacity",
            RowTag::Ramp => "ramp",
            RowTag::Circle => "circle",
            RowTag::Bounds => "bounds",
            RowTag::ChCut => "ch_cut",
            RowTag::ConeLink => "cone_link",
            RowTag::Btn => "btn",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Tcr,
    La,
    /// Hand-assembled system, see [`LinearSystem::from_dense`].
    Generic,
}

/// `B·y + C·Δw ≤ b`. Every `y` column is free; bounds are rows.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub kind: ModelKind,
    pub b_mat: SparseMatrix,
    pub c_mat: SparseMatrix,
    pub rhs: Vec<f64>,
    pub vars: VariableMap,
    pub tags: Vec<RowTag>,
    /// `true` on the first row of each `(row, −row)` equality pair.
    pub eq_first: Vec<bool>,
    /// Cone depth used for the cone rows; 0 for LA.
    pub k: usize,
}

impl LinearSystem {
    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn num_y(&self) -> usize {
        self.b_mat.ncols()
    }

    pub fn num_dw(&self) -> usize {
        self.c_mat.ncols()
    }

    /// `b − C·Δw`.
    pub fn rhs_at(&self, dw: &[f64]) -> Vec<f64> {
        let cdw = self.c_mat.mul_vec(dw);
        self.rhs.iter().zip(cdw).map(|(b, c)| b - c).collect()
    }

    /// Largest row violation of `(y, Δw)`.
    pub fn max_violation(&self, y: &[f64], dw: &[f64]) -> f64 {
        let by = self.b_mat.mul_vec(y);
        by.iter().zip(self.rhs_at(dw)).map(|(a, r)| a - r).fold(f64::NEG_INFINITY, f64::max)
    }

    /// LP over `y` with Δw fixed. Equality pairs are merged into single
    /// equality rows; `rows[i]` maps LP row `i` back to its first system row.
    pub fn lp_at(&self, dw: &[f64], objective: &[f64], direction: Direction) -> (LpProblem, Vec<usize>) {
        let r = self.rhs_at(dw);
        let rows = self.b_mat.to_rows();
        let mut kept = Vec::with_capacity(rows.len());
        let mut lp_rows = Vec::with_capacity(rows.len());
        let mut senses = Vec::with_capacity(rows.len());
        let mut rhs = Vec::with_capacity(rows.len());
        let mut i = 0;
        while i < rows.len() {
            kept.push(i);
            lp_rows.push(rows[i].clone());
            rhs.push(r[i]);
            if self.eq_first[i] {
                senses.push(RowSense::Eq);
                i += 2;
            } else {
                senses.push(RowSense::Le);
                i += 1;
            }
        }
        let n = self.num_y();
        let lp = LpProblem {
            direction,
            objective: objective.to_vec(),
            matrix: SparseMatrix::from_rows(n, &lp_rows),
            senses,
            rhs,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        };
        (lp, kept)
    }

    /// Pure feasibility LP over `y` at a fixed Δw.
    pub fn feasibility_lp(&self, dw: &[f64]) -> LpProblem {
        self.lp_at(dw, &vec![0.0; self.num_y()], Direction::Minimize).0
    }

    /// System `B·y + C·Δw ≤ b` from dense rows, all rows inequalities and
    /// tagged as bounds. Used for small synthetic instances.
    pub fn from_dense(b: &[Vec<f64>], c: &[Vec<f64>], rhs: &[f64]) -> LinearSystem {
        let ny = b.first().map_or(0, Vec::len);
        let nd = c.first().map_or(0, Vec::len);
        let mut vars = VariableMap::default();
        for j in 0..ny {
            vars.push(Var::Aux(j), format!("y{j}"));
        }
        for n in 0..nd {
            vars.dw_units.push(n);
            vars.dw_names.push(format!("dw{n}"));
        }
        let trip = |m: &[Vec<f64>]| -> Vec<(usize, usize, f64)> {
            m.iter()
                .enumerate()
                .flat_map(|(i, r)| r.iter().enumerate().filter(|e| *e.1 != 0.0).map(move |(j, &v)| (i, j, v)))
                .collect()
        };
        let m = rhs.len();
        LinearSystem {
            kind: ModelKind::Generic,
            b_mat: SparseMatrix::from_triplets(m, ny, &trip(b)),
            c_mat: SparseMatrix::from_triplets(m, nd, &trip(c)),
            rhs: rhs.to_vec(),
            vars,
            tags: vec![RowTag::Bounds; m],
            eq_first: vec![false; m],
            k: 0,
        }
    }

    pub fn count_tag(&self, tag: RowTag) -> usize {
        self.tags.iter().filter(|&&t| t == tag).count()
    }
}

/// Exact branch-flow state used to lift points into a system's `y` space.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowPoint {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub l: Vec<f64>,
    pub v: Vec<f64>,
    pub pc: Vec<f64>,
    pub qc: Vec<f64>,
}

#[derive(Default)]
struct Acc {
    b: Vec<(usize, usize, f64)>,
    c: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
    tags: Vec<RowTag>,
    eq_first: Vec<bool>,
}

impl Acc {
    fn le(&mut self, y: &[(usize, f64)], dw: &[(usize, f64)], rhs: f64, tag: RowTag) {
        let i = self.rhs.len();
        self.b.extend(y.iter().filter(|e| e.1 != 0.0).map(|&(j, v)| (i, j, v)));
        self.c.extend(dw.iter().filter(|e| e.1 != 0.0).map(|&(j, v)| (i, j, v)));
        self.rhs.push(rhs);
        self.tags.push(tag);
        self.eq_first.push(false);
    }

    fn eq(&mut self, y: &[(usize, f64)], dw: &[(usize, f64)], rhs: f64, tag: RowTag) {
        self.le(y, dw, rhs, tag);
        *self.eq_first.last_mut().unwrap() = true;
        let ny: Vec<(usize, f64)> = y.iter().map(|&(j, v)| (j, -v)).collect();
        let nd: Vec<(usize, f64)> = dw.iter().map(|&(j, v)| (j, -v)).collect();
        self.le(&ny, &nd, -rhs, tag);
    }

    fn facets(&mut self, f: &FacetSet, map: &[usize], tag: RowTag) {
        for (row, &b) in f.rows.iter().zip(&f.rhs) {
            let y: Vec<(usize, f64)> = row.iter().map(|&(j, v)| (map[j], v)).collect();
            self.le(&y, &[], b, tag);
        }
    }

    fn finish(self, kind: ModelKind, vars: VariableMap, k: usize) -> LinearSystem {
        let m = self.rhs.len();
        LinearSystem {
            kind,
            b_mat: SparseMatrix::from_triplets(m, vars.len(), &self.b),
            c_mat: SparseMatrix::from_triplets(m, vars.dw_units.len(), &self.c),
            rhs: self.rhs,
            vars,
            tags: self.tags,
            eq_first: self.eq_first,
            k,
        }
    }
}

fn check_case(case: &NetworkCase) -> Result<(), BuildError> {
    let rep = validate(case);
    if rep.is_ok() {
        Ok(())
    } else {
        Err(BuildError::Case(rep))
    }
}

/// Columns shared by both models: buses, generators and Δw.
fn common_columns(case: &NetworkCase, vars: &mut VariableMap) {
    for (b, bus) in case.buses.iter().enumerate() {
        vars.push(Var::V(b), format!("v[{}]", bus.id));
    }
    for (g, gen) in case.generators.iter().enumerate() {
        vars.push(Var::Pc(g), format!("pc[g{g}@{}]", gen.bus));
        vars.push(Var::Qc(g), format!("qc[g{g}@{}]", gen.bus));
    }
    for (n, w) in case.rpg_units.iter().enumerate() {
        vars.dw_units.push(n);
        vars.dw_names.push(format!("dw[u{n}@{}]", w.bus));
    }
}

/// Balance, voltage-drop, generator, RPG and voltage-bound rows. `with_loss`
/// selects the full branch-flow form; without it every ℓ term is dropped.
fn network_rows(case: &NetworkCase, vars: &VariableMap, acc: &mut Acc, with_loss: bool) {
    let idx = case.bus_index();
    let parent = case.parent_lines();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); case.buses.len()];
    for (k, l) in case.lines.iter().enumerate() {
        children[idx[&l.from]].push(k);
    }
    for (j, bus) in case.buses.iter().enumerate() {
        let mut yp: Vec<(usize, f64)> = Vec::new();
        let mut yq: Vec<(usize, f64)> = Vec::new();
        for &k in &children[j] {
            yp.push((vars.col(Var::P(k)), 1.0));
            yq.push((vars.col(Var::Q(k)), 1.0));
        }
        if let Some(k) = parent[j] {
            yp.push((vars.col(Var::P(k)), -1.0));
            yq.push((vars.col(Var::Q(k)), -1.0));
            if with_loss {
                yp.push((vars.col(Var::L(k)), case.lines[k].r));
                yq.push((vars.col(Var::L(k)), case.lines[k].x));
            }
        }
        let mut rp = -bus.p_load;
        let mut rq = -bus.q_load;
        for (g, gen) in case.generators.iter().enumerate().filter(|(_, g)| g.bus == bus.id) {
            yp.push((vars.col(Var::Pc(g)), -1.0));
            yq.push((vars.col(Var::Qc(g)), -1.0));
            rp += gen.p_set;
            rq += gen.q_set;
        }
        let mut dp = Vec::new();
        let mut dq = Vec::new();
        for (n, w) in case.rpg_units.iter().enumerate().filter(|(_, w)| w.bus == bus.id) {
            dp.push((n, -1.0));
            dq.push((n, -w.mu));
            rp += w.w_forecast;
            rq += w.mu * w.w_forecast;
        }
        acc.eq(&yp, &dp, rp, RowTag::Balance);
        acc.eq(&yq, &dq, rq, RowTag::Balance);
    }
    for (k, l) in case.lines.iter().enumerate() {
        let (vi, vj) = (vars.col(Var::V(idx[&l.from])), vars.col(Var::V(idx[&l.to])));
        let mut y = vec![(vj, 1.0), (vi, -1.0), (vars.col(Var::P(k)), 2.0 * l.r), (vars.col(Var::Q(k)), 2.0 * l.x)];
        if with_loss {
            y.push((vars.col(Var::L(k)), -(l.r * l.r + l.x * l.x)));
        }
        acc.eq(&y, &[], 0.0, RowTag::Voltage);
    }
    for (b, bus) in case.buses.iter().enumerate() {
        let v = vars.col(Var::V(b));
        if bus.is_root {
            acc.eq(&[(v, 1.0)], &[], case.v_root, RowTag::Voltage);
        } else {
            acc.le(&[(v, 1.0)], &[], bus.v_max, RowTag::Voltage);
            acc.le(&[(v, -1.0)], &[], -bus.v_min, RowTag::Voltage);
        }
    }
    for (g, gen) in case.generators.iter().enumerate() {
        let (pc, qc) = (vars.col(Var::Pc(g)), vars.col(Var::Qc(g)));
        acc.le(&[(pc, 1.0)], &[], gen.p_max - gen.p_set, RowTag::Capacity);
        acc.le(&[(pc, -1.0)], &[], gen.p_set - gen.p_min, RowTag::Capacity);
        acc.le(&[(qc, 1.0)], &[], gen.q_max - gen.q_set, RowTag::Capacity);
        acc.le(&[(qc, -1.0)], &[], gen.q_set - gen.q_min, RowTag::Capacity);
        acc.le(&[(pc, 1.0)], &[], gen.ramp_p, RowTag::Ramp);
        acc.le(&[(pc, -1.0)], &[], gen.ramp_p, RowTag::Ramp);
    }
    for (n, w) in case.rpg_units.iter().enumerate() {
        acc.le(&[], &[(n, 1.0)], w.w_cap - w.w_forecast, RowTag::Bounds);
        acc.le(&[], &[(n, -1.0)], w.w_forecast, RowTag::Bounds);
    }
}

/// Whether a line's power-circle facets are kept in the TCR model.
pub fn circle_needed(l_max: f64, s_max: f64, v_hi: f64) -> bool {
    s_max * s_max < l_max * v_hi
}

/// Tightened convex relaxation: branch flow with the SOC relaxation replaced
/// by its CH cut, split-cone polyhedral approximation and circle facets.
pub fn build_tcr(case: &NetworkCase, cfg: &ApproxConfig) -> Result<LinearSystem, BuildError> {
    cfg.validate()?;
    check_case(case)?;
    let k = cfg.k;
    let mut vars = VariableMap::default();
    // Per-line column blocks, one cone layout map per cone.
    let mut cone_maps: Vec<[Vec<usize>; 2]> = Vec::with_capacity(case.lines.len());
    for (li, l) in case.lines.iter().enumerate() {
        let tag = format!("{}-{}", l.from, l.to);
        let p = vars.push(Var::P(li), format!("P[{tag}]"));
        let q = vars.push(Var::Q(li), format!("Q[{tag}]"));
        vars.push(Var::L(li), format!("l[{tag}]"));
        let m = vars.push(Var::M(li), format!("m[{tag}]"));
        let mp = vars.push(Var::MPrime(li), format!("m'[{tag}]"));
        let pp = vars.push(Var::PPrime(li), format!("P'[{tag}]"));
        let qp = vars.push(Var::QPrime(li), format!("Q'[{tag}]"));
        let mut maps = [vec![p, q, m], vec![pp, qp, mp]];
        for (cone, map) in maps.iter_mut().enumerate() {
            let cone = cone as u8;
            map.push(vars.push(Var::Alpha0 { line: li, cone }, format!("a0[{tag}/{cone}]")));
            for n in 0..k - 2 {
                map.push(vars.push(Var::Beta { line: li, cone, n }, format!("b{n}[{tag}/{cone}]")));
            }
        }
        cone_maps.push(maps);
    }
    common_columns(case, &mut vars);

    let mut acc = Acc::default();
    network_rows(case, &vars, &mut acc, true);
    let idx = case.bus_index();
    let facets = soc_outer_facets(k)?;
    for (li, l) in case.lines.iter().enumerate() {
        let from = &case.buses[idx[&l.from]];
        let lc = vars.col(Var::L(li));
        let vi = vars.col(Var::V(idx[&l.from]));
        acc.le(&[(lc, 1.0)], &[], l.l_max, RowTag::Bounds);
        acc.le(&[(lc, -1.0)], &[], 0.0, RowTag::Bounds);
        if let Some(cut) = ch_cut(from.v_min, from.v_max, l.l_max, l.s_max)? {
            let y = [(vars.col(Var::P(li)), cut.c[0]), (vars.col(Var::Q(li)), cut.c[1]), (lc, cut.c[2]), (vi, cut.c[3])];
            acc.le(&y, &[], cut.d, RowTag::ChCut);
        }
        rotated_cone_split(&vars, li, vi, &mut acc);
        for map in &cone_maps[li] {
            acc.facets(&facets, map, RowTag::Btn);
        }
        if cfg.include_circle && circle_needed(l.l_max, l.s_max, from.v_max) {
            let circle = circle_outer_facets(l.s_max, cfg.t)?;
            acc.facets(&circle, &[vars.col(Var::P(li)), vars.col(Var::Q(li))], RowTag::Circle);
        }
    }
    Ok(acc.finish(ModelKind::Tcr, vars, k))
}

/// Link rows `P' = m`, `Q' = (v − ℓ)/2`, `m' = (v + ℓ)/2` tying the rotated
/// cone `P² + Q² ≤ v·ℓ` to the two standard cones.
fn rotated_cone_split(vars: &VariableMap, li: usize, vi: usize, acc: &mut Acc) {
    let c = |v| vars.col(v);
    let lc = c(Var::L(li));
    acc.eq(&[(c(Var::PPrime(li)), 1.0), (c(Var::M(li)), -1.0)], &[], 0.0, RowTag::ConeLink);
    acc.eq(&[(c(Var::QPrime(li)), 1.0), (vi, -0.5), (lc, 0.5)], &[], 0.0, RowTag::ConeLink);
    acc.eq(&[(c(Var::MPrime(li)), 1.0), (vi, -0.5), (lc, -0.5)], &[], 0.0, RowTag::ConeLink);
}

/// Linearized (lossless) DistFlow model with `t = 4` circle facets.
pub fn build_la(case: &NetworkCase) -> Result<LinearSystem, BuildError> {
    build_la_with(case, ApproxConfig::default().t)
}

pub fn build_la_with(case: &NetworkCase, t: usize) -> Result<LinearSystem, BuildError> {
    check_case(case)?;
    let mut vars = VariableMap::default();
    for (li, l) in case.lines.iter().enumerate() {
        let tag = format!("{}-{}", l.from, l.to);
        vars.push(Var::P(li), format!("P[{tag}]"));
        vars.push(Var::Q(li), format!("Q[{tag}]"));
    }
    common_columns(case, &mut vars);
    let mut acc = Acc::default();
    network_rows(case, &vars, &mut acc, false);
    for (li, l) in case.lines.iter().enumerate() {
        let circle = circle_outer_facets(l.s_max, t)?;
        acc.facets(&circle, &[vars.col(Var::P(li)), vars.col(Var::Q(li))], RowTag::Circle);
    }
    Ok(acc.finish(ModelKind::La, vars, 0))
}

/// Builds `y` for `sys` from an exact branch-flow state, filling cone
/// auxiliaries with their smallest feasible values.
pub fn lift_point(sys: &LinearSystem, case: &NetworkCase, fp: &FlowPoint) -> Vec<f64> {
    let mut y = vec![0.0; sys.num_y()];
    let vars = &sys.vars;
    for li in 0..case.lines.len() {
        y[vars.col(Var::P(li))] = fp.p[li];
        y[vars.col(Var::Q(li))] = fp.q[li];
    }
    for (b, &v) in fp.v.iter().enumerate() {
        y[vars.col(Var::V(b))] = v;
    }
    for g in 0..case.generators.len() {
        y[vars.col(Var::Pc(g))] = fp.pc[g];
        y[vars.col(Var::Qc(g))] = fp.qc[g];
    }
    if sys.kind == ModelKind::La {
        return y;
    }
    let idx = case.bus_index();
    let k = sys.k;
    for (li, line) in case.lines.iter().enumerate() {
        let v = fp.v[idx[&line.from]];
        let l = fp.l[li];
        y[vars.col(Var::L(li))] = l;
        let (aux0, m) = btn_lift(fp.p[li], fp.q[li], k);
        let qp = (v - l) / 2.0;
        let mp = (v + l) / 2.0;
        let (aux1, _) = btn_lift(m, qp, k);
        y[vars.col(Var::M(li))] = m;
        y[vars.col(Var::PPrime(li))] = m;
        y[vars.col(Var::QPrime(li))] = qp;
        y[vars.col(Var::MPrime(li))] = mp;
        for (cone, aux) in [(0u8, aux0), (1u8, aux1)] {
            y[vars.col(Var::Alpha0 { line: li, cone })] = aux[0];
            for n in 0..k - 2 {
                y[vars.col(Var::Beta { line: li, cone, n })] = aux[n + 1];
            }
        }
    }
    y
}
