//! Distribution network case data: types, validation, and transformations.
//!
//! All quantities are per-unit on the case bases. Voltage bounds and the
//! root voltage are squared magnitudes, current limits squared currents.

mod cases;
mod matpower;
mod native;

use std::collections::{HashMap, HashSet};
use std::fmt;

pub use cases::{builtin, ieee33, ieee33_three_rpg, synthetic_feeder, IEEE33_TEXT};
pub use matpower::import_matpower;
pub use native::{parse_case, serialize_case};

/// Reactive-to-active ratio of an RPG at power factor 0.95.
pub fn default_mu() -> f64 {
    0.95f64.acos().tan()
}

/// Fraction of a generator's active capacity available for rescheduling.
pub const DEFAULT_RAMP_FRACTION: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub p_load: f64,
    pub q_load: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub is_root: bool,
}

/// A line directed from the parent bus toward the child bus.
#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    pub l_max: f64,
    pub s_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub bus: u32,
    pub p_set: f64,
    pub q_set: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub ramp_p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RpgUnit {
    pub bus: u32,
    pub w_forecast: f64,
    pub w_cap: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkCase {
    pub name: String,
    pub base_mva: f64,
    pub base_kv: f64,
    pub v_root: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub rpg_units: Vec<RpgUnit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IssueKind {
    Bases,
    RootCount,
    DuplicateBus,
    UnknownBus,
    BoundOrder,
    Load,
    Impedance,
    LineLimit,
    Cycle,
    Orientation,
    Unreachable,
    Generator,
    Rpg,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub kind: IssueKind,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

/// Every violated invariant of a case. Empty means well-formed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn count(&self, kind: IssueKind) -> usize {
        self.issues.iter().filter(|i| i.kind == kind).count()
    }

    fn push(&mut self, kind: IssueKind, message: String) {
        self.issues.push(Issue { kind, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.issues {
            writeln!(f, "{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("missing required section [{0}]")]
    MissingSection(&'static str),
    #[error("duplicate {what} {id} at line {line}")]
    Duplicate { what: &'static str, id: String, line: usize },
    #[error("line {line}: {message}")]
    Topology { line: usize, message: String },
    #[error("case is invalid:\n{0}")]
    Invalid(ValidationReport),
    #[error("unsupported construct '{0}'")]
    Unsupported(String),
    #[error("row {row} of {matrix} has {found} columns, expected at least {expected}")]
    Dimension { matrix: String, row: usize, found: usize, expected: usize },
    #[error("no generators")]
    NoGenerators,
    #[error("impedance scale factor must be positive, got {0}")]
    Factor(f64),
}

impl NetworkCase {
    pub fn root(&self) -> Option<&Bus> {
        self.buses.iter().find(|b| b.is_root)
    }

    pub fn bus_index(&self) -> HashMap<u32, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    /// Line feeding each bus (by bus index), `None` at the root.
    pub fn parent_lines(&self) -> Vec<Option<usize>> {
        let idx = self.bus_index();
        let mut parent = vec![None; self.buses.len()];
        for (k, l) in self.lines.iter().enumerate() {
            if let Some(&t) = idx.get(&l.to) {
                parent[t] = Some(k);
            }
        }
        parent
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

/// Lists every violated invariant of `case`.
pub fn validate(case: &NetworkCase) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if !(case.base_mva.is_finite() && case.base_mva > 0.0 && case.base_kv.is_finite() && case.base_kv > 0.0) {
        rep.push(IssueKind::Bases, format!("bases must be positive (base_mva {}, base_kv {})", case.base_mva, case.base_kv));
    }
    let roots: Vec<&Bus> = case.buses.iter().filter(|b| b.is_root).collect();
    if roots.len() != 1 {
        rep.push(IssueKind::RootCount, format!("expected exactly one root bus, found {}", roots.len()));
    }
    let mut seen = HashSet::new();
    for b in &case.buses {
        if !seen.insert(b.id) {
            rep.push(IssueKind::DuplicateBus, format!("bus {} appears more than once", b.id));
        }
        if !(b.v_min.is_finite() && b.v_max.is_finite() && b.v_min > 0.0 && b.v_min <= b.v_max) {
            rep.push(IssueKind::BoundOrder, format!("bus {}: voltage bounds {} > {} or nonpositive", b.id, b.v_min, b.v_max));
        }
        if !finite_nonneg(b.p_load) || !finite_nonneg(b.q_load) {
            rep.push(IssueKind::Load, format!("bus {}: loads must be finite and nonnegative", b.id));
        }
    }
    if let Some(r) = roots.first() {
        if !(case.v_root >= r.v_min && case.v_root <= r.v_max) {
            rep.push(IssueKind::BoundOrder, format!("root voltage {} outside bus {} bounds", case.v_root, r.id));
        }
    }
    let idx = case.bus_index();
    for l in &case.lines {
        let name = format!("line {}-{}", l.from, l.to);
        for id in [l.from, l.to] {
            if !idx.contains_key(&id) {
                rep.push(IssueKind::UnknownBus, format!("{name}: unknown bus {id}"));
            }
        }
        if !(finite_nonneg(l.r) && l.x.is_finite() && l.x > 0.0) {
            rep.push(IssueKind::Impedance, format!("{name}: need r >= 0 and x > 0 (r {}, x {})", l.r, l.x));
        }
        if !(l.l_max.is_finite() && l.l_max > 0.0 && l.s_max.is_finite() && l.s_max > 0.0) {
            rep.push(IssueKind::LineLimit, format!("{name}: limits must be positive"));
        }
    }
    check_tree(case, &idx, &mut rep);
    for (g, gen) in case.generators.iter().enumerate() {
        if !idx.contains_key(&gen.bus) {
            rep.push(IssueKind::UnknownBus, format!("generator {g}: unknown bus {}", gen.bus));
        }
        let ok = [gen.p_set, gen.q_set, gen.p_min, gen.p_max, gen.q_min, gen.q_max, gen.ramp_p]
            .iter()
            .all(|v| v.is_finite());
        if !ok
            || gen.p_min > gen.p_set
            || gen.p_set > gen.p_max
            || gen.q_min > gen.q_set
            || gen.q_set > gen.q_max
        {
            rep.push(IssueKind::BoundOrder, format!("generator {g} at bus {}: setpoints outside bounds", gen.bus));
        }
        if gen.ramp_p.is_nan() || gen.ramp_p < 0.0 {
            rep.push(IssueKind::Generator, format!("generator {g}: negative ramp limit"));
        }
    }
    for (n, w) in case.rpg_units.iter().enumerate() {
        if !idx.contains_key(&w.bus) {
            rep.push(IssueKind::UnknownBus, format!("rpg {n}: unknown bus {}", w.bus));
        }
        if !(finite_nonneg(w.w_forecast) && w.w_cap.is_finite() && w.w_forecast <= w.w_cap) {
            rep.push(IssueKind::Rpg, format!("rpg {n} at bus {}: need 0 <= forecast <= cap", w.bus));
        }
        if !finite_nonneg(w.mu) {
            rep.push(IssueKind::Rpg, format!("rpg {n} at bus {}: mu must be nonnegative", w.bus));
        }
    }
    rep
}

fn check_tree(case: &NetworkCase, idx: &HashMap<u32, usize>, rep: &mut ValidationReport) {
    let n = case.buses.len();
    if let Some(k) = first_cycle(case, idx) {
        let l = &case.lines[k];
        rep.push(IssueKind::Cycle, format!("line {}-{} closes a cycle", l.from, l.to));
    }
    // Parent-to-child orientation: each non-root bus is the `to` end of exactly one line.
    let mut incoming = vec![0usize; n];
    for l in &case.lines {
        if let Some(&t) = idx.get(&l.to) {
            incoming[t] += 1;
        }
    }
    for (i, b) in case.buses.iter().enumerate() {
        if b.is_root && incoming[i] > 0 {
            rep.push(IssueKind::Orientation, format!("line into root bus {}", b.id));
        } else if incoming[i] > 1 {
            rep.push(IssueKind::Orientation, format!("bus {} fed by {} lines", b.id, incoming[i]));
        }
    }
    // Reachability from the root along directed lines.
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for l in &case.lines {
        if let (Some(&f), Some(&t)) = (idx.get(&l.from), idx.get(&l.to)) {
            children[f].push(t);
        }
    }
    let mut reached = vec![false; n];
    if let Some(r) = case.buses.iter().position(|b| b.is_root) {
        let mut stack = vec![r];
        reached[r] = true;
        while let Some(b) = stack.pop() {
            for &c in &children[b] {
                if !reached[c] {
                    reached[c] = true;
                    stack.push(c);
                }
            }
        }
        for (i, b) in case.buses.iter().enumerate() {
            if !reached[i] {
                rep.push(IssueKind::Unreachable, format!("unreachable bus {}", b.id));
            }
        }
    }
}

/// Index of the first line (in order) that closes an undirected cycle.
pub(crate) fn first_cycle(case: &NetworkCase, idx: &HashMap<u32, usize>) -> Option<usize> {
    let mut parent: Vec<usize> = (0..case.buses.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (k, l) in case.lines.iter().enumerate() {
        let (Some(&a), Some(&b)) = (idx.get(&l.from), idx.get(&l.to)) else {
            continue;
        };
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return Some(k);
        }
        parent[ra] = rb;
    }
    None
}

/// Multiplies every line's r and x by `factor`.
pub fn scale_impedances(case: &NetworkCase, factor: f64) -> Result<NetworkCase, CaseError> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(CaseError::Factor(factor));
    }
    let mut out = case.clone();
    for l in &mut out.lines {
        l.r *= factor;
        l.x *= factor;
    }
    Ok(out)
}
