//! Projection of `{(y, Δw) : B·y + C·Δw ≤ b}` onto Δw by adaptive constraint
//! generation: repeatedly find the point of the current outer region with the
//! largest dual violation and cut it off.

mod enumerate;
mod master;

use std::fmt::Write as _;
use std::time::Instant;

use dispatch_solver::{MilpOptions, SolverError};

use crate::builder::LinearSystem;
use crate::geometry::{self, GeometryError};
use crate::netmodel::NetworkCase;

pub use enumerate::{enumerate_dual_vertices, MAX_ENUM_ROWS, MAX_ENUM_Y};
pub use master::{master_step, DualEvaluator, MasterKind, MasterResult};

#[derive(Debug, thiserror::Error)]
pub enum AdcgError {
    #[error("empty uncertainty space: the case has no RPG units")]
    EmptyUncertainty,
    #[error("invalid option: {0}")]
    Config(String),
    #[error("dimension mismatch: model has {model} Δw columns, region has {region}")]
    Dimension { model: usize, region: usize },
    #[error("master problem infeasible: the current region is empty")]
    MasterInfeasible,
    #[error("master problem unresolved: {0}")]
    MasterUnresolved(String),
    #[error("size guard exceeded: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowOrigin {
    InitialBox,
    /// Cut added at the given iteration (1-based).
    Cut(usize),
    Derived,
}

/// `{Δw : H·Δw ≥ h}`. Rows are stored scaled to unit ∞-norm.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionPolyhedron {
    dim: usize,
    pub h_mat: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub origin: Vec<RowOrigin>,
    /// Set once emptiness has been certified.
    pub empty: bool,
}

impl RegionPolyhedron {
    pub fn new(dim: usize) -> Self {
        Self { dim, h_mat: Vec::new(), h: Vec::new(), origin: Vec::new(), empty: false }
    }

    /// Axis box `lo ≤ Δw ≤ hi`, two rows per dimension.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Self {
        let d = bounds.len();
        let mut r = Self::new(d);
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            r.push(e.clone(), lo, RowOrigin::InitialBox);
            e[j] = -1.0;
            r.push(e, -hi, RowOrigin::InitialBox);
        }
        r
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.h.len()
    }

    /// Appends `row·Δw ≥ h` after ∞-norm scaling. Returns `false` (and adds
    /// nothing) for a zero row.
    pub fn push(&mut self, mut row: Vec<f64>, mut h: f64, origin: RowOrigin) -> bool {
        assert_eq!(row.len(), self.dim, "row length");
        let s = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s <= 1e-12 {
            return false;
        }
        for v in &mut row {
            *v /= s;
        }
        h /= s;
        self.h_mat.push(row);
        self.h.push(h);
        self.origin.push(origin);
        true
    }

    pub fn push_derived(&mut self, row: Vec<f64>, h: f64) -> bool {
        self.push(row, h, RowOrigin::Derived)
    }

    /// Copy with only the rows flagged in `keep`.
    pub fn select(&self, keep: &[bool]) -> Self {
        let mut r = Self::new(self.dim);
        r.empty = self.empty;
        for i in (0..self.num_rows()).filter(|&i| keep[i]) {
            r.h_mat.push(self.h_mat[i].clone());
            r.h.push(self.h[i]);
            r.origin.push(self.origin[i]);
        }
        r
    }

    /// Largest |bound| among the initial-box rows: an ∞-norm radius of the box.
    pub fn box_radius(&self) -> f64 {
        self.h
            .iter()
            .zip(&self.origin)
            .filter(|(_, o)| **o == RowOrigin::InitialBox)
            .fold(0.0f64, |m, (h, _)| m.max(h.abs()))
    }

    /// Row-wise big-M: `|h_i| + ‖H_i‖₁·radius + 1`.
    pub fn big_m(&self) -> Vec<f64> {
        let radius = self.box_radius();
        self.h_mat
            .iter()
            .zip(&self.h)
            .map(|(row, h)| h.abs() + row.iter().map(|v| v.abs()).sum::<f64>() * radius + 1.0)
            .collect()
    }
}

/// Physical box of the RPG deviations widened by `margin·w_cap` per side.
pub fn initial_box(case: &NetworkCase, margin: f64) -> Result<RegionPolyhedron, AdcgError> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(AdcgError::Config(format!("margin must be a finite value ≥ 0, got {margin}")));
    }
    if case.rpg_units.is_empty() {
        return Err(AdcgError::EmptyUncertainty);
    }
    let bounds: Vec<(f64, f64)> = case
        .rpg_units
        .iter()
        .map(|w| (-w.w_forecast - margin * w.w_cap, w.w_cap - w.w_forecast + margin * w.w_cap))
        .collect();
    Ok(RegionPolyhedron::from_bounds(&bounds))
}

/// Default tolerance by uncertainty dimension.
pub fn default_delta(dims: usize) -> f64 {
    if dims <= 2 {
        1e-4
    } else {
        1e-2
    }
}

/// Result of offering a cut to the region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutOutcome {
    Added,
    /// Parallel to an existing row and not tighter; carries the repeat count.
    Duplicate(usize),
    /// `Cᵀu = 0` with `uᵀb > δ`: no Δw can satisfy the cut.
    EmptyCertificate,
}

/// Tracks duplicate offers across iterations.
#[derive(Clone, Debug, Default)]
pub struct CutBook {
    repeats: usize,
}

/// Adds `(Cᵀu)·Δw ≥ uᵀb` to the region.
pub fn add_cut(
    region: &mut RegionPolyhedron,
    u: &[f64],
    model: &LinearSystem,
    delta: f64,
    iteration: usize,
    book: &mut CutBook,
) -> Result<CutOutcome, AdcgError> {
    if model.num_dw() != region.dim() {
        return Err(AdcgError::Dimension { model: model.num_dw(), region: region.dim() });
    }
    let row = model.c_mat.tr_mul_vec(u);
    let h = geometry::dot(u, &model.rhs);
    let s = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s <= 1e-12 {
        if h > delta {
            region.empty = true;
            return Ok(CutOutcome::EmptyCertificate);
        }
        book.repeats += 1;
        log::warn!("cut with zero coefficients and rhs {h:e} ignored");
        return Ok(CutOutcome::Duplicate(book.repeats));
    }
    let unit: Vec<f64> = row.iter().map(|v| v / s).collect();
    let hn = h / s;
    let dup = region
        .h_mat
        .iter()
        .zip(&region.h)
        .any(|(r, &old)| r.iter().zip(&unit).all(|(a, b)| (a - b).abs() <= 1e-9) && hn <= old + 1e-9);
    if dup {
        book.repeats += 1;
        log::warn!("duplicate cut offered at iteration {iteration} (repeat {})", book.repeats);
        return Ok(CutOutcome::Duplicate(book.repeats));
    }
    region.push(unit, hn, RowOrigin::Cut(iteration));
    Ok(CutOutcome::Added)
}

#[derive(Clone, Debug)]
pub struct AdcgOptions {
    pub delta: f64,
    pub max_iter: usize,
    pub master: MasterKind,
    pub milp: MilpOptions,
    /// One big-M for every row instead of the row-wise bound.
    pub big_m: Option<f64>,
    /// Prune redundant rows once at termination.
    pub prune: bool,
}

impl Default for AdcgOptions {
    fn default() -> Self {
        Self { delta: 1e-4, max_iter: 500, master: MasterKind::VertexScan, milp: MilpOptions::default(), big_m: None, prune: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    IterationLimit,
    /// The region was certified empty.
    Empty,
    /// Three duplicate cuts in total; R could not be pushed below δ.
    Stalled,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::IterationLimit => "iteration_limit",
            Termination::Empty => "empty",
            Termination::Stalled => "stalled",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    pub r: f64,
    pub dw_star: Vec<f64>,
    /// Scaled cut row and rhs; empty when no cut was added.
    pub cut: Vec<f64>,
    pub cut_rhs: f64,
    /// ∞-norm of `Cᵀu` before scaling.
    pub cut_norm: f64,
    pub master_seconds: f64,
    pub cumulative_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdcgTrace {
    pub records: Vec<IterRecord>,
    pub termination: Termination,
    pub seconds: f64,
}

impl AdcgTrace {
    /// Number of master solves, including the final one that certified R ≤ δ.
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last_r(&self) -> Option<f64> {
        self.records.last().map(|r| r.r)
    }

    /// `iteration,R,cut_norm[,master_seconds,cumulative_seconds]`; leave
    /// timings out for byte-reproducible output.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut s = String::from("iteration,R,cut_norm");
        s.push_str(if timing { ",master_seconds,cumulative_seconds\n" } else { "\n" });
        for r in &self.records {
            let _ = write!(s, "{},{:e},{:e}", r.iteration, r.r, r.cut_norm);
            if timing {
                let _ = write!(s, ",{:.6},{:.6}", r.master_seconds, r.cumulative_seconds);
            }
            s.push('\n');
        }
        s
    }
}

/// Cutting-plane loop from `initial` until no dual vertex violates by more
/// than `opts.delta`.
pub fn run(
    model: &LinearSystem,
    initial: RegionPolyhedron,
    opts: &AdcgOptions,
) -> Result<(RegionPolyhedron, AdcgTrace), AdcgError> {
    if !(opts.delta > 0.0) {
        return Err(AdcgError::Config(format!("delta must be positive, got {}", opts.delta)));
    }
    if model.num_dw() != initial.dim() {
        return Err(AdcgError::Dimension { model: model.num_dw(), region: initial.dim() });
    }
    let start = Instant::now();
    let mut region = initial;
    let mut records = Vec::new();
    let mut book = CutBook::default();
    let mut evaluator = DualEvaluator::new(model);
    let mut termination = Termination::IterationLimit;
    for iteration in 1..=opts.max_iter {
        let t0 = Instant::now();
        let res = match master::solve(&mut evaluator, model, &region, opts) {
            Ok(r) => r,
            Err(AdcgError::MasterInfeasible) => {
                log::info!("region became empty at iteration {iteration}");
                region.empty = true;
                termination = Termination::Empty;
                break;
            }
            Err(e) => return Err(e),
        };
        let master_seconds = t0.elapsed().as_secs_f64();
        let mut rec = IterRecord {
            iteration,
            r: res.r,
            dw_star: res.dw_star.clone(),
            cut: Vec::new(),
            cut_rhs: 0.0,
            cut_norm: 0.0,
            master_seconds,
            cumulative_seconds: 0.0,
        };
        log::debug!("iteration {iteration}: R = {:e} at {:?}", res.r, res.dw_star);
        if res.r <= opts.delta {
            rec.cumulative_seconds = start.elapsed().as_secs_f64();
            records.push(rec);
            termination = Termination::Converged;
            break;
        }
        rec.cut_norm = model.c_mat.tr_mul_vec(&res.u_star).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let outcome = add_cut(&mut region, &res.u_star, model, opts.delta, iteration, &mut book)?;
        if outcome == CutOutcome::Added {
            rec.cut = region.h_mat.last().cloned().unwrap_or_default();
            rec.cut_rhs = *region.h.last().unwrap_or(&0.0);
        }
        rec.cumulative_seconds = start.elapsed().as_secs_f64();
        records.push(rec);
        match outcome {
            CutOutcome::Added => {}
            CutOutcome::EmptyCertificate => {
                termination = Termination::Empty;
                break;
            }
            CutOutcome::Duplicate(n) if n >= 3 => {
                termination = Termination::Stalled;
                break;
            }
            CutOutcome::Duplicate(_) => {}
        }
    }
    if opts.prune && !region.empty {
        region = geometry::prune_redundant(&region)?;
    }
    let trace = AdcgTrace { records, termination, seconds: start.elapsed().as_secs_f64() };
    Ok((region, trace))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::builder::{build_tcr, ApproxConfig};
    use crate::netmodel::ieee33;

    /// One Δw, one y: `y ≥ Δw − 0.2`, `y ≤ 0`, `y ≥ −Δw − 0.1`.
    /// Feasible iff `−0.1 ≤ Δw ≤ 0.2`.
    pub(crate) fn interval_toy() -> LinearSystem {
        LinearSystem::from_dense(&[vec![-1.0], vec![1.0], vec![-1.0]], &[vec![1.0], vec![0.0], vec![-1.0]], &[0.2, 0.0, 0.1])
    }

    #[test]
    fn box_arithmetic() {
        let case = ieee33();
        let b = initial_box(&case, 0.05).unwrap();
        assert_eq!(b.num_rows(), 4);
        for (j, w) in case.rpg_units.iter().enumerate() {
            let lo = b.h[2 * j];
            let hi = -b.h[2 * j + 1];
            assert!((lo - (-w.w_forecast - 0.05 * w.w_cap)).abs() < 1e-15);
            assert!((hi - (w.w_cap - w.w_forecast + 0.05 * w.w_cap)).abs() < 1e-15);
        }
        let exact = initial_box(&case, 0.0).unwrap();
        assert!((exact.h[0] + case.rpg_units[0].w_forecast).abs() < 1e-15);
        let mut none = case.clone();
        none.rpg_units.clear();
        assert!(matches!(initial_box(&none, 0.05), Err(AdcgError::EmptyUncertainty)));
        assert!(initial_box(&case, -0.1).is_err());
    }

    #[test]
    fn interval_toy_converges() {
        let model = interval_toy();
        let (region, trace) = run(&model, RegionPolyhedron::from_bounds(&[(-5.0, 5.0)]), &AdcgOptions::default()).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        assert!(geometry::contains(&region, &[-0.1]) && geometry::contains(&region, &[0.2]));
        assert!(!geometry::contains(&region, &[-0.1 - 1e-3]) && !geometry::contains(&region, &[0.2 + 1e-3]));
        assert!(trace.to_csv(true).lines().count() == trace.iterations() + 1);
    }

    #[test]
    fn duplicate_and_empty_cuts() {
        let model = interval_toy();
        let mut region = RegionPolyhedron::from_bounds(&[(-5.0, 5.0)]);
        let mut book = CutBook::default();
        // u picks rows 0 and 1: cut Δw·(−1) ≥ −0.2 after the sign of Cᵀu.
        let u = [-1.0, -1.0, 0.0];
        assert_eq!(add_cut(&mut region, &u, &model, 1e-4, 1, &mut book).unwrap(), CutOutcome::Added);
        assert_eq!(region.num_rows(), 3);
        assert!(!geometry::contains(&region, &[0.3]));
        assert_eq!(add_cut(&mut region, &u, &model, 1e-4, 2, &mut book).unwrap(), CutOutcome::Duplicate(1));
        assert_eq!(region.num_rows(), 3);
        // y ≤ −1 and y ≥ 0 never hold together: Cᵀu = 0, uᵀb = 1.
        let bad = LinearSystem::from_dense(&[vec![1.0], vec![-1.0]], &[vec![0.0], vec![0.0]], &[-1.0, 0.0]);
        let mut r = RegionPolyhedron::from_bounds(&[(0.0, 1.0)]);
        assert_eq!(add_cut(&mut r, &[-1.0, -1.0], &bad, 1e-4, 1, &mut book).unwrap(), CutOutcome::EmptyCertificate);
        assert!(r.empty);
    }

    #[test]
    fn zero_coupling_converges_immediately() {
        let model = LinearSystem::from_dense(&[vec![1.0], vec![-1.0]], &[vec![0.0], vec![0.0]], &[1.0, 0.0]);
        let (_, trace) = run(&model, RegionPolyhedron::from_bounds(&[(-1.0, 1.0)]), &AdcgOptions::default()).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        assert_eq!(trace.iterations(), 1);
    }

    #[test]
    fn milp_and_scan_agree_on_interval() {
        let model = interval_toy();
        let b = RegionPolyhedron::from_bounds(&[(-5.0, 5.0)]);
        let scan = run(&model, b.clone(), &AdcgOptions::default()).unwrap().0;
        let milp = run(&model, b, &AdcgOptions { master: MasterKind::Milp, ..AdcgOptions::default() }).unwrap().0;
        assert!(geometry::facet_distance(&scan, &milp) <= 1e-6);
    }

    #[test]
    fn big_m_follows_rows() {
        let mut r = RegionPolyhedron::from_bounds(&[(-1.0, 2.0), (0.0, 1.0)]);
        r.push(vec![1.0, -1.0], 0.5, RowOrigin::Cut(1));
        let m = r.big_m();
        assert_eq!(r.box_radius(), 2.0);
        assert!((m[4] - (0.5 + 2.0 * 2.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn ieee33_builds_a_region_quickly_at_low_k() {
        let case = ieee33();
        let model = build_tcr(&case, &ApproxConfig { k: 3, ..ApproxConfig::default() }).unwrap();
        let (region, trace) = run(&model, initial_box(&case, 0.05).unwrap(), &AdcgOptions::default()).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        assert!(geometry::contains(&region, &[0.0, 0.0]));
    }
}
