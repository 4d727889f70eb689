//! Linear program data, solutions, and optimality certificates.

use crate::simplex::{self, SimplexOptions};
use crate::sparse::SparseMatrix;
use crate::SolverError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// `optimize c^T x` subject to `A x (sense) rhs` and `lower <= x <= upper`.
///
/// Bounds may be infinite. Coefficients must be finite.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub direction: Direction,
    pub objective: Vec<f64>,
    pub matrix: SparseMatrix,
    pub senses: Vec<RowSense>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Position of a variable (structural or row activity) in a simplex basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Basis snapshot used to warm-start a later solve.
///
/// Holds one status per structural variable followed by one per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    pub vars: Vec<VarStatus>,
    pub rows: Vec<VarStatus>,
}

impl Basis {
    /// Extends the basis for rows appended after it was taken; the new row
    /// activities enter as basic.
    pub fn with_added_rows(mut self, count: usize) -> Self {
        self.rows.extend(std::iter::repeat(VarStatus::Basic).take(count));
        self
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point. Meaningful when optimal.
    pub x: Vec<f64>,
    /// Row duals, `d objective / d rhs_i` at the optimum.
    pub duals: Vec<f64>,
    /// Reduced costs, `d objective / d x_j` with the basis held fixed.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub basis: Option<Basis>,
}

/// Residuals of an optimal solution, all measured on the unscaled problem.
#[derive(Clone, Copy, Debug, Default)]
pub struct Certificate {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity: f64,
    /// `|primal objective - dual objective| / max(1, |primal objective|)`
    pub duality_gap: f64,
}

impl Certificate {
    pub fn within(&self, feas: f64, gap: f64) -> bool {
        self.primal_residual <= feas
            && self.dual_residual <= feas
            && self.complementarity <= gap
            && self.duality_gap <= gap
    }
}

impl LpProblem {
    pub fn new(direction: Direction, num_vars: usize) -> Self {
        Self {
            direction,
            objective: vec![0.0; num_vars],
            matrix: SparseMatrix::zeros(0, num_vars),
            senses: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        let m = self.num_rows();
        if self.matrix.ncols() != n
            || self.matrix.nrows() != m
            || self.senses.len() != m
            || self.lower.len() != n
            || self.upper.len() != n
        {
            return Err(SolverError::Dimension(format!(
                "{} vars, {} rows, matrix {}x{}, {} senses, {}/{} bounds",
                n,
                m,
                self.matrix.nrows(),
                self.matrix.ncols(),
                self.senses.len(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        if !self.matrix.is_finite()
            || self.objective.iter().any(|c| !c.is_finite())
            || self.rhs.iter().any(|b| !b.is_finite())
        {
            return Err(SolverError::NonFinite);
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(SolverError::NonFinite);
            }
        }
        Ok(())
    }

    /// Residuals of `sol` against this problem's optimality conditions.
    pub fn certify(&self, sol: &LpSolution) -> Certificate {
        let n = self.num_vars();
        let act = self.matrix.mul_vec(&sol.x);
        let mut primal = 0.0f64;
        for j in 0..n {
            primal = primal.max(self.lower[j] - sol.x[j]).max(sol.x[j] - self.upper[j]);
        }
        for (i, &a) in act.iter().enumerate() {
            let b = self.rhs[i];
            let v = match self.senses[i] {
                RowSense::Le => a - b,
                RowSense::Ge => b - a,
                RowSense::Eq => (a - b).abs(),
            };
            primal = primal.max(v);
        }
        // Work in the minimization sense: objective c' = sign * c.
        let sign = match self.direction {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        };
        let y: Vec<f64> = sol.duals.iter().map(|d| sign * d).collect();
        let aty = self.matrix.tr_mul_vec(&y);
        let mut dual = 0.0f64;
        let mut compl = 0.0f64;
        let mut dual_obj = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            // Minimization multipliers: <= rows need y <= 0, >= rows y >= 0.
            let v = match self.senses[i] {
                RowSense::Le => yi.max(0.0),
                RowSense::Ge => (-yi).max(0.0),
                RowSense::Eq => 0.0,
            };
            dual = dual.max(v);
            if self.senses[i] != RowSense::Eq {
                compl = compl.max((yi * (act[i] - self.rhs[i])).abs());
            }
            dual_obj += yi * self.rhs[i];
        }
        for j in 0..n {
            let d = sign * self.objective[j] - aty[j];
            let (l, u) = (self.lower[j], self.upper[j]);
            // d > 0 must be absorbed by a finite lower bound, d < 0 by an upper one.
            if d > 0.0 {
                if l.is_finite() {
                    dual_obj += d * l;
                    compl = compl.max((d * (sol.x[j] - l)).abs());
                } else {
                    dual = dual.max(d);
                }
            } else if d < 0.0 {
                if u.is_finite() {
                    dual_obj += d * u;
                    compl = compl.max((d * (u - sol.x[j])).abs());
                } else {
                    dual = dual.max(-d);
                }
            }
        }
        let primal_obj: f64 = sign * self.objective.iter().zip(&sol.x).map(|(c, x)| c * x).sum::<f64>();
        Certificate {
            primal_residual: primal,
            dual_residual: dual,
            complementarity: compl,
            duality_gap: (primal_obj - dual_obj).abs() / primal_obj.abs().max(1.0),
        }
    }
}

pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, SolverError> {
    solve_lp_with(problem, None, &SimplexOptions::default())
}

/// Solves starting from `warm` when it matches the problem's dimensions.
pub fn solve_lp_warm(problem: &LpProblem, warm: Option<&Basis>) -> Result<LpSolution, SolverError> {
    solve_lp_with(problem, warm, &SimplexOptions::default())
}

pub fn solve_lp_with(
    problem: &LpProblem,
    warm: Option<&Basis>,
    options: &SimplexOptions,
) -> Result<LpSolution, SolverError> {
    problem.validate()?;
    simplex::solve(problem, warm, options)
}

/// Incremental construction of an [`LpProblem`].
#[derive(Clone, Debug)]
pub struct LpBuilder {
    direction: Direction,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    triplets: Vec<(usize, usize, f64)>,
    senses: Vec<RowSense>,
    rhs: Vec<f64>,
}

impl LpBuilder {
    pub fn new(direction: Direction) -> Self {
        Self {
            direction,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            triplets: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: &[(usize, f64)], sense: RowSense, rhs: f64) -> usize {
        let r = self.rhs.len();
        for &(j, v) in coeffs {
            self.triplets.push((r, j, v));
        }
        self.senses.push(sense);
        self.rhs.push(rhs);
        r
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn build(self) -> LpProblem {
        let n = self.objective.len();
        LpProblem {
            direction: self.direction,
            matrix: SparseMatrix::from_triplets(self.rhs.len(), n, &self.triplets),
            objective: self.objective,
            senses: self.senses,
            rhs: self.rhs,
            lower: self.lower,
            upper: self.upper,
        }
    }
}
