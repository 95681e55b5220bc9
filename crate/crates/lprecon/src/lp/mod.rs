//! Generic linear programs and a self-contained two-phase simplex solver
//! over box-bounded variables.
//!
//! Problems are stated as `min c.x` subject to linear rows (<=, =, >=) and
//! per-variable bounds with infinities allowed. [`verify`] is an independent
//! feasibility checker that never looks at solver internals.

mod simplex;

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One linear constraint: `sum coeffs . x  <relation>  rhs`.
/// Coefficients are (variable index, value) pairs; indices may repeat and
/// are summed.
#[derive(Clone, Debug)]
pub struct LinRow {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarBounds {
    pub lower: f64,
    pub upper: f64,
}

impl VarBounds {
    pub const FREE: VarBounds = VarBounds {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        VarBounds { lower, upper }
    }

    pub fn non_negative() -> Self {
        VarBounds::new(0.0, f64::INFINITY)
    }

    pub fn unit_box() -> Self {
        VarBounds::new(0.0, 1.0)
    }
}

/// A minimization LP over `num_vars` variables.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<LinRow>,
    pub bounds: Vec<VarBounds>,
}

impl LpProblem {
    /// All variables start free with a zero objective.
    pub fn new(num_vars: usize) -> Self {
        LpProblem {
            num_vars,
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
            bounds: vec![VarBounds::FREE; num_vars],
        }
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.bounds[var] = VarBounds::new(lower, upper);
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(LinRow {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.num_vars || self.bounds.len() != self.num_vars {
            return Err(LpError::Invalid(
                "objective/bounds length differs from num_vars".into(),
            ));
        }
        for (i, b) in self.bounds.iter().enumerate() {
            if b.lower.is_nan() || b.upper.is_nan() || b.lower > b.upper {
                return Err(LpError::Invalid(format!(
                    "variable {i} has invalid bounds [{}, {}]",
                    b.lower, b.upper
                )));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::Invalid(format!("row {r} has non-finite rhs")));
            }
            for &(var, coeff) in &row.coeffs {
                if var >= self.num_vars {
                    return Err(LpError::Invalid(format!(
                        "row {r} references variable {var} (num_vars = {})",
                        self.num_vars
                    )));
                }
                if !coeff.is_finite() {
                    return Err(LpError::Invalid(format!("row {r} has non-finite coefficient")));
                }
            }
        }
        for (i, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::Invalid(format!("objective[{i}] is non-finite")));
            }
        }
        Ok(())
    }

    /// Evaluate `sum coeffs . x` for one row.
    pub fn row_value(&self, row: &LinRow, assignment: &[f64]) -> f64 {
        row.coeffs.iter().map(|&(v, c)| c * assignment[v]).sum()
    }

    pub fn objective_value(&self, assignment: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(assignment)
            .map(|(c, x)| c * x)
            .sum()
    }

    /// Fixed-format MPS rendering, for cross-checking against external
    /// solvers. Row i is `R<i+1>`, variable j is `X<j+1>`.
    pub fn to_mps(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NAME          {name}");
        out.push_str("ROWS\n N  COST\n");
        for (r, row) in self.rows.iter().enumerate() {
            let tag = match row.relation {
                Relation::Le => 'L',
                Relation::Eq => 'E',
                Relation::Ge => 'G',
            };
            let _ = writeln!(out, " {tag}  R{:07}", r + 1);
        }
        out.push_str("COLUMNS\n");
        for var in 0..self.num_vars {
            let col = format!("X{:07}", var + 1);
            let mut fields: Vec<(String, f64)> = Vec::new();
            if self.objective[var] != 0.0 {
                fields.push(("COST".to_string(), self.objective[var]));
            }
            for (r, row) in self.rows.iter().enumerate() {
                let coeff: f64 = row
                    .coeffs
                    .iter()
                    .filter(|&&(v, _)| v == var)
                    .map(|&(_, c)| c)
                    .sum();
                if coeff != 0.0 {
                    fields.push((format!("R{:07}", r + 1), coeff));
                }
            }
            for pair in fields.chunks(2) {
                let _ = write!(out, "    {col:<8}  {:<8}  {:>12}", pair[0].0, format_mps(pair[0].1));
                if let Some(second) = pair.get(1) {
                    let _ = write!(out, "   {:<8}  {:>12}", second.0, format_mps(second.1));
                }
                out.push('\n');
            }
        }
        out.push_str("RHS\n");
        for (r, row) in self.rows.iter().enumerate() {
            if row.rhs != 0.0 {
                let _ = writeln!(
                    out,
                    "    RHS       R{:07}  {:>12}",
                    r + 1,
                    format_mps(row.rhs)
                );
            }
        }
        out.push_str("BOUNDS\n");
        for (var, b) in self.bounds.iter().enumerate() {
            let col = format!("X{:07}", var + 1);
            match (b.lower.is_finite(), b.upper.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " FR BND       {col}");
                }
                (true, false) => {
                    if b.lower != 0.0 {
                        let _ = writeln!(out, " LO BND       {col:<8}  {:>12}", format_mps(b.lower));
                    }
                }
                (false, true) => {
                    let _ = writeln!(out, " MI BND       {col}");
                    let _ = writeln!(out, " UP BND       {col:<8}  {:>12}", format_mps(b.upper));
                }
                (true, true) => {
                    if b.lower != 0.0 {
                        let _ = writeln!(out, " LO BND       {col:<8}  {:>12}", format_mps(b.lower));
                    }
                    let _ = writeln!(out, " UP BND       {col:<8}  {:>12}", format_mps(b.upper));
                }
            }
        }
        out.push_str("ENDATA\n");
        out
    }
}

fn format_mps(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e12 {
        format!("{:.1}", v)
    } else {
        format!("{v}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    /// An optimum of a non-trivial objective.
    Optimal,
    /// A feasible point of a problem with an all-zero objective.
    Feasible,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values; present for Optimal/Feasible only.
    pub assignment: Option<Vec<f64>>,
    /// Optimum for Optimal, 0 for Feasible, total residual infeasibility
    /// for Infeasible.
    pub objective_value: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Maximum row/bound violation accepted as feasible.
    pub feasibility: f64,
    /// Reduced costs below this are treated as non-improving.
    pub optimality: f64,
    /// Candidate pivots smaller than this are rejected.
    pub pivot_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-7,
            optimality: 1e-9,
            pivot_floor: 1e-10,
        }
    }
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("iteration limit {limit} exceeded after {iterations} pivots")]
    IterationLimit { limit: usize, iterations: usize },
    #[error("numerically singular basis at iteration {iteration}")]
    SingularBasis { iteration: usize },
    #[error("invalid problem: {0}")]
    Invalid(String),
}

/// Solve with a two-phase primal simplex over bounded variables.
///
/// A problem whose objective is identically zero is solved as phase 1 only
/// and reports `Feasible` with whatever feasible point phase 1 produced.
pub fn solve(problem: &LpProblem, tol: &Tolerances) -> Result<LpSolution, LpError> {
    problem.validate()?;
    simplex::solve(problem, tol)
}

/// Pure feasibility check of a solution's assignment against the problem:
/// true iff every row and every bound holds within `tol.feasibility`
/// (closed: a violation of exactly the tolerance passes).
pub fn verify(problem: &LpProblem, solution: &LpSolution, tol: &Tolerances) -> bool {
    let Some(assignment) = &solution.assignment else {
        return false;
    };
    if assignment.len() != problem.num_vars {
        return false;
    }
    let eps = tol.feasibility;
    for (x, b) in assignment.iter().zip(&problem.bounds) {
        if *x < b.lower - eps || *x > b.upper + eps {
            return false;
        }
    }
    for row in &problem.rows {
        let lhs = problem.row_value(row, assignment);
        let ok = match row.relation {
            Relation::Le => lhs <= row.rhs + eps,
            Relation::Ge => lhs >= row.rhs - eps,
            Relation::Eq => (lhs - row.rhs).abs() <= eps,
        };
        if !ok {
            return false;
        }
    }
    true
}
