//! Two-phase primal simplex over bounded variables.
//!
//! Revised form with a product-form inverse: the basis starts as the
//! (signed) identity of slacks and artificials, and every pivot appends one
//! sparse eta column. Structural columns are stored sparse; working vectors
//! are dense. Dantzig pricing by default, Bland's rule after a stall of 50
//! degenerate pivots.

use super::{LpError, LpProblem, LpSolution, LpStatus, Relation, Tolerances};

const BLAND_STALL: usize = 50;
const DEGENERATE_STEP: f64 = 1e-12;
const RATIO_TIE: f64 = 1e-9;
const ETA_DROP: f64 = 1e-13;
const REFRESH_EVERY: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable, parked at value zero.
    Free,
}

struct Eta {
    pivot_row: u32,
    /// Sparse eta column, pivot entry included (holding 1/pivot).
    entries: Vec<(u32, f64)>,
}

struct Csc {
    ptr: Vec<usize>,
    rows: Vec<u32>,
    vals: Vec<f64>,
}

impl Csc {
    fn from_rows(num_vars: usize, rows: &[super::LinRow]) -> Csc {
        let mut counts = vec![0usize; num_vars + 1];
        for row in rows {
            for &(var, _) in &row.coeffs {
                counts[var + 1] += 1;
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let nnz = counts[num_vars];
        let mut fill = counts.clone();
        let mut raw_rows = vec![0u32; nnz];
        let mut raw_vals = vec![0f64; nnz];
        for (r, row) in rows.iter().enumerate() {
            for &(var, coeff) in &row.coeffs {
                let at = fill[var];
                raw_rows[at] = r as u32;
                raw_vals[at] = coeff;
                fill[var] += 1;
            }
        }
        // merge duplicate row entries within each column
        let mut ptr = vec![0usize; num_vars + 1];
        let mut out_rows = Vec::with_capacity(nnz);
        let mut out_vals = Vec::with_capacity(nnz);
        for var in 0..num_vars {
            let lo = counts[var];
            let hi = counts[var + 1];
            let mut entries: Vec<(u32, f64)> = raw_rows[lo..hi]
                .iter()
                .copied()
                .zip(raw_vals[lo..hi].iter().copied())
                .collect();
            entries.sort_unstable_by_key(|&(r, _)| r);
            let mut k = 0;
            while k < entries.len() {
                let row = entries[k].0;
                let mut sum = 0.0;
                while k < entries.len() && entries[k].0 == row {
                    sum += entries[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    out_rows.push(row);
                    out_vals.push(sum);
                }
            }
            ptr[var + 1] = out_rows.len();
        }
        Csc {
            ptr,
            rows: out_rows,
            vals: out_vals,
        }
    }
}

/// Variable ids: structural, then one slack per row, then one artificial
/// per row. Slack columns are +e_r with bounds chosen per relation;
/// artificial columns are sign(residual)*e_r.
struct Solver<'a> {
    tol: &'a Tolerances,
    nrows: usize,
    nstruct: usize,
    cols: Csc,
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<VarState>,
    value: Vec<f64>,
    basic_var: Vec<usize>,
    rhs: Vec<f64>,
    etas: Vec<Eta>,
    iterations: usize,
    limit: usize,
    degenerate_streak: usize,
    bland: bool,
    work: Vec<f64>,
    y: Vec<f64>,
    costs: Vec<f64>,
}

enum Step {
    Optimal,
    Unbounded,
}

impl<'a> Solver<'a> {
    fn artificial(&self, row: usize) -> usize {
        self.nstruct + self.nrows + row
    }

    fn total_vars(&self) -> usize {
        self.nstruct + 2 * self.nrows
    }

    fn column_dot(&self, var: usize, y: &[f64]) -> f64 {
        if var < self.nstruct {
            let lo = self.cols.ptr[var];
            let hi = self.cols.ptr[var + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.cols.vals[k] * y[self.cols.rows[k] as usize];
            }
            acc
        } else if var < self.nstruct + self.nrows {
            y[var - self.nstruct]
        } else {
            let row = var - self.nstruct - self.nrows;
            self.art_sign[row] * y[row]
        }
    }

    fn scatter_column(&self, var: usize, out: &mut [f64]) {
        if var < self.nstruct {
            let lo = self.cols.ptr[var];
            let hi = self.cols.ptr[var + 1];
            for k in lo..hi {
                out[self.cols.rows[k] as usize] = self.cols.vals[k];
            }
        } else if var < self.nstruct + self.nrows {
            out[var - self.nstruct] = 1.0;
        } else {
            let row = var - self.nstruct - self.nrows;
            out[row] = self.art_sign[row];
        }
    }

    fn ftran(&self, x: &mut [f64]) {
        for eta in &self.etas {
            let t = x[eta.pivot_row as usize];
            if t == 0.0 {
                continue;
            }
            for &(row, v) in &eta.entries {
                if row == eta.pivot_row {
                    x[row as usize] = t * v;
                } else {
                    x[row as usize] += t * v;
                }
            }
        }
    }

    fn btran(&self, y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut acc = 0.0;
            for &(row, v) in &eta.entries {
                acc += v * y[row as usize];
            }
            y[eta.pivot_row as usize] = acc;
        }
    }

    /// Recompute every basic value from scratch through the eta chain,
    /// clearing incremental drift. Nonbasic slacks and artificials always
    /// sit at zero, so only structural nonbasics contribute.
    fn refresh_basics(&mut self) {
        let mut acc = self.rhs.clone();
        for var in 0..self.nstruct {
            if self.state[var] != VarState::Basic {
                let v = self.value[var];
                if v != 0.0 {
                    let lo = self.cols.ptr[var];
                    let hi = self.cols.ptr[var + 1];
                    for k in lo..hi {
                        acc[self.cols.rows[k] as usize] -= self.cols.vals[k] * v;
                    }
                }
            }
        }
        self.ftran(&mut acc);
        for row in 0..self.nrows {
            self.value[self.basic_var[row]] = acc[row];
        }
    }

    /// Entering-variable choice: (var, direction). Dantzig by |reduced
    /// cost|; in Bland mode, the lowest-index eligible variable.
    fn price(&self) -> Option<(usize, f64)> {
        let tol = self.tol.optimality;
        let mut best: Option<(usize, f64, f64)> = None;
        for var in 0..self.total_vars() {
            let state = self.state[var];
            if state == VarState::Basic || self.lower[var] == self.upper[var] {
                continue;
            }
            let d = self.costs[var] - self.column_dot(var, &self.y);
            let dir = match state {
                VarState::AtLower | VarState::Free if d < -tol => 1.0,
                VarState::AtUpper | VarState::Free if d > tol => -1.0,
                _ => continue,
            };
            if self.bland {
                return Some((var, dir));
            }
            match best {
                Some((_, bd, _)) if d.abs() <= bd => {}
                _ => best = Some((var, d.abs(), dir)),
            }
        }
        best.map(|(var, _, dir)| (var, dir))
    }

    fn optimize(&mut self) -> Result<Step, LpError> {
        loop {
            if self.iterations >= self.limit {
                return Err(LpError::IterationLimit {
                    limit: self.limit,
                    iterations: self.iterations,
                });
            }

            // y = B^-T c_B
            let mut y = std::mem::take(&mut self.y);
            for row in 0..self.nrows {
                y[row] = self.costs[self.basic_var[row]];
            }
            self.btran(&mut y);
            self.y = y;

            let Some((entering, dir)) = self.price() else {
                return Ok(Step::Optimal);
            };

            // direction of the basics: d = B^-1 a_entering
            let mut d_col = std::mem::take(&mut self.work);
            d_col.iter_mut().for_each(|v| *v = 0.0);
            self.scatter_column(entering, &mut d_col);
            self.ftran(&mut d_col);

            // ratio test
            let own_range = self.upper[entering] - self.lower[entering];
            let mut theta_row = f64::INFINITY;
            let mut blocking: Option<usize> = None;
            for row in 0..self.nrows {
                let alpha = d_col[row];
                if alpha.abs() <= self.tol.pivot_floor {
                    continue;
                }
                let bvar = self.basic_var[row];
                let xb = self.value[bvar];
                let delta = -dir * alpha;
                let limit = if delta > 0.0 {
                    if self.upper[bvar].is_finite() {
                        ((self.upper[bvar] - xb) / delta).max(0.0)
                    } else {
                        continue;
                    }
                } else if self.lower[bvar].is_finite() {
                    ((xb - self.lower[bvar]) / -delta).max(0.0)
                } else {
                    continue;
                };
                match blocking {
                    None => {
                        theta_row = limit;
                        blocking = Some(row);
                    }
                    Some(cur) => {
                        if limit < theta_row - RATIO_TIE {
                            theta_row = limit;
                            blocking = Some(row);
                        } else if limit <= theta_row + RATIO_TIE {
                            let better = if self.bland {
                                self.basic_var[row] < self.basic_var[cur]
                            } else {
                                alpha.abs() > d_col[cur].abs()
                            };
                            if better {
                                theta_row = theta_row.min(limit);
                                blocking = Some(row);
                            }
                        }
                    }
                }
            }

            if theta_row.is_infinite() && own_range.is_infinite() {
                self.work = d_col;
                return Ok(Step::Unbounded);
            }
            let flip = own_range <= theta_row;
            let step = if flip { own_range } else { theta_row };

            if step != 0.0 {
                for row in 0..self.nrows {
                    let alpha = d_col[row];
                    if alpha != 0.0 {
                        self.value[self.basic_var[row]] -= dir * step * alpha;
                    }
                }
            }

            if flip {
                // entering jumps to its opposite bound; basis unchanged
                if dir > 0.0 {
                    self.state[entering] = VarState::AtUpper;
                    self.value[entering] = self.upper[entering];
                } else {
                    self.state[entering] = VarState::AtLower;
                    self.value[entering] = self.lower[entering];
                }
            } else {
                let row = blocking.expect("finite theta_row has a blocking row");
                let pivot = d_col[row];
                if pivot.abs() <= self.tol.pivot_floor {
                    self.work = d_col;
                    return Err(LpError::SingularBasis {
                        iteration: self.iterations,
                    });
                }
                let leaving = self.basic_var[row];
                let delta_leaving = -dir * pivot;
                if delta_leaving > 0.0 {
                    self.state[leaving] = VarState::AtUpper;
                    self.value[leaving] = self.upper[leaving];
                } else {
                    self.state[leaving] = VarState::AtLower;
                    self.value[leaving] = self.lower[leaving];
                }
                // an artificial that leaves the basis is finished for good
                if leaving >= self.nstruct + self.nrows {
                    self.lower[leaving] = 0.0;
                    self.upper[leaving] = 0.0;
                    self.state[leaving] = VarState::AtLower;
                    self.value[leaving] = 0.0;
                }
                self.value[entering] += dir * step;
                self.state[entering] = VarState::Basic;
                self.basic_var[row] = entering;

                let inv = 1.0 / pivot;
                let mut entries = Vec::new();
                for (r, &v) in d_col.iter().enumerate() {
                    if r == row {
                        entries.push((r as u32, inv));
                    } else if v.abs() > ETA_DROP {
                        entries.push((r as u32, -v * inv));
                    }
                }
                self.etas.push(Eta {
                    pivot_row: row as u32,
                    entries,
                });
                if self.etas.len() % REFRESH_EVERY == 0 {
                    self.work = d_col;
                    self.refresh_basics();
                    d_col = std::mem::take(&mut self.work);
                }
            }

            self.iterations += 1;
            if step.abs() <= DEGENERATE_STEP {
                self.degenerate_streak += 1;
                if self.degenerate_streak > BLAND_STALL {
                    self.bland = true;
                }
            } else {
                self.degenerate_streak = 0;
                self.bland = false;
            }

            self.work = d_col;
        }
    }

    fn phase1_infeasibility(&self) -> f64 {
        (0..self.nrows)
            .map(|r| {
                let a = self.artificial(r);
                if self.state[a] == VarState::Basic {
                    self.value[a].abs()
                } else {
                    0.0
                }
            })
            .sum()
    }
}

pub(super) fn solve(problem: &LpProblem, tol: &Tolerances) -> Result<LpSolution, LpError> {
    let nrows = problem.rows.len();
    let nstruct = problem.num_vars;
    let cols = Csc::from_rows(nstruct, &problem.rows);

    let total = nstruct + 2 * nrows;
    let mut lower = vec![0.0f64; total];
    let mut upper = vec![0.0f64; total];
    for (i, b) in problem.bounds.iter().enumerate() {
        lower[i] = b.lower;
        upper[i] = b.upper;
    }
    for (r, row) in problem.rows.iter().enumerate() {
        let (lo, hi) = match row.relation {
            Relation::Le => (0.0, f64::INFINITY),
            Relation::Ge => (f64::NEG_INFINITY, 0.0),
            Relation::Eq => (0.0, 0.0),
        };
        lower[nstruct + r] = lo;
        upper[nstruct + r] = hi;
        // artificials start disabled; activated per row below when needed
        lower[nstruct + nrows + r] = 0.0;
        upper[nstruct + nrows + r] = 0.0;
    }

    let mut state = vec![VarState::AtLower; total];
    let mut value = vec![0.0f64; total];
    for var in 0..nstruct {
        state[var] = if lower[var].is_finite() {
            VarState::AtLower
        } else if upper[var].is_finite() {
            VarState::AtUpper
        } else {
            VarState::Free
        };
        value[var] = match state[var] {
            VarState::AtLower => lower[var],
            VarState::AtUpper => upper[var],
            _ => 0.0,
        };
    }

    // initial residuals with every structural variable at its parked value
    let mut residual: Vec<f64> = problem.rows.iter().map(|r| r.rhs).collect();
    for var in 0..nstruct {
        let v = value[var];
        if v != 0.0 {
            let lo = cols.ptr[var];
            let hi = cols.ptr[var + 1];
            for k in lo..hi {
                residual[cols.rows[k] as usize] -= cols.vals[k] * v;
            }
        }
    }

    let mut art_sign = vec![1.0f64; nrows];
    let mut basic_var = vec![0usize; nrows];
    let mut need_phase1 = false;
    for r in 0..nrows {
        let slack = nstruct + r;
        let rho = residual[r];
        if rho >= lower[slack] && rho <= upper[slack] {
            state[slack] = VarState::Basic;
            value[slack] = rho;
            basic_var[r] = slack;
        } else {
            // slack parks at its finite zero bound, the artificial absorbs
            // the violation with a matching sign
            state[slack] = if lower[slack].is_finite() {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            value[slack] = 0.0;
            let art = nstruct + nrows + r;
            art_sign[r] = if rho >= 0.0 { 1.0 } else { -1.0 };
            upper[art] = f64::INFINITY;
            state[art] = VarState::Basic;
            value[art] = rho.abs();
            basic_var[r] = art;
            need_phase1 = true;
        }
    }

    let limit = 50usize.saturating_mul(nrows + nstruct).max(1000);
    let mut solver = Solver {
        tol,
        nrows,
        nstruct,
        cols,
        art_sign,
        lower,
        upper,
        state,
        value,
        basic_var,
        rhs: problem.rows.iter().map(|r| r.rhs).collect(),
        etas: Vec::new(),
        iterations: 0,
        limit,
        degenerate_streak: 0,
        bland: false,
        work: vec![0.0; nrows],
        y: vec![0.0; nrows],
        costs: vec![0.0; total],
    };

    let zero_objective = problem.objective.iter().all(|&c| c == 0.0);

    if need_phase1 {
        for r in 0..nrows {
            let art = solver.artificial(r);
            if solver.upper[art].is_infinite() {
                solver.costs[art] = 1.0;
            }
        }
        match solver.optimize()? {
            Step::Optimal => {}
            Step::Unbounded => {
                // the phase-1 objective is bounded below by zero; this
                // signals a numerically broken basis
                return Err(LpError::SingularBasis {
                    iteration: solver.iterations,
                });
            }
        }
        solver.refresh_basics();
        let infeasibility = solver.phase1_infeasibility();
        if infeasibility > tol.feasibility {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                assignment: None,
                objective_value: infeasibility,
                iterations: solver.iterations,
            });
        }
        // freeze every artificial at zero for phase 2
        for r in 0..nrows {
            let art = solver.artificial(r);
            solver.lower[art] = 0.0;
            solver.upper[art] = 0.0;
            solver.costs[art] = 0.0;
        }
    }

    if !zero_objective {
        solver.costs[..nstruct].copy_from_slice(&problem.objective);
        for c in solver.costs[nstruct..].iter_mut() {
            *c = 0.0;
        }
        match solver.optimize()? {
            Step::Optimal => {}
            Step::Unbounded => {
                return Ok(LpSolution {
                    status: LpStatus::Unbounded,
                    assignment: None,
                    objective_value: f64::NEG_INFINITY,
                    iterations: solver.iterations,
                });
            }
        }
    }

    solver.refresh_basics();
    let assignment: Vec<f64> = solver.value[..nstruct].to_vec();
    let objective_value = if zero_objective {
        0.0
    } else {
        problem.objective_value(&assignment)
    };
    Ok(LpSolution {
        status: if zero_objective {
            LpStatus::Feasible
        } else {
            LpStatus::Optimal
        },
        assignment: Some(assignment),
        objective_value,
        iterations: solver.iterations,
    })
}
