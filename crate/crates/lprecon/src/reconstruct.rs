//! The attack itself: turn noisy answers into linear programs, solve,
//! round, and score.
//!
//! Three formulations are supported:
//!
//! - **least absolute error** ([`Method::Dmt`]): minimize the sum of
//!   absolute residuals over candidate databases in the unit box;
//! - **bounded-error feasibility** ([`Method::DiNi`]): a trivial objective
//!   with every residual confined to `B * sigma`;
//! - **capped least absolute error** ([`Method::BoundedDmt`]): the first
//!   formulation plus a hard cap on each residual magnitude.

use std::time::Instant;

use thiserror::Error;

use crate::dataset::{Dataset, PresenceInstance};
use crate::lp::{self, LpProblem, LpStatus, Relation, Tolerances, VarBounds};
use crate::oracle::{self, AnswerSet, NoiseModel, OracleError};
use crate::querygen::{self, MaterializedFamily, MaterializedQuery, QueryError, QueryFamily};

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("no usable queries: every answer was suppressed")]
    NoUsableQueries,
    #[error("answers ({answers}) do not align with queries ({queries})")]
    Misaligned { queries: usize, answers: usize },
    #[error("bit vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sigma must be positive for this method, got {0}")]
    NonPositiveSigma(f64),
    #[error("{0} must be positive, got {1}")]
    NonPositiveParameter(&'static str, f64),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("lp: {0}")]
    Lp(#[from] lp::LpError),
}

/// Attack formulation selector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// Minimize the total absolute residual.
    Dmt,
    /// Feasibility under |residual| <= error_bound_multiplier * sigma.
    DiNi { error_bound_multiplier: f64 },
    /// Dmt plus per-query residual cap of cap_multiplier * sigma.
    BoundedDmt { cap_multiplier: f64 },
}

pub const DEFAULT_CAP_MULTIPLIER: f64 = 5.0;

impl Method {
    pub fn bounded_dmt_default() -> Self {
        Method::BoundedDmt {
            cap_multiplier: DEFAULT_CAP_MULTIPLIER,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Method::Dmt => "dmt",
            Method::DiNi { .. } => "dini",
            Method::BoundedDmt { .. } => "bounded-dmt",
        }
    }

    /// The B or cap parameter, when the method has one.
    pub fn parameter(&self) -> Option<f64> {
        match self {
            Method::Dmt => None,
            Method::DiNi {
                error_bound_multiplier,
            } => Some(*error_bound_multiplier),
            Method::BoundedDmt { cap_multiplier } => Some(*cap_multiplier),
        }
    }
}

/// Queries that survived suppression, with their answer values.
#[derive(Clone, Debug)]
pub struct UsableQueries<'a> {
    pub queries: Vec<&'a MaterializedQuery>,
    pub answers: Vec<f64>,
    pub suppressed: usize,
}

/// Drop suppressed answers, keeping queries and values aligned.
pub fn usable_queries<'a>(
    family: &'a MaterializedFamily,
    answers: &AnswerSet,
) -> Result<UsableQueries<'a>, ReconstructError> {
    if family.queries.len() != answers.len() {
        return Err(ReconstructError::Misaligned {
            queries: family.queries.len(),
            answers: answers.len(),
        });
    }
    let mut queries = Vec::with_capacity(family.queries.len());
    let mut values = Vec::with_capacity(family.queries.len());
    let mut suppressed = 0;
    for (q, a) in family.queries.iter().zip(&answers.answers) {
        match a.response.value() {
            Some(v) => {
                queries.push(q);
                values.push(v);
            }
            None => suppressed += 1,
        }
    }
    if queries.is_empty() {
        return Err(ReconstructError::NoUsableQueries);
    }
    Ok(UsableQueries {
        queries,
        answers: values,
        suppressed,
    })
}

fn query_coeffs(query: &MaterializedQuery, n: usize) -> Vec<(usize, f64)> {
    if query.signed {
        // +1 on members, -1 elsewhere
        let mut coeffs = vec![(0usize, -1.0); 0];
        coeffs.reserve(n);
        let mut member = vec![false; n];
        for &pos in &query.members {
            member[pos] = true;
        }
        for (i, &m) in member.iter().enumerate() {
            coeffs.push((i, if m { 1.0 } else { -1.0 }));
        }
        coeffs
    } else {
        query.members.iter().map(|&pos| (pos, 1.0)).collect()
    }
}

/// Least-absolute-error program: variables x in [0,1]^n and one residual
/// magnitude t per usable query; rows `q(x) - t <= a` and `q(x) + t >= a`;
/// objective `sum t`. At the optimum t equals |a - q(x)|.
pub fn build_dmt(n: usize, usable: &UsableQueries) -> LpProblem {
    build_l1(n, usable, None)
}

/// As [`build_dmt`] with each residual magnitude capped at
/// `cap_multiplier * sigma` via the t variables' upper bounds.
pub fn build_bounded_dmt(
    n: usize,
    usable: &UsableQueries,
    sigma: f64,
    cap_multiplier: f64,
) -> Result<LpProblem, ReconstructError> {
    if !(sigma > 0.0) {
        return Err(ReconstructError::NonPositiveSigma(sigma));
    }
    if !(cap_multiplier > 0.0) {
        return Err(ReconstructError::NonPositiveParameter(
            "cap_multiplier",
            cap_multiplier,
        ));
    }
    Ok(build_l1(n, usable, Some(cap_multiplier * sigma)))
}

fn build_l1(n: usize, usable: &UsableQueries, cap: Option<f64>) -> LpProblem {
    let m = usable.queries.len();
    let mut p = LpProblem::new(n + m);
    for i in 0..n {
        p.set_bounds(i, 0.0, 1.0);
    }
    for k in 0..m {
        p.bounds[n + k] = VarBounds::new(0.0, cap.unwrap_or(f64::INFINITY));
        p.set_objective(n + k, 1.0);
    }
    for (k, (query, &a)) in usable.queries.iter().zip(&usable.answers).enumerate() {
        let base = query_coeffs(query, n);
        let mut le = base.clone();
        le.push((n + k, -1.0));
        p.add_row(le, Relation::Le, a);
        let mut ge = base;
        ge.push((n + k, 1.0));
        p.add_row(ge, Relation::Ge, a);
    }
    p
}

/// Bounded-error feasibility program: x in [0,1]^n only, zero objective,
/// and `|a - q(x)| <= bound` as a two-sided pair of rows per query.
///
/// The bound is applied to both sides even though the transmitted form of
/// the program writes only the upper side; a one-sided bound would make the
/// feasibility question nearly vacuous.
pub fn build_dini(
    n: usize,
    usable: &UsableQueries,
    error_bound_multiplier: f64,
    sigma: f64,
) -> Result<LpProblem, ReconstructError> {
    if !(sigma > 0.0) {
        return Err(ReconstructError::NonPositiveSigma(sigma));
    }
    if !(error_bound_multiplier > 0.0) {
        return Err(ReconstructError::NonPositiveParameter(
            "error_bound_multiplier",
            error_bound_multiplier,
        ));
    }
    let bound = error_bound_multiplier * sigma;
    let mut p = LpProblem::new(n);
    for i in 0..n {
        p.set_bounds(i, 0.0, 1.0);
    }
    for (query, &a) in usable.queries.iter().zip(&usable.answers) {
        let coeffs = query_coeffs(query, n);
        p.add_row(coeffs.clone(), Relation::Le, a + bound);
        p.add_row(coeffs, Relation::Ge, a - bound);
    }
    Ok(p)
}

/// Round fractional values to bits: 1 iff >= 0.5 (ties go up).
pub fn round_bits(fractional: &[f64]) -> Vec<bool> {
    fractional.iter().map(|&v| v >= 0.5).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    /// Fraction of positions reconstructed correctly.
    pub accuracy: f64,
    /// 0 -> 1 mistakes among truth-0 positions.
    pub false_positives: usize,
    /// 1 -> 0 mistakes among truth-1 positions.
    pub false_negatives: usize,
}

pub fn score(bits: &[bool], truth: &[bool]) -> Result<Score, ReconstructError> {
    if bits.len() != truth.len() {
        return Err(ReconstructError::LengthMismatch(bits.len(), truth.len()));
    }
    let mut correct = 0usize;
    let mut false_positives = 0usize;
    let mut false_negatives = 0usize;
    for (&b, &t) in bits.iter().zip(truth) {
        if b == t {
            correct += 1;
        } else if b {
            false_positives += 1;
        } else {
            false_negatives += 1;
        }
    }
    Ok(Score {
        accuracy: correct as f64 / bits.len() as f64,
        false_positives,
        false_negatives,
    })
}

/// Everything produced by one attack run.
#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub method: Method,
    /// Candidate database in [0,1]^n; empty when the program was infeasible.
    pub fractional: Vec<f64>,
    /// Rounded bits; absent when the program was infeasible.
    pub bits: Option<Vec<bool>>,
    /// Residual a_q - q(x') per usable query, in usable order.
    pub residuals: Vec<f64>,
    pub objective_value: f64,
    pub feasible: bool,
    /// Accuracy and error counts against the supplied ground truth.
    pub score: Option<Score>,
    pub queries_used: usize,
    pub queries_suppressed: usize,
    pub lp_iterations: usize,
    pub solve_ms: u64,
}

impl ReconstructionResult {
    pub fn accuracy(&self) -> Option<f64> {
        self.score.map(|s| s.accuracy)
    }
}

/// Run one attack against pre-materialized queries and known truth bits.
///
/// Answers are generated by the oracle under `seed`, suppressed answers are
/// dropped, the requested program is built and solved, and the rounded bits
/// are scored against the truth.
pub fn reconstruct_prepared(
    family: &MaterializedFamily,
    truth: &[bool],
    noise: &NoiseModel,
    method: Method,
    seed: u64,
    tol: &Tolerances,
) -> Result<ReconstructionResult, ReconstructError> {
    let answers = oracle::answer_all_materialized(family, truth, noise, seed)?;
    reconstruct_answered(family, &answers, Some(truth), noise, method, tol)
}

/// The same pipeline starting from an existing answer set. `truth` is only
/// used for scoring and the optimality sanity check.
pub fn reconstruct_answered(
    family: &MaterializedFamily,
    answers: &AnswerSet,
    truth: Option<&[bool]>,
    noise: &NoiseModel,
    method: Method,
    tol: &Tolerances,
) -> Result<ReconstructionResult, ReconstructError> {
    let n = family.n;
    let usable = usable_queries(family, answers)?;
    let problem = match method {
        Method::Dmt => build_dmt(n, &usable),
        Method::DiNi {
            error_bound_multiplier,
        } => build_dini(n, &usable, error_bound_multiplier, noise.sigma)?,
        Method::BoundedDmt { cap_multiplier } => {
            build_bounded_dmt(n, &usable, noise.sigma, cap_multiplier)?
        }
    };
    let started = Instant::now();
    let solution = lp::solve(&problem, tol)?;
    let solve_ms = started.elapsed().as_millis() as u64;

    let feasible = matches!(solution.status, LpStatus::Optimal | LpStatus::Feasible);
    let (fractional, bits, residuals) = if feasible {
        let assignment = solution.assignment.as_ref().expect("feasible has assignment");
        debug_assert!(lp::verify(&problem, &solution, tol), "solver contract");
        let fractional: Vec<f64> = assignment[..n].to_vec();
        let residuals: Vec<f64> = usable
            .queries
            .iter()
            .zip(&usable.answers)
            .map(|(q, &a)| {
                let qx: f64 = query_coeffs(q, n)
                    .iter()
                    .map(|&(i, c)| c * fractional[i])
                    .sum();
                a - qx
            })
            .collect();
        let bits = round_bits(&fractional);
        (fractional, Some(bits), residuals)
    } else {
        (Vec::new(), None, Vec::new())
    };

    // The true database is always feasible for the plain least-absolute-
    // error program, so the optimum can never exceed its objective.
    if let (Method::Dmt, Some(truth), true) = (method, truth, feasible) {
        let truth_objective: f64 = usable
            .queries
            .iter()
            .zip(&usable.answers)
            .map(|(q, &a)| {
                let members = q.members.iter().filter(|&&pos| truth[pos]).count() as f64;
                let qx = if q.signed {
                    let ones = truth.iter().filter(|&&b| b).count() as f64;
                    2.0 * members - ones
                } else {
                    members
                };
                (a - qx).abs()
            })
            .sum();
        assert!(
            solution.objective_value <= truth_objective + 1e-6,
            "optimum {} exceeds the truth objective {}",
            solution.objective_value,
            truth_objective
        );
    }

    let score = match (&bits, truth) {
        (Some(bits), Some(truth)) => Some(score(bits, truth)?),
        _ => None,
    };

    Ok(ReconstructionResult {
        method,
        fractional,
        bits,
        residuals,
        objective_value: solution.objective_value,
        feasible,
        score,
        queries_used: usable.queries.len(),
        queries_suppressed: usable.suppressed,
        lp_iterations: solution.iterations,
        solve_ms,
    })
}

/// Full pipeline against a dataset.
pub fn reconstruct_dataset(
    dataset: &Dataset,
    family: &QueryFamily,
    noise: &NoiseModel,
    method: Method,
    seed: u64,
    tol: &Tolerances,
) -> Result<ReconstructionResult, ReconstructError> {
    let ids = dataset.ids();
    let mat = querygen::materialize_family(family, &ids)?;
    reconstruct_prepared(&mat, &dataset.bits(), noise, method, seed, tol)
}

/// Full pipeline against a presence instance: the same program over the
/// candidate universe, scored against the presence flags.
pub fn reconstruct_presence(
    instance: &PresenceInstance,
    family: &QueryFamily,
    noise: &NoiseModel,
    method: Method,
    seed: u64,
    tol: &Tolerances,
) -> Result<ReconstructionResult, ReconstructError> {
    let mat = querygen::materialize_family(family, instance.candidate_ids())?;
    reconstruct_prepared(&mat, instance.present(), noise, method, seed, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::querygen::random_subset_family;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn mk_usable(queries: Vec<MaterializedQuery>, answers: Vec<f64>) -> (MaterializedFamily, AnswerSet) {
        let n = queries
            .iter()
            .flat_map(|q| q.members.iter())
            .max()
            .map_or(1, |&m| m + 1);
        let family = MaterializedFamily { queries, n };
        let set = AnswerSet {
            answers: answers
                .iter()
                .map(|&v| crate::oracle::Answer {
                    response: crate::oracle::Response::Value(v),
                    true_count: v as i64,
                })
                .collect(),
            noise: NoiseModel::noiseless(),
            seed: 0,
        };
        (family, set)
    }

    fn subset(members: Vec<usize>) -> MaterializedQuery {
        MaterializedQuery {
            members,
            signed: false,
        }
    }

    #[test]
    fn dmt_consistent_single_query() {
        let (family, answers) = mk_usable(vec![subset(vec![0])], vec![1.0]);
        let usable = usable_queries(&family, &answers).unwrap();
        let p = build_dmt(1, &usable);
        let s = lp::solve(&p, &tol()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.objective_value.abs() < 1e-9);
        assert!((s.assignment.unwrap()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dmt_optimum_matches_grid_search() {
        // queries {0}, {1}, {0,1} with answers 1, 0, 2: optimum total
        // absolute error is 1 (e.g. x = (1, 0))
        let (family, answers) = mk_usable(
            vec![subset(vec![0]), subset(vec![1]), subset(vec![0, 1])],
            vec![1.0, 0.0, 2.0],
        );
        let usable = usable_queries(&family, &answers).unwrap();
        let p = build_dmt(2, &usable);
        let s = lp::solve(&p, &tol()).unwrap();

        // brute-force oracle over a fine grid of the unit square
        let mut grid_min = f64::INFINITY;
        for i in 0..=100 {
            for j in 0..=100 {
                let (x0, x1) = (i as f64 / 100.0, j as f64 / 100.0);
                let obj = (1.0 - x0).abs() + (0.0 - x1).abs() + (2.0 - x0 - x1).abs();
                grid_min = grid_min.min(obj);
            }
        }
        assert!((grid_min - 1.0).abs() < 1e-12);
        assert!((s.objective_value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dmt_row_count_is_twice_usable_queries() {
        let (family, mut answers) = mk_usable(
            vec![subset(vec![0]), subset(vec![1]), subset(vec![0, 1])],
            vec![1.0, 0.0, 2.0],
        );
        answers.answers[1] = crate::oracle::Answer {
            response: crate::oracle::Response::Suppressed,
            true_count: 0,
        };
        let usable = usable_queries(&family, &answers).unwrap();
        assert_eq!(usable.suppressed, 1);
        let p = build_dmt(2, &usable);
        assert_eq!(p.rows.len(), 2 * usable.queries.len());
        assert_eq!(p.num_vars, 2 + 2);
    }

    #[test]
    fn all_suppressed_is_an_error() {
        let (family, mut answers) = mk_usable(vec![subset(vec![0])], vec![1.0]);
        answers.answers[0] = crate::oracle::Answer {
            response: crate::oracle::Response::Suppressed,
            true_count: 1,
        };
        assert!(matches!(
            usable_queries(&family, &answers),
            Err(ReconstructError::NoUsableQueries)
        ));
    }

    #[test]
    fn dini_trivial_and_forced_cases() {
        // single query, answer 0, bound 1, n=1: x = 0 works
        let (family, answers) = mk_usable(vec![subset(vec![0])], vec![0.0]);
        let usable = usable_queries(&family, &answers).unwrap();
        let p = build_dini(1, &usable, 1.0, 1.0).unwrap();
        let s = lp::solve(&p, &tol()).unwrap();
        assert_eq!(s.status, LpStatus::Feasible);

        // answer 3 with bound 1 forces |3 - x| <= 1 with x in [0,1]: impossible
        let (family, answers) = mk_usable(vec![subset(vec![0])], vec![3.0]);
        let usable = usable_queries(&family, &answers).unwrap();
        let p = build_dini(1, &usable, 1.0, 1.0).unwrap();
        let s = lp::solve(&p, &tol()).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn dini_requires_positive_sigma() {
        let (family, answers) = mk_usable(vec![subset(vec![0])], vec![0.0]);
        let usable = usable_queries(&family, &answers).unwrap();
        assert!(matches!(
            build_dini(1, &usable, 2.0, 0.0),
            Err(ReconstructError::NonPositiveSigma(_))
        ));
    }

    #[test]
    fn bounded_dmt_with_inactive_cap_equals_dmt() {
        let (family, answers) = mk_usable(
            vec![subset(vec![0]), subset(vec![1]), subset(vec![0, 1])],
            vec![1.0, 0.0, 2.0],
        );
        let usable = usable_queries(&family, &answers).unwrap();
        let plain = lp::solve(&build_dmt(2, &usable), &tol()).unwrap();
        let capped = lp::solve(
            &build_bounded_dmt(2, &usable, 1.0, 1e6).unwrap(),
            &tol(),
        )
        .unwrap();
        assert!((plain.objective_value - capped.objective_value).abs() < 1e-6);
    }

    #[test]
    fn bounded_dmt_infeasible_under_tight_cap() {
        // answer 3 on a single-variable query with cap 1: residual >= 2
        let (family, answers) = mk_usable(vec![subset(vec![0])], vec![3.0]);
        let usable = usable_queries(&family, &answers).unwrap();
        let p = build_bounded_dmt(1, &usable, 1.0, 1.0).unwrap();
        let s = lp::solve(&p, &tol()).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn rounding_and_ties() {
        assert_eq!(round_bits(&[0.2, 0.8]), vec![false, true]);
        assert_eq!(round_bits(&[0.5]), vec![true]);
    }

    #[test]
    fn score_examples() {
        let s = score(&[true, false], &[true, false]).unwrap();
        assert_eq!(s, Score { accuracy: 1.0, false_positives: 0, false_negatives: 0 });

        let s = score(&[true, false], &[false, true]).unwrap();
        assert_eq!(s.accuracy, 0.0);
        assert_eq!((s.false_positives, s.false_negatives), (1, 1));

        // 12 present / 88 absent with a single missed one
        let mut truth = vec![false; 100];
        for flag in truth.iter_mut().take(12) {
            *flag = true;
        }
        let mut bits = truth.clone();
        bits[3] = false;
        let s = score(&bits, &truth).unwrap();
        assert!((s.accuracy - 0.99).abs() < 1e-12);
        assert_eq!((s.false_positives, s.false_negatives), (0, 1));

        assert!(matches!(
            score(&[true], &[true, false]),
            Err(ReconstructError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn noiseless_pipeline_recovers_exact_bits() {
        // n=8: noiseless subset queries pin the truth; check a spread of
        // truth patterns through the full pipeline
        let family = random_subset_family(8, 40, 77).unwrap();
        let ids: Vec<u64> = (1..=8).collect();
        let mat = querygen::materialize_family(&family, &ids).unwrap();
        for pattern in [0usize, 1, 37, 128, 170, 255] {
            let truth: Vec<bool> = (0..8).map(|i| pattern >> i & 1 == 1).collect();
            let r = reconstruct_prepared(
                &mat,
                &truth,
                &NoiseModel::noiseless(),
                Method::Dmt,
                5,
                &tol(),
            )
            .unwrap();
            assert_eq!(r.bits.as_ref().unwrap(), &truth, "pattern {pattern}");
            assert!(r.objective_value.abs() < 1e-7);
            assert_eq!(r.score.unwrap().accuracy, 1.0);
        }
    }

    #[test]
    fn residuals_match_answers_minus_counts() {
        let d = crate::dataset::Dataset::synth(30, 0.5, 4).unwrap();
        let family = random_subset_family(30, 60, 5).unwrap();
        let r = reconstruct_dataset(
            &d,
            &family,
            &NoiseModel::gaussian(2.0),
            Method::Dmt,
            11,
            &tol(),
        )
        .unwrap();
        assert_eq!(r.residuals.len(), r.queries_used);
        // objective equals the sum of absolute residuals at the optimum
        let sum_abs: f64 = r.residuals.iter().map(|e| e.abs()).sum();
        assert!((sum_abs - r.objective_value).abs() < 1e-5);
    }

    #[test]
    fn signed_queries_flow_through_the_pipeline() {
        let d = crate::dataset::Dataset::synth(20, 0.5, 6).unwrap();
        let family = random_subset_family(20, 60, 7).unwrap().into_signed();
        let r = reconstruct_dataset(
            &d,
            &family,
            &NoiseModel::noiseless(),
            Method::Dmt,
            3,
            &tol(),
        )
        .unwrap();
        assert_eq!(r.score.unwrap().accuracy, 1.0);
    }

    #[test]
    fn presence_pipeline_scores_against_membership() {
        let d = crate::dataset::Dataset::synth(500, 1.0, 1).unwrap();
        let restricted = d.restrict(100, 150).unwrap();
        let instance = restricted.presence_span(90, 80).unwrap();
        let family = random_subset_family(80, 300, 9).unwrap();
        let r = reconstruct_presence(
            &instance,
            &family,
            &NoiseModel::noiseless(),
            Method::Dmt,
            13,
            &tol(),
        )
        .unwrap();
        assert_eq!(r.score.unwrap().accuracy, 1.0);
    }
}
