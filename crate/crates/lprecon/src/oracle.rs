//! The noisy counting oracle being attacked.
//!
//! Answers a counting query with the exact count plus zero-mean Gaussian
//! noise rounded to the nearest integer, and optionally refuses queries
//! whose true count falls below a suppression threshold. Each query draws
//! its noise from a substream keyed by (seed, query index), so an answer
//! set is independent of evaluation order and safe to produce in parallel.

use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::querygen::{self, MaterializedFamily, MaterializedQuery, QueryError, QueryFamily, QuerySpec};
use crate::seed;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("query {index}: {source}")]
    Query {
        index: usize,
        #[source]
        source: QueryError,
    },
    #[error("noise standard deviation must be finite and >= 0, got {0}")]
    BadSigma(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Gaussian noise of standard deviation `sigma` (in counts), rounded to the
/// nearest integer, with optional low-count suppression below `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub round_to_integer: bool,
    pub suppress_below: Option<i64>,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        NoiseModel {
            sigma,
            round_to_integer: true,
            suppress_below: None,
        }
    }

    pub fn noiseless() -> Self {
        Self::gaussian(0.0)
    }

    /// Default suppression threshold: counts below 4 are refused.
    pub const DEFAULT_SUPPRESSION: i64 = 4;

    pub fn with_suppression(mut self, threshold: i64) -> Self {
        self.suppress_below = Some(threshold);
        self
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(OracleError::BadSigma(self.sigma));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Response {
    /// The noisy count. Integer-valued whenever rounding is on.
    Value(f64),
    /// Refused: the true count fell below the suppression threshold.
    Suppressed,
}

impl Response {
    pub fn value(&self) -> Option<f64> {
        match self {
            Response::Value(v) => Some(*v),
            Response::Suppressed => None,
        }
    }

    pub fn is_suppressed(&self) -> bool {
        matches!(self, Response::Suppressed)
    }
}

/// One answer. `true_count` is retained for analysis and never fed to the
/// reconstruction path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Answer {
    pub response: Response,
    pub true_count: i64,
}

/// Answers in family order, one per query.
#[derive(Clone, Debug)]
pub struct AnswerSet {
    pub answers: Vec<Answer>,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl AnswerSet {
    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn suppressed_count(&self) -> usize {
        self.answers.iter().filter(|a| a.response.is_suppressed()).count()
    }

    /// Export as CSV (query_index, status, value[, true_count]); the true
    /// counts are only written when explicitly requested.
    pub fn write_csv(&self, path: impl AsRef<Path>, expose_truth: bool) -> Result<(), OracleError> {
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(OracleError::Csv)?;
        if expose_truth {
            w.write_record(["query_index", "status", "value", "true_count"])?;
        } else {
            w.write_record(["query_index", "status", "value"])?;
        }
        for (i, a) in self.answers.iter().enumerate() {
            let (status, value) = match a.response {
                Response::Value(v) => ("value", v.to_string()),
                Response::Suppressed => ("suppressed", String::new()),
            };
            if expose_truth {
                w.write_record([i.to_string(), status.to_string(), value, a.true_count.to_string()])?;
            } else {
                w.write_record([i.to_string(), status.to_string(), value])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// One standard normal draw via the Box-Muller transform, consuming exactly
/// two uniforms: z = sqrt(-2 ln(1-u1)) * cos(2 pi u2).
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn true_value(query: &MaterializedQuery, bits: &[bool]) -> i64 {
    let members: i64 = query.members.iter().filter(|&&pos| bits[pos]).count() as i64;
    if query.signed {
        let total: i64 = bits.iter().filter(|&&b| b).count() as i64;
        // sum over members minus sum over non-members
        2 * members - total
    } else {
        members
    }
}

/// Answer one materialized query. Suppression applies to plain subset
/// semantics only; ±1 queries are never suppressed.
pub fn answer_materialized(query: &MaterializedQuery, bits: &[bool], noise: &NoiseModel, rng: &mut impl Rng) -> Answer {
    let true_count = true_value(query, bits);
    let suppressed = !query.signed
        && noise
            .suppress_below
            .map(|t| true_count < t)
            .unwrap_or(false);
    if suppressed {
        return Answer {
            response: Response::Suppressed,
            true_count,
        };
    }
    let mut noise_term = noise.sigma * standard_normal(rng);
    if noise.round_to_integer {
        noise_term = noise_term.round();
    }
    Answer {
        response: Response::Value(true_count as f64 + noise_term),
        true_count,
    }
}

/// Answer a single query spec against a dataset, drawing noise from the
/// substream for `query_index` under `seed`.
pub fn answer(
    dataset: &Dataset,
    spec: &QuerySpec,
    noise: &NoiseModel,
    seed: u64,
    query_index: usize,
) -> Result<Answer, OracleError> {
    noise.validate()?;
    let ids = dataset.ids();
    let mat = querygen::materialize(spec, &ids).map_err(|source| OracleError::Query {
        index: query_index,
        source,
    })?;
    let mut rng = seed::rng_from(seed::substream(seed, query_index as u64));
    Ok(answer_materialized(&mat, &dataset.bits(), noise, &mut rng))
}

/// Answer every query of a materialized family over the given truth bits.
pub fn answer_all_materialized(
    family: &MaterializedFamily,
    bits: &[bool],
    noise: &NoiseModel,
    seed: u64,
) -> Result<AnswerSet, OracleError> {
    noise.validate()?;
    let answers = family
        .queries
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let mut rng = seed::rng_from(seed::substream(seed, k as u64));
            answer_materialized(q, bits, noise, &mut rng)
        })
        .collect();
    Ok(AnswerSet {
        answers,
        noise: *noise,
        seed,
    })
}

/// Materialize and answer a whole family against a dataset.
pub fn answer_all(
    dataset: &Dataset,
    family: &QueryFamily,
    noise: &NoiseModel,
    seed: u64,
) -> Result<AnswerSet, OracleError> {
    let ids = dataset.ids();
    let mat = querygen::materialize_family(family, &ids)
        .map_err(|source| OracleError::Query { index: 0, source })?;
    answer_all_materialized(&mat, &dataset.bits(), noise, seed)
}
