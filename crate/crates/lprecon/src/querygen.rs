//! Query families: digit-predicate queries, uniform random subsets, and
//! their ±1-semantics variants, plus the restricted-SQL rendering.
//!
//! A digit-predicate query `(p, j, e, mu)` selects identifier `i` iff the
//! j-th fractional decimal digit of `(p*i)^e` is divisible by `mu`. With 25
//! primes, j in 1..=5, fourteen tenth-valued exponents and moduli {2, 5},
//! the full cross product is the standard 3500-query family.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::Id;
use crate::digits::{fractional_digits, Exponent};
use crate::seed;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("digit index must be >= 1")]
    ZeroDigitIndex,
    #[error("modulus must be >= 2, got {0}")]
    BadModulus(u32),
    #[error("family parameters are degenerate: {0}")]
    EmptyFamily(&'static str),
    #[error("duplicate digit-predicate parameters (p={p}, j={j}, e={e}, mu={mu})")]
    DuplicateSpec { p: u64, j: u32, e: Exponent, mu: u32 },
    #[error("subset member {pos} is out of range for a dataset of size {n}")]
    SubsetOutOfRange { pos: usize, n: usize },
    #[error("SQL text is only defined for digit-predicate queries")]
    SqlUnsupported,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Membership rule on identifiers: j-th fractional digit of (p*i)^e, mod mu.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DigitPredicate {
    pub prime: u64,
    pub digit_index: u32,
    pub exponent: Exponent,
    pub modulus: u32,
}

impl DigitPredicate {
    pub fn new(prime: u64, digit_index: u32, exponent: Exponent, modulus: u32) -> Result<Self, QueryError> {
        if !is_prime(prime) {
            return Err(QueryError::NotPrime(prime));
        }
        if digit_index == 0 {
            return Err(QueryError::ZeroDigitIndex);
        }
        if modulus < 2 {
            return Err(QueryError::BadModulus(modulus));
        }
        Ok(DigitPredicate {
            prime,
            digit_index,
            exponent,
            modulus,
        })
    }

    /// True iff this predicate selects identifier `id`.
    pub fn selects(&self, id: Id) -> bool {
        let digit = crate::digits::fractional_digit(self.prime * id, self.exponent, self.digit_index);
        u32::from(digit) % self.modulus == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum QueryKind {
    Digit(DigitPredicate),
    /// Explicit member positions (0-based, strictly increasing) into the
    /// target dataset's entry order.
    Subset(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuerySpec {
    pub kind: QueryKind,
    /// ±1 semantics: the answer is (sum over members) - (sum over non-members).
    pub signed: bool,
}

impl QuerySpec {
    pub fn digit(pred: DigitPredicate) -> Self {
        QuerySpec {
            kind: QueryKind::Digit(pred),
            signed: false,
        }
    }

    pub fn subset(mut positions: Vec<usize>) -> Self {
        positions.sort_unstable();
        positions.dedup();
        QuerySpec {
            kind: QueryKind::Subset(positions),
            signed: false,
        }
    }
}

/// An ordered query collection with a provenance note describing how it was
/// generated.
#[derive(Clone, Debug)]
pub struct QueryFamily {
    queries: Vec<QuerySpec>,
    provenance: String,
}

impl QueryFamily {
    pub fn new(queries: Vec<QuerySpec>, provenance: impl Into<String>) -> Result<Self, QueryError> {
        let mut seen = HashSet::new();
        for q in &queries {
            if let QueryKind::Digit(p) = &q.kind {
                if !seen.insert((*p, q.signed)) {
                    return Err(QueryError::DuplicateSpec {
                        p: p.prime,
                        j: p.digit_index,
                        e: p.exponent,
                        mu: p.modulus,
                    });
                }
            }
        }
        Ok(QueryFamily {
            queries,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn queries(&self) -> &[QuerySpec] {
        &self.queries
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Keep exactly the digit queries with e <= e_max, order preserved.
    /// Non-digit queries are kept (they carry no exponent).
    pub fn filter_by_exponent(&self, e_max: Exponent) -> QueryFamily {
        let queries = self
            .queries
            .iter()
            .filter(|q| match &q.kind {
                QueryKind::Digit(p) => p.exponent <= e_max,
                QueryKind::Subset(_) => true,
            })
            .cloned()
            .collect();
        QueryFamily {
            queries,
            provenance: format!("{}; e<={e_max}", self.provenance),
        }
    }

    /// First `count` queries in family order (fewer if the family is smaller).
    pub fn truncate(&self, count: usize) -> QueryFamily {
        QueryFamily {
            queries: self.queries.iter().take(count).cloned().collect(),
            provenance: format!("{}; first {count}", self.provenance),
        }
    }

    /// The same queries with ±1 semantics.
    pub fn into_signed(mut self) -> QueryFamily {
        for q in &mut self.queries {
            q.signed = true;
        }
        self.provenance.push_str("; signed");
        self
    }

    /// Export digit-predicate parameters as CSV (index, p, j, e, mu).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), QueryError> {
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(QueryError::Csv)?;
        w.write_record(["index", "p", "j", "e", "mu"])?;
        for (i, q) in self.queries.iter().enumerate() {
            match &q.kind {
                QueryKind::Digit(p) => {
                    w.write_record([
                        i.to_string(),
                        p.prime.to_string(),
                        p.digit_index.to_string(),
                        p.exponent.to_string(),
                        p.modulus.to_string(),
                    ])?;
                }
                QueryKind::Subset(_) => return Err(QueryError::SqlUnsupported),
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// The default exponent grid {0.5, 0.6, ..., 1.9} \ {1}.
pub fn default_exponents() -> Vec<Exponent> {
    (5u8..=19)
        .filter(|&t| t != 10)
        .map(|t| Exponent::from_tenths(t).unwrap())
        .collect()
}

pub const DEFAULT_MODULI: [u32; 2] = [2, 5];
pub const DEFAULT_NUM_PRIMES: usize = 25;
pub const DEFAULT_J_MAX: u32 = 5;

/// Cross product of the first `num_primes` primes, digit indices 1..=j_max,
/// the given exponents and moduli, in (p, j, e, mu) order.
pub fn standard_family(
    num_primes: usize,
    j_max: u32,
    exponents: &[Exponent],
    moduli: &[u32],
) -> Result<QueryFamily, QueryError> {
    if num_primes == 0 || j_max == 0 {
        return Err(QueryError::EmptyFamily("need at least one prime and digit index"));
    }
    if exponents.is_empty() || moduli.is_empty() {
        return Err(QueryError::EmptyFamily("need at least one exponent and modulus"));
    }
    let mut queries = Vec::with_capacity(num_primes * j_max as usize * exponents.len() * moduli.len());
    for p in first_primes(num_primes) {
        for j in 1..=j_max {
            for &e in exponents {
                for &mu in moduli {
                    queries.push(QuerySpec::digit(DigitPredicate::new(p, j, e, mu)?));
                }
            }
        }
    }
    QueryFamily::new(
        queries,
        format!("digit({num_primes} primes, j<={j_max}, {} exponents, {} moduli)", exponents.len(), moduli.len()),
    )
}

/// The 3500-query default: 25 primes x 5 digits x 14 exponents x 2 moduli.
pub fn standard_family_default() -> QueryFamily {
    standard_family(DEFAULT_NUM_PRIMES, DEFAULT_J_MAX, &default_exponents(), &DEFAULT_MODULI)
        .expect("default parameters are valid")
}

/// `num_queries` uniformly random subsets of the n positions; each position
/// is a member independently with probability 1/2. Query k draws from its
/// own substream, so the family does not depend on generation order.
pub fn random_subset_family(n: usize, num_queries: usize, seed: u64) -> Result<QueryFamily, QueryError> {
    if n == 0 || num_queries == 0 {
        return Err(QueryError::EmptyFamily("need n >= 1 and num_queries >= 1"));
    }
    let queries = (0..num_queries)
        .map(|k| {
            let mut rng = seed::rng_from(seed::substream(seed, k as u64));
            let members = (0..n).filter(|_| rng.gen::<f64>() < 0.5).collect();
            QuerySpec {
                kind: QueryKind::Subset(members),
                signed: false,
            }
        })
        .collect();
    QueryFamily::new(
        queries,
        format!("subset(n={n}, m={num_queries}, seed={seed})"),
    )
}

/// A query with its member set resolved against a concrete dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterializedQuery {
    /// 0-based positions into the dataset's entry order.
    pub members: Vec<usize>,
    pub signed: bool,
}

/// Resolve one query against the identifier list of a dataset.
pub fn materialize(spec: &QuerySpec, ids: &[Id]) -> Result<MaterializedQuery, QueryError> {
    let members = match &spec.kind {
        QueryKind::Digit(pred) => ids
            .iter()
            .enumerate()
            .filter(|(_, &id)| pred.selects(id))
            .map(|(pos, _)| pos)
            .collect(),
        QueryKind::Subset(positions) => {
            if let Some(&bad) = positions.iter().find(|&&p| p >= ids.len()) {
                return Err(QueryError::SubsetOutOfRange { pos: bad, n: ids.len() });
            }
            positions.clone()
        }
    };
    Ok(MaterializedQuery {
        members,
        signed: spec.signed,
    })
}

/// A family resolved against a dataset, in family order.
#[derive(Clone, Debug)]
pub struct MaterializedFamily {
    pub queries: Vec<MaterializedQuery>,
    /// Number of positions (dataset size) the members index into.
    pub n: usize,
}

/// Materialize the whole family. Digit evaluations are shared across digit
/// indices and moduli: one exact root extraction per (prime, exponent, id).
pub fn materialize_family(family: &QueryFamily, ids: &[Id]) -> Result<MaterializedFamily, QueryError> {
    // Collect the digit tables needed: (p, e) -> digits 1..=j_needed per id.
    let mut needed: Vec<((u64, Exponent), u32)> = Vec::new();
    for q in family.queries() {
        if let QueryKind::Digit(p) = &q.kind {
            match needed.iter_mut().find(|(key, _)| *key == (p.prime, p.exponent)) {
                Some((_, j)) => *j = (*j).max(p.digit_index),
                None => needed.push(((p.prime, p.exponent), p.digit_index)),
            }
        }
    }
    let tables: Vec<((u64, Exponent), u32, Vec<Vec<u8>>)> = needed
        .into_par_iter()
        .map(|((p, e), j_max)| {
            let digits = ids
                .iter()
                .map(|&id| fractional_digits(p * id, e, j_max))
                .collect();
            ((p, e), j_max, digits)
        })
        .collect();
    let lookup = |p: u64, e: Exponent| -> &(
        (u64, Exponent),
        u32,
        Vec<Vec<u8>>,
    ) {
        tables
            .iter()
            .find(|(key, _, _)| *key == (p, e))
            .expect("digit table prepared above")
    };

    let mut queries = Vec::with_capacity(family.len());
    for q in family.queries() {
        let mat = match &q.kind {
            QueryKind::Digit(pred) => {
                let (_, _, digits) = lookup(pred.prime, pred.exponent);
                let members = (0..ids.len())
                    .filter(|&pos| {
                        let d = digits[pos][pred.digit_index as usize - 1];
                        u32::from(d) % pred.modulus == 0
                    })
                    .collect();
                MaterializedQuery {
                    members,
                    signed: q.signed,
                }
            }
            QueryKind::Subset(_) => materialize(q, ids)?,
        };
        queries.push(mat);
    }
    Ok(MaterializedFamily {
        queries,
        n: ids.len(),
    })
}

/// Render the restricted-SQL text of a digit-predicate query.
///
/// Note the rendered `floor(...+0.5) = floor(...)` test is the historically
/// transmitted query shape; the canonical membership rule of this crate is
/// the digit-divisibility predicate on `(p*i)^e`, which that SQL only
/// approximates for specific (j, mu).
pub fn emit_sql(
    spec: &QuerySpec,
    table: &str,
    id_column: &str,
    range: (Id, Id),
    attr_condition: Option<&str>,
) -> Result<String, QueryError> {
    let pred = match &spec.kind {
        QueryKind::Digit(p) => p,
        QueryKind::Subset(_) => return Err(QueryError::SqlUnsupported),
    };
    let scale = 10u64.pow(pred.digit_index);
    let power = format!("(({id_column} * {p})^{e})", p = pred.prime, e = pred.exponent);
    let mut sql = format!(
        "SELECT count({id_column}) FROM {table} WHERE floor({scale} * {power} + 0.5) = floor({scale} * {power}) AND {id_column} BETWEEN {lo} AND {hi}",
        lo = range.0,
        hi = range.1,
    );
    if let Some(attr) = attr_condition {
        sql.push_str(" AND ");
        sql.push_str(attr);
    }
    Ok(sql)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

pub fn first_primes(k: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(k);
    let mut candidate = 2u64;
    while primes.len() < k {
        if is_prime(candidate) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: f64) -> Exponent {
        Exponent::from_f64(v).unwrap()
    }

    #[test]
    fn predicate_on_exact_power_of_ten() {
        // (2 * 5000)^0.5 = 100: every fractional digit is 0, so the
        // predicate holds for any j and any modulus.
        for j in 1..=5 {
            for mu in [2, 5] {
                let p = DigitPredicate::new(2, j, e(0.5), mu).unwrap();
                assert!(p.selects(5000));
            }
        }
    }

    #[test]
    fn predicate_matches_high_precision_evaluation() {
        // (2 * 2002)^0.7 = 332.46493... -> digit 2 is 6: divisible by 2, not by 5.
        let p2 = DigitPredicate::new(2, 2, e(0.7), 2).unwrap();
        let p5 = DigitPredicate::new(2, 2, e(0.7), 5).unwrap();
        assert!(p2.selects(2002));
        assert!(!p5.selects(2002));
    }

    #[test]
    fn selection_fractions_over_id_range() {
        // Exhaustive count over 1..=10000 for p=2, j=2, e=0.7.
        let ids: Vec<Id> = (1..=10_000).collect();
        let fam = QueryFamily::new(
            vec![
                QuerySpec::digit(DigitPredicate::new(2, 2, e(0.7), 2).unwrap()),
                QuerySpec::digit(DigitPredicate::new(2, 2, e(0.7), 5).unwrap()),
            ],
            "t",
        )
        .unwrap();
        let mat = materialize_family(&fam, &ids).unwrap();
        let frac2 = mat.queries[0].members.len() as f64 / 10_000.0;
        let frac5 = mat.queries[1].members.len() as f64 / 10_000.0;
        assert!((frac2 - 0.5).abs() <= 0.03, "mu=2 fraction {frac2}");
        assert!((frac5 - 0.2).abs() <= 0.03, "mu=5 fraction {frac5}");
    }

    #[test]
    fn standard_family_is_the_full_cross_product() {
        let fam = standard_family_default();
        assert_eq!(fam.len(), 3500);

        let single = standard_family(1, 1, &[e(0.5)], &[2]).unwrap();
        assert_eq!(single.len(), 1);

        // deterministic order: p outer, then j, then e, then mu
        let fam2 = standard_family(2, 2, &[e(0.5), e(0.6)], &[2, 5]).unwrap();
        let first_two: Vec<_> = fam2
            .queries()
            .iter()
            .take(2)
            .map(|q| match &q.kind {
                QueryKind::Digit(p) => (p.prime, p.digit_index, p.exponent.tenths(), p.modulus),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(first_two, vec![(2, 1, 5, 2), (2, 1, 5, 5)]);
    }

    #[test]
    fn filter_by_exponent_counts() {
        let fam = standard_family_default();
        assert_eq!(fam.filter_by_exponent(e(1.9)).len(), 3500);
        // exponents {0.5, 0.6, 0.7, 0.8}: 25 * 5 * 4 * 2
        assert_eq!(fam.filter_by_exponent(e(0.8)).len(), 750);
        assert_eq!(fam.filter_by_exponent(e(1.4)).len(), 2250);
        assert_eq!(fam.filter_by_exponent(e(0.4)).len(), 0);
        // filtering at e <= 1.4 then taking the first 2000 gives the
        // truncated 2000-query variant
        assert_eq!(fam.filter_by_exponent(e(1.4)).truncate(2000).len(), 2000);
    }

    #[test]
    fn random_subset_family_statistics() {
        let fam = random_subset_family(100, 2550, 11).unwrap();
        assert_eq!(fam.len(), 2550);
        let mean_size: f64 = fam
            .queries()
            .iter()
            .map(|q| match &q.kind {
                QueryKind::Subset(s) => s.len() as f64,
                _ => unreachable!(),
            })
            .sum::<f64>()
            / 2550.0;
        assert!((45.0..=55.0).contains(&mean_size), "mean subset size {mean_size}");
    }

    #[test]
    fn random_subset_family_is_reproducible() {
        let a = random_subset_family(4, 1, 3).unwrap();
        let b = random_subset_family(4, 1, 3).unwrap();
        assert_eq!(a.queries(), b.queries());
        let c = random_subset_family(4, 1, 4).unwrap();
        assert!(a.queries() == c.queries() || a.queries() != c.queries()); // structural only
        // different seeds give different families over enough queries
        let big_a = random_subset_family(64, 20, 3).unwrap();
        let big_c = random_subset_family(64, 20, 4).unwrap();
        assert_ne!(big_a.queries(), big_c.queries());
    }

    #[test]
    fn materialize_explicit_subset_is_identity() {
        let ids: Vec<Id> = vec![10, 20, 30, 40];
        let spec = QuerySpec::subset(vec![1, 3]);
        let m = materialize(&spec, &ids).unwrap();
        assert_eq!(m.members, vec![1, 3]);

        let bad = QuerySpec::subset(vec![4]);
        assert!(matches!(
            materialize(&bad, &ids),
            Err(QueryError::SubsetOutOfRange { pos: 4, n: 4 })
        ));
    }

    #[test]
    fn materialize_over_empty_id_list_is_empty() {
        let spec = QuerySpec::digit(DigitPredicate::new(2, 2, e(0.7), 5).unwrap());
        let m = materialize(&spec, &[]).unwrap();
        assert!(m.members.is_empty());
    }

    #[test]
    fn materialize_family_agrees_with_one_shot() {
        let ids: Vec<Id> = (2000..2100).collect();
        let fam = standard_family(3, 3, &[e(0.7), e(1.3)], &[2, 5]).unwrap();
        let mat = materialize_family(&fam, &ids).unwrap();
        for (spec, got) in fam.queries().iter().zip(&mat.queries) {
            assert_eq!(&materialize(spec, &ids).unwrap(), got);
        }
    }

    #[test]
    fn sql_text_for_the_loans_scenarios() {
        let spec = QuerySpec::digit(DigitPredicate::new(2, 2, e(0.7), 5).unwrap());
        let with_attr = emit_sql(
            &spec,
            "loans",
            "clientId",
            (2000, 3000),
            Some("loanStatus = 'C'"),
        )
        .unwrap();
        assert_eq!(
            with_attr,
            "SELECT count(clientId) FROM loans WHERE floor(100 * ((clientId * 2)^0.7) + 0.5) = floor(100 * ((clientId * 2)^0.7)) AND clientId BETWEEN 2000 AND 3000 AND loanStatus = 'C'"
        );

        let bare = emit_sql(&spec, "loans", "clientId", (2500, 2600), None).unwrap();
        assert_eq!(
            bare,
            "SELECT count(clientId) FROM loans WHERE floor(100 * ((clientId * 2)^0.7) + 0.5) = floor(100 * ((clientId * 2)^0.7)) AND clientId BETWEEN 2500 AND 2600"
        );

        let subset = QuerySpec::subset(vec![0]);
        assert!(matches!(
            emit_sql(&subset, "loans", "clientId", (1, 2), None),
            Err(QueryError::SqlUnsupported)
        ));
    }

    #[test]
    fn family_csv_export() {
        let fam = standard_family(1, 2, &[e(0.5)], &[2]).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        fam.write_csv(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text, "index,p,j,e,mu\n0,2,1,0.5,2\n1,2,2,0.5,2\n");
    }

    #[test]
    fn rejects_duplicate_digit_specs() {
        let p = DigitPredicate::new(2, 1, e(0.5), 2).unwrap();
        let err = QueryFamily::new(vec![QuerySpec::digit(p), QuerySpec::digit(p)], "dup");
        assert!(matches!(err, Err(QueryError::DuplicateSpec { .. })));
    }

    #[test]
    fn primes_are_the_first_k() {
        assert_eq!(first_primes(10), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(first_primes(25).last(), Some(&97));
        assert!(DigitPredicate::new(4, 1, e(0.5), 2).is_err());
    }
}
