//! Bundled `loans` table stand-in.
//!
//! The original target was a real banking table (827 loans, `clientId`
//! between 2 and 13971, `loanStatus` in 'A'..'D') that cannot be
//! redistributed here. This module generates a synthetic stand-in with the
//! same identifier-range profile, so every scenario that is defined by a
//! `clientId` range reproduces the published entry counts:
//!
//! | range           | entries |
//! |-----------------|---------|
//! | [2000, 3000]    | 73      |
//! | [3000, 5000]    | 110     |
//! | [5000, 7000]    | 130     |
//! | [10000, 12000]  | 142     |
//! | [2500, 2600)    | 12      |
//!
//! The table is fully deterministic; `data/loans.csv` in the repository is a
//! committed copy and a test asserts it matches this generator byte for byte.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Dataset, DatasetError, Entry, Id};
use crate::seed;

const LOANS_SEED: u64 = 0x10A5_5EED;

pub const TABLE_NAME: &str = "loans";
pub const ID_COLUMN: &str = "clientId";
pub const STATUS_COLUMN: &str = "loanStatus";

/// The four attack scenarios defined on this table: id range, target status,
/// and the number of entries the range contains.
pub const SCENARIO_RANGES: [(Id, Id, char, usize); 4] = [
    (2000, 3000, 'C', 73),
    (3000, 5000, 'C', 110),
    (5000, 7000, 'C', 130),
    (10000, 12000, 'A', 142),
];

/// All (clientId, loanStatus) rows, sorted by clientId.
pub fn rows() -> Vec<(Id, char)> {
    let mut rng = seed::rng_from(LOANS_SEED);

    let mut pick = |pool: Vec<Id>, k: usize| -> Vec<Id> {
        debug_assert!(pool.len() >= k);
        pool.choose_multiple(&mut rng, k).copied().collect::<Vec<_>>()
    };

    let mut ids: Vec<Id> = Vec::with_capacity(827);
    // Scenario ranges stay clear of their shared endpoints (2000, 3000, ...)
    // so inclusive restriction cannot double-count across ranges.
    ids.extend(pick((2500..2600).collect(), 12));
    ids.extend(pick((2001..2500).chain(2600..3000).collect(), 61));
    ids.extend(pick((3001..5000).collect(), 110));
    ids.extend(pick((5001..7000).collect(), 130));
    ids.extend(pick((10001..12000).collect(), 142));
    ids.extend(pick((3..2000).chain(7001..10000).chain(12001..13971).collect(), 370));
    ids.push(2);
    ids.push(13971);
    ids.sort_unstable();
    debug_assert_eq!(ids.len(), 827);

    // Status mix roughly matching the public banking data: mostly running
    // loans ('C'), a quarter finished ('A'), small 'B'/'D' tails.
    ids.into_iter()
        .map(|id| {
            let u: f64 = rng.gen();
            let status = if u < 0.30 {
                'A'
            } else if u < 0.345 {
                'B'
            } else if u < 0.935 {
                'C'
            } else {
                'D'
            };
            (id, status)
        })
        .collect()
}

/// The table as a dataset with bit = 1 iff loanStatus equals `target_status`.
pub fn dataset(target_status: char) -> Dataset {
    let entries = rows()
        .into_iter()
        .map(|(id, status)| Entry {
            id,
            bit: status == target_status,
        })
        .collect();
    Dataset::new(TABLE_NAME, entries).expect("bundled loans table is non-empty")
}

/// Write the table as CSV with the canonical column names.
pub fn write_csv(path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([ID_COLUMN, STATUS_COLUMN])?;
    for (id, status) in rows() {
        w.write_record([id.to_string(), status.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
