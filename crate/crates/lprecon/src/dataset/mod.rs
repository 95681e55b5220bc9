//! Attack targets: ordered collections of (identifier, secret bit) pairs.
//!
//! A [`Dataset`] is what the attacker wants to reconstruct: one Boolean
//! attribute per identifier. A [`PresenceInstance`] is the variant where the
//! secret is membership itself: which identifiers of a candidate range exist
//! in the table at all.

pub mod loans;

use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::seed;

pub type Id = u64;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset `{0}` has no entries")]
    Empty(String),
    #[error("header has no column named `{0}`")]
    UnknownColumn(String),
    #[error("row {row}: missing field for column `{column}`")]
    MissingField { row: usize, column: String },
    #[error("row {row}: cannot parse identifier `{value}` as a positive integer")]
    BadIdentifier { row: usize, value: String },
    #[error("row {row}: duplicate identifier {id}")]
    DuplicateIdentifier { row: usize, id: Id },
    #[error("duplicate identifier {0}")]
    DuplicateId(Id),
    #[error("invalid range: lo {lo} > hi {hi}")]
    BadRange { lo: Id, hi: Id },
    #[error("range [{lo}, {hi}] selects no entries")]
    EmptyRestriction { lo: Id, hi: Id },
    #[error("candidate range is empty")]
    EmptyCandidates,
    #[error("need n >= 1 entries")]
    ZeroSize,
    #[error("rho must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Entry {
    pub id: Id,
    pub bit: bool,
}

/// Identifiers strictly increasing, at least one entry, bits are the secret.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    name: String,
    entries: Vec<Entry>,
}

impl Dataset {
    /// Build from arbitrary-order entries; sorts by identifier and rejects
    /// duplicates and emptiness.
    pub fn new(name: impl Into<String>, mut entries: Vec<Entry>) -> Result<Self, DatasetError> {
        let name = name.into();
        if entries.is_empty() {
            return Err(DatasetError::Empty(name));
        }
        entries.sort_by_key(|e| e.id);
        for pair in entries.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(DatasetError::DuplicateId(pair[0].id));
            }
        }
        Ok(Dataset { name, entries })
    }

    /// Load a CSV with a header row. The bit is 1 iff the attribute column
    /// equals `target_value` (both sides trimmed of surrounding whitespace).
    pub fn load_csv(
        path: impl AsRef<Path>,
        id_column: &str,
        attr_column: &str,
        target_value: &str,
    ) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))
        };
        let id_idx = col(id_column)?;
        let attr_idx = col(attr_column)?;
        let target = target_value.trim();

        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 2; // header is line 1
            let record = record?;
            let id_raw = record.get(id_idx).ok_or_else(|| DatasetError::MissingField {
                row,
                column: id_column.to_string(),
            })?;
            let attr = record.get(attr_idx).ok_or_else(|| DatasetError::MissingField {
                row,
                column: attr_column.to_string(),
            })?;
            let id: Id = id_raw
                .trim()
                .parse()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| DatasetError::BadIdentifier {
                    row,
                    value: id_raw.to_string(),
                })?;
            if !seen.insert(id) {
                return Err(DatasetError::DuplicateIdentifier { row, id });
            }
            entries.push(Entry {
                id,
                bit: attr.trim() == target,
            });
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "csv".to_string());
        Dataset::new(name, entries)
    }

    /// Synthesize identifiers 1..=n with independent Bernoulli(rho) bits.
    pub fn synth(n: usize, rho: f64, seed: u64) -> Result<Self, DatasetError> {
        if n == 0 {
            return Err(DatasetError::ZeroSize);
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(DatasetError::BadProbability(rho));
        }
        let mut rng = seed::rng_from(seed);
        let entries = (1..=n as Id)
            .map(|id| Entry {
                id,
                bit: rng.gen::<f64>() < rho,
            })
            .collect();
        Dataset::new(format!("synth(n={n},rho={rho},seed={seed})"), entries)
    }

    /// Keep entries with lo <= id <= hi. An empty result is an error: there
    /// would be nothing to attack.
    pub fn restrict(&self, lo: Id, hi: Id) -> Result<Self, DatasetError> {
        if lo > hi {
            return Err(DatasetError::BadRange { lo, hi });
        }
        let entries: Vec<Entry> = self
            .entries
            .iter()
            .filter(|e| (lo..=hi).contains(&e.id))
            .copied()
            .collect();
        if entries.is_empty() {
            return Err(DatasetError::EmptyRestriction { lo, hi });
        }
        Dataset::new(format!("{}[{lo},{hi}]", self.name), entries)
    }

    pub fn presence_instance(
        &self,
        lo: Id,
        hi: Id,
        kind: RangeKind,
    ) -> Result<PresenceInstance, DatasetError> {
        if lo > hi {
            return Err(DatasetError::BadRange { lo, hi });
        }
        let candidate_ids: Vec<Id> = match kind {
            RangeKind::Inclusive => (lo..=hi).collect(),
            RangeKind::HalfOpen => (lo..hi).collect(),
        };
        if candidate_ids.is_empty() {
            return Err(DatasetError::EmptyCandidates);
        }
        let present = candidate_ids
            .iter()
            .map(|id| self.entries.binary_search_by_key(id, |e| e.id).is_ok())
            .collect();
        Ok(PresenceInstance {
            name: format!("{} presence {kind:?} [{lo},{hi}]", self.name),
            candidate_ids,
            present,
        })
    }

    /// Half-open presence window `[lo, lo+width)`, the convention that makes
    /// a width-100 window hold exactly 100 candidates.
    pub fn presence_span(&self, lo: Id, width: u64) -> Result<PresenceInstance, DatasetError> {
        if width == 0 {
            return Err(DatasetError::EmptyCandidates);
        }
        self.presence_instance(lo, lo + width, RangeKind::HalfOpen)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn ids(&self) -> Vec<Id> {
        self.entries.iter().map(|e| e.id).collect()
    }

    pub fn bits(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.bit).collect()
    }

    pub fn ones(&self) -> usize {
        self.entries.iter().filter(|e| e.bit).count()
    }

    /// Write as a two-column CSV (`id,bit`) loadable via
    /// `load_csv(path, "id", "bit", "1")`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["id", "bit"])?;
        for e in &self.entries {
            w.write_record([e.id.to_string(), if e.bit { "1" } else { "0" }.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Whether a presence range includes its upper endpoint. Both conventions
/// are exposed because "between a and b" style ranges are ambiguous.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RangeKind {
    Inclusive,
    HalfOpen,
}

/// Membership-inference target: every identifier of a candidate range with a
/// flag for whether it actually occurs in the dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PresenceInstance {
    name: String,
    candidate_ids: Vec<Id>,
    present: Vec<bool>,
}

impl PresenceInstance {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.candidate_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidate_ids.is_empty()
    }

    pub fn candidate_ids(&self) -> &[Id] {
        &self.candidate_ids
    }

    pub fn present(&self) -> &[bool] {
        &self.present
    }

    pub fn present_count(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn load_csv_maps_target_value() {
        let f = tmp_csv("clientId,loanStatus\n2,A\n7,C\n");
        let d = Dataset::load_csv(f.path(), "clientId", "loanStatus", "C").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.entries()[0], Entry { id: 2, bit: false });
        assert_eq!(d.entries()[1], Entry { id: 7, bit: true });
    }

    #[test]
    fn load_csv_sorts_by_identifier() {
        let f = tmp_csv("id,s\n9,C\n2,A\n5,C\n");
        let d = Dataset::load_csv(f.path(), "id", "s", "C").unwrap();
        assert_eq!(d.ids(), vec![2, 5, 9]);
        assert_eq!(d.bits(), vec![false, true, true]);
    }

    #[test]
    fn load_csv_errors_carry_row_numbers() {
        let f = tmp_csv("id,s\n2,A\nx,C\n");
        match Dataset::load_csv(f.path(), "id", "s", "C") {
            Err(DatasetError::BadIdentifier { row, value }) => {
                assert_eq!(row, 3);
                assert_eq!(value, "x");
            }
            other => panic!("expected BadIdentifier, got {other:?}"),
        }

        let f = tmp_csv("id,s\n2,A\n2,C\n");
        match Dataset::load_csv(f.path(), "id", "s", "C") {
            Err(DatasetError::DuplicateIdentifier { row, id }) => {
                assert_eq!((row, id), (3, 2));
            }
            other => panic!("expected DuplicateIdentifier, got {other:?}"),
        }

        let f = tmp_csv("id,s\n2,A\n");
        assert!(matches!(
            Dataset::load_csv(f.path(), "id", "status", "C"),
            Err(DatasetError::UnknownColumn(c)) if c == "status"
        ));

        // identifiers must be positive
        let f = tmp_csv("id,s\n0,A\n");
        assert!(matches!(
            Dataset::load_csv(f.path(), "id", "s", "C"),
            Err(DatasetError::BadIdentifier { row: 2, .. })
        ));
    }

    #[test]
    fn synth_degenerate_probabilities() {
        let zeros = Dataset::synth(5, 0.0, 42).unwrap();
        assert!(zeros.bits().iter().all(|&b| !b));
        let ones = Dataset::synth(5, 1.0, 42).unwrap();
        assert!(ones.bits().iter().all(|&b| b));
        assert_eq!(zeros.ids(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn synth_density_near_rho() {
        let d = Dataset::synth(1000, 0.5, 1).unwrap();
        let frac = d.ones() as f64 / 1000.0;
        assert!((0.45..=0.55).contains(&frac), "fraction of ones {frac}");
    }

    #[test]
    fn synth_is_reproducible() {
        assert_eq!(
            Dataset::synth(200, 0.3, 9).unwrap(),
            Dataset::synth(200, 0.3, 9).unwrap()
        );
        assert_ne!(
            Dataset::synth(200, 0.3, 9).unwrap().bits(),
            Dataset::synth(200, 0.3, 10).unwrap().bits()
        );
    }

    #[test]
    fn restrict_is_inclusive_on_both_ends() {
        let d = Dataset::new(
            "t",
            vec![
                Entry { id: 2, bit: false },
                Entry { id: 7, bit: true },
                Entry { id: 9, bit: true },
            ],
        )
        .unwrap();
        let r = d.restrict(7, 9).unwrap();
        assert_eq!(r.ids(), vec![7, 9]);
        assert!(matches!(
            d.restrict(3, 5),
            Err(DatasetError::EmptyRestriction { lo: 3, hi: 5 })
        ));
        assert!(matches!(d.restrict(9, 7), Err(DatasetError::BadRange { .. })));
    }

    #[test]
    fn restrict_full_range_is_identity() {
        let d = Dataset::synth(64, 0.5, 3).unwrap();
        let r = d.restrict(1, 64).unwrap();
        assert_eq!(r.entries(), d.entries());
    }

    #[test]
    fn presence_instance_membership() {
        let d = Dataset::new(
            "t",
            vec![Entry { id: 2, bit: true }, Entry { id: 3, bit: false }],
        )
        .unwrap();
        let p = d.presence_instance(1, 4, RangeKind::Inclusive).unwrap();
        assert_eq!(p.candidate_ids(), &[1, 2, 3, 4]);
        assert_eq!(p.present(), &[false, true, true, false]);

        // membership ignores the bit; it is about existence in the table
        assert_eq!(p.present_count(), d.restrict(1, 4).unwrap().len());
    }

    #[test]
    fn presence_span_is_half_open() {
        let d = Dataset::new(
            "t",
            vec![Entry { id: 10, bit: true }, Entry { id: 20, bit: true }],
        )
        .unwrap();
        let p = d.presence_span(10, 10).unwrap();
        assert_eq!(p.len(), 10);
        assert_eq!(p.present_count(), 1); // 20 is excluded
    }

    #[test]
    fn presence_with_no_overlap_is_all_absent() {
        let d = Dataset::new("t", vec![Entry { id: 100, bit: true }]).unwrap();
        let p = d.presence_instance(1, 5, RangeKind::Inclusive).unwrap();
        assert_eq!(p.present_count(), 0);
    }

    #[test]
    fn csv_round_trip() {
        let d = Dataset::synth(50, 0.4, 5).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        d.write_csv(f.path()).unwrap();
        let back = Dataset::load_csv(f.path(), "id", "bit", "1").unwrap();
        assert_eq!(back.ids(), d.ids());
        assert_eq!(back.bits(), d.bits());
    }
}
