use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One answered comparison. `winner` is the target judged more influential.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub run_id: u32,
    pub left: String,
    pub right: String,
    pub winner: String,
    pub worker_id: String,
    pub question_id: u8,
    pub timestamp: u64,
}

impl ComparisonRecord {
    pub fn validate(&self) -> Result<()> {
        if self.left == self.right {
            return Err(Error::Domain(format!("comparison of {:?} with itself", self.left)));
        }
        if self.winner != self.left && self.winner != self.right {
            return Err(Error::Domain(format!(
                "winner {:?} is neither {:?} nor {:?}",
                self.winner, self.left, self.right
            )));
        }
        Ok(())
    }

    pub fn loser(&self) -> &str {
        if self.winner == self.left {
            &self.right
        } else {
            &self.left
        }
    }

    /// The pair in lexicographic order.
    pub fn unordered_pair(&self) -> (&str, &str) {
        if self.left <= self.right {
            (&self.left, &self.right)
        } else {
            (&self.right, &self.left)
        }
    }
}

/// Reads a line-delimited comparison log. Blank lines and `#` comment lines
/// are skipped.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<ComparisonRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec: ComparisonRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, reason: e.to_string() })?;
        rec.validate().map_err(|e| Error::Parse { line: i + 1, reason: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<'a, W: Write>(mut w: W, records: impl IntoIterator<Item = &'a ComparisonRecord>) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Dense win counts: `count(i, j)` is how often `i` was favoured over `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseComparisonMatrix {
    targets: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u32>,
}

impl PairwiseComparisonMatrix {
    pub fn new(targets: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(targets.len());
        for (i, t) in targets.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Domain(format!("duplicate target {t:?}")));
            }
        }
        let n = targets.len();
        Ok(Self { targets, index, counts: vec![0; n * n] })
    }

    /// Targets are taken from the records, in sorted order.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a ComparisonRecord> + Clone) -> Result<Self> {
        let mut ids: Vec<String> =
            records.clone().into_iter().flat_map(|r| [r.left.clone(), r.right.clone()]).collect();
        ids.sort();
        ids.dedup();
        let mut m = Self::new(ids)?;
        m.extend(records)?;
        Ok(m)
    }

    pub fn with_targets<'a>(
        targets: Vec<String>,
        records: impl IntoIterator<Item = &'a ComparisonRecord>,
    ) -> Result<Self> {
        let mut m = Self::new(targets)?;
        m.extend(records)?;
        Ok(m)
    }

    pub fn extend<'a>(&mut self, records: impl IntoIterator<Item = &'a ComparisonRecord>) -> Result<()> {
        for r in records {
            r.validate()?;
            self.add_win(&r.winner, r.loser())?;
        }
        Ok(())
    }

    pub fn add_win(&mut self, winner: &str, loser: &str) -> Result<()> {
        let w = self.position(winner)?;
        let l = self.position(loser)?;
        if w == l {
            return Err(Error::Domain(format!("comparison of {winner:?} with itself")));
        }
        let n = self.targets.len();
        self.counts[w * n + l] += 1;
        Ok(())
    }

    pub fn position(&self, target: &str) -> Result<usize> {
        self.index.get(target).copied().ok_or_else(|| Error::UnknownTarget(target.to_string()))
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    #[inline]
    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.targets.len() + j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}
