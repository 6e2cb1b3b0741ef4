use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use influence_core::metrics::average_ranks;

pub const SAMPLE_TWEETS: usize = 5;

/// What an annotator sees about one user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetProfile {
    pub target_id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub followers: u64,
    pub followees: u64,
    pub statuses: u64,
    #[serde(default)]
    pub profile_url: String,
    #[serde(default)]
    pub image_url: String,
    #[serde(default)]
    pub sample_tweets: Vec<String>,
    /// Set when fewer than five tweets were supplied and blanks were added.
    #[serde(default)]
    pub padded: bool,
}

impl TargetProfile {
    fn normalize(mut self) -> std::result::Result<Self, String> {
        if self.target_id.is_empty() {
            return Err("empty target_id".into());
        }
        if self.sample_tweets.len() > SAMPLE_TWEETS {
            return Err(format!("{} sample tweets, at most {SAMPLE_TWEETS} allowed", self.sample_tweets.len()));
        }
        if self.sample_tweets.len() < SAMPLE_TWEETS {
            self.sample_tweets.resize(SAMPLE_TWEETS, String::new());
            self.padded = true;
        }
        Ok(self)
    }
}

/// Reads line-delimited profiles, padding short tweet samples.
pub fn read_profiles<R: BufRead>(reader: R) -> Result<Vec<TargetProfile>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| ServiceError::Config(format!("profiles line {}: {reason}", i + 1));
        let p: TargetProfile = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let p = p.normalize().map_err(bad)?;
        if p.padded {
            log::warn!("profile {} has fewer than {SAMPLE_TWEETS} sample tweets; padded", p.target_id);
        }
        if !seen.insert(p.target_id.clone()) {
            return Err(bad(format!("duplicate target_id {:?}", p.target_id)));
        }
        out.push(p);
    }
    Ok(out)
}

/// Follower-count percentile of each profile (average rank / n).
pub fn follower_percentiles(profiles: &[TargetProfile]) -> Vec<f64> {
    let counts: Vec<f64> = profiles.iter().map(|p| p.followers as f64).collect();
    let n = counts.len() as f64;
    average_ranks(&counts).into_iter().map(|r| r / n).collect()
}
