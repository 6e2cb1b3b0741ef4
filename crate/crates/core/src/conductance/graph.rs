use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use crate::error::{Error, Result};

/// Directed follower relation. `follows(x, y)` holds when `x` follows `y`.
#[derive(Clone, Debug, Default)]
pub struct FollowerGraph {
    /// followee -> followers
    followers: BTreeMap<String, BTreeSet<String>>,
    /// follower -> followees
    followees: BTreeMap<String, BTreeSet<String>>,
}

impl FollowerGraph {
    /// Builds from `(user, follower)` pairs. Self-follows and duplicates are dropped.
    pub fn from_edges<I, S>(edges: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut g = FollowerGraph::default();
        for (user, follower) in edges {
            g.add_edge(user.into(), follower.into());
        }
        g
    }

    pub fn add_edge(&mut self, user: String, follower: String) {
        if user == follower {
            return;
        }
        self.followees.entry(follower.clone()).or_default().insert(user.clone());
        self.followers.entry(user).or_default().insert(follower);
    }

    /// Reads the two-column CSV `user,follower`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "user" || &headers[1] != "follower" {
            return Err(Error::Parse { line: 1, reason: format!("expected header `user,follower`, found {headers:?}") });
        }
        let mut g = FollowerGraph::default();
        for (idx, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Parse { line: idx + 2, reason: format!("expected 2 columns, found {}", rec.len()) });
            }
            g.add_edge(rec[0].to_string(), rec[1].to_string());
        }
        Ok(g)
    }

    pub fn follows(&self, follower: &str, followee: &str) -> bool {
        self.followers.get(followee).is_some_and(|f| f.contains(follower))
    }

    pub fn follower_count(&self, user: &str) -> usize {
        self.followers.get(user).map_or(0, BTreeSet::len)
    }

    pub fn followees_of(&self, user: &str) -> impl Iterator<Item = &str> {
        self.followees.get(user).into_iter().flatten().map(String::as_str)
    }

    /// Every user appearing on either side of an edge, sorted.
    pub fn users(&self) -> BTreeSet<&str> {
        self.followers.keys().chain(self.followees.keys()).map(String::as_str).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.followers.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.followers.is_empty()
    }
}
