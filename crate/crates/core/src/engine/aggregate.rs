//! Order-independent per-user averaging of tweet scores.
//!
//! Sums are kept exactly (as non-overlapping floating-point partials) and
//! rounded once when read, so the mean is the same bits whatever order the
//! cascades were processed in.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TweetInfluence;

/// Exact floating-point accumulator; `value` is the correctly rounded sum.
#[derive(Clone, Debug, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // round-half-even across the remaining partials
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserInfluence {
    pub user: String,
    pub score: f64,
    pub tweet_count: usize,
}

/// Streaming mean of tweet influence per user.
#[derive(Clone, Debug, Default)]
pub struct UserInfluenceAccumulator {
    users: BTreeMap<String, (ExactSum, usize)>,
}

impl UserInfluenceAccumulator {
    pub fn add(&mut self, user: &str, score: f64) {
        let entry = match self.users.get_mut(user) {
            Some(e) => e,
            None => self.users.entry(user.to_string()).or_default(),
        };
        entry.0.add(score);
        entry.1 += 1;
    }

    pub fn add_tweet(&mut self, t: &TweetInfluence) {
        self.add(&t.user, t.score);
    }

    pub fn merge(&mut self, other: UserInfluenceAccumulator) {
        for (user, (sum, count)) in other.users {
            let e = self.users.entry(user).or_default();
            e.0.merge(&sum);
            e.1 += count;
        }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Users sorted by id.
    pub fn finish(&self) -> Vec<UserInfluence> {
        self.users
            .iter()
            .map(|(user, (sum, count))| UserInfluence {
                user: user.clone(),
                score: sum.value() / *count as f64,
                tweet_count: *count,
            })
            .collect()
    }
}

/// Mean tweet influence per user, sorted by user id.
pub fn user_influence<'a>(tweets: impl IntoIterator<Item = &'a TweetInfluence>) -> Vec<UserInfluence> {
    let mut acc = UserInfluenceAccumulator::default();
    for t in tweets {
        acc.add_tweet(t);
    }
    acc.finish()
}
