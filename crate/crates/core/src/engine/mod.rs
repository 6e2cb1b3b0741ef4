//! Expected influence of every event in a cascade.
//!
//! The accumulation matrix `M` holds, in entry `(i, k)`, the expected capital
//! that event `i` receives from event `k` over all branching structures. It is
//! built one column at a time: column `k` above the diagonal is the product of
//! the leading `k x k` block of `M` with column `k` of the transfer matrix
//! `T = P' ∘ Π`, and the diagonal entry is the capital event `k` keeps for
//! itself. Row sums of `M` are tweet influence scores.

mod aggregate;
mod oracle;

use serde::{Deserialize, Serialize};

use crate::branching::{branching_matrix, ParentProbabilityMatrix};
use crate::cascade::Cascade;
use crate::conductance::ConductanceProvider;
use crate::error::{Error, Result};
use crate::kernel::{MarkConfig, MemoryKernel};
use crate::matrix::{head_column, UpperTriangular};

pub use aggregate::{user_influence, ExactSum, UserInfluence, UserInfluenceAccumulator};
pub use oracle::{brute_force_influence, MAX_ENUMERATION_EVENTS};

pub const DEFAULT_MAX_EVENTS: usize = 20_000;

/// How each event's unit of social capital is split with its parent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CapitalPolicy {
    /// Every share is 1: plain expected-offspring influence.
    #[default]
    None,
    /// A retweet passes `alpha` of its capital to its parent and keeps the rest;
    /// the original tweet keeps everything.
    SocialCapital { alpha: f64 },
}

impl CapitalPolicy {
    pub fn social_capital(alpha: f64) -> Result<Self> {
        let p = CapitalPolicy::SocialCapital { alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CapitalPolicy::SocialCapital { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                Err(Error::Domain(format!("capital share alpha must lie in (0, 1), got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    fn transfer(&self) -> f64 {
        match *self {
            CapitalPolicy::None => 1.0,
            CapitalPolicy::SocialCapital { alpha } => alpha,
        }
    }

    #[inline]
    fn kept(&self, j: usize) -> f64 {
        match *self {
            CapitalPolicy::SocialCapital { alpha } if j > 0 => 1.0 - alpha,
            _ => 1.0,
        }
    }
}

/// Share of event `j`'s capital credited to event `i` (0-based indices, `i <= j`).
///
/// Off the diagonal this is the transfer to a parent; on the diagonal it is
/// what the event keeps. Event 0 is the original tweet.
pub fn capital_share(policy: &CapitalPolicy, i: usize, j: usize) -> Result<f64> {
    if i > j {
        return Err(Error::Domain(format!("capital share undefined for i = {i} > j = {j}")));
    }
    Ok(if i < j { policy.transfer() } else { policy.kept(j) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccumulationMatrix(UpperTriangular);

impl AccumulationMatrix {
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.0.get(i, k)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.0.column_sums()
    }

    pub fn as_triangular(&self) -> &UpperTriangular {
        &self.0
    }
}

/// Builds the accumulation matrix from parent probabilities.
///
/// Cost is `O(n^3 / 6)`; the inner loop is a contiguous axpy over packed columns.
pub fn accumulate(parents: &ParentProbabilityMatrix, policy: &CapitalPolicy) -> Result<AccumulationMatrix> {
    policy.validate()?;
    let n = parents.dim();
    let transfer = policy.transfer();
    let mut m = UpperTriangular::zeros(n);
    for j in 0..n {
        let p_col = parents.column(j);
        let (head, col) = m.split_at_column(j);
        for (k, &p) in p_col[..j].iter().enumerate() {
            let t = p * transfer;
            if t == 0.0 {
                continue;
            }
            for (dst, &src) in col[..=k].iter_mut().zip(head_column(head, k)) {
                *dst += t * src;
            }
        }
        col[j] = policy.kept(j);
    }
    Ok(AccumulationMatrix(m))
}

/// Row sums of `M`: the influence of each event.
pub fn tweet_influence(m: &AccumulationMatrix) -> Vec<f64> {
    m.0.row_sums()
}

/// Everything needed to turn a cascade into per-event influence scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceModel {
    pub kernel: MemoryKernel,
    pub marks: MarkConfig,
    pub policy: CapitalPolicy,
    pub max_events: usize,
}

impl Default for InfluenceModel {
    fn default() -> Self {
        Self {
            kernel: MemoryKernel::default(),
            marks: MarkConfig::default(),
            policy: CapitalPolicy::None,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }
}

/// Influence of one event inside a cascade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TweetInfluence {
    pub cascade_id: String,
    pub index: usize,
    pub user: String,
    pub score: f64,
}

impl InfluenceModel {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.policy.validate()
    }

    pub fn check_size(&self, cascade: &Cascade) -> Result<()> {
        if cascade.len() > self.max_events {
            return Err(Error::CascadeTooLarge {
                cascade_id: cascade.cascade_id.clone(),
                len: cascade.len(),
                cap: self.max_events,
            });
        }
        Ok(())
    }

    pub fn accumulation(
        &self,
        cascade: &Cascade,
        conductance: Option<&dyn ConductanceProvider>,
    ) -> Result<AccumulationMatrix> {
        self.check_size(cascade)?;
        let parents = branching_matrix(cascade, &self.kernel, &self.marks, conductance)?;
        accumulate(&parents, &self.policy)
    }

    pub fn tweet_scores(&self, cascade: &Cascade, conductance: Option<&dyn ConductanceProvider>) -> Result<Vec<f64>> {
        Ok(tweet_influence(&self.accumulation(cascade, conductance)?))
    }

    pub fn tweet_influences(
        &self,
        cascade: &Cascade,
        conductance: Option<&dyn ConductanceProvider>,
    ) -> Result<Vec<TweetInfluence>> {
        let scores = self.tweet_scores(cascade, conductance)?;
        Ok(cascade
            .events()
            .iter()
            .zip(scores)
            .enumerate()
            .map(|(index, (e, score))| TweetInfluence {
                cascade_id: cascade.cascade_id.clone(),
                index,
                user: e.user.clone(),
                score,
            })
            .collect())
    }

    /// Scores a batch of cascades on the current rayon pool. Output order
    /// matches input order.
    pub fn tweet_influences_par(
        &self,
        cascades: &[Cascade],
        conductance: Option<&dyn ConductanceProvider>,
    ) -> Vec<Result<Vec<TweetInfluence>>> {
        use rayon::prelude::*;
        cascades.par_iter().map(|c| self.tweet_influences(c, conductance)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::Event;

    fn parents(n: usize, cols: &[(usize, usize, f64)]) -> ParentProbabilityMatrix {
        let mut m = UpperTriangular::zeros(n);
        for &(i, j, p) in cols {
            m.set(i, j, p);
        }
        ParentProbabilityMatrix::from_triangular(m, 1e-12).unwrap()
    }

    #[test]
    fn capital_share_table() {
        let p = CapitalPolicy::SocialCapital { alpha: 0.02 };
        assert_eq!(capital_share(&p, 0, 0).unwrap(), 1.0);
        assert_eq!(capital_share(&p, 1, 1).unwrap(), 0.98);
        assert_eq!(capital_share(&p, 0, 4).unwrap(), 0.02);
        assert!(capital_share(&p, 3, 2).is_err());
        assert_eq!(capital_share(&CapitalPolicy::None, 1, 1).unwrap(), 1.0);
        assert_eq!(capital_share(&CapitalPolicy::None, 0, 3).unwrap(), 1.0);
    }

    #[test]
    fn alpha_bounds() {
        assert!(CapitalPolicy::social_capital(0.0).is_err());
        assert!(CapitalPolicy::social_capital(1.0).is_err());
        assert!(CapitalPolicy::social_capital(0.5).is_ok());
    }

    #[test]
    fn two_event_capital() {
        let m = accumulate(&parents(2, &[(0, 1, 1.0)]), &CapitalPolicy::SocialCapital { alpha: 0.02 }).unwrap();
        assert_eq!(m.as_triangular().to_dense(), vec![vec![1.0, 0.02], vec![0.0, 0.98]]);
        assert_eq!(m.column_sums(), vec![1.0, 1.0]);
        let s = tweet_influence(&m);
        assert!((s[0] - 1.02).abs() < 1e-15 && (s[1] - 0.98).abs() < 1e-15);
    }

    #[test]
    fn two_event_baseline() {
        let m = accumulate(&parents(2, &[(0, 1, 1.0)]), &CapitalPolicy::None).unwrap();
        assert_eq!(tweet_influence(&m), vec![2.0, 1.0]);
    }

    #[test]
    fn three_event_paths() {
        let (p12, p13, p23) = (1.0, 0.3, 0.7);
        let m = accumulate(&parents(3, &[(0, 1, p12), (0, 2, p13), (1, 2, p23)]), &CapitalPolicy::None).unwrap();
        assert!((m.get(0, 2) - (p13 + p12 * p23)).abs() < 1e-15);
        assert_eq!(m.get(1, 1), 1.0);
    }

    #[test]
    fn lone_initiator() {
        for policy in [CapitalPolicy::None, CapitalPolicy::SocialCapital { alpha: 0.3 }] {
            let m = accumulate(&parents(1, &[]), &policy).unwrap();
            assert_eq!(tweet_influence(&m), vec![1.0]);
        }
    }

    #[test]
    fn size_cap() {
        let model = InfluenceModel { max_events: 2, ..Default::default() };
        let c = Cascade::new("big", (0..3).map(|i| Event::new("u", i as f64, 1.0)).collect()).unwrap();
        assert!(matches!(model.tweet_scores(&c, None), Err(Error::CascadeTooLarge { len: 3, cap: 2, .. })));
    }
}
