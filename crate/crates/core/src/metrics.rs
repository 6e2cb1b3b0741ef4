//! Ranking-quality measures.
//!
//! NDCG uses relevance `n - true_rank` (so the true top item has relevance
//! `n - 1` and the bottom item 0) with a `log2(position + 1)` discount.
//! Percentiles are `rank / n`, which keeps MAPE denominators positive.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// A permutation of target ids, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    order: Vec<String>,
    rank: HashMap<String, usize>,
}

impl Ranking {
    pub fn new(order: Vec<String>) -> Result<Self> {
        let mut rank = HashMap::with_capacity(order.len());
        for (pos, id) in order.iter().enumerate() {
            if rank.insert(id.clone(), pos + 1).is_some() {
                return Err(Error::Domain(format!("target {id:?} appears twice in ranking")));
            }
        }
        Ok(Self { order, rank })
    }

    /// Orders by descending score, ties broken by id.
    pub fn from_scores<'a>(scores: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self> {
        let mut v: Vec<(&str, f64)> = scores.into_iter().collect();
        if v.iter().any(|(_, s)| s.is_nan()) {
            return Err(Error::Domain("NaN score".into()));
        }
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        Self::new(v.into_iter().map(|(id, _)| id.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[String] {
        &self.order
    }

    /// 1-based rank.
    pub fn rank(&self, id: &str) -> Option<usize> {
        self.rank.get(id).copied()
    }

    pub fn percentile(&self, id: &str) -> Option<f64> {
        self.rank(id).map(|r| r as f64 / self.len() as f64)
    }

    fn check_same_targets(&self, other: &Ranking) -> Result<()> {
        if self.len() != other.len() || self.order.iter().any(|id| !other.rank.contains_key(id)) {
            return Err(Error::Domain("rankings cover different target sets".into()));
        }
        if self.is_empty() {
            return Err(Error::Empty("ranking"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Gain {
    /// `rel`
    #[default]
    Linear,
    /// `2^rel - 1`
    Exponential,
}

impl Gain {
    fn apply(self, rel: f64) -> f64 {
        match self {
            Gain::Linear => rel,
            Gain::Exponential => rel.exp2() - 1.0,
        }
    }
}

fn dcg(gains: impl Iterator<Item = f64>) -> f64 {
    gains.enumerate().map(|(p, g)| g / ((p + 2) as f64).log2()).sum()
}

pub fn ndcg_at_k(estimate: &Ranking, truth: &Ranking, k: usize) -> Result<f64> {
    ndcg_at_k_with_gain(estimate, truth, k, Gain::Linear)
}

pub fn ndcg_at_k_with_gain(estimate: &Ranking, truth: &Ranking, k: usize, gain: Gain) -> Result<f64> {
    estimate.check_same_targets(truth)?;
    let n = truth.len();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("k = {k} outside 1..={n}")));
    }
    let rel = |id: &str| gain.apply((n - truth.rank(id).expect("checked")) as f64);
    let ideal = dcg(truth.order[..k].iter().map(|id| rel(id)));
    if ideal == 0.0 {
        return Ok(1.0);
    }
    Ok(dcg(estimate.order[..k].iter().map(|id| rel(id))) / ideal)
}

/// Mean of NDCG@k over `k = 1..=n`.
pub fn auc_ndcg(estimate: &Ranking, truth: &Ranking) -> Result<f64> {
    auc_ndcg_with_gain(estimate, truth, Gain::Linear)
}

pub fn auc_ndcg_with_gain(estimate: &Ranking, truth: &Ranking, gain: Gain) -> Result<f64> {
    estimate.check_same_targets(truth)?;
    let n = truth.len();
    let rel = |id: &str| gain.apply((n - truth.rank(id).expect("checked")) as f64);
    let (mut dcg_est, mut dcg_ideal, mut total) = (0.0, 0.0, 0.0);
    for p in 0..n {
        let discount = ((p + 2) as f64).log2();
        dcg_est += rel(&estimate.order[p]) / discount;
        dcg_ideal += rel(&truth.order[p]) / discount;
        total += if dcg_ideal == 0.0 { 1.0 } else { dcg_est / dcg_ideal };
    }
    Ok(total / n as f64)
}

/// Mean absolute percentage error between percentile ranks.
pub fn mape_percentile(estimate: &Ranking, truth: &Ranking) -> Result<f64> {
    estimate.check_same_targets(truth)?;
    let n = truth.len() as f64;
    let total: f64 = truth
        .order
        .iter()
        .map(|id| {
            let t = truth.rank(id).expect("checked") as f64 / n;
            let e = estimate.rank(id).expect("checked") as f64 / n;
            (e - t).abs() / t
        })
        .sum();
    Ok(total / n)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

fn check_paired(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), found: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::Empty("need at least two paired values"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Domain("NaN value".into()));
    }
    Ok(())
}

/// Spearman rank correlation (Pearson correlation of average-tied ranks).
/// A constant input has zero correlation with anything.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    check_paired(a, b)?;
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

/// Spearman correlation between two rankings of the same targets.
pub fn spearman_rankings(x: &Ranking, y: &Ranking) -> Result<f64> {
    x.check_same_targets(y)?;
    let (a, b): (Vec<f64>, Vec<f64>) =
        x.order.iter().map(|id| (x.rank(id).unwrap() as f64, y.rank(id).unwrap() as f64)).unzip();
    spearman(&a, &b)
}

/// Tau-b from pair counts: `net` is concordant minus discordant pairs,
/// `ties_a` and `ties_b` count pairs tied in each input.
pub fn tau_b_from_counts(net: i64, n_pairs: i64, ties_a: i64, ties_b: i64) -> f64 {
    let denom = ((n_pairs - ties_a) as f64 * (n_pairs - ties_b) as f64).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    net as f64 / denom
}

fn tied_pairs(sorted: impl Iterator<Item = f64>) -> i64 {
    let mut total = 0i64;
    let mut run = 0i64;
    let mut prev: Option<f64> = None;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    total + run * (run - 1) / 2
}

/// Kendall tau-b in `O(n log n)` (Knight's merge-count method).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    check_paired(a, b)?;
    let n = a.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));

    let ties_a = tied_pairs(idx.iter().map(|&i| a[i]));
    // pairs tied in both
    let mut joint = 0i64;
    let mut run = 1i64;
    for w in idx.windows(2) {
        if a[w[0]] == a[w[1]] && b[w[0]] == b[w[1]] {
            run += 1;
        } else {
            joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    joint += run * (run - 1) / 2;

    let mut seq: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut seq, &mut buf);
    let ties_b = tied_pairs(seq.iter().copied());

    let n_pairs = (n as i64) * (n as i64 - 1) / 2;
    let net = n_pairs - ties_a - ties_b + joint - 2 * swaps;
    Ok(tau_b_from_counts(net, n_pairs, ties_a, ties_b))
}

/// Sorts `v` ascending, returning the number of strictly inverted pairs.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as i64;
            buf[k] = v[j];
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(ids: &[&str]) -> Ranking {
        Ranking::new(ids.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn ndcg_hand_values() {
        let truth = r(&["a", "b", "c"]);
        for k in 1..=3 {
            assert_eq!(ndcg_at_k(&truth, &truth, k).unwrap(), 1.0);
        }
        let est = r(&["b", "a", "c"]);
        // DCG = 1/1 + 2/log2(3); IDCG = 2 + 1/log2(3)
        let expected = (1.0 + 2.0 / 3f64.log2()) / (2.0 + 1.0 / 3f64.log2());
        assert!((ndcg_at_k(&est, &truth, 3).unwrap() - expected).abs() < 1e-12);
        assert!((ndcg_at_k(&est, &truth, 3).unwrap() - 0.8597).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&r(&["b", "a"]), &r(&["a", "b"]), 1).unwrap(), 0.0);
    }

    #[test]
    fn auc_reversed_pair() {
        let auc = auc_ndcg(&r(&["b", "a"]), &r(&["a", "b"])).unwrap();
        assert!((auc - 0.3155).abs() < 1e-4);
        assert_eq!(auc_ndcg(&r(&["a", "b"]), &r(&["a", "b"])).unwrap(), 1.0);
    }

    #[test]
    fn auc_matches_mean_of_ndcg() {
        let truth = r(&["a", "b", "c", "d", "e"]);
        let est = r(&["c", "a", "e", "b", "d"]);
        let mean: f64 = (1..=5).map(|k| ndcg_at_k(&est, &truth, k).unwrap()).sum::<f64>() / 5.0;
        assert!((auc_ndcg(&est, &truth).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn mape_hand_values() {
        assert_eq!(mape_percentile(&r(&["a", "b"]), &r(&["a", "b"])).unwrap(), 0.0);
        assert!((mape_percentile(&r(&["b", "a"]), &r(&["a", "b"])).unwrap() - 0.75).abs() < 1e-12);
        let m = mape_percentile(&r(&["a", "b", "d", "c"]), &r(&["a", "b", "c", "d"])).unwrap();
        assert!((m - 0.1458).abs() < 1e-4);
    }

    #[test]
    fn mismatched_sets() {
        assert!(ndcg_at_k(&r(&["a", "b"]), &r(&["a", "c"]), 1).is_err());
        assert!(mape_percentile(&r(&["a"]), &r(&["a", "c"])).is_err());
        assert!(ndcg_at_k(&r(&["a", "b"]), &r(&["a", "b"]), 3).is_err());
        assert!(Ranking::new(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn spearman_and_kendall_extremes() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let rev = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&a, &rev).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        assert_eq!(kendall_tau(&a, &rev).unwrap(), -1.0);
        let swapped = [1.0, 2.0, 4.0, 3.0];
        assert!((kendall_tau(&a, &swapped).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0]), vec![1.5, 3.0, 1.5]);
        // scipy.stats.kendalltau([1,1,2,3],[1,2,2,3]) = 0.8
        assert!((kendall_tau(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ranking_from_scores() {
        let rk = Ranking::from_scores([("x", 1.0), ("y", 3.0), ("z", 1.0)]).unwrap();
        assert_eq!(rk.order(), ["y", "x", "z"]);
        assert_eq!(rk.percentile("y"), Some(1.0 / 3.0));
    }
}
