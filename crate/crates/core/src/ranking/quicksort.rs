//! Randomized quicksort over targets, with a comparison oracle deciding each
//! "which is more influential" question. Sibling partitions are independent, so
//! up to `parallelism` of them are worked on at once and every partition sends
//! its pivot questions as one batch.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bt::{bt_fit, BtFit};
use super::records::{ComparisonRecord, PairwiseComparisonMatrix};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// An answered question.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Judgment {
    pub winner: Side,
    pub worker_id: String,
    pub question_id: u8,
    pub timestamp: u64,
}

/// Answers "which of `left` and `right` is more influential".
///
/// Calls may arrive concurrently from different partitions of the same run.
pub trait ComparisonOracle: Send + Sync {
    fn compare(&self, run_id: u32, left: &str, right: &str) -> Result<Judgment>;

    /// Answers independent questions. The default asks them in order and stops
    /// at the first failure; queue-backed oracles can keep them all in flight.
    fn compare_many(&self, run_id: u32, pairs: &[(&str, &str)]) -> Vec<Result<Judgment>> {
        let mut out = Vec::with_capacity(pairs.len());
        for (left, right) in pairs {
            let j = self.compare(run_id, left, right);
            let failed = j.is_err();
            out.push(j);
            if failed {
                break;
            }
        }
        out
    }
}

impl<O: ComparisonOracle + ?Sized> ComparisonOracle for &O {
    fn compare(&self, run_id: u32, left: &str, right: &str) -> Result<Judgment> {
        (**self).compare(run_id, left, right)
    }

    fn compare_many(&self, run_id: u32, pairs: &[(&str, &str)]) -> Vec<Result<Judgment>> {
        (**self).compare_many(run_id, pairs)
    }
}

impl<O: ComparisonOracle + ?Sized> ComparisonOracle for Arc<O> {
    fn compare(&self, run_id: u32, left: &str, right: &str) -> Result<Judgment> {
        (**self).compare(run_id, left, right)
    }

    fn compare_many(&self, run_id: u32, pairs: &[(&str, &str)]) -> Vec<Result<Judgment>> {
        (**self).compare_many(run_id, pairs)
    }
}

/// Noiseless oracle: the higher score wins, equal scores go to the smaller id.
#[derive(Clone, Debug)]
pub struct ScoreOracle {
    scores: HashMap<String, f64>,
}

impl ScoreOracle {
    pub fn new<'a>(scores: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Self { scores: scores.into_iter().map(|(k, v)| (k.to_string(), v)).collect() }
    }
}

impl ComparisonOracle for ScoreOracle {
    fn compare(&self, _run_id: u32, left: &str, right: &str) -> Result<Judgment> {
        let score = |t: &str| self.scores.get(t).copied().ok_or_else(|| Error::UnknownTarget(t.to_string()));
        let (l, r) = (score(left)?, score(right)?);
        let left_wins = l > r || (l == r && left < right);
        Ok(Judgment {
            winner: if left_wins { Side::Left } else { Side::Right },
            worker_id: "oracle".into(),
            question_id: 0,
            timestamp: 0,
        })
    }
}

/// Fails with [`Error::BudgetExhausted`] once `budget` questions were answered.
pub struct BudgetedOracle<O> {
    inner: O,
    remaining: AtomicU64,
    used: AtomicU64,
}

impl<O: ComparisonOracle> BudgetedOracle<O> {
    pub fn new(inner: O, budget: u64) -> Self {
        Self { inner, remaining: AtomicU64::new(budget), used: AtomicU64::new(0) }
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> u64 {
        self.remaining.load(Ordering::SeqCst)
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: ComparisonOracle> ComparisonOracle for BudgetedOracle<O> {
    fn compare(&self, run_id: u32, left: &str, right: &str) -> Result<Judgment> {
        self.remaining
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |r| r.checked_sub(1))
            .map_err(|_| Error::BudgetExhausted)?;
        self.used.fetch_add(1, Ordering::SeqCst);
        self.inner.compare(run_id, left, right)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuicksortOptions {
    pub run_id: u32,
    pub seed: u64,
    /// Partitions worked on at once. 1 runs everything on the calling thread.
    pub parallelism: usize,
}

impl QuicksortOptions {
    pub fn new(run_id: u32, seed: u64) -> Self {
        Self { run_id, seed, parallelism: 1 }
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism.max(1);
        self
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// Best first.
    pub order: Vec<String>,
    /// Every comparison made, ordered by partition path and then by position
    /// within the partition.
    pub records: Vec<ComparisonRecord>,
}

/// A run stopped by an oracle failure, with the comparisons it completed.
#[derive(Debug)]
pub struct RunAborted {
    pub error: Error,
    pub records: Vec<ComparisonRecord>,
}

impl fmt::Display for RunAborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run aborted after {} comparisons: {}", self.records.len(), self.error)
    }
}

impl std::error::Error for RunAborted {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<RunAborted> for Error {
    fn from(a: RunAborted) -> Self {
        a.error
    }
}

// Path codes. Sorting placement keys lexicographically yields best-first order:
// the higher side, then the pivot, then the lower side.
const HIGHER: u8 = 0;
const PIVOT: u8 = 1;
const LOWER: u8 = 2;

struct Partition {
    path: Vec<u8>,
    items: Vec<usize>,
}

#[derive(Default)]
struct Output {
    placed: Vec<(Vec<u8>, usize)>,
    records: Vec<((Vec<u8>, usize), ComparisonRecord)>,
    error: Option<Error>,
}

fn partition_seed(opts: &QuicksortOptions, path: &[u8]) -> u64 {
    let mut parts = Vec::with_capacity(path.len() + 2);
    parts.push(opts.run_id as u64);
    parts.push(path.len() as u64);
    parts.extend(path.iter().map(|&b| b as u64));
    derive_seed(opts.seed, &parts)
}

/// Splits one partition around a random pivot. Returns the child partitions.
fn split(
    part: Partition,
    targets: &[String],
    oracle: &dyn ComparisonOracle,
    opts: &QuicksortOptions,
    out: &mut Output,
) -> Vec<Partition> {
    if part.items.len() <= 1 {
        out.placed.extend(part.items.into_iter().map(|i| (part.path.clone(), i)));
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(partition_seed(opts, &part.path));
    let pivot_pos = rng.gen_range(0..part.items.len());
    let pivot = part.items[pivot_pos];
    let others: Vec<usize> =
        part.items.iter().enumerate().filter(|&(k, _)| k != pivot_pos).map(|(_, &i)| i).collect();
    let pivot_left: Vec<bool> = others.iter().map(|_| rng.gen()).collect();
    let pairs: Vec<(&str, &str)> = others
        .iter()
        .zip(&pivot_left)
        .map(|(&x, &pl)| {
            let (a, b) = (targets[pivot].as_str(), targets[x].as_str());
            if pl {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();

    let answers = oracle.compare_many(opts.run_id, &pairs);
    let mut higher = Vec::new();
    let mut lower = Vec::new();
    for (k, answer) in answers.into_iter().enumerate() {
        match answer {
            Ok(j) => {
                let (left, right) = pairs[k];
                let winner = match j.winner {
                    Side::Left => left,
                    Side::Right => right,
                };
                if winner == targets[others[k]] {
                    higher.push(others[k]);
                } else {
                    lower.push(others[k]);
                }
                out.records.push((
                    (part.path.clone(), k),
                    ComparisonRecord {
                        run_id: opts.run_id,
                        left: left.to_string(),
                        right: right.to_string(),
                        winner: winner.to_string(),
                        worker_id: j.worker_id,
                        question_id: j.question_id,
                        timestamp: j.timestamp,
                    },
                ));
            }
            Err(e) => {
                out.error.get_or_insert(e);
                return Vec::new();
            }
        }
    }
    if pairs.len() > higher.len() + lower.len() {
        out.error.get_or_insert(Error::Oracle("oracle returned fewer answers than questions".into()));
        return Vec::new();
    }

    let mut pivot_key = part.path.clone();
    pivot_key.push(PIVOT);
    out.placed.push((pivot_key, pivot));
    let child = |code: u8, items: Vec<usize>| {
        let mut path = part.path.clone();
        path.push(code);
        Partition { path, items }
    };
    vec![child(HIGHER, higher), child(LOWER, lower)]
}

/// One full quicksort pass over `targets`.
pub fn quicksort_run(
    targets: &[String],
    oracle: &dyn ComparisonOracle,
    opts: QuicksortOptions,
) -> std::result::Result<RunOutcome, RunAborted> {
    let mut seen = std::collections::HashSet::with_capacity(targets.len());
    if let Some(dup) = targets.iter().find(|t| !seen.insert(t.as_str())) {
        return Err(RunAborted { error: Error::Domain(format!("duplicate target {dup:?}")), records: Vec::new() });
    }
    if targets.is_empty() {
        return Err(RunAborted { error: Error::Empty("no targets to sort"), records: Vec::new() });
    }

    let root = Partition { path: Vec::new(), items: (0..targets.len()).collect() };
    let mut out = if opts.parallelism <= 1 {
        let mut out = Output::default();
        let mut stack = vec![root];
        while let Some(p) = stack.pop() {
            if out.error.is_some() {
                break;
            }
            stack.extend(split(p, targets, oracle, &opts, &mut out));
        }
        out
    } else {
        run_parallel(root, targets, oracle, &opts)
    };

    out.records.sort_by(|a, b| a.0.cmp(&b.0));
    let records = out.records.into_iter().map(|(_, r)| r).collect();
    if let Some(error) = out.error {
        return Err(RunAborted { error, records });
    }
    out.placed.sort();
    Ok(RunOutcome { order: out.placed.into_iter().map(|(_, i)| targets[i].clone()).collect(), records })
}

struct Queue {
    pending: Vec<Partition>,
    active: usize,
}

fn run_parallel(root: Partition, targets: &[String], oracle: &dyn ComparisonOracle, opts: &QuicksortOptions) -> Output {
    let queue = Mutex::new(Queue { pending: vec![root], active: 0 });
    let ready = Condvar::new();
    let aborted = AtomicBool::new(false);
    let outputs: Vec<Output> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..opts.parallelism)
            .map(|_| {
                s.spawn(|| {
                    let mut out = Output::default();
                    loop {
                        let part = {
                            let mut q = queue.lock().expect("queue lock");
                            loop {
                                if aborted.load(Ordering::SeqCst) {
                                    break None;
                                }
                                if let Some(p) = q.pending.pop() {
                                    q.active += 1;
                                    break Some(p);
                                }
                                if q.active == 0 {
                                    break None;
                                }
                                q = ready.wait(q).expect("queue lock");
                            }
                        };
                        let Some(part) = part else { break };
                        let children = split(part, targets, oracle, opts, &mut out);
                        if out.error.is_some() {
                            aborted.store(true, Ordering::SeqCst);
                        }
                        let mut q = queue.lock().expect("queue lock");
                        q.active -= 1;
                        q.pending.extend(children);
                        ready.notify_all();
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("quicksort worker panicked")).collect()
    });

    let mut merged = Output::default();
    for o in outputs {
        merged.placed.extend(o.placed);
        merged.records.extend(o.records);
        if merged.error.is_none() {
            merged.error = o.error;
        }
    }
    merged
}

/// `runs` sequential quicksort passes (run ids `0..runs`), all comparisons
/// pooled into a single fit with every comparison weighted equally.
pub fn multi_run_rank(
    targets: &[String],
    oracle: &dyn ComparisonOracle,
    runs: u32,
    lambda: f64,
    seed: u64,
    parallelism: usize,
) -> Result<(BtFit, Vec<ComparisonRecord>)> {
    if runs == 0 {
        return Err(Error::Domain("at least one run is required".into()));
    }
    let mut records = Vec::new();
    for run in 0..runs {
        let opts = QuicksortOptions::new(run, seed).with_parallelism(parallelism);
        records.extend(quicksort_run(targets, oracle, opts)?.records);
    }
    let counts = PairwiseComparisonMatrix::with_targets(targets.to_vec(), &records)?;
    Ok((bt_fit(&counts, lambda)?, records))
}
