//! Synthetic ranking experiments: power-law intensities, noisy workers that
//! answer according to the noisy Bradley-Terry law, worker accuracy as a
//! function of noise, and budget/quality grids.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{average_ranks, spearman};
use crate::ranking::{
    bt_fit, logistic, quicksort_run, BtFit, BudgetedOracle, ComparisonOracle, ComparisonRecord, Judgment,
    PairwiseComparisonMatrix, QuicksortOptions, Side,
};
use crate::seed::derive_seed;

pub const DEFAULT_EXPONENT: f64 = 2.016;
pub const LAMBDA_MIN: f64 = 1e-3;
pub const LAMBDA_MAX: f64 = 1e3;

/// How raw Pareto draws become intensities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaTransform {
    #[default]
    Raw,
    Log,
    /// Average rank divided by n.
    Percentile,
}

impl ThetaTransform {
    pub const ALL: [ThetaTransform; 3] = [ThetaTransform::Raw, ThetaTransform::Log, ThetaTransform::Percentile];

    pub fn apply(self, raw: &[f64]) -> Vec<f64> {
        match self {
            ThetaTransform::Raw => raw.to_vec(),
            ThetaTransform::Log => raw.iter().map(|x| x.ln()).collect(),
            ThetaTransform::Percentile => {
                let n = raw.len() as f64;
                average_ranks(raw).into_iter().map(|r| r / n).collect()
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ThetaTransform::Raw => "raw",
            ThetaTransform::Log => "log",
            ThetaTransform::Percentile => "percentile",
        }
    }
}

/// Pareto draws with density `∝ x^(−exponent)` on `[1, ∞)`.
pub fn sample_intensities(n: usize, exponent: f64, seed: u64) -> Result<Vec<f64>> {
    if !(exponent > 1.0 && exponent.is_finite()) {
        return Err(Error::Domain(format!("power-law exponent must exceed 1, got {exponent}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv = -1.0 / (exponent - 1.0);
    Ok((0..n)
        .map(|_| loop {
            let u: f64 = rng.gen();
            if u > 0.0 {
                break u.powf(inv);
            }
        })
        .collect())
}

#[inline]
fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A worker whose answers follow the noisy Bradley-Terry law for known
/// intensities. Each (run, unordered pair) gets its own random draw, so a
/// replayed run reproduces the same answers whatever the question order.
#[derive(Clone, Debug)]
pub struct SyntheticWorker {
    index: HashMap<String, usize>,
    theta: Vec<f64>,
    lambda: f64,
    seed: u64,
}

impl SyntheticWorker {
    pub fn new(targets: &[String], theta: &[f64], lambda: f64, seed: u64) -> Result<Self> {
        if targets.len() != theta.len() {
            return Err(Error::Dimension { expected: targets.len(), found: theta.len() });
        }
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("noise lambda must be positive, got {lambda}")));
        }
        let index = targets.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { index, theta: theta.to_vec(), lambda, seed })
    }

    fn position(&self, t: &str) -> Result<usize> {
        self.index.get(t).copied().ok_or_else(|| Error::UnknownTarget(t.to_string()))
    }
}

impl ComparisonOracle for SyntheticWorker {
    fn compare(&self, run_id: u32, left: &str, right: &str) -> Result<Judgment> {
        let (l, r) = (self.position(left)?, self.position(right)?);
        let (lo, hi) = if l < r { (l, r) } else { (r, l) };
        let u = unit_interval(derive_seed(self.seed, &[run_id as u64, lo as u64, hi as u64]));
        let hi_wins = u < logistic((self.theta[hi] - self.theta[lo]) / self.lambda);
        let winner = if hi_wins == (hi == r) { Side::Right } else { Side::Left };
        Ok(Judgment { winner, worker_id: "synthetic".into(), question_id: 0, timestamp: 0 })
    }
}

fn accuracy_from_gaps(gaps: &[f64], lambda: f64) -> f64 {
    let total: f64 = gaps.iter().map(|&g| if g == 0.0 { 0.5 } else { logistic(g / lambda) }).sum();
    total / gaps.len() as f64
}

fn gaps(theta: &[f64], pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::Empty("no pairs"));
    }
    pairs
        .iter()
        .map(|&(i, j)| match (theta.get(i), theta.get(j)) {
            (Some(a), Some(b)) => Ok((a - b).abs()),
            _ => Err(Error::Dimension { expected: theta.len(), found: i.max(j) + 1 }),
        })
        .collect()
}

/// Mean probability that the worker orders each pair by intensity; equal
/// intensities count as one half.
pub fn expected_accuracy(theta: &[f64], pairs: &[(usize, usize)], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("noise lambda must be positive, got {lambda}")));
    }
    Ok(accuracy_from_gaps(&gaps(theta, pairs)?, lambda))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurvePoint {
    pub lambda: f64,
    pub expected_accuracy: f64,
}

/// `k` points spaced evenly in `ln λ` over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp()).collect()
}

pub fn accuracy_curve(theta: &[f64], pairs: &[(usize, usize)], lambdas: &[f64]) -> Result<Vec<AccuracyCurvePoint>> {
    let g = gaps(theta, pairs)?;
    Ok(lambdas.iter().map(|&lambda| AccuracyCurvePoint { lambda, expected_accuracy: accuracy_from_gaps(&g, lambda) }).collect())
}

pub fn write_curve_csv<W: Write>(w: W, points: &[AccuracyCurvePoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lambda", "expected_accuracy"])?;
    for p in points {
        out.write_record([p.lambda.to_string(), p.expected_accuracy.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

fn fit_noise_gaps(observed: f64, gaps: &[f64]) -> Result<f64> {
    if observed.is_nan() || observed <= 0.5 {
        return Err(Error::IndistinguishableFromRandom(observed));
    }
    if observed >= accuracy_from_gaps(gaps, LAMBDA_MIN) {
        log::warn!("observed accuracy {observed} is at or above the attainable maximum; returning lambda = {LAMBDA_MIN}");
        return Ok(LAMBDA_MIN);
    }
    if observed <= accuracy_from_gaps(gaps, LAMBDA_MAX) {
        log::warn!("observed accuracy {observed} is below the accuracy at lambda = {LAMBDA_MAX}; returning it");
        return Ok(LAMBDA_MAX);
    }
    // bisect in ln λ until the bracket is exhausted in floating point
    let (mut lo, mut hi) = (LAMBDA_MIN.ln(), LAMBDA_MAX.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if accuracy_from_gaps(gaps, mid.exp()) > observed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Inverts [`expected_accuracy`] in `λ` over `[1e-3, 1e3]`.
pub fn fit_noise(observed_accuracy: f64, theta_proxy: &[f64], pairs: &[(usize, usize)]) -> Result<f64> {
    fit_noise_gaps(observed_accuracy, &gaps(theta_proxy, pairs)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_targets: usize,
    pub budget: u64,
    pub lambda: f64,
    pub exponent: f64,
    pub runs_cap: u32,
    pub seed: u64,
    pub transform: ThetaTransform,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_targets: 500,
            budget: 30_000,
            lambda: 1.22,
            exponent: DEFAULT_EXPONENT,
            runs_cap: 1_000,
            seed: 0,
            transform: ThetaTransform::Raw,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_targets < 2 {
            return Err(Error::Domain("at least two targets are required".into()));
        }
        if self.budget < 1 {
            return Err(Error::Domain("budget must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Domain(format!("noise lambda must be positive, got {}", self.lambda)));
        }
        if !(self.exponent > 1.0) {
            return Err(Error::Domain(format!("power-law exponent must exceed 1, got {}", self.exponent)));
        }
        if self.runs_cap < 1 {
            return Err(Error::Domain("runs_cap must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn target_ids(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("t{i:0width$}")).collect()
}

#[derive(Clone, Debug)]
pub struct SimulationOutcome {
    pub targets: Vec<String>,
    pub theta: Vec<f64>,
    pub records: Vec<ComparisonRecord>,
    pub runs_completed: u32,
    /// The last run was cut short by the budget.
    pub truncated: bool,
    pub fit: BtFit,
    pub spearman: f64,
    /// Fraction of answers that ordered the pair by intensity (ties count one half).
    pub empirical_accuracy: f64,
    /// Expected accuracy at the true `λ` over the pairs that were asked.
    pub expected_accuracy: f64,
}

impl SimulationOutcome {
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let index: HashMap<&str, usize> = self.targets.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        self.records.iter().map(|r| (index[r.left.as_str()], index[r.right.as_str()])).collect()
    }
}

/// Quicksort runs with a synthetic worker until the budget or the run cap is
/// reached, then one pooled fit.
pub fn simulate(config: &SimulationConfig) -> Result<SimulationOutcome> {
    config.validate()?;
    let targets = target_ids(config.n_targets);
    let raw = sample_intensities(config.n_targets, config.exponent, derive_seed(config.seed, &[0]))?;
    let theta = config.transform.apply(&raw);
    let worker = SyntheticWorker::new(&targets, &theta, config.lambda, derive_seed(config.seed, &[1]))?;
    let oracle = BudgetedOracle::new(worker, config.budget);
    let mut records = Vec::new();
    let mut runs_completed = 0;
    let mut truncated = false;
    for run in 0..config.runs_cap {
        match quicksort_run(&targets, &oracle, QuicksortOptions::new(run, derive_seed(config.seed, &[2]))) {
            Ok(out) => {
                records.extend(out.records);
                runs_completed += 1;
            }
            Err(aborted) => {
                if !matches!(aborted.error, Error::BudgetExhausted) {
                    return Err(aborted.error);
                }
                truncated = !aborted.records.is_empty();
                records.extend(aborted.records);
                break;
            }
        }
    }

    let counts = PairwiseComparisonMatrix::with_targets(targets.clone(), &records)?;
    let fit = bt_fit(&counts, config.lambda)?;
    let rho = spearman(&theta, fit.model.thetas())?;
    let index: HashMap<&str, usize> = targets.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut correct = 0.0;
    let mut gap = Vec::with_capacity(records.len());
    for r in &records {
        let (w, l) = (theta[index[r.winner.as_str()]], theta[index[r.loser()]]);
        correct += if w > l {
            1.0
        } else if w == l {
            0.5
        } else {
            0.0
        };
        gap.push((w - l).abs());
    }
    Ok(SimulationOutcome {
        empirical_accuracy: correct / records.len() as f64,
        expected_accuracy: accuracy_from_gaps(&gap, config.lambda),
        targets,
        theta,
        records,
        runs_completed,
        truncated,
        fit,
        spearman: rho,
    })
}

/// Seed of replication `rep` in the `(n, budget)` grid cell.
pub fn replication_seed(seed: u64, n: usize, budget: u64, rep: usize) -> u64 {
    derive_seed(seed, &[n as u64, budget, rep as u64])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetGridConfig {
    pub n_list: Vec<usize>,
    pub budgets: Vec<u64>,
    pub lambda: f64,
    pub exponent: f64,
    pub transform: ThetaTransform,
    pub replications: usize,
    pub runs_cap: u32,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n: usize,
    pub budget: u64,
    pub mean_spearman: f64,
    pub stddev: f64,
    pub replications: usize,
}

/// Every (n, budget) cell averaged over independent replications. Cells and
/// replications run in parallel; each replication's seed depends only on its
/// cell and index, so the table does not depend on the thread count.
pub fn budget_grid(config: &BudgetGridConfig) -> Result<Vec<GridCell>> {
    if config.replications < 1 {
        return Err(Error::Domain("at least one replication is required".into()));
    }
    let cells: Vec<(usize, u64)> =
        config.n_list.iter().flat_map(|&n| config.budgets.iter().map(move |&b| (n, b))).collect();
    let jobs: Vec<(usize, u64, usize)> =
        cells.iter().flat_map(|&(n, b)| (0..config.replications).map(move |r| (n, b, r))).collect();
    let results: Vec<f64> = jobs
        .par_iter()
        .map(|&(n, budget, rep)| {
            let sim = SimulationConfig {
                n_targets: n,
                budget,
                lambda: config.lambda,
                exponent: config.exponent,
                runs_cap: config.runs_cap,
                seed: replication_seed(config.seed, n, budget, rep),
                transform: config.transform,
            };
            simulate(&sim).map(|o| o.spearman)
        })
        .collect::<Result<_>>()?;

    Ok(cells
        .iter()
        .zip(results.chunks(config.replications))
        .map(|(&(n, budget), rhos)| {
            let m = rhos.len() as f64;
            let mean = rhos.iter().sum::<f64>() / m;
            let var = if rhos.len() > 1 { rhos.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
            GridCell { n, budget, mean_spearman: mean, stddev: var.sqrt(), replications: rhos.len() }
        })
        .collect())
}

pub fn write_grid_csv<W: Write>(w: W, cells: &[GridCell]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "budget", "mean_spearman", "stddev", "replications"])?;
    for c in cells {
        out.write_record([
            c.n.to_string(),
            c.budget.to_string(),
            c.mean_spearman.to_string(),
            c.stddev.to_string(),
            c.replications.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub lambda: f64,
    /// Expected accuracy at `lambda` over the pairs quicksort asked for.
    pub expected_accuracy: f64,
    pub iterations: usize,
}

/// Finds the `λ` at which a synthetic worker is right `target_accuracy` of the
/// time on the pairs quicksort actually asks. The pairs depend on `λ`, so the
/// inversion is repeated on freshly simulated pairs until it settles.
///
/// Replications use the same seeds as the matching [`budget_grid`] cell, so a
/// grid run with the same base seed sees exactly the calibrated workers.
pub fn calibrate_lambda(
    target_accuracy: f64,
    base: &SimulationConfig,
    replications: usize,
) -> Result<Calibration> {
    base.validate()?;
    let mut lambda = base.lambda;
    let mut last = f64::NAN;
    let mut iterations = 0;
    let gaps_at = |lambda: f64| -> Result<Vec<f64>> {
        let per_rep: Vec<Vec<f64>> = (0..replications.max(1))
            .into_par_iter()
            .map(|rep| {
                let cfg = SimulationConfig { lambda, seed: replication_seed(base.seed, base.n_targets, base.budget, rep), ..base.clone() };
                let out = simulate(&cfg)?;
                let g = gaps(&out.theta, &out.pairs())?;
                Ok(g)
            })
            .collect::<Result<_>>()?;
        Ok(per_rep.concat())
    };
    while iterations < 20 {
        iterations += 1;
        let g = gaps_at(lambda)?;
        let next = fit_noise_gaps(target_accuracy, &g)?;
        if (next - lambda).abs() <= 1e-3 * lambda || next == last {
            lambda = next;
            break;
        }
        last = lambda;
        lambda = next;
    }
    let g = gaps_at(lambda)?;
    Ok(Calibration { lambda, expected_accuracy: accuracy_from_gaps(&g, lambda), iterations })
}

/// Picks `k` users whose scores spread over the whole distribution: one
/// quantile level per stratum of `(0, 1)`, mapped through the empirical
/// inverse CDF, then matched to the nearest user not yet chosen.
pub fn sample_targets(scores: &[(String, f64)], k: usize, seed: u64) -> Result<Vec<String>> {
    let n = scores.len();
    if k > n {
        return Err(Error::Domain(format!("cannot select {k} targets from {n} users")));
    }
    if let Some((u, s)) = scores.iter().find(|(_, s)| s.is_nan()) {
        return Err(Error::Domain(format!("NaN score {s} for {u:?}")));
    }
    let mut sorted: Vec<&(String, f64)> = scores.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut taken = vec![false; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(k);
    for stratum in 0..k {
        let u = (stratum as f64 + rng.gen::<f64>()) / k as f64;
        let pos = ((u * n as f64).ceil() as usize).clamp(1, n) - 1;
        let q = sorted[pos].1;
        // nearest untaken by score; on equal distance the lower position wins
        let mut best: Option<usize> = None;
        let (mut lo, mut hi) = (pos as isize, pos + 1);
        while lo >= 0 || hi < n {
            if lo >= 0 {
                let i = lo as usize;
                if !taken[i] && best.map_or(true, |b| (sorted[i].1 - q).abs() <= (sorted[b].1 - q).abs()) {
                    best = Some(i);
                }
                lo -= 1;
            }
            if hi < n {
                if !taken[hi] && best.map_or(true, |b| (sorted[hi].1 - q).abs() < (sorted[b].1 - q).abs()) {
                    best = Some(hi);
                }
                hi += 1;
            }
            if let Some(b) = best {
                let d = (sorted[b].1 - q).abs();
                let lo_done = lo < 0 || q - sorted[lo as usize].1 > d;
                let hi_done = hi >= n || sorted[hi].1 - q > d;
                if lo_done && hi_done {
                    break;
                }
            }
        }
        let b = best.expect("k <= n leaves an untaken user");
        taken[b] = true;
        out.push(sorted[b].0.clone());
    }
    Ok(out)
}
