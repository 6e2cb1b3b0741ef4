//! Bradley-Terry with a noise temperature: `P(i ≺ j) = σ((θ_j − θ_i) / λ)`,
//! read as "j is judged more influential than i".

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::records::PairwiseComparisonMatrix;
use crate::error::{Error, Result};
use crate::metrics::Ranking;

/// Weight of the `ε Σθ²` term that keeps the optimum finite.
pub const BT_L2_PENALTY: f64 = 1e-4;
const GRADIENT_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 10_000;

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn ln_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoisyBTModel {
    targets: Vec<String>,
    theta: Vec<f64>,
    lambda: f64,
    index: HashMap<String, usize>,
}

impl NoisyBTModel {
    pub fn new(targets: Vec<String>, theta: Vec<f64>, lambda: f64) -> Result<Self> {
        if targets.len() != theta.len() {
            return Err(Error::Dimension { expected: targets.len(), found: theta.len() });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("noise lambda must be positive and finite, got {lambda}")));
        }
        if let Some(t) = theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::Domain(format!("non-finite intensity {t}")));
        }
        let mut index = HashMap::with_capacity(targets.len());
        for (i, t) in targets.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Domain(format!("duplicate target {t:?}")));
            }
        }
        Ok(Self { targets, theta, lambda, index })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta(&self, target: &str) -> Result<f64> {
        self.index.get(target).map(|&i| self.theta[i]).ok_or_else(|| Error::UnknownTarget(target.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.targets.iter().map(String::as_str).zip(self.theta.iter().copied())
    }

    /// Best first; ties broken by target id.
    pub fn ranking(&self) -> Ranking {
        Ranking::from_scores(self.iter()).expect("finite thetas and distinct targets")
    }
}

/// Probability that `j` is preferred to `i`.
pub fn bt_probability(model: &NoisyBTModel, i: &str, j: &str) -> Result<f64> {
    let (ti, tj) = (model.theta(i)?, model.theta(j)?);
    Ok(logistic((tj - ti) / model.lambda))
}

/// A fitted model and how the optimizer ended.
#[derive(Clone, Debug)]
pub struct BtFit {
    pub model: NoisyBTModel,
    pub converged: bool,
    pub iterations: usize,
    pub max_gradient: f64,
}

struct Pair {
    i: usize,
    j: usize,
    /// i beat j
    wins_i: f64,
    /// j beat i
    wins_j: f64,
}

fn objective(pairs: &[Pair], theta: &[f64], lambda: f64) -> f64 {
    let mut ll = 0.0;
    for p in pairs {
        let d = (theta[p.i] - theta[p.j]) / lambda;
        if p.wins_i > 0.0 {
            ll += p.wins_i * ln_logistic(d);
        }
        if p.wins_j > 0.0 {
            ll += p.wins_j * ln_logistic(-d);
        }
    }
    ll - BT_L2_PENALTY * theta.iter().map(|t| t * t).sum::<f64>()
}

/// Maximizes the penalized log-likelihood of the observed wins by damped
/// Newton steps, then recentres to `Σθ = 0`.
pub fn bt_fit(counts: &PairwiseComparisonMatrix, lambda: f64) -> Result<BtFit> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("noise lambda must be positive and finite, got {lambda}")));
    }
    if counts.total() == 0 {
        return Err(Error::Empty("no comparisons to fit"));
    }
    let n = counts.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (counts.count(i, j), counts.count(j, i));
            if a + b > 0 {
                pairs.push(Pair { i, j, wins_i: a as f64, wins_j: b as f64 });
            }
        }
    }

    let mut theta = vec![0.0; n];
    let mut value = objective(&pairs, &theta, lambda);
    let mut grad = DVector::<f64>::zeros(n);
    let mut hess = DMatrix::<f64>::zeros(n, n);
    let mut iterations = 0;
    let mut max_gradient;
    loop {
        // gradient and negated Hessian
        grad.fill(0.0);
        hess.fill(0.0);
        for (k, t) in theta.iter().enumerate() {
            grad[k] = -2.0 * BT_L2_PENALTY * t;
            hess[(k, k)] = 2.0 * BT_L2_PENALTY;
        }
        for p in &pairs {
            let s = logistic((theta[p.i] - theta[p.j]) / lambda);
            let g = (p.wins_i - (p.wins_i + p.wins_j) * s) / lambda;
            grad[p.i] += g;
            grad[p.j] -= g;
            let h = (p.wins_i + p.wins_j) * s * (1.0 - s) / (lambda * lambda);
            hess[(p.i, p.i)] += h;
            hess[(p.j, p.j)] += h;
            hess[(p.i, p.j)] -= h;
            hess[(p.j, p.i)] -= h;
        }
        max_gradient = grad.amax();
        if max_gradient < GRADIENT_TOL || iterations >= MAX_ITERATIONS {
            break;
        }
        iterations += 1;

        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let v = objective(&pairs, &trial, lambda);
            if v >= value + 1e-4 * t * slope || (value - v).abs() <= 1e-13 * value.abs().max(1.0) {
                theta = trial;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let mean = theta.iter().sum::<f64>() / n as f64;
    theta.iter_mut().for_each(|t| *t -= mean);
    let converged = max_gradient < GRADIENT_TOL;
    if !converged {
        log::warn!("Bradley-Terry fit stopped after {iterations} iterations with max gradient {max_gradient:e}");
    }
    Ok(BtFit {
        model: NoisyBTModel::new(counts.targets().to_vec(), theta, lambda)?,
        converged,
        iterations,
        max_gradient,
    })
}

/// `target,theta,rank,percentile`, best first.
pub fn write_ranking_csv<W: Write>(w: W, model: &NoisyBTModel) -> Result<()> {
    let ranking = model.ranking();
    let n = ranking.len() as f64;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["target", "theta", "rank", "percentile"])?;
    for (pos, id) in ranking.order().iter().enumerate() {
        let rank = pos + 1;
        out.write_record([
            id.clone(),
            format!("{}", model.theta(id)?),
            rank.to_string(),
            format!("{}", rank as f64 / n),
        ])?;
    }
    out.flush()?;
    Ok(())
}
