use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde_json::json;

use influence_core::metrics::{auc_ndcg, kendall_tau, mape_percentile, spearman, Ranking};
use influence_core::ranking::{bt_fit, read_records, write_ranking_csv, PairwiseComparisonMatrix};

use crate::args::{EvalArgs, RankArgs};
use crate::config::RunConfig;
use crate::error::{data, CliError, Result};
use crate::output::{create_output, create_with_header, open_input, read_scores, Provenance};

pub fn rank_cmd(args: &RankArgs, cfg: &RunConfig) -> Result<()> {
    let lambda = cfg.ranking_lambda()?;
    let records =
        read_records(open_input(&args.records)?).map_err(|e| data(format!("{}: {e}", args.records.display())))?;
    if records.is_empty() {
        return Err(data(format!("{} holds no comparisons", args.records.display())));
    }
    let counts = match &args.targets {
        Some(path) => {
            let mut targets = BTreeSet::new();
            for line in open_input(path)?.lines() {
                let line = line?;
                let t = line.trim();
                if !t.is_empty() && !t.starts_with('#') {
                    targets.insert(t.to_string());
                }
            }
            PairwiseComparisonMatrix::with_targets(targets.into_iter().collect(), &records)?
        }
        None => PairwiseComparisonMatrix::from_records(&records)?,
    };
    let fit = bt_fit(&counts, lambda)?;
    let prov = Provenance::new("rank", cfg);
    write_ranking_csv(create_with_header(&args.out, &prov)?, &fit.model)?;
    eprintln!(
        "# {} comparisons over {} targets, {} iterations, max gradient {:e}",
        records.len(),
        counts.len(),
        fit.iterations,
        fit.max_gradient
    );
    if !fit.converged {
        return Err(CliError::NonConvergence(format!(
            "fit stopped after {} iterations with gradient {:e}; the ranking is unreliable",
            fit.iterations, fit.max_gradient
        )));
    }
    Ok(())
}

pub fn eval_cmd(args: &EvalArgs, cfg: &RunConfig) -> Result<()> {
    let estimate = read_scores(&args.estimate, args.estimate_column.as_deref())?;
    let truth = read_scores(&args.truth, args.truth_column.as_deref())?;
    let truth_map: HashMap<&str, f64> = truth.iter().map(|(t, s)| (t.as_str(), *s)).collect();
    let common: Vec<(&str, f64, f64)> = estimate
        .iter()
        .filter_map(|(t, s)| truth_map.get(t.as_str()).map(|&v| (t.as_str(), *s, v)))
        .collect();
    if common.len() < 2 {
        return Err(data("estimate and truth share fewer than two ids"));
    }
    let dropped = estimate.len() + truth.len() - 2 * common.len();
    if dropped > 0 {
        log::warn!("{dropped} ids appear in only one of the inputs and are ignored");
    }
    let est_scores: Vec<f64> = common.iter().map(|c| c.1).collect();
    let truth_scores: Vec<f64> = common.iter().map(|c| c.2).collect();
    let est_rank = Ranking::from_scores(common.iter().map(|c| (c.0, c.1)))?;
    let truth_rank = Ranking::from_scores(common.iter().map(|c| (c.0, c.2)))?;
    let record = json!({
        "provenance": Provenance::new("eval", cfg).json(),
        "n": common.len(),
        "auc_ndcg": auc_ndcg(&est_rank, &truth_rank)?,
        "mape": mape_percentile(&est_rank, &truth_rank)?,
        "spearman": spearman(&est_scores, &truth_scores)?,
        "kendall": kendall_tau(&est_scores, &truth_scores)?,
    });
    let mut w = create_output(&args.out)?;
    serde_json::to_writer_pretty(&mut w, &record)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
