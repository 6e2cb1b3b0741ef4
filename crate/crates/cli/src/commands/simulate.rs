use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde_json::json;

use influence_core::ranking::{read_records, write_ranking_csv, write_records, ComparisonRecord};
use influence_core::seed::derive_seed;
use influence_core::simulation::{
    accuracy_curve, budget_grid, calibrate_lambda, fit_noise, log_grid, sample_intensities, simulate, target_ids,
    write_curve_csv, write_grid_csv, BudgetGridConfig, SimulationConfig,
};

use crate::args::{BudgetGridArgs, FitNoiseArgs, NoiseCurveArgs, SimulateArgs};
use crate::config::RunConfig;
use crate::error::{data, usage, CliError, Result};
use crate::output::{create_output, create_with_header, echo_config, open_input, read_scores, Provenance};

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create_output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_log(path: &Path) -> Result<Vec<ComparisonRecord>> {
    read_records(open_input(path)?).map_err(|e| data(format!("{}: {e}", path.display())))
}

pub fn simulate_cmd(args: &SimulateArgs, cfg: &RunConfig) -> Result<()> {
    let sim = cfg.simulation()?;
    let prov = Provenance::new("simulate", cfg);
    let out = simulate(&sim)?;

    if let Some(path) = &args.records {
        write_records(create_with_header(path, &prov)?, &out.records)?;
    }
    if let Some(path) = &args.truth {
        let mut w = csv::Writer::from_writer(create_with_header(path, &prov)?);
        w.write_record(["target", "theta"])?;
        for (t, theta) in out.targets.iter().zip(&out.theta) {
            w.write_record([t.as_str(), &theta.to_string()])?;
        }
        w.flush()?;
    }
    if let Some(path) = &args.ranking {
        write_ranking_csv(create_with_header(path, &prov)?, &out.fit.model)?;
    }
    let summary = json!({
        "provenance": prov.json(),
        "n_targets": sim.n_targets,
        "budget": sim.budget,
        "lambda": sim.lambda,
        "comparisons": out.records.len(),
        "runs_completed": out.runs_completed,
        "truncated": out.truncated,
        "converged": out.fit.converged,
        "iterations": out.fit.iterations,
        "spearman": out.spearman,
        "empirical_accuracy": out.empirical_accuracy,
        "expected_accuracy": out.expected_accuracy,
    });
    write_json(&args.summary, &summary)?;
    if !out.fit.converged {
        return Err(CliError::NonConvergence(format!(
            "fit stopped after {} iterations with gradient {:e}",
            out.fit.iterations, out.fit.max_gradient
        )));
    }
    Ok(())
}

pub fn budget_grid_cmd(args: &BudgetGridArgs, cfg: &mut RunConfig) -> Result<()> {
    let n_list = if args.n_list.is_empty() { vec![cfg.simulation.n_targets] } else { args.n_list.clone() };
    let budgets = if args.budgets.is_empty() { vec![cfg.simulation.budget] } else { args.budgets.clone() };
    let mut probe = cfg.clone();
    for (&n, &b) in n_list.iter().flat_map(|n| budgets.iter().map(move |b| (n, b))) {
        probe.simulation.n_targets = n;
        probe.simulation.budget = b;
        probe.simulation()?;
    }
    if let Some(acc) = args.calibrate {
        if !(acc > 0.5 && acc < 1.0) {
            return Err(usage(format!("calibration accuracy must lie in (0.5, 1), got {acc}")));
        }
        let base = SimulationConfig {
            n_targets: *n_list.last().expect("non-empty"),
            budget: *budgets.last().expect("non-empty"),
            ..cfg.simulation()?
        };
        let cal = calibrate_lambda(acc, &base, cfg.simulation.replications)?;
        eprintln!(
            "# calibrated lambda = {} (expected accuracy {:.4}, {} iterations)",
            cal.lambda, cal.expected_accuracy, cal.iterations
        );
        if (cal.expected_accuracy - acc).abs() > 0.01 {
            return Err(CliError::NonConvergence(format!(
                "calibration settled at accuracy {:.4}, not {acc}",
                cal.expected_accuracy
            )));
        }
        cfg.simulation.lambda = cal.lambda;
    }
    echo_config("budget-grid", cfg);
    let s = &cfg.simulation;
    let grid = BudgetGridConfig {
        n_list,
        budgets,
        lambda: s.lambda,
        exponent: s.exponent,
        transform: s.transform,
        replications: s.replications,
        runs_cap: s.runs_cap,
        seed: cfg.seed,
    };
    let prov = Provenance::new("budget-grid", cfg);
    let cells = budget_grid(&grid)?;
    write_grid_csv(create_with_header(&args.out, &prov)?, &cells)?;
    Ok(())
}

/// Maps each record to indices into `ids`.
fn record_pairs(records: &[ComparisonRecord], ids: &[String]) -> Result<Vec<(usize, usize)>> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    records
        .iter()
        .map(|r| match (index.get(r.left.as_str()), index.get(r.right.as_str())) {
            (Some(&l), Some(&rt)) => Ok((l, rt)),
            _ => Err(data(format!("pair ({}, {}) has no proxy score", r.left, r.right))),
        })
        .collect()
}

pub fn fit_noise_cmd(args: &FitNoiseArgs, cfg: &RunConfig) -> Result<()> {
    let records = read_log(&args.records)?;
    let proxy = read_scores(&args.proxy, args.proxy_column.as_deref())?;
    let ids: Vec<String> = proxy.iter().map(|(t, _)| t.clone()).collect();
    let theta: Vec<f64> = proxy.iter().map(|(_, s)| *s).collect();
    let pairs = record_pairs(&records, &ids)?;
    if pairs.is_empty() {
        return Err(data(format!("{} holds no comparisons", args.records.display())));
    }

    let (observed, source) = if let Some(a) = args.accuracy {
        (a, "flag")
    } else if let Some(path) = &args.summary {
        let v: serde_json::Value = serde_json::from_reader(open_input(path)?)?;
        let a = v["expected_accuracy"]
            .as_f64()
            .ok_or_else(|| data(format!("{} has no expected_accuracy", path.display())))?;
        (a, "summary")
    } else {
        let agree: f64 = records
            .iter()
            .zip(&pairs)
            .map(|(r, &(l, rt))| {
                let (lt, rtt) = (theta[l], theta[rt]);
                if lt == rtt {
                    0.5
                } else if (r.winner == r.left) == (lt > rtt) {
                    1.0
                } else {
                    0.0
                }
            })
            .sum();
        (agree / records.len() as f64, "records")
    };
    if !(observed.is_finite() && (0.0..=1.0).contains(&observed)) {
        return Err(usage(format!("observed accuracy must lie in [0, 1], got {observed}")));
    }
    let lambda = fit_noise(observed, &theta, &pairs)?;
    let prov = Provenance::new("fit-noise", cfg);
    write_json(
        &args.out,
        &json!({
            "provenance": prov.json(),
            "observed_accuracy": observed,
            "accuracy_source": source,
            "pairs": pairs.len(),
            "lambda": lambda,
        }),
    )
}

pub fn noise_curve_cmd(args: &NoiseCurveArgs, cfg: &RunConfig) -> Result<()> {
    if args.points < 2 || !(args.lambda_min > 0.0 && args.lambda_max > args.lambda_min) {
        return Err(usage("need at least 2 points and 0 < lambda-min < lambda-max"));
    }
    let (ids, theta) = match &args.truth {
        Some(path) => {
            let s = read_scores(path, None)?;
            (s.iter().map(|(t, _)| t.clone()).collect::<Vec<_>>(), s.iter().map(|(_, v)| *v).collect::<Vec<_>>())
        }
        None => {
            let sim = cfg.simulation()?;
            let raw = sample_intensities(sim.n_targets, sim.exponent, derive_seed(sim.seed, &[0]))?;
            (target_ids(sim.n_targets), sim.transform.apply(&raw))
        }
    };
    let pairs = match &args.records {
        Some(path) => record_pairs(&read_log(path)?, &ids)?,
        None => (0..ids.len()).flat_map(|i| (i + 1..ids.len()).map(move |j| (i, j))).collect(),
    };
    let points = accuracy_curve(&theta, &pairs, &log_grid(args.lambda_min, args.lambda_max, args.points))?;
    let prov = Provenance::new("noise-curve", cfg);
    write_curve_csv(create_with_header(&args.out, &prov)?, &points)?;
    Ok(())
}
