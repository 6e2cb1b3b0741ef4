mod common;

use std::path::Path;

use common::{fixture, get, run, write_profiles, Server};
use serde_json::Value;

fn ok(out: &std::process::Output) {
    assert!(out.status.success(), "exit {:?}\nstderr:\n{}", out.status.code(), String::from_utf8_lossy(&out.stderr));
}

fn body(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn two_events(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("two.jsonl");
    std::fs::write(
        &path,
        r#"{"cascade_id":"x","events":[{"user":"a","t":0,"mark":10},{"user":"b","t":5,"mark":3}]}
"#,
    )
    .unwrap();
    path
}

fn user_scores(path: &Path) -> Vec<(String, f64)> {
    body(path)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap())
        })
        .collect()
}

fn golden_args(users: &Path, tweets: &Path, threads: &str) -> Vec<String> {
    let mut args = vec!["influence".to_string(), "--config".into(), p(&fixture("golden.toml")).into()];
    args.extend(["--cascades".into(), p(&fixture("cascades.jsonl")).into()]);
    args.extend(["--out".into(), p(users).into(), "--tweets-out".into(), p(tweets).into()]);
    args.extend(["--threads".into(), threads.into()]);
    args
}

#[test]
fn golden_outputs_for_every_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let docs = fixture("documents.jsonl");
    for threads in ["1", "4"] {
        let (u, t) = (dir.path().join(format!("u{threads}.csv")), dir.path().join(format!("t{threads}.csv")));
        let mut args = golden_args(&u, &t, threads);
        args.extend(["--documents".into(), p(&docs).into()]);
        ok(&run(&args));
        assert_eq!(std::fs::read_to_string(&u).unwrap(), std::fs::read_to_string(fixture("golden_users.csv")).unwrap());
        assert_eq!(std::fs::read_to_string(&t).unwrap(), std::fs::read_to_string(fixture("golden_tweets.csv")).unwrap());
    }
}

#[test]
fn embedding_cache_reproduces_golden() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("lexical.cache");
    let golden = fixture("golden.toml");
    ok(&run(&["embed", "--config", p(&golden), "--documents", p(&fixture("documents.jsonl")), "--out", p(&cache), "--built-at", "0"]));
    let (u, t) = (dir.path().join("u.csv"), dir.path().join("t.csv"));
    let mut args = golden_args(&u, &t, "2");
    args.extend(["--embeddings".into(), p(&cache).into()]);
    ok(&run(&args));
    assert_eq!(body(&u), body(&fixture("golden_users.csv")));
    assert_eq!(body(&t), body(&fixture("golden_tweets.csv")));

    // a cache built for a different lens is refused
    let mut args = golden_args(&u, &t, "1");
    args.extend(["--embeddings", p(&cache), "--conductance", "following"].map(String::from));
    assert_eq!(run(&args).status.code(), Some(2));
}

#[test]
fn two_event_cascade_with_capital() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    ok(&run(&["influence", "--cascades", p(&two_events(dir.path())), "--alpha", "0.02", "--out", p(&out)]));
    let s = user_scores(&out);
    assert_eq!(s[0].0, "a");
    assert!((s[0].1 - 1.02).abs() < 1e-12 && (s[1].1 - 0.98).abs() < 1e-12, "{s:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# influence influence"));
    assert!(text.contains("# config_sha256: "));
}

#[test]
fn baseline_without_conductance_or_capital() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    ok(&run(&[
        "influence",
        "--cascades",
        p(&two_events(dir.path())),
        "--conductance",
        "none",
        "--alpha",
        "disabled",
        "--out",
        p(&out),
    ]));
    assert_eq!(user_scores(&out), vec![("a".to_string(), 2.0), ("b".to_string(), 1.0)]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let two = two_events(dir.path());
    assert_eq!(run(&["influence", "--cascades", p(&two), "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["influence", "--cascades", p(&two), "--alpha", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["influence", "--cascades", p(&two), "--conductance", "lexical"]).status.code(), Some(2));
    assert_eq!(run(&["influence", "--cascades", p(&dir.path().join("missing"))]).status.code(), Some(3));

    let bad = dir.path().join("bad.jsonl");
    let mut text = std::fs::read_to_string(&two).unwrap();
    text.push_str("{not json\n");
    text.push_str(r#"{"cascade_id":"y","events":[{"user":"c","t":3,"mark":1},{"user":"d","t":-1,"mark":1}]}"#);
    text.push('\n');
    std::fs::write(&bad, text).unwrap();
    let out = dir.path().join("u.csv");
    assert_eq!(run(&["influence", "--cascades", p(&bad), "--out", p(&out)]).status.code(), Some(3));
    ok(&run(&["influence", "--cascades", p(&bad), "--out", p(&out), "--skip-bad"]));
    assert_eq!(user_scores(&out).len(), 2);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[capital]\nalpha = 0.5\n").unwrap();
    let out = dir.path().join("u.csv");
    let two = two_events(dir.path());
    ok(&run(&["influence", "--config", p(&cfg), "--cascades", p(&two), "--out", p(&out)]));
    assert!((user_scores(&out)[0].1 - 1.5).abs() < 1e-12);
    ok(&run(&["influence", "--config", p(&cfg), "--cascades", p(&two), "--alpha", "0.02", "--out", p(&out)]));
    assert!((user_scores(&out)[0].1 - 1.02).abs() < 1e-12);

    std::fs::write(&cfg, "[capital]\nalfa = 0.5\n").unwrap();
    assert_eq!(run(&["influence", "--config", p(&cfg), "--cascades", p(&two)]).status.code(), Some(2));
}

#[test]
fn budget_grid_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    ok(&run(&[
        "budget-grid",
        "--targets",
        "20,40",
        "--budgets",
        "100,400",
        "--replications",
        "1",
        "--seed",
        "5",
        "--out",
        p(&out),
    ]));
    let text = body(&out);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n,budget,mean_spearman,stddev,replications");
    assert_eq!(rows.len(), 5);
}

#[test]
fn simulate_then_fit_noise_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for lambda in ["0.3", "1.22", "5"] {
        let (records, truth, summary, fitted) = (
            dir.path().join("r.jsonl"),
            dir.path().join("truth.csv"),
            dir.path().join("s.json"),
            dir.path().join("fit.json"),
        );
        ok(&run(&[
            "simulate",
            "--targets",
            "100",
            "--budget",
            "3000",
            "--lambda",
            lambda,
            "--seed",
            "3",
            "--records",
            p(&records),
            "--truth",
            p(&truth),
            "--summary",
            p(&summary),
        ]));
        ok(&run(&["fit-noise", "--records", p(&records), "--proxy", p(&truth), "--summary", p(&summary), "--out", p(&fitted)]));
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&fitted).unwrap()).unwrap();
        let got = v["lambda"].as_f64().unwrap();
        let want: f64 = lambda.parse().unwrap();
        assert!((got - want).abs() < 1e-3, "lambda {want}: fitted {got}");
        assert_eq!(v["accuracy_source"], "summary");
    }
}

#[test]
fn rank_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let (records, truth, ranking, report) =
        (dir.path().join("r.jsonl"), dir.path().join("t.csv"), dir.path().join("rank.csv"), dir.path().join("e.json"));
    ok(&run(&[
        "simulate",
        "--targets",
        "60",
        "--budget",
        "2000",
        "--lambda",
        "0.05",
        "--seed",
        "9",
        "--records",
        p(&records),
        "--truth",
        p(&truth),
        "--summary",
        p(&dir.path().join("s.json")),
    ]));
    ok(&run(&["rank", "--records", p(&records), "--lambda", "0.05", "--out", p(&ranking)]));
    ok(&run(&["eval", "--estimate", p(&ranking), "--truth", p(&truth), "--out", p(&report)]));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["n"], 60);
    assert!(v["spearman"].as_f64().unwrap() > 0.9, "{v}");
    for key in ["auc_ndcg", "mape", "kendall"] {
        assert!(v[key].is_number(), "{key} missing from {v}");
    }
}

#[test]
fn noise_curve_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let curve = |transform: &str| -> Vec<f64> {
        ok(&run(&["noise-curve", "--targets", "200", "--seed", "4", "--transform", transform, "--out", p(&out)]));
        body(&out).lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
    };
    let raw = curve("raw");
    assert_eq!(raw.len(), 20);
    assert!(raw.windows(2).all(|w| w[1] < w[0]));
    assert!(raw[0] > 0.99 && raw[19] > 0.5 && raw[19] < 0.51);
    let pct = curve("percentile");
    assert!(pct.windows(2).all(|w| w[1] < w[0]));
    assert!((pct[19] - 0.5).abs() < 1e-3);
}

#[test]
fn serve_answers_on_an_ephemeral_port() {
    let dir = tempfile::tempdir().unwrap();
    let (targets, proxies) = write_profiles(dir.path(), 12);
    let srv = Server::start(&targets, &proxies, &dir.path().join("log.jsonl"), 1, 1);
    let (code, status) = get(&format!("{}/api/status", srv.base));
    assert_eq!(code, 200);
    assert_eq!(status["runs_requested"], 1);
    let tasks = common::fetch(&srv.base, "w");
    assert!(!tasks.is_empty());
    srv.kill();
}
