#![allow(dead_code)]

use std::collections::HashSet;
use std::ffi::OsStr;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_influence")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn run<S: AsRef<OsStr>>(args: &[S]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

pub fn get(url: &str) -> (u16, Value) {
    let mut r = agent().get(url).call().expect("request");
    (r.status().as_u16(), r.body_mut().read_json().expect("json body"))
}

pub fn post(url: &str, body: Value) -> (u16, Value) {
    let mut r = agent().post(url).send_json(&body).expect("request");
    (r.status().as_u16(), r.body_mut().read_json().expect("json body"))
}

/// Writes `n` targets with distinct follower counts and three proxies.
pub fn write_profiles(dir: &Path, n: usize) -> (PathBuf, PathBuf) {
    let targets = dir.join("targets.jsonl");
    let proxies = dir.join("proxies.jsonl");
    let mut t = String::new();
    for i in 0..n {
        let p = json!({
            "target_id": format!("t{i:03}"),
            "name": format!("Target {i}"),
            "description": "fixture account",
            "followers": 1000 + ((i * 37) % n) as u64 * 10,
            "followees": 10,
            "statuses": 100,
            "profile_url": format!("https://example.org/t{i:03}"),
            "image_url": "",
            "sample_tweets": ["one", "two", "three", "four", "five"],
        });
        t.push_str(&format!("{p}\n"));
    }
    std::fs::write(&targets, t).unwrap();
    let mut p = String::new();
    for i in 0..3 {
        p.push_str(&format!("{}\n", json!({"target_id": format!("proxy{i}"), "name": "Proxy", "followers": 5, "followees": 5, "statuses": 5})));
    }
    std::fs::write(&proxies, p).unwrap();
    (targets, proxies)
}

pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(targets: &Path, proxies: &Path, log: &Path, runs: u32, seed: u64) -> Server {
        let mut child = Command::new(bin())
            .args(["serve", "--port", "0", "--seed", &seed.to_string(), "--runs", &runs.to_string()])
            .arg("--targets")
            .arg(targets)
            .arg("--proxies")
            .arg(proxies)
            .arg("--log")
            .arg(log)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("serve starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().expect("stdout")).read_line(&mut line).expect("port line");
        let base = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected line {line:?}")).to_string();
        Server { child, base }
    }

    /// SIGKILL; nothing gets a chance to flush.
    pub fn kill(mut self) {
        self.child.kill().expect("kill");
        self.child.wait().expect("reap");
    }

    pub fn status(&self) -> Value {
        get(&format!("{}/api/status", self.base)).1
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Fetches one batch for `worker`.
pub fn fetch(base: &str, worker: &str) -> Vec<Value> {
    let (code, body) = get(&format!("{base}/api/batch?worker_id={worker}"));
    assert_eq!(code, 200, "batch request failed: {body}");
    body.as_array().expect("batch is an array").clone()
}

/// Answers every task with the target that has more followers.
pub fn answer(base: &str, worker: &str, tasks: &[Value]) {
    let responses: Vec<Value> = tasks
        .iter()
        .map(|t| {
            let (l, r) = (&t["left"], &t["right"]);
            let choice = if l["followers"].as_u64() >= r["followers"].as_u64() { &l["target_id"] } else { &r["target_id"] };
            json!({"task_id": t["task_id"], "choice": choice})
        })
        .collect();
    let (code, body) = post(&format!("{base}/api/responses"), json!({"worker_id": worker, "responses": responses}));
    assert_eq!(code, 200, "responses rejected: {body}");
}

/// Answers batches until `done` holds for the status or `timeout` passes.
pub fn respond_until(server: &Server, worker: &str, timeout: Duration, done: impl Fn(&Value) -> bool) -> bool {
    let start = Instant::now();
    while start.elapsed() < timeout {
        if done(&server.status()) {
            return true;
        }
        let tasks = fetch(&server.base, worker);
        if tasks.is_empty() {
            std::thread::sleep(Duration::from_millis(10));
        } else {
            answer(&server.base, worker, &tasks);
        }
    }
    done(&server.status())
}

/// The log with lease events dropped and response timestamps zeroed, sorted.
pub fn canonical_log(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut out: Vec<String> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<Value>(l).expect("complete lines"))
        .filter(|v| v["event"] != "task_leased")
        .map(|mut v| {
            if v["event"] == "response_recorded" {
                v["timestamp"] = json!(0);
            }
            v.to_string()
        })
        .collect();
    out.sort();
    out
}

/// Unordered pairs issued more than once within a run.
pub fn duplicate_pairs(path: &Path) -> usize {
    let text = std::fs::read_to_string(path).unwrap();
    let mut seen = HashSet::new();
    let mut dups = 0;
    for v in text.lines().filter_map(|l| serde_json::from_str::<Value>(l).ok()) {
        if v["event"] == "task_issued" {
            let (a, b) = (v["left"].as_str().unwrap().to_string(), v["right"].as_str().unwrap().to_string());
            let key = (v["run_id"].as_u64().unwrap(), a.clone().min(b.clone()), a.max(b));
            if !seen.insert(key) {
                dups += 1;
            }
        }
    }
    dups
}

/// Runs the same scripted session twice, once killed with SIGKILL part way and
/// restarted, and compares the resulting logs.
pub fn durability_scenario(dir: &Path) -> Result<String, String> {
    const RUNS: u32 = 2;
    const SEED: u64 = 17;
    let limit = Duration::from_secs(120);
    let (targets, proxies) = write_profiles(dir, 40);
    let finished = |s: &Value| s["runs_completed"].as_u64() == Some(RUNS as u64);

    let reference = dir.join("reference.jsonl");
    {
        let srv = Server::start(&targets, &proxies, &reference, RUNS, SEED);
        if !respond_until(&srv, "w1", limit, finished) {
            return Err("reference session did not finish".into());
        }
        srv.kill();
    }

    let crashed = dir.join("crashed.jsonl");
    let srv = Server::start(&targets, &proxies, &crashed, RUNS, SEED);
    if !respond_until(&srv, "w1", limit, |s| s["comparisons_total"].as_u64() >= Some(120)) {
        return Err("interrupted session made no progress".into());
    }
    let held = fetch(&srv.base, "w1");
    srv.kill();
    let before = std::fs::read_to_string(&crashed).unwrap().lines().count();

    let srv = Server::start(&targets, &proxies, &crashed, RUNS, SEED);
    let resumed = srv.status();
    if !respond_until(&srv, "w1", limit, finished) {
        return Err(format!("restarted session did not finish; status {}", srv.status()));
    }
    let after = srv.status();
    srv.kill();

    let dups = duplicate_pairs(&crashed);
    if dups != 0 {
        return Err(format!("{dups} duplicate pairs within a run"));
    }
    let (a, b) = (canonical_log(&reference), canonical_log(&crashed));
    if a != b {
        let only_ref = a.iter().filter(|l| !b.contains(l)).count();
        let only_crash = b.iter().filter(|l| !a.contains(l)).count();
        return Err(format!("logs differ: {only_ref} events only in the reference, {only_crash} only after the crash"));
    }
    Ok(format!(
        "killed with {} leased tasks after {} log lines ({} comparisons); resumed and finished {} comparisons, {} canonical events identical",
        held.len(),
        before,
        resumed["comparisons_total"],
        after["comparisons_total"],
        a.len()
    ))
}
