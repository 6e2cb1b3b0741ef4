use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use influence_annotate::eventlog::{read_log, Event};
use influence_annotate::*;

fn profile(id: &str, followers: u64) -> TargetProfile {
    TargetProfile {
        target_id: id.into(),
        name: id.to_uppercase(),
        description: String::new(),
        followers,
        followees: 1,
        statuses: 1,
        profile_url: String::new(),
        image_url: String::new(),
        sample_tweets: vec![String::new(); 5],
        padded: true,
    }
}

fn pools(n: usize) -> (Vec<TargetProfile>, Vec<TargetProfile>) {
    let targets = (0..n).map(|i| profile(&format!("t{i:02}"), (i as u64 + 1) * 100)).collect();
    let proxies = (0..3).map(|i| profile(&format!("p{i}"), 5)).collect();
    (targets, proxies)
}

struct Fixture {
    _dir: tempfile::TempDir,
    config: ServiceConfig,
    clock_value: Arc<AtomicU64>,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ServiceConfig::new(dir.path().join("events.jsonl"));
        config.parallelism = 4;
        Self { _dir: dir, config, clock_value: Arc::new(AtomicU64::new(1_000)) }
    }

    fn open(&self, n: usize) -> Arc<Service> {
        let (t, p) = pools(n);
        let c = self.clock_value.clone();
        Service::open(self.config.clone(), t, p, Arc::new(move || c.load(Ordering::SeqCst))).unwrap()
    }
}

/// Queues tasks directly the way the controller does.
fn issue(service: &Arc<Service>, run: u32, pairs: Vec<(String, String)>) -> std::thread::JoinHandle<()> {
    let s = service.clone();
    std::thread::spawn(move || {
        use influence_core::ranking::ComparisonOracle;
        let oracle = ServiceOracle::new(s);
        let refs: Vec<(&str, &str)> = pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let _ = oracle.compare_many(run, &refs);
    })
}

fn wait_for_queue(service: &Service, depth: u64) {
    for _ in 0..500 {
        if service.status().queue_depth >= depth {
            return;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    panic!("queue never reached {depth}");
}

/// Answers every task: the target with more followers wins.
fn answer_all(service: &Service, worker: &str, tasks: &[TaskView]) -> Vec<Ack> {
    let items: Vec<ResponseItem> = tasks
        .iter()
        .map(|t| {
            let choice = if t.left.followers >= t.right.followers { &t.left } else { &t.right };
            ResponseItem { task_id: t.task_id.clone(), choice: choice.target_id.clone(), shown_left: None }
        })
        .collect();
    service.record_responses(worker, &items).unwrap()
}

fn star_pairs(n: usize) -> Vec<(String, String)> {
    (1..n).map(|i| ("t00".to_string(), format!("t{i:02}"))).collect()
}

#[test]
fn batches_of_ten() {
    let fx = Fixture::new();
    let s = fx.open(26);
    let h = issue(&s, 0, star_pairs(26));
    wait_for_queue(&s, 25);
    let sizes: Vec<usize> = ["a", "b", "c", "d"].iter().map(|w| s.serve_batch(w).unwrap().len()).collect();
    assert_eq!(sizes, vec![10, 10, 5, 0]);
    let batch = s.serve_batch("a").unwrap();
    assert_eq!(batch.len(), 10, "a worker with open leases gets them back");
    assert!(batch.iter().all(|t| QUESTIONS.contains(&t.question.as_str())));
    assert!(batch.iter().all(|t| t.proxy.target_id.starts_with('p')));
    for w in ["a", "b", "c"] {
        let tasks = s.serve_batch(w).unwrap();
        answer_all(&s, w, &tasks);
    }
    h.join().unwrap();
    assert_eq!(s.records().len(), 25);
}

#[test]
fn same_pair_never_shares_a_batch() {
    let fx = Fixture::new();
    let s = fx.open(4);
    let h0 = issue(&s, 0, vec![("t00".into(), "t01".into())]);
    wait_for_queue(&s, 1);
    let h1 = issue(&s, 1, vec![("t01".into(), "t00".into()), ("t02".into(), "t03".into())]);
    wait_for_queue(&s, 3);
    let first = s.serve_batch("w").unwrap();
    assert_eq!(first.len(), 2);
    let pairs: HashSet<_> = first
        .iter()
        .map(|t| {
            let mut p = [t.left.target_id.clone(), t.right.target_id.clone()];
            p.sort();
            p
        })
        .collect();
    assert_eq!(pairs.len(), 2);
    answer_all(&s, "w", &first);
    let second = s.serve_batch("w").unwrap();
    assert_eq!(second.len(), 1);
    answer_all(&s, "w", &second);
    h0.join().unwrap();
    h1.join().unwrap();
}

#[test]
fn responses_are_idempotent_and_lease_checked() {
    let fx = Fixture::new();
    let s = fx.open(6);
    let h = issue(&s, 0, star_pairs(6));
    wait_for_queue(&s, 5);
    let tasks = s.serve_batch("alice").unwrap();
    let item = ResponseItem { task_id: tasks[0].task_id.clone(), choice: tasks[0].left.target_id.clone(), shown_left: None };

    let acks = s.record_responses("mallory", std::slice::from_ref(&item)).unwrap();
    assert_eq!(acks[0].status, AckStatus::Rejected);

    let bad = ResponseItem { choice: "p0".into(), ..item.clone() };
    assert_eq!(s.record_responses("alice", &[bad]).unwrap()[0].status, AckStatus::Rejected);

    let acks = s.record_responses("alice", &[item.clone(), item.clone()]).unwrap();
    assert_eq!(acks[0].status, AckStatus::Recorded);
    assert_eq!(acks[1].status, AckStatus::Duplicate);
    assert_eq!(s.record_responses("alice", &[item]).unwrap()[0].status, AckStatus::Duplicate);
    assert_eq!(s.records().len(), 1);

    // the remaining leases expire and go back to the queue
    fx.clock_value.fetch_add(601, Ordering::SeqCst);
    let late = ResponseItem { task_id: tasks[1].task_id.clone(), choice: tasks[1].left.target_id.clone(), shown_left: None };
    assert_eq!(s.record_responses("alice", &[late]).unwrap()[0].status, AckStatus::Expired);
    let again = s.serve_batch("bob").unwrap();
    assert_eq!(again.len(), 4);
    answer_all(&s, "bob", &again);
    h.join().unwrap();
    assert_eq!(s.records().len(), 5);
}

#[test]
fn low_quality_worker_is_banned_for_good() {
    let fx = Fixture::new();
    let n = 120;
    let s = fx.open(n);
    // every pair has a percentile gap well above 0.2
    let mut pairs = Vec::new();
    for i in 0..40 {
        for j in (i + 50)..(i + 53) {
            pairs.push((format!("t{i:02}"), format!("t{j:02}")));
        }
    }
    let h = issue(&s, 0, pairs);
    wait_for_queue(&s, 120);
    let mut answered = 0;
    while answered < 100 {
        let tasks = s.serve_batch("bad").unwrap();
        let items: Vec<ResponseItem> = tasks
            .iter()
            .map(|t| {
                let wrong = if t.left.followers < t.right.followers { &t.left } else { &t.right };
                ResponseItem { task_id: t.task_id.clone(), choice: wrong.target_id.clone(), shown_left: None }
            })
            .collect();
        let acks = s.record_responses("bad", &items).unwrap();
        answered += acks.iter().filter(|a| a.status == AckStatus::Recorded).count();
    }
    assert!(s.is_banned("bad"));
    assert!(matches!(s.serve_batch("bad"), Err(ServiceError::Banned(_))));
    s.shutdown();
    h.join().unwrap();

    // still banned after a restart
    drop(s);
    let s = fx.open(n);
    assert!(matches!(s.serve_batch("bad"), Err(ServiceError::Banned(_))));
    let (_, events) = read_log(&fx.config.log_path).unwrap();
    assert_eq!(events.iter().filter(|e| matches!(e, Event::WorkerBanned { .. })).count(), 1);
}

fn auto_respond(service: Arc<Service>, worker: &'static str) -> std::thread::JoinHandle<()> {
    std::thread::spawn(move || loop {
        if service.is_shut_down() {
            return;
        }
        let tasks = service.serve_batch(worker).unwrap();
        if tasks.is_empty() {
            let st = service.status();
            if st.runs_requested > 0 && st.runs_completed == st.runs_requested {
                return;
            }
            std::thread::sleep(Duration::from_millis(2));
            continue;
        }
        answer_all(&service, worker, &tasks);
    })
}

#[test]
fn controller_runs_sequentially_and_sorts() {
    let fx = Fixture::new();
    let s = fx.open(30);
    s.request_runs(2).unwrap();
    let ctl = spawn_controller(&s).unwrap();
    let responder = auto_respond(s.clone(), "w");
    ctl.join().unwrap().unwrap();
    responder.join().unwrap();

    let runs = s.completed_runs();
    assert_eq!(runs.len(), 2);
    let expected: Vec<String> = (0..30).rev().map(|i| format!("t{i:02}")).collect();
    for (_, order) in &runs {
        assert_eq!(order, &expected);
    }
    let records = s.records();
    for run in 0..2 {
        let pairs: HashSet<_> = records.iter().filter(|r| r.run_id == run).map(|r| r.unordered_pair()).collect();
        assert_eq!(pairs.len(), records.iter().filter(|r| r.run_id == run).count());
    }
    // run 1 starts only after run 0 completed
    let (_, events) = read_log(&fx.config.log_path).unwrap();
    let done0 = events.iter().position(|e| matches!(e, Event::RunCompleted { run_id: 0, .. })).unwrap();
    let first1 = events.iter().position(|e| matches!(e, Event::TaskIssued { run_id: 1, .. })).unwrap();
    assert!(done0 < first1);

    let report = s.ranking().unwrap();
    assert_eq!(report.comparisons, records.len());
    assert_eq!(report.ranking[0].target, "t29");
    let st = s.status();
    assert_eq!((st.runs_completed, st.queue_depth, st.open_partitions), (2, 0, 0));
}

#[test]
fn restart_resumes_without_repeating_pairs() {
    let fx = Fixture::new();
    {
        let s = fx.open(25);
        s.request_runs(1).unwrap();
        let ctl = spawn_controller(&s).unwrap();
        // answer some of the questions, then stop
        let mut answered = 0;
        while answered < 30 {
            let tasks = s.serve_batch("w").unwrap();
            if tasks.is_empty() {
                std::thread::sleep(Duration::from_millis(5));
                continue;
            }
            answered += answer_all(&s, "w", &tasks).len();
        }
        s.shutdown();
        assert!(matches!(ctl.join().unwrap(), Err(ServiceError::Shutdown)));
    }
    let s = fx.open(25);
    assert!(s.records().len() >= 30);
    let ctl = spawn_controller(&s).unwrap();
    let responder = auto_respond(s.clone(), "w");
    ctl.join().unwrap().unwrap();
    responder.join().unwrap();
    let records = s.records();
    let pairs: HashSet<_> = records.iter().map(|r| r.unordered_pair()).collect();
    assert_eq!(pairs.len(), records.len());
    let (_, events) = read_log(&fx.config.log_path).unwrap();
    let issued: Vec<_> = events
        .iter()
        .filter_map(|e| match e {
            Event::TaskIssued { task_id, .. } => Some(task_id.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(issued.len(), issued.iter().collect::<HashSet<_>>().len());
    assert_eq!(issued.len(), records.len());
}
