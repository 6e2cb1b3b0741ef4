use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use influence_core::ranking::{bt_fit, ComparisonRecord, PairwiseComparisonMatrix};
use influence_core::seed::{derive_seed, hash_str};

use crate::error::{Result, ServiceError};
use crate::eventlog::{Event, EventLog, LogHeader, LOG_VERSION};
use crate::profile::{follower_percentiles, TargetProfile};
use crate::quality::{update_quality, DEFAULT_BAN_THRESHOLD};
use crate::state::{FoldContext, State};

pub const QUESTIONS: [&str; 3] = [
    "Which user is the proxy user most likely to retweet?",
    "Who will the proxy user be more socially influenced by?",
    "Which user would sway the proxy users opinion more?",
];

pub const DEFAULT_BATCH_SIZE: usize = 10;
pub const DEFAULT_LEASE_TIMEOUT_SECS: u64 = 600;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub log_path: PathBuf,
    pub seed: u64,
    /// Noise used for the live ranking estimate.
    pub lambda: f64,
    pub ban_threshold: f64,
    pub lease_timeout_secs: u64,
    pub batch_size: usize,
    /// Quicksort partitions with questions in flight at once.
    pub parallelism: usize,
}

impl ServiceConfig {
    pub fn new(log_path: impl Into<PathBuf>) -> Self {
        Self {
            log_path: log_path.into(),
            seed: 0,
            lambda: 1.22,
            ban_threshold: DEFAULT_BAN_THRESHOLD,
            lease_timeout_secs: DEFAULT_LEASE_TIMEOUT_SECS,
            batch_size: DEFAULT_BATCH_SIZE,
            parallelism: 64,
        }
    }
}

/// Seconds since the Unix epoch, or a test substitute.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub task_id: String,
    pub run_id: u32,
    pub left: TargetProfile,
    pub right: TargetProfile,
    pub proxy: TargetProfile,
    pub question_id: u8,
    pub question: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseItem {
    pub task_id: String,
    pub choice: String,
    /// Target displayed on the left, as reported by the client.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shown_left: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckStatus {
    Recorded,
    Duplicate,
    /// The lease ran out; the task went back to the queue.
    Expired,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub task_id: String,
    pub status: AckStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Ack {
    fn new(task_id: &str, status: AckStatus, reason: Option<&str>) -> Self {
        Self { task_id: task_id.to_string(), status, reason: reason.map(str::to_string) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Status {
    /// Run currently being sorted.
    pub run: Option<u32>,
    pub runs_requested: u32,
    pub runs_completed: u32,
    pub comparisons_total: u64,
    pub queue_depth: u64,
    pub open_partitions: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub target: String,
    pub theta: f64,
    pub rank: usize,
    pub percentile: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub lambda: f64,
    pub comparisons: usize,
    pub converged: bool,
    pub ranking: Vec<RankingRow>,
}

pub(crate) struct Inner {
    log: EventLog,
    pub(crate) state: State,
    pub(crate) controller_running: bool,
}

pub struct Service {
    config: ServiceConfig,
    header: LogHeader,
    profiles: HashMap<String, TargetProfile>,
    target_index: HashMap<String, usize>,
    ctx: FoldContext,
    inner: Mutex<Inner>,
    answered: Condvar,
    clock: Clock,
    open_partitions: AtomicUsize,
    shutdown: AtomicBool,
}

impl Service {
    /// Opens (or creates) the event log and rebuilds state from it.
    pub fn open(
        config: ServiceConfig,
        targets: Vec<TargetProfile>,
        proxies: Vec<TargetProfile>,
        clock: Clock,
    ) -> Result<Arc<Self>> {
        if targets.len() < 2 {
            return Err(ServiceError::Config("at least two targets are required".into()));
        }
        if proxies.is_empty() {
            return Err(ServiceError::Config("the proxy pool is empty".into()));
        }
        let target_ids: HashSet<&str> = targets.iter().map(|p| p.target_id.as_str()).collect();
        if let Some(p) = proxies.iter().find(|p| target_ids.contains(p.target_id.as_str())) {
            return Err(ServiceError::Config(format!("{:?} is both a target and a proxy", p.target_id)));
        }
        if !(config.ban_threshold >= 0.0 && config.ban_threshold <= 1.0) {
            return Err(ServiceError::Config(format!("ban threshold {} outside [0, 1]", config.ban_threshold)));
        }
        if config.batch_size == 0 || config.lease_timeout_secs == 0 {
            return Err(ServiceError::Config("batch size and lease timeout must be positive".into()));
        }
        let wanted = LogHeader {
            version: LOG_VERSION,
            ban_threshold: config.ban_threshold,
            lease_timeout_secs: config.lease_timeout_secs,
            seed: config.seed,
            targets: targets.iter().map(|p| p.target_id.clone()).collect(),
            proxies: proxies.iter().map(|p| p.target_id.clone()).collect(),
        };
        let (log, header, events) = EventLog::open(&config.log_path, &wanted)?;
        if header.targets != wanted.targets || header.proxies != wanted.proxies {
            return Err(ServiceError::Config(format!(
                "{} was written for a different target or proxy list",
                config.log_path.display()
            )));
        }
        if header.ban_threshold != wanted.ban_threshold
            || header.lease_timeout_secs != wanted.lease_timeout_secs
            || header.seed != wanted.seed
        {
            log::warn!("using ban threshold, lease timeout and seed recorded in {}", config.log_path.display());
        }

        let percentiles = follower_percentiles(&targets);
        let ctx = FoldContext {
            percentiles: targets.iter().zip(percentiles).map(|(p, q)| (p.target_id.clone(), q)).collect(),
            ban_threshold: header.ban_threshold,
        };
        let state = State::replay(&events, &ctx);
        let target_index = header.targets.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let profiles = targets.into_iter().chain(proxies).map(|p| (p.target_id.clone(), p)).collect();
        Ok(Arc::new(Self {
            config,
            header,
            profiles,
            target_index,
            ctx,
            inner: Mutex::new(Inner { log, state, controller_running: false }),
            answered: Condvar::new(),
            clock,
            open_partitions: AtomicUsize::new(0),
            shutdown: AtomicBool::new(false),
        }))
    }

    pub(crate) fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().expect("service state lock poisoned")
    }

    pub fn targets(&self) -> &[String] {
        &self.header.targets
    }

    pub fn seed(&self) -> u64 {
        self.header.seed
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn now(&self) -> u64 {
        (self.clock)()
    }

    fn append(&self, inner: &mut Inner, events: Vec<Event>) -> Result<()> {
        inner.log.append(&events)?;
        for ev in &events {
            inner.state.apply(ev, &self.ctx);
        }
        Ok(())
    }

    fn view(&self, t: &crate::state::TaskState) -> TaskView {
        let lease = t.lease.as_ref().expect("served tasks are leased");
        TaskView {
            task_id: t.task_id.clone(),
            run_id: t.run_id,
            left: self.profiles[&t.left].clone(),
            right: self.profiles[&t.right].clone(),
            proxy: self.profiles[&lease.proxy].clone(),
            question_id: lease.question_id,
            question: QUESTIONS[(lease.question_id as usize).clamp(1, 3) - 1].to_string(),
        }
    }

    /// Up to `batch_size` tasks leased to `worker_id`. A worker who still holds
    /// unexpired leases gets those back instead of new work.
    pub fn serve_batch(&self, worker_id: &str) -> Result<Vec<TaskView>> {
        let now = self.now();
        let mut inner = self.lock();
        if inner.state.is_banned(worker_id) {
            return Err(ServiceError::Banned(worker_id.to_string()));
        }
        let state = &inner.state;
        let held: Vec<String> = state
            .pending
            .values()
            .filter(|id| {
                let t = &state.tasks[*id];
                t.lease_active(now) && t.lease.as_ref().is_some_and(|l| l.worker_id == worker_id)
            })
            .take(self.config.batch_size)
            .cloned()
            .collect();
        if !held.is_empty() {
            return Ok(held.iter().map(|id| self.view(&inner.state.tasks[id])).collect());
        }

        let mut pairs = HashSet::new();
        let mut events = Vec::new();
        let mut chosen = Vec::new();
        for id in state.pending.values() {
            if chosen.len() == self.config.batch_size {
                break;
            }
            let t = &state.tasks[id];
            if t.lease_active(now) || !pairs.insert(t.unordered_pair()) {
                continue;
            }
            let k = state.leases_issued + events.len() as u64;
            let proxy = self.header.proxies[(k % self.header.proxies.len() as u64) as usize].clone();
            let question_id = (derive_seed(self.header.seed, &[hash_str(id), k]) % QUESTIONS.len() as u64) as u8 + 1;
            events.push(Event::TaskLeased {
                task_id: id.clone(),
                worker_id: worker_id.to_string(),
                proxy,
                question_id,
                expires_at: now + self.header.lease_timeout_secs,
            });
            chosen.push(id.clone());
        }
        self.append(&mut inner, events)?;
        Ok(chosen.iter().map(|id| self.view(&inner.state.tasks[id])).collect())
    }

    /// Records answers. Each is acknowledged only after it is on disk.
    pub fn record_responses(&self, worker_id: &str, items: &[ResponseItem]) -> Result<Vec<Ack>> {
        let now = self.now();
        let mut inner = self.lock();
        if inner.state.is_banned(worker_id) {
            return Err(ServiceError::Banned(worker_id.to_string()));
        }
        let state = &inner.state;
        let mut worker = state
            .workers
            .get(worker_id)
            .cloned()
            .unwrap_or_else(|| crate::quality::WorkerState::new(worker_id));
        let mut events = Vec::new();
        let mut acks = Vec::with_capacity(items.len());
        let mut in_request: HashMap<&str, &str> = HashMap::new();
        for item in items {
            let id = item.task_id.as_str();
            let Some(t) = state.tasks.get(id) else {
                acks.push(Ack::new(id, AckStatus::Rejected, Some("unknown task")));
                continue;
            };
            let earlier = t.answer.as_ref().map(|a| a.worker_id.as_str()).or(in_request.get(id).copied());
            if let Some(by) = earlier {
                acks.push(if by == worker_id {
                    Ack::new(id, AckStatus::Duplicate, None)
                } else {
                    Ack::new(id, AckStatus::Rejected, Some("already answered"))
                });
                continue;
            }
            if worker.banned {
                acks.push(Ack::new(id, AckStatus::Rejected, Some("banned")));
                continue;
            }
            match &t.lease {
                Some(l) if l.worker_id == worker_id => {
                    if l.expires_at <= now {
                        acks.push(Ack::new(id, AckStatus::Expired, Some("lease expired")));
                        continue;
                    }
                }
                _ => {
                    acks.push(Ack::new(id, AckStatus::Rejected, Some("not leased to this worker")));
                    continue;
                }
            }
            if item.choice != t.left && item.choice != t.right {
                acks.push(Ack::new(id, AckStatus::Rejected, Some("choice is neither target")));
                continue;
            }
            let loser = if item.choice == t.left { &t.right } else { &t.left };
            let pct = |x: &str| self.ctx.percentiles.get(x).copied().unwrap_or(0.5);
            worker = update_quality(&worker, t.run_id, pct(&item.choice), pct(loser), self.ctx.ban_threshold);
            events.push(Event::ResponseRecorded {
                task_id: id.to_string(),
                worker_id: worker_id.to_string(),
                winner: item.choice.clone(),
                shown_left: item.shown_left.clone(),
                timestamp: now,
            });
            if worker.banned {
                events.push(Event::WorkerBanned { worker_id: worker_id.to_string(), run_id: t.run_id });
                log::info!("worker {worker_id} banned in run {}", t.run_id);
            }
            in_request.insert(id, worker_id);
            acks.push(Ack::new(id, AckStatus::Recorded, None));
        }
        self.append(&mut inner, events)?;
        drop(inner);
        self.answered.notify_all();
        Ok(acks)
    }

    pub fn status(&self) -> Status {
        let inner = self.lock();
        let s = &inner.state;
        Status {
            run: s.runs_started.iter().copied().find(|r| !s.runs_completed.contains_key(r)),
            runs_requested: s.runs_requested,
            runs_completed: s.runs_completed.len() as u32,
            comparisons_total: s.records.len() as u64,
            queue_depth: s.pending.len() as u64,
            open_partitions: self.open_partitions.load(Ordering::SeqCst) as u64,
        }
    }

    /// Every recorded comparison, in log order.
    pub fn records(&self) -> Vec<ComparisonRecord> {
        self.lock().state.records.clone()
    }

    pub fn completed_runs(&self) -> Vec<(u32, Vec<String>)> {
        self.lock().state.runs_completed.iter().map(|(k, v)| (*k, v.clone())).collect()
    }

    pub fn is_banned(&self, worker_id: &str) -> bool {
        self.lock().state.is_banned(worker_id)
    }

    /// Current Bradley-Terry estimate over all recorded comparisons.
    pub fn ranking(&self) -> Result<RankingReport> {
        let records = self.records();
        if records.is_empty() {
            return Ok(RankingReport { lambda: self.config.lambda, comparisons: 0, converged: true, ranking: Vec::new() });
        }
        let counts = PairwiseComparisonMatrix::with_targets(self.header.targets.clone(), &records)?;
        let fit = bt_fit(&counts, self.config.lambda)?;
        let ranking = fit.model.ranking();
        let n = ranking.len() as f64;
        let rows = ranking
            .order()
            .iter()
            .enumerate()
            .map(|(i, t)| RankingRow {
                target: t.clone(),
                theta: fit.model.theta(t).expect("ranked target"),
                rank: i + 1,
                percentile: (i + 1) as f64 / n,
            })
            .collect();
        Ok(RankingReport { lambda: self.config.lambda, comparisons: records.len(), converged: fit.converged, ranking: rows })
    }

    /// Adds `runs` to the number of runs requested. Returns the new total.
    pub fn request_runs(&self, runs: u32) -> Result<u32> {
        let mut inner = self.lock();
        let total = inner.state.runs_requested + runs;
        self.append(&mut inner, vec![Event::ControllerStarted { runs: total }])?;
        Ok(total)
    }

    pub(crate) fn start_run(&self, run_id: u32) -> Result<()> {
        let mut inner = self.lock();
        if !inner.state.runs_started.contains(&run_id) {
            self.append(&mut inner, vec![Event::RunStarted { run_id }])?;
        }
        Ok(())
    }

    pub(crate) fn complete_run(&self, run_id: u32, order: Vec<String>) -> Result<()> {
        let mut inner = self.lock();
        self.append(&mut inner, vec![Event::RunCompleted { run_id, order }])
    }

    pub(crate) fn task_id(&self, run_id: u32, a: &str, b: &str) -> Result<String> {
        let idx = |t: &str| {
            self.target_index.get(t).copied().ok_or_else(|| influence_core::Error::UnknownTarget(t.to_string()))
        };
        let (i, j) = (idx(a)?, idx(b)?);
        Ok(format!("{run_id}:{}:{}", i.min(j), i.max(j)))
    }

    /// Issues any of `pairs` not yet in the log and waits until all are
    /// answered. Returns the winning target of each pair.
    pub(crate) fn ask(&self, run_id: u32, pairs: &[(&str, &str)]) -> Result<Vec<(String, String, u8, u64)>> {
        let ids = pairs.iter().map(|(a, b)| self.task_id(run_id, a, b)).collect::<Result<Vec<_>>>()?;
        self.open_partitions.fetch_add(1, Ordering::SeqCst);
        let result = (|| {
            let mut inner = self.lock();
            let fresh: Vec<Event> = ids
                .iter()
                .zip(pairs)
                .filter(|(id, _)| !inner.state.tasks.contains_key(*id))
                .map(|(id, (l, r))| Event::TaskIssued {
                    task_id: id.clone(),
                    run_id,
                    left: l.to_string(),
                    right: r.to_string(),
                })
                .collect();
            self.append(&mut inner, fresh)?;
            loop {
                if self.shutdown.load(Ordering::SeqCst) {
                    return Err(ServiceError::Shutdown);
                }
                let tasks = &inner.state.tasks;
                if ids.iter().all(|id| tasks[id].answer.is_some()) {
                    return Ok(ids
                        .iter()
                        .map(|id| {
                            let t = &tasks[id];
                            let a = t.answer.as_ref().expect("answered");
                            let q = t.lease.as_ref().map_or(0, |l| l.question_id);
                            (a.winner.clone(), a.worker_id.clone(), q, a.timestamp)
                        })
                        .collect());
                }
                inner = self.answered.wait_timeout(inner, Duration::from_millis(200)).expect("lock").0;
            }
        })();
        self.open_partitions.fetch_sub(1, Ordering::SeqCst);
        result
    }

    /// Wakes every blocked question with a shutdown error.
    pub fn shutdown(&self) {
        self.shutdown.store(true, Ordering::SeqCst);
        self.answered.notify_all();
    }

    pub fn is_shut_down(&self) -> bool {
        self.shutdown.load(Ordering::SeqCst)
    }
}
