//! In-memory service state, rebuilt by folding the event log in order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use influence_core::ranking::ComparisonRecord;

use crate::eventlog::Event;
use crate::quality::{update_quality, WorkerState};

#[derive(Clone, Debug, PartialEq)]
pub struct Lease {
    pub worker_id: String,
    pub proxy: String,
    pub question_id: u8,
    pub expires_at: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Answer {
    pub worker_id: String,
    pub winner: String,
    pub timestamp: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskState {
    pub task_id: String,
    pub run_id: u32,
    pub left: String,
    pub right: String,
    pub seq: u64,
    pub lease: Option<Lease>,
    pub answer: Option<Answer>,
}

impl TaskState {
    pub fn lease_active(&self, now: u64) -> bool {
        self.lease.as_ref().is_some_and(|l| l.expires_at > now)
    }

    pub fn unordered_pair(&self) -> (&str, &str) {
        if self.left <= self.right {
            (&self.left, &self.right)
        } else {
            (&self.right, &self.left)
        }
    }
}

/// Fixed inputs the fold needs besides the events.
#[derive(Clone, Debug)]
pub struct FoldContext {
    pub percentiles: HashMap<String, f64>,
    pub ban_threshold: f64,
}

#[derive(Clone, Debug, Default)]
pub struct State {
    pub tasks: HashMap<String, TaskState>,
    /// Unanswered tasks in issue order.
    pub pending: BTreeMap<u64, String>,
    next_seq: u64,
    pub workers: HashMap<String, WorkerState>,
    pub runs_requested: u32,
    pub runs_started: BTreeSet<u32>,
    pub runs_completed: BTreeMap<u32, Vec<String>>,
    pub records: Vec<ComparisonRecord>,
    pub leases_issued: u64,
}

impl State {
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>, ctx: &FoldContext) -> Self {
        let mut s = State::default();
        for ev in events {
            s.apply(ev, ctx);
        }
        s
    }

    pub fn is_banned(&self, worker_id: &str) -> bool {
        self.workers.get(worker_id).is_some_and(|w| w.banned)
    }

    /// Applies one event. Returns the worker banned as a consequence of a
    /// response, if any.
    pub fn apply(&mut self, ev: &Event, ctx: &FoldContext) -> Option<(String, u32)> {
        match ev {
            Event::ControllerStarted { runs } => self.runs_requested = self.runs_requested.max(*runs),
            Event::RunStarted { run_id } => {
                self.runs_started.insert(*run_id);
            }
            Event::TaskIssued { task_id, run_id, left, right } => {
                if !self.tasks.contains_key(task_id) {
                    let seq = self.next_seq;
                    self.next_seq += 1;
                    self.pending.insert(seq, task_id.clone());
                    self.tasks.insert(
                        task_id.clone(),
                        TaskState {
                            task_id: task_id.clone(),
                            run_id: *run_id,
                            left: left.clone(),
                            right: right.clone(),
                            seq,
                            lease: None,
                            answer: None,
                        },
                    );
                }
            }
            Event::TaskLeased { task_id, worker_id, proxy, question_id, expires_at } => {
                self.leases_issued += 1;
                if let Some(t) = self.tasks.get_mut(task_id) {
                    t.lease = Some(Lease {
                        worker_id: worker_id.clone(),
                        proxy: proxy.clone(),
                        question_id: *question_id,
                        expires_at: *expires_at,
                    });
                }
            }
            Event::ResponseRecorded { task_id, worker_id, winner, timestamp, .. } => {
                let t = self.tasks.get_mut(task_id)?;
                if t.answer.is_some() {
                    return None;
                }
                t.answer = Some(Answer { worker_id: worker_id.clone(), winner: winner.clone(), timestamp: *timestamp });
                self.pending.remove(&t.seq);
                let loser = if *winner == t.left { &t.right } else { &t.left };
                self.records.push(ComparisonRecord {
                    run_id: t.run_id,
                    left: t.left.clone(),
                    right: t.right.clone(),
                    winner: winner.clone(),
                    worker_id: worker_id.clone(),
                    question_id: t.lease.as_ref().map_or(0, |l| l.question_id),
                    timestamp: *timestamp,
                });
                let pct = |id: &str| ctx.percentiles.get(id).copied().unwrap_or(0.5);
                let (chosen, other) = (pct(winner), pct(loser));
                let run_id = t.run_id;
                let w = self.workers.entry(worker_id.clone()).or_insert_with(|| WorkerState::new(worker_id.clone()));
                let was_banned = w.banned;
                *w = update_quality(w, run_id, chosen, other, ctx.ban_threshold);
                if w.banned && !was_banned {
                    self.release_leases_of(worker_id);
                    return Some((worker_id.clone(), run_id));
                }
            }
            Event::WorkerBanned { worker_id, run_id } => {
                let w = self.workers.entry(worker_id.clone()).or_insert_with(|| WorkerState::new(worker_id.clone()));
                if !w.banned {
                    w.banned = true;
                    w.ban_run = Some(*run_id);
                    self.release_leases_of(worker_id);
                }
            }
            Event::RunCompleted { run_id, order } => {
                self.runs_completed.insert(*run_id, order.clone());
            }
        }
        None
    }

    fn release_leases_of(&mut self, worker_id: &str) {
        for t in self.tasks.values_mut() {
            if t.answer.is_none() && t.lease.as_ref().is_some_and(|l| l.worker_id == worker_id) {
                t.lease = None;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> FoldContext {
        FoldContext {
            percentiles: [("a", 0.1), ("b", 0.9), ("c", 0.5)].into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            ban_threshold: 0.55,
        }
    }

    #[test]
    fn fold_tracks_tasks_and_records() {
        let evs = vec![
            Event::RunStarted { run_id: 0 },
            Event::TaskIssued { task_id: "0:0:1".into(), run_id: 0, left: "a".into(), right: "b".into() },
            Event::TaskIssued { task_id: "0:0:2".into(), run_id: 0, left: "c".into(), right: "a".into() },
            Event::TaskLeased {
                task_id: "0:0:1".into(),
                worker_id: "w".into(),
                proxy: "p".into(),
                question_id: 2,
                expires_at: 10,
            },
            Event::ResponseRecorded {
                task_id: "0:0:1".into(),
                worker_id: "w".into(),
                winner: "b".into(),
                shown_left: None,
                timestamp: 5,
            },
        ];
        let s = State::replay(&evs, &ctx());
        assert_eq!(s.pending.len(), 1);
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.records[0].question_id, 2);
        assert_eq!(s.workers["w"].qualifying_correct, 1);
        assert!(s.tasks["0:0:1"].lease_active(9));
        assert!(!s.tasks["0:0:1"].lease_active(10));
        assert_eq!(s.leases_issued, 1);
    }

    #[test]
    fn replay_reproduces_bans() {
        let mut evs = vec![Event::RunStarted { run_id: 0 }];
        for k in 0..100 {
            let id = format!("0:{k}");
            evs.push(Event::TaskIssued { task_id: id.clone(), run_id: 0, left: "a".into(), right: "b".into() });
            evs.push(Event::ResponseRecorded {
                task_id: id,
                worker_id: "bad".into(),
                winner: "a".into(),
                shown_left: None,
                timestamp: k,
            });
        }
        let s = State::replay(&evs, &ctx());
        assert!(s.is_banned("bad"));
        assert_eq!(s.workers["bad"].ban_run, Some(0));
    }
}
