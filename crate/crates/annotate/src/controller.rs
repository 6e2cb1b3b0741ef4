//! Drives quicksort runs through the service, one run at a time.

use std::sync::Arc;
use std::thread::JoinHandle;

use influence_core::ranking::{quicksort_run, ComparisonOracle, Judgment, QuicksortOptions, Side};

use crate::error::{Result, ServiceError};
use crate::service::Service;

/// Answers quicksort's questions by queueing tasks for human workers and
/// blocking until they are answered. Questions already answered in the log
/// are not asked again.
pub struct ServiceOracle {
    service: Arc<Service>,
}

impl ServiceOracle {
    pub fn new(service: Arc<Service>) -> Self {
        Self { service }
    }
}

fn to_core(e: ServiceError) -> influence_core::Error {
    match e {
        ServiceError::Core(e) => e,
        other => influence_core::Error::Oracle(other.to_string()),
    }
}

impl ComparisonOracle for ServiceOracle {
    fn compare(&self, run_id: u32, left: &str, right: &str) -> influence_core::Result<Judgment> {
        self.compare_many(run_id, &[(left, right)]).pop().expect("one answer per question")
    }

    fn compare_many(&self, run_id: u32, pairs: &[(&str, &str)]) -> Vec<influence_core::Result<Judgment>> {
        match self.service.ask(run_id, pairs) {
            Ok(answers) => answers
                .into_iter()
                .zip(pairs)
                .map(|((winner, worker_id, question_id, timestamp), (left, _))| {
                    Ok(Judgment {
                        winner: if winner == *left { Side::Left } else { Side::Right },
                        worker_id,
                        question_id,
                        timestamp,
                    })
                })
                .collect(),
            Err(e) => vec![Err(to_core(e))],
        }
    }
}

/// Starts the controller thread unless one is already running. It sorts every
/// requested run that has not completed, in run order, then exits.
pub fn spawn_controller(service: &Arc<Service>) -> Option<JoinHandle<Result<()>>> {
    {
        let mut inner = service.lock();
        if inner.controller_running || !has_work(&inner.state) {
            return None;
        }
        inner.controller_running = true;
    }
    let service = Arc::clone(service);
    Some(std::thread::spawn(move || {
        let result = controller_loop(&service);
        if let Err(e) = &result {
            service.lock().controller_running = false;
            if !service.is_shut_down() {
                log::error!("run controller stopped: {e}");
            }
        }
        result
    }))
}

fn has_work(state: &crate::state::State) -> bool {
    (0..state.runs_requested).any(|r| !state.runs_completed.contains_key(&r))
}

fn controller_loop(service: &Arc<Service>) -> Result<()> {
    let oracle = ServiceOracle::new(Arc::clone(service));
    loop {
        let next = {
            let mut inner = service.lock();
            let state = &inner.state;
            match (0..state.runs_requested).find(|r| !state.runs_completed.contains_key(r)) {
                Some(r) => r,
                None => {
                    inner.controller_running = false;
                    return Ok(());
                }
            }
        };
        service.start_run(next)?;
        log::info!("run {next} started");
        let opts = QuicksortOptions::new(next, service.seed()).with_parallelism(service.config().parallelism);
        let outcome = quicksort_run(service.targets(), &oracle, opts).map_err(|a| match a.error {
            influence_core::Error::Oracle(_) if service.is_shut_down() => ServiceError::Shutdown,
            e => ServiceError::Core(e),
        })?;
        service.complete_run(next, outcome.order)?;
        log::info!("run {next} completed");
    }
}
