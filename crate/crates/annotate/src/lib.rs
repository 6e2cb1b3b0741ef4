//! Live pairwise-comparison service. Quicksort asks its questions through the
//! service, workers fetch them in batches over HTTP, and every state change is
//! an event in an append-only log that is replayed on restart.

pub mod controller;
pub mod error;
pub mod eventlog;
pub mod http;
pub mod profile;
pub mod quality;
pub mod service;
pub mod state;

pub use controller::{spawn_controller, ServiceOracle};
pub use error::{Result, ServiceError};
pub use profile::{read_profiles, TargetProfile};
pub use service::{system_clock, Ack, AckStatus, Clock, ResponseItem, Service, ServiceConfig, Status, TaskView, QUESTIONS};
