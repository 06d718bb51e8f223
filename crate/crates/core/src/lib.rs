//! Latency model and joint media/bandwidth optimizer for LLM agents that
//! collaborate over a shared wireless channel, exchanging either token
//! indices or KV caches.

// `!(x > 0.0)` is the NaN-rejecting form used by every validator.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod decision;
pub mod error;
pub mod optimizer;
pub mod rng;
pub mod scenario;
pub mod static_e2e;
pub mod strategy;
pub mod workload;

pub use channel::{LinkBudget, LinkSnr};
pub use decision::{Mode, TransmissionContext};
pub use error::{Error, Result};
pub use optimizer::{Assignment, ScenarioInstance, UplinkAgent};
pub use strategy::{Registry, Strategy};
pub use workload::{AgentCompute, ModelSpec, WorkloadConstants};
