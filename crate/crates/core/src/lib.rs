//! Fault-tolerant MapReduce over simulated processing elements.
//!
//! PEs exchange records in bulk-synchronous steps. Message logging plus
//! backups of self-messages at recovery points let the surviving PEs rebuild
//! the state of failed ones without a global checkpoint.

pub mod error;
pub mod hash;
pub mod ledger;
pub mod metrics;
pub mod partition;
pub mod record;

pub mod engine;
pub mod recovery;

pub mod benchmarks;
pub mod config;
pub mod harness;

pub use config::{FailureSpec, JobConfig};
pub use engine::{
    run_job, run_job_observed, Cluster, EngineConfig, FixedSource, FtConfig, Job, JobOutput,
    RecoveryPoints, Source, Stage, StepCtx, StepSummary, StepsJob,
};
pub use error::{DecodeError, Error, Result, UserFnError};
pub use partition::{BackupMode, FailureGroups, PartitionMap};
pub use record::{PeId, Record, StepId};
pub use recovery::FailureEvent;
