//! Charter-governed runtime kernel for autonomous agent workloads.
//!
//! Every task runs through the same gate sequence: the strategist plans it,
//! the treasury approves its cost, an auction picks a worker, the trust
//! authority checks the worker's capability, and the review engine audits the
//! output into a tamper-evident trail. [`engine::GovernanceEngine`] wires the
//! pieces together; each module is usable on its own.

pub mod auction;
pub mod auth;
pub mod canonical;
pub mod charter;
pub mod clock;
pub mod engine;
pub mod eval;
pub mod ledger;
pub mod money;
pub mod review;
pub mod strategist;
pub mod treasury;
pub mod workers;

pub use auction::{select_winner, utility, AuctionResult, Bid, BiddingEngine, RequestForProposal};
pub use auth::{Capability, PermissionDeniedError, TrustAuthority};
pub use charter::{load_charter, Charter, ValidationError};
pub use engine::{GovernanceEngine, GovernanceEvent, Job, JobState, MissionOutcome};
pub use ledger::{EntryKind, Ledger, LedgerEntry, NewEntry};
pub use money::Cents;
pub use review::{verify_trail, AuditReport, ReviewEngine, RuleJudge};
pub use strategist::{PlannedTask, Priority, Strategist, TaskPlan};
pub use treasury::{FiscalInsolvencyError, Treasury, UnprofitableJobError};
pub use workers::{WorkerProfile, WorkerRegistry};
