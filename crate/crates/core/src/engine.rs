//! The orchestrator: plan, approve, auction, dispatch, audit.
//!
//! [`GovernanceEngine`] owns the ledger, the trust authority, the review
//! engine and the worker registry, and is the only writer to any of them.
//! Jobs are processed one at a time in FIFO order. Every pipeline step is
//! recorded as a role-tagged [`GovernanceEvent`] in the decision stream.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::auction::{format_utility, select_winner, AuctionResult, BiddingEngine, NoEligibleWorkers};
use crate::auth::{Capability, PermissionDeniedError, TrustAuthority, TrustStoreError};
use crate::canonical::sha256_hex;
use crate::charter::{Charter, KpiSpec};
use crate::clock::{serde_utc, Clock, Timestamp};
use crate::ledger::{EntryKind, Ledger, LedgerEntry, LedgerError, NewEntry};
use crate::money::Cents;
use crate::review::{AuditError, AuditReport, Judge, ReflectionObject, ReviewEngine, RuleJudge};
use crate::strategist::{
    topological_order, FixturePlanner, PlanError, PlannedTask, PlannerBackend, Strategist, TaskPlan,
};
use crate::treasury::{FiscalInsolvencyError, Treasury, UnprofitableJobError};
use crate::workers::{
    charge, ChargeError, MockPaymentProvider, PaymentDeclined, PaymentProvider, PaymentReceipt, TaskResult,
    WorkerProfile, WorkerRegistry, EXAMPLE_WORKERS_JSON,
};

pub const AUDIT_FAILURE_REASON: &str = "One or more tasks failed audit";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobState {
    Pending,
    Approved,
    Running,
    Completed,
    Failed,
}

impl JobState {
    /// The legal transition relation. `Pending -> Failed` covers jobs rejected
    /// at planning or approval, before they ever run.
    pub fn can_transition(self, to: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, to),
            (Pending, Approved)
                | (Approved, Running)
                | (Running, Completed)
                | (Running, Failed)
                | (Failed, Pending)
                | (Pending, Failed)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Pending => "PENDING",
            JobState::Approved => "APPROVED",
            JobState::Running => "RUNNING",
            JobState::Completed => "COMPLETED",
            JobState::Failed => "FAILED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskStatus {
    Pending,
    Running,
    Passed,
    Failed,
    Skipped,
}

/// Per-task progress inside a job, as shown on the task DAG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub status: TaskStatus,
    pub worker_id: Option<String>,
    pub cost_usd_cents: Option<i64>,
    pub tokens_used: Option<u64>,
    pub score: Option<String>,
    pub reason: Option<String>,
    pub suggested_fix: Option<String>,
    pub output: Option<String>,
}

impl TaskRecord {
    fn pending(task_id: &str) -> Self {
        TaskRecord {
            task_id: task_id.to_string(),
            status: TaskStatus::Pending,
            worker_id: None,
            cost_usd_cents: None,
            tokens_used: None,
            score: None,
            reason: None,
            suggested_fix: None,
            output: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: String,
    pub goal: String,
    pub revenue_usd_cents: Option<i64>,
    pub state: JobState,
    pub plan: Option<TaskPlan>,
    pub failure_reason: Option<String>,
    /// Machine code of the failure, e.g. `FISCAL_INSOLVENCY`.
    pub failure_code: Option<String>,
    /// Markdown aggregate of the passing task outputs.
    pub deliverable: Option<String>,
    pub tasks: Vec<TaskRecord>,
    pub receipt: Option<PaymentReceipt>,
    pub attempts: u32,
    /// Failure reflections from earlier attempts, passed to the planner on retry.
    pub reflections: Vec<ReflectionObject>,
    /// Every state the job has been in, in order.
    pub history: Vec<JobState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    System,
    Ceo,
    Cfo,
    Audit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GovernanceEvent {
    pub seq: u64,
    #[serde(with = "serde_utc")]
    pub timestamp_utc: Timestamp,
    pub role: Role,
    /// Short machine-readable tag such as `task_approved` or `task_audited`.
    pub kind: String,
    pub job_id: Option<String>,
    pub task_id: Option<String>,
    pub message: String,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MissionOutcome {
    pub job_id: String,
    pub plan: TaskPlan,
    pub results: Vec<TaskResult>,
    pub audits: Vec<AuditReport>,
    pub auctions: Vec<AuctionResult>,
    /// Tasks not run because a dependency failed.
    pub skipped: Vec<String>,
}

impl MissionOutcome {
    pub fn all_passed(&self) -> bool {
        self.skipped.is_empty() && self.audits.len() == self.plan.tasks.len() && self.audits.iter().all(|a| a.passed)
    }

    /// SHA-256 over the plan, results and audits, for comparing two runs.
    pub fn digest(&self) -> String {
        let body = json!({
            "plan": self.plan,
            "results": self.results,
            "audits": self.audits,
            "skipped": self.skipped,
        });
        sha256_hex(&body.to_string())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GovernanceError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Unprofitable(#[from] UnprofitableJobError),
    #[error(transparent)]
    Fiscal(#[from] FiscalInsolvencyError),
    #[error(transparent)]
    Permission(#[from] PermissionDeniedError),
    #[error(transparent)]
    NoWorkers(#[from] NoEligibleWorkers),
    #[error("no bids received for {task_id}")]
    NoBids { task_id: String },
    #[error("task {task_id} refers to unknown KPI {kpi:?}")]
    UnknownKpi { task_id: String, kpi: String },
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Trust(#[from] TrustStoreError),
    #[error(transparent)]
    Payment(#[from] PaymentDeclined),
    #[error("job {job_id} is {state:?}; cannot {action}")]
    InvalidState { job_id: String, state: JobState, action: &'static str },
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("store error: {0}")]
    Store(#[from] std::io::Error),
}

impl GovernanceError {
    pub fn code(&self) -> &'static str {
        match self {
            GovernanceError::Plan(PlanError::EmptyGoal) => "VALIDATION",
            GovernanceError::Plan(PlanError::Rejected(_)) => "PLAN_REJECTED",
            GovernanceError::Unprofitable(_) => "UNPROFITABLE_JOB",
            GovernanceError::Fiscal(_) => "FISCAL_INSOLVENCY",
            GovernanceError::Permission(_) => "PERMISSION_DENIED",
            GovernanceError::NoWorkers(_) | GovernanceError::NoBids { .. } => "NO_WORKERS",
            GovernanceError::UnknownKpi { .. } => "VALIDATION",
            GovernanceError::Audit(_) => "AUDIT_UNAVAILABLE",
            GovernanceError::Payment(_) => "PAYMENT_DECLINED",
            GovernanceError::InvalidState { .. } => "INVALID_STATE",
            GovernanceError::UnknownJob(_) => "NOT_FOUND",
            GovernanceError::Ledger(_) | GovernanceError::Trust(_) | GovernanceError::Store(_) => "STORE",
        }
    }
}

impl From<ChargeError> for GovernanceError {
    fn from(e: ChargeError) -> Self {
        match e {
            ChargeError::Declined(d) => GovernanceError::Payment(d),
            ChargeError::Ledger(l) => GovernanceError::Ledger(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Price used to turn a task's token budget into its estimated cost.
    pub token_price_cents_per_1k: i64,
    /// Capability a worker needs to run a task with the given skill.
    pub skill_capabilities: BTreeMap<String, Capability>,
    pub default_capability: Capability,
    pub bid_deadline_s: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            token_price_cents_per_1k: 1,
            skill_capabilities: BTreeMap::new(),
            default_capability: Capability::WriteFiles,
            bid_deadline_s: crate::auction::DEFAULT_BID_DEADLINE_S,
        }
    }
}

impl EngineConfig {
    pub fn capability_for(&self, skill: &str) -> Capability {
        self.skill_capabilities.get(skill).copied().unwrap_or(self.default_capability)
    }

    /// `ceil(tokens * price / 1000)`
    pub fn estimated_cost(&self, tokens: u64) -> Cents {
        let milli = i128::from(tokens) * i128::from(self.token_price_cents_per_1k);
        Cents(((milli + 999) / 1000) as i64)
    }
}

/// Everything needed to build an engine.
pub struct EngineSetup {
    pub charter: Charter,
    pub clock: Arc<dyn Clock>,
    pub workers: Vec<WorkerProfile>,
    pub planner: Option<Box<dyn PlannerBackend>>,
    /// Rules the judge applies and the simulated workers write against.
    pub rules: RuleJudge,
    /// Overrides the rule judge for scoring.
    pub judge: Option<Box<dyn Judge>>,
    pub payments: Box<dyn PaymentProvider>,
    pub config: EngineConfig,
    /// Directory holding the JSONL stores; in-memory when `None`.
    pub store_dir: Option<PathBuf>,
    /// Credited once when the ledger starts empty.
    pub opening_balance: Cents,
}

impl EngineSetup {
    /// The bundled example: Listing-style charter, canned plans, four workers, $500 opening balance.
    pub fn example(clock: Arc<dyn Clock>) -> Self {
        EngineSetup {
            charter: crate::charter::load_charter(crate::charter::EXAMPLE_CHARTER_YAML).expect("bundled charter loads"),
            clock,
            workers: WorkerRegistry::profiles_from_config(EXAMPLE_WORKERS_JSON).expect("bundled workers parse"),
            planner: Some(Box::new(FixturePlanner::example())),
            rules: RuleJudge::example(),
            judge: None,
            payments: Box::new(MockPaymentProvider::default()),
            config: EngineConfig::default(),
            store_dir: None,
            opening_balance: Cents(50_000),
        }
    }
}

pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const TRUST_FILE: &str = "trust.jsonl";
pub const TRAIL_FILE: &str = "audit_trail.jsonl";
pub const REFLECTIONS_FILE: &str = "reflections.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";

pub struct GovernanceEngine {
    charter: Arc<Charter>,
    treasury: Treasury,
    ledger: Ledger,
    auth: TrustAuthority,
    review: ReviewEngine,
    strategist: Strategist,
    registry: WorkerRegistry,
    bidding: BiddingEngine,
    payments: Box<dyn PaymentProvider>,
    rules: RuleJudge,
    config: EngineConfig,
    clock: Arc<dyn Clock>,
    jobs: Vec<Job>,
    queue: VecDeque<String>,
    next_job: u64,
    outcomes: BTreeMap<String, MissionOutcome>,
    events: Vec<GovernanceEvent>,
    events_file: Option<File>,
}

impl std::fmt::Debug for GovernanceEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GovernanceEngine")
            .field("jobs", &self.jobs.len())
            .field("events", &self.events.len())
            .field("ledger", &self.ledger.len())
            .finish()
    }
}

/// Results gathered while a job runs, kept even when it aborts.
#[derive(Default)]
struct Progress {
    results: Vec<TaskResult>,
    audits: Vec<AuditReport>,
    auctions: Vec<AuctionResult>,
    skipped: Vec<String>,
    reflections: Vec<ReflectionObject>,
}

impl GovernanceEngine {
    pub fn new(setup: EngineSetup) -> Result<Self, GovernanceError> {
        let EngineSetup {
            charter,
            clock,
            workers,
            planner,
            rules,
            judge,
            payments,
            config,
            store_dir,
            opening_balance,
        } = setup;
        let judge: Box<dyn Judge> = judge.unwrap_or_else(|| Box::new(rules.clone()));
        let (mut ledger, mut auth, review, events_file) = match &store_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let p = |f: &str| dir.join(f);
                let events_file = OpenOptions::new().create(true).append(true).open(p(EVENTS_FILE))?;
                (
                    Ledger::open(p(LEDGER_FILE), clock.clone())?,
                    TrustAuthority::open(p(TRUST_FILE), clock.clone())?,
                    ReviewEngine::open(judge, clock.clone(), &p(TRAIL_FILE), &p(REFLECTIONS_FILE))?,
                    Some(events_file),
                )
            }
            None => (
                Ledger::in_memory(clock.clone()),
                TrustAuthority::in_memory(clock.clone()),
                ReviewEngine::in_memory(judge, clock.clone()),
                None,
            ),
        };
        if ledger.is_empty() && opening_balance > Cents::ZERO {
            ledger.append(NewEntry::credit(opening_balance, "opening balance"))?;
        }
        let mut registry = WorkerRegistry::new();
        for w in workers {
            if auth.record(&w.worker_id).is_none() && w.initial_successes > 0 {
                auth.seed_successes(&w.worker_id, w.initial_successes as usize)?;
            }
            // duplicates in the setup list keep the first profile
            let _ = registry.register(w);
        }
        Ok(GovernanceEngine {
            treasury: Treasury::new(charter.fiscal_boundaries.clone()),
            charter: Arc::new(charter),
            ledger,
            auth,
            review,
            strategist: Strategist::new(planner),
            registry,
            bidding: BiddingEngine::new(config.bid_deadline_s),
            payments,
            rules,
            config,
            clock,
            jobs: Vec::new(),
            queue: VecDeque::new(),
            next_job: 0,
            outcomes: BTreeMap::new(),
            events: Vec::new(),
            events_file,
        })
    }

    pub fn example(clock: Arc<dyn Clock>) -> Self {
        Self::new(EngineSetup::example(clock)).expect("in-memory example engine builds")
    }

    pub fn charter(&self) -> Arc<Charter> {
        self.charter.clone()
    }

    /// Swaps in a new Charter; later approvals use its fiscal boundaries.
    pub fn set_charter(&mut self, charter: Charter) {
        self.treasury = Treasury::new(charter.fiscal_boundaries.clone());
        self.charter = Arc::new(charter);
        self.emit(Role::System, "charter_updated", None, None, "Charter updated".into(), self.charter.to_document());
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn trust(&self) -> &TrustAuthority {
        &self.auth
    }

    pub fn review(&self) -> &ReviewEngine {
        &self.review
    }

    pub fn registry(&self) -> &WorkerRegistry {
        &self.registry
    }

    pub fn treasury(&self) -> &Treasury {
        &self.treasury
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn register_worker(&mut self, profile: WorkerProfile) -> Result<(), GovernanceError> {
        let id = profile.worker_id.clone();
        let seed = profile.initial_successes;
        if self.registry.register(profile).is_err() {
            return Ok(());
        }
        if self.auth.record(&id).is_none() && seed > 0 {
            self.auth.seed_successes(&id, seed as usize)?;
        }
        Ok(())
    }

    /// Records money moving outside any job (deposits, external spend).
    pub fn post_ledger_entry(&mut self, entry: NewEntry) -> Result<LedgerEntry, GovernanceError> {
        let e = self.ledger.append(entry)?;
        self.emit(
            Role::Cfo,
            "ledger_entry",
            None,
            e.task_id.clone(),
            format!("{} {} ({})", e.kind.as_str(), e.amount, e.purpose),
            serde_json::to_value(&e).expect("entry serializes"),
        );
        Ok(e)
    }

    /// Events with `seq > since`, oldest first.
    pub fn decision_stream(&self, since: u64) -> &[GovernanceEvent] {
        let start = self.events.partition_point(|e| e.seq <= since);
        &self.events[start..]
    }

    pub fn last_event_seq(&self) -> u64 {
        self.events.last().map_or(0, |e| e.seq)
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn job(&self, job_id: &str) -> Option<&Job> {
        self.jobs.iter().find(|j| j.job_id == job_id)
    }

    /// Job ids waiting to run, next first.
    pub fn queue(&self) -> impl Iterator<Item = &str> {
        self.queue.iter().map(String::as_str)
    }

    pub fn submit_job(&mut self, goal: &str, revenue: Option<Cents>) -> Result<Job, GovernanceError> {
        if goal.trim().is_empty() {
            return Err(PlanError::EmptyGoal.into());
        }
        if let Some(r) = revenue {
            if r < Cents::ZERO {
                return Err(LedgerError::NegativeAmount(r.get()).into());
            }
        }
        self.next_job += 1;
        let job = Job {
            job_id: format!("job-{}", self.next_job),
            goal: goal.trim().to_string(),
            revenue_usd_cents: revenue.map(Cents::get),
            state: JobState::Pending,
            plan: None,
            failure_reason: None,
            failure_code: None,
            deliverable: None,
            tasks: Vec::new(),
            receipt: None,
            attempts: 0,
            reflections: Vec::new(),
            history: vec![JobState::Pending],
        };
        self.emit(
            Role::System,
            "job_submitted",
            Some(&job.job_id),
            None,
            format!("Job {} submitted: {}", job.job_id, job.goal),
            json!({"goal": job.goal, "revenue_usd_cents": job.revenue_usd_cents}),
        );
        self.queue.push_back(job.job_id.clone());
        self.jobs.push(job.clone());
        Ok(job)
    }

    /// Runs the oldest pending job to a terminal state. `None` when the queue is empty.
    pub fn process_next(&mut self) -> Option<Job> {
        let job_id = self.queue.pop_front()?;
        self.run_job(&job_id);
        self.job(&job_id).cloned()
    }

    /// Drains the queue.
    pub fn process_all(&mut self) -> Vec<Job> {
        std::iter::from_fn(|| self.process_next()).collect()
    }

    /// Submits and immediately runs one mission outside the queue.
    ///
    /// Failed audits are part of a normal outcome; fiscal, permission, planning
    /// and allocation failures abort the mission and are returned as errors.
    pub fn run_mission_with_audit(
        &mut self,
        goal: &str,
        job_revenue_cents: Option<Cents>,
    ) -> Result<MissionOutcome, GovernanceError> {
        let job = self.submit_job(goal, job_revenue_cents)?;
        self.queue.retain(|id| *id != job.job_id);
        if let Some(e) = self.run_job(&job.job_id) {
            return Err(e);
        }
        Ok(self.outcomes.get(&job.job_id).cloned().expect("a job that ran has a plan"))
    }

    /// Outcome of the latest attempt of a job that got as far as planning.
    pub fn outcome(&self, job_id: &str) -> Option<&MissionOutcome> {
        self.outcomes.get(job_id)
    }

    pub fn retry_job(&mut self, job_id: &str) -> Result<Job, GovernanceError> {
        let job = self.job_mut(job_id)?;
        if job.state != JobState::Failed {
            return Err(GovernanceError::InvalidState {
                job_id: job_id.to_string(),
                state: job.state,
                action: "retry",
            });
        }
        job.failure_reason = None;
        job.failure_code = None;
        let n = job.reflections.len();
        self.transition(job_id, JobState::Pending);
        self.queue.push_back(job_id.to_string());
        self.emit(
            Role::System,
            "job_retried",
            Some(job_id),
            None,
            format!("Job {job_id} queued for retry with {n} reflection(s)"),
            json!({"reflections": n}),
        );
        Ok(self.job(job_id).cloned().expect("job exists"))
    }

    /// Changes goal and revenue of a job that is pending or failed.
    pub fn edit_job(
        &mut self,
        job_id: &str,
        goal: Option<&str>,
        revenue: Option<Option<Cents>>,
    ) -> Result<Job, GovernanceError> {
        let job = self.job_mut(job_id)?;
        if !matches!(job.state, JobState::Pending | JobState::Failed) {
            return Err(GovernanceError::InvalidState { job_id: job_id.to_string(), state: job.state, action: "edit" });
        }
        if let Some(g) = goal {
            if g.trim().is_empty() {
                return Err(PlanError::EmptyGoal.into());
            }
            job.goal = g.trim().to_string();
        }
        if let Some(r) = revenue {
            job.revenue_usd_cents = r.map(Cents::get);
        }
        let snapshot = job.clone();
        self.emit(
            Role::System,
            "job_edited",
            Some(job_id),
            None,
            format!("Job {job_id} edited"),
            json!({"goal": snapshot.goal, "revenue_usd_cents": snapshot.revenue_usd_cents}),
        );
        Ok(snapshot)
    }

    /// Removes a job that is not running. Ledger, trail and events are untouched.
    pub fn delete_job(&mut self, job_id: &str) -> Result<Job, GovernanceError> {
        let idx = self
            .jobs
            .iter()
            .position(|j| j.job_id == job_id)
            .ok_or_else(|| GovernanceError::UnknownJob(job_id.to_string()))?;
        let state = self.jobs[idx].state;
        if matches!(state, JobState::Running | JobState::Approved) {
            return Err(GovernanceError::InvalidState { job_id: job_id.to_string(), state, action: "delete" });
        }
        self.queue.retain(|id| id != job_id);
        let job = self.jobs.remove(idx);
        self.outcomes.remove(job_id);
        self.emit(Role::System, "job_deleted", Some(job_id), None, format!("Job {job_id} deleted"), Value::Null);
        Ok(job)
    }

    fn job_mut(&mut self, job_id: &str) -> Result<&mut Job, GovernanceError> {
        self.jobs.iter_mut().find(|j| j.job_id == job_id).ok_or_else(|| GovernanceError::UnknownJob(job_id.to_string()))
    }

    fn transition(&mut self, job_id: &str, to: JobState) {
        let job = self.jobs.iter_mut().find(|j| j.job_id == job_id).expect("job exists");
        let from = job.state;
        assert!(from.can_transition(to), "illegal job transition {from:?} -> {to:?}");
        job.state = to;
        job.history.push(to);
        self.emit(
            Role::System,
            "job_state",
            Some(job_id),
            None,
            format!("Job {job_id}: {} -> {}", from.as_str(), to.as_str()),
            json!({"from": from, "to": to}),
        );
    }

    fn emit(
        &mut self,
        role: Role,
        kind: &str,
        job_id: Option<&str>,
        task_id: Option<String>,
        message: String,
        payload: Value,
    ) {
        let ev = GovernanceEvent {
            seq: self.last_event_seq() + 1,
            timestamp_utc: self.clock.now(),
            role,
            kind: kind.to_string(),
            job_id: job_id.map(str::to_string),
            task_id,
            message,
            payload,
        };
        if let Some(f) = self.events_file.as_mut() {
            // the in-memory stream stays authoritative if the mirror write fails
            let _ = writeln!(f, "{}", serde_json::to_string(&ev).expect("event serializes"));
        }
        self.events.push(ev);
    }

    fn with_task<F: FnOnce(&mut TaskRecord)>(&mut self, job_id: &str, task_id: &str, f: F) {
        if let Some(t) = self
            .jobs
            .iter_mut()
            .find(|j| j.job_id == job_id)
            .and_then(|j| j.tasks.iter_mut().find(|t| t.task_id == task_id))
        {
            f(t);
        }
    }

    /// Runs a pending job through the whole pipeline and leaves it COMPLETED or FAILED.
    fn run_job(&mut self, job_id: &str) -> Option<GovernanceError> {
        let mut progress = Progress::default();
        let err = self.run_job_inner(job_id, &mut progress).err();
        let job = self.jobs.iter_mut().find(|j| j.job_id == job_id).expect("job exists");
        job.reflections.extend(progress.reflections.iter().cloned());
        let passing: Vec<(&str, &str)> = progress
            .audits
            .iter()
            .filter(|a| a.passed)
            .filter_map(|a| {
                progress
                    .results
                    .iter()
                    .find(|r| r.task_id == a.task_id)
                    .map(|r| (r.task_id.as_str(), r.output.as_str()))
            })
            .collect();
        if !passing.is_empty() {
            let mut md = format!("# {}\n", job.goal);
            for (task_id, output) in passing {
                md.push_str(&format!("\n## {task_id}\n\n{output}\n"));
            }
            job.deliverable = Some(md);
        }
        match &err {
            Some(e) => self.fail_job(job_id, e.code(), e.to_string()),
            None if !self.job(job_id).is_some_and(|j| j.state == JobState::Completed) => {
                self.fail_job(job_id, "AUDIT_FAILED", AUDIT_FAILURE_REASON.to_string())
            }
            None => {}
        }
        match self.job(job_id).and_then(|j| j.plan.clone()) {
            Some(plan) => {
                let outcome = MissionOutcome {
                    job_id: job_id.to_string(),
                    plan,
                    results: progress.results,
                    audits: progress.audits,
                    auctions: progress.auctions,
                    skipped: progress.skipped,
                };
                self.outcomes.insert(job_id.to_string(), outcome);
            }
            None => {
                self.outcomes.remove(job_id);
            }
        }
        err
    }

    fn fail_job(&mut self, job_id: &str, code: &str, reason: String) {
        let state = self.job(job_id).expect("job exists").state;
        if state == JobState::Approved {
            self.transition(job_id, JobState::Running);
        }
        self.transition(job_id, JobState::Failed);
        let job = self.job_mut(job_id).expect("job exists");
        job.failure_code = Some(code.to_string());
        job.failure_reason = Some(reason.clone());
        self.emit(
            Role::System,
            "job_failed",
            Some(job_id),
            None,
            format!("Job {job_id} failed: {reason}"),
            json!({"code": code, "reason": reason}),
        );
    }

    fn run_job_inner(&mut self, job_id: &str, progress: &mut Progress) -> Result<(), GovernanceError> {
        let (goal, revenue, reflections) = {
            let job = self.job_mut(job_id)?;
            job.attempts += 1;
            job.tasks.clear();
            job.plan = None;
            job.deliverable = None;
            job.receipt = None;
            (job.goal.clone(), job.revenue_usd_cents.map(Cents), job.reflections.clone())
        };
        let charter = self.charter.clone();

        // CEO: plan
        let (plan, source) = match self.strategist.plan_with_context(&goal, &charter, &reflections) {
            Ok(p) => p,
            Err(e) => {
                self.emit(Role::Ceo, "plan_rejected", Some(job_id), None, format!("Plan rejected: {e}"), Value::Null);
                return Err(e.into());
            }
        };
        let order = topological_order(&plan).expect("normalized plans are acyclic");
        let estimates: Vec<Cents> =
            plan.tasks.iter().map(|t| self.config.estimated_cost(t.estimated_token_budget)).collect();
        let total: Cents = estimates.iter().copied().sum();
        self.emit(
            Role::Ceo,
            "plan_created",
            Some(job_id),
            None,
            format!("Planned {} task(s) for \"{goal}\"", plan.tasks.len()),
            json!({"plan": plan, "source": source, "estimated_cost_usd_cents": total.get(), "reflections": reflections.len()}),
        );
        {
            let job = self.job_mut(job_id)?;
            job.tasks = plan.tasks.iter().map(|t| TaskRecord::pending(&t.task_id)).collect();
            job.plan = Some(plan.clone());
        }

        // CFO: job-level margin
        match revenue {
            Some(revenue) => match self.treasury.approve_job_profitability(revenue, total) {
                Ok(d) => self.emit(
                    Role::Cfo,
                    "job_approved",
                    Some(job_id),
                    None,
                    d.reason.clone(),
                    json!({"revenue_usd_cents": revenue.get(), "cost_usd_cents": total.get(), "max_allowed_cost_usd_cents": self.treasury.max_allowed_cost(revenue).get()}),
                ),
                Err(e) => {
                    self.emit(Role::Cfo, "job_rejected", Some(job_id), None, e.message.clone(), serde_json::to_value(&e).expect("error serializes"));
                    return Err(e.into());
                }
            },
            None => self.emit(
                Role::Cfo,
                "job_approved",
                Some(job_id),
                None,
                format!("No revenue declared; estimated cost {total}"),
                json!({"revenue_usd_cents": null, "cost_usd_cents": total.get()}),
            ),
        }
        self.transition(job_id, JobState::Approved);
        self.transition(job_id, JobState::Running);

        let mut failed: HashSet<String> = HashSet::new();
        for idx in order {
            let task = &plan.tasks[idx];
            if let Some(dep) = task.depends_on.iter().find(|d| failed.contains(*d)) {
                failed.insert(task.task_id.clone());
                progress.skipped.push(task.task_id.clone());
                self.with_task(job_id, &task.task_id, |t| t.status = TaskStatus::Skipped);
                self.emit(
                    Role::System,
                    "task_skipped",
                    Some(job_id),
                    Some(task.task_id.clone()),
                    format!("Skipped {}: dependency {dep} did not pass", task.task_id),
                    json!({"dependency": dep}),
                );
                continue;
            }
            let passed = self.run_task(job_id, task, estimates[idx], &charter, progress)?;
            if !passed {
                failed.insert(task.task_id.clone());
            }
        }

        if !failed.is_empty() {
            return Ok(());
        }
        if let Some(revenue) = revenue {
            let receipt = charge(self.payments.as_mut(), &mut self.ledger, job_id, revenue);
            match receipt {
                Ok(r) => {
                    self.emit(
                        Role::Cfo,
                        "payment_received",
                        Some(job_id),
                        None,
                        format!("Charged {} ({})", Cents(r.amount_usd_cents), r.provider_ref),
                        serde_json::to_value(&r).expect("receipt serializes"),
                    );
                    self.job_mut(job_id)?.receipt = Some(r);
                }
                Err(e) => {
                    let e = GovernanceError::from(e);
                    self.emit(Role::Cfo, "payment_declined", Some(job_id), None, e.to_string(), Value::Null);
                    return Err(e);
                }
            }
        }
        self.transition(job_id, JobState::Completed);
        self.emit(Role::System, "job_completed", Some(job_id), None, format!("Job {job_id} completed"), Value::Null);
        Ok(())
    }

    /// Approve, auction, gate, execute, debit and audit one task. Returns whether it passed audit.
    fn run_task(
        &mut self,
        job_id: &str,
        task: &PlannedTask,
        estimate: Cents,
        charter: &Charter,
        progress: &mut Progress,
    ) -> Result<bool, GovernanceError> {
        let tid = task.task_id.clone();
        let kpi: KpiSpec = match &task.kpi {
            Some(name) => charter
                .kpi(name)
                .cloned()
                .ok_or_else(|| GovernanceError::UnknownKpi { task_id: tid.clone(), kpi: name.clone() })?,
            None => charter
                .success_kpis
                .first()
                .cloned()
                .ok_or_else(|| GovernanceError::UnknownKpi { task_id: tid.clone(), kpi: "<none>".into() })?,
        };

        // CFO: fiscal checks on the plan estimate
        self.approve(job_id, &tid, estimate, &task.description, "task_approved")?;

        // auction
        let now = self.clock.now();
        let broadcast = match self.bidding.broadcast_rfp(&self.registry, task, now) {
            Ok(b) => b,
            Err(e) => {
                self.emit(Role::Cfo, "auction_failed", Some(job_id), Some(tid.clone()), e.to_string(), Value::Null);
                return Err(e.into());
            }
        };
        let auth = &self.auth;
        let result = select_winner(&broadcast.rfp.rfp_id, &broadcast.bids, task.priority, |w| auth.score(w));
        let (Some(winner), Some(bid)) = (result.winner.clone(), result.winning_bid.clone()) else {
            self.emit(
                Role::Cfo,
                "auction_failed",
                Some(job_id),
                Some(tid.clone()),
                format!("No bids for {tid}"),
                Value::Null,
            );
            return Err(GovernanceError::NoBids { task_id: tid });
        };
        self.emit(
            Role::Cfo,
            "auction_awarded",
            Some(job_id),
            Some(tid.clone()),
            format!(
                "{} awarded to {winner} at {} (U = {})",
                broadcast.rfp.rfp_id,
                Cents(bid.estimated_cost_usd_cents),
                format_utility(&result.winning_utility, 5)
            ),
            json!({"auction": result.summary(), "recipients": broadcast.recipients, "late": broadcast.late}),
        );
        progress.auctions.push(result);

        // CFO: fit the winning bid to the runway
        let bid_cost = Cents(bid.estimated_cost_usd_cents);
        let runway = self.ledger.runway_usd_cents(self.treasury.bounds().min_reserve);
        let (debit, max_tokens) = if bid_cost > runway {
            let n = self.treasury.negotiate_token_budget(&self.ledger, bid_cost);
            self.emit(
                Role::Cfo,
                "budget_negotiated",
                Some(job_id),
                Some(tid.clone()),
                format!("Bid {bid_cost} exceeds runway {runway}; token budget cut to {}", n.max_tokens),
                serde_json::to_value(n).expect("budget serializes"),
            );
            (runway, task.estimated_token_budget.min(n.max_tokens))
        } else {
            (bid_cost, task.estimated_token_budget)
        };
        if debit > estimate {
            self.approve(job_id, &tid, debit, &task.description, "bid_approved")?;
        }

        // permission gate
        let cap = self.config.capability_for(&task.required_skill);
        if let Err(e) = self.auth.check_permission(&winner, cap) {
            self.emit(
                Role::System,
                "permission_denied",
                Some(job_id),
                Some(tid.clone()),
                e.to_string(),
                serde_json::to_value(&e).expect("error serializes"),
            );
            return Err(e.into());
        }
        self.emit(
            Role::System,
            "permission_granted",
            Some(job_id),
            Some(tid.clone()),
            format!("{winner} holds {cap} ({} >= {})", self.auth.score(&winner), cap.threshold()),
            json!({"agent_id": winner, "capability": cap, "score": self.auth.score(&winner), "threshold": cap.threshold()}),
        );

        // dispatch
        let profile = self.registry.get(&winner).expect("bidders are registered").clone();
        self.with_task(job_id, &tid, |t| {
            t.status = TaskStatus::Running;
            t.worker_id = Some(winner.clone());
        });
        self.emit(
            Role::System,
            "task_dispatched",
            Some(job_id),
            Some(tid.clone()),
            format!("Dispatched {tid} to {winner} (max {max_tokens} tokens)"),
            json!({"worker_id": winner, "max_tokens": max_tokens}),
        );
        let rules = self.rules.rules_for(&kpi);
        let result = match profile.execute(task, max_tokens, &rules) {
            Ok(r) => r,
            Err(e) => {
                let score = self.auth.record_budget_overrun(&winner)?;
                self.with_task(job_id, &tid, |t| {
                    t.status = TaskStatus::Failed;
                    t.reason = Some(e.to_string());
                });
                self.emit(
                    Role::Cfo,
                    "budget_overrun",
                    Some(job_id),
                    Some(tid.clone()),
                    format!("{e}; {winner} trust now {score}"),
                    serde_json::to_value(&e).expect("error serializes"),
                );
                return Ok(false);
            }
        };
        self.ledger.append(NewEntry::debit(debit, format!("task {tid}")).for_task(&tid).by_agent(&winner))?;
        self.ledger
            .append(NewEntry::tokens(result.tokens_used, format!("task {tid}")).for_task(&tid).by_agent(&winner))?;
        self.emit(
            Role::Cfo,
            "task_debited",
            Some(job_id),
            Some(tid.clone()),
            format!("Debited {debit} and {} tokens for {tid}", result.tokens_used),
            json!({"usd_cents": debit.get(), "tokens": result.tokens_used}),
        );
        if let Some(actual) = profile.actual_cost_cents.filter(|a| *a > bid.estimated_cost_usd_cents) {
            let score = self.auth.record_budget_overrun(&winner)?;
            self.emit(
                Role::Cfo,
                "budget_overrun",
                Some(job_id),
                Some(tid.clone()),
                format!("{winner} spent {} against a bid of {bid_cost}; trust now {score}", Cents(actual)),
                json!({"actual_usd_cents": actual, "bid_usd_cents": bid_cost.get()}),
            );
        }

        // audit
        let before = self.review.reflections().len();
        let report = self.review.audit_task(&tid, &winner, &result.output, &kpi, &mut self.auth)?;
        progress.reflections.extend(self.review.reflections()[before..].iter().cloned());
        let trust = self.auth.score(&winner);
        self.emit(
            Role::Audit,
            "task_audited",
            Some(job_id),
            Some(tid.clone()),
            format!(
                "{tid} scored {} on {}: {}; {winner} trust now {trust}",
                report.score,
                report.kpi_name,
                if report.passed { "PASS" } else { "FAIL" }
            ),
            json!({"report": report, "agent_id": winner, "trust": trust}),
        );
        let passed = report.passed;
        self.with_task(job_id, &tid, |t| {
            t.status = if passed { TaskStatus::Passed } else { TaskStatus::Failed };
            t.cost_usd_cents = Some(debit.get());
            t.tokens_used = Some(result.tokens_used);
            t.score = Some(report.score.to_string());
            t.reason = Some(report.reason.clone());
            t.suggested_fix = report.suggested_fix.clone();
            t.output = Some(result.output.clone());
        });
        progress.results.push(result);
        progress.audits.push(report);
        Ok(passed)
    }

    fn approve(
        &mut self,
        job_id: &str,
        tid: &str,
        cost: Cents,
        purpose: &str,
        kind: &str,
    ) -> Result<(), GovernanceError> {
        match self.treasury.approve_task(&self.ledger, cost, tid, purpose) {
            Ok(d) => {
                self.emit(
                    Role::Cfo,
                    kind,
                    Some(job_id),
                    Some(tid.to_string()),
                    d.reason.clone(),
                    serde_json::to_value(&d).expect("decision serializes"),
                );
                Ok(())
            }
            Err(e) => {
                self.emit(
                    Role::Cfo,
                    "task_denied",
                    Some(job_id),
                    Some(tid.to_string()),
                    e.message.clone(),
                    serde_json::to_value(&e).expect("error serializes"),
                );
                Err(e.into())
            }
        }
    }

    /// Token usage grouped by task, in ledger order.
    pub fn token_usage(&self) -> Vec<TokenUsage> {
        let mut out: Vec<TokenUsage> = Vec::new();
        for e in self.ledger.entries() {
            if !matches!(e.kind, EntryKind::TokenDebit | EntryKind::UsdDebit) {
                continue;
            }
            let key = e.task_id.clone().unwrap_or_default();
            let idx = match out.iter().position(|u| u.task_id == key && u.agent_id == e.agent_id) {
                Some(i) => i,
                None => {
                    out.push(TokenUsage { task_id: key, agent_id: e.agent_id.clone(), tokens: 0, usd_cents: 0 });
                    out.len() - 1
                }
            };
            match e.kind {
                EntryKind::TokenDebit => out[idx].tokens += e.amount,
                _ => out[idx].usd_cents += e.amount as i64,
            }
        }
        out
    }

    /// Paths of the JSONL stores when the engine is file-backed.
    pub fn store_paths(dir: &Path) -> BTreeSet<PathBuf> {
        [LEDGER_FILE, TRUST_FILE, TRAIL_FILE, REFLECTIONS_FILE, EVENTS_FILE].iter().map(|f| dir.join(f)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenUsage {
    pub task_id: String,
    pub agent_id: Option<String>,
    pub tokens: u64,
    pub usd_cents: i64,
}
