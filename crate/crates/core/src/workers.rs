//! Worker registry, simulated workers and the payment provider interface.
//!
//! Simulated workers are fully deterministic. Their output is generated from
//! a template so that the rule judge's verdict follows from the behavior
//! profile: consistent workers always pass, failing workers never do, and
//! mixed workers pass according to a seeded draw keyed by task.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::auction::{Bid, RequestForProposal};
use crate::canonical::BasisPoints;
use crate::clock::{serde_utc, Timestamp};
use crate::ledger::{Ledger, LedgerError, NewEntry};
use crate::money::Cents;
use crate::review::KpiRules;
use crate::strategist::PlannedTask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Behavior {
    ConsistentSuccess,
    Mixed,
    FrequentFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidPolicy {
    pub cost_cents: i64,
    pub time_s: u64,
    pub confidence: BasisPoints,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerProfile {
    pub worker_id: String,
    pub skills: BTreeSet<String>,
    pub bid_policy: BidPolicy,
    pub behavior: Behavior,
    /// Tokens consumed per task.
    pub token_rate: u64,
    pub seed: u64,
    /// Fail with `TokenBudgetExhausted` instead of truncating when over budget.
    #[serde(default)]
    pub strict_tokens: bool,
    /// Cost actually incurred when it differs from the bid estimate.
    #[serde(default)]
    pub actual_cost_cents: Option<i64>,
    /// Never answers RFPs.
    #[serde(default)]
    pub declines_bids: bool,
    /// Simulated bid latency; bids slower than the auction deadline are dropped.
    #[serde(default)]
    pub bid_delay_s: u64,
    /// Audit successes already on record when the worker is registered.
    #[serde(default)]
    pub initial_successes: u32,
}

impl WorkerProfile {
    /// A minimal consistent worker, handy for tests and demos.
    pub fn simple(worker_id: &str, skills: &[&str], cost_cents: i64, confidence_bp: u32) -> Self {
        WorkerProfile {
            worker_id: worker_id.to_string(),
            skills: skills.iter().map(|s| s.to_string()).collect(),
            bid_policy: BidPolicy {
                cost_cents,
                time_s: 60,
                confidence: BasisPoints::new(confidence_bp).expect("confidence in range"),
                model_id: "sim".into(),
            },
            behavior: Behavior::ConsistentSuccess,
            token_rate: 1000,
            seed: 0,
            strict_tokens: false,
            actual_cost_cents: None,
            declines_bids: false,
            bid_delay_s: 0,
            initial_successes: 0,
        }
    }

    pub fn with_behavior(mut self, behavior: Behavior) -> Self {
        self.behavior = behavior;
        self
    }

    pub fn bid_for(&self, rfp: &RequestForProposal) -> Option<Bid> {
        if self.declines_bids || !self.skills.contains(&rfp.required_skill) {
            return None;
        }
        Some(Bid {
            rfp_id: rfp.rfp_id.clone(),
            worker_id: self.worker_id.clone(),
            estimated_cost_usd_cents: self.bid_policy.cost_cents,
            estimated_time_seconds: self.bid_policy.time_s,
            confidence: self.bid_policy.confidence,
            model_id: self.bid_policy.model_id.clone(),
        })
    }

    /// Whether this worker's output for `task_id` is meant to pass audit.
    pub fn intends_success(&self, task_id: &str) -> bool {
        match self.behavior {
            Behavior::ConsistentSuccess => true,
            Behavior::FrequentFailure => false,
            Behavior::Mixed => mixed_draw(self.seed, task_id),
        }
    }

    pub fn execute(
        &self,
        task: &PlannedTask,
        max_tokens: u64,
        rules: &KpiRules,
    ) -> Result<TaskResult, TokenBudgetExhausted> {
        if self.strict_tokens && self.token_rate > max_tokens {
            return Err(TokenBudgetExhausted {
                worker_id: self.worker_id.clone(),
                task_id: task.task_id.clone(),
                needed: self.token_rate,
                max_tokens,
            });
        }
        let output = if self.intends_success(&task.task_id) {
            passing_output(task, rules)
        } else {
            failing_output(&self.worker_id)
        };
        Ok(TaskResult {
            task_id: task.task_id.clone(),
            worker_id: self.worker_id.clone(),
            output,
            tokens_used: self.token_rate.min(max_tokens),
            succeeded_execution: true,
        })
    }
}

/// Fair coin keyed by `(seed, task_id)`.
pub fn mixed_draw(seed: u64, task_id: &str) -> bool {
    let digest = Sha256::digest(task_id.as_bytes());
    let mut key = [0u8; 8];
    key.copy_from_slice(&digest[..8]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from_le_bytes(key));
    rng.gen_bool(0.5)
}

fn passing_output(task: &PlannedTask, rules: &KpiRules) -> String {
    let mut out = String::new();
    for m in &rules.markers {
        out.push_str(m);
        out.push(' ');
    }
    out.push_str(&format!("{}.\n\n", task.description));
    out.push_str("This deliverable covers: ");
    out.push_str(&rules.required_keywords.join(", "));
    out.push_str(".\n");
    let target = rules.min_chars.max(1);
    while out.chars().count() < target {
        out.push_str("Each point is stated plainly and backed by the research notes.\n");
    }
    if out.chars().count() > rules.max_chars {
        out = out.chars().take(rules.max_chars).collect();
    }
    out
}

fn failing_output(worker_id: &str) -> String {
    format!("[{worker_id}] unfinished")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub worker_id: String,
    pub output: String,
    pub tokens_used: u64,
    pub succeeded_execution: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("worker {worker_id} needs {needed} tokens for {task_id} but the budget is {max_tokens}")]
pub struct TokenBudgetExhausted {
    pub worker_id: String,
    pub task_id: String,
    pub needed: u64,
    pub max_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("worker {0} is already registered")]
pub struct DuplicateWorker(pub String);

#[derive(Debug, Clone, Default)]
pub struct WorkerRegistry {
    workers: BTreeMap<String, WorkerProfile>,
}

impl WorkerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, profile: WorkerProfile) -> Result<(), DuplicateWorker> {
        if self.workers.contains_key(&profile.worker_id) {
            return Err(DuplicateWorker(profile.worker_id));
        }
        self.workers.insert(profile.worker_id.clone(), profile);
        Ok(())
    }

    /// Parses a JSON or YAML list of profiles.
    pub fn profiles_from_config(text: &str) -> Result<Vec<WorkerProfile>, serde_yaml::Error> {
        serde_yaml::from_str(text)
    }

    pub fn get(&self, worker_id: &str) -> Option<&WorkerProfile> {
        self.workers.get(worker_id)
    }

    pub fn len(&self) -> usize {
        self.workers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workers.is_empty()
    }

    /// Profiles in worker-id order.
    pub fn iter(&self) -> impl Iterator<Item = &WorkerProfile> {
        self.workers.values()
    }

    pub fn with_skill<'a>(&'a self, skill: &'a str) -> impl Iterator<Item = &'a WorkerProfile> + 'a {
        self.workers.values().filter(move |w| w.skills.contains(skill))
    }
}

pub const EXAMPLE_WORKERS_JSON: &str = include_str!("../fixtures/workers.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentReceipt {
    pub job_id: String,
    pub amount_usd_cents: i64,
    pub provider_ref: String,
    #[serde(with = "serde_utc")]
    pub timestamp_utc: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("payment of {amount} for job {job_id} declined: {reason}")]
pub struct PaymentDeclined {
    pub job_id: String,
    pub amount: Cents,
    pub reason: String,
}

pub trait PaymentProvider: Send + Sync {
    fn charge(&mut self, job_id: &str, amount: Cents, now: Timestamp) -> Result<PaymentReceipt, PaymentDeclined>;
}

/// Issues sequential `mock_ch_` references; can be switched to decline everything.
#[derive(Debug, Default, Clone)]
pub struct MockPaymentProvider {
    pub decline: bool,
    issued: u64,
}

impl MockPaymentProvider {
    pub fn declining() -> Self {
        MockPaymentProvider { decline: true, issued: 0 }
    }
}

impl PaymentProvider for MockPaymentProvider {
    fn charge(&mut self, job_id: &str, amount: Cents, now: Timestamp) -> Result<PaymentReceipt, PaymentDeclined> {
        if self.decline {
            return Err(PaymentDeclined { job_id: job_id.to_string(), amount, reason: "card_declined".into() });
        }
        self.issued += 1;
        Ok(PaymentReceipt {
            job_id: job_id.to_string(),
            amount_usd_cents: amount.get(),
            provider_ref: format!("mock_ch_{:06}", self.issued),
            timestamp_utc: now,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ChargeError {
    #[error(transparent)]
    Declined(#[from] PaymentDeclined),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Charges the job's revenue and records the matching credit.
pub fn charge(
    provider: &mut dyn PaymentProvider,
    ledger: &mut Ledger,
    job_id: &str,
    amount: Cents,
) -> Result<PaymentReceipt, ChargeError> {
    let receipt = provider.charge(job_id, amount, ledger.now())?;
    ledger.append(NewEntry::credit(amount, format!("payment {} for {job_id}", receipt.provider_ref)))?;
    Ok(receipt)
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Behavior::ConsistentSuccess => "CONSISTENT_SUCCESS",
            Behavior::Mixed => "MIXED",
            Behavior::FrequentFailure => "FREQUENT_FAILURE",
        })
    }
}
