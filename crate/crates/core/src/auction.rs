//! Per-task auctions.
//!
//! Each task is offered to the registered workers that hold its skill. Bids
//! are scored with
//!
//! ```text
//! U = confidence / max(cost_cents, 1) * P * trust / 100,   P = 1.5 (HIGH) | 1.0 (LOW)
//! ```
//!
//! in exact rational arithmetic. The winner is the highest utility; ties go
//! to the cheaper bid, then the more confident one, then the smaller worker id.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::canonical::{BasisPoints, CanonicalValue};
use crate::clock::{format_utc, Timestamp};
use crate::strategist::{PlannedTask, Priority};
use crate::workers::WorkerRegistry;

pub type Utility = Ratio<i128>;

/// Default bid collection window, in seconds of simulated time.
pub const DEFAULT_BID_DEADLINE_S: u64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestForProposal {
    pub rfp_id: String,
    pub task_id: String,
    pub required_skill: String,
    pub description: String,
    pub priority: Priority,
    #[serde(default)]
    pub deadline: Option<String>,
}

impl RequestForProposal {
    pub fn for_task(rfp_id: impl Into<String>, task: &PlannedTask, deadline: Option<Timestamp>) -> Self {
        RequestForProposal {
            rfp_id: rfp_id.into(),
            task_id: task.task_id.clone(),
            required_skill: task.required_skill.clone(),
            description: task.description.clone(),
            priority: task.priority,
            deadline: deadline.as_ref().map(format_utc),
        }
    }

    pub fn to_canonical(&self) -> CanonicalValue {
        CanonicalValue::object([
            ("rfp_id", CanonicalValue::Str(self.rfp_id.clone())),
            ("task_id", CanonicalValue::Str(self.task_id.clone())),
            ("required_skill", CanonicalValue::Str(self.required_skill.clone())),
            ("description", CanonicalValue::Str(self.description.clone())),
            ("priority", CanonicalValue::Str(self.priority.to_string())),
            ("deadline", CanonicalValue::opt_str(self.deadline.as_deref())),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bid {
    pub rfp_id: String,
    pub worker_id: String,
    pub estimated_cost_usd_cents: i64,
    pub estimated_time_seconds: u64,
    pub confidence: BasisPoints,
    pub model_id: String,
}

impl Bid {
    pub fn to_canonical(&self) -> CanonicalValue {
        CanonicalValue::object([
            ("rfp_id", CanonicalValue::Str(self.rfp_id.clone())),
            ("worker_id", CanonicalValue::Str(self.worker_id.clone())),
            ("estimated_cost_usd_cents", CanonicalValue::Int(self.estimated_cost_usd_cents)),
            ("estimated_time_seconds", CanonicalValue::Int(self.estimated_time_seconds as i64)),
            ("confidence", self.confidence.to_canonical()),
            ("model_id", CanonicalValue::Str(self.model_id.clone())),
        ])
    }
}

fn priority_factor(p: Priority) -> Ratio<i128> {
    match p {
        Priority::High => Ratio::new(3, 2),
        Priority::Low => Ratio::from_integer(1),
    }
}

/// Exact auction utility; zero-cost bids are treated as costing one cent.
pub fn utility(bid: &Bid, priority: Priority, trust_score: u8) -> Utility {
    assert!(trust_score <= 100, "trust score out of range");
    let cost = bid.estimated_cost_usd_cents.max(1) as i128;
    let confidence = Ratio::new(i128::from(bid.confidence.get()), 10_000);
    confidence / cost * priority_factor(priority) * Ratio::new(i128::from(trust_score), 100)
}

/// Rounds half away from zero to `places` decimals, for logs and displays.
pub fn format_utility(u: &Utility, places: u32) -> String {
    let scale = 10i128.pow(places);
    let scaled = (u * scale).round().to_integer();
    let whole = scaled / scale;
    let frac = (scaled % scale).abs();
    format!("{whole}.{frac:0width$}", width = places as usize)
}

pub fn utility_f64(u: &Utility) -> f64 {
    u.to_f64().unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionResult {
    pub rfp_id: String,
    pub winner: Option<String>,
    pub winning_bid: Option<Bid>,
    pub winning_utility: Utility,
    pub all_utilities: BTreeMap<String, Utility>,
}

impl AuctionResult {
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "rfp_id": self.rfp_id,
            "winner": self.winner,
            "winning_bid": self.winning_bid,
            "winning_utility": format_utility(&self.winning_utility, 6),
            "utilities": self.all_utilities.iter().map(|(w, u)| (w.clone(), format_utility(u, 6))).collect::<BTreeMap<_, _>>(),
        })
    }
}

impl Serialize for AuctionResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.summary().serialize(s)
    }
}

/// Total order used for winner selection; `Less` means `a` beats `b`.
pub fn rank(a: (&Bid, &Utility), b: (&Bid, &Utility)) -> Ordering {
    b.1.cmp(a.1)
        .then(a.0.estimated_cost_usd_cents.cmp(&b.0.estimated_cost_usd_cents))
        .then(b.0.confidence.cmp(&a.0.confidence))
        .then(a.0.worker_id.cmp(&b.0.worker_id))
}

pub fn select_winner(
    rfp_id: &str,
    bids: &[Bid],
    priority: Priority,
    trust_lookup: impl Fn(&str) -> u8,
) -> AuctionResult {
    let scored: Vec<(&Bid, Utility)> =
        bids.iter().map(|b| (b, utility(b, priority, trust_lookup(&b.worker_id)))).collect();
    let best = scored.iter().min_by(|a, b| rank((a.0, &a.1), (b.0, &b.1)));
    AuctionResult {
        rfp_id: rfp_id.to_string(),
        winner: best.map(|(b, _)| b.worker_id.clone()),
        winning_bid: best.map(|(b, _)| (*b).clone()),
        winning_utility: best.map(|(_, u)| *u).unwrap_or_else(Utility::zero),
        all_utilities: scored.iter().map(|(b, u)| (b.worker_id.clone(), *u)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no registered worker has skill {skill:?} (task {task_id})")]
pub struct NoEligibleWorkers {
    pub task_id: String,
    pub skill: String,
}

/// What a broadcast produced: the RFP, the workers it reached and the bids that arrived in time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Broadcast {
    pub rfp: RequestForProposal,
    pub recipients: Vec<String>,
    pub bids: Vec<Bid>,
    /// Bids that arrived after the deadline.
    pub late: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BiddingEngine {
    pub deadline_s: u64,
    issued: u64,
}

impl Default for BiddingEngine {
    fn default() -> Self {
        BiddingEngine { deadline_s: DEFAULT_BID_DEADLINE_S, issued: 0 }
    }
}

impl BiddingEngine {
    pub fn new(deadline_s: u64) -> Self {
        BiddingEngine { deadline_s, issued: 0 }
    }

    /// Sends an RFP to every worker with the task's skill and collects the bids.
    pub fn broadcast_rfp(
        &mut self,
        registry: &WorkerRegistry,
        task: &PlannedTask,
        now: Timestamp,
    ) -> Result<Broadcast, NoEligibleWorkers> {
        let eligible: Vec<_> = registry.with_skill(&task.required_skill).collect();
        if eligible.is_empty() {
            return Err(NoEligibleWorkers { task_id: task.task_id.clone(), skill: task.required_skill.clone() });
        }
        self.issued += 1;
        let deadline = now + chrono::Duration::seconds(self.deadline_s as i64);
        let rfp = RequestForProposal::for_task(format!("rfp-{}", self.issued), task, Some(deadline));
        let mut bids = Vec::new();
        let mut late = Vec::new();
        for w in &eligible {
            if let Some(bid) = w.bid_for(&rfp) {
                if w.bid_delay_s > self.deadline_s {
                    late.push(w.worker_id.clone());
                } else {
                    bids.push(bid);
                }
            }
        }
        Ok(Broadcast { rfp, recipients: eligible.iter().map(|w| w.worker_id.clone()).collect(), bids, late })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workers::WorkerProfile;

    fn bid(worker: &str, cost: i64, conf_bp: u32) -> Bid {
        Bid {
            rfp_id: "rfp-1".into(),
            worker_id: worker.into(),
            estimated_cost_usd_cents: cost,
            estimated_time_seconds: 60,
            confidence: BasisPoints::new(conf_bp).unwrap(),
            model_id: "m".into(),
        }
    }

    #[test]
    fn case_study_utility() {
        let u = utility(&bid("w", 4, 7000), Priority::Low, 55);
        assert_eq!(u, Ratio::new(9625, 100_000));
        assert_eq!(format_utility(&u, 3), "0.096");
        assert_eq!(format_utility(&u, 6), "0.096250");
        let h = utility(&bid("w", 4, 7000), Priority::High, 55);
        assert_eq!(h, Ratio::new(144_375, 1_000_000));
        assert_eq!(h, u * Ratio::new(3, 2));
    }

    #[test]
    fn zero_factors() {
        assert!(utility(&bid("w", 4, 7000), Priority::Low, 0).is_zero());
        assert!(utility(&bid("w", 4, 0), Priority::Low, 55).is_zero());
        // zero cost is clamped to one cent
        assert_eq!(utility(&bid("w", 0, 7000), Priority::Low, 100), utility(&bid("w", 1, 7000), Priority::Low, 100));
    }

    #[test]
    fn single_and_tied_bids() {
        let r = select_winner("rfp-1", &[bid("solo", 9, 1000)], Priority::Low, |_| 50);
        assert_eq!(r.winner.as_deref(), Some("solo"));
        let r = select_winner("rfp-1", &[bid("worker_b", 4, 7000), bid("worker_a", 4, 7000)], Priority::Low, |_| 50);
        assert_eq!(r.winner.as_deref(), Some("worker_a"));
        let r = select_winner("rfp-1", &[], Priority::Low, |_| 50);
        assert_eq!(r.winner, None);
        assert!(r.all_utilities.is_empty());
    }

    #[test]
    fn tie_breaks_prefer_cheaper_then_confident() {
        // equal utility: 0.4/2 == 0.8/4
        let r = select_winner("r", &[bid("z", 4, 8000), bid("y", 2, 4000)], Priority::Low, |_| 50);
        assert_eq!(r.winner.as_deref(), Some("y"));
    }

    #[test]
    fn broadcast_reaches_skill_holders_only() {
        let mut reg = WorkerRegistry::new();
        for (id, cost) in [("a", 4), ("b", 6), ("c", 5)] {
            reg.register(WorkerProfile::simple(id, &["email_writing"], cost, 7000)).unwrap();
        }
        reg.register(WorkerProfile::simple("r", &["research"], 1, 7000)).unwrap();
        let mut silent = WorkerProfile::simple("quiet", &["email_writing"], 1, 9000);
        silent.declines_bids = true;
        reg.register(silent).unwrap();
        let mut slow = WorkerProfile::simple("slow", &["email_writing"], 1, 9000);
        slow.bid_delay_s = 30;
        reg.register(slow).unwrap();

        let task = PlannedTask {
            task_id: "task-2-email_writing".into(),
            description: "Draft".into(),
            depends_on: vec![],
            required_skill: "email_writing".into(),
            estimated_token_budget: 4000,
            priority: Priority::Low,
            kpi: None,
        };
        let now = crate::clock::parse_utc("2026-03-14T10:00:00Z").unwrap();
        let mut engine = BiddingEngine::default();
        let b = engine.broadcast_rfp(&reg, &task, now).unwrap();
        assert_eq!(b.recipients.len(), 5);
        assert_eq!(b.bids.len(), 3);
        assert_eq!(b.late, vec!["slow"]);
        assert_eq!(b.rfp.deadline.as_deref(), Some("2026-03-14T10:00:05Z"));

        let mut other = task.clone();
        other.required_skill = "alchemy".into();
        assert!(engine.broadcast_rfp(&reg, &other, now).is_err());
    }

    #[test]
    fn wire_messages_are_canonical() {
        let b = bid("w", 4, 7000);
        assert_eq!(
            b.to_canonical().to_canonical_string(),
            r#"{"confidence": 0.7, "estimated_cost_usd_cents": 4, "estimated_time_seconds": 60, "model_id": "m", "rfp_id": "rfp-1", "worker_id": "w"}"#
        );
        let parsed: Bid = serde_json::from_str(&b.to_canonical().to_canonical_string()).unwrap();
        assert_eq!(parsed, b);
    }
}
