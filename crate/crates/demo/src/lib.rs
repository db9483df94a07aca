//! Three interactive explorers over the governor core, compiled to
//! WebAssembly for the static page in `www/`.
//!
//! Each exported function takes a JSON string and returns a JSON string of
//! the form `{"ok": true, "data": ...}` or `{"ok": false, "error": "..."}`.
//! The plain Rust functions behind them are usable natively too.

use std::sync::Arc;

use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use governor_core::auction::{format_utility, rank, select_winner, utility, Bid};
use governor_core::auth::{Capability, TrustAuthority};
use governor_core::canonical::BasisPoints;
use governor_core::charter::{load_charter, EXAMPLE_CHARTER_YAML};
use governor_core::clock::{from_unix, ManualClock};
use governor_core::ledger::{Ledger, NewEntry};
use governor_core::money::Cents;
use governor_core::strategist::Priority;
use governor_core::treasury::{negotiated_tokens, Treasury};

// 2026-03-14T12:00:00Z
const NOW: i64 = 1_773_489_600;

#[derive(Debug, Deserialize)]
pub struct BidInput {
    pub worker_id: String,
    pub cost_cents: i64,
    /// In [0, 1].
    pub confidence: f64,
    pub trust: u8,
}

#[derive(Debug, Deserialize)]
pub struct AuctionInput {
    #[serde(default)]
    pub high_priority: bool,
    pub bids: Vec<BidInput>,
}

pub fn explore_auction(input: &AuctionInput) -> Result<Value, String> {
    let priority = if input.high_priority { Priority::High } else { Priority::Low };
    let mut bids = Vec::new();
    for b in &input.bids {
        if b.worker_id.trim().is_empty() {
            return Err("every bid needs a worker id".into());
        }
        if b.trust > 100 {
            return Err(format!("{}: trust must be 0..=100", b.worker_id));
        }
        if b.cost_cents < 0 {
            return Err(format!("{}: cost must be non-negative", b.worker_id));
        }
        let confidence = BasisPoints::from_f64(b.confidence)
            .ok_or_else(|| format!("{}: confidence must be in [0, 1]", b.worker_id))?;
        bids.push(Bid {
            rfp_id: "rfp-demo".into(),
            worker_id: b.worker_id.clone(),
            estimated_cost_usd_cents: b.cost_cents,
            estimated_time_seconds: 0,
            confidence,
            model_id: "demo".into(),
        });
    }
    let trust_of = |id: &str| input.bids.iter().find(|b| b.worker_id == id).map_or(0, |b| b.trust);
    let result = select_winner("rfp-demo", &bids, priority, trust_of);

    let mut scored: Vec<_> = bids.iter().map(|b| (b, utility(b, priority, trust_of(&b.worker_id)))).collect();
    scored.sort_by(|a, b| rank((a.0, &a.1), (b.0, &b.1)));
    let rows: Vec<Value> = scored
        .iter()
        .enumerate()
        .map(|(i, (b, u))| {
            json!({
                "rank": i + 1,
                "worker_id": b.worker_id,
                "cost_cents": b.estimated_cost_usd_cents,
                "confidence": b.confidence.get() as f64 / 10_000.0,
                "trust": trust_of(&b.worker_id),
                "utility": format_utility(u, 6),
                "utility_exact": format!("{}/{}", u.numer(), u.denom()),
            })
        })
        .collect();
    Ok(json!({
        "priority": priority.to_string(),
        "winner": result.winner,
        "winning_utility": format_utility(&result.winning_utility, 6),
        "rows": rows,
    }))
}

#[derive(Debug, Deserialize)]
pub struct TrustInput {
    /// One letter per event: `s` audit success, `f` audit failure, `o` budget overrun.
    pub steps: String,
    #[serde(default)]
    pub initial_successes: usize,
}

pub fn trust_trajectory(input: &TrustInput) -> Result<Value, String> {
    let mut auth = TrustAuthority::in_memory(Arc::new(ManualClock::at(from_unix(NOW))));
    let agent = "agent";
    auth.seed_successes(agent, input.initial_successes).map_err(|e| e.to_string())?;
    let granted = |auth: &TrustAuthority| auth.granted(agent).iter().map(|c| c.as_str()).collect::<Vec<_>>();
    let mut points = vec![json!({
        "step": 0,
        "event": "start",
        "delta": 0,
        "score": auth.score(agent),
        "granted": granted(&auth),
    })];
    for (i, c) in input.steps.chars().filter(|c| !c.is_whitespace() && *c != ',').enumerate() {
        let before = auth.score(agent);
        let (event, score) = match c.to_ascii_lowercase() {
            's' => ("audit_success", auth.record_audit_success(agent)),
            'f' => ("audit_failure", auth.record_audit_failure(agent)),
            'o' => ("budget_overrun", auth.record_budget_overrun(agent)),
            other => return Err(format!("step {}: unknown event {other:?}; use s, f or o", i + 1)),
        };
        let score = score.map_err(|e| e.to_string())?;
        points.push(json!({
            "step": i + 1,
            "event": event,
            "delta": i32::from(score) - i32::from(before),
            "score": score,
            "granted": granted(&auth),
        }));
    }
    let thresholds: Vec<Value> =
        Capability::ALL.iter().map(|c| json!({"capability": c.as_str(), "threshold": c.threshold()})).collect();
    let replayed = auth.record(agent).map_or(auth.score(agent), |r| r.replay());
    Ok(json!({
        "points": points,
        "thresholds": thresholds,
        "final_score": auth.score(agent),
        "replayed_score": replayed,
    }))
}

#[derive(Debug, Deserialize)]
pub struct FiscalInput {
    pub balance_cents: i64,
    #[serde(default)]
    pub reserve_cents: i64,
    #[serde(default)]
    pub spent_today_cents: i64,
    /// Debits on earlier days; they count toward the budget ceiling only.
    #[serde(default)]
    pub spent_before_cents: i64,
    pub daily_cap_cents: i64,
    pub max_budget_cents: i64,
    pub cost_cents: i64,
    #[serde(default)]
    pub revenue_cents: Option<i64>,
    /// Decimal string in [0, 1], e.g. `"0.35"`.
    #[serde(default)]
    pub margin: Option<String>,
}

pub fn fiscal_check(input: &FiscalInput) -> Result<Value, String> {
    for (name, v) in [
        ("balance", input.balance_cents),
        ("reserve", input.reserve_cents),
        ("spent today", input.spent_today_cents),
        ("spent before", input.spent_before_cents),
        ("daily cap", input.daily_cap_cents),
        ("max budget", input.max_budget_cents),
        ("cost", input.cost_cents),
        ("revenue", input.revenue_cents.unwrap_or(0)),
    ] {
        if v < 0 {
            return Err(format!("{name} must be non-negative"));
        }
    }

    // go through the charter loader so the same validation applies
    let base = load_charter(EXAMPLE_CHARTER_YAML).map_err(|e| e.to_string())?;
    let mut doc = base.to_document();
    let fb = &mut doc["fiscal_boundaries"];
    fb["daily_burn_max_usd"] = dollars(input.daily_cap_cents);
    fb["max_budget_usd"] = dollars(input.max_budget_cents);
    fb["min_reserve_usd"] = dollars(input.reserve_cents);
    if let Some(m) = &input.margin {
        fb["min_job_margin_ratio"] =
            serde_json::from_str(m.trim()).map_err(|_| format!("margin {m:?} is not a number"))?;
    }
    let charter = load_charter(&doc.to_string()).map_err(|e| e.to_string())?;
    let treasury = Treasury::new(charter.fiscal_boundaries.clone());

    let clock = Arc::new(ManualClock::at(from_unix(NOW - 86_400)));
    let mut ledger = Ledger::in_memory(clock.clone());
    let opening = input.balance_cents + input.spent_today_cents + input.spent_before_cents;
    let err = |e: governor_core::ledger::LedgerError| e.to_string();
    ledger.append(NewEntry::credit(Cents(opening), "opening balance")).map_err(err)?;
    ledger.append(NewEntry::debit(Cents(input.spent_before_cents), "earlier spend")).map_err(err)?;
    clock.set(from_unix(NOW));
    ledger.append(NewEntry::debit(Cents(input.spent_today_cents), "today's spend")).map_err(err)?;

    let cost = input.cost_cents;
    let b = &charter.fiscal_boundaries;
    let lifetime = ledger.lifetime_usd_debits().get();
    let checks = [
        (
            "BALANCE",
            input.balance_cents - cost,
            ">=",
            b.min_reserve.get(),
            input.balance_cents - cost >= b.min_reserve.get(),
        ),
        (
            "DAILY_CAP",
            ledger.daily_debits().get() + cost,
            "<=",
            b.daily_burn_max.get(),
            ledger.daily_debits().get() + cost <= b.daily_burn_max.get(),
        ),
        ("BUDGET_CEILING", lifetime + cost, "<=", b.max_budget.get(), lifetime + cost <= b.max_budget.get()),
    ];
    let checks: Vec<Value> = checks
        .iter()
        .map(|(name, lhs, op, rhs, passed)| json!({"check": name, "lhs_cents": lhs, "op": op, "rhs_cents": rhs, "passed": passed}))
        .collect();

    let decision = match treasury.approve_task(&ledger, Cents(cost), "task-demo", "demo") {
        Ok(d) => json!({"approved": true, "check_failed": null, "reason": d.reason}),
        Err(e) => json!({"approved": false, "check_failed": e.check, "reason": e.message}),
    };
    let runway = ledger.runway_usd_cents(b.min_reserve);
    let profitability = input.revenue_cents.map(|r| {
        let max = treasury.max_allowed_cost(Cents(r));
        match treasury.approve_job_profitability(Cents(r), Cents(cost)) {
            Ok(d) => json!({"approved": true, "max_allowed_cost_cents": max.get(), "reason": d.reason}),
            Err(e) => json!({"approved": false, "max_allowed_cost_cents": max.get(), "reason": e.message}),
        }
    });
    Ok(json!({
        "checks": checks,
        "decision": decision,
        "runway_cents": runway.get(),
        "negotiated_tokens": (cost > runway.get()).then(|| negotiated_tokens(runway)),
        "profitability": profitability,
    }))
}

fn dollars(cents: i64) -> Value {
    json!(cents as f64 / 100.0)
}

fn envelope(result: Result<Value, String>) -> String {
    match result {
        Ok(data) => json!({"ok": true, "data": data}),
        Err(error) => json!({"ok": false, "error": error}),
    }
    .to_string()
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = exploreAuction)]
pub fn explore_auction_json(input: &str) -> String {
    envelope(parse(input).and_then(|i| explore_auction(&i)))
}

#[wasm_bindgen(js_name = trustTrajectory)]
pub fn trust_trajectory_json(input: &str) -> String {
    envelope(parse(input).and_then(|i| trust_trajectory(&i)))
}

#[wasm_bindgen(js_name = fiscalCheck)]
pub fn fiscal_check_json(input: &str) -> String {
    envelope(parse(input).and_then(|i| fiscal_check(&i)))
}
