use std::sync::Arc;

use governor_core::auction::format_utility;
use governor_core::auth::Capability;
use governor_core::clock::{parse_utc, ManualClock};
use governor_core::engine::{EngineSetup, GovernanceEngine, JobState, Role, TaskStatus, AUDIT_FAILURE_REASON};
use governor_core::ledger::EntryKind;
use governor_core::money::Cents;
use governor_core::workers::{Behavior, MockPaymentProvider, WorkerProfile};

const GOAL: &str = "Write a cold outreach email sequence";

fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::at(parse_utc("2026-03-14T10:00:00Z").unwrap()))
}

fn token_entries(e: &GovernanceEngine) -> usize {
    e.ledger().entries().iter().filter(|x| x.kind == EntryKind::TokenDebit).count()
}

#[test]
fn case_study_golden_run() {
    let mut e = GovernanceEngine::example(clock());
    assert_eq!(e.trust().score("writer-alpha"), 55);
    let out = e.run_mission_with_audit(GOAL, Some(Cents(500))).unwrap();

    let ids: Vec<_> = out.plan.tasks.iter().map(|t| t.task_id.as_str()).collect();
    assert_eq!(ids, ["task-1-research", "task-2-email_writing", "task-3-email_writing"]);
    assert_eq!(out.plan.tasks[1].depends_on, ["task-1-research"]);
    assert_eq!(out.plan.tasks[2].depends_on, ["task-2-email_writing"]);

    let approved = e.decision_stream(0).iter().find(|ev| ev.kind == "job_approved").unwrap();
    assert_eq!(approved.payload["cost_usd_cents"], 12);
    assert_eq!(approved.payload["max_allowed_cost_usd_cents"], 325);

    let task2 = &out.auctions[1];
    assert_eq!(task2.winner.as_deref(), Some("writer-alpha"));
    assert_eq!(task2.all_utilities.len(), 3);
    assert_eq!(*task2.winning_utility.numer() * 100_000, 9625 * *task2.winning_utility.denom());
    assert_eq!(format_utility(&task2.winning_utility, 3), "0.096");
    assert_eq!(out.auctions[0].winner.as_deref(), Some("researcher-delta"));

    assert_eq!(out.audits.len(), 3);
    assert!(out.audits.iter().all(|a| a.passed && a.verify_integrity()));
    assert_eq!(e.review().trail().len(), 3);
    assert!(e.review().verify().unwrap().is_clean());
    assert_eq!(e.trust().score("writer-alpha"), 65);
    assert_eq!(e.trust().score("researcher-delta"), 55);

    let job = e.job(&out.job_id).unwrap();
    assert_eq!(job.state, JobState::Completed);
    assert_eq!(job.history, [JobState::Pending, JobState::Approved, JobState::Running, JobState::Completed]);
    assert_eq!(job.receipt.as_ref().unwrap().amount_usd_cents, 500);
    assert!(job.deliverable.as_ref().unwrap().contains("## task-3-email_writing"));

    // 50000 opening + 500 revenue - 12 for three tasks
    assert_eq!(e.ledger().total_usd_cents(), Cents(50_488));
    assert_eq!(token_entries(&e), 3);
    let credits: Vec<_> =
        e.ledger().entries().iter().filter(|x| x.kind == EntryKind::UsdCredit).map(|x| x.amount).collect();
    assert_eq!(credits, [50_000, 500]);
}

#[test]
fn replay_is_identical() {
    let run = || {
        let mut e = GovernanceEngine::example(clock());
        let out = e.run_mission_with_audit(GOAL, Some(Cents(500))).unwrap();
        let events: Vec<_> =
            e.decision_stream(0).iter().map(|ev| (ev.role, ev.kind.clone(), ev.message.clone())).collect();
        (out.digest(), events)
    };
    assert_eq!(run(), run());
}

#[test]
fn unprofitable_job_never_executes() {
    let mut e = GovernanceEngine::example(clock());
    let err = e.run_mission_with_audit("Produce a market landscape report", Some(Cents(500))).unwrap_err();
    assert_eq!(err.code(), "UNPROFITABLE_JOB");
    assert_eq!(err.to_string(), "Cost 400c exceeds max 325c (margin floor 0.35)");
    assert_eq!(token_entries(&e), 0);
    let job = &e.jobs()[0];
    assert_eq!(job.history, [JobState::Pending, JobState::Failed]);
    assert!(!job.history.contains(&JobState::Running));
}

#[test]
fn permission_gate_blocks_dispatch() {
    let mut setup = EngineSetup::example(clock());
    setup.config.skill_capabilities.insert("research".into(), Capability::ExecuteShell);
    let mut e = GovernanceEngine::new(setup).unwrap();
    let err = e.run_mission_with_audit(GOAL, Some(Cents(500))).unwrap_err();
    assert_eq!(err.code(), "PERMISSION_DENIED");
    assert!(err.to_string().contains("researcher-delta"));
    assert_eq!(token_entries(&e), 0);
    assert!(!e.decision_stream(0).iter().any(|ev| ev.kind == "task_dispatched"));
    let job = &e.jobs()[0];
    assert_eq!(job.state, JobState::Failed);
    assert_eq!(job.failure_code.as_deref(), Some("PERMISSION_DENIED"));
}

fn failing_setup() -> EngineSetup {
    let mut setup = EngineSetup::example(clock());
    // only a failing writer is available
    setup.workers.retain(|w| !w.skills.contains("email_writing"));
    let mut w =
        WorkerProfile::simple("writer-echo", &["email_writing"], 4, 7000).with_behavior(Behavior::FrequentFailure);
    w.token_rate = 1000;
    setup.workers.push(w);
    setup
}

#[test]
fn failed_audit_fails_job_and_skips_dependents() {
    let mut e = GovernanceEngine::new(failing_setup()).unwrap();
    e.submit_job(GOAL, Some(Cents(500))).unwrap();
    let job = e.process_next().unwrap();
    assert_eq!(job.state, JobState::Failed);
    assert_eq!(job.failure_reason.as_deref(), Some(AUDIT_FAILURE_REASON));
    let status: Vec<_> = job.tasks.iter().map(|t| t.status).collect();
    assert_eq!(status, [TaskStatus::Passed, TaskStatus::Failed, TaskStatus::Skipped]);
    assert!(job.receipt.is_none());
    assert!(!e.ledger().entries().iter().any(|x| x.amount == 500 && x.kind == EntryKind::UsdCredit));
    assert_eq!(e.trust().score("writer-echo"), 35);
    assert_eq!(job.reflections.len(), 1);
    assert!(job.tasks[1].suggested_fix.is_some());
}

#[test]
fn retry_requeues_with_reflections() {
    let mut e = GovernanceEngine::new(failing_setup()).unwrap();
    let id = e.submit_job(GOAL, None).unwrap().job_id;
    e.process_next();
    let trail_before = e.review().trail().to_vec();

    let job = e.retry_job(&id).unwrap();
    assert_eq!(job.state, JobState::Pending);
    assert_eq!(job.reflections.len(), 1);
    let plan_ev = e.decision_stream(0).iter().filter(|ev| ev.kind == "plan_created").count();
    assert_eq!(plan_ev, 1);

    // the echo writer is now at 35 and loses WRITE_FILES, so the retry stops at the gate
    let job = e.process_next().unwrap();
    assert_eq!(job.state, JobState::Failed);
    assert_eq!(job.failure_code.as_deref(), Some("PERMISSION_DENIED"));
    let reflections =
        e.decision_stream(0).iter().rfind(|ev| ev.kind == "plan_created").unwrap().payload["reflections"].clone();
    assert_eq!(reflections, 1);
    assert_eq!(&e.review().trail()[..trail_before.len()], trail_before.as_slice());
    assert_eq!(job.attempts, 2);

    e.register_worker(WorkerProfile::simple("writer-fox", &["email_writing"], 3, 9000)).unwrap();
    e.retry_job(&id).unwrap();
    let job = e.process_next().unwrap();
    assert_eq!(job.state, JobState::Completed);
    assert!(e.review().trail().len() > trail_before.len());
    assert!(e.retry_job(&id).is_err());
}

#[test]
fn retry_of_completed_is_invalid() {
    let mut e = GovernanceEngine::example(clock());
    let out = e.run_mission_with_audit(GOAL, None).unwrap();
    let err = e.retry_job(&out.job_id).unwrap_err();
    assert_eq!(err.code(), "INVALID_STATE");
}

#[test]
fn queue_is_fifo() {
    let mut e = GovernanceEngine::example(clock());
    let ids: Vec<_> = ["Write cold outreach emails", GOAL, "Research the fintech market"]
        .iter()
        .map(|g| e.submit_job(g, None).unwrap().job_id)
        .collect();
    let done: Vec<_> = e.process_all().into_iter().map(|j| j.job_id).collect();
    assert_eq!(done, ids);
    assert!(e.process_next().is_none());
    assert!(e.jobs().iter().all(|j| j.state == JobState::Completed));
}

#[test]
fn edit_and_delete() {
    let mut e = GovernanceEngine::example(clock());
    let id = e.submit_job("first", None).unwrap().job_id;
    let j = e.edit_job(&id, Some(GOAL), Some(Some(Cents(500)))).unwrap();
    assert_eq!(j.goal, GOAL);
    assert_eq!(j.revenue_usd_cents, Some(500));
    let done = e.process_next().unwrap();
    assert_eq!(done.state, JobState::Completed);
    assert_eq!(e.edit_job(&id, Some("x"), None).unwrap_err().code(), "INVALID_STATE");
    e.delete_job(&id).unwrap();
    assert!(e.job(&id).is_none());
    assert_eq!(e.delete_job(&id).unwrap_err().code(), "NOT_FOUND");

    let id = e.submit_job("queued", None).unwrap().job_id;
    e.delete_job(&id).unwrap();
    assert!(e.process_next().is_none());
}

#[test]
fn payment_declined_fails_job_without_credit() {
    let mut setup = EngineSetup::example(clock());
    setup.payments = Box::new(MockPaymentProvider::declining());
    let mut e = GovernanceEngine::new(setup).unwrap();
    let err = e.run_mission_with_audit(GOAL, Some(Cents(500))).unwrap_err();
    assert_eq!(err.code(), "PAYMENT_DECLINED");
    let credits = e.ledger().entries().iter().filter(|x| x.kind == EntryKind::UsdCredit).count();
    assert_eq!(credits, 1);
    assert_eq!(e.jobs()[0].state, JobState::Failed);
}

#[test]
fn overrun_costs_trust() {
    let mut setup = EngineSetup::example(clock());
    for w in setup.workers.iter_mut() {
        if w.worker_id == "researcher-delta" {
            w.actual_cost_cents = Some(9);
        }
    }
    let mut e = GovernanceEngine::new(setup).unwrap();
    e.run_mission_with_audit(GOAL, None).unwrap();
    // -10 for the overrun, +5 for the passing audit
    assert_eq!(e.trust().score("researcher-delta"), 45);
}

#[test]
fn strict_token_budget_surfaces_as_overrun() {
    let mut setup = EngineSetup::example(clock());
    for w in setup.workers.iter_mut() {
        if w.worker_id == "researcher-delta" {
            w.token_rate = 5000;
            w.strict_tokens = true;
        }
    }
    let mut e = GovernanceEngine::new(setup).unwrap();
    let out = e.run_mission_with_audit(GOAL, None).unwrap();
    assert!(out.results.is_empty());
    assert_eq!(out.skipped.len(), 2);
    assert_eq!(e.trust().score("researcher-delta"), 40);
    assert_eq!(token_entries(&e), 0);
    assert_eq!(e.jobs()[0].state, JobState::Failed);
}

#[test]
fn runway_shortfall_negotiates_tokens() {
    let mut setup = EngineSetup::example(clock());
    setup.opening_balance = Cents(3);
    let mut e = GovernanceEngine::new(setup).unwrap();
    // the plan estimate is 4c per task, so approval itself fails before the auction
    let err = e.run_mission_with_audit("Research the fintech market", None).unwrap_err();
    assert_eq!(err.code(), "FISCAL_INSOLVENCY");

    let mut setup = EngineSetup::example(clock());
    setup.opening_balance = Cents(5);
    setup.workers.retain(|w| w.worker_id != "researcher-delta");
    let mut w = WorkerProfile::simple("researcher-pricey", &["research"], 9, 8000);
    w.token_rate = 3000;
    setup.workers.push(w);
    let mut e = GovernanceEngine::new(setup).unwrap();
    let out = e.run_mission_with_audit("Research the fintech market", None).unwrap();
    let ev = e.decision_stream(0).iter().find(|ev| ev.kind == "budget_negotiated").unwrap();
    assert_eq!(ev.payload["max_tokens"], 256);
    assert_eq!(out.results[0].tokens_used, 256);
    assert_eq!(e.ledger().total_usd_cents(), Cents(0));
}

#[test]
fn roles_in_pipeline_order() {
    let mut e = GovernanceEngine::example(clock());
    let out = e.run_mission_with_audit(GOAL, Some(Cents(500))).unwrap();
    let evs: Vec<_> = e.decision_stream(0).iter().filter(|ev| ev.job_id.as_deref() == Some(&out.job_id)).collect();
    let first = |r: Role| evs.iter().position(|ev| ev.role == r).unwrap();
    let last_ceo = evs.iter().rposition(|ev| ev.role == Role::Ceo).unwrap();
    assert!(last_ceo < first(Role::Cfo));
    let first_cfo_approval = evs.iter().position(|ev| ev.kind == "task_approved").unwrap();
    assert!(first_cfo_approval < first(Role::Audit));
    let seqs: Vec<_> = e.decision_stream(0).iter().map(|ev| ev.seq).collect();
    assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1));
}
