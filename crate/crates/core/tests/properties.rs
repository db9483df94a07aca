use std::sync::Arc;

use proptest::prelude::*;

use governor_core::auth::{Capability, TrustAuthority};
use governor_core::canonical::{parse_basis_points, render_basis_points, BasisPoints};
use governor_core::charter::{load_charter, EXAMPLE_CHARTER_YAML};
use governor_core::clock::{from_unix, ManualClock};
use governor_core::ledger::{EntryKind, Ledger, NewEntry};
use governor_core::money::{usd_to_cents, Cents, Decimal};
use governor_core::review::{AuditReport, JudgeVerdict, ReviewEngine, RuleJudge, PASS_THRESHOLD_BP};
use governor_core::strategist::{normalize, topological_order, RawPlan, RawTask};
use governor_core::treasury::{FiscalCheck, Treasury};
use governor_core::workers::{Behavior, WorkerProfile};

const T0: i64 = 1_773_446_400; // 2026-03-14T00:00:00Z

fn op() -> impl Strategy<Value = (u8, u32, i64)> {
    // kind, amount, seconds to advance
    (0u8..3, 0u32..5000, 0i64..30_000)
}

fn entry(kind: u8, amount: u32) -> NewEntry {
    match kind {
        0 => NewEntry::credit(Cents(amount.into()), "in"),
        1 => NewEntry::debit(Cents(amount.into()), "out"),
        _ => NewEntry::tokens(amount.into(), "tokens"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ledger_folds_match_oracle(ops in proptest::collection::vec(op(), 0..60), reserve in 0i64..20_000, window in 0i64..200_000) {
        let clock = Arc::new(ManualClock::at(from_unix(T0)));
        let mut ledger = Ledger::in_memory(clock.clone());
        let mut seen = Vec::new();
        for (kind, amount, dt) in &ops {
            clock.advance(*dt);
            let before = ledger.entries().to_vec();
            let e = ledger.append(entry(*kind, *amount)).unwrap();
            prop_assert_eq!(&ledger.entries()[..before.len()], before.as_slice());
            prop_assert_eq!(e.seq, before.len() as u64 + 1);
            seen.push((*kind, i64::from(*amount), e.timestamp_utc));
        }
        let balance: i64 = seen.iter().map(|(k, a, _)| match k { 0 => *a, 1 => -*a, _ => 0 }).sum();
        prop_assert_eq!(ledger.total_usd_cents(), Cents(balance));
        let start = from_unix(T0 + window);
        let since: i64 = seen.iter().filter(|(k, _, t)| *k == 1 && *t >= start).map(|(_, a, _)| a).sum();
        prop_assert_eq!(ledger.usd_debits_since(start), Cents(since));
        prop_assert_eq!(ledger.runway_usd_cents(Cents(reserve)), Cents((balance - reserve).max(0)));
        let tokens: i64 = seen.iter().filter(|(k, _, _)| *k == 2).map(|(_, a, _)| a).sum();
        prop_assert_eq!(ledger.total_tokens_spent() as i64, tokens);
    }

    #[test]
    fn ledger_file_reopens_identically(ops in proptest::collection::vec(op(), 1..30)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let clock = Arc::new(ManualClock::at(from_unix(T0)));
        let mut ledger = Ledger::open(&path, clock.clone()).unwrap();
        for (kind, amount, dt) in &ops {
            clock.advance(*dt);
            ledger.append(entry(*kind, *amount)).unwrap();
        }
        let reopened = Ledger::open(&path, clock).unwrap();
        prop_assert_eq!(reopened.entries(), ledger.entries());
    }

    #[test]
    fn approval_matches_inequalities(balance in 0i64..5000, daily in 0i64..1500, earlier in 0i64..3000, cost in 0i64..2000, reserve in 0i64..1000, cap in 0i64..1500, ceiling_extra in 0i64..3000) {
        let mut b = load_charter(EXAMPLE_CHARTER_YAML).unwrap().fiscal_boundaries;
        b.min_reserve = Cents(reserve);
        b.daily_burn_max = Cents(cap);
        b.max_budget = Cents(cap + ceiling_extra);
        let clock = Arc::new(ManualClock::at(from_unix(T0 - 3600)));
        let mut ledger = Ledger::in_memory(clock.clone());
        ledger.append(NewEntry::credit(Cents(balance + daily + earlier), "in")).unwrap();
        ledger.append(NewEntry::debit(Cents(earlier), "yesterday")).unwrap();
        clock.set(from_unix(T0 + 3600));
        ledger.append(NewEntry::debit(Cents(daily), "today")).unwrap();
        let got = Treasury::new(b.clone()).approve_task(&ledger, Cents(cost), "t", "p");
        let want = if balance - cost < reserve {
            Some(FiscalCheck::Balance)
        } else if daily + cost > cap {
            Some(FiscalCheck::DailyCap)
        } else if earlier + daily + cost > cap + ceiling_extra {
            Some(FiscalCheck::BudgetCeiling)
        } else {
            None
        };
        prop_assert_eq!(got.err().map(|e| e.check), want);
    }

    #[test]
    fn max_cost_is_floor(revenue in 0i64..10_000_000, margin in 0i64..=100) {
        let mut b = load_charter(EXAMPLE_CHARTER_YAML).unwrap().fiscal_boundaries;
        b.min_job_margin_ratio = num_rational::Ratio::new(margin, 100);
        let t = Treasury::new(b);
        let max = revenue * (100 - margin) / 100;
        prop_assert_eq!(t.max_allowed_cost(Cents(revenue)), Cents(max));
        prop_assert!(t.approve_job_profitability(Cents(revenue), Cents(max)).is_ok());
        prop_assert!(t.approve_job_profitability(Cents(revenue), Cents(max + 1)).is_err());
    }

    #[test]
    fn trust_stays_clamped_and_replays(causes in proptest::collection::vec(0u8..3, 0..80)) {
        let clock = Arc::new(ManualClock::at(from_unix(T0)));
        let mut a = TrustAuthority::in_memory(clock);
        for c in causes {
            let s = match c {
                0 => a.record_audit_success("x"),
                1 => a.record_audit_failure("x"),
                _ => a.record_budget_overrun("x"),
            }.unwrap();
            prop_assert!(s <= 100);
        }
        if let Some(r) = a.record("x") {
            prop_assert_eq!(r.replay(), r.score);
        }
    }

    #[test]
    fn one_failure_undoes_three_successes(start_successes in 0usize..4, failures in 0usize..2) {
        // scores stay inside [5, 85] so no clamp binds
        let clock = Arc::new(ManualClock::at(from_unix(T0)));
        let mut a = TrustAuthority::in_memory(clock);
        for _ in 0..failures { a.record_audit_failure("x").unwrap(); }
        for _ in 0..start_successes { a.record_audit_success("x").unwrap(); }
        let before = a.score("x");
        for _ in 0..3 { a.record_audit_success("x").unwrap(); }
        a.record_audit_failure("x").unwrap();
        prop_assert_eq!(a.score("x"), before);
    }

    #[test]
    fn basis_points_round_trip(bp in 0u32..=10_000) {
        prop_assert_eq!(parse_basis_points(&render_basis_points(bp)), Some(bp));
        let v = BasisPoints::new(bp).unwrap();
        let back: BasisPoints = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        prop_assert_eq!(back, v);
    }

    #[test]
    fn usd_text_converts_exactly(cents in 0i64..1_000_000_000, extra in 1u32..9) {
        let text = format!("{}.{:02}", cents / 100, cents % 100);
        prop_assert_eq!(usd_to_cents(Decimal::parse(&text).unwrap()).unwrap(), Cents(cents));
        let f = cents as f64 / 100.0;
        prop_assert_eq!(usd_to_cents(Decimal::from_f64(f).unwrap()).unwrap(), Cents(cents));
        let too_fine = format!("{text}{extra}");
        prop_assert!(usd_to_cents(Decimal::parse(&too_fine).unwrap()).is_err());
    }

    #[test]
    fn canonical_payload_is_injective(
        a in ("[a-z0-9-]{1,8}", "[a-z_]{1,6}", 0u32..=10_000, ".{0,12}", proptest::option::of(".{0,6}"), 0i64..1000),
        b in ("[a-z0-9-]{1,8}", "[a-z_]{1,6}", 0u32..=10_000, ".{0,12}", proptest::option::of(".{0,6}"), 0i64..1000),
    ) {
        let mk = |(task, kpi, bp, reason, fix, dt): (String, String, u32, String, Option<String>, i64)| {
            AuditReport::seal(task, kpi, JudgeVerdict { score: BasisPoints::new(bp).unwrap(), reason, suggested_fix: fix }, from_unix(T0 + dt))
        };
        let (ra, rb) = (mk(a.clone()), mk(b.clone()));
        prop_assert_eq!(a == b, ra.canonical_payload() == rb.canonical_payload());
        prop_assert_eq!(ra.proof_hash == rb.proof_hash, a == b);
        prop_assert_eq!(ra.passed, bp_of(&ra) >= PASS_THRESHOLD_BP);
        let parsed = AuditReport::from_trail_line(&ra.to_trail_line()).unwrap();
        prop_assert_eq!(parsed, ra);
    }

    #[test]
    fn audit_moves_trust_by_exact_delta(output in ".{0,200}", seed in 0u8..5) {
        let clock = Arc::new(ManualClock::at(from_unix(T0)));
        let mut auth = TrustAuthority::in_memory(clock.clone());
        for _ in 0..seed { auth.record_audit_success("w").unwrap(); }
        let mut review = ReviewEngine::in_memory(Box::new(RuleJudge::example()), clock);
        let kpi = load_charter(EXAMPLE_CHARTER_YAML).unwrap().success_kpis[0].clone();
        let before = auth.score("w") as i32;
        let r = review.audit_task("task-1-x", "w", &output, &kpi, &mut auth).unwrap();
        let want = if r.passed { (before + 5).min(100) } else { (before - 15).max(0) };
        prop_assert_eq!(auth.score("w") as i32, want);
        prop_assert_eq!(r.passed, r.score.get() >= PASS_THRESHOLD_BP);
        prop_assert!(r.verify_integrity());
    }

    #[test]
    fn normalized_plans_order_dependencies_first(deps in proptest::collection::vec(proptest::collection::vec(any::<prop::sample::Index>(), 0..3), 1..8)) {
        let charter = load_charter(EXAMPLE_CHARTER_YAML).unwrap();
        let skills = ["research", "email_writing"];
        let tasks = deps.iter().enumerate().map(|(i, ds)| RawTask {
            id: Some(format!("r{i}")),
            description: format!("step {i}"),
            skill: skills[i % 2].into(),
            deps: if i == 0 { Vec::new() } else { ds.iter().map(|d| format!("r{}", d.index(i))).collect() },
            budget: None,
            priority: None,
            kpi: None,
        }).collect();
        // reverse so dependencies often point forward in the list
        let mut raw = RawPlan { tasks };
        raw.tasks.reverse();
        let plan = normalize("g", &raw, &charter).unwrap();
        for (i, t) in plan.tasks.iter().enumerate() {
            prop_assert_eq!(&t.task_id, &format!("task-{}-{}", i + 1, t.required_skill));
        }
        let order = topological_order(&plan).unwrap();
        let rank: Vec<usize> = {
            let mut r = vec![0; order.len()];
            for (k, &i) in order.iter().enumerate() { r[i] = k; }
            r
        };
        for (i, t) in plan.tasks.iter().enumerate() {
            for d in &t.depends_on {
                let j = plan.tasks.iter().position(|x| &x.task_id == d).unwrap();
                prop_assert!(rank[j] < rank[i]);
            }
        }
    }

    #[test]
    fn workers_are_deterministic_and_capped(rate in 0u64..10_000, max in 0u64..10_000, seed in any::<u64>(), n in 1usize..50) {
        let mut w = WorkerProfile::simple("w", &["email_writing"], 4, 7000).with_behavior(Behavior::Mixed);
        w.token_rate = rate;
        w.seed = seed;
        let rules = RuleJudge::example().rules_for(&load_charter(EXAMPLE_CHARTER_YAML).unwrap().success_kpis[0]);
        let task = governor_core::strategist::PlannedTask {
            task_id: format!("task-{n}-email_writing"),
            description: "Draft".into(),
            depends_on: Vec::new(),
            required_skill: "email_writing".into(),
            estimated_token_budget: max,
            priority: Default::default(),
            kpi: None,
        };
        let a = w.execute(&task, max, &rules).unwrap();
        prop_assert_eq!(&a, &w.execute(&task, max, &rules).unwrap());
        prop_assert!(a.tokens_used <= max);
        let passed = RuleJudge::score(&a.output, &rules).score.get() >= PASS_THRESHOLD_BP;
        prop_assert_eq!(passed, w.intends_success(&task.task_id));
    }
}

fn bp_of(r: &AuditReport) -> u32 {
    r.score.get()
}

#[test]
fn permission_grid_matches_table() {
    // deltas are +5, -15, -10 from 50, so only multiples of 5 are reachable
    for score in (0..=100u8).step_by(5) {
        let clock = Arc::new(ManualClock::at(from_unix(T0)));
        let mut a = TrustAuthority::in_memory(clock);
        while a.score("x") != score {
            let cur = a.score("x");
            if cur < score {
                a.record_audit_success("x").unwrap();
            } else if cur - score == 10 {
                a.record_budget_overrun("x").unwrap();
            } else {
                a.record_audit_failure("x").unwrap();
            }
        }
        for cap in Capability::ALL {
            let want = score >= cap.threshold();
            assert_eq!(a.check_permission("x", cap).is_ok(), want, "{score} {cap}");
        }
    }
}

#[test]
fn ledger_rejects_negative_amounts() {
    let mut l = Ledger::in_memory(Arc::new(ManualClock::at(from_unix(T0))));
    assert!(l.append(NewEntry::debit(Cents(-1), "bad")).is_err());
    assert!(l.is_empty());
    assert_eq!(EntryKind::TokenDebit.as_str(), "TOKEN_DEBIT");
}
