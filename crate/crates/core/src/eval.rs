//! Deterministic evaluation harness: fiscal blocking, trust gating, audit integrity.
//!
//! Every run is seed-pinned, so two runs print identical tables.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::auth::{apply_delta, Capability, TrustAuthority, TrustCause, BASE_TRUST};
use crate::canonical::BasisPoints;
use crate::charter::{load_charter, Charter, EXAMPLE_CHARTER_YAML};
use crate::clock::{parse_utc, ManualClock};
use crate::engine::{EngineSetup, GovernanceEngine, GovernanceError};
use crate::ledger::{EntryKind, NewEntry};
use crate::money::Cents;
use crate::review::{verify_trail, verify_trail_lines, AuditReport, ReviewEngine, RuleJudge};
use crate::strategist::{FixturePlanner, PlannedTask, Priority, RawPlan, RawTask};
use crate::treasury::FiscalCheck;
use crate::workers::{Behavior, WorkerProfile};

pub const FISCAL_SEED: u64 = 0x00F1_5CA1;
pub const TRUST_SEED: u64 = 0x7257;
pub const AUDIT_SEED: u64 = 0xA0D1;

pub const TRUST_NOTE: &str = "Gating is compared against the clamp-fold of each agent's scripted history. \
Reads see the last committed score, so the boundary race behind the published 94% agreement figure \
cannot occur here; this table reports exact agreement instead.";

/// One evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub axis: String,
    pub title: String,
    pub note: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub metrics: BTreeMap<String, Value>,
    pub passed: bool,
}

impl EvalReport {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("## {}\n\n", self.title);
        if let Some(note) = &self.note {
            out.push_str(&format!("> {note}\n\n"));
        }
        out.push_str(&format!("| {} |\n", self.columns.join(" | ")));
        out.push_str(&format!("|{}\n", "---|".repeat(self.columns.len())));
        for row in &self.rows {
            out.push_str(&format!("| {} |\n", row.join(" | ")));
        }
        out.push('\n');
        for (k, v) in &self.metrics {
            out.push_str(&format!("- {k}: {v}\n"));
        }
        out.push_str(&format!("- result: {}\n", if self.passed { "PASS" } else { "FAIL" }));
        out
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FiscalCategory {
    InsufficientBalance,
    DailyBurnBreach,
    UnprofitableJob,
    ReserveDepletion,
    BudgetCeilingBreach,
}

impl FiscalCategory {
    pub const ALL: [FiscalCategory; 5] = [
        FiscalCategory::InsufficientBalance,
        FiscalCategory::DailyBurnBreach,
        FiscalCategory::UnprofitableJob,
        FiscalCategory::ReserveDepletion,
        FiscalCategory::BudgetCeilingBreach,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FiscalCategory::InsufficientBalance => "insufficient balance",
            FiscalCategory::DailyBurnBreach => "daily burn breach",
            FiscalCategory::UnprofitableJob => "unprofitable job",
            FiscalCategory::ReserveDepletion => "reserve depletion",
            FiscalCategory::BudgetCeilingBreach => "budget ceiling breach",
        }
    }

    fn expected(self, err: &GovernanceError) -> bool {
        match (self, err) {
            (FiscalCategory::UnprofitableJob, GovernanceError::Unprofitable(_)) => true,
            (FiscalCategory::InsufficientBalance | FiscalCategory::ReserveDepletion, GovernanceError::Fiscal(e)) => {
                e.check == FiscalCheck::Balance
            }
            (FiscalCategory::DailyBurnBreach, GovernanceError::Fiscal(e)) => e.check == FiscalCheck::DailyCap,
            (FiscalCategory::BudgetCeilingBreach, GovernanceError::Fiscal(e)) => e.check == FiscalCheck::BudgetCeiling,
            _ => false,
        }
    }
}

/// A single-task mission staged against a tailored ledger and Charter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FiscalScenario {
    pub category: FiscalCategory,
    pub control: bool,
    pub opening_balance: i64,
    pub daily_cap: i64,
    pub max_budget: i64,
    pub min_reserve: i64,
    pub debits_today: i64,
    pub debits_earlier: i64,
    pub revenue: Option<i64>,
    pub task_cost: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FiscalRun {
    pub scenario: FiscalScenario,
    pub blocked: bool,
    pub error_code: Option<String>,
    pub correct_error: bool,
    pub token_entries: usize,
}

const SCENARIO_GOAL: &str = "Fiscal scenario";
const WIDE: i64 = 10_000_000;

/// Six blocked scenarios per category, then one compliant control per category.
pub fn fiscal_scenarios(seed: u64) -> Vec<FiscalScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let base = |category| FiscalScenario {
        category,
        control: false,
        opening_balance: WIDE,
        daily_cap: WIDE,
        max_budget: WIDE,
        min_reserve: 0,
        debits_today: 0,
        debits_earlier: 0,
        revenue: None,
        task_cost: 0,
    };
    for category in FiscalCategory::ALL {
        for i in 0..7 {
            let control = i == 6;
            let mut s = base(category);
            s.control = control;
            match category {
                FiscalCategory::InsufficientBalance => {
                    s.opening_balance = rng.gen_range(1..=500);
                    s.task_cost = if control { s.opening_balance } else { s.opening_balance + rng.gen_range(1..=100) };
                }
                FiscalCategory::DailyBurnBreach => {
                    s.daily_cap = rng.gen_range(200..=1000);
                    s.max_budget = s.daily_cap * 50;
                    s.debits_today = rng.gen_range(0..s.daily_cap);
                    let room = s.daily_cap - s.debits_today;
                    s.task_cost = if control { room } else { room + rng.gen_range(1..=300) };
                }
                FiscalCategory::UnprofitableJob => {
                    let revenue = rng.gen_range(100..=5000);
                    let max = revenue * 65 / 100;
                    s.revenue = Some(revenue);
                    s.task_cost = if control { max } else { max + rng.gen_range(1..=200) };
                }
                FiscalCategory::ReserveDepletion => {
                    s.min_reserve = rng.gen_range(100..=5000);
                    let spare = rng.gen_range(1..=200);
                    s.opening_balance = s.min_reserve + spare;
                    s.task_cost = if control { spare } else { spare + rng.gen_range(1..=100) };
                }
                FiscalCategory::BudgetCeilingBreach => {
                    s.max_budget = rng.gen_range(1000..=5000);
                    s.daily_cap = s.max_budget;
                    s.debits_earlier = rng.gen_range(100..s.max_budget);
                    let room = s.max_budget - s.debits_earlier;
                    s.task_cost = if control { room } else { room + rng.gen_range(1..=100) };
                }
            }
            out.push(s);
        }
    }
    out
}

fn scenario_charter(s: &FiscalScenario) -> Charter {
    let mut c = load_charter(EXAMPLE_CHARTER_YAML).expect("bundled charter loads");
    let b = &mut c.fiscal_boundaries;
    b.daily_burn_max = Cents(s.daily_cap);
    b.max_budget = Cents(s.max_budget);
    b.min_reserve = Cents(s.min_reserve);
    c
}

pub fn run_fiscal_scenario(s: &FiscalScenario) -> FiscalRun {
    let now = parse_utc("2026-03-14T12:00:00Z").expect("valid instant");
    let clock = Arc::new(ManualClock::at(now - chrono::Duration::days(1)));
    let tokens = s.task_cost as u64 * 1000;
    let plan = RawPlan {
        tasks: vec![RawTask {
            id: None,
            description: "Scenario task".into(),
            skill: "research".into(),
            deps: Vec::new(),
            budget: Some(tokens),
            priority: None,
            kpi: None,
        }],
    };
    let mut worker = WorkerProfile::simple("scenario-worker", &["research"], s.task_cost, 9000);
    worker.token_rate = 500;
    let mut setup = EngineSetup::example(clock.clone());
    setup.charter = scenario_charter(s);
    setup.planner = Some(Box::new(FixturePlanner::new().with_plan(SCENARIO_GOAL, plan)));
    setup.workers = vec![worker];
    setup.opening_balance = Cents(s.opening_balance + s.debits_earlier + s.debits_today);
    let mut engine = GovernanceEngine::new(setup).expect("in-memory engine builds");
    if s.debits_earlier > 0 {
        engine.post_ledger_entry(NewEntry::debit(Cents(s.debits_earlier), "earlier spend")).expect("debit");
    }
    clock.set(now);
    if s.debits_today > 0 {
        engine.post_ledger_entry(NewEntry::debit(Cents(s.debits_today), "spend today")).expect("debit");
    }
    let result = engine.run_mission_with_audit(SCENARIO_GOAL, s.revenue.map(Cents));
    let token_entries = engine.ledger().entries().iter().filter(|e| e.kind == EntryKind::TokenDebit).count();
    match result {
        Ok(out) => FiscalRun {
            scenario: s.clone(),
            blocked: false,
            error_code: None,
            correct_error: s.control && out.all_passed(),
            token_entries,
        },
        Err(e) => FiscalRun {
            scenario: s.clone(),
            blocked: true,
            error_code: Some(e.code().to_string()),
            correct_error: !s.control && s.category.expected(&e),
            token_entries,
        },
    }
}

pub fn eval_fiscal() -> EvalReport {
    let runs: Vec<FiscalRun> = fiscal_scenarios(FISCAL_SEED).iter().map(run_fiscal_scenario).collect();
    let mut rows = Vec::new();
    let mut blocked_total = 0;
    let mut violations_total = 0;
    let mut ok = true;
    for category in FiscalCategory::ALL {
        let violations: Vec<_> =
            runs.iter().filter(|r| r.scenario.category == category && !r.scenario.control).collect();
        let control = runs.iter().find(|r| r.scenario.category == category && r.scenario.control).expect("one control");
        let blocked = violations.iter().filter(|r| r.blocked).count();
        let correct = violations.iter().filter(|r| r.correct_error).count();
        let tokens: usize = violations.iter().map(|r| r.token_entries).sum();
        let control_ok = !control.blocked && control.correct_error;
        ok &= blocked == violations.len() && correct == violations.len() && tokens == 0 && control_ok;
        blocked_total += blocked;
        violations_total += violations.len();
        rows.push(vec![
            category.label().to_string(),
            violations.len().to_string(),
            blocked.to_string(),
            correct.to_string(),
            tokens.to_string(),
            if control_ok { "passed".into() } else { "FAILED".into() },
        ]);
    }
    let mut metrics = BTreeMap::new();
    metrics.insert("scenarios".into(), json!(violations_total));
    metrics.insert("blocked".into(), json!(blocked_total));
    metrics.insert("block_rate".into(), json!(format!("{blocked_total}/{violations_total}")));
    metrics.insert("seed".into(), json!(FISCAL_SEED));
    EvalReport {
        axis: "fiscal".into(),
        title: "Fiscal constraint enforcement".into(),
        note: None,
        columns: ["category", "scenarios", "blocked", "correct error", "token entries", "compliant control"]
            .map(String::from)
            .to_vec(),
        rows,
        metrics,
        passed: ok && violations_total == 30,
    }
}

/// One scripted agent in the trust evaluation.
#[derive(Debug, Clone)]
struct TrustAgent {
    profile: WorkerProfile,
    overruns: bool,
}

fn trust_agents() -> Vec<TrustAgent> {
    let mk = |id: &str, behavior, seed, overruns| {
        let mut p = WorkerProfile::simple(id, &["email_writing"], 4, 7000).with_behavior(behavior);
        p.seed = seed;
        TrustAgent { profile: p, overruns }
    };
    vec![
        mk("steady-1", Behavior::ConsistentSuccess, 1, false),
        mk("steady-2", Behavior::ConsistentSuccess, 2, true),
        mk("mixed-1", Behavior::Mixed, 3, false),
        mk("mixed-2", Behavior::Mixed, 4, true),
        mk("failing-1", Behavior::FrequentFailure, 5, false),
        mk("failing-2", Behavior::FrequentFailure, 6, true),
    ]
}

pub const TRUST_MISSIONS: usize = 200;

pub fn eval_trust() -> EvalReport {
    let clock = Arc::new(ManualClock::at(parse_utc("2026-03-14T00:00:00Z").expect("valid instant")));
    let mut auth = TrustAuthority::in_memory(clock.clone());
    let judge = RuleJudge::example();
    let mut review = ReviewEngine::in_memory(Box::new(judge.clone()), clock.clone());
    let charter = load_charter(EXAMPLE_CHARTER_YAML).expect("bundled charter loads");
    let kpi = charter.success_kpis[0].clone();
    let rules = judge.rules_for(&kpi);
    let agents = trust_agents();
    let mut rng = ChaCha8Rng::seed_from_u64(TRUST_SEED);

    // oracle: the scripted deltas per agent, folded independently of the authority
    let mut script: BTreeMap<String, Vec<i32>> = BTreeMap::new();
    let mut per_agent: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    let fold = |deltas: &[i32]| deltas.iter().fold(BASE_TRUST, |s, d| apply_delta(s, *d));

    for mission in 0..TRUST_MISSIONS {
        clock.advance(60);
        let agent = &agents[mission % agents.len()];
        let id = agent.profile.worker_id.clone();
        let cap = Capability::ALL[rng.gen_range(0..Capability::ALL.len())];
        let deltas = script.entry(id.clone()).or_default();
        let expected = fold(deltas) >= cap.threshold();
        let granted = auth.check_permission(&id, cap).is_ok();
        let stats = per_agent.entry(id.clone()).or_default();
        stats.0 += 1;
        stats.1 += usize::from(granted == expected);
        stats.2 += usize::from(granted);
        if !granted {
            continue;
        }
        let task = PlannedTask {
            task_id: format!("task-{}-email_writing", mission + 1),
            description: "Draft a follow-up email".into(),
            depends_on: Vec::new(),
            required_skill: "email_writing".into(),
            estimated_token_budget: 4000,
            priority: Priority::Low,
            kpi: None,
        };
        let result = agent.profile.execute(&task, 4000, &rules).expect("non-strict workers always run");
        if agent.overruns && mission % 4 == 1 {
            auth.record_budget_overrun(&id).expect("in-memory");
            deltas.push(TrustCause::BudgetOverrun.delta());
        }
        review.audit_task(&task.task_id, &id, &result.output, &kpi, &mut auth).expect("rule judge is always available");
        deltas.push(if agent.profile.intends_success(&task.task_id) {
            TrustCause::AuditSuccess.delta()
        } else {
            TrustCause::AuditFailure.delta()
        });
    }

    let mut rows = Vec::new();
    let mut agree_total = 0;
    let mut ok = true;
    for agent in &agents {
        let id = &agent.profile.worker_id;
        let (gates, agree, granted) = per_agent.get(id).copied().unwrap_or_default();
        let oracle = fold(script.get(id).map_or(&[][..], Vec::as_slice));
        let actual = auth.score(id);
        let replay = auth.record(id).map_or(BASE_TRUST, |r| r.replay());
        ok &= agree == gates && oracle == actual && replay == actual;
        agree_total += agree;
        rows.push(vec![
            id.clone(),
            agent.profile.behavior.to_string(),
            if agent.overruns { "yes".into() } else { "no".into() },
            gates.to_string(),
            granted.to_string(),
            format!("{agree}/{gates}"),
            actual.to_string(),
            oracle.to_string(),
        ]);
    }

    let escalation = escalation_checks();
    for (label, pass) in &escalation {
        ok &= *pass;
        rows.push(vec![
            label.clone(),
            "script".into(),
            "-".into(),
            "1".into(),
            "-".into(),
            if *pass { "1/1".into() } else { "0/1".into() },
            "-".into(),
            "-".into(),
        ]);
    }

    let mut metrics = BTreeMap::new();
    metrics.insert("missions".into(), json!(TRUST_MISSIONS));
    metrics.insert("agreement".into(), json!(format!("{agree_total}/{TRUST_MISSIONS}")));
    metrics.insert("seed".into(), json!(TRUST_SEED));
    EvalReport {
        axis: "trust".into(),
        title: "Earned-autonomy gating".into(),
        note: Some(TRUST_NOTE.into()),
        columns: ["agent", "profile", "overruns", "gates", "granted", "agreement", "final score", "oracle score"]
            .map(String::from)
            .to_vec(),
        rows,
        metrics,
        passed: ok && agree_total == TRUST_MISSIONS,
    }
}

/// The three escalation paths as stand-alone scripts.
pub fn escalation_checks() -> Vec<(String, bool)> {
    let clock = Arc::new(ManualClock::at(parse_utc("2026-03-14T00:00:00Z").expect("valid instant")));
    let mut out = Vec::new();

    let mut a = TrustAuthority::in_memory(clock.clone());
    let before = a.check_permission("x", Capability::ExecuteShell).is_err();
    a.record_audit_success("x").expect("in-memory");
    a.record_audit_success("x").expect("in-memory");
    out.push((
        "50 +2 successes -> EXECUTE_SHELL".to_string(),
        before && a.score("x") == 60 && a.check_permission("x", Capability::ExecuteShell).is_ok(),
    ));

    let mut a = TrustAuthority::in_memory(clock.clone());
    for _ in 0..6 {
        a.record_audit_success("x").expect("in-memory");
    }
    out.push((
        "50 +6 successes -> SPEND_USD".to_string(),
        a.score("x") == 80 && a.check_permission("x", Capability::SpendUsd).is_ok(),
    ));

    let mut a = TrustAuthority::in_memory(clock);
    let before = a.check_permission("x", Capability::WriteFiles).is_ok();
    a.record_audit_failure("x").expect("in-memory");
    out.push((
        "50 -1 failure -> WRITE_FILES revoked".to_string(),
        before && a.score("x") == 35 && a.check_permission("x", Capability::WriteFiles).is_err(),
    ));
    out
}

pub const AUDIT_REPORTS: usize = 1200;
pub const AUDIT_MUTATIONS: usize = 100;

/// Fields a mutation can touch: the seven hashed ones plus the stored hash.
pub const MUTABLE_FIELDS: [&str; 8] =
    ["task_id", "kpi_name", "passed", "score", "reason", "suggested_fix", "timestamp_utc", "proof_hash"];

/// Returns a copy of `r` with one field changed and the stored hash left alone.
pub fn mutate_report(r: &AuditReport, field: &str) -> AuditReport {
    let mut m = r.clone();
    match field {
        "task_id" => m.task_id.push('x'),
        "kpi_name" => m.kpi_name.push('x'),
        "passed" => m.passed = !m.passed,
        "score" => {
            let bp = m.score.get();
            m.score = BasisPoints::new(if bp == 10_000 { bp - 1 } else { bp + 1 }).expect("in range");
        }
        "reason" => m.reason.push('.'),
        "suggested_fix" => {
            m.suggested_fix = match m.suggested_fix {
                Some(_) => None,
                None => Some("Add detail".into()),
            }
        }
        "timestamp_utc" => m.timestamp_utc += chrono::Duration::seconds(1),
        "proof_hash" => {
            let first = if m.proof_hash.starts_with('0') { "1" } else { "0" };
            m.proof_hash.replace_range(..1, first);
        }
        other => panic!("unknown field {other}"),
    }
    m
}

/// Generates the audit trail, verifies it and checks that sampled single-field
/// mutations are all detected. With `dir` the trail is written to
/// `dir/audit_trail.jsonl` and verified from disk.
pub fn eval_audit(dir: Option<&Path>) -> std::io::Result<EvalReport> {
    let clock = Arc::new(ManualClock::at(parse_utc("2026-03-01T00:00:00Z").expect("valid instant")));
    let judge = RuleJudge::example();
    let mut review = match dir {
        Some(d) => {
            let trail = d.join(crate::engine::TRAIL_FILE);
            if trail.exists() {
                std::fs::remove_file(&trail)?;
            }
            let refl = d.join(crate::engine::REFLECTIONS_FILE);
            if refl.exists() {
                std::fs::remove_file(&refl)?;
            }
            ReviewEngine::open(Box::new(judge.clone()), clock.clone(), &trail, &refl)?
        }
        None => ReviewEngine::in_memory(Box::new(judge.clone()), clock.clone()),
    };
    let mut auth = TrustAuthority::in_memory(clock.clone());
    let charter = load_charter(EXAMPLE_CHARTER_YAML).expect("bundled charter loads");
    let kpi = charter.success_kpis[0].clone();
    let rules = judge.rules_for(&kpi);
    let mut workers: Vec<WorkerProfile> = trust_agents().into_iter().map(|a| a.profile).collect();
    let mut truncating = WorkerProfile::simple("short-1", &["email_writing"], 3, 6000);
    truncating.behavior = Behavior::Mixed;
    truncating.seed = 99;
    workers.push(truncating);

    let skills = ["research", "email_writing"];
    for n in 0..AUDIT_REPORTS {
        clock.advance(7);
        let w = &workers[n % workers.len()];
        let task = PlannedTask {
            task_id: format!("task-{}-{}", n / workers.len() + 1, skills[n % 2]),
            description: format!("Deliverable {n} for mission {}", n / 3),
            depends_on: Vec::new(),
            required_skill: "email_writing".into(),
            estimated_token_budget: 4000,
            priority: Priority::Low,
            kpi: None,
        };
        let result = w.execute(&task, 4000, &rules).expect("non-strict workers always run");
        review
            .audit_task(&task.task_id, &w.worker_id, &result.output, &kpi, &mut auth)
            .map_err(std::io::Error::other)?;
    }

    let verification = match review.trail_path() {
        Some(p) => verify_trail(p)?,
        None => review.verify()?,
    };
    let lines: Vec<String> = match review.trail_path() {
        Some(p) => std::fs::read_to_string(p)?.lines().map(str::to_string).collect(),
        None => review.trail().iter().map(AuditReport::to_trail_line).collect(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(AUDIT_SEED);
    let picks = sample(&mut rng, lines.len(), AUDIT_MUTATIONS.min(lines.len())).into_vec();
    let mut by_field: BTreeMap<&str, (usize, usize)> = MUTABLE_FIELDS.iter().map(|f| (*f, (0, 0))).collect();
    let mut detected = 0;
    for k in picks {
        let field = MUTABLE_FIELDS[rng.gen_range(0..MUTABLE_FIELDS.len())];
        let original = AuditReport::from_trail_line(&lines[k]).expect("generated lines parse");
        let tampered = mutate_report(&original, field).to_trail_line();
        let view = lines.iter().enumerate().map(|(i, l)| if i == k { tampered.as_str() } else { l.as_str() });
        let v = verify_trail_lines(view);
        let hit = v.failures == [k + 1];
        let e = by_field.get_mut(field).expect("known field");
        e.0 += 1;
        e.1 += usize::from(hit);
        detected += usize::from(hit);
    }

    let passed_reports = review.trail().iter().filter(|r| r.passed).count();
    let mut rows = vec![vec![
        "pristine trail".to_string(),
        verification.total.to_string(),
        format!("{} mismatches, {} collisions", verification.failures.len(), verification.collisions.len()),
    ]];
    for (field, (n, hit)) in &by_field {
        rows.push(vec![format!("mutate {field}"), n.to_string(), format!("{hit}/{n} detected")]);
    }
    let mut metrics = BTreeMap::new();
    metrics.insert("reports".into(), json!(verification.total));
    metrics.insert("passed_reports".into(), json!(passed_reports));
    metrics.insert("hash_mismatches".into(), json!(verification.failures.len()));
    metrics.insert("collisions".into(), json!(verification.collisions.len()));
    metrics.insert("mutations_detected".into(), json!(format!("{detected}/{AUDIT_MUTATIONS}")));
    metrics.insert("seed".into(), json!(AUDIT_SEED));
    Ok(EvalReport {
        axis: "audit".into(),
        title: "Audit trail integrity".into(),
        note: None,
        columns: ["check", "lines", "result"].map(String::from).to_vec(),
        rows,
        metrics,
        passed: verification.total >= AUDIT_REPORTS && verification.is_clean() && detected == AUDIT_MUTATIONS,
    })
}
