//! Goal decomposition into a task DAG.
//!
//! A [`PlannerBackend`] proposes a raw plan; [`normalize`] rewrites its IDs to
//! `task-{n}-{skill}`, remaps dependencies, checks skills against the Charter
//! and rejects cycles. Without a backend the planner falls back to a single
//! task matched to the best competency by keyword overlap.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::charter::Charter;
use crate::review::ReflectionObject;

pub const FALLBACK_TOKEN_BUDGET: u64 = 4000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Priority {
    High,
    #[default]
    Low,
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Priority::High => "HIGH",
            Priority::Low => "LOW",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedTask {
    pub task_id: String,
    pub description: String,
    pub depends_on: Vec<String>,
    pub required_skill: String,
    pub estimated_token_budget: u64,
    pub priority: Priority,
    /// KPI the output is audited against; `None` means the Charter's first KPI.
    pub kpi: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub goal: String,
    pub tasks: Vec<PlannedTask>,
}

impl TaskPlan {
    pub fn task(&self, task_id: &str) -> Option<&PlannedTask> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    pub fn to_raw(&self) -> RawPlan {
        RawPlan {
            tasks: self
                .tasks
                .iter()
                .map(|t| RawTask {
                    id: Some(t.task_id.clone()),
                    description: t.description.clone(),
                    skill: t.required_skill.clone(),
                    deps: t.depends_on.clone(),
                    budget: Some(t.estimated_token_budget),
                    priority: Some(t.priority),
                    kpi: t.kpi.clone(),
                })
                .collect(),
        }
    }
}

/// Backend output before normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPlan {
    pub tasks: Vec<RawTask>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTask {
    /// Backend-local identifier used by `deps`; defaults to the 1-based position.
    #[serde(default)]
    pub id: Option<String>,
    pub description: String,
    pub skill: String,
    #[serde(default)]
    pub deps: Vec<String>,
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default, with = "lenient_priority")]
    pub priority: Option<Priority>,
    #[serde(default)]
    pub kpi: Option<String>,
}

mod lenient_priority {
    use super::Priority;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(p: &Option<Priority>, s: S) -> Result<S::Ok, S::Error> {
        p.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Priority>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        raw.map(|s| match s.to_ascii_lowercase().as_str() {
            "high" => Ok(Priority::High),
            "low" => Ok(Priority::Low),
            other => Err(D::Error::custom(format!("unknown priority {other:?}"))),
        })
        .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectCause {
    EmptyPlan,
    EmptyDescription,
    UnknownSkill { skill: String },
    UnknownKpi { kpi: String },
    DuplicateRawId { id: String },
    UnresolvedDependency { dependency: String },
    ZeroBudget,
    Cycle { through: Vec<String> },
}

impl fmt::Display for RejectCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectCause::EmptyPlan => write!(f, "plan has no tasks"),
            RejectCause::EmptyDescription => write!(f, "task description is empty"),
            RejectCause::UnknownSkill { skill } => write!(f, "unknown skill {skill:?}"),
            RejectCause::UnknownKpi { kpi } => write!(f, "unknown KPI {kpi:?}"),
            RejectCause::DuplicateRawId { id } => write!(f, "ambiguous dependency: raw id {id:?} is used twice"),
            RejectCause::UnresolvedDependency { dependency } => {
                write!(f, "dependency {dependency:?} does not name a task in the plan")
            }
            RejectCause::ZeroBudget => write!(f, "token budget must be positive"),
            RejectCause::Cycle { through } => write!(f, "dependency cycle through {}", through.join(", ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("plan rejected at {}: {cause}", task.as_deref().unwrap_or("<plan>"))]
pub struct PlanRejected {
    /// Raw id (or normalized id for cycles) of the first offending task.
    pub task: Option<String>,
    pub cause: RejectCause,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("planner backend unavailable: {0}")]
pub struct BackendUnavailable(pub String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("goal must not be empty")]
    EmptyGoal,
    #[error(transparent)]
    Rejected(#[from] PlanRejected),
}

/// Source of raw plans, typically a structured-output model.
pub trait PlannerBackend: Send + Sync {
    fn propose(
        &self,
        goal: &str,
        competencies: &BTreeSet<String>,
        reflections: &[ReflectionObject],
    ) -> Result<RawPlan, BackendUnavailable>;
}

/// Replays canned backend outputs keyed by goal text.
#[derive(Debug, Clone, Default)]
pub struct FixturePlanner {
    plans: HashMap<String, RawPlan>,
}

impl FixturePlanner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_plan(mut self, goal: impl Into<String>, plan: RawPlan) -> Self {
        self.plans.insert(goal.into(), plan);
        self
    }

    /// Loads `{ "<goal>": { "tasks": [...] }, ... }`.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(FixturePlanner { plans: serde_json::from_str(text)? })
    }

    /// The canned plans for the example charter.
    pub fn example() -> Self {
        Self::from_json(EXAMPLE_PLANS_JSON).expect("bundled plan fixtures parse")
    }
}

pub const EXAMPLE_PLANS_JSON: &str = include_str!("../fixtures/plans.json");

impl PlannerBackend for FixturePlanner {
    fn propose(
        &self,
        goal: &str,
        _competencies: &BTreeSet<String>,
        _reflections: &[ReflectionObject],
    ) -> Result<RawPlan, BackendUnavailable> {
        self.plans
            .get(goal.trim())
            .cloned()
            .ok_or_else(|| BackendUnavailable(format!("no canned plan for goal {goal:?}")))
    }
}

/// How a plan was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Backend,
    Fallback,
}

#[derive(Default)]
pub struct Strategist {
    backend: Option<Box<dyn PlannerBackend>>,
}

impl fmt::Debug for Strategist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Strategist").field("backend", &self.backend.is_some()).finish()
    }
}

impl Strategist {
    pub fn new(backend: Option<Box<dyn PlannerBackend>>) -> Self {
        Strategist { backend }
    }

    pub fn plan(&self, goal: &str, charter: &Charter) -> Result<TaskPlan, PlanError> {
        self.plan_with_context(goal, charter, &[]).map(|(p, _)| p)
    }

    /// Plans with prior failure reflections passed through to the backend.
    ///
    /// An unavailable backend falls back to the keyword plan; a backend that
    /// answers with an invalid plan is a rejection.
    pub fn plan_with_context(
        &self,
        goal: &str,
        charter: &Charter,
        reflections: &[ReflectionObject],
    ) -> Result<(TaskPlan, PlanSource), PlanError> {
        if goal.trim().is_empty() {
            return Err(PlanError::EmptyGoal);
        }
        if let Some(backend) = &self.backend {
            if let Ok(raw) = backend.propose(goal, &charter.competency_names(), reflections) {
                return Ok((normalize(goal, &raw, charter)?, PlanSource::Backend));
            }
        }
        Ok((fallback_plan(goal, charter), PlanSource::Fallback))
    }
}

pub fn normalize(goal: &str, raw: &RawPlan, charter: &Charter) -> Result<TaskPlan, PlanRejected> {
    let reject = |task: Option<&str>, cause| PlanRejected { task: task.map(str::to_string), cause };
    if raw.tasks.is_empty() {
        return Err(reject(None, RejectCause::EmptyPlan));
    }
    let skills = charter.competency_names();

    let raw_ids: Vec<String> =
        raw.tasks.iter().enumerate().map(|(i, t)| t.id.clone().unwrap_or_else(|| (i + 1).to_string())).collect();
    let mut index_of = HashMap::new();
    for (i, id) in raw_ids.iter().enumerate() {
        if index_of.insert(id.as_str(), i).is_some() {
            return Err(reject(Some(id), RejectCause::DuplicateRawId { id: id.clone() }));
        }
    }

    let new_ids: Vec<String> =
        raw.tasks.iter().enumerate().map(|(i, t)| format!("task-{}-{}", i + 1, t.skill)).collect();

    let mut tasks = Vec::with_capacity(raw.tasks.len());
    for (i, t) in raw.tasks.iter().enumerate() {
        let rid = raw_ids[i].as_str();
        if t.description.trim().is_empty() {
            return Err(reject(Some(rid), RejectCause::EmptyDescription));
        }
        if !skills.contains(&t.skill) {
            return Err(reject(Some(rid), RejectCause::UnknownSkill { skill: t.skill.clone() }));
        }
        if let Some(k) = &t.kpi {
            if charter.kpi(k).is_none() {
                return Err(reject(Some(rid), RejectCause::UnknownKpi { kpi: k.clone() }));
            }
        }
        let budget = t.budget.unwrap_or(FALLBACK_TOKEN_BUDGET);
        if budget == 0 {
            return Err(reject(Some(rid), RejectCause::ZeroBudget));
        }
        let mut depends_on = Vec::with_capacity(t.deps.len());
        for d in &t.deps {
            let j = *index_of
                .get(d.as_str())
                .ok_or_else(|| reject(Some(rid), RejectCause::UnresolvedDependency { dependency: d.clone() }))?;
            if !depends_on.contains(&new_ids[j]) {
                depends_on.push(new_ids[j].clone());
            }
        }
        tasks.push(PlannedTask {
            task_id: new_ids[i].clone(),
            description: t.description.clone(),
            depends_on,
            required_skill: t.skill.clone(),
            estimated_token_budget: budget,
            priority: t.priority.unwrap_or_default(),
            kpi: t.kpi.clone(),
        });
    }

    let plan = TaskPlan { goal: goal.to_string(), tasks };
    if let Err(stuck) = topological_order(&plan) {
        let through: Vec<String> = stuck.iter().map(|&i| plan.tasks[i].task_id.clone()).collect();
        let first = through[0].clone();
        return Err(reject(Some(&first), RejectCause::Cycle { through }));
    }
    Ok(plan)
}

/// Kahn's algorithm, always releasing the lowest plan position among ready tasks.
///
/// On a cycle, returns the positions that could never be scheduled.
pub fn topological_order(plan: &TaskPlan) -> Result<Vec<usize>, Vec<usize>> {
    let n = plan.tasks.len();
    let pos: HashMap<&str, usize> = plan.tasks.iter().enumerate().map(|(i, t)| (t.task_id.as_str(), i)).collect();
    let mut indegree = vec![0usize; n];
    let mut dependents = vec![Vec::new(); n];
    for (i, t) in plan.tasks.iter().enumerate() {
        for d in &t.depends_on {
            if let Some(&j) = pos.get(d.as_str()) {
                indegree[i] += 1;
                dependents[j].push(i);
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &k in &dependents[i] {
            indegree[k] -= 1;
            if indegree[k] == 0 {
                ready.push(Reverse(k));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        let done: HashSet<usize> = order.into_iter().collect();
        Err((0..n).filter(|i| !done.contains(i)).collect())
    }
}

/// Checks the TaskPlan invariants that every planning path must satisfy.
pub fn validate_plan(plan: &TaskPlan, charter: &Charter) -> Result<(), PlanRejected> {
    let skills = charter.competency_names();
    let mut seen = HashSet::new();
    for t in &plan.tasks {
        let reject = |cause| PlanRejected { task: Some(t.task_id.clone()), cause };
        if !seen.insert(t.task_id.as_str()) {
            return Err(reject(RejectCause::DuplicateRawId { id: t.task_id.clone() }));
        }
        if !skills.contains(&t.required_skill) {
            return Err(reject(RejectCause::UnknownSkill { skill: t.required_skill.clone() }));
        }
        if t.estimated_token_budget == 0 {
            return Err(reject(RejectCause::ZeroBudget));
        }
    }
    for t in &plan.tasks {
        for d in &t.depends_on {
            if !seen.contains(d.as_str()) {
                return Err(PlanRejected {
                    task: Some(t.task_id.clone()),
                    cause: RejectCause::UnresolvedDependency { dependency: d.clone() },
                });
            }
        }
    }
    if plan.tasks.is_empty() {
        return Err(PlanRejected { task: None, cause: RejectCause::EmptyPlan });
    }
    topological_order(plan).map(|_| ()).map_err(|stuck| PlanRejected {
        task: Some(plan.tasks[stuck[0]].task_id.clone()),
        cause: RejectCause::Cycle { through: stuck.iter().map(|&i| plan.tasks[i].task_id.clone()).collect() },
    })
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "into", "is", "it", "of", "on", "or", "our",
    "that", "the", "this", "to", "with", "we", "you", "your",
];

/// Lowercased alphanumeric tokens without stopwords.
pub fn keywords(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

/// One task on the competency sharing the most keywords with the goal.
///
/// Ties go to the higher priority weight, then to the earlier competency.
pub fn fallback_plan(goal: &str, charter: &Charter) -> TaskPlan {
    let goal_words = keywords(goal);
    let best = charter
        .core_competencies
        .iter()
        .enumerate()
        .max_by_key(|(i, c)| {
            let words = keywords(&format!("{} {}", c.name, c.description));
            let overlap = goal_words.intersection(&words).count();
            (overlap, c.priority, Reverse(*i))
        })
        .map(|(_, c)| c)
        .expect("charter has at least one competency");
    TaskPlan {
        goal: goal.to_string(),
        tasks: vec![PlannedTask {
            task_id: format!("task-1-{}", best.name),
            description: goal.to_string(),
            depends_on: Vec::new(),
            required_skill: best.name.clone(),
            estimated_token_budget: FALLBACK_TOKEN_BUDGET,
            priority: Priority::Low,
            kpi: None,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charter::{load_charter, EXAMPLE_CHARTER_YAML};

    fn charter() -> Charter {
        load_charter(EXAMPLE_CHARTER_YAML).unwrap()
    }

    fn raw(tasks: &[(&str, &str, &[&str])]) -> RawPlan {
        RawPlan {
            tasks: tasks
                .iter()
                .map(|(id, skill, deps)| RawTask {
                    id: Some(id.to_string()),
                    description: format!("do {id}"),
                    skill: skill.to_string(),
                    deps: deps.iter().map(|d| d.to_string()).collect(),
                    budget: None,
                    priority: None,
                    kpi: None,
                })
                .collect(),
        }
    }

    fn spec_charter() -> Charter {
        let doc = EXAMPLE_CHARTER_YAML
            .replace("name: email_writing", "name: spec_writer")
            .replace("name: research", "name: coder");
        load_charter(&doc).unwrap()
    }

    #[test]
    fn normalizes_ids_and_remaps_deps() {
        let p = normalize("g", &raw(&[("a", "spec_writer", &[]), ("b", "coder", &["a"])]), &spec_charter()).unwrap();
        let ids: Vec<_> = p.tasks.iter().map(|t| t.task_id.as_str()).collect();
        assert_eq!(ids, vec!["task-1-spec_writer", "task-2-coder"]);
        assert_eq!(p.tasks[1].depends_on, vec!["task-1-spec_writer"]);
        assert_eq!(p.tasks[0].estimated_token_budget, 4000);
        assert_eq!(p.tasks[0].priority, Priority::Low);
    }

    #[test]
    fn rejects_unknown_skill() {
        let e = normalize("g", &raw(&[("a", "alchemy", &[])]), &charter()).unwrap_err();
        assert_eq!(e.cause, RejectCause::UnknownSkill { skill: "alchemy".into() });
        assert_eq!(e.task.as_deref(), Some("a"));
    }

    #[test]
    fn rejects_duplicate_raw_ids() {
        let e = normalize("g", &raw(&[("a", "research", &[]), ("a", "research", &[])]), &charter()).unwrap_err();
        assert_eq!(e.cause, RejectCause::DuplicateRawId { id: "a".into() });
    }

    #[test]
    fn rejects_cycles_and_dangling_deps() {
        let e = normalize("g", &raw(&[("a", "research", &["b"]), ("b", "research", &["a"])]), &charter()).unwrap_err();
        assert!(matches!(e.cause, RejectCause::Cycle { .. }));
        let e = normalize("g", &raw(&[("a", "research", &["a"])]), &charter()).unwrap_err();
        assert!(matches!(e.cause, RejectCause::Cycle { .. }));
        let e = normalize("g", &raw(&[("a", "research", &["zzz"])]), &charter()).unwrap_err();
        assert_eq!(e.cause, RejectCause::UnresolvedDependency { dependency: "zzz".into() });
    }

    #[test]
    fn normalize_is_idempotent() {
        let c = charter();
        let p = normalize("g", &raw(&[("x", "research", &[]), ("y", "email_writing", &["x"])]), &c).unwrap();
        assert_eq!(normalize("g", &p.to_raw(), &c).unwrap(), p);
    }

    #[test]
    fn fallback_matches_keywords() {
        let p = fallback_plan("research the market", &charter());
        assert_eq!(p.tasks.len(), 1);
        assert_eq!(p.tasks[0].required_skill, "research");
        assert_eq!(p.tasks[0].task_id, "task-1-research");
        assert_eq!(p.tasks[0].estimated_token_budget, 4000);
        assert_eq!(p.tasks[0].priority, Priority::Low);
    }

    #[test]
    fn fallback_without_overlap_uses_priority() {
        let p = fallback_plan("zzz qqq", &charter());
        assert_eq!(p.tasks[0].required_skill, "email_writing");
    }

    #[test]
    fn strategist_uses_backend_then_fallback() {
        let c = charter();
        let s = Strategist::new(Some(Box::new(FixturePlanner::example())));
        let (p, src) = s.plan_with_context("Write a cold outreach email sequence", &c, &[]).unwrap();
        assert_eq!(src, PlanSource::Backend);
        let ids: Vec<_> = p.tasks.iter().map(|t| t.task_id.as_str()).collect();
        assert_eq!(ids, vec!["task-1-research", "task-2-email_writing", "task-3-email_writing"]);
        assert_eq!(p.tasks[2].depends_on, vec!["task-2-email_writing"]);

        let (p, src) = s.plan_with_context("research the market", &c, &[]).unwrap();
        assert_eq!(src, PlanSource::Fallback);
        assert_eq!(p.tasks.len(), 1);

        let plain = Strategist::default();
        assert_eq!(plain.plan("Write a cold outreach email sequence", &c).unwrap().tasks.len(), 1);
        assert_eq!(plain.plan("  ", &c), Err(PlanError::EmptyGoal));
    }

    #[test]
    fn backend_cycle_is_rejected() {
        let c = charter();
        let s = Strategist::new(Some(Box::new(
            FixturePlanner::new().with_plan("loop", raw(&[("A", "research", &["B"]), ("B", "research", &["A"])])),
        )));
        assert!(matches!(s.plan("loop", &c), Err(PlanError::Rejected(_))));
    }

    #[test]
    fn raw_plan_schema_is_strict() {
        let ok = r#"{"tasks": [{"description": "d", "skill": "research", "priority": "high", "budget": 10}]}"#;
        let p: RawPlan = serde_json::from_str(ok).unwrap();
        assert_eq!(p.tasks[0].priority, Some(Priority::High));
        let bad = r#"{"tasks": [{"description": "d", "skill": "research", "colour": 1}]}"#;
        assert!(serde_json::from_str::<RawPlan>(bad).is_err());
    }

    #[test]
    fn positional_ids_when_absent() {
        let p: RawPlan = serde_json::from_str(
            r#"{"tasks": [{"description": "a", "skill": "research"}, {"description": "b", "skill": "email_writing", "deps": ["1"]}]}"#,
        )
        .unwrap();
        let plan = normalize("g", &p, &charter()).unwrap();
        assert_eq!(plan.tasks[1].depends_on, vec!["task-1-research"]);
        validate_plan(&plan, &charter()).unwrap();
    }
}
