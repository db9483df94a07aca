//! The Charter: mission, competencies, fiscal boundaries and success KPIs.
//!
//! Documents are validated strictly. Any field the schema does not define is
//! rejected with its path, types are never coerced (`"10"` is not a number),
//! and dollar amounts must convert to whole cents without rounding.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use num_rational::Ratio;
use serde_json::json;
use serde_yaml::{Mapping, Value};

use crate::money::{usd_to_cents, Cents, Decimal};

pub const DEFAULT_MARGIN_FLOOR: (i64, i64) = (35, 100);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Charter {
    pub mission: String,
    pub core_competencies: Vec<CompetencySpec>,
    pub fiscal_boundaries: FiscalBoundaries,
    pub success_kpis: Vec<KpiSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompetencySpec {
    pub name: String,
    pub description: String,
    /// Planner weight in 1..=10.
    pub priority: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiscalBoundaries {
    pub daily_burn_max: Cents,
    pub max_budget: Cents,
    pub currency: String,
    pub min_job_margin_ratio: Ratio<i64>,
    pub min_reserve: Cents,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KpiSpec {
    pub name: String,
    pub metric: String,
    pub target_value: Decimal,
    pub unit: String,
    pub verification_prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ValidationError {
    /// Dotted path to the offending field, e.g. `fiscal_boundaries.currency` or `core_competencies[1].priority`.
    pub path: String,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CharterLoadError {
    #[error("cannot read charter: {0}")]
    Io(#[from] std::io::Error),
    #[error("charter is not valid YAML: {0}")]
    Syntax(String),
    #[error("invalid charter: {0}")]
    Invalid(#[from] ValidationError),
}

impl CharterLoadError {
    pub fn validation(&self) -> Option<&ValidationError> {
        match self {
            CharterLoadError::Invalid(v) => Some(v),
            _ => None,
        }
    }
}

/// Parses and validates a Charter document.
pub fn load_charter(source: &str) -> Result<Charter, CharterLoadError> {
    let doc: Value = serde_yaml::from_str(source).map_err(|e| CharterLoadError::Syntax(e.to_string()))?;
    Ok(Charter::from_value(&doc)?)
}

pub fn load_charter_file(path: impl AsRef<Path>) -> Result<Charter, CharterLoadError> {
    let text = std::fs::read_to_string(path)?;
    load_charter(&text)
}

impl Charter {
    pub fn from_value(doc: &Value) -> Result<Charter, ValidationError> {
        let root = Node::root();
        let map = root.mapping(doc)?;
        root.only_fields(map, &["mission", "core_competencies", "fiscal_boundaries", "success_kpis"])?;

        let mission = root.field("mission").non_empty_str(root.required(map, "mission")?)?;

        let comps_node = root.field("core_competencies");
        let comps = comps_node.sequence(root.required(map, "core_competencies")?)?;
        if comps.is_empty() {
            return Err(comps_node.error("at least one competency is required"));
        }
        let mut core_competencies = Vec::with_capacity(comps.len());
        let mut seen = HashSet::new();
        for (i, item) in comps.iter().enumerate() {
            let node = comps_node.index(i);
            let c = CompetencySpec::from_value(&node, item)?;
            if !seen.insert(c.name.clone()) {
                return Err(node.field("name").error(format!("duplicate competency name {:?}", c.name)));
            }
            core_competencies.push(c);
        }

        let fiscal_boundaries =
            FiscalBoundaries::from_value(&root.field("fiscal_boundaries"), root.required(map, "fiscal_boundaries")?)?;

        let kpis_node = root.field("success_kpis");
        let kpis = kpis_node.sequence(root.required(map, "success_kpis")?)?;
        let mut success_kpis = Vec::with_capacity(kpis.len());
        let mut seen = HashSet::new();
        for (i, item) in kpis.iter().enumerate() {
            let node = kpis_node.index(i);
            let k = KpiSpec::from_value(&node, item)?;
            if !seen.insert(k.name.clone()) {
                return Err(node.field("name").error(format!("duplicate KPI name {:?}", k.name)));
            }
            success_kpis.push(k);
        }

        Ok(Charter { mission, core_competencies, fiscal_boundaries, success_kpis })
    }

    pub fn competency_names(&self) -> BTreeSet<String> {
        self.core_competencies.iter().map(|c| c.name.clone()).collect()
    }

    pub fn competency(&self, name: &str) -> Option<&CompetencySpec> {
        self.core_competencies.iter().find(|c| c.name == name)
    }

    pub fn kpi(&self, name: &str) -> Option<&KpiSpec> {
        self.success_kpis.iter().find(|k| k.name == name)
    }

    /// The document form (decimal dollars), suitable for YAML or JSON output.
    pub fn to_document(&self) -> serde_json::Value {
        let fb = &self.fiscal_boundaries;
        json!({
            "mission": self.mission,
            "core_competencies": self.core_competencies.iter().map(|c| json!({
                "name": c.name,
                "description": c.description,
                "priority": c.priority,
            })).collect::<Vec<_>>(),
            "fiscal_boundaries": {
                "daily_burn_max_usd": cents_as_dollars(fb.daily_burn_max),
                "max_budget_usd": cents_as_dollars(fb.max_budget),
                "currency": fb.currency,
                "min_job_margin_ratio": ratio_as_f64(&fb.min_job_margin_ratio),
                "min_reserve_usd": cents_as_dollars(fb.min_reserve),
            },
            "success_kpis": self.success_kpis.iter().map(|k| json!({
                "name": k.name,
                "metric": k.metric,
                "target_value": k.target_value.to_string().parse::<f64>().unwrap_or(0.0),
                "unit": k.unit,
                "verification_prompt": k.verification_prompt,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(&self.to_document()).expect("charter document serializes")
    }
}

fn cents_as_dollars(c: Cents) -> f64 {
    c.get() as f64 / 100.0
}

fn ratio_as_f64(r: &Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl CompetencySpec {
    fn from_value(node: &Node, v: &Value) -> Result<Self, ValidationError> {
        let map = node.mapping(v)?;
        node.only_fields(map, &["name", "description", "priority"])?;
        let name = node.field("name").identifier(node.required(map, "name")?)?;
        let description = node.field("description").string(node.required(map, "description")?)?;
        let p_node = node.field("priority");
        let priority = p_node.integer(node.required(map, "priority")?)?;
        if !(1..=10).contains(&priority) {
            return Err(p_node.error(format!("priority {priority} is outside 1..=10")));
        }
        Ok(CompetencySpec { name, description, priority: priority as u8 })
    }
}

impl FiscalBoundaries {
    fn from_value(node: &Node, v: &Value) -> Result<Self, ValidationError> {
        let map = node.mapping(v)?;
        node.only_fields(
            map,
            &["daily_burn_max_usd", "max_budget_usd", "currency", "min_job_margin_ratio", "min_reserve_usd"],
        )?;
        let daily_burn_max = node.field("daily_burn_max_usd").money(node.required(map, "daily_burn_max_usd")?)?;
        let max_budget = node.field("max_budget_usd").money(node.required(map, "max_budget_usd")?)?;
        let cur_node = node.field("currency");
        let currency = cur_node.string(node.required(map, "currency")?)?;
        if currency.len() != 3 || !currency.bytes().all(|b| b.is_ascii_uppercase()) {
            return Err(cur_node.error(format!("{currency:?} is not a 3-letter currency code")));
        }
        if currency != "USD" {
            return Err(cur_node.error(format!("only USD is supported, got {currency}")));
        }
        let min_job_margin_ratio = match map.get("min_job_margin_ratio") {
            None => Ratio::new(DEFAULT_MARGIN_FLOOR.0, DEFAULT_MARGIN_FLOOR.1),
            Some(v) => {
                let m_node = node.field("min_job_margin_ratio");
                let r = m_node.decimal(v)?.to_ratio();
                if r < Ratio::from_integer(0) || r > Ratio::from_integer(1) {
                    return Err(m_node.error("margin ratio must be within [0, 1]"));
                }
                r
            }
        };
        let min_reserve = match map.get("min_reserve_usd") {
            None => Cents::ZERO,
            Some(v) => node.field("min_reserve_usd").money(v)?,
        };
        if daily_burn_max > max_budget {
            return Err(node
                .field("daily_burn_max_usd")
                .error(format!("daily burn cap {daily_burn_max} exceeds max budget {max_budget}")));
        }
        Ok(FiscalBoundaries { daily_burn_max, max_budget, currency, min_job_margin_ratio, min_reserve })
    }
}

impl KpiSpec {
    fn from_value(node: &Node, v: &Value) -> Result<Self, ValidationError> {
        let map = node.mapping(v)?;
        node.only_fields(map, &["name", "metric", "target_value", "unit", "verification_prompt"])?;
        Ok(KpiSpec {
            name: node.field("name").identifier(node.required(map, "name")?)?,
            metric: node.field("metric").identifier(node.required(map, "metric")?)?,
            target_value: node.field("target_value").decimal(node.required(map, "target_value")?)?,
            unit: node.field("unit").string(node.required(map, "unit")?)?,
            verification_prompt: node
                .field("verification_prompt")
                .non_empty_str(node.required(map, "verification_prompt")?)?,
        })
    }
}

/// Location in the document, used to build error paths.
#[derive(Debug, Clone)]
struct Node {
    path: String,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.path.is_empty() { "<root>" } else { &self.path })
    }
}

impl Node {
    fn root() -> Node {
        Node { path: String::new() }
    }

    fn field(&self, name: &str) -> Node {
        if self.path.is_empty() {
            Node { path: name.to_string() }
        } else {
            Node { path: format!("{}.{name}", self.path) }
        }
    }

    fn index(&self, i: usize) -> Node {
        Node { path: format!("{}[{i}]", self.path) }
    }

    fn error(&self, message: impl Into<String>) -> ValidationError {
        ValidationError { path: self.to_string(), message: message.into() }
    }

    fn mapping<'a>(&self, v: &'a Value) -> Result<&'a Mapping, ValidationError> {
        v.as_mapping().ok_or_else(|| self.error(format!("expected a mapping, found {}", kind(v))))
    }

    fn sequence<'a>(&self, v: &'a Value) -> Result<&'a Vec<Value>, ValidationError> {
        v.as_sequence().ok_or_else(|| self.error(format!("expected a list, found {}", kind(v))))
    }

    fn only_fields(&self, map: &Mapping, allowed: &[&str]) -> Result<(), ValidationError> {
        for key in map.keys() {
            match key.as_str() {
                Some(k) if allowed.contains(&k) => {}
                Some(k) => return Err(self.field(k).error("unknown field")),
                None => return Err(self.error(format!("non-string key {}", kind(key)))),
            }
        }
        Ok(())
    }

    fn required<'a>(&self, map: &'a Mapping, name: &str) -> Result<&'a Value, ValidationError> {
        map.get(name).ok_or_else(|| self.field(name).error("missing required field"))
    }

    fn string(&self, v: &Value) -> Result<String, ValidationError> {
        v.as_str().map(str::to_string).ok_or_else(|| self.error(format!("expected a string, found {}", kind(v))))
    }

    fn non_empty_str(&self, v: &Value) -> Result<String, ValidationError> {
        let s = self.string(v)?;
        if s.trim().is_empty() {
            return Err(self.error("must not be empty"));
        }
        Ok(s)
    }

    fn identifier(&self, v: &Value) -> Result<String, ValidationError> {
        let s = self.non_empty_str(v)?;
        if s.chars().any(char::is_whitespace) {
            return Err(self.error(format!("{s:?} is not an identifier")));
        }
        Ok(s)
    }

    fn integer(&self, v: &Value) -> Result<i64, ValidationError> {
        match v {
            Value::Number(n) if n.is_i64() || n.is_u64() => {
                n.as_i64().ok_or_else(|| self.error("integer out of range"))
            }
            _ => Err(self.error(format!("expected an integer, found {}", kind(v)))),
        }
    }

    fn decimal(&self, v: &Value) -> Result<Decimal, ValidationError> {
        let Value::Number(n) = v else {
            return Err(self.error(format!("expected a number, found {}", kind(v))));
        };
        let parsed = if let Some(i) = n.as_i64() {
            Decimal::parse(&i.to_string())
        } else if let Some(u) = n.as_u64() {
            Decimal::parse(&u.to_string())
        } else {
            Decimal::from_f64(n.as_f64().unwrap_or(f64::NAN))
        };
        parsed.map_err(|e| self.error(e.to_string()))
    }

    fn money(&self, v: &Value) -> Result<Cents, ValidationError> {
        let dec = self.decimal(v)?;
        if dec.digits < 0 {
            return Err(self.error("amount must not be negative"));
        }
        usd_to_cents(dec).map_err(|e| self.error(e.to_string()))
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Sequence(_) => "a list",
        Value::Mapping(_) => "a mapping",
        Value::Tagged(_) => "a tagged value",
    }
}

/// The example charter shipped with the kernel (a freelance content agency).
pub const EXAMPLE_CHARTER_YAML: &str = include_str!("../fixtures/charter.yaml");
