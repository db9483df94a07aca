//! Output auditing against Charter KPIs.
//!
//! A [`Judge`] scores each output in `[0, 1]`; scores of 0.50 and above pass.
//! Every verdict is sealed into an [`AuditReport`] whose `proof_hash` is the
//! SHA-256 of the report's canonical JSON, appended to a JSONL trail, and fed
//! back into the agent's trust score. Failed audits also leave a
//! [`ReflectionObject`] for the planner.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::auth::{TrustAuthority, TrustStoreError};
use crate::canonical::{sha256_hex, BasisPoints, CanonicalValue};
use crate::charter::KpiSpec;
use crate::clock::{format_utc, parse_utc, serde_utc, Clock, Timestamp};
use crate::strategist::keywords;

/// Pass threshold in basis points (0.50).
pub const PASS_THRESHOLD_BP: u32 = 5000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub score: BasisPoints,
    pub reason: String,
    pub suggested_fix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("judge unavailable: {0}")]
pub struct JudgeUnavailable(pub String);

pub trait Judge: Send + Sync {
    fn judge(&self, output: &str, kpi: &KpiSpec) -> Result<JudgeVerdict, JudgeUnavailable>;
}

/// Deterministic scoring rules for one KPI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpiRules {
    /// Single words, matched case-insensitively against the output's tokens.
    pub required_keywords: Vec<String>,
    pub min_chars: usize,
    pub max_chars: usize,
    /// Literal substrings that must appear (headings, sign-offs, ...).
    #[serde(default)]
    pub markers: Vec<String>,
}

impl KpiRules {
    /// Rules derived from the KPI's verification prompt when none are configured:
    /// its words of five or more letters become the keywords.
    pub fn derived(kpi: &KpiSpec) -> KpiRules {
        let mut required_keywords: Vec<String> = keywords(&kpi.verification_prompt)
            .into_iter()
            .filter(|w| w.chars().count() >= 5 && w.chars().all(char::is_alphabetic))
            .collect();
        if required_keywords.is_empty() {
            required_keywords.push(kpi.metric.to_lowercase());
        }
        KpiRules { required_keywords, min_chars: 40, max_chars: 20_000, markers: Vec::new() }
    }
}

/// Weighted rule score: keywords 0.6, length bounds 0.2, markers 0.2.
#[derive(Debug, Clone, Default)]
pub struct RuleJudge {
    rules: HashMap<String, KpiRules>,
}

impl RuleJudge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_rules(mut self, kpi_name: impl Into<String>, rules: KpiRules) -> Self {
        self.rules.insert(kpi_name.into(), rules);
        self
    }

    /// Loads `{ "<kpi name>": { "required_keywords": [...], ... } }`.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(RuleJudge { rules: serde_json::from_str(text)? })
    }

    pub fn example() -> Self {
        Self::from_json(EXAMPLE_RULES_JSON).expect("bundled judge rules parse")
    }

    pub fn rules_for(&self, kpi: &KpiSpec) -> KpiRules {
        self.rules.get(&kpi.name).cloned().unwrap_or_else(|| KpiRules::derived(kpi))
    }

    pub fn score(output: &str, rules: &KpiRules) -> JudgeVerdict {
        if output.trim().is_empty() {
            return JudgeVerdict {
                score: BasisPoints::ZERO,
                reason: "Output is empty".into(),
                suggested_fix: Some("Produce a non-empty deliverable".into()),
            };
        }
        let words = keywords(output);
        let missing_kw: Vec<&str> =
            rules.required_keywords.iter().filter(|k| !words.contains(&k.to_lowercase())).map(String::as_str).collect();
        let kw_total = rules.required_keywords.len() as u32;
        let kw_hit = kw_total - missing_kw.len() as u32;
        let kw_bp = (6000 * kw_hit).checked_div(kw_total).unwrap_or(6000);

        let len = output.chars().count();
        let len_ok = (rules.min_chars..=rules.max_chars).contains(&len);
        let len_bp = if len_ok { 2000 } else { 0 };

        let missing_mk: Vec<&str> =
            rules.markers.iter().filter(|m| !output.contains(m.as_str())).map(String::as_str).collect();
        let mk_total = rules.markers.len() as u32;
        let mk_hit = mk_total - missing_mk.len() as u32;
        let mk_bp = (2000 * mk_hit).checked_div(mk_total).unwrap_or(2000);

        let score = BasisPoints::new(kw_bp + len_bp + mk_bp).expect("weights sum to at most 1");
        let reason = format!(
            "keywords {kw_hit}/{kw_total}, length {len} {} [{}, {}], markers {mk_hit}/{mk_total}",
            if len_ok { "within" } else { "outside" },
            rules.min_chars,
            rules.max_chars
        );
        let mut fixes = Vec::new();
        if !missing_kw.is_empty() {
            fixes.push(format!("cover {}", missing_kw.join(", ")));
        }
        if !len_ok {
            fixes.push(format!("keep length within {}..{} characters", rules.min_chars, rules.max_chars));
        }
        if !missing_mk.is_empty() {
            fixes.push(format!("include {}", missing_mk.join(", ")));
        }
        let suggested_fix = (score.get() < PASS_THRESHOLD_BP && !fixes.is_empty()).then(|| {
            let mut s = fixes.join("; ");
            s[..1].make_ascii_uppercase();
            s
        });
        JudgeVerdict { score, reason, suggested_fix }
    }
}

impl Judge for RuleJudge {
    fn judge(&self, output: &str, kpi: &KpiSpec) -> Result<JudgeVerdict, JudgeUnavailable> {
        Ok(RuleJudge::score(output, &self.rules_for(kpi)))
    }
}

pub const EXAMPLE_RULES_JSON: &str = include_str!("../fixtures/judge_rules.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub task_id: String,
    pub kpi_name: String,
    pub passed: bool,
    pub score: BasisPoints,
    pub reason: String,
    pub suggested_fix: Option<String>,
    #[serde(with = "serde_utc")]
    pub timestamp_utc: Timestamp,
    pub proof_hash: String,
}

impl AuditReport {
    /// Builds and seals a report; `passed` follows from the score.
    pub fn seal(
        task_id: impl Into<String>,
        kpi_name: impl Into<String>,
        verdict: JudgeVerdict,
        timestamp_utc: Timestamp,
    ) -> AuditReport {
        let mut r = AuditReport {
            task_id: task_id.into(),
            kpi_name: kpi_name.into(),
            passed: verdict.score.get() >= PASS_THRESHOLD_BP,
            score: verdict.score,
            reason: verdict.reason,
            suggested_fix: verdict.suggested_fix,
            timestamp_utc,
            proof_hash: String::new(),
        };
        r.proof_hash = r.compute_proof_hash();
        r
    }

    fn payload_members(&self) -> Vec<(&'static str, CanonicalValue)> {
        vec![
            ("task_id", CanonicalValue::Str(self.task_id.clone())),
            ("kpi_name", CanonicalValue::Str(self.kpi_name.clone())),
            ("passed", CanonicalValue::Bool(self.passed)),
            ("score", self.score.to_canonical()),
            ("reason", CanonicalValue::Str(self.reason.clone())),
            ("suggested_fix", CanonicalValue::opt_str(self.suggested_fix.as_deref())),
            ("timestamp_utc", CanonicalValue::Str(format_utc(&self.timestamp_utc))),
        ]
    }

    /// Canonical JSON of the seven hashed fields.
    pub fn canonical_payload(&self) -> String {
        CanonicalValue::object(self.payload_members()).to_canonical_string()
    }

    pub fn compute_proof_hash(&self) -> String {
        sha256_hex(&self.canonical_payload())
    }

    /// Byte comparison of the recomputed digest with the stored one.
    pub fn verify_integrity(&self) -> bool {
        self.compute_proof_hash() == self.proof_hash
    }

    /// One trail line: all eight members, canonical form.
    pub fn to_trail_line(&self) -> String {
        let mut members = self.payload_members();
        members.push(("proof_hash", CanonicalValue::Str(self.proof_hash.clone())));
        CanonicalValue::object(members).to_canonical_string()
    }

    pub fn from_trail_line(line: &str) -> Result<AuditReport, String> {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let obj = v.as_object().ok_or("line is not a JSON object")?;
        const FIELDS: [&str; 8] =
            ["task_id", "kpi_name", "passed", "score", "reason", "suggested_fix", "timestamp_utc", "proof_hash"];
        if let Some(extra) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            return Err(format!("unexpected field {extra:?}"));
        }
        let get = |k: &str| obj.get(k).ok_or_else(|| format!("missing field {k:?}"));
        let string = |k: &str| -> Result<String, String> {
            get(k)?.as_str().map(str::to_string).ok_or_else(|| format!("{k} is not a string"))
        };
        let score = get("score")?
            .as_f64()
            .and_then(BasisPoints::from_f64)
            .ok_or("score is not a number in [0, 1] with at most 4 decimals")?;
        let suggested_fix = match get("suggested_fix")? {
            Value::Null => None,
            Value::String(s) => Some(s.clone()),
            _ => return Err("suggested_fix is neither null nor a string".into()),
        };
        let ts = string("timestamp_utc")?;
        Ok(AuditReport {
            task_id: string("task_id")?,
            kpi_name: string("kpi_name")?,
            passed: get("passed")?.as_bool().ok_or("passed is not a boolean")?,
            score,
            reason: string("reason")?,
            suggested_fix,
            timestamp_utc: parse_utc(&ts).ok_or_else(|| format!("bad timestamp {ts:?}"))?,
            proof_hash: string("proof_hash")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionObject {
    pub task_id: String,
    pub kpi_name: String,
    pub failure_reason: String,
    pub suggested_fix: Option<String>,
    #[serde(with = "serde_utc")]
    pub timestamp_utc: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TrailVerification {
    pub total: usize,
    /// 1-based line numbers that failed to parse or whose hash did not match.
    pub failures: Vec<usize>,
    /// Pairs of lines whose distinct payloads share a digest.
    pub collisions: Vec<(usize, usize)>,
}

impl TrailVerification {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty() && self.collisions.is_empty()
    }
}

/// Re-verifies every line of a trail file.
pub fn verify_trail(path: impl AsRef<Path>) -> std::io::Result<TrailVerification> {
    let reader = BufReader::new(File::open(path)?);
    let lines = reader.lines().collect::<std::io::Result<Vec<_>>>()?;
    Ok(verify_trail_lines(lines.iter().map(String::as_str)))
}

pub fn verify_trail_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> TrailVerification {
    let mut out = TrailVerification::default();
    let mut by_digest: HashMap<String, (String, usize)> = HashMap::new();
    for (i, line) in lines.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        out.total += 1;
        let Ok(report) = AuditReport::from_trail_line(line) else {
            out.failures.push(lineno);
            continue;
        };
        let payload = report.canonical_payload();
        let digest = sha256_hex(&payload);
        if digest != report.proof_hash {
            out.failures.push(lineno);
        }
        match by_digest.get(&digest) {
            Some((other, first)) if *other != payload => out.collisions.push((*first, lineno)),
            Some(_) => {}
            None => {
                by_digest.insert(digest, (payload, lineno));
            }
        }
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error(transparent)]
    JudgeUnavailable(#[from] JudgeUnavailable),
    #[error("audit trail append failed: {0}")]
    Trail(std::io::Error),
    #[error("trust update failed: {0}")]
    Trust(#[from] TrustStoreError),
    #[error("reflection store failed: {0}")]
    Reflection(std::io::Error),
}

/// Append-only JSONL writer (or in-memory list when no file is attached).
struct JsonlSink {
    file: Option<(PathBuf, File)>,
}

impl JsonlSink {
    fn open(path: Option<&Path>) -> std::io::Result<Self> {
        let file = match path {
            Some(p) => Some((p.to_path_buf(), OpenOptions::new().create(true).append(true).open(p)?)),
            None => None,
        };
        Ok(JsonlSink { file })
    }

    fn append(&mut self, line: &str) -> std::io::Result<()> {
        if let Some((_, f)) = self.file.as_mut() {
            f.write_all(format!("{line}\n").as_bytes())?;
            f.flush()?;
        }
        Ok(())
    }
}

/// The auditor: judge, trail, trust feedback and reflection memory.
pub struct ReviewEngine {
    judge: Box<dyn Judge>,
    clock: Arc<dyn Clock>,
    trail: Vec<AuditReport>,
    trail_sink: JsonlSink,
    reflections: Vec<ReflectionObject>,
    reflection_sink: JsonlSink,
}

impl std::fmt::Debug for ReviewEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReviewEngine")
            .field("trail", &self.trail.len())
            .field("reflections", &self.reflections.len())
            .finish()
    }
}

impl ReviewEngine {
    pub fn in_memory(judge: Box<dyn Judge>, clock: Arc<dyn Clock>) -> Self {
        ReviewEngine {
            judge,
            clock,
            trail: Vec::new(),
            trail_sink: JsonlSink { file: None },
            reflections: Vec::new(),
            reflection_sink: JsonlSink { file: None },
        }
    }

    /// File-backed trail and reflection memory. Existing trail lines are loaded as-is.
    pub fn open(
        judge: Box<dyn Judge>,
        clock: Arc<dyn Clock>,
        trail_path: &Path,
        reflections_path: &Path,
    ) -> std::io::Result<Self> {
        let mut trail = Vec::new();
        if trail_path.exists() {
            for line in BufReader::new(File::open(trail_path)?).lines() {
                let line = line?;
                if let Ok(r) = AuditReport::from_trail_line(&line) {
                    trail.push(r);
                }
            }
        }
        let mut reflections = Vec::new();
        if reflections_path.exists() {
            for line in BufReader::new(File::open(reflections_path)?).lines() {
                if let Ok(r) = serde_json::from_str(&line?) {
                    reflections.push(r);
                }
            }
        }
        Ok(ReviewEngine {
            judge,
            clock,
            trail,
            trail_sink: JsonlSink::open(Some(trail_path))?,
            reflections,
            reflection_sink: JsonlSink::open(Some(reflections_path))?,
        })
    }

    pub fn judge(&self, output: &str, kpi: &KpiSpec) -> Result<JudgeVerdict, JudgeUnavailable> {
        self.judge.judge(output, kpi)
    }

    /// Judge, seal, append to the trail, then update trust, then store a reflection on failure.
    pub fn audit_task(
        &mut self,
        task_id: &str,
        agent_id: &str,
        output: &str,
        kpi: &KpiSpec,
        auth: &mut TrustAuthority,
    ) -> Result<AuditReport, AuditError> {
        let verdict = self.judge.judge(output, kpi)?;
        let report = AuditReport::seal(task_id, &kpi.name, verdict, self.clock.now());
        self.trail_sink.append(&report.to_trail_line()).map_err(AuditError::Trail)?;
        self.trail.push(report.clone());
        if report.passed {
            auth.record_audit_success(agent_id)?;
        } else {
            auth.record_audit_failure(agent_id)?;
            let reflection = ReflectionObject {
                task_id: report.task_id.clone(),
                kpi_name: report.kpi_name.clone(),
                failure_reason: report.reason.clone(),
                suggested_fix: report.suggested_fix.clone(),
                timestamp_utc: report.timestamp_utc,
            };
            let line = serde_json::to_string(&reflection).expect("reflection serializes");
            self.reflection_sink.append(&line).map_err(AuditError::Reflection)?;
            self.reflections.push(reflection);
        }
        Ok(report)
    }

    pub fn trail(&self) -> &[AuditReport] {
        &self.trail
    }

    pub fn reflections(&self) -> &[ReflectionObject] {
        &self.reflections
    }

    pub fn reflections_for<'a>(&'a self, task_ids: &'a [String]) -> impl Iterator<Item = &'a ReflectionObject> + 'a {
        self.reflections.iter().filter(move |r| task_ids.contains(&r.task_id))
    }

    pub fn trail_path(&self) -> Option<&Path> {
        self.trail_sink.file.as_ref().map(|(p, _)| p.as_path())
    }

    /// Verifies the in-memory trail (or the backing file when there is one).
    pub fn verify(&self) -> std::io::Result<TrailVerification> {
        match self.trail_path() {
            Some(p) => verify_trail(p),
            None => {
                let lines: Vec<String> = self.trail.iter().map(AuditReport::to_trail_line).collect();
                Ok(verify_trail_lines(lines.iter().map(String::as_str)))
            }
        }
    }
}
