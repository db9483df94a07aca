//! Earned-autonomy permissions.
//!
//! Every agent starts at a trust score of 50 and earns or loses capabilities
//! as audits land. Scores live in `[0, 100]`; each update is clamped on its own
//! step, so the stored score is always the clamp-fold of the agent's history.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::canonical::CanonicalValue;
use crate::clock::{format_utc, serde_utc, Clock, Timestamp};

pub const BASE_TRUST: u8 = 50;
pub const MAX_TRUST: u8 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Capability {
    ReadFiles,
    WriteFiles,
    CallExternalApi,
    ExecuteShell,
    SpendUsd,
}

impl Capability {
    pub const ALL: [Capability; 5] = [
        Capability::ReadFiles,
        Capability::WriteFiles,
        Capability::CallExternalApi,
        Capability::ExecuteShell,
        Capability::SpendUsd,
    ];

    pub const fn threshold(self) -> u8 {
        match self {
            Capability::ReadFiles => 10,
            Capability::WriteFiles => 40,
            Capability::CallExternalApi => 50,
            Capability::ExecuteShell => 60,
            Capability::SpendUsd => 80,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Capability::ReadFiles => "READ_FILES",
            Capability::WriteFiles => "WRITE_FILES",
            Capability::CallExternalApi => "CALL_EXTERNAL_API",
            Capability::ExecuteShell => "EXECUTE_SHELL",
            Capability::SpendUsd => "SPEND_USD",
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Capability {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Capability::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown capability {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrustCause {
    AuditSuccess,
    AuditFailure,
    BudgetOverrun,
}

impl TrustCause {
    pub const fn delta(self) -> i32 {
        match self {
            TrustCause::AuditSuccess => 5,
            TrustCause::AuditFailure => -15,
            TrustCause::BudgetOverrun => -10,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            TrustCause::AuditSuccess => "AUDIT_SUCCESS",
            TrustCause::AuditFailure => "AUDIT_FAILURE",
            TrustCause::BudgetOverrun => "BUDGET_OVERRUN",
        }
    }
}

/// One clamped step.
pub fn apply_delta(score: u8, delta: i32) -> u8 {
    (i32::from(score) + delta).clamp(0, i32::from(MAX_TRUST)) as u8
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustEvent {
    #[serde(with = "serde_utc")]
    pub timestamp_utc: Timestamp,
    pub delta: i32,
    pub cause: TrustCause,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrustRecord {
    pub agent_id: String,
    pub score: u8,
    pub history: Vec<TrustEvent>,
}

impl TrustRecord {
    fn new(agent_id: &str) -> Self {
        TrustRecord { agent_id: agent_id.to_string(), score: BASE_TRUST, history: Vec::new() }
    }

    /// Score recomputed from scratch: base 50, each delta clamped in order.
    pub fn replay(&self) -> u8 {
        self.history.iter().fold(BASE_TRUST, |s, e| apply_delta(s, e.delta))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("Permission denied: agent {agent_id} has TrustScore {score}, {capability} requires {threshold}")]
pub struct PermissionDeniedError {
    pub agent_id: String,
    pub capability: Capability,
    pub score: u8,
    pub threshold: u8,
}

#[derive(Debug, thiserror::Error)]
pub enum TrustStoreError {
    #[error("trust history file error: {0}")]
    Io(#[from] std::io::Error),
    #[error("trust history line {line} is corrupt: {reason}")]
    Corrupt { line: usize, reason: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HistoryLine {
    agent_id: String,
    cause: TrustCause,
    delta: i32,
    score: u8,
    #[serde(with = "serde_utc")]
    timestamp_utc: Timestamp,
}

pub struct TrustAuthority {
    records: BTreeMap<String, TrustRecord>,
    clock: Arc<dyn Clock>,
    file: Option<(PathBuf, File)>,
}

impl fmt::Debug for TrustAuthority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrustAuthority").field("records", &self.records).finish()
    }
}

impl TrustAuthority {
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        TrustAuthority { records: BTreeMap::new(), clock, file: None }
    }

    /// Opens a JSONL trust history, replaying it to rebuild every score.
    pub fn open(path: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self, TrustStoreError> {
        let path = path.as_ref().to_path_buf();
        let mut records: BTreeMap<String, TrustRecord> = BTreeMap::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |reason: String| TrustStoreError::Corrupt { line: i + 1, reason };
                let h: HistoryLine = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                if h.delta != h.cause.delta() {
                    return Err(corrupt(format!("delta {} does not match cause", h.delta)));
                }
                let rec = records.entry(h.agent_id.clone()).or_insert_with(|| TrustRecord::new(&h.agent_id));
                rec.score = apply_delta(rec.score, h.delta);
                if rec.score != h.score {
                    return Err(corrupt(format!("stored score {} but replay gives {}", h.score, rec.score)));
                }
                rec.history.push(TrustEvent { timestamp_utc: h.timestamp_utc, delta: h.delta, cause: h.cause });
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(TrustAuthority { records, clock, file: Some((path, file)) })
    }

    /// Current committed score; unknown agents hold the base score.
    pub fn score(&self, agent_id: &str) -> u8 {
        self.records.get(agent_id).map_or(BASE_TRUST, |r| r.score)
    }

    pub fn record(&self, agent_id: &str) -> Option<&TrustRecord> {
        self.records.get(agent_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &TrustRecord> {
        self.records.values()
    }

    pub fn check_permission(&self, agent_id: &str, cap: Capability) -> Result<(), PermissionDeniedError> {
        let score = self.score(agent_id);
        if score < cap.threshold() {
            return Err(PermissionDeniedError {
                agent_id: agent_id.to_string(),
                capability: cap,
                score,
                threshold: cap.threshold(),
            });
        }
        Ok(())
    }

    pub fn granted(&self, agent_id: &str) -> Vec<Capability> {
        let score = self.score(agent_id);
        Capability::ALL.into_iter().filter(|c| score >= c.threshold()).collect()
    }

    pub fn record_audit_success(&mut self, agent_id: &str) -> Result<u8, TrustStoreError> {
        self.apply(agent_id, TrustCause::AuditSuccess)
    }

    pub fn record_audit_failure(&mut self, agent_id: &str) -> Result<u8, TrustStoreError> {
        self.apply(agent_id, TrustCause::AuditFailure)
    }

    pub fn record_budget_overrun(&mut self, agent_id: &str) -> Result<u8, TrustStoreError> {
        self.apply(agent_id, TrustCause::BudgetOverrun)
    }

    /// Records `count` audit successes in a row and returns the resulting score.
    pub fn seed_successes(&mut self, agent_id: &str, count: usize) -> Result<u8, TrustStoreError> {
        let mut s = self.score(agent_id);
        for _ in 0..count {
            s = self.record_audit_success(agent_id)?;
        }
        Ok(s)
    }

    fn apply(&mut self, agent_id: &str, cause: TrustCause) -> Result<u8, TrustStoreError> {
        let now = self.clock.now();
        let current = self.score(agent_id);
        let next = apply_delta(current, cause.delta());
        if let Some((_, file)) = self.file.as_mut() {
            let line = CanonicalValue::object([
                ("agent_id", CanonicalValue::Str(agent_id.to_string())),
                ("cause", CanonicalValue::Str(cause.as_str().into())),
                ("delta", CanonicalValue::Int(i64::from(cause.delta()))),
                ("score", CanonicalValue::Int(i64::from(next))),
                ("timestamp_utc", CanonicalValue::Str(format_utc(&now))),
            ])
            .to_canonical_string();
            file.write_all(format!("{line}\n").as_bytes())?;
            file.flush()?;
        }
        let rec = self.records.entry(agent_id.to_string()).or_insert_with(|| TrustRecord::new(agent_id));
        rec.score = next;
        rec.history.push(TrustEvent { timestamp_utc: now, delta: cause.delta(), cause });
        Ok(next)
    }
}
