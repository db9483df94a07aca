//! Append-only ledger of USD and token flows.
//!
//! Every entry gets the next sequence number (1, 2, 3, ... with no gaps) and
//! is never modified afterwards. Balance, daily burn and runway are all folds
//! over the entry list. A ledger may be backed by a JSONL file holding one
//! canonical-JSON entry per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::canonical::CanonicalValue;
use crate::clock::{format_utc, serde_utc, utc_day_start, Clock, Timestamp};
use crate::money::Cents;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntryKind {
    UsdCredit,
    UsdDebit,
    TokenDebit,
}

impl EntryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::UsdCredit => "USD_CREDIT",
            EntryKind::UsdDebit => "USD_DEBIT",
            EntryKind::TokenDebit => "TOKEN_DEBIT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerEntry {
    pub seq: u64,
    #[serde(with = "serde_utc")]
    pub timestamp_utc: Timestamp,
    pub kind: EntryKind,
    /// Cents for USD kinds, tokens for `TOKEN_DEBIT`.
    pub amount: u64,
    pub task_id: Option<String>,
    pub agent_id: Option<String>,
    pub purpose: String,
}

impl LedgerEntry {
    pub fn to_canonical(&self) -> CanonicalValue {
        CanonicalValue::object([
            ("seq", CanonicalValue::Int(self.seq as i64)),
            ("timestamp_utc", CanonicalValue::Str(format_utc(&self.timestamp_utc))),
            ("kind", CanonicalValue::Str(self.kind.as_str().into())),
            ("amount", CanonicalValue::Int(self.amount as i64)),
            ("task_id", CanonicalValue::opt_str(self.task_id.as_deref())),
            ("agent_id", CanonicalValue::opt_str(self.agent_id.as_deref())),
            ("purpose", CanonicalValue::Str(self.purpose.clone())),
        ])
    }

    fn signed_usd(&self) -> i64 {
        match self.kind {
            EntryKind::UsdCredit => self.amount as i64,
            EntryKind::UsdDebit => -(self.amount as i64),
            EntryKind::TokenDebit => 0,
        }
    }
}

/// The fields a caller supplies; the ledger assigns `seq` and the timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewEntry {
    pub kind: EntryKind,
    pub amount: i64,
    pub task_id: Option<String>,
    pub agent_id: Option<String>,
    pub purpose: String,
}

impl NewEntry {
    pub fn credit(amount: Cents, purpose: impl Into<String>) -> Self {
        NewEntry {
            kind: EntryKind::UsdCredit,
            amount: amount.get(),
            task_id: None,
            agent_id: None,
            purpose: purpose.into(),
        }
    }

    pub fn debit(amount: Cents, purpose: impl Into<String>) -> Self {
        NewEntry { kind: EntryKind::UsdDebit, ..NewEntry::credit(amount, purpose) }
    }

    pub fn tokens(tokens: u64, purpose: impl Into<String>) -> Self {
        NewEntry {
            kind: EntryKind::TokenDebit,
            amount: tokens as i64,
            task_id: None,
            agent_id: None,
            purpose: purpose.into(),
        }
    }

    pub fn for_task(mut self, task_id: impl Into<String>) -> Self {
        self.task_id = Some(task_id.into());
        self
    }

    pub fn by_agent(mut self, agent_id: impl Into<String>) -> Self {
        self.agent_id = Some(agent_id.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LedgerSnapshot {
    pub balance_usd_cents: i64,
    pub daily_debits_usd_cents: i64,
    pub lifetime_debits_usd_cents: i64,
    pub total_tokens_spent: u64,
    pub entry_count: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("ledger amounts must be non-negative, got {0}")]
    NegativeAmount(i64),
    #[error("ledger file error: {0}")]
    Io(#[from] std::io::Error),
    #[error("ledger line {line} is corrupt: {reason}")]
    Corrupt { line: usize, reason: String },
}

pub struct Ledger {
    entries: Vec<LedgerEntry>,
    clock: Arc<dyn Clock>,
    file: Option<(PathBuf, File)>,
}

impl std::fmt::Debug for Ledger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ledger")
            .field("entries", &self.entries.len())
            .field("file", &self.file.as_ref().map(|(p, _)| p))
            .finish()
    }
}

impl Ledger {
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Ledger { entries: Vec::new(), clock, file: None }
    }

    /// Opens (or creates) a JSONL-backed ledger, re-validating every stored line.
    pub fn open(path: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self, LedgerError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: LedgerEntry = serde_json::from_str(&line)
                    .map_err(|e| LedgerError::Corrupt { line: i + 1, reason: e.to_string() })?;
                let expected = entries.len() as u64 + 1;
                if entry.seq != expected {
                    return Err(LedgerError::Corrupt {
                        line: i + 1,
                        reason: format!("expected seq {expected}, found {}", entry.seq),
                    });
                }
                entries.push(entry);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Ledger { entries, clock, file: Some((path, file)) })
    }

    pub fn append(&mut self, new: NewEntry) -> Result<LedgerEntry, LedgerError> {
        if new.amount < 0 {
            return Err(LedgerError::NegativeAmount(new.amount));
        }
        let entry = LedgerEntry {
            seq: self.entries.len() as u64 + 1,
            timestamp_utc: self.clock.now(),
            kind: new.kind,
            amount: new.amount as u64,
            task_id: new.task_id,
            agent_id: new.agent_id,
            purpose: new.purpose,
        };
        if let Some((_, file)) = self.file.as_mut() {
            let mut line = entry.to_canonical().to_canonical_string();
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        self.entries.push(entry.clone());
        Ok(entry)
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    /// Σ credits − Σ debits.
    pub fn total_usd_cents(&self) -> Cents {
        Cents(self.entries.iter().map(LedgerEntry::signed_usd).sum())
    }

    /// Σ USD debits with `timestamp >= window_start`.
    pub fn usd_debits_since(&self, window_start: Timestamp) -> Cents {
        Cents(
            self.entries
                .iter()
                .filter(|e| e.kind == EntryKind::UsdDebit && e.timestamp_utc >= window_start)
                .map(|e| e.amount as i64)
                .sum(),
        )
    }

    /// USD debits in the current UTC calendar day.
    pub fn daily_debits(&self) -> Cents {
        self.usd_debits_since(utc_day_start(&self.clock.now()))
    }

    pub fn lifetime_usd_debits(&self) -> Cents {
        self.usd_debits_since(Timestamp::MIN_UTC)
    }

    /// `max(0, balance - min_reserve)`
    pub fn runway_usd_cents(&self, min_reserve: Cents) -> Cents {
        Cents((self.total_usd_cents() - min_reserve).get().max(0))
    }

    pub fn total_tokens_spent(&self) -> u64 {
        self.entries.iter().filter(|e| e.kind == EntryKind::TokenDebit).map(|e| e.amount).sum()
    }

    pub fn token_debits(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.iter().filter(|e| e.kind == EntryKind::TokenDebit)
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            balance_usd_cents: self.total_usd_cents().get(),
            daily_debits_usd_cents: self.daily_debits().get(),
            lifetime_debits_usd_cents: self.lifetime_usd_debits().get(),
            total_tokens_spent: self.total_tokens_spent(),
            entry_count: self.entries.len() as u64,
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{parse_utc, ManualClock};

    fn clock() -> ManualClock {
        ManualClock::at(parse_utc("2026-03-14T10:00:00Z").unwrap())
    }

    #[test]
    fn first_append_gets_seq_one() {
        let mut l = Ledger::in_memory(Arc::new(clock()));
        let e = l.append(NewEntry::credit(Cents(50000), "seed")).unwrap();
        assert_eq!(e.seq, 1);
        assert_eq!(l.total_usd_cents(), Cents(50000));
        let e = l.append(NewEntry::debit(Cents(4), "research").for_task("task-1")).unwrap();
        assert_eq!(e.seq, 2);
        assert_eq!(l.total_usd_cents(), Cents(49996));
    }

    #[test]
    fn negative_amount_rejected() {
        let mut l = Ledger::in_memory(Arc::new(clock()));
        let err = l.append(NewEntry::debit(Cents(-1), "oops")).unwrap_err();
        assert!(matches!(err, LedgerError::NegativeAmount(-1)));
        assert!(l.is_empty());
    }

    #[test]
    fn empty_ledger_is_zero() {
        let l = Ledger::in_memory(Arc::new(clock()));
        assert_eq!(l.total_usd_cents(), Cents(0));
        assert_eq!(l.runway_usd_cents(Cents(0)), Cents(0));
    }

    #[test]
    fn daily_window_excludes_yesterday_and_credits() {
        let c = clock();
        let mut l = Ledger::in_memory(Arc::new(c.clone()));
        c.set(parse_utc("2026-03-13T23:59:59Z").unwrap());
        l.append(NewEntry::credit(Cents(50000), "seed")).unwrap();
        l.append(NewEntry::debit(Cents(999), "yesterday")).unwrap();
        c.set(parse_utc("2026-03-14T08:00:00Z").unwrap());
        l.append(NewEntry::debit(Cents(100), "a")).unwrap();
        l.append(NewEntry::tokens(5000, "a")).unwrap();
        l.append(NewEntry::debit(Cents(20), "b")).unwrap();
        l.append(NewEntry::credit(Cents(500), "revenue")).unwrap();
        assert_eq!(l.daily_debits(), Cents(120));
        assert_eq!(l.lifetime_usd_debits(), Cents(1119));
        assert_eq!(l.total_tokens_spent(), 5000);
        let late = parse_utc("2026-03-15T00:00:00Z").unwrap();
        assert_eq!(l.usd_debits_since(late), Cents(0));
    }

    #[test]
    fn runway_clamps() {
        let mut l = Ledger::in_memory(Arc::new(clock()));
        l.append(NewEntry::credit(Cents(100), "seed")).unwrap();
        assert_eq!(l.runway_usd_cents(Cents(500)), Cents(0));
        assert_eq!(l.runway_usd_cents(Cents(40)), Cents(60));
    }

    #[test]
    fn persists_and_recovers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        {
            let mut l = Ledger::open(&path, Arc::new(clock())).unwrap();
            l.append(NewEntry::credit(Cents(50000), "seed")).unwrap();
            l.append(NewEntry::debit(Cents(4), "research").for_task("task-1").by_agent("w1")).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            r#"{"agent_id": "w1", "amount": 4, "kind": "USD_DEBIT", "purpose": "research", "seq": 2, "task_id": "task-1", "timestamp_utc": "2026-03-14T10:00:00Z"}"#
        );
        let mut l = Ledger::open(&path, Arc::new(clock())).unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(l.total_usd_cents(), Cents(49996));
        assert_eq!(l.append(NewEntry::tokens(10, "t")).unwrap().seq, 3);
    }

    #[test]
    fn recovery_rejects_seq_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"agent_id": null, "amount": 1, "kind": "USD_CREDIT", "purpose": "x", "seq": 1, "task_id": null, "timestamp_utc": "2026-03-14T10:00:00Z"}"#,
                "\n",
                r#"{"agent_id": null, "amount": 1, "kind": "USD_CREDIT", "purpose": "x", "seq": 3, "task_id": null, "timestamp_utc": "2026-03-14T10:00:00Z"}"#,
                "\n"
            ),
        )
        .unwrap();
        let err = Ledger::open(&path, Arc::new(clock())).unwrap_err();
        assert!(matches!(err, LedgerError::Corrupt { line: 2, .. }));
    }
}
