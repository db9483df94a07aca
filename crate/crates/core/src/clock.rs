//! Injectable UTC clock with second precision.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, NaiveTime, SecondsFormat, TimeZone, Utc};

pub type Timestamp = DateTime<Utc>;

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

/// Wall clock truncated to whole seconds.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        from_unix(Utc::now().timestamp())
    }
}

/// A clock that only moves when told to. Cloning shares the same time.
#[derive(Debug, Clone)]
pub struct ManualClock {
    secs: Arc<AtomicI64>,
}

impl ManualClock {
    pub fn at(t: Timestamp) -> Self {
        ManualClock { secs: Arc::new(AtomicI64::new(t.timestamp())) }
    }

    pub fn set(&self, t: Timestamp) {
        self.secs.store(t.timestamp(), Ordering::SeqCst);
    }

    pub fn advance(&self, secs: i64) {
        self.secs.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        from_unix(self.secs.load(Ordering::SeqCst))
    }
}

pub fn from_unix(secs: i64) -> Timestamp {
    Utc.timestamp_opt(secs, 0).single().expect("timestamp in range")
}

/// `YYYY-MM-DDTHH:MM:SSZ`
pub fn format_utc(t: &Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_utc(text: &str) -> Option<Timestamp> {
    let parsed = DateTime::parse_from_rfc3339(text).ok()?.with_timezone(&Utc);
    // only the canonical rendering is accepted
    (format_utc(&parsed) == text).then_some(parsed)
}

/// 00:00:00Z of the UTC calendar day containing `t`.
pub fn utc_day_start(t: &Timestamp) -> Timestamp {
    Utc.from_utc_datetime(&t.date_naive().and_time(NaiveTime::MIN))
}

pub(crate) mod serde_utc {
    use super::{format_utc, parse_utc, Timestamp};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_utc(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let text = String::deserialize(d)?;
        parse_utc(&text).ok_or_else(|| D::Error::custom(format!("bad UTC timestamp {text:?}")))
    }
}
