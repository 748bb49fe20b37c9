//! RFC 3339 UTC timestamps at seconds precision, always with a `Z` suffix.

use chrono::{DateTime, NaiveDateTime, SubsecRound, Utc};

const FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

pub fn format_utc(t: DateTime<Utc>) -> String {
    t.trunc_subsecs(0).format(FORMAT).to_string()
}

/// Parses only the exact canonical form, e.g. `2024-01-01T00:00:00Z`.
pub fn parse_utc(s: &str) -> Option<DateTime<Utc>> {
    let naive = NaiveDateTime::parse_from_str(s, FORMAT).ok()?;
    let t = naive.and_utc();
    (format_utc(t) == s).then_some(t)
}

pub fn now() -> DateTime<Utc> {
    Utc::now().trunc_subsecs(0)
}
