//! Calendar dates, timestamp extraction from snippet text, and signed
//! temporal distances between a claim and its evidence.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Maximum number of evidence snippets attached to one claim.
pub const MAX_EVIDENCE: usize = 10;

const MIN_YEAR: i32 = 1;
const MAX_YEAR: i32 = 9999;

/// A Gregorian calendar date in the range 0001-01-01 ..= 9999-12-31.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date(NaiveDate);

impl Date {
    /// Returns `None` for impossible dates (Feb 30, month 13) and years outside 1..=9999.
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
            return None;
        }
        NaiveDate::from_ymd_opt(year, month, day).map(Date)
    }

    pub fn year(&self) -> i32 {
        self.0.year()
    }

    pub fn month(&self) -> u32 {
        self.0.month()
    }

    pub fn day(&self) -> u32 {
        self.0.day()
    }

    /// The date `days` days later (earlier when negative), if still in range.
    pub fn add_days(&self, days: i64) -> Option<Self> {
        let shifted = self
            .0
            .checked_add_signed(chrono::TimeDelta::try_days(days)?)?;
        Date::from_ymd(shifted.year(), shifted.month(), shifted.day())
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:04}-{:02}-{:02}",
            self.year(),
            self.month(),
            self.day()
        )
    }
}

impl FromStr for Date {
    type Err = Error;

    /// Strict ISO `YYYY-MM-DD` with nothing trailing.
    fn from_str(s: &str) -> Result<Self> {
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .ok()
            .filter(|d| s.len() == 10 && (MIN_YEAR..=MAX_YEAR).contains(&d.year()))
            .map(Date)
            .ok_or_else(|| Error::Invalid(format!("not a YYYY-MM-DD date: `{s}`")))
    }
}

impl Serialize for Date {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Date {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

const DATE_PREFIX_FORMATS: [&str; 5] =
    ["%Y-%m-%d", "%b %d, %Y", "%B %d, %Y", "%d %b %Y", "%d %B %Y"];

/// Extract a date from the beginning of `text`.
///
/// Recognized prefixes, after optional leading whitespace and matched
/// case-insensitively: `2017-01-03`, `Jan 3, 2017`, `January 3, 2017` and
/// `3 January 2017`. Anything else, including impossible calendar dates,
/// yields `None`.
pub fn parse_date(text: &str) -> Option<Date> {
    let text = text.trim_start();
    DATE_PREFIX_FORMATS.iter().find_map(|fmt| {
        let (date, rest) = NaiveDate::parse_and_remainder(text, fmt).ok()?;
        // "2017-01-031" must not parse as the 3rd.
        if rest.starts_with(|c: char| c.is_ascii_digit()) {
            return None;
        }
        Date::from_ymd(date.year(), date.month(), date.day())
    })
}

/// Signed number of days from `a` to `b`; negative when `b` precedes `a`.
pub fn days_between(a: Date, b: Date) -> i64 {
    (b.0 - a.0).num_days()
}

/// A dated, domain-labeled claim with its precomputed representations.
#[derive(Clone, Debug, PartialEq)]
pub struct Claim {
    pub claim_id: String,
    pub domain: String,
    pub label: String,
    pub timestamp: Date,
    pub claim_vector: Vec<f64>,
    pub metadata_vector: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceSnippet {
    pub snippet_id: String,
    pub snippet_text: Option<String>,
    pub timestamp: Option<Date>,
    pub evidence_vector: Vec<f64>,
    /// 1-based position in the search results list.
    pub search_rank: u32,
}

/// The evidence retrieved for one claim: 1 to [`MAX_EVIDENCE`] snippets with
/// distinct search ranks.
#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceSet(Vec<EvidenceSnippet>);

impl EvidenceSet {
    pub fn new(snippets: Vec<EvidenceSnippet>) -> Result<Self> {
        if snippets.is_empty() {
            return Err(Error::Empty("evidence set"));
        }
        if snippets.len() > MAX_EVIDENCE {
            return Err(Error::Invalid(format!(
                "evidence set holds {} snippets, at most {MAX_EVIDENCE} allowed",
                snippets.len()
            )));
        }
        let mut ranks: Vec<u32> = snippets.iter().map(|s| s.search_rank).collect();
        ranks.sort_unstable();
        if ranks[0] == 0 {
            return Err(Error::Invalid("search_rank must be >= 1".into()));
        }
        if ranks.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid(
                "duplicate search_rank in evidence set".into(),
            ));
        }
        Ok(EvidenceSet(snippets))
    }

    pub fn snippets(&self) -> &[EvidenceSnippet] {
        &self.0
    }

    pub fn snippets_mut(&mut self) -> &mut [EvidenceSnippet] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-snippet signed day offsets from the claim date; `None` where the
/// snippet carries no timestamp.
pub type DeltaSet = Vec<Option<i64>>;

/// Days from the claim date to the snippet date: positive when the evidence
/// was published after the claim.
pub fn temporal_distance(claim: &Claim, snippet: &EvidenceSnippet) -> Option<i64> {
    snippet.timestamp.map(|t| days_between(claim.timestamp, t))
}

pub fn compute_delta_set(claim: &Claim, set: &EvidenceSet) -> DeltaSet {
    set.snippets()
        .iter()
        .map(|s| temporal_distance(claim, s))
        .collect()
}
