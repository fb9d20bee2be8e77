//! Identifiers, relevance grades and time intervals.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            /// Identifiers are non-empty and free of whitespace so they survive
            /// the flat whitespace-separated formats.
            pub fn new(id: impl Into<String>) -> Result<Self> {
                let id = id.into();
                if id.is_empty() {
                    return Err(Error::invalid($what, "empty identifier"));
                }
                if id.chars().any(char::is_whitespace) {
                    return Err(Error::invalid($what, format!("{id:?} contains whitespace")));
                }
                Ok(Self(id))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;
            fn try_from(value: String) -> Result<Self> {
                Self::new(value)
            }
        }

        impl From<$name> for String {
            fn from(value: $name) -> String {
                value.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::str::FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                Self::new(s)
            }
        }
    };
}

id_type!(
    /// Test-set question identifier, e.g. `Q17`.
    QuestionId,
    "question id"
);
id_type!(
    /// Corpus video identifier.
    VideoId,
    "video id"
);

/// Graded relevance of a video for a question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum RelevanceGrade {
    NotRelevant = 0,
    PossiblyRelevant = 1,
    DefinitelyRelevant = 2,
}

impl RelevanceGrade {
    pub fn value(self) -> u8 {
        self as u8
    }

    /// Binary relevance used by MAP, P@k and R@k.
    pub fn is_relevant(self) -> bool {
        self >= RelevanceGrade::PossiblyRelevant
    }
}

impl TryFrom<u8> for RelevanceGrade {
    type Error = Error;
    fn try_from(value: u8) -> Result<Self> {
        match value {
            0 => Ok(RelevanceGrade::NotRelevant),
            1 => Ok(RelevanceGrade::PossiblyRelevant),
            2 => Ok(RelevanceGrade::DefinitelyRelevant),
            other => Err(Error::invalid(
                "relevance grade",
                format!("{other} is not one of 0, 1, 2"),
            )),
        }
    }
}

impl From<RelevanceGrade> for u8 {
    fn from(value: RelevanceGrade) -> u8 {
        value.value()
    }
}

/// A closed span `[start, end]` on a video timeline, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval<T>", bound(deserialize = "T: Scalar"))]
pub struct TimeInterval<T> {
    start: T,
    end: T,
}

#[derive(Deserialize)]
struct RawInterval<T> {
    start: T,
    end: T,
}

impl<T: Scalar> TryFrom<RawInterval<T>> for TimeInterval<T> {
    type Error = Error;
    fn try_from(raw: RawInterval<T>) -> Result<Self> {
        Self::new(raw.start, raw.end)
    }
}

impl<T: Scalar> TimeInterval<T> {
    /// Fails unless `0 <= start <= end` and both bounds are finite.
    pub fn new(start: T, end: T) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::invalid(
                "interval",
                format!("[{start}, {end}] has a non-finite bound"),
            ));
        }
        if start < T::zero() {
            return Err(Error::invalid(
                "interval",
                format!("start {start} is negative"),
            ));
        }
        if start > end {
            return Err(Error::invalid(
                "interval",
                format!("start {start} is after end {end}"),
            ));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> T {
        self.start
    }

    pub fn end(&self) -> T {
        self.end
    }

    pub fn len(&self) -> T {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Widens both ends by `amount` seconds, clamping the start at zero.
    pub fn extend(&self, amount: T) -> Self {
        let amount = amount.max(T::zero());
        Self {
            start: (self.start - amount).max(T::zero()),
            end: self.end + amount,
        }
    }

    pub fn cast<U: Scalar>(&self) -> TimeInterval<U> {
        TimeInterval {
            start: U::of(self.start.as_f64()),
            end: U::of(self.end.as_f64()),
        }
    }
}

impl<T: Scalar> fmt::Display for TimeInterval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}]",
            format_timestamp(self.start),
            format_timestamp(self.end)
        )
    }
}

/// Length of the overlap of `a` and `b`; zero for disjoint or touching spans.
pub fn intersection_length<T: Scalar>(a: &TimeInterval<T>, b: &TimeInterval<T>) -> T {
    (a.end.min(b.end) - a.start.max(b.start)).max(T::zero())
}

pub fn union_length<T: Scalar>(a: &TimeInterval<T>, b: &TimeInterval<T>) -> T {
    a.len() + b.len() - intersection_length(a, b)
}

/// Parses `M+:SS` (seconds field 00-59) or a plain non-negative decimal
/// number of seconds.
pub fn parse_timestamp<T: Scalar>(text: &str) -> Result<T> {
    let token = text.trim();
    let fail = |reason: &str| Error::Timestamp {
        token: text.to_string(),
        reason: reason.to_string(),
    };
    if token.is_empty() {
        return Err(fail("empty timestamp"));
    }
    if let Some((minutes, seconds)) = token.split_once(':') {
        if minutes.is_empty() || !minutes.bytes().all(|b| b.is_ascii_digit()) {
            return Err(fail("minutes must be one or more digits"));
        }
        if seconds.len() != 2 || !seconds.bytes().all(|b| b.is_ascii_digit()) {
            return Err(fail("seconds must be exactly two digits"));
        }
        let seconds: u32 = seconds.parse().map_err(|_| fail("bad seconds"))?;
        if seconds >= 60 {
            return Err(fail("seconds field must be below 60"));
        }
        let minutes: f64 = minutes.parse().map_err(|_| fail("bad minutes"))?;
        return Ok(T::of(minutes * 60.0 + f64::from(seconds)));
    }
    let mut dots = 0;
    let mut digits = 0;
    for b in token.bytes() {
        match b {
            b'0'..=b'9' => digits += 1,
            b'.' => dots += 1,
            _ => return Err(fail("expected MM:SS or a decimal number of seconds")),
        }
    }
    if digits == 0 || dots > 1 {
        return Err(fail("expected MM:SS or a decimal number of seconds"));
    }
    let value: f64 = token.parse().map_err(|_| fail("bad number"))?;
    if !value.is_finite() {
        return Err(fail("value out of range"));
    }
    Ok(T::of(value))
}

/// `MM:SS` for integral values under one hour, decimal seconds otherwise.
pub fn format_timestamp<T: Scalar>(seconds: T) -> String {
    let s = seconds.as_f64();
    if (0.0..3600.0).contains(&s) && s.fract() == 0.0 {
        let whole = s as u32;
        format!("{:02}:{:02}", whole / 60, whole % 60)
    } else {
        format!("{s}")
    }
}
