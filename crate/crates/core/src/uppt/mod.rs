//! User privacy preference tables: rows of (context, resource, control).

pub mod wizard;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint;

pub use wizard::{run_wizard, PromptDriver, ScriptedDriver, StdioDriver, WizardError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UpptError {
    #[error("unknown {what} `{word}`; expected one of: {expected}")]
    UnknownWord {
        what: &'static str,
        word: String,
        expected: String,
    },
    #[error("malformed time `{0}`; expected HH:MM")]
    BadTime(String),
    #[error("time window {start}-{end} is empty; start must precede end")]
    EmptyWindow { start: String, end: String },
    #[error("row {0}: context needs at least one of time, location, status")]
    EmptyContext(usize),
    #[error("row {0} duplicates an earlier row")]
    DuplicateRow(usize),
    #[error("table has no rows")]
    NoRows,
    #[error("malformed document: {0}")]
    Json(String),
}

macro_rules! word_enum {
    ($name:ident, $what:literal, { $($variant:ident => $word:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $word),+
                }
            }
        }

        impl FromStr for $name {
            type Err = UpptError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($word => Ok($name::$variant),)+
                    _ => Err(UpptError::UnknownWord {
                        what: $what,
                        word: s.to_string(),
                        expected: [$($word),+].join(", "),
                    }),
                }
            }
        }

        impl TryFrom<String> for $name {
            type Error = UpptError;

            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }

        impl From<$name> for String {
            fn from(v: $name) -> String {
                v.as_str().to_string()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

word_enum!(Resource, "resource", {
    Gps => "gps",
    Camera => "camera",
    Microphone => "microphone",
    Wifi => "wifi",
    Bluetooth => "bluetooth",
    OnboardSensors => "onboard_sensors",
});

word_enum!(Control, "control", {
    Disable => "disable",
    Obfuscate => "obfuscate",
    Allow => "allow",
});

word_enum!(StatusKey, "status key", {
    ForegroundApp => "foreground_app",
    Category => "category",
    BackStack => "back_stack",
});

/// The `resource_control` word for a pair, e.g. `gps_disable`.
pub fn word(r: Resource, c: Control) -> String {
    format!("{}_{}", r.as_str(), c.as_str())
}

/// Time of day in minutes, written `HH:MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Clock(u16);

impl Clock {
    pub fn from_minutes(m: u16) -> Option<Clock> {
        (m < 24 * 60).then_some(Clock(m))
    }

    pub fn minutes(self) -> u16 {
        self.0
    }
}

impl FromStr for Clock {
    type Err = UpptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || UpptError::BadTime(s.to_string());
        let (h, m) = s.split_once(':').ok_or_else(bad)?;
        if h.len() != 2 || m.len() != 2 {
            return Err(bad());
        }
        let h: u16 = h.parse().map_err(|_| bad())?;
        let m: u16 = m.parse().map_err(|_| bad())?;
        if h > 23 || m > 59 {
            return Err(bad());
        }
        Ok(Clock(h * 60 + m))
    }
}

impl TryFrom<String> for Clock {
    type Error = UpptError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Clock> for String {
    fn from(c: Clock) -> String {
        c.to_string()
    }
}

impl fmt::Display for Clock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

/// Half-open window `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeWindow {
    pub start: Clock,
    pub end: Clock,
}

impl TimeWindow {
    pub fn contains(&self, t: Clock) -> bool {
        self.start <= t && t < self.end
    }
}

/// System-status constraints. `"*"` matches any value; a back stack
/// matches when every listed app is on the scenario's stack.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatusSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foreground_app: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub back_stack: Option<Vec<String>>,
}

impl StatusSpec {
    fn is_empty(&self) -> bool {
        self.foreground_app.is_none() && self.category.is_none() && self.back_stack.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<StatusSpec>,
}

/// Observed system status of a scenario.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Status {
    #[serde(default)]
    pub foreground_app: String,
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub back_stack: Vec<String>,
}

/// A concrete context a policy is checked against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub clock: Clock,
    pub location: String,
    #[serde(default)]
    pub status: Status,
}

fn value_matches(spec: &Option<String>, actual: &str) -> bool {
    match spec.as_deref() {
        None | Some("*") => true,
        Some(v) => v == actual,
    }
}

impl ContextSpec {
    fn is_empty(&self) -> bool {
        self.time.is_none()
            && self.location.is_none()
            && self.status.as_ref().is_none_or(StatusSpec::is_empty)
    }

    /// Conjunctive match; absent fields match anything.
    pub fn matches(&self, ctx: &Context) -> bool {
        if let Some(w) = &self.time {
            if !w.contains(ctx.clock) {
                return false;
            }
        }
        if !value_matches(&self.location, &ctx.location) {
            return false;
        }
        if let Some(s) = &self.status {
            if !value_matches(&s.foreground_app, &ctx.status.foreground_app)
                || !value_matches(&s.category, &ctx.status.category)
            {
                return false;
            }
            if let Some(stack) = &s.back_stack {
                if !stack.iter().all(|a| ctx.status.back_stack.contains(a)) {
                    return false;
                }
            }
        }
        true
    }

    /// A context that satisfies this spec. Wildcards become `any`.
    pub fn witness(&self) -> Context {
        let concrete = |v: &Option<String>| match v.as_deref() {
            None | Some("*") => "any".to_string(),
            Some(v) => v.to_string(),
        };
        let status = self.status.clone().unwrap_or_default();
        Context {
            clock: self.time.map(|w| w.start).unwrap_or(Clock(12 * 60)),
            location: concrete(&self.location),
            status: Status {
                foreground_app: concrete(&status.foreground_app),
                category: concrete(&status.category),
                back_stack: status.back_stack.unwrap_or_default(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpptRow {
    pub context: ContextSpec,
    pub resource: Resource,
    pub control: Control,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "UpptRepr", into = "UpptRepr")]
pub struct Uppt {
    rows: Vec<UpptRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UpptRepr {
    rows: Vec<UpptRow>,
}

impl TryFrom<UpptRepr> for Uppt {
    type Error = UpptError;

    fn try_from(r: UpptRepr) -> Result<Self, Self::Error> {
        Uppt::new(r.rows)
    }
}

impl From<Uppt> for UpptRepr {
    fn from(u: Uppt) -> Self {
        UpptRepr { rows: u.rows }
    }
}

impl Uppt {
    pub fn new(rows: Vec<UpptRow>) -> Result<Self, UpptError> {
        if rows.is_empty() {
            return Err(UpptError::NoRows);
        }
        let mut seen = BTreeSet::new();
        for (i, r) in rows.iter().enumerate() {
            if r.context.is_empty() {
                return Err(UpptError::EmptyContext(i));
            }
            if let Some(w) = &r.context.time {
                if w.start >= w.end {
                    return Err(UpptError::EmptyWindow {
                        start: w.start.to_string(),
                        end: w.end.to_string(),
                    });
                }
            }
            if !seen.insert(r) {
                return Err(UpptError::DuplicateRow(i));
            }
        }
        Ok(Uppt { rows })
    }

    pub fn rows(&self) -> &[UpptRow] {
        &self.rows
    }

    pub fn fingerprint(&self) -> String {
        fingerprint::of_json(self)
    }

    /// Location labels named by any row.
    pub fn locations(&self) -> BTreeSet<String> {
        self.rows
            .iter()
            .filter_map(|r| r.context.location.clone())
            .filter(|l| l != "*")
            .collect()
    }
}

/// Parses and validates a JSON table.
pub fn parse_uppt(document: &str) -> Result<Uppt, UpptError> {
    let value: serde_json::Value =
        serde_json::from_str(document).map_err(|e| UpptError::Json(e.to_string()))?;
    // Surface vocabulary errors as such rather than as generic JSON errors.
    if let Some(rows) = value.get("rows").and_then(|r| r.as_array()) {
        for row in rows {
            if let Some(r) = row.get("resource").and_then(|v| v.as_str()) {
                r.parse::<Resource>()?;
            }
            if let Some(c) = row.get("control").and_then(|v| v.as_str()) {
                c.parse::<Control>()?;
            }
            if let Some(status) = row.pointer("/context/status").and_then(|s| s.as_object()) {
                for key in status.keys() {
                    key.parse::<StatusKey>()?;
                }
            }
            if let Some(time) = row.pointer("/context/time").and_then(|t| t.as_object()) {
                for t in time.values().filter_map(|v| v.as_str()) {
                    t.parse::<Clock>()?;
                }
            }
        }
    }
    let repr: UpptRepr =
        serde_json::from_value(value).map_err(|e| UpptError::Json(e.to_string()))?;
    Uppt::new(repr.rows)
}

/// `resource_control` words of every non-allow row.
pub fn extract_resource_control_words(u: &Uppt) -> BTreeSet<String> {
    u.rows
        .iter()
        .filter(|r| r.control != Control::Allow)
        .map(|r| word(r.resource, r.control))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MEETING: &str = r#"{"rows":[{"context":{"time":{"start":"09:00","end":"11:00"},"location":"HotelX"},"resource":"gps","control":"disable"}]}"#;

    fn ctx(clock: &str, location: &str) -> Context {
        Context {
            clock: clock.parse().unwrap(),
            location: location.into(),
            status: Status::default(),
        }
    }

    #[test]
    fn parses_meeting_row() {
        let u = parse_uppt(MEETING).unwrap();
        assert_eq!(u.rows().len(), 1);
        let r = &u.rows()[0];
        assert_eq!(r.resource, Resource::Gps);
        assert_eq!(r.control, Control::Disable);
        assert_eq!(r.context.time.unwrap().start.minutes(), 540);
    }

    #[test]
    fn round_trips_through_json() {
        let u = parse_uppt(MEETING).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, MEETING);
    }

    #[test]
    fn empty_rows_rejected() {
        assert_eq!(parse_uppt(r#"{"rows":[]}"#), Err(UpptError::NoRows));
    }

    #[test]
    fn unknown_words_are_named() {
        let doc = MEETING.replace("\"disable\"", "\"blockk\"");
        let err = parse_uppt(&doc).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("blockk"), "{msg}");
        assert!(msg.contains("disable, obfuscate, allow"), "{msg}");
        let doc = MEETING.replace("\"gps\"", "\"radar\"");
        assert!(parse_uppt(&doc).unwrap_err().to_string().contains("radar"));
        let doc = MEETING.replace("\"location\":\"HotelX\"", "\"status\":{\"fg\":\"x\"}");
        assert!(parse_uppt(&doc).unwrap_err().to_string().contains("fg"));
    }

    #[test]
    fn malformed_and_empty_windows() {
        let doc = MEETING.replace("09:00", "9am");
        assert_eq!(parse_uppt(&doc), Err(UpptError::BadTime("9am".into())));
        let doc = MEETING.replace("09:00", "24:00");
        assert!(matches!(parse_uppt(&doc), Err(UpptError::BadTime(_))));
        let doc = MEETING.replace("09:00", "11:00");
        assert!(matches!(
            parse_uppt(&doc),
            Err(UpptError::EmptyWindow { .. })
        ));
    }

    #[test]
    fn context_needs_a_field_and_rows_are_unique() {
        let doc = r#"{"rows":[{"context":{},"resource":"gps","control":"disable"}]}"#;
        assert_eq!(parse_uppt(doc), Err(UpptError::EmptyContext(0)));
        let row = &MEETING[9..MEETING.len() - 2];
        let doc = format!(r#"{{"rows":[{row},{row}]}}"#);
        assert_eq!(parse_uppt(&doc), Err(UpptError::DuplicateRow(1)));
    }

    #[test]
    fn conjunctive_matching() {
        let u = parse_uppt(MEETING).unwrap();
        let spec = &u.rows()[0].context;
        assert!(spec.matches(&ctx("09:30", "HotelX")));
        assert!(!spec.matches(&ctx("12:00", "HotelX")));
        assert!(!spec.matches(&ctx("09:30", "Home")));
        assert!(!spec.matches(&ctx("11:00", "HotelX")));
        assert!(spec.matches(&spec.witness()));
    }

    #[test]
    fn status_wildcards_and_back_stack() {
        let spec = ContextSpec {
            status: Some(StatusSpec {
                foreground_app: Some("*".into()),
                category: Some("payment".into()),
                back_stack: Some(vec!["bank".into()]),
            }),
            ..Default::default()
        };
        let mut c = ctx("08:00", "Anywhere");
        c.status = Status {
            foreground_app: "shop".into(),
            category: "payment".into(),
            back_stack: vec!["launcher".into(), "bank".into()],
        };
        assert!(spec.matches(&c));
        c.status.back_stack.pop();
        assert!(!spec.matches(&c));
        assert!(spec.matches(&spec.witness()));
    }

    fn row(r: Resource, c: Control, loc: &str) -> UpptRow {
        UpptRow {
            context: ContextSpec {
                location: Some(loc.into()),
                ..Default::default()
            },
            resource: r,
            control: c,
        }
    }

    #[test]
    fn extracted_words() {
        let u = Uppt::new(vec![
            row(Resource::Gps, Control::Disable, "a"),
            row(Resource::Gps, Control::Obfuscate, "a"),
            row(Resource::Gps, Control::Disable, "b"),
            row(Resource::Camera, Control::Allow, "a"),
        ])
        .unwrap();
        let w: Vec<String> = extract_resource_control_words(&u).into_iter().collect();
        assert_eq!(w, vec!["gps_disable", "gps_obfuscate"]);
        let allow = Uppt::new(vec![row(Resource::Wifi, Control::Allow, "a")]).unwrap();
        assert!(extract_resource_control_words(&allow).is_empty());
    }
}
