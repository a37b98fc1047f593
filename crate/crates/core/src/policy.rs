//! Context-aware policy checks and symbolic data obfuscation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fingerprint;
use crate::uppt::{Context, Control, Resource, Uppt};

/// Ordered by severity: `Allow < Obfuscate < Disallow`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PolicyDecision {
    Allow,
    Obfuscate,
    Disallow,
}

impl From<Control> for PolicyDecision {
    fn from(c: Control) -> Self {
        match c {
            Control::Disable => PolicyDecision::Disallow,
            Control::Obfuscate => PolicyDecision::Obfuscate,
            Control::Allow => PolicyDecision::Allow,
        }
    }
}

impl fmt::Display for PolicyDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyDecision::Allow => "ALLOW",
            PolicyDecision::Obfuscate => "OBFUSCATE",
            PolicyDecision::Disallow => "DISALLOW",
        })
    }
}

/// Most severe control among rows for `resource` whose context matches.
pub fn check_policy(u: &Uppt, resource: Resource, ctx: &Context) -> PolicyDecision {
    u.rows()
        .iter()
        .filter(|r| r.resource == resource && r.context.matches(ctx))
        .map(|r| PolicyDecision::from(r.control))
        .max()
        .unwrap_or(PolicyDecision::Allow)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueClass {
    Real,
    Obfuscated,
    Denied,
}

/// A symbolic datum such as `real:"gps@x"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Datum {
    pub class: ValueClass,
    pub value: String,
}

impl Datum {
    pub fn real(value: impl Into<String>) -> Self {
        Datum {
            class: ValueClass::Real,
            value: value.into(),
        }
    }
}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.class {
            ValueClass::Real => "real",
            ValueClass::Obfuscated => "obfuscated",
            ValueClass::Denied => "denied",
        };
        write!(f, "{tag}:\"{}\"", self.value)
    }
}

/// Replaces the part after `@` with a seed-dependent token and tags the
/// result obfuscated. Denied data stays denied.
pub fn obfuscate(d: &Datum, seed: u64) -> Datum {
    if d.class == ValueClass::Denied {
        return d.clone();
    }
    let prefix = d.value.split('@').next().unwrap_or_default();
    let h = fingerprint::of_bytes(format!("{seed}\0{}", d.value).as_bytes());
    Datum {
        class: ValueClass::Obfuscated,
        value: format!("{prefix}@r{}", &h[..12]),
    }
}
