//! The mini-framework source language.
//!
//! A corpus is a set of `.mfw` files, each holding `service` units. A unit
//! carries the process it runs in, which side of the isolation boundary it
//! lives on (`service` or `app`) and its implementation language. Methods
//! are reduced to what the analyses need: signature, call statements,
//! variable declarations, string constants, returns and (after
//! instrumentation) hook checks.

pub(crate) mod parse;
pub(crate) mod print;
mod tokens;

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_corpus, parse_file, ParseError};
pub use print::{print_corpus, print_unit, SourceDocument};
pub use tokens::{method_tokens, ClassedToken, TokenClass};

/// Globally unique method identifier: `Unit.method/arity`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MethodId(String);

impl MethodId {
    pub fn new(unit: &str, name: &str, arity: usize) -> Self {
        MethodId(format!("{unit}.{name}/{arity}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for MethodId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for MethodId {
    fn from(s: &str) -> Self {
        MethodId(s.to_string())
    }
}

impl From<String> for MethodId {
    fn from(s: String) -> Self {
        MethodId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Service,
    App,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Service => "service",
            Side::App => "app",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    Java,
    Cpp,
}

impl Lang {
    pub fn as_str(self) -> &'static str {
        match self {
            Lang::Java => "java",
            Lang::Cpp => "cpp",
        }
    }
}

/// File and line of a construct, for diagnostics only. Ignored by
/// [`Corpus::same_structure`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourcePos {
    pub file: String,
    pub line: u32,
}

impl fmt::Display for SourcePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Param {
    pub ty: String,
    pub name: String,
}

/// Target of a `call` statement; `qualifier` names a unit when present.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CallTarget {
    pub qualifier: Option<String>,
    pub name: String,
}

impl fmt::Display for CallTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.qualifier {
            Some(q) => write!(f, "{q}.{}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnValue {
    None,
    Null,
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stmt {
    Call(CallTarget),
    VarDecl {
        ty: String,
        name: String,
    },
    Tok(String),
    Return(ReturnValue),
    /// Inserted by the instrumenter. `resources` and `controls` are
    /// `|`-joined lexicon words.
    HookCheck {
        resources: String,
        controls: String,
        sds_var: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub id: MethodId,
    pub unit: String,
    pub name: String,
    pub params: Vec<Param>,
    pub return_type: String,
    pub body: Vec<Stmt>,
    pub callees: Vec<CallTarget>,
    pub pos: SourcePos,
    /// Source line of each body statement, parallel to `body`.
    pub stmt_lines: Vec<u32>,
}

impl MethodRecord {
    /// Builds a record, deriving `id` and `callees` from the other fields.
    pub fn new(
        unit: &str,
        name: &str,
        params: Vec<Param>,
        return_type: &str,
        body: Vec<Stmt>,
    ) -> Self {
        let mut m = MethodRecord {
            id: MethodId::new(unit, name, params.len()),
            unit: unit.to_string(),
            name: name.to_string(),
            params,
            return_type: return_type.to_string(),
            body,
            callees: Vec::new(),
            pos: SourcePos::default(),
            stmt_lines: Vec::new(),
        };
        m.refresh_callees();
        m
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Recomputes `callees` from the call statements in `body`.
    pub fn refresh_callees(&mut self) {
        self.callees = self
            .body
            .iter()
            .filter_map(|s| match s {
                Stmt::Call(t) => Some(t.clone()),
                _ => None,
            })
            .collect();
    }

    /// Declared type of a local variable or parameter, locals first.
    pub fn type_of(&self, var: &str) -> Option<&str> {
        self.body
            .iter()
            .find_map(|s| match s {
                Stmt::VarDecl { ty, name } if name == var => Some(ty.as_str()),
                _ => None,
            })
            .or_else(|| {
                self.params
                    .iter()
                    .find(|p| p.name == var)
                    .map(|p| p.ty.as_str())
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitDecl {
    pub name: String,
    pub process: String,
    pub side: Side,
    pub lang: Lang,
    pub methods: Vec<MethodRecord>,
    pub pos: SourcePos,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusRepr {
    units: Vec<UnitDecl>,
    source_paths: Vec<String>,
}

/// A parsed, validated corpus. Immutable once built; method lookups and call
/// resolution go through indices computed at construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CorpusRepr", into = "CorpusRepr")]
pub struct Corpus {
    units: Vec<UnitDecl>,
    source_paths: Vec<String>,
    by_id: HashMap<MethodId, (usize, usize)>,
    by_name: HashMap<String, Vec<MethodId>>,
    by_unit_name: HashMap<(String, String), Vec<MethodId>>,
}

impl TryFrom<CorpusRepr> for Corpus {
    type Error = ParseError;

    fn try_from(r: CorpusRepr) -> Result<Self, Self::Error> {
        Corpus::new(r.units, r.source_paths)
    }
}

impl From<Corpus> for CorpusRepr {
    fn from(c: Corpus) -> Self {
        CorpusRepr {
            units: c.units,
            source_paths: c.source_paths,
        }
    }
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.units == other.units && self.source_paths == other.source_paths
    }
}

impl Default for Corpus {
    fn default() -> Self {
        Corpus::new(Vec::new(), Vec::new()).expect("empty corpus is valid")
    }
}

impl Corpus {
    /// Validates id uniqueness and builds the lookup indices.
    pub fn new(units: Vec<UnitDecl>, source_paths: Vec<String>) -> Result<Self, ParseError> {
        let mut by_id: HashMap<MethodId, (usize, usize)> = HashMap::new();
        let mut by_name: HashMap<String, Vec<MethodId>> = HashMap::new();
        let mut by_unit_name: HashMap<(String, String), Vec<MethodId>> = HashMap::new();
        for (ui, unit) in units.iter().enumerate() {
            if unit.name.is_empty() {
                return Err(ParseError::Invalid {
                    pos: unit.pos.clone(),
                    message: "unit name is empty".into(),
                });
            }
            for (mi, m) in unit.methods.iter().enumerate() {
                let expected = MethodId::new(&unit.name, &m.name, m.params.len());
                if m.id != expected || m.unit != unit.name {
                    return Err(ParseError::Invalid {
                        pos: m.pos.clone(),
                        message: format!("method id {} does not match its declaration", m.id),
                    });
                }
                if let Some(&(pu, pm)) = by_id.get(&m.id) {
                    return Err(ParseError::DuplicateMethod {
                        id: m.id.clone(),
                        first: units[pu].methods[pm].pos.clone(),
                        second: m.pos.clone(),
                    });
                }
                by_id.insert(m.id.clone(), (ui, mi));
                by_name
                    .entry(m.name.clone())
                    .or_default()
                    .push(m.id.clone());
                by_unit_name
                    .entry((unit.name.clone(), m.name.clone()))
                    .or_default()
                    .push(m.id.clone());
            }
        }
        for v in by_name.values_mut().chain(by_unit_name.values_mut()) {
            v.sort();
        }
        Ok(Corpus {
            units,
            source_paths,
            by_id,
            by_name,
            by_unit_name,
        })
    }

    pub fn units(&self) -> &[UnitDecl] {
        &self.units
    }

    pub fn source_paths(&self) -> &[String] {
        &self.source_paths
    }

    pub fn into_units(self) -> Vec<UnitDecl> {
        self.units
    }

    pub fn methods(&self) -> impl Iterator<Item = &MethodRecord> {
        self.units.iter().flat_map(|u| u.methods.iter())
    }

    pub fn method_count(&self) -> usize {
        self.by_id.len()
    }

    /// All method ids in sorted order.
    pub fn method_ids(&self) -> Vec<MethodId> {
        let mut ids: Vec<MethodId> = self.by_id.keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn method(&self, id: &str) -> Option<&MethodRecord> {
        self.by_id.get(id).map(|&(u, m)| &self.units[u].methods[m])
    }

    pub fn unit_of(&self, id: &str) -> Option<&UnitDecl> {
        self.by_id.get(id).map(|&(u, _)| &self.units[u])
    }

    pub fn side_of(&self, id: &str) -> Option<Side> {
        self.unit_of(id).map(|u| u.side)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// Resolves a call target by name: `U.m` to every method `m` of unit `U`,
    /// a bare `m` to every method named `m` anywhere. Arity is ignored.
    /// Unknown targets resolve to nothing.
    pub fn resolve(&self, target: &CallTarget) -> &[MethodId] {
        let hit = match &target.qualifier {
            Some(q) => self.by_unit_name.get(&(q.clone(), target.name.clone())),
            None => self.by_name.get(&target.name),
        };
        hit.map(Vec::as_slice).unwrap_or(&[])
    }

    /// Copy with all positions cleared, for structural comparison.
    pub fn without_positions(&self) -> Corpus {
        let units = self
            .units
            .iter()
            .map(|u| UnitDecl {
                pos: SourcePos::default(),
                methods: u
                    .methods
                    .iter()
                    .map(|m| MethodRecord {
                        pos: SourcePos::default(),
                        stmt_lines: Vec::new(),
                        ..m.clone()
                    })
                    .collect(),
                ..u.clone()
            })
            .collect();
        Corpus::new(units, Vec::new()).expect("stripping positions keeps ids unique")
    }

    /// Structural equality: same units, methods and statements in the same
    /// order, ignoring source positions and file names.
    pub fn same_structure(&self, other: &Corpus) -> bool {
        self.without_positions() == other.without_positions()
    }

    /// Returns a corpus with the given method replaced.
    pub fn with_method_body(&self, id: &str, body: Vec<Stmt>) -> Option<Corpus> {
        let &(u, m) = self.by_id.get(id)?;
        let mut units = self.units.clone();
        let rec = &mut units[u].methods[m];
        rec.body = body;
        rec.stmt_lines.clear();
        rec.refresh_callees();
        Some(Corpus::new(units, self.source_paths.clone()).expect("ids unchanged"))
    }
}
