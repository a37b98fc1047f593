//! The operation abstract layer: abstract operations, their keywords, and
//! the bottom-up keyword propagation that annotates methods with the
//! operations they perform.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::callgraph::CallGraph;
use crate::corpus::{method_tokens, Corpus, MethodId, TokenClass};
use crate::fingerprint;
use crate::uppt::Resource;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OalError {
    #[error("operation table is empty")]
    Empty,
    #[error("operation name `{0}` is not of the form verb_Resource")]
    BadName(String),
    #[error("operation `{0}` has no keywords")]
    NoKeywords(String),
    #[error("operation `{0}` has an empty keyword")]
    EmptyKeyword(String),
    #[error("operation `{op}` lists keyword {kind:?} `{text}` twice")]
    DuplicateKeyword {
        op: String,
        kind: KeywordKind,
        text: String,
    },
}

/// The kinds of semantic information a keyword can name. Each kind matches
/// one token class of [`method_tokens`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordKind {
    SdsType,
    IpcInterface,
    HwInterface,
    CommandConst,
}

impl KeywordKind {
    pub fn token_class(self) -> TokenClass {
        match self {
            KeywordKind::SdsType => TokenClass::Type,
            KeywordKind::IpcInterface | KeywordKind::HwInterface => TokenClass::Ident,
            KeywordKind::CommandConst => TokenClass::String,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub kind: KeywordKind,
    pub text: String,
}

impl KeywordEntry {
    pub fn new(kind: KeywordKind, text: &str) -> Self {
        KeywordEntry {
            kind,
            text: text.to_string(),
        }
    }
}

pub type KeywordSet = BTreeSet<KeywordEntry>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub resource: Resource,
    pub keywords: Vec<KeywordEntry>,
}

/// Abstract operations keyed by name, e.g. `return_GPS`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<String, Operation>",
    into = "BTreeMap<String, Operation>"
)]
pub struct OalTable {
    operations: BTreeMap<String, Operation>,
}

impl TryFrom<BTreeMap<String, Operation>> for OalTable {
    type Error = OalError;

    fn try_from(ops: BTreeMap<String, Operation>) -> Result<Self, Self::Error> {
        OalTable::new(ops)
    }
}

impl From<OalTable> for BTreeMap<String, Operation> {
    fn from(t: OalTable) -> Self {
        t.operations
    }
}

fn valid_op_name(name: &str) -> bool {
    let Some((verb, res)) = name.split_once('_') else {
        return false;
    };
    let ident = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    ident(verb) && ident(res) && verb.chars().all(|c| c.is_ascii_lowercase())
}

impl OalTable {
    pub fn new(operations: BTreeMap<String, Operation>) -> Result<Self, OalError> {
        if operations.is_empty() {
            return Err(OalError::Empty);
        }
        for (name, op) in &operations {
            if !valid_op_name(name) {
                return Err(OalError::BadName(name.clone()));
            }
            if op.keywords.is_empty() {
                return Err(OalError::NoKeywords(name.clone()));
            }
            let mut seen = BTreeSet::new();
            for k in &op.keywords {
                if k.text.is_empty() {
                    return Err(OalError::EmptyKeyword(name.clone()));
                }
                if !seen.insert(k) {
                    return Err(OalError::DuplicateKeyword {
                        op: name.clone(),
                        kind: k.kind,
                        text: k.text.clone(),
                    });
                }
            }
        }
        Ok(OalTable { operations })
    }

    pub fn operations(&self) -> &BTreeMap<String, Operation> {
        &self.operations
    }

    pub fn get(&self, op: &str) -> Option<&Operation> {
        self.operations.get(op)
    }

    pub fn contains(&self, op: &str) -> bool {
        self.operations.contains_key(op)
    }

    pub fn resource_of(&self, op: &str) -> Option<Resource> {
        self.operations.get(op).map(|o| o.resource)
    }

    /// Every distinct keyword in the table.
    pub fn all_keywords(&self) -> KeywordSet {
        self.operations
            .values()
            .flat_map(|o| o.keywords.iter().cloned())
            .collect()
    }

    /// `sds_type` keywords of the given operations.
    pub fn sds_types<'a>(&self, ops: impl IntoIterator<Item = &'a String>) -> BTreeSet<String> {
        ops.into_iter()
            .filter_map(|o| self.operations.get(o))
            .flat_map(|o| o.keywords.iter())
            .filter(|k| k.kind == KeywordKind::SdsType)
            .map(|k| k.text.clone())
            .collect()
    }

    pub fn fingerprint(&self) -> String {
        fingerprint::of_json(&self.operations)
    }
}

/// Keywords of `table` named by the method's own tokens, matched exactly
/// and by token class.
pub fn gather_keywords(m: &crate::corpus::MethodRecord, table: &OalTable) -> KeywordSet {
    let index: HashMap<(TokenClass, &str), Vec<&KeywordEntry>> = table
        .operations
        .values()
        .flat_map(|o| o.keywords.iter())
        .fold(HashMap::new(), |mut acc, k| {
            acc.entry((k.kind.token_class(), k.text.as_str()))
                .or_default()
                .push(k);
            acc
        });
    let mut out = KeywordSet::new();
    for t in method_tokens(m) {
        if let Some(ks) = index.get(&(t.class, t.text.as_str())) {
            out.extend(ks.iter().map(|&k| k.clone()));
        }
    }
    out
}

/// Every operation with at least one keyword in `keywords`.
pub fn lookup_abstract_operations(keywords: &KeywordSet, table: &OalTable) -> BTreeSet<String> {
    table
        .operations
        .iter()
        .filter(|(_, o)| o.keywords.iter().any(|k| keywords.contains(k)))
        .map(|(n, _)| n.clone())
        .collect()
}

/// Annotation of one method.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodAo {
    /// Own keywords plus those propagated from sensitive callees.
    pub keywords: KeywordSet,
    /// Keywords named directly in the method.
    pub gathered: KeywordSet,
    /// Operations derived from `keywords`; empty outside the PMS.
    pub ops: BTreeSet<String>,
    /// Operations derived from `gathered`; empty outside the PMS.
    pub local_ops: BTreeSet<String>,
}

/// Method to abstract-operation annotation, serialized as a JSON map keyed
/// by method id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MethodAoMap(pub BTreeMap<MethodId, MethodAo>);

static NO_OPS: BTreeSet<String> = BTreeSet::new();

impl MethodAoMap {
    pub fn get(&self, id: &str) -> Option<&MethodAo> {
        self.0.get(id)
    }

    /// Operations of a method; empty when it is not annotated.
    pub fn ops(&self, id: &str) -> &BTreeSet<String> {
        self.0.get(id).map(|a| &a.ops).unwrap_or(&NO_OPS)
    }

    pub fn local_ops(&self, id: &str) -> &BTreeSet<String> {
        self.0.get(id).map(|a| &a.local_ops).unwrap_or(&NO_OPS)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MethodId, &MethodAo)> {
        self.0.iter()
    }

    /// Every operation named in the map that the table does not define.
    pub fn dangling_ops(&self, table: &OalTable) -> BTreeSet<String> {
        self.0
            .values()
            .flat_map(|a| a.ops.iter().chain(&a.local_ops))
            .filter(|o| !table.contains(o))
            .cloned()
            .collect()
    }
}

/// Bottom-up keyword propagation over the SCC condensation of `g`.
///
/// `Keywords(f) = gathered(f) ∪ ⋃ Keywords(h)` over callees `h ∈ pms`,
/// solved per component as a least fixed point. Keywords are computed for
/// every node; operations only for PMS members.
pub fn propagate_keywords(
    g: &CallGraph,
    pms: &BTreeSet<MethodId>,
    gathered: &BTreeMap<MethodId, KeywordSet>,
    table: &OalTable,
) -> MethodAoMap {
    let n = g.len();
    let in_pms: Vec<bool> = (0..n).map(|i| pms.contains(g.node(i))).collect();
    let mut kw: Vec<KeywordSet> = (0..n)
        .map(|i| gathered.get(g.node(i)).cloned().unwrap_or_default())
        .collect();

    for comp in g.component_indices() {
        // Callees in earlier components are final.
        for &v in comp {
            let outside: Vec<usize> = g
                .successor_indices(v)
                .iter()
                .copied()
                .filter(|&w| in_pms[w] && g.component_of(w) != g.component_of(v))
                .collect();
            for w in outside {
                let add = kw[w].clone();
                kw[v].extend(add);
            }
        }
        let mut changed = true;
        while changed {
            changed = false;
            for &v in comp {
                let inside: Vec<usize> = g
                    .successor_indices(v)
                    .iter()
                    .copied()
                    .filter(|&w| in_pms[w] && w != v && g.component_of(w) == g.component_of(v))
                    .collect();
                for w in inside {
                    let before = kw[v].len();
                    let add = kw[w].clone();
                    kw[v].extend(add);
                    changed |= kw[v].len() != before;
                }
            }
        }
    }

    let map = (0..n)
        .map(|i| {
            let id = g.node(i).clone();
            let own = gathered.get(&id).cloned().unwrap_or_default();
            let (ops, local_ops) = if in_pms[i] {
                (
                    lookup_abstract_operations(&kw[i], table),
                    lookup_abstract_operations(&own, table),
                )
            } else {
                Default::default()
            };
            let ao = MethodAo {
                keywords: std::mem::take(&mut kw[i]),
                gathered: own,
                ops,
                local_ops,
            };
            (id, ao)
        })
        .collect();
    MethodAoMap(map)
}

/// Gathers keywords for every method of `c` and propagates them over `g`.
pub fn annotate(
    c: &Corpus,
    g: &CallGraph,
    pms: &BTreeSet<MethodId>,
    table: &OalTable,
) -> MethodAoMap {
    let gathered = c
        .methods()
        .map(|m| (m.id.clone(), gather_keywords(m, table)))
        .collect();
    propagate_keywords(g, pms, &gathered, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, MethodRecord, Stmt};

    fn kw(kind: KeywordKind, t: &str) -> KeywordEntry {
        KeywordEntry::new(kind, t)
    }

    fn table() -> OalTable {
        let mut ops = BTreeMap::new();
        ops.insert(
            "return_GPS".to_string(),
            Operation {
                resource: Resource::Gps,
                keywords: vec![
                    kw(KeywordKind::SdsType, "Location"),
                    kw(KeywordKind::IpcInterface, "ILocationManager"),
                ],
            },
        );
        ops.insert(
            "scan_WiFi".to_string(),
            Operation {
                resource: Resource::Wifi,
                keywords: vec![kw(KeywordKind::CommandConst, "SCAN")],
            },
        );
        ops.insert(
            "start_GPS".to_string(),
            Operation {
                resource: Resource::Gps,
                keywords: vec![
                    kw(KeywordKind::SdsType, "Location"),
                    kw(KeywordKind::HwInterface, "A"),
                ],
            },
        );
        OalTable::new(ops).unwrap()
    }

    fn method(body: Vec<Stmt>) -> MethodRecord {
        MethodRecord::new("U", "f", vec![], "void", body)
    }

    #[test]
    fn table_validation() {
        let mut ops = BTreeMap::new();
        assert_eq!(OalTable::new(ops.clone()), Err(OalError::Empty));
        ops.insert(
            "returnGPS".into(),
            Operation {
                resource: Resource::Gps,
                keywords: vec![kw(KeywordKind::SdsType, "L")],
            },
        );
        assert!(matches!(
            OalTable::new(ops.clone()),
            Err(OalError::BadName(_))
        ));
        ops.clear();
        ops.insert(
            "return_GPS".into(),
            Operation {
                resource: Resource::Gps,
                keywords: vec![],
            },
        );
        assert!(matches!(OalTable::new(ops), Err(OalError::NoKeywords(_))));
    }

    #[test]
    fn gather_by_token_class() {
        let m = method(vec![Stmt::VarDecl {
            ty: "Location".into(),
            name: "l".into(),
        }]);
        assert_eq!(
            gather_keywords(&m, &table()),
            [kw(KeywordKind::SdsType, "Location")].into_iter().collect()
        );
        let m = method(vec![Stmt::Tok("SCAN".into())]);
        assert_eq!(
            gather_keywords(&m, &table()),
            [kw(KeywordKind::CommandConst, "SCAN")]
                .into_iter()
                .collect()
        );
        // A string token never matches a type keyword, and matching is
        // case-sensitive.
        let m = method(vec![Stmt::Tok("Location".into()), Stmt::Tok("scan".into())]);
        assert!(gather_keywords(&m, &table()).is_empty());
    }

    #[test]
    fn lookup_by_any_keyword() {
        let t = table();
        let one: KeywordSet = [kw(KeywordKind::IpcInterface, "ILocationManager")]
            .into_iter()
            .collect();
        assert_eq!(
            lookup_abstract_operations(&one, &t)
                .into_iter()
                .collect::<Vec<_>>(),
            vec!["return_GPS"]
        );
        assert!(lookup_abstract_operations(&KeywordSet::new(), &t).is_empty());
        let shared: KeywordSet = [kw(KeywordKind::SdsType, "Location")].into_iter().collect();
        assert_eq!(lookup_abstract_operations(&shared, &t).len(), 2);
    }

    fn ids(names: &[&str]) -> BTreeSet<MethodId> {
        names.iter().map(|&n| MethodId::from(n)).collect()
    }

    fn run(edges: &[(&str, &str)], pms: &[&str], gathered: &[(&str, &[&str])]) -> MethodAoMap {
        let nodes: BTreeSet<MethodId> = edges
            .iter()
            .flat_map(|(a, b)| [MethodId::from(*a), MethodId::from(*b)])
            .chain(gathered.iter().map(|(n, _)| MethodId::from(*n)))
            .collect();
        let g = CallGraph::from_edges(
            nodes,
            edges
                .iter()
                .map(|(a, b)| (MethodId::from(*a), MethodId::from(*b))),
        );
        let gathered = gathered
            .iter()
            .map(|(n, ks)| {
                (
                    MethodId::from(*n),
                    ks.iter().map(|k| kw(KeywordKind::SdsType, k)).collect(),
                )
            })
            .collect();
        propagate_keywords(&g, &ids(pms), &gathered, &table())
    }

    fn texts(m: &MethodAoMap, id: &str) -> Vec<String> {
        m.get(id)
            .unwrap()
            .keywords
            .iter()
            .map(|k| k.text.clone())
            .collect()
    }

    #[test]
    fn propagates_from_sensitive_callee() {
        let m = run(
            &[("f", "g")],
            &["f", "g"],
            &[("g", &["Location"]), ("f", &[])],
        );
        assert_eq!(texts(&m, "f"), vec!["Location"]);
        assert_eq!(m.ops("f").len(), 2);
        assert!(m.local_ops("f").is_empty());
    }

    #[test]
    fn guard_blocks_non_pms_callee() {
        let m = run(&[("f", "h")], &["f"], &[("h", &["X"])]);
        assert!(texts(&m, "f").is_empty());
        // Keywords are still computed outside the PMS, but no operations.
        assert_eq!(texts(&m, "h"), vec!["X"]);
        assert!(m.ops("h").is_empty());
    }

    #[test]
    fn cycle_reaches_fixed_point() {
        let m = run(
            &[("f", "g"), ("g", "f")],
            &["f", "g"],
            &[("f", &["A"]), ("g", &["B"])],
        );
        assert_eq!(texts(&m, "f"), vec!["A", "B"]);
        assert_eq!(texts(&m, "g"), vec!["A", "B"]);
    }

    #[test]
    fn annotate_over_corpus() {
        let c = parse_corpus(&[(
            "a.mfw".into(),
            "service S [process=p, side=service, lang=java] {\n\
             Location get() { call leaf; }\n\
             Location leaf() { var Location l; return l; }\n}"
                .into(),
        )])
        .unwrap();
        let g = crate::callgraph::build_call_graph(&c);
        let m = annotate(&c, &g, &ids(&["S.get/0", "S.leaf/0"]), &table());
        assert!(m.ops("S.get/0").contains("return_GPS"));
        // The return type is a type token of both methods.
        assert!(m.local_ops("S.get/0").contains("return_GPS"));
        assert_eq!(m.dangling_ops(&table()), BTreeSet::new());
    }
}
