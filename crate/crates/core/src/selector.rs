//! Hook selection: sub call-graph over #TM, call chains, and pick-and-remove
//! of the deepest performer of each operation on each chain.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::callgraph::CallGraph;
use crate::corpus::{Corpus, MethodId, Side, Stmt};
use crate::fingerprint;
use crate::mapping::{resolve_methods, Layer1Map, MappingError};
use crate::oal::{MethodAoMap, OalTable};
use crate::uppt::{extract_resource_control_words, word, Control, Resource, Uppt};

pub const DEFAULT_CHAIN_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectError {
    #[error("more than {cap} call chains; narrow the preference table to shrink #TM")]
    TooManyChains { cap: usize },
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HookEntry {
    pub method_id: MethodId,
    pub guarded_ops: BTreeSet<String>,
    pub resources: BTreeSet<Resource>,
    pub controls: BTreeSet<Control>,
    pub sds_var: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HookPlan {
    pub uppt_fingerprint: String,
    pub corpus_fingerprint: String,
    pub entries: Vec<HookEntry>,
    pub warnings: Vec<String>,
}

impl HookPlan {
    pub fn fingerprint(&self) -> String {
        fingerprint::of_json(self)
    }

    pub fn entry(&self, id: &str) -> Option<&HookEntry> {
        self.entries.iter().find(|e| e.method_id.as_str() == id)
    }

    /// The plan with entry `i` removed.
    pub fn without_entry(&self, i: usize) -> HookPlan {
        let mut p = self.clone();
        p.entries.remove(i);
        p
    }
}

/// Structural fingerprint of a corpus; source positions do not count.
pub fn corpus_fingerprint(c: &Corpus) -> String {
    fingerprint::of_json(&c.without_positions())
}

/// Nodes in `tm`, edges of `g` with both endpoints in `tm`.
pub fn induced_subgraph(g: &CallGraph, tm: &BTreeSet<MethodId>) -> CallGraph {
    g.induced(tm)
}

/// Like [`induced_subgraph`], but also keeps every node lying on a path
/// between two members of `tm`.
pub fn closure_subgraph(g: &CallGraph, tm: &BTreeSet<MethodId>) -> CallGraph {
    let down = g.reachable_from(tm.iter());
    let mut keep = BTreeSet::new();
    for v in &down {
        if tm.contains(v) {
            keep.insert(v.clone());
            continue;
        }
        let below = g.reachable_from([v]);
        if below.iter().any(|w| w != v && tm.contains(w)) {
            keep.insert(v.clone());
        }
    }
    g.induced(&keep)
}

/// Maximal paths through the SCC condensation, from components without
/// predecessors to components without successors. Each component
/// contributes its members in id order.
pub fn enumerate_chains(sub: &CallGraph, cap: usize) -> Result<Vec<Vec<MethodId>>, SelectError> {
    let comps = sub.component_indices();
    let succ: Vec<BTreeSet<usize>> = (0..comps.len())
        .map(|c| sub.condensed_successors(c))
        .collect();
    let mut has_pred = vec![false; comps.len()];
    for ss in &succ {
        for &t in ss {
            has_pred[t] = true;
        }
    }
    // Start from sources in id order of their first member.
    let mut sources: Vec<usize> = (0..comps.len()).filter(|&c| !has_pred[c]).collect();
    sources.sort_by_key(|&c| comps[c][0]);

    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut path = Vec::new();
    fn walk(
        c: usize,
        succ: &[BTreeSet<usize>],
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        cap: usize,
    ) -> Result<(), SelectError> {
        path.push(c);
        if succ[c].is_empty() {
            if out.len() == cap {
                return Err(SelectError::TooManyChains { cap });
            }
            out.push(path.clone());
        } else {
            for &t in &succ[c] {
                walk(t, succ, path, out, cap)?;
            }
        }
        path.pop();
        Ok(())
    }
    for s in sources {
        walk(s, &succ, &mut path, &mut out, cap)?;
    }
    let mut chains: Vec<Vec<MethodId>> = out
        .into_iter()
        .map(|p| {
            p.into_iter()
                .flat_map(|c| comps[c].iter().map(|&v| sub.node(v).clone()))
                .collect()
        })
        .collect();
    chains.sort();
    Ok(chains)
}

/// Outcome of pick-and-remove: the operations each kept method was marked
/// for.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Picks {
    pub marks: BTreeMap<MethodId, BTreeSet<String>>,
    pub warnings: Vec<String>,
}

/// For each chain and relevant operation, marks the deepest service-side
/// method performing it locally. App-side performers are skipped with a
/// warning.
///
/// A method's propagated operations can stem from a callee on a different
/// chain, so only local operations count as performing on this chain.
pub fn pick_and_remove(
    chains: &[Vec<MethodId>],
    aomap: &MethodAoMap,
    relevant_ops: &BTreeSet<String>,
    side_of: impl Fn(&str) -> Side,
) -> Picks {
    let mut picks = Picks::default();
    let mut warned = BTreeSet::new();
    for chain in chains {
        for op in relevant_ops {
            let mut skipped_app = false;
            let mut marked = false;
            for m in chain.iter().rev() {
                if !aomap.local_ops(m.as_str()).contains(op) {
                    continue;
                }
                if side_of(m.as_str()) == Side::App {
                    if warned.insert(("app", m.clone(), op.clone())) {
                        picks
                            .warnings
                            .push(format!("skipping app-side method {m} for `{op}`; hooks must run in a service process"));
                    }
                    skipped_app = true;
                    continue;
                }
                picks.marks.entry(m.clone()).or_default().insert(op.clone());
                marked = true;
                break;
            }
            if skipped_app && !marked && warned.insert(("cover", chain[0].clone(), op.clone())) {
                picks.warnings.push(format!(
                    "`{op}` has no service-side performer on the chain starting at {}",
                    chain[0]
                ));
            }
        }
    }
    picks
}

/// First local variable whose type is an `sds_type` keyword of one of
/// `ops`.
pub fn pick_sds_var(
    c: &Corpus,
    id: &str,
    ops: &BTreeSet<String>,
    oal: &OalTable,
) -> Option<String> {
    let types = oal.sds_types(ops);
    c.method(id)?.body.iter().find_map(|s| match s {
        Stmt::VarDecl { ty, name } if types.contains(ty) => Some(name.clone()),
        _ => None,
    })
}

/// Inputs of [`plan_hooks`].
pub struct SelectInputs<'a> {
    pub corpus: &'a Corpus,
    pub graph: &'a CallGraph,
    pub aomap: &'a MethodAoMap,
    pub oal: &'a OalTable,
    pub layer1: &'a Layer1Map,
    pub uppt: &'a Uppt,
    /// Use [`closure_subgraph`] instead of [`induced_subgraph`].
    pub closure: bool,
    pub chain_cap: usize,
}

/// The whole selection stage: words, #TM, sub-graph, chains, picks, plan.
pub fn plan_hooks(inp: &SelectInputs<'_>) -> Result<HookPlan, SelectError> {
    let words = extract_resource_control_words(inp.uppt);
    let sel = resolve_methods(&words, inp.layer1, inp.aomap)?;
    let relevant = inp.layer1.relevant_ops(&words)?;
    let sub = if inp.closure {
        closure_subgraph(inp.graph, &sel.tm)
    } else {
        induced_subgraph(inp.graph, &sel.tm)
    };
    let chains = enumerate_chains(&sub, inp.chain_cap)?;
    let picks = pick_and_remove(&chains, inp.aomap, &relevant, |id| {
        inp.corpus.side_of(id).unwrap_or(Side::Service)
    });

    let entries = picks
        .marks
        .into_iter()
        .map(|(id, ops)| {
            let resources: BTreeSet<Resource> =
                ops.iter().filter_map(|o| inp.oal.resource_of(o)).collect();
            let mut controls = BTreeSet::new();
            for op in &ops {
                let Some(r) = inp.oal.resource_of(op) else {
                    continue;
                };
                for c in [Control::Disable, Control::Obfuscate] {
                    if words.contains(&word(r, c)) && inp.layer1.ops_for(r, c).contains(op) {
                        controls.insert(c);
                    }
                }
            }
            let sds_var = pick_sds_var(inp.corpus, id.as_str(), &ops, inp.oal);
            HookEntry {
                method_id: id,
                guarded_ops: ops,
                resources,
                controls,
                sds_var,
            }
        })
        .collect();

    let mut warnings = sel.warnings;
    warnings.extend(picks.warnings);
    Ok(HookPlan {
        uppt_fingerprint: inp.uppt.fingerprint(),
        corpus_fingerprint: corpus_fingerprint(inp.corpus),
        entries,
        warnings,
    })
}
