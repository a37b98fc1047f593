//! Static call graph over a [`Corpus`] and its strongly connected component
//! condensation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, MethodId};

/// Directed call graph. Nodes are kept sorted by id; components are stored
/// in reverse topological order of the condensation, so every component
/// appears after all components it can reach.
#[derive(Debug, Clone, PartialEq)]
pub struct CallGraph {
    nodes: Vec<MethodId>,
    index: HashMap<MethodId, usize>,
    succ: Vec<BTreeSet<usize>>,
    pred: Vec<BTreeSet<usize>>,
    comp_of: Vec<usize>,
    components: Vec<Vec<usize>>,
}

/// Serialized view of a [`CallGraph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallGraphDoc {
    pub nodes: Vec<MethodId>,
    pub edges: Vec<(MethodId, MethodId)>,
    pub components: Vec<Vec<MethodId>>,
}

/// Builds the graph of `c`, resolving each call statement by name.
pub fn build_call_graph(c: &Corpus) -> CallGraph {
    let nodes = c.method_ids();
    let mut edges = Vec::new();
    for m in c.methods() {
        for t in &m.callees {
            for callee in c.resolve(t) {
                edges.push((m.id.clone(), callee.clone()));
            }
        }
    }
    CallGraph::from_edges(nodes, edges)
}

impl CallGraph {
    /// Panics if an edge names a node not in `nodes`.
    pub fn from_edges(
        nodes: impl IntoIterator<Item = MethodId>,
        edges: impl IntoIterator<Item = (MethodId, MethodId)>,
    ) -> Self {
        let nodes: Vec<MethodId> = nodes
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<MethodId, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut succ = vec![BTreeSet::new(); nodes.len()];
        let mut pred = vec![BTreeSet::new(); nodes.len()];
        for (a, b) in edges {
            let (ia, ib) = (index[&a], index[&b]);
            succ[ia].insert(ib);
            pred[ib].insert(ia);
        }
        let components = tarjan(&succ);
        let mut comp_of = vec![0; nodes.len()];
        for (ci, members) in components.iter().enumerate() {
            for &v in members {
                comp_of[v] = ci;
            }
        }
        CallGraph {
            nodes,
            index,
            succ,
            pred,
            comp_of,
            components,
        }
    }

    pub fn nodes(&self) -> &[MethodId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Dense index of a node; ids sort in index order.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node(&self, i: usize) -> &MethodId {
        &self.nodes[i]
    }

    pub fn successor_indices(&self, i: usize) -> &BTreeSet<usize> {
        &self.succ[i]
    }

    pub fn predecessor_indices(&self, i: usize) -> &BTreeSet<usize> {
        &self.pred[i]
    }

    pub fn successors(&self, id: &str) -> Vec<&MethodId> {
        self.index_of(id)
            .map(|i| self.succ[i].iter().map(|&j| &self.nodes[j]).collect())
            .unwrap_or_default()
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.index_of(from), self.index_of(to)) {
            (Some(a), Some(b)) => self.succ[a].contains(&b),
            _ => false,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(BTreeSet::len).sum()
    }

    /// All edges, sorted.
    pub fn edges(&self) -> Vec<(MethodId, MethodId)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (a, ss) in self.succ.iter().enumerate() {
            for &b in ss {
                out.push((self.nodes[a].clone(), self.nodes[b].clone()));
            }
        }
        out
    }

    /// Components as node indices, members ascending, in reverse
    /// topological order.
    pub fn component_indices(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_of(&self, i: usize) -> usize {
        self.comp_of[i]
    }

    /// Components as ids, in reverse topological order.
    pub fn components(&self) -> Vec<Vec<MethodId>> {
        self.components
            .iter()
            .map(|c| c.iter().map(|&i| self.nodes[i].clone()).collect())
            .collect()
    }

    /// Successor components of component `ci` in the condensation.
    pub fn condensed_successors(&self, ci: usize) -> BTreeSet<usize> {
        self.components[ci]
            .iter()
            .flat_map(|&v| self.succ[v].iter().map(|&w| self.comp_of[w]))
            .filter(|&cj| cj != ci)
            .collect()
    }

    /// Methods with no caller other than themselves.
    pub fn entry_points(&self) -> Vec<MethodId> {
        (0..self.nodes.len())
            .filter(|&i| self.pred[i].iter().all(|&p| p == i))
            .map(|i| self.nodes[i].clone())
            .collect()
    }

    /// Every node reachable from `sources`, sources included.
    pub fn reachable_from<'a>(
        &self,
        sources: impl IntoIterator<Item = &'a MethodId>,
    ) -> BTreeSet<MethodId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = sources
            .into_iter()
            .filter_map(|s| self.index_of(s.as_str()))
            .collect();
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend(self.succ[v].iter().copied().filter(|&w| !seen[w]));
        }
        (0..self.nodes.len())
            .filter(|&i| seen[i])
            .map(|i| self.nodes[i].clone())
            .collect()
    }

    /// Subgraph on `keep` with exactly the edges whose endpoints both
    /// survive. Ids absent from the graph are ignored.
    pub fn induced(&self, keep: &BTreeSet<MethodId>) -> CallGraph {
        let nodes: Vec<MethodId> = keep
            .iter()
            .filter(|k| self.contains(k.as_str()))
            .cloned()
            .collect();
        let edges = self
            .edges()
            .into_iter()
            .filter(|(a, b)| keep.contains(a) && keep.contains(b));
        CallGraph::from_edges(nodes, edges)
    }

    pub fn to_doc(&self) -> CallGraphDoc {
        CallGraphDoc {
            nodes: self.nodes.clone(),
            edges: self.edges(),
            components: self.components(),
        }
    }

    /// Adjacency as an id map, for diagnostics and tests.
    pub fn adjacency(&self) -> BTreeMap<MethodId, Vec<MethodId>> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                (
                    n.clone(),
                    self.succ[i]
                        .iter()
                        .map(|&j| self.nodes[j].clone())
                        .collect(),
                )
            })
            .collect()
    }
}

/// Iterative Tarjan. Emits components in reverse topological order with
/// members sorted ascending.
fn tarjan(succ: &[BTreeSet<usize>]) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = succ.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0;
    let adj: Vec<Vec<usize>> = succ.iter().map(|s| s.iter().copied().collect()).collect();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = work.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}
