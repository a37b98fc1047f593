//! Brute-force reference implementations used by the acceptance suite.
//! None of them call into the algorithms they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

/// Hook counts per shipped sample UPPT, computed once on the shipped sample
/// corpus with default settings and frozen here.
pub const GOLDEN_HOOKS: [(&str, usize); 6] = [
    ("location", 3),
    ("location_onboardsensor", 6),
    ("location_payment", 6),
    ("calling", 7),
    ("payment", 9),
    ("location_wifi", 7),
];

// ---------------------------------------------------------------------------
// Dual QP by grid search

fn objective(a: &[f64], y: &[f64], k: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i] * a[j] * y[i] * y[j] * k[i][j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * s
}

/// Completes the free coordinates with the one fixed by `sum a_i y_i = 0`,
/// or `None` when it leaves `[0, c]`.
fn complete(free: &[f64], y: &[f64], c: f64) -> Option<Vec<f64>> {
    let n = y.len();
    let s: f64 = free.iter().zip(y).map(|(a, yi)| a * yi).sum();
    let last = -s * y[n - 1];
    let slack = 1e-12 * c.max(1.0);
    if last < -slack || last > c + slack {
        return None;
    }
    let mut a = free.to_vec();
    a.push(last.clamp(0.0, c));
    Some(a)
}

/// Maximizes the SVM dual over the box and the equality constraint by a
/// grid over the first `n - 1` coordinates, zoomed around the incumbent
/// until the step falls below `1e-9 * c`. Suitable for `n <= 4`.
pub fn qp_grid_oracle(k: &[Vec<f64>], y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    assert!((2..=4).contains(&n));
    let d = n - 1;
    const PTS: usize = 24;
    let mut lo = vec![0.0; d];
    let mut hi = vec![c; d];
    let mut best: Option<(Vec<f64>, f64)> = None;
    loop {
        let axes: Vec<Vec<f64>> = (0..d)
            .map(|t| {
                (0..=PTS)
                    .map(|s| lo[t] + (hi[t] - lo[t]) * s as f64 / PTS as f64)
                    .collect()
            })
            .collect();
        let mut idx = vec![0usize; d];
        'grid: loop {
            let free: Vec<f64> = (0..d).map(|t| axes[t][idx[t]]).collect();
            if let Some(a) = complete(&free, y, c) {
                let w = objective(&a, y, k);
                if best.as_ref().is_none_or(|(_, bw)| w > *bw) {
                    best = Some((a, w));
                }
            }
            let mut t = 0;
            loop {
                if t == d {
                    break 'grid;
                }
                idx[t] += 1;
                if idx[t] <= PTS {
                    break;
                }
                idx[t] = 0;
                t += 1;
            }
        }
        let step = (0..d)
            .map(|t| (hi[t] - lo[t]) / PTS as f64)
            .fold(0.0, f64::max);
        if step < 1e-9 * c {
            break;
        }
        let (a, _) = best.as_ref().expect("the zero vector is feasible");
        for t in 0..d {
            let w = 3.0 * (hi[t] - lo[t]) / PTS as f64;
            lo[t] = (a[t] - w).max(0.0);
            hi[t] = (a[t] + w).min(c);
        }
    }
    best.expect("the zero vector is feasible")
}

/// Bias from the KKT conditions: mean over margin vectors, else the
/// midpoint of the interval the bound vectors leave open.
pub fn oracle_bias(a: &[f64], y: &[f64], k: &[Vec<f64>], c: f64) -> f64 {
    let n = a.len();
    let eps = 1e-6 * c;
    let wx = |i: usize| -> f64 { (0..n).map(|j| a[j] * y[j] * k[j][i]).sum() };
    let margin: Vec<f64> = (0..n)
        .filter(|&i| a[i] > eps && a[i] < c - eps)
        .map(|i| y[i] - wx(i))
        .collect();
    if !margin.is_empty() {
        return margin.iter().sum::<f64>() / margin.len() as f64;
    }
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let b = y[i] - wx(i);
        // y f >= 1 at zero, y f <= 1 at C.
        let wants_at_least = (a[i] <= eps) == (y[i] > 0.0);
        if wants_at_least {
            lo = lo.max(b);
        } else {
            hi = hi.min(b);
        }
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (lo + hi) / 2.0,
        (true, false) => lo,
        (false, true) => hi,
        _ => 0.0,
    }
}

pub fn oracle_decision(a: &[f64], y: &[f64], b: f64, kx: &[f64]) -> f64 {
    a.iter()
        .zip(y)
        .zip(kx)
        .map(|((ai, yi), ki)| ai * yi * ki)
        .sum::<f64>()
        + b
}

// ---------------------------------------------------------------------------
// Graphs as adjacency lists over 0..n

pub type Adj = Vec<BTreeSet<usize>>;

pub fn reach(adj: &Adj, from: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<usize> = adj[from].iter().copied().collect();
    while let Some(v) = stack.pop() {
        if seen.insert(v) {
            stack.extend(adj[v].iter().copied());
        }
    }
    seen
}

/// `keywords(f) = gathered(f) ∪ gathered(g)` for every `g` reachable from
/// `f` along a path whose nodes after `f` all lie in `pms`.
pub fn closure_keywords<K: Clone + Ord>(
    adj: &Adj,
    pms: &[bool],
    gathered: &[BTreeSet<K>],
) -> Vec<BTreeSet<K>> {
    let n = adj.len();
    (0..n)
        .map(|f| {
            let mut out = gathered[f].clone();
            let mut seen = BTreeSet::new();
            let mut stack: Vec<usize> = adj[f].iter().copied().filter(|&g| pms[g]).collect();
            while let Some(g) = stack.pop() {
                if !seen.insert(g) {
                    continue;
                }
                out.extend(gathered[g].iter().cloned());
                stack.extend(adj[g].iter().copied().filter(|&h| pms[h]));
            }
            out
        })
        .collect()
}

/// Strongly connected components by mutual reachability, each sorted, in
/// order of their smallest member.
pub fn sccs(adj: &Adj) -> Vec<Vec<usize>> {
    let n = adj.len();
    let r: Vec<BTreeSet<usize>> = (0..n).map(|v| reach(adj, v)).collect();
    let mut comp_of = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        if comp_of[v] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (0..n)
            .filter(|&w| w == v || (r[v].contains(&w) && r[w].contains(&v)))
            .collect();
        for &w in &members {
            comp_of[w] = comps.len();
        }
        comps.push(members);
    }
    comps
}

/// Every source-to-sink path of the condensation, flattened with each
/// component's members in the order given by `rank`.
pub fn chains(adj: &Adj, rank: impl Fn(usize) -> String) -> Vec<Vec<usize>> {
    let comps = sccs(adj);
    let cid: BTreeMap<usize, usize> = comps
        .iter()
        .enumerate()
        .flat_map(|(c, m)| m.iter().map(move |&v| (v, c)))
        .collect();
    let m = comps.len();
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    let mut pred = vec![false; m];
    for (v, outs) in adj.iter().enumerate() {
        for &w in outs {
            if cid[&v] != cid[&w] {
                succ[cid[&v]].insert(cid[&w]);
                pred[cid[&w]] = true;
            }
        }
    }
    let mut paths = Vec::new();
    let mut stack: Vec<Vec<usize>> = (0..m).filter(|&c| !pred[c]).map(|c| vec![c]).collect();
    while let Some(p) = stack.pop() {
        let last = *p.last().unwrap();
        if succ[last].is_empty() {
            paths.push(p);
        } else {
            for &t in &succ[last] {
                let mut q = p.clone();
                q.push(t);
                stack.push(q);
            }
        }
    }
    paths
        .into_iter()
        .map(|p| {
            p.into_iter()
                .flat_map(|c| {
                    let mut mem = comps[c].clone();
                    mem.sort_by_key(|&v| rank(v));
                    mem
                })
                .collect()
        })
        .collect()
}

/// Per (chain, op), the deepest node that performs the op locally and is
/// service-side.
pub fn deepest_picks(
    chains: &[Vec<usize>],
    local: &[BTreeSet<String>],
    app: &[bool],
    relevant: &BTreeSet<String>,
) -> BTreeMap<(usize, String), usize> {
    let mut out = BTreeMap::new();
    for (ci, ch) in chains.iter().enumerate() {
        for op in relevant {
            if let Some(&v) = ch.iter().rev().find(|&&v| !app[v] && local[v].contains(op)) {
                out.insert((ci, op.clone()), v);
            }
        }
    }
    out
}

/// True when every (chain, op) that has a service-side local performer is
/// guarded at its deepest such performer.
pub fn covered(
    picks: &BTreeMap<(usize, String), usize>,
    marks: &BTreeMap<usize, BTreeSet<String>>,
) -> bool {
    picks
        .iter()
        .all(|((_, op), v)| marks.get(v).is_some_and(|ops| ops.contains(op)))
}
