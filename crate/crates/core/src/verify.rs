//! Checks for the three placement mistakes: bypassed hooks, hooks running
//! in an app process, and hooks that protect nothing.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::callgraph::build_call_graph;
use crate::corpus::{Corpus, MethodId, Side, Stmt};
use crate::fingerprint;
use crate::instrument::detect_existing_hooks;
use crate::mapping::Layer1Map;
use crate::oal::{MethodAoMap, OalTable};
use crate::policy::{check_policy, PolicyDecision};
use crate::selector::HookPlan;
use crate::simulate::{simulate, EntryCall, Scenario, SimEnv, SimError, TraceEvent};
use crate::uppt::{extract_resource_control_words, Clock, Context, Control, Status, Uppt};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BypassViolation {
    pub scenario: usize,
    pub call: usize,
    pub entry: MethodId,
    pub method: MethodId,
    pub op: String,
    pub required: PolicyDecision,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UselessHook {
    pub method_id: MethodId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IsolationViolation {
    pub method_id: MethodId,
    pub unit: String,
    pub process: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub bypass: Vec<BypassViolation>,
    pub useless: Vec<UselessHook>,
    pub isolation: Vec<IsolationViolation>,
    pub scenarios: usize,
    pub trace_digest: String,
}

impl Report {
    pub fn is_clean(&self) -> bool {
        self.bypass.is_empty() && self.useless.is_empty() && self.isolation.is_empty()
    }
}

/// Decision a context demands before `op` may run, if it is protected at
/// all: a `DISALLOW` resource protects its disable operations, an
/// `OBFUSCATE` resource its obfuscate operations.
fn required_decision(
    op: &str,
    u: &Uppt,
    ctx: &Context,
    l1: &Layer1Map,
    oal: &OalTable,
) -> Option<PolicyDecision> {
    let r = oal.resource_of(op)?;
    let d = check_policy(u, r, ctx);
    let control = match d {
        PolicyDecision::Disallow => Control::Disable,
        PolicyDecision::Obfuscate => Control::Obfuscate,
        PolicyDecision::Allow => return None,
    };
    l1.ops_for(r, control).contains(op).then_some(d)
}

/// Service-side operations that ran without an adequate hook decision in
/// an activation that was still live.
pub fn check_bypass(
    scenario: usize,
    s: &Scenario,
    trace: &[TraceEvent],
    u: &Uppt,
    c: &Corpus,
    l1: &Layer1Map,
    oal: &OalTable,
) -> Vec<BypassViolation> {
    let mut fired: HashMap<(usize, u64), Vec<(crate::uppt::Resource, PolicyDecision)>> =
        HashMap::new();
    let mut out = Vec::new();
    for e in trace {
        match e {
            TraceEvent::HookFired {
                call,
                frame,
                resource,
                decision,
                ..
            } => fired
                .entry((*call, *frame))
                .or_default()
                .push((*resource, *decision)),
            TraceEvent::OpExecuted {
                call,
                stack,
                method,
                op,
                ..
            } => {
                if c.side_of(method.as_str()) != Some(Side::Service) {
                    continue;
                }
                let Some(required) = required_decision(op, u, &s.context, l1, oal) else {
                    continue;
                };
                let r = oal
                    .resource_of(op)
                    .expect("required_decision checked the op");
                let guarded = stack.iter().any(|f| {
                    fired
                        .get(&(*call, *f))
                        .is_some_and(|hs| hs.iter().any(|&(hr, d)| hr == r && d >= required))
                });
                if !guarded {
                    out.push(BypassViolation {
                        scenario,
                        call: *call,
                        entry: s.calls[*call].entry.clone(),
                        method: method.clone(),
                        op: op.clone(),
                        required,
                    });
                }
            }
            TraceEvent::DataReturned { .. } => {}
        }
    }
    out
}

/// Hooks guarding nothing the table asks for, hooks in methods no entry
/// point reaches, and hooks present in the corpus but absent from the plan.
pub fn check_useless(c: &Corpus, plan: &HookPlan, u: &Uppt, l1: &Layer1Map) -> Vec<UselessHook> {
    let words = extract_resource_control_words(u);
    let wanted: BTreeSet<String> = words
        .iter()
        .filter_map(|w| l1.get(w))
        .flat_map(|ops| ops.iter().cloned())
        .collect();
    let g = build_call_graph(c);
    let reachable = g.reachable_from(g.entry_points().iter());
    let mut out = Vec::new();
    for e in &plan.entries {
        if e.guarded_ops.is_disjoint(&wanted) {
            out.push(UselessHook {
                method_id: e.method_id.clone(),
                reason: "guards no operation the preference table asks to protect".into(),
            });
        } else if !reachable.contains(&e.method_id) {
            out.push(UselessHook {
                method_id: e.method_id.clone(),
                reason: "unreachable from every entry point".into(),
            });
        }
    }
    let planned: BTreeSet<&MethodId> = plan.entries.iter().map(|e| &e.method_id).collect();
    let mut stray: BTreeSet<MethodId> = BTreeSet::new();
    for (m, _) in detect_existing_hooks(c) {
        if !planned.contains(&m) {
            stray.insert(m);
        }
    }
    out.extend(stray.into_iter().map(|m| UselessHook {
        method_id: m,
        reason: "hookcheck not backed by any plan entry".into(),
    }));
    out
}

/// Plan entries whose method lives on the app side.
pub fn check_isolation(plan: &HookPlan, c: &Corpus) -> Vec<IsolationViolation> {
    plan.entries
        .iter()
        .filter_map(|e| {
            let u = c.unit_of(e.method_id.as_str())?;
            (u.side == Side::App).then(|| IsolationViolation {
                method_id: e.method_id.clone(),
                unit: u.name.clone(),
                process: u.process.clone(),
            })
        })
        .collect()
}

/// One scenario per non-allow row: a context satisfying the row and a call
/// to every method of the corpus.
pub fn adversarial_suite(c: &Corpus, u: &Uppt) -> Vec<Scenario> {
    let calls: Vec<EntryCall> = c
        .method_ids()
        .into_iter()
        .map(|entry| EntryCall {
            entry,
            args: vec![],
        })
        .collect();
    u.rows()
        .iter()
        .filter(|r| r.control != Control::Allow)
        .map(|r| Scenario {
            context: r.context.witness(),
            calls: calls.clone(),
        })
        .collect()
}

/// Seeded random scenarios mixing contexts drawn from the table with
/// unrelated ones.
pub fn fuzz_scenarios(c: &Corpus, u: &Uppt, n: usize, seed: u64) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = c.method_ids();
    let mut locations: Vec<String> = u.locations().into_iter().collect();
    locations.push("Elsewhere".into());
    let mut apps = BTreeSet::new();
    let mut categories = BTreeSet::new();
    let mut clocks = Vec::new();
    for r in u.rows() {
        if let Some(s) = &r.context.status {
            apps.extend(s.foreground_app.iter().cloned());
            apps.extend(s.back_stack.iter().flatten().cloned());
            categories.extend(s.category.iter().cloned());
        }
        if let Some(w) = r.context.time {
            clocks.push(w.start);
            clocks.push(
                Clock::from_minutes((w.start.minutes() + w.end.minutes()) / 2)
                    .expect("midpoint is a time"),
            );
        }
    }
    let mut apps: Vec<String> = apps.into_iter().filter(|a| a != "*").collect();
    apps.push("other_app".into());
    let mut categories: Vec<String> = categories.into_iter().filter(|a| a != "*").collect();
    categories.push("other".into());

    (0..n)
        .map(|_| {
            let clock = if !clocks.is_empty() && rng.gen_bool(0.5) {
                *clocks.choose(&mut rng).expect("non-empty")
            } else {
                Clock::from_minutes(rng.gen_range(0..24 * 60)).expect("in range")
            };
            let back_stack: Vec<String> =
                apps.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect();
            let context = Context {
                clock,
                location: locations.choose(&mut rng).expect("non-empty").clone(),
                status: Status {
                    foreground_app: apps.choose(&mut rng).expect("non-empty").clone(),
                    category: categories.choose(&mut rng).expect("non-empty").clone(),
                    back_stack,
                },
            };
            let k = if ids.is_empty() {
                0
            } else {
                rng.gen_range(1..=8)
            };
            let calls = (0..k)
                .map(|_| EntryCall {
                    entry: ids.choose(&mut rng).expect("non-empty").clone(),
                    args: vec![format!("arg{}", rng.gen_range(0..100))],
                })
                .collect();
            Scenario { context, calls }
        })
        .collect()
}

/// Everything [`verify`] needs besides the scenarios.
pub struct VerifyInputs<'a> {
    pub corpus: &'a Corpus,
    pub plan: &'a HookPlan,
    pub uppt: &'a Uppt,
    pub aomap: &'a MethodAoMap,
    pub oal: &'a OalTable,
    pub layer1: &'a Layer1Map,
    pub seed: u64,
}

/// Simulates every scenario and runs all three checks.
pub fn verify(inp: &VerifyInputs<'_>, scenarios: &[Scenario]) -> Result<Report, SimError> {
    let env = SimEnv {
        aomap: inp.aomap,
        oal: inp.oal,
        seed: inp.seed,
    };
    let mut report = Report {
        scenarios: scenarios.len(),
        ..Default::default()
    };
    let mut traces = Vec::with_capacity(scenarios.len());
    for (i, s) in scenarios.iter().enumerate() {
        let trace = simulate(inp.corpus, inp.uppt, s, &env)?;
        report.bypass.extend(check_bypass(
            i, s, &trace, inp.uppt, inp.corpus, inp.layer1, inp.oal,
        ));
        traces.push(trace);
    }
    report.useless = check_useless(inp.corpus, inp.plan, inp.uppt, inp.layer1);
    report.isolation = check_isolation(inp.plan, inp.corpus);
    report.trace_digest = fingerprint::of_json(&traces);
    Ok(report)
}

/// True when `c` has a hook at body index 0 of `id`.
pub fn hooked_first(c: &Corpus, id: &str) -> bool {
    c.method(id)
        .and_then(|m| m.body.first())
        .is_some_and(|s| matches!(s, Stmt::HookCheck { .. }))
}
