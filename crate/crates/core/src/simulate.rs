//! Scenario simulator: executes entry calls depth-first over a corpus and
//! records hook decisions, performed operations and returned data.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, MethodId, ReturnValue, Stmt};
use crate::oal::{KeywordKind, MethodAoMap, OalTable};
use crate::policy::{check_policy, obfuscate, Datum, PolicyDecision, ValueClass};
use crate::uppt::{Context, Control, Resource, Uppt};

pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("scenario calls unknown entry method {0}")]
    UnknownEntry(MethodId),
    #[error("hookcheck in {method} names unknown resource `{word}`")]
    BadHook { method: MethodId, word: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryCall {
    pub entry: MethodId,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub context: Context,
    pub calls: Vec<EntryCall>,
}

/// One observable step. `call` indexes the scenario's entry calls; `frame`
/// identifies the method activation that emitted the event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    HookFired {
        call: usize,
        frame: u64,
        method: MethodId,
        resource: Resource,
        decision: PolicyDecision,
    },
    OpExecuted {
        call: usize,
        frame: u64,
        /// Activations live when the operation completed, outermost first.
        stack: Vec<u64>,
        method: MethodId,
        op: String,
    },
    DataReturned {
        call: usize,
        frame: u64,
        method: MethodId,
        resource: Resource,
        value_class: ValueClass,
        value: String,
    },
}

/// Static inputs of a simulation.
pub struct SimEnv<'a> {
    pub aomap: &'a MethodAoMap,
    pub oal: &'a OalTable,
    pub seed: u64,
}

impl SimEnv<'_> {
    /// Resource of the first operation listing `ty` as an `sds_type`.
    fn sds_resource(&self, ty: &str) -> Option<Resource> {
        self.oal
            .operations()
            .values()
            .find(|op| {
                op.keywords
                    .iter()
                    .any(|k| k.kind == KeywordKind::SdsType && k.text == ty)
            })
            .map(|op| op.resource)
    }
}

struct Run<'a> {
    c: &'a Corpus,
    u: &'a Uppt,
    ctx: &'a Context,
    env: &'a SimEnv<'a>,
    call: usize,
    next_frame: u64,
    stack: Vec<u64>,
    active: HashSet<MethodId>,
    events: Vec<TraceEvent>,
}

impl Run<'_> {
    fn data_var(&self, m: &crate::corpus::MethodRecord, var: &str) -> Option<Resource> {
        m.type_of(var).and_then(|ty| self.env.sds_resource(ty))
    }

    /// The SDS variable the method returns, if any.
    fn returned_sds(&self, m: &crate::corpus::MethodRecord) -> Option<Resource> {
        m.body.iter().find_map(|s| match s {
            Stmt::Return(ReturnValue::Var(v)) => self.data_var(m, v),
            _ => None,
        })
    }

    fn exec(&mut self, id: &MethodId, obfuscating: bool) -> Result<(), SimError> {
        if self.stack.len() >= MAX_DEPTH || self.active.contains(id) {
            return Ok(());
        }
        let Some(m) = self.c.method(id.as_str()) else {
            return Ok(());
        };
        let frame = self.next_frame;
        self.next_frame += 1;
        self.stack.push(frame);
        self.active.insert(id.clone());
        let mut obf = obfuscating;
        let mut ret: Option<Resource> = None;

        for s in &m.body {
            match s {
                Stmt::HookCheck {
                    resources,
                    controls,
                    sds_var,
                } => {
                    let can_obfuscate = sds_var.is_some()
                        && controls
                            .split('|')
                            .any(|c| c == Control::Obfuscate.as_str());
                    let mut worst = PolicyDecision::Allow;
                    for w in resources.split('|') {
                        let r: Resource = w.parse().map_err(|_| SimError::BadHook {
                            method: id.clone(),
                            word: w.to_string(),
                        })?;
                        let mut d = check_policy(self.u, r, self.ctx);
                        if d == PolicyDecision::Obfuscate && !can_obfuscate {
                            d = PolicyDecision::Disallow;
                        }
                        self.events.push(TraceEvent::HookFired {
                            call: self.call,
                            frame,
                            method: id.clone(),
                            resource: r,
                            decision: d,
                        });
                        worst = worst.max(d);
                    }
                    match worst {
                        PolicyDecision::Disallow => {
                            if let Some(resource) = self.returned_sds(m) {
                                self.events.push(TraceEvent::DataReturned {
                                    call: self.call,
                                    frame,
                                    method: id.clone(),
                                    resource,
                                    value_class: ValueClass::Denied,
                                    value: String::new(),
                                });
                            }
                            self.stack.pop();
                            self.active.remove(id);
                            return Ok(());
                        }
                        PolicyDecision::Obfuscate => obf = true,
                        PolicyDecision::Allow => {}
                    }
                }
                Stmt::Call(t) => {
                    for callee in self.c.resolve(t) {
                        self.exec(callee, obf)?;
                    }
                }
                Stmt::Return(ReturnValue::Var(v)) => {
                    ret = self.data_var(m, v);
                    break;
                }
                Stmt::Return(_) => break,
                Stmt::VarDecl { .. } | Stmt::Tok(_) => {}
            }
        }

        for op in self.env.aomap.local_ops(id.as_str()) {
            self.events.push(TraceEvent::OpExecuted {
                call: self.call,
                frame,
                stack: self.stack.clone(),
                method: id.clone(),
                op: op.clone(),
            });
        }
        if let Some(resource) = ret {
            let real = Datum::real(format!("{resource}@{id}"));
            let d = if obf {
                obfuscate(&real, self.env.seed)
            } else {
                real
            };
            self.events.push(TraceEvent::DataReturned {
                call: self.call,
                frame,
                method: id.clone(),
                resource,
                value_class: d.class,
                value: d.value,
            });
        }
        self.stack.pop();
        self.active.remove(id);
        Ok(())
    }
}

/// Runs every entry call of `s` in order, each from an empty stack.
pub fn simulate(
    c: &Corpus,
    u: &Uppt,
    s: &Scenario,
    env: &SimEnv<'_>,
) -> Result<Vec<TraceEvent>, SimError> {
    if let Some(bad) = s.calls.iter().find(|call| !c.contains(call.entry.as_str())) {
        return Err(SimError::UnknownEntry(bad.entry.clone()));
    }
    let mut run = Run {
        c,
        u,
        ctx: &s.context,
        env,
        call: 0,
        next_frame: 0,
        stack: Vec::new(),
        active: HashSet::new(),
        events: Vec::new(),
    };
    for (i, call) in s.calls.iter().enumerate() {
        run.call = i;
        run.exec(&call.entry, false)?;
    }
    Ok(run.events)
}

/// Count of events per kind, for summaries.
pub fn event_counts(trace: &[TraceEvent]) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for e in trace {
        let k = match e {
            TraceEvent::HookFired { .. } => "hook_fired",
            TraceEvent::OpExecuted { .. } => "op_executed",
            TraceEvent::DataReturned { .. } => "data_returned",
        };
        *out.entry(k).or_default() += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callgraph::build_call_graph;
    use crate::corpus::parse_corpus;
    use crate::oal::{annotate, KeywordEntry, Operation};
    use crate::uppt::parse_uppt;
    use std::collections::BTreeSet;

    const CORPUS: &str =
        "service LocationManagerService [process=system_server, side=service, lang=java] {\n\
        Parcel getLastLocation(String provider) { call GpsProvider.read; return; }\n\
        void loop() { call again; }\n\
        void again() { call loop; }\n\
    }\n\
    service GpsProvider [process=system_server, side=service, lang=java] {\n\
        Fix read() { HOOK var Location loc; return loc; }\n\
    }\n";

    const UPPT: &str = r#"{"rows":[
        {"context":{"location":"HotelX"},"resource":"gps","control":"disable"},
        {"context":{"location":"Cafe"},"resource":"gps","control":"obfuscate"}
    ]}"#;

    fn oal() -> OalTable {
        let mut ops = std::collections::BTreeMap::new();
        ops.insert(
            "return_GPS".to_string(),
            Operation {
                resource: Resource::Gps,
                keywords: vec![KeywordEntry::new(KeywordKind::SdsType, "Location")],
            },
        );
        OalTable::new(ops).unwrap()
    }

    fn setup(hook: &str) -> (Corpus, MethodAoMap) {
        let c = parse_corpus(&[("c.mfw".into(), CORPUS.replace("HOOK", hook))]).unwrap();
        let g = build_call_graph(&c);
        let pms: BTreeSet<MethodId> = c.method_ids().into_iter().collect();
        let ao = annotate(&c, &g, &pms, &oal());
        (c, ao)
    }

    fn scenario(loc: &str, entry: &str) -> Scenario {
        Scenario {
            context: Context {
                clock: "10:00".parse().unwrap(),
                location: loc.into(),
                status: Default::default(),
            },
            calls: vec![EntryCall {
                entry: entry.into(),
                args: vec![],
            }],
        }
    }

    fn run(hook: &str, loc: &str) -> Vec<TraceEvent> {
        let (c, ao) = setup(hook);
        let t = oal();
        let env = SimEnv {
            aomap: &ao,
            oal: &t,
            seed: 1,
        };
        simulate(
            &c,
            &parse_uppt(UPPT).unwrap(),
            &scenario(loc, "LocationManagerService.getLastLocation/1"),
            &env,
        )
        .unwrap()
    }

    fn returned(trace: &[TraceEvent]) -> Vec<ValueClass> {
        trace
            .iter()
            .filter_map(|e| match e {
                TraceEvent::DataReturned { value_class, .. } => Some(*value_class),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn pristine_baseline_leaks_real_data() {
        let t = run("", "HotelX");
        assert!(t
            .iter()
            .any(|e| matches!(e, TraceEvent::OpExecuted { op, .. } if op == "return_GPS")));
        assert_eq!(returned(&t), vec![ValueClass::Real]);
    }

    #[test]
    fn disallow_denies() {
        let t = run("hookcheck(\"gps\",\"disable|obfuscate\",loc);", "HotelX");
        assert!(matches!(
            t[0],
            TraceEvent::HookFired {
                decision: PolicyDecision::Disallow,
                ..
            }
        ));
        assert_eq!(returned(&t), vec![ValueClass::Denied]);
        assert!(!t.iter().any(|e| matches!(e, TraceEvent::OpExecuted { .. })));
    }

    #[test]
    fn obfuscate_transforms() {
        let t = run("hookcheck(\"gps\",\"disable|obfuscate\",loc);", "Cafe");
        assert_eq!(returned(&t), vec![ValueClass::Obfuscated]);
    }

    #[test]
    fn obfuscate_without_capability_escalates() {
        let t = run("hookcheck(\"gps\",\"disable\",_);", "Cafe");
        assert_eq!(returned(&t), vec![ValueClass::Denied]);
    }

    #[test]
    fn cycles_terminate_and_unknown_entry_errors() {
        let (c, ao) = setup("");
        let t = oal();
        let env = SimEnv {
            aomap: &ao,
            oal: &t,
            seed: 0,
        };
        let u = parse_uppt(UPPT).unwrap();
        assert!(simulate(
            &c,
            &u,
            &scenario("X", "LocationManagerService.loop/0"),
            &env
        )
        .unwrap()
        .is_empty());
        assert_eq!(
            simulate(&c, &u, &scenario("X", "Nope.f/0"), &env),
            Err(SimError::UnknownEntry("Nope.f/0".into()))
        );
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            run("hookcheck(\"gps\",\"obfuscate\",loc);", "Cafe"),
            run("hookcheck(\"gps\",\"obfuscate\",loc);", "Cafe")
        );
    }
}
