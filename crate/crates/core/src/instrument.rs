//! Hook placement: renders a `hookcheck` statement per plan entry, inserts
//! it as the first statement of the target method and records a manifest.

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{parse_corpus, print_corpus, Corpus, MethodId, ParseError, Stmt};
use crate::selector::{corpus_fingerprint, HookEntry, HookPlan};
use crate::uppt::{Control, Resource};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstrumentError {
    #[error("corpus is already instrumented ({count} hookcheck statements, first in {first})")]
    AlreadyInstrumented { count: usize, first: MethodId },
    #[error("plan was computed for corpus {plan}, but the corpus fingerprint is {corpus}")]
    FingerprintMismatch { plan: String, corpus: String },
    #[error("plan names method {0}, which the corpus does not define")]
    UnknownMethod(MethodId),
    #[error("plan lists method {0} twice")]
    DuplicateEntry(MethodId),
    #[error("instrumented corpus failed to re-parse: {0}")]
    Reparse(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub method_id: MethodId,
    pub file: String,
    pub line: u32,
    pub resources: BTreeSet<Resource>,
    pub controls: BTreeSet<Control>,
    pub guarded_ops: BTreeSet<String>,
    pub hook: String,
    pub rendered_template: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub plan_fingerprint: String,
    pub corpus_fingerprint: String,
    pub entries: Vec<ManifestEntry>,
    pub warnings: Vec<String>,
}

/// A rendered hook.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedHook {
    pub stmt: Stmt,
    /// Controls after any downgrade.
    pub controls: BTreeSet<Control>,
    pub template: String,
    pub warning: Option<String>,
}

fn join<T: AsRef<str>>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|s| s.as_ref().to_string())
        .collect::<Vec<_>>()
        .join("|")
}

/// Builds the hook statement and its expanded if/else form. An obfuscate
/// control without an SDS variable has nothing to transform and is
/// downgraded to disable.
pub fn render_hook(entry: &HookEntry) -> RenderedHook {
    let mut controls = entry.controls.clone();
    let mut warning = None;
    if entry.sds_var.is_none() && controls.remove(&Control::Obfuscate) {
        controls.insert(Control::Disable);
        warning = Some(format!(
            "{}: no SDS variable to obfuscate; hook downgraded to disable",
            entry.method_id
        ));
    }
    let stmt = Stmt::HookCheck {
        resources: join(entry.resources.iter().map(|r| r.as_str())),
        controls: join(controls.iter().map(|c| c.as_str())),
        sds_var: entry.sds_var.clone(),
    };

    let mut t = String::new();
    let _ = writeln!(
        t,
        "// {} guards {}",
        entry.method_id,
        join(&entry.guarded_ops)
    );
    for r in &entry.resources {
        let _ = writeln!(
            t,
            "String allowed_level = PolicyService.checkPolicy(\"{r}\", currentContext());"
        );
        let _ = writeln!(t, "if (allowed_level == \"DISALLOW\") {{");
        let _ = writeln!(t, "    return null;");
        let _ = write!(t, "}}");
        match (&entry.sds_var, controls.contains(&Control::Obfuscate)) {
            (Some(v), true) => {
                let _ = writeln!(t, " else if (allowed_level == \"OBFUSCATE\") {{");
                let _ = writeln!(t, "    {v} = PolicyService.obfuscate(\"{r}\", {v});");
                let _ = writeln!(t, "}}");
            }
            _ => t.push('\n'),
        }
    }
    RenderedHook {
        stmt,
        controls,
        template: t,
        warning,
    }
}

/// Every `hookcheck` statement as (method, body index).
pub fn detect_existing_hooks(c: &Corpus) -> Vec<(MethodId, usize)> {
    let mut out: Vec<(MethodId, usize)> = c
        .methods()
        .flat_map(|m| {
            m.body
                .iter()
                .enumerate()
                .filter(|(_, s)| matches!(s, Stmt::HookCheck { .. }))
                .map(|(i, _)| (m.id.clone(), i))
        })
        .collect();
    out.sort();
    out
}

/// Inserts each plan entry's hook at body index 0 of its method. The
/// returned corpus is the re-parse of its own canonical print, so manifest
/// lines refer to [`print_corpus`] output.
pub fn instrument(c: &Corpus, plan: &HookPlan) -> Result<(Corpus, Manifest), InstrumentError> {
    let existing = detect_existing_hooks(c);
    if let Some((first, _)) = existing.first() {
        return Err(InstrumentError::AlreadyInstrumented {
            count: existing.len(),
            first: first.clone(),
        });
    }
    let fp = corpus_fingerprint(c);
    if plan.corpus_fingerprint != fp {
        return Err(InstrumentError::FingerprintMismatch {
            plan: plan.corpus_fingerprint.clone(),
            corpus: fp,
        });
    }

    let mut units = c.units().to_vec();
    let mut rendered = Vec::with_capacity(plan.entries.len());
    let mut seen = BTreeSet::new();
    for e in &plan.entries {
        if !seen.insert(&e.method_id) {
            return Err(InstrumentError::DuplicateEntry(e.method_id.clone()));
        }
        let m = units
            .iter_mut()
            .flat_map(|u| u.methods.iter_mut())
            .find(|m| m.id == e.method_id)
            .ok_or_else(|| InstrumentError::UnknownMethod(e.method_id.clone()))?;
        let r = render_hook(e);
        m.body.insert(0, r.stmt.clone());
        m.stmt_lines.clear();
        rendered.push((e, r));
    }
    let edited = Corpus::new(units, c.source_paths().to_vec())?;
    let docs: Vec<(String, String)> = print_corpus(&edited)
        .into_iter()
        .map(|d| (d.name, d.text))
        .collect();
    let out = parse_corpus(&docs)?;

    let mut manifest = Manifest {
        plan_fingerprint: plan.fingerprint(),
        corpus_fingerprint: fp,
        entries: Vec::new(),
        warnings: Vec::new(),
    };
    for (e, r) in rendered {
        let m = out
            .method(e.method_id.as_str())
            .expect("instrumented method survives re-parse");
        manifest.entries.push(ManifestEntry {
            method_id: e.method_id.clone(),
            file: m.pos.file.clone(),
            line: m.stmt_lines[0],
            resources: e.resources.clone(),
            controls: r.controls,
            guarded_ops: e.guarded_ops.clone(),
            hook: crate::corpus::print::render_stmt(&r.stmt),
            rendered_template: r.template,
        });
        manifest.warnings.extend(r.warning);
    }
    Ok((out, manifest))
}
