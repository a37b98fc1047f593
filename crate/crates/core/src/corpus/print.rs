use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{Corpus, MethodRecord, ReturnValue, Stmt, UnitDecl};

/// Units without a recorded source file are printed into this document.
pub const DEFAULT_FILE: &str = "corpus.mfw";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub name: String,
    pub text: String,
}

pub(crate) fn render_stmt(s: &Stmt) -> String {
    match s {
        Stmt::Call(t) => format!("call {t};"),
        Stmt::VarDecl { ty, name } => format!("var {ty} {name};"),
        Stmt::Tok(s) => format!("tok \"{s}\";"),
        Stmt::Return(ReturnValue::None) => "return;".to_string(),
        Stmt::Return(ReturnValue::Null) => "return null;".to_string(),
        Stmt::Return(ReturnValue::Var(v)) => format!("return {v};"),
        Stmt::HookCheck {
            resources,
            controls,
            sds_var,
        } => format!(
            "hookcheck(\"{resources}\",\"{controls}\",{});",
            sds_var.as_deref().unwrap_or("_")
        ),
    }
}

fn render_method(out: &mut String, m: &MethodRecord) {
    let params: Vec<String> = m
        .params
        .iter()
        .map(|p| format!("{} {}", p.ty, p.name))
        .collect();
    let _ = writeln!(
        out,
        "  {} {}({}) {{",
        m.return_type,
        m.name,
        params.join(", ")
    );
    for s in &m.body {
        let _ = writeln!(out, "    {}", render_stmt(s));
    }
    out.push_str("  }\n");
}

/// Canonical text of one unit.
pub fn print_unit(u: &UnitDecl) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "service {} [process={}, side={}, lang={}] {{",
        u.name,
        u.process,
        u.side.as_str(),
        u.lang.as_str()
    );
    for m in &u.methods {
        render_method(&mut out, m);
    }
    out.push_str("}\n");
    out
}

/// Canonical text, one document per source file in order of first
/// appearance. Units inside a document are separated by a blank line.
pub fn print_corpus(c: &Corpus) -> Vec<SourceDocument> {
    let mut docs: Vec<SourceDocument> = Vec::new();
    for u in c.units() {
        let name = if u.pos.file.is_empty() {
            DEFAULT_FILE.to_string()
        } else {
            u.pos.file.clone()
        };
        let text = print_unit(u);
        match docs.iter_mut().find(|d| d.name == name) {
            Some(d) => {
                d.text.push('\n');
                d.text.push_str(&text);
            }
            None => docs.push(SourceDocument { name, text }),
        }
    }
    docs
}
