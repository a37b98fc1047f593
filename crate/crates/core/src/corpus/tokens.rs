use serde::{Deserialize, Serialize};

use super::{MethodRecord, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenClass {
    Type,
    Ident,
    String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassedToken {
    pub class: TokenClass,
    pub text: String,
}

impl ClassedToken {
    fn new(class: TokenClass, text: &str) -> Self {
        ClassedToken {
            class,
            text: text.to_string(),
        }
    }
}

/// Keyword match surface of a method, in order: return type, parameter
/// types, then body tokens. `void` carries no data and is not emitted.
/// Hook checks contribute nothing so instrumentation never changes matches.
pub fn method_tokens(m: &MethodRecord) -> Vec<ClassedToken> {
    let mut out = Vec::new();
    if m.return_type != "void" {
        out.push(ClassedToken::new(TokenClass::Type, &m.return_type));
    }
    for p in &m.params {
        out.push(ClassedToken::new(TokenClass::Type, &p.ty));
    }
    for s in &m.body {
        match s {
            Stmt::VarDecl { ty, name } => {
                out.push(ClassedToken::new(TokenClass::Type, ty));
                out.push(ClassedToken::new(TokenClass::Ident, name));
            }
            Stmt::Call(t) => {
                if let Some(q) = &t.qualifier {
                    out.push(ClassedToken::new(TokenClass::Ident, q));
                }
                out.push(ClassedToken::new(TokenClass::Ident, &t.name));
            }
            Stmt::Tok(s) => out.push(ClassedToken::new(TokenClass::String, s)),
            Stmt::Return(_) | Stmt::HookCheck { .. } => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;

    fn method(src: &str) -> MethodRecord {
        let text = format!("service U [process=p, side=service, lang=java] {{ {src} }}");
        let c = parse_corpus(&[("t.mfw".into(), text)]).unwrap();
        let m = c.methods().next().unwrap().clone();
        m
    }

    fn tags(m: &MethodRecord) -> Vec<(TokenClass, String)> {
        method_tokens(m)
            .into_iter()
            .map(|t| (t.class, t.text))
            .collect()
    }

    #[test]
    fn var_and_call_tokens() {
        let m = method("void f() { var Location l; call LocationProvider.fetch; }");
        assert_eq!(
            tags(&m),
            vec![
                (TokenClass::Type, "Location".into()),
                (TokenClass::Ident, "l".into()),
                (TokenClass::Ident, "LocationProvider".into()),
                (TokenClass::Ident, "fetch".into()),
            ]
        );
    }

    #[test]
    fn empty_body_only_signature() {
        let m = method("Location f(Buffer b, int n) { }");
        assert_eq!(
            tags(&m),
            vec![
                (TokenClass::Type, "Location".into()),
                (TokenClass::Type, "Buffer".into()),
                (TokenClass::Type, "int".into()),
            ]
        );
    }

    #[test]
    fn string_token() {
        let m = method("void f() { tok \"SCAN\"; }");
        assert_eq!(tags(&m), vec![(TokenClass::String, "SCAN".into())]);
    }

    #[test]
    fn hookcheck_adds_no_tokens() {
        let m = method("void f() { hookcheck(\"gps\",\"disable\",_); return; }");
        assert!(tags(&m).is_empty());
    }
}
