use thiserror::Error;

use super::{
    CallTarget, Corpus, Lang, MethodId, MethodRecord, Param, ReturnValue, Side, SourcePos, Stmt,
    UnitDecl,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("{pos}: expected {expected}, found {found}")]
    Syntax {
        pos: SourcePos,
        expected: String,
        found: String,
    },
    #[error("duplicate method {id}: defined at {first} and again at {second}")]
    DuplicateMethod {
        id: MethodId,
        first: SourcePos,
        second: SourcePos,
    },
    #[error("{pos}: {message}")]
    Invalid { pos: SourcePos, message: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Punct(char),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::Eof => "end of file".to_string(),
        }
    }
}

fn lex(file: &str, text: &str) -> Result<Vec<(Tok, u32)>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1u32;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '"' => {
                chars.next();
                let start = line;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some('\n') => {
                            return Err(ParseError::Syntax {
                                pos: SourcePos {
                                    file: file.to_string(),
                                    line: start,
                                },
                                expected: "closing `\"`".into(),
                                found: "end of line".into(),
                            })
                        }
                        Some(c) => s.push(c),
                        None => {
                            return Err(ParseError::Syntax {
                                pos: SourcePos {
                                    file: file.to_string(),
                                    line: start,
                                },
                                expected: "closing `\"`".into(),
                                found: "end of file".into(),
                            })
                        }
                    }
                }
                out.push((Tok::Str(s), start));
            }
            '[' | ']' | '{' | '}' | '(' | ')' | ',' | ';' | '.' | '=' => {
                chars.next();
                out.push((Tok::Punct(c), line));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(s), line));
            }
            other => {
                return Err(ParseError::Syntax {
                    pos: SourcePos {
                        file: file.to_string(),
                        line,
                    },
                    expected: "a token".into(),
                    found: format!("`{other}`"),
                })
            }
        }
    }
    out.push((Tok::Eof, line));
    Ok(out)
}

struct Parser<'a> {
    file: &'a str,
    toks: Vec<(Tok, u32)>,
    at: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn line(&self) -> u32 {
        self.toks[self.at].1
    }

    fn pos(&self) -> SourcePos {
        SourcePos {
            file: self.file.to_string(),
            line: self.line(),
        }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            expected: expected.to_string(),
            found: self.peek().describe(),
        })
    }

    fn punct(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Punct(c) {
            self.bump();
            Ok(())
        } else {
            self.err(&format!("`{c}`"))
        }
    }

    fn is_punct(&self, c: char) -> bool {
        *self.peek() == Tok::Punct(c)
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.err(what),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => self.err(&format!("`{kw}`")),
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.err("string literal"),
        }
    }

    fn attr(&mut self, key: &str) -> Result<String, ParseError> {
        self.keyword(key)?;
        self.punct('=')?;
        self.ident(&format!("value for `{key}`"))
    }

    fn units(&mut self) -> Result<Vec<UnitDecl>, ParseError> {
        let mut units = Vec::new();
        while *self.peek() != Tok::Eof {
            units.push(self.unit()?);
        }
        Ok(units)
    }

    fn unit(&mut self) -> Result<UnitDecl, ParseError> {
        let pos = self.pos();
        self.keyword("service")?;
        let name = self.ident("unit name")?;
        self.punct('[')?;
        let process = self.attr("process")?;
        self.punct(',')?;
        let side_pos = self.pos();
        let side = match self.attr("side")?.as_str() {
            "service" => Side::Service,
            "app" => Side::App,
            other => {
                return Err(ParseError::Syntax {
                    pos: side_pos,
                    expected: "`service` or `app`".into(),
                    found: format!("`{other}`"),
                })
            }
        };
        self.punct(',')?;
        let lang_pos = self.pos();
        let lang = match self.attr("lang")?.as_str() {
            "java" => Lang::Java,
            "cpp" => Lang::Cpp,
            other => {
                return Err(ParseError::Syntax {
                    pos: lang_pos,
                    expected: "`java` or `cpp`".into(),
                    found: format!("`{other}`"),
                })
            }
        };
        self.punct(']')?;
        self.punct('{')?;
        let mut methods = Vec::new();
        while !self.is_punct('}') {
            if *self.peek() == Tok::Eof {
                return self.err("method or `}`");
            }
            methods.push(self.method(&name)?);
        }
        self.punct('}')?;
        Ok(UnitDecl {
            name,
            process,
            side,
            lang,
            methods,
            pos,
        })
    }

    fn method(&mut self, unit: &str) -> Result<MethodRecord, ParseError> {
        let pos = self.pos();
        let return_type = self.ident("return type")?;
        let name = self.ident("method name")?;
        self.punct('(')?;
        let mut params = Vec::new();
        if !self.is_punct(')') {
            loop {
                let ty = self.ident("parameter type")?;
                let pname = self.ident("parameter name")?;
                params.push(Param { ty, name: pname });
                if self.is_punct(',') {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.punct(')')?;
        self.punct('{')?;
        let mut body = Vec::new();
        let mut stmt_lines = Vec::new();
        while !self.is_punct('}') {
            stmt_lines.push(self.line());
            body.push(self.stmt()?);
        }
        self.punct('}')?;
        let mut m = MethodRecord::new(unit, &name, params, &return_type, body);
        m.pos = pos;
        m.stmt_lines = stmt_lines;
        Ok(m)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.err("statement or `}`"),
        };
        let stmt = match kw.as_str() {
            "call" => {
                self.bump();
                let first = self.ident("call target")?;
                if self.is_punct('.') {
                    self.bump();
                    let name = self.ident("method name")?;
                    Stmt::Call(CallTarget {
                        qualifier: Some(first),
                        name,
                    })
                } else {
                    Stmt::Call(CallTarget {
                        qualifier: None,
                        name: first,
                    })
                }
            }
            "var" => {
                self.bump();
                let ty = self.ident("variable type")?;
                let name = self.ident("variable name")?;
                Stmt::VarDecl { ty, name }
            }
            "tok" => {
                self.bump();
                Stmt::Tok(self.string()?)
            }
            "return" => {
                self.bump();
                match self.peek() {
                    Tok::Ident(s) if s == "null" => {
                        self.bump();
                        Stmt::Return(ReturnValue::Null)
                    }
                    Tok::Ident(s) => {
                        let s = s.clone();
                        self.bump();
                        Stmt::Return(ReturnValue::Var(s))
                    }
                    _ => Stmt::Return(ReturnValue::None),
                }
            }
            "hookcheck" => {
                self.bump();
                self.punct('(')?;
                let resources = self.string()?;
                self.punct(',')?;
                let controls = self.string()?;
                self.punct(',')?;
                let var = self.ident("SDS variable or `_`")?;
                self.punct(')')?;
                Stmt::HookCheck {
                    resources,
                    controls,
                    sds_var: (var != "_").then_some(var),
                }
            }
            _ => return self.err("`call`, `var`, `tok`, `return` or `hookcheck`"),
        };
        self.punct(';')?;
        Ok(stmt)
    }
}

/// Parses one file into its units.
pub fn parse_file(file: &str, text: &str) -> Result<Vec<UnitDecl>, ParseError> {
    let toks = lex(file, text)?;
    let mut p = Parser { file, toks, at: 0 };
    p.units()
}

/// Parses a set of `(file name, text)` documents into a validated corpus.
pub fn parse_corpus(files: &[(String, String)]) -> Result<Corpus, ParseError> {
    let mut units = Vec::new();
    for (name, text) in files {
        units.extend(parse_file(name, text)?);
    }
    Corpus::new(units, files.iter().map(|(n, _)| n.clone()).collect())
}
