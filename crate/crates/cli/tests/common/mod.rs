//! Helpers shared by the CLI test targets.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

pub fn lonscape(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lonscape"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

/// Statements of a parsed DOT graph.
#[derive(Debug, Default)]
pub struct DotGraph {
    pub directed: bool,
    pub nodes: BTreeSet<String>,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Id(String),
    Punct(&'static str),
}

fn tokenize(src: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'/') || c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i + 1 < chars.len() && !(chars[i] == '*' && chars[i + 1] == '/') {
                i += 1;
            }
            i += 2;
        } else if c == '-' && matches!(chars.get(i + 1), Some('>') | Some('-')) {
            out.push(Tok::Punct(if chars[i + 1] == '>' { "->" } else { "--" }));
            i += 2;
        } else if "{}[];,=:".contains(c) {
            let p = ["{", "}", "[", "]", ";", ",", "=", ":"]["{}[];,=:".find(c).unwrap()];
            out.push(Tok::Punct(p));
            i += 1;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err("unterminated string".into()),
                    Some('"') => break,
                    Some('\\') if chars.get(i + 1) == Some(&'"') => {
                        s.push('"');
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            out.push(Tok::Id(s));
        } else if c.is_ascii_digit() || c == '.' || c == '-' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            if s == "-" || s == "." || s.matches('.').count() > 1 {
                return Err(format!("bad numeral {s:?}"));
            }
            out.push(Tok::Id(s));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Id(chars[start..i].iter().collect()));
        } else {
            return Err(format!("unexpected character {c:?}"));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    graph: DotGraph,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), String> {
        if self.punct(p) {
            Ok(())
        } else {
            Err(format!("expected {p:?} at token {} ({:?})", self.pos, self.peek()))
        }
    }

    fn id(&mut self) -> Result<String, String> {
        match self.peek() {
            Some(Tok::Id(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            other => Err(format!("expected identifier at token {}, found {other:?}", self.pos)),
        }
    }

    fn keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Id(s)) if s.eq_ignore_ascii_case(word))
    }

    fn attr_lists(&mut self) -> Result<(), String> {
        while self.punct("[") {
            while !self.punct("]") {
                self.id()?;
                self.expect("=")?;
                self.id()?;
                if !self.punct(",") {
                    self.punct(";");
                }
            }
        }
        Ok(())
    }

    fn node_id(&mut self) -> Result<String, String> {
        let id = self.id()?;
        if self.punct(":") {
            self.id()?;
            if self.punct(":") {
                self.id()?;
            }
        }
        Ok(id)
    }

    fn stmt(&mut self) -> Result<(), String> {
        if self.keyword("graph") || self.keyword("node") || self.keyword("edge") {
            self.pos += 1;
            return self.attr_lists();
        }
        let first = self.node_id()?;
        if self.punct("=") {
            self.id()?;
            return Ok(());
        }
        let edge_op = if self.graph.directed { "->" } else { "--" };
        let mut prev = first.clone();
        self.graph.nodes.insert(first);
        while self.punct(edge_op) {
            let next = self.node_id()?;
            self.graph.nodes.insert(next.clone());
            self.graph.edges.push((prev, next.clone()));
            prev = next;
        }
        self.attr_lists()
    }

    fn graph(&mut self) -> Result<(), String> {
        if self.keyword("strict") {
            self.pos += 1;
        }
        if self.keyword("digraph") {
            self.graph.directed = true;
        } else if !self.keyword("graph") {
            return Err("missing graph keyword".into());
        }
        self.pos += 1;
        if matches!(self.peek(), Some(Tok::Id(_))) {
            self.pos += 1;
        }
        self.expect("{")?;
        while !self.punct("}") {
            self.stmt()?;
            self.punct(";");
        }
        if self.pos != self.toks.len() {
            return Err("trailing tokens after graph".into());
        }
        Ok(())
    }
}

/// Check `src` against the DOT language grammar (without subgraphs).
pub fn parse_dot(src: &str) -> Result<DotGraph, String> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        graph: DotGraph::default(),
    };
    p.graph()?;
    Ok(p.graph)
}
