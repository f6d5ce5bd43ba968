//! Line-oriented N-Triples reader and writer.
//!
//! Each line is parsed on its own, so a malformed statement can be skipped
//! and counted without losing the rest of the file.

use super::kg::{KnowledgeGraph, Literal, Term, Triple};
use super::WikiId;
use serde::Serialize;
use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

/// How malformed input records are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Skip the record and count it in the report.
    #[default]
    Lenient,
    /// Abort on the first malformed record.
    Strict,
}

const MAX_REPORTED_ERRORS: usize = 20;

/// Outcome of parsing one input file.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParseReport {
    pub lines: usize,
    pub records: usize,
    pub skipped: usize,
    /// The first few problems, as `(line number, message)`.
    pub errors: Vec<(usize, String)>,
}

impl ParseReport {
    pub(crate) fn record_error(&mut self, line: usize, message: String) {
        self.skipped += 1;
        if self.errors.len() < MAX_REPORTED_ERRORS {
            self.errors.push((line, message));
        }
    }
}

#[derive(Debug, Error)]
pub enum NTriplesError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("cannot derive a wiki id from {0:?}")]
    BadFileName(String),
}

/// Parses an N-Triples file; the wiki id is the file name stem.
pub fn parse_ntriples(
    path: &Path,
    mode: ParseMode,
) -> Result<(KnowledgeGraph, ParseReport), NTriplesError> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| NTriplesError::BadFileName(path.display().to_string()))?;
    let wiki = WikiId::new(stem).map_err(|_| NTriplesError::BadFileName(stem.to_string()))?;
    let file = File::open(path)?;
    read_ntriples(BufReader::new(file), wiki, mode)
}

pub fn read_ntriples(
    reader: impl BufRead,
    wiki: WikiId,
    mode: ParseMode,
) -> Result<(KnowledgeGraph, ParseReport), NTriplesError> {
    let mut report = ParseReport::default();
    let mut interner = Interner::default();
    let mut triples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        report.lines += 1;
        match parse_line(&line, &mut interner) {
            Ok(Some(t)) => {
                triples.push(t);
                report.records += 1;
            }
            Ok(None) => {}
            Err(message) => match mode {
                ParseMode::Strict => return Err(NTriplesError::Syntax { line: line_no, message }),
                ParseMode::Lenient => report.record_error(line_no, message),
            },
        }
    }
    Ok((KnowledgeGraph::from_triples(wiki, triples), report))
}

pub fn write_ntriples(kg: &KnowledgeGraph, mut out: impl Write) -> io::Result<()> {
    let mut line = String::new();
    for t in kg.triples() {
        line.clear();
        push_term(&mut line, &t.subject);
        line.push_str(" <");
        line.push_str(&t.predicate);
        line.push_str("> ");
        push_term(&mut line, &t.object);
        line.push_str(" .\n");
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

fn push_term(out: &mut String, term: &Term) {
    match term {
        Term::Iri(i) => {
            out.push('<');
            out.push_str(i);
            out.push('>');
        }
        Term::Blank(b) => {
            out.push_str("_:");
            out.push_str(b);
        }
        Term::Literal(l) => {
            out.push('"');
            for c in l.lexical.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\r' => out.push_str("\\r"),
                    '\t' => out.push_str("\\t"),
                    c => out.push(c),
                }
            }
            out.push('"');
            if let Some(lang) = &l.lang {
                out.push('@');
                out.push_str(lang);
            } else if let Some(dt) = &l.datatype {
                out.push_str("^^<");
                out.push_str(dt);
                out.push('>');
            }
        }
    }
}

#[derive(Default)]
struct Interner {
    strings: HashMap<String, Arc<str>>,
}

impl Interner {
    fn get(&mut self, s: String) -> Arc<str> {
        if let Some(a) = self.strings.get(&s) {
            return a.clone();
        }
        let a: Arc<str> = Arc::from(s.as_str());
        self.strings.insert(s, a.clone());
        a
    }
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, want: char) -> Result<(), String> {
        match self.bump() {
            Some(c) if c == want => Ok(()),
            Some(c) => Err(format!("expected {want:?}, found {c:?} at column {}", self.pos)),
            None => Err(format!("expected {want:?}, found end of line")),
        }
    }

    fn hex_escape(&mut self, digits: usize) -> Result<char, String> {
        let end = self.pos + digits;
        let hex = self.s.get(self.pos..end).ok_or("truncated unicode escape")?;
        let code = u32::from_str_radix(hex, 16).map_err(|_| format!("bad unicode escape {hex:?}"))?;
        self.pos = end;
        char::from_u32(code).ok_or_else(|| format!("invalid code point {code:#x}"))
    }

    fn iri(&mut self) -> Result<String, String> {
        self.expect('<')?;
        let mut out = String::new();
        loop {
            match self.bump() {
                Some('>') => break,
                Some('\\') => match self.bump() {
                    Some('u') => out.push(self.hex_escape(4)?),
                    Some('U') => out.push(self.hex_escape(8)?),
                    _ => return Err("bad escape in IRI".into()),
                },
                Some(c) if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`') => {
                    return Err(format!("illegal character {c:?} in IRI"))
                }
                Some(c) => out.push(c),
                None => return Err("unterminated IRI".into()),
            }
        }
        if !out.contains(':') {
            return Err(format!("relative IRI <{out}>"));
        }
        Ok(out)
    }

    fn blank(&mut self) -> Result<String, String> {
        self.expect('_')?;
        self.expect(':')?;
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || matches!(c, '_' | '-' | '.')) {
            self.bump();
        }
        // A trailing '.' belongs to the statement terminator.
        let mut end = self.pos;
        while end > start && self.s.as_bytes()[end - 1] == b'.' {
            end -= 1;
        }
        self.pos = end;
        if end == start {
            return Err("empty blank node label".into());
        }
        Ok(self.s[start..end].to_string())
    }

    fn literal(&mut self) -> Result<(String, Option<String>, Option<String>), String> {
        self.expect('"')?;
        let mut lexical = String::new();
        loop {
            match self.bump() {
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('t') => lexical.push('\t'),
                    Some('b') => lexical.push('\u{8}'),
                    Some('n') => lexical.push('\n'),
                    Some('r') => lexical.push('\r'),
                    Some('f') => lexical.push('\u{c}'),
                    Some('"') => lexical.push('"'),
                    Some('\'') => lexical.push('\''),
                    Some('\\') => lexical.push('\\'),
                    Some('u') => lexical.push(self.hex_escape(4)?),
                    Some('U') => lexical.push(self.hex_escape(8)?),
                    Some(c) => return Err(format!("unknown escape \\{c}")),
                    None => return Err("unterminated literal".into()),
                },
                Some(c) => lexical.push(c),
                None => return Err("unterminated literal".into()),
            }
        }
        match self.peek() {
            Some('@') => {
                self.bump();
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '-') {
                    self.bump();
                }
                if self.pos == start {
                    return Err("empty language tag".into());
                }
                Ok((lexical, Some(self.s[start..self.pos].to_string()), None))
            }
            Some('^') => {
                self.expect('^')?;
                self.expect('^')?;
                let dt = self.iri()?;
                Ok((lexical, None, Some(dt)))
            }
            _ => Ok((lexical, None, None)),
        }
    }
}

fn parse_line(line: &str, interner: &mut Interner) -> Result<Option<Triple>, String> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut cur = Cursor { s: trimmed, pos: 0 };
    let subject = match cur.peek() {
        Some('<') => Term::Iri(interner.get(cur.iri()?)),
        Some('_') => Term::Blank(interner.get(cur.blank()?)),
        _ => return Err("subject must be an IRI or blank node".into()),
    };
    cur.skip_ws();
    if cur.peek() != Some('<') {
        return Err("predicate must be an IRI".into());
    }
    let predicate = interner.get(cur.iri()?);
    cur.skip_ws();
    let object = match cur.peek() {
        Some('<') => Term::Iri(interner.get(cur.iri()?)),
        Some('_') => Term::Blank(interner.get(cur.blank()?)),
        Some('"') => {
            let (lexical, lang, datatype) = cur.literal()?;
            Term::Literal(Literal { lexical, lang, datatype: datatype.map(|d| interner.get(d)) })
        }
        _ => return Err("object must be an IRI, blank node or literal".into()),
    };
    cur.skip_ws();
    cur.expect('.')?;
    cur.skip_ws();
    match cur.peek() {
        None | Some('#') => Ok(Some(Triple { subject, predicate, object })),
        Some(c) => Err(format!("trailing content starting with {c:?}")),
    }
}
