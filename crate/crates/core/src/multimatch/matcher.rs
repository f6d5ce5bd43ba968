//! Pairwise matchers: the built-in label matcher and external programs.

use crate::model::{
    local_name, normalize_label, read_alignment, write_ntriples, Alignment, Correspondence, EntityKind, EntityRef,
    KnowledgeGraph,
};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::Command;

#[derive(Debug, thiserror::Error)]
pub enum MatcherError {
    #[error("unknown matcher {0:?}")]
    Unknown(String),
    #[error("matcher I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("matcher exited with {status}: {stderr}")]
    Failed { status: String, stderr: String },
    #[error("matcher output: {0}")]
    Output(String),
}

/// A 1:1-agnostic matcher between two graphs; sources come from `left`.
pub trait Matcher: Sync {
    fn name(&self) -> &str;
    fn match_graphs(&self, left: &KnowledgeGraph, right: &KnowledgeGraph) -> Result<Alignment, MatcherError>;
}

/// Confidence-1 links between same-kind resources with equal normalized
/// labels (the IRI local name stands in for a missing label).
#[derive(Debug, Clone, Copy, Default)]
pub struct StringMatcher;

fn label_index(kg: &KnowledgeGraph) -> BTreeMap<(EntityKind, String), Vec<EntityRef>> {
    let mut out: BTreeMap<(EntityKind, String), Vec<EntityRef>> = BTreeMap::new();
    for e in kg.local_entities() {
        let label = kg.label(e.iri()).map(str::to_string).unwrap_or_else(|| local_name(e.iri()));
        let key = normalize_label(&label);
        if key.is_empty() {
            continue;
        }
        out.entry((kg.kind_of(e.iri()), key)).or_default().push(e);
    }
    out
}

impl Matcher for StringMatcher {
    fn name(&self) -> &str {
        "string"
    }

    fn match_graphs(&self, left: &KnowledgeGraph, right: &KnowledgeGraph) -> Result<Alignment, MatcherError> {
        let right_index = label_index(right);
        let mut out = Alignment::new();
        for (key, sources) in label_index(left) {
            let Some(targets) = right_index.get(&key) else { continue };
            for s in &sources {
                for t in targets {
                    if s.wiki() != t.wiki() {
                        out.insert(Correspondence::direct(s.clone(), t.clone(), 1.0).expect("valid"));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Runs `program args... left.nt right.nt out.tsv` and reads the alignment
/// TSV it writes.
#[derive(Debug, Clone)]
pub struct ExternalMatcher {
    name: String,
    program: String,
    args: Vec<String>,
}

impl ExternalMatcher {
    pub fn new(command: &str) -> Result<Self, MatcherError> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts.next().ok_or_else(|| MatcherError::Unknown(command.to_string()))?;
        Ok(ExternalMatcher { name: format!("exec:{command}"), program, args: parts.collect() })
    }
}

fn write_graph(kg: &KnowledgeGraph, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ntriples(kg, &mut w)?;
    w.flush()
}

impl Matcher for ExternalMatcher {
    fn name(&self) -> &str {
        &self.name
    }

    fn match_graphs(&self, left: &KnowledgeGraph, right: &KnowledgeGraph) -> Result<Alignment, MatcherError> {
        let dir = tempfile::tempdir()?;
        let (l, r, out) = (dir.path().join("left.nt"), dir.path().join("right.nt"), dir.path().join("out.tsv"));
        write_graph(left, &l)?;
        write_graph(right, &r)?;
        let result = Command::new(&self.program).args(&self.args).arg(&l).arg(&r).arg(&out).output()?;
        if !result.status.success() {
            return Err(MatcherError::Failed {
                status: result.status.to_string(),
                stderr: String::from_utf8_lossy(&result.stderr).trim().to_string(),
            });
        }
        read_alignment(&out).map_err(|e| MatcherError::Output(e.to_string()))
    }
}

/// `string`, or `exec:<command line>` for an external program.
pub fn matcher_by_name(name: &str) -> Result<Box<dyn Matcher>, MatcherError> {
    if name == "string" {
        Ok(Box::new(StringMatcher))
    } else if let Some(cmd) = name.strip_prefix("exec:") {
        Ok(Box::new(ExternalMatcher::new(cmd)?))
    } else {
        Err(MatcherError::Unknown(name.to_string()))
    }
}
