use super::{EntityRef, KnowledgeGraph};
use std::collections::HashMap;
use std::sync::Arc;

/// Shared label/title normalization: lowercase, underscores to spaces,
/// trimmed, internal whitespace collapsed to single spaces.
pub fn normalize_label(s: &str) -> String {
    let lowered = s.to_lowercase().replace('_', " ");
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Local name of an IRI: text after the last `#` or `/`, percent-decoded
/// where that yields valid UTF-8.
pub fn local_name(iri: &str) -> String {
    let cut = iri.rfind(['#', '/']).map(|i| i + 1).unwrap_or(0);
    percent_decode(&iri[cut..])
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() && s.is_char_boundary(i + 3) {
            if let Ok(b) = u8::from_str_radix(&s[i + 1..i + 3], 16) {
                out.push(b);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8(out).unwrap_or_else(|_| s.to_string())
}

/// Entity labels gathered from one or more knowledge graphs, with the IRI
/// local name as fallback.
#[derive(Debug, Clone, Default)]
pub struct LabelIndex {
    labels: HashMap<Arc<str>, String>,
}

impl LabelIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_graphs<'a>(kgs: impl IntoIterator<Item = &'a KnowledgeGraph>) -> Self {
        let mut index = LabelIndex::new();
        for kg in kgs {
            index.add_graph(kg);
        }
        index
    }

    pub fn add_graph(&mut self, kg: &KnowledgeGraph) {
        for (iri, label) in kg.labels() {
            self.labels.entry(iri.clone()).or_insert_with(|| label.clone());
        }
    }

    pub fn insert(&mut self, iri: &str, label: &str) {
        self.labels.insert(Arc::from(iri), label.to_string());
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The stored label, or the IRI's local name when none is known.
    pub fn label(&self, entity: &EntityRef) -> String {
        self.label_of_iri(entity.iri())
    }

    pub fn label_of_iri(&self, iri: &str) -> String {
        match self.labels.get(iri) {
            Some(l) => l.clone(),
            None => local_name(iri),
        }
    }

    /// Normalized label, as used for trivial-link detection.
    pub fn normalized(&self, entity: &EntityRef) -> String {
        normalize_label(&self.label(entity))
    }
}
