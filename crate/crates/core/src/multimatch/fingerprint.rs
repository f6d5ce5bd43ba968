//! tf-idf fingerprints of whole knowledge graphs.

use crate::model::{local_name, KnowledgeGraph, Term, WikiId};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};

const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
const RDF_LANG_STRING: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString";

/// Terms must occur in at least this fraction of documents...
pub const MIN_DF_FRACTION: f64 = 0.001;
/// ...and in at most this fraction.
pub const MAX_DF_FRACTION: f64 = 0.8;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn is_text_literal(t: &Term) -> Option<&str> {
    let l = t.as_literal()?;
    let textual = match &l.datatype {
        None => true,
        Some(d) => &**d == XSD_STRING || &**d == RDF_LANG_STRING,
    };
    (textual && l.lexical.chars().any(char::is_alphabetic)).then_some(l.lexical.as_str())
}

/// Term counts of a KG document: every text literal and the local name of
/// every IRI occurrence.
pub fn term_counts(kg: &KnowledgeGraph) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    let mut add = |text: &str| {
        for tok in tokenize(text) {
            *counts.entry(tok).or_insert(0) += 1;
        }
    };
    for t in kg.triples() {
        for term in [&t.subject, &t.object] {
            match term {
                Term::Iri(iri) => add(&local_name(iri)),
                other => {
                    if let Some(text) = is_text_literal(other) {
                        add(text);
                    }
                }
            }
        }
        add(&local_name(&t.predicate));
    }
    counts
}

/// Document frequencies over the KGs in scope.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocumentFrequencies {
    pub documents: usize,
    pub df: HashMap<String, usize>,
}

impl DocumentFrequencies {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a BTreeMap<String, usize>>) -> Self {
        let mut out = DocumentFrequencies::default();
        for d in docs {
            out.documents += 1;
            for term in d.keys() {
                *out.df.entry(term.clone()).or_insert(0) += 1;
            }
        }
        out
    }

    /// Whether a term with this df is inside the vocabulary band.
    pub fn in_band(&self, df: usize) -> bool {
        let n = self.documents as f64;
        df > 0 && df as f64 >= MIN_DF_FRACTION * n && df as f64 <= MAX_DF_FRACTION * n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgFingerprint {
    pub wiki: WikiId,
    /// L2-normalized weights; empty when no term survived.
    pub vector: BTreeMap<String, f64>,
}

impl KgFingerprint {
    pub fn is_zero(&self) -> bool {
        self.vector.is_empty()
    }

    pub fn dot(&self, other: &KgFingerprint) -> f64 {
        let (small, large) = if self.vector.len() <= other.vector.len() { (self, other) } else { (other, self) };
        small
            .vector
            .iter()
            .filter_map(|(t, w)| large.vector.get(t).map(|v| w * v))
            .sum()
    }
}

/// Weight `tf·(ln(N/df) + 1)` per in-band term, then L2-normalized.
pub fn fingerprint_from_counts(wiki: WikiId, counts: &BTreeMap<String, usize>, dfs: &DocumentFrequencies) -> KgFingerprint {
    let n = dfs.documents as f64;
    let mut vector: BTreeMap<String, f64> = counts
        .iter()
        .filter_map(|(term, &tf)| {
            let df = *dfs.df.get(term)?;
            dfs.in_band(df).then(|| (term.clone(), tf as f64 * ((n / df as f64).ln() + 1.0)))
        })
        .collect();
    let norm = vector.values().map(|w| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        vector.values_mut().for_each(|w| *w /= norm);
    } else {
        vector.clear();
    }
    KgFingerprint { wiki, vector }
}

pub fn fingerprint(kg: &KnowledgeGraph, dfs: &DocumentFrequencies) -> KgFingerprint {
    fingerprint_from_counts(kg.wiki().clone(), &term_counts(kg), dfs)
}

/// Fingerprints of all KGs against their joint document frequencies, in
/// input order. Zero vectors are logged.
pub fn fingerprints(kgs: &[KnowledgeGraph]) -> Vec<KgFingerprint> {
    let counts: Vec<BTreeMap<String, usize>> = kgs.par_iter().map(term_counts).collect();
    let dfs = DocumentFrequencies::from_documents(&counts);
    let out: Vec<KgFingerprint> = kgs
        .par_iter()
        .zip(&counts)
        .map(|(kg, c)| fingerprint_from_counts(kg.wiki().clone(), c, &dfs))
        .collect();
    for f in out.iter().filter(|f| f.is_zero()) {
        log::warn!("empty fingerprint for {}", f.wiki);
    }
    out
}
