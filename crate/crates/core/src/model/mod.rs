//! Core domain types: wikis, entities, correspondences and alignments, plus
//! the file formats they are read from and written to.

mod alignment_io;
mod kg;
mod labels;
mod ntriples;
mod pages;

pub use alignment_io::{read_alignment, read_alignments, write_alignment, AlignmentIoError};
pub use kg::{EntityKind, KnowledgeGraph, Literal, Term, Triple, RDFS_LABEL, RDF_TYPE};
pub use labels::{local_name, normalize_label, LabelIndex};
pub use ntriples::{
    parse_ntriples, read_ntriples, write_ntriples, NTriplesError, ParseMode, ParseReport,
};
pub use pages::{parse_page_dump, read_page_dump, InterWikiLink, PageError, PageRecord, Section};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Prefix shared by every entity IRI; the next path segment is the wiki id.
pub const IRI_BASE: &str = "http://dbkwik.webdatacommons.org/";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid wiki id {0:?}")]
    InvalidWikiId(String),
    #[error("IRI {0:?} is not an absolute entity IRI under {IRI_BASE}")]
    InvalidIri(String),
    #[error("correspondence {0} -> {1} links a wiki to itself")]
    SameWiki(String, String),
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
}

/// Canonical identifier of one wiki (and of its knowledge graph).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WikiId(Arc<str>);

impl WikiId {
    pub fn new(name: &str) -> Result<Self, ModelError> {
        if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == '/' || c == '#') {
            return Err(ModelError::InvalidWikiId(name.to_string()));
        }
        Ok(WikiId(Arc::from(name)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for WikiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WikiId({})", self.0)
    }
}

impl serde::Serialize for WikiId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl fmt::Display for WikiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Which namespace of a wiki an entity IRI lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Namespace {
    Resource,
    Class,
    Property,
}

impl Namespace {
    fn segment(self) -> &'static str {
        match self {
            Namespace::Resource => "resource",
            Namespace::Class => "class",
            Namespace::Property => "property",
        }
    }
}

/// Characters that may not appear verbatim in an IRI.
fn is_iri_forbidden(c: char) -> bool {
    c.is_whitespace()
        || c.is_control()
        || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '\\' | '^' | '`')
}

/// Turns a page title (or fragment) into an IRI path segment: spaces become
/// underscores and remaining forbidden characters are percent-encoded.
pub fn encode_title(title: &str) -> String {
    let mut out = String::with_capacity(title.len());
    for c in title.trim().chars() {
        if c == ' ' {
            out.push('_');
        } else if is_iri_forbidden(c) {
            let mut buf = [0u8; 4];
            for b in c.encode_utf8(&mut buf).bytes() {
                out.push_str(&format!("%{b:02X}"));
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// A resource of one wiki's knowledge graph, identified by its IRI.
///
/// Ordering is by IRI; the wiki is a function of the IRI.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityRef {
    iri: Arc<str>,
    wiki: WikiId,
}

impl EntityRef {
    /// Parses an entity IRI of the form `{IRI_BASE}{wiki}/...`.
    pub fn parse(iri: &str) -> Result<Self, ModelError> {
        let rest = iri
            .strip_prefix(IRI_BASE)
            .ok_or_else(|| ModelError::InvalidIri(iri.to_string()))?;
        let (wiki, path) = rest
            .split_once('/')
            .ok_or_else(|| ModelError::InvalidIri(iri.to_string()))?;
        if path.is_empty() || iri.chars().any(is_iri_forbidden) {
            return Err(ModelError::InvalidIri(iri.to_string()));
        }
        let wiki = WikiId::new(wiki).map_err(|_| ModelError::InvalidIri(iri.to_string()))?;
        Ok(EntityRef { iri: Arc::from(iri), wiki })
    }

    /// Builds the IRI of a page resource, optionally pointing at a fragment.
    pub fn for_page(wiki: &WikiId, title: &str, fragment: Option<&str>) -> Self {
        let mut iri = format!("{IRI_BASE}{wiki}/resource/{}", encode_title(title));
        if let Some(fragment) = fragment {
            iri.push('#');
            iri.push_str(&encode_title(fragment));
        }
        EntityRef { iri: Arc::from(iri), wiki: wiki.clone() }
    }

    /// Builds a class or property IRI local to `wiki`.
    pub fn in_namespace(wiki: &WikiId, namespace: Namespace, name: &str) -> Self {
        let iri = format!("{IRI_BASE}{wiki}/{}/{}", namespace.segment(), encode_title(name));
        EntityRef { iri: Arc::from(iri), wiki: wiki.clone() }
    }

    pub fn iri(&self) -> &str {
        &self.iri
    }

    pub fn iri_arc(&self) -> &Arc<str> {
        &self.iri
    }

    pub fn wiki(&self) -> &WikiId {
        &self.wiki
    }

    /// True when the IRI points into a part of a page (anchor link).
    pub fn has_fragment(&self) -> bool {
        self.iri[IRI_BASE.len()..].contains('#')
    }
}

impl fmt::Debug for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.iri)
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.iri)
    }
}

/// How a correspondence came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    /// Mined from an explicit link between two pages.
    Direct,
    /// Inferred from chains of direct links.
    Transitive,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Direct => "direct",
            Provenance::Transitive => "transitive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "direct" => Some(Provenance::Direct),
            "transitive" => Some(Provenance::Transitive),
            _ => None,
        }
    }
}

/// Confidence carried by freshly extracted candidates until refinement
/// assigns the direction-based value.
pub const UNSET_CONFIDENCE: f64 = 0.0;

/// An identity link `<source, target, =, confidence>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub source: EntityRef,
    pub target: EntityRef,
    pub confidence: f64,
    pub provenance: Provenance,
}

impl Correspondence {
    pub fn new(
        source: EntityRef,
        target: EntityRef,
        confidence: f64,
        provenance: Provenance,
    ) -> Result<Self, ModelError> {
        if source.wiki == target.wiki {
            return Err(ModelError::SameWiki(source.iri.to_string(), target.iri.to_string()));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(ModelError::InvalidConfidence(confidence));
        }
        Ok(Correspondence { source, target, confidence, provenance })
    }

    pub fn direct(source: EntityRef, target: EntityRef, confidence: f64) -> Result<Self, ModelError> {
        Self::new(source, target, confidence, Provenance::Direct)
    }

    pub fn key(&self) -> (EntityRef, EntityRef) {
        (self.source.clone(), self.target.clone())
    }

    /// The endpoints ordered by wiki id, then by IRI.
    pub fn canonical_endpoints(&self) -> (&EntityRef, &EntityRef) {
        if (&self.source.wiki, &self.source.iri) <= (&self.target.wiki, &self.target.iri) {
            (&self.source, &self.target)
        } else {
            (&self.target, &self.source)
        }
    }

    /// The same link with source and target swapped.
    pub fn flipped(&self) -> Self {
        Correspondence {
            source: self.target.clone(),
            target: self.source.clone(),
            confidence: self.confidence,
            provenance: self.provenance,
        }
    }
}

/// A set of correspondences without duplicate `(source, target)` pairs,
/// iterated in source-IRI then target-IRI order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Alignment {
    links: BTreeMap<(EntityRef, EntityRef), Correspondence>,
}

impl Alignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Inserts a correspondence, replacing any previous one for the same pair.
    pub fn insert(&mut self, c: Correspondence) -> Option<Correspondence> {
        self.links.insert(c.key(), c)
    }

    /// Inserts a correspondence; on a duplicate pair the higher confidence wins.
    pub fn insert_max(&mut self, c: Correspondence) {
        match self.links.get_mut(&(c.source.clone(), c.target.clone())) {
            Some(existing) if existing.confidence >= c.confidence => {}
            Some(existing) => *existing = c,
            None => {
                self.links.insert(c.key(), c);
            }
        }
    }

    pub fn get(&self, source: &EntityRef, target: &EntityRef) -> Option<&Correspondence> {
        self.links.get(&(source.clone(), target.clone()))
    }

    pub fn contains(&self, source: &EntityRef, target: &EntityRef) -> bool {
        self.get(source, target).is_some()
    }

    /// True if a correspondence exists between the two entities in either direction.
    pub fn links_either_way(&self, a: &EntityRef, b: &EntityRef) -> bool {
        self.contains(a, b) || self.contains(b, a)
    }

    pub fn remove(&mut self, source: &EntityRef, target: &EntityRef) -> Option<Correspondence> {
        self.links.remove(&(source.clone(), target.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Correspondence> + '_ {
        self.links.values()
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&Correspondence) -> bool) {
        self.links.retain(|_, c| keep(c));
    }

    /// All distinct endpoint entities.
    pub fn entities(&self) -> std::collections::BTreeSet<EntityRef> {
        self.iter()
            .flat_map(|c| [c.source.clone(), c.target.clone()])
            .collect()
    }

    /// Union of two alignments; on conflicting pairs `other` wins.
    pub fn merged_with(&self, other: &Alignment) -> Alignment {
        let mut out = self.clone();
        out.extend(other.iter().cloned());
        out
    }

    /// Number of distinct unordered wiki pairs connected by at least one link.
    pub fn wiki_pair_count(&self) -> usize {
        self.iter()
            .map(|c| {
                let (a, b) = (c.source.wiki(), c.target.wiki());
                if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                }
            })
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    }
}

impl Extend<Correspondence> for Alignment {
    fn extend<I: IntoIterator<Item = Correspondence>>(&mut self, iter: I) {
        for c in iter {
            self.insert(c);
        }
    }
}

impl FromIterator<Correspondence> for Alignment {
    fn from_iter<I: IntoIterator<Item = Correspondence>>(iter: I) -> Self {
        let mut a = Alignment::new();
        a.extend(iter);
        a
    }
}

impl<'a> IntoIterator for &'a Alignment {
    type Item = &'a Correspondence;
    type IntoIter = std::collections::btree_map::Values<'a, (EntityRef, EntityRef), Correspondence>;

    fn into_iter(self) -> Self::IntoIter {
        self.links.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wiki(s: &str) -> WikiId {
        WikiId::new(s).unwrap()
    }

    #[test]
    fn wiki_ids_reject_whitespace_and_empty() {
        assert!(WikiId::new("").is_err());
        assert!(WikiId::new("lotr wiki").is_err());
        assert!(WikiId::new("a/b").is_err());
        assert!(WikiId::new("lotr").is_ok());
        assert!(wiki("Lotr") < wiki("lotr"));
    }

    #[test]
    fn page_iris_round_trip_through_parse() {
        let e = EntityRef::for_page(&wiki("lotr"), "Frodo Baggins", None);
        assert_eq!(e.iri(), "http://dbkwik.webdatacommons.org/lotr/resource/Frodo_Baggins");
        let back = EntityRef::parse(e.iri()).unwrap();
        assert_eq!(back, e);
        assert!(!e.has_fragment());

        let anchored = EntityRef::for_page(&wiki("lotr"), "Frodo", Some("Early life"));
        assert!(anchored.iri().ends_with("Frodo#Early_life"));
        assert!(anchored.has_fragment());
    }

    #[test]
    fn forbidden_characters_are_percent_encoded() {
        let e = EntityRef::for_page(&wiki("w"), "a<b>\"c\"", None);
        assert!(e.iri().ends_with("a%3Cb%3E%22c%22"));
        assert!(EntityRef::parse(e.iri()).is_ok());
    }

    #[test]
    fn parse_rejects_foreign_and_malformed_iris() {
        assert!(EntityRef::parse("http://example.org/x").is_err());
        assert!(EntityRef::parse("http://dbkwik.webdatacommons.org/w").is_err());
        assert!(EntityRef::parse("http://dbkwik.webdatacommons.org/w/has space").is_err());
    }

    #[test]
    fn correspondence_invariants() {
        let a = EntityRef::for_page(&wiki("a"), "X", None);
        let a2 = EntityRef::for_page(&wiki("a"), "Y", None);
        let b = EntityRef::for_page(&wiki("b"), "X", None);
        assert!(Correspondence::direct(a.clone(), a2, 0.5).is_err());
        assert!(Correspondence::direct(a.clone(), b.clone(), 1.5).is_err());
        assert!(Correspondence::direct(a.clone(), b.clone(), f64::NAN).is_err());
        assert!(Correspondence::direct(a, b, 1.0).is_ok());
    }

    #[test]
    fn alignment_orders_and_dedupes() {
        let e = |w: &str, t: &str| EntityRef::for_page(&wiki(w), t, None);
        let mut al = Alignment::new();
        al.insert(Correspondence::direct(e("b", "Z"), e("a", "Z"), 0.5).unwrap());
        al.insert(Correspondence::direct(e("a", "Y"), e("b", "Y"), 0.5).unwrap());
        al.insert_max(Correspondence::direct(e("a", "Y"), e("b", "Y"), 1.0).unwrap());
        al.insert_max(Correspondence::direct(e("a", "Y"), e("b", "Y"), 0.5).unwrap());
        assert_eq!(al.len(), 2);
        let order: Vec<_> = al.iter().map(|c| c.source.iri().to_string()).collect();
        assert!(order[0] < order[1]);
        assert_eq!(al.get(&e("a", "Y"), &e("b", "Y")).unwrap().confidence, 1.0);
        assert_eq!(al.wiki_pair_count(), 1);
    }
}
