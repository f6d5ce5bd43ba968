use super::{EntityRef, WikiId};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
const OWL_CLASS: &str = "http://www.w3.org/2002/07/owl#Class";

/// A literal kept verbatim: lexical form plus optional language tag or datatype.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub lexical: String,
    pub lang: Option<String>,
    pub datatype: Option<Arc<str>>,
}

impl Literal {
    pub fn plain(lexical: impl Into<String>) -> Self {
        Literal { lexical: lexical.into(), lang: None, datatype: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(Arc<str>),
    Blank(Arc<str>),
    Literal(Literal),
}

impl Term {
    pub fn iri(s: &str) -> Self {
        Term::Iri(Arc::from(s))
    }

    pub fn as_iri(&self) -> Option<&Arc<str>> {
        match self {
            Term::Iri(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(l) => Some(l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Arc<str>,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: &str, object: Term) -> Self {
        Triple { subject, predicate: Arc::from(predicate), object }
    }
}

/// Resource kind used for per-kind matching and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityKind {
    Instance,
    Class,
    Property,
}

impl EntityKind {
    pub const ALL: [EntityKind; 3] = [EntityKind::Instance, EntityKind::Class, EntityKind::Property];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Instance => "instance",
            EntityKind::Class => "class",
            EntityKind::Property => "property",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Indexed triple store of one wiki.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    wiki: WikiId,
    triples: Vec<Triple>,
    labels: HashMap<Arc<str>, String>,
    class_instances: BTreeMap<Arc<str>, BTreeSet<Arc<str>>>,
    instance_classes: HashMap<Arc<str>, Vec<Arc<str>>>,
    property_counts: HashMap<Arc<str>, usize>,
    by_subject: HashMap<Arc<str>, Vec<usize>>,
    present: HashSet<Arc<str>>,
    declared_classes: HashSet<Arc<str>>,
}

impl KnowledgeGraph {
    /// Builds a graph and its indexes; duplicate triples are collapsed and
    /// triples are kept in sorted order.
    pub fn from_triples(wiki: WikiId, triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut triples: Vec<Triple> = triples.into_iter().collect();
        triples.sort();
        triples.dedup();

        let mut kg = KnowledgeGraph {
            wiki,
            triples: Vec::new(),
            labels: HashMap::new(),
            class_instances: BTreeMap::new(),
            instance_classes: HashMap::new(),
            property_counts: HashMap::new(),
            by_subject: HashMap::new(),
            present: HashSet::new(),
            declared_classes: HashSet::new(),
        };
        for (idx, t) in triples.iter().enumerate() {
            *kg.property_counts.entry(t.predicate.clone()).or_default() += 1;
            if let Term::Iri(s) = &t.subject {
                kg.present.insert(s.clone());
                kg.by_subject.entry(s.clone()).or_default().push(idx);
            }
            if let Term::Iri(o) = &t.object {
                kg.present.insert(o.clone());
            }
            match (&*t.predicate, &t.subject, &t.object) {
                (RDFS_LABEL, Term::Iri(s), Term::Literal(l)) => {
                    kg.labels.entry(s.clone()).or_insert_with(|| l.lexical.clone());
                }
                (RDF_TYPE, Term::Iri(s), Term::Iri(c)) => {
                    if &**c == OWL_CLASS {
                        kg.declared_classes.insert(s.clone());
                    } else {
                        kg.class_instances.entry(c.clone()).or_default().insert(s.clone());
                        kg.instance_classes.entry(s.clone()).or_default().push(c.clone());
                    }
                }
                _ => {}
            }
        }
        kg.triples = triples;
        kg
    }

    pub fn empty(wiki: WikiId) -> Self {
        Self::from_triples(wiki, Vec::new())
    }

    pub fn wiki(&self) -> &WikiId {
        &self.wiki
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = (&Arc<str>, &String)> {
        self.labels.iter()
    }

    pub fn label(&self, iri: &str) -> Option<&str> {
        self.labels.get(iri).map(String::as_str)
    }

    /// `I_c` for every class with at least one instance.
    pub fn class_instances(&self) -> &BTreeMap<Arc<str>, BTreeSet<Arc<str>>> {
        &self.class_instances
    }

    pub fn classes_of(&self, iri: &str) -> &[Arc<str>] {
        self.instance_classes.get(iri).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn property_count(&self, predicate: &str) -> usize {
        self.property_counts.get(predicate).copied().unwrap_or(0)
    }

    pub fn property_counts(&self) -> &HashMap<Arc<str>, usize> {
        &self.property_counts
    }

    /// Triples with the given subject IRI.
    pub fn statements_about<'a>(&'a self, subject: &str) -> impl Iterator<Item = &'a Triple> + 'a {
        self.by_subject
            .get(subject)
            .into_iter()
            .flatten()
            .map(move |&i| &self.triples[i])
    }

    /// Whether the IRI appears as subject or object of some triple.
    pub fn contains_entity(&self, iri: &str) -> bool {
        self.present.contains(iri)
    }

    pub fn entity_count(&self) -> usize {
        self.present.len()
    }

    /// Entities of this graph in its own wiki namespace (subjects, objects
    /// and predicates), sorted by IRI.
    pub fn local_entities(&self) -> Vec<EntityRef> {
        let mut iris: BTreeSet<&Arc<str>> = self.present.iter().collect();
        iris.extend(self.property_counts.keys());
        iris.into_iter()
            .filter_map(|iri| EntityRef::parse(iri).ok())
            .collect()
    }

    /// Kind of a resource from its usage: predicates are properties; rdf:type
    /// objects and declared owl:Class resources are classes; the rest are
    /// instances.
    pub fn kind_of(&self, iri: &str) -> EntityKind {
        if self.property_counts.contains_key(iri) {
            EntityKind::Property
        } else if self.class_instances.contains_key(iri) || self.declared_classes.contains(iri) {
            EntityKind::Class
        } else {
            EntityKind::Instance
        }
    }
}
