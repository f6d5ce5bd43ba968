//! Union graphs built by rewriting matched entities onto representatives.

use super::MultiMatchError;
use crate::model::{Alignment, Correspondence, EntityRef, KnowledgeGraph, Term, Triple, WikiId};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

/// A graph standing for one or more merged source KGs, with the map from
/// every original entity to its current representative.
#[derive(Debug, Clone)]
pub struct MergedGraph {
    kg: KnowledgeGraph,
    wikis: BTreeSet<WikiId>,
    members: BTreeMap<EntityRef, Vec<EntityRef>>,
    representative: HashMap<EntityRef, EntityRef>,
}

impl MergedGraph {
    /// A single KG; each of its own entities represents itself.
    pub fn leaf(kg: KnowledgeGraph) -> Self {
        let wiki = kg.wiki().clone();
        let members: BTreeMap<EntityRef, Vec<EntityRef>> = kg
            .local_entities()
            .into_iter()
            .filter(|e| e.wiki() == &wiki)
            .map(|e| (e.clone(), vec![e]))
            .collect();
        let representative = members.keys().map(|e| (e.clone(), e.clone())).collect();
        MergedGraph { kg, wikis: BTreeSet::from([wiki]), members, representative }
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.kg
    }

    pub fn wikis(&self) -> &BTreeSet<WikiId> {
        &self.wikis
    }

    pub fn is_representative(&self, e: &EntityRef) -> bool {
        self.members.contains_key(e)
    }

    /// Originals represented by `rep` (empty if it is not a representative).
    pub fn members_of(&self, rep: &EntityRef) -> &[EntityRef] {
        self.members.get(rep).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn representative_of(&self, original: &EntityRef) -> Option<&EntityRef> {
        self.representative.get(original)
    }

    /// Number of original entities tracked.
    pub fn original_count(&self) -> usize {
        self.representative.len()
    }
}

/// Orients a 1:1 alignment between `a` and `b` as `(a-side, b-side)` pairs.
fn oriented_pairs(
    a: &MergedGraph,
    b: &MergedGraph,
    alignment: &Alignment,
) -> Result<Vec<(EntityRef, EntityRef, f64)>, MultiMatchError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(alignment.len());
    for c in alignment {
        let (x, y) = if a.is_representative(&c.source) && b.is_representative(&c.target) {
            (c.source.clone(), c.target.clone())
        } else if b.is_representative(&c.source) && a.is_representative(&c.target) {
            (c.target.clone(), c.source.clone())
        } else {
            return Err(MultiMatchError::ForeignEndpoint(c.source.iri().to_string(), c.target.iri().to_string()));
        };
        for e in [&x, &y] {
            if !seen.insert(e.clone()) {
                return Err(MultiMatchError::NotOneToOne(e.iri().to_string()));
            }
        }
        out.push((x, y, c.confidence));
    }
    Ok(out)
}

/// Every original-IRI pair implied by a step alignment, with the step's
/// confidence; endpoints in canonical order.
pub fn expand_step(a: &MergedGraph, b: &MergedGraph, alignment: &Alignment) -> Result<Alignment, MultiMatchError> {
    let mut out = Alignment::new();
    for (x, y, conf) in oriented_pairs(a, b, alignment)? {
        for p in a.members_of(&x) {
            for q in b.members_of(&y) {
                let c = Correspondence::direct(p.clone(), q.clone(), conf).expect("valid confidence");
                let (s, t) = c.canonical_endpoints();
                out.insert_max(Correspondence::direct(s.clone(), t.clone(), conf).expect("valid confidence"));
            }
        }
    }
    Ok(out)
}

/// Merges two graphs under a 1:1 alignment. The larger graph (by triple
/// count, `a` on ties) keeps its entities; matched entities of the other
/// are rewritten onto their partners, the rest are copied verbatim.
pub fn merge_graphs(a: MergedGraph, b: MergedGraph, alignment: &Alignment) -> Result<MergedGraph, MultiMatchError> {
    let pairs = oriented_pairs(&a, &b, alignment)?;
    let a_survives = a.kg.len() >= b.kg.len();
    let (mut big, small) = if a_survives { (a, b) } else { (b, a) };
    let renamed: HashMap<EntityRef, EntityRef> = pairs
        .into_iter()
        .map(|(x, y, _)| if a_survives { (y, x) } else { (x, y) })
        .collect();
    let rename: HashMap<Arc<str>, Arc<str>> =
        renamed.iter().map(|(from, to)| (from.iri_arc().clone(), to.iri_arc().clone())).collect();

    let rewrite = |t: &Term| match t {
        Term::Iri(i) => Term::Iri(rename.get(i).cloned().unwrap_or_else(|| i.clone())),
        other => other.clone(),
    };
    let mut triples: Vec<Triple> = big.kg.triples().to_vec();
    triples.extend(small.kg.triples().iter().map(|t| Triple {
        subject: rewrite(&t.subject),
        predicate: rename.get(&t.predicate).cloned().unwrap_or_else(|| t.predicate.clone()),
        object: rewrite(&t.object),
    }));

    for (rep, originals) in small.members {
        let target = renamed.get(&rep).cloned().unwrap_or(rep);
        for o in &originals {
            big.representative.insert(o.clone(), target.clone());
        }
        let slot = big.members.entry(target).or_default();
        slot.extend(originals);
        slot.sort();
    }
    big.wikis.extend(small.wikis);
    big.kg = KnowledgeGraph::from_triples(big.kg.wiki().clone(), triples);
    Ok(big)
}
