//! Closure-aware precision and recall, and alignment profiles.

use crate::closure::{cluster_stats, compute_identity_sets};
use crate::model::{Alignment, EntityKind, EntityRef, KnowledgeGraph, LabelIndex};
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("reference alignment is empty; recall is undefined")]
    EmptyReference,
}

pub type EntityPair = (EntityRef, EntityRef);

fn unordered(a: &EntityRef, b: &EntityRef) -> EntityPair {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// All cross-wiki pairs inside each identity set, smaller IRI first.
pub fn closure_pairs(a: &Alignment) -> BTreeSet<EntityPair> {
    let mut out = BTreeSet::new();
    for cluster in compute_identity_sets(a) {
        let m = &cluster.members;
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                if m[i].wiki() != m[j].wiki() {
                    out.insert(unordered(&m[i], &m[j]));
                }
            }
        }
    }
    out
}

/// Resource kind of each entity, from KG usage; entities no KG mentions
/// fall back to the namespace segment of their IRI.
#[derive(Debug, Clone, Default)]
pub struct KindIndex {
    kinds: HashMap<EntityRef, EntityKind>,
}

impl KindIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_graphs<'a>(kgs: impl IntoIterator<Item = &'a KnowledgeGraph>) -> Self {
        let mut out = KindIndex::new();
        for kg in kgs {
            for e in kg.local_entities() {
                let kind = kg.kind_of(e.iri());
                out.kinds.entry(e).or_insert(kind);
            }
        }
        out
    }

    pub fn insert(&mut self, e: EntityRef, kind: EntityKind) {
        self.kinds.insert(e, kind);
    }

    pub fn kind(&self, e: &EntityRef) -> EntityKind {
        if let Some(&k) = self.kinds.get(e) {
            return k;
        }
        let path = e.iri().splitn(5, '/').nth(4).unwrap_or("");
        if path.starts_with("class/") {
            EntityKind::Class
        } else if path.starts_with("property/") {
            EntityKind::Property
        } else {
            EntityKind::Instance
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Scores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Precision or recall had an empty denominator and was reported as 0.
    pub degenerate: bool,
}

impl Scores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { None } else { Some(num as f64 / den as f64) };
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fn_);
        let (precision, recall) = (p.unwrap_or(0.0), r.unwrap_or(0.0));
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Scores { tp, fp, fn_, precision, recall, f1, degenerate: p.is_none() || r.is_none() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub overall: Scores,
    pub instance: Scores,
    pub class: Scores,
    pub property: Scores,
    /// System closure pairs ignored because an endpoint is outside the
    /// evaluation universe.
    pub out_of_universe: usize,
}

impl EvalReport {
    pub fn for_kind(&self, kind: EntityKind) -> &Scores {
        match kind {
            EntityKind::Instance => &self.instance,
            EntityKind::Class => &self.class,
            EntityKind::Property => &self.property,
        }
    }
}

/// Scores the system against the reference; only system pairs with both
/// entities in the reference are judged.
pub fn evaluate(system: &Alignment, reference: &Alignment, kinds: &KindIndex) -> Result<EvalReport, EvalError> {
    evaluate_with_universe(system, reference, &reference.entities(), kinds)
}

/// As [`evaluate`], judging system pairs with both entities in `universe`
/// (which is extended by the reference's own entities).
pub fn evaluate_with_universe(
    system: &Alignment,
    reference: &Alignment,
    universe: &BTreeSet<EntityRef>,
    kinds: &KindIndex,
) -> Result<EvalReport, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let ref_entities = reference.entities();
    let inside = |e: &EntityRef| universe.contains(e) || ref_entities.contains(e);
    let r = closure_pairs(reference);
    let all_s = closure_pairs(system);
    let s: BTreeSet<EntityPair> = all_s.iter().filter(|(a, b)| inside(a) && inside(b)).cloned().collect();

    let kind_of = |p: &EntityPair| kinds.kind(&p.0);
    let mut counts: HashMap<EntityKind, [usize; 3]> = HashMap::new();
    for p in s.union(&r) {
        let slot = match (s.contains(p), r.contains(p)) {
            (true, true) => 0,
            (true, false) => 1,
            _ => 2,
        };
        counts.entry(kind_of(p)).or_default()[slot] += 1;
    }
    let scores = |k: EntityKind| {
        let c = counts.get(&k).copied().unwrap_or_default();
        Scores::from_counts(c[0], c[1], c[2])
    };
    let total = counts.values().fold([0; 3], |acc, c| [acc[0] + c[0], acc[1] + c[1], acc[2] + c[2]]);
    Ok(EvalReport {
        overall: Scores::from_counts(total[0], total[1], total[2]),
        instance: scores(EntityKind::Instance),
        class: scores(EntityKind::Class),
        property: scores(EntityKind::Property),
        out_of_universe: all_s.len() - s.len(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProfileReport {
    pub total_links: usize,
    pub trivial: usize,
    pub non_trivial: usize,
    pub kg_pairs: usize,
    pub clusters: usize,
    pub cluster_size_mean: f64,
    pub cluster_size_std: f64,
    pub cluster_size_max: usize,
}

/// Link counts split by whether the endpoints share a normalized label,
/// plus identity set statistics.
pub fn profile(a: &Alignment, labels: &LabelIndex) -> ProfileReport {
    let trivial = a.iter().filter(|c| labels.normalized(&c.source) == labels.normalized(&c.target)).count();
    let stats = cluster_stats(a);
    ProfileReport {
        total_links: a.len(),
        trivial,
        non_trivial: a.len() - trivial,
        kg_pairs: a.wiki_pair_count(),
        clusters: stats.count,
        cluster_size_mean: stats.mean_size,
        cluster_size_std: stats.std_size,
        cluster_size_max: stats.max_size,
    }
}
