//! Class and property matches induced from an instance alignment through
//! the overlap of their extents.

use crate::model::{
    normalize_label, Alignment, Correspondence, EntityRef, KnowledgeGraph, Term, WikiId, RDFS_LABEL, RDF_TYPE,
};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

pub const DEFAULT_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("similarity undefined for empty extents")]
    ZeroDenominator,
    #[error("shared count {shared} exceeds an extent ({n1}, {n2})")]
    SharedExceedsExtent { shared: u64, n1: u64, n2: u64 },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Dice,
    Min,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Dice => "dice",
            Metric::Min => "min",
        }
    }

    pub fn parse(s: &str) -> Result<Self, SchemaError> {
        match s {
            "dice" => Ok(Metric::Dice),
            "min" => Ok(Metric::Min),
            _ => Err(SchemaError::UnknownMetric(s.to_string())),
        }
    }

    pub fn apply(self, shared: u64, n1: u64, n2: u64) -> Result<f64, SchemaError> {
        match self {
            Metric::Dice => sim_dice(shared, n1, n2),
            Metric::Min => sim_min(shared, n1, n2),
        }
    }
}

fn check_shared(shared: u64, n1: u64, n2: u64) -> Result<(), SchemaError> {
    if shared > n1.min(n2) {
        Err(SchemaError::SharedExceedsExtent { shared, n1, n2 })
    } else {
        Ok(())
    }
}

/// `2·shared / (n1 + n2)`.
pub fn sim_dice(shared: u64, n1: u64, n2: u64) -> Result<f64, SchemaError> {
    if n1 == 0 && n2 == 0 {
        return Err(SchemaError::ZeroDenominator);
    }
    check_shared(shared, n1, n2)?;
    Ok(2.0 * shared as f64 / (n1 as f64 + n2 as f64))
}

/// `shared / min(n1, n2)`.
pub fn sim_min(shared: u64, n1: u64, n2: u64) -> Result<f64, SchemaError> {
    if n1 == 0 || n2 == 0 {
        return Err(SchemaError::ZeroDenominator);
    }
    check_shared(shared, n1, n2)?;
    Ok(shared as f64 / n1.min(n2) as f64)
}

/// One row of an overlap table.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapRow {
    pub source: EntityRef,
    pub target: EntityRef,
    pub shared: u64,
    pub n1: u64,
    pub n2: u64,
}

impl OverlapRow {
    pub fn similarity(&self, metric: Metric) -> f64 {
        // Rows are clamped on construction, so the metric is always defined.
        metric.apply(self.shared, self.n1, self.n2).unwrap_or(0.0)
    }
}

/// Shared-instance counts for every schema element pair with nonzero
/// overlap, plus the extent size of each element.
#[derive(Debug, Clone, Default)]
pub struct OverlapTable {
    shared: BTreeMap<(EntityRef, EntityRef), u64>,
    extent: BTreeMap<EntityRef, u64>,
    /// Pairs whose raw count exceeded an extent (only possible when the
    /// instance alignment is not one-to-one) and was clamped.
    pub clamped: usize,
}

impl OverlapTable {
    pub fn len(&self) -> usize {
        self.shared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shared.is_empty()
    }

    pub fn shared(&self, a: &EntityRef, b: &EntityRef) -> u64 {
        self.shared.get(&(a.clone(), b.clone())).copied().unwrap_or(0)
    }

    pub fn extent(&self, e: &EntityRef) -> u64 {
        self.extent.get(e).copied().unwrap_or(0)
    }

    /// Rows in (source, target) order.
    pub fn rows(&self) -> Vec<OverlapRow> {
        self.shared
            .iter()
            .map(|((s, t), &shared)| OverlapRow {
                source: s.clone(),
                target: t.clone(),
                shared,
                n1: self.extent(s),
                n2: self.extent(t),
            })
            .collect()
    }

    /// Matches whose similarity is strictly greater than `threshold`, with
    /// the similarity as confidence.
    pub fn matches(&self, metric: Metric, threshold: f64) -> Alignment {
        self.rows()
            .into_iter()
            .filter_map(|r| {
                let sim = r.similarity(metric);
                (sim > threshold).then(|| Correspondence::direct(r.source, r.target, sim).ok())?
            })
            .collect()
    }

    fn absorb(&mut self, other: OverlapTable) {
        for (k, v) in other.shared {
            *self.shared.entry(k).or_default() += v;
        }
        self.extent.extend(other.extent);
        self.clamped += other.clamped;
    }

    fn clamp(&mut self) {
        for ((s, t), v) in self.shared.iter_mut() {
            let cap = self.extent.get(s).copied().unwrap_or(0).min(self.extent.get(t).copied().unwrap_or(0));
            if *v > cap {
                *v = cap;
                self.clamped += 1;
            }
        }
        self.shared.retain(|_, v| *v > 0);
    }
}

/// Matched instance pairs grouped by wiki pair, oriented so the first
/// endpoint has the smaller wiki id; duplicates in either direction
/// collapse.
fn pairs_by_wiki(a: &Alignment) -> BTreeMap<(WikiId, WikiId), Vec<(EntityRef, EntityRef)>> {
    let mut out: BTreeMap<(WikiId, WikiId), Vec<(EntityRef, EntityRef)>> = BTreeMap::new();
    for c in a {
        let (s, t) = c.canonical_endpoints();
        if s.wiki() == t.wiki() {
            continue;
        }
        out.entry((s.wiki().clone(), t.wiki().clone())).or_default().push((s.clone(), t.clone()));
    }
    for v in out.values_mut() {
        v.sort();
        v.dedup();
    }
    out
}

fn graphs_by_wiki(kgs: &[KnowledgeGraph]) -> HashMap<&WikiId, &KnowledgeGraph> {
    kgs.iter().map(|k| (k.wiki(), k)).collect()
}

fn schema_ref(iri: &Arc<str>, wiki: &WikiId) -> Option<EntityRef> {
    EntityRef::parse(iri).ok().filter(|e| e.wiki() == wiki)
}

/// Overlap of class extents under the instance alignment.
pub fn class_overlaps(instances: &Alignment, kgs: &[KnowledgeGraph]) -> OverlapTable {
    let graphs = graphs_by_wiki(kgs);
    let parts: Vec<OverlapTable> = pairs_by_wiki(instances)
        .into_par_iter()
        .filter_map(|((w1, w2), pairs)| {
            let (g1, g2) = (graphs.get(&w1)?, graphs.get(&w2)?);
            let mut t = OverlapTable::default();
            for (i1, i2) in &pairs {
                for c1 in g1.classes_of(i1.iri()) {
                    let Some(c1) = schema_ref(c1, &w1) else { continue };
                    for c2 in g2.classes_of(i2.iri()) {
                        let Some(c2) = schema_ref(c2, &w2) else { continue };
                        *t.shared.entry((c1.clone(), c2)).or_default() += 1;
                    }
                }
            }
            for (g, w) in [(g1, &w1), (g2, &w2)] {
                for (c, members) in g.class_instances() {
                    if let Some(c) = schema_ref(c, w) {
                        t.extent.insert(c, members.len() as u64);
                    }
                }
            }
            Some(t)
        })
        .collect();
    let mut table = OverlapTable::default();
    for p in parts {
        table.absorb(p);
    }
    table.clamp();
    table
}

fn is_wiki_property(p: &Arc<str>, wiki: &WikiId) -> bool {
    &**p != RDF_TYPE && &**p != RDFS_LABEL && schema_ref(p, wiki).is_some()
}

fn literal_key(t: &Term) -> Option<String> {
    t.as_literal().map(|l| normalize_label(&l.lexical))
}

/// Overlap of property extents: statement pairs on matched subjects whose
/// objects are a matched instance pair or equal literals after trimming
/// and lowercasing.
pub fn property_overlaps(instances: &Alignment, kgs: &[KnowledgeGraph]) -> OverlapTable {
    let graphs = graphs_by_wiki(kgs);
    let matched: HashSet<(&str, &str)> = instances
        .iter()
        .flat_map(|c| [(c.source.iri(), c.target.iri()), (c.target.iri(), c.source.iri())])
        .collect();
    let parts: Vec<OverlapTable> = pairs_by_wiki(instances)
        .into_par_iter()
        .filter_map(|((w1, w2), pairs)| {
            let (g1, g2) = (graphs.get(&w1)?, graphs.get(&w2)?);
            let mut t = OverlapTable::default();
            for (s1, s2) in &pairs {
                let right: Vec<_> = g2.statements_about(s2.iri()).filter(|x| is_wiki_property(&x.predicate, &w2)).collect();
                if right.is_empty() {
                    continue;
                }
                for a in g1.statements_about(s1.iri()).filter(|x| is_wiki_property(&x.predicate, &w1)) {
                    let lit = literal_key(&a.object);
                    for b in &right {
                        let same_object = match (&a.object, &b.object) {
                            (Term::Iri(o1), Term::Iri(o2)) => matched.contains(&(&**o1, &**o2)),
                            (Term::Literal(_), Term::Literal(_)) => lit == literal_key(&b.object),
                            _ => false,
                        };
                        if same_object {
                            let p1 = schema_ref(&a.predicate, &w1).expect("filtered");
                            let p2 = schema_ref(&b.predicate, &w2).expect("filtered");
                            *t.shared.entry((p1, p2)).or_default() += 1;
                        }
                    }
                }
            }
            for (g, w) in [(g1, &w1), (g2, &w2)] {
                for (p, &n) in g.property_counts() {
                    if is_wiki_property(p, w) {
                        t.extent.insert(schema_ref(p, w).expect("checked"), n as u64);
                    }
                }
            }
            Some(t)
        })
        .collect();
    let mut table = OverlapTable::default();
    for p in parts {
        table.absorb(p);
    }
    table.clamp();
    table
}

pub fn induce_class_matches(instances: &Alignment, kgs: &[KnowledgeGraph], metric: Metric, threshold: f64) -> Alignment {
    class_overlaps(instances, kgs).matches(metric, threshold)
}

pub fn induce_property_matches(
    instances: &Alignment,
    kgs: &[KnowledgeGraph],
    metric: Metric,
    threshold: f64,
) -> Alignment {
    property_overlaps(instances, kgs).matches(metric, threshold)
}

/// Both tables with match counts under both metrics.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SchemaReport {
    pub threshold: f64,
    pub class_pairs_with_overlap: usize,
    pub property_pairs_with_overlap: usize,
    pub class_matches_dice: usize,
    pub class_matches_min: usize,
    pub property_matches_dice: usize,
    pub property_matches_min: usize,
    pub clamped_pairs: usize,
}

#[derive(Debug, Clone)]
pub struct SchemaOutput {
    pub classes: Alignment,
    pub properties: Alignment,
    pub report: SchemaReport,
}

pub fn induce_schema(instances: &Alignment, kgs: &[KnowledgeGraph], metric: Metric, threshold: f64) -> SchemaOutput {
    let classes = class_overlaps(instances, kgs);
    let properties = property_overlaps(instances, kgs);
    let report = SchemaReport {
        threshold,
        class_pairs_with_overlap: classes.len(),
        property_pairs_with_overlap: properties.len(),
        class_matches_dice: classes.matches(Metric::Dice, threshold).len(),
        class_matches_min: classes.matches(Metric::Min, threshold).len(),
        property_matches_dice: properties.matches(Metric::Dice, threshold).len(),
        property_matches_min: properties.matches(Metric::Min, threshold).len(),
        clamped_pairs: classes.clamped + properties.clamped,
    };
    SchemaOutput {
        classes: classes.matches(metric, threshold),
        properties: properties.matches(metric, threshold),
        report,
    }
}
