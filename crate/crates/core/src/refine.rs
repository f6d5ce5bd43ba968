//! Refinement of candidate links: canonical direction and base confidence,
//! redirect resolution, per-wiki-pair injectivity, and removal of anchor,
//! disambiguation and dead links.

use crate::model::{
    Alignment, Correspondence, EntityRef, KnowledgeGraph, PageRecord, Provenance, WikiId,
};
use regex::Regex;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, OnceLock};

/// Confidence of a link seen in one direction only.
pub const ONE_WAY_CONFIDENCE: f64 = 0.5;
/// Confidence of a link seen in both directions.
pub const TWO_WAY_CONFIDENCE: f64 = 1.0;
/// Redirect chains longer than this are treated as cycles.
pub const MAX_REDIRECT_DEPTH: usize = 10;

/// Orients every link from the lexicographically smaller wiki to the larger
/// one, merging both directions of a pair. A pair seen both ways (or already
/// carrying full confidence from an earlier pass) gets 1.0, otherwise 0.5.
pub fn normalize_directions(a: &Alignment) -> Alignment {
    // (forward seen, backward seen, already confirmed)
    let mut pairs: BTreeMap<(EntityRef, EntityRef), (bool, bool, bool)> = BTreeMap::new();
    for c in a {
        let forward = c.source.wiki() < c.target.wiki();
        let key = if forward {
            (c.source.clone(), c.target.clone())
        } else {
            (c.target.clone(), c.source.clone())
        };
        let entry = pairs.entry(key).or_default();
        if forward {
            entry.0 = true;
        } else {
            entry.1 = true;
        }
        entry.2 |= c.confidence >= TWO_WAY_CONFIDENCE;
    }
    pairs
        .into_iter()
        .map(|((s, t), (fwd, bwd, confirmed))| {
            let confidence = if (fwd && bwd) || confirmed {
                TWO_WAY_CONFIDENCE
            } else {
                ONE_WAY_CONFIDENCE
            };
            Correspondence { source: s, target: t, confidence, provenance: Provenance::Direct }
        })
        .collect()
}

/// Page-level redirect targets, keyed by the redirecting page's entity.
#[derive(Debug, Clone, Default)]
pub struct RedirectMap {
    targets: HashMap<EntityRef, EntityRef>,
}

/// Final target of an entity after following redirects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Unchanged,
    Target(EntityRef),
    Cycle,
}

impl RedirectMap {
    pub fn from_pages<'a>(pages: impl IntoIterator<Item = &'a PageRecord>) -> Self {
        let targets = pages
            .into_iter()
            .filter_map(|p| {
                let to = p.is_redirect_to.as_ref()?;
                Some((
                    EntityRef::for_page(&p.wiki, &p.title, None),
                    EntityRef::for_page(&p.wiki, to, None),
                ))
            })
            .collect();
        RedirectMap { targets }
    }

    pub fn insert(&mut self, from: EntityRef, to: EntityRef) {
        self.targets.insert(from, to);
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn resolve(&self, e: &EntityRef) -> Resolution {
        let mut current = e;
        for _ in 0..=MAX_REDIRECT_DEPTH {
            match self.targets.get(current) {
                None if current == e => return Resolution::Unchanged,
                None => return Resolution::Target(current.clone()),
                Some(next) if next == e => return Resolution::Cycle,
                Some(next) => current = next,
            }
        }
        Resolution::Cycle
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RedirectReport {
    pub rewritten_endpoints: usize,
    pub cyclic_endpoints: Vec<String>,
    pub dropped_links: usize,
}

/// Replaces every endpoint by its final redirect target. Duplicates created
/// by the rewrite keep the highest confidence; links with an endpoint on a
/// redirect cycle are dropped.
pub fn resolve_redirects(a: &Alignment, redirects: &RedirectMap) -> (Alignment, RedirectReport) {
    let mut report = RedirectReport::default();
    let mut cycles = std::collections::BTreeSet::new();
    let mut out = Alignment::new();
    for c in a {
        let mut resolved = Vec::with_capacity(2);
        for e in [&c.source, &c.target] {
            match redirects.resolve(e) {
                Resolution::Unchanged => resolved.push(Some(e.clone())),
                Resolution::Target(t) => {
                    report.rewritten_endpoints += 1;
                    resolved.push(Some(t));
                }
                Resolution::Cycle => {
                    cycles.insert(e.iri().to_string());
                    resolved.push(None);
                }
            }
        }
        match (resolved[0].take(), resolved[1].take()) {
            (Some(source), Some(target)) => {
                out.insert_max(Correspondence { source, target, ..c.clone() });
            }
            _ => report.dropped_links += 1,
        }
    }
    report.cyclic_endpoints = cycles.into_iter().collect();
    (out, report)
}

/// Removes every link of an entity that has two or more links into the same
/// other wiki.
pub fn enforce_injectivity(a: &Alignment) -> Alignment {
    let mut degree: HashMap<(&EntityRef, &WikiId), usize> = HashMap::new();
    for c in a {
        *degree.entry((&c.source, c.target.wiki())).or_default() += 1;
        *degree.entry((&c.target, c.source.wiki())).or_default() += 1;
    }
    a.iter()
        .filter(|c| degree[&(&c.source, c.target.wiki())] == 1 && degree[&(&c.target, c.source.wiki())] == 1)
        .cloned()
        .collect()
}

/// Which disambiguation heuristics fire for a page.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DisambiguationFlags {
    pub by_label: bool,
    pub by_first_sentence: bool,
    pub by_category: bool,
}

impl DisambiguationFlags {
    pub fn any(&self) -> bool {
        self.by_label || self.by_first_sentence || self.by_category
    }
}

fn refer_to_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"(?i)\b(can|could|may|might)\s+refer\s+to\b").unwrap())
}

pub fn detect_disambiguation(page: &PageRecord) -> DisambiguationFlags {
    let mentions = |s: &str| s.to_lowercase().contains("disambiguation");
    DisambiguationFlags {
        by_label: mentions(&page.label) || mentions(&page.title),
        by_first_sentence: refer_to_pattern().is_match(&page.first_sentence),
        by_category: page.categories.iter().any(|c| mentions(c)),
    }
}

/// Subject/object presence of entities, per wiki with a knowledge graph.
#[derive(Debug, Clone, Default)]
pub struct PresenceIndex {
    by_wiki: HashMap<WikiId, HashSet<Arc<str>>>,
}

impl PresenceIndex {
    pub fn from_graphs<'a>(kgs: impl IntoIterator<Item = &'a KnowledgeGraph>) -> Self {
        let mut index = PresenceIndex::default();
        for kg in kgs {
            index.add_graph(kg);
        }
        index
    }

    pub fn add_graph(&mut self, kg: &KnowledgeGraph) {
        let set = self.by_wiki.entry(kg.wiki().clone()).or_default();
        for e in kg.local_entities() {
            if kg.contains_entity(e.iri()) {
                set.insert(e.iri_arc().clone());
            }
        }
    }

    /// Registers a wiki with the given present entities.
    pub fn insert_wiki(&mut self, wiki: WikiId, iris: impl IntoIterator<Item = Arc<str>>) {
        self.by_wiki.entry(wiki).or_default().extend(iris);
    }

    pub fn has_graph(&self, wiki: &WikiId) -> bool {
        self.by_wiki.contains_key(wiki)
    }

    pub fn wikis(&self) -> impl Iterator<Item = &WikiId> {
        self.by_wiki.keys()
    }

    /// False only for entities of a known wiki that occur in none of its triples.
    pub fn is_alive(&self, e: &EntityRef) -> bool {
        match self.by_wiki.get(e.wiki()) {
            Some(set) => set.contains(e.iri()),
            None => true,
        }
    }
}

/// Entities whose page is a disambiguation page.
pub fn disambiguation_entities<'a>(pages: impl IntoIterator<Item = &'a PageRecord>) -> HashSet<EntityRef> {
    pages
        .into_iter()
        .filter(|p| detect_disambiguation(p).any())
        .map(|p| EntityRef::for_page(&p.wiki, &p.title, None))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CleanupReport {
    pub removed_anchor: usize,
    pub removed_disambiguation: usize,
    pub removed_dead: usize,
}

/// Drops anchor links, links touching a disambiguation page, and links to
/// entities missing from their wiki's graph. Entities of wikis without a
/// graph are left alone here.
pub fn drop_anchor_and_dead_links(
    a: &Alignment,
    presence: &PresenceIndex,
    disambiguation: &HashSet<EntityRef>,
) -> (Alignment, CleanupReport) {
    let mut report = CleanupReport::default();
    let mut out = Alignment::new();
    for c in a {
        let ends = [&c.source, &c.target];
        if ends.iter().any(|e| e.has_fragment()) {
            report.removed_anchor += 1;
        } else if ends.iter().any(|e| disambiguation.contains(*e)) {
            report.removed_disambiguation += 1;
        } else if !ends.iter().all(|e| presence.is_alive(e)) {
            report.removed_dead += 1;
        } else {
            out.insert(c.clone());
        }
    }
    (out, report)
}

/// Inputs needed by the refinement stages.
#[derive(Debug, Clone, Default)]
pub struct RefineContext {
    pub redirects: RedirectMap,
    pub disambiguation: HashSet<EntityRef>,
    pub presence: PresenceIndex,
}

impl RefineContext {
    pub fn new(pages: &[PageRecord], presence: PresenceIndex) -> Self {
        RefineContext {
            redirects: RedirectMap::from_pages(pages),
            disambiguation: disambiguation_entities(pages),
            presence,
        }
    }
}

/// Link counts after each refinement stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RefineReport {
    pub input: usize,
    pub after_normalization: usize,
    pub after_redirects: usize,
    pub after_injectivity: usize,
    pub output: usize,
    pub redirects: RedirectReport,
    pub cleanup: CleanupReport,
}

/// Runs all refinement stages in order.
pub fn refine(a: &Alignment, ctx: &RefineContext) -> (Alignment, RefineReport) {
    let mut report = RefineReport { input: a.len(), ..Default::default() };
    let normalized = normalize_directions(a);
    report.after_normalization = normalized.len();
    let (resolved, redirect_report) = resolve_redirects(&normalized, &ctx.redirects);
    report.after_redirects = resolved.len();
    report.redirects = redirect_report;
    let injective = enforce_injectivity(&resolved);
    report.after_injectivity = injective.len();
    let (cleaned, cleanup) = drop_anchor_and_dead_links(&injective, &ctx.presence, &ctx.disambiguation);
    report.output = cleaned.len();
    report.cleanup = cleanup;
    (cleaned, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UNSET_CONFIDENCE;

    fn e(w: &str, t: &str) -> EntityRef {
        EntityRef::for_page(&WikiId::new(w).unwrap(), t, None)
    }

    fn link(s: &EntityRef, t: &EntityRef, conf: f64) -> Correspondence {
        Correspondence::direct(s.clone(), t.clone(), conf).unwrap()
    }

    fn page(w: &str, title: &str) -> PageRecord {
        PageRecord {
            wiki: WikiId::new(w).unwrap(),
            title: title.into(),
            label: title.into(),
            is_redirect_to: None,
            categories: vec![],
            first_sentence: String::new(),
            sections: vec![],
        }
    }

    #[test]
    fn one_way_link_gets_half_confidence() {
        let (a, b) = (e("a", "X"), e("b", "X"));
        let out = normalize_directions(&[link(&a, &b, UNSET_CONFIDENCE)].into_iter().collect());
        assert_eq!(out.len(), 1);
        assert_eq!(out.get(&a, &b).unwrap().confidence, 0.5);
    }

    #[test]
    fn two_way_link_gets_full_confidence() {
        let (a, b) = (e("a", "X"), e("b", "X"));
        let input: Alignment = [link(&a, &b, 0.0), link(&b, &a, 0.0)].into_iter().collect();
        let out = normalize_directions(&input);
        assert_eq!(out.len(), 1);
        assert_eq!(out.get(&a, &b).unwrap().confidence, 1.0);
    }

    #[test]
    fn backward_link_is_flipped() {
        let (a, b) = (e("a", "X"), e("b", "X"));
        let out = normalize_directions(&[link(&b, &a, 0.0)].into_iter().collect());
        let c = out.iter().next().unwrap();
        assert_eq!((&c.source, &c.target, c.confidence), (&a, &b, 0.5));
    }

    #[test]
    fn normalization_preserves_assigned_confidences() {
        let (a, b, c) = (e("a", "X"), e("b", "X"), e("c", "X"));
        let once = normalize_directions(
            &[link(&a, &b, 0.0), link(&b, &a, 0.0), link(&c, &a, 0.0)].into_iter().collect(),
        );
        assert_eq!(normalize_directions(&once), once);
    }

    #[test]
    fn redirects_single_hop_chain_and_identity() {
        let (a, x, y, z) = (e("a", "A"), e("b", "X"), e("b", "Y"), e("b", "Z"));
        let mut map = RedirectMap::default();
        let input: Alignment = [link(&a, &x, 0.5)].into_iter().collect();
        assert_eq!(resolve_redirects(&input, &map).0, input);

        map.insert(x.clone(), y.clone());
        let (out, report) = resolve_redirects(&input, &map);
        assert!(out.contains(&a, &y));
        assert_eq!(report.rewritten_endpoints, 1);

        map.insert(y.clone(), z.clone());
        let (out, _) = resolve_redirects(&input, &map);
        assert_eq!(out.len(), 1);
        assert!(out.contains(&a, &z));
    }

    #[test]
    fn redirect_duplicates_keep_max_confidence() {
        let (a, x, y) = (e("a", "A"), e("b", "X"), e("b", "Y"));
        let mut map = RedirectMap::default();
        map.insert(x.clone(), y.clone());
        let input: Alignment = [link(&a, &x, 0.5), link(&a, &y, 1.0)].into_iter().collect();
        let (out, _) = resolve_redirects(&input, &map);
        assert_eq!(out.len(), 1);
        assert_eq!(out.get(&a, &y).unwrap().confidence, 1.0);
    }

    #[test]
    fn redirect_cycles_drop_the_link() {
        let (a, x, y) = (e("a", "A"), e("b", "X"), e("b", "Y"));
        let mut map = RedirectMap::default();
        map.insert(x.clone(), y.clone());
        map.insert(y.clone(), x.clone());
        let (out, report) = resolve_redirects(&[link(&a, &x, 0.5)].into_iter().collect(), &map);
        assert!(out.is_empty());
        assert_eq!(report.dropped_links, 1);
        assert_eq!(report.cyclic_endpoints, vec![x.iri().to_string()]);
    }

    #[test]
    fn overlong_redirect_chain_counts_as_cycle() {
        let mut map = RedirectMap::default();
        for i in 0..=MAX_REDIRECT_DEPTH {
            map.insert(e("b", &format!("R{i}")), e("b", &format!("R{}", i + 1)));
        }
        assert_eq!(map.resolve(&e("b", "R0")), Resolution::Cycle);
        assert_eq!(map.resolve(&e("b", "R1")), Resolution::Target(e("b", &format!("R{}", MAX_REDIRECT_DEPTH + 1))));
    }

    #[test]
    fn fan_out_is_removed_entirely() {
        let (a1, b1, b2) = (e("a", "1"), e("b", "1"), e("b", "2"));
        let input: Alignment = [link(&a1, &b1, 0.5), link(&a1, &b2, 0.5)].into_iter().collect();
        assert!(enforce_injectivity(&input).is_empty());
    }

    #[test]
    fn injective_input_is_unchanged() {
        let input: Alignment = [link(&e("a", "1"), &e("b", "1"), 0.5), link(&e("a", "2"), &e("b", "2"), 0.5)]
            .into_iter()
            .collect();
        assert_eq!(enforce_injectivity(&input), input);
    }

    #[test]
    fn fan_in_removed_other_pair_kept() {
        let (a1, a2, a3, b1, c1) = (e("a", "1"), e("a", "2"), e("a", "3"), e("b", "1"), e("c", "1"));
        let input: Alignment = [link(&a1, &b1, 0.5), link(&a2, &b1, 0.5), link(&a3, &c1, 0.5)]
            .into_iter()
            .collect();
        let out = enforce_injectivity(&input);
        assert_eq!(out.len(), 1);
        assert!(out.contains(&a3, &c1));
    }

    #[test]
    fn injectivity_is_per_wiki_pair() {
        let (a1, b1, c1) = (e("a", "1"), e("b", "1"), e("c", "1"));
        let input: Alignment = [link(&a1, &b1, 0.5), link(&a1, &c1, 0.5)].into_iter().collect();
        assert_eq!(enforce_injectivity(&input), input);
    }

    #[test]
    fn disambiguation_heuristics() {
        let mut p = page("a", "Frodo (disambiguation)");
        assert_eq!(
            detect_disambiguation(&p),
            DisambiguationFlags { by_label: true, by_first_sentence: false, by_category: false }
        );
        p = page("a", "Frodo");
        p.first_sentence = "Frodo may refer to:".into();
        assert!(detect_disambiguation(&p).by_first_sentence);
        p.first_sentence = "Frodo might  refer to".into();
        assert!(detect_disambiguation(&p).by_first_sentence);
        p.first_sentence = "Frodo may be referred to as".into();
        assert!(!detect_disambiguation(&p).any());
        p.categories = vec!["Disambiguation pages".into()];
        assert!(detect_disambiguation(&p).by_category);
    }

    #[test]
    fn anchors_disambiguations_and_dead_links_are_dropped() {
        let w = WikiId::new("b").unwrap();
        let (a, frodo, anchored, disamb, dead) = (
            e("a", "Frodo"),
            e("b", "Frodo"),
            EntityRef::for_page(&w, "Frodo", Some("Early_life")),
            e("b", "Frodo (disambiguation)"),
            e("b", "Deleted"),
        );
        let mut presence = PresenceIndex::default();
        presence.insert_wiki(w, [frodo.iri_arc().clone(), disamb.iri_arc().clone()]);
        let disambiguation: HashSet<_> = [disamb.clone()].into_iter().collect();
        let input: Alignment = [&frodo, &anchored, &disamb, &dead]
            .into_iter()
            .map(|t| link(&a, t, 0.5))
            .collect();
        let (out, report) = drop_anchor_and_dead_links(&input, &presence, &disambiguation);
        assert_eq!(out.len(), 1);
        assert!(out.contains(&a, &frodo));
        assert_eq!(
            report,
            CleanupReport { removed_anchor: 1, removed_disambiguation: 1, removed_dead: 1 }
        );
    }

    #[test]
    fn exterior_wikis_survive_dead_link_check() {
        let presence = PresenceIndex::default();
        assert!(presence.is_alive(&e("wikipedia", "Frodo")));
    }
}
