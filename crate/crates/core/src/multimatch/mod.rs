//! Multi-source matching: order KGs by fingerprint similarity, then match
//! and merge them pairwise along the clustering tree.

pub mod fingerprint;
pub mod hac;
pub mod matcher;
pub mod merge;

pub use fingerprint::{fingerprints, KgFingerprint};
pub use hac::{hac_order, MergeStep, MergeTree};
pub use matcher::{matcher_by_name, ExternalMatcher, Matcher, MatcherError, StringMatcher};
pub use merge::{expand_step, merge_graphs, MergedGraph};

use crate::model::{Alignment, Correspondence, EntityRef, KnowledgeGraph, WikiId};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashSet};

#[derive(Debug, thiserror::Error)]
pub enum MultiMatchError {
    #[error("need at least two graphs, got {0}")]
    TooFewGraphs(usize),
    #[error("alignment is not one-to-one at {0}")]
    NotOneToOne(String),
    #[error("correspondence {0} -> {1} does not connect the two graphs")]
    ForeignEndpoint(String, String),
    #[error("merge tree leaves do not match the input graphs")]
    TreeMismatch,
}

/// Greedy 1:1 filter: by confidence descending, then source and target IRI
/// ascending, keep a link when neither endpoint was kept before.
pub fn naive_descending_extraction(a: &Alignment) -> Alignment {
    let mut links: Vec<&Correspondence> = a.iter().collect();
    links.sort_by(|x, y| {
        y.confidence
            .total_cmp(&x.confidence)
            .then_with(|| x.source.cmp(&y.source))
            .then_with(|| x.target.cmp(&y.target))
    });
    let mut used: HashSet<&EntityRef> = HashSet::new();
    let mut out = Alignment::new();
    for c in links {
        if !used.contains(&c.source) && !used.contains(&c.target) {
            used.insert(&c.source);
            used.insert(&c.target);
            out.insert(c.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub distance: f64,
    pub raw_links: usize,
    pub kept_links: usize,
    pub expanded_links: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub alignment: Alignment,
    pub matcher_calls: usize,
    pub steps: Vec<StepReport>,
}

impl MatchOutcome {
    pub fn failures(&self) -> usize {
        self.steps.iter().filter(|s| s.error.is_some()).count()
    }
}

fn wiki_names(g: &MergedGraph) -> Vec<String> {
    g.wikis().iter().map(|w| w.as_str().to_string()).collect()
}

/// Keeps links that join a representative of `l` with one of `r`, oriented
/// left to right.
fn restrict_to_sides(a: &Alignment, l: &MergedGraph, r: &MergedGraph) -> (Alignment, usize) {
    let mut out = Alignment::new();
    let mut foreign = 0;
    for c in a {
        if l.is_representative(&c.source) && r.is_representative(&c.target) {
            out.insert_max(c.clone());
        } else if r.is_representative(&c.source) && l.is_representative(&c.target) {
            out.insert_max(c.flipped());
        } else {
            foreign += 1;
        }
    }
    (out, foreign)
}

/// Walks the merge tree bottom-up. Each step calls the matcher once on the
/// two current graphs, reduces the result to 1:1, records it expanded to
/// original IRIs and merges. A failing matcher call leaves that step
/// without links and the graphs are merged disjointly. Earlier steps are
/// never revisited.
pub fn incremental_match(
    kgs: Vec<KnowledgeGraph>,
    matcher: &dyn Matcher,
    tree: &MergeTree,
) -> Result<MatchOutcome, MultiMatchError> {
    let n = tree.leaves.len();
    let mut by_wiki: BTreeMap<WikiId, KnowledgeGraph> = kgs.into_iter().map(|k| (k.wiki().clone(), k)).collect();
    if by_wiki.len() != n || tree.leaves.iter().collect::<BTreeSet<_>>().len() != n {
        return Err(MultiMatchError::TreeMismatch);
    }
    let mut nodes: Vec<Option<MergedGraph>> = Vec::with_capacity(n + tree.steps.len());
    for w in &tree.leaves {
        let kg = by_wiki.remove(w).ok_or(MultiMatchError::TreeMismatch)?;
        nodes.push(Some(MergedGraph::leaf(kg)));
    }

    let mut out = MatchOutcome { alignment: Alignment::new(), matcher_calls: 0, steps: Vec::new() };
    for step in &tree.steps {
        let take = |nodes: &mut Vec<Option<MergedGraph>>, i: usize| nodes.get_mut(i).and_then(Option::take);
        let l = take(&mut nodes, step.left).ok_or(MultiMatchError::TreeMismatch)?;
        let r = take(&mut nodes, step.right).ok_or(MultiMatchError::TreeMismatch)?;
        let mut report = StepReport {
            left: wiki_names(&l),
            right: wiki_names(&r),
            distance: step.distance,
            raw_links: 0,
            kept_links: 0,
            expanded_links: 0,
            error: None,
        };
        out.matcher_calls += 1;
        let kept = match matcher.match_graphs(l.graph(), r.graph()) {
            Ok(raw) => {
                report.raw_links = raw.len();
                let (usable, foreign) = restrict_to_sides(&raw, &l, &r);
                if foreign > 0 {
                    log::warn!("{}: dropped {foreign} links outside the matched graphs", matcher.name());
                }
                naive_descending_extraction(&usable)
            }
            Err(e) => {
                log::error!("matcher {} failed on {:?} x {:?}: {e}", matcher.name(), report.left, report.right);
                report.error = Some(e.to_string());
                Alignment::new()
            }
        };
        let expanded = expand_step(&l, &r, &kept)?;
        report.kept_links = kept.len();
        report.expanded_links = expanded.len();
        for c in expanded.iter() {
            out.alignment.insert_max(c.clone());
        }
        nodes.push(Some(merge_graphs(l, r, &kept)?));
        out.steps.push(report);
    }
    Ok(out)
}

/// Fingerprints, clusters and incrementally matches all graphs. Fewer than
/// two graphs yield an empty alignment.
pub fn run_multimatch(kgs: Vec<KnowledgeGraph>, matcher: &dyn Matcher) -> Result<(MatchOutcome, Option<MergeTree>), MultiMatchError> {
    if kgs.len() < 2 {
        return Ok((MatchOutcome { alignment: Alignment::new(), matcher_calls: 0, steps: Vec::new() }, None));
    }
    let mut kgs = kgs;
    kgs.sort_by(|a, b| a.wiki().cmp(b.wiki()));
    let tree = hac_order(&fingerprints(&kgs))?;
    let outcome = incremental_match(kgs, matcher, &tree)?;
    Ok((outcome, Some(tree)))
}
