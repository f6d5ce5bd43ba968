//! Train/test variants of a gold alignment that keep closure inference
//! from leaking test pairs into training.

use crate::closure::compute_identity_sets;
use crate::model::{Alignment, EntityRef, WikiId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// Generator and permutation procedure used for every split. A split is
/// reproducible elsewhere given the seed and this procedure: group ids are
/// sorted lexicographically, then shuffled by descending Fisher-Yates
/// drawing `j` uniformly from `0..=i` as a u64.
pub const PRNG_ALGORITHM: &str = "chacha8-seed_from_u64/fisher-yates-descending/uniform-u64";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("test fraction {0} is not strictly between 0 and 1")]
    BadFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSplit<G> {
    pub train: BTreeSet<G>,
    pub test: BTreeSet<G>,
    /// One side ended up empty while there were items to split.
    pub degenerate: bool,
}

/// Seeded permutation of `ids` (which must already be sorted).
pub fn shuffle_groups<G: Clone>(ids: &[G], seed: u64) -> Vec<G> {
    let mut out = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..out.len()).rev() {
        let j = rng.gen_range(0..=i as u64) as usize;
        out.swap(i, j);
    }
    out
}

/// Shuffles the groups and moves whole groups to test until the test item
/// count first reaches `test_fraction` of the total.
pub fn group_shuffle_split<G: Ord + Clone>(
    sizes: &BTreeMap<G, usize>,
    test_fraction: f64,
    seed: u64,
) -> Result<GroupSplit<G>, SplitError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SplitError::BadFraction(test_fraction));
    }
    let ids: Vec<G> = sizes.keys().cloned().collect();
    let total: usize = sizes.values().sum();
    let target = test_fraction * total as f64;
    let mut split = GroupSplit { train: BTreeSet::new(), test: BTreeSet::new(), degenerate: false };
    let mut taken = 0usize;
    for g in shuffle_groups(&ids, seed) {
        if (taken as f64) < target {
            taken += sizes[&g];
            split.test.insert(g);
        } else {
            split.train.insert(g);
        }
    }
    let train_items = total - taken;
    split.degenerate = total > 0 && (taken == 0 || train_items == 0);
    if split.degenerate {
        log::warn!("group split is degenerate: {taken} test items, {train_items} train items");
    }
    Ok(split)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Shared,
    Exclusive,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "shared" => Some(Variant::Shared),
            "exclusive" => Some(Variant::Exclusive),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Shared => "shared",
            Variant::Exclusive => "exclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitBundle {
    pub variant: Variant,
    pub train: Alignment,
    pub test: Alignment,
    /// Links crossing the train/test boundary (exclusive variant only).
    pub dropped: Alignment,
    pub grouping: BTreeMap<(EntityRef, EntityRef), String>,
    pub seed: u64,
    pub degenerate: bool,
}

impl SplitBundle {
    pub fn leakage_dropped(&self) -> usize {
        self.dropped.len()
    }

    pub fn test_fraction(&self) -> f64 {
        let n = self.train.len() + self.test.len();
        if n == 0 {
            0.0
        } else {
            self.test.len() as f64 / n as f64
        }
    }

    pub fn report(&self) -> SplitReport {
        let groups: BTreeSet<&String> = self.grouping.values().collect();
        SplitReport {
            variant: self.variant,
            seed: self.seed,
            prng: PRNG_ALGORITHM,
            groups: groups.len(),
            train: self.train.len(),
            test: self.test.len(),
            leakage_dropped: self.leakage_dropped(),
            test_fraction: self.test_fraction(),
            degenerate: self.degenerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SplitReport {
    pub variant: Variant,
    pub seed: u64,
    pub prng: &'static str,
    pub groups: usize,
    pub train: usize,
    pub test: usize,
    pub leakage_dropped: usize,
    pub test_fraction: f64,
    pub degenerate: bool,
}

/// Groups are identity clusters, so no cluster is split between train and
/// test and the closure of train infers nothing about test.
pub fn split_shared_kg(gold: &Alignment, test_fraction: f64, seed: u64) -> Result<SplitBundle, SplitError> {
    let mut grouping = BTreeMap::new();
    let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
    for cluster in compute_identity_sets(gold) {
        let id = cluster.members[0].iri().to_string();
        sizes.insert(id.clone(), cluster.internal_edges.len());
        for c in cluster.internal_edges {
            grouping.insert(c.key(), id.clone());
        }
    }
    let split = group_shuffle_split(&sizes, test_fraction, seed)?;
    let (mut train, mut test) = (Alignment::new(), Alignment::new());
    for c in gold {
        if split.test.contains(&grouping[&c.key()]) {
            test.insert(c.clone());
        } else {
            train.insert(c.clone());
        }
    }
    Ok(SplitBundle {
        variant: Variant::Shared,
        train,
        test,
        dropped: Alignment::new(),
        grouping,
        seed,
        degenerate: split.degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExclusiveConfig {
    /// Groups keep merging while some inter-group link count exceeds this.
    pub merge_threshold: usize,
    /// Largest group as a fraction of all KGs (at least two KGs).
    pub max_group_fraction: f64,
}

impl Default for ExclusiveConfig {
    fn default() -> Self {
        ExclusiveConfig { merge_threshold: 5, max_group_fraction: 0.05 }
    }
}

/// KG communities by greedy agglomeration: merge the group pair with the
/// most links between them while that count exceeds the threshold and the
/// merged group stays within the size cap. Each group is named by its
/// smallest wiki id.
pub fn kg_communities(gold: &Alignment, config: ExclusiveConfig) -> BTreeMap<WikiId, String> {
    let wikis: BTreeSet<WikiId> = gold.entities().iter().map(|e| e.wiki().clone()).collect();
    let cap = ((config.max_group_fraction * wikis.len() as f64).ceil() as usize).max(2);
    let mut members: BTreeMap<String, BTreeSet<WikiId>> =
        wikis.iter().map(|w| (w.as_str().to_string(), BTreeSet::from([w.clone()]))).collect();
    let mut group_of: BTreeMap<WikiId, String> = wikis.iter().map(|w| (w.clone(), w.as_str().to_string())).collect();
    let mut weight: BTreeMap<(String, String), usize> = BTreeMap::new();
    for c in gold {
        let (a, b) = (&group_of[c.source.wiki()], &group_of[c.target.wiki()]);
        if a != b {
            let key = if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
            *weight.entry(key).or_default() += 1;
        }
    }
    loop {
        let best = weight
            .iter()
            .filter(|((a, b), &w)| w > config.merge_threshold && members[a].len() + members[b].len() <= cap)
            .max_by(|x, y| x.1.cmp(y.1).then_with(|| y.0.cmp(x.0)))
            .map(|(k, _)| k.clone());
        let Some((a, b)) = best else { break };
        // `a < b`, so the merged group keeps the name `a`.
        let absorbed = members.remove(&b).expect("live group");
        for w in &absorbed {
            group_of.insert(w.clone(), a.clone());
        }
        members.get_mut(&a).expect("live group").extend(absorbed);
        let old = std::mem::take(&mut weight);
        for ((x, y), w) in old {
            let rename = |g: String| if g == b { a.clone() } else { g };
            let (x, y) = (rename(x), rename(y));
            if x != y {
                let key = if x < y { (x, y) } else { (y, x) };
                *weight.entry(key).or_default() += w;
            }
        }
    }
    group_of
}

/// Groups are KG communities; links between a train KG and a test KG are
/// dropped from both sides.
pub fn split_exclusive_kg(
    gold: &Alignment,
    test_fraction: f64,
    seed: u64,
    config: ExclusiveConfig,
) -> Result<SplitBundle, SplitError> {
    let group_of = kg_communities(gold, config);
    let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
    for c in gold {
        *sizes.entry(group_of[c.source.wiki()].clone()).or_default() += 1;
        *sizes.entry(group_of[c.target.wiki()].clone()).or_default() += 1;
    }
    let split = group_shuffle_split(&sizes, test_fraction, seed)?;
    let (mut train, mut test, mut dropped) = (Alignment::new(), Alignment::new(), Alignment::new());
    let mut grouping = BTreeMap::new();
    for c in gold {
        let (gs, gt) = (&group_of[c.source.wiki()], &group_of[c.target.wiki()]);
        grouping.insert(c.key(), gs.min(gt).clone());
        match (split.test.contains(gs), split.test.contains(gt)) {
            (true, true) => test.insert(c.clone()),
            (false, false) => train.insert(c.clone()),
            _ => dropped.insert(c.clone()),
        };
    }
    Ok(SplitBundle {
        variant: Variant::Exclusive,
        train,
        test,
        dropped,
        grouping,
        seed,
        degenerate: split.degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subsets {
    /// KGs with at least one gold endpoint.
    pub gold_set: BTreeSet<WikiId>,
    /// The largest KGs by triple count, ties by wiki id.
    pub top_n: Vec<WikiId>,
}

pub fn select_subsets(kg_sizes: &BTreeMap<WikiId, usize>, gold: &Alignment, n: usize) -> Subsets {
    let gold_set = gold.entities().iter().map(|e| e.wiki().clone()).collect();
    if n > kg_sizes.len() {
        log::warn!("asked for {n} KGs, only {} available", kg_sizes.len());
    }
    let mut by_size: Vec<(&WikiId, usize)> = kg_sizes.iter().map(|(w, &s)| (w, s)).collect();
    by_size.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Subsets { gold_set, top_n: by_size.into_iter().take(n).map(|(w, _)| w.clone()).collect() }
}
