//! Candidate link mining.
//!
//! Links whose target page carries the same title as the source page are
//! used as seeds. The section titles that hold seeds are searched for the
//! substring that best trades off coverage of seed links against length;
//! every inter-wiki link in a section containing that marker becomes a
//! candidate correspondence, including links between differently titled
//! pages.

use crate::model::{
    normalize_label, Alignment, Correspondence, EntityRef, PageRecord, Provenance, WikiId,
    UNSET_CONFIDENCE,
};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};
use thiserror::Error;

pub const DEFAULT_MARKER: &str = "link";
/// Minimum number of seed links before a marker is learned.
pub const MIN_SEED_LINKS: usize = 5;
/// The learned marker must yield more than this share of same-title links.
pub const MIN_SAME_TITLE_FRACTION: f64 = 0.2;
/// Section titles are truncated to this many characters for substring enumeration.
pub const MAX_ENUMERATED_TITLE_CHARS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum ExtractError {
    #[error("candidate substring {0:?} is shorter than two characters")]
    TooShort(String),
    #[error("no seed links observed")]
    NoSeeds,
}

/// Normalized page titles of every wiki in the farm.
#[derive(Debug, Default, Clone)]
pub struct FarmTitles {
    titles: HashMap<WikiId, HashSet<String>>,
}

impl FarmTitles {
    pub fn from_pages<'a>(pages: impl IntoIterator<Item = &'a PageRecord>) -> Self {
        let mut titles: HashMap<WikiId, HashSet<String>> = HashMap::new();
        for p in pages {
            titles.entry(p.wiki.clone()).or_default().insert(normalize_label(&p.title));
        }
        FarmTitles { titles }
    }

    pub fn contains(&self, wiki: &WikiId, title: &str) -> bool {
        self.titles
            .get(wiki)
            .is_some_and(|t| t.contains(&normalize_label(title)))
    }
}

/// Seed-link counts per normalized section title of one wiki.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SectionTitleStats {
    /// Seed links per section title.
    pub seed_counts: BTreeMap<String, usize>,
    /// All inter-wiki links per section title, seeds included.
    pub link_counts: BTreeMap<String, usize>,
    pub total_seed_links: usize,
    /// Length in characters of the longest title holding a seed.
    pub longest_title_len: usize,
}

impl SectionTitleStats {
    /// Builds stats directly from `(section title, seed count)` pairs; every
    /// link is treated as a seed.
    pub fn from_seed_counts<'a>(counts: impl IntoIterator<Item = (&'a str, usize)>) -> Self {
        let mut stats = SectionTitleStats::default();
        for (title, n) in counts {
            stats.add(&normalize_label(title), n, n);
        }
        stats
    }

    fn add(&mut self, title: &str, seeds: usize, links: usize) {
        if seeds > 0 {
            *self.seed_counts.entry(title.to_string()).or_default() += seeds;
            self.total_seed_links += seeds;
            self.longest_title_len = self.longest_title_len.max(title.chars().count());
        }
        if links > 0 {
            *self.link_counts.entry(title.to_string()).or_default() += links;
        }
    }

    /// Seed links whose section title contains `text`.
    pub fn covered(&self, text: &str) -> usize {
        self.seed_counts
            .iter()
            .filter(|(t, _)| t.contains(text))
            .map(|(_, n)| n)
            .sum()
    }

    /// All links whose section title contains `text`.
    pub fn links_under(&self, text: &str) -> usize {
        self.link_counts
            .iter()
            .filter(|(t, _)| t.contains(text))
            .map(|(_, n)| n)
            .sum()
    }
}

/// Counts seed links of one wiki's pages, grouped by containing section.
pub fn collect_seed_links(pages: &[PageRecord], farm: &FarmTitles) -> SectionTitleStats {
    let mut stats = SectionTitleStats::default();
    for page in pages {
        let own = normalize_label(&page.title);
        for section in &page.sections {
            if section.links.is_empty() {
                continue;
            }
            let seeds = section
                .links
                .iter()
                .filter(|l| {
                    normalize_label(&l.target_title) == own && farm.contains(&l.target_wiki, &l.target_title)
                })
                .count();
            stats.add(&normalize_label(&section.title), seeds, section.links.len());
        }
    }
    stats
}

/// Harmonic mean of seed coverage and relative length of `text`.
pub fn substring_quality(text: &str, stats: &SectionTitleStats) -> Result<f64, ExtractError> {
    let len = text.chars().count();
    if len < 2 {
        return Err(ExtractError::TooShort(text.to_string()));
    }
    if stats.total_seed_links == 0 {
        return Err(ExtractError::NoSeeds);
    }
    Ok(quality(stats.covered(text), len, stats))
}

fn quality(covered: usize, len: usize, stats: &SectionTitleStats) -> f64 {
    if covered == 0 {
        return 0.0;
    }
    let coverage = covered as f64 / stats.total_seed_links as f64;
    let len_ratio = len as f64 / stats.longest_title_len as f64;
    2.0 * coverage * len_ratio / (coverage + len_ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    TooFewSeeds,
    LowSameTitleFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkerChoice {
    pub marker: String,
    /// Quality of the returned marker (0 when no seeds exist).
    pub quality: f64,
    pub fallback: Option<Fallback>,
}

/// Every distinct substring of length ≥ 2 of the seeded section titles.
pub fn candidate_substrings(stats: &SectionTitleStats) -> HashSet<String> {
    let mut out = HashSet::new();
    for title in stats.seed_counts.keys() {
        let chars: Vec<char> = title.chars().take(MAX_ENUMERATED_TITLE_CHARS).collect();
        for start in 0..chars.len() {
            for end in start + 2..=chars.len() {
                out.insert(chars[start..end].iter().collect());
            }
        }
    }
    out
}

/// Quality as an exact fraction `2·cov·len / (cov·longest + len·total)`,
/// equal to the harmonic mean after clearing denominators.
fn exact_quality(covered: usize, len: usize, stats: &SectionTitleStats) -> (u128, u128) {
    let (c, l) = (covered as u128, len as u128);
    let num = 2 * c * l;
    let den = c * stats.longest_title_len as u128 + l * stats.total_seed_links as u128;
    (num, den)
}

/// Best-quality substring alone, without the fallback rules; ties go to the
/// longer, then lexicographically smaller, substring.
pub fn best_substring(stats: &SectionTitleStats) -> Option<(String, f64)> {
    if stats.total_seed_links == 0 {
        return None;
    }
    let mut best: Option<(String, (u128, u128), usize)> = None;
    for s in candidate_substrings(stats) {
        let len = s.chars().count();
        let (num, den) = exact_quality(stats.covered(&s), len, stats);
        let better = match &best {
            None => true,
            Some((bs, (bn, bd), bl)) => {
                let (lhs, rhs) = (num * bd, bn * den);
                lhs > rhs || (lhs == rhs && (len > *bl || (len == *bl && s < *bs)))
            }
        };
        if better {
            best = Some((s, (num, den), len));
        }
    }
    best.map(|(s, _, len)| {
        let q = quality(stats.covered(&s), len, stats);
        (s, q)
    })
}

/// Picks the section marker for one wiki, falling back to `default_marker`
/// when fewer than [`MIN_SEED_LINKS`] seeds exist or when the learned
/// marker extracts too few same-title links.
pub fn select_section_marker(stats: &SectionTitleStats, default_marker: &str) -> MarkerChoice {
    let fallback_quality = |stats: &SectionTitleStats| {
        substring_quality(default_marker, stats).unwrap_or(0.0)
    };
    if stats.total_seed_links < MIN_SEED_LINKS {
        return MarkerChoice {
            marker: default_marker.to_string(),
            quality: fallback_quality(stats),
            fallback: Some(Fallback::TooFewSeeds),
        };
    }
    let (marker, q) = best_substring(stats).expect("seeds exist");
    let extracted = stats.links_under(&marker);
    let same_title = stats.covered(&marker);
    if extracted == 0 || (same_title as f64 / extracted as f64) <= MIN_SAME_TITLE_FRACTION {
        return MarkerChoice {
            marker: default_marker.to_string(),
            quality: fallback_quality(stats),
            fallback: Some(Fallback::LowSameTitleFraction),
        };
    }
    MarkerChoice { marker, quality: q, fallback: None }
}

/// Per-wiki outcome of marker selection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkerReport {
    pub wiki: String,
    pub marker: String,
    pub quality: f64,
    pub seed_count: usize,
    pub fallback: Option<Fallback>,
}

impl MarkerReport {
    pub fn tsv_row(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.wiki, self.marker, self.quality, self.seed_count)
    }
}

/// Links of `pages` lying in sections whose normalized title contains `marker`.
pub fn links_under_marker(pages: &[PageRecord], marker: &str) -> Vec<Correspondence> {
    let marker = normalize_label(marker);
    let mut out = Vec::new();
    for page in pages {
        let source = EntityRef::for_page(&page.wiki, &page.title, None);
        for section in &page.sections {
            if !normalize_label(&section.title).contains(&marker) {
                continue;
            }
            for link in &section.links {
                let target =
                    EntityRef::for_page(&link.target_wiki, &link.target_title, link.fragment.as_deref());
                if let Ok(c) =
                    Correspondence::new(source.clone(), target, UNSET_CONFIDENCE, Provenance::Direct)
                {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Mines candidate correspondences from the page dumps of a whole farm.
/// Markers are chosen per wiki, independently of every other wiki's pages.
pub fn extract_candidate_alignment(
    pages: &[PageRecord],
    default_marker: &str,
) -> (Alignment, Vec<MarkerReport>) {
    let farm = FarmTitles::from_pages(pages);
    let mut by_wiki: BTreeMap<&WikiId, Vec<PageRecord>> = BTreeMap::new();
    for p in pages {
        by_wiki.entry(&p.wiki).or_default().push(p.clone());
    }
    let per_wiki: Vec<(MarkerReport, Vec<Correspondence>)> = by_wiki
        .into_par_iter()
        .map(|(wiki, wiki_pages)| {
            let stats = collect_seed_links(&wiki_pages, &farm);
            let choice = select_section_marker(&stats, default_marker);
            let links = links_under_marker(&wiki_pages, &choice.marker);
            let report = MarkerReport {
                wiki: wiki.to_string(),
                marker: choice.marker,
                quality: choice.quality,
                seed_count: stats.total_seed_links,
                fallback: choice.fallback,
            };
            (report, links)
        })
        .collect();

    let mut alignment = Alignment::new();
    let mut reports = Vec::with_capacity(per_wiki.len());
    for (report, links) in per_wiki {
        alignment.extend(links);
        reports.push(report);
    }
    (alignment, reports)
}
