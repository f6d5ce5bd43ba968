//! Seeded generator of small wiki farms with a planted identity truth.
//!
//! Every entity is hosted by one or more wikis. Each hosting page links to
//! the entity's pages in the other hosting wikis from an external-links
//! section, so the planted truth is every cross-wiki pair of copies. Titles
//! may differ between wikis (hard positives) and links may go through
//! redirects. Noise is injected per page at configurable rates.

use crate::model::{
    write_ntriples, Alignment, Correspondence, EntityRef, InterWikiLink, KnowledgeGraph, Literal, Namespace,
    PageRecord, Section, Term, Triple, WikiId, RDFS_LABEL, RDF_TYPE,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Wiki outside the farm that pages also link to.
pub const EXTERIOR_WIKI: &str = "wikipedia";

const SYLLABLES: [&str; 24] = [
    "ba", "dor", "el", "fin", "gal", "hal", "ith", "kor", "lin", "mor", "nar", "or", "pel", "quen", "ros", "sil",
    "tar", "ul", "val", "wen", "xan", "yr", "zir", "ang",
];
const EPITHETS: [&str; 8] = ["the Elder", "the Bold", "of the North", "the Grey", "the Younger", "of Old", "the Wise", "the Lost"];
const KINDS: [&str; 4] = ["Character", "Location", "Item", "Event"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("rate {name} = {value} is outside [0, 1]")]
    BadRate { name: &'static str, value: f64 },
    #[error("need at least one entity and two wikis")]
    TooSmall,
}

/// Per-page probabilities of each noise type.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseRates {
    /// An extra link to a wrong page in a wiki that hosts the entity.
    pub fan_out: f64,
    /// A link to a same-titled disambiguation page in a wiki without the entity.
    pub disambiguation: f64,
    /// A link to a page that does not exist.
    pub dead: f64,
    /// A link into a section of an unrelated page.
    pub anchor: f64,
    /// One correct link replaced by a link to a wrong page in the same wiki.
    pub wrong: f64,
}

impl NoiseRates {
    /// Every noise type at the same rate.
    pub fn mixed(rate: f64) -> Self {
        NoiseRates { fan_out: rate, disambiguation: rate, dead: rate, anchor: rate, wrong: rate }
    }

    fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("fan_out", self.fan_out),
            ("disambiguation", self.disambiguation),
            ("dead", self.dead),
            ("anchor", self.anchor),
            ("wrong", self.wrong),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub wikis: usize,
    pub entities: usize,
    /// Fraction of entities hosted by more than one wiki.
    pub shared_fraction: f64,
    /// Most wikis hosting one entity.
    pub max_copies: usize,
    /// Probability that a wiki titles an entity with a variant name.
    pub hard_positive_rate: f64,
    /// Probability that a link goes to a redirect of its target.
    pub redirect_rate: f64,
    /// Probability that a linked pair is linked in one direction only.
    pub one_way_rate: f64,
    /// Probability that a page also links to the exterior wiki.
    pub exterior_rate: f64,
    pub noise: NoiseRates,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            wikis: 20,
            entities: 500,
            shared_fraction: 0.8,
            max_copies: 5,
            hard_positive_rate: 0.15,
            redirect_rate: 0.05,
            one_way_rate: 0.1,
            exterior_rate: 0.1,
            noise: NoiseRates::default(),
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.entities == 0 || self.wikis < 2 {
            return Err(SynthError::TooSmall);
        }
        let rates = [
            ("shared_fraction", self.shared_fraction),
            ("hard_positive_rate", self.hard_positive_rate),
            ("redirect_rate", self.redirect_rate),
            ("one_way_rate", self.one_way_rate),
            ("exterior_rate", self.exterior_rate),
        ];
        for (name, value) in rates.into_iter().chain(self.noise.named()) {
            if !(0.0..=1.0).contains(&value) {
                return Err(SynthError::BadRate { name, value });
            }
        }
        Ok(())
    }
}

/// Counts of injected noise, by type.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct NoiseCounts {
    pub fan_out: usize,
    pub disambiguation: usize,
    pub dead: usize,
    pub anchor: usize,
    pub wrong: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticFarm {
    pub pages: Vec<PageRecord>,
    pub kgs: Vec<KnowledgeGraph>,
    /// Every cross-wiki pair of copies of the same entity.
    pub truth: Alignment,
    pub noise: NoiseCounts,
}

impl SyntheticFarm {
    /// Writes `pages/<wiki>.jsonl`, `kgs/<wiki>.nt` and `truth.tsv`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        let (pages_dir, kgs_dir) = (dir.join("pages"), dir.join("kgs"));
        fs::create_dir_all(&pages_dir)?;
        fs::create_dir_all(&kgs_dir)?;
        let mut by_wiki: BTreeMap<&WikiId, Vec<&PageRecord>> = BTreeMap::new();
        for p in &self.pages {
            by_wiki.entry(&p.wiki).or_default().push(p);
        }
        for (wiki, pages) in by_wiki {
            let mut w = BufWriter::new(fs::File::create(pages_dir.join(format!("{wiki}.jsonl")))?);
            for p in pages {
                writeln!(w, "{}", p.to_json())?;
            }
            w.flush()?;
        }
        for kg in &self.kgs {
            let mut w = BufWriter::new(fs::File::create(kgs_dir.join(format!("{}.nt", kg.wiki())))?);
            write_ntriples(kg, &mut w)?;
            w.flush()?;
        }
        crate::model::write_alignment(&self.truth, &dir.join("truth.tsv")).map_err(std::io::Error::other)
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn entity_names(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    // Single words run out after ~14k names; repeated collisions switch to two.
    let mut misses = 0;
    while out.len() < n {
        let mut word = || {
            let parts = rng.gen_range(2..=3);
            capitalize(&(0..parts).map(|_| *SYLLABLES.choose(rng).unwrap()).collect::<String>())
        };
        let name = if out.len() % 3 == 0 || misses > 8 { format!("{} {}", word(), word()) } else { word() };
        if seen.insert(name.to_lowercase()) {
            out.push(name);
            misses = 0;
        } else {
            misses += 1;
        }
    }
    out
}

struct Entity {
    name: String,
    variant: String,
    kind: &'static str,
    related: usize,
    /// Hosting wiki index → title used there.
    titles: BTreeMap<usize, String>,
}

struct PageDraft {
    wiki: usize,
    entity: usize,
    external: Vec<InterWikiLink>,
    see_also: Vec<InterWikiLink>,
    external_title: &'static str,
}

/// Builds a farm from the configuration; the same configuration always
/// yields the same farm.
pub fn generate_synthetic_farm(config: &SynthConfig) -> Result<SyntheticFarm, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let wikis: Vec<WikiId> = (0..config.wikis)
        .map(|i| WikiId::new(&format!("wiki{i:03}")).expect("valid id"))
        .collect();
    let names = entity_names(&mut rng, config.entities);
    let max_copies = config.max_copies.clamp(2, config.wikis);

    let mut entities: Vec<Entity> = Vec::with_capacity(config.entities);
    for (i, name) in names.into_iter().enumerate() {
        let copies = if rng.gen_bool(config.shared_fraction) { rng.gen_range(2..=max_copies) } else { 1 };
        let mut hosts: Vec<usize> = (0..config.wikis).collect();
        hosts.shuffle(&mut rng);
        hosts.truncate(copies);
        let variant = format!("{name} {}", EPITHETS.choose(&mut rng).unwrap());
        let titles = hosts
            .into_iter()
            .map(|w| (w, if rng.gen_bool(config.hard_positive_rate) { variant.clone() } else { name.clone() }))
            .collect();
        entities.push(Entity {
            name,
            variant,
            kind: KINDS[i % KINDS.len()],
            related: rng.gen_range(0..config.entities),
            titles,
        });
    }

    let link = |wiki: usize, title: &str, fragment: Option<&str>| InterWikiLink {
        target_wiki: wikis[wiki].clone(),
        target_title: title.to_string(),
        fragment: fragment.map(str::to_string),
    };

    // Pages and the directed links between copies.
    let mut drafts: BTreeMap<(usize, usize), PageDraft> = BTreeMap::new();
    let mut redirects: BTreeMap<(usize, String), String> = BTreeMap::new();
    let mut truth = Alignment::new();
    for (id, e) in entities.iter().enumerate() {
        for &w in e.titles.keys() {
            let external_title = if rng.gen_bool(0.7) { "External links" } else { "External link" };
            drafts.insert((w, id), PageDraft { wiki: w, entity: id, external: Vec::new(), see_also: Vec::new(), external_title });
        }
        let hosts: Vec<(&usize, &String)> = e.titles.iter().collect();
        for (i, &(&wa, ta)) in hosts.iter().enumerate() {
            for &(&wb, tb) in &hosts[i + 1..] {
                let a = EntityRef::for_page(&wikis[wa], ta, None);
                let b = EntityRef::for_page(&wikis[wb], tb, None);
                truth.insert(Correspondence::direct(a, b, 1.0).expect("valid"));
                let (fwd, bwd) = if rng.gen_bool(config.one_way_rate) {
                    if rng.gen_bool(0.5) { (true, false) } else { (false, true) }
                } else {
                    (true, true)
                };
                for (from, to, to_title, go) in [(wa, wb, tb, fwd), (wb, wa, ta, bwd)] {
                    if !go {
                        continue;
                    }
                    let target_title = if rng.gen_bool(config.redirect_rate) {
                        let alias = if to_title == &e.name { e.variant.clone() } else { e.name.clone() };
                        redirects.insert((to, alias.clone()), to_title.clone());
                        alias
                    } else {
                        to_title.clone()
                    };
                    drafts.get_mut(&(from, id)).unwrap().external.push(link(to, &target_title, None));
                }
            }
        }
    }

    // See-also links to related entities elsewhere, exterior links and noise.
    let hosted_by: Vec<Vec<usize>> = (0..config.wikis)
        .map(|w| entities.iter().enumerate().filter(|(_, e)| e.titles.contains_key(&w)).map(|(i, _)| i).collect())
        .collect();
    let mut disambiguation_pages: BTreeSet<(usize, String)> = BTreeSet::new();
    let mut noise = NoiseCounts::default();
    let mut dead_counter = 0usize;
    let keys: Vec<(usize, usize)> = drafts.keys().copied().collect();
    for key in keys {
        let (w, id) = key;
        let e = &entities[id];
        let related = &entities[e.related];
        let mut see_also = Vec::new();
        if e.related != id {
            if let Some((&rw, rt)) = related.titles.iter().find(|(&rw, _)| rw != w) {
                see_also.push(link(rw, rt, None));
            }
        }
        let mut extra = Vec::new();
        if rng.gen_bool(config.exterior_rate) {
            extra.push(InterWikiLink {
                target_wiki: WikiId::new(EXTERIOR_WIKI).unwrap(),
                target_title: e.name.clone(),
                fragment: None,
            });
        }
        let absent: Vec<usize> = (0..config.wikis).filter(|x| !e.titles.contains_key(x)).collect();
        let draft = drafts.get_mut(&key).unwrap();
        let wrong_page = |rng: &mut ChaCha8Rng, target: usize| -> Option<String> {
            let choices: Vec<usize> = hosted_by[target].iter().copied().filter(|&x| x != id).collect();
            choices.choose(rng).map(|&x| entities[x].titles[&target].clone())
        };
        if rng.gen_bool(config.noise.fan_out) && !draft.external.is_empty() {
            let target = draft.external[rng.gen_range(0..draft.external.len())].target_wiki.clone();
            let t = wikis.iter().position(|x| *x == target).unwrap();
            if let Some(title) = wrong_page(&mut rng, t) {
                extra.push(link(t, &title, None));
                noise.fan_out += 1;
            }
        }
        if rng.gen_bool(config.noise.wrong) && !draft.external.is_empty() {
            let i = rng.gen_range(0..draft.external.len());
            let t = wikis.iter().position(|x| *x == draft.external[i].target_wiki).unwrap();
            if let Some(title) = wrong_page(&mut rng, t) {
                draft.external[i] = link(t, &title, None);
                noise.wrong += 1;
            }
        }
        if let Some(&t) = absent.choose(&mut rng) {
            if rng.gen_bool(config.noise.disambiguation) {
                disambiguation_pages.insert((t, e.name.clone()));
                extra.push(link(t, &e.name, None));
                noise.disambiguation += 1;
            }
        }
        if let Some(&t) = absent.choose(&mut rng) {
            if rng.gen_bool(config.noise.dead) {
                dead_counter += 1;
                extra.push(link(t, &format!("Lost page {dead_counter}"), None));
                noise.dead += 1;
            }
        }
        if let Some(&t) = absent.choose(&mut rng) {
            if rng.gen_bool(config.noise.anchor) {
                if let Some(&other) = hosted_by[t].choose(&mut rng) {
                    extra.push(link(t, &entities[other].titles[&t], Some("History")));
                    noise.anchor += 1;
                }
            }
        }
        draft.external.extend(extra);
        draft.see_also = see_also;
    }

    // Page records.
    let mut pages = Vec::new();
    for d in drafts.values() {
        let e = &entities[d.entity];
        let title = e.titles[&d.wiki].clone();
        let mut sections = vec![Section { title: String::new(), links: Vec::new() }];
        if !d.external.is_empty() {
            sections.push(Section { title: d.external_title.to_string(), links: d.external.clone() });
        }
        if !d.see_also.is_empty() {
            sections.push(Section { title: "See also".to_string(), links: d.see_also.clone() });
        }
        pages.push(PageRecord {
            wiki: wikis[d.wiki].clone(),
            title: title.clone(),
            label: title.clone(),
            is_redirect_to: None,
            categories: vec![format!("{}s", e.kind)],
            first_sentence: format!("{title} is a {}.", e.kind.to_lowercase()),
            sections,
        });
    }
    for ((w, alias), target) in &redirects {
        pages.push(PageRecord {
            wiki: wikis[*w].clone(),
            title: alias.clone(),
            label: alias.clone(),
            is_redirect_to: Some(target.clone()),
            categories: Vec::new(),
            first_sentence: String::new(),
            sections: Vec::new(),
        });
    }
    for (w, title) in &disambiguation_pages {
        pages.push(PageRecord {
            wiki: wikis[*w].clone(),
            title: title.clone(),
            label: title.clone(),
            is_redirect_to: None,
            categories: vec!["Disambiguation pages".to_string()],
            first_sentence: format!("{title} may refer to:"),
            sections: Vec::new(),
        });
    }
    pages.sort_by(|a, b| (&a.wiki, &a.title).cmp(&(&b.wiki, &b.title)));

    // Knowledge graphs: label, type, a literal name and a `home` link to the
    // related entity when this wiki hosts it too.
    let mut kgs = Vec::with_capacity(config.wikis);
    for (w, wiki) in wikis.iter().enumerate() {
        let mut triples = Vec::new();
        let home = EntityRef::in_namespace(wiki, Namespace::Property, "home");
        let name_prop = EntityRef::in_namespace(wiki, Namespace::Property, "name");
        for &id in &hosted_by[w] {
            let e = &entities[id];
            let title = &e.titles[&w];
            let s = EntityRef::for_page(wiki, title, None);
            let subject = Term::iri(s.iri());
            let class = EntityRef::in_namespace(wiki, Namespace::Class, e.kind);
            triples.push(Triple::new(subject.clone(), RDFS_LABEL, Term::Literal(Literal::plain(title.clone()))));
            triples.push(Triple::new(subject.clone(), RDF_TYPE, Term::iri(class.iri())));
            triples.push(Triple::new(subject.clone(), name_prop.iri(), Term::Literal(Literal::plain(e.name.clone()))));
            if let Some(rt) = entities[e.related].titles.get(&w) {
                if e.related != id {
                    let o = EntityRef::for_page(wiki, rt, None);
                    triples.push(Triple::new(subject, home.iri(), Term::iri(o.iri())));
                }
            }
        }
        for (dw, title) in &disambiguation_pages {
            if *dw == w {
                let s = EntityRef::for_page(wiki, title, None);
                triples.push(Triple::new(Term::iri(s.iri()), RDFS_LABEL, Term::Literal(Literal::plain(title.clone()))));
            }
        }
        kgs.push(KnowledgeGraph::from_triples(wiki.clone(), triples));
    }

    Ok(SyntheticFarm { pages, kgs, truth, noise })
}
