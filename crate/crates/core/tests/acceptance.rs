//! Acceptance checks. Each test prints one `[PASS]`/`[FAIL]` line with the
//! measured values; run with `--nocapture` to see them.

use kgfarm::closure::{add_transitive_links, repair_identity_sets, transitive_confidence, LinkGraph, TransitiveConfig};
use kgfarm::eval::{closure_pairs, evaluate, KindIndex};
use kgfarm::extract::{best_substring, candidate_substrings, select_section_marker, substring_quality, SectionTitleStats};
use kgfarm::model::{
    read_alignment, KnowledgeGraph, LabelIndex, Literal, Namespace, Term, Triple, RDFS_LABEL, RDF_TYPE,
};
use kgfarm::multimatch::{naive_descending_extraction, run_multimatch, Matcher, MatcherError, StringMatcher};
use kgfarm::pipeline::{run_pipeline, PipelineManifest};
use kgfarm::refine::{refine, PresenceIndex, RefineContext};
use kgfarm::schema::{induce_class_matches, sim_dice, sim_min, Metric};
use kgfarm::split::{split_exclusive_kg, split_shared_kg, ExclusiveConfig};
use kgfarm::synth::{generate_synthetic_farm, NoiseRates, SynthConfig};
use kgfarm::{Alignment, Correspondence, EntityRef, Provenance, WikiId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

fn report(n: u32, what: &str, ok: bool, detail: &str, elapsed: Duration) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("[{status}] criterion {n}: {what}: {detail} ({:.2}s)", elapsed.as_secs_f64());
}

fn w(s: &str) -> WikiId {
    WikiId::new(s).unwrap()
}

fn e(wiki: &str, t: &str) -> EntityRef {
    EntityRef::for_page(&w(wiki), t, None)
}

fn link(a: &EntityRef, b: &EntityRef, c: f64) -> Correspondence {
    Correspondence::direct(a.clone(), b.clone(), c).unwrap()
}

/// Components of the link graph, by plain union-find over entity indices.
fn components(a: &Alignment) -> Vec<BTreeSet<EntityRef>> {
    let ents: Vec<EntityRef> = a.entities().into_iter().collect();
    let idx: HashMap<&EntityRef, usize> = ents.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let mut parent: Vec<usize> = (0..ents.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for c in a {
        let (x, y) = (find(&mut parent, idx[&c.source]), find(&mut parent, idx[&c.target]));
        parent[x] = y;
    }
    let mut groups: BTreeMap<usize, BTreeSet<EntityRef>> = BTreeMap::new();
    for (i, x) in ents.iter().enumerate() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().insert(x.clone());
    }
    groups.into_values().collect()
}

fn has_same_wiki_pair(set: &BTreeSet<EntityRef>) -> bool {
    let wikis: HashSet<&WikiId> = set.iter().map(EntityRef::wiki).collect();
    wikis.len() < set.len()
}

/// Harmonic mean of the flow and path terms for a set of vertex-disjoint
/// paths given by their link confidences.
fn disjoint_paths_confidence(paths: &[&[f64]]) -> f64 {
    let flow: f64 = paths.iter().map(|p| p.iter().cloned().fold(f64::INFINITY, f64::min)).sum();
    let spl = paths.iter().map(|p| p.iter().map(|c| 1.5 - c).sum::<f64>()).fold(f64::INFINITY, f64::min);
    let (x, y) = (1.0 - 1.0 / (flow + 1.0), 1.0 / spl);
    2.0 * x * y / (x + y)
}

#[test]
fn criterion_01_transitive_confidence() {
    let t = Instant::now();
    let (u, x, v) = (e("a", "U"), e("b", "X"), e("c", "V"));
    let chain: Alignment = [link(&u, &x, 0.5), link(&x, &v, 0.5)].into_iter().collect();
    let out = add_transitive_links(&chain, TransitiveConfig::default());
    let got = out.links.iter().next().map(|c| c.confidence).unwrap_or(f64::NAN);
    let want = disjoint_paths_confidence(&[&[0.5, 0.5]]);

    let mut g = LinkGraph::new();
    g.add_edge(&u, &x, 1.0);
    g.add_edge(&x, &v, 1.0);
    let two_thirds = transitive_confidence(&g, g.index_of(&u).unwrap(), g.index_of(&v).unwrap()).unwrap();
    let mut g = LinkGraph::new();
    let y = e("d", "Y");
    for (a, b) in [(&u, &x), (&x, &v), (&u, &y), (&y, &v)] {
        g.add_edge(a, b, 1.0);
    }
    let point_eight = transitive_confidence(&g, g.index_of(&u).unwrap(), g.index_of(&v).unwrap()).unwrap();

    let ok = out.links.len() == 1
        && (got - 0.4).abs() < 1e-9
        && (want - 0.4).abs() < 1e-9
        && (two_thirds - disjoint_paths_confidence(&[&[1.0, 1.0]])).abs() < 1e-9
        && (two_thirds - 2.0 / 3.0).abs() < 1e-9
        && (point_eight - disjoint_paths_confidence(&[&[1.0, 1.0], &[1.0, 1.0]])).abs() < 1e-9
        && (point_eight - 0.8).abs() < 1e-9;
    let elapsed = t.elapsed();
    let ok = ok && elapsed < Duration::from_secs(1);
    report(1, "transitive confidence", ok, &format!("chain {got:.12}, single path {two_thirds:.12}, two paths {point_eight:.12}"), elapsed);
    assert!(ok);
}

const TITLE_WORDS: [&str; 8] = ["external", "links", "link", "see", "also", "other", "wikis", "ext"];

/// Brute-force argmax over every length-≥2 substring of the seeded titles,
/// comparing qualities as exact fractions; ties go to the longer, then
/// lexicographically smaller, substring.
fn argmax_oracle(counts: &[(String, usize)]) -> (String, f64) {
    let total: usize = counts.iter().map(|(_, n)| n).sum();
    let longest = counts.iter().filter(|(_, n)| *n > 0).map(|(t, _)| t.chars().count()).max().unwrap();
    let mut subs = BTreeSet::new();
    for (t, n) in counts {
        if *n == 0 {
            continue;
        }
        let cs: Vec<char> = t.chars().collect();
        for i in 0..cs.len() {
            for j in i + 2..=cs.len() {
                subs.insert(cs[i..j].iter().collect::<String>());
            }
        }
    }
    let mut best: Option<(String, u128, u128)> = None;
    for s in subs {
        let cov: usize = counts.iter().filter(|(t, _)| t.contains(&s)).map(|(_, n)| n).sum();
        let len = s.chars().count();
        // cov/total and len/longest; harmonic mean = 2·cov·len / (cov·longest + len·total)
        let num = 2 * cov as u128 * len as u128;
        let den = cov as u128 * longest as u128 + len as u128 * total as u128;
        let better = match &best {
            None => true,
            Some((b, bn, bd)) => {
                let (l, r) = (num * bd, bn * den);
                l > r || (l == r && (len > b.chars().count() || (len == b.chars().count() && s < *b)))
            }
        };
        if better {
            best = Some((s, num, den));
        }
    }
    let (s, num, den) = best.unwrap();
    (s, num as f64 / den as f64)
}

#[test]
fn criterion_02_marker_argmax() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut agree = 0;
    let rounds = 150;
    for _ in 0..rounds {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for _ in 0..rng.gen_range(1..6) {
            let words: Vec<&str> = (0..rng.gen_range(1..4)).map(|_| TITLE_WORDS[rng.gen_range(0..8)]).collect();
            *counts.entry(words.join(" ")).or_default() += rng.gen_range(1..8);
        }
        if counts.values().sum::<usize>() < 5 {
            counts.insert("external links".into(), 5);
        }
        let counts: Vec<(String, usize)> = counts.into_iter().collect();
        let stats = SectionTitleStats::from_seed_counts(counts.iter().map(|(t, n)| (t.as_str(), *n)));
        let (want, wq) = argmax_oracle(&counts);
        let choice = select_section_marker(&stats, "link");
        if choice.marker == want && (choice.quality - wq).abs() < 1e-12 && choice.fallback.is_none() {
            agree += 1;
        }
    }
    let stats = SectionTitleStats::from_seed_counts([("External links", 8), ("External link", 2), ("See also", 1)]);
    let choice = select_section_marker(&stats, "link");
    let exact = 260.0 / 283.0;
    let q = substring_quality("external link", &stats).unwrap();
    let (best, _) = best_substring(&stats).unwrap();
    let oracle_ok = agree == rounds && choice.marker == "external link" && best == "external link" && (q - exact).abs() < 1e-12;
    let stated = 0.9190;
    let stated_ok = (q - stated).abs() <= 1e-6;
    let elapsed = t.elapsed();
    report(
        2,
        "marker argmax",
        oracle_ok && stated_ok && elapsed < Duration::from_secs(10),
        &format!(
            "oracle agreement {agree}/{rounds}, {} candidate substrings on the worked fixture, marker {:?}, Q = {q:.6} (exactly 260/283); stated 0.9190 differs by {:.1e}, which the quality formula does not produce",
            candidate_substrings(&stats).len(),
            choice.marker,
            (q - stated).abs()
        ),
        elapsed,
    );
    assert!(oracle_ok && elapsed < Duration::from_secs(10));
}

fn random_alignment(rng: &mut ChaCha8Rng, entities: usize, edges: usize, wikis: usize) -> Alignment {
    let pool: Vec<EntityRef> = (0..entities)
        .map(|i| e(&format!("w{}", rng.gen_range(0..wikis)), &format!("E{i}")))
        .collect();
    let mut a = Alignment::new();
    for _ in 0..edges * 20 {
        if a.len() >= edges {
            break;
        }
        let (x, y) = (&pool[rng.gen_range(0..entities)], &pool[rng.gen_range(0..entities)]);
        if x.wiki() == y.wiki() || a.links_either_way(x, y) {
            continue;
        }
        a.insert(link(x, y, [0.5, 1.0][rng.gen_range(0..2)]));
    }
    a
}

#[test]
fn criterion_03_repair() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let labels = LabelIndex::new();
    let (mut clean, mut single_checked, mut single_ok) = (0, 0, 0);
    let rounds = 1000;
    for _ in 0..rounds {
        let entities = rng.gen_range(2..=50);
        let edges = rng.gen_range(1..=80);
        let wikis = rng.gen_range(2..=8);
        let a = random_alignment(&mut rng, entities, edges, wikis);
        let out = repair_identity_sets(&a, &labels);
        if components(&out.repaired).iter().all(|c| !has_same_wiki_pair(c)) {
            clean += 1;
        }
        for comp in components(&a) {
            if !has_same_wiki_pair(&comp) {
                continue;
            }
            let inner: Vec<&Correspondence> = a.iter().filter(|c| comp.contains(&c.source)).collect();
            if inner.len() > 12 {
                continue;
            }
            let single_exists = inner.iter().any(|skip| {
                let rest: Alignment = inner.iter().filter(|c| c.key() != skip.key()).map(|c| (*c).clone()).collect();
                let mut sets = components(&rest);
                // Entities left without links form singletons.
                let covered: BTreeSet<EntityRef> = sets.iter().flatten().cloned().collect();
                sets.extend(comp.iter().filter(|x| !covered.contains(*x)).map(|x| BTreeSet::from([x.clone()])));
                sets.iter().all(|s| !has_same_wiki_pair(s))
            });
            if single_exists {
                single_checked += 1;
                let removed = out.removed.iter().filter(|c| comp.contains(&c.source)).count();
                if removed == 1 {
                    single_ok += 1;
                }
            }
        }
    }
    let elapsed = t.elapsed();
    let ok = clean == rounds && single_ok == single_checked && single_checked > 0 && elapsed < Duration::from_secs(60);
    report(
        3,
        "repair invariant",
        ok,
        &format!("{clean}/{rounds} repaired alignments clean; {single_ok}/{single_checked} single-link-repairable components lost exactly one link"),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_04_injectivity() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ctx = RefineContext::new(&[], PresenceIndex::from_graphs(&[]));
    let rounds = 1000;
    let mut ok_rounds = 0;
    for _ in 0..rounds {
        let mut a = Alignment::new();
        for _ in 0..rng.gen_range(0..60) {
            let x = e(&format!("w{}", rng.gen_range(0..4)), &format!("E{}", rng.gen_range(0..12)));
            let y = e(&format!("w{}", rng.gen_range(0..4)), &format!("E{}", rng.gen_range(0..12)));
            if let Ok(c) = Correspondence::new(x, y, 0.0, Provenance::Direct) {
                a.insert(c);
            }
        }
        let (out, _) = refine(&a, &ctx);
        let mut seen: HashSet<(EntityRef, WikiId)> = HashSet::new();
        let mut ok = true;
        let mut pairs = HashSet::new();
        for c in &out {
            ok &= pairs.insert((c.source.clone(), c.target.clone())) && !pairs.contains(&(c.target.clone(), c.source.clone()));
            ok &= seen.insert((c.source.clone(), c.target.wiki().clone()));
            ok &= seen.insert((c.target.clone(), c.source.wiki().clone()));
        }
        if ok {
            ok_rounds += 1;
        }
    }
    let elapsed = t.elapsed();
    let ok = ok_rounds == rounds && elapsed < Duration::from_secs(30);
    report(4, "injectivity after refine", ok, &format!("{ok_rounds}/{rounds} refined alignments injective per wiki pair"), elapsed);
    assert!(ok);
}

fn class(wiki: &str, name: &str) -> EntityRef {
    EntityRef::in_namespace(&w(wiki), Namespace::Class, name)
}

#[test]
fn criterion_05_schema_similarity() {
    let t = Instant::now();
    let dice = sim_dice(4, 10, 5).unwrap();
    let min = sim_min(4, 10, 5).unwrap();
    let hand_ok = (dice - 8.0 / 15.0).abs() < 1e-12 && (min - 0.8).abs() < 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut agree = 0;
    let fixtures = 50;
    for _ in 0..fixtures {
        let na = rng.gen_range(1..4);
        let nb = rng.gen_range(1..4);
        let classes_a: Vec<_> = (0..na).map(|i| class("a", &format!("A{i}"))).collect();
        let classes_b: Vec<_> = (0..nb).map(|i| class("b", &format!("B{i}"))).collect();
        let n = rng.gen_range(1..15);
        let (mut ta, mut tb) = (Vec::new(), Vec::new());
        let typed = |i: &EntityRef, c: &EntityRef| Triple::new(Term::iri(i.iri()), RDF_TYPE, Term::iri(c.iri()));
        for i in 0..n {
            for c in &classes_a {
                if rng.gen_bool(0.5) {
                    ta.push(typed(&e("a", &format!("I{i}")), c));
                }
            }
            for c in &classes_b {
                if rng.gen_bool(0.5) {
                    tb.push(typed(&e("b", &format!("I{i}")), c));
                }
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let al: Alignment = (0..n)
            .filter(|_| rng.gen_bool(0.7))
            .map(|i| link(&e("a", &format!("I{i}")), &e("b", &format!("I{}", perm[i])), 1.0))
            .collect();
        let kgs = vec![KnowledgeGraph::from_triples(w("a"), ta), KnowledgeGraph::from_triples(w("b"), tb)];
        let threshold = rng.gen_range(0.0..0.7);
        let mut all = true;
        for metric in [Metric::Dice, Metric::Min] {
            let got = induce_class_matches(&al, &kgs, metric, threshold);
            let mut want = Alignment::new();
            for ca in &classes_a {
                for cb in &classes_b {
                    let members = |g: &KnowledgeGraph, c: &EntityRef| -> BTreeSet<String> {
                        g.triples()
                            .iter()
                            .filter(|t| t.object.as_iri().map(|o| &**o) == Some(c.iri()))
                            .filter_map(|t| t.subject.as_iri().map(|s| s.to_string()))
                            .collect()
                    };
                    let (ma, mb) = (members(&kgs[0], ca), members(&kgs[1], cb));
                    let shared = al
                        .iter()
                        .filter(|c| ma.contains(c.source.iri()) && mb.contains(c.target.iri()))
                        .count() as f64;
                    if shared == 0.0 {
                        continue;
                    }
                    let (n1, n2) = (ma.len() as f64, mb.len() as f64);
                    let sim = match metric {
                        Metric::Dice => 2.0 * shared / (n1 + n2),
                        Metric::Min => shared / n1.min(n2),
                    };
                    if sim > threshold {
                        want.insert(link(ca, cb, sim));
                    }
                }
            }
            let same = got.len() == want.len()
                && want.iter().all(|c| got.get(&c.source, &c.target).is_some_and(|g| (g.confidence - c.confidence).abs() < 1e-12));
            all &= same;
        }
        if all {
            agree += 1;
        }
    }

    let mut ordered = 0;
    let triples = 100_000;
    for _ in 0..triples {
        let n1 = rng.gen_range(1..10_000u64);
        let n2 = rng.gen_range(1..10_000u64);
        let shared = rng.gen_range(0..=n1.min(n2));
        if sim_dice(shared, n1, n2).unwrap() <= sim_min(shared, n1, n2).unwrap() {
            ordered += 1;
        }
    }
    let elapsed = t.elapsed();
    let ok = hand_ok && agree == fixtures && ordered == triples;
    report(
        5,
        "schema similarity",
        ok,
        &format!("dice {dice:.15}, min {min:.15}; oracle agreement {agree}/{fixtures}; dice <= min on {ordered}/{triples}"),
        elapsed,
    );
    assert!(ok);
}

/// Many small identity clusters spread over `wikis` wikis.
fn random_gold(rng: &mut ChaCha8Rng, clusters: usize, wikis: usize) -> Alignment {
    let mut a = Alignment::new();
    for k in 0..clusters {
        let size = rng.gen_range(2..=4).min(wikis);
        let mut ws: Vec<usize> = (0..wikis).collect();
        for i in (1..ws.len()).rev() {
            ws.swap(i, rng.gen_range(0..=i));
        }
        let members: Vec<EntityRef> = ws[..size].iter().map(|x| e(&format!("w{x:02}"), &format!("E{k}"))).collect();
        for i in 1..size {
            a.insert(link(&members[0], &members[i], 1.0));
        }
    }
    a
}

fn tsv(a: &Alignment, dir: &std::path::Path, name: &str) -> Vec<u8> {
    let p = dir.join(name);
    kgfarm::model::write_alignment(a, &p).unwrap();
    std::fs::read(p).unwrap()
}

#[test]
fn criterion_06_split_guarantees() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dir = tempfile::tempdir().unwrap();
    let rounds = 100;
    let (mut shared_ok, mut exclusive_ok, mut fraction_checked, mut fraction_ok, mut repeat_ok) = (0, 0, 0, 0, 0);
    let mut worst = 0.0f64;
    for round in 0..rounds {
        let (clusters, wikis) = (rng.gen_range(1..400), rng.gen_range(2..40));
        let gold = random_gold(&mut rng, clusters, wikis);
        let seed = rng.gen();
        let s = split_shared_kg(&gold, 0.2, seed).unwrap();
        if closure_pairs(&s.train).is_disjoint(&closure_pairs(&s.test)) {
            shared_ok += 1;
        }
        let x = split_exclusive_kg(&gold, 0.2, seed, ExclusiveConfig::default()).unwrap();
        let kgs = |a: &Alignment| -> BTreeSet<WikiId> { a.entities().iter().map(|e| e.wiki().clone()).collect() };
        if kgs(&x.train).is_disjoint(&kgs(&x.test)) {
            exclusive_ok += 1;
        }
        // Largest group as a share of items, for the fraction guarantee.
        let mut group_sizes: BTreeMap<&String, usize> = BTreeMap::new();
        for g in s.grouping.values() {
            *group_sizes.entry(g).or_default() += 1;
        }
        let items = s.train.len() + s.test.len();
        if items > 0 && group_sizes.values().all(|&n| (n as f64) <= 0.02 * items as f64) {
            fraction_checked += 1;
            let dev = (s.test_fraction() - 0.2).abs();
            worst = worst.max(dev);
            if dev <= 0.02 {
                fraction_ok += 1;
            }
        }
        let s2 = split_shared_kg(&gold, 0.2, seed).unwrap();
        let x2 = split_exclusive_kg(&gold, 0.2, seed, ExclusiveConfig::default()).unwrap();
        let same = tsv(&s.train, dir.path(), &format!("{round}a")) == tsv(&s2.train, dir.path(), &format!("{round}b"))
            && tsv(&s.test, dir.path(), &format!("{round}c")) == tsv(&s2.test, dir.path(), &format!("{round}d"))
            && tsv(&x.train, dir.path(), &format!("{round}e")) == tsv(&x2.train, dir.path(), &format!("{round}f"))
            && tsv(&x.test, dir.path(), &format!("{round}g")) == tsv(&x2.test, dir.path(), &format!("{round}h"));
        if same {
            repeat_ok += 1;
        }
    }
    let elapsed = t.elapsed();
    let ok = shared_ok == rounds
        && exclusive_ok == rounds
        && fraction_ok == fraction_checked
        && fraction_checked > 0
        && repeat_ok == rounds;
    report(
        6,
        "split guarantees",
        ok,
        &format!(
            "shared closure-disjoint {shared_ok}/{rounds}, exclusive KG-disjoint {exclusive_ok}/{rounds}, test fraction within 2pp {fraction_ok}/{fraction_checked} (worst {:.2}pp), byte-identical reruns {repeat_ok}/{rounds}",
            worst * 100.0
        ),
        elapsed,
    );
    assert!(ok);
}

/// Repeatedly keeps the best remaining link and discards every link that
/// shares an endpoint with it.
fn greedy_oracle(a: &Alignment) -> Alignment {
    let mut rest: Vec<Correspondence> = a.iter().cloned().collect();
    rest.sort_by(|x, y| {
        y.confidence
            .total_cmp(&x.confidence)
            .then_with(|| x.source.cmp(&y.source))
            .then_with(|| x.target.cmp(&y.target))
    });
    let mut used = HashSet::new();
    let mut out = Alignment::new();
    for c in rest {
        if used.contains(&c.source) || used.contains(&c.target) {
            continue;
        }
        used.insert(c.source.clone());
        used.insert(c.target.clone());
        out.insert(c);
    }
    out
}

struct Counting {
    calls: AtomicUsize,
}

impl Matcher for Counting {
    fn name(&self) -> &str {
        "counting"
    }

    fn match_graphs(&self, left: &KnowledgeGraph, right: &KnowledgeGraph) -> Result<Alignment, MatcherError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        StringMatcher.match_graphs(left, right)
    }
}

fn labelled_kg(wiki: &str, names: &[String]) -> KnowledgeGraph {
    KnowledgeGraph::from_triples(
        w(wiki),
        names
            .iter()
            .map(|n| Triple::new(Term::iri(e(wiki, n).iri()), RDFS_LABEL, Term::Literal(Literal::plain(n.clone())))),
    )
}

#[test]
fn criterion_07_one_to_one_and_matcher_calls() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rounds = 1000;
    let (mut agree, mut injective) = (0, 0);
    for _ in 0..rounds {
        let mut a = Alignment::new();
        for _ in 0..rng.gen_range(0..=40) {
            let s = e(["a", "b"][rng.gen_range(0..2)], &rng.gen_range(0..10).to_string());
            let t = e(["c", "d"][rng.gen_range(0..2)], &rng.gen_range(0..10).to_string());
            a.insert(link(&s, &t, [0.1, 0.4, 0.4, 0.7, 1.0][rng.gen_range(0..5)]));
        }
        let got = naive_descending_extraction(&a);
        if got == greedy_oracle(&a) {
            agree += 1;
        }
        let mut seen = HashSet::new();
        if got.iter().all(|c| seen.insert(c.source.clone()) && seen.insert(c.target.clone())) {
            injective += 1;
        }
    }
    let mut calls_ok = Vec::new();
    for n in 2..=16usize {
        let kgs: Vec<KnowledgeGraph> = (0..n)
            .map(|i| {
                let names: Vec<String> = (0..rng.gen_range(1..6)).map(|k| format!("Name{}", (k + i) % 7)).collect();
                labelled_kg(&format!("k{i:02}"), &names)
            })
            .collect();
        let m = Counting { calls: AtomicUsize::new(0) };
        run_multimatch(kgs, &m).unwrap();
        calls_ok.push(m.calls.load(Ordering::SeqCst) == n - 1);
    }
    let elapsed = t.elapsed();
    let calls = calls_ok.iter().filter(|x| **x).count();
    let ok = agree == rounds && injective == rounds && calls == calls_ok.len();
    report(
        7,
        "1:1 extraction and matcher calls",
        ok,
        &format!("greedy oracle agreement {agree}/{rounds}, 1:1 {injective}/{rounds}, n-1 matcher calls for {calls}/{} farm sizes", calls_ok.len()),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_08_closure_aware_evaluation() {
    let t = Instant::now();
    let (a, b, c, d, x) = (e("w1", "A"), e("w2", "B"), e("w1", "C"), e("w2", "D"), e("w3", "E"));
    // E belongs to the judged universe without occurring in a reference pair.
    let reference: Alignment = [link(&a, &b, 1.0), link(&c, &d, 1.0)].into_iter().collect();
    let universe = BTreeSet::from([x.clone()]);
    let system: Alignment = [link(&a, &b, 1.0), link(&c, &x, 1.0)].into_iter().collect();
    let kinds = KindIndex::new();
    let r = kgfarm::eval::evaluate_with_universe(&system, &reference, &universe, &kinds).unwrap();
    let fixture_ok = r.overall.precision == 0.5 && r.overall.recall == 0.5 && r.overall.f1 == 0.5;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rounds = 100;
    let mut unchanged = 0;
    for _ in 0..rounds {
        let reference = random_alignment(&mut rng, 20, 15, 4);
        if reference.is_empty() {
            unchanged += 1;
            continue;
        }
        let system = random_alignment(&mut rng, 20, 15, 4);
        let base = evaluate(&system, &reference, &kinds).unwrap();
        let mut extended = system.clone();
        for comp in components(&system) {
            let m: Vec<&EntityRef> = comp.iter().collect();
            for i in 0..m.len() {
                for j in i + 1..m.len() {
                    if m[i].wiki() != m[j].wiki() && rng.gen_bool(0.5) && !extended.links_either_way(m[i], m[j]) {
                        extended.insert(link(m[i], m[j], 0.3));
                    }
                }
            }
        }
        let again = evaluate(&extended, &reference, &kinds).unwrap();
        if serde_json::to_string(&base).unwrap() == serde_json::to_string(&again).unwrap() {
            unchanged += 1;
        }
    }
    let elapsed = t.elapsed();
    let ok = fixture_ok && unchanged == rounds;
    report(
        8,
        "closure-aware evaluation",
        ok,
        &format!(
            "fixture P {} R {} F1 {}; reports unchanged after adding implied links {unchanged}/{rounds}",
            r.overall.precision, r.overall.recall, r.overall.f1
        ),
        elapsed,
    );
    assert!(ok);
}

fn end_to_end(noise: NoiseRates, seed: u64) -> (kgfarm::eval::EvalReport, Alignment) {
    let dir = tempfile::tempdir().unwrap();
    let config = SynthConfig { wikis: 20, entities: 500, noise, seed, ..Default::default() };
    let farm = generate_synthetic_farm(&config).unwrap();
    farm.write_to(dir.path()).unwrap();
    let m = PipelineManifest::new(dir.path().join("pages"), dir.path().join("kgs"), dir.path().join("out"));
    run_pipeline(&m).unwrap();
    let gold = read_alignment(&dir.path().join("out/gold.tsv")).unwrap();
    let truth = read_alignment(&dir.path().join("truth.tsv")).unwrap();
    let r = evaluate(&gold, &truth, &KindIndex::from_graphs(&farm.kgs)).unwrap();
    (r, truth)
}

#[test]
fn criterion_09_end_to_end_recovery() {
    let t = Instant::now();
    let (noisy, truth) = end_to_end(NoiseRates::mixed(0.05), 2024);
    let (clean, _) = end_to_end(NoiseRates::default(), 2024);
    let elapsed = t.elapsed();
    let p = noisy.overall.precision;
    let r = noisy.overall.recall;
    let exact = clean.overall.precision == 1.0 && clean.overall.recall == 1.0;
    let ok = p >= 0.95 && r >= 0.90 && exact && elapsed < Duration::from_secs(120);
    report(
        9,
        "end-to-end recovery",
        ok,
        &format!(
            "5% mixed noise: P {p:.4} R {r:.4} over {} planted links; zero noise: P {} R {}",
            truth.len(),
            clean.overall.precision,
            clean.overall.recall
        ),
        elapsed,
    );
    assert!(ok);
}

fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

/// Slow; run with `cargo test --release -- --ignored criterion_10`.
#[test]
#[ignore]
fn criterion_10_scale_smoke() {
    let config = SynthConfig { wikis: 5_000, entities: 110_000, seed: 10, noise: NoiseRates::mixed(0.05), ..Default::default() };
    let farm = generate_synthetic_farm(&config).unwrap();
    let t = Instant::now();
    let gs = kgfarm::pipeline::build_gold_standard(&farm.pages, &farm.kgs, Default::default());
    let schema = kgfarm::schema::induce_schema(&gs.gold, &farm.kgs, Metric::Min, 0.2);
    let split = split_shared_kg(&gs.gold, 0.2, 1).unwrap();
    let elapsed = t.elapsed();
    let rss = peak_rss_kib().map(|k| format!("{:.2} GB", k as f64 / 1_048_576.0)).unwrap_or_else(|| "unknown".into());
    let ok = elapsed < Duration::from_secs(600) && peak_rss_kib().is_none_or(|k| k < 8 * 1_048_576);
    report(
        10,
        "scale smoke (reported only)",
        ok,
        &format!(
            "{} candidates, {} gold links, {} class matches, {} test links; peak RSS {rss}; {} threads",
            gs.candidates.len(),
            gs.gold.len(),
            schema.classes.len(),
            split.test.len(),
            rayon::current_num_threads()
        ),
        elapsed,
    );
}
