//! End-to-end gold-standard construction, in memory or from a manifest.

use crate::closure::{run_closure, ClosureOutput, ClosureReport, TransitiveConfig};
use crate::eval::{profile, ProfileReport};
use crate::extract::{extract_candidate_alignment, MarkerReport, DEFAULT_MARKER};
use crate::model::{
    parse_ntriples, parse_page_dump, write_alignment, Alignment, KnowledgeGraph, LabelIndex, PageRecord,
    ParseMode, ParseReport, WikiId,
};
use crate::refine::{refine, PresenceIndex, RefineContext, RefineReport};
use crate::schema::{induce_schema, Metric, SchemaReport, DEFAULT_THRESHOLD};
use crate::split::{split_exclusive_kg, split_shared_kg, ExclusiveConfig, SplitBundle, SplitReport, DEFAULT_TEST_FRACTION};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl PipelineError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::MissingInput(_) | PipelineError::InvalidInput(_) => 2,
            PipelineError::Stage { .. } => 3,
            PipelineError::Io { .. } => 4,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.display().to_string(), source }
    }
}

/// Knobs shared by the in-memory and file-based runs.
#[derive(Debug, Clone, Copy)]
pub struct GoldConfig<'a> {
    pub default_marker: &'a str,
    pub transitive: TransitiveConfig,
    pub closure: bool,
}

impl Default for GoldConfig<'_> {
    fn default() -> Self {
        GoldConfig { default_marker: DEFAULT_MARKER, transitive: TransitiveConfig::default(), closure: true }
    }
}

/// Every intermediate alignment of one run.
#[derive(Debug, Clone)]
pub struct GoldStandard {
    pub candidates: Alignment,
    pub markers: Vec<MarkerReport>,
    pub refined: Alignment,
    pub refine_report: RefineReport,
    pub closure: Option<ClosureOutput>,
    /// Direct and transitive links after all stages.
    pub gold: Alignment,
}

/// Wikis taking part in the farm: those with pages or a graph.
pub fn farm_wikis(pages: &[PageRecord], kgs: &[KnowledgeGraph]) -> BTreeSet<WikiId> {
    pages.iter().map(|p| p.wiki.clone()).chain(kgs.iter().map(|k| k.wiki().clone())).collect()
}

/// Extraction, refinement and (optionally) closure.
pub fn build_gold_standard(pages: &[PageRecord], kgs: &[KnowledgeGraph], config: GoldConfig) -> GoldStandard {
    let (candidates, markers) = extract_candidate_alignment(pages, config.default_marker);
    let ctx = RefineContext::new(pages, PresenceIndex::from_graphs(kgs));
    let (refined, refine_report) = refine(&candidates, &ctx);
    let (closure, gold) = if config.closure {
        let labels = LabelIndex::from_graphs(kgs);
        let out = run_closure(&refined, &labels, &farm_wikis(pages, kgs), config.transitive);
        let gold = out.direct.merged_with(&out.transitive_kept);
        (Some(out), gold)
    } else {
        (None, refined.clone())
    };
    GoldStandard { candidates, markers, refined, refine_report, closure, gold }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageToggles {
    #[serde(default = "default_true")]
    pub closure: bool,
    #[serde(default = "default_true")]
    pub schema: bool,
    #[serde(default = "default_true")]
    pub split: bool,
    #[serde(default = "default_true")]
    pub profile: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles { closure: true, schema: true, split: true, profile: true }
    }
}

fn default_seed() -> u64 {
    42
}
fn default_marker() -> String {
    DEFAULT_MARKER.to_string()
}
fn default_metric() -> String {
    "min".to_string()
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_fraction() -> f64 {
    DEFAULT_TEST_FRACTION
}
fn default_large_cluster() -> usize {
    TransitiveConfig::default().large_cluster_members
}
fn default_max_pairs() -> usize {
    TransitiveConfig::default().max_pairs
}

/// JSON run description. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineManifest {
    pub pages: PathBuf,
    pub kgs: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub stages: StageToggles,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_marker")]
    pub default_marker: String,
    #[serde(default = "default_metric")]
    pub schema_metric: String,
    #[serde(default = "default_threshold")]
    pub schema_threshold: f64,
    #[serde(default = "default_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_large_cluster")]
    pub transitive_large_cluster: usize,
    #[serde(default = "default_max_pairs")]
    pub transitive_max_pairs: usize,
    #[serde(default)]
    pub strict: bool,
}

impl PipelineManifest {
    /// A manifest with default settings for the given directories.
    pub fn new(pages: PathBuf, kgs: PathBuf, output: PathBuf) -> Self {
        PipelineManifest {
            pages,
            kgs,
            output,
            stages: StageToggles::default(),
            seed: default_seed(),
            default_marker: default_marker(),
            schema_metric: default_metric(),
            schema_threshold: default_threshold(),
            test_fraction: default_fraction(),
            transitive_large_cluster: default_large_cluster(),
            transitive_max_pairs: default_max_pairs(),
            strict: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        if !path.exists() {
            return Err(PipelineError::MissingInput(path.display().to_string()));
        }
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut m: PipelineManifest = serde_json::from_str(&text)
            .map_err(|e| PipelineError::InvalidInput(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut m.pages, &mut m.kgs, &mut m.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }

    fn parse_mode(&self) -> ParseMode {
        if self.strict {
            ParseMode::Strict
        } else {
            ParseMode::Lenient
        }
    }
}

/// Totals over all parsed input files.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InputReport {
    pub files: usize,
    pub records: usize,
    pub skipped: usize,
}

impl InputReport {
    fn add(&mut self, r: &ParseReport) {
        self.files += 1;
        self.records += r.records;
        self.skipped += r.skipped;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub pages: InputReport,
    pub kgs: InputReport,
    pub markers: Vec<MarkerReport>,
    pub candidates: usize,
    pub refine: RefineReport,
    pub closure: Option<ClosureReport>,
    pub gold_links: usize,
    pub schema: Option<SchemaReport>,
    pub splits: Vec<SplitReport>,
    pub profile: Option<ProfileReport>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

fn files_with_extension(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>, PipelineError> {
    if !dir.is_dir() {
        return Err(PipelineError::MissingInput(dir.display().to_string()));
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))? {
        let path = entry.map_err(|e| PipelineError::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if path.is_file() && extensions.contains(&ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Reads every `*.jsonl`/`*.json` page dump in `dir`.
pub fn load_pages_dir(dir: &Path, mode: ParseMode) -> Result<(Vec<PageRecord>, InputReport), PipelineError> {
    let files = files_with_extension(dir, &["jsonl", "json"])?;
    let parsed: Vec<_> = files
        .par_iter()
        .map(|p| parse_page_dump(p, mode).map_err(|e| PipelineError::InvalidInput(format!("{}: {e}", p.display()))))
        .collect::<Result<_, _>>()?;
    let mut report = InputReport::default();
    let mut pages = Vec::new();
    for (p, r) in parsed {
        report.add(&r);
        pages.extend(p);
    }
    Ok((pages, report))
}

/// Reads every `*.nt` graph in `dir`; the file stem names the wiki.
pub fn load_kgs_dir(dir: &Path, mode: ParseMode) -> Result<(Vec<KnowledgeGraph>, InputReport), PipelineError> {
    let files = files_with_extension(dir, &["nt"])?;
    let parsed: Vec<_> = files
        .par_iter()
        .map(|p| parse_ntriples(p, mode).map_err(|e| PipelineError::InvalidInput(format!("{}: {e}", p.display()))))
        .collect::<Result<_, _>>()?;
    let mut report = InputReport::default();
    let mut kgs = Vec::new();
    for (kg, r) in parsed {
        report.add(&r);
        kgs.push(kg);
    }
    Ok((kgs, report))
}

/// Writes the alignment and records its name.
fn emit(dir: &Path, name: &str, a: &Alignment, outputs: &mut Vec<String>) -> Result<(), PipelineError> {
    let path = dir.join(name);
    write_alignment(a, &path).map_err(|e| PipelineError::io(&path, std::io::Error::other(e.to_string())))?;
    outputs.push(name.to_string());
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("reports always serialize");
    fs::write(path, text + "\n").map_err(|e| PipelineError::io(path, e))
}

fn emit_split(dir: &Path, b: &SplitBundle, outputs: &mut Vec<String>) -> Result<(), PipelineError> {
    let v = b.variant.as_str();
    emit(dir, &format!("split_{v}_train.tsv"), &b.train, outputs)?;
    emit(dir, &format!("split_{v}_test.tsv"), &b.test, outputs)
}

/// Runs every enabled stage and writes the results to the output directory.
pub fn run_pipeline(m: &PipelineManifest) -> Result<PipelineReport, PipelineError> {
    let metric = Metric::parse(&m.schema_metric).map_err(|e| PipelineError::InvalidInput(e.to_string()))?;
    if !(0.0..=1.0).contains(&m.schema_threshold) {
        return Err(PipelineError::InvalidInput(format!("schema threshold {} outside [0, 1]", m.schema_threshold)));
    }
    if !(m.test_fraction > 0.0 && m.test_fraction < 1.0) {
        return Err(PipelineError::InvalidInput(format!("test fraction {} outside (0, 1)", m.test_fraction)));
    }
    let mode = m.parse_mode();
    let (pages, page_report) = load_pages_dir(&m.pages, mode)?;
    let (kgs, kg_report) = load_kgs_dir(&m.kgs, mode)?;
    fs::create_dir_all(&m.output).map_err(|e| PipelineError::io(&m.output, e))?;
    let out = m.output.as_path();
    log::info!("loaded {} pages and {} graphs", pages.len(), kgs.len());

    let config = GoldConfig {
        default_marker: &m.default_marker,
        transitive: TransitiveConfig {
            large_cluster_members: m.transitive_large_cluster,
            max_pairs: m.transitive_max_pairs,
        },
        closure: m.stages.closure,
    };
    let gs = build_gold_standard(&pages, &kgs, config);
    let mut outputs = Vec::new();
    emit(out, "candidates.tsv", &gs.candidates, &mut outputs)?;
    emit(out, "refined.tsv", &gs.refined, &mut outputs)?;
    if let Some(c) = &gs.closure {
        emit(out, "direct.tsv", &c.direct, &mut outputs)?;
        emit(out, "transitive.tsv", &c.transitive_kept, &mut outputs)?;
    }
    emit(out, "gold.tsv", &gs.gold, &mut outputs)?;

    let schema = if m.stages.schema {
        let s = induce_schema(&gs.gold, &kgs, metric, m.schema_threshold);
        emit(out, "classes.tsv", &s.classes, &mut outputs)?;
        emit(out, "properties.tsv", &s.properties, &mut outputs)?;
        Some(s.report)
    } else {
        None
    };

    let mut splits = Vec::new();
    if m.stages.split {
        let stage_err = |e: crate::split::SplitError| PipelineError::Stage { stage: "split", message: e.to_string() };
        let shared = split_shared_kg(&gs.gold, m.test_fraction, m.seed).map_err(stage_err)?;
        let exclusive =
            split_exclusive_kg(&gs.gold, m.test_fraction, m.seed, ExclusiveConfig::default()).map_err(stage_err)?;
        for b in [&shared, &exclusive] {
            emit_split(out, b, &mut outputs)?;
            splits.push(b.report());
        }
    }

    let profile = m.stages.profile.then(|| profile(&gs.gold, &LabelIndex::from_graphs(&kgs)));
    outputs.push("report.json".to_string());
    let report = PipelineReport {
        pages: page_report,
        kgs: kg_report,
        markers: gs.markers,
        candidates: gs.candidates.len(),
        refine: gs.refine_report,
        closure: gs.closure.map(|c| c.report),
        gold_links: gs.gold.len(),
        schema,
        splits,
        profile,
        outputs,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}
