use clap::{Parser, Subcommand};
use kgfarm::closure::{run_closure, TransitiveConfig};
use kgfarm::eval::{evaluate_with_universe, profile, KindIndex};
use kgfarm::extract::{extract_candidate_alignment, DEFAULT_MARKER};
use kgfarm::model::{read_alignments, write_alignment, Alignment, KnowledgeGraph, LabelIndex, ParseMode, WikiId};
use kgfarm::multimatch::{matcher_by_name, run_multimatch};
use kgfarm::pipeline::{farm_wikis, load_kgs_dir, load_pages_dir, run_pipeline, write_json, PipelineError, PipelineManifest};
use kgfarm::refine::{refine, PresenceIndex, RefineContext};
use kgfarm::schema::{induce_schema, Metric, DEFAULT_THRESHOLD};
use kgfarm::split::{split_exclusive_kg, split_shared_kg, ExclusiveConfig, Variant, DEFAULT_TEST_FRACTION};
use kgfarm::synth::{generate_synthetic_farm, NoiseRates, SynthConfig};
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Build, repair, split and score identity alignments between wiki knowledge graphs.
#[derive(Parser)]
#[command(name = "kgfarm", version)]
struct Cli {
    /// Seed for every randomized stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Abort on the first malformed input record instead of skipping it.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine candidate links from page dumps.
    Extract {
        #[arg(long)]
        pages: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = DEFAULT_MARKER)]
        default_marker: String,
        /// Marker report file (stdout when omitted).
        #[arg(long)]
        markers: Option<PathBuf>,
    },
    /// Normalize, resolve redirects, enforce injectivity and drop bad links.
    Refine {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        pages: PathBuf,
        #[arg(long)]
        kgs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Repair identity sets, add transitive links and drop exterior links.
    Closure {
        #[arg(long = "in")]
        input: PathBuf,
        /// Directory of graphs providing labels (and the farm's wikis).
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out_direct: PathBuf,
        #[arg(long)]
        out_transitive: PathBuf,
        /// File listing the farm's wiki ids, one per line.
        #[arg(long)]
        known_wikis: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = TransitiveConfig::default().max_pairs)]
        max_pairs: usize,
    },
    /// Induce class and property matches from instance matches.
    Schema {
        #[arg(long, num_args = 1.., required = true)]
        instances: Vec<PathBuf>,
        #[arg(long)]
        kgs: PathBuf,
        #[arg(long, default_value = "min")]
        metric: String,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        out_classes: PathBuf,
        #[arg(long)]
        out_properties: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Split a gold standard into train and test.
    Split {
        #[arg(long, num_args = 1.., required = true)]
        gold: Vec<PathBuf>,
        #[arg(long, value_parser = ["shared", "exclusive"])]
        variant: String,
        #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
        fraction: f64,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Match all graphs of a directory incrementally along a clustering tree.
    Match {
        #[arg(long)]
        kgs: PathBuf,
        /// `string`, or `exec:<command>` for an external matcher.
        #[arg(long, default_value = "string")]
        matcher: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Closure-aware precision and recall of a system alignment.
    Evaluate {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Graphs giving each entity's kind; IRI namespaces are used otherwise.
        #[arg(long)]
        kgs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Link and identity-set statistics of an alignment.
    Profile {
        #[arg(long = "in", num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        kgs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline from a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Generate a synthetic wiki farm with a planted truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        wikis: usize,
        #[arg(long, default_value_t = 500)]
        entities: usize,
        /// Rate of every noise type; the per-type flags override it.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        fan_out: Option<f64>,
        #[arg(long)]
        disambiguation: Option<f64>,
        #[arg(long)]
        dead: Option<f64>,
        #[arg(long)]
        anchor: Option<f64>,
        #[arg(long)]
        wrong: Option<f64>,
    },
}

fn mode(strict: bool) -> ParseMode {
    if strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    }
}

fn read_inputs(paths: &[PathBuf]) -> Result<Alignment, PipelineError> {
    if let Some(p) = paths.iter().find(|p| !p.is_file()) {
        return Err(PipelineError::MissingInput(p.display().to_string()));
    }
    read_alignments(paths).map_err(|e| PipelineError::InvalidInput(e.to_string()))
}

fn write_tsv(a: &Alignment, path: &Path) -> Result<(), PipelineError> {
    write_alignment(a, path).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| PipelineError::Io { path: path.display().to_string(), source })
}

fn optional_kgs(dir: &Option<PathBuf>, strict: bool) -> Result<Vec<KnowledgeGraph>, PipelineError> {
    match dir {
        Some(d) => Ok(load_kgs_dir(d, mode(strict))?.0),
        None => Ok(Vec::new()),
    }
}

fn stage_error(stage: &'static str) -> impl Fn(String) -> PipelineError {
    move |message| PipelineError::Stage { stage, message }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let strict = cli.strict;
    match cli.command {
        Command::Extract { pages, out, default_marker, markers } => {
            let (pages, _) = load_pages_dir(&pages, mode(strict))?;
            let (candidates, reports) = extract_candidate_alignment(&pages, &default_marker);
            write_tsv(&candidates, &out)?;
            let table: String = reports.iter().map(|r| r.tsv_row() + "\n").collect();
            match markers {
                Some(p) => write_text(&p, &table)?,
                None => print!("{table}"),
            }
            log::info!("{} candidate links", candidates.len());
        }
        Command::Refine { input, pages, kgs, out, report } => {
            let candidates = read_inputs(&[input])?;
            let (pages, _) = load_pages_dir(&pages, mode(strict))?;
            let (kgs, _) = load_kgs_dir(&kgs, mode(strict))?;
            let ctx = RefineContext::new(&pages, PresenceIndex::from_graphs(&kgs));
            let (refined, r) = refine(&candidates, &ctx);
            write_tsv(&refined, &out)?;
            if let Some(p) = report {
                write_json(&p, &r)?;
            }
        }
        Command::Closure { input, labels, out_direct, out_transitive, known_wikis, report, max_pairs } => {
            let refined = read_inputs(&[input])?;
            let (kgs, _) = load_kgs_dir(&labels, mode(strict))?;
            let known: BTreeSet<WikiId> = match known_wikis {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|_| PipelineError::MissingInput(p.display().to_string()))?;
                    text.lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(|l| WikiId::new(l).map_err(|e| PipelineError::InvalidInput(format!("{l}: {e}"))))
                        .collect::<Result<_, _>>()?
                }
                None => farm_wikis(&[], &kgs),
            };
            let config = TransitiveConfig { max_pairs, ..Default::default() };
            let out = run_closure(&refined, &LabelIndex::from_graphs(&kgs), &known, config);
            write_tsv(&out.direct, &out_direct)?;
            write_tsv(&out.transitive_kept, &out_transitive)?;
            if let Some(p) = report {
                write_json(&p, &out.report)?;
            }
        }
        Command::Schema { instances, kgs, metric, threshold, out_classes, out_properties, report } => {
            let metric = Metric::parse(&metric).map_err(|e| PipelineError::InvalidInput(e.to_string()))?;
            if !(0.0..=1.0).contains(&threshold) {
                return Err(PipelineError::InvalidInput(format!("threshold {threshold} outside [0, 1]")));
            }
            let instances = read_inputs(&instances)?;
            let (kgs, _) = load_kgs_dir(&kgs, mode(strict))?;
            let s = induce_schema(&instances, &kgs, metric, threshold);
            write_tsv(&s.classes, &out_classes)?;
            write_tsv(&s.properties, &out_properties)?;
            let summary = serde_json::to_string_pretty(&s.report).expect("serializable");
            match report {
                Some(p) => write_json(&p, &s.report)?,
                None => println!("{summary}"),
            }
        }
        Command::Split { gold, variant, fraction, out_train, out_test, report } => {
            let gold = read_inputs(&gold)?;
            let seed = cli.seed.unwrap_or(42);
            let bundle = match Variant::parse(&variant).expect("validated by clap") {
                Variant::Shared => split_shared_kg(&gold, fraction, seed),
                Variant::Exclusive => split_exclusive_kg(&gold, fraction, seed, ExclusiveConfig::default()),
            }
            .map_err(|e| PipelineError::InvalidInput(e.to_string()))?;
            write_tsv(&bundle.train, &out_train)?;
            write_tsv(&bundle.test, &out_test)?;
            if let Some(p) = report {
                write_json(&p, &bundle.report())?;
            }
        }
        Command::Match { kgs, matcher, out, report } => {
            let matcher = matcher_by_name(&matcher).map_err(|e| PipelineError::InvalidInput(e.to_string()))?;
            let (kgs, _) = load_kgs_dir(&kgs, mode(strict))?;
            let (outcome, tree) =
                run_multimatch(kgs, matcher.as_ref()).map_err(|e| stage_error("match")(e.to_string()))?;
            if !outcome.steps.is_empty() && outcome.failures() == outcome.steps.len() {
                let first = outcome.steps[0].error.clone().unwrap_or_default();
                return Err(stage_error("match")(format!("every matcher call failed; first error: {first}")));
            }
            write_tsv(&outcome.alignment, &out)?;
            if let Some(p) = report {
                let value = serde_json::json!({
                    "matcher": matcher.name(),
                    "links": outcome.alignment.len(),
                    "matcher_calls": outcome.matcher_calls,
                    "failed_steps": outcome.failures(),
                    "steps": outcome.steps,
                    "tree": tree,
                });
                write_json(&p, &value)?;
            }
        }
        Command::Evaluate { system, reference, kgs, out } => {
            let system = read_inputs(&[system])?;
            let reference = read_inputs(&[reference])?;
            let kgs = optional_kgs(&kgs, strict)?;
            let universe = kgs.iter().flat_map(|k| k.local_entities()).collect();
            let r = evaluate_with_universe(&system, &reference, &universe, &KindIndex::from_graphs(&kgs))
                .map_err(|e| PipelineError::InvalidInput(e.to_string()))?;
            write_json(&out, &r)?;
        }
        Command::Profile { input, kgs, out } => {
            let a = read_inputs(&input)?;
            let kgs = optional_kgs(&kgs, strict)?;
            write_json(&out, &profile(&a, &LabelIndex::from_graphs(&kgs)))?;
        }
        Command::Run { manifest } => {
            let mut m = PipelineManifest::load(&manifest)?;
            if let Some(seed) = cli.seed {
                m.seed = seed;
            }
            m.strict |= strict;
            let report = run_pipeline(&m)?;
            log::info!("{} gold links written to {}", report.gold_links, m.output.display());
        }
        Command::Synth { out, wikis, entities, noise, fan_out, disambiguation, dead, anchor, wrong } => {
            let mixed = NoiseRates::mixed(noise);
            let config = SynthConfig {
                wikis,
                entities,
                noise: NoiseRates {
                    fan_out: fan_out.unwrap_or(mixed.fan_out),
                    disambiguation: disambiguation.unwrap_or(mixed.disambiguation),
                    dead: dead.unwrap_or(mixed.dead),
                    anchor: anchor.unwrap_or(mixed.anchor),
                    wrong: wrong.unwrap_or(mixed.wrong),
                },
                seed: cli.seed.unwrap_or(42),
                ..Default::default()
            };
            let farm = generate_synthetic_farm(&config).map_err(|e| PipelineError::InvalidInput(e.to_string()))?;
            farm.write_to(&out).map_err(|source| PipelineError::Io { path: out.display().to_string(), source })?;
            write_json(&out.join("synth.json"), &serde_json::json!({ "config": config, "noise": farm.noise }))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("kgfarm: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kgfarm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
