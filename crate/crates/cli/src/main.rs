use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use spatialqa_core::model::Vocabulary;
use spatialqa_core::parser::solve;
use spatialqa_core::pipeline::{
    build_record, corpus_stats, generate_corpus, read_jsonl, reference_bands, verify_corpus,
    verify_records, write_jsonl, PipelineConfig, Resources, VerifyReport, SPLITS,
};
use spatialqa_core::sampler::import_scene_file;
use spatialqa_core::variants::make_unseen;

#[derive(Parser)]
#[command(
    name = "spatialqa",
    version,
    about = "Generate and check synthetic spatial-reasoning QA data"
)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, global = true, env = "SPATIALQA_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grammar file replacing the built-in grammar.
    #[arg(long, global = true)]
    grammar: Option<PathBuf>,
    /// Vocabulary file for the unseen split.
    #[arg(long, global = true)]
    unseen_vocabulary: Option<PathBuf>,
    /// Any configuration field, e.g. `--set sampler.block_count=2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let mut cfg = cfg.with_overrides(&self.overrides)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(g) = &self.grammar {
            cfg.grammar = Some(g.clone());
        }
        if let Some(v) = &self.unseen_vocabulary {
            cfg.unseen_vocabulary = Some(v.clone());
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate every split into the output directory.
    Generate {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stories in the train split.
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        dev: Option<usize>,
        #[arg(long)]
        test_seen: Option<usize>,
        #[arg(long)]
        test_unseen: Option<usize>,
        /// Questions generated per type for each story.
        #[arg(long)]
        per_type: Option<usize>,
    },
    /// Print corpus statistics for a split file or a dataset directory.
    Stats {
        path: PathBuf,
        /// Fail when a statistic is outside the reference band.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        json: bool,
    },
    /// Re-derive every answer and check the corpus invariants.
    Verify {
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Answer a question from the story text alone.
    Solve {
        /// Story file, or `-` for standard input.
        #[arg(long, conflicts_with = "story_text")]
        story: Option<PathBuf>,
        #[arg(long)]
        story_text: Option<String>,
        #[arg(long)]
        question: String,
        /// Read the texts with the unseen vocabulary.
        #[arg(long)]
        unseen: bool,
    },
    /// Rewrite a split file with the unseen vocabulary.
    Perturb {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a record for a scene given as JSON.
    ImportScene {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn collect_records(path: &Path) -> Result<Vec<spatialqa_core::model::DatasetRecord>> {
    if path.is_dir() {
        let mut all = Vec::new();
        for split in SPLITS {
            let file = path.join(format!("{split}.jsonl"));
            if file.exists() {
                all.extend(read_jsonl(&file).with_context(|| file.display().to_string())?);
            }
        }
        Ok(all)
    } else {
        Ok(read_jsonl(path).with_context(|| path.display().to_string())?)
    }
}

fn print_report(report: &VerifyReport, json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(report)?);
        return Ok(());
    }
    for c in &report.checks {
        let status = if c.ok() { "pass" } else { "FAIL" };
        println!(
            "{status}  {} ({} passed, {} failed)",
            c.name, c.passed, c.failed
        );
        for e in &c.examples {
            println!("      {e}");
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = cli.config.load()?;
    match cli.command {
        Command::Generate {
            out,
            train,
            dev,
            test_seen,
            test_unseen,
            per_type,
        } => {
            for (slot, v) in [
                (&mut cfg.splits.train, train),
                (&mut cfg.splits.dev, dev),
                (&mut cfg.splits.test_seen, test_seen),
                (&mut cfg.splits.test_unseen, test_unseen),
            ] {
                if let Some(v) = v {
                    *slot = v;
                }
            }
            if let Some(n) = per_type {
                cfg.questions.per_type = n;
            }
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let manifest = generate_corpus(&cfg, &out)?;
            for (split, s) in &manifest.splits {
                log::info!(
                    "{split}: {} records, {} questions",
                    s.records,
                    s.total_questions
                );
            }
            Ok(true)
        }
        Command::Stats { path, strict, json } => {
            let records = collect_records(&path)?;
            let stats = corpus_stats(&records);
            let bands = reference_bands(&stats);
            if json {
                let v = serde_json::json!({ "stats": stats, "bands": bands });
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                println!("records            {}", stats.records);
                for (name, r) in [
                    ("sentences", stats.sentences),
                    ("story tokens", stats.story_tokens),
                    ("question tokens", stats.question_tokens),
                ] {
                    println!(
                        "{name:<18} mean {:.2}  min {}  max {}",
                        r.mean, r.min, r.max
                    );
                }
                for (q, n) in &stats.questions {
                    println!(
                        "{q:<18} {n}  {:?}",
                        stats.labels.get(q).cloned().unwrap_or_default()
                    );
                }
                println!("reasoning depth    {:?}", stats.reasoning_depth);
                for b in &bands {
                    let status = if b.ok() { "ok" } else { "out" };
                    println!(
                        "{status:<4} {} = {:.2} (reference {:.1}..{:.1})",
                        b.name, b.value, b.low, b.high
                    );
                }
            }
            Ok(!strict || bands.iter().all(|b| b.ok()))
        }
        Command::Verify { path, json } => {
            let report = if path.is_dir() {
                verify_corpus(&path, &cfg)?
            } else {
                let res = Resources::load(&cfg)?;
                verify_records(&read_jsonl(&path)?, &cfg, &res)
            };
            print_report(&report, json)?;
            Ok(report.ok())
        }
        Command::Solve {
            story,
            story_text,
            question,
            unseen,
        } => {
            let text = match (story, story_text) {
                (_, Some(t)) => t,
                (Some(p), None) if p.as_os_str() == "-" => {
                    let mut s = String::new();
                    std::io::stdin().read_to_string(&mut s)?;
                    s
                }
                (Some(p), None) => {
                    std::fs::read_to_string(&p).with_context(|| p.display().to_string())?
                }
                (None, None) => bail!("give --story or --story-text"),
            };
            let res = Resources::load(&cfg)?;
            let answer = solve(
                &text,
                &question,
                &res.grammar,
                unseen.then_some(&res.unseen),
            )?;
            println!("{}", serde_json::to_string(&answer.labels)?);
            Ok(true)
        }
        Command::Perturb { input, out } => {
            let res = Resources::load(&cfg)?;
            let records = read_jsonl(&input)?;
            let mut mapped = Vec::with_capacity(records.len());
            for r in &records {
                if r.provenance.vocabulary == Vocabulary::Unseen {
                    bail!(
                        "record {} already uses the unseen vocabulary",
                        r.provenance.index
                    );
                }
                mapped.push(make_unseen(r, &res.unseen)?);
            }
            write_jsonl(&out, &mapped)?;
            Ok(true)
        }
        Command::ImportScene { scene, out } => {
            let res = Resources::load(&cfg)?;
            let scene = import_scene_file(&scene)?;
            let (mut record, _) = build_record(&scene, &cfg, &res, cfg.seed)?;
            record.provenance.config_hash = cfg.hash();
            record.provenance.split = "imported".into();
            write_jsonl(&out, &[record])?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
