//! `factlens` command-line interface.
//!
//! Subcommands map onto pipeline stages (hash-gated and idempotent), plus a
//! file-mode tag parser and a local stub server for offline runs.

mod stub_server;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use factlens_core::corpus::{CorpusStore, DateRange};
use factlens_core::matcher::{sample_pairs, SimilarityTier};
use factlens_core::parser::{parse_recover, parse_strict, SentenceId};
use factlens_core::pipeline::{self, InputSpec, RunConfig, Stage};
use factlens_core::topics::FittedTopics;
use factlens_core::OutletId;

#[derive(Parser)]
#[command(name = "factlens", version, about = "Two-outlet news sourcing analysis pipeline")]
struct Cli {
    /// Path to the run configuration file.
    #[arg(long, global = true, default_value = "run.toml")]
    config: PathBuf,
    /// Override the configured data directory.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest line-delimited article files for one outlet.
    Ingest(IngestArgs),
    /// Corpus statistics plus outlet comparisons for a period.
    Stats(StatsArgs),
    /// Match same-day articles across outlets by title similarity.
    Match(MatchArgs),
    /// Annotate stored sentences via the endpoint or the local stub rules.
    Annotate(AnnotateArgs),
    /// Parse tagged sentences from a file into span JSON.
    Parse(ParseArgs),
    /// Frequent and distinctive source spans per outlet.
    Distinct(DistinctArgs),
    /// Topic model operations.
    #[command(subcommand)]
    Topics(TopicsCommand),
    /// Whole-pipeline operations.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Serve stub embedding and annotation endpoints locally.
    StubServer(StubServerArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    outlet: String,
    /// Period as YYYY-MM-DD..YYYY-MM-DD.
    #[arg(long)]
    period: String,
    /// Input .jsonl files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    period: Option<String>,
    #[arg(long)]
    by_topic: bool,
    #[arg(long)]
    bootstrap: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    period: Option<String>,
    #[arg(long)]
    bin_width: Option<f64>,
    /// Export a seeded title-pair sample as tier:n:seed (e.g. high:100:7).
    #[arg(long)]
    export_sample: Option<String>,
    /// Use the deterministic offline embedder.
    #[arg(long)]
    stub: bool,
}

#[derive(Args)]
struct AnnotateArgs {
    #[arg(long)]
    period: Option<String>,
    /// Use the deterministic rule-based stub annotator.
    #[arg(long)]
    stub: bool,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    /// Fail on any tag violation instead of recovering.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct DistinctArgs {
    #[arg(long)]
    period: Option<String>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    top: Option<usize>,
    /// Rank all source types, not just experts.
    #[arg(long)]
    all_source_types: bool,
}

#[derive(Subcommand)]
enum TopicsCommand {
    /// Fit the topic model over the stored corpus.
    Fit {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write dominant-topic assignments for the stored corpus.
    Assign,
    /// Export top terms per topic for human labeling.
    Export {
        #[arg(long, default_value_t = 15)]
        top: usize,
    },
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Run the stages end to end (idempotent; unchanged stages are skipped).
    Run {
        /// Comma-separated stage subset (default: all).
        #[arg(long, value_delimiter = ',')]
        stages: Vec<String>,
        /// Use stub embedding and annotation backends.
        #[arg(long)]
        stub: bool,
    },
}

#[derive(Args)]
struct StubServerArgs {
    #[arg(long, default_value = "127.0.0.1:8787")]
    addr: String,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = RunConfig::load(&cli.config)
        .with_context(|| format!("loading config {}", cli.config.display()))?;
    if let Some(dir) = &cli.data_dir {
        config.data_dir = dir.clone();
    }
    Ok(config)
}

fn override_period(config: &mut RunConfig, period: &Option<String>) -> Result<()> {
    if let Some(p) = period {
        config.periods = vec![DateRange::parse(p)?];
    }
    Ok(())
}

fn run_stages(config: &RunConfig, stages: &[Stage], stub: bool) -> Result<()> {
    let outcome = pipeline::run(config, stages, stub)?;
    if outcome.executed.is_empty() {
        println!("all requested stages up to date; nothing executed");
    } else {
        let labels: Vec<&str> = outcome.executed.iter().map(|s| s.label()).collect();
        println!("executed stages: {}", labels.join(", "));
    }
    for warning in &outcome.manifest.warnings {
        println!("warning: {warning}");
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Ingest(args) => {
            let mut config = load_config(&cli)?;
            let outlet = OutletId::new(&args.outlet)?;
            if outlet != config.outlets.0 && outlet != config.outlets.1 {
                bail!("outlet `{outlet}` is not one of the configured outlets");
            }
            override_period(&mut config, &Some(args.period.clone()))?;
            config.inputs = vec![InputSpec { outlet, files: args.files.clone() }];
            run_stages(&config, &[Stage::Ingest], false)?;
            let store = CorpusStore::open(&config.data_dir)?;
            let stats = store.stats(config.periods[0])?;
            println!(
                "store now holds {} articles in {}",
                stats.total_articles(),
                config.periods[0]
            );
            Ok(())
        }
        Command::Stats(args) => {
            let mut config = load_config(&cli)?;
            override_period(&mut config, &args.period)?;
            config.stats.by_topic |= args.by_topic;
            if let Some(reps) = args.bootstrap {
                config.stats.bootstrap = reps;
            }
            if let Some(seed) = args.seed {
                config.stats.seed = seed;
            }
            run_stages(&config, &[Stage::Stats], false)?;
            print_corpus_stats(&config)?;
            println!(
                "comparisons written to {}",
                config.data_dir.join("out").join("comparisons.csv").display()
            );
            Ok(())
        }
        Command::Match(args) => {
            let mut config = load_config(&cli)?;
            override_period(&mut config, &args.period)?;
            if let Some(width) = args.bin_width {
                config.matching.bin_width = width;
            }
            run_stages(&config, &[Stage::Match], args.stub)?;
            if let Some(spec) = &args.export_sample {
                export_sample(&config, spec)?;
            }
            Ok(())
        }
        Command::Annotate(args) => {
            let mut config = load_config(&cli)?;
            override_period(&mut config, &args.period)?;
            run_stages(&config, &[Stage::Annotate], args.stub)
        }
        Command::Parse(args) => parse_file(args),
        Command::Distinct(args) => {
            let mut config = load_config(&cli)?;
            override_period(&mut config, &args.period)?;
            if let Some(alpha0) = args.alpha0 {
                config.distinct.alpha0 = alpha0;
            }
            if let Some(top) = args.top {
                config.distinct.top_k = top;
            }
            config.distinct.all_source_types |= args.all_source_types;
            run_stages(&config, &[Stage::Distinct], false)?;
            println!(
                "rankings written to {}",
                config.data_dir.join("out").join("expert_spans.csv").display()
            );
            Ok(())
        }
        Command::Topics(TopicsCommand::Fit { k, seed }) => {
            let mut config = load_config(&cli)?;
            if let Some(k) = k {
                config.topics.k = *k;
            }
            if let Some(seed) = seed {
                config.topics.seed = *seed;
            }
            run_stages(&config, &[Stage::Topics], false)
        }
        Command::Topics(TopicsCommand::Assign) => {
            let config = load_config(&cli)?;
            run_stages(&config, &[Stage::Topics], false)?;
            println!(
                "assignments written to {}",
                config.data_dir.join("out").join("assignments.csv").display()
            );
            Ok(())
        }
        Command::Topics(TopicsCommand::Export { top }) => {
            let config = load_config(&cli)?;
            let model_path = config.data_dir.join("out").join("topics_model.json");
            let fitted = FittedTopics::load(&model_path)
                .with_context(|| format!("loading {}", model_path.display()))?;
            for (topic, terms) in fitted.label_export(*top) {
                println!("{topic}\t{}", terms.join(" "));
            }
            Ok(())
        }
        Command::Pipeline(PipelineCommand::Run { stages, stub }) => {
            let config = load_config(&cli)?;
            let mut parsed = Vec::new();
            for label in stages {
                let stage = Stage::from_label(label)
                    .with_context(|| format!("unknown stage `{label}`"))?;
                parsed.push(stage);
            }
            run_stages(&config, &parsed, *stub)
        }
        Command::StubServer(args) => stub_server::serve(&args.addr),
    }
}

fn print_corpus_stats(config: &RunConfig) -> Result<()> {
    let store = CorpusStore::open(&config.data_dir)?;
    println!("{:<24} {:<8} {:>9} {:>10}", "period", "outlet", "articles", "sentences");
    for period in &config.periods {
        let stats = store.stats(*period)?;
        for row in stats.rows {
            println!(
                "{:<24} {:<8} {:>9} {:>10}",
                row.period,
                row.outlet.as_str(),
                row.articles,
                row.sentences
            );
        }
    }
    Ok(())
}

/// `--export-sample tier:n:seed` support for manual match audits.
fn export_sample(config: &RunConfig, spec: &str) -> Result<()> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [tier, n, seed] = parts[..] else {
        bail!("--export-sample expects tier:n:seed, got `{spec}`");
    };
    let tier =
        SimilarityTier::from_label(tier).with_context(|| format!("unknown tier `{tier}`"))?;
    let n: usize = n.parse().context("sample size must be an integer")?;
    let seed: u64 = seed.parse().context("seed must be an integer")?;

    let rows = read_match_records(config)?;
    let store = CorpusStore::open(&config.data_dir)?;
    let mut titles = BTreeMap::new();
    for outlet in [&config.outlets.0, &config.outlets.1] {
        for period in &config.periods {
            for article in store.articles_in(outlet, *period)? {
                titles.insert(article.id, article.title);
            }
        }
    }
    let sample = sample_pairs(&rows, &titles, tier, n, seed);
    if sample.truncated {
        println!("note: tier {} holds fewer than {n} records; exported all", tier.label());
    }
    let path = config.data_dir.join("out").join(format!("sample_{}.csv", tier.label()));
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(&path)?;
    writer.write_record(["title", "counterpart_title", "sim"])?;
    for (a, b, sim) in &sample.pairs {
        writer.serialize((a, b, sim))?;
    }
    writer.flush()?;
    println!("wrote {} pairs to {}", sample.pairs.len(), path.display());
    Ok(())
}

fn read_match_records(config: &RunConfig) -> Result<Vec<factlens_core::MatchRecord>> {
    let path = config.data_dir.join("out").join("matches.csv");
    let mut reader = csv::Reader::from_path(&path)
        .with_context(|| format!("reading {}; run `factlens match` first", path.display()))?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let (article_id, outlet, day, counterpart_id, sim, tier): (
            String,
            String,
            String,
            Option<String>,
            Option<f64>,
            String,
        ) = record?;
        rows.push(factlens_core::MatchRecord {
            article_id,
            outlet: OutletId::new(&outlet)?,
            day: day.parse()?,
            best_counterpart_id: counterpart_id,
            sim,
            tier: SimilarityTier::from_label(&tier).context("bad tier label")?,
        });
    }
    Ok(rows)
}

fn parse_file(args: &ParseArgs) -> Result<()> {
    let input = std::fs::File::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let output = std::fs::File::create(&args.output)
        .with_context(|| format!("creating {}", args.output.display()))?;
    let mut writer = std::io::BufWriter::new(output);
    let mut failures = 0usize;
    let mut recovered = 0usize;
    for (i, line) in std::io::BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sentence_id = SentenceId::new(args.input.display().to_string(), i);
        if args.strict {
            match parse_strict(sentence_id, &line) {
                Ok(sentence) => writeln!(writer, "{}", serde_json::to_string(&sentence)?)?,
                Err(errors) => {
                    failures += 1;
                    for error in errors {
                        eprintln!("line {}: {}", i + 1, error);
                    }
                }
            }
        } else {
            let (sentence, errors) = parse_recover(sentence_id, &line);
            recovered += usize::from(!errors.is_empty());
            for error in errors {
                eprintln!("line {}: {} (recovered)", i + 1, error);
            }
            writeln!(writer, "{}", serde_json::to_string(&sentence)?)?;
        }
    }
    writer.flush()?;
    if args.strict && failures > 0 {
        bail!("{failures} line(s) failed strict parsing");
    }
    if recovered > 0 {
        println!("{recovered} line(s) required recovery");
    }
    Ok(())
}
