use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use relaug_core::augment::{
    generate, sample_requests, write_augmented, write_rejects, Backend, BackendKind, CommandBackend,
    GenerateConfig, RemoteBackend, TemplateBackend, DEFAULT_CONCURRENCY, DEFAULT_MAX_RETRIES,
};
use relaug_core::metrics::{perplexity, MetricsReport, ScorerCommand};
use relaug_core::pairgen::{
    build_approx_pairs, build_restructure_pairs, emit, read_emitted, HintPolicy, ScheduleManifest,
};
use relaug_core::restructure::RuleSet;
use relaug_core::{ingest, Corpus, Format, IngestOptions, MarkerScheme, MatchConfig, PatternIndex};

#[derive(Parser)]
#[command(
    name = "relaug",
    version,
    about = "Relation-extraction corpus augmentation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and print per-relation counts.
    Ingest {
        #[command(flatten)]
        input: Input,
        /// Also write the validated corpus back out in canonical form.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit restructuring and approximation pairs plus a schedule manifest.
    Pairs {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        lambda: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reordering rules file; the built-in rules are used when absent.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        iterations: u64,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        epochs_per_task: u64,
        /// Which target entity becomes the hint: uniform, subject or object.
        #[arg(long, default_value = "uniform")]
        hint_policy: HintPolicy,
    },
    /// Generate new marked sentences and write them as CoNLL-U-plus.
    Augment {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        multiple: u64,
        /// template, command:<path> or remote:<url>
        #[arg(long, default_value = "template")]
        backend: BackendKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pattern distance threshold for the template backend.
        #[arg(long, default_value_t = 3)]
        lambda: usize,
        /// Reject outputs whose entities do not contain the hint.
        #[arg(long)]
        strict_hint: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_RETRIES)]
        retries: usize,
        /// Parallel requests for the remote backend.
        #[arg(long, default_value_t = DEFAULT_CONCURRENCY as u64, value_parser = clap::value_parser!(u64).range(1..))]
        concurrency: u64,
    },
    /// Report lexical and pattern diversity.
    Metrics {
        #[command(flatten)]
        input: Input,
        /// Write report.json and report.txt here instead of printing the table.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory written by `pairs`; adds pair counts to the report.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Perplexity scorer: reads one sentence per line, prints one value per line.
        #[arg(long)]
        scorer: Option<String>,
        /// Score these augmented sentences instead of the input corpus.
        #[arg(long, requires = "scorer")]
        augmented: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Input {
    /// Corpus file.
    input: PathBuf,
    #[arg(long, default_value = "conllu-plus")]
    format: Format,
    /// Comma-separated closed relation vocabulary.
    #[arg(long, value_delimiter = ',')]
    relations: Option<Vec<String>>,
}

impl Input {
    fn load(&self) -> Result<Corpus> {
        let opts = IngestOptions {
            closed_relations: self
                .relations
                .as_ref()
                .map(|r| r.iter().cloned().collect::<BTreeSet<_>>()),
            markers: MarkerScheme::default(),
        };
        Ok(ingest(&self.input, self.format, &opts)?)
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { input, out } => {
            let corpus = input.load()?;
            println!("instances\t{}", corpus.len());
            for rel in &corpus.relations {
                println!("{rel}\t{}", corpus.relation_instances(rel).count());
            }
            if let Some(out) = out {
                write(&out, relaug_core::corpus::write_instances(&corpus.instances))?;
            }
        }
        Command::Pairs {
            input,
            out,
            lambda,
            seed,
            rules,
            iterations,
            epochs_per_task,
            hint_policy,
        } => {
            let corpus = input.load()?;
            let rules = match rules {
                Some(path) => RuleSet::load(&path)?,
                None => RuleSet::default(),
            };
            let scheme = MarkerScheme::default();
            let cfg = MatchConfig {
                lambda,
                ..MatchConfig::default()
            };
            let index = PatternIndex::build(&corpus);
            let pairs = build_restructure_pairs(&corpus, &rules, &scheme).merge(build_approx_pairs(
                &corpus,
                &index,
                &cfg,
                hint_policy,
                seed,
                &scheme,
            ));
            let manifest = ScheduleManifest {
                iterations: iterations as usize,
                epochs_per_task: epochs_per_task as usize,
                lambda,
                seed,
                markers: scheme,
                ..ScheduleManifest::default()
            };
            emit(&pairs, &manifest, &out)?;
            eprintln!(
                "wrote {} restructuring and {} approximation pairs to {}",
                pairs.stats.restructure_count,
                pairs.stats.approximate_count,
                out.display()
            );
        }
        Command::Augment {
            input,
            out,
            multiple,
            backend,
            seed,
            lambda,
            strict_hint,
            retries,
            concurrency,
        } => {
            let corpus = input.load()?;
            let scheme = MarkerScheme::default();
            let requests = sample_requests(&corpus, multiple as usize, seed, &scheme)?;
            let match_cfg = MatchConfig {
                lambda,
                ..MatchConfig::default()
            };
            let backend: Box<dyn Backend + '_> = match &backend {
                BackendKind::Template => {
                    Box::new(TemplateBackend::new(&corpus, match_cfg, seed, scheme.clone()))
                }
                BackendKind::Command(path) => Box::new(CommandBackend::new(path)),
                BackendKind::Remote(url) => {
                    Box::new(RemoteBackend::new(url).with_concurrency(concurrency as usize))
                }
            };
            let cfg = GenerateConfig {
                strict_hint,
                max_retries: retries,
                scheme,
            };
            let (accepted, rejects) = generate(&requests, backend.as_ref(), &cfg)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write(&out.join("augmented.conllu"), write_augmented(&accepted))?;
            write(&out.join("rejects.jsonl"), write_rejects(&rejects))?;
            eprintln!(
                "{} requests: {} accepted, {} rejected",
                requests.len(),
                accepted.len(),
                rejects.len()
            );
        }
        Command::Metrics {
            input,
            out,
            pairs,
            scorer,
            augmented,
        } => {
            let corpus = input.load()?;
            let pair_stats = match pairs {
                Some(dir) => Some(read_emitted(&dir)?.0.stats),
                None => None,
            };
            let ppl = match scorer {
                Some(cmd) => {
                    let Some(scorer) = ScorerCommand::parse(&cmd) else {
                        bail!("--scorer needs a command");
                    };
                    let texts: Vec<String> = match augmented {
                        Some(path) => {
                            let text = fs::read_to_string(&path)
                                .with_context(|| format!("reading {}", path.display()))?;
                            relaug_core::augment::read_augmented(&text)?
                                .iter()
                                .map(|a| a.tokens.join(" "))
                                .collect()
                        }
                        None => corpus
                            .instances
                            .iter()
                            .map(|i| i.forms().collect::<Vec<_>>().join(" "))
                            .collect(),
                    };
                    Some(perplexity(&texts, &scorer)?)
                }
                None => None,
            };
            let report = MetricsReport::build(&corpus.instances, pair_stats, ppl)?;
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                    let mut json = serde_json::to_string_pretty(&report)?;
                    json.push('\n');
                    write(&dir.join("report.json"), json)?;
                    write(&dir.join("report.txt"), report.to_table())?;
                }
                None => print!("{}", report.to_table()),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Library errors often embed their source already; skip repeats.
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let cause = cause.to_string();
                if !msg.contains(&cause) {
                    msg = format!("{msg}: {cause}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
