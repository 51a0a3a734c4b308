use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lipvsr::config::PipelineConfig;
use lipvsr::dataio::View;
use lipvsr::pipeline::{self, DecodeMode, StageCtx, StageError};
use lipvsr::synth::{self, SynthParams};

/// Thread-count override, lowest to highest precedence: all cores,
/// LIPVSR_THREADS, --threads.
const THREADS_ENV: &str = "LIPVSR_THREADS";

#[derive(Parser)]
#[command(
    name = "lipvsr",
    version,
    about = "Visual speech recognition pipeline: PCA convolutional features, \
             LSTM frame posteriors, tandem GMM-HMM decoding",
    disable_help_subcommand = true
)]
struct Cli {
    /// Pipeline config file (TOML); defaults apply when omitted
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output root: corpus dir for synth, work dir for every other stage
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Recompute and consume artifacts even when config hashes mismatch
    #[arg(long, global = true)]
    force: bool,

    /// Worker threads (overrides LIPVSR_THREADS; 0 = all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ManifestArgs {
    /// Corpus manifest; repeat for several (e.g. train + test)
    #[arg(long = "manifest", required = true, value_name = "FILE")]
    manifests: Vec<PathBuf>,
}

#[derive(Args)]
struct ViewArgs {
    #[command(flatten)]
    manifests: ManifestArgs,

    /// Camera view in degrees: 0, 30, 45, 60 or 90
    #[arg(long, value_parser = parse_view)]
    view: View,
}

#[derive(Args)]
struct TagArgs {
    #[command(flatten)]
    manifests: ManifestArgs,

    /// Tandem stream to use: a view tag (v0, v30, ...) or "fused"
    #[arg(long, value_name = "TAG")]
    tag: String,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic audio-free talking-mouth corpus
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Total speakers; the last quarter (at least one) is held out for test
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(2..))]
        speakers: u64,
        /// Phrases from the built-in list (at most 10)
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..=10))]
        phrases: u64,
        /// Repetitions of each phrase per speaker
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        reps: u64,
        /// Additive pixel noise amplitude
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Comma-separated view angles to render
        #[arg(long, default_value = "0,30", value_delimiter = ',', value_parser = parse_view)]
        views: Vec<View>,
    },
    /// Learn the two-stage PCA eigenfilter bank for one view
    LearnFilters(ViewArgs),
    /// Extract binary-hash histogram features for every frame
    Extract(ViewArgs),
    /// Train the LSTM frame classifier on labelled features
    TrainLstm(ViewArgs),
    /// Emit per-frame class posteriors from the trained classifier
    Posteriors(ViewArgs),
    /// Turn single-view posteriors into log/delta/acceleration features
    Tandem(ViewArgs),
    /// Concatenate several views' posteriors into fused tandem features
    Fuse(ManifestArgs),
    /// Embedded training of word HMMs on tandem features
    TrainHmm(TagArgs),
    /// Decode utterances against a phrase list or a word loop
    Decode {
        #[command(flatten)]
        tag: TagArgs,
        /// Phrase list file (one phrase per line); required for --mode phrases
        #[arg(long, value_name = "FILE")]
        grammar: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Phrases)]
        mode: ModeArg,
    },
    /// Score hypotheses against reference transcripts
    Score {
        #[command(flatten)]
        tag: TagArgs,
        /// Keep only this view's manifest entries
        #[arg(long, value_parser = parse_view)]
        view: Option<View>,
        /// Report label overriding the per-utterance view (e.g. "fused")
        #[arg(long, value_name = "LABEL")]
        view_label: Option<String>,
        /// Also score per-frame posteriors of this view against frame labels
        #[arg(long, value_name = "VIEW", value_parser = parse_view)]
        frames_view: Option<View>,
        /// Phoneme-to-viseme map file (needed with --frames-view)
        #[arg(long, value_name = "FILE")]
        visemes: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Phrases,
    Words,
}

fn parse_view(s: &str) -> Result<View, String> {
    View::parse(s).ok_or_else(|| format!("unknown view {s:?}; expected 0, 30, 45, 60 or 90"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let line = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("error: args: {line}");
            return ExitCode::FAILURE;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), StageError> {
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    init_threads(cli.threads)?;

    if let Command::Synth { seed, speakers, phrases, reps, noise, views } = &cli.command {
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.paths.corpus));
        let params = SynthParams {
            seed: *seed,
            speakers: *speakers as usize,
            phrases: *phrases as usize,
            reps: *reps as usize,
            noise: *noise,
            views: views.clone(),
        };
        let summary = synth::generate(&out, &params)?;
        println!(
            "synth: {} train + {} test speakers, {}+{} manifest lines, {} frames -> {}",
            summary.train_speakers.len(),
            summary.test_speakers.len(),
            summary.train_lines,
            summary.test_lines,
            summary.total_frames,
            out.display()
        );
        return Ok(());
    }

    let work = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.paths.work));
    let ctx = StageCtx::new(cfg, work, cli.force);
    let _lock = ctx.prepare()?;
    match cli.command {
        Command::Synth { .. } => unreachable!("handled above"),
        Command::LearnFilters(a) => {
            pipeline::learn_filters(&ctx, &a.manifests.manifests, a.view)?;
        }
        Command::Extract(a) => {
            pipeline::extract(&ctx, &a.manifests.manifests, a.view)?;
        }
        Command::TrainLstm(a) => {
            pipeline::train_lstm(&ctx, &a.manifests.manifests, a.view)?;
        }
        Command::Posteriors(a) => {
            pipeline::posteriors(&ctx, &a.manifests.manifests, a.view)?;
        }
        Command::Tandem(a) => {
            pipeline::tandem_stage(&ctx, &a.manifests.manifests, a.view)?;
        }
        Command::Fuse(a) => {
            pipeline::fuse_stage(&ctx, &a.manifests)?;
        }
        Command::TrainHmm(a) => {
            pipeline::train_hmm(&ctx, &a.manifests.manifests, &a.tag)?;
        }
        Command::Decode { tag, grammar, mode } => {
            let mode = match mode {
                ModeArg::Phrases => DecodeMode::Phrases,
                ModeArg::Words => DecodeMode::Words,
            };
            pipeline::decode_stage(&ctx, &tag.manifests.manifests, &tag.tag, grammar.as_deref(), mode)?;
        }
        Command::Score { tag, view, view_label, frames_view, visemes } => {
            pipeline::score_stage(
                &ctx,
                &tag.manifests.manifests,
                &tag.tag,
                view,
                view_label,
                frames_view,
                visemes.as_deref(),
            )?;
        }
    }
    Ok(())
}

fn init_threads(flag: Option<usize>) -> Result<(), StageError> {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(s) => Some(s.parse::<usize>().map_err(|_| StageError {
            category: "args",
            message: format!("{THREADS_ENV}={s}: not a thread count"),
        })?),
        Err(_) => None,
    };
    let n = flag.or(from_env).unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| StageError { category: "args", message: format!("thread pool: {e}") })
}
