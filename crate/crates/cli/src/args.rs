use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "btlab", version, about = "Back-translation data generation lab")]
pub struct Cli {
    /// Worker threads (outputs never depend on this).
    #[arg(long, global = true, env = "BTLAB_WORKERS")]
    pub workers: Option<usize>,
    /// Where to write the run manifest.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a vocabulary file from tokenized text.
    Vocab(VocabArgs),
    /// Train a sequence model, optionally on bilingual + pseudo-parallel data.
    Train(TrainArgs),
    /// Translate a file with a trained model.
    Translate(TranslateArgs),
    /// Back-translate monolingual target text into a pseudo-parallel corpus.
    Augment(AugmentArgs),
    /// Train IBM Model 1 and report its translation entropy.
    Ibm1(Ibm1Args),
    /// Corpus and model statistics: perplexity, top-N mass, IBM-1 entropy.
    Stats(StatsArgs),
    /// Corpus BLEU of a hypothesis file against a reference file.
    Bleu(BleuArgs),
    /// Write a synthetic toy translation task.
    Toytask(ToyTaskArgs),
    /// Run the controlled back-translation scenario.
    Scenario(ScenarioArgs),
    /// Re-run a command from its manifest and verify its outputs.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Vocab(_) => "vocab",
            Command::Train(_) => "train",
            Command::Translate(_) => "translate",
            Command::Augment(_) => "augment",
            Command::Ibm1(_) => "ibm1",
            Command::Stats(_) => "stats",
            Command::Bleu(_) => "bleu",
            Command::Toytask(_) => "toytask",
            Command::Scenario(_) => "scenario",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    /// Tokenized text files (whitespace separated).
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct ArchArgs {
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub max_positions: Option<usize>,
    /// Use the mean source encoding instead of attention.
    #[arg(long)]
    pub no_attention: bool,
}

#[derive(Debug, Args, Clone)]
pub struct TrainConfigArgs {
    /// JSON file with training options; flags override it.
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    #[arg(long)]
    pub label_smoothing: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub decay_factor: Option<f64>,
    #[arg(long)]
    pub plateau_patience: Option<usize>,
    #[arg(long)]
    pub checkpoint_interval: Option<usize>,
    #[arg(long)]
    pub batch_tokens: Option<usize>,
    #[arg(long)]
    pub max_updates: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    #[arg(long)]
    pub dev_src: PathBuf,
    #[arg(long)]
    pub dev_tgt: PathBuf,
    #[arg(long)]
    pub src_vocab: PathBuf,
    #[arg(long)]
    pub tgt_vocab: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Checkpoint log (JSON lines); defaults to `<output>.log.jsonl`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Pseudo-parallel corpus prefix written by `augment`.
    #[arg(long)]
    pub pseudo: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0, requires = "pseudo")]
    pub pseudo_weight: f64,
    /// Leave out pseudo entries with truncated or unfinished sources.
    #[arg(long, requires = "pseudo")]
    pub drop_flagged: bool,
    /// Start from an existing checkpoint instead of a fresh model.
    #[arg(long)]
    pub init_from: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub train: TrainConfigArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RenormArg {
    L1,
    Softmax,
}

#[derive(Debug, Args, Clone)]
pub struct GeneratorArgs {
    /// beam[:size], sample, topk:k, restricted:tau, nbest:N or greedy.
    #[arg(long, default_value = "beam")]
    pub strategy: String,
    #[arg(long)]
    pub beam_size: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub nbest: Option<usize>,
    /// Renormalization of restricted sampling.
    #[arg(long, value_enum)]
    pub renorm: Option<RenormArg>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Output length cap is `ceil(scale * input_len) + offset`.
    #[arg(long)]
    pub max_len_scale: Option<f64>,
    #[arg(long)]
    pub max_len_offset: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub src_vocab: PathBuf,
    #[arg(long)]
    pub tgt_vocab: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub generator: GeneratorArgs,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Target-to-source checkpoint.
    #[arg(long)]
    pub generator_model: PathBuf,
    /// Monolingual target-language text.
    #[arg(long)]
    pub mono: PathBuf,
    /// Vocabulary of the monolingual (target) language.
    #[arg(long)]
    pub mono_vocab: PathBuf,
    /// Vocabulary of the generated (source) language.
    #[arg(long)]
    pub out_vocab: PathBuf,
    /// Output prefix: `<prefix>.tgt`, `<prefix>.src.<n>`, `<prefix>.json`.
    #[arg(long)]
    pub output: PathBuf,
    /// Sources generated per monolingual sentence.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub drop_flagged: bool,
    #[command(flatten)]
    pub generator: GeneratorArgs,
}

#[derive(Debug, Args)]
pub struct Ibm1Args {
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    #[arg(long)]
    pub src_vocab: PathBuf,
    #[arg(long)]
    pub tgt_vocab: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub iterations: usize,
    /// Table as TSV (`target source prob`).
    #[arg(long)]
    pub output: PathBuf,
    /// Log-likelihoods and entropy; defaults to `<output>.json`.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    #[arg(long)]
    pub src_vocab: PathBuf,
    #[arg(long)]
    pub tgt_vocab: PathBuf,
    /// Model for perplexity and top-N mass; corpus-only stats without it.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,100")]
    pub mass_ns: Vec<usize>,
    /// Also write the mass curve as CSV.
    #[arg(long, requires = "model")]
    pub mass_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub ibm1_iterations: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BleuArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GrammarKind {
    /// Ten target words, eight source words, short templates.
    Standard,
    /// Larger random grammar with Zipfian templates.
    Generated,
}

#[derive(Debug, Args)]
pub struct ToyTaskArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "standard")]
    pub grammar: GrammarKind,
    /// Full toy configuration JSON; overrides `--grammar`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Grammar parameters JSON for `--grammar generated`.
    #[arg(long)]
    pub grammar_params: Option<PathBuf>,
    #[arg(long)]
    pub bilingual: Option<usize>,
    #[arg(long)]
    pub mono: Option<usize>,
    #[arg(long)]
    pub dev: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Full bilingual corpus to split.
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    #[arg(long)]
    pub dev_src: PathBuf,
    #[arg(long)]
    pub dev_tgt: PathBuf,
    #[arg(long)]
    pub src_vocab: PathBuf,
    #[arg(long)]
    pub tgt_vocab: PathBuf,
    /// Scenario configuration JSON; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated rows; strategy syntax plus `sample-nols`.
    #[arg(long)]
    pub strategies: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub split_ratio: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Report JSON (one report per seed).
    #[arg(long)]
    pub output: PathBuf,
    /// Text table; defaults to `<output>.txt`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub train: TrainConfigArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Worker threads for the re-run (outputs must not change).
    #[arg(long = "replay-workers")]
    pub workers: Option<usize>,
}
