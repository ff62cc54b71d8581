//! `fairsv` command-line tool. Every command writes its outputs and a
//! `manifest.json` into `--out`; `fairsv rerun --manifest FILE` replays a run.

mod plan;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fairsv::metrics::DEFAULT_OMEGAS;
use fairsv::stats::Statistic;
use fairsv::synth::{preset, SynthConfig, PRESET_NAMES};
use fairsv::uai::{ArchConfig, Mode, TrainConfig, DEFAULT_DELTAS};

use plan::{FarGrid, Plan, RunManifest, ScoreSplit, MANIFEST_FILE};

#[derive(Parser)]
#[command(name = "fairsv", version, about = "Fairness evaluation and debiasing for speaker-verification embeddings")]
struct Cli {
    /// Worker threads. Every command currently runs serially, which keeps
    /// outputs bit-exact for any value.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic embedding set
    Synth(SynthArgs),
    /// Build same-group genuine and impostor trials from an embedding set
    Trials(TrialsArgs),
    /// Cosine-score a trial list
    Score(ScoreArgs),
    /// Train an embedding transform
    Train(TrainArgs),
    /// Map embeddings through a trained checkpoint (keeps e1)
    Transform(TransformArgs),
    /// EER, FaDR curves and auFaDR for one or two score files
    Eval(EvalArgs),
    /// Paired permutation test between two systems
    Permtest(PermtestArgs),
    /// Per-group kernel density estimates of one score split
    Kde(KdeArgs),
    /// Train one model per delta and keep the best by auFaDR
    SweepDelta(SweepArgs),
    /// Replay a run from its manifest
    Rerun(RerunArgs),
}

#[derive(Args)]
struct OutArg {
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// Smallest pooled FAR of the operating-point grid, percent
    #[arg(long, default_value_t = 1.0)]
    far_min: f64,
    #[arg(long, default_value_t = 10.0)]
    far_max: f64,
    #[arg(long, default_value_t = 0.25)]
    far_step: f64,
}

impl GridArgs {
    fn resolve(&self) -> FarGrid {
        FarGrid {
            min: self.far_min,
            max: self.far_max,
            step: self.far_step,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
    preset: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    speakers_g1: Option<usize>,
    #[arg(long)]
    speakers_g2: Option<usize>,
    #[arg(long)]
    utts_per_speaker: Option<usize>,
    #[arg(long)]
    rho_g1: Option<f64>,
    #[arg(long)]
    rho_g2: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    group_direction_strength: Option<f64>,
    /// Speaker subspace dimension; 0 uses the full space
    #[arg(long)]
    speaker_rank: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct TrialsArgs {
    #[arg(long)]
    data: PathBuf,
    /// Cap on trials per (group, label) cell
    #[arg(long, default_value_t = 20_000)]
    max_per_category: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    trials: PathBuf,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct TrainOverrides {
    /// JSON training config; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Layer sizes: `full` for 512-dimensional inputs, `compact` for the
    /// 64-dimensional synthetic presets
    #[arg(long, value_parser = ["full", "compact"])]
    arch: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl TrainOverrides {
    fn resolve(&self, default_mode: Mode) -> Result<TrainConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => TrainConfig::load_json(path).map_err(|e| CliError::Data(e.into()))?,
            None => TrainConfig {
                mode: default_mode,
                ..TrainConfig::default()
            },
        };
        if let Some(m) = self.mode {
            c.mode = m;
        }
        if let Some(d) = self.delta {
            c.delta = d;
        }
        if let Some(e) = self.max_epochs {
            c.max_epochs = e;
        }
        if let Some(p) = self.patience {
            c.patience = p;
        }
        match self.arch.as_deref() {
            Some("full") => c.arch = ArchConfig::default(),
            Some("compact") => c.arch = ArchConfig::compact(),
            _ => {}
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    train: TrainOverrides,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scores_a: PathBuf,
    #[arg(long)]
    scores_b: Option<PathBuf>,
    /// Comma-separated FaDR weights on the FAR gap
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_OMEGAS)]
    omega: Vec<f64>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct PermtestArgs {
    #[arg(long)]
    scores_a: PathBuf,
    #[arg(long)]
    scores_b: PathBuf,
    #[arg(long, value_parser = parse_statistic, default_value = "aufadr")]
    stat: Statistic,
    /// Number of permutations
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Trials drawn for the auFaDR statistic; EER always uses every trial
    #[arg(long, default_value_t = 100_000)]
    subsample: usize,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct KdeArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, value_enum)]
    split: ScoreSplit,
    #[arg(long, default_value_t = 512)]
    grid_size: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct SweepArgs {
    /// Embeddings the models are trained on
    #[arg(long)]
    data: PathBuf,
    /// Embeddings of the development speakers
    #[arg(long)]
    dev_data: PathBuf,
    #[arg(long)]
    dev_trials: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DELTAS)]
    deltas: Vec<f64>,
    /// FaDR weight used to rank the deltas
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    train: TrainOverrides,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Write here instead of the manifest's output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_statistic(s: &str) -> Result<Statistic, String> {
    match s.to_ascii_lowercase().as_str() {
        "aufadr" => Ok(Statistic::AuFadr),
        "eer" => Ok(Statistic::Eer),
        other => Err(format!("unknown statistic `{other}` (expected aufadr or eer)")),
    }
}

enum CliError {
    /// Bad flags or flag values: exit 2.
    Usage(String),
    /// Unreadable or invalid data, or a failed run: exit 1.
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn resolve_synth(a: &SynthArgs) -> Result<SynthConfig, CliError> {
    let mut c = match &a.preset {
        Some(name) => preset(name).ok_or_else(|| usage(format!("unknown preset `{name}`")))?,
        None => SynthConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = a.$field { c.$field = v; })* };
    }
    set!(dim, speakers_g1, speakers_g2, utts_per_speaker, rho_g1, rho_g2, noise_sigma, group_direction_strength, speaker_rank, seed);
    c.validate().map_err(usage)?;
    Ok(c)
}

fn check_omega(omega: f64) -> Result<(), CliError> {
    fairsv::metrics::FadrParams::new(omega).map(|_| ()).map_err(usage)
}

fn check_grid(g: FarGrid) -> Result<FarGrid, CliError> {
    fairsv::metrics::far_grid(g.min, g.max, g.step).map_err(usage)?;
    Ok(g)
}

/// Folds defaults and config files into a plan and picks the output
/// directory.
fn resolve(command: Command) -> Result<(Plan, PathBuf, Option<PathBuf>), CliError> {
    Ok(match command {
        Command::Synth(a) => (Plan::Synth(resolve_synth(&a)?), a.out.out, None),
        Command::Trials(a) => (
            Plan::Trials {
                data: a.data,
                max_per_category: a.max_per_category,
                seed: a.seed,
            },
            a.out.out,
            None,
        ),
        Command::Score(a) => (
            Plan::Score {
                data: a.data,
                trials: a.trials,
            },
            a.out.out,
            None,
        ),
        Command::Train(a) => (
            Plan::Train {
                data: a.data,
                train: a.train.resolve(Mode::UaiMtl)?,
            },
            a.out.out,
            None,
        ),
        Command::Transform(a) => (
            Plan::Transform {
                checkpoint: a.checkpoint,
                data: a.data,
            },
            a.out.out,
            None,
        ),
        Command::Eval(a) => {
            if a.omega.is_empty() {
                return Err(usage("--omega needs at least one value"));
            }
            for &w in &a.omega {
                check_omega(w)?;
            }
            (
                Plan::Eval {
                    scores_a: a.scores_a,
                    scores_b: a.scores_b,
                    omegas: a.omega,
                    far_grid: check_grid(a.grid.resolve())?,
                },
                a.out.out,
                None,
            )
        }
        Command::Permtest(a) => {
            check_omega(a.omega)?;
            if a.n == 0 || a.subsample == 0 {
                return Err(usage("--n and --subsample must be at least 1"));
            }
            (
                Plan::Permtest {
                    scores_a: a.scores_a,
                    scores_b: a.scores_b,
                    stat: a.stat,
                    n: a.n,
                    subsample: a.subsample,
                    omega: a.omega,
                    far_grid: check_grid(a.grid.resolve())?,
                    seed: a.seed,
                },
                a.out.out,
                None,
            )
        }
        Command::Kde(a) => {
            if a.grid_size < 2 {
                return Err(usage("--grid-size must be at least 2"));
            }
            (
                Plan::Kde {
                    scores: a.scores,
                    split: a.split,
                    grid_size: a.grid_size,
                },
                a.out.out,
                None,
            )
        }
        Command::SweepDelta(a) => {
            check_omega(a.omega)?;
            if a.deltas.is_empty() || a.deltas.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
                return Err(usage("--deltas needs one or more non-negative values"));
            }
            (
                Plan::SweepDelta {
                    train_data: a.data,
                    dev_data: a.dev_data,
                    dev_trials: a.dev_trials,
                    deltas: a.deltas,
                    omega: a.omega,
                    far_grid: check_grid(a.grid.resolve())?,
                    train: a.train.resolve(Mode::UaiMtl)?,
                },
                a.out.out,
                None,
            )
        }
        Command::Rerun(a) => {
            let text = std::fs::read_to_string(&a.manifest)
                .map_err(|e| CliError::Data(anyhow::anyhow!("reading {}: {e}", a.manifest.display())))?;
            let m: RunManifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(anyhow::anyhow!("{}: {e}", a.manifest.display())))?;
            let out = a.out.unwrap_or(m.out_dir);
            (m.plan, out, Some(a.manifest))
        }
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    let (plan, out, replayed) = resolve(cli.command)?;
    let start = Instant::now();
    let outputs = run::execute(&plan, &out)?;
    let manifest = RunManifest {
        tool: "fairsv".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: plan.seed(),
        inputs: plan.inputs(),
        plan,
        threads: cli.threads,
        out_dir: out.clone(),
        outputs,
        duration_secs: start.elapsed().as_secs_f64(),
    };
    run::write_json(&manifest, out.join(MANIFEST_FILE))?;
    match replayed {
        Some(from) => eprintln!("replayed {} into {}", from.display(), display(&out)),
        None => eprintln!("{} done: {}", manifest.plan.name(), display(&out)),
    }
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nRun `fairsv --help` for usage.");
            ExitCode::from(2)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
