use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::commands::{self, Context, Outcome};
use crate::error::{CliError, Result};
use crate::io;
use crate::manifest::{self, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "netquality",
    version,
    about = "Beauty and connectivity analyses of photo-sharing networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Directory holding the event streams.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides any seed in the configuration; 0 when neither is set.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, env = "NETQUALITY_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Ingest the streams and report counts and dropped records.
    IngestCheck,
    /// Degree–beauty correlations and inequality of favorites and beauty.
    Metrics,
    /// Mean neighbor beauty as a function of own beauty.
    Spectrum,
    /// Share of users whose followees are mostly above the threshold.
    Illusion,
    /// Matched treatment/control experiment.
    Match,
    /// Common-neighbor and beauty-band link recommendations.
    Recommend,
    /// K-means segmentation of users.
    Cluster,
    /// Generate synthetic event streams into --out.
    Synth,
    /// Agreement between predicted scores and human ratings.
    ValidateScores,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::IngestCheck => "ingest-check",
            Command::Metrics => "metrics",
            Command::Spectrum => "spectrum",
            Command::Illusion => "illusion",
            Command::Match => "match",
            Command::Recommend => "recommend",
            Command::Cluster => "cluster",
            Command::Synth => "synth",
            Command::ValidateScores => "validate-scores",
        }
    }

    fn dispatch(self, ctx: &Context) -> Result<Outcome> {
        match self {
            Command::IngestCheck => commands::ingest_check(ctx),
            Command::Metrics => commands::metrics(ctx),
            Command::Spectrum => commands::spectrum(ctx),
            Command::Illusion => commands::illusion(ctx),
            Command::Match => commands::match_experiment(ctx),
            Command::Recommend => commands::recommend(ctx),
            Command::Cluster => commands::cluster(ctx),
            Command::Synth => commands::synth(ctx),
            Command::ValidateScores => commands::validate_scores(ctx),
        }
    }
}

fn inputs(cli: &Cli) -> Vec<PathBuf> {
    let Some(dir) = &cli.data else { return Vec::new() };
    let names: &[&str] = match cli.command {
        Command::Synth => &[],
        Command::ValidateScores => return vec![dir.join("ratings.csv"), dir.join("scores.csv")],
        _ => &io::STREAMS,
    };
    names.iter().filter_map(|n| io::stream_path(dir, n).ok()).collect()
}

/// Parses `args` and runs the subcommand. Help and version requests print
/// and return `Ok`.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            e.print().map_err(|e| CliError::Usage(e.to_string()))?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string().trim_end().to_string())),
    };
    execute(&cli)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage(String::from("--threads must be ≥ 1")));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let ctx = Context {
        data: cli.data.clone(),
        config: cli.config.clone(),
        out: cli.out.clone(),
        seed: cli.seed,
    };
    io::create_dir(&cli.out)?;
    let start = Instant::now();
    let outcome = pool.install(|| cli.command.dispatch(&ctx))?;
    RunManifest {
        subcommand: cli.command.name().to_string(),
        config: cli.config.clone(),
        inputs: inputs(cli),
        seed: outcome.seed,
        output: cli.out.clone(),
        outputs: outcome.files,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: manifest::seconds(start.elapsed()),
    }
    .write(&cli.out)
}
