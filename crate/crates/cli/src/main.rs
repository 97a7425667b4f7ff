use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod run;
mod svg;

/// Mesh-morphing GP surrogates and reduced-order modeling tools.
#[derive(Parser)]
#[command(name = "morphrom", version, about)]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Only errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Cluster snapshots and tabulate local POD dimensions.
    Cluster(ClusterArgs),
    /// Train an MMGP model bundle.
    Train(TrainArgs),
    /// Predict output fields and scalars for every sample of a dataset.
    Predict(PredictArgs),
    /// Score a model on a dataset with references.
    Evaluate(EvaluateArgs),
    /// Reduced quadrature for snapshot integrands of a field.
    EcmDemo(EcmArgs),
    /// Render an SVG plot.
    Plot(PlotArgs),
}

#[derive(Args, Clone)]
pub struct Common {
    /// Output directory (created; must be absent or empty unless --force).
    #[arg(short, long)]
    pub out: PathBuf,
    /// Replace a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    /// JSON file with the command configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq, Debug)]
pub enum Family {
    Advection,
    Flow,
    Linear,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq, Debug)]
pub enum MeshFormatArg {
    Json,
    Binary,
}

#[derive(Args)]
pub struct GenArgs {
    pub family: Family,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "binary")]
    pub mesh_format: MeshFormatArg,
    /// Number of samples (flow).
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Seed (flow).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid cells per side (advection).
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Scalar input values, comma separated (linear).
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
}

#[derive(Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output or input field to cluster.
    #[arg(long)]
    pub field: Option<String>,
    /// `sine` or `l2`.
    #[arg(long)]
    pub metric: Option<morphrom::cluster::Metric>,
    /// Largest cluster count; the dimension study runs k = 1..=K.
    #[arg(short = 'k', long = "clusters")]
    pub k: Option<usize>,
    /// POD tolerances, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    All,
    Train,
    Test,
}

#[derive(Args)]
pub struct SubsetArgs {
    /// Which part of the dataset to use.
    #[arg(long, value_enum)]
    pub part: Option<Part>,
    /// Train fraction of the iid split.
    #[arg(long)]
    pub train_frac: Option<f64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub subset: SubsetArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub shape_eps: Option<f64>,
    #[arg(long)]
    pub output_eps: Option<f64>,
    /// One length scale for all GP inputs.
    #[arg(long)]
    pub isotropic: bool,
}

#[derive(Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub subset: SubsetArgs,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub subset: SubsetArgs,
}

#[derive(Args)]
pub struct EcmArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_points: Option<usize>,
    /// Vertical strips of the bounding box, each with its own quadrature.
    #[arg(long)]
    pub subdomains: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    /// Scatter of an `mds.csv` from `cluster`.
    Mds,
    /// Max local POD dimension against k from a `dimensions.csv`.
    Dimensions,
    /// One field of one sample on its mesh.
    Field,
    /// Residual trace from `ecm-demo`.
    Residual,
}

#[derive(Args)]
pub struct PlotArgs {
    pub kind: PlotKind,
    #[command(flatten)]
    pub common: Common,
    /// CSV input (mds, dimensions, residual).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Dataset (field).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long)]
    pub component: Option<usize>,
}

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            2 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("MORPHROM_LOG")
        .format_timestamp(None)
        .init();
}

/// Honors `MORPHROM_THREADS`; returns the thread count in use.
fn init_threads() -> anyhow::Result<usize> {
    if let Ok(v) = std::env::var("MORPHROM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| morphrom::Error::InvalidArgument(format!("MORPHROM_THREADS=`{v}` is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(rayon::current_num_threads())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<morphrom::Error>() {
        Some(me) if me.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli);
    let result = init_threads().and_then(|threads| match cli.command {
        Command::Gen(a) => commands::gen::run(a, threads),
        Command::Cluster(a) => commands::cluster::run(a, threads),
        Command::Train(a) => commands::mmgp::train(a, threads),
        Command::Predict(a) => commands::mmgp::predict(a, threads),
        Command::Evaluate(a) => commands::mmgp::evaluate(a, threads),
        Command::EcmDemo(a) => commands::ecm::run(a, threads),
        Command::Plot(a) => commands::plot::run(a, threads),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
