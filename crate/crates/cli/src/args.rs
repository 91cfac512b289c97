use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "vdaa", version, about = "Vision-based detect-and-avoid experiments")]
pub struct Cli {
    /// Master seed; overrides `seed` in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    /// More log output (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample encounters or a synthetic label dataset.
    #[command(subcommand)]
    Generate(Generate),
    /// Solve the collision-avoidance MDP and write the policy table.
    Solve(SolveArgs),
    /// Run encounters in closed loop and summarize safety metrics.
    Simulate(SimulateArgs),
    /// Detection metrics over label and prediction directories.
    Eval(EvalArgs),
    /// Merge simulation summaries into a side-by-side table.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum Generate {
    Encounters(GenerateEncountersArgs),
    Dataset(GenerateDatasetArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridKind {
    /// Conditions drawn independently per encounter.
    Iid,
    /// Equal numbers of encounters in each of the 288 condition cells.
    Factorial,
}

#[derive(Debug, Args)]
pub struct GenerateEncountersArgs {
    /// Number of encounters; a multiple of 288 for the factorial grid.
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = GridKind::Iid)]
    pub grid: GridKind,
    #[arg(long, default_value = "encounters")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateDatasetArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "dataset")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Policy table to write.
    #[arg(long, default_value = "policy.avdp")]
    pub out: PathBuf,
    /// Stop when a sweep changes no Q value by more than this.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: u32,
    /// Also export the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PerceptionKind {
    Perfect,
    Blind,
    Stochastic,
    #[value(name = "box")]
    BoxGeometry,
    External,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Directory written by `generate encounters`.
    #[arg(long, conflicts_with = "n")]
    pub encounters: Option<PathBuf>,
    /// Sample this many IID encounters in memory instead.
    #[arg(long)]
    pub n: Option<usize>,
    /// Policy table from `solve`.
    #[arg(long, conflicts_with = "no_avoidance")]
    pub policy: Option<PathBuf>,
    /// Never alert.
    #[arg(long)]
    pub no_avoidance: bool,
    /// Perception backend; defaults to `[simulation.perception]` in the
    /// config file, which itself defaults to perfect.
    #[arg(long, value_enum)]
    pub perception: Option<PerceptionKind>,
    /// Detection-probability multiplier for the stochastic detector (default 1).
    #[arg(long)]
    pub scale: Option<f64>,
    /// Shell command speaking the external detector protocol. Without it the
    /// address is read from VDAA_DETECTOR_ADDR.
    #[arg(long)]
    pub detector_cmd: Option<String>,
    /// Comma-separated facets to slice by.
    #[arg(long, value_delimiter = ',', default_value = "all,weather,region,aircraft,timeofday")]
    pub facets: Vec<String>,
    #[arg(long, default_value = "simulation")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of `<stem>.txt` labels with optional `<stem>.json` metadata.
    #[arg(long)]
    pub labels: PathBuf,
    /// Directory of `<stem>.txt` predictions (`class cx cy w h conf`).
    #[arg(long)]
    pub predictions: PathBuf,
    /// Facets to slice by; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', default_value = "all,weather,region,aircraft,timeofday,range,relativealtitude")]
    pub facet: Vec<String>,
    /// Fail on label or prediction files without a partner.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value = "eval")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Summary files written by `simulate`.
    #[arg(long = "summary", required = true)]
    pub summaries: Vec<PathBuf>,
    /// Column names, one per summary; defaults to the parent directory names.
    #[arg(long = "name")]
    pub names: Vec<String>,
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
}
