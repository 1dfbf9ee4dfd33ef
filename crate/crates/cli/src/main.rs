//! `armafield`: synthesize, estimate, and segment 2D ARMA random fields.

mod commands;
mod schema;

use std::fmt;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use armafield_core::Error as CoreError;

#[derive(Parser)]
#[command(
    name = "armafield",
    version,
    about = "2D ARMA random fields: synthesis, Yule-Walker least-squares estimation, texture segmentation",
    after_help = "Exit codes: 0 success, 1 usage, 2 numeric failure (instability/singularity), \
                  3 degenerate data, 4 I/O."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a field from a JSON parameter file and write it as PGM
    /// plus a JSON sidecar
    Synth(SynthArgs),
    /// Estimate ARMA parameters from a PGM image and write a fit JSON
    Estimate(EstimateArgs),
    /// Segment a PGM image into texture classes by clustering per-block fits
    Segment(SegmentArgs),
    /// Score a predicted block-label CSV against a truth CSV
    Evaluate(EvaluateArgs),
    /// Build the bundled three-texture test image with its truth CSV
    #[command(name = "make-composite", hide = true)]
    MakeComposite(MakeCompositeArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// JSON parameter file: order, coefficients, sigma2, size, burn_in, seed
    #[arg(long)]
    params: std::path::PathBuf,
    /// Output directory (created if missing); writes field.pgm, field.json
    #[arg(long)]
    out: std::path::PathBuf,
    /// Override the seed from the parameter file
    #[arg(long)]
    seed: Option<u64>,
    /// Sample depth of the output raster
    #[arg(long, value_enum, default_value_t = DepthArg::Sixteen)]
    depth: DepthArg,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input binary PGM
    #[arg(long)]
    input: std::path::PathBuf,
    /// Output directory (created if missing); writes fit.json
    #[arg(long)]
    out: std::path::PathBuf,
    /// Model order as p1,p2,q1,q2
    #[arg(long, value_parser = parse_quad, default_value = "1,1,1,1")]
    order: Quad,
    /// Long-AR truncation as K1,K2; defaults to 2*max(p1+q1, p2+q2) + 2
    #[arg(long = "ar-approx", value_parser = parse_pair)]
    ar_approx: Option<Pair>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Input binary PGM
    #[arg(long)]
    input: std::path::PathBuf,
    /// Output directory (created if missing); writes labels.pgm, blocks.csv,
    /// summary.json, reconstruction.pgm
    #[arg(long)]
    out: std::path::PathBuf,
    /// Per-block model order as p1,p2,q1,q2
    #[arg(long, value_parser = parse_quad, default_value = "2,2,0,0")]
    order: Quad,
    /// Long-AR truncation as K1,K2
    #[arg(long = "ar-approx", value_parser = parse_pair, default_value = "3,3")]
    ar_approx: Pair,
    /// Block side length in pixels
    #[arg(long, default_value_t = 16)]
    block: usize,
    /// Number of texture classes
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Seed for the k-means initialization
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sliding-window step; defaults to the block size (non-overlapping)
    #[arg(long)]
    stride: Option<usize>,
    /// Drop the ln(sigma2) term from the feature vectors
    #[arg(long = "no-sigma-feature", default_value_t = false)]
    no_sigma_feature: bool,
    /// Reconstruction output variant
    #[arg(long, value_enum, default_value_t = ReconstructionArg::Innovation)]
    reconstruction: ReconstructionArg,
    /// Worker threads for block fitting; 0 uses all cores
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted block-label CSV
    #[arg(long)]
    pred: std::path::PathBuf,
    /// Ground-truth block-label CSV
    #[arg(long)]
    truth: std::path::PathBuf,
    /// Number of classes (labels >= classes count as invalid)
    #[arg(long, default_value_t = 3)]
    classes: usize,
}

#[derive(Args)]
struct MakeCompositeArgs {
    /// Output directory (created if missing); writes composite.pgm,
    /// truth.csv, composite.json
    #[arg(long)]
    out: std::path::PathBuf,
    /// Image side length in pixels
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Block side length the truth grid is aligned to
    #[arg(long, default_value_t = 16)]
    block: usize,
    /// Base seed for the three texture streams
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample depth of the output raster
    #[arg(long, value_enum, default_value_t = DepthArg::Sixteen)]
    depth: DepthArg,
}

#[derive(Clone, Copy, Debug)]
struct Quad(usize, usize, usize, usize);

#[derive(Clone, Copy, Debug)]
struct Pair(usize, usize);

fn parse_quad(s: &str) -> Result<Quad, String> {
    let parts: Vec<_> = s.split(',').map(|t| t.trim().parse::<usize>()).collect();
    match parts.as_slice() {
        [Ok(a), Ok(b), Ok(c), Ok(d)] => Ok(Quad(*a, *b, *c, *d)),
        _ => Err(format!("expected four comma-separated integers, got {s:?}")),
    }
}

fn parse_pair(s: &str) -> Result<Pair, String> {
    let parts: Vec<_> = s.split(',').map(|t| t.trim().parse::<usize>()).collect();
    match parts.as_slice() {
        [Ok(a), Ok(b)] => Ok(Pair(*a, *b)),
        _ => Err(format!("expected two comma-separated integers, got {s:?}")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DepthArg {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

impl DepthArg {
    fn bit_depth(self) -> armafield_core::imaging::BitDepth {
        match self {
            DepthArg::Eight => armafield_core::imaging::BitDepth::Eight,
            DepthArg::Sixteen => armafield_core::imaging::BitDepth::Sixteen,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReconstructionArg {
    Innovation,
    Zero,
}

impl ReconstructionArg {
    fn variant(self) -> armafield_core::imaging::ReconstructionVariant {
        match self {
            ReconstructionArg::Innovation => {
                armafield_core::imaging::ReconstructionVariant::Innovation
            }
            ReconstructionArg::Zero => armafield_core::imaging::ReconstructionVariant::Zero,
        }
    }
}

/// CLI failure carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, incompatible configuration, malformed argument values.
    Usage(String),
    /// Instability or singular linear systems.
    Numeric(String),
    /// Degenerate data: constant images, too few valid blocks.
    Degenerate(String),
    /// File-system problems and malformed input files.
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m)
            | CliError::Numeric(m)
            | CliError::Degenerate(m)
            | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::UnstableParameters | CoreError::SingularSystem => CliError::Numeric(msg),
            CoreError::DegenerateField(_) | CoreError::TooFewValidBlocks { .. } => {
                CliError::Degenerate(msg)
            }
            CoreError::PgmFormat(_) => CliError::Io(msg),
            _ => CliError::Usage(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Estimate(args) => commands::estimate(args),
        Command::Segment(args) => commands::segment(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::MakeComposite(args) => commands::make_composite(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
