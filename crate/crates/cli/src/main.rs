//! `geoscale`: audio features, invariant charts and rescaled trajectories
//! from the command line.

mod commands;
mod config;
mod error;
mod files;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "geoscale", version, about = "Invariant rescaling of feature trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Pipeline configuration (JSON); built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// WAV -> cepstra -> principal-component trajectory CSV.
    Features {
        wav: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// Attenuate the band edges before computing cepstra.
        #[arg(long)]
        filter: bool,
        /// Project onto an existing principal-component model instead of
        /// fitting one.
        #[arg(long)]
        pca_model: Option<PathBuf>,
        /// Also write spectrogram and trajectory SVGs next to the output.
        #[arg(long)]
        plot: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trajectory CSV -> self-tested chart JSON.
    Chart {
        trajectory: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// Seed for the self-test sample draw.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Maps a trajectory through a chart into `s` coordinates.
    Rescale {
        chart: PathBuf,
        trajectory: PathBuf,
        /// Only rescale samples with START <= t <= END.
        #[arg(long, num_args = 2, value_names = ["START", "END"], allow_negative_numbers = true)]
        segment: Option<Vec<f64>>,
        /// Also write x and s trajectory SVGs next to the output.
        #[arg(long)]
        plot: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Traces `s` isoclines of a 2-D chart to SVG and CSV.
    Isoclines {
        chart: PathBuf,
        /// x1_lo,x2_lo,x1_hi,x2_hi; the chart's domain when absent.
        #[arg(long, value_delimiter = ',', num_args = 1, allow_negative_numbers = true)]
        region: Option<Vec<f64>>,
        /// Levels of s1; spread over the region's s range when absent.
        #[arg(long, value_delimiter = ',', num_args = 1, allow_negative_numbers = true)]
        levels1: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', num_args = 1, allow_negative_numbers = true)]
        levels2: Option<Vec<f64>>,
        /// Lattice points per axis.
        #[arg(long, default_value_t = 60)]
        resolution: usize,
        /// Trajectory CSV drawn under the isoclines.
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compares two trajectories at matching timestamps.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Compare even when the charts' reference times differ or only one
        /// input has rescale metadata.
        #[arg(long)]
        force: bool,
        #[arg(long, num_args = 2, value_names = ["START", "END"], allow_negative_numbers = true)]
        segment: Option<Vec<f64>>,
        /// Also write one SVG per dimension next to the output.
        #[arg(long)]
        plot: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generates a synthetic trajectory from a JSON spec.
    Synth {
        spec: PathBuf,
        /// Overrides the seed in the JSON recipe.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Applies an invertible transform to a trajectory.
    Transform {
        trajectory: PathBuf,
        transform: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn segment_bounds(segment: Option<Vec<f64>>) -> Option<(f64, f64)> {
    segment.map(|s| (s[0], s[1]))
}

fn run(cli: Cli) -> Result<serde_json::Value, error::CliError> {
    use commands::*;
    match cli.command {
        Command::Features { wav, config, filter, pca_model, plot, out } => {
            features(&wav, config.config.as_deref(), filter, pca_model.as_deref(), plot, &out)
        }
        Command::Chart { trajectory, config, seed, out } => chart(&trajectory, config.config.as_deref(), seed, &out),
        Command::Rescale { chart, trajectory, segment, plot, out } => {
            rescale(&chart, &trajectory, segment_bounds(segment), plot, &out)
        }
        Command::Isoclines { chart, region, levels1, levels2, resolution, overlay, out } => isoclines(
            &chart,
            IsoclineArgs { region, levels1, levels2, resolution, overlay },
            &out,
        ),
        Command::Compare { a, b, force, segment, plot, out } => {
            compare(&a, &b, force, segment_bounds(segment), plot, &out)
        }
        Command::Synth { spec, seed, out } => synth(&spec, seed, &out),
        Command::Transform { trajectory, transform: spec, out } => transform(&trajectory, &spec, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = error::CliError::validation(e.to_string().trim_end());
            eprintln!("{}", serde_json::to_string(&err).expect("error serializes"));
            return ExitCode::from(err.kind.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", serde_json::to_string(&err).expect("error serializes"));
            ExitCode::from(err.kind.exit_code() as u8)
        }
    }
}
