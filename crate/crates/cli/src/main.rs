//! `motion-stream`: offline stylization, streaming simulation, benchmarking,
//! jitter reports and the streaming server.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 backend error.

mod commands;
mod settings;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use motion_stream::pipeline::Mode;
use motion_stream_service::ServiceError;

use settings::{parse_mode, ConfigArgs, StyleArgs};

#[derive(Debug, Parser)]
#[command(
    name = "motion-stream",
    version,
    about = "Streaming motion stylization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Structured,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stylize a motion file and write the joint sequence.
    Stylize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_mode, default_value = "proposed")]
        mode: Mode,
        #[command(flatten)]
        style: StyleArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Time the streaming pipeline on synthetic input.
    Bench {
        #[arg(long, default_value_t = 1000)]
        frames: usize,
        /// Seed of the synthetic input.
        #[arg(long, default_value_t = 0)]
        input_seed: u64,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Pooled jitter of joint files.
    Jitter {
        /// Files or glob patterns.
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<String>,
        /// Also count the warm-up frames recorded in each file header.
        #[arg(long)]
        include_warmup: bool,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Run every generation mode on one input and score them.
    Compare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_mode, value_delimiter = ',',
              default_value = "proposed,naive,no_reencode,noncausal")]
        modes: Vec<Mode>,
        #[command(flatten)]
        style: StyleArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Write a synthetic motion file.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 400)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        width: usize,
        #[arg(long, default_value_t = 20.0)]
        fps: f64,
    },
    /// Run the streaming server until interrupted.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
    },
}

/// Bad invocation or configuration (exit code 2).
#[derive(Debug)]
pub struct Usage(pub String);

/// Unusable input data (exit code 3).
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}
impl std::error::Error for DataError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use motion_stream::Error as E;
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if cause.is::<DataError>() || cause.is::<std::io::Error>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config { .. } | E::Argument(_) => 2,
                E::UnknownBackend(_) | E::Stride { .. } => 4,
                _ => 3,
            };
        }
        if let Some(e) = cause.downcast_ref::<ServiceError>() {
            return match e {
                ServiceError::UnknownBackend(_) | ServiceError::Backend(_) => 4,
                _ => 2,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Stylize {
            input,
            out,
            mode,
            style,
            config,
            format,
        } => commands::stylize(&input, &out, mode, &style, &config, format),
        Command::Bench {
            frames,
            input_seed,
            config,
            format,
        } => commands::bench(frames, input_seed, &config, format),
        Command::Jitter {
            inputs,
            include_warmup,
            format,
        } => commands::jitter(&inputs, include_warmup, format),
        Command::Compare {
            input,
            modes,
            style,
            config,
            format,
        } => commands::compare(&input, &modes, &style, &config, format),
        Command::Synth {
            out,
            frames,
            seed,
            width,
            fps,
        } => commands::synth(&out, frames, seed, width, fps),
        Command::Serve { config, listen } => commands::serve(config.as_deref(), listen),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
