use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use textline::commands::{cmd_evaluate, cmd_segment, cmd_synth, evaluate_table};
use textline::config::Settings;
use textline_core::eval::DEFAULT_ACCEPT_THRESHOLD;

#[derive(Parser)]
#[command(name = "textline", version, about = "Handwritten text line segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment page images into text lines.
    Segment {
        /// Page images (PNG or binary PGM) or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output directory for labels, reports and overlays.
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
        /// TOML file with any of the settings below.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        settings: Box<Settings>,
    },
    /// Score predicted label rasters against ground truth.
    Evaluate {
        /// Directory with `<name>.labels.png` predictions.
        pred: PathBuf,
        /// Directory with `<name>.gt.png` ground truth.
        gt: PathBuf,
        /// MatchScore acceptance threshold.
        #[arg(long, default_value_t = DEFAULT_ACCEPT_THRESHOLD)]
        threshold: f64,
    },
    /// Generate synthetic pages with ground truth.
    Synth {
        /// TOML page description.
        spec: PathBuf,
        /// Number of pages; page k uses the spec's seed + k.
        #[arg(short = 'n', long, default_value_t = 1)]
        count: usize,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Segment { inputs, out, config, settings } => {
            let file = match &config {
                Some(path) => Settings::from_file(path)?,
                None => Settings::default(),
            };
            let run = settings.or(file).resolve()?;
            for page in cmd_segment(&inputs, &out, &run)? {
                if let Some(w) = &page.warning {
                    eprintln!("warning: {}: {w}", page.input.display());
                }
                println!("document={} lines={}", page.input.display(), page.lines);
            }
        }
        Command::Evaluate { pred, gt, threshold } => {
            let (rows, total) = cmd_evaluate(&pred, &gt, threshold)?;
            print!("{}", evaluate_table(&rows, &total));
        }
        Command::Synth { spec, count, out } => {
            for page in cmd_synth(&spec, count, &out)? {
                println!("{}", page.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
