//! `streetscore` — pipeline driver for street-view appeal scoring.
//!
//! Subcommands run the stages in order: sample, fetch, rate, panel-assign,
//! panel-ingest, adjust, analyze, report. One TOML config file carries every
//! parameter; command-line flags override it. Exit codes: 0 success,
//! 1 usage/config error, 2 data validation error, 3 backend exhaustion.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::exit;
use streetscore::config::PipelineConfig;
use streetscore::panel::IngestMode;
use streetscore::pipeline::{
    cmd_adjust, cmd_analyze, cmd_fetch, cmd_panel_assign, cmd_panel_ingest, cmd_rate, cmd_report,
    cmd_sample, PipelineError,
};

#[derive(Parser)]
#[command(
    name = "streetscore",
    version,
    about = "Sample street-view locations, rate them with a vision model and a human panel, \
             and compare the score surfaces with classical and spatial statistics"
)]
struct Cli {
    /// Pipeline configuration file (TOML)
    #[arg(short, long, global = true, default_value = "pipeline.toml")]
    config: PathBuf,

    /// Override the global random seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Override the street network GeoJSON path
    #[arg(long, global = true)]
    network: Option<PathBuf>,

    /// Override the landmark file path
    #[arg(long, global = true)]
    landmarks: Option<PathBuf>,

    /// Override the tile directory
    #[arg(long, global = true)]
    tiles: Option<PathBuf>,

    /// Override the human ratings file
    #[arg(long, global = true)]
    ratings: Option<PathBuf>,

    /// Override the rater roster file
    #[arg(long, global = true)]
    raters: Option<PathBuf>,

    /// Fail on the first bad record or permanently failed rating (default)
    #[arg(long, global = true, conflicts_with = "lenient")]
    strict: bool,

    /// Skip and report bad records instead of failing
    #[arg(long, global = true)]
    lenient: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample image locations along the street network
    Sample,
    /// Compose panoramas from directional tiles and compute luminosity
    Fetch {
        /// Also write the stitched panorama PNGs
        #[arg(long)]
        panoramas: bool,
    },
    /// Rate every panorama under all six prompt models
    Rate,
    /// Assign sampled images to human raters
    PanelAssign,
    /// Validate and store the human panel ratings
    PanelIngest,
    /// Mean-center ratings and build the score surfaces
    Adjust,
    /// Run the statistical comparison of all surfaces
    Analyze,
    /// Render tables, map layers, and the headline summary
    Report,
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &cli.output_dir {
        cfg.paths.output_dir = p.clone();
    }
    if let Some(p) = &cli.network {
        cfg.paths.network = p.clone();
    }
    if let Some(p) = &cli.landmarks {
        cfg.paths.landmarks = Some(p.clone());
    }
    if let Some(p) = &cli.tiles {
        cfg.paths.tiles = p.clone();
    }
    if let Some(p) = &cli.ratings {
        cfg.paths.ratings = p.clone();
    }
    if let Some(p) = &cli.raters {
        cfg.paths.raters = p.clone();
    }
    cfg.validate()?;
    let strict = !cli.lenient;

    match &cli.command {
        Command::Sample => {
            let out = cmd_sample(&cfg)?;
            println!(
                "sampled {} points (grid {}, subsample {}, augmented {}, after dedup {})",
                out.deduped, out.grid, out.subsample, out.augmented, out.deduped
            );
        }
        Command::Fetch { panoramas } => {
            let n = cmd_fetch(&cfg, *panoramas)?;
            println!("composed {n} panoramas");
        }
        Command::Rate => {
            let out = cmd_rate(&cfg, strict)?;
            println!(
                "{} ratings on file ({} already present, {} failed)",
                out.rated, out.skipped, out.failed
            );
        }
        Command::PanelAssign => {
            let total = cmd_panel_assign(&cfg)?;
            println!("assigned {total} image-rater pairs");
        }
        Command::PanelIngest => {
            let mode = if strict {
                IngestMode::Strict
            } else {
                IngestMode::Lenient
            };
            let (accepted, skipped) = cmd_panel_ingest(&cfg, mode)?;
            println!("ingested {accepted} ratings ({skipped} skipped)");
        }
        Command::Adjust => {
            let surfaces = cmd_adjust(&cfg)?;
            println!("wrote {} score surfaces: {}", surfaces.len(), surfaces.join(", "));
        }
        Command::Analyze => {
            cmd_analyze(&cfg)?;
            println!("analysis written to {}", cfg.paths.output_dir.join("analysis").display());
        }
        Command::Report => {
            cmd_report(&cfg)?;
            println!("report written to {}", cfg.paths.output_dir.join("report").display());
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are successful outcomes; anything else is a
            // usage error
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            exit(code);
        }
    };
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            eprintln!("  caused by: {s}");
            source = s.source();
        }
        exit(e.exit_code());
    }
}
