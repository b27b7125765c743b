use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use studio_cli::preview::{self, MaskStats};
use studio_cli::report::{render_table, write_csv};
use studio_cli::runner::{self, RunOptions};
use studio_cli::CliError;
use studio_core::orchestrator::BackendOverrides;
use studio_core::segmentation::{Connectivity, SegmenterConfig};

#[derive(Debug, Parser)]
#[command(name = "studio", version, about = "Run correction scenarios and inspect masks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file, or every scenario under a directory, and report scores.
    Run(RunArgs),
    /// Build a mask from a gesture and print its statistics.
    Mask(MaskArgs),
    /// Score an image against a prompt.
    Score(ScoreArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario JSON file or directory.
    path: PathBuf,
    /// Where to write the CSV report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "artifacts")]
    artifact_root: PathBuf,
    #[arg(long = "backend.generation", value_name = "KEY")]
    generation: Option<String>,
    #[arg(long = "backend.inpaint", value_name = "KEY")]
    inpaint: Option<String>,
    #[arg(long = "backend.segmenter", value_name = "KEY")]
    segmenter: Option<String>,
    #[arg(long = "backend.refiner", value_name = "KEY")]
    refiner: Option<String>,
    #[arg(long = "backend.embedder", value_name = "KEY")]
    embedder: Option<String>,
    /// Scenarios run at once.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    /// Replaces every scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Conn {
    #[value(name = "4")]
    Four,
    #[value(name = "8")]
    Eight,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("gesture").required(true).args(["point", "bbox", "stroke"]))]
struct MaskArgs {
    /// PNG image to segment.
    image: PathBuf,
    /// Seed point `x,y`.
    #[arg(long)]
    point: Option<String>,
    /// Box `x0,y0,x1,y1`, corners inclusive.
    #[arg(long = "box")]
    bbox: Option<String>,
    /// Brush stroke `x,y;x,y;...`; repeat for several strokes.
    #[arg(long)]
    stroke: Vec<String>,
    /// Brush radius for strokes.
    #[arg(long, default_value_t = 0)]
    radius: u32,
    #[arg(long, default_value_t = 60.0)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "4")]
    connectivity: Conn,
    #[arg(long, default_value_t = 0.95)]
    max_region: f64,
    /// Output PNG; defaults to `<image>.mask.png`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    image: PathBuf,
    #[arg(long)]
    prompt: String,
    #[arg(long, default_value = "stub", value_name = "KEY")]
    embedder: String,
}

fn run(args: RunArgs) -> Result<u8, CliError> {
    let options = RunOptions {
        input: args.path,
        artifact_root: args.artifact_root,
        backends: BackendOverrides {
            generation: args.generation,
            inpaint: args.inpaint,
            segmenter: args.segmenter,
            refiner: args.refiner,
            embedder: args.embedder,
        },
        jobs: args.jobs as usize,
        seed: args.seed,
    };
    let summary = runner::run(&options)?;
    if let Some(out) = &args.out {
        let file = std::fs::File::create(out)
            .map_err(|e| CliError::Backend(format!("cannot write {}: {e}", out.display())))?;
        write_csv(file, &summary.rows).map_err(|e| CliError::Backend(format!("cannot write {}: {e}", out.display())))?;
    }
    print!("{}", render_table(&summary.rows));
    for f in &summary.failures {
        eprintln!("scenario {}: {}", f.scenario, f.error);
    }
    Ok(summary.exit_code())
}

fn mask(args: MaskArgs) -> Result<u8, CliError> {
    let seed = match (&args.point, &args.bbox) {
        (Some(p), _) => preview::parse_point(p)?,
        (None, Some(b)) => preview::parse_box(b)?,
        (None, None) => preview::parse_strokes(&args.stroke, args.radius)?,
    };
    let config = SegmenterConfig {
        color_threshold: args.threshold,
        connectivity: match args.connectivity {
            Conn::Four => Connectivity::Four,
            Conn::Eight => Connectivity::Eight,
        },
        max_region_fraction: args.max_region,
    };
    let image = preview::read_image(&args.image)?;
    let mask = preview::mask_preview(&image, &seed, config)?;
    let out = args.out.unwrap_or_else(|| args.image.with_extension("mask.png"));
    preview::write_mask(&out, &mask)?;
    print!("{}", MaskStats::of(&mask).render());
    println!("wrote {}", out.display());
    Ok(0)
}

fn score(args: ScoreArgs) -> Result<u8, CliError> {
    let image = preview::read_image(&args.image)?;
    let score = preview::score_image(&image, &args.prompt, &args.embedder)?;
    println!("score: {score}");
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Mask(args) => mask(args),
        Command::Score(args) => score(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
