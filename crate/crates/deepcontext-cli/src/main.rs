mod commands;
mod jobs;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

/// Depth-image scene parsing workflows: generate synthetic datasets, build
/// hybrid training data, learn scene templates, train the staged networks,
/// run inference, and evaluate.
#[derive(Parser)]
#[command(name = "deepcontext", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an annotated synthetic dataset (depth PNGs + JSON).
    Gen {
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of scenes to generate.
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Master seed; all scene seeds derive from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generator config JSON (seed field is overridden by --seed).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads; output is identical for any value.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Replace annotated objects with retrieved CAD primitives, multiplying
    /// a dataset split into hybrid depth images.
    Synth {
        /// Source dataset directory (contains manifest.json).
        #[arg(long)]
        dataset: PathBuf,
        /// Which split to synthesize from.
        #[arg(long, default_value = "train")]
        split: String,
        /// Output directory for the hybrid dataset.
        #[arg(long)]
        out: PathBuf,
        /// Optional OBJ model repository (directories of <category>/<id>.obj);
        /// the bundled primitive library is used when absent.
        #[arg(long)]
        repo: Option<PathBuf>,
        /// Hybrid scenes per source scene.
        #[arg(long, default_value_t = 20)]
        multiplier: usize,
        /// Shortlist size for model retrieval.
        #[arg(long, default_value_t = 3)]
        shortlist: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Learn scene templates (anchor sets) from a dataset split.
    LearnTemplates {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
        /// Output templates JSON.
        #[arg(long)]
        out: PathBuf,
        /// Per-category anchor counts, e.g. --k nightstand=2 (repeatable).
        #[arg(long = "k", value_parser = parse_k)]
        k: Vec<(String, usize)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the staged networks; resumable stage by stage.
    Train {
        /// Base (real) dataset directory.
        #[arg(long)]
        dataset: PathBuf,
        /// Hybrid dataset directory for pretraining.
        #[arg(long)]
        hybrid: Option<PathBuf>,
        /// Templates JSON from learn-templates.
        #[arg(long)]
        templates: PathBuf,
        /// Model output directory (also where earlier stages are loaded from).
        #[arg(long)]
        out: PathBuf,
        /// Which stage to run.
        #[arg(long, default_value = "all")]
        stage: String,
        /// Training config JSON; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed when set.
        #[arg(long)]
        seed: Option<u64>,
        /// Voxel grid preset.
        #[arg(long, default_value = "desk")]
        grid: String,
    },
    /// Parse one depth image (or every scene of a dataset directory).
    Infer {
        /// A depth PNG (with its *_ann.json sibling for the camera pose) or
        /// a dataset directory with a manifest.
        #[arg(long)]
        depth: PathBuf,
        /// Dataset split when --depth is a directory.
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        templates: PathBuf,
        /// Output JSON file (single image) or directory (dataset mode).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Score parses against ground truth and write an EvalReport.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Directory of SceneParse JSONs from `infer`.
        #[arg(long)]
        parses: PathBuf,
        /// Report JSON output path.
        #[arg(long)]
        out: PathBuf,
        /// Also write an aligned text table here.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Also write PR curves as CSV here.
        #[arg(long)]
        pr_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0.25)]
        iou: f64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Render a top-view SVG of a parse and/or dump PR CSV from a report.
    Plot {
        /// SceneParse JSON to draw.
        #[arg(long)]
        parse: Option<PathBuf>,
        /// Annotation JSON drawn dashed as ground truth.
        #[arg(long)]
        ann: Option<PathBuf>,
        /// EvalReport JSON whose PR curves should be dumped as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Output path (SVG for --parse, CSV for --report).
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_k(s: &str) -> Result<(String, usize), String> {
    let (cat, n) = s
        .split_once('=')
        .ok_or_else(|| format!("expected category=count, got `{s}`"))?;
    let n: usize = n.parse().map_err(|e| format!("bad count in `{s}`: {e}"))?;
    Ok((cat.to_string(), n))
}

/// Relative data paths resolve against DEEPCONTEXT_DATA_DIR when it is set.
fn resolve_data_path(p: PathBuf) -> PathBuf {
    if p.is_relative() {
        if let Ok(root) = std::env::var("DEEPCONTEXT_DATA_DIR") {
            if !root.is_empty() && !p.exists() {
                return PathBuf::from(root).join(p);
            }
        }
    }
    p
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen {
            out,
            count,
            seed,
            config,
            jobs,
        } => commands::gen::run(resolve_data_path(out), count, seed, config, jobs),
        Command::Synth {
            dataset,
            split,
            out,
            repo,
            multiplier,
            shortlist,
            seed,
            jobs,
        } => commands::synth::run(
            resolve_data_path(dataset),
            &split,
            resolve_data_path(out),
            repo,
            multiplier,
            shortlist,
            seed,
            jobs,
        ),
        Command::LearnTemplates {
            dataset,
            split,
            out,
            k,
            seed,
        } => commands::learn::run(resolve_data_path(dataset), &split, out, k, seed),
        Command::Train {
            dataset,
            hybrid,
            templates,
            out,
            stage,
            config,
            seed,
            grid,
        } => commands::train::run(
            resolve_data_path(dataset),
            hybrid.map(resolve_data_path),
            templates,
            out,
            &stage,
            config,
            seed,
            &grid,
        ),
        Command::Infer {
            depth,
            split,
            models,
            templates,
            out,
            jobs,
        } => commands::infer::run(
            resolve_data_path(depth),
            &split,
            models,
            templates,
            out,
            jobs,
        ),
        Command::Eval {
            dataset,
            split,
            parses,
            out,
            table,
            pr_csv,
            iou,
            jobs,
        } => commands::eval_cmd::run(
            resolve_data_path(dataset),
            &split,
            resolve_data_path(parses),
            out,
            table,
            pr_csv,
            iou,
            jobs,
        ),
        Command::Plot {
            parse,
            ann,
            report,
            out,
        } => commands::plot::run(parse, ann, report, out),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
