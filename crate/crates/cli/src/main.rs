use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tofhair_cli::commands::{
    cmd_analyze, cmd_eval, cmd_features, cmd_gridsearch, cmd_refine, cmd_simulate,
};
use tofhair_cli::{CliResult, Context, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "tofhair",
    version,
    about = "ToF-noise-aware hair segmentation pipeline"
)]
struct Args {
    /// JSON pipeline configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Dataset root (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render synthetic subjects: rgb, depth, correlation samples, mask, unary.
    Simulate,
    /// Variance maps, per-region histograms, separability tables and plots.
    Analyze,
    /// Registered depth, HVA channels, gradients and strand directions.
    Features,
    /// Dense CRF refinement of each subject's unary.
    Refine,
    /// CRF parameter grid search on the validation subjects.
    Gridsearch,
    /// IoU / mIoU of unary and refined labelings.
    Eval,
}

fn run(args: Args) -> CliResult<()> {
    let config = match &args.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let ctx = Context::new(config, args.out, args.seed, args.jobs)?;
    match args.command {
        Command::Simulate => {
            let index = cmd_simulate(&ctx)?;
            println!(
                "simulated {} subject(s) into {}",
                index.subjects.len(),
                ctx.dataset.root().display()
            );
        }
        Command::Analyze => {
            for s in cmd_analyze(&ctx)? {
                match s.hair_smooth_ratio {
                    Some(r) => println!("{}: hair/smooth variance ratio {r:.2}", s.subject),
                    None => println!("{}: analyzed", s.subject),
                }
            }
        }
        Command::Features => {
            cmd_features(&ctx)?;
            println!("features written");
        }
        Command::Refine => {
            for l in cmd_refine(&ctx)? {
                match (l.unary_argmax, l.refined) {
                    (Some(a), Some(b)) => println!("{}: energy {a:.4} -> {b:.4}", l.subject),
                    _ => println!("{}: refined (energy skipped above the cap)", l.subject),
                }
            }
        }
        Command::Gridsearch => {
            let r = cmd_gridsearch(&ctx)?;
            println!("best mean IoU {:.4} with {:?}", r.best.score, r.best.params);
        }
        Command::Eval => {
            for e in cmd_eval(&ctx)? {
                println!(
                    "{}: mIoU {:.4} -> {:.4}",
                    e.subject, e.unary.miou, e.refined.miou
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tofhair: {e}");
            e.to_exit()
        }
    }
}
