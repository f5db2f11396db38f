//! Command-line front end: train, render, eval and inspect.

mod dataset;
mod eval;
mod inspect;
mod pose;
mod render;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "sparse-splat", version, about = "Sparse-view Gaussian splatting on the CPU")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train Gaussians from a COLMAP model, images and depth priors.
    Train(train::TrainArgs),
    /// Render a PLY checkpoint from one camera.
    Render(render::RenderArgs),
    /// Score renders of the test views with PSNR and SSIM.
    Eval(eval::EvalArgs),
    /// Dump the proximity graph and unpooling statistics of a checkpoint.
    Inspect(inspect::InspectArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train::run(a),
        Command::Render(a) => render::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Inspect(a) => inspect::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
