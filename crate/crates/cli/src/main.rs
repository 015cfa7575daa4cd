//! Command-line front end for the envfield library: maze and room
//! generation, exact field solving, model training, planning,
//! benchmarking and rendering.
//!
//! Every subcommand reads its settings from built-in defaults, an
//! optional `--config` file of `key value` lines, and flags, in that
//! order of precedence. The resolved settings are echoed to
//! `config.txt` inside the output directory, and that echo is itself a
//! valid config file, so any run can be reproduced from its outputs.

mod commands;
mod config;
mod render;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "envfield", version, about = "Reaching-distance fields: generate, solve, train, plan, bench, render")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample connected random mazes to text files.
    MazeGen(MazeGenArgs),
    /// Sample random furnished rooms to text files.
    SceneGen(SceneGenArgs),
    /// Solve a maze's distance-to-goal field exactly.
    Solve(SolveArgs),
    /// Train a field model or a room point autoencoder.
    Train(TrainArgs),
    /// Plan one trajectory with a trained model or a solved field.
    Plan(PlanArgs),
    /// Compare planners over a maze suite and write reports.
    Bench(BenchArgs),
    /// Render a solved field as images, optionally with a trajectory.
    Render(RenderArgs),
}

#[derive(Args)]
struct MazeGenArgs {
    /// Config file of `key value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Maze height in cells (default 9).
    #[arg(long)]
    height: Option<String>,
    /// Maze width in cells (default 9).
    #[arg(long)]
    width: Option<String>,
    /// Obstacle probability per cell, in [0, 1] (default 0.25).
    #[arg(long)]
    density: Option<String>,
    /// How many mazes to write (default 1).
    #[arg(long)]
    count: Option<String>,
    /// Seed of the first maze; maze i uses seed + i (default 0).
    #[arg(long)]
    seed: Option<String>,
    /// Output directory (default out/mazes).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SceneGenArgs {
    /// Config file of `key value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// How many rooms to write (default 1).
    #[arg(long)]
    count: Option<String>,
    /// Seed of the first room; room i uses seed + i (default 0).
    #[arg(long)]
    seed: Option<String>,
    /// Output directory (default out/scenes).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SolveArgs {
    /// Config file of `key value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Maze file to solve (required).
    #[arg(long)]
    maze: Option<String>,
    /// Goal row (required).
    #[arg(long)]
    goal_row: Option<String>,
    /// Goal column (required).
    #[arg(long)]
    goal_col: Option<String>,
    /// Solver: fmm, dijkstra or hop (default fmm).
    #[arg(long)]
    solver: Option<String>,
    /// Output directory (default out/field).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    /// Config file of `key value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// What to train: field or vae (default field).
    #[arg(long)]
    kind: Option<String>,
    /// Comma list of maze files or directories of .txt mazes.
    #[arg(long)]
    mazes: Option<String>,
    /// Field variant: fixed, goal, context or hyper (default fixed).
    #[arg(long)]
    variant: Option<String>,
    /// Distance oracle: fmm or dijkstra (default fmm).
    #[arg(long)]
    oracle: Option<String>,
    /// Random training goals per maze (default 1).
    #[arg(long)]
    goals: Option<String>,
    /// Pin the training goal to this row (with goal_col).
    #[arg(long)]
    goal_row: Option<String>,
    /// Pin the training goal to this column (with goal_row).
    #[arg(long)]
    goal_col: Option<String>,
    /// Include obstacle cells as targets (default true).
    #[arg(long)]
    include_obstacles: Option<String>,
    /// Probability of extra random obstacles per sampled goal (default 0).
    #[arg(long)]
    augment: Option<String>,
    /// Comma list of hidden layer widths; empty keeps the default net.
    #[arg(long)]
    net: Option<String>,
    /// Training epochs (default 800).
    #[arg(long)]
    epochs: Option<String>,
    /// Minibatch size (default 64).
    #[arg(long)]
    batch: Option<String>,
    /// Learning rate (default 5e-5).
    #[arg(long)]
    lr: Option<String>,
    /// Room file for vae training.
    #[arg(long)]
    scene: Option<String>,
    /// Surface points sampled for vae training (default 512).
    #[arg(long)]
    points: Option<String>,
    /// Synthetic torso placements for vae training (default 256).
    #[arg(long)]
    torsos: Option<String>,
    /// Latent dimension of the vae (default 8).
    #[arg(long)]
    latent: Option<String>,
    /// Annealing cycles for the vae divergence weight (default 4).
    #[arg(long)]
    cycles: Option<String>,
    /// Training seed (default 0).
    #[arg(long)]
    seed: Option<String>,
    /// Output directory (default out/model).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct PlanArgs {
    /// Config file of `key value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Maze file to plan in (required).
    #[arg(long)]
    maze: Option<String>,
    /// Trained model checkpoint; exactly one of model/field.
    #[arg(long)]
    model: Option<String>,
    /// Solved field file; exactly one of model/field.
    #[arg(long)]
    field: Option<String>,
    /// Planner: greedy or gradient (default greedy).
    #[arg(long)]
    planner: Option<String>,
    /// Start row (required).
    #[arg(long)]
    start_row: Option<String>,
    /// Start column (required).
    #[arg(long)]
    start_col: Option<String>,
    /// Goal row (required with a model; defaults to the field's goal).
    #[arg(long)]
    goal_row: Option<String>,
    /// Goal column (required with a model; defaults to the field's goal).
    #[arg(long)]
    goal_col: Option<String>,
    /// Step budget for greedy, or `default` for 4*(h+w) (default default).
    #[arg(long)]
    max_steps: Option<String>,
    /// Gradient step size in normalized units (default 0.1).
    #[arg(long)]
    step_size: Option<String>,
    /// Gradient goal radius in normalized units (default 0.15).
    #[arg(long)]
    goal_radius: Option<String>,
    /// Gradient iteration budget (default 200).
    #[arg(long)]
    max_iters: Option<String>,
    /// Output directory (default out/plan).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Config file of `key value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma list of maze files or directories of .txt mazes (required).
    #[arg(long)]
    mazes: Option<String>,
    /// Comma list of methods: oracle, model, rrt, prm (default oracle).
    #[arg(long)]
    methods: Option<String>,
    /// Checkpoint for the model method.
    #[arg(long)]
    model: Option<String>,
    /// Start/goal pairs per maze (default 3).
    #[arg(long)]
    episodes: Option<String>,
    /// Greedy step budget, or `default` for 4*(h+w) (default default).
    #[arg(long)]
    max_steps: Option<String>,
    /// Tree extension step in normalized units (default 0.1).
    #[arg(long)]
    rrt_step: Option<String>,
    /// Probability of steering straight to the goal (default 0.1).
    #[arg(long)]
    rrt_bias: Option<String>,
    /// Tree iteration budget (default 500).
    #[arg(long)]
    rrt_iters: Option<String>,
    /// Roadmap sample count (default 500).
    #[arg(long)]
    prm_samples: Option<String>,
    /// Roadmap neighbors per sample (default 5).
    #[arg(long)]
    prm_neighbors: Option<String>,
    /// Episode sampling seed (default 0).
    #[arg(long)]
    seed: Option<String>,
    /// Output directory (default out/bench).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct RenderArgs {
    /// Config file of `key value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Solved field file to draw (required).
    #[arg(long)]
    field: Option<String>,
    /// Maze file the field was solved on (required).
    #[arg(long)]
    maze: Option<String>,
    /// Trajectory file to overlay; empty for none.
    #[arg(long)]
    trajectory: Option<String>,
    /// Pixels per cell (default 16).
    #[arg(long)]
    scale: Option<String>,
    /// Comma list of iso-levels in (0, 1) (default 0.2,0.4,0.6,0.8).
    #[arg(long)]
    levels: Option<String>,
    /// Output directory (default out/render).
    #[arg(long)]
    out: Option<String>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = commands::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
