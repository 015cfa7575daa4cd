//! Subcommand implementations.
//!
//! Shared shape: assemble the run configuration, parse and validate
//! every value, read input files, then write the config echo and the
//! artifacts. Validation happens before the echo so a rejected run
//! leaves no output directory behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use envfield::bench::{run_maze_suite, MazeMethod, NamedMazeMethod};
use envfield::field::{
    build_dataset, build_goal_dataset, load_model, save_model, train_field, FieldConfig,
    FieldTargetTransform, FieldVariant, OracleKind, TrainSet,
};
use envfield::fmm::{dijkstra_solve, fmm_solve, hop_solve};
use envfield::grid2d::{generate_maze, GridPos, OccupancyGrid};
use envfield::neural::{Activation, NetworkSpec};
use envfield::planner::{gradient_descent_search, greedy_search, greedy_search_field, OracleGridField};
use envfield::scene3d::{generate_scene, sample_surface, save_vae, synth_torso_data, train_vae};
use envfield::{DistanceField, FieldModel, GridTrajectory, PlaneTrajectory, Real, Scene3D};

use crate::config::{CliError, KeySpec, RunConfig};
use crate::render;
use crate::{BenchArgs, Cli, Command, MazeGenArgs, PlanArgs, RenderArgs, SceneGenArgs, SolveArgs, TrainArgs};

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::MazeGen(a) => maze_gen(a),
        Command::SceneGen(a) => scene_gen(a),
        Command::Solve(a) => solve(a),
        Command::Train(a) => train(a),
        Command::Plan(a) => plan(a),
        Command::Bench(a) => bench(a),
        Command::Render(a) => render_cmd(a),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Parses a non-config string (an optional key's value or a list item)
/// with the same error shape as [`RunConfig::parse`].
fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| CliError::config(format!("key {key:?}: cannot parse {raw:?}: {e}")))
}

/// `max_steps`-style keys: the literal `default` defers to the library.
fn parse_budget(cfg: &RunConfig, key: &str) -> Result<Option<usize>, CliError> {
    let raw = cfg.get(key);
    if raw == "default" {
        Ok(None)
    } else {
        parse_value::<usize>(key, raw).map(Some)
    }
}

/// Goal/start cell from a `<name>_row` / `<name>_col` key pair.
fn parse_cell(cfg: &RunConfig, name: &str) -> Result<GridPos, CliError> {
    let row = cfg.parse::<usize>(&format!("{name}_row"))?;
    let col = cfg.parse::<usize>(&format!("{name}_col"))?;
    Ok(GridPos::new(row, col))
}

/// Like [`parse_cell`], but both keys may be empty; setting only one is
/// an error.
fn parse_cell_opt(cfg: &RunConfig, name: &str) -> Result<Option<GridPos>, CliError> {
    let row = cfg.opt(&format!("{name}_row"));
    let col = cfg.opt(&format!("{name}_col"));
    match (row, col) {
        (Some(r), Some(c)) => Ok(Some(GridPos::new(
            parse_value(&format!("{name}_row"), r)?,
            parse_value(&format!("{name}_col"), c)?,
        ))),
        (None, None) => Ok(None),
        _ => Err(CliError::config(format!(
            "{name}_row and {name}_col must be set together"
        ))),
    }
}

/// Expands a comma list of files and directories into file paths.
/// Directories contribute their .txt entries in name order.
fn expand_inputs(key: &str, list: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for part in list.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let path = PathBuf::from(part);
        if path.is_dir() {
            let entries = fs::read_dir(&path).map_err(|e| CliError::io(&path, e))?;
            let mut files: Vec<PathBuf> = Vec::new();
            for entry in entries {
                let entry = entry.map_err(|e| CliError::io(&path, e))?;
                let p = entry.path();
                if p.is_file() && p.extension().is_some_and(|e| e == "txt") {
                    files.push(p);
                }
            }
            if files.is_empty() {
                return Err(CliError::config(format!(
                    "key {key:?}: no .txt files in {}",
                    path.display()
                )));
            }
            files.sort();
            out.extend(files);
        } else {
            out.push(path);
        }
    }
    if out.is_empty() {
        return Err(CliError::config(format!("key {key:?}: no input files")));
    }
    Ok(out)
}

fn read_mazes(paths: &[PathBuf]) -> Result<Vec<OccupancyGrid>, CliError> {
    paths
        .iter()
        .map(|p| read_text(p)?.parse::<OccupancyGrid>().map_err(CliError::from))
        .collect()
}

const MAZE_GEN_KEYS: &[KeySpec] = &[
    KeySpec::new("height", "9"),
    KeySpec::new("width", "9"),
    KeySpec::new("density", "0.25"),
    KeySpec::new("count", "1"),
    KeySpec::new("seed", "0"),
    KeySpec::new("out", "out/mazes"),
];

fn maze_gen(a: MazeGenArgs) -> Result<(), CliError> {
    let cfg = RunConfig::assemble(
        "maze-gen",
        MAZE_GEN_KEYS,
        a.config.as_deref(),
        vec![
            ("height", a.height),
            ("width", a.width),
            ("density", a.density),
            ("count", a.count),
            ("seed", a.seed),
            ("out", a.out),
        ],
    )?;
    let height = cfg.parse::<usize>("height")?;
    let width = cfg.parse::<usize>("width")?;
    let density = cfg.parse::<f64>("density")?;
    let count = cfg.parse::<u64>("count")?;
    let seed = cfg.parse::<u64>("seed")?;
    if count == 0 {
        return Err(CliError::config("count must be positive"));
    }
    let dir = cfg.write_echo()?;
    for i in 0..count {
        let s = seed.wrapping_add(i);
        let maze = generate_maze(height, width, density, s)?;
        write_text(&dir.join(format!("maze-{s}.txt")), &maze.to_string())?;
    }
    println!("wrote {count} maze(s) to {}", dir.display());
    Ok(())
}

const SCENE_GEN_KEYS: &[KeySpec] = &[
    KeySpec::new("count", "1"),
    KeySpec::new("seed", "0"),
    KeySpec::new("out", "out/scenes"),
];

fn scene_gen(a: SceneGenArgs) -> Result<(), CliError> {
    let cfg = RunConfig::assemble(
        "scene-gen",
        SCENE_GEN_KEYS,
        a.config.as_deref(),
        vec![("count", a.count), ("seed", a.seed), ("out", a.out)],
    )?;
    let count = cfg.parse::<u64>("count")?;
    let seed = cfg.parse::<u64>("seed")?;
    if count == 0 {
        return Err(CliError::config("count must be positive"));
    }
    let dir = cfg.write_echo()?;
    for i in 0..count {
        let s = seed.wrapping_add(i);
        let scene: Scene3D = generate_scene(s);
        write_text(&dir.join(format!("scene-{s}.txt")), &scene.to_string())?;
    }
    println!("wrote {count} room(s) to {}", dir.display());
    Ok(())
}

const SOLVE_KEYS: &[KeySpec] = &[
    KeySpec::required("maze"),
    KeySpec::required("goal_row"),
    KeySpec::required("goal_col"),
    KeySpec::new("solver", "fmm"),
    KeySpec::new("out", "out/field"),
];

fn solve(a: SolveArgs) -> Result<(), CliError> {
    let cfg = RunConfig::assemble(
        "solve",
        SOLVE_KEYS,
        a.config.as_deref(),
        vec![
            ("maze", a.maze),
            ("goal_row", a.goal_row),
            ("goal_col", a.goal_col),
            ("solver", a.solver),
            ("out", a.out),
        ],
    )?;
    let maze: OccupancyGrid = read_text(Path::new(cfg.get("maze")))?.parse()?;
    let goal = parse_cell(&cfg, "goal")?;
    let field: DistanceField = match cfg.get("solver") {
        "fmm" => fmm_solve(&maze, goal)?,
        "dijkstra" => dijkstra_solve(&maze, goal)?,
        "hop" => hop_solve(&maze, goal)?,
        other => {
            return Err(CliError::config(format!(
                "unknown solver {other:?} (fmm, dijkstra or hop)"
            )))
        }
    };
    let dir = cfg.write_echo()?;
    write_text(&dir.join("field.txt"), &field.to_string())?;
    println!("wrote field.txt to {}", dir.display());
    Ok(())
}

const TRAIN_KEYS: &[KeySpec] = &[
    KeySpec::new("kind", "field"),
    KeySpec::new("mazes", ""),
    KeySpec::new("variant", "fixed"),
    KeySpec::new("oracle", "fmm"),
    KeySpec::new("goals", "1"),
    KeySpec::new("goal_row", ""),
    KeySpec::new("goal_col", ""),
    KeySpec::new("include_obstacles", "true"),
    KeySpec::new("augment", "0"),
    KeySpec::new("net", ""),
    KeySpec::new("epochs", "800"),
    KeySpec::new("batch", "64"),
    KeySpec::new("lr", "5e-5"),
    KeySpec::new("scene", ""),
    KeySpec::new("points", "512"),
    KeySpec::new("torsos", "256"),
    KeySpec::new("latent", "8"),
    KeySpec::new("cycles", "4"),
    KeySpec::new("seed", "0"),
    KeySpec::new("out", "out/model"),
];

fn train(a: TrainArgs) -> Result<(), CliError> {
    let cfg = RunConfig::assemble(
        "train",
        TRAIN_KEYS,
        a.config.as_deref(),
        vec![
            ("kind", a.kind),
            ("mazes", a.mazes),
            ("variant", a.variant),
            ("oracle", a.oracle),
            ("goals", a.goals),
            ("goal_row", a.goal_row),
            ("goal_col", a.goal_col),
            ("include_obstacles", a.include_obstacles),
            ("augment", a.augment),
            ("net", a.net),
            ("epochs", a.epochs),
            ("batch", a.batch),
            ("lr", a.lr),
            ("scene", a.scene),
            ("points", a.points),
            ("torsos", a.torsos),
            ("latent", a.latent),
            ("cycles", a.cycles),
            ("seed", a.seed),
            ("out", a.out),
        ],
    )?;
    match cfg.get("kind") {
        "field" => train_field_cmd(&cfg),
        "vae" => train_vae_cmd(&cfg),
        other => Err(CliError::config(format!(
            "unknown train kind {other:?} (field or vae)"
        ))),
    }
}

fn train_field_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let list = cfg
        .opt("mazes")
        .ok_or_else(|| CliError::config("training a field needs the mazes key"))?;
    let grids = read_mazes(&expand_inputs("mazes", list)?)?;
    let variant = cfg.parse::<FieldVariant>("variant")?;
    let oracle = cfg.parse::<OracleKind>("oracle")?;
    let goals = cfg.parse::<usize>("goals")?;
    let include_obstacles = cfg.parse::<bool>("include_obstacles")?;
    let augment = cfg.parse::<f64>("augment")?;
    let epochs = cfg.parse::<usize>("epochs")?;
    let batch = cfg.parse::<usize>("batch")?;
    let seed = cfg.parse::<u64>("seed")?;
    let mut config = FieldConfig {
        learning_rate: cfg.parse::<f64>("lr")?,
        ..FieldConfig::default()
    };
    if let Some(list) = cfg.opt("net") {
        if !matches!(
            variant,
            FieldVariant::Fixed | FieldVariant::GoalConditioned
        ) {
            return Err(CliError::config(format!(
                "net widths only apply to the fixed and goal variants, not {variant}"
            )));
        }
        let input = if matches!(variant, FieldVariant::Fixed) { 2 } else { 4 };
        let mut dims = vec![input];
        for tok in list.split(',') {
            dims.push(parse_value::<usize>("net", tok.trim())?);
        }
        dims.push(1);
        config.net_spec = Some(NetworkSpec::dense_stack(&dims, Activation::sine()));
    }
    let data: TrainSet<Real> = match parse_cell_opt(cfg, "goal")? {
        Some(goal) => {
            if grids.len() != 1 {
                return Err(CliError::config(
                    "a pinned goal needs exactly one maze",
                ));
            }
            build_goal_dataset(&grids[0], goal, oracle, include_obstacles)?
        }
        None => build_dataset(&grids, oracle, goals, include_obstacles, augment, seed)?,
    };
    let (model, report) = train_field(variant, &config, &data, epochs, batch, seed)?;
    let dir = cfg.write_echo()?;
    save_model(&dir.join("model.ckpt"), &model)?;
    let summary = format!(
        "kind field\nvariant {variant}\nsamples {}\nepochs {epochs}\nfinal_loss {:.9}\n",
        data.samples.len(),
        report.final_loss
    );
    write_text(&dir.join("train.txt"), &summary)?;
    println!(
        "trained {variant} field on {} sample(s), final loss {:.6}; wrote model.ckpt to {}",
        data.samples.len(),
        report.final_loss,
        dir.display()
    );
    Ok(())
}

fn train_vae_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let scene_path = cfg
        .opt("scene")
        .ok_or_else(|| CliError::config("training a vae needs the scene key"))?;
    let scene: Scene3D = read_text(Path::new(scene_path))?.parse()?;
    let points = cfg.parse::<usize>("points")?;
    let torso_count = cfg.parse::<usize>("torsos")?;
    let latent = cfg.parse::<usize>("latent")?;
    let cycles = cfg.parse::<usize>("cycles")?;
    let epochs = cfg.parse::<usize>("epochs")?;
    let seed = cfg.parse::<u64>("seed")?;
    let cloud = sample_surface(&scene, points, seed)?;
    let torsos = synth_torso_data(&scene, torso_count, seed.wrapping_add(1))?;
    let (model, report) = train_vae(&cloud, &torsos, latent, epochs, cycles, seed)?;
    let dir = cfg.write_echo()?;
    save_vae(&dir.join("vae.ckpt"), &model)?;
    let summary = format!(
        "kind vae\npoints {}\ntorsos {}\nepochs {epochs}\nfinal_recon {:.9}\nfinal_kl {:.9}\nmean_point_error {:.9}\n",
        cloud.len(),
        torsos.len(),
        report.epoch_recon.last().copied().unwrap_or(f64::NAN),
        report.epoch_kl.last().copied().unwrap_or(f64::NAN),
        report.mean_point_error
    );
    write_text(&dir.join("train.txt"), &summary)?;
    println!(
        "trained vae on {} point(s), mean surface error {:.6}; wrote vae.ckpt to {}",
        cloud.len(),
        report.mean_point_error,
        dir.display()
    );
    Ok(())
}

const PLAN_KEYS: &[KeySpec] = &[
    KeySpec::required("maze"),
    KeySpec::new("model", ""),
    KeySpec::new("field", ""),
    KeySpec::new("planner", "greedy"),
    KeySpec::required("start_row"),
    KeySpec::required("start_col"),
    KeySpec::new("goal_row", ""),
    KeySpec::new("goal_col", ""),
    KeySpec::new("max_steps", "default"),
    KeySpec::new("step_size", "0.1"),
    KeySpec::new("goal_radius", "0.15"),
    KeySpec::new("max_iters", "200"),
    KeySpec::new("out", "out/plan"),
];

fn plan(a: PlanArgs) -> Result<(), CliError> {
    let cfg = RunConfig::assemble(
        "plan",
        PLAN_KEYS,
        a.config.as_deref(),
        vec![
            ("maze", a.maze),
            ("model", a.model),
            ("field", a.field),
            ("planner", a.planner),
            ("start_row", a.start_row),
            ("start_col", a.start_col),
            ("goal_row", a.goal_row),
            ("goal_col", a.goal_col),
            ("max_steps", a.max_steps),
            ("step_size", a.step_size),
            ("goal_radius", a.goal_radius),
            ("max_iters", a.max_iters),
            ("out", a.out),
        ],
    )?;
    let maze: OccupancyGrid = read_text(Path::new(cfg.get("maze")))?.parse()?;
    let start = parse_cell(&cfg, "start")?;
    let goal = parse_cell_opt(&cfg, "goal")?;
    let max_steps = parse_budget(&cfg, "max_steps")?;
    enum Source {
        Model(Box<FieldModel>),
        Field(DistanceField),
    }
    let source = match (cfg.opt("model"), cfg.opt("field")) {
        (Some(p), None) => Source::Model(Box::new(load_model::<Real>(Path::new(p))?)),
        (None, Some(p)) => Source::Field(read_text(Path::new(p))?.parse()?),
        _ => {
            return Err(CliError::config(
                "set exactly one of the model and field keys",
            ))
        }
    };
    let planner = cfg.get("planner");
    let (text, status) = match (&source, planner) {
        (Source::Model(model), "greedy") => {
            let goal = goal.ok_or_else(|| {
                CliError::config("planning with a model needs goal_row and goal_col")
            })?;
            let traj = greedy_search(model, &maze, start, goal, max_steps)?;
            (traj.to_string(), traj.status)
        }
        (Source::Field(field), "greedy") => {
            let goal = match goal {
                Some(g) if g != field.goal() => {
                    return Err(CliError::config(format!(
                        "goal ({}, {}) does not match the field's goal ({}, {})",
                        g.row,
                        g.col,
                        field.goal().row,
                        field.goal().col
                    )))
                }
                Some(g) => g,
                None => field.goal(),
            };
            let oracle = OracleGridField::from_distance(field, &FieldTargetTransform::default());
            let budget = max_steps.unwrap_or_else(|| envfield::planner::default_max_steps(&maze));
            let traj: GridTrajectory = greedy_search_field(&oracle, &maze, start, goal, budget)?;
            (traj.to_string(), traj.status)
        }
        (Source::Model(model), "gradient") => {
            let goal = goal.ok_or_else(|| {
                CliError::config("planning with a model needs goal_row and goal_col")
            })?;
            let traj: PlaneTrajectory = gradient_descent_search(
                model,
                &maze,
                maze.to_norm(start)?,
                maze.to_norm(goal)?,
                cfg.parse::<f64>("step_size")?,
                cfg.parse::<f64>("goal_radius")?,
                cfg.parse::<usize>("max_iters")?,
            )?;
            (traj.to_string(), traj.status)
        }
        (Source::Field(_), "gradient") => {
            return Err(CliError::config(
                "the gradient planner differentiates a model; solved fields only support greedy",
            ))
        }
        (_, other) => {
            return Err(CliError::config(format!(
                "unknown planner {other:?} (greedy or gradient)"
            )))
        }
    };
    let dir = cfg.write_echo()?;
    write_text(&dir.join("trajectory.txt"), &text)?;
    println!("plan finished with status {status}; wrote trajectory.txt to {}", dir.display());
    Ok(())
}

const BENCH_KEYS: &[KeySpec] = &[
    KeySpec::required("mazes"),
    KeySpec::new("methods", "oracle"),
    KeySpec::new("model", ""),
    KeySpec::new("episodes", "3"),
    KeySpec::new("max_steps", "default"),
    KeySpec::new("rrt_step", "0.1"),
    KeySpec::new("rrt_bias", "0.1"),
    KeySpec::new("rrt_iters", "500"),
    KeySpec::new("prm_samples", "500"),
    KeySpec::new("prm_neighbors", "5"),
    KeySpec::new("seed", "0"),
    KeySpec::new("out", "out/bench"),
];

fn bench(a: BenchArgs) -> Result<(), CliError> {
    let cfg = RunConfig::assemble(
        "bench",
        BENCH_KEYS,
        a.config.as_deref(),
        vec![
            ("mazes", a.mazes),
            ("methods", a.methods),
            ("model", a.model),
            ("episodes", a.episodes),
            ("max_steps", a.max_steps),
            ("rrt_step", a.rrt_step),
            ("rrt_bias", a.rrt_bias),
            ("rrt_iters", a.rrt_iters),
            ("prm_samples", a.prm_samples),
            ("prm_neighbors", a.prm_neighbors),
            ("seed", a.seed),
            ("out", a.out),
        ],
    )?;
    let mazes = read_mazes(&expand_inputs("mazes", cfg.get("mazes"))?)?;
    let episodes = cfg.parse::<usize>("episodes")?;
    let max_steps = parse_budget(&cfg, "max_steps")?;
    let seed = cfg.parse::<u64>("seed")?;
    let model: Option<FieldModel> = match cfg.opt("model") {
        Some(p) => Some(load_model::<Real>(Path::new(p))?),
        None => None,
    };
    let mut methods: Vec<NamedMazeMethod<'_, Real>> = Vec::new();
    for token in cfg.get("methods").split(',') {
        let name = token.trim();
        let method = match name {
            "oracle" => MazeMethod::Oracle,
            "model" => match model.as_ref() {
                Some(m) => MazeMethod::Model(m),
                None => {
                    return Err(CliError::config(
                        "the model method needs the model key",
                    ))
                }
            },
            "rrt" => MazeMethod::Rrt {
                step: cfg.parse::<f64>("rrt_step")?,
                goal_bias: cfg.parse::<f64>("rrt_bias")?,
                max_iters: cfg.parse::<usize>("rrt_iters")?,
            },
            "prm" => MazeMethod::Prm {
                n_samples: cfg.parse::<usize>("prm_samples")?,
                k_neighbors: cfg.parse::<usize>("prm_neighbors")?,
            },
            other => {
                return Err(CliError::config(format!(
                    "unknown method {other:?} (oracle, model, rrt or prm)"
                )))
            }
        };
        methods.push(NamedMazeMethod {
            name: name.to_string(),
            method,
        });
    }
    let mut report = run_maze_suite(&methods, &mazes, episodes, max_steps, seed)?;
    report.config.extend(cfg.pairs());
    let dir = cfg.write_echo()?;
    write_text(&dir.join("report.txt"), &report.deterministic_text())?;
    write_text(&dir.join("timing.txt"), &report.timing_text())?;
    write_text(&dir.join("table.txt"), &report.table_text())?;
    println!(
        "benchmarked {} method(s) over {} episode(s); wrote report.txt, timing.txt, table.txt to {}",
        report.aggregates.len(),
        report.episodes.len() / report.aggregates.len().max(1),
        dir.display()
    );
    Ok(())
}

const RENDER_KEYS: &[KeySpec] = &[
    KeySpec::required("field"),
    KeySpec::required("maze"),
    KeySpec::new("trajectory", ""),
    KeySpec::new("scale", "16"),
    KeySpec::new("levels", "0.2,0.4,0.6,0.8"),
    KeySpec::new("out", "out/render"),
];

fn render_cmd(a: RenderArgs) -> Result<(), CliError> {
    let cfg = RunConfig::assemble(
        "render",
        RENDER_KEYS,
        a.config.as_deref(),
        vec![
            ("field", a.field),
            ("maze", a.maze),
            ("trajectory", a.trajectory),
            ("scale", a.scale),
            ("levels", a.levels),
            ("out", a.out),
        ],
    )?;
    let field: DistanceField = read_text(Path::new(cfg.get("field")))?.parse()?;
    let maze: OccupancyGrid = read_text(Path::new(cfg.get("maze")))?.parse()?;
    if field.height() != maze.height() || field.width() != maze.width() {
        return Err(CliError::config(format!(
            "field is {}x{} but the maze is {}x{}",
            field.height(),
            field.width(),
            maze.height(),
            maze.width()
        )));
    }
    let scale = cfg.parse::<usize>("scale")?;
    if scale == 0 {
        return Err(CliError::config("scale must be positive"));
    }
    let mut levels = Vec::new();
    for tok in cfg.get("levels").split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let level = parse_value::<f64>("levels", tok)?;
        if !level.is_finite() {
            return Err(CliError::config(format!("iso-level {level} is not finite")));
        }
        levels.push(level);
    }
    let trajectory = match cfg.opt("trajectory") {
        Some(p) => Some(read_text(Path::new(p))?),
        None => None,
    };

    let (h, w) = (maze.height(), maze.width());
    let transform = FieldTargetTransform::default();
    let values: Vec<Option<f64>> = (0..h * w)
        .map(|i| field.value(maze.pos(i)).map(|d| transform.apply(d)))
        .collect();
    let heat = render::heatmap(&values, h, w, scale);
    let dir = cfg.write_echo()?;
    write_bytes(&dir.join("heatmap.ppm"), &heat.ppm_bytes())?;
    write_text(
        &dir.join("contours.svg"),
        &render::contour_svg(&values, h, w, scale, &levels),
    )?;
    let mut artifacts = "heatmap.ppm, contours.svg".to_string();
    if let Some(text) = trajectory {
        let mut overlay = heat;
        match text.split_whitespace().next() {
            Some("grid") => {
                let traj: GridTrajectory = text.parse()?;
                let cells: Vec<(usize, usize)> =
                    traj.points.iter().map(|p| (p.row, p.col)).collect();
                if let Some(&(r, c)) = cells.iter().find(|&&(r, c)| r >= h || c >= w) {
                    return Err(CliError::config(format!(
                        "trajectory cell ({r}, {c}) is outside the {h}x{w} maze"
                    )));
                }
                render::paint_cell_path(&mut overlay, scale, &cells);
            }
            Some("plane") => {
                let traj: PlaneTrajectory = text.parse()?;
                let points: Vec<(f64, f64)> =
                    traj.points.iter().map(|p| (p.u, p.v)).collect();
                render::paint_norm_path(&mut overlay, &points);
            }
            other => {
                return Err(CliError::config(format!(
                    "trajectory mode {:?} cannot be drawn on a maze",
                    other.unwrap_or("")
                )))
            }
        }
        write_bytes(&dir.join("overlay.ppm"), &overlay.ppm_bytes())?;
        artifacts.push_str(", overlay.ppm");
    }
    println!("wrote {artifacts} to {}", dir.display());
    Ok(())
}
