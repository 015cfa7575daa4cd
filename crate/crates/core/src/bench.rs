//! Experiment harness: planners run over shared episode batches and the
//! outcomes fold into per-method reports.
//!
//! Two suites and one probe. [`run_maze_suite`] races grid planners (exact
//! solves, trained models, RRT, PRM) over 2D mazes; [`run_3d_suite`] does
//! the same for step search and the sampling baselines in one room;
//! [`batched_query_timing`] measures how model query cost scales with
//! batch size.
//!
//! Path quality is reported as the ratio of realized path length to an
//! exact lower bound: optimal move count for grid plans, straight-line
//! distance for continuous ones (with the gap from a path's last point to
//! the goal counted as part of its length). Both bounds are true minima,
//! so the ratio never drops below 1 for a successful episode. Wall times
//! go to a separate report section, keeping everything else
//! byte-reproducible for a given seed.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{prm_plan, rrt_plan, GridSpace2D, SceneSpace3D};
use crate::field::{FieldModel, FieldTargetTransform, PreparedField};
use crate::fmm::hop_solve;
use crate::grid2d::{sample_accessible_pair, GridPos, NormCoord, OccupancyGrid};
use crate::planner::{
    affordance_filter, default_max_steps, dist3, greedy_search_field, grid_goal_vec,
    step_search_3d_field, Affordance, GridField, OracleGridField, PlannerError, PoseStub,
    SearchStatus, SpaceField, StepSchedule, Trajectory,
};
use crate::scalar::{to_f64, Scalar};
use crate::scene3d::{scene_sdf, Scene3D};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Repetitions per timing measurement; the median is reported.
pub const TIMING_REPS: usize = 5;

/// One planner run on one start/goal pair.
///
/// `ratio` is path length over the exact optimum lower bound and is NaN
/// unless the episode reached the goal. The pose fractions are NaN unless
/// the suite was given an evaluation pose; they score every visited point
/// with the same tests the affordance gate applies.
#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub environment: String,
    pub method: String,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub status: SearchStatus,
    pub steps: usize,
    /// Wall-clock planning time; the only non-reproducible field.
    pub seconds: f64,
    pub final_distance: f64,
    pub ratio: f64,
    pub valid_fraction: f64,
    pub support_fraction: f64,
    pub free_fraction: f64,
}

impl EpisodeResult {
    pub fn succeeded(&self) -> bool {
        self.status == SearchStatus::ReachedGoal
    }
}

/// Per-method summary over all episodes of a suite.
///
/// Means of ratio and pose fractions run over the episodes where the
/// number is defined (successes, scored episodes); NaN when none are.
#[derive(Clone, Debug)]
pub struct MethodAggregate {
    pub method: String,
    pub episodes: usize,
    pub successes: usize,
    /// Percentage in [0, 100].
    pub success_rate: f64,
    pub mean_seconds: f64,
    pub mean_final_distance: f64,
    pub mean_ratio: f64,
    pub mean_valid_fraction: f64,
    pub mean_support_fraction: f64,
    pub mean_free_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub schema_version: u32,
    pub seed: u64,
    pub config: Vec<(String, String)>,
    pub episodes: Vec<EpisodeResult>,
    pub aggregates: Vec<MethodAggregate>,
}

impl BenchReport {
    /// Key-value report without wall times: identical bytes for identical
    /// inputs and seed. One record per line; episode lines carry their
    /// index so the timing section can refer back to them.
    pub fn deterministic_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "schema_version {}", self.schema_version);
        let _ = writeln!(out, "seed {}", self.seed);
        for (k, v) in &self.config {
            let _ = writeln!(out, "config {k} {v}");
        }
        for (i, e) in self.episodes.iter().enumerate() {
            let _ = writeln!(
                out,
                "episode {i} {} {} {} {} {} {} {:.9} {:.9} {:.9} {:.9} {:.9}",
                e.environment,
                e.method,
                join_coords(&e.start),
                join_coords(&e.goal),
                e.status,
                e.steps,
                e.final_distance,
                e.ratio,
                e.valid_fraction,
                e.support_fraction,
                e.free_fraction
            );
        }
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "aggregate {} {} {} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9}",
                a.method,
                a.episodes,
                a.successes,
                a.success_rate,
                a.mean_final_distance,
                a.mean_ratio,
                a.mean_valid_fraction,
                a.mean_support_fraction,
                a.mean_free_fraction
            );
        }
        out
    }

    /// Wall-time section, indexed against the deterministic episode lines.
    pub fn timing_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "schema_version {}", self.schema_version);
        for (i, e) in self.episodes.iter().enumerate() {
            let _ = writeln!(out, "timing episode {i} {:.9}", e.seconds);
        }
        for a in &self.aggregates {
            let _ = writeln!(out, "timing aggregate {} {:.9}", a.method, a.mean_seconds);
        }
        out
    }

    /// Aggregate table for humans; includes mean wall time.
    pub fn table_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>8} {:>12} {:>10} {:>10} {:>7} {:>8} {:>7}",
            "method", "episodes", "success%", "mean-time-s", "mean-dist", "mean-ratio", "valid",
            "support", "free"
        );
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "{:<16} {:>8} {:>8.2} {:>12.6} {:>10.6} {:>10.4} {:>7.4} {:>8.4} {:>7.4}",
                a.method,
                a.episodes,
                a.success_rate,
                a.mean_seconds,
                a.mean_final_distance,
                a.mean_ratio,
                a.mean_valid_fraction,
                a.mean_support_fraction,
                a.mean_free_fraction
            );
        }
        out
    }
}

fn join_coords(c: &[f64]) -> String {
    let parts: Vec<String> = c.iter().map(|x| format!("{x}")).collect();
    parts.join(",")
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values {
        n += 1;
        sum += v;
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Groups episodes by method, in order of first appearance.
pub fn aggregate_episodes(episodes: &[EpisodeResult]) -> Vec<MethodAggregate> {
    let mut order: Vec<&str> = Vec::new();
    for e in episodes {
        if !order.contains(&e.method.as_str()) {
            order.push(&e.method);
        }
    }
    order
        .into_iter()
        .map(|name| {
            let group: Vec<&EpisodeResult> =
                episodes.iter().filter(|e| e.method == name).collect();
            let successes = group.iter().filter(|e| e.succeeded()).count();
            MethodAggregate {
                method: name.to_string(),
                episodes: group.len(),
                successes,
                success_rate: 100.0 * successes as f64 / group.len() as f64,
                mean_seconds: mean(group.iter().map(|e| e.seconds)),
                mean_final_distance: mean(group.iter().map(|e| e.final_distance)),
                mean_ratio: mean(
                    group.iter().map(|e| e.ratio).filter(|r| r.is_finite()),
                ),
                mean_valid_fraction: mean(
                    group.iter().map(|e| e.valid_fraction).filter(|v| v.is_finite()),
                ),
                mean_support_fraction: mean(
                    group.iter().map(|e| e.support_fraction).filter(|v| v.is_finite()),
                ),
                mean_free_fraction: mean(
                    group.iter().map(|e| e.free_fraction).filter(|v| v.is_finite()),
                ),
            }
        })
        .collect()
}

/// Held-out split by maze generation seed: every fifth seed evaluates,
/// the rest train.
pub fn is_eval_seed(seed: u64) -> bool {
    seed % 5 == 4
}

fn check_method_names<'a>(names: impl Iterator<Item = &'a str>) -> Result<(), PlannerError> {
    let mut seen: Vec<&str> = Vec::new();
    for n in names {
        if n.is_empty() || n.chars().any(char::is_whitespace) {
            return Err(PlannerError::BadInput(format!(
                "method name {n:?} must be non-empty without whitespace"
            )));
        }
        if seen.contains(&n) {
            return Err(PlannerError::BadInput(format!("duplicate method name {n:?}")));
        }
        seen.push(n);
    }
    Ok(())
}

/// A grid planner entered in the maze suite.
pub enum MazeMethod<'a, T: Scalar> {
    /// Exact solve per episode, then greedy over the resulting field. The
    /// comparison anchor: always succeeds, always ratio 1.
    Oracle,
    /// Trained model queried through the greedy planner. The environment
    /// encoding (for variants that read the grid) is redone per episode
    /// inside the timed region.
    Model(&'a FieldModel<T>),
    Rrt {
        step: T,
        goal_bias: f64,
        max_iters: usize,
    },
    Prm {
        n_samples: usize,
        k_neighbors: usize,
    },
}

pub struct NamedMazeMethod<'a, T: Scalar> {
    pub name: String,
    pub method: MazeMethod<'a, T>,
}

struct MazeEpisode {
    maze: usize,
    start: GridPos,
    goal: GridPos,
    /// Optimal move count from an exact solve; None when disconnected.
    hops: Option<f64>,
    planner_seed: u64,
}

/// Runs every method over the same episodes: `episodes_per_maze` sampled
/// start/goal pairs per maze. `max_steps` of None takes the per-grid
/// default budget. Times cover planning only, never report assembly.
pub fn run_maze_suite<T: Scalar>(
    methods: &[NamedMazeMethod<'_, T>],
    mazes: &[OccupancyGrid],
    episodes_per_maze: usize,
    max_steps: Option<usize>,
    seed: u64,
) -> Result<BenchReport, PlannerError> {
    if methods.is_empty() || mazes.is_empty() || episodes_per_maze == 0 {
        return Err(PlannerError::BadInput(
            "maze suite needs methods, mazes and a positive episode count".into(),
        ));
    }
    check_method_names(methods.iter().map(|m| m.name.as_str()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut episodes = Vec::with_capacity(mazes.len() * episodes_per_maze);
    for (mi, grid) in mazes.iter().enumerate() {
        for _ in 0..episodes_per_maze {
            let (start, goal) = sample_accessible_pair(grid, rng.next_u64())?;
            let hops = hop_solve::<f64>(grid, goal)
                .ok()
                .and_then(|f| f.value(start));
            episodes.push(MazeEpisode {
                maze: mi,
                start,
                goal,
                hops,
                planner_seed: rng.next_u64(),
            });
        }
    }
    let mut results = Vec::with_capacity(methods.len() * episodes.len());
    for m in methods {
        for ep in &episodes {
            let grid = &mazes[ep.maze];
            let budget = max_steps.unwrap_or_else(|| default_max_steps(grid));
            results.push(run_maze_episode(&m.name, &m.method, grid, ep, budget)?);
        }
    }
    let aggregates = aggregate_episodes(&results);
    let config = vec![
        ("suite".into(), "maze".into()),
        ("mazes".into(), mazes.len().to_string()),
        ("episodes_per_maze".into(), episodes_per_maze.to_string()),
        (
            "max_steps".into(),
            max_steps.map_or_else(|| "default".into(), |m| m.to_string()),
        ),
        ("methods".into(), method_list(methods.iter().map(|m| m.name.as_str()))),
    ];
    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed,
        config,
        episodes: results,
        aggregates,
    })
}

fn method_list<'a>(names: impl Iterator<Item = &'a str>) -> String {
    let v: Vec<&str> = names.collect();
    v.join(",")
}

/// A trained model prepared once for one grid and goal, so the greedy
/// walk pays the environment encoding once per episode instead of once
/// per expansion.
struct PreparedGridField<'m, T> {
    prep: PreparedField<'m, T>,
    goal_vec: Vec<T>,
}

impl<'m, T: Scalar> PreparedGridField<'m, T> {
    fn new(
        model: &'m FieldModel<T>,
        grid: &OccupancyGrid,
        goal: GridPos,
    ) -> Result<Self, PlannerError> {
        let needs = model.variant.needs_grid();
        let prep = PreparedField::prepare(model, needs.then_some(grid))?;
        let goal_vec = grid_goal_vec(model, grid, goal)?;
        Ok(PreparedGridField { prep, goal_vec })
    }
}

impl<T: Scalar> GridField<T> for PreparedGridField<'_, T> {
    fn values(
        &self,
        grid: &OccupancyGrid,
        _goal: GridPos,
        cells: &[GridPos],
    ) -> Result<Vec<T>, PlannerError> {
        let mut flat = Vec::with_capacity(cells.len() * 2);
        for p in cells {
            let c = grid.to_norm::<T>(*p)?;
            flat.push(c.u);
            flat.push(c.v);
        }
        Ok(self.prep.query(&self.goal_vec, &flat)?)
    }
}

fn run_maze_episode<T: Scalar>(
    name: &str,
    method: &MazeMethod<'_, T>,
    grid: &OccupancyGrid,
    ep: &MazeEpisode,
    budget: usize,
) -> Result<EpisodeResult, PlannerError> {
    let env = format!("maze-{}", ep.maze);
    match method {
        MazeMethod::Oracle => {
            let t0 = Instant::now();
            let field = hop_solve::<T>(grid, ep.goal)?;
            let oracle = OracleGridField::from_distance(&field, &FieldTargetTransform::default());
            let traj = greedy_search_field(&oracle, grid, ep.start, ep.goal, budget)?;
            grid_result(env, name, grid, ep, &traj, t0.elapsed().as_secs_f64())
        }
        MazeMethod::Model(model) => {
            let t0 = Instant::now();
            let field = PreparedGridField::new(model, grid, ep.goal)?;
            let traj = greedy_search_field(&field, grid, ep.start, ep.goal, budget)?;
            grid_result(env, name, grid, ep, &traj, t0.elapsed().as_secs_f64())
        }
        MazeMethod::Rrt {
            step,
            goal_bias,
            max_iters,
        } => {
            let space = GridSpace2D::new(grid);
            let a = grid.to_norm::<T>(ep.start)?;
            let b = grid.to_norm::<T>(ep.goal)?;
            let t0 = Instant::now();
            let plan = rrt_plan(&space, a, b, *step, *goal_bias, *max_iters, ep.planner_seed)?;
            Ok(continuous_result(
                env,
                name,
                a,
                b,
                plan.as_ref(),
                SearchStatus::StepBudgetExceeded,
                t0.elapsed().as_secs_f64(),
            ))
        }
        MazeMethod::Prm {
            n_samples,
            k_neighbors,
        } => {
            let space = GridSpace2D::new(grid);
            let a = grid.to_norm::<T>(ep.start)?;
            let b = grid.to_norm::<T>(ep.goal)?;
            let t0 = Instant::now();
            let plan = prm_plan(&space, a, b, *n_samples, *k_neighbors, ep.planner_seed)?;
            Ok(continuous_result(
                env,
                name,
                a,
                b,
                plan.as_ref(),
                SearchStatus::Stuck,
                t0.elapsed().as_secs_f64(),
            ))
        }
    }
}

fn grid_result<T: Scalar>(
    env: String,
    name: &str,
    grid: &OccupancyGrid,
    ep: &MazeEpisode,
    traj: &Trajectory<GridPos, T>,
    seconds: f64,
) -> Result<EpisodeResult, PlannerError> {
    let end = *traj.points.last().expect("trajectories are never empty");
    let a = grid.to_norm::<f64>(end)?;
    let b = grid.to_norm::<f64>(ep.goal)?;
    let s = grid.to_norm::<f64>(ep.start)?;
    let succeeded = traj.status == SearchStatus::ReachedGoal;
    let ratio = if !succeeded {
        f64::NAN
    } else {
        match ep.hops {
            Some(h) if h > 0.0 => traj.steps() as f64 / h,
            Some(_) => 1.0,
            None => f64::NAN,
        }
    };
    Ok(EpisodeResult {
        environment: env,
        method: name.to_string(),
        start: vec![s.u, s.v],
        goal: vec![b.u, b.v],
        status: traj.status,
        steps: traj.steps(),
        seconds,
        final_distance: norm_dist_f64(a, b),
        ratio,
        valid_fraction: f64::NAN,
        support_fraction: f64::NAN,
        free_fraction: f64::NAN,
    })
}

fn norm_dist<T: Scalar>(a: NormCoord<T>, b: NormCoord<T>) -> T {
    let du = a.u - b.u;
    let dv = a.v - b.v;
    (du * du + dv * dv).sqrt()
}

fn norm_dist_f64(a: NormCoord<f64>, b: NormCoord<f64>) -> f64 {
    norm_dist(a, b)
}

fn continuous_result<T: Scalar>(
    env: String,
    name: &str,
    start: NormCoord<T>,
    goal: NormCoord<T>,
    plan: Option<&Trajectory<NormCoord<T>, T>>,
    fail_status: SearchStatus,
    seconds: f64,
) -> EpisodeResult {
    let (status, steps, end) = match plan {
        Some(t) => (
            t.status,
            t.steps(),
            *t.points.last().expect("trajectories are never empty"),
        ),
        None => (fail_status, 0, start),
    };
    let gap = norm_dist(end, goal);
    let euclid = norm_dist(start, goal);
    let ratio = if status != SearchStatus::ReachedGoal {
        f64::NAN
    } else {
        let mut len = gap;
        if let Some(t) = plan {
            for w in t.points.windows(2) {
                len += norm_dist(w[0], w[1]);
            }
        }
        if euclid > T::zero() {
            to_f64(len / euclid)
        } else {
            1.0
        }
    };
    EpisodeResult {
        environment: env,
        method: name.to_string(),
        start: vec![to_f64(start.u), to_f64(start.v)],
        goal: vec![to_f64(goal.u), to_f64(goal.v)],
        status,
        steps,
        seconds,
        final_distance: to_f64(gap),
        ratio,
        valid_fraction: f64::NAN,
        support_fraction: f64::NAN,
        free_fraction: f64::NAN,
    }
}

/// A 3D planner entered in the room suite.
pub enum SpaceMethod<'a, T: Scalar> {
    /// Step search over a reaching-distance field, optionally gated by a
    /// pose track.
    Field {
        field: &'a dyn SpaceField<T>,
        schedule: &'a StepSchedule<T>,
        pose_track: Option<&'a [PoseStub<T>]>,
        max_steps: usize,
    },
    Rrt {
        step: T,
        goal_bias: f64,
        max_iters: usize,
    },
    Prm {
        n_samples: usize,
        k_neighbors: usize,
    },
}

pub struct NamedSpaceMethod<'a, T: Scalar> {
    pub name: String,
    pub method: SpaceMethod<'a, T>,
}

/// Runs every method over the same start/goal pairs in one scene. When
/// `eval_pose` is given, each episode's visited points are additionally
/// scored by placing that pose at every point: the fraction supported,
/// the fraction collision-free, and the fraction passing both.
pub fn run_3d_suite<T: Scalar>(
    scene: &Scene3D<T>,
    methods: &[NamedSpaceMethod<'_, T>],
    episodes: &[([T; 3], [T; 3])],
    eval_pose: Option<&PoseStub<T>>,
    seed: u64,
) -> Result<BenchReport, PlannerError> {
    if methods.is_empty() || episodes.is_empty() {
        return Err(PlannerError::BadInput(
            "room suite needs methods and episodes".into(),
        ));
    }
    check_method_names(methods.iter().map(|m| m.name.as_str()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planner_seeds: Vec<u64> = episodes.iter().map(|_| rng.next_u64()).collect();
    let mut results = Vec::with_capacity(methods.len() * episodes.len());
    for m in methods {
        for (ei, (start, goal)) in episodes.iter().enumerate() {
            let r = match &m.method {
                SpaceMethod::Field {
                    field,
                    schedule,
                    pose_track,
                    max_steps,
                } => {
                    let t0 = Instant::now();
                    let traj = step_search_3d_field(
                        *field, scene, *start, *goal, schedule, *pose_track, *max_steps,
                    )?;
                    space_result(
                        &m.name,
                        *start,
                        *goal,
                        Some(&traj),
                        traj.status,
                        t0.elapsed().as_secs_f64(),
                        scene,
                        eval_pose,
                    )
                }
                SpaceMethod::Rrt {
                    step,
                    goal_bias,
                    max_iters,
                } => {
                    let space = SceneSpace3D::new(scene);
                    let t0 = Instant::now();
                    let plan = rrt_plan(
                        &space,
                        *start,
                        *goal,
                        *step,
                        *goal_bias,
                        *max_iters,
                        planner_seeds[ei],
                    )?;
                    space_result(
                        &m.name,
                        *start,
                        *goal,
                        plan.as_ref(),
                        SearchStatus::StepBudgetExceeded,
                        t0.elapsed().as_secs_f64(),
                        scene,
                        eval_pose,
                    )
                }
                SpaceMethod::Prm {
                    n_samples,
                    k_neighbors,
                } => {
                    let space = SceneSpace3D::new(scene);
                    let t0 = Instant::now();
                    let plan = prm_plan(
                        &space,
                        *start,
                        *goal,
                        *n_samples,
                        *k_neighbors,
                        planner_seeds[ei],
                    )?;
                    space_result(
                        &m.name,
                        *start,
                        *goal,
                        plan.as_ref(),
                        SearchStatus::Stuck,
                        t0.elapsed().as_secs_f64(),
                        scene,
                        eval_pose,
                    )
                }
            };
            results.push(r);
        }
    }
    let aggregates = aggregate_episodes(&results);
    let config = vec![
        ("suite".into(), "room".into()),
        ("boxes".into(), scene.boxes.len().to_string()),
        ("episodes".into(), episodes.len().to_string()),
        ("eval_pose".into(), eval_pose.is_some().to_string()),
        ("methods".into(), method_list(methods.iter().map(|m| m.name.as_str()))),
    ];
    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed,
        config,
        episodes: results,
        aggregates,
    })
}

/// Support and clearance of one placed pose, with the same strict
/// comparisons the affordance gate uses.
fn support_and_clearance<T: Scalar>(scene: &Scene3D<T>, pose: &PoseStub<T>) -> (bool, bool) {
    let mut supported = true;
    let mut clear = true;
    for (i, joint) in pose.joints.iter().enumerate() {
        let d = scene_sdf(scene, *joint);
        if pose.support_joint_indices.contains(&i) {
            if d > T::zero() {
                supported = false;
            }
        } else if d < T::zero() {
            clear = false;
        }
    }
    (supported, clear)
}

fn pose_fractions<T: Scalar>(
    scene: &Scene3D<T>,
    pose: &PoseStub<T>,
    points: &[[T; 3]],
) -> (f64, f64, f64) {
    let mut valid = 0usize;
    let mut supported = 0usize;
    let mut free = 0usize;
    for p in points {
        let placed = pose.placed_at(*p);
        let (sup, clear) = support_and_clearance(scene, &placed);
        debug_assert_eq!(
            sup && clear,
            affordance_filter(scene, &placed) == Affordance::Valid
        );
        if sup {
            supported += 1;
        }
        if clear {
            free += 1;
        }
        if sup && clear {
            valid += 1;
        }
    }
    let n = points.len() as f64;
    (
        valid as f64 / n,
        supported as f64 / n,
        free as f64 / n,
    )
}

#[allow(clippy::too_many_arguments)]
fn space_result<T: Scalar>(
    name: &str,
    start: [T; 3],
    goal: [T; 3],
    traj: Option<&Trajectory<[T; 3], T>>,
    fail_status: SearchStatus,
    seconds: f64,
    scene: &Scene3D<T>,
    eval_pose: Option<&PoseStub<T>>,
) -> EpisodeResult {
    let (status, steps) = match traj {
        Some(t) => (t.status, t.steps()),
        None => (fail_status, 0),
    };
    let lone = [start];
    let points: &[[T; 3]] = match traj {
        Some(t) => &t.points,
        None => &lone,
    };
    let end = *points.last().expect("trajectories are never empty");
    let gap = dist3(end, goal);
    let euclid = dist3(start, goal);
    let ratio = if status != SearchStatus::ReachedGoal {
        f64::NAN
    } else {
        let mut len = gap;
        for w in points.windows(2) {
            len += dist3(w[0], w[1]);
        }
        if euclid > T::zero() {
            to_f64(len / euclid)
        } else {
            1.0
        }
    };
    let (valid_fraction, support_fraction, free_fraction) = match eval_pose {
        Some(pose) => pose_fractions(scene, pose, points),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    EpisodeResult {
        environment: "room".to_string(),
        method: name.to_string(),
        start: start.iter().map(|c| to_f64(*c)).collect(),
        goal: goal.iter().map(|c| to_f64(*c)).collect(),
        status,
        steps,
        seconds,
        final_distance: to_f64(gap),
        ratio,
        valid_fraction,
        support_fraction,
        free_fraction,
    }
}

#[derive(Clone, Debug)]
pub struct TimingRow {
    pub batch: usize,
    pub median_seconds: f64,
    /// Raw repetitions in measurement order.
    pub samples: Vec<f64>,
}

/// Times full batched queries (environment encoding included) against one
/// grid and goal, one row per requested batch size. Query points cycle
/// through the accessible cells. Median of [`TIMING_REPS`] repetitions on
/// a monotonic clock; measurements run strictly serially.
pub fn batched_query_timing<T: Scalar>(
    model: &FieldModel<T>,
    grid: &OccupancyGrid,
    goal: GridPos,
    counts: &[usize],
) -> Result<Vec<TimingRow>, PlannerError> {
    let cells = grid.accessible_cells();
    let goal_vec = grid_goal_vec(model, grid, goal)?;
    let needs = model.variant.needs_grid();
    let mut rows = Vec::with_capacity(counts.len());
    for &n in counts {
        if n == 0 {
            return Err(PlannerError::BadInput("batch size zero".into()));
        }
        let mut flat = Vec::with_capacity(2 * n);
        for i in 0..n {
            let c = grid.to_norm::<T>(cells[i % cells.len()])?;
            flat.push(c.u);
            flat.push(c.v);
        }
        let mut samples = Vec::with_capacity(TIMING_REPS);
        for _ in 0..TIMING_REPS {
            let t0 = Instant::now();
            let prep = PreparedField::prepare(model, needs.then_some(grid))?;
            let values = prep.query(&goal_vec, &flat)?;
            std::hint::black_box(&values);
            samples.push(t0.elapsed().as_secs_f64());
        }
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        rows.push(TimingRow {
            batch: n,
            median_seconds: sorted[TIMING_REPS / 2],
            samples,
        });
    }
    Ok(rows)
}

/// Key-value text for a timing table: batch size, median, raw samples.
pub fn timing_table_text(rows: &[TimingRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "schema_version {REPORT_SCHEMA_VERSION}");
    for r in rows {
        let _ = write!(out, "timing batch {} median {:.9} samples", r.batch, r.median_seconds);
        for s in &r.samples {
            let _ = write!(out, " {s:.9}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldConfig, FieldVariant, OracleKind};
    use crate::fmm::{dijkstra3d_solve, VoxelGrid};
    use crate::grid2d::generate_maze;
    use crate::neural::{Activation, NetworkSpec};
    use crate::planner::OracleSpaceField;

    fn mazes(count: usize, side: usize, density: f64) -> Vec<OccupancyGrid> {
        (0..count as u64)
            .map(|s| generate_maze(side, side, density, s).unwrap())
            .collect()
    }

    fn oracle_entry<'a>() -> NamedMazeMethod<'a, f64> {
        NamedMazeMethod {
            name: "oracle".into(),
            method: MazeMethod::Oracle,
        }
    }

    fn small_model(seed: u64) -> FieldModel<f64> {
        let cfg = FieldConfig {
            net_spec: Some(NetworkSpec::dense_stack(&[4, 16, 1], Activation::sine())),
            ..FieldConfig::default()
        };
        FieldModel::init(
            FieldVariant::GoalConditioned,
            &cfg,
            2,
            9,
            9,
            OracleKind::Fmm,
            None,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn oracle_method_sweeps_every_maze_perfectly() {
        let mazes = mazes(4, 9, 0.25);
        let report = run_maze_suite(&[oracle_entry()], &mazes, 3, None, 5).unwrap();
        assert_eq!(report.episodes.len(), 12);
        for e in &report.episodes {
            assert_eq!(e.status, SearchStatus::ReachedGoal);
            assert_eq!(e.ratio, 1.0);
            assert_eq!(e.final_distance, 0.0);
        }
        let agg = &report.aggregates[0];
        assert_eq!(agg.method, "oracle");
        assert_eq!(agg.episodes, 12);
        assert_eq!(agg.successes, 12);
        assert_eq!(agg.success_rate, 100.0);
        assert_eq!(agg.mean_ratio, 1.0);
        assert_eq!(agg.mean_final_distance, 0.0);
    }

    #[test]
    fn success_rate_is_exact_episode_arithmetic() {
        let mazes = mazes(3, 9, 0.2);
        let model = small_model(7);
        let methods = vec![
            oracle_entry(),
            NamedMazeMethod {
                name: "untrained".into(),
                method: MazeMethod::Model(&model),
            },
        ];
        let report = run_maze_suite(&methods, &mazes, 4, None, 9).unwrap();
        for agg in &report.aggregates {
            let group: Vec<_> = report
                .episodes
                .iter()
                .filter(|e| e.method == agg.method)
                .collect();
            let successes = group.iter().filter(|e| e.succeeded()).count();
            assert_eq!(agg.episodes, group.len());
            assert_eq!(agg.successes, successes);
            assert_eq!(
                agg.success_rate,
                100.0 * successes as f64 / group.len() as f64
            );
            assert!((0.0..=100.0).contains(&agg.success_rate));
        }
    }

    #[test]
    fn ratios_of_successful_episodes_never_undercut_the_bound() {
        let mazes = mazes(3, 11, 0.2);
        let methods = vec![
            oracle_entry(),
            NamedMazeMethod {
                name: "rrt".into(),
                method: MazeMethod::Rrt {
                    step: 0.1,
                    goal_bias: 0.1,
                    max_iters: 600,
                },
            },
            NamedMazeMethod {
                name: "prm".into(),
                method: MazeMethod::Prm {
                    n_samples: 300,
                    k_neighbors: 5,
                },
            },
        ];
        let report = run_maze_suite(&methods, &mazes, 2, None, 13).unwrap();
        let mut successes = 0;
        for e in &report.episodes {
            if e.succeeded() {
                successes += 1;
                assert!(e.ratio.is_finite());
                assert!(e.ratio >= 1.0 - 1e-6, "ratio {} below bound", e.ratio);
            } else {
                assert!(e.ratio.is_nan());
            }
        }
        assert!(successes > 6);
    }

    #[test]
    fn reports_are_reproducible_and_parseable() {
        let mazes = mazes(2, 9, 0.25);
        let run = || {
            let methods = vec![
                oracle_entry(),
                NamedMazeMethod {
                    name: "rrt".into(),
                    method: MazeMethod::Rrt {
                        step: 0.1,
                        goal_bias: 0.1,
                        max_iters: 300,
                    },
                },
            ];
            run_maze_suite(&methods, &mazes, 2, None, 21).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.deterministic_text(), b.deterministic_text());

        let text = a.deterministic_text();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("schema_version 1"));
        assert_eq!(lines.next(), Some("seed 21"));
        let mut episode_lines = 0;
        let mut aggregate_lines = 0;
        for line in lines {
            let tokens: Vec<&str> = line.split(' ').collect();
            match tokens[0] {
                "config" => assert_eq!(tokens.len(), 3),
                "episode" => {
                    assert_eq!(tokens.len(), 13);
                    assert_eq!(tokens[1], episode_lines.to_string());
                    episode_lines += 1;
                }
                "aggregate" => {
                    assert_eq!(tokens.len(), 10);
                    aggregate_lines += 1;
                }
                other => panic!("unexpected record {other:?}"),
            }
        }
        assert_eq!(episode_lines, a.episodes.len());
        assert_eq!(aggregate_lines, a.aggregates.len());
        for line in a.timing_text().lines().skip(1) {
            assert!(line.starts_with("timing "));
        }
        assert!(a.table_text().lines().count() == a.aggregates.len() + 1);
    }

    #[test]
    fn split_marks_every_fifth_seed_for_evaluation() {
        let eval: Vec<u64> = (0..100).filter(|s| is_eval_seed(*s)).collect();
        assert_eq!(eval.len(), 20);
        assert!(eval.iter().all(|s| s % 5 == 4));
        assert!(!is_eval_seed(0));
        assert!(!is_eval_seed(3));
        assert!(is_eval_seed(4));
        assert!(is_eval_seed(9));
    }

    fn empty_room() -> Scene3D<f64> {
        Scene3D::new((-2.0, 2.0), (-2.0, 2.0), 2.7, Vec::new()).unwrap()
    }

    fn room_voxels(scene: &Scene3D<f64>) -> VoxelGrid<f64> {
        let dims = [16, 11, 16];
        let size = [0.25; 3];
        let origin = [scene.x_range.0, 0.0, scene.z_range.0];
        let probe = VoxelGrid::new(dims, origin, size, vec![true; 16 * 11 * 16]);
        let accessible = (0..16 * 11 * 16)
            .map(|i| scene_sdf(scene, probe.center(probe.voxel_at(i))) > 0.0)
            .collect();
        VoxelGrid::new(dims, origin, size, accessible)
    }

    #[test]
    fn room_suite_scores_poses_and_methods() {
        let scene = empty_room();
        let voxels = room_voxels(&scene);
        let goal = [0.9, 0.6, 0.6];
        let field = dijkstra3d_solve(&voxels, voxels.voxel_of(goal).unwrap()).unwrap();
        let oracle =
            OracleSpaceField::new(&voxels, &field, FieldTargetTransform::default()).unwrap();
        let schedule = StepSchedule::constant(0.3, 40).unwrap();
        let track = vec![PoseStub::<f64>::standing()];
        let eval_pose = PoseStub::<f64>::standing();
        let episodes = vec![
            ([-1.4, 0.5, -1.2], goal),
            ([1.3, 0.6, -1.4], goal),
            (goal, goal),
        ];
        let methods = vec![
            NamedSpaceMethod {
                name: "field-gated".into(),
                method: SpaceMethod::Field {
                    field: &oracle,
                    schedule: &schedule,
                    pose_track: Some(&track),
                    max_steps: 40,
                },
            },
            NamedSpaceMethod {
                name: "field".into(),
                method: SpaceMethod::Field {
                    field: &oracle,
                    schedule: &schedule,
                    pose_track: None,
                    max_steps: 40,
                },
            },
            NamedSpaceMethod {
                name: "rrt".into(),
                method: SpaceMethod::Rrt {
                    step: 0.3,
                    goal_bias: 0.1,
                    max_iters: 400,
                },
            },
            NamedSpaceMethod {
                name: "prm".into(),
                method: SpaceMethod::Prm {
                    n_samples: 200,
                    k_neighbors: 5,
                },
            },
        ];
        let report = run_3d_suite(&scene, &methods, &episodes, Some(&eval_pose), 3).unwrap();
        assert_eq!(report.episodes.len(), 12);
        for e in &report.episodes {
            for f in [e.valid_fraction, e.support_fraction, e.free_fraction] {
                assert!((0.0..=1.0).contains(&f), "fraction {f} out of range");
            }
        }
        // Third episode of each method starts at the goal.
        for m in 0..4 {
            let e = &report.episodes[m * 3 + 2];
            assert_eq!(e.status, SearchStatus::ReachedGoal);
            assert_eq!(e.final_distance, 0.0);
        }
        let by_name = |n: &str| {
            report
                .aggregates
                .iter()
                .find(|a| a.method == n)
                .unwrap()
                .clone()
        };
        let gated = by_name("field-gated");
        let plain = by_name("field");
        assert_eq!(gated.success_rate, 100.0);
        assert_eq!(plain.success_rate, 100.0);
        assert_eq!(by_name("rrt").success_rate, 100.0);
        assert_eq!(by_name("prm").success_rate, 100.0);
        assert_eq!(gated.mean_valid_fraction, 1.0);
        assert!(gated.mean_valid_fraction >= plain.mean_valid_fraction);
    }

    #[test]
    fn timing_probe_reports_medians_per_batch() {
        let model = small_model(3);
        let grid = OccupancyGrid::open(9, 9).unwrap();
        let rows =
            batched_query_timing(&model, &grid, GridPos { row: 4, col: 4 }, &[1, 4, 32]).unwrap();
        assert_eq!(rows.len(), 3);
        for (row, expect) in rows.iter().zip([1usize, 4, 32]) {
            assert_eq!(row.batch, expect);
            assert_eq!(row.samples.len(), TIMING_REPS);
            assert!(row.samples.iter().all(|s| *s > 0.0));
            let mut sorted = row.samples.clone();
            sorted.sort_by(f64::total_cmp);
            assert_eq!(row.median_seconds, sorted[TIMING_REPS / 2]);
        }
        let text = timing_table_text(&rows);
        assert!(text.starts_with("schema_version 1\n"));
        assert_eq!(text.lines().count(), 4);
        assert!(
            batched_query_timing(&model, &grid, GridPos { row: 4, col: 4 }, &[0]).is_err()
        );
    }

    #[test]
    fn empty_or_misnamed_suites_are_rejected() {
        let grids = mazes(1, 9, 0.2);
        assert!(run_maze_suite::<f64>(&[], &grids, 1, None, 0).is_err());
        assert!(run_maze_suite(&[oracle_entry()], &[], 1, None, 0).is_err());
        assert!(run_maze_suite(&[oracle_entry()], &grids, 0, None, 0).is_err());
        let bad = NamedMazeMethod::<f64> {
            name: "two words".into(),
            method: MazeMethod::Oracle,
        };
        assert!(run_maze_suite(&[bad], &grids, 1, None, 0).is_err());
        let dup = [oracle_entry(), oracle_entry()];
        assert!(run_maze_suite(&dup, &grids, 1, None, 0).is_err());
    }
}
