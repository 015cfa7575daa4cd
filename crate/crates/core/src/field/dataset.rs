//! Supervised samples from exact solvers.

use super::{FieldError, FieldTargetTransform, OracleKind};
use crate::fmm::{dijkstra_solve, fmm_solve, DistanceField};
use crate::grid2d::{GridPos, OccupancyGrid};
use crate::scalar::{to_f64, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One labeled query. `grid_id` indexes the owning [`TrainSet`]'s grid
/// list; `goal` and `query` are normalized coordinates (length 2 for grid
/// data, 3 for volumetric data).
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSample<T> {
    pub grid_id: usize,
    pub goal: Vec<T>,
    pub query: Vec<T>,
    /// Transformed distance in (0, 1], or the obstacle label for obstacle
    /// and unreachable positions.
    pub target: T,
}

/// A labeled dataset. Grid-free data (3D scenes) leaves `grids` empty and
/// sets every `grid_id` to 0.
#[derive(Clone, Debug)]
pub struct TrainSet<T> {
    pub coord_dim: usize,
    pub oracle: OracleKind,
    pub grids: Vec<OccupancyGrid>,
    pub samples: Vec<TrainSample<T>>,
}

impl<T: Scalar> TrainSet<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean absolute deviation of targets from their mean; a scale bar for
    /// judging training losses.
    pub fn target_spread(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let n = self.samples.len() as f64;
        let mean: f64 = self.samples.iter().map(|s| to_f64(s.target)).sum::<f64>() / n;
        self.samples
            .iter()
            .map(|s| (to_f64(s.target) - mean).abs())
            .sum::<f64>()
            / n
    }
}

fn solve<T: Scalar>(
    grid: &OccupancyGrid,
    goal: GridPos,
    oracle: OracleKind,
) -> Result<DistanceField<T>, FieldError> {
    Ok(match oracle {
        OracleKind::Fmm => fmm_solve(grid, goal)?,
        OracleKind::Dijkstra => dijkstra_solve(grid, goal)?,
    })
}

/// Emits one sample per cell of `grid` for the given goal field. Obstacle
/// cells are skipped unless `include_obstacles`; unreachable accessible
/// cells get the obstacle label, since no finite distance exists for them.
fn emit_grid_samples<T: Scalar>(
    out: &mut Vec<TrainSample<T>>,
    grid: &OccupancyGrid,
    grid_id: usize,
    field: &DistanceField<T>,
    goal: GridPos,
    include_obstacles: bool,
    transform: &FieldTargetTransform,
) -> Result<(), FieldError> {
    let goal_coord = grid.to_norm::<T>(goal)?;
    for row in 0..grid.height() {
        for col in 0..grid.width() {
            let p = GridPos::new(row, col);
            let target = match (grid.is_accessible(p), field.value(p)) {
                (true, Some(d)) => transform.apply(d),
                (true, None) => transform.obstacle(),
                (false, _) => {
                    if !include_obstacles {
                        continue;
                    }
                    transform.obstacle()
                }
            };
            let q = grid.to_norm::<T>(p)?;
            out.push(TrainSample {
                grid_id,
                goal: vec![goal_coord.u, goal_coord.v],
                query: vec![q.u, q.v],
                target,
            });
        }
    }
    Ok(())
}

/// Random accessible cell, uniform over the accessible set.
fn sample_goal(grid: &OccupancyGrid, rng: &mut ChaCha8Rng) -> GridPos {
    let acc = grid.accessible_cells();
    acc[rng.gen_range(0..acc.len())]
}

/// Flips accessible cells (never the goal) to obstacles with probability
/// `prob` each. The result may be disconnected on purpose; labels are
/// re-solved on it, so cut-off cells train as unreachable.
fn perturb_grid(
    grid: &OccupancyGrid,
    goal: GridPos,
    prob: f64,
    rng: &mut ChaCha8Rng,
) -> Option<OccupancyGrid> {
    let mut flips = Vec::new();
    for p in grid.accessible_cells() {
        if p != goal && rng.gen_range(0.0..1.0) < prob {
            flips.push(p);
        }
    }
    if flips.is_empty() {
        return None;
    }
    grid.mark_obstacles(&flips).ok()
}

/// Labels every cell of every grid against `goals_per_grid` sampled goals.
///
/// When `augment_obstacle_prob` > 0, each (grid, goal) pair is additionally
/// re-emitted on a randomly perturbed copy of the grid with labels solved
/// on the perturbed geometry; the perturbed grids are appended to the
/// returned set's grid list. Deterministic in `seed`.
pub fn build_dataset<T: Scalar>(
    grids: &[OccupancyGrid],
    oracle: OracleKind,
    goals_per_grid: usize,
    include_obstacles: bool,
    augment_obstacle_prob: f64,
    seed: u64,
) -> Result<TrainSet<T>, FieldError> {
    if grids.is_empty() {
        return Err(FieldError::EmptyDataset);
    }
    if goals_per_grid == 0 {
        return Err(FieldError::BadInput("goals_per_grid must be positive".into()));
    }
    if !(0.0..=1.0).contains(&augment_obstacle_prob) {
        return Err(FieldError::BadInput(format!(
            "augment_obstacle_prob must lie in [0, 1], got {augment_obstacle_prob}"
        )));
    }
    let transform = FieldTargetTransform::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = TrainSet {
        coord_dim: 2,
        oracle,
        grids: grids.to_vec(),
        samples: Vec::new(),
    };
    for gi in 0..grids.len() {
        for _ in 0..goals_per_grid {
            let goal = sample_goal(&set.grids[gi], &mut rng);
            let field = solve::<T>(&set.grids[gi], goal, oracle)?;
            let grid = set.grids[gi].clone();
            emit_grid_samples(
                &mut set.samples,
                &grid,
                gi,
                &field,
                goal,
                include_obstacles,
                &transform,
            )?;
            if augment_obstacle_prob > 0.0 {
                if let Some(perturbed) = perturb_grid(&grid, goal, augment_obstacle_prob, &mut rng)
                {
                    let field = solve::<T>(&perturbed, goal, oracle)?;
                    let id = set.grids.len();
                    emit_grid_samples(
                        &mut set.samples,
                        &perturbed,
                        id,
                        &field,
                        goal,
                        include_obstacles,
                        &transform,
                    )?;
                    set.grids.push(perturbed);
                }
            }
        }
    }
    Ok(set)
}

/// Labels every cell of one grid against one explicit goal. This is the
/// dataset shape the fixed variant trains on; the goal must be accessible.
pub fn build_goal_dataset<T: Scalar>(
    grid: &OccupancyGrid,
    goal: GridPos,
    oracle: OracleKind,
    include_obstacles: bool,
) -> Result<TrainSet<T>, FieldError> {
    let transform = FieldTargetTransform::default();
    let field = solve::<T>(grid, goal, oracle)?;
    let mut samples = Vec::new();
    emit_grid_samples(
        &mut samples,
        grid,
        0,
        &field,
        goal,
        include_obstacles,
        &transform,
    )?;
    Ok(TrainSet {
        coord_dim: 2,
        oracle,
        grids: vec![grid.clone()],
        samples,
    })
}
