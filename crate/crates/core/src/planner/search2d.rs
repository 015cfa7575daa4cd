//! Discrete and continuous search on 2D grids.
//!
//! Greedy stepping keeps a visited set: imperfect models produce local
//! plateaus where two cells point at each other, and forbidding repeats
//! turns that oscillation into either progress or an honest Stuck. A
//! side effect is guaranteed termination after at most one visit per
//! accessible cell.

use super::fields::{GridField, ModelGridField, ModelPlaneField, PlaneField};
use super::{PlannerError, SearchStatus, Trajectory};
use crate::field::FieldModel;
use crate::grid2d::{GridPos, NormCoord, OccupancyGrid, NEIGHBOR_OFFSETS_8};
use crate::scalar::{cast, to_f64, Scalar};

fn check_cell(grid: &OccupancyGrid, p: GridPos, what: &str) -> Result<(), PlannerError> {
    if !grid.in_bounds(p) {
        return Err(PlannerError::BadEndpoint(format!(
            "{what} ({}, {}) outside the grid",
            p.row, p.col
        )));
    }
    if !grid.is_accessible(p) {
        return Err(PlannerError::BadEndpoint(format!(
            "{what} ({}, {}) is an obstacle",
            p.row, p.col
        )));
    }
    Ok(())
}

/// First index holding the maximum; earlier candidates win ties, and the
/// candidate lists preserve the fixed neighbor order, so tie-breaking is
/// deterministic.
fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy descent of predicted reaching distance over any [`GridField`].
///
/// Per step: query the field at every accessible, not yet visited
/// 8-neighbor in one batch, then move to the highest transformed value.
/// Stops at the goal, when no candidate remains (Stuck), or after
/// `max_steps` moves.
pub fn greedy_search_field<T: Scalar, F: GridField<T> + ?Sized>(
    field: &F,
    grid: &OccupancyGrid,
    start: GridPos,
    goal: GridPos,
    max_steps: usize,
) -> Result<Trajectory<GridPos, T>, PlannerError> {
    check_cell(grid, start, "start")?;
    check_cell(grid, goal, "goal")?;
    let mut visited = vec![false; grid.len()];
    visited[grid.idx(start)] = true;
    let mut points = vec![start];
    let mut values = vec![field.values(grid, goal, &[start])?[0]];
    let mut current = start;
    let status = loop {
        if current == goal {
            break SearchStatus::ReachedGoal;
        }
        if points.len() - 1 >= max_steps {
            break SearchStatus::StepBudgetExceeded;
        }
        let moves: Vec<GridPos> = grid
            .moves8(current)
            .filter(|m| !visited[grid.idx(*m)])
            .collect();
        if moves.is_empty() {
            break SearchStatus::Stuck;
        }
        let vals = field.values(grid, goal, &moves)?;
        let pick = argmax(&vals);
        current = moves[pick];
        visited[grid.idx(current)] = true;
        points.push(current);
        values.push(vals[pick]);
    };
    Ok(Trajectory::new(points, values, status))
}

/// Default step budget: generous multiple of the half-perimeter, enough
/// for any simply wandering path without masking true failures.
pub fn default_max_steps(grid: &OccupancyGrid) -> usize {
    4 * (grid.height() + grid.width())
}

/// [`greedy_search_field`] over a trained model.
pub fn greedy_search<T: Scalar>(
    model: &FieldModel<T>,
    grid: &OccupancyGrid,
    start: GridPos,
    goal: GridPos,
    max_steps: Option<usize>,
) -> Result<Trajectory<GridPos, T>, PlannerError> {
    let field = ModelGridField::new(model)?;
    let budget = max_steps.unwrap_or_else(|| default_max_steps(grid));
    greedy_search_field(&field, grid, start, goal, budget)
}

/// The 8 compass directions as unit vectors in normalized coordinates,
/// in the same order the discrete planner enumerates neighbors.
fn compass_dirs<T: Scalar>() -> [[T; 2]; 8] {
    let mut out = [[T::zero(); 2]; 8];
    for (i, (dr, dc)) in NEIGHBOR_OFFSETS_8.iter().enumerate() {
        let (du, dv) = (*dc as f64, *dr as f64);
        let n = (du * du + dv * dv).sqrt();
        out[i] = [cast::<T>(du / n), cast::<T>(dv / n)];
    }
    out
}

/// Continuous ascent of the transformed field (descent of predicted
/// distance): move `step_size` along the normalized gradient; when the
/// step would land outside the scene or in an obstacle cell it is
/// rejected and the 8 compass directions are probed instead, taking the
/// admissible one with the highest field value.
pub fn gradient_descent_search_field<T: Scalar, F: PlaneField<T> + ?Sized>(
    field: &F,
    grid: &OccupancyGrid,
    start: NormCoord<T>,
    goal: NormCoord<T>,
    step_size: T,
    goal_radius: T,
    max_iters: usize,
) -> Result<Trajectory<NormCoord<T>, T>, PlannerError> {
    let start_cell = grid
        .from_norm(start)
        .map_err(|e| PlannerError::BadEndpoint(e.to_string()))?;
    if !grid.is_accessible(start_cell) {
        return Err(PlannerError::BadEndpoint(format!(
            "start ({}, {}) lies in an obstacle cell",
            to_f64(start.u),
            to_f64(start.v)
        )));
    }
    if !(step_size > T::zero() && goal_radius >= T::zero()) {
        return Err(PlannerError::BadInput(
            "step size must be positive and goal radius nonnegative".into(),
        ));
    }
    let admissible = |c: NormCoord<T>| -> bool {
        grid.from_norm(c).map(|p| grid.is_accessible(p)).unwrap_or(false)
    };
    let mut pos = start;
    let mut points = vec![start];
    let mut values = vec![field.value(start)?];
    let status = loop {
        if pos.dist(&goal) <= goal_radius {
            break SearchStatus::ReachedGoal;
        }
        if points.len() - 1 >= max_iters {
            break SearchStatus::StepBudgetExceeded;
        }
        let g = field.gradient(pos)?;
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if to_f64(norm) < 1e-12 {
            break SearchStatus::Stuck;
        }
        let cand = NormCoord::new(
            pos.u + step_size * g[0] / norm,
            pos.v + step_size * g[1] / norm,
        );
        let accepted = if admissible(cand) {
            Some((cand, field.value(cand)?))
        } else {
            let mut best: Option<(NormCoord<T>, T)> = None;
            for dir in compass_dirs::<T>() {
                let c = NormCoord::new(pos.u + step_size * dir[0], pos.v + step_size * dir[1]);
                if !admissible(c) {
                    continue;
                }
                let v = field.value(c)?;
                if best.as_ref().map_or(true, |(_, b)| v > *b) {
                    best = Some((c, v));
                }
            }
            best
        };
        match accepted {
            Some((next, v)) => {
                pos = next;
                points.push(next);
                values.push(v);
            }
            None => break SearchStatus::Stuck,
        }
    };
    Ok(Trajectory::new(points, values, status))
}

/// [`gradient_descent_search_field`] over a trained model.
pub fn gradient_descent_search<T: Scalar>(
    model: &FieldModel<T>,
    grid: &OccupancyGrid,
    start: NormCoord<T>,
    goal: NormCoord<T>,
    step_size: T,
    goal_radius: T,
    max_iters: usize,
) -> Result<Trajectory<NormCoord<T>, T>, PlannerError> {
    let field = ModelPlaneField::new(model, grid, goal)?;
    gradient_descent_search_field(&field, grid, start, goal, step_size, goal_radius, max_iters)
}

/// Result of a joint multi-agent run: one trajectory per agent plus the
/// timestep-by-timestep position log the collision invariant is stated
/// over (`positions[t][i]` is agent `i` after timestep `t`; index 0 is
/// the starting configuration).
#[derive(Clone, Debug)]
pub struct MultiAgentOutcome<T> {
    pub trajectories: Vec<Trajectory<GridPos, T>>,
    pub positions: Vec<Vec<GridPos>>,
}

struct AgentState<T> {
    pos: GridPos,
    goal: GridPos,
    visited: Vec<bool>,
    points: Vec<GridPos>,
    values: Vec<T>,
    status: Option<SearchStatus>,
}

/// Joint navigation where every other agent is a temporary obstacle.
///
/// Per timestep, agents act in fixed order: agent `i` marks the current
/// cells of all others as obstacles, re-queries the field on that
/// modified grid through `query(grid_i, goal_i, cells)` and takes one
/// greedy step. Finished and stuck agents stay put as static obstacles.
/// An agent whose base-grid moves are all visited is Stuck; one blocked
/// only by other agents waits in place and forgets its visited set, so
/// it can re-traverse once the blockage clears. No two agents ever share
/// a cell: moves only target cells no other agent currently occupies.
pub fn multi_agent_search_with<T: Scalar, F>(
    grid: &OccupancyGrid,
    agents: &[(GridPos, GridPos)],
    max_steps: usize,
    mut query: F,
) -> Result<MultiAgentOutcome<T>, PlannerError>
where
    F: FnMut(&OccupancyGrid, GridPos, &[GridPos]) -> Result<Vec<T>, PlannerError>,
{
    if agents.is_empty() {
        return Err(PlannerError::BadInput("no agents".into()));
    }
    for (i, (start, goal)) in agents.iter().enumerate() {
        check_cell(grid, *start, &format!("agent {i} start"))?;
        check_cell(grid, *goal, &format!("agent {i} goal"))?;
        for (j, (other, _)) in agents.iter().enumerate().skip(i + 1) {
            if start == other {
                return Err(PlannerError::BadInput(format!(
                    "agents {i} and {j} share the start cell ({}, {})",
                    start.row, start.col
                )));
            }
        }
    }
    let mut states: Vec<AgentState<T>> = Vec::with_capacity(agents.len());
    for (start, goal) in agents {
        let mut visited = vec![false; grid.len()];
        visited[grid.idx(*start)] = true;
        states.push(AgentState {
            pos: *start,
            goal: *goal,
            visited,
            points: vec![*start],
            values: Vec::new(),
            status: (*start == *goal).then_some(SearchStatus::ReachedGoal),
        });
    }
    // Initial value per agent, seen through its own agent-marked grid.
    for i in 0..states.len() {
        let others: Vec<GridPos> = states
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, s)| s.pos)
            .collect();
        let grid_i = grid.mark_obstacles(&others)?;
        let v = query(&grid_i, states[i].goal, &[states[i].pos])?;
        states[i].values.push(v[0]);
    }
    let mut positions = vec![states.iter().map(|s| s.pos).collect::<Vec<_>>()];
    for _ in 0..max_steps {
        if states.iter().all(|s| s.status.is_some()) {
            break;
        }
        for i in 0..states.len() {
            if states[i].status.is_some() {
                continue;
            }
            let others: Vec<GridPos> = states
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, s)| s.pos)
                .collect();
            let state = &states[i];
            let base_open = grid
                .moves8(state.pos)
                .any(|m| !state.visited[grid.idx(m)]);
            if !base_open {
                states[i].status = Some(SearchStatus::Stuck);
                continue;
            }
            let grid_i = grid.mark_obstacles(&others)?;
            let moves: Vec<GridPos> = grid_i
                .moves8(state.pos)
                .filter(|m| !state.visited[grid.idx(*m)])
                .collect();
            if moves.is_empty() {
                // Blocked by agents alone: wait here and drop history, so
                // the cleared path can be re-walked later.
                let pos = states[i].pos;
                states[i].visited.iter_mut().for_each(|v| *v = false);
                states[i].visited[grid.idx(pos)] = true;
                continue;
            }
            let vals = query(&grid_i, state.goal, &moves)?;
            let pick = argmax(&vals);
            let state = &mut states[i];
            state.pos = moves[pick];
            state.visited[grid.idx(state.pos)] = true;
            state.points.push(state.pos);
            state.values.push(vals[pick]);
            if state.pos == state.goal {
                state.status = Some(SearchStatus::ReachedGoal);
            }
        }
        positions.push(states.iter().map(|s| s.pos).collect());
    }
    let trajectories = states
        .into_iter()
        .map(|s| {
            Trajectory::new(
                s.points,
                s.values,
                s.status.unwrap_or(SearchStatus::StepBudgetExceeded),
            )
        })
        .collect();
    Ok(MultiAgentOutcome {
        trajectories,
        positions,
    })
}

/// [`multi_agent_search_with`] over a trained model, re-prepared on each
/// agent-modified grid exactly as the field would be at deployment.
pub fn multi_agent_search<T: Scalar>(
    model: &FieldModel<T>,
    grid: &OccupancyGrid,
    agents: &[(GridPos, GridPos)],
    max_steps: usize,
) -> Result<MultiAgentOutcome<T>, PlannerError> {
    let field = ModelGridField::new(model)?;
    multi_agent_search_with(grid, agents, max_steps, |g, goal, cells| {
        field.values(g, goal, cells)
    })
}
