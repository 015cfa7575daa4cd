//! Exact reaching-distance solvers over grids.
//!
//! Three metrics are provided for 2D occupancy grids, all anchored at a
//! goal cell:
//!
//! * [`fmm_solve`]: first-order upwind fast marching for the unit-speed
//!   eikonal equation |grad d| = 1 on the 4-neighbor stencil. Cells close
//!   to the goal with a clear line of sight are seeded with their exact
//!   Euclidean distance; without that near-source treatment the first-order
//!   scheme's error along diagonals is 12-20%, with it the error stays
//!   under ~6%.
//! * [`dijkstra_solve`]: shortest paths on the 8-connected graph with axis
//!   weight 1 and diagonal weight sqrt(2). Matches the discrete motion
//!   model of the planners, including the no-corner-cutting rule.
//! * [`hop_solve`]: same graph with unit weights, i.e. the minimum number
//!   of moves. Used for optimality ratios in benchmarks.
//!
//! [`dijkstra3d_solve`] is the 26-connected analogue on voxel grids with
//! Euclidean edge weights.

use crate::grid2d::{CellState, GridPos, OccupancyGrid};
use crate::scalar::{cast, Scalar};
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FmmError {
    #[error("goal ({row}, {col}) is outside the grid")]
    GoalOutOfBounds { row: usize, col: usize },
    #[error("goal ({row}, {col}) sits on an obstacle cell")]
    GoalOnObstacle { row: usize, col: usize },
    #[error("goal voxel {0:?} is outside the voxel grid")]
    GoalVoxelOutOfBounds([usize; 3]),
    #[error("goal voxel {0:?} is not accessible")]
    GoalVoxelBlocked([usize; 3]),
    #[error("distance field parse failed: {0}")]
    Parse(String),
}

/// Scalar distance-to-goal per cell. Obstacle cells and cells the solver
/// cannot reach hold infinity; every finite value is >= 0 and the goal is 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField<T> {
    width: usize,
    height: usize,
    goal: GridPos,
    values: Vec<T>,
}

impl<T: Scalar> DistanceField<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn goal(&self) -> GridPos {
        self.goal
    }

    #[inline]
    fn idx(&self, p: GridPos) -> usize {
        p.row * self.width + p.col
    }

    /// Finite distance for reachable cells, `None` for obstacle, unreachable
    /// or out-of-bounds positions.
    pub fn value(&self, p: GridPos) -> Option<T> {
        if p.row >= self.height || p.col >= self.width {
            return None;
        }
        let v = self.values[self.idx(p)];
        if v.is_finite() {
            Some(v)
        } else {
            None
        }
    }

    pub fn is_reachable(&self, p: GridPos) -> bool {
        self.value(p).is_some()
    }

    /// Raw row-major values, infinity marking unreachable cells.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Largest finite value, if any cell is reachable.
    pub fn max_finite(&self) -> Option<T> {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(None, |acc, v| match acc {
                None => Some(v),
                Some(m) => Some(if v > m { v } else { m }),
            })
    }
}

impl<T: Scalar> core::fmt::Display for DistanceField<T> {
    /// Text form: "<height> <width> <goal_row> <goal_col>" header, then one
    /// row per line of space-separated fixed-point values, `inf` for
    /// unreachable cells.
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(
            f,
            "{} {} {} {}",
            self.height, self.width, self.goal.row, self.goal.col
        )?;
        for row in 0..self.height {
            for col in 0..self.width {
                if col > 0 {
                    write!(f, " ")?;
                }
                let v = self.values[row * self.width + col];
                if v.is_finite() {
                    write!(f, "{:.9}", crate::scalar::to_f64(v))?;
                } else {
                    write!(f, "inf")?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl<T: Scalar> core::str::FromStr for DistanceField<T> {
    type Err = FmmError;

    fn from_str(s: &str) -> Result<Self, FmmError> {
        let mut lines = s.lines();
        let header = lines
            .next()
            .ok_or_else(|| FmmError::Parse("empty input".into()))?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| FmmError::Parse(format!("bad header {header:?}: {e}")))?;
        let [height, width, gr, gc] = head[..] else {
            return Err(FmmError::Parse(format!("bad header {header:?}")));
        };
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            let line = lines
                .next()
                .ok_or_else(|| FmmError::Parse(format!("missing row {r}")))?;
            let row: Vec<T> = line
                .split_whitespace()
                .map(|t| {
                    if t == "inf" {
                        Ok(T::infinity())
                    } else {
                        t.parse::<f64>()
                            .map(|v| cast::<T>(v))
                            .map_err(|e| FmmError::Parse(format!("bad value {t:?}: {e}")))
                    }
                })
                .collect::<Result<_, _>>()?;
            if row.len() != width {
                return Err(FmmError::Parse(format!(
                    "row {r} has {} values, expected {width}",
                    row.len()
                )));
            }
            values.extend(row);
        }
        if gr >= height || gc >= width {
            return Err(FmmError::Parse("goal outside grid".into()));
        }
        Ok(DistanceField {
            width,
            height,
            goal: GridPos::new(gr, gc),
            values,
        })
    }
}

fn check_goal(grid: &OccupancyGrid, goal: GridPos) -> Result<(), FmmError> {
    if !grid.in_bounds(goal) {
        return Err(FmmError::GoalOutOfBounds {
            row: goal.row,
            col: goal.col,
        });
    }
    if grid.state(goal).unwrap() == CellState::Obstacle {
        return Err(FmmError::GoalOnObstacle {
            row: goal.row,
            col: goal.col,
        });
    }
    Ok(())
}

/// Min-heap entry ordered by distance, ties broken by cell index so the
/// acceptance order is deterministic.
struct Entry<T> {
    d: T,
    idx: usize,
}

impl<T: Scalar> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.idx == other.idx
    }
}
impl<T: Scalar> Eq for Entry<T> {}
impl<T: Scalar> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        // Reversed so BinaryHeap pops the smallest distance first.
        other
            .d
            .partial_cmp(&self.d)
            .expect("distances are never NaN")
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Accessible cells 4-connected to the goal. The eikonal front only moves
/// through the 4-neighbor stencil, so this is exactly the fmm-reachable set.
fn component4(grid: &OccupancyGrid, goal: GridPos) -> Vec<bool> {
    let mut mask = vec![false; grid.len()];
    let mut stack = vec![goal];
    mask[grid.idx(goal)] = true;
    while let Some(p) = stack.pop() {
        for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
            let r = p.row as isize + dr;
            let c = p.col as isize + dc;
            if r < 0 || c < 0 {
                continue;
            }
            let q = GridPos::new(r as usize, c as usize);
            if grid.is_accessible(q) && !mask[grid.idx(q)] {
                mask[grid.idx(q)] = true;
                stack.push(q);
            }
        }
    }
    mask
}

/// True when the straight segment between two cell centers stays inside
/// accessible cells. Sampled at 1/20 cell steps; grazing a boundary
/// resolves to whichever cell `floor` picks, which can only reject (never
/// wrongly accept) a seed.
fn line_of_sight(grid: &OccupancyGrid, a: GridPos, b: GridPos) -> bool {
    let (ar, ac) = (a.row as f64 + 0.5, a.col as f64 + 0.5);
    let (br, bc) = (b.row as f64 + 0.5, b.col as f64 + 0.5);
    let len = ((br - ar).powi(2) + (bc - ac).powi(2)).sqrt();
    let n = (len / 0.05).ceil() as usize;
    for k in 0..=n {
        let t = k as f64 / n.max(1) as f64;
        let r = ar + (br - ar) * t;
        let c = ac + (bc - ac) * t;
        let cell = GridPos::new(r.floor() as usize, c.floor() as usize);
        if !grid.is_accessible(cell) {
            return false;
        }
    }
    true
}

/// Chebyshev radius of the exact-initialized neighborhood around the goal.
const SOURCE_INIT_RADIUS: isize = 2;

fn fmm_solve_impl<T: Scalar>(
    grid: &OccupancyGrid,
    goal: GridPos,
) -> Result<(DistanceField<T>, Vec<usize>), FmmError> {
    check_goal(grid, goal)?;
    let (w, h) = (grid.width(), grid.height());
    let inside = component4(grid, goal);
    let mut dist = vec![T::infinity(); w * h];
    let mut known = vec![false; w * h];
    let mut heap: BinaryHeap<Entry<T>> = BinaryHeap::new();
    let mut order = Vec::new();

    // Seed the goal and its near neighborhood with exact distances where the
    // straight line to the goal is clear.
    for dr in -SOURCE_INIT_RADIUS..=SOURCE_INIT_RADIUS {
        for dc in -SOURCE_INIT_RADIUS..=SOURCE_INIT_RADIUS {
            let r = goal.row as isize + dr;
            let c = goal.col as isize + dc;
            if r < 0 || c < 0 {
                continue;
            }
            let p = GridPos::new(r as usize, c as usize);
            if !grid.is_accessible(p) || !inside[grid.idx(p)] {
                continue;
            }
            if !line_of_sight(grid, goal, p) {
                continue;
            }
            let e = ((dr * dr + dc * dc) as f64).sqrt();
            let idx = grid.idx(p);
            dist[idx] = cast::<T>(e);
            heap.push(Entry { d: dist[idx], idx });
        }
    }

    let one = T::one();
    let two = cast::<T>(2.0);
    while let Some(Entry { d, idx }) = heap.pop() {
        if known[idx] {
            continue;
        }
        if d > dist[idx] {
            continue; // stale entry
        }
        known[idx] = true;
        order.push(idx);
        let p = GridPos::new(idx / w, idx % w);
        for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
            let r = p.row as isize + dr;
            let c = p.col as isize + dc;
            if r < 0 || c < 0 {
                continue;
            }
            let q = GridPos::new(r as usize, c as usize);
            if !grid.is_accessible(q) {
                continue;
            }
            let qi = grid.idx(q);
            if known[qi] {
                continue;
            }
            // Upwind solve at q from its known axis neighbors.
            let mut horiz = T::infinity();
            let mut vert = T::infinity();
            for (nr, nc, horizontal) in [
                (q.row as isize, q.col as isize - 1, true),
                (q.row as isize, q.col as isize + 1, true),
                (q.row as isize - 1, q.col as isize, false),
                (q.row as isize + 1, q.col as isize, false),
            ] {
                if nr < 0 || nc < 0 {
                    continue;
                }
                let n = GridPos::new(nr as usize, nc as usize);
                if !grid.in_bounds(n) {
                    continue;
                }
                let ni = grid.idx(n);
                if !known[ni] {
                    continue;
                }
                if horizontal {
                    horiz = horiz.min(dist[ni]);
                } else {
                    vert = vert.min(dist[ni]);
                }
            }
            let a = horiz.min(vert);
            let b = horiz.max(vert);
            debug_assert!(a.is_finite());
            let u = if !b.is_finite() || b - a >= one {
                a + one
            } else {
                let diff = a - b;
                (a + b + (two - diff * diff).sqrt()) / two
            };
            if u < dist[qi] {
                dist[qi] = u;
                heap.push(Entry { d: u, idx: qi });
            }
        }
    }

    Ok((
        DistanceField {
            width: w,
            height: h,
            goal,
            values: dist,
        },
        order,
    ))
}

/// Solves the unit-speed eikonal equation for the distance to `goal`.
///
/// First-order upwind fast marching on the 4-neighbor stencil with exact
/// near-source initialization (see module docs). The front only crosses
/// accessible cells, so cells outside the goal's 4-connected component are
/// unreachable.
pub fn fmm_solve<T: Scalar>(
    grid: &OccupancyGrid,
    goal: GridPos,
) -> Result<DistanceField<T>, FmmError> {
    fmm_solve_impl(grid, goal).map(|(f, _)| f)
}

fn dijkstra_core<T: Scalar>(
    grid: &OccupancyGrid,
    goal: GridPos,
    axis_w: T,
    diag_w: T,
) -> Result<DistanceField<T>, FmmError> {
    check_goal(grid, goal)?;
    let (w, h) = (grid.width(), grid.height());
    let mut dist = vec![T::infinity(); w * h];
    let mut done = vec![false; w * h];
    let gi = grid.idx(goal);
    dist[gi] = T::zero();
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        d: T::zero(),
        idx: gi,
    });
    while let Some(Entry { d, idx }) = heap.pop() {
        if done[idx] {
            continue;
        }
        if d > dist[idx] {
            continue;
        }
        done[idx] = true;
        let p = GridPos::new(idx / w, idx % w);
        for q in grid.moves8(p) {
            let qi = grid.idx(q);
            if done[qi] {
                continue;
            }
            let diagonal = q.row != p.row && q.col != p.col;
            let nd = d + if diagonal { diag_w } else { axis_w };
            if nd < dist[qi] {
                dist[qi] = nd;
                heap.push(Entry { d: nd, idx: qi });
            }
        }
    }
    Ok(DistanceField {
        width: w,
        height: h,
        goal,
        values: dist,
    })
}

/// Shortest-path distance on the 8-connected grid graph, axis moves costing
/// 1 and diagonal moves sqrt(2). Diagonal edges obey the no-corner-cutting
/// rule, so reachability matches the planners' motion model exactly.
pub fn dijkstra_solve<T: Scalar>(
    grid: &OccupancyGrid,
    goal: GridPos,
) -> Result<DistanceField<T>, FmmError> {
    dijkstra_core(grid, goal, T::one(), cast::<T>(core::f64::consts::SQRT_2))
}

/// Minimum number of moves to the goal under the same motion model (all
/// edges cost 1).
pub fn hop_solve<T: Scalar>(
    grid: &OccupancyGrid,
    goal: GridPos,
) -> Result<DistanceField<T>, FmmError> {
    dijkstra_core(grid, goal, T::one(), T::one())
}

/// Axis-aligned voxelization of a 3D volume. `accessible` is row-major in
/// x, then y, then z; world coordinates recover via `origin` and
/// `voxel_size`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid<T> {
    pub dims: [usize; 3],
    pub origin: [T; 3],
    pub voxel_size: [T; 3],
    accessible: Vec<bool>,
}

impl<T: Scalar> VoxelGrid<T> {
    pub fn new(
        dims: [usize; 3],
        origin: [T; 3],
        voxel_size: [T; 3],
        accessible: Vec<bool>,
    ) -> Self {
        assert_eq!(accessible.len(), dims[0] * dims[1] * dims[2]);
        VoxelGrid {
            dims,
            origin,
            voxel_size,
            accessible,
        }
    }

    #[inline]
    pub fn idx(&self, v: [usize; 3]) -> usize {
        (v[0] * self.dims[1] + v[1]) * self.dims[2] + v[2]
    }

    pub fn voxel_at(&self, idx: usize) -> [usize; 3] {
        let z = idx % self.dims[2];
        let rest = idx / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], z]
    }

    pub fn in_bounds(&self, v: [usize; 3]) -> bool {
        v[0] < self.dims[0] && v[1] < self.dims[1] && v[2] < self.dims[2]
    }

    pub fn is_accessible(&self, v: [usize; 3]) -> bool {
        self.in_bounds(v) && self.accessible[self.idx(v)]
    }

    pub fn accessible_count(&self) -> usize {
        self.accessible.iter().filter(|a| **a).count()
    }

    /// World-space center of a voxel.
    pub fn center(&self, v: [usize; 3]) -> [T; 3] {
        let half = cast::<T>(0.5);
        [
            self.origin[0] + (cast::<T>(v[0] as f64) + half) * self.voxel_size[0],
            self.origin[1] + (cast::<T>(v[1] as f64) + half) * self.voxel_size[1],
            self.origin[2] + (cast::<T>(v[2] as f64) + half) * self.voxel_size[2],
        ]
    }

    /// World-space extent of the voxel volume along one axis.
    pub fn span(&self, axis: usize) -> T {
        cast::<T>(self.dims[axis] as f64) * self.voxel_size[axis]
    }

    /// Maps a world-space point into [-1, 1]^3 over the voxel volume. The
    /// same convention normalizes 3D training coordinates and planner
    /// queries, so the two always agree on where a point is.
    pub fn norm_of(&self, p: [T; 3]) -> [T; 3] {
        let two = cast::<T>(2.0);
        let mut out = [T::zero(); 3];
        for a in 0..3 {
            out[a] = two * (p[a] - self.origin[a]) / self.span(a) - T::one();
        }
        out
    }

    /// Voxel containing a world-space point, if inside the volume.
    pub fn voxel_of(&self, p: [T; 3]) -> Option<[usize; 3]> {
        let mut v = [0usize; 3];
        for a in 0..3 {
            let rel = (p[a] - self.origin[a]) / self.voxel_size[a];
            let rel = crate::scalar::to_f64(rel);
            let n = self.dims[a] as f64;
            if !(0.0..=n).contains(&rel) {
                return None;
            }
            v[a] = (rel.floor() as usize).min(self.dims[a] - 1);
        }
        Some(v)
    }
}

/// Distance-to-goal per voxel; infinity marks unreachable voxels.
#[derive(Clone, Debug, PartialEq)]
pub struct Distance3DField<T> {
    pub dims: [usize; 3],
    pub goal: [usize; 3],
    values: Vec<T>,
}

impl<T: Scalar> Distance3DField<T> {
    #[inline]
    fn idx(&self, v: [usize; 3]) -> usize {
        (v[0] * self.dims[1] + v[1]) * self.dims[2] + v[2]
    }

    pub fn value(&self, v: [usize; 3]) -> Option<T> {
        if v[0] >= self.dims[0] || v[1] >= self.dims[1] || v[2] >= self.dims[2] {
            return None;
        }
        let d = self.values[self.idx(v)];
        if d.is_finite() {
            Some(d)
        } else {
            None
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max_finite(&self) -> Option<T> {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(None, |acc, v| match acc {
                None => Some(v),
                Some(m) => Some(if v > m { v } else { m }),
            })
    }
}

/// 26-connected shortest paths on a voxel grid with Euclidean edge weights
/// (1, sqrt(2), sqrt(3) per axis count of the move).
pub fn dijkstra3d_solve<T: Scalar>(
    voxels: &VoxelGrid<T>,
    goal: [usize; 3],
) -> Result<Distance3DField<T>, FmmError> {
    if !voxels.in_bounds(goal) {
        return Err(FmmError::GoalVoxelOutOfBounds(goal));
    }
    if !voxels.is_accessible(goal) {
        return Err(FmmError::GoalVoxelBlocked(goal));
    }
    let n = voxels.dims[0] * voxels.dims[1] * voxels.dims[2];
    let mut dist = vec![T::infinity(); n];
    let mut done = vec![false; n];
    let gi = voxels.idx(goal);
    dist[gi] = T::zero();
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        d: T::zero(),
        idx: gi,
    });
    let w1 = T::one();
    let w2 = cast::<T>(core::f64::consts::SQRT_2);
    let w3 = cast::<T>(3.0f64.sqrt());
    while let Some(Entry { d, idx }) = heap.pop() {
        if done[idx] {
            continue;
        }
        if d > dist[idx] {
            continue;
        }
        done[idx] = true;
        let v = voxels.voxel_at(idx);
        for dx in -1isize..=1 {
            for dy in -1isize..=1 {
                for dz in -1isize..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let (x, y, z) = (
                        v[0] as isize + dx,
                        v[1] as isize + dy,
                        v[2] as isize + dz,
                    );
                    if x < 0 || y < 0 || z < 0 {
                        continue;
                    }
                    let q = [x as usize, y as usize, z as usize];
                    if !voxels.is_accessible(q) {
                        continue;
                    }
                    let qi = voxels.idx(q);
                    if done[qi] {
                        continue;
                    }
                    let axes = dx.abs() + dy.abs() + dz.abs();
                    let nd = d + match axes {
                        1 => w1,
                        2 => w2,
                        _ => w3,
                    };
                    if nd < dist[qi] {
                        dist[qi] = nd;
                        heap.push(Entry { d: nd, idx: qi });
                    }
                }
            }
        }
    }
    Ok(Distance3DField {
        dims: voxels.dims,
        goal,
        values: dist,
    })
}
