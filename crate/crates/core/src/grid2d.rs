//! Occupancy grids for 2D navigation.
//!
//! A grid is a row-major field of accessible/obstacle cells. Positions come
//! in two flavours: integer cell indices ([`GridPos`]) and normalized
//! continuous coordinates ([`NormCoord`]) on [-1, 1]^2, where a cell center
//! maps to the center of its normalized patch. Motion is 8-directional with
//! corner cutting forbidden: a diagonal move requires both flanking axis
//! cells to be accessible, so an agent can never clip an obstacle corner.

use crate::scalar::{cast, Scalar};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

/// Per-cell occupancy flag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellState {
    Accessible,
    Obstacle,
}

/// Integer cell index; `row` counts down from the top, `col` right from the left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPos {
    pub row: usize,
    pub col: usize,
}

impl GridPos {
    pub fn new(row: usize, col: usize) -> Self {
        GridPos { row, col }
    }
}

/// Continuous position in normalized coordinates, `u` along columns and `v`
/// along rows, both in [-1, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormCoord<T> {
    pub u: T,
    pub v: T,
}

impl<T: Scalar> NormCoord<T> {
    pub fn new(u: T, v: T) -> Self {
        NormCoord { u, v }
    }

    /// Euclidean distance to another normalized point.
    pub fn dist(&self, other: &Self) -> T {
        let du = self.u - other.u;
        let dv = self.v - other.v;
        (du * du + dv * dv).sqrt()
    }
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid dimensions must be at least 2x2, got {height}x{width}")]
    BadDimensions { height: usize, width: usize },
    #[error("obstacle density must lie in [0, 1], got {0}")]
    BadDensity(f64),
    #[error("no connected maze found after {0} sampling attempts")]
    Unsatisfiable(usize),
    #[error("position ({row}, {col}) outside {height}x{width} grid")]
    OutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    #[error("normalized coordinate ({u}, {v}) outside [-1, 1]^2")]
    OutOfRange { u: f64, v: f64 },
    #[error("grid needs at least two accessible cells, found {0}")]
    TooFewAccessible(usize),
    #[error("marking obstacles would leave no accessible cell")]
    NoAccessibleCells,
    #[error("grid text parse failed: {0}")]
    Parse(String),
}

/// Neighbor offsets in fixed order N, NE, E, SE, S, SW, W, NW.
/// Tie-breaking in planners relies on this order, so it must not change.
pub const NEIGHBOR_OFFSETS_8: [(isize, isize); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

/// Immutable rectangular occupancy grid.
///
/// Invariants: `width >= 2`, `height >= 2`, `cells.len() == width * height`,
/// and at least one cell is accessible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    /// Builds a grid from row-major cell states.
    pub fn new(height: usize, width: usize, cells: Vec<CellState>) -> Result<Self, GridError> {
        if height < 2 || width < 2 {
            return Err(GridError::BadDimensions { height, width });
        }
        if cells.len() != width * height {
            return Err(GridError::Parse(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        if !cells.iter().any(|c| *c == CellState::Accessible) {
            return Err(GridError::NoAccessibleCells);
        }
        Ok(OccupancyGrid {
            width,
            height,
            cells,
        })
    }

    /// Fully accessible grid.
    pub fn open(height: usize, width: usize) -> Result<Self, GridError> {
        Self::new(height, width, vec![CellState::Accessible; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least 2x2
    }

    #[inline]
    pub fn idx(&self, p: GridPos) -> usize {
        p.row * self.width + p.col
    }

    #[inline]
    pub fn pos(&self, idx: usize) -> GridPos {
        GridPos::new(idx / self.width, idx % self.width)
    }

    #[inline]
    pub fn in_bounds(&self, p: GridPos) -> bool {
        p.row < self.height && p.col < self.width
    }

    pub fn state(&self, p: GridPos) -> Result<CellState, GridError> {
        if !self.in_bounds(p) {
            return Err(GridError::OutOfBounds {
                row: p.row,
                col: p.col,
                height: self.height,
                width: self.width,
            });
        }
        Ok(self.cells[self.idx(p)])
    }

    #[inline]
    pub fn is_accessible(&self, p: GridPos) -> bool {
        self.in_bounds(p) && self.cells[self.idx(p)] == CellState::Accessible
    }

    /// All accessible cell positions in row-major order.
    pub fn accessible_cells(&self) -> Vec<GridPos> {
        (0..self.cells.len())
            .filter(|i| self.cells[*i] == CellState::Accessible)
            .map(|i| self.pos(i))
            .collect()
    }

    /// In-bounds 8-neighbors of `p` in the fixed N, NE, E, SE, S, SW, W, NW
    /// order. Does not filter by accessibility.
    pub fn neighbors8(&self, p: GridPos) -> impl Iterator<Item = GridPos> + '_ {
        NEIGHBOR_OFFSETS_8.iter().filter_map(move |(dr, dc)| {
            let r = p.row as isize + dr;
            let c = p.col as isize + dc;
            if r >= 0 && c >= 0 {
                let q = GridPos::new(r as usize, c as usize);
                if self.in_bounds(q) {
                    return Some(q);
                }
            }
            None
        })
    }

    /// Accessible move targets from `p` under the 8-direction motion model,
    /// in the fixed neighbor order. Diagonal moves additionally require both
    /// flanking axis cells to be accessible (no corner cutting).
    pub fn moves8(&self, p: GridPos) -> impl Iterator<Item = GridPos> + '_ {
        NEIGHBOR_OFFSETS_8.iter().filter_map(move |(dr, dc)| {
            let r = p.row as isize + dr;
            let c = p.col as isize + dc;
            if r < 0 || c < 0 {
                return None;
            }
            let q = GridPos::new(r as usize, c as usize);
            if !self.is_accessible(q) {
                return None;
            }
            if *dr != 0 && *dc != 0 {
                let side_a = GridPos::new(p.row, q.col);
                let side_b = GridPos::new(q.row, p.col);
                if !self.is_accessible(side_a) || !self.is_accessible(side_b) {
                    return None;
                }
            }
            Some(q)
        })
    }

    /// Marks which accessible cells can be reached from `from` under the
    /// motion model. Obstacle cells and `from` itself when inaccessible map
    /// to `false`.
    pub fn reachable_mask(&self, from: GridPos) -> Vec<bool> {
        let mut mask = vec![false; self.cells.len()];
        if !self.is_accessible(from) {
            return mask;
        }
        let mut stack = vec![from];
        mask[self.idx(from)] = true;
        while let Some(p) = stack.pop() {
            for q in self.moves8(p).collect::<Vec<_>>() {
                let qi = self.idx(q);
                if !mask[qi] {
                    mask[qi] = true;
                    stack.push(q);
                }
            }
        }
        mask
    }

    /// True when every accessible cell can reach every other one.
    pub fn is_connected(&self) -> bool {
        let acc = self.accessible_cells();
        if acc.is_empty() {
            return false;
        }
        let mask = self.reachable_mask(acc[0]);
        acc.iter().all(|p| mask[self.idx(*p)])
    }

    /// Cell center in normalized coordinates.
    pub fn to_norm<T: Scalar>(&self, p: GridPos) -> Result<NormCoord<T>, GridError> {
        if !self.in_bounds(p) {
            return Err(GridError::OutOfBounds {
                row: p.row,
                col: p.col,
                height: self.height,
                width: self.width,
            });
        }
        let u = cast::<T>(2.0 * (p.col as f64 + 0.5) / self.width as f64 - 1.0);
        let v = cast::<T>(2.0 * (p.row as f64 + 0.5) / self.height as f64 - 1.0);
        Ok(NormCoord::new(u, v))
    }

    /// Cell containing a normalized point. Coordinates exactly on the +1
    /// boundary fall into the last cell; anything outside [-1, 1] errors.
    pub fn from_norm<T: Scalar>(&self, c: NormCoord<T>) -> Result<GridPos, GridError> {
        let u = crate::scalar::to_f64(c.u);
        let v = crate::scalar::to_f64(c.v);
        if !(-1.0..=1.0).contains(&u) || !(-1.0..=1.0).contains(&v) {
            return Err(GridError::OutOfRange { u, v });
        }
        let col = (((u + 1.0) / 2.0 * self.width as f64).floor() as usize).min(self.width - 1);
        let row = (((v + 1.0) / 2.0 * self.height as f64).floor() as usize).min(self.height - 1);
        Ok(GridPos::new(row, col))
    }

    /// Copy of the grid with the given cells turned into obstacles.
    /// Already-obstacle positions are fine; out-of-bounds ones error.
    pub fn mark_obstacles(&self, positions: &[GridPos]) -> Result<OccupancyGrid, GridError> {
        let mut cells = self.cells.clone();
        for p in positions {
            if !self.in_bounds(*p) {
                return Err(GridError::OutOfBounds {
                    row: p.row,
                    col: p.col,
                    height: self.height,
                    width: self.width,
                });
            }
            cells[self.idx(*p)] = CellState::Obstacle;
        }
        if !cells.iter().any(|c| *c == CellState::Accessible) {
            return Err(GridError::NoAccessibleCells);
        }
        Ok(OccupancyGrid {
            width: self.width,
            height: self.height,
            cells,
        })
    }

    /// Obstacle indicator per cell (1.0 for obstacles), row-major. This is
    /// the raster consumed by convolutional context encoders.
    pub fn obstacle_map<T: Scalar>(&self) -> Vec<T> {
        self.cells
            .iter()
            .map(|c| {
                if *c == CellState::Obstacle {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect()
    }
}

/// Number of rejection-sampling attempts before giving up on a maze.
const MAZE_ATTEMPTS: usize = 1000;

/// Samples a connected random maze.
///
/// Each cell independently becomes an obstacle with probability `density`;
/// the sample is rejected unless the accessible cells form one connected
/// component under the corner-respecting 8-direction motion model and there
/// are at least two of them. Deterministic in `seed`.
pub fn generate_maze(
    height: usize,
    width: usize,
    density: f64,
    seed: u64,
) -> Result<OccupancyGrid, GridError> {
    if height < 2 || width < 2 {
        return Err(GridError::BadDimensions { height, width });
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(GridError::BadDensity(density));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAZE_ATTEMPTS {
        let cells: Vec<CellState> = (0..width * height)
            .map(|_| {
                if rng.gen::<f64>() < density {
                    CellState::Obstacle
                } else {
                    CellState::Accessible
                }
            })
            .collect();
        let n_acc = cells.iter().filter(|c| **c == CellState::Accessible).count();
        if n_acc < 2 {
            continue;
        }
        let grid = OccupancyGrid {
            width,
            height,
            cells,
        };
        if grid.is_connected() {
            return Ok(grid);
        }
    }
    Err(GridError::Unsatisfiable(MAZE_ATTEMPTS))
}

/// Uniformly samples two distinct accessible cells. Deterministic in `seed`.
pub fn sample_accessible_pair(
    grid: &OccupancyGrid,
    seed: u64,
) -> Result<(GridPos, GridPos), GridError> {
    let acc = grid.accessible_cells();
    if acc.len() < 2 {
        return Err(GridError::TooFewAccessible(acc.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = rng.gen_range(0..acc.len());
    let b = loop {
        let b = rng.gen_range(0..acc.len());
        if b != a {
            break b;
        }
    };
    Ok((acc[a], acc[b]))
}

impl core::fmt::Display for OccupancyGrid {
    /// Text form: "<height> <width>" header, then one row per line with
    /// '.' for accessible and '#' for obstacle cells.
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(f, "{} {}", self.height, self.width)?;
        for row in 0..self.height {
            for col in 0..self.width {
                let ch = match self.cells[row * self.width + col] {
                    CellState::Accessible => '.',
                    CellState::Obstacle => '#',
                };
                write!(f, "{}", ch)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl core::str::FromStr for OccupancyGrid {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, GridError> {
        let mut lines = s.lines();
        let header = lines
            .next()
            .ok_or_else(|| GridError::Parse("empty input".into()))?;
        let mut dims = header.split_whitespace();
        let height: usize = dims
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GridError::Parse(format!("bad header {header:?}")))?;
        let width: usize = dims
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GridError::Parse(format!("bad header {header:?}")))?;
        if dims.next().is_some() {
            return Err(GridError::Parse(format!("trailing tokens in header {header:?}")));
        }
        let mut cells = Vec::with_capacity(width * height);
        for r in 0..height {
            let line = lines
                .next()
                .ok_or_else(|| GridError::Parse(format!("missing row {r}")))?;
            if line.chars().count() != width {
                return Err(GridError::Parse(format!(
                    "row {r} has {} cells, expected {width}",
                    line.chars().count()
                )));
            }
            for ch in line.chars() {
                cells.push(match ch {
                    '.' => CellState::Accessible,
                    '#' => CellState::Obstacle,
                    other => return Err(GridError::Parse(format!("bad cell char {other:?}"))),
                });
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(GridError::Parse("trailing rows after grid".into()));
        }
        OccupancyGrid::new(height, width, cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from(text: &str) -> OccupancyGrid {
        text.parse().unwrap()
    }

    #[test]
    fn norm_coords_of_corner_cells() {
        let g = OccupancyGrid::open(8, 8).unwrap();
        let c: NormCoord<f64> = g.to_norm(GridPos::new(0, 0)).unwrap();
        assert_eq!(c.u, -0.875);
        assert_eq!(c.v, -0.875);
        let c: NormCoord<f64> = g.to_norm(GridPos::new(7, 7)).unwrap();
        assert_eq!(c.u, 0.875);
        assert_eq!(c.v, 0.875);
    }

    #[test]
    fn norm_roundtrip_on_cell_centers() {
        let g = OccupancyGrid::open(5, 9).unwrap();
        for row in 0..5 {
            for col in 0..9 {
                let p = GridPos::new(row, col);
                let c: NormCoord<f64> = g.to_norm(p).unwrap();
                assert_eq!(g.from_norm(c).unwrap(), p);
            }
        }
    }

    #[test]
    fn from_norm_boundary_falls_in_last_cell() {
        let g = OccupancyGrid::open(4, 4).unwrap();
        let p = g.from_norm(NormCoord::new(1.0f64, 1.0)).unwrap();
        assert_eq!(p, GridPos::new(3, 3));
        assert!(g.from_norm(NormCoord::new(1.0001f64, 0.0)).is_err());
    }

    #[test]
    fn neighbor_order_is_fixed() {
        let g = OccupancyGrid::open(3, 3).unwrap();
        let center: Vec<GridPos> = g.neighbors8(GridPos::new(1, 1)).collect();
        let expect = [
            (0, 1),
            (0, 2),
            (1, 2),
            (2, 2),
            (2, 1),
            (2, 0),
            (1, 0),
            (0, 0),
        ];
        assert_eq!(
            center,
            expect.map(|(r, c)| GridPos::new(r, c)).to_vec()
        );
        // Corner cell keeps relative order of surviving directions.
        let corner: Vec<GridPos> = g.neighbors8(GridPos::new(0, 0)).collect();
        assert_eq!(
            corner,
            vec![GridPos::new(0, 1), GridPos::new(1, 1), GridPos::new(1, 0)]
        );
    }

    #[test]
    fn diagonal_moves_respect_corners() {
        // . #
        // # .
        // Diagonal between the two accessible cells would clip both corners.
        let g = grid_from("2 2\n.#\n#.\n");
        let from_tl: Vec<GridPos> = g.moves8(GridPos::new(0, 0)).collect();
        assert!(from_tl.is_empty());
        assert!(!g.is_connected());
    }

    #[test]
    fn open_grid_is_connected() {
        assert!(OccupancyGrid::open(4, 6).unwrap().is_connected());
    }

    #[test]
    fn maze_generation_is_deterministic_and_connected() {
        let a = generate_maze(8, 8, 0.3, 7).unwrap();
        let b = generate_maze(8, 8, 0.3, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.is_connected());
        let c = generate_maze(8, 8, 0.3, 8).unwrap();
        assert!(c.is_connected());
        assert_ne!(a, c, "different seeds should give different mazes");
    }

    #[test]
    fn maze_density_zero_is_fully_open() {
        let g = generate_maze(5, 5, 0.0, 1).unwrap();
        assert_eq!(g.accessible_cells().len(), 25);
    }

    #[test]
    fn maze_density_one_is_unsatisfiable() {
        assert!(matches!(
            generate_maze(4, 4, 1.0, 1),
            Err(GridError::Unsatisfiable(_))
        ));
    }

    #[test]
    fn maze_rejects_bad_inputs() {
        assert!(matches!(
            generate_maze(1, 5, 0.2, 0),
            Err(GridError::BadDimensions { .. })
        ));
        assert!(matches!(
            generate_maze(4, 4, 1.5, 0),
            Err(GridError::BadDensity(_))
        ));
    }

    #[test]
    fn accessible_pair_is_distinct_and_deterministic() {
        let g = generate_maze(6, 6, 0.25, 3).unwrap();
        let (a, b) = sample_accessible_pair(&g, 11).unwrap();
        assert_ne!(a, b);
        assert!(g.is_accessible(a) && g.is_accessible(b));
        assert_eq!(sample_accessible_pair(&g, 11).unwrap(), (a, b));
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let text = "3 4\n..#.\n####\n....\n";
        // NoAccessibleCells would trip on the all-obstacle row only if the
        // whole grid were blocked; this one is fine.
        let g = grid_from(text);
        assert_eq!(g.to_string(), text);
    }

    #[test]
    fn text_parse_rejects_malformed_input() {
        assert!("".parse::<OccupancyGrid>().is_err());
        assert!("2 2\n..\n.".parse::<OccupancyGrid>().is_err());
        assert!("2 2\n..\nx.\n".parse::<OccupancyGrid>().is_err());
        assert!("2\n..\n..\n".parse::<OccupancyGrid>().is_err());
        assert!("2 2\n..\n..\n..\n".parse::<OccupancyGrid>().is_err());
    }

    #[test]
    fn mark_obstacles_is_idempotent_and_leaves_original() {
        let g = OccupancyGrid::open(3, 3).unwrap();
        let ps = [GridPos::new(1, 1), GridPos::new(0, 2)];
        let m1 = g.mark_obstacles(&ps).unwrap();
        let m2 = m1.mark_obstacles(&ps).unwrap();
        assert_eq!(m1, m2);
        assert!(g.is_accessible(GridPos::new(1, 1)));
        assert!(!m1.is_accessible(GridPos::new(1, 1)));
        assert!(g.mark_obstacles(&[GridPos::new(9, 9)]).is_err());
    }

    #[test]
    fn mark_obstacles_cannot_block_everything() {
        let g = grid_from("2 2\n.#\n##\n");
        assert!(matches!(
            g.mark_obstacles(&[GridPos::new(0, 0)]),
            Err(GridError::NoAccessibleCells)
        ));
    }

    #[test]
    fn obstacle_map_marks_obstacles_with_one() {
        let g = grid_from("2 2\n.#\n..\n");
        let m: Vec<f64> = g.obstacle_map();
        assert_eq!(m, vec![0.0, 1.0, 0.0, 0.0]);
    }
}
