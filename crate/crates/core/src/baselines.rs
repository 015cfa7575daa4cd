//! Sampling-based planners for comparison: RRT and PRM over any
//! configuration space with a collision oracle.
//!
//! Both planners are deterministic per seed and emit the same
//! [`Trajectory`] type as the field planners, with all field values
//! zeroed since no field is involved. Segment collision uses
//! supersampling, which is sound in one direction: a detected collision
//! is real, a miss can slip between samples. The sampling intervals are
//! chosen well under the thinnest obstacle features these spaces
//! produce.

use crate::grid2d::{NormCoord, OccupancyGrid};
use crate::planner::{PlannerError, SearchStatus, Trajectory};
use crate::scalar::{cast, to_f64, Scalar};
use crate::scene3d::{scene_sdf, Scene3D};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BinaryHeap;

pub const RRT_DEFAULT_STEP: f64 = 0.05;
pub const RRT_DEFAULT_GOAL_BIAS: f64 = 0.1;
pub const RRT_DEFAULT_MAX_ITERS: usize = 500;
pub const PRM_DEFAULT_SAMPLES: usize = 500;
pub const PRM_DEFAULT_NEIGHBORS: usize = 5;

/// A continuous space the sampling planners can search: uniform point
/// sampling, point and straight-segment collision queries, distances and
/// linear interpolation.
pub trait ConfigSpace<T: Scalar> {
    type Point: Clone;

    /// Uniform sample over the space bounds; may land in collision.
    fn sample(&self, rng: &mut ChaCha8Rng) -> Self::Point;
    fn is_free(&self, p: &Self::Point) -> bool;
    /// Whether the straight segment between two points stays free,
    /// endpoints included.
    fn segment_free(&self, a: &Self::Point, b: &Self::Point) -> bool;
    fn distance(&self, a: &Self::Point, b: &Self::Point) -> T;
    /// Point at fraction `frac` of the way from `a` to `b`.
    fn interpolate(&self, a: &Self::Point, b: &Self::Point, frac: T) -> Self::Point;
}

/// An occupancy grid as a continuous configuration space over the
/// normalized square: a point collides when its containing cell is an
/// obstacle or it leaves the square.
pub struct GridSpace2D<'g> {
    grid: &'g OccupancyGrid,
    /// Segment sampling interval: a quarter of the smaller cell edge.
    interval: f64,
}

impl<'g> GridSpace2D<'g> {
    pub fn new(grid: &'g OccupancyGrid) -> Self {
        let cell = (2.0 / grid.width() as f64).min(2.0 / grid.height() as f64);
        GridSpace2D {
            grid,
            interval: 0.25 * cell,
        }
    }
}

impl<T: Scalar> ConfigSpace<T> for GridSpace2D<'_> {
    type Point = NormCoord<T>;

    fn sample(&self, rng: &mut ChaCha8Rng) -> NormCoord<T> {
        NormCoord::new(
            cast::<T>(rng.gen_range(-1.0..=1.0)),
            cast::<T>(rng.gen_range(-1.0..=1.0)),
        )
    }

    fn is_free(&self, p: &NormCoord<T>) -> bool {
        self.grid
            .from_norm(*p)
            .map(|cell| self.grid.is_accessible(cell))
            .unwrap_or(false)
    }

    fn segment_free(&self, a: &NormCoord<T>, b: &NormCoord<T>) -> bool {
        let steps = (to_f64(self.distance(a, b)) / self.interval).ceil().max(1.0) as usize;
        (0..=steps).all(|i| {
            let f = cast::<T>(i as f64 / steps as f64);
            self.is_free(&ConfigSpace::interpolate(self, a, b, f))
        })
    }

    fn distance(&self, a: &NormCoord<T>, b: &NormCoord<T>) -> T {
        a.dist(b)
    }

    fn interpolate(&self, a: &NormCoord<T>, b: &NormCoord<T>, frac: T) -> NormCoord<T> {
        NormCoord::new(a.u + (b.u - a.u) * frac, a.v + (b.v - a.v) * frac)
    }
}

/// A furnished room as a configuration space over its bounding volume; a
/// point collides when the scene distance is not positive.
pub struct SceneSpace3D<'s, T> {
    scene: &'s Scene3D<T>,
    /// Segment sampling interval in world units.
    interval: f64,
}

impl<'s, T: Scalar> SceneSpace3D<'s, T> {
    pub fn new(scene: &'s Scene3D<T>) -> Self {
        SceneSpace3D {
            scene,
            interval: 0.05,
        }
    }
}

impl<T: Scalar> ConfigSpace<T> for SceneSpace3D<'_, T> {
    type Point = [T; 3];

    fn sample(&self, rng: &mut ChaCha8Rng) -> [T; 3] {
        let (lo, hi) = self.scene.bounds();
        let mut p = [T::zero(); 3];
        for a in 0..3 {
            let f = rng.gen_range(0.0..=1.0);
            p[a] = lo[a] + (hi[a] - lo[a]) * cast::<T>(f);
        }
        p
    }

    fn is_free(&self, p: &[T; 3]) -> bool {
        scene_sdf(self.scene, *p) > T::zero()
    }

    fn segment_free(&self, a: &[T; 3], b: &[T; 3]) -> bool {
        let steps = (to_f64(self.distance(a, b)) / self.interval).ceil().max(1.0) as usize;
        (0..=steps).all(|i| {
            let f = cast::<T>(i as f64 / steps as f64);
            self.is_free(&ConfigSpace::interpolate(self, a, b, f))
        })
    }

    fn distance(&self, a: &[T; 3], b: &[T; 3]) -> T {
        let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    fn interpolate(&self, a: &[T; 3], b: &[T; 3], frac: T) -> [T; 3] {
        [
            a[0] + (b[0] - a[0]) * frac,
            a[1] + (b[1] - a[1]) * frac,
            a[2] + (b[2] - a[2]) * frac,
        ]
    }
}

/// An RRT expansion: node 0 is the root; every other node points at its
/// parent, so the structure is acyclic by construction.
pub struct RrtTree<P> {
    pub nodes: Vec<P>,
    pub parents: Vec<usize>,
}

fn check_endpoints<T: Scalar, S: ConfigSpace<T>>(
    space: &S,
    start: &S::Point,
    goal: &S::Point,
) -> Result<(), PlannerError> {
    if !space.is_free(start) {
        return Err(PlannerError::BadEndpoint("start is in collision".into()));
    }
    if !space.is_free(goal) {
        return Err(PlannerError::BadEndpoint("goal is in collision".into()));
    }
    Ok(())
}

fn zeroed_trajectory<P, T: Scalar>(points: Vec<P>) -> Trajectory<P, T> {
    let values = vec![T::zero(); points.len()];
    Trajectory::new(points, values, SearchStatus::ReachedGoal)
}

/// Grows a tree from `start`: each iteration samples a target (the goal
/// with probability `goal_bias`, else uniform), extends the nearest node
/// at most `step` toward it, and keeps the new node when the extension
/// segment is free. Returns the tree and the index of the first node
/// within `step` of the goal, if any.
pub fn rrt_grow<T: Scalar, S: ConfigSpace<T>>(
    space: &S,
    start: S::Point,
    goal: S::Point,
    step: T,
    goal_bias: f64,
    max_iters: usize,
    seed: u64,
) -> Result<(RrtTree<S::Point>, Option<usize>), PlannerError> {
    check_endpoints(space, &start, &goal)?;
    if !(step.is_finite() && step > T::zero()) {
        return Err(PlannerError::BadInput(format!(
            "step {} is not a positive finite number",
            to_f64(step)
        )));
    }
    if !(0.0..=1.0).contains(&goal_bias) {
        return Err(PlannerError::BadInput(format!(
            "goal bias {goal_bias} is not a probability"
        )));
    }
    let mut tree = RrtTree {
        nodes: vec![start],
        parents: vec![0],
    };
    if space.distance(&tree.nodes[0], &goal) <= step {
        return Ok((tree, Some(0)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_iters {
        let target = if rng.gen::<f64>() < goal_bias {
            goal.clone()
        } else {
            space.sample(&mut rng)
        };
        let mut nearest = 0;
        let mut nearest_d = space.distance(&tree.nodes[0], &target);
        for (i, n) in tree.nodes.iter().enumerate().skip(1) {
            let d = space.distance(n, &target);
            if d < nearest_d {
                nearest = i;
                nearest_d = d;
            }
        }
        if !(nearest_d > T::zero()) {
            continue;
        }
        let frac = (step / nearest_d).min(T::one());
        let new = space.interpolate(&tree.nodes[nearest], &target, frac);
        if !space.segment_free(&tree.nodes[nearest], &new) {
            continue;
        }
        tree.nodes.push(new);
        tree.parents.push(nearest);
        let idx = tree.nodes.len() - 1;
        if space.distance(&tree.nodes[idx], &goal) <= step {
            return Ok((tree, Some(idx)));
        }
    }
    Ok((tree, None))
}

/// RRT planning: the root-to-success-node chain as a trajectory, or
/// `None` when the iteration budget runs out first.
pub fn rrt_plan<T: Scalar, S: ConfigSpace<T>>(
    space: &S,
    start: S::Point,
    goal: S::Point,
    step: T,
    goal_bias: f64,
    max_iters: usize,
    seed: u64,
) -> Result<Option<Trajectory<S::Point, T>>, PlannerError> {
    let (tree, hit) = rrt_grow(space, start, goal, step, goal_bias, max_iters, seed)?;
    let Some(mut at) = hit else {
        return Ok(None);
    };
    let mut chain = vec![at];
    while at != 0 {
        at = tree.parents[at];
        chain.push(at);
    }
    chain.reverse();
    let points = chain.into_iter().map(|i| tree.nodes[i].clone()).collect();
    Ok(Some(zeroed_trajectory(points)))
}

/// A sampled roadmap: node 0 is the start, node 1 the goal, the rest are
/// free-space samples. Edges are undirected, stored once with i < j, and
/// weighted by Euclidean length.
pub struct RoadmapGraph<P, T> {
    pub nodes: Vec<P>,
    pub edges: Vec<(usize, usize, T)>,
}

/// Builds the roadmap: `n_samples` collision-free uniform samples plus
/// the endpoints, each node connected to its `k_neighbors` nearest
/// candidates by collision-free straight segments.
pub fn prm_roadmap<T: Scalar, S: ConfigSpace<T>>(
    space: &S,
    start: S::Point,
    goal: S::Point,
    n_samples: usize,
    k_neighbors: usize,
    seed: u64,
) -> Result<RoadmapGraph<S::Point, T>, PlannerError> {
    check_endpoints(space, &start, &goal)?;
    if k_neighbors == 0 {
        return Err(PlannerError::BadInput("zero neighbors".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![start, goal];
    while nodes.len() < n_samples + 2 {
        let p = space.sample(&mut rng);
        if space.is_free(&p) {
            nodes.push(p);
        }
    }
    let mut edges: Vec<(usize, usize, T)> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for i in 0..nodes.len() {
        let mut order: Vec<usize> = (0..nodes.len()).filter(|j| *j != i).collect();
        order.sort_by(|a, b| {
            let da = space.distance(&nodes[i], &nodes[*a]);
            let db = space.distance(&nodes[i], &nodes[*b]);
            da.partial_cmp(&db)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(b))
        });
        for j in order.into_iter().take(k_neighbors) {
            let key = (i.min(j), i.max(j));
            if seen.contains(&key) {
                continue;
            }
            seen.insert(key);
            if space.segment_free(&nodes[i], &nodes[j]) {
                edges.push((key.0, key.1, space.distance(&nodes[i], &nodes[j])));
            }
        }
    }
    Ok(RoadmapGraph { nodes, edges })
}

#[derive(Clone, Copy)]
struct HeapEntry<T> {
    d: T,
    idx: usize,
}

impl<T: Scalar> PartialEq for HeapEntry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.idx == other.idx
    }
}
impl<T: Scalar> Eq for HeapEntry<T> {}
impl<T: Scalar> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for HeapEntry<T> {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        // Reversed so BinaryHeap pops the smallest distance first.
        other
            .d
            .partial_cmp(&self.d)
            .expect("lengths are never NaN")
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Shortest roadmap path from node `from` to node `to` by edge length.
fn roadmap_shortest<P, T: Scalar>(
    graph: &RoadmapGraph<P, T>,
    from: usize,
    to: usize,
) -> Option<Vec<usize>> {
    let n = graph.nodes.len();
    let mut adj: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for (i, j, w) in &graph.edges {
        adj[*i].push((*j, *w));
        adj[*j].push((*i, *w));
    }
    let mut dist = vec![T::infinity(); n];
    let mut parent = vec![usize::MAX; n];
    let mut done = vec![false; n];
    dist[from] = T::zero();
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        d: T::zero(),
        idx: from,
    });
    while let Some(HeapEntry { d, idx }) = heap.pop() {
        if done[idx] {
            continue;
        }
        done[idx] = true;
        if idx == to {
            break;
        }
        for (j, w) in &adj[idx] {
            let nd = d + *w;
            if nd < dist[*j] {
                dist[*j] = nd;
                parent[*j] = idx;
                heap.push(HeapEntry { d: nd, idx: *j });
            }
        }
    }
    if !done[to] {
        return None;
    }
    let mut chain = vec![to];
    while *chain.last().unwrap() != from {
        chain.push(parent[*chain.last().unwrap()]);
    }
    chain.reverse();
    Some(chain)
}

/// PRM planning: build the roadmap, then the shortest start-to-goal path
/// over it. `None` when the endpoints land in different components.
pub fn prm_plan<T: Scalar, S: ConfigSpace<T>>(
    space: &S,
    start: S::Point,
    goal: S::Point,
    n_samples: usize,
    k_neighbors: usize,
    seed: u64,
) -> Result<Option<Trajectory<S::Point, T>>, PlannerError> {
    let graph = prm_roadmap(space, start, goal, n_samples, k_neighbors, seed)?;
    let Some(chain) = roadmap_shortest(&graph, 0, 1) else {
        return Ok(None);
    };
    let points = chain.into_iter().map(|i| graph.nodes[i].clone()).collect();
    Ok(Some(zeroed_trajectory(points)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid2d::{generate_maze, sample_accessible_pair, GridPos};

    fn grid_from(text: &str) -> OccupancyGrid {
        text.parse().unwrap()
    }

    /// Dense reference collision check at one hundredth of a cell.
    fn segment_free_dense(grid: &OccupancyGrid, a: NormCoord<f64>, b: NormCoord<f64>) -> bool {
        let cell = (2.0 / grid.width() as f64).min(2.0 / grid.height() as f64);
        let steps = (a.dist(&b) / (0.01 * cell)).ceil().max(1.0) as usize;
        (0..=steps).all(|i| {
            let f = i as f64 / steps as f64;
            let p = NormCoord::new(a.u + (b.u - a.u) * f, a.v + (b.v - a.v) * f);
            grid.from_norm(p)
                .map(|c| grid.is_accessible(c))
                .unwrap_or(false)
        })
    }

    #[test]
    fn point_collision_follows_cell_state() {
        let grid = grid_from("3 3\n...\n.#.\n...");
        let space = GridSpace2D::new(&grid);
        let center = |r: usize, c: usize| grid.to_norm::<f64>(GridPos::new(r, c)).unwrap();
        assert!(ConfigSpace::<f64>::is_free(&space, &center(0, 0)));
        assert!(!ConfigSpace::<f64>::is_free(&space, &center(1, 1)));
        // Outside the normalized square counts as collision.
        assert!(!ConfigSpace::<f64>::is_free(&space, &NormCoord::new(1.5, 0.0)));
    }

    #[test]
    fn segment_collision_matches_a_dense_reference() {
        // Full-height wall: any left-right crossing passes a whole cell
        // of obstacle, far wider than the sampling interval.
        let grid = grid_from("5 5\n..#..\n..#..\n..#..\n..#..\n..#..");
        let space = GridSpace2D::new(&grid);
        let center = |r: usize, c: usize| grid.to_norm::<f64>(GridPos::new(r, c)).unwrap();
        let cases = [
            (center(2, 0), center(2, 4), false),
            (center(0, 1), center(4, 1), true),
            (center(0, 0), center(4, 1), true),
            (center(0, 3), center(4, 4), true),
            (center(4, 0), center(0, 4), false),
        ];
        for (a, b, expect_free) in cases {
            assert_eq!(space.segment_free(&a, &b), expect_free);
            assert_eq!(segment_free_dense(&grid, a, b), expect_free);
        }
    }

    #[test]
    fn rrt_within_one_step_is_immediate() {
        let grid = OccupancyGrid::open(6, 6).unwrap();
        let space = GridSpace2D::new(&grid);
        let t = rrt_plan(
            &space,
            NormCoord::new(0.0, 0.0),
            NormCoord::new(0.05, 0.0),
            0.1,
            0.1,
            500,
            7,
        )
        .unwrap()
        .unwrap();
        assert_eq!(t.status, SearchStatus::ReachedGoal);
        assert_eq!(t.steps(), 0);
    }

    #[test]
    fn rrt_crosses_an_empty_square_reliably() {
        let grid = OccupancyGrid::open(8, 8).unwrap();
        let space = GridSpace2D::new(&grid);
        let mut successes = 0;
        for seed in 0..100u64 {
            let t = rrt_plan(
                &space,
                NormCoord::new(-0.8, -0.8),
                NormCoord::new(0.8, 0.8),
                0.1,
                0.1,
                500,
                seed,
            )
            .unwrap();
            if t.is_some() {
                successes += 1;
            }
        }
        assert!(successes >= 95, "{successes}/100 runs reached the goal");
    }

    /// A free chamber sealed off by a full ring of obstacles; the center
    /// is collision-free but unreachable from outside.
    fn sealed_chamber() -> OccupancyGrid {
        grid_from("7 7\n.......\n.......\n..###..\n..#.#..\n..###..\n.......\n.......")
    }

    #[test]
    fn sealed_goal_defeats_both_planners() {
        let grid = sealed_chamber();
        let space = GridSpace2D::new(&grid);
        let start = grid.to_norm::<f64>(GridPos::new(0, 0)).unwrap();
        let goal = grid.to_norm::<f64>(GridPos::new(3, 3)).unwrap();
        let rrt = rrt_plan(&space, start, goal, 0.1, 0.1, 500, 3).unwrap();
        assert!(rrt.is_none());
        let prm = prm_plan(&space, start, goal, 300, 5, 3).unwrap();
        assert!(prm.is_none());
    }

    #[test]
    fn colliding_endpoints_are_rejected() {
        let grid = grid_from("3 3\n...\n.#.\n...");
        let space = GridSpace2D::new(&grid);
        let free = grid.to_norm::<f64>(GridPos::new(0, 0)).unwrap();
        let blocked = grid.to_norm::<f64>(GridPos::new(1, 1)).unwrap();
        assert!(matches!(
            rrt_plan(&space, blocked, free, 0.1, 0.1, 10, 0),
            Err(PlannerError::BadEndpoint(_))
        ));
        assert!(matches!(
            prm_plan(&space, free, blocked, 10, 3, 0),
            Err(PlannerError::BadEndpoint(_))
        ));
    }

    #[test]
    fn rrt_tree_stays_bounded_and_acyclic() {
        let maze = generate_maze(10, 10, 0.25, 42).unwrap();
        let space = GridSpace2D::new(&maze);
        let (start, goal) = sample_accessible_pair(&maze, 42).unwrap();
        let a = maze.to_norm::<f64>(start).unwrap();
        let b = maze.to_norm::<f64>(goal).unwrap();
        let (tree, _) = rrt_grow(&space, a, b, 0.08, 0.1, 400, 9).unwrap();
        assert!(tree.nodes.len() <= 401);
        assert_eq!(tree.nodes.len(), tree.parents.len());
        assert_eq!(tree.parents[0], 0);
        for i in 1..tree.nodes.len() {
            // Parents always precede children, so chains terminate.
            assert!(tree.parents[i] < i);
        }
    }

    #[test]
    fn returned_paths_are_collision_free_with_zero_values() {
        let mut checked = 0;
        for seed in 0..12u64 {
            let maze = generate_maze(9, 9, 0.2, 100 + seed).unwrap();
            let space = GridSpace2D::new(&maze);
            let (s, g) = sample_accessible_pair(&maze, 200 + seed).unwrap();
            let a = maze.to_norm::<f64>(s).unwrap();
            let b = maze.to_norm::<f64>(g).unwrap();
            for t in [
                rrt_plan(&space, a, b, 0.1, 0.1, 500, seed).unwrap(),
                prm_plan(&space, a, b, 300, 5, seed).unwrap(),
            ]
            .into_iter()
            .flatten()
            {
                checked += 1;
                assert!(t.values.iter().all(|v| *v == 0.0));
                assert_eq!(t.status, SearchStatus::ReachedGoal);
                for p in &t.points {
                    assert!(ConfigSpace::<f64>::is_free(&space, p));
                }
                for pair in t.points.windows(2) {
                    assert!(space.segment_free(&pair[0], &pair[1]));
                }
            }
        }
        assert!(checked >= 12, "only {checked} plans to check");
    }

    #[test]
    fn prm_connects_adjacent_endpoints_directly() {
        let grid = OccupancyGrid::open(6, 6).unwrap();
        let space = GridSpace2D::new(&grid);
        let start = NormCoord::new(0.1, 0.1);
        let goal = NormCoord::new(0.11, 0.1);
        let t = prm_plan(&space, start, goal, 500, 5, 11).unwrap().unwrap();
        assert_eq!(t.points.len(), 2);
        assert_eq!(t.points[0], start);
        assert_eq!(t.points[1], goal);
    }

    #[test]
    fn prm_paths_stay_near_straight_in_an_empty_square() {
        let grid = OccupancyGrid::open(8, 8).unwrap();
        let space = GridSpace2D::new(&grid);
        let start = NormCoord::new(-0.8, -0.8);
        let goal = NormCoord::new(0.8, 0.8);
        let euclid = start.dist(&goal);
        let mut near_straight = 0;
        for seed in 0..100u64 {
            let Some(t) = prm_plan(&space, start, goal, 500, 5, seed).unwrap() else {
                continue;
            };
            let len: f64 = t
                .points
                .windows(2)
                .map(|w| w[0].dist(&w[1]))
                .sum();
            assert!(len >= euclid - 1e-9);
            if len <= 1.2 * euclid {
                near_straight += 1;
            }
        }
        assert!(
            near_straight >= 90,
            "{near_straight}/100 paths within 1.2x of straight"
        );
    }

    #[test]
    fn identical_seeds_reproduce_identical_plans() {
        let maze = generate_maze(10, 10, 0.2, 77).unwrap();
        let space = GridSpace2D::new(&maze);
        let (s, g) = sample_accessible_pair(&maze, 78).unwrap();
        let a = maze.to_norm::<f64>(s).unwrap();
        let b = maze.to_norm::<f64>(g).unwrap();
        let t1 = rrt_plan(&space, a, b, 0.1, 0.1, 500, 5).unwrap();
        let t2 = rrt_plan(&space, a, b, 0.1, 0.1, 500, 5).unwrap();
        assert_eq!(t1.map(|t| t.points), t2.map(|t| t.points));
        let p1 = prm_plan(&space, a, b, 200, 5, 5).unwrap();
        let p2 = prm_plan(&space, a, b, 200, 5, 5).unwrap();
        assert_eq!(p1.map(|t| t.points), p2.map(|t| t.points));
    }

    #[test]
    fn scene_space_plans_through_a_room() {
        let seat = crate::scene3d::SceneBox {
            min: [-0.3, 0.0, -1.2],
            max: [0.3, 1.2, 1.2],
            seat: false,
        };
        let scene = Scene3D::new((-2.0, 2.0), (-2.0, 2.0), 2.7, vec![seat]).unwrap();
        let space = SceneSpace3D::new(&scene);
        let start = [-1.5, 0.9, 0.0];
        let goal = [1.5, 0.9, 0.0];
        // The straight line runs through the slab, so collision checking
        // must notice.
        assert!(!space.segment_free(&start, &goal));
        let t = rrt_plan(&space, start, goal, 0.3, 0.1, 500, 21)
            .unwrap()
            .expect("room is easily passable around the slab");
        assert_eq!(t.status, SearchStatus::ReachedGoal);
        for pair in t.points.windows(2) {
            assert!(space.segment_free(&pair[0], &pair[1]));
        }
        let p = prm_plan(&space, start, goal, 500, 5, 21)
            .unwrap()
            .expect("roadmap should connect around the slab");
        for pair in p.points.windows(2) {
            assert!(space.segment_free(&pair[0], &pair[1]));
        }
    }
}
