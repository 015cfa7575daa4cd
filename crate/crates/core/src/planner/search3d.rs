//! Stepwise 3D search with pose feasibility gating.
//!
//! The planner walks a point (the torso) through the scene in discrete
//! steps whose lengths come from a schedule, typically derived from a
//! recorded motion. Candidate positions must lie in free air (positive
//! scene distance) and, when a pose track is supplied, must admit the
//! tracked pose: supported from below and free of collisions.

use super::fields::{ModelSpaceField, SpaceField};
use super::{PlannerError, SearchStatus, Trajectory};
use crate::field::FieldModel;
use crate::fmm::VoxelGrid;
use crate::scalar::{cast, to_f64, Scalar};
use crate::scene3d::{scene_sdf, Scene3D};

/// Pose feasibility at a placement. The checks are ordered: a pose whose
/// support joints float in the air is Unsupported even if other joints
/// also intersect geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Affordance {
    Valid,
    Unsupported,
    Colliding,
}

/// A skeleton reduced to labeled points: joint positions, which of them
/// must rest on geometry, and which one the planner steers.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseStub<T> {
    pub joints: Vec<[T; 3]>,
    pub support_joint_indices: Vec<usize>,
    pub torso_index: usize,
}

impl<T: Scalar> PoseStub<T> {
    pub fn new(
        joints: Vec<[T; 3]>,
        support_joint_indices: Vec<usize>,
        torso_index: usize,
    ) -> Result<Self, PlannerError> {
        if joints.is_empty() {
            return Err(PlannerError::BadInput("pose has no joints".into()));
        }
        if torso_index >= joints.len() {
            return Err(PlannerError::BadInput(format!(
                "torso index {torso_index} beyond {} joints",
                joints.len()
            )));
        }
        if support_joint_indices.is_empty() {
            return Err(PlannerError::BadInput("pose has no support joints".into()));
        }
        if let Some(bad) = support_joint_indices.iter().find(|i| **i >= joints.len()) {
            return Err(PlannerError::BadInput(format!(
                "support joint index {bad} beyond {} joints",
                joints.len()
            )));
        }
        Ok(PoseStub {
            joints,
            support_joint_indices,
            torso_index,
        })
    }

    /// Upright stance: feet 0.9 below the torso carry the weight. On an
    /// open floor the torso is feasible between 0.45 (knees graze the
    /// ground) and 0.9 (feet leave it).
    pub fn standing() -> Self {
        let j = |x: f64, y: f64, z: f64| [cast::<T>(x), cast::<T>(y), cast::<T>(z)];
        PoseStub {
            joints: vec![
                j(0.0, 0.0, 0.0),
                j(-0.12, -0.45, 0.0),
                j(0.12, -0.45, 0.0),
                j(-0.12, -0.9, 0.0),
                j(0.12, -0.9, 0.0),
            ],
            support_joint_indices: vec![3, 4],
            torso_index: 0,
        }
    }

    /// Seated: laps 0.15 below the torso rest on the seat surface, feet
    /// reach forward and down to the floor. Feasible on seat tops around
    /// 0.45 with the torso near 0.6.
    pub fn sitting() -> Self {
        let j = |x: f64, y: f64, z: f64| [cast::<T>(x), cast::<T>(y), cast::<T>(z)];
        PoseStub {
            joints: vec![
                j(0.0, 0.0, 0.0),
                j(-0.15, -0.15, 0.15),
                j(0.15, -0.15, 0.15),
                j(0.0, -0.6, 0.3),
            ],
            support_joint_indices: vec![1, 2, 3],
            torso_index: 0,
        }
    }

    /// The same pose rigidly translated so the torso sits at `p`.
    pub fn placed_at(&self, p: [T; 3]) -> PoseStub<T> {
        let t = self.joints[self.torso_index];
        let delta = [p[0] - t[0], p[1] - t[1], p[2] - t[2]];
        let joints = self
            .joints
            .iter()
            .map(|j| [j[0] + delta[0], j[1] + delta[1], j[2] + delta[2]])
            .collect();
        PoseStub {
            joints,
            support_joint_indices: self.support_joint_indices.clone(),
            torso_index: self.torso_index,
        }
    }

    pub fn torso(&self) -> [T; 3] {
        self.joints[self.torso_index]
    }
}

/// Per-step lengths for the 3D planner.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSchedule<T> {
    pub lengths: Vec<T>,
}

impl<T: Scalar> StepSchedule<T> {
    pub fn new(lengths: Vec<T>) -> Result<Self, PlannerError> {
        if lengths.is_empty() {
            return Err(PlannerError::BadInput("empty step schedule".into()));
        }
        if let Some(bad) = lengths.iter().find(|s| !(s.is_finite() && **s > T::zero())) {
            return Err(PlannerError::BadInput(format!(
                "step length {} is not a positive finite number",
                to_f64(*bad)
            )));
        }
        Ok(StepSchedule { lengths })
    }

    pub fn constant(length: T, count: usize) -> Result<Self, PlannerError> {
        Self::new(vec![length; count])
    }

    /// Step lengths read off a recorded pose sequence: the distance the
    /// torso travels between consecutive poses.
    pub fn from_pose_track(track: &[PoseStub<T>]) -> Result<Self, PlannerError> {
        if track.len() < 2 {
            return Err(PlannerError::BadInput(format!(
                "{} poses cannot define step lengths",
                track.len()
            )));
        }
        let lengths = track
            .windows(2)
            .map(|w| dist3(w[0].torso(), w[1].torso()))
            .collect();
        Self::new(lengths)
    }
}

pub(crate) fn dist3<T: Scalar>(a: [T; 3], b: [T; 3]) -> T {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Classifies a placed pose against the scene. Support joints must touch
/// or penetrate geometry (distance at most zero); all other joints must
/// stay out of it (distance at least zero).
pub fn affordance_filter<T: Scalar>(scene: &Scene3D<T>, pose: &PoseStub<T>) -> Affordance {
    let z = T::zero();
    for i in &pose.support_joint_indices {
        if scene_sdf(scene, pose.joints[*i]) > z {
            return Affordance::Unsupported;
        }
    }
    for (i, j) in pose.joints.iter().enumerate() {
        if pose.support_joint_indices.contains(&i) {
            continue;
        }
        if scene_sdf(scene, *j) < z {
            return Affordance::Colliding;
        }
    }
    Affordance::Valid
}

/// The 26 unit step directions (all sign patterns over three axes except
/// staying put), in a fixed lexicographic order so ties break the same
/// way on every run.
fn unit_dirs_26<T: Scalar>() -> Vec<[T; 3]> {
    let mut dirs = Vec::with_capacity(26);
    for dx in -1i32..=1 {
        for dy in -1i32..=1 {
            for dz in -1i32..=1 {
                if dx == 0 && dy == 0 && dz == 0 {
                    continue;
                }
                let v = [dx as f64, dy as f64, dz as f64];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                dirs.push([cast::<T>(v[0] / n), cast::<T>(v[1] / n), cast::<T>(v[2] / n)]);
            }
        }
    }
    dirs
}

fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Walks the torso from `start` toward `goal` over any [`SpaceField`].
///
/// Step `k` tries all 26 directions at the scheduled length; admissible
/// candidates lie in free air and, when `pose_track` is given, make pose
/// `min(k, last)` feasible there. The field picks the best candidate.
/// Once the goal is within the current step length it is appended
/// exactly. The step budget is the schedule length capped by
/// `max_steps`.
pub fn step_search_3d_field<T: Scalar, F: SpaceField<T> + ?Sized>(
    field: &F,
    scene: &Scene3D<T>,
    start: [T; 3],
    goal: [T; 3],
    schedule: &StepSchedule<T>,
    pose_track: Option<&[PoseStub<T>]>,
    max_steps: usize,
) -> Result<Trajectory<[T; 3], T>, PlannerError> {
    if schedule.lengths.is_empty() {
        return Err(PlannerError::BadInput("empty step schedule".into()));
    }
    if let Some(track) = pose_track {
        if track.is_empty() {
            return Err(PlannerError::BadInput("empty pose track".into()));
        }
    }
    if !(scene_sdf(scene, start) > T::zero()) {
        return Err(PlannerError::BadEndpoint(
            "start is inside scene geometry or outside the room".into(),
        ));
    }
    if !(scene_sdf(scene, goal) > T::zero()) {
        return Err(PlannerError::BadEndpoint(
            "goal is inside scene geometry or outside the room".into(),
        ));
    }
    let dirs = unit_dirs_26::<T>();
    let budget = schedule.lengths.len().min(max_steps);
    let mut current = start;
    let mut points = vec![start];
    let mut values = vec![field.values(goal, &[start])?[0]];
    if start == goal {
        return Ok(Trajectory::new(points, values, SearchStatus::ReachedGoal));
    }
    let status = loop {
        let k = points.len() - 1;
        if k >= budget {
            break SearchStatus::StepBudgetExceeded;
        }
        let s = schedule.lengths[k];
        if dist3(current, goal) <= s {
            let v = field.values(goal, &[goal])?[0];
            points.push(goal);
            values.push(v);
            break SearchStatus::ReachedGoal;
        }
        let pose = pose_track.map(|track| &track[k.min(track.len() - 1)]);
        let candidates: Vec<[T; 3]> = dirs
            .iter()
            .map(|d| [current[0] + s * d[0], current[1] + s * d[1], current[2] + s * d[2]])
            .filter(|c| scene_sdf(scene, *c) > T::zero())
            .filter(|c| match pose {
                Some(p) => affordance_filter(scene, &p.placed_at(*c)) == Affordance::Valid,
                None => true,
            })
            .collect();
        if candidates.is_empty() {
            break SearchStatus::Stuck;
        }
        let vals = field.values(goal, &candidates)?;
        let pick = argmax(&vals);
        current = candidates[pick];
        points.push(current);
        values.push(vals[pick]);
    };
    Ok(Trajectory::new(points, values, status))
}

/// [`step_search_3d_field`] over a trained model; the voxel volume
/// supplies the coordinate normalization the model was trained with.
pub fn step_search_3d<T: Scalar>(
    model: &FieldModel<T>,
    voxels: &VoxelGrid<T>,
    scene: &Scene3D<T>,
    start: [T; 3],
    goal: [T; 3],
    schedule: &StepSchedule<T>,
    pose_track: Option<&[PoseStub<T>]>,
    max_steps: usize,
) -> Result<Trajectory<[T; 3], T>, PlannerError> {
    let field = ModelSpaceField::new(model, voxels)?;
    step_search_3d_field(&field, scene, start, goal, schedule, pose_track, max_steps)
}

#[cfg(test)]
mod tests {
    use super::super::fields::OracleSpaceField;
    use super::*;
    use crate::field::FieldTargetTransform;
    use crate::fmm::dijkstra3d_solve;
    use crate::scene3d::SceneBox;

    fn empty_room() -> Scene3D<f64> {
        Scene3D::new((-2.0, 2.0), (-2.0, 2.0), 2.7, Vec::new()).unwrap()
    }

    /// Cubic voxelization of the whole room, accessibility from the sign
    /// of the scene distance at voxel centers.
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

    fn oracle<'a>(
        voxels: &'a VoxelGrid<f64>,
        field: &'a crate::fmm::Distance3DField<f64>,
    ) -> OracleSpaceField<'a, f64> {
        OracleSpaceField::new(voxels, field, FieldTargetTransform::default()).unwrap()
    }

    #[test]
    fn schedules_validate_their_lengths() {
        assert!(StepSchedule::<f64>::new(Vec::new()).is_err());
        assert!(StepSchedule::new(vec![0.3, 0.0]).is_err());
        assert!(StepSchedule::new(vec![-0.1]).is_err());
        assert!(StepSchedule::new(vec![f64::NAN]).is_err());
        let s = StepSchedule::constant(0.25, 4).unwrap();
        assert_eq!(s.lengths, vec![0.25; 4]);
        assert!(StepSchedule::constant(0.25, 0).is_err());
    }

    #[test]
    fn schedules_read_torso_travel_off_a_pose_track() {
        let base: PoseStub<f64> = PoseStub::standing();
        let track = vec![
            base.placed_at([0.0, 0.7, 0.0]),
            base.placed_at([0.3, 0.7, 0.0]),
            base.placed_at([0.3, 0.7, 0.4]),
        ];
        let s = StepSchedule::from_pose_track(&track).unwrap();
        assert_eq!(s.lengths.len(), 2);
        assert!((s.lengths[0] - 0.3).abs() < 1e-12);
        assert!((s.lengths[1] - 0.4).abs() < 1e-12);

        assert!(StepSchedule::from_pose_track(&track[..1]).is_err());
        let coincident = vec![base.placed_at([0.0, 0.7, 0.0]); 2];
        assert!(StepSchedule::from_pose_track(&coincident).is_err());
    }

    #[test]
    fn pose_stub_validation_and_placement() {
        assert!(PoseStub::<f64>::new(Vec::new(), vec![0], 0).is_err());
        assert!(PoseStub::new(vec![[0.0; 3]], vec![0], 1).is_err());
        assert!(PoseStub::new(vec![[0.0; 3]], Vec::new(), 0).is_err());
        assert!(PoseStub::new(vec![[0.0; 3]], vec![1], 0).is_err());

        let placed = PoseStub::<f64>::standing().placed_at([1.0, 2.0, 3.0]);
        assert_eq!(placed.torso(), [1.0, 2.0, 3.0]);
        assert_eq!(placed.joints[3], [0.88, 1.1, 3.0]);
        assert_eq!(placed.joints[4], [1.12, 1.1, 3.0]);
    }

    #[test]
    fn standing_affordance_spans_the_torso_height_band() {
        let scene = empty_room();
        let pose: PoseStub<f64> = PoseStub::standing();
        let at = |y: f64| affordance_filter(&scene, &pose.placed_at([0.0, y, 0.0]));
        assert_eq!(at(0.7), Affordance::Valid);
        assert_eq!(at(0.5), Affordance::Valid);
        assert_eq!(at(1.5), Affordance::Unsupported);
        assert_eq!(at(0.3), Affordance::Colliding);
    }

    #[test]
    fn sitting_affordance_wants_a_seat() {
        let seat = SceneBox {
            min: [0.6, 0.0, 0.6],
            max: [1.2, 0.45, 1.2],
            seat: true,
        };
        let scene = Scene3D::new((-2.0, 2.0), (-2.0, 2.0), 2.7, vec![seat]).unwrap();
        let pose: PoseStub<f64> = PoseStub::sitting();
        // Torso above the seat center: laps dip just into the seat top,
        // feet land ahead of the box on the floor.
        let on_seat = affordance_filter(&scene, &pose.placed_at([0.9, 0.59, 0.7]));
        assert_eq!(on_seat, Affordance::Valid);
        // Same pose in open air has nothing under the laps.
        let floating = affordance_filter(&scene, &pose.placed_at([-1.0, 0.59, -1.0]));
        assert_eq!(floating, Affordance::Unsupported);
    }

    #[test]
    fn unsupported_takes_precedence_over_colliding() {
        let scene = empty_room();
        // Support joint in the air, torso buried below the floor.
        let pose =
            PoseStub::new(vec![[0.0, -0.5, 0.0], [0.0, 1.0, 0.0]], vec![1], 0).unwrap();
        assert_eq!(affordance_filter(&scene, &pose), Affordance::Unsupported);
    }

    #[test]
    fn oracle_guided_walk_reaches_and_improves_monotonically() {
        let scene = empty_room();
        let voxels = room_voxels(&scene);
        let goal = [0.93, 1.07, 0.61];
        let start = [-1.41, 0.52, -1.17];
        let field = dijkstra3d_solve(&voxels, voxels.voxel_of(goal).unwrap()).unwrap();
        let oracle = oracle(&voxels, &field);
        let schedule = StepSchedule::constant(0.3, 40).unwrap();
        let t = step_search_3d_field(&oracle, &scene, start, goal, &schedule, None, 100).unwrap();
        assert_eq!(t.status, SearchStatus::ReachedGoal);
        assert_eq!(*t.points.last().unwrap(), goal);
        assert!(t.steps() <= 40);
        for pair in t.values.windows(2) {
            assert!(pair[1] >= pair[0], "field value dropped along the walk");
        }
        // Every step respects its scheduled length.
        for (i, pair) in t.points.windows(2).enumerate() {
            assert!(dist3(pair[0], pair[1]) <= schedule.lengths[i] + 1e-9);
        }
    }

    #[test]
    fn goal_within_the_first_step_is_reached_in_one_move() {
        let scene = empty_room();
        let voxels = room_voxels(&scene);
        let goal = [0.2, 1.0, 0.1];
        let start = [0.0, 1.0, 0.0];
        let field = dijkstra3d_solve(&voxels, voxels.voxel_of(goal).unwrap()).unwrap();
        let oracle = oracle(&voxels, &field);
        let schedule = StepSchedule::constant(0.3, 10).unwrap();
        let t = step_search_3d_field(&oracle, &scene, start, goal, &schedule, None, 100).unwrap();
        assert_eq!(t.status, SearchStatus::ReachedGoal);
        assert_eq!(t.steps(), 1);
        assert_eq!(t.points, vec![start, goal]);
    }

    #[test]
    fn budget_caps_the_walk() {
        let scene = empty_room();
        let voxels = room_voxels(&scene);
        let goal = [1.5, 0.9, 1.5];
        let start = [-1.5, 0.9, -1.5];
        let field = dijkstra3d_solve(&voxels, voxels.voxel_of(goal).unwrap()).unwrap();
        let oracle = oracle(&voxels, &field);
        let schedule = StepSchedule::constant(0.3, 40).unwrap();
        let t = step_search_3d_field(&oracle, &scene, start, goal, &schedule, None, 3).unwrap();
        assert_eq!(t.status, SearchStatus::StepBudgetExceeded);
        assert_eq!(t.steps(), 3);
    }

    #[test]
    fn pose_gating_restricts_where_the_walk_may_go() {
        let scene = empty_room();
        let voxels = room_voxels(&scene);
        let goal = [1.2, 0.7, 1.2];
        let field = dijkstra3d_solve(&voxels, voxels.voxel_of(goal).unwrap()).unwrap();
        let level_oracle = oracle(&voxels, &field);
        let schedule = StepSchedule::constant(0.3, 40).unwrap();
        let track: Vec<PoseStub<f64>> = vec![PoseStub::standing()];

        // Feasible start height: the walk succeeds and every visited
        // point admits the standing pose.
        let t = step_search_3d_field(
            &level_oracle,
            &scene,
            [-1.2, 0.7, -1.2],
            goal,
            &schedule,
            Some(&track),
            100,
        )
        .unwrap();
        assert_eq!(t.status, SearchStatus::ReachedGoal);
        for p in &t.points {
            let pose = track[0].placed_at(*p);
            assert_eq!(affordance_filter(&scene, &pose), Affordance::Valid);
        }

        // From torso height 1.4 every single step keeps the feet in the
        // air, so the gated walk cannot even begin.
        let high_goal = [1.2, 1.4, 1.2];
        let high_field =
            dijkstra3d_solve(&voxels, voxels.voxel_of(high_goal).unwrap()).unwrap();
        let high_oracle = oracle(&voxels, &high_field);
        let high = step_search_3d_field(
            &high_oracle,
            &scene,
            [-1.2, 1.4, -1.2],
            high_goal,
            &schedule,
            Some(&track),
            100,
        )
        .unwrap();
        assert_eq!(high.status, SearchStatus::Stuck);
        assert_eq!(high.steps(), 0);

        // Without the gate the same episode is easy.
        let free = step_search_3d_field(
            &high_oracle,
            &scene,
            [-1.2, 1.4, -1.2],
            high_goal,
            &schedule,
            None,
            100,
        )
        .unwrap();
        assert_eq!(free.status, SearchStatus::ReachedGoal);
    }

    #[test]
    fn sealed_pocket_gets_stuck() {
        // Thick walls and a cap box a small cavity around the start; at
        // step length 0.3 every direction lands inside geometry.
        let wall = |min: [f64; 3], max: [f64; 3]| SceneBox {
            min,
            max,
            seat: false,
        };
        let boxes = vec![
            wall([0.1, 0.0, -0.5], [0.5, 0.35, 0.5]),
            wall([-0.5, 0.0, -0.5], [-0.1, 0.35, 0.5]),
            wall([-0.5, 0.0, 0.1], [0.5, 0.35, 0.5]),
            wall([-0.5, 0.0, -0.5], [0.5, 0.35, -0.1]),
            wall([-0.5, 0.25, -0.5], [0.5, 0.65, 0.5]),
        ];
        let scene = Scene3D::new((-2.0, 2.0), (-2.0, 2.0), 2.7, boxes).unwrap();
        let start = [0.0, 0.1, 0.0];
        let goal = [1.5, 0.9, 1.5];
        assert!(scene_sdf(&scene, start) > 0.0);
        let voxels = room_voxels(&scene);
        let field = dijkstra3d_solve(&voxels, voxels.voxel_of(goal).unwrap()).unwrap();
        let oracle = oracle(&voxels, &field);
        let schedule = StepSchedule::constant(0.3, 20).unwrap();
        let t = step_search_3d_field(&oracle, &scene, start, goal, &schedule, None, 100).unwrap();
        assert_eq!(t.status, SearchStatus::Stuck);
        assert_eq!(t.steps(), 0);
    }

    #[test]
    fn endpoints_inside_geometry_are_rejected() {
        let seat = SceneBox {
            min: [0.6, 0.0, 0.6],
            max: [1.2, 0.45, 1.2],
            seat: true,
        };
        let scene = Scene3D::new((-2.0, 2.0), (-2.0, 2.0), 2.7, vec![seat]).unwrap();
        let voxels = room_voxels(&scene);
        let goal = [0.0, 1.0, 0.0];
        let field = dijkstra3d_solve(&voxels, voxels.voxel_of(goal).unwrap()).unwrap();
        let oracle = oracle(&voxels, &field);
        let schedule = StepSchedule::constant(0.3, 10).unwrap();
        // Start buried in the seat.
        assert!(matches!(
            step_search_3d_field(&oracle, &scene, [0.9, 0.2, 0.9], goal, &schedule, None, 10),
            Err(PlannerError::BadEndpoint(_))
        ));
        // Goal outside the room volume.
        assert!(matches!(
            step_search_3d_field(
                &oracle,
                &scene,
                [0.0, 1.0, 0.0],
                [3.0, 1.0, 0.0],
                &schedule,
                None,
                10
            ),
            Err(PlannerError::BadEndpoint(_))
        ));
        // An empty pose track is an input error.
        assert!(matches!(
            step_search_3d_field(
                &oracle,
                &scene,
                [0.0, 1.0, 0.0],
                [1.5, 1.0, 0.0],
                &schedule,
                Some(&[]),
                10
            ),
            Err(PlannerError::BadInput(_))
        ));
    }
}
