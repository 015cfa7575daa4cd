//! Synthetic 3D rooms and the accessible-space pipeline.
//!
//! A scene is a rectangular room (floor at y = 0, walls at the floor
//! extent, ceiling at `height`) furnished with axis-aligned boxes. Boxes
//! carry a seat flag: the bird's-eye filter removes torso locations over
//! any other furniture footprint but keeps locations above a seat's top,
//! so sitting positions survive. The room geometry is analytic, which
//! makes the signed distance exact and every downstream check (surface
//! sampling, affordances, voxel masks) verifiable against it.
//!
//! The accessible region flows through four stages: synthesize torso
//! locations ([`synth_torso_data`]), optionally learn and resample them
//! with the conditional VAE ([`train_vae`] / [`sample_accessible`]),
//! filter to plausible floor space ([`birdseye_filter`]), and voxelize
//! ([`voxelize_accessible`]) so the 3D Dijkstra oracle and the field
//! trainer can consume them.

mod vae;

pub use vae::{
    beta_schedule, context_feature, load_vae, sample_accessible, save_vae, scene_cloud, train_vae,
    train_vae_config, VaeConfig, VaeModel, VaeReport,
};

use crate::field::{FieldTargetTransform, OracleKind, TrainSample, TrainSet};
use crate::fmm::{dijkstra3d_solve, FmmError, VoxelGrid};
use crate::neural::NeuralError;
use crate::scalar::{cast, to_f64, Scalar};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("degenerate scene: {0}")]
    Degenerate(String),
    #[error("{0}")]
    BadInput(String),
    #[error("accessible region is empty")]
    EmptyRegion,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("bad scene or region text: {0}")]
    Parse(String),
    #[error("bad model file: {0}")]
    BadModelFile(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Solver(#[from] FmmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned furniture. `seat` marks boxes people may sit on.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneBox<T> {
    pub min: [T; 3],
    pub max: [T; 3],
    pub seat: bool,
}

/// Per-axis signed offset from the closed slab [lo, hi]: negative inside.
#[inline]
fn slab<T: Scalar>(lo: T, hi: T, x: T) -> T {
    (lo - x).max(x - hi)
}

impl<T: Scalar> SceneBox<T> {
    /// Exact signed distance to the box surface, negative inside.
    ///
    /// Computed from the face planes directly rather than via center and
    /// half-extent, so a point lying exactly on a face gets exactly zero
    /// in either float width.
    pub fn sdf(&self, p: [T; 3]) -> T {
        let q = [
            slab(self.min[0], self.max[0], p[0]),
            slab(self.min[1], self.max[1], p[1]),
            slab(self.min[2], self.max[2], p[2]),
        ];
        let z = T::zero();
        let outside =
            (q[0].max(z).powi(2) + q[1].max(z).powi(2) + q[2].max(z).powi(2)).sqrt();
        let inside = q[0].max(q[1]).max(q[2]).min(z);
        outside + inside
    }

    /// Whether (x, z) lies inside the closed floor footprint.
    pub fn footprint_contains(&self, x: T, z: T) -> bool {
        x >= self.min[0] && x <= self.max[0] && z >= self.min[2] && z <= self.max[2]
    }
}

/// A furnished rectangular room. Free space is the room interior minus
/// the furniture; everything else (walls, floor, ceiling, box interiors)
/// is solid.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene3D<T> {
    pub x_range: (T, T),
    pub z_range: (T, T),
    pub height: T,
    pub boxes: Vec<SceneBox<T>>,
}

impl<T: Scalar> Scene3D<T> {
    pub fn new(
        x_range: (T, T),
        z_range: (T, T),
        height: T,
        boxes: Vec<SceneBox<T>>,
    ) -> Result<Self, SceneError> {
        let fin = |v: T| v.is_finite();
        if !(fin(x_range.0) && fin(x_range.1) && fin(z_range.0) && fin(z_range.1) && fin(height)) {
            return Err(SceneError::Degenerate("non-finite extent".into()));
        }
        if x_range.0 >= x_range.1 || z_range.0 >= z_range.1 || height <= T::zero() {
            return Err(SceneError::Degenerate(format!(
                "empty extent x [{}, {}], z [{}, {}], height {}",
                to_f64(x_range.0),
                to_f64(x_range.1),
                to_f64(z_range.0),
                to_f64(z_range.1),
                to_f64(height)
            )));
        }
        for (i, b) in boxes.iter().enumerate() {
            for a in 0..3 {
                if !(b.min[a].is_finite() && b.max[a].is_finite() && b.min[a] < b.max[a]) {
                    return Err(SceneError::Degenerate(format!("box {i} has empty axis {a}")));
                }
            }
            let inside = b.min[0] >= x_range.0
                && b.max[0] <= x_range.1
                && b.min[2] >= z_range.0
                && b.max[2] <= z_range.1
                && b.min[1] >= T::zero()
                && b.max[1] <= height;
            if !inside {
                return Err(SceneError::Degenerate(format!(
                    "box {i} sticks out of the room"
                )));
            }
        }
        Ok(Scene3D {
            x_range,
            z_range,
            height,
            boxes,
        })
    }

    /// World-space corners of the room volume.
    pub fn bounds(&self) -> ([T; 3], [T; 3]) {
        (
            [self.x_range.0, T::zero(), self.z_range.0],
            [self.x_range.1, self.height, self.z_range.1],
        )
    }

    /// The room volume as a box; its negated distance is the air region.
    fn shell(&self) -> SceneBox<T> {
        let (lo, hi) = self.bounds();
        SceneBox {
            min: lo,
            max: hi,
            seat: false,
        }
    }
}

/// Signed distance to the nearest solid: negative inside furniture, below
/// the floor or beyond the walls; positive in free air; zero on surfaces.
/// Solids combine by min, so the value is the exact free-space distance
/// everywhere outside them.
pub fn scene_sdf<T: Scalar>(scene: &Scene3D<T>, p: [T; 3]) -> T {
    let mut d = -scene.shell().sdf(p);
    for b in &scene.boxes {
        d = d.min(b.sdf(p));
    }
    d
}

/// A random furnished room: 2-4 boxes with clear gaps, at least one seat.
/// Seat tops land near typical chair height so sitting torsos at 0.6 rest
/// laps on them.
pub fn generate_scene<T: Scalar>(seed: u64) -> Scene3D<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half_x = rng.gen_range(1.6..=2.4);
    let half_z = rng.gen_range(1.6..=2.4);
    let height = rng.gen_range(2.5..=3.0);
    let count = rng.gen_range(2..=4usize);
    let mut placed: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut boxes = Vec::new();
    for i in 0..count {
        let seat = if i == 0 { true } else { rng.gen_bool(0.5) };
        let sx = rng.gen_range(0.45..=0.9);
        let sz = rng.gen_range(0.45..=0.9);
        let top = if seat {
            rng.gen_range(0.40..=0.50)
        } else {
            rng.gen_range(0.55..=0.75)
        };
        let margin = 0.3;
        for _ in 0..40 {
            let cx = rng.gen_range((-half_x + margin + sx / 2.0)..=(half_x - margin - sx / 2.0));
            let cz = rng.gen_range((-half_z + margin + sz / 2.0)..=(half_z - margin - sz / 2.0));
            let (x0, x1) = (cx - sx / 2.0, cx + sx / 2.0);
            let (z0, z1) = (cz - sz / 2.0, cz + sz / 2.0);
            let gap = 0.25;
            let clear = placed.iter().all(|&(px0, px1, pz0, pz1)| {
                x1 + gap < px0 || x0 - gap > px1 || z1 + gap < pz0 || z0 - gap > pz1
            });
            if clear {
                placed.push((x0, x1, z0, z1));
                boxes.push(SceneBox {
                    min: [cast::<T>(x0), T::zero(), cast::<T>(z0)],
                    max: [cast::<T>(x1), cast::<T>(top), cast::<T>(z1)],
                    seat,
                });
                break;
            }
        }
    }
    Scene3D::new(
        (cast::<T>(-half_x), cast::<T>(half_x)),
        (cast::<T>(-half_z), cast::<T>(half_z)),
        cast::<T>(height),
        boxes,
    )
    .expect("generated rooms satisfy their own invariants")
}

/// One rectangular face, parameterized over [0,1]^2.
struct Face<T> {
    origin: [T; 3],
    ea: [T; 3],
    eb: [T; 3],
    area: f64,
}

fn rect<T: Scalar>(origin: [T; 3], ea: [T; 3], eb: [T; 3]) -> Face<T> {
    let len = |e: [T; 3]| {
        to_f64((e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt())
    };
    let area = len(ea) * len(eb);
    Face {
        origin,
        ea,
        eb,
        area,
    }
}

fn surface_faces<T: Scalar>(scene: &Scene3D<T>) -> Vec<Face<T>> {
    let o = T::zero();
    let (x0, x1) = scene.x_range;
    let (z0, z1) = scene.z_range;
    let h = scene.height;
    let (dx, dz) = (x1 - x0, z1 - z0);
    let mut faces = vec![
        // Floor and the four inner wall faces; no ceiling, mirroring how
        // indoor scans see a room.
        rect([x0, o, z0], [dx, o, o], [o, o, dz]),
        rect([x0, o, z0], [o, h, o], [o, o, dz]),
        rect([x1, o, z0], [o, h, o], [o, o, dz]),
        rect([x0, o, z0], [dx, o, o], [o, h, o]),
        rect([x0, o, z1], [dx, o, o], [o, h, o]),
    ];
    for b in &scene.boxes {
        let (bx, by, bz) = (
            b.max[0] - b.min[0],
            b.max[1] - b.min[1],
            b.max[2] - b.min[2],
        );
        // Top and sides; the bottom sits on the floor.
        faces.push(rect([b.min[0], b.max[1], b.min[2]], [bx, o, o], [o, o, bz]));
        faces.push(rect([b.min[0], b.min[1], b.min[2]], [o, by, o], [o, o, bz]));
        faces.push(rect([b.max[0], b.min[1], b.min[2]], [o, by, o], [o, o, bz]));
        faces.push(rect([b.min[0], b.min[1], b.min[2]], [bx, o, o], [o, by, o]));
        faces.push(rect([b.min[0], b.min[1], b.max[2]], [bx, o, o], [o, by, o]));
    }
    faces
}

/// Uniform area-weighted samples over the exposed scene surfaces. Every
/// returned point satisfies |sdf| < 1e-9: candidates swallowed by an
/// overlapping solid are rejected and redrawn.
pub fn sample_surface<T: Scalar>(
    scene: &Scene3D<T>,
    n: usize,
    seed: u64,
) -> Result<Vec<[T; 3]>, SceneError> {
    let faces = surface_faces(scene);
    let total: f64 = faces.iter().map(|f| f.area).sum();
    if total <= 0.0 {
        return Err(SceneError::Degenerate("scene has no surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 100 * n + 1000 {
            return Err(SceneError::Degenerate(
                "surface sampling kept hitting buried faces".into(),
            ));
        }
        let mut r = rng.gen_range(0.0..total);
        let mut chosen = faces.len() - 1;
        for (i, f) in faces.iter().enumerate() {
            if r < f.area {
                chosen = i;
                break;
            }
            r -= f.area;
        }
        let f = &faces[chosen];
        let a = cast::<T>(rng.gen_range(0.0..=1.0));
        let b = cast::<T>(rng.gen_range(0.0..=1.0));
        let p = [
            f.origin[0] + a * f.ea[0] + b * f.eb[0],
            f.origin[1] + a * f.ea[1] + b * f.eb[1],
            f.origin[2] + a * f.ea[2] + b * f.eb[2],
        ];
        if to_f64(scene_sdf(scene, p)).abs() < 1e-9 {
            out.push(p);
        }
    }
    Ok(out)
}

/// Torso height over free floor while walking, and over seats while
/// sitting, both jittered by +-0.05.
pub const WALK_TORSO_HEIGHT: f64 = 0.9;
pub const SIT_TORSO_HEIGHT: f64 = 0.6;
const TORSO_JITTER: f64 = 0.05;

/// Synthesizes plausible torso locations: walking-height points over open
/// floor plus sitting-height points above seat boxes (3 in 10 when seats
/// exist). Every emitted point passes [`birdseye_filter`] by
/// construction.
pub fn synth_torso_data<T: Scalar>(
    scene: &Scene3D<T>,
    n: usize,
    seed: u64,
) -> Result<Vec<[T; 3]>, SceneError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seats: Vec<&SceneBox<T>> = scene.boxes.iter().filter(|b| b.seat).collect();
    let n_sit = if seats.is_empty() { 0 } else { (n * 3) / 10 };
    let (x0, x1) = (to_f64(scene.x_range.0), to_f64(scene.x_range.1));
    let (z0, z1) = (to_f64(scene.z_range.0), to_f64(scene.z_range.1));
    let mut out = Vec::with_capacity(n);
    let push_checked = |p: [T; 3], out: &mut Vec<[T; 3]>| -> bool {
        if passes_birdseye(scene, p) {
            out.push(p);
            true
        } else {
            false
        }
    };
    for _ in 0..n - n_sit {
        let mut placed = false;
        for _ in 0..10_000 {
            let x = rng.gen_range(x0..=x1);
            let zc = rng.gen_range(z0..=z1);
            let over_furniture = scene
                .boxes
                .iter()
                .any(|b| b.footprint_contains(cast::<T>(x), cast::<T>(zc)));
            if over_furniture {
                continue;
            }
            let y = WALK_TORSO_HEIGHT + rng.gen_range(-TORSO_JITTER..=TORSO_JITTER);
            if push_checked([cast::<T>(x), cast::<T>(y), cast::<T>(zc)], &mut out) {
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SceneError::Degenerate("no free floor to walk on".into()));
        }
    }
    for _ in 0..n_sit {
        let mut placed = false;
        for _ in 0..10_000 {
            let b = seats[rng.gen_range(0..seats.len())];
            let x = rng.gen_range(to_f64(b.min[0])..=to_f64(b.max[0]));
            let zc = rng.gen_range(to_f64(b.min[2])..=to_f64(b.max[2]));
            let y = SIT_TORSO_HEIGHT + rng.gen_range(-TORSO_JITTER..=TORSO_JITTER);
            if push_checked([cast::<T>(x), cast::<T>(y), cast::<T>(zc)], &mut out) {
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SceneError::Degenerate("seats are unusable".into()));
        }
    }
    Ok(out)
}

/// Where a set of torso locations came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    TrainingData,
    VaeSample,
}

impl core::fmt::Display for Provenance {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Provenance::TrainingData => "training",
            Provenance::VaeSample => "vae",
        })
    }
}

impl core::str::FromStr for Provenance {
    type Err = SceneError;
    fn from_str(s: &str) -> Result<Self, SceneError> {
        match s {
            "training" => Ok(Provenance::TrainingData),
            "vae" => Ok(Provenance::VaeSample),
            other => Err(SceneError::Parse(format!("unknown provenance {other:?}"))),
        }
    }
}

/// Candidate torso locations with their origin tag.
#[derive(Clone, Debug, PartialEq)]
pub struct AccessibleRegion<T> {
    pub points: Vec<[T; 3]>,
    pub provenance: Provenance,
}

impl<T: Scalar> core::fmt::Display for AccessibleRegion<T> {
    /// Text form: provenance tag, then one "x y z" line per point.
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(f, "{}", self.provenance)?;
        for p in &self.points {
            writeln!(f, "{} {} {}", to_f64(p[0]), to_f64(p[1]), to_f64(p[2]))?;
        }
        Ok(())
    }
}

impl<T: Scalar> core::str::FromStr for AccessibleRegion<T> {
    type Err = SceneError;
    fn from_str(s: &str) -> Result<Self, SceneError> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let provenance = lines
            .next()
            .ok_or_else(|| SceneError::Parse("empty region text".into()))?
            .trim()
            .parse::<Provenance>()?;
        let mut points = Vec::new();
        for line in lines {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| SceneError::Parse(format!("bad coordinate {t:?}")))
                })
                .collect::<Result<_, _>>()?;
            if vals.len() != 3 {
                return Err(SceneError::Parse(format!(
                    "expected 3 coordinates per line, got {}",
                    vals.len()
                )));
            }
            points.push([cast::<T>(vals[0]), cast::<T>(vals[1]), cast::<T>(vals[2])]);
        }
        Ok(AccessibleRegion { points, provenance })
    }
}

/// The bird's-eye keep rule: inside the floor extent, not over any solid
/// furniture footprint, except above a seat's top surface.
pub fn passes_birdseye<T: Scalar>(scene: &Scene3D<T>, p: [T; 3]) -> bool {
    let (x, y, z) = (p[0], p[1], p[2]);
    if !(x.is_finite() && y.is_finite() && z.is_finite()) {
        return false;
    }
    if x < scene.x_range.0 || x > scene.x_range.1 || z < scene.z_range.0 || z > scene.z_range.1 {
        return false;
    }
    for b in &scene.boxes {
        if b.footprint_contains(x, z) && !(b.seat && y >= b.max[1]) {
            return false;
        }
    }
    true
}

/// Projects every point to the bird's eye view and keeps the plausible
/// ones per [`passes_birdseye`]. Provenance is preserved.
pub fn birdseye_filter<T: Scalar>(
    region: &AccessibleRegion<T>,
    scene: &Scene3D<T>,
) -> AccessibleRegion<T> {
    AccessibleRegion {
        points: region
            .points
            .iter()
            .copied()
            .filter(|p| passes_birdseye(scene, *p))
            .collect(),
        provenance: region.provenance,
    }
}

/// Voxelizes an accessible region over the room volume with cubic voxels.
///
/// A voxel is accessible when it contains a region point or touches one
/// through the 26-neighborhood (one voxel of dilation, so sparse points
/// form a connected medium), and its center lies in free air by the scene
/// distance. `resolution` counts voxels along the longest room axis; all
/// axes must end up with at least 4.
pub fn voxelize_accessible<T: Scalar>(
    region: &AccessibleRegion<T>,
    scene: &Scene3D<T>,
    resolution: usize,
) -> Result<VoxelGrid<T>, SceneError> {
    if region.points.is_empty() {
        return Err(SceneError::EmptyRegion);
    }
    let (lo, hi) = scene.bounds();
    let extent = [
        to_f64(hi[0] - lo[0]),
        to_f64(hi[1] - lo[1]),
        to_f64(hi[2] - lo[2]),
    ];
    let longest = extent[0].max(extent[1]).max(extent[2]);
    if resolution < 4 {
        return Err(SceneError::BadInput(format!(
            "resolution {resolution} is below 4"
        )));
    }
    let cell = longest / resolution as f64;
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = (extent[a] / cell).ceil().max(1.0) as usize;
        if dims[a] < 4 {
            return Err(SceneError::BadInput(format!(
                "axis {a} gets only {} voxels at resolution {resolution}; the room is too flat for it",
                dims[a]
            )));
        }
    }
    let size = [cast::<T>(cell); 3];
    let template = VoxelGrid::new(dims, lo, size, vec![true; dims[0] * dims[1] * dims[2]]);
    let mut occupied = vec![false; dims[0] * dims[1] * dims[2]];
    for p in &region.points {
        if let Some(v) = template.voxel_of(*p) {
            occupied[template.idx(v)] = true;
        }
    }
    let mut accessible = vec![false; occupied.len()];
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for zc in 0..dims[2] {
                let v = [x, y, zc];
                let mut near = false;
                'scan: for dx in -1isize..=1 {
                    for dy in -1isize..=1 {
                        for dz in -1isize..=1 {
                            let (nx, ny, nz) = (
                                x as isize + dx,
                                y as isize + dy,
                                zc as isize + dz,
                            );
                            if nx < 0 || ny < 0 || nz < 0 {
                                continue;
                            }
                            let q = [nx as usize, ny as usize, nz as usize];
                            if template.in_bounds(q) && occupied[template.idx(q)] {
                                near = true;
                                break 'scan;
                            }
                        }
                    }
                }
                if near && to_f64(scene_sdf(scene, template.center(v))) > 0.0 {
                    accessible[template.idx(v)] = true;
                }
            }
        }
    }
    if !accessible.iter().any(|a| *a) {
        return Err(SceneError::EmptyRegion);
    }
    Ok(VoxelGrid::new(dims, lo, size, accessible))
}

/// Labeled 3D training data from the voxel Dijkstra oracle.
///
/// Goals are drawn without replacement from the accessible voxels; each
/// contributes one sample per voxel with coordinates normalized to
/// [-1, 1]^3 over the voxel volume and distances scaled to world units.
/// Unreachable or inaccessible voxels get the obstacle label; the latter
/// only when `include_inaccessible` asks for them.
pub fn build_dataset_3d<T: Scalar>(
    voxels: &VoxelGrid<T>,
    goals_per_scene: usize,
    include_inaccessible: bool,
    seed: u64,
) -> Result<TrainSet<T>, SceneError> {
    if goals_per_scene == 0 {
        return Err(SceneError::BadInput("zero goals per scene".into()));
    }
    let s0 = to_f64(voxels.voxel_size[0]);
    for a in 1..3 {
        if (to_f64(voxels.voxel_size[a]) - s0).abs() > 1e-9 * s0.abs() {
            return Err(SceneError::BadInput(
                "world distances need cubic voxels".into(),
            ));
        }
    }
    let mut acc = Vec::new();
    for x in 0..voxels.dims[0] {
        for y in 0..voxels.dims[1] {
            for z in 0..voxels.dims[2] {
                if voxels.is_accessible([x, y, z]) {
                    acc.push([x, y, z]);
                }
            }
        }
    }
    if acc.is_empty() {
        return Err(SceneError::EmptyRegion);
    }
    if goals_per_scene > acc.len() {
        return Err(SceneError::BadInput(format!(
            "{goals_per_scene} goals from {} accessible voxels",
            acc.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..acc.len()).collect();
    order.shuffle(&mut rng);
    let transform = FieldTargetTransform::default();
    let scale = voxels.voxel_size[0];
    let mut samples = Vec::new();
    for &gi in order.iter().take(goals_per_scene) {
        let goal_voxel = acc[gi];
        let field = dijkstra3d_solve(voxels, goal_voxel)?;
        let goal = voxels.norm_of(voxels.center(goal_voxel)).to_vec();
        for x in 0..voxels.dims[0] {
            for y in 0..voxels.dims[1] {
                for z in 0..voxels.dims[2] {
                    let v = [x, y, z];
                    let accessible = voxels.is_accessible(v);
                    if !accessible && !include_inaccessible {
                        continue;
                    }
                    let target = match field.value(v) {
                        Some(d) if accessible => transform.apply(d * scale),
                        _ => transform.obstacle(),
                    };
                    samples.push(TrainSample {
                        grid_id: 0,
                        goal: goal.clone(),
                        query: voxels.norm_of(voxels.center(v)).to_vec(),
                        target,
                    });
                }
            }
        }
    }
    Ok(TrainSet {
        coord_dim: 3,
        oracle: OracleKind::Dijkstra,
        grids: Vec::new(),
        samples,
    })
}

impl<T: Scalar> core::fmt::Display for Scene3D<T> {
    /// Text form: "<x0> <x1> <z0> <z1> <height>" header, then one box per
    /// line as six corner reals and a seat/solid tag.
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(
            f,
            "{} {} {} {} {}",
            to_f64(self.x_range.0),
            to_f64(self.x_range.1),
            to_f64(self.z_range.0),
            to_f64(self.z_range.1),
            to_f64(self.height)
        )?;
        for b in &self.boxes {
            writeln!(
                f,
                "{} {} {} {} {} {} {}",
                to_f64(b.min[0]),
                to_f64(b.min[1]),
                to_f64(b.min[2]),
                to_f64(b.max[0]),
                to_f64(b.max[1]),
                to_f64(b.max[2]),
                if b.seat { "seat" } else { "solid" }
            )?;
        }
        Ok(())
    }
}

impl<T: Scalar> core::str::FromStr for Scene3D<T> {
    type Err = SceneError;
    fn from_str(s: &str) -> Result<Self, SceneError> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| SceneError::Parse("empty scene text".into()))?;
        let nums: Vec<f64> = header
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| SceneError::Parse(format!("bad extent value {t:?}")))
            })
            .collect::<Result<_, _>>()?;
        if nums.len() != 5 {
            return Err(SceneError::Parse(format!(
                "scene header needs 5 values, got {}",
                nums.len()
            )));
        }
        let mut boxes = Vec::new();
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 7 {
                return Err(SceneError::Parse(format!(
                    "box line needs 6 corners and a tag: {line:?}"
                )));
            }
            let mut vals = [0.0f64; 6];
            for (i, t) in toks[..6].iter().enumerate() {
                vals[i] = t
                    .parse::<f64>()
                    .map_err(|_| SceneError::Parse(format!("bad corner value {t:?}")))?;
            }
            let seat = match toks[6] {
                "seat" => true,
                "solid" => false,
                other => {
                    return Err(SceneError::Parse(format!("unknown box tag {other:?}")))
                }
            };
            boxes.push(SceneBox {
                min: [cast::<T>(vals[0]), cast::<T>(vals[1]), cast::<T>(vals[2])],
                max: [cast::<T>(vals[3]), cast::<T>(vals[4]), cast::<T>(vals[5])],
                seat,
            });
        }
        Scene3D::new(
            (cast::<T>(nums[0]), cast::<T>(nums[1])),
            (cast::<T>(nums[2]), cast::<T>(nums[3])),
            cast::<T>(nums[4]),
            boxes,
        )
    }
}
