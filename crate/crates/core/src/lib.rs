//! Reaching-distance fields for navigation, learned and exact.
//!
//! The crate covers the full pipeline: occupancy grids and 3D scenes,
//! exact distance solvers (fast marching, Dijkstra), a small neural engine
//! with input gradients, trainable field models that map (query, goal) to a
//! transformed reaching distance, planners that follow those fields, and
//! sampling baselines (RRT, PRM) plus a benchmark harness to compare them.
//!
//! All numerics are generic over [`scalar::Scalar`]; the aliases below fix
//! f64, which is what the CLI, the benchmarks and the tests use.

pub mod baselines;
pub mod bench;
pub mod field;
pub mod fmm;
pub mod grid2d;
pub mod neural;
pub mod planner;
pub mod scalar;
pub mod scene3d;

pub use scalar::Scalar;

/// Default working scalar for the concrete aliases below.
pub type Real = f64;

/// Normalized 2D coordinate at the default precision.
pub type NormCoord = grid2d::NormCoord<Real>;

/// Grid distance field at the default precision.
pub type DistanceField = fmm::DistanceField<Real>;

/// Voxel distance field at the default precision.
pub type Distance3DField = fmm::Distance3DField<Real>;

/// Voxel occupancy volume at the default precision.
pub type VoxelGrid = fmm::VoxelGrid<Real>;

/// Row-major tensor at the default precision.
pub type Tensor = neural::Tensor<Real>;

/// Learned field model at the default precision.
pub type FieldModel = field::FieldModel<Real>;

/// Furnished room at the default precision.
pub type Scene3D = scene3d::Scene3D<Real>;

/// Grid search trajectory at the default precision.
pub type GridTrajectory = planner::Trajectory<grid2d::GridPos, Real>;

/// Continuous plane trajectory at the default precision.
pub type PlaneTrajectory = planner::Trajectory<NormCoord, Real>;

/// 3D trajectory at the default precision.
pub type SpaceTrajectory = planner::Trajectory<[Real; 3], Real>;
