//! Field interfaces the planners search over, with two implementations
//! each: exact solver output (the oracle adapters) and trained models.
//! Oracle adapters make planner behavior testable against ground truth
//! and double as the perfect-model upper bound in benchmarks.

use super::PlannerError;
use crate::field::{FieldModel, FieldTargetTransform, PreparedField};
use crate::fmm::{Distance3DField, DistanceField, VoxelGrid};
use crate::grid2d::{GridPos, NormCoord, OccupancyGrid};
use crate::scalar::Scalar;

/// Batched transformed values over grid cells. The grid is passed per
/// call because the multi-agent loop re-queries on temporarily modified
/// grids.
pub trait GridField<T> {
    fn values(
        &self,
        grid: &OccupancyGrid,
        goal: GridPos,
        cells: &[GridPos],
    ) -> Result<Vec<T>, PlannerError>;
}

/// Value and spatial gradient at continuous normalized coordinates, goal
/// already bound.
pub trait PlaneField<T> {
    fn value(&self, p: NormCoord<T>) -> Result<T, PlannerError>;
    fn gradient(&self, p: NormCoord<T>) -> Result<[T; 2], PlannerError>;
}

/// Batched transformed values at 3D world points.
pub trait SpaceField<T> {
    fn values(&self, goal: [T; 3], points: &[[T; 3]]) -> Result<Vec<T>, PlannerError>;
}

/// A solved distance field acting as a perfect model: per-cell values are
/// precomputed as transformed distances, unreachable and obstacle cells
/// as the obstacle label.
pub struct OracleGridField<T> {
    height: usize,
    width: usize,
    goal: GridPos,
    cell_values: Vec<T>,
}

impl<T: Scalar> OracleGridField<T> {
    pub fn from_distance(field: &DistanceField<T>, transform: &FieldTargetTransform) -> Self {
        let (h, w) = (field.height(), field.width());
        let mut cell_values = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                cell_values.push(match field.value(GridPos::new(r, c)) {
                    Some(d) => transform.apply(d),
                    None => transform.obstacle(),
                });
            }
        }
        OracleGridField {
            height: h,
            width: w,
            goal: field.goal(),
            cell_values,
        }
    }

    /// Raw per-cell values in row-major order, for fields that are not
    /// distance transforms (monotone relabelings in tests, for example).
    pub fn from_values(
        height: usize,
        width: usize,
        goal: GridPos,
        cell_values: Vec<T>,
    ) -> Result<Self, PlannerError> {
        if cell_values.len() != height * width {
            return Err(PlannerError::BadInput(format!(
                "{} values for a {height}x{width} grid",
                cell_values.len()
            )));
        }
        Ok(OracleGridField {
            height,
            width,
            goal,
            cell_values,
        })
    }
}

impl<T: Scalar> GridField<T> for OracleGridField<T> {
    fn values(
        &self,
        grid: &OccupancyGrid,
        goal: GridPos,
        cells: &[GridPos],
    ) -> Result<Vec<T>, PlannerError> {
        if grid.height() != self.height || grid.width() != self.width {
            return Err(PlannerError::BadInput(format!(
                "oracle field is {}x{}, grid is {}x{}",
                self.height,
                self.width,
                grid.height(),
                grid.width()
            )));
        }
        if goal != self.goal {
            return Err(PlannerError::BadInput(format!(
                "oracle field was solved for goal ({}, {}), queried with ({}, {})",
                self.goal.row, self.goal.col, goal.row, goal.col
            )));
        }
        cells
            .iter()
            .map(|p| {
                if p.row < self.height && p.col < self.width {
                    Ok(self.cell_values[p.row * self.width + p.col])
                } else {
                    Err(PlannerError::BadInput(format!(
                        "cell ({}, {}) outside the field",
                        p.row, p.col
                    )))
                }
            })
            .collect()
    }
}

/// A trained 2D model behind the [`GridField`] interface. Preparation
/// happens per query because the grid may differ between calls; for
/// variants that read the environment this is where encoding cost lands.
pub struct ModelGridField<'m, T> {
    model: &'m FieldModel<T>,
}

impl<'m, T: Scalar> ModelGridField<'m, T> {
    pub fn new(model: &'m FieldModel<T>) -> Result<Self, PlannerError> {
        if model.meta.coord_dim != 2 {
            return Err(PlannerError::BadInput(format!(
                "grid planning needs a 2D model, this one has {} query coordinates",
                model.meta.coord_dim
            )));
        }
        Ok(ModelGridField { model })
    }
}

/// The goal vector a 2D model expects: empty for the fixed variant (its
/// goal is baked in), the normalized goal cell otherwise.
pub(crate) fn grid_goal_vec<T: Scalar>(
    model: &FieldModel<T>,
    grid: &OccupancyGrid,
    goal: GridPos,
) -> Result<Vec<T>, PlannerError> {
    if model.meta.fixed_goal.is_some() {
        return Ok(Vec::new());
    }
    let g = grid.to_norm::<T>(goal)?;
    Ok(vec![g.u, g.v])
}

impl<T: Scalar> GridField<T> for ModelGridField<'_, T> {
    fn values(
        &self,
        grid: &OccupancyGrid,
        goal: GridPos,
        cells: &[GridPos],
    ) -> Result<Vec<T>, PlannerError> {
        let needs = self.model.variant.needs_grid();
        let prep = PreparedField::prepare(self.model, needs.then_some(grid))?;
        let goal_vec = grid_goal_vec(self.model, grid, goal)?;
        let mut flat = Vec::with_capacity(cells.len() * 2);
        for p in cells {
            let c = grid.to_norm::<T>(*p)?;
            flat.push(c.u);
            flat.push(c.v);
        }
        Ok(prep.query(&goal_vec, &flat)?)
    }
}

/// A trained 2D model bound to one grid and goal for continuous queries.
pub struct ModelPlaneField<'m, T> {
    prep: PreparedField<'m, T>,
    goal_vec: Vec<T>,
}

impl<'m, T: Scalar> ModelPlaneField<'m, T> {
    pub fn new(
        model: &'m FieldModel<T>,
        grid: &OccupancyGrid,
        goal: NormCoord<T>,
    ) -> Result<Self, PlannerError> {
        if model.meta.coord_dim != 2 {
            return Err(PlannerError::BadInput(format!(
                "plane planning needs a 2D model, this one has {} query coordinates",
                model.meta.coord_dim
            )));
        }
        let needs = model.variant.needs_grid();
        let prep = PreparedField::prepare(model, needs.then_some(grid))?;
        let goal_vec = if model.meta.fixed_goal.is_some() {
            Vec::new()
        } else {
            vec![goal.u, goal.v]
        };
        Ok(ModelPlaneField { prep, goal_vec })
    }
}

impl<T: Scalar> PlaneField<T> for ModelPlaneField<'_, T> {
    fn value(&self, p: NormCoord<T>) -> Result<T, PlannerError> {
        Ok(self.prep.query(&self.goal_vec, &[p.u, p.v])?[0])
    }

    fn gradient(&self, p: NormCoord<T>) -> Result<[T; 2], PlannerError> {
        let g = self.prep.query_gradient(&self.goal_vec, &[p.u, p.v])?;
        Ok([g[0], g[1]])
    }
}

/// A solved voxel distance field as a perfect 3D model. Distances are
/// voxel-unit path lengths; the adapter scales them by the voxel edge so
/// values live in world units, which requires cubic voxels.
pub struct OracleSpaceField<'a, T> {
    voxels: &'a VoxelGrid<T>,
    field: &'a Distance3DField<T>,
    transform: FieldTargetTransform,
    scale: T,
}

impl<'a, T: Scalar> OracleSpaceField<'a, T> {
    pub fn new(
        voxels: &'a VoxelGrid<T>,
        field: &'a Distance3DField<T>,
        transform: FieldTargetTransform,
    ) -> Result<Self, PlannerError> {
        if voxels.dims != field.dims {
            return Err(PlannerError::BadInput(format!(
                "voxel volume {:?} does not match field {:?}",
                voxels.dims, field.dims
            )));
        }
        Ok(OracleSpaceField {
            voxels,
            field,
            transform,
            scale: voxels.voxel_size[0],
        })
    }
}

impl<T: Scalar> SpaceField<T> for OracleSpaceField<'_, T> {
    fn values(&self, goal: [T; 3], points: &[[T; 3]]) -> Result<Vec<T>, PlannerError> {
        match self.voxels.voxel_of(goal) {
            Some(v) if v == self.field.goal => {}
            _ => {
                return Err(PlannerError::BadInput(
                    "oracle field was solved for a different goal voxel".into(),
                ))
            }
        }
        Ok(points
            .iter()
            .map(|p| {
                self.voxels
                    .voxel_of(*p)
                    .and_then(|v| self.field.value(v))
                    .map(|d| self.transform.apply(d * self.scale))
                    .unwrap_or_else(|| self.transform.obstacle())
            })
            .collect())
    }
}

/// A trained 3D model behind the [`SpaceField`] interface; the voxel
/// volume supplies the world-to-normalized mapping used in training.
pub struct ModelSpaceField<'m, 'v, T> {
    prep: PreparedField<'m, T>,
    model: &'m FieldModel<T>,
    voxels: &'v VoxelGrid<T>,
}

impl<'m, 'v, T: Scalar> ModelSpaceField<'m, 'v, T> {
    pub fn new(
        model: &'m FieldModel<T>,
        voxels: &'v VoxelGrid<T>,
    ) -> Result<Self, PlannerError> {
        if model.meta.coord_dim != 3 {
            return Err(PlannerError::BadInput(format!(
                "space planning needs a 3D model, this one has {} query coordinates",
                model.meta.coord_dim
            )));
        }
        let prep = PreparedField::prepare(model, None)?;
        Ok(ModelSpaceField {
            prep,
            model,
            voxels,
        })
    }
}

impl<T: Scalar> SpaceField<T> for ModelSpaceField<'_, '_, T> {
    fn values(&self, goal: [T; 3], points: &[[T; 3]]) -> Result<Vec<T>, PlannerError> {
        let goal_vec: Vec<T> = if self.model.meta.fixed_goal.is_some() {
            Vec::new()
        } else {
            self.voxels.norm_of(goal).to_vec()
        };
        let mut flat = Vec::with_capacity(points.len() * 3);
        for p in points {
            flat.extend_from_slice(&self.voxels.norm_of(*p));
        }
        Ok(self.prep.query(&goal_vec, &flat)?)
    }
}
