//! Model evaluation: batched queries, exact input gradients, context
//! encoding and hypernetwork expansion.

use super::{FieldError, FieldModel, FieldVariant};
use crate::grid2d::{NormCoord, OccupancyGrid};
use crate::neural::{backward, forward, forward_recorded, NetParams, Tensor};
use crate::scalar::{cast, to_f64, Scalar};

/// Bilinear interpolation stencil at a normalized point: the four cell
/// indices, their weights, and the weight derivatives with respect to the
/// normalized coordinates. Outside the center lattice the point clamps to
/// the border, where the derivative in the clamped direction is zero.
#[derive(Clone, Debug)]
pub struct BilinearCoeffs<T> {
    /// (row, col) of the four corners: (r0,c0), (r0,c1), (r1,c0), (r1,c1).
    pub cells: [(usize, usize); 4],
    pub weights: [T; 4],
    pub d_du: [T; 4],
    pub d_dv: [T; 4],
}

/// Fractional axis position: clamped continuous index, lower cell, fraction
/// and the clamp-aware derivative scale d(index)/d(norm coord).
fn axis_setup(n: usize, coord: f64) -> (usize, usize, f64, f64) {
    // Cell centers sit at integer indices: center k maps to norm
    // 2(k + 0.5)/n - 1, inverted here.
    let raw = (coord + 1.0) / 2.0 * n as f64 - 0.5;
    let max = (n - 1) as f64;
    let clamped = raw.clamp(0.0, max);
    let scale = if raw > 0.0 && raw < max { n as f64 / 2.0 } else { 0.0 };
    let lo = (clamped.floor() as usize).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    (lo, hi, clamped - lo as f64, scale)
}

/// Builds the interpolation stencil for a `height` x `width` cell lattice.
pub fn bilinear_coeffs<T: Scalar>(
    height: usize,
    width: usize,
    point: &NormCoord<T>,
) -> BilinearCoeffs<T> {
    let (c0, c1, fx, sx) = axis_setup(width, to_f64(point.u));
    let (r0, r1, fy, sy) = axis_setup(height, to_f64(point.v));
    let w = |v: f64| cast::<T>(v);
    BilinearCoeffs {
        cells: [(r0, c0), (r0, c1), (r1, c0), (r1, c1)],
        weights: [
            w((1.0 - fy) * (1.0 - fx)),
            w((1.0 - fy) * fx),
            w(fy * (1.0 - fx)),
            w(fy * fx),
        ],
        d_du: [
            w(-(1.0 - fy) * sx),
            w((1.0 - fy) * sx),
            w(-fy * sx),
            w(fy * sx),
        ],
        d_dv: [
            w(-(1.0 - fx) * sy),
            w(-fx * sy),
            w((1.0 - fx) * sy),
            w(fx * sy),
        ],
    }
}

/// Samples every channel of a `[1, C, H, W]` feature map at one point.
pub fn align_feature<T: Scalar>(feature_map: &Tensor<T>, point: &NormCoord<T>) -> Vec<T> {
    let shape = feature_map.shape();
    assert_eq!(shape.len(), 4, "feature map must be [1, C, H, W]");
    let (channels, height, width) = (shape[1], shape[2], shape[3]);
    let coeffs = bilinear_coeffs(height, width, point);
    let data = feature_map.data();
    (0..channels)
        .map(|c| {
            let base = c * height * width;
            let mut acc = T::zero();
            for (w, (r, col)) in coeffs.weights.iter().zip(&coeffs.cells) {
                acc += *w * data[base + r * width + col];
            }
            acc
        })
        .collect()
}

/// Runs the context encoder over a grid's obstacle map, returning the
/// feature map `[1, C, H, W]`. The encoder is fully convolutional, so grids
/// of any size work; a size different from the training size is worth a
/// warning because the features were never fitted there.
pub fn encode_context<T: Scalar>(
    model: &FieldModel<T>,
    grid: &OccupancyGrid,
) -> Result<Tensor<T>, FieldError> {
    let encoder = model.encoder.as_ref().ok_or_else(|| {
        FieldError::BadInput(format!("variant {} has no context encoder", model.variant))
    })?;
    if (grid.height(), grid.width()) != (model.meta.grid_height, model.meta.grid_width) {
        log::warn!(
            "encoding a {}x{} grid with a model trained on {}x{}",
            grid.height(),
            grid.width(),
            model.meta.grid_height,
            model.meta.grid_width
        );
    }
    let map = Tensor::new(
        vec![1, 1, grid.height(), grid.width()],
        grid.obstacle_map::<T>(),
    )?;
    Ok(encoder.forward(&map)?)
}

/// Expands the hypernetwork into concrete hyponetwork parameters for one
/// grid. The grid must match the training dimensions exactly; the
/// hypernetwork's dense layers are sized by the flattened map.
pub fn hypernet_forward<T: Scalar>(
    model: &FieldModel<T>,
    grid: &OccupancyGrid,
) -> Result<NetParams<T>, FieldError> {
    let hypo_spec = model.hypo_spec.as_ref().ok_or_else(|| {
        FieldError::BadInput(format!("variant {} has no hyponetwork", model.variant))
    })?;
    if (grid.height(), grid.width()) != (model.meta.grid_height, model.meta.grid_width) {
        return Err(FieldError::BadInput(format!(
            "hyper model built for {}x{} grids, got {}x{}",
            model.meta.grid_height,
            model.meta.grid_width,
            grid.height(),
            grid.width()
        )));
    }
    let map = Tensor::new(
        vec![1, 1, grid.height(), grid.width()],
        grid.obstacle_map::<T>(),
    )?;
    let out = model.net.forward(&map)?;
    Ok(hypo_spec.unflatten_params(out.data())?)
}

/// A model with its per-environment work done once: the encoded feature
/// map (ContextAligned) or the expanded hyponetwork (Hyper). Queries
/// through a prepared field give exactly the same values as one-shot
/// queries; preparation only moves the per-grid cost out of the loop.
pub struct PreparedField<'m, T> {
    model: &'m FieldModel<T>,
    feature: Option<Tensor<T>>,
    hypo: Option<NetParams<T>>,
}

impl<'m, T: Scalar> PreparedField<'m, T> {
    /// `grid` is required exactly when the variant reads environments.
    pub fn prepare(
        model: &'m FieldModel<T>,
        grid: Option<&OccupancyGrid>,
    ) -> Result<Self, FieldError> {
        match (model.variant.needs_grid(), grid) {
            (true, None) => {
                return Err(FieldError::BadInput(format!(
                    "variant {} needs an occupancy grid",
                    model.variant
                )))
            }
            (false, Some(_)) => {
                return Err(FieldError::BadInput(format!(
                    "variant {} takes no grid; the environment is baked into the weights",
                    model.variant
                )))
            }
            _ => {}
        }
        let mut prepared = PreparedField {
            model,
            feature: None,
            hypo: None,
        };
        match model.variant {
            FieldVariant::ContextAligned => {
                prepared.feature = Some(encode_context(model, grid.expect("checked above"))?);
            }
            FieldVariant::Hyper => {
                prepared.hypo = Some(hypernet_forward(model, grid.expect("checked above"))?);
            }
            _ => {}
        }
        Ok(prepared)
    }

    pub fn model(&self) -> &FieldModel<T> {
        self.model
    }

    fn check_goal(&self, goal: &[T]) -> Result<(), FieldError> {
        let d = self.model.meta.coord_dim;
        let ok = match self.model.variant {
            // The goal is baked into a Fixed model; an explicit one is
            // accepted for interface uniformity and ignored.
            FieldVariant::Fixed => goal.is_empty() || goal.len() == d,
            _ => goal.len() == d,
        };
        if ok {
            Ok(())
        } else {
            Err(FieldError::BadInput(format!(
                "goal has {} coordinates, model expects {}",
                goal.len(),
                d
            )))
        }
    }

    /// Builds the `[n, net_input_dim]` batch fed to the field net.
    fn assemble(&self, goal: &[T], points: &[T]) -> Result<Tensor<T>, FieldError> {
        self.check_goal(goal)?;
        let d = self.model.meta.coord_dim;
        if points.is_empty() || points.len() % d != 0 {
            return Err(FieldError::BadInput(format!(
                "points buffer of {} values is not a positive multiple of {}",
                points.len(),
                d
            )));
        }
        let n = points.len() / d;
        let width = self.model.net_input_dim();
        let mut rows = Vec::with_capacity(n * width);
        for q in points.chunks_exact(d) {
            rows.extend_from_slice(q);
            match self.model.variant {
                FieldVariant::Fixed => {}
                FieldVariant::GoalConditioned | FieldVariant::Hyper => {
                    rows.extend_from_slice(goal)
                }
                FieldVariant::ContextAligned => {
                    rows.extend_from_slice(goal);
                    let map = self.feature.as_ref().expect("prepared with feature map");
                    let point = NormCoord::new(q[0], q[1]);
                    rows.extend_from_slice(&align_feature(map, &point));
                }
            }
        }
        Ok(Tensor::new(vec![n, width], rows)?)
    }

    fn net_forward(&self, input: &Tensor<T>) -> Result<Tensor<T>, FieldError> {
        Ok(match self.model.variant {
            FieldVariant::Hyper => {
                let spec = self.model.hypo_spec.as_ref().expect("hyper has hypo spec");
                let params = self.hypo.as_ref().expect("prepared with hypo params");
                forward(spec, params, input)?
            }
            _ => self.model.net.forward(input)?,
        })
    }

    /// Predicted transformed values for a flat batch of query coordinates
    /// (`coord_dim` values per point), order-preserving.
    pub fn query(&self, goal: &[T], points: &[T]) -> Result<Vec<T>, FieldError> {
        let input = self.assemble(goal, points)?;
        let out = self.net_forward(&input)?;
        Ok(out.into_data())
    }

    /// Gradient of the predicted value with respect to one query point's
    /// coordinates. For ContextAligned this includes the path through the
    /// sampled feature: moving the point moves the interpolation weights.
    pub fn query_gradient(&self, goal: &[T], point: &[T]) -> Result<Vec<T>, FieldError> {
        let d = self.model.meta.coord_dim;
        if point.len() != d {
            return Err(FieldError::BadInput(format!(
                "point has {} coordinates, model expects {}",
                point.len(),
                d
            )));
        }
        let input = self.assemble(goal, point)?;
        let ones = Tensor::new(vec![1, 1], vec![T::one()])?;
        let in_grad = match self.model.variant {
            FieldVariant::Hyper => {
                let spec = self.model.hypo_spec.as_ref().expect("hyper has hypo spec");
                let params = self.hypo.as_ref().expect("prepared with hypo params");
                let (_, tape) = forward_recorded(spec, params, &input)?;
                backward(spec, params, tape, &ones)?.1
            }
            _ => {
                let (_, tape) = self.model.net.forward_recorded(&input)?;
                self.model.net.backward(tape, &ones)?.1
            }
        };
        let mut grad: Vec<T> = in_grad.data()[..d].to_vec();
        if self.model.variant == FieldVariant::ContextAligned {
            let map = self.feature.as_ref().expect("prepared with feature map");
            let shape = map.shape();
            let (channels, height, width) = (shape[1], shape[2], shape[3]);
            let coeffs =
                bilinear_coeffs::<T>(height, width, &NormCoord::new(point[0], point[1]));
            let data = map.data();
            let feat_grad = &in_grad.data()[2 * d..];
            for (c, g_c) in feat_grad.iter().enumerate().take(channels) {
                let base = c * height * width;
                let mut du = T::zero();
                let mut dv = T::zero();
                for i in 0..4 {
                    let (r, col) = coeffs.cells[i];
                    let f = data[base + r * width + col];
                    du += coeffs.d_du[i] * f;
                    dv += coeffs.d_dv[i] * f;
                }
                grad[0] += *g_c * du;
                grad[1] += *g_c * dv;
            }
        }
        Ok(grad)
    }
}

/// One-shot batched query; see [`PreparedField`] for the loop-friendly form.
pub fn query<T: Scalar>(
    model: &FieldModel<T>,
    grid: Option<&OccupancyGrid>,
    goal: &[T],
    points: &[T],
) -> Result<Vec<T>, FieldError> {
    PreparedField::prepare(model, grid)?.query(goal, points)
}

/// One-shot input gradient at a single point.
pub fn query_gradient<T: Scalar>(
    model: &FieldModel<T>,
    grid: Option<&OccupancyGrid>,
    goal: &[T],
    point: &[T],
) -> Result<Vec<T>, FieldError> {
    PreparedField::prepare(model, grid)?.query_gradient(goal, point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldConfig, OracleKind};
    use crate::grid2d::{generate_maze, GridPos};
    use crate::neural::{Activation, NetworkSpec};

    fn small_config(variant: FieldVariant) -> FieldConfig {
        // Thin nets keep these tests quick; widths are irrelevant to the
        // properties under test.
        let mut cfg = FieldConfig::default();
        match variant {
            FieldVariant::Fixed => {
                cfg.net_spec = Some(NetworkSpec::dense_stack(&[2, 24, 24, 1], Activation::sine()))
            }
            FieldVariant::GoalConditioned => {
                cfg.net_spec = Some(NetworkSpec::dense_stack(&[4, 24, 24, 1], Activation::sine()))
            }
            FieldVariant::ContextAligned => {
                cfg.net_spec = Some(NetworkSpec::dense_stack(
                    &[4 + 32, 24, 24, 1],
                    Activation::sine(),
                ))
            }
            FieldVariant::Hyper => {}
        }
        cfg
    }

    fn make_model(variant: FieldVariant, h: usize, w: usize, seed: u64) -> FieldModel<f64> {
        FieldModel::init(
            variant,
            &small_config(variant),
            2,
            h,
            w,
            OracleKind::Fmm,
            None,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn bilinear_weights_sum_to_one_and_match_fd() {
        for (u, v) in [(0.3, -0.4), (0.0, 0.0), (-0.71, 0.62), (0.97, -0.99)] {
            let c = bilinear_coeffs::<f64>(7, 5, &NormCoord::new(u, v));
            let sum: f64 = c.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            // Weight derivatives against finite differences of the weights,
            // valid when the stencil cells do not change across +-h.
            let h = 1e-7;
            let cu1 = bilinear_coeffs::<f64>(7, 5, &NormCoord::new(u + h, v));
            let cu0 = bilinear_coeffs::<f64>(7, 5, &NormCoord::new(u - h, v));
            if cu1.cells == c.cells && cu0.cells == c.cells {
                for i in 0..4 {
                    let fd = (cu1.weights[i] - cu0.weights[i]) / (2.0 * h);
                    assert!((fd - c.d_du[i]).abs() < 1e-5, "du[{i}] at ({u},{v})");
                }
            }
        }
    }

    #[test]
    fn align_feature_hits_centers_and_midpoints() {
        // 2 channels on a 3x4 lattice with distinct values per cell.
        let mut data = Vec::new();
        for c in 0..2 {
            for i in 0..12 {
                data.push((c * 100 + i) as f64);
            }
        }
        let map = Tensor::new(vec![1, 2, 3, 4], data).unwrap();
        // Center of cell (1, 2): u = 2(2.5)/4 - 1 = 0.25, v = 2(1.5)/3 - 1 = 0.
        let at = align_feature(&map, &NormCoord::new(0.25, 0.0));
        assert!((at[0] - 6.0).abs() < 1e-12);
        assert!((at[1] - 106.0).abs() < 1e-12);
        // Midpoint of centers (1,2) and (1,3): mean of 6 and 7.
        let mid_u = (0.25 + 0.75) / 2.0;
        let mid = align_feature(&map, &NormCoord::new(mid_u, 0.0));
        assert!((mid[0] - 6.5).abs() < 1e-12);
        // Constant map interpolates to the constant anywhere.
        let flat = Tensor::new(vec![1, 1, 3, 4], vec![3.5f64; 12]).unwrap();
        for (u, v) in [(-1.0, -1.0), (0.123, 0.456), (1.0, 1.0)] {
            let got = align_feature(&flat, &NormCoord::new(u, v));
            assert!((got[0] - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn arity_rules_are_strict() {
        let grid = OccupancyGrid::open(5, 5).unwrap();
        let b = make_model(FieldVariant::GoalConditioned, 5, 5, 1);
        assert!(PreparedField::prepare(&b, Some(&grid)).is_err());
        assert!(PreparedField::prepare(&b, None).is_ok());
        let c = make_model(FieldVariant::ContextAligned, 5, 5, 2);
        assert!(PreparedField::prepare(&c, None).is_err());
        assert!(PreparedField::prepare(&c, Some(&grid)).is_ok());
        // Wrong goal length and ragged point buffers.
        let p = PreparedField::prepare(&b, None).unwrap();
        assert!(p.query(&[0.1], &[0.0, 0.0]).is_err());
        assert!(p.query(&[0.1, 0.2], &[0.0, 0.0, 0.5]).is_err());
        assert!(p.query(&[0.1, 0.2], &[]).is_err());
    }

    #[test]
    fn query_is_pure_and_order_preserving() {
        let grid = generate_maze(6, 6, 0.2, 3).unwrap();
        for variant in [
            FieldVariant::Fixed,
            FieldVariant::GoalConditioned,
            FieldVariant::ContextAligned,
            FieldVariant::Hyper,
        ] {
            let model = make_model(variant, 6, 6, 9);
            let g = variant.needs_grid().then_some(&grid);
            let goal = [0.3, -0.5];
            let points = [0.1, 0.2, -0.6, 0.4, 0.9, -0.9];
            let batch = query(&model, g, &goal, &points).unwrap();
            let again = query(&model, g, &goal, &points).unwrap();
            assert_eq!(batch, again, "{variant}: query must be pure");
            for (i, chunk) in points.chunks(2).enumerate() {
                let single = query(&model, g, &goal, chunk).unwrap();
                assert_eq!(single.len(), 1);
                assert_eq!(single[0], batch[i], "{variant}: order preserved");
            }
        }
    }

    #[test]
    fn fixed_variant_ignores_the_goal() {
        let model = make_model(FieldVariant::Fixed, 4, 4, 5);
        let points = [0.2, -0.3];
        let a = query(&model, None, &[0.9, 0.9], &points).unwrap();
        let b = query(&model, None, &[-0.9, 0.1], &points).unwrap();
        let c = query(&model, None, &[], &points).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn prepared_queries_equal_one_shot_queries() {
        let grid = generate_maze(6, 6, 0.25, 8).unwrap();
        for variant in [FieldVariant::ContextAligned, FieldVariant::Hyper] {
            let model = make_model(variant, 6, 6, 13);
            let prepared = PreparedField::prepare(&model, Some(&grid)).unwrap();
            let goal = [0.0, 0.1];
            let points = [0.4, 0.4, -0.2, 0.7];
            let cached = prepared.query(&goal, &points).unwrap();
            let fresh = query(&model, Some(&grid), &goal, &points).unwrap();
            assert_eq!(cached, fresh, "{variant}: preparation is transparent");
        }
    }

    fn fd_gradient(
        model: &FieldModel<f64>,
        grid: Option<&OccupancyGrid>,
        goal: &[f64],
        point: &[f64],
    ) -> Vec<f64> {
        let h = 1e-6;
        let mut out = Vec::new();
        let prepared = PreparedField::prepare(model, grid).unwrap();
        for i in 0..point.len() {
            let mut plus = point.to_vec();
            plus[i] += h;
            let mut minus = point.to_vec();
            minus[i] -= h;
            let vp = prepared.query(goal, &plus).unwrap()[0];
            let vm = prepared.query(goal, &minus).unwrap()[0];
            out.push((vp - vm) / (2.0 * h));
        }
        out
    }

    #[test]
    fn gradients_match_fd_for_every_variant() {
        let grid = generate_maze(6, 6, 0.2, 21).unwrap();
        let goal = [0.25, -0.3];
        // Interior, off cell-center gridlines so the bilinear stencil is
        // differentiable in a neighborhood.
        let point = [0.21, 0.13];
        for variant in [
            FieldVariant::Fixed,
            FieldVariant::GoalConditioned,
            FieldVariant::ContextAligned,
            FieldVariant::Hyper,
        ] {
            let model = make_model(variant, 6, 6, 31);
            let g = variant.needs_grid().then_some(&grid);
            let analytic = query_gradient(&model, g, &goal, &point).unwrap();
            assert_eq!(analytic.len(), 2);
            let fd = fd_gradient(&model, g, &goal, &point);
            for (a, f) in analytic.iter().zip(&fd) {
                let scale = a.abs().max(f.abs()).max(1e-6);
                assert!(
                    (a - f).abs() / scale < 1e-4,
                    "{variant}: analytic {a} vs fd {f}"
                );
            }
        }
    }

    #[test]
    fn zeroed_net_has_zero_gradient() {
        let mut model = make_model(FieldVariant::GoalConditioned, 4, 4, 2);
        for layer in &mut model.net.params.layers {
            for v in layer.weight.data_mut() {
                *v = 0.0;
            }
        }
        // All-zero weights leave only biases: output constant, gradient 0.
        let g = query_gradient(&model, None, &[0.1, 0.1], &[0.3, -0.4]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn encoder_keeps_dims_and_sees_single_cell_changes() {
        let model = make_model(FieldVariant::ContextAligned, 6, 6, 17);
        let open = OccupancyGrid::open(6, 6).unwrap();
        let map = encode_context(&model, &open).unwrap();
        assert_eq!(map.shape(), &[1, 32, 6, 6]);
        let blocked = open.mark_obstacles(&[GridPos::new(2, 3)]).unwrap();
        let map2 = encode_context(&model, &blocked).unwrap();
        assert_ne!(map.data(), map2.data());
        let again = encode_context(&model, &open).unwrap();
        assert_eq!(map.data(), again.data());
    }

    #[test]
    fn hypernet_expansion_matches_spec_and_environment() {
        let model = make_model(FieldVariant::Hyper, 5, 5, 23);
        let spec = model.hypo_spec.clone().unwrap();
        let a = generate_maze(5, 5, 0.2, 1).unwrap();
        let b = generate_maze(5, 5, 0.2, 2).unwrap();
        assert_ne!(a, b);
        let pa = hypernet_forward(&model, &a).unwrap();
        let pa2 = hypernet_forward(&model, &a).unwrap();
        let pb = hypernet_forward(&model, &b).unwrap();
        assert_eq!(pa.flatten_values().len(), spec.param_count());
        assert_eq!(pa.flatten_values(), pa2.flatten_values());
        assert_ne!(pa.flatten_values(), pb.flatten_values());
        // Wrong grid size is an error, not a warning: dense widths bind.
        let big = OccupancyGrid::open(6, 6).unwrap();
        assert!(hypernet_forward(&model, &big).is_err());
    }
}
