//! The training loop shared by all four variants.

use super::{FieldConfig, FieldError, FieldModel, FieldVariant, PreparedField, TrainSet};
use crate::grid2d::NormCoord;
use crate::neural::{
    backward, forward_recorded, l1_loss, AdamConfig, AdamState, NeuralError, Tensor,
};
use crate::scalar::{to_f64, Scalar};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Loss trace of a training run. Epoch losses are the mean absolute error
/// over every sample as visited within that epoch.
#[derive(Clone, Debug)]
pub struct TrainReport {
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
}

/// Checks the dataset against the variant's assumptions and extracts the
/// fixed goal for Fixed models.
fn validate<T: Scalar>(
    variant: FieldVariant,
    data: &TrainSet<T>,
) -> Result<Option<Vec<f64>>, FieldError> {
    if data.is_empty() {
        return Err(FieldError::EmptyDataset);
    }
    let d = data.coord_dim;
    for (i, s) in data.samples.iter().enumerate() {
        if s.query.len() != d || s.goal.len() != d {
            return Err(FieldError::BadInput(format!(
                "sample {i} has {} query / {} goal coordinates, dataset says {d}",
                s.query.len(),
                s.goal.len()
            )));
        }
        if !data.grids.is_empty() && s.grid_id >= data.grids.len() {
            return Err(FieldError::BadInput(format!(
                "sample {i} references grid {} of {}",
                s.grid_id,
                data.grids.len()
            )));
        }
    }
    if variant.needs_grid() {
        if data.grids.is_empty() {
            return Err(FieldError::BadInput(format!(
                "variant {variant} trains on occupancy grids but the dataset has none"
            )));
        }
        let (h, w) = (data.grids[0].height(), data.grids[0].width());
        if data.grids.iter().any(|g| (g.height(), g.width()) != (h, w)) {
            return Err(FieldError::BadInput(
                "mixed grid dimensions in one training set".into(),
            ));
        }
    }
    match variant {
        FieldVariant::Fixed | FieldVariant::GoalConditioned => {
            // One environment per model: these variants have nowhere to
            // read a second grid from.
            let gid = data.samples[0].grid_id;
            if data.samples.iter().any(|s| s.grid_id != gid) {
                return Err(FieldError::BadInput(format!(
                    "variant {variant} assumes a single environment, dataset spans several"
                )));
            }
        }
        _ => {}
    }
    if variant == FieldVariant::Fixed {
        let goal = &data.samples[0].goal;
        if data.samples.iter().any(|s| &s.goal != goal) {
            return Err(FieldError::BadInput(
                "fixed variant assumes a single goal, dataset spans several".into(),
            ));
        }
        return Ok(Some(goal.iter().map(|v| to_f64(*v)).collect()));
    }
    Ok(None)
}

/// Shuffled sample indices regrouped so each batch draws from one grid.
/// Grid order follows first appearance in the shuffle, so it varies per
/// epoch while staying deterministic.
fn grid_batches(
    order: &[usize],
    grid_of: &[usize],
    batch_size: usize,
) -> Vec<Vec<usize>> {
    let mut bucket_order: Vec<usize> = Vec::new();
    let mut buckets: Vec<Vec<usize>> = Vec::new();
    let mut slot_of_grid: Vec<Option<usize>> = Vec::new();
    for &i in order {
        let g = grid_of[i];
        if g >= slot_of_grid.len() {
            slot_of_grid.resize(g + 1, None);
        }
        let slot = match slot_of_grid[g] {
            Some(s) => s,
            None => {
                let s = buckets.len();
                slot_of_grid[g] = Some(s);
                buckets.push(Vec::new());
                bucket_order.push(s);
                s
            }
        };
        buckets[slot].push(i);
    }
    let mut out = Vec::new();
    for s in bucket_order {
        for chunk in buckets[s].chunks(batch_size) {
            out.push(chunk.to_vec());
        }
    }
    out
}

struct BatchResult<T> {
    loss: T,
    count: usize,
}

/// One optimization step over a batch of sample indices.
fn step_batch<T: Scalar>(
    model: &mut FieldModel<T>,
    adam: &mut AdamState<T>,
    data: &TrainSet<T>,
    maps: &[Tensor<T>],
    batch: &[usize],
) -> Result<BatchResult<T>, FieldError> {
    let d = data.coord_dim;
    let n = batch.len();
    let target = Tensor::new(
        vec![n, 1],
        batch.iter().map(|&i| data.samples[i].target).collect(),
    )?;

    match model.variant {
        FieldVariant::Fixed | FieldVariant::GoalConditioned => {
            let width = model.net_input_dim();
            let mut rows = Vec::with_capacity(n * width);
            for &i in batch {
                let s = &data.samples[i];
                rows.extend_from_slice(&s.query);
                if model.variant == FieldVariant::GoalConditioned {
                    rows.extend_from_slice(&s.goal);
                }
            }
            let input = Tensor::new(vec![n, width], rows)?;
            let (pred, tape) = model.net.forward_recorded(&input)?;
            let (loss, grad) = l1_loss(&pred, &target)?;
            let (grads, _) = model.net.backward(tape, &grad)?;
            adam.step(
                &mut model.net.params.tensors_mut(),
                &grads.tensors(),
            )?;
            Ok(BatchResult { loss, count: n })
        }
        FieldVariant::ContextAligned => {
            let gid = data.samples[batch[0]].grid_id;
            let encoder = model.encoder.as_mut().expect("context variant has encoder");
            let (feat, enc_tape) = encoder.forward_recorded(&maps[gid])?;
            let shape = feat.shape().to_vec();
            let (channels, height, fw) = (shape[1], shape[2], shape[3]);
            let width = 2 * d + channels;
            let mut rows = Vec::with_capacity(n * width);
            let mut stencils = Vec::with_capacity(n);
            for &i in batch {
                let s = &data.samples[i];
                rows.extend_from_slice(&s.query);
                rows.extend_from_slice(&s.goal);
                let point = NormCoord::new(s.query[0], s.query[1]);
                let coeffs = super::bilinear_coeffs::<T>(height, fw, &point);
                let fd = feat.data();
                for c in 0..channels {
                    let base = c * height * fw;
                    let mut acc = T::zero();
                    for (w, (r, col)) in coeffs.weights.iter().zip(&coeffs.cells) {
                        acc += *w * fd[base + r * fw + col];
                    }
                    rows.push(acc);
                }
                stencils.push(coeffs);
            }
            let input = Tensor::new(vec![n, width], rows)?;
            let (pred, tape) = model.net.forward_recorded(&input)?;
            let (loss, grad) = l1_loss(&pred, &target)?;
            let (net_grads, in_grad) = model.net.backward(tape, &grad)?;
            // Scatter the feature columns' gradient back through the
            // bilinear stencil into the feature map.
            let mut dfeat = Tensor::zeros(&shape);
            {
                let dd = dfeat.data_mut();
                let ig = in_grad.data();
                for (row, coeffs) in stencils.iter().enumerate() {
                    for c in 0..channels {
                        let g = ig[row * width + 2 * d + c];
                        if g == T::zero() {
                            continue;
                        }
                        let base = c * height * fw;
                        for (w, (r, col)) in coeffs.weights.iter().zip(&coeffs.cells) {
                            dd[base + r * fw + col] += g * *w;
                        }
                    }
                }
            }
            let (enc_grads, _) = encoder.backward(enc_tape, &dfeat)?;
            let mut params = model.net.params.tensors_mut();
            params.extend(encoder.params.tensors_mut());
            let mut grads = net_grads.tensors();
            grads.extend(enc_grads.tensors());
            adam.step(&mut params, &grads)?;
            Ok(BatchResult { loss, count: n })
        }
        FieldVariant::Hyper => {
            let gid = data.samples[batch[0]].grid_id;
            let hypo_spec = model.hypo_spec.as_ref().expect("hyper variant has spec");
            let (emitted, hyper_tape) = model.net.forward_recorded(&maps[gid])?;
            let hypo_params = hypo_spec.unflatten_params(emitted.data())?;
            let width = 2 * d;
            let mut rows = Vec::with_capacity(n * width);
            for &i in batch {
                let s = &data.samples[i];
                rows.extend_from_slice(&s.query);
                rows.extend_from_slice(&s.goal);
            }
            let input = Tensor::new(vec![n, width], rows)?;
            let (pred, hypo_tape) = forward_recorded(hypo_spec, &hypo_params, &input)?;
            let (loss, grad) = l1_loss(&pred, &target)?;
            let (hypo_grads, _) = backward(hypo_spec, &hypo_params, hypo_tape, &grad)?;
            // The emitted parameters are the hypernetwork's output, so
            // their gradient is its output gradient, flattened in emission
            // order.
            let flat = Tensor::new(
                vec![1, hypo_spec.param_count()],
                hypo_grads.flatten_values(),
            )?;
            let (hyper_grads, _) = model.net.backward(hyper_tape, &flat)?;
            adam.step(
                &mut model.net.params.tensors_mut(),
                &hyper_grads.tensors(),
            )?;
            Ok(BatchResult { loss, count: n })
        }
    }
}

/// Mean absolute error of a model over a whole dataset, batched per grid.
pub fn dataset_loss<T: Scalar>(
    model: &FieldModel<T>,
    data: &TrainSet<T>,
) -> Result<f64, FieldError> {
    if data.is_empty() {
        return Err(FieldError::EmptyDataset);
    }
    let order: Vec<usize> = (0..data.samples.len()).collect();
    let grid_of: Vec<usize> = data.samples.iter().map(|s| s.grid_id).collect();
    let mut total = 0.0;
    for batch in grid_batches(&order, &grid_of, 2048) {
        let gid = data.samples[batch[0]].grid_id;
        let grid = model.variant.needs_grid().then(|| &data.grids[gid]);
        let prepared = PreparedField::prepare(model, grid)?;
        // Per-sample goals differ, so query per distinct goal run.
        let mut at = 0;
        while at < batch.len() {
            let goal = &data.samples[batch[at]].goal;
            let mut end = at + 1;
            while end < batch.len() && &data.samples[batch[end]].goal == goal {
                end += 1;
            }
            let points: Vec<T> = batch[at..end]
                .iter()
                .flat_map(|&i| data.samples[i].query.iter().copied())
                .collect();
            let preds = prepared.query(goal, &points)?;
            for (k, &i) in batch[at..end].iter().enumerate() {
                total += (to_f64(preds[k]) - to_f64(data.samples[i].target)).abs();
            }
            at = end;
        }
    }
    Ok(total / data.samples.len() as f64)
}

/// Fits a field model to a dataset with Adam on mean absolute error.
///
/// Batches are shuffled each epoch with a stream derived from `seed`; for
/// grid-reading variants each batch stays within one grid so the encoder
/// (or hypernetwork) runs once per batch. Zero epochs returns the seeded
/// initialization untouched. Non-finite losses or activations abort with
/// [`FieldError::Diverged`].
pub fn train_field<T: Scalar>(
    variant: FieldVariant,
    config: &FieldConfig,
    data: &TrainSet<T>,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> Result<(FieldModel<T>, TrainReport), FieldError> {
    if batch_size == 0 {
        return Err(FieldError::BadInput("batch_size must be positive".into()));
    }
    let fixed_goal = validate(variant, data)?;
    let (gh, gw) = data
        .grids
        .first()
        .map(|g| (g.height(), g.width()))
        .unwrap_or((0, 0));
    let mut model = FieldModel::init(
        variant,
        config,
        data.coord_dim,
        gh,
        gw,
        data.oracle,
        fixed_goal,
        seed,
    )?;

    let maps: Vec<Tensor<T>> = data
        .grids
        .iter()
        .map(|g| Tensor::new(vec![1, 1, g.height(), g.width()], g.obstacle_map::<T>()))
        .collect::<Result<_, NeuralError>>()?;

    let adam_cfg = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = {
        let mut tensors = model.net.params.tensors();
        if let Some(enc) = &model.encoder {
            tensors.extend(enc.params.tensors());
        }
        AdamState::for_tensors(adam_cfg, &tensors)
    };

    let grid_of: Vec<usize> = data.samples.iter().map(|s| s.grid_id).collect();
    let mut order: Vec<usize> = (0..data.samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x517c_c1b7_2722_0a95);
    let mut epoch_losses = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let batches = if model.variant.needs_grid() {
            grid_batches(&order, &grid_of, batch_size)
        } else {
            order.chunks(batch_size).map(|c| c.to_vec()).collect()
        };
        let mut loss_sum = 0.0;
        let mut count = 0usize;
        for batch in &batches {
            let res = match step_batch(&mut model, &mut adam, data, &maps, batch) {
                Ok(r) => r,
                Err(FieldError::Neural(NeuralError::NonFinite(_))) => {
                    return Err(FieldError::Diverged { epoch });
                }
                Err(e) => return Err(e),
            };
            loss_sum += to_f64(res.loss) * res.count as f64;
            count += res.count;
        }
        let epoch_loss = loss_sum / count as f64;
        if !epoch_loss.is_finite() {
            return Err(FieldError::Diverged { epoch });
        }
        epoch_losses.push(epoch_loss);
    }

    let final_loss = match epoch_losses.last() {
        Some(l) => *l,
        None => dataset_loss(&model, data)?,
    };
    Ok((model, TrainReport { final_loss, epoch_losses }))
}
