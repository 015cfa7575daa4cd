//! Conditional VAE over torso locations.
//!
//! The condition is a scene point cloud squeezed into one context vector:
//! shared dense layers run per point and a max pool keeps the strongest
//! response per feature, which makes the context invariant to point
//! order. The encoder reads context-plus-location and emits a diagonal
//! Gaussian over the latent; the decoder maps latent-plus-context back to
//! a location. Training optimizes squared reconstruction error plus a
//! cyclically annealed KL term.

use super::{sample_surface, AccessibleRegion, Provenance, Scene3D, SceneError};
use crate::neural::{
    kl_std_normal, l2_loss, read_tensors, write_tensors, Activation, AdamConfig, AdamState,
    LayerParams, NetParams, Network, NetworkSpec, NeuralError, Tensor,
};
use crate::scalar::{cast, to_f64, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"EFVA";
const VERSION: u32 = 1;

/// Seed mixes keep the three parameter streams and the noise stream
/// distinct while staying a pure function of the caller's seed.
const ENCODER_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;
const DECODER_SEED_MIX: u64 = 0x2545_f491_4f6c_dd1d;
const NOISE_SEED_MIX: u64 = 0x6a09_e667_f3bc_c909;

/// The conditioning cloud every generation-side call draws: a fixed-seed
/// surface sample, so training and sampling can agree on the context
/// without shipping the cloud around.
const CONTEXT_CLOUD_SEED: u64 = 0x00c1_0d5d;
pub const CONTEXT_CLOUD_POINTS: usize = 1024;

/// Start the posterior tight (sigma ~ e^{-2}). With unit widths the
/// latent is pure noise at the first step, the decoder learns to ignore
/// it and the model collapses to a constant; starting small lets the
/// reconstruction signal reach the means first, and the KL term widens
/// the posterior again as beta ramps.
const INITIAL_LOG_VAR_BIAS: f64 = -4.0;

#[derive(Clone, Debug)]
pub struct VaeModel<T> {
    pub point_net: Network<T>,
    pub encoder: Network<T>,
    pub decoder: Network<T>,
    pub latent_dim: usize,
    pub context_dim: usize,
}

/// Loss trace of a VAE run. `epoch_recon` is the raw per-element mean
/// squared error (unweighted), `epoch_kl` stays nonnegative by
/// construction of the KL term, and `mean_point_error` is the mean
/// Euclidean gap between each training location and its posterior-mean
/// reconstruction.
#[derive(Clone, Debug)]
pub struct VaeReport {
    pub epoch_recon: Vec<f64>,
    pub epoch_kl: Vec<f64>,
    pub epoch_beta: Vec<f64>,
    pub mean_point_error: f64,
}

/// Everything adjustable about a VAE run.
#[derive(Clone, Debug)]
pub struct VaeConfig {
    pub latent_dim: usize,
    pub context_dim: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    /// Weight on the (per-element mean) L2 term against the KL term.
    /// This is the Gaussian likelihood scale: 3 / (2 sigma^2) for
    /// observation noise sigma in scene units. Room-scale torso data has
    /// per-axis variance near 1, which is exactly where an unweighted
    /// objective prefers ignoring the latent entirely; pricing the
    /// reconstruction at sigma = 0.1 keeps the code informative.
    pub recon_weight: f64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            latent_dim: 8,
            context_dim: 64,
            hidden: 64,
            learning_rate: 1e-3,
            recon_weight: 150.0,
        }
    }
}

/// Cyclical annealing weight: each of `cycles` equal spans climbs
/// linearly from 0 at its first epoch to 1 at its last. A trailing
/// partial span (when `cycles` does not divide `epochs`) truncates the
/// ramp.
pub fn beta_schedule(epoch: usize, epochs: usize, cycles: usize) -> f64 {
    let cycles = cycles.max(1);
    let span = (epochs / cycles).max(1);
    if span == 1 {
        return 1.0;
    }
    (epoch % span) as f64 / (span - 1) as f64
}

fn cloud_tensor<T: Scalar>(cloud: &[[T; 3]]) -> Result<Tensor<T>, SceneError> {
    if cloud.is_empty() {
        return Err(SceneError::BadInput("empty point cloud".into()));
    }
    let flat: Vec<T> = cloud.iter().flat_map(|p| p.iter().copied()).collect();
    Ok(Tensor::new(vec![cloud.len(), 3], flat)?)
}

/// Max over rows per feature column, with the winning row remembered so
/// gradients can be routed back to it.
fn pool_rows<T: Scalar>(feats: &Tensor<T>) -> (Tensor<T>, Vec<usize>) {
    let (rows, cols) = (feats.shape()[0], feats.shape()[1]);
    let data = feats.data();
    let mut ctx = vec![T::zero(); cols];
    let mut winner = vec![0usize; cols];
    for j in 0..cols {
        let mut best = data[j];
        let mut at = 0;
        for i in 1..rows {
            let v = data[i * cols + j];
            if v > best {
                best = v;
                at = i;
            }
        }
        ctx[j] = best;
        winner[j] = at;
    }
    (
        Tensor::new(vec![1, cols], ctx).expect("pooled shape is consistent"),
        winner,
    )
}

/// The scene's context feature: per-point layers then the max pool.
pub fn context_feature<T: Scalar>(
    model: &VaeModel<T>,
    cloud: &[[T; 3]],
) -> Result<Tensor<T>, SceneError> {
    let input = cloud_tensor(cloud)?;
    let feats = model.point_net.forward(&input)?;
    Ok(pool_rows(&feats).0)
}

fn nonfinite_is_divergence<X>(r: Result<X, NeuralError>, epoch: usize) -> Result<X, SceneError> {
    r.map_err(|e| match e {
        NeuralError::NonFinite(_) => SceneError::Diverged { epoch },
        other => SceneError::Neural(other),
    })
}

/// Mean Euclidean distance between locations and their posterior-mean
/// reconstructions (noise off: z = mu).
fn reconstruction_error<T: Scalar>(
    model: &VaeModel<T>,
    cloud: &Tensor<T>,
    torsos: &Tensor<T>,
) -> Result<f64, SceneError> {
    let feats = model.point_net.forward(cloud)?;
    let (ctx, _) = pool_rows(&feats);
    let n = torsos.shape()[0];
    let (c, l) = (model.context_dim, model.latent_dim);
    let mut enc_in = Vec::with_capacity(n * (c + 3));
    for row in torsos.data().chunks_exact(3) {
        enc_in.extend_from_slice(ctx.data());
        enc_in.extend_from_slice(row);
    }
    let enc_out = model.encoder.forward(&Tensor::new(vec![n, c + 3], enc_in)?)?;
    let mut dec_in = Vec::with_capacity(n * (l + c));
    for row in enc_out.data().chunks_exact(2 * l) {
        dec_in.extend_from_slice(&row[..l]);
        dec_in.extend_from_slice(ctx.data());
    }
    let recon = model.decoder.forward(&Tensor::new(vec![n, l + c], dec_in)?)?;
    let mut total = 0.0;
    for (r, t) in recon.data().chunks_exact(3).zip(torsos.data().chunks_exact(3)) {
        let mut sq = 0.0;
        for a in 0..3 {
            sq += (to_f64(r[a]) - to_f64(t[a])).powi(2);
        }
        total += sq.sqrt();
    }
    Ok(total / n as f64)
}

/// Trains the VAE with the default architecture sizes.
pub fn train_vae<T: Scalar>(
    cloud: &[[T; 3]],
    torsos: &[[T; 3]],
    latent_dim: usize,
    epochs: usize,
    cycles: usize,
    seed: u64,
) -> Result<(VaeModel<T>, VaeReport), SceneError> {
    let config = VaeConfig {
        latent_dim,
        ..VaeConfig::default()
    };
    train_vae_config(cloud, torsos, &config, epochs, cycles, seed)
}

/// One full-batch pass: losses plus parameter gradients of the objective
/// `recon_weight * l2 + beta * kl`, with the latent noise supplied by the
/// caller (length n times latent_dim). The returned losses are the raw
/// unweighted terms. Separated from the training loop so gradient tests
/// can difference the loss under frozen noise.
#[allow(clippy::type_complexity)]
fn vae_step<T: Scalar>(
    model: &VaeModel<T>,
    cloud: &Tensor<T>,
    target: &Tensor<T>,
    eps: &[T],
    beta: T,
    recon_weight: T,
    epoch: usize,
) -> Result<(T, T, NetParams<T>, NetParams<T>, NetParams<T>), SceneError> {
    let (l, c) = (model.latent_dim, model.context_dim);
    let n = target.shape()[0];
    let half = cast::<T>(0.5);

    let (feats, point_tape) =
        nonfinite_is_divergence(model.point_net.forward_recorded(cloud), epoch)?;
    let (ctx, winners) = pool_rows(&feats);

    let mut enc_in = Vec::with_capacity(n * (c + 3));
    for row in target.data().chunks_exact(3) {
        enc_in.extend_from_slice(ctx.data());
        enc_in.extend_from_slice(row);
    }
    let enc_in = Tensor::new(vec![n, c + 3], enc_in)?;
    let (enc_out, enc_tape) =
        nonfinite_is_divergence(model.encoder.forward_recorded(&enc_in), epoch)?;

    let mut mu = Tensor::zeros(&[n, l]);
    let mut log_var = Tensor::zeros(&[n, l]);
    for (i, row) in enc_out.data().chunks_exact(2 * l).enumerate() {
        mu.data_mut()[i * l..(i + 1) * l].copy_from_slice(&row[..l]);
        log_var.data_mut()[i * l..(i + 1) * l].copy_from_slice(&row[l..]);
    }
    let sigma: Vec<T> = log_var.data().iter().map(|lv| (*lv * half).exp()).collect();
    let mut dec_in = Vec::with_capacity(n * (l + c));
    for i in 0..n {
        for k in 0..l {
            dec_in.push(mu.data()[i * l + k] + sigma[i * l + k] * eps[i * l + k]);
        }
        dec_in.extend_from_slice(ctx.data());
    }
    let dec_in = Tensor::new(vec![n, l + c], dec_in)?;
    let (recon, dec_tape) =
        nonfinite_is_divergence(model.decoder.forward_recorded(&dec_in), epoch)?;

    let (recon_loss, mut drecon) = l2_loss(&recon, target)?;
    let (kl, dmu_kl, dlv_kl) = kl_std_normal(&mu, &log_var)?;
    if !(to_f64(recon_loss).is_finite() && to_f64(kl).is_finite()) {
        return Err(SceneError::Diverged { epoch });
    }
    for g in drecon.data_mut() {
        *g = *g * recon_weight;
    }

    let (dec_grads, ddec_in) =
        nonfinite_is_divergence(model.decoder.backward(dec_tape, &drecon), epoch)?;
    let mut dctx = vec![T::zero(); c];
    let mut denc_out = Tensor::zeros(&[n, 2 * l]);
    for i in 0..n {
        let din = &ddec_in.data()[i * (l + c)..(i + 1) * (l + c)];
        for k in 0..l {
            let dz = din[k];
            // z = mu + exp(log_var / 2) * eps, so dz flows to mu
            // unscaled and to log_var through half the deviation.
            denc_out.data_mut()[i * 2 * l + k] = dz + beta * dmu_kl.data()[i * l + k];
            denc_out.data_mut()[i * 2 * l + l + k] =
                dz * eps[i * l + k] * half * sigma[i * l + k] + beta * dlv_kl.data()[i * l + k];
        }
        for j in 0..c {
            dctx[j] += din[l + j];
        }
    }
    let (enc_grads, denc_in) =
        nonfinite_is_divergence(model.encoder.backward(enc_tape, &denc_out), epoch)?;
    for i in 0..n {
        for j in 0..c {
            dctx[j] += denc_in.data()[i * (c + 3) + j];
        }
    }
    let mut dfeats = Tensor::zeros(feats.shape());
    for (j, &win) in winners.iter().enumerate() {
        dfeats.data_mut()[win * c + j] += dctx[j];
    }
    let (point_grads, _) =
        nonfinite_is_divergence(model.point_net.backward(point_tape, &dfeats), epoch)?;
    Ok((recon_loss, kl, point_grads, enc_grads, dec_grads))
}

/// Trains the VAE: full-batch Adam on L2 reconstruction plus
/// beta-annealed KL, one optimization step per epoch, deterministic in
/// `seed`.
pub fn train_vae_config<T: Scalar>(
    cloud: &[[T; 3]],
    torsos: &[[T; 3]],
    config: &VaeConfig,
    epochs: usize,
    cycles: usize,
    seed: u64,
) -> Result<(VaeModel<T>, VaeReport), SceneError> {
    let (l, c, hidden) = (config.latent_dim, config.context_dim, config.hidden);
    if l == 0 || c == 0 || hidden == 0 {
        return Err(SceneError::BadInput("zero-width VAE layer".into()));
    }
    if cycles == 0 {
        return Err(SceneError::BadInput("zero annealing cycles".into()));
    }
    if torsos.len() < l {
        return Err(SceneError::BadInput(format!(
            "{} locations cannot pin down a {l}-dim latent",
            torsos.len()
        )));
    }
    let cloud_t = cloud_tensor(cloud)?;
    let target = cloud_tensor(torsos)?;
    let n = torsos.len();

    let mut model = VaeModel {
        point_net: Network::init(
            NetworkSpec::dense_stack(&[3, hidden, hidden, c], Activation::Relu),
            seed,
        )?,
        encoder: Network::init(
            NetworkSpec::dense_stack(&[c + 3, hidden, hidden, 2 * l], Activation::Relu),
            seed ^ ENCODER_SEED_MIX,
        )?,
        decoder: Network::init(
            NetworkSpec::dense_stack(&[l + c, hidden, hidden, 3], Activation::Relu),
            seed ^ DECODER_SEED_MIX,
        )?,
        latent_dim: l,
        context_dim: c,
    };
    {
        let bias = model
            .encoder
            .params
            .layers
            .last_mut()
            .expect("encoder has layers")
            .bias
            .data_mut();
        for b in &mut bias[l..2 * l] {
            *b = cast::<T>(INITIAL_LOG_VAR_BIAS);
        }
    }

    let adam_cfg = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = {
        let mut tensors = model.point_net.params.tensors();
        tensors.extend(model.encoder.params.tensors());
        tensors.extend(model.decoder.params.tensors());
        AdamState::for_tensors(adam_cfg, &tensors)
    };
    let mut noise = ChaCha8Rng::seed_from_u64(seed ^ NOISE_SEED_MIX);

    let mut report = VaeReport {
        epoch_recon: Vec::with_capacity(epochs),
        epoch_kl: Vec::with_capacity(epochs),
        epoch_beta: Vec::with_capacity(epochs),
        mean_point_error: 0.0,
    };
    for epoch in 0..epochs {
        let beta = beta_schedule(epoch, epochs, cycles);
        let eps: Vec<T> = (0..n * l)
            .map(|_| cast::<T>(noise.sample::<f64, _>(StandardNormal)))
            .collect();
        let (recon_loss, kl, point_grads, enc_grads, dec_grads) = vae_step(
            &model,
            &cloud_t,
            &target,
            &eps,
            cast::<T>(beta),
            cast::<T>(config.recon_weight),
            epoch,
        )?;

        let mut params = model.point_net.params.tensors_mut();
        params.extend(model.encoder.params.tensors_mut());
        params.extend(model.decoder.params.tensors_mut());
        let mut grads = point_grads.tensors();
        grads.extend(enc_grads.tensors());
        grads.extend(dec_grads.tensors());
        adam.step(&mut params, &grads)?;

        report.epoch_recon.push(to_f64(recon_loss));
        report.epoch_kl.push(to_f64(kl));
        report.epoch_beta.push(beta);
    }
    report.mean_point_error = reconstruction_error(&model, &cloud_t, &target)?;
    Ok((model, report))
}

/// The canonical conditioning cloud for a scene (fixed internal seed).
pub fn scene_cloud<T: Scalar>(scene: &Scene3D<T>, n: usize) -> Result<Vec<[T; 3]>, SceneError> {
    sample_surface(scene, n, CONTEXT_CLOUD_SEED)
}

/// Decodes `n` standard-normal latents under the scene's canonical
/// context. Raw generator output: no plausibility filtering here.
pub fn sample_accessible<T: Scalar>(
    model: &VaeModel<T>,
    scene: &Scene3D<T>,
    n: usize,
    seed: u64,
) -> Result<AccessibleRegion<T>, SceneError> {
    if n == 0 {
        return Ok(AccessibleRegion {
            points: Vec::new(),
            provenance: Provenance::VaeSample,
        });
    }
    let cloud = scene_cloud(scene, CONTEXT_CLOUD_POINTS)?;
    let ctx = context_feature(model, &cloud)?;
    let (l, c) = (model.latent_dim, model.context_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dec_in = Vec::with_capacity(n * (l + c));
    for _ in 0..n {
        for _ in 0..l {
            dec_in.push(cast::<T>(rng.sample::<f64, _>(StandardNormal)));
        }
        dec_in.extend_from_slice(ctx.data());
    }
    let out = model.decoder.forward(&Tensor::new(vec![n, l + c], dec_in)?)?;
    let points = out
        .data()
        .chunks_exact(3)
        .map(|p| [p[0], p[1], p[2]])
        .collect();
    Ok(AccessibleRegion {
        points,
        provenance: Provenance::VaeSample,
    })
}

fn bad(msg: impl Into<String>) -> SceneError {
    SceneError::BadModelFile(msg.into())
}

fn take_params<T: Scalar>(
    spec: &NetworkSpec,
    tensors: &mut std::vec::IntoIter<Tensor<T>>,
) -> Result<NetParams<T>, SceneError> {
    let mut layers = Vec::new();
    for (ws, bs) in spec.param_shapes() {
        let weight = tensors.next().ok_or_else(|| bad("tensor list too short"))?;
        let bias = tensors.next().ok_or_else(|| bad("tensor list too short"))?;
        if weight.shape() != ws.as_slice() || bias.shape() != bs.as_slice() {
            return Err(bad(format!(
                "tensor shapes {:?}/{:?} do not match spec layer {:?}/{:?}",
                weight.shape(),
                bias.shape(),
                ws,
                bs
            )));
        }
        layers.push(LayerParams { weight, bias });
    }
    Ok(NetParams { layers })
}

/// Writes magic, version, a key-value header with the three layer specs,
/// then every parameter tensor (point net, encoder, decoder).
pub fn save_vae<T: Scalar>(path: &Path, model: &VaeModel<T>) -> Result<(), SceneError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let header = format!(
        "latent_dim {}\ncontext_dim {}\npoint_spec {}\nencoder_spec {}\ndecoder_spec {}\n",
        model.latent_dim,
        model.context_dim,
        model.point_net.spec,
        model.encoder.spec,
        model.decoder.spec
    );
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    let mut tensors = model.point_net.params.tensors();
    tensors.extend(model.encoder.params.tensors());
    tensors.extend(model.decoder.params.tensors());
    write_tensors(&mut w, &tensors)?;
    w.flush()?;
    Ok(())
}

pub fn load_vae<T: Scalar>(path: &Path) -> Result<VaeModel<T>, SceneError> {
    let file = std::fs::File::open(path)?;
    let mut r = std::io::BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    r.read_exact(&mut buf4)?;
    let header_len = u32::from_le_bytes(buf4) as usize;
    if header_len > 1 << 20 {
        return Err(bad("implausible header length"));
    }
    let mut header = vec![0u8; header_len];
    r.read_exact(&mut header)?;
    let header = String::from_utf8(header).map_err(|_| bad("header is not UTF-8"))?;

    let mut latent_dim = None;
    let mut context_dim = None;
    let mut point_spec: Option<NetworkSpec> = None;
    let mut encoder_spec: Option<NetworkSpec> = None;
    let mut decoder_spec: Option<NetworkSpec> = None;
    for line in header.lines() {
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| bad(format!("header line {line:?} has no value")))?;
        match key {
            "latent_dim" => {
                latent_dim = Some(value.parse::<usize>().map_err(|_| bad("bad latent_dim"))?)
            }
            "context_dim" => {
                context_dim = Some(value.parse::<usize>().map_err(|_| bad("bad context_dim"))?)
            }
            "point_spec" => point_spec = Some(value.parse().map_err(|_| bad("bad point_spec"))?),
            "encoder_spec" => {
                encoder_spec = Some(value.parse().map_err(|_| bad("bad encoder_spec"))?)
            }
            "decoder_spec" => {
                decoder_spec = Some(value.parse().map_err(|_| bad("bad decoder_spec"))?)
            }
            other => return Err(bad(format!("unknown header key {other:?}"))),
        }
    }
    let latent_dim = latent_dim.ok_or_else(|| bad("missing latent_dim"))?;
    let context_dim = context_dim.ok_or_else(|| bad("missing context_dim"))?;
    let point_spec = point_spec.ok_or_else(|| bad("missing point_spec"))?;
    let encoder_spec = encoder_spec.ok_or_else(|| bad("missing encoder_spec"))?;
    let decoder_spec = decoder_spec.ok_or_else(|| bad("missing decoder_spec"))?;

    let mut tensors = read_tensors::<T, _>(&mut r)?.into_iter();
    let point_params = take_params(&point_spec, &mut tensors)?;
    let encoder_params = take_params(&encoder_spec, &mut tensors)?;
    let decoder_params = take_params(&decoder_spec, &mut tensors)?;
    if tensors.next().is_some() {
        return Err(bad("trailing tensors after parameters"));
    }
    Ok(VaeModel {
        point_net: Network {
            spec: point_spec,
            params: point_params,
        },
        encoder: Network {
            spec: encoder_spec,
            params: encoder_params,
        },
        decoder: Network {
            spec: decoder_spec,
            params: decoder_params,
        },
        latent_dim,
        context_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{birdseye_filter, synth_torso_data, SceneBox};
    use super::*;
    use rand::seq::SliceRandom;

    fn test_scene() -> Scene3D<f64> {
        Scene3D::new(
            (-2.0, 2.0),
            (-2.0, 2.0),
            2.7,
            vec![SceneBox {
                min: [0.6, 0.0, 0.6],
                max: [1.2, 0.45, 1.2],
                seat: true,
            }],
        )
        .unwrap()
    }

    #[test]
    fn beta_endpoints_are_exact() {
        let (epochs, cycles) = (100, 4);
        assert_eq!(beta_schedule(0, epochs, cycles), 0.0);
        for cycle in 0..cycles {
            let span = epochs / cycles;
            assert_eq!(beta_schedule(cycle * span, epochs, cycles), 0.0);
            assert_eq!(beta_schedule(cycle * span + span - 1, epochs, cycles), 1.0);
        }
        // Degenerate spans pin the weight at one.
        assert_eq!(beta_schedule(0, 3, 3), 1.0);
        // Monotone within a span.
        let mut last = -1.0;
        for epoch in 0..25 {
            let b = beta_schedule(epoch, 100, 4);
            assert!(b >= last);
            last = b;
        }
    }

    #[test]
    fn context_is_permutation_invariant() {
        let scene = test_scene();
        let mut cloud = sample_surface(&scene, 120, 8).unwrap();
        let model = VaeModel {
            point_net: Network::<f64>::init(
                NetworkSpec::dense_stack(&[3, 32, 32, 16], Activation::Relu),
                5,
            )
            .unwrap(),
            encoder: Network::init(NetworkSpec::dense_stack(&[19, 8, 4], Activation::Relu), 6)
                .unwrap(),
            decoder: Network::init(NetworkSpec::dense_stack(&[18, 8, 3], Activation::Relu), 7)
                .unwrap(),
            latent_dim: 2,
            context_dim: 16,
        };
        let before = context_feature(&model, &cloud).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        cloud.shuffle(&mut rng);
        let after = context_feature(&model, &cloud).unwrap();
        for (a, b) in before.data().iter().zip(after.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn pooled_gradient_matches_finite_differences() {
        // Objective: probe-weighted sum of the pooled context. The scatter
        // back through the max locations must agree with nudging each
        // point-net parameter directly.
        let cloud = vec![
            [0.3f64, 0.9, -0.4],
            [-1.0, 0.1, 0.6],
            [0.8, 1.4, 0.2],
            [-0.2, 0.05, -1.1],
        ];
        let input = cloud_tensor(&cloud).unwrap();
        let spec = NetworkSpec::dense_stack(&[3, 10, 6], Activation::Relu);
        let net = Network::<f64>::init(spec, 11).unwrap();
        let probe: Vec<f64> = (0..6).map(|i| 0.3 + 0.1 * i as f64).collect();
        let objective = |net: &Network<f64>| -> f64 {
            let feats = net.forward(&input).unwrap();
            let (ctx, _) = pool_rows(&feats);
            ctx.data().iter().zip(&probe).map(|(c, p)| c * p).sum()
        };
        let (feats, tape) = net.forward_recorded(&input).unwrap();
        let (_, winners) = pool_rows(&feats);
        let mut dfeats = Tensor::zeros(feats.shape());
        for (j, &win) in winners.iter().enumerate() {
            dfeats.data_mut()[win * 6 + j] = probe[j];
        }
        let (grads, _) = net.backward(tape, &dfeats).unwrap();
        let h = 1e-6;
        let flat_grads = grads.flatten_values();
        let mut perturbed = net.clone();
        let mut idx = 0;
        for li in 0..perturbed.params.layers.len() {
            for ti in 0..2 {
                let len = {
                    let t = if ti == 0 {
                        &perturbed.params.layers[li].weight
                    } else {
                        &perturbed.params.layers[li].bias
                    };
                    t.len()
                };
                for k in 0..len {
                    let t = if ti == 0 {
                        &mut perturbed.params.layers[li].weight
                    } else {
                        &mut perturbed.params.layers[li].bias
                    };
                    let old = t.data()[k];
                    t.data_mut()[k] = old + h;
                    let plus = objective(&perturbed);
                    let t = if ti == 0 {
                        &mut perturbed.params.layers[li].weight
                    } else {
                        &mut perturbed.params.layers[li].bias
                    };
                    t.data_mut()[k] = old - h;
                    let minus = objective(&perturbed);
                    let t = if ti == 0 {
                        &mut perturbed.params.layers[li].weight
                    } else {
                        &mut perturbed.params.layers[li].bias
                    };
                    t.data_mut()[k] = old;
                    let fd = (plus - minus) / (2.0 * h);
                    let got = flat_grads[idx];
                    assert!(
                        (fd - got).abs() <= 1e-6 * (1.0 + fd.abs()),
                        "param {idx}: fd {fd} vs {got}"
                    );
                    idx += 1;
                }
            }
        }
    }

    #[test]
    fn full_loss_gradients_match_finite_differences() {
        // Differences the exact training objective (reconstruction plus
        // beta-weighted KL) under frozen noise against every parameter of
        // all three nets.
        let cloud = vec![
            [0.4f64, 0.0, -0.8],
            [-1.2, 0.9, 0.3],
            [0.7, 1.8, 1.1],
            [-0.3, 0.2, -1.4],
            [1.5, 0.6, 0.0],
            [-0.9, 1.2, 0.8],
        ];
        let torsos = vec![
            [0.1f64, 0.9, 0.2],
            [-0.5, 0.88, -0.3],
            [0.8, 0.6, 0.9],
            [0.3, 0.92, -0.7],
            [-1.1, 0.6, 0.4],
        ];
        let (l, c, hidden) = (3usize, 8usize, 12usize);
        let model = VaeModel {
            point_net: Network::<f64>::init(
                NetworkSpec::dense_stack(&[3, hidden, hidden, c], Activation::Relu),
                41,
            )
            .unwrap(),
            encoder: Network::init(
                NetworkSpec::dense_stack(&[c + 3, hidden, hidden, 2 * l], Activation::Relu),
                42,
            )
            .unwrap(),
            decoder: Network::init(
                NetworkSpec::dense_stack(&[l + c, hidden, hidden, 3], Activation::Relu),
                43,
            )
            .unwrap(),
            latent_dim: l,
            context_dim: c,
        };
        let cloud_t = cloud_tensor(&cloud).unwrap();
        let target = cloud_tensor(&torsos).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let eps: Vec<f64> = (0..torsos.len() * l)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let beta = 0.7;
        let weight = 7.5;
        let loss = |m: &VaeModel<f64>| -> f64 {
            let (recon, kl, _, _, _) =
                vae_step(m, &cloud_t, &target, &eps, beta, weight, 0).unwrap();
            weight * recon + beta * kl
        };
        let (_, _, pg, eg, dg) =
            vae_step(&model, &cloud_t, &target, &eps, beta, weight, 0).unwrap();
        let analytic = [pg, eg, dg];
        let h = 1e-6;
        fn tensor_at(
            m: &mut VaeModel<f64>,
            net: usize,
            layer: usize,
            which: usize,
        ) -> &mut Tensor<f64> {
            let nw = match net {
                0 => &mut m.point_net,
                1 => &mut m.encoder,
                _ => &mut m.decoder,
            };
            let lp = &mut nw.params.layers[layer];
            if which == 0 {
                &mut lp.weight
            } else {
                &mut lp.bias
            }
        }
        for net in 0..3 {
            let grads = analytic[net].tensors();
            let layer_count = grads.len() / 2;
            for layer in 0..layer_count {
                for which in 0..2 {
                    let len = grads[layer * 2 + which].len();
                    for k in 0..len {
                        let mut m = model.clone();
                        let old = tensor_at(&mut m, net, layer, which).data()[k];
                        tensor_at(&mut m, net, layer, which).data_mut()[k] = old + h;
                        let plus = loss(&m);
                        tensor_at(&mut m, net, layer, which).data_mut()[k] = old - h;
                        let minus = loss(&m);
                        let fd = (plus - minus) / (2.0 * h);
                        let got = grads[layer * 2 + which].data()[k];
                        assert!(
                            (fd - got).abs() <= 1e-4 * (1.0 + fd.abs()),
                            "net {net} layer {layer} tensor {which} param {k}: fd {fd} vs {got}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn training_learns_and_reports_nonnegative_kl() {
        let scene = test_scene();
        let cloud = scene_cloud(&scene, 256).unwrap();
        let torsos = synth_torso_data(&scene, 150, 13).unwrap();
        let (model, report) = train_vae(&cloud, &torsos, 4, 120, 3, 17).unwrap();
        assert_eq!(report.epoch_recon.len(), 120);
        for (kl, recon) in report.epoch_kl.iter().zip(&report.epoch_recon) {
            assert!(*kl >= 0.0);
            assert!(recon.is_finite());
        }
        assert_eq!(report.epoch_beta[0], 0.0);
        let first: f64 = report.epoch_recon[..10].iter().sum::<f64>() / 10.0;
        let last: f64 = report.epoch_recon[110..].iter().sum::<f64>() / 10.0;
        assert!(last < first, "recon {first} -> {last} did not improve");
        // A healthy share of raw samples lands in plausible floor space.
        let raw = sample_accessible(&model, &scene, 100, 23).unwrap();
        assert_eq!(raw.points.len(), 100);
        let kept = birdseye_filter(&raw, &scene);
        assert!(
            kept.points.len() >= 50,
            "only {} of 100 samples survived",
            kept.points.len()
        );
    }

    #[test]
    fn reconstruction_error_drops_below_a_tenth() {
        let scene = test_scene();
        let cloud = scene_cloud(&scene, 256).unwrap();
        let torsos = synth_torso_data(&scene, 200, 29).unwrap();
        let config = VaeConfig {
            latent_dim: 8,
            learning_rate: 3e-3,
            ..VaeConfig::default()
        };
        let (_, report) = train_vae_config(&cloud, &torsos, &config, 2000, 4, 31).unwrap();
        assert!(
            report.mean_point_error < 0.1,
            "mean reconstruction error {}",
            report.mean_point_error
        );
    }

    #[test]
    fn sampling_is_deterministic_and_empty_for_zero() {
        let scene = test_scene();
        let cloud = scene_cloud(&scene, 128).unwrap();
        let torsos = synth_torso_data(&scene, 60, 3).unwrap();
        let (model, _) = train_vae(&cloud, &torsos, 4, 30, 2, 5).unwrap();
        let a = sample_accessible(&model, &scene, 20, 77).unwrap();
        let b = sample_accessible(&model, &scene, 20, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.provenance, Provenance::VaeSample);
        let none = sample_accessible(&model, &scene, 0, 77).unwrap();
        assert!(none.points.is_empty());
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let scene = test_scene();
        let cloud = scene_cloud(&scene, 64).unwrap();
        let torsos = synth_torso_data(&scene, 40, 3).unwrap();
        let config = VaeConfig {
            latent_dim: 4,
            learning_rate: 1e200,
            ..VaeConfig::default()
        };
        match train_vae_config(&cloud, &torsos, &config, 50, 2, 5) {
            Err(SceneError::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn checkpoint_roundtrip_is_bitwise() {
        let scene = test_scene();
        let cloud = scene_cloud(&scene, 64).unwrap();
        let torsos = synth_torso_data(&scene, 40, 3).unwrap();
        let (model, _) = train_vae(&cloud, &torsos, 4, 10, 2, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vae.efv");
        save_vae(&path, &model).unwrap();
        let back = load_vae::<f64>(&path).unwrap();
        assert_eq!(back.latent_dim, model.latent_dim);
        assert_eq!(back.context_dim, model.context_dim);
        let a = sample_accessible(&model, &scene, 10, 3).unwrap();
        let b = sample_accessible(&back, &scene, 10, 3).unwrap();
        assert_eq!(a, b);
        // Corruption is refused.
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_vae::<f64>(&path).is_err());
    }
}
