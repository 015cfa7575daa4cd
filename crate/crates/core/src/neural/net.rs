//! Layer specs, initialization, forward evaluation and the backward pass.

use super::{NeuralError, Tensor};
use crate::scalar::{cast, Scalar};
#[cfg(test)]
use crate::scalar::to_f64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default angular frequency of the sine activation.
pub const DEFAULT_OMEGA: f64 = 30.0;

/// Pointwise nonlinearity applied after a layer's affine map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    /// sin(omega * z); the frequency also scales the derivative.
    Sine { omega: f64 },
    Relu,
    Identity,
}

impl Activation {
    pub fn sine() -> Self {
        Activation::Sine {
            omega: DEFAULT_OMEGA,
        }
    }

    #[inline]
    fn apply<T: Scalar>(&self, z: T) -> T {
        match self {
            Activation::Sine { omega } => (cast::<T>(*omega) * z).sin(),
            Activation::Relu => {
                if z > T::zero() {
                    z
                } else {
                    T::zero()
                }
            }
            Activation::Identity => z,
        }
    }

    /// d activation / d z evaluated from the pre-activation.
    #[inline]
    fn derivative<T: Scalar>(&self, z: T) -> T {
        match self {
            Activation::Sine { omega } => {
                let w = cast::<T>(*omega);
                w * (w * z).cos()
            }
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }
}

impl core::fmt::Display for Activation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Activation::Sine { omega } => write!(f, "sine{omega}"),
            Activation::Relu => write!(f, "relu"),
            Activation::Identity => write!(f, "id"),
        }
    }
}

impl core::str::FromStr for Activation {
    type Err = NeuralError;

    fn from_str(s: &str) -> Result<Self, NeuralError> {
        if let Some(rest) = s.strip_prefix("sine") {
            let omega: f64 = rest
                .parse()
                .map_err(|_| NeuralError::BadSpec(format!("bad sine frequency {rest:?}")))?;
            return Ok(Activation::Sine { omega });
        }
        match s {
            "relu" => Ok(Activation::Relu),
            "id" => Ok(Activation::Identity),
            other => Err(NeuralError::BadSpec(format!("unknown activation {other:?}"))),
        }
    }
}

/// One layer of a network.
///
/// Conv2d always uses stride 1 and same padding, so spatial dimensions are
/// preserved; the kernel must be odd for the padding to be symmetric.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
        activation: Activation,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        activation: Activation,
    },
    /// Collapses all non-batch axes into one; no parameters.
    Flatten,
}

/// Ordered stack of layers.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Self {
        NetworkSpec { layers }
    }

    /// All-dense stack: `dims = [in, h1, ..., out]`, sine hidden layers and
    /// an identity head.
    pub fn dense_stack(dims: &[usize], hidden: Activation) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| LayerSpec::Dense {
                input: w[0],
                output: w[1],
                activation: if i + 2 == dims.len() {
                    Activation::Identity
                } else {
                    hidden
                },
            })
            .collect();
        NetworkSpec { layers }
    }

    /// Validates the stack against an input shape and returns the output
    /// shape. Checks adjacent layer compatibility along the way.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NeuralError> {
        if self.layers.is_empty() {
            return Err(NeuralError::BadSpec("network has no layers".into()));
        }
        let mut shape = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            shape = match layer {
                LayerSpec::Dense { input, output, .. } => {
                    if shape.len() != 2 || shape[1] != *input {
                        return Err(NeuralError::BadSpec(format!(
                            "layer {i}: dense expects [batch, {input}], got {shape:?}"
                        )));
                    }
                    vec![shape[0], *output]
                }
                LayerSpec::Conv2d {
                    in_channels,
                    kernel,
                    out_channels,
                    ..
                } => {
                    if *kernel == 0 || kernel % 2 == 0 {
                        return Err(NeuralError::BadSpec(format!(
                            "layer {i}: kernel must be odd, got {kernel}"
                        )));
                    }
                    if shape.len() != 4 || shape[1] != *in_channels {
                        return Err(NeuralError::BadSpec(format!(
                            "layer {i}: conv expects [batch, {in_channels}, h, w], got {shape:?}"
                        )));
                    }
                    vec![shape[0], *out_channels, shape[2], shape[3]]
                }
                LayerSpec::Flatten => {
                    if shape.len() < 2 {
                        return Err(NeuralError::BadSpec(format!(
                            "layer {i}: flatten expects a batched tensor, got {shape:?}"
                        )));
                    }
                    vec![shape[0], shape[1..].iter().product()]
                }
            };
        }
        Ok(shape)
    }

    /// (weight shape, bias shape) per layer; empty shapes for Flatten.
    pub fn param_shapes(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        self.layers
            .iter()
            .map(|layer| match layer {
                LayerSpec::Dense { input, output, .. } => {
                    (vec![*input, *output], vec![*output])
                }
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    ..
                } => (
                    vec![*out_channels, *in_channels, *kernel, *kernel],
                    vec![*out_channels],
                ),
                LayerSpec::Flatten => (vec![0], vec![0]),
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|(w, b)| {
                w.iter().product::<usize>() + b.iter().product::<usize>()
            })
            .sum()
    }

    /// Rebuilds structured parameters from one flat value vector, layer by
    /// layer, weight before bias. This is how a hypernetwork's output turns
    /// into a runnable network.
    pub fn unflatten_params<T: Scalar>(&self, flat: &[T]) -> Result<NetParams<T>, NeuralError> {
        if flat.len() != self.param_count() {
            return Err(NeuralError::ShapeMismatch(format!(
                "flat parameter vector has {} values, spec needs {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for (ws, bs) in self.param_shapes() {
            let wn: usize = ws.iter().product();
            let bn: usize = bs.iter().product();
            let weight = Tensor::new(ws, flat[at..at + wn].to_vec())?;
            at += wn;
            let bias = Tensor::new(bs, flat[at..at + bn].to_vec())?;
            at += bn;
            layers.push(LayerParams { weight, bias });
        }
        Ok(NetParams { layers })
    }
}

impl core::fmt::Display for NetworkSpec {
    /// Compact text form, e.g. `dense:2:128:sine30,dense:128:1:id`.
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            match layer {
                LayerSpec::Dense {
                    input,
                    output,
                    activation,
                } => write!(f, "dense:{input}:{output}:{activation}")?,
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    activation,
                } => write!(f, "conv:{in_channels}:{out_channels}:{kernel}:{activation}")?,
                LayerSpec::Flatten => write!(f, "flatten")?,
            }
        }
        Ok(())
    }
}

impl core::str::FromStr for NetworkSpec {
    type Err = NeuralError;

    fn from_str(s: &str) -> Result<Self, NeuralError> {
        let mut layers = Vec::new();
        for part in s.split(',') {
            let fields: Vec<&str> = part.split(':').collect();
            let bad = || NeuralError::BadSpec(format!("bad layer spec {part:?}"));
            match fields[0] {
                "dense" => {
                    if fields.len() != 4 {
                        return Err(bad());
                    }
                    layers.push(LayerSpec::Dense {
                        input: fields[1].parse().map_err(|_| bad())?,
                        output: fields[2].parse().map_err(|_| bad())?,
                        activation: fields[3].parse()?,
                    });
                }
                "conv" => {
                    if fields.len() != 5 {
                        return Err(bad());
                    }
                    layers.push(LayerSpec::Conv2d {
                        in_channels: fields[1].parse().map_err(|_| bad())?,
                        out_channels: fields[2].parse().map_err(|_| bad())?,
                        kernel: fields[3].parse().map_err(|_| bad())?,
                        activation: fields[4].parse()?,
                    });
                }
                "flatten" => layers.push(LayerSpec::Flatten),
                _ => return Err(bad()),
            }
        }
        if layers.is_empty() {
            return Err(NeuralError::BadSpec("empty network spec".into()));
        }
        Ok(NetworkSpec { layers })
    }
}

/// Weight and bias tensors of one layer (both empty for Flatten).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Parameters of a whole network; also reused as the container for
/// parameter gradients, which share the exact same structure.
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams<T> {
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Scalar> NetParams<T> {
    pub fn zeros_like(spec: &NetworkSpec) -> Self {
        let layers = spec
            .param_shapes()
            .into_iter()
            .map(|(w, b)| LayerParams {
                weight: Tensor::zeros(&w),
                bias: Tensor::zeros(&b),
            })
            .collect();
        NetParams { layers }
    }

    /// Flat list of tensors in a fixed order (weight, bias per layer),
    /// matching `flatten_values` and the optimizer's expectations.
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn value_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// All values in one vector, layer by layer, weight before bias.
    pub fn flatten_values(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.value_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(l.bias.data());
        }
        out
    }
}

/// Uniform(-bound, bound) weight initialization with zero biases.
///
/// Sine layers follow the standard scheme for periodic activations: the
/// first layer uses bound 1/fan_in, hidden layers sqrt(6/fan_in)/omega.
/// Relu and identity layers use He-style sqrt(6/fan_in). Deterministic in
/// `seed`.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<NetParams<T>, NeuralError> {
    // Full shape wiring is only checkable against a real input (flatten
    // widths depend on spatial size), so validate structure here and leave
    // the rest to `forward`.
    if spec.layers.is_empty() {
        return Err(NeuralError::BadSpec("network has no layers".into()));
    }
    for (i, layer) in spec.layers.iter().enumerate() {
        if let LayerSpec::Conv2d { kernel, .. } = layer {
            if *kernel == 0 || kernel % 2 == 0 {
                return Err(NeuralError::BadSpec(format!(
                    "layer {i}: kernel must be odd, got {kernel}"
                )));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        let (fan_in, activation) = match layer {
            LayerSpec::Dense {
                input, activation, ..
            } => (*input, Some(activation)),
            LayerSpec::Conv2d {
                in_channels,
                kernel,
                activation,
                ..
            } => (in_channels * kernel * kernel, Some(activation)),
            LayerSpec::Flatten => (0, None),
        };
        let (ws, bs) = match layer {
            LayerSpec::Dense { input, output, .. } => (vec![*input, *output], vec![*output]),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => (
                vec![*out_channels, *in_channels, *kernel, *kernel],
                vec![*out_channels],
            ),
            LayerSpec::Flatten => (vec![0], vec![0]),
        };
        let bound = match activation {
            Some(Activation::Sine { omega }) => {
                if i == 0 {
                    1.0 / fan_in as f64
                } else {
                    (6.0 / fan_in as f64).sqrt() / omega
                }
            }
            Some(_) => (6.0 / fan_in as f64).sqrt(),
            None => 0.0,
        };
        let n: usize = ws.iter().product();
        let data: Vec<T> = (0..n)
            .map(|_| cast::<T>(rng.gen_range(-bound..=bound)))
            .collect();
        layers.push(LayerParams {
            weight: Tensor::new(ws, data)?,
            bias: Tensor::zeros(&bs),
        });
    }
    Ok(NetParams { layers })
}

/// Per-layer record of the forward pass: the layer's input and, for
/// parameterized layers, its pre-activation.
struct Trace<T> {
    input: Tensor<T>,
    pre: Option<Tensor<T>>,
}

/// Recorded forward pass. Consumed by value in `backward`, so a tape can
/// never be replayed against updated parameters.
pub struct Tape<T> {
    traces: Vec<Trace<T>>,
    output_shape: Vec<usize>,
}

/// A spec bundled with its parameters.
#[derive(Clone, Debug)]
pub struct Network<T> {
    pub spec: NetworkSpec,
    pub params: NetParams<T>,
}

impl<T: Scalar> Network<T> {
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self, NeuralError> {
        let params = init_params(&spec, seed)?;
        Ok(Network { spec, params })
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>, NeuralError> {
        forward(&self.spec, &self.params, input)
    }

    pub fn forward_recorded(&self, input: &Tensor<T>) -> Result<(Tensor<T>, Tape<T>), NeuralError> {
        forward_recorded(&self.spec, &self.params, input)
    }

    pub fn backward(
        &self,
        tape: Tape<T>,
        output_grad: &Tensor<T>,
    ) -> Result<(NetParams<T>, Tensor<T>), NeuralError> {
        backward(&self.spec, &self.params, tape, output_grad)
    }
}

/// Evaluates the stack on a batched input.
pub fn forward<T: Scalar>(
    spec: &NetworkSpec,
    params: &NetParams<T>,
    input: &Tensor<T>,
) -> Result<Tensor<T>, NeuralError> {
    run_forward(spec, params, input, false).map(|(out, _)| out)
}

/// Evaluates the stack and records the tape needed for one backward pass.
pub fn forward_recorded<T: Scalar>(
    spec: &NetworkSpec,
    params: &NetParams<T>,
    input: &Tensor<T>,
) -> Result<(Tensor<T>, Tape<T>), NeuralError> {
    let (out, tape) = run_forward(spec, params, input, true)?;
    Ok((out, tape.expect("tape requested")))
}

fn run_forward<T: Scalar>(
    spec: &NetworkSpec,
    params: &NetParams<T>,
    input: &Tensor<T>,
    record: bool,
) -> Result<(Tensor<T>, Option<Tape<T>>), NeuralError> {
    spec.output_shape(input.shape())?;
    if params.layers.len() != spec.layers.len() {
        return Err(NeuralError::ShapeMismatch(format!(
            "params carry {} layers, spec has {}",
            params.layers.len(),
            spec.layers.len()
        )));
    }
    if input.shape()[0] == 0 {
        return Err(NeuralError::ShapeMismatch("empty batch".into()));
    }
    if !input.all_finite() {
        return Err(NeuralError::NonFinite("network input"));
    }
    let mut traces = Vec::new();
    let mut current = input.clone();
    for (layer, lp) in spec.layers.iter().zip(&params.layers) {
        let (out, pre) = match layer {
            LayerSpec::Dense {
                input: n_in,
                output: n_out,
                activation,
            } => {
                let pre = dense_pre(&current, &lp.weight, &lp.bias, *n_in, *n_out)?;
                let mut out = pre.clone();
                for v in out.data_mut() {
                    *v = activation.apply(*v);
                }
                (out, Some(pre))
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                activation,
            } => {
                let pre = conv_pre(
                    &current,
                    &lp.weight,
                    &lp.bias,
                    *in_channels,
                    *out_channels,
                    *kernel,
                )?;
                let mut out = pre.clone();
                for v in out.data_mut() {
                    *v = activation.apply(*v);
                }
                (out, Some(pre))
            }
            LayerSpec::Flatten => {
                let b = current.shape()[0];
                let rest: usize = current.shape()[1..].iter().product();
                let out = current.clone().reshape(vec![b, rest])?;
                (out, None)
            }
        };
        if record {
            traces.push(Trace {
                input: core::mem::replace(&mut current, out),
                pre,
            });
        } else {
            current = out;
        }
    }
    if !current.all_finite() {
        return Err(NeuralError::NonFinite("network output"));
    }
    let tape = record.then(|| Tape {
        traces,
        output_shape: current.shape().to_vec(),
    });
    Ok((current, tape))
}

/// z = x W + b for x [batch, in], W [in, out] row-major.
fn dense_pre<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    n_in: usize,
    n_out: usize,
) -> Result<Tensor<T>, NeuralError> {
    let batch = x.shape()[0];
    let mut z = Tensor::zeros(&[batch, n_out]);
    {
        let xd = x.data();
        let wd = w.data();
        let zd = z.data_mut();
        for i in 0..batch {
            let xr = &xd[i * n_in..(i + 1) * n_in];
            let zr = &mut zd[i * n_out..(i + 1) * n_out];
            zr.copy_from_slice(b.data());
            for (k, xv) in xr.iter().enumerate() {
                let wr = &wd[k * n_out..(k + 1) * n_out];
                for (zv, wv) in zr.iter_mut().zip(wr) {
                    *zv += *xv * *wv;
                }
            }
        }
    }
    Ok(z)
}

/// Stride-1 same-padding convolution: x [b, cin, h, w] -> z [b, cout, h, w].
fn conv_pre<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    cin: usize,
    cout: usize,
    kernel: usize,
) -> Result<Tensor<T>, NeuralError> {
    let [batch, _, h, wd] = x.shape() else {
        return Err(NeuralError::ShapeMismatch("conv input must be 4d".into()));
    };
    let (batch, h, wd) = (*batch, *h, *wd);
    let pad = (kernel - 1) / 2;
    let mut z = Tensor::zeros(&[batch, cout, h, wd]);
    let xd = x.data();
    let kw = w.data();
    let zd = z.data_mut();
    for bi in 0..batch {
        for oc in 0..cout {
            let bias = b.data()[oc];
            for y in 0..h {
                for xcol in 0..wd {
                    let mut acc = bias;
                    for ic in 0..cin {
                        for ky in 0..kernel {
                            let sy = y + ky;
                            if sy < pad || sy - pad >= h {
                                continue;
                            }
                            let iy = sy - pad;
                            for kx in 0..kernel {
                                let sx = xcol + kx;
                                if sx < pad || sx - pad >= wd {
                                    continue;
                                }
                                let ix = sx - pad;
                                let xv = xd[((bi * cin + ic) * h + iy) * wd + ix];
                                let wv = kw[((oc * cin + ic) * kernel + ky) * kernel + kx];
                                acc += xv * wv;
                            }
                        }
                    }
                    zd[((bi * cout + oc) * h + y) * wd + xcol] = acc;
                }
            }
        }
    }
    Ok(z)
}

/// Walks the tape in reverse, returning parameter gradients (same structure
/// as the parameters) and the gradient with respect to the network input.
pub fn backward<T: Scalar>(
    spec: &NetworkSpec,
    params: &NetParams<T>,
    tape: Tape<T>,
    output_grad: &Tensor<T>,
) -> Result<(NetParams<T>, Tensor<T>), NeuralError> {
    if output_grad.shape() != tape.output_shape.as_slice() {
        return Err(NeuralError::ShapeMismatch(format!(
            "output grad {:?} vs recorded output {:?}",
            output_grad.shape(),
            tape.output_shape
        )));
    }
    let mut grads = NetParams::zeros_like(spec);
    let mut g = output_grad.clone();
    for ((layer, lp), (gl, trace)) in spec
        .layers
        .iter()
        .zip(&params.layers)
        .zip(grads.layers.iter_mut().zip(tape.traces))
        .rev()
    {
        g = match layer {
            LayerSpec::Dense {
                input: n_in,
                output: n_out,
                activation,
            } => {
                let pre = trace.pre.expect("dense layer recorded pre-activation");
                let batch = pre.shape()[0];
                // dz = g * act'(z)
                let mut dz = g;
                for (dzv, zv) in dz.data_mut().iter_mut().zip(pre.data()) {
                    *dzv = *dzv * activation.derivative(*zv);
                }
                let xd = trace.input.data();
                let dzd = dz.data();
                // dW[k, o] += x[i, k] dz[i, o]; db[o] += dz[i, o]
                {
                    let dw = gl.weight.data_mut();
                    for i in 0..batch {
                        let xr = &xd[i * n_in..(i + 1) * n_in];
                        let dzr = &dzd[i * n_out..(i + 1) * n_out];
                        for (k, xv) in xr.iter().enumerate() {
                            let dwr = &mut dw[k * n_out..(k + 1) * n_out];
                            for (dwv, dzv) in dwr.iter_mut().zip(dzr) {
                                *dwv += *xv * *dzv;
                            }
                        }
                    }
                    let db = gl.bias.data_mut();
                    for i in 0..batch {
                        let dzr = &dzd[i * n_out..(i + 1) * n_out];
                        for (dbv, dzv) in db.iter_mut().zip(dzr) {
                            *dbv += *dzv;
                        }
                    }
                }
                // dx[i, k] = sum_o dz[i, o] W[k, o]
                let mut dx = Tensor::zeros(&[batch, *n_in]);
                {
                    let wd = lp.weight.data();
                    let dxd = dx.data_mut();
                    for i in 0..batch {
                        let dzr = &dzd[i * n_out..(i + 1) * n_out];
                        for k in 0..*n_in {
                            let wr = &wd[k * n_out..(k + 1) * n_out];
                            let mut s = T::zero();
                            for (dzv, wv) in dzr.iter().zip(wr) {
                                s += *dzv * *wv;
                            }
                            dxd[i * n_in + k] = s;
                        }
                    }
                }
                dx
            }
            LayerSpec::Conv2d {
                in_channels: cin,
                out_channels: cout,
                kernel,
                activation,
            } => {
                let pre = trace.pre.expect("conv layer recorded pre-activation");
                let [batch, _, h, wdt] = trace.input.shape() else {
                    unreachable!("conv trace input is 4d");
                };
                let (batch, h, wdt) = (*batch, *h, *wdt);
                let pad = (kernel - 1) / 2;
                let mut dz = g;
                for (dzv, zv) in dz.data_mut().iter_mut().zip(pre.data()) {
                    *dzv = *dzv * activation.derivative(*zv);
                }
                let dzd = dz.data();
                let xd = trace.input.data();
                {
                    let dw = gl.weight.data_mut();
                    let db = gl.bias.data_mut();
                    for bi in 0..batch {
                        for oc in 0..*cout {
                            for y in 0..h {
                                for xcol in 0..wdt {
                                    let dzv = dzd[((bi * cout + oc) * h + y) * wdt + xcol];
                                    if dzv == T::zero() {
                                        continue;
                                    }
                                    db[oc] += dzv;
                                    for ic in 0..*cin {
                                        for ky in 0..*kernel {
                                            let sy = y + ky;
                                            if sy < pad || sy - pad >= h {
                                                continue;
                                            }
                                            let iy = sy - pad;
                                            for kx in 0..*kernel {
                                                let sx = xcol + kx;
                                                if sx < pad || sx - pad >= wdt {
                                                    continue;
                                                }
                                                let ix = sx - pad;
                                                let xv =
                                                    xd[((bi * cin + ic) * h + iy) * wdt + ix];
                                                dw[((oc * cin + ic) * kernel + ky) * kernel
                                                    + kx] += dzv * xv;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                let mut dx = Tensor::zeros(&[batch, *cin, h, wdt]);
                {
                    let kw = lp.weight.data();
                    let dxd = dx.data_mut();
                    for bi in 0..batch {
                        for oc in 0..*cout {
                            for y in 0..h {
                                for xcol in 0..wdt {
                                    let dzv = dzd[((bi * cout + oc) * h + y) * wdt + xcol];
                                    if dzv == T::zero() {
                                        continue;
                                    }
                                    for ic in 0..*cin {
                                        for ky in 0..*kernel {
                                            let sy = y + ky;
                                            if sy < pad || sy - pad >= h {
                                                continue;
                                            }
                                            let iy = sy - pad;
                                            for kx in 0..*kernel {
                                                let sx = xcol + kx;
                                                if sx < pad || sx - pad >= wdt {
                                                    continue;
                                                }
                                                let ix = sx - pad;
                                                let wv = kw[((oc * cin + ic) * kernel + ky)
                                                    * kernel
                                                    + kx];
                                                dxd[((bi * cin + ic) * h + iy) * wdt + ix] +=
                                                    dzv * wv;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                dx
            }
            LayerSpec::Flatten => g.reshape(trace.input.shape().to_vec())?,
        };
    }
    if !g.all_finite() {
        return Err(NeuralError::NonFinite("input gradient"));
    }
    Ok((grads, g))
}

/// Standard deviation of a tensor's values, for init sanity checks.
#[cfg(test)]
pub(crate) fn std_dev<T: Scalar>(t: &Tensor<T>) -> f64 {
    let n = t.len() as f64;
    let mean: f64 = t.data().iter().map(|v| to_f64(*v)).sum::<f64>() / n;
    let var: f64 = t
        .data()
        .iter()
        .map(|v| (to_f64(*v) - mean).powi(2))
        .sum::<f64>()
        / n;
    var.sqrt()
}
