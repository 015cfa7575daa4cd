//! Learned reaching-distance fields.
//!
//! A field model maps a query position (plus, depending on the variant, a
//! goal and an environment) to a transformed reaching distance. Four
//! variants exist:
//!
//! * [`FieldVariant::Fixed`]: one environment, one goal, input is the query
//!   coordinates alone.
//! * [`FieldVariant::GoalConditioned`]: one environment, any goal; input is
//!   query and goal coordinates concatenated.
//! * [`FieldVariant::ContextAligned`]: any environment; a convolutional
//!   encoder turns the obstacle map into a feature grid, and the feature
//!   vector bilinearly sampled at the query position is appended to the
//!   query and goal coordinates.
//! * [`FieldVariant::Hyper`]: any environment; a hypernetwork reads the
//!   obstacle map and emits the weights of a small dense hyponetwork, which
//!   is then evaluated on query and goal coordinates.
//!
//! Models predict the transform t(d) = 1/(1+d) of the true distance d, with
//! obstacle (and unreachable) positions labeled exactly -1. Since t is
//! strictly decreasing, maximizing the prediction is the same as minimizing
//! distance, which is how the planners consume these models.

mod checkpoint;
mod dataset;
mod infer;
mod train;

pub use checkpoint::{load_model, save_model};
pub use dataset::{build_dataset, build_goal_dataset, TrainSample, TrainSet};
pub use infer::{
    align_feature, bilinear_coeffs, encode_context, hypernet_forward, query, query_gradient,
    PreparedField,
};
pub use train::{dataset_loss, train_field, TrainReport};

use crate::fmm::FmmError;
use crate::grid2d::GridError;
use crate::neural::{Network, NetworkSpec, NeuralError};
use crate::scalar::{cast, Scalar};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("model file invalid: {0}")]
    BadModelFile(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solver(#[from] FmmError),
    #[error("model io failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Which exact solver labels the training data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    Fmm,
    Dijkstra,
}

impl core::fmt::Display for OracleKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OracleKind::Fmm => write!(f, "fmm"),
            OracleKind::Dijkstra => write!(f, "dijkstra"),
        }
    }
}

impl core::str::FromStr for OracleKind {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, FieldError> {
        match s {
            "fmm" => Ok(OracleKind::Fmm),
            "dijkstra" => Ok(OracleKind::Dijkstra),
            other => Err(FieldError::BadInput(format!("unknown oracle {other:?}"))),
        }
    }
}

/// The four model flavours; see the module docs for what each one reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldVariant {
    Fixed,
    GoalConditioned,
    ContextAligned,
    Hyper,
}

impl FieldVariant {
    /// True when queries must carry the occupancy grid.
    pub fn needs_grid(&self) -> bool {
        matches!(self, FieldVariant::ContextAligned | FieldVariant::Hyper)
    }
}

impl core::fmt::Display for FieldVariant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            FieldVariant::Fixed => "fixed",
            FieldVariant::GoalConditioned => "goal",
            FieldVariant::ContextAligned => "context",
            FieldVariant::Hyper => "hyper",
        };
        write!(f, "{s}")
    }
}

impl core::str::FromStr for FieldVariant {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, FieldError> {
        match s {
            "fixed" => Ok(FieldVariant::Fixed),
            "goal" => Ok(FieldVariant::GoalConditioned),
            "context" => Ok(FieldVariant::ContextAligned),
            "hyper" => Ok(FieldVariant::Hyper),
            other => Err(FieldError::BadInput(format!("unknown variant {other:?}"))),
        }
    }
}

/// How raw distances become regression targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformMode {
    /// t(d) = 1/(1+d): bounded to (0, 1], 1 exactly at the goal, strictly
    /// decreasing, no per-environment normalization constant needed.
    ReciprocalNormalized,
}

/// Distance-to-target transform plus the label used for obstacle cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldTargetTransform {
    pub mode: TransformMode,
    pub obstacle_value: f64,
}

impl Default for FieldTargetTransform {
    fn default() -> Self {
        FieldTargetTransform {
            mode: TransformMode::ReciprocalNormalized,
            obstacle_value: -1.0,
        }
    }
}

impl FieldTargetTransform {
    pub fn apply<T: Scalar>(&self, distance: T) -> T {
        match self.mode {
            TransformMode::ReciprocalNormalized => T::one() / (T::one() + distance),
        }
    }

    /// Recovers a distance from a transformed value; nonpositive values
    /// (obstacle labels and worse) map to infinity.
    pub fn invert<T: Scalar>(&self, value: T) -> T {
        if value <= T::zero() {
            return T::infinity();
        }
        match self.mode {
            TransformMode::ReciprocalNormalized => T::one() / value - T::one(),
        }
    }

    pub fn obstacle<T: Scalar>(&self) -> T {
        cast::<T>(self.obstacle_value)
    }
}

/// Everything about a model that is not a tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldMeta {
    /// Coordinate dimension of a query point (2 for grids, 3 for scenes).
    pub coord_dim: usize,
    /// Grid dimensions the model was trained on (0 when not grid-trained).
    pub grid_height: usize,
    pub grid_width: usize,
    pub oracle: OracleKind,
    /// The goal baked into a Fixed-variant model.
    pub fixed_goal: Option<Vec<f64>>,
}

/// A trained (or freshly initialized) field model.
///
/// `net` is the field network for Fixed/GoalConditioned/ContextAligned and
/// the hypernetwork for Hyper. ContextAligned additionally carries the
/// environment encoder; Hyper carries the hyponetwork's layer spec, whose
/// parameters exist only transiently as hypernetwork output.
#[derive(Clone, Debug)]
pub struct FieldModel<T> {
    pub variant: FieldVariant,
    pub net: Network<T>,
    pub encoder: Option<Network<T>>,
    pub hypo_spec: Option<NetworkSpec>,
    pub transform: FieldTargetTransform,
    pub meta: FieldMeta,
}

impl<T: Scalar> FieldModel<T> {
    /// Fresh model with seeded initialization and no training.
    ///
    /// `grid_height`/`grid_width` record the training environment size;
    /// the Hyper variant needs them up front because its dense layers are
    /// sized by the flattened obstacle map. Fixed models carry their goal
    /// in `fixed_goal`.
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        variant: FieldVariant,
        config: &FieldConfig,
        coord_dim: usize,
        grid_height: usize,
        grid_width: usize,
        oracle: OracleKind,
        fixed_goal: Option<Vec<f64>>,
        seed: u64,
    ) -> Result<Self, FieldError> {
        if coord_dim != 2 && coord_dim != 3 {
            return Err(FieldError::BadInput(format!(
                "coordinate dimension must be 2 or 3, got {coord_dim}"
            )));
        }
        if variant.needs_grid() && coord_dim != 2 {
            return Err(FieldError::BadInput(format!(
                "variant {variant} reads occupancy grids and is 2d only"
            )));
        }
        let mut encoder = None;
        let mut hypo_spec = None;
        let net_spec = match variant {
            FieldVariant::Fixed => config
                .net_spec
                .clone()
                .unwrap_or_else(|| default_field_spec(coord_dim)),
            FieldVariant::GoalConditioned => config
                .net_spec
                .clone()
                .unwrap_or_else(|| default_field_spec(2 * coord_dim)),
            FieldVariant::ContextAligned => {
                let enc_spec = config
                    .encoder_spec
                    .clone()
                    .unwrap_or_else(default_encoder_spec);
                let channels = encoder_channels(&enc_spec);
                if channels == 0 {
                    return Err(FieldError::BadInput(
                        "encoder spec has no convolutional output".into(),
                    ));
                }
                enc_spec.output_shape(&[1, 1, grid_height.max(1), grid_width.max(1)])?;
                encoder = Some(Network::init(enc_spec, seed ^ 0x9e37_79b9_7f4a_7c15)?);
                config
                    .net_spec
                    .clone()
                    .unwrap_or_else(|| default_field_spec(2 * coord_dim + channels))
            }
            FieldVariant::Hyper => {
                if grid_height == 0 || grid_width == 0 {
                    return Err(FieldError::BadInput(
                        "hyper variant needs the grid dimensions up front".into(),
                    ));
                }
                let hypo = config
                    .hypo_spec
                    .clone()
                    .unwrap_or_else(|| default_hypo_spec(coord_dim));
                hypo.output_shape(&[1, 2 * coord_dim])?;
                let count = hypo.param_count();
                let hyper = config
                    .net_spec
                    .clone()
                    .unwrap_or_else(|| default_hyper_spec(grid_height, grid_width, count));
                let out = hyper.output_shape(&[1, 1, grid_height, grid_width])?;
                if out != vec![1, count] {
                    return Err(FieldError::BadInput(format!(
                        "hypernetwork emits {out:?}, hyponetwork needs [1, {count}]"
                    )));
                }
                hypo_spec = Some(hypo);
                hyper
            }
        };
        let model = FieldModel {
            variant,
            net: Network::init(net_spec, seed)?,
            encoder,
            hypo_spec,
            transform: FieldTargetTransform::default(),
            meta: FieldMeta {
                coord_dim,
                grid_height,
                grid_width,
                oracle,
                fixed_goal,
            },
        };
        // Probe the field net's input width now rather than at first query.
        if !matches!(model.variant, FieldVariant::Hyper) {
            model.net.spec.output_shape(&[1, model.net_input_dim()])?;
        }
        Ok(model)
    }

    /// Width of the vector fed to the field net (or hyponet) per point.
    pub fn net_input_dim(&self) -> usize {
        let d = self.meta.coord_dim;
        match self.variant {
            FieldVariant::Fixed => d,
            FieldVariant::GoalConditioned | FieldVariant::Hyper => 2 * d,
            FieldVariant::ContextAligned => {
                2 * d
                    + self
                        .encoder
                        .as_ref()
                        .map(|e| encoder_channels(&e.spec))
                        .unwrap_or(0)
            }
        }
    }
}

/// Output channel count of an encoder's last conv layer.
pub(crate) fn encoder_channels(spec: &NetworkSpec) -> usize {
    spec.layers
        .iter()
        .rev()
        .find_map(|l| match l {
            crate::neural::LayerSpec::Conv2d { out_channels, .. } => Some(*out_channels),
            _ => None,
        })
        .unwrap_or(0)
}

/// Knobs for [`train_field`]; `None` specs fall back to the defaults below.
#[derive(Clone, Debug)]
pub struct FieldConfig {
    pub net_spec: Option<NetworkSpec>,
    pub encoder_spec: Option<NetworkSpec>,
    pub hypo_spec: Option<NetworkSpec>,
    pub learning_rate: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            net_spec: None,
            encoder_spec: None,
            hypo_spec: None,
            learning_rate: 5e-5,
        }
    }
}

use crate::neural::{Activation, LayerSpec};

/// Default field net: five dense layers, 128 wide, periodic activations,
/// linear head.
pub fn default_field_spec(input_dim: usize) -> NetworkSpec {
    NetworkSpec::dense_stack(&[input_dim, 128, 128, 128, 128, 1], Activation::sine())
}

/// Default environment encoder: six 3x3 conv layers, 32 channels, relu.
/// Receptive field is 13 cells, enough context for desk-scale grids.
pub fn default_encoder_spec() -> NetworkSpec {
    let mut layers = vec![LayerSpec::Conv2d {
        in_channels: 1,
        out_channels: 32,
        kernel: 3,
        activation: Activation::Relu,
    }];
    for _ in 0..5 {
        layers.push(LayerSpec::Conv2d {
            in_channels: 32,
            out_channels: 32,
            kernel: 3,
            activation: Activation::Relu,
        });
    }
    NetworkSpec::new(layers)
}

/// Default hyponetwork: three dense layers, 64 wide, periodic activations.
pub fn default_hypo_spec(coord_dim: usize) -> NetworkSpec {
    NetworkSpec::dense_stack(&[2 * coord_dim, 64, 64, 1], Activation::sine())
}

/// Default hypernetwork for a given grid size: four conv layers, then three
/// dense layers whose head emits every hyponetwork parameter.
pub fn default_hyper_spec(height: usize, width: usize, hypo_params: usize) -> NetworkSpec {
    let mut layers = vec![LayerSpec::Conv2d {
        in_channels: 1,
        out_channels: 16,
        kernel: 3,
        activation: Activation::Relu,
    }];
    for _ in 0..2 {
        layers.push(LayerSpec::Conv2d {
            in_channels: 16,
            out_channels: 16,
            kernel: 3,
            activation: Activation::Relu,
        });
    }
    layers.push(LayerSpec::Conv2d {
        in_channels: 16,
        out_channels: 8,
        kernel: 3,
        activation: Activation::Relu,
    });
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::Dense {
        input: 8 * height * width,
        output: 256,
        activation: Activation::Relu,
    });
    layers.push(LayerSpec::Dense {
        input: 256,
        output: 256,
        activation: Activation::Relu,
    });
    layers.push(LayerSpec::Dense {
        input: 256,
        output: hypo_params,
        activation: Activation::Identity,
    });
    NetworkSpec::new(layers)
}

/// Full-depth alternative: eleven conv layers feeding seven dense layers,
/// emitting a seven-layer hyponetwork. Much heavier than the defaults;
/// selectable through [`FieldConfig`] when fidelity matters more than time.
pub fn deep_hyper_specs(height: usize, width: usize, coord_dim: usize) -> (NetworkSpec, NetworkSpec) {
    let hypo = NetworkSpec::dense_stack(
        &[2 * coord_dim, 64, 64, 64, 64, 64, 64, 1],
        Activation::sine(),
    );
    let mut layers = vec![LayerSpec::Conv2d {
        in_channels: 1,
        out_channels: 16,
        kernel: 3,
        activation: Activation::Relu,
    }];
    for _ in 0..9 {
        layers.push(LayerSpec::Conv2d {
            in_channels: 16,
            out_channels: 16,
            kernel: 3,
            activation: Activation::Relu,
        });
    }
    layers.push(LayerSpec::Conv2d {
        in_channels: 16,
        out_channels: 8,
        kernel: 3,
        activation: Activation::Relu,
    });
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::Dense {
        input: 8 * height * width,
        output: 512,
        activation: Activation::Relu,
    });
    for _ in 0..5 {
        layers.push(LayerSpec::Dense {
            input: 512,
            output: 512,
            activation: Activation::Relu,
        });
    }
    layers.push(LayerSpec::Dense {
        input: 512,
        output: hypo.param_count(),
        activation: Activation::Identity,
    });
    (NetworkSpec::new(layers), hypo)
}
