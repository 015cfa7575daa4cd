//! Field model files: a small text header over the tensor blob.

use super::{
    FieldError, FieldMeta, FieldModel, FieldTargetTransform, FieldVariant, OracleKind,
    TransformMode,
};
use crate::neural::{read_tensors, write_tensors, LayerParams, NetParams, Network, NetworkSpec};
use crate::scalar::Scalar;
#[cfg(test)]
use crate::scalar::to_f64;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"EFMD";
const VERSION: u32 = 1;

fn header_text<T: Scalar>(model: &FieldModel<T>) -> String {
    let mut h = String::new();
    h.push_str(&format!("variant {}\n", model.variant));
    h.push_str(&format!("coord_dim {}\n", model.meta.coord_dim));
    h.push_str(&format!("grid_height {}\n", model.meta.grid_height));
    h.push_str(&format!("grid_width {}\n", model.meta.grid_width));
    h.push_str(&format!("oracle {}\n", model.meta.oracle));
    h.push_str(&format!(
        "obstacle_value {}\n",
        model.transform.obstacle_value
    ));
    h.push_str(&format!("net_spec {}\n", model.net.spec));
    if let Some(enc) = &model.encoder {
        h.push_str(&format!("encoder_spec {}\n", enc.spec));
    }
    if let Some(hypo) = &model.hypo_spec {
        h.push_str(&format!("hypo_spec {hypo}\n"));
    }
    if let Some(goal) = &model.meta.fixed_goal {
        let joined: Vec<String> = goal.iter().map(|v| v.to_string()).collect();
        h.push_str(&format!("fixed_goal {}\n", joined.join(",")));
    }
    h
}

/// Writes magic, version, the key-value header and every parameter tensor
/// (field/hyper net first, then the encoder when present).
pub fn save_model<T: Scalar>(path: &Path, model: &FieldModel<T>) -> Result<(), FieldError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let header = header_text(model);
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    let mut tensors = model.net.params.tensors();
    if let Some(enc) = &model.encoder {
        tensors.extend(enc.params.tensors());
    }
    write_tensors(&mut w, &tensors)?;
    w.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> FieldError {
    FieldError::BadModelFile(msg.into())
}

/// Splits a tensor list into parameters for one spec, checking shapes.
fn take_params<T: Scalar>(
    spec: &NetworkSpec,
    tensors: &mut std::vec::IntoIter<crate::neural::Tensor<T>>,
) -> Result<NetParams<T>, FieldError> {
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

pub fn load_model<T: Scalar>(path: &Path) -> Result<FieldModel<T>, FieldError> {
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

    let mut variant = None;
    let mut coord_dim = None;
    let mut grid_height = None;
    let mut grid_width = None;
    let mut oracle = None;
    let mut obstacle_value = None;
    let mut net_spec: Option<NetworkSpec> = None;
    let mut encoder_spec: Option<NetworkSpec> = None;
    let mut hypo_spec: Option<NetworkSpec> = None;
    let mut fixed_goal: Option<Vec<f64>> = None;
    for line in header.lines() {
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| bad(format!("header line {line:?} has no value")))?;
        match key {
            "variant" => variant = Some(value.parse::<FieldVariant>()?),
            "coord_dim" => {
                coord_dim = Some(value.parse::<usize>().map_err(|_| bad("bad coord_dim"))?)
            }
            "grid_height" => {
                grid_height = Some(value.parse::<usize>().map_err(|_| bad("bad grid_height"))?)
            }
            "grid_width" => {
                grid_width = Some(value.parse::<usize>().map_err(|_| bad("bad grid_width"))?)
            }
            "oracle" => oracle = Some(value.parse::<OracleKind>()?),
            "obstacle_value" => {
                obstacle_value =
                    Some(value.parse::<f64>().map_err(|_| bad("bad obstacle_value"))?)
            }
            "net_spec" => net_spec = Some(value.parse().map_err(|_| bad("bad net_spec"))?),
            "encoder_spec" => {
                encoder_spec = Some(value.parse().map_err(|_| bad("bad encoder_spec"))?)
            }
            "hypo_spec" => hypo_spec = Some(value.parse().map_err(|_| bad("bad hypo_spec"))?),
            "fixed_goal" => {
                let mut vals = Vec::new();
                for part in value.split(',') {
                    vals.push(part.parse::<f64>().map_err(|_| bad("bad fixed_goal"))?);
                }
                fixed_goal = Some(vals);
            }
            other => return Err(bad(format!("unknown header key {other:?}"))),
        }
    }
    let variant = variant.ok_or_else(|| bad("missing variant"))?;
    let net_spec = net_spec.ok_or_else(|| bad("missing net_spec"))?;
    if variant == FieldVariant::ContextAligned && encoder_spec.is_none() {
        return Err(bad("context model without encoder_spec"));
    }
    if variant == FieldVariant::Hyper && hypo_spec.is_none() {
        return Err(bad("hyper model without hypo_spec"));
    }

    let mut tensors = read_tensors::<T, _>(&mut r)?.into_iter();
    let net_params = take_params(&net_spec, &mut tensors)?;
    let encoder = match encoder_spec {
        Some(spec) => {
            let params = take_params(&spec, &mut tensors)?;
            Some(Network { spec, params })
        }
        None => None,
    };
    if tensors.next().is_some() {
        return Err(bad("trailing tensors after parameters"));
    }

    Ok(FieldModel {
        variant,
        net: Network {
            spec: net_spec,
            params: net_params,
        },
        encoder,
        hypo_spec,
        transform: FieldTargetTransform {
            mode: TransformMode::ReciprocalNormalized,
            obstacle_value: obstacle_value.ok_or_else(|| bad("missing obstacle_value"))?,
        },
        meta: FieldMeta {
            coord_dim: coord_dim.ok_or_else(|| bad("missing coord_dim"))?,
            grid_height: grid_height.ok_or_else(|| bad("missing grid_height"))?,
            grid_width: grid_width.ok_or_else(|| bad("missing grid_width"))?,
            oracle: oracle.ok_or_else(|| bad("missing oracle"))?,
            fixed_goal,
        },
    })
}

/// Exact equality of everything a model file carries, for tests.
#[cfg(test)]
pub(crate) fn models_identical<T: Scalar>(a: &FieldModel<T>, b: &FieldModel<T>) -> bool {
    let tensors_equal = |x: &NetParams<T>, y: &NetParams<T>| {
        x.flatten_values()
            .iter()
            .zip(y.flatten_values())
            .all(|(p, q)| to_f64(*p).to_bits() == to_f64(q).to_bits())
    };
    a.variant == b.variant
        && a.meta == b.meta
        && a.transform == b.transform
        && a.net.spec == b.net.spec
        && tensors_equal(&a.net.params, &b.net.params)
        && a.hypo_spec == b.hypo_spec
        && match (&a.encoder, &b.encoder) {
            (None, None) => true,
            (Some(x), Some(y)) => x.spec == y.spec && tensors_equal(&x.params, &y.params),
            _ => false,
        }
}
