use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::network::{AgentConfig, AgentParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub episode: usize,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub config: AgentConfig,
    /// `(layer, input, output)` of each dense layer.
    pub layers: Vec<(String, usize, usize)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    layer_spec: LayerSpec,
    tensors: BTreeMap<String, Value>,
    freeze_mask: BTreeMap<String, bool>,
    training_meta: TrainingMeta,
}

fn nest(values: &[f64], shape: &[usize]) -> Value {
    match shape {
        [] => Value::from(values[0]),
        [_] => Value::from(values.to_vec()),
        [_, cols] => Value::Array(values.chunks(*cols).map(|r| Value::from(r.to_vec())).collect()),
        _ => unreachable!("tensors are at most two-dimensional"),
    }
}

/// Flattens a nested array, returning values and shape.
fn flatten(v: &Value) -> Option<(Vec<f64>, Vec<usize>)> {
    match v {
        Value::Number(n) => Some((vec![n.as_f64()?], vec![])),
        Value::Array(items) => {
            if items.iter().all(Value::is_number) {
                let vals: Option<Vec<f64>> = items.iter().map(Value::as_f64).collect();
                return Some((vals?, vec![items.len()]));
            }
            let mut out = Vec::new();
            let mut cols = None;
            for row in items {
                let r = row.as_array()?;
                if *cols.get_or_insert(r.len()) != r.len() {
                    return None;
                }
                for x in r {
                    out.push(x.as_f64()?);
                }
            }
            Some((out, vec![items.len(), cols.unwrap_or(0)]))
        }
        _ => None,
    }
}

fn shape_str(s: &[usize]) -> String {
    if s.is_empty() {
        "scalar".into()
    } else {
        s.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
    }
}

pub fn checkpoint_to_string(params: &AgentParams, meta: TrainingMeta) -> Result<String> {
    let shapes: BTreeMap<String, Vec<usize>> = params.tensor_shapes().into_iter().collect();
    let tensors = params
        .tensors()
        .into_iter()
        .map(|(_, name, vals)| {
            let v = nest(vals, &shapes[&name]);
            (name, v)
        })
        .collect();
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        layer_spec: LayerSpec {
            config: params.config.clone(),
            layers: params.config.layer_shapes(),
        },
        tensors,
        freeze_mask: params.freeze_mask.clone(),
        training_meta: meta,
    };
    serde_json::to_string(&file).map_err(|e| Error::Parse(e.to_string()))
}

pub fn save_checkpoint(params: &AgentParams, meta: TrainingMeta, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_to_string(params, meta)?).map_err(|e| Error::io(path, e))
}

/// Rebuilds parameters from checkpoint text. With `expected`, every tensor is
/// checked against that configuration and the first disagreeing layer is named.
pub fn checkpoint_from_str(text: &str, expected: Option<&AgentConfig>) -> Result<(AgentParams, TrainingMeta)> {
    let head: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("checkpoint: {e}")))?;
    let version = head
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Parse("checkpoint has no format_version".into()))?;
    if version != u64::from(CHECKPOINT_VERSION) {
        return Err(Error::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: CHECKPOINT_VERSION,
        });
    }
    let file: CheckpointFile = serde_json::from_value(head).map_err(|e| Error::Parse(format!("checkpoint: {e}")))?;
    let config = expected.cloned().unwrap_or_else(|| file.layer_spec.config.clone());
    let mut params = AgentParams::zeros(config)?;
    let shapes: BTreeMap<String, Vec<usize>> = params.tensor_shapes().into_iter().collect();

    for (layer, name, dst) in params.tensors_mut() {
        let want = &shapes[&name];
        let Some(raw) = file.tensors.get(&name) else {
            return Err(Error::ShapeMismatch {
                layer,
                expected: shape_str(want),
                found: "missing".into(),
            });
        };
        let (vals, got) =
            flatten(raw).ok_or_else(|| Error::Parse(format!("tensor `{name}` is not a numeric array")))?;
        if &got != want {
            return Err(Error::ShapeMismatch {
                layer,
                expected: shape_str(want),
                found: shape_str(&got),
            });
        }
        dst.copy_from_slice(&vals);
    }
    let known: Vec<String> = shapes.keys().cloned().collect();
    if let Some(extra) = file.tensors.keys().find(|k| !known.contains(k)) {
        let layer = extra.trim_end_matches(".weight").trim_end_matches(".bias").to_string();
        return Err(Error::ShapeMismatch {
            layer,
            expected: "absent".into(),
            found: "present".into(),
        });
    }
    for (name, frozen) in &file.freeze_mask {
        if let Some(slot) = params.freeze_mask.get_mut(name) {
            *slot = *frozen;
        }
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("checkpoint tensors".into()));
    }
    Ok((params, file.training_meta))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(AgentParams, TrainingMeta)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text, None)
}

/// Loads into a known layer configuration, failing with the offending layer on mismatch.
pub fn load_checkpoint_into(path: impl AsRef<Path>, expected: &AgentConfig) -> Result<(AgentParams, TrainingMeta)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text, Some(expected))
}
