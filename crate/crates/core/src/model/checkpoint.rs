//! Checkpoint layout: one line of JSON header, then every parameter as
//! little-endian `f64` in `Model::params()` order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Backbone, Classifier, Dense, Model};
use crate::error::{bail, Result};
use crate::numkit::{Matrix, ParamSet};

const FORMAT: &str = "fscil-ckpt v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ParamShape {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    input_dim: usize,
    widths: Vec<usize>,
    class_ids: Vec<String>,
    params: Vec<ParamShape>,
    seed: u64,
    hyper: serde_json::Value,
}

/// A model plus the provenance stored alongside it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub seed: u64,
    pub hyper: serde_json::Value,
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let params = ckpt.model.params();
    let header = Header {
        format: FORMAT.to_string(),
        input_dim: ckpt.model.backbone.input_dim(),
        widths: ckpt.model.backbone.widths(),
        class_ids: ckpt.model.classifier.class_ids().to_vec(),
        params: params
            .iter()
            .map(|(n, m)| ParamShape {
                name: n.to_string(),
                rows: m.rows(),
                cols: m.cols(),
            })
            .collect(),
        seed: ckpt.seed,
        hyper: ckpt.hyper.clone(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    for v in params.flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let Some(split) = bytes.iter().position(|&b| b == b'\n') else {
        bail!(Format, "checkpoint has no header line");
    };
    let header: Header = serde_json::from_slice(&bytes[..split])?;
    if header.format != FORMAT {
        bail!(Format, "unsupported checkpoint format {:?}", header.format);
    }
    let body = &bytes[split + 1..];
    if body.len() % 8 != 0 {
        bail!(Format, "parameter block is not a whole number of f64 values");
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut params = ParamSet::new();
    for shape in &header.params {
        let data: Vec<f64> = values.by_ref().take(shape.rows * shape.cols).collect();
        if data.len() != shape.rows * shape.cols {
            bail!(Format, "checkpoint truncated in {}", shape.name);
        }
        params.insert(shape.name.clone(), Matrix::from_vec(shape.rows, shape.cols, data)?)?;
    }
    if values.next().is_some() {
        bail!(Format, "trailing data after parameters");
    }

    // Rebuild the architecture, then load values by name.
    let mut layers = Vec::new();
    let mut fan_in = header.input_dim;
    for &w in &header.widths {
        layers.push(Dense {
            weight: Matrix::zeros(w, fan_in),
            bias: vec![0.0; w],
        });
        fan_in = w;
    }
    let backbone = Backbone::from_layers(header.input_dim, layers)?;
    let rows = header.class_ids.len();
    let classifier = Classifier::new(header.class_ids, Matrix::zeros(rows, fan_in))?;
    let mut model = Model::new(backbone, classifier)?;
    model.set_params(&params)?;
    Ok(Checkpoint {
        model,
        seed: header.seed,
        hyper: header.hyper,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, encode_checkpoint(ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}
