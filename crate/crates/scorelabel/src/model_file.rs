//! Generator file: one JSON header line, then the parameters as little-endian f64.
//!
//! Parameters are stored layer by layer, each layer's `out x in` row-major weights
//! followed by its biases.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use scorelabel_core::{Activation, MlpModel};

use crate::error::{Error, Result};

const FORMAT: &str = "scorelabel-mlp";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    layer_dims: Vec<usize>,
    activation: Activation,
    seed: u64,
    num_params: usize,
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        layer_dims: model.layer_dims().to_vec(),
        activation: model.activation(),
        seed: model.seed(),
        num_params: model.num_params(),
    };
    let file = File::create(path).map_err(|e| Error::write(path, e))?;
    let mut w = BufWriter::new(file);
    let line = serde_json::to_string(&header).map_err(|e| Error::write(path, e.into()))?;
    let body = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        for p in model.params() {
            w.write_all(&p.to_le_bytes())?;
        }
        w.flush()
    };
    body(&mut w).map_err(|e| Error::write(path, e))
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let file = File::open(path).map_err(|e| Error::read(path, e))?;
    let mut r = BufReader::new(file);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line).map_err(|e| Error::read(path, e))?;
    if line.last() != Some(&b'\n') {
        return Err(Error::format(path, "missing model header"));
    }
    let header: Header =
        serde_json::from_slice(&line).map_err(|e| Error::format(path, format!("bad model header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::format(path, format!("unsupported model format {} v{}", header.format, header.version)));
    }
    let mut blob = Vec::new();
    r.read_to_end(&mut blob).map_err(|e| Error::read(path, e))?;
    if blob.len() != header.num_params * 8 {
        return Err(Error::format(
            path,
            format!("expected {} parameter bytes, found {}", header.num_params * 8, blob.len()),
        ));
    }
    let params = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    MlpModel::from_parts(&header.layer_dims, header.activation, header.seed, params)
        .map_err(|e| Error::format(path, e.to_string()))
}
