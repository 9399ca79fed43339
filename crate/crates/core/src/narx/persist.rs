use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NarxConfig, NarxModel, NarxWeights};
use crate::error::{Error, Result};
use crate::trace::Normalizer;

const FORMAT: &str = "qoe-narx-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    config: NarxConfig,
    channel_names: Vec<String>,
    normalizer: Normalizer,
    seed: Option<u64>,
    /// `hidden x R`, row-major.
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

/// JSON document; floats use the shortest representation that parses back
/// to the identical bits.
pub fn model_to_json(model: &NarxModel) -> String {
    let w = &model.weights;
    let file = ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        config: model.config,
        channel_names: model.channel_names.clone(),
        normalizer: model.normalizer.clone(),
        seed: model.seed,
        w1: (0..w.hidden).map(|k| w.w1_row(k).to_vec()).collect(),
        b1: w.b1.clone(),
        w2: w.w2.clone(),
        b2: w.b2,
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<NarxModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::parse("model", e))?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(Error::parse(
            "model",
            format!("unsupported format {} v{}", file.format, file.version),
        ));
    }
    let inputs = file.config.regressor_dim();
    if file.w1.iter().any(|r| r.len() != inputs) {
        return Err(Error::parse("model", "w1 row length does not match config"));
    }
    let weights = NarxWeights {
        hidden: file.w1.len(),
        inputs,
        w1: file.w1.concat(),
        b1: file.b1,
        w2: file.w2,
        b2: file.b2,
    };
    let model = NarxModel::new(file.config, weights, file.normalizer, file.seed)?;
    if model.channel_names != file.channel_names {
        return Err(Error::parse(
            "model",
            "channel_names disagree with normalizer",
        ));
    }
    Ok(model)
}

pub fn save_model(path: &Path, model: &NarxModel) -> Result<()> {
    std::fs::write(path, model_to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<NarxModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
