//! Versioned model checkpoints: JSON dumps of config plus all weight
//! tensors. JSON round-trips `f64` exactly, so a saved and reloaded model
//! produces bit-identical forward outputs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EngineError, TrainedModel};

pub(crate) const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    model: TrainedModel,
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), EngineError> {
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_vec_pretty(&file)
        .map_err(|e| EngineError::CheckpointFormat(e.to_string()))?;
    crate::io_util::write_atomic(path, &json).map_err(|e| EngineError::CheckpointIo {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, EngineError> {
    let bytes = fs::read(path).map_err(|e| EngineError::CheckpointIo {
        path: path.display().to_string(),
        source: e,
    })?;
    let file: CheckpointFile = serde_json::from_slice(&bytes)
        .map_err(|e| EngineError::CheckpointFormat(e.to_string()))?;
    if file.format_version != CHECKPOINT_VERSION {
        return Err(EngineError::CheckpointVersion {
            expected: CHECKPOINT_VERSION,
            found: file.format_version,
        });
    }
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{train, Arch, ModelConfig, TrainConfig};
    use crate::graph::{gen_synthetic, SyntheticSpec};

    #[test]
    fn roundtrip_preserves_forward_outputs_exactly() {
        let ds = gen_synthetic(&SyntheticSpec::new(12, 2, (4, 6), vec![0.2, 0.5], 3, 2)).unwrap();
        let cfg = ModelConfig::new(Arch::Gat).with_hidden_dim(6);
        let model = train(&cfg, &TrainConfig::new(8, 0.05, 7), &ds, None).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();

        assert_eq!(model, loaded);
        for g in ds.graphs() {
            let a = model.forward(g).unwrap();
            let b = loaded.forward(g).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let ds = gen_synthetic(&SyntheticSpec::new(4, 1, (3, 3), vec![0.5], 2, 3)).unwrap();
        let cfg = ModelConfig::new(Arch::Mlp).with_hidden_dim(3);
        let model = train(&cfg, &TrainConfig::new(0, 0.1, 1), &ds, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 99");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(EngineError::CheckpointVersion { found: 99, .. })
        ));
    }
}
