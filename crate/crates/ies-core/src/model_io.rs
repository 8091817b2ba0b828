//! Versioned serialization of trained unit models and the hybrid-net
//! manifest tying weight files to plant parameters.

use crate::mlp::{MlpSpec, MlpWeights};
use crate::names::{TimeScale, UnitId};
use crate::scale::MinMaxParams;
use crate::train::TrainReport;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("unsupported weights format version {0} (expected {WEIGHTS_FORMAT_VERSION})")]
    BadVersion(u32),
    #[error("weight shapes inconsistent with spec: {0}")]
    BadShapes(String),
    #[error("manifest missing unit {0}")]
    MissingUnit(UnitId),
}

/// A trained unit network bundled with the scalers that map physical
/// signals into its input space and its outputs back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitModel {
    pub format_version: u32,
    pub unit: UnitId,
    pub scale: TimeScale,
    pub seed: u64,
    pub spec: MlpSpec,
    pub weights: MlpWeights,
    pub in_scaler: MinMaxParams,
    pub out_scaler: MinMaxParams,
}

impl UnitModel {
    pub fn save_json(&self, path: &Path) -> Result<(), ModelIoError> {
        let text = serde_json::to_string(self).expect("model serialize");
        std::fs::write(path, text).map_err(|e| ModelIoError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load_json(path: &Path) -> Result<UnitModel, ModelIoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelIoError::Io(format!("{}: {e}", path.display())))?;
        let model: UnitModel = serde_json::from_str(&text)
            .map_err(|e| ModelIoError::Io(format!("{}: {e}", path.display())))?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ModelIoError> {
        if self.format_version != WEIGHTS_FORMAT_VERSION {
            return Err(ModelIoError::BadVersion(self.format_version));
        }
        self.weights
            .check_shapes(&self.spec)
            .map_err(|e| ModelIoError::BadShapes(e.to_string()))?;
        if self.in_scaler.n_cols()
            != self.spec.inputs_cont.len()
                + self.spec.inputs_bin.len()
                + self.spec.disturbances.len()
                + self.spec.linked.len()
        {
            return Err(ModelIoError::BadShapes("input scaler width".into()));
        }
        if self.out_scaler.n_cols() != self.spec.outputs.len() {
            return Err(ModelIoError::BadShapes("output scaler width".into()));
        }
        Ok(())
    }

    /// Conventional file name inside a weights directory.
    pub fn file_name(unit: UnitId, scale: TimeScale) -> String {
        format!("{}_{}.json", unit.key(), scale.key())
    }
}

/// Loss curve export for one training run.
pub fn save_loss_csv(report: &TrainReport, path: &Path) -> Result<(), ModelIoError> {
    let mut wtr =
        csv::Writer::from_path(path).map_err(|e| ModelIoError::Io(format!("{}: {e}", path.display())))?;
    wtr.write_record(["epoch", "train_mse", "val_mse"])
        .map_err(|e| ModelIoError::Io(e.to_string()))?;
    for (i, (tr, va)) in report.train_loss.iter().zip(&report.val_loss).enumerate() {
        wtr.write_record(&[i.to_string(), tr.to_string(), va.to_string()])
            .map_err(|e| ModelIoError::Io(e.to_string()))?;
    }
    wtr.flush().map_err(|e| ModelIoError::Io(e.to_string()))?;
    Ok(())
}

/// Manifest listing the unit weight files composing one hybrid network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetManifest {
    pub scale: TimeScale,
    pub plant_params: PathBuf,
    pub units: Vec<(UnitId, PathBuf)>,
}

impl NetManifest {
    pub fn save_json(&self, path: &Path) -> Result<(), ModelIoError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialize");
        std::fs::write(path, text).map_err(|e| ModelIoError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load_json(path: &Path) -> Result<NetManifest, ModelIoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelIoError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ModelIoError::Io(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::table_preset;
    use crate::train::init_weights;

    fn dummy_model() -> UnitModel {
        let spec = table_preset(TimeScale::LongTerm, UnitId::Fc).unwrap();
        let weights = init_weights(&spec, 3);
        let n_in = spec.inputs_cont.len()
            + spec.inputs_bin.len()
            + spec.disturbances.len()
            + spec.linked.len();
        UnitModel {
            format_version: WEIGHTS_FORMAT_VERSION,
            unit: UnitId::Fc,
            scale: TimeScale::LongTerm,
            seed: 3,
            spec,
            weights,
            in_scaler: MinMaxParams {
                a_min: vec![0.0; n_in],
                a_max: vec![1.0; n_in],
                constant: vec![false; n_in],
            },
            out_scaler: MinMaxParams {
                a_min: vec![0.0],
                a_max: vec![60.0],
                constant: vec![false],
            },
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let model = dummy_model();
        let path = dir.path().join(UnitModel::file_name(UnitId::Fc, TimeScale::LongTerm));
        model.save_json(&path).unwrap();
        let loaded = UnitModel::load_json(&path).unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn version_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut model = dummy_model();
        model.format_version = 999;
        let path = dir.path().join("bad.json");
        model.save_json(&path).unwrap();
        assert!(matches!(
            UnitModel::load_json(&path),
            Err(ModelIoError::BadVersion(999))
        ));
    }

    #[test]
    fn shape_corruption_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut model = dummy_model();
        model.weights.hidden[0].b.push(1.0);
        let path = dir.path().join("bad_shape.json");
        model.save_json(&path).unwrap();
        assert!(UnitModel::load_json(&path).is_err());
    }
}
