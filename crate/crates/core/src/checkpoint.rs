//! Versioned checkpoint: full configuration plus every named parameter
//! tensor in canonical order.

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::{Model, ModelDims, ParamSet};
use crate::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;

/// One serialized parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Model state at one training point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub dims: ModelDims,
    pub params: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_params(config: &ModelConfig, dims: ModelDims, params: &ParamSet) -> Self {
        let params = params
            .entries()
            .iter()
            .map(|(name, tensor)| NamedTensor {
                name: name.clone(),
                shape: tensor.shape().to_vec(),
                data: tensor.data().to_vec(),
            })
            .collect();
        Self {
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            dims,
            params,
        }
    }

    /// Rebuild the model and its parameters, validating the version and
    /// every tensor shape.
    pub fn restore(&self) -> Result<(Model, ParamSet)> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Version(format!(
                "checkpoint version {} unsupported (expected {})",
                self.version, CHECKPOINT_VERSION
            )));
        }
        let model = Model::new(self.config.clone(), self.dims)?;
        let named: Vec<(String, Tensor)> = self
            .params
            .iter()
            .map(|nt| {
                Ok((
                    nt.name.clone(),
                    Tensor::new(nt.shape.clone(), nt.data.clone())?,
                ))
            })
            .collect::<Result<_>>()?;
        let params = model.params_from_named(&named)?;
        Ok((model, params))
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Data(format!("checkpoint encode: {e}")))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Version(format!("checkpoint parse: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;

    fn tiny_model() -> (Model, ParamSet) {
        let mut config = ModelConfig::default();
        config.arch.d_in = 3;
        config.arch.d_hidden = 3;
        config.arch.gcn_layers = 1;
        config.arch.n_qubits = 2;
        config.arch.qgcn_layers = 1;
        config.arch.qpool_layers = 1;
        config.arch.d_global = 3;
        config.arch.d_mlp = 2;
        config.arch.d_grid_emb = 3;
        config.arch.d_fused = 3;
        config.arch.d_taxi_emb = 2;
        config.arch.d_hour_emb = 2;
        config.arch.d_weekday_emb = 2;
        config.arch.d_daytype_emb = 1;
        config.arch.d_tcn = 4;
        config.arch.tcn_dilations = vec![1, 2];
        config.data.seq_len = 2;
        config.data.k_poi = 2;
        let model = Model::new(
            config,
            ModelDims {
                n_nodes: 4,
                n_taxis: 3,
            },
        )
        .unwrap();
        let params = model.init_params();
        (model, params)
    }

    #[test]
    fn checkpoint_roundtrip_restores_identical_parameters() {
        let (model, params) = tiny_model();
        let ckpt = Checkpoint::from_params(&model.config, model.dims, &params);
        let json = ckpt.to_json_string().unwrap();
        let back = Checkpoint::from_json_str(&json).unwrap();
        let (_, restored) = back.restore().unwrap();
        assert_eq!(params, restored);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let (model, params) = tiny_model();
        let mut ckpt = Checkpoint::from_params(&model.config, model.dims, &params);
        ckpt.version = 99;
        assert!(matches!(ckpt.restore(), Err(Error::Version(_))));
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let (model, params) = tiny_model();
        let mut ckpt = Checkpoint::from_params(&model.config, model.dims, &params);
        ckpt.params[0].shape = vec![1, 1];
        ckpt.params[0].data = vec![0.0];
        assert!(matches!(ckpt.restore(), Err(Error::Version(_))));
    }
}
