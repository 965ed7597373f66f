//! Model configuration: grid construction, architecture, training, and
//! ablation switches, serialized as one JSON document.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::BBox;

/// Grid and adjacency construction settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub bbox: BBox,
    pub cell_size_m: f64,
    /// Distance threshold for adjacency edges, km.
    pub tau_km: f64,
}

/// Dataset shaping settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    /// Number of POI categories.
    pub k_poi: usize,
    /// History length L.
    pub seq_len: usize,
    /// Trips farther apart than this start a new segment.
    pub gap_hours: f64,
    /// Take one window per segment instead of sliding.
    pub one_per_segment: bool,
    /// Train/validation/test fractions over taxi ids.
    pub split_fractions: (f64, f64, f64),
}

/// Architecture widths and depths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    /// Node embedding width feeding the GCN stack.
    pub d_in: usize,
    pub d_hidden: usize,
    pub gcn_layers: usize,
    pub n_qubits: usize,
    pub qgcn_layers: usize,
    pub qpool_layers: usize,
    /// Width of the global spatial vector.
    pub d_global: usize,
    /// Hidden width of the pooling readout MLP.
    pub d_mlp: usize,
    pub d_grid_emb: usize,
    /// Width of the fused (graph-aware) grid embedding.
    pub d_fused: usize,
    pub d_taxi_emb: usize,
    pub d_hour_emb: usize,
    pub d_weekday_emb: usize,
    pub d_daytype_emb: usize,
    pub d_tcn: usize,
    pub tcn_kernel: usize,
    pub tcn_dilations: Vec<usize>,
    pub dropout: f64,
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Early stopping after this many epochs without validation
    /// improvement; `None` disables it.
    pub patience: Option<usize>,
    pub seed: u64,
}

/// Component switches of the ablation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub use_boc: bool,
    pub use_qgcn: bool,
}

/// Complete model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub grid: GridConfig,
    pub data: DataConfig,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub ablation: AblationConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig {
                bbox: BBox {
                    min_lon: 10.0,
                    max_lon: 10.05,
                    min_lat: 45.0,
                    max_lat: 45.04,
                },
                cell_size_m: 500.0,
                tau_km: 1.5,
            },
            data: DataConfig {
                k_poi: 5,
                seq_len: 4,
                gap_hours: 3.0,
                one_per_segment: false,
                split_fractions: (0.65, 0.15, 0.20),
            },
            arch: ArchConfig {
                d_in: 32,
                d_hidden: 32,
                gcn_layers: 3,
                n_qubits: 8,
                qgcn_layers: 2,
                qpool_layers: 2,
                d_global: 32,
                d_mlp: 16,
                d_grid_emb: 32,
                d_fused: 32,
                d_taxi_emb: 8,
                d_hour_emb: 4,
                d_weekday_emb: 4,
                d_daytype_emb: 2,
                d_tcn: 64,
                tcn_kernel: 3,
                tcn_dilations: vec![1, 2, 4],
                dropout: 0.1,
            },
            train: TrainConfig {
                learning_rate: 1e-5,
                batch_size: 64,
                epochs: 50,
                patience: Some(10),
                seed: 42,
            },
            ablation: AblationConfig {
                use_boc: true,
                use_qgcn: true,
            },
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cell_size_m", self.grid.cell_size_m),
            ("tau_km", self.grid.tau_km),
            ("gap_hours", self.data.gap_hours),
            ("learning_rate", self.train.learning_rate),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let nonzero = [
            ("k_poi", self.data.k_poi),
            ("seq_len", self.data.seq_len),
            ("d_in", self.arch.d_in),
            ("d_hidden", self.arch.d_hidden),
            ("n_qubits", self.arch.n_qubits),
            ("d_global", self.arch.d_global),
            ("d_mlp", self.arch.d_mlp),
            ("d_grid_emb", self.arch.d_grid_emb),
            ("d_fused", self.arch.d_fused),
            ("d_taxi_emb", self.arch.d_taxi_emb),
            ("d_hour_emb", self.arch.d_hour_emb),
            ("d_weekday_emb", self.arch.d_weekday_emb),
            ("d_daytype_emb", self.arch.d_daytype_emb),
            ("d_tcn", self.arch.d_tcn),
            ("tcn_kernel", self.arch.tcn_kernel),
            ("batch_size", self.train.batch_size),
        ];
        for (name, v) in nonzero {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.arch.tcn_dilations.is_empty() || self.arch.tcn_dilations.contains(&0) {
            return Err(Error::Config(
                "tcn_dilations must be nonempty positive integers".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.arch.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.arch.dropout
            )));
        }
        let (a, b, c) = self.data.split_fractions;
        if (a + b + c - 1.0).abs() > 1e-9 || a <= 0.0 || b <= 0.0 || c <= 0.0 {
            return Err(Error::Config(format!(
                "split fractions must be positive and sum to 1, got ({a}, {b}, {c})"
            )));
        }
        if self.arch.n_qubits > 12 {
            return Err(Error::Config(format!(
                "{} qubits exceed the simulator budget of 12",
                self.arch.n_qubits
            )));
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(format!("config encode: {e}")))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_roundtrips() {
        let config = ModelConfig::default();
        config.validate().unwrap();
        let json = config.to_json_string().unwrap();
        let back = ModelConfig::from_json_str(&json).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn bad_fractions_are_rejected() {
        let mut config = ModelConfig::default();
        config.data.split_fractions = (0.5, 0.5, 0.5);
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn zero_dimension_is_rejected() {
        let mut config = ModelConfig::default();
        config.arch.d_hidden = 0;
        assert!(config.validate().is_err());
    }
}
