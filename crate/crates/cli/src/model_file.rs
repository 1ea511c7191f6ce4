//! Versioned JSON persistence of fitted models.
//!
//! Floats are written in shortest round-trip decimal form, so a load restores
//! every coefficient bit for bit.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use wahkon::kernel::KernelConfig;
use wahkon::network::{Architecture, Centers, LastLayer, LinkBank, LinkLayer, LinkTensor, WahkonModel};
use wahkon::trainer::TrainHistory;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub widths: Vec<usize>,
    pub kernel_lengthscale: f64,
    /// Layers `1..L-1`.
    pub layers: Vec<LayerRecord>,
    /// `n × D_{L-1}` layer-`(L-1)` outputs of the refit data, one row per point.
    pub last_centers: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub lambda_lower: f64,
    pub lambda_last: f64,
    pub seed: u64,
    pub training: TrainingInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub grid: Vec<f64>,
    pub d_out: usize,
    pub d_in: usize,
    /// Coefficients `a_{gjk}` with `g` fastest, then `k`, then `j`.
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingInfo {
    pub n_train: usize,
    pub steps: usize,
    pub best_step: Option<usize>,
    pub stopped_early: bool,
}

impl TrainingInfo {
    pub fn from_history(n_train: usize, h: &TrainHistory) -> Self {
        Self {
            n_train,
            steps: h.records.len(),
            best_step: h.best_step,
            stopped_early: h.stopped_early,
        }
    }
}

impl ModelFile {
    pub fn from_model(model: &WahkonModel, training: TrainingInfo) -> Result<Self, CliError> {
        let last = model
            .last_layer
            .as_ref()
            .ok_or_else(|| CliError::Numerical("model has no fitted last layer".into()))?;
        let layers = model
            .links
            .layers
            .iter()
            .map(|l| match &l.centers {
                Centers::Shared(grid) => Ok(LayerRecord {
                    grid: grid.clone(),
                    d_out: l.d_out(),
                    d_in: l.d_in(),
                    coeffs: l.coeffs.as_slice().to_vec(),
                }),
                Centers::PerInput(_) => Err(CliError::Numerical("only grid-form layers can be saved".into())),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            widths: model.architecture.widths().to_vec(),
            kernel_lengthscale: model.kernel.lengthscale(),
            layers,
            last_centers: last.centers.row_iter().map(|r| r.iter().copied().collect()).collect(),
            alpha: last.alpha.iter().copied().collect(),
            lambda_lower: model.lambda_lower,
            lambda_last: model.lambda_last,
            seed: model.seed,
            training,
        })
    }

    /// Rebuilds the model, checking every shape against the architecture.
    pub fn to_model(&self) -> Result<WahkonModel, CliError> {
        let corrupt = |m: String| CliError::Corrupt(m);
        if self.schema_version != SCHEMA_VERSION {
            return Err(corrupt(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let arch = Architecture::new(self.widths.clone()).map_err(|e| corrupt(e.to_string()))?;
        let kernel = KernelConfig::new(self.kernel_lengthscale).map_err(|e| corrupt(e.to_string()))?;
        if self.layers.len() != arch.depth() - 1 {
            return Err(corrupt(format!(
                "expected {} stored layers, found {}",
                arch.depth() - 1,
                self.layers.len()
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, rec) in self.layers.iter().enumerate() {
            let l = i + 1;
            if (rec.d_out, rec.d_in) != (arch.width(l), arch.width(l - 1)) {
                return Err(corrupt(format!("layer {l} has shape {}x{}", rec.d_out, rec.d_in)));
            }
            let tensor = LinkTensor::from_vec(rec.grid.len(), rec.d_out, rec.d_in, rec.coeffs.clone())
                .map_err(|e| corrupt(format!("layer {l}: {e}")))?;
            layers.push(LinkLayer::new(Centers::Shared(rec.grid.clone()), tensor).map_err(|e| corrupt(e.to_string()))?);
        }
        let d = arch.last_hidden_width();
        let n = self.alpha.len();
        if n == 0 || self.last_centers.len() != n || self.last_centers.iter().any(|r| r.len() != d) {
            return Err(corrupt(format!("last layer needs {n} center rows of width {d}")));
        }
        let all_finite = layers.iter().flat_map(|l| l.coeffs.as_slice()).all(|v| v.is_finite())
            && self.alpha.iter().chain(self.last_centers.iter().flatten()).all(|v| v.is_finite());
        if !all_finite {
            return Err(corrupt("model contains non-finite values".into()));
        }
        let centers = DMatrix::from_fn(n, d, |i, k| self.last_centers[i][k]);
        Ok(WahkonModel {
            architecture: arch,
            kernel,
            links: LinkBank { layers },
            last_layer: Some(LastLayer {
                centers,
                alpha: DVector::from_vec(self.alpha.clone()),
            }),
            lambda_lower: self.lambda_lower,
            lambda_last: self.lambda_last,
            seed: self.seed,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read model {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Corrupt(format!("{}: {e}", path.display())))
    }
}
