//! Template-estimation attacks and their scoring.
//!
//! Three estimators share one interface: global Otsu on symbol block means,
//! a Fisher discriminant over symbol neighbourhoods, and a learned
//! encoder–decoder. Each maps a registered scan to a [`SoftEstimate`] that
//! [`binarize_estimate`] turns into a fake template.

pub mod lda;
pub mod learned;
pub mod nn;
pub mod otsu;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f, write_atomic, CsvTable};
use crate::patterns::BinaryTemplate;
use crate::printchan::GrayImage;

pub use lda::{lda_train, LdaModel};
pub use learned::{train_estimator, Architecture, LearnedModel, LossBreakdown, Mode, TrainConfig, UNet};
pub use otsu::{otsu_estimate, otsu_threshold, OtsuThreshold};

/// Default binarization threshold; values equal to it map to white.
pub const TAU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Otsu,
    Lda,
    Learned,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Otsu => "otsu",
            EstimatorKind::Lda => "lda",
            EstimatorKind::Learned => "learned",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "otsu" => Ok(EstimatorKind::Otsu),
            "lda" => Ok(EstimatorKind::Lda),
            "learned" => Ok(EstimatorKind::Learned),
            _ => Err(Error::Parameter(format!("unknown estimator kind {s:?} (otsu, lda, learned)"))),
        }
    }
}

/// Per-symbol whiteness in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftEstimate {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorModel {
    Otsu { pps: usize },
    Lda(LdaModel),
    Learned(LearnedModel),
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Cheap content hash used to key the stochastic estimator's input noise.
fn content_key(scan: &GrayImage) -> u64 {
    scan.pixels().iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
        (h ^ v.to_bits()).wrapping_mul(0x0100_0000_01b3)
    })
}

impl EstimatorModel {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            EstimatorModel::Otsu { .. } => EstimatorKind::Otsu,
            EstimatorModel::Lda(_) => EstimatorKind::Lda,
            EstimatorModel::Learned(_) => EstimatorKind::Learned,
        }
    }

    pub fn pps(&self) -> usize {
        match self {
            EstimatorModel::Otsu { pps } => *pps,
            EstimatorModel::Lda(m) => m.pps,
            EstimatorModel::Learned(m) => m.net.arch.pps,
        }
    }

    /// Estimate the template behind a registered scan. Stochastic learned
    /// models draw their input noise from a stream keyed by the scan content
    /// and the training seed, so repeated calls agree.
    pub fn estimate(&self, scan: &GrayImage) -> Result<SoftEstimate> {
        if scan.pps != self.pps() {
            return Err(Error::Dimension(format!(
                "scan pps {} but {} model expects {}",
                scan.pps,
                self.kind().name(),
                self.pps()
            )));
        }
        let (rows, cols) = scan
            .symbol_dims()
            .ok_or_else(|| Error::Dimension(format!("{:?} is not a multiple of pps {}", scan.dims(), scan.pps)))?;
        let values = match self {
            EstimatorModel::Otsu { .. } => otsu_estimate(scan)?.bits().iter().map(|&b| b as f64).collect(),
            EstimatorModel::Lda(m) => m.scores(scan)?.into_iter().map(sigmoid).collect(),
            EstimatorModel::Learned(m) => m.estimate(scan, m.config.seed ^ content_key(scan))?,
        };
        Ok(SoftEstimate { rows, cols, values })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ck = match self {
            EstimatorModel::Otsu { pps } => Checkpoint::Otsu { pps: *pps },
            EstimatorModel::Lda(m) => Checkpoint::Lda { model: m.clone() },
            EstimatorModel::Learned(m) => Checkpoint::Learned {
                mode: m.mode,
                input_noise_std: m.input_noise_std,
                shapes: m.net.shapes(),
                params: m.net.params(),
                config: m.config.clone(),
            },
        };
        let json = serde_json::to_string(&ck).map_err(|e| Error::format(path, e.to_string()))?;
        write_atomic(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        Ok(match ck {
            Checkpoint::Otsu { pps } => EstimatorModel::Otsu { pps },
            Checkpoint::Lda { model } => EstimatorModel::Lda(model),
            Checkpoint::Learned {
                mode,
                input_noise_std,
                shapes,
                params,
                config,
            } => {
                let mut net = UNet::<f32>::new(config.architecture, 0);
                if net.shapes() != shapes || params.len() != net.n_params() {
                    return Err(Error::format(path, "parameter shapes do not match the architecture"));
                }
                net.set_params(&params);
                EstimatorModel::Learned(LearnedModel {
                    net,
                    mode,
                    input_noise_std,
                    config,
                })
            }
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Checkpoint {
    Otsu {
        pps: usize,
    },
    Lda {
        model: LdaModel,
    },
    Learned {
        mode: Mode,
        input_noise_std: f64,
        shapes: Vec<Vec<usize>>,
        params: Vec<f32>,
        config: TrainConfig,
    },
}

/// Values below `tau` become black; ties at `tau` go white.
pub fn binarize_estimate(e: &SoftEstimate, tau: f64) -> Result<BinaryTemplate> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Parameter(format!("tau {tau} must lie in (0, 1)")));
    }
    let bits = e.values.iter().map(|&v| u8::from(v >= tau)).collect();
    BinaryTemplate::from_bits(e.rows, e.cols, bits)
}

/// Percentage of differing symbols.
pub fn p_error(estimate: &BinaryTemplate, truth: &BinaryTemplate) -> Result<f64> {
    if estimate.dims() != truth.dims() {
        return Err(Error::Dimension(format!(
            "estimate {:?} vs template {:?}",
            estimate.dims(),
            truth.dims()
        )));
    }
    let diff = estimate.bits().iter().zip(truth.bits()).filter(|(a, b)| a != b).count();
    Ok(100.0 * diff as f64 / truth.bits().len() as f64)
}

/// Estimate, binarize at [`TAU`] and score a batch of `(template, scan)`
/// pairs in parallel.
pub fn evaluate(model: &EstimatorModel, pairs: &[(BinaryTemplate, GrayImage)]) -> Result<Vec<(BinaryTemplate, f64)>> {
    crate::par::map(pairs, |(t, x)| {
        let est = binarize_estimate(&model.estimate(x)?, TAU)?;
        let pe = p_error(&est, t)?;
        Ok((est, pe))
    })
    .into_iter()
    .collect()
}

pub fn loss_table(history: &[LossBreakdown]) -> CsvTable {
    let mut t = CsvTable::new(["epoch", "total", "recon", "marginal", "disc"]);
    for h in history {
        t.push([
            h.epoch.to_string(),
            fmt_f(h.total, 6),
            fmt_f(h.recon, 6),
            fmt_f(h.marginal, 6),
            fmt_f(h.disc, 6),
        ]);
    }
    t
}
