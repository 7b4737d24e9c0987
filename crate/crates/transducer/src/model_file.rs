//! Versioned JSON persistence of fitted models.
//!
//! Component parameters are stored as flat arrays in sample-major,
//! component-minor order (class and output dimension innermost), the same
//! order in which every model query reduces them.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use transducer_core::calibrate::{PriorSpec, SamplerConfig};
use transducer_core::model::Provenance;
use transducer_core::{CalibrationSet, DataSummary, FrequencySample, MixtureComponent, TransducerModel};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub n_classes: usize,
    pub y_dim: usize,
    pub components: usize,
    pub samples: usize,
    pub provenance: Option<FitProvenance>,
    pub weights: Vec<f64>,
    pub class_params: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitProvenance {
    pub config: ConfigRecord,
    /// SHA-256 of the calibration data, hex.
    pub data_digest: String,
    pub data_summary: SummaryRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigRecord {
    pub components: usize,
    pub samples: usize,
    pub chains: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub weight_concentration: Option<f64>,
    pub class_pseudo_counts: Option<Vec<f64>>,
    pub mean_location: Option<Vec<f64>>,
    pub mean_scale: f64,
    pub precision_shape: f64,
    pub precision_rate: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryRecord {
    pub n_records: usize,
    pub class_counts: Vec<usize>,
    pub y_min: Vec<f64>,
    pub y_max: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_var: Vec<f64>,
}

impl From<&SamplerConfig> for ConfigRecord {
    fn from(c: &SamplerConfig) -> Self {
        Self {
            components: c.components,
            samples: c.samples,
            chains: c.chains,
            burn_in: c.burn_in,
            thinning: c.thinning,
            seed: c.seed,
            weight_concentration: c.priors.weight_concentration,
            class_pseudo_counts: c.priors.class_pseudo_counts.clone(),
            mean_location: c.priors.mean_location.clone(),
            mean_scale: c.priors.mean_scale,
            precision_shape: c.priors.precision_shape,
            precision_rate: c.priors.precision_rate.clone(),
        }
    }
}

impl From<&ConfigRecord> for SamplerConfig {
    fn from(c: &ConfigRecord) -> Self {
        Self {
            components: c.components,
            samples: c.samples,
            chains: c.chains,
            burn_in: c.burn_in,
            thinning: c.thinning,
            seed: c.seed,
            priors: PriorSpec {
                weight_concentration: c.weight_concentration,
                class_pseudo_counts: c.class_pseudo_counts.clone(),
                mean_location: c.mean_location.clone(),
                mean_scale: c.mean_scale,
                precision_shape: c.precision_shape,
                precision_rate: c.precision_rate.clone(),
            },
        }
    }
}

impl From<&DataSummary> for SummaryRecord {
    fn from(s: &DataSummary) -> Self {
        Self {
            n_records: s.n_records,
            class_counts: s.class_counts.clone(),
            y_min: s.y_min.clone(),
            y_max: s.y_max.clone(),
            y_mean: s.y_mean.clone(),
            y_var: s.y_var.clone(),
        }
    }
}

impl From<&SummaryRecord> for DataSummary {
    fn from(s: &SummaryRecord) -> Self {
        Self {
            n_records: s.n_records,
            class_counts: s.class_counts.clone(),
            y_min: s.y_min.clone(),
            y_max: s.y_max.clone(),
            y_mean: s.y_mean.clone(),
            y_var: s.y_var.clone(),
        }
    }
}

/// SHA-256 over the records in file order: label as u64 LE, then every
/// output as f64 LE bits.
pub fn data_digest(data: &CalibrationSet) -> String {
    let mut h = Sha256::new();
    h.update((data.n_classes() as u64).to_le_bytes());
    h.update((data.y_dim() as u64).to_le_bytes());
    for r in data.records() {
        h.update((r.class_label as u64).to_le_bytes());
        for v in &r.output {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl ModelFile {
    /// Flattens a model; `data_digest` is recorded when the model carries
    /// provenance.
    pub fn from_model(model: &TransducerModel, data_digest: Option<String>) -> Self {
        let n = model.n_samples() * model.n_components();
        let mut weights = Vec::with_capacity(n);
        let mut class_params = Vec::with_capacity(n * model.n_classes());
        let mut means = Vec::with_capacity(n * model.y_dim());
        let mut sds = Vec::with_capacity(n * model.y_dim());
        for s in model.samples() {
            for c in &s.components {
                weights.push(c.weight);
                class_params.extend_from_slice(&c.class_params);
                means.extend_from_slice(&c.means);
                sds.extend_from_slice(&c.sds);
            }
        }
        let provenance = model.provenance().map(|p| FitProvenance {
            config: ConfigRecord::from(&p.config),
            data_digest: data_digest.unwrap_or_default(),
            data_summary: SummaryRecord::from(&p.data),
        });
        Self {
            format_version: FORMAT_VERSION,
            n_classes: model.n_classes(),
            y_dim: model.y_dim(),
            components: model.n_components(),
            samples: model.n_samples(),
            provenance,
            weights,
            class_params,
            means,
            sds,
        }
    }

    pub fn to_model(&self) -> Result<TransducerModel> {
        let (c, d, k, t) = (self.n_classes, self.y_dim, self.components, self.samples);
        let n = t * k;
        let check = |name: &str, len: usize, want: usize| {
            if len == want {
                Ok(())
            } else {
                Err(CliError::Dimension(format!(
                    "model file `{name}` has {len} entries, expected {want}"
                )))
            }
        };
        check("weights", self.weights.len(), n)?;
        check("class_params", self.class_params.len(), n * c)?;
        check("means", self.means.len(), n * d)?;
        check("sds", self.sds.len(), n * d)?;
        let samples = (0..t)
            .map(|s| {
                FrequencySample::new(
                    (0..k)
                        .map(|j| {
                            let i = s * k + j;
                            MixtureComponent::new(
                                self.weights[i],
                                self.class_params[i * c..(i + 1) * c].to_vec(),
                                self.means[i * d..(i + 1) * d].to_vec(),
                                self.sds[i * d..(i + 1) * d].to_vec(),
                            )
                        })
                        .collect(),
                )
            })
            .collect();
        let model = TransducerModel::new(samples, c, d)?;
        Ok(match &self.provenance {
            Some(p) => model.with_provenance(Provenance {
                config: SamplerConfig::from(&p.config),
                data: DataSummary::from(&p.data_summary),
            }),
            None => model,
        })
    }

    pub fn read<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_reader(reader).map_err(|e| CliError::parse(source, e.line() as u64, e.to_string()))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(CliError::format(
                    source,
                    format!("unsupported model format version {v} (expected {FORMAT_VERSION})"),
                ))
            }
            None => return Err(CliError::format(source, "missing `format_version`")),
        }
        serde_json::from_value(value).map_err(|e| CliError::format(source, e.to_string()))
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self).map_err(|e| CliError::io("<output>", e.into()))
    }
}

pub fn save_model(path: &Path, model: &TransducerModel, data_digest: Option<String>) -> Result<()> {
    let mut w = crate::io::create(path)?;
    ModelFile::from_model(model, data_digest).write(&mut w)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TransducerModel> {
    ModelFile::read(crate::io::open(path)?, path)?.to_model()
}
