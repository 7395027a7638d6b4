use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{CqiTarget, Variant};
use crate::error::{Error, Result};
use crate::io::{read_document, read_jsonl, write_document, JsonlWriter};
use crate::policy::{AimingAction, Scenario};
use crate::surrogate::features::FeatureSpec;
use crate::surrogate::nn::{mse_loss, Adam, Mlp};

pub const DATASET_FORMAT: &str = "tethernet-dataset";
pub const DATASET_VERSION: u32 = 1;
pub const MODEL_FORMAT: &str = "tethernet-surrogate";
pub const MODEL_VERSION: u32 = 1;

/// Smallest dataset the trainer accepts.
pub const MIN_TRAINING_SAMPLES: usize = 100;
/// Fewest residuals from which an error model is fitted.
pub const MIN_RESIDUALS: usize = 10;

/// Snapshot at the closing trigger labelled with the simulated outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub cqi: f64,
    pub locked_pairs: usize,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<AimingAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub variant: Variant,
    pub width: usize,
    pub count: usize,
    pub spec: FeatureSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: FeatureSpec,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(spec: FeatureSpec, samples: Vec<Sample>) -> Result<Self> {
        let width = spec.width();
        if let Some(bad) = samples.iter().find(|s| s.features.len() != width) {
            return Err(Error::WidthMismatch {
                expected: width,
                actual: bad.features.len(),
            });
        }
        Ok(Self { spec, samples })
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            variant: self.spec.variant,
            width: self.spec.width(),
            count: self.samples.len(),
            spec: self.spec.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = JsonlWriter::create(path, DATASET_FORMAT, DATASET_VERSION)?;
        w.write(&self.meta())?;
        for s in &self.samples {
            w.write(s)?;
        }
        w.finish()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines: Vec<serde_json::Value> = read_jsonl(path, DATASET_FORMAT, DATASET_VERSION)?;
        let malformed = |reason: String| Error::Malformed {
            kind: DATASET_FORMAT.into(),
            reason,
        };
        let mut it = lines.into_iter();
        let meta: DatasetMeta = serde_json::from_value(it.next().ok_or_else(|| malformed("missing meta record".into()))?)
            .map_err(|e| malformed(format!("meta: {e}")))?;
        let samples = it
            .map(|v| serde_json::from_value::<Sample>(v).map_err(|e| malformed(format!("sample: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if samples.len() != meta.count {
            return Err(malformed(format!("header says {} samples, found {}", meta.count, samples.len())));
        }
        if meta.width != meta.spec.width() {
            return Err(Error::WidthMismatch {
                expected: meta.spec.width(),
                actual: meta.width,
            });
        }
        Self::new(meta.spec, samples)
    }

    /// Content hash of features and labels.
    pub fn hash(&self) -> String {
        hash_samples(&self.samples)
    }
}

pub fn hash_samples(samples: &[Sample]) -> String {
    let mut h = Sha256::new();
    for s in samples {
        for v in &s.features {
            h.update(v.to_le_bytes());
        }
        h.update(s.cqi.to_le_bytes());
        h.update((s.locked_pairs as u64).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Gaussian model of the quality-index prediction residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub mean: f64,
    pub sigma: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub weight_decay: f64,
    pub samples: usize,
    pub dataset_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub spec: FeatureSpec,
    pub network: Mlp,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub output_mean: [f64; 2],
    pub output_std: [f64; 2],
    #[serde(default)]
    pub cqi_target: CqiTarget,
    pub training: TrainingMeta,
    pub error_model: Option<ErrorModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub cqi: f64,
    /// Raw locked-pair regression output.
    pub locked_raw: f64,
    /// Rounded and clamped to the variant's range.
    pub locked_pairs: usize,
}

impl Prediction {
    pub fn success(&self, variant: Variant, cqi_threshold: f64) -> bool {
        self.cqi <= cqi_threshold && self.locked_pairs >= variant.locked_pair_threshold()
    }
}

/// Mean squared errors in label units, over all samples and over the
/// successful captures only.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitMse {
    pub count: usize,
    pub cqi_mse: f64,
    pub locked_mse: f64,
    pub success_count: usize,
    pub success_cqi_mse: f64,
    pub success_locked_mse: f64,
    /// Fraction of samples whose predicted success flag matches the label.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Standardized training loss after every epoch.
    pub loss_history: Vec<f64>,
    pub train: SplitMse,
    pub validation: Option<SplitMse>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub cqi_target: CqiTarget,
    pub cqi_threshold: f64,
}

fn column_stats(rows: impl Iterator<Item = Vec<f64>>, width: usize) -> (Vec<f64>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = rows.collect();
    let n = rows.len().max(1) as f64;
    let mut mean = vec![0.0; width];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; width];
    for r in &rows {
        for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    // Constant columns pass through unscaled.
    let std = std.into_iter().map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 }).collect();
    (mean, std)
}

impl SurrogateModel {
    pub fn input_width(&self) -> usize {
        self.network.input_width()
    }

    fn standardize_into(&self, features: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = (features[k] - self.input_mean[k]) / self.input_std[k];
        }
    }

    fn check_width(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.input_width() {
            return Err(Error::WidthMismatch {
                expected: self.input_width(),
                actual: features.len(),
            });
        }
        Ok(())
    }

    fn to_prediction(&self, cqi_std: f64, nl_std: f64) -> Prediction {
        let cqi = self.cqi_target.inverse(cqi_std * self.output_std[0] + self.output_mean[0]);
        let locked_raw = nl_std * self.output_std[1] + self.output_mean[1];
        let max = self.spec.variant.max_locked_pairs() as f64;
        Prediction {
            cqi,
            locked_raw,
            locked_pairs: locked_raw.round().clamp(0.0, max) as usize,
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        Ok(self.predict_batch(std::slice::from_ref(&features.to_vec()))?.remove(0))
    }

    /// Column-wise forward pass; results do not depend on batch order.
    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        for r in rows {
            self.check_width(r)?;
        }
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let out = self.network.forward_batch(self.input_matrix(rows.iter().map(Vec::as_slice)));
        Ok(out
            .column_iter()
            .map(|c| self.to_prediction(c[0], c[1]))
            .collect())
    }

    fn input_matrix<'a>(&self, rows: impl ExactSizeIterator<Item = &'a [f64]>) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.input_width(), rows.len());
        for (j, r) in rows.enumerate() {
            let mut col = x.column_mut(j);
            self.standardize_into(r, col.as_mut_slice());
        }
        x
    }

    /// Prediction with one draw of the residual model added to the CQI.
    pub fn noisy_predict<R: Rng + ?Sized>(&self, features: &[f64], rng: &mut R) -> Result<Prediction> {
        let mut p = self.predict(features)?;
        if let Some(e) = self.error_model {
            if e.sigma > 0.0 {
                let n = Normal::new(e.mean, e.sigma).map_err(|err| Error::InvalidInput(err.to_string()))?;
                p.cqi += n.sample(rng);
            } else {
                p.cqi += e.mean;
            }
        }
        Ok(p)
    }

    pub fn evaluate(&self, samples: &[Sample], cqi_threshold: f64) -> Result<SplitMse> {
        let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.features.clone()).collect();
        let preds = self.predict_batch(&rows)?;
        let mut m = SplitMse {
            count: samples.len(),
            ..Default::default()
        };
        let mut correct = 0;
        for (s, p) in samples.iter().zip(&preds) {
            let (ec, el) = ((p.cqi - s.cqi).powi(2), (p.locked_raw - s.locked_pairs as f64).powi(2));
            m.cqi_mse += ec;
            m.locked_mse += el;
            if s.success {
                m.success_count += 1;
                m.success_cqi_mse += ec;
                m.success_locked_mse += el;
            }
            if p.success(self.spec.variant, cqi_threshold) == s.success {
                correct += 1;
            }
        }
        let n = samples.len().max(1) as f64;
        let ns = m.success_count.max(1) as f64;
        m.cqi_mse /= n;
        m.locked_mse /= n;
        m.success_cqi_mse /= ns;
        m.success_locked_mse /= ns;
        m.accuracy = correct as f64 / n;
        Ok(m)
    }

    /// Fits the residual Gaussian (population variance) over samples whose
    /// simulated CQI is below `cutoff`.
    pub fn fit_error_model(&mut self, validation: &[Sample], cutoff: f64) -> Result<ErrorModel> {
        let kept: Vec<&Sample> = validation.iter().filter(|s| s.cqi < cutoff).collect();
        let rows: Vec<Vec<f64>> = kept.iter().map(|s| s.features.clone()).collect();
        let preds = self.predict_batch(&rows)?;
        let residuals: Vec<f64> = kept.iter().zip(&preds).map(|(s, p)| s.cqi - p.cqi).collect();
        let e = fit_gaussian(&residuals)?;
        self.error_model = Some(e);
        Ok(e)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_document(path, MODEL_FORMAT, MODEL_VERSION, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = read_document(path, MODEL_FORMAT, MODEL_VERSION)?;
        if m.input_mean.len() != m.input_width() || m.input_std.len() != m.input_width() {
            return Err(Error::Malformed {
                kind: MODEL_FORMAT.into(),
                reason: "standardization width differs from the network input".into(),
            });
        }
        if m.network.output_width() != 2 {
            return Err(Error::WidthMismatch {
                expected: 2,
                actual: m.network.output_width(),
            });
        }
        Ok(m)
    }
}

/// Mean and population standard deviation of `residuals`.
pub fn fit_gaussian(residuals: &[f64]) -> Result<ErrorModel> {
    if residuals.len() < MIN_RESIDUALS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_RESIDUALS} residuals, got {}",
            residuals.len()
        )));
    }
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok(ErrorModel {
        mean,
        sigma: var.sqrt(),
        count: residuals.len(),
    })
}

/// Mini-batch Adam on the sum of the two standardized output MSEs.
pub fn train<R: Rng + ?Sized>(
    spec: &FeatureSpec,
    samples: &[Sample],
    validation: &[Sample],
    options: &TrainOptions,
    rng: &mut R,
) -> Result<(SurrogateModel, TrainReport)> {
    if samples.len() < MIN_TRAINING_SAMPLES {
        return Err(Error::Training(format!(
            "need at least {MIN_TRAINING_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let width = spec.width();
    if let Some(bad) = samples.iter().chain(validation).find(|s| s.features.len() != width) {
        return Err(Error::WidthMismatch {
            expected: width,
            actual: bad.features.len(),
        });
    }
    let (input_mean, input_std) = column_stats(samples.iter().map(|s| s.features.clone()), width);
    let (out_mean, out_std) = column_stats(
        samples.iter().map(|s| vec![options.cqi_target.forward(s.cqi), s.locked_pairs as f64]),
        2,
    );
    let mut widths = vec![width];
    widths.extend(&options.hidden);
    widths.push(2);
    let mut model = SurrogateModel {
        spec: spec.clone(),
        network: Mlp::new(&widths, rng)?,
        input_mean,
        input_std,
        output_mean: [out_mean[0], out_mean[1]],
        output_std: [out_std[0], out_std[1]],
        cqi_target: options.cqi_target,
        training: TrainingMeta {
            learning_rate: options.learning_rate,
            epochs: options.epochs,
            batch_size: options.batch_size,
            weight_decay: options.weight_decay,
            samples: samples.len(),
            dataset_hash: hash_samples(samples),
        },
        error_model: None,
    };

    let x_all = model.input_matrix(samples.iter().map(|s| s.features.as_slice()));
    let y_all = DMatrix::from_fn(2, samples.len(), |r, c| {
        let s = &samples[c];
        let v = if r == 0 {
            options.cqi_target.forward(s.cqi)
        } else {
            s.locked_pairs as f64
        };
        (v - model.output_mean[r]) / model.output_std[r]
    });

    let mut adam = Adam::new(options.learning_rate, model.network.param_count());
    let batch = options.batch_size.clamp(1, samples.len());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(options.epochs);
    for epoch in 0..options.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let x = x_all.select_columns(chunk);
            let y = y_all.select_columns(chunk);
            let trace = model.network.trace(x);
            let (loss, d) = mse_loss(trace.output(), &y);
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss at epoch {epoch} (batch of {}, lr {})",
                    chunk.len(),
                    options.learning_rate
                )));
            }
            total += loss * chunk.len() as f64;
            let mut grads = model.network.backward(&trace, &d);
            if options.weight_decay > 0.0 {
                for (g, w) in grads.weights.iter_mut().zip(&model.network.weights) {
                    *g += w * options.weight_decay;
                }
            }
            adam.step_mlp(&mut model.network, &grads);
        }
        history.push(total / samples.len() as f64);
    }

    let train_mse = model.evaluate(samples, options.cqi_threshold)?;
    let validation_mse = if validation.is_empty() {
        None
    } else {
        Some(model.evaluate(validation, options.cqi_threshold)?)
    };
    Ok((
        model,
        TrainReport {
            loss_history: history,
            train: train_mse,
            validation: validation_mse,
        },
    ))
}
