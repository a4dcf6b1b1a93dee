//! Mini-batch Adam training loop. Single logical thread over the optimizer
//! state; everything is driven by the config seed, so two runs with the
//! same seed produce bit-identical parameters.

use crate::data::LabelMatrix;
use crate::error::{Error, Result};
use crate::model::loss::hashing_loss;
use crate::model::{gather_rows, DmmhModel};
use crate::nn::{AdamConfig, AdamState, Parameterized};
use crate::rng::RngState;
use crate::tensor::Tensor;

/// Training inputs: one `[n, dim]` f64 feature tensor per modality in
/// model config order, plus the matching label rows.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub features: Vec<Tensor>,
    pub labels: LabelMatrix,
}

impl TrainingSet {
    pub fn n(&self) -> usize {
        self.labels.n()
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    /// Mean batch loss per epoch, weighted by batch size.
    pub epoch_loss: Vec<f64>,
}

pub fn train(model: &mut DmmhModel, data: &TrainingSet) -> Result<TrainLog> {
    let config = model.config().clone();
    let n = data.n();
    if n == 0 {
        return Err(Error::invalid("train", "training split is empty"));
    }
    if data.features.len() != config.modalities.len() {
        return Err(Error::invalid(
            "train",
            format!(
                "expected {} modalities, got {}",
                config.modalities.len(),
                data.features.len()
            ),
        ));
    }
    for (t, m) in data.features.iter().zip(&config.modalities) {
        if t.shape() != [n, m.dim] {
            return Err(Error::ShapeMismatch {
                op: "train",
                expected: vec![n, m.dim],
                actual: t.shape().to_vec(),
            });
        }
    }
    if config.loss.cls > 0.0 && data.labels.categories() != config.categories.unwrap_or(0) {
        return Err(Error::CategoryMismatch {
            declared: config.categories.unwrap_or(0),
            found: data.labels.categories(),
        });
    }

    // separate stream from parameter init
    let mut shuffle_rng = RngState::new(config.seed ^ 0x0000_5EED_0F5A_17FF);
    let adam_cfg = AdamConfig::with_lr(config.lr);
    let mut adam = AdamState::new();
    let mut log = TrainLog::default();

    let mut order: Vec<u64> = (0..n as u64).collect();
    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let feats: Vec<Tensor> = data
                .features
                .iter()
                .map(|t| gather_rows(t, chunk))
                .collect();
            let refs: Vec<&Tensor> = feats.iter().collect();
            let batch_labels = data.labels.select(chunk);

            model.zero_grads();
            let cache = model.forward_cached(&refs)?;
            let (loss, dh, dlogits) = hashing_loss(
                &cache.h_relaxed,
                &batch_labels,
                cache.logits.as_ref(),
                &config.loss,
            )?;
            if !loss.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            model.backward(&cache, &dh, dlogits.as_ref())?;
            adam.step_params(&adam_cfg, model)?;
            epoch_loss += loss.total * chunk.len() as f64;
        }
        log.epoch_loss.push(epoch_loss / n as f64);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::tiny_config;
    use crate::nn::collect_param_values;

    fn toy_training_set(config: &crate::model::ModelConfig, n: usize, seed: u64) -> TrainingSet {
        let mut rng = RngState::new(seed);
        // two separable clusters per modality
        let features: Vec<Tensor> = config
            .modalities
            .iter()
            .map(|m| {
                let mut data = Vec::with_capacity(n * m.dim);
                for i in 0..n {
                    let center = if i % 2 == 0 { 1.5 } else { -1.5 };
                    for _ in 0..m.dim {
                        data.push(center + 0.1 * rng.normal());
                    }
                }
                Tensor::new(vec![n, m.dim], data).unwrap()
            })
            .collect();
        let mut label_bytes = vec![0u8; n * 2];
        for i in 0..n {
            label_bytes[i * 2 + i % 2] = 1;
        }
        TrainingSet {
            features,
            labels: LabelMatrix::new(n, 2, label_bytes).unwrap(),
        }
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let mut config = tiny_config();
        config.epochs = 12;
        config.lr = 2e-3;
        config.batch_size = 8;
        let data = toy_training_set(&config, 48, 2);
        let mut model = DmmhModel::new(config).unwrap();
        let log = train(&mut model, &data).unwrap();
        assert_eq!(log.epoch_loss.len(), 12);
        let first = log.epoch_loss[0];
        let last = *log.epoch_loss.last().unwrap();
        assert!(
            last < first,
            "loss did not decrease: first {first}, last {last}"
        );
        // monotone within tolerance: transient upticks stay within 5% of
        // the best loss seen so far
        let mut best = f64::INFINITY;
        for (epoch, &loss) in log.epoch_loss.iter().enumerate() {
            assert!(
                loss <= best * 1.05,
                "epoch {epoch}: loss {loss} above 5% band over best {best}"
            );
            best = best.min(loss);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let mut config = tiny_config();
        config.epochs = 3;
        let data = toy_training_set(&config, 12, 3);
        let run = || {
            let mut model = DmmhModel::new(config.clone()).unwrap();
            train(&mut model, &data).unwrap();
            collect_param_values(&mut model)
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn zero_objective_leaves_params_unchanged() {
        let mut config = tiny_config();
        config.loss = crate::model::LossWeights {
            sim: 0.0,
            quant: 0.0,
            cls: 0.0,
        };
        config.epochs = 1;
        let data = toy_training_set(&config, 8, 4);
        let mut model = DmmhModel::new(config).unwrap();
        let before = collect_param_values(&mut model);
        train(&mut model, &data).unwrap();
        let after = collect_param_values(&mut model);
        assert_eq!(before, after);
    }

    #[test]
    fn empty_training_split_rejected() {
        let config = tiny_config();
        let data = TrainingSet {
            features: vec![Tensor::zeros(vec![0, 5]), Tensor::zeros(vec![0, 4])],
            labels: LabelMatrix::new(0, 2, vec![]).unwrap(),
        };
        let mut model = DmmhModel::new(config).unwrap();
        assert!(train(&mut model, &data).is_err());
    }
}
