//! Gradient-check suites: every layer kind in isolation against central
//! differences, and the full model end to end through the training loss.

use std::collections::HashMap;

use crate::data::LabelMatrix;
use crate::error::Result;
use crate::model::loss::hashing_loss;
use crate::model::{DmmhModel, ModelConfig};
use crate::nn::activation::{activation_backward, activation_forward, Activation};
use crate::nn::gradcheck::{central_difference, max_relative_error, FD_STEP};
use crate::nn::{
    collect_param_grads, collect_param_values, param_layout, set_param_values, Conv1d, GradCheckReport,
    LayerNorm, Linear, Parameterized,
};
use crate::rng::RngState;
use crate::ssm::{scan_by_name, SsmBlockParams};
use crate::tensor::Tensor;

fn weighted_sum(y: &Tensor, cot: &Tensor) -> f64 {
    y.data().iter().zip(cot.data()).map(|(a, b)| a * b).sum()
}

fn check_linear(seed: u64) -> f64 {
    let mut rng = RngState::new(seed);
    let layer = Linear::new(4, 3, &mut rng);
    let x = Tensor::uniform(vec![3, 4], -1.0, 1.0, &mut rng);
    let cot = Tensor::uniform(vec![3, 3], -1.0, 1.0, &mut rng);

    let mut probe = layer.clone();
    probe.zero_grads();
    let dx = probe.backward(&x, &cot).expect("shapes fixed");
    let mut analytic = collect_param_grads(&mut probe);
    analytic.extend_from_slice(dx.data());

    let theta = collect_param_values(&mut layer.clone());
    let mut full: Vec<f64> = theta.iter().chain(x.data()).copied().collect();
    let split = theta.len();
    let numeric = central_difference(
        &mut |t: &[f64]| {
            let mut l = layer.clone();
            set_param_values(&mut l, &t[..split]);
            let xt = Tensor::new(vec![3, 4], t[split..].to_vec()).unwrap();
            weighted_sum(&l.forward(&xt).unwrap(), &cot)
        },
        &full,
        FD_STEP,
    );
    full.clear();
    max_relative_error(&analytic, &numeric)
}

fn check_conv1d(seed: u64) -> f64 {
    let mut rng = RngState::new(seed);
    let layer = Conv1d::new(2, 2, 3, &mut rng).expect("odd kernel");
    let x = Tensor::uniform(vec![2, 4, 2], -1.0, 1.0, &mut rng);
    let cot = Tensor::uniform(vec![2, 4, 2], -1.0, 1.0, &mut rng);

    let mut probe = layer.clone();
    probe.zero_grads();
    let dx = probe.backward(&x, &cot).expect("shapes fixed");
    let mut analytic = collect_param_grads(&mut probe);
    analytic.extend_from_slice(dx.data());

    let theta = collect_param_values(&mut layer.clone());
    let split = theta.len();
    let full: Vec<f64> = theta.iter().chain(x.data()).copied().collect();
    let numeric = central_difference(
        &mut |t: &[f64]| {
            let mut l = layer.clone();
            set_param_values(&mut l, &t[..split]);
            let xt = Tensor::new(vec![2, 4, 2], t[split..].to_vec()).unwrap();
            weighted_sum(&l.forward(&xt).unwrap(), &cot)
        },
        &full,
        FD_STEP,
    );
    max_relative_error(&analytic, &numeric)
}

fn check_layernorm(seed: u64) -> f64 {
    let mut rng = RngState::new(seed);
    let mut layer = LayerNorm::new(4);
    layer.gamma.value = Tensor::uniform(vec![4], 0.5, 1.5, &mut rng);
    layer.beta.value = Tensor::uniform(vec![4], -0.5, 0.5, &mut rng);
    let x = Tensor::uniform(vec![3, 4], -2.0, 2.0, &mut rng);
    let cot = Tensor::uniform(vec![3, 4], -1.0, 1.0, &mut rng);

    let mut probe = layer.clone();
    probe.zero_grads();
    let dx = probe.backward(&x, &cot).expect("shapes fixed");
    let mut analytic = collect_param_grads(&mut probe);
    analytic.extend_from_slice(dx.data());

    let theta = collect_param_values(&mut layer.clone());
    let split = theta.len();
    let full: Vec<f64> = theta.iter().chain(x.data()).copied().collect();
    let numeric = central_difference(
        &mut |t: &[f64]| {
            let mut l = layer.clone();
            set_param_values(&mut l, &t[..split]);
            let xt = Tensor::new(vec![3, 4], t[split..].to_vec()).unwrap();
            weighted_sum(&l.forward(&xt).unwrap(), &cot)
        },
        &full,
        FD_STEP,
    );
    max_relative_error(&analytic, &numeric)
}

fn check_activation(seed: u64, kind: Activation) -> f64 {
    let mut rng = RngState::new(seed);
    let x = Tensor::uniform(vec![8], -2.0, 2.0, &mut rng);
    let cot = Tensor::uniform(vec![8], -1.0, 1.0, &mut rng);
    let dx = activation_backward(&x, &cot, kind).expect("same shape");
    let numeric = central_difference(
        &mut |t: &[f64]| {
            let xt = Tensor::new(vec![8], t.to_vec()).unwrap();
            weighted_sum(&activation_forward(&xt, kind), &cot)
        },
        x.data(),
        FD_STEP,
    );
    max_relative_error(dx.data(), &numeric)
}

fn check_ssm_block(seed: u64) -> f64 {
    let mut rng = RngState::new(seed);
    let block = SsmBlockParams::new(3, 2, &mut rng);
    let scan = scan_by_name("parallel").expect("registered");
    let x = Tensor::uniform(vec![1, 4, 3], -1.0, 1.0, &mut rng);
    let cot = Tensor::uniform(vec![1, 4, 3], -1.0, 1.0, &mut rng);

    let mut probe = block.clone();
    probe.zero_grads();
    let (_, cache) = probe.forward_cached(&x, scan).expect("shapes fixed");
    let dx = probe.backward(&cache, &cot).expect("shapes fixed");
    let mut analytic = collect_param_grads(&mut probe);
    analytic.extend_from_slice(dx.data());

    let theta = collect_param_values(&mut block.clone());
    let split = theta.len();
    let full: Vec<f64> = theta.iter().chain(x.data()).copied().collect();
    let numeric = central_difference(
        &mut |t: &[f64]| {
            let mut b = block.clone();
            set_param_values(&mut b, &t[..split]);
            let xt = Tensor::new(vec![1, 4, 3], t[split..].to_vec()).unwrap();
            weighted_sum(&b.forward(&xt, scan).unwrap(), &cot)
        },
        &full,
        FD_STEP,
    );
    max_relative_error(&analytic, &numeric)
}

/// Every layer kind in isolation, `instances` random instances each,
/// parameter and input gradients against central differences.
pub fn check_layer_suite(seed: u64, instances: usize, tolerance: f64) -> GradCheckReport {
    let mut report = GradCheckReport::new(tolerance);
    let run = |f: &dyn Fn(u64) -> f64| -> f64 {
        (0..instances)
            .map(|i| f(seed.wrapping_add(i as u64)))
            .fold(0.0, f64::max)
    };
    report.record("linear", run(&check_linear));
    report.record("conv1d", run(&check_conv1d));
    report.record("layernorm", run(&check_layernorm));
    report.record("activation.relu", run(&|s| {
        check_activation(s, Activation::Relu)
    }));
    report.record("activation.tanh", run(&|s| {
        check_activation(s, Activation::Tanh)
    }));
    report.record("ssm_block", run(&check_ssm_block));
    report
}

#[derive(Debug, Clone, Copy)]
pub struct ModelCheckOptions {
    pub instances: usize,
    pub tolerance: f64,
    /// Test hook: doubles the analytic hash-layer weight gradient so the
    /// check must fail.
    pub corrupt: bool,
}

impl Default for ModelCheckOptions {
    fn default() -> Self {
        ModelCheckOptions {
            instances: 10,
            tolerance: crate::nn::gradcheck::MODEL_TOLERANCE,
            corrupt: false,
        }
    }
}

/// End-to-end check of the full model through the training loss: one
/// entry per parameter tensor, max relative error across instances.
pub fn check_model_suite(config: &ModelConfig, opts: &ModelCheckOptions) -> Result<GradCheckReport> {
    config.validate()?;
    let categories = config.categories.unwrap_or(2);
    let mut worst: HashMap<String, f64> = HashMap::new();
    let mut names_in_order: Vec<String> = Vec::new();

    for instance in 0..opts.instances {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(instance as u64);
        let mut model = DmmhModel::new(cfg.clone())?;
        let mut rng = RngState::new(cfg.seed ^ 0xABCD_EF01);
        let batch = 3;
        let feats: Vec<Tensor> = cfg
            .modalities
            .iter()
            .map(|m| Tensor::uniform(vec![batch, m.dim], -1.0, 1.0, &mut rng))
            .collect();
        let refs: Vec<&Tensor> = feats.iter().collect();
        let mut label_bytes = vec![0u8; batch * categories];
        for (i, row) in label_bytes.chunks_mut(categories).enumerate() {
            row[i % categories] = 1;
        }
        let labels = LabelMatrix::new(batch, categories, label_bytes)?;

        model.zero_grads();
        let cache = model.forward_cached(&refs)?;
        let (_, dh, dlogits) =
            hashing_loss(&cache.h_relaxed, &labels, cache.logits.as_ref(), &cfg.loss)?;
        model.backward(&cache, &dh, dlogits.as_ref())?;
        let mut analytic = collect_param_grads(&mut model);
        let layout = param_layout(&mut model);
        if opts.corrupt {
            let mut offset = 0;
            for (name, len) in &layout {
                if name.ends_with("hash.weight") {
                    for g in &mut analytic[offset..offset + len] {
                        *g *= 2.0;
                    }
                }
                offset += len;
            }
        }

        let theta = collect_param_values(&mut model);
        let numeric = central_difference(
            &mut |t: &[f64]| {
                let mut m = DmmhModel::new(cfg.clone()).expect("validated config");
                set_param_values(&mut m, t);
                let cache = m.forward_cached(&refs).expect("forward");
                hashing_loss(&cache.h_relaxed, &labels, cache.logits.as_ref(), &cfg.loss)
                    .expect("loss")
                    .0
                    .total
            },
            &theta,
            FD_STEP,
        );

        let mut offset = 0;
        for (name, len) in &layout {
            let err = max_relative_error(
                &analytic[offset..offset + len],
                &numeric[offset..offset + len],
            );
            let slot = worst.entry(name.clone()).or_insert(0.0);
            if err > *slot {
                *slot = err;
            }
            if instance == 0 {
                names_in_order.push(name.clone());
            }
            offset += len;
        }
    }

    let mut report = GradCheckReport::new(opts.tolerance);
    for name in names_in_order {
        let err = worst[&name];
        report.record(name, err);
    }
    Ok(report)
}
