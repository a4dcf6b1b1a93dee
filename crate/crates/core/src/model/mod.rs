//! The multi-modal hashing network: per-modality MLP normalization,
//! dilation into token sequences, selective-SSM enhancement, additive
//! fusion, CNN deep fusion, and the tanh hash layer.

pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use loss::{hashing_loss, LossBreakdown};
pub use train::{train, TrainLog, TrainingSet};

use serde::{Deserialize, Serialize};

use crate::data::LabelMatrix;
use crate::error::{Error, Result};
use crate::hamming::{CodeBank, PackedCode};
use crate::nn::activation::{activation_backward, activation_forward, Activation};
use crate::nn::{Conv1d, LayerNorm, Linear, Param, Parameterized};
use crate::rng::RngState;
use crate::ssm::{scan_by_name, ScanAlgorithm, SsmBlockCache, SsmBlockParams};
use crate::tensor::Tensor;

pub const SUPPORTED_CODE_BITS: [usize; 4] = [16, 32, 64, 128];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModalityConfig {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CnnConfig {
    pub layers: usize,
    pub kernel_width: usize,
    /// Conv channel count; defaults to `d_model`.
    pub channels: Option<usize>,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            layers: 2,
            kernel_width: 3,
            channels: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SsmConfig {
    pub d_state: usize,
    pub blocks: usize,
    /// Scan implementation name; see `ssm::scan_names()`.
    pub scan: String,
}

impl Default for SsmConfig {
    fn default() -> Self {
        SsmConfig {
            d_state: 8,
            blocks: 1,
            scan: "parallel".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub sim: f64,
    pub quant: f64,
    pub cls: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            sim: 1.0,
            quant: 0.25,
            cls: 0.0,
        }
    }
}

fn default_d_model() -> usize {
    32
}
fn default_seq_len() -> usize {
    8
}
fn default_code_bits() -> usize {
    16
}
fn default_lr() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    30
}
fn default_batch_size() -> usize {
    32
}
fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub modalities: Vec<ModalityConfig>,
    #[serde(default = "default_d_model")]
    pub d_model: usize,
    /// Token count produced by dilation.
    #[serde(default = "default_seq_len")]
    pub seq_len: usize,
    #[serde(default = "default_code_bits")]
    pub code_bits: usize,
    #[serde(default)]
    pub cnn: CnnConfig,
    #[serde(default)]
    pub ssm: SsmConfig,
    #[serde(default)]
    pub loss: LossWeights,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Label category count; required when the classifier head is on
    /// (`loss.cls > 0`).
    #[serde(default)]
    pub categories: Option<usize>,
}

impl ModelConfig {
    pub fn channels(&self) -> usize {
        self.cnn.channels.unwrap_or(self.d_model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modalities.is_empty() {
            return Err(Error::invalid("model_config", "at least one modality required"));
        }
        for m in &self.modalities {
            if m.dim == 0 {
                return Err(Error::ZeroDim {
                    context: format!("modality `{}`", m.name),
                });
            }
        }
        let mut names: Vec<&str> = self.modalities.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.modalities.len() {
            return Err(Error::invalid("model_config", "duplicate modality names"));
        }
        if !SUPPORTED_CODE_BITS.contains(&self.code_bits) {
            return Err(Error::CodeLengthUnsupported {
                got: self.code_bits,
            });
        }
        if self.d_model == 0 || self.seq_len == 0 {
            return Err(Error::invalid("model_config", "d_model and seq_len must be >= 1"));
        }
        if self.cnn.layers == 0 {
            return Err(Error::invalid("model_config", "cnn.layers must be >= 1"));
        }
        if self.cnn.kernel_width.is_multiple_of(2) || self.cnn.kernel_width == 0 {
            return Err(Error::invalid(
                "model_config",
                format!("cnn.kernel_width {} must be odd", self.cnn.kernel_width),
            ));
        }
        if self.ssm.d_state == 0 || self.ssm.blocks == 0 {
            return Err(Error::invalid(
                "model_config",
                "ssm.d_state and ssm.blocks must be >= 1",
            ));
        }
        scan_by_name(&self.ssm.scan)?;
        for (name, w) in [
            ("sim", self.loss.sim),
            ("quant", self.loss.quant),
            ("cls", self.loss.cls),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid(
                    "model_config",
                    format!("loss.{name} must be finite and >= 0"),
                ));
            }
        }
        if self.loss.cls > 0.0 && self.categories.unwrap_or(0) == 0 {
            return Err(Error::invalid(
                "model_config",
                "loss.cls > 0 requires categories",
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::invalid("model_config", "lr must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("model_config", "batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// One modality's branch: MLP normalization (linear → relu → layernorm →
/// linear), dilation into `seq_len` tokens, and a stack of SSM blocks.
#[derive(Debug, Clone)]
pub struct ModalityPipeline {
    pub name: String,
    pub input_dim: usize,
    pub norm1: Linear,
    pub norm_ln: LayerNorm,
    pub norm2: Linear,
    pub dilate: Linear,
    pub blocks: Vec<SsmBlockParams>,
}

impl Parameterized for ModalityPipeline {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        self.norm1.visit_params(&format!("{prefix}.norm1"), f);
        self.norm_ln.visit_params(&format!("{prefix}.norm_ln"), f);
        self.norm2.visit_params(&format!("{prefix}.norm2"), f);
        self.dilate.visit_params(&format!("{prefix}.dilate"), f);
        for (i, block) in self.blocks.iter_mut().enumerate() {
            block.visit_params(&format!("{prefix}.ssm{i}"), f);
        }
    }
}

#[derive(Debug, Clone)]
struct ModalityCache {
    x: Tensor,
    z1: Tensor,
    a1: Tensor,
    n1: Tensor,
    z2: Tensor,
    block_caches: Vec<SsmBlockCache>,
}

/// Forward intermediates for one batch, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    mod_caches: Vec<ModalityCache>,
    conv_inputs: Vec<Tensor>,
    conv_pre: Vec<Tensor>,
    pooled: Tensor,
    hash_pre: Tensor,
    pub h_relaxed: Tensor,
    pub logits: Option<Tensor>,
}

#[derive(Debug, Clone)]
pub struct DmmhModel {
    config: ModelConfig,
    pipelines: Vec<ModalityPipeline>,
    /// Pipeline indices in modality-name order; fusion sums in this
    /// canonical order so permuting the config list cannot change results.
    fuse_order: Vec<usize>,
    convs: Vec<Conv1d>,
    hash: Linear,
    classifier: Option<Linear>,
    scan: &'static dyn ScanAlgorithm,
}

impl DmmhModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let scan = scan_by_name(&config.ssm.scan)?;
        let mut rng = RngState::new(config.seed);
        let d_model = config.d_model;
        let channels = config.channels();

        let pipelines: Vec<ModalityPipeline> = config
            .modalities
            .iter()
            .map(|m| ModalityPipeline {
                name: m.name.clone(),
                input_dim: m.dim,
                norm1: Linear::new(m.dim, d_model, &mut rng),
                norm_ln: LayerNorm::new(d_model),
                norm2: Linear::new(d_model, d_model, &mut rng),
                dilate: Linear::new(d_model, config.seq_len * d_model, &mut rng),
                blocks: (0..config.ssm.blocks)
                    .map(|_| SsmBlockParams::new(d_model, config.ssm.d_state, &mut rng))
                    .collect(),
            })
            .collect();

        let mut fuse_order: Vec<usize> = (0..pipelines.len()).collect();
        fuse_order.sort_by(|&a, &b| pipelines[a].name.cmp(&pipelines[b].name));

        let mut convs = Vec::with_capacity(config.cnn.layers);
        for li in 0..config.cnn.layers {
            let c_in = if li == 0 { d_model } else { channels };
            convs.push(Conv1d::new(c_in, channels, config.cnn.kernel_width, &mut rng)?);
        }

        let hash = Linear::new(channels, config.code_bits, &mut rng);
        let classifier = if config.loss.cls > 0.0 {
            let categories = config.categories.expect("validated");
            Some(Linear::new(channels, categories, &mut rng))
        } else {
            None
        };

        Ok(DmmhModel {
            config,
            pipelines,
            fuse_order,
            convs,
            hash,
            classifier,
            scan,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn scan_name(&self) -> &'static str {
        self.scan.name()
    }

    /// Replaces the scan implementation (results agree within 1e-10; the
    /// checkpoint remembers the configured name).
    pub fn set_scan(&mut self, name: &str) -> Result<()> {
        self.scan = scan_by_name(name)?;
        self.config.ssm.scan = name.to_string();
        Ok(())
    }

    /// Reorders `named` inputs into config-modality order; every declared
    /// modality must be present (no imputation).
    pub fn arrange_named<'t>(&self, named: &[(&str, &'t Tensor)]) -> Result<Vec<&'t Tensor>> {
        self.config
            .modalities
            .iter()
            .map(|m| {
                named
                    .iter()
                    .find(|(name, _)| *name == m.name)
                    .map(|(_, t)| *t)
                    .ok_or_else(|| Error::MissingModality {
                        name: m.name.clone(),
                    })
            })
            .collect()
    }

    fn mlp_normalize_cached(
        &self,
        pi: usize,
        x: &Tensor,
    ) -> Result<(Tensor, Tensor, Tensor, Tensor)> {
        let p = &self.pipelines[pi];
        let (_, dim) = x.dims2("mlp_normalize")?;
        if dim != p.input_dim {
            return Err(Error::ShapeMismatch {
                op: "mlp_normalize",
                expected: vec![x.shape()[0], p.input_dim],
                actual: x.shape().to_vec(),
            });
        }
        let z1 = p.norm1.forward(x)?;
        let a1 = activation_forward(&z1, Activation::Relu);
        let n1 = p.norm_ln.forward(&a1)?;
        let z2 = p.norm2.forward(&n1)?;
        Ok((z1, a1, n1, z2))
    }

    /// Full forward with cached intermediates. `features` are per-modality
    /// `[batch, dim]` tensors in config order.
    pub fn forward_cached(&self, features: &[&Tensor]) -> Result<ForwardCache> {
        if features.len() != self.pipelines.len() {
            return Err(Error::invalid(
                "forward",
                format!(
                    "expected {} modalities, got {}",
                    self.pipelines.len(),
                    features.len()
                ),
            ));
        }
        let batch = features
            .first()
            .map(|t| t.shape()[0])
            .ok_or_else(|| Error::invalid("forward", "no modalities"))?;
        for (t, m) in features.iter().zip(&self.config.modalities) {
            if t.shape() != [batch, m.dim] {
                return Err(Error::ShapeMismatch {
                    op: "forward",
                    expected: vec![batch, m.dim],
                    actual: t.shape().to_vec(),
                });
            }
            t.check_finite(&format!("forward input `{}`", m.name))?;
        }
        let d_model = self.config.d_model;
        let seq_len = self.config.seq_len;

        let mut mod_caches = Vec::with_capacity(self.pipelines.len());
        let mut block_outs = Vec::with_capacity(self.pipelines.len());
        for (pi, &x) in features.iter().enumerate() {
            let p = &self.pipelines[pi];
            let (z1, a1, n1, z2) = self.mlp_normalize_cached(pi, x)?;
            let tokens = p
                .dilate
                .forward(&z2)?
                .with_shape(vec![batch, seq_len, d_model])?;
            let mut cur = tokens;
            let mut block_caches = Vec::with_capacity(p.blocks.len());
            for block in &p.blocks {
                let (out, cache) = block.forward_cached(&cur, self.scan)?;
                block_caches.push(cache);
                cur = out;
            }
            block_outs.push(cur);
            mod_caches.push(ModalityCache {
                x: (*x).clone(),
                z1,
                a1,
                n1,
                z2,
                block_caches,
            });
        }

        // additive fusion in canonical name order
        let ordered: Vec<&Tensor> = self.fuse_order.iter().map(|&pi| &block_outs[pi]).collect();
        let fused = fuse_additive(&ordered)?;

        let mut conv_inputs = Vec::with_capacity(self.convs.len());
        let mut conv_pre = Vec::with_capacity(self.convs.len());
        let mut cur = fused;
        for (li, conv) in self.convs.iter().enumerate() {
            conv_inputs.push(cur.clone());
            let pre = conv.forward(&cur)?;
            conv_pre.push(pre.clone());
            cur = if li + 1 < self.convs.len() {
                activation_forward(&pre, Activation::Relu)
            } else {
                pre
            };
        }

        // mean-pool over the token axis
        let channels = self.config.channels();
        let mut pooled = vec![0.0; batch * channels];
        for b in 0..batch {
            for t in 0..seq_len {
                for c in 0..channels {
                    pooled[b * channels + c] += cur.data()[(b * seq_len + t) * channels + c];
                }
            }
        }
        for v in pooled.iter_mut() {
            *v /= seq_len as f64;
        }
        let pooled = Tensor::new(vec![batch, channels], pooled)?;

        let hash_pre = self.hash.forward(&pooled)?;
        let h_relaxed = activation_forward(&hash_pre, Activation::Tanh);
        let logits = match &self.classifier {
            Some(cls) => Some(cls.forward(&pooled)?),
            None => None,
        };

        Ok(ForwardCache {
            batch,
            mod_caches,
            conv_inputs,
            conv_pre,
            pooled,
            hash_pre,
            h_relaxed,
            logits,
        })
    }

    /// Inference forward: relaxed codes in `(-1, 1)` and binary `±1` codes.
    pub fn forward(&self, features: &[&Tensor]) -> Result<(Tensor, Tensor, Option<Tensor>)> {
        let cache = self.forward_cached(features)?;
        let h_bin = binarize(&cache.h_relaxed);
        Ok((cache.h_relaxed, h_bin, cache.logits))
    }

    /// Adjoint of `forward_cached` from cotangents of the relaxed codes
    /// (and optionally the classifier logits). Accumulates parameter
    /// gradients; input gradients are computed and dropped.
    pub fn backward(
        &mut self,
        cache: &ForwardCache,
        dh_relaxed: &Tensor,
        dlogits: Option<&Tensor>,
    ) -> Result<()> {
        let batch = cache.batch;
        let seq_len = self.config.seq_len;
        let channels = self.config.channels();
        let d_model = self.config.d_model;

        let dhash_pre = activation_backward(&cache.hash_pre, dh_relaxed, Activation::Tanh)?;
        let mut dpooled = self.hash.backward(&cache.pooled, &dhash_pre)?;
        match (&mut self.classifier, dlogits) {
            (Some(cls), Some(dl)) => {
                dpooled.add_assign(&cls.backward(&cache.pooled, dl)?)?;
            }
            (None, Some(_)) => {
                return Err(Error::invalid(
                    "backward",
                    "logit cotangent without classifier head",
                ));
            }
            _ => {}
        }

        // un-pool: every position shares the mean gradient
        let mut dcur = vec![0.0; batch * seq_len * channels];
        for b in 0..batch {
            for t in 0..seq_len {
                for c in 0..channels {
                    dcur[(b * seq_len + t) * channels + c] =
                        dpooled.data()[b * channels + c] / seq_len as f64;
                }
            }
        }
        let mut dcur = Tensor::new(vec![batch, seq_len, channels], dcur)?;

        for li in (0..self.convs.len()).rev() {
            let d_pre = if li + 1 < self.convs.len() {
                activation_backward(&cache.conv_pre[li], &dcur, Activation::Relu)?
            } else {
                dcur
            };
            dcur = self.convs[li].backward(&cache.conv_inputs[li], &d_pre)?;
        }
        let dfused = dcur;

        // fusion adjoint: identical gradient into every modality branch
        for (pi, mc) in cache.mod_caches.iter().enumerate() {
            let mut d = dfused.clone();
            let p = &mut self.pipelines[pi];
            for (block, bc) in p.blocks.iter_mut().zip(&mc.block_caches).rev() {
                d = block.backward(bc, &d)?;
            }
            let d_flat = d.with_shape(vec![batch, seq_len * d_model])?;
            let dz2 = p.dilate.backward(&mc.z2, &d_flat)?;
            let dn1 = p.norm2.backward(&mc.n1, &dz2)?;
            let da1 = p.norm_ln.backward(&mc.a1, &dn1)?;
            let dz1 = activation_backward(&mc.z1, &da1, Activation::Relu)?;
            let _dx = p.norm1.backward(&mc.x, &dz1)?;
        }
        Ok(())
    }

    /// Encodes feature rows into a packed code bank. Forward-only, safe to
    /// parallelize; chunk outputs land in disjoint slots so results do not
    /// depend on thread count.
    pub fn encode(
        &self,
        features: &[&Tensor],
        labels: &LabelMatrix,
        ids: &[u64],
    ) -> Result<CodeBank> {
        use rayon::prelude::*;

        let n = labels.n();
        if ids.len() != n {
            return Err(Error::ShapeMismatch {
                op: "encode",
                expected: vec![n],
                actual: vec![ids.len()],
            });
        }
        for t in features {
            if t.shape()[0] != n {
                return Err(Error::ShapeMismatch {
                    op: "encode",
                    expected: vec![n],
                    actual: t.shape().to_vec(),
                });
            }
        }
        const CHUNK: usize = 64;
        let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
        let chunk_rows: Vec<Result<Vec<Vec<u64>>>> = starts
            .par_iter()
            .map(|&start| {
                let stop = (start + CHUNK).min(n);
                let idx: Vec<u64> = (start as u64..stop as u64).collect();
                let slices: Vec<Tensor> = features
                    .iter()
                    .map(|t| gather_rows(t, &idx))
                    .collect();
                let refs: Vec<&Tensor> = slices.iter().collect();
                let (_, h_bin, _) = self.forward(&refs)?;
                let k = self.config.code_bits;
                (0..stop - start)
                    .map(|r| {
                        let row = &h_bin.data()[r * k..(r + 1) * k];
                        Ok(PackedCode::pack(row)?.words)
                    })
                    .collect()
            })
            .collect();
        let mut rows = Vec::with_capacity(n);
        for chunk in chunk_rows {
            rows.extend(chunk?);
        }
        CodeBank::new(self.config.code_bits, rows, labels.clone(), ids.to_vec())
    }
}

impl Parameterized for DmmhModel {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        for p in self.pipelines.iter_mut() {
            let name = format!("{prefix}modality.{}", p.name);
            p.visit_params(&name, f);
        }
        for (i, conv) in self.convs.iter_mut().enumerate() {
            conv.visit_params(&format!("{prefix}cnn{i}"), f);
        }
        self.hash.visit_params(&format!("{prefix}hash"), f);
        if let Some(cls) = &mut self.classifier {
            cls.visit_params(&format!("{prefix}classifier"), f);
        }
    }
}

/// Additive fusion: elementwise sum of per-modality token tensors.
/// Exactly commutative for two operands; the model calls it in canonical
/// name order so any modality count stays permutation-invariant.
pub fn fuse_additive(tokens: &[&Tensor]) -> Result<Tensor> {
    let first = tokens
        .first()
        .ok_or_else(|| Error::invalid("fuse_additive", "at least one modality required"))?;
    let mut fused = (*first).clone();
    for t in &tokens[1..] {
        fused.add_assign(t).map_err(|_| Error::ShapeMismatch {
            op: "fuse_additive",
            expected: first.shape().to_vec(),
            actual: t.shape().to_vec(),
        })?;
    }
    Ok(fused)
}

/// `sign` with `sign(0) := +1`, elementwise.
pub fn binarize(h_relaxed: &Tensor) -> Tensor {
    h_relaxed.map(|v| if v >= 0.0 { 1.0 } else { -1.0 })
}

/// Gathers rows of a `[n, dim]` tensor into `[idx.len(), dim]`.
pub fn gather_rows(t: &Tensor, idx: &[u64]) -> Tensor {
    let dim = t.shape()[1];
    let mut data = Vec::with_capacity(idx.len() * dim);
    for &i in idx {
        let i = i as usize;
        data.extend_from_slice(&t.data()[i * dim..(i + 1) * dim]);
    }
    Tensor::new(vec![idx.len(), dim], data).expect("shape by construction")
}
