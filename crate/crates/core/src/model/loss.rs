//! Training objective: in-batch pairwise code similarity + quantization
//! penalty + optional classification head.
//!
//! The pair term drives `h_i·h_j / k` toward `s_ij ∈ {+1, -1}` (share a
//! label or not) over all in-batch pairs `i < j`; the quantization term
//! `mean((|h| - 1)^2)` pushes relaxed codes toward `±1` so binarization
//! loses little; the optional head is binary cross-entropy per category.

use crate::data::LabelMatrix;
use crate::error::{Error, Result};
use crate::metrics::relevant;
use crate::model::LossWeights;
use crate::nn::activation::sigmoid;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown {
    pub total: f64,
    pub sim: f64,
    pub quant: f64,
    pub cls: f64,
}

/// Loss value plus analytic cotangents for the relaxed codes and, when a
/// classifier head is present, the logits.
pub fn hashing_loss(
    h: &Tensor,
    labels: &LabelMatrix,
    logits: Option<&Tensor>,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Tensor, Option<Tensor>)> {
    let (batch, k) = h.dims2("hashing_loss")?;
    if labels.n() != batch {
        return Err(Error::ShapeMismatch {
            op: "hashing_loss",
            expected: vec![batch],
            actual: vec![labels.n()],
        });
    }
    let hs = h.data();
    let mut dh = vec![0.0; hs.len()];

    // pairwise similarity over all i < j
    let pairs = batch.saturating_sub(1) * batch / 2;
    let mut sim = 0.0;
    if pairs > 0 && weights.sim > 0.0 {
        let norm = 1.0 / pairs as f64;
        for i in 0..batch {
            for j in (i + 1)..batch {
                let target = if relevant(labels.row(i), labels.row(j)) {
                    1.0
                } else {
                    -1.0
                };
                let hi = &hs[i * k..(i + 1) * k];
                let hj = &hs[j * k..(j + 1) * k];
                let dot: f64 = hi.iter().zip(hj).map(|(a, b)| a * b).sum();
                let resid = dot / k as f64 - target;
                sim += norm * resid * resid;
                let coef = weights.sim * norm * 2.0 * resid / k as f64;
                for b in 0..k {
                    dh[i * k + b] += coef * hj[b];
                    dh[j * k + b] += coef * hi[b];
                }
            }
        }
    }

    // quantization: mean((|h| - 1)^2), sign(0) := +1
    let mut quant = 0.0;
    if !hs.is_empty() {
        let norm = 1.0 / hs.len() as f64;
        for (i, &v) in hs.iter().enumerate() {
            let gap = v.abs() - 1.0;
            quant += norm * gap * gap;
            let sign = if v >= 0.0 { 1.0 } else { -1.0 };
            dh[i] += weights.quant * norm * 2.0 * gap * sign;
        }
    }

    // classification: binary cross-entropy with logits per category
    let mut cls = 0.0;
    let dlogits = match logits {
        Some(l) => {
            let (lb, lc) = l.dims2("hashing_loss logits")?;
            if lb != batch || lc != labels.categories() {
                return Err(Error::ShapeMismatch {
                    op: "hashing_loss logits",
                    expected: vec![batch, labels.categories()],
                    actual: l.shape().to_vec(),
                });
            }
            let ls = l.data();
            let mut dl = vec![0.0; ls.len()];
            let norm = 1.0 / ls.len() as f64;
            for i in 0..batch {
                let row = labels.row(i);
                for c in 0..lc {
                    let x = ls[i * lc + c];
                    let y = row[c] as f64;
                    cls += norm * (x.max(0.0) - x * y + (-x.abs()).exp().ln_1p());
                    dl[i * lc + c] = weights.cls * norm * (sigmoid(x) - y);
                }
            }
            Some(Tensor::new(vec![batch, lc], dl)?)
        }
        None => None,
    };

    let total = weights.sim * sim + weights.quant * quant + weights.cls * cls;
    let breakdown = LossBreakdown {
        total,
        sim,
        quant,
        cls,
    };
    Ok((breakdown, Tensor::new(vec![batch, k], dh)?, dlogits))
}
