//! The selective-scan recurrence `h_t = a_t ⊙ h_{t-1} + b_t` and its two
//! interchangeable implementations.
//!
//! Both algorithms sit behind [`ScanAlgorithm`] and are picked by name at
//! runtime. `sequential` is the reference recurrence and stays in-tree
//! permanently as the oracle; `parallel` is the production path, a
//! work-efficient Blelloch prefix scan over the affine-map monoid
//! `(a2, b2) ∘ (a1, b1) = (a2·a1, a2·b1 + b2)`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-timestep scan operands, already discretized.
///
/// Shapes: `a_bar` and `bx` are `[batch, len, d_model, d_state]`, the
/// output map `c` is per-state `[batch, len, d_state]`, and the
/// feedthrough term `dx` is `[batch, len, d_model]`.
#[derive(Debug, Clone)]
pub struct ScanInputs {
    pub a_bar: Tensor,
    pub bx: Tensor,
    pub c: Tensor,
    pub dx: Tensor,
}

impl ScanInputs {
    pub fn new(a_bar: Tensor, bx: Tensor, c: Tensor, dx: Tensor) -> Result<Self> {
        let (batch, len, d_model, d_state) = match a_bar.shape()[..] {
            [b, l, c, n] => (b, l, c, n),
            _ => {
                return Err(Error::ShapeMismatch {
                    op: "scan_inputs",
                    expected: vec![0, 0, 0, 0],
                    actual: a_bar.shape().to_vec(),
                })
            }
        };
        if len == 0 {
            return Err(Error::invalid("scan_inputs", "sequence length must be >= 1"));
        }
        if bx.shape() != a_bar.shape() {
            return Err(Error::ShapeMismatch {
                op: "scan_inputs",
                expected: a_bar.shape().to_vec(),
                actual: bx.shape().to_vec(),
            });
        }
        if c.shape() != [batch, len, d_state] {
            return Err(Error::ShapeMismatch {
                op: "scan_inputs",
                expected: vec![batch, len, d_state],
                actual: c.shape().to_vec(),
            });
        }
        if dx.shape() != [batch, len, d_model] {
            return Err(Error::ShapeMismatch {
                op: "scan_inputs",
                expected: vec![batch, len, d_model],
                actual: dx.shape().to_vec(),
            });
        }
        for (t, name) in [(&a_bar, "a_bar"), (&bx, "bx"), (&c, "c"), (&dx, "dx")] {
            t.check_finite(&format!("scan_inputs {name}"))?;
        }
        Ok(ScanInputs { a_bar, bx, c, dx })
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        match self.a_bar.shape()[..] {
            [b, l, c, n] => (b, l, c, n),
            _ => unreachable!("validated at construction"),
        }
    }
}

/// One scan implementation. `states` returns the full hidden-state history
/// `[batch, len, d_model, d_state]`; `scan` is the public recurrence output
/// `y_t = <C_t, h_t> + (D·x)_t` of shape `[batch, len, d_model]`.
pub trait ScanAlgorithm: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    fn states(&self, inputs: &ScanInputs) -> Result<Tensor>;

    fn scan(&self, inputs: &ScanInputs) -> Result<Tensor> {
        let h = self.states(inputs)?;
        Ok(output_from_states(inputs, &h))
    }
}

/// `y[b,t,c] = sum_n C[b,t,n] * h[b,t,c,n] + dx[b,t,c]`.
pub fn output_from_states(inputs: &ScanInputs, h: &Tensor) -> Tensor {
    let (batch, len, d_model, d_state) = inputs.dims();
    let hs = h.data();
    let cs = inputs.c.data();
    let dxs = inputs.dx.data();
    let mut y = vec![0.0; batch * len * d_model];
    for b in 0..batch {
        for t in 0..len {
            let crow = &cs[(b * len + t) * d_state..(b * len + t + 1) * d_state];
            for ch in 0..d_model {
                let hoff = ((b * len + t) * d_model + ch) * d_state;
                let mut acc = 0.0;
                for (n, cn) in crow.iter().enumerate() {
                    acc += cn * hs[hoff + n];
                }
                y[(b * len + t) * d_model + ch] = acc + dxs[(b * len + t) * d_model + ch];
            }
        }
    }
    Tensor::new(vec![batch, len, d_model], y).expect("shape by construction")
}

/// Reference implementation: the recurrence unrolled in time order.
#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialScan;

impl ScanAlgorithm for SequentialScan {
    fn name(&self) -> &'static str {
        "sequential"
    }

    fn states(&self, inputs: &ScanInputs) -> Result<Tensor> {
        let (batch, len, d_model, d_state) = inputs.dims();
        let a = inputs.a_bar.data();
        let bx = inputs.bx.data();
        let lanes = d_model * d_state;
        let mut h = vec![0.0; batch * len * lanes];
        for b in 0..batch {
            let base = b * len * lanes;
            // t = 0: h_0-prev is zero
            h[base..base + lanes].copy_from_slice(&bx[base..base + lanes]);
            for t in 1..len {
                let prev = base + (t - 1) * lanes;
                let cur = base + t * lanes;
                for i in 0..lanes {
                    h[cur + i] = a[cur + i] * h[prev + i] + bx[cur + i];
                }
            }
        }
        Tensor::new(vec![batch, len, d_model, d_state], h)
    }
}

/// Work-efficient Blelloch up/down-sweep per `(batch, channel, state)`
/// lane, padded to a power of two with the monoid identity `(1, 0)`.
/// The combine tree is fixed by the sequence length, so results are
/// run-to-run identical and causal: the prefix at position `t` only ever
/// touches elements before `t`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParallelScan;

impl ScanAlgorithm for ParallelScan {
    fn name(&self) -> &'static str {
        "parallel"
    }

    fn states(&self, inputs: &ScanInputs) -> Result<Tensor> {
        let (batch, len, d_model, d_state) = inputs.dims();
        let a = inputs.a_bar.data();
        let bx = inputs.bx.data();
        let lanes = d_model * d_state;
        let stride = lanes;
        let m = len.next_power_of_two();
        let mut pa = vec![0.0; m];
        let mut pb = vec![0.0; m];
        let mut h = vec![0.0; batch * len * lanes];
        for b in 0..batch {
            for lane in 0..lanes {
                let base = b * len * lanes + lane;
                for t in 0..len {
                    pa[t] = a[base + t * stride];
                    pb[t] = bx[base + t * stride];
                }
                for t in len..m {
                    pa[t] = 1.0;
                    pb[t] = 0.0;
                }
                exclusive_scan(&mut pa, &mut pb);
                // inclusive value from exclusive prefix + original element:
                // h_t = a_t * (exclusive prefix applied to h_0 = 0) + bx_t
                for t in 0..len {
                    let ea = a[base + t * stride];
                    let eb = bx[base + t * stride];
                    h[base + t * stride] = ea * pb[t] + eb;
                }
            }
        }
        Tensor::new(vec![batch, len, d_model, d_state], h)
    }
}

/// In-place Blelloch exclusive scan over affine pairs. `pa.len()` must be a
/// power of two.
fn exclusive_scan(pa: &mut [f64], pb: &mut [f64]) {
    let m = pa.len();
    debug_assert!(m.is_power_of_two());
    // up-sweep: reduce
    let mut d = 1;
    while d < m {
        let step = d * 2;
        let mut i = 0;
        while i < m {
            let l = i + d - 1;
            let r = i + step - 1;
            // earlier (l) then later (r)
            let na = pa[r] * pa[l];
            let nb = pa[r] * pb[l] + pb[r];
            pa[r] = na;
            pb[r] = nb;
            i += step;
        }
        d = step;
    }
    // down-sweep: distribute exclusive prefixes
    pa[m - 1] = 1.0;
    pb[m - 1] = 0.0;
    let mut d = m / 2;
    while d >= 1 {
        let step = d * 2;
        let mut i = 0;
        while i < m {
            let l = i + d - 1;
            let r = i + step - 1;
            let (ta, tb) = (pa[l], pb[l]);
            let (prefix_a, prefix_b) = (pa[r], pb[r]);
            pa[l] = prefix_a;
            pb[l] = prefix_b;
            // prefix (earlier) then left-subtree reduction (later)
            pa[r] = ta * prefix_a;
            pb[r] = ta * prefix_b + tb;
            i += step;
        }
        d /= 2;
    }
}

static SEQUENTIAL: SequentialScan = SequentialScan;
static PARALLEL: ParallelScan = ParallelScan;
static REGISTRY: [&dyn ScanAlgorithm; 2] = [&SEQUENTIAL, &PARALLEL];

/// All registered scan implementations.
pub fn scan_registry() -> &'static [&'static dyn ScanAlgorithm] {
    &REGISTRY
}

pub fn scan_names() -> Vec<&'static str> {
    scan_registry().iter().map(|s| s.name()).collect()
}

pub fn scan_by_name(name: &str) -> Result<&'static dyn ScanAlgorithm> {
    scan_registry()
        .iter()
        .find(|s| s.name() == name)
        .copied()
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "scan algorithm",
            name: name.to_string(),
            available: scan_names(),
        })
}
