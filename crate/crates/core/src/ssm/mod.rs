//! Selective state-space block.
//!
//! Per token the block derives an input-dependent step size Δ (softplus),
//! input map B and output map C, discretizes the per-channel diagonal
//! dynamics (zero-order hold on A, Euler on B), runs the scan, gates the
//! result with `silu(gate_proj(x))`, projects, and adds the input back as
//! a residual, so the block enhances rather than replaces its input.

pub mod scan;

pub use scan::{
    output_from_states, scan_by_name, scan_names, scan_registry, ParallelScan, ScanAlgorithm,
    ScanInputs, SequentialScan,
};

use crate::error::{Error, Result};
use crate::nn::activation::{
    sigmoid, silu, silu_derivative, softplus, softplus_inverse,
};
use crate::nn::{Linear, Param, Parameterized};
use crate::rng::RngState;
use crate::tensor::Tensor;

/// Zero-order-hold discretization of diagonal dynamics.
///
/// `a` is `[d_model, d_state]` with strictly negative entries, `b` is the
/// per-state input map `[d_state]`, `delta` the per-channel step
/// `[d_model]`. Returns `a_bar = exp(delta * a)` and `b_bar = delta * b`,
/// both `[d_model, d_state]`. With `a < 0` and `delta > 0` every `a_bar`
/// entry lands in `(0, 1)`.
pub fn discretize_zoh(a: &Tensor, b: &Tensor, delta: &Tensor) -> Result<(Tensor, Tensor)> {
    let (d_model, d_state) = a.dims2("discretize_zoh")?;
    if b.shape() != [d_state] || delta.shape() != [d_model] {
        return Err(Error::ShapeMismatch {
            op: "discretize_zoh",
            expected: vec![d_model, d_state],
            actual: b.shape().iter().chain(delta.shape()).copied().collect(),
        });
    }
    if let Some(i) = delta.data().iter().position(|&d| d <= 0.0) {
        return Err(Error::invalid(
            "discretize_zoh",
            format!("delta must be positive, got {} at channel {i}", delta.data()[i]),
        ));
    }
    let mut a_bar = vec![0.0; d_model * d_state];
    let mut b_bar = vec![0.0; d_model * d_state];
    for c in 0..d_model {
        let dt = delta.data()[c];
        for n in 0..d_state {
            a_bar[c * d_state + n] = (dt * a.data()[c * d_state + n]).exp();
            b_bar[c * d_state + n] = dt * b.data()[n];
        }
    }
    Ok((
        Tensor::new(vec![d_model, d_state], a_bar)?,
        Tensor::new(vec![d_model, d_state], b_bar)?,
    ))
}

/// Learnable parameters of one selective-SSM block.
#[derive(Debug, Clone)]
pub struct SsmBlockParams {
    d_model: usize,
    d_state: usize,
    /// `A = -exp(a_log)` keeps the state matrix strictly negative.
    pub a_log: Param,
    pub delta_proj: Linear,
    pub b_proj: Linear,
    pub c_proj: Linear,
    /// Per-channel feedthrough D.
    pub feedthrough: Param,
    pub gate_proj: Linear,
    pub out_proj: Linear,
}

/// Intermediates captured by the forward pass for the adjoint.
#[derive(Debug, Clone)]
pub struct SsmBlockCache {
    batch: usize,
    len: usize,
    xf: Tensor,       // [batch*len, d_model]
    dt_raw: Tensor,   // [batch*len, d_model]
    delta: Tensor,    // [batch*len, d_model]
    b_rows: Tensor,   // [batch*len, d_state]
    inputs: ScanInputs,
    h: Tensor,        // [batch, len, d_model, d_state]
    y_scan: Tensor,   // [batch, len, d_model]
    g_raw: Tensor,    // [batch*len, d_model]
    v: Tensor,        // [batch*len, d_model]
}

impl SsmBlockParams {
    pub fn new(d_model: usize, d_state: usize, rng: &mut RngState) -> Self {
        // S4D-real style init: A_n = -(n+1) per channel.
        let mut a_log = Vec::with_capacity(d_model * d_state);
        for _ in 0..d_model {
            for n in 0..d_state {
                a_log.push(((n + 1) as f64).ln());
            }
        }
        let mut delta_proj = Linear::new(d_model, d_model, rng);
        // bias so softplus lands in [0.01, 0.1] at init, keeping a_bar near 1
        for b in delta_proj.bias.value.data_mut() {
            let dt = 0.01 * 10f64.powf(rng.next_f64());
            *b = softplus_inverse(dt);
        }
        SsmBlockParams {
            d_model,
            d_state,
            a_log: Param::new(Tensor::new(vec![d_model, d_state], a_log).expect("shape")),
            delta_proj,
            b_proj: Linear::new(d_model, d_state, rng),
            c_proj: Linear::new(d_model, d_state, rng),
            feedthrough: Param::new(Tensor::filled(vec![d_model], 1.0)),
            gate_proj: Linear::new(d_model, d_model, rng),
            out_proj: Linear::new(d_model, d_model, rng),
        }
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn d_state(&self) -> usize {
        self.d_state
    }

    /// `-exp(a_log)` as a tensor.
    fn a_matrix(&self) -> Tensor {
        self.a_log.value.map(|v| -v.exp())
    }

    pub fn forward(&self, x: &Tensor, algo: &dyn ScanAlgorithm) -> Result<Tensor> {
        self.forward_cached(x, algo).map(|(y, _)| y)
    }

    pub fn forward_cached(
        &self,
        x: &Tensor,
        algo: &dyn ScanAlgorithm,
    ) -> Result<(Tensor, SsmBlockCache)> {
        let (batch, len, d_model) = x.dims3("ssm_block_forward")?;
        if d_model != self.d_model {
            return Err(Error::ShapeMismatch {
                op: "ssm_block_forward",
                expected: vec![batch, len, self.d_model],
                actual: x.shape().to_vec(),
            });
        }
        x.check_finite("ssm_block_forward input")?;
        let rows = batch * len;
        let xf = x.clone().with_shape(vec![rows, d_model])?;

        let dt_raw = self.delta_proj.forward(&xf)?;
        // softplus underflows to +0 beyond the exp range; keep delta
        // strictly positive as the discretization requires
        let delta = dt_raw.map(|v| softplus(v).max(1e-300));
        let b_rows = self.b_proj.forward(&xf)?;
        let c_rows = self.c_proj.forward(&xf)?;

        let a = self.a_matrix();
        let n_state = self.d_state;
        let mut a_bar = vec![0.0; rows * d_model * n_state];
        let mut bx = vec![0.0; rows * d_model * n_state];
        for r in 0..rows {
            let delta_row =
                Tensor::new(vec![d_model], delta.data()[r * d_model..(r + 1) * d_model].to_vec())?;
            let b_row =
                Tensor::new(vec![n_state], b_rows.data()[r * n_state..(r + 1) * n_state].to_vec())?;
            let (ab, bb) = discretize_zoh(&a, &b_row, &delta_row)?;
            let dst = r * d_model * n_state;
            a_bar[dst..dst + d_model * n_state].copy_from_slice(ab.data());
            for c in 0..d_model {
                let xv = xf.data()[r * d_model + c];
                for n in 0..n_state {
                    bx[dst + c * n_state + n] = bb.data()[c * n_state + n] * xv;
                }
            }
        }
        let d = self.feedthrough.value.data();
        let mut dx_feed = vec![0.0; rows * d_model];
        for r in 0..rows {
            for c in 0..d_model {
                dx_feed[r * d_model + c] = d[c] * xf.data()[r * d_model + c];
            }
        }
        let inputs = ScanInputs::new(
            Tensor::new(vec![batch, len, d_model, n_state], a_bar)?,
            Tensor::new(vec![batch, len, d_model, n_state], bx)?,
            c_rows.clone().with_shape(vec![batch, len, n_state])?,
            Tensor::new(vec![batch, len, d_model], dx_feed)?,
        )?;

        let h = algo.states(&inputs)?;
        let y_scan = output_from_states(&inputs, &h);

        let g_raw = self.gate_proj.forward(&xf)?;
        let v: Vec<f64> = y_scan
            .data()
            .iter()
            .zip(g_raw.data())
            .map(|(y, g)| y * silu(*g))
            .collect();
        let v = Tensor::new(vec![rows, d_model], v)?;
        let o = self.out_proj.forward(&v)?;

        let out: Vec<f64> = o.data().iter().zip(xf.data()).map(|(a, b)| a + b).collect();
        let out = Tensor::new(vec![batch, len, d_model], out)?;

        let cache = SsmBlockCache {
            batch,
            len,
            xf,
            dt_raw,
            delta,
            b_rows,
            inputs,
            h,
            y_scan,
            g_raw,
            v,
        };
        Ok((out, cache))
    }

    /// Adjoint of `forward_cached`: accumulates parameter gradients and
    /// returns the input gradient. The scan adjoint runs the reverse-time
    /// recurrence `dh_t = dh_direct_t + a_bar_{t+1} ⊙ dh_{t+1}`.
    pub fn backward(&mut self, cache: &SsmBlockCache, dy: &Tensor) -> Result<Tensor> {
        let (batch, len, d_model) = (cache.batch, cache.len, self.d_model);
        if dy.shape() != [batch, len, d_model] {
            return Err(Error::ShapeMismatch {
                op: "ssm_block_backward",
                expected: vec![batch, len, d_model],
                actual: dy.shape().to_vec(),
            });
        }
        let rows = batch * len;
        let n_state = self.d_state;
        let lanes = d_model * n_state;
        let dy_flat = dy.clone().with_shape(vec![rows, d_model])?;

        // residual path
        let mut dx_acc = dy_flat.clone();

        // output projection
        let dv = self.out_proj.backward(&cache.v, &dy_flat)?;

        // gate
        let mut dy_scan = vec![0.0; rows * d_model];
        let mut dg_raw = vec![0.0; rows * d_model];
        for i in 0..dy_scan.len() {
            let g = cache.g_raw.data()[i];
            dy_scan[i] = dv.data()[i] * silu(g);
            dg_raw[i] = dv.data()[i] * cache.y_scan.data()[i] * silu_derivative(g);
        }
        let dg_raw = Tensor::new(vec![rows, d_model], dg_raw)?;
        dx_acc.add_assign(&self.gate_proj.backward(&cache.xf, &dg_raw)?)?;

        // emission y = <C, h> + D*x
        let dfeed = self.feedthrough.grad.data_mut();
        let feed = self.feedthrough.value.data();
        let cs = cache.inputs.c.data();
        let hs = cache.h.data();
        let mut dc_rows = vec![0.0; rows * n_state];
        let mut dh_direct = vec![0.0; rows * lanes];
        {
            let dxa = dx_acc.data_mut();
            for r in 0..rows {
                for c in 0..d_model {
                    let g = dy_scan[r * d_model + c];
                    if g == 0.0 {
                        continue;
                    }
                    let xv = cache.xf.data()[r * d_model + c];
                    dfeed[c] += g * xv;
                    dxa[r * d_model + c] += g * feed[c];
                    let hoff = r * lanes + c * n_state;
                    for n in 0..n_state {
                        dc_rows[r * n_state + n] += g * hs[hoff + n];
                        dh_direct[hoff + n] += g * cs[r * n_state + n];
                    }
                }
            }
        }

        // reverse-time scan adjoint per batch element
        let a_bar = cache.inputs.a_bar.data();
        let bx_len = rows * lanes;
        let mut da_bar = vec![0.0; bx_len];
        let mut dbx = vec![0.0; bx_len];
        for b in 0..batch {
            let base = b * len * lanes;
            let mut dh_run = vec![0.0; lanes];
            for t in (0..len).rev() {
                let cur = base + t * lanes;
                for i in 0..lanes {
                    let mut dh = dh_direct[cur + i];
                    if t + 1 < len {
                        dh += a_bar[cur + lanes + i] * dh_run[i];
                    }
                    dh_run[i] = dh;
                    // h_{t-1}
                    let h_prev = if t == 0 { 0.0 } else { hs[cur - lanes + i] };
                    da_bar[cur + i] = dh * h_prev;
                    dbx[cur + i] = dh;
                }
            }
        }

        // discretization adjoint
        let a = self.a_matrix();
        let da_log = self.a_log.grad.data_mut();
        let mut ddelta = vec![0.0; rows * d_model];
        let mut db_rows = vec![0.0; rows * n_state];
        {
            let dxa = dx_acc.data_mut();
            for r in 0..rows {
                for c in 0..d_model {
                    let dt = cache.delta.data()[r * d_model + c];
                    let xv = cache.xf.data()[r * d_model + c];
                    let off = r * lanes + c * n_state;
                    let mut dd = 0.0;
                    let mut dx_term = 0.0;
                    for n in 0..n_state {
                        let av = a.data()[c * n_state + n];
                        let abar = a_bar[off + n];
                        let bn = cache.b_rows.data()[r * n_state + n];
                        // a_bar = exp(dt * a)
                        dd += da_bar[off + n] * abar * av;
                        da_log[c * n_state + n] += da_bar[off + n] * abar * dt * av;
                        // bx = dt * b_n * x_c
                        dd += dbx[off + n] * bn * xv;
                        db_rows[r * n_state + n] += dbx[off + n] * dt * xv;
                        dx_term += dbx[off + n] * dt * bn;
                    }
                    ddelta[r * d_model + c] = dd;
                    dxa[r * d_model + c] += dx_term;
                }
            }
        }

        // softplus and the three projections
        let mut d_dt_raw = vec![0.0; rows * d_model];
        for i in 0..d_dt_raw.len() {
            d_dt_raw[i] = ddelta[i] * sigmoid(cache.dt_raw.data()[i]);
        }
        let d_dt_raw = Tensor::new(vec![rows, d_model], d_dt_raw)?;
        dx_acc.add_assign(&self.delta_proj.backward(&cache.xf, &d_dt_raw)?)?;
        let db_rows = Tensor::new(vec![rows, n_state], db_rows)?;
        dx_acc.add_assign(&self.b_proj.backward(&cache.xf, &db_rows)?)?;
        let dc_rows = Tensor::new(vec![rows, n_state], dc_rows)?;
        dx_acc.add_assign(&self.c_proj.backward(&cache.xf, &dc_rows)?)?;

        dx_acc.with_shape(vec![batch, len, d_model])
    }
}

impl Parameterized for SsmBlockParams {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        f(format!("{prefix}.a_log"), &mut self.a_log);
        self.delta_proj.visit_params(&format!("{prefix}.delta_proj"), f);
        self.b_proj.visit_params(&format!("{prefix}.b_proj"), f);
        self.c_proj.visit_params(&format!("{prefix}.c_proj"), f);
        f(format!("{prefix}.feedthrough"), &mut self.feedthrough);
        self.gate_proj.visit_params(&format!("{prefix}.gate_proj"), f);
        self.out_proj.visit_params(&format!("{prefix}.out_proj"), f);
    }
}
