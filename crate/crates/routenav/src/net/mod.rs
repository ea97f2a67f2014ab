//! Recurrent actor-critic core with exact manual gradients.
//!
//! The architecture is a linear 512-unit encoder over the bimodal
//! observation, a 256-unit LSTM that also consumes the previous action as a
//! one-hot vector, and linear policy/value heads. Everything runs in f64;
//! gradient checks at 1e-4 relative tolerance are not reliable in f32.

pub mod adam;
pub mod backward;
pub mod conv;
pub mod gradcheck;
pub mod ops;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;


use crate::container;
use crate::env::{Action, N_ACTIONS};
use crate::error::{Error, Result};
use crate::rng::{label, stream_rng};

pub use conv::{conv_forward, ConvEncoderParams, ConvGrads};

/// Encoder width fixed by the architecture.
pub const ENC_DIM: usize = 512;
/// LSTM hidden width fixed by the architecture.
pub const HIDDEN_DIM: usize = 256;

const CHECKPOINT_MAGIC: &[u8; 4] = b"CLCK";
const CHECKPOINT_VERSION: u32 = 1;

/// All trainable parameters of the agent.
///
/// Weight layout is row-major `[out][in]`. The LSTM stacks its four gates
/// (input, forget, output, candidate) into one `[4H × (E+A+H)]` matrix whose
/// per-gate input is `concat(encoder_out, prev_action_onehot, h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    /// Visual feature dimensionality d (the observation is d+1 long).
    pub visual_dim: usize,
    pub obs_dim: usize,
    pub enc_dim: usize,
    pub hidden_dim: usize,
    pub enc_w: Vec<f64>,
    pub enc_b: Vec<f64>,
    pub lstm_w: Vec<f64>,
    pub lstm_b: Vec<f64>,
    pub pi_w: Vec<f64>,
    pub pi_b: Vec<f64>,
    pub v_w: Vec<f64>,
    pub v_b: Vec<f64>,
    /// Present only for the raw-image agent.
    pub conv: Option<ConvEncoderParams>,
}

/// Gradients mirror the parameter shapes exactly.
pub type Gradients = PolicyParams;

impl PolicyParams {
    /// LSTM input width: encoder output, one-hot previous action, hidden.
    pub fn lstm_in_dim(&self) -> usize {
        self.enc_dim + N_ACTIONS + self.hidden_dim
    }

    pub fn zeros(visual_dim: usize, enc_dim: usize, hidden_dim: usize) -> Self {
        let obs_dim = visual_dim + 1;
        let lstm_in = enc_dim + N_ACTIONS + hidden_dim;
        PolicyParams {
            visual_dim,
            obs_dim,
            enc_dim,
            hidden_dim,
            enc_w: vec![0.0; enc_dim * obs_dim],
            enc_b: vec![0.0; enc_dim],
            lstm_w: vec![0.0; 4 * hidden_dim * lstm_in],
            lstm_b: vec![0.0; 4 * hidden_dim],
            pi_w: vec![0.0; N_ACTIONS * hidden_dim],
            pi_b: vec![0.0; N_ACTIONS],
            v_w: vec![0.0; hidden_dim],
            v_b: vec![0.0; 1],
            conv: None,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(self.visual_dim, self.enc_dim, self.hidden_dim);
        if self.conv.is_some() {
            z.conv = Some(ConvEncoderParams::zeros());
        }
        z
    }

    /// Scaled-uniform init (1/√fan_in per tensor), forget-gate bias 1.0,
    /// zero-initialized heads, with explicit widths (tests use small ones).
    pub fn init_with_dims(
        visual_dim: usize,
        enc_dim: usize,
        hidden_dim: usize,
        seed: u64,
    ) -> Self {
        let mut p = Self::zeros(visual_dim, enc_dim, hidden_dim);
        let mut rng = stream_rng(seed, &[label::PARAM_INIT]);
        let enc_scale = 1.0 / (p.obs_dim as f64).sqrt();
        for w in p.enc_w.iter_mut() {
            *w = rng.gen_range(-enc_scale..enc_scale);
        }
        let lstm_scale = 1.0 / (p.lstm_in_dim() as f64).sqrt();
        for w in p.lstm_w.iter_mut() {
            *w = rng.gen_range(-lstm_scale..lstm_scale);
        }
        // Forget gate rows are H..2H; bias 1.0 keeps memory open at init.
        for b in p.lstm_b[hidden_dim..2 * hidden_dim].iter_mut() {
            *b = 1.0;
        }
        p
    }

    /// Attach a freshly initialized conv encoder (raw-image agent). The
    /// visual dimension must equal the conv feature width.
    pub fn with_conv_encoder(mut self, seed: u64) -> Result<Self> {
        if self.visual_dim != conv::CONV_FEATURE_DIM {
            return Err(Error::Shape(format!(
                "conv encoder produces {} features but visual_dim is {}",
                conv::CONV_FEATURE_DIM,
                self.visual_dim
            )));
        }
        let mut rng = stream_rng(seed, &[label::PARAM_INIT, 0xc0]);
        self.conv = Some(ConvEncoderParams::init(&mut rng));
        Ok(self)
    }

    /// Named views over every tensor, in checkpoint order.
    pub fn named_tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut v: Vec<(&'static str, &[f64])> = vec![
            ("enc_w", &self.enc_w),
            ("enc_b", &self.enc_b),
            ("lstm_w", &self.lstm_w),
            ("lstm_b", &self.lstm_b),
            ("pi_w", &self.pi_w),
            ("pi_b", &self.pi_b),
            ("v_w", &self.v_w),
            ("v_b", &self.v_b),
        ];
        if let Some(c) = &self.conv {
            v.push(("conv1_w", &c.conv1.w));
            v.push(("conv1_b", &c.conv1.b));
            v.push(("conv2_w", &c.conv2.w));
            v.push(("conv2_b", &c.conv2.b));
            v.push(("fc_w", &c.fc_w));
            v.push(("fc_b", &c.fc_b));
        }
        v
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut v: Vec<(&'static str, &mut [f64])> = vec![
            ("enc_w", self.enc_w.as_mut_slice()),
            ("enc_b", self.enc_b.as_mut_slice()),
            ("lstm_w", self.lstm_w.as_mut_slice()),
            ("lstm_b", self.lstm_b.as_mut_slice()),
            ("pi_w", self.pi_w.as_mut_slice()),
            ("pi_b", self.pi_b.as_mut_slice()),
            ("v_w", self.v_w.as_mut_slice()),
            ("v_b", self.v_b.as_mut_slice()),
        ];
        if let Some(c) = &mut self.conv {
            v.push(("conv1_w", c.conv1.w.as_mut_slice()));
            v.push(("conv1_b", c.conv1.b.as_mut_slice()));
            v.push(("conv2_w", c.conv2.w.as_mut_slice()));
            v.push(("conv2_b", c.conv2.b.as_mut_slice()));
            v.push(("fc_w", c.fc_w.as_mut_slice()));
            v.push(("fc_b", c.fc_b.as_mut_slice()));
        }
        v
    }

    pub fn n_parameters(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Accumulate `other` (same shapes) into self.
    pub fn add_assign(&mut self, other: &PolicyParams) {
        let mut mine = self.named_tensors_mut();
        let theirs = other.named_tensors();
        debug_assert_eq!(mine.len(), theirs.len());
        for ((_, a), (_, b)) in mine.iter_mut().zip(theirs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.named_tensors_mut() {
            for v in t {
                *v *= factor;
            }
        }
    }

    /// Write the checkpoint container: magic "CLCK", u32 version=1, u32 d,
    /// u32 flags (bit 0: conv tensors present), then all tensors as f64
    /// little-endian in `named_tensors` order.
    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        (|| -> std::io::Result<()> {
            container::write_magic(&mut w, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
            container::write_u32(&mut w, self.visual_dim as u32)?;
            container::write_u32(&mut w, if self.conv.is_some() { 1 } else { 0 })?;
            for (_, t) in self.named_tensors() {
                container::write_f64_slice(&mut w, t)?;
            }
            w.flush()
        })()
        .map_err(|e| Error::io(path, e))
    }

    pub fn read_checkpoint(path: &Path) -> Result<PolicyParams> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        container::read_magic(&mut r, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let visual_dim = container::read_u32(&mut r, "visual_dim")? as usize;
        let flags = container::read_u32(&mut r, "flags")?;
        let mut p = PolicyParams::zeros(visual_dim, ENC_DIM, HIDDEN_DIM);
        if flags & 1 != 0 {
            p.conv = Some(ConvEncoderParams::zeros());
        }
        for (name, t) in p.named_tensors_mut() {
            let data = container::read_f64_vec(&mut r, t.len(), name)?;
            t.copy_from_slice(&data);
        }
        container::expect_eof(&mut r, "tensors")?;
        Ok(p)
    }
}

/// Standard-width parameters for visual dimension `d`, deterministic per
/// seed.
pub fn init_params(visual_dim: usize, seed: u64) -> Result<PolicyParams> {
    if visual_dim < 1 {
        return Err(Error::InvalidConfig("visual_dim must be >= 1".into()));
    }
    Ok(PolicyParams::init_with_dims(visual_dim, ENC_DIM, HIDDEN_DIM, seed))
}

/// Recurrent state threaded between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Hidden {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    /// One-hot previous action; zeros at episode start.
    pub prev_action: Vec<f64>,
}

impl Hidden {
    pub fn zeros(hidden_dim: usize) -> Self {
        Hidden {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
            prev_action: vec![0.0; N_ACTIONS],
        }
    }

    pub fn set_prev_action(&mut self, action: Action) {
        self.prev_action.iter_mut().for_each(|v| *v = 0.0);
        self.prev_action[action.code()] = 1.0;
    }
}

/// Batched recurrent state for a bank of sequences stepping in lockstep.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenBatch {
    pub batch: usize,
    pub hidden_dim: usize,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub prev_action: Vec<f64>,
}

impl HiddenBatch {
    pub fn zeros(batch: usize, hidden_dim: usize) -> Self {
        HiddenBatch {
            batch,
            hidden_dim,
            h: vec![0.0; batch * hidden_dim],
            c: vec![0.0; batch * hidden_dim],
            prev_action: vec![0.0; batch * N_ACTIONS],
        }
    }

    pub fn reset_slot(&mut self, slot: usize) {
        let h = self.hidden_dim;
        self.h[slot * h..(slot + 1) * h].fill(0.0);
        self.c[slot * h..(slot + 1) * h].fill(0.0);
        self.prev_action[slot * N_ACTIONS..(slot + 1) * N_ACTIONS].fill(0.0);
    }

    pub fn set_prev_action(&mut self, slot: usize, action: Action) {
        let row = &mut self.prev_action[slot * N_ACTIONS..(slot + 1) * N_ACTIONS];
        row.fill(0.0);
        row[action.code()] = 1.0;
    }

    pub fn slot(&self, slot: usize) -> Hidden {
        let h = self.hidden_dim;
        Hidden {
            h: self.h[slot * h..(slot + 1) * h].to_vec(),
            c: self.c[slot * h..(slot + 1) * h].to_vec(),
            prev_action: self.prev_action[slot * N_ACTIONS..(slot + 1) * N_ACTIONS].to_vec(),
        }
    }

    pub fn set_slot(&mut self, slot: usize, hidden: &Hidden) {
        let h = self.hidden_dim;
        self.h[slot * h..(slot + 1) * h].copy_from_slice(&hidden.h);
        self.c[slot * h..(slot + 1) * h].copy_from_slice(&hidden.c);
        self.prev_action[slot * N_ACTIONS..(slot + 1) * N_ACTIONS]
            .copy_from_slice(&hidden.prev_action);
    }
}

/// Post-activation LSTM quantities for one batched step; the backward pass
/// consumes these.
#[derive(Debug, Clone)]
pub struct StepActivations {
    /// LSTM input `concat(e, prev_a, h_in)`, [B × lstm_in].
    pub z_full: Vec<f64>,
    /// Gate activations σ/tanh, each [B × H].
    pub gate_i: Vec<f64>,
    pub gate_f: Vec<f64>,
    pub gate_o: Vec<f64>,
    pub cand: Vec<f64>,
    /// Cell state entering the step, [B × H].
    pub c_in: Vec<f64>,
    /// New cell state and its tanh, [B × H].
    pub c_out: Vec<f64>,
    pub tanh_c: Vec<f64>,
    /// New hidden state, [B × H].
    pub h_out: Vec<f64>,
    pub logits: Vec<f64>,
    pub values: Vec<f64>,
}

/// One batched forward step. Observations are bimodal rows [B × obs_dim];
/// the hidden batch is advanced in place. Returns the activations.
pub fn forward_step_batch(
    p: &PolicyParams,
    obs: &[f64],
    state: &mut HiddenBatch,
) -> Result<StepActivations> {
    let b = state.batch;
    if obs.len() != b * p.obs_dim {
        return Err(Error::Shape(format!(
            "observation batch has {} values, expected {}×{}",
            obs.len(),
            b,
            p.obs_dim
        )));
    }
    let e_dim = p.enc_dim;
    let h_dim = p.hidden_dim;
    let zf_dim = p.lstm_in_dim();

    // Encoder is affine with no nonlinearity.
    let mut e = vec![0.0; b * e_dim];
    ops::affine_forward(&mut e, &p.enc_w, &p.enc_b, e_dim, p.obs_dim, obs, b);

    let mut z_full = vec![0.0; b * zf_dim];
    for bi in 0..b {
        let row = &mut z_full[bi * zf_dim..(bi + 1) * zf_dim];
        row[..e_dim].copy_from_slice(&e[bi * e_dim..(bi + 1) * e_dim]);
        row[e_dim..e_dim + N_ACTIONS]
            .copy_from_slice(&state.prev_action[bi * N_ACTIONS..(bi + 1) * N_ACTIONS]);
        row[e_dim + N_ACTIONS..].copy_from_slice(&state.h[bi * h_dim..(bi + 1) * h_dim]);
    }

    let mut pre = vec![0.0; b * 4 * h_dim];
    ops::affine_forward(&mut pre, &p.lstm_w, &p.lstm_b, 4 * h_dim, zf_dim, &z_full, b);

    let c_in = state.c.clone();
    let mut gate_i = vec![0.0; b * h_dim];
    let mut gate_f = vec![0.0; b * h_dim];
    let mut gate_o = vec![0.0; b * h_dim];
    let mut cand = vec![0.0; b * h_dim];
    let mut c_out = vec![0.0; b * h_dim];
    let mut tanh_c = vec![0.0; b * h_dim];
    let mut h_out = vec![0.0; b * h_dim];
    for bi in 0..b {
        let pre_row = &pre[bi * 4 * h_dim..(bi + 1) * 4 * h_dim];
        for j in 0..h_dim {
            let idx = bi * h_dim + j;
            let i = ops::sigmoid(pre_row[j]);
            let f = ops::sigmoid(pre_row[h_dim + j]);
            let o = ops::sigmoid(pre_row[2 * h_dim + j]);
            let g = pre_row[3 * h_dim + j].tanh();
            let c = f * c_in[idx] + i * g;
            let tc = c.tanh();
            gate_i[idx] = i;
            gate_f[idx] = f;
            gate_o[idx] = o;
            cand[idx] = g;
            c_out[idx] = c;
            tanh_c[idx] = tc;
            h_out[idx] = o * tc;
        }
    }

    let mut logits = vec![0.0; b * N_ACTIONS];
    ops::affine_forward(&mut logits, &p.pi_w, &p.pi_b, N_ACTIONS, h_dim, &h_out, b);
    let mut values = vec![0.0; b];
    for bi in 0..b {
        values[bi] = p.v_b[0] + ops::dot(&p.v_w, &h_out[bi * h_dim..(bi + 1) * h_dim]);
    }

    for (v, name) in [(logits.iter(), "logits"), (values.iter(), "value")] {
        for x in v {
            if !x.is_finite() {
                return Err(Error::Numeric(format!("non-finite {name} in forward pass")));
            }
        }
    }

    state.h.copy_from_slice(&h_out);
    state.c.copy_from_slice(&c_out);
    Ok(StepActivations {
        z_full,
        gate_i,
        gate_f,
        gate_o,
        cand,
        c_in,
        c_out,
        tanh_c,
        h_out,
        logits,
        values,
    })
}

/// Single-step forward for one observation, per the module contract.
///
/// The returned hidden state carries the previous action through unchanged;
/// the caller records the sampled action with [`Hidden::set_prev_action`]
/// before the next step.
pub fn policy_forward(
    p: &PolicyParams,
    bimodal: &[f64],
    hidden: &Hidden,
) -> Result<(Vec<f64>, f64, Hidden)> {
    if bimodal.len() != p.obs_dim {
        return Err(Error::Shape(format!(
            "observation has length {}, expected {}",
            bimodal.len(),
            p.obs_dim
        )));
    }
    let mut batch = HiddenBatch::zeros(1, p.hidden_dim);
    batch.set_slot(0, hidden);
    let acts = forward_step_batch(p, bimodal, &mut batch)?;
    let next = Hidden {
        h: acts.h_out.clone(),
        c: acts.c_out.clone(),
        prev_action: hidden.prev_action.clone(),
    };
    Ok((acts.logits, acts.values[0], next))
}
