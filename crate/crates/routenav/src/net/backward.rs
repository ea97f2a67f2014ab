//! Exact gradients of the clipped-surrogate loss through the recurrent
//! policy, backpropagated through time over rollout segments.
//!
//! A segment batch holds several equal-length sequence slices in lockstep.
//! The forward pass replays the recurrent states from the stored snapshots
//! (resetting at episode boundaries), and the backward pass walks the cached
//! activations in reverse, producing gradients for every parameter tensor.

use crate::env::N_ACTIONS;
use crate::error::{Error, Result};
use crate::net::conv::{conv_backward, conv_forward_cached, ConvCache, ConvGrads};
use crate::net::ops;
use crate::net::{forward_step_batch, Gradients, HiddenBatch, PolicyParams, StepActivations};

/// Per-step observations for a segment batch.
#[derive(Debug, Clone)]
pub enum SegmentObs {
    /// Bimodal rows, `[T][B][obs_dim]` flattened.
    Vectors(Vec<f64>),
    /// Raw-image mode: planar pixel tensors `[T][B][3·84·84]` plus the goal
    /// scalar per (step, sequence). The conv encoder turns each image into
    /// the 512-d visual half of the bimodal input.
    Images { planes: Vec<f64>, goals: Vec<f64> },
}

/// A batch of equal-length rollout slices with everything the loss needs.
#[derive(Debug, Clone)]
pub struct SegmentBatch {
    /// Number of sequences stepping in lockstep.
    pub n_seq: usize,
    /// Steps per sequence.
    pub len: usize,
    pub obs_dim: usize,
    pub obs: SegmentObs,
    /// Action codes, `[T][B]`.
    pub actions: Vec<u8>,
    /// Log-probabilities recorded at collection time, `[T][B]`.
    pub old_logprob: Vec<f64>,
    /// Normalized advantages, `[T][B]`.
    pub advantage: Vec<f64>,
    /// Value targets, `[T][B]`.
    pub ret: Vec<f64>,
    /// True where the recurrent state resets before the step, `[T][B]`.
    pub episode_start: Vec<bool>,
    /// Hidden snapshots at segment start, `[B][H]` / `[B][A]`.
    pub h0: Vec<f64>,
    pub c0: Vec<f64>,
    pub prev_action0: Vec<f64>,
}

impl SegmentBatch {
    fn check(&self, p: &PolicyParams) -> Result<()> {
        let samples = self.n_seq * self.len;
        let expect = |name: &str, got: usize, want: usize| -> Result<()> {
            if got != want {
                return Err(Error::Shape(format!(
                    "segment batch field {name} has {got} entries, expected {want}"
                )));
            }
            Ok(())
        };
        match &self.obs {
            SegmentObs::Vectors(v) => {
                expect("obs", v.len(), samples * self.obs_dim)?;
                if self.obs_dim != p.obs_dim {
                    return Err(Error::Shape(format!(
                        "segment obs_dim {} vs params obs_dim {}",
                        self.obs_dim, p.obs_dim
                    )));
                }
            }
            SegmentObs::Images { planes, goals } => {
                expect("planes", planes.len(), samples * crate::traversal::RAW_IMAGE_LEN)?;
                expect("goals", goals.len(), samples)?;
                if p.conv.is_none() {
                    return Err(Error::Shape(
                        "image observations require conv encoder params".into(),
                    ));
                }
            }
        }
        expect("actions", self.actions.len(), samples)?;
        expect("old_logprob", self.old_logprob.len(), samples)?;
        expect("advantage", self.advantage.len(), samples)?;
        expect("ret", self.ret.len(), samples)?;
        expect("episode_start", self.episode_start.len(), samples)?;
        expect("h0", self.h0.len(), self.n_seq * p.hidden_dim)?;
        expect("c0", self.c0.len(), self.n_seq * p.hidden_dim)?;
        expect("prev_action0", self.prev_action0.len(), self.n_seq * N_ACTIONS)?;
        Ok(())
    }
}

/// Loss weights; the mean denominator lets a caller average over a larger
/// minibatch than one segment batch.
#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Number of samples the mean reduction divides by.
    pub mean_denominator: usize,
}

/// Scalar diagnostics of one loss evaluation. Sums are pre-division partial
/// sums so that multi-batch minibatches can be reduced exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub mean_abs_logit: f64,
}

struct StepExtras {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

struct ForwardPass {
    activations: Vec<StepActivations>,
    extras: Vec<StepExtras>,
    /// Observation rows actually fed to the encoder, per step ([B × obs_dim]).
    enc_inputs: Vec<Vec<f64>>,
    conv_caches: Vec<Vec<ConvCache>>,
    stats: LossStats,
}

fn run_forward(p: &PolicyParams, batch: &SegmentBatch, cfg: &LossConfig) -> Result<ForwardPass> {
    batch.check(p)?;
    let b = batch.n_seq;
    let t_len = batch.len;
    let h_dim = p.hidden_dim;

    let mut state = HiddenBatch::zeros(b, h_dim);
    state.h.copy_from_slice(&batch.h0);
    state.c.copy_from_slice(&batch.c0);
    state.prev_action.copy_from_slice(&batch.prev_action0);

    let mut activations = Vec::with_capacity(t_len);
    let mut extras = Vec::with_capacity(t_len);
    let mut enc_inputs = Vec::with_capacity(t_len);
    let mut conv_caches: Vec<Vec<ConvCache>> = Vec::new();
    let mut stats = LossStats::default();

    for t in 0..t_len {
        for bi in 0..b {
            if batch.episode_start[t * b + bi] {
                state.reset_slot(bi);
            } else if t > 0 {
                let prev_code = batch.actions[(t - 1) * b + bi] as usize;
                state.set_prev_action(bi, crate::env::Action::from_code(prev_code)?);
            }
        }

        let obs_rows: Vec<f64> = match &batch.obs {
            SegmentObs::Vectors(v) => {
                v[t * b * batch.obs_dim..(t + 1) * b * batch.obs_dim].to_vec()
            }
            SegmentObs::Images { planes, goals } => {
                let img_len = crate::traversal::RAW_IMAGE_LEN;
                let conv = p.conv.as_ref().expect("checked in SegmentBatch::check");
                let mut rows = vec![0.0; b * p.obs_dim];
                let mut caches = Vec::with_capacity(b);
                for bi in 0..b {
                    let base = (t * b + bi) * img_len;
                    let (feat, cache) =
                        conv_forward_cached(conv, planes[base..base + img_len].to_vec());
                    let row = &mut rows[bi * p.obs_dim..(bi + 1) * p.obs_dim];
                    row[..feat.len()].copy_from_slice(&feat);
                    row[feat.len()] = goals[t * b + bi];
                    caches.push(cache);
                }
                conv_caches.push(caches);
                rows
            }
        };

        let acts = forward_step_batch(p, &obs_rows, &mut state)?;

        let mut step_extras = StepExtras {
            probs: vec![0.0; b * N_ACTIONS],
            log_probs: vec![0.0; b * N_ACTIONS],
        };
        for bi in 0..b {
            let logit_row = &acts.logits[bi * N_ACTIONS..(bi + 1) * N_ACTIONS];
            let p_row = &mut step_extras.probs[bi * N_ACTIONS..(bi + 1) * N_ACTIONS];
            let lp_row = &mut step_extras.log_probs[bi * N_ACTIONS..(bi + 1) * N_ACTIONS];
            ops::softmax_row(logit_row, p_row, lp_row);

            let idx = t * b + bi;
            let action = batch.actions[idx] as usize;
            let lp_new = lp_row[action];
            let ratio = (lp_new - batch.old_logprob[idx]).exp();
            if !ratio.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite probability ratio at step {t}, sequence {bi}"
                )));
            }
            let adv = batch.advantage[idx];
            let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
            let surr = (ratio * adv).min(clipped * adv);
            let v_err = acts.values[bi] - batch.ret[idx];
            let entropy = ops::entropy_row(p_row, lp_row);

            stats.policy_loss += -surr;
            stats.value_loss += v_err * v_err;
            stats.entropy += entropy;
            if ratio * adv > clipped * adv {
                stats.clip_fraction += 1.0;
            }
            stats.mean_abs_logit +=
                logit_row.iter().map(|v| v.abs()).sum::<f64>() / N_ACTIONS as f64;
        }
        activations.push(acts);
        extras.push(step_extras);
        enc_inputs.push(obs_rows);
    }

    let denom = cfg.mean_denominator as f64;
    stats.policy_loss /= denom;
    stats.value_loss /= denom;
    stats.entropy /= denom;
    stats.clip_fraction /= denom;
    stats.mean_abs_logit /= (b * t_len) as f64;
    stats.loss = stats.policy_loss + cfg.value_coef * stats.value_loss
        - cfg.entropy_coef * stats.entropy;
    Ok(ForwardPass { activations, extras, enc_inputs, conv_caches, stats })
}

/// Loss (and diagnostics) of a segment batch without gradients.
pub fn segment_loss(
    p: &PolicyParams,
    batch: &SegmentBatch,
    cfg: &LossConfig,
) -> Result<LossStats> {
    Ok(run_forward(p, batch, cfg)?.stats)
}

/// Loss plus exact gradients for every parameter tensor.
pub fn segment_loss_and_grad(
    p: &PolicyParams,
    batch: &SegmentBatch,
    cfg: &LossConfig,
) -> Result<(LossStats, Gradients)> {
    let pass = run_forward(p, batch, cfg)?;
    let b = batch.n_seq;
    let t_len = batch.len;
    let h_dim = p.hidden_dim;
    let e_dim = p.enc_dim;
    let zf_dim = p.lstm_in_dim();
    let denom = cfg.mean_denominator as f64;

    let mut grads = p.zeros_like();
    let mut conv_grads = p.conv.as_ref().map(|_| ConvGrads::zeros());

    // Carried gradients flowing from step t+1 into step t.
    let mut dh_carry = vec![0.0; b * h_dim];
    let mut dc_carry = vec![0.0; b * h_dim];

    for t in (0..t_len).rev() {
        let acts = &pass.activations[t];
        let extras = &pass.extras[t];

        // Per-step head gradients.
        let mut dlogits = vec![0.0; b * N_ACTIONS];
        let mut dvalue = vec![0.0; b];
        for bi in 0..b {
            let idx = t * b + bi;
            let action = batch.actions[idx] as usize;
            let p_row = &extras.probs[bi * N_ACTIONS..(bi + 1) * N_ACTIONS];
            let lp_row = &extras.log_probs[bi * N_ACTIONS..(bi + 1) * N_ACTIONS];
            let adv = batch.advantage[idx];
            let ratio = (lp_row[action] - batch.old_logprob[idx]).exp();
            let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
            // The surrogate's gradient flows only through the unclipped
            // branch; ties inside the clip region pick it too (identical).
            let unclipped_active = ratio * adv <= clipped * adv;
            let pol_coeff = if unclipped_active { -adv * ratio / denom } else { 0.0 };

            let entropy = ops::entropy_row(p_row, lp_row);
            let d_row = &mut dlogits[bi * N_ACTIONS..(bi + 1) * N_ACTIONS];
            for j in 0..N_ACTIONS {
                let ind = if j == action { 1.0 } else { 0.0 };
                // Policy: d(−surr)/dlogit_j = pol_coeff·(1{j=a} − p_j).
                let mut g = pol_coeff * (ind - p_row[j]);
                // Entropy bonus: −c_e·dH/dlogit_j with
                // dH/dlogit_j = −p_j (log p_j + H).
                g += cfg.entropy_coef * p_row[j] * (lp_row[j] + entropy) / denom;
                d_row[j] = g;
            }
            dvalue[bi] = 2.0 * cfg.value_coef * (acts.values[bi] - batch.ret[idx]) / denom;
        }

        // Heads.
        ops::grad_weight_acc(&mut grads.pi_w, &mut grads.pi_b, N_ACTIONS, h_dim, &dlogits, &acts.h_out, b);
        let mut dh = dh_carry;
        ops::grad_input_acc(&mut dh, &p.pi_w, N_ACTIONS, h_dim, &dlogits, b);
        for bi in 0..b {
            let g = dvalue[bi];
            grads.v_b[0] += g;
            ops::axpy(&mut grads.v_w, g, &acts.h_out[bi * h_dim..(bi + 1) * h_dim]);
            ops::axpy(&mut dh[bi * h_dim..(bi + 1) * h_dim], g, &p.v_w);
        }

        // LSTM cell backward.
        let mut dpre = vec![0.0; b * 4 * h_dim];
        let mut dc_prev = vec![0.0; b * h_dim];
        for bi in 0..b {
            for j in 0..h_dim {
                let idx = bi * h_dim + j;
                let o = acts.gate_o[idx];
                let i = acts.gate_i[idx];
                let f = acts.gate_f[idx];
                let g = acts.cand[idx];
                let tc = acts.tanh_c[idx];
                let dh_j = dh[idx];
                let dc_j = dc_carry[idx] + dh_j * o * (1.0 - tc * tc);
                let pre_row = &mut dpre[bi * 4 * h_dim..(bi + 1) * 4 * h_dim];
                pre_row[j] = dc_j * g * i * (1.0 - i);
                pre_row[h_dim + j] = dc_j * acts.c_in[idx] * f * (1.0 - f);
                pre_row[2 * h_dim + j] = dh_j * tc * o * (1.0 - o);
                pre_row[3 * h_dim + j] = dc_j * i * (1.0 - g * g);
                dc_prev[idx] = dc_j * f;
            }
        }

        ops::grad_weight_acc(&mut grads.lstm_w, &mut grads.lstm_b, 4 * h_dim, zf_dim, &dpre, &acts.z_full, b);
        let mut dz = vec![0.0; b * zf_dim];
        ops::grad_input_acc(&mut dz, &p.lstm_w, 4 * h_dim, zf_dim, &dpre, b);

        // Split dz into encoder part and recurrent carry.
        let mut de = vec![0.0; b * e_dim];
        let mut dh_prev = vec![0.0; b * h_dim];
        for bi in 0..b {
            let dz_row = &dz[bi * zf_dim..(bi + 1) * zf_dim];
            de[bi * e_dim..(bi + 1) * e_dim].copy_from_slice(&dz_row[..e_dim]);
            dh_prev[bi * h_dim..(bi + 1) * h_dim]
                .copy_from_slice(&dz_row[e_dim + N_ACTIONS..]);
        }

        // Encoder.
        let obs_rows = &pass.enc_inputs[t];
        ops::grad_weight_acc(&mut grads.enc_w, &mut grads.enc_b, e_dim, p.obs_dim, &de, obs_rows, b);

        // Raw-image mode: push the visual part of the observation gradient
        // through the conv encoder.
        if let (Some(conv), Some(cg)) = (&p.conv, conv_grads.as_mut()) {
            let mut dobs = vec![0.0; b * p.obs_dim];
            ops::grad_input_acc(&mut dobs, &p.enc_w, e_dim, p.obs_dim, &de, b);
            let caches = &pass.conv_caches[t];
            for bi in 0..b {
                let d_feat = &dobs[bi * p.obs_dim..bi * p.obs_dim + p.visual_dim];
                conv_backward(conv, &caches[bi], d_feat, cg);
            }
        }

        // Hidden-state carries are cut at episode boundaries: when step t
        // starts an episode its recurrent inputs were the reset constants.
        for bi in 0..b {
            if batch.episode_start[t * b + bi] {
                dh_prev[bi * h_dim..(bi + 1) * h_dim].fill(0.0);
                dc_prev[bi * h_dim..(bi + 1) * h_dim].fill(0.0);
            }
        }
        dh_carry = dh_prev;
        dc_carry = dc_prev;
    }

    if let (Some(cg), Some(slot)) = (conv_grads, grads.conv.as_mut()) {
        slot.conv1.w.copy_from_slice(&cg.conv1_w);
        slot.conv1.b.copy_from_slice(&cg.conv1_b);
        slot.conv2.w.copy_from_slice(&cg.conv2_w);
        slot.conv2.b.copy_from_slice(&cg.conv2_b);
        slot.fc_w.copy_from_slice(&cg.fc_w);
        slot.fc_b.copy_from_slice(&cg.fc_b);
    }

    for (name, tensor) in grads.named_tensors() {
        for v in tensor {
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite gradient in tensor {name}")));
            }
        }
    }
    Ok((pass.stats, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    use crate::net::gradcheck::check_segment_gradients;
    use crate::net::PolicyParams;
    use crate::rng::stream_rng;
    use crate::traversal::{make_raw_frame_image, Condition, RAW_IMAGE_LEN};

    /// Random vector-mode segment with nonzero snapshots and episode
    /// boundaries scattered mid-segment.
    fn random_segment(
        rng: &mut ChaCha8Rng,
        n_seq: usize,
        len: usize,
        obs_dim: usize,
        hidden_dim: usize,
        with_boundaries: bool,
    ) -> SegmentBatch {
        let samples = n_seq * len;
        let obs: Vec<f64> = (0..samples * obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let actions: Vec<u8> = (0..samples).map(|_| rng.gen_range(0..3u8)).collect();
        let old_logprob: Vec<f64> = (0..samples).map(|_| rng.gen_range(-1.4..-0.85)).collect();
        let advantage: Vec<f64> = (0..samples).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let ret: Vec<f64> = (0..samples).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut episode_start = vec![false; samples];
        if with_boundaries {
            for (i, flag) in episode_start.iter_mut().enumerate() {
                if rng.gen_bool(0.2) && i >= n_seq {
                    *flag = true;
                }
            }
        }
        let h0: Vec<f64> = (0..n_seq * hidden_dim).map(|_| rng.gen_range(-0.7..0.7)).collect();
        let c0: Vec<f64> = (0..n_seq * hidden_dim).map(|_| rng.gen_range(-0.7..0.7)).collect();
        let mut prev_action0 = vec![0.0; n_seq * 3];
        for s in 0..n_seq {
            prev_action0[s * 3 + rng.gen_range(0..3)] = 1.0;
        }
        SegmentBatch {
            n_seq,
            len,
            obs_dim,
            obs: SegmentObs::Vectors(obs),
            actions,
            old_logprob,
            advantage,
            ret,
            episode_start,
            h0,
            c0,
            prev_action0,
        }
    }

    fn spiced_params(visual: usize, enc: usize, hidden: usize, seed: u64) -> PolicyParams {
        let mut p = PolicyParams::init_with_dims(visual, enc, hidden, seed);
        let mut rng = stream_rng(seed, &[0xbeef]);
        for w in p.pi_w.iter_mut().chain(p.pi_b.iter_mut()) {
            *w = rng.gen_range(-0.6..0.6);
        }
        for w in p.v_w.iter_mut() {
            *w = rng.gen_range(-0.6..0.6);
        }
        p.v_b[0] = rng.gen_range(-0.3..0.3);
        p
    }

    #[test]
    fn exhaustive_gradcheck_small_net() {
        let params = spiced_params(2, 6, 4, 91);
        let mut rng = stream_rng(92, &[0]);
        let batch = random_segment(&mut rng, 1, 5, 3, 4, false);
        let cfg = LossConfig { clip: 0.2, value_coef: 0.5, entropy_coef: 0.01, mean_denominator: 5 };
        let report = check_segment_gradients(&params, &batch, &cfg, 0, &mut rng).unwrap();
        assert!(
            report.passed(),
            "max rel error {:e} at {:?}",
            report.max_rel_error,
            report.worst
        );
    }

    #[test]
    fn exhaustive_gradcheck_with_episode_boundaries() {
        let params = spiced_params(3, 5, 4, 93);
        let mut rng = stream_rng(94, &[0]);
        let batch = random_segment(&mut rng, 3, 6, 4, 4, true);
        assert!(batch.episode_start.iter().any(|&b| b), "want boundaries mid-segment");
        let cfg = LossConfig { clip: 0.2, value_coef: 0.5, entropy_coef: 0.01, mean_denominator: 18 };
        let report = check_segment_gradients(&params, &batch, &cfg, 0, &mut rng).unwrap();
        assert!(
            report.passed(),
            "max rel error {:e} at {:?}",
            report.max_rel_error,
            report.worst
        );
    }

    #[test]
    fn sampled_gradcheck_conv_path() {
        // Conv feature width is fixed at 512, so the conv path cannot shrink;
        // sample coordinates from every tensor instead.
        let params = spiced_params(crate::net::conv::CONV_FEATURE_DIM, 6, 4, 95)
            .with_conv_encoder(96)
            .unwrap();
        let mut rng = stream_rng(97, &[0]);
        let n_seq = 1;
        let len = 3;
        let mut planes = Vec::new();
        for t in 0..len {
            let img = make_raw_frame_image(t * 3, Condition::Reference, 7);
            planes.extend(crate::net::conv::image_to_planes(&img).unwrap());
        }
        assert_eq!(planes.len(), len * RAW_IMAGE_LEN);
        let goals: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
        let samples = n_seq * len;
        let batch = SegmentBatch {
            n_seq,
            len,
            obs_dim: crate::net::conv::CONV_FEATURE_DIM + 1,
            obs: SegmentObs::Images { planes, goals },
            actions: (0..samples).map(|_| rng.gen_range(0..3u8)).collect(),
            old_logprob: (0..samples).map(|_| rng.gen_range(-1.3..-0.9)).collect(),
            advantage: (0..samples).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            ret: (0..samples).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            episode_start: {
                let mut e = vec![false; samples];
                e[0] = true;
                e
            },
            h0: vec![0.0; n_seq * 4],
            c0: vec![0.0; n_seq * 4],
            prev_action0: vec![0.0; n_seq * 3],
        };
        let cfg = LossConfig { clip: 0.2, value_coef: 0.5, entropy_coef: 0.01, mean_denominator: samples };
        let report = check_segment_gradients(&params, &batch, &cfg, 10, &mut rng).unwrap();
        assert!(
            report.passed(),
            "max rel error {:e} at {:?}",
            report.max_rel_error,
            report.worst
        );
    }

    #[test]
    fn batch_loss_decomposes_over_sequences() {
        let params = spiced_params(2, 5, 4, 98);
        let mut rng = stream_rng(99, &[0]);
        let batch = random_segment(&mut rng, 3, 4, 3, 4, true);
        let total = batch.n_seq * batch.len;
        let cfg = LossConfig { clip: 0.2, value_coef: 0.5, entropy_coef: 0.01, mean_denominator: total };
        let combined = segment_loss(&params, &batch, &cfg).unwrap();

        let mut acc = 0.0;
        for s in 0..batch.n_seq {
            let single = extract_sequence(&batch, s);
            acc += segment_loss(&params, &single, &cfg).unwrap().loss;
        }
        assert!((combined.loss - acc).abs() < 1e-12, "{} vs {acc}", combined.loss);
    }

    fn extract_sequence(batch: &SegmentBatch, s: usize) -> SegmentBatch {
        let b = batch.n_seq;
        let len = batch.len;
        let od = batch.obs_dim;
        let obs = match &batch.obs {
            SegmentObs::Vectors(v) => SegmentObs::Vectors(
                (0..len)
                    .flat_map(|t| v[(t * b + s) * od..(t * b + s + 1) * od].to_vec())
                    .collect(),
            ),
            SegmentObs::Images { .. } => unimplemented!("vector-mode helper"),
        };
        let gather = |x: &[f64]| -> Vec<f64> { (0..len).map(|t| x[t * b + s]).collect() };
        SegmentBatch {
            n_seq: 1,
            len,
            obs_dim: od,
            obs,
            actions: (0..len).map(|t| batch.actions[t * b + s]).collect(),
            old_logprob: gather(&batch.old_logprob),
            advantage: gather(&batch.advantage),
            ret: gather(&batch.ret),
            episode_start: (0..len).map(|t| batch.episode_start[t * b + s]).collect(),
            h0: batch.h0[s * 4..(s + 1) * 4].to_vec(),
            c0: batch.c0[s * 4..(s + 1) * 4].to_vec(),
            prev_action0: batch.prev_action0[s * 3..(s + 1) * 3].to_vec(),
        }
    }
}

