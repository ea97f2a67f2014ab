//! Clipped-surrogate policy optimization over vectorized recurrent rollouts.
//!
//! Training alternates fixed-horizon rollout collection across a bank of
//! env slots with several epochs of minibatched updates. Minibatches are
//! whole sequence segments (truncated for backpropagation through time), so
//! recurrent state stays valid; advantages come from generalized advantage
//! estimation and are normalized per update.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{
    Action, CurriculumState, EnvConfig, EnvState, EpisodeRecord, ObsSource, Observation, VecEnv,
    Visual, ACTIONS, N_ACTIONS,
};
use crate::error::{Error, Result};
use crate::net::backward::{
    segment_loss, segment_loss_and_grad, LossConfig, LossStats, SegmentBatch, SegmentObs,
};
use crate::net::conv::{conv_forward_cached, image_to_planes, CONV_FEATURE_DIM};
use crate::net::{adam, forward_step_batch, init_params, HiddenBatch, PolicyParams};
use crate::rng::{derive_seed, label, stream_rng};
use crate::traversal::RAW_IMAGE_LEN;

/// Hyperparameters of the trainer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub epochs_per_update: usize,
    pub rollout_horizon: usize,
    pub minibatch_sequences: usize,
    pub bptt_truncation: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr: f64,
    pub n_envs: usize,
    pub trials: usize,
    pub max_episodes: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            epochs_per_update: 4,
            rollout_horizon: 128,
            minibatch_sequences: 8,
            bptt_truncation: 64,
            entropy_coef: 0.01,
            value_coef: 0.5,
            lr: 3e-4,
            n_envs: 16,
            trials: 5,
            max_episodes: 20_000,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!("gamma must be in (0,1], got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::InvalidConfig(format!(
                "gae_lambda must be in [0,1], got {}",
                self.gae_lambda
            )));
        }
        if self.clip <= 0.0 {
            return Err(Error::InvalidConfig(format!("clip must be > 0, got {}", self.clip)));
        }
        for (name, v) in [
            ("epochs_per_update", self.epochs_per_update),
            ("rollout_horizon", self.rollout_horizon),
            ("minibatch_sequences", self.minibatch_sequences),
            ("bptt_truncation", self.bptt_truncation),
            ("n_envs", self.n_envs),
            ("trials", self.trials),
        ] {
            if v < 1 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if self.max_episodes < 1 {
            return Err(Error::InvalidConfig("max_episodes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-step observation storage for a rollout.
#[derive(Debug, Clone)]
pub enum RolloutObs {
    /// Bimodal rows, `[T][B][obs_dim]`.
    Vectors(Vec<f64>),
    /// Raw images plus goal scalars.
    Images { pixels: Vec<u8>, goals: Vec<f64> },
}

/// Recurrent-state snapshot at a BPTT segment boundary.
#[derive(Debug, Clone)]
pub struct SegmentSnapshot {
    pub slot: usize,
    pub start: usize,
    pub len: usize,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub prev_action: Vec<f64>,
}

/// Trajectories collected from one rollout across all env slots.
///
/// Layout is step-major: index `[t][b]` flattens to `t * n_envs + b`.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub n_envs: usize,
    pub horizon: usize,
    pub obs_dim: usize,
    pub obs: RolloutObs,
    pub actions: Vec<u8>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub episode_start: Vec<bool>,
    pub bootstrap_values: Vec<f64>,
    pub segments: Vec<SegmentSnapshot>,
}

/// Chooses an action given the policy's logits; the default samples from
/// the softmax, tests can inject scripted behavior.
pub trait ActionSelector {
    fn choose(
        &mut self,
        slot: usize,
        state: &EnvState,
        logits: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Action;
}

/// Stochastic policy: samples from softmax(logits).
pub struct SoftmaxSelector;

impl ActionSelector for SoftmaxSelector {
    fn choose(
        &mut self,
        _slot: usize,
        _state: &EnvState,
        logits: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Action {
        sample_from_logits(logits, rng)
    }
}

pub fn sample_from_logits(logits: &[f64], rng: &mut ChaCha8Rng) -> Action {
    let mut probs = vec![0.0; logits.len()];
    let mut log_probs = vec![0.0; logits.len()];
    crate::net::ops::softmax_row(logits, &mut probs, &mut log_probs);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return ACTIONS[i];
        }
    }
    ACTIONS[logits.len() - 1]
}

/// Shortest-path policy; used as an oracle in tests and sanity checks.
pub struct GreedyOracleSelector;

impl ActionSelector for GreedyOracleSelector {
    fn choose(
        &mut self,
        _slot: usize,
        state: &EnvState,
        _logits: &[f64],
        _rng: &mut ChaCha8Rng,
    ) -> Action {
        use std::cmp::Ordering;
        match state.current_index.cmp(&state.target_index) {
            Ordering::Less => Action::Forward,
            Ordering::Greater => Action::Backward,
            Ordering::Equal => Action::Stay,
        }
    }
}

/// Persistent rollout state: the env bank plus recurrent state and the
/// per-slot action streams, all seeded from the run seed.
pub struct RolloutCollector {
    venv: VecEnv,
    hidden: HiddenBatch,
    current_obs: Vec<Observation>,
    pending_start: Vec<bool>,
    action_rngs: Vec<ChaCha8Rng>,
    run_seed: u64,
}

const ACTION_STREAM: u64 = 0xac;

impl RolloutCollector {
    pub fn new(
        config: EnvConfig,
        source: ObsSource,
        curriculum: CurriculumState,
        n_slots: usize,
        run_seed: u64,
        hidden_dim: usize,
    ) -> Result<Self> {
        let (venv, current_obs) = VecEnv::new(config, source, curriculum, n_slots, run_seed)?;
        let action_rngs = (0..n_slots)
            .map(|slot| stream_rng(run_seed, &[ACTION_STREAM, slot as u64, 0]))
            .collect();
        Ok(RolloutCollector {
            venv,
            hidden: HiddenBatch::zeros(n_slots, hidden_dim),
            current_obs,
            pending_start: vec![true; n_slots],
            action_rngs,
            run_seed,
        })
    }

    pub fn venv(&self) -> &VecEnv {
        &self.venv
    }

    fn obs_rows(&self, params: &PolicyParams) -> Result<Vec<f64>> {
        let b = self.venv.n_slots();
        let mut rows = vec![0.0; b * params.obs_dim];
        for (bi, obs) in self.current_obs.iter().enumerate() {
            let row = &mut rows[bi * params.obs_dim..(bi + 1) * params.obs_dim];
            match &obs.visual {
                Visual::Vector(x) => {
                    if x.len() + 1 != params.obs_dim {
                        return Err(Error::Shape(format!(
                            "visual dim {} incompatible with obs_dim {}",
                            x.len(),
                            params.obs_dim
                        )));
                    }
                    row[..x.len()].copy_from_slice(x);
                    row[x.len()] = obs.goal;
                }
                Visual::Image(img) => {
                    let conv = params.conv.as_ref().ok_or_else(|| {
                        Error::Shape("raw-image observations need conv params".into())
                    })?;
                    let planes = image_to_planes(img)?;
                    let (feat, _) = conv_forward_cached(conv, planes);
                    row[..feat.len()].copy_from_slice(&feat);
                    row[feat.len()] = obs.goal;
                }
            }
        }
        Ok(rows)
    }

    /// Collect exactly `horizon` steps per slot. Hidden states persist
    /// within episodes and reset at boundaries; segment snapshots are taken
    /// every `bptt_truncation` steps.
    pub fn collect(
        &mut self,
        params: &PolicyParams,
        horizon: usize,
        bptt_truncation: usize,
        selector: &mut dyn ActionSelector,
    ) -> Result<(RolloutBatch, Vec<EpisodeRecord>)> {
        if horizon < 1 {
            return Err(Error::InvalidConfig("horizon must be >= 1".into()));
        }
        let b = self.venv.n_slots();
        let samples = horizon * b;
        let store_vectors = !matches!(
            self.current_obs.first().map(|o| &o.visual),
            Some(Visual::Image(_))
        );
        let mut obs_vec = if store_vectors { vec![0.0; samples * params.obs_dim] } else { Vec::new() };
        let mut pixels = Vec::new();
        let mut goals = Vec::new();
        let mut actions = vec![0u8; samples];
        let mut log_probs = vec![0.0; samples];
        let mut rewards = vec![0.0; samples];
        let mut values = vec![0.0; samples];
        let mut dones = vec![false; samples];
        let mut episode_start = vec![false; samples];
        let mut segments = Vec::new();
        let mut episode_records = Vec::new();

        for t in 0..horizon {
            for bi in 0..b {
                if self.pending_start[bi] {
                    self.hidden.reset_slot(bi);
                    episode_start[t * b + bi] = true;
                    self.pending_start[bi] = false;
                }
            }
            if t % bptt_truncation == 0 {
                let len = bptt_truncation.min(horizon - t);
                for bi in 0..b {
                    let hd = self.hidden.slot(bi);
                    segments.push(SegmentSnapshot {
                        slot: bi,
                        start: t,
                        len,
                        h: hd.h,
                        c: hd.c,
                        prev_action: hd.prev_action,
                    });
                }
            }

            // Record raw observations before consuming them.
            if store_vectors {
                for (bi, obs) in self.current_obs.iter().enumerate() {
                    let row = &mut obs_vec
                        [(t * b + bi) * params.obs_dim..(t * b + bi + 1) * params.obs_dim];
                    if let Some(bi_modal) = obs.bimodal() {
                        row.copy_from_slice(&bi_modal);
                    }
                }
            } else {
                for obs in &self.current_obs {
                    match &obs.visual {
                        Visual::Image(img) => {
                            pixels.extend_from_slice(img);
                            goals.push(obs.goal);
                        }
                        Visual::Vector(_) => unreachable!("mode fixed per collector"),
                    }
                }
            }

            let rows = self.obs_rows(params)?;
            let acts = forward_step_batch(params, &rows, &mut self.hidden)?;

            let states = self.venv.states();
            let mut chosen = Vec::with_capacity(b);
            for bi in 0..b {
                let logits = &acts.logits[bi * N_ACTIONS..(bi + 1) * N_ACTIONS];
                let action =
                    selector.choose(bi, &states[bi], logits, &mut self.action_rngs[bi]);
                let mut probs = vec![0.0; N_ACTIONS];
                let mut lps = vec![0.0; N_ACTIONS];
                crate::net::ops::softmax_row(logits, &mut probs, &mut lps);
                let idx = t * b + bi;
                actions[idx] = action.code() as u8;
                log_probs[idx] = lps[action.code()];
                values[idx] = acts.values[bi];
                self.hidden.set_prev_action(bi, action);
                chosen.push(action);
            }

            let (transitions, records) = self.venv.step_all(&chosen)?;
            for (bi, tr) in transitions.iter().enumerate() {
                let idx = t * b + bi;
                rewards[idx] = tr.reward;
                dones[idx] = tr.done;
                if tr.done {
                    self.pending_start[bi] = true;
                    // Fresh per-episode action stream, aligned with the env
                    // slot's episode counter.
                    self.action_rngs[bi] = stream_rng(
                        self.run_seed,
                        &[ACTION_STREAM, bi as u64, self.venv.slot_episode(bi)],
                    );
                }
                self.current_obs[bi] = tr.observation.clone();
            }
            episode_records.extend(records);
        }

        // Bootstrap values of the post-rollout observations; episode
        // boundaries are cut by the done flags during GAE, so resets here
        // only keep the forward pass well-defined.
        let mut probe = self.hidden.clone();
        for bi in 0..b {
            if self.pending_start[bi] {
                probe.reset_slot(bi);
            }
        }
        let rows = self.obs_rows(params)?;
        let boot = forward_step_batch(params, &rows, &mut probe)?;

        let obs = if store_vectors {
            RolloutObs::Vectors(obs_vec)
        } else {
            RolloutObs::Images { pixels, goals }
        };
        Ok((
            RolloutBatch {
                n_envs: b,
                horizon,
                obs_dim: params.obs_dim,
                obs,
                actions,
                log_probs,
                rewards,
                values,
                dones,
                episode_start,
                bootstrap_values: boot.values,
                segments,
            },
            episode_records,
        ))
    }
}

/// Generalized advantage estimation.
///
/// `δ_t = r_t + γ·V(s_{t+1})·(1−done_t) − V(s_t)`,
/// `A_t = δ_t + γλ·(1−done_t)·A_{t+1}`, returns `= A_t + V(s_t)`.
pub fn compute_gae(
    batch: &RolloutBatch,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let b = batch.n_envs;
    let t_len = batch.horizon;
    let mut advantages = vec![0.0; t_len * b];
    let mut returns = vec![0.0; t_len * b];
    for bi in 0..b {
        let mut acc = 0.0;
        for t in (0..t_len).rev() {
            let idx = t * b + bi;
            let nonterminal = if batch.dones[idx] { 0.0 } else { 1.0 };
            let next_value = if t == t_len - 1 {
                batch.bootstrap_values[bi]
            } else {
                batch.values[(t + 1) * b + bi]
            };
            let delta = batch.rewards[idx] + gamma * next_value * nonterminal
                - batch.values[idx];
            acc = delta + gamma * lambda * nonterminal * acc;
            advantages[idx] = acc;
            returns[idx] = acc + batch.values[idx];
        }
    }
    (advantages, returns)
}

/// Normalize to zero mean, unit (population) variance. No-op guard for a
/// single sample or zero spread.
pub fn normalize_advantages(advantages: &mut [f64]) {
    let n = advantages.len();
    if n < 2 {
        return;
    }
    let mean = advantages.iter().sum::<f64>() / n as f64;
    let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    for a in advantages.iter_mut() {
        *a = (*a - mean) / (std + 1e-8);
    }
}

/// Gather a set of segments into a lockstep batch for the loss.
pub fn build_segment_batch(
    batch: &RolloutBatch,
    advantages: &[f64],
    returns: &[f64],
    segments: &[&SegmentSnapshot],
    hidden_dim: usize,
) -> Result<SegmentBatch> {
    let n_seq = segments.len();
    if n_seq == 0 {
        return Err(Error::InvalidConfig("empty segment selection".into()));
    }
    let len = segments[0].len;
    if segments.iter().any(|s| s.len != len) {
        return Err(Error::Shape("segments in one batch must share length".into()));
    }
    let b = batch.n_envs;
    let samples = n_seq * len;
    let mut actions = vec![0u8; samples];
    let mut old_logprob = vec![0.0; samples];
    let mut advantage = vec![0.0; samples];
    let mut ret = vec![0.0; samples];
    let mut episode_start = vec![false; samples];
    let mut h0 = vec![0.0; n_seq * hidden_dim];
    let mut c0 = vec![0.0; n_seq * hidden_dim];
    let mut prev_action0 = vec![0.0; n_seq * N_ACTIONS];

    for (si, seg) in segments.iter().enumerate() {
        h0[si * hidden_dim..(si + 1) * hidden_dim].copy_from_slice(&seg.h);
        c0[si * hidden_dim..(si + 1) * hidden_dim].copy_from_slice(&seg.c);
        prev_action0[si * N_ACTIONS..(si + 1) * N_ACTIONS]
            .copy_from_slice(&seg.prev_action);
        for t in 0..len {
            let src = (seg.start + t) * b + seg.slot;
            let dst = t * n_seq + si;
            actions[dst] = batch.actions[src];
            old_logprob[dst] = batch.log_probs[src];
            advantage[dst] = advantages[src];
            ret[dst] = returns[src];
            episode_start[dst] = batch.episode_start[src];
        }
    }

    let obs = match &batch.obs {
        RolloutObs::Vectors(rows) => {
            let od = batch.obs_dim;
            let mut out = vec![0.0; samples * od];
            for (si, seg) in segments.iter().enumerate() {
                for t in 0..len {
                    let src = ((seg.start + t) * b + seg.slot) * od;
                    let dst = (t * n_seq + si) * od;
                    out[dst..dst + od].copy_from_slice(&rows[src..src + od]);
                }
            }
            SegmentObs::Vectors(out)
        }
        RolloutObs::Images { pixels, goals } => {
            let mut planes = vec![0.0; samples * RAW_IMAGE_LEN];
            let mut g = vec![0.0; samples];
            for (si, seg) in segments.iter().enumerate() {
                for t in 0..len {
                    let src = (seg.start + t) * b + seg.slot;
                    let dst = t * n_seq + si;
                    let img = &pixels[src * RAW_IMAGE_LEN..(src + 1) * RAW_IMAGE_LEN];
                    let p = image_to_planes(img)?;
                    planes[dst * RAW_IMAGE_LEN..(dst + 1) * RAW_IMAGE_LEN]
                        .copy_from_slice(&p);
                    g[dst] = goals[src];
                }
            }
            SegmentObs::Images { planes, goals: g }
        }
    };

    Ok(SegmentBatch {
        n_seq,
        len,
        obs_dim: batch.obs_dim,
        obs,
        actions,
        old_logprob,
        advantage,
        ret,
        episode_start,
        h0,
        c0,
        prev_action0,
    })
}

/// The clipped-surrogate loss of one minibatch (forward only):
/// `−mean(min(ρÂ, clip(ρ)Â)) + c_v·mean((V−R)²) − c_e·mean(entropy)`.
pub fn ppo_loss(
    params: &PolicyParams,
    minibatch: &SegmentBatch,
    config: &TrainerConfig,
) -> Result<LossStats> {
    segment_loss(params, minibatch, &loss_config(config, minibatch.n_seq * minibatch.len))
}

fn loss_config(config: &TrainerConfig, mean_denominator: usize) -> LossConfig {
    LossConfig {
        clip: config.clip,
        value_coef: config.value_coef,
        entropy_coef: config.entropy_coef,
        mean_denominator,
    }
}

/// Abort threshold for the divergence detector.
pub const DIVERGENCE_LOGIT_THRESHOLD: f64 = 1e3;

/// One evaluation point of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub episode: u64,
    pub mean_reward: f64,
    pub mean_steps: f64,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Deterministic compute-time estimate in nominal seconds (total
    /// floating-point work divided by 10⁹); real elapsed time lives in the
    /// run manifest so logs stay bit-reproducible.
    pub wall_clock_s: f64,
}

/// Early-stop rules evaluated on the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopRule {
    /// Stop once the exponentially smoothed success rate reaches the
    /// threshold.
    SmoothedSuccess { threshold: f64, weight: f64 },
    /// Stop once `rows` consecutive log rows hit the success threshold with
    /// the curriculum at its final level.
    SustainedSuccess { threshold: f64, rows: usize },
    /// Stop once the mean success over the last `rows` log rows reaches the
    /// threshold with the curriculum at its final level.
    MeanSuccessAtMaxLevel { threshold: f64, rows: usize },
}

/// Everything a trial needs besides the observation source.
#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub trainer: TrainerConfig,
    pub env: EnvConfig,
    pub curriculum_window: usize,
    pub curriculum_threshold: f64,
    pub stop: Option<StopRule>,
    pub run_seed: u64,
}

impl TrainSpec {
    pub fn new(trainer: TrainerConfig, env: EnvConfig, run_seed: u64) -> Self {
        TrainSpec {
            trainer,
            env,
            curriculum_window: crate::env::DEFAULT_PROMOTE_WINDOW,
            curriculum_threshold: crate::env::DEFAULT_PROMOTE_THRESHOLD,
            stop: None,
            run_seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub rows: Vec<LogRow>,
    pub params: PolicyParams,
    pub episodes: u64,
    pub stopped_early: bool,
}

/// Snapshot handed to a progress callback at evaluation points.
pub struct TrialProgress<'a> {
    pub trial: usize,
    pub seed: u64,
    pub params: &'a PolicyParams,
    pub row: &'a LogRow,
}

/// Invoked every `0`-th element episodes (on 100-episode row boundaries);
/// returning `true` stops the trial early. Runs concurrently across trials.
pub type ProgressHook<'a> = (u64, &'a (dyn Fn(&TrialProgress<'_>) -> bool + Sync));

/// Approximate flop count of one forward step; drives the deterministic
/// virtual clock in the logs.
fn forward_flops(p: &PolicyParams) -> f64 {
    let enc = p.enc_dim * p.obs_dim;
    let lstm = 4 * p.hidden_dim * p.lstm_in_dim();
    let heads = (N_ACTIONS + 1) * p.hidden_dim;
    let conv = if p.conv.is_some() {
        20 * 20 * 16 * 8 * 8 * 3 + 9 * 9 * 32 * 4 * 4 * 16 + CONV_FEATURE_DIM * 9 * 9 * 32
    } else {
        0
    };
    2.0 * (enc + lstm + heads + conv) as f64
}

/// Train `trainer.trials` independent trials (seeded per trial) in parallel.
pub fn train(spec: &TrainSpec, source: &ObsSource) -> Result<Vec<TrialResult>> {
    train_with_hook(spec, source, None)
}

/// Like [`train`], with an optional per-trial progress callback.
pub fn train_with_hook(
    spec: &TrainSpec,
    source: &ObsSource,
    hook: Option<ProgressHook<'_>>,
) -> Result<Vec<TrialResult>> {
    spec.trainer.validate()?;
    spec.env.validate()?;
    (0..spec.trainer.trials)
        .into_par_iter()
        .map(|trial| run_trial(spec, source, trial, hook))
        .collect()
}

/// One training trial; deterministic for a given (spec, trial).
pub fn train_single_trial(
    spec: &TrainSpec,
    source: &ObsSource,
    trial: usize,
) -> Result<TrialResult> {
    run_trial(spec, source, trial, None)
}

fn run_trial(
    spec: &TrainSpec,
    source: &ObsSource,
    trial: usize,
    hook: Option<ProgressHook<'_>>,
) -> Result<TrialResult> {
    spec.trainer.validate()?;
    let cfg = &spec.trainer;
    let seed = derive_seed(spec.run_seed, &[label::TRIAL, trial as u64]);

    let visual_dim = source.visual_dim().unwrap_or(CONV_FEATURE_DIM);
    let mut params = init_params(visual_dim, seed)?;
    if matches!(source, ObsSource::RawImages { .. }) {
        params = params.with_conv_encoder(seed)?;
    }
    let mut opt = adam::OptState::new(&params);
    let curriculum = CurriculumState::with_schedule(
        spec.env.curriculum_levels,
        spec.curriculum_window,
        spec.curriculum_threshold,
    );
    let mut collector = RolloutCollector::new(
        spec.env,
        source.clone(),
        curriculum,
        cfg.n_envs,
        seed,
        params.hidden_dim,
    )?;
    let mut shuffle_rng = stream_rng(seed, &[label::SHUFFLE]);
    let mut selector = SoftmaxSelector;

    let mut rows: Vec<LogRow> = Vec::new();
    let mut pending_episodes: Vec<EpisodeRecord> = Vec::new();
    let mut episodes_logged: u64 = 0;
    let mut loss_acc = LossStats::default();
    let mut loss_updates = 0usize;
    let mut flops = 0.0f64;
    let fwd = forward_flops(&params);
    let mut stopped_early = false;
    let mut smoothed_success: Option<f64> = None;

    'training: while collector.venv().episodes_finished() < cfg.max_episodes {
        let (batch, records) =
            collector.collect(&params, cfg.rollout_horizon, cfg.bptt_truncation, &mut selector)?;
        flops += fwd * ((cfg.rollout_horizon + 1) * cfg.n_envs) as f64;
        pending_episodes.extend(records);

        let (mut advantages, returns) = compute_gae(&batch, cfg.gamma, cfg.gae_lambda);
        normalize_advantages(&mut advantages);

        let mut order: Vec<usize> = (0..batch.segments.len()).collect();
        for epoch in 0..cfg.epochs_per_update {
            let _ = epoch;
            // Fisher-Yates with the trial's shuffle stream.
            for i in (1..order.len()).rev() {
                let j = shuffle_rng.gen_range(0..=i);
                order.swap(i, j);
            }
            for chunk in order.chunks(cfg.minibatch_sequences) {
                // Group by segment length so each lockstep batch is uniform.
                let mut by_len: Vec<(usize, Vec<&SegmentSnapshot>)> = Vec::new();
                for &si in chunk {
                    let seg = &batch.segments[si];
                    match by_len.iter_mut().find(|(l, _)| *l == seg.len) {
                        Some((_, group)) => group.push(seg),
                        None => by_len.push((seg.len, vec![seg])),
                    }
                }
                let denom: usize = chunk.iter().map(|&si| batch.segments[si].len).sum();
                let mut grads: Option<crate::net::Gradients> = None;
                let mut stats = LossStats::default();
                for (_, group) in &by_len {
                    let seg_batch = build_segment_batch(
                        &batch,
                        &advantages,
                        &returns,
                        group,
                        params.hidden_dim,
                    )?;
                    let (s, g) = segment_loss_and_grad(
                        &params,
                        &seg_batch,
                        &loss_config(cfg, denom),
                    )?;
                    // Forward + backward costs roughly three forward passes.
                    flops += 3.0 * fwd * (seg_batch.n_seq * seg_batch.len) as f64;
                    stats.loss += s.loss;
                    stats.policy_loss += s.policy_loss;
                    stats.value_loss += s.value_loss;
                    stats.entropy += s.entropy;
                    stats.mean_abs_logit = stats.mean_abs_logit.max(s.mean_abs_logit);
                    match grads.as_mut() {
                        Some(acc) => acc.add_assign(&g),
                        None => grads = Some(g),
                    }
                }
                if stats.mean_abs_logit > DIVERGENCE_LOGIT_THRESHOLD {
                    return Err(Error::Numeric(format!(
                        "divergence detected: mean |logit| {} > {DIVERGENCE_LOGIT_THRESHOLD} \
                         (trial {trial}, episode {})",
                        stats.mean_abs_logit,
                        collector.venv().episodes_finished()
                    )));
                }
                if let Some(g) = grads {
                    adam::adam_step(&mut params, &g, &mut opt, cfg.lr);
                }
                loss_acc.policy_loss += stats.policy_loss;
                loss_acc.value_loss += stats.value_loss;
                loss_acc.entropy += stats.entropy;
                loss_updates += 1;
            }
        }

        // Emit a log row per 100 finished episodes.
        while pending_episodes.len() >= 100 {
            let window: Vec<EpisodeRecord> = pending_episodes.drain(..100).collect();
            episodes_logged += 100;
            let mean_reward =
                window.iter().map(|e| e.raw_return).sum::<f64>() / window.len() as f64;
            let mean_steps =
                window.iter().map(|e| e.steps as f64).sum::<f64>() / window.len() as f64;
            let success_rate =
                window.iter().filter(|e| e.completed).count() as f64 / window.len() as f64;
            let updates = loss_updates.max(1) as f64;
            let row = LogRow {
                episode: episodes_logged,
                mean_reward,
                mean_steps,
                success_rate,
                policy_loss: loss_acc.policy_loss / updates,
                value_loss: loss_acc.value_loss / updates,
                entropy: loss_acc.entropy / updates,
                wall_clock_s: flops / 1e9,
            };
            loss_acc = LossStats::default();
            loss_updates = 0;
            rows.push(row);

            if let Some((every, callback)) = hook {
                let row = rows.last().expect("just pushed");
                if every > 0 && row.episode % every == 0 {
                    let progress = TrialProgress { trial, seed, params: &params, row };
                    if callback(&progress) {
                        stopped_early = true;
                        break 'training;
                    }
                }
            }

            if let Some(stop) = &spec.stop {
                let hit = match stop {
                    StopRule::SmoothedSuccess { threshold, weight } => {
                        let s = match smoothed_success {
                            None => success_rate,
                            Some(prev) => weight * prev + (1.0 - weight) * success_rate,
                        };
                        smoothed_success = Some(s);
                        s >= *threshold
                    }
                    StopRule::SustainedSuccess { threshold, rows: need } => {
                        collector.venv().curriculum_level() == spec.env.curriculum_levels
                            && rows.len() >= *need
                            && rows[rows.len() - need..]
                                .iter()
                                .all(|r| r.success_rate >= *threshold)
                    }
                    StopRule::MeanSuccessAtMaxLevel { threshold, rows: need } => {
                        collector.venv().curriculum_level() == spec.env.curriculum_levels
                            && rows.len() >= *need
                            && rows[rows.len() - need..]
                                .iter()
                                .map(|r| r.success_rate)
                                .sum::<f64>()
                                / *need as f64
                                >= *threshold
                    }
                };
                if hit {
                    stopped_early = true;
                    break 'training;
                }
            }
        }
    }

    Ok(TrialResult {
        trial,
        seed,
        rows,
        params,
        episodes: collector.venv().episodes_finished(),
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ObservationMode;

    fn tiny_env(n: usize) -> (EnvConfig, ObsSource) {
        (EnvConfig::new(n, ObservationMode::PositionBaseline), ObsSource::Position)
    }

    fn small_params() -> PolicyParams {
        PolicyParams::init_with_dims(1, 12, 8, 7)
    }

    fn make_collector(n: usize, slots: usize, seed: u64) -> RolloutCollector {
        let (cfg, src) = tiny_env(n);
        RolloutCollector::new(cfg, src, CurriculumState::new(7), slots, seed, 8).unwrap()
    }

    #[test]
    fn rollout_shape_is_envs_by_horizon() {
        let params = small_params();
        let mut collector = make_collector(20, 4, 1);
        let (batch, _) = collector.collect(&params, 16, 8, &mut SoftmaxSelector).unwrap();
        assert_eq!(batch.n_envs, 4);
        assert_eq!(batch.horizon, 16);
        assert_eq!(batch.actions.len(), 64);
        assert_eq!(batch.segments.len(), 2 * 4, "two snapshots per slot");
    }

    #[test]
    fn zero_head_policy_samples_uniformly() {
        let params = small_params(); // heads zero-initialized
        let mut collector = make_collector(50, 4, 3);
        let mut counts = [0usize; 3];
        let mut total = 0usize;
        while total < 10_000 {
            let (batch, _) = collector.collect(&params, 25, 25, &mut SoftmaxSelector).unwrap();
            for &a in &batch.actions {
                counts[a as usize] += 1;
                total += 1;
            }
        }
        for c in counts {
            let freq = c as f64 / total as f64;
            assert!((freq - 1.0 / 3.0).abs() < 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn greedy_oracle_completes_every_episode_in_distance_steps() {
        let params = small_params();
        let (cfg, src) = tiny_env(30);
        let mut collector =
            RolloutCollector::new(cfg, src, CurriculumState::new(7), 4, 11, 8).unwrap();
        let mut records = Vec::new();
        for _ in 0..12 {
            let (_, r) = collector
                .collect(&params, 32, 32, &mut GreedyOracleSelector)
                .unwrap();
            records.extend(r);
        }
        assert!(records.len() > 40, "oracle finishes episodes fast");
        for rec in &records {
            assert!(rec.completed);
            assert_eq!(rec.steps, rec.start_index.abs_diff(rec.target_index));
            assert!((rec.raw_return - 1.0).abs() < 1e-12, "no punishments on the shortest path");
        }
        let mean_steps: f64 =
            records.iter().map(|r| r.steps as f64).sum::<f64>() / records.len() as f64;
        let mean_dist: f64 = records
            .iter()
            .map(|r| r.start_index.abs_diff(r.target_index) as f64)
            .sum::<f64>()
            / records.len() as f64;
        assert!((mean_steps - mean_dist).abs() < 1e-12);
    }

    #[test]
    fn gae_lambda_zero_is_one_step_td() {
        let batch = synthetic_batch(vec![0.0, -0.01, 1.0], vec![0.2, 0.1, 0.05], vec![false, false, true], 0.0);
        let (adv, _) = compute_gae(&batch, 0.99, 0.0);
        let expect = [
            0.0 + 0.99 * 0.1 - 0.2,
            -0.01 + 0.99 * 0.05 - 0.1,
            1.0 - 0.05,
        ];
        for (a, e) in adv.iter().zip(expect) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn gae_undiscounted_with_zero_values_sums_future_rewards() {
        let rewards = vec![1.0, 0.0, 2.0, -1.0];
        let batch = synthetic_batch(rewards, vec![0.0; 4], vec![false, false, false, true], 0.0);
        let (adv, ret) = compute_gae(&batch, 1.0, 1.0);
        let expect = [2.0, 1.0, 1.0, -1.0];
        for ((a, r), e) in adv.iter().zip(&ret).zip(expect) {
            assert!((a - e).abs() < 1e-12);
            assert!((r - e).abs() < 1e-12, "returns = advantages for zero values");
        }
    }

    #[test]
    fn gae_three_step_worked_example() {
        // r=(0, −0.01, 1), V=(0.2, 0.1, 0.05), γ=0.99, λ=0.95, terminal end.
        let batch = synthetic_batch(
            vec![0.0, -0.01, 1.0],
            vec![0.2, 0.1, 0.05],
            vec![false, false, true],
            0.0,
        );
        let (adv, ret) = compute_gae(&batch, 0.99, 0.95);
        // Independent recursive oracle.
        let (gamma, lambda) = (0.99, 0.95);
        let deltas = [
            0.0 + gamma * 0.1 - 0.2,
            -0.01 + gamma * 0.05 - 0.1,
            1.0 - 0.05,
        ];
        let mut expect = [0.0; 3];
        expect[2] = deltas[2];
        expect[1] = deltas[1] + gamma * lambda * expect[2];
        expect[0] = deltas[0] + gamma * lambda * expect[1];
        for (a, e) in adv.iter().zip(expect) {
            assert!((a - e).abs() < 1e-12);
        }
        for (i, r) in ret.iter().enumerate() {
            assert!((r - (expect[i] + batch.values[i])).abs() < 1e-12);
        }
    }

    /// GAE against the explicit double-sum definition
    /// A_t = Σ_{l≥0} (γλ)^l δ_{t+l} within an episode.
    #[test]
    fn gae_matches_double_sum_on_random_episodes() {
        let mut rng = stream_rng(55, &[0]);
        for _ in 0..200 {
            let len = rng.gen_range(1..=10);
            let rewards: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let values: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut dones = vec![false; len];
            dones[len - 1] = true;
            let bootstrap = rng.gen_range(-1.0..1.0);
            let gamma = rng.gen_range(0.9..1.0);
            let lambda = rng.gen_range(0.0..1.0);
            let mut batch = synthetic_batch(rewards.clone(), values.clone(), dones, bootstrap);
            batch.bootstrap_values = vec![bootstrap];
            let (adv, _) = compute_gae(&batch, gamma, lambda);

            let delta = |t: usize| -> f64 {
                let next = if t + 1 < len { values[t + 1] } else { 0.0 };
                let nonterm = if t == len - 1 { 0.0 } else { 1.0 };
                rewards[t] + gamma * next * nonterm - values[t]
            };
            for t in 0..len {
                let mut sum = 0.0;
                let mut w = 1.0;
                for l in t..len {
                    sum += w * delta(l);
                    w *= gamma * lambda;
                }
                assert!((adv[t] - sum).abs() < 1e-10, "t={t}: {} vs {sum}", adv[t]);
            }
        }
    }

    fn synthetic_batch(
        rewards: Vec<f64>,
        values: Vec<f64>,
        dones: Vec<bool>,
        bootstrap: f64,
    ) -> RolloutBatch {
        let t = rewards.len();
        RolloutBatch {
            n_envs: 1,
            horizon: t,
            obs_dim: 2,
            obs: RolloutObs::Vectors(vec![0.0; t * 2]),
            actions: vec![0; t],
            log_probs: vec![0.0; t],
            rewards,
            values,
            dones,
            episode_start: vec![false; t],
            bootstrap_values: vec![bootstrap],
            segments: vec![],
        }
    }

    #[test]
    fn advantage_normalization_invariant() {
        let mut rng = stream_rng(66, &[0]);
        let mut adv: Vec<f64> = (0..257).map(|_| rng.gen_range(-3.0..5.0)).collect();
        normalize_advantages(&mut adv);
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ratio_one_loss_reduces_to_mean_advantage() {
        // With new params == old params, ρ = 1 and the clipped surrogate term
        // equals −mean(Â).
        let params = small_params();
        let mut collector = make_collector(20, 2, 9);
        let (batch, _) = collector.collect(&params, 8, 8, &mut SoftmaxSelector).unwrap();
        let (mut adv, ret) = compute_gae(&batch, 0.99, 0.95);
        normalize_advantages(&mut adv);
        let segs: Vec<&SegmentSnapshot> = batch.segments.iter().collect();
        let seg_batch = build_segment_batch(&batch, &adv, &ret, &segs, 8).unwrap();
        let cfg = TrainerConfig::default();
        let stats = ppo_loss(&params, &seg_batch, &cfg).unwrap();
        let mean_adv = seg_batch.advantage.iter().sum::<f64>() / seg_batch.advantage.len() as f64;
        assert!(
            (stats.policy_loss - (-mean_adv)).abs() < 1e-10,
            "policy loss {} vs −mean advantage {}",
            stats.policy_loss,
            -mean_adv
        );
        assert!((stats.entropy - 3.0f64.ln()).abs() < 1e-9, "uniform policy entropy ln 3");
    }

    #[test]
    fn hand_computed_two_sample_loss() {
        // One sequence, two steps, tiny widths; every number recomputed with
        // straight-line scalar arithmetic below.
        let mut params = PolicyParams::init_with_dims(1, 4, 3, 13);
        let mut rng = stream_rng(14, &[0]);
        for w in params.pi_w.iter_mut().chain(params.v_w.iter_mut()) {
            *w = rng.gen_range(-0.8..0.8);
        }
        params.pi_b = vec![0.05, -0.1, 0.0];
        params.v_b[0] = 0.2;

        let obs = vec![0.3, 0.9, -0.4, 0.1]; // two steps × obs_dim 2
        let seg = SegmentBatch {
            n_seq: 1,
            len: 2,
            obs_dim: 2,
            obs: SegmentObs::Vectors(obs.clone()),
            actions: vec![0, 2],
            old_logprob: vec![-1.2, -1.0],
            advantage: vec![0.7, -0.4],
            ret: vec![0.5, 0.1],
            episode_start: vec![true, false],
            h0: vec![0.0; 3],
            c0: vec![0.0; 3],
            prev_action0: vec![0.0; 3],
        };
        let cfg = TrainerConfig { clip: 0.2, value_coef: 0.5, entropy_coef: 0.01, ..TrainerConfig::default() };
        let stats = ppo_loss(&params, &seg, &cfg).unwrap();

        // Scalar oracle.
        let mut hidden = crate::net::Hidden::zeros(3);
        let mut expect_policy = 0.0;
        let mut expect_value = 0.0;
        let mut expect_entropy = 0.0;
        for t in 0..2 {
            if t == 1 {
                hidden.set_prev_action(Action::Forward); // action 0 at t=0
            }
            let (logits, value, next) =
                crate::net::policy_forward(&params, &obs[t * 2..(t + 1) * 2], &hidden).unwrap();
            hidden = next;
            let mut p = vec![0.0; 3];
            let mut lp = vec![0.0; 3];
            crate::net::ops::softmax_row(&logits, &mut p, &mut lp);
            let a = seg.actions[t] as usize;
            let ratio = (lp[a] - seg.old_logprob[t]).exp();
            let clipped = ratio.clamp(0.8, 1.2);
            let adv = seg.advantage[t];
            expect_policy += -(ratio * adv).min(clipped * adv);
            expect_value += (value - seg.ret[t]) * (value - seg.ret[t]);
            expect_entropy += crate::net::ops::entropy_row(&p, &lp);
        }
        expect_policy /= 2.0;
        expect_value /= 2.0;
        expect_entropy /= 2.0;
        let expect_loss = expect_policy + 0.5 * expect_value - 0.01 * expect_entropy;
        assert!((stats.policy_loss - expect_policy).abs() < 1e-12);
        assert!((stats.value_loss - expect_value).abs() < 1e-12);
        assert!((stats.entropy - expect_entropy).abs() < 1e-12);
        assert!((stats.loss - expect_loss).abs() < 1e-12);
    }

    #[test]
    fn clipped_branch_kills_policy_gradient() {
        // Single sample with Â > 0 and ρ forced above 1+ε: the surrogate's
        // gradient through the policy head must vanish (entropy off).
        let mut params = PolicyParams::init_with_dims(1, 4, 3, 17);
        let mut rng = stream_rng(18, &[0]);
        for w in params.pi_w.iter_mut() {
            *w = rng.gen_range(-0.5..0.5);
        }
        let seg = SegmentBatch {
            n_seq: 1,
            len: 1,
            obs_dim: 2,
            obs: SegmentObs::Vectors(vec![0.5, 0.2]),
            actions: vec![1],
            // Old log-prob far below the new one forces ρ >> 1+ε.
            old_logprob: vec![-8.0],
            advantage: vec![1.5],
            ret: vec![0.0],
            episode_start: vec![true],
            h0: vec![0.0; 3],
            c0: vec![0.0; 3],
            prev_action0: vec![0.0; 3],
        };
        let cfg = TrainerConfig {
            entropy_coef: 0.0,
            value_coef: 0.0,
            ..TrainerConfig::default()
        };
        let (_, grads) = segment_loss_and_grad(
            &params,
            &seg,
            &loss_config(&cfg, 1),
        )
        .unwrap();
        assert!(grads.pi_w.iter().all(|&g| g == 0.0), "clipped branch is constant in θ");
        assert!(grads.pi_b.iter().all(|&g| g == 0.0));
        assert!(grads.enc_w.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_advantage_zero_entropy_zeroes_policy_head_gradient() {
        let params = small_params();
        let mut collector = make_collector(20, 2, 21);
        let (batch, _) = collector.collect(&params, 8, 8, &mut SoftmaxSelector).unwrap();
        let (_, ret) = compute_gae(&batch, 0.99, 0.95);
        let adv = vec![0.0; ret.len()];
        let segs: Vec<&SegmentSnapshot> = batch.segments.iter().collect();
        let seg_batch = build_segment_batch(&batch, &adv, &ret, &segs, 8).unwrap();
        let cfg = TrainerConfig { entropy_coef: 0.0, ..TrainerConfig::default() };
        let (_, grads) = segment_loss_and_grad(
            &params,
            &seg_batch,
            &loss_config(&cfg, seg_batch.n_seq * seg_batch.len),
        )
        .unwrap();
        assert!(grads.pi_w.iter().all(|&g| g == 0.0));
        assert!(grads.pi_b.iter().all(|&g| g == 0.0));
        // The value path still learns.
        assert!(grads.v_w.iter().any(|&g| g != 0.0) || grads.v_b[0] != 0.0);
    }

    #[test]
    fn duplicated_sample_doubles_its_contribution() {
        // grad([s1, s2, s2]) with mean reduction equals (g1 + 2·g2)/3.
        let mut params = PolicyParams::init_with_dims(1, 4, 3, 23);
        let mut rng = stream_rng(24, &[0]);
        for w in params.pi_w.iter_mut().chain(params.v_w.iter_mut()) {
            *w = rng.gen_range(-0.6..0.6);
        }
        let sample = |obs: [f64; 2], action: u8, old_lp: f64, adv: f64, ret: f64| SegmentBatch {
            n_seq: 1,
            len: 1,
            obs_dim: 2,
            obs: SegmentObs::Vectors(obs.to_vec()),
            actions: vec![action],
            old_logprob: vec![old_lp],
            advantage: vec![adv],
            ret: vec![ret],
            episode_start: vec![true],
            h0: vec![0.0; 3],
            c0: vec![0.0; 3],
            prev_action0: vec![0.0; 3],
        };
        let s1 = sample([0.1, -0.3], 0, -1.1, 0.4, 0.2);
        let s2 = sample([0.7, 0.2], 2, -1.05, -0.6, -0.1);
        let cfg = TrainerConfig::default();

        let grad_of = |batches: &[&SegmentBatch], denom: usize| -> crate::net::Gradients {
            let mut acc: Option<crate::net::Gradients> = None;
            for b in batches {
                let (_, g) =
                    segment_loss_and_grad(&params, b, &loss_config(&cfg, denom)).unwrap();
                match acc.as_mut() {
                    Some(a) => a.add_assign(&g),
                    None => acc = Some(g),
                }
            }
            acc.unwrap()
        };
        let g1 = grad_of(&[&s1], 1);
        let g2 = grad_of(&[&s2], 1);
        let combined = grad_of(&[&s1, &s2, &s2], 3);
        let mut expect = g1.clone();
        let mut twice_g2 = g2.clone();
        twice_g2.scale(2.0);
        expect.add_assign(&twice_g2);
        expect.scale(1.0 / 3.0);
        for ((_, a), (_, b)) in combined.named_tensors().iter().zip(expect.named_tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn lr_zero_training_leaves_params_bit_identical() {
        let (cfg_env, src) = tiny_env(20);
        let trainer = TrainerConfig {
            lr: 0.0,
            n_envs: 2,
            rollout_horizon: 16,
            bptt_truncation: 8,
            minibatch_sequences: 2,
            epochs_per_update: 1,
            trials: 1,
            max_episodes: 10,
            ..TrainerConfig::default()
        };
        let spec = TrainSpec::new(trainer, cfg_env, 31);
        let result = train_single_trial(&spec, &src, 0).unwrap();
        let init = init_params(1, result.seed).unwrap();
        assert_eq!(result.params, init);
    }

    #[test]
    fn training_is_deterministic_per_config_and_seed() {
        let run = || {
            let (cfg_env, src) = tiny_env(20);
            let trainer = TrainerConfig {
                n_envs: 2,
                rollout_horizon: 16,
                bptt_truncation: 8,
                minibatch_sequences: 2,
                epochs_per_update: 2,
                trials: 1,
                max_episodes: 30,
                ..TrainerConfig::default()
            };
            let spec = TrainSpec::new(trainer, cfg_env, 77);
            train_single_trial(&spec, &src, 0).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.params, b.params);
        assert_eq!(a.episodes, b.episodes);
    }

    #[test]
    fn entropy_never_exceeds_ln3() {
        let params = small_params();
        let mut collector = make_collector(20, 2, 41);
        let (batch, _) = collector.collect(&params, 8, 8, &mut SoftmaxSelector).unwrap();
        let (mut adv, ret) = compute_gae(&batch, 0.99, 0.95);
        normalize_advantages(&mut adv);
        let segs: Vec<&SegmentSnapshot> = batch.segments.iter().collect();
        let seg_batch = build_segment_batch(&batch, &adv, &ret, &segs, 8).unwrap();
        let stats = ppo_loss(&params, &seg_batch, &TrainerConfig::default()).unwrap();
        assert!(stats.entropy <= 3.0f64.ln() + 1e-12);
    }

    use crate::rng::stream_rng;
}
