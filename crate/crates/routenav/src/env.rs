//! Goal-driven navigation MDP over a traversal.
//!
//! State is the agent's frame index plus a per-episode target index. The
//! three discrete actions move one frame forward or backward (clamped at the
//! route ends) or stay. Reward is sparse: +1 on reaching the target, a
//! punishment of −1/ms on every step that strictly increases the index
//! distance to the target, 0 otherwise. A curriculum widens the admissible
//! target distance over levels as recent episodes succeed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{label, stream_rng};
use crate::traversal::{make_raw_frame_image, Condition, Traversal};

/// Discrete action set. Codes are stable: FORWARD=0, BACKWARD=1, STAY=2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Forward = 0,
    Backward = 1,
    Stay = 2,
}

pub const N_ACTIONS: usize = 3;
pub const ACTIONS: [Action; N_ACTIONS] = [Action::Forward, Action::Backward, Action::Stay];

impl Action {
    pub fn from_code(code: usize) -> Result<Action> {
        match code {
            0 => Ok(Action::Forward),
            1 => Ok(Action::Backward),
            2 => Ok(Action::Stay),
            other => Err(Error::Bounds(format!("action code {other} out of range 0..3"))),
        }
    }

    pub fn code(&self) -> usize {
        *self as usize
    }
}

/// What the agent observes each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// Visual descriptor of the current frame plus the goal scalar.
    Bimodal,
    /// Scalar position (current index / (N−1)) plus the goal scalar.
    PositionBaseline,
    /// Procedural RGB image of the current frame plus the goal scalar.
    RawImage,
}

impl std::str::FromStr for ObservationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bimodal" => Ok(ObservationMode::Bimodal),
            "position_baseline" => Ok(ObservationMode::PositionBaseline),
            "raw_image" => Ok(ObservationMode::RawImage),
            other => Err(Error::InvalidConfig(format!(
                "unknown observation mode {other:?}, expected bimodal|position_baseline|raw_image"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Number of frames in the traversal.
    pub n_frames: usize,
    /// Step budget per episode; defaults to the traversal length.
    pub max_steps: usize,
    pub curriculum_levels: usize,
    pub observation_mode: ObservationMode,
}

impl EnvConfig {
    pub fn new(n_frames: usize, observation_mode: ObservationMode) -> Self {
        EnvConfig { n_frames, max_steps: n_frames, curriculum_levels: 7, observation_mode }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_frames must be >= 2, got {}",
                self.n_frames
            )));
        }
        if self.max_steps < 1 {
            return Err(Error::InvalidConfig("max_steps must be >= 1".into()));
        }
        if self.curriculum_levels < 1 {
            return Err(Error::InvalidConfig("curriculum_levels must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    InProgress,
    Completed,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvState {
    pub current_index: usize,
    pub target_index: usize,
    pub steps_taken: usize,
    pub level: usize,
    pub done: bool,
    pub outcome: Outcome,
}

/// Visual half of an observation.
#[derive(Debug, Clone, PartialEq)]
pub enum Visual {
    /// Descriptor (bimodal mode) or 1-d position (baseline mode).
    Vector(Vec<f64>),
    /// 84×84×3 RGB bytes (raw-image mode).
    Image(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub visual: Visual,
    pub goal: f64,
}

impl Observation {
    /// Concatenated bimodal vector `[x_t, g_t]`; only defined for vector
    /// visuals (the raw-image pipeline concatenates after its conv encoder).
    pub fn bimodal(&self) -> Option<Vec<f64>> {
        match &self.visual {
            Visual::Vector(x) => {
                let mut b = x.clone();
                b.push(self.goal);
                Some(b)
            }
            Visual::Image(_) => None,
        }
    }
}

/// Encode a target index as a scalar in [0, 1].
pub fn encode_goal(target_index: usize, n_frames: usize) -> Result<f64> {
    if n_frames < 2 {
        return Err(Error::InvalidConfig(format!("n_frames must be >= 2, got {n_frames}")));
    }
    if target_index >= n_frames {
        return Err(Error::Bounds(format!(
            "target index {target_index} out of range 0..{n_frames}"
        )));
    }
    Ok(target_index as f64 / (n_frames - 1) as f64)
}

/// Concatenate a visual vector with the goal scalar.
pub fn assemble_observation(x: &[f64], goal: f64) -> Observation {
    Observation { visual: Visual::Vector(x.to_vec()), goal }
}

/// Maximum admissible target distance at a curriculum level.
pub fn level_max_distance(level: usize, n_frames: usize, levels: usize) -> usize {
    // ceil(level·N/levels), clipped to the longest possible distance.
    ((level * n_frames + levels - 1) / levels).min(n_frames - 1)
}

/// Sample a target uniformly over indices with 1 ≤ |target−start| ≤
/// ceil(level·N/levels), clipped to the route; never equals start.
pub fn sample_target(
    level: usize,
    start: usize,
    n_frames: usize,
    levels: usize,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    if n_frames < 2 {
        return Err(Error::InvalidConfig(format!(
            "no valid target exists on a route of {n_frames} frame(s)"
        )));
    }
    if level < 1 || level > levels {
        return Err(Error::Bounds(format!("level {level} out of range 1..={levels}")));
    }
    if start >= n_frames {
        return Err(Error::Bounds(format!("start {start} out of range 0..{n_frames}")));
    }
    let dmax = level_max_distance(level, n_frames, levels);
    let left = start - start.saturating_sub(dmax); // count of valid indices below start
    let right = (start + dmax).min(n_frames - 1) - start; // count above start
    let total = left + right;
    debug_assert!(total > 0);
    let pick = rng.gen_range(0..total);
    Ok(if pick < left { start - left + pick } else { start + (pick - left) + 1 })
}

/// Curriculum over target distance: level grows (never shrinks) when the
/// recent-success window fills at or above the promotion threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumState {
    level: usize,
    max_level: usize,
    window: usize,
    promote_threshold: f64,
    recent: Vec<bool>,
}

pub const DEFAULT_PROMOTE_WINDOW: usize = 500;
pub const DEFAULT_PROMOTE_THRESHOLD: f64 = 0.8;

impl CurriculumState {
    pub fn new(max_level: usize) -> Self {
        Self::with_schedule(max_level, DEFAULT_PROMOTE_WINDOW, DEFAULT_PROMOTE_THRESHOLD)
    }

    pub fn with_schedule(max_level: usize, window: usize, promote_threshold: f64) -> Self {
        CurriculumState {
            level: 1,
            max_level: max_level.max(1),
            window: window.max(1),
            promote_threshold,
            recent: Vec::new(),
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn window_len(&self) -> usize {
        self.recent.len()
    }
}

/// Push an episode outcome into the window; promote when the window is full
/// with success rate at or above the threshold. The window clears on
/// promotion. Returns the updated state.
pub fn update_curriculum(mut c: CurriculumState, success: bool) -> CurriculumState {
    if c.recent.len() == c.window {
        c.recent.remove(0);
    }
    c.recent.push(success);
    if c.level < c.max_level && c.recent.len() == c.window {
        let successes = c.recent.iter().filter(|&&s| s).count();
        if successes as f64 / c.window as f64 >= c.promote_threshold {
            c.level += 1;
            c.recent.clear();
        }
    }
    c
}

/// Per-frame observation source resolved ahead of stepping.
#[derive(Debug, Clone)]
pub enum ObsSource {
    /// One feature vector per frame (raw or projected descriptors).
    Features(Vec<Vec<f64>>),
    /// Scalar position observations.
    Position,
    /// Procedural images; generated on demand per (frame, condition, seed).
    RawImages { seed: u64, condition: Condition },
}

impl ObsSource {
    /// Feature source straight from a traversal's descriptors.
    pub fn from_traversal(t: &Traversal) -> ObsSource {
        ObsSource::Features(t.descriptor_matrix())
    }

    /// Visual dimensionality d (64 for images is not meaningful; the conv
    /// encoder defines its own output width).
    pub fn visual_dim(&self) -> Option<usize> {
        match self {
            ObsSource::Features(rows) => Some(rows[0].len()),
            ObsSource::Position => Some(1),
            ObsSource::RawImages { .. } => None,
        }
    }

    pub fn observe(&self, index: usize, goal: f64, n_frames: usize) -> Observation {
        match self {
            ObsSource::Features(rows) => assemble_observation(&rows[index], goal),
            ObsSource::Position => {
                assemble_observation(&[index as f64 / (n_frames - 1) as f64], goal)
            }
            ObsSource::RawImages { seed, condition } => Observation {
                visual: Visual::Image(make_raw_frame_image(index, *condition, *seed)),
                goal,
            },
        }
    }

    fn matches_mode(&self, mode: ObservationMode) -> bool {
        matches!(
            (self, mode),
            (ObsSource::Features(_), ObservationMode::Bimodal)
                | (ObsSource::Position, ObservationMode::PositionBaseline)
                | (ObsSource::RawImages { .. }, ObservationMode::RawImage)
        )
    }
}

/// Start a fresh episode: uniform start index, curriculum-sampled target.
pub fn reset(
    config: &EnvConfig,
    curriculum: &CurriculumState,
    source: &ObsSource,
    rng: &mut ChaCha8Rng,
) -> Result<(EnvState, Observation)> {
    config.validate()?;
    if !source.matches_mode(config.observation_mode) {
        return Err(Error::InvalidConfig(
            "observation source does not match the configured observation mode".into(),
        ));
    }
    if let ObsSource::Features(rows) = source {
        if rows.len() != config.n_frames {
            return Err(Error::InvalidConfig(format!(
                "observation source has {} frames but config declares {}",
                rows.len(),
                config.n_frames
            )));
        }
    }
    let start = rng.gen_range(0..config.n_frames);
    let target = sample_target(
        curriculum.level(),
        start,
        config.n_frames,
        config.curriculum_levels,
        rng,
    )?;
    let state = EnvState {
        current_index: start,
        target_index: target,
        steps_taken: 0,
        level: curriculum.level(),
        done: false,
        outcome: Outcome::InProgress,
    };
    let goal = encode_goal(target, config.n_frames)?;
    let obs = source.observe(start, goal, config.n_frames);
    Ok((state, obs))
}

/// Episode initialization for deployment: uniform start, target uniform over
/// all indices ≠ start (no curriculum).
pub fn reset_free_target(config: &EnvConfig, rng: &mut ChaCha8Rng) -> Result<EnvState> {
    config.validate()?;
    let start = rng.gen_range(0..config.n_frames);
    let offset = rng.gen_range(1..config.n_frames);
    let target = (start + offset) % config.n_frames;
    Ok(EnvState {
        current_index: start,
        target_index: target,
        steps_taken: 0,
        level: config.curriculum_levels,
        done: false,
        outcome: Outcome::InProgress,
    })
}

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: EnvState,
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
}

/// Transition function. Pure: the successor state is returned, the input is
/// unchanged. Stepping a finished episode is a contract violation.
pub fn step(
    state: &EnvState,
    action: Action,
    config: &EnvConfig,
    source: &ObsSource,
) -> Result<StepResult> {
    if state.done {
        return Err(Error::Contract("step called on a finished episode".into()));
    }
    let n = config.n_frames;
    let old = state.current_index;
    let new = match action {
        Action::Forward => (old + 1).min(n - 1),
        Action::Backward => old.saturating_sub(1),
        Action::Stay => old,
    };
    let target = state.target_index;
    let old_dist = old.abs_diff(target);
    let new_dist = new.abs_diff(target);
    let steps_taken = state.steps_taken + 1;

    let (reward, outcome) = if new == target {
        (1.0, Outcome::Completed)
    } else {
        let r = if new_dist > old_dist { -1.0 / config.max_steps as f64 } else { 0.0 };
        let outcome =
            if steps_taken >= config.max_steps { Outcome::Failed } else { Outcome::InProgress };
        (r, outcome)
    };
    let done = outcome != Outcome::InProgress;
    let next = EnvState {
        current_index: new,
        target_index: target,
        steps_taken,
        level: state.level,
        done,
        outcome,
    };
    let goal = encode_goal(target, n)?;
    let observation = source.observe(new, goal, n);
    Ok(StepResult { state: next, observation, reward, done })
}

/// Summary of one finished episode, emitted by the vectorized environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub slot: usize,
    pub start_index: usize,
    pub target_index: usize,
    pub steps: usize,
    pub raw_return: f64,
    pub completed: bool,
    pub level: usize,
}

struct Slot {
    state: EnvState,
    episode: u64,
    rng: ChaCha8Rng,
    start_index: usize,
    episode_return: f64,
}

/// A bank of synchronized environment slots with auto-reset and a shared
/// curriculum.
///
/// Each slot owns a private random stream seeded from
/// (run_seed, slot, episode), so a slot's trajectory does not depend on what
/// other slots do; episode outcomes are applied to the curriculum in slot
/// order, making the whole bank deterministic.
pub struct VecEnv {
    config: EnvConfig,
    source: ObsSource,
    slots: Vec<Slot>,
    curriculum: CurriculumState,
    run_seed: u64,
    episodes_finished: u64,
}

impl VecEnv {
    pub fn new(
        config: EnvConfig,
        source: ObsSource,
        curriculum: CurriculumState,
        n_slots: usize,
        run_seed: u64,
    ) -> Result<(VecEnv, Vec<Observation>)> {
        config.validate()?;
        if n_slots == 0 {
            return Err(Error::InvalidConfig("need at least one env slot".into()));
        }
        let mut slots = Vec::with_capacity(n_slots);
        let mut observations = Vec::with_capacity(n_slots);
        for slot_idx in 0..n_slots {
            let mut rng = stream_rng(run_seed, &[label::ENV_SLOT, slot_idx as u64, 0]);
            let (state, obs) = reset(&config, &curriculum, &source, &mut rng)?;
            slots.push(Slot {
                start_index: state.current_index,
                state,
                episode: 0,
                rng,
                episode_return: 0.0,
            });
            observations.push(obs);
        }
        Ok((VecEnv { config, source, slots, curriculum, run_seed, episodes_finished: 0 }, observations))
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn source(&self) -> &ObsSource {
        &self.source
    }

    pub fn curriculum_level(&self) -> usize {
        self.curriculum.level()
    }

    pub fn episodes_finished(&self) -> u64 {
        self.episodes_finished
    }

    /// Episode counter of one slot (0 during its first episode).
    pub fn slot_episode(&self, slot: usize) -> u64 {
        self.slots[slot].episode
    }

    pub fn states(&self) -> Vec<EnvState> {
        self.slots.iter().map(|s| s.state).collect()
    }

    /// Step every slot with its action. Finished episodes are recorded,
    /// pushed into the curriculum (slot order), and auto-reset with a fresh
    /// per-episode stream; the returned observation for such a slot is the
    /// reset observation of the next episode.
    pub fn step_all(
        &mut self,
        actions: &[Action],
    ) -> Result<(Vec<StepTransition>, Vec<EpisodeRecord>)> {
        if actions.len() != self.slots.len() {
            return Err(Error::Shape(format!(
                "{} actions for {} slots",
                actions.len(),
                self.slots.len()
            )));
        }
        let mut transitions = Vec::with_capacity(actions.len());
        let mut records = Vec::new();
        for (idx, (slot, &action)) in self.slots.iter_mut().zip(actions).enumerate() {
            let result = step(&slot.state, action, &self.config, &self.source)?;
            slot.episode_return += result.reward;
            let mut transition = StepTransition {
                reward: result.reward,
                done: result.done,
                observation: result.observation,
            };
            if result.done {
                let record = EpisodeRecord {
                    slot: idx,
                    start_index: slot.start_index,
                    target_index: slot.state.target_index,
                    steps: result.state.steps_taken,
                    raw_return: slot.episode_return,
                    completed: result.state.outcome == Outcome::Completed,
                    level: slot.state.level,
                };
                self.curriculum =
                    update_curriculum(self.curriculum.clone(), record.completed);
                self.episodes_finished += 1;
                records.push(record);

                slot.episode += 1;
                slot.rng = stream_rng(
                    self.run_seed,
                    &[label::ENV_SLOT, idx as u64, slot.episode],
                );
                let (state, obs) =
                    reset(&self.config, &self.curriculum, &self.source, &mut slot.rng)?;
                slot.start_index = state.current_index;
                slot.state = state;
                slot.episode_return = 0.0;
                transition.observation = obs;
            } else {
                slot.state = result.state;
            }
            transitions.push(transition);
        }
        Ok((transitions, records))
    }
}

/// Post-step view for one slot: reward and done refer to the step taken; the
/// observation is the next input (reset observation when done).
#[derive(Debug, Clone)]
pub struct StepTransition {
    pub reward: f64,
    pub done: bool,
    pub observation: Observation,
}
