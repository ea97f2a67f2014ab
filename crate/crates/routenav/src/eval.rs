//! Evaluation: single-frame place recognition (precision-recall AUC via a
//! reference-trained classifier) and navigation deployment statistics, plus
//! the exponential curve smoothing used at reporting time.


use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    encode_goal, reset_free_target, EnvConfig, EnvState, ObsSource, Outcome, N_ACTIONS,
};
use crate::error::{Error, Result};
use crate::net::ops;
use crate::net::{forward_step_batch, HiddenBatch, PolicyParams};
use crate::rng::{label, stream_rng};
use crate::traversal::{Condition, Traversal};

/// One-affine-layer softmax classifier over descriptor space: one class per
/// reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaceClassifier {
    /// Row-major [n_classes × dim].
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub n_classes: usize,
    pub dim: usize,
}

impl PlaceClassifier {
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.b[k] + ops::dot(&self.w[k * self.dim..(k + 1) * self.dim], x);
        }
        out
    }
}

const CLASSIFIER_MOMENTUM: f64 = 0.9;

/// Train the place classifier on a reference traversal by full-batch
/// gradient descent (momentum 0.9) on the softmax cross-entropy.
/// Zero-initialized, so zero epochs leave all logits equal; the run is
/// deterministic (the seed is part of the protocol surface and reserved for
/// stochastic trainers).
pub fn train_place_classifier(
    reference: &Traversal,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> PlaceClassifier {
    let _ = seed;
    let n = reference.len();
    let d = reference.dim();
    let mut clf = PlaceClassifier { w: vec![0.0; n * d], b: vec![0.0; n], n_classes: n, dim: d };

    let mut probs = vec![0.0; n];
    let mut log_probs = vec![0.0; n];
    let mut vw = vec![0.0; n * d];
    let mut vb = vec![0.0; n];
    for _ in 0..epochs {
        // Gradient of mean cross-entropy: (softmax − onehot)/n per sample.
        let mut gw = vec![0.0; n * d];
        let mut gb = vec![0.0; n];
        for (sample_idx, frame) in reference.frames().iter().enumerate() {
            let logits = clf.logits(&frame.descriptor);
            ops::softmax_row(&logits, &mut probs, &mut log_probs);
            for k in 0..n {
                let err = probs[k] - if k == sample_idx { 1.0 } else { 0.0 };
                if err == 0.0 {
                    continue;
                }
                gb[k] += err;
                ops::axpy(&mut gw[k * d..(k + 1) * d], err, &frame.descriptor);
            }
        }
        let scale = lr / n as f64;
        for ((w, v), g) in clf.w.iter_mut().zip(&mut vw).zip(&gw) {
            *v = CLASSIFIER_MOMENTUM * *v - scale * g;
            *w += *v;
        }
        for ((b, v), g) in clf.b.iter_mut().zip(&mut vb).zip(&gb) {
            *v = CLASSIFIER_MOMENTUM * *v - scale * g;
            *b += *v;
        }
    }
    clf
}

/// Per-frame prediction: argmax class and its softmax probability.
pub fn score_query(clf: &PlaceClassifier, query: &Traversal) -> Result<Vec<(usize, f64)>> {
    if query.dim() != clf.dim {
        return Err(Error::Shape(format!(
            "query dim {} does not match classifier dim {}",
            query.dim(),
            clf.dim
        )));
    }
    let mut probs = vec![0.0; clf.n_classes];
    let mut log_probs = vec![0.0; clf.n_classes];
    Ok(query
        .frames()
        .iter()
        .map(|f| {
            let logits = clf.logits(&f.descriptor);
            ops::softmax_row(&logits, &mut probs, &mut log_probs);
            let (best, best_p) = probs
                .iter()
                .cloned()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |acc, (i, p)| {
                    if p > acc.1 {
                        (i, p)
                    } else {
                        acc
                    }
                });
            (best, best_p)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision-recall curve swept over the observed score set, with the frame
/// tolerance used to judge correctness.
#[derive(Debug, Clone, PartialEq)]
pub struct PRCurve {
    pub points: Vec<PrPoint>,
    pub tolerance: usize,
}

/// Sweep thresholds over the observed scores (descending). A prediction is
/// correct iff `|predicted − true| ≤ tolerance`; at each threshold,
/// precision = correct∧accepted / accepted and recall = correct∧accepted /
/// total.
pub fn precision_recall(
    predictions: &[(usize, f64)],
    ground_truth: &[usize],
    tolerance: usize,
) -> Result<PRCurve> {
    if predictions.is_empty() {
        return Err(Error::EmptyCurve("no predictions to sweep".into()));
    }
    if predictions.len() != ground_truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} ground-truth indices",
            predictions.len(),
            ground_truth.len()
        )));
    }
    let correct: Vec<bool> = predictions
        .iter()
        .zip(ground_truth)
        .map(|((pred, _), truth)| pred.abs_diff(*truth) <= tolerance)
        .collect();

    let mut thresholds: Vec<f64> = predictions.iter().map(|(_, s)| *s).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    thresholds.dedup();

    let total = predictions.len() as f64;
    let points = thresholds
        .into_iter()
        .map(|threshold| {
            let mut accepted = 0usize;
            let mut hit = 0usize;
            for ((_, score), ok) in predictions.iter().zip(&correct) {
                if *score >= threshold {
                    accepted += 1;
                    if *ok {
                        hit += 1;
                    }
                }
            }
            PrPoint {
                threshold,
                precision: if accepted > 0 { hit as f64 / accepted as f64 } else { 1.0 },
                recall: hit as f64 / total,
            }
        })
        .collect();
    Ok(PRCurve { points, tolerance })
}

/// Trapezoidal area under the precision-recall curve, with the curve
/// extended flat to recall 0.
pub fn auc(curve: &PRCurve) -> f64 {
    let points = &curve.points;
    if points.is_empty() {
        return 0.0;
    }
    let mut area = points[0].precision * points[0].recall;
    for pair in points.windows(2) {
        let dr = pair[1].recall - pair[0].recall;
        area += dr * (pair[0].precision + pair[1].precision) / 2.0;
    }
    area
}

/// Deployment statistics of a stochastic policy on one traversal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentStats {
    pub episodes: usize,
    pub completed_pct: f64,
    pub failed_pct: f64,
    pub mean_steps: f64,
    pub condition: Condition,
}

/// Run deployment episodes with the stochastic policy. Targets are sampled
/// uniformly over all indices ≠ start; the step budget is the traversal
/// length. Each episode owns its random stream, so results do not depend on
/// how episodes are interleaved.
pub fn deploy(
    params: &PolicyParams,
    source: &ObsSource,
    n_frames: usize,
    condition: Condition,
    episodes: usize,
    seed: u64,
) -> Result<DeploymentStats> {
    if episodes == 0 {
        return Err(Error::InvalidConfig("need at least one deployment episode".into()));
    }
    if let Some(d) = source.visual_dim() {
        if d + 1 != params.obs_dim {
            return Err(Error::Shape(format!(
                "source visual dim {d} incompatible with checkpoint obs_dim {}",
                params.obs_dim
            )));
        }
    }
    let config = EnvConfig {
        n_frames,
        max_steps: n_frames,
        curriculum_levels: 7,
        observation_mode: match source {
            ObsSource::Features(_) => crate::env::ObservationMode::Bimodal,
            ObsSource::Position => crate::env::ObservationMode::PositionBaseline,
            ObsSource::RawImages { .. } => crate::env::ObservationMode::RawImage,
        },
    };
    config.validate()?;

    // Episodes run in banks of lockstep slots; slot k owns episodes
    // k, k+slots, ... so the batching never changes a result.
    let slots = episodes.min(16);
    let mut completed = 0usize;
    let mut steps_total = 0usize;

    struct SlotRun {
        episode_idx: usize,
        state: EnvState,
        rng: ChaCha8Rng,
        obs_row: Vec<f64>,
    }

    let obs_dim = params.obs_dim;
    let make_row = |source: &ObsSource, index: usize, goal: f64| -> Result<Vec<f64>> {
        let obs = source.observe(index, goal, n_frames);
        match obs.visual {
            crate::env::Visual::Vector(x) => {
                let mut row = x;
                row.push(goal);
                Ok(row)
            }
            crate::env::Visual::Image(img) => {
                let conv = params
                    .conv
                    .as_ref()
                    .ok_or_else(|| Error::Shape("raw-image deploy needs conv params".into()))?;
                let mut row = crate::net::conv::conv_forward(conv, &img)?;
                row.push(goal);
                Ok(row)
            }
        }
    };

    let start_episode = |episode_idx: usize| -> Result<SlotRun> {
        let mut rng = stream_rng(seed, &[label::DEPLOY, episode_idx as u64]);
        let state = reset_free_target(&config, &mut rng)?;
        let goal = encode_goal(state.target_index, n_frames)?;
        let obs_row = make_row(source, state.current_index, goal)?;
        Ok(SlotRun { episode_idx, state, rng, obs_row })
    };

    let mut active: Vec<SlotRun> = (0..slots).map(start_episode).collect::<Result<_>>()?;
    let mut next_episode = slots;
    let mut hidden = HiddenBatch::zeros(slots, params.hidden_dim);
    let mut done_count = 0usize;

    while done_count < episodes {
        let live: Vec<usize> =
            (0..active.len()).filter(|&i| active[i].episode_idx < episodes).collect();
        if live.is_empty() {
            break;
        }
        // Batched forward over live slots.
        let mut rows = vec![0.0; live.len() * obs_dim];
        let mut bank = HiddenBatch::zeros(live.len(), params.hidden_dim);
        for (bi, &i) in live.iter().enumerate() {
            rows[bi * obs_dim..(bi + 1) * obs_dim].copy_from_slice(&active[i].obs_row);
            bank.set_slot(bi, &hidden.slot(i));
        }
        let acts = forward_step_batch(params, &rows, &mut bank)?;

        for (bi, &i) in live.iter().enumerate() {
            let slot = &mut active[i];
            let logits = &acts.logits[bi * N_ACTIONS..(bi + 1) * N_ACTIONS];
            let action = crate::ppo::sample_from_logits(logits, &mut slot.rng);
            let mut next_hidden = bank.slot(bi);
            next_hidden.prev_action = vec![0.0; N_ACTIONS];
            next_hidden.prev_action[action.code()] = 1.0;
            hidden.set_slot(i, &next_hidden);

            let result = crate::env::step(&slot.state, action, &config, source)?;
            if result.done {
                done_count += 1;
                steps_total += result.state.steps_taken;
                if result.state.outcome == Outcome::Completed {
                    completed += 1;
                }
                slot.episode_idx = next_episode;
                next_episode += 1;
                if slot.episode_idx < episodes {
                    *slot = start_episode(slot.episode_idx)?;
                    hidden.reset_slot(i);
                }
            } else {
                slot.state = result.state;
                let goal = encode_goal(slot.state.target_index, n_frames)?;
                slot.obs_row = make_row(source, slot.state.current_index, goal)?;
            }
        }
    }

    let completed_pct = 100.0 * completed as f64 / episodes as f64;
    Ok(DeploymentStats {
        episodes,
        completed_pct,
        failed_pct: 100.0 - completed_pct,
        mean_steps: steps_total as f64 / episodes as f64,
        condition,
    })
}

/// Exponential moving average: s₀ = x₀, s_t = w·s_{t−1} + (1−w)·x_t.
pub fn smooth_curve(values: &[f64], weight: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut state = None;
    for &x in values {
        let s = match state {
            None => x,
            Some(prev) => weight * prev + (1.0 - weight) * x,
        };
        out.push(s);
        state = Some(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traversal::{generate_synthetic, SynthConfig};

    fn separable_reference(n: usize, dim: usize, seed: u64) -> Traversal {
        // A large walk step keeps the places well separated.
        let cfg = SynthConfig {
            n_frames: n,
            dim,
            walk_step: 0.8,
            seed,
            ..SynthConfig::default()
        };
        generate_synthetic(&cfg).unwrap().reference
    }

    #[test]
    fn classifier_fits_separable_reference() {
        let reference = separable_reference(30, 16, 5);
        let clf = train_place_classifier(&reference, 400, 5.0, 0);
        let scores = score_query(&clf, &reference).unwrap();
        let correct = scores
            .iter()
            .enumerate()
            .filter(|(i, (pred, _))| pred == i)
            .count();
        assert!(
            correct as f64 / reference.len() as f64 >= 0.99,
            "top-1 accuracy {correct}/{}",
            reference.len()
        );
    }

    #[test]
    fn zero_epochs_gives_equal_scores() {
        let reference = separable_reference(10, 8, 6);
        let clf = train_place_classifier(&reference, 0, 1.0, 0);
        let scores = score_query(&clf, &reference).unwrap();
        for (_, s) in scores {
            assert!((s - 1.0 / 10.0).abs() < 1e-12, "uniform softmax over classes");
        }
    }

    #[test]
    fn classifier_training_is_deterministic() {
        let reference = separable_reference(12, 8, 7);
        let a = train_place_classifier(&reference, 50, 2.0, 3);
        let b = train_place_classifier(&reference, 50, 2.0, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn scores_are_probabilities_and_shift_invariant() {
        let reference = separable_reference(12, 8, 8);
        let mut clf = train_place_classifier(&reference, 30, 2.0, 0);
        let scores = score_query(&clf, &reference).unwrap();
        for (_, s) in &scores {
            assert!(*s > 0.0 && *s <= 1.0);
        }
        // Adding a constant to every logit (bias shift) leaves softmax fixed.
        for b in clf.b.iter_mut() {
            *b += 3.7;
        }
        let shifted = score_query(&clf, &reference).unwrap();
        for ((p1, s1), (p2, s2)) in scores.iter().zip(&shifted) {
            assert_eq!(p1, p2);
            assert!((s1 - s2).abs() < 1e-9);
        }
    }

    #[test]
    fn query_dim_mismatch_is_shape_error() {
        let reference = separable_reference(10, 8, 9);
        let other = separable_reference(10, 6, 9);
        let clf = train_place_classifier(&reference, 5, 2.0, 0);
        assert!(matches!(score_query(&clf, &other), Err(Error::Shape(_))));
    }

    #[test]
    fn pr_curve_all_correct_and_all_wrong() {
        let preds = vec![(0usize, 0.9), (1, 0.8), (2, 0.7)];
        let truth = vec![0usize, 1, 2];
        let curve = precision_recall(&preds, &truth, 0).unwrap();
        let last = curve.points.last().unwrap();
        assert_eq!(last.precision, 1.0);
        assert_eq!(last.recall, 1.0);
        assert!((auc(&curve) - 1.0).abs() < 1e-12);

        let wrong_truth = vec![5usize, 6, 7];
        let curve = precision_recall(&preds, &wrong_truth, 0).unwrap();
        for p in &curve.points {
            assert_eq!(p.precision, 0.0);
        }
        assert_eq!(auc(&curve), 0.0);
    }

    #[test]
    fn pr_curve_four_frame_worked_example() {
        // Scores (0.9, 0.8, 0.7, 0.6), correctness (T, T, F, T).
        let preds = vec![(0usize, 0.9), (1, 0.8), (9, 0.7), (3, 0.6)];
        let truth = vec![0usize, 1, 2, 3];
        let curve = precision_recall(&preds, &truth, 0).unwrap();

        // Exhaustive threshold enumeration oracle.
        let scores = [0.9, 0.8, 0.7, 0.6];
        let correct = [true, true, false, true];
        let mut expect = Vec::new();
        for &t in &scores {
            let accepted: Vec<usize> =
                (0..4).filter(|&i| scores[i] >= t).collect();
            let hit = accepted.iter().filter(|&&i| correct[i]).count();
            expect.push((
                t,
                hit as f64 / accepted.len() as f64,
                hit as f64 / 4.0,
            ));
        }
        assert_eq!(curve.points.len(), expect.len());
        for (p, (t, prec, rec)) in curve.points.iter().zip(expect) {
            assert_eq!(p.threshold, t);
            assert!((p.precision - prec).abs() < 1e-12);
            assert!((p.recall - rec).abs() < 1e-12);
        }

        // AUC from the same enumeration: trapezoid with flat extension to 0.
        let pts = &curve.points;
        let mut expect_auc = pts[0].precision * pts[0].recall;
        for w in pts.windows(2) {
            expect_auc += (w[1].recall - w[0].recall) * (w[0].precision + w[1].precision) / 2.0;
        }
        assert!((auc(&curve) - expect_auc).abs() < 1e-12);
        assert!((auc(&curve) - 0.677083333333).abs() < 1e-9);
    }

    #[test]
    fn recall_is_monotone_along_sweep() {
        let preds = vec![(0usize, 0.9), (5, 0.8), (2, 0.8), (3, 0.3), (1, 0.5)];
        let truth = vec![0usize, 1, 2, 3, 4];
        let curve = precision_recall(&preds, &truth, 1).unwrap();
        for w in curve.points.windows(2) {
            assert!(w[1].recall >= w[0].recall);
        }
    }

    #[test]
    fn auc_invariant_under_monotone_score_transform() {
        let preds = vec![(0usize, 0.9), (1, 0.8), (9, 0.7), (3, 0.6), (2, 0.55)];
        let truth = vec![0usize, 1, 2, 3, 4];
        let base = auc(&precision_recall(&preds, &truth, 0).unwrap());
        let squashed: Vec<(usize, f64)> =
            preds.iter().map(|(p, s)| (*p, (4.0 * s).tanh())).collect();
        let transformed = auc(&precision_recall(&squashed, &truth, 0).unwrap());
        assert!((base - transformed).abs() < 1e-12);
    }

    #[test]
    fn single_point_curve_has_unit_auc() {
        let curve = PRCurve {
            points: vec![PrPoint { threshold: 0.5, precision: 1.0, recall: 1.0 }],
            tolerance: 0,
        };
        assert_eq!(auc(&curve), 1.0);
    }

    #[test]
    fn wide_tolerance_makes_everything_correct() {
        let preds = vec![(9usize, 0.9), (0, 0.8), (5, 0.7)];
        let truth = vec![0usize, 9, 2];
        let curve = precision_recall(&preds, &truth, 10).unwrap();
        for p in &curve.points {
            assert_eq!(p.precision, 1.0);
        }
    }

    #[test]
    fn empty_curve_is_an_error() {
        assert!(matches!(
            precision_recall(&[], &[], 2),
            Err(Error::EmptyCurve(_))
        ));
    }

    #[test]
    fn smoothing_closed_forms() {
        assert_eq!(smooth_curve(&[5.0, 5.0, 5.0], 0.9), vec![5.0, 5.0, 5.0]);
        let s = smooth_curve(&[0.0, 1.0], 0.9);
        assert_eq!(s[0], 0.0);
        assert!((s[1] - 0.1).abs() < 1e-15);
        assert_eq!(smooth_curve(&[3.0, -1.0, 2.0], 0.0), vec![3.0, -1.0, 2.0]);
    }

    /// Parameters wired by hand so the policy deterministically walks toward
    /// the goal: the encoder computes g−p, the LSTM candidate gate saturates
    /// on its sign, and the policy head turns that into a huge logit gap.
    fn handwired_optimal_policy(n_frames: usize) -> crate::net::PolicyParams {
        let mut p = crate::net::PolicyParams::zeros(1, 4, 4);
        // Encoder unit 0 = goal − position (observation is [p, g]).
        p.enc_w[0] = -1.0;
        p.enc_w[1] = 1.0;
        // Candidate-gate unit 0 reads encoder unit 0 with a large gain; the
        // gain swamps the 1/(N−1) resolution next to the target.
        let zf = p.lstm_in_dim();
        let gain = 40.0 * n_frames as f64;
        p.lstm_w[3 * p.hidden_dim * zf] = gain;
        // Policy head: FORWARD on +h₀, BACKWARD on −h₀.
        p.pi_w[0] = 400.0;
        p.pi_w[p.hidden_dim] = -400.0;
        p
    }

    #[test]
    fn scripted_optimal_policy_completes_every_deployment_episode() {
        let params = handwired_optimal_policy(12);
        let stats =
            deploy(&params, &ObsSource::Position, 12, Condition::Reference, 200, 3).unwrap();
        assert_eq!(stats.completed_pct, 100.0);
        assert_eq!(stats.failed_pct, 0.0);
    }

    #[test]
    fn uniform_random_policy_underperforms_the_optimum() {
        let optimal = handwired_optimal_policy(100);
        let uniform = crate::net::PolicyParams::zeros(1, 4, 4); // zero heads
        let best =
            deploy(&optimal, &ObsSource::Position, 100, Condition::Reference, 150, 5).unwrap();
        let rand =
            deploy(&uniform, &ObsSource::Position, 100, Condition::Reference, 150, 5).unwrap();
        assert!(
            rand.completed_pct < best.completed_pct,
            "random {} vs optimal {}",
            rand.completed_pct,
            best.completed_pct
        );
        assert!((rand.completed_pct + rand.failed_pct - 100.0).abs() < 1e-9);
    }

    #[test]
    fn deployment_is_deterministic() {
        let params = crate::net::PolicyParams::init_with_dims(1, 8, 6, 4);
        let a = deploy(&params, &ObsSource::Position, 15, Condition::Reference, 30, 9).unwrap();
        let b = deploy(&params, &ObsSource::Position, 15, Condition::Reference, 30, 9).unwrap();
        assert_eq!(a, b);
    }
}
