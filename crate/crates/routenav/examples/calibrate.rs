//! Scratch calibration harness (not part of the shipped pipeline).

use std::time::Instant;

use routenav::env::{EnvConfig, ObsSource, ObservationMode};
use routenav::eval::deploy;
use routenav::net::init_params;
use routenav::ppo::{train_single_trial, StopRule, TrainSpec, TrainerConfig};
use routenav::traversal::Condition;

fn bench_forward() {
    let params = init_params(64, 1).unwrap();
    let b = 16;
    let mut state = routenav::net::HiddenBatch::zeros(b, params.hidden_dim);
    let obs = vec![0.1; b * params.obs_dim];
    let start = Instant::now();
    let iters = 200;
    for _ in 0..iters {
        let _ = routenav::net::forward_step_batch(&params, &obs, &mut state).unwrap();
    }
    let dt = start.elapsed().as_secs_f64();
    let flops = 2.0
        * (params.enc_dim * params.obs_dim
            + 4 * params.hidden_dim * params.lstm_in_dim()
            + 4 * params.hidden_dim) as f64
        * (iters * b) as f64;
    println!(
        "forward: {:.1} us/step/slot, {:.2} Gflop/s",
        dt * 1e6 / (iters * b) as f64,
        flops / dt / 1e9
    );
}

fn train_baseline(n: usize, seed: u64, lr: f64, epochs: usize, horizon: usize, window: usize) {
    let env = EnvConfig::new(n, ObservationMode::PositionBaseline);
    let trainer = TrainerConfig {
        lr,
        epochs_per_update: epochs,
        rollout_horizon: horizon,
        bptt_truncation: 64.min(horizon),
        minibatch_sequences: 8,
        max_episodes: 20_000,
        trials: 1,
        ..TrainerConfig::default()
    };
    let mut spec = TrainSpec::new(trainer, env, seed);
    spec.curriculum_window = window;
    spec.stop = Some(StopRule::SustainedSuccess { threshold: 0.99, rows: 2 });
    let start = Instant::now();
    let result = train_single_trial(&spec, &ObsSource::Position, 0).unwrap();
    let dt = start.elapsed().as_secs_f64();
    let last = result.rows.last().unwrap();
    println!(
        "seed {seed}: episodes {} (stopped_early={}), {:.1}s wall, last row: success {:.2} steps {:.1} level-row entropy {:.3}",
        result.episodes, result.stopped_early, dt, last.success_rate, last.mean_steps, last.entropy
    );
    let t0 = Instant::now();
    let stats = deploy(
        &result.params,
        &ObsSource::Position,
        n,
        Condition::Reference,
        500,
        seed + 1000,
    )
    .unwrap();
    println!(
        "  deploy: {:.1}% completed, mean steps {:.1} ({:.1}s)",
        stats.completed_pct,
        stats.mean_steps,
        t0.elapsed().as_secs_f64()
    );
}

/// The exact criterion-5 protocol: 5 trials; every 500 episodes, once the
/// training success is high, run the real 500-episode deployment evaluation
/// and stop as soon as it reaches 99%.
fn baseline5(window: usize, _unused: usize, seed: u64) {
    let n = 100;
    let env = EnvConfig::new(n, ObservationMode::PositionBaseline);
    let trainer = TrainerConfig { max_episodes: 20_000, trials: 5, ..TrainerConfig::default() };
    let mut spec = TrainSpec::new(trainer, env, seed);
    spec.curriculum_window = window;
    let hook = |p: &routenav::ppo::TrialProgress<'_>| -> bool {
        if p.row.success_rate < 0.97 {
            return false;
        }
        let stats = deploy(
            p.params,
            &ObsSource::Position,
            n,
            Condition::Reference,
            500,
            p.seed ^ 0x5eed ^ p.row.episode,
        )
        .unwrap();
        stats.completed_pct >= 99.0
    };
    let t0 = Instant::now();
    let results =
        routenav::ppo::train_with_hook(&spec, &ObsSource::Position, Some((500, &hook))).unwrap();
    println!("training 5 trials: {:.0}s", t0.elapsed().as_secs_f64());
    let mut passes = 0;
    for r in &results {
        // Trials that stopped early met the criterion mid-training; the rest
        // get a final evaluation at their last checkpoint.
        let pass = r.stopped_early || {
            let stats = deploy(
                &r.params,
                &ObsSource::Position,
                n,
                Condition::Reference,
                500,
                r.seed ^ 0x5eed,
            )
            .unwrap();
            stats.completed_pct >= 99.0
        };
        passes += pass as usize;
        println!(
            "trial {}: episodes {} stopped_early={} (pass={pass})",
            r.trial, r.episodes, r.stopped_early
        );
    }
    println!("=> {passes}/5 trials at >=99% ({:.0}s total)", t0.elapsed().as_secs_f64());
}

fn vpr_experiment(frames: usize, seed: u64, epochs: usize, lr: f64) {
    use routenav::eval::{auc, precision_recall, score_query, train_place_classifier};
    use routenav::features::fit_pca_whitening;
    use routenav::traversal::generate_synthetic;

    let cfg = routenav::traversal::SynthConfig {
        n_frames: frames,
        dim: 4096,
        seed,
        ..Default::default()
    };
    let t0 = Instant::now();
    let set = generate_synthetic(&cfg).unwrap();
    println!("synth 4096d x {frames}: {:.1}s", t0.elapsed().as_secs_f64());

    for dim in [4096usize, 512, 64] {
        let t0 = Instant::now();
        let (reference, queries) = if dim == 4096 {
            (set.reference.clone(), set.variants.clone())
        } else {
            let p = fit_pca_whitening(&set.reference.descriptor_matrix(), dim).unwrap();
            let project = |t: &routenav::traversal::Traversal| {
                let rows = p.project_all(&t.descriptor_matrix()).unwrap();
                routenav::traversal::Traversal::new(
                    t.name.clone(),
                    t.condition,
                    rows.into_iter()
                        .enumerate()
                        .map(|(index, descriptor)| routenav::traversal::Frame {
                            index,
                            descriptor,
                            raw_image: None,
                        })
                        .collect(),
                )
                .unwrap()
            };
            (project(&set.reference), set.variants.iter().map(project).collect())
        };
        let fit_s = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let clf = train_place_classifier(&reference, epochs, lr, seed);
        let train_s = t1.elapsed().as_secs_f64();
        // Self accuracy.
        let self_scores = score_query(&clf, &reference).unwrap();
        let self_acc = self_scores.iter().enumerate().filter(|(i, (p, _))| p == i).count()
            as f64
            / frames as f64;
        print!("dim {dim}: fit {fit_s:.1}s train {train_s:.1}s self-acc {self_acc:.3}");
        for q in &queries {
            let scores = score_query(&clf, q).unwrap();
            let truth: Vec<usize> = (0..q.len()).collect();
            let curve = precision_recall(&scores, &truth, 2).unwrap();
            print!("  {}: auc {:.4}", q.condition, auc(&curve));
        }
        println!();
    }
}

fn race_experiment(
    native_dim: usize,
    small_dim: usize,
    n: usize,
    seed: u64,
    max_episodes: u64,
    window: usize,
    trials: usize,
) {
    use routenav::eval::smooth_curve;
    use routenav::features::fit_pca_whitening;
    use routenav::traversal::generate_synthetic;

    let synth = routenav::traversal::SynthConfig {
        n_frames: n,
        dim: native_dim,
        seed,
        ..Default::default()
    };
    let set = generate_synthetic(&synth).unwrap();
    let projection = fit_pca_whitening(&set.reference.descriptor_matrix(), small_dim).unwrap();
    let small =
        ObsSource::Features(projection.project_all(&set.reference.descriptor_matrix()).unwrap());
    let native = ObsSource::from_traversal(&set.reference);

    let run = |source: &ObsSource, label: &str| -> Vec<(u64, bool, f64)> {
        let env = EnvConfig::new(n, ObservationMode::Bimodal);
        let trainer = TrainerConfig {
            max_episodes,
            trials: 1,
            ..TrainerConfig::default()
        };
        (0..trials)
            .map(|trial| {
                let mut spec = TrainSpec::new(trainer, env, seed);
                spec.curriculum_window = window;
                spec.stop = Some(StopRule::SmoothedSuccess { threshold: 0.8, weight: 0.9 });
                let t0 = Instant::now();
                let r = train_single_trial(&spec, source, trial).unwrap();
                let wall = t0.elapsed().as_secs_f64();
                let crossing = crossing_episode(&r.rows.iter().map(|x| (x.episode, x.success_rate)).collect::<Vec<_>>(), 0.8, 0.9)
                    .unwrap_or(max_episodes);
                println!(
                    "  {label} trial {trial}: episodes {} crossing {crossing} wall {wall:.0}s",
                    r.episodes
                );
                (crossing, r.stopped_early, wall)
            })
            .collect()
    };
    fn crossing_episode(rows: &[(u64, f64)], threshold: f64, weight: f64) -> Option<u64> {
        let values: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let smoothed = smooth_curve(&values, weight);
        rows.iter().zip(smoothed).find(|(_, s)| *s >= threshold).map(|(r, _)| r.0)
    }

    println!("race: {small_dim}d (projected) vs {native_dim}d (native), N={n}");
    let small_runs = run(&small, "small");
    let native_runs = run(&native, "native");
    let mean = |v: &[(u64, bool, f64)]| {
        v.iter().map(|x| x.0 as f64).sum::<f64>() / v.len() as f64
    };
    println!(
        "mean crossing: {small_dim}d {:.0} vs {native_dim}d {:.0}",
        mean(&small_runs),
        mean(&native_runs)
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(|s| s.as_str()).unwrap_or("bench");
    let arg = |i: usize| args.get(i).cloned();
    match mode {
        "bench" => bench_forward(),
        "train" => {
            let lr: f64 = arg(2).and_then(|s| s.parse().ok()).unwrap_or(3e-4);
            let epochs: usize = arg(3).and_then(|s| s.parse().ok()).unwrap_or(4);
            let horizon: usize = arg(4).and_then(|s| s.parse().ok()).unwrap_or(128);
            let window: usize = arg(5).and_then(|s| s.parse().ok()).unwrap_or(500);
            let seed: u64 = arg(6).and_then(|s| s.parse().ok()).unwrap_or(1);
            train_baseline(100, seed, lr, epochs, horizon, window);
        }
        "baseline5" => {
            let window: usize = arg(2).and_then(|s| s.parse().ok()).unwrap_or(150);
            let rows: usize = arg(3).and_then(|s| s.parse().ok()).unwrap_or(3);
            let seed: u64 = arg(4).and_then(|s| s.parse().ok()).unwrap_or(505);
            baseline5(window, rows, seed);
        }
        "vpr" => {
            let frames: usize = arg(2).and_then(|s| s.parse().ok()).unwrap_or(520);
            let epochs: usize = arg(3).and_then(|s| s.parse().ok()).unwrap_or(300);
            let lr: f64 = arg(4).and_then(|s| s.parse().ok()).unwrap_or(5.0);
            let seed: u64 = arg(5).and_then(|s| s.parse().ok()).unwrap_or(1);
            vpr_experiment(frames, seed, epochs, lr);
        }
        "race" => {
            let native: usize = arg(2).and_then(|s| s.parse().ok()).unwrap_or(512);
            let small: usize = arg(3).and_then(|s| s.parse().ok()).unwrap_or(64);
            let n: usize = arg(4).and_then(|s| s.parse().ok()).unwrap_or(70);
            let seed: u64 = arg(5).and_then(|s| s.parse().ok()).unwrap_or(1);
            let max_episodes: u64 = arg(6).and_then(|s| s.parse().ok()).unwrap_or(6000);
            let window: usize = arg(7).and_then(|s| s.parse().ok()).unwrap_or(150);
            let trials: usize = arg(8).and_then(|s| s.parse().ok()).unwrap_or(2);
            race_experiment(native, small, n, seed, max_episodes, window, trials);
        }
        other => eprintln!("unknown mode {other}"),
    }
}
