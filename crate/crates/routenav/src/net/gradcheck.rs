//! Central finite-difference verification of the analytic gradients.
//!
//! Perturbs sampled coordinates of every parameter tensor (or all of them,
//! for small networks) and compares the loss slope against the analytic
//! gradient from [`segment_loss_and_grad`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::net::backward::{segment_loss, segment_loss_and_grad, LossConfig, SegmentBatch};
use crate::net::PolicyParams;

pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_REL_TOL: f64 = 1e-4;
/// Pairs whose magnitudes both fall below this are compared absolutely;
/// central differences bottom out in rounding noise near zero.
pub const ABS_FLOOR: f64 = 1e-8;
/// Refinement step for coordinates whose primary-step window straddles a
/// rectifier kink. A wrong analytic gradient fails at every step; a
/// kink-contaminated difference converges to the analytic value as the
/// window shrinks.
pub const REFINE_FD_STEP: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub coords_checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<WorstCoord>,
    pub failures: Vec<WorstCoord>,
}

#[derive(Debug, Clone)]
pub struct WorstCoord {
    pub tensor: &'static str,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff <= ABS_FLOOR {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs())
}

/// Check sampled coordinates of every tensor; `samples_per_tensor = 0` checks
/// every coordinate (use only on small test networks).
pub fn check_segment_gradients(
    params: &PolicyParams,
    batch: &SegmentBatch,
    cfg: &LossConfig,
    samples_per_tensor: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GradCheckReport> {
    let (_, grads) = segment_loss_and_grad(params, batch, cfg)?;

    let mut report = GradCheckReport {
        coords_checked: 0,
        max_rel_error: 0.0,
        worst: None,
        failures: Vec::new(),
    };

    let tensor_names: Vec<&'static str> =
        params.named_tensors().iter().map(|(n, _)| *n).collect();
    for name in tensor_names {
        let len = params
            .named_tensors()
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| t.len())
            .unwrap();
        let indices: Vec<usize> = if samples_per_tensor == 0 || samples_per_tensor >= len {
            (0..len).collect()
        } else {
            (0..samples_per_tensor).map(|_| rng.gen_range(0..len)).collect()
        };
        for idx in indices {
            let analytic = grads
                .named_tensors()
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t[idx])
                .unwrap();

            let central = |step: f64| -> Result<f64> {
                let mut perturbed = params.clone();
                set_coord(&mut perturbed, name, idx, step);
                let loss_plus = segment_loss(&perturbed, batch, cfg)?.loss;
                set_coord(&mut perturbed, name, idx, -2.0 * step);
                let loss_minus = segment_loss(&perturbed, batch, cfg)?.loss;
                Ok((loss_plus - loss_minus) / (2.0 * step))
            };
            let mut numeric = central(DEFAULT_FD_STEP)?;
            let mut rel = relative_error(analytic, numeric);
            if rel >= DEFAULT_REL_TOL {
                numeric = central(REFINE_FD_STEP)?;
                rel = relative_error(analytic, numeric);
            }
            report.coords_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some(WorstCoord {
                    tensor: name,
                    index: idx,
                    analytic,
                    numeric,
                    rel_error: rel,
                });
            }
            if rel >= DEFAULT_REL_TOL {
                report.failures.push(WorstCoord {
                    tensor: name,
                    index: idx,
                    analytic,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    Ok(report)
}


/// Probe a single coordinate at several step sizes (diagnostic helper).
pub fn probe_coordinate(
    params: &PolicyParams,
    batch: &SegmentBatch,
    cfg: &LossConfig,
    tensor: &str,
    index: usize,
    steps: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let (_, grads) = segment_loss_and_grad(params, batch, cfg)?;
    let analytic = grads
        .named_tensors()
        .iter()
        .find(|(n, _)| *n == tensor)
        .map(|(_, t)| t[index])
        .unwrap();
    let mut out = Vec::new();
    for &h in steps {
        let mut perturbed = params.clone();
        set_coord(&mut perturbed, tensor, index, h);
        let plus = segment_loss(&perturbed, batch, cfg)?.loss;
        set_coord(&mut perturbed, tensor, index, -2.0 * h);
        let minus = segment_loss(&perturbed, batch, cfg)?.loss;
        out.push((h, (plus - minus) / (2.0 * h)));
    }
    out.push((0.0, analytic));
    Ok(out)
}

fn set_coord(params: &mut PolicyParams, tensor: &str, index: usize, delta: f64) {
    for (name, t) in params.named_tensors_mut() {
        if name == tensor {
            t[index] += delta;
            return;
        }
    }
    unreachable!("tensor {tensor} exists");
}
