//! Dense kernels for the neural core.
//!
//! Activations are stored batch-major (`[batch][dim]`, row-major flat) and
//! weights row-major (`[out][in]`). Loops are ordered so a weight row is
//! reused across the whole batch; summation order is fixed, so results do
//! not depend on batch size beyond the rows involved.

/// out[b][m] = Σ_k w[m][k]·x[b][k] + bias[m]
pub fn affine_forward(
    out: &mut [f64],
    w: &[f64],
    bias: &[f64],
    rows: usize,
    cols: usize,
    x: &[f64],
    batch: usize,
) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(bias.len(), rows);
    debug_assert_eq!(x.len(), batch * cols);
    debug_assert_eq!(out.len(), batch * rows);
    for m in 0..rows {
        let w_row = &w[m * cols..(m + 1) * cols];
        let b = bias[m];
        for bi in 0..batch {
            let x_row = &x[bi * cols..(bi + 1) * cols];
            out[bi * rows + m] = b + dot(w_row, x_row);
        }
    }
}

/// dx[b][k] += Σ_m w[m][k]·dy[b][m]
pub fn grad_input_acc(
    dx: &mut [f64],
    w: &[f64],
    rows: usize,
    cols: usize,
    dy: &[f64],
    batch: usize,
) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(dy.len(), batch * rows);
    debug_assert_eq!(dx.len(), batch * cols);
    for m in 0..rows {
        let w_row = &w[m * cols..(m + 1) * cols];
        for bi in 0..batch {
            let g = dy[bi * rows + m];
            if g == 0.0 {
                continue;
            }
            let dx_row = &mut dx[bi * cols..(bi + 1) * cols];
            axpy(dx_row, g, w_row);
        }
    }
}

/// dw[m][k] += Σ_b dy[b][m]·x[b][k];  db[m] += Σ_b dy[b][m]
pub fn grad_weight_acc(
    dw: &mut [f64],
    db: &mut [f64],
    rows: usize,
    cols: usize,
    dy: &[f64],
    x: &[f64],
    batch: usize,
) {
    debug_assert_eq!(dw.len(), rows * cols);
    debug_assert_eq!(db.len(), rows);
    debug_assert_eq!(dy.len(), batch * rows);
    debug_assert_eq!(x.len(), batch * cols);
    for m in 0..rows {
        let dw_row = &mut dw[m * cols..(m + 1) * cols];
        let mut bias_acc = 0.0;
        for bi in 0..batch {
            let g = dy[bi * rows + m];
            bias_acc += g;
            if g == 0.0 {
                continue;
            }
            let x_row = &x[bi * cols..(bi + 1) * cols];
            axpy(dw_row, g, x_row);
        }
        db[m] += bias_acc;
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Sixteen independent accumulator chains: enough instruction-level
    // parallelism to saturate vector FMA units while keeping every chain's
    // summation order fixed (bit-deterministic regardless of ISA width).
    const LANES: usize = 16;
    let mut acc = [0.0f64; LANES];
    let a_chunks = a.chunks_exact(LANES);
    let b_chunks = b.chunks_exact(LANES);
    let a_rem = a_chunks.remainder();
    let b_rem = b_chunks.remainder();
    for (ca, cb) in a_chunks.zip(b_chunks) {
        for l in 0..LANES {
            acc[l] += ca[l] * cb[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in a_rem.iter().zip(b_rem) {
        tail += x * y;
    }
    let mut sum = 0.0;
    for l in 0..LANES {
        sum += acc[l];
    }
    sum + tail
}

#[inline]
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax probabilities and log-probabilities for one logit row.
pub fn softmax_row(logits: &[f64], probs: &mut [f64], log_probs: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (p, &l) in probs.iter_mut().zip(logits) {
        *p = (l - max).exp();
        sum += *p;
    }
    let log_sum = sum.ln();
    for ((p, lp), &l) in probs.iter_mut().zip(log_probs.iter_mut()).zip(logits) {
        *p /= sum;
        *lp = l - max - log_sum;
    }
}

/// Entropy of a softmax row given probs and log-probs.
pub fn entropy_row(probs: &[f64], log_probs: &[f64]) -> f64 {
    -probs.iter().zip(log_probs).map(|(p, lp)| if *p > 0.0 { p * lp } else { 0.0 }).sum::<f64>()
}
