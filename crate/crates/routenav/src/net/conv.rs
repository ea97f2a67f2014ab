//! Two-layer convolutional encoder for the raw-image agent.
//!
//! Valid (no padding) convolutions with a rectifier after each layer:
//! 84×84×3 → conv 8×8 stride 4, 16 maps → 20×20×16 → conv 4×4 stride 2,
//! 32 maps → 9×9×32 → flatten → affine to 512.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::ops;
use crate::traversal::{RAW_IMAGE_CHANNELS, RAW_IMAGE_LEN, RAW_IMAGE_SIDE};

/// One valid convolution layer. Weights are stored
/// `[out_ch][in_ch][k][k]` row-major; activations `[ch][h][w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(out_ch: usize, in_ch: usize, kernel: usize, stride: usize) -> Self {
        Conv2d {
            out_ch,
            in_ch,
            kernel,
            stride,
            w: vec![0.0; out_ch * in_ch * kernel * kernel],
            b: vec![0.0; out_ch],
        }
    }

    pub fn out_side(&self, in_side: usize) -> usize {
        (in_side - self.kernel) / self.stride + 1
    }

    /// Forward pass with rectifier. `input` is `[in_ch][in_side][in_side]`.
    pub fn forward(&self, input: &[f64], in_side: usize) -> Vec<f64> {
        let out_side = self.out_side(in_side);
        let k = self.kernel;
        let mut out = vec![0.0; self.out_ch * out_side * out_side];
        for oc in 0..self.out_ch {
            let bias = self.b[oc];
            for oy in 0..out_side {
                for ox in 0..out_side {
                    let mut acc = bias;
                    let iy0 = oy * self.stride;
                    let ix0 = ox * self.stride;
                    for ic in 0..self.in_ch {
                        let plane = &input[ic * in_side * in_side..(ic + 1) * in_side * in_side];
                        let w_base = ((oc * self.in_ch + ic) * k) * k;
                        for ky in 0..k {
                            let row = &plane[(iy0 + ky) * in_side + ix0..(iy0 + ky) * in_side + ix0 + k];
                            let w_row = &self.w[w_base + ky * k..w_base + (ky + 1) * k];
                            acc += ops::dot(w_row, row);
                        }
                    }
                    out[(oc * out_side + oy) * out_side + ox] = acc.max(0.0);
                }
            }
        }
        out
    }

    /// Backward pass given the rectified output and its gradient; accumulates
    /// weight/bias gradients and returns the input gradient.
    pub fn backward(
        &self,
        input: &[f64],
        in_side: usize,
        output: &[f64],
        d_output: &[f64],
        dw: &mut [f64],
        db: &mut [f64],
    ) -> Vec<f64> {
        let out_side = self.out_side(in_side);
        let k = self.kernel;
        let mut d_input = vec![0.0; input.len()];
        for oc in 0..self.out_ch {
            for oy in 0..out_side {
                for ox in 0..out_side {
                    let idx = (oc * out_side + oy) * out_side + ox;
                    // Rectifier gate: gradient flows only where output > 0.
                    if output[idx] <= 0.0 {
                        continue;
                    }
                    let g = d_output[idx];
                    if g == 0.0 {
                        continue;
                    }
                    db[oc] += g;
                    let iy0 = oy * self.stride;
                    let ix0 = ox * self.stride;
                    for ic in 0..self.in_ch {
                        let plane_base = ic * in_side * in_side;
                        let w_base = ((oc * self.in_ch + ic) * k) * k;
                        for ky in 0..k {
                            let in_base = plane_base + (iy0 + ky) * in_side + ix0;
                            for kx in 0..k {
                                dw[w_base + ky * k + kx] += g * input[in_base + kx];
                                d_input[in_base + kx] += g * self.w[w_base + ky * k + kx];
                            }
                        }
                    }
                }
            }
        }
        d_input
    }
}

pub const CONV_FEATURE_DIM: usize = 512;
const CONV1_OUT_SIDE: usize = 20;
const CONV2_OUT_SIDE: usize = 9;
pub const CONV_FLAT_DIM: usize = CONV2_OUT_SIDE * CONV2_OUT_SIDE * 32;

/// The raw-image visual encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvEncoderParams {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    /// Flatten-to-512 affine, row-major [512 × 2592].
    pub fc_w: Vec<f64>,
    pub fc_b: Vec<f64>,
}

impl ConvEncoderParams {
    pub fn zeros() -> Self {
        ConvEncoderParams {
            conv1: Conv2d::zeros(16, RAW_IMAGE_CHANNELS, 8, 4),
            conv2: Conv2d::zeros(32, 16, 4, 2),
            fc_w: vec![0.0; CONV_FEATURE_DIM * CONV_FLAT_DIM],
            fc_b: vec![0.0; CONV_FEATURE_DIM],
        }
    }

    pub fn init(rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros();
        let scale1 = 1.0 / ((RAW_IMAGE_CHANNELS * 8 * 8) as f64).sqrt();
        for w in p.conv1.w.iter_mut() {
            *w = rng.gen_range(-scale1..scale1);
        }
        let scale2 = 1.0 / ((16 * 4 * 4) as f64).sqrt();
        for w in p.conv2.w.iter_mut() {
            *w = rng.gen_range(-scale2..scale2);
        }
        let scale_fc = 1.0 / (CONV_FLAT_DIM as f64).sqrt();
        for w in p.fc_w.iter_mut() {
            *w = rng.gen_range(-scale_fc..scale_fc);
        }
        p
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    pub input: Vec<f64>,
    pub out1: Vec<f64>,
    pub out2: Vec<f64>,
}

/// Convert interleaved RGB bytes into planar [C][H][W] floats in [0, 1].
pub fn image_to_planes(image: &[u8]) -> Result<Vec<f64>> {
    if image.len() != RAW_IMAGE_LEN {
        return Err(Error::Shape(format!(
            "raw image has {} bytes, expected {RAW_IMAGE_LEN}",
            image.len()
        )));
    }
    let side = RAW_IMAGE_SIDE;
    let mut planes = vec![0.0; RAW_IMAGE_LEN];
    for y in 0..side {
        for x in 0..side {
            for c in 0..RAW_IMAGE_CHANNELS {
                planes[(c * side + y) * side + x] =
                    image[(y * side + x) * RAW_IMAGE_CHANNELS + c] as f64 / 255.0;
            }
        }
    }
    Ok(planes)
}

/// Full conv encoder forward: planar input → 512-d feature vector.
pub fn conv_forward_cached(p: &ConvEncoderParams, planes: Vec<f64>) -> (Vec<f64>, ConvCache) {
    let out1 = p.conv1.forward(&planes, RAW_IMAGE_SIDE);
    let out2 = p.conv2.forward(&out1, CONV1_OUT_SIDE);
    let mut feat = vec![0.0; CONV_FEATURE_DIM];
    ops::affine_forward(&mut feat, &p.fc_w, &p.fc_b, CONV_FEATURE_DIM, CONV_FLAT_DIM, &out2, 1);
    (feat, ConvCache { input: planes, out1, out2 })
}

/// Conv encoder for one 84×84×3 byte image.
pub fn conv_forward(p: &ConvEncoderParams, image: &[u8]) -> Result<Vec<f64>> {
    let planes = image_to_planes(image)?;
    let (feat, _) = conv_forward_cached(p, planes);
    Ok(feat)
}

/// Gradient mirror of [`ConvEncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub fc_w: Vec<f64>,
    pub fc_b: Vec<f64>,
}

impl ConvGrads {
    pub fn zeros() -> Self {
        let z = ConvEncoderParams::zeros();
        ConvGrads {
            conv1_w: vec![0.0; z.conv1.w.len()],
            conv1_b: vec![0.0; z.conv1.b.len()],
            conv2_w: vec![0.0; z.conv2.w.len()],
            conv2_b: vec![0.0; z.conv2.b.len()],
            fc_w: vec![0.0; z.fc_w.len()],
            fc_b: vec![0.0; z.fc_b.len()],
        }
    }
}

/// Backprop a feature gradient through the conv encoder, accumulating into
/// `grads`.
pub fn conv_backward(
    p: &ConvEncoderParams,
    cache: &ConvCache,
    d_feat: &[f64],
    grads: &mut ConvGrads,
) {
    let mut d_out2 = vec![0.0; cache.out2.len()];
    ops::grad_input_acc(&mut d_out2, &p.fc_w, CONV_FEATURE_DIM, CONV_FLAT_DIM, d_feat, 1);
    ops::grad_weight_acc(
        &mut grads.fc_w,
        &mut grads.fc_b,
        CONV_FEATURE_DIM,
        CONV_FLAT_DIM,
        d_feat,
        &cache.out2,
        1,
    );
    let d_out1 = p.conv2.backward(
        &cache.out1,
        CONV1_OUT_SIDE,
        &cache.out2,
        &d_out2,
        &mut grads.conv2_w,
        &mut grads.conv2_b,
    );
    let _ = p.conv1.backward(
        &cache.input,
        RAW_IMAGE_SIDE,
        &cache.out1,
        &d_out1,
        &mut grads.conv1_w,
        &mut grads.conv1_b,
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::traversal::{make_raw_frame_image, Condition};

    #[test]
    fn spatial_sizes_match_architecture() {
        let p = ConvEncoderParams::zeros();
        assert_eq!(p.conv1.out_side(84), 20, "(84-8)/4+1");
        assert_eq!(p.conv2.out_side(20), 9, "(20-4)/2+1");
        assert_eq!(CONV_FLAT_DIM, 9 * 9 * 32);
    }

    #[test]
    fn zero_filters_give_zero_features() {
        let p = ConvEncoderParams::zeros();
        let img = make_raw_frame_image(0, Condition::Reference, 1);
        let feat = conv_forward(&p, &img).unwrap();
        assert_eq!(feat.len(), 512);
        assert!(feat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_matches_naive_small_conv() {
        // 1 input channel 4x4, one 2x2 filter stride 2.
        let mut layer = Conv2d::zeros(1, 1, 2, 2);
        layer.w = vec![1.0, 2.0, 3.0, 4.0];
        layer.b = vec![0.5];
        let input: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let out = layer.forward(&input, 4);
        // Top-left window [0,1;4,5]: 0*1+1*2+4*3+5*4+0.5 = 34.5
        assert_eq!(out.len(), 4);
        assert_eq!(out[0], 34.5);
        assert_eq!(out[1], 0.0 * 1.0 + 2.0 + 3.0 * 2.0 + 6.0 * 3.0 + 7.0 * 4.0 + 0.5);
    }

    #[test]
    fn small_conv_gradcheck() {
        // Exhaustive finite differences on a tiny conv stack.
        let mut rng = stream_rng(5, &[1]);
        let mut layer = Conv2d::zeros(2, 1, 2, 1);
        for w in layer.w.iter_mut() {
            *w = rng.gen_range(-0.5..0.5);
        }
        for b in layer.b.iter_mut() {
            *b = rng.gen_range(-0.2..0.2);
        }
        let input: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Loss: weighted sum of outputs, weights fixed.
        let coeffs: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |layer: &Conv2d, input: &[f64]| -> f64 {
            layer.forward(input, 3).iter().zip(&coeffs).map(|(o, c)| o * c).sum()
        };

        let out = layer.forward(&input, 3);
        let mut dw = vec![0.0; layer.w.len()];
        let mut db = vec![0.0; layer.b.len()];
        let d_input = layer.backward(&input, 3, &out, &coeffs, &mut dw, &mut db);

        let eps = 1e-6;
        for i in 0..layer.w.len() {
            let mut plus = layer.clone();
            plus.w[i] += eps;
            let mut minus = layer.clone();
            minus.w[i] -= eps;
            let fd = (loss(&plus, &input) - loss(&minus, &input)) / (2.0 * eps);
            assert!((fd - dw[i]).abs() < 1e-6, "w[{i}]: fd {fd} vs analytic {}", dw[i]);
        }
        for i in 0..input.len() {
            let mut plus = input.clone();
            plus[i] += eps;
            let mut minus = input.clone();
            minus[i] -= eps;
            let fd = (loss(&layer, &plus) - loss(&layer, &minus)) / (2.0 * eps);
            assert!((fd - d_input[i]).abs() < 1e-6, "x[{i}]: fd {fd} vs analytic {}", d_input[i]);
        }
    }
}
