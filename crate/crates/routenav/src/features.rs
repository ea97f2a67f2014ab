//! Descriptor dimensionality reduction: PCA plus whitening, followed by L2
//! normalization.
//!
//! Projections are fit on a reference traversal's descriptors and applied
//! unchanged to query traversals; there is no refitting at test time. When
//! the input dimension exceeds the sample count the fit goes through the
//! Gram matrix, so fitting 4096-d descriptors on a few hundred frames stays
//! cheap.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::container;
use crate::error::{Error, Result};

const PROJECTION_MAGIC: &[u8; 4] = b"CLPJ";
const PROJECTION_VERSION: u32 = 1;

/// Eigenvalue regularizer added before the inverse square root, guarding the
/// whitening scale against near-zero variance directions.
pub const EPS_REG: f64 = 1e-8;

/// Norm below which a vector is treated as degenerate rather than normalized.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// A fitted PCA-whitening transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Sample mean of the fitting set, length D.
    pub mean: Vec<f64>,
    /// Principal directions, row-major d_out×D; rows are orthonormal.
    pub basis: Vec<f64>,
    /// Inverse square-root eigenvalues, length d_out.
    pub whiten_scale: Vec<f64>,
    pub d_in: usize,
    pub d_out: usize,
}

/// Normalize in place to unit L2 norm.
///
/// Returns `true` when the vector was degenerate (norm below
/// [`DEGENERATE_NORM`]); the input is then left unchanged.
pub fn l2_normalize_in_place(x: &mut [f64]) -> bool {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < DEGENERATE_NORM {
        return true;
    }
    for v in x.iter_mut() {
        *v /= norm;
    }
    false
}

/// Normalized copy plus degenerate flag.
pub fn l2_normalize(x: &[f64]) -> (Vec<f64>, bool) {
    let mut out = x.to_vec();
    let degenerate = l2_normalize_in_place(&mut out);
    (out, degenerate)
}

/// Jacobi eigendecomposition of a symmetric matrix (row-major n×n).
///
/// Returns eigenvalues in descending order with matching unit eigenvectors
/// (each a row of the returned matrix). Cyclic sweeps; converges when the
/// off-diagonal Frobenius mass drops below tolerance.
fn symmetric_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let tol = 1e-14
        * (0..n).map(|i| a[i * n + i].abs()).fold(f64::EPSILON, f64::max)
        * n as f64;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j].partial_cmp(&a[i * n + i]).unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (row, &col) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[row * n + k] = v[k * n + col];
        }
    }
    (eigenvalues, eigenvectors)
}

/// Fix each eigenvector's sign so its largest-magnitude coordinate is
/// positive; removes the sign ambiguity for reproducible fits.
fn canonicalize_signs(rows: &mut [f64], n_rows: usize, dim: usize) {
    for r in 0..n_rows {
        let row = &mut rows[r * dim..(r + 1) * dim];
        let mut best = 0usize;
        for (i, v) in row.iter().enumerate() {
            if v.abs() > row[best].abs() {
                best = i;
            }
        }
        if row[best] < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
    }
}

/// Fit PCA plus whitening on a descriptor set.
///
/// The basis spans the top `d_out` principal components of the sample
/// covariance (1/(n−1) normalization) and `whiten_scale[k] = 1/√(λ_k + ε)`.
pub fn fit_pca_whitening(descriptors: &[Vec<f64>], d_out: usize) -> Result<Projection> {
    let n = descriptors.len();
    if n < 2 {
        return Err(Error::Rank(format!("need at least 2 samples, got {n}")));
    }
    let d_in = descriptors[0].len();
    for (i, x) in descriptors.iter().enumerate() {
        if x.len() != d_in {
            return Err(Error::Shape(format!(
                "sample {i} has length {}, expected {d_in}",
                x.len()
            )));
        }
    }
    if d_out == 0 || d_out > d_in.min(n - 1) {
        return Err(Error::Rank(format!(
            "d_out {d_out} exceeds min(D={d_in}, n-1={})",
            n - 1
        )));
    }

    let mut mean = vec![0.0; d_in];
    for x in descriptors {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    // Centered data, row-major n×D.
    let mut centered = vec![0.0; n * d_in];
    let mut total_variance = 0.0;
    for (i, x) in descriptors.iter().enumerate() {
        for (j, (v, m)) in x.iter().zip(&mean).enumerate() {
            let c = v - m;
            centered[i * d_in + j] = c;
            total_variance += c * c;
        }
    }
    if total_variance <= DEGENERATE_NORM {
        return Err(Error::DegenerateData(
            "fitting set has zero variance; nothing to decompose".into(),
        ));
    }

    let denom = (n - 1) as f64;
    let (eigenvalues, mut basis) = if d_in <= n {
        // Direct covariance route: S = XᵀX/(n−1), D×D.
        let mut cov = vec![0.0; d_in * d_in];
        for row in centered.chunks_exact(d_in) {
            for j in 0..d_in {
                let xj = row[j];
                if xj == 0.0 {
                    continue;
                }
                let out = &mut cov[j * d_in..(j + 1) * d_in];
                for (o, &xk) in out.iter_mut().zip(row) {
                    *o += xj * xk;
                }
            }
        }
        for v in cov.iter_mut() {
            *v /= denom;
        }
        let (values, vectors) = symmetric_eigen(&cov, d_in);
        let basis = vectors[..d_out * d_in].to_vec();
        (values[..d_out].to_vec(), basis)
    } else {
        // Gram route for D > n: eigendecompose G = XXᵀ/(n−1) (n×n) and map
        // eigenvectors back through Xᵀ.
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            let xi = &centered[i * d_in..(i + 1) * d_in];
            for j in i..n {
                let xj = &centered[j * d_in..(j + 1) * d_in];
                let dot: f64 = xi.iter().zip(xj).map(|(a, b)| a * b).sum();
                gram[i * n + j] = dot / denom;
                gram[j * n + i] = dot / denom;
            }
        }
        let (values, vectors) = symmetric_eigen(&gram, n);
        let mut basis = vec![0.0; d_out * d_in];
        for k in 0..d_out {
            let lambda = values[k].max(0.0);
            if lambda <= DEGENERATE_NORM {
                return Err(Error::Rank(format!(
                    "component {k} has vanishing variance; lower d_out"
                )));
            }
            // u_k = Xᵀ v_k / √((n−1)·λ_k)
            let scale = 1.0 / (denom * lambda).sqrt();
            let row = &mut basis[k * d_in..(k + 1) * d_in];
            for i in 0..n {
                let w = vectors[k * n + i] * scale;
                if w == 0.0 {
                    continue;
                }
                let xi = &centered[i * d_in..(i + 1) * d_in];
                for (r, &x) in row.iter_mut().zip(xi) {
                    *r += w * x;
                }
            }
        }
        (values[..d_out].to_vec(), basis)
    };

    canonicalize_signs(&mut basis, d_out, d_in);
    let whiten_scale: Vec<f64> =
        eigenvalues.iter().map(|&l| 1.0 / (l.max(0.0) + EPS_REG).sqrt()).collect();
    Ok(Projection { mean, basis, whiten_scale, d_in, d_out })
}

impl Projection {
    /// Project, whiten, and L2-normalize one descriptor.
    ///
    /// Returns the projected vector and a degenerate flag; a degenerate
    /// input (e.g. exactly the mean) yields the zero vector.
    pub fn project(&self, x: &[f64]) -> Result<(Vec<f64>, bool)> {
        if x.len() != self.d_in {
            return Err(Error::Shape(format!(
                "input length {} does not match projection D={}",
                x.len(),
                self.d_in
            )));
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        let mut out = vec![0.0; self.d_out];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.basis[k * self.d_in..(k + 1) * self.d_in];
            let dot: f64 = row.iter().zip(&centered).map(|(a, b)| a * b).sum();
            *o = self.whiten_scale[k] * dot;
        }
        let degenerate = l2_normalize_in_place(&mut out);
        if degenerate {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok((out, degenerate))
    }

    /// Project every row of a descriptor matrix.
    pub fn project_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|x| self.project(x).map(|(v, _)| v)).collect()
    }

    /// Serialize as a binary container: magic "CLPJ", u32 version=1, u32 D,
    /// u32 d_out, then mean, basis, whiten_scale as float32 little-endian.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        (|| -> std::io::Result<()> {
            container::write_magic(&mut w, PROJECTION_MAGIC, PROJECTION_VERSION)?;
            container::write_u32(&mut w, self.d_in as u32)?;
            container::write_u32(&mut w, self.d_out as u32)?;
            let as_f32 = |v: &[f64]| -> Vec<f32> { v.iter().map(|&x| x as f32).collect() };
            container::write_f32_slice(&mut w, &as_f32(&self.mean))?;
            container::write_f32_slice(&mut w, &as_f32(&self.basis))?;
            container::write_f32_slice(&mut w, &as_f32(&self.whiten_scale))?;
            w.flush()
        })()
        .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Projection> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        container::read_magic(&mut r, PROJECTION_MAGIC, PROJECTION_VERSION)?;
        let d_in = container::read_u32(&mut r, "d_in")? as usize;
        let d_out = container::read_u32(&mut r, "d_out")? as usize;
        if d_out == 0 || d_in == 0 || d_out > d_in {
            return Err(Error::format("d_out", format!("invalid dims D={d_in}, d_out={d_out}")));
        }
        let to_f64 = |v: Vec<f32>| -> Vec<f64> { v.iter().map(|&x| x as f64).collect() };
        let mean = to_f64(container::read_f32_vec(&mut r, d_in, "mean")?);
        let basis = to_f64(container::read_f32_vec(&mut r, d_out * d_in, "basis")?);
        let whiten_scale = to_f64(container::read_f32_vec(&mut r, d_out, "whiten_scale")?);
        container::expect_eof(&mut r, "whiten_scale")?;
        Ok(Projection { mean, basis, whiten_scale, d_in, d_out })
    }

    /// Projected (whitened, un-normalized) coordinates of one descriptor;
    /// used by tests that check the whitened covariance.
    pub fn whiten_only(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_in {
            return Err(Error::Shape(format!(
                "input length {} does not match projection D={}",
                x.len(),
                self.d_in
            )));
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        let mut out = vec![0.0; self.d_out];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.basis[k * self.d_in..(k + 1) * self.d_in];
            let dot: f64 = row.iter().zip(&centered).map(|(a, b)| a * b).sum();
            *o = self.whiten_scale[k] * dot;
        }
        Ok(out)
    }
}

/// Sample covariance (1/(n−1)) of a set of equal-length vectors.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; d * d];
    for r in rows {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(v, m)| v - m).collect();
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += c[i] * c[j];
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    cov
}
