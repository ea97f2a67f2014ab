//! Traversal data model, synthetic generation, and the descriptor-table /
//! manifest file formats.
//!
//! A traversal is one recorded pass through a route: an ordered list of
//! frames, each carrying a unit-norm place descriptor. A [`TraversalSet`]
//! bundles a reference traversal with index-aligned variants of the same
//! route under changed appearance conditions. The synthetic generator stands
//! in for real recorded data: the reference is a smooth random walk on the
//! unit sphere and each variant applies a fixed linear distortion plus
//! per-frame noise before renormalizing.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::features::l2_normalize_in_place;
use crate::rng::{label, stream_rng};

pub const RAW_IMAGE_SIDE: usize = 84;
pub const RAW_IMAGE_CHANNELS: usize = 3;
pub const RAW_IMAGE_LEN: usize = RAW_IMAGE_SIDE * RAW_IMAGE_SIDE * RAW_IMAGE_CHANNELS;

const DESCRIPTOR_MAGIC: &[u8; 4] = b"CLDT";
const DESCRIPTOR_VERSION: u32 = 1;
/// Tolerance on descriptor unit norms (generation and load paths).
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Appearance condition of a traversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Reference,
    Moderate,
    Extreme,
}

impl Condition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::Reference => "reference",
            Condition::Moderate => "moderate",
            Condition::Extreme => "extreme",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(Condition::Reference),
            "moderate" => Ok(Condition::Moderate),
            "extreme" => Ok(Condition::Extreme),
            other => Err(Error::InvalidConfig(format!(
                "unknown condition {other:?}, expected reference|moderate|extreme"
            ))),
        }
    }
}

/// One place along a traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Position within the parent traversal.
    pub index: usize,
    /// Unit-norm place descriptor.
    pub descriptor: Vec<f64>,
    /// Procedural RGB image, only materialized for the raw-image baseline.
    pub raw_image: Option<Vec<u8>>,
}

/// An ordered pass through a route.
#[derive(Debug, Clone, PartialEq)]
pub struct Traversal {
    pub name: String,
    pub condition: Condition,
    frames: Vec<Frame>,
    dim: usize,
}

impl Traversal {
    /// Validates the shared-dimension, index and norm invariants.
    pub fn new(name: impl Into<String>, condition: Condition, frames: Vec<Frame>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "traversal needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let dim = frames[0].descriptor.len();
        if dim == 0 {
            return Err(Error::InvalidConfig("descriptor dimension must be positive".into()));
        }
        for (i, frame) in frames.iter().enumerate() {
            if frame.index != i {
                return Err(Error::InvalidConfig(format!(
                    "frame index {} at position {i}: indices must be 0..N-1 with no gaps",
                    frame.index
                )));
            }
            if frame.descriptor.len() != dim {
                return Err(Error::Shape(format!(
                    "frame {i} has dim {} but traversal dim is {dim}",
                    frame.descriptor.len()
                )));
            }
            let norm = frame.descriptor.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::InvalidConfig(format!(
                    "frame {i} descriptor norm {norm} outside 1±{NORM_TOLERANCE}"
                )));
            }
            if let Some(img) = &frame.raw_image {
                if img.len() != RAW_IMAGE_LEN {
                    return Err(Error::Shape(format!(
                        "frame {i} raw image has {} bytes, expected {RAW_IMAGE_LEN}",
                        img.len()
                    )));
                }
            }
        }
        Ok(Traversal { name: name.into(), condition, frames, dim })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn descriptor(&self, index: usize) -> &[f64] {
        &self.frames[index].descriptor
    }

    /// Descriptors as an N×dim row-major copy.
    pub fn descriptor_matrix(&self) -> Vec<Vec<f64>> {
        self.frames.iter().map(|f| f.descriptor.clone()).collect()
    }
}

/// A reference traversal and its index-aligned appearance variants.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversalSet {
    pub reference: Traversal,
    pub variants: Vec<Traversal>,
}

impl TraversalSet {
    /// Validates index alignment (equal N) and shared dimensionality.
    pub fn new(reference: Traversal, variants: Vec<Traversal>) -> Result<Self> {
        for v in &variants {
            if v.len() != reference.len() {
                return Err(Error::Alignment(format!(
                    "variant {:?} has {} frames but reference {:?} has {}",
                    v.name,
                    v.len(),
                    reference.name,
                    reference.len()
                )));
            }
            if v.dim() != reference.dim() {
                return Err(Error::Alignment(format!(
                    "variant {:?} has dim {} but reference has dim {}",
                    v.name,
                    v.dim(),
                    reference.dim()
                )));
            }
        }
        Ok(TraversalSet { reference, variants })
    }

    pub fn variant(&self, condition: Condition) -> Option<&Traversal> {
        if condition == Condition::Reference {
            return Some(&self.reference);
        }
        self.variants.iter().find(|v| v.condition == condition)
    }
}

/// Distortion and noise strength for one synthetic condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionStrength {
    /// Linear distortion strength β (relative magnitude; see `SynthConfig`).
    pub beta: f64,
    /// Per-frame noise scale σ (relative magnitude).
    pub sigma: f64,
}

/// Configuration for the synthetic traversal generator.
///
/// The distortion matrix G and the per-frame noise are scaled by 1/√dim so
/// that β and σ measure perturbation magnitude relative to the unit-norm
/// descriptors, independent of dimensionality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_frames: usize,
    pub dim: usize,
    /// Random-walk step size ρ; larger values make neighboring places easier
    /// to tell apart.
    pub walk_step: f64,
    pub moderate: ConditionStrength,
    pub extreme: ConditionStrength,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_frames: 100,
            dim: 64,
            walk_step: 0.15,
            moderate: ConditionStrength { beta: 0.1, sigma: 0.3 },
            extreme: ConditionStrength { beta: 0.5, sigma: 1.0 },
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_frames must be >= 2, got {}",
                self.n_frames
            )));
        }
        if self.dim < 2 {
            return Err(Error::InvalidConfig(format!("dim must be >= 2, got {}", self.dim)));
        }
        for (name, v) in [
            ("walk_step", self.walk_step),
            ("moderate.beta", self.moderate.beta),
            ("moderate.sigma", self.moderate.sigma),
            ("extreme.beta", self.extreme.beta),
            ("extreme.sigma", self.extreme.sigma),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    fn strength(&self, condition: Condition) -> ConditionStrength {
        match condition {
            Condition::Reference => ConditionStrength { beta: 0.0, sigma: 0.0 },
            Condition::Moderate => self.moderate,
            Condition::Extreme => self.extreme,
        }
    }
}

fn standard_normal_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Generate a synthetic traversal set: a unit-sphere random walk reference
/// plus moderate/extreme variants. Pure function of the config.
pub fn generate_synthetic(config: &SynthConfig) -> Result<TraversalSet> {
    config.validate()?;
    let n = config.n_frames;
    let d = config.dim;

    let mut walk_rng = stream_rng(config.seed, &[label::WALK]);
    let mut frames = Vec::with_capacity(n);
    let mut current = standard_normal_vec(&mut walk_rng, d);
    l2_normalize_in_place(&mut current);
    frames.push(current.clone());
    for _ in 1..n {
        let eps = standard_normal_vec(&mut walk_rng, d);
        for (c, e) in current.iter_mut().zip(&eps) {
            *c += config.walk_step * e;
        }
        l2_normalize_in_place(&mut current);
        frames.push(current.clone());
    }

    let reference = Traversal::new(
        "synthetic-reference",
        Condition::Reference,
        frames
            .iter()
            .enumerate()
            .map(|(index, descriptor)| Frame { index, descriptor: descriptor.clone(), raw_image: None })
            .collect(),
    )?;

    // The distortion matrix is shared across conditions and scaled so that a
    // unit input maps to an expected unit-norm perturbation.
    let needs_distortion =
        config.moderate.beta != 0.0 || config.extreme.beta != 0.0;
    let distortion: Option<Vec<f64>> = if needs_distortion {
        let mut g_rng = stream_rng(config.seed, &[label::DISTORTION]);
        let scale = 1.0 / (d as f64).sqrt();
        Some((0..d * d).map(|_| scale * g_rng.sample::<f64, _>(StandardNormal)).collect())
    } else {
        None
    };

    let mut variants = Vec::new();
    for condition in [Condition::Moderate, Condition::Extreme] {
        let strength = config.strength(condition);
        let name = format!("synthetic-{condition}");
        if strength.beta == 0.0 && strength.sigma == 0.0 {
            // Identity condition: bit-equal to the reference by construction.
            let variant_frames = reference
                .frames()
                .iter()
                .map(|f| Frame { index: f.index, descriptor: f.descriptor.clone(), raw_image: None })
                .collect();
            variants.push(Traversal::new(name, condition, variant_frames)?);
            continue;
        }
        let mut noise_rng = stream_rng(config.seed, &[label::NOISE, condition as u64]);
        let noise_scale = strength.sigma / (d as f64).sqrt();
        let mut variant_frames = Vec::with_capacity(n);
        for (index, x) in frames.iter().enumerate() {
            let mut y = x.clone();
            if strength.beta != 0.0 {
                let g = distortion.as_ref().expect("distortion drawn when beta != 0");
                for (row, yv) in y.iter_mut().enumerate() {
                    let g_row = &g[row * d..(row + 1) * d];
                    let gx: f64 = g_row.iter().zip(x).map(|(a, b)| a * b).sum();
                    *yv += strength.beta * gx;
                }
            }
            if strength.sigma != 0.0 {
                for yv in y.iter_mut() {
                    *yv += noise_scale * noise_rng.sample::<f64, _>(StandardNormal);
                }
            }
            l2_normalize_in_place(&mut y);
            variant_frames.push(Frame { index, descriptor: y, raw_image: None });
        }
        variants.push(Traversal::new(name, condition, variant_frames)?);
    }

    TraversalSet::new(reference, variants)
}

/// Mean per-index cosine similarity between two index-aligned traversals.
pub fn mean_cosine_similarity(a: &Traversal, b: &Traversal) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!(
            "traversals have {} and {} frames",
            a.len(),
            b.len()
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("dims {} vs {}", a.dim(), b.dim())));
    }
    let total: f64 = a
        .frames()
        .iter()
        .zip(b.frames())
        .map(|(fa, fb)| fa.descriptor.iter().zip(&fb.descriptor).map(|(x, y)| x * y).sum::<f64>())
        .sum();
    Ok(total / a.len() as f64)
}

/// Write a traversal's descriptors as a binary table:
/// magic "CLDT", u32 version=1, u32 frame_count, u32 dim, then
/// frame_count×dim float32 little-endian row-major.
pub fn write_descriptor_table(traversal: &Traversal, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        container::write_magic(&mut w, DESCRIPTOR_MAGIC, DESCRIPTOR_VERSION)?;
        container::write_u32(&mut w, traversal.len() as u32)?;
        container::write_u32(&mut w, traversal.dim() as u32)?;
        for frame in traversal.frames() {
            let row: Vec<f32> = frame.descriptor.iter().map(|&v| v as f32).collect();
            container::write_f32_slice(&mut w, &row)?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Read a descriptor table written by [`write_descriptor_table`].
///
/// `name` and `condition` are not stored in the table; they come from the
/// manifest (or the caller).
pub fn read_descriptor_table(path: &Path, name: &str, condition: Condition) -> Result<Traversal> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    container::read_magic(&mut r, DESCRIPTOR_MAGIC, DESCRIPTOR_VERSION)?;
    let frame_count = container::read_u32(&mut r, "frame_count")? as usize;
    let dim = container::read_u32(&mut r, "dim")? as usize;
    let data = container::read_f32_vec(&mut r, frame_count * dim, "frame data")?;
    container::expect_eof(&mut r, "frame data")?;
    let frames = data
        .chunks_exact(dim)
        .enumerate()
        .map(|(index, row)| Frame {
            index,
            descriptor: row.iter().map(|&v| v as f64).collect(),
            raw_image: None,
        })
        .collect();
    Traversal::new(name, condition, frames)
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    condition: Condition,
    descriptors: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    reference: ManifestEntry,
    variants: Vec<ManifestEntry>,
}

/// Write a JSON manifest plus one descriptor table per traversal.
///
/// Table paths are stored relative to the manifest. Returns the written
/// table paths (reference first).
pub fn write_manifest(set: &TraversalSet, manifest_path: &Path) -> Result<Vec<PathBuf>> {
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut written = Vec::new();
    let entry_for = |t: &Traversal| -> ManifestEntry {
        ManifestEntry {
            name: t.name.clone(),
            condition: t.condition,
            descriptors: format!("{}.cldt", t.name),
        }
    };
    let reference = entry_for(&set.reference);
    let variants: Vec<ManifestEntry> = set.variants.iter().map(entry_for).collect();

    for (traversal, entry) in std::iter::once((&set.reference, &reference))
        .chain(set.variants.iter().zip(&variants))
    {
        let table_path = dir.join(&entry.descriptors);
        write_descriptor_table(traversal, &table_path)?;
        written.push(table_path);
    }

    let manifest = ManifestFile { reference, variants };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format("manifest", e.to_string()))?;
    std::fs::write(manifest_path, json).map_err(|e| Error::io(manifest_path, e))?;
    Ok(written)
}

/// Load a traversal set from a JSON manifest referencing descriptor tables.
pub fn load_manifest(manifest_path: &Path) -> Result<TraversalSet> {
    let text =
        std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: ManifestFile = serde_json::from_str(&text)
        .map_err(|e| Error::format("manifest", format!("invalid JSON: {e}")))?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let load = |entry: &ManifestEntry| -> Result<Traversal> {
        read_descriptor_table(&dir.join(&entry.descriptors), &entry.name, entry.condition)
    };
    let reference = load(&manifest.reference)?;
    let variants = manifest.variants.iter().map(load).collect::<Result<Vec<_>>>()?;
    TraversalSet::new(reference, variants)
}

/// Procedural RGB image for a place, 84×84×3 bytes.
///
/// Neighboring places share a low-frequency sinusoid pattern whose phases
/// drift slowly with the place index; the condition applies a brightness
/// shift and per-pixel noise.
pub fn make_raw_frame_image(place_index: usize, condition: Condition, seed: u64) -> Vec<u8> {
    // Pattern parameters depend only on the dataset seed, not the place, so
    // nearby places look alike up to the phase drift.
    let mut pattern_rng = stream_rng(seed, &[label::IMAGE]);
    const WAVES: usize = 4;
    let mut fu = [0.0f64; WAVES];
    let mut fv = [0.0f64; WAVES];
    let mut phase = [0.0f64; WAVES];
    let mut drift = [0.0f64; WAVES];
    let mut amp = [0.0f64; WAVES];
    for k in 0..WAVES {
        fu[k] = pattern_rng.gen_range(0.5..3.0);
        fv[k] = pattern_rng.gen_range(0.5..3.0);
        phase[k] = pattern_rng.gen_range(0.0..std::f64::consts::TAU);
        drift[k] = pattern_rng.gen_range(0.05..0.25);
        amp[k] = pattern_rng.gen_range(0.5..1.0);
    }

    let (brightness, noise) = match condition {
        Condition::Reference => (0.0, 0.0),
        Condition::Moderate => (-30.0, 8.0),
        Condition::Extreme => (-80.0, 25.0),
    };
    let mut noise_rng =
        stream_rng(seed, &[label::IMAGE, place_index as u64, condition as u64]);

    let side = RAW_IMAGE_SIDE;
    let mut out = vec![0u8; RAW_IMAGE_LEN];
    for y in 0..side {
        for x in 0..side {
            let u = x as f64 / side as f64;
            let v = y as f64 / side as f64;
            let mut value = 0.0;
            for k in 0..WAVES {
                value += amp[k]
                    * (std::f64::consts::TAU * (fu[k] * u + fv[k] * v)
                        + phase[k]
                        + drift[k] * place_index as f64)
                        .sin();
            }
            let base = 128.0 + 48.0 * value / WAVES as f64;
            for c in 0..RAW_IMAGE_CHANNELS {
                // Slight per-channel offset so the image is genuinely RGB.
                let tint = 12.0 * (c as f64 - 1.0);
                let jitter: f64 = if noise > 0.0 {
                    noise * noise_rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                let px = (base + tint + brightness + jitter).clamp(0.0, 255.0);
                out[(y * side + x) * RAW_IMAGE_CHANNELS + c] = px as u8;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn small_config() -> SynthConfig {
        SynthConfig { n_frames: 20, dim: 8, seed: 11, ..SynthConfig::default() }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small_config();
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_condition_equals_reference() {
        let mut cfg = small_config();
        cfg.moderate = ConditionStrength { beta: 0.0, sigma: 0.0 };
        let set = generate_synthetic(&cfg).unwrap();
        let moderate = set.variant(Condition::Moderate).unwrap();
        for (a, b) in set.reference.frames().iter().zip(moderate.frames()) {
            assert_eq!(a.descriptor, b.descriptor);
        }
    }

    #[test]
    fn condition_ordering_in_cosine_similarity() {
        // Spec worked example: n=100, d=64, rho=0.15, moderate sigma=0.3 /
        // beta=0.1, extreme sigma=1.0 / beta=0.5.
        let cfg = SynthConfig { n_frames: 100, dim: 64, seed: 3, ..SynthConfig::default() };
        let set = generate_synthetic(&cfg).unwrap();
        let moderate =
            mean_cosine_similarity(&set.reference, set.variant(Condition::Moderate).unwrap())
                .unwrap();
        let extreme =
            mean_cosine_similarity(&set.reference, set.variant(Condition::Extreme).unwrap())
                .unwrap();
        assert!(
            moderate > extreme,
            "expected moderate ({moderate}) > extreme ({extreme})"
        );
    }

    #[test]
    fn descriptors_are_unit_norm() {
        let set = generate_synthetic(&SynthConfig { dim: 16, ..small_config() }).unwrap();
        for t in std::iter::once(&set.reference).chain(&set.variants) {
            for f in t.frames() {
                let norm = f.descriptor.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() <= NORM_TOLERANCE, "norm {norm}");
            }
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = small_config();
        cfg.n_frames = 1;
        assert!(matches!(generate_synthetic(&cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = small_config();
        cfg.dim = 1;
        assert!(matches!(generate_synthetic(&cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = small_config();
        cfg.walk_step = -0.1;
        assert!(matches!(generate_synthetic(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn descriptor_table_round_trip_is_bit_exact() {
        let set = generate_synthetic(&small_config()).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("ref.cldt");
        write_descriptor_table(&set.reference, &path).unwrap();
        let loaded = read_descriptor_table(&path, &set.reference.name, Condition::Reference).unwrap();
        assert_eq!(loaded.len(), set.reference.len());
        assert_eq!(loaded.dim(), set.reference.dim());
        for (a, b) in loaded.frames().iter().zip(set.reference.frames()) {
            // Descriptors are stored as f32; the round trip must preserve the
            // stored bits exactly.
            let stored: Vec<f32> = b.descriptor.iter().map(|&v| v as f32).collect();
            let reread: Vec<f32> = a.descriptor.iter().map(|&v| v as f32).collect();
            assert_eq!(stored, reread);
            for (x, y) in a.descriptor.iter().zip(&stored) {
                assert_eq!(*x, *y as f64);
            }
        }
    }

    #[test]
    fn bad_magic_is_reported() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.cldt");
        std::fs::write(&path, b"XXXX\x01\x00\x00\x00").unwrap();
        let err = read_descriptor_table(&path, "bad", Condition::Reference).unwrap_err();
        match err {
            Error::Format { field, message } => {
                assert_eq!(field, "magic");
                assert!(message.contains("bad magic"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_reported() {
        let set = generate_synthetic(&SynthConfig { n_frames: 10, dim: 8, ..small_config() })
            .unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("trunc.cldt");
        write_descriptor_table(&set.reference, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        // Drop one frame's worth of payload: header still declares 10 frames.
        std::fs::write(&path, &bytes[..bytes.len() - 8 * 4]).unwrap();
        let err = read_descriptor_table(&path, "trunc", Condition::Reference).unwrap_err();
        match err {
            Error::Format { field, message } => {
                assert_eq!(field, "frame data");
                assert!(message.contains("truncated"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn oversized_payload_is_reported() {
        let set = generate_synthetic(&SynthConfig { n_frames: 10, dim: 8, ..small_config() })
            .unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("extra.cldt");
        write_descriptor_table(&set.reference, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&[0u8; 4]);
        std::fs::write(&path, &bytes).unwrap();
        let err = read_descriptor_table(&path, "extra", Condition::Reference).unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err:?}");
    }

    #[test]
    fn manifest_round_trip_matches_in_memory_set() {
        let set = generate_synthetic(&small_config()).unwrap();
        let dir = tempdir().unwrap();
        let manifest = dir.path().join("set.json");
        write_manifest(&set, &manifest).unwrap();
        let loaded = load_manifest(&manifest).unwrap();
        assert_eq!(loaded.reference.name, set.reference.name);
        assert_eq!(loaded.variants.len(), set.variants.len());
        // f32 storage: compare at stored precision.
        for (a, b) in loaded.reference.frames().iter().zip(set.reference.frames()) {
            for (x, y) in a.descriptor.iter().zip(&b.descriptor) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
    }

    #[test]
    fn manifest_with_no_variants_loads() {
        let set = generate_synthetic(&small_config()).unwrap();
        let solo = TraversalSet::new(set.reference.clone(), vec![]).unwrap();
        let dir = tempdir().unwrap();
        let manifest = dir.path().join("solo.json");
        write_manifest(&solo, &manifest).unwrap();
        let loaded = load_manifest(&manifest).unwrap();
        assert!(loaded.variants.is_empty());
    }

    #[test]
    fn manifest_alignment_error() {
        let set = generate_synthetic(&small_config()).unwrap();
        let short = generate_synthetic(&SynthConfig { n_frames: 19, ..small_config() }).unwrap();
        let dir = tempdir().unwrap();
        let manifest = dir.path().join("set.json");
        write_manifest(&set, &manifest).unwrap();
        // Overwrite the moderate table with a shorter traversal.
        write_descriptor_table(
            &short.reference,
            &dir.path().join("synthetic-moderate.cldt"),
        )
        .unwrap();
        let err = load_manifest(&manifest).unwrap_err();
        assert!(matches!(err, Error::Alignment(_)), "{err:?}");
    }

    #[test]
    fn manifest_missing_file_reports_path() {
        let dir = tempdir().unwrap();
        let manifest = dir.path().join("set.json");
        std::fs::write(
            &manifest,
            r#"{"reference":{"name":"r","condition":"reference","descriptors":"missing.cldt"},"variants":[]}"#,
        )
        .unwrap();
        let err = load_manifest(&manifest).unwrap_err();
        match err {
            Error::Io { path, .. } => assert!(path.ends_with("missing.cldt")),
            other => panic!("expected io error, got {other:?}"),
        }
    }

    #[test]
    fn raw_image_is_deterministic_and_sized() {
        let a = make_raw_frame_image(5, Condition::Moderate, 9);
        let b = make_raw_frame_image(5, Condition::Moderate, 9);
        assert_eq!(a, b);
        assert_eq!(a.len(), 84 * 84 * 3);
    }

    #[test]
    fn raw_image_condition_changes_pixels() {
        let reference = make_raw_frame_image(5, Condition::Reference, 9);
        let extreme = make_raw_frame_image(5, Condition::Extreme, 9);
        let mean_abs_diff: f64 = reference
            .iter()
            .zip(&extreme)
            .map(|(&a, &b)| (a as f64 - b as f64).abs())
            .sum::<f64>()
            / reference.len() as f64;
        assert!(mean_abs_diff > 0.0);
    }

    #[test]
    fn raw_image_neighbors_are_similar() {
        let a = make_raw_frame_image(10, Condition::Reference, 9);
        let b = make_raw_frame_image(11, Condition::Reference, 9);
        let far = make_raw_frame_image(60, Condition::Reference, 9);
        let diff = |x: &[u8], y: &[u8]| -> f64 {
            x.iter().zip(y).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum::<f64>()
                / x.len() as f64
        };
        assert!(diff(&a, &b) < diff(&a, &far));
    }
}
