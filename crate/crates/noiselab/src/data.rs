//! Labeled sample collections: synthetic generation, IDX ingestion, splits,
//! and JSON serialization.
//!
//! A [`Dataset`] owns flattened feature vectors in `[0, 1]`, the labels the
//! trainer is allowed to see (`observed_label`), and optionally the hidden
//! ground truth (`true_label`) that only evaluation code may consult. All
//! values are immutable after construction and safe to share across threads.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Validation => write!(f, "validation"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// One labeled sample. `true_label` is hidden from training and exists only
/// so evaluation can score selection quality after noise injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub observed_label: usize,
    pub true_label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub c: usize,
    pub feature_dim: usize,
    pub split: Split,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Construct and validate in one step.
    pub fn new(
        name: impl Into<String>,
        c: usize,
        feature_dim: usize,
        split: Split,
        samples: Vec<Sample>,
    ) -> Result<Self> {
        let d = Dataset { name: name.into(), c, feature_dim, split, samples };
        d.validate()?;
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.c < 2 {
            return Err(Error::Argument(format!(
                "dataset '{}': class count must be >= 2, got {}",
                self.name, self.c
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::Argument(format!(
                "dataset '{}': feature_dim must be positive",
                self.name
            )));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.features.len() != self.feature_dim {
                return Err(Error::Data(format!(
                    "dataset '{}': sample {} has {} features, expected {}",
                    self.name,
                    i,
                    s.features.len(),
                    self.feature_dim
                )));
            }
            if s.observed_label >= self.c {
                return Err(Error::Data(format!(
                    "dataset '{}': sample {} observed_label {} out of range for c={}",
                    self.name, i, s.observed_label, self.c
                )));
            }
            if let Some(t) = s.true_label {
                if t >= self.c {
                    return Err(Error::Data(format!(
                        "dataset '{}': sample {} true_label {} out of range for c={}",
                        self.name, i, t, self.c
                    )));
                }
            }
        }
        Ok(())
    }

    /// New dataset keeping only the samples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize], name_suffix: &str) -> Result<Self> {
        let mut samples = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = self.samples.get(i).ok_or_else(|| {
                Error::Argument(format!("subset index {} out of range for n={}", i, self.n()))
            })?;
            samples.push(s.clone());
        }
        Ok(Dataset {
            name: format!("{}{}", self.name, name_suffix),
            c: self.c,
            feature_dim: self.feature_dim,
            split: self.split,
            samples,
        })
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serialization cannot fail")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())
            .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        let d: Dataset = serde_json::from_str(&text)
            .map_err(|e| Error::Json { path: path.to_path_buf(), source: e })?;
        d.validate()?;
        Ok(d)
    }
}

/// Parameters for [`generate_synthetic`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub c: usize,
    pub feature_dim: usize,
    pub cluster_spread: f64,
    pub seed: u64,
}

const PHI_INV: f64 = 0.618_033_988_749_894_8; // 1/phi
const PHI_INV2: f64 = 0.381_966_011_250_105_2; // 1/phi^2

/// Cluster mean for class `k`, coordinate `j`: a low-discrepancy lattice in
/// [0.15, 0.85] that keeps means distinct for every (c, feature_dim) without
/// consuming random draws.
fn cluster_mean(k: usize, j: usize) -> f64 {
    let t = 0.5 + k as f64 * PHI_INV + j as f64 * PHI_INV2;
    0.15 + 0.7 * t.fract()
}

/// Generate `c` Gaussian clusters with round-robin class assignment
/// (sample `i` belongs to class `i % c`), so per-class counts are balanced
/// within one sample by construction. Features are clamped to [0, 1].
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.c < 2 {
        return Err(Error::Argument(format!("class count must be >= 2, got {}", spec.c)));
    }
    if spec.n < spec.c {
        return Err(Error::Argument(format!(
            "need at least one sample per class: n={} < c={}",
            spec.n, spec.c
        )));
    }
    if spec.feature_dim == 0 {
        return Err(Error::Argument("feature_dim must be positive".into()));
    }
    if !(spec.cluster_spread > 0.0) {
        return Err(Error::Argument(format!(
            "cluster_spread must be > 0, got {}",
            spec.cluster_spread
        )));
    }

    let mut rng = Rng::from_seed(spec.seed);
    let mut samples = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let class = i % spec.c;
        let features = (0..spec.feature_dim)
            .map(|j| {
                let v = cluster_mean(class, j) + spec.cluster_spread * rng.normal();
                v.clamp(0.0, 1.0)
            })
            .collect();
        samples.push(Sample { features, observed_label: class, true_label: Some(class) });
    }

    Dataset::new(
        format!("synthetic-n{}-c{}-d{}-s{}", spec.n, spec.c, spec.feature_dim, spec.seed),
        spec.c,
        spec.feature_dim,
        Split::Train,
        samples,
    )
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

/// Disjoint cover of the input samples. Validation and test sizes are floors
/// of their fractions; the remainder goes to train. Deterministic given seed.
pub fn split_dataset(
    d: &Dataset,
    fractions: &SplitFractions,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let SplitFractions { train, validation, test } = *fractions;
    for (label, f) in [("train", train), ("validation", validation), ("test", test)] {
        if !(f >= 0.0) {
            return Err(Error::Argument(format!("{label} fraction must be >= 0, got {f}")));
        }
    }
    let sum = train + validation + test;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!("fractions must sum to 1, got {sum}")));
    }

    let n = d.n();
    let n_val = (validation * n as f64).floor() as usize;
    let n_test = (test * n as f64).floor() as usize;
    let n_train = n - n_val - n_test;

    let mut indices: Vec<usize> = (0..n).collect();
    Rng::from_seed(seed).shuffle(&mut indices);

    let pick = |range: std::ops::Range<usize>, split: Split| -> Dataset {
        let samples = indices[range].iter().map(|&i| d.samples[i].clone()).collect();
        Dataset {
            name: d.name.clone(),
            c: d.c,
            feature_dim: d.feature_dim,
            split,
            samples,
        }
    };

    Ok((
        pick(0..n_train, Split::Train),
        pick(n_train..n_train + n_val, Split::Validation),
        pick(n_train + n_val..n, Split::Test),
    ))
}

// ── IDX binary ingestion ───────────────────────────────────────────────────

const IDX_U8_TYPE: u8 = 0x08;

fn be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]])
}

/// Parse an IDX image/label pair from raw bytes.
///
/// Images: big-endian header `00 00 08 d` with `d >= 3` dimensions (so both
/// `N x H x W` planes and `N x D x H x W` volumes load; trailing dimensions
/// are multiplied out into a flat feature vector). Labels: `00 00 08 01`.
/// Pixels are scaled to [0, 1] by dividing by 255; the file label becomes
/// both `observed_label` and `true_label` (datasets are clean on load).
pub fn parse_idx_pair(
    image_bytes: &[u8],
    label_bytes: &[u8],
    c: usize,
    name: &str,
) -> Result<Dataset> {
    if c < 2 {
        return Err(Error::Argument(format!("class count must be >= 2, got {c}")));
    }

    // Image header.
    if image_bytes.len() < 4 {
        return Err(Error::Format(format!(
            "image file too short for the magic number: {} bytes",
            image_bytes.len()
        )));
    }
    if image_bytes[0] != 0 || image_bytes[1] != 0 {
        return Err(Error::Format(format!(
            "image magic: reserved bytes must be zero, got {:02x} {:02x}",
            image_bytes[0], image_bytes[1]
        )));
    }
    if image_bytes[2] != IDX_U8_TYPE {
        return Err(Error::Format(format!(
            "image magic: type byte must be 0x08 (u8), got {:#04x}",
            image_bytes[2]
        )));
    }
    let ndims = image_bytes[3] as usize;
    if ndims < 3 {
        return Err(Error::Format(format!(
            "image magic: dimension count must be >= 3, got {ndims}"
        )));
    }
    let header_len = 4 + 4 * ndims;
    if image_bytes.len() < header_len {
        return Err(Error::Format(format!(
            "image header: declares {ndims} dimensions but file has only {} bytes",
            image_bytes.len()
        )));
    }
    let dims: Vec<usize> =
        (0..ndims).map(|i| be_u32(image_bytes, 4 + 4 * i) as usize).collect();
    let count = dims[0];
    let feature_dim = dims[1..].iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let feature_dim = match feature_dim {
        Some(f) if f > 0 => f,
        _ => {
            return Err(Error::Format(format!(
                "image dimensions: product of {:?} is zero or overflows",
                &dims[1..]
            )))
        }
    };
    let expected = header_len + count * feature_dim;
    if image_bytes.len() != expected {
        return Err(Error::Format(format!(
            "image payload: expected {} bytes for dims {:?}, file has {}",
            expected,
            dims,
            image_bytes.len()
        )));
    }

    // Label header.
    if label_bytes.len() < 8 {
        return Err(Error::Format(format!(
            "label file too short for the header: {} bytes",
            label_bytes.len()
        )));
    }
    if label_bytes[0] != 0 || label_bytes[1] != 0 {
        return Err(Error::Format(format!(
            "label magic: reserved bytes must be zero, got {:02x} {:02x}",
            label_bytes[0], label_bytes[1]
        )));
    }
    if label_bytes[2] != IDX_U8_TYPE || label_bytes[3] != 1 {
        return Err(Error::Format(format!(
            "label magic: expected type 0x08 with 1 dimension, got {:#04x} with {}",
            label_bytes[2], label_bytes[3]
        )));
    }
    let label_count = be_u32(label_bytes, 4) as usize;
    if label_count == 0 {
        return Err(Error::Format("label file declares zero labels".into()));
    }
    if label_bytes.len() != 8 + label_count {
        return Err(Error::Format(format!(
            "label payload: expected {} bytes for {} labels, file has {}",
            8 + label_count,
            label_count,
            label_bytes.len()
        )));
    }
    if label_count != count {
        return Err(Error::Format(format!(
            "image/label count mismatch: {count} images vs {label_count} labels"
        )));
    }

    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let start = header_len + i * feature_dim;
        let features: Vec<f64> =
            image_bytes[start..start + feature_dim].iter().map(|&b| f64::from(b) / 255.0).collect();
        let label = label_bytes[8 + i] as usize;
        if label >= c {
            return Err(Error::Data(format!(
                "label {label} at index {i} out of range for c={c}"
            )));
        }
        samples.push(Sample { features, observed_label: label, true_label: Some(label) });
    }

    Dataset::new(name, c, feature_dim, Split::Train, samples)
}

/// Read an IDX image/label file pair from disk. See [`parse_idx_pair`].
pub fn load_idx_pair(images_path: &Path, labels_path: &Path, c: usize) -> Result<Dataset> {
    let image_bytes = std::fs::read(images_path)
        .map_err(|e| Error::Io { path: images_path.to_path_buf(), source: e })?;
    let label_bytes = std::fs::read(labels_path)
        .map_err(|e| Error::Io { path: labels_path.to_path_buf(), source: e })?;
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".to_string());
    parse_idx_pair(&image_bytes, &label_bytes, c, &name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_images(dims: &[u32], payload: &[u8]) -> Vec<u8> {
        let mut b = vec![0, 0, IDX_U8_TYPE, dims.len() as u8];
        for d in dims {
            b.extend_from_slice(&d.to_be_bytes());
        }
        b.extend_from_slice(payload);
        b
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut b = vec![0, 0, IDX_U8_TYPE, 1];
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    #[test]
    fn parses_full_scale_pixels_to_one() {
        let images = idx_images(&[4, 2, 2], &[255u8; 16]);
        let labels = idx_labels(&[0, 1, 0, 1]);
        let d = parse_idx_pair(&images, &labels, 2, "toy").unwrap();
        assert_eq!(d.n(), 4);
        assert_eq!(d.feature_dim, 4);
        for s in &d.samples {
            assert!(s.features.iter().all(|&f| f == 1.0));
            assert_eq!(s.true_label, Some(s.observed_label));
        }
        assert_eq!(d.split, Split::Train);
    }

    #[test]
    fn accepts_flattened_volumes() {
        // 2 volumes of 2x2x2 voxels arrive as a 4-dimensional IDX tensor.
        let images = idx_images(&[2, 2, 2, 2], &[128u8; 16]);
        let labels = idx_labels(&[1, 0]);
        let d = parse_idx_pair(&images, &labels, 2, "vol").unwrap();
        assert_eq!(d.feature_dim, 8);
        assert!((d.samples[0].features[0] - 128.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn empty_label_file_is_a_format_error() {
        let images = idx_images(&[0, 2, 2], &[]);
        let labels = idx_labels(&[]);
        let err = parse_idx_pair(&images, &labels, 2, "toy").unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn count_mismatch_is_a_format_error() {
        let images = idx_images(&[5, 2, 2], &[0u8; 20]);
        let labels = idx_labels(&[0, 1, 0, 1]);
        let err = parse_idx_pair(&images, &labels, 2, "toy").unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
        assert!(err.to_string().contains("mismatch"), "{err}");
    }

    #[test]
    fn bad_magic_names_the_field() {
        let mut images = idx_images(&[1, 2, 2], &[0u8; 4]);
        images[2] = 0x09;
        let labels = idx_labels(&[0]);
        let err = parse_idx_pair(&images, &labels, 2, "toy").unwrap_err();
        assert!(err.to_string().contains("type byte"), "{err}");

        let images = idx_images(&[1, 4], &[0u8; 4]); // only 2 dims
        let err = parse_idx_pair(&images, &labels, 2, "toy").unwrap_err();
        assert!(err.to_string().contains("dimension count"), "{err}");
    }

    #[test]
    fn out_of_range_label_is_a_data_error() {
        let images = idx_images(&[2, 1, 1], &[0u8; 2]);
        let labels = idx_labels(&[0, 7]);
        let err = parse_idx_pair(&images, &labels, 2, "toy").unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
    }

    #[test]
    fn synthetic_is_balanced_and_deterministic() {
        let spec =
            SyntheticSpec { n: 100, c: 2, feature_dim: 2, cluster_spread: 0.1, seed: 7 };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n(), 100);
        let count0 = a.samples.iter().filter(|s| s.observed_label == 0).count();
        let count1 = a.n() - count0;
        assert!(count0.abs_diff(count1) <= 1);
        for s in &a.samples {
            assert!(s.features.iter().all(|&f| (0.0..=1.0).contains(&f)));
        }
    }

    #[test]
    fn synthetic_rejects_fewer_samples_than_classes() {
        let spec = SyntheticSpec { n: 1, c: 2, feature_dim: 2, cluster_spread: 0.1, seed: 7 };
        assert!(matches!(generate_synthetic(&spec), Err(Error::Argument(_))));
    }

    #[test]
    fn cluster_means_are_distinct() {
        for c in 2..=12 {
            for j in 0..4 {
                let means: Vec<f64> = (0..c).map(|k| cluster_mean(k, j)).collect();
                for a in 0..c {
                    for b in (a + 1)..c {
                        assert!(
                            (means[a] - means[b]).abs() > 1e-6,
                            "collision c={c} j={j} k={a},{b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn split_sizes_follow_floor_then_remainder() {
        let spec =
            SyntheticSpec { n: 10, c: 2, feature_dim: 2, cluster_spread: 0.1, seed: 1 };
        let d = generate_synthetic(&spec).unwrap();
        let (tr, va, te) = split_dataset(
            &d,
            &SplitFractions { train: 0.9, validation: 0.1, test: 0.0 },
            1,
        )
        .unwrap();
        assert_eq!((tr.n(), va.n(), te.n()), (9, 1, 0));
        assert_eq!(tr.split, Split::Train);
        assert_eq!(va.split, Split::Validation);
        assert_eq!(te.split, Split::Test);
    }

    #[test]
    fn identity_split_keeps_everything_in_train() {
        let spec =
            SyntheticSpec { n: 10, c: 2, feature_dim: 2, cluster_spread: 0.1, seed: 1 };
        let d = generate_synthetic(&spec).unwrap();
        let (tr, va, te) = split_dataset(
            &d,
            &SplitFractions { train: 1.0, validation: 0.0, test: 0.0 },
            9,
        )
        .unwrap();
        assert_eq!((tr.n(), va.n(), te.n()), (10, 0, 0));
    }

    #[test]
    fn bad_fraction_sum_is_rejected() {
        let spec =
            SyntheticSpec { n: 10, c: 2, feature_dim: 2, cluster_spread: 0.1, seed: 1 };
        let d = generate_synthetic(&spec).unwrap();
        let err = split_dataset(
            &d,
            &SplitFractions { train: 0.5, validation: 0.5, test: 0.1 },
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn splits_are_a_disjoint_cover() {
        let spec =
            SyntheticSpec { n: 53, c: 3, feature_dim: 2, cluster_spread: 0.1, seed: 5 };
        let d = generate_synthetic(&spec).unwrap();
        let (tr, va, te) = split_dataset(
            &d,
            &SplitFractions { train: 0.6, validation: 0.2, test: 0.2 },
            11,
        )
        .unwrap();
        assert_eq!(tr.n() + va.n() + te.n(), d.n());
        // Every original sample lands in exactly one split. Feature vectors
        // are unique with overwhelming probability for Gaussian draws, so a
        // multiset comparison over the first feature suffices.
        let mut seen: Vec<u64> = tr
            .samples
            .iter()
            .chain(&va.samples)
            .chain(&te.samples)
            .map(|s| s.features[0].to_bits())
            .collect();
        let mut orig: Vec<u64> = d.samples.iter().map(|s| s.features[0].to_bits()).collect();
        seen.sort_unstable();
        orig.sort_unstable();
        assert_eq!(seen, orig);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let spec =
            SyntheticSpec { n: 20, c: 2, feature_dim: 3, cluster_spread: 0.2, seed: 3 };
        let d = generate_synthetic(&spec).unwrap();
        let text = d.to_json();
        let back: Dataset = serde_json::from_str(&text).unwrap();
        assert_eq!(d, back);
        for (a, b) in d.samples.iter().zip(&back.samples) {
            for (x, y) in a.features.iter().zip(&b.features) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
