//! Dataset ingestion: MNIST-style IDX files, headerless CSV vectors and the
//! synthetic rotating-SPD sequence generator.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::LabeledSequence;
use crate::manifold::linalg::{gaussian_matrix, plane_rotation, symmetrize, sym_eigen, reconstruct};
use crate::manifold::SpdPoint;

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;

/// Images from an IDX file, pixels scaled to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// One image per row, row-major pixels.
    pub pixels: DMatrix<f64>,
}

impl IdxImages {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.count, self.rows, self.cols)
    }

    /// First `n` images.
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.count);
        Self {
            count: n,
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels.rows(0, n).into_owned(),
        }
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format("truncated IDX header".into()))
}

fn header(bytes: &[u8], expected_magic: u32, ndims: usize) -> Result<(Vec<usize>, usize)> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC && magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!("bad IDX magic {magic}")));
    }
    if magic != expected_magic {
        return Err(Error::Format(format!("IDX magic {magic}, expected {expected_magic}")));
    }
    let dims = (0..ndims)
        .map(|i| read_u32(bytes, 4 + 4 * i).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let payload = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("IDX dimensions overflow".into()))?;
    let offset = 4 + 4 * ndims;
    if bytes.len() - offset.min(bytes.len()) < payload {
        return Err(Error::Format(format!(
            "truncated IDX payload: {} bytes for {payload} values",
            bytes.len().saturating_sub(offset)
        )));
    }
    Ok((dims, offset))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let (dims, offset) = header(bytes, IDX_IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let stride = rows * cols;
    let data = &bytes[offset..offset + count * stride];
    let pixels = DMatrix::from_fn(count, stride, |i, j| f64::from(data[i * stride + j]) / 255.0);
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let (dims, offset) = header(bytes, IDX_LABELS_MAGIC, 1)?;
    Ok(bytes[offset..offset + dims[0]].to_vec())
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    parse_idx_images(&fs::read(path)?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&fs::read(path)?)
}

/// Checks that an image file and a label file describe the same samples.
pub fn pair_images_labels(images: IdxImages, labels: Vec<u8>) -> Result<(IdxImages, Vec<u8>)> {
    if images.count != labels.len() {
        return Err(Error::LengthMismatch {
            what: "IDX images vs labels",
            left: images.count,
            right: labels.len(),
        });
    }
    Ok((images, labels))
}

/// Reads one vector per line, comma-separated, no header.
pub fn load_csv_vectors(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Io(e.to_string()))?;
    parse_csv_records(&mut reader)
}

pub fn parse_csv_vectors(text: &str) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    parse_csv_records(&mut reader)
}

fn parse_csv_records<R: std::io::Read>(reader: &mut csv::Reader<R>) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("row {}: {e}", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("CSV vector"));
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "row {} has {} fields, expected {}",
                    line + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let Some(first) = rows.first() else {
        return Err(Error::Empty("CSV vectors"));
    };
    let n = first.len();
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

/// Parameters of [`synth_spd_sequences`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpdConfig {
    /// One class per orientation step, in degrees per frame.
    pub orientations_deg: Vec<f64>,
    pub per_class: usize,
    pub frames: usize,
    pub dim: usize,
    pub noise: f64,
    pub seed: u64,
}

/// Floor applied to eigenvalues of noisy frames.
const SYNTH_EIGEN_FLOOR: f64 = 1e-6;

/// Sequences whose frame t is `R(t·a)·D·R(t·a)ᵀ + noise` with
/// `D = diag(C, …, 1)`, R a rotation in the first coordinate plane and a the
/// class orientation. Samples are ordered class by class.
pub fn synth_spd_sequences(cfg: &SynthSpdConfig) -> Result<Vec<LabeledSequence>> {
    if cfg.dim < 2 {
        return Err(Error::param("dim", "must be at least 2"));
    }
    if cfg.frames < 2 {
        return Err(Error::param("frames", "must be at least 2"));
    }
    if cfg.orientations_deg.is_empty() {
        return Err(Error::param("orientations_deg", "need at least one class"));
    }
    if cfg.orientations_deg.iter().any(|a| !a.is_finite()) {
        return Err(Error::param("orientations_deg", "must be finite"));
    }
    for (i, a) in cfg.orientations_deg.iter().enumerate() {
        if cfg.orientations_deg[..i].contains(a) {
            return Err(Error::param("orientations_deg", format!("duplicate orientation {a}")));
        }
    }
    if !(cfg.noise >= 0.0) || !cfg.noise.is_finite() {
        return Err(Error::param("noise", "must be finite and >= 0"));
    }
    let c = cfg.dim;
    let d = DMatrix::from_diagonal(&DVector::from_fn(c, |i, _| (c - i) as f64));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.per_class * cfg.orientations_deg.len());
    for (label, &deg) in cfg.orientations_deg.iter().enumerate() {
        let a = deg.to_radians();
        for _ in 0..cfg.per_class {
            let frames = (0..cfg.frames)
                .map(|t| {
                    let r = plane_rotation(c, a * t as f64);
                    let mut m = &r * &d * r.transpose();
                    if cfg.noise > 0.0 {
                        m += symmetrize(&gaussian_matrix(c, c, &mut rng)) * cfg.noise;
                    }
                    let clamped = reconstruct(&sym_eigen(&symmetrize(&m)), |x| x.max(SYNTH_EIGEN_FLOOR));
                    SpdPoint::new(symmetrize(&clamped))
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(LabeledSequence { frames, label });
        }
    }
    Ok(out)
}

/// Splits `data` into `(train, test)` with `test_fraction` of every class in
/// the test part, after a seeded shuffle within each class.
pub fn stratified_split(
    data: &[LabeledSequence],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledSequence>, Vec<LabeledSequence>)> {
    use rand::seq::SliceRandom;
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::param("test_fraction", "must lie in [0, 1)"));
    }
    let classes = data.iter().map(|s| s.label + 1).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut members: Vec<&LabeledSequence> = data.iter().filter(|s| s.label == c).collect();
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        for (i, s) in members.into_iter().enumerate() {
            if i < n_test {
                test.push(s.clone());
            } else {
                train.push(s.clone());
            }
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_bytes(magic: u32, dims: &[u32], payload: &[u8]) -> Vec<u8> {
        let mut b = magic.to_be_bytes().to_vec();
        for d in dims {
            b.extend(d.to_be_bytes());
        }
        b.extend(payload);
        b
    }

    #[test]
    fn parses_images_and_scales_pixels() {
        let b = idx_bytes(2051, &[2, 1, 2], &[0, 255, 51, 102]);
        let img = parse_idx_images(&b).unwrap();
        assert_eq!(img.dims(), (2, 1, 2));
        assert_eq!(img.pixels[(0, 1)], 1.0);
        assert!((img.pixels[(1, 0)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn mnist_header_dims() {
        let mut b = idx_bytes(2051, &[60000, 28, 28], &[]);
        b.resize(16 + 60000 * 784, 0);
        assert_eq!(parse_idx_images(&b).unwrap().dims(), (60000, 28, 28));
    }

    #[test]
    fn bad_magic_rejected() {
        let b = idx_bytes(2050, &[1], &[3]);
        assert!(matches!(parse_idx_labels(&b), Err(Error::Format(_))));
        let b = idx_bytes(2049, &[1], &[3]);
        assert!(parse_idx_images(&b).is_err());
    }

    #[test]
    fn truncated_payload_rejected() {
        let b = idx_bytes(2049, &[5], &[1, 2, 3]);
        assert!(matches!(parse_idx_labels(&b), Err(Error::Format(_))));
        assert!(parse_idx_labels(&[0, 0, 8]).is_err());
    }

    #[test]
    fn overflowing_dims_rejected() {
        let b = idx_bytes(2051, &[u32::MAX, u32::MAX, u32::MAX], &[]);
        let err = parse_idx_images(&b).unwrap_err();
        assert!(matches!(err, Error::Format(ref m) if m.contains("overflow") || m.contains("truncated")));
    }

    #[test]
    fn pairing_count_mismatch() {
        let img = parse_idx_images(&idx_bytes(2051, &[2, 1, 1], &[0, 0])).unwrap();
        assert!(pair_images_labels(img, vec![1, 2, 3]).is_err());
    }

    #[test]
    fn csv_rows() {
        let m = parse_csv_vectors("1,2,3\n4.5, 5 ,-6\n").unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(1, 2)], -6.0);
        assert!(parse_csv_vectors("1,2\n3\n").is_err());
        assert!(parse_csv_vectors("1,x\n").is_err());
    }

    fn synth(orientations: Vec<f64>, noise: f64, seed: u64) -> Vec<LabeledSequence> {
        synth_spd_sequences(&SynthSpdConfig {
            orientations_deg: orientations,
            per_class: 2,
            frames: 5,
            dim: 3,
            noise,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn zero_orientation_is_constant() {
        let data = synth(vec![0.0], 0.0, 1);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        for f in &data[0].frames {
            assert!((f.matrix() - &d).amax() < 1e-12);
        }
    }

    #[test]
    fn noiseless_samples_of_a_class_coincide() {
        let data = synth(vec![30.0, 60.0], 0.0, 4);
        for (a, b) in data[0].frames.iter().zip(&data[1].frames) {
            assert_eq!(a.matrix(), b.matrix());
        }
        assert_eq!(data[2].label, 1);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth(vec![10.0, 15.0], 0.1, 9);
        let b = synth(vec![10.0, 15.0], 0.1, 9);
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.frames.iter().zip(&y.frames) {
                assert_eq!(p.matrix(), q.matrix());
            }
        }
    }

    #[test]
    fn duplicate_orientations_rejected() {
        let cfg = SynthSpdConfig {
            orientations_deg: vec![30.0, 30.0],
            per_class: 1,
            frames: 3,
            dim: 2,
            noise: 0.0,
            seed: 0,
        };
        assert!(synth_spd_sequences(&cfg).is_err());
    }

    #[test]
    fn split_is_stratified() {
        let data = synth(vec![10.0, 20.0], 0.0, 0);
        let (train, test) = stratified_split(&data, 0.5, 3).unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(test.iter().filter(|s| s.label == 0).count(), 1);
    }
}
