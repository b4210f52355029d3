//! Per-minutia embedding vectors: loaded from files produced by an external
//! patch-embedding network, or synthesized as a handcrafted log-polar
//! neighbourhood signature when no network output is available.
//!
//! Binary layout (little-endian):
//!
//! | bytes | content                                  |
//! |-------|------------------------------------------|
//! | 0..4  | magic `EMB1`                             |
//! | 4..8  | `u32` record count                       |
//! | 8..12 | `u32` dimension                          |
//! | 12..  | `count × dim` `f32`, row-major by minutia |

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use crate::descriptor::DescriptorSet;
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, ray_angle, wrap_signed};
use crate::par::{map_range, Execution};
use crate::template::MinutiaeTemplate;

pub type EmbeddingSet = DescriptorSet;

pub const MAGIC: [u8; 4] = *b"EMB1";
const HEADER_LEN: usize = 12;
/// Offset in pixels of the logarithmic radial axis.
const LOG_POLAR_OFFSET: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingMode {
    File,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub mode: EmbeddingMode,
    pub synth_radius: f64,
    pub radial_bins: usize,
    pub angular_bins: usize,
    pub direction_bins: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dim: 256,
            mode: EmbeddingMode::Synthetic,
            synth_radius: 96.0,
            radial_bins: 4,
            angular_bins: 8,
            direction_bins: 8,
        }
    }
}

impl EmbeddingConfig {
    pub fn histogram_len(&self) -> usize {
        self.radial_bins * self.angular_bins * self.direction_bins
    }

    pub fn validate(&self) -> Result<()> {
        let bins_ok = self.radial_bins >= 1 && self.angular_bins >= 1 && self.direction_bins >= 1;
        if self.dim == 0 || !bins_ok || self.synth_radius <= 0.0 {
            return Err(Error::InvalidConfig(format!("bad embedding config {self:?}")));
        }
        if self.mode == EmbeddingMode::Synthetic && self.histogram_len() > self.dim {
            return Err(Error::InvalidConfig(format!(
                "synthetic histogram needs {} components but dim is {}",
                self.histogram_len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// Gaussian soft assignment of a continuous bin coordinate onto `weights`,
/// with std of half a bin. Circular axes wrap around.
fn soft_assign(coord: f64, circular: bool, weights: &mut [f64]) {
    let bins = weights.len() as f64;
    for (b, w) in weights.iter_mut().enumerate() {
        let mut d = (coord - (b as f64 + 0.5)).abs();
        if circular {
            d = d.min(bins - d);
        }
        *w = (-2.0 * d * d).exp();
    }
}

fn synthetic_vector(t: &MinutiaeTemplate, i: usize, cfg: &EmbeddingConfig) -> (Vec<f64>, bool) {
    let center = t.minutiae[i];
    let mut hist = vec![0.0; cfg.dim];
    let mut radial = vec![0.0; cfg.radial_bins];
    let mut angular = vec![0.0; cfg.angular_bins];
    let mut direction = vec![0.0; cfg.direction_bins];
    let log_extent = (1.0 + cfg.synth_radius / LOG_POLAR_OFFSET).ln();
    let mut found = false;

    for (j, m) in t.minutiae.iter().enumerate() {
        if j == i {
            continue;
        }
        let r = (m.x - center.x).hypot(m.y - center.y);
        if r > cfg.synth_radius {
            continue;
        }
        found = true;
        let bearing = if r == 0.0 {
            0.0
        } else {
            normalize_angle(ray_angle(center.x, center.y, m.x, m.y) - center.theta)
        };
        let turn = normalize_angle(wrap_signed(center.theta - m.theta));

        let rc = cfg.radial_bins as f64 * (1.0 + r / LOG_POLAR_OFFSET).ln() / log_extent;
        soft_assign(rc, false, &mut radial);
        soft_assign(bearing / TAU * cfg.angular_bins as f64, true, &mut angular);
        soft_assign(turn / TAU * cfg.direction_bins as f64, true, &mut direction);

        let mut idx = 0;
        for wr in &radial {
            for wa in &angular {
                let w = wr * wa;
                for wd in &direction {
                    hist[idx] += w * wd;
                    idx += 1;
                }
            }
        }
    }

    if !found {
        let mut e1 = vec![0.0; cfg.dim];
        e1[0] = 1.0;
        return (e1, false);
    }
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    hist.iter_mut().for_each(|v| *v /= norm);
    (hist, true)
}

pub fn build_synthetic_embeddings(t: &MinutiaeTemplate, cfg: &EmbeddingConfig) -> EmbeddingSet {
    build_synthetic_embeddings_with(t, cfg, Execution::default())
}

pub fn build_synthetic_embeddings_with(t: &MinutiaeTemplate, cfg: &EmbeddingConfig, exec: Execution) -> EmbeddingSet {
    assert!(
        cfg.histogram_len() <= cfg.dim,
        "synthetic embedding histogram does not fit in dim"
    );
    let rows = map_range(t.len(), exec, |i| synthetic_vector(t, i, cfg));
    let valid = rows.iter().map(|(_, ok)| *ok).collect();
    let data = rows.into_iter().flat_map(|(v, _)| v).collect();
    DescriptorSet::from_flat(t.id.clone(), cfg.dim, data, valid).expect("synthetic embeddings are finite")
}

pub fn save_embeddings(set: &DescriptorSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(set)).map_err(|e| Error::io(path, e))
}

pub fn encode(set: &DescriptorSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * set.as_flat().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(set.len() as u32).to_le_bytes());
    out.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    for &v in set.as_flat() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Loads an embedding file, checking its record count against the owning
/// template and renormalizing every vector to unit length.
pub fn load_embeddings(path: impl AsRef<Path>, expected_count: usize) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    decode(&bytes, expected_count, &id, path)
}

pub fn decode(bytes: &[u8], expected_count: usize, template_id: &str, path: &Path) -> Result<EmbeddingSet> {
    let truncated = |what: &str| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: format!("truncated embedding file: {what}"),
    };
    if bytes.len() < HEADER_LEN {
        return Err(truncated("header"));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
        });
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if count != expected_count {
        return Err(Error::CountMismatch {
            expected: expected_count,
            found: count,
        });
    }
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count * dim * 4 {
        return Err(truncated("payload length does not match count × dim"));
    }

    let mut data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: format!("embedding {} component {}", pos / dim, pos % dim),
            value: data[pos],
        });
    }
    if dim > 0 {
        for row in data.chunks_exact_mut(dim) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
    DescriptorSet::from_flat(template_id, dim, data, vec![true; count])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::Minutia;

    fn header(count: u32, dim: u32) -> Vec<u8> {
        let mut b = MAGIC.to_vec();
        b.extend_from_slice(&count.to_le_bytes());
        b.extend_from_slice(&dim.to_le_bytes());
        b
    }

    fn push(b: &mut Vec<u8>, vals: &[f32]) {
        for v in vals {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }

    #[test]
    fn decodes_and_normalizes() {
        let mut b = header(2, 4);
        push(&mut b, &[2.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let set = decode(&b, 2, "x", Path::new("x.emb")).unwrap();
        assert_eq!((set.len(), set.dim()), (2, 4));
        assert_eq!(set.vector(0), &[1.0, 0.0, 0.0, 0.0]);
        assert!(set.vector(1).iter().all(|&v| (v - 0.5).abs() < 1e-12));
        assert!(set.valid_mask().iter().all(|&v| v));
    }

    #[test]
    fn count_mismatch_names_both() {
        let mut b = header(3, 1);
        push(&mut b, &[1.0, 1.0, 1.0]);
        let err = decode(&b, 2, "x", Path::new("x.emb")).unwrap_err();
        assert!(matches!(err, Error::CountMismatch { expected: 2, found: 3 }));
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('3'));
    }

    #[test]
    fn bad_magic_and_non_finite() {
        let mut b = header(1, 1);
        b[0] = b'X';
        push(&mut b, &[1.0]);
        assert!(matches!(decode(&b, 1, "x", Path::new("x")), Err(Error::BadMagic { .. })));
        let mut b = header(1, 2);
        push(&mut b, &[1.0, f32::NAN]);
        assert!(matches!(decode(&b, 1, "x", Path::new("x")), Err(Error::NonFinite { .. })));
        assert!(matches!(decode(&b[..6], 1, "x", Path::new("x")), Err(Error::Parse { .. })));
    }

    #[test]
    fn lone_minutia_gets_sentinel() {
        let t = MinutiaeTemplate::new("one", vec![Minutia::new(5.0, 5.0, 0.0)]);
        let set = build_synthetic_embeddings(&t, &EmbeddingConfig::default());
        assert_eq!(set.vector(0)[0], 1.0);
        assert!(set.vector(0)[1..].iter().all(|&v| v == 0.0));
        assert!(!set.is_valid(0));
    }

    #[test]
    fn valid_embeddings_are_unit_norm() {
        let t = MinutiaeTemplate::new(
            "t",
            vec![
                Minutia::new(0.0, 0.0, 0.0),
                Minutia::new(30.0, 5.0, 1.0),
                Minutia::new(-20.0, 40.0, 3.0),
                Minutia::new(500.0, 500.0, 3.0),
            ],
        );
        let set = build_synthetic_embeddings(&t, &EmbeddingConfig::default());
        assert_eq!(set.valid_mask(), &[true, true, true, false]);
        for i in 0..3 {
            let n: f64 = set.vector(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oversized_histogram_rejected() {
        let cfg = EmbeddingConfig {
            dim: 100,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(EmbeddingConfig::default().validate().is_ok());
    }

    #[test]
    fn file_round_trip() {
        let t = MinutiaeTemplate::new(
            "rt",
            (0..12)
                .map(|k| Minutia::new(10.0 * k as f64, (k * k) as f64, 0.4 * k as f64))
                .collect(),
        );
        let set = build_synthetic_embeddings(&t, &EmbeddingConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.emb");
        save_embeddings(&set, &path).unwrap();
        let back = load_embeddings(&path, t.len()).unwrap();
        for (a, b) in set.as_flat().iter().zip(back.as_flat()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }
}
