use crate::error::{Error, Result};

/// Fixed-length per-minutia descriptors of one template.
///
/// MCC cylinders and minutia embeddings share this container so that the
/// pairing stage treats both channels identically. Vectors are stored
/// row-major, one row per minutia in template order.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub template_id: String,
    dim: usize,
    data: Vec<f64>,
    valid: Vec<bool>,
    norms: Vec<f64>,
}

impl DescriptorSet {
    pub fn new(template_id: impl Into<String>, dim: usize, vectors: Vec<Vec<f64>>, valid: Vec<bool>) -> Result<Self> {
        if vectors.len() != valid.len() {
            return Err(Error::CountMismatch {
                expected: vectors.len(),
                found: valid.len(),
            });
        }
        let mut data = Vec::with_capacity(vectors.len() * dim);
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: v.len(),
                });
            }
            data.extend_from_slice(v);
        }
        Self::from_flat(template_id, dim, data, valid)
    }

    pub fn from_flat(template_id: impl Into<String>, dim: usize, data: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if data.len() != dim * valid.len() {
            return Err(Error::DimensionMismatch {
                left: dim * valid.len(),
                right: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("descriptor {} component {}", pos / dim.max(1), pos % dim.max(1)),
                value: data[pos],
            });
        }
        let norms = if dim == 0 {
            vec![0.0; valid.len()]
        } else {
            data.chunks_exact(dim).map(|v| dot(v, v).sqrt()).collect()
        };
        // a zero vector can never take part in a cosine comparison
        let valid = valid.iter().zip(&norms).map(|(&ok, &n)| ok && n > 0.0).collect();
        Ok(Self {
            template_id: template_id.into(),
            dim,
            data,
            valid,
            norms,
        })
    }

    pub fn empty(template_id: impl Into<String>, dim: usize) -> Self {
        Self {
            template_id: template_id.into(),
            dim,
            data: Vec::new(),
            valid: Vec::new(),
            norms: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.len()).map(move |i| self.vector(i))
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub(crate) fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Same vectors with every entry marked invalid.
    pub fn all_invalid(&self) -> Self {
        Self {
            valid: vec![false; self.len()],
            ..self.clone()
        }
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes.
/// The summation order is fixed, so results are reproducible.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}
