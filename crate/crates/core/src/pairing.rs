//! Angle-gated cosine similarity matrices and greedy local similarity
//! assignment (LSA).

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::descriptor::{dot, DescriptorSet};
use crate::error::{Error, Result};
use crate::geometry::angular_difference;
use crate::par::{map_range, Execution};
use crate::template::MinutiaeTemplate;

/// Upper bound on pairs selected by LSA.
pub const MAX_SELECTED_PAIRS: usize = 12;
/// Upper bound on pairs contributing to the final score.
pub const MAX_SCORED_PAIRS: usize = 8;

/// Entry excluded by the angle gate or by an invalid descriptor. Sorts below
/// every real cosine, so negative similarities stay selectable.
pub const GATED: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn gated(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![GATED; rows * cols],
        }
    }

    /// Builds a matrix from explicit entries; `None` marks a gated entry.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged similarity matrix");
        Self {
            rows: rows.len(),
            cols,
            values: rows.iter().flatten().map(|v| v.unwrap_or(GATED)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values[row * self.cols + col];
        (v != GATED).then_some(v)
    }

    pub fn is_gated(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_none()
    }

    pub fn set(&mut self, row: usize, col: usize, value: Option<f64>) {
        self.values[row * self.cols + col] = value.unwrap_or(GATED);
    }

    pub fn open_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != GATED).count()
    }

    /// Debug dump, one `row,col,value|GATED` line per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for r in 0..self.rows {
            for c in 0..self.cols {
                match self.get(r, c) {
                    Some(v) => writeln!(out, "{r},{c},{v:.6}"),
                    None => writeln!(out, "{r},{c},GATED"),
                }
                .unwrap();
            }
        }
        out
    }
}

/// Which descriptor channel proposed a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairSource {
    Mcc,
    Emb,
    /// Proposed by both channels, or drawn from a fused matrix.
    Both,
}

impl PairSource {
    pub fn merge(self, other: PairSource) -> PairSource {
        if self == other {
            self
        } else {
            PairSource::Both
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub row: usize,
    pub col: usize,
    /// Local similarity γ⁰.
    pub score: f64,
    pub source: PairSource,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairSet {
    pub pairs: Vec<Pair>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pair> {
        self.pairs.iter()
    }
}

pub fn cosine_similarity(v1: &[f64], v2: &[f64]) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(Error::DimensionMismatch {
            left: v1.len(),
            right: v2.len(),
        });
    }
    let n1 = dot(v1, v1).sqrt();
    let n2 = dot(v2, v2).sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(v1, v2) / (n1 * n2)).clamp(-1.0, 1.0))
}

/// Local similarity matrix between two descriptor sets.
///
/// When both templates are supplied an entry is kept only if the two
/// minutia directions differ by at most `delta_theta`; without templates
/// every pair passes the gate. Invalid descriptors gate their whole row or
/// column.
pub fn sim_score(
    a: &DescriptorSet,
    b: &DescriptorSet,
    templates: Option<(&MinutiaeTemplate, &MinutiaeTemplate)>,
    delta_theta: f64,
) -> Result<SimilarityMatrix> {
    sim_score_with(a, b, templates, delta_theta, Execution::default())
}

pub fn sim_score_with(
    a: &DescriptorSet,
    b: &DescriptorSet,
    templates: Option<(&MinutiaeTemplate, &MinutiaeTemplate)>,
    delta_theta: f64,
    exec: Execution,
) -> Result<SimilarityMatrix> {
    if let Some((ta, tb)) = templates {
        for (set, t) in [(a, ta), (b, tb)] {
            if set.len() != t.len() {
                return Err(Error::CountMismatch {
                    expected: t.len(),
                    found: set.len(),
                });
            }
        }
    }
    if a.dim() != b.dim() && !a.is_empty() && !b.is_empty() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }

    let (rows, cols) = (a.len(), b.len());
    let row_values = map_range(rows, exec, |i| {
        let mut out = vec![GATED; cols];
        if !a.is_valid(i) {
            return out;
        }
        let (va, na) = (a.vector(i), a.norm(i));
        for (j, slot) in out.iter_mut().enumerate() {
            if !b.is_valid(j) {
                continue;
            }
            if let Some((ta, tb)) = templates {
                if angular_difference(ta.minutiae[i].theta, tb.minutiae[j].theta) > delta_theta {
                    continue;
                }
            }
            *slot = (dot(va, b.vector(j)) / (na * b.norm(j))).clamp(-1.0, 1.0);
        }
        out
    });

    Ok(SimilarityMatrix {
        rows,
        cols,
        values: row_values.into_iter().flatten().collect(),
    })
}

/// Descending score, then ascending row, then ascending column.
pub(crate) fn selection_order(a: (f64, usize, usize), b: (f64, usize, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// Greedy local similarity assignment.
///
/// Repeatedly takes the highest open entry whose row and column are both
/// unused, until `n_r` pairs are chosen or nothing eligible remains. Ties go
/// to the smaller row, then the smaller column. This is deliberately not an
/// optimal assignment.
pub fn lsa_select(s: &SimilarityMatrix, n_r: usize, source: PairSource) -> PairSet {
    let mut pairs = Vec::with_capacity(n_r);
    if n_r == 0 {
        return PairSet { pairs };
    }
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(s.open_count());
    for r in 0..s.rows {
        for c in 0..s.cols {
            if let Some(v) = s.get(r, c) {
                entries.push((v, r, c));
            }
        }
    }
    // eligibility only shrinks, so one pass over the sorted entries
    // reproduces the repeated global-max scan
    entries.sort_unstable_by(|x, y| selection_order(*x, *y));

    let mut row_used = vec![false; s.rows];
    let mut col_used = vec![false; s.cols];
    for (score, row, col) in entries {
        if row_used[row] || col_used[col] {
            continue;
        }
        row_used[row] = true;
        col_used[col] = true;
        pairs.push(Pair { row, col, score, source });
        if pairs.len() == n_r {
            break;
        }
    }
    PairSet { pairs }
}

pub fn compute_n_r(len_a: usize, len_b: usize) -> usize {
    MAX_SELECTED_PAIRS.min(len_a.min(len_b))
}

pub fn compute_n_p(len_a: usize, len_b: usize) -> usize {
    MAX_SCORED_PAIRS.min(len_a.min(len_b))
}
