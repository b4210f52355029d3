//! Local similarity sort with relaxation (LSS-R).
//!
//! Each candidate pair `t` starts from its local similarity γ⁰ and is
//! repeatedly pulled towards the compatibility-weighted mean of the other
//! pairs:
//!
//! ```text
//! γᵢ(t) = w_R·γᵢ₋₁(t) + (1 − w_R)·Σ_{k≠t} ρ(t,k)·γᵢ₋₁(k) / (n − 1)
//! ```
//!
//! ρ(t,k) is a product of three decreasing sigmoids over the discrepancy in
//! pairwise distance, direction difference and radial angle between the two
//! pairs. Pairs consistent with a common rigid motion keep their scores;
//! outliers decay.

use crate::error::{Error, Result};
use crate::geometry::{angular_difference, direction_difference, euclidean_distance, radial_angle};
use crate::pairing::{selection_order, PairSet, PairSource};
use crate::template::{Minutia, MinutiaeTemplate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationParams {
    /// Weight kept on a pair's own previous score.
    pub w_r: f64,
    /// Number of relaxation iterations.
    pub n_rel: usize,
    /// Sigmoid centres for the distance, direction and radial terms.
    pub mu: [f64; 3],
    /// Sigmoid slopes; negative so compatibility falls as discrepancy grows.
    pub tau: [f64; 3],
    /// Pixels per unit of the distance discrepancy fed to the first sigmoid.
    pub distance_scale: f64,
}

impl Default for RelaxationParams {
    #[allow(clippy::approx_constant)]
    fn default() -> Self {
        Self {
            w_r: 0.5,
            n_rel: 5,
            mu: [0.0416, 0.7853, 0.2094],
            tau: [-30.0, -9.0, -16.8],
            distance_scale: 100.0,
        }
    }
}

impl RelaxationParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w_r) || self.distance_scale <= 0.0 {
            return Err(Error::InvalidConfig(format!("bad relaxation params {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxedPair {
    pub row: usize,
    pub col: usize,
    pub initial: f64,
    pub relaxed: f64,
    pub source: PairSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedPairs {
    pub pairs: Vec<RelaxedPair>,
    /// Row-major `n × n` compatibility matrix; the diagonal is unused.
    pub compatibility: Vec<f64>,
}

/// Product of the three sigmoids for already-computed discrepancies
/// `[d1 / distance_scale, d2, d3]`.
pub fn compatibility_from_discrepancies(d: [f64; 3], params: &RelaxationParams) -> f64 {
    (0..3)
        .map(|i| 1.0 / (1.0 + (-params.tau[i] * (d[i] - params.mu[i])).exp()))
        .product()
}

/// Geometric compatibility of pair `t = (a_t, b_t)` with pair `k = (a_k, b_k)`,
/// where the `a_*` minutiae come from one template and the `b_*` from the other.
pub fn pair_compatibility(t: (&Minutia, &Minutia), k: (&Minutia, &Minutia), params: &RelaxationParams) -> f64 {
    let (a_t, b_t) = t;
    let (a_k, b_k) = k;
    let d1 = (euclidean_distance(a_t, a_k) - euclidean_distance(b_t, b_k)).abs() / params.distance_scale;
    let d2 = angular_difference(direction_difference(a_t, a_k), direction_difference(b_t, b_k));
    let d3 = angular_difference(radial_angle(a_t, a_k), radial_angle(b_t, b_k));
    compatibility_from_discrepancies([d1, d2, d3], params)
}

/// Runs the synchronous relaxation update and returns every iterate,
/// `γ⁰` first. `rho` is row-major `n × n`; its diagonal is ignored.
pub fn relax_scores(initial: &[f64], rho: &[f64], w_r: f64, n_rel: usize) -> Vec<Vec<f64>> {
    let n = initial.len();
    assert_eq!(rho.len(), n * n, "compatibility matrix must be n × n");
    let mut trajectory = Vec::with_capacity(n_rel + 1);
    trajectory.push(initial.to_vec());
    if n < 2 {
        trajectory.extend(std::iter::repeat_n(initial.to_vec(), n_rel));
        return trajectory;
    }
    let denom = (n - 1) as f64;
    for _ in 0..n_rel {
        let prev = trajectory.last().unwrap();
        let next = (0..n)
            .map(|t| {
                let row = &rho[t * n..(t + 1) * n];
                let support: f64 = (0..n).filter(|&k| k != t).map(|k| row[k] * prev[k]).sum();
                w_r * prev[t] + (1.0 - w_r) * support / denom
            })
            .collect();
        trajectory.push(next);
    }
    trajectory
}

/// Row-major `n × n` matrix of ρ(t, k). The radial term measures each
/// radial angle from the first pair's minutia, so ρ is not symmetric in
/// general and every off-diagonal entry is evaluated.
pub fn compatibility_matrix(
    pairs: &PairSet,
    ta: &MinutiaeTemplate,
    tb: &MinutiaeTemplate,
    params: &RelaxationParams,
) -> Vec<f64> {
    let n = pairs.len();
    let mut rho = vec![0.0; n * n];
    for (t, pt) in pairs.iter().enumerate() {
        let (a_t, b_t) = (&ta.minutiae[pt.row], &tb.minutiae[pt.col]);
        for (k, pk) in pairs.iter().enumerate() {
            if k != t {
                rho[t * n + k] = pair_compatibility((a_t, b_t), (&ta.minutiae[pk.row], &tb.minutiae[pk.col]), params);
            }
        }
    }
    rho
}

pub fn relax(pairs: &PairSet, ta: &MinutiaeTemplate, tb: &MinutiaeTemplate, params: &RelaxationParams) -> Result<RelaxedPairs> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    for p in pairs.iter() {
        if p.row >= ta.len() || p.col >= tb.len() {
            return Err(Error::IndexOutOfRange {
                index: p.row.max(p.col),
                len: if p.row >= ta.len() { ta.len() } else { tb.len() },
            });
        }
    }
    let rho = compatibility_matrix(pairs, ta, tb, params);
    let initial: Vec<f64> = pairs.iter().map(|p| p.score).collect();
    let last = relax_scores(&initial, &rho, params.w_r, params.n_rel).pop().unwrap();
    Ok(RelaxedPairs {
        pairs: pairs
            .iter()
            .zip(last)
            .map(|(p, relaxed)| RelaxedPair {
                row: p.row,
                col: p.col,
                initial: p.score,
                relaxed,
                source: p.source,
            })
            .collect(),
        compatibility: rho,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    /// Clamped sum of the top relaxed values divided by `n_p`.
    pub score: f64,
    /// The same sum before dividing.
    pub raw_sum: f64,
    pub top_pairs: Vec<RelaxedPair>,
}

impl ScoreSummary {
    pub fn zero() -> Self {
        Self {
            score: 0.0,
            raw_sum: 0.0,
            top_pairs: Vec::new(),
        }
    }
}

/// Averages the `n_p` best relaxed scores (negatives count as 0). Dividing
/// by `n_p` rather than by the number of available pairs keeps scores from
/// small overlaps below those of fully supported matches.
pub fn match_score(relaxed: &RelaxedPairs, n_p: usize) -> ScoreSummary {
    if n_p == 0 || relaxed.pairs.is_empty() {
        return ScoreSummary::zero();
    }
    let mut sorted = relaxed.pairs.clone();
    sorted.sort_by(|x, y| selection_order((x.relaxed, x.row, x.col), (y.relaxed, y.row, y.col)));
    sorted.truncate(n_p);
    let raw_sum: f64 = sorted.iter().map(|p| p.relaxed.max(0.0)).sum();
    ScoreSummary {
        score: raw_sum / n_p as f64,
        raw_sum,
        top_pairs: sorted,
    }
}
