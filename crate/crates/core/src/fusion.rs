//! Single-channel matching and the three ways of combining the MCC and
//! embedding channels: pair-set union before relaxation (feature level),
//! weighted similarity matrices (score level) and minimum rank (rank level).

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use crate::descriptor::DescriptorSet;
use crate::embedding::{build_synthetic_embeddings, EmbeddingConfig, EmbeddingSet};
use crate::error::{Error, Result};
use crate::mcc::{build_mcc_set, CylinderConfig};
use crate::pairing::{compute_n_p, compute_n_r, lsa_select, sim_score, PairSet, PairSource, SimilarityMatrix};
use crate::relaxation::{match_score, relax, RelaxationParams, RelaxedPair, ScoreSummary};
use crate::template::MinutiaeTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Mcc,
    Emb,
    FeatureFusion,
    ScoreFusion,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Mcc, Channel::Emb, Channel::FeatureFusion, Channel::ScoreFusion];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Mcc => "mcc",
            Channel::Emb => "emb",
            Channel::FeatureFusion => "feature",
            Channel::ScoreFusion => "score",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown matcher {s:?} (expected mcc|emb|feature|score)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub query_id: String,
    pub gallery_id: String,
    pub score: f64,
    pub raw_sum: f64,
    pub n_pairs_used: usize,
    pub channel: Channel,
    pub top_pairs: Vec<RelaxedPair>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Weight of the MCC matrix in score-level fusion.
    pub w1: f64,
    /// Weight of the embedding matrix in score-level fusion.
    pub w2: f64,
    /// Largest direction difference allowed by the angle gate.
    pub delta_theta: f64,
    pub gate_mcc: bool,
    pub gate_emb: bool,
    pub relaxation: RelaxationParams,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            w1: 0.5,
            w2: 0.5,
            delta_theta: FRAC_PI_4,
            gate_mcc: true,
            gate_emb: false,
            relaxation: RelaxationParams::default(),
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.w1) || !unit.contains(&self.w2) || self.w1 + self.w2 <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "fusion weights must lie in [0, 1] with a positive sum, got w1={} w2={}",
                self.w1, self.w2
            )));
        }
        if self.delta_theta.is_nan() || self.delta_theta < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "delta_theta must be >= 0, got {}",
                self.delta_theta
            )));
        }
        self.relaxation.validate()
    }
}

/// A template with both descriptor channels built.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTemplate {
    pub template: MinutiaeTemplate,
    pub mcc: DescriptorSet,
    pub emb: EmbeddingSet,
}

impl PreparedTemplate {
    /// Builds cylinders, and synthetic embeddings unless `embeddings` is given.
    pub fn new(
        template: MinutiaeTemplate,
        cylinders: &CylinderConfig,
        emb_cfg: &EmbeddingConfig,
        embeddings: Option<EmbeddingSet>,
    ) -> Result<Self> {
        let mcc = build_mcc_set(&template, cylinders);
        let emb = match embeddings {
            Some(e) => {
                if e.len() != template.len() {
                    return Err(Error::CountMismatch {
                        expected: template.len(),
                        found: e.len(),
                    });
                }
                e
            }
            None => build_synthetic_embeddings(&template, emb_cfg),
        };
        Ok(Self { template, mcc, emb })
    }

    pub fn id(&self) -> &str {
        &self.template.id
    }
}

fn check_counts(t: &MinutiaeTemplate, d: &DescriptorSet) -> Result<()> {
    if t.len() != d.len() {
        return Err(Error::CountMismatch {
            expected: t.len(),
            found: d.len(),
        });
    }
    Ok(())
}

fn result(ta: &MinutiaeTemplate, tb: &MinutiaeTemplate, channel: Channel, summary: ScoreSummary) -> MatchResult {
    MatchResult {
        query_id: ta.id.clone(),
        gallery_id: tb.id.clone(),
        score: summary.score,
        raw_sum: summary.raw_sum,
        n_pairs_used: summary.top_pairs.len(),
        channel,
        top_pairs: summary.top_pairs,
    }
}

/// Relaxes a candidate pair list and scores the best `n_p` pairs.
///
/// The list is canonically ordered by (row, col) first, so every matcher
/// feeds the relaxation identically regardless of how the pairs were found.
pub fn consolidate(
    mut pairs: PairSet,
    ta: &MinutiaeTemplate,
    tb: &MinutiaeTemplate,
    params: &RelaxationParams,
) -> Result<ScoreSummary> {
    if pairs.is_empty() {
        return Ok(ScoreSummary::zero());
    }
    pairs.pairs.sort_by_key(|p| (p.row, p.col));
    let relaxed = relax(&pairs, ta, tb, params)?;
    Ok(match_score(&relaxed, compute_n_p(ta.len(), tb.len())))
}

fn match_matrix(
    ta: &MinutiaeTemplate,
    tb: &MinutiaeTemplate,
    s: &SimilarityMatrix,
    source: PairSource,
    channel: Channel,
    cfg: &FusionConfig,
) -> Result<MatchResult> {
    let pairs = lsa_select(s, compute_n_r(ta.len(), tb.len()), source);
    Ok(result(ta, tb, channel, consolidate(pairs, ta, tb, &cfg.relaxation)?))
}

fn channel_matrix(
    ta: &MinutiaeTemplate,
    tb: &MinutiaeTemplate,
    da: &DescriptorSet,
    db: &DescriptorSet,
    gate: bool,
    cfg: &FusionConfig,
) -> Result<SimilarityMatrix> {
    check_counts(ta, da)?;
    check_counts(tb, db)?;
    sim_score(da, db, gate.then_some((ta, tb)), cfg.delta_theta)
}

/// One descriptor channel end to end: similarity matrix, LSA, relaxation,
/// score. `channel` only labels the result.
pub fn match_single(
    ta: &MinutiaeTemplate,
    tb: &MinutiaeTemplate,
    da: &DescriptorSet,
    db: &DescriptorSet,
    gate_with_templates: bool,
    cfg: &FusionConfig,
    channel: Channel,
) -> Result<MatchResult> {
    let s = channel_matrix(ta, tb, da, db, gate_with_templates, cfg)?;
    let source = if channel == Channel::Emb {
        PairSource::Emb
    } else {
        PairSource::Mcc
    };
    match_matrix(ta, tb, &s, source, channel, cfg)
}

/// Union of two pair lists. A (row, col) proposed by both keeps the larger
/// local score and is tagged with both sources. Output is sorted by (row, col).
pub fn union_pairs(first: &PairSet, second: &PairSet) -> PairSet {
    let mut merged: BTreeMap<(usize, usize), crate::pairing::Pair> = BTreeMap::new();
    for p in first.iter().chain(second.iter()) {
        merged
            .entry((p.row, p.col))
            .and_modify(|q| {
                q.score = q.score.max(p.score);
                q.source = q.source.merge(p.source);
            })
            .or_insert(*p);
    }
    PairSet {
        pairs: merged.into_values().collect(),
    }
}

/// Weighted sum of two similarity matrices. A gated entry contributes 0 from
/// its channel; the fused entry is gated only when every channel with a
/// positive weight gates it.
pub fn fuse_matrices(mcc: &SimilarityMatrix, emb: &SimilarityMatrix, w1: f64, w2: f64) -> SimilarityMatrix {
    assert_eq!((mcc.rows(), mcc.cols()), (emb.rows(), emb.cols()), "matrix shapes differ");
    let mut out = SimilarityMatrix::gated(mcc.rows(), mcc.cols());
    for r in 0..mcc.rows() {
        for c in 0..mcc.cols() {
            let m = mcc.get(r, c).filter(|_| w1 > 0.0);
            let e = emb.get(r, c).filter(|_| w2 > 0.0);
            if m.is_none() && e.is_none() {
                continue;
            }
            out.set(r, c, Some(w1 * m.unwrap_or(0.0) + w2 * e.unwrap_or(0.0)));
        }
    }
    out
}

/// The two channel matrices of one template comparison, computed once and
/// shared by every matcher.
#[derive(Debug, Clone)]
pub struct ChannelMatrices {
    pub mcc: SimilarityMatrix,
    pub emb: SimilarityMatrix,
}

impl ChannelMatrices {
    pub fn compute(a: &PreparedTemplate, b: &PreparedTemplate, cfg: &FusionConfig) -> Result<Self> {
        let (ta, tb) = (&a.template, &b.template);
        Ok(Self {
            mcc: channel_matrix(ta, tb, &a.mcc, &b.mcc, cfg.gate_mcc, cfg)?,
            emb: channel_matrix(ta, tb, &a.emb, &b.emb, cfg.gate_emb, cfg)?,
        })
    }

    pub fn score(
        &self,
        ta: &MinutiaeTemplate,
        tb: &MinutiaeTemplate,
        channel: Channel,
        cfg: &FusionConfig,
    ) -> Result<MatchResult> {
        match channel {
            Channel::Mcc => match_matrix(ta, tb, &self.mcc, PairSource::Mcc, channel, cfg),
            Channel::Emb => match_matrix(ta, tb, &self.emb, PairSource::Emb, channel, cfg),
            Channel::FeatureFusion => {
                let n_r = compute_n_r(ta.len(), tb.len());
                let pairs = union_pairs(
                    &lsa_select(&self.mcc, n_r, PairSource::Mcc),
                    &lsa_select(&self.emb, n_r, PairSource::Emb),
                );
                Ok(result(ta, tb, channel, consolidate(pairs, ta, tb, &cfg.relaxation)?))
            }
            Channel::ScoreFusion => {
                let fused = fuse_matrices(&self.mcc, &self.emb, cfg.w1, cfg.w2);
                match_matrix(ta, tb, &fused, PairSource::Both, channel, cfg)
            }
        }
    }
}

/// Scores `query` against `candidate` with the chosen matcher.
pub fn match_prepared(
    query: &PreparedTemplate,
    candidate: &PreparedTemplate,
    channel: Channel,
    cfg: &FusionConfig,
) -> Result<MatchResult> {
    let (ta, tb) = (&query.template, &candidate.template);
    match channel {
        Channel::Mcc => match_single(ta, tb, &query.mcc, &candidate.mcc, cfg.gate_mcc, cfg, channel),
        Channel::Emb => match_single(ta, tb, &query.emb, &candidate.emb, cfg.gate_emb, cfg, channel),
        _ => ChannelMatrices::compute(query, candidate, cfg)?.score(ta, tb, channel, cfg),
    }
}

/// All four matchers from a single pair of similarity matrices, in
/// [`Channel::ALL`] order.
pub fn match_all(query: &PreparedTemplate, candidate: &PreparedTemplate, cfg: &FusionConfig) -> Result<[MatchResult; 4]> {
    let m = ChannelMatrices::compute(query, candidate, cfg)?;
    let (ta, tb) = (&query.template, &candidate.template);
    Ok([
        m.score(ta, tb, Channel::Mcc, cfg)?,
        m.score(ta, tb, Channel::Emb, cfg)?,
        m.score(ta, tb, Channel::FeatureFusion, cfg)?,
        m.score(ta, tb, Channel::ScoreFusion, cfg)?,
    ])
}

#[allow(clippy::too_many_arguments)]
pub fn match_feature_fusion(
    ta: &MinutiaeTemplate,
    tb: &MinutiaeTemplate,
    mcc_a: &DescriptorSet,
    mcc_b: &DescriptorSet,
    emb_a: &DescriptorSet,
    emb_b: &DescriptorSet,
    cfg: &FusionConfig,
) -> Result<MatchResult> {
    let m = ChannelMatrices {
        mcc: channel_matrix(ta, tb, mcc_a, mcc_b, cfg.gate_mcc, cfg)?,
        emb: channel_matrix(ta, tb, emb_a, emb_b, cfg.gate_emb, cfg)?,
    };
    m.score(ta, tb, Channel::FeatureFusion, cfg)
}

#[allow(clippy::too_many_arguments)]
pub fn match_score_fusion(
    ta: &MinutiaeTemplate,
    tb: &MinutiaeTemplate,
    mcc_a: &DescriptorSet,
    mcc_b: &DescriptorSet,
    emb_a: &DescriptorSet,
    emb_b: &DescriptorSet,
    cfg: &FusionConfig,
) -> Result<MatchResult> {
    let m = ChannelMatrices {
        mcc: channel_matrix(ta, tb, mcc_a, mcc_b, cfg.gate_mcc, cfg)?,
        emb: channel_matrix(ta, tb, emb_a, emb_b, cfg.gate_emb, cfg)?,
    };
    m.score(ta, tb, Channel::ScoreFusion, cfg)
}

/// Per query, the better (smaller) of the two ranks.
pub fn fuse_ranks(ranks_mcc: &BTreeMap<String, usize>, ranks_emb: &BTreeMap<String, usize>) -> Result<BTreeMap<String, usize>> {
    if let Some(q) = ranks_emb.keys().find(|q| !ranks_mcc.contains_key(*q)) {
        return Err(Error::MissingQuery(q.clone()));
    }
    ranks_mcc
        .iter()
        .map(|(q, &r)| {
            let other = ranks_emb.get(q).ok_or_else(|| Error::MissingQuery(q.clone()))?;
            Ok((q.clone(), r.min(*other)))
        })
        .collect()
}
