//! 1:N identification against an enrolled gallery, rank-k accuracy and CMC
//! curves, and their CSV output.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::embedding::{EmbeddingConfig, EmbeddingSet};
use crate::error::{Error, Result};
use crate::fusion::{fuse_ranks, match_all, match_prepared, Channel, FusionConfig, MatchResult, PreparedTemplate};
use crate::mcc::CylinderConfig;
use crate::par::{map_slice, Execution};
use crate::template::MinutiaeTemplate;

#[derive(Debug, Clone, Default)]
pub struct Gallery {
    pub cylinders: CylinderConfig,
    pub embeddings: EmbeddingConfig,
    entries: Vec<PreparedTemplate>,
    index: HashMap<String, usize>,
}

impl Gallery {
    pub fn new(cylinders: CylinderConfig, embeddings: EmbeddingConfig) -> Self {
        Self {
            cylinders,
            embeddings,
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Builds descriptors for `template` with the gallery's configuration.
    pub fn prepare(&self, template: MinutiaeTemplate, embeddings: Option<EmbeddingSet>) -> Result<PreparedTemplate> {
        PreparedTemplate::new(template, &self.cylinders, &self.embeddings, embeddings)
    }

    pub fn enroll(&mut self, template: MinutiaeTemplate, embeddings: Option<EmbeddingSet>) -> Result<()> {
        if self.index.contains_key(&template.id) {
            return Err(Error::DuplicateId(template.id));
        }
        let prepared = self.prepare(template, embeddings)?;
        self.insert(prepared)
    }

    /// Enrolls an already prepared template. Descriptors must have been
    /// built with this gallery's configuration.
    pub fn insert(&mut self, prepared: PreparedTemplate) -> Result<()> {
        if self.index.contains_key(prepared.id()) {
            return Err(Error::DuplicateId(prepared.id().to_string()));
        }
        self.index.insert(prepared.id().to_string(), self.entries.len());
        self.entries.push(prepared);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PreparedTemplate> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[PreparedTemplate] {
        &self.entries
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub gallery_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult {
    pub query_id: String,
    pub matcher: Channel,
    /// Sorted by score descending, ties by gallery id ascending.
    pub candidates: Vec<Candidate>,
    /// 1-based position of the true mate, when known and enrolled.
    pub rank_of_mate: Option<usize>,
}

impl IdentificationResult {
    fn from_scores(query_id: &str, matcher: Channel, scores: Vec<MatchResult>, mate: Option<&str>) -> Self {
        let mut candidates: Vec<Candidate> = scores
            .into_iter()
            .map(|r| Candidate {
                gallery_id: r.gallery_id,
                score: r.score,
            })
            .collect();
        candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.gallery_id.cmp(&b.gallery_id)));
        let rank_of_mate = mate.and_then(|m| candidates.iter().position(|c| c.gallery_id == m).map(|p| p + 1));
        Self {
            query_id: query_id.to_string(),
            matcher,
            candidates,
            rank_of_mate,
        }
    }
}

pub fn identify(
    gallery: &Gallery,
    query: &PreparedTemplate,
    matcher: Channel,
    cfg: &FusionConfig,
    mate: Option<&str>,
) -> Result<IdentificationResult> {
    identify_with(gallery, query, matcher, cfg, mate, Execution::default())
}

pub fn identify_with(
    gallery: &Gallery,
    query: &PreparedTemplate,
    matcher: Channel,
    cfg: &FusionConfig,
    mate: Option<&str>,
    exec: Execution,
) -> Result<IdentificationResult> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let scores = map_slice(gallery.entries(), exec, |entry| match_prepared(query, entry, matcher, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(IdentificationResult::from_scores(query.id(), matcher, scores, mate))
}

/// One gallery scan producing the ranking of every matcher, in
/// [`Channel::ALL`] order. Equivalent to four [`identify`] calls.
pub fn identify_all(
    gallery: &Gallery,
    query: &PreparedTemplate,
    cfg: &FusionConfig,
    mate: Option<&str>,
    exec: Execution,
) -> Result<[IdentificationResult; 4]> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let per_candidate = map_slice(gallery.entries(), exec, |entry| match_all(query, entry, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut columns: [Vec<MatchResult>; 4] = Default::default();
    for row in per_candidate {
        for (col, r) in columns.iter_mut().zip(row) {
            col.push(r);
        }
    }
    let mut it = columns.into_iter().zip(Channel::ALL);
    Ok(std::array::from_fn(|_| {
        let (scores, channel) = it.next().unwrap();
        IdentificationResult::from_scores(query.id(), channel, scores, mate)
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmcCurve {
    /// `accuracies[k - 1]` is the fraction of queries whose mate ranks at or above `k`.
    pub accuracies: Vec<f64>,
}

impl CmcCurve {
    pub fn from_ranks(ranks: &[Option<usize>], k_max: usize) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::EmptyResults);
        }
        let total = ranks.len() as f64;
        let accuracies = (1..=k_max)
            .map(|k| ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count() as f64 / total)
            .collect();
        Ok(Self { accuracies })
    }

    /// Accuracy at rank `k` (1-based).
    pub fn at(&self, k: usize) -> f64 {
        self.accuracies[k - 1]
    }

    pub fn len(&self) -> usize {
        self.accuracies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accuracies.is_empty()
    }
}

/// Queries without an enrolled mate count as misses at every k.
pub fn cmc(results: &[IdentificationResult], k_max: usize) -> Result<CmcCurve> {
    let ranks: Vec<Option<usize>> = results.iter().map(|r| r.rank_of_mate).collect();
    CmcCurve::from_ranks(&ranks, k_max)
}

/// Per-query fused ranks (minimum over the two matchers), keyed by query id.
pub fn fused_ranks(
    results_mcc: &[IdentificationResult],
    results_emb: &[IdentificationResult],
) -> Result<BTreeMap<String, Option<usize>>> {
    let to_map = |rs: &[IdentificationResult]| -> BTreeMap<String, usize> {
        rs.iter()
            .map(|r| (r.query_id.clone(), r.rank_of_mate.unwrap_or(usize::MAX)))
            .collect()
    };
    let fused = fuse_ranks(&to_map(results_mcc), &to_map(results_emb))?;
    Ok(fused.into_iter().map(|(q, r)| (q, (r != usize::MAX).then_some(r))).collect())
}

pub fn rank_level_cmc(
    results_mcc: &[IdentificationResult],
    results_emb: &[IdentificationResult],
    k_max: usize,
) -> Result<CmcCurve> {
    let fused = fused_ranks(results_mcc, results_emb)?;
    CmcCurve::from_ranks(&fused.into_values().collect::<Vec<_>>(), k_max)
}

pub fn results_csv(results: &[IdentificationResult]) -> String {
    let mut out = String::from("query_id,rank,gallery_id,score,channel\n");
    for r in results {
        for (pos, c) in r.candidates.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{:.6},{}",
                r.query_id,
                pos + 1,
                c.gallery_id,
                c.score,
                r.matcher
            )
            .unwrap();
        }
    }
    out
}

pub fn cmc_csv(curve: &CmcCurve) -> String {
    let mut out = String::from("k,accuracy\n");
    for (k, a) in curve.accuracies.iter().enumerate() {
        writeln!(out, "{},{:.6}", k + 1, a).unwrap();
    }
    out
}

pub fn write_results(results: &[IdentificationResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, results_csv(results)).map_err(|e| Error::io(path, e))
}

pub fn write_cmc(curve: &CmcCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, cmc_csv(curve)).map_err(|e| Error::io(path, e))
}
