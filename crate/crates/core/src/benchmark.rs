//! End-to-end synthetic identification benchmark: generate a gallery and
//! latent queries, rank every query with each matcher, and emit per-matcher
//! results, CMC curves and a rank-1/5/10 summary table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{cmc, identify_all, rank_level_cmc, write_cmc, write_results, CmcCurve, Gallery, IdentificationResult};
use crate::fusion::Channel;
use crate::par::Execution;
use crate::synth::SyntheticDataset;

/// Ranks reported in the summary table.
pub const SUMMARY_RANKS: [usize; 3] = [1, 5, 10];

/// Name of the rank-level fusion row.
pub const RANK_FUSION: &str = "rank";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    /// Rows in table order: mcc, emb, rank, score, feature.
    pub rows: Vec<(String, CmcCurve)>,
    pub results: Vec<(Channel, Vec<IdentificationResult>)>,
}

impl BenchmarkReport {
    pub fn curve(&self, name: &str) -> Option<&CmcCurve> {
        self.rows.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("matcher");
        for k in SUMMARY_RANKS {
            write!(out, ",rank{k}").unwrap();
        }
        out.push('\n');
        for (name, curve) in &self.rows {
            out.push_str(name);
            for k in SUMMARY_RANKS {
                let acc = curve
                    .accuracies
                    .get(k - 1)
                    .or(curve.accuracies.last())
                    .copied()
                    .unwrap_or(0.0);
                write!(out, ",{:.6}", 100.0 * acc).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every matcher over `dataset`. Queries are scanned one at a time;
/// each scan is candidate-parallel under `exec`.
pub fn evaluate(dataset: &SyntheticDataset, cfg: &RunConfig, exec: Execution) -> Result<BenchmarkReport> {
    let mut gallery = Gallery::new(cfg.cylinders, cfg.embeddings);
    for t in &dataset.gallery {
        gallery.enroll(t.clone(), None)?;
    }
    let mut per_channel: [Vec<IdentificationResult>; 4] = Default::default();
    for ((qid, mate), sample) in dataset.truth().into_iter().zip(&dataset.queries) {
        let query = gallery.prepare(sample.template.clone(), None)?;
        debug_assert_eq!(query.id(), qid);
        let ranked = identify_all(&gallery, &query, &cfg.fusion, Some(&mate), exec)?;
        for (acc, r) in per_channel.iter_mut().zip(ranked) {
            acc.push(r);
        }
    }

    let depth = cfg.cmc_depth;
    let [mcc, emb, feature, score] = per_channel;
    let rows = vec![
        (Channel::Mcc.to_string(), cmc(&mcc, depth)?),
        (Channel::Emb.to_string(), cmc(&emb, depth)?),
        (RANK_FUSION.to_string(), rank_level_cmc(&mcc, &emb, depth)?),
        (Channel::ScoreFusion.to_string(), cmc(&score, depth)?),
        (Channel::FeatureFusion.to_string(), cmc(&feature, depth)?),
    ];
    Ok(BenchmarkReport {
        rows,
        results: vec![
            (Channel::Mcc, mcc),
            (Channel::Emb, emb),
            (Channel::FeatureFusion, feature),
            (Channel::ScoreFusion, score),
        ],
    })
}

/// Generates the dataset, evaluates it and writes everything under `out`:
/// `data/` (templates and truth), `results_<matcher>.csv`,
/// `cmc_<matcher>.csv` and `summary.csv`.
pub fn run_benchmark(cfg: &RunConfig, out: impl AsRef<Path>, exec: Execution) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let out = out.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let dataset = SyntheticDataset::generate(&cfg.synth, &cfg.perturb, exec)?;
    dataset.write(out.join("data"))?;
    let report = evaluate(&dataset, cfg, exec)?;
    for (channel, results) in &report.results {
        write_results(results, out.join(format!("results_{channel}.csv")))?;
    }
    for (name, curve) in &report.rows {
        write_cmc(curve, out.join(format!("cmc_{name}.csv")))?;
    }
    let summary = out.join("summary.csv");
    fs::write(&summary, report.summary_csv()).map_err(|e| Error::io(&summary, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        let mut cfg = RunConfig::new();
        cfg.synth.n_fingers = 8;
        cfg.cmc_depth = 10;
        cfg
    }

    #[test]
    fn writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_benchmark(&tiny(), dir.path(), Execution::default()).unwrap();
        assert_eq!(report.rows.len(), 5);
        for name in ["mcc", "emb", "feature", "score"] {
            assert!(dir.path().join(format!("results_{name}.csv")).exists());
        }
        for name in ["mcc", "emb", "rank", "feature", "score"] {
            assert!(dir.path().join(format!("cmc_{name}.csv")).exists());
        }
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        let lines: Vec<&str> = summary.lines().collect();
        assert_eq!(lines[0], "matcher,rank1,rank5,rank10");
        assert_eq!(lines.len(), 6);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
        assert!(dir.path().join("data/truth.csv").exists());
    }

    #[test]
    fn rank_fusion_dominates() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_benchmark(&tiny(), dir.path(), Execution::Sequential).unwrap();
        let fused = report.curve("rank").unwrap();
        for single in ["mcc", "emb"] {
            let c = report.curve(single).unwrap();
            assert!(fused.accuracies.iter().zip(&c.accuracies).all(|(f, s)| f >= s));
        }
    }
}
