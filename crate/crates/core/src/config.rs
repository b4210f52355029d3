//! Flat `key=value` run configuration covering every tunable of the
//! pipeline. Files hold one assignment per line; `#` starts a comment.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::embedding::{EmbeddingConfig, EmbeddingMode};
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::mcc::CylinderConfig;
use crate::synth::{PerturbConfig, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunConfig {
    pub cylinders: CylinderConfig,
    pub embeddings: EmbeddingConfig,
    pub fusion: FusionConfig,
    pub synth: SynthConfig,
    pub perturb: PerturbConfig,
    /// Depth of the emitted CMC curves.
    pub cmc_depth: usize,
}

/// Every accepted key with a short description.
pub const KEYS: &[(&str, &str)] = &[
    ("radius", "cylinder radius, px"),
    ("grid", "cylinder base cells per side"),
    ("sections", "cylinder directional sections"),
    ("sigma_s", "cylinder spatial Gaussian std, px"),
    ("sigma_d", "cylinder directional Gaussian std, rad"),
    ("min_neighbors", "neighbours needed for a valid cylinder"),
    ("emb_dim", "embedding dimension"),
    ("emb_mode", "embedding source: synthetic | file"),
    ("synth_radius", "synthetic embedding neighbourhood radius, px"),
    ("radial_bins", "synthetic embedding log-radial bins"),
    ("angular_bins", "synthetic embedding bearing bins"),
    ("direction_bins", "synthetic embedding direction bins"),
    ("w1", "score-fusion weight of the MCC matrix"),
    ("w2", "score-fusion weight of the embedding matrix"),
    ("delta_theta", "angle gate, rad"),
    ("gate_mcc", "apply the angle gate to the MCC channel"),
    ("gate_emb", "apply the angle gate to the embedding channel"),
    ("w_r", "relaxation self weight"),
    ("n_rel", "relaxation iterations"),
    ("mu1", "compatibility sigmoid centre, distance term"),
    ("mu2", "compatibility sigmoid centre, direction term"),
    ("mu3", "compatibility sigmoid centre, radial term"),
    ("tau1", "compatibility sigmoid slope, distance term"),
    ("tau2", "compatibility sigmoid slope, direction term"),
    ("tau3", "compatibility sigmoid slope, radial term"),
    ("distance_scale", "px per unit of distance discrepancy"),
    ("seed", "synthetic data seed"),
    ("n_fingers", "synthetic gallery size"),
    ("min_minutiae", "minutiae per synthetic finger, lower bound"),
    ("max_minutiae", "minutiae per synthetic finger, upper bound"),
    ("width", "synthetic image width, px"),
    ("height", "synthetic image height, px"),
    ("min_spacing", "minimum distance between synthetic minutiae, px"),
    ("rotation_max", "latent rotation bound, rad"),
    ("translation_max", "latent translation bound per axis, px"),
    ("position_jitter", "latent position noise std, px"),
    ("angle_jitter", "latent direction noise std, rad"),
    ("keep_min", "latent kept fraction, lower bound"),
    ("keep_max", "latent kept fraction, upper bound"),
    ("spurious_mean", "mean number of spurious latent minutiae"),
    ("crop_min", "latent crop radius lower bound, px (0 disables cropping)"),
    ("crop_max", "latent crop radius upper bound, px"),
    ("cmc_depth", "ranks reported in CMC files"),
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    pub fn new() -> Self {
        Self {
            cmc_depth: 20,
            ..Default::default()
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let c = &mut self.cylinders;
        let e = &mut self.embeddings;
        let f = &mut self.fusion;
        let r = &mut f.relaxation;
        let s = &mut self.synth;
        let p = &mut self.perturb;
        match key {
            "radius" => c.radius = parse(key, value)?,
            "grid" => c.grid = parse(key, value)?,
            "sections" => c.sections = parse(key, value)?,
            "sigma_s" => c.sigma_s = parse(key, value)?,
            "sigma_d" => c.sigma_d = parse(key, value)?,
            "min_neighbors" => c.min_neighbors = parse(key, value)?,
            "emb_dim" => e.dim = parse(key, value)?,
            "emb_mode" => {
                e.mode = match value.trim() {
                    "synthetic" => EmbeddingMode::Synthetic,
                    "file" => EmbeddingMode::File,
                    other => return Err(Error::InvalidConfig(format!("emb_mode: unknown mode {other:?}"))),
                }
            }
            "synth_radius" => e.synth_radius = parse(key, value)?,
            "radial_bins" => e.radial_bins = parse(key, value)?,
            "angular_bins" => e.angular_bins = parse(key, value)?,
            "direction_bins" => e.direction_bins = parse(key, value)?,
            "w1" => f.w1 = parse(key, value)?,
            "w2" => f.w2 = parse(key, value)?,
            "delta_theta" => f.delta_theta = parse(key, value)?,
            "gate_mcc" => f.gate_mcc = parse(key, value)?,
            "gate_emb" => f.gate_emb = parse(key, value)?,
            "w_r" => r.w_r = parse(key, value)?,
            "n_rel" => r.n_rel = parse(key, value)?,
            "mu1" => r.mu[0] = parse(key, value)?,
            "mu2" => r.mu[1] = parse(key, value)?,
            "mu3" => r.mu[2] = parse(key, value)?,
            "tau1" => r.tau[0] = parse(key, value)?,
            "tau2" => r.tau[1] = parse(key, value)?,
            "tau3" => r.tau[2] = parse(key, value)?,
            "distance_scale" => r.distance_scale = parse(key, value)?,
            "seed" => s.seed = parse(key, value)?,
            "n_fingers" => s.n_fingers = parse(key, value)?,
            "min_minutiae" => s.min_minutiae = parse(key, value)?,
            "max_minutiae" => s.max_minutiae = parse(key, value)?,
            "width" => s.width = parse(key, value)?,
            "height" => s.height = parse(key, value)?,
            "min_spacing" => s.min_spacing = parse(key, value)?,
            "rotation_max" => p.rotation_max = parse(key, value)?,
            "translation_max" => p.translation_max = parse(key, value)?,
            "position_jitter" => p.position_jitter = parse(key, value)?,
            "angle_jitter" => p.angle_jitter = parse(key, value)?,
            "keep_min" => p.keep_min = parse(key, value)?,
            "keep_max" => p.keep_max = parse(key, value)?,
            "spurious_mean" => p.spurious_mean = parse(key, value)?,
            "crop_min" => {
                let lo: f64 = parse(key, value)?;
                p.crop_radius = if lo > 0.0 {
                    Some((lo, p.crop_radius.map_or(lo, |(_, hi)| hi.max(lo))))
                } else {
                    None
                };
            }
            "crop_max" => {
                let hi: f64 = parse(key, value)?;
                if let Some((lo, _)) = p.crop_radius {
                    p.crop_radius = Some((lo, hi));
                }
            }
            "cmc_depth" => self.cmc_depth = parse(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let c = &self.cylinders;
        let e = &self.embeddings;
        let f = &self.fusion;
        let r = &f.relaxation;
        let s = &self.synth;
        let p = &self.perturb;
        let v = match key {
            "radius" => c.radius.to_string(),
            "grid" => c.grid.to_string(),
            "sections" => c.sections.to_string(),
            "sigma_s" => c.sigma_s.to_string(),
            "sigma_d" => c.sigma_d.to_string(),
            "min_neighbors" => c.min_neighbors.to_string(),
            "emb_dim" => e.dim.to_string(),
            "emb_mode" => match e.mode {
                EmbeddingMode::Synthetic => "synthetic".into(),
                EmbeddingMode::File => "file".into(),
            },
            "synth_radius" => e.synth_radius.to_string(),
            "radial_bins" => e.radial_bins.to_string(),
            "angular_bins" => e.angular_bins.to_string(),
            "direction_bins" => e.direction_bins.to_string(),
            "w1" => f.w1.to_string(),
            "w2" => f.w2.to_string(),
            "delta_theta" => f.delta_theta.to_string(),
            "gate_mcc" => f.gate_mcc.to_string(),
            "gate_emb" => f.gate_emb.to_string(),
            "w_r" => r.w_r.to_string(),
            "n_rel" => r.n_rel.to_string(),
            "mu1" => r.mu[0].to_string(),
            "mu2" => r.mu[1].to_string(),
            "mu3" => r.mu[2].to_string(),
            "tau1" => r.tau[0].to_string(),
            "tau2" => r.tau[1].to_string(),
            "tau3" => r.tau[2].to_string(),
            "distance_scale" => r.distance_scale.to_string(),
            "seed" => s.seed.to_string(),
            "n_fingers" => s.n_fingers.to_string(),
            "min_minutiae" => s.min_minutiae.to_string(),
            "max_minutiae" => s.max_minutiae.to_string(),
            "width" => s.width.to_string(),
            "height" => s.height.to_string(),
            "min_spacing" => s.min_spacing.to_string(),
            "rotation_max" => p.rotation_max.to_string(),
            "translation_max" => p.translation_max.to_string(),
            "position_jitter" => p.position_jitter.to_string(),
            "angle_jitter" => p.angle_jitter.to_string(),
            "keep_min" => p.keep_min.to_string(),
            "keep_max" => p.keep_max.to_string(),
            "spurious_mean" => p.spurious_mean.to_string(),
            "crop_min" => p.crop_radius.map_or(0.0, |c| c.0).to_string(),
            "crop_max" => p.crop_radius.map_or(0.0, |c| c.1).to_string(),
            "cmc_depth" => self.cmc_depth.to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// Applies `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            self.set(key.trim(), value).map_err(|e| err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.cylinders.validate()?;
        self.embeddings.validate()?;
        self.fusion.validate()?;
        self.synth.validate()?;
        self.perturb.validate()?;
        if self.cmc_depth == 0 {
            return Err(Error::InvalidConfig("cmc_depth must be positive".into()));
        }
        Ok(())
    }

    /// Table of every key with its current value, for `--help`.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for (key, what) in KEYS {
            let value = self.get(key).expect("every listed key is readable");
            writeln!(out, "  {key:<16} {value:<22} {what}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips_its_default() {
        let base = RunConfig::new();
        for (key, _) in KEYS {
            let mut c = base;
            let v = base.get(key).unwrap();
            c.set(key, &v).unwrap();
            assert_eq!(c, base, "{key}");
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn file_overrides_and_rejects_unknown_keys() {
        let mut c = RunConfig::new();
        c.apply_text("# comment\nw1 = 0.25\n\nn_rel=3 # trailing\nemb_mode=file\n", Path::new("c"))
            .unwrap();
        assert_eq!(c.fusion.w1, 0.25);
        assert_eq!(c.fusion.relaxation.n_rel, 3);
        assert_eq!(c.embeddings.mode, EmbeddingMode::File);
        let err = c.apply_text("w1=0.5\nbogus=1\n", Path::new("c")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(c.apply_text("w1\n", Path::new("c")).is_err());
        assert!(c.set("w1", "heavy").is_err());
    }

    #[test]
    fn crop_keys() {
        let mut c = RunConfig::new();
        c.set("crop_min", "0").unwrap();
        assert_eq!(c.perturb.crop_radius, None);
        c.set("crop_min", "100").unwrap();
        c.set("crop_max", "180").unwrap();
        assert_eq!(c.perturb.crop_radius, Some((100.0, 180.0)));
    }

    #[test]
    fn describe_lists_all_keys() {
        let text = RunConfig::new().describe();
        assert_eq!(text.lines().count(), KEYS.len());
        assert!(text.contains("delta_theta"));
    }
}
