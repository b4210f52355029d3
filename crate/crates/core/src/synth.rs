//! Seeded synthetic fingers and latent-style degraded queries.
//!
//! Finger `i` draws from its own ChaCha stream seeded with `seed ^ i`;
//! stream 0 builds the finger and stream 1 its latent, so any finger or
//! query can be regenerated independently and in any order.

use std::f64::consts::{FRAC_PI_6, PI, TAU};
use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::par::{map_range, Execution};
use crate::template::{save_template, Minutia, MinutiaeTemplate, RigidTransform};

const MAX_REJECTIONS: usize = 10_000;
const MAX_CROP_RETRIES: usize = 5;
const DIRECTION_NOISE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_fingers: usize,
    pub min_minutiae: usize,
    pub max_minutiae: usize,
    pub width: u32,
    pub height: u32,
    pub min_spacing: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_fingers: 200,
            min_minutiae: 30,
            max_minutiae: 60,
            width: 500,
            height: 500,
            min_spacing: 12.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fingers == 0 || self.min_minutiae > self.max_minutiae || self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig(format!("bad synthesis config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig {
    /// Rotation drawn uniformly from `±rotation_max` radians.
    pub rotation_max: f64,
    /// Per-axis translation drawn uniformly from `±translation_max` pixels.
    pub translation_max: f64,
    pub position_jitter: f64,
    pub angle_jitter: f64,
    pub keep_min: f64,
    pub keep_max: f64,
    /// Poisson mean of the number of spurious minutiae.
    pub spurious_mean: f64,
    /// `None` disables cropping.
    pub crop_radius: Option<(f64, f64)>,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            rotation_max: FRAC_PI_6,
            translation_max: 50.0,
            position_jitter: 4.0,
            angle_jitter: 0.087,
            keep_min: 0.4,
            keep_max: 0.8,
            spurious_mean: 3.0,
            crop_radius: Some((120.0, 250.0)),
        }
    }
}

impl PerturbConfig {
    /// No crop, no subsampling, no motion, no noise.
    pub fn identity() -> Self {
        Self {
            rotation_max: 0.0,
            translation_max: 0.0,
            position_jitter: 0.0,
            angle_jitter: 0.0,
            keep_min: 1.0,
            keep_max: 1.0,
            spurious_mean: 0.0,
            crop_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let keep_ok = self.keep_min > 0.0 && self.keep_min <= self.keep_max && self.keep_max <= 1.0;
        let non_negative = [
            self.rotation_max,
            self.translation_max,
            self.position_jitter,
            self.angle_jitter,
            self.spurious_mean,
        ]
        .iter()
        .all(|&v| v >= 0.0);
        let crop_ok = self.crop_radius.is_none_or(|(lo, hi)| lo > 0.0 && lo <= hi);
        if keep_ok && non_negative && crop_ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad perturbation config {self:?}")))
        }
    }
}

/// Deterministic per-finger generator; `stream` separates independent uses.
pub fn finger_rng(seed: u64, finger: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ finger as u64);
    rng.set_stream(stream);
    rng
}

fn symmetric<R: Rng + ?Sized>(rng: &mut R, max: f64) -> f64 {
    if max > 0.0 {
        rng.random_range(-max..=max)
    } else {
        0.0
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    if std > 0.0 {
        Normal::new(0.0, std).expect("positive std").sample(rng)
    } else {
        0.0
    }
}

/// Smooth orientation field built from a few plane-wave components.
struct OrientationField {
    base: f64,
    waves: Vec<(f64, f64, f64, f64)>,
}

impl OrientationField {
    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let n = rng.random_range(2..=4);
        let waves = (0..n)
            .map(|_| {
                (
                    rng.random_range(0.3..1.2),
                    rng.random_range(0.004..0.015),
                    rng.random_range(0.0..TAU),
                    rng.random_range(0.0..TAU),
                )
            })
            .collect();
        Self {
            base: rng.random_range(0.0..PI),
            waves,
        }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        self.base
            + self
                .waves
                .iter()
                .map(|&(amp, freq, dir, phase)| amp * (freq * (x * dir.cos() + y * dir.sin()) + phase).sin())
                .sum::<f64>()
    }
}

pub fn generate_finger<R: Rng + ?Sized>(rng: &mut R, cfg: &SynthConfig, id: &str) -> MinutiaeTemplate {
    let count = rng.random_range(cfg.min_minutiae..=cfg.max_minutiae);
    let field = OrientationField::random(rng);
    let (w, h) = (f64::from(cfg.width), f64::from(cfg.height));
    let spacing_sq = cfg.min_spacing * cfg.min_spacing;

    let mut minutiae: Vec<Minutia> = Vec::with_capacity(count);
    let mut rejections = 0;
    while minutiae.len() < count {
        let (x, y) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
        let crowded = minutiae.iter().any(|m| {
            let (dx, dy) = (m.x - x, m.y - y);
            dx * dx + dy * dy < spacing_sq
        });
        if crowded {
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                warn!(
                    "{id}: spacing {} unsatisfiable, keeping {} of {count} minutiae",
                    cfg.min_spacing,
                    minutiae.len()
                );
                break;
            }
            continue;
        }
        let flip = if rng.random_bool(0.5) { PI } else { 0.0 };
        let theta = field.at(x, y) + flip + rng.random_range(-DIRECTION_NOISE..=DIRECTION_NOISE);
        minutiae.push(Minutia::new(x, y, theta));
    }
    MinutiaeTemplate::new(id, minutiae).with_extent(cfg.width, cfg.height)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub template: MinutiaeTemplate,
    /// For each latent minutia, the index of its source minutia in the
    /// original template, or `None` for a spurious one.
    pub truth: Vec<Option<usize>>,
    pub transform: RigidTransform,
}

/// Crop disc as `(cx, cy, radius)`.
type Region = Option<(f64, f64, f64)>;

fn crop_and_subsample<R: Rng + ?Sized>(rng: &mut R, t: &MinutiaeTemplate, cfg: &PerturbConfig) -> (Vec<usize>, Region) {
    let mut smallest: Option<(Vec<usize>, Region)> = None;
    for _ in 0..MAX_CROP_RETRIES {
        let (inside, region) = match cfg.crop_radius {
            Some((lo, hi)) => {
                let c = t.minutiae[rng.random_range(0..t.len())];
                let r = rng.random_range(lo..=hi);
                let inside: Vec<usize> = (0..t.len())
                    .filter(|&i| (t.minutiae[i].x - c.x).hypot(t.minutiae[i].y - c.y) <= r)
                    .collect();
                (inside, Some((c.x, c.y, r)))
            }
            None => ((0..t.len()).collect(), None),
        };
        let frac = if cfg.keep_max > cfg.keep_min {
            rng.random_range(cfg.keep_min..=cfg.keep_max)
        } else {
            cfg.keep_max
        };
        let n_keep = (frac * inside.len() as f64).round() as usize;
        if n_keep > 0 {
            let mut picked: Vec<usize> = sample(rng, inside.len(), n_keep).into_iter().map(|k| inside[k]).collect();
            picked.sort_unstable();
            return (picked, region);
        }
        if smallest.is_none() && !inside.is_empty() {
            smallest = Some((vec![inside[0]], region));
        }
    }
    smallest.unwrap_or_else(|| (vec![0], None))
}

/// Degrades `t` into a latent-like query: crop, subsample, rigid motion,
/// jitter, then spurious minutiae inside the cropped region.
pub fn perturb_to_latent<R: Rng + ?Sized>(
    t: &MinutiaeTemplate,
    rng: &mut R,
    cfg: &PerturbConfig,
    id: &str,
) -> Result<LatentSample> {
    if t.is_empty() {
        return Err(Error::InvalidConfig(format!("cannot degrade empty template {:?}", t.id)));
    }
    let (kept, region) = crop_and_subsample(rng, t, cfg);

    let (w, h) = (f64::from(t.width.unwrap_or(500)), f64::from(t.height.unwrap_or(500)));
    let transform = RigidTransform {
        angle: symmetric(rng, cfg.rotation_max),
        cx: w / 2.0,
        cy: h / 2.0,
        tx: symmetric(rng, cfg.translation_max),
        ty: symmetric(rng, cfg.translation_max),
    };
    let moves = transform.angle != 0.0 || transform.tx != 0.0 || transform.ty != 0.0;
    let place = |m: &Minutia| if moves { transform.apply(m) } else { *m };

    let mut minutiae = Vec::with_capacity(kept.len());
    let mut truth = Vec::with_capacity(kept.len());
    for &i in &kept {
        let mut m = place(&t.minutiae[i]);
        if cfg.position_jitter > 0.0 || cfg.angle_jitter > 0.0 {
            m = Minutia {
                x: m.x + gaussian(rng, cfg.position_jitter),
                y: m.y + gaussian(rng, cfg.position_jitter),
                theta: crate::geometry::normalize_angle(m.theta + gaussian(rng, cfg.angle_jitter)),
                quality: m.quality,
            };
        }
        minutiae.push(m);
        truth.push(Some(i));
    }

    let spurious = if cfg.spurious_mean > 0.0 {
        Poisson::new(cfg.spurious_mean).expect("positive mean").sample(rng) as usize
    } else {
        0
    };
    for _ in 0..spurious {
        let (x, y) = match region {
            Some((cx, cy, r)) => {
                let rho = r * rng.random::<f64>().sqrt();
                let phi = rng.random_range(0.0..TAU);
                (cx + rho * phi.cos(), cy + rho * phi.sin())
            }
            None => (rng.random_range(0.0..w), rng.random_range(0.0..h)),
        };
        minutiae.push(place(&Minutia::new(x, y, rng.random_range(0.0..TAU))));
        truth.push(None);
    }

    let mut template = MinutiaeTemplate::new(id, minutiae);
    template.width = t.width;
    template.height = t.height;
    Ok(LatentSample {
        template,
        truth,
        transform,
    })
}

pub fn gallery_id(i: usize) -> String {
    format!("f{i:04}")
}

pub fn query_id(i: usize) -> String {
    format!("q{i:04}")
}

/// A synthetic gallery with one latent query per finger.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub gallery: Vec<MinutiaeTemplate>,
    pub queries: Vec<LatentSample>,
}

impl SyntheticDataset {
    pub fn generate(synth: &SynthConfig, perturb: &PerturbConfig, exec: Execution) -> Result<Self> {
        synth.validate()?;
        perturb.validate()?;
        let pairs = map_range(synth.n_fingers, exec, |i| {
            let finger = generate_finger(&mut finger_rng(synth.seed, i, 0), synth, &gallery_id(i));
            let latent = perturb_to_latent(&finger, &mut finger_rng(synth.seed, i, 1), perturb, &query_id(i));
            latent.map(|l| (finger, l))
        });
        let (gallery, queries) = pairs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
        Ok(Self { gallery, queries })
    }

    /// `(query_id, mate_id)` for every query.
    pub fn truth(&self) -> Vec<(String, String)> {
        self.queries
            .iter()
            .zip(&self.gallery)
            .map(|(q, g)| (q.template.id.clone(), g.id.clone()))
            .collect()
    }

    /// Writes `gallery/<id>.mnt`, `queries/<id>.mnt` and `truth.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for sub in ["gallery", "queries"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        for t in &self.gallery {
            save_template(t, dir.join("gallery").join(format!("{}.mnt", t.id)))?;
        }
        for q in &self.queries {
            save_template(&q.template, dir.join("queries").join(format!("{}.mnt", q.template.id)))?;
        }
        let mut truth = String::from("query_id,mate_id\n");
        for (q, m) in self.truth() {
            truth.push_str(&format!("{q},{m}\n"));
        }
        let p = dir.join("truth.csv");
        fs::write(&p, truth).map_err(|e| Error::io(&p, e))
    }
}
