use std::f64::consts::PI;

use mccfuse::config::RunConfig;
use mccfuse::embedding::build_synthetic_embeddings;
use mccfuse::fusion::match_all;
use mccfuse::geometry::angular_difference;
use mccfuse::pairing::{Pair, PairSet, PairSource};
use mccfuse::relaxation::relax;
use mccfuse::synth::{finger_rng, generate_finger, perturb_to_latent};
use mccfuse::{Minutia, MinutiaeTemplate, PreparedTemplate, RelaxationParams, RigidTransform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scatter(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<Minutia> {
    (0..n)
        .map(|_| {
            Minutia::new(
                250.0 + rng.random_range(-spread..spread),
                250.0 + rng.random_range(-spread..spread),
                rng.random_range(-PI..PI),
            )
        })
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (a.iter().map(|x| x * x).sum::<f64>() * b.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

fn random_motion(rng: &mut ChaCha8Rng) -> RigidTransform {
    RigidTransform {
        angle: rng.random_range(-PI..PI),
        cx: 250.0,
        cy: 250.0,
        tx: rng.random_range(-60.0..60.0),
        ty: rng.random_range(-60.0..60.0),
    }
}

fn pairs(cols: impl IntoIterator<Item = (usize, usize)>, score: impl Fn(usize) -> f64) -> PairSet {
    PairSet {
        pairs: cols
            .into_iter()
            .enumerate()
            .map(|(i, (row, col))| Pair {
                row,
                col,
                score: score(i),
                source: PairSource::Mcc,
            })
            .collect(),
    }
}

#[test]
fn different_neighbourhoods_give_different_embeddings() {
    let cfg = RunConfig::new().embeddings;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        // centre minutia first, four neighbours within 60 px
        let mut a = vec![Minutia::new(250.0, 250.0, 0.0)];
        a.extend(scatter(&mut rng, 4, 60.0));
        let mut b = vec![Minutia::new(250.0, 250.0, 0.0)];
        b.extend(scatter(&mut rng, 4, 60.0));
        let ea = build_synthetic_embeddings(&MinutiaeTemplate::new("a", a), &cfg);
        let eb = build_synthetic_embeddings(&MinutiaeTemplate::new("b", b), &cfg);
        let c = cosine(ea.vector(0), eb.vector(0));
        assert!(c < 0.99, "cosine {c}");
    }
}

#[test]
fn consistent_pairs_outscore_shuffled_correspondences() {
    let params = RelaxationParams::default();
    let mut wins = 0;
    for trial in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let a = MinutiaeTemplate::new("a", scatter(&mut rng, 12, 120.0));
        let b = a.transformed(&random_motion(&mut rng));
        let initial: Vec<f64> = (0..12).map(|_| rng.random_range(0.3..0.9)).collect();
        let mut perm: Vec<usize> = (0..12).collect();
        perm.shuffle(&mut rng);

        let genuine = relax(&pairs((0..12).map(|i| (i, i)), |i| initial[i]), &a, &b, &params).unwrap();
        let shuffled = relax(&pairs((0..12).map(|i| (i, perm[i])), |i| initial[i]), &a, &b, &params).unwrap();
        let mean = |r: &mccfuse::relaxation::RelaxedPairs| r.pairs.iter().map(|p| p.relaxed).sum::<f64>() / 12.0;
        if mean(&genuine) > mean(&shuffled) {
            wins += 1;
        }
    }
    assert!(wins >= 95, "consistent set won {wins}/100");
}

#[test]
fn spoiler_pairs_are_suppressed() {
    let params = RelaxationParams::default();
    let mut separated = 0;
    for trial in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + trial);
        let a = MinutiaeTemplate::new("a", scatter(&mut rng, 16, 120.0));
        let b = a.transformed(&random_motion(&mut rng));
        // rows 0..8 matched correctly, rows 8..16 matched to a rotated column
        let cols: Vec<(usize, usize)> = (0..8)
            .map(|i| (i, i))
            .chain((8..16).map(|i| (i, 8 + (i - 8 + 3) % 8)))
            .collect();
        let relaxed = relax(&pairs(cols, |_| 0.8), &a, &b, &params).unwrap();
        let worst_genuine = relaxed.pairs[..8].iter().map(|p| p.relaxed).fold(f64::INFINITY, f64::min);
        let best_spoiler = relaxed.pairs[8..].iter().map(|p| p.relaxed).fold(0.0, f64::max);
        if worst_genuine > best_spoiler {
            separated += 1;
        }
    }
    assert!(separated >= 95, "separated {separated}/100");
}

#[test]
fn reordering_minutiae_keeps_every_score() {
    let cfg = RunConfig::new();
    for i in 0..20 {
        let finger = generate_finger(&mut finger_rng(77, i, 0), &cfg.synth, "g");
        let latent = perturb_to_latent(&finger, &mut finger_rng(77, i, 1), &cfg.perturb, "q")
            .unwrap()
            .template;
        let mut shuffled = finger.clone();
        shuffled.minutiae.shuffle(&mut ChaCha8Rng::seed_from_u64(i as u64));

        let prep = |t: &MinutiaeTemplate| PreparedTemplate::new(t.clone(), &cfg.cylinders, &cfg.embeddings, None).unwrap();
        let q = prep(&latent);
        let before = match_all(&q, &prep(&finger), &cfg.fusion).unwrap();
        let after = match_all(&q, &prep(&shuffled), &cfg.fusion).unwrap();
        for (x, y) in before.iter().zip(&after) {
            assert!((x.score - y.score).abs() < 1e-9, "{}: {} vs {}", x.channel, x.score, y.score);
            assert_eq!(x.n_pairs_used, y.n_pairs_used);
        }
    }
}

#[test]
fn latents_lose_minutiae_on_average() {
    let cfg = RunConfig::new();
    let (mut before, mut after) = (0usize, 0usize);
    for i in 0..100 {
        let finger = generate_finger(&mut finger_rng(5, i, 0), &cfg.synth, "g");
        let latent = perturb_to_latent(&finger, &mut finger_rng(5, i, 1), &cfg.perturb, "q").unwrap();
        before += finger.len();
        after += latent.template.len();
    }
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn latent_truth_points_back_to_source() {
    let cfg = RunConfig::new();
    let finger = generate_finger(&mut finger_rng(9, 0, 0), &cfg.synth, "g");
    let mut p = cfg.perturb;
    p.position_jitter = 0.0;
    p.angle_jitter = 0.0;
    let latent = perturb_to_latent(&finger, &mut finger_rng(9, 0, 1), &p, "q").unwrap();
    let inverse_checked = latent
        .truth
        .iter()
        .zip(&latent.template.minutiae)
        .filter_map(|(src, m)| src.map(|s| (latent.transform.apply(&finger.minutiae[s]), *m)))
        .inspect(|(want, got)| {
            assert!((want.x - got.x).abs() < 1e-9 && (want.y - got.y).abs() < 1e-9);
            assert!(angular_difference(want.theta, got.theta) < 1e-9);
        })
        .count();
    assert!(inverse_checked > 0);
}

#[test]
fn top_pairs_are_mostly_true_correspondences() {
    let cfg = RunConfig::new();
    let (mut correct, mut total) = (0usize, 0usize);
    for i in 0..40 {
        let finger = generate_finger(&mut finger_rng(31, i, 0), &cfg.synth, "g");
        let latent = perturb_to_latent(&finger, &mut finger_rng(31, i, 1), &cfg.perturb, "q").unwrap();
        let prep = |t: &MinutiaeTemplate| PreparedTemplate::new(t.clone(), &cfg.cylinders, &cfg.embeddings, None).unwrap();
        for r in match_all(&prep(&latent.template), &prep(&finger), &cfg.fusion).unwrap() {
            for p in &r.top_pairs {
                total += 1;
                correct += usize::from(latent.truth[p.row] == Some(p.col));
            }
        }
    }
    let fraction = correct as f64 / total as f64;
    assert!(fraction > 0.5, "{correct}/{total} top pairs are true correspondences");
}
