use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mccfuse::config::KEYS;

fn mccfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mccfuse")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gen(dir: &Path, n: usize) {
    let o = mccfuse(&[
        "gen-synth",
        "--out",
        dir.to_str().unwrap(),
        "--set",
        &format!("n_fingers={n}"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_lists_every_key_with_its_default() {
    let o = mccfuse(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for (key, _) in KEYS {
        assert!(text.contains(&format!("  {key} ")), "{key} missing from help");
    }
    assert!(text.contains("0.698 "), "sigma_d default not shown");
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mccfuse(&["match"]).status.code(), Some(1));
    assert_eq!(mccfuse(&["match", "a", "b", "--matcher", "best"]).status.code(), Some(1));
    assert_eq!(mccfuse(&["--set", "bogus=1", "gen-synth"]).status.code(), Some(1));
    let missing = dir.path().join("nope.mnt");
    assert_eq!(mccfuse(&["match", p(&missing), p(&missing)]).status.code(), Some(2));

    let bad = dir.path().join("bad.mnt");
    fs::write(&bad, "1 2 zero\n").unwrap();
    let o = mccfuse(&["match", p(&bad), p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.mnt:1"));
}

#[test]
fn match_prints_score_line_and_score_fusion_degenerates() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), 3);
    let g = dir.path().join("gallery/f0000.mnt");
    let q = dir.path().join("queries/q0000.mnt");

    let o = mccfuse(&["match", p(&g), p(&g), "--matcher", "feature"]);
    assert!(o.status.success());
    let line = stdout(&o);
    assert!(
        line.starts_with("score=") && line.contains(" raw_sum=") && line.contains(" pairs=8"),
        "{line}"
    );
    let score: f64 = line["score=".len()..].split(' ').next().unwrap().parse().unwrap();
    // self-match ceiling: every pair at (w_r + (1 - w_r) ρ0)^n_rel
    let ceiling = (0.5f64 + 0.5 * 0.7539295563231556).powi(5);
    assert!((score - ceiling).abs() < 1e-6, "{score} vs {ceiling}");

    let mcc = stdout(&mccfuse(&["match", p(&q), p(&g), "--matcher", "mcc"]));
    let score_10 = stdout(&mccfuse(&[
        "match",
        p(&q),
        p(&g),
        "--matcher",
        "score",
        "--w1",
        "1",
        "--w2",
        "0",
    ]));
    assert_eq!(mcc, score_10);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), 2);
    let g = dir.path().join("gallery/f0001.mnt");
    let q = dir.path().join("queries/q0001.mnt");
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# only the embedding channel\nw1 = 0\nw2 = 1\n").unwrap();

    let run = |extra: &[&str]| {
        let mut args = vec!["match", p(&q), p(&g)];
        args.extend_from_slice(extra);
        let o = mccfuse(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let emb = run(&["--matcher", "emb"]);
    let mcc = run(&["--matcher", "mcc"]);
    assert_eq!(run(&["--matcher", "score", "--config", p(&cfg)]), emb);
    assert_eq!(
        run(&["--matcher", "score", "--config", p(&cfg), "--w1", "1", "--w2", "0"]),
        mcc
    );
}

#[test]
fn identify_reports_mate_rank_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), 6);
    let out = dir.path().join("res.csv");
    let o = mccfuse(&[
        "identify",
        p(&dir.path().join("queries/q0002.mnt")),
        p(&dir.path().join("gallery")),
        "--truth",
        p(&dir.path().join("truth.csv")),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("rank_of_mate="));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next(), Some("query_id,rank,gallery_id,score,channel"));
    assert_eq!(csv.lines().count(), 7);

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = mccfuse(&["identify", p(&dir.path().join("queries/q0002.mnt")), p(&empty)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn benchmark_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = mccfuse(&["benchmark", "--set", "n_fingers=12", "--seed", "5", "--out", p(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
    for name in [
        "summary.csv",
        "results_feature.csv",
        "cmc_rank.csv",
        "data/truth.csv",
        "data/queries/q0003.mnt",
    ] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn embedding_files_feed_file_mode() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), 2);
    let g = dir.path().join("gallery/f0000.mnt");
    let q = dir.path().join("queries/q0000.mnt");
    assert!(mccfuse(&["embed-synth", p(&g), p(&q)]).status.success());
    assert!(g.with_extension("emb").exists() && q.with_extension("emb").exists());

    let o = mccfuse(&["match", p(&q), p(&g), "--matcher", "emb", "--set", "emb_mode=file"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("score="));

    let other = dir.path().join("gallery/f0001.mnt");
    assert_eq!(
        mccfuse(&["match", p(&q), p(&other), "--set", "emb_mode=file"]).status.code(),
        Some(2)
    );
}

#[test]
fn describe_dumps_both_channels() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), 1);
    let t = dir.path().join("gallery/f0000.mnt");
    let n = fs::read_to_string(&t)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .count();
    let o = mccfuse(&["describe", p(&t)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("mcc,")).count(), n);
    assert_eq!(text.lines().filter(|l| l.starts_with("emb,")).count(), n);
    let first = text.lines().nth(1).unwrap();
    assert_eq!(first.split(',').nth(3).unwrap().split(' ').count(), 1536);
}
