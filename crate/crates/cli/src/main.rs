use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use mccfuse::benchmark::run_benchmark;
use mccfuse::config::RunConfig;
use mccfuse::embedding::{build_synthetic_embeddings, load_embeddings, save_embeddings};
use mccfuse::evaluation::{identify_with, write_results, Gallery};
use mccfuse::fusion::{match_prepared, PreparedTemplate};
use mccfuse::synth::SyntheticDataset;
use mccfuse::template::load_template;
use mccfuse::{Channel, EmbeddingMode, EmbeddingSet, Execution, MinutiaeTemplate};

const TEMPLATE_EXT: &str = "mnt";
const EMBEDDING_EXT: &str = "emb";

#[derive(Parser, Debug)]
#[command(
    name = "mccfuse",
    version,
    about = "Latent fingerprint matching with fused MCC and embedding descriptors"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Overrides {
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Set any configuration key, e.g. --set sigma_s=8
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    w1: Option<f64>,
    #[arg(long, global = true)]
    w2: Option<f64>,
    #[arg(long, global = true)]
    delta_theta: Option<f64>,
    #[arg(long, global = true)]
    n_rel: Option<usize>,
    /// Run scans on a single thread
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare two templates and print their score
    Match {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "feature")]
        matcher: Channel,
    },
    /// Rank a gallery directory against one query template
    Identify {
        query: PathBuf,
        gallery: PathBuf,
        #[arg(long, default_value = "feature")]
        matcher: Channel,
        /// Results CSV
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        /// Gallery id of the true mate
        #[arg(long, conflicts_with = "truth")]
        mate: Option<String>,
        /// query_id,mate_id CSV to look the mate up in
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run the synthetic identification benchmark
    Benchmark {
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Write a synthetic gallery, latent queries and truth table
    GenSynth {
        #[arg(long, default_value = "synth-data")]
        out: PathBuf,
    },
    /// Dump the descriptors of a template as CSV
    Describe {
        template: PathBuf,
        /// Output file; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write synthetic embedding files for templates
    EmbedSynth {
        #[arg(required = true)]
        templates: Vec<PathBuf>,
        /// Output directory; next to each template when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Data(mccfuse::Error),
}

impl From<mccfuse::Error> for Failure {
    fn from(e: mccfuse::Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn build_config(o: &Overrides) -> Outcome<RunConfig> {
    let mut cfg = RunConfig::new();
    if let Some(path) = &o.config {
        cfg.apply_file(path).map_err(|e| match e {
            e @ mccfuse::Error::Io { .. } => Failure::Data(e),
            e => Failure::Usage(e.to_string()),
        })?;
    }
    let mut assignments: Vec<(String, String)> = Vec::new();
    for kv in &o.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        assignments.push((k.trim().to_string(), v.trim().to_string()));
    }
    let named = [
        ("seed", o.seed.map(|v| v.to_string())),
        ("w1", o.w1.map(|v| v.to_string())),
        ("w2", o.w2.map(|v| v.to_string())),
        ("delta_theta", o.delta_theta.map(|v| v.to_string())),
        ("n_rel", o.n_rel.map(|v| v.to_string())),
    ];
    assignments.extend(named.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    for (k, v) in assignments {
        cfg.set(&k, &v).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn embeddings_for(path: &Path, t: &MinutiaeTemplate, cfg: &RunConfig) -> Outcome<Option<EmbeddingSet>> {
    if cfg.embeddings.mode != EmbeddingMode::File {
        return Ok(None);
    }
    let emb_path = path.with_extension(EMBEDDING_EXT);
    let set = load_embeddings(&emb_path, t.len())?;
    if set.dim() != cfg.embeddings.dim {
        return Err(Failure::Data(mccfuse::Error::DimensionMismatch {
            left: set.dim(),
            right: cfg.embeddings.dim,
        }));
    }
    Ok(Some(set))
}

fn prepare(path: &Path, cfg: &RunConfig) -> Outcome<PreparedTemplate> {
    let t = load_template(path)?;
    let emb = embeddings_for(path, &t, cfg)?;
    Ok(PreparedTemplate::new(t, &cfg.cylinders, &cfg.embeddings, emb)?)
}

fn gallery_files(dir: &Path) -> Outcome<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| mccfuse::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == TEMPLATE_EXT))
        .collect();
    files.sort();
    Ok(files)
}

fn lookup_mate(truth: &Path, query_id: &str) -> Outcome<String> {
    let text = fs::read_to_string(truth).map_err(|e| mccfuse::Error::Io {
        path: truth.to_path_buf(),
        source: e,
    })?;
    let table: BTreeMap<&str, &str> = text.lines().skip(1).filter_map(|l| l.split_once(',')).collect();
    table
        .get(query_id)
        .map(|m| m.trim().to_string())
        .ok_or_else(|| Failure::Data(mccfuse::Error::MissingQuery(query_id.to_string())))
}

fn describe_csv(p: &PreparedTemplate) -> String {
    let mut out = String::from("channel,minutia,valid,values\n");
    for (name, set) in [("mcc", &p.mcc), ("emb", &p.emb)] {
        for i in 0..set.len() {
            write!(out, "{name},{i},{}", u8::from(set.is_valid(i))).unwrap();
            out.push(',');
            let values: Vec<String> = set.vector(i).iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&values.join(" "));
            out.push('\n');
        }
    }
    out
}

fn run(cli: Cli) -> Outcome<()> {
    let cfg = build_config(&cli.overrides)?;
    let exec = if cli.overrides.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match cli.command {
        Command::Match { a, b, matcher } => {
            let pa = prepare(&a, &cfg)?;
            let pb = prepare(&b, &cfg)?;
            let r = match_prepared(&pa, &pb, matcher, &cfg.fusion)?;
            println!("score={:.6} raw_sum={:.6} pairs={}", r.score, r.raw_sum, r.n_pairs_used);
        }
        Command::Identify {
            query,
            gallery,
            matcher,
            out,
            mate,
            truth,
        } => {
            let mut g = Gallery::new(cfg.cylinders, cfg.embeddings);
            for path in gallery_files(&gallery)? {
                g.insert(prepare(&path, &cfg)?)?;
            }
            let q = prepare(&query, &cfg)?;
            let mate = match (mate, truth) {
                (Some(m), _) => Some(m),
                (None, Some(t)) => Some(lookup_mate(&t, q.id())?),
                (None, None) => None,
            };
            let r = identify_with(&g, &q, matcher, &cfg.fusion, mate.as_deref(), exec)?;
            write_results(std::slice::from_ref(&r), &out)?;
            if let Some(top) = r.candidates.first() {
                println!("top={} score={:.6}", top.gallery_id, top.score);
            }
            if mate.is_some() {
                match r.rank_of_mate {
                    Some(k) => println!("rank_of_mate={k}"),
                    None => println!("rank_of_mate=none"),
                }
            }
        }
        Command::Benchmark { out } => {
            let report = run_benchmark(&cfg, &out, exec)?;
            print!("{}", report.summary_csv());
        }
        Command::GenSynth { out } => {
            let data = SyntheticDataset::generate(&cfg.synth, &cfg.perturb, exec)?;
            data.write(&out)?;
            println!(
                "wrote {} gallery templates and {} queries to {}",
                data.gallery.len(),
                data.queries.len(),
                out.display()
            );
        }
        Command::Describe { template, out } => {
            let p = prepare(&template, &cfg)?;
            let text = describe_csv(&p);
            match out {
                Some(path) => fs::write(&path, text).map_err(|e| mccfuse::Error::Io { path, source: e })?,
                None => print!("{text}"),
            }
        }
        Command::EmbedSynth { templates, out } => {
            if let Some(dir) = &out {
                fs::create_dir_all(dir).map_err(|e| mccfuse::Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
            }
            for path in templates {
                let t = load_template(&path)?;
                let set = build_synthetic_embeddings(&t, &cfg.embeddings);
                let target = match &out {
                    Some(dir) => dir.join(path.with_extension(EMBEDDING_EXT).file_name().unwrap_or_default()),
                    None => path.with_extension(EMBEDDING_EXT),
                };
                save_embeddings(&set, &target)?;
                log::info!("{} -> {}", path.display(), target.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let keys = format!(
        "Configuration keys (defaults shown; flags > --set > --config file > defaults):\n{}",
        RunConfig::new().describe()
    );
    let command = Cli::command().after_help(keys);
    let cli = match command.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
