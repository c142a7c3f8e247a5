//! The `pas` command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::corpus::{generate_dataset, Dataset, LoadMode, ANCHORS_FILE, CHUNKS_FILE, QUERIES_FILE};
use crate::eval::{
    retention, run_eval, sweep, verify_summary, write_generation_jsonl, write_query_csv,
    write_summary_csv, EvalReport, EvalSpec, Mode, QueryOutcome,
};
use crate::generation::{context_chunks, GenerationClient, HttpChatClient, StubClient};
use crate::mechanism::{audit_geo_dp, PrivacyParams};
use crate::retrieval::{RetrievalConfig, Retriever};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_AUDIT: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "pas",
    version,
    about = "Location-private spatial retrieval with anchor tokens"
)]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for eval and sweep (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GenerationFlags {
    /// Generate answers through the configured HTTP endpoint.
    #[arg(long, conflicts_with = "stub_generation")]
    with_generation: bool,
    /// Generate answers with the offline stub.
    #[arg(long)]
    stub_generation: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic city dataset.
    GenDataset {
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: paths.dataset_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrieve for a single query and print the ranking.
    Query {
        #[arg(long, default_value = "pas")]
        mode: Mode,
        #[arg(long)]
        query_id: String,
        /// Mechanism seed (default: first configured seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[command(flatten)]
        generation: GenerationFlags,
    },
    /// Audit the anchor mechanism's geo-indistinguishability ratios on a grid.
    AuditDp {
        #[arg(long, default_value_t = 5)]
        grid_size: usize,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate all queries and write per-query and summary CSVs.
    Eval {
        #[arg(long, default_value = "pas")]
        mode: Mode,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Use mechanism seeds 0..N.
        #[arg(long)]
        seeds: Option<u64>,
        #[command(flatten)]
        generation: GenerationFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate PAS over an ε × λ grid.
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[arg(long)]
        seeds: Option<u64>,
        #[command(flatten)]
        generation: GenerationFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let cfg = match path {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<i32, Failure> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        // a pool that is already installed (repeated in-process runs) is fine
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global();
    }
    match cli.command {
        Command::GenDataset { seed, out } => {
            cfg.validate().map_err(usage)?;
            gen_dataset(&cfg, seed.unwrap_or(cfg.dataset_seed), out)
        }
        Command::Query {
            mode,
            query_id,
            seed,
            eps,
            lambda,
            generation,
        } => {
            apply_overrides(&mut cfg, eps, lambda, None);
            cfg.validate().map_err(usage)?;
            query(&cfg, mode, &query_id, seed, &generation)
        }
        Command::AuditDp {
            grid_size,
            eps,
            scale,
            out,
        } => {
            if let Some(e) = eps {
                cfg.privacy.epsilon = e;
            }
            if let Some(s) = scale {
                cfg.privacy.scale_m = s;
            }
            cfg.validate().map_err(usage)?;
            audit(&cfg, grid_size, out)
        }
        Command::Eval {
            mode,
            eps,
            lambda,
            seeds,
            generation,
            out,
        } => {
            apply_overrides(&mut cfg, eps, lambda, seeds);
            cfg.validate().map_err(usage)?;
            eval_cmd(&cfg, mode, &generation, out)
        }
        Command::Sweep {
            eps,
            lambda,
            seeds,
            generation,
            out,
        } => {
            apply_overrides(&mut cfg, None, None, seeds);
            cfg.validate().map_err(usage)?;
            for &e in &eps {
                PrivacyParams::new(e, cfg.privacy.scale_m).map_err(usage)?;
            }
            for &l in &lambda {
                RetrievalConfig {
                    lambda: l,
                    ..cfg.retrieval.clone()
                }
                .validate()
                .map_err(usage)?;
            }
            sweep_cmd(&cfg, &eps, &lambda, &generation, out)
        }
    }
}

fn apply_overrides(cfg: &mut RunConfig, eps: Option<f64>, lambda: Option<f64>, seeds: Option<u64>) {
    if let Some(e) = eps {
        cfg.privacy.epsilon = e;
    }
    if let Some(l) = lambda {
        cfg.retrieval.lambda = l;
    }
    if let Some(n) = seeds {
        cfg.seeds = (0..n).collect();
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn dataset_checksum(dir: &Path) -> Result<String, Failure> {
    let mut h = Sha256::new();
    for name in [ANCHORS_FILE, CHUNKS_FILE, QUERIES_FILE] {
        let p = dir.join(name);
        h.update(fs::read(&p).map_err(|e| runtime(format!("{}: {e}", p.display())))?);
    }
    Ok(hex::encode(h.finalize()))
}

fn gen_dataset(cfg: &RunConfig, seed: u64, out: Option<PathBuf>) -> Result<i32, Failure> {
    let dir = out.unwrap_or_else(|| cfg.paths.dataset_dir.clone());
    let ds = generate_dataset(&cfg.generator, &cfg.bins, seed).map_err(runtime)?;
    ds.validate(Some(&cfg.bins)).map_err(runtime)?;
    ds.save(&dir).map_err(runtime)?;
    let mut snapshot = cfg.clone();
    snapshot.dataset_seed = seed;
    write_file(&dir.join("run_config.json"), &snapshot.snapshot_json())?;
    println!(
        "anchors={} chunks={} queries={}",
        ds.anchors.len(),
        ds.chunks.len(),
        ds.queries.len()
    );
    println!("sha256={}", dataset_checksum(&dir)?);
    Ok(EXIT_OK)
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, Failure> {
    let dir = &cfg.paths.dataset_dir;
    if !dir.join(QUERIES_FILE).is_file() {
        return Err(usage(format!(
            "no dataset in {} (run `pas gen-dataset` first)",
            dir.display()
        )));
    }
    let ds = Dataset::load(dir, LoadMode::Lenient).map_err(usage)?;
    ds.validate(Some(&cfg.bins)).map_err(usage)?;
    Ok(ds)
}

fn build_retriever(cfg: &RunConfig) -> Result<Retriever, Failure> {
    let ds = load_dataset(cfg)?;
    let provider = cfg.embedder.build().map_err(usage)?;
    Retriever::new(
        Arc::new(ds),
        provider,
        cfg.bins.clone(),
        cfg.retrieval.clone(),
    )
    .map_err(usage)
}

fn generator_for(
    cfg: &RunConfig,
    flags: &GenerationFlags,
) -> Result<Option<Box<dyn GenerationClient>>, Failure> {
    if flags.stub_generation {
        return Ok(Some(Box::new(StubClient)));
    }
    if flags.with_generation || cfg.generation.enabled {
        let c = HttpChatClient::new(cfg.generation.http()).map_err(usage)?;
        return Ok(Some(Box::new(c)));
    }
    Ok(None)
}

fn query(
    cfg: &RunConfig,
    mode: Mode,
    query_id: &str,
    seed: Option<u64>,
    flags: &GenerationFlags,
) -> Result<i32, Failure> {
    let retriever = build_retriever(cfg)?;
    let ds = retriever.dataset();
    let (qi, q) = ds
        .queries
        .iter()
        .enumerate()
        .find(|(_, q)| q.query_id == query_id)
        .ok_or_else(|| usage(format!("unknown query id {query_id}")))?;
    println!("query: {} {:?}", q.query_id, q.raw_query);
    println!("mode: {mode}");
    let result = match mode {
        Mode::Baseline => retriever.retrieve_baseline(q).map_err(runtime)?,
        Mode::Pas => {
            let seed = seed.or_else(|| cfg.seeds.first().copied()).unwrap_or(0);
            let mut rng = crate::eval::query_rng(seed, qi);
            let params = cfg.privacy_params().map_err(usage)?;
            let out = retriever
                .retrieve_pas(q, params, &format!("seed={seed}"), &mut rng)
                .map_err(runtime)?;
            println!(
                "token: {}",
                out.result
                    .token_used
                    .as_ref()
                    .expect("pas result carries its token")
            );
            println!("candidates: {}", out.candidates);
            out.result
        }
    };
    println!(
        "{:<4} {:<8} {:>9} {:>9} {:>9}  name",
        "rank", "doc_id", "s_sem", "s_sp", "S(t)"
    );
    let chunks = ds.chunk_index();
    for (i, e) in result.entries.iter().enumerate() {
        let name = chunks
            .get(e.doc_id.as_str())
            .map(|c| c.name.as_str())
            .unwrap_or("");
        println!(
            "{:<4} {:<8} {:>9.6} {:>9.6} {:>9.6}  {}",
            i + 1,
            e.doc_id,
            e.s_sem,
            e.s_sp,
            e.s_hybrid,
            name
        );
    }
    if result.entries.is_empty() {
        println!("(no documents retrieved)");
    }
    if let Some(client) = generator_for(cfg, flags)? {
        let ctx = context_chunks(&result, ds);
        let rec = client.generate(q, &ctx, cfg.generation.temperature);
        println!("answer: {}", rec.answer);
        for c in &rec.citations {
            println!("cite: [{}] {}", c.doc_id, c.title);
        }
        if let Some(e) = &rec.parse_error {
            println!("generation error: {e}");
        }
    }
    Ok(EXIT_OK)
}

fn audit(cfg: &RunConfig, grid_size: usize, out: Option<PathBuf>) -> Result<i32, Failure> {
    if grid_size == 0 {
        return Err(usage("--grid-size must be at least 1"));
    }
    let ds = load_dataset(cfg)?;
    let params = cfg.privacy_params().map_err(usage)?;
    let grid = cfg.generator.bbox.grid(grid_size);
    let report = audit_geo_dp(&ds.anchors, params, &cfg.bins, &grid).map_err(runtime)?;
    let dir = out.unwrap_or_else(|| cfg.paths.output_dir.join("audit"));
    ensure_dir(&dir)?;
    write_file(
        &dir.join("audit_dp.json"),
        &serde_json::to_string_pretty(&report).map_err(runtime)?,
    )?;
    write_file(&dir.join("run_config.json"), &cfg.snapshot_json())?;
    println!(
        "grid={grid_size}x{grid_size} points={} pairs={} anchors={} eps={} scale_m={}",
        report.grid_points,
        report.pairs_checked,
        ds.anchors.len(),
        report.epsilon,
        report.scale_m
    );
    if report.no_pairs {
        eprintln!("warning: no pairs of distinct grid points; nothing was checked");
        return Ok(EXIT_OK);
    }
    let verdict = |ok: bool| if ok { "holds" } else { "VIOLATED" };
    println!(
        "max anchor-marginal ratio: {:.6}",
        report.max_ratio_anchor_marginal
    );
    println!(
        "eps bound: max ratio/exp(eps*d/s) = {:.6} ({})",
        report.bound_eps,
        verdict(report.eps_bound_holds)
    );
    println!(
        "2eps bound: max ratio/exp(2*eps*d/s) = {:.6} ({})",
        report.bound_2eps,
        verdict(report.two_eps_bound_holds)
    );
    println!(
        "full-token violations: {} (unbounded: {})",
        report.full_token_violation_count, report.full_token_unbounded_count
    );
    Ok(if report.two_eps_bound_holds {
        EXIT_OK
    } else {
        EXIT_AUDIT
    })
}

fn spec_for(cfg: &RunConfig, mode: Mode) -> Result<EvalSpec, Failure> {
    Ok(EvalSpec {
        mode,
        params: cfg.privacy_params().map_err(usage)?,
        seeds: cfg.seeds.clone(),
        temperature: cfg.generation.temperature,
        max_parallel: cfg.generation.max_parallel,
    })
}

fn write_tokens_jsonl(path: &Path, outcomes: &[QueryOutcome]) -> Result<(), Failure> {
    let mut s = String::new();
    for o in outcomes {
        if let Some(t) = &o.token {
            let row = serde_json::json!({"query_id": o.query_id, "seed": o.seed, "token": t});
            s.push_str(&row.to_string());
            s.push('\n');
        }
    }
    write_file(path, &s)
}

fn write_report(
    dir: &Path,
    report: &EvalReport,
    cfg: &RunConfig,
    with_generation: bool,
) -> Result<(), Failure> {
    ensure_dir(dir)?;
    let queries = dir.join("queries.csv");
    write_query_csv(&queries, &report.outcomes).map_err(runtime)?;
    verify_summary(&queries, &report.summary).map_err(runtime)?;
    write_summary_csv(&dir.join("summary.csv"), &[&report.summary]).map_err(runtime)?;
    if report.summary.mode == Mode::Pas {
        write_tokens_jsonl(&dir.join("tokens.jsonl"), &report.outcomes)?;
    }
    if with_generation {
        write_generation_jsonl(&dir.join("generations.jsonl"), &report.outcomes)
            .map_err(runtime)?;
    }
    write_file(&dir.join("run_config.json"), &cfg.snapshot_json())
}

fn summary_line(s: &crate::eval::Summary) -> String {
    let opt = |v: Option<crate::eval::Stat>| {
        v.map(|s| format!("{:.6}", s.mean))
            .unwrap_or_else(|| "-".into())
    };
    format!(
        "mode={} eps={} lambda={} k={} seeds={} rows={} recall={:.6} ndcg={:.6} f1={} citation={} ale_m={:.6}",
        s.mode,
        s.epsilon.map(|e| e.to_string()).unwrap_or_else(|| "-".into()),
        s.lambda,
        s.k,
        s.seeds,
        s.n_rows,
        s.recall.mean,
        s.ndcg.mean,
        opt(s.f1),
        opt(s.citation_strict),
        s.ale.mean
    )
}

fn eval_cmd(
    cfg: &RunConfig,
    mode: Mode,
    flags: &GenerationFlags,
    out: Option<PathBuf>,
) -> Result<i32, Failure> {
    let retriever = build_retriever(cfg)?;
    let spec = spec_for(cfg, mode)?;
    let generator = generator_for(cfg, flags)?;
    let report = run_eval(&retriever, &spec, generator.as_deref()).map_err(runtime)?;
    let dir = out.unwrap_or_else(|| {
        let name = match mode {
            Mode::Baseline => format!("eval-baseline-lambda{}", cfg.retrieval.lambda),
            Mode::Pas => format!(
                "eval-pas-eps{}-lambda{}",
                cfg.privacy.epsilon, cfg.retrieval.lambda
            ),
        };
        cfg.paths.output_dir.join(name)
    });
    write_report(&dir, &report, cfg, generator.is_some())?;
    info!("wrote {}", dir.display());
    println!("{}", summary_line(&report.summary));
    println!("output: {}", dir.display());
    Ok(EXIT_OK)
}

fn sweep_cmd(
    cfg: &RunConfig,
    eps: &[f64],
    lambdas: &[f64],
    flags: &GenerationFlags,
    out: Option<PathBuf>,
) -> Result<i32, Failure> {
    let retriever = build_retriever(cfg)?;
    let spec = spec_for(cfg, Mode::Pas)?;
    let generator = generator_for(cfg, flags)?;
    let reports = sweep(&retriever, eps, lambdas, &spec, generator.as_deref()).map_err(runtime)?;
    let dir = out.unwrap_or_else(|| cfg.paths.output_dir.join("sweep"));
    ensure_dir(&dir)?;
    for r in &reports {
        let name = format!(
            "queries-eps{}-lambda{}.csv",
            r.summary.epsilon.unwrap_or_default(),
            r.summary.lambda
        );
        let p = dir.join(name);
        write_query_csv(&p, &r.outcomes).map_err(runtime)?;
        verify_summary(&p, &r.summary).map_err(runtime)?;
    }
    let summaries: Vec<_> = reports.iter().map(|r| &r.summary).collect();
    write_summary_csv(&dir.join("sweep.csv"), &summaries).map_err(runtime)?;
    write_file(&dir.join("run_config.json"), &cfg.snapshot_json())?;

    // the baseline does not depend on ε, so one run per λ gives retention
    let mut base_by_lambda = Vec::new();
    for &l in lambdas {
        let r = retriever
            .with_config(RetrievalConfig {
                lambda: l,
                ..cfg.retrieval.clone()
            })
            .map_err(runtime)?;
        let b = run_eval(
            &r,
            &EvalSpec {
                mode: Mode::Baseline,
                ..spec.clone()
            },
            None,
        )
        .map_err(runtime)?;
        base_by_lambda.push((l, b.summary));
    }
    for s in &summaries {
        let ret = base_by_lambda
            .iter()
            .find(|(l, _)| *l == s.lambda)
            .and_then(|(_, b)| retention(s, b).recall);
        match ret {
            Some(r) => println!("{} recall_retention={r:.6}", summary_line(s)),
            None => println!("{}", summary_line(s)),
        }
    }
    if reports.len() != eps.len() * lambdas.len() {
        warn!(
            "sweep produced {} rows for a {}x{} grid",
            reports.len(),
            eps.len(),
            lambdas.len()
        );
    }
    println!("rows={}", reports.len());
    println!("output: {}", dir.display());
    Ok(EXIT_OK)
}
