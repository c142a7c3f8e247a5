//! Retrieval and generation metrics, evaluation runs and sweeps.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SpatialQuery;
use crate::generation::{reference_answer, GenerationClient, GenerationRecord};
use crate::geo::haversine_m;
use crate::mechanism::{MechanismError, PasToken, PrivacyParams};
use crate::region::centroid;
use crate::retrieval::{RetrievalConfig, RetrievalError, Retriever};
use crate::semantics::tokenize;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query {0} has an empty ground truth")]
    EmptyGroundTruth(String),
    #[error("dataset has no queries")]
    NoQueries,
    #[error("PAS mode needs at least one seed")]
    NoSeeds,
    #[error("empty sweep grid")]
    EmptyGrid,
    #[error("{query_id}: {source}")]
    Retrieval {
        query_id: String,
        #[source]
        source: RetrievalError,
    },
    #[error(transparent)]
    Config(#[from] RetrievalError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("{path}: {message}")]
    Recompute { path: PathBuf, message: String },
}

fn check_gt(ground_truth: &[String]) -> Result<(), EvalError> {
    if ground_truth.is_empty() {
        Err(EvalError::EmptyGroundTruth(String::new()))
    } else {
        Ok(())
    }
}

pub fn recall_at_k(
    retrieved: &[String],
    ground_truth: &[String],
    k: usize,
) -> Result<f64, EvalError> {
    check_gt(ground_truth)?;
    let hits = retrieved
        .iter()
        .take(k)
        .filter(|d| ground_truth.contains(d))
        .count();
    Ok(hits as f64 / ground_truth.len() as f64)
}

/// Binary-relevance nDCG; the ideal ranking puts `min(|GT|, k)` relevant
/// documents first.
pub fn ndcg_at_k(
    retrieved: &[String],
    ground_truth: &[String],
    k: usize,
) -> Result<f64, EvalError> {
    check_gt(ground_truth)?;
    let gain = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let dcg: f64 = retrieved
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, d)| ground_truth.contains(d))
        .map(|(i, _)| gain(i))
        .sum();
    let idcg: f64 = (0..ground_truth.len().min(k)).map(gain).sum();
    Ok(if idcg > 0.0 { dcg / idcg } else { 0.0 })
}

/// Bag-of-tokens F1. Either side without tokens scores 0.
pub fn f1_overlap(generated: &str, reference: &str) -> f64 {
    let (g, r) = (tokenize(generated), tokenize(reference));
    if g.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &r {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &g {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / g.len() as f64;
    let rc = overlap as f64 / r.len() as f64;
    2.0 * p * rc / (p + rc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CitationScore {
    /// Cited and both retrieved and relevant.
    pub strict: f64,
    /// Cited and retrieved.
    pub grounded: f64,
    /// Nothing was cited; both scores are 0.
    pub empty: bool,
}

pub fn citation_correctness(
    citations: &[String],
    context: &[String],
    ground_truth: &[String],
) -> CitationScore {
    if citations.is_empty() {
        return CitationScore {
            strict: 0.0,
            grounded: 0.0,
            empty: true,
        };
    }
    let n = citations.len() as f64;
    let grounded = citations.iter().filter(|c| context.contains(c)).count() as f64;
    let strict = citations
        .iter()
        .filter(|c| context.contains(c) && ground_truth.contains(c))
        .count() as f64;
    CitationScore {
        strict: strict / n,
        grounded: grounded / n,
        empty: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Pas,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::Pas => "pas",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Mode::Baseline),
            "pas" => Ok(Mode::Pas),
            other => Err(format!("unknown mode {other:?} (expected baseline or pas)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryOutcome {
    pub query_id: String,
    pub mode: Mode,
    pub epsilon: Option<f64>,
    pub lambda: f64,
    pub seed: Option<u64>,
    pub retrieved: Vec<String>,
    pub ground_truth: Vec<String>,
    pub recall: f64,
    pub ndcg: f64,
    /// Present iff PAS mode.
    pub ale_m: Option<f64>,
    pub token: Option<PasToken>,
    pub gen: Option<GenerationRecord>,
    pub f1: Option<f64>,
    pub citation: Option<CitationScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation over rows divided by √rows.
    pub stderr: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self {
                mean: 0.0,
                stderr: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub retriever: String,
    pub mode: Mode,
    pub epsilon: Option<f64>,
    pub lambda: f64,
    pub k: usize,
    pub samples: usize,
    pub seeds: usize,
    pub n_queries: usize,
    pub n_rows: usize,
    pub recall: Stat,
    pub ndcg: Stat,
    pub f1: Option<Stat>,
    pub citation_strict: Option<Stat>,
    pub citation_grounded: Option<Stat>,
    /// 0 in baseline mode.
    pub ale: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub summary: Summary,
    pub outcomes: Vec<QueryOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSpec {
    pub mode: Mode,
    pub params: PrivacyParams,
    /// Mechanism seeds; ignored in baseline mode.
    pub seeds: Vec<u64>,
    pub temperature: f64,
    /// In-flight generation calls.
    pub max_parallel: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            mode: Mode::Pas,
            params: PrivacyParams::default(),
            seeds: (0..5).collect(),
            temperature: crate::generation::DEFAULT_TEMPERATURE,
            max_parallel: crate::generation::DEFAULT_MAX_PARALLEL,
        }
    }
}

/// The random source for one (seed, query) cell. Independent of scheduling.
pub fn query_rng(seed: u64, query_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(query_index as u64);
    rng
}

fn evaluate_one(
    retriever: &Retriever,
    spec: &EvalSpec,
    qi: usize,
    q: &SpatialQuery,
    seed: Option<u64>,
) -> Result<QueryOutcome, EvalError> {
    let k = retriever.config().top_k;
    let wrap = |source| EvalError::Retrieval {
        query_id: q.query_id.clone(),
        source,
    };
    let (result, ale_m) = match (spec.mode, seed) {
        (Mode::Pas, Some(seed)) => {
            let mut rng = query_rng(seed, qi);
            let out = retriever
                .retrieve_pas(q, spec.params, &format!("seed={seed}"), &mut rng)
                .map_err(wrap)?;
            let ale = haversine_m(q.true_loc, centroid(&out.samples));
            (out.result, Some(ale))
        }
        _ => (retriever.retrieve_baseline(q).map_err(wrap)?, None),
    };
    let retrieved = result.doc_ids();
    let gt_err = |_| EvalError::EmptyGroundTruth(q.query_id.clone());
    Ok(QueryOutcome {
        query_id: q.query_id.clone(),
        mode: spec.mode,
        epsilon: (spec.mode == Mode::Pas).then_some(spec.params.epsilon),
        lambda: retriever.config().lambda,
        seed,
        recall: recall_at_k(&retrieved, &q.ground_truth, k).map_err(gt_err)?,
        ndcg: ndcg_at_k(&retrieved, &q.ground_truth, k).map_err(gt_err)?,
        retrieved,
        ground_truth: q.ground_truth.clone(),
        ale_m,
        token: result.token_used,
        gen: None,
        f1: None,
        citation: None,
    })
}

fn attach_generation(
    retriever: &Retriever,
    spec: &EvalSpec,
    client: &dyn GenerationClient,
    outcomes: &mut [QueryOutcome],
) -> Result<(), EvalError> {
    let ds = retriever.dataset();
    let by_id: HashMap<&str, &SpatialQuery> = ds
        .queries
        .iter()
        .map(|q| (q.query_id.as_str(), q))
        .collect();
    let chunks = ds.chunk_index();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.max_parallel.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    pool.install(|| {
        outcomes.par_iter_mut().for_each(|o| {
            let q = by_id[o.query_id.as_str()];
            let context: Vec<_> = o
                .retrieved
                .iter()
                .filter_map(|id| chunks.get(id.as_str()).copied())
                .collect();
            let rec = client.generate(q, &context, spec.temperature);
            o.f1 = Some(f1_overlap(&rec.answer, &reference_answer(q, ds)));
            o.citation = Some(citation_correctness(
                &rec.cited_ids(),
                &o.retrieved,
                &o.ground_truth,
            ));
            o.gen = Some(rec);
        })
    });
    Ok(())
}

pub fn summarize(retriever: &Retriever, spec: &EvalSpec, outcomes: &[QueryOutcome]) -> Summary {
    let col = |f: &dyn Fn(&QueryOutcome) -> Option<f64>| -> Option<Stat> {
        let v: Option<Vec<f64>> = outcomes.iter().map(f).collect();
        v.filter(|v| !v.is_empty()).map(|v| Stat::of(&v))
    };
    let cfg: &RetrievalConfig = retriever.config();
    let pas = spec.mode == Mode::Pas;
    Summary {
        retriever: retriever.provider_tag(),
        mode: spec.mode,
        epsilon: pas.then_some(spec.params.epsilon),
        lambda: cfg.lambda,
        k: cfg.top_k,
        samples: cfg.samples,
        seeds: if pas { spec.seeds.len() } else { 0 },
        n_queries: retriever.dataset().queries.len(),
        n_rows: outcomes.len(),
        recall: col(&|o| Some(o.recall)).unwrap_or(Stat {
            mean: 0.0,
            stderr: 0.0,
        }),
        ndcg: col(&|o| Some(o.ndcg)).unwrap_or(Stat {
            mean: 0.0,
            stderr: 0.0,
        }),
        f1: col(&|o| o.f1),
        citation_strict: col(&|o| o.citation.map(|c| c.strict)),
        citation_grounded: col(&|o| o.citation.map(|c| c.grounded)),
        ale: col(&|o| Some(o.ale_m.unwrap_or(0.0))).unwrap_or(Stat {
            mean: 0.0,
            stderr: 0.0,
        }),
    }
}

/// Evaluates every query; in PAS mode once per seed. Rows are ordered by seed,
/// then by query.
pub fn run_eval(
    retriever: &Retriever,
    spec: &EvalSpec,
    generator: Option<&dyn GenerationClient>,
) -> Result<EvalReport, EvalError> {
    let queries = &retriever.dataset().queries;
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    if spec.mode == Mode::Pas && spec.seeds.is_empty() {
        return Err(EvalError::NoSeeds);
    }
    let cells: Vec<(Option<u64>, usize)> = match spec.mode {
        Mode::Baseline => (0..queries.len()).map(|i| (None, i)).collect(),
        Mode::Pas => spec
            .seeds
            .iter()
            .flat_map(|&s| (0..queries.len()).map(move |i| (Some(s), i)))
            .collect(),
    };
    let mut outcomes = cells
        .par_iter()
        .map(|&(seed, qi)| evaluate_one(retriever, spec, qi, &queries[qi], seed))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(client) = generator {
        attach_generation(retriever, spec, client, &mut outcomes)?;
    }
    let summary = summarize(retriever, spec, &outcomes);
    Ok(EvalReport { summary, outcomes })
}

/// One report per (ε, λ), ε-major.
pub fn sweep(
    retriever: &Retriever,
    epsilons: &[f64],
    lambdas: &[f64],
    base: &EvalSpec,
    generator: Option<&dyn GenerationClient>,
) -> Result<Vec<EvalReport>, EvalError> {
    if epsilons.is_empty() || lambdas.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let mut out = Vec::with_capacity(epsilons.len() * lambdas.len());
    for &eps in epsilons {
        let params = PrivacyParams::new(eps, base.params.scale_m)?;
        for &lambda in lambdas {
            let r = retriever.with_config(RetrievalConfig {
                lambda,
                ..retriever.config().clone()
            })?;
            let spec = EvalSpec {
                params,
                ..base.clone()
            };
            out.push(run_eval(&r, &spec, generator)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Retention {
    pub recall: Option<f64>,
    pub ndcg: Option<f64>,
    pub f1: Option<f64>,
    pub citation: Option<f64>,
}

/// PAS means divided by baseline means; `None` where the baseline mean is 0.
pub fn retention(pas: &Summary, baseline: &Summary) -> Retention {
    let ratio = |a: Option<Stat>, b: Option<Stat>| match (a, b) {
        (Some(a), Some(b)) if b.mean != 0.0 => Some(a.mean / b.mean),
        _ => None,
    };
    Retention {
        recall: ratio(Some(pas.recall), Some(baseline.recall)),
        ndcg: ratio(Some(pas.ndcg), Some(baseline.ndcg)),
        f1: ratio(pas.f1, baseline.f1),
        citation: ratio(pas.citation_strict, baseline.citation_strict),
    }
}

pub const QUERY_CSV_HEADER: [&str; 11] = [
    "query_id",
    "mode",
    "epsilon",
    "lambda",
    "seed",
    "recall_at_k",
    "ndcg_at_k",
    "f1",
    "citation_strict",
    "citation_grounded",
    "ale_m",
];

pub const SUMMARY_CSV_HEADER: [&str; 21] = [
    "retriever",
    "mode",
    "epsilon",
    "lambda",
    "k",
    "samples",
    "seeds",
    "n_queries",
    "n_rows",
    "recall_mean",
    "recall_se",
    "ndcg_mean",
    "ndcg_se",
    "f1_mean",
    "f1_se",
    "citation_strict_mean",
    "citation_strict_se",
    "citation_grounded_mean",
    "citation_grounded_se",
    "ale_mean",
    "ale_se",
];

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn opt6(v: Option<f64>) -> String {
    v.map(f6).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> EvalError + '_ {
    move |source| EvalError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_query_csv(path: &Path, outcomes: &[QueryOutcome]) -> Result<(), EvalError> {
    let e = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&e)?;
    w.write_record(QUERY_CSV_HEADER).map_err(&e)?;
    for o in outcomes {
        w.write_record([
            o.query_id.clone(),
            o.mode.to_string(),
            opt6(o.epsilon),
            f6(o.lambda),
            o.seed.map(|s| s.to_string()).unwrap_or_default(),
            f6(o.recall),
            f6(o.ndcg),
            opt6(o.f1),
            opt6(o.citation.map(|c| c.strict)),
            opt6(o.citation.map(|c| c.grounded)),
            f6(o.ale_m.unwrap_or(0.0)),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn summary_record(s: &Summary) -> Vec<String> {
    let pair = |st: Option<Stat>| match st {
        Some(st) => [f6(st.mean), f6(st.stderr)],
        None => [String::new(), String::new()],
    };
    let mut r = vec![
        s.retriever.clone(),
        s.mode.to_string(),
        opt6(s.epsilon),
        f6(s.lambda),
        s.k.to_string(),
        s.samples.to_string(),
        s.seeds.to_string(),
        s.n_queries.to_string(),
        s.n_rows.to_string(),
    ];
    for st in [
        Some(s.recall),
        Some(s.ndcg),
        s.f1,
        s.citation_strict,
        s.citation_grounded,
        Some(s.ale),
    ] {
        r.extend(pair(st));
    }
    r
}

/// Writes one row per summary. Used for both single runs and sweeps.
pub fn write_summary_csv(path: &Path, summaries: &[&Summary]) -> Result<(), EvalError> {
    let e = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&e)?;
    w.write_record(SUMMARY_CSV_HEADER).map_err(&e)?;
    for s in summaries {
        w.write_record(summary_record(s)).map_err(&e)?;
    }
    w.flush().map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Generation records, one JSON object per outcome that has one.
pub fn write_generation_jsonl(path: &Path, outcomes: &[QueryOutcome]) -> Result<(), EvalError> {
    let io = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for o in outcomes {
        if let Some(g) = &o.gen {
            let row = serde_json::json!({
                "query_id": o.query_id,
                "seed": o.seed,
                "record": g,
            });
            writeln!(f, "{row}").map_err(io)?;
        }
    }
    f.flush().map_err(io)
}

/// Column means recomputed from a per-query CSV, keyed by column name. Empty
/// cells are skipped; a column with no values is absent.
pub fn means_from_query_csv(path: &Path) -> Result<HashMap<String, f64>, EvalError> {
    let e = csv_err(path);
    let mut r = csv::Reader::from_path(path).map_err(&e)?;
    let headers = r.headers().map_err(&e)?.clone();
    let metric_cols = [
        "recall_at_k",
        "ndcg_at_k",
        "f1",
        "citation_strict",
        "citation_grounded",
        "ale_m",
    ];
    let mut sums: HashMap<String, (f64, usize)> = HashMap::new();
    for rec in r.records() {
        let rec = rec.map_err(&e)?;
        for (h, v) in headers.iter().zip(rec.iter()) {
            if !metric_cols.contains(&h) || v.is_empty() {
                continue;
            }
            let x: f64 = v.parse().map_err(|_| EvalError::Recompute {
                path: path.to_path_buf(),
                message: format!("column {h}: {v:?} is not a number"),
            })?;
            let s = sums.entry(h.to_string()).or_default();
            s.0 += x;
            s.1 += 1;
        }
    }
    Ok(sums
        .into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect())
}

/// Checks that a summary agrees with the per-query CSV it was computed from,
/// up to the rounding of 6-decimal output.
pub fn verify_summary(path: &Path, summary: &Summary) -> Result<(), EvalError> {
    let means = means_from_query_csv(path)?;
    let tol = 1e-6 * (1.0 + summary.ale.mean.abs());
    let expect = [
        ("recall_at_k", Some(summary.recall.mean)),
        ("ndcg_at_k", Some(summary.ndcg.mean)),
        ("f1", summary.f1.map(|s| s.mean)),
        ("citation_strict", summary.citation_strict.map(|s| s.mean)),
        (
            "citation_grounded",
            summary.citation_grounded.map(|s| s.mean),
        ),
        ("ale_m", Some(summary.ale.mean)),
    ];
    for (col, want) in expect {
        match (want, means.get(col)) {
            (None, None) => {}
            (Some(w), Some(&got)) if (w - got).abs() <= tol => {}
            (w, got) => {
                return Err(EvalError::Recompute {
                    path: path.to_path_buf(),
                    message: format!("{col}: summary {w:?} vs rows {got:?}"),
                })
            }
        }
    }
    Ok(())
}
