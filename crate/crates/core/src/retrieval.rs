//! Candidate pruning, Monte Carlo spatial scoring and hybrid ranking.

use std::cmp::Ordering;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{satisfies_spatial, Anchor, Chunk, Dataset, DirectionConstraint, SpatialQuery};
use crate::geo::{haversine_m, DistanceBins, GeoError, GeoPoint};
use crate::mechanism::{make_token, MechanismError, PasToken, PrivacyParams};
use crate::region::{sample_region, LatentSamples, RegionError, UncertaintyRegion};
use crate::semantics::{cosine, Embedding, EmbeddingProvider, SemanticsError};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("invalid retrieval config: {0}")]
    Config(String),
    #[error("token references unknown anchor {0}")]
    UnknownAnchor(String),
    #[error("embedding for {id} has dimension {got}, provider reports {expected}")]
    EmbeddingDim {
        id: String,
        got: usize,
        expected: usize,
    },
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneMode {
    #[default]
    Distance,
    /// Use the chunks' stored anchor tags instead of recomputing distances.
    Tag,
}

/// Which outer radius enters the pruning bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RMaxMode {
    /// Upper edge of the token's own ring.
    #[default]
    Token,
    /// The distance cap, whatever the token's ring.
    Global,
}

/// Text that is embedded for the query side of the semantic score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryText {
    /// Category and required tags.
    #[default]
    Semantic,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub lambda: f64,
    pub top_k: usize,
    /// Monte Carlo samples per query.
    pub samples: usize,
    pub prune_mode: PruneMode,
    pub r_max: RMaxMode,
    pub query_text: QueryText,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            lambda: 0.8,
            top_k: 5,
            samples: 1000,
            prune_mode: PruneMode::Distance,
            r_max: RMaxMode::Token,
            query_text: QueryText::Semantic,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(RetrievalError::Config(format!(
                "lambda {} outside [0, 1]",
                self.lambda
            )));
        }
        if self.top_k == 0 {
            return Err(RetrievalError::Config("top_k must be positive".into()));
        }
        if self.samples == 0 {
            return Err(RetrievalError::Config("samples must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub doc_id: String,
    pub s_sem: f64,
    pub s_sp: f64,
    pub s_hybrid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub entries: Vec<RankedEntry>,
    /// `None` for the baseline.
    pub token_used: Option<PasToken>,
}

impl RankedResult {
    pub fn doc_ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.doc_id.clone()).collect()
    }
}

/// Outer radius used in the pruning bound for `token`.
pub fn r_max(token: &PasToken, bins: &DistanceBins, mode: RMaxMode) -> Result<f64, RetrievalError> {
    Ok(match mode {
        RMaxMode::Token => bins.ring(token.dist_bin)?.1,
        RMaxMode::Global => bins.cap(),
    })
}

/// Indices of chunks that can score above zero for a user somewhere in the
/// token's region: anything within `radius_m + r_max` of the anchor.
pub fn prune_candidates(
    token: &PasToken,
    chunks: &[Chunk],
    anchors: &[Anchor],
    radius_m: f64,
    bins: &DistanceBins,
    prune_mode: PruneMode,
    r_max_mode: RMaxMode,
) -> Result<Vec<usize>, RetrievalError> {
    let anchor = anchors
        .iter()
        .find(|a| a.id == token.anchor_id)
        .ok_or_else(|| RetrievalError::UnknownAnchor(token.anchor_id.clone()))?;
    let bound = radius_m + r_max(token, bins, r_max_mode)?;
    let keep: Vec<usize> = match prune_mode {
        PruneMode::Distance => chunks
            .iter()
            .enumerate()
            .filter(|(_, c)| haversine_m(anchor.loc, c.loc) <= bound)
            .map(|(i, _)| i)
            .collect(),
        PruneMode::Tag => chunks
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                c.anchor_tags
                    .iter()
                    .any(|t| t.anchor_id == anchor.id && t.dist_m <= bound)
            })
            .map(|(i, _)| i)
            .collect(),
    };
    Ok(keep)
}

/// Fraction of latent samples from which `t` satisfies the query's radius and
/// direction constraint.
pub fn spatial_score_mc(
    t: GeoPoint,
    samples: &LatentSamples,
    radius_m: f64,
    dir: DirectionConstraint,
) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .points
        .iter()
        .filter(|&&x| satisfies_spatial(x, t, radius_m, dir))
        .count();
    hits as f64 / samples.len() as f64
}

pub fn spatial_score_true(
    t: GeoPoint,
    u: GeoPoint,
    radius_m: f64,
    dir: DirectionConstraint,
) -> f64 {
    if satisfies_spatial(u, t, radius_m, dir) {
        1.0
    } else {
        0.0
    }
}

fn rank_order(a: &RankedEntry, b: &RankedEntry) -> Ordering {
    b.s_hybrid
        .total_cmp(&a.s_hybrid)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Combines `(doc_id, s_sem, s_sp)` triples as `λ·s_sem + (1−λ)·s_sp` and
/// keeps the best `top_k`.
pub fn hybrid_rank<S: Into<String>>(
    scored: impl IntoIterator<Item = (S, f64, f64)>,
    lambda: f64,
    top_k: usize,
) -> Vec<RankedEntry> {
    let mut entries: Vec<RankedEntry> = scored
        .into_iter()
        .map(|(id, s_sem, s_sp)| RankedEntry {
            doc_id: id.into(),
            s_sem,
            s_sp,
            s_hybrid: lambda * s_sem + (1.0 - lambda) * s_sp,
        })
        .collect();
    entries.sort_by(rank_order);
    entries.truncate(top_k);
    entries
}

/// Everything a PAS retrieval produced. The region and samples are what an
/// observer of the token can reconstruct; they are kept for ALE estimation.
#[derive(Debug, Clone)]
pub struct PasRetrieval {
    pub result: RankedResult,
    pub region: UncertaintyRegion,
    pub samples: LatentSamples,
    pub candidates: usize,
}

/// A dataset with its chunk embeddings computed once.
#[derive(Clone)]
pub struct Retriever {
    dataset: Arc<Dataset>,
    provider: Arc<dyn EmbeddingProvider>,
    chunk_embeddings: Arc<Vec<Embedding>>,
    bins: DistanceBins,
    cfg: RetrievalConfig,
}

impl std::fmt::Debug for Retriever {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Retriever")
            .field("chunks", &self.dataset.chunks.len())
            .field("provider", &self.provider.tag())
            .field("cfg", &self.cfg)
            .finish()
    }
}

impl Retriever {
    pub fn new(
        dataset: Arc<Dataset>,
        provider: Arc<dyn EmbeddingProvider>,
        bins: DistanceBins,
        cfg: RetrievalConfig,
    ) -> Result<Self, RetrievalError> {
        cfg.validate()?;
        let expected = provider.dim();
        let mut chunk_embeddings = Vec::with_capacity(dataset.chunks.len());
        for c in &dataset.chunks {
            let e = provider.embed_document(&c.doc_id, &c.semantic_text())?;
            if e.dim() != expected {
                return Err(RetrievalError::EmbeddingDim {
                    id: c.doc_id.clone(),
                    got: e.dim(),
                    expected,
                });
            }
            chunk_embeddings.push(e);
        }
        Ok(Self {
            dataset,
            provider,
            chunk_embeddings: Arc::new(chunk_embeddings),
            bins,
            cfg,
        })
    }

    /// Same dataset and embeddings under a different configuration.
    pub fn with_config(&self, cfg: RetrievalConfig) -> Result<Self, RetrievalError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            ..self.clone()
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn config(&self) -> &RetrievalConfig {
        &self.cfg
    }

    pub fn bins(&self) -> &DistanceBins {
        &self.bins
    }

    pub fn provider_tag(&self) -> String {
        self.provider.tag()
    }

    pub fn query_embedding(&self, query: &SpatialQuery) -> Result<Embedding, RetrievalError> {
        let text = match self.cfg.query_text {
            QueryText::Semantic => query.semantic_text(),
            QueryText::Raw => query.raw_query.clone(),
        };
        let e = self.provider.embed(&text)?;
        if e.dim() != self.provider.dim() {
            return Err(RetrievalError::EmbeddingDim {
                id: query.query_id.clone(),
                got: e.dim(),
                expected: self.provider.dim(),
            });
        }
        Ok(e)
    }

    /// Ranks `candidates` (chunk indices) given their spatial scores.
    pub fn rank(
        &self,
        query: &SpatialQuery,
        candidates: &[usize],
        spatial: &[f64],
        token_used: Option<PasToken>,
    ) -> Result<RankedResult, RetrievalError> {
        assert_eq!(candidates.len(), spatial.len());
        let q = self.query_embedding(query)?;
        let mut scored = Vec::with_capacity(candidates.len());
        for (&i, &s_sp) in candidates.iter().zip(spatial) {
            let s_sem = cosine(&q, &self.chunk_embeddings[i])?;
            scored.push((self.dataset.chunks[i].doc_id.as_str(), s_sem, s_sp));
        }
        Ok(RankedResult {
            entries: hybrid_rank(scored, self.cfg.lambda, self.cfg.top_k),
            token_used,
        })
    }

    /// Privatizes the query location and retrieves against the token only.
    pub fn retrieve_pas<R: Rng + ?Sized>(
        &self,
        query: &SpatialQuery,
        params: PrivacyParams,
        run: &str,
        rng: &mut R,
    ) -> Result<PasRetrieval, RetrievalError> {
        let token = make_token(
            query.true_loc,
            &self.dataset.anchors,
            params,
            &self.bins,
            run,
            rng,
        )?;
        self.retrieve_with_token(query, token, rng)
    }

    /// Retrieval given an already released token. `query.true_loc` is not read.
    pub fn retrieve_with_token<R: Rng + ?Sized>(
        &self,
        query: &SpatialQuery,
        token: PasToken,
        rng: &mut R,
    ) -> Result<PasRetrieval, RetrievalError> {
        let region = UncertaintyRegion::from_token(&token, &self.dataset.anchors, &self.bins)?;
        let samples = sample_region(&region, self.cfg.samples, rng)?;
        let candidates = prune_candidates(
            &token,
            &self.dataset.chunks,
            &self.dataset.anchors,
            query.radius_m,
            &self.bins,
            self.cfg.prune_mode,
            self.cfg.r_max,
        )?;
        let spatial: Vec<f64> = candidates
            .iter()
            .map(|&i| {
                spatial_score_mc(
                    self.dataset.chunks[i].loc,
                    &samples,
                    query.radius_m,
                    query.direction_constraint,
                )
            })
            .collect();
        let n = candidates.len();
        let result = self.rank(query, &candidates, &spatial, Some(token))?;
        Ok(PasRetrieval {
            result,
            region,
            samples,
            candidates: n,
        })
    }

    /// Non-private retrieval at the true location.
    pub fn retrieve_baseline(&self, query: &SpatialQuery) -> Result<RankedResult, RetrievalError> {
        let u = query.true_loc;
        let candidates: Vec<usize> = self
            .dataset
            .chunks
            .iter()
            .enumerate()
            .filter(|(_, c)| haversine_m(u, c.loc) <= query.radius_m)
            .map(|(i, _)| i)
            .collect();
        let spatial: Vec<f64> = candidates
            .iter()
            .map(|&i| {
                spatial_score_true(
                    self.dataset.chunks[i].loc,
                    u,
                    query.radius_m,
                    query.direction_constraint,
                )
            })
            .collect();
        self.rank(query, &candidates, &spatial, None)
    }
}
