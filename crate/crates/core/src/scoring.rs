//! Abstract retrieval score model.
//!
//! Scores replace the retriever's similarity function: benign samples score
//! the same in every context, while viruses and cures carry an elevated score
//! only under the malicious context of their own strain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Album, QueryContext, Sample, SampleId, SampleKind};
use crate::error::{Result, SimError};
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RetrievalMode {
    Argmax,
    TopK { k: usize, weights: Vec<f64> },
}

impl RetrievalMode {
    pub fn default_top_k() -> Self {
        RetrievalMode::TopK { k: 3, weights: vec![0.7, 0.2, 0.1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreModelParams {
    pub benign_low: f64,
    pub benign_high: f64,
    /// Virus malicious score sits this far above `benign_high`.
    pub virus_margin: f64,
    /// Cure malicious score sits at least this far above its target virus.
    pub cure_margin: f64,
    pub retrieval_mode: RetrievalMode,
    /// When set, a crafted virus also outranks benign samples in benign
    /// contexts.
    pub virus_elevates_benign_ctx: bool,
}

impl Default for ScoreModelParams {
    fn default() -> Self {
        ScoreModelParams {
            benign_low: 0.0,
            benign_high: 1.0,
            virus_margin: 0.05,
            cure_margin: 0.02,
            retrieval_mode: RetrievalMode::Argmax,
            virus_elevates_benign_ctx: false,
        }
    }
}

impl ScoreModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.benign_low.is_finite() && self.benign_high.is_finite()) {
            return Err(SimError::config("score.benign_low", "bounds must be finite"));
        }
        if !(0.0 <= self.benign_low && self.benign_low < self.benign_high) {
            return Err(SimError::config(
                "score.benign_low",
                format!("need 0 <= benign_low < benign_high, got [{}, {})", self.benign_low, self.benign_high),
            ));
        }
        if !(self.virus_margin > 0.0 && self.virus_margin.is_finite()) {
            return Err(SimError::config("score.virus_margin", "must be positive"));
        }
        if !(self.cure_margin > 0.0 && self.cure_margin.is_finite()) {
            return Err(SimError::config("score.cure_margin", "must be positive"));
        }
        if let RetrievalMode::TopK { k, weights } = &self.retrieval_mode {
            if *k == 0 {
                return Err(SimError::config("retrieval.k", "must be positive"));
            }
            if weights.len() != *k {
                return Err(SimError::config(
                    "retrieval.weights",
                    format!("expected {k} weights, got {}", weights.len()),
                ));
            }
            if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                return Err(SimError::config("retrieval.weights", "weights must be positive"));
            }
            let sum: f64 = weights.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(SimError::config("retrieval.weights", format!("weights must sum to 1, got {sum}")));
            }
        }
        Ok(())
    }

    /// Malicious score given to a freshly crafted virus.
    pub fn virus_score(&self) -> f64 {
        self.benign_high + self.virus_margin
    }
}

/// Score of `s` under `ctx`.
pub fn score(s: &Sample, ctx: QueryContext) -> f64 {
    match (ctx, &s.kind) {
        (QueryContext::MaliciousCtx(sigma), SampleKind::Virus { strain, .. }) if *strain == sigma => s.malicious_score,
        (QueryContext::MaliciousCtx(sigma), SampleKind::Cure { targets_strain }) if *targets_strain == sigma => {
            s.malicious_score
        }
        _ => s.benign_score,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalOutcome {
    pub chosen: SampleId,
    /// Position of the chosen item in the album, oldest = 0.
    pub position: usize,
    /// Items by descending score; equal scores list the newer item first.
    pub ranked: Vec<(SampleId, f64)>,
}

fn rank(album: &Album, ctx: QueryContext) -> Vec<(usize, SampleId, f64)> {
    // An S1 cure keeps its virus's benign score, so under a benign context
    // the two tie exactly. The cure wins such ties; recency decides the rest.
    let mut ranked: Vec<(usize, SampleId, f64, bool)> =
        album.items().enumerate().map(|(i, s)| (i, s.id, score(s, ctx), s.is_cure())).collect();
    ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then(b.3.cmp(&a.3)).then(b.0.cmp(&a.0)));
    ranked.into_iter().map(|(i, id, sc, _)| (i, id, sc)).collect()
}

/// Picks the sample an agent sends, from its album under `ctx`.
pub fn retrieve(
    album: &Album,
    ctx: QueryContext,
    params: &ScoreModelParams,
    rng: &mut RandomStream,
) -> Result<RetrievalOutcome> {
    if album.is_empty() {
        return Err(SimError::EmptyAlbum);
    }
    let ranked = rank(album, ctx);
    let pick = match &params.retrieval_mode {
        RetrievalMode::Argmax => 0,
        RetrievalMode::TopK { k, weights } => {
            let take = (*k).min(ranked.len());
            let total: f64 = weights[..take].iter().sum();
            let mut u = rng.gen::<f64>() * total;
            let mut pick = take - 1;
            for (i, w) in weights[..take].iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        }
    };
    let (position, chosen, _) = ranked[pick];
    Ok(RetrievalOutcome { chosen, position, ranked: ranked.into_iter().map(|(_, id, s)| (id, s)).collect() })
}

/// A benign sample with score drawn uniformly from `[benign_low, benign_high)`.
pub fn craft_benign(id: SampleId, params: &ScoreModelParams, rng: &mut RandomStream) -> Sample {
    let score = rng.gen_range(params.benign_low..params.benign_high);
    Sample::benign(id, score).expect("validated score range")
}
