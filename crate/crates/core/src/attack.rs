//! Virus crafting, patient-zero seeding and the adaptive attacker.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    AgentId, Album, AnswerClass, ChatRecord, Direction, PayloadTag, QuestionClass, Sample, SampleId, SampleKind, Strain,
};
use crate::engine::SimState;
use crate::error::{Result, SimError};
use crate::metrics::{classify, CompartmentLabel};
use crate::scoring::{craft_benign, ScoreModelParams};

/// Strain targeted by the adaptive attacker.
pub const PRIMARY_STRAIN: Strain = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub trigger_round: u32,
    /// Probability that the constrained re-optimisation beats the cure.
    pub p_feasible: f64,
    pub margin: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig { trigger_round: 65, p_feasible: 0.5, margin: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Initially infected agents per strain.
    pub r0_count: usize,
    pub strain_count: u16,
    pub adaptive: Option<AdaptiveConfig>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig { r0_count: 1, strain_count: 1, adaptive: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOutcome {
    pub round: u32,
    pub success: bool,
    /// Highest same-strain cure score observed by the attacker.
    pub target_cure_score: f64,
    pub new_virus: Sample,
}

/// Turns the benign `base` into a virus of `strain`.
pub fn craft_virus(id: SampleId, strain: Strain, params: &ScoreModelParams, base: &Sample) -> Result<Sample> {
    if base.kind != SampleKind::Benign {
        return Err(SimError::NotBenign(base.id.0));
    }
    let malicious = params.virus_score();
    let benign = if params.virus_elevates_benign_ctx { malicious } else { base.benign_score };
    Sample::virus(id, strain, PayloadTag::for_strain(strain), benign, malicious, base.benign_score)
}

/// Lowest-scoring benign item of an album: the attacker's base image.
pub fn stealth_base(album: &Album) -> Option<&Sample> {
    album.items().filter(|s| s.is_benign()).min_by(|a, b| a.benign_score.total_cmp(&b.benign_score))
}

fn seed_record(round: u32, agent: AgentId, strain: Strain, sample: SampleId) -> ChatRecord {
    ChatRecord {
        round,
        partner: agent,
        direction: Direction::AsResponder,
        question: QuestionClass::MaliciousQ(strain),
        sample,
        answer: AnswerClass::MaliciousA(strain),
    }
}

/// Plants one virus per strain in `r0_count` random non-Cowpox agents each,
/// together with a malicious history record so they start infected.
///
/// Returns the seeded agents in seeding order; the first is the agent the
/// attacker keeps control of.
pub fn seed_patient_zero(state: &mut SimState, cfg: &AttackConfig, params: &ScoreModelParams) -> Result<Vec<AgentId>> {
    let needed = cfg.r0_count * cfg.strain_count as usize;
    if needed == 0 {
        return Ok(Vec::new());
    }
    let mut candidates: Vec<AgentId> = state.agents.iter().filter(|a| !a.is_cowpox()).map(|a| a.id).collect();
    if needed > candidates.len() {
        return Err(SimError::config(
            "r0_count",
            format!("{needed} initial carriers requested but only {} non-Cowpox agents exist", candidates.len()),
        ));
    }
    let (chosen, _) = candidates.partial_shuffle(&mut state.streams.attack, needed);
    let chosen = chosen.to_vec();

    for (strain, group) in chosen.chunks(cfg.r0_count).enumerate() {
        let strain = strain as Strain;
        let lead = &state.agents[group[0].index()];
        let base = match stealth_base(&lead.album) {
            Some(b) => b.clone(),
            None => {
                let id = state.registry.next_id();
                state.registry.register(craft_benign(id, params, &mut state.streams.attack))
            }
        };
        let id = state.registry.next_id();
        let virus = state.registry.register(craft_virus(id, strain, params, &base)?);
        state.original_viruses.push(virus.id);
        for &carrier in group {
            let agent = &mut state.agents[carrier.index()];
            agent.album.insert(virus.clone());
            agent.history.push(seed_record(state.round, carrier, strain, virus.id));
            agent.mark_infected();
        }
    }
    state.attacker = chosen.first().copied();
    Ok(chosen)
}

/// Re-optimises a virus against the strongest cure in circulation and plants
/// it in the attacker's agent.
///
/// Returns `None` when no cure for the attacked strain exists yet; the
/// attempt is then retried on the next round.
pub fn adaptive_attack(
    state: &mut SimState,
    cfg: &AdaptiveConfig,
    params: &ScoreModelParams,
    round: u32,
) -> Result<Option<AdaptiveOutcome>> {
    let Some(attacker) = state.attacker else {
        return Ok(None);
    };
    let best_cure = state
        .agents
        .iter()
        .flat_map(|a| a.album.items())
        .filter(|s| s.cure_strain() == Some(PRIMARY_STRAIN))
        .map(|s| s.malicious_score)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |m| m.max(x))));
    let Some(target) = best_cure else {
        log::debug!("round {round}: no cure in circulation, adaptive attack deferred");
        return Ok(None);
    };

    let success = state.streams.attack.gen_bool(cfg.p_feasible);
    let score = if success { target + cfg.margin } else { (target - cfg.margin).max(0.0) };

    let base = match stealth_base(&state.agents[attacker.index()].album) {
        Some(b) => b.clone(),
        None => {
            let id = state.registry.next_id();
            state.registry.register(craft_benign(id, params, &mut state.streams.attack))
        }
    };
    let id = state.registry.next_id();
    let mut virus = craft_virus(id, PRIMARY_STRAIN, params, &base)?;
    virus.malicious_score = score;
    if params.virus_elevates_benign_ctx {
        virus.benign_score = score;
    }
    let virus = state.registry.register(virus);

    let agent = &mut state.agents[attacker.index()];
    agent.album.insert(virus.clone());
    agent.history.push(seed_record(round, attacker, PRIMARY_STRAIN, virus.id));
    if classify(agent) == CompartmentLabel::Infected {
        agent.mark_infected();
    }
    log::debug!("round {round}: adaptive virus {} (success={success}, score={score:.4})", virus.id);
    Ok(Some(AdaptiveOutcome { round, success, target_cure_score: target, new_virus: virus }))
}
