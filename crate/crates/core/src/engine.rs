//! Round scheduler: group split, pairing, retrieval, question and answer
//! resolution, storage, and the per-round event log.
//!
//! Rounds are numbered from 1. Row 0 of the metrics table describes the
//! seeded initial state. Within a round the order is: pending cures land,
//! the adaptive attacker acts (from its trigger round on), compartments are
//! snapshotted, then each pair exchanges once.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{adaptive_attack, seed_patient_zero, AdaptiveOutcome, AttackConfig};
use crate::defense::{apply_pending_cures, cowpox_hook, CureStrategy, DefenseSettings, DetectionEvent, DetectorParams};
use crate::domain::{
    derive_context, Agent, AgentId, AgentRole, AnswerClass, ChatRecord, Direction, KindTag, QuestionClass, Sample,
    SampleId,
};
use crate::error::{Result, SimError};
use crate::metrics::{classify, CompartmentLabel, MetricsRow};
use crate::rng::{RandomStream, Streams};
use crate::scoring::{craft_benign, retrieve, ScoreModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Population size N (even, at least 2).
    pub agents: usize,
    pub rounds: u32,
    pub album_size: usize,
    pub history_len: usize,
    /// Number of Cowpox agents, placed uniformly at random.
    pub kappa: usize,
    /// Explicit Cowpox placement; overrides `kappa` when set.
    pub cowpox_ids: Option<Vec<u32>>,
    /// Probability that a virus elicits the malicious answer.
    pub p_path: f64,
    pub score: ScoreModelParams,
    pub detector: DetectorParams,
    pub strategy: CureStrategy,
    pub cure_delay_rounds: u32,
    /// Capacity of each Cowpox agent's benign bank.
    pub bank_capacity: usize,
    pub attack: AttackConfig,
    pub seed: u64,
    /// Keep the full event log in the run output.
    pub record_events: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            agents: 128,
            rounds: 64,
            album_size: 10,
            history_len: 3,
            kappa: 4,
            cowpox_ids: None,
            p_path: 1.0,
            score: ScoreModelParams::default(),
            detector: DetectorParams::default(),
            strategy: CureStrategy::default(),
            cure_delay_rounds: 0,
            bank_capacity: 32,
            attack: AttackConfig::default(),
            seed: 0,
            record_events: false,
        }
    }
}

impl EngineConfig {
    /// Cowpox count after applying `cowpox_ids`.
    pub fn cowpox_count(&self) -> usize {
        self.cowpox_ids.as_ref().map_or(self.kappa, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents < 2 || !self.agents.is_multiple_of(2) {
            return Err(SimError::config("N", format!("must be even and at least 2, got {}", self.agents)));
        }
        if self.agents > u32::MAX as usize {
            return Err(SimError::config("N", "too large"));
        }
        if self.rounds == 0 {
            return Err(SimError::config("rounds", "must be positive"));
        }
        if self.album_size == 0 {
            return Err(SimError::config("album_size", "must be positive"));
        }
        if self.history_len == 0 {
            return Err(SimError::config("history_len", "must be positive"));
        }
        if self.kappa > self.agents {
            return Err(SimError::config("kappa", format!("{} exceeds N={}", self.kappa, self.agents)));
        }
        if let Some(ids) = &self.cowpox_ids {
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != ids.len() {
                return Err(SimError::config("cowpox_ids", "duplicate ids"));
            }
            if let Some(bad) = ids.iter().find(|&&i| i as usize >= self.agents) {
                return Err(SimError::config("cowpox_ids", format!("id {bad} out of range")));
            }
        }
        if !(0.0..=1.0).contains(&self.p_path) {
            return Err(SimError::config("p_path", format!("must lie in [0, 1], got {}", self.p_path)));
        }
        self.score.validate()?;
        self.detector.validate()?;
        self.strategy.validate()?;
        let a = &self.attack;
        if a.strain_count == 0 {
            return Err(SimError::config("strain_count", "must be positive"));
        }
        let carriers = a.r0_count * a.strain_count as usize;
        if carriers > self.agents - self.cowpox_count() {
            return Err(SimError::config(
                "r0_count",
                format!(
                    "{carriers} initial carriers exceed the {} non-Cowpox agents",
                    self.agents - self.cowpox_count()
                ),
            ));
        }
        if let Some(ad) = &a.adaptive {
            if ad.trigger_round < 2 || ad.trigger_round > self.rounds {
                return Err(SimError::config(
                    "adaptive.trigger_round",
                    format!("must lie in [2, rounds={}], got {}", self.rounds, ad.trigger_round),
                ));
            }
            if !(0.0..=1.0).contains(&ad.p_feasible) {
                return Err(SimError::config("adaptive.p_feasible", "must lie in [0, 1]"));
            }
            if !(ad.margin > 0.0 && ad.margin.is_finite()) {
                return Err(SimError::config("adaptive.margin", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Every sample ever created, indexed by id.
#[derive(Debug, Clone, Default)]
pub struct SampleRegistry {
    first: u64,
    samples: Vec<Sample>,
}

impl SampleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry whose first id is `first`.
    pub fn starting_at(first: u64) -> Self {
        SampleRegistry { first, samples: Vec::new() }
    }

    pub fn next_id(&self) -> SampleId {
        SampleId(self.first + self.samples.len() as u64)
    }

    /// Stores `s`, which must carry the id returned by [`next_id`](Self::next_id).
    pub fn register(&mut self, s: Sample) -> Sample {
        assert_eq!(s.id, self.next_id(), "samples must be registered in id order");
        self.samples.push(s.clone());
        s
    }

    pub fn get(&self, id: SampleId) -> Option<&Sample> {
        id.0.checked_sub(self.first).and_then(|i| self.samples.get(i as usize))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter()
    }
}

/// One exchange between a questioner and a responder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvent {
    pub round: u32,
    pub questioner: AgentId,
    pub responder: AgentId,
    pub q_state_before: CompartmentLabel,
    pub a_state_before: CompartmentLabel,
    pub q_state_after: CompartmentLabel,
    pub a_state_after: CompartmentLabel,
    pub retrieved: SampleId,
    pub retrieved_kind: KindTag,
    pub question: QuestionClass,
    pub answer: AnswerClass,
    /// The responder's inspector flagged its answer.
    pub detected: bool,
    pub q_virus_before: bool,
    pub q_cure_before: bool,
    pub a_virus_before: bool,
    pub a_cure_before: bool,
    pub q_virus_after: bool,
    pub q_cure_after: bool,
    pub a_virus_after: bool,
    pub a_cure_after: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdaptiveStatus {
    Disabled,
    Waiting,
    Fired(AdaptiveOutcome),
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub round: u32,
    pub agents: Vec<Agent>,
    pub streams: Streams,
    pub registry: SampleRegistry,
    pub event_log: Vec<PairEvent>,
    pub detections: Vec<DetectionEvent>,
    pub metrics: Vec<MetricsRow>,
    /// Agent under the attacker's control.
    pub attacker: Option<AgentId>,
    pub original_viruses: Vec<SampleId>,
    pub adaptive: AdaptiveStatus,
}

impl SimState {
    /// Builds agents, assigns Cowpox roles, fills albums and seeds the
    /// initial carriers.
    pub fn init(cfg: &EngineConfig) -> Result<SimState> {
        cfg.validate()?;
        let n = cfg.agents;
        let mut streams = Streams::new(cfg.seed);
        let cowpox: Vec<u32> = match &cfg.cowpox_ids {
            Some(ids) => ids.clone(),
            None => {
                let mut ids: Vec<u32> = (0..n as u32).collect();
                let (chosen, _) = ids.partial_shuffle(&mut streams.roles, cfg.kappa);
                chosen.to_vec()
            }
        };
        let mut registry = SampleRegistry::new();
        let mut agents = Vec::with_capacity(n);
        for i in 0..n as u32 {
            let role = if cowpox.contains(&i) { AgentRole::Cowpox } else { AgentRole::Normal };
            let mut agent = Agent::new(AgentId(i), role, cfg.album_size, cfg.history_len)?;
            agent.bank_capacity = if agent.is_cowpox() { cfg.bank_capacity } else { 0 };
            for _ in 0..cfg.album_size {
                let id = registry.next_id();
                let s = registry.register(craft_benign(id, &cfg.score, &mut streams.scores));
                agent.bank_benign(&s);
                agent.album.insert(s);
            }
            agents.push(agent);
        }
        let mut state = SimState {
            round: 0,
            agents,
            streams,
            registry,
            event_log: Vec::new(),
            detections: Vec::new(),
            metrics: Vec::new(),
            attacker: None,
            original_viruses: Vec::new(),
            adaptive: if cfg.attack.adaptive.is_some() { AdaptiveStatus::Waiting } else { AdaptiveStatus::Disabled },
        };
        seed_patient_zero(&mut state, &cfg.attack, &cfg.score)?;
        state.metrics.push(MetricsRow::from_state(0, &[], &state.agents));
        Ok(state)
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Compartment counts (sensitive, infected, cured).
    pub fn compartments(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for a in &self.agents {
            match classify(a) {
                CompartmentLabel::Sensitive => c.0 += 1,
                CompartmentLabel::Infected => c.1 += 1,
                CompartmentLabel::Cured => c.2 += 1,
            }
        }
        c
    }
}

/// Splits the population into two random halves and matches them at random.
pub fn split_and_pair(n: usize, rng: &mut RandomStream) -> Result<Vec<(AgentId, AgentId)>> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(SimError::config("N", format!("must be even and at least 2, got {n}")));
    }
    let mut ids: Vec<AgentId> = (0..n as u32).map(AgentId).collect();
    ids.shuffle(rng);
    let (q, a) = ids.split_at(n / 2);
    Ok(q.iter().copied().zip(a.iter().copied()).collect())
}

pub fn compose_question(retrieved: &Sample) -> QuestionClass {
    match retrieved.virus_strain() {
        Some(s) => QuestionClass::MaliciousQ(s),
        None => QuestionClass::BenignQ,
    }
}

pub fn respond(incoming: &Sample, q: QuestionClass, p_path: f64, rng: &mut RandomStream) -> AnswerClass {
    match (incoming.virus_strain(), q) {
        (Some(s), QuestionClass::MaliciousQ(qs)) if s == qs && rng.gen_bool(p_path) => AnswerClass::MaliciousA(s),
        _ => AnswerClass::BenignA,
    }
}

fn pair_mut(agents: &mut [Agent], i: usize, j: usize) -> (&mut Agent, &mut Agent) {
    assert_ne!(i, j);
    if i < j {
        let (lo, hi) = agents.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    } else {
        let (lo, hi) = agents.split_at_mut(i);
        (&mut hi[0], &mut lo[j])
    }
}

fn observe(agent: &mut Agent) -> (CompartmentLabel, bool, bool) {
    let label = classify(agent);
    if label == CompartmentLabel::Infected {
        agent.mark_infected();
    }
    (label, agent.album.holds_virus(), agent.album.holds_cure())
}

/// Executes one round.
pub fn step(state: &mut SimState, cfg: &EngineConfig) -> Result<()> {
    if state.round >= cfg.rounds {
        return Err(SimError::config("rounds", "simulation already finished"));
    }
    state.round += 1;
    let round = state.round;

    for agent in state.agents.iter_mut().filter(|a| !a.pending_cures.is_empty()) {
        apply_pending_cures(agent, round);
    }
    if let (AdaptiveStatus::Waiting, Some(ad)) = (&state.adaptive, &cfg.attack.adaptive) {
        if round >= ad.trigger_round {
            if let Some(outcome) = adaptive_attack(state, ad, &cfg.score, round)? {
                state.adaptive = AdaptiveStatus::Fired(outcome);
            }
        }
    }
    let before: Vec<_> = state.agents.iter_mut().map(observe).collect();

    let pairs = split_and_pair(state.agents.len(), &mut state.streams.pairing)?;
    let settings = DefenseSettings {
        detector: &cfg.detector,
        strategy: &cfg.strategy,
        score: &cfg.score,
        cure_delay_rounds: cfg.cure_delay_rounds,
    };
    let first_event = state.event_log.len();
    for (qi, ai) in pairs {
        let (q, a) = pair_mut(&mut state.agents, qi.index(), ai.index());
        let ctx = derive_context(&q.history);
        let got = retrieve(&q.album, ctx, &cfg.score, &mut state.streams.retrieval)?;
        let sample = q.album.items().nth(got.position).expect("retrieved position is in the album").clone();
        let question = compose_question(&sample);

        a.album.insert(sample.clone());
        a.bank_benign(&sample);
        let answer = respond(&sample, question, cfg.p_path, &mut state.streams.pathogen);

        q.history.push(ChatRecord {
            round,
            partner: ai,
            direction: Direction::AsQuestioner,
            question,
            sample: sample.id,
            answer,
        });
        let record =
            ChatRecord { round, partner: qi, direction: Direction::AsResponder, question, sample: sample.id, answer };
        a.history.push(record);

        let detection = if a.is_cowpox() {
            cowpox_hook(a, &record, &sample, settings, &mut state.streams.detector, &mut state.registry)
        } else {
            None
        };

        let (q_after, q_virus_after, q_cure_after) = observe(q);
        let (a_after, a_virus_after, a_cure_after) = observe(a);
        let (q_before, q_virus_before, q_cure_before) = before[qi.index()];
        let (a_before, a_virus_before, a_cure_before) = before[ai.index()];
        state.event_log.push(PairEvent {
            round,
            questioner: qi,
            responder: ai,
            q_state_before: q_before,
            a_state_before: a_before,
            q_state_after: q_after,
            a_state_after: a_after,
            retrieved: sample.id,
            retrieved_kind: sample.kind.tag(),
            question,
            answer,
            detected: detection.is_some(),
            q_virus_before,
            q_cure_before,
            a_virus_before,
            a_cure_before,
            q_virus_after,
            q_cure_after,
            a_virus_after,
            a_cure_after,
        });
        state.detections.extend(detection);
    }
    let row = MetricsRow::from_state(round, &state.event_log[first_event..], &state.agents);
    state.metrics.push(row);
    Ok(())
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub n_agents: usize,
    /// One row per round, row 0 being the initial state.
    pub metrics: Vec<MetricsRow>,
    /// Empty unless `record_events` was set.
    pub events: Vec<PairEvent>,
    pub detections: Vec<DetectionEvent>,
    pub adaptive: Option<AdaptiveOutcome>,
    pub cowpox: Vec<AgentId>,
    pub initial_carriers: usize,
}

pub fn run(cfg: &EngineConfig) -> Result<RunOutput> {
    let mut state = SimState::init(cfg)?;
    let initial_carriers = state.agents.iter().filter(|a| a.album.holds_virus()).count();
    for _ in 0..cfg.rounds {
        step(&mut state, cfg)?;
    }
    if matches!(state.adaptive, AdaptiveStatus::Waiting) {
        log::info!("seed {}: adaptive attack never found a cure to target", cfg.seed);
    }
    let cowpox = state.agents.iter().filter(|a| a.is_cowpox()).map(|a| a.id).collect();
    Ok(RunOutput {
        seed: cfg.seed,
        n_agents: cfg.agents,
        metrics: state.metrics,
        events: if cfg.record_events { state.event_log } else { Vec::new() },
        detections: state.detections,
        adaptive: match state.adaptive {
            AdaptiveStatus::Fired(o) => Some(o),
            _ => None,
        },
        cowpox,
        initial_carriers,
    })
}
