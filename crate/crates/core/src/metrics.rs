//! Per-round observables.
//!
//! Rates derived from a round's exchanges (current rate, `beta_t`,
//! `alpha_t^Q`) are computed from the pair events. Quantities that describe
//! the population (cumulative rate, recovered count, carriers) are computed
//! either from live agent state or, when replaying a stored log, from the
//! compartment labels and album flags recorded in each event.

use serde::{Deserialize, Serialize};

use crate::domain::{Agent, AnswerClass, KindTag, QuestionClass};
use crate::engine::PairEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompartmentLabel {
    Sensitive,
    Infected,
    Cured,
}

/// Compartment of `agent`.
///
/// A held virus is neutralised when the album also holds a cure of the same
/// strain with a strictly higher malicious score. The agent is Infected when
/// some held virus is not neutralised and its strain appears in the history
/// window; Cured when it holds a cure and every held virus is neutralised;
/// Sensitive otherwise, which includes silent carriers.
pub fn classify(agent: &Agent) -> CompartmentLabel {
    let mut any_cure = false;
    let mut all_neutralised = true;
    for v in agent.album.items() {
        match v.virus_strain() {
            Some(strain) => {
                let neutralised = agent
                    .album
                    .items()
                    .any(|c| c.cure_strain() == Some(strain) && c.malicious_score > v.malicious_score);
                if !neutralised {
                    if agent.history.has_malicious(strain) {
                        return CompartmentLabel::Infected;
                    }
                    all_neutralised = false;
                }
            }
            None => any_cure |= v.is_cure(),
        }
    }
    if any_cure && all_neutralised {
        CompartmentLabel::Cured
    } else {
        CompartmentLabel::Sensitive
    }
}

fn ratio_or_zero(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        (num as f64 / den as f64).clamp(0.0, 1.0)
    }
}

/// Questioners that retrieved a virus and asked the malicious question, plus
/// responders that answered maliciously, over `n_agents`.
pub fn current_rate(round_events: &[PairEvent], n_agents: usize) -> f64 {
    let symptomatic: usize = round_events
        .iter()
        .map(|e| {
            let q = matches!(e.question, QuestionClass::MaliciousQ(_)) && e.retrieved_kind == KindTag::Virus;
            let a = matches!(e.answer, AnswerClass::MaliciousA(_));
            q as usize + a as usize
        })
        .sum();
    ratio_or_zero(symptomatic, n_agents)
}

/// Questioners holding a virus at retrieval time.
pub fn questioner_carriers(round_events: &[PairEvent]) -> usize {
    round_events.iter().filter(|e| e.q_virus_before).count()
}

/// Questioners that retrieved a virus over questioner carriers; 0 when there
/// are no carriers.
pub fn beta_estimate(round_events: &[PairEvent]) -> f64 {
    let hits = round_events.iter().filter(|e| e.q_virus_before && e.retrieved_kind == KindTag::Virus).count();
    ratio_or_zero(hits, questioner_carriers(round_events))
}

/// Questioners emitting a malicious question over questioner carriers; 0 when
/// there are no carriers.
pub fn alpha_q_estimate(round_events: &[PairEvent]) -> f64 {
    let hits =
        round_events.iter().filter(|e| e.q_virus_before && matches!(e.question, QuestionClass::MaliciousQ(_))).count();
    ratio_or_zero(hits, questioner_carriers(round_events))
}

pub fn cumulative_rate(agents: &[Agent]) -> f64 {
    ratio_or_zero(agents.iter().filter(|a| a.once_infected).count(), agents.len())
}

/// Agents that were once infected and are not currently Infected.
pub fn recovered_count(agents: &[Agent]) -> usize {
    agents.iter().filter(|a| a.once_infected && classify(a) != CompartmentLabel::Infected).count()
}

/// One row of the per-round metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub round: u32,
    pub current_rate: f64,
    pub cumulative_rate: f64,
    pub beta_t: f64,
    pub alpha_q_t: f64,
    pub recovered: usize,
    pub carriers_virus: usize,
    pub carriers_cure: usize,
    pub detections: usize,
    /// Raw numerators and denominator behind `beta_t` and `alpha_q_t`.
    pub q_carriers: usize,
    pub q_retrieved_virus: usize,
    pub q_malicious: usize,
    pub sensitive: usize,
    pub infected: usize,
    pub cured: usize,
}

impl MetricsRow {
    /// Builds the row for `round` from its events and the end-of-round agents.
    pub fn from_state(round: u32, round_events: &[PairEvent], agents: &[Agent]) -> MetricsRow {
        let (mut sensitive, mut infected, mut cured) = (0, 0, 0);
        for a in agents {
            match classify(a) {
                CompartmentLabel::Sensitive => sensitive += 1,
                CompartmentLabel::Infected => infected += 1,
                CompartmentLabel::Cured => cured += 1,
            }
        }
        let mut row = MetricsRow {
            round,
            current_rate: current_rate(round_events, agents.len()),
            cumulative_rate: cumulative_rate(agents),
            beta_t: beta_estimate(round_events),
            alpha_q_t: alpha_q_estimate(round_events),
            recovered: recovered_count(agents),
            carriers_virus: agents.iter().filter(|a| a.album.holds_virus()).count(),
            carriers_cure: agents.iter().filter(|a| a.album.holds_cure()).count(),
            detections: round_events.iter().filter(|e| e.detected).count(),
            q_carriers: 0,
            q_retrieved_virus: 0,
            q_malicious: 0,
            sensitive,
            infected,
            cured,
        };
        row.fill_raw(round_events);
        row
    }

    fn fill_raw(&mut self, round_events: &[PairEvent]) {
        self.q_carriers = questioner_carriers(round_events);
        self.q_retrieved_virus =
            round_events.iter().filter(|e| e.q_virus_before && e.retrieved_kind == KindTag::Virus).count();
        self.q_malicious = round_events
            .iter()
            .filter(|e| e.q_virus_before && matches!(e.question, QuestionClass::MaliciousQ(_)))
            .count();
    }
}

/// Rebuilds the metrics table from a stored event log alone.
///
/// The round-0 row is reconstructed from the pre-exchange state recorded in
/// the first round's events. Returns an empty table for an empty log.
pub fn replay(events: &[PairEvent], n_agents: usize) -> Vec<MetricsRow> {
    let mut rows = Vec::new();
    let Some(first) = events.first() else {
        return rows;
    };
    let mut once = vec![false; n_agents];

    // Round 0 from the "before" view of the first round.
    let first_round: Vec<&PairEvent> = events.iter().filter(|e| e.round == first.round).collect();
    let mut row0 = empty_row(0);
    for e in &first_round {
        for (id, label, virus, cure) in [
            (e.questioner, e.q_state_before, e.q_virus_before, e.q_cure_before),
            (e.responder, e.a_state_before, e.a_virus_before, e.a_cure_before),
        ] {
            if label == CompartmentLabel::Infected {
                once[id.index()] = true;
            }
            tally(&mut row0, label, virus, cure, once[id.index()]);
        }
    }
    row0.cumulative_rate = ratio_or_zero(once.iter().filter(|x| **x).count(), n_agents);
    rows.push(row0);

    for chunk in events.chunk_by(|a, b| a.round == b.round) {
        let round = chunk[0].round;
        let mut row = empty_row(round);
        row.current_rate = current_rate(chunk, n_agents);
        row.beta_t = beta_estimate(chunk);
        row.alpha_q_t = alpha_q_estimate(chunk);
        row.detections = chunk.iter().filter(|e| e.detected).count();
        row.fill_raw(chunk);
        for e in chunk {
            for (id, before, after, virus, cure) in [
                (e.questioner, e.q_state_before, e.q_state_after, e.q_virus_after, e.q_cure_after),
                (e.responder, e.a_state_before, e.a_state_after, e.a_virus_after, e.a_cure_after),
            ] {
                if before == CompartmentLabel::Infected || after == CompartmentLabel::Infected {
                    once[id.index()] = true;
                }
                tally(&mut row, after, virus, cure, once[id.index()]);
            }
        }
        row.cumulative_rate = ratio_or_zero(once.iter().filter(|x| **x).count(), n_agents);
        rows.push(row);
    }
    rows
}

fn empty_row(round: u32) -> MetricsRow {
    MetricsRow {
        round,
        current_rate: 0.0,
        cumulative_rate: 0.0,
        beta_t: 0.0,
        alpha_q_t: 0.0,
        recovered: 0,
        carriers_virus: 0,
        carriers_cure: 0,
        detections: 0,
        q_carriers: 0,
        q_retrieved_virus: 0,
        q_malicious: 0,
        sensitive: 0,
        infected: 0,
        cured: 0,
    }
}

fn tally(row: &mut MetricsRow, label: CompartmentLabel, virus: bool, cure: bool, once: bool) {
    match label {
        CompartmentLabel::Sensitive => row.sensitive += 1,
        CompartmentLabel::Infected => row.infected += 1,
        CompartmentLabel::Cured => row.cured += 1,
    }
    row.carriers_virus += virus as usize;
    row.carriers_cure += cure as usize;
    if once && label != CompartmentLabel::Infected {
        row.recovered += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AgentId, AgentRole, ChatRecord, Direction, PayloadTag, Sample, SampleId};

    fn agent() -> Agent {
        Agent::new(AgentId(0), AgentRole::Normal, 10, 3).unwrap()
    }

    fn virus(id: u64, mal: f64) -> Sample {
        Sample::virus(SampleId(id), 0, PayloadTag::for_strain(0), 0.1, mal, 0.1).unwrap()
    }

    fn malicious_record() -> ChatRecord {
        ChatRecord {
            round: 1,
            partner: AgentId(1),
            direction: Direction::AsResponder,
            question: QuestionClass::MaliciousQ(0),
            sample: SampleId(1),
            answer: AnswerClass::MaliciousA(0),
        }
    }

    fn event(q_carrier: bool, kind: KindTag, q: QuestionClass, a: AnswerClass) -> PairEvent {
        PairEvent {
            round: 1,
            questioner: AgentId(0),
            responder: AgentId(1),
            q_state_before: CompartmentLabel::Sensitive,
            a_state_before: CompartmentLabel::Sensitive,
            q_state_after: CompartmentLabel::Sensitive,
            a_state_after: CompartmentLabel::Sensitive,
            retrieved: SampleId(0),
            retrieved_kind: kind,
            question: q,
            answer: a,
            detected: false,
            q_virus_before: q_carrier,
            q_cure_before: false,
            a_virus_before: false,
            a_cure_before: false,
            q_virus_after: q_carrier,
            q_cure_after: false,
            a_virus_after: false,
            a_cure_after: false,
        }
    }

    fn benign_event() -> PairEvent {
        event(false, KindTag::Benign, QuestionClass::BenignQ, AnswerClass::BenignA)
    }

    #[test]
    fn classify_infected_with_malicious_history() {
        let mut a = agent();
        a.album.insert(virus(1, 1.05));
        a.history.push(malicious_record());
        assert_eq!(classify(&a), CompartmentLabel::Infected);
    }

    #[test]
    fn classify_cured_when_cure_outranks() {
        let mut a = agent();
        a.album.insert(virus(1, 1.05));
        a.album.insert(Sample::cure(SampleId(2), 0, 0.1, 1.07).unwrap());
        a.history.push(malicious_record());
        assert_eq!(classify(&a), CompartmentLabel::Cured);
    }

    #[test]
    fn classify_silent_carrier_is_sensitive() {
        let mut a = agent();
        a.album.insert(virus(1, 1.05));
        assert_eq!(classify(&a), CompartmentLabel::Sensitive);
    }

    #[test]
    fn weaker_cure_does_not_neutralise() {
        let mut a = agent();
        a.album.insert(virus(1, 1.2));
        a.album.insert(Sample::cure(SampleId(2), 0, 0.1, 1.07).unwrap());
        a.history.push(malicious_record());
        assert_eq!(classify(&a), CompartmentLabel::Infected);
        a.history = crate::domain::History::new(3).unwrap();
        assert_eq!(classify(&a), CompartmentLabel::Sensitive);
    }

    #[test]
    fn current_rate_counts() {
        let evs = vec![benign_event(); 64];
        assert_eq!(current_rate(&evs, 128), 0.0);
        let mut evs = vec![benign_event(); 64];
        evs[3].answer = AnswerClass::MaliciousA(0);
        assert!((current_rate(&evs, 128) - 1.0 / 128.0).abs() < 1e-15);
        // both indicators of one pair
        let full: Vec<_> = (0..64)
            .map(|_| event(true, KindTag::Virus, QuestionClass::MaliciousQ(0), AnswerClass::MaliciousA(0)))
            .collect();
        assert_eq!(current_rate(&full, 128), 1.0);
    }

    #[test]
    fn beta_definition_and_zero_rule() {
        let mut evs = Vec::new();
        for i in 0..10 {
            if i < 8 {
                evs.push(event(true, KindTag::Virus, QuestionClass::MaliciousQ(0), AnswerClass::MaliciousA(0)));
            } else {
                evs.push(event(true, KindTag::Cure, QuestionClass::BenignQ, AnswerClass::BenignA));
            }
        }
        evs.extend((0..5).map(|_| benign_event()));
        assert!((beta_estimate(&evs) - 0.8).abs() < 1e-15);
        assert!((alpha_q_estimate(&evs) - 0.8).abs() < 1e-15);

        let none = vec![benign_event(); 10];
        assert_eq!(beta_estimate(&none), 0.0);
        assert_eq!(alpha_q_estimate(&none), 0.0);

        let cured: Vec<_> =
            (0..10).map(|_| event(true, KindTag::Cure, QuestionClass::BenignQ, AnswerClass::BenignA)).collect();
        assert_eq!(beta_estimate(&cured), 0.0);
        assert_eq!(alpha_q_estimate(&cured), 0.0);
    }

    #[test]
    fn recovered_bounds() {
        let mut agents: Vec<Agent> = (0..4).map(|_| agent()).collect();
        assert_eq!(recovered_count(&agents), 0);
        agents[0].once_infected = true;
        agents[0].album.insert(virus(1, 1.05));
        agents[0].history.push(malicious_record());
        agents[1].once_infected = true;
        assert_eq!(recovered_count(&agents), 1);
        assert_eq!(cumulative_rate(&agents), 0.5);
    }
}
