//! Cowpox agents: output inspection and cure generation.
//!
//! A Cowpox agent inspects its own answer after each exchange it takes part
//! in as responder. When the inspector flags the answer, the incoming sample
//! is taken as the suspicious one. A virus is replaced in the album by a cure
//! that outranks it under the malicious context; a flagged benign sample is
//! swapped for a fresh benign one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Agent, AgentId, AnswerClass, ChatRecord, PendingCure, Sample, SampleId};
use crate::engine::SampleRegistry;
use crate::error::{Result, SimError};
use crate::rng::RandomStream;
use crate::scoring::{craft_benign, ScoreModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    OneTurn,
    ThreeTurn,
}

/// Operating point of the output inspector.
///
/// The three-turn mode is its own measured operating point, not three
/// independent one-turn draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub mode: DetectorMode,
    pub fpr: f64,
    pub fnr: f64,
}

impl DetectorParams {
    pub fn one_turn() -> Self {
        DetectorParams { mode: DetectorMode::OneTurn, fpr: 0.028, fnr: 0.125 }
    }

    pub fn three_turn() -> Self {
        DetectorParams { mode: DetectorMode::ThreeTurn, fpr: 0.079, fnr: 0.030 }
    }

    pub fn for_mode(mode: DetectorMode) -> Self {
        match mode {
            DetectorMode::OneTurn => Self::one_turn(),
            DetectorMode::ThreeTurn => Self::three_turn(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("detector.fpr", self.fpr), ("detector.fnr", self.fnr)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SimError::config(field, format!("must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self::three_turn()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyKind {
    /// Cure optimised from the virus itself.
    S1,
    /// Cure optimised from the best benign sample in the agent's bank.
    S2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CureStrategy {
    pub kind: StrategyKind,
    pub s2_epoch_step: f64,
    pub s2_max_epochs: u32,
}

impl Default for CureStrategy {
    fn default() -> Self {
        CureStrategy { kind: StrategyKind::S2, s2_epoch_step: 0.01, s2_max_epochs: 10_000 }
    }
}

impl CureStrategy {
    pub fn validate(&self) -> Result<()> {
        if !(self.s2_epoch_step > 0.0 && self.s2_epoch_step.is_finite()) {
            return Err(SimError::config("strategy.s2_epoch_step", "must be positive"));
        }
        if self.s2_max_epochs == 0 {
            return Err(SimError::config("strategy.s2_max_epochs", "must be positive"));
        }
        Ok(())
    }
}

/// Flags `answer` as malicious with the detector's error rates.
pub fn inspect(answer: AnswerClass, det: &DetectorParams, rng: &mut RandomStream) -> bool {
    match answer {
        AnswerClass::MaliciousA(_) => rng.gen_bool(1.0 - det.fnr),
        AnswerClass::BenignA => rng.gen_bool(det.fpr),
    }
}

/// Cure built directly on the virus: same benign content as the image the
/// virus was made from, malicious score lifted `cure_margin` above the virus.
pub fn generate_cure_s1(id: SampleId, virus: &Sample, cure_margin: f64) -> Result<Sample> {
    let strain = virus.virus_strain().ok_or(SimError::NotVirus(virus.id.0))?;
    let origin = virus.origin_benign_score.ok_or(SimError::NotVirus(virus.id.0))?;
    Sample::cure(id, strain, origin, virus.malicious_score + cure_margin)
}

// Strict comparison with a small absolute slack so that exact multiples of
// the step are not counted as exceeding the target.
const EXCEED_EPS: f64 = 1e-9;

/// Cure built on the highest-scoring benign sample of `bank`.
///
/// The candidate's malicious score starts at the base's benign score and
/// grows by `s2_epoch_step` per epoch until it strictly exceeds the virus;
/// `cure_margin` is then added. Returns the cure and the epochs spent
/// (at least one).
pub fn generate_cure_s2(
    id: SampleId,
    bank: &[Sample],
    virus: &Sample,
    strat: &CureStrategy,
    cure_margin: f64,
) -> Result<(Sample, u32)> {
    let strain = virus.virus_strain().ok_or(SimError::NotVirus(virus.id.0))?;
    let base = bank
        .iter()
        .filter(|s| s.is_benign())
        .max_by(|a, b| a.benign_score.total_cmp(&b.benign_score))
        .ok_or(SimError::EmptyBank)?;
    let target = virus.malicious_score;
    let mut steps = 0u32;
    let mut candidate = base.benign_score;
    while candidate <= target + EXCEED_EPS {
        steps += 1;
        if steps > strat.s2_max_epochs {
            return Err(SimError::EpochBudget(strat.s2_max_epochs));
        }
        candidate = base.benign_score + steps as f64 * strat.s2_epoch_step;
    }
    let cure = Sample::cure(id, strain, base.benign_score, candidate + cure_margin)?;
    Ok((cure, steps.max(1)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DetectionAction {
    Cure {
        cure: SampleId,
        strategy: StrategyKind,
        epochs: u32,
        /// S2 was configured but the bank was empty.
        fell_back: bool,
        /// Round the cure takes effect.
        effective_round: u32,
    },
    /// A flagged benign sample swapped for a fresh benign one.
    Swap { replacement: SampleId },
    /// Flagged, but the incoming sample was already a cure.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub round: u32,
    pub agent: AgentId,
    pub sample: SampleId,
    pub answer_malicious: bool,
    pub action: DetectionAction,
}

/// Defense settings a Cowpox hook needs.
#[derive(Debug, Clone, Copy)]
pub struct DefenseSettings<'a> {
    pub detector: &'a DetectorParams,
    pub strategy: &'a CureStrategy,
    pub score: &'a ScoreModelParams,
    pub cure_delay_rounds: u32,
}

/// Runs inspection and cure generation for a Cowpox responder after its
/// exchange. Returns the detection, if the inspector flagged the answer.
pub fn cowpox_hook(
    agent: &mut Agent,
    exchange: &ChatRecord,
    incoming: &Sample,
    settings: DefenseSettings<'_>,
    rng: &mut RandomStream,
    registry: &mut SampleRegistry,
) -> Option<DetectionEvent> {
    debug_assert!(agent.is_cowpox());
    if !inspect(exchange.answer, settings.detector, rng) {
        return None;
    }
    let round = exchange.round;
    let action = if incoming.is_virus() {
        let id = registry.next_id();
        let (cure, strategy, epochs, fell_back) = match settings.strategy.kind {
            StrategyKind::S1 => (
                generate_cure_s1(id, incoming, settings.score.cure_margin).expect("incoming is a virus"),
                StrategyKind::S1,
                1,
                false,
            ),
            StrategyKind::S2 => {
                let bank: Vec<Sample> = agent.benign_bank.iter().cloned().collect();
                match generate_cure_s2(id, &bank, incoming, settings.strategy, settings.score.cure_margin) {
                    Ok((c, e)) => (c, StrategyKind::S2, e, false),
                    Err(err) => {
                        log::debug!("agent {}: S2 cure failed ({err}), using S1", agent.id);
                        (
                            generate_cure_s1(id, incoming, settings.score.cure_margin).expect("incoming is a virus"),
                            StrategyKind::S1,
                            1,
                            true,
                        )
                    }
                }
            }
        };
        let cure = registry.register(cure);
        let effective_round = round + settings.cure_delay_rounds;
        if settings.cure_delay_rounds == 0 {
            agent.album.replace(incoming.id, &cure);
        } else {
            agent.pending_cures.push(PendingCure {
                due_round: effective_round,
                replaces: incoming.id,
                cure: cure.clone(),
            });
        }
        DetectionAction::Cure { cure: cure.id, strategy, epochs, fell_back, effective_round }
    } else if incoming.is_benign() {
        let id = registry.next_id();
        let fresh = registry.register(craft_benign(id, settings.score, rng));
        agent.album.replace(incoming.id, &fresh);
        DetectionAction::Swap { replacement: fresh.id }
    } else {
        DetectionAction::Ignored
    };
    Some(DetectionEvent {
        round,
        agent: agent.id,
        sample: incoming.id,
        answer_malicious: matches!(exchange.answer, AnswerClass::MaliciousA(_)),
        action,
    })
}

/// Applies every pending cure of `agent` due at or before `round`.
pub fn apply_pending_cures(agent: &mut Agent, round: u32) {
    if agent.pending_cures.is_empty() {
        return;
    }
    let (due, keep): (Vec<_>, Vec<_>) = agent.pending_cures.drain(..).partition(|p| p.due_round <= round);
    agent.pending_cures = keep;
    for p in due {
        agent.album.replace(p.replaces, &p.cure);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AgentRole, Direction, PayloadTag, QuestionClass};
    use crate::rng::{stream, Stream};

    fn virus(mal: f64, origin: f64) -> Sample {
        Sample::virus(SampleId(1), 0, PayloadTag::for_strain(0), origin, mal, origin).unwrap()
    }

    fn det_rng() -> RandomStream {
        stream(5, Stream::Detector)
    }

    fn freq(answer: AnswerClass, det: DetectorParams, n: usize) -> f64 {
        let mut r = det_rng();
        (0..n).filter(|_| inspect(answer, &det, &mut r)).count() as f64 / n as f64
    }

    #[test]
    fn three_turn_catches_malicious() {
        let f = freq(AnswerClass::MaliciousA(0), DetectorParams::three_turn(), 100_000);
        assert!((f - 0.970).abs() < 0.005, "{f}");
    }

    #[test]
    fn one_turn_false_positive_rate() {
        let f = freq(AnswerClass::BenignA, DetectorParams::one_turn(), 100_000);
        assert!((f - 0.028).abs() < 0.005, "{f}");
    }

    #[test]
    fn perfect_recall() {
        let det = DetectorParams { fnr: 0.0, ..DetectorParams::one_turn() };
        assert_eq!(freq(AnswerClass::MaliciousA(0), det, 10_000), 1.0);
    }

    #[test]
    fn s1_lifts_score_and_recovers_origin() {
        let c = generate_cure_s1(SampleId(9), &virus(1.05, 0.42), 0.02).unwrap();
        assert!((c.malicious_score - 1.07).abs() < 1e-12);
        assert_eq!(c.benign_score, 0.42);
        assert_eq!(c.cure_strain(), Some(0));
        assert!(c.malicious_score > 1.05);
    }

    #[test]
    fn s1_rejects_benign() {
        let b = Sample::benign(SampleId(3), 0.4).unwrap();
        assert_eq!(generate_cure_s1(SampleId(9), &b, 0.02), Err(SimError::NotVirus(3)));
    }

    // Independent count: smallest k with base + k*step > target, never below 1.
    fn epochs_oracle(base: f64, target: f64, step: f64) -> u32 {
        if base > target {
            return 1;
        }
        ((target - base) / step + 1e-9).floor() as u32 + 1
    }

    #[test]
    fn s2_epoch_count() {
        let strat = CureStrategy { kind: StrategyKind::S2, s2_epoch_step: 0.05, s2_max_epochs: 100 };
        let bank = vec![Sample::benign(SampleId(2), 0.30).unwrap(), Sample::benign(SampleId(3), 0.90).unwrap()];
        let (c, epochs) = generate_cure_s2(SampleId(9), &bank, &virus(1.05, 0.1), &strat, 0.02).unwrap();
        assert_eq!(epochs, 4);
        assert_eq!(epochs, epochs_oracle(0.90, 1.05, 0.05));
        assert!((c.malicious_score - 1.12).abs() < 1e-9);
        assert_eq!(c.benign_score, 0.90);

        let high = vec![Sample::benign(SampleId(4), 1.2).unwrap()];
        let (c, epochs) = generate_cure_s2(SampleId(9), &high, &virus(1.05, 0.1), &strat, 0.02).unwrap();
        assert_eq!(epochs, 1);
        assert!(c.malicious_score > 1.05);
    }

    #[test]
    fn s2_epochs_match_oracle_on_grid() {
        let strat = CureStrategy { kind: StrategyKind::S2, s2_epoch_step: 0.01, s2_max_epochs: 10_000 };
        for i in 0..100 {
            let base = i as f64 / 100.0;
            let bank = vec![Sample::benign(SampleId(2), base).unwrap()];
            for target in [1.0, 1.05, 1.13] {
                let (c, e) = generate_cure_s2(SampleId(9), &bank, &virus(target, 0.1), &strat, 0.02).unwrap();
                assert_eq!(e, epochs_oracle(base, target, 0.01), "base {base} target {target}");
                assert!(c.malicious_score > target);
                // S1 always costs one epoch.
                assert!(1 <= e);
            }
        }
    }

    #[test]
    fn s2_errors() {
        let strat = CureStrategy::default();
        assert_eq!(generate_cure_s2(SampleId(9), &[], &virus(1.05, 0.1), &strat, 0.02), Err(SimError::EmptyBank));
        let tight = CureStrategy { s2_max_epochs: 2, ..strat };
        let bank = vec![Sample::benign(SampleId(2), 0.0).unwrap()];
        assert_eq!(
            generate_cure_s2(SampleId(9), &bank, &virus(1.05, 0.1), &tight, 0.02),
            Err(SimError::EpochBudget(2))
        );
    }

    fn cowpox_with(incoming: &Sample) -> Agent {
        let mut a = Agent::new(AgentId(0), AgentRole::Cowpox, 10, 3).unwrap();
        a.bank_capacity = 8;
        let b = Sample::benign(SampleId(50), 0.8).unwrap();
        a.album.insert(b.clone());
        a.bank_benign(&b);
        a.album.insert(incoming.clone());
        a
    }

    fn exchange(answer: AnswerClass) -> ChatRecord {
        ChatRecord {
            round: 3,
            partner: AgentId(1),
            direction: Direction::AsResponder,
            question: QuestionClass::MaliciousQ(0),
            sample: SampleId(1),
            answer,
        }
    }

    fn settings<'a>(
        det: &'a DetectorParams,
        strat: &'a CureStrategy,
        score: &'a ScoreModelParams,
    ) -> DefenseSettings<'a> {
        DefenseSettings { detector: det, strategy: strat, score, cure_delay_rounds: 0 }
    }

    #[test]
    fn hook_replaces_virus_with_cure() {
        let v = virus(1.05, 0.1);
        let mut reg = SampleRegistry::starting_at(100);
        let det = DetectorParams { fnr: 0.0, ..DetectorParams::three_turn() };
        let score = ScoreModelParams::default();
        for kind in [StrategyKind::S1, StrategyKind::S2] {
            let strat = CureStrategy { kind, ..CureStrategy::default() };
            let mut a = cowpox_with(&v);
            let ev = cowpox_hook(
                &mut a,
                &exchange(AnswerClass::MaliciousA(0)),
                &v,
                settings(&det, &strat, &score),
                &mut det_rng(),
                &mut reg,
            )
            .unwrap();
            assert!(!a.album.holds_virus());
            assert!(a.album.holds_cure());
            match ev.action {
                DetectionAction::Cure { strategy, .. } => assert_eq!(strategy, kind),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn hook_miss_keeps_virus() {
        let v = virus(1.05, 0.1);
        let mut reg = SampleRegistry::starting_at(100);
        let det = DetectorParams { fnr: 1.0, ..DetectorParams::three_turn() };
        let strat = CureStrategy::default();
        let score = ScoreModelParams::default();
        let mut a = cowpox_with(&v);
        let ev = cowpox_hook(
            &mut a,
            &exchange(AnswerClass::MaliciousA(0)),
            &v,
            settings(&det, &strat, &score),
            &mut det_rng(),
            &mut reg,
        );
        assert!(ev.is_none());
        assert!(a.album.holds_virus());
    }

    #[test]
    fn hook_false_positive_swaps_benign() {
        let b = Sample::benign(SampleId(7), 0.6).unwrap();
        let mut reg = SampleRegistry::starting_at(100);
        let det = DetectorParams { fpr: 1.0, ..DetectorParams::three_turn() };
        let strat = CureStrategy::default();
        let score = ScoreModelParams::default();
        let mut a = cowpox_with(&b);
        let ev = cowpox_hook(
            &mut a,
            &exchange(AnswerClass::BenignA),
            &b,
            settings(&det, &strat, &score),
            &mut det_rng(),
            &mut reg,
        )
        .unwrap();
        assert!(matches!(ev.action, DetectionAction::Swap { .. }));
        assert!(!a.album.contains(SampleId(7)));
        assert!(a.album.items().all(|s| s.is_benign()));
        assert_eq!(a.album.len(), 2);
    }

    #[test]
    fn s2_falls_back_on_empty_bank() {
        let v = virus(1.05, 0.1);
        let mut reg = SampleRegistry::starting_at(100);
        let det = DetectorParams { fnr: 0.0, ..DetectorParams::three_turn() };
        let strat = CureStrategy::default();
        let score = ScoreModelParams::default();
        let mut a = Agent::new(AgentId(0), AgentRole::Cowpox, 10, 3).unwrap();
        a.album.insert(v.clone());
        let ev = cowpox_hook(
            &mut a,
            &exchange(AnswerClass::MaliciousA(0)),
            &v,
            settings(&det, &strat, &score),
            &mut det_rng(),
            &mut reg,
        )
        .unwrap();
        assert!(matches!(ev.action, DetectionAction::Cure { fell_back: true, strategy: StrategyKind::S1, .. }));
    }

    #[test]
    fn delayed_cure_lands_on_due_round() {
        let v = virus(1.05, 0.1);
        let mut reg = SampleRegistry::starting_at(100);
        let det = DetectorParams { fnr: 0.0, ..DetectorParams::three_turn() };
        let strat = CureStrategy::default();
        let score = ScoreModelParams::default();
        let mut a = cowpox_with(&v);
        let s = DefenseSettings { cure_delay_rounds: 2, ..settings(&det, &strat, &score) };
        cowpox_hook(&mut a, &exchange(AnswerClass::MaliciousA(0)), &v, s, &mut det_rng(), &mut reg).unwrap();
        assert!(a.album.holds_virus());
        apply_pending_cures(&mut a, 4);
        assert!(a.album.holds_virus());
        apply_pending_cures(&mut a, 5);
        assert!(!a.album.holds_virus() && a.album.holds_cure());
        assert!(a.pending_cures.is_empty());
    }
}
