use immunesim_core::defense::{CureStrategy, DetectionAction, StrategyKind};
use immunesim_core::engine::{step, SimState};
use immunesim_core::metrics::replay;
use immunesim_core::{classify, CompartmentLabel, EngineConfig};
use proptest::prelude::*;

fn arb_config() -> impl Strategy<Value = EngineConfig> {
    (
        2usize..=24,
        0usize..=6,
        1usize..=12,
        1usize..=5,
        any::<u64>(),
        any::<bool>(),
        prop_oneof![Just(1.0), 0.5f64..1.0],
        0u32..=2,
    )
        .prop_map(|(half, kappa, album, hist, seed, s1, p_path, delay)| {
            let agents = 2 * half;
            EngineConfig {
                agents,
                rounds: 24,
                album_size: album,
                history_len: hist,
                kappa: kappa.min(agents - 1),
                p_path,
                strategy: CureStrategy {
                    kind: if s1 { StrategyKind::S1 } else { StrategyKind::S2 },
                    ..CureStrategy::default()
                },
                cure_delay_rounds: delay,
                seed,
                record_events: true,
                ..EngineConfig::default()
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn state_invariants_hold_every_round(cfg in arb_config()) {
        let mut st = SimState::init(&cfg).unwrap();
        let n = cfg.agents;
        for _ in 0..cfg.rounds {
            step(&mut st, &cfg).unwrap();
            for a in &st.agents {
                prop_assert!(a.album.len() <= a.album.capacity());
                prop_assert!(a.history.len() <= a.history.capacity());
            }
            let row = st.metrics.last().unwrap();
            prop_assert_eq!(row.sensitive + row.infected + row.cured, n);
            let infected = st.agents.iter().filter(|a| classify(a) == CompartmentLabel::Infected).count();
            prop_assert_eq!(row.infected, infected);
        }
        for w in st.metrics.windows(2) {
            prop_assert!(w[1].cumulative_rate >= w[0].cumulative_rate);
        }
        // Every generated cure outranks the virus it was made against.
        for d in &st.detections {
            if let DetectionAction::Cure { cure, .. } = d.action {
                let virus = st.registry.get(d.sample).unwrap();
                let cure = st.registry.get(cure).unwrap();
                if virus.is_virus() {
                    prop_assert!(cure.malicious_score > virus.malicious_score);
                    prop_assert_eq!(cure.cure_strain(), virus.virus_strain());
                }
            }
        }
    }

    #[test]
    fn cured_agents_never_ask_maliciously(cfg in arb_config()) {
        let out = immunesim_core::run(&cfg).unwrap();
        for e in &out.events {
            if e.q_state_before == CompartmentLabel::Cured {
                prop_assert_eq!(e.question, immunesim_core::domain::QuestionClass::BenignQ);
            }
        }
    }

    #[test]
    fn replayed_metrics_match_live(cfg in arb_config()) {
        let out = immunesim_core::run(&cfg).unwrap();
        let replayed = replay(&out.events, cfg.agents);
        prop_assert_eq!(replayed.len(), out.metrics.len());
        for (a, b) in replayed.iter().zip(&out.metrics) {
            prop_assert_eq!(a.infected, b.infected);
            prop_assert_eq!(a.cured, b.cured);
            prop_assert_eq!(a.cumulative_rate, b.cumulative_rate);
            prop_assert_eq!(a.current_rate, b.current_rate);
        }
    }

    #[test]
    fn same_seed_same_run(cfg in arb_config()) {
        let a = immunesim_core::run(&cfg).unwrap();
        let b = immunesim_core::run(&cfg).unwrap();
        prop_assert_eq!(a.metrics, b.metrics);
        prop_assert_eq!(a.events, b.events);
    }
}
