//! Scenario files.
//!
//! A scenario is a TOML document. Nested keys such as `score.cure_margin`
//! may be written either as dotted keys or as tables. Unknown keys are
//! rejected. A run manifest (`manifest.json`) is also accepted; its embedded
//! scenario is used.

use std::path::{Path, PathBuf};

use immunesim_core::attack::{AdaptiveConfig, AttackConfig};
use immunesim_core::defense::{CureStrategy, DetectorMode, DetectorParams, StrategyKind};
use immunesim_core::scoring::{RetrievalMode, ScoreModelParams};
use immunesim_core::EngineConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::manifest::Manifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    pub benign_low: f64,
    pub benign_high: f64,
    pub virus_margin: f64,
    pub cure_margin: f64,
    pub virus_elevates_benign_ctx: bool,
}

impl Default for ScoreSection {
    fn default() -> Self {
        let p = ScoreModelParams::default();
        ScoreSection {
            benign_low: p.benign_low,
            benign_high: p.benign_high,
            virus_margin: p.virus_margin,
            cure_margin: p.cure_margin,
            virus_elevates_benign_ctx: p.virus_elevates_benign_ctx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalKind {
    #[default]
    Argmax,
    TopK,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSection {
    pub mode: RetrievalKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub mode: DetectorMode,
    /// Overrides the mode's default false-positive rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fnr: Option<f64>,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection { mode: DetectorMode::ThreeTurn, fpr: None, fnr: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveSection {
    pub enabled: bool,
    pub trigger_round: u32,
    pub p_feasible: f64,
    pub margin: f64,
}

impl Default for AdaptiveSection {
    fn default() -> Self {
        let a = AdaptiveConfig::default();
        AdaptiveSection { enabled: false, trigger_round: a.trigger_round, p_feasible: a.p_feasible, margin: a.margin }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    #[serde(rename = "N")]
    pub n: usize,
    pub rounds: u32,
    pub kappa: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cowpox_ids: Option<Vec<u32>>,
    pub album_size: usize,
    pub history_len: usize,
    pub r0_count: usize,
    pub strains: u16,
    pub seed: u64,
    pub replicates: usize,
    pub p_path: f64,
    pub score: ScoreSection,
    pub retrieval: RetrievalSection,
    pub detector: DetectorSection,
    pub strategy: StrategyKind,
    pub s2_epoch_step: f64,
    pub bank_capacity: usize,
    pub cure_delay_rounds: u32,
    pub adaptive: AdaptiveSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        let e = EngineConfig::default();
        Scenario {
            n: e.agents,
            rounds: e.rounds,
            kappa: e.kappa,
            cowpox_ids: None,
            album_size: e.album_size,
            history_len: e.history_len,
            r0_count: e.attack.r0_count,
            strains: e.attack.strain_count,
            seed: e.seed,
            replicates: 1,
            p_path: e.p_path,
            score: ScoreSection::default(),
            retrieval: RetrievalSection::default(),
            detector: DetectorSection::default(),
            strategy: e.strategy.kind,
            s2_epoch_step: e.strategy.s2_epoch_step,
            bank_capacity: e.bank_capacity,
            cure_delay_rounds: e.cure_delay_rounds,
            adaptive: AdaptiveSection::default(),
            output_dir: None,
        }
    }
}

impl Scenario {
    pub fn parse_toml(text: &str, path: &Path) -> Result<Scenario> {
        toml::from_str(text).map_err(|e| CliError::Parse { path: path.to_path_buf(), msg: e.to_string() })
    }

    /// Reads a TOML scenario, or the scenario embedded in a run manifest
    /// when the file has a `.json` extension.
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: Manifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Parse { path: path.to_path_buf(), msg: e.to_string() })?;
            Ok(m.scenario)
        } else {
            Scenario::parse_toml(&text, path)
        }
    }

    fn retrieval_mode(&self) -> Result<RetrievalMode> {
        let r = &self.retrieval;
        match r.mode {
            RetrievalKind::Argmax => {
                if r.k.is_some() || r.weights.is_some() {
                    return Err(CliError::Config("retrieval: k and weights apply to top_k mode only".into()));
                }
                Ok(RetrievalMode::Argmax)
            }
            RetrievalKind::TopK => {
                let RetrievalMode::TopK { k: dk, weights: dw } = RetrievalMode::default_top_k() else { unreachable!() };
                let k = r.k.unwrap_or(dk);
                let weights = match (&r.weights, r.k) {
                    (Some(w), _) => w.clone(),
                    (None, Some(k)) if k != dk => {
                        return Err(CliError::Config(format!("retrieval.weights: required when k={k}")));
                    }
                    _ => dw,
                };
                Ok(RetrievalMode::TopK { k, weights })
            }
        }
    }

    /// Resolves the scenario into a validated engine configuration.
    pub fn to_engine(&self) -> Result<EngineConfig> {
        if self.replicates == 0 {
            return Err(CliError::Config("replicates: must be positive".into()));
        }
        let mut detector = DetectorParams::for_mode(self.detector.mode);
        if let Some(f) = self.detector.fpr {
            detector.fpr = f;
        }
        if let Some(f) = self.detector.fnr {
            detector.fnr = f;
        }
        let cfg = EngineConfig {
            agents: self.n,
            rounds: self.rounds,
            album_size: self.album_size,
            history_len: self.history_len,
            kappa: self.kappa,
            cowpox_ids: self.cowpox_ids.clone(),
            p_path: self.p_path,
            score: ScoreModelParams {
                benign_low: self.score.benign_low,
                benign_high: self.score.benign_high,
                virus_margin: self.score.virus_margin,
                cure_margin: self.score.cure_margin,
                retrieval_mode: self.retrieval_mode()?,
                virus_elevates_benign_ctx: self.score.virus_elevates_benign_ctx,
            },
            detector,
            strategy: CureStrategy {
                kind: self.strategy,
                s2_epoch_step: self.s2_epoch_step,
                ..CureStrategy::default()
            },
            cure_delay_rounds: self.cure_delay_rounds,
            bank_capacity: self.bank_capacity,
            attack: AttackConfig {
                r0_count: self.r0_count,
                strain_count: self.strains,
                adaptive: self.adaptive.enabled.then_some(AdaptiveConfig {
                    trigger_round: self.adaptive.trigger_round,
                    p_feasible: self.adaptive.p_feasible,
                    margin: self.adaptive.margin,
                }),
            },
            seed: self.seed,
            record_events: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Scenario> {
        Scenario::parse_toml(s, Path::new("test.toml"))
    }

    #[test]
    fn empty_file_gives_defaults() {
        let s = parse("").unwrap();
        assert_eq!(s, Scenario::default());
        let e = s.to_engine().unwrap();
        assert_eq!((e.agents, e.rounds, e.kappa, e.album_size, e.history_len), (128, 64, 4, 10, 3));
    }

    #[test]
    fn dotted_keys_and_tables_agree() {
        let a = parse("score.cure_margin = 0.03\ndetector.mode = \"one_turn\"\n").unwrap();
        let b = parse("[score]\ncure_margin = 0.03\n[detector]\nmode = \"one_turn\"\n").unwrap();
        assert_eq!(a, b);
        let e = a.to_engine().unwrap();
        assert_eq!(e.score.cure_margin, 0.03);
        assert_eq!(e.detector, DetectorParams::one_turn());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(parse("kapa = 3"), Err(CliError::Parse { .. })));
        assert!(matches!(parse("score.virus = 1.0"), Err(CliError::Parse { .. })));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let e = parse("N = 7").unwrap().to_engine().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = parse("p_path = 2.0").unwrap().to_engine().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(parse("retrieval.k = 3").unwrap().to_engine().is_err());
    }

    #[test]
    fn top_k_and_adaptive() {
        let s = parse(
            "strategy = \"S1\"\nretrieval.mode = \"top_k\"\nadaptive.enabled = true\nadaptive.trigger_round = 30\n",
        )
        .unwrap();
        let e = s.to_engine().unwrap();
        assert_eq!(e.score.retrieval_mode, RetrievalMode::default_top_k());
        assert_eq!(e.strategy.kind, StrategyKind::S1);
        assert_eq!(e.attack.adaptive.unwrap().trigger_round, 30);
    }

    #[test]
    fn serialises_back_to_same_scenario() {
        let s =
            parse("N = 64\nkappa = 2\nretrieval.mode = \"top_k\"\nretrieval.k = 2\nretrieval.weights = [0.6, 0.4]\n")
                .unwrap();
        let text = toml::to_string(&s).unwrap();
        assert_eq!(parse(&text).unwrap(), s);
    }
}
