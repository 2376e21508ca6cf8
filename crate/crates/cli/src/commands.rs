//! The four subcommands, as library functions.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use immunesim_core::meanfield::{
    cowpox_discrete_step, cowpox_grid, estimate_params, integrate_cowpox, integrate_sir, sir_equilibrium,
    stationary_analysis, CowpoxParams, ParamEstimate, SirParams, StationaryReport, TransitionCounts,
};
use immunesim_core::metrics::replay;
use immunesim_core::replicates::{
    aggregate, aggregate_outputs, summarize_aggregate, summarize_rows, Aggregate, Summary,
};
use immunesim_core::{run_replicates, EngineConfig, Execution, MetricsRow, RunOutput};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::eventlog;
use crate::manifest::{Manifest, Status};
use crate::scenario::Scenario;
use crate::table;

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Data(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub events: bool,
    pub out: Option<PathBuf>,
    pub exec: Execution,
}

impl RunOptions {
    fn apply(&self, scenario: &Scenario) -> Scenario {
        let mut s = scenario.clone();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(r) = self.replicates {
            s.replicates = r;
        }
        s
    }

    fn out_dir(&self, scenario: &Scenario) -> Result<PathBuf> {
        self.out
            .clone()
            .or_else(|| scenario.output_dir.clone())
            .ok_or_else(|| CliError::Config("no output directory: pass --out or set output_dir".into()))
    }
}

/// Headline statistics of the replicate-mean series and of each replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub mean: Summary,
    pub replicates: Vec<Summary>,
}

pub struct RunReport {
    pub out: PathBuf,
    pub runs: Vec<RunOutput>,
    pub aggregate: Aggregate,
    pub summary: SummaryDoc,
    pub manifest: Manifest,
}

pub fn metrics_file(rep: usize) -> String {
    format!("metrics_{rep}.csv")
}

/// Runs the scenario's replicates and writes per-replicate metrics, the
/// aggregate, the summary and (optionally) event logs.
pub fn cmd_run(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport> {
    let scenario = opts.apply(scenario);
    let mut cfg = scenario.to_engine()?;
    cfg.record_events = opts.events;
    let out = opts.out_dir(&scenario)?;
    ensure_dir(&out)?;

    let started = Instant::now();
    let mut manifest = Manifest::new("run", &scenario, opts.events);
    manifest.write(&out)?;

    let runs = run_replicates(&cfg, scenario.replicates, opts.exec)?;
    for (i, run) in runs.iter().enumerate() {
        let bytes = table::metrics_csv(&run.metrics)?;
        write(&out, &metrics_file(i), &bytes)?;
        manifest.record(&metrics_file(i), &bytes);
    }
    let agg = aggregate_outputs(&runs);
    let bytes = table::aggregate_csv(&agg)?;
    write(&out, "aggregate.csv", &bytes)?;
    manifest.record("aggregate.csv", &bytes);

    let summary = SummaryDoc {
        mean: summarize_aggregate(&agg),
        replicates: runs.iter().map(|r| summarize_rows(&r.metrics)).collect(),
    };
    let bytes = json_bytes(&summary)?;
    write(&out, "summary.json", &bytes)?;
    manifest.record("summary.json", &bytes);

    if opts.events {
        let mut counts = Vec::with_capacity(runs.len());
        for (i, run) in runs.iter().enumerate() {
            let bytes = eventlog::encode(&run.events)?;
            write(&out, &eventlog::events_file(i), &bytes)?;
            manifest.record(&eventlog::events_file(i), &bytes);
            let c = estimate_params(&run.events).map(|e| e.counts).unwrap_or_default();
            counts.push((i, c, run.detections.len()));
        }
        let bytes = table::event_counts_csv(&counts)?;
        write(&out, "event_counts.csv", &bytes)?;
        manifest.record("event_counts.csv", &bytes);
    }

    manifest.status = Status::Complete;
    manifest.duration_secs = Some(started.elapsed().as_secs_f64());
    manifest.write(&out)?;
    log::info!("run: {} replicates written to {}", runs.len(), out.display());
    Ok(RunReport { out, runs, aggregate: agg, summary, manifest })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Kappa,
    AlbumSize,
    HistoryLen,
    R0Count,
    N,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Kappa => "kappa",
            SweepAxis::AlbumSize => "album_size",
            SweepAxis::HistoryLen => "history_len",
            SweepAxis::R0Count => "r0_count",
            SweepAxis::N => "N",
        }
    }

    fn set(self, s: &mut Scenario, v: usize) {
        match self {
            SweepAxis::Kappa => s.kappa = v,
            SweepAxis::AlbumSize => s.album_size = v,
            SweepAxis::HistoryLen => s.history_len = v,
            SweepAxis::R0Count => s.r0_count = v,
            SweepAxis::N => s.n = v,
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "kappa" => SweepAxis::Kappa,
            "album_size" => SweepAxis::AlbumSize,
            "history_len" => SweepAxis::HistoryLen,
            "r0_count" => SweepAxis::R0Count,
            "N" | "n" => SweepAxis::N,
            other => {
                return Err(CliError::Config(format!(
                    "unknown sweep axis {other:?}; expected kappa, album_size, history_len, r0_count or N"
                )))
            }
        })
    }
}

pub struct SweepPoint {
    pub value: usize,
    pub runs: Vec<RunOutput>,
    pub aggregate: Aggregate,
    pub summary: Summary,
}

/// Runs the scenario once per axis value. Writes `<axis>_<value>/aggregate.csv`
/// and `summary.json` per value, plus `sweep_<axis>.csv` in long format.
pub fn cmd_sweep(scenario: &Scenario, axis: SweepAxis, values: &[usize], opts: &RunOptions) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(CliError::Config("sweep: empty list of values".into()));
    }
    let base = opts.apply(scenario);
    let out = opts.out_dir(&base)?;
    // Validate every point before running any.
    let cfgs: Vec<(usize, Scenario, EngineConfig)> = values
        .iter()
        .map(|&v| {
            let mut s = base.clone();
            axis.set(&mut s, v);
            s.to_engine().map(|c| (v, s, c))
        })
        .collect::<Result<_>>()?;
    ensure_dir(&out)?;
    let started = Instant::now();
    let mut manifest = Manifest::new(&format!("sweep {axis}"), &base, false);
    manifest.write(&out)?;

    let mut points = Vec::with_capacity(cfgs.len());
    for (v, s, cfg) in cfgs {
        let runs = run_replicates(&cfg, s.replicates, opts.exec)?;
        let agg = aggregate_outputs(&runs);
        let summary = summarize_aggregate(&agg);
        let sub = format!("{axis}_{v}");
        ensure_dir(&out.join(&sub))?;
        let bytes = table::aggregate_csv(&agg)?;
        write(&out.join(&sub), "aggregate.csv", &bytes)?;
        manifest.record(&format!("{sub}/aggregate.csv"), &bytes);
        let bytes = json_bytes(&summary)?;
        write(&out.join(&sub), "summary.json", &bytes)?;
        manifest.record(&format!("{sub}/summary.json"), &bytes);
        points.push(SweepPoint { value: v, runs, aggregate: agg, summary });
    }
    let long: Vec<(String, Aggregate)> = points.iter().map(|p| (p.value.to_string(), p.aggregate.clone())).collect();
    let name = format!("sweep_{axis}.csv");
    let bytes = table::sweep_csv(axis.name(), &long)?;
    write(&out, &name, &bytes)?;
    manifest.record(&name, &bytes);
    manifest.status = Status::Complete;
    manifest.duration_secs = Some(started.elapsed().as_secs_f64());
    manifest.write(&out)?;
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Sir,
    Cowpox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub betas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub etas: Vec<f64>,
    /// Initial `(r, rc)` pairs.
    pub starts: Vec<(f64, f64)>,
    /// Only points with `epsilon > eta + min_gap` are integrated.
    #[serde(default = "default_min_gap")]
    pub min_gap: f64,
    #[serde(default = "default_grid_t_end")]
    pub t_end: f64,
    /// A point passes when its final infected ratio is below this.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_min_gap() -> f64 {
    0.05
}

fn default_grid_t_end() -> f64 {
    1e4
}

fn default_threshold() -> f64 {
    1e-3
}

/// Mean-field parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanfieldSpec {
    pub model: Model,
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    /// Defaults to `epsilon`.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub eta: f64,
    pub r0: f64,
    #[serde(default)]
    pub rc0: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Keep every `stride`-th integration step in the trajectory.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

fn default_dt() -> f64 {
    0.1
}

fn default_t_end() -> f64 {
    100.0
}

fn default_stride() -> usize {
    10
}

impl MeanfieldSpec {
    pub fn load(path: &Path) -> Result<MeanfieldSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Parse { path: path.to_path_buf(), msg: e.to_string() })
    }

    fn cowpox(&self) -> CowpoxParams {
        CowpoxParams {
            beta: self.beta,
            delta: self.delta.unwrap_or(self.epsilon),
            epsilon: self.epsilon,
            eta: self.eta,
            r0: self.r0,
            rc0: self.rc0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub points: usize,
    pub passed: usize,
    pub all_pass: bool,
    pub worst_final_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanfieldReport {
    pub model: Model,
    pub final_r: f64,
    pub final_rc: Option<f64>,
    /// Closed-form limit, for the single-compartment model.
    pub equilibrium: Option<f64>,
    pub stationary: Option<StationaryReport>,
    pub clamp_events: usize,
    pub grid: Option<GridReport>,
}

/// Integrates the requested model and writes `trajectory.csv` and
/// `meanfield.json`, plus `grid.csv` when a grid is given.
pub fn cmd_meanfield(spec: &MeanfieldSpec, out: &Path, exec: Execution) -> Result<MeanfieldReport> {
    let (traj, equilibrium, stationary) = match spec.model {
        Model::Sir => {
            let p = SirParams { beta: spec.beta, gamma: spec.gamma, r0: spec.r0 };
            (integrate_sir(&p, spec.dt, spec.t_end, spec.stride)?, Some(sir_equilibrium(&p)), None)
        }
        Model::Cowpox => {
            let p = spec.cowpox();
            (integrate_cowpox(&p, spec.dt, spec.t_end, spec.stride)?, None, Some(stationary_analysis(&p)?))
        }
    };
    let grid = match &spec.grid {
        Some(g) => {
            let points = cowpox_grid(
                &g.betas,
                &g.epsilons,
                &g.etas,
                &g.starts,
                spec.dt,
                g.t_end,
                |p| p.epsilon > p.eta + g.min_gap,
                exec,
            )?;
            Some((points, g.threshold))
        }
        None => None,
    };
    ensure_dir(out)?;
    write(out, "trajectory.csv", &table::trajectory_csv(&traj)?)?;
    let grid_report = match &grid {
        Some((points, threshold)) => {
            write(out, "grid.csv", &table::grid_csv(points, *threshold)?)?;
            let passed = points.iter().filter(|g| g.final_r < *threshold).count();
            Some(GridReport {
                points: points.len(),
                passed,
                all_pass: passed == points.len(),
                worst_final_r: points.iter().map(|g| g.final_r).fold(0.0, f64::max),
            })
        }
        None => None,
    };
    let report = MeanfieldReport {
        model: spec.model,
        final_r: traj.final_r(),
        final_rc: traj.final_rc(),
        equilibrium,
        stationary,
        clamp_events: traj.clamp_events,
        grid: grid_report,
    };
    write(out, "meanfield.json", &json_bytes(&report)?)?;
    Ok(report)
}

/// Below this population size the pairwise mean-field approximation is
/// too coarse to be compared with a run.
pub const SMALL_N: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub n_agents: usize,
    pub replicates: usize,
    pub estimate: ParamEstimate,
    /// The prediction starts from the simulated ratios at this round.
    pub start_round: u32,
    pub linf_r: f64,
    /// Absent when the run produced no cures.
    pub linf_rc: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    /// The prediction starts at the first round whose mean cured ratio
    /// reaches this value. The difference equations have no term that
    /// creates cures, so before cures circulate the cowpox agents' own
    /// production dominates and the model cannot follow the run.
    pub start_cured: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions { start_cured: 0.1 }
    }
}

/// Estimates the transition probabilities from a run's event logs and
/// compares the simulated infected and cured ratios with the mean-field
/// difference equations. Writes `comparison.csv` and `compare.json` into
/// `out` (default: the run directory).
pub fn cmd_compare(run_dir: &Path, out: Option<&Path>, opts: CompareOptions) -> Result<CompareReport> {
    if !(0.0..=1.0).contains(&opts.start_cured) {
        return Err(CliError::Config(format!("start_cured must lie in [0, 1], got {}", opts.start_cured)));
    }
    let manifest = Manifest::read(run_dir)?;
    if !manifest.events {
        return Err(CliError::Data(format!(
            "{}: run was made without --events, no event log to compare",
            run_dir.display()
        )));
    }
    let n = manifest.scenario.n;
    let mut counts = TransitionCounts::default();
    let mut tables: Vec<Vec<MetricsRow>> = Vec::with_capacity(manifest.replicates);
    for rep in 0..manifest.replicates {
        let path = run_dir.join(eventlog::events_file(rep));
        if !path.exists() {
            return Err(CliError::Data(format!("missing event log {}", path.display())));
        }
        let events = eventlog::read(&path)?;
        for e in &events {
            counts.add(e);
        }
        tables.push(replay(&events, n));
    }
    if tables.iter().all(|t| t.is_empty()) {
        return Err(immunesim_core::SimError::EmptyLog.into());
    }
    let estimate = ParamEstimate::from_counts(counts);
    let refs: Vec<&[MetricsRow]> = tables.iter().map(|t| t.as_slice()).collect();
    let len = refs.iter().map(|t| t.len()).min().unwrap_or(0);
    let mean_of = |f: &dyn Fn(&MetricsRow) -> usize| -> Vec<f64> {
        (0..len).map(|i| refs.iter().map(|t| f(&t[i]) as f64).sum::<f64>() / (refs.len() * n) as f64).collect()
    };
    let r_sim = mean_of(&|row| row.infected);
    let rc_sim = mean_of(&|row| row.cured);
    let rounds: Vec<u32> = aggregate(&refs).rounds;

    let mut warnings = Vec::new();
    if n < SMALL_N {
        warnings.push(format!("N={n} is below {SMALL_N}; the mean-field approximation is coarse at this size"));
    }
    let has_cures = counts.cs_pairs + counts.ci_pairs > 0 && rc_sim.iter().any(|&x| x > 0.0);
    if !has_cures {
        warnings.push("no cure events in the log; comparing the infected ratio only".to_string());
    }
    for (name, v) in
        [("beta", estimate.beta), ("delta", estimate.delta), ("epsilon", estimate.epsilon), ("eta", estimate.eta)]
    {
        if v.is_none() {
            warnings.push(format!("{name}: no pairs of the corresponding kind, taken as 0"));
        }
    }
    let start = if has_cures {
        match rc_sim.iter().position(|&x| x > 0.0 && x >= opts.start_cured) {
            Some(i) => i,
            None => {
                warnings.push(format!(
                    "cured ratio never reaches {}; starting at the first round with a cure",
                    opts.start_cured
                ));
                rc_sim.iter().position(|&x| x > 0.0).unwrap_or(0)
            }
        }
    } else {
        0
    };
    let params = estimate.to_params(r_sim[start], rc_sim[start]);
    let mut r_mf = vec![r_sim[start]];
    let mut rc_mf = vec![rc_sim[start]];
    for _ in start + 1..len {
        let (r, rc) = cowpox_discrete_step(*r_mf.last().unwrap(), *rc_mf.last().unwrap(), &params);
        r_mf.push(r);
        rc_mf.push(rc);
    }
    let linf = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let linf_r = linf(&r_sim[start..], &r_mf);
    let linf_rc = has_cures.then(|| linf(&rc_sim[start..], &rc_mf));
    for w in &warnings {
        log::warn!("compare: {w}");
    }

    let out = out.unwrap_or(run_dir);
    ensure_dir(out)?;
    let bytes = table::comparison_csv(
        &rounds[start..],
        &r_sim[start..],
        &rc_sim[start..],
        &r_mf,
        has_cures.then_some(rc_mf.as_slice()),
    )?;
    write(out, "comparison.csv", &bytes)?;
    let report = CompareReport {
        n_agents: n,
        replicates: manifest.replicates,
        estimate,
        start_round: rounds[start],
        linf_r,
        linf_rc,
        warnings,
    };
    write(out, "compare.json", &json_bytes(&report)?)?;
    Ok(report)
}
