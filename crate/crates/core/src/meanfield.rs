//! Mean-field dynamics: the baseline infected-recovered model, the
//! infected/cured system with Cowpox agents, its stationary points, and
//! estimation of the pairwise transition probabilities from an event log.
//!
//! `r` is the infected ratio and `rc` the cured ratio. Each agent takes part
//! in exactly one pair per round and is the responder with probability 1/2,
//! which is where the factor 1/2 in every rate comes from.

use serde::{Deserialize, Serialize};

use crate::engine::PairEvent;
use crate::error::{Result, SimError};
use crate::metrics::CompartmentLabel;
use crate::replicates::{map_ordered, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    pub beta: f64,
    pub gamma: f64,
    pub r0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CowpoxParams {
    /// Infected questioner infects a sensitive responder.
    pub beta: f64,
    /// Cured questioner cures a sensitive responder.
    pub delta: f64,
    /// Cured questioner cures an infected responder.
    pub epsilon: f64,
    /// Infected questioner re-infects a cured responder.
    pub eta: f64,
    pub r0: f64,
    pub rc0: f64,
}

fn unit(field: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(SimError::config(field, format!("must lie in [0, 1], got {v}")))
    }
}

impl SirParams {
    pub fn validate(&self) -> Result<()> {
        unit("beta", self.beta)?;
        unit("gamma", self.gamma)?;
        unit("r0", self.r0)
    }
}

impl CowpoxParams {
    pub fn validate(&self) -> Result<()> {
        unit("beta", self.beta)?;
        unit("delta", self.delta)?;
        unit("epsilon", self.epsilon)?;
        unit("eta", self.eta)?;
        unit("r0", self.r0)?;
        unit("rc0", self.rc0)?;
        if self.r0 + self.rc0 > 1.0 + 1e-12 {
            return Err(SimError::config("rc0", "r0 + rc0 must not exceed 1"));
        }
        Ok(())
    }
}

/// Sampled solution. `rc` is absent for the single-compartment model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub r: Vec<f64>,
    pub rc: Option<Vec<f64>>,
    /// Steps whose raw state left the simplex and was clamped back.
    pub clamp_events: usize,
    pub max_violation: f64,
}

impl Trajectory {
    pub fn final_r(&self) -> f64 {
        *self.r.last().expect("trajectory has at least one point")
    }

    pub fn final_rc(&self) -> Option<f64> {
        self.rc.as_ref().and_then(|v| v.last().copied())
    }
}

pub fn sir_rhs(r: f64, p: &SirParams) -> f64 {
    p.beta * r * (1.0 - r) / 2.0 - p.gamma * r
}

/// Limit of the baseline model: `1 - 2 gamma / beta` above threshold, else 0.
pub fn sir_equilibrium(p: &SirParams) -> f64 {
    if p.beta > 0.0 && p.beta >= 2.0 * p.gamma {
        1.0 - 2.0 * p.gamma / p.beta
    } else {
        0.0
    }
}

/// One round of the difference equations, with `delta` kept separate.
/// The result is clamped to the simplex; clamping is logged.
pub fn cowpox_discrete_step(r: f64, rc: f64, p: &CowpoxParams) -> (f64, f64) {
    let s = 1.0 - rc - r;
    let r1 = r + 0.5 * (p.beta * r * s + p.eta * r * rc - p.epsilon * rc * r);
    let rc1 = rc + 0.5 * (p.delta * rc * s + p.epsilon * rc * r - p.eta * r * rc);
    let mut y = [r1, rc1];
    let v = clamp_simplex(&mut y);
    if v > 0.0 {
        log::debug!("discrete step clamped by {v:.3e}");
    }
    (y[0], y[1])
}

/// Right-hand side of the continuous system, where `delta` has merged into
/// `epsilon`.
pub fn cowpox_rhs(r: f64, rc: f64, p: &CowpoxParams) -> (f64, f64) {
    let dr = 0.5 * (p.beta * r * (1.0 - rc - r) + p.eta * r * rc - p.epsilon * rc * r);
    let drc = 0.5 * (p.epsilon * rc * (1.0 - rc) - p.eta * r * rc);
    (dr, drc)
}

/// Projects `y` onto `{y_i >= 0, sum y_i <= 1}` and returns the size of the
/// correction.
pub fn clamp_simplex<const D: usize>(y: &mut [f64; D]) -> f64 {
    let mut violation: f64 = 0.0;
    for v in y.iter_mut() {
        if *v < 0.0 {
            violation = violation.max(-*v);
            *v = 0.0;
        } else if *v < f64::MIN_POSITIVE {
            // Subnormals are exact enough and an order of magnitude slower.
            *v = 0.0;
        }
    }
    let sum: f64 = y.iter().sum();
    if sum > 1.0 {
        violation = violation.max(sum - 1.0);
        for v in y.iter_mut() {
            *v /= sum;
        }
    }
    violation
}

/// Raw RK4 output on `[0, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<const D: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; D]>,
    pub clamp_events: usize,
    pub max_violation: f64,
}

/// Classic fixed-step fourth-order Runge-Kutta on `[0, t_end]`, keeping
/// every `stride`-th state plus the last one. States are clamped to the
/// simplex after each step. A non-finite state aborts the integration.
pub fn integrate_rk4<const D: usize, F>(rhs: F, y0: [f64; D], dt: f64, t_end: f64, stride: usize) -> Result<Solution<D>>
where
    F: Fn(&[f64; D]) -> [f64; D],
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::config("dt", format!("must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(SimError::config("t_end", format!("must be non-negative, got {t_end}")));
    }
    let stride = stride.max(1);
    let n_steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let axpy = |y: &[f64; D], k: &[f64; D], h: f64| {
        let mut out = *y;
        for i in 0..D {
            out[i] += h * k[i];
        }
        out
    };

    let mut sol = Solution { times: vec![0.0], states: vec![y0], clamp_events: 0, max_violation: 0.0 };
    let mut y = y0;
    for step in 1..=n_steps {
        let t0 = (step - 1) as f64 * dt;
        let h = dt.min(t_end - t0);
        let k1 = rhs(&y);
        let k2 = rhs(&axpy(&y, &k1, h / 2.0));
        let k3 = rhs(&axpy(&y, &k2, h / 2.0));
        let k4 = rhs(&axpy(&y, &k3, h));
        for i in 0..D {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = t0 + h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { t, state: y.to_vec() });
        }
        let v = clamp_simplex(&mut y);
        if v > 0.0 {
            sol.clamp_events += 1;
            sol.max_violation = sol.max_violation.max(v);
            if v > 1e-6 {
                log::warn!("t={t}: state left the simplex by {v:.3e}, clamped");
            } else {
                log::trace!("t={t}: clamped {v:.3e}");
            }
        }
        if step % stride == 0 || step == n_steps {
            sol.times.push(t);
            sol.states.push(y);
        }
    }
    Ok(sol)
}

pub fn integrate_sir(p: &SirParams, dt: f64, t_end: f64, stride: usize) -> Result<Trajectory> {
    p.validate()?;
    let sol = integrate_rk4(|y: &[f64; 1]| [sir_rhs(y[0], p)], [p.r0], dt, t_end, stride)?;
    Ok(Trajectory {
        times: sol.times,
        r: sol.states.iter().map(|y| y[0]).collect(),
        rc: None,
        clamp_events: sol.clamp_events,
        max_violation: sol.max_violation,
    })
}

pub fn integrate_cowpox(p: &CowpoxParams, dt: f64, t_end: f64, stride: usize) -> Result<Trajectory> {
    p.validate()?;
    let rhs = |y: &[f64; 2]| {
        let (a, b) = cowpox_rhs(y[0], y[1], p);
        [a, b]
    };
    let sol = integrate_rk4(rhs, [p.r0, p.rc0], dt, t_end, stride)?;
    Ok(Trajectory {
        times: sol.times,
        r: sol.states.iter().map(|y| y[0]).collect(),
        rc: Some(sol.states.iter().map(|y| y[1]).collect()),
        clamp_events: sol.clamp_events,
        max_violation: sol.max_violation,
    })
}

/// Iterates the difference equations for `rounds` rounds from `(r0, rc0)`.
pub fn discrete_trajectory(p: &CowpoxParams, rounds: usize) -> Result<Trajectory> {
    p.validate()?;
    let (mut r, mut rc) = (p.r0, p.rc0);
    let mut traj = Trajectory { times: vec![0.0], r: vec![r], rc: Some(vec![rc]), clamp_events: 0, max_violation: 0.0 };
    for t in 1..=rounds {
        (r, rc) = cowpox_discrete_step(r, rc, p);
        traj.times.push(t as f64);
        traj.r.push(r);
        traj.rc.as_mut().expect("two-compartment").push(rc);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// Infection dies out and the cure takes over.
    Extinction,
    /// Infection persists.
    Endemic,
    /// `epsilon == eta`: every point of `r + rc = 1` is stationary.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    /// Stationary points `(r, rc)` in the simplex.
    pub fixed_points: Vec<(f64, f64)>,
    pub classification: Classification,
    /// `epsilon > eta`.
    pub condition_satisfied: bool,
    /// Numerical long-horizon limits from a fixed set of interior starts.
    pub numerical_limits: Vec<(f64, f64)>,
}

const STATIONARY_TOL: f64 = 1e-10;
const LIMIT_STARTS: [(f64, f64); 3] = [(0.1, 0.1), (0.3, 0.3), (0.6, 0.2)];

pub fn stationary_analysis(p: &CowpoxParams) -> Result<StationaryReport> {
    p.validate()?;
    let mut fixed_points: Vec<(f64, f64)> = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
        .into_iter()
        .filter(|&(r, rc)| {
            let (a, b) = cowpox_rhs(r, rc, p);
            a.abs() < STATIONARY_TOL && b.abs() < STATIONARY_TOL
        })
        .collect();
    if p.epsilon == p.eta {
        fixed_points.push((0.5, 0.5));
    }
    let numerical_limits = LIMIT_STARTS
        .iter()
        .map(|&(r0, rc0)| {
            let q = CowpoxParams { r0, rc0, ..*p };
            let t = integrate_cowpox(&q, 0.1, 1e4, usize::MAX)?;
            Ok((t.final_r(), t.final_rc().unwrap_or(0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let condition_satisfied = p.epsilon > p.eta;
    let classification = if condition_satisfied {
        Classification::Extinction
    } else if p.epsilon == p.eta {
        Classification::Boundary
    } else if numerical_limits.iter().all(|&(r, _)| r < 1e-6) {
        Classification::Extinction
    } else {
        Classification::Endemic
    };
    Ok(StationaryReport { fixed_points, classification, condition_satisfied, numerical_limits })
}

/// Outcome of one point of a parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: CowpoxParams,
    pub final_r: f64,
    pub final_rc: f64,
}

/// Integrates every combination of `betas x epsilons x etas x starts` to
/// `t_end`, keeping only combinations accepted by `keep`.
#[allow(clippy::too_many_arguments)]
pub fn cowpox_grid(
    betas: &[f64],
    epsilons: &[f64],
    etas: &[f64],
    starts: &[(f64, f64)],
    dt: f64,
    t_end: f64,
    keep: impl Fn(&CowpoxParams) -> bool,
    exec: Execution,
) -> Result<Vec<GridPoint>> {
    let mut points = Vec::new();
    for &beta in betas {
        for &epsilon in epsilons {
            for &eta in etas {
                for &(r0, rc0) in starts {
                    let p = CowpoxParams { beta, delta: epsilon, epsilon, eta, r0, rc0 };
                    if keep(&p) {
                        points.push(p);
                    }
                }
            }
        }
    }
    map_ordered(exec, &points, |p| {
        let t = integrate_cowpox(p, dt, t_end, usize::MAX)?;
        Ok(GridPoint { params: *p, final_r: t.final_r(), final_rc: t.final_rc().unwrap_or(0.0) })
    })
    .into_iter()
    .collect()
}

/// Success and trial counts behind each transition estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    /// Infected questioner, sensitive responder.
    pub is_pairs: u64,
    pub is_infected: u64,
    /// Cured questioner, sensitive responder.
    pub cs_pairs: u64,
    pub cs_cured: u64,
    /// Cured questioner, infected responder.
    pub ci_pairs: u64,
    pub ci_cured: u64,
    /// Infected questioner, cured responder.
    pub ic_pairs: u64,
    pub ic_infected: u64,
}

impl TransitionCounts {
    pub fn add(&mut self, e: &PairEvent) {
        use CompartmentLabel::*;
        match (e.q_state_before, e.a_state_before) {
            (Infected, Sensitive) => {
                self.is_pairs += 1;
                self.is_infected += (e.a_state_after == Infected) as u64;
            }
            (Cured, Sensitive) => {
                self.cs_pairs += 1;
                self.cs_cured += (e.a_state_after == Cured) as u64;
            }
            (Cured, Infected) => {
                self.ci_pairs += 1;
                self.ci_cured += (e.a_state_after == Cured) as u64;
            }
            (Infected, Cured) => {
                self.ic_pairs += 1;
                self.ic_infected += (e.a_state_after == Infected) as u64;
            }
            _ => {}
        }
    }
}

/// Estimated transition probabilities. An estimate is absent when no pair
/// of the corresponding kind was observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
    pub counts: TransitionCounts,
}

fn ratio(k: u64, n: u64) -> Option<f64> {
    (n > 0).then(|| k as f64 / n as f64)
}

impl ParamEstimate {
    pub fn from_counts(counts: TransitionCounts) -> Self {
        ParamEstimate {
            beta: ratio(counts.is_infected, counts.is_pairs),
            delta: ratio(counts.cs_cured, counts.cs_pairs),
            epsilon: ratio(counts.ci_cured, counts.ci_pairs),
            eta: ratio(counts.ic_infected, counts.ic_pairs),
            counts,
        }
    }

    /// Parameters for the mean-field model, absent estimates taken as 0.
    pub fn to_params(&self, r0: f64, rc0: f64) -> CowpoxParams {
        CowpoxParams {
            beta: self.beta.unwrap_or(0.0),
            delta: self.delta.unwrap_or(0.0),
            epsilon: self.epsilon.unwrap_or(0.0),
            eta: self.eta.unwrap_or(0.0),
            r0,
            rc0,
        }
    }
}

/// Counts, per pair type, how often the responder ended in the questioner's
/// compartment.
pub fn estimate_params<'a>(events: impl IntoIterator<Item = &'a PairEvent>) -> Result<ParamEstimate> {
    let mut counts = TransitionCounts::default();
    let mut any = false;
    for e in events {
        any = true;
        counts.add(e);
    }
    if !any {
        return Err(SimError::EmptyLog);
    }
    Ok(ParamEstimate::from_counts(counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AgentId, AnswerClass, KindTag, QuestionClass, SampleId};

    fn cp(beta: f64, delta: f64, epsilon: f64, eta: f64) -> CowpoxParams {
        CowpoxParams { beta, delta, epsilon, eta, r0: 0.1, rc0: 0.05 }
    }

    #[test]
    fn sir_rhs_values() {
        let p = SirParams { beta: 0.8, gamma: 0.2, r0: 0.01 };
        assert_eq!(sir_rhs(0.0, &p), 0.0);
        assert!((sir_rhs(1.0, &p) + 0.2).abs() < 1e-15);
        assert!(sir_rhs(0.5, &p).abs() < 1e-15);
    }

    #[test]
    fn sir_equilibrium_values() {
        let eq = |beta, gamma| sir_equilibrium(&SirParams { beta, gamma, r0: 0.1 });
        assert!((eq(0.8, 0.2) - 0.5).abs() < 1e-15);
        assert_eq!(eq(0.3, 0.2), 0.0);
        assert_eq!(eq(0.4, 0.2), 0.0);
    }

    #[test]
    fn sir_converges_to_equilibrium() {
        let p = SirParams { beta: 0.8, gamma: 0.2, r0: 0.01 };
        let t = integrate_sir(&p, 0.1, 1e3, usize::MAX).unwrap();
        assert!((t.final_r() - 0.5).abs() < 1e-4);
        let p = SirParams { beta: 0.3, gamma: 0.2, r0: 0.5 };
        assert!(integrate_sir(&p, 0.1, 1e3, usize::MAX).unwrap().final_r() < 1e-6);
    }

    // Logistic closed form for gamma = 0: r(t) = 1 / (1 + (1/r0 - 1) e^{-beta t / 2}).
    #[test]
    fn rk4_matches_logistic_closed_form() {
        let p = SirParams { beta: 0.6, gamma: 0.0, r0: 0.02 };
        let t = integrate_sir(&p, 0.05, 30.0, 1).unwrap();
        for (time, r) in t.times.iter().zip(&t.r) {
            let exact = 1.0 / (1.0 + (1.0 / p.r0 - 1.0) * (-p.beta * time / 2.0).exp());
            assert!((r - exact).abs() < 1e-8, "t={time}");
        }
    }

    #[test]
    fn step_halving_converges_at_fourth_order() {
        let p = CowpoxParams { r0: 0.2, rc0: 0.05, ..cp(0.8, 0.6, 0.6, 0.3) };
        let at = |dt| integrate_cowpox(&p, dt, 20.0, usize::MAX).unwrap().final_r();
        let (a, b, c) = (at(0.2), at(0.1), at(0.05));
        assert!((b - c).abs() < 1e-8);
        let ratio = (a - b) / (b - c);
        assert!((ratio - 16.0).abs() < 2.0, "{ratio}");
    }

    #[test]
    fn rhs_matches_central_differences() {
        let p = CowpoxParams { r0: 0.5, rc0: 0.3, ..cp(0.8, 0.6, 0.6, 0.3) };
        let h = 1e-3;
        let traj = integrate_cowpox(&p, h, 2.0 * h, 1).unwrap();
        let rc = traj.rc.as_ref().unwrap();
        // Centre sample at t = h.
        let (dr, drc) = cowpox_rhs(traj.r[1], rc[1], &p);
        let fd_r = (traj.r[2] - traj.r[0]) / (2.0 * h);
        let fd_rc = (rc[2] - rc[0]) / (2.0 * h);
        assert!((dr - fd_r).abs() < 1e-6);
        assert!((drc - fd_rc).abs() < 1e-6);
    }

    #[test]
    fn discrete_step_by_hand() {
        // r=0.1, rc=0.05, s=0.85.
        // r'  = 0.1  + 0.5*(0.8*0.1*0.85 + 0.3*0.1*0.05 - 0.6*0.05*0.1)  = 0.1 + 0.5*0.0665
        // rc' = 0.05 + 0.5*(0.6*0.05*0.85 + 0.6*0.05*0.1 - 0.3*0.1*0.05) = 0.05 + 0.5*0.027
        let (r, rc) = cowpox_discrete_step(0.1, 0.05, &cp(0.8, 0.6, 0.6, 0.3));
        assert!((r - 0.13325).abs() < 1e-15);
        assert!((rc - 0.0635).abs() < 1e-15);
    }

    #[test]
    fn discrete_reductions() {
        let p = cp(0.8, 0.6, 0.6, 0.3);
        for rc in [0.0, 0.3, 1.0] {
            assert_eq!(cowpox_discrete_step(0.0, rc, &p).0, 0.0);
        }
        let (r, rc) = cowpox_discrete_step(0.3, 0.0, &p);
        assert_eq!(rc, 0.0);
        assert!((r - (0.3 + 0.5 * 0.8 * 0.3 * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn rhs_fixed_points() {
        let p = cp(0.8, 0.6, 0.6, 0.3);
        assert_eq!(cowpox_rhs(0.0, 1.0, &p), (0.0, 0.0));
        assert_eq!(cowpox_rhs(0.0, 0.0, &p), (0.0, 0.0));
        assert_eq!(cowpox_rhs(1.0, 0.0, &p), (0.0, 0.0));
        assert_eq!(cowpox_rhs(0.4, 0.0, &p).1, 0.0);
    }

    #[test]
    fn stationary_classification() {
        let rep = stationary_analysis(&cp(0.8, 0.6, 0.6, 0.3)).unwrap();
        assert!(rep.condition_satisfied);
        assert_eq!(rep.classification, Classification::Extinction);
        assert!(rep.fixed_points.contains(&(0.0, 1.0)));
        for (r, rc) in &rep.fixed_points {
            let (a, b) = cowpox_rhs(*r, *rc, &cp(0.8, 0.6, 0.6, 0.3));
            assert!(a.abs() < 1e-10 && b.abs() < 1e-10);
        }

        let rep = stationary_analysis(&cp(0.8, 0.4, 0.4, 0.4)).unwrap();
        assert_eq!(rep.classification, Classification::Boundary);
        assert!(!rep.condition_satisfied);

        let rep = stationary_analysis(&cp(0.9, 0.2, 0.2, 0.6)).unwrap();
        assert_eq!(rep.classification, Classification::Endemic);
        let r_lims: Vec<f64> = rep.numerical_limits.iter().map(|l| l.0).collect();
        assert!(r_lims.iter().all(|&r| r > 0.0));
        let spread = r_lims.iter().cloned().fold(f64::MIN, f64::max) - r_lims.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-3);
    }

    #[test]
    fn disease_free_invariance() {
        let p = CowpoxParams { r0: 0.0, rc0: 0.2, ..cp(0.9, 0.5, 0.3, 0.6) };
        let t = integrate_cowpox(&p, 0.1, 100.0, 10).unwrap();
        assert!(t.r.iter().all(|&r| r == 0.0));
        let d = discrete_trajectory(&p, 50).unwrap();
        assert!(d.r.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn simplex_preserved_on_grid() {
        let vals = [0.0, 0.25, 0.5, 0.75, 1.0];
        let pts =
            cowpox_grid(&vals, &vals, &vals, &[(0.3, 0.3), (0.9, 0.1)], 0.1, 50.0, |_| true, Execution::Sequential)
                .unwrap();
        for g in pts {
            assert!(g.final_r >= 0.0 && g.final_rc >= 0.0 && g.final_r + g.final_rc <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn non_finite_aborts() {
        let err = integrate_rk4(|_: &[f64; 1]| [f64::NAN], [0.1], 0.1, 1.0, 1).unwrap_err();
        assert!(matches!(err, SimError::NonFinite { .. }));
    }

    fn ev(q: CompartmentLabel, a: CompartmentLabel, after: CompartmentLabel) -> PairEvent {
        PairEvent {
            round: 1,
            questioner: AgentId(0),
            responder: AgentId(1),
            q_state_before: q,
            a_state_before: a,
            q_state_after: q,
            a_state_after: after,
            retrieved: SampleId(0),
            retrieved_kind: KindTag::Benign,
            question: QuestionClass::BenignQ,
            answer: AnswerClass::BenignA,
            detected: false,
            q_virus_before: false,
            q_cure_before: false,
            a_virus_before: false,
            a_cure_before: false,
            q_virus_after: false,
            q_cure_after: false,
            a_virus_after: false,
            a_cure_after: false,
        }
    }

    #[test]
    fn estimator_counts() {
        use CompartmentLabel::*;
        let evs = vec![
            ev(Infected, Sensitive, Infected),
            ev(Infected, Sensitive, Sensitive),
            ev(Infected, Sensitive, Infected),
            ev(Infected, Sensitive, Infected),
            ev(Sensitive, Sensitive, Sensitive),
        ];
        let e = estimate_params(&evs).unwrap();
        assert_eq!(e.beta, Some(0.75));
        assert_eq!(e.delta, None);
        assert_eq!(e.epsilon, None);
        assert_eq!(e.eta, None);
        assert_eq!(e.counts.is_pairs, 4);
        assert_eq!(estimate_params(&[]), Err(SimError::EmptyLog));
    }
}
