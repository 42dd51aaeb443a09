//! Offline checks of the tracking and recurrence guarantees on a finished
//! episode.

use serde::{Deserialize, Serialize};

use crate::quantized::algorithm::{EpisodeLog, EpisodeTrace, Path};
use crate::recurrence::{window_scan, MEMBERSHIP_TOL};
use crate::setgeom::CompactSet;

/// Absolute slack for the tracking comparison.
pub const TRACKING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// Sensed state inside the uncertainty box at every step.
    Containment,
    /// `‖ξ̂(t) - ξ(t)‖ <= ε e^{-αt}` at every sample.
    Tracking,
    /// Predicted path recurrent with shrinking slack from every window on.
    NominalRecurrence,
    /// Plant path recurrent with doubled slack from every window on.
    PlantRecurrence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseResult {
    pub clause: Clause,
    pub pass: bool,
    /// Smallest slack seen; negative means violated.
    pub worst_margin: f64,
    /// Step (or window) where the worst margin occurs.
    pub worst_step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub clauses: Vec<ClauseResult>,
}

impl GuaranteeReport {
    pub fn all_pass(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn clause(&self, which: Clause) -> &ClauseResult {
        self.clauses.iter().find(|c| c.clause == which).expect("every clause is reported")
    }
}

/// Recurrence slack `ε e^{-iατ}` for window `i`.
pub fn window_slack(eps: f64, alpha: f64, tau: f64, i: usize) -> f64 {
    eps * (-(i as f64) * alpha * tau).exp()
}

/// Window length `τ + c* ε e^{-(iα + L)τ}` for window `i`.
pub fn window_length(eps: f64, alpha: f64, l_tau: f64, tau: f64, c_star: f64, i: usize) -> f64 {
    tau + c_star * eps * (-((i as f64) * alpha + l_tau) * tau).exp()
}

/// First window index from which both the doubled slack and the window
/// excess are below `threshold`; `None` when they never get there.
pub fn asymptotic_index(eps: f64, alpha: f64, l_tau: f64, tau: f64, c_star: f64, threshold: f64) -> Option<usize> {
    if !(threshold > 0.0) {
        return None;
    }
    if alpha == 0.0 {
        let done = 2.0 * eps < threshold && c_star * eps * (-l_tau * tau).exp() < threshold;
        return done.then_some(0);
    }
    let need_slack = ((2.0 * eps / threshold).ln() / (alpha * tau)).max(0.0);
    let need_excess = if c_star > 0.0 {
        (((c_star * eps / threshold).ln() - l_tau * tau) / (alpha * tau)).max(0.0)
    } else {
        0.0
    };
    let mut i = need_slack.max(need_excess).floor() as usize;
    while 2.0 * window_slack(eps, alpha, tau, i) >= threshold
        || window_length(eps, alpha, l_tau, tau, c_star, i) - tau >= threshold
    {
        i += 1;
    }
    Some(i)
}

fn recurrence_clause(
    clause: Clause,
    path: &Path,
    q: &CompactSet,
    log: &EpisodeLog,
    slack_factor: f64,
) -> ClauseResult {
    let cfg = &log.header.config;
    let c_star = log.header.c_star.unwrap_or(0.0);
    let horizon = cfg.steps as f64 * cfg.tau;
    let dist: Vec<f64> = path.states.iter().map(|x| q.distance_unchecked(x)).collect();
    let mut worst = (f64::INFINITY, 0);
    for (i, &start) in path.window_starts.iter().enumerate() {
        let eps_i = slack_factor * window_slack(cfg.eps, cfg.alpha, cfg.tau, i);
        let len_i = window_length(cfg.eps, cfg.alpha, cfg.l_tau, cfg.tau, c_star, i);
        let times = &path.times[start..];
        let d = &dist[start..];
        let v = window_scan(times, |k| d[k] <= eps_i + MEMBERSHIP_TOL, len_i, horizon);
        let margin = if v.holds { len_i - v.max_gap } else { (len_i - v.max_gap).min(-f64::MIN_POSITIVE) };
        if margin < worst.0 {
            worst = (margin, i);
        }
    }
    ClauseResult {
        clause,
        pass: worst.0 >= 0.0,
        worst_margin: worst.0,
        worst_step: worst.1,
    }
}

/// Checks containment, tracking and both windowed recurrence clauses.
pub fn verify_guarantees(log: &EpisodeLog, trace: &EpisodeTrace) -> GuaranteeReport {
    let cfg = &log.header.config;
    let q = &log.header.q;

    let mut contain = (f64::INFINITY, 0);
    let mut contain_ok = true;
    for s in &log.steps {
        let m = s
            .s_center
            .iter()
            .zip(&s.s_radius)
            .zip(&s.x)
            .map(|((c, r), x)| r - (x - c).abs())
            .fold(f64::INFINITY, f64::min);
        let scale = s.s_center.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        contain_ok &= m >= -(1e-9 * s.r + 1e-14 * scale);
        if m < contain.0 {
            contain = (m, s.i);
        }
    }

    let mut track = (f64::INFINITY, 0);
    for (i, (nom, plant)) in trace.nominal.iter().zip(&trace.plant).enumerate() {
        let offset = i as f64 * cfg.tau;
        for k in 0..nom.len().min(plant.len()) {
            let err = nom
                .state(k)
                .iter()
                .zip(plant.state(k))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let bound = cfg.eps * (-cfg.alpha * (offset + nom.times[k])).exp();
            let m = bound - err;
            if m < track.0 {
                track = (m, i);
            }
        }
    }

    let nominal = trace.nominal_path();
    let plant = trace.plant_path();
    GuaranteeReport {
        clauses: vec![
            ClauseResult {
                clause: Clause::Containment,
                pass: contain_ok,
                worst_margin: contain.0,
                worst_step: contain.1,
            },
            ClauseResult {
                clause: Clause::Tracking,
                pass: track.0 >= -TRACKING_TOL,
                worst_margin: track.0,
                worst_step: track.1,
            },
            recurrence_clause(Clause::NominalRecurrence, &nominal, q, log, 1.0),
            recurrence_clause(Clause::PlantRecurrence, &plant, q, log, 2.0),
        ],
    }
}
