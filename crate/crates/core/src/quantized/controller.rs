//! Reference recurrence controllers, validated by simulation before use.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_feedback, ControlSystem, Rk4, DEFAULT_DT};
use crate::error::{check_dim, Error, Result};
use crate::recurrence::{is_recurrent, RecurrenceSpec, MEMBERSHIP_TOL};
use crate::setgeom::{CompactSet, Hyperrect};

/// State feedback `x ↦ u`, held constant over each integration step.
pub type FeedbackLaw = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Gains of the double-integrator reference law
/// `u = clamp(-K_SWITCH (x1 + x2|x2|/2) - K_DAMP x2, -1, 1)`.
const K_SWITCH: f64 = 10.0;
const K_DAMP: f64 = 2.0;

/// Switching-curve law for `ẍ = u`, `|u| <= 1`. Far from the origin it
/// behaves like minimum-time bang-bang control; near the origin it is a
/// damped linear feedback, so it does not chatter.
pub fn double_integrator_law() -> FeedbackLaw {
    Arc::new(|x: &[f64]| {
        let s = x[0] + 0.5 * x[1] * x[1].abs();
        vec![(-K_SWITCH * s - K_DAMP * x[1]).clamp(-1.0, 1.0)]
    })
}

/// `u = clamp(-k·x, lo, hi)` for a single input.
pub fn saturated_linear_law(gains: Vec<f64>, lo: f64, hi: f64) -> FeedbackLaw {
    Arc::new(move |x: &[f64]| {
        let v: f64 = gains.iter().zip(x).map(|(k, xi)| -k * xi).sum();
        vec![v.clamp(lo, hi)]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    /// Initial states per axis on each box of `Q`.
    pub grid_per_axis: usize,
    /// Closed loops are checked over this many windows of length `τ`.
    pub windows: usize,
    /// Sample points per axis of the envelope for the return-time sweep.
    pub envelope_per_axis: usize,
    pub dt: f64,
    /// Treat return-time and distance failures as fatal.
    pub strict: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            grid_per_axis: 9,
            windows: 3,
            envelope_per_axis: 21,
            dt: DEFAULT_DT,
            strict: false,
        }
    }
}

/// What the validation sweep found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub grid_points: usize,
    /// Initial states in `Q` whose closed loop is not `(τ, Q)`-recurrent.
    pub recurrence_failures: Vec<Vec<f64>>,
    pub envelope_samples: usize,
    /// Envelope states outside `Q` that do not reach `Q` within `τ`.
    pub return_time_failures: Vec<Vec<f64>>,
    /// Envelope states whose distance to `Q` grows on the way back.
    pub distance_failures: Vec<Vec<f64>>,
    pub max_return_time: f64,
    pub strict: bool,
}

impl ValidationReport {
    pub fn assumption_holds(&self) -> bool {
        self.recurrence_failures.is_empty() && self.return_time_failures.is_empty() && self.distance_failures.is_empty()
    }
}

/// Outcome of driving one state back to `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnProbe {
    /// First time in `Q`, `None` if not reached within the probe horizon.
    pub time: Option<f64>,
    /// `max_t d(ξ(t), Q) - d(x, Q)` up to the hit (or the horizon).
    pub distance_growth: f64,
}

#[derive(Clone)]
pub struct RecurrenceController {
    law: FeedbackLaw,
    q: CompactSet,
    tau: f64,
    eps_star: f64,
    c_star: Option<f64>,
    envelope: Hyperrect,
    report: ValidationReport,
}

impl fmt::Debug for RecurrenceController {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RecurrenceController")
            .field("tau", &self.tau)
            .field("eps_star", &self.eps_star)
            .field("c_star", &self.c_star)
            .field("envelope", &self.envelope)
            .finish()
    }
}

/// First time the closed loop from `x` reaches `Q`, refined by bisection
/// inside the step where it happens.
pub fn return_probe(sys: &ControlSystem, q: &CompactSet, law: &FeedbackLaw, x: &[f64], horizon: f64, dt: f64) -> Result<ReturnProbe> {
    let d0 = q.distance(x)?;
    if d0 <= MEMBERSHIP_TOL {
        return Ok(ReturnProbe { time: Some(0.0), distance_growth: 0.0 });
    }
    let (traj, signal) = match simulate_feedback(sys, x, law.as_ref(), horizon, dt) {
        Ok(r) => r,
        Err(Error::IntegrationBlowup { .. }) => {
            return Ok(ReturnProbe { time: None, distance_growth: f64::INFINITY });
        }
        Err(e) => return Err(e),
    };
    let mut growth: f64 = 0.0;
    for k in 1..traj.len() {
        let d = q.distance_unchecked(traj.state(k));
        if d <= MEMBERSHIP_TOL {
            let (t0, u) = (traj.times[k - 1], &signal.values()[k - 1]);
            let (mut lo, mut hi) = (0.0, traj.times[k] - t0);
            let mut rk = Rk4::new(sys.state_dim());
            while hi - lo > 1e-7 {
                let mid = 0.5 * (lo + hi);
                let mut y = traj.state(k - 1).to_vec();
                rk.step(sys, &mut y, u, mid);
                if q.distance_unchecked(&y) <= MEMBERSHIP_TOL {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(ReturnProbe { time: Some(t0 + hi), distance_growth: growth });
        }
        growth = growth.max(d - d0);
    }
    Ok(ReturnProbe { time: None, distance_growth: growth })
}

impl RecurrenceController {
    /// Validates `law` as a recurrence controller for `Q` and window `τ`.
    ///
    /// The hard requirement is that the closed loop from every grid point of
    /// `Q` is `(τ, Q)`-recurrent. The return-time condition (reach `Q` within
    /// `τ` with nonincreasing distance) is checked on a grid of the envelope
    /// and only enforced with `strict`.
    pub fn validate(sys: &ControlSystem, q: CompactSet, tau: f64, eps: f64, law: FeedbackLaw, opts: &ValidationOptions) -> Result<Self> {
        check_dim(sys.state_dim(), q.dim())?;
        if !(tau > 0.0 && eps > 0.0) {
            return Err(Error::Argument(format!("need tau > 0 and eps > 0, got {tau}, {eps}")));
        }
        if opts.grid_per_axis < 2 || opts.envelope_per_axis < 2 || opts.windows == 0 {
            return Err(Error::Argument("validation grids need >= 2 points and >= 1 window".into()));
        }
        let horizon = tau * opts.windows as f64;
        let spec = RecurrenceSpec::new(q.clone(), tau, 0.0, Some(horizon))?;
        let starts: Vec<Vec<f64>> = q.boxes().iter().flat_map(|b| b.tensor_grid(opts.grid_per_axis)).collect();
        let steps_per_window = (tau / opts.dt).round() as usize;
        let runs: Vec<(Vec<f64>, Option<Vec<Vec<f64>>>)> = starts
            .par_iter()
            .map(|x0| -> Result<_> {
                match simulate_feedback(sys, x0, law.as_ref(), horizon, opts.dt) {
                    Ok((traj, _)) => {
                        let ok = is_recurrent(&traj, &spec)?.holds;
                        let marks = (1..=opts.windows)
                            .map(|w| traj.state((w * steps_per_window).min(traj.len() - 1)).to_vec())
                            .collect();
                        Ok((x0.clone(), ok.then_some(marks)))
                    }
                    Err(Error::IntegrationBlowup { .. }) | Err(Error::Domain(_)) => Ok((x0.clone(), None)),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;

        let mut envelope = q.bounding_box();
        let mut recurrence_failures = Vec::new();
        for (x0, marks) in &runs {
            match marks {
                Some(ms) => {
                    for m in ms {
                        envelope = envelope.hull(&Hyperrect::ball(m.clone(), 0.0)?);
                    }
                }
                None => recurrence_failures.push(x0.clone()),
            }
        }
        if !recurrence_failures.is_empty() {
            return Err(Error::ControllerInvalid { failing: recurrence_failures });
        }
        let envelope = envelope.inflate(eps);

        let per = opts.envelope_per_axis;
        let samples = envelope.tensor_grid(per);
        let probes: Vec<Option<ReturnProbe>> = samples
            .par_iter()
            .map(|x| -> Result<_> {
                if q.distance_unchecked(x) <= MEMBERSHIP_TOL {
                    return Ok(None);
                }
                return_probe(sys, &q, &law, x, tau, opts.dt).map(Some)
            })
            .collect::<Result<_>>()?;

        let mut return_time_failures = Vec::new();
        let mut distance_failures = Vec::new();
        let mut max_return_time: f64 = 0.0;
        for (x, p) in samples.iter().zip(&probes) {
            let Some(p) = p else { continue };
            match p.time {
                Some(t) if t <= tau + 1e-9 => max_return_time = max_return_time.max(t),
                _ => return_time_failures.push(x.clone()),
            }
            if p.distance_growth > MEMBERSHIP_TOL {
                distance_failures.push(x.clone());
            }
        }
        let c_star = lipschitz_of_samples(&samples, &probes, per, envelope.dim());
        let report = ValidationReport {
            grid_points: starts.len(),
            recurrence_failures: vec![],
            envelope_samples: probes.iter().flatten().count(),
            return_time_failures,
            distance_failures,
            max_return_time,
            strict: opts.strict,
        };
        if opts.strict && !report.assumption_holds() {
            let mut failing = report.return_time_failures.clone();
            failing.extend(report.distance_failures.iter().cloned());
            return Err(Error::ControllerInvalid { failing });
        }
        Ok(Self {
            law,
            q,
            tau,
            eps_star: eps,
            c_star,
            envelope,
            report,
        })
    }

    /// Validated switching-curve controller for the double integrator with
    /// `|u| <= 1`. Windows shorter than 2 s are impossible from the corners
    /// of the unit square, so `τ >= 2` is required.
    pub fn double_integrator_reference(sys: &ControlSystem, q: CompactSet, tau: f64, eps: f64, opts: &ValidationOptions) -> Result<Self> {
        if sys.state_dim() != 2 || sys.input_dim() != 1 {
            return Err(Error::UnsupportedInput(format!("{} is not a double integrator", sys.name())));
        }
        if tau < 2.0 {
            return Err(Error::Argument(format!("tau must be >= 2 for the double integrator, got {tau}")));
        }
        Self::validate(sys, q, tau, eps, double_integrator_law(), opts)
    }

    /// Built-in controller for the systems the crate knows: the double
    /// integrator gets the switching-curve law, scalar `ẋ = a x + b u` gets
    /// `u = -(a + 1) x / b` saturated to `U`.
    pub fn reference(sys: &ControlSystem, q: CompactSet, tau: f64, eps: f64, opts: &ValidationOptions) -> Result<Self> {
        let model = sys.linear_model();
        let is_double_integrator = model.is_some_and(|m| {
            m.a == [vec![0.0, 1.0], vec![0.0, 0.0]] && m.b == [vec![0.0], vec![1.0]]
        });
        if is_double_integrator {
            return Self::double_integrator_reference(sys, q, tau, eps, opts);
        }
        match model {
            Some(m) if sys.state_dim() == 1 && sys.input_dim() == 1 && m.b[0][0] != 0.0 => {
                let ub = sys.input_box();
                let law = saturated_linear_law(vec![(m.a[0][0] + 1.0) / m.b[0][0]], ub.lower()[0], ub.upper()[0]);
                Self::validate(sys, q, tau, eps, law, opts)
            }
            _ => Err(Error::UnsupportedInput(format!("no reference controller for {}", sys.name()))),
        }
    }

    pub fn control(&self, x: &[f64]) -> Vec<f64> {
        (self.law)(x)
    }

    pub fn law(&self) -> &FeedbackLaw {
        &self.law
    }

    pub fn q(&self) -> &CompactSet {
        &self.q
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Largest `ε` the controller was validated for.
    pub fn eps_star(&self) -> f64 {
        self.eps_star
    }

    /// Estimated Lipschitz constant of the return time; `None` when no two
    /// neighboring envelope samples both return within `τ`.
    pub fn c_star(&self) -> Option<f64> {
        self.c_star
    }

    pub fn envelope(&self) -> &Hyperrect {
        &self.envelope
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    /// Return time to `Q` under the controller, searched over `[0, τ]`.
    pub fn ttq(&self, sys: &ControlSystem, x: &[f64], dt: f64) -> Result<Option<f64>> {
        Ok(return_probe(sys, &self.q, &self.law, x, self.tau, dt)?.time)
    }
}

/// Max `|ttq(a) - ttq(b)| / ‖a - b‖∞` over grid neighbors outside `Q` with
/// finite return times.
fn lipschitz_of_samples(samples: &[Vec<f64>], probes: &[Option<ReturnProbe>], per: usize, dim: usize) -> Option<f64> {
    let time = |i: usize| probes[i].and_then(|p| p.time);
    let mut best: Option<f64> = None;
    for i in 0..samples.len() {
        let Some(ti) = time(i) else { continue };
        let mut stride = 1;
        for _ in 0..dim {
            let coord = (i / stride) % per;
            if coord + 1 < per {
                let j = i + stride;
                if let Some(tj) = time(j) {
                    let dist = samples[i].iter().zip(&samples[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if dist > 0.0 {
                        let ratio = (ti - tj).abs() / dist;
                        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
                    }
                }
            }
            stride *= per;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, ControlSignal};

    fn square() -> CompactSet {
        Hyperrect::cube(2, -1.0, 1.0).unwrap().into()
    }

    fn fast_opts() -> ValidationOptions {
        ValidationOptions { grid_per_axis: 5, envelope_per_axis: 9, dt: 1e-2, ..Default::default() }
    }

    #[test]
    fn reference_controller_validates() {
        let di = ControlSystem::double_integrator();
        let c = RecurrenceController::double_integrator_reference(&di, square(), 2.0, 0.1, &fast_opts()).unwrap();
        assert!(c.report().recurrence_failures.is_empty());
        assert!(c.envelope().contains(&[1.1, -1.1]));
        assert_eq!(c.ttq(&di, &[0.0, 0.0], 1e-3).unwrap(), Some(0.0));
        assert!(c.c_star().is_some());
    }

    #[test]
    fn corner_returns_by_two() {
        let di = ControlSystem::double_integrator();
        let law = double_integrator_law();
        let (traj, _) = simulate_feedback(&di, &[1.0, 1.0], law.as_ref(), 4.0, 1e-3).unwrap();
        let back = crate::recurrence::first_return_time(&traj, &square(), MEMBERSHIP_TOL).unwrap();
        assert!(back <= 2.0 + 1e-9, "{back}");
        // The bang-bang input u = -1 touches the boundary exactly at t = 2.
        let bang = integrate(&di, &[1.0, 1.0], &ControlSignal::constant(vec![-1.0], 2.0).unwrap(), 2.0, 1e-3).unwrap();
        assert!((bang.end()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_window_rejected() {
        let di = ControlSystem::double_integrator();
        assert!(RecurrenceController::double_integrator_reference(&di, square(), 1.5, 0.1, &fast_opts()).is_err());
    }

    #[test]
    fn plain_saturated_feedback_is_too_slow_from_corners() {
        let di = ControlSystem::double_integrator();
        let law = saturated_linear_law(vec![1.0, 1.5], -1.0, 1.0);
        let err = RecurrenceController::validate(&di, square(), 2.0, 0.1, law, &fast_opts()).unwrap_err();
        match err {
            Error::ControllerInvalid { failing } => assert!(failing.contains(&vec![1.0, 1.0])),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn return_probe_outside() {
        let di = ControlSystem::double_integrator();
        let law = double_integrator_law();
        let p = return_probe(&di, &square(), &law, &[1.01, 0.0], 2.0, 1e-3).unwrap();
        let t = p.time.unwrap();
        assert!(t > 0.0 && t < 1.0);
        assert!(p.distance_growth <= MEMBERSHIP_TOL);
    }
}
