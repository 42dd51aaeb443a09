//! Finite spanning-set instances: a grid of initial states, a class of
//! piecewise-constant candidate controls, and the matrix recording which
//! candidate keeps which trajectory recurrent (or invariant).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, ControlSignal, ControlSystem};
use crate::entropy::cover::{exact_cover, greedy_cover, CoverResult};
use crate::error::{check_dim, Error, Result};
use crate::recurrence::{is_invariant, is_recurrent, RecurrenceSpec};
use crate::setgeom::{cartesian, grid, linspace};

/// Piecewise-constant controls whose segment values come from a per-axis
/// grid of the input box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateClass {
    pub values_per_axis: usize,
    pub segment_duration: f64,
    /// When set, only patterns of this many segments are enumerated and
    /// repeated cyclically up to the horizon. Otherwise every segment is
    /// chosen independently.
    pub period_segments: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Recurrence,
    Invariance,
}

/// Caps that keep the exact cover tractable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceLimits {
    pub max_candidates: usize,
    pub max_points: usize,
}

impl Default for InstanceLimits {
    fn default() -> Self {
        Self {
            max_candidates: 24,
            max_points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningInstance {
    pub initial_points: Vec<Vec<f64>>,
    pub candidates: Vec<ControlSignal>,
    /// `feasibility[j][i]`: candidate `j` works from initial point `i`.
    pub feasibility: Vec<Vec<bool>>,
    pub spec: RecurrenceSpec,
    pub predicate: Predicate,
    pub dt: f64,
}

fn horizon_of(spec: &RecurrenceSpec) -> Result<f64> {
    spec.horizon
        .ok_or_else(|| Error::Argument("spanning instances need an explicit horizon".into()))
}

/// Whether `signal` from `x0` satisfies the predicate. Trajectories that
/// blow up count as failures.
pub fn feasible(
    sys: &ControlSystem,
    x0: &[f64],
    signal: &ControlSignal,
    spec: &RecurrenceSpec,
    predicate: Predicate,
    dt: f64,
) -> Result<bool> {
    let horizon = horizon_of(spec)?;
    let traj = match integrate(sys, x0, signal, horizon, dt) {
        Ok(t) => t,
        Err(Error::IntegrationBlowup { .. }) => return Ok(false),
        Err(e) => return Err(e),
    };
    let verdict = match predicate {
        Predicate::Recurrence => is_recurrent(&traj, spec)?,
        Predicate::Invariance => is_invariant(&traj, &spec.q, spec.eps, spec.horizon)?,
    };
    Ok(verdict.holds)
}

impl SpanningInstance {
    /// Instance over explicit points and candidates. The matrix is filled in
    /// parallel; entries do not depend on evaluation order.
    pub fn from_parts(
        sys: &ControlSystem,
        spec: RecurrenceSpec,
        initial_points: Vec<Vec<f64>>,
        candidates: Vec<ControlSignal>,
        predicate: Predicate,
        dt: f64,
    ) -> Result<Self> {
        check_dim(sys.state_dim(), spec.q.dim())?;
        for p in &initial_points {
            check_dim(sys.state_dim(), p.len())?;
        }
        let horizon = horizon_of(&spec)?;
        for c in &candidates {
            if c.total_duration() < horizon * (1.0 - 1e-9) {
                return Err(Error::Argument(format!(
                    "candidate lasts {} < horizon {horizon}",
                    c.total_duration()
                )));
            }
        }
        let pts = initial_points.len();
        let flat: Vec<bool> = (0..candidates.len() * pts)
            .into_par_iter()
            .map(|idx| feasible(sys, &initial_points[idx % pts], &candidates[idx / pts], &spec, predicate, dt))
            .collect::<Result<_>>()?;
        let feasibility = if pts == 0 {
            vec![vec![]; candidates.len()]
        } else {
            flat.chunks(pts).map(<[bool]>::to_vec).collect()
        };
        Ok(Self {
            initial_points,
            candidates,
            feasibility,
            spec,
            predicate,
            dt,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.spec.horizon.unwrap_or(0.0)
    }

    /// Same points and candidates under a different predicate or spec.
    pub fn rebuild(&self, sys: &ControlSystem, spec: RecurrenceSpec, predicate: Predicate) -> Result<Self> {
        Self::from_parts(sys, spec, self.initial_points.clone(), self.candidates.clone(), predicate, self.dt)
    }
}

/// Number of candidates a class produces for `horizon`, checked.
pub fn candidate_count(sys: &ControlSystem, class: &CandidateClass, horizon: f64) -> Result<usize> {
    let (_, pattern_len) = pattern_shape(class, horizon)?;
    let per_segment = class
        .values_per_axis
        .checked_pow(sys.input_dim() as u32)
        .ok_or(Error::InstanceTooLarge { candidates: usize::MAX, points: 0 })?;
    per_segment
        .checked_pow(pattern_len as u32)
        .ok_or(Error::InstanceTooLarge { candidates: usize::MAX, points: 0 })
}

fn pattern_shape(class: &CandidateClass, horizon: f64) -> Result<(usize, usize)> {
    if class.values_per_axis == 0 || !(class.segment_duration > 0.0) {
        return Err(Error::Argument("candidate class needs values and a positive segment".into()));
    }
    let segments = ((horizon / class.segment_duration) - 1e-9).ceil().max(1.0) as usize;
    let pattern = match class.period_segments {
        Some(0) => return Err(Error::Argument("period must be positive".into())),
        Some(p) => p.min(segments),
        None => segments,
    };
    Ok((segments, pattern))
}

/// Candidates in deterministic order: lexicographic over segment values,
/// first segment slowest, input axis 0 slowest within a segment.
pub fn enumerate_candidates(sys: &ControlSystem, class: &CandidateClass, horizon: f64, limit: usize) -> Result<Vec<ControlSignal>> {
    let count = candidate_count(sys, class, horizon)?;
    if count > limit {
        return Err(Error::InstanceTooLarge { candidates: count, points: 0 });
    }
    let (segments, pattern_len) = pattern_shape(class, horizon)?;
    let ub = sys.input_box();
    let axes: Vec<Vec<f64>> = ub
        .lower()
        .iter()
        .zip(ub.upper())
        .map(|(l, h)| linspace(*l, h, class.values_per_axis))
        .collect();
    let values = cartesian(&axes);
    let patterns = cartesian(&vec![(0..values.len()).map(|v| v as f64).collect::<Vec<_>>(); pattern_len]);
    patterns
        .into_iter()
        .map(|pat| {
            let segs = (0..segments).map(|s| values[pat[s % pattern_len] as usize].clone()).collect();
            ControlSignal::new(class.segment_duration, segs)
        })
        .collect()
}

/// Instance over the `init_delta` grid of `Q` and the candidates of `class`.
pub fn build_spanning_instance(
    sys: &ControlSystem,
    spec: &RecurrenceSpec,
    init_delta: f64,
    class: &CandidateClass,
    predicate: Predicate,
    dt: f64,
) -> Result<SpanningInstance> {
    build_spanning_instance_with(sys, spec, init_delta, class, predicate, dt, InstanceLimits::default())
}

pub fn build_spanning_instance_with(
    sys: &ControlSystem,
    spec: &RecurrenceSpec,
    init_delta: f64,
    class: &CandidateClass,
    predicate: Predicate,
    dt: f64,
    limits: InstanceLimits,
) -> Result<SpanningInstance> {
    check_dim(sys.state_dim(), spec.q.dim())?;
    let horizon = horizon_of(spec)?;
    let mut points = Vec::new();
    let mut total: u64 = 0;
    for b in spec.q.boxes() {
        let g = grid(b, init_delta)?;
        total = total.saturating_add(g.len()?);
        if total <= limits.max_points as u64 {
            points.extend(g.centers()?);
        }
    }
    let count = candidate_count(sys, class, horizon).unwrap_or(usize::MAX);
    if count > limits.max_candidates || total > limits.max_points as u64 {
        return Err(Error::InstanceTooLarge {
            candidates: count,
            points: total.min(usize::MAX as u64) as usize,
        });
    }
    let candidates = enumerate_candidates(sys, class, horizon, limits.max_candidates)?;
    SpanningInstance::from_parts(sys, spec.clone(), points, candidates, predicate, dt)
}

/// Exact minimum number of candidates covering every initial point.
pub fn min_spanning_cardinality(instance: &SpanningInstance) -> Result<CoverResult> {
    exact_cover(&instance.feasibility)
}

/// Greedy counterpart for instances past the exact limits.
pub fn greedy_spanning_cardinality(instance: &SpanningInstance) -> Result<CoverResult> {
    greedy_cover(&instance.feasibility)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Least-squares slope of `log2 r̂(T)` against `T`, bits per second.
    pub slope: f64,
    pub horizons: Vec<f64>,
    pub cover_sizes: Vec<usize>,
}

/// Fits the growth rate of cover sizes over horizons. Sizes are only
/// meaningful within the candidate class, so the slope is an estimate of
/// the class-restricted rate.
pub fn fit_rate(samples: &[(f64, CoverResult)]) -> Result<RateEstimate> {
    if samples.len() < 3 {
        return Err(Error::Argument(format!("need at least 3 horizons, got {}", samples.len())));
    }
    let mut horizons = Vec::new();
    let mut sizes = Vec::new();
    for (t, cover) in samples {
        match cover.size() {
            Some(s) if s > 0 => {
                horizons.push(*t);
                sizes.push(s);
            }
            _ => return Err(Error::RateUndefined { horizon: *t }),
        }
    }
    let k = horizons.len() as f64;
    let ys: Vec<f64> = sizes.iter().map(|s| (*s as f64).log2()).collect();
    let mx = horizons.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = horizons.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("horizons must not all coincide".into()));
    }
    let sxy: f64 = horizons.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(RateEstimate {
        slope: sxy / sxx,
        horizons,
        cover_sizes: sizes,
    })
}

/// Builds one instance per spec (one horizon each), covers them exactly and
/// fits the growth rate.
pub fn empirical_rate(
    sys: &ControlSystem,
    family: &[RecurrenceSpec],
    init_delta: f64,
    class: &CandidateClass,
    predicate: Predicate,
    dt: f64,
) -> Result<RateEstimate> {
    let mut samples = Vec::with_capacity(family.len());
    for spec in family {
        let inst = build_spanning_instance(sys, spec, init_delta, class, predicate, dt)?;
        samples.push((horizon_of(spec)?, min_spanning_cardinality(&inst)?));
    }
    fit_rate(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setgeom::{CompactSet, Hyperrect};

    fn line() -> CompactSet {
        Hyperrect::cube(1, -1.0, 1.0).unwrap().into()
    }

    fn integrator() -> ControlSystem {
        ControlSystem::new("integrator", 1, Hyperrect::cube(1, -1.0, 1.0).unwrap(), |_, u, o| o[0] = u[0]).unwrap()
    }

    #[test]
    fn zero_input_row_is_all_true() {
        let sys = integrator();
        let spec = RecurrenceSpec::new(line(), 1.0, 0.1, Some(2.0)).unwrap();
        let cands = [-1.0, 0.0, 1.0].iter().map(|u| ControlSignal::constant(vec![*u], 2.0).unwrap()).collect();
        let inst = SpanningInstance::from_parts(&sys, spec, vec![vec![-0.5], vec![0.0], vec![0.5]], cands, Predicate::Recurrence, 0.01).unwrap();
        assert_eq!(inst.feasibility[1], vec![true; 3]);
        assert_eq!(inst.feasibility.len(), 3);
        assert_eq!(min_spanning_cardinality(&inst).unwrap(), CoverResult::Feasible { size: 1, chosen: vec![1] });
    }

    #[test]
    fn corner_bang_returns_at_two() {
        let di = ControlSystem::double_integrator();
        let q: CompactSet = Hyperrect::cube(2, -1.0, 1.0).unwrap().into();
        let u = ControlSignal::new(2.0, vec![vec![-1.0], vec![1.0]]).unwrap();
        let spec = RecurrenceSpec::new(q.clone(), 2.0, 0.0, Some(4.0)).unwrap();
        assert!(feasible(&di, &[1.0, 1.0], &u, &spec, Predicate::Recurrence, 1e-3).unwrap());
        let short = RecurrenceSpec::new(q, 1.5, 0.0, Some(4.0)).unwrap();
        assert!(!feasible(&di, &[1.0, 1.0], &u, &short, Predicate::Recurrence, 1e-3).unwrap());
    }

    #[test]
    fn short_window_from_corner_is_uncoverable() {
        let di = ControlSystem::double_integrator();
        let q: CompactSet = Hyperrect::cube(2, -1.0, 1.0).unwrap().into();
        let spec = RecurrenceSpec::new(q, 1.5, 0.0, Some(4.0)).unwrap();
        let class = CandidateClass { values_per_axis: 3, segment_duration: 1.0, period_segments: Some(2) };
        let cands = enumerate_candidates(&di, &class, 4.0, 24).unwrap();
        let inst = SpanningInstance::from_parts(&di, spec, vec![vec![1.0, 1.0], vec![0.0, 0.0]], cands, Predicate::Recurrence, 0.01).unwrap();
        assert!(inst.feasibility.iter().all(|row| !row[0]));
        assert_eq!(min_spanning_cardinality(&inst).unwrap(), CoverResult::Infeasible { column: 0 });
    }

    #[test]
    fn candidate_enumeration_order_and_caps() {
        let di = ControlSystem::double_integrator();
        let class = CandidateClass { values_per_axis: 2, segment_duration: 1.0, period_segments: Some(2) };
        let c = enumerate_candidates(&di, &class, 3.0, 24).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c[1].values(), &[vec![-1.0], vec![1.0], vec![-1.0]]);
        let full = CandidateClass { period_segments: None, ..class };
        assert_eq!(candidate_count(&di, &full, 8.0).unwrap(), 256);
        let spec = RecurrenceSpec::new(Hyperrect::cube(2, -1.0, 1.0).unwrap().into(), 2.0, 0.1, Some(8.0)).unwrap();
        let err = build_spanning_instance(&di, &spec, 0.25, &full, Predicate::Recurrence, 0.01).unwrap_err();
        assert!(matches!(err, Error::InstanceTooLarge { candidates: 256, points: 16 }));
    }

    #[test]
    fn constant_rate_for_stationary_integrator() {
        let sys = integrator();
        let family: Vec<_> = [2.0, 3.0, 4.0]
            .iter()
            .map(|t| RecurrenceSpec::new(line(), 1.0, 0.1, Some(*t)).unwrap())
            .collect();
        let class = CandidateClass { values_per_axis: 3, segment_duration: 1.0, period_segments: Some(1) };
        let r = empirical_rate(&sys, &family, 0.25, &class, Predicate::Recurrence, 0.01).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!(r.cover_sizes, vec![1, 1, 1]);
        let bad = fit_rate(&[(1.0, CoverResult::Infeasible { column: 0 }), (2.0, CoverResult::Feasible { size: 1, chosen: vec![0] }), (3.0, CoverResult::Feasible { size: 1, chosen: vec![0] })]);
        assert!(matches!(bad, Err(Error::RateUndefined { .. })));
    }
}
