//! Closed-form entropy bounds, a reachable-hull certificate that rules out
//! short recurrence windows for linear systems, and a randomized sweep of
//! first-return times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, ControlSignal, ControlSystem, LinearModel, DEFAULT_DT};
use crate::error::{check_dim, Error, Result};
use crate::recurrence::{first_return_time, lipschitz_region, min_divergence, EstimateOptions, MEMBERSHIP_TOL};
use crate::setgeom::{linspace, CompactSet, Hyperrect};

/// `L_τ · dim_F(Q) / ln 2` in bits per second.
pub fn upper_bound(l_tau: f64, q: &CompactSet) -> Result<f64> {
    if !(l_tau >= 0.0) {
        return Err(Error::Argument(format!("Lipschitz constant must be >= 0, got {l_tau}")));
    }
    Ok(l_tau * q.box_counting_dim() as f64 / std::f64::consts::LN_2)
}

/// `max(0, min div_x f) / ln 2` with the minimum taken over a tensor grid of
/// `N_δ(Q) × U` (corners included). Sampling can only overestimate the true
/// minimum, so this is exact for constant divergence and approximate
/// otherwise.
pub fn lower_bound(sys: &ControlSystem, q: &CompactSet, delta_tau: f64, samples_per_axis: usize) -> Result<f64> {
    check_dim(sys.state_dim(), q.dim())?;
    if !(delta_tau >= 0.0) {
        return Err(Error::Argument(format!("delta must be >= 0, got {delta_tau}")));
    }
    if samples_per_axis < 2 {
        return Err(Error::Argument("samples_per_axis must be >= 2".into()));
    }
    let mut min_div = f64::INFINITY;
    for b in q.neighborhood(delta_tau)?.boxes() {
        min_div = min_div.min(min_divergence(sys, b, samples_per_axis)?);
    }
    Ok(min_div.max(0.0) / std::f64::consts::LN_2)
}

/// Over-approximation of the reachable set of a linear system at time `t`
/// as an axis-aligned box.
struct HullPropagator<'a> {
    model: &'a LinearModel,
    input_center: Vec<f64>,
    input_radius: Vec<f64>,
    n: usize,
    m: usize,
}

impl HullPropagator<'_> {
    /// Right-hand side of the augmented state `(Φ, g, R)` with `Φ' = AΦ`,
    /// `g' = Φ B c_u` and `R' = |Φ B| r_u`.
    fn rhs(&self, z: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        let phi = &z[..n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|k| self.model.a[i][k] * phi[k * n + j]).sum();
            }
        }
        for i in 0..n {
            let (mut g, mut r) = (0.0, 0.0);
            for c in 0..m {
                let pb: f64 = (0..n).map(|k| phi[i * n + k] * self.model.b[k][c]).sum();
                g += pb * self.input_center[c];
                r += pb.abs() * self.input_radius[c];
            }
            out[n * n + i] = g;
            out[n * n + n + i] = r;
        }
    }

    fn advance(&self, z: &mut [f64], h: f64) {
        let len = z.len();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let mut tmp = vec![0.0; len];
        self.rhs(z, &mut k1);
        for i in 0..len {
            tmp[i] = z[i] + 0.5 * h * k1[i];
        }
        self.rhs(&tmp, &mut k2);
        for i in 0..len {
            tmp[i] = z[i] + 0.5 * h * k2[i];
        }
        self.rhs(&tmp, &mut k3);
        for i in 0..len {
            tmp[i] = z[i] + h * k3[i];
        }
        self.rhs(&tmp, &mut k4);
        for i in 0..len {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    fn initial(&self) -> Vec<f64> {
        let n = self.n;
        let mut z = vec![0.0; n * n + 2 * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        z
    }

    /// Augmented state at time `t` integrated from 0 in steps of at most `h`.
    fn state_at(&self, t: f64, h: f64) -> Vec<f64> {
        let mut z = self.initial();
        let steps = (t / h).ceil().max(1.0) as usize;
        let hh = t / steps as f64;
        for _ in 0..steps {
            self.advance(&mut z, hh);
        }
        z
    }

    fn hull(&self, z: &[f64], x0: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let center = (0..n)
            .map(|i| (0..n).map(|k| z[i * n + k] * x0[k]).sum::<f64>() + z[n * n + i])
            .collect();
        (center, z[n * n + n..].to_vec())
    }
}

/// ∞-norm gap between a box and a union of boxes (0 when they meet).
fn box_set_gap(center: &[f64], radius: &[f64], q: &CompactSet) -> f64 {
    q.boxes()
        .iter()
        .map(|b| {
            center
                .iter()
                .zip(radius)
                .zip(b.center.iter().zip(&b.radius))
                .map(|((c, r), (bc, br))| ((c - bc).abs() - r - br).max(0.0))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Proven lower bound on the first time any admissible trajectory from
/// `x0` can be back in `Q`, from reachable-hull propagation of a linear
/// system. The scan covers `(0, cap]`; a return of `cap` means "no return
/// up to cap". Returns `None` for nonlinear systems.
pub fn linear_return_floor(sys: &ControlSystem, q: &CompactSet, x0: &[f64], cap: f64, step: f64) -> Result<Option<f64>> {
    check_dim(sys.state_dim(), x0.len())?;
    check_dim(sys.state_dim(), q.dim())?;
    if !(step > 0.0 && cap > 0.0) {
        return Err(Error::Argument("cap and step must be positive".into()));
    }
    let Some(model) = sys.linear_model() else {
        return Ok(None);
    };
    let ub = sys.input_box();
    let prop = HullPropagator {
        model,
        input_center: ub.center.clone(),
        input_radius: ub.radius.clone(),
        n: sys.state_dim(),
        m: sys.input_dim(),
    };
    let slack = MEMBERSHIP_TOL;
    let gap_at = |z: &[f64]| {
        let (c, r) = prop.hull(z, x0);
        box_set_gap(&c, &r, q)
    };
    let mut z = prop.initial();
    let steps = (cap / step).ceil() as usize;
    let mut prev_t = 0.0;
    for k in 1..=steps {
        let t = (k as f64 * step).min(cap);
        prop.advance(&mut z, t - prev_t);
        if gap_at(&z) <= slack {
            if k == 1 {
                return Ok(Some(0.0));
            }
            // Bisect the crossing inside (prev_t, t].
            let (mut lo, mut hi) = (prev_t, t);
            while hi - lo > 1e-13 * hi.max(1.0) {
                let mid = 0.5 * (lo + hi);
                let zm = prop.state_at(mid, step);
                if gap_at(&zm) <= slack {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(lo));
        }
        prev_t = t;
    }
    Ok(Some(cap))
}

/// Random piecewise-constant controls probing how fast a trajectory can
/// come back to `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub samples: usize,
    /// Each sample draws a segment count uniformly from `1..=max_segments`.
    pub max_segments: usize,
    pub values_per_axis: usize,
    /// Simulated time span; `horizon / k` must be a multiple of `dt` for
    /// every segment count `k`.
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            samples: 10_000,
            max_segments: 8,
            values_per_axis: 9,
            horizon: 2.52,
            dt: DEFAULT_DT,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Smallest first-return time seen; `None` when no sample returned.
    pub min_return: Option<f64>,
    pub argmin: Option<ControlSignal>,
    pub samples: usize,
    pub returned: usize,
}

/// Smallest first-return time to `Q` from `x0` over seeded random controls.
/// Signals are drawn sequentially, then simulated in parallel; the result
/// does not depend on the thread count.
pub fn sweep_min_return(sys: &ControlSystem, q: &CompactSet, x0: &[f64], opts: &SweepOptions) -> Result<SweepResult> {
    if opts.max_segments == 0 || opts.values_per_axis == 0 {
        return Err(Error::Argument("max_segments and values_per_axis must be positive".into()));
    }
    let ub = sys.input_box();
    let axes: Vec<Vec<f64>> = ub
        .lower()
        .iter()
        .zip(ub.upper())
        .map(|(l, h)| linspace(*l, h, opts.values_per_axis))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut signals = Vec::with_capacity(opts.samples);
    for _ in 0..opts.samples {
        let k = rng.gen_range(1..=opts.max_segments);
        let values = (0..k)
            .map(|_| axes.iter().map(|a| a[rng.gen_range(0..a.len())]).collect())
            .collect();
        signals.push(ControlSignal::new(opts.horizon / k as f64, values)?);
    }
    let returns: Vec<Option<f64>> = signals
        .par_iter()
        .map(|s| -> Result<Option<f64>> {
            match integrate(sys, x0, s, opts.horizon, opts.dt) {
                Ok(traj) => Ok(first_return_time(&traj, q, MEMBERSHIP_TOL)),
                Err(Error::IntegrationBlowup { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, usize)> = None;
    for (i, r) in returns.iter().enumerate() {
        if let Some(t) = r {
            if best.is_none_or(|(b, _)| *t < b) {
                best = Some((*t, i));
            }
        }
    }
    Ok(SweepResult {
        min_return: best.map(|(t, _)| t),
        argmin: best.map(|(_, i)| signals[i].clone()),
        samples: opts.samples,
        returned: returns.iter().flatten().count(),
    })
}

/// Serializes non-finite floats as the string `"inf"`.
pub(crate) mod inf_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {t:?}"))),
        }
    }
}

/// Bounds on `h_rec(τ, Q)` together with the constants they were built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub system: String,
    pub tau: f64,
    #[serde(with = "inf_as_string")]
    pub upper: f64,
    #[serde(with = "inf_as_string")]
    pub lower: f64,
    pub l_tau: f64,
    pub f_q: f64,
    #[serde(with = "inf_as_string")]
    pub delta_tau: f64,
    pub dim_f: usize,
    /// False when `Q` is proven not `τ`-recurrent; both bounds are then
    /// infinite.
    pub finite: bool,
    /// Vertex of `Q` with the latest proven return floor.
    pub witness: Option<Vec<f64>>,
    pub return_floor: Option<f64>,
    pub sweep_min_return: Option<f64>,
    pub lipschitz_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsOptions {
    pub estimate: EstimateOptions,
    /// Step of the reachable-hull scan.
    pub certificate_step: f64,
    /// Optional random sweep from the witness vertex.
    pub sweep: Option<SweepOptions>,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            estimate: EstimateOptions::default(),
            certificate_step: DEFAULT_DT,
            sweep: None,
        }
    }
}

/// Upper and lower bound on the recurrence entropy of `Q` for window `τ`.
///
/// For linear systems every vertex of `Q` is probed with the reachable-hull
/// certificate; if some vertex provably cannot return within `τ`, `Q` is
/// not `τ`-recurrent and the report is infinite.
pub fn compute_bounds(sys: &ControlSystem, q: &CompactSet, tau: f64, opts: &BoundsOptions) -> Result<BoundReport> {
    check_dim(sys.state_dim(), q.dim())?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Argument(format!("tau must be positive, got {tau}")));
    }
    let region = lipschitz_region(sys, q, tau, &opts.estimate)?;
    let c = region.constants;
    let dim_f = q.box_counting_dim();

    let cap = 2.0 * tau.max(1.0);
    let mut witness: Option<(Vec<f64>, f64)> = None;
    if sys.linear_model().is_some() {
        for v in q.boxes().iter().flat_map(Hyperrect::vertices) {
            if let Some(floor) = linear_return_floor(sys, q, &v, cap, opts.certificate_step)? {
                if witness.as_ref().is_none_or(|(_, f)| floor > *f) {
                    witness = Some((v, floor));
                }
            }
        }
    }
    let finite = witness.as_ref().is_none_or(|(_, f)| *f <= tau + 1e-9);

    let sweep_min_return = match (&opts.sweep, &witness) {
        (Some(s), Some((v, _))) => sweep_min_return(sys, q, v, s)?.min_return,
        _ => None,
    };

    let (upper, lower) = if finite {
        let upper = upper_bound(c.l_tau, q)?;
        let lower = if c.delta_tau.is_finite() {
            lower_bound(sys, q, c.delta_tau, opts.estimate.samples_per_axis)?
        } else {
            0.0
        };
        (upper, lower)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(BoundReport {
        system: sys.name().to_string(),
        tau,
        upper,
        lower,
        l_tau: c.l_tau,
        f_q: c.f_q,
        delta_tau: c.delta_tau,
        dim_f,
        finite,
        return_floor: witness.as_ref().map(|(_, f)| *f),
        witness: witness.map(|(v, _)| v),
        sweep_min_return,
        lipschitz_converged: region.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn square() -> CompactSet {
        Hyperrect::cube(2, -1.0, 1.0).unwrap().into()
    }

    fn unit_line() -> CompactSet {
        Hyperrect::cube(1, -1.0, 1.0).unwrap().into()
    }

    #[test]
    fn upper_bound_examples() {
        assert!((upper_bound(1.0, &square()).unwrap() - 2.0 / LN_2).abs() < 1e-12);
        assert!((upper_bound(1.0, &square()).unwrap() - 2.8853900818).abs() < 1e-9);
        assert_eq!(upper_bound(0.0, &square()).unwrap(), 0.0);
        assert!((upper_bound(1.0, &unit_line()).unwrap() - std::f64::consts::LOG2_E).abs() < 1e-12);
        let flat: CompactSet = Hyperrect::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap().into();
        assert!((upper_bound(1.0, &flat).unwrap() - 1.0 / LN_2).abs() < 1e-12);
        assert!(upper_bound(-1.0, &square()).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let di = ControlSystem::double_integrator();
        assert_eq!(lower_bound(&di, &square(), 14.78, 5).unwrap(), 0.0);
        let u2 = Hyperrect::cube(1, -2.0, 2.0).unwrap();
        let grow = ControlSystem::scalar_linear(1.0, u2.clone()).unwrap();
        assert!((lower_bound(&grow, &unit_line(), 8.155, 5).unwrap() - 1.0 / LN_2).abs() < 1e-12);
        let shrink = ControlSystem::scalar_linear(-1.0, u2).unwrap();
        assert_eq!(lower_bound(&shrink, &unit_line(), 1.0, 5).unwrap(), 0.0);
    }

    #[test]
    fn double_integrator_corner_floor_is_two() {
        let di = ControlSystem::double_integrator();
        let floor = linear_return_floor(&di, &square(), &[1.0, 1.0], 4.0, 1e-3).unwrap().unwrap();
        assert!((floor - 2.0).abs() < 1e-6, "{floor}");
        let other = linear_return_floor(&di, &square(), &[1.0, -1.0], 4.0, 1e-3).unwrap().unwrap();
        assert_eq!(other, 0.0);
    }

    #[test]
    fn bounds_switch_at_two() {
        let di = ControlSystem::double_integrator();
        let opts = BoundsOptions::default();
        let fin = compute_bounds(&di, &square(), 2.0, &opts).unwrap();
        assert!(fin.finite);
        assert!((fin.upper - 2.0 / LN_2).abs() < 1e-9);
        assert_eq!(fin.lower, 0.0);
        assert_eq!(fin.witness.as_deref(), Some(&[1.0, 1.0][..]));
        for tau in [0.5, 1.0, 1.9, 1.99] {
            let inf = compute_bounds(&di, &square(), tau, &opts).unwrap();
            assert!(!inf.finite);
            assert!(inf.upper.is_infinite());
            assert_eq!(inf.witness.as_deref(), Some(&[1.0, 1.0][..]));
        }
        let json = serde_json::to_string(&compute_bounds(&di, &square(), 1.0, &opts).unwrap()).unwrap();
        assert!(json.contains("\"upper\":\"inf\""));
        let back: BoundReport = serde_json::from_str(&json).unwrap();
        assert!(back.upper.is_infinite());
    }

    #[test]
    fn tight_scalar_system() {
        let sys = ControlSystem::scalar_linear(1.0, Hyperrect::cube(1, -2.0, 2.0).unwrap()).unwrap();
        let r = compute_bounds(&sys, &unit_line(), 1.0, &BoundsOptions::default()).unwrap();
        assert!(r.finite);
        assert!((r.upper - 1.0 / LN_2).abs() < 1e-9);
        assert!((r.lower - 1.0 / LN_2).abs() < 1e-9);
    }

    #[test]
    fn sweep_never_beats_the_floor() {
        let di = ControlSystem::double_integrator();
        let opts = SweepOptions { samples: 300, ..Default::default() };
        let r = sweep_min_return(&di, &square(), &[1.0, 1.0], &opts).unwrap();
        assert!(r.min_return.unwrap() >= 2.0 - 0.01);
        let again = sweep_min_return(&di, &square(), &[1.0, 1.0], &opts).unwrap();
        assert_eq!(r, again);
    }
}
