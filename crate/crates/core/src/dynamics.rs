//! Control systems `ẋ = f(x, u)`, piecewise-constant inputs, and a
//! fixed-step RK4 integrator whose steps never straddle an input switch.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::setgeom::Hyperrect;

/// Default integration step in seconds.
pub const DEFAULT_DT: f64 = 1e-3;

/// Relative tolerance used when checking that `dt` tiles a segment.
const ALIGN_TOL: f64 = 1e-9;

/// `f(x, u)` written into the output slice.
pub type FieldFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
/// `∂f/∂x (x, u)` written row-major into an `n*n` slice.
pub type JacobianFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// Matrices of a linear system `ẋ = A x + B u`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Clone)]
pub struct ControlSystem {
    name: String,
    n: usize,
    input_box: Hyperrect,
    field: Arc<FieldFn>,
    jacobian: Option<Arc<JacobianFn>>,
    linear: Option<LinearModel>,
}

impl fmt::Debug for ControlSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlSystem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.input_box.dim())
            .field("input_box", &self.input_box)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl ControlSystem {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        input_box: Hyperrect,
        field: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("state dimension must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            n,
            input_box,
            field: Arc::new(field),
            jacobian: None,
            linear: None,
        })
    }

    pub fn with_jacobian(mut self, jacobian: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    /// `ẋ = A x + B u` with its constant Jacobian `A`.
    pub fn linear(name: impl Into<String>, model: LinearModel, input_box: Hyperrect) -> Result<Self> {
        let n = model.a.len();
        let m = input_box.dim();
        if n == 0 || model.a.iter().any(|row| row.len() != n) {
            return Err(Error::Argument("A must be a nonempty square matrix".into()));
        }
        check_dim(n, model.b.len())?;
        if model.b.iter().any(|row| row.len() != m) {
            return Err(Error::Dimension {
                expected: m,
                got: model.b.iter().map(Vec::len).find(|l| *l != m).unwrap_or(m),
            });
        }
        let (a, b) = (model.a.clone(), model.b.clone());
        let a_jac: Vec<f64> = model.a.iter().flatten().copied().collect();
        let mut sys = Self::new(name, n, input_box, move |x, u, out| {
            for i in 0..a.len() {
                let mut acc = 0.0;
                for (aij, xj) in a[i].iter().zip(x) {
                    acc += aij * xj;
                }
                for (bij, uj) in b[i].iter().zip(u) {
                    acc += bij * uj;
                }
                out[i] = acc;
            }
        })?
        .with_jacobian(move |_, _, out| out.copy_from_slice(&a_jac));
        sys.linear = Some(model);
        Ok(sys)
    }

    /// `ẋ₁ = x₂, ẋ₂ = u` with `u ∈ [-1, 1]`.
    pub fn double_integrator() -> Self {
        Self::linear(
            "double_integrator",
            LinearModel {
                a: vec![vec![0.0, 1.0], vec![0.0, 0.0]],
                b: vec![vec![0.0], vec![1.0]],
            },
            Hyperrect::cube(1, -1.0, 1.0).expect("unit input box"),
        )
        .expect("double integrator is well formed")
    }

    /// `ẋ = a·x + u` over the given input interval.
    pub fn scalar_linear(a: f64, input_box: Hyperrect) -> Result<Self> {
        check_dim(1, input_box.dim())?;
        Self::linear(
            format!("scalar_linear({a})"),
            LinearModel {
                a: vec![vec![a]],
                b: vec![vec![1.0]],
            },
            input_box,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.input_box.dim()
    }

    pub fn input_box(&self) -> &Hyperrect {
        &self.input_box
    }

    pub fn linear_model(&self) -> Option<&LinearModel> {
        self.linear.as_ref()
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    #[inline]
    pub(crate) fn field_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        (self.field)(x, u, out)
    }

    fn check_args(&self, x: &[f64], u: &[f64]) -> Result<()> {
        check_dim(self.n, x.len())?;
        check_dim(self.input_dim(), u.len())?;
        if !self.input_box.contains(u) {
            return Err(Error::Domain(u.to_vec()));
        }
        Ok(())
    }

    /// `f(x, u)`.
    pub fn eval_field(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_args(x, u)?;
        let mut out = vec![0.0; self.n];
        self.field_into(x, u, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite field value at x = {x:?}, u = {u:?}")));
        }
        Ok(out)
    }

    /// Row-major `∂f/∂x`, analytic when available, central differences
    /// with step `1e-6·max(1, |x_j|)` otherwise.
    pub fn jacobian(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_args(x, u)?;
        let n = self.n;
        let mut jac = vec![0.0; n * n];
        if let Some(j) = &self.jacobian {
            j(x, u, &mut jac);
        } else {
            self.fd_jacobian(x, u, &mut jac);
        }
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite Jacobian at x = {x:?}")));
        }
        Ok(jac)
    }

    pub(crate) fn fd_jacobian(&self, x: &[f64], u: &[f64], jac: &mut [f64]) {
        let n = self.n;
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for j in 0..n {
            let h = 1e-6 * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            self.field_into(&xp, u, &mut fp);
            xp[j] = x[j] - h;
            self.field_into(&xp, u, &mut fm);
            xp[j] = x[j];
            for i in 0..n {
                jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
    }

    /// `div_x f(x, u) = tr ∂f/∂x (x, u)`.
    pub fn divergence(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        let jac = self.jacobian(x, u)?;
        let tr: f64 = (0..self.n).map(|i| jac[i * self.n + i]).sum();
        if !tr.is_finite() {
            return Err(Error::Numerical("non-finite divergence".into()));
        }
        Ok(tr)
    }
}

/// Piecewise-constant input on a uniform segment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    segment_duration: f64,
    values: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn new(segment_duration: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(segment_duration > 0.0 && segment_duration.is_finite()) {
            return Err(Error::Argument(format!("segment duration must be positive, got {segment_duration}")));
        }
        let m = values
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Argument("control signal needs at least one segment".into()))?;
        for v in &values {
            check_dim(m, v.len())?;
        }
        Ok(Self { segment_duration, values })
    }

    /// `u ≡ value` over `[0, duration]`.
    pub fn constant(value: Vec<f64>, duration: f64) -> Result<Self> {
        Self::new(duration, vec![value])
    }

    pub fn segment_duration(&self) -> f64 {
        self.segment_duration
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn total_duration(&self) -> f64 {
        self.values.len() as f64 * self.segment_duration
    }

    /// `values[floor(t / segment_duration)]`, clamped to the last segment.
    pub fn value_at(&self, t: f64) -> &[f64] {
        let k = if t <= 0.0 { 0 } else { (t / self.segment_duration).floor() as usize };
        &self.values[k.min(self.values.len() - 1)]
    }

    /// The signal with its first `segments` segments dropped.
    pub fn tail(&self, segments: usize) -> Result<Self> {
        if segments >= self.values.len() {
            return Err(Error::Argument(format!(
                "cannot drop {segments} of {} segments",
                self.values.len()
            )));
        }
        Self::new(self.segment_duration, self.values[segments..].to_vec())
    }

    pub fn check_within(&self, input_box: &Hyperrect) -> Result<()> {
        for v in &self.values {
            check_dim(input_box.dim(), v.len())?;
            if !input_box.contains(v) {
                return Err(Error::Domain(v.clone()));
            }
        }
        Ok(())
    }
}

/// Sampled trajectory; states stored flat with stride `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    states: Vec<f64>,
    n: usize,
    pub dt: f64,
}

impl Trajectory {
    pub fn from_samples(times: Vec<f64>, states: Vec<f64>, n: usize, dt: f64) -> Self {
        debug_assert_eq!(times.len() * n, states.len());
        Self { times, states, n, dt }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.n..(k + 1) * self.n]
    }

    pub fn x0(&self) -> &[f64] {
        self.state(0)
    }

    pub fn end(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one sample")
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.n)
    }
}

/// Scratch space for one RK4 step.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Classical RK4 step of size `h` with `u` held constant; `x` updated in place.
    pub(crate) fn step(&mut self, sys: &ControlSystem, x: &mut [f64], u: &[f64], h: f64) {
        let n = x.len();
        sys.field_into(x, u, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        sys.field_into(&self.tmp, u, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        sys.field_into(&self.tmp, u, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        sys.field_into(&self.tmp, u, &mut self.k4);
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Number of RK4 steps covering `horizon`; the last one may be partial.
fn step_count(horizon: f64, dt: f64) -> usize {
    let raw = horizon / dt;
    let nearest = raw.round();
    if (raw - nearest).abs() <= ALIGN_TOL * raw.max(1.0) {
        nearest as usize
    } else {
        raw.ceil() as usize
    }
}

fn steps_per(segment: f64, dt: f64) -> Result<usize> {
    let raw = segment / dt;
    let k = raw.round();
    if k < 1.0 || (raw - k).abs() > ALIGN_TOL * raw.max(1.0) {
        return Err(Error::Argument(format!(
            "dt = {dt} does not evenly divide segment duration {segment}"
        )));
    }
    Ok(k as usize)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Argument(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// Fixed-step RK4 trajectory of `sys` from `x0` under `signal` over
/// `[0, horizon]`.
pub fn integrate(
    sys: &ControlSystem,
    x0: &[f64],
    signal: &ControlSignal,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    check_dim(sys.state_dim(), x0.len())?;
    check_dt(dt)?;
    signal.check_within(sys.input_box())?;
    if !(horizon >= 0.0) || horizon > signal.total_duration() * (1.0 + ALIGN_TOL) {
        return Err(Error::Argument(format!(
            "horizon {horizon} outside [0, {}]",
            signal.total_duration()
        )));
    }
    let per_segment = steps_per(signal.segment_duration(), dt)?;
    let last_segment = signal.values().len() - 1;
    integrate_with(sys, x0, horizon, dt, |k, _| &signal.values()[(k / per_segment).min(last_segment)])
}

/// RK4 loop where the input of step `k` is chosen by `input(k, x_k)`.
pub(crate) fn integrate_with<'a>(
    sys: &ControlSystem,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    mut input: impl FnMut(usize, &[f64]) -> &'a [f64],
) -> Result<Trajectory> {
    let n = sys.state_dim();
    let steps = step_count(horizon, dt);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity((steps + 1) * n);
    times.push(0.0);
    states.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut rk = Rk4::new(n);
    for k in 0..steps {
        let t = k as f64 * dt;
        let h = if k + 1 == steps { horizon - t } else { dt };
        let u = input(k, &x);
        rk.step(sys, &mut x, u, h);
        let t_next = if k + 1 == steps { horizon } else { (k + 1) as f64 * dt };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationBlowup { time: t_next });
        }
        times.push(t_next);
        states.extend_from_slice(&x);
    }
    Ok(Trajectory::from_samples(times, states, n, dt))
}

/// Closed loop under a sampled feedback law `u_k = law(x_k)` held for one
/// step. Returns the trajectory and the realized open-loop signal; replaying
/// that signal through [`integrate`] reproduces the same states bit for bit.
pub fn simulate_feedback(
    sys: &ControlSystem,
    x0: &[f64],
    law: &(dyn Fn(&[f64]) -> Vec<f64> + Send + Sync),
    horizon: f64,
    dt: f64,
) -> Result<(Trajectory, ControlSignal)> {
    check_dim(sys.state_dim(), x0.len())?;
    check_dt(dt)?;
    let steps = step_count(horizon, dt);
    if steps == 0 {
        return Err(Error::Argument("feedback horizon must cover at least one step".into()));
    }
    let n = sys.state_dim();
    let mut values = Vec::with_capacity(steps);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity((steps + 1) * n);
    times.push(0.0);
    states.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut rk = Rk4::new(n);
    for k in 0..steps {
        let t = k as f64 * dt;
        let h = if k + 1 == steps { horizon - t } else { dt };
        let u = law(&x);
        if !sys.input_box().contains(&u) {
            return Err(Error::Domain(u));
        }
        rk.step(sys, &mut x, &u, h);
        let t_next = if k + 1 == steps { horizon } else { (k + 1) as f64 * dt };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationBlowup { time: t_next });
        }
        values.push(u);
        times.push(t_next);
        states.extend_from_slice(&x);
    }
    Ok((Trajectory::from_samples(times, states, n, dt), ControlSignal::new(dt, values)?))
}
