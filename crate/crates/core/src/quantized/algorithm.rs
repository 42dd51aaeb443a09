//! Shrinking-grid quantized recurrence control.
//!
//! Each step the sensor snaps the measured state to a grid over the current
//! uncertainty box and sends the cell index. Both ends then run the same
//! deterministic update: simulate the feedback law from the cell center for
//! one window, shrink the radius by `e^{-ατ}`, and center the next box on
//! the predicted end state.

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, simulate_feedback, ControlSignal, ControlSystem, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::quantized::codec::{decode, encode, BitVec, CountedChannel};
use crate::quantized::controller::RecurrenceController;
use crate::setgeom::{grid, CompactSet, GridCover, Hyperrect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub eps: f64,
    pub tau: f64,
    /// Contraction rate of the uncertainty radius.
    pub alpha: f64,
    /// Lipschitz constant used to size the grids.
    pub l_tau: f64,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
}

impl EpisodeConfig {
    fn check(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.tau > 0.0 && self.alpha >= 0.0 && self.l_tau >= 0.0 && self.dt > 0.0) {
            return Err(Error::Argument(format!("invalid episode parameters {self:?}")));
        }
        Ok(())
    }

    /// `e^{-(L+α)τ}`: grid spacing relative to the current radius.
    pub fn refinement(&self) -> f64 {
        (-(self.l_tau + self.alpha) * self.tau).exp()
    }

    pub fn shrink(&self) -> f64 {
        (-self.alpha * self.tau).exp()
    }
}

/// Grid state kept identically by sensor and controller.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorState {
    pub step: usize,
    pub radius: f64,
    pub region: Hyperrect,
    pub cover: GridCover,
}

impl MirrorState {
    pub fn initial(q: &CompactSet, cfg: &EpisodeConfig) -> Result<Self> {
        let [region] = q.boxes() else {
            return Err(Error::UnsupportedInput("quantized episodes need Q to be a single box".into()));
        };
        Ok(Self {
            step: 0,
            radius: cfg.eps,
            region: region.clone(),
            cover: grid(region, cfg.eps * cfg.refinement())?,
        })
    }

    /// Containment slack: relative to the radius plus rounding of the center.
    fn slack(&self) -> f64 {
        let scale = self.region.center.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        1e-9 * self.radius + 1e-14 * scale
    }

    /// `r - ‖x - c‖` per axis, minimized; negative when `x` is outside.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.region
            .center
            .iter()
            .zip(&self.region.radius)
            .zip(x)
            .map(|((c, r), xi)| r - (xi - c).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Everything one side derives from a cell index.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub q: Vec<f64>,
    pub input: ControlSignal,
    pub nominal: Trajectory,
    pub next: MirrorState,
}

/// The single code path both ends use to turn an index into the input for
/// the window and the next grid state.
pub fn advance(
    sys: &ControlSystem,
    ctrl: &RecurrenceController,
    cfg: &EpisodeConfig,
    state: &MirrorState,
    index: u64,
) -> Result<StepOutput> {
    let q = state.cover.center(index)?;
    let (nominal, input) = simulate_feedback(sys, &q, ctrl.law().as_ref(), cfg.tau, cfg.dt)?;
    let radius = state.radius * cfg.shrink();
    let region = Hyperrect::ball(nominal.end().to_vec(), radius)?;
    let cover = grid(&region, radius * cfg.refinement())?;
    Ok(StepOutput {
        q,
        input,
        nominal,
        next: MirrorState {
            step: state.step + 1,
            radius,
            region,
            cover,
        },
    })
}

/// Sensor end: measures, quantizes, encodes.
#[derive(Debug, Clone)]
pub struct Sensor {
    pub state: MirrorState,
}

/// Controller end: decodes and produces the input.
#[derive(Debug, Clone)]
pub struct Controller {
    pub state: MirrorState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub index: u64,
    pub cover_size: u64,
    pub bits: BitVec,
}

impl Sensor {
    /// Quantizes `x` against the current grid. Fails when `x` left the
    /// uncertainty box, which the construction rules out.
    pub fn measure(&self, x: &[f64]) -> Result<Measurement> {
        let margin = self.state.margin(x);
        if margin < -self.state.slack() {
            return Err(Error::GuaranteeViolation {
                step: self.state.step,
                detail: format!("x = {x:?} outside S (margin {margin:e})"),
            });
        }
        let snapped = self.state.cover.quantize(x)?;
        let cover_size = self.state.cover.len()?;
        Ok(Measurement {
            index: snapped.index,
            cover_size,
            bits: encode(snapped.index, cover_size)?,
        })
    }
}

impl Controller {
    pub fn receive(&self, bits: &BitVec) -> Result<u64> {
        decode(bits, self.state.cover.len()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub system: String,
    pub q: CompactSet,
    pub x0: Vec<f64>,
    pub config: EpisodeConfig,
    pub c_star: Option<f64>,
}

/// One exchange of the protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub i: usize,
    pub x: Vec<f64>,
    pub q: Vec<f64>,
    pub index: u64,
    pub bits: BitVec,
    pub cover_size: u64,
    pub r: f64,
    pub s_center: Vec<f64>,
    pub s_radius: Vec<f64>,
    /// First input value of the window.
    pub u0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub header: EpisodeHeader,
    pub steps: Vec<StepRecord>,
    /// Plant state after the last window.
    pub final_state: Vec<f64>,
    pub total_bits: u64,
}

impl EpisodeLog {
    /// Bits sent for windows starting before `t`.
    pub fn bits_before(&self, t: f64) -> u64 {
        let tau = self.header.config.tau;
        self.steps
            .iter()
            .filter(|s| (s.i as f64) * tau < t - 1e-9)
            .map(|s| s.bits.len() as u64)
            .sum()
    }
}

/// Per-window nominal (controller-side prediction) and plant trajectories,
/// both on local time `[0, τ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub tau: f64,
    pub nominal: Vec<Trajectory>,
    pub plant: Vec<Trajectory>,
}

/// Concatenated path: global times and flat states.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Index of the first sample of each window.
    pub window_starts: Vec<usize>,
}

impl EpisodeTrace {
    fn concat(&self, segments: &[Trajectory], keep_jumps: bool) -> Path {
        let mut path = Path { times: vec![], states: vec![], window_starts: vec![] };
        for (i, seg) in segments.iter().enumerate() {
            let offset = i as f64 * self.tau;
            let skip = usize::from(!keep_jumps && i > 0);
            path.window_starts.push(path.times.len().saturating_sub(skip));
            for k in skip..seg.len() {
                path.times.push(offset + seg.times[k]);
                path.states.push(seg.state(k).to_vec());
            }
        }
        path
    }

    /// `ξ̂`: nominal predictions, with both the predicted end of window `i`
    /// and the cell center `q_{i+1}` kept at the boundary.
    pub fn nominal_path(&self) -> Path {
        self.concat(&self.nominal, true)
    }

    /// `ξ`: the plant under the concatenated inputs.
    pub fn plant_path(&self) -> Path {
        self.concat(&self.plant, false)
    }

    /// Rebuilds the trace offline from a log, replaying every window.
    pub fn reconstruct(sys: &ControlSystem, ctrl: &RecurrenceController, log: &EpisodeLog) -> Result<Self> {
        let cfg = &log.header.config;
        let mut state = MirrorState::initial(&log.header.q, cfg)?;
        let mut x = log.header.x0.clone();
        let mut trace = EpisodeTrace { tau: cfg.tau, nominal: vec![], plant: vec![] };
        for rec in &log.steps {
            let out = advance(sys, ctrl, cfg, &state, rec.index)?;
            let plant = integrate(sys, &x, &out.input, cfg.tau, cfg.dt)?;
            x = plant.end().to_vec();
            trace.nominal.push(out.nominal);
            trace.plant.push(plant);
            state = out.next;
        }
        Ok(trace)
    }
}

/// Runs the protocol for `cfg.steps` windows from `x0 ∈ Q`, checking the
/// mirrored states after every exchange.
pub fn run_episode(
    sys: &ControlSystem,
    ctrl: &RecurrenceController,
    x0: &[f64],
    cfg: &EpisodeConfig,
) -> Result<(EpisodeLog, EpisodeTrace)> {
    cfg.check()?;
    check_dim(sys.state_dim(), x0.len())?;
    let q = ctrl.q();
    if cfg.eps > ctrl.eps_star() * (1.0 + 1e-12) {
        return Err(Error::Argument(format!("eps {} exceeds validated {}", cfg.eps, ctrl.eps_star())));
    }
    if (cfg.tau - ctrl.tau()).abs() > 1e-12 * cfg.tau {
        return Err(Error::Argument(format!("tau {} differs from controller tau {}", cfg.tau, ctrl.tau())));
    }
    if !q.contains(x0) {
        return Err(Error::Argument(format!("x0 = {x0:?} not in Q")));
    }
    let initial = MirrorState::initial(q, cfg)?;
    let mut sensor = Sensor { state: initial.clone() };
    let mut controller = Controller { state: initial };
    let mut channel = CountedChannel::new();
    let mut x = x0.to_vec();
    let mut steps = Vec::with_capacity(cfg.steps);
    let mut trace = EpisodeTrace { tau: cfg.tau, nominal: vec![], plant: vec![] };

    for i in 0..cfg.steps {
        let m = sensor.measure(&x)?;
        channel.send(m.bits.clone());
        let sensor_out = advance(sys, ctrl, cfg, &sensor.state, m.index)?;

        let bits = channel
            .recv()
            .ok_or_else(|| Error::Protocol("channel empty".into()))?;
        let index = controller.receive(&bits)?;
        let ctrl_out = advance(sys, ctrl, cfg, &controller.state, index)?;
        if ctrl_out != sensor_out {
            return Err(Error::Determinism { step: i });
        }

        let plant = integrate(sys, &x, &ctrl_out.input, cfg.tau, cfg.dt)?;
        steps.push(StepRecord {
            i,
            x: x.clone(),
            q: ctrl_out.q.clone(),
            index,
            bits,
            cover_size: m.cover_size,
            r: controller.state.radius,
            s_center: controller.state.region.center.clone(),
            s_radius: controller.state.region.radius.clone(),
            u0: ctrl_out.input.values()[0].clone(),
        });
        x = plant.end().to_vec();
        trace.nominal.push(ctrl_out.nominal);
        trace.plant.push(plant);
        sensor.state = sensor_out.next;
        controller.state = ctrl_out.next;
    }
    // The box for the window after the last one must still contain the plant.
    sensor.measure(&x)?;

    let log = EpisodeLog {
        header: EpisodeHeader {
            system: sys.name().to_string(),
            q: q.clone(),
            x0: x0.to_vec(),
            config: *cfg,
            c_star: ctrl.c_star(),
        },
        steps,
        final_state: x,
        total_bits: channel.total_bits(),
    };
    Ok((log, trace))
}
