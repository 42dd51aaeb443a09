//! Subcommand implementations. Each writes line-delimited JSON records and
//! returns the process exit code.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cli::config::{RunConfig, SystemConfig};
use crate::entropy::bounds::{compute_bounds, BoundsOptions};
use crate::entropy::cover::{exact_cover, greedy_cover, CoverResult};
use crate::entropy::spanning::{build_spanning_instance_with, fit_rate, InstanceLimits, Predicate, SpanningInstance};
use crate::error::{Error, Result};
use crate::quantized::algorithm::{run_episode, EpisodeConfig, EpisodeHeader, EpisodeLog, EpisodeTrace, StepRecord};
use crate::quantized::controller::{RecurrenceController, ValidationOptions};
use crate::quantized::rate::{bit_rate, BitRateReport};
use crate::quantized::verify::{verify_guarantees, GuaranteeReport};
use crate::recurrence::{lipschitz_region, RecurrenceSpec};
use crate::setgeom::CompactSet;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GUARANTEE: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

/// Exit code for an error that aborted a command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::Argument(_)
        | Error::Dimension { .. }
        | Error::Domain(_)
        | Error::UnsupportedInput(_)
        | Error::Resolution { .. }
        | Error::ControllerInvalid { .. } => EXIT_CONFIG,
        Error::GuaranteeViolation { .. } | Error::Determinism { .. } | Error::Protocol(_) => EXIT_GUARANTEE,
        Error::InstanceTooLarge { .. } | Error::RateUndefined { .. } => EXIT_INFEASIBLE,
        _ => EXIT_FAILURE,
    }
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    record: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn emit<T: Serialize>(out: &mut dyn Write, record: &str, body: &T) -> Result<()> {
    let line = serde_json::to_string(&Tagged { record, body }).map_err(|e| Error::Numerical(e.to_string()))?;
    writeln!(out, "{line}")?;
    Ok(())
}

pub fn cmd_bounds(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    cfg.validate()?;
    let sys = cfg.build_system()?;
    let q = cfg.build_q(sys.state_dim())?;
    let opts = BoundsOptions {
        estimate: cfg.estimate_options(),
        certificate_step: cfg.dt,
        sweep: cfg.sweep_options(),
    };
    let report = compute_bounds(&sys, &q, cfg.tau, &opts)?;
    emit(out, "bounds", &report)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverRecord {
    pub predicate: Predicate,
    pub horizon: f64,
    pub eps: f64,
    pub tau: f64,
    pub candidates: usize,
    pub points: usize,
    pub feasible: bool,
    pub size: Option<usize>,
    pub chosen: Vec<usize>,
    pub uncovered_point: Option<Vec<f64>>,
    /// Instance exceeded the exact-search caps; `size` is a greedy count.
    pub greedy_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub eps: f64,
    pub tau: f64,
    pub slope: Option<f64>,
    pub horizons: Vec<f64>,
    pub sizes: Vec<Option<usize>>,
    pub note: Option<String>,
}

/// Instance limits used when the default caps are exceeded; past these the
/// command gives up.
const GREEDY_LIMITS: InstanceLimits = InstanceLimits {
    max_candidates: 4096,
    max_points: 4096,
};

fn cover_instance(
    cfg: &RunConfig,
    sys: &crate::dynamics::ControlSystem,
    spec: &RecurrenceSpec,
    predicate: Predicate,
) -> Result<(CoverRecord, CoverResult)> {
    let sc = &cfg.spanning;
    let dt = sc.dt.unwrap_or(cfg.dt);
    let class = sc.class();
    let build = |limits| build_spanning_instance_with(sys, spec, sc.init_delta, &class, predicate, dt, limits);
    let (inst, greedy_only): (SpanningInstance, bool) = match build(InstanceLimits::default()) {
        Ok(i) => (i, false),
        Err(Error::InstanceTooLarge { .. }) => (build(GREEDY_LIMITS)?, true),
        Err(e) => return Err(e),
    };
    let cover = if greedy_only { greedy_cover(&inst.feasibility)? } else { exact_cover(&inst.feasibility)? };
    let (chosen, uncovered_point) = match &cover {
        CoverResult::Feasible { chosen, .. } => (chosen.clone(), None),
        CoverResult::Infeasible { column } => (vec![], Some(inst.initial_points[*column].clone())),
    };
    let record = CoverRecord {
        predicate,
        horizon: inst.horizon(),
        eps: spec.eps,
        tau: spec.tau,
        candidates: inst.candidates.len(),
        points: inst.initial_points.len(),
        feasible: cover.is_feasible(),
        size: cover.size(),
        chosen,
        uncovered_point,
        greedy_only,
    };
    Ok((record, cover))
}

pub fn cmd_spanning(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    cfg.validate()?;
    let sys = cfg.build_system()?;
    let q = cfg.build_q(sys.state_dim())?;
    let sc = &cfg.spanning;
    let mut code = EXIT_OK;
    for &eps in &sc.eps {
        for &tau in &sc.tau {
            let mut samples = Vec::new();
            for &horizon in &sc.horizons {
                let spec = RecurrenceSpec::new(q.clone(), tau, eps, Some(horizon))?;
                let (record, cover) = cover_instance(cfg, &sys, &spec, Predicate::Recurrence)?;
                if !record.feasible {
                    code = EXIT_INFEASIBLE;
                }
                emit(out, "cover", &record)?;
                samples.push((horizon, cover));
            }
            if samples.len() >= 3 {
                let sizes = samples.iter().map(|(_, c)| c.size()).collect();
                let horizons = samples.iter().map(|(t, _)| *t).collect();
                let (slope, note) = match fit_rate(&samples) {
                    Ok(r) => (Some(r.slope), None),
                    Err(e @ Error::RateUndefined { .. }) => {
                        code = EXIT_INFEASIBLE;
                        (None, Some(e.to_string()))
                    }
                    Err(e) => return Err(e),
                };
                emit(out, "rate", &RateRecord { eps, tau, slope, horizons, sizes, note })?;
            }
        }
        if sc.invariance {
            for &horizon in &sc.horizons {
                let spec = RecurrenceSpec::new(q.clone(), 0.0, eps, Some(horizon))?;
                let (record, _) = cover_instance(cfg, &sys, &spec, Predicate::Invariance)?;
                emit(out, "cover", &record)?;
            }
        }
    }
    Ok(code)
}

/// One line of an episode log file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    System(SystemConfig),
    Header(EpisodeHeader),
    Step(StepRecord),
    Footer { final_state: Vec<f64>, total_bits: u64 },
}

pub fn write_log(out: &mut dyn Write, system: &SystemConfig, log: &EpisodeLog) -> Result<()> {
    let mut line = |rec: &LogRecord| -> Result<()> {
        writeln!(out, "{}", serde_json::to_string(rec).map_err(|e| Error::Numerical(e.to_string()))?)?;
        Ok(())
    };
    line(&LogRecord::System(system.clone()))?;
    line(&LogRecord::Header(log.header.clone()))?;
    for s in &log.steps {
        line(&LogRecord::Step(s.clone()))?;
    }
    line(&LogRecord::Footer {
        final_state: log.final_state.clone(),
        total_bits: log.total_bits,
    })
}

/// Parses a log written by [`write_log`]. Record numbers in errors are
/// 1-based line numbers.
pub fn read_log(input: impl BufRead) -> Result<(Option<SystemConfig>, EpisodeLog)> {
    let mut system = None;
    let mut header = None;
    let mut steps = Vec::new();
    let mut footer = None;
    let mut last = 0;
    for (k, line) in input.lines().enumerate() {
        let record = k + 1;
        last = record;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogRecord = serde_json::from_str(&line).map_err(|e| Error::Parse { record, message: e.to_string() })?;
        let misplaced = |what: &str| Error::Parse { record, message: format!("unexpected {what} record") };
        match parsed {
            LogRecord::System(s) if header.is_none() => system = Some(s),
            LogRecord::Header(h) if header.is_none() => header = Some(h),
            LogRecord::Step(s) if header.is_some() && footer.is_none() => {
                if s.i != steps.len() {
                    return Err(Error::Parse { record, message: format!("expected step {}, got {}", steps.len(), s.i) });
                }
                steps.push(s);
            }
            LogRecord::Footer { final_state, total_bits } if header.is_some() && footer.is_none() => {
                footer = Some((final_state, total_bits));
            }
            LogRecord::System(_) => return Err(misplaced("system")),
            LogRecord::Header(_) => return Err(misplaced("header")),
            LogRecord::Step(_) => return Err(misplaced("step")),
            LogRecord::Footer { .. } => return Err(misplaced("footer")),
        }
    }
    let header = header.ok_or(Error::Parse { record: last + 1, message: "missing header record".into() })?;
    let (final_state, total_bits) =
        footer.ok_or(Error::Parse { record: last + 1, message: "missing footer record".into() })?;
    Ok((system, EpisodeLog { header, steps, final_state, total_bits }))
}

fn validation_options(cfg_dt: f64, strict: bool) -> ValidationOptions {
    ValidationOptions { dt: cfg_dt, strict, ..Default::default() }
}

fn initial_state(cfg: &RunConfig, q: &CompactSet) -> Result<Vec<f64>> {
    if let Some(x0) = &cfg.x0 {
        return Ok(x0.clone());
    }
    let b = &q.boxes()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(b.lower()
        .iter()
        .zip(b.upper())
        .map(|(l, h)| if *l < h { rng.gen_range(*l..=h) } else { *l })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rate: BitRateReport,
    pub guarantees: GuaranteeReport,
    pub all_pass: bool,
}

/// Writes `window,t,xhat_*,x_*` rows for every sample of every window.
pub fn write_trajectory_csv(out: &mut dyn Write, trace: &EpisodeTrace) -> Result<()> {
    let n = trace.nominal.first().map_or(0, |t| t.dim());
    let mut head = vec!["window".to_string(), "t".to_string()];
    head.extend((0..n).map(|j| format!("xhat_{j}")));
    head.extend((0..n).map(|j| format!("x_{j}")));
    writeln!(out, "{}", head.join(","))?;
    for (i, (nom, plant)) in trace.nominal.iter().zip(&trace.plant).enumerate() {
        for k in 0..nom.len().min(plant.len()) {
            let mut row = vec![i.to_string(), format!("{}", i as f64 * trace.tau + nom.times[k])];
            row.extend(nom.state(k).iter().map(|v| v.to_string()));
            row.extend(plant.state(k).iter().map(|v| v.to_string()));
            writeln!(out, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// Runs one episode. The log goes to `log_out`, the summary to `out`.
pub fn cmd_simulate(cfg: &RunConfig, out: &mut dyn Write, log_out: &mut dyn Write, csv: Option<&Path>) -> Result<i32> {
    cfg.validate()?;
    let sys = cfg.build_system()?;
    let q = cfg.build_q(sys.state_dim())?;
    let ctrl = RecurrenceController::reference(&sys, q.clone(), cfg.tau, cfg.eps, &validation_options(cfg.dt, cfg.strict))?;
    let l_tau = match cfg.l_tau {
        Some(l) => l,
        None => lipschitz_region(&sys, &q, cfg.tau, &cfg.estimate_options())?.constants.l_tau,
    };
    let episode = EpisodeConfig {
        eps: cfg.eps,
        tau: cfg.tau,
        alpha: cfg.alpha,
        l_tau,
        dt: cfg.dt,
        steps: cfg.steps,
        seed: cfg.seed,
    };
    let x0 = initial_state(cfg, &q)?;
    let (log, trace) = match run_episode(&sys, &ctrl, &x0, &episode) {
        Ok(r) => r,
        Err(e @ (Error::GuaranteeViolation { .. } | Error::Determinism { .. })) => {
            emit(out, "error", &serde_json::json!({ "message": e.to_string() }))?;
            return Ok(EXIT_GUARANTEE);
        }
        Err(e) => return Err(e),
    };
    write_log(log_out, &cfg.system, &log)?;
    if let Some(path) = csv {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_trajectory_csv(&mut f, &trace)?;
        f.flush()?;
    }
    let guarantees = verify_guarantees(&log, &trace);
    let all_pass = guarantees.all_pass();
    emit(out, "summary", &Summary { rate: bit_rate(&log)?, guarantees, all_pass })?;
    Ok(if all_pass { EXIT_OK } else { EXIT_GUARANTEE })
}

/// Re-checks a stored episode. Exit code 0 iff every clause passes.
pub fn cmd_verify(log_path: &Path, fallback_system: &SystemConfig, out: &mut dyn Write) -> Result<i32> {
    let file = std::fs::File::open(log_path)?;
    let (system, log) = read_log(std::io::BufReader::new(file))?;
    let system = system.unwrap_or_else(|| fallback_system.clone());
    let sys = system.build()?;
    let cfg = &log.header.config;
    let ctrl = RecurrenceController::reference(&sys, log.header.q.clone(), cfg.tau, cfg.eps, &validation_options(cfg.dt, false))?;
    let trace = EpisodeTrace::reconstruct(&sys, &ctrl, &log)?;
    let report = verify_guarantees(&log, &trace);
    let pass = report.all_pass();
    emit(out, "verify", &serde_json::json!({ "all_pass": pass, "clauses": report.clauses }))?;
    Ok(if pass { EXIT_OK } else { EXIT_GUARANTEE })
}
