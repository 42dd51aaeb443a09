//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints one status line; exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use recurrence_core::dynamics::{integrate, ControlSignal, ControlSystem};
use recurrence_core::entropy::bounds::linear_return_floor;
use recurrence_core::entropy::cover::brute_force_cover;
use recurrence_core::entropy::spanning::{
    build_spanning_instance_with, min_spanning_cardinality, CandidateClass, InstanceLimits, Predicate,
    SpanningInstance,
};
use recurrence_core::entropy::{compute_bounds, sweep_min_return, BoundsOptions, CoverResult, SweepOptions};
use recurrence_core::quantized::algorithm::{advance, Controller, MirrorState, Sensor};
use recurrence_core::quantized::codec::width;
use recurrence_core::quantized::rate::steady_cells;
use recurrence_core::quantized::verify::window_length;
use recurrence_core::quantized::{
    bit_rate, decode, encode, run_episode, verify_guarantees, Clause, EpisodeConfig, EpisodeLog, EpisodeTrace,
    RecurrenceController, ValidationOptions,
};
use recurrence_core::recurrence::{containment_radius, estimate_f_q, first_return_time, RecurrenceSpec};
use recurrence_core::setgeom::{grid, CompactSet, Hyperrect};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const LN2: f64 = std::f64::consts::LN_2;
const EPS: f64 = 0.1;
const TAU: f64 = 2.0;
const L_DI: f64 = 1.0;
const ALPHAS: [f64; 3] = [0.0, 0.1, 0.5];

fn unit_square() -> CompactSet {
    Hyperrect::cube(2, -1.0, 1.0).unwrap().into()
}

struct Episode {
    alpha: f64,
    seed: u64,
    log: EpisodeLog,
    trace: EpisodeTrace,
}

struct Shared {
    di: ControlSystem,
    ctrl: RecurrenceController,
    episodes: Vec<Episode>,
    episode_time: Duration,
    family_a: Vec<Case>,
    family_b: Vec<Case>,
}

/// One spanning instance with its exact cover.
struct Case {
    horizon: f64,
    eps: f64,
    tau: f64,
    predicate: Predicate,
    instance: SpanningInstance,
    cover: CoverResult,
}

fn run_episodes(di: &ControlSystem, ctrl: &RecurrenceController) -> Vec<Episode> {
    (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let alpha = ALPHAS[seed as usize % ALPHAS.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x0 = vec![rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
            let cfg = EpisodeConfig { eps: EPS, tau: TAU, alpha, l_tau: L_DI, dt: 1e-3, steps: 200, seed };
            let (log, trace) = run_episode(di, ctrl, &x0, &cfg).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            Episode { alpha, seed, log, trace }
        })
        .collect()
}

/// Bang-bang patterns of period four over `{-1, 1}` on a fine initial grid.
fn family_a() -> (CandidateClass, f64) {
    (CandidateClass { values_per_axis: 2, segment_duration: 1.0, period_segments: Some(4) }, 0.25)
}

/// Period-two patterns over `{-1, 0, 1}` on a coarse initial grid.
fn family_b() -> (CandidateClass, f64) {
    (CandidateClass { values_per_axis: 3, segment_duration: 1.0, period_segments: Some(2) }, 0.5)
}

fn build_family(di: &ControlSystem, class: &CandidateClass, init_delta: f64) -> Vec<Case> {
    let limits = InstanceLimits { max_candidates: 64, max_points: 64 };
    let mut params = Vec::new();
    for horizon in [4.0, 6.0, 8.0] {
        for eps in [0.05, 0.1] {
            for tau in [2.0, 3.0, 4.0] {
                params.push((horizon, eps, tau, Predicate::Recurrence));
            }
            params.push((horizon, eps, 0.0, Predicate::Invariance));
        }
    }
    params
        .into_par_iter()
        .map(|(horizon, eps, tau, predicate)| {
            let spec = RecurrenceSpec::new(unit_square(), tau, eps, Some(horizon)).unwrap();
            let instance =
                build_spanning_instance_with(di, &spec, init_delta, class, predicate, 0.01, limits).unwrap();
            let cover = min_spanning_cardinality(&instance).unwrap();
            Case { horizon, eps, tau, predicate, instance, cover }
        })
        .collect()
}

fn shared() -> Shared {
    let di = ControlSystem::double_integrator();
    let ctrl = RecurrenceController::double_integrator_reference(&di, unit_square(), TAU, EPS, &ValidationOptions::default())
        .expect("reference controller validates");
    let start = Instant::now();
    let episodes = run_episodes(&di, &ctrl);
    let episode_time = start.elapsed();
    let (ca, da) = family_a();
    let (cb, db) = family_b();
    let family_a = build_family(&di, &ca, da);
    let family_b = build_family(&di, &cb, db);
    Shared { di, ctrl, episodes, episode_time, family_a, family_b }
}

fn bounds_example() -> Outcome {
    let di = ControlSystem::double_integrator();
    let q = unit_square();
    let opts = BoundsOptions::default();
    let start = Instant::now();
    let at_two = compute_bounds(&di, &q, 2.0, &opts).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let expected = 2.0 / LN2;
    ensure!(at_two.finite, "tau = 2 reported infinite");
    ensure!((at_two.upper - expected).abs() <= 1e-9, "upper {} vs {expected}", at_two.upper);
    ensure!(at_two.witness.as_deref() == Some(&[1.0, 1.0][..]), "witness {:?}", at_two.witness);
    ensure!(elapsed < Duration::from_secs(1), "runtime {elapsed:?}");
    for tau in [3.0, 4.0] {
        let r = compute_bounds(&di, &q, tau, &opts).map_err(|e| e.to_string())?;
        ensure!(r.finite && (r.upper - expected).abs() <= 1e-9, "tau = {tau}: upper {}", r.upper);
    }
    for tau in [1.0, 1.5, 1.99] {
        let r = compute_bounds(&di, &q, tau, &opts).map_err(|e| e.to_string())?;
        ensure!(!r.finite && r.upper.is_infinite(), "tau = {tau} should be infinite");
        ensure!(r.witness.as_deref() == Some(&[1.0, 1.0][..]), "tau = {tau}: witness {:?}", r.witness);
    }
    Ok(format!("upper {:.9} at tau=2 (|diff| {:.1e}), infinite below 2, witness (1,1), {elapsed:.2?}", at_two.upper, (at_two.upper - expected).abs()))
}

fn return_floor() -> Outcome {
    let di = ControlSystem::double_integrator();
    let q = unit_square();
    let start = Instant::now();
    let opts = SweepOptions::default();
    ensure!(opts.samples >= 10_000 && opts.max_segments == 8 && opts.values_per_axis == 9, "sweep options {opts:?}");
    let sweep = sweep_min_return(&di, &q, &[1.0, 1.0], &opts).map_err(|e| e.to_string())?;
    let min = sweep.min_return.ok_or("no sampled control returned")?;
    ensure!(min >= 2.0 - 0.01, "sampled return at {min}");

    let floor = linear_return_floor(&di, &q, &[1.0, 1.0], 4.0, 1e-3)
        .map_err(|e| e.to_string())?
        .ok_or("no return floor")?;
    ensure!(floor >= 2.0 - 1e-6, "certified floor {floor}");

    let minus_one = ControlSignal::constant(vec![-1.0], 3.0).unwrap();
    let traj = integrate(&di, &[1.0, 1.0], &minus_one, 3.0, 1e-3).map_err(|e| e.to_string())?;
    let t_ret = first_return_time(&traj, &q, 1e-9).ok_or("u = -1 never returns")?;
    ensure!((t_ret - 2.0).abs() <= 1e-6, "u = -1 returns at {t_ret}");
    // Closed form: x1(t) = 1 + t - t^2/2 exceeds 1 on (0, 2).
    let k = traj.times.iter().position(|t| *t == t_ret).unwrap();
    let closed = 1.0 + traj.times[k - 1] - traj.times[k - 1].powi(2) / 2.0;
    ensure!(closed > 1.0 && traj.state(k - 1)[0] > 1.0, "left Q too late");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "runtime {elapsed:?}");
    Ok(format!(
        "min return {min:.4} over {} controls, certified floor {floor:.9}, u=-1 returns at {t_ret:.6}, {elapsed:.2?}",
        sweep.samples
    ))
}

fn tight_bounds() -> Outcome {
    let sys = ControlSystem::scalar_linear(1.0, Hyperrect::cube(1, -2.0, 2.0).unwrap()).unwrap();
    let q: CompactSet = Hyperrect::cube(1, -1.0, 1.0).unwrap().into();
    let expected = 1.0 / LN2;
    for tau in [0.5, 1.0, 2.0] {
        let r = compute_bounds(&sys, &q, tau, &BoundsOptions::default()).map_err(|e| e.to_string())?;
        ensure!((r.upper - expected).abs() <= 1e-9, "tau = {tau}: upper {}", r.upper);
        ensure!((r.lower - expected).abs() <= 1e-9, "tau = {tau}: lower {}", r.lower);
    }
    Ok(format!("upper = lower = {expected:.12} for tau in {{0.5, 1, 2}}"))
}

fn tracking(s: &Shared) -> Outcome {
    let mut worst = f64::INFINITY;
    for ep in &s.episodes {
        let report = verify_guarantees(&ep.log, &ep.trace);
        let track = report.clause(Clause::Tracking);
        let contain = report.clause(Clause::Containment);
        ensure!(track.worst_margin >= -1e-6, "seed {} alpha {}: tracking margin {}", ep.seed, ep.alpha, track.worst_margin);
        ensure!(contain.pass, "seed {} alpha {}: containment margin {}", ep.seed, ep.alpha, contain.worst_margin);
        ensure!(report.all_pass(), "seed {} alpha {}: {:?}", ep.seed, ep.alpha, report.clauses);
        ensure!(ep.log.steps.len() == 200, "seed {}: {} steps", ep.seed, ep.log.steps.len());
        worst = worst.min(track.worst_margin);
    }
    ensure!(s.episode_time < Duration::from_secs(300), "runtime {:?}", s.episode_time);
    Ok(format!("20 episodes, max tracking excess {:.3e}, x_i in S_i throughout, {:.2?}", -worst, s.episode_time))
}

fn rate(s: &Shared) -> Outcome {
    let mut lines = Vec::new();
    for alpha in ALPHAS {
        let per_axis = ((L_DI + alpha) * TAU).exp().ceil() as u64;
        let cells = per_axis * per_axis;
        let bits = u64::from(64 - (cells - 1).leading_zeros());
        ensure!(steady_cells(2, L_DI, alpha, TAU).map_err(|e| e.to_string())? == cells, "alpha {alpha}: steady cells");
        for ep in s.episodes.iter().filter(|e| e.alpha == alpha) {
            let report = bit_rate(&ep.log).map_err(|e| e.to_string())?;
            ensure!(report.steady_bits_per_step == bits, "alpha {alpha}: {} bits per step", report.steady_bits_per_step);
            for st in &ep.log.steps[1..] {
                ensure!(st.bits.len() as u64 == bits && st.cover_size == cells, "alpha {alpha} step {}: {} bits", st.i, st.bits.len());
            }
            let measured = report.measured_steady_rate.ok_or("no steady windows")?;
            ensure!(measured == bits as f64 / TAU, "alpha {alpha}: measured {measured}");
            let asymptote = 2.0 * (L_DI + alpha) / LN2;
            ensure!((report.asymptote - asymptote).abs() <= 1e-12, "alpha {alpha}: asymptote {}", report.asymptote);
            ensure!(measured >= asymptote, "alpha {alpha}: below asymptote");
        }
        lines.push(format!("alpha {alpha}: {cells} cells, {bits} bits"));
    }
    let base = s.episodes.iter().find(|e| e.alpha == 0.0).ok_or("no alpha = 0 episode")?;
    let report = bit_rate(&base.log).map_err(|e| e.to_string())?;
    let gap = report.measured_steady_rate.unwrap() - 2.0 / LN2;
    ensure!(report.measured_steady_rate == Some(3.0), "measured {:?}", report.measured_steady_rate);
    ensure!((gap - 0.1146099).abs() <= 1e-6, "gap {gap}");
    ensure!((report.ceiling_gap - gap).abs() <= 1e-12, "reported gap {}", report.ceiling_gap);
    Ok(format!("measured 3.0 bits/s vs {:.5}, gap {gap:.7}; {}", 2.0 / LN2, lines.join(", ")))
}

fn sizes(cases: &[Case]) -> impl Fn(f64, f64, f64, Predicate) -> Option<usize> + '_ {
    move |h, e, t, p| {
        cases
            .iter()
            .find(|c| c.horizon == h && c.eps == e && c.tau == t && c.predicate == p)
            .unwrap_or_else(|| panic!("missing case T={h} eps={e} tau={t} {p:?}"))
            .cover
            .size()
    }
}

fn le(a: Option<usize>, b: Option<usize>) -> bool {
    match (a, b) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(x), Some(y)) => x <= y,
    }
}

fn monotonicity(s: &Shared) -> Outcome {
    let mut cross_checked = 0;
    let mut inv_feasible = 0;
    for (name, cases) in [("A", &s.family_a), ("B", &s.family_b)] {
        let size = sizes(cases);
        for h in [4.0, 6.0, 8.0] {
            for e in [0.05, 0.1] {
                let taus = [2.0, 3.0, 4.0];
                for (i, &t) in taus.iter().enumerate() {
                    for &t2 in &taus[i..] {
                        let (a, b) = (size(h, e, t2, Predicate::Recurrence), size(h, e, t, Predicate::Recurrence));
                        ensure!(le(a, b), "family {name} T={h} eps={e}: r({t2}) = {a:?} > r({t}) = {b:?}");
                    }
                }
                let inv = size(h, e, 0.0, Predicate::Invariance);
                if inv.is_some() {
                    inv_feasible += 1;
                    for t in taus {
                        let rec = size(h, e, t, Predicate::Recurrence);
                        ensure!(le(rec, inv), "family {name} T={h} eps={e} tau={t}: rec {rec:?} > inv {inv:?}");
                    }
                }
            }
        }
        for c in cases.iter().filter(|c| c.instance.candidates.len() <= 16) {
            let brute = brute_force_cover(&c.instance.feasibility).map_err(|e| e.to_string())?;
            ensure!(brute == c.cover, "family {name} T={} eps={} tau={}: exact {:?} vs brute {:?}", c.horizon, c.eps, c.tau, c.cover, brute);
            cross_checked += 1;
        }
    }
    let row = |cases: &[Case]| {
        let size = sizes(cases);
        [4.0, 6.0, 8.0]
            .iter()
            .map(|&h| {
                let v: Vec<String> = [2.0, 3.0, 4.0]
                    .iter()
                    .map(|&t| size(h, 0.1, t, Predicate::Recurrence).map_or("inf".into(), |x| x.to_string()))
                    .collect();
                format!("T={h}:{}", v.join("/"))
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    Ok(format!(
        "A (eps 0.1, tau 2/3/4) {}; B {}; {inv_feasible} feasible invariance rows; {cross_checked} instances match brute force",
        row(&s.family_a),
        row(&s.family_b)
    ))
}

fn rate_lower_bound(s: &Shared) -> Outcome {
    let mut compared = 0;
    for ep in &s.episodes {
        for cases in [&s.family_a, &s.family_b] {
            for h in [4.0, 6.0, 8.0] {
                let Some(r) = sizes(cases)(h, EPS, TAU, Predicate::Recurrence) else { continue };
                let bits = ep.log.bits_before(h);
                ensure!((bits as f64).exp2() >= r as f64, "seed {} T={h}: 2^{bits} < {r}", ep.seed);
                compared += 1;
            }
        }
    }
    let b4 = s.episodes[0].log.bits_before(4.0);
    Ok(format!("{compared} comparisons hold; e.g. {b4} bits before T=4"))
}

fn codec_exhaustive() -> Result<(), String> {
    let full = 1u64 << 16;
    for index in 0..full {
        let bits = encode(index, full).map_err(|e| e.to_string())?;
        ensure!(bits.len() == 16, "width at {index}");
        ensure!(decode(&bits, full).map_err(|e| e.to_string())? == index, "round trip {index}");
    }
    for size in 1..=full {
        let w = width(size);
        let expected = if size == 1 { 0 } else { (64 - (size - 1).leading_zeros()) as usize };
        ensure!(w == expected, "width({size}) = {w}");
        for index in [0, size / 2, size - 1] {
            let bits = encode(index, size).map_err(|e| e.to_string())?;
            ensure!(bits.len() == w && decode(&bits, size).map_err(|e| e.to_string())? == index, "size {size} index {index}");
        }
        ensure!(encode(size, size).is_err(), "encode accepted index = size {size}");
    }
    for size in 1..=256u64 {
        for index in 0..size {
            let b = encode(index, size).map_err(|e| e.to_string())?;
            ensure!(decode(&b, size).map_err(|e| e.to_string())? == index, "size {size} index {index}");
        }
    }
    Ok(())
}

fn grid_soundness() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..10_000 {
        let n = rng.gen_range(1..=3);
        let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let radius: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let delta = rng.gen_range(0.05..1.0);
        let region = Hyperrect::new(center.clone(), radius.clone()).unwrap();
        let g = grid(&region, delta).map_err(|e| e.to_string())?;
        let x: Vec<f64> = center.iter().zip(&radius).map(|(c, r)| c + rng.gen_range(-1.0..=1.0) * r).collect();
        let snap = g.quantize(&x).map_err(|e| e.to_string())?;
        ensure!(snap.in_cell && snap.distance <= delta * (1.0 + 1e-12), "trial {trial}: distance {} > {delta}", snap.distance);
        let c = g.center(snap.index).map_err(|e| e.to_string())?;
        let d = x.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure!(d <= delta * (1.0 + 1e-12), "trial {trial}: indexed center mismatch");
        ensure!(snap.index < g.len().map_err(|e| e.to_string())?, "trial {trial}: index out of range");
    }
    Ok(())
}

fn rk4_order() -> Result<f64, String> {
    let sys = ControlSystem::scalar_linear(1.0, Hyperrect::cube(1, -1.0, 1.0).unwrap()).unwrap();
    let zero = ControlSignal::constant(vec![0.0], 1.0).unwrap();
    let errors: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| {
            let t = integrate(&sys, &[1.0], &zero, 1.0, dt).unwrap();
            (t.end()[0] - std::f64::consts::E).abs()
        })
        .collect();
    let order = errors.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    ensure!(order >= 3.0, "observed order {order} from errors {errors:?}");
    Ok(order)
}

fn max_distance(q: &CompactSet, states: impl Iterator<Item = Vec<f64>>) -> f64 {
    states.map(|x| q.distance(&x).unwrap()).fold(0.0, f64::max)
}

fn containment(s: &Shared) -> Result<(usize, usize), String> {
    let q = unit_square();
    let f_of = |pad: f64| estimate_f_q(&s.di, &q.neighborhood(pad).unwrap(), 9).unwrap();
    let c_star = s.ctrl.c_star().unwrap_or(0.0);
    for ep in &s.episodes {
        let len = window_length(EPS, ep.alpha, L_DI, TAU, c_star, 0);
        let bound = 2.0 * EPS + containment_radius(f_of(2.0 * EPS), L_DI, len);
        let plant = ep.trace.plant_path();
        let d = max_distance(&q, plant.states.into_iter());
        ensure!(d <= bound, "seed {}: plant reaches {d} > {bound}", ep.seed);
    }
    let mut oracle = 0;
    for c in s.family_a.iter().chain(&s.family_b).filter(|c| c.predicate == Predicate::Recurrence) {
        let bound = c.eps + containment_radius(f_of(c.eps), L_DI, c.tau);
        for (j, row) in c.instance.feasibility.iter().enumerate() {
            for (i, ok) in row.iter().enumerate() {
                if !*ok {
                    continue;
                }
                let traj = integrate(&s.di, &c.instance.initial_points[i], &c.instance.candidates[j], c.horizon, c.instance.dt)
                    .map_err(|e| e.to_string())?;
                let d = max_distance(&q, traj.states().map(<[f64]>::to_vec));
                ensure!(d <= bound, "T={} tau={} candidate {j} point {i}: {d} > {bound}", c.horizon, c.tau);
                oracle += 1;
            }
        }
    }
    Ok((s.episodes.len(), oracle))
}

fn mirrors(s: &Shared) -> Result<usize, String> {
    let mut exchanges = 0;
    for ep in &s.episodes {
        let cfg = &ep.log.header.config;
        let initial = MirrorState::initial(&ep.log.header.q, cfg).map_err(|e| e.to_string())?;
        let mut sensor = Sensor { state: initial.clone() };
        let mut controller = Controller { state: initial };
        for rec in &ep.log.steps {
            let m = sensor.measure(&rec.x).map_err(|e| e.to_string())?;
            ensure!(m.index == rec.index && m.bits == rec.bits, "seed {} step {}: re-measured index differs", ep.seed, rec.i);
            let received = controller.receive(&rec.bits).map_err(|e| e.to_string())?;
            ensure!(received == rec.index, "seed {} step {}: decoded {received}", ep.seed, rec.i);
            let a = advance(&s.di, &s.ctrl, cfg, &sensor.state, m.index).map_err(|e| e.to_string())?;
            let b = advance(&s.di, &s.ctrl, cfg, &controller.state, received).map_err(|e| e.to_string())?;
            ensure!(a.next == b.next && a.input == b.input, "seed {} step {}: mirrors diverge", ep.seed, rec.i);
            sensor.state = a.next;
            controller.state = b.next;
            exchanges += 1;
        }
        let replay = EpisodeTrace::reconstruct(&s.di, &s.ctrl, &ep.log).map_err(|e| e.to_string())?;
        ensure!(replay == ep.trace, "seed {}: replayed trace differs", ep.seed);
    }
    Ok(exchanges)
}

fn properties(s: &Shared) -> Outcome {
    codec_exhaustive()?;
    grid_soundness()?;
    let order = rk4_order()?;
    let (episodes, oracle) = containment(s)?;
    let exchanges = mirrors(s)?;
    Ok(format!(
        "codec exhaustive to 2^16, 10^4 grid points sound, RK4 order {order:.2}, containment held on {episodes} episodes and {oracle} oracle trajectories, {exchanges} mirrored exchanges equal"
    ))
}

fn report(n: usize, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    match outcome {
        Ok(detail) => {
            println!("criterion {n}: PASS  {detail}");
            true
        }
        Err(detail) => {
            println!("criterion {n}: FAIL  {detail}");
            false
        }
    }
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut ok = true;
    ok &= report(1, bounds_example);
    ok &= report(2, return_floor);
    ok &= report(3, tight_bounds);
    let start = Instant::now();
    let shared = shared();
    println!("(shared episodes and spanning families built in {:.2?})", start.elapsed());
    ok &= report(4, || tracking(&shared));
    ok &= report(5, || rate(&shared));
    ok &= report(6, || monotonicity(&shared));
    ok &= report(7, || rate_lower_bound(&shared));
    ok &= report(8, || properties(&shared));
    if !ok {
        std::process::exit(1);
    }
}
