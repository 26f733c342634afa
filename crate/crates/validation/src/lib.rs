//! Acceptance checks. Each check runs one end-to-end property of the stack and
//! reports whether it holds together with the measured numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::time::Instant;
use tendon_hand::controller::{
    dip_compensation, fsm_step, map_gesture, ControllerConfig, ControllerState, GestureInput, Mode,
};
use tendon_hand::finger::{
    joint_points, step_finger, workspace_sample, CommandRange, FingerConfig, FingerType, JointSet, JointState,
    TendonCommand,
};
use tendon_hand::geometry::{convex_hull_area, Vec2};
use tendon_hand::hand::{step_hand, HandConfig, HandState, MotorSetpoints, ObjectShape, Obstacle};
use tendon_hand::tactile::{
    deformation, density_map, ssim, GridSpec, Indentation, PipelineConfig, SsimParams,
    TactilePipeline, DEFAULT_THRESHOLD,
};
use tendon_hand::{finger, Execution};
use tendon_hand_harness::experiments::{mode_sequence, run_experiment, Experiment};
use tendon_hand_harness::replay::replay;
use tendon_hand_harness::scenario::ControlMode;
use tendon_hand_harness::{Scenario, TickRecord, World};

#[derive(Clone, Debug)]
pub struct Outcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Outcome { name, pass, detail }
    }

    fn error(name: &'static str, e: impl std::fmt::Display) -> Self {
        Outcome::new(name, false, format!("error: {e}"))
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub type Check = fn(&Path) -> Outcome;

/// Every check in report order.
pub const CHECKS: [Check; 11] = [
    synchronized_identity,
    distal_decoupling,
    workspace,
    differential_conservation,
    perception,
    pinned_constants,
    deformation_servo,
    grasp_state_machine,
    feedback_versus_open_loop,
    motor_timing,
    replay_determinism,
];

const DT: f64 = 0.02;

fn scenario(dir: &Path, name: &str) -> Result<Scenario, String> {
    Scenario::load(&dir.join(format!("{name}.json"))).map_err(|e| e.to_string())
}

fn covered_travel(c: &FingerConfig) -> f64 {
    c.pulley_radius * (c.joint_limits[0] + c.joint_limits[1])
}

/// Synchronised closure of a D-type finger from rest: `r * theta_dip` and the
/// difference between agonist and antagonist travel both stay at zero.
pub fn synchronized_identity(_: &Path) -> Outcome {
    let c = FingerConfig::new(FingerType::D);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let t = rng.gen_range(0.0..=covered_travel(&c));
        let s = step_finger(&c, &JointState::rest(), TendonCommand::synchronized(t), JointSet::EMPTY);
        let dip = c.pulley_radius * s.dip();
        let diff = finger::agonist_length(&c, &s) - finger::antagonist_length(&c, &s);
        worst = worst.max(dip.abs()).max(diff.abs());
    }
    Outcome::new(
        "synchronized closure keeps the DIP straight",
        worst <= 1e-9,
        format!("100 strokes, worst |r*theta_d|, |dl_d - dl_a| = {worst:.3e} mm (tol 1e-9)"),
    )
}

/// Hold the antagonist, sweep the agonist: only the DIP moves and it follows
/// `delta / r` until its limit.
pub fn distal_decoupling(_: &Path) -> Outcome {
    let c = FingerConfig::new(FingerType::D);
    let r = c.pulley_radius;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut proximal, mut track): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let hold = rng.gen_range(0.0..=covered_travel(&c));
        let base = step_finger(&c, &JointState::rest(), TendonCommand::synchronized(hold), JointSet::EMPTY);
        let mut s = base;
        let top = 1.2 * r * c.joint_limits[2];
        for k in 0..=200 {
            let delta = top * k as f64 / 200.0;
            s = step_finger(&c, &s, TendonCommand::new(hold + delta, hold), JointSet::EMPTY);
            proximal = proximal.max((s.mcp() - base.mcp()).abs()).max((s.pip() - base.pip()).abs());
            let expect = (delta / r).min(c.joint_limits[2]);
            track = track.max((s.dip() - expect).abs());
        }
    }
    Outcome::new(
        "agonist sweep moves only the DIP",
        proximal < 1e-12 && track <= 1e-9,
        format!("max |d theta_m|, |d theta_p| = {proximal:.3e} rad (tol 1e-12), DIP tracking {track:.3e} rad (tol 1e-9)"),
    )
}

fn synchronized_tip(c: &FingerConfig, t: f64) -> Vec2 {
    let s = step_finger(c, &JointState::rest(), TendonCommand::synchronized(t), JointSet::EMPTY);
    joint_points(c, &s.angles)[3]
}

/// Distance from `p` to the synchronised-command curve: a dense sweep
/// brackets the nearest parameter, golden-section search refines it.
fn distance_to_curve(c: &FingerConfig, p: Vec2, sweep: &[(f64, Vec2)]) -> f64 {
    let k = (0..sweep.len())
        .min_by(|&a, &b| sweep[a].1.distance(p).total_cmp(&sweep[b].1.distance(p)))
        .unwrap_or(0);
    let mut lo = sweep[k.saturating_sub(1)].0;
    let mut hi = sweep[(k + 1).min(sweep.len() - 1)].0;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if synchronized_tip(c, a).distance(p) < synchronized_tip(c, b).distance(p) {
            hi = b;
        } else {
            lo = a;
        }
    }
    synchronized_tip(c, 0.5 * (lo + hi)).distance(p)
}

pub fn workspace(_: &Path) -> Outcome {
    let n = 10_000;
    let start = Instant::now();
    let mut areas = [0.0; 3];
    let mut a_points = Vec::new();
    for (k, ty) in [FingerType::A, FingerType::D, FingerType::P].into_iter().enumerate() {
        let c = FingerConfig::new(ty);
        let pts = workspace_sample(&c, CommandRange::full(&c), n, 7, Execution::default());
        areas[k] = convex_hull_area(&pts);
        if ty == FingerType::A {
            a_points = pts;
        }
    }
    let runtime = start.elapsed().as_secs_f64();

    let c = FingerConfig::new(FingerType::A);
    let full = CommandRange::full(&c).max_agonist;
    let sweep: Vec<(f64, Vec2)> = (0..=4000)
        .map(|k| {
            let t = full * k as f64 / 4000.0;
            (t, synchronized_tip(&c, t))
        })
        .collect();
    let off_curve = a_points
        .iter()
        .map(|&p| distance_to_curve(&c, p, &sweep))
        .fold(0.0, f64::max);
    let (d_ratio, p_ratio) = (areas[1] / areas[0], areas[2] / areas[0]);
    Outcome::new(
        "fingertip workspace",
        off_curve <= 1e-6 && d_ratio > 5.0 && p_ratio > 5.0 && runtime < 10.0,
        format!(
            "A off-curve {off_curve:.2e} mm (tol 1e-6); hull A {:.0}, D {:.0}, P {:.0} mm^2; D/A {d_ratio:.3}, P/A {p_ratio:.3} (need > 5); {runtime:.2} s (need < 10)",
            areas[0], areas[1], areas[2]
        ),
    )
}

/// Close, hold, wiggle and reopen through the gesture map.
fn grasp_schedule(ticks: usize) -> Vec<MotorSetpoints> {
    let c = ControllerConfig::default();
    (0..ticks)
        .map(|k| map_gesture(&c, GestureInput::new(105.0 + 75.0 * (0.4 * k as f64 * DT).cos())))
        .collect()
}

fn run_hand(cfg: &HandConfig, objects: &ObjectShape, schedule: &[MotorSetpoints]) -> Vec<HandState> {
    let mut s = HandState::open(cfg);
    schedule
        .iter()
        .map(|&sp| {
            s = step_hand(cfg, &s, sp, objects, DT).0;
            s.clone()
        })
        .collect()
}

pub fn differential_conservation(dir: &Path) -> Outcome {
    const NAME: &str = "differential conservation and finger isolation";
    let mut s = match scenario(dir, "d3") {
        Ok(s) => s,
        Err(e) => return Outcome::error(NAME, e),
    };
    s.duration = 30.0;
    let mut world = match World::new(&s, Execution::default()) {
        Ok(w) => w,
        Err(e) => return Outcome::error(NAME, e),
    };
    let mut worst: f64 = 0.0;
    let mut ticks = 0;
    while !world.finished() {
        if let Err(e) = world.step() {
            return Outcome::error(NAME, e);
        }
        let st = world.state();
        for d in [&st.agonist, &st.antagonist] {
            worst = worst.max(d.conservation_error() / d.spool.max(1.0));
        }
        ticks += 1;
    }

    let cfg = HandConfig::default();
    let schedule = grasp_schedule(1500);
    let free = run_hand(&cfg, &ObjectShape::none(), &schedule);
    let mut blocked_objects = ObjectShape::none();
    blocked_objects.obstacles[1] = Some(Obstacle::circle(20.0, 12.0, 10.0));
    let blocked = run_hand(&cfg, &blocked_objects, &schedule);
    let touched = free.iter().zip(&blocked).any(|(a, b)| a.fingers[1] != b.fingers[1]);
    let isolated = free
        .iter()
        .zip(&blocked)
        .all(|(a, b)| [0, 2, 3, 4].iter().all(|&i| a.fingers[i] == b.fingers[i]));
    Outcome::new(
        NAME,
        worst <= 4.0 * f64::EPSILON && touched && isolated,
        format!(
            "{ticks} ticks, worst relative |s - (dl + e)| = {worst:.2e} (tol 4 eps); blocked index finger changed: {touched}; other fingers bitwise identical over 1500 ticks: {isolated}"
        ),
    )
}

pub fn perception(_: &Path) -> Outcome {
    const NAME: &str = "tactile perception";
    let p = match TactilePipeline::new(PipelineConfig::default(), Execution::default()) {
        Ok(p) => p,
        Err(e) => return Outcome::error(NAME, e),
    };
    let truth = &p.config.layout.positions;
    let found = p.reference_markers().positions();
    let within = truth
        .iter()
        .filter(|t| found.iter().any(|q| q.distance(**t) < 1.0))
        .count();
    let a_ok = found.len() == truth.len() && within == truth.len();

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let spec = GridSpec::default();
    let mut density_err: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(5..80);
        let m: Vec<Vec2> = (0..n)
            .map(|_| Vec2::new(rng.gen_range(30.0..210.0), rng.gen_range(30.0..210.0)))
            .collect();
        let h = rng.gen_range(8.0..30.0);
        let g = match density_map(&m, h, &spec, Execution::default()) {
            Ok(g) => g,
            Err(e) => return Outcome::error(NAME, e),
        };
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let (x, y) = (spec.x0 + i as f64 * spec.step, spec.y0 + j as f64 * spec.step);
                let sum: f64 = m
                    .iter()
                    .map(|q| (-((x - q.x).powi(2) + (y - q.y).powi(2)) / (2.0 * h * h)).exp())
                    .sum();
                let naive = sum / ((2.0 * std::f64::consts::PI).sqrt() * h * h) / n as f64;
                density_err = density_err.max((g.get(i, j) - naive).abs());
            }
        }
    }
    let b_ok = density_err <= 1e-12;

    let half_h = p.kernel_width() / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut misses) = (0.0f64, 0);
    for _ in 0..100 {
        let c = Vec2::new(120.0 + rng.gen_range(-24.0..24.0), 120.0 + rng.gen_range(-24.0..24.0));
        let depth = rng.gen_range(0.3..1.0);
        let a = match p.analyze(&p.render(&Indentation::new(c, depth, p.config.mapping.radius))) {
            Ok(a) => a,
            Err(e) => return Outcome::error(NAME, e),
        };
        match a.contact.center {
            Some(q) => worst = worst.max(q.distance(c)),
            None => misses += 1,
        }
    }
    let c_ok = misses == 0 && worst <= half_h;

    let reference = p.reference();
    let same = ssim(reference, reference, &SsimParams::default(), Execution::default()).unwrap_or(f64::NAN);
    let d: Vec<f64> = (1..=9)
        .map(|k| {
            let f = p.render(&Indentation::new(Vec2::new(120.0, 120.0), k as f64 / 10.0, p.config.mapping.radius));
            deformation(&f, reference, Execution::default()).unwrap_or(f64::NAN)
        })
        .collect();
    let monotone = d.windows(2).all(|w| w[1] > w[0]);
    let d_ok = same == 1.0 && monotone;

    Outcome::new(
        NAME,
        a_ok && b_ok && c_ok && d_ok,
        format!(
            "(a) {within}/{} markers within 1 px, {} detections; (b) density vs brute force {density_err:.2e} (tol 1e-12); (c) worst centre error {worst:.2} px vs h/2 = {half_h:.2}, {misses} misses; (d) SSIM(ref, ref) = {same}, deformation strictly increasing over 0.1..0.9: {monotone}",
            truth.len(),
            found.len()
        ),
    )
}

pub fn pinned_constants(_: &Path) -> Outcome {
    let c = ControllerConfig::default();
    let open = map_gesture(&c, GestureInput::new(180.0));
    let closed = map_gesture(&c, GestureInput::new(c.closed_angle));
    let mut sp = map_gesture(&c, GestureInput::new(90.0));
    for _ in 0..1000 {
        sp = dip_compensation(sp, c.dip_step, c.saturation_differential);
    }
    let hold = ControllerState {
        mode: Mode::ContactHold,
        ..ControllerState::new(&c)
    };
    let at_170 = fsm_step(&c, &hold, true, false, GestureInput::new(170.0)).0.mode;
    let above = fsm_step(&c, &hold, true, false, GestureInput::new(170.5)).0.mode;
    let ok = DEFAULT_THRESHOLD == 180
        && open == MotorSetpoints::new(700.0, 820.0)
        && closed == MotorSetpoints::new(200.0, 220.0)
        && sp.differential() == 500.0
        && at_170 == Mode::ContactHold
        && above == Mode::Sync;
    Outcome::new(
        "pinned constants",
        ok,
        format!(
            "threshold {DEFAULT_THRESHOLD}; open ({}, {}); closed ({}, {}); saturated differential {}; at 170 deg {}, at 170.5 deg {}",
            open.agonist,
            open.antagonist,
            closed.agonist,
            closed.antagonist,
            sp.differential(),
            at_170.name(),
            above.name()
        ),
    )
}

fn run_world(s: &Scenario) -> Result<Vec<TickRecord>, String> {
    World::new(s, Execution::default())
        .and_then(|mut w| w.run())
        .map_err(|e| e.to_string())
}

pub fn deformation_servo(dir: &Path) -> Outcome {
    const NAME: &str = "deformation servo recovers from indenter moves";
    let s = match scenario(dir, "d1") {
        Ok(s) => s,
        Err(e) => return Outcome::error(NAME, e),
    };
    let records = match run_world(&s) {
        Ok(r) => r,
        Err(e) => return Outcome::error(NAME, e),
    };
    let target = 0.05;
    let mut pass = !s.disturbances.is_empty();
    let mut parts = Vec::new();
    for (k, d) in s.disturbances.iter().enumerate() {
        let end = s.disturbances.get(k + 1).map_or(s.duration + 1.0, |n| n.time);
        let window: Vec<&TickRecord> = records.iter().filter(|r| r.t > d.time && r.t < end).collect();
        let peak = window.iter().map(|r| (r.deformation - target).abs()).fold(0.0, f64::max);
        let last_out = window
            .iter()
            .filter(|r| (r.deformation - target).abs() > 0.01)
            .map(|r| r.t)
            .fold(d.time, f64::max);
        let settle = last_out - d.time;
        let force = window.last().map_or(f64::NAN, |r| r.force);
        let ok = settle <= 2.0 && (force - 2.0).abs() <= 0.4;
        pass &= ok;
        parts.push(format!(
            "t={:.1} s: peak error {peak:.3}, back within 0.01 after {settle:.2} s, force {force:.2} N",
            d.time
        ));
    }
    Outcome::new(NAME, pass, parts.join("; "))
}

pub fn grasp_state_machine(dir: &Path) -> Outcome {
    const NAME: &str = "grasp state machine";
    let s = match scenario(dir, "d2") {
        Ok(s) => s,
        Err(e) => return Outcome::error(NAME, e),
    };
    let records = match run_world(&s) {
        Ok(r) => r,
        Err(e) => return Outcome::error(NAME, e),
    };
    let seq = mode_sequence(&records);
    let want = [Mode::Sync, Mode::ContactHold, Mode::SlipComp, Mode::ContactHold];
    let seq_ok = seq == want;

    let mut frozen = true;
    let mut wiggle: f64 = 0.0;
    let mut monotone = true;
    for w in records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.mode == Mode::ContactHold && b.mode == Mode::ContactHold {
            frozen &= a.setpoints == b.setpoints;
            wiggle = wiggle.max((a.gesture - b.gesture).abs());
        }
        if b.mode == Mode::SlipComp {
            monotone &= b.setpoints.differential() >= a.setpoints.differential();
        }
    }
    let hold_range = {
        let g: Vec<f64> = records
            .iter()
            .filter(|r| r.mode == Mode::ContactHold)
            .map(|r| r.gesture)
            .collect();
        g.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - g.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let names: Vec<&str> = seq.iter().map(|m| m.name()).collect();
    Outcome::new(
        NAME,
        seq_ok && frozen && monotone && hold_range > 10.0,
        format!(
            "modes {}; setpoints frozen in hold: {frozen} while the operator moved {hold_range:.0} deg; differential non-decreasing in slip: {monotone}",
            names.join(" -> ")
        ),
    )
}

pub fn feedback_versus_open_loop(dir: &Path) -> Outcome {
    const NAME: &str = "tactile feedback keeps the grasp";
    let base = match scenario(dir, "d3") {
        Ok(s) => s,
        Err(e) => return Outcome::error(NAME, e),
    };
    let sensor = base.sensor_finger;
    let mut open = base.clone();
    open.control = ControlMode::OpenLoop;
    let mut fb = base;
    fb.control = ControlMode::Feedback;
    let (ro, rf) = match (run_world(&open), run_world(&fb)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Outcome::error(NAME, e),
    };
    let open_final = ro.last().map_or(usize::MAX, |r| r.fingertip_contacts);
    let first = rf.iter().position(|r| r.contact[sensor]);
    let persists = first.is_some_and(|k| rf[k..].iter().all(|r| r.contact[sensor]));
    let fb_final = rf.last().map_or(0, |r| r.fingertip_contacts);
    Outcome::new(
        NAME,
        open_final == 0 && persists,
        format!(
            "open loop ends with {open_final} fingertip contacts; feedback holds the sensor fingertip from first touch to the end: {persists} ({fb_final} at the end)"
        ),
    )
}

/// Seconds for both encoders to reach `to` from `from` under the motor model.
fn stroke_time(cfg: &HandConfig, from: MotorSetpoints, to: MotorSetpoints) -> f64 {
    let mut s = HandState::open(cfg);
    s.motors.agonist_encoder = from.agonist;
    s.motors.antagonist_encoder = from.antagonist;
    let dt = 1e-3;
    let mut t = 0.0;
    while (s.motors.agonist_encoder != to.agonist || s.motors.antagonist_encoder != to.antagonist) && t < 10.0 {
        s = step_hand(cfg, &s, to, &ObjectShape::none(), dt).0;
        t += dt;
    }
    t
}

pub fn motor_timing(_: &Path) -> Outcome {
    let cfg = HandConfig::default();
    let c = ControllerConfig::default();
    let close = stroke_time(&cfg, c.open_setpoints, c.closed_setpoints);
    let open = stroke_time(&cfg, c.closed_setpoints, c.open_setpoints);
    Outcome::new(
        "full-stroke motor timing",
        (close - 0.46).abs() <= 0.05 && (open - 0.59).abs() <= 0.05,
        format!("close {close:.3} s (0.46 +- 0.05), open {open:.3} s (0.59 +- 0.05)"),
    )
}

pub fn replay_determinism(dir: &Path) -> Outcome {
    const NAME: &str = "replay is byte-for-byte";
    let tmp = match tempfile::tempdir() {
        Ok(t) => t,
        Err(e) => return Outcome::error(NAME, e),
    };
    let mut parts = Vec::new();
    let mut pass = true;
    for (exp, file) in [
        (Experiment::Workspace, "workspace_D.csv"),
        (Experiment::B1, "b1.csv"),
        (Experiment::C, "c_contacts.csv"),
        (Experiment::D2, "d2.csv"),
    ] {
        let name = exp.name().to_lowercase();
        let s = match scenario(dir, &name) {
            Ok(s) => s,
            Err(e) => return Outcome::error(NAME, e),
        };
        let out: PathBuf = tmp.path().join(&name);
        if let Err(e) = run_experiment(exp, &s, &out, Execution::default()) {
            return Outcome::error(NAME, e);
        }
        match replay(&out.join(file), Execution::default()) {
            Ok(r) => {
                pass &= r.identical();
                parts.push(format!("{} {} rows {}", file, r.rows, if r.identical() { "identical" } else { "DIVERGED" }));
            }
            Err(e) => return Outcome::error(NAME, e),
        }
    }
    Outcome::new(NAME, pass, parts.join(", "))
}
