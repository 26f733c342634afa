//! Two-motor grasp controller: gesture-to-setpoint mapping, per-motor PID
//! loops, the sync / contact-hold / slip-compensation state machine and a
//! deformation servo for the fingertip sensor.

use crate::error::{Error, Result};
use crate::hand::MotorSetpoints;
use serde::{Deserialize, Serialize};

/// Mean finger-to-palm angle of the operator's hand in degrees; 180 is a
/// fully open hand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureInput {
    pub avg_closure_angle: f64,
}

impl GestureInput {
    pub fn new(avg_closure_angle: f64) -> Self {
        GestureInput { avg_closure_angle }
    }

    /// Arithmetic mean of per-finger angles.
    pub fn from_fingers(angles: &[f64]) -> Self {
        let n = angles.len().max(1) as f64;
        GestureInput::new(angles.iter().sum::<f64>() / n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Anti-windup bound on the error integral.
    pub integral_limit: f64,
    /// Output saturation (symmetric).
    pub output_limit: f64,
}

impl PidGains {
    pub fn p(kp: f64) -> Self {
        PidGains {
            kp,
            ki: 0.0,
            kd: 0.0,
            integral_limit: f64::INFINITY,
            output_limit: f64::INFINITY,
        }
    }
}

impl Default for PidGains {
    /// Encoder position loop: counts/s out per count of error.
    fn default() -> Self {
        PidGains {
            kp: 8.0,
            ki: 1.0,
            kd: 0.0,
            integral_limit: 100.0,
            output_limit: 600.0 / 0.46,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

/// One PID update on `setpoint - measured`. Returns the saturated command and
/// the new state.
pub fn pid_step(gains: &PidGains, setpoint: f64, measured: f64, dt: f64, state: &PidState) -> (f64, PidState) {
    let error = setpoint - measured;
    let integral = (state.integral + error * dt).clamp(-gains.integral_limit, gains.integral_limit);
    let derivative = match state.prev_error {
        Some(prev) if dt > 0.0 => (error - prev) / dt,
        _ => 0.0,
    };
    let u = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    (
        u.clamp(-gains.output_limit, gains.output_limit),
        PidState {
            integral,
            prev_error: Some(error),
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Sync,
    ContactHold,
    SlipComp,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sync => "SYNC",
            Mode::ContactHold => "CONTACT_HOLD",
            Mode::SlipComp => "SLIP_COMP",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Operator angle (deg) mapped to the closed setpoints.
    pub closed_angle: f64,
    pub open_setpoints: MotorSetpoints,
    pub closed_setpoints: MotorSetpoints,
    /// Operator angle (deg) above which any grasp is released.
    pub release_angle: f64,
    /// Agonist decrement (counts) per slip-compensation tick.
    pub dip_step: f64,
    /// Antagonist-minus-agonist reading at which the DIP saturates.
    pub saturation_differential: f64,
    /// Consecutive slip-free ticks before leaving slip compensation.
    pub slip_clear_ticks: u32,
    pub motor_pid: PidGains,
    /// Deformation servo: counts/s of synchronised opening per unit error.
    pub servo: PidGains,
    pub deformation_target: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            closed_angle: 30.0,
            open_setpoints: MotorSetpoints::new(700.0, 820.0),
            closed_setpoints: MotorSetpoints::new(200.0, 220.0),
            release_angle: 170.0,
            dip_step: 25.0,
            saturation_differential: 500.0,
            slip_clear_ticks: 5,
            motor_pid: PidGains::default(),
            servo: PidGains {
                kp: 600.0,
                ki: 1500.0,
                kd: 0.0,
                integral_limit: 0.2,
                output_limit: 400.0,
            },
            deformation_target: 0.05,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.closed_angle < 180.0) {
            return bad("closed angle must be below 180 degrees");
        }
        if !(self.dip_step > 0.0) {
            return bad("DIP compensation step must be positive");
        }
        if !(self.saturation_differential > 0.0) {
            return bad("saturation differential must be positive");
        }
        if !(0.0..=1.0).contains(&self.deformation_target) {
            return bad("deformation target outside [0, 1]");
        }
        Ok(())
    }
}

/// Linear interpolation per motor from the closed setpoints at
/// `closed_angle` to the open setpoints at 180 degrees. The angle is clamped
/// to that range first.
pub fn map_gesture(cfg: &ControllerConfig, g: GestureInput) -> MotorSetpoints {
    let a = g.avg_closure_angle.clamp(cfg.closed_angle, 180.0);
    let t = (a - cfg.closed_angle) / (180.0 - cfg.closed_angle);
    let lerp = |c: f64, o: f64| c + (o - c) * t;
    MotorSetpoints::new(
        lerp(cfg.closed_setpoints.agonist, cfg.open_setpoints.agonist),
        lerp(cfg.closed_setpoints.antagonist, cfg.open_setpoints.antagonist),
    )
}

/// Winds the agonist by `step` with the antagonist held, curling only the
/// DIP. The agonist never drops below the point where the differential
/// reaches `saturation`, and never rises.
pub fn dip_compensation(sp: MotorSetpoints, step: f64, saturation: f64) -> MotorSetpoints {
    let floor = sp.antagonist - saturation;
    MotorSetpoints::new(sp.agonist.min((sp.agonist - step).max(floor)), sp.antagonist)
}

/// Synchronised setpoint rate (counts/s, positive opens) that drives the
/// measured deformation `d` toward `target`.
pub fn deformation_servo(target: f64, d: f64, gains: &PidGains, dt: f64, state: &PidState) -> (f64, PidState) {
    // pid_step works on setpoint - measured; feeding (d, target) makes a too
    // deep press produce a positive, opening command
    pid_step(gains, d, target, dt, state)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub mode: Mode,
    /// Last commanded setpoints; frozen outside SYNC.
    pub held: MotorSetpoints,
    pub clear_ticks: u32,
    /// Agonist, antagonist.
    pub motor_pid: [PidState; 2],
    pub servo: PidState,
}

impl ControllerState {
    pub fn new(cfg: &ControllerConfig) -> Self {
        ControllerState {
            mode: Mode::Sync,
            held: cfg.open_setpoints,
            clear_ticks: 0,
            motor_pid: [PidState::default(); 2],
            servo: PidState::default(),
        }
    }
}

/// One tick of the grasp state machine.
///
/// * any mode, `g > release_angle`: back to SYNC, grasp released
/// * SYNC: follow the operator; on contact freeze the last setpoints
/// * CONTACT_HOLD: hold; on slip compensate and enter SLIP_COMP
/// * SLIP_COMP: compensate every slipping tick; after `slip_clear_ticks`
///   slip-free ticks return to CONTACT_HOLD
pub fn fsm_step(
    cfg: &ControllerConfig,
    state: &ControllerState,
    is_contact: bool,
    is_slip: bool,
    g: GestureInput,
) -> (ControllerState, MotorSetpoints) {
    let mut next = *state;
    if g.avg_closure_angle > cfg.release_angle {
        next.mode = Mode::Sync;
        next.clear_ticks = 0;
        next.held = map_gesture(cfg, g);
        return (next, next.held);
    }
    match state.mode {
        Mode::Sync => {
            if is_contact {
                next.mode = Mode::ContactHold;
            } else {
                next.held = map_gesture(cfg, g);
            }
        }
        Mode::ContactHold => {
            if is_slip {
                next.mode = Mode::SlipComp;
                next.clear_ticks = 0;
                next.held = dip_compensation(state.held, cfg.dip_step, cfg.saturation_differential);
            }
        }
        Mode::SlipComp => {
            if is_slip {
                next.clear_ticks = 0;
                next.held = dip_compensation(state.held, cfg.dip_step, cfg.saturation_differential);
            } else {
                next.clear_ticks += 1;
                if next.clear_ticks >= cfg.slip_clear_ticks {
                    next.mode = Mode::ContactHold;
                    next.clear_ticks = 0;
                }
            }
        }
    }
    (next, next.held)
}

/// Encoder targets for the next tick: each motor's PID turns the setpoint
/// error into a rate, integrated over `dt` from the measured encoder.
pub fn motor_targets(
    cfg: &ControllerConfig,
    state: &ControllerState,
    setpoints: MotorSetpoints,
    measured: MotorSetpoints,
    dt: f64,
) -> (MotorSetpoints, [PidState; 2]) {
    let (ua, sa) = pid_step(&cfg.motor_pid, setpoints.agonist, measured.agonist, dt, &state.motor_pid[0]);
    let (un, sn) = pid_step(&cfg.motor_pid, setpoints.antagonist, measured.antagonist, dt, &state.motor_pid[1]);
    (
        MotorSetpoints::new(measured.agonist + ua * dt, measured.antagonist + un * dt),
        [sa, sn],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gesture_endpoints() {
        let c = ControllerConfig::default();
        assert_eq!(map_gesture(&c, GestureInput::new(180.0)), MotorSetpoints::new(700.0, 820.0));
        assert_eq!(map_gesture(&c, GestureInput::new(30.0)), MotorSetpoints::new(200.0, 220.0));
        assert_eq!(map_gesture(&c, GestureInput::new(105.0)), MotorSetpoints::new(450.0, 520.0));
        assert_eq!(map_gesture(&c, GestureInput::new(0.0)), MotorSetpoints::new(200.0, 220.0));
    }

    #[test]
    fn pid_examples() {
        let (u, _) = pid_step(&PidGains::default(), 5.0, 5.0, 0.02, &PidState::default());
        assert_eq!(u, 0.0);
        let (u, _) = pid_step(&PidGains::p(2.0), 10.0, 0.0, 0.02, &PidState::default());
        assert_eq!(u, 20.0);
    }

    #[test]
    fn dip_compensation_examples() {
        let sp = dip_compensation(MotorSetpoints::new(500.0, 520.0), 50.0, 500.0);
        assert_eq!(sp, MotorSetpoints::new(450.0, 520.0));
        let mut sp = MotorSetpoints::new(500.0, 520.0);
        for _ in 0..100 {
            sp = dip_compensation(sp, 25.0, 500.0);
        }
        assert_eq!(sp, MotorSetpoints::new(20.0, 520.0));
        // already beyond saturation: held, never widened
        let sp = dip_compensation(MotorSetpoints::new(10.0, 520.0), 25.0, 500.0);
        assert_eq!(sp.agonist, 10.0);
    }

    #[test]
    fn servo_sign() {
        let g = ControllerConfig::default().servo;
        let (u, _) = deformation_servo(0.05, 0.05, &g, 0.02, &PidState::default());
        assert_eq!(u, 0.0);
        let (u, _) = deformation_servo(0.05, 0.10, &g, 0.02, &PidState::default());
        assert!(u > 0.0);
    }

    #[test]
    fn fsm_sequence() {
        let c = ControllerConfig::default();
        let s = ControllerState::new(&c);
        let (s, sp) = fsm_step(&c, &s, false, false, GestureInput::new(140.0));
        assert_eq!(s.mode, Mode::Sync);
        assert_eq!(sp, map_gesture(&c, GestureInput::new(140.0)));
        let (s, held) = fsm_step(&c, &s, true, false, GestureInput::new(120.0));
        assert_eq!(s.mode, Mode::ContactHold);
        assert_eq!(held, sp);
        let (s, sp2) = fsm_step(&c, &s, true, false, GestureInput::new(60.0));
        assert_eq!(sp2, held);
        let (mut s, sp3) = fsm_step(&c, &s, true, true, GestureInput::new(60.0));
        assert_eq!(s.mode, Mode::SlipComp);
        assert!(sp3.differential() > held.differential());
        for _ in 0..4 {
            s = fsm_step(&c, &s, true, false, GestureInput::new(60.0)).0;
            assert_eq!(s.mode, Mode::SlipComp);
        }
        s = fsm_step(&c, &s, true, false, GestureInput::new(60.0)).0;
        assert_eq!(s.mode, Mode::ContactHold);
        let (s, sp) = fsm_step(&c, &s, true, true, GestureInput::new(171.0));
        assert_eq!(s.mode, Mode::Sync);
        assert_eq!(sp, map_gesture(&c, GestureInput::new(171.0)));
    }
}
