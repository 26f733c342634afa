use proptest::prelude::*;
use tendon_hand::controller::*;
use tendon_hand::hand::{step_hand, HandConfig, HandState, MotorSetpoints, ObjectShape};

const DT: f64 = 0.02;

/// Seconds until the agonist encoder stays within 2% of the step for good,
/// and the error left after a minute.
fn settling_time(from: f64, to: f64) -> (f64, f64) {
    let hand = HandConfig::default();
    let cfg = ControllerConfig::default();
    let mut s = HandState::open(&hand);
    s.motors.agonist_encoder = from;
    let mut ctl = ControllerState::new(&cfg);
    let band = 0.02 * (to - from).abs();
    let mut last_outside = 0.0;
    let target = MotorSetpoints::new(to, hand.antagonist_reference);
    for k in 1..=3000 {
        let measured = MotorSetpoints::new(s.motors.agonist_encoder, s.motors.antagonist_encoder);
        let (cmd, pid) = motor_targets(&cfg, &ctl, target, measured, DT);
        ctl.motor_pid = pid;
        s = step_hand(&hand, &s, cmd, &ObjectShape::none(), DT).0;
        if (s.motors.agonist_encoder - to).abs() > band {
            last_outside = k as f64 * DT;
        }
    }
    (last_outside, (s.motors.agonist_encoder - to).abs())
}

#[test]
fn motor_loop_settles_inside_a_second() {
    for (from, to) in [(700.0, 600.0), (600.0, 700.0), (700.0, 450.0), (300.0, 500.0)] {
        let (t, residual) = settling_time(from, to);
        assert!(t < 1.0, "{from}->{to}: {t}");
        assert!(residual < 1e-4 * (to - from).abs(), "{from}->{to}: {residual}");
    }
}

#[test]
fn pid_examples() {
    let g = PidGains::p(2.0);
    assert_eq!(pid_step(&g, 5.0, 5.0, DT, &PidState::default()).0, 0.0);
    assert_eq!(pid_step(&g, 10.0, 0.0, DT, &PidState::default()).0, 20.0);
    let d = PidGains { kd: 1.0, ..PidGains::p(0.0) };
    let (_, st) = pid_step(&d, 1.0, 0.0, 0.5, &PidState::default());
    assert_eq!(pid_step(&d, 2.0, 0.0, 0.5, &st).0, 2.0);
}

#[test]
fn dip_compensation_examples() {
    let sp = MotorSetpoints::new(500.0, 520.0);
    assert_eq!(dip_compensation(sp, 50.0, 500.0), MotorSetpoints::new(450.0, 520.0));
    let mut s = sp;
    for _ in 0..100 {
        s = dip_compensation(s, 50.0, 500.0);
    }
    assert_eq!(s, MotorSetpoints::new(20.0, 520.0));
    // already past saturation: never widened
    let past = MotorSetpoints::new(10.0, 520.0);
    assert_eq!(dip_compensation(past, 50.0, 500.0), past);
}

#[test]
fn deformation_servo_signs() {
    let g = ControllerConfig::default().servo;
    assert_eq!(deformation_servo(0.05, 0.05, &g, DT, &PidState::default()).0, 0.0);
    assert!(deformation_servo(0.05, 0.10, &g, DT, &PidState::default()).0 > 0.0);
    assert!(deformation_servo(0.05, 0.0, &g, DT, &PidState::default()).0 < 0.0);
}

#[test]
fn fsm_walkthrough() {
    let cfg = ControllerConfig::default();
    let s0 = ControllerState::new(&cfg);
    let (s1, sp1) = fsm_step(&cfg, &s0, false, false, GestureInput::new(140.0));
    assert_eq!(s1.mode, Mode::Sync);
    assert_eq!(sp1, map_gesture(&cfg, GestureInput::new(140.0)));
    let (s2, sp2) = fsm_step(&cfg, &s1, true, false, GestureInput::new(120.0));
    assert_eq!(s2.mode, Mode::ContactHold);
    assert_eq!(sp2, sp1);
    let (s3, sp3) = fsm_step(&cfg, &s2, true, true, GestureInput::new(90.0));
    assert_eq!(s3.mode, Mode::SlipComp);
    assert!(sp3.differential() > sp2.differential());
    let mut s = s3;
    for k in 0..cfg.slip_clear_ticks {
        let (n, _) = fsm_step(&cfg, &s, true, false, GestureInput::new(90.0));
        let want = if k + 1 == cfg.slip_clear_ticks { Mode::ContactHold } else { Mode::SlipComp };
        assert_eq!(n.mode, want);
        s = n;
    }
    let (r, sp) = fsm_step(&cfg, &s, true, true, GestureInput::new(175.0));
    assert_eq!(r.mode, Mode::Sync);
    assert_eq!(sp, map_gesture(&cfg, GestureInput::new(175.0)));
}

#[test]
fn config_validation() {
    let mut c = ControllerConfig::default();
    assert!(c.validate().is_ok());
    c.deformation_target = 1.5;
    assert!(c.validate().is_err());
    let mut c = ControllerConfig::default();
    c.dip_step = 0.0;
    assert!(c.validate().is_err());
}

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Sync), Just(Mode::ContactHold), Just(Mode::SlipComp)]
}

proptest! {
    #[test]
    fn gesture_map_is_increasing(a in 30.0..180.0f64, b in 30.0..180.0f64) {
        prop_assume!(a < b);
        let c = ControllerConfig::default();
        let (lo, hi) = (map_gesture(&c, GestureInput::new(a)), map_gesture(&c, GestureInput::new(b)));
        prop_assert!(lo.agonist < hi.agonist);
        prop_assert!(lo.antagonist < hi.antagonist);
    }

    #[test]
    fn held_setpoints_ignore_the_operator(
        flags in prop::collection::vec((any::<bool>(), any::<bool>()), 1..40),
        g1 in prop::collection::vec(30.0..170.0f64, 40),
        g2 in prop::collection::vec(30.0..170.0f64, 40),
        start in prop_oneof![Just(Mode::ContactHold), Just(Mode::SlipComp)],
    ) {
        let cfg = ControllerConfig::default();
        let mut a = ControllerState { mode: start, held: MotorSetpoints::new(400.0, 500.0), ..ControllerState::new(&cfg) };
        let mut b = a;
        for (k, &(contact, slip)) in flags.iter().enumerate() {
            let (na, spa) = fsm_step(&cfg, &a, contact, slip, GestureInput::new(g1[k]));
            let (nb, spb) = fsm_step(&cfg, &b, contact, slip, GestureInput::new(g2[k]));
            prop_assert_eq!(spa, spb);
            prop_assert_eq!(na, nb);
            prop_assert!(na.mode != Mode::Sync);
            a = na;
            b = nb;
        }
    }

    #[test]
    fn open_hand_always_releases(m in mode(), contact in any::<bool>(), slip in any::<bool>(), g in 170.0001..360.0f64) {
        let cfg = ControllerConfig::default();
        let s = ControllerState { mode: m, ..ControllerState::new(&cfg) };
        let (n, sp) = fsm_step(&cfg, &s, contact, slip, GestureInput::new(g));
        prop_assert_eq!(n.mode, Mode::Sync);
        prop_assert_eq!(sp, map_gesture(&cfg, GestureInput::new(g)));
    }

    #[test]
    fn slip_compensation_only_tightens(slips in prop::collection::vec(any::<bool>(), 1..60), ag in 200.0..700.0f64, an in 220.0..820.0f64) {
        let cfg = ControllerConfig::default();
        let mut s = ControllerState { mode: Mode::SlipComp, held: MotorSetpoints::new(ag, an), ..ControllerState::new(&cfg) };
        for slip in slips {
            let before = s.held;
            let (n, sp) = fsm_step(&cfg, &s, true, slip, GestureInput::new(90.0));
            prop_assert!(sp.differential() >= before.differential());
            prop_assert_eq!(sp.antagonist, before.antagonist);
            prop_assert!(sp.differential() <= cfg.saturation_differential.max(before.differential()));
            s = n;
        }
    }

    #[test]
    fn integral_stays_clamped(errors in prop::collection::vec(-1000.0..1000.0f64, 1..100)) {
        let g = PidGains::default();
        let mut st = PidState::default();
        for e in errors {
            let (u, n) = pid_step(&g, e, 0.0, DT, &st);
            prop_assert!(n.integral.abs() <= g.integral_limit);
            prop_assert!(u.abs() <= g.output_limit);
            st = n;
        }
    }
}
