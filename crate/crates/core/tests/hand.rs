use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tendon_hand::controller::{dip_compensation, map_gesture, ControllerConfig, GestureInput};
use tendon_hand::finger::{FingerConfig, Joint, JointSet, JointState};
use tendon_hand::geometry::Vec2;
use tendon_hand::hand::*;

const DT: f64 = 0.02;

fn run(cfg: &HandConfig, objects: &ObjectShape, setpoints: &[MotorSetpoints]) -> Vec<HandState> {
    let mut s = HandState::open(cfg);
    let mut out = Vec::with_capacity(setpoints.len());
    for &sp in setpoints {
        s = step_hand(cfg, &s, sp, objects, DT).0;
        out.push(s.clone());
    }
    out
}

/// Close, hold, wiggle and reopen along the gesture map.
fn grasp_schedule(ticks: usize) -> Vec<MotorSetpoints> {
    let c = ControllerConfig::default();
    (0..ticks)
        .map(|k| {
            let t = k as f64 * DT;
            let g = 105.0 + 75.0 * (0.4 * t).cos();
            map_gesture(&c, GestureInput::new(g))
        })
        .collect()
}

#[test]
fn spool_encoder_round_trip() {
    let c = HandConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let s: f64 = rng.gen_range(0.0..30.0);
        let e = spool_to_encoder(s, c.agonist_reference, &c);
        let back = encoders_to_spool(e, c.agonist_reference, &c).unwrap();
        assert!((back - s).abs() < 1e-12);
    }
}

#[test]
fn conservation_every_tick() {
    let cfg = HandConfig::default();
    let mut objects = ObjectShape::none();
    objects.obstacles[1] = Some(Obstacle::circle(60.0, 45.0, 20.0));
    objects.obstacles[3] = Some(Obstacle::circle(30.0, 30.0, 10.0));
    for s in run(&cfg, &objects, &grasp_schedule(500)) {
        for d in [&s.agonist, &s.antagonist] {
            assert!(d.conservation_error() <= 4.0 * f64::EPSILON * d.spool.max(1.0));
            for i in 0..FINGER_COUNT {
                assert!(d.tendon[i] >= 0.0 && d.spring[i] >= 0.0);
            }
        }
    }
}

#[test]
fn blocking_one_finger_leaves_the_others_bitwise_identical() {
    let cfg = HandConfig::default();
    let free = ObjectShape::none();
    let mut blocked = ObjectShape::none();
    blocked.obstacles[1] = Some(Obstacle::circle(20.0, 12.0, 10.0));
    let sched = grasp_schedule(400);
    let a = run(&cfg, &free, &sched);
    let b = run(&cfg, &blocked, &sched);
    assert!(b.iter().any(|s| !s.fingers[1].blocked.is_empty()));
    assert!(a.iter().zip(&b).any(|(x, y)| x.fingers[1] != y.fingers[1]));
    for (x, y) in a.iter().zip(&b) {
        for i in [0, 2, 3, 4] {
            assert_eq!(x.fingers[i], y.fingers[i]);
        }
        assert_eq!(x.motors, y.motors);
    }
}

#[test]
fn proximal_contact_leaves_distal_joints_flexing() {
    let cfg = HandConfig::default();
    let mut objects = ObjectShape::none();
    objects.obstacles[2] = Some(Obstacle::circle(20.0, 14.0, 10.0));
    let closed = vec![MotorSetpoints::new(200.0, 220.0); 60];
    let s = run(&cfg, &objects, &closed).pop().unwrap();
    let f = s.fingers[2];
    assert!(f.blocked.contains(Joint::Mcp));
    assert!(f.joints.pip() > 1.0, "{:?}", f.joints);
    // a finger without an obstacle closes completely
    let free = s.fingers[1].joints;
    assert!((free.total() - 1.5 * std::f64::consts::PI).abs() < 1e-9);
}

#[test]
fn full_stroke_timing() {
    let cfg = HandConfig::default();
    let closed = MotorSetpoints::new(200.0, 220.0);
    let mut s = HandState::open(&cfg);
    let mut ticks = 0;
    while s.motors.agonist_encoder != closed.agonist || s.motors.antagonist_encoder != closed.antagonist {
        s = step_hand(&cfg, &s, closed, &ObjectShape::none(), DT).0;
        ticks += 1;
    }
    assert!((ticks as f64 * DT - 0.46).abs() <= DT + 1e-9, "{ticks}");
}

#[test]
fn dip_compensation_in_hold_moves_only_the_dip() {
    let cfg = HandConfig::default();
    // agonist ahead of the antagonist slack, so the covered joints sit at it
    let hold = MotorSetpoints::new(560.0, 700.0);
    let before = run(&cfg, &ObjectShape::none(), &vec![hold; 30]).pop().unwrap();
    let tighter = dip_compensation(hold, 25.0, 500.0);
    let mut s = before.clone();
    for _ in 0..30 {
        s = step_hand(&cfg, &s, tighter, &ObjectShape::none(), DT).0;
    }
    for i in 0..FINGER_COUNT {
        let (a, b) = (before.fingers[i].joints, s.fingers[i].joints);
        assert!((a.mcp() - b.mcp()).abs() < 1e-9);
        assert!((a.pip() - b.pip()).abs() < 1e-9);
        assert!(b.dip() > a.dip());
    }
}

#[test]
fn config_errors() {
    let mut c = HandConfig::default();
    assert!(c.validate().is_ok());
    c.spool_gain = 0.0;
    assert!(c.validate().is_err());
    let mut c = HandConfig::default();
    c.encoder_range = (10.0, 10.0);
    assert!(c.validate().is_err());
}

/// Samples the segment densely and takes the smallest distance to the circle.
fn brute_clearance(a: Vec2, b: Vec2, center: Vec2, radius: f64) -> f64 {
    let n = 20_000;
    (0..=n)
        .map(|k| {
            let t = k as f64 / n as f64;
            (a + (b - a) * t).distance(center)
        })
        .fold(f64::INFINITY, f64::min)
        - radius
}

proptest! {
    #[test]
    fn blocked_set_matches_brute_force(
        th in [0.0..1.5f64, 0.0..1.5f64, 0.0..1.5f64],
        cx in -20.0..130.0f64, cy in -20.0..130.0f64, r in 2.0..30.0f64,
    ) {
        let c = FingerConfig::default();
        let skin = 1.0;
        let joints = JointState::from_angles(th);
        let ob = Obstacle::circle(cx, cy, r);
        let report = contact_detect(&c, &joints, Some(&ob), skin, 3.0);
        let pts = tendon_hand::finger::joint_points(&c, &th);
        let mut expect = JointSet::EMPTY;
        for k in 0..3 {
            let d = brute_clearance(pts[k], pts[k + 1], Vec2::new(cx, cy), r);
            prop_assume!((d - skin).abs() > 1e-3);
            if d <= skin {
                for j in 0..=k {
                    expect.insert(Joint::from_index(j).unwrap());
                }
            }
        }
        prop_assert_eq!(report.blocked, expect);
    }

    #[test]
    fn encoders_respect_the_rate_limit(targets in prop::collection::vec((0.0..1023.0f64, 0.0..1023.0f64), 1..40)) {
        let cfg = HandConfig::default();
        let mut s = HandState::open(&cfg);
        for (a, b) in targets {
            let n = step_hand(&cfg, &s, MotorSetpoints::new(a, b), &ObjectShape::none(), DT).0;
            let max = cfg.close_rate.max(cfg.open_rate) * DT + 1e-9;
            prop_assert!((n.motors.agonist_encoder - s.motors.agonist_encoder).abs() <= max);
            prop_assert!((n.motors.antagonist_encoder - s.motors.antagonist_encoder).abs() <= max);
            prop_assert!(n.agonist.conservation_error() <= 4.0 * f64::EPSILON * n.agonist.spool.max(1.0));
            s = n;
        }
    }

    #[test]
    fn distribute_conserves(s in 0.0..100.0f64, limits in [0.0..50.0f64, 0.0..50.0f64, 0.0..50.0f64, 0.0..50.0f64, 0.0..50.0f64]) {
        let d = distribute(s, limits);
        for i in 0..FINGER_COUNT {
            prop_assert_eq!(d.tendon[i], s.min(limits[i]));
        }
        prop_assert!(d.conservation_error() <= 4.0 * f64::EPSILON * s.max(1.0));
    }
}
