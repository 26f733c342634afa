//! Whole-hand model: five tendon-driven fingers, two motors and two spring
//! differentials (one per tendon system), plus per-finger planar obstacles.
//!
//! Each motor winds a shared spool. A spool displacement `s` is split among
//! the five finger tendons through soft-synergy springs: a finger takes up as
//! much travel as it can absorb and its spring stretches by the rest, so a
//! blocked finger never holds the others back.

use crate::error::{Error, Result};
use crate::finger::{
    advance_capacity, joint_points, step_finger, FingerConfig, FingerType, Joint, JointSet, JointState, TendonCommand,
};
use crate::geometry::{convex_contains, is_convex, Segment, Vec2};
use serde::{Deserialize, Serialize};

pub const FINGER_COUNT: usize = 5;
pub const FINGER_NAMES: [&str; FINGER_COUNT] = ["thumb", "index", "middle", "ring", "little"];

/// Pose of a finger's base in the palm frame. Only used for drawing; every
/// finger is simulated in its own plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub origin: Vec2,
    pub heading: f64,
    pub mirrored: bool,
}

impl Placement {
    pub fn to_palm(&self, p: Vec2) -> Vec2 {
        let p = if self.mirrored { Vec2::new(p.x, -p.y) } else { p };
        self.origin + p.rotate(self.heading)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandConfig {
    pub fingers: [FingerConfig; FINGER_COUNT],
    pub placements: [Placement; FINGER_COUNT],
    /// Soft-synergy spring stiffness (N/mm).
    pub synergy_stiffness: f64,
    /// Valid encoder counts, inclusive.
    pub encoder_range: (f64, f64),
    /// Tendon travel per encoder count (mm/count).
    pub spool_gain: f64,
    /// Encoder readings at which each spool is at its zero displacement.
    pub agonist_reference: f64,
    pub antagonist_reference: f64,
    /// Encoder slew rate when counts decrease (closing), counts/s.
    pub close_rate: f64,
    /// Encoder slew rate when counts increase (opening), counts/s.
    pub open_rate: f64,
    /// Compliant fingertip pad thickness beyond the rigid contact offset (mm).
    pub pad_thickness: f64,
    /// Largest spool increment (mm) resolved in one contact sub-step.
    pub contact_substep: f64,
}

impl Default for HandConfig {
    fn default() -> Self {
        let finger = FingerConfig::new(FingerType::D);
        let mut placements = [Placement {
            origin: Vec2::ZERO,
            heading: std::f64::consts::FRAC_PI_2,
            mirrored: false,
        }; FINGER_COUNT];
        placements[0] = Placement {
            origin: Vec2::new(-30.0, -40.0),
            heading: 0.9,
            mirrored: true,
        };
        for (k, p) in placements.iter_mut().enumerate().skip(1) {
            p.origin = Vec2::new(-27.0 + 20.0 * (k - 1) as f64, 0.0);
        }
        HandConfig {
            fingers: std::array::from_fn(|_| finger.clone()),
            placements,
            synergy_stiffness: 2.0,
            encoder_range: (0.0, 1023.0),
            spool_gain: 0.05,
            agonist_reference: 700.0,
            antagonist_reference: 820.0,
            // the 600-count antagonist stroke sets the full-closure time
            close_rate: 600.0 / 0.46,
            open_rate: 600.0 / 0.59,
            pad_thickness: 3.0,
            contact_substep: 0.05,
        }
    }
}

impl HandConfig {
    pub fn validate(&self) -> Result<()> {
        for f in &self.fingers {
            f.validate()?;
        }
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.spool_gain > 0.0) {
            return bad("spool gain must be positive");
        }
        if !(self.encoder_range.0 < self.encoder_range.1) {
            return bad("encoder range is empty");
        }
        if !(self.close_rate > 0.0 && self.open_rate > 0.0) {
            return bad("motor rates must be positive");
        }
        if !(self.pad_thickness >= 0.0 && self.contact_substep > 0.0 && self.synergy_stiffness >= 0.0) {
            return bad("pad thickness, sub-step and synergy stiffness must be non-negative");
        }
        Ok(())
    }

    pub fn check_encoder(&self, encoder: f64) -> Result<()> {
        let (min, max) = self.encoder_range;
        if encoder >= min && encoder <= max {
            Ok(())
        } else {
            Err(Error::EncoderRange { value: encoder, min, max })
        }
    }

    pub fn clamp_encoder(&self, encoder: f64) -> f64 {
        encoder.clamp(self.encoder_range.0, self.encoder_range.1)
    }
}

/// Spool displacement for an encoder reading; decreasing counts wind the spool.
pub fn encoders_to_spool(encoder: f64, reference: f64, config: &HandConfig) -> Result<f64> {
    config.check_encoder(encoder)?;
    Ok(config.spool_gain * (reference - encoder))
}

pub fn spool_to_encoder(spool: f64, reference: f64, config: &HandConfig) -> f64 {
    reference - spool / config.spool_gain
}

/// Encoder targets for the agonist and antagonist motors (counts).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotorSetpoints {
    pub agonist: f64,
    pub antagonist: f64,
}

impl MotorSetpoints {
    pub fn new(agonist: f64, antagonist: f64) -> Self {
        MotorSetpoints { agonist, antagonist }
    }

    /// Antagonist minus agonist reading.
    pub fn differential(&self) -> f64 {
        self.antagonist - self.agonist
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorState {
    pub agonist_encoder: f64,
    pub antagonist_encoder: f64,
    pub setpoints: MotorSetpoints,
}

/// One tendon system's spool split across the fingers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DifferentialState {
    pub spool: f64,
    pub tendon: [f64; FINGER_COUNT],
    pub spring: [f64; FINGER_COUNT],
}

impl DifferentialState {
    /// Largest |s - (tendon_i + spring_i)| over the fingers.
    pub fn conservation_error(&self) -> f64 {
        (0..FINGER_COUNT)
            .map(|i| (self.spool - (self.tendon[i] + self.spring[i])).abs())
            .fold(0.0, f64::max)
    }
}

/// Splits spool travel `s` across fingers that can each advance at most
/// `limits[i]`; the synergy springs take up the remainder.
pub fn distribute(s: f64, limits: [f64; FINGER_COUNT]) -> DifferentialState {
    let s = s.max(0.0);
    let mut out = DifferentialState {
        spool: s,
        ..Default::default()
    };
    for i in 0..FINGER_COUNT {
        out.tendon[i] = s.min(limits[i].max(0.0));
        out.spring[i] = s - out.tendon[i];
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Obstacle {
    Circle { center: Vec2, radius: f64 },
    Polygon { vertices: Vec<Vec2> },
}

impl Obstacle {
    pub fn circle(x: f64, y: f64, radius: f64) -> Self {
        Obstacle::Circle {
            center: Vec2::new(x, y),
            radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Obstacle::Circle { radius, .. } if !(*radius > 0.0) => {
                Err(Error::InvalidConfig("circle radius must be positive".into()))
            }
            Obstacle::Polygon { vertices } if !is_convex(vertices) => {
                Err(Error::InvalidConfig("polygon obstacle must be convex".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn translate(&mut self, by: Vec2) {
        match self {
            Obstacle::Circle { center, .. } => *center = *center + by,
            Obstacle::Polygon { vertices } => vertices.iter_mut().for_each(|v| *v = *v + by),
        }
    }

    /// Signed clearance between a segment and the obstacle together with the
    /// closest point on the segment. Circles report negative values when the
    /// segment cuts into them; polygons report zero.
    pub fn clearance(&self, seg: &Segment) -> (f64, Vec2) {
        match self {
            Obstacle::Circle { center, radius } => {
                let p = seg.closest_point(*center);
                (p.distance(*center) - radius, p)
            }
            Obstacle::Polygon { vertices } => {
                for end in [seg.a, seg.b] {
                    if convex_contains(vertices, end) {
                        return (0.0, end);
                    }
                }
                let n = vertices.len();
                let mut best = (f64::INFINITY, seg.a);
                for i in 0..n {
                    let edge = Segment::new(vertices[i], vertices[(i + 1) % n]);
                    let (p, q) = seg.closest_points(&edge);
                    let d = p.distance(q);
                    if d < best.0 {
                        best = (d, p);
                    }
                }
                best
            }
        }
    }
}

/// Planar obstacles, one optional shape per finger plane.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectShape {
    pub obstacles: [Option<Obstacle>; FINGER_COUNT],
    /// Rigid contact distance between a phalanx axis and an obstacle (mm).
    pub skin_offset: f64,
}

impl ObjectShape {
    pub fn none() -> Self {
        ObjectShape {
            obstacles: Default::default(),
            skin_offset: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.skin_offset >= 0.0) {
            return Err(Error::InvalidConfig("skin offset must be non-negative".into()));
        }
        self.obstacles.iter().flatten().try_for_each(Obstacle::validate)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FingerContact {
    pub blocked: JointSet,
    /// Segments (proximal, middle, distal) within their contact zone.
    pub touching: [bool; 3],
    /// Closest phalanx point of the deepest contact, finger frame (mm).
    pub point: Option<Vec2>,
    /// Depth into the contact zone of the deepest contact (mm).
    pub penetration: f64,
    /// Depth into the fingertip pad (mm), 0 without distal contact.
    pub pad_penetration: f64,
    /// Distance of the distal contact from the DIP joint along the phalanx.
    pub pad_position: Option<f64>,
}

impl FingerContact {
    pub fn distal(&self) -> bool {
        self.touching[2]
    }

    pub fn any(&self) -> bool {
        self.touching.iter().any(|&t| t)
    }
}

/// Contact of one finger against an optional obstacle.
///
/// A joint is blocked when any segment distal to it lies within
/// `skin_offset`. The distal phalanx additionally senses contact through its
/// pad, `pad_thickness` further out.
pub fn contact_detect(
    config: &FingerConfig,
    joints: &JointState,
    obstacle: Option<&Obstacle>,
    skin_offset: f64,
    pad_thickness: f64,
) -> FingerContact {
    let mut out = FingerContact::default();
    let Some(obstacle) = obstacle else {
        return out;
    };
    let pts = joint_points(config, &joints.angles);
    let mut deepest = f64::NEG_INFINITY;
    for k in 0..3 {
        let seg = Segment::new(pts[k], pts[k + 1]);
        let (clearance, p) = obstacle.clearance(&seg);
        if clearance <= skin_offset {
            out.blocked = out.blocked.union(JointSet::up_to(Joint::from_index(k).unwrap()));
        }
        let zone = if k == 2 { skin_offset + pad_thickness } else { skin_offset };
        let depth = zone - clearance;
        if depth > 0.0 {
            out.touching[k] = true;
            if depth > deepest {
                deepest = depth;
                out.point = Some(p);
                out.penetration = depth;
            }
            if k == 2 {
                out.pad_penetration = depth.min(pad_thickness);
                out.pad_position = Some(p.distance(pts[2]));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    pub fingers: [FingerContact; FINGER_COUNT],
    pub fingertip_contact_count: usize,
}

/// Number of fingers whose distal phalanx is in contact.
pub fn count_fingertip_contacts(report: &ContactReport) -> usize {
    report.fingers.iter().filter(|c| c.distal()).count()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FingerState {
    pub joints: JointState,
    pub blocked: JointSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub time: f64,
    pub motors: MotorState,
    pub fingers: [FingerState; FINGER_COUNT],
    pub agonist: DifferentialState,
    pub antagonist: DifferentialState,
    pub contacts: ContactReport,
}

impl HandState {
    /// Fully open hand with encoders resting at their references.
    pub fn open(config: &HandConfig) -> Self {
        let sp = MotorSetpoints::new(config.agonist_reference, config.antagonist_reference);
        HandState {
            time: 0.0,
            motors: MotorState {
                agonist_encoder: sp.agonist,
                antagonist_encoder: sp.antagonist,
                setpoints: sp,
            },
            fingers: Default::default(),
            agonist: DifferentialState::default(),
            antagonist: DifferentialState::default(),
            contacts: ContactReport::default(),
        }
    }

    /// MCP, PIP, DIP of every finger in thumb-to-little order.
    pub fn joint_angles(&self) -> [f64; 3 * FINGER_COUNT] {
        let mut out = [0.0; 3 * FINGER_COUNT];
        for (i, f) in self.fingers.iter().enumerate() {
            out[3 * i..3 * i + 3].copy_from_slice(&f.joints.angles);
        }
        out
    }
}

fn slew(current: f64, target: f64, close_rate: f64, open_rate: f64, dt: f64) -> f64 {
    let delta = target - current;
    let max = if delta < 0.0 { close_rate } else { open_rate } * dt;
    if delta.abs() <= max {
        target
    } else {
        current + max * delta.signum()
    }
}

fn spool_of(encoder: f64, reference: f64, config: &HandConfig) -> f64 {
    (config.spool_gain * (reference - encoder)).max(0.0)
}

fn finger_command(
    cfg: &FingerConfig,
    state: &FingerState,
    agonist: f64,
    antagonist: f64,
) -> (TendonCommand, f64) {
    let cap = advance_capacity(cfg, &state.joints, antagonist, state.blocked);
    (TendonCommand::new(agonist.min(cap), antagonist), cap)
}

fn settle(
    cfg: &FingerConfig,
    state: &FingerState,
    agonist: f64,
    antagonist: f64,
    obstacle: Option<&Obstacle>,
    skin: f64,
    pad: f64,
) -> (FingerState, FingerContact) {
    let (cmd, _) = finger_command(cfg, state, agonist, antagonist);
    let joints = step_finger(cfg, &state.joints, cmd, state.blocked);
    let contact = contact_detect(cfg, &joints, obstacle, skin, pad);
    (FingerState { joints, blocked: contact.blocked }, contact)
}

fn gains_block(before: JointSet, after: JointSet) -> bool {
    after.iter().any(|j| !before.contains(j))
}

/// Marches one finger from spool values `from` to `to` in small sub-steps so
/// that contacts are caught where they begin rather than after the fact.
fn march_finger(
    cfg: &FingerConfig,
    start: FingerState,
    from: (f64, f64),
    to: (f64, f64),
    obstacle: Option<&Obstacle>,
    hand: &HandConfig,
    skin: f64,
) -> (FingerState, FingerContact) {
    let pad = hand.pad_thickness;
    let span = (to.0 - from.0).abs().max((to.1 - from.1).abs());
    let n = ((span / hand.contact_substep).ceil() as usize).max(1);
    let lerp = |t: f64| (from.0 + (to.0 - from.0) * t, from.1 + (to.1 - from.1) * t);

    let mut state = start;
    let mut contact = contact_detect(cfg, &state.joints, obstacle, skin, pad);
    for k in 1..=n {
        let t0 = (k - 1) as f64 / n as f64;
        let t1 = if k == n { 1.0 } else { k as f64 / n as f64 };
        let (ag, an) = lerp(t1);
        let (next, next_contact) = settle(cfg, &state, ag, an, obstacle, skin, pad);
        if !gains_block(state.blocked, next.blocked) {
            state = next;
            contact = next_contact;
            continue;
        }
        // locate the onset of the new contact, then finish the sub-step with
        // the enlarged blocked set
        let (mut lo, mut hi) = (t0, t1);
        let mut onset = (next, next_contact);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let (ag, an) = lerp(mid);
            let trial = settle(cfg, &state, ag, an, obstacle, skin, pad);
            if !gains_block(state.blocked, trial.0.blocked) {
                lo = mid;
            } else {
                hi = mid;
                onset = trial;
            }
        }
        let (s, _) = onset;
        let (fin, fin_contact) = settle(cfg, &s, ag, an, obstacle, skin, pad);
        state = fin;
        contact = fin_contact;
    }
    (state, contact)
}

/// Advances the hand by `dt`: encoders slew toward the setpoints, the spools
/// are split by the differentials, each finger is resolved against its
/// obstacle and the contact report is refreshed.
pub fn step_hand(
    config: &HandConfig,
    state: &HandState,
    setpoints: MotorSetpoints,
    objects: &ObjectShape,
    dt: f64,
) -> (HandState, ContactReport) {
    let sp = MotorSetpoints::new(config.clamp_encoder(setpoints.agonist), config.clamp_encoder(setpoints.antagonist));
    let m = &state.motors;
    let ag_enc = slew(m.agonist_encoder, sp.agonist, config.close_rate, config.open_rate, dt);
    let an_enc = slew(m.antagonist_encoder, sp.antagonist, config.close_rate, config.open_rate, dt);

    let s_ag = spool_of(ag_enc, config.agonist_reference, config);
    let s_an = spool_of(an_enc, config.antagonist_reference, config);

    let mut fingers = state.fingers;
    let mut report = ContactReport::default();
    let mut ag_limits = [0.0; FINGER_COUNT];
    for i in 0..FINGER_COUNT {
        let cfg = &config.fingers[i];
        let obstacle = objects.obstacles[i].as_ref();
        let from = (state.agonist.spool, state.antagonist.spool);
        let (fs, contact) = march_finger(cfg, state.fingers[i], from, (s_ag, s_an), obstacle, config, objects.skin_offset);
        fingers[i] = fs;
        report.fingers[i] = contact;
        ag_limits[i] = advance_capacity(cfg, &fs.joints, s_an, fs.blocked);
    }
    report.fingertip_contact_count = count_fingertip_contacts(&report);

    let next = HandState {
        time: state.time + dt,
        motors: MotorState {
            agonist_encoder: ag_enc,
            antagonist_encoder: an_enc,
            setpoints: sp,
        },
        fingers,
        agonist: distribute(s_ag, ag_limits),
        // extension is never obstructed, every antagonist takes the full slack
        antagonist: distribute(s_an, [f64::INFINITY; FINGER_COUNT]),
        contacts: report,
    };
    (next, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spool_map() {
        let mut c = HandConfig::default();
        assert_eq!(encoders_to_spool(700.0, 700.0, &c).unwrap(), 0.0);
        c.spool_gain = 0.1;
        assert!((encoders_to_spool(200.0, 700.0, &c).unwrap() - 50.0).abs() < 1e-12);
        assert!(encoders_to_spool(1500.0, 700.0, &c).is_err());
        assert!(encoders_to_spool(-1.0, 700.0, &c).is_err());
    }

    #[test]
    fn distribute_examples() {
        let d = distribute(10.0, [f64::INFINITY; 5]);
        assert_eq!(d.tendon, [10.0; 5]);
        assert_eq!(d.spring, [0.0; 5]);
        let d = distribute(10.0, [4.0, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY]);
        assert_eq!(d.tendon, [4.0, 10.0, 10.0, 10.0, 10.0]);
        assert_eq!(d.spring, [6.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.conservation_error(), 0.0);
    }

    #[test]
    fn no_object_no_contact() {
        let c = FingerConfig::default();
        let r = contact_detect(&c, &JointState::from_angles([0.5, 0.5, 0.5]), None, 1.0, 3.0);
        assert!(r.blocked.is_empty());
        assert!(!r.any());
    }

    #[test]
    fn proximal_contact_blocks_only_mcp() {
        let c = FingerConfig::default();
        // circle just above the proximal phalanx (0..45 on the x axis)
        let ob = Obstacle::circle(20.0, 10.5, 10.0);
        let r = contact_detect(&c, &JointState::rest(), Some(&ob), 1.0, 3.0);
        assert_eq!(r.blocked, JointSet::of(&[Joint::Mcp]));
        assert!(r.touching[0] && !r.touching[1] && !r.touching[2]);
        assert!((r.penetration - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pad_contact_is_sensed_before_blocking() {
        let c = FingerConfig::default();
        let ob = Obstacle::circle(100.0, 12.0, 10.0);
        let r = contact_detect(&c, &JointState::rest(), Some(&ob), 1.0, 3.0);
        assert!(r.blocked.is_empty());
        assert!(r.distal());
        assert!((r.pad_penetration - 2.0).abs() < 1e-12);
        assert!((r.pad_position.unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn polygon_contact() {
        let c = FingerConfig::default();
        let ob = Obstacle::Polygon {
            vertices: vec![Vec2::new(50.0, 0.5), Vec2::new(70.0, 0.5), Vec2::new(60.0, 20.0)],
        };
        assert!(ob.validate().is_ok());
        let r = contact_detect(&c, &JointState::rest(), Some(&ob), 1.0, 3.0);
        assert_eq!(r.blocked, JointSet::of(&[Joint::Mcp, Joint::Pip]));
    }

    #[test]
    fn count_contacts() {
        let mut rep = ContactReport::default();
        assert_eq!(count_fingertip_contacts(&rep), 0);
        for f in rep.fingers.iter_mut() {
            f.touching = [false, false, true];
        }
        assert_eq!(count_fingertip_contacts(&rep), 5);
        for f in rep.fingers.iter_mut().skip(2) {
            f.touching = [true, false, false];
        }
        assert_eq!(count_fingertip_contacts(&rep), 2);
    }

    #[test]
    fn holding_setpoints_changes_nothing() {
        let c = HandConfig::default();
        let s0 = HandState::open(&c);
        let (s1, _) = step_hand(&c, &s0, s0.motors.setpoints, &ObjectShape::none(), 0.02);
        assert_eq!(s1.motors, s0.motors);
        assert_eq!(s1.fingers, s0.fingers);
    }

    #[test]
    fn encoders_are_rate_limited() {
        let c = HandConfig::default();
        let mut s = HandState::open(&c);
        let dt = 0.02;
        for _ in 0..10 {
            let prev = s.motors;
            let (n, _) = step_hand(&c, &s, MotorSetpoints::new(200.0, 220.0), &ObjectShape::none(), dt);
            assert!((n.motors.agonist_encoder - prev.agonist_encoder).abs() <= c.close_rate * dt + 1e-9);
            assert!((n.motors.antagonist_encoder - prev.antagonist_encoder).abs() <= c.close_rate * dt + 1e-9);
            s = n;
        }
    }

    #[test]
    fn obstacle_validation() {
        assert!(Obstacle::circle(0.0, 0.0, 0.0).validate().is_err());
        let dart = Obstacle::Polygon {
            vertices: vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.0), Vec2::new(0.0, 2.0), Vec2::new(1.0, 1.0)],
        };
        assert!(dart.validate().is_err());
    }
}
