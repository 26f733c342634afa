//! Single-finger model: a planar three-link chain (MCP, PIP, DIP) driven by an
//! agonist tendon that spans every joint and an antagonist tendon whose
//! termination decides which joints it covers.
//!
//! Motion is resolved quasi-statically. The agonist displacement is a budget of
//! total flexion (`r * sum(theta)`) that joints absorb in flexion-priority
//! order. Covered joints may not flex past the slack the antagonist has
//! released (`r * sum_covered(theta) <= antagonist`); whatever budget is left
//! flexes the uncovered joints against their elastic bands. The allocation is
//! a pure function of the commands and the per-joint caps, so any command
//! history that ends at the same commands (and caps) ends in the same pose.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Slack on joint-limit checks so that values produced by the resolver
/// (sums and differences of limits) are not rejected for rounding.
const LIMIT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Joint {
    Mcp = 0,
    Pip = 1,
    Dip = 2,
}

impl Joint {
    pub const ALL: [Joint; 3] = [Joint::Mcp, Joint::Pip, Joint::Dip];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Joint> {
        Joint::ALL.get(i).copied()
    }
}

/// Small bitset over the three joints of a finger.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointSet(u8);

impl JointSet {
    pub const EMPTY: JointSet = JointSet(0);

    pub fn all() -> Self {
        JointSet(0b111)
    }

    pub fn of(joints: &[Joint]) -> Self {
        let mut s = JointSet::EMPTY;
        for &j in joints {
            s.insert(j);
        }
        s
    }

    /// Joints `MCP..=j`, i.e. every joint proximal to and including `j`.
    pub fn up_to(j: Joint) -> Self {
        JointSet((1u8 << (j.index() + 1)) - 1)
    }

    pub fn insert(&mut self, j: Joint) {
        self.0 |= 1 << j.index();
    }

    pub fn contains(self, j: Joint) -> bool {
        self.0 & (1 << j.index()) != 0
    }

    pub fn union(self, o: JointSet) -> JointSet {
        JointSet(self.0 | o.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Joint> {
        Joint::ALL.into_iter().filter(move |&j| self.contains(j))
    }
}

/// Where the antagonist tendon terminates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FingerType {
    /// Terminates at the fingertip: covers every joint.
    A,
    /// Terminates at the first middle phalanx: covers MCP and PIP.
    D,
    /// Terminates at the second middle phalanx: covers MCP only.
    P,
}

impl FingerType {
    pub const ALL: [FingerType; 3] = [FingerType::A, FingerType::D, FingerType::P];

    pub fn covered(self) -> JointSet {
        match self {
            FingerType::A => JointSet::all(),
            FingerType::D => JointSet::of(&[Joint::Mcp, Joint::Pip]),
            FingerType::P => JointSet::of(&[Joint::Mcp]),
        }
    }

    pub fn covers(self, j: Joint) -> bool {
        self.covered().contains(j)
    }

    pub fn name(self) -> &'static str {
        match self {
            FingerType::A => "A",
            FingerType::D => "D",
            FingerType::P => "P",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingerConfig {
    /// Proximal, middle and distal link lengths in mm.
    pub link_lengths: [f64; 3],
    /// Tendon pulley radius in mm, shared by every joint.
    pub pulley_radius: f64,
    /// Upper flexion limit per joint in rad; the lower limit is 0.
    pub joint_limits: [f64; 3],
    pub finger_type: FingerType,
    /// Elastic band stiffness in N*mm/rad. Only read for joints the
    /// antagonist does not cover.
    pub band_stiffness: [f64; 3],
    /// Antagonist motor stall torque in N*mm.
    pub stall_torque: f64,
    pub flexion_priority: [Joint; 3],
}

impl FingerConfig {
    pub fn new(finger_type: FingerType) -> Self {
        let mut band_stiffness = [0.0; 3];
        for j in Joint::ALL {
            if !finger_type.covers(j) {
                band_stiffness[j.index()] = 20.0;
            }
        }
        FingerConfig {
            link_lengths: [45.0, 35.0, 35.0],
            pulley_radius: 5.0,
            joint_limits: [FRAC_PI_2; 3],
            finger_type,
            band_stiffness,
            stall_torque: 600.0,
            flexion_priority: [Joint::Mcp, Joint::Pip, Joint::Dip],
        }
    }

    pub fn total_length(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    /// Total flexion the finger can reach, expressed as tendon travel (mm).
    pub fn full_flexion_travel(&self) -> f64 {
        self.pulley_radius * self.joint_limits.iter().sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.pulley_radius > 0.0) {
            return bad("pulley radius must be positive");
        }
        if self.link_lengths.iter().any(|&l| !(l > 0.0)) {
            return bad("link lengths must be positive");
        }
        if self
            .joint_limits
            .iter()
            .any(|&m| !(m > 0.0 && m <= std::f64::consts::PI))
        {
            return bad("joint limits must lie in (0, pi]");
        }
        if self.band_stiffness.iter().any(|&k| !(k >= 0.0)) {
            return bad("band stiffness must be non-negative");
        }
        if !(self.stall_torque > 0.0) {
            return bad("stall torque must be positive");
        }
        let mut seen = JointSet::EMPTY;
        for j in self.flexion_priority {
            seen.insert(j);
        }
        if seen != JointSet::all() {
            return bad("flexion priority must list each joint once");
        }
        Ok(())
    }
}

impl Default for FingerConfig {
    fn default() -> Self {
        FingerConfig::new(FingerType::D)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    /// MCP, PIP, DIP flexion in rad.
    pub angles: [f64; 3],
    /// Elastic band extension (rad) of joints outside the antagonist's reach.
    pub band_extension: [f64; 3],
}

impl JointState {
    pub fn rest() -> Self {
        JointState::default()
    }

    pub fn from_angles(angles: [f64; 3]) -> Self {
        JointState {
            angles,
            band_extension: [0.0; 3],
        }
    }

    pub fn mcp(&self) -> f64 {
        self.angles[0]
    }

    pub fn pip(&self) -> f64 {
        self.angles[1]
    }

    pub fn dip(&self) -> f64 {
        self.angles[2]
    }

    /// Whole-finger rotation: the sum of the three joint angles.
    pub fn total(&self) -> f64 {
        self.angles[0] + self.angles[1] + self.angles[2]
    }

    pub fn check_limits(&self, config: &FingerConfig) -> Result<()> {
        for (j, (&a, &max)) in self.angles.iter().zip(&config.joint_limits).enumerate() {
            if !(a >= -LIMIT_EPS && a <= max + LIMIT_EPS) {
                return Err(Error::JointLimit { joint: j, angle: a, max });
            }
        }
        Ok(())
    }
}

/// Tendon displacements since the fully extended reference, both >= 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TendonCommand {
    /// Agonist travel pulled in (mm).
    pub agonist: f64,
    /// Antagonist slack released (mm).
    pub antagonist: f64,
}

impl TendonCommand {
    pub fn new(agonist: f64, antagonist: f64) -> Self {
        TendonCommand { agonist, antagonist }
    }

    pub fn synchronized(travel: f64) -> Self {
        TendonCommand::new(travel, travel)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingertipPose {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl FingertipPose {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Base, PIP, DIP and tip positions for the given angles. No limit checks.
pub fn joint_points(config: &FingerConfig, angles: &[f64; 3]) -> [Vec2; 4] {
    let mut pts = [Vec2::ZERO; 4];
    let mut heading = 0.0;
    for k in 0..3 {
        heading += angles[k];
        pts[k + 1] = pts[k] + Vec2::from_angle(heading) * config.link_lengths[k];
    }
    pts
}

/// Fingertip pose of the planar chain; base at the origin, extended along +x,
/// flexion rotates towards +y.
pub fn forward_kinematics(config: &FingerConfig, joints: &JointState) -> Result<FingertipPose> {
    joints.check_limits(config)?;
    let tip = joint_points(config, &joints.angles)[3];
    Ok(FingertipPose {
        x: tip.x,
        y: tip.y,
        phi: joints.total(),
    })
}

/// Analytic Jacobian d(x, y)/d(theta_m, theta_p, theta_d).
pub fn fingertip_jacobian(config: &FingerConfig, angles: &[f64; 3]) -> [[f64; 3]; 2] {
    let l = config.link_lengths;
    let h = [angles[0], angles[0] + angles[1], angles[0] + angles[1] + angles[2]];
    let mut jac = [[0.0; 3]; 2];
    for col in 0..3 {
        for k in col..3 {
            jac[0][col] -= l[k] * h[k].sin();
            jac[1][col] += l[k] * h[k].cos();
        }
    }
    jac
}

/// Agonist travel implied by a pose: `r * (theta_m + theta_p + theta_d)`.
pub fn agonist_length(config: &FingerConfig, joints: &JointState) -> f64 {
    config.pulley_radius * joints.total()
}

/// Antagonist travel implied by a pose: `r` times the covered joint angles.
pub fn antagonist_length(config: &FingerConfig, joints: &JointState) -> f64 {
    let covered = config.finger_type.covered();
    config.pulley_radius
        * Joint::ALL
            .iter()
            .filter(|&&j| covered.contains(j))
            .map(|j| joints.angles[j.index()])
            .sum::<f64>()
}

/// Per-joint flexion ceiling: the joint limit, or the current angle when the
/// joint is blocked by contact (blocked joints may still extend).
pub fn joint_caps(config: &FingerConfig, state: &JointState, blocked: JointSet) -> [f64; 3] {
    let mut caps = config.joint_limits;
    for j in blocked.iter() {
        let i = j.index();
        caps[i] = caps[i].min(state.angles[i].max(0.0));
    }
    caps
}

fn allocate(config: &FingerConfig, caps: &[f64; 3], budget: f64, covered_limit: Option<f64>) -> [f64; 3] {
    let covered = config.finger_type.covered();
    let mut angles = [0.0; 3];
    let mut remaining = budget.max(0.0);
    let mut covered_remaining = covered_limit.map_or(f64::INFINITY, |c| c.max(0.0));
    for &j in config.flexion_priority.iter().filter(|&&j| covered.contains(j)) {
        let v = caps[j.index()].min(remaining).min(covered_remaining).max(0.0);
        angles[j.index()] = v;
        remaining -= v;
        covered_remaining -= v;
    }
    for &j in config.flexion_priority.iter().filter(|&&j| !covered.contains(j)) {
        let v = caps[j.index()].min(remaining).max(0.0);
        angles[j.index()] = v;
        remaining -= v;
    }
    angles
}

/// Torque the band-loaded agonist applies to every covered joint.
fn band_tension_torque(config: &FingerConfig, angles: &[f64; 3]) -> f64 {
    let covered = config.finger_type.covered();
    Joint::ALL
        .iter()
        .filter(|&&j| !covered.contains(j))
        .map(|j| config.band_stiffness[j.index()] * angles[j.index()])
        .fold(0.0, f64::max)
}

fn resolve(config: &FingerConfig, caps: &[f64; 3], cmd: TendonCommand) -> [f64; 3] {
    let r = config.pulley_radius;
    let budget = cmd.agonist.max(0.0) / r;
    let slack = cmd.antagonist.max(0.0) / r;
    let angles = allocate(config, caps, budget, Some(slack));
    if band_tension_torque(config, &angles) > config.stall_torque {
        // antagonist motor is back-driven: the slack constraint gives way
        allocate(config, caps, budget, None)
    } else {
        angles
    }
}

/// Advances one finger to the quasi-static pose for `cmd`.
///
/// Negative displacements are treated as zero. Joints in `blocked` may not
/// flex beyond their current angle.
pub fn step_finger(config: &FingerConfig, state: &JointState, cmd: TendonCommand, blocked: JointSet) -> JointState {
    let caps = joint_caps(config, state, blocked);
    let angles = resolve(config, &caps, cmd);
    let covered = config.finger_type.covered();
    let mut band_extension = [0.0; 3];
    for j in Joint::ALL {
        if !covered.contains(j) {
            band_extension[j.index()] = angles[j.index()];
        }
    }
    JointState { angles, band_extension }
}

/// Largest agonist travel (mm) the finger can absorb for the given antagonist
/// slack and blocking, starting from `state`.
pub fn advance_capacity(config: &FingerConfig, state: &JointState, antagonist: f64, blocked: JointSet) -> f64 {
    let caps = joint_caps(config, state, blocked);
    let angles = resolve(config, &caps, TendonCommand::new(f64::MAX, antagonist));
    config.pulley_radius * angles.iter().sum::<f64>()
}

/// Bounds for random actuator commands (mm of tendon travel).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandRange {
    pub max_agonist: f64,
    pub max_antagonist: f64,
}

impl CommandRange {
    /// Enough travel on both tendons to reach full flexion.
    pub fn full(config: &FingerConfig) -> Self {
        let t = config.full_flexion_travel();
        CommandRange {
            max_agonist: t,
            max_antagonist: t,
        }
    }
}

/// Monte Carlo fingertip workspace: `n` uniformly random command pairs within
/// `range`, each applied from rest. Deterministic for a given seed regardless
/// of the execution mode.
pub fn workspace_sample(config: &FingerConfig, range: CommandRange, n: usize, seed: u64, exec: Execution) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let commands: Vec<TendonCommand> = (0..n)
        .map(|_| {
            let a: f64 = rng.gen();
            let b: f64 = rng.gen();
            TendonCommand::new(a * range.max_agonist, b * range.max_antagonist)
        })
        .collect();
    let rest = JointState::rest();
    exec.map_slice(&commands, |&cmd| {
        let s = step_finger(config, &rest, cmd, JointSet::EMPTY);
        joint_points(config, &s.angles)[3]
    })
}
