//! Scenario files: everything needed to reproduce a run.

use crate::HarnessError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use tendon_hand::controller::ControllerConfig;
use tendon_hand::finger::FingerType;
use tendon_hand::geometry::Vec2;
use tendon_hand::hand::{HandConfig, ObjectShape, Obstacle, FINGER_COUNT};
use tendon_hand::tactile::PipelineConfig;

/// Environment variable naming the directory that relative hand-config
/// references are resolved against.
pub const CONFIG_DIR_ENV: &str = "TENDON_HAND_CONFIG_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Setpoints follow the gesture (or the motor profile) with no tactile
    /// feedback.
    OpenLoop,
    /// Contact / slip state machine.
    Feedback,
    /// Gesture until first contact, then the deformation servo.
    Servo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureTrace {
    /// Traces stand in for camera-based hand capture.
    #[serde(default = "yes")]
    pub synthetic: bool,
    /// `(time s, mean closure angle deg)`, linearly interpolated.
    pub points: Vec<(f64, f64)>,
}

fn yes() -> bool {
    true
}

/// `(time s, agonist counts, antagonist counts)` knots, linearly
/// interpolated and held after the last knot.
pub type MotorProfile = Vec<(f64, f64, f64)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedProfile {
    pub name: String,
    pub knots: MotorProfile,
    /// Finger types the profile is not meant for; they are skipped.
    #[serde(default)]
    pub inapplicable: Vec<FingerType>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSet {
    pub name: String,
    pub objects: [Option<Obstacle>; FINGER_COUNT],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    /// Moves one finger's obstacle by `magnitude` mm along `direction`.
    IndenterMove,
    /// Moves the grasped object (every finger's obstacle) by `magnitude` mm.
    ObjectForce,
    /// Slides the sensed contact across the sensor image by `magnitude` px.
    InducedSlip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub time: f64,
    pub kind: DisturbanceKind,
    pub magnitude: f64,
    /// Finger index; defaults to the sensor finger for indenter moves and to
    /// all fingers for object forces.
    #[serde(default)]
    pub finger: Option<usize>,
    /// Spread over this many seconds; 0 applies in a single tick.
    #[serde(default)]
    pub duration: f64,
    /// Unit direction in the finger frame (mm) or in the image (px).
    #[serde(default = "unit_x")]
    pub direction: Vec2,
}

fn unit_x() -> Vec2 {
    Vec2::new(1.0, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    /// Path to a hand config JSON, relative to the config directory.
    #[serde(default)]
    pub hand_config: Option<String>,
    #[serde(default)]
    pub hand: Option<HandConfig>,
    #[serde(default)]
    pub controller: Option<ControllerConfig>,
    #[serde(default)]
    pub tactile: Option<PipelineConfig>,
    #[serde(default)]
    pub objects: [Option<Obstacle>; FINGER_COUNT],
    #[serde(default = "default_skin")]
    pub skin_offset: f64,
    #[serde(default = "default_mode")]
    pub control: ControlMode,
    #[serde(default)]
    pub gesture: Option<GestureTrace>,
    /// Gesture comes from a live session instead of a trace.
    #[serde(default)]
    pub live: bool,
    #[serde(default)]
    pub motor_profile: Option<MotorProfile>,
    #[serde(default)]
    pub profiles: Vec<NamedProfile>,
    #[serde(default)]
    pub object_sets: Vec<ObjectSet>,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sensor")]
    pub sensor_finger: usize,
    #[serde(default = "default_rate")]
    pub tick_rate: f64,
    /// Monte Carlo sample count for the workspace experiment.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_skin() -> f64 {
    1.0
}
fn default_mode() -> ControlMode {
    ControlMode::OpenLoop
}
fn default_sensor() -> usize {
    1
}
fn default_rate() -> f64 {
    50.0
}
fn default_samples() -> usize {
    10_000
}

impl Scenario {
    /// Minimal scenario: open hand, no objects.
    pub fn empty(duration: f64) -> Self {
        serde_json::from_value(serde_json::json!({ "duration": duration })).expect("static scenario")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| HarnessError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
        let mut s = Self::from_json(&text)?;
        if s.name.is_empty() {
            s.name = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Scenario(m));
        if !(self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.tick_rate > 0.0) {
            return bad("tick rate must be positive".into());
        }
        if self.sensor_finger >= FINGER_COUNT {
            return bad(format!("sensor finger {} out of range", self.sensor_finger));
        }
        if self.disturbances.windows(2).any(|w| w[1].time < w[0].time) {
            return bad("disturbances must be sorted by time".into());
        }
        for d in &self.disturbances {
            if d.finger.is_some_and(|f| f >= FINGER_COUNT) {
                return bad(format!("disturbance finger {:?} out of range", d.finger));
            }
            if !(d.duration >= 0.0) {
                return bad("disturbance duration must be non-negative".into());
            }
        }
        if let Some(g) = &self.gesture {
            if g.points.is_empty() || g.points.windows(2).any(|w| w[1].0 < w[0].0) {
                return bad("gesture trace must be non-empty and sorted by time".into());
            }
        }
        if let Some(p) = &self.motor_profile {
            check_profile(p).or_else(|m| bad(format!("motor profile: {m}")))?;
        }
        for p in &self.profiles {
            check_profile(&p.knots).or_else(|m| bad(format!("profile {}: {m}", p.name)))?;
        }
        self.object_shape().validate().map_err(|e| HarnessError::Scenario(e.to_string()))?;
        for set in &self.object_sets {
            for o in set.objects.iter().flatten() {
                o.validate().map_err(|e| HarnessError::Scenario(format!("{}: {e}", set.name)))?;
            }
        }
        if let Some(h) = &self.hand {
            h.validate().map_err(|e| HarnessError::Scenario(e.to_string()))?;
        }
        if let Some(c) = &self.controller {
            c.validate().map_err(|e| HarnessError::Scenario(e.to_string()))?;
        }
        Ok(())
    }

    pub fn object_shape(&self) -> ObjectShape {
        ObjectShape {
            obstacles: self.objects.clone(),
            skin_offset: self.skin_offset,
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate
    }

    pub fn ticks(&self) -> u64 {
        (self.duration * self.tick_rate).round() as u64
    }

    /// Inline hand config, else the referenced file, else defaults.
    pub fn resolve_hand(&self) -> Result<HandConfig, HarnessError> {
        if let Some(h) = &self.hand {
            return Ok(h.clone());
        }
        let Some(name) = &self.hand_config else {
            return Ok(HandConfig::default());
        };
        let path = config_dir().join(name);
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::Io(path.clone(), e))?;
        let cfg: HandConfig = serde_json::from_str(&text).map_err(|e| HarnessError::Scenario(e.to_string()))?;
        cfg.validate().map_err(|e| HarnessError::Scenario(e.to_string()))?;
        Ok(cfg)
    }

    pub fn gesture_at(&self, t: f64) -> Option<f64> {
        let g = self.gesture.as_ref()?;
        Some(interpolate(&g.points, t, |p| p.0, |p| p.1))
    }
}

fn check_profile(p: &MotorProfile) -> Result<(), String> {
    if p.is_empty() {
        return Err("no knots".into());
    }
    if p.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err("knots must be sorted by time".into());
    }
    Ok(())
}

/// Directory for relative config references: the environment variable if
/// set, else `./config`.
pub fn config_dir() -> PathBuf {
    std::env::var_os(CONFIG_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("config"))
}

/// Piecewise-linear interpolation over knots sorted by time, clamped at both
/// ends.
pub fn interpolate<T>(knots: &[T], t: f64, time: impl Fn(&T) -> f64, value: impl Fn(&T) -> f64) -> f64 {
    let first = &knots[0];
    if t <= time(first) {
        return value(first);
    }
    for w in knots.windows(2) {
        let (t0, t1) = (time(&w[0]), time(&w[1]));
        if t <= t1 {
            if t1 == t0 {
                return value(&w[1]);
            }
            let u = (t - t0) / (t1 - t0);
            return value(&w[0]) + (value(&w[1]) - value(&w[0])) * u;
        }
    }
    value(knots.last().unwrap())
}

pub fn profile_at(p: &MotorProfile, t: f64) -> (f64, f64) {
    (interpolate(p, t, |k| k.0, |k| k.1), interpolate(p, t, |k| k.0, |k| k.2))
}
