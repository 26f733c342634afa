//! Experiment reproduction: finger gestures, workspace, whole-hand gestures,
//! shape adaptivity and the three closed-loop studies.

use crate::scenario::{profile_at, ControlMode, MotorProfile, NamedProfile, Scenario};
use crate::telemetry::{csv_bytes, fmt, telemetry_csv, ArtifactEntry, Manifest};
use crate::world::{pipeline_for, TickRecord, World};
use crate::HarnessError;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use tendon_hand::controller::Mode;
use tendon_hand::finger::{
    step_finger, workspace_sample, CommandRange, FingerConfig, FingerType, JointSet, JointState, TendonCommand,
};
use tendon_hand::geometry::convex_hull_area;
use tendon_hand::hand::FINGER_NAMES;
use tendon_hand::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    /// Finger joint angles under three tendon input profiles per finger type.
    A1,
    /// Monte Carlo fingertip workspace per finger type.
    Workspace,
    /// Whole-hand gesture traces.
    B1,
    /// Fingertip contact counts across object shapes.
    C,
    /// Deformation servo under indenter pushes and pulls.
    D1,
    /// Grasp state machine under a scripted operator trace.
    D2,
    /// The same disturbance with and without tactile feedback.
    D3,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::A1,
        Experiment::Workspace,
        Experiment::B1,
        Experiment::C,
        Experiment::D1,
        Experiment::D2,
        Experiment::D3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::A1 => "A1",
            Experiment::Workspace => "workspace",
            Experiment::B1 => "B1",
            Experiment::C => "C",
            Experiment::D1 => "D1",
            Experiment::D2 => "D2",
            Experiment::D3 => "D3",
        }
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| HarnessError::UnknownExperiment(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub file: String,
    pub bytes: Vec<u8>,
    pub rows: usize,
    pub approximate: bool,
}

impl Artifact {
    fn table(file: &str, bytes: Vec<u8>, rows: usize) -> Self {
        Artifact {
            file: file.to_string(),
            bytes,
            rows,
            approximate: false,
        }
    }

    fn telemetry(file: &str, records: &[TickRecord]) -> Self {
        Artifact::table(file, telemetry_csv(records), records.len())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub artifacts: Vec<Artifact>,
    pub summary: serde_json::Value,
}

/// Runs an experiment in memory.
pub fn execute(exp: Experiment, scenario: &Scenario, exec: Execution) -> Result<ExperimentOutput, HarnessError> {
    scenario.validate()?;
    match exp {
        Experiment::A1 => a1(scenario),
        Experiment::Workspace => workspace(scenario, exec),
        Experiment::B1 => b1(scenario, exec),
        Experiment::C => shape_adaptivity(scenario, exec),
        Experiment::D1 => closed_loop(scenario, exec, "d1.csv"),
        Experiment::D2 => closed_loop(scenario, exec, "d2.csv"),
        Experiment::D3 => d3(scenario, exec),
    }
}

/// Runs an experiment and writes its tables and manifest into `out`.
pub fn run_experiment(
    exp: Experiment,
    scenario: &Scenario,
    out: &Path,
    exec: Execution,
) -> Result<Vec<PathBuf>, HarnessError> {
    let result = execute(exp, scenario, exec)?;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::Io(out.to_path_buf(), e))?;
    let mut manifest = Manifest::new(exp.name(), scenario);
    let mut paths = Vec::new();
    for a in &result.artifacts {
        let path = out.join(&a.file);
        std::fs::write(&path, &a.bytes).map_err(|e| HarnessError::Io(path.clone(), e))?;
        manifest.artifacts.push(ArtifactEntry {
            file: a.file.clone(),
            rows: a.rows,
            approximate: a.approximate,
        });
        paths.push(path);
    }
    manifest.summary = result.summary;
    manifest.write(out)?;
    paths.push(out.join(crate::telemetry::MANIFEST_FILE));
    Ok(paths)
}

const A1_TYPES: [FingerType; 3] = [FingerType::A, FingerType::D, FingerType::P];

/// Tendon input profiles (mm of travel) shaped after the published plots:
/// agonist alone, a small synchronised flexion followed by an agonist drive,
/// and synchronised travel.
pub fn default_a1_profiles(cfg: &FingerConfig) -> Vec<NamedProfile> {
    let t = cfg.full_flexion_travel();
    let dip = cfg.pulley_radius * cfg.joint_limits[2];
    let not_a = vec![FingerType::A];
    vec![
        NamedProfile {
            name: "input 1".into(),
            knots: vec![(0.0, 0.0, 0.0), (2.0, dip, 0.0), (3.0, dip, 0.0)],
            inapplicable: not_a.clone(),
        },
        NamedProfile {
            name: "input 2".into(),
            knots: vec![(0.0, 0.0, 0.0), (1.0, 0.25 * t, 0.25 * t), (2.0, 0.25 * t + dip, 0.25 * t), (3.0, 0.25 * t + dip, 0.25 * t)],
            inapplicable: not_a,
        },
        NamedProfile {
            name: "input 3".into(),
            knots: vec![(0.0, 0.0, 0.0), (2.0, t, t), (3.0, t, t)],
            inapplicable: vec![],
        },
    ]
}

/// Joint angles of a free finger following a tendon profile, sampled at
/// `dt`. Rows are `(t, agonist, antagonist, angles)`.
pub fn follow_profile(cfg: &FingerConfig, knots: &MotorProfile, dt: f64) -> Vec<(f64, f64, f64, [f64; 3])> {
    let end = knots.last().map_or(0.0, |k| k.0);
    let n = (end / dt).round() as usize;
    let mut state = JointState::rest();
    (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            let (ag, an) = profile_at(knots, t);
            state = step_finger(cfg, &state, TendonCommand::new(ag, an), JointSet::EMPTY);
            (t, ag, an, state.angles)
        })
        .collect()
}

fn a1(scenario: &Scenario) -> Result<ExperimentOutput, HarnessError> {
    let header: Vec<String> = ["finger_type", "profile", "t", "agonist", "antagonist", "mcp", "pip", "dip"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for ty in A1_TYPES {
        let cfg = FingerConfig::new(ty);
        let profiles = if scenario.profiles.is_empty() {
            default_a1_profiles(&cfg)
        } else {
            scenario.profiles.clone()
        };
        for p in profiles {
            if p.inapplicable.contains(&ty) {
                skipped.push(json!({ "finger_type": ty.name(), "profile": p.name }));
                continue;
            }
            for (t, ag, an, q) in follow_profile(&cfg, &p.knots, scenario.dt()) {
                rows.push(vec![
                    ty.name().to_string(),
                    p.name.clone(),
                    fmt(t),
                    fmt(ag),
                    fmt(an),
                    fmt(q[0]),
                    fmt(q[1]),
                    fmt(q[2]),
                ]);
            }
        }
    }
    let n = rows.len();
    let mut art = Artifact::table("a1.csv", csv_bytes(&header, rows), n);
    art.approximate = true;
    Ok(ExperimentOutput {
        artifacts: vec![art],
        summary: json!({ "inapplicable": skipped }),
    })
}

fn workspace(scenario: &Scenario, exec: Execution) -> Result<ExperimentOutput, HarnessError> {
    let header = vec!["x".to_string(), "y".to_string()];
    let mut artifacts = Vec::new();
    let mut areas = serde_json::Map::new();
    for ty in A1_TYPES {
        let cfg = FingerConfig::new(ty);
        let pts = workspace_sample(&cfg, CommandRange::full(&cfg), scenario.samples, scenario.seed, exec);
        areas.insert(ty.name().to_string(), json!(convex_hull_area(&pts)));
        let rows = pts.iter().map(|p| vec![fmt(p.x), fmt(p.y)]);
        artifacts.push(Artifact::table(
            &format!("workspace_{}.csv", ty.name()),
            csv_bytes(&header, rows),
            pts.len(),
        ));
    }
    Ok(ExperimentOutput {
        artifacts,
        summary: json!({ "hull_area": areas }),
    })
}

fn b1(scenario: &Scenario, exec: Execution) -> Result<ExperimentOutput, HarnessError> {
    let records = World::new(scenario, exec)?.run()?;
    let mut art = Artifact::telemetry("b1.csv", &records);
    art.approximate = true;
    Ok(ExperimentOutput {
        artifacts: vec![art],
        summary: json!({ "ticks": records.len() }),
    })
}

fn shape_adaptivity(scenario: &Scenario, exec: Execution) -> Result<ExperimentOutput, HarnessError> {
    if scenario.object_sets.is_empty() {
        return Err(HarnessError::Scenario("experiment C needs object sets".into()));
    }
    let pipeline = pipeline_for(scenario, exec)?;
    let mut header = vec!["object".to_string(), "fingertip_contacts".to_string()];
    header.extend(FINGER_NAMES.iter().map(|f| f.to_string()));
    let mut rows = Vec::new();
    let mut counts = serde_json::Map::new();
    for set in &scenario.object_sets {
        let mut s = scenario.clone();
        s.objects = set.objects.clone();
        let records = World::with_pipeline(&s, pipeline.clone())?.run()?;
        let last = records.last().expect("positive duration");
        counts.insert(set.name.clone(), json!(last.fingertip_contacts));
        let mut row = vec![set.name.clone(), last.fingertip_contacts.to_string()];
        row.extend(last.contact.iter().map(|&c| (c as u8).to_string()));
        rows.push(row);
    }
    let n = rows.len();
    Ok(ExperimentOutput {
        artifacts: vec![Artifact::table("c_contacts.csv", csv_bytes(&header, rows), n)],
        summary: json!({ "fingertip_contacts": counts }),
    })
}

/// Modes in order of appearance with consecutive repeats removed.
pub fn mode_sequence(records: &[TickRecord]) -> Vec<Mode> {
    let mut out: Vec<Mode> = Vec::new();
    for r in records {
        if out.last() != Some(&r.mode) {
            out.push(r.mode);
        }
    }
    out
}

fn closed_loop(scenario: &Scenario, exec: Execution, file: &str) -> Result<ExperimentOutput, HarnessError> {
    let records = World::new(scenario, exec)?.run()?;
    let last = records.last().expect("positive duration");
    let modes: Vec<&str> = mode_sequence(&records).iter().map(|m| m.name()).collect();
    Ok(ExperimentOutput {
        artifacts: vec![Artifact::telemetry(file, &records)],
        summary: json!({
            "modes": modes,
            "final_deformation": last.deformation,
            "final_force": last.force,
            "final_fingertip_contacts": last.fingertip_contacts,
        }),
    })
}

fn d3(scenario: &Scenario, exec: Execution) -> Result<ExperimentOutput, HarnessError> {
    let pipeline = pipeline_for(scenario, exec)?;
    let sensor = scenario.sensor_finger;
    let mut artifacts = Vec::new();
    let mut summary = serde_json::Map::new();
    for (mode, file) in [(ControlMode::OpenLoop, "d3_open_loop.csv"), (ControlMode::Feedback, "d3_feedback.csv")] {
        let mut s = scenario.clone();
        s.control = mode;
        let records = World::with_pipeline(&s, pipeline.clone())?.run()?;
        let last = records.last().expect("positive duration");
        summary.insert(
            file.trim_end_matches(".csv").to_string(),
            json!({
                "final_fingertip_contacts": last.fingertip_contacts,
                "sensor_contact": last.contact[sensor],
            }),
        );
        artifacts.push(Artifact::telemetry(file, &records));
    }
    Ok(ExperimentOutput {
        artifacts,
        summary: serde_json::Value::Object(summary),
    })
}
