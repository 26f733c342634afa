//! CSV telemetry tables and run manifests.

use crate::scenario::Scenario;
use crate::world::TickRecord;
use crate::{HarnessError, VERSION};
use serde::{Deserialize, Serialize};
use std::path::Path;
use tendon_hand::hand::FINGER_NAMES;

/// Fixed-precision float formatting keeps tables byte-stable.
pub fn fmt(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub fn telemetry_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "tick",
        "t",
        "agonist_encoder",
        "antagonist_encoder",
        "agonist_setpoint",
        "antagonist_setpoint",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for f in FINGER_NAMES {
        for j in ["mcp", "pip", "dip"] {
            h.push(format!("{f}_{j}"));
        }
    }
    for f in FINGER_NAMES {
        h.push(format!("{f}_contact"));
    }
    h.extend(
        [
            "fingertip_contacts",
            "markers",
            "cx",
            "cy",
            "contact_area",
            "is_contact",
            "is_slip",
            "deformation",
            "force",
            "mode",
            "gesture",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

fn flag(b: bool) -> String {
    (b as u8).to_string()
}

pub fn telemetry_row(r: &TickRecord) -> Vec<String> {
    let mut row = vec![
        r.tick.to_string(),
        fmt(r.t),
        fmt(r.encoders.agonist),
        fmt(r.encoders.antagonist),
        fmt(r.setpoints.agonist),
        fmt(r.setpoints.antagonist),
    ];
    row.extend(r.joints.iter().map(|&a| fmt(a)));
    row.extend(r.contact.iter().map(|&c| flag(c)));
    let (cx, cy) = match r.center {
        Some(c) => (fmt(c.x), fmt(c.y)),
        None => (String::new(), String::new()),
    };
    row.extend([
        r.fingertip_contacts.to_string(),
        r.marker_count.to_string(),
        cx,
        cy,
        fmt(r.contact_area),
        flag(r.is_contact),
        flag(r.is_slip),
        fmt(r.deformation),
        fmt(r.force),
        r.mode.name().to_string(),
        fmt(r.gesture),
    ]);
    row
}

/// Serialises rows with a header into CSV bytes.
pub fn csv_bytes<I>(header: &[String], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn telemetry_csv(records: &[TickRecord]) -> Vec<u8> {
    csv_bytes(&telemetry_header(), records.iter().map(telemetry_row))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub rows: usize,
    /// The inputs only approximate a graphical source.
    #[serde(default)]
    pub approximate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub scenario: Scenario,
    pub artifacts: Vec<ArtifactEntry>,
    pub summary: serde_json::Value,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn new(experiment: &str, scenario: &Scenario) -> Self {
        Manifest {
            version: VERSION.to_string(),
            experiment: experiment.to_string(),
            seed: scenario.seed,
            scenario: scenario.clone(),
            artifacts: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Manifest(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| HarnessError::Io(path, e))
    }

    pub fn read(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::Io(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Manifest(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_zero_is_normalised() {
        assert_eq!(fmt(-0.0), "0.000000");
        assert_eq!(fmt(-1e-9), "0.000000");
        assert_eq!(fmt(1.5), "1.500000");
    }
}
