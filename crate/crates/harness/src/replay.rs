//! Re-simulates a run from its manifest and compares an artifact byte for
//! byte.

use crate::experiments::{execute, Experiment};
use crate::telemetry::Manifest;
use crate::{HarnessError, VERSION};
use serde::Serialize;
use std::path::Path;
use tendon_hand::Execution;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Divergence {
    /// 1-based data row, header excluded; 0 means the header differs.
    pub row: usize,
    /// Value of the first column of that row, usually the tick.
    pub tick: Option<String>,
    pub expected: Option<String>,
    pub found: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplayReport {
    pub file: String,
    pub experiment: String,
    pub rows: usize,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.divergence.is_none()
    }
}

/// First line at which two CSV tables differ.
pub fn first_divergence(expected: &[u8], found: &[u8]) -> Option<Divergence> {
    if expected == found {
        return None;
    }
    let e: Vec<&[u8]> = expected.split(|&b| b == b'\n').collect();
    let f: Vec<&[u8]> = found.split(|&b| b == b'\n').collect();
    let n = e.len().max(f.len());
    let text = |l: Option<&&[u8]>| l.map(|l| String::from_utf8_lossy(l).into_owned());
    (0..n).find(|&i| e.get(i) != f.get(i)).map(|i| {
        let expected = text(e.get(i));
        let found = text(f.get(i));
        let tick = expected
            .as_deref()
            .or(found.as_deref())
            .and_then(|l| l.split(',').next())
            .map(str::to_string);
        Divergence {
            row: i,
            tick: if i == 0 { None } else { tick },
            expected,
            found,
        }
    })
}

/// Replays the run that produced `telemetry`, using the manifest in the same
/// directory.
pub fn replay(telemetry: &Path, exec: Execution) -> Result<ReplayReport, HarnessError> {
    let dir = telemetry.parent().unwrap_or(Path::new("."));
    let manifest = Manifest::read(dir)?;
    if manifest.version != VERSION {
        return Err(HarnessError::VersionMismatch {
            found: manifest.version,
            expected: VERSION.to_string(),
        });
    }
    let file = telemetry
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .ok_or_else(|| HarnessError::Manifest(format!("{} is not a file", telemetry.display())))?;
    if !manifest.artifacts.iter().any(|a| a.file == file) {
        return Err(HarnessError::Manifest(format!("{file} is not listed in the manifest")));
    }
    let found = std::fs::read(telemetry).map_err(|e| HarnessError::Io(telemetry.to_path_buf(), e))?;
    let exp: Experiment = manifest.experiment.parse()?;
    let out = execute(exp, &manifest.scenario, exec)?;
    let expected = out
        .artifacts
        .into_iter()
        .find(|a| a.file == file)
        .ok_or_else(|| HarnessError::Manifest(format!("re-run did not produce {file}")))?;
    Ok(ReplayReport {
        file,
        experiment: manifest.experiment,
        rows: expected.rows,
        divergence: first_divergence(&expected.bytes, &found),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_row() {
        let a = b"tick,x\n1,0.5\n2,0.7\n";
        let b = b"tick,x\n1,0.5\n2,0.8\n";
        let d = first_divergence(a, b).unwrap();
        assert_eq!(d.row, 2);
        assert_eq!(d.tick.as_deref(), Some("2"));
        assert!(first_divergence(a, a).is_none());
        assert_eq!(first_divergence(a, b"tick,y\n").unwrap().row, 0);
    }
}
