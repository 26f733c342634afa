use super::density::DensityGrid;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use serde::{Deserialize, Serialize};

/// Contact is declared where density falls below this fraction of the
/// reference density.
pub const DEFAULT_CONTACT_FACTOR: f64 = 0.6;

/// Contact-centre travel (px per frame) above which a contact is slipping.
pub const DEFAULT_SLIP_THRESHOLD: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactEstimate {
    pub is_contact: bool,
    /// Density minimum in image pixels; `None` without contact.
    pub center: Option<Vec2>,
    /// Area (px^2) of the cells below `factor` times their reference value.
    pub contact_area: f64,
}

impl ContactEstimate {
    pub const NONE: ContactEstimate = ContactEstimate {
        is_contact: false,
        center: None,
        contact_area: 0.0,
    };
}

pub fn contact_estimate(density: &DensityGrid, baseline: &DensityGrid, factor: f64) -> Result<ContactEstimate> {
    if density.spec != baseline.spec || density.values.len() != baseline.values.len() {
        return Err(Error::SizeMismatch {
            a: (density.spec.nx, density.spec.ny),
            b: (baseline.spec.nx, baseline.spec.ny),
        });
    }
    let cells = density
        .values
        .iter()
        .zip(&baseline.values)
        .filter(|(d, b)| **d < factor * **b)
        .count();
    let contact_area = cells as f64 * density.spec.step * density.spec.step;
    let is_contact = density.min() < factor * baseline.min();
    let center = if is_contact {
        density.argmin().map(|(i, j)| density.spec.point(i, j))
    } else {
        None
    };
    Ok(ContactEstimate {
        is_contact,
        center,
        contact_area,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlipState {
    pub is_contact: bool,
    pub is_slip: bool,
    pub last_center: Option<Vec2>,
    /// Centre travel since the previous frame (0 unless both frames touch).
    pub displacement: f64,
}

pub fn detect_slip(prev: &SlipState, estimate: &ContactEstimate, threshold: f64) -> SlipState {
    let center = if estimate.is_contact { estimate.center } else { None };
    let displacement = match (prev.is_contact, prev.last_center, center) {
        (true, Some(a), Some(b)) => a.distance(b),
        _ => 0.0,
    };
    SlipState {
        is_contact: estimate.is_contact,
        is_slip: estimate.is_contact && prev.is_contact && displacement > threshold,
        last_center: center,
        displacement,
    }
}

/// Linear deformation-to-force calibration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// N per unit deformation.
    pub force_slope: f64,
    pub deformation_target: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            force_slope: 40.0,
            deformation_target: 0.05,
        }
    }
}

impl Calibration {
    pub fn validate(&self) -> Result<()> {
        if !(self.force_slope > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "force slope must be positive, got {}",
                self.force_slope
            )));
        }
        if !(0.0..=1.0).contains(&self.deformation_target) {
            return Err(Error::InvalidConfig("deformation target outside [0, 1]".into()));
        }
        Ok(())
    }
}

pub fn force_from_deformation(d: f64, cal: &Calibration) -> f64 {
    cal.force_slope * d
}
