//! End-to-end analysis of sensor frames against a cached reference.

use super::contact::{contact_estimate, force_from_deformation, Calibration, ContactEstimate};
use super::contact::{DEFAULT_CONTACT_FACTOR, DEFAULT_SLIP_THRESHOLD};
use super::density::{density_map, kernel_width, DensityGrid, GridSpec};
use super::doh::{detect_markers_doh, DohParams, MarkerSet};
use super::frame::TactileFrame;
use super::preprocess::{preprocess, Rect, DEFAULT_THRESHOLD};
use super::sim::{displace_markers, indentation_from_contact, render_frame, ContactMapping, Indentation, MarkerLayout};
use super::ssim::deformation;
use crate::error::Result;
use crate::exec::Execution;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub layout: MarkerLayout,
    pub mapping: ContactMapping,
    /// `None` analyses the whole frame.
    pub crop: Option<Rect>,
    pub threshold: u8,
    pub doh: DohParams,
    pub grid: GridSpec,
    pub contact_factor: f64,
    pub slip_threshold: f64,
    pub calibration: Calibration,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            layout: MarkerLayout::default(),
            mapping: ContactMapping::default(),
            crop: None,
            threshold: DEFAULT_THRESHOLD,
            doh: DohParams::default(),
            grid: GridSpec::default(),
            contact_factor: DEFAULT_CONTACT_FACTOR,
            slip_threshold: DEFAULT_SLIP_THRESHOLD,
            calibration: Calibration::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameAnalysis {
    pub marker_count: usize,
    pub h: f64,
    pub density: DensityGrid,
    pub contact: ContactEstimate,
    pub deformation: f64,
    pub force: f64,
}

/// Holds the undeformed reference frame, its markers, the kernel width and
/// the baseline density. The kernel width is measured once on the reference
/// and reused for every frame so densities stay comparable.
#[derive(Clone, Debug)]
pub struct TactilePipeline {
    pub config: PipelineConfig,
    pub exec: Execution,
    reference: TactileFrame,
    reference_markers: MarkerSet,
    h: f64,
    baseline: DensityGrid,
    rest: FrameAnalysis,
}

impl TactilePipeline {
    pub fn new(config: PipelineConfig, exec: Execution) -> Result<Self> {
        config.layout.validate()?;
        config.calibration.validate()?;
        let reference = render_frame(&config.layout.positions, &config.layout, exec);
        let crop = config.crop.unwrap_or(Rect::full(&reference));
        let binary = preprocess(&reference, crop, config.threshold)?;
        let reference_markers = detect_markers_doh(&binary, &config.doh, exec);
        let positions = reference_markers.positions();
        let h = kernel_width(&positions)?;
        let baseline = density_map(&positions, h, &config.grid, exec)?;
        let rest = FrameAnalysis {
            marker_count: reference_markers.len(),
            h,
            density: baseline.clone(),
            contact: ContactEstimate::NONE,
            deformation: 0.0,
            force: 0.0,
        };
        Ok(TactilePipeline {
            config,
            exec,
            reference,
            reference_markers,
            h,
            baseline,
            rest,
        })
    }

    pub fn reference(&self) -> &TactileFrame {
        &self.reference
    }

    pub fn reference_markers(&self) -> &MarkerSet {
        &self.reference_markers
    }

    pub fn kernel_width(&self) -> f64 {
        self.h
    }

    pub fn baseline(&self) -> &DensityGrid {
        &self.baseline
    }

    pub fn render(&self, ind: &Indentation) -> TactileFrame {
        let moved = displace_markers(&self.config.layout.positions, ind);
        render_frame(&moved, &self.config.layout, self.exec)
    }

    pub fn detect(&self, frame: &TactileFrame) -> Result<MarkerSet> {
        let crop = self.config.crop.unwrap_or(Rect::full(frame));
        let binary = preprocess(frame, crop, self.config.threshold)?;
        Ok(detect_markers_doh(&binary, &self.config.doh, self.exec))
    }

    pub fn analyze(&self, frame: &TactileFrame) -> Result<FrameAnalysis> {
        let markers = self.detect(frame)?;
        let density = density_map(&markers.positions(), self.h, &self.config.grid, self.exec)?;
        let contact = contact_estimate(&density, &self.baseline, self.config.contact_factor)?;
        let d = deformation(frame, &self.reference, self.exec)?;
        Ok(FrameAnalysis {
            marker_count: markers.len(),
            h: self.h,
            density,
            contact,
            deformation: d,
            force: force_from_deformation(d, &self.config.calibration),
        })
    }

    /// Renders and analyses the frame for a pad compression (mm) at
    /// `pad_position` (mm from the DIP joint). An uncompressed pad images
    /// exactly the reference, so the cached rest analysis is returned.
    pub fn observe(&self, penetration: f64, pad_position: f64) -> Result<(TactileFrame, FrameAnalysis)> {
        let ind = indentation_from_contact(penetration, pad_position, &self.config.mapping);
        if ind.depth <= 0.0 {
            return Ok((self.reference.clone(), self.rest.clone()));
        }
        let frame = self.render(&ind);
        let analysis = self.analyze(&frame)?;
        Ok((frame, analysis))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_frame_matches_cache() {
        let p = TactilePipeline::new(PipelineConfig::default(), Execution::default()).unwrap();
        assert_eq!(p.reference_markers().len(), 61);
        let fresh = p.analyze(p.reference()).unwrap();
        let (_, cached) = p.observe(0.0, 22.0).unwrap();
        assert_eq!(fresh, cached);
    }
}
