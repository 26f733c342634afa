//! Synthetic marker-pin fingertip sensor and its perception pipeline.

mod contact;
mod density;
mod doh;
mod frame;
mod pipeline;
mod preprocess;
mod sim;
mod ssim;

pub use contact::{
    contact_estimate, detect_slip, force_from_deformation, Calibration, ContactEstimate, SlipState,
    DEFAULT_CONTACT_FACTOR, DEFAULT_SLIP_THRESHOLD,
};
pub use density::{density_map, kernel_width, DensityGrid, GridSpec};
pub use doh::{detect_markers_doh, doh_response, DohParams, Marker, MarkerSet};
pub use frame::TactileFrame;
pub use pipeline::{FrameAnalysis, PipelineConfig, TactilePipeline};
pub use preprocess::{preprocess, BinaryImage, Rect, DEFAULT_THRESHOLD};
pub use sim::{
    displace_markers, indentation_from_contact, render_frame, ContactMapping, Falloff, Indentation, MarkerLayout,
};
pub use ssim::{deformation, ssim, SsimParams};
