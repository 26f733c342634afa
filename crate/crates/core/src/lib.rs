//! Quasi-static simulation and control of a dual-tendon (agonist/antagonist)
//! underactuated hand with synthetic vision-based tactile fingertips.
//!
//! The crate is organised bottom-up:
//!
//! * [`finger`] - planar three-joint finger kinematics and the tendon
//!   resolution rule for A, D and P antagonist terminations.
//! * [`hand`] - five fingers, two motors and two spring differentials,
//!   per-finger planar obstacles and contact detection.
//! * [`tactile`] - marker-field fingertip image synthesis and the tactile
//!   perception pipeline (threshold, DoH markers, kernel density contact map,
//!   slip, SSIM deformation).
//! * [`controller`] - gesture mapping, PID loops, the contact/slip state
//!   machine and the deformation servo.
//!
//! Data-parallel loops go through [`Execution`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod controller;
pub mod error;
pub mod exec;
pub mod finger;
pub mod geometry;
pub mod hand;
pub mod tactile;

pub use error::{Error, Result};
pub use exec::Execution;
