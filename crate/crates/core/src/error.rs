use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("joint {joint} angle {angle} rad outside [0, {max}]")]
    JointLimit { joint: usize, angle: f64, max: f64 },

    #[error("encoder value {value} outside range [{min}, {max}]")]
    EncoderRange { value: f64, min: f64, max: f64 },

    #[error("crop rectangle is empty or lies outside the {width}x{height} frame")]
    EmptyCrop { width: usize, height: usize },

    #[error("at least {needed} markers required, got {got}")]
    TooFewMarkers { needed: usize, got: usize },

    #[error("image sizes differ: {a:?} vs {b:?}")]
    SizeMismatch { a: (usize, usize), b: (usize, usize) },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed PGM: {0}")]
    Pgm(String),
}
