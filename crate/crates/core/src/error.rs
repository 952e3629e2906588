use std::io;

use thiserror::Error;

use crate::ply::PlyError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input geometry cannot support the requested computation
    /// (too few points, collinear pairs, empty lists).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A single keypoint has an unusable neighborhood. Batch drivers record
    /// this and move on.
    #[error("degenerate keypoint: {0}")]
    DegenerateKeypoint(String),

    #[error("no support point contributed to the feature")]
    EmptyFeature,

    #[error("degenerate output: {0}")]
    DegenerateOutput(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("registration failed: {0}")]
    RegistrationFailure(String),

    #[error(transparent)]
    Ply(#[from] PlyError),

    #[error("feature file: {0}")]
    FeatureFile(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateInput(_)
                | Error::DegenerateKeypoint(_)
                | Error::EmptyFeature
                | Error::DegenerateOutput(_)
                | Error::UnsupportedInput(_)
                | Error::RegistrationFailure(_)
        )
    }
}
