use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimation pipeline, the simulation harness and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no samples")]
    EmptySamples,

    #[error("sample {index} = {value} lies outside [0, 1]; rescale first")]
    SampleOutOfRange { index: usize, value: f64 },

    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },

    #[error("degenerate samples: all values are equal")]
    DegenerateSamples,

    #[error("invalid basis spec: {0}")]
    InvalidSpec(String),

    #[error("{what} = {value} is not a power of two")]
    NotPowerOfTwo { what: &'static str, value: usize },

    #[error("level {level}: frequency {freq} is outside the Fourier grid (|l| <= {limit})")]
    BandOutsideGrid { level: u32, freq: i64, limit: i64 },

    #[error("ill-posed band at level {level}: |h_{freq}| = {modulus:e} is below the floor {floor:e}")]
    IllPosedBand {
        level: u32,
        freq: i64,
        modulus: f64,
        floor: f64,
    },

    #[error("imaginary residue {imag:e} on coefficient ({level}, {k}) with real part {real:e}")]
    ImaginaryResidue {
        level: u32,
        k: usize,
        real: f64,
        imag: f64,
    },

    #[error("grid size {grid} is smaller than the required {required}")]
    GridTooSmall { grid: usize, required: usize },

    #[error("deconvolution requires a noise model")]
    MissingNoiseModel,

    #[error("clipped estimate is identically zero; cannot renormalize")]
    AllZeroEstimate,

    #[error("oracle risk {0:e} is not strictly positive")]
    NonPositiveOracleRisk(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
