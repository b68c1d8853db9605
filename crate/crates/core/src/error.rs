use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed point cloud: {0} bytes is not a multiple of 16")]
    MalformedCloud(usize),
    #[error("non-finite value in point {point}")]
    NonFiniteValue { point: usize },
    #[error("reflectance {value} of point {point} is outside [0, 1]")]
    ReflectanceOutOfRange { point: usize, value: f32 },
    #[error("malformed label on line {line}: {reason}")]
    MalformedLabel { line: usize, reason: String },
    #[error("calibration entry `{0}` is missing")]
    MissingCalibEntry(String),
    #[error("malformed calibration: {0}")]
    MalformedCalib(String),
    #[error("calibration matrix is singular")]
    SingularCalibration,
    #[error("DontCare annotations do not describe a physical box")]
    NotAPhysicalBox,
    #[error("invalid box: {0}")]
    BadBox(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("invalid weights: {0}")]
    BadWeights(String),
    #[error("grid coordinate {coord:?} outside grid of shape {shape:?}")]
    CoordOutOfGrid { coord: Vec<usize>, shape: Vec<usize> },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sin-encoded angle residual {0} is outside [-1, 1]")]
    OutOfRangeAngle(f64),
    #[error("frame sets differ: {0}")]
    FrameSetMismatch(String),
    #[error("malformed dump: {0}")]
    MalformedDump(String),
}
