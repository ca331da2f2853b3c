use serde::Serialize;
use serde_json::{Map, Value};

use geoscale::{AudioError, ChartError, FormatError, GeometryError, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Io,
    Validation,
    Numerical,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Io => 2,
            Kind::Validation => 3,
            Kind::Numerical => 4,
        }
    }
}

/// Failure reported on stderr as `{kind, message, context}`.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
    pub context: Map<String, Value>,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into(), context: Map::new() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(Kind::Validation, message)
    }

    pub fn io(path: &std::path::Path, err: &std::io::Error) -> Self {
        Self::new(Kind::Io, err.to_string()).with("path", path.display().to_string())
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.context.insert(key.to_string(), value.into());
        self
    }
}

fn geometry_kind(e: &GeometryError) -> Kind {
    match e {
        GeometryError::NoValidNodes | GeometryError::LeftDomain { .. } => Kind::Numerical,
        _ => Kind::Validation,
    }
}

fn chart_kind(e: &ChartError) -> Kind {
    match e {
        ChartError::Geometry(g) => geometry_kind(g),
        ChartError::LeftDomain { .. } | ChartError::NoConvergence { .. } | ChartError::SelfTestFailed(_) => {
            Kind::Numerical
        }
        ChartError::DependentVectors { .. } | ChartError::TimeOutOfRange { .. } | ChartError::Invalid(_) => {
            Kind::Validation
        }
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        let kind = match &e {
            AudioError::Io { .. } => Kind::Io,
            AudioError::RankDeficient { .. } => Kind::Numerical,
            _ => Kind::Validation,
        };
        let err = Self::new(kind, e.to_string());
        match &e {
            AudioError::Io { path, .. } => err.with("path", path.clone()),
            _ => err,
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        Self::new(geometry_kind(&e), e.to_string())
    }
}

impl From<ChartError> for CliError {
    fn from(e: ChartError) -> Self {
        Self::new(chart_kind(&e), e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let kind = match &e {
            HarnessError::Geometry(g) => geometry_kind(g),
            HarnessError::Chart(c) => chart_kind(c),
            _ => Kind::Validation,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        let kind = match &e {
            FormatError::Io(_) => Kind::Io,
            _ => Kind::Validation,
        };
        Self::new(kind, e.to_string())
    }
}
