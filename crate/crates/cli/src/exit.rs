//! Exit-code taxonomy.

use std::fmt;

use patchregen::backend::BackendError;
use patchregen::eval::EvalError;
use patchregen::patch::PatchError;
use patchregen::{DefenseError, ImageError};
use serde::{Deserialize, Serialize};

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorClass {
    /// Anything not covered below.
    Internal,
    /// Bad flags or configuration.
    Usage,
    /// Missing, unreadable or undecodable inputs; unwritable outputs.
    Input,
    /// The inpainter failed or could not be reached.
    Backend,
    /// Annotation or detection files violate their schema.
    Schema,
}

impl ErrorClass {
    pub fn code(self) -> i32 {
        match self {
            ErrorClass::Internal => 1,
            ErrorClass::Usage => 2,
            ErrorClass::Input => 3,
            ErrorClass::Backend => 4,
            ErrorClass::Schema => 5,
        }
    }
}

/// An error that already knows its class.
#[derive(Debug)]
pub struct Failure {
    pub class: ErrorClass,
    pub message: String,
}

impl Failure {
    pub fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

fn defense_class(e: &DefenseError) -> ErrorClass {
    match e {
        DefenseError::Backend(_) => ErrorClass::Backend,
        DefenseError::Image(_) => ErrorClass::Input,
        DefenseError::Config(_) | DefenseError::Grid(_) => ErrorClass::Usage,
        DefenseError::Cluster(_) => ErrorClass::Internal,
    }
}

/// Class of the first recognised error in the cause chain.
pub fn classify(err: &anyhow::Error) -> ErrorClass {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.class;
        }
        if let Some(e) = cause.downcast_ref::<DefenseError>() {
            return defense_class(e);
        }
        if cause.is::<BackendError>() {
            return ErrorClass::Backend;
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            return match e {
                EvalError::Io { .. } => ErrorClass::Input,
                _ => ErrorClass::Schema,
            };
        }
        if cause.is::<ImageError>() || cause.is::<PatchError>() || cause.is::<std::io::Error>() {
            return ErrorClass::Input;
        }
        if cause.is::<toml::de::Error>() {
            return ErrorClass::Usage;
        }
    }
    ErrorClass::Internal
}
