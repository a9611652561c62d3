use std::fmt::Display;
use std::io;
use std::path::Path;

use rightsize_core::{AnalysisError, BenchError, OptimizeError, PricingError, SpaceError, SurrogateError};
use serde::Serialize;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_MISSING_FILE: u8 = 3;
pub const EXIT_DOMAIN: u8 = 4;

/// Error record printed on stderr as one JSON object.
#[derive(Debug, Serialize)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Display) -> Self {
        Failure {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.to_string(),
        }
    }

    pub fn domain(message: impl Display) -> Self {
        Failure {
            code: EXIT_DOMAIN,
            kind: "domain",
            message: message.to_string(),
        }
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        if err.kind() == io::ErrorKind::NotFound {
            Failure {
                code: EXIT_MISSING_FILE,
                kind: "missing_file",
                message: format!("{}: {err}", path.display()),
            }
        } else {
            Failure {
                code: EXIT_DOMAIN,
                kind: "io",
                message: format!("{}: {err}", path.display()),
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("failure record serializes")
    }
}

macro_rules! domain_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::domain(e)
            }
        })*
    };
}

domain_errors!(AnalysisError, BenchError, OptimizeError, PricingError, SpaceError, SurrogateError, serde_json::Error);
