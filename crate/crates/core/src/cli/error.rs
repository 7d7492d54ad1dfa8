use std::fmt;

use crate::bench::BenchError;
use crate::castore::StoreError;
use crate::client::ClientError;
use crate::node::NodeError;
use crate::pipeline::PipelineError;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const BAD_INPUT: i32 = 3;
    pub const UNAVAILABLE: i32 = 4;
    pub const REJECTED: i32 = 5;
    pub const CONTRACT: i32 = 6;
    pub const UNAUTHORIZED: i32 = 7;
    pub const NOTHING_DUE: i32 = 8;
    pub const INTEGRITY: i32 = 9;
    pub const BUILD_FAILED: i32 = 10;
    pub const PORT_IN_USE: i32 = 11;
    pub const NOT_FOUND: i32 = 12;
}

/// A failed command: a stable code plus a human message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: String,
    pub message: String,
}

impl CliError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> CliError {
        CliError { code: code.into(), message: message.into() }
    }

    pub fn bad_input(message: impl Into<String>) -> CliError {
        CliError::new("BadInput", message)
    }

    /// A transaction that committed as invalid carries `Code: message`.
    pub fn from_invalid(error: &str) -> CliError {
        match error.split_once(": ") {
            Some((code, msg)) => CliError::new(code, msg),
            None => CliError::new(error, error),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.code.as_str() {
            "Usage" => exit::USAGE,
            "BadInput" | "BadConfig" | "BadArgs" | "InvalidAgreement" | "MalformedCid" | "Malformed" => exit::BAD_INPUT,
            "Unavailable" | "Timeout" | "SubmitFailure" => exit::UNAVAILABLE,
            "UnknownSubmitter" | "BadSignature" | "ReplayedNonce" | "QueueFull" => exit::REJECTED,
            "Unauthorized" | "WrongSide" => exit::UNAUTHORIZED,
            "NothingDue" => exit::NOTHING_DUE,
            "CorruptChain" | "ChainViolation" | "IntegrityFailure" | "DanglingRepoHead" => exit::INTEGRITY,
            "BuildFailed" => exit::BUILD_FAILED,
            "PortInUse" => exit::PORT_IN_USE,
            "NotFound" | "ProjectNotFound" | "BuildNotFound" => exit::NOT_FOUND,
            "Io" | "Internal" | "StoreFull" => exit::INTERNAL,
            _ => exit::CONTRACT,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> CliError {
        match e {
            ClientError::Remote { code, message } => CliError::new(code, message),
            other => CliError::new(other.code(), other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> CliError {
        match e {
            PipelineError::Invalid(detail) => CliError::from_invalid(&detail),
            PipelineError::SubmitFailure(c) => c.into(),
            other => CliError::new(other.code(), other.to_string()),
        }
    }
}

impl From<NodeError> for CliError {
    fn from(e: NodeError) -> CliError {
        CliError::new(e.code(), e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> CliError {
        CliError::new(e.code(), e.to_string())
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> CliError {
        match e {
            BenchError::Config(m) => CliError::new("BadConfig", m),
            BenchError::Node(n) => n.into(),
            BenchError::Setup(m) => CliError::new("Unavailable", m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::new("Io", e.to_string())
    }
}
