use alloc::string::String;

use crate::policy::ArmId;
use crate::Period;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("link unreachable: zero transmission rate")]
    UnreachableLink,
    #[error("no compute resource allocated")]
    NoResource,
    #[error("sequencing error: {0}")]
    Sequencing(String),
    #[error("empty candidate set at period {0}")]
    EmptyCandidates(Period),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precision error: {0}")]
    Precision(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("unknown arm {0}")]
    UnknownArm(ArmId),
}
