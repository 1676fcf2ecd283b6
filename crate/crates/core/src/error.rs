use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::geo::NodeId;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("topology has no links")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("link {link_id}: {reason}")]
    Invariant { link_id: u64, reason: String },
    #[error("could not place a receiver inside the bounds after {attempts} attempts")]
    Placement { attempts: u32 },
    #[error("invalid generator argument: {0}")]
    Argument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("topology has no links")]
    EmptyTopology,
    #[error("unknown attach node {0}")]
    UnknownAttachNode(NodeId),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum AllocError {
    #[error("invalid radio parameters: {0}")]
    Params(String),
    #[error("allocation covers {found} links, topology has {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("link index {0} out of range")]
    UnknownLink(usize),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Anything an experiment run can fail with.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
