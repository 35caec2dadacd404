use thiserror::Error;

use crate::Vec2;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("degenerate edge: endpoints coincide at ({}, {})", .at.x, .at.y)]
    DegenerateEdge { at: Vec2 },

    #[error("degenerate interval [{a}, {b}]")]
    DegenerateInterval { a: f64, b: f64 },

    #[error("singular nodal system at node {node} ({}, {}): det={det:e}", .position.x, .position.y)]
    SingularSystem { node: usize, position: Vec2, det: f64 },

    #[error("tangled mesh: cell {cell} has area {area:e}{}", stage_suffix(*.stage))]
    Tangled {
        cell: usize,
        area: f64,
        stage: Option<usize>,
    },

    #[error("time step collapsed to {dt:e} at t={t}")]
    TimeStepCollapse { dt: f64, t: f64 },

    #[error("step limit of {limit} reached before t_final")]
    Runaway { limit: u64 },

    #[error("convergence order undefined: error entry {index} is zero")]
    OrderUndefined { index: usize },

    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("resolution {resolution}: {source}")]
    AtResolution {
        resolution: usize,
        #[source]
        source: Box<Error>,
    },
}

fn stage_suffix(stage: Option<usize>) -> String {
    match stage {
        Some(s) => format!(" at RK stage {s}"),
        None => String::new(),
    }
}

impl Error {
    /// Short stable identifier for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::DegenerateEdge { .. } => "degenerate_edge",
            Error::DegenerateInterval { .. } => "degenerate_interval",
            Error::SingularSystem { .. } => "singular_system",
            Error::Tangled { .. } => "tangled",
            Error::TimeStepCollapse { .. } => "time_step_collapse",
            Error::Runaway { .. } => "runaway",
            Error::OrderUndefined { .. } => "order_undefined",
            Error::TopologyMismatch(_) => "topology_mismatch",
            Error::ContractViolation(_) => "contract_violation",
            Error::Io(_) => "io",
            Error::AtResolution { source, .. } => source.kind(),
        }
    }
}
