use thiserror::Error;

use crate::flow::FlowError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate Frenet frame: curvature below floor at {degenerate} of {total} nodes")]
    DegenerateFrame { degenerate: usize, total: usize },

    #[error("self-intersection suspected: cumulative chord length not increasing at node {index}")]
    SelfIntersectionSuspected { index: usize },

    #[error("numerical blow-up: {0}")]
    BlowUp(String),

    #[error("flow depends explicitly on s or t; the wave-function solvers accept geometric flows only")]
    NonGeometricFlow,

    #[error(transparent)]
    Flow(#[from] FlowError),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
