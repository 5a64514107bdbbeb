//! Static grid model, bus-assignment state and DC power flow.

mod dynamics;
mod flow;
mod graph;
mod spec;
mod topology;

pub use dynamics::{apply_overload_dynamics, check_game_over, FailureCause, OverloadParams};
pub use flow::{solve_dc_power_flow, PowerFlowResult};
pub use graph::{build_electrical_graph, Edge, ElectricalGraph, Injections, NodeKey};
pub use spec::{Element, GeneratorSpec, GridFile, GridSpec, LineSpec, LoadSpec, Substation, GRID_SCHEMA_VERSION};
pub use topology::{Bus, Topology};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("grid file schema: {0}")]
    Schema(String),
    #[error("reading {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("substation {substation} has {expected} elements, configuration has {got}")]
    ConfigLength { substation: usize, expected: usize, got: usize },
}

/// Text of the bundled five-substation grid.
pub const CASE5_TOML: &str = include_str!("case5.toml");

/// The bundled five-substation grid: 8 lines, 2 generators, 3 loads.
///
/// Generators sit at substations 0 and 1, loads at 2, 3 and 4. Substations
/// 0, 2 and 3 have more than three elements. Limits come from
/// `examples/calibrate.rs`.
pub fn case5() -> GridSpec {
    GridSpec::parse(CASE5_TOML).expect("bundled grid is valid")
}
