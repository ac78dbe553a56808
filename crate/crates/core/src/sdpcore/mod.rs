//! Block SDP solver, SDPA sparse I/O and the spectrahedron feasibility probe.

mod hsd;
mod probe;
mod problem;
mod sdpa;

pub use hsd::{recompute, solve};
pub use probe::{feasibility_probe, ProbeResult};
pub use problem::{Block, BlockSparse, Entry, Residuals, SdpProblem, SdpSolution, Sense, SolverOptions, Status};
pub use sdpa::{export_sdpa, parse_sdpa};
