//! Nearest-neighbor quantized control for multi-agent consensus and
//! distance-based formation control.
//!
//! Each agent can only apply one of a finite set of control vectors
//! ([`ActionSet`]). The desired continuous control is mapped to the nearest
//! available action, and the closed loop converges to a ball whose radius
//! is computed from the Voronoi cells of the zero actions.

pub mod actions;
pub mod control;
pub mod error;
pub mod graph;
pub mod montecarlo;
pub mod sim;
pub mod vecops;

pub use actions::{bound_oracle, satisfies_a1, voronoi_zero_bound, ActionSet, TriangleMeta};
pub use control::{
    consensus_bound, consensus_field, formation_bound, formation_bound_from_delta, formation_error,
    formation_field, quantize_field, relative_positions, spectral_ratio, FormationBound,
    FormationSpec, Layout, StackedVector,
};
pub use error::{Error, Result};
pub use graph::{Graph, GraphKind};
pub use montecarlo::{
    draw_initial_state, run_batch, run_batch_with_threads, sample_scenario, sample_seed, McConfig,
    McSummary, SampleRecord, Scenario, Spread,
};
pub use sim::{run, step_once, Mode, SimConfig, SlackCheck, Trajectory};
