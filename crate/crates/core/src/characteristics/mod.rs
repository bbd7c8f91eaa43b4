//! Characteristic curves `dξ/dt = -S_t(ξ)`, stopped at `Im ξ = η/2`, the
//! covering lattice `D̃`, preimages `ξ_T(w) = z` and the fluctuation events
//! along trajectories.

mod driver;
mod events;
mod grid;
mod integrate;
mod preimage;

pub use driver::{ConstantDrift, Drift, SpectralPath};
pub use events::{track_flow_events, EventOptions, FlowEvents, PointDiagnostics};
pub use grid::{build_grid, mesh_radius, sup_abs_stieltjes, upsilon, GridPoint, GridSpec};
pub use integrate::{
    integrate_characteristic, CharacteristicTrajectory, FlowOptions, IntegrationError, SiteResolvents, TrajectorySample,
};
pub use preimage::{find_preimage, flow_endpoint, subordination_check, Preimage, SubordinationCheck};
