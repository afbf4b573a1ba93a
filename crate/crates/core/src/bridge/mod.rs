//! Mixed-time stochastic bridges: the discretized Onsager–Machlup path
//! measure with `x` pinned at the initial time and `y` at the final time.

pub mod action;
pub mod gaussian;
pub mod io;
pub mod mpp;
pub mod path;
pub mod sampler;

pub use action::{om_action, om_action_range, om_gradient_path};
pub use gaussian::{gaussian_bridge_exact, GaussianBridge};
pub use mpp::{minimize_action, most_probable_path, NewtonOptions};
pub use path::{BridgeBoundary, DiscretePath, FreeLayout, Slot};
pub use sampler::{sample_bridges, BridgeEnsemble, SamplerConfig};

/// Default number of time steps per bridge interval.
pub const DEFAULT_STEPS: usize = 128;
