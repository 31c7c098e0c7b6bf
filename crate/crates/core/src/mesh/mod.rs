//! Multi-block structured meshes, neighbor resolution and transformation metrics.

mod block;
mod domain;
pub mod generate;
mod metrics;

pub use block::{BlockSpec, BoundarySpec, Orientation, Side};
pub use domain::{Block, BoundaryFace, Domain, FaceKind, Frame, Link, Neighbor, StencilPattern};
pub use metrics::{compute_metrics, FaceMetrics, PointMetrics, TransformMetrics};
