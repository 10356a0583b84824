//! Middleware for coupling heterogeneous functional-structural plant models
//! through a mediating exchange graph.

pub mod geometry;
pub mod graph;
pub mod math;
pub mod pipeline;
pub mod protocol;
pub mod scalar;
pub mod toy;
pub mod xeg;
pub mod xml;

pub use graph::{EdgeType, ExchangeGraph, GraphEdge, GraphError, GraphNode, NodeId, PropertyValue, TransformMode};
pub use scalar::Scalar;

/// Double precision affine transform, the one stored on graph nodes.
pub type Transform = math::AffineTransform<f64>;
pub type Transform32 = math::AffineTransform<f32>;
pub type Vec3d = math::Vec3<f64>;
pub type Mat4d = math::Mat4<f64>;
pub type TransformOpD = math::TransformOp<f64>;
