//! Object-part graphs from triangle meshes and a graph-attention classifier.
//!
//! The pipeline grows rotation- and scale-reproducible parts over a mesh
//! surface, canonicalizes each part into a fixed-size point set in a local
//! reference frame, links overlapping parts into a graph and classifies the
//! graph with a multi-head graph-attention network trained from scratch.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below pin the `f64` instantiation used by the command-line tool.

pub mod geom;
pub mod gradsuite;
pub mod nn;
pub mod mesh;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod train;
pub mod cli;
pub mod dataset;
pub mod features;
pub mod gnn;

pub use scalar::Real;

pub type Mesh = mesh::TriangleMesh<f64>;
pub type Part = sampler::Part<f64>;
pub type PartGraph = sampler::PartGraph<f64>;
pub type PartPointSet = features::PartPointSet<f64>;
pub type FeaturizedGraph = pipeline::FeaturizedGraph<f64>;
