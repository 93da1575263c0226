//! Bilinear multi-patch domains.

pub mod geometry;
pub mod symmetry;
pub mod topology;

pub use geometry::{geometry_jet, signed_jet, BilinearPatch, GeometryJet, Point};
pub use symmetry::SquareSymmetry;
pub use topology::{
    build_topology, load_domain, parse_domain, EdgeRef, FanEntry, Interface, InterfaceSide,
    MultiPatchDomain, Vertex,
};
