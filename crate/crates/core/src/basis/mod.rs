//! Basis of the `C²`-smooth discrete space with vanishing boundary data up
//! to second order.

pub mod checks;
pub mod edge;
pub mod function;
pub mod space;
pub mod vertex;

pub use checks::{boundary_residual, interface_jump};
pub use edge::{edge_basis, edge_function, EdgeBuilder};
pub use function::{FunctionKind, IsogeometricFunction, SparseGrid};
pub use space::{assemble_space, patch_basis, GlobalBasis};
pub use vertex::{vertex_system, VertexSystem};
