//! Jump costs, entropies and energy experiments for anisotropic
//! Aviles–Giga type functionals with a strictly convex planar norm.

pub mod boundary;
pub mod costs;
pub mod entropy;
pub mod error;
pub mod field;
pub mod norm;
pub mod numerics;
pub mod profile;
pub mod vec2;

pub use boundary::{BoundaryParam, BoundaryPoint, InvariantReport};
pub use costs::{CostReport, JumpPair};
pub use entropy::{EntropyFn, ExtendedEntropy};
pub use field::{FieldSpec, GridField, GridSpec};
pub use error::{Error, Result};
pub use profile::{Profile, TailFit};
pub use norm::{NormConfig, NormSpec};
pub use vec2::Vec2;
