//! Open linear systems with memory, their minimal conservative extensions,
//! and the coupled / decoupled / frozen structure of such extensions.
//!
//! A conservative system is a Hermitian frequency operator
//! `Ω = [[Ω₁, Γ], [Γ†, Ω₂]]` on `H₁ ⊕ H₂`. Eliminating the hidden half `H₂`
//! yields an open system on `H₁` with friction kernel `a(t) = Γe^{−iΩ₂t}Γ†`.
//! Point spectral measures `a(t) = Σ_k e^{−iω_k t}N_k` go the other way,
//! through [`extension::minimal_extension`].
//!
//! Module overview:
//! - [`numerics`]: eigen/singular decompositions and subspace calculus
//! - [`model`]: systems, measures, validation
//! - [`extension`]: kernels, minimal extensions, dissipation, fitting
//! - [`decomposition`]: orbits, coupled parts, strings, multiplicity bounds
//! - [`coupling`]: channels, coupling matrices, canonical decomposition
//! - [`hamiltonian`]: oscillator and lattice models, frozen subspaces
//! - [`simulate`]: conservative and open time propagation
//! - [`schema`]: JSON and CSV encodings

pub mod coupling;
pub mod decomposition;
pub mod error;
pub mod extension;
pub mod hamiltonian;
pub mod model;
pub mod numerics;
pub mod random;
pub mod report;
pub mod schema;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{Atom, ConservativeSystem, OpenSystem, PointMeasure};
pub use numerics::{CMatrix, CVector, HermitianOperator, Subspace, ToleranceConfig, C64};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
