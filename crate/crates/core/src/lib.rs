//! Numerical Morse homology and flow currents on catalog manifolds.
//!
//! Starting from a closed-form scalar field on a compact manifold (an implicit
//! hypersurface or a flat quotient of Euclidean space), this crate locates the
//! critical points, integrates the uphill gradient flow, enumerates connecting
//! orbits with orientation signs, assembles the integer Morse complex, and
//! computes integral / mod-p / twisted homology through Smith normal form.
//! On top of the combinatorial layer it evaluates residues of differential
//! forms over unstable manifolds, the degree minus-one homotopy operator `T`,
//! and numerically verifies the chain-homotopy identity `d∘T + T∘d = I − P`,
//! Poincaré duality and the intersection pairing.
//!
//! The crate's `examples/` directory contains one runnable program per
//! capability; the `morseflow` binary drives the same pipeline from a TOML
//! config file.

pub mod catalog;
pub mod cli;
pub mod complex;
pub mod connections;
pub mod critical;
pub mod currents;
pub mod expr;
pub mod flow;
pub mod geometry;

pub use complex::{CoefficientMode, HomologyResult, LocalSystem, MorseComplex};
pub use connections::{ConnectionData, FlowLine};
pub use critical::{CriticalPoint, CriticalSet, SeedSpec};
pub use currents::{CurrentSum, ResidueVector};
pub use expr::{FormExpression, JetValue, ScalarExpression};
pub use flow::{Direction, FlowKind, FlowSpec, Trajectory};
pub use geometry::{DeckWord, ManifoldBackend, TangentFrame};
