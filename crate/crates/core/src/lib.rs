//! Finitary growth-group laboratory.
//!
//! The crate treats a finitely generated group as a computational object: a
//! backend that multiplies elements exactly, a marked generating set, and
//! breadth-first Cayley balls with exact word norms. On top of that sit
//! constructive subgroup-generation certificates, a discrete harmonic
//! calculus with an almost-harmonic function builder, Gram-volume dimension
//! probes for spaces of such functions, approximate translation
//! representations, and the periodicity-versus-growth dichotomy for integer
//! lattice automorphisms. Everything either verifies exhaustively at the
//! scale it ran or reports the measured quantity; nothing silently assumes
//! an asymptotic bound.

pub mod approxrep;
pub mod backend;
pub mod ball;
pub mod config;
pub mod error;
pub mod function;
pub mod growth;
pub mod harmonic;
pub mod intlin;
pub mod key;
pub mod kleiner;
pub mod marked;
pub mod milnor;
pub mod poly;
pub mod subgroup;
pub mod walk;

pub use backend::{Element, GroupBackend};
pub use ball::{enumerate_ball, word_norm, Ball};
pub use error::{Error, Result};
pub use growth::{growth_degree_estimate, growth_sequence, GrowthDegreeEstimate, GrowthSequence};
pub use intlin::IntMatrix;
pub use marked::MarkedGroup;
