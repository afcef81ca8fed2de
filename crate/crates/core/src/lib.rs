//! Computable fragments of the theory of ideals on countable sets.
//!
//! Subsets of ω (and of ω², {0,1}×ω, [ω]^n) are described intensionally by
//! [`sets::SetExpr`] and evaluated on finite windows or through closed-form
//! block counts. On top of that sit a three-valued membership oracle for a
//! catalog of definable ideals ([`ideal`]), combinatorial witness search
//! ([`detectors`]), exact density and submeasure evaluation ([`measures`]),
//! executable isomorphism and counterexample constructions ([`witnesses`]),
//! and ideal convergence tooling ([`convergence`]).

pub mod cli;
pub mod convergence;
pub mod detectors;
pub mod error;
pub mod ideal;
pub mod measures;
pub mod num;
pub mod sets;
pub mod witnesses;

pub use error::{Error, Result};
