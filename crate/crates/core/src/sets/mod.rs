//! Symbolic subsets of ω and of the other countable base spaces.

pub mod analysis;
pub mod eval;
pub mod expr;
pub mod injection;
pub mod schedule;
pub mod space;

pub use eval::{block_counts, fixed_points, Window, ENUMERATION_CAP};
pub use expr::{BlockRule, Coeff, CountFn, SetExpr};
pub use injection::{Evaluator, InjectionExpr};
pub use schedule::{kn, GridSchedule};
pub use space::{pair, unpair, BaseSpace, Point};
