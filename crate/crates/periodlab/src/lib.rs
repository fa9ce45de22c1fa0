//! Period integrals and the structures around them: naïve periods over
//! semi-algebraic regions, multiple polylogarithms and hyperlogarithms with
//! explicit branch bookkeeping, exact de Rham reductions, period matrices,
//! triple coproducts, monodromy and limit mixed Hodge structures, and
//! elliptic-curve periods.

pub mod error;
pub mod exact;
pub mod hodge;
pub mod derham;
pub mod elliptic;
pub mod numerics;
pub mod periods;
pub mod polylog;
pub mod semialg;

pub use error::{PeriodError, Result};
pub use numerics::{ComplexValue, Path, QuadratureConfig, Segment};
