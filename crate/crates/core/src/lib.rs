//! Generalized inverses of dense complex matrices, *-DMP decisions, and
//! executable checks of additive and block-matrix *-DMP results.

pub mod additive;
pub mod blockmat;
pub mod error;
pub mod gen;
pub mod geninv;
pub mod matcore;
pub mod verdict;

pub use error::{Error, Result};
pub use matcore::{CMatrix, Tolerance, C64};
pub use verdict::{TheoremId, TheoremVerdict};
