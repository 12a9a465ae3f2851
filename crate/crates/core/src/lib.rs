//! Thermodynamic-formalism toolkit for representations of free groups and the
//! genus-2 surface group into `SL_d(R)`.
//!
//! The pipeline runs bottom-up:
//!
//! * [`words`] enumerates conjugacy classes as canonical cyclic words,
//! * [`matnum`] supplies the small dense eigenvalue machinery,
//! * [`reps`] builds Schottky, Fuchsian and symmetric-power representations
//!   together with analytic one-parameter paths,
//! * [`lengths`] turns a representation into a marked length spectrum,
//! * [`thermo`] estimates entropy, pressure, intersection numbers and the
//!   pressure form from those spectra,
//! * [`suite`] bundles the verification battery used by the CLI.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod lengths;
pub mod matnum;
pub mod reps;
pub mod report;
pub mod suite;
pub mod thermo;
pub mod words;

pub use lengths::{LengthError, LengthKind, MarkedSpectrum, NecklaceSet};
pub use matnum::{EigenData, MatError, Matrix};
pub use reps::{RepError, RepPath, Representation};
pub use thermo::{ThermoError, ThermoEstimate};
pub use words::{Generator, GroupSpec, Necklace, Word, WordError};
