//! Tail probabilities of aggregate catastrophe losses.
//!
//! An Event Loss Table (ELT) lists catastrophe events with Poisson arrival
//! rates and single-occurrence loss distributions. Over a horizon of `t`
//! years the total loss `S_t` is a compound Poisson random variable. This
//! crate bounds `Pr(S_t >= s)` from above (Markov, Cantelli, Moment,
//! Chernoff) and estimates it (Monte Carlo with Jeffreys intervals, Panjer
//! recursion on compressed tables).
//!
//! ```
//! use elt_tail::{bounds, elt};
//!
//! let table = elt::parse_elt("EventID,Rate,Loss\n1,1.0,1\n".as_bytes()).unwrap();
//! let model = elt::to_compound_model(&table, 1.0).unwrap();
//! let m = bounds::moment_bound(&model, 4.0, None).unwrap();
//! assert_eq!(m.k, 6);
//! assert!(m.value < bounds::markov_bound(&model, 4.0));
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod curve;
pub mod elt;
pub mod error;
pub mod exact;
pub mod severity;
pub mod special;
pub mod synth;

pub use curve::{Diagnostic, ExceedanceCurve, Method};
pub use elt::{CompoundModel, EltRow, EventLossTable};
pub use error::{Error, Result};
pub use severity::SeverityDistribution;
