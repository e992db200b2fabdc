//! Crystal property regression on quotient complexes of periodic graphs.
//!
//! The pipeline reads a crystal structure ([`structio`]), builds its
//! k-nearest-neighbor periodic graph ([`periodic`]), lifts that graph to a
//! two-dimensional quotient complex ([`qcomplex`]), computes per-simplex
//! input features ([`featurize`]) and runs a simplicial transformer over the
//! complex ([`sformer`]). [`trainer`] fits and evaluates models and
//! [`homlab`] checks homology preservation under vertex collapsing.

pub mod cli;
pub mod elements;
pub mod featurize;
pub mod homlab;
pub mod periodic;
pub mod qcomplex;
pub mod sformer;
pub mod structio;
pub mod tape;
pub mod trainer;
