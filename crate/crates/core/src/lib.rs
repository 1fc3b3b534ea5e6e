//! Probabilistic logic programs compiled to arithmetic circuits.
//!
//! The pipeline is: [`parser`] → [`grounder`] (relevant ground program) →
//! [`cnf`] (weighted CNF) → [`compiler`] (d-DNNF) → [`circuit`]
//! (evaluation, marginals, MPE). [`engine`] wires the stages together,
//! [`learner`] estimates fact probabilities from interpretations, and
//! [`oracle`] answers the same questions by enumerating possible worlds.

pub mod ast;
pub mod circuit;
pub mod cnf;
pub mod compiler;
pub mod engine;
pub mod error;
pub mod grounder;
pub mod learner;
pub mod metrics;
pub mod models;
pub mod numfmt;
pub mod oracle;
pub mod parser;

pub use ast::{Atom, Literal, PartialInterpretation, ProbLabel, Program, Rule, Term};
pub use error::{Category, Error, Result};
