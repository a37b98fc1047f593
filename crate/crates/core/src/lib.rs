//! Personalized, context-aware hook placement over a mini-framework corpus.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! 1. [`corpus`]: parse the `.mfw` source language.
//! 2. [`classifier`]: featurize methods and train an RBF-kernel SVM with SMO
//!    to discover the potential method set (PMS) of sensor data access and
//!    sensor control methods.
//! 3. [`callgraph`] and [`oal`]: build the call graph, gather keywords
//!    bottom-up over its SCC condensation and map methods to abstract
//!    operations.
//! 4. [`uppt`] and [`mapping`]: read a user's privacy preference table and
//!    resolve its `resource_control` words to candidate methods.
//! 5. [`selector`]: pick the deepest performer of each operation on every
//!    call chain.
//! 6. [`instrument`]: place a hook as the first statement of each selected
//!    method.
//! 7. [`policy`], [`simulate`] and [`verify`]: replay scenarios against the
//!    instrumented corpus and check for bypass, no-isolation and useless
//!    hooks.
//!
//! [`pipeline`] strings the stages together; [`synth`] generates labelled
//! corpora for classifier evaluation and [`defaults`] holds the shipped data.

pub mod callgraph;
pub mod classifier;
pub mod corpus;
pub mod defaults;
pub mod fingerprint;
pub mod instrument;
pub mod io;
pub mod mapping;
pub mod oal;
pub mod pipeline;
pub mod policy;
pub mod selector;
pub mod simulate;
pub mod synth;
pub mod uppt;
pub mod verify;

pub use corpus::{Corpus, MethodId, MethodRecord};
