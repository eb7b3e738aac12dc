//! Generation of R2R-style navigation instructions with sub-instruction and
//! entity-landmark alignment annotations.
//!
//! A sampled trajectory flows through six stages:
//!
//! 1. [`chunking`] splits it into sub-trajectories by turn class,
//! 2. [`landmarks`] picks one detected landmark per sub-trajectory,
//! 3. [`templating`] builds a crafted sub-instruction from a 108-entry grammar,
//! 4. [`speaker`] rewrites it with contrastive-search decoding,
//! 5. [`entities`] aligns an entity phrase with the landmark,
//! 6. [`assembly`] joins the sub-pairs into a dataset record.
//!
//! [`metrics`] holds the language and navigation evaluation suite, and
//! [`pipeline`] wires everything behind the `navinstr` command line tool.

pub mod assembly;
pub mod chunking;
pub mod config;
pub mod entities;
pub mod error;
pub mod landmarks;
pub mod metrics;
pub mod navgraph;
pub mod pipeline;
pub mod provider;
pub mod speaker;
pub mod templating;
mod vector;

pub use error::{Error, Result};
pub use vector::cosine_similarity;
