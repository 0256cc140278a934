//! Knowledge-graph link prediction with SimplE, SimplE+ and ComplEx.
//!
//! SimplE+ restricts entity embeddings to the non-negative orthant, which lets
//! subsumption rules between relations be enforced exactly by tying the
//! premise relation to its conclusion. The crate also ships a rule-closure
//! baseline, ranking evaluation, and executable checks of the expressivity and
//! impossibility results the model rests on.

pub mod data;
pub mod models;
pub mod seed;
pub mod training;
pub mod evaluation;
pub mod logic;
pub mod analysis;
pub mod checkpoint;
pub mod config;
pub mod pipeline;
pub mod cli;
