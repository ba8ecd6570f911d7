//! Crowd-informed annotation toolkit.
//!
//! Tasks receive discrete answers from a crowd of annotators over `C` proper
//! categories plus a trailing "can't solve" (`cs`) category. Every soft label
//! carries its `cs` mass in the final slot, Dirichlet posteriors follow from
//! conjugacy with the multinomial likelihood, and a learned Dirichlet head
//! predicts those posteriors from task features so that easy tasks can be
//! annotated automatically and hard ones start from an informed prior.
//!
//! The crate is `no_std` (it needs `alloc`). The `std` feature is on by
//! default; `parallel` fans bootstrap and repeats work out over rayon with
//! deterministic reduction order.
#![cfg_attr(all(not(feature = "std"), not(test)), no_std)]

extern crate alloc;

pub mod autothresh;
pub mod bayes;
mod error;
pub mod head;
mod math;
pub mod metrics;
pub mod priors;
pub mod rng;
pub mod sim;
pub mod special;
pub mod split;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    CategoryScheme, CountVector, DatasetSplit, DirichletParams, ResponseRecord, ResponseSet,
    SoftLabel, TaskRecord, tally,
};
