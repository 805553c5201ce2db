//! Std-side companion to `rcad-core`: a rayon executor, run manifests, CSV/JSON
//! writers and the reproduction bundles behind the `rcad` binary.

pub mod output;
pub mod parallel;
pub mod reference;
pub mod reproduce;

pub use parallel::Parallel;
