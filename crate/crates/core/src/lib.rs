//! Edit-based unsupervised text style transfer.
//!
//! A high-level pointer chooses where to edit, a low-level operator agent
//! chooses how (insert, replace, delete or skip), and a masked multi-step
//! inference loop revises a sentence until a termination classifier is
//! satisfied.

pub mod autograd;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod edit;
pub mod error;
pub mod evaluator;
pub mod inference;
pub mod lm;
pub mod operator;
pub mod pipeline;
pub mod pointer;
pub mod trainer;

pub use error::{Error, Result};
