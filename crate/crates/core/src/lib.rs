#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod hermite;
pub mod lab;
pub mod linalg;
pub mod mixture;
pub mod network;
pub mod rng;
pub mod stats;
