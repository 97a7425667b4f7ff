#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod cluster;
pub mod datagen;
pub mod dataset;
pub mod ecm;
pub mod error;
pub mod field;
pub mod gp;
pub mod interp;
pub mod io;
pub mod mesh;
pub mod morphing;
pub mod pipeline;
pub mod pod;

pub use error::{Error, Result};
