#![no_std]

extern crate alloc;

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod synth;
pub mod model;
pub mod nn;
pub mod tasks;
pub mod topping;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
