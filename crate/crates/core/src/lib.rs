#![no_std]
extern crate alloc;

pub mod bandwidth;
pub mod calibration;
pub mod competitors;
pub mod data;
pub mod density;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod kernel;
pub mod naive;
pub mod normal;
pub mod percentile;
pub mod rng;
pub mod sim;
pub mod variance;
