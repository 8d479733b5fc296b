//! Numerics for adiabatic population transfer between microwave-dressed
//! spin states of a three-level Λ system.
//!
//! Units: angular frequencies in rad/µs, times in µs, ħ = 1.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod linalg;
pub mod lindblad;
pub mod model;
pub mod ode;
pub mod pulses;
pub mod crab_opt;
pub mod exec;
pub mod optim;
pub mod ensemble;
