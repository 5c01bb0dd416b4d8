//! Numerical laboratory for positive-temperature open-system Liouvillians:
//! finite models of a small quantum system coupled to a thermal boson field,
//! golden-rule level-shift operators, positive-commutator estimates, block
//! decimation, smooth functional calculus, and return-to-equilibrium dynamics.

pub mod commutator;
pub mod config;
pub mod error;
pub mod fgr;
pub mod field;
pub mod linalg;
pub mod liouvillian;
pub mod particle;
pub mod report;
pub mod spectra;
