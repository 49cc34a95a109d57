//! Turing instability analysis and bulk-surface finite element simulation for
//! coupled reaction-diffusion systems in the unit ball with Robin-type exchange
//! between bulk and surface species.

pub mod driver;
pub mod error;
pub mod fem;
pub mod kinetics;
pub mod mesh;
pub mod stability;
pub mod timestep;

pub use error::{Error, Result};
