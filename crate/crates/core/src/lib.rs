//! τ-recurrence machinery for control systems `ẋ = f(x, u)`: recurrence
//! predicates, entropy bounds, an exact spanning-set oracle, and a
//! quantized sensor/controller protocol over a counted bit channel.

pub mod cli;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod quantized;
pub mod recurrence;
pub mod setgeom;

pub use error::{Error, Result};
