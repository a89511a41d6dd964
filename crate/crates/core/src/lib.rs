pub mod analysis;
pub mod avg_channel;
pub mod error;
pub mod fock;
pub mod montecarlo;
pub mod spin_boson;

pub use error::{Error, Result};
