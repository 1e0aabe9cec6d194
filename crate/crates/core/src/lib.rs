pub mod bounds;
pub mod distances;
pub mod error;
pub mod experiment;
pub mod models;
pub mod numerics;
pub mod ratefit;

pub use error::{Error, Result};
