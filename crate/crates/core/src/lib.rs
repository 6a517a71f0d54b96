pub mod certify;
pub mod cli;
pub mod error;
pub mod ftcadis;
pub mod io;
pub mod net;
pub mod numerics;
pub mod world;

pub use error::{Error, Result};
