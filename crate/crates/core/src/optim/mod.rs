//! Local optimizers: Adam for likelihood ascent and a bounded limited-memory
//! quasi-Newton method for acquisition functions.

mod adam;
mod lbfgsb;

pub use adam::Adam;
pub use lbfgsb::{minimize_box, BoxMinResult, LbfgsbConfig};
