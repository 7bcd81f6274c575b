pub mod classify;
pub mod cocycle;
pub mod error;
pub mod flatten;
pub mod gallery;
pub mod katok;
pub mod linalg;
pub mod spectral;

pub use cocycle::{Cocycle, ScheduleRule, Source, SplittingSpec, WindowProduct};
pub use error::{Error, Result};
pub use linalg::{Matrix, Tolerances};
