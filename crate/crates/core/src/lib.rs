//! Pathwise calculus on sampled càdlàg paths.

pub mod equations;
pub mod drawdown;
pub mod error;
pub mod finance;
pub mod functions;
pub mod generate;
pub mod integral;
pub mod io;
pub mod mc;
pub mod numeric;
pub mod partition;
pub mod path;
pub mod quadvar;

pub use error::{Error, Result};
pub use generate::{generate, Generator};
pub use numeric::{Status, TrendReport, TrendSpec};
pub use partition::{Partition, PartitionKind, PartitionSequence};
pub use path::{FvPath, GridPath, RunningMax, TimeGrid};
