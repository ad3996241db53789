//! Model ingestion, generation and result serialization.

pub mod ising;
pub mod records;
pub mod uai;

pub use ising::{gen_ising, IsingSpec, Topology};
pub use records::{write_records, OutputFormat, ResultRecord};
pub use uai::{parse_uai, write_uai};
