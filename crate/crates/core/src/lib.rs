//! Partition-function inference for discrete graphical models.
//!
//! Exact bucket elimination, mini-bucket upper/lower bounds, mini-bucket
//! renormalization (MBR) and global-bucket renormalization (GBR), together
//! with the min-fill ordering heuristic, a UAI reader/writer, seeded Ising
//! generators, enumeration oracles and a benchmark harness.
//!
//! ```
//! use bucketforge::{gen_ising, minfill_order, bucket_elimination, mbr_partition_function, IsingSpec};
//!
//! let g = gen_ising(&IsingSpec::grid(4, 4, 1.0, 7)).unwrap();
//! let o = minfill_order(&g);
//! let exact = bucket_elimination(&g, &o).unwrap();
//! let (approx, trace) = mbr_partition_function(&g, &o, 2).unwrap();
//! assert!(trace.num_steps() > 0);
//! assert!(approx.error_vs(exact) < 1.0);
//! ```

pub mod bench;
pub mod elimination;
pub mod error;
pub mod factor;
pub mod gbr;
pub mod io;
pub mod lowrank;
pub mod mbr;
pub mod oracle;
pub mod ordering;

pub use bench::{run_algorithm, run_benchmark, Algorithm, RunConfig, SolveOptions};
pub use elimination::{
    bucket_elimination, marginalize_subset, mini_bucket_elimination, partition_bucket, BoundMode,
    Bucket, LogPartition, MiniBucketPartition,
};
pub use error::{Error, Result};
pub use factor::{Domains, Factor, FactorGraph, Reduce, VarId};
pub use gbr::{gbr_partition_function, gbr_update, GbrState, SkewedMarginal};
pub use io::{gen_ising, parse_uai, write_uai, IsingSpec, ResultRecord, Topology};
pub use lowrank::{rank1_truncate, Matrix, Rank1Result};
pub use mbr::{
    compensate_minibucket, mbr_partition_function, verify_trace, CompensationPair,
    RenormalizationTrace, ReplicateId,
};
pub use oracle::{brute_force_log_z, brute_force_skewed_factor};
pub use ordering::{induced_width, minfill_order, EliminationOrder};
