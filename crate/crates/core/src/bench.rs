//! Benchmark harness: runs a set of algorithms over seeded or file-based
//! instances, sharing one elimination order per instance, and scores each
//! estimate against an exact oracle when one is affordable.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elimination::{
    bucket_elimination_capped, mini_bucket_elimination, BoundMode, LogPartition, DEFAULT_WIDTH_CAP,
};
use crate::error::{Error, Result};
use crate::factor::FactorGraph;
use crate::gbr::{gbr_with_options, GbrOptions};
use crate::io::records::{OracleStatus, ResultRecord};
use crate::io::{gen_ising, parse_uai, IsingSpec, Topology};
use crate::mbr::mbr_partition_function;
use crate::oracle::{brute_force_log_z, BRUTE_FORCE_BITS};
use crate::ordering::{induced_width, minfill_order, EliminationOrder};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    ExactBe,
    BruteForce,
    MbeUpper,
    MbeLower,
    Mbr,
    Gbr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::ExactBe,
        Algorithm::BruteForce,
        Algorithm::MbeUpper,
        Algorithm::MbeLower,
        Algorithm::Mbr,
        Algorithm::Gbr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ExactBe => "exact-be",
            Algorithm::BruteForce => "brute-force",
            Algorithm::MbeUpper => "mbe-upper",
            Algorithm::MbeLower => "mbe-lower",
            Algorithm::Mbr => "mbr",
            Algorithm::Gbr => "gbr",
        }
    }

    pub fn needs_ibound(self) -> bool {
        matches!(
            self,
            Algorithm::MbeUpper | Algorithm::MbeLower | Algorithm::Mbr | Algorithm::Gbr
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Knobs shared by every algorithm call.
#[derive(Copy, Clone, Debug)]
pub struct SolveOptions {
    pub width_cap: usize,
    pub gbr_sweeps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            width_cap: DEFAULT_WIDTH_CAP,
            gbr_sweeps: 1,
        }
    }
}

/// Runs one algorithm on one model.
pub fn run_algorithm(
    alg: Algorithm,
    g: &FactorGraph,
    order: &EliminationOrder,
    ibound: Option<usize>,
    opts: SolveOptions,
) -> Result<LogPartition> {
    let need = || ibound.ok_or_else(|| Error::Config(format!("{alg} requires an ibound")));
    if let Some(i) = ibound.filter(|_| alg.needs_ibound()) {
        let width = induced_width(g, order)?.min(i + 1);
        if width > opts.width_cap {
            return Err(Error::ModelTooWide {
                width,
                cap: opts.width_cap,
            });
        }
    }
    match alg {
        Algorithm::ExactBe => bucket_elimination_capped(g, order, opts.width_cap),
        Algorithm::BruteForce => brute_force_log_z(g),
        Algorithm::MbeUpper => mini_bucket_elimination(g, order, need()?, BoundMode::Upper),
        Algorithm::MbeLower => mini_bucket_elimination(g, order, need()?, BoundMode::Lower),
        Algorithm::Mbr => mbr_partition_function(g, order, need()?).map(|(z, _)| z),
        Algorithm::Gbr => gbr_with_options(
            g,
            order,
            need()?,
            GbrOptions {
                sweeps: opts.gbr_sweeps,
                width_cap: opts.width_cap,
            },
        )
        .map(|o| o.log_z),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSource {
    Uai(PathBuf),
    /// Seeded Ising instances; the seed comes from the run's seed list.
    Ising {
        topology: Topology,
        delta: f64,
        field_range: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum OrderChoice {
    #[default]
    MinFill,
    /// Variables in file order.
    FileOrder,
}

impl FromStr for OrderChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minfill" | "min-fill" => Ok(OrderChoice::MinFill),
            "file" | "file-given" => Ok(OrderChoice::FileOrder),
            other => Err(Error::Config(format!("unknown order {other:?}"))),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum OracleMode {
    #[default]
    Auto,
    Off,
}

impl FromStr for OracleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(OracleMode::Auto),
            "off" => Ok(OracleMode::Off),
            other => Err(Error::Config(format!("unknown oracle mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub algorithms: Vec<Algorithm>,
    pub ibound: Option<usize>,
    pub order: OrderChoice,
    pub seeds: Vec<u64>,
    pub source: ModelSource,
    pub oracle: OracleMode,
    pub solve: SolveOptions,
}

impl RunConfig {
    pub fn ising(topology: Topology, delta: f64, seeds: Vec<u64>) -> Self {
        RunConfig {
            algorithms: Vec::new(),
            ibound: None,
            order: OrderChoice::MinFill,
            seeds,
            source: ModelSource::Ising {
                topology,
                delta,
                field_range: 0.1,
            },
            oracle: OracleMode::Auto,
            solve: SolveOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if let Some(a) = self.algorithms.iter().find(|a| a.needs_ibound()) {
            match self.ibound {
                None => return Err(Error::Config(format!("{a} requires an ibound"))),
                Some(0) => return Err(Error::Config("ibound must be at least 1".into())),
                Some(_) => {}
            }
        }
        if let ModelSource::Ising { .. } = self.source {
            if self.seeds.is_empty() {
                return Err(Error::Config("Ising source needs at least one seed".into()));
            }
        }
        if self.solve.gbr_sweeps == 0 {
            return Err(Error::Config("sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

struct Instance {
    model_id: String,
    seed: Option<u64>,
    model: Result<FactorGraph>,
}

fn instances(cfg: &RunConfig) -> Vec<Instance> {
    match &cfg.source {
        ModelSource::Uai(path) => {
            let model = std::fs::read_to_string(path)
                .map_err(Error::from)
                .and_then(|text| parse_uai(&text));
            vec![Instance {
                model_id: path.display().to_string(),
                seed: None,
                model,
            }]
        }
        ModelSource::Ising {
            topology,
            delta,
            field_range,
        } => cfg
            .seeds
            .iter()
            .map(|&seed| {
                let spec = IsingSpec {
                    topology: *topology,
                    delta: *delta,
                    field_range: *field_range,
                    seed,
                };
                Instance {
                    model_id: spec.model_id(),
                    seed: Some(seed),
                    model: gen_ising(&spec),
                }
            })
            .collect(),
    }
}

/// Exact log10 Z for scoring: enumeration when small enough, otherwise exact
/// elimination when the order's width is under the cap.
pub fn oracle_log_z(
    g: &FactorGraph,
    order: &EliminationOrder,
    width_cap: usize,
) -> Option<LogPartition> {
    if g.domains().state_space_bits() <= BRUTE_FORCE_BITS as f64 {
        return brute_force_log_z(g).ok();
    }
    match induced_width(g, order) {
        Ok(w) if w <= width_cap => bucket_elimination_capped(g, order, width_cap).ok(),
        _ => None,
    }
}

fn run_instance(cfg: &RunConfig, inst: Instance) -> Vec<ResultRecord> {
    let blank = |alg: Algorithm| ResultRecord {
        model_id: inst.model_id.clone(),
        algorithm: alg,
        ibound: if alg.needs_ibound() { cfg.ibound } else { None },
        seed: inst.seed,
        log10_z: None,
        wall_time_seconds: 0.0,
        error: None,
        oracle: OracleStatus::Off,
        order_hash: String::new(),
        failure: None,
    };
    let g = match inst.model {
        Ok(g) => g,
        Err(e) => {
            return cfg
                .algorithms
                .iter()
                .map(|&a| ResultRecord {
                    failure: Some(e.to_string()),
                    ..blank(a)
                })
                .collect()
        }
    };
    let order = match cfg.order {
        OrderChoice::MinFill => minfill_order(&g),
        OrderChoice::FileOrder => EliminationOrder::identity(g.num_vars()),
    };
    let order_hash = format!("{:016x}", order.fingerprint());
    let exact = match cfg.oracle {
        OracleMode::Off => None,
        OracleMode::Auto => Some(oracle_log_z(&g, &order, cfg.solve.width_cap)),
    };

    cfg.algorithms
        .iter()
        .map(|&alg| {
            let start = Instant::now();
            let result = run_algorithm(alg, &g, &order, cfg.ibound, cfg.solve);
            let elapsed = start.elapsed().as_secs_f64();
            let mut rec = ResultRecord {
                wall_time_seconds: elapsed,
                order_hash: order_hash.clone(),
                ..blank(alg)
            };
            match result {
                Ok(z) => {
                    rec.log10_z = Some(z.log10_z);
                    match exact {
                        None => rec.oracle = OracleStatus::Off,
                        Some(None) => rec.oracle = OracleStatus::Infeasible,
                        Some(Some(ex)) => {
                            rec.oracle = OracleStatus::Ok;
                            rec.error = Some(z.error_vs(ex));
                        }
                    }
                }
                Err(e) => {
                    rec.failure = Some(e.to_string());
                    rec.oracle = match exact {
                        None => OracleStatus::Off,
                        Some(None) => OracleStatus::Infeasible,
                        Some(Some(_)) => OracleStatus::Ok,
                    };
                }
            }
            rec
        })
        .collect()
}

/// Runs every configured algorithm on every instance. Configuration problems
/// are returned as errors; per-instance failures appear in the records.
pub fn run_benchmark(cfg: &RunConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let batches: Vec<Vec<ResultRecord>> = instances(cfg)
        .into_par_iter()
        .map(|inst| run_instance(cfg, inst))
        .collect();
    Ok(batches.into_iter().flatten().collect())
}

/// Mean `error` of the records for one algorithm (records without an error
/// are skipped). `None` when no record qualifies.
pub fn mean_error(records: &[ResultRecord], alg: Algorithm, ibound: Option<usize>) -> Option<f64> {
    let errs: Vec<f64> = records
        .iter()
        .filter(|r| r.algorithm == alg && (ibound.is_none() || r.ibound == ibound))
        .filter_map(|r| r.error)
        .collect();
    if errs.is_empty() {
        None
    } else {
        Some(errs.iter().sum::<f64>() / errs.len() as f64)
    }
}
