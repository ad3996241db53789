use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use bucketforge::bench::{
    oracle_log_z, run_algorithm, Algorithm, ModelSource, OracleMode, OrderChoice, RunConfig,
    SolveOptions,
};
use bucketforge::elimination::{DEFAULT_WIDTH_CAP, WIDTH_CAP_ENV};
use bucketforge::io::records::{write_records, OracleStatus, OutputFormat, ResultRecord};
use bucketforge::{
    gen_ising, induced_width, minfill_order, parse_uai, run_benchmark, write_uai, EliminationOrder,
    Error, FactorGraph, IsingSpec, Topology,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bucketforge",
    version,
    about = "Partition-function inference on discrete graphical models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded Ising model as a UAI file.
    Gen {
        #[command(flatten)]
        shape: IsingShape,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one algorithm on one model.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        algorithm: Algorithm,
        #[arg(long, default_value_t = 10)]
        ibound: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run several algorithms over a seed range and record errors.
    Bench {
        #[command(flatten)]
        model: ModelArgs,
        /// Seed list: `N`, `A..B` (half-open) or comma separated.
        #[arg(long, visible_alias = "seed", default_value = "0", value_parser = parse_seeds)]
        seeds: SeedList,
        /// Comma-separated algorithm names.
        #[arg(long, required = true, value_delimiter = ',')]
        algorithm: Vec<Algorithm>,
        /// Comma-separated ibounds; each is swept.
        #[arg(long, value_delimiter = ',', default_value = "10")]
        ibound: Vec<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Report the induced width of a min-fill order.
    Width {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct IsingShape {
    /// Grid topology, e.g. `15x15`.
    #[arg(long, value_parser = parse_grid, conflicts_with = "complete")]
    grid: Option<(usize, usize)>,
    /// Complete graph on N variables.
    #[arg(long)]
    complete: Option<usize>,
    /// Coupling range: pairwise parameters are drawn from [-delta, delta].
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Field range: unary parameters are drawn from [-r, r].
    #[arg(long, default_value_t = 0.1)]
    field_range: f64,
}

impl IsingShape {
    fn topology(&self) -> Result<Topology, Failure> {
        match (self.grid, self.complete) {
            (Some((h, w)), _) => Ok(Topology::Grid { h, w }),
            (None, Some(n)) => Ok(Topology::Complete { n }),
            (None, None) => Err(Failure::Config(anyhow!(
                "no model given: use --grid HxW, --complete N or --uai PATH"
            ))),
        }
    }

    fn spec(&self, seed: u64) -> Result<IsingSpec, Failure> {
        Ok(IsingSpec {
            topology: self.topology()?,
            delta: self.delta,
            field_range: self.field_range,
            seed,
        })
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Read the model from a UAI MARKOV file.
    #[arg(long, conflicts_with_all = ["grid", "complete"])]
    uai: Option<PathBuf>,
    #[command(flatten)]
    shape: IsingShape,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// `minfill` or `file` (variables in file order).
    #[arg(long, default_value = "minfill")]
    order: OrderChoice,
    #[arg(long, default_value = "auto")]
    oracle: OracleMode,
    #[arg(long, default_value = "json")]
    format: OutputFormat,
    /// GBR reverse sweeps.
    #[arg(long, default_value_t = 1)]
    sweeps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a
            .trim()
            .parse()
            .map_err(|_| format!("bad seed range {s:?}"))?;
        let b: u64 = b
            .trim()
            .parse()
            .map_err(|_| format!("bad seed range {s:?}"))?;
        if a >= b {
            return Err(format!("empty seed range {s:?}"));
        }
        return Ok(SeedList((a..b).collect()));
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad seed {t:?}")))
        .collect::<Result<Vec<_>, _>>()
        .map(SeedList)
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("expected HxW, got {s:?}"))
    };
    Ok((parse(h)?, parse(w)?))
}

/// Failure categories mapped to process exit codes.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Model(anyhow::Error),
    Resource(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Model(_) => 3,
            Failure::Resource(_) => 4,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Model(e) | Failure::Resource(e) => e,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ModelTooWide { .. } | Error::StateSpaceTooLarge { .. } => {
                Failure::Resource(e.into())
            }
            Error::Config(_) | Error::InvalidOrder(_) | Error::FactorExceedsIbound { .. } => {
                Failure::Config(e.into())
            }
            _ => Failure::Model(e.into()),
        }
    }
}

fn width_cap() -> Result<usize, Failure> {
    match std::env::var(WIDTH_CAP_ENV) {
        Err(_) => Ok(DEFAULT_WIDTH_CAP),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(cap) if cap > 0 => Ok(cap),
            _ => Err(Failure::Config(anyhow!(
                "{WIDTH_CAP_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn load_model(model: &ModelArgs, seed: u64) -> Result<(String, Option<u64>, FactorGraph), Failure> {
    match &model.uai {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Model)?;
            let g = parse_uai(&text).map_err(|e| {
                Failure::Model(anyhow::Error::new(e).context(format!("parsing {}", path.display())))
            })?;
            Ok((path.display().to_string(), None, g))
        }
        None => {
            let spec = model.shape.spec(seed)?;
            let g = gen_ising(&spec).map_err(|e| Failure::Config(e.into()))?;
            Ok((spec.model_id(), Some(seed), g))
        }
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            let f = File::create(p)
                .with_context(|| format!("creating {}", p.display()))
                .map_err(Failure::Config)?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn emit(records: &[ResultRecord], run: &RunArgs) -> Result<(), Failure> {
    let out = open_out(run.out.as_deref())?;
    write_records(out, records, run.format).map_err(|e| Failure::Config(e.into()))
}

fn choose_order(g: &FactorGraph, choice: &OrderChoice) -> EliminationOrder {
    match choice {
        OrderChoice::MinFill => minfill_order(g),
        OrderChoice::FileOrder => EliminationOrder::identity(g.num_vars()),
    }
}

fn solve(
    model: &ModelArgs,
    seed: u64,
    algorithm: Algorithm,
    ibound: usize,
    run: &RunArgs,
) -> Result<(), Failure> {
    if ibound == 0 {
        return Err(Failure::Config(anyhow!("ibound must be at least 1")));
    }
    if run.sweeps == 0 {
        return Err(Failure::Config(anyhow!("sweeps must be at least 1")));
    }
    let opts = SolveOptions {
        width_cap: width_cap()?,
        gbr_sweeps: run.sweeps,
    };
    let (model_id, seed, g) = load_model(model, seed)?;
    let order = choose_order(&g, &run.order);
    let ibound = algorithm.needs_ibound().then_some(ibound);

    let start = Instant::now();
    let z = run_algorithm(algorithm, &g, &order, ibound, opts)?;
    let wall_time_seconds = start.elapsed().as_secs_f64();

    let (oracle, error) = match run.oracle {
        OracleMode::Off => (OracleStatus::Off, None),
        OracleMode::Auto => match oracle_log_z(&g, &order, opts.width_cap) {
            Some(exact) => (OracleStatus::Ok, Some(z.error_vs(exact))),
            None => (OracleStatus::Infeasible, None),
        },
    };
    let record = ResultRecord {
        model_id,
        algorithm,
        ibound,
        seed,
        log10_z: Some(z.log10_z),
        wall_time_seconds,
        error,
        oracle,
        order_hash: format!("{:016x}", order.fingerprint()),
        failure: None,
    };
    emit(&[record], run)
}

fn bench(
    model: &ModelArgs,
    seeds: &SeedList,
    algorithms: &[Algorithm],
    ibounds: &[usize],
    run: &RunArgs,
) -> Result<(), Failure> {
    let source = match &model.uai {
        Some(path) => ModelSource::Uai(path.clone()),
        None => ModelSource::Ising {
            topology: model.shape.topology()?,
            delta: model.shape.delta,
            field_range: model.shape.field_range,
        },
    };
    let base = RunConfig {
        algorithms: Vec::new(),
        ibound: None,
        order: run.order.clone(),
        seeds: seeds.0.clone(),
        source,
        oracle: run.oracle,
        solve: SolveOptions {
            width_cap: width_cap()?,
            gbr_sweeps: run.sweeps,
        },
    };

    let (bounded, exact): (Vec<Algorithm>, Vec<Algorithm>) =
        algorithms.iter().partition(|a| a.needs_ibound());
    let mut configs = Vec::new();
    if !exact.is_empty() {
        configs.push(RunConfig {
            algorithms: exact,
            ..base.clone()
        });
    }
    if !bounded.is_empty() {
        for &i in ibounds {
            configs.push(RunConfig {
                algorithms: bounded.clone(),
                ibound: Some(i),
                ..base.clone()
            });
        }
    }
    for cfg in &configs {
        cfg.validate()?;
    }
    let mut records = Vec::new();
    for cfg in &configs {
        records.extend(run_benchmark(cfg)?);
    }
    emit(&records, run)
}

fn width(model: &ModelArgs, seed: u64) -> Result<(), Failure> {
    let (model_id, _, g) = load_model(model, seed)?;
    let order = minfill_order(&g);
    let w = induced_width(&g, &order)?;
    println!(
        "{model_id}: {} variables, {} factors, induced width {w} (min-fill, order {:016x})",
        g.num_vars(),
        g.factors().len(),
        order.fingerprint()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen { shape, seed, out } => {
            let g = gen_ising(&shape.spec(seed)?).map_err(|e| Failure::Config(e.into()))?;
            let mut w = open_out(out.as_deref())?;
            w.write_all(write_uai(&g).as_bytes())
                .and_then(|_| w.flush())
                .context("writing model")
                .map_err(Failure::Config)
        }
        Command::Solve {
            model,
            seed,
            algorithm,
            ibound,
            run,
        } => solve(&model, seed, algorithm, ibound, &run),
        Command::Bench {
            model,
            seeds,
            algorithm,
            ibound,
            run,
        } => bench(&model, &seeds, &algorithm, &ibound, &run),
        Command::Width { model, seed } => width(&model, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
