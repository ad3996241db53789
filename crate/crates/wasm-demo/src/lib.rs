//! Browser bindings for the demo page in `www/`. Each export takes plain
//! numbers and returns a JSON string; the `*_json` functions hold the logic so
//! they can be tested natively.

use bucketforge::elimination::BoundMode;
use bucketforge::gbr::{gbr_from_trace, GbrOptions};
use bucketforge::{
    bucket_elimination, gen_ising, induced_width, mbr_partition_function, minfill_order,
    mini_bucket_elimination, IsingSpec, Topology,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest model the page will run, in variables.
const MAX_VARS: usize = 49;
const MAX_SEEDS: u32 = 50;

#[derive(Serialize, Debug, Default, Clone, Copy, PartialEq)]
pub struct MeanErrors {
    pub mbe_upper: f64,
    pub mbe_lower: f64,
    pub mbr: f64,
    pub gbr: f64,
}

#[derive(Serialize, Debug)]
pub struct SweepPoint {
    pub x: f64,
    pub errors: MeanErrors,
}

#[derive(Serialize, Debug)]
pub struct Sweep {
    pub model: String,
    pub induced_width: usize,
    pub points: Vec<SweepPoint>,
}

fn topology(kind: &str, size: usize) -> Result<Topology, String> {
    let t = match kind {
        "grid" => Topology::Grid { h: size, w: size },
        "complete" => Topology::Complete { n: size },
        other => return Err(format!("unknown topology {other:?}")),
    };
    if t.num_vars() == 0 || t.num_vars() > MAX_VARS {
        return Err(format!("model must have 1 to {MAX_VARS} variables"));
    }
    Ok(t)
}

fn check_seeds(seeds: u32) -> Result<(), String> {
    if seeds == 0 || seeds > MAX_SEEDS {
        return Err(format!("seeds must be between 1 and {MAX_SEEDS}"));
    }
    Ok(())
}

/// Mean absolute log10 error of each method over `seeds` instances.
fn mean_errors(t: Topology, delta: f64, ibound: usize, seeds: u32) -> Result<MeanErrors, String> {
    let mut sum = MeanErrors::default();
    for seed in 0..seeds as u64 {
        let spec = IsingSpec {
            topology: t,
            delta,
            field_range: 0.1,
            seed,
        };
        let g = gen_ising(&spec).map_err(|e| e.to_string())?;
        let o = minfill_order(&g);
        let exact = bucket_elimination(&g, &o).map_err(|e| e.to_string())?;
        let bound = |mode| {
            mini_bucket_elimination(&g, &o, ibound, mode)
                .map(|z| z.error_vs(exact))
                .map_err(|e| e.to_string())
        };
        sum.mbe_upper += bound(BoundMode::Upper)?;
        sum.mbe_lower += bound(BoundMode::Lower)?;
        let (mbr, trace) = mbr_partition_function(&g, &o, ibound).map_err(|e| e.to_string())?;
        sum.mbr += mbr.error_vs(exact);
        let gbr = gbr_from_trace(&trace, mbr, GbrOptions::default()).map_err(|e| e.to_string())?;
        sum.gbr += gbr.log_z.error_vs(exact);
    }
    let n = seeds as f64;
    Ok(MeanErrors {
        mbe_upper: sum.mbe_upper / n,
        mbe_lower: sum.mbe_lower / n,
        mbr: sum.mbr / n,
        gbr: sum.gbr / n,
    })
}

fn width_of(t: Topology) -> Result<usize, String> {
    let g = gen_ising(&IsingSpec {
        topology: t,
        delta: 1.0,
        field_range: 0.1,
        seed: 0,
    })
    .map_err(|e| e.to_string())?;
    induced_width(&g, &minfill_order(&g)).map_err(|e| e.to_string())
}

/// Mean errors for ibound = 1..=max_ibound at a fixed Δ.
pub fn ibound_sweep_json(
    kind: &str,
    size: usize,
    delta: f64,
    max_ibound: usize,
    seeds: u32,
) -> Result<String, String> {
    let t = topology(kind, size)?;
    check_seeds(seeds)?;
    if max_ibound == 0 || max_ibound > 12 {
        return Err("max ibound must be between 1 and 12".into());
    }
    let points = (1..=max_ibound)
        .map(|i| {
            mean_errors(t, delta, i, seeds).map(|errors| SweepPoint {
                x: i as f64,
                errors,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sweep = Sweep {
        model: t.label(),
        induced_width: width_of(t)?,
        points,
    };
    serde_json::to_string(&sweep).map_err(|e| e.to_string())
}

/// Mean errors for Δ = step, 2·step, …, max_delta at a fixed ibound.
pub fn delta_sweep_json(
    kind: &str,
    size: usize,
    ibound: usize,
    max_delta: f64,
    steps: usize,
    seeds: u32,
) -> Result<String, String> {
    let t = topology(kind, size)?;
    check_seeds(seeds)?;
    if ibound == 0 {
        return Err("ibound must be at least 1".into());
    }
    if !(max_delta > 0.0 && max_delta.is_finite()) || steps == 0 || steps > 20 {
        return Err("need a positive Δ and 1 to 20 steps".into());
    }
    let points = (1..=steps)
        .map(|k| {
            let delta = max_delta * k as f64 / steps as f64;
            mean_errors(t, delta, ibound, seeds).map(|errors| SweepPoint { x: delta, errors })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sweep = Sweep {
        model: t.label(),
        induced_width: width_of(t)?,
        points,
    };
    serde_json::to_string(&sweep).map_err(|e| e.to_string())
}

#[derive(Serialize, Debug)]
pub struct TraceStep {
    pub label: String,
    pub compensation: Vec<f64>,
    pub relative_residual: f64,
}

#[derive(Serialize, Debug)]
pub struct TraceSummary {
    pub model: String,
    /// Extended elimination order, replicates written `i^k` (1-based).
    pub renorm_order: Vec<String>,
    pub replicate_counts: Vec<usize>,
    pub steps: Vec<TraceStep>,
    pub renormalized_width: usize,
    pub exact_log10_z: f64,
    pub mbr_log10_z: f64,
    pub gbr_log10_z: f64,
}

/// Runs MBR on a complete-graph Ising model and describes the rewritten model.
pub fn renorm_trace_json(n: usize, delta: f64, seed: u64, ibound: usize) -> Result<String, String> {
    let t = topology("complete", n)?;
    if ibound == 0 {
        return Err("ibound must be at least 1".into());
    }
    let g = gen_ising(&IsingSpec {
        topology: t,
        delta,
        field_range: 0.1,
        seed,
    })
    .map_err(|e| e.to_string())?;
    let o = minfill_order(&g);
    let exact = bucket_elimination(&g, &o).map_err(|e| e.to_string())?;
    let (mbr, trace) = mbr_partition_function(&g, &o, ibound).map_err(|e| e.to_string())?;
    let gbr = gbr_from_trace(&trace, mbr, GbrOptions::default()).map_err(|e| e.to_string())?;

    let name = |v: bucketforge::VarId| -> String {
        match trace.steps.iter().find(|s| s.replicate_var == v) {
            Some(s) => format!("{}^{}", s.replicate.base.0 + 1, s.replicate.index),
            None => (v.0 + 1).to_string(),
        }
    };
    let summary = TraceSummary {
        model: t.label(),
        renorm_order: trace.renorm_order.iter().map(name).collect(),
        replicate_counts: trace.replicate_counts(),
        steps: trace
            .steps
            .iter()
            .map(|s| TraceStep {
                label: name(s.replicate_var),
                compensation: s.compensation.values.clone(),
                relative_residual: s.relative_residual,
            })
            .collect(),
        renormalized_width: induced_width(&trace.final_graph, &trace.renorm_order)
            .map_err(|e| e.to_string())?,
        exact_log10_z: exact.log10_z,
        mbr_log10_z: mbr.log10_z,
        gbr_log10_z: gbr.log_z.log10_z,
    };
    serde_json::to_string(&summary).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn ibound_sweep(
    kind: &str,
    size: usize,
    delta: f64,
    max_ibound: usize,
    seeds: u32,
) -> Result<String, JsValue> {
    ibound_sweep_json(kind, size, delta, max_ibound, seeds).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn delta_sweep(
    kind: &str,
    size: usize,
    ibound: usize,
    max_delta: f64,
    steps: usize,
    seeds: u32,
) -> Result<String, JsValue> {
    delta_sweep_json(kind, size, ibound, max_delta, steps, seeds).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn renorm_trace(n: usize, delta: f64, seed: u32, ibound: usize) -> Result<String, JsValue> {
    renorm_trace_json(n, delta, seed as u64, ibound).map_err(|e| JsValue::from_str(&e))
}
