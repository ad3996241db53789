//! Seeded Ising model generators.
//!
//! Spins `x ∈ {−1, +1}` are stored as index 0 (−1) and 1 (+1). The generator
//! is Xoshiro256++ seeded through SplitMix64; uniforms are `(u64 >> 11)·2⁻⁵³`.
//! Fields are drawn first, in variable order, then couplings along edges in
//! lexicographic `(i, j)` order with `i < j`.

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{Domains, Factor, FactorGraph, VarId};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    /// Non-toroidal `h × w` grid, variable `r·w + c`.
    Grid {
        h: usize,
        w: usize,
    },
    Complete {
        n: usize,
    },
}

impl Topology {
    pub fn num_vars(&self) -> usize {
        match *self {
            Topology::Grid { h, w } => h * w,
            Topology::Complete { n } => n,
        }
    }

    /// Edges `(i, j)`, `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        match *self {
            Topology::Grid { h, w } => {
                for r in 0..h {
                    for c in 0..w {
                        let i = r * w + c;
                        if c + 1 < w {
                            e.push((i, i + 1));
                        }
                        if r + 1 < h {
                            e.push((i, i + w));
                        }
                    }
                }
            }
            Topology::Complete { n } => {
                for i in 0..n {
                    for j in i + 1..n {
                        e.push((i, j));
                    }
                }
            }
        }
        e.sort_unstable();
        e
    }

    pub fn label(&self) -> String {
        match *self {
            Topology::Grid { h, w } => format!("grid{h}x{w}"),
            Topology::Complete { n } => format!("complete{n}"),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingSpec {
    pub topology: Topology,
    /// Couplings are drawn from `[−delta, delta]`.
    pub delta: f64,
    /// Fields are drawn from `[−field_range, field_range]`.
    pub field_range: f64,
    pub seed: u64,
}

impl IsingSpec {
    pub fn grid(h: usize, w: usize, delta: f64, seed: u64) -> Self {
        IsingSpec {
            topology: Topology::Grid { h, w },
            delta,
            field_range: 0.1,
            seed,
        }
    }

    pub fn complete(n: usize, delta: f64, seed: u64) -> Self {
        IsingSpec {
            topology: Topology::Complete { n },
            delta,
            field_range: 0.1,
            seed,
        }
    }

    pub fn model_id(&self) -> String {
        format!("{}-d{}-s{}", self.topology.label(), self.delta, self.seed)
    }
}

fn uniform(rng: &mut Xoshiro256PlusPlus, half_width: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    half_width * (2.0 * u - 1.0)
}

/// Unary factors `exp(φ_i x_i)` followed by pairwise factors
/// `exp(φ_ij x_i x_j)`.
pub fn gen_ising(spec: &IsingSpec) -> Result<FactorGraph> {
    let n = spec.topology.num_vars();
    if n == 0 {
        return Err(Error::Config(
            "Ising topology needs at least one variable".into(),
        ));
    }
    if !(spec.delta >= 0.0 && spec.delta.is_finite()) {
        return Err(Error::Config(format!(
            "delta must be non-negative, got {}",
            spec.delta
        )));
    }
    if !(spec.field_range >= 0.0 && spec.field_range.is_finite()) {
        return Err(Error::Config("field range must be non-negative".into()));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let mut factors = Vec::new();
    for i in 0..n {
        let phi = uniform(&mut rng, spec.field_range);
        factors.push(Factor::unary(VarId(i), vec![(-phi).exp(), phi.exp()])?);
    }
    for (i, j) in spec.topology.edges() {
        let phi = uniform(&mut rng, spec.delta);
        let (same, diff) = (phi.exp(), (-phi).exp());
        factors.push(Factor::new(
            vec![VarId(i), VarId(j)],
            vec![2, 2],
            vec![same, diff, diff, same],
        )?);
    }
    FactorGraph::new(Domains::uniform(n, 2), factors)
}
