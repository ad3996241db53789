//! Exhaustive enumeration oracles for small models.

use crate::elimination::LogPartition;
use crate::error::{Error, Result};
use crate::factor::{FactorGraph, VarId};
use crate::lowrank::Matrix;

/// Largest state space, in bits, that [`brute_force_log_z`] will enumerate.
pub const BRUTE_FORCE_BITS: u32 = 24;
/// Largest state space, in bits, for [`brute_force_skewed_factor`].
pub const SKEWED_FACTOR_BITS: u32 = 20;

/// Calls `visit(assignment, log10 weight)` for every joint configuration, with
/// the weight taken over the factors whose index passes `include`.
fn enumerate<F>(g: &FactorGraph, include: impl Fn(usize) -> bool, mut visit: F)
where
    F: FnMut(&[usize], f64),
{
    let n = g.num_vars();
    let cards = g.domains().cards();
    let picked: Vec<usize> = (0..g.factors().len()).filter(|&k| include(k)).collect();
    let logs: Vec<Vec<f64>> = picked
        .iter()
        .map(|&k| {
            let f = &g.factors()[k];
            f.table()
                .iter()
                .map(|x| x.log10() + f.log_scale())
                .collect()
        })
        .collect();
    // step[j][v]: offset change in factor j's table when variable v advances.
    let step: Vec<Vec<usize>> = picked
        .iter()
        .map(|&k| {
            let f = &g.factors()[k];
            let mut s = vec![0usize; n];
            for (p, v) in f.scope().iter().enumerate() {
                s[v.0] = f.cards()[p + 1..].iter().product();
            }
            s
        })
        .collect();

    let mut x = vec![0usize; n];
    let mut offs = vec![0usize; picked.len()];
    loop {
        let w: f64 = logs.iter().zip(&offs).map(|(t, &o)| t[o]).sum();
        visit(&x, w);
        let mut d = n;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            x[d] += 1;
            for (o, s) in offs.iter_mut().zip(&step) {
                *o += s[d];
            }
            if x[d] < cards[d] {
                break;
            }
            for (o, s) in offs.iter_mut().zip(&step) {
                *o -= s[d] * cards[d];
            }
            x[d] = 0;
        }
    }
}

/// Sum of `10^l` over a stream of log10 terms, kept in a frame rescaled to the
/// running maximum with compensated summation.
#[derive(Clone, Copy, Debug)]
struct LogSum {
    max: f64,
    sum: f64,
    carry: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            sum: 0.0,
            carry: 0.0,
        }
    }

    fn add(&mut self, l: f64) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if l > self.max {
            let shrink = 10f64.powf(self.max - l);
            self.sum *= shrink;
            self.carry *= shrink;
            self.max = l;
        }
        let y = 10f64.powf(l - self.max) - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn log10(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.log10()
        }
    }
}

fn check_size(g: &FactorGraph, limit: u32) -> Result<()> {
    let bits = g.domains().state_space_bits();
    if bits > limit as f64 + 1e-9 {
        return Err(Error::StateSpaceTooLarge { bits, limit });
    }
    Ok(())
}

/// Exact log10 Z by enumerating every configuration.
pub fn brute_force_log_z(g: &FactorGraph) -> Result<LogPartition> {
    check_size(g, BRUTE_FORCE_BITS)?;
    let mut acc = LogSum::new();
    enumerate(g, |_| true, |_, w| acc.add(w));
    Ok(LogPartition::new(acc.log10()))
}

/// Table over `(rows_var, cols_var)` obtained by summing the product of every
/// factor not listed in `exclude` over all other variables. Scaled so its
/// largest entry is 1.
pub fn brute_force_skewed_factor(
    g: &FactorGraph,
    exclude: &[usize],
    rows_var: VarId,
    cols_var: VarId,
) -> Result<Matrix> {
    check_size(g, SKEWED_FACTOR_BITS)?;
    for v in [rows_var, cols_var] {
        if v.0 >= g.num_vars() {
            return Err(Error::UnknownVariable {
                var: v,
                n: g.num_vars(),
            });
        }
    }
    let rows = g.domains().card(rows_var);
    let cols = g.domains().card(cols_var);
    let mut cells = vec![LogSum::new(); rows * cols];
    enumerate(
        g,
        |k| !exclude.contains(&k),
        |x, w| cells[x[rows_var.0] * cols + x[cols_var.0]].add(w),
    );
    let logs: Vec<f64> = cells.iter().map(|c| c.log10()).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let data = logs
        .iter()
        .map(|&l| {
            if top == f64::NEG_INFINITY {
                0.0
            } else {
                10f64.powf(l - top)
            }
        })
        .collect();
    Matrix::new(rows, cols, data)
}
