//! Elimination orders: the min-fill heuristic and induced-width measurement.
//!
//! Induced width counts the eliminated variable itself, so a tree has width 2
//! and `K_n` has width `n`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::factor::{FactorGraph, VarId};

/// A permutation of a model's variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EliminationOrder(Vec<VarId>);

impl EliminationOrder {
    /// Checks that `order` is a permutation of `0..n`.
    pub fn new(order: Vec<VarId>, n: usize) -> Result<Self> {
        if order.len() != n {
            return Err(Error::InvalidOrder(format!(
                "order has {} entries, model has {n} variables",
                order.len()
            )));
        }
        let mut seen = vec![false; n];
        for v in &order {
            if v.0 >= n {
                return Err(Error::InvalidOrder(format!("{v} out of range")));
            }
            if std::mem::replace(&mut seen[v.0], true) {
                return Err(Error::InvalidOrder(format!("{v} appears twice")));
            }
        }
        Ok(EliminationOrder(order))
    }

    /// `0, 1, …, n-1`.
    pub fn identity(n: usize) -> Self {
        EliminationOrder((0..n).map(VarId).collect())
    }

    /// Wraps a sequence without checking it covers every variable. Used for
    /// partial orders such as the complement of a kept set.
    pub fn partial(order: Vec<VarId>) -> Self {
        EliminationOrder(order)
    }

    pub fn as_slice(&self) -> &[VarId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = VarId> + '_ {
        self.0.iter().copied()
    }

    /// Copy with the given variables removed, relative order preserved.
    pub fn without(&self, drop: &[VarId]) -> EliminationOrder {
        EliminationOrder(
            self.0
                .iter()
                .copied()
                .filter(|v| !drop.contains(v))
                .collect(),
        )
    }

    /// Position of each variable in the order, indexed by id.
    pub fn positions(&self, n: usize) -> Vec<Option<usize>> {
        let mut pos = vec![None; n];
        for (k, v) in self.0.iter().enumerate() {
            pos[v.0] = Some(k);
        }
        pos
    }

    /// FNV-1a hash of the sequence, used to tag benchmark records.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.0 {
            for b in (v.0 as u64).to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Interaction graph: each factor scope becomes a clique.
pub(crate) fn interaction_graph(g: &FactorGraph) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); g.num_vars()];
    for f in g.factors() {
        let s = f.scope();
        for (a, u) in s.iter().enumerate() {
            for w in &s[a + 1..] {
                adj[u.0].insert(w.0);
                adj[w.0].insert(u.0);
            }
        }
    }
    adj
}

fn fill_in(adj: &[BTreeSet<usize>], v: usize) -> usize {
    let nb: Vec<usize> = adj[v].iter().copied().collect();
    let mut fill = 0;
    for (a, &x) in nb.iter().enumerate() {
        for &y in &nb[a + 1..] {
            if !adj[x].contains(&y) {
                fill += 1;
            }
        }
    }
    fill
}

fn eliminate(adj: &mut [BTreeSet<usize>], v: usize) -> usize {
    let nb: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
    for &x in &nb {
        adj[x].remove(&v);
    }
    for (a, &x) in nb.iter().enumerate() {
        for &y in &nb[a + 1..] {
            adj[x].insert(y);
            adj[y].insert(x);
        }
    }
    nb.len() + 1
}

/// Greedy min-fill: repeatedly eliminate the variable adding the fewest fill
/// edges, ties to the smallest id.
pub fn minfill_order(g: &FactorGraph) -> EliminationOrder {
    let n = g.num_vars();
    let mut adj = interaction_graph(g);
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let best = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (fill_in(&adj, v), v))
            .expect("a live vertex remains");
        eliminate(&mut adj, best);
        alive[best] = false;
        order.push(VarId(best));
    }
    EliminationOrder(order)
}

/// Largest bucket scope (eliminated variable included) met while eliminating
/// along `o`.
pub fn induced_width(g: &FactorGraph, o: &EliminationOrder) -> Result<usize> {
    let o = EliminationOrder::new(o.0.clone(), g.num_vars())?;
    let mut adj = interaction_graph(g);
    Ok(o.iter()
        .map(|v| eliminate(&mut adj, v.0))
        .max()
        .unwrap_or(0))
}
