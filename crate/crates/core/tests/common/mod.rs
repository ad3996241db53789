#![allow(dead_code)]

use bucketforge::{Domains, Factor, FactorGraph, VarId};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

/// Random table with entries in `[0.05, 2.05)`.
pub fn random_table(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| 0.05 + 2.0 * uniform(rng)).collect()
}

pub fn random_factor(rng: &mut ChaCha8Rng, scope: Vec<VarId>, domains: &Domains) -> Factor {
    let mut scope = scope;
    scope.sort_unstable();
    scope.dedup();
    let cards: Vec<usize> = scope.iter().map(|&v| domains.card(v)).collect();
    let len = cards.iter().product();
    Factor::new(scope, cards, random_table(rng, len)).unwrap()
}

/// Random factor graph with `n` variables of the given cardinalities and `m`
/// factors over 1 to `max_arity` distinct variables.
pub fn random_graph(seed: u64, cards: Vec<usize>, m: usize, max_arity: usize) -> FactorGraph {
    let mut r = rng(seed);
    let n = cards.len();
    let domains = Domains::new(cards).unwrap();
    let mut factors = Vec::new();
    for v in 0..n {
        factors.push(random_factor(&mut r, vec![VarId(v)], &domains));
    }
    for _ in 0..m {
        let k = 1 + below(&mut r, max_arity.min(n));
        let mut scope = Vec::new();
        while scope.len() < k {
            let v = VarId(below(&mut r, n));
            if !scope.contains(&v) {
                scope.push(v);
            }
        }
        factors.push(random_factor(&mut r, scope, &domains));
    }
    FactorGraph::new(domains, factors).unwrap()
}

/// Pairwise model with random tables on the given edges.
pub fn random_pairwise(seed: u64, n: usize, edges: &[(usize, usize)]) -> FactorGraph {
    let mut r = rng(seed);
    let domains = Domains::uniform(n, 2);
    let factors = edges
        .iter()
        .map(|&(a, b)| random_factor(&mut r, vec![VarId(a), VarId(b)], &domains))
        .collect();
    FactorGraph::new(domains, factors).unwrap()
}

pub fn grid_edges(h: usize, w: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
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
    e
}

pub fn cycle_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}

pub fn complete_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect()
}

pub fn tree_edges(seed: u64, n: usize) -> Vec<(usize, usize)> {
    let mut r = rng(seed);
    (1..n).map(|v| (below(&mut r, v), v)).collect()
}

/// Mixed small models: grids, cycles, trees, cliques, random hypergraphs and
/// non-binary domains. Each has at most 12 variables.
pub fn mixed_models(count: usize, base_seed: u64) -> Vec<(String, FactorGraph)> {
    (0..count as u64)
        .map(|k| {
            let seed = base_seed + k;
            match k % 6 {
                0 => {
                    let (h, w) = [(3, 3), (3, 4), (2, 6), (4, 3)][(k / 6) as usize % 4];
                    (
                        format!("grid{h}x{w}-{seed}"),
                        random_pairwise(seed, h * w, &grid_edges(h, w)),
                    )
                }
                1 => {
                    let n = 5 + (k as usize / 6) % 8;
                    (
                        format!("cycle{n}-{seed}"),
                        random_pairwise(seed, n, &cycle_edges(n)),
                    )
                }
                2 => {
                    let n = 6 + (k as usize / 6) % 7;
                    (
                        format!("tree{n}-{seed}"),
                        random_pairwise(seed, n, &tree_edges(seed, n)),
                    )
                }
                3 => {
                    let n = 4 + (k as usize / 6) % 5;
                    (
                        format!("clique{n}-{seed}"),
                        random_pairwise(seed, n, &complete_edges(n)),
                    )
                }
                4 => {
                    let n = 8 + (k as usize / 6) % 5;
                    (
                        format!("hyper{n}-{seed}"),
                        random_graph(seed, vec![2; n], n + 4, 3),
                    )
                }
                _ => {
                    let cards = vec![2, 3, 2, 3, 2, 2, 3];
                    (format!("ternary-{seed}"), random_graph(seed, cards, 9, 3))
                }
            }
        })
        .collect()
}
