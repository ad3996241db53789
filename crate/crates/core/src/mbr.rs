//! Mini-bucket renormalization.
//!
//! Each bucket is split into mini-buckets as in mini-bucket elimination, but
//! instead of bounding the split-off mini-buckets with `max`/`min`, the bucket
//! variable is replaced inside the mini-bucket by a fresh replicate variable
//! and a pair of unary compensating factors (one on the replicate, one on the
//! original variable) is attached. Both factors carry the leading left
//! singular vector of the mini-bucket product matricized on the bucket
//! variable, which minimizes the Frobenius error of the rewritten mini-bucket.
//!
//! While eliminating, the run also records the rewritten model: every original
//! factor, relabeled onto whichever replicate absorbed it, plus all
//! compensating factors. Exact elimination of that model along the extended
//! order (replicates of a variable, then the variable itself) reproduces the
//! estimate, which is what [`verify_trace`] checks.

use serde::{Deserialize, Serialize};

use crate::elimination::{
    bucket_elimination, first_fit_groups, Buckets, LogPartition, ScalarAccumulator,
};
use crate::error::{Error, Result};
use crate::factor::{Domains, Factor, FactorGraph, Reduce, VarId};
use crate::lowrank::{rank1_truncate, Rank1Result};
use crate::ordering::EliminationOrder;

/// Replicate `index` (1-based) of variable `base`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReplicateId {
    pub base: VarId,
    pub index: usize,
}

/// The two compensating factors attached when a mini-bucket is renormalized.
/// They always share one vector, so only one is stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompensationPair {
    pub bucket_variable: VarId,
    pub replicate_index: usize,
    pub values: Vec<f64>,
}

/// Which part of the rewritten model a derived factor summarizes: the vertices
/// and hyper-edges it spans, and the indices of the model factors it is the
/// marginal of.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeRecord {
    pub vertices: Vec<VarId>,
    pub edges: Vec<Vec<VarId>>,
    pub factors: Vec<usize>,
}

impl ScopeRecord {
    fn from_leaves(leaves: &[Factor], ids: &[usize], extra_vertex: Option<VarId>) -> Self {
        let mut vertices: Vec<VarId> = ids
            .iter()
            .flat_map(|&k| leaves[k].scope().iter().copied())
            .chain(extra_vertex)
            .collect();
        vertices.sort_unstable();
        vertices.dedup();
        let mut edges: Vec<Vec<VarId>> = ids.iter().map(|&k| leaves[k].scope().to_vec()).collect();
        edges.sort();
        edges.dedup();
        let mut factors = ids.to_vec();
        factors.sort_unstable();
        ScopeRecord {
            vertices,
            edges,
            factors,
        }
    }
}

/// One mini-bucket renormalization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RenormStep {
    pub replicate: ReplicateId,
    /// Variable id allocated for the replicate.
    pub replicate_var: VarId,
    pub compensation: CompensationPair,
    /// Index in the final model of the compensating factor on the replicate.
    pub replicate_factor: usize,
    /// Index in the final model of the compensating factor on the base variable.
    pub base_factor: usize,
    /// Scope of the factor produced by summing out the replicate.
    pub scope: ScopeRecord,
    /// `‖M − r rᵀ M‖_F / ‖M‖_F` for the mini-bucket matrix `M`.
    pub relative_residual: f64,
}

/// Record of an MBR run as a sequence of model rewrites.
#[derive(Clone, Debug)]
pub struct RenormalizationTrace {
    pub steps: Vec<RenormStep>,
    /// Original model with every replicate split applied and all compensating
    /// factors added.
    pub final_graph: FactorGraph,
    /// Replicates of each variable, then the variable, along the input order.
    pub renorm_order: EliminationOrder,
    /// Scope records of every factor generated during elimination, in
    /// creation order.
    pub scopes: Vec<ScopeRecord>,
    pub original_vars: usize,
    pub ibound: usize,
}

impl RenormalizationTrace {
    /// Number of renormalizations `T`.
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn step_of(&self, rep: ReplicateId) -> Option<&RenormStep> {
        self.steps.iter().find(|s| s.replicate == rep)
    }

    /// Replicate count per original variable.
    pub fn replicate_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.original_vars];
        for s in &self.steps {
            counts[s.replicate.base.0] += 1;
        }
        counts
    }

    /// The model after the first `t` renormalizations (`t = 0` is the input,
    /// `t = T` is [`Self::final_graph`]). Later splits are undone by mapping
    /// their replicates back onto the base variable and dropping their
    /// compensating factors.
    pub fn intermediate_graph(&self, t: usize) -> Result<FactorGraph> {
        if t > self.steps.len() {
            return Err(Error::Config(format!(
                "trace has {} steps, asked for {t}",
                self.steps.len()
            )));
        }
        let dropped: Vec<usize> = self.steps[t..]
            .iter()
            .flat_map(|s| [s.replicate_factor, s.base_factor])
            .collect();
        let undo: Vec<(VarId, VarId)> = self.steps[t..]
            .iter()
            .map(|s| (s.replicate_var, s.replicate.base))
            .collect();
        let mut factors = Vec::new();
        for (k, f) in self.final_graph.factors().iter().enumerate() {
            if dropped.contains(&k) {
                continue;
            }
            let mut f = f.clone();
            for &(rep, base) in &undo {
                if f.contains(rep) {
                    f = f.relabel(rep, base)?;
                }
            }
            factors.push(f);
        }
        let keep = self.original_vars + t;
        let domains = Domains::new(self.final_graph.domains().cards()[..keep].to_vec())?;
        FactorGraph::new(domains, factors)
    }
}

/// Compensation vector for a mini-bucket product: the leading left singular
/// vector of the product matricized on `var`.
pub fn compensation_vector(product: &Factor, var: VarId) -> Result<Rank1Result> {
    rank1_truncate(&product.matricize(var)?)
}

/// Renormalizes one mini-bucket: every member has `var` renamed to
/// `replicate_var`, and the compensating factors on `replicate_var` and `var`
/// are appended (in that order).
pub fn compensate_minibucket(
    group: &[Factor],
    var: VarId,
    replicate_var: VarId,
    replicate_index: usize,
) -> Result<(Vec<Factor>, CompensationPair)> {
    if let Some(f) = group.iter().find(|f| !f.contains(var)) {
        return Err(Error::InvalidFactor(format!(
            "mini-bucket member over {:?} does not mention {var}",
            f.scope()
        )));
    }
    let product = Factor::product(group)?;
    let rank1 = compensation_vector(&product, var)?;
    let mut renormalized = group
        .iter()
        .map(|f| f.relabel(var, replicate_var))
        .collect::<Result<Vec<_>>>()?;
    renormalized.push(Factor::unary(replicate_var, rank1.r.clone())?);
    renormalized.push(Factor::unary(var, rank1.r.clone())?);
    Ok((
        renormalized,
        CompensationPair {
            bucket_variable: var,
            replicate_index,
            values: rank1.r,
        },
    ))
}

struct Active {
    factor: Factor,
    leaves: Vec<usize>,
}

/// MBR estimate of log10 Z along `o`, with the renormalization trace.
pub fn mbr_partition_function(
    g: &FactorGraph,
    o: &EliminationOrder,
    ibound: usize,
) -> Result<(LogPartition, RenormalizationTrace)> {
    let n = g.num_vars();
    let o = EliminationOrder::new(o.as_slice().to_vec(), n)?;
    if let Some(f) = g.factors().iter().find(|f| f.scope().len() > ibound + 1) {
        return Err(Error::FactorExceedsIbound {
            scope: f.scope().len(),
            ibound,
        });
    }

    let mut domains = g.domains().clone();
    let mut leaves: Vec<Factor> = g.factors().to_vec();
    let mut buckets: Buckets<Active> = Buckets::new(&o, n);
    let mut scalar = ScalarAccumulator::default();
    for (k, f) in g.factors().iter().enumerate() {
        if f.scope().is_empty() {
            scalar.absorb(f);
        } else {
            buckets.place(
                f.scope(),
                Active {
                    factor: f.clone(),
                    leaves: vec![k],
                },
            );
        }
    }

    let mut steps = Vec::new();
    let mut scopes = Vec::new();
    let mut renorm_order = Vec::with_capacity(n);
    let emit = |msg: Active, buckets: &mut Buckets<Active>, scalar: &mut ScalarAccumulator| {
        if msg.factor.scope().is_empty() {
            scalar.absorb(&msg.factor);
        } else {
            let scope = msg.factor.scope().to_vec();
            buckets.place(&scope, msg);
        }
    };

    for (pos, var) in o.iter().enumerate() {
        let members = buckets.take(pos);
        if members.is_empty() {
            scalar.add_log10((domains.card(var) as f64).log10());
            renorm_order.push(var);
            continue;
        }
        let scope_refs: Vec<&[VarId]> = members.iter().map(|a| a.factor.scope()).collect();
        let groups = first_fit_groups(&scope_refs, ibound)?;
        let mut members: Vec<Option<Active>> = members.into_iter().map(Some).collect();
        let m = groups.len();

        let mut base_factors: Vec<Factor> = Vec::with_capacity(m - 1);
        let mut base_leaves: Vec<usize> = Vec::with_capacity(m - 1);
        for (l, group) in groups.iter().enumerate().take(m - 1) {
            let group: Vec<Active> = group.iter().map(|&k| members[k].take().unwrap()).collect();
            let product = Factor::product(group.iter().map(|a| &a.factor))?;
            let matrix = product.matricize(var)?;
            let rank1 = rank1_truncate(&matrix)?;
            let norm = matrix.frobenius();
            let relative_residual = if norm > 0.0 {
                matrix.projection_residual(&rank1.r) / norm
            } else {
                0.0
            };

            let replicate = ReplicateId {
                base: var,
                index: l + 1,
            };
            let replicate_var = domains.push(domains.card(var));
            let mut group_leaves: Vec<usize> =
                group.iter().flat_map(|a| a.leaves.clone()).collect();
            for &k in &group_leaves {
                if leaves[k].contains(var) {
                    leaves[k] = leaves[k].relabel(var, replicate_var)?;
                }
            }
            let replicate_factor = leaves.len();
            leaves.push(Factor::unary(replicate_var, rank1.r.clone())?);
            let base_factor = leaves.len();
            let on_base = Factor::unary(var, rank1.r.clone())?;
            leaves.push(on_base.clone());

            let message = Factor::product([&product, &on_base])?.marginalize(var, Reduce::Sum)?;
            group_leaves.push(replicate_factor);
            let scope = ScopeRecord::from_leaves(&leaves, &group_leaves, None);
            scopes.push(scope.clone());
            steps.push(RenormStep {
                replicate,
                replicate_var,
                compensation: CompensationPair {
                    bucket_variable: var,
                    replicate_index: l + 1,
                    values: rank1.r,
                },
                replicate_factor,
                base_factor,
                scope,
                relative_residual,
            });
            renorm_order.push(replicate_var);
            base_factors.push(on_base);
            base_leaves.push(base_factor);
            emit(
                Active {
                    factor: message,
                    leaves: group_leaves,
                },
                &mut buckets,
                &mut scalar,
            );
        }

        let last: Vec<Active> = groups[m - 1]
            .iter()
            .map(|&k| members[k].take().unwrap())
            .collect();
        let product = Factor::product(last.iter().map(|a| &a.factor).chain(&base_factors))?;
        let message = product.marginalize(var, Reduce::Sum)?;
        let mut last_leaves: Vec<usize> = last.iter().flat_map(|a| a.leaves.clone()).collect();
        last_leaves.extend(base_leaves);
        scopes.push(ScopeRecord::from_leaves(&leaves, &last_leaves, Some(var)));
        renorm_order.push(var);
        emit(
            Active {
                factor: message,
                leaves: last_leaves,
            },
            &mut buckets,
            &mut scalar,
        );
    }

    let total = domains.len();
    let final_graph = FactorGraph::new(domains, leaves)?;
    let renorm_order = EliminationOrder::new(renorm_order, total)?;
    Ok((
        LogPartition::new(scalar.log10()),
        RenormalizationTrace {
            steps,
            final_graph,
            renorm_order,
            scopes,
            original_vars: n,
            ibound,
        },
    ))
}

/// Exact log10 Z of the trace's final model along the extended order.
pub fn verify_trace(trace: &RenormalizationTrace) -> Result<LogPartition> {
    bucket_elimination(&trace.final_graph, &trace.renorm_order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elimination::bucket_elimination;
    use crate::factor::Domains;
    use crate::ordering::induced_width;

    fn v(i: usize) -> VarId {
        VarId(i)
    }

    fn complete_pairwise(n: usize, seed: u64) -> FactorGraph {
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            0.1 + (state % 1000) as f64 / 500.0
        };
        let mut factors = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let t = (0..4).map(|_| next()).collect();
                factors.push(Factor::new(vec![v(a), v(b)], vec![2, 2], t).unwrap());
            }
        }
        FactorGraph::new(Domains::uniform(n, 2), factors).unwrap()
    }

    #[test]
    fn rank_one_minibucket_is_exact() {
        // f(xi, xj) = a(xi) b(xj) with xi = x0.
        let a = [0.3, 1.7, 0.9];
        let b = [2.0, 0.5];
        let t: Vec<f64> = a
            .iter()
            .flat_map(|p| b.iter().map(move |q| p * q))
            .collect();
        let f = Factor::new(vec![v(0), v(1)], vec![3, 2], t).unwrap();
        let (renorm, pair) =
            compensate_minibucket(std::slice::from_ref(&f), v(0), v(5), 1).unwrap();
        assert_eq!(renorm.len(), 3);
        // f̃(x0, x1) = r(x0) Σ_y r(y) f(y, x1)
        let r = &pair.values;
        for x0 in 0..3 {
            for x1 in 0..2 {
                let s: f64 = (0..3).map(|y| r[y] * f.table()[y * 2 + x1]).sum();
                let approx = r[x0] * s;
                let exact = f.table()[x0 * 2 + x1];
                assert!((approx - exact).abs() <= 1e-10 * exact);
            }
        }
    }

    #[test]
    fn identity_minibucket_residual() {
        let f = Factor::new(vec![v(0), v(1)], vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let (_, pair) = compensate_minibucket(std::slice::from_ref(&f), v(0), v(2), 1).unwrap();
        let h = 0.5f64.sqrt();
        assert!((pair.values[0] - h).abs() < 1e-15 && (pair.values[1] - h).abs() < 1e-15);
        // ‖I − r rᵀ‖_F = 1 for any unit r in the plane.
        let residual = f.matricize(v(0)).unwrap().projection_residual(&pair.values);
        assert!((residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_minibucket() {
        let f = Factor::new(vec![v(0), v(1)], vec![3, 2], vec![0.0; 6]).unwrap();
        let (renorm, pair) = compensate_minibucket(&[f], v(0), v(2), 1).unwrap();
        assert_eq!(pair.values, vec![1.0, 0.0, 0.0]);
        let p = Factor::product(&renorm).unwrap();
        assert!(p.table().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn member_without_bucket_variable_rejected() {
        let f = Factor::unary(v(1), vec![1.0, 1.0]).unwrap();
        assert!(compensate_minibucket(&[f], v(0), v(2), 1).is_err());
    }

    #[test]
    fn no_split_equals_exact() {
        let g = complete_pairwise(5, 3);
        let o = EliminationOrder::identity(5);
        let (z, trace) = mbr_partition_function(&g, &o, 4).unwrap();
        assert_eq!(trace.num_steps(), 0);
        let exact = bucket_elimination(&g, &o).unwrap();
        assert!((z.log10_z - exact.log10_z).abs() < 1e-9);
        assert!((verify_trace(&trace).unwrap().log10_z - exact.log10_z).abs() < 1e-9);
    }

    #[test]
    fn complete_six_renormalized_order() {
        let g = complete_pairwise(6, 11);
        let (z, trace) = mbr_partition_function(&g, &EliminationOrder::identity(6), 2).unwrap();
        assert_eq!(trace.replicate_counts(), vec![2, 1, 1, 0, 0, 0]);
        let shape: Vec<String> = trace
            .renorm_order
            .iter()
            .map(
                |x| match trace.steps.iter().find(|s| s.replicate_var == x) {
                    Some(s) => format!("{}^{}", s.replicate.base.0 + 1, s.replicate.index),
                    None => format!("{}", x.0 + 1),
                },
            )
            .collect();
        assert_eq!(
            shape,
            ["1^1", "1^2", "1", "2^1", "2", "3^1", "3", "4", "5", "6"]
        );
        let w = induced_width(&trace.final_graph, &trace.renorm_order).unwrap();
        assert!(w <= 3);
        let check = verify_trace(&trace).unwrap();
        assert!((check.log10_z - z.log10_z).abs() < 1e-9);
    }

    #[test]
    fn intermediate_graphs_bracket_the_run() {
        let g = complete_pairwise(6, 5);
        let o = EliminationOrder::identity(6);
        let (z, trace) = mbr_partition_function(&g, &o, 2).unwrap();
        let first = trace.intermediate_graph(0).unwrap();
        assert_eq!(first.num_vars(), 6);
        let exact = bucket_elimination(&g, &o).unwrap();
        let z0 = bucket_elimination(&first, &o).unwrap();
        assert!((z0.log10_z - exact.log10_z).abs() < 1e-12);
        let last = trace.intermediate_graph(trace.num_steps()).unwrap();
        assert_eq!(last, trace.final_graph);
        let zt = bucket_elimination(&last, &trace.renorm_order).unwrap();
        assert!((zt.log10_z - z.log10_z).abs() < 1e-9);
    }

    #[test]
    fn scope_records_cover_all_model_factors() {
        let g = complete_pairwise(6, 2);
        let (_, trace) = mbr_partition_function(&g, &EliminationOrder::identity(6), 2).unwrap();
        // Every final-model factor is summarized by exactly one top-level
        // derived factor; the last record's factor set is the whole model when
        // the elimination ends in a single chain.
        let mut seen = vec![0usize; trace.final_graph.factors().len()];
        for s in &trace.steps {
            assert!(s.scope.factors.contains(&s.replicate_factor));
            assert!(!s.scope.factors.contains(&s.base_factor));
            assert!(s.scope.vertices.contains(&s.replicate_var));
            assert!(!s.scope.vertices.contains(&s.replicate.base));
        }
        let last = trace.scopes.last().unwrap();
        for &k in &last.factors {
            seen[k] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}
