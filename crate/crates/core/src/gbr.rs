//! Global-bucket renormalization.
//!
//! Starting from the model rewritten by MBR, every compensating pair is
//! re-fitted once, latest split first. For replicate `i^ℓ` the pair is
//! removed and the rest of the rewritten model is summed down to the
//! `(x_{i^ℓ}, x_i)` table `g`; the new pair is the leading left singular
//! vector of `g` with rows indexed by the replicate. The estimate is the exact
//! partition function of the rewritten model after all pairs are replaced.

use serde::{Deserialize, Serialize};

use crate::elimination::{
    bucket_elimination_capped, marginalize_subset_capped, LogPartition, DEFAULT_WIDTH_CAP,
};
use crate::error::{Error, Result};
use crate::factor::{Factor, FactorGraph, VarId};
use crate::lowrank::{rank1_truncate, Matrix};
use crate::mbr::{mbr_partition_function, RenormalizationTrace, ReplicateId};
use crate::ordering::EliminationOrder;

/// Table between a replicate and its base variable with every other variable
/// of the rewritten model summed out and the replicate's own pair removed.
#[derive(Clone, Debug)]
pub struct SkewedMarginal {
    pub base: VarId,
    pub replicate: ReplicateId,
    pub replicate_var: VarId,
    /// Rows: replicate value. Columns: base value. Max entry scaled to 1.
    pub g: Matrix,
}

#[derive(Clone, Debug)]
struct PairSlot {
    replicate: ReplicateId,
    replicate_var: VarId,
    replicate_factor: usize,
    base_factor: usize,
    values: Vec<f64>,
}

/// Outcome of re-fitting one compensating pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub replicate: ReplicateId,
    /// `‖g − r rᵀ g‖_F` for the pair being replaced.
    pub previous_residual: f64,
    /// `‖g − s sᵀ g‖_F` for the new pair.
    pub new_residual: f64,
    pub previous: Vec<f64>,
    pub updated: Vec<f64>,
}

/// The rewritten model with its current set of compensating pairs.
#[derive(Clone, Debug)]
pub struct GbrState {
    working_graph: FactorGraph,
    renorm_order: EliminationOrder,
    slots: Vec<PairSlot>,
    pending: Vec<ReplicateId>,
    width_cap: usize,
}

impl GbrState {
    pub fn from_trace(trace: &RenormalizationTrace) -> Self {
        Self::from_trace_capped(trace, DEFAULT_WIDTH_CAP)
    }

    pub fn from_trace_capped(trace: &RenormalizationTrace, width_cap: usize) -> Self {
        let slots: Vec<PairSlot> = trace
            .steps
            .iter()
            .map(|s| PairSlot {
                replicate: s.replicate,
                replicate_var: s.replicate_var,
                replicate_factor: s.replicate_factor,
                base_factor: s.base_factor,
                values: s.compensation.values.clone(),
            })
            .collect();
        let mut state = GbrState {
            working_graph: trace.final_graph.clone(),
            renorm_order: trace.renorm_order.clone(),
            slots,
            pending: Vec::new(),
            width_cap,
        };
        state.schedule_sweep();
        state
    }

    /// Queues every replicate once, in reverse order of the extended
    /// elimination order.
    pub fn schedule_sweep(&mut self) {
        let pos = self.renorm_order.positions(self.working_graph.num_vars());
        let mut reps: Vec<(usize, ReplicateId)> = self
            .slots
            .iter()
            .map(|s| {
                (
                    pos[s.replicate_var.0].expect("replicate in order"),
                    s.replicate,
                )
            })
            .collect();
        reps.sort_by_key(|&(p, _)| std::cmp::Reverse(p));
        self.pending = reps.into_iter().map(|(_, r)| r).collect();
    }

    pub fn working_graph(&self) -> &FactorGraph {
        &self.working_graph
    }

    pub fn renorm_order(&self) -> &EliminationOrder {
        &self.renorm_order
    }

    /// Replicates still to be updated in the current sweep, next first.
    pub fn pending(&self) -> &[ReplicateId] {
        &self.pending
    }

    pub fn compensation(&self, rep: ReplicateId) -> Option<&[f64]> {
        self.slot(rep).ok().map(|k| self.slots[k].values.as_slice())
    }

    fn slot(&self, rep: ReplicateId) -> Result<usize> {
        self.slots
            .iter()
            .position(|s| s.replicate == rep)
            .ok_or_else(|| Error::Config(format!("unknown replicate {rep:?}")))
    }

    pub fn compute_skewed_marginal(&self, rep: ReplicateId) -> Result<SkewedMarginal> {
        let slot = &self.slots[self.slot(rep)?];
        let factors: Vec<Factor> = self
            .working_graph
            .factors()
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != slot.replicate_factor && *k != slot.base_factor)
            .map(|(_, f)| f.clone())
            .collect();
        let reduced = self.working_graph.with_factors(factors)?;
        let keep = [rep.base, slot.replicate_var];
        let order = self.renorm_order.without(&keep);
        let joint = marginalize_subset_capped(&reduced, &keep, &order, self.width_cap)?;
        Ok(SkewedMarginal {
            base: rep.base,
            replicate: rep,
            replicate_var: slot.replicate_var,
            g: joint.matricize(slot.replicate_var)?.max_normalized(),
        })
    }

    /// Re-fits the pair of `rep` against its skewed marginal and installs it.
    pub fn update(&mut self, rep: ReplicateId) -> Result<UpdateRecord> {
        let k = self.slot(rep)?;
        let marginal = self.compute_skewed_marginal(rep)?;
        let s = rank1_truncate(&marginal.g)?.r;
        let slot = &mut self.slots[k];
        let previous = std::mem::replace(&mut slot.values, s.clone());
        let record = UpdateRecord {
            replicate: rep,
            previous_residual: marginal.g.projection_residual(&previous),
            new_residual: marginal.g.projection_residual(&s),
            previous,
            updated: s.clone(),
        };

        let (rf, bf) = (slot.replicate_factor, slot.base_factor);
        let (domains, mut factors) = self.working_graph.clone().into_parts();
        factors[rf] = factors[rf].with_table(s.clone())?;
        factors[bf] = factors[bf].with_table(s)?;
        self.working_graph = FactorGraph::new(domains, factors)?;
        self.pending.retain(|r| *r != rep);
        Ok(record)
    }

    /// Updates the next pending replicate, if any.
    pub fn step(&mut self) -> Result<Option<UpdateRecord>> {
        match self.pending.first().copied() {
            Some(rep) => self.update(rep).map(Some),
            None => Ok(None),
        }
    }

    /// Exact log10 Z of the working model along the extended order.
    pub fn partition_function(&self) -> Result<LogPartition> {
        bucket_elimination_capped(&self.working_graph, &self.renorm_order, self.width_cap)
    }
}

/// Functional form of [`GbrState::update`].
pub fn gbr_update(mut state: GbrState, rep: ReplicateId) -> Result<(GbrState, UpdateRecord)> {
    let record = state.update(rep)?;
    Ok((state, record))
}

#[derive(Copy, Clone, Debug)]
pub struct GbrOptions {
    /// Reverse sweeps over all replicates.
    pub sweeps: usize,
    pub width_cap: usize,
}

impl Default for GbrOptions {
    fn default() -> Self {
        GbrOptions {
            sweeps: 1,
            width_cap: DEFAULT_WIDTH_CAP,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GbrOutcome {
    pub log_z: LogPartition,
    pub mbr_log_z: LogPartition,
    pub updates: Vec<UpdateRecord>,
    pub state: GbrState,
}

/// GBR estimate of log10 Z with one reverse sweep.
pub fn gbr_partition_function(
    g: &FactorGraph,
    o: &EliminationOrder,
    ibound: usize,
) -> Result<LogPartition> {
    gbr_with_options(g, o, ibound, GbrOptions::default()).map(|out| out.log_z)
}

pub fn gbr_with_options(
    g: &FactorGraph,
    o: &EliminationOrder,
    ibound: usize,
    opts: GbrOptions,
) -> Result<GbrOutcome> {
    let (mbr_log_z, trace) = mbr_partition_function(g, o, ibound)?;
    gbr_from_trace(&trace, mbr_log_z, opts)
}

/// Runs the sweeps on an existing trace.
pub fn gbr_from_trace(
    trace: &RenormalizationTrace,
    mbr_log_z: LogPartition,
    opts: GbrOptions,
) -> Result<GbrOutcome> {
    let mut state = GbrState::from_trace_capped(trace, opts.width_cap);
    if trace.num_steps() == 0 {
        return Ok(GbrOutcome {
            log_z: mbr_log_z,
            mbr_log_z,
            updates: Vec::new(),
            state,
        });
    }
    let mut updates = Vec::new();
    for sweep in 0..opts.sweeps.max(1) {
        if sweep > 0 {
            state.schedule_sweep();
        }
        while let Some(rec) = state.step()? {
            updates.push(rec);
        }
    }
    Ok(GbrOutcome {
        log_z: state.partition_function()?,
        mbr_log_z,
        updates,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elimination::bucket_elimination;
    use crate::factor::Domains;

    fn v(i: usize) -> VarId {
        VarId(i)
    }

    fn star_with_tail() -> FactorGraph {
        // x0 connected to x1, x2, x3; x3 - x4.
        let t = |a: f64, b: f64, c: f64, d: f64| vec![a, b, c, d];
        let factors = vec![
            Factor::new(vec![v(0), v(1)], vec![2, 2], t(1.0, 0.4, 0.3, 2.0)).unwrap(),
            Factor::new(vec![v(0), v(2)], vec![2, 2], t(0.7, 1.3, 2.2, 0.5)).unwrap(),
            Factor::new(vec![v(0), v(3)], vec![2, 2], t(1.5, 0.2, 0.9, 1.1)).unwrap(),
            Factor::new(vec![v(3), v(4)], vec![2, 2], t(0.6, 1.9, 1.2, 0.8)).unwrap(),
            Factor::new(vec![v(1), v(2)], vec![2, 2], t(2.0, 0.5, 0.5, 2.0)).unwrap(),
        ];
        FactorGraph::new(Domains::uniform(5, 2), factors).unwrap()
    }

    #[test]
    fn no_replicates_means_exact() {
        let g = star_with_tail();
        let o = EliminationOrder::identity(5);
        let out = gbr_with_options(&g, &o, 4, GbrOptions::default()).unwrap();
        assert!(out.updates.is_empty());
        let exact = bucket_elimination(&g, &o).unwrap();
        assert_eq!(out.log_z, out.mbr_log_z);
        assert!((out.log_z.log10_z - exact.log10_z).abs() < 1e-9);
    }

    #[test]
    fn updates_run_in_reverse_order_and_keep_structure() {
        let g = star_with_tail();
        let o = EliminationOrder::identity(5);
        let (z_mbr, trace) = mbr_partition_function(&g, &o, 1).unwrap();
        assert!(trace.num_steps() > 0);
        let out = gbr_from_trace(&trace, z_mbr, GbrOptions::default()).unwrap();
        assert_eq!(out.updates.len(), trace.num_steps());
        let expected: Vec<ReplicateId> = trace.steps.iter().rev().map(|s| s.replicate).collect();
        let got: Vec<ReplicateId> = out.updates.iter().map(|u| u.replicate).collect();
        assert_eq!(got, expected);

        let before = trace.final_graph.factors();
        let after = out.state.working_graph().factors();
        assert_eq!(trace.final_graph.edges(), out.state.working_graph().edges());
        let pair_ids: Vec<usize> = trace
            .steps
            .iter()
            .flat_map(|s| [s.replicate_factor, s.base_factor])
            .collect();
        for (k, (a, b)) in before.iter().zip(after).enumerate() {
            if !pair_ids.contains(&k) {
                assert_eq!(a, b);
            }
        }
        for u in &out.updates {
            assert!(u.new_residual <= u.previous_residual + 1e-12);
        }
    }

    #[test]
    fn fixed_point_when_pair_is_already_optimal() {
        let g = star_with_tail();
        let o = EliminationOrder::identity(5);
        let (_, trace) = mbr_partition_function(&g, &o, 1).unwrap();
        let mut state = GbrState::from_trace(&trace);
        let rep = state.pending()[0];
        state.update(rep).unwrap();
        let z1 = state.partition_function().unwrap();
        let installed = state.compensation(rep).unwrap().to_vec();
        let again = state.update(rep).unwrap();
        for (a, b) in again.updated.iter().zip(&installed) {
            assert!((a - b).abs() < 1e-10);
        }
        let z2 = state.partition_function().unwrap();
        assert!((z1.log10_z - z2.log10_z).abs() < 1e-10);
    }

    #[test]
    fn disconnected_replicate_gives_rank_one_marginal() {
        // Bucket of x0 = {f01, f02} with ibound 1: splits into two groups. With
        // no other path from x1 to x2, removing the pair disconnects the
        // replicate side from the base side.
        let factors = vec![
            Factor::new(vec![v(0), v(1)], vec![2, 2], vec![1.0, 0.2, 0.5, 3.0]).unwrap(),
            Factor::new(vec![v(0), v(2)], vec![2, 2], vec![0.4, 1.0, 2.5, 0.7]).unwrap(),
        ];
        let g = FactorGraph::new(Domains::uniform(3, 2), factors).unwrap();
        let o = EliminationOrder::identity(3);
        let (_, trace) = mbr_partition_function(&g, &o, 1).unwrap();
        assert_eq!(trace.num_steps(), 1);
        let mut state = GbrState::from_trace(&trace);
        let rep = trace.steps[0].replicate;
        let sk = state.compute_skewed_marginal(rep).unwrap();
        let res = rank1_truncate(&sk.g).unwrap();
        assert!(sk.g.projection_residual(&res.r) <= 1e-10);
        let rec = state.update(rep).unwrap();
        assert!(rec.new_residual <= 1e-10);
    }

    #[test]
    fn unknown_replicate_is_an_error() {
        let g = star_with_tail();
        let (_, trace) = mbr_partition_function(&g, &EliminationOrder::identity(5), 1).unwrap();
        let state = GbrState::from_trace(&trace);
        let bogus = ReplicateId {
            base: v(4),
            index: 9,
        };
        assert!(state.compute_skewed_marginal(bogus).is_err());
    }
}
