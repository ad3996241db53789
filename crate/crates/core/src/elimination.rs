//! Exact bucket elimination, summation over variable subsets, and mini-bucket
//! bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{Factor, FactorGraph, Reduce, VarId};
use crate::ordering::EliminationOrder;

/// Buckets wider than this are refused unless the caller raises the cap.
pub const DEFAULT_WIDTH_CAP: usize = 25;

/// Environment variable overriding [`DEFAULT_WIDTH_CAP`].
pub const WIDTH_CAP_ENV: &str = "BUCKETFORGE_WIDTH_CAP";

/// Width cap from the environment, falling back to the default.
pub fn width_cap_from_env() -> usize {
    std::env::var(WIDTH_CAP_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_WIDTH_CAP)
}

/// Base-10 logarithm of a partition function. `-inf` means zero mass.
#[derive(Copy, Clone, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogPartition {
    pub log10_z: f64,
}

impl LogPartition {
    pub fn new(log10_z: f64) -> Self {
        LogPartition { log10_z }
    }

    /// `|log10 Z − log10 Ẑ|`.
    pub fn error_vs(&self, exact: LogPartition) -> f64 {
        if self.log10_z == exact.log10_z {
            0.0
        } else {
            (self.log10_z - exact.log10_z).abs()
        }
    }
}

/// All current factors mentioning `variable` when it is eliminated.
#[derive(Clone, Debug)]
pub struct Bucket {
    pub variable: VarId,
    pub members: Vec<Factor>,
}

#[derive(Clone, Debug)]
pub struct MiniBucketPartition {
    pub variable: VarId,
    pub groups: Vec<Vec<Factor>>,
    pub ibound: usize,
}

impl MiniBucketPartition {
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BoundMode {
    Upper,
    Lower,
}

/// Factors filed by the earliest of their variables along an order. Factors
/// touching no ordered variable land in `rest`.
pub(crate) struct Buckets<T> {
    pos: Vec<Option<usize>>,
    pub(crate) slots: Vec<Vec<T>>,
    pub(crate) rest: Vec<T>,
}

impl<T> Buckets<T> {
    pub(crate) fn new(order: &EliminationOrder, n: usize) -> Self {
        Buckets {
            pos: order.positions(n),
            slots: (0..order.len()).map(|_| Vec::new()).collect(),
            rest: Vec::new(),
        }
    }

    pub(crate) fn place(&mut self, scope: &[VarId], item: T) {
        match self.slot_of(scope) {
            Some(p) => self.slots[p].push(item),
            None => self.rest.push(item),
        }
    }

    fn slot_of(&self, scope: &[VarId]) -> Option<usize> {
        scope.iter().filter_map(|v| self.pos[v.0]).min()
    }

    pub(crate) fn take(&mut self, step: usize) -> Vec<T> {
        std::mem::take(&mut self.slots[step])
    }
}

impl Buckets<Factor> {
    pub(crate) fn place_factor(&mut self, f: Factor) {
        match self.slot_of(f.scope()) {
            Some(p) => self.slots[p].push(f),
            None => self.rest.push(f),
        }
    }
}

/// Running log10 of the scalars split off during elimination.
#[derive(Copy, Clone, Debug, Default)]
pub(crate) struct ScalarAccumulator {
    log10: f64,
}

impl ScalarAccumulator {
    pub(crate) fn add_log10(&mut self, l: f64) {
        self.log10 += l;
    }

    pub(crate) fn absorb(&mut self, f: &Factor) {
        debug_assert!(f.scope().is_empty());
        self.log10 += f.log10_total();
    }

    pub(crate) fn log10(&self) -> f64 {
        self.log10
    }

    pub(crate) fn as_factor(&self) -> Factor {
        if self.log10 == f64::NEG_INFINITY {
            Factor::scalar(0.0)
        } else {
            Factor::scalar(1.0).with_log_scale(self.log10)
        }
    }
}

fn scope_union_len<'a, I: IntoIterator<Item = &'a Factor>>(factors: I) -> usize {
    let mut vars: Vec<VarId> = factors
        .into_iter()
        .flat_map(|f| f.scope().iter().copied())
        .collect();
    vars.sort_unstable();
    vars.dedup();
    vars.len()
}

/// Sums out every variable of `order` from `factors`; returns the factors left
/// over (none mention an ordered variable) and the accumulated scalar.
fn eliminate_along(
    g: &FactorGraph,
    factors: Vec<Factor>,
    order: &EliminationOrder,
    width_cap: usize,
) -> Result<(Vec<Factor>, ScalarAccumulator)> {
    let mut buckets = Buckets::new(order, g.num_vars());
    let mut scalar = ScalarAccumulator::default();
    for f in factors {
        if f.scope().is_empty() {
            scalar.absorb(&f);
        } else {
            buckets.place_factor(f);
        }
    }
    for (step, var) in order.iter().enumerate() {
        let bucket = buckets.take(step);
        if bucket.is_empty() {
            scalar.add_log10((g.domains().card(var) as f64).log10());
            continue;
        }
        let width = scope_union_len(&bucket);
        if width > width_cap {
            return Err(Error::ModelTooWide {
                width,
                cap: width_cap,
            });
        }
        let message = Factor::product(&bucket)?.marginalize(var, Reduce::Sum)?;
        if message.scope().is_empty() {
            scalar.absorb(&message);
        } else {
            buckets.place_factor(message);
        }
    }
    Ok((buckets.rest, scalar))
}

/// Exact log10 Z by bucket elimination, with the default width cap.
pub fn bucket_elimination(g: &FactorGraph, o: &EliminationOrder) -> Result<LogPartition> {
    bucket_elimination_capped(g, o, DEFAULT_WIDTH_CAP)
}

pub fn bucket_elimination_capped(
    g: &FactorGraph,
    o: &EliminationOrder,
    width_cap: usize,
) -> Result<LogPartition> {
    let o = EliminationOrder::new(o.as_slice().to_vec(), g.num_vars())?;
    let (rest, scalar) = eliminate_along(g, g.factors().to_vec(), &o, width_cap)?;
    debug_assert!(rest.is_empty());
    Ok(LogPartition::new(scalar.log10()))
}

/// Sums every variable outside `keep` along `o_rest` and returns the factor on
/// `keep` (sorted scope, all of `keep` present).
pub fn marginalize_subset(
    g: &FactorGraph,
    keep: &[VarId],
    o_rest: &EliminationOrder,
) -> Result<Factor> {
    marginalize_subset_capped(g, keep, o_rest, DEFAULT_WIDTH_CAP)
}

pub fn marginalize_subset_capped(
    g: &FactorGraph,
    keep: &[VarId],
    o_rest: &EliminationOrder,
    width_cap: usize,
) -> Result<Factor> {
    let n = g.num_vars();
    let mut role = vec![0u8; n];
    for v in keep {
        if v.0 >= n {
            return Err(Error::UnknownVariable { var: *v, n });
        }
        if std::mem::replace(&mut role[v.0], 1) != 0 {
            return Err(Error::InvalidOrder(format!("{v} kept twice")));
        }
    }
    for v in o_rest.iter() {
        if v.0 >= n {
            return Err(Error::UnknownVariable { var: v, n });
        }
        match std::mem::replace(&mut role[v.0], 2) {
            0 => {}
            1 => {
                return Err(Error::InvalidOrder(format!(
                    "{v} is both kept and eliminated"
                )))
            }
            _ => return Err(Error::InvalidOrder(format!("{v} eliminated twice"))),
        }
    }
    if let Some(missing) = role.iter().position(|&r| r == 0) {
        return Err(Error::InvalidOrder(format!(
            "{} is neither kept nor eliminated",
            VarId(missing)
        )));
    }

    let (rest, scalar) = eliminate_along(g, g.factors().to_vec(), o_rest, width_cap)?;
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    let cards = keep_sorted.iter().map(|&v| g.domains().card(v)).collect();
    let frame = Factor::ones(keep_sorted, cards);
    let scalar = scalar.as_factor();
    Factor::product(rest.iter().chain([&frame, &scalar]))
}

/// First-fit decreasing grouping of scopes so every group's union has at most
/// `ibound + 1` variables. Returns indices into `scopes`.
pub(crate) fn first_fit_groups(scopes: &[&[VarId]], ibound: usize) -> Result<Vec<Vec<usize>>> {
    if ibound == 0 {
        return Err(Error::Config("ibound must be at least 1".into()));
    }
    let limit = ibound + 1;
    if let Some(s) = scopes.iter().find(|s| s.len() > limit) {
        return Err(Error::FactorExceedsIbound {
            scope: s.len(),
            ibound,
        });
    }
    let mut idx: Vec<usize> = (0..scopes.len()).collect();
    idx.sort_by(|&a, &b| {
        scopes[b]
            .len()
            .cmp(&scopes[a].len())
            .then_with(|| scopes[a].cmp(scopes[b]))
    });

    let mut groups: Vec<(Vec<usize>, Vec<VarId>)> = Vec::new();
    for k in idx {
        let fits = groups.iter_mut().find(|(_, union)| {
            let extra = scopes[k]
                .iter()
                .filter(|v| union.binary_search(v).is_err())
                .count();
            union.len() + extra <= limit
        });
        match fits {
            Some((members, union)) => {
                members.push(k);
                for v in scopes[k] {
                    if let Err(p) = union.binary_search(v) {
                        union.insert(p, *v);
                    }
                }
            }
            None => groups.push((vec![k], scopes[k].to_vec())),
        }
    }
    Ok(groups.into_iter().map(|(m, _)| m).collect())
}

/// Splits a bucket into mini-buckets of at most `ibound + 1` variables.
pub fn partition_bucket(b: &Bucket, ibound: usize) -> Result<MiniBucketPartition> {
    let scopes: Vec<&[VarId]> = b.members.iter().map(|f| f.scope()).collect();
    let groups = first_fit_groups(&scopes, ibound)?
        .into_iter()
        .map(|g| g.into_iter().map(|k| b.members[k].clone()).collect())
        .collect();
    Ok(MiniBucketPartition {
        variable: b.variable,
        groups,
        ibound,
    })
}

/// Mini-bucket bound on log10 Z: all but the last mini-bucket are maximized
/// (upper) or minimized (lower) over the bucket variable, the last is summed.
pub fn mini_bucket_elimination(
    g: &FactorGraph,
    o: &EliminationOrder,
    ibound: usize,
    mode: BoundMode,
) -> Result<LogPartition> {
    mini_bucket_elimination_with_splits(g, o, ibound, mode).map(|(z, _)| z)
}

/// As [`mini_bucket_elimination`], also returning how many extra mini-buckets
/// were opened in total (zero means the run was exact).
pub fn mini_bucket_elimination_with_splits(
    g: &FactorGraph,
    o: &EliminationOrder,
    ibound: usize,
    mode: BoundMode,
) -> Result<(LogPartition, usize)> {
    let o = EliminationOrder::new(o.as_slice().to_vec(), g.num_vars())?;
    let reduce = match mode {
        BoundMode::Upper => Reduce::Max,
        BoundMode::Lower => Reduce::Min,
    };
    let mut buckets = Buckets::new(&o, g.num_vars());
    let mut scalar = ScalarAccumulator::default();
    for f in g.factors() {
        if f.scope().is_empty() {
            scalar.absorb(f);
        } else {
            buckets.place(f.scope(), f.clone());
        }
    }
    let mut splits = 0;
    for (step, var) in o.iter().enumerate() {
        let members = buckets.take(step);
        if members.is_empty() {
            scalar.add_log10((g.domains().card(var) as f64).log10());
            continue;
        }
        let partition = partition_bucket(
            &Bucket {
                variable: var,
                members,
            },
            ibound,
        )?;
        let m = partition.num_groups();
        splits += m - 1;
        for (l, group) in partition.groups.iter().enumerate() {
            let mode = if l + 1 == m { Reduce::Sum } else { reduce };
            let message = Factor::product(group)?.marginalize(var, mode)?;
            if message.scope().is_empty() {
                scalar.absorb(&message);
            } else {
                buckets.place_factor(message);
            }
        }
    }
    Ok((LogPartition::new(scalar.log10()), splits))
}
