//! Dense factors over discrete variables and the factor graphs built from them.
//!
//! A [`Factor`] stores a row-major table over a scope that is always sorted by
//! [`VarId`]. The table is kept at unit scale: every product and marginal
//! divides out the largest entry and folds it into a base-10 `log_scale`, so
//! models whose partition function lies far outside `f64` range still
//! eliminate cleanly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lowrank::Matrix;

/// Index of a variable in its owning model.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

impl From<usize> for VarId {
    fn from(i: usize) -> Self {
        VarId(i)
    }
}

/// Cardinalities of every variable in a model.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Domains {
    cards: Vec<usize>,
}

impl Domains {
    pub fn new(cards: Vec<usize>) -> Result<Self> {
        if let Some(pos) = cards.iter().position(|&c| c == 0) {
            return Err(Error::InvalidFactor(format!(
                "variable {} has cardinality 0",
                VarId(pos)
            )));
        }
        Ok(Domains { cards })
    }

    /// `n` variables of cardinality `card`.
    pub fn uniform(n: usize, card: usize) -> Self {
        assert!(card >= 1, "cardinality must be positive");
        Domains {
            cards: vec![card; n],
        }
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn card(&self, v: VarId) -> usize {
        self.cards[v.0]
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    /// Appends a fresh variable and returns its id.
    pub fn push(&mut self, card: usize) -> VarId {
        assert!(card >= 1, "cardinality must be positive");
        self.cards.push(card);
        VarId(self.cards.len() - 1)
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.cards.len()).map(VarId)
    }

    /// log2 of the number of joint configurations.
    pub fn state_space_bits(&self) -> f64 {
        self.cards.iter().map(|&c| (c as f64).log2()).sum()
    }
}

/// Reduction applied when a variable is eliminated from a factor.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Max,
    Min,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    table: Vec<f64>,
    log_scale: f64,
}

impl Factor {
    /// Builds a factor from a scope given in any order together with a table
    /// laid out row-major over that order. The stored factor is re-laid over
    /// the sorted scope.
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(Error::InvalidFactor(format!(
                "scope has {} variables but {} cardinalities were given",
                scope.len(),
                cards.len()
            )));
        }
        if cards.contains(&0) {
            return Err(Error::InvalidFactor("zero cardinality in scope".into()));
        }
        let expected: usize = cards.iter().product();
        if table.len() != expected {
            return Err(Error::InvalidFactor(format!(
                "table has {} entries, scope requires {}",
                table.len(),
                expected
            )));
        }
        if let Some(bad) = table.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidFactor(format!(
                "table entry {bad} is negative or non-finite"
            )));
        }
        let mut sorted = scope.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidFactor("duplicate variable in scope".into()));
        }
        if sorted == scope {
            return Ok(Factor {
                scope,
                cards,
                table,
                log_scale: 0.0,
            });
        }
        let (scope, cards, table) = reorder(&scope, &cards, &table, &sorted);
        Ok(Factor {
            scope,
            cards,
            table,
            log_scale: 0.0,
        })
    }

    /// Scalar factor with the given linear value.
    pub fn scalar(value: f64) -> Self {
        Factor {
            scope: Vec::new(),
            cards: Vec::new(),
            table: vec![value],
            log_scale: 0.0,
        }
    }

    /// Constant-one factor over a sorted scope.
    pub fn ones(scope: Vec<VarId>, cards: Vec<usize>) -> Self {
        debug_assert!(scope.windows(2).all(|w| w[0] < w[1]));
        let len = cards.iter().product();
        Factor {
            scope,
            cards,
            table: vec![1.0; len],
            log_scale: 0.0,
        }
    }

    /// Single-variable factor.
    pub fn unary(var: VarId, values: Vec<f64>) -> Result<Self> {
        let card = values.len();
        Factor::new(vec![var], vec![card], values)
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn with_log_scale(mut self, log_scale: f64) -> Self {
        self.log_scale = log_scale;
        self
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.scope.binary_search(&v).is_ok()
    }

    pub fn card_of(&self, v: VarId) -> Option<usize> {
        self.scope.binary_search(&v).ok().map(|p| self.cards[p])
    }

    /// Entries with the log scale folded back into linear space.
    pub fn linear_table(&self) -> Vec<f64> {
        let s = 10f64.powf(self.log_scale);
        self.table.iter().map(|v| v * s).collect()
    }

    /// log10 of the entry at `assignment` (values in scope order).
    pub fn log10_at(&self, assignment: &[usize]) -> f64 {
        self.table[self.offset(assignment)].log10() + self.log_scale
    }

    /// log10 of the single entry of a scalar factor, or of the table total.
    pub fn log10_total(&self) -> f64 {
        let s: f64 = self.table.iter().sum();
        s.log10() + self.log_scale
    }

    fn offset(&self, assignment: &[usize]) -> usize {
        assert_eq!(assignment.len(), self.scope.len());
        assignment
            .iter()
            .zip(&self.cards)
            .fold(0, |acc, (&x, &c)| acc * c + x)
    }

    fn stride_of(&self, pos: usize) -> usize {
        self.cards[pos + 1..].iter().product()
    }

    /// Divides out the largest entry and folds it into the log scale.
    pub fn normalize(&mut self) {
        let max = self.table.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 && max.is_finite() && max != 1.0 {
            let inv = 1.0 / max;
            self.table.iter_mut().for_each(|v| *v *= inv);
            self.log_scale += max.log10();
        }
    }

    /// Product of factors over the sorted union of their scopes.
    pub fn product<'a, I>(factors: I) -> Result<Factor>
    where
        I: IntoIterator<Item = &'a Factor>,
    {
        let inputs: Vec<&Factor> = factors.into_iter().collect();
        match inputs.len() {
            0 => return Ok(Factor::scalar(1.0)),
            1 => {
                let mut f = inputs[0].clone();
                f.normalize();
                return Ok(f);
            }
            _ => {}
        }

        // Union of scopes with cardinality checks.
        let mut union: Vec<(VarId, usize)> = Vec::new();
        for f in &inputs {
            for (&v, &c) in f.scope.iter().zip(&f.cards) {
                match union.binary_search_by_key(&v, |&(u, _)| u) {
                    Ok(p) if union[p].1 != c => {
                        return Err(Error::CardinalityMismatch {
                            var: v,
                            left: union[p].1,
                            right: c,
                        })
                    }
                    Ok(_) => {}
                    Err(p) => union.insert(p, (v, c)),
                }
            }
        }
        let scope: Vec<VarId> = union.iter().map(|&(v, _)| v).collect();
        let cards: Vec<usize> = union.iter().map(|&(_, c)| c).collect();
        let len: usize = cards.iter().product();

        // strides[j][d]: step in input j's table when output dim d advances.
        let strides: Vec<Vec<usize>> = inputs
            .iter()
            .map(|f| {
                scope
                    .iter()
                    .map(|v| match f.scope.binary_search(v) {
                        Ok(p) => f.stride_of(p),
                        Err(_) => 0,
                    })
                    .collect()
            })
            .collect();

        let mut table = vec![0.0; len];
        let mut counter = vec![0usize; scope.len()];
        let mut offs = vec![0usize; inputs.len()];
        for out in table.iter_mut() {
            let mut v = 1.0;
            for (f, &o) in inputs.iter().zip(&offs) {
                v *= f.table[o];
            }
            *out = v;
            for d in (0..scope.len()).rev() {
                counter[d] += 1;
                for (o, s) in offs.iter_mut().zip(&strides) {
                    *o += s[d];
                }
                if counter[d] < cards[d] {
                    break;
                }
                for (o, s) in offs.iter_mut().zip(&strides) {
                    *o -= s[d] * cards[d];
                }
                counter[d] = 0;
            }
        }

        let mut out = Factor {
            scope,
            cards,
            table,
            log_scale: inputs.iter().map(|f| f.log_scale).sum(),
        };
        out.normalize();
        Ok(out)
    }

    /// Eliminates `var` by summing, maximizing or minimizing over its values.
    pub fn marginalize(&self, var: VarId, mode: Reduce) -> Result<Factor> {
        let pos = self
            .scope
            .binary_search(&var)
            .map_err(|_| Error::NotInScope(var))?;
        let card = self.cards[pos];
        let stride = self.stride_of(pos);
        let outer = self.table.len() / (card * stride);

        let mut table = Vec::with_capacity(outer * stride);
        for o in 0..outer {
            let base = o * card * stride;
            for inner in 0..stride {
                let mut slice = (0..card).map(|k| self.table[base + k * stride + inner]);
                let first = slice.next().unwrap_or(0.0);
                let v = match mode {
                    Reduce::Sum => slice.fold(first, |a, b| a + b),
                    Reduce::Max => slice.fold(first, f64::max),
                    Reduce::Min => slice.fold(first, f64::min),
                };
                table.push(v);
            }
        }

        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        let mut out = Factor {
            scope,
            cards,
            table,
            log_scale: self.log_scale,
        };
        out.normalize();
        Ok(out)
    }

    /// Reshapes the table into a `d_var x (len / d_var)` matrix whose row is
    /// the value of `var` and whose column is the mixed-radix index of the
    /// remaining scope variables in scope order. The log scale is dropped.
    pub fn matricize(&self, var: VarId) -> Result<Matrix> {
        let pos = self
            .scope
            .binary_search(&var)
            .map_err(|_| Error::NotInScope(var))?;
        let card = self.cards[pos];
        let stride = self.stride_of(pos);
        let cols = self.table.len() / card;
        let outer = cols / stride;
        let mut data = vec![0.0; self.table.len()];
        for o in 0..outer {
            for k in 0..card {
                for inner in 0..stride {
                    data[k * cols + o * stride + inner] =
                        self.table[o * card * stride + k * stride + inner];
                }
            }
        }
        Matrix::new(card, cols, data)
    }

    /// Inverse of [`Factor::matricize`]: lays `m` back out over `scope`.
    pub fn from_matricized(
        scope: Vec<VarId>,
        cards: Vec<usize>,
        var: VarId,
        m: &Matrix,
    ) -> Result<Factor> {
        let pos = scope
            .binary_search(&var)
            .map_err(|_| Error::NotInScope(var))?;
        let card = cards[pos];
        let len: usize = cards.iter().product();
        if m.rows() != card || m.rows() * m.cols() != len {
            return Err(Error::InvalidFactor(
                "matrix shape does not match scope".into(),
            ));
        }
        let stride: usize = cards[pos + 1..].iter().product();
        let cols = m.cols();
        let mut table = vec![0.0; len];
        for o in 0..cols / stride {
            for k in 0..card {
                for inner in 0..stride {
                    table[o * card * stride + k * stride + inner] = m.get(k, o * stride + inner);
                }
            }
        }
        Factor::new(scope, cards, table)
    }

    /// Renames variable `from` to `to`, re-laying the table so the scope stays
    /// sorted.
    pub fn relabel(&self, from: VarId, to: VarId) -> Result<Factor> {
        let pos = self
            .scope
            .binary_search(&from)
            .map_err(|_| Error::NotInScope(from))?;
        if self.contains(to) {
            return Err(Error::InvalidFactor(format!("{to} already in scope")));
        }
        let mut renamed = self.scope.clone();
        renamed[pos] = to;
        let mut sorted = renamed.clone();
        sorted.sort_unstable();
        let (scope, cards, table) = reorder(&renamed, &self.cards, &self.table, &sorted);
        Ok(Factor {
            scope,
            cards,
            table,
            log_scale: self.log_scale,
        })
    }

    /// Replaces the table, keeping scope and log scale.
    pub fn with_table(&self, table: Vec<f64>) -> Result<Factor> {
        let mut f = Factor::new(self.scope.clone(), self.cards.clone(), table)?;
        f.log_scale = self.log_scale;
        Ok(f)
    }
}

/// Re-lays a row-major table from `scope` order to `target` order, where
/// `target` is a permutation of `scope`.
fn reorder(
    scope: &[VarId],
    cards: &[usize],
    table: &[f64],
    target: &[VarId],
) -> (Vec<VarId>, Vec<usize>, Vec<f64>) {
    let n = scope.len();
    let old_strides: Vec<usize> = (0..n).map(|p| cards[p + 1..].iter().product()).collect();
    let perm: Vec<usize> = target
        .iter()
        .map(|v| {
            scope
                .iter()
                .position(|u| u == v)
                .expect("target permutes scope")
        })
        .collect();
    let new_cards: Vec<usize> = perm.iter().map(|&p| cards[p]).collect();
    let step: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();

    let mut out = vec![0.0; table.len()];
    let mut counter = vec![0usize; n];
    let mut off = 0usize;
    for slot in out.iter_mut() {
        *slot = table[off];
        for d in (0..n).rev() {
            counter[d] += 1;
            off += step[d];
            if counter[d] < new_cards[d] {
                break;
            }
            off -= step[d] * new_cards[d];
            counter[d] = 0;
        }
    }
    (target.to_vec(), new_cards, out)
}

/// A discrete graphical model: variable domains plus a list of factors.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorGraph {
    domains: Domains,
    factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn new(domains: Domains, factors: Vec<Factor>) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::InvalidFactor("model has no variables".into()));
        }
        for f in &factors {
            for (&v, &c) in f.scope().iter().zip(f.cards()) {
                if v.0 >= domains.len() {
                    return Err(Error::UnknownVariable {
                        var: v,
                        n: domains.len(),
                    });
                }
                if domains.card(v) != c {
                    return Err(Error::CardinalityMismatch {
                        var: v,
                        left: domains.card(v),
                        right: c,
                    });
                }
            }
        }
        Ok(FactorGraph { domains, factors })
    }

    pub fn domains(&self) -> &Domains {
        &self.domains
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.domains.vars()
    }

    /// Hyper-edges: one scope per factor, in factor order.
    pub fn edges(&self) -> Vec<Vec<VarId>> {
        self.factors.iter().map(|f| f.scope().to_vec()).collect()
    }

    pub fn into_parts(self) -> (Domains, Vec<Factor>) {
        (self.domains, self.factors)
    }

    /// Same domains, different factor list.
    pub fn with_factors(&self, factors: Vec<Factor>) -> Result<Self> {
        FactorGraph::new(self.domains.clone(), factors)
    }

    pub fn max_scope(&self) -> usize {
        self.factors
            .iter()
            .map(|f| f.scope().len())
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: usize) -> VarId {
        VarId(i)
    }

    fn lin(f: &Factor) -> Vec<f64> {
        f.linear_table()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len()
            && a.iter()
                .zip(b)
                .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0))
    }

    #[test]
    fn empty_product_is_one() {
        let f = Factor::product(std::iter::empty()).unwrap();
        assert!(f.scope().is_empty());
        assert_eq!(f.table(), &[1.0]);
        assert_eq!(f.log_scale(), 0.0);
    }

    #[test]
    fn elementwise_and_outer_products() {
        let f = Factor::unary(v(1), vec![2.0, 3.0]).unwrap();
        let g = Factor::unary(v(1), vec![1.0, 0.0]).unwrap();
        assert!(close(
            &lin(&Factor::product([&f, &g]).unwrap()),
            &[2.0, 0.0]
        ));

        let f = Factor::unary(v(1), vec![1.0, 2.0]).unwrap();
        let g = Factor::unary(v(2), vec![3.0, 4.0]).unwrap();
        let p = Factor::product([&f, &g]).unwrap();
        assert_eq!(p.scope(), &[v(1), v(2)]);
        assert!(close(&lin(&p), &[3.0, 4.0, 6.0, 8.0]));
    }

    #[test]
    fn product_rejects_cardinality_mismatch() {
        let f = Factor::unary(v(0), vec![1.0, 2.0]).unwrap();
        let g = Factor::unary(v(0), vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            Factor::product([&f, &g]),
            Err(Error::CardinalityMismatch { .. })
        ));
    }

    #[test]
    fn marginal_modes() {
        let f = Factor::new(vec![v(1), v(2)], vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(close(
            &lin(&f.marginalize(v(1), Reduce::Sum).unwrap()),
            &[4.0, 6.0]
        ));
        assert!(close(
            &lin(&f.marginalize(v(1), Reduce::Max).unwrap()),
            &[3.0, 4.0]
        ));
        assert!(close(
            &lin(&f.marginalize(v(1), Reduce::Min).unwrap()),
            &[1.0, 2.0]
        ));
        assert!(close(
            &lin(&f.marginalize(v(2), Reduce::Sum).unwrap()),
            &[3.0, 7.0]
        ));

        let g = Factor::unary(v(1), vec![5.0, 7.0]).unwrap();
        let s = g.marginalize(v(1), Reduce::Sum).unwrap();
        assert!(s.scope().is_empty());
        assert!((s.log10_total() - 12f64.log10()).abs() < 1e-14);

        assert_eq!(
            f.marginalize(v(3), Reduce::Sum),
            Err(Error::NotInScope(v(3)))
        );
    }

    #[test]
    fn matricize_binary_and_single_column() {
        let f = Factor::new(vec![v(1), v(2)], vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = f.matricize(v(1)).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m.row(0), &[1.0, 2.0]);
        assert_eq!(m.row(1), &[3.0, 4.0]);

        let g = Factor::unary(v(1), vec![0.3, 0.7]).unwrap();
        let m = g.matricize(v(1)).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 1));
        assert_eq!(m.data(), &[0.3, 0.7]);
    }

    #[test]
    fn matricize_matches_index_walk() {
        // x0 ternary, x1 binary, x2 ternary; matricize on x1.
        let cards = [3usize, 2, 3];
        let table: Vec<f64> = (0..18).map(|k| k as f64 + 0.5).collect();
        let f = Factor::new(vec![v(0), v(1), v(2)], cards.to_vec(), table.clone()).unwrap();
        let m = f.matricize(v(1)).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 9));
        for a in 0..3 {
            for b in 0..2 {
                for c in 0..3 {
                    let flat = (a * 2 + b) * 3 + c;
                    assert_eq!(m.get(b, a * 3 + c), table[flat]);
                }
            }
        }
    }

    #[test]
    fn unsorted_scope_is_relaid() {
        // f(x2, x1) given with x2 major.
        let f = Factor::new(
            vec![v(2), v(1)],
            vec![2, 3],
            (0..6).map(|k| k as f64).collect(),
        )
        .unwrap();
        assert_eq!(f.scope(), &[v(1), v(2)]);
        // f(x1=a, x2=b) = old[b*3 + a]
        for a in 0..3 {
            for b in 0..2 {
                assert_eq!(f.table()[a * 2 + b], (b * 3 + a) as f64);
            }
        }
    }

    #[test]
    fn relabel_moves_variable_to_the_end() {
        let f = Factor::new(
            vec![v(0), v(1)],
            vec![2, 3],
            (0..6).map(|k| k as f64).collect(),
        )
        .unwrap();
        let g = f.relabel(v(0), v(5)).unwrap();
        assert_eq!(g.scope(), &[v(1), v(5)]);
        for a in 0..2 {
            for b in 0..3 {
                assert_eq!(g.table()[b * 2 + a], f.table()[a * 3 + b]);
            }
        }
    }

    #[test]
    fn invalid_factors_rejected() {
        assert!(Factor::new(vec![v(0)], vec![2], vec![1.0]).is_err());
        assert!(Factor::new(vec![v(0)], vec![2], vec![1.0, -1.0]).is_err());
        assert!(Factor::new(vec![v(0)], vec![2], vec![1.0, f64::NAN]).is_err());
        assert!(Factor::new(vec![v(0), v(0)], vec![2, 2], vec![1.0; 4]).is_err());
    }

    #[test]
    fn graph_validates_scopes() {
        let f = Factor::unary(v(3), vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            FactorGraph::new(Domains::uniform(2, 2), vec![f]),
            Err(Error::UnknownVariable { .. })
        ));
        let f = Factor::unary(v(0), vec![1.0, 1.0, 1.0]).unwrap();
        assert!(FactorGraph::new(Domains::uniform(2, 2), vec![f]).is_err());
        assert!(FactorGraph::new(Domains::uniform(0, 2), vec![]).is_err());
    }

    #[test]
    fn all_zero_factor_is_legal() {
        let f = Factor::new(vec![v(0), v(1)], vec![2, 2], vec![0.0; 4]).unwrap();
        let m = f.marginalize(v(0), Reduce::Sum).unwrap();
        assert_eq!(m.table(), &[0.0, 0.0]);
        assert_eq!(m.log10_total(), f64::NEG_INFINITY);
    }
}
