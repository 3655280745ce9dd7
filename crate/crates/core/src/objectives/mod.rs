//! Submodular value oracles and their continuous extensions.

mod extension;

pub use extension::{
    gradient_estimate, gradient_exact, lovasz_exact, multilinear_closed_form, multilinear_estimate,
    multilinear_exact, verify_submodular, FMode, MultilinearOracle, EXACT_CAP,
};

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{check_range, Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveKind {
    Coverage,
    Cut,
    Linear,
    Table,
}

#[derive(Clone, Debug)]
enum Payload<T> {
    Coverage {
        covers: Vec<Vec<usize>>,
        weights: Vec<T>,
    },
    Cut {
        edges: Vec<(usize, usize, T)>,
        adj: Vec<Vec<(usize, T)>>,
    },
    Linear {
        weights: Vec<T>,
    },
    Table {
        values: Vec<T>,
    },
}

/// A non-negative submodular set function over elements `0..n`.
#[derive(Clone, Debug)]
pub struct Objective<T> {
    n: usize,
    payload: Payload<T>,
}

fn check_weight<T: Scalar>(w: T, what: &str) -> Result<()> {
    if !w.is_finite() || w < T::zero() {
        return Err(Error::input(format!("{what} must be finite and non-negative, got {w}")));
    }
    Ok(())
}

impl<T: Scalar> Objective<T> {
    /// Weighted coverage: element `u` covers universe items `covers[u]`,
    /// item `e` has weight `weights[e]`.
    pub fn coverage(covers: Vec<Vec<usize>>, weights: Vec<T>) -> Result<Self> {
        for &w in &weights {
            check_weight(w, "universe weight")?;
        }
        let mut covers = covers;
        for items in covers.iter_mut() {
            check_range(items, weights.len())?;
            items.sort_unstable();
            items.dedup();
        }
        Ok(Objective {
            n: covers.len(),
            payload: Payload::Coverage { covers, weights },
        })
    }

    /// Coverage with every universe item of weight one.
    pub fn unit_coverage(covers: Vec<Vec<usize>>) -> Result<Self> {
        let universe = covers.iter().flatten().map(|&e| e + 1).max().unwrap_or(0);
        Self::coverage(covers, vec![T::one(); universe])
    }

    /// Undirected weighted cut function on `n` vertices.
    pub fn cut(n: usize, edges: Vec<(usize, usize, T)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b, w) in &edges {
            check_range(&[a, b], n)?;
            check_weight(w, "edge weight")?;
            if a != b {
                adj[a].push((b, w));
                adj[b].push((a, w));
            }
        }
        Ok(Objective {
            n,
            payload: Payload::Cut { edges, adj },
        })
    }

    pub fn linear(weights: Vec<T>) -> Result<Self> {
        for &w in &weights {
            check_weight(w, "element weight")?;
        }
        Ok(Objective {
            n: weights.len(),
            payload: Payload::Linear { weights },
        })
    }

    /// Arbitrary function given by its full value table, indexed by bitmask.
    /// Intended for tests; `n` is at most 20.
    pub fn table(n: usize, values: Vec<T>) -> Result<Self> {
        if n > 20 {
            return Err(Error::capability(format!("table objective needs n <= 20, got {n}")));
        }
        if values.len() != 1 << n {
            return Err(Error::input(format!(
                "table objective needs {} values, got {}",
                1usize << n,
                values.len()
            )));
        }
        for &w in &values {
            check_weight(w, "table value")?;
        }
        Ok(Objective {
            n,
            payload: Payload::Table { values },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> ObjectiveKind {
        match self.payload {
            Payload::Coverage { .. } => ObjectiveKind::Coverage,
            Payload::Cut { .. } => ObjectiveKind::Cut,
            Payload::Linear { .. } => ObjectiveKind::Linear,
            Payload::Table { .. } => ObjectiveKind::Table,
        }
    }

    pub fn covers(&self) -> Option<(&[Vec<usize>], &[T])> {
        match &self.payload {
            Payload::Coverage { covers, weights } => Some((covers, weights)),
            _ => None,
        }
    }

    pub fn cut_edges(&self) -> Option<&[(usize, usize, T)]> {
        match &self.payload {
            Payload::Cut { edges, .. } => Some(edges),
            _ => None,
        }
    }

    pub fn linear_weights(&self) -> Option<&[T]> {
        match &self.payload {
            Payload::Linear { weights } => Some(weights),
            _ => None,
        }
    }

    pub fn table_values(&self) -> Option<&[T]> {
        match &self.payload {
            Payload::Table { values } => Some(values),
            _ => None,
        }
    }

    /// Value on a set of distinct, in-range elements.
    fn value_distinct(&self, set: &[usize]) -> T {
        match &self.payload {
            Payload::Coverage { covers, weights } => {
                let mut items: Vec<usize> = set.iter().flat_map(|&u| covers[u].iter().copied()).collect();
                items.sort_unstable();
                items.dedup();
                items.iter().map(|&e| weights[e]).sum()
            }
            Payload::Cut { adj, .. } => {
                let mut inside = vec![false; self.n];
                for &u in set {
                    inside[u] = true;
                }
                let mut total = T::zero();
                for &u in set {
                    for &(v, w) in &adj[u] {
                        if !inside[v] {
                            total += w;
                        }
                    }
                }
                total
            }
            Payload::Linear { weights } => set.iter().map(|&u| weights[u]).sum(),
            Payload::Table { values } => values[mask_of(set)],
        }
    }

    /// Multilinear extension at `h * 1_set` in closed form, `None` for tables.
    pub(crate) fn multilinear_uniform(&self, set: &[usize], h: T) -> Option<T> {
        let one = T::one();
        match &self.payload {
            Payload::Coverage { covers, weights } => {
                let mut items: Vec<usize> = set.iter().flat_map(|&u| covers[u].iter().copied()).collect();
                items.sort_unstable();
                let mut total = T::zero();
                let mut i = 0;
                while i < items.len() {
                    let mut j = i;
                    while j < items.len() && items[j] == items[i] {
                        j += 1;
                    }
                    let miss = (one - h).powi((j - i) as i32);
                    total += weights[items[i]] * (one - miss);
                    i = j;
                }
                Some(total)
            }
            Payload::Cut { adj, .. } => {
                let mut inside = vec![false; self.n];
                for &u in set {
                    inside[u] = true;
                }
                let mut total = T::zero();
                let both = h * (one - h);
                for &u in set {
                    for &(v, w) in &adj[u] {
                        // edges inside the set are visited from both ends
                        total += if inside[v] { w * both } else { w * h };
                    }
                }
                Some(total)
            }
            Payload::Linear { weights } => Some(h * set.iter().map(|&u| weights[u]).sum()),
            Payload::Table { .. } => None,
        }
    }

    /// Multilinear extension at arbitrary `x` in closed form, `None` for tables.
    pub(crate) fn multilinear_point(&self, x: &[T]) -> Option<T> {
        let one = T::one();
        match &self.payload {
            Payload::Coverage { covers, weights } => {
                let mut miss = vec![one; weights.len()];
                for (u, items) in covers.iter().enumerate() {
                    if x[u] > T::zero() {
                        for &e in items {
                            miss[e] *= one - x[u];
                        }
                    }
                }
                Some(weights.iter().zip(&miss).map(|(&w, &m)| w * (one - m)).sum())
            }
            Payload::Cut { edges, .. } => Some(
                edges
                    .iter()
                    .filter(|(a, b, _)| a != b)
                    .map(|&(a, b, w)| w * (x[a] * (one - x[b]) + x[b] * (one - x[a])))
                    .sum(),
            ),
            Payload::Linear { weights } => Some(weights.iter().zip(x).map(|(&w, &xi)| w * xi).sum()),
            Payload::Table { .. } => None,
        }
    }

    fn cast_vec<U: Scalar>(v: &[T]) -> Vec<U> {
        v.iter().map(|&w| U::lit(w.to_f64_lossy())).collect()
    }

    /// Converts the payload to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Objective<U> {
        let payload = match &self.payload {
            Payload::Coverage { covers, weights } => Payload::Coverage {
                covers: covers.clone(),
                weights: Self::cast_vec(weights),
            },
            Payload::Cut { edges, adj } => Payload::Cut {
                edges: edges.iter().map(|&(a, b, w)| (a, b, U::lit(w.to_f64_lossy()))).collect(),
                adj: adj
                    .iter()
                    .map(|l| l.iter().map(|&(v, w)| (v, U::lit(w.to_f64_lossy()))).collect())
                    .collect(),
            },
            Payload::Linear { weights } => Payload::Linear {
                weights: Self::cast_vec(weights),
            },
            Payload::Table { values } => Payload::Table {
                values: Self::cast_vec(values),
            },
        };
        Objective { n: self.n, payload }
    }
}

pub(crate) fn mask_of(set: &[usize]) -> usize {
    set.iter().fold(0usize, |m, &u| m | (1 << u))
}

pub(crate) fn distinct(set: &[usize]) -> Vec<usize> {
    let mut v = set.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Incrementally maintained set with its value, for cheap marginals.
#[derive(Clone, Debug)]
pub struct ValueState<T> {
    members: Vec<bool>,
    list: Vec<usize>,
    value: T,
    cover_count: Vec<u32>,
}

impl<T: Scalar> ValueState<T> {
    pub fn elements(&self) -> &[usize] {
        &self.list
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn contains(&self, u: usize) -> bool {
        self.members.get(u).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }
}

/// Counted evaluator around an [`Objective`].
///
/// `eval` counts one call. Marginals count two logical calls even though the
/// incremental state avoids recomputing `f(S)`.
#[derive(Debug)]
pub struct ValueOracle<T> {
    objective: Objective<T>,
    calls: AtomicU64,
}

impl<T: Scalar> Clone for ValueOracle<T> {
    fn clone(&self) -> Self {
        ValueOracle::new(self.objective.clone())
    }
}

impl<T: Scalar> ValueOracle<T> {
    pub fn new(objective: Objective<T>) -> Self {
        ValueOracle {
            objective,
            calls: AtomicU64::new(0),
        }
    }

    pub fn objective(&self) -> &Objective<T> {
        &self.objective
    }

    pub fn n(&self) -> usize {
        self.objective.n
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset_calls(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub(crate) fn count(&self, k: u64) {
        self.calls.fetch_add(k, Ordering::Relaxed);
    }

    pub fn eval(&self, set: &[usize]) -> Result<T> {
        check_range(set, self.n())?;
        self.count(1);
        Ok(self.objective.value_distinct(&distinct(set)))
    }

    pub fn marginal(&self, u: usize, set: &[usize]) -> Result<T> {
        check_range(set, self.n())?;
        check_range(&[u], self.n())?;
        self.count(2);
        let base = distinct(set);
        if base.binary_search(&u).is_ok() {
            return Ok(T::zero());
        }
        let mut with = base.clone();
        with.push(u);
        Ok(self.objective.value_distinct(&with) - self.objective.value_distinct(&base))
    }

    /// Uncounted evaluation on distinct in-range elements.
    pub(crate) fn value_raw(&self, set: &[usize]) -> T {
        self.objective.value_distinct(set)
    }

    pub fn empty_state(&self) -> ValueState<T> {
        let universe = match &self.objective.payload {
            Payload::Coverage { weights, .. } => weights.len(),
            _ => 0,
        };
        let value = self.objective.value_distinct(&[]);
        ValueState {
            members: vec![false; self.n()],
            list: Vec::new(),
            value,
            cover_count: vec![0; universe],
        }
    }

    /// `f(u | S)` for the state's set S; two logical calls.
    pub fn gain(&self, st: &ValueState<T>, u: usize) -> T {
        self.count(2);
        self.gain_raw(st, u)
    }

    pub(crate) fn gain_raw(&self, st: &ValueState<T>, u: usize) -> T {
        if st.members[u] {
            return T::zero();
        }
        match &self.objective.payload {
            Payload::Coverage { covers, weights } => covers[u]
                .iter()
                .filter(|&&e| st.cover_count[e] == 0)
                .map(|&e| weights[e])
                .sum(),
            Payload::Cut { adj, .. } => {
                let mut g = T::zero();
                for &(v, w) in &adj[u] {
                    if st.members[v] {
                        g -= w;
                    } else {
                        g += w;
                    }
                }
                g
            }
            Payload::Linear { weights } => weights[u],
            Payload::Table { values } => {
                let m = mask_of(&st.list);
                values[m | (1 << u)] - values[m]
            }
        }
    }

    /// Adds `u` to the state. Not counted: callers have already paid for the
    /// gain that motivated the insertion.
    pub fn push(&self, st: &mut ValueState<T>, u: usize) {
        if st.members[u] {
            return;
        }
        let g = self.gain_raw(st, u);
        if let Payload::Coverage { covers, .. } = &self.objective.payload {
            for &e in &covers[u] {
                st.cover_count[e] += 1;
            }
        }
        st.members[u] = true;
        st.list.push(u);
        st.value += g;
    }

    pub fn state_of(&self, set: &[usize]) -> Result<ValueState<T>> {
        check_range(set, self.n())?;
        let mut st = self.empty_state();
        for &u in set {
            self.push(&mut st, u);
        }
        Ok(st)
    }
}
