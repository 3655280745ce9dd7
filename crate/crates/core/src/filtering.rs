//! Block-greedy prefix selection with a threshold-gated candidate pool.

use crate::constraints::{greedy_base, IndepState, IndependenceOracle};
use crate::error::{Error, Result};
use crate::objectives::{ValueOracle, ValueState};
use crate::scalar::{tol_for, Scalar};
use crate::seed::splitmix64;
use crate::stream::{block_plan_known_rank, block_plan_unknown_rank, sub_blocks, BlockPlan, StreamOrder};

/// `⌈2δ⁻¹ ln(r/δ)⌉`.
pub fn ladder_length(delta: f64, r: usize) -> usize {
    (2.0 / delta * (r as f64 / delta).ln() - 1e-9).ceil().max(0.0) as usize
}

/// `4rδ⁻² ln²(r/δ)`.
pub fn pool_cap(delta: f64, r: usize) -> f64 {
    let l = (r as f64 / delta).ln();
    4.0 * r as f64 / (delta * delta) * l * l
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ladder<T> {
    pub k: usize,
    /// `v_0..v_k`, geometric with ratio `1/(1+δ)`.
    pub v: Vec<T>,
    /// `w_j`: smallest `v_i` at least the `j`-th step marginal.
    pub w: Vec<T>,
}

pub fn build_ladder<T: Scalar>(marginals: &[T], delta: f64, r: usize) -> Ladder<T> {
    let k = ladder_length(delta, r);
    let v0 = marginals.iter().copied().fold(T::zero(), T::max);
    let ratio = T::lit(1.0 + delta);
    let mut v = Vec::with_capacity(k + 1);
    let mut cur = v0;
    for _ in 0..=k {
        v.push(cur);
        cur = cur / ratio;
    }
    let w = marginals
        .iter()
        .map(|&m| {
            // v is decreasing; take the last entry still >= m
            let i = v.partition_point(|&vi| vi >= m);
            v[i.saturating_sub(1)]
        })
        .collect();
    Ladder { k, v, w }
}

#[derive(Clone, Debug)]
pub struct FilterOutput<T> {
    /// `s_1..s_r` with gaps removed.
    pub s_delta: Vec<usize>,
    /// `s_j` per block, `None` where no element qualified.
    pub slots: Vec<Option<usize>>,
    pub step_marginals: Vec<T>,
    pub ladder: Ladder<T>,
    pub h: Vec<usize>,
    pub failed: bool,
    /// Stream too short for blocks: `S_δ = ∅`, `H` is the whole stream.
    pub fallback: bool,
    pub value_s: T,
    pub delta: f64,
    pub r: usize,
    pub h_cap: f64,
    pub stored_peak: usize,
    /// Elements not stored because of a memory cap.
    pub dropped: usize,
}

impl<T: Scalar> FilterOutput<T> {
    /// Threshold sandwich, non-negative steps and the pool cap.
    pub fn check_invariants(&self) -> Result<()> {
        if self.fallback {
            return Ok(());
        }
        let tol = tol_for(self.value_s);
        if let Some(m) = self.step_marginals.iter().find(|&&m| m < T::zero()) {
            return Err(Error::invariant(format!("negative step marginal {m}")));
        }
        let floor = T::lit(self.delta / self.r as f64) * self.value_s;
        let vk = *self.ladder.v.last().unwrap_or(&T::zero());
        if vk > floor + tol {
            return Err(Error::invariant(format!("v_k = {vk} exceeds (δ/r)·f(S_r) = {floor}")));
        }
        let grow = T::lit(1.0 + self.delta);
        for (j, (&m, &w)) in self.step_marginals.iter().zip(&self.ladder.w).enumerate() {
            let upper = (grow * m).max(floor);
            if m > w + tol || w > upper + tol {
                return Err(Error::invariant(format!(
                    "threshold sandwich fails at j={}: {m} <= {w} <= {upper}",
                    j + 1
                )));
            }
        }
        if self.failed && !self.h.is_empty() {
            return Err(Error::invariant("failed run kept a candidate pool"));
        }
        if !self.failed && self.h.len() as f64 > self.h_cap {
            return Err(Error::invariant(format!("|H| = {} above cap {}", self.h.len(), self.h_cap)));
        }
        let bound = self.s_delta.len() + self.h_cap.floor() as usize + 2;
        if self.stored_peak > bound {
            return Err(Error::invariant(format!("stored {} elements, bound {bound}", self.stored_peak)));
        }
        Ok(())
    }
}

/// Per-block greedy with snapshots of every `S_{j-1}`.
struct BlockGreedy<T> {
    val: ValueState<T>,
    ind: IndepState,
    snapshots: Vec<(ValueState<T>, IndepState)>,
    slots: Vec<Option<usize>>,
    marginals: Vec<T>,
    best: Option<(usize, T)>,
}

impl<T: Scalar> BlockGreedy<T> {
    fn new(f: &ValueOracle<T>, ind: &IndependenceOracle) -> Self {
        BlockGreedy {
            val: f.empty_state(),
            ind: ind.empty_state(),
            snapshots: Vec::new(),
            slots: Vec::new(),
            marginals: Vec::new(),
            best: None,
        }
    }

    fn open_block(&mut self) {
        self.snapshots.push((self.val.clone(), self.ind.clone()));
        self.best = None;
    }

    fn offer(&mut self, f: &ValueOracle<T>, ind: &IndependenceOracle, u: usize) {
        if self.ind.contains(u) || !ind.can_add(&self.ind, u) {
            return;
        }
        let g = f.gain(&self.val, u);
        // strict improvement keeps the earliest arrival on ties
        if g >= T::zero() && self.best.is_none_or(|(_, b)| g > b) {
            self.best = Some((u, g));
        }
    }

    fn close_block(&mut self, f: &ValueOracle<T>, ind: &IndependenceOracle) -> Result<()> {
        match self.best.take() {
            Some((u, g)) => {
                ind.push(&mut self.ind, u);
                f.push(&mut self.val, u);
                self.slots.push(Some(u));
                self.marginals.push(g);
                if !ind.check_uncounted(self.ind.elements()) {
                    return Err(Error::invariant(format!("prefix set {:?} is dependent", self.ind.elements())));
                }
            }
            None => {
                self.slots.push(None);
                self.marginals.push(T::zero());
            }
        }
        Ok(())
    }

    fn held(&self) -> usize {
        self.ind.len() + usize::from(self.best.is_some())
    }

    /// Whether some `S_{j-1} + u` is feasible with gain strictly above `w_j`.
    fn passes(&self, f: &ValueOracle<T>, ind: &IndependenceOracle, w: &[T], u: usize) -> bool {
        self.snapshots
            .iter()
            .zip(w)
            .any(|((val, st), &wj)| !st.contains(u) && ind.can_add(st, u) && f.gain(val, u) > wj)
    }

    fn passes_uncounted(&self, f: &ValueOracle<T>, ind: &IndependenceOracle, w: &[T], u: usize) -> bool {
        self.snapshots
            .iter()
            .zip(w)
            .any(|((val, st), &wj)| !st.contains(u) && ind.can_add_uncounted(st, u) && f.gain_raw(val, u) > wj)
    }
}

enum Phase<T> {
    Prefix,
    Tail(Ladder<T>),
    Fallback,
}

/// Streaming filter with known rank bound `r`.
///
/// Feed the stream one element at a time. Once [`KnownRankFilter::selection`]
/// returns `Some`, the prefix selection `S_δ` is final and later elements
/// only affect the pool `H`.
pub struct KnownRankFilter<'a, T> {
    f: &'a ValueOracle<T>,
    ind: &'a IndependenceOracle,
    n: usize,
    r: usize,
    delta: f64,
    block_len: usize,
    prefix_len: usize,
    pos: usize,
    greedy: BlockGreedy<T>,
    phase: Phase<T>,
    h: Vec<usize>,
    h_cap: f64,
    failed: bool,
    memory_cap: Option<usize>,
    dropped: usize,
    stored_peak: usize,
}

impl<'a, T: Scalar> KnownRankFilter<'a, T> {
    /// `n` is the stream length; `memory_cap` bounds stored elements.
    pub fn new(
        f: &'a ValueOracle<T>,
        ind: &'a IndependenceOracle,
        n: usize,
        delta: f64,
        r: usize,
        memory_cap: Option<usize>,
    ) -> Result<Self> {
        let plan = block_plan_known_rank(n, delta, r)?;
        let (phase, block_len, prefix_len, eff) = match &plan {
            BlockPlan::Blocks(b) => (Phase::Prefix, b.block_len, b.tail.start, b.delta),
            BlockPlan::Fallback { .. } => (Phase::Fallback, 0, 0, delta.min(0.5)),
        };
        Ok(KnownRankFilter {
            f,
            ind,
            n,
            r,
            delta: eff,
            block_len,
            prefix_len,
            pos: 0,
            greedy: BlockGreedy::new(f, ind),
            phase,
            h: Vec::new(),
            h_cap: pool_cap(eff, r),
            failed: false,
            memory_cap,
            dropped: 0,
            stored_peak: 0,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    /// `S_δ`, available once the prefix has been consumed.
    pub fn selection(&self) -> Option<&[usize]> {
        match self.phase {
            Phase::Prefix => None,
            _ => Some(self.greedy.ind.elements()),
        }
    }

    pub fn pool(&self) -> &[usize] {
        &self.h
    }

    fn store(&mut self, u: usize) {
        let held = self.greedy.ind.len() + self.h.len();
        if self.memory_cap.is_some_and(|m| held + 1 > m) {
            self.dropped += 1;
            return;
        }
        self.h.push(u);
        if let Phase::Tail(_) = self.phase {
            if self.h.len() as f64 > self.h_cap {
                self.failed = true;
                self.h.clear();
                self.h.shrink_to_fit();
            }
        }
    }

    pub fn feed(&mut self, u: usize) -> Result<()> {
        if self.pos >= self.n {
            return Err(Error::input(format!("stream longer than the declared {} elements", self.n)));
        }
        match &self.phase {
            Phase::Prefix => {
                if self.pos.is_multiple_of(self.block_len) {
                    self.greedy.open_block();
                }
                self.greedy.offer(self.f, self.ind, u);
                self.stored_peak = self.stored_peak.max(self.greedy.held());
                if (self.pos + 1).is_multiple_of(self.block_len) {
                    self.greedy.close_block(self.f, self.ind)?;
                }
                if self.pos + 1 == self.prefix_len {
                    let ladder = build_ladder(&self.greedy.marginals, self.delta, self.r);
                    self.phase = Phase::Tail(ladder);
                }
            }
            Phase::Tail(ladder) => {
                if !self.failed && self.greedy.passes(self.f, self.ind, &ladder.w, u) {
                    self.store(u);
                }
            }
            Phase::Fallback => self.store(u),
        }
        self.stored_peak = self.stored_peak.max(self.greedy.ind.len() + self.h.len());
        self.pos += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<FilterOutput<T>> {
        if self.pos != self.n {
            return Err(Error::input(format!("stream ended after {} of {} elements", self.pos, self.n)));
        }
        let fallback = matches!(self.phase, Phase::Fallback);
        let ladder = match self.phase {
            Phase::Tail(l) => l,
            _ => Ladder {
                k: 0,
                v: Vec::new(),
                w: Vec::new(),
            },
        };
        let out = FilterOutput {
            s_delta: self.greedy.ind.elements().to_vec(),
            slots: self.greedy.slots,
            step_marginals: self.greedy.marginals,
            value_s: self.greedy.val.value(),
            ladder,
            h: self.h,
            failed: self.failed,
            fallback,
            delta: self.delta,
            r: self.r,
            h_cap: if fallback { f64::INFINITY } else { self.h_cap },
            stored_peak: self.stored_peak,
            dropped: self.dropped,
        };
        out.check_invariants()?;
        if !fallback {
            let g = BlockGreedy {
                snapshots: self.greedy.snapshots,
                ..BlockGreedy::new(self.f, self.ind)
            };
            spot_check(&out.h, |u| g.passes_uncounted(self.f, self.ind, &out.ladder.w, u))?;
        }
        Ok(out)
    }
}

/// Re-checks pool membership on up to 10 members.
fn spot_check(h: &[usize], passes: impl Fn(usize) -> bool) -> Result<()> {
    if h.is_empty() {
        return Ok(());
    }
    for t in 0..10.min(h.len()) {
        let u = h[(splitmix64(t as u64 ^ h.len() as u64) % h.len() as u64) as usize];
        if !passes(u) {
            return Err(Error::invariant(format!("pool member {u} has no witnessing threshold")));
        }
    }
    Ok(())
}

pub fn run_filter_known_rank<T: Scalar>(
    order: &StreamOrder,
    f: &ValueOracle<T>,
    ind: &IndependenceOracle,
    delta: f64,
    r: usize,
) -> Result<FilterOutput<T>> {
    run_filter_capped(order, f, ind, delta, r, None)
}

/// As [`run_filter_known_rank`] but storing at most `memory_cap` elements.
pub fn run_filter_capped<T: Scalar>(
    order: &StreamOrder,
    f: &ValueOracle<T>,
    ind: &IndependenceOracle,
    delta: f64,
    r: usize,
    memory_cap: Option<usize>,
) -> Result<FilterOutput<T>> {
    let mut filt = KnownRankFilter::new(f, ind, order.len(), delta, r, memory_cap)?;
    for &u in order.perm() {
        filt.feed(u)?;
    }
    filt.finish()
}

#[derive(Clone, Debug)]
pub struct UnknownRankLevel<T> {
    pub base: Vec<usize>,
    pub r_h: usize,
    pub s: Vec<usize>,
    pub slots: Vec<Option<usize>>,
    pub step_marginals: Vec<T>,
    pub value_s: T,
    pub ladder: Ladder<T>,
}

#[derive(Clone, Debug)]
pub struct UnknownRankOutput<T> {
    pub levels: Vec<UnknownRankLevel<T>>,
    pub best_s: Vec<usize>,
    pub best_value: T,
    pub h: Vec<usize>,
    pub failed: bool,
    /// Whole stream or remaining stream returned as `H`.
    pub fallback: bool,
    pub h_cap: f64,
    pub stored_peak: usize,
}

/// Filter without a rank bound: each halving level estimates the rank from
/// one block and runs the block greedy on the next.
pub fn run_filter_unknown_rank<T: Scalar>(
    order: &StreamOrder,
    f: &ValueOracle<T>,
    ind: &IndependenceOracle,
    delta: f64,
    p: usize,
) -> Result<UnknownRankOutput<T>> {
    if p == 0 {
        return Err(Error::input("p must be at least 1"));
    }
    let perm = order.perm();
    let blocks = match block_plan_unknown_rank(perm.len(), delta)? {
        BlockPlan::Fallback { .. } => {
            return Ok(UnknownRankOutput {
                levels: Vec::new(),
                best_s: Vec::new(),
                best_value: f.value_raw(&[]),
                h: perm.to_vec(),
                failed: false,
                fallback: true,
                h_cap: f64::INFINITY,
                stored_peak: perm.len(),
            })
        }
        BlockPlan::Blocks(b) => b,
    };
    let delta = blocks.delta;
    let mut levels = Vec::with_capacity(blocks.q);
    let mut greedies = Vec::with_capacity(blocks.q);
    let mut stored_peak = 0;
    let mut held = 0;
    for h in 0..blocks.q {
        let first = &blocks.ranges[2 * h];
        let second = &blocks.ranges[2 * h + 1];
        let base = greedy_base(ind, &perm[first.clone()]);
        let r_h = p * base.len() + 1;
        stored_peak = stored_peak.max(held + base.len());
        let Some(subs) = sub_blocks(second, r_h) else {
            // sub-blocks would be empty: everything still to come is H
            let best = best_level(&levels, f);
            return Ok(UnknownRankOutput {
                best_s: best.0,
                best_value: best.1,
                levels,
                h: perm[second.start..].to_vec(),
                failed: false,
                fallback: true,
                h_cap: f64::INFINITY,
                stored_peak: stored_peak.max(held + perm.len() - second.start),
            });
        };
        let mut g = BlockGreedy::new(f, ind);
        for sub in subs {
            g.open_block();
            for &u in &perm[sub] {
                g.offer(f, ind, u);
                stored_peak = stored_peak.max(held + g.held());
            }
            g.close_block(f, ind)?;
        }
        held += g.ind.len();
        let ladder = build_ladder(&g.marginals, delta, r_h);
        levels.push(UnknownRankLevel {
            base,
            r_h,
            s: g.ind.elements().to_vec(),
            slots: g.slots.clone(),
            step_marginals: g.marginals.clone(),
            value_s: g.val.value(),
            ladder,
        });
        greedies.push(g);
    }
    let h_cap: f64 = levels.iter().map(|l| pool_cap(delta, l.r_h)).sum();
    let mut pool = Vec::new();
    let mut failed = false;
    for &u in &perm[blocks.tail.clone()] {
        let hit = greedies
            .iter()
            .zip(&levels)
            .any(|(g, l)| g.passes(f, ind, &l.ladder.w, u));
        if hit {
            pool.push(u);
            stored_peak = stored_peak.max(held + pool.len());
            if pool.len() as f64 > h_cap {
                failed = true;
                pool.clear();
                break;
            }
        }
    }
    for l in &levels {
        let as_known = FilterOutput {
            s_delta: l.s.clone(),
            slots: l.slots.clone(),
            step_marginals: l.step_marginals.clone(),
            ladder: l.ladder.clone(),
            h: Vec::new(),
            failed,
            fallback: false,
            value_s: l.value_s,
            delta,
            r: l.r_h,
            h_cap,
            stored_peak: 0,
            dropped: 0,
        };
        as_known.check_invariants()?;
    }
    let (best_s, best_value) = best_level(&levels, f);
    Ok(UnknownRankOutput {
        levels,
        best_s,
        best_value,
        h: pool,
        failed,
        fallback: false,
        h_cap,
        stored_peak,
    })
}

/// Highest-valued level selection, ties to the lowest level.
fn best_level<T: Scalar>(levels: &[UnknownRankLevel<T>], f: &ValueOracle<T>) -> (Vec<usize>, T) {
    let mut best = (Vec::new(), f.value_raw(&[]));
    for l in levels {
        if l.value_s > best.1 || (best.0.is_empty() && l.value_s >= best.1 && !l.s.is_empty()) {
            best = (l.s.clone(), l.value_s);
        }
    }
    best
}

/// Fraction of runs over seeds `seeds` whose filter reported failure.
pub fn empirical_failure_rate<T: Scalar>(
    f: &ValueOracle<T>,
    ind: &IndependenceOracle,
    delta: f64,
    r: usize,
    seeds: impl IntoIterator<Item = u64>,
) -> Result<f64> {
    let mut runs = 0usize;
    let mut failures = 0usize;
    for seed in seeds {
        let order = crate::stream::uniform_order(f.n(), seed);
        let out = run_filter_known_rank(&order, f, ind, delta, r)?;
        runs += 1;
        failures += usize::from(out.failed);
    }
    if runs == 0 {
        return Err(Error::input("at least one trial is required"));
    }
    Ok(failures as f64 / runs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::Constraint;
    use crate::objectives::Objective;
    use crate::stream::uniform_order;

    #[test]
    fn ladder_length_example() {
        assert_eq!(ladder_length(0.5, 2), 6);
    }

    #[test]
    fn ladder_example() {
        let l = build_ladder(&[1.0f64, 0.3], 0.5, 2);
        assert_eq!(l.k, 6);
        assert!((l.v[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((l.v[2] - 4.0 / 9.0).abs() < 1e-12);
        assert!((l.v[3] - 8.0 / 27.0).abs() < 1e-12);
        assert_eq!(l.w[0], 1.0);
        assert!((l.w[1] - 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_marginals_give_zero_ladder() {
        let l = build_ladder(&[0.0f64, 0.0], 0.3, 2);
        assert!(l.v.iter().all(|&v| v == 0.0));
        assert!(l.w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fallback_returns_everything() {
        let f = ValueOracle::new(Objective::<f64>::linear(vec![1.0; 10]).unwrap());
        let m = IndependenceOracle::new(Constraint::uniform(10, 5));
        let out = run_filter_known_rank(&uniform_order(10, 1), &f, &m, 0.3, 5).unwrap();
        assert!(out.fallback);
        assert!(out.s_delta.is_empty());
        assert_eq!(out.h.len(), 10);
    }

    #[test]
    fn infeasible_tail_gives_empty_pool() {
        // rank 1: after the prefix picks something no tail element fits S_1,
        // and S_0 = ∅ only admits tail elements above w_1 = best marginal
        let f = ValueOracle::new(Objective::<f64>::linear(vec![1.0; 40]).unwrap());
        let m = IndependenceOracle::new(Constraint::uniform(40, 1));
        let out = run_filter_known_rank(&uniform_order(40, 3), &f, &m, 0.5, 1).unwrap();
        assert_eq!(out.s_delta.len(), 1);
        assert!(out.h.is_empty());
        assert!(!out.failed);
    }

    #[test]
    fn selection_exposed_after_prefix() {
        let f = ValueOracle::new(Objective::<f64>::linear((0..20).map(|i| i as f64).collect()).unwrap());
        let m = IndependenceOracle::new(Constraint::uniform(20, 2));
        let order = uniform_order(20, 5);
        let mut filt = KnownRankFilter::new(&f, &m, 20, 0.5, 2, None).unwrap();
        for (t, &u) in order.perm().iter().enumerate() {
            assert_eq!(filt.selection().is_some(), t >= filt.prefix_len());
            filt.feed(u).unwrap();
        }
        let out = filt.finish().unwrap();
        assert_eq!(out.slots.len(), 2);
        // prefix of 10 positions split in two blocks; each slot is its block's best
        for (j, slot) in out.slots.iter().enumerate() {
            let best = order.perm()[j * 5..(j + 1) * 5].iter().copied().max().unwrap();
            assert_eq!(*slot, Some(best));
        }
    }

    #[test]
    fn unknown_rank_levels() {
        let f = ValueOracle::new(Objective::<f64>::linear((0..400).map(|i| (i % 17) as f64).collect()).unwrap());
        let m = IndependenceOracle::new(Constraint::uniform(400, 3));
        let out = run_filter_unknown_rank(&uniform_order(400, 2), &f, &m, 0.25, 2).unwrap();
        assert_eq!(out.levels.len(), 2);
        for l in &out.levels {
            assert_eq!(l.base.len(), 3);
            assert_eq!(l.r_h, 7);
            assert!(l.s.len() <= 3);
        }
        assert!(m.is_independent(&out.best_s).unwrap());
    }
}
