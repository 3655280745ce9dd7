//! Stream orders, block partitions and window samplers.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Uniform { seed: u64 },
    Adversarial { tag: String },
}

/// Arrival order: `perm[t]` is the element arriving at position `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamOrder {
    perm: Vec<usize>,
    provenance: Provenance,
}

impl StreamOrder {
    pub fn new(perm: Vec<usize>, provenance: Provenance) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &u in &perm {
            if u >= perm.len() || seen[u] {
                return Err(Error::input(format!("order is not a permutation of 0..{}", perm.len())));
            }
            seen[u] = true;
        }
        Ok(StreamOrder { perm, provenance })
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// `pos[u]` is the arrival position of `u`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.perm.len()];
        for (t, &u) in self.perm.iter().enumerate() {
            pos[u] = t;
        }
        pos
    }
}

/// Seeded Fisher-Yates permutation of `0..n`.
pub fn uniform_order(n: usize, seed: u64) -> StreamOrder {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng(seed));
    StreamOrder {
        perm,
        provenance: Provenance::Uniform { seed },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BlockPlan {
    Blocks(Blocks),
    /// Stream too short for the block structure: output the whole stream.
    Fallback { n: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Blocks {
    /// Consecutive position ranges. For the unknown-rank plan these are
    /// `N'_1, N''_1, ..., N'_q, N''_q`.
    pub ranges: Vec<Range<usize>>,
    pub tail: Range<usize>,
    pub block_len: usize,
    /// Effective `δ` after clamping and the integrality adjustment.
    pub delta: f64,
    /// Number of halving levels; 0 for the known-rank plan.
    pub q: usize,
}

impl BlockPlan {
    pub fn blocks(&self) -> Option<&Blocks> {
        match self {
            BlockPlan::Blocks(b) => Some(b),
            BlockPlan::Fallback { .. } => None,
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self, BlockPlan::Fallback { .. })
    }
}

fn clamp_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::input(format!("δ must be positive, got {delta}")));
    }
    Ok(delta.min(0.5))
}

fn consecutive(count: usize, len: usize, n: usize, delta: f64, q: usize) -> Blocks {
    let ranges = (0..count).map(|j| j * len..(j + 1) * len).collect();
    Blocks {
        ranges,
        tail: count * len..n,
        block_len: len,
        delta,
        q,
    }
}

/// `r` blocks of `δ'n/r` positions, `δ'` the largest value in `[δ/2, δ]`
/// making that an integer.
pub fn block_plan_known_rank(n: usize, delta: f64, r: usize) -> Result<BlockPlan> {
    if r == 0 {
        return Err(Error::input("rank bound r must be at least 1"));
    }
    let delta = clamp_delta(delta)?;
    let x = delta * n as f64 / r as f64;
    if x < 1.0 - 1e-9 {
        return Ok(BlockPlan::Fallback { n });
    }
    let len = (x + 1e-9).floor() as usize;
    let eff = (len * r) as f64 / n as f64;
    Ok(BlockPlan::Blocks(consecutive(r, len, n, eff, 0)))
}

/// `⌈log2(1/δ)⌉` for `δ <= 1/2`.
pub fn halving_levels(delta: f64) -> Result<usize> {
    let delta = clamp_delta(delta)?;
    Ok(((1.0 / delta).log2() - 1e-9).ceil().max(1.0) as usize)
}

/// `2q` blocks of `⌊δn/(2q)⌋` positions.
pub fn block_plan_unknown_rank(n: usize, delta: f64) -> Result<BlockPlan> {
    let delta = clamp_delta(delta)?;
    let q = halving_levels(delta)?;
    let x = delta * n as f64 / (2 * q) as f64;
    if x < 6.0 {
        return Ok(BlockPlan::Fallback { n });
    }
    let len = (x + 1e-9).floor() as usize;
    Ok(BlockPlan::Blocks(consecutive(2 * q, len, n, delta, q)))
}

/// `parts` sub-blocks of `⌊|block| / parts⌋` positions; `None` when that is 0.
pub fn sub_blocks(block: &Range<usize>, parts: usize) -> Option<Vec<Range<usize>>> {
    let len = block.len().checked_div(parts)?;
    if len == 0 {
        return None;
    }
    Some((0..parts).map(|j| block.start + j * len..block.start + (j + 1) * len).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowPlan {
    pub sizes: Vec<usize>,
    pub p_prime: f64,
}

impl WindowPlan {
    pub fn ell(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Consecutive position ranges starting at `offset`.
    pub fn ranges(&self, offset: usize) -> Vec<Range<usize>> {
        let mut start = offset;
        self.sizes
            .iter()
            .map(|&w| {
                let r = start..start + w;
                start += w;
                r
            })
            .collect()
    }
}

fn check_window_params(ell: usize, p_prime: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p_prime) {
        return Err(Error::input(format!("p' must lie in [0, 1], got {p_prime}")));
    }
    if ell as f64 * p_prime > 1.0 + 1e-12 {
        return Err(Error::input(format!("ℓ·p' = {} exceeds 1", ell as f64 * p_prime)));
    }
    Ok(())
}

fn draw_bin<R: Rng>(g: &mut R, ell: usize, p_prime: f64) -> Option<usize> {
    let u: f64 = g.gen();
    if ell == 0 || p_prime <= 0.0 || u >= ell as f64 * p_prime {
        return None;
    }
    Some(((u / p_prime) as usize).min(ell - 1))
}

/// Balls-into-bins window sizes: each of `n` balls is discarded with
/// probability `1 - ℓp'` and otherwise lands in a uniform bin.
pub fn process2_plan(n: usize, ell: usize, p_prime: f64, seed: u64) -> Result<WindowPlan> {
    check_window_params(ell, p_prime)?;
    let mut g = rng(seed);
    let mut sizes = vec![0; ell];
    for _ in 0..n {
        if let Some(b) = draw_bin(&mut g, ell, p_prime) {
            sizes[b] += 1;
        }
    }
    Ok(WindowPlan { sizes, p_prime })
}

/// Independent assignment of each element to at most one of `ℓ` windows.
pub fn process1_sample(n: usize, ell: usize, p_prime: f64, seed: u64) -> Result<Vec<Option<usize>>> {
    check_window_params(ell, p_prime)?;
    let mut g = rng(seed);
    Ok((0..n).map(|_| draw_bin(&mut g, ell, p_prime)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_order_basics() {
        assert!(uniform_order(0, 1).is_empty());
        assert_eq!(uniform_order(1, 1).perm(), &[0]);
        assert_eq!(uniform_order(5, 42), uniform_order(5, 42));
        assert!(StreamOrder::new(vec![0, 0], Provenance::Uniform { seed: 0 }).is_err());
    }

    #[test]
    fn known_rank_examples() {
        let b = block_plan_known_rank(100, 0.3, 5).unwrap();
        let b = b.blocks().unwrap();
        assert_eq!(b.block_len, 6);
        assert_eq!(b.tail, 30..100);
        assert_eq!(b.ranges.len(), 5);
        assert!(block_plan_known_rank(10, 0.3, 5).unwrap().is_fallback());
        let clamped = block_plan_known_rank(100, 0.9, 5).unwrap();
        assert_eq!(clamped.blocks().unwrap().block_len, 10);
        assert!(block_plan_known_rank(10, 0.3, 0).is_err());
    }

    #[test]
    fn known_rank_adjusts_delta_down() {
        let b = block_plan_known_rank(100, 0.25, 3).unwrap();
        let b = b.blocks().unwrap();
        assert_eq!(b.block_len, 8);
        assert!((b.delta - 0.24).abs() < 1e-12);
    }

    #[test]
    fn unknown_rank_examples() {
        assert_eq!(halving_levels(0.25).unwrap(), 2);
        assert_eq!(halving_levels(0.5).unwrap(), 1);
        let b = block_plan_unknown_rank(1000, 0.25).unwrap();
        assert_eq!(b.blocks().unwrap().ranges.len(), 4);
        assert_eq!(block_plan_unknown_rank(1000, 0.5).unwrap().blocks().unwrap().ranges.len(), 2);
        assert!(block_plan_unknown_rank(40, 0.25).unwrap().is_fallback());
    }

    #[test]
    fn window_examples() {
        let w = process2_plan(50, 5, 0.2, 3).unwrap();
        assert_eq!(w.total(), 50);
        assert!(process2_plan(10, 0, 0.5, 3).unwrap().sizes.is_empty());
        assert!(process2_plan(10, 3, 0.5, 3).is_err());
        assert!(process1_sample(5, 2, 0.0, 1).unwrap().iter().all(|a| a.is_none()));
        assert!(process1_sample(5, 1, 1.0, 1).unwrap().iter().all(|&a| a == Some(0)));
    }
}
