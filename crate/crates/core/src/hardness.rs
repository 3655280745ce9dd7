//! Layered p-system on which short-memory streaming algorithms fail under
//! a level-by-level arrival order.
//!
//! Level `i` (1-based) holds `A_i` with `α^i k²` elements followed by `B_i`
//! with `α^i r k²` elements. Levels are laid out consecutively in index
//! order. A set `S` is independent when, for every level `i`,
//! `|S ∩ (A_i ∪ B_i)|` is at most
//!
//! * `0` if some higher level `i'` has `|S ∩ B_i'| > α^i'`,
//! * `α^i k` otherwise, if `S` meets `B_i`,
//! * `α^i k²` otherwise.

use rand::seq::SliceRandom;

use crate::constraints::{Constraint, IndependenceOracle};
use crate::error::{Error, Result};
use crate::filtering::run_filter_capped;
use crate::objectives::{Objective, ValueOracle};
use crate::pipelines::combine_offline;
use crate::scalar::Scalar;
use crate::seed::{derive_seed, rng, tags};
use crate::stream::{uniform_order, Provenance, StreamOrder};

/// Upper limit on the materialized ground set.
pub const MAX_ELEMENTS: usize = 50_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HardnessSystem {
    p: usize,
    k: usize,
    alpha: usize,
    ell: usize,
    r: usize,
    /// `α^i` for `i = 0..=ℓ`.
    pow: Vec<usize>,
    /// First index of each level `1..=ℓ`, plus the end.
    starts: Vec<usize>,
}

/// Per-level element counts of a set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelCounts {
    total: Vec<usize>,
    b: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Location {
    /// 1-based level.
    pub level: usize,
    pub in_b: bool,
    /// Index within `A_i` or `B_i`.
    pub j: usize,
}

impl HardnessSystem {
    fn new(p: usize, k: usize, alpha: usize, ell: usize, r: usize) -> Result<Self> {
        let too_big = || Error::capability("hardness instance too large to materialize");
        let mut pow = vec![1usize];
        for _ in 0..ell {
            pow.push(pow.last().unwrap().checked_mul(alpha).ok_or_else(too_big)?);
        }
        let k2 = k * k;
        let mut starts = vec![0usize];
        for i in 1..=ell {
            let size = pow[i]
                .checked_mul(k2)
                .and_then(|a| a.checked_mul(1 + r))
                .ok_or_else(too_big)?;
            let next = starts.last().unwrap().checked_add(size).ok_or_else(too_big)?;
            if next > MAX_ELEMENTS {
                return Err(too_big());
            }
            starts.push(next);
        }
        Ok(HardnessSystem {
            p,
            k,
            alpha,
            ell,
            r,
            pow,
            starts,
        })
    }

    pub fn n(&self) -> usize {
        *self.starts.last().unwrap()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn a_size(&self, level: usize) -> usize {
        self.pow[level] * self.k * self.k
    }

    pub fn b_size(&self, level: usize) -> usize {
        self.a_size(level) * self.r
    }

    /// Index range of `A_i ∪ B_i`.
    pub fn level_range(&self, level: usize) -> std::ops::Range<usize> {
        self.starts[level - 1]..self.starts[level]
    }

    pub fn a_range(&self, level: usize) -> std::ops::Range<usize> {
        let s = self.starts[level - 1];
        s..s + self.a_size(level)
    }

    pub fn b_range(&self, level: usize) -> std::ops::Range<usize> {
        let s = self.starts[level - 1] + self.a_size(level);
        s..self.starts[level]
    }

    pub fn locate(&self, u: usize) -> Location {
        let level = self.starts.partition_point(|&s| s <= u);
        let off = u - self.starts[level - 1];
        let a = self.a_size(level);
        if off < a {
            Location { level, in_b: false, j: off }
        } else {
            Location {
                level,
                in_b: true,
                j: off - a,
            }
        }
    }

    pub(crate) fn empty_counts(&self) -> LevelCounts {
        LevelCounts {
            total: vec![0; self.ell + 1],
            b: vec![0; self.ell + 1],
        }
    }

    pub(crate) fn add(&self, c: &mut LevelCounts, u: usize) {
        let loc = self.locate(u);
        c.total[loc.level] += 1;
        if loc.in_b {
            c.b[loc.level] += 1;
        }
    }

    /// Level capacity per the three-way rule, scanning levels top-down.
    fn admissible(&self, c: &LevelCounts) -> bool {
        let k2 = self.k * self.k;
        let mut blocked = false;
        for i in (1..=self.ell).rev() {
            let cap = if blocked {
                0
            } else if c.b[i] > 0 {
                self.pow[i] * self.k
            } else {
                self.pow[i] * k2
            };
            if c.total[i] > cap {
                return false;
            }
            blocked |= c.b[i] > self.pow[i];
        }
        true
    }

    pub(crate) fn can_add(&self, c: &LevelCounts, u: usize) -> bool {
        let mut c = c.clone();
        self.add(&mut c, u);
        self.admissible(&c)
    }

    pub(crate) fn is_independent_distinct(&self, set: &[usize]) -> bool {
        let mut c = self.empty_counts();
        for &u in set {
            self.add(&mut c, u);
        }
        self.admissible(&c)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Overrides {
    pub k: Option<usize>,
    pub alpha: Option<usize>,
    pub ell: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct HardnessInstance {
    pub p: usize,
    pub system: HardnessSystem,
}

impl HardnessInstance {
    /// Defaults `k = p - 1`, `α = k² + 1`, `ℓ = k`.
    pub fn build(p: usize, r: usize, overrides: Overrides) -> Result<Self> {
        if p < 2 {
            return Err(Error::input(format!("p must be at least 2, got {p}")));
        }
        if r == 0 {
            return Err(Error::input("r must be at least 1"));
        }
        let k = overrides.k.unwrap_or(p - 1);
        let alpha = overrides.alpha.unwrap_or(k * k + 1);
        let ell = overrides.ell.unwrap_or(k);
        if k == 0 || ell == 0 {
            return Err(Error::input("k and ℓ must be at least 1"));
        }
        if alpha < 2 {
            return Err(Error::input(format!("α must be at least 2, got {alpha}")));
        }
        // p >= k + k²/(α-1), compared without division
        if p * (alpha - 1) < k * (alpha - 1) + k * k {
            return Err(Error::input(format!(
                "p >= k + k²/(α-1) fails: {p} < {k} + {}/{}",
                k * k,
                alpha - 1
            )));
        }
        Ok(HardnessInstance {
            p,
            system: HardnessSystem::new(p, k, alpha, ell, r)?,
        })
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn from_system(system: &HardnessSystem) -> Result<Self> {
        let o = Overrides {
            k: Some(system.k),
            alpha: Some(system.alpha),
            ell: Some(system.ell),
        };
        Self::build(system.p, system.r, o)
    }

    /// Closed-form size `Σ_i α^i k² (1 + r)`.
    pub fn closed_form_n(&self) -> usize {
        let s = &self.system;
        (1..=s.ell).map(|i| s.pow[i] * s.k * s.k * (1 + s.r)).sum()
    }

    pub fn constraint(&self) -> Constraint {
        Constraint::hardness(self.system.clone())
    }

    /// Linear objective with weight `α^{-i}` on level `i`.
    pub fn objective<T: Scalar>(&self) -> Objective<T> {
        let s = &self.system;
        let mut w = vec![T::zero(); s.n()];
        for i in 1..=s.ell {
            let wi = T::lit(1.0 / s.pow[i] as f64);
            for x in &mut w[s.level_range(i)] {
                *x = wi;
            }
        }
        Objective::linear(w).expect("positive weights")
    }

    /// `ℓk²` with witness `∪ A_i`; the witness is checked for independence
    /// and value.
    pub fn opt_value<T: Scalar>(&self) -> Result<(Vec<usize>, T)> {
        let s = &self.system;
        let witness: Vec<usize> = (1..=s.ell).flat_map(|i| s.a_range(i)).collect();
        let value = T::lit((s.ell * s.k * s.k) as f64);
        if !s.is_independent_distinct(&witness) {
            return Err(Error::invariant("hardness witness is dependent"));
        }
        let f = ValueOracle::new(self.objective::<T>());
        let got = f.value_raw(&witness);
        if (got - value).abs() > crate::scalar::tol_for(value) {
            return Err(Error::invariant(format!("witness value {got} differs from ℓk² = {value}")));
        }
        Ok((witness, value))
    }
}

/// Levels `1..=ℓ` in sequence, each level shuffled.
pub fn adversarial_order(inst: &HardnessInstance, seed: u64) -> StreamOrder {
    let s = &inst.system;
    let mut g = rng(seed);
    let mut perm = Vec::with_capacity(s.n());
    for i in 1..=s.ell {
        let start = perm.len();
        perm.extend(s.level_range(i));
        perm[start..].shuffle(&mut g);
    }
    StreamOrder::new(perm, Provenance::Adversarial { tag: format!("hardness-levels-{seed}") })
        .expect("levels partition the ground set")
}

/// Streaming algorithm run by [`degradation_probe`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbeAlgorithm {
    /// Known-rank filter followed by greedy over `S_δ ∪ H`.
    Filter { delta: f64, r: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeStats {
    pub opt: f64,
    pub adversarial: Vec<f64>,
    pub uniform: Vec<f64>,
    pub adversarial_mean: f64,
    pub uniform_mean: f64,
}

impl ProbeStats {
    pub fn adversarial_ratio(&self) -> f64 {
        self.opt / self.adversarial_mean
    }

    pub fn uniform_ratio(&self) -> f64 {
        self.opt / self.uniform_mean
    }
}

/// Runs one probe trial and returns the output value. The output must be
/// made of stored elements only.
fn probe_once<T: Scalar>(
    order: &StreamOrder,
    f: &ValueOracle<T>,
    ind: &IndependenceOracle,
    algorithm: ProbeAlgorithm,
    memory_cap: usize,
) -> Result<T> {
    let ProbeAlgorithm::Filter { delta, r } = algorithm;
    let out = run_filter_capped(order, f, ind, delta, r, Some(memory_cap))?;
    let mut stored: Vec<usize> = out.s_delta.iter().chain(&out.h).copied().collect();
    stored.sort_unstable();
    if out.stored_peak > memory_cap {
        return Err(Error::invariant(format!("stored {} elements over cap {memory_cap}", out.stored_peak)));
    }
    let chosen = combine_offline(&out.s_delta, &out.h, f, ind, crate::pipelines::Solver::Greedy)?;
    if let Some(u) = chosen.iter().find(|u| stored.binary_search(u).is_err()) {
        return Err(Error::invariant(format!("output element {u} was never stored")));
    }
    Ok(f.value_raw(&crate::objectives::distinct(&chosen)))
}

/// Mean value under adversarial and uniform orders over `trials` seeds.
pub fn degradation_probe<T: Scalar>(
    inst: &HardnessInstance,
    algorithm: ProbeAlgorithm,
    memory_cap: usize,
    trials: usize,
    seed: u64,
) -> Result<ProbeStats> {
    if trials == 0 {
        return Err(Error::input("at least one trial is required"));
    }
    let f = ValueOracle::new(inst.objective::<T>());
    let ind = IndependenceOracle::new(inst.constraint());
    let (_, opt) = inst.opt_value::<T>()?;
    let mut adversarial = Vec::with_capacity(trials);
    let mut uniform = Vec::with_capacity(trials);
    for t in 0..trials {
        let s = derive_seed(seed, tags::TRIAL ^ t as u64);
        let adv = adversarial_order(inst, derive_seed(s, tags::ORDER));
        adversarial.push(probe_once(&adv, &f, &ind, algorithm, memory_cap)?.to_f64_lossy());
        let uni = uniform_order(inst.n(), derive_seed(s, tags::ORDER));
        uniform.push(probe_once(&uni, &f, &ind, algorithm, memory_cap)?.to_f64_lossy());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(ProbeStats {
        opt: opt.to_f64_lossy(),
        adversarial_mean: mean(&adversarial),
        uniform_mean: mean(&uniform),
        adversarial,
        uniform,
    })
}

/// Intersection of `p` partition matroids on which greedy, breaking ties
/// toward `t`, scores 1 while the optimum scores `p + 1`.
///
/// Elements `0..m` form `t`, followed by `o_1..o_{p+1}`. Item 0 is covered
/// by every element of `t` and by `o_{p+1}`; item `j` by `o_j` alone.
/// Matroid `j` puts `o_j` and all of `t` in one part of capacity 1 and
/// every other `o_i` in its own part.
#[derive(Clone, Debug)]
pub struct GreedyTrap<T> {
    pub objective: Objective<T>,
    pub constraint: Constraint,
    pub t: Vec<usize>,
    pub o: Vec<usize>,
}

pub fn greedy_trap<T: Scalar>(p: usize, m: usize) -> Result<GreedyTrap<T>> {
    if p == 0 || m == 0 {
        return Err(Error::input("greedy trap needs p >= 1 and a non-empty t"));
    }
    let n = m + p + 1;
    let t: Vec<usize> = (0..m).collect();
    let o: Vec<usize> = (m..n).collect();
    let mut covers = vec![vec![0]; m];
    covers.extend((1..=p).map(|j| vec![j]));
    covers.push(vec![0]);
    let objective = Objective::coverage(covers, vec![T::one(); p + 1])?;
    let matroids = (0..p)
        .map(|j| {
            let mut parts = vec![t.iter().copied().chain([o[j]]).collect::<Vec<_>>()];
            parts.extend((0..=p).filter(|&i| i != j).map(|i| vec![o[i]]));
            let caps = vec![1; parts.len()];
            Constraint::partition(n, &parts, caps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GreedyTrap {
        objective,
        constraint: Constraint::intersection(matroids)?,
        t,
        o,
    })
}
