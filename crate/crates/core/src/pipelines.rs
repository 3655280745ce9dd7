//! Composed algorithms and baseline solvers.

use crate::boosting::{niid_params, BoostRun, StreamBooster};
use crate::constraints::{rank_info, IndepState, IndependenceOracle, RankInfo};
use crate::error::{check_range, Error, Result};
use crate::filtering::KnownRankFilter;
use crate::objectives::{distinct, MultilinearOracle, ValueOracle, ValueState};
use crate::scalar::{tol_for, Scalar};
use crate::seed::{derive_seed, tags};
use crate::stream::{process2_plan, uniform_order, StreamOrder};

/// Node budget of the exhaustive searches.
pub const SEARCH_BUDGET: u64 = 10_000_000;

/// Repeatedly adds the feasible pool element of largest non-negative
/// marginal; ties go to the earlier pool position.
pub fn greedy_offline<T: Scalar>(f: &ValueOracle<T>, ind: &IndependenceOracle, pool: &[usize]) -> Vec<usize> {
    let mut val = f.empty_state();
    let mut st = ind.empty_state();
    let mut dead = vec![false; pool.len()];
    loop {
        let mut best: Option<(usize, T)> = None;
        for (i, &u) in pool.iter().enumerate() {
            if dead[i] || st.contains(u) {
                continue;
            }
            if !ind.can_add(&st, u) {
                // stays infeasible as the set grows
                dead[i] = true;
                continue;
            }
            let g = f.gain(&val, u);
            if g >= T::zero() && best.is_none_or(|(_, b)| g > b) {
                best = Some((u, g));
            }
        }
        match best {
            Some((u, _)) => {
                ind.push(&mut st, u);
                f.push(&mut val, u);
            }
            None => return st.elements().to_vec(),
        }
    }
}

struct Search<'a, T> {
    f: &'a ValueOracle<T>,
    ind: &'a IndependenceOracle,
    pool: Vec<usize>,
    size_cap: usize,
    budget: u64,
    visited: u64,
    best: (Vec<usize>, T),
}

impl<T: Scalar> Search<'_, T> {
    fn dfs(&mut self, start: usize, val: &ValueState<T>, st: &IndepState) -> Result<()> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Error::capability(format!("exhaustive search exceeded {} nodes", self.budget)));
        }
        let here = val.value();
        let tol = tol_for(self.best.1);
        if here > self.best.1 + tol {
            self.best = (val.elements().to_vec(), here);
        }
        if st.len() >= self.size_cap {
            return Ok(());
        }
        let mut cands = Vec::new();
        for idx in start..self.pool.len() {
            let u = self.pool[idx];
            if self.ind.can_add(st, u) {
                cands.push((idx, self.f.gain(val, u)));
            }
        }
        let mut gains: Vec<T> = cands.iter().map(|&(_, g)| g).filter(|&g| g > T::zero()).collect();
        gains.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let room = self.size_cap - st.len();
        let bound = here + gains.iter().take(room).copied().sum::<T>();
        if bound <= self.best.1 + tol {
            return Ok(());
        }
        for (idx, _) in cands {
            let u = self.pool[idx];
            let mut v2 = val.clone();
            let mut s2 = st.clone();
            self.f.push(&mut v2, u);
            self.ind.push(&mut s2, u);
            self.dfs(idx + 1, &v2, &s2)?;
        }
        Ok(())
    }
}

fn search<T: Scalar>(
    f: &ValueOracle<T>,
    ind: &IndependenceOracle,
    pool: &[usize],
    size_cap: usize,
    budget: u64,
) -> Result<(Vec<usize>, T)> {
    check_range(pool, f.n())?;
    let val = f.empty_state();
    let mut s = Search {
        f,
        ind,
        pool: distinct(pool),
        size_cap,
        budget,
        visited: 0,
        best: (Vec::new(), val.value()),
    };
    let st = ind.empty_state();
    // the empty set may itself be dependent only for degenerate tables
    if !ind.is_independent(&[])? {
        return Err(Error::input("empty set is not independent"));
    }
    s.dfs(0, &val, &st)?;
    let mut best = s.best;
    best.0.sort_unstable();
    Ok(best)
}

/// Best independent subset of `pool` with at most `size_cap` elements.
///
/// Depth-first search in increasing index order with a submodular upper
/// bound; ties keep the lexicographically smallest set.
pub fn exhaustive_best_subset<T: Scalar>(
    f: &ValueOracle<T>,
    ind: &IndependenceOracle,
    pool: &[usize],
    size_cap: usize,
) -> Result<Vec<usize>> {
    Ok(search(f, ind, pool, size_cap, SEARCH_BUDGET)?.0)
}

/// Exact optimum over the independence system.
pub fn brute_force_opt<T: Scalar>(
    f: &ValueOracle<T>,
    ind: &IndependenceOracle,
    n_cap: usize,
) -> Result<(Vec<usize>, T)> {
    let n = f.n();
    let rank = rank_info(ind);
    let small_rank = rank.exact && rank.r <= 4;
    if n > n_cap && !small_rank {
        return Err(Error::capability(format!(
            "brute force needs n <= {n_cap} or a matroid of rank <= 4 (n = {n}, r = {})",
            rank.r
        )));
    }
    let cap = if rank.exact { rank.r } else { n };
    let pool: Vec<usize> = (0..n).collect();
    search(f, ind, &pool, cap, SEARCH_BUDGET * 5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Greedy,
    Exhaustive { size_cap: usize },
}

/// Better of `S_δ` and the solver's answer on `S_δ ∪ H`.
pub fn combine_offline<T: Scalar>(
    s_delta: &[usize],
    h: &[usize],
    f: &ValueOracle<T>,
    ind: &IndependenceOracle,
    solver: Solver,
) -> Result<Vec<usize>> {
    let mut pool = s_delta.to_vec();
    pool.extend_from_slice(h);
    let pool = distinct(&pool);
    let a = match solver {
        Solver::Greedy => greedy_offline(f, ind, &pool),
        Solver::Exhaustive { size_cap } => exhaustive_best_subset(f, ind, &pool, size_cap)?,
    };
    let fs = f.eval(s_delta)?;
    let fa = f.eval(&a)?;
    let out = if fa > fs { a } else { s_delta.to_vec() };
    let fo = f.value_raw(&distinct(&out));
    if fo < fs.max(fa) - tol_for(fs.max(fa)) {
        return Err(Error::invariant("combiner output below one of its inputs"));
    }
    Ok(out)
}

/// `δ = ε / (2βp(c + α))` with `c = 1 + p`.
pub fn combiner_delta(eps: f64, p: f64, alpha: f64, beta: f64) -> f64 {
    eps / (2.0 * beta * p * (1.0 + p + alpha))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OracleCounts {
    pub f: u64,
    pub indep: u64,
    pub multilinear: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Components<T> {
    pub s_delta: Option<T>,
    /// `f(A*)` or `f(A)` from the offline solver.
    pub offline: Option<T>,
    /// `f(T)` from boosting.
    pub boosted: Option<T>,
}

#[derive(Clone, Debug)]
pub struct PipelineResult<T> {
    pub output: Vec<usize>,
    pub value: T,
    pub components: Components<T>,
    pub passes: usize,
    pub stored_peak: usize,
    pub counts: OracleCounts,
    pub failed_filter: bool,
    /// Exhaustive `A*` exceeded its budget and greedy was used instead.
    pub exhaustive_fallback: bool,
    pub rank: RankInfo,
}

struct Counter<'a, 'f, T> {
    f: &'a ValueOracle<T>,
    ind: &'a IndependenceOracle,
    fo: &'a MultilinearOracle<'f, T>,
    start: OracleCounts,
}

impl<'a, 'f, T: Scalar> Counter<'a, 'f, T> {
    fn new(f: &'a ValueOracle<T>, ind: &'a IndependenceOracle, fo: &'a MultilinearOracle<'f, T>) -> Self {
        Counter {
            f,
            ind,
            fo,
            start: OracleCounts {
                f: f.calls(),
                indep: ind.calls(),
                multilinear: fo.calls(),
            },
        }
    }

    fn read(&self) -> OracleCounts {
        OracleCounts {
            f: self.f.calls() - self.start.f,
            indep: self.ind.calls() - self.start.indep,
            multilinear: self.fo.calls() - self.start.multilinear,
        }
    }
}

fn check_matroid(ind: &IndependenceOracle, what: &str) -> Result<RankInfo> {
    if !ind.is_matroid() {
        return Err(Error::input(format!("{what} requires a matroid constraint")));
    }
    let rank = rank_info(ind);
    if rank.r == 0 {
        return Err(Error::input("matroid has rank 0"));
    }
    Ok(rank)
}

/// `⌈ln(3/ε)⌉`.
pub fn pass_count(eps: f64) -> usize {
    ((3.0 / eps).ln() - 1e-12).ceil().max(1.0) as usize
}

/// Repeated streaming boosts, each over a fresh uniform order, with
/// heights `e^{i-ℓ-1}`.
pub fn multi_pass<T: Scalar>(
    fo: &MultilinearOracle<T>,
    ind: &IndependenceOracle,
    eps: f64,
    seed: u64,
) -> Result<PipelineResult<T>> {
    if !(eps > 0.0 && eps < 3.0) {
        return Err(Error::input(format!("ε must lie in (0, 3), got {eps}")));
    }
    let f = fo.value_oracle();
    let rank = check_matroid(ind, "multi-pass")?;
    let counter = Counter::new(f, ind, fo);
    let passes = pass_count(eps);
    let mut a: Vec<usize> = Vec::new();
    let mut stored_peak = 0;
    for i in 1..=passes {
        let pass_seed = derive_seed(seed, tags::PASS ^ i as u64);
        let order = uniform_order(f.n(), derive_seed(pass_seed, tags::ORDER));
        let h = (i as f64 - passes as f64 - 1.0).exp();
        let params = niid_params(eps / 6.0, rank.r, h)?;
        let run = crate::boosting::run_stream_boost(&order, fo, ind, &a, &params, pass_seed)?;
        stored_peak = stored_peak.max(run.stored_peak);
        a = run.a;
    }
    let value = f.eval(&a)?;
    Ok(PipelineResult {
        components: Components {
            boosted: Some(value),
            ..Default::default()
        },
        output: a,
        value,
        passes,
        stored_peak,
        counts: counter.read(),
        failed_filter: false,
        exhaustive_fallback: false,
        rank,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Exhaustive `A*` over `S_ε ∪ H`.
    Fpt,
    /// Greedy over `S_ε ∪ H`.
    Poly,
}

/// One pass: the filter runs over the whole stream; from the end of its
/// prefix a booster seeded with `S_ε` consumes the remaining positions.
pub fn single_pass_matroid<T: Scalar>(
    order: &StreamOrder,
    fo: &MultilinearOracle<T>,
    ind: &IndependenceOracle,
    eps: f64,
    mode: Mode,
    seed: u64,
) -> Result<PipelineResult<T>> {
    let f = fo.value_oracle();
    let rank = check_matroid(ind, "single-pass")?;
    let counter = Counter::new(f, ind, fo);
    let n = order.len();
    let mut filter = KnownRankFilter::new(f, ind, n, eps, rank.r, None)?;
    let prefix = filter.prefix_len();
    let perm = order.perm();
    for &u in &perm[..prefix] {
        filter.feed(u)?;
    }
    let s_eps: Vec<usize> = filter.selection().unwrap_or(&[]).to_vec();
    let params = niid_params(eps, rank.r, (-1.0f64).exp())?;
    let windows = process2_plan(n - prefix, params.ell, params.p_prime, derive_seed(seed, tags::WINDOWS))?;
    let mut booster = StreamBooster::new(fo, ind, &s_eps, params, &windows, derive_seed(seed, tags::ESTIMATOR))?;
    for &u in &perm[prefix..] {
        filter.feed(u)?;
        booster.feed(u)?;
    }
    let filtered = filter.finish()?;
    let boosted: BoostRun<T> = booster.finish()?;
    let pool_h: &[usize] = if filtered.failed { &[] } else { &filtered.h };
    let mut pool = s_eps.clone();
    pool.extend_from_slice(pool_h);
    let pool = distinct(&pool);
    let mut exhaustive_fallback = false;
    let offline = match mode {
        Mode::Fpt => match exhaustive_best_subset(f, ind, &pool, rank.r) {
            Ok(a) => a,
            Err(Error::Capability(_)) => {
                exhaustive_fallback = true;
                greedy_offline(f, ind, &pool)
            }
            Err(e) => return Err(e),
        },
        Mode::Poly => greedy_offline(f, ind, &pool),
    };
    let f_t = f.eval(&boosted.a)?;
    let f_a = f.eval(&offline)?;
    let f_s = f.eval(&s_eps)?;
    let (output, value) = if f_a > f_t { (offline, f_a) } else { (boosted.a.clone(), f_t) };
    if value < f_t.max(f_a) {
        return Err(Error::invariant("single-pass output below max(f(T), f(A))"));
    }
    let stored_peak = filtered.stored_peak + boosted.stored_peak;
    Ok(PipelineResult {
        output,
        value,
        components: Components {
            s_delta: Some(f_s),
            offline: Some(f_a),
            boosted: Some(f_t),
        },
        passes: 1,
        stored_peak,
        counts: counter.read(),
        failed_filter: filtered.failed,
        exhaustive_fallback,
        rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::Constraint;
    use crate::objectives::Objective;

    #[test]
    fn greedy_linear_top_k() {
        let f = ValueOracle::new(Objective::<f64>::linear(vec![3.0, 1.0, 4.0, 1.5, 9.0]).unwrap());
        let m = IndependenceOracle::new(Constraint::uniform(5, 2));
        let mut g = greedy_offline(&f, &m, &[0, 1, 2, 3, 4]);
        g.sort();
        assert_eq!(g, vec![2, 4]);
        assert!(greedy_offline(&f, &m, &[]).is_empty());
    }

    #[test]
    fn exhaustive_examples() {
        let f = ValueOracle::new(Objective::<f64>::linear(vec![1.0, 5.0, 2.0]).unwrap());
        let m = IndependenceOracle::new(Constraint::uniform(3, 1));
        assert_eq!(exhaustive_best_subset(&f, &m, &[0, 1, 2], 1).unwrap(), vec![1]);
        assert!(exhaustive_best_subset(&f, &m, &[], 1).unwrap().is_empty());
    }

    #[test]
    fn exhaustive_lexicographic_ties() {
        let f = ValueOracle::new(Objective::<f64>::linear(vec![2.0, 1.0, 1.0, 2.0]).unwrap());
        let m = IndependenceOracle::new(Constraint::uniform(4, 1));
        assert_eq!(exhaustive_best_subset(&f, &m, &[3, 0, 1], 1).unwrap(), vec![0]);
    }

    #[test]
    fn brute_force_small() {
        let f = ValueOracle::new(Objective::<f64>::unit_coverage(vec![vec![1, 2], vec![2, 3], vec![0]]).unwrap());
        let m = IndependenceOracle::new(Constraint::uniform(3, 2));
        let (s, v) = brute_force_opt(&f, &m, 12).unwrap();
        assert_eq!(v, 3.0);
        assert_eq!(s, vec![0, 1]);
    }

    #[test]
    fn brute_force_only_empty() {
        let f = ValueOracle::new(Objective::<f64>::linear(vec![1.0, 2.0]).unwrap());
        let m = IndependenceOracle::new(Constraint::table(2, vec![true, false, false, false], false).unwrap());
        assert_eq!(brute_force_opt(&f, &m, 12).unwrap(), (vec![], 0.0));
    }

    #[test]
    fn combiner_examples() {
        let f = ValueOracle::new(Objective::<f64>::linear(vec![1.0, 5.0, 2.0]).unwrap());
        let m = IndependenceOracle::new(Constraint::uniform(3, 1));
        assert_eq!(combine_offline(&[0], &[], &f, &m, Solver::Greedy).unwrap(), vec![0]);
        assert_eq!(combine_offline(&[0], &[1, 2], &f, &m, Solver::Greedy).unwrap(), vec![1]);
        let d = combiner_delta(0.1, 1.0, 2.0, 8.0);
        assert!((d - 0.1 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn pass_counts() {
        assert_eq!(pass_count(0.1), 4);
        assert_eq!(pass_count(1.5), 1);
    }
}
