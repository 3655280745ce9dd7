//! Fractional local search over heights `h_i = h (1 + p/(r-p))^i`.

use crate::constraints::{find_best_swap, IndependenceOracle, SwapChoice};
use crate::error::{check_range, Error, Result};
use crate::objectives::{distinct, MultilinearOracle};
use crate::scalar::{tol_for, Scalar};
use crate::seed::{derive_seed, unit_hash};
use crate::stream::{process2_plan, StreamOrder, WindowPlan};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoostParams {
    pub h: f64,
    pub p_prime: f64,
    /// `1 - (1 - p')^r`.
    pub p: f64,
    pub ell: usize,
    pub r: usize,
}

impl BoostParams {
    pub fn new(h: f64, p_prime: f64, ell: usize, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::input("r must be at least 1"));
        }
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::input(format!("h must lie in (0, 1], got {h}")));
        }
        if !(0.0..=1.0).contains(&p_prime) {
            return Err(Error::input(format!("p' must lie in [0, 1], got {p_prime}")));
        }
        let p = 1.0 - (1.0 - p_prime).powi(r as i32);
        Self::from_parts(h, p_prime, p, ell, r)
    }

    fn from_parts(h: f64, p_prime: f64, p: f64, ell: usize, r: usize) -> Result<Self> {
        if p >= r as f64 {
            return Err(Error::input(format!("p = {p} must be below r = {r}")));
        }
        let params = BoostParams { h, p_prime, p, ell, r };
        let bound = params.ell_bound();
        if ell as f64 > bound + 1e-9 {
            return Err(Error::input(format!("ℓ = {ell} exceeds ln(1/h)/ln(1+p/(r-p)) = {bound}")));
        }
        Ok(params)
    }

    /// `ln(1/h) / ln(1 + p/(r-p))`.
    pub fn ell_bound(&self) -> f64 {
        let step = (self.p / (self.r as f64 - self.p)).ln_1p();
        if step <= 0.0 {
            f64::INFINITY
        } else {
            (1.0 / self.h).ln() / step
        }
    }

    pub fn height(&self, i: usize) -> f64 {
        self.h * (1.0 + self.p / (self.r as f64 - self.p)).powi(i as i32)
    }

    pub fn check_streaming(&self) -> Result<()> {
        if self.p_prime * self.ell as f64 > 1.0 + 1e-12 {
            return Err(Error::input(format!("p'·ℓ = {} exceeds 1", self.p_prime * self.ell as f64)));
        }
        Ok(())
    }
}

/// Streaming schedule: `δ' = δ/9`, `p' = δ'/r`, `ℓ = ⌊r/δ'⌋ - 1`, for
/// `h ∈ (0, 1/e]`.
pub fn niid_params(delta: f64, r: usize, h: f64) -> Result<BoostParams> {
    if !(delta > 0.0) {
        return Err(Error::input(format!("δ must be positive, got {delta}")));
    }
    if r == 0 {
        return Err(Error::input("r must be at least 1"));
    }
    if !(h > 0.0 && h <= (-1.0f64).exp() + 1e-12) {
        return Err(Error::input(format!("h must lie in (0, 1/e], got {h}")));
    }
    let dp = delta / 9.0;
    let p_prime = (dp / r as f64).min(1.0);
    let ell = ((r as f64 / dp + 1e-9).floor() as usize).saturating_sub(1);
    let params = BoostParams::new(h, p_prime, ell, r)?;
    params.check_streaming()?;
    Ok(params)
}

/// Offline schedule: `h = δ`, `p = min(δr, 1/2)`,
/// `ℓ = ⌊ln(1/δ)/ln(1 + p/(r-p))⌋`, `p' = 1 - (1-p)^{1/r}`.
pub fn offline_params(delta: f64, r: usize) -> Result<BoostParams> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!("δ must lie in (0, 1), got {delta}")));
    }
    if r == 0 {
        return Err(Error::input("r must be at least 1"));
    }
    let p = (delta * r as f64).min(0.5);
    let step = (p / (r as f64 - p)).ln_1p();
    let ell = ((1.0 / delta).ln() / step).floor() as usize;
    let p_prime = 1.0 - (1.0 - p).powf(1.0 / r as f64);
    BoostParams::from_parts(delta, p_prime, p, ell, r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwapCandidate<T> {
    /// `None` is ⊥.
    pub u: Option<usize>,
    pub v: usize,
    pub score: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterTrace<T> {
    /// 1-based iteration.
    pub i: usize,
    pub pool: Vec<usize>,
    pub a_before: Vec<usize>,
    pub best: Option<SwapCandidate<T>>,
    pub applied: bool,
}

#[derive(Clone, Debug)]
pub struct BoostRun<T> {
    pub a: Vec<usize>,
    /// Every element ever swapped in, in insertion order.
    pub history: Vec<usize>,
    pub swaps: usize,
    pub stored_peak: usize,
    pub trace: Vec<IterTrace<T>>,
}

/// Scores of one iteration: `F(h 1_A)` and `F(h 1_{A-u})` per `u`.
struct Iteration<T> {
    i: usize,
    h: T,
    nonce: u64,
    base: T,
    weights: Vec<T>,
    best: Option<SwapCandidate<T>>,
    pool: Vec<usize>,
}

fn open_iteration<T: Scalar>(fo: &MultilinearOracle<T>, a: &[usize], i: usize, h: f64, nonce: u64) -> Iteration<T> {
    let h = T::lit(h);
    let sorted = distinct(a);
    let base = fo.at_set(&sorted, h, nonce);
    let weights = a
        .iter()
        .map(|&u| {
            let rest: Vec<usize> = sorted.iter().copied().filter(|&x| x != u).collect();
            fo.at_set(&rest, h, nonce)
        })
        .collect();
    Iteration {
        i,
        h,
        nonce,
        base,
        weights,
        best: None,
        pool: Vec::new(),
    }
}

/// Best feasible `u` for `v` and its score; `None` when no swap is feasible.
fn score<T: Scalar>(
    fo: &MultilinearOracle<T>,
    ind: &IndependenceOracle,
    a: &[usize],
    it: &Iteration<T>,
    v: usize,
) -> Result<Option<SwapCandidate<T>>> {
    let u = match find_best_swap(ind, a, v, &it.weights)? {
        SwapChoice::Infeasible => return Ok(None),
        SwapChoice::Remove(u) => Some(u),
        SwapChoice::Bottom => {
            // every u is feasible; ⊥ scores F(A) and wins ties
            let mut best = (None, it.base);
            for (&u, &w) in a.iter().zip(&it.weights) {
                if w > best.1 {
                    best = (Some(u), w);
                }
            }
            best.0
        }
    };
    let removed = match u {
        None => it.base,
        Some(u) => it.weights[a.iter().position(|&x| x == u).expect("u in A")],
    };
    let mut with = a.to_vec();
    with.push(v);
    let added = fo.at_set(&distinct(&with), it.h, it.nonce);
    Ok(Some(SwapCandidate {
        u,
        v,
        score: added + removed,
    }))
}

fn offer<T: Scalar>(
    fo: &MultilinearOracle<T>,
    ind: &IndependenceOracle,
    a: &[usize],
    it: &mut Iteration<T>,
    v: usize,
) -> Result<()> {
    it.pool.push(v);
    if a.contains(&v) {
        return Ok(());
    }
    if let Some(c) = score(fo, ind, a, it, v)? {
        if it.best.as_ref().is_none_or(|b| c.score > b.score) {
            it.best = Some(c);
        }
    }
    Ok(())
}

/// Applies the iteration's best swap if it beats `2 F(h 1_A)`.
/// Returns whether it did.
fn close_iteration<T: Scalar>(
    fo: &MultilinearOracle<T>,
    ind: &IndependenceOracle,
    a: &mut Vec<usize>,
    history: &mut Vec<usize>,
    it: &Iteration<T>,
) -> Result<bool> {
    let Some(best) = &it.best else {
        return Ok(false);
    };
    let two = it.base + it.base;
    if best.score <= two + tol_for(two) {
        return Ok(false);
    }
    if let Some(u) = best.u {
        a.retain(|&x| x != u);
    }
    a.push(best.v);
    if !history.contains(&best.v) {
        history.push(best.v);
    }
    if !ind.check_uncounted(a) {
        return Err(Error::invariant(format!("boosted set {a:?} is dependent")));
    }
    let after = fo.at_set(&distinct(a), it.h, it.nonce);
    if after < it.base - tol_for(it.base) {
        return Err(Error::invariant(format!(
            "F decreased across swap at iteration {}: {} -> {after}",
            it.i, it.base
        )));
    }
    Ok(true)
}

fn check_start(ind: &IndependenceOracle, a0: &[usize], params: &BoostParams) -> Result<()> {
    if !ind.is_matroid() {
        return Err(Error::input("boosting requires a matroid constraint"));
    }
    check_range(a0, ind.n())?;
    if distinct(a0).len() != a0.len() {
        return Err(Error::input("initial set has repeated elements"));
    }
    if !ind.is_independent(a0)? {
        return Err(Error::input(format!("initial set {a0:?} is not independent")));
    }
    if a0.len() > params.r {
        return Err(Error::input(format!("initial set larger than r = {}", params.r)));
    }
    Ok(())
}

/// Offline boosting: each iteration samples `R_i` with probability `p'`
/// per element over the whole ground set.
pub fn run_offline_boost<T: Scalar>(
    fo: &MultilinearOracle<T>,
    ind: &IndependenceOracle,
    a0: &[usize],
    params: &BoostParams,
    seed: u64,
) -> Result<BoostRun<T>> {
    check_start(ind, a0, params)?;
    let mut a = a0.to_vec();
    let mut history = Vec::new();
    let mut trace = Vec::new();
    let mut swaps = 0;
    for i in 1..=params.ell {
        let sample: Vec<usize> = (0..ind.n())
            .filter(|&u| unit_hash(seed, i as u64, 0, u as u64) < params.p_prime)
            .collect();
        if sample.is_empty() {
            continue;
        }
        let mut it = open_iteration(fo, &a, i, params.height(i), derive_seed(seed, i as u64));
        for &v in &sample {
            offer(fo, ind, &a, &mut it, v)?;
        }
        let before = a.clone();
        let applied = close_iteration(fo, ind, &mut a, &mut history, &it)?;
        swaps += usize::from(applied);
        trace.push(IterTrace {
            i,
            pool: it.pool,
            a_before: before,
            best: it.best,
            applied,
        });
    }
    Ok(BoostRun {
        stored_peak: ind.n(),
        a,
        history,
        swaps,
        trace,
    })
}

/// Single-pass boosting over randomly sized consecutive windows.
///
/// The pool of iteration `i` is the history `H_{i-1}` followed by the
/// window's elements, both in arrival order. A candidate replaces the
/// incumbent only with a strictly larger score, so equal scores go to the
/// earlier `v` and then to the earlier `u` in `A` (⊥ before all of `A`).
/// Survivors of `A` keep their order and a new element is appended.
pub struct StreamBooster<'a, 'f, T> {
    fo: &'a MultilinearOracle<'f, T>,
    ind: &'a IndependenceOracle,
    params: BoostParams,
    sizes: Vec<usize>,
    nonce_seed: u64,
    /// 0-based index of the current window.
    iter: usize,
    left: usize,
    a: Vec<usize>,
    history: Vec<usize>,
    current: Option<Iteration<T>>,
    swaps: usize,
    stored_peak: usize,
    trace: Vec<IterTrace<T>>,
}

impl<'a, 'f, T: Scalar> StreamBooster<'a, 'f, T> {
    pub fn new(
        fo: &'a MultilinearOracle<'f, T>,
        ind: &'a IndependenceOracle,
        a0: &[usize],
        params: BoostParams,
        windows: &WindowPlan,
        nonce_seed: u64,
    ) -> Result<Self> {
        check_start(ind, a0, &params)?;
        params.check_streaming()?;
        if windows.ell() != params.ell {
            return Err(Error::input(format!(
                "window plan has {} windows, schedule has ℓ = {}",
                windows.ell(),
                params.ell
            )));
        }
        let mut b = StreamBooster {
            fo,
            ind,
            params,
            sizes: windows.sizes.clone(),
            nonce_seed,
            iter: 0,
            left: 0,
            a: a0.to_vec(),
            history: Vec::new(),
            current: None,
            swaps: 0,
            stored_peak: a0.len(),
            trace: Vec::new(),
        };
        b.skip_empty();
        Ok(b)
    }

    fn skip_empty(&mut self) {
        // an empty window cannot swap, so nothing is computed for it
        while self.iter < self.sizes.len() && self.sizes[self.iter] == 0 {
            self.iter += 1;
        }
        if self.iter < self.sizes.len() {
            self.left = self.sizes[self.iter];
        }
    }

    pub fn current(&self) -> &[usize] {
        &self.a
    }

    pub fn history(&self) -> &[usize] {
        &self.history
    }

    fn stored(&self) -> usize {
        let extra = self.history.iter().filter(|v| !self.a.contains(v)).count();
        let best = self.current.as_ref().map_or(0, |c| usize::from(c.best.is_some()));
        self.a.len() + extra + best + 1
    }

    pub fn feed(&mut self, v: usize) -> Result<()> {
        if self.iter >= self.sizes.len() {
            return Ok(());
        }
        if self.current.is_none() {
            let i = self.iter + 1;
            let mut it = open_iteration(
                self.fo,
                &self.a,
                i,
                self.params.height(i),
                derive_seed(self.nonce_seed, i as u64),
            );
            for u in self.history.clone() {
                offer(self.fo, self.ind, &self.a, &mut it, u)?;
            }
            self.current = Some(it);
        }
        let it = self.current.as_mut().expect("iteration open");
        offer(self.fo, self.ind, &self.a, it, v)?;
        self.stored_peak = self.stored_peak.max(self.stored());
        self.left -= 1;
        if self.left == 0 {
            let it = self.current.take().expect("iteration open");
            let before = self.a.clone();
            let applied = close_iteration(self.fo, self.ind, &mut self.a, &mut self.history, &it)?;
            self.swaps += usize::from(applied);
            self.trace.push(IterTrace {
                i: it.i,
                pool: it.pool,
                a_before: before,
                best: it.best,
                applied,
            });
            self.iter += 1;
            self.skip_empty();
        }
        Ok(())
    }

    pub fn finish(self) -> Result<BoostRun<T>> {
        if self.current.is_some() {
            return Err(Error::input("stream ended inside a boosting window"));
        }
        let bound = self.params.r + self.params.ell + 2;
        if self.stored_peak > bound {
            return Err(Error::invariant(format!("booster stored {} elements, bound {bound}", self.stored_peak)));
        }
        Ok(BoostRun {
            a: self.a,
            history: self.history,
            swaps: self.swaps,
            stored_peak: self.stored_peak,
            trace: self.trace,
        })
    }
}

/// Streaming boost over `order` with windows drawn from `seed`.
pub fn run_stream_boost<T: Scalar>(
    order: &StreamOrder,
    fo: &MultilinearOracle<T>,
    ind: &IndependenceOracle,
    a0: &[usize],
    params: &BoostParams,
    seed: u64,
) -> Result<BoostRun<T>> {
    stream_boost_slice(order.perm(), fo, ind, a0, params, seed)
}

pub(crate) fn stream_boost_slice<T: Scalar>(
    stream: &[usize],
    fo: &MultilinearOracle<T>,
    ind: &IndependenceOracle,
    a0: &[usize],
    params: &BoostParams,
    seed: u64,
) -> Result<BoostRun<T>> {
    let windows = process2_plan(
        stream.len(),
        params.ell,
        params.p_prime,
        derive_seed(seed, crate::seed::tags::WINDOWS),
    )?;
    let mut b = StreamBooster::new(fo, ind, a0, *params, &windows, derive_seed(seed, crate::seed::tags::ESTIMATOR))?;
    for &v in stream {
        b.feed(v)?;
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::Constraint;
    use crate::objectives::{Objective, ValueOracle};
    use crate::stream::uniform_order;

    #[test]
    fn niid_example() {
        let p = niid_params(0.9, 2, (-1.0f64).exp()).unwrap();
        assert!((p.p_prime - 0.05).abs() < 1e-12);
        assert_eq!(p.ell, 19);
        assert!(p.p_prime * p.ell as f64 <= 1.0);
        assert_eq!(niid_params(18.0, 2, 0.3).unwrap().ell, 0);
        assert!(niid_params(0.9, 2, 0.5).is_err());
    }

    #[test]
    fn offline_example() {
        let p = offline_params(0.1, 3).unwrap();
        assert!((p.p - 0.3).abs() < 1e-12);
        assert_eq!(p.ell, 21);
        assert!(p.ell as f64 * (p.p / (3.0 - p.p)).ln_1p() <= (10.0f64).ln());
        assert_eq!(offline_params(0.2, 3).unwrap().p, 0.5);
        assert!(((1.0 - p.p_prime).powi(3) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn height_identity() {
        let p = BoostParams {
            h: 0.25,
            p_prime: 0.0,
            p: 0.5,
            ell: 1,
            r: 4,
        };
        let h1 = p.height(1);
        assert!((h1 - 0.285_714_285_714).abs() < 1e-9);
        assert!((h1 - p.height(0) - h1 * 0.5 / 4.0).abs() < 1e-12);
    }

    fn tiny() -> (ValueOracle<f64>, IndependenceOracle) {
        let f = ValueOracle::new(Objective::<f64>::unit_coverage(vec![vec![0, 1], vec![1], vec![2, 3, 4], vec![0]]).unwrap());
        let m = IndependenceOracle::new(Constraint::uniform(4, 2));
        (f, m)
    }

    #[test]
    fn zero_iterations_return_start() {
        let (f, m) = tiny();
        let fo = MultilinearOracle::exact(&f);
        let params = BoostParams::new(0.5, 0.3, 0, 2).unwrap();
        assert_eq!(run_offline_boost(&fo, &m, &[1], &params, 3).unwrap().a, vec![1]);
        let order = uniform_order(4, 1);
        assert_eq!(run_stream_boost(&order, &fo, &m, &[1], &params, 3).unwrap().a, vec![1]);
    }

    #[test]
    fn empty_samples_block_swaps() {
        let (f, m) = tiny();
        let fo = MultilinearOracle::exact(&f);
        let params = BoostParams::new(0.5, 0.0, 1, 2).unwrap();
        let run = run_offline_boost(&fo, &m, &[1], &params, 3).unwrap();
        assert_eq!(run.a, vec![1]);
        assert_eq!(fo.calls(), 0);
    }

    #[test]
    fn single_window_single_candidate() {
        let (f, m) = tiny();
        let fo = MultilinearOracle::exact(&f);
        let params = BoostParams::new(0.3, 1.0, 1, 2).unwrap();
        let plan = WindowPlan {
            sizes: vec![1],
            p_prime: 1.0,
        };
        let mut b = StreamBooster::new(&fo, &m, &[1], params, &plan, 0).unwrap();
        b.feed(2).unwrap();
        let run = b.finish().unwrap();
        assert_eq!(run.a, vec![1, 2]);
        assert_eq!(run.history, vec![2]);
    }

    #[test]
    fn equal_scores_go_to_earlier_arrival() {
        // elements 1 and 2 cover disjoint items of equal weight
        let f = ValueOracle::new(Objective::<f64>::unit_coverage(vec![vec![0], vec![1], vec![2]]).unwrap());
        let m = IndependenceOracle::new(Constraint::uniform(3, 2));
        let fo = MultilinearOracle::exact(&f);
        let params = BoostParams::new(0.3, 0.5, 1, 2).unwrap();
        let plan = WindowPlan {
            sizes: vec![2],
            p_prime: 0.5,
        };
        for (first, second) in [(1, 2), (2, 1)] {
            let mut b = StreamBooster::new(&fo, &m, &[0], params, &plan, 0).unwrap();
            b.feed(first).unwrap();
            b.feed(second).unwrap();
            assert_eq!(b.finish().unwrap().a, vec![0, first]);
        }
    }
}
