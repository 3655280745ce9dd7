use std::sync::atomic::{AtomicU64, Ordering};

use super::ValueOracle;
use crate::error::{Error, Result};
use crate::scalar::{tol_for, Scalar};
use crate::seed::unit_hash;

/// Largest fractional support enumerated exactly.
pub const EXACT_CAP: usize = 20;

fn check_point<T: Scalar>(f: &ValueOracle<T>, x: &[T]) -> Result<()> {
    if x.len() != f.n() {
        return Err(Error::input(format!("point has dimension {}, ground set has {}", x.len(), f.n())));
    }
    if let Some((u, v)) = x
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v >= T::zero() && v <= T::one()))
    {
        return Err(Error::input(format!("coordinate {u} = {v} outside [0, 1]")));
    }
    Ok(())
}

/// `F(x)` by enumerating every subset of the fractional support.
///
/// Coordinates equal to one are always included and coordinates equal to
/// zero never are, so only the strictly fractional coordinates count
/// against [`EXACT_CAP`].
pub fn multilinear_exact<T: Scalar>(f: &ValueOracle<T>, x: &[T]) -> Result<T> {
    check_point(f, x)?;
    let ones: Vec<usize> = (0..x.len()).filter(|&u| x[u] == T::one()).collect();
    let frac: Vec<usize> = (0..x.len())
        .filter(|&u| x[u] > T::zero() && x[u] < T::one())
        .collect();
    if frac.len() > EXACT_CAP {
        return Err(Error::capability(format!(
            "exact multilinear evaluation over {} fractional coordinates exceeds cap {EXACT_CAP}",
            frac.len()
        )));
    }
    let mut total = T::zero();
    let mut set = Vec::with_capacity(ones.len() + frac.len());
    for mask in 0usize..(1 << frac.len()) {
        let mut prob = T::one();
        set.clear();
        set.extend_from_slice(&ones);
        for (b, &u) in frac.iter().enumerate() {
            if mask >> b & 1 == 1 {
                prob *= x[u];
                set.push(u);
            } else {
                prob *= T::one() - x[u];
            }
        }
        set.sort_unstable();
        f.count(1);
        total += prob * f.value_raw(&set);
    }
    Ok(total)
}

/// Exact `F(x)`: closed form where the objective has one, enumeration otherwise.
pub fn multilinear_closed_form<T: Scalar>(f: &ValueOracle<T>, x: &[T]) -> Result<T> {
    check_point(f, x)?;
    match f.objective().multilinear_point(x) {
        Some(v) => Ok(v),
        None => multilinear_exact(f, x),
    }
}

/// Sample mean and standard error of `f(R(x))` over `samples` random sets.
pub fn multilinear_estimate<T: Scalar>(
    f: &ValueOracle<T>,
    x: &[T],
    samples: usize,
    seed: u64,
) -> Result<(T, T)> {
    check_point(f, x)?;
    if samples == 0 {
        return Err(Error::input("samples must be at least 1"));
    }
    let xs: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut set = Vec::new();
    for s in 0..samples {
        set.clear();
        for (u, &p) in xs.iter().enumerate() {
            if unit_hash(seed, 0, s as u64, u as u64) < p {
                set.push(u);
            }
        }
        f.count(1);
        let v = f.value_raw(&set).to_f64_lossy();
        sum += v;
        sum_sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let stderr = if samples > 1 {
        let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
        (var / m).sqrt()
    } else {
        0.0
    };
    Ok((T::lit(mean), T::lit(stderr)))
}

/// Lovász extension via the threshold sets of `x`; at most `n + 1` calls.
pub fn lovasz_exact<T: Scalar>(f: &ValueOracle<T>, x: &[T]) -> Result<T> {
    check_point(f, x)?;
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap().then(a.cmp(&b)));
    let mut total = T::zero();
    let top = idx.first().map(|&u| x[u]).unwrap_or(T::zero());
    if top < T::one() {
        f.count(1);
        total += (T::one() - top) * f.value_raw(&[]);
    }
    let mut prefix: Vec<usize> = Vec::with_capacity(x.len());
    for (i, &u) in idx.iter().enumerate() {
        prefix.push(u);
        let next = idx.get(i + 1).map(|&v| x[v]).unwrap_or(T::zero());
        let width = x[u] - next;
        if width > T::zero() {
            let mut sorted = prefix.clone();
            sorted.sort_unstable();
            f.count(1);
            total += width * f.value_raw(&sorted);
        }
    }
    Ok(total)
}

/// Exact gradient from the two-point identity `F(x | x_u = 1) - F(x | x_u = 0)`.
pub fn gradient_exact<T: Scalar>(f: &ValueOracle<T>, x: &[T]) -> Result<Vec<T>> {
    check_point(f, x)?;
    let mut y = x.to_vec();
    (0..x.len())
        .map(|u| {
            y[u] = T::one();
            let hi = multilinear_closed_form(f, &y)?;
            y[u] = T::zero();
            let lo = multilinear_closed_form(f, &y)?;
            y[u] = x[u];
            Ok(hi - lo)
        })
        .collect()
}

/// Monte-Carlo gradient with common random sets across coordinates.
/// Returns `(estimate, stderr)` per coordinate.
pub fn gradient_estimate<T: Scalar>(
    f: &ValueOracle<T>,
    x: &[T],
    samples: usize,
    seed: u64,
) -> Result<Vec<(T, T)>> {
    check_point(f, x)?;
    if samples == 0 {
        return Err(Error::input("samples must be at least 1"));
    }
    let n = x.len();
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let mut st;
    for s in 0..samples {
        let set: Vec<usize> = (0..n)
            .filter(|&u| unit_hash(seed, 1, s as u64, u as u64) < x[u].to_f64_lossy())
            .collect();
        st = f.state_of(&set)?;
        for u in 0..n {
            let d = if st.contains(u) {
                let rest: Vec<usize> = set.iter().copied().filter(|&v| v != u).collect();
                f.count(2);
                (st.value() - f.value_raw(&rest)).to_f64_lossy()
            } else {
                f.gain(&st, u).to_f64_lossy()
            };
            sum[u] += d;
            sum_sq[u] += d * d;
        }
    }
    let m = samples as f64;
    Ok((0..n)
        .map(|u| {
            let mean = sum[u] / m;
            let se = if samples > 1 {
                (((sum_sq[u] - m * mean * mean) / (m - 1.0)).max(0.0) / m).sqrt()
            } else {
                0.0
            };
            (T::lit(mean), T::lit(se))
        })
        .collect())
}

/// Exhaustive check of `f(u | S) >= f(u | T)` for all `S ⊆ T`, `u ∉ T`.
pub fn verify_submodular<T: Scalar>(f: &ValueOracle<T>, n_cap: usize) -> Result<bool> {
    let n = f.n();
    if n > n_cap {
        return Err(Error::capability(format!("submodularity check needs n <= {n_cap}, got {n}")));
    }
    let full = 1usize << n;
    let mut table = Vec::with_capacity(full);
    let mut set = Vec::with_capacity(n);
    for mask in 0..full {
        set.clear();
        set.extend((0..n).filter(|&u| mask >> u & 1 == 1));
        f.count(1);
        table.push(f.value_raw(&set));
    }
    let tol = T::tolerance();
    for t in 0..full {
        // enumerate S ⊆ T as submasks
        let mut s = t;
        loop {
            for u in 0..n {
                if t >> u & 1 == 0 {
                    let bit = 1 << u;
                    let gs = table[s | bit] - table[s];
                    let gt = table[t | bit] - table[t];
                    if gs < gt - tol {
                        return Ok(false);
                    }
                }
            }
            if s == 0 {
                break;
            }
            s = (s - 1) & t;
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Counted oracle for the multilinear extension at points `h * 1_S`.
///
/// Monte-Carlo mode uses common random numbers: within one `nonce` (one
/// boosting iteration) element `u` in sample `s` is kept iff the same
/// uniform falls below `h`, whatever set is being scored.
#[derive(Debug)]
pub struct MultilinearOracle<'a, T> {
    f: &'a ValueOracle<T>,
    mode: FMode,
    calls: AtomicU64,
}

impl<'a, T: Scalar> MultilinearOracle<'a, T> {
    pub fn new(f: &'a ValueOracle<T>, mode: FMode) -> Result<Self> {
        if let FMode::MonteCarlo { samples: 0, .. } = mode {
            return Err(Error::input("Monte-Carlo F oracle needs at least one sample"));
        }
        Ok(MultilinearOracle {
            f,
            mode,
            calls: AtomicU64::new(0),
        })
    }

    pub fn exact(f: &'a ValueOracle<T>) -> Self {
        MultilinearOracle {
            f,
            mode: FMode::Exact,
            calls: AtomicU64::new(0),
        }
    }

    pub fn value_oracle(&self) -> &'a ValueOracle<T> {
        self.f
    }

    pub fn mode(&self) -> FMode {
        self.mode
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn n(&self) -> usize {
        self.f.n()
    }

    /// `F(h * 1_set)`; `set` must hold distinct in-range elements.
    pub fn at_set(&self, set: &[usize], h: T, nonce: u64) -> T {
        self.calls.fetch_add(1, Ordering::Relaxed);
        match self.mode {
            FMode::Exact => match self.f.objective().multilinear_uniform(set, h) {
                Some(v) => v,
                None => {
                    let mut x = vec![T::zero(); self.f.n()];
                    for &u in set {
                        x[u] = h;
                    }
                    multilinear_exact(self.f, &x).expect("table objectives fit the exact cap")
                }
            },
            FMode::MonteCarlo { samples, seed } => {
                let hf = h.to_f64_lossy();
                let mut sub = Vec::with_capacity(set.len());
                let mut total = 0.0;
                for s in 0..samples {
                    sub.clear();
                    sub.extend(
                        set.iter()
                            .copied()
                            .filter(|&u| unit_hash(seed, nonce, s as u64, u as u64) < hf),
                    );
                    sub.sort_unstable();
                    self.f.count(1);
                    total += self.f.value_raw(&sub).to_f64_lossy();
                }
                T::lit(total / samples as f64)
            }
        }
    }

    /// Slack for comparing two values of this oracle.
    pub fn slack(&self, scale: T) -> T {
        tol_for(scale)
    }
}

#[cfg(test)]
mod tests {
    use super::super::Objective;
    use super::*;

    fn ab() -> ValueOracle<f64> {
        ValueOracle::new(Objective::<f64>::unit_coverage(vec![vec![1, 2], vec![2, 3]]).unwrap())
    }

    #[test]
    fn exact_coverage_half_point() {
        let f = ab();
        assert!((multilinear_exact(&f, &[0.5, 0.5]).unwrap() - 1.75).abs() < 1e-12);
        assert!((multilinear_closed_form(&f, &[0.5, 0.5]).unwrap() - 1.75).abs() < 1e-12);
    }

    #[test]
    fn exact_integral_and_linear() {
        let f = ab();
        assert_eq!(multilinear_exact(&f, &[1.0, 0.0]).unwrap(), 2.0);
        let g = ValueOracle::new(Objective::<f64>::linear(vec![0.5, 2.0, 1.0]).unwrap());
        let v = multilinear_exact(&g, &[0.2, 0.7, 0.4]).unwrap();
        assert!((v - (0.1 + 1.4 + 0.4)).abs() < 1e-12);
    }

    #[test]
    fn exact_capability_error() {
        let f = ValueOracle::new(Objective::<f64>::linear(vec![1.0; 21]).unwrap());
        assert!(matches!(multilinear_exact(&f, &[0.5; 21]), Err(Error::Capability(_))));
        // integral coordinates do not count against the cap
        let mut x = vec![1.0; 21];
        x[0] = 0.5;
        assert!((multilinear_exact(&f, &x).unwrap() - 20.5).abs() < 1e-12);
    }

    #[test]
    fn estimate_integral_and_zero() {
        let f = ab();
        let (m, se) = multilinear_estimate(&f, &[1.0, 1.0], 50, 1).unwrap();
        assert_eq!((m, se), (3.0, 0.0));
        let (m, se) = multilinear_estimate(&f, &[0.0, 0.0], 50, 1).unwrap();
        assert_eq!((m, se), (0.0, 0.0));
        assert!(multilinear_estimate(&f, &[0.5, 0.5], 0, 1).is_err());
    }

    #[test]
    fn estimate_half_point() {
        let f = ab();
        let (m, se) = multilinear_estimate(&f, &[0.5, 0.5], 100_000, 9).unwrap();
        assert!((m - 1.75).abs() <= 3.0 * se, "{m} {se}");
    }

    #[test]
    fn lovasz_values() {
        let f = ab();
        assert!((lovasz_exact(&f, &[1.0, 0.5]).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(lovasz_exact(&f, &[1.0, 1.0]).unwrap(), 3.0);
        let g = ValueOracle::new(Objective::<f64>::linear(vec![0.5, 2.0]).unwrap());
        assert!((lovasz_exact(&g, &[0.3, 0.6]).unwrap() - 1.35).abs() < 1e-12);
        let before = g.calls();
        lovasz_exact(&g, &[0.3, 0.6]).unwrap();
        assert!(g.calls() - before <= 3);
    }

    #[test]
    fn submodularity_verifier() {
        assert!(verify_submodular(&ab(), 12).unwrap());
        let sup = ValueOracle::new(Objective::<f64>::table(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap());
        assert!(!verify_submodular(&sup, 12).unwrap());
        let g = ValueOracle::new(Objective::<f64>::linear(vec![1.0; 13]).unwrap());
        assert!(matches!(verify_submodular(&g, 12), Err(Error::Capability(_))));
    }

    #[test]
    fn f_oracle_exact_matches_enumeration() {
        let f = ValueOracle::new(
            Objective::<f64>::cut(4, vec![(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 3, 4.0)]).unwrap(),
        );
        let fo = MultilinearOracle::exact(&f);
        let v = fo.at_set(&[0, 1, 3], 0.3, 0);
        let x = [0.3, 0.3, 0.0, 0.3];
        assert!((v - multilinear_exact(&f, &x).unwrap()).abs() < 1e-12);
        assert_eq!(fo.calls(), 1);
    }

    #[test]
    fn gradient_estimate_close_to_exact() {
        let f = ab();
        let x = [0.3, 0.6];
        let g = gradient_exact(&f, &x).unwrap();
        let est = gradient_estimate(&f, &x, 20_000, 4).unwrap();
        for (e, (m, se)) in g.iter().zip(est) {
            assert!((e - m).abs() <= 4.0 * se + 1e-12, "{e} {m} {se}");
        }
    }
}
