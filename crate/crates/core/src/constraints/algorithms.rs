use super::IndependenceOracle;
use crate::error::{check_range, Error, Result};
use crate::objectives::distinct;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankInfo {
    pub r: usize,
    /// True when `r` is the exact rank rather than a supplied bound.
    pub exact: bool,
}

/// Exact rank for matroids via a greedy base of the whole ground set.
/// For other systems the greedy base size is returned with `exact = false`;
/// callers wanting a bound should supply their own.
pub fn rank_info(oracle: &IndependenceOracle) -> RankInfo {
    let pool: Vec<usize> = (0..oracle.n()).collect();
    RankInfo {
        r: greedy_base(oracle, &pool).len(),
        exact: oracle.is_matroid(),
    }
}

/// First-fit maximal independent subset of `pool`, in pool order.
pub fn greedy_base(oracle: &IndependenceOracle, pool: &[usize]) -> Vec<usize> {
    let mut st = oracle.empty_state();
    for &u in pool {
        if !st.contains(u) && oracle.can_add(&st, u) {
            oracle.push(&mut st, u);
        }
    }
    st.elements().to_vec()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapChoice {
    /// `A + v` is already independent.
    Bottom,
    Remove(usize),
    /// No `u` in `A` makes `A + v - u` independent.
    Infeasible,
}

fn removal_order<W: PartialOrd>(weights: &[W]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

fn swap_preconditions<W>(oracle: &IndependenceOracle, a: &[usize], v: usize, weights: &[W]) -> Result<()> {
    if !oracle.is_matroid() {
        return Err(Error::input("swap search requires a matroid"));
    }
    if weights.len() != a.len() {
        return Err(Error::input(format!("{} weights for a set of size {}", weights.len(), a.len())));
    }
    check_range(a, oracle.n())?;
    check_range(&[v], oracle.n())
}

fn without_prefix(a: &[usize], order: &[usize], t: usize, v: usize) -> Vec<usize> {
    let mut drop = vec![false; a.len()];
    for &i in &order[..t] {
        drop[i] = true;
    }
    let mut s: Vec<usize> = a.iter().zip(&drop).filter(|(_, &d)| !d).map(|(&u, _)| u).collect();
    s.push(v);
    distinct(&s)
}

/// Highest-weight `u in A` with `A - u + v` independent, by binary search
/// over weight-sorted prefixes.
///
/// `weights[i]` belongs to `a[i]`; ties go to the earlier position in `a`.
/// Uses at most `2 + ceil(log2 |A|)` membership queries.
pub fn find_best_swap<W: PartialOrd>(
    oracle: &IndependenceOracle,
    a: &[usize],
    v: usize,
    weights: &[W],
) -> Result<SwapChoice> {
    swap_preconditions(oracle, a, v, weights)?;
    let mut with = a.to_vec();
    with.push(v);
    if oracle.is_independent_distinct(&distinct(&with)) {
        return Ok(SwapChoice::Bottom);
    }
    if !oracle.is_independent_distinct(&[v]) {
        return Ok(SwapChoice::Infeasible);
    }
    // In a matroid A + v holds a unique circuit through v, and A - P + v is
    // independent iff the prefix P meets it. The shortest such prefix ends
    // at the best removable element.
    let order = removal_order(weights);
    let (mut lo, mut hi) = (1, a.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if oracle.is_independent_distinct(&without_prefix(a, &order, mid, v)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(SwapChoice::Remove(a[order[lo - 1]]))
}

/// Reference scan for [`find_best_swap`].
pub fn find_best_swap_linear<W: PartialOrd>(
    oracle: &IndependenceOracle,
    a: &[usize],
    v: usize,
    weights: &[W],
) -> Result<SwapChoice> {
    swap_preconditions(oracle, a, v, weights)?;
    let mut with = a.to_vec();
    with.push(v);
    if oracle.is_independent(&with)? {
        return Ok(SwapChoice::Bottom);
    }
    for i in removal_order(weights) {
        let mut s: Vec<usize> = a.iter().copied().filter(|&x| x != a[i]).collect();
        s.push(v);
        if oracle.is_independent(&s)? {
            return Ok(SwapChoice::Remove(a[i]));
        }
    }
    Ok(SwapChoice::Infeasible)
}

/// Downward-recursive partition of `t` into pieces `T_1..T_|s|` with
/// `|T_i| <= p` and `{s_1..s_(i-1)} + u` independent for every `u` in `T_i`.
pub fn exchange_partition(
    oracle: &IndependenceOracle,
    s: &[usize],
    t: &[usize],
    p: usize,
) -> Result<Vec<Vec<usize>>> {
    check_range(s, oracle.n())?;
    check_range(t, oracle.n())?;
    if !oracle.is_independent(s)? || !oracle.is_independent(t)? {
        return Err(Error::input("exchange partition needs independent S and T"));
    }
    let st = oracle.state_of(s)?;
    if let Some(&u) = t.iter().find(|&&u| !st.contains(u) && oracle.can_add(&st, u)) {
        return Err(Error::input(format!("S is not a base of S ∪ T: {u} extends it")));
    }
    let mut remaining = distinct(t);
    let mut parts = vec![Vec::new(); s.len()];
    for i in (0..s.len()).rev() {
        let prefix = oracle.state_of(&s[..i])?;
        let mut piece = Vec::new();
        remaining.retain(|&u| {
            if piece.len() < p && oracle.can_add(&prefix, u) {
                piece.push(u);
                false
            } else {
                true
            }
        });
        parts[i] = piece;
    }
    if !remaining.is_empty() {
        return Err(Error::NotPSystemWitness(format!(
            "elements {remaining:?} of T left uncovered with p = {p}"
        )));
    }
    Ok(parts)
}

fn membership_table(oracle: &IndependenceOracle, n_cap: usize, what: &str) -> Result<Vec<bool>> {
    let n = oracle.n();
    if n > n_cap {
        return Err(Error::capability(format!("{what} needs n <= {n_cap}, got {n}")));
    }
    let mut set = Vec::with_capacity(n);
    Ok((0..1usize << n)
        .map(|mask| {
            set.clear();
            set.extend((0..n).filter(|&u| mask >> u & 1 == 1));
            oracle.is_independent_distinct(&set)
        })
        .collect())
}

/// Exhaustive check that the empty set is independent and the family is down-closed.
pub fn verify_independence_system(oracle: &IndependenceOracle, n_cap: usize) -> Result<bool> {
    let table = membership_table(oracle, n_cap, "independence-system check")?;
    if !table[0] {
        return Ok(false);
    }
    let n = oracle.n();
    Ok((0..table.len())
        .filter(|&m| table[m])
        .all(|m| (0..n).filter(|&u| m >> u & 1 == 1).all(|u| table[m & !(1 << u)])))
}

/// Exhaustive check of the matroid exchange axiom.
pub fn verify_matroid_exchange(oracle: &IndependenceOracle, n_cap: usize) -> Result<bool> {
    let table = membership_table(oracle, n_cap, "matroid exchange check")?;
    let n = oracle.n();
    let indep: Vec<usize> = (0..table.len()).filter(|&m| table[m]).collect();
    for &s in &indep {
        for &t in &indep {
            if s.count_ones() < t.count_ones() {
                let diff = t & !s;
                if !(0..n).any(|u| diff >> u & 1 == 1 && table[s | (1 << u)]) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Exhaustive check that in every subset the largest base is at most `p`
/// times the smallest.
pub fn verify_p_system(oracle: &IndependenceOracle, p: f64, n_cap: usize) -> Result<bool> {
    let table = membership_table(oracle, n_cap, "p-system check")?;
    let n = oracle.n();
    let full = table.len();
    // ext[b] = elements whose addition keeps b independent
    let ext: Vec<usize> = (0..full)
        .map(|b| {
            if !table[b] {
                return 0;
            }
            (0..n)
                .filter(|&u| b >> u & 1 == 0 && table[b | (1 << u)])
                .fold(0, |m, u| m | (1 << u))
        })
        .collect();
    for s in 0..full {
        let (mut lo, mut hi) = (u32::MAX, 0u32);
        let mut b = s;
        loop {
            if table[b] && ext[b] & s == 0 {
                let k = b.count_ones();
                lo = lo.min(k);
                hi = hi.max(k);
            }
            if b == 0 {
                break;
            }
            b = (b - 1) & s;
        }
        if lo == u32::MAX {
            // no base at all: only possible when ∅ itself is dependent
            return Ok(false);
        }
        if lo == 0 {
            if hi > 0 {
                return Ok(false);
            }
            continue;
        }
        if hi as f64 > p * lo as f64 + 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::super::Constraint;
    use super::*;

    fn part() -> IndependenceOracle {
        IndependenceOracle::new(Constraint::partition(3, &[vec![0, 1], vec![2]], vec![1, 1]).unwrap())
    }

    #[test]
    fn greedy_base_examples() {
        assert_eq!(greedy_base(&part(), &[1, 0, 2]), vec![1, 2]);
        let u = IndependenceOracle::new(Constraint::uniform(5, 2));
        assert_eq!(greedy_base(&u, &[3, 1, 4]), vec![3, 1]);
        assert!(greedy_base(&u, &[]).is_empty());
    }

    #[test]
    fn swap_examples() {
        let m = part();
        assert_eq!(find_best_swap(&m, &[0, 2], 1, &[5.0, 7.0]).unwrap(), SwapChoice::Remove(0));
        let u = IndependenceOracle::new(Constraint::uniform(3, 2));
        assert_eq!(find_best_swap(&u, &[0, 1], 2, &[1.0, 9.0]).unwrap(), SwapChoice::Remove(1));
        assert_eq!(find_best_swap(&u, &[0], 2, &[1.0]).unwrap(), SwapChoice::Bottom);
        let g = IndependenceOracle::new(Constraint::graphic(2, vec![(0, 1), (1, 1)]).unwrap());
        assert_eq!(find_best_swap(&g, &[0], 1, &[1.0]).unwrap(), SwapChoice::Infeasible);
        let not = IndependenceOracle::new(
            Constraint::intersection(vec![Constraint::uniform(3, 2), Constraint::uniform(3, 1)]).unwrap(),
        );
        assert!(find_best_swap(&not, &[0], 1, &[1.0]).is_err());
    }

    #[test]
    fn swap_ties_go_to_earlier_position() {
        let u = IndependenceOracle::new(Constraint::uniform(4, 3));
        assert_eq!(find_best_swap(&u, &[2, 0, 1], 3, &[4.0, 4.0, 1.0]).unwrap(), SwapChoice::Remove(2));
        assert_eq!(find_best_swap_linear(&u, &[2, 0, 1], 3, &[4.0, 4.0, 1.0]).unwrap(), SwapChoice::Remove(2));
    }

    #[test]
    fn exchange_partition_examples() {
        let m = IndependenceOracle::new(Constraint::partition(2, &[vec![0, 1]], vec![1]).unwrap());
        assert_eq!(exchange_partition(&m, &[0], &[1], 1).unwrap(), vec![vec![1]]);
        assert_eq!(exchange_partition(&m, &[0], &[], 1).unwrap(), vec![Vec::<usize>::new()]);
        assert!(exchange_partition(&m, &[], &[1], 1).is_err());
    }

    #[test]
    fn verifiers_on_matroids() {
        let m = part();
        assert!(verify_independence_system(&m, 12).unwrap());
        assert!(verify_matroid_exchange(&m, 10).unwrap());
        assert!(verify_p_system(&m, 1.0, 14).unwrap());
    }

    #[test]
    fn two_partition_intersection_is_two_system() {
        // rows {0,1,2},{3,4,5} and columns {0,3},{1,4},{2,5}, all capacity 1,
        // plus a second row capacity making the intersection non-matroidal
        let rows = Constraint::partition(6, &[vec![0, 1, 2], vec![3, 4, 5]], vec![1, 1]).unwrap();
        let cols = Constraint::partition(6, &[vec![0, 4], vec![1, 3], vec![2, 5]], vec![1, 1, 1]).unwrap();
        let m = IndependenceOracle::new(Constraint::intersection(vec![rows, cols]).unwrap());
        assert!(verify_independence_system(&m, 12).unwrap());
        assert!(verify_p_system(&m, 2.0, 14).unwrap());
        // S = {0, 1, 3}: bases {0, 3} and {1}
        assert!(!m.is_independent(&[0, 1]).unwrap());
        assert!(m.is_independent(&[0, 3]).unwrap());
        assert!(!m.is_independent(&[1, 3]).unwrap());
        assert!(!verify_p_system(&m, 1.0, 14).unwrap());
        assert!(!verify_matroid_exchange(&m, 10).unwrap());
    }

    #[test]
    fn rejects_non_down_closed_table() {
        // {0,1} independent but {1} not
        let t = IndependenceOracle::new(Constraint::table(2, vec![true, true, false, true], false).unwrap());
        assert!(!verify_independence_system(&t, 12).unwrap());
    }
}
