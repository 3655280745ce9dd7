//! Independence-system oracles.

mod algorithms;

pub use algorithms::{
    exchange_partition, find_best_swap, find_best_swap_linear, greedy_base, rank_info,
    verify_independence_system, verify_matroid_exchange, verify_p_system, RankInfo, SwapChoice,
};

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{check_range, Error, Result};
use crate::hardness::HardnessSystem;
use crate::objectives::{distinct, mask_of};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    Uniform,
    Partition,
    Graphic,
    Laminar,
    Intersection,
    Hardness,
    Table,
}

#[derive(Clone, Debug)]
enum System {
    Uniform {
        rank: usize,
    },
    Partition {
        part_of: Vec<usize>,
        capacities: Vec<usize>,
    },
    Graphic {
        vertices: usize,
        edges: Vec<(usize, usize)>,
    },
    Laminar {
        capacities: Vec<usize>,
        /// Nodes containing each element, innermost first.
        chains: Vec<Vec<usize>>,
        members: Vec<Vec<usize>>,
    },
    Intersection(Vec<Constraint>),
    Hardness(HardnessSystem),
    Table {
        independent: Vec<bool>,
        matroid: bool,
    },
}

/// Uncounted description of an independence system over `0..n`.
#[derive(Clone, Debug)]
pub struct Constraint {
    n: usize,
    system: System,
}

impl Constraint {
    pub fn uniform(n: usize, rank: usize) -> Self {
        Constraint {
            n,
            system: System::Uniform { rank },
        }
    }

    /// Partition matroid; every element must lie in exactly one part.
    pub fn partition(n: usize, parts: &[Vec<usize>], capacities: Vec<usize>) -> Result<Self> {
        if parts.len() != capacities.len() {
            return Err(Error::input(format!(
                "{} parts but {} capacities",
                parts.len(),
                capacities.len()
            )));
        }
        let mut part_of = vec![usize::MAX; n];
        for (j, part) in parts.iter().enumerate() {
            check_range(part, n)?;
            for &u in part {
                if part_of[u] != usize::MAX {
                    return Err(Error::input(format!("element {u} appears in two parts")));
                }
                part_of[u] = j;
            }
        }
        if let Some(u) = part_of.iter().position(|&j| j == usize::MAX) {
            return Err(Error::input(format!("element {u} belongs to no part")));
        }
        Ok(Constraint {
            n,
            system: System::Partition { part_of, capacities },
        })
    }

    /// Partition matroid from a part label per element.
    pub fn partition_from_labels(part_of: Vec<usize>, capacities: Vec<usize>) -> Result<Self> {
        if let Some(&j) = part_of.iter().find(|&&j| j >= capacities.len()) {
            return Err(Error::input(format!("part label {j} has no capacity")));
        }
        Ok(Constraint {
            n: part_of.len(),
            system: System::Partition { part_of, capacities },
        })
    }

    /// Graphic matroid: element `i` is edge `edges[i]`.
    pub fn graphic(vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(a, b) in &edges {
            check_range(&[a, b], vertices)?;
        }
        Ok(Constraint {
            n: edges.len(),
            system: System::Graphic { vertices, edges },
        })
    }

    /// Laminar matroid from `(members, capacity)` nodes. Any two node sets
    /// must be disjoint or nested.
    pub fn laminar(n: usize, nodes: Vec<(Vec<usize>, usize)>) -> Result<Self> {
        let members: Vec<Vec<usize>> = nodes.iter().map(|(m, _)| distinct(m)).collect();
        for m in &members {
            check_range(m, n)?;
        }
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                let inter = members[a].iter().filter(|u| members[b].binary_search(u).is_ok()).count();
                if inter != 0 && inter != members[a].len() && inter != members[b].len() {
                    return Err(Error::input(format!("laminar nodes {a} and {b} cross")));
                }
            }
        }
        let mut chains = vec![Vec::new(); n];
        for (j, m) in members.iter().enumerate() {
            for &u in m {
                chains[u].push(j);
            }
        }
        for c in chains.iter_mut() {
            c.sort_by_key(|&j| members[j].len());
        }
        Ok(Constraint {
            n,
            system: System::Laminar {
                capacities: nodes.iter().map(|(_, c)| *c).collect(),
                chains,
                members,
            },
        })
    }

    pub fn intersection(children: Vec<Constraint>) -> Result<Self> {
        let n = children
            .first()
            .map(|c| c.n)
            .ok_or_else(|| Error::input("intersection of no constraints"))?;
        if let Some(c) = children.iter().find(|c| c.n != n) {
            return Err(Error::input(format!("ground sizes differ: {n} vs {}", c.n)));
        }
        Ok(Constraint {
            n,
            system: System::Intersection(children),
        })
    }

    pub fn hardness(system: HardnessSystem) -> Self {
        Constraint {
            n: system.n(),
            system: System::Hardness(system),
        }
    }

    /// Independence given by a full table indexed by bitmask; for tests.
    pub fn table(n: usize, independent: Vec<bool>, matroid: bool) -> Result<Self> {
        if n > 20 || independent.len() != 1 << n {
            return Err(Error::input(format!("table constraint needs 2^n entries with n <= 20, got n={n}")));
        }
        Ok(Constraint {
            n,
            system: System::Table { independent, matroid },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> ConstraintKind {
        match self.system {
            System::Uniform { .. } => ConstraintKind::Uniform,
            System::Partition { .. } => ConstraintKind::Partition,
            System::Graphic { .. } => ConstraintKind::Graphic,
            System::Laminar { .. } => ConstraintKind::Laminar,
            System::Intersection(_) => ConstraintKind::Intersection,
            System::Hardness(_) => ConstraintKind::Hardness,
            System::Table { .. } => ConstraintKind::Table,
        }
    }

    pub fn is_matroid(&self) -> bool {
        match &self.system {
            System::Uniform { .. } | System::Partition { .. } | System::Graphic { .. } | System::Laminar { .. } => {
                true
            }
            System::Intersection(c) => c.len() == 1 && c[0].is_matroid(),
            System::Hardness(_) => false,
            System::Table { matroid, .. } => *matroid,
        }
    }

    pub fn hardness_system(&self) -> Option<&HardnessSystem> {
        match &self.system {
            System::Hardness(h) => Some(h),
            _ => None,
        }
    }

    pub fn children(&self) -> Option<&[Constraint]> {
        match &self.system {
            System::Intersection(c) => Some(c),
            _ => None,
        }
    }

    pub fn uniform_rank(&self) -> Option<usize> {
        match self.system {
            System::Uniform { rank } => Some(rank),
            _ => None,
        }
    }

    pub fn partition_parts(&self) -> Option<(&[usize], &[usize])> {
        match &self.system {
            System::Partition { part_of, capacities } => Some((part_of, capacities)),
            _ => None,
        }
    }

    pub fn graphic_edges(&self) -> Option<(usize, &[(usize, usize)])> {
        match &self.system {
            System::Graphic { vertices, edges } => Some((*vertices, edges)),
            _ => None,
        }
    }

    pub fn laminar_nodes(&self) -> Option<Vec<(Vec<usize>, usize)>> {
        match &self.system {
            System::Laminar { capacities, members, .. } => {
                Some(members.iter().cloned().zip(capacities.iter().copied()).collect())
            }
            _ => None,
        }
    }

    pub fn table_entries(&self) -> Option<(&[bool], bool)> {
        match &self.system {
            System::Table { independent, matroid } => Some((independent, *matroid)),
            _ => None,
        }
    }

    /// Membership of a set of distinct in-range elements.
    fn check_distinct(&self, set: &[usize]) -> bool {
        match &self.system {
            System::Uniform { rank } => set.len() <= *rank,
            System::Partition { part_of, capacities } => {
                let mut counts = vec![0usize; capacities.len()];
                set.iter().all(|&u| {
                    counts[part_of[u]] += 1;
                    counts[part_of[u]] <= capacities[part_of[u]]
                })
            }
            System::Graphic { vertices, edges } => {
                let mut dsu = Dsu::new(*vertices);
                set.iter().all(|&u| dsu.union(edges[u].0, edges[u].1))
            }
            System::Laminar { capacities, chains, .. } => {
                let mut counts = vec![0usize; capacities.len()];
                set.iter().all(|&u| {
                    chains[u].iter().all(|&j| {
                        counts[j] += 1;
                        counts[j] <= capacities[j]
                    })
                })
            }
            System::Intersection(children) => children.iter().all(|c| c.check_distinct(set)),
            System::Hardness(h) => h.is_independent_distinct(set),
            System::Table { independent, .. } => independent[mask_of(set)],
        }
    }

    fn empty_cache(&self) -> Cache {
        match &self.system {
            System::Uniform { .. } => Cache::None,
            System::Partition { capacities, .. } => Cache::Counts(vec![0; capacities.len()]),
            System::Graphic { vertices, .. } => Cache::Dsu(Dsu::new(*vertices)),
            System::Laminar { capacities, .. } => Cache::Counts(vec![0; capacities.len()]),
            System::Intersection(children) => Cache::Children(children.iter().map(|c| c.empty_state()).collect()),
            System::Hardness(h) => Cache::Levels(h.empty_counts()),
            System::Table { .. } => Cache::Mask(0),
        }
    }

    pub(crate) fn empty_state(&self) -> IndepState {
        IndepState {
            members: vec![false; self.n],
            list: Vec::new(),
            cache: self.empty_cache(),
        }
    }

    /// Whether `S + u` is independent for the state's set `S`, assuming `S` is.
    fn can_add_raw(&self, st: &IndepState, u: usize) -> bool {
        if st.members[u] {
            return true;
        }
        match (&self.system, &st.cache) {
            (System::Uniform { rank }, _) => st.list.len() < *rank,
            (System::Partition { part_of, capacities }, Cache::Counts(c)) => c[part_of[u]] < capacities[part_of[u]],
            (System::Graphic { edges, .. }, Cache::Dsu(d)) => d.find(edges[u].0) != d.find(edges[u].1),
            (System::Laminar { capacities, chains, .. }, Cache::Counts(c)) => {
                chains[u].iter().all(|&j| c[j] < capacities[j])
            }
            (System::Intersection(children), Cache::Children(states)) => {
                children.iter().zip(states).all(|(c, s)| c.can_add_raw(s, u))
            }
            (System::Hardness(h), Cache::Levels(counts)) => h.can_add(counts, u),
            (System::Table { independent, .. }, Cache::Mask(m)) => independent[m | (1 << u)],
            _ => unreachable!("state built for a different constraint"),
        }
    }

    fn push_raw(&self, st: &mut IndepState, u: usize) {
        if st.members[u] {
            return;
        }
        match (&self.system, &mut st.cache) {
            (System::Uniform { .. }, _) => {}
            (System::Partition { part_of, .. }, Cache::Counts(c)) => c[part_of[u]] += 1,
            (System::Graphic { edges, .. }, Cache::Dsu(d)) => {
                d.union(edges[u].0, edges[u].1);
            }
            (System::Laminar { chains, .. }, Cache::Counts(c)) => {
                for &j in &chains[u] {
                    c[j] += 1;
                }
            }
            (System::Intersection(children), Cache::Children(states)) => {
                for (c, s) in children.iter().zip(states.iter_mut()) {
                    c.push_raw(s, u);
                }
            }
            (System::Hardness(h), Cache::Levels(counts)) => h.add(counts, u),
            (System::Table { .. }, Cache::Mask(m)) => *m |= 1 << u,
            _ => unreachable!("state built for a different constraint"),
        }
        st.members[u] = true;
        st.list.push(u);
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Dsu {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    /// Joins the components; false if already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

#[derive(Clone, Debug)]
enum Cache {
    None,
    Counts(Vec<usize>),
    Dsu(Dsu),
    Children(Vec<IndepState>),
    Levels(crate::hardness::LevelCounts),
    Mask(usize),
}

/// An independent set with bookkeeping for O(1)-ish extension queries.
#[derive(Clone, Debug)]
pub struct IndepState {
    members: Vec<bool>,
    list: Vec<usize>,
    cache: Cache,
}

impl IndepState {
    pub fn elements(&self) -> &[usize] {
        &self.list
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

/// Counted membership oracle around a [`Constraint`]. Every membership
/// query, including incremental `can_add` checks, counts once.
#[derive(Debug)]
pub struct IndependenceOracle {
    constraint: Constraint,
    calls: AtomicU64,
}

impl Clone for IndependenceOracle {
    fn clone(&self) -> Self {
        IndependenceOracle::new(self.constraint.clone())
    }
}

impl IndependenceOracle {
    pub fn new(constraint: Constraint) -> Self {
        IndependenceOracle {
            constraint,
            calls: AtomicU64::new(0),
        }
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn n(&self) -> usize {
        self.constraint.n
    }

    pub fn is_matroid(&self) -> bool {
        self.constraint.is_matroid()
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset_calls(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    fn count(&self) {
        self.calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn is_independent(&self, set: &[usize]) -> Result<bool> {
        check_range(set, self.n())?;
        self.count();
        Ok(self.constraint.check_distinct(&distinct(set)))
    }

    pub(crate) fn is_independent_distinct(&self, set: &[usize]) -> bool {
        self.count();
        self.constraint.check_distinct(set)
    }

    pub fn empty_state(&self) -> IndepState {
        self.constraint.empty_state()
    }

    /// Builds the state of an independent set; not counted.
    pub fn state_of(&self, set: &[usize]) -> Result<IndepState> {
        check_range(set, self.n())?;
        let mut st = self.empty_state();
        for &u in set {
            if !self.constraint.can_add_raw(&st, u) {
                return Err(Error::input(format!("set {set:?} is not independent")));
            }
            self.constraint.push_raw(&mut st, u);
        }
        Ok(st)
    }

    /// One query: is `S + u` independent?
    pub fn can_add(&self, st: &IndepState, u: usize) -> bool {
        self.count();
        self.constraint.can_add_raw(st, u)
    }

    pub(crate) fn can_add_uncounted(&self, st: &IndepState, u: usize) -> bool {
        self.constraint.can_add_raw(st, u)
    }

    pub(crate) fn check_uncounted(&self, set: &[usize]) -> bool {
        self.constraint.check_distinct(&distinct(set))
    }

    /// Adds `u`; the caller has established `S + u` is independent.
    pub fn push(&self, st: &mut IndepState, u: usize) {
        debug_assert!(self.constraint.can_add_raw(st, u));
        self.constraint.push_raw(st, u);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_membership() {
        let m = IndependenceOracle::new(Constraint::uniform(4, 2));
        assert!(!m.is_independent(&[0, 1, 2]).unwrap());
        assert!(m.is_independent(&[0, 1]).unwrap());
        assert!(m.is_independent(&[1, 1, 1]).unwrap());
        assert_eq!(m.calls(), 3);
    }

    #[test]
    fn partition_membership() {
        let m = IndependenceOracle::new(Constraint::partition(3, &[vec![0, 1], vec![2]], vec![1, 1]).unwrap());
        assert!(m.is_independent(&[0, 2]).unwrap());
        assert!(!m.is_independent(&[0, 1]).unwrap());
        assert!(m.is_independent(&[]).unwrap());
        assert!(matches!(m.is_independent(&[3]), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn graphic_triangle() {
        let m = IndependenceOracle::new(Constraint::graphic(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap());
        assert!(!m.is_independent(&[0, 1, 2]).unwrap());
        assert!(m.is_independent(&[0, 2]).unwrap());
        let loops = IndependenceOracle::new(Constraint::graphic(2, vec![(1, 1)]).unwrap());
        assert!(!loops.is_independent(&[0]).unwrap());
    }

    #[test]
    fn laminar_checks_ancestors() {
        let c = Constraint::laminar(4, vec![(vec![0, 1], 1), (vec![0, 1, 2, 3], 2)]).unwrap();
        let m = IndependenceOracle::new(c);
        assert!(!m.is_independent(&[0, 1]).unwrap());
        assert!(m.is_independent(&[0, 2]).unwrap());
        assert!(!m.is_independent(&[0, 2, 3]).unwrap());
        assert!(Constraint::laminar(3, vec![(vec![0, 1], 1), (vec![1, 2], 1)]).is_err());
    }

    #[test]
    fn intersection_flags() {
        let a = Constraint::uniform(3, 2);
        let one = Constraint::intersection(vec![a.clone()]).unwrap();
        assert!(one.is_matroid());
        let two = Constraint::intersection(vec![a.clone(), Constraint::uniform(3, 1)]).unwrap();
        assert!(!two.is_matroid());
        let m = IndependenceOracle::new(two);
        assert!(!m.is_independent(&[0, 1]).unwrap());
        assert!(m.is_independent(&[]).unwrap());
        assert!(Constraint::intersection(vec![a, Constraint::uniform(4, 1)]).is_err());
    }

    #[test]
    fn state_agrees_with_membership() {
        let c = Constraint::intersection(vec![
            Constraint::partition(4, &[vec![0, 1], vec![2, 3]], vec![1, 1]).unwrap(),
            Constraint::graphic(3, vec![(0, 1), (1, 2), (0, 2), (0, 1)]).unwrap(),
        ])
        .unwrap();
        let m = IndependenceOracle::new(c);
        let mut st = m.empty_state();
        for u in [0, 2, 3, 1] {
            let mut with = st.elements().to_vec();
            with.push(u);
            let expect = m.is_independent(&with).unwrap();
            assert_eq!(m.can_add(&st, u), expect, "u={u}");
            if expect {
                m.push(&mut st, u);
            }
        }
        assert_eq!(st.elements(), &[0, 2]);
    }
}
