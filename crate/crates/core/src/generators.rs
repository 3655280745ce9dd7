//! Seeded random instances.

use rand::seq::index::sample;
use rand::Rng;

use crate::constraints::Constraint;
use crate::error::{Error, Result};
use crate::hardness::{HardnessInstance, Overrides};
use crate::objectives::Objective;
use crate::seed::rng;

#[derive(Clone, Debug)]
pub struct Generated {
    pub objective: Objective<f64>,
    pub constraint: Constraint,
    /// Value of a known feasible set that is optimal by construction.
    pub planted_opt: Option<f64>,
    pub generator: &'static str,
    pub seed: u64,
}

/// Weighted coverage where each element covers `degree` random items of a
/// universe with weights in `[0.5, 1.5)`, under a partition matroid of `r`
/// capacity-1 parts with random labels.
pub fn coverage_random(n: usize, universe: usize, degree: usize, r: usize, seed: u64) -> Result<Generated> {
    if degree > universe {
        return Err(Error::input(format!("degree {degree} exceeds universe {universe}")));
    }
    if r == 0 {
        return Err(Error::input("need at least one part"));
    }
    let mut g = rng(seed);
    let weights: Vec<f64> = (0..universe).map(|_| g.gen_range(0.5..1.5)).collect();
    let covers: Vec<Vec<usize>> = (0..n).map(|_| sample(&mut g, universe, degree).into_vec()).collect();
    let labels: Vec<usize> = (0..n).map(|_| g.gen_range(0..r)).collect();
    Ok(Generated {
        objective: Objective::coverage(covers, weights)?,
        constraint: Constraint::partition_from_labels(labels, vec![1; r])?,
        planted_opt: None,
        generator: "coverage-random",
        seed,
    })
}

/// Unit-weight coverage with a planted base: element `i < r` covers block
/// `i` of `block` items and sits alone in part `i`. The remaining elements
/// cover `decoy_degree <= block` random items and get random parts, so no
/// independent set beats the planted value `r * block`.
pub fn planted_coverage(n: usize, r: usize, block: usize, decoy_degree: usize, seed: u64) -> Result<Generated> {
    if n < r || r == 0 {
        return Err(Error::input(format!("need 1 <= r <= n, got r={r}, n={n}")));
    }
    if decoy_degree > block {
        return Err(Error::input("decoys must not cover more than a planted block"));
    }
    let mut g = rng(seed);
    let universe = r * block;
    let mut covers: Vec<Vec<usize>> = (0..r).map(|i| (i * block..(i + 1) * block).collect()).collect();
    let mut labels: Vec<usize> = (0..r).collect();
    for _ in r..n {
        covers.push(sample(&mut g, universe, decoy_degree).into_vec());
        labels.push(g.gen_range(0..r));
    }
    Ok(Generated {
        objective: Objective::coverage(covers, vec![1.0; universe])?,
        constraint: Constraint::partition_from_labels(labels, vec![1; r])?,
        planted_opt: Some(universe as f64),
        generator: "planted-coverage",
        seed,
    })
}

/// Random graph cut with edge weights in `[0.5, 1.5)` under a uniform matroid.
pub fn cut_random(n: usize, edge_prob: f64, rank: usize, seed: u64) -> Result<Generated> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::input("edge probability must lie in [0, 1]"));
    }
    let mut g = rng(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if g.gen::<f64>() < edge_prob {
                edges.push((a, b, g.gen_range(0.5..1.5)));
            }
        }
    }
    Ok(Generated {
        objective: Objective::cut(n, edges)?,
        constraint: Constraint::uniform(n, rank),
        planted_opt: None,
        generator: "cut-random",
        seed,
    })
}

pub fn hardness(p: usize, r: usize, overrides: Overrides) -> Result<Generated> {
    let inst = HardnessInstance::build(p, r, overrides)?;
    let (_, opt) = inst.opt_value::<f64>()?;
    Ok(Generated {
        objective: inst.objective(),
        constraint: inst.constraint(),
        planted_opt: Some(opt),
        generator: "hardness",
        seed: 0,
    })
}
