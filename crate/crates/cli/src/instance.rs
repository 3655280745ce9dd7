//! Instance files: `{n, objective, constraint, metadata}`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use substream::constraints::Constraint;
use substream::generators::Generated;
use substream::hardness::{HardnessInstance, Overrides};
use substream::objectives::{Objective, ObjectiveKind};
use substream::ConstraintKind;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum ObjectiveSpec {
    /// Unit universe weights.
    Coverage { covers: Vec<Vec<usize>> },
    WeightedCoverage { covers: Vec<Vec<usize>>, weights: Vec<f64> },
    Cut { edges: Vec<(usize, usize, f64)> },
    Linear { weights: Vec<f64> },
    Table { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaminarNode {
    pub members: Vec<usize>,
    pub capacity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum ConstraintSpec {
    Uniform {
        rank: usize,
    },
    Partition {
        parts: Vec<Vec<usize>>,
        capacities: Vec<usize>,
    },
    Graphic {
        vertices: usize,
        edges: Vec<(usize, usize)>,
    },
    Laminar {
        nodes: Vec<LaminarNode>,
    },
    Intersection {
        constraints: Vec<ConstraintSpec>,
    },
    Hardness {
        p: usize,
        r: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ell: Option<usize>,
    },
    Table {
        independent: Vec<bool>,
        #[serde(default)]
        matroid: bool,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_opt: Option<f64>,
    #[serde(default)]
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub objective: ObjectiveSpec,
    pub constraint: ConstraintSpec,
    #[serde(default)]
    pub metadata: Metadata,
}

impl ObjectiveSpec {
    pub fn build(&self, n: usize) -> Result<Objective<f64>, CliError> {
        let obj = match self {
            ObjectiveSpec::Coverage { covers } => Objective::unit_coverage(covers.clone())?,
            ObjectiveSpec::WeightedCoverage { covers, weights } => Objective::coverage(covers.clone(), weights.clone())?,
            ObjectiveSpec::Cut { edges } => Objective::cut(n, edges.clone())?,
            ObjectiveSpec::Linear { weights } => Objective::linear(weights.clone())?,
            ObjectiveSpec::Table { values } => {
                let bits = values.len().trailing_zeros() as usize;
                Objective::table(bits, values.clone())?
            }
        };
        if obj.n() != n {
            return Err(CliError::Config(format!("objective has {} elements, instance declares n = {n}", obj.n())));
        }
        Ok(obj)
    }

    pub fn from_objective(obj: &Objective<f64>) -> Self {
        match obj.kind() {
            ObjectiveKind::Coverage => {
                let (covers, weights) = obj.covers().expect("coverage payload");
                if weights.iter().all(|&w| w == 1.0) && covers.iter().flatten().max().map_or(0, |&e| e + 1) == weights.len() {
                    ObjectiveSpec::Coverage { covers: covers.to_vec() }
                } else {
                    ObjectiveSpec::WeightedCoverage {
                        covers: covers.to_vec(),
                        weights: weights.to_vec(),
                    }
                }
            }
            ObjectiveKind::Cut => ObjectiveSpec::Cut {
                edges: obj.cut_edges().expect("cut payload").to_vec(),
            },
            ObjectiveKind::Linear => ObjectiveSpec::Linear {
                weights: obj.linear_weights().expect("linear payload").to_vec(),
            },
            ObjectiveKind::Table => ObjectiveSpec::Table {
                values: obj.table_values().expect("table payload").to_vec(),
            },
        }
    }
}

impl ConstraintSpec {
    pub fn build(&self, n: usize) -> Result<Constraint, CliError> {
        let c = match self {
            ConstraintSpec::Uniform { rank } => Constraint::uniform(n, *rank),
            ConstraintSpec::Partition { parts, capacities } => Constraint::partition(n, parts, capacities.clone())?,
            ConstraintSpec::Graphic { vertices, edges } => Constraint::graphic(*vertices, edges.clone())?,
            ConstraintSpec::Laminar { nodes } => {
                Constraint::laminar(n, nodes.iter().map(|l| (l.members.clone(), l.capacity)).collect())?
            }
            ConstraintSpec::Intersection { constraints } => Constraint::intersection(
                constraints.iter().map(|c| c.build(n)).collect::<Result<Vec<_>, _>>()?,
            )?,
            ConstraintSpec::Hardness { p, r, k, alpha, ell } => {
                let o = Overrides {
                    k: *k,
                    alpha: *alpha,
                    ell: *ell,
                };
                HardnessInstance::build(*p, *r, o)?.constraint()
            }
            ConstraintSpec::Table { independent, matroid } => {
                let bits = independent.len().trailing_zeros() as usize;
                Constraint::table(bits, independent.clone(), *matroid)?
            }
        };
        if c.n() != n {
            return Err(CliError::Config(format!("constraint has {} elements, instance declares n = {n}", c.n())));
        }
        Ok(c)
    }

    pub fn from_constraint(c: &Constraint) -> Self {
        match c.kind() {
            ConstraintKind::Uniform => ConstraintSpec::Uniform {
                rank: c.uniform_rank().expect("uniform payload"),
            },
            ConstraintKind::Partition => {
                let (part_of, caps) = c.partition_parts().expect("partition payload");
                let mut parts = vec![Vec::new(); caps.len()];
                for (u, &j) in part_of.iter().enumerate() {
                    parts[j].push(u);
                }
                ConstraintSpec::Partition {
                    parts,
                    capacities: caps.to_vec(),
                }
            }
            ConstraintKind::Graphic => {
                let (vertices, edges) = c.graphic_edges().expect("graphic payload");
                ConstraintSpec::Graphic {
                    vertices,
                    edges: edges.to_vec(),
                }
            }
            ConstraintKind::Laminar => ConstraintSpec::Laminar {
                nodes: c
                    .laminar_nodes()
                    .expect("laminar payload")
                    .into_iter()
                    .map(|(members, capacity)| LaminarNode { members, capacity })
                    .collect(),
            },
            ConstraintKind::Intersection => ConstraintSpec::Intersection {
                constraints: c
                    .children()
                    .expect("children")
                    .iter()
                    .map(ConstraintSpec::from_constraint)
                    .collect(),
            },
            ConstraintKind::Hardness => {
                let h = c.hardness_system().expect("hardness payload");
                ConstraintSpec::Hardness {
                    p: h.p(),
                    r: h.r(),
                    k: Some(h.k()),
                    alpha: Some(h.alpha()),
                    ell: Some(h.ell()),
                }
            }
            ConstraintKind::Table => {
                let (independent, matroid) = c.table_entries().expect("table payload");
                ConstraintSpec::Table {
                    independent: independent.to_vec(),
                    matroid,
                }
            }
        }
    }
}

/// Parsed instance with its oracles' payloads.
#[derive(Clone, Debug)]
pub struct Instance {
    pub file: InstanceFile,
    pub objective: Objective<f64>,
    pub constraint: Constraint,
}

impl Instance {
    pub fn from_file(file: InstanceFile) -> Result<Self, CliError> {
        let objective = file.objective.build(file.n)?;
        let constraint = file.constraint.build(file.n)?;
        Ok(Instance {
            file,
            objective,
            constraint,
        })
    }

    pub fn from_generated(g: &Generated) -> Self {
        let file = InstanceFile {
            n: g.objective.n(),
            objective: ObjectiveSpec::from_objective(&g.objective),
            constraint: ConstraintSpec::from_constraint(&g.constraint),
            metadata: Metadata {
                planted_opt: g.planted_opt,
                generator: g.generator.to_string(),
                seed: Some(g.seed),
            },
        };
        Instance {
            file,
            objective: g.objective.clone(),
            constraint: g.constraint.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let file: InstanceFile =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_file(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string(&self.file).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn n(&self) -> usize {
        self.file.n
    }

    pub fn hardness(&self) -> Option<HardnessInstance> {
        self.constraint
            .hardness_system()
            .map(|h| HardnessInstance::from_system(h).expect("validated at build"))
    }
}
