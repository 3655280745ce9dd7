//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use substream::generators::{self, Generated};
use substream::hardness::Overrides;

use crate::instance::Instance;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    CoverageRandom {
        n: usize,
        universe: usize,
        degree: usize,
        r: usize,
        #[serde(default)]
        seed: u64,
    },
    PlantedCoverage {
        n: usize,
        r: usize,
        block: usize,
        decoy_degree: usize,
        #[serde(default)]
        seed: u64,
    },
    CutRandom {
        n: usize,
        edge_prob: f64,
        rank: usize,
        #[serde(default)]
        seed: u64,
    },
    Hardness {
        p: usize,
        r: usize,
        #[serde(default)]
        k: Option<usize>,
        #[serde(default)]
        alpha: Option<usize>,
        #[serde(default)]
        ell: Option<usize>,
    },
}

impl GeneratorSpec {
    pub fn seed(&self) -> u64 {
        match self {
            GeneratorSpec::CoverageRandom { seed, .. }
            | GeneratorSpec::PlantedCoverage { seed, .. }
            | GeneratorSpec::CutRandom { seed, .. } => *seed,
            GeneratorSpec::Hardness { .. } => 0,
        }
    }

    /// Builds with `seed` in place of the generator's own.
    pub fn generate_with(&self, seed: u64) -> Result<Generated, CliError> {
        let g = match *self {
            GeneratorSpec::CoverageRandom {
                n, universe, degree, r, ..
            } => generators::coverage_random(n, universe, degree, r, seed)?,
            GeneratorSpec::PlantedCoverage {
                n, r, block, decoy_degree, ..
            } => generators::planted_coverage(n, r, block, decoy_degree, seed)?,
            GeneratorSpec::CutRandom { n, edge_prob, rank, .. } => generators::cut_random(n, edge_prob, rank, seed)?,
            GeneratorSpec::Hardness { p, r, k, alpha, ell } => {
                generators::hardness(p, r, Overrides { k, alpha, ell })?
            }
        };
        Ok(g)
    }

    pub fn generate(&self) -> Result<Generated, CliError> {
        self.generate_with(self.seed())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Filter,
    FilterUnknownRank,
    BoostOffline,
    BoostStream,
    MultiPass,
    SinglePassMatroid,
    Greedy,
    BruteForce,
}

impl Algorithm {
    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Filter => "filter",
            Algorithm::FilterUnknownRank => "filter-unknown-rank",
            Algorithm::BoostOffline => "boost-offline",
            Algorithm::BoostStream => "boost-stream",
            Algorithm::MultiPass => "multi-pass",
            Algorithm::SinglePassMatroid => "single-pass-matroid",
            Algorithm::Greedy => "greedy",
            Algorithm::BruteForce => "brute-force",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderKind {
    #[default]
    Uniform,
    Adversarial,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Planted value, then the hardness optimum, then brute force when
    /// within its cap, then greedy.
    #[default]
    Auto,
    Opt,
    Greedy,
    Planted,
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarKind {
    F32,
    #[default]
    F64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FModeKind {
    #[default]
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineMode {
    #[default]
    Fpt,
    Poly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    #[default]
    Greedy,
    Exhaustive,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub delta: Option<f64>,
    pub eps: Option<f64>,
    pub h: Option<f64>,
    pub p_prime: Option<f64>,
    pub ell: Option<usize>,
    pub mode: PipelineMode,
    pub memory_cap: Option<usize>,
    pub f_mode: FModeKind,
    pub samples: Option<usize>,
    /// p-system parameter for the unknown-rank filter.
    pub p: Option<usize>,
    /// Rank bound given to the filter; defaults to the greedy rank.
    pub r: Option<usize>,
    /// Offline solver applied to `S ∪ H` after filtering.
    pub solver: SolverKind,
    pub n_cap: Option<usize>,
}

pub const DEFAULT_SAMPLES: usize = 2048;
pub const DEFAULT_N_CAP: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    /// Draw a fresh generated instance per trial from the trial seed.
    #[serde(default)]
    pub resample: bool,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub params: Params,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub order: OrderKind,
    #[serde(default)]
    pub baseline: BaselineKind,
    #[serde(default)]
    pub scalar: ScalarKind,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    /// Reads a config; a relative `instance` path is taken from the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(p) = &cfg.instance {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.instance = Some(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        match (&self.instance, &self.generator) {
            (Some(_), Some(_)) => return bad("give either instance or generator, not both".into()),
            (None, None) => return bad("an instance path or a generator is required".into()),
            (Some(_), None) if self.resample => return bad("resample needs a generator".into()),
            _ => {}
        }
        let p = &self.params;
        let open_unit = |name: &str, v: Option<f64>, required: bool| -> Result<(), CliError> {
            match v {
                None if required => Err(CliError::Config(format!("{} requires {name}", self.algorithm.id()))),
                Some(x) if !(x > 0.0 && x < 1.0) => Err(CliError::Config(format!("{name} must lie in (0, 1), got {x}"))),
                _ => Ok(()),
            }
        };
        match self.algorithm {
            Algorithm::Filter => open_unit("delta", p.delta, true)?,
            Algorithm::FilterUnknownRank => {
                open_unit("delta", p.delta, true)?;
                if p.p == Some(0) {
                    return bad("p must be at least 1".into());
                }
            }
            Algorithm::BoostOffline | Algorithm::BoostStream => {
                let explicit = p.p_prime.is_some() && p.ell.is_some();
                open_unit("delta", p.delta, !explicit)?;
                if let Some(h) = p.h {
                    if !(h > 0.0 && h <= 1.0) {
                        return bad(format!("h must lie in (0, 1], got {h}"));
                    }
                }
                if p.p_prime.is_some() != p.ell.is_some() {
                    return bad("p_prime and ell must be given together".into());
                }
            }
            Algorithm::MultiPass | Algorithm::SinglePassMatroid => open_unit("eps", p.eps, true)?,
            Algorithm::Greedy | Algorithm::BruteForce => {}
        }
        if p.samples == Some(0) {
            return bad("samples must be at least 1".into());
        }
        if p.memory_cap.is_some() && self.algorithm != Algorithm::Filter {
            return bad("memory_cap applies to the filter only".into());
        }
        if self.order == OrderKind::Adversarial {
            let hard = matches!(self.generator, Some(GeneratorSpec::Hardness { .. })) || self.instance.is_some();
            if !hard {
                return bad("adversarial order needs a hardness instance".into());
            }
        }
        Ok(())
    }

    /// The shared instance, or `None` when each trial draws its own.
    pub fn shared_instance(&self) -> Result<Option<Instance>, CliError> {
        if self.resample {
            return Ok(None);
        }
        match (&self.instance, &self.generator) {
            (Some(path), _) => Instance::load(path).map(Some),
            (None, Some(g)) => Ok(Some(Instance::from_generated(&g.generate()?))),
            (None, None) => Err(CliError::Config("no instance".into())),
        }
    }
}
