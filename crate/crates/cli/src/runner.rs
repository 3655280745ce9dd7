//! Trial orchestration and result emission.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use substream::boosting::{niid_params, offline_params, run_offline_boost, run_stream_boost, BoostParams};
use substream::constraints::rank_info;
use substream::filtering::{run_filter_capped, run_filter_unknown_rank};
use substream::hardness::adversarial_order;
use substream::pipelines::{
    brute_force_opt, combine_offline, greedy_offline, multi_pass, single_pass_matroid, Mode, Solver,
};
use substream::seed::{derive_seed, tags};
use substream::stream::{uniform_order, StreamOrder};
use substream::{Error, FMode, IndependenceOracle, MultilinearOracle, Scalar, ValueOracle};

use crate::config::{
    Algorithm, BaselineKind, ExperimentConfig, FModeKind, OrderKind, PipelineMode, ScalarKind, SolverKind,
    DEFAULT_N_CAP, DEFAULT_SAMPLES,
};
use crate::instance::Instance;
use crate::CliError;

pub const CSV_HEADER: [&str; 13] = [
    "trial",
    "seed",
    "algorithm",
    "value",
    "baseline",
    "ratio",
    "stored_peak",
    "f_calls",
    "indep_calls",
    "F_calls",
    "passes",
    "failed",
    "ms",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub algorithm: String,
    pub value: f64,
    pub baseline: Option<f64>,
    /// `baseline / value`, present when both are and `value > 0`.
    pub ratio: Option<f64>,
    pub stored_peak: u64,
    pub f_calls: u64,
    pub indep_calls: u64,
    #[serde(rename = "F_calls")]
    pub big_f_calls: u64,
    pub passes: u64,
    pub failed: bool,
    pub ms: f64,
}

/// One summary statistic over the trial rows; `None` where a column had no
/// values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub stat: &'static str,
    pub algorithm: String,
    pub value: Option<f64>,
    pub baseline: Option<f64>,
    pub ratio: Option<f64>,
    pub stored_peak: Option<f64>,
    pub f_calls: Option<f64>,
    pub indep_calls: Option<f64>,
    #[serde(rename = "F_calls")]
    pub big_f_calls: Option<f64>,
    pub passes: Option<f64>,
    pub failed: Option<f64>,
    pub ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOutput {
    pub rows: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: usize,
    /// Record wall time; off by default so output is reproducible.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { jobs: 1, timing: false }
    }
}

pub fn trial_seed(base: u64, trial: usize) -> u64 {
    derive_seed(base, tags::TRIAL ^ trial as u64)
}

/// Runs every trial of `cfg`; rows come back in trial order.
pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let shared = cfg.shared_instance()?;
    let shared_baseline = match &shared {
        Some(inst) => {
            check_instance(cfg, inst)?;
            baseline_value(cfg, inst)?
        }
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let rows: Vec<TrialRecord> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let seed = trial_seed(cfg.seed, t);
                match &shared {
                    Some(inst) => run_trial(cfg, inst, t, seed, shared_baseline, opts.timing),
                    None => {
                        let g = cfg.generator.as_ref().expect("validated");
                        let inst = Instance::from_generated(&g.generate_with(derive_seed(seed, tags::INSTANCE))?);
                        check_instance(cfg, &inst)?;
                        let b = baseline_value(cfg, &inst)?;
                        run_trial(cfg, &inst, t, seed, b, opts.timing)
                    }
                }
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let summary = summarize(&rows, cfg.algorithm.id());
    Ok(RunOutput { rows, summary })
}

fn check_instance(cfg: &ExperimentConfig, inst: &Instance) -> Result<(), CliError> {
    if cfg.order == OrderKind::Adversarial && inst.hardness().is_none() {
        return Err(CliError::Config("adversarial order needs a hardness constraint".into()));
    }
    let needs_matroid = matches!(cfg.algorithm, Algorithm::MultiPass | Algorithm::SinglePassMatroid);
    if needs_matroid && !inst.constraint.is_matroid() {
        return Err(CliError::Config(format!("{} needs a matroid constraint", cfg.algorithm.id())));
    }
    Ok(())
}

fn baseline_value(cfg: &ExperimentConfig, inst: &Instance) -> Result<Option<f64>, CliError> {
    let n_cap = cfg.params.n_cap.unwrap_or(DEFAULT_N_CAP);
    let f = ValueOracle::new(inst.objective.clone());
    let ind = IndependenceOracle::new(inst.constraint.clone());
    let greedy = |f: &ValueOracle<f64>| -> Result<f64, CliError> {
        let all: Vec<usize> = (0..inst.n()).collect();
        Ok(f.eval(&greedy_offline(f, &ind, &all))?)
    };
    let v = match cfg.baseline {
        BaselineKind::None => None,
        BaselineKind::Planted => Some(
            inst.file
                .metadata
                .planted_opt
                .ok_or_else(|| CliError::Config("instance has no planted_opt".into()))?,
        ),
        BaselineKind::Greedy => Some(greedy(&f)?),
        BaselineKind::Opt => Some(match inst.hardness() {
            Some(h) => h.opt_value::<f64>()?.1,
            None => brute_force_opt(&f, &ind, n_cap)?.1,
        }),
        BaselineKind::Auto => {
            if let Some(v) = inst.file.metadata.planted_opt {
                Some(v)
            } else if let Some(h) = inst.hardness() {
                Some(h.opt_value::<f64>()?.1)
            } else {
                match brute_force_opt(&f, &ind, n_cap) {
                    Ok((_, v)) => Some(v),
                    Err(Error::Capability(_)) => Some(greedy(&f)?),
                    Err(e) => return Err(e.into()),
                }
            }
        }
    };
    Ok(v)
}

fn make_order(cfg: &ExperimentConfig, inst: &Instance, seed: u64) -> StreamOrder {
    match cfg.order {
        OrderKind::Uniform => uniform_order(inst.n(), seed),
        OrderKind::Adversarial => adversarial_order(&inst.hardness().expect("checked"), seed),
    }
}

fn run_trial(
    cfg: &ExperimentConfig,
    inst: &Instance,
    trial: usize,
    seed: u64,
    baseline: Option<f64>,
    timing: bool,
) -> Result<TrialRecord, CliError> {
    match cfg.scalar {
        ScalarKind::F64 => run_trial_as::<f64>(cfg, inst, trial, seed, baseline, timing),
        ScalarKind::F32 => run_trial_as::<f32>(cfg, inst, trial, seed, baseline, timing),
    }
}

struct Outcome {
    output: Vec<usize>,
    stored_peak: usize,
    passes: usize,
    failed: bool,
}

fn every_element(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn run_trial_as<T: Scalar>(
    cfg: &ExperimentConfig,
    inst: &Instance,
    trial: usize,
    seed: u64,
    baseline: Option<f64>,
    timing: bool,
) -> Result<TrialRecord, CliError> {
    let p = &cfg.params;
    let f = ValueOracle::new(inst.objective.cast::<T>());
    let ind = IndependenceOracle::new(inst.constraint.clone());
    let mode = match p.f_mode {
        FModeKind::Exact => FMode::Exact,
        FModeKind::MonteCarlo => FMode::MonteCarlo {
            samples: p.samples.unwrap_or(DEFAULT_SAMPLES),
            seed: derive_seed(seed, tags::SAMPLE),
        },
    };
    let fo = MultilinearOracle::new(&f, mode)?;
    let order = make_order(cfg, inst, derive_seed(seed, tags::ORDER));
    let r = match p.r {
        Some(r) => r,
        None => rank_info(&ind).r,
    };
    f.reset_calls();
    ind.reset_calls();
    let n = inst.n();
    let start = Instant::now();
    let solver = match p.solver {
        SolverKind::Greedy => Solver::Greedy,
        SolverKind::Exhaustive => Solver::Exhaustive { size_cap: r },
    };
    let combine = |s: &[usize], h: &[usize]| -> Result<Vec<usize>, CliError> {
        let out = match combine_offline(s, h, &f, &ind, solver) {
            Err(Error::Capability(_)) => combine_offline(s, h, &f, &ind, Solver::Greedy)?,
            other => other?,
        };
        if let Some(u) = out.iter().find(|u| !s.contains(u) && !h.contains(u)) {
            return Err(CliError::Invariant(format!("output element {u} was never stored")));
        }
        Ok(out)
    };
    let boost_params = |streaming: bool| -> Result<BoostParams, CliError> {
        let h_default = (-1.0f64).exp();
        let params = match (p.p_prime, p.ell) {
            (Some(pp), Some(ell)) => {
                let b = BoostParams::new(p.h.unwrap_or(h_default), pp, ell, r)?;
                if streaming {
                    b.check_streaming()?;
                }
                b
            }
            _ => {
                let delta = p.delta.expect("validated");
                if streaming {
                    niid_params(delta, r, p.h.unwrap_or(h_default))?
                } else {
                    offline_params(delta, r)?
                }
            }
        };
        Ok(params)
    };
    let oc = match cfg.algorithm {
        Algorithm::Filter => {
            let out = run_filter_capped(&order, &f, &ind, p.delta.expect("validated"), r, p.memory_cap)?;
            if let Some(cap) = p.memory_cap {
                if out.stored_peak > cap {
                    return Err(CliError::Invariant(format!("stored {} over cap {cap}", out.stored_peak)));
                }
            }
            Outcome {
                output: combine(&out.s_delta, &out.h)?,
                stored_peak: out.stored_peak,
                passes: 1,
                failed: out.failed,
            }
        }
        Algorithm::FilterUnknownRank => {
            let out = run_filter_unknown_rank(&order, &f, &ind, p.delta.expect("validated"), p.p.unwrap_or(1))?;
            Outcome {
                output: combine(&out.best_s, &out.h)?,
                stored_peak: out.stored_peak,
                passes: 1,
                failed: out.failed,
            }
        }
        Algorithm::BoostOffline => {
            let run = run_offline_boost(&fo, &ind, &[], &boost_params(false)?, seed)?;
            Outcome {
                output: run.a,
                stored_peak: run.stored_peak,
                passes: 0,
                failed: false,
            }
        }
        Algorithm::BoostStream => {
            let run = run_stream_boost(&order, &fo, &ind, &[], &boost_params(true)?, seed)?;
            Outcome {
                output: run.a,
                stored_peak: run.stored_peak,
                passes: 1,
                failed: false,
            }
        }
        Algorithm::MultiPass => {
            let res = multi_pass(&fo, &ind, p.eps.expect("validated"), seed)?;
            Outcome {
                output: res.output,
                stored_peak: res.stored_peak,
                passes: res.passes,
                failed: res.failed_filter,
            }
        }
        Algorithm::SinglePassMatroid => {
            let mode = match p.mode {
                PipelineMode::Fpt => Mode::Fpt,
                PipelineMode::Poly => Mode::Poly,
            };
            let res = single_pass_matroid(&order, &fo, &ind, p.eps.expect("validated"), mode, seed)?;
            Outcome {
                output: res.output,
                stored_peak: res.stored_peak,
                passes: res.passes,
                failed: res.failed_filter,
            }
        }
        Algorithm::Greedy => Outcome {
            output: greedy_offline(&f, &ind, &every_element(n)),
            stored_peak: n,
            passes: 0,
            failed: false,
        },
        Algorithm::BruteForce => Outcome {
            output: brute_force_opt(&f, &ind, p.n_cap.unwrap_or(DEFAULT_N_CAP))?.0,
            stored_peak: n,
            passes: 0,
            failed: false,
        },
    };
    let ms = if timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let (f_calls, indep_calls, big_f_calls) = (f.calls(), ind.calls(), fo.calls());
    if !ind.is_independent(&oc.output)? {
        return Err(CliError::Invariant(format!("{} returned a dependent set", cfg.algorithm.id())));
    }
    let value = f.eval(&oc.output)?.to_f64_lossy();
    let ratio = match baseline {
        Some(b) if value > 0.0 => Some(b / value),
        _ => None,
    };
    Ok(TrialRecord {
        trial,
        seed,
        algorithm: cfg.algorithm.id().to_string(),
        value,
        baseline,
        ratio,
        stored_peak: oc.stored_peak as u64,
        f_calls,
        indep_calls,
        big_f_calls,
        passes: oc.passes as u64,
        failed: oc.failed,
        ms,
    })
}

fn stats(xs: &[f64]) -> [Option<f64>; 3] {
    if xs.is_empty() {
        return [None; 3];
    }
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let stderr = if xs.len() > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    [Some(mean), Some(stderr), Some(max)]
}

/// Mean, standard error (sample variance) and max of each numeric column.
pub fn summarize(rows: &[TrialRecord], algorithm: &str) -> Vec<SummaryRow> {
    let col = |get: &dyn Fn(&TrialRecord) -> Option<f64>| stats(&rows.iter().filter_map(get).collect::<Vec<_>>());
    let value = col(&|r| Some(r.value));
    let baseline = col(&|r| r.baseline);
    let ratio = col(&|r| r.ratio);
    let stored = col(&|r| Some(r.stored_peak as f64));
    let fc = col(&|r| Some(r.f_calls as f64));
    let ic = col(&|r| Some(r.indep_calls as f64));
    let bf = col(&|r| Some(r.big_f_calls as f64));
    let passes = col(&|r| Some(r.passes as f64));
    let failed = col(&|r| Some(f64::from(u8::from(r.failed))));
    let ms = col(&|r| Some(r.ms));
    ["mean", "stderr", "max"]
        .iter()
        .enumerate()
        .map(|(i, &stat)| SummaryRow {
            stat,
            algorithm: algorithm.to_string(),
            value: value[i],
            baseline: baseline[i],
            ratio: ratio[i],
            stored_peak: stored[i],
            f_calls: fc[i],
            indep_calls: ic[i],
            big_f_calls: bf[i],
            passes: passes[i],
            failed: failed[i],
            ms: ms[i],
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(out: &RunOutput, w: W) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(e.to_string());
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER).map_err(io)?;
    for r in &out.rows {
        wr.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            r.algorithm.clone(),
            r.value.to_string(),
            opt(r.baseline),
            opt(r.ratio),
            r.stored_peak.to_string(),
            r.f_calls.to_string(),
            r.indep_calls.to_string(),
            r.big_f_calls.to_string(),
            r.passes.to_string(),
            u8::from(r.failed).to_string(),
            r.ms.to_string(),
        ])
        .map_err(io)?;
    }
    for s in &out.summary {
        wr.write_record([
            s.stat.to_string(),
            String::new(),
            s.algorithm.clone(),
            opt(s.value),
            opt(s.baseline),
            opt(s.ratio),
            opt(s.stored_peak),
            opt(s.f_calls),
            opt(s.indep_calls),
            opt(s.big_f_calls),
            opt(s.passes),
            opt(s.failed),
            opt(s.ms),
        ])
        .map_err(io)?;
    }
    wr.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_json<W: Write>(out: &RunOutput, mut w: W) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut w, out).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w).map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_output<W: Write>(out: &RunOutput, format: Format, w: W) -> Result<(), CliError> {
    match format {
        Format::Csv => write_csv(out, w),
        Format::Json => write_json(out, w),
    }
}

pub fn to_csv_string(out: &RunOutput) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_csv(out, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}
