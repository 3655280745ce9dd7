//! Exhaustive instance checks.

use std::fmt;

use substream::constraints::{
    verify_independence_system, verify_matroid_exchange, verify_p_system, IndependenceOracle,
};
use substream::objectives::verify_submodular;
use substream::pipelines::brute_force_opt;
use substream::{Error, Objective, ValueOracle};

use crate::instance::Instance;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    Submodular,
    Independence,
    Matroid,
    PSystem,
    Hardness,
}

impl Check {
    pub const ALL: [Check; 5] = [
        Check::Submodular,
        Check::Independence,
        Check::Matroid,
        Check::PSystem,
        Check::Hardness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Submodular => "submodular",
            Check::Independence => "independence",
            Check::Matroid => "matroid",
            Check::PSystem => "p-system",
            Check::Hardness => "hardness",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown check {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(String),
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub check: Check,
    pub verdict: Verdict,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.verdict {
            Verdict::Pass => write!(f, "{}: pass", self.check.name()),
            Verdict::Fail(why) => write!(f, "{}: fail ({why})", self.check.name()),
            Verdict::Skipped(why) => write!(f, "{}: skipped ({why})", self.check.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub n_cap: usize,
    /// p for the p-system check; defaults to the hardness p, or 1.
    pub p: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { n_cap: 12, p: None }
    }
}

fn verdict(r: substream::Result<bool>, what: &str) -> Result<Verdict, CliError> {
    match r {
        Ok(true) => Ok(Verdict::Pass),
        Ok(false) => Ok(Verdict::Fail(what.to_string())),
        Err(Error::Capability(m)) => Ok(Verdict::Skipped(m)),
        Err(e) => Err(e.into()),
    }
}

fn hardness_check(inst: &Instance, opts: &VerifyOptions) -> Result<Verdict, CliError> {
    let Some(h) = inst.hardness() else {
        return Ok(Verdict::Skipped("not a hardness instance".into()));
    };
    let ind = IndependenceOracle::new(inst.constraint.clone());
    if h.closed_form_n() != h.n() {
        return Ok(Verdict::Fail(format!("n = {} but closed form gives {}", h.n(), h.closed_form_n())));
    }
    let (witness, value) = h.opt_value::<f64>()?;
    let s = &h.system;
    let expected = (s.ell() * s.k() * s.k()) as f64;
    let f = ValueOracle::new(h.objective::<f64>());
    if (f.eval(&witness)? - expected).abs() > 1e-9 || value != expected {
        return Ok(Verdict::Fail("f(∪A_i) differs from ℓk²".into()));
    }
    if inst.n() > opts.n_cap {
        return Ok(Verdict::Skipped(format!(
            "exhaustive part needs n <= {}, got {}",
            opts.n_cap,
            inst.n()
        )));
    }
    if let Verdict::Fail(m) = verdict(verify_independence_system(&ind, opts.n_cap), "not down-closed")? {
        return Ok(Verdict::Fail(m));
    }
    let unit = ValueOracle::new(Objective::linear(vec![1.0; inst.n()])?);
    let (_, largest) = brute_force_opt(&unit, &ind, opts.n_cap)?;
    let rank: usize = (1..=s.ell()).map(|i| s.a_size(i)).sum();
    if largest as usize != rank {
        return Ok(Verdict::Fail(format!("largest independent set {largest} differs from Σα^i k² = {rank}")));
    }
    Ok(Verdict::Pass)
}

pub fn run_checks(inst: &Instance, checks: &[Check], opts: &VerifyOptions) -> Result<Vec<CheckResult>, CliError> {
    let ind = IndependenceOracle::new(inst.constraint.clone());
    let f = ValueOracle::new(inst.objective.clone());
    let mut out = Vec::new();
    for &check in checks {
        let v = match check {
            Check::Submodular => verdict(verify_submodular(&f, opts.n_cap), "a marginal increased")?,
            Check::Independence => verdict(verify_independence_system(&ind, opts.n_cap), "not down-closed")?,
            Check::Matroid => verdict(verify_matroid_exchange(&ind, opts.n_cap), "exchange axiom fails")?,
            Check::PSystem => {
                let p = opts
                    .p
                    .or_else(|| inst.hardness().map(|h| h.p as f64))
                    .unwrap_or(1.0);
                verdict(verify_p_system(&ind, p, opts.n_cap), &format!("base sizes differ by more than p = {p}"))?
            }
            Check::Hardness => hardness_check(inst, opts)?,
        };
        out.push(CheckResult { check, verdict: v });
    }
    Ok(out)
}
