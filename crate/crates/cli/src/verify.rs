//! Dry-run checks: schema, dimensions, certificates and variance, without
//! running the experiment.

use doeblin_core::decomposition::{block_contraction, exact_variance};
use doeblin_core::kernel::doeblin_extract;
use doeblin_core::montecarlo::MIN_SIGMA;
use doeblin_core::sequential::ChainSpec;
use serde::Serialize;

use crate::config::{self, ChainConfig, ExperimentConfig, ObservableConfig};
use crate::error::CliError;
use crate::model::{self, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub kind: String,
    pub issues: Vec<Issue>,
}

impl Report {
    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue { severity: Severity::Error, path: path.into(), message: message.into() });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue { severity: Severity::Warning, path: path.into(), message: message.into() });
    }

    fn absorb(&mut self, e: CliError) {
        match e {
            CliError::ConfigInvalid { path, message, .. } => self.error(path, message),
            other => self.error("", other.to_string()),
        }
    }
}

pub fn verify(cfg: &ExperimentConfig, ctx: &Context) -> Report {
    let mut r = Report { kind: cfg.kind().to_string(), issues: Vec::new() };
    match cfg {
        ExperimentConfig::AnalyzeKernel(c) => {
            if let Err(e) = model::matrix(ctx, &c.kernel, "kernel") {
                r.absorb(e);
            }
        }
        ExperimentConfig::Ledger(c) => {
            check_chain(&mut r, ctx, &c.chain);
        }
        ExperimentConfig::Decompose(c) => {
            if check_chain(&mut r, ctx, &c.chain).is_some() {
                check_observable(&mut r, ctx, &c.chain, &c.observable, None);
            }
            if c.last < c.first {
                r.error("last", "empty index range");
            }
        }
        ExperimentConfig::CltRate(c) => {
            if c.paths == 0 {
                r.error("paths", "must be at least 1");
            }
            if c.horizons.is_empty() || c.horizons[0] == 0 || c.horizons.windows(2).any(|w| w[0] >= w[1]) {
                r.error("horizons", "must be nonempty, positive and strictly increasing");
            }
            if let ObservableConfig::Telescoping(_) = c.observable {
                r.warn("observable.telescoping", "telescoping observable: Var(S_n) stays bounded, the variance may degenerate");
            }
            if check_chain(&mut r, ctx, &c.chain).is_some() && !r.has_errors() {
                check_observable(&mut r, ctx, &c.chain, &c.observable, c.horizons.last().copied());
            }
        }
        ExperimentConfig::RandomEnv(c) => check_environment(&mut r, ctx, &c.environment, &c.assignment, &c.good_set),
        ExperimentConfig::MixingTimes(c) => {
            check_environment(&mut r, ctx, &c.environment, &c.assignment, &c.good_set);
            if c.epsilons.iter().any(|e| !(*e > 0.0)) {
                r.error("epsilons", "every epsilon must be positive");
            }
        }
        ExperimentConfig::SkewCorr(c) => check_environment(&mut r, ctx, &c.environment, &c.assignment, &c.good_set),
    }
    r
}

fn check_chain(r: &mut Report, ctx: &Context, cfg: &ChainConfig) -> Option<ChainSpec> {
    let kernels: Vec<_> = cfg
        .kernels
        .iter()
        .enumerate()
        .filter_map(|(i, k)| match model::matrix(ctx, k, &format!("chain.kernels[{i}]")) {
            Ok(k) => Some(k),
            Err(e) => {
                r.absorb(e);
                None
            }
        })
        .collect();
    if kernels.len() != cfg.kernels.len() {
        return None;
    }
    let breaks = model::dimension_breaks(&kernels, cfg.periodic);
    for (i, found, expected) in &breaks {
        let next = (i + 1) % kernels.len();
        r.error(format!("chain.kernels[{next}]"), format!("kernel {i} maps into {found} states but kernel {next} starts from {expected}"));
    }
    if !breaks.is_empty() {
        return None;
    }
    if kernels.iter().all(|k| doeblin_extract(k, 1).gamma == 0.0) {
        r.warn("chain.kernels", "no kernel carries a one-step Doeblin certificate");
    }
    match model::chain(ctx, cfg) {
        Ok(chain) => {
            if cfg.periodic && block_contraction(&chain).is_none() {
                r.warn("chain.kernels", "no contraction over any block of periods; limit measures may not exist");
            }
            Some(chain)
        }
        Err(e) => {
            r.absorb(e);
            None
        }
    }
}

fn check_observable(r: &mut Report, ctx: &Context, chain: &ChainConfig, obs: &ObservableConfig, horizon: Option<usize>) {
    match model::observed(ctx, chain, obs) {
        Ok(o) => {
            if let Some(n) = horizon {
                match exact_variance(&o.chain, &o.observable, n) {
                    Ok(p) if p.sigma(n) < MIN_SIGMA => r.error("observable", format!("Var(S_n) vanishes at n = {n}")),
                    Ok(_) => {}
                    Err(e) => r.error("observable", e.to_string()),
                }
            }
        }
        Err(e) => r.absorb(e),
    }
}

fn check_environment(
    r: &mut Report,
    ctx: &Context,
    environment: &config::EnvironmentConfig,
    assignment: &config::AssignmentConfig,
    good: &config::GoodSetConfig,
) {
    if let Err(e) = model::environment(ctx, environment) {
        r.absorb(e);
    }
    match model::assignment(ctx, &environment.alphabet, assignment) {
        Ok(a) => {
            if let Err(e) = model::good_set(ctx, &environment.alphabet, good, &a) {
                r.absorb(e);
            }
        }
        Err(e) => r.absorb(e),
    }
}
