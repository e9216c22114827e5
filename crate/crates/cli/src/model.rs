//! Conversion of config sections into core types.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use doeblin_core::decomposition::{lift_pairs, telescoping_observable, ObservableFamily, Truncation};
use doeblin_core::family::IndexedFamily;
use doeblin_core::kernel::{ProbabilityVector, StochasticKernel};
use doeblin_core::random_env::{
    BaseProcess, EnvironmentModel, GoodSetSpec, Membership, RandomKernelAssignment, RateRegime,
};
use doeblin_core::sequential::ChainSpec;

use crate::config::{
    AssignmentConfig, BaseConfig, ChainConfig, EnvironmentConfig, GoodSetConfig, MatrixSource, ObservableConfig,
    RegimeConfig, TruncationConfig,
};
use crate::error::CliError;

/// Where the config came from; relative file references resolve against
/// its directory.
#[derive(Debug, Clone)]
pub struct Context {
    pub origin: PathBuf,
    pub dir: PathBuf,
}

impl Context {
    pub fn new(origin: &Path) -> Self {
        let dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
        Self { origin: origin.to_path_buf(), dir }
    }

    pub fn invalid(&self, path: impl Into<String>, message: impl std::fmt::Display) -> CliError {
        CliError::config(&self.origin, path, message.to_string())
    }
}

fn read_rows(ctx: &Context, file: &Path, path: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let full = ctx.dir.join(file);
    let text = std::fs::read_to_string(&full).map_err(|e| CliError::io(&full, e))?;
    if full.extension().is_some_and(|e| e == "csv") {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| ctx.invalid(format!("{path} ({})", full.display()), e))?;
            let row = record
                .iter()
                .map(|v| v.parse::<f64>().map_err(|e| ctx.invalid(format!("{path} ({} row {i})", full.display()), e)))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(rows)
    } else {
        serde_json::from_str(&text).map_err(|e| ctx.invalid(format!("{path} ({})", full.display()), e))
    }
}

pub fn matrix(ctx: &Context, source: &MatrixSource, path: &str) -> Result<StochasticKernel, CliError> {
    let rows = match source {
        MatrixSource::Inline(rows) => rows.clone(),
        MatrixSource::File { file } => read_rows(ctx, file, path)?,
    };
    StochasticKernel::new(rows).map_err(|e| ctx.invalid(path, e))
}

pub fn kernels(ctx: &Context, cfg: &ChainConfig) -> Result<Vec<StochasticKernel>, CliError> {
    if cfg.kernels.is_empty() {
        return Err(ctx.invalid("chain.kernels", "at least one kernel required"));
    }
    cfg.kernels.iter().enumerate().map(|(i, k)| matrix(ctx, k, &format!("chain.kernels[{i}]"))).collect()
}

/// Indices `i` with `target(kernel i) ≠ source(kernel i+1)`, cyclically
/// for periodic chains.
pub fn dimension_breaks(kernels: &[StochasticKernel], periodic: bool) -> Vec<(usize, usize, usize)> {
    let n = kernels.len();
    let pairs = if periodic { n } else { n.saturating_sub(1) };
    (0..pairs)
        .filter_map(|i| {
            let (a, b) = (&kernels[i], &kernels[(i + 1) % n]);
            (a.target_size() != b.source_size()).then_some((i, a.target_size(), b.source_size()))
        })
        .collect()
}

pub fn chain(ctx: &Context, cfg: &ChainConfig) -> Result<ChainSpec, CliError> {
    let ks = kernels(ctx, cfg)?;
    if let Some((i, found, expected)) = dimension_breaks(&ks, cfg.periodic).first() {
        let next = (i + 1) % ks.len();
        return Err(ctx.invalid(
            format!("chain.kernels[{next}]"),
            format!("kernel {i} maps into {found} states but kernel {next} starts from {expected}"),
        ));
    }
    let law_index = cfg.law_index.unwrap_or(if cfg.periodic { 0 } else { cfg.start });
    let family = if cfg.periodic { IndexedFamily::periodic(ks.clone()) } else { IndexedFamily::window(cfg.start, ks.clone()) };
    let size = family.get(law_index).map(StochasticKernel::source_size).ok_or_else(|| {
        ctx.invalid("chain.law_index", format!("time {law_index} has no kernel"))
    })?;
    let law = match &cfg.initial_law {
        Some(v) => ProbabilityVector::new(v.clone()).map_err(|e| ctx.invalid("chain.initial_law", e))?,
        None if cfg.periodic && ks.len() == 1 => ks[0].stationary().unwrap_or_else(|_| ProbabilityVector::uniform(size)),
        None => ProbabilityVector::uniform(size),
    };
    ChainSpec::with_law_index(family, law, law_index).map_err(|e| ctx.invalid("chain", e))
}

fn family_like(ctx: &Context, chain_cfg: &ChainConfig, values: &[Vec<f64>], path: &str) -> Result<IndexedFamily<Vec<f64>>, CliError> {
    if values.is_empty() {
        return Err(ctx.invalid(path, "at least one vector required"));
    }
    if chain_cfg.periodic {
        let period = chain_cfg.kernels.len();
        if values.len() != 1 && values.len() != period {
            return Err(ctx.invalid(path, format!("expected 1 or {period} vectors, found {}", values.len())));
        }
        Ok(if values.len() == 1 { IndexedFamily::constant(values[0].clone()) } else { IndexedFamily::periodic(values.to_vec()) })
    } else {
        let needed = chain_cfg.kernels.len() + 1;
        if values.len() == 1 {
            Ok(IndexedFamily::window(chain_cfg.start, vec![values[0].clone(); needed]))
        } else if values.len() == needed || values.len() + 1 == needed {
            Ok(IndexedFamily::window(chain_cfg.start, values.to_vec()))
        } else {
            Err(ctx.invalid(path, format!("expected 1, {} or {needed} vectors, found {}", needed - 1, values.len())))
        }
    }
}

/// The chain and observable a run works with; telescoping observables
/// move to the pair chain.
pub struct Observed {
    pub chain: ChainSpec,
    pub observable: ObservableFamily,
    pub telescoping: bool,
}

pub fn observed(ctx: &Context, chain_cfg: &ChainConfig, obs: &ObservableConfig) -> Result<Observed, CliError> {
    let base = chain(ctx, chain_cfg)?;
    match obs {
        ObservableConfig::Values(v) => {
            let family = family_like(ctx, chain_cfg, v, "observable.values")?;
            check_lengths(ctx, &base, &family, "observable.values")?;
            let observable = ObservableFamily::new(family).map_err(|e| ctx.invalid("observable.values", e))?;
            Ok(Observed { chain: base, observable, telescoping: false })
        }
        ObservableConfig::Telescoping(g) => {
            let family = family_like(ctx, chain_cfg, g, "observable.telescoping")?;
            check_lengths(ctx, &base, &family, "observable.telescoping")?;
            let chain = lift_pairs(&base).map_err(|e| ctx.invalid("chain", e))?;
            let observable = telescoping_observable(&family).map_err(|e| ctx.invalid("observable.telescoping", e))?;
            Ok(Observed { chain, observable, telescoping: true })
        }
    }
}

fn check_lengths(ctx: &Context, chain: &ChainSpec, family: &IndexedFamily<Vec<f64>>, path: &str) -> Result<(), CliError> {
    let (lo, hi) = match (family.first_index(), family.end_index()) {
        (Some(a), Some(b)) => (a, b),
        _ => (0, family.period().unwrap_or(1) as i64),
    };
    for j in lo..hi {
        let Some(size) = chain.space_size(j) else { continue };
        let found = family.get(j).map_or(0, Vec::len);
        if found != size {
            return Err(ctx.invalid(format!("{path}[{}]", j - lo), format!("time {j} has {size} states, vector has {found}")));
        }
    }
    Ok(())
}

pub fn truncation(t: Option<TruncationConfig>) -> Truncation {
    match t {
        None => Truncation::default(),
        Some(TruncationConfig::Fixed(n)) => Truncation::Fixed(n),
        Some(TruncationConfig::Adaptive(tol)) => Truncation::Adaptive(tol),
    }
}

pub fn environment(ctx: &Context, cfg: &EnvironmentConfig) -> Result<EnvironmentModel, CliError> {
    let base = match &cfg.base {
        BaseConfig::Iid(p) => {
            BaseProcess::Iid { law: ProbabilityVector::new(p.clone()).map_err(|e| ctx.invalid("environment.base.iid", e))? }
        }
        BaseConfig::Markov { kernel, start } => {
            let kernel = matrix(ctx, kernel, "environment.base.markov.kernel")?;
            let start = match start {
                None => None,
                Some(label) => Some(symbol(ctx, &cfg.alphabet, label, "environment.base.markov.start")?),
            };
            BaseProcess::Markov { kernel, start }
        }
    };
    EnvironmentModel::new(cfg.alphabet.clone(), base).map_err(|e| ctx.invalid("environment", e))
}

fn symbol(ctx: &Context, alphabet: &[String], label: &str, path: &str) -> Result<usize, CliError> {
    alphabet.iter().position(|a| a == label).ok_or_else(|| ctx.invalid(path, format!("unknown symbol `{label}`")))
}

fn per_symbol<T: Clone>(ctx: &Context, alphabet: &[String], map: &BTreeMap<String, T>, path: &str) -> Result<Vec<T>, CliError> {
    if let Some(extra) = map.keys().find(|k| !alphabet.contains(k)) {
        return Err(ctx.invalid(format!("{path}.{extra}"), "symbol not in the alphabet"));
    }
    alphabet
        .iter()
        .map(|a| map.get(a).cloned().ok_or_else(|| ctx.invalid(path, format!("missing entry for symbol `{a}`"))))
        .collect()
}

pub fn assignment(ctx: &Context, alphabet: &[String], cfg: &AssignmentConfig) -> Result<RandomKernelAssignment, CliError> {
    let sources = per_symbol(ctx, alphabet, &cfg.kernels, "assignment.kernels")?;
    let kernels = sources
        .iter()
        .zip(alphabet)
        .map(|(s, a)| matrix(ctx, s, &format!("assignment.kernels.{a}")))
        .collect::<Result<Vec<_>, _>>()?;
    let observables = match &cfg.observables {
        None => None,
        Some(map) => Some(per_symbol(ctx, alphabet, map, "assignment.observables")?),
    };
    RandomKernelAssignment::new(kernels, observables).map_err(|e| ctx.invalid("assignment", e))
}

pub fn symbol_vectors(
    ctx: &Context,
    alphabet: &[String],
    map: &BTreeMap<String, Vec<f64>>,
    states: usize,
    path: &str,
) -> Result<Vec<Vec<f64>>, CliError> {
    let v = per_symbol(ctx, alphabet, map, path)?;
    if let Some((a, x)) = alphabet.iter().zip(&v).find(|(_, x)| x.len() != states) {
        return Err(ctx.invalid(format!("{path}.{a}"), format!("expected {states} values, found {}", x.len())));
    }
    Ok(v)
}

pub fn good_set(ctx: &Context, alphabet: &[String], cfg: &GoodSetConfig, a: &RandomKernelAssignment) -> Result<GoodSetSpec, CliError> {
    let membership = match &cfg.good_symbols {
        None => Membership::Certified,
        Some(labels) => {
            let mut flags = vec![false; alphabet.len()];
            for l in labels {
                flags[symbol(ctx, alphabet, l, "good_set.good_symbols")?] = true;
            }
            Membership::Symbols(flags)
        }
    };
    let spec = GoodSetSpec::new(cfg.delta, cfg.m, membership).map_err(|e| ctx.invalid("good_set", e))?;
    spec.validate(a).map_err(|e| ctx.invalid("good_set", e))?;
    Ok(spec)
}

pub fn regime(r: RegimeConfig) -> RateRegime {
    match r {
        RegimeConfig::Polynomial(b) => RateRegime::Polynomial(b),
        RegimeConfig::Stretched(k) => RateRegime::Stretched(k),
    }
}
