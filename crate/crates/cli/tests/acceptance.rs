//! Acceptance suite. Each test checks one criterion at its stated
//! tolerance and writes a single `criterion N: PASS|FAIL` line to stdout.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use doeblin_core::decomposition::{
    decompose, exact_variance, lift_pairs, telescoping_observable, ObservableFamily, Truncation,
};
use doeblin_core::family::IndexedFamily;
use doeblin_core::kernel::{doeblin_extract, tv_distance, ProbabilityVector, StochasticKernel};
use doeblin_core::montecarlo::{
    extrapolate_limit, fit_rate, gaussian_surrogate, kolmogorov_distance, lq_distance, mdp_probe, noise_floor, simulate,
    simulate_sums, wasserstein, EmpiricalCdf, SimulationPlan,
};
use doeblin_core::parallel::{with_threads, Execution};
use doeblin_core::random_env::{
    equivariant_measure, forward_contraction, mixing_tail, quenched_clt_check, run_ensemble, skew_correlation,
    Environment, EnsembleConfig, EnvironmentModel, GoodSetSpec, Membership, QuenchedReport, RandomKernelAssignment,
    RateRegime,
};
use doeblin_core::sequential::{limit_measure, one_step_ledger, sup_tv_to, window_kernel, ChainSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, pass: bool, detail: String) {
    let line = format!("criterion {criterion}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn reference_kernel() -> StochasticKernel {
    StochasticKernel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
}

fn reference_chain() -> ChainSpec {
    ChainSpec::constant(reference_kernel(), ProbabilityVector::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap()).unwrap()
}

fn random_kernel(rng: &mut ChaCha8Rng, size: usize, zero_prob: f64) -> StochasticKernel {
    let rows = (0..size)
        .map(|_| {
            let mut row: Vec<f64> = (0..size).map(|_| if rng.random::<f64>() < zero_prob { 0.0 } else { rng.random() }).collect();
            if row.iter().sum::<f64>() == 0.0 {
                row[rng.random_range(0..size)] = 1.0;
            }
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    StochasticKernel::new(rows).unwrap()
}

fn random_periodic_chain(rng: &mut ChaCha8Rng, size: usize, period: usize) -> ChainSpec {
    let kernels = (0..period).map(|_| random_kernel(rng, size, 0.0)).collect();
    ChainSpec::new(IndexedFamily::periodic(kernels), ProbabilityVector::uniform(size)).unwrap()
}

/// Largest feasible `γ` over minorizers on a simplex grid: for each `m`
/// the feasible set is `γ·m_y ≤ P(x, y)` for all `x, y`.
fn grid_gamma(k: &StochasticKernel, steps: usize) -> f64 {
    let mut best = 0.0f64;
    for a in 0..=steps {
        for b in 0..=steps - a {
            let m = [a as f64 / steps as f64, b as f64 / steps as f64, (steps - a - b) as f64 / steps as f64];
            let mut gamma = 1.0f64;
            for row in k.row_iter() {
                for (p, my) in row.iter().zip(&m) {
                    if *my > 0.0 {
                        gamma = gamma.min(p / my);
                    }
                }
            }
            best = best.max(gamma);
        }
    }
    best
}

#[test]
fn criterion_01_certificate_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_reconstruction = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    for i in 0..500 {
        let k = random_kernel(&mut rng, 3, if i % 2 == 0 { 0.25 } else { 0.0 });
        let c = doeblin_extract(&k, 1);
        let r = c.reconstruct();
        for (a, b) in r.row_iter().flatten().zip(k.row_iter().flatten()) {
            worst_reconstruction = worst_reconstruction.max((a - b).abs());
        }
        worst_excess = worst_excess.max(grid_gamma(&k, 200) - c.gamma);
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        1,
        worst_reconstruction <= 1e-12 && worst_excess <= 1e-9 && elapsed < 5.0,
        format!("500 kernels, max reconstruction error {worst_reconstruction:.2e}, max oracle excess {worst_excess:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_02_contraction_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let size = rng.random_range(2..=5);
        let kernels: Vec<StochasticKernel> = (0..50).map(|_| random_kernel(&mut rng, size, 0.2)).collect();
        let chain = ChainSpec::new(IndexedFamily::periodic(kernels), ProbabilityVector::uniform(size)).unwrap();
        let target = rng.random_range(0..50);
        let mu = limit_measure(&chain, target, 1e-15).unwrap();
        let mut bound = 1.0;
        for n in 1..=50usize {
            let k = target - n as i64;
            bound *= 1.0 - doeblin_extract(chain.kernel(k).unwrap(), 1).gamma;
            let tv = sup_tv_to(&window_kernel(&chain, k, n).unwrap(), mu.measure.as_slice());
            worst = worst.max(tv - bound - mu.certified_error);
        }
    }
    let chain = reference_chain();
    let w = window_kernel(&chain, -5, 5).unwrap();
    let row0 = tv_distance(&ProbabilityVector::new(w.row(0).to_vec()).unwrap(), &ProbabilityVector::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap()).unwrap();
    let sup = sup_tv_to(&w, &[2.0 / 3.0, 1.0 / 3.0]);
    let bound = one_step_ledger(&chain, 0, 5).unwrap().bound;
    let exact = 0.7f64.powi(5) / 3.0;
    report(
        2,
        worst <= 1e-12 && (row0 - exact).abs() <= 1e-10 && (bound - 0.16807).abs() <= 1e-12 && sup <= bound,
        format!(
            "200 chains, max(tv - bound) {worst:.2e}; reference n=5: row-0 TV {row0:.6} (0.7^5/3 = {exact:.6}), sup TV {sup:.6}, bound {bound:.5}"
        ),
    );
}

#[test]
fn criterion_03_coboundary_identity() {
    let chain = reference_chain();
    let d = decompose(&chain, &ObservableFamily::indicator(2, 0), 1, 30, Truncation::default()).unwrap();
    let h = d.h(10).unwrap();
    let h_err = (h[0] - 7.0 / 9.0).abs().max((h[1] + 14.0 / 9.0).abs());
    let mut worst_identity = d.identity_residual(&chain).unwrap();
    let mut worst_martingale = d.martingale_residual(&chain).unwrap();
    let mut ok = worst_identity <= 2.0 * d.truncation_tail.max(0.0) + 1e-15 && worst_martingale <= 2e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..100 {
        let size = rng.random_range(2..=5);
        let period = rng.random_range(1..=5);
        let c = random_periodic_chain(&mut rng, size, period);
        let f = ObservableFamily::new(IndexedFamily::periodic(
            (0..period).map(|_| (0..size).map(|_| rng.random_range(-3.0..3.0)).collect()).collect(),
        ))
        .unwrap();
        let d = decompose(&c, &f, 1, 25, Truncation::default()).unwrap();
        let (ir, mr) = (d.identity_residual(&c).unwrap(), d.martingale_residual(&c).unwrap());
        worst_identity = worst_identity.max(ir);
        worst_martingale = worst_martingale.max(mr);
        ok &= ir <= 2.0 * d.truncation_tail + 1e-13 && ir <= 2e-10 && mr <= 2e-10;
    }
    report(
        3,
        ok && h_err <= 1e-8,
        format!("h error {h_err:.2e}; max pathwise residual {worst_identity:.2e}, max martingale conditional mean {worst_martingale:.2e}"),
    );
}

#[test]
fn criterion_04_variance() {
    let p = exact_variance(&reference_chain(), &ObservableFamily::indicator(2, 0), 10_000).unwrap();
    let slope = p.asymptotic_slope.unwrap();
    let slope_err = (slope - 34.0 / 27.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_ratio = 0.0f64;
    for _ in 0..20 {
        let size = rng.random_range(2..=4);
        let period = rng.random_range(1..=4);
        let c = random_periodic_chain(&mut rng, size, period);
        let g = IndexedFamily::periodic((0..period).map(|_| (0..size).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>()).collect());
        let sup = g.items().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let lifted = lift_pairs(&c).unwrap();
        let f = telescoping_observable(&g).unwrap();
        let v = exact_variance(&lifted, &f, 2000).unwrap();
        worst_ratio = worst_ratio.max(v.sigma_sq.iter().fold(0.0f64, |m, s| m.max(*s)) / (4.0 * sup * sup));
    }
    report(
        4,
        slope_err <= 1e-4 && worst_ratio <= 1.0 + 1e-12,
        format!("slope {slope:.10} (34/27 error {slope_err:.2e}); telescoping max sigma_n^2/(4 sup g^2) = {worst_ratio:.4}"),
    );
}

const HORIZONS: [usize; 7] = [64, 128, 256, 512, 1024, 2048, 4096];
const PATHS: usize = 1_000_000;

fn reference_run() -> &'static Vec<EmpiricalCdf> {
    static RUN: OnceLock<Vec<EmpiricalCdf>> = OnceLock::new();
    RUN.get_or_init(|| {
        let plan = SimulationPlan {
            chain: reference_chain(),
            observable: ObservableFamily::indicator(2, 0),
            horizons: HORIZONS.to_vec(),
            paths: PATHS,
            seed: 5,
        };
        simulate(&plan, Execution::Parallel).unwrap()
    })
}

fn slope_of(cdfs: &[EmpiricalCdf], metric: impl Fn(&EmpiricalCdf) -> f64) -> (f64, usize, Vec<f64>) {
    let values: Vec<f64> = cdfs.iter().map(&metric).collect();
    let pairs: Vec<(f64, f64)> = cdfs.iter().zip(&values).map(|(c, d)| (c.sigma_n, *d)).collect();
    match fit_rate(&pairs, noise_floor(PATHS)) {
        Ok(r) => (r.fitted_slope, r.included.iter().filter(|k| **k).count(), values),
        Err(_) => (f64::NAN, 0, values),
    }
}

#[test]
fn criterion_05_berry_esseen_rate() {
    let start = Instant::now();
    let cdfs = reference_run();
    let (slope, used, d) = slope_of(cdfs, kolmogorov_distance);
    report(
        5,
        (-1.3..=-0.7).contains(&slope),
        format!(
            "Kolmogorov vs sigma_n slope {slope:.3} over {used} horizons, d(64) {:.4}, d(4096) {:.5}, {:.0}s",
            d[0],
            d[6],
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_06_wasserstein_rate() {
    let cdfs = reference_run();
    let (s1, _, w1) = slope_of(cdfs, |c| wasserstein(c, 1.0));
    let (s2, _, _) = slope_of(cdfs, |c| wasserstein(c, 2.0));
    let gap = cdfs.iter().zip(&w1).map(|(c, w)| (w - lq_distance(c, 1.0)).abs()).fold(0.0f64, f64::max);
    report(
        6,
        (-1.3..=-0.7).contains(&s1) && (-1.3..=-0.7).contains(&s2) && gap <= 1e-6,
        format!("W1 slope {s1:.3}, W2 slope {s2:.3}, max |W1 - L1| {gap:.2e}"),
    );
}

fn assignment() -> RandomKernelAssignment {
    RandomKernelAssignment::new(vec![reference_kernel(), StochasticKernel::identity(2)], Some(vec![vec![1.0, 0.0], vec![1.0, 0.0]])).unwrap()
}

fn good_set() -> GoodSetSpec {
    GoodSetSpec::new(0.3, 1, Membership::Symbols(vec![true, false])).unwrap()
}

fn model() -> EnvironmentModel {
    EnvironmentModel::iid(vec!["g".into(), "b".into()], vec![0.5, 0.5]).unwrap()
}

const ENSEMBLE: EnsembleConfig = EnsembleConfig { size: 10_000, horizon: 256, past: 1024, seed: 77, tolerance: 1e-13 };

fn ensemble_environments() -> &'static Vec<Environment> {
    static ENVS: OnceLock<Vec<Environment>> = OnceLock::new();
    ENVS.get_or_init(|| (0..ENSEMBLE.size as u64).map(|i| model().sample(ENSEMBLE.horizon + 1, ENSEMBLE.past, ENSEMBLE.seed, i)).collect())
}

fn ensemble_reports() -> &'static Vec<QuenchedReport> {
    static REPORTS: OnceLock<Vec<QuenchedReport>> = OnceLock::new();
    REPORTS.get_or_init(|| run_ensemble(&model(), &assignment(), &good_set(), &ENSEMBLE, Execution::Parallel).unwrap())
}

#[test]
fn criterion_07_quenched_soundness() {
    let (a, good) = (assignment(), good_set());
    let target = ProbabilityVector::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
    let mut worst_gap = f64::NEG_INFINITY;
    let mut measure_ok = true;
    let mut equivariance_ok = true;
    let mut worst_measure = 0.0f64;
    for (env, r) in ensemble_environments().iter().zip(ensemble_reports()) {
        assert_eq!(env.id, r.omega_id);
        worst_gap = worst_gap.max(r.soundness_gap());
        let off = tv_distance(&r.measure, &target).unwrap();
        worst_measure = worst_measure.max(off);
        measure_ok &= r.measure_certified && off <= r.measure_error + 1e-15;
        let m1 = equivariant_measure(env, &a, &good, 1, ENSEMBLE.tolerance).unwrap();
        let pushed = ProbabilityVector::new(a.kernel(env.get(0).unwrap()).push_forward(r.measure.as_slice())).unwrap();
        equivariance_ok &= tv_distance(&pushed, &m1.measure).unwrap() <= r.measure_error + m1.certified_error + 1e-15;
    }
    report(
        7,
        worst_gap <= 1e-12 && measure_ok && equivariance_ok,
        format!(
            "{} environments, n <= 256: max(tv - 0.7^hits) {worst_gap:.2e}, max TV(mu_omega, (2/3,1/3)) {worst_measure:.2e}, equivariance ok {equivariance_ok}",
            ensemble_reports().len()
        ),
    );
}

#[test]
fn criterion_08_mixing_time_tail() {
    let rows = mixing_tail(ensemble_reports(), 0.05, 4.0, RateRegime::Stretched(0.5));
    let violations = rows.iter().filter(|r| r.empirical > r.bound).count();
    let tightest = rows.iter().filter(|r| r.empirical > 0.0).map(|r| r.empirical / r.bound).fold(0.0f64, f64::max);
    let last_positive = rows.iter().rev().find(|r| r.empirical > 0.0).map_or(0, |r| r.n);
    report(
        8,
        violations == 0 && !rows.is_empty(),
        format!(
            "eps 0.05, p 4, a_n = exp(-sqrt n): {violations} violations over N = 1..{}, max empirical/bound {tightest:.3e}, tail empty beyond N = {last_positive}",
            rows.len()
        ),
    );
}

#[test]
fn criterion_09_skew_product_decay() {
    let ind = vec![vec![1.0, 0.0]; 2];
    let r = skew_correlation(ensemble_environments(), &assignment(), &good_set(), &ind, &ind, 64, 1e-13, Execution::Parallel).unwrap();
    let rate = r.decay_rate.unwrap_or(f64::NAN);
    let required = 0.9 * (1.0 - 0.5 * 0.3f64).ln().abs();
    let audited = (0..=64).all(|n| (r.correlation[n] - r.environment_covariance[n]).abs() <= r.audited_bound[n] + 1e-12);
    report(
        9,
        rate >= required && r.correlation[64].abs() < 1e-3 && audited,
        format!("decay rate {rate:.4} (required >= {required:.4}), |c(64)| {:.2e}, audited bounds hold {audited}", r.correlation[64].abs()),
    );
}

fn cli_bytes(kind: &str, config: &Path, out: &Path, threads: &str) -> Vec<(String, Vec<u8>)> {
    let status = Command::new(env!("CARGO_BIN_EXE_doeblin"))
        .args([kind, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads])
        .status()
        .unwrap();
    assert!(status.success());
    let mut files: Vec<_> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_determinism() {
    let plan = SimulationPlan {
        chain: reference_chain(),
        observable: ObservableFamily::indicator(2, 0),
        horizons: vec![10, 100, 1000],
        paths: 50_000,
        seed: 10,
    };
    let base = simulate_sums(&plan, Execution::Sequential).unwrap();
    let threads_ok = [1usize, 2, 4, 7].iter().all(|t| with_threads(*t, || simulate_sums(&plan, Execution::Parallel).unwrap()) == base);
    let small = EnsembleConfig { size: 300, ..ENSEMBLE };
    let e1 = with_threads(1, || run_ensemble(&model(), &assignment(), &good_set(), &small, Execution::Parallel).unwrap());
    let e3 = with_threads(3, || run_ensemble(&model(), &assignment(), &good_set(), &small, Execution::Parallel).unwrap());
    let ensemble_ok = e1 == e3 && e1 == run_ensemble(&model(), &assignment(), &good_set(), &small, Execution::Sequential).unwrap();

    let dir = tempfile::TempDir::new().unwrap();
    let env = r#""environment": {"alphabet": ["g", "b"], "base": {"iid": [0.5, 0.5]}},
        "assignment": {"kernels": {"g": [[0.9, 0.1], [0.2, 0.8]], "b": [[1, 0], [0, 1]]}},
        "good_set": {"delta": 0.3, "good_symbols": ["g"]}, "ensemble": {"size": 50, "horizon": 64, "past": 256}, "seed": 4"#;
    let configs = [
        ("analyze-kernel", r#"{"kind": "analyze-kernel", "kernel": [[0.9, 0.1], [0.2, 0.8]]}"#.to_string()),
        ("ledger", r#"{"kind": "ledger", "chain": {"kernels": [[[0.9, 0.1], [0.2, 0.8]]]}, "target": 0, "max_length": 20}"#.to_string()),
        (
            "decompose",
            r#"{"kind": "decompose", "chain": {"kernels": [[[0.9, 0.1], [0.2, 0.8]]]}, "observable": {"values": [[1, 0]]}, "first": 1, "last": 5, "variance_horizon": 100}"#
                .to_string(),
        ),
        (
            "clt-rate",
            r#"{"kind": "clt-rate", "chain": {"kernels": [[[0.9, 0.1], [0.2, 0.8]]]}, "observable": {"values": [[1, 0]]}, "horizons": [16, 64, 256], "paths": 20000, "seed": 3, "mdp": {"rho": 0.25, "lower": 1.0}}"#
                .to_string(),
        ),
        ("random-env", format!(r#"{{"kind": "random-env", {env}, "regime": {{"stretched": 0.5}}}}"#)),
        ("mixing-times", format!(r#"{{"kind": "mixing-times", {env}, "regime": {{"stretched": 0.5}}, "epsilons": [0.05]}}"#)),
        ("skew-corr", format!(r#"{{"kind": "skew-corr", {env}, "f": {{"g": [1, 0], "b": [1, 0]}}, "g": {{"g": [1, 0], "b": [1, 0]}}, "max_lag": 16}}"#)),
    ];
    let mut cli_ok = true;
    for (kind, text) in &configs {
        let cfg = dir.path().join(format!("{kind}.json"));
        std::fs::write(&cfg, text).unwrap();
        let a = cli_bytes(kind, &cfg, &dir.path().join(format!("{kind}-1")), "1");
        let b = cli_bytes(kind, &cfg, &dir.path().join(format!("{kind}-2")), "4");
        cli_ok &= a == b;
    }
    report(
        10,
        threads_ok && ensemble_ok && cli_ok,
        format!("path sums identical for 1/2/4/7 threads and sequential: {threads_ok}; ensembles: {ensemble_ok}; 7 CLI configs byte-identical on re-run: {cli_ok}"),
    );
}

#[test]
fn criterion_11_substituted_clt_and_mdp() {
    let start = Instant::now();
    let (a, good) = (assignment(), good_set());
    let mut slopes = Vec::new();
    for id in 0..3u64 {
        let env = model().sample(4097, 1024, 1100, id);
        let law = equivariant_measure(&env, &a, &good, 0, 1e-13).unwrap().measure;
        let r = quenched_clt_check(&env, &a, law, &HORIZONS, PATHS, 1100 + id, Execution::Parallel).unwrap();
        slopes.push(r.exact_fit.fitted_slope);
    }
    let mut sorted = slopes.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[1];

    let horizons = [1usize, 4, 16, 36, 81, 150, 256];
    let cdfs = gaussian_surrogate(&horizons, PATHS, 1111, Execution::Parallel);
    let rows = mdp_probe(&cdfs, 0.25, (1.0, f64::INFINITY));
    let values: Vec<f64> = rows.iter().filter_map(|r| r.value).collect();
    let monotone = values.len() == rows.len() && values.windows(2).all(|w| w[1] > w[0]);
    let ex = extrapolate_limit(&rows);
    let within = ex.as_ref().is_some_and(|e| (e.intercept + 0.5).abs() <= 3.0 * e.stderr);
    report(
        11,
        median <= -0.35 && monotone && within,
        format!(
            "quenched Kolmogorov slopes in n {:?} (median {median:.3}); MDP values {:?} trend up {monotone}, extrapolated limit {} (target -0.5), {:.0}s",
            slopes.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            values.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            ex.map_or("n/a".to_string(), |e| format!("{:.4} +/- {:.4}", e.intercept, e.stderr)),
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn all_good_environment_matches_homogeneous_chain() {
    let env = Environment::new(-300, vec![0; 600]);
    let r = forward_contraction(&env, &assignment(), &good_set(), 50, 1e-14).unwrap();
    for n in 0..=50 {
        assert!((r.tv_actual[n] - 2.0 / 3.0 * 0.7f64.powi(n as i32)).abs() <= 1e-13);
    }
}
