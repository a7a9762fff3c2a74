//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use survkit::harness::{self, cli_main, ExperimentConfig, RunReport};
use survkit::metrics::{concordance_index, kaplan_meier};
use survkit::numeric::rng_from_seed;
use survkit::riskmodel::{
    cox_loss, cox_loss_grad, fit, LinearRisk, ModelFamily, RiskModel, TrainConfig,
};
use survkit::survpredict::breslow_baseline;
use survkit::survsim::SurvivalData;

const BETA_REL_TOL: f64 = 0.15;
const BETA_MAX_SECS: f64 = 60.0;
const LOSS_ABS_TOL: f64 = 1e-10;
const LOSS_GRAD_REL_TOL: f64 = 1e-5;
const NET_GRAD_REL_TOL: f64 = 1e-4;
const INSTANCES: usize = 100;
const LL_CORR_LINEAR: f64 = 0.95;
const LL_CORR_NETWORK: f64 = 0.90;
const C_TOL_LINEAR: f64 = 0.02;
const C_TOL_NETWORK: f64 = 0.03;
const C_MIN_DATASETS: usize = 9;
const RANDOM_C_RESAMPLES: usize = 1000;
const RANDOM_C_N: usize = 500;
const RANDOM_C_TOL: f64 = 0.02;
const NELSON_AALEN_TOL: f64 = 1e-12;
const GRID_MAX: Duration = Duration::from_secs(15 * 60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn report_line(id: usize, name: &str, o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id:>2} {name}: {}", o.detail);
}

// ---------------------------------------------------------------- oracles

/// Full Breslow partial log-likelihood of `beta * x`, summed (not averaged),
/// with risk sets built by direct comparison of integer times.
fn naive_partial_loglik(beta: f64, x: &[f64], times: &[u32], events: &[bool]) -> f64 {
    let t_max = *times.iter().max().unwrap_or(&0) as usize;
    let mut at_time = vec![0.0; t_max + 2];
    for (&t, &xi) in times.iter().zip(x) {
        at_time[t as usize] += (beta * xi).exp();
    }
    let mut at_risk = vec![0.0; t_max + 2];
    for t in (0..=t_max).rev() {
        at_risk[t] = at_risk[t + 1] + at_time[t];
    }
    times
        .iter()
        .zip(events)
        .zip(x)
        .filter(|((_, &e), _)| e)
        .map(|((&t, _), &xi)| beta * xi - at_risk[t as usize].ln())
        .sum()
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Mean over events of `log Σ_{j: t_j >= t_i} exp(g_j) − g_i`, as an O(n²) double loop.
fn naive_cox_loss(g: &[f64], times: &[u32], events: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut n_events = 0;
    for i in 0..g.len() {
        if !events[i] {
            continue;
        }
        let mut denom = 0.0;
        for j in 0..g.len() {
            if times[j] >= times[i] {
                denom += (g[j] - g[i]).exp();
            }
        }
        total += denom.ln();
        n_events += 1;
    }
    total / n_events as f64
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn random_instance(rng: &mut impl Rng, n: usize) -> (Vec<f64>, Vec<u32>, Vec<bool>) {
    let g: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    // few distinct times so ties are common
    let times: Vec<u32> = (0..n).map(|_| rng.random_range(1..=8)).collect();
    let mut events: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    events[0] = true;
    (g, times, events)
}

// ---------------------------------------------------------------- criteria

fn criterion_beta_recovery() -> Outcome {
    let start = Instant::now();
    let config = ExperimentConfig {
        n_datasets: 1,
        ..ExperimentConfig::default()
    };
    let (datasets, splits) = harness::simulate_datasets(&config).expect("simulate");
    let ds = &datasets[0];
    let data = SurvivalData::from_records(&ds.records, &ds.column_names).unwrap();
    let prepared = harness::prepare_splits(&data, &splits).unwrap();
    let n_train = prepared.train.len();

    // one step per epoch over the whole training split
    let train = TrainConfig {
        learning_rate: 0.5,
        epochs: 300,
        batch_size: n_train,
        ..TrainConfig::default()
    };
    let trained = fit(
        RiskModel::Linear(LinearRisk::zeros(1)),
        &prepared.train,
        &prepared.validation,
        &train,
    )
    .expect("fit");
    let sd = trained.standardization.as_ref().unwrap()[0].sd;
    let beta_hat = match &trained.model {
        RiskModel::Linear(l) => l.beta_hat[0] / sd,
        _ => unreachable!(),
    };

    let raw = &prepared.raw_train;
    let x: Vec<f64> = raw.covariates.values().column(0).to_vec();
    let oracle = golden_section_max(
        |b| naive_partial_loglik(b, &x, &raw.times, &raw.events),
        -0.2,
        0.2,
        1e-9,
    );
    let rel = (beta_hat - oracle).abs() / oracle.abs();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: rel <= BETA_REL_TOL && secs < BETA_MAX_SECS,
        detail: format!(
            "n_train={n_train} beta_hat={beta_hat:.6} oracle={oracle:.6} rel_err={rel:.4} (tol {BETA_REL_TOL}), {secs:.1}s (limit {BETA_MAX_SECS}s)"
        ),
    }
}

fn criterion_loss_oracle() -> Outcome {
    let mut rng = rng_from_seed(2);
    let mut worst = 0.0f64;
    for k in 0..INSTANCES {
        let n = 2 + k % 49;
        let (g, times, events) = random_instance(&mut rng, n);
        let ours = cox_loss(&g, &times, &events).unwrap().value;
        worst = worst.max((ours - naive_cox_loss(&g, &times, &events)).abs());
    }
    Outcome {
        pass: worst <= LOSS_ABS_TOL,
        detail: format!(
            "{INSTANCES} instances, n<=50, max |diff|={worst:.3e} (tol {LOSS_ABS_TOL:e})"
        ),
    }
}

fn criterion_gradients() -> Outcome {
    let mut rng = rng_from_seed(3);
    let mut worst_loss = 0.0f64;
    for k in 0..INSTANCES {
        let n = 2 + k % 49;
        let (g, times, events) = random_instance(&mut rng, n);
        let analytic = cox_loss_grad(&g, &times, &events).unwrap();
        let h = 1e-5;
        let numeric: Vec<f64> = (0..n)
            .map(|i| {
                let mut up = g.clone();
                let mut down = g.clone();
                up[i] += h;
                down[i] -= h;
                (cox_loss(&up, &times, &events).unwrap().value
                    - cox_loss(&down, &times, &events).unwrap().value)
                    / (2.0 * h)
            })
            .collect();
        worst_loss = worst_loss.max(rel_error(&analytic, &numeric));
    }

    let mut worst_net = 0.0f64;
    for k in 0..INSTANCES {
        let n_inputs = 1 + k % 3;
        let n_rows = 3 + k % 7;
        let model = RiskModel::init(ModelFamily::Network, n_inputs, 1000 + k as u64).unwrap();
        let x = ndarray::Array2::from_shape_fn((n_rows, n_inputs), |_| rng.random_range(-2.0..2.0));
        let upstream: Vec<f64> = (0..n_rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        let objective = |m: &RiskModel| -> f64 {
            m.forward(x.view())
                .unwrap()
                .iter()
                .zip(&upstream)
                .map(|(g, u)| g * u)
                .sum()
        };
        let analytic = model.backward(x.view(), &upstream).unwrap();
        let params = model.params();
        let h = 1e-6;
        let mut probe = model.clone();
        let numeric: Vec<f64> = (0..params.len())
            .map(|i| {
                let mut p = params.clone();
                p[i] += h;
                probe.set_params(&p).unwrap();
                let up = objective(&probe);
                p[i] -= 2.0 * h;
                probe.set_params(&p).unwrap();
                let down = objective(&probe);
                (up - down) / (2.0 * h)
            })
            .collect();
        worst_net = worst_net.max(rel_error(&analytic, &numeric));
    }
    Outcome {
        pass: worst_loss <= LOSS_GRAD_REL_TOL && worst_net <= NET_GRAD_REL_TOL,
        detail: format!(
            "{INSTANCES}+{INSTANCES} instances, loss grad max rel err={worst_loss:.3e} (tol {LOSS_GRAD_REL_TOL:e}), \
             network backward max rel err={worst_net:.3e} (tol {NET_GRAD_REL_TOL:e})"
        ),
    }
}

fn worst_per_dataset(
    report: &RunReport,
    family: ModelFamily,
    f: impl Fn(usize, &harness::CellMetrics) -> f64,
) -> Vec<f64> {
    (1..=report.config.n_datasets)
        .map(|d| {
            report
                .cells
                .iter()
                .filter(|c| c.dataset == d && c.family == family)
                .map(|c| match &c.outcome {
                    Ok(m) => f(d, m),
                    Err(_) => f64::NEG_INFINITY,
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.4}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn criterion_loglik_correlation(report: &RunReport) -> Outcome {
    let lin = worst_per_dataset(report, ModelFamily::Linear, |_, m| m.ll_correlation);
    let net = worst_per_dataset(report, ModelFamily::Network, |_, m| m.ll_correlation);
    Outcome {
        pass: lin.iter().all(|&r| r >= LL_CORR_LINEAR) && net.iter().all(|&r| r >= LL_CORR_NETWORK),
        detail: format!(
            "min Pearson per dataset over replicates: linear [{}] (>= {LL_CORR_LINEAR}), network [{}] (>= {LL_CORR_NETWORK})",
            fmt_list(&lin),
            fmt_list(&net)
        ),
    }
}

fn criterion_discrimination(report: &RunReport) -> Outcome {
    let gap = |family| {
        worst_per_dataset(report, family, |d, m| {
            -(m.metrics.c_index - report.datasets[d - 1].oracle_c_index).abs()
        })
        .into_iter()
        .map(|x| -x)
        .collect::<Vec<f64>>()
    };
    let lin = gap(ModelFamily::Linear);
    let net = gap(ModelFamily::Network);
    let lin_ok = lin.iter().filter(|&&g| g <= C_TOL_LINEAR).count();
    let net_ok = net.iter().filter(|&&g| g <= C_TOL_NETWORK).count();
    Outcome {
        pass: lin_ok >= C_MIN_DATASETS && net_ok >= C_MIN_DATASETS,
        detail: format!(
            "max |C - C_oracle| per dataset: linear [{}] {lin_ok}/10 within {C_TOL_LINEAR}; network [{}] {net_ok}/10 within {C_TOL_NETWORK} (need {C_MIN_DATASETS})",
            fmt_list(&lin),
            fmt_list(&net)
        ),
    }
}

fn criterion_ibs_dominance(report: &RunReport) -> Outcome {
    let mut ok = 0;
    let mut margins = Vec::new();
    for d in &report.datasets {
        let worst = report
            .cells
            .iter()
            .filter(|c| c.dataset == d.index)
            .map(|c| {
                c.outcome
                    .as_ref()
                    .map(|m| m.metrics.ibs)
                    .unwrap_or(f64::INFINITY)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        margins.push(d.km_ibs - worst);
        if worst <= d.km_ibs {
            ok += 1;
        }
    }
    Outcome {
        pass: ok == report.datasets.len() && ok == report.config.n_datasets,
        detail: format!(
            "{ok}/{} datasets with every model IBS <= KM IBS; margins KM - worst model [{}]",
            report.datasets.len(),
            margins
                .iter()
                .map(|x| format!("{x:.5}"))
                .collect::<Vec<_>>()
                .join(",")
        ),
    }
}

fn criterion_censoring(report: &RunReport) -> Outcome {
    let frac = report.config.censor_fraction;
    let mut exact = true;
    let mut overall = Vec::new();
    for d in &report.datasets {
        let n = d.n_subjects;
        let expected = (frac * n as f64).round() as usize;
        exact &= d.flagged_censored == expected && d.flagged_fraction == expected as f64 / n as f64;
        overall.push(d.overall_censored_fraction);
    }
    let n = report.config.n_subjects;
    Outcome {
        pass: exact && !report.datasets.is_empty(),
        detail: format!(
            "flagged = round({frac}*{n}) = {} on every dataset: {exact}; overall censoring (flagged + administrative) [{}]",
            (frac * n as f64).round(),
            fmt_list(&overall)
        ),
    }
}

fn criterion_metric_sanity() -> Outcome {
    let mut rng = rng_from_seed(8);
    let times: Vec<u32> = (0..RANDOM_C_N).map(|_| rng.random_range(1..=100)).collect();
    let events: Vec<bool> = (0..RANDOM_C_N).map(|_| rng.random_bool(0.8)).collect();
    let mean_c = (0..RANDOM_C_RESAMPLES)
        .map(|_| {
            let scores: Vec<f64> = (0..RANDOM_C_N).map(|_| rng.random::<f64>()).collect();
            concordance_index(&times, &events, &scores).unwrap()
        })
        .sum::<f64>()
        / RANDOM_C_RESAMPLES as f64;
    let random_ok = (mean_c - 0.5).abs() <= RANDOM_C_TOL;

    // Nelson–Aalen: Σ_{s <= t} d(s) / Y(s)
    let zeros = vec![0.0; RANDOM_C_N];
    let breslow = breslow_baseline(&times, &events, &zeros).unwrap();
    let mut na_diff = 0.0f64;
    let mut cum = 0.0;
    for t in 1..=100u32 {
        let at_risk = times.iter().filter(|&&s| s >= t).count() as f64;
        let deaths = times
            .iter()
            .zip(&events)
            .filter(|(&s, &e)| s == t && e)
            .count() as f64;
        if deaths > 0.0 {
            cum += deaths / at_risk;
        }
        na_diff = na_diff.max((breslow.at(t as f64) - cum).abs());
    }
    let na_ok = na_diff <= NELSON_AALEN_TOL;

    let all_events = vec![true; RANDOM_C_N];
    let km = kaplan_meier(&times, &all_events);
    let km_exact = (0..=101u32).all(|t| {
        let surviving = times.iter().filter(|&&s| s > t).count() as f64 / RANDOM_C_N as f64;
        km.at(t as f64) == surviving
    });

    Outcome {
        pass: random_ok && na_ok && km_exact,
        detail: format!(
            "random C mean={mean_c:.4} over {RANDOM_C_RESAMPLES} x n={RANDOM_C_N} (0.50 +/- {RANDOM_C_TOL}); \
             Breslow(g=0) vs Nelson-Aalen max diff={na_diff:.2e} (tol {NELSON_AALEN_TOL:e}); KM == empirical: {km_exact}"
        ),
    }
}

fn run_report_cli(dir: &Path) -> i32 {
    let args = [
        "survkit", "report", "--config", "defaults", "--seed", "0", "--out",
    ];
    let mut argv: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    argv.push(dir.display().to_string());
    cli_main(argv)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

/// The same `report` command run twice into the same directory.
fn criterion_reproducibility() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    let first_code = run_report_cli(&out);
    let first = snapshot(&out);
    let second_code = run_report_cli(&out);
    let second = snapshot(&out);
    if (first_code, second_code) != (0, 0) {
        return Outcome {
            pass: false,
            detail: format!("report exit codes ({first_code}, {second_code})"),
        };
    }
    let names_match = first.iter().map(|f| &f.0).eq(second.iter().map(|f| &f.0));
    let differing: Vec<&String> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a.1 != b.1)
        .map(|(a, _)| &a.0)
        .collect();
    Outcome {
        pass: names_match && differing.is_empty() && !first.is_empty(),
        detail: format!(
            "{} files compared byte for byte, differing: {differing:?}",
            first.len()
        ),
    }
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id, name, o: Outcome| {
        report_line(id, name, &o);
        results.push((id, name, o));
    };

    record(1, "beta recovery", criterion_beta_recovery());
    record(2, "loss oracle equivalence", criterion_loss_oracle());
    record(3, "gradient checks", criterion_gradients());

    let config = ExperimentConfig::default();
    let start = Instant::now();
    let report = harness::run_experiment(&config).expect("default grid");
    let elapsed = start.elapsed();
    let n_failed = report.cells.iter().filter(|c| c.outcome.is_err()).count();
    assert_eq!(report.datasets.len(), 10);
    assert!(report.cells.len() == 60 && report.config.families.len() == 2);

    record(
        4,
        "true vs predicted partial log-likelihood",
        criterion_loglik_correlation(&report),
    );
    record(
        5,
        "discrimination consistency",
        criterion_discrimination(&report),
    );
    record(
        6,
        "IBS dominance over Kaplan-Meier",
        criterion_ibs_dominance(&report),
    );
    record(7, "censoring contract", criterion_censoring(&report));
    record(8, "metric sanity", criterion_metric_sanity());
    record(9, "reproducibility", criterion_reproducibility());
    record(
        10,
        "scale",
        Outcome {
            pass: elapsed < GRID_MAX && n_failed == 0,
            detail: format!(
                "default grid of {} cells ({n_failed} failed) in {:.1}s on {} thread(s) (limit {}s)",
                report.cells.len(),
                elapsed.as_secs_f64(),
                rayon::current_num_threads(),
                GRID_MAX.as_secs()
            ),
        },
    );

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(", failed: {failed:?}")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
