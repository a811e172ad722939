//! Acceptance criteria 1-10, one PASS/FAIL line each. Exits non-zero when
//! any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gmc_core::synthbench::{run_suite, ExperimentConfig, SuiteKind};
use gmc_repro::{benchmark_config, median_reach as reach, ok_arm as arm};
use gmc_core::verify;

const SEED: u64 = 0;

const IDENTITY_TOL: f64 = 1e-10;
const IDENTITY_INSTANCES: usize = 100;
const IDENTITY_BUDGET: Duration = Duration::from_secs(5);

const GRADIENT_TOL: f64 = 1e-6;
const GRADIENT_INSTANCES: usize = 100;
const GRADIENT_BUDGET: Duration = Duration::from_secs(30);

const RANK_TRIALS: usize = 1000;
const RANK_LEN: usize = 32;
const RANK_SUM_TOL: f64 = 1e-10;
const RANK_SYMMETRY_TOL: f64 = 1e-12;
const RANK_BUDGET: Duration = Duration::from_secs(10);

const QUEUE_SEQUENCES: usize = 10_000;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const LOSS_COMPARE_BUDGET: Duration = Duration::from_secs(300);
const LR_GRID: [f64; 3] = [1e-2, 1e-3, 1e-4];

const MAL_COUNTS: [usize; 3] = [3, 4, 5];
const MAL_TRIALS: usize = 1000;
const MAL_MIN_DIM: usize = 1000;
const MAL_COS_LIMIT: f64 = 0.1;
const MAL_PASS_FRACTION: f64 = 0.99;

const MONET_GRADIENT_TOL: f64 = 1e-6;
const SOFTMAX_TOL: f64 = 1e-12;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn identity() -> Outcome {
    let (r, t) = timed(|| verify::identity_residual(IDENTITY_INSTANCES, SEED));
    match r {
        Ok(res) => outcome(
            res < IDENTITY_TOL && t < IDENTITY_BUDGET,
            format!("max residual {res:.2e} < {IDENTITY_TOL:e} over {IDENTITY_INSTANCES} instances, n in {{2, 8, 64, 256}}, {:.2}s", t.as_secs_f64()),
        ),
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn gradients() -> Outcome {
    let (r, t) = timed(|| verify::loss_gradient_errors(GRADIENT_INSTANCES, SEED));
    match r {
        Ok(errs) => outcome(
            errs.iter().all(|e| *e < GRADIENT_TOL) && t < GRADIENT_BUDGET,
            format!(
                "max relative error mse {:.2e}, pgcc {:.2e}, sgcc {:.2e}, gmc with queue {:.2e} (< {GRADIENT_TOL:e}), {GRADIENT_INSTANCES} inputs, {:.2}s",
                errs[0], errs[1], errs[2], errs[3], t.as_secs_f64()
            ),
        ),
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn ranks() -> Outcome {
    let (r, t) = timed(|| verify::rank_properties(RANK_TRIALS, RANK_LEN, SEED));
    match r {
        Ok(s) => outcome(
            s.order_mismatches == 0
                && s.max_sum_error < RANK_SUM_TOL
                && s.max_negation_error < RANK_SYMMETRY_TOL
                && s.max_affine_error < RANK_SYMMETRY_TOL
                && t < RANK_BUDGET,
            format!(
                "{} order mismatches in {RANK_TRIALS} vectors (n={RANK_LEN}), sum error {:.2e}, negation {:.2e}, affine {:.2e}, {:.2}s",
                s.order_mismatches, s.max_sum_error, s.max_negation_error, s.max_affine_error, t.as_secs_f64()
            ),
        ),
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn queue() -> Outcome {
    let bad = verify::queue_model_mismatches(QUEUE_SEQUENCES, SEED);
    outcome(bad == 0, format!("{bad} of {QUEUE_SEQUENCES} push sequences differ from the list model"))
}

fn loss_compare(base: &ExperimentConfig) -> Outcome {
    let (r, t) = timed(|| run_suite(SuiteKind::LossCompare, base, &SEEDS));
    let r = match r {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let (Some(mse), Some(gmc)) = (arm(&r, "mse"), arm(&r, "gmc")) else {
        return outcome(false, "an arm failed".into());
    };
    let srocc_ok = gmc.median_test_srocc >= mse.median_test_srocc;
    let reach_ok = reach(gmc) <= reach(mse);
    outcome(
        srocc_ok && reach_ok && t < LOSS_COMPARE_BUDGET,
        format!(
            "median test SROCC gmc {:.4} vs mse {:.4} ({}); median epochs to SROCC {} gmc {} vs mse {} ({}); {:.0}s",
            gmc.median_test_srocc,
            mse.median_test_srocc,
            if srocc_ok { "ok" } else { "lower" },
            base.train.srocc_target,
            reach(gmc),
            reach(mse),
            if reach_ok { "ok" } else { "slower" },
            t.as_secs_f64()
        ),
    )
}

fn lr_robustness(base: &ExperimentConfig) -> Outcome {
    let cfg = ExperimentConfig {
        lr_grid: LR_GRID.to_vec(),
        ..base.clone()
    };
    let r = match run_suite(SuiteKind::LrSweep, &cfg, &SEEDS) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let mut grid = Vec::new();
    for lr in LR_GRID {
        let (Some(mse), Some(gmc)) = (arm(&r, &format!("lr={lr:e}/mse")), arm(&r, &format!("lr={lr:e}/gmc"))) else {
            return outcome(false, format!("an arm at lr={lr:e} failed"));
        };
        grid.push((lr, mse.median_test_srocc, gmc.median_test_srocc));
    }
    let worst = grid
        .iter()
        .min_by(|a, b| (a.1 + a.2).total_cmp(&(b.1 + b.2)))
        .copied()
        .expect("non-empty grid");
    let cells: Vec<String> = grid
        .iter()
        .map(|(lr, m, g)| format!("lr={lr:e}: mse {m:.4} gmc {g:.4}"))
        .collect();
    outcome(
        worst.2 >= worst.1,
        format!("worst lr {:e}: gmc {:.4} vs mse {:.4}; grid [{}]", worst.0, worst.2, worst.1, cells.join("; ")),
    )
}

fn ablation(base: &ExperimentConfig) -> Outcome {
    let r = match run_suite(SuiteKind::Ablation, base, &SEEDS) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let Some(full) = arm(&r, "full") else {
        return outcome(false, "full arm failed".into());
    };
    let mut passed = true;
    let mut cells = vec![format!("full {:.4}", full.median_test_srocc)];
    for name in ["w/o PGCC", "w/o SGCC", "w/o GCC", "w/o queue"] {
        match arm(&r, name) {
            Some(a) => {
                let ok = full.median_test_srocc >= a.median_test_srocc;
                passed &= ok;
                cells.push(format!("{name} {:.4}{}", a.median_test_srocc, if ok { "" } else { " (higher)" }));
            }
            None => {
                passed = false;
                cells.push(format!("{name} failed"));
            }
        }
    }
    outcome(passed, format!("median test SROCC: {}", cells.join(", ")))
}

fn mal_diversity() -> Outcome {
    match verify::mal_diversity(&MAL_COUNTS, MAL_TRIALS, SEED) {
        Ok(stats) => {
            let passed = stats
                .iter()
                .all(|s| s.weight_dim >= MAL_MIN_DIM && s.pass_fraction >= MAL_PASS_FRACTION && s.max_abs_cos.is_finite());
            let cells: Vec<String> = MAL_COUNTS
                .iter()
                .zip(&stats)
                .map(|(m, s)| format!("M={m}: {:.1}% below {MAL_COS_LIMIT}, max |cos| {:.3}", 100.0 * s.pass_fraction, s.max_abs_cos))
                .collect();
            outcome(
                passed,
                format!("weight dim {}, {} initializations; {}", stats[0].weight_dim, MAL_TRIALS, cells.join("; ")),
            )
        }
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn monet() -> Outcome {
    match verify::monet_integrity(SEED) {
        Ok(m) => outcome(
            m.shape_failures.is_empty()
                && m.max_gradient_error < MONET_GRADIENT_TOL
                && m.max_softmax_error < SOFTMAX_TOL,
            format!(
                "{} configs, {} shape failures, gradient error {:.2e}, softmax row error {:.2e}",
                m.configs_checked,
                m.shape_failures.len(),
                m.max_gradient_error,
                m.max_softmax_error
            ),
        ),
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn worked_values() -> Outcome {
    match verify::worked_values() {
        Ok([r0, r1, rho, gmc]) => outcome(
            (r0 - 0.2893248).abs() < 1e-6
                && (r1 - 0.7106752).abs() < 1e-6
                && (rho - 0.5).abs() < 1e-12
                && (gmc - 1.0).abs() < 1e-10,
            format!("R'([0,1]) = [{r0:.7}, {r1:.7}], pearson = {rho}, GMC = {gmc}"),
        ),
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let base = benchmark_config();
    assert_eq!(base.seeds, SEEDS);
    assert_eq!(base.lr_grid, LR_GRID);
    let criteria: [(&str, Box<dyn Fn() -> Outcome>); 10] = [
        ("identity", Box::new(identity)),
        ("loss gradients", Box::new(gradients)),
        ("rank estimator", Box::new(ranks)),
        ("queue model", Box::new(queue)),
        ("loss comparison", Box::new(|| loss_compare(&base))),
        ("lr robustness", Box::new(|| lr_robustness(&base))),
        ("ablation", Box::new(|| ablation(&base))),
        ("MAL diversity", Box::new(mal_diversity)),
        ("MoNet integrity", Box::new(monet)),
        ("worked values", Box::new(worked_values)),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!(
            "{} criterion {}: {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        if !o.passed {
            failed.push(i + 1);
        }
    }
    println!("{} of 10 criteria passed", 10 - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
