use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use gmc_core::corrmetrics::{pearson, spearman};
use gmc_core::rankest::estimate_ranks as rank_estimates;
use gmc_core::synthbench::{
    self, DatasetConfig, ExperimentConfig, LossKind, SuiteKind, SuiteReport, TrainReport,
};
use gmc_core::verify;

use crate::exit::{CliError, ExitCode};
use crate::scorefile::{self, Column};

type CmdResult = Result<ExitCode, CliError>;

#[derive(Serialize)]
struct Metrics {
    plcc: f64,
    srocc: f64,
    n: usize,
}

pub fn metrics(path: &Path) -> CmdResult {
    let scores = scorefile::read(path)?;
    if let Some(c) = scores.constant_column() {
        return Err(CliError::new(
            ExitCode::Degenerate,
            format!("degenerate column {c}: all values are equal, correlation is undefined"),
        ));
    }
    let m = Metrics {
        plcc: pearson(&scores.pred, &scores.gt)?,
        srocc: spearman(&scores.pred, &scores.gt)?,
        n: scores.len(),
    };
    println!("{}", serde_json::to_string(&m).expect("plain struct"));
    Ok(ExitCode::Ok)
}

pub fn estimate_ranks(path: &Path, column: Column, out: Option<&Path>) -> CmdResult {
    let scores = scorefile::read(path)?;
    let ranks = rank_estimates(scores.column(column))?;
    if ranks.degenerate {
        eprintln!("warning: column {column} is constant; every rank estimate is 0.5");
    }

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["id", "sigma"]).expect("in-memory write");
        for (id, s) in scores.ids.iter().zip(&ranks.sigma) {
            w.write_record([id.as_str(), &s.to_string()]).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    let sum: f64 = ranks.sigma.iter().sum();
    let check = format!(
        "sum check: sum(sigma) = {sum:.12}, n/2 = {}, difference {:.3e}",
        scores.len() as f64 / 2.0,
        (sum - scores.len() as f64 / 2.0).abs()
    );
    match out {
        Some(p) => {
            fs::write(p, &buf).map_err(|e| CliError::io(&p.display().to_string(), e))?;
            println!("{check}");
        }
        None => {
            std::io::stdout()
                .write_all(&buf)
                .map_err(|e| CliError::io("stdout", e))?;
            eprintln!("{check}");
        }
    }
    Ok(ExitCode::Ok)
}

pub fn check(seed: u64) -> CmdResult {
    let checks = verify::run_all(seed);
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!("{} of {} properties passed", checks.len() - failed, checks.len());
    Ok(if failed == 0 {
        ExitCode::Ok
    } else {
        ExitCode::Failure
    })
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| CliError::io(&p.display().to_string(), e))?;
            ExperimentConfig::from_json(&text)
                .map_err(|e| CliError::input(format!("{}: {e}", p.display())))
        }
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(&path.display().to_string(), e))
}

fn to_json(value: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s.into_bytes()
}

#[derive(Serialize)]
struct RunReport<'a> {
    dataset: DatasetConfig,
    #[serde(flatten)]
    report: &'a TrainReport,
}

#[derive(Serialize)]
struct CurveRow {
    epoch: usize,
    lr: f64,
    train_loss: f64,
    train_srocc: f64,
    train_plcc: f64,
    test_srocc: f64,
    test_plcc: f64,
}

fn curves_csv(r: &TrainReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in 0..r.lr.len() {
        w.serialize(CurveRow {
            epoch: e + 1,
            lr: r.lr[e],
            train_loss: r.train_loss[e],
            train_srocc: r.train_srocc[e],
            train_plcc: r.train_plcc[e],
            test_srocc: r.test_srocc[e],
            test_plcc: r.test_plcc[e],
        })
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

pub struct TrainArgs<'a> {
    pub config: Option<&'a Path>,
    pub loss: Option<&'a str>,
    pub seed: Option<u64>,
    pub out: &'a Path,
    pub queue_ratio: Option<f64>,
    pub mal_count: Option<usize>,
}

pub fn train(a: TrainArgs<'_>) -> CmdResult {
    let mut cfg = load_config(a.config)?;
    if let Some(loss) = a.loss {
        cfg.train.loss = loss.parse::<LossKind>()?;
    }
    if let Some(r) = a.queue_ratio {
        cfg.train.queue_ratio = r;
    }
    if let Some(m) = a.mal_count {
        cfg.train.monet.mals = m;
    }
    cfg.validate()?;
    let seed = a.seed.or(cfg.seeds.first().copied()).unwrap_or(0);
    let dataset = cfg.dataset_for(seed);
    let data = synthbench::generate(&dataset)?;
    let report = synthbench::train(&data, &cfg.train, seed)
        .map_err(|e| CliError::new(ExitCode::Failure, format!("training failed: {e}")))?;

    fs::create_dir_all(a.out).map_err(|e| CliError::io(&a.out.display().to_string(), e))?;
    write_file(
        &a.out.join("report.json"),
        &to_json(&RunReport {
            dataset,
            report: &report,
        }),
    )?;
    write_file(&a.out.join("curves.csv"), &curves_csv(&report))?;
    let s = &report.summary;
    println!(
        "trained {:?} with {:?} loss, seed {seed}, {} epochs: test SROCC {:.4}, PLCC {:.4} ({:.1} s)",
        cfg.train.model,
        cfg.train.loss,
        report.lr.len(),
        s.final_test_srocc,
        s.final_test_plcc,
        report.wall_clock_secs
    );
    Ok(ExitCode::Ok)
}

#[derive(Serialize)]
struct SuiteCurveRow<'a> {
    arm: &'a str,
    epoch: usize,
    train_loss: f64,
    train_srocc: f64,
    train_plcc: f64,
    test_srocc: f64,
    test_plcc: f64,
}

fn suite_curves_csv(r: &SuiteReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for arm in r.arms.iter().filter(|a| a.is_ok()) {
        let c = &arm.median_curves;
        for e in 0..c["test_srocc"].len() {
            w.serialize(SuiteCurveRow {
                arm: &arm.name,
                epoch: e + 1,
                train_loss: c["train_loss"][e],
                train_srocc: c["train_srocc"][e],
                train_plcc: c["train_plcc"][e],
                test_srocc: c["test_srocc"][e],
                test_plcc: c["test_plcc"][e],
            })
            .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory write")
}

pub fn suite(kind: Option<&str>, config: Option<&Path>, out: &Path) -> CmdResult {
    let cfg = load_config(config)?;
    let kind: SuiteKind = match (kind, cfg.suite) {
        (Some(k), _) => k.parse()?,
        (None, Some(k)) => k,
        (None, None) => return Err(CliError::input("no suite kind given on the command line or in the config")),
    };
    let report = synthbench::run_suite(kind, &cfg, &cfg.seeds)?;

    fs::create_dir_all(out).map_err(|e| CliError::io(&out.display().to_string(), e))?;
    write_file(&out.join("suite.json"), &to_json(&report))?;
    write_file(&out.join("curves.csv"), &suite_curves_csv(&report))?;
    for arm in &report.arms {
        match &arm.status {
            synthbench::ArmStatus::Ok => println!(
                "{:<14} median test SROCC {:.4}  PLCC {:.4}",
                arm.name, arm.median_test_srocc, arm.median_test_plcc
            ),
            synthbench::ArmStatus::Failed { error } => println!("{:<14} failed: {error}", arm.name),
            synthbench::ArmStatus::Skipped { reason } => {
                println!("{:<14} skipped: {reason}", arm.name)
            }
        }
    }
    Ok(if report.all_failed() {
        ExitCode::Failure
    } else {
        ExitCode::Ok
    })
}
