//! Randomized property checks over the whole crate, as run by `gmc check`.
//!
//! Every function is deterministic in its seed and returns the measured
//! quantity; [`run_all`] compares those against fixed tolerances.

use rand::Rng as _;

use crate::corrmetrics::pearson;
use crate::error::Result;
use crate::gccloss::{gmc_loss, mse_loss, pgcc_loss, pgcc_mse_identity_residual, sgcc_loss, LossConfig};
use crate::init::{self, derive_seed, Rng};
use crate::monet::{
    mal_forward_traced, mal_weight_cosine_similarity, mal_weights_for, MoNet, MoNetConfig,
};
use crate::numgrad::{finite_difference_check, finite_difference_check_many, Tape, Tensor};
use crate::rankest::estimate_ranks;
use crate::scorequeue::{QueueSnapshot, ScoreQueue};

pub const IDENTITY_TOL: f64 = 1e-10;
pub const GRADIENT_TOL: f64 = 1e-6;
pub const RANK_SUM_TOL: f64 = 1e-10;
pub const RANK_SYMMETRY_TOL: f64 = 1e-12;
pub const MAL_COS_LIMIT: f64 = 0.1;
pub const MAL_PASS_FRACTION: f64 = 0.99;
pub const SOFTMAX_TOL: f64 = 1e-12;

const FD_EPS: f64 = 1e-6;

/// Outcome of one named property.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    fn from_result(name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

fn uniform(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn argsort(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    idx
}

/// Largest PGCC / SGCC identity residual over `instances` random pairs,
/// cycling through n = 2, 8, 64, 256.
pub fn identity_residual(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = init::rng(derive_seed(seed, 11));
    let mut worst = 0.0_f64;
    for i in 0..instances {
        let n = [2, 8, 64, 256][i % 4];
        let p = uniform(&mut rng, n, -3.0, 3.0);
        let g = uniform(&mut rng, n, 0.0, 100.0);
        worst = worst.max(pgcc_mse_identity_residual(&p, &g)?);
    }
    Ok(worst)
}

/// Worst finite-difference error per loss, as `[mse, pgcc, sgcc, gmc]`, over
/// `instances` random batches each. GMC uses a nonempty queue.
pub fn loss_gradient_errors(instances: usize, seed: u64) -> Result<[f64; 4]> {
    let mut rng = init::rng(derive_seed(seed, 12));
    let mut worst = [0.0_f64; 4];
    for _ in 0..instances {
        let n = rng.random_range(3..=16);
        let p = Tensor::vector(uniform(&mut rng, n, -2.0, 2.0));
        let g = uniform(&mut rng, n, 0.0, 1.0);
        let k = rng.random_range(1..=24);
        let queue = QueueSnapshot {
            preds: uniform(&mut rng, k, -2.0, 2.0),
            gts: uniform(&mut rng, k, 0.0, 1.0),
        };
        let cfg = LossConfig::default();
        let gt = Tensor::vector(g);
        let errs = [
            finite_difference_check(|t, x| mse_loss(x, t.constant(&gt)), &p, FD_EPS)?,
            finite_difference_check(|t, x| Ok(pgcc_loss(x, t.constant(&gt))?.loss), &p, FD_EPS)?,
            finite_difference_check(|t, x| Ok(sgcc_loss(x, t.constant(&gt))?.loss), &p, FD_EPS)?,
            finite_difference_check(|t, x| Ok(gmc_loss(x, t.constant(&gt), &queue, &cfg)?.loss), &p, FD_EPS)?,
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    Ok(worst)
}

/// Aggregate violations of the rank-estimator properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankPropertyStats {
    pub order_mismatches: usize,
    pub max_sum_error: f64,
    pub max_negation_error: f64,
    pub max_affine_error: f64,
}

/// Order preservation, `sum = n/2`, negation and affine invariance over
/// `trials` random strictly distinct vectors of length `n`.
pub fn rank_properties(trials: usize, n: usize, seed: u64) -> Result<RankPropertyStats> {
    let mut rng = init::rng(derive_seed(seed, 13));
    let mut stats = RankPropertyStats {
        order_mismatches: 0,
        max_sum_error: 0.0,
        max_negation_error: 0.0,
        max_affine_error: 0.0,
    };
    let mut done = 0;
    while done < trials {
        let p = uniform(&mut rng, n, -10.0, 10.0);
        let mut sorted = p.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        done += 1;
        let r = estimate_ranks(&p)?.sigma;
        if argsort(&r) != argsort(&p) {
            stats.order_mismatches += 1;
        }
        let sum: f64 = r.iter().sum();
        stats.max_sum_error = stats.max_sum_error.max((sum - n as f64 / 2.0).abs());

        let neg: Vec<f64> = p.iter().map(|v| -v).collect();
        let rn = estimate_ranks(&neg)?.sigma;
        for (a, b) in r.iter().zip(&rn) {
            stats.max_negation_error = stats.max_negation_error.max((b - (1.0 - a)).abs());
        }

        let a = rng.random_range(0.1..10.0);
        let c = rng.random_range(-5.0..5.0);
        let moved: Vec<f64> = p.iter().map(|v| a * v + c).collect();
        let ra = estimate_ranks(&moved)?.sigma;
        for (x, y) in r.iter().zip(&ra) {
            stats.max_affine_error = stats.max_affine_error.max((x - y).abs());
        }
    }
    Ok(stats)
}

/// Number of randomized push sequences whose queue contents ever differ from
/// a plain list truncated to the newest `capacity` entries.
pub fn queue_model_mismatches(sequences: usize, seed: u64) -> usize {
    let mut rng = init::rng(derive_seed(seed, 14));
    let mut failures = 0;
    for _ in 0..sequences {
        let capacity = rng.random_range(0..=20);
        let mut queue = ScoreQueue::new(capacity);
        let mut model: Vec<(f64, f64)> = Vec::new();
        let mut ok = true;
        for _ in 0..rng.random_range(0..=12) {
            let len = rng.random_range(0..=30);
            let preds = uniform(&mut rng, len, -1.0, 1.0);
            let gts = uniform(&mut rng, len, 0.0, 100.0);
            queue.push_batch(&preds, &gts).expect("equal lengths");
            model.extend(preds.into_iter().zip(gts));
            let keep = model.len().saturating_sub(capacity);
            model.drain(..keep);
            ok &= queue.iter().collect::<Vec<_>>() == model && queue.len() <= capacity;
        }
        if !ok {
            failures += 1;
        }
    }
    failures
}

/// Weight-similarity statistics for independently seeded MALs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MalDiversity {
    /// Fraction of initializations whose off-diagonal `|cos|` all stay
    /// below [`MAL_COS_LIMIT`].
    pub pass_fraction: f64,
    pub max_abs_cos: f64,
    pub weight_dim: usize,
}

/// One entry per MAL count in `counts`, over `trials` initializations each.
pub fn mal_diversity(counts: &[usize], trials: usize, seed: u64) -> Result<Vec<MalDiversity>> {
    let cfg = MoNetConfig::default();
    counts
        .iter()
        .map(|&m| {
            let mut passes = 0;
            let mut max_abs = 0.0_f64;
            let mut dim = 0;
            for t in 0..trials {
                let net_seed = derive_seed(seed, (m * 1_000_000 + t) as u64);
                let mals: Vec<_> = (0..m).map(|i| mal_weights_for(&cfg, net_seed, i)).collect();
                dim = mals[0].num_weights();
                let mut worst = 0.0_f64;
                for i in 0..m {
                    for j in (i + 1)..m {
                        worst = worst.max(mal_weight_cosine_similarity(&mals[i], &mals[j])?.abs());
                    }
                }
                max_abs = max_abs.max(worst);
                if worst < MAL_COS_LIMIT {
                    passes += 1;
                }
            }
            Ok(MalDiversity {
                pass_fraction: passes as f64 / trials as f64,
                max_abs_cos: max_abs,
                weight_dim: dim,
            })
        })
        .collect()
}

/// Shape, gradient and softmax checks over the toy network.
#[derive(Debug, Clone, PartialEq)]
pub struct MonetIntegrity {
    pub configs_checked: usize,
    pub shape_failures: Vec<String>,
    pub max_softmax_error: f64,
    pub max_gradient_error: f64,
}

/// Every combination of C in {4, 16}, D in {4, 8}, N in {2, 4}, M in 1..=5.
pub fn monet_sweep_configs() -> Vec<MoNetConfig> {
    let mut out = Vec::new();
    for c in [4, 16] {
        for d in [4, 8] {
            for n in [2, 4] {
                for m in 1..=5 {
                    out.push(MoNetConfig {
                        tokens: c,
                        input_dim: d,
                        embed_dim: d,
                        levels: n,
                        mals: m,
                        ..MoNetConfig::default()
                    });
                }
            }
        }
    }
    out
}

fn check_shapes(cfg: &MoNetConfig, seed: u64) -> Result<(Vec<String>, f64)> {
    let mut failures = Vec::new();
    let mut softmax_err = 0.0_f64;
    let net = MoNet::new(cfg.clone(), seed)?;
    let tape = Tape::new();
    let w = net.bind(&tape);
    let input = tape.constant(&init::normal(
        &[cfg.tokens, cfg.input_dim],
        1.0,
        &mut init::rng(derive_seed(seed, 15)),
    ));
    let label = format!("C={} D={} N={} M={}", cfg.tokens, cfg.embed_dim, cfg.levels, cfg.mals);

    let feats = net.backbone.features(input)?;
    if feats.len() != cfg.levels || feats.iter().any(|f| f.shape() != [cfg.tokens, cfg.embed_dim]) {
        failures.push(format!("{label}: backbone features"));
    }
    let mut opinions = Vec::new();
    for mal in &w.mals {
        let trace = mal_forward_traced(&feats, mal)?;
        if trace.opinion.shape() != [cfg.embed_dim, cfg.levels] || !trace.opinion.value().all_finite() {
            failures.push(format!("{label}: opinion shape {:?}", trace.opinion.shape()));
        }
        for a in &trace.attention {
            let v = a.value();
            let cols = v.shape()[1];
            for row in v.data().chunks(cols) {
                softmax_err = softmax_err.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
        opinions.push(trace.opinion);
    }
    if let Some(fusion) = &w.fusion {
        let fused = mal_forward_traced(&opinions, fusion)?.opinion;
        if fused.shape() != [cfg.levels, cfg.mals] {
            failures.push(format!("{label}: fused shape {:?}", fused.shape()));
        }
    }
    let score = net.forward(&w, input)?;
    if score.shape() != [1] || !score.item().is_finite() {
        failures.push(format!("{label}: score shape {:?}", score.shape()));
    }
    Ok((failures, softmax_err))
}

/// End-to-end finite-difference error of the score with respect to every
/// weight and the input, on a small network.
pub fn monet_gradient_error(seed: u64) -> Result<f64> {
    let cfg = MoNetConfig {
        tokens: 4,
        input_dim: 3,
        embed_dim: 4,
        levels: 2,
        mals: 2,
        head_channels: [3, 2, 2],
        head_hidden: 3,
        ..MoNetConfig::default()
    };
    let net = MoNet::new(cfg.clone(), seed)?;
    let mut inputs = net.parameters();
    inputs.push(init::normal(&[cfg.tokens, cfg.input_dim], 1.0, &mut init::rng(seed)));
    finite_difference_check_many(
        |_, vars| {
            let (x, params) = vars.split_last().expect("input present");
            let mut it = params.iter();
            let w = net.params.map(&mut |_| *it.next().expect("parameter count"));
            Ok(net.forward(&w, *x)?.sum())
        },
        &inputs,
        1e-5,
    )
}

pub fn monet_integrity(seed: u64) -> Result<MonetIntegrity> {
    let configs = monet_sweep_configs();
    let mut shape_failures = Vec::new();
    let mut max_softmax_error = 0.0_f64;
    for (i, cfg) in configs.iter().enumerate() {
        let (f, s) = check_shapes(cfg, derive_seed(seed, i as u64))?;
        shape_failures.extend(f);
        max_softmax_error = max_softmax_error.max(s);
    }
    Ok(MonetIntegrity {
        configs_checked: configs.len(),
        shape_failures,
        max_softmax_error,
        max_gradient_error: monet_gradient_error(seed)?,
    })
}

/// `[R'([0,1])_0, R'([0,1])_1, pearson([1,2,3],[1,3,2]), GMC([1,2,3],[1,3,2])]`.
pub fn worked_values() -> Result<[f64; 4]> {
    let r = estimate_ranks(&[0.0, 1.0])?.sigma;
    let rho = pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0])?;
    let tape = Tape::new();
    let p = tape.constant(&Tensor::vector(vec![1.0, 2.0, 3.0]));
    let g = tape.constant(&Tensor::vector(vec![1.0, 3.0, 2.0]));
    let gmc = gmc_loss(p, g, &QueueSnapshot::default(), &LossConfig::default())?
        .loss
        .item();
    Ok([r[0], r[1], rho, gmc])
}

fn fmt_e(x: f64) -> String {
    format!("{x:.3e}")
}

/// Every property with its tolerance.
pub fn run_all(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();

    out.push(Check::from_result(
        "identity",
        identity_residual(100, seed).map(|r| (r < IDENTITY_TOL, format!("max residual {}", fmt_e(r)))),
    ));

    out.push(Check::from_result(
        "loss gradients",
        loss_gradient_errors(100, seed).map(|e| {
            let worst = e.iter().copied().fold(0.0, f64::max);
            (
                worst < GRADIENT_TOL,
                format!(
                    "max relative error {} (mse {}, pgcc {}, sgcc {}, gmc {})",
                    fmt_e(worst),
                    fmt_e(e[0]),
                    fmt_e(e[1]),
                    fmt_e(e[2]),
                    fmt_e(e[3])
                ),
            )
        }),
    ));

    out.push(Check::from_result(
        "rank estimator",
        rank_properties(1000, 32, seed).map(|s| {
            (
                s.order_mismatches == 0
                    && s.max_sum_error < RANK_SUM_TOL
                    && s.max_negation_error < RANK_SYMMETRY_TOL
                    && s.max_affine_error < RANK_SYMMETRY_TOL,
                format!(
                    "order mismatches {}, sum {}, negation {}, affine {}",
                    s.order_mismatches,
                    fmt_e(s.max_sum_error),
                    fmt_e(s.max_negation_error),
                    fmt_e(s.max_affine_error)
                ),
            )
        }),
    ));

    let mismatches = queue_model_mismatches(10_000, seed);
    out.push(Check::new(
        "queue model",
        mismatches == 0,
        format!("{mismatches} of 10000 sequences differ"),
    ));

    out.push(Check::from_result(
        "MAL diversity",
        mal_diversity(&[3, 4, 5], 1000, seed).map(|ds| {
            let ok = ds
                .iter()
                .all(|d| d.pass_fraction >= MAL_PASS_FRACTION && d.weight_dim >= 1000);
            let parts: Vec<String> = ds
                .iter()
                .zip([3, 4, 5])
                .map(|(d, m)| {
                    format!(
                        "M={m}: {:.1}% pass, max |cos| {:.3}, dim {}",
                        100.0 * d.pass_fraction,
                        d.max_abs_cos,
                        d.weight_dim
                    )
                })
                .collect();
            (ok, parts.join("; "))
        }),
    ));

    out.push(Check::from_result(
        "MoNet integrity",
        monet_integrity(seed).map(|m| {
            (
                m.shape_failures.is_empty()
                    && m.max_gradient_error < GRADIENT_TOL
                    && m.max_softmax_error < SOFTMAX_TOL,
                format!(
                    "{} configs, {} shape failures, gradient {}, softmax {}",
                    m.configs_checked,
                    m.shape_failures.len(),
                    fmt_e(m.max_gradient_error),
                    fmt_e(m.max_softmax_error)
                ),
            )
        }),
    ));

    out.push(Check::from_result(
        "worked values",
        worked_values().map(|v| {
            (
                (v[0] - 0.2893248).abs() < 1e-6
                    && (v[1] - 0.7106752).abs() < 1e-6
                    && (v[2] - 0.5).abs() < 1e-12
                    && (v[3] - 1.0).abs() < 1e-10,
                format!(
                    "R'([0,1]) = [{:.7}, {:.7}], pearson {:.12}, gmc {:.12}",
                    v[0], v[1], v[2], v[3]
                ),
            )
        }),
    ));

    out
}
