//! Correlation-consistency losses and the composite GMC objective.
//!
//! ```text
//! PGCC(P, G) = 1 - rho(P, G)
//! SGCC(P, G) = 1 - rho(R'(P), R'(G))
//! GMC        = [alpha * PGCC(Pa, Ga) + beta * SGCC(Pa, Ga) + gamma] * MSE(Pb, Gb)
//! ```
//!
//! `Pb`/`Gb` is the current batch and `Pa`/`Ga` the queue contents followed by
//! the batch. Gradients flow into the batch predictions only: labels and queue
//! entries enter the tape as constants.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgrad::{concat, Tape, Tensor, Var};
use crate::rankest::{estimate_ranks_var, normalize_scores_var, DEGENERATE_NORM};
use crate::scorequeue::QueueSnapshot;

/// Weights of the GMC objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            gamma: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.beta, self.gamma].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("non-finite loss weights {self:?}")))
        }
    }
}

/// A correlation loss term, or a skip when either side had no spread.
#[derive(Debug, Clone, Copy)]
pub struct GccTerm<'t> {
    pub loss: Var<'t>,
    pub skipped: bool,
}

/// Output of [`gmc_loss`].
#[derive(Debug, Clone, Copy)]
pub struct GmcOutput<'t> {
    pub loss: Var<'t>,
    /// Value of `alpha * PGCC + beta * SGCC + gamma`.
    pub factor: f64,
    /// The correlation factor fell back to `gamma`.
    pub gcc_skipped: bool,
}

fn same_len(p: &Var<'_>, g: &Var<'_>) -> Result<()> {
    if p.numel() != g.numel() {
        return Err(Error::LengthMismatch(p.numel(), g.numel()));
    }
    Ok(())
}

/// `(1/n) * sum (p_i - g_i)^2`.
pub fn mse_loss<'t>(p: Var<'t>, g: Var<'t>) -> Result<Var<'t>> {
    same_len(&p, &g)?;
    if p.numel() == 0 {
        return Err(Error::InvalidArgument("mse of empty batch".into()));
    }
    Ok(p.sub(g)?.square().mean())
}

/// Pearson correlation as `cov / (sd_x sd_y)` on the tape; `None` when either
/// input is constant.
pub fn pearson_var<'t>(x: Var<'t>, y: Var<'t>) -> Result<Option<Var<'t>>> {
    same_len(&x, &y)?;
    if x.numel() < 2 {
        return Err(Error::InvalidArgument("correlation needs n >= 2".into()));
    }
    let dx = x.sub(x.mean())?;
    let dy = y.sub(y.mean())?;
    let sx = dx.square().sum();
    let sy = dy.square().sum();
    if sx.item().sqrt() < DEGENERATE_NORM || sy.item().sqrt() < DEGENERATE_NORM {
        return Ok(None);
    }
    // sqrt(sx * sy) rather than sqrt(sx) * sqrt(sy): exact 1 for x == y.
    Ok(Some(dx.mul(dy)?.sum().div(sx.mul(sy)?.sqrt()?)?))
}

fn skipped<'t>(tape: &'t Tape, what: &str) -> GccTerm<'t> {
    warn!("{what}: constant predictions or labels, term skipped");
    GccTerm {
        loss: tape.scalar(0.0),
        skipped: true,
    }
}

/// `1 - pearson(p, g)`.
pub fn pgcc_loss<'t>(p: Var<'t>, g: Var<'t>) -> Result<GccTerm<'t>> {
    match pearson_var(p, g)? {
        Some(rho) => Ok(GccTerm {
            loss: rho.neg().add_scalar(1.0),
            skipped: false,
        }),
        None => Ok(skipped(p.tape(), "PGCC")),
    }
}

/// `1 - pearson(R'(p), R'(g))`.
pub fn sgcc_loss<'t>(p: Var<'t>, g: Var<'t>) -> Result<GccTerm<'t>> {
    same_len(&p, &g)?;
    let (rp, dp) = estimate_ranks_var(p)?;
    let (rg, dg) = estimate_ranks_var(g)?;
    if dp || dg {
        return Ok(skipped(p.tape(), "SGCC"));
    }
    match pearson_var(rp, rg)? {
        Some(rho) => Ok(GccTerm {
            loss: rho.neg().add_scalar(1.0),
            skipped: false,
        }),
        None => Ok(skipped(p.tape(), "SGCC")),
    }
}

/// Largest gap between each GCC loss and `(n/2) * MSE` of the l2-normalized
/// inputs (scores for PGCC, estimated ranks for SGCC).
pub fn pgcc_mse_identity_residual(p: &[f64], g: &[f64]) -> Result<f64> {
    if p.len() != g.len() {
        return Err(Error::LengthMismatch(p.len(), g.len()));
    }
    let tape = Tape::new();
    let pv = tape.constant(&Tensor::vector(p.to_vec()));
    let gv = tape.constant(&Tensor::vector(g.to_vec()));
    let half_n = p.len() as f64 / 2.0;

    let pgcc = pgcc_loss(pv, gv)?;
    let (sp, dp) = normalize_scores_var(pv)?;
    let (sg, dg) = normalize_scores_var(gv)?;
    if pgcc.skipped || dp || dg {
        return Err(Error::Degenerate("identity check needs non-constant inputs".into()));
    }
    let lhs = pgcc.loss.item();
    let rhs = half_n * mse_loss(sp, sg)?.item();

    let sgcc = sgcc_loss(pv, gv)?;
    let (rp, _) = crate::rankest::estimate_ranks_var(pv)?;
    let (rg, _) = crate::rankest::estimate_ranks_var(gv)?;
    let (srp, d1) = normalize_scores_var(rp)?;
    let (srg, d2) = normalize_scores_var(rg)?;
    if sgcc.skipped || d1 || d2 {
        return Err(Error::Degenerate("identity check needs non-constant ranks".into()));
    }
    let s_lhs = sgcc.loss.item();
    let s_rhs = half_n * mse_loss(srp, srg)?.item();

    Ok((lhs - rhs).abs().max((s_lhs - s_rhs).abs()))
}

/// Composite objective over the current batch and the queue snapshot.
///
/// With fewer than two combined samples, or constant combined predictions or
/// labels, the correlation factor falls back to `gamma`.
pub fn gmc_loss<'t>(
    p_batch: Var<'t>,
    g_batch: Var<'t>,
    queue: &QueueSnapshot,
    cfg: &LossConfig,
) -> Result<GmcOutput<'t>> {
    same_len(&p_batch, &g_batch)?;
    if p_batch.numel() == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let tape = p_batch.tape();
    let mse = mse_loss(p_batch, g_batch)?;
    let combined = queue.len() + p_batch.numel();
    let fallback = |why: &str| {
        warn!("GMC: {why}, correlation factor falls back to gamma");
        Ok(GmcOutput {
            loss: mse.scale(cfg.gamma),
            factor: cfg.gamma,
            gcc_skipped: true,
        })
    };
    if combined < 2 {
        return fallback("fewer than 2 samples");
    }

    let (pa, ga) = if queue.is_empty() {
        (p_batch, g_batch)
    } else {
        let qp = tape.constant(&Tensor::vector(queue.preds.clone()));
        let qg = tape.constant(&Tensor::vector(queue.gts.clone()));
        (concat(&[qp, p_batch], 0)?, concat(&[qg, g_batch], 0)?)
    };

    let mut factor = tape.scalar(cfg.gamma);
    let mut any_skipped = false;
    if cfg.alpha != 0.0 {
        let t = pgcc_loss(pa, ga)?;
        any_skipped |= t.skipped;
        factor = factor.add(t.loss.scale(cfg.alpha))?;
    }
    if cfg.beta != 0.0 {
        let t = sgcc_loss(pa, ga)?;
        any_skipped |= t.skipped;
        factor = factor.add(t.loss.scale(cfg.beta))?;
    }
    if any_skipped {
        return fallback("degenerate combined scores");
    }
    Ok(GmcOutput {
        factor: factor.item(),
        loss: factor.mul(mse)?,
        gcc_skipped: false,
    })
}
