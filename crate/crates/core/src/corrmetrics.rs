//! Exact PLCC and SROCC.
//!
//! SROCC is the Pearson correlation of fractional ranks, so ties are handled
//! by averaging the rank positions they occupy.

use crate::error::{Error, Result};

const DEGENERATE_STD: f64 = 1e-12;

fn validate(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs at least 2 samples, got {}",
            x.len()
        )));
    }
    if let Some(v) = x.iter().chain(y).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("score {v}")));
    }
    Ok(())
}

/// Population standard deviation and mean-centered copy.
fn centered(x: &[f64]) -> (Vec<f64>, f64) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let ss: f64 = dev.iter().map(|d| d * d).sum();
    let std = (ss / x.len() as f64).sqrt();
    (dev, std)
}

/// Pearson linear correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    validate(x, y)?;
    let (dx, sx) = centered(x);
    let (dy, sy) = centered(y);
    if sx < DEGENERATE_STD {
        return Err(Error::Degenerate("first input is constant".into()));
    }
    if sy < DEGENERATE_STD {
        return Err(Error::Degenerate("second input is constant".into()));
    }
    let nx = dx.iter().map(|d| d * d).sum::<f64>().sqrt();
    let ny = dy.iter().map(|d| d * d).sum::<f64>().sqrt();
    let r: f64 = dx.iter().zip(&dy).map(|(a, b)| a * b).sum::<f64>() / (nx * ny);
    Ok(r.clamp(-1.0, 1.0))
}

/// 1-based fractional ranks; ties share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) -> mean 1-based rank
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank-order correlation coefficient.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    validate(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}
