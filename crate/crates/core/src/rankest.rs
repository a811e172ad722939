//! Differentiable rank estimation from pairwise preference probabilities.
//!
//! Scores are first centered and scaled to unit l2 norm. For every ordered
//! pair the preference probability is `h_ij = Phi(s_i - s_j)`, the standard
//! normal CDF of the normalized difference, i.e. `(1 + erf((s_i - s_j)/sqrt 2))/2`.
//! The estimated rank of item `i` is the row mean `sigma_i = (1/n) sum_k h_ik`.
//!
//! Since `h_ij + h_ji = 1` and `h_ii = 1/2`, the estimates always sum to `n/2`,
//! and `sigma(-p) = 1 - sigma(p)`.
//!
//! Every function comes in two flavors: plain slices for evaluation and
//! reporting, and [`Var`] for use inside a differentiable loss.

use crate::error::{Error, Result};
use crate::numgrad::{normal_cdf, soft_rank_values, Tensor, Var};

/// Below this deviation norm the input is treated as constant.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedScores {
    pub values: Vec<f64>,
    /// The input had (numerically) zero spread; `values` is all zeros.
    pub degenerate: bool,
}

/// n x n preference probabilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl PreferenceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn row_means(&self) -> Vec<f64> {
        self.values
            .chunks(self.n)
            .map(|row| row.iter().sum::<f64>() / self.n as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedRanks {
    pub sigma: Vec<f64>,
    pub degenerate: bool,
}

fn check_len(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "rank estimation needs at least 2 scores, got {n}"
        )));
    }
    Ok(())
}

/// `s_i = (p_i - mean) / ||p - mean||_2`.
pub fn normalize_scores(p: &[f64]) -> Result<NormalizedScores> {
    check_len(p.len())?;
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    let dev: Vec<f64> = p.iter().map(|v| v - mean).collect();
    let norm = dev.iter().map(|d| d * d).sum::<f64>().sqrt();
    if !(norm >= DEGENERATE_NORM) {
        return Ok(NormalizedScores {
            values: vec![0.0; p.len()],
            degenerate: true,
        });
    }
    Ok(NormalizedScores {
        values: dev.iter().map(|d| d / norm).collect(),
        degenerate: false,
    })
}

pub fn preference_matrix(s: &NormalizedScores) -> PreferenceMatrix {
    let n = s.values.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = if i == j {
                0.5
            } else {
                normal_cdf(s.values[i] - s.values[j])
            };
        }
    }
    PreferenceMatrix { n, values }
}

/// Row means of the preference matrix of `normalize_scores(p)`.
///
/// Constant input yields 0.5 everywhere with `degenerate` set.
pub fn estimate_ranks(p: &[f64]) -> Result<EstimatedRanks> {
    let s = normalize_scores(p)?;
    Ok(EstimatedRanks {
        sigma: soft_rank_values(&s.values),
        degenerate: s.degenerate,
    })
}

/// Differentiable [`normalize_scores`]. Degenerate input yields a zero
/// constant (no gradient) and `true`.
pub fn normalize_scores_var<'t>(p: Var<'t>) -> Result<(Var<'t>, bool)> {
    let n = p.numel();
    check_len(n)?;
    if p.shape().len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "expected a score vector, got shape {:?}",
            p.shape()
        )));
    }
    let dev = p.sub(p.mean())?;
    let norm = dev.square().sum().sqrt()?;
    if !(norm.item() >= DEGENERATE_NORM) {
        return Ok((p.tape().constant(&Tensor::zeros(&[n])), true));
    }
    Ok((dev.div(norm)?, false))
}

/// Differentiable n x n preference matrix built from elementary ops.
pub fn preference_matrix_var<'t>(s: Var<'t>) -> Result<Var<'t>> {
    Ok(s.pairwise_diff()?
        .scale(std::f64::consts::FRAC_1_SQRT_2)
        .erf()?
        .add_scalar(1.0)
        .scale(0.5))
}

/// Differentiable [`estimate_ranks`] through the fused pairwise kernel.
pub fn estimate_ranks_var<'t>(p: Var<'t>) -> Result<(Var<'t>, bool)> {
    let (s, degenerate) = normalize_scores_var(p)?;
    Ok((s.soft_rank()?, degenerate))
}

/// Differentiable [`estimate_ranks`] through the materialized matrix; same
/// values as [`estimate_ranks_var`], O(n^2) memory.
pub fn estimate_ranks_var_dense<'t>(p: Var<'t>) -> Result<(Var<'t>, bool)> {
    let (s, degenerate) = normalize_scores_var(p)?;
    Ok((preference_matrix_var(s)?.mean_axis(1)?, degenerate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numgrad::{finite_difference_check, Tape};

    const ERF_1: f64 = 0.842_700_792_949_714_9;
    const ERF_HALF: f64 = 0.520_499_877_813_046_5;

    #[test]
    fn normalize_examples() {
        let s = normalize_scores(&[1.0, 2.0, 3.0]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in s.values.iter().zip([-r, 0.0, r]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(!s.degenerate);
        let c = normalize_scores(&[4.0, 4.0, 4.0]).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.values, vec![0.0; 3]);
        assert!(normalize_scores(&[1.0]).is_err());
    }

    #[test]
    fn normalize_affine_invariance() {
        let p = [0.3, 1.7, -0.2, 0.9];
        let q: Vec<f64> = p.iter().map(|v| 3.5 * v - 11.0).collect();
        let a = normalize_scores(&p).unwrap().values;
        let b = normalize_scores(&q).unwrap().values;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn preference_matrix_examples() {
        let h = preference_matrix(&normalize_scores(&[0.0, 1.0]).unwrap());
        assert_eq!(h.get(0, 0), 0.5);
        // s = (-1/sqrt2, 1/sqrt2): h_01 = (1 + erf(-1)) / 2
        assert!((h.get(0, 1) - 0.5 * (1.0 - ERF_1)).abs() < 1e-12);
        assert!((h.get(0, 1) - 0.078_649_6).abs() < 1e-7);
        assert!((h.get(0, 1) + h.get(1, 0) - 1.0).abs() < 1e-15);

        let ties = preference_matrix(&NormalizedScores {
            values: vec![0.2, 0.2],
            degenerate: false,
        });
        assert_eq!(ties.get(0, 1), 0.5);

        let far = preference_matrix(&NormalizedScores {
            values: vec![10.0, -10.0],
            degenerate: false,
        });
        assert!(far.get(0, 1) > 1.0 - 1e-15);
    }

    #[test]
    fn estimate_examples() {
        let r = estimate_ranks(&[0.0, 1.0]).unwrap();
        let lo = (0.5 + 0.5 * (1.0 - ERF_1)) / 2.0;
        assert!((r.sigma[0] - lo).abs() < 1e-12);
        assert!((r.sigma[1] - (1.0 - lo)).abs() < 1e-12);
        assert!((r.sigma[0] - 0.289_324_8).abs() < 1e-7);

        // s = (-1/sqrt2, 0, 1/sqrt2): neighbours differ by erf(1/2), the ends by erf(1).
        let r = estimate_ranks(&[1.0, 2.0, 3.0]).unwrap();
        let h01 = 0.5 * (1.0 - ERF_HALF);
        let h02 = 0.5 * (1.0 - ERF_1);
        let first = (0.5 + h01 + h02) / 3.0;
        assert!((r.sigma[0] - first).abs() < 1e-12);
        assert!((r.sigma[1] - 0.5).abs() < 1e-12);
        assert!((r.sigma[2] - (1.0 - first)).abs() < 1e-12);
        assert!((r.sigma[0] - 0.2728).abs() < 1e-4);
    }

    #[test]
    fn estimate_negation() {
        let p = [0.4, -1.0, 2.2, 0.0, 0.7];
        let neg: Vec<f64> = p.iter().map(|v| -v).collect();
        let a = estimate_ranks(&p).unwrap().sigma;
        let b = estimate_ranks(&neg).unwrap().sigma;
        for (x, y) in a.iter().zip(&b) {
            assert!((x + y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_gives_half() {
        let r = estimate_ranks(&[2.0; 5]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.sigma, vec![0.5; 5]);
    }

    #[test]
    fn row_means_agree_with_fused() {
        let p = [0.4, -1.0, 2.2, 0.0, 0.7, 0.7];
        let s = normalize_scores(&p).unwrap();
        let dense = preference_matrix(&s).row_means();
        let fused = estimate_ranks(&p).unwrap().sigma;
        for (a, b) in dense.iter().zip(&fused) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn var_routes_match_values() {
        let p = [0.4, -1.0, 2.2, 0.0, 0.7];
        let tape = Tape::new();
        let v = tape.param(&Tensor::vector(p.to_vec()));
        let (fused, d1) = estimate_ranks_var(v).unwrap();
        let (dense, d2) = estimate_ranks_var_dense(v).unwrap();
        assert!(!d1 && !d2);
        let want = estimate_ranks(&p).unwrap().sigma;
        for i in 0..p.len() {
            assert!((fused.value().data()[i] - want[i]).abs() < 1e-15);
            assert!((dense.value().data()[i] - want[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_through_ranks_near_ties() {
        let p = Tensor::vector(vec![0.5, 0.5 + 1e-9, -0.3, 1.1]);
        let w = Tensor::vector(vec![1.0, -0.5, 2.0, 0.3]);
        let err = finite_difference_check(
            |tape, x| {
                let (r, _) = estimate_ranks_var(x)?;
                Ok(r.mul(tape.constant(&w))?.sum())
            },
            &p,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn degenerate_var_is_constant() {
        let tape = Tape::new();
        let v = tape.param(&Tensor::vector(vec![3.0; 4]));
        let (r, degenerate) = estimate_ranks_var(v).unwrap();
        assert!(degenerate);
        assert_eq!(r.value().data(), &[0.5; 4]);
        assert!(!r.requires_grad());
    }
}
