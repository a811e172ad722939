use crate::error::{Error, Result};
use crate::init::{self, Rng};
use crate::numgrad::{Tensor, Var};

/// Query/key/value projections of one self-attention.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention<T> {
    pub query: T,
    pub key: T,
    pub value: T,
}

impl Attention<Tensor> {
    /// Square `dim x dim` projections.
    pub fn random(dim: usize, rng: &mut Rng) -> Self {
        Self {
            query: init::linear(dim, dim, rng),
            key: init::linear(dim, dim, rng),
            value: init::linear(dim, dim, rng),
        }
    }
}

impl<T> Attention<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Attention<U> {
        Attention {
            query: f(&self.query),
            key: f(&self.key),
            value: f(&self.value),
        }
    }

    pub fn items(&self) -> Vec<&T> {
        vec![&self.query, &self.key, &self.value]
    }

    pub fn items_mut(&mut self) -> Vec<&mut T> {
        vec![&mut self.query, &mut self.key, &mut self.value]
    }
}

/// Attention output and its row-stochastic weight matrix.
pub struct AttentionOutput<'t> {
    pub output: Var<'t>,
    pub weights: Var<'t>,
}

/// `softmax(Q K^T / sqrt(d)) V` with `Q = x W_q`, `K = x W_k`, `V = x W_v`.
pub fn self_attention<'t>(x: Var<'t>, w: &Attention<Var<'t>>) -> Result<Var<'t>> {
    Ok(self_attention_with_weights(x, w)?.output)
}

pub fn self_attention_with_weights<'t>(
    x: Var<'t>,
    w: &Attention<Var<'t>>,
) -> Result<AttentionOutput<'t>> {
    let shape = x.shape();
    let wshape = w.query.shape();
    if shape.len() != 2 || wshape.len() != 2 || wshape[0] != shape[1] {
        return Err(Error::ShapeMismatch {
            op: "self_attention",
            lhs: shape,
            rhs: wshape,
        });
    }
    let q = x.matmul(w.query)?;
    let k = x.matmul(w.key)?;
    let v = x.matmul(w.value)?;
    let d = q.shape()[1] as f64;
    let scores = q.matmul(k.t()?)?.scale(1.0 / d.sqrt());
    let weights = scores.softmax(1)?;
    Ok(AttentionOutput {
        output: weights.matmul(v)?,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numgrad::Tape;

    fn setup(tape: &Tape, t: usize, e: usize, seed: u64) -> (Var<'_>, Attention<Var<'_>>) {
        let mut rng = init::rng(seed);
        let x = tape.param(&init::normal(&[t, e], 1.0, &mut rng));
        let w = Attention::random(e, &mut rng).map(&mut |t| tape.param(t));
        (x, w)
    }

    #[test]
    fn weight_rows_sum_to_one() {
        let tape = Tape::new();
        let (x, w) = setup(&tape, 5, 4, 1);
        let out = self_attention_with_weights(x, &w).unwrap();
        assert_eq!(out.output.shape(), vec![5, 4]);
        for row in out.weights.value().data().chunks(5) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn permutation_equivariant() {
        let tape = Tape::new();
        let (x, w) = setup(&tape, 4, 3, 2);
        let perm = [2usize, 0, 3, 1];
        let idx = perm
            .iter()
            .flat_map(|&r| (0..3).map(move |c| Some(r * 3 + c)))
            .collect();
        let xp = x.gather(idx, &[4, 3]).unwrap();
        let y = self_attention(x, &w).unwrap();
        let yp = self_attention(xp, &w).unwrap();
        let (y, yp) = (y.value(), yp.value());
        for (i, &r) in perm.iter().enumerate() {
            for c in 0..3 {
                assert!((yp.data()[i * 3 + c] - y.data()[r * 3 + c]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn single_token_is_value_projection() {
        let tape = Tape::new();
        let (x, w) = setup(&tape, 1, 3, 3);
        let y = self_attention(x, &w).unwrap();
        let v = x.matmul(w.value).unwrap();
        assert_eq!(y.value().data(), v.value().data());
    }

    #[test]
    fn rejects_mismatched_projection() {
        let tape = Tape::new();
        let (x, _) = setup(&tape, 2, 3, 4);
        let w = Attention::random(4, &mut init::rng(0)).map(&mut |t| tape.param(t));
        assert!(self_attention(x, &w).is_err());
    }
}
