//! Multi-view attention learning (MAL) module.
//!
//! ```text
//! f_1..f_N (C x D) --SA_j--> concat --> F (C x D x N)
//!   pixel branch:   F as C tokens of width D*N, SA, back to C x D x N
//!   channel branch: F as D tokens of width C*N, SA, back to C x D x N
//! (pixel + channel) --mean over C--> opinion feature (D x N)
//! ```
//!
//! The channel-branch projections are N x N matrices applied at every spatial
//! position, so the branch commutes with any reordering of the C tokens. With
//! the pixel branch being permutation-equivariant and the final pooling over
//! C, the opinion feature is invariant to token order.

use crate::error::{Error, Result};
use crate::init::Rng;
use crate::numgrad::{concat, Tensor, Var};

use super::attention::{self_attention_with_weights, Attention};

#[derive(Debug, Clone, PartialEq)]
pub struct MalWeights<T = Tensor> {
    /// One self-attention per input level, each `D x D`.
    pub levels: Vec<Attention<T>>,
    /// `(D*N) x (D*N)`.
    pub pixel: Attention<T>,
    /// `N x N`, shared over spatial positions.
    pub channel: Attention<T>,
}

impl MalWeights<Tensor> {
    pub fn random(dim: usize, levels: usize, rng: &mut Rng) -> Self {
        Self {
            levels: (0..levels).map(|_| Attention::random(dim, rng)).collect(),
            pixel: Attention::random(dim * levels, rng),
            channel: Attention::random(levels, rng),
        }
    }

    /// All weights flattened in [`items`](Self::items) order.
    pub fn flatten(&self) -> Vec<f64> {
        self.items()
            .into_iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    pub fn num_weights(&self) -> usize {
        self.items().iter().map(|t| t.numel()).sum()
    }
}

impl<T> MalWeights<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> MalWeights<U> {
        MalWeights {
            levels: self.levels.iter().map(|a| a.map(f)).collect(),
            pixel: self.pixel.map(f),
            channel: self.channel.map(f),
        }
    }

    pub fn items(&self) -> Vec<&T> {
        let mut out: Vec<&T> = self.levels.iter().flat_map(|a| a.items()).collect();
        out.extend(self.pixel.items());
        out.extend(self.channel.items());
        out
    }

    pub fn items_mut(&mut self) -> Vec<&mut T> {
        let mut out: Vec<&mut T> = self.levels.iter_mut().flat_map(|a| a.items_mut()).collect();
        out.extend(self.pixel.items_mut());
        out.extend(self.channel.items_mut());
        out
    }
}

/// Opinion feature plus every attention matrix computed on the way.
pub struct MalTrace<'t> {
    pub opinion: Var<'t>,
    pub attention: Vec<Var<'t>>,
}

pub fn mal_forward<'t>(features: &[Var<'t>], w: &MalWeights<Var<'t>>) -> Result<Var<'t>> {
    Ok(mal_forward_traced(features, w)?.opinion)
}

pub fn mal_forward_traced<'t>(features: &[Var<'t>], w: &MalWeights<Var<'t>>) -> Result<MalTrace<'t>> {
    let n = w.levels.len();
    if features.len() != n || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "MAL expects {n} feature levels, got {}",
            features.len()
        )));
    }
    let first = features[0].shape();
    if first.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "MAL features must be C x D, got {first:?}"
        )));
    }
    let (c, d) = (first[0], first[1]);
    let mut attention = Vec::new();

    let mut per_level = Vec::with_capacity(n);
    for (f, sa) in features.iter().zip(&w.levels) {
        if f.shape() != first {
            return Err(Error::ShapeMismatch {
                op: "mal_forward",
                lhs: first.clone(),
                rhs: f.shape(),
            });
        }
        let out = self_attention_with_weights(*f, sa)?;
        attention.push(out.weights);
        per_level.push(out.output.reshape(&[c, d, 1])?);
    }
    let stacked = concat(&per_level, 2)?; // C x D x N

    let pixel = self_attention_with_weights(stacked.reshape(&[c, d * n])?, &w.pixel)?;
    attention.push(pixel.weights);
    let pixel = pixel.output.reshape(&[c, d, n])?;

    let channel_in = stacked.permute(&[1, 0, 2])?.reshape(&[d * c, n])?;
    let project = |m: Var<'t>| -> Result<Var<'t>> { channel_in.matmul(m)?.reshape(&[d, c * n]) };
    let q = project(w.channel.query)?;
    let k = project(w.channel.key)?;
    let v = project(w.channel.value)?;
    let weights = q
        .matmul(k.t()?)?
        .scale(1.0 / ((c * n) as f64).sqrt())
        .softmax(1)?;
    attention.push(weights);
    let channel = weights
        .matmul(v)?
        .reshape(&[d, c, n])?
        .permute(&[1, 0, 2])?;

    let opinion = pixel.add(channel)?.mean_axis(0)?;
    Ok(MalTrace { opinion, attention })
}

/// Cosine of the angle between two flattened weight sets.
pub fn mal_weight_cosine_similarity(a: &MalWeights, b: &MalWeights) -> Result<f64> {
    let (ia, ib) = (a.items(), b.items());
    if ia.len() != ib.len() || ia.iter().zip(&ib).any(|(x, y)| x.shape() != y.shape()) {
        return Err(Error::InvalidArgument(
            "MAL weight sets have different architectures".into(),
        ));
    }
    let (fa, fb) = (a.flatten(), b.flatten());
    let dot: f64 = fa.iter().zip(&fb).map(|(x, y)| x * y).sum();
    let na = fa.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = fb.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("zero weight vector".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
