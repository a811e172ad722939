use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{self, derive_seed};
use crate::monet::{MoNet, MoNetConfig};
use crate::numgrad::{concat, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Monet,
}

/// ReLU multilayer perceptron with a linear scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// (weight `in x out`, bias `out`) per layer.
    pub layers: Vec<(Tensor, Tensor)>,
}

impl Mlp {
    pub fn new(input_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = init::rng(seed);
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| (init::linear(w[0], w[1], &mut rng), Tensor::zeros(&[w[1]])))
            .collect();
        Self { layers }
    }

    fn forward<'t>(&self, params: &[Var<'t>], x: Var<'t>) -> Result<Var<'t>> {
        let tape = x.tape();
        let rows = x.shape()[0];
        let ones = tape.constant(&Tensor::ones(&[rows, 1]));
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, pair) in params.chunks(2).enumerate() {
            let (w, b) = (pair[0], pair[1]);
            let width = b.numel();
            h = h.matmul(w)?.add(ones.matmul(b.reshape(&[1, width])?)?)?;
            if i < last {
                h = h.relu();
            }
        }
        h.reshape(&[rows])
    }
}

/// Any model the trainer can fit.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(Mlp),
    MoNet(MoNet),
}

impl Model {
    pub fn build(
        kind: ModelKind,
        input_dim: usize,
        mlp_hidden: &[usize],
        monet: &MoNetConfig,
        seed: u64,
    ) -> Result<Self> {
        let seed = derive_seed(seed, 7);
        match kind {
            ModelKind::Mlp => Ok(Self::Mlp(Mlp::new(input_dim, mlp_hidden, seed))),
            ModelKind::Monet => {
                if monet.tokens * monet.input_dim != input_dim {
                    return Err(Error::InvalidArgument(format!(
                        "MoNet expects {} x {} = {} features per sample, data has {input_dim}",
                        monet.tokens,
                        monet.input_dim,
                        monet.tokens * monet.input_dim
                    )));
                }
                Ok(Self::MoNet(MoNet::new(monet.clone(), seed)?))
            }
        }
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        match self {
            Self::Mlp(m) => m
                .layers
                .iter()
                .flat_map(|(w, b)| [w.clone(), b.clone()])
                .collect(),
            Self::MoNet(m) => m.parameters(),
        }
    }

    pub fn set_parameters(&mut self, values: &[Tensor]) -> Result<()> {
        match self {
            Self::Mlp(m) => {
                if values.len() != 2 * m.layers.len() {
                    return Err(Error::LengthMismatch(2 * m.layers.len(), values.len()));
                }
                for (layer, pair) in m.layers.iter_mut().zip(values.chunks(2)) {
                    layer.0 = pair[0].clone();
                    layer.1 = pair[1].clone();
                }
                Ok(())
            }
            Self::MoNet(m) => m.set_parameters(values),
        }
    }

    /// Scores for the rows of `x` (`batch x d`).
    pub fn forward<'t>(&self, params: &[Var<'t>], x: &Tensor) -> Result<Var<'t>> {
        let tape = params
            .first()
            .ok_or_else(|| Error::InvalidArgument("model without parameters".into()))?
            .tape();
        match self {
            Self::Mlp(m) => m.forward(params, tape.constant(x)),
            Self::MoNet(m) => {
                let mut it = params.iter();
                let w = m.params.map(&mut |_| *it.next().expect("parameter count"));
                let (rows, d) = (x.shape()[0], x.shape()[1]);
                let inputs: Vec<Var<'t>> = (0..rows)
                    .map(|r| {
                        let t = Tensor::new(
                            vec![m.cfg.tokens, m.cfg.input_dim],
                            x.data()[r * d..(r + 1) * d].to_vec(),
                        )?;
                        Ok(tape.constant(&t))
                    })
                    .collect::<Result<_>>()?;
                let scores: Vec<Var<'t>> = inputs
                    .iter()
                    .map(|i| m.forward(&w, *i))
                    .collect::<Result<_>>()?;
                concat(&scores, 0)
            }
        }
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
        let tape = Tape::new();
        let params: Vec<Var<'_>> = self.parameters().iter().map(|p| tape.constant(p)).collect();
        let out = self.forward(&params, x)?;
        let v = out.value().data().to_vec();
        Ok(v)
    }
}
