use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{self, derive_seed, Rng};
use crate::numgrad::{concat, Tape, Tensor, Var};

use super::attention::{self_attention, Attention};
use super::mal::{mal_forward, MalWeights};

/// Toy-scale network dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoNetConfig {
    /// Token count C.
    pub tokens: usize,
    /// Width of each input token.
    pub input_dim: usize,
    /// Embedding width D.
    pub embed_dim: usize,
    /// Number of backbone levels N fed to every MAL.
    pub levels: usize,
    /// Number of MALs M.
    pub mals: usize,
    /// `false` replaces all MALs by plain average pooling of the features.
    pub with_mal: bool,
    /// Output channels of the three head convolutions (kernels 5, 3, 3).
    pub head_channels: [usize; 3],
    /// Hidden width of the first fully connected layer.
    pub head_hidden: usize,
}

impl Default for MoNetConfig {
    fn default() -> Self {
        Self {
            tokens: 16,
            input_dim: 8,
            embed_dim: 8,
            levels: 4,
            mals: 3,
            with_mal: true,
            head_channels: [8, 4, 2],
            head_hidden: 8,
        }
    }
}

impl MoNetConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.tokens,
            self.input_dim,
            self.embed_dim,
            self.levels,
            self.mals,
            self.head_hidden,
            self.head_channels[0],
            self.head_channels[1],
            self.head_channels[2],
        ];
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "all MoNet dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Width of the fused feature entering the transformer block.
    fn fused_width(&self) -> usize {
        if self.with_mal {
            self.mals
        } else {
            self.embed_dim
        }
    }
}

/// Frozen per-level random projections standing in for a pretrained backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct StubBackbone {
    pub projections: Vec<Tensor>,
}

impl StubBackbone {
    pub fn new(cfg: &MoNetConfig, seed: u64) -> Self {
        let mut rng = init::rng(seed);
        Self {
            projections: (0..cfg.levels)
                .map(|_| init::linear(cfg.input_dim, cfg.embed_dim, &mut rng))
                .collect(),
        }
    }

    /// One `C x D` feature map per level.
    pub fn features<'t>(&self, input: Var<'t>) -> Result<Vec<Var<'t>>> {
        let tape = input.tape();
        self.projections
            .iter()
            .map(|w| input.matmul(tape.constant(w)))
            .collect()
    }
}

/// Backbone features for a `C x D_in` input with the stub seeded by `seed`.
pub fn vit_stub_features(input: &Tensor, cfg: &MoNetConfig, seed: u64) -> Result<Vec<Tensor>> {
    if input.shape() != [cfg.tokens, cfg.input_dim] {
        return Err(Error::ShapeMismatch {
            op: "vit_stub_features",
            lhs: input.shape().to_vec(),
            rhs: vec![cfg.tokens, cfg.input_dim],
        });
    }
    let tape = Tape::new();
    let x = tape.constant(input);
    let feats = StubBackbone::new(cfg, seed).features(x)?;
    Ok(feats.iter().map(|f| f.value().clone()).collect())
}

/// Self-attention plus a two-layer feed-forward, both residual.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights<T = Tensor> {
    pub attention: Attention<T>,
    pub ff_in: T,
    pub ff_in_bias: T,
    pub ff_out: T,
    pub ff_out_bias: T,
}

/// Three 1-D convolutions over the level axis then two dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights<T = Tensor> {
    /// (weight `(k * c_in) x c_out`, bias `c_out`) for kernels 5, 3, 3.
    pub convs: Vec<(T, T)>,
    pub fc1: (T, T),
    pub fc2: (T, T),
}

pub const HEAD_KERNELS: [usize; 3] = [5, 3, 3];

/// Every trainable tensor of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MoNetParams<T = Tensor> {
    pub mals: Vec<MalWeights<T>>,
    /// The MAL that fuses the M opinion features.
    pub fusion: Option<MalWeights<T>>,
    pub block: BlockWeights<T>,
    pub head: HeadWeights<T>,
}

impl<T> MoNetParams<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> MoNetParams<U> {
        MoNetParams {
            mals: self.mals.iter().map(|m| m.map(f)).collect(),
            fusion: self.fusion.as_ref().map(|m| m.map(f)),
            block: BlockWeights {
                attention: self.block.attention.map(f),
                ff_in: f(&self.block.ff_in),
                ff_in_bias: f(&self.block.ff_in_bias),
                ff_out: f(&self.block.ff_out),
                ff_out_bias: f(&self.block.ff_out_bias),
            },
            head: HeadWeights {
                convs: self.head.convs.iter().map(|(w, b)| (f(w), f(b))).collect(),
                fc1: (f(&self.head.fc1.0), f(&self.head.fc1.1)),
                fc2: (f(&self.head.fc2.0), f(&self.head.fc2.1)),
            },
        }
    }

    pub fn items(&self) -> Vec<&T> {
        let mut out: Vec<&T> = self.mals.iter().flat_map(|m| m.items()).collect();
        if let Some(f) = &self.fusion {
            out.extend(f.items());
        }
        out.extend(self.block.attention.items());
        out.extend([
            &self.block.ff_in,
            &self.block.ff_in_bias,
            &self.block.ff_out,
            &self.block.ff_out_bias,
        ]);
        for (w, b) in &self.head.convs {
            out.extend([w, b]);
        }
        out.extend([&self.head.fc1.0, &self.head.fc1.1, &self.head.fc2.0, &self.head.fc2.1]);
        out
    }

    pub fn items_mut(&mut self) -> Vec<&mut T> {
        let mut out: Vec<&mut T> = self.mals.iter_mut().flat_map(|m| m.items_mut()).collect();
        if let Some(f) = &mut self.fusion {
            out.extend(f.items_mut());
        }
        out.extend(self.block.attention.items_mut());
        out.extend([
            &mut self.block.ff_in,
            &mut self.block.ff_in_bias,
            &mut self.block.ff_out,
            &mut self.block.ff_out_bias,
        ]);
        let HeadWeights { convs, fc1, fc2 } = &mut self.head;
        for (w, b) in convs {
            out.extend([w, b]);
        }
        out.extend([&mut fc1.0, &mut fc1.1, &mut fc2.0, &mut fc2.1]);
        out
    }
}

impl MoNetParams<Tensor> {
    pub fn random(cfg: &MoNetConfig, seed: u64) -> Self {
        let mals = if cfg.with_mal {
            (0..cfg.mals)
                .map(|i| {
                    let mut rng = init::rng(derive_seed(seed, 100 + i as u64));
                    MalWeights::random(cfg.embed_dim, cfg.levels, &mut rng)
                })
                .collect()
        } else {
            Vec::new()
        };
        // Fusion MAL: D tokens of width N, one slot per opinion feature.
        let fusion = cfg.with_mal.then(|| {
            let mut rng = init::rng(derive_seed(seed, 99));
            MalWeights::random(cfg.levels, cfg.mals, &mut rng)
        });
        let mut rng = init::rng(derive_seed(seed, 98));
        let width = cfg.fused_width();
        let block = BlockWeights {
            attention: Attention::random(width, &mut rng),
            ff_in: init::linear(width, 2 * width, &mut rng),
            ff_in_bias: Tensor::zeros(&[2 * width]),
            ff_out: init::linear(2 * width, width, &mut rng),
            ff_out_bias: Tensor::zeros(&[width]),
        };
        let mut c_in = width;
        let mut convs = Vec::new();
        for (&k, &c_out) in HEAD_KERNELS.iter().zip(&cfg.head_channels) {
            convs.push((init::linear(k * c_in, c_out, &mut rng), Tensor::zeros(&[c_out])));
            c_in = c_out;
        }
        let flat = cfg.levels * cfg.head_channels[2];
        let head = HeadWeights {
            convs,
            fc1: (
                init::linear(flat, cfg.head_hidden, &mut rng),
                Tensor::zeros(&[cfg.head_hidden]),
            ),
            fc2: (init::linear(cfg.head_hidden, 1, &mut rng), Tensor::zeros(&[1])),
        };
        Self {
            mals,
            fusion,
            block,
            head,
        }
    }
}

/// `x (T x E) + 1 b^T`.
fn add_bias<'t>(x: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
    let rows = x.shape()[0];
    let ones = x.tape().constant(&Tensor::ones(&[rows, 1]));
    let cols = b.numel();
    x.add(ones.matmul(b.reshape(&[1, cols])?)?)
}

/// Same-padded 1-D convolution of `x (L x c_in)` along L.
fn conv1d<'t>(x: Var<'t>, w: Var<'t>, b: Var<'t>, kernel: usize) -> Result<Var<'t>> {
    let shape = x.shape();
    let (len, c_in) = (shape[0], shape[1]);
    let pad = kernel / 2;
    let mut index = Vec::with_capacity(len * kernel * c_in);
    for l in 0..len {
        for t in 0..kernel {
            let src = (l + t).checked_sub(pad).filter(|&s| s < len);
            for c in 0..c_in {
                index.push(src.map(|s| s * c_in + c));
            }
        }
    }
    let cols = x.gather(index, &[len, kernel * c_in])?;
    add_bias(cols.matmul(w)?, b)
}

/// Toy mean-opinion network with a frozen stub backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct MoNet {
    pub cfg: MoNetConfig,
    pub backbone: StubBackbone,
    pub params: MoNetParams,
}

impl MoNet {
    pub fn new(cfg: MoNetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            backbone: StubBackbone::new(&cfg, derive_seed(seed, 0)),
            params: MoNetParams::random(&cfg, seed),
            cfg,
        })
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        self.params.items().into_iter().cloned().collect()
    }

    pub fn set_parameters(&mut self, values: &[Tensor]) -> Result<()> {
        let mut slots = self.params.items_mut();
        if slots.len() != values.len() {
            return Err(Error::LengthMismatch(slots.len(), values.len()));
        }
        for (slot, v) in slots.iter_mut().zip(values) {
            if slot.shape() != v.shape() {
                return Err(Error::ShapeMismatch {
                    op: "set_parameters",
                    lhs: slot.shape().to_vec(),
                    rhs: v.shape().to_vec(),
                });
            }
            **slot = v.clone();
        }
        Ok(())
    }

    /// Record every parameter on `tape` as trainable.
    pub fn bind<'t>(&self, tape: &'t Tape) -> MoNetParams<Var<'t>> {
        self.params.map(&mut |t| tape.param(t))
    }

    /// Opinion features of every MAL for one input.
    pub fn opinions<'t>(&self, w: &MoNetParams<Var<'t>>, input: Var<'t>) -> Result<Vec<Var<'t>>> {
        let feats = self.backbone.features(input)?;
        w.mals.iter().map(|m| mal_forward(&feats, m)).collect()
    }

    /// Quality score (shape `[1]`) for a `C x D_in` input.
    pub fn forward<'t>(&self, w: &MoNetParams<Var<'t>>, input: Var<'t>) -> Result<Var<'t>> {
        let cfg = &self.cfg;
        if input.shape() != [cfg.tokens, cfg.input_dim] {
            return Err(Error::ShapeMismatch {
                op: "monet_forward",
                lhs: input.shape(),
                rhs: vec![cfg.tokens, cfg.input_dim],
            });
        }
        if w.mals.len() != if cfg.with_mal { cfg.mals } else { 0 } {
            return Err(Error::InvalidArgument(format!(
                "expected {} MAL weight sets, got {}",
                cfg.mals,
                w.mals.len()
            )));
        }
        let (c, d, n) = (cfg.tokens, cfg.embed_dim, cfg.levels);

        // N x width
        let fused = match &w.fusion {
            Some(fusion) => {
                let opinions = self.opinions(w, input)?; // M x (D x N)
                mal_forward(&opinions, fusion)? // N x M
            }
            None => {
                let feats = self.backbone.features(input)?;
                let stacked: Vec<Var<'t>> = feats
                    .iter()
                    .map(|f| f.reshape(&[c, d, 1]))
                    .collect::<Result<_>>()?;
                concat(&stacked, 2)?.mean_axis(0)?.t()?
            }
        };

        let b = &w.block;
        let z = fused.add(self_attention(fused, &b.attention)?)?;
        let hidden = add_bias(z.matmul(b.ff_in)?, b.ff_in_bias)?.tanh();
        let z = z.add(add_bias(hidden.matmul(b.ff_out)?, b.ff_out_bias)?)?;

        let mut x = z;
        for ((wc, bc), &k) in w.head.convs.iter().zip(&HEAD_KERNELS) {
            x = conv1d(x, *wc, *bc, k)?.tanh();
        }
        let flat = x.reshape(&[1, n * cfg.head_channels[2]])?;
        let h = add_bias(flat.matmul(w.head.fc1.0)?, w.head.fc1.1)?.tanh();
        add_bias(h.matmul(w.head.fc2.0)?, w.head.fc2.1)?.reshape(&[1])
    }

    /// Scores for several inputs as one vector.
    pub fn forward_batch<'t>(
        &self,
        w: &MoNetParams<Var<'t>>,
        inputs: &[Var<'t>],
    ) -> Result<Var<'t>> {
        let scores: Vec<Var<'t>> = inputs
            .iter()
            .map(|x| self.forward(w, *x))
            .collect::<Result<_>>()?;
        concat(&scores, 0)
    }

    /// Inference without gradients.
    pub fn score(&self, input: &Tensor) -> Result<f64> {
        let tape = Tape::new();
        let w = self.params.map(&mut |t| tape.constant(t));
        Ok(self.forward(&w, tape.constant(input))?.item())
    }
}

/// Score of one input under `cfg` and explicit weights.
pub fn monet_forward(input: &Tensor, model: &MoNet) -> Result<f64> {
    model.score(input)
}

/// Random weights for an individual MAL, as the network would initialize
/// MAL number `index` under `seed`.
pub fn mal_weights_for(cfg: &MoNetConfig, seed: u64, index: usize) -> MalWeights {
    let mut rng: Rng = init::rng(derive_seed(seed, 100 + index as u64));
    MalWeights::random(cfg.embed_dim, cfg.levels, &mut rng)
}
