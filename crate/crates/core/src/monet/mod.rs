//! Toy-scale mean-opinion network.
//!
//! A frozen random projection stands in for the pretrained backbone; M
//! multi-view attention modules each turn the N level features into an opinion
//! feature, a further MAL fuses them, and a small transformer/conv/dense head
//! regresses the quality score.

mod attention;
mod mal;
mod model;

pub use attention::{self_attention, self_attention_with_weights, Attention, AttentionOutput};
pub use mal::{mal_forward, mal_forward_traced, mal_weight_cosine_similarity, MalTrace, MalWeights};
pub use model::{
    mal_weights_for, monet_forward, vit_stub_features, BlockWeights, HeadWeights, MoNet,
    MoNetConfig, MoNetParams, StubBackbone, HEAD_KERNELS,
};
