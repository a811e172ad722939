use gmc_core::monet::{
    mal_forward, mal_forward_traced, mal_weight_cosine_similarity, mal_weights_for,
    self_attention_with_weights, vit_stub_features, Attention, MoNet, MoNetConfig,
};
use gmc_core::numgrad::{finite_difference_check_many, Tape, Tensor};
use gmc_core::verify::monet_sweep_configs;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn small() -> MoNetConfig {
    MoNetConfig {
        tokens: 5,
        input_dim: 3,
        embed_dim: 4,
        levels: 3,
        mals: 2,
        head_channels: [3, 2, 2],
        head_hidden: 3,
        ..MoNetConfig::default()
    }
}

fn permute_rows(t: &Tensor, perm: &[usize]) -> Tensor {
    let cols = t.shape()[1];
    let data = perm.iter().flat_map(|&r| t.data()[r * cols..(r + 1) * cols].to_vec()).collect();
    Tensor::new(t.shape().to_vec(), data).unwrap()
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

#[test]
fn shape_contracts_across_sweep() {
    let configs = monet_sweep_configs();
    assert_eq!(configs.len(), 40);
    for (i, cfg) in configs.iter().enumerate() {
        let net = MoNet::new(cfg.clone(), i as u64).unwrap();
        let tape = Tape::new();
        let w = net.bind(&tape);
        let x = random(&[cfg.tokens, cfg.input_dim], &mut ChaCha8Rng::seed_from_u64(i as u64));
        let input = tape.constant(&x);
        let feats = net.backbone.features(input).unwrap();
        assert_eq!(feats.len(), cfg.levels);
        assert!(feats.iter().all(|f| f.shape() == [cfg.tokens, cfg.embed_dim]));
        let opinions = net.opinions(&w, input).unwrap();
        assert_eq!(opinions.len(), cfg.mals);
        assert!(opinions.iter().all(|o| o.shape() == [cfg.embed_dim, cfg.levels]));
        let score = net.forward(&w, input).unwrap();
        assert_eq!(score.shape(), vec![1]);
        assert!(score.item().is_finite());
        assert_eq!(net.score(&x).unwrap(), score.item());
    }
}

#[test]
fn forward_rejects_bad_shapes() {
    let cfg = small();
    let net = MoNet::new(cfg.clone(), 1).unwrap();
    assert!(net.score(&Tensor::zeros(&[cfg.tokens + 1, cfg.input_dim])).is_err());
    assert!(vit_stub_features(&Tensor::zeros(&[cfg.tokens, cfg.input_dim + 1]), &cfg, 0).is_err());
    assert!(MoNet::new(MoNetConfig { levels: 0, ..cfg.clone() }, 0).is_err());

    let tape = Tape::new();
    let w = mal_weights_for(&cfg, 0, 0).map(&mut |t| tape.constant(t));
    let f = tape.constant(&Tensor::zeros(&[cfg.tokens, cfg.embed_dim]));
    assert!(mal_forward(&[f, f], &w).is_err());
    let wrong = tape.constant(&Tensor::zeros(&[cfg.tokens, cfg.embed_dim + 1]));
    assert!(mal_forward(&[f, f, wrong], &w).is_err());
}

#[test]
fn stub_backbone_is_deterministic_and_linear() {
    let cfg = MoNetConfig::default();
    let x = random(&[cfg.tokens, cfg.input_dim], &mut ChaCha8Rng::seed_from_u64(3));
    let a = vit_stub_features(&x, &cfg, 11).unwrap();
    assert_eq!(a.len(), 4);
    assert_eq!(a, vit_stub_features(&x, &cfg, 11).unwrap());
    assert_ne!(a, vit_stub_features(&x, &cfg, 12).unwrap());
    let zero = vit_stub_features(&Tensor::zeros(&[cfg.tokens, cfg.input_dim]), &cfg, 11).unwrap();
    assert!(zero.iter().all(|f| f.data().iter().all(|v| *v == 0.0)));
}

#[test]
fn scores_are_deterministic_and_seed_dependent() {
    let cfg = MoNetConfig::default();
    let x = random(&[cfg.tokens, cfg.input_dim], &mut ChaCha8Rng::seed_from_u64(9));
    let a = MoNet::new(cfg.clone(), 5).unwrap().score(&x).unwrap();
    assert_eq!(a.to_bits(), MoNet::new(cfg.clone(), 5).unwrap().score(&x).unwrap().to_bits());
    assert_ne!(a, MoNet::new(cfg, 6).unwrap().score(&x).unwrap());
}

#[test]
fn end_to_end_gradient() {
    let cfg = small();
    let net = MoNet::new(cfg.clone(), 21).unwrap();
    let mut inputs = net.parameters();
    inputs.push(random(&[cfg.tokens, cfg.input_dim], &mut ChaCha8Rng::seed_from_u64(4)));
    let err = finite_difference_check_many(
        |_, vars| {
            let (x, params) = vars.split_last().unwrap();
            let mut it = params.iter();
            let w = net.params.map(&mut |_| *it.next().unwrap());
            Ok(net.forward(&w, *x)?.sum())
        },
        &inputs,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn cosine_similarity_examples() {
    let cfg = MoNetConfig::default();
    let w = mal_weights_for(&cfg, 0, 0);
    assert!((mal_weight_cosine_similarity(&w, &w).unwrap() - 1.0).abs() < 1e-12);
    let neg = w.map(&mut |t| t.map(|v| -v));
    assert!((mal_weight_cosine_similarity(&w, &neg).unwrap() + 1.0).abs() < 1e-12);
    let other = mal_weights_for(&MoNetConfig { levels: 2, ..cfg }, 0, 0);
    assert!(mal_weight_cosine_similarity(&w, &other).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mal_is_invariant_to_token_order(seed in any::<u64>()) {
        let cfg = small();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feats: Vec<Tensor> = (0..cfg.levels).map(|_| random(&[cfg.tokens, cfg.embed_dim], &mut rng)).collect();
        let perm = shuffled(cfg.tokens, seed);
        let weights = mal_weights_for(&cfg, seed, 0);

        let run = |fs: &[Tensor]| {
            let tape = Tape::new();
            let w = weights.map(&mut |t| tape.constant(t));
            let vars: Vec<_> = fs.iter().map(|f| tape.constant(f)).collect();
            let out = mal_forward_traced(&vars, &w).unwrap();
            let rows_ok = out.attention.iter().all(|a| {
                let v = a.value();
                v.data().chunks(v.shape()[1]).all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-12)
            });
            let opinion = out.opinion.value().clone();
            (opinion, rows_ok)
        };
        let (base, rows_ok) = run(&feats);
        prop_assert!(rows_ok);
        prop_assert_eq!(base.shape(), &[cfg.embed_dim, cfg.levels]);
        let moved: Vec<Tensor> = feats.iter().map(|f| permute_rows(f, &perm)).collect();
        let (other, _) = run(&moved);
        for (a, b) in base.data().iter().zip(other.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mal_gradient(seed in any::<u64>()) {
        let cfg = MoNetConfig { tokens: 3, embed_dim: 3, levels: 2, ..small() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = mal_weights_for(&cfg, seed, 1);
        let mut inputs: Vec<Tensor> = (0..cfg.levels).map(|_| random(&[cfg.tokens, cfg.embed_dim], &mut rng)).collect();
        inputs.extend(weights.items().into_iter().cloned());
        let err = finite_difference_check_many(
            |tape, vars| {
                let (feats, params) = vars.split_at(cfg.levels);
                let mut it = params.iter();
                let w = weights.map(&mut |_| *it.next().unwrap());
                let out = mal_forward(feats, &w)?;
                let mix = tape.constant(&Tensor::new(out.shape(), (0..out.numel()).map(|i| 1.0 + i as f64 * 0.37).collect())?);
                Ok(out.mul(mix)?.sum())
            },
            &inputs,
            1e-6,
        )
        .unwrap();
        prop_assert!(err < 1e-6, "{}", err);
    }

    #[test]
    fn self_attention_properties(seed in any::<u64>(), t in 1usize..7) {
        let e = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = Attention {
            query: random(&[e, e], &mut rng),
            key: random(&[e, e], &mut rng),
            value: random(&[e, e], &mut rng),
        };
        let x = random(&[t, e], &mut rng);
        let perm = shuffled(t, seed);
        let tape = Tape::new();
        let w = weights.map(&mut |m| tape.constant(m));
        let out = self_attention_with_weights(tape.constant(&x), &w).unwrap();
        let probs = out.weights.value().clone();
        for row in probs.data().chunks(t) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let y = out.output.value().clone();
        let moved = self_attention_with_weights(tape.constant(&permute_rows(&x, &perm)), &w).unwrap();
        let expected = permute_rows(&y, &perm);
        for (a, b) in moved.output.value().data().iter().zip(expected.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        if t == 1 {
            let v = tape.constant(&x).matmul(w.value).unwrap();
            prop_assert_eq!(y.data().to_vec(), v.value().data().to_vec());
        }
    }
}
