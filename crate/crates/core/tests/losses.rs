use gmc_core::gccloss::{
    gmc_loss, mse_loss, pgcc_loss, pgcc_mse_identity_residual, sgcc_loss, LossConfig,
};
use gmc_core::numgrad::{finite_difference_check, Tape, Tensor};
use gmc_core::scorequeue::{QueueSnapshot, ScoreQueue};
use proptest::prelude::*;

fn non_constant(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter("spread", |v| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() > 1e-8
    })
}

fn pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (non_constant(n), non_constant(n))
}

fn snapshot(pred: &[f64], gt: &[f64]) -> QueueSnapshot {
    let mut q = ScoreQueue::new(pred.len().max(1));
    q.push_batch(pred, gt).unwrap();
    q.snapshot()
}

fn values(p: &[f64], g: &[f64]) -> (f64, f64, f64) {
    let tape = Tape::new();
    let pv = tape.param(&Tensor::vector(p.to_vec()));
    let gv = tape.constant(&Tensor::vector(g.to_vec()));
    (
        mse_loss(pv, gv).unwrap().item(),
        pgcc_loss(pv, gv).unwrap().loss.item(),
        sgcc_loss(pv, gv).unwrap().loss.item(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mse_identity_holds(n in prop::sample::select(vec![2usize, 8, 64, 256]), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || (0..n).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
        let (p, g) = (draw(), draw());
        prop_assume!(p[0] != p[n - 1] && g[0] != g[n - 1]);
        prop_assert!(pgcc_mse_identity_residual(&p, &g).unwrap() < 1e-10);
    }

    #[test]
    fn loss_ranges((p, g) in pair(9), queue in pair(6), w in (0.0f64..2.0, 0.0f64..2.0, 0.1f64..3.0)) {
        let (_, pg, sg) = values(&p, &g);
        prop_assert!((0.0..=2.0).contains(&pg));
        prop_assert!((0.0..=2.0).contains(&sg));
        let cfg = LossConfig { alpha: w.0, beta: w.1, gamma: w.2 };
        let tape = Tape::new();
        let out = gmc_loss(
            tape.param(&Tensor::vector(p)),
            tape.constant(&Tensor::vector(g)),
            &snapshot(&queue.0, &queue.1),
            &cfg,
        )
        .unwrap();
        prop_assert!(!out.gcc_skipped);
        prop_assert!(out.factor >= cfg.gamma - 1e-12);
        prop_assert!(out.factor <= cfg.gamma + 2.0 * cfg.alpha + 2.0 * cfg.beta + 1e-12);
    }

    #[test]
    fn correlation_terms_are_affine_invariant((p, g) in pair(10), a in 0.01f64..50.0, c in -20.0f64..20.0) {
        let (_, pg, sg) = values(&p, &g);
        let moved: Vec<f64> = p.iter().map(|v| a * v + c).collect();
        let (_, pg2, sg2) = values(&moved, &g);
        prop_assert!((pg - pg2).abs() < 1e-10);
        prop_assert!((sg - sg2).abs() < 1e-10);
    }

    #[test]
    fn gradients_match_finite_differences((p, g) in pair(7), queue in pair(5)) {
        let gt = Tensor::vector(g.clone());
        let x = Tensor::vector(p);
        let snap = snapshot(&queue.0, &queue.1);
        let cfg = LossConfig::default();
        let errs = [
            finite_difference_check(|t, v| mse_loss(v, t.constant(&gt)), &x, 1e-6).unwrap(),
            finite_difference_check(|t, v| Ok(pgcc_loss(v, t.constant(&gt))?.loss), &x, 1e-6).unwrap(),
            finite_difference_check(|t, v| Ok(sgcc_loss(v, t.constant(&gt))?.loss), &x, 1e-6).unwrap(),
            finite_difference_check(|t, v| Ok(gmc_loss(v, t.constant(&gt), &snap, &cfg)?.loss), &x, 1e-6).unwrap(),
            finite_difference_check(
                |t, v| Ok(gmc_loss(v, t.constant(&gt), &QueueSnapshot::default(), &cfg)?.loss),
                &x,
                1e-6,
            )
            .unwrap(),
        ];
        for e in errs {
            prop_assert!(e < 1e-6, "{:?}", errs);
        }
    }

    #[test]
    fn perfect_agreement_is_zero(p in non_constant(8), queue in pair(4)) {
        let (m, pg, sg) = values(&p, &p);
        prop_assert_eq!(m, 0.0);
        prop_assert!(pg.abs() < 1e-12 && sg.abs() < 1e-12);
        let tape = Tape::new();
        let pv = tape.param(&Tensor::vector(p.clone()));
        let out = gmc_loss(pv, tape.constant(&Tensor::vector(p.clone())), &snapshot(&queue.0, &queue.1), &LossConfig::default()).unwrap();
        prop_assert_eq!(out.loss.item(), 0.0);
        let grad = tape.backward(out.loss).unwrap().wrt(pv);
        prop_assert!(grad.data().iter().all(|v| *v == 0.0));
        prop_assert!(pgcc_mse_identity_residual(&p, &p).unwrap() < 1e-15);
    }
}

#[test]
fn worked_examples() {
    let p = [1.0, 2.0, 3.0];
    let g = [1.0, 3.0, 2.0];
    let (m, pg, sg) = values(&p, &g);
    assert!((m - 2.0 / 3.0).abs() < 1e-15);
    assert!((pg - 0.5).abs() < 1e-12);
    assert!((sg - 0.5).abs() < 1e-12);

    let neg: Vec<f64> = p.iter().map(|v| -v).collect();
    let (_, pg, sg) = values(&p, &neg);
    assert!((pg - 2.0).abs() < 1e-12 && (sg - 2.0).abs() < 1e-12);

    let tape = Tape::new();
    let out = gmc_loss(
        tape.param(&Tensor::vector(p.to_vec())),
        tape.constant(&Tensor::vector(g.to_vec())),
        &QueueSnapshot::default(),
        &LossConfig::default(),
    )
    .unwrap();
    assert!((out.loss.item() - 1.0).abs() < 1e-10);
}

#[test]
fn queue_values_carry_no_gradient() {
    let tape = Tape::new();
    let qp = tape.param(&Tensor::vector(vec![0.2, 0.9, 0.4]));
    let snap = snapshot(&qp.value().data().to_vec(), &[0.1, 0.8, 0.6]);
    let p = tape.param(&Tensor::vector(vec![0.3, 0.5]));
    let out = gmc_loss(p, tape.constant(&Tensor::vector(vec![0.7, 0.2])), &snap, &LossConfig::default()).unwrap();
    let grads = tape.backward(out.loss).unwrap();
    assert!(!grads.reached(qp));
    assert!(grads.wrt(qp).data().iter().all(|v| *v == 0.0));
    assert!(grads.wrt(p).data().iter().any(|v| *v != 0.0));
}

#[test]
fn degenerate_inputs_fall_back() {
    let tape = Tape::new();
    let p = tape.param(&Tensor::vector(vec![0.4; 4]));
    let g = tape.constant(&Tensor::vector(vec![0.1, 0.2, 0.3, 0.4]));
    assert!(pgcc_loss(p, g).unwrap().skipped);
    assert!(sgcc_loss(p, g).unwrap().skipped);
    let cfg = LossConfig { alpha: 0.5, beta: 0.5, gamma: 2.0 };
    let out = gmc_loss(p, g, &QueueSnapshot::default(), &cfg).unwrap();
    assert!(out.gcc_skipped);
    assert_eq!(out.factor, 2.0);
    assert!((out.loss.item() - 2.0 * mse_loss(p, g).unwrap().item()).abs() < 1e-15);

    let one = tape.param(&Tensor::vector(vec![0.3]));
    let out = gmc_loss(one, tape.constant(&Tensor::vector(vec![0.5])), &QueueSnapshot::default(), &cfg).unwrap();
    assert!(out.gcc_skipped);
    assert!((out.loss.item() - 2.0 * 0.04).abs() < 1e-15);

    let empty = tape.param(&Tensor::vector(vec![]));
    assert!(gmc_loss(empty, empty, &QueueSnapshot::default(), &cfg).is_err());
    assert!(pgcc_mse_identity_residual(&[1.0; 3], &[1.0, 2.0, 3.0]).is_err());
}
