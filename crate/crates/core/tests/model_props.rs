use arrowtime::jko::fit_linear;
use arrowtime::model::{init_mlp, loss_and_grad, MlpModel, PairRegularizer};
use arrowtime::sampling::Minibatch;
use proptest::prelude::*;
use rand::Rng;

fn batch(dim: usize, values: &[f64]) -> Minibatch {
    let pairs: Vec<(&[f64], &[f64])> = values
        .chunks(2 * dim)
        .map(|c| (&c[..dim], &c[dim..]))
        .collect();
    Minibatch::from_pairs(dim, &pairs).unwrap()
}

fn flat(m: &MlpModel) -> Vec<f64> {
    m.tensors().flat_map(|t| t.iter().copied()).collect()
}

#[test]
fn gradient_matches_central_differences() {
    for (seed, reg, lambda) in [
        (1, PairRegularizer::Trajectory, 0.7),
        (2, PairRegularizer::None, 0.0),
        (3, PairRegularizer::Trajectory, 0.05),
    ] {
        let dim = 4;
        let mut rng = arrowtime::seed::rng(seed + 100);
        let mut model = init_mlp(dim, &[6, 5], seed);
        // nonzero biases keep pre-activations away from the ReLU kink
        for layer in &mut model.layers {
            layer.bias.iter_mut().for_each(|b| *b = rng.random_range(0.05..0.3));
        }
        let values: Vec<f64> = (0..5 * 2 * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = batch(dim, &values);
        let analytic = flat(&loss_and_grad(&model, &b, lambda, reg).unwrap().1);
        let sizes: Vec<usize> = model.tensors().map(<[f64]>::len).collect();
        let mut k = 0;
        for (ti, &len) in sizes.iter().enumerate() {
            for i in 0..len {
                let mut eval = |d: f64| {
                    model.tensors_mut().nth(ti).unwrap()[i] += d;
                    let l = loss_and_grad(&model, &b, lambda, reg).unwrap().0;
                    model.tensors_mut().nth(ti).unwrap()[i] -= d;
                    l
                };
                let fd = (eval(1e-6) - eval(-1e-6)) / 2e-6;
                let err = (fd - analytic[k]).abs() / analytic[k].abs().max(1e-4);
                assert!(err < 1e-5, "seed {seed} tensor {ti} entry {i}: {fd} vs {}", analytic[k]);
                k += 1;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_decomposes(seed in 0u64..1000, lambda in 0.0f64..2.0, values in prop::collection::vec(-2.0f64..2.0, 24)) {
        let model = init_mlp(3, &[5], seed);
        let b = batch(3, &values);
        let h = model.forward(&values).unwrap();
        let dh: Vec<f64> = h.chunks(2).map(|p| p[1] - p[0]).collect();
        let n = dh.len() as f64;
        let gain = dh.iter().sum::<f64>() / n;
        let sq = dh.iter().map(|d| d * d).sum::<f64>() / n;
        let (reg, _) = loss_and_grad(&model, &b, lambda, PairRegularizer::Trajectory).unwrap();
        let (plain, _) = loss_and_grad(&model, &b, lambda, PairRegularizer::None).unwrap();
        prop_assert!((plain + gain).abs() < 1e-10);
        prop_assert!((reg - (-gain + lambda * sq)).abs() < 1e-10);
    }

    #[test]
    fn output_shift_changes_nothing(seed in 0u64..1000, shift in -50.0f64..50.0, values in prop::collection::vec(-2.0f64..2.0, 24)) {
        let model = init_mlp(3, &[5, 4], seed);
        let mut shifted = model.clone();
        shifted.layers.last_mut().unwrap().bias[0] += shift;
        let b = batch(3, &values);
        let (l0, g0) = loss_and_grad(&model, &b, 0.5, PairRegularizer::Trajectory).unwrap();
        let (l1, g1) = loss_and_grad(&shifted, &b, 0.5, PairRegularizer::Trajectory).unwrap();
        prop_assert!((l0 - l1).abs() < 1e-9);
        for (a, c) in flat(&g0).iter().zip(flat(&g1)) {
            prop_assert!((a - c).abs() < 1e-9);
        }
        prop_assert!(g0.layers.last().unwrap().bias[0].abs() < 1e-12);
    }

    #[test]
    fn fit_linear_beats_grid(pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..20)) {
        let (h, f): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let (w, b) = fit_linear(&h, &f).unwrap();
        prop_assert!(w >= 0.0);
        let sse = |w: f64, b: f64| h.iter().zip(&f).map(|(x, y)| (w * x + b - y).powi(2)).sum::<f64>();
        let best = sse(w, b);
        for i in 0..=40 {
            for j in 0..=40 {
                let (gw, gb) = (i as f64 * 0.1, -10.0 + j as f64 * 0.5);
                prop_assert!(best <= sse(gw, gb) + 1e-9);
            }
        }
    }
}
