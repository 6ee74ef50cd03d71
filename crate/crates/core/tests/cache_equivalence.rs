mod common;

use proptest::prelude::*;
use selectdc::mc::{mc_predict_naive, select_dc_predict, split_network, McConfig, FrozenCache};
use selectdc::nn::{deterministic_forward, MaskSet, Network};
use selectdc::rng::rng_stream;

fn case(seed: u64) -> (Network<f32>, selectdc::Tensor<f32>, McConfig) {
    let mut rng = rng_stream(seed, 0, 0);
    let (input, layers) = common::random_architecture(&mut rng);
    let net: Network<f32> = common::random_network(input.clone(), layers, seed);
    let batch = 1 + rng.below(6) as usize;
    let x = common::random_batch(&input, batch, &mut rng);
    let plan = common::random_plan(&mut rng, net.n_weight_layers());
    let cfg = McConfig {
        passes: 1 + rng.below(32) as usize,
        lambda_frozen: plan.lambda_frozen,
        drop_prob: plan.drop_prob,
        mode: plan.mode,
        scale_mode: plan.scale_mode,
        seed: rng.next_u64(),
        keep_passes: rng.below(2) == 0,
    };
    (net, x, cfg)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn select_dc_equals_naive_bitwise(seed in any::<u64>()) {
        let (net, x, cfg) = case(seed);
        let naive = mc_predict_naive(&net, &x, &cfg).unwrap();
        let cached = select_dc_predict(&net, &x, &cfg).unwrap();
        prop_assert_eq!(naive, cached);
    }

    #[test]
    fn prefix_then_tail_is_the_deterministic_forward(seed in any::<u64>()) {
        let (net, x, cfg) = case(seed);
        let cache = FrozenCache::build(&net, &x, cfg.lambda_frozen).unwrap();
        let out = cache.run_tail(&net, &MaskSet::deterministic(net.n_weight_layers())).unwrap();
        let det = deterministic_forward(&net, &x).unwrap();
        prop_assert_eq!(out.as_slice(), det.data());
        let split = split_network(&net, cfg.lambda_frozen).unwrap();
        prop_assert_eq!(split.prefix.end, cache.boundary_layer_index());
        let weights_in_prefix = split.prefix_layers(&net).iter().filter(|l| l.is_weight_bearing()).count();
        prop_assert_eq!(weights_in_prefix, cfg.lambda_frozen);
    }

    #[test]
    fn retained_passes_do_not_change_the_mean(seed in any::<u64>()) {
        let (net, x, mut cfg) = case(seed);
        cfg.keep_passes = false;
        let lean = select_dc_predict(&net, &x, &cfg).unwrap();
        cfg.keep_passes = true;
        let full = select_dc_predict(&net, &x, &cfg).unwrap();
        prop_assert_eq!(&lean.mean_probs, &full.mean_probs);
        prop_assert_eq!(&lean.entropy, &full.entropy);
        let pp = full.per_pass_probs.unwrap();
        prop_assert_eq!(pp.len(), cfg.passes);
    }
}

#[test]
fn fully_frozen_has_deterministic_entropy() {
    let (net, x, mut cfg) = case(3);
    cfg.lambda_frozen = net.n_weight_layers();
    cfg.drop_prob = 0.5;
    let s = select_dc_predict(&net, &x, &cfg).unwrap();
    let det = deterministic_forward(&net, &x).unwrap();
    let one = McConfig { passes: 1, ..cfg.clone() };
    let s1 = select_dc_predict(&net, &x, &one).unwrap();
    assert_eq!(s1.mean_probs.data().len(), det.len());
    for (a, b) in s.entropy.iter().zip(&s1.entropy) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn stochasticity_shrinks_as_more_layers_freeze() {
    // Spread of the MC mean across seeds, averaged over a batch.
    let mut rng = rng_stream(77, 0, 0);
    let net: Network<f32> = common::random_network(
        vec![6],
        vec![
            common::dense(6, 16),
            selectdc::nn::LayerSpec::Relu,
            common::dense(16, 16),
            selectdc::nn::LayerSpec::Relu,
            common::dense(16, 16),
            selectdc::nn::LayerSpec::Relu,
            common::dense(16, 4),
            selectdc::nn::LayerSpec::Softmax,
        ],
        77,
    );
    let x = common::random_batch(&[6], 20, &mut rng);
    let spread = |lambda: usize| {
        let runs: Vec<Vec<f64>> = (0..8)
            .map(|s| {
                select_dc_predict(&net, &x, &McConfig::new(10, lambda, 0.3, s))
                    .unwrap()
                    .mean_probs
                    .data()
                    .to_vec()
            })
            .collect();
        let n = runs[0].len();
        (0..n)
            .map(|i| {
                let m = runs.iter().map(|r| r[i]).sum::<f64>() / runs.len() as f64;
                (runs.iter().map(|r| (r[i] - m).powi(2)).sum::<f64>() / runs.len() as f64).sqrt()
            })
            .sum::<f64>()
            / n as f64
    };
    let s: Vec<f64> = (0..=4).map(spread).collect();
    assert!(s[0] > s[2] && s[2] > s[3], "{s:?}");
    assert_eq!(s[4], 0.0);
}
