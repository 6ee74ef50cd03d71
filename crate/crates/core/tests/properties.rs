mod common;

use proptest::prelude::*;
use selectdc::analysis::{auroc, roc_curve, total_flops, trapezoid_area, uniform_cost, CostModel};
use selectdc::nn::{dropconnect_forward, network_forward, sample_mask, MaskPlan, Network};
use selectdc::rng::rng_stream;
use selectdc::tensor::Tensor;

fn scores() -> impl Strategy<Value = Vec<f64>> {
    // Coarse grid so that ties are common.
    prop::collection::vec((0u32..20).prop_map(|v| v as f64 * 0.1), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn threshold_sweep_area_equals_rank_statistic(id in scores(), ood in scores()) {
        let a = auroc(&id, &ood).unwrap();
        let curve = roc_curve(&id, &ood).unwrap();
        prop_assert!((trapezoid_area(&curve) - a).abs() < 1e-9);
        let mut pairs = 0.0;
        for &o in &ood {
            for &i in &id {
                pairs += if o > i { 1.0 } else if o == i { 0.5 } else { 0.0 };
            }
        }
        prop_assert!((pairs / (id.len() * ood.len()) as f64 - a).abs() < 1e-12);
    }

    #[test]
    fn auroc_ignores_increasing_transforms(id in scores(), ood in scores()) {
        let a = auroc(&id, &ood).unwrap();
        let exp = |v: &Vec<f64>| v.iter().map(|x| x.exp()).collect::<Vec<_>>();
        let lin = |v: &Vec<f64>| v.iter().map(|x| 2.0 * x + 1.0).collect::<Vec<_>>();
        prop_assert_eq!(auroc(&exp(&id), &exp(&ood)).unwrap(), a);
        prop_assert_eq!(auroc(&lin(&id), &lin(&ood)).unwrap(), a);
    }

    #[test]
    fn uniform_cost_reduces_to_closed_form(n in 1u64..64, k in 1u64..100, l in 0u64..64) {
        let lambda = l % (n + 1);
        let mut layers = vec![];
        for _ in 0..n {
            layers.push(common::dense(2, 2));
        }
        layers.push(selectdc::nn::LayerSpec::Softmax);
        let net = Network::<f32>::init(vec![2], layers, 0).unwrap();
        let r = total_flops(&net, lambda as usize, k as usize, CostModel::Uniform).unwrap();
        prop_assert_eq!(r.grand_total, uniform_cost(n, lambda, k, 1));
        prop_assert_eq!(r.grand_total, lambda + (n - lambda) * k);
    }

    #[test]
    fn flops_strictly_decrease_in_lambda(seed in any::<u64>(), k in 2usize..50) {
        let mut rng = rng_stream(seed, 0, 0);
        let (input, layers) = common::random_architecture(&mut rng);
        let net = Network::<f32>::init(input, layers, 0).unwrap();
        let totals: Vec<u64> = (0..=net.n_weight_layers())
            .map(|l| total_flops(&net, l, k, CostModel::Flops).unwrap().grand_total)
            .collect();
        prop_assert!(totals.windows(2).all(|w| w[0] > w[1]), "{:?}", totals);
    }
}

#[test]
fn mask_drop_rates_within_three_sigma() {
    let n = 1_000_000usize;
    for (i, p) in [0.1, 0.3, 0.5].into_iter().enumerate() {
        let mut s = rng_stream(2024, 0, i as u64);
        let m = sample_mask(&[n], p, &mut s).unwrap();
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        let dev = (m.dropped() as f64 - n as f64 * p).abs();
        assert!(dev <= 3.0 * sigma, "p={p}: {} dropped", m.dropped());
    }
}

#[test]
fn zero_drop_passes_equal_the_deterministic_network() {
    let mut rng = rng_stream(4, 0, 0);
    let (input, layers) = common::random_architecture(&mut rng);
    let net: Network<f32> = common::random_network(input.clone(), layers, 4);
    let x = common::random_batch::<f32>(&input, 1, &mut rng).reshape(&input).unwrap();
    let det = network_forward(&net, &x, &MaskPlan::deterministic(), 0, 0).unwrap();
    for pass in 0..5 {
        let p0 = network_forward(&net, &x, &MaskPlan::dropconnect(0.0, 0).unwrap(), 9, pass).unwrap();
        assert_eq!(p0, det);
        let frozen = MaskPlan::dropconnect(0.5, net.n_weight_layers()).unwrap();
        assert_eq!(network_forward(&net, &x, &frozen, 9, pass).unwrap(), det);
    }
}

#[test]
fn distinct_seeds_give_distinct_passes() {
    let net = Network::<f32>::init(
        vec![8],
        vec![common::dense(8, 8), selectdc::nn::LayerSpec::Relu, common::dense(8, 3), selectdc::nn::LayerSpec::Softmax],
        1,
    )
    .unwrap();
    let x = Tensor::<f32>::filled(&[8], 0.5);
    let plan = MaskPlan::dropconnect(0.5, 0).unwrap();
    let mut outs: Vec<Vec<u32>> = (0..100)
        .map(|s| network_forward(&net, &x, &plan, s, 0).unwrap().data().iter().map(|v| v.to_bits()).collect())
        .collect();
    outs.sort();
    outs.dedup();
    assert!(outs.len() >= 95, "{} distinct", outs.len());
}

#[test]
fn single_layer_dropconnect_by_hand() {
    let x = Tensor::<f64>::from_f64_slice(&[1, 2], &[1.0, 2.0]).unwrap();
    let w = Tensor::<f64>::from_f64_slice(&[2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = Tensor::<f64>::from_f64_slice(&[2], &[0.5, -0.5]).unwrap();
    let m = selectdc::nn::Mask::new(vec![2, 2], vec![1, 0, 0, 1]).unwrap();
    let y = dropconnect_forward(
        &common::dense(2, 2),
        &x,
        &w,
        &b,
        &m,
        2.0,
        selectdc::nn::Activation::Identity,
    )
    .unwrap();
    // x·(w⊙m) = [1, 8]; scaled ×2, plus bias.
    assert_eq!(y.data(), &[2.5, 15.5]);
}
