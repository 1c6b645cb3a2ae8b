use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tn_capacity::contract::{contract, contract_brute_force, contract_with, ContractionOrder, CoreAssignment};
use tn_capacity::structure::{build_cp, build_hierarchical_tucker, build_peps_grid, tr_uniform, tt_uniform, TensorNetworkStructure};
use tn_capacity::tensor::{inner_product, mode_k_product, DenseTensor};
use tn_capacity::tt::{tt_inner_product, TensorTrain};

fn random_cores(s: &TensorNetworkStructure, seed: u64) -> CoreAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CoreAssignment::from_fn(s, |_, shape| DenseTensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0)))
}

fn max_rel(a: &DenseTensor, b: &DenseTensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let scale = b.max_abs().max(f64::MIN_POSITIVE);
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn standard_structures_match_brute_force(kind in 0usize..5, d in 1usize..4, r in 1usize..4, seed in any::<u64>()) {
        let s = match kind {
            0 => tt_uniform(3, d, r).unwrap(),
            1 => tr_uniform(3, d, r).unwrap(),
            2 => build_cp(&[d, d, 2], r).unwrap(),
            3 => build_hierarchical_tucker(&[d, 2, d], r).unwrap(),
            _ => build_peps_grid(2, 2, &[d, 2, 2, d], r).unwrap(),
        };
        let cores = random_cores(&s, seed);
        let slow = contract_brute_force(&s, &cores).unwrap();
        for order in [ContractionOrder::Greedy, ContractionOrder::Sequential] {
            prop_assert!(max_rel(&contract_with(&s, &cores, order).unwrap(), &slow) < 1e-12);
        }
    }

    #[test]
    fn tt_sweep_matches_dense(p in 2usize..5, d in 1usize..4, r in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tt = TensorTrain::random_uniform(&vec![d; p], &vec![r; p - 1], 1.0, &mut rng);
        let x = DenseTensor::from_fn(&vec![d; p], |_| rng.gen_range(-1.0..1.0));
        let s = tt.structure();
        let cores = tt.to_assignment();
        let dense = contract(&s, &cores).unwrap();
        let want = inner_product(&dense, &x).unwrap();
        let got = tt_inner_product(&s, &cores, &x).unwrap();
        prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
    }
}

#[test]
fn tucker_matches_mode_products() {
    let (d, r) = (3, 2);
    let s = tn_capacity::structure::build_tucker(&[d, d, d], &[r, r, r]).unwrap();
    let cores = random_cores(&s, 11);
    let mut want = cores.get("g").unwrap().clone();
    for k in 0..3 {
        // factor k is stored d x r; the mode product takes the r -> d map
        let f = cores.get(&format!("v{}", k + 1)).unwrap();
        want = mode_k_product(&want, f, k).unwrap();
    }
    assert!(max_rel(&contract(&s, &cores).unwrap(), &want) < 1e-12);
}

#[test]
fn reused_plan_is_deterministic() {
    let s = tr_uniform(4, 2, 3).unwrap();
    let cores = random_cores(&s, 5);
    let a = contract(&s, &cores).unwrap();
    let b = contract(&s, &cores).unwrap();
    assert_eq!(a, b);
}
