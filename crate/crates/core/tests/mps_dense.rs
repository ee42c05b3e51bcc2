//! Random gate sequences on short chains against dense state vectors.

mod common;

use chainmps::mps::{Truncation, TwoSiteGate, VidalMps};
use common::gate_sequence_error;
use proptest::prelude::*;

fn check_sequence(dims: Vec<usize>, basis_seed: u64, steps: Vec<(usize, bool)>, seed: u64) -> Result<(), TestCaseError> {
    let err = gate_sequence_error(&dims, basis_seed, &steps, seed);
    prop_assert!(err.dims_match);
    prop_assert!(err.amplitude < 1e-9, "max amplitude error {:e}", err.amplitude);
    prop_assert!(err.norm < 1e-9);
    prop_assert!(err.population < 1e-9);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_sites_match_dense(
        d1 in 2usize..5, d2 in 2usize..5, basis in any::<u64>(),
        steps in prop::collection::vec((0usize..1, any::<bool>()), 1..6), seed in any::<u64>(),
    ) {
        check_sequence(vec![d1, d2], basis, steps, seed)?;
    }

    #[test]
    fn three_sites_match_dense(
        dims in prop::collection::vec(2usize..4, 3), basis in any::<u64>(),
        steps in prop::collection::vec((0usize..2, any::<bool>()), 1..10), seed in any::<u64>(),
    ) {
        check_sequence(dims, basis, steps, seed)?;
    }
}

#[test]
fn swap_only_sequence_restores_order() {
    let mut mps = VidalMps::product_state(&[2, 3, 4], &[1, 2, 3], Truncation::none()).unwrap();
    let before = mps.to_state_vector().unwrap();
    for &bond in &[0, 1, 0, 1, 0, 1] {
        let (d1, d2) = (mps.site_dims()[bond], mps.site_dims()[bond + 1]);
        mps.apply_two_site_gate(bond, &TwoSiteGate::identity(d1, d2), true).unwrap();
    }
    assert_eq!(mps.site_dims(), &[2, 3, 4]);
    let after = mps.to_state_vector().unwrap();
    assert!((&after - &before).iter().all(|v| v.norm() < 1e-14));
}
