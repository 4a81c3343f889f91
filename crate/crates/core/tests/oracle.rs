mod common;

use common::{engine_trace, first_mismatch, reference_two_nodes};
use ecasim::Variant;

#[test]
fn two_node_trace_matches_reference() {
    for variant in Variant::ALL {
        for seed in [0u64, 1, 7, 42, 1234, 99_999] {
            let engine = engine_trace(variant, 2, seed, 500);
            let reference = reference_two_nodes(variant.as_str(), seed, 500);
            assert_eq!(
                first_mismatch(&engine, &reference),
                None,
                "{variant} seed {seed}"
            );
        }
    }
}

#[test]
fn reference_exercises_collisions() {
    // make sure the comparison is not vacuous: some seed must collide
    let collided = (0..50u64).any(|seed| {
        reference_two_nodes("ca", seed, 500)
            .iter()
            .any(|s| s.kind == 'C')
    });
    assert!(collided);
}
