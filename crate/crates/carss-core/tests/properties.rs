//! Property tests for the metric, tour objective, and generation
//! determinism.

use carss_core::{distance, generate_instances, tour_length, Instance, Seed};
use proptest::prelude::*;

fn unit_point() -> impl Strategy<Value = [f64; 2]> {
    (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(x, y)| [x, y])
}

proptest! {
    #[test]
    fn metric_axioms(a in unit_point(), b in unit_point(), c in unit_point()) {
        let ab = distance(a, b);
        let ba = distance(b, a);
        let ac = distance(a, c);
        let cb = distance(c, b);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, ba);
        prop_assert!(ab <= ac + cb + 1e-12);
        prop_assert_eq!(distance(a, a), 0.0);
    }

    #[test]
    fn tour_length_invariant_under_rotation_and_reversal(
        seed in 0u64..1000,
        rot in 0usize..12,
    ) {
        let inst = &generate_instances(12, 1, Seed(seed)).unwrap()[0];
        let order: Vec<usize> = (0..12).collect();
        let base = tour_length(inst, &order).unwrap();

        let mut rotated = order.clone();
        rotated.rotate_left(rot);
        let rot_len = tour_length(inst, &rotated).unwrap();
        prop_assert!((base - rot_len).abs() < 1e-9);

        let reversed: Vec<usize> = rotated.iter().rev().copied().collect();
        let rev_len = tour_length(inst, &reversed).unwrap();
        prop_assert!((base - rev_len).abs() < 1e-9);
    }

    #[test]
    fn generation_is_reproducible(seed in any::<u64>(), n in 4usize..40, count in 1usize..4) {
        let a = generate_instances(n, count, Seed(seed)).unwrap();
        let b = generate_instances(n, count, Seed(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn zero_distance_only_for_identical_points() {
    let inst = Instance::new(
        "p",
        vec![[0.25, 0.25], [0.25, 0.25], [0.75, 0.25], [0.1, 0.9]],
    )
    .unwrap();
    assert_eq!(inst.dist(0, 1), 0.0);
    assert!(inst.dist(0, 2) > 0.0);
}
