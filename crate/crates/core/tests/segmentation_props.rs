//! Structural invariants of change-point detection and segmentation.

use interaction_primitives::segmentation::{
    candidate_change_points, default_epsilons, prune_change_points, refine_change_points, segment,
    select_tolerance, tolerance_scores, Encounter, MIN_SEGMENT_SAMPLES,
};
use interaction_primitives::synthetic::{generate_kinked, KinkedSpec};
use interaction_primitives::Interaction;
use proptest::prelude::*;

fn cubic_encounter(coef: &[[f64; 4]; 4], n: usize) -> Encounter {
    let grid: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
    let eval = |c: &[f64; 4], t: f64| c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t;
    let a = grid.iter().map(|&t| [eval(&coef[0], t), eval(&coef[1], t)]).collect();
    let b = grid.iter().map(|&t| [eval(&coef[2], t), eval(&coef[3], t)]).collect();
    Encounter::new("c", Interaction::from_parts(grid.clone(), a, b).unwrap()).unwrap()
}

fn kinked(knots: Vec<usize>, seed: u64) -> Encounter {
    generate_kinked(
        &KinkedSpec {
            samples: 121,
            knots,
            noise_fraction: 0.01,
        },
        seed,
    )
    .unwrap()
}

#[test]
fn planted_kinks_are_recovered() {
    for (knots, seed) in [(vec![60], 1), (vec![40, 80], 2), (vec![30], 3), (vec![35, 85], 4)] {
        let enc = kinked(knots.clone(), seed);
        let seg = segment(&enc, &default_epsilons(), 101).unwrap();
        assert_eq!(seg.knots.points.len(), knots.len(), "{knots:?}: {:?}", seg.knots.points);
        for (got, want) in seg.knots.points.iter().zip(&knots) {
            assert!(got.abs_diff(*want) <= 2, "{knots:?}: {:?}", seg.knots.points);
        }
    }
}

#[test]
fn tolerance_selection_is_stable_under_duplicates() {
    let enc = kinked(vec![50], 9);
    let eps = default_epsilons();
    let mut doubled = eps.clone();
    doubled.extend(eps.iter().rev());
    assert_eq!(select_tolerance(&enc, &eps).unwrap(), select_tolerance(&enc, &doubled).unwrap());
    assert!(select_tolerance(&enc, &[]).is_err());
    assert!(select_tolerance(&enc, &[0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exact_cubics_have_no_change_points(
        coef in prop::array::uniform4(prop::array::uniform4(-3.0f64..3.0)),
        n in 20usize..80,
    ) {
        let enc = cubic_encounter(&coef, n);
        let seg = segment(&enc, &default_epsilons(), 51).unwrap();
        prop_assert!(seg.knots.points.is_empty(), "{:?}", seg.knots.points);
        prop_assert_eq!(seg.spans, vec![(0, n - 1)]);
    }

    #[test]
    fn change_point_sets_are_well_formed(seed in any::<u64>(), k1 in 25usize..55, k2 in 65usize..95) {
        let enc = kinked(vec![k1, k2], seed);
        let last = enc.interaction.len() - 1;
        let candidates = candidate_change_points(&enc);
        prop_assert!(candidates.points.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(candidates.points.iter().all(|&c| c > 0 && c < last));
        for eps in [1e-3, 1e-1, 1e1] {
            let pruned = prune_change_points(&enc, &candidates, eps);
            prop_assert!(pruned.points.iter().all(|p| candidates.points.contains(p)));
            let refined = refine_change_points(&enc, &pruned);
            prop_assert_eq!(refined.points.len(), pruned.points.len());
            prop_assert!(refined.points.windows(2).all(|w| w[0] < w[1]));
        }
        let scores = tolerance_scores(&enc, &default_epsilons());
        prop_assert!(scores.iter().all(|(_, _, s)| s.is_finite()));
    }

    #[test]
    fn segments_tile_the_encounter(seed in any::<u64>(), k in 20usize..100) {
        let enc = kinked(vec![k], seed);
        let seg = segment(&enc, &default_epsilons(), 41).unwrap();
        prop_assert_eq!(seg.spans[0].0, 0);
        prop_assert_eq!(seg.spans.last().unwrap().1, enc.interaction.len() - 1);
        for w in seg.spans.windows(2) {
            prop_assert_eq!(w[0].1, w[1].0);
        }
        for &(s, e) in &seg.spans {
            prop_assert!(e - s + 1 >= MIN_SEGMENT_SAMPLES);
        }
        prop_assert_eq!(seg.segments.len(), seg.spans.len());
        prop_assert!(seg.segments.iter().all(|s| s.len() == 41));
    }
}
