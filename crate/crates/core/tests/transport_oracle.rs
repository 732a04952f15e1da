//! Optimal transport checked against permutation enumeration.

mod common;

use common::{random_interaction, random_motion};
use interaction_primitives::procrustes::distance;
use interaction_primitives::transport::{optimal_transport, wasserstein, DiscreteMeasure};
use interaction_primitives::trajectory::uniform_measure;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Minimum over all permutations of `sum_i cost[i][perm[i]]` (Heap's algorithm).
fn min_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let eval = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>();
    let mut best = eval(&perm);
    let mut c = vec![0; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Splits integer masses into unit atoms: transport between rational
/// measures with denominator `total` becomes an assignment problem.
fn expanded_cost(supply: &[usize], demand: &[usize], cost: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rows: Vec<usize> = supply.iter().enumerate().flat_map(|(i, &m)| std::iter::repeat_n(i, m)).collect();
    let cols: Vec<usize> = demand.iter().enumerate().flat_map(|(j, &m)| std::iter::repeat_n(j, m)).collect();
    rows.iter().map(|&i| cols.iter().map(|&j| cost[i][j]).collect()).collect()
}

#[test]
fn uniform_three_atoms_match_permutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = 21;
    let mu = uniform_measure(t).unwrap();
    for _ in 0..10 {
        let f: Vec<_> = (0..3).map(|_| random_interaction(&mut rng, t)).collect();
        let g: Vec<_> = (0..3).map(|_| random_interaction(&mut rng, t)).collect();
        for r in [1.0, 2.0, 3.0] {
            let cost: Vec<Vec<f64>> = f
                .iter()
                .map(|a| g.iter().map(|b| distance(a, b, &mu).unwrap().powf(r)).collect())
                .collect();
            let expected = (min_assignment(&cost) / 3.0).powf(1.0 / r);
            let fm = DiscreteMeasure::new(f.clone(), vec![1.0 / 3.0; 3]).unwrap();
            let gm = DiscreteMeasure::new(g.clone(), vec![1.0 / 3.0; 3]).unwrap();
            let got = wasserstein(&fm, &gm, r, &mu).unwrap();
            assert!((got - expected).abs() <= 1e-9, "r={r}: {got} vs {expected}");
        }
    }
}

#[test]
fn single_atoms_give_the_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mu = uniform_measure(17).unwrap();
    for _ in 0..5 {
        let a = random_interaction(&mut rng, 17);
        let b = random_interaction(&mut rng, 17);
        let d = distance(&a, &b, &mu).unwrap();
        let fa = DiscreteMeasure::new(vec![a.clone()], vec![1.0]).unwrap();
        let gb = DiscreteMeasure::new(vec![b], vec![1.0]).unwrap();
        for r in [1.0, 2.0, 4.0] {
            assert!((wasserstein(&fa, &gb, r, &mu).unwrap() - d).abs() <= 1e-9 * d.max(1.0));
        }
        let moved = DiscreteMeasure::new(vec![random_motion(&mut rng, &a)], vec![1.0]).unwrap();
        assert!(wasserstein(&fa, &moved, 2.0, &mu).unwrap() <= 1e-9);
    }
}

fn masses(total: usize, parts: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..=total, parts - 1).prop_map(move |mut cuts| {
        cuts.sort_unstable();
        let mut out = Vec::with_capacity(parts);
        let mut prev = 0;
        for c in cuts {
            out.push(c - prev);
            prev = c;
        }
        out.push(total - prev);
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rational_masses_match_unit_assignment(
        (total, supply_counts, demand_counts) in (1usize..7, 1usize..5, 1usize..5)
            .prop_flat_map(|(total, m, n)| (Just(total), masses(total, m), masses(total, n))),
        seed in any::<u64>(),
    ) {
        let (m, n) = (supply_counts.len(), demand_counts.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rand::Rng::random_range(&mut rng, 0.0..10.0)).collect())
            .collect();
        let supply: Vec<f64> = supply_counts.iter().map(|&c| c as f64 / total as f64).collect();
        let demand: Vec<f64> = demand_counts.iter().map(|&c| c as f64 / total as f64).collect();
        let plan = optimal_transport(&supply, &demand, &cost).unwrap();
        let expected = min_assignment(&expanded_cost(&supply_counts, &demand_counts, &cost)) / total as f64;
        prop_assert!((plan.cost - expected).abs() <= 1e-9, "{} vs {}", plan.cost, expected);

        let mut rows = vec![0.0; m];
        let mut cols = vec![0.0; n];
        let mut recomputed = 0.0;
        for &(i, j, f) in &plan.flows {
            prop_assert!(f >= 0.0);
            rows[i] += f;
            cols[j] += f;
            recomputed += f * cost[i][j];
        }
        for (r, s) in rows.iter().zip(&supply) {
            prop_assert!((r - s).abs() <= 1e-12);
        }
        for (c, d) in cols.iter().zip(&demand) {
            prop_assert!((c - d).abs() <= 1e-12);
        }
        prop_assert!((recomputed - plan.cost).abs() <= 1e-9);
    }
}
