//! Clustering schemes checked against exhaustive search and direct sums.

use interaction_primitives::clustering::{
    cluster_geo1, cluster_geo2, cluster_mds, cluster_spline_coef, ClusterModel, Method,
};
use interaction_primitives::procrustes::{distance, distance_matrix};
use interaction_primitives::synthetic::{generate_planted, PlantedSpec};
use interaction_primitives::transport::{empirical_measure, model_measure, wasserstein};
use interaction_primitives::trajectory::uniform_measure;
use interaction_primitives::{DistanceMatrix, Interaction, TimeMeasure};

fn planted(per_family: usize, seed: u64) -> (Vec<Interaction>, Vec<usize>, TimeMeasure) {
    let spec = PlantedSpec {
        per_family,
        ..PlantedSpec::default()
    };
    let set = generate_planted(&spec, seed).unwrap();
    let data: Vec<Interaction> = set.encounters.into_iter().map(|e| e.interaction).collect();
    let mu = uniform_measure(data[0].len()).unwrap();
    (data, set.manifest.labels, mu)
}

/// Smallest `sum_i min_{m in S} d(i, m)^2` over all k-subsets `S`.
fn exhaustive_medoids(d: &DistanceMatrix, k: usize) -> f64 {
    fn recurse(d: &DistanceMatrix, k: usize, start: usize, chosen: &mut Vec<usize>, best: &mut f64) {
        if chosen.len() == k {
            let total: f64 = (0..d.n())
                .map(|i| chosen.iter().map(|&m| d.get(i, m) * d.get(i, m)).fold(f64::INFINITY, f64::min))
                .sum();
            *best = best.min(total);
            return;
        }
        for m in start..d.n() {
            chosen.push(m);
            recurse(d, k, m + 1, chosen, best);
            chosen.pop();
        }
    }
    let mut best = f64::INFINITY;
    recurse(d, k, 0, &mut Vec::new(), &mut best);
    best
}

fn agreement(assignments: &[usize], labels: &[usize], k: usize) -> f64 {
    // Majority label per cluster; counts points matching their cluster's majority.
    let mut correct = 0;
    for c in 0..k {
        let mut counts = vec![0; k.max(labels.iter().max().unwrap() + 1)];
        for (z, l) in assignments.iter().zip(labels) {
            if *z == c {
                counts[*l] += 1;
            }
        }
        correct += counts.iter().max().unwrap();
    }
    correct as f64 / labels.len() as f64
}

#[test]
fn medoid_objective_is_exhaustively_optimal() {
    for seed in 0..10 {
        let (data, _, mu) = planted(4, seed);
        let d = distance_matrix(&data, &mu, false).unwrap();
        for k in 2..=3 {
            let model = cluster_mds(&data, &d, 2, k, seed).unwrap();
            let best = exhaustive_medoids(&d, k);
            assert!((model.objective - best).abs() <= 1e-9 * best.max(1.0), "k={k}: {} vs {best}", model.objective);
        }
    }
}

#[test]
fn every_method_recovers_planted_families() {
    let (data, labels, mu) = planted(15, 42);
    let d = distance_matrix(&data, &mu, false).unwrap();
    let models = [
        cluster_mds(&data, &d, 3, 3, 1).unwrap(),
        cluster_geo1(&data, &mu, 3, 1).unwrap(),
        cluster_geo2(&data, &mu, 3, 1, 300).unwrap(),
    ];
    for m in &models {
        assert_eq!(agreement(&m.assignments, &labels, 3), 1.0, "{}", m.method);
    }
}

#[test]
fn objectives_match_direct_sums() {
    let (data, _, mu) = planted(6, 9);
    let d = distance_matrix(&data, &mu, false).unwrap();
    let mds = cluster_mds(&data, &d, 2, 3, 0).unwrap();
    let medoids = mds.representative_indices.clone().unwrap();
    let direct: f64 = (0..data.len()).map(|i| d.get(i, medoids[mds.assignments[i]]).powi(2)).sum();
    assert!((mds.objective - direct).abs() <= 1e-9 * direct.max(1.0));
    for (i, z) in mds.assignments.iter().enumerate() {
        let own = d.get(i, medoids[*z]);
        assert!(medoids.iter().all(|&m| own <= d.get(i, m)));
    }
    for w in mds.history.windows(2) {
        assert!(w[1] <= w[0]);
    }

    // Mean-based schemes: every point is no farther from its own mean than
    // the aligned metric allows, and the history never rises.
    let geo2 = cluster_geo2(&data, &mu, 3, 0, 300).unwrap();
    for w in geo2.history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
    let bound: f64 = data
        .iter()
        .zip(&geo2.assignments)
        .map(|(x, &z)| distance(&geo2.representatives[z], x, &mu).unwrap().powi(2))
        .sum();
    assert!(bound <= geo2.objective * (1.0 + 1e-9) + 1e-9);
}

#[test]
fn model_wasserstein_is_bounded_by_objective() {
    let (data, _, mu) = planted(5, 17);
    let d = distance_matrix(&data, &mu, false).unwrap();
    let n = data.len();
    let empirical = empirical_measure(&data).unwrap();
    for k in 1..=5 {
        let model = cluster_mds(&data, &d, 3, k, 4).unwrap();
        let w = wasserstein(&model_measure(&model, n).unwrap(), &empirical, 2.0, &mu).unwrap();
        assert!(w * w <= model.objective / n as f64 + 1e-8);
    }
}

#[test]
fn models_are_deterministic_and_serializable() {
    let (data, _, mu) = planted(4, 2);
    let d = distance_matrix(&data, &mu, false).unwrap();
    let runs = |seed| -> Vec<ClusterModel> {
        vec![
            cluster_mds(&data, &d, 2, 3, seed).unwrap(),
            cluster_geo1(&data, &mu, 3, seed).unwrap(),
            cluster_geo2(&data, &mu, 3, seed, 50).unwrap(),
            cluster_spline_coef(&data, 3, seed).unwrap(),
        ]
    };
    let (a, b) = (runs(7), runs(7));
    assert_eq!(a, b);
    for m in &a {
        let back = ClusterModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(&back, m);
        assert_eq!(back.n(), data.len());
    }
    assert_eq!(a[0].method, Method::MdsMedoid);
}

#[test]
fn one_cluster_per_point_has_zero_objective() {
    let (data, _, mu) = planted(2, 1);
    let d = distance_matrix(&data, &mu, false).unwrap();
    let n = data.len();
    let model = cluster_mds(&data, &d, 2, n, 0).unwrap();
    assert_eq!(model.objective, 0.0);
    assert!(cluster_mds(&data, &d, 2, n + 1, 0).is_err());
    assert!(cluster_mds(&data, &d, 2, 0, 0).is_err());
}
