//! Euclidean Lloyd iteration with k-means++ seeding, shared by the clustering schemes.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MAX_ITER: usize = 300;
pub const REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares at return.
    pub objective: f64,
    /// Objective after every centroid update.
    pub history: Vec<f64>,
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding. When every remaining point coincides with a chosen
/// centre, the lowest-index unchosen point is taken.
pub fn plus_plus<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&dist) {
            Ok(sampler) => sampler.sample(rng),
            Err(_) => (0..n).find(|i| !chosen.contains(i)).expect("k <= n"),
        };
        chosen.push(next);
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn assign_all(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    points.par_iter().map(|p| nearest(p, centroids).0).collect()
}

/// Pointwise means per cluster, summed in index order.
pub fn means(points: &[Vec<f64>], assignments: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &z) in points.iter().zip(assignments) {
        counts[z] += 1;
        for (s, v) in sums[z].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

/// Moves, for every empty cluster, the point farthest from its own centre
/// (among clusters with more than one member) into the empty cluster.
pub fn repair_empty(assignments: &mut [usize], cost: impl Fn(usize, usize) -> f64, k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &z in assignments.iter() {
            counts[z] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let donor = (0..assignments.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .map(|i| (i, cost(i, assignments[i])))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        match donor {
            Some((i, _)) => assignments[i] = empty,
            None => return,
        }
    }
}

pub fn within_ss(points: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &z)| sq_dist(p, &centroids[z]))
        .sum()
}

/// Lloyd iteration from k-means++ seeds.
pub fn lloyd<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Result<KMeansOutcome> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={n}")));
    }
    let mut centroids = plus_plus(points, k, rng);
    let mut assignments: Vec<usize> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    for _ in 0..MAX_ITER {
        let fresh = assign_all(points, &centroids);
        if fresh == assignments {
            break;
        }
        assignments = fresh;
        let current = &centroids;
        repair_empty(&mut assignments, |i, j| sq_dist(&points[i], &current[j]), k);
        centroids = means(points, &assignments, k);
        let objective = within_ss(points, &assignments, &centroids);
        let settled = history
            .last()
            .is_some_and(|prev| (prev - objective).abs() <= REL_TOL * prev.abs());
        history.push(objective);
        if settled {
            break;
        }
    }
    let objective = within_ss(points, &assignments, &centroids);
    Ok(KMeansOutcome {
        assignments,
        centroids,
        objective,
        history,
    })
}
