//! Approximate k-means over interactions.
//!
//! Four schemes share one model type:
//!
//! - [`cluster_mds`]: Lloyd in an MDS embedding, centroids snapped to data
//!   points, then medoid swaps under the true metric.
//! - [`cluster_geo1`]: align everything to one anchor, then Euclidean Lloyd.
//! - [`cluster_geo2`]: per-cluster alignment to the cluster's first member,
//!   pointwise means as centroids, reassignment by aligned residual.
//! - [`cluster_spline_coef`]: Euclidean Lloyd on per-series cubic coefficients.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::{self, lloyd, sq_dist};
use crate::mds;
use crate::procrustes::{align, aligned_residual, DistanceMatrix};
use crate::segmentation::fit_cubic;
use crate::trajectory::{Interaction, TimeMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MdsMedoid,
    Geo1,
    Geo2,
    SplineCoef,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MdsMedoid => "mds_medoid",
            Method::Geo1 => "geo1",
            Method::Geo2 => "geo2",
            Method::SplineCoef => "spline_coef",
        }
    }

    /// Whether the representatives are pointwise means of aligned curves.
    pub fn has_mean_centroids(self) -> bool {
        matches!(self, Method::Geo1 | Method::Geo2)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mds" | "mds_medoid" => Ok(Method::MdsMedoid),
            "geo1" => Ok(Method::Geo1),
            "geo2" => Ok(Method::Geo2),
            "spline_coef" | "spline" => Ok(Method::SplineCoef),
            other => Err(Error::invalid(format!("unknown clustering method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    /// Value of the method's objective at return.
    pub objective: f64,
    /// Cluster index in `0..k` per input interaction.
    pub assignments: Vec<usize>,
    /// One interaction per cluster.
    pub representatives: Vec<Interaction>,
    /// Input indices of the representatives when they are data points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representative_indices: Option<Vec<usize>>,
    /// Objective after every iteration.
    #[serde(default)]
    pub history: Vec<f64>,
}

impl ClusterModel {
    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &z in &self.assignments {
            sizes[z] += 1;
        }
        sizes
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.representatives.len() != self.k {
            return Err(Error::invalid(format!(
                "model has k = {} but {} representatives",
                self.k,
                self.representatives.len()
            )));
        }
        if let Some(z) = self.assignments.iter().find(|&&z| z >= self.k) {
            return Err(Error::invalid(format!("cluster index {z} out of range for k = {}", self.k)));
        }
        if let Some(idx) = &self.representative_indices {
            if idx.len() != self.k || idx.iter().any(|&i| i >= self.n()) {
                return Err(Error::invalid("representative indices do not match the data"));
            }
        }
        if !self.objective.is_finite() || self.objective < 0.0 {
            return Err(Error::Numerical(format!("objective {} is not a finite nonnegative value", self.objective)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("no interactions to cluster"));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={n}")));
    }
    Ok(())
}

fn check_grids(data: &[Interaction], mu: &TimeMeasure) -> Result<()> {
    let t = mu.len();
    if let Some(bad) = data.iter().position(|d| d.len() != t) {
        return Err(Error::invalid(format!(
            "interaction {bad} has {} samples but the time measure has {t}",
            data[bad].len()
        )));
    }
    Ok(())
}

/// Index of the smallest value; ties go to the lowest index.
fn argmin(values: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, v) in values.into_iter().enumerate() {
        if v < best.1 {
            best = (j, v);
        }
    }
    best
}

// ---------------------------------------------------------------- MDS medoids

/// Sum over points of the squared distance to the nearest medoid.
pub fn medoid_objective(d: &DistanceMatrix, medoids: &[usize]) -> f64 {
    (0..d.n())
        .map(|i| medoids.iter().map(|&m| d.get(i, m).powi(2)).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Nearest-medoid assignment with every medoid kept in its own cluster.
fn medoid_assignments(d: &DistanceMatrix, medoids: &[usize]) -> Vec<usize> {
    (0..d.n())
        .map(|i| match medoids.iter().position(|&m| m == i) {
            Some(slot) => slot,
            None => argmin(medoids.iter().map(|&m| d.get(i, m))).0,
        })
        .collect()
}

/// Best-improvement medoid swaps until no swap lowers the objective.
fn swap_medoids(d: &DistanceMatrix, medoids: &mut [usize], history: &mut Vec<f64>) {
    let n = d.n();
    let k = medoids.len();
    loop {
        // Nearest and second-nearest medoid slot per point.
        let near: Vec<(usize, f64, f64)> = (0..n)
            .map(|i| {
                let mut first = (0, f64::INFINITY);
                let mut second = f64::INFINITY;
                for (s, &m) in medoids.iter().enumerate() {
                    let v = d.get(i, m).powi(2);
                    if v < first.1 {
                        second = first.1;
                        first = (s, v);
                    } else if v < second {
                        second = v;
                    }
                }
                (first.0, first.1, second)
            })
            .collect();
        let current: f64 = near.iter().map(|p| p.1).sum();
        let candidates: Vec<(usize, usize, f64)> = (0..n)
            .into_par_iter()
            .filter(|h| !medoids.contains(h))
            .map(|h| {
                let mut best = (0, f64::INFINITY);
                for slot in 0..k {
                    let delta: f64 = near
                        .iter()
                        .enumerate()
                        .map(|(i, &(s, first, second))| {
                            let keep = if s == slot { second } else { first };
                            keep.min(d.get(i, h).powi(2)) - first
                        })
                        .sum();
                    if delta < best.1 {
                        best = (slot, delta);
                    }
                }
                (h, best.0, best.1)
            })
            .collect();
        let Some(&(h, slot, delta)) = candidates
            .iter()
            .fold(None, |acc: Option<&(usize, usize, f64)>, c| match acc {
                Some(a) if a.2 <= c.2 => Some(a),
                _ => Some(c),
            })
        else {
            return;
        };
        if !(delta < -1e-12 * current.max(f64::MIN_POSITIVE)) {
            return;
        }
        medoids[slot] = h;
        history.push(medoid_objective(d, medoids));
    }
}

/// MDS-medoid clustering.
///
/// Lloyd k-means runs on the `beta`-dimensional embedding of `d`; each
/// centroid is snapped to the nearest unused embedded point. Those medoids
/// then improve by best-improvement swaps under the true squared metric.
/// The objective is the sum of squared distances to the nearest medoid.
pub fn cluster_mds(
    data: &[Interaction],
    d: &DistanceMatrix,
    beta: usize,
    k: usize,
    seed: u64,
) -> Result<ClusterModel> {
    check_mds_inputs(data, d, k)?;
    if k == data.len() {
        return Ok(medoid_model(data, d, (0..k).collect(), seed));
    }
    let embedding = mds::embed(d, beta, seed)?;
    cluster_mds_embedded(data, d, &embedding, k, seed)
}

fn check_mds_inputs(data: &[Interaction], d: &DistanceMatrix, k: usize) -> Result<()> {
    let n = data.len();
    check_k(n, k)?;
    if d.n() != n {
        return Err(Error::invalid(format!(
            "distance matrix is {}x{} but there are {n} interactions",
            d.n(),
            d.n()
        )));
    }
    Ok(())
}

/// [`cluster_mds`] on a precomputed embedding of `d`.
pub fn cluster_mds_embedded(
    data: &[Interaction],
    d: &DistanceMatrix,
    embedding: &mds::Embedding,
    k: usize,
    seed: u64,
) -> Result<ClusterModel> {
    check_mds_inputs(data, d, k)?;
    let n = data.len();
    if embedding.points.len() != n {
        return Err(Error::invalid("embedding and distance matrix differ in size"));
    }
    let medoids: Vec<usize> = if k == n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let outcome = lloyd(&embedding.points, k, &mut rng)?;
        let mut used = vec![false; n];
        outcome
            .centroids
            .iter()
            .map(|c| {
                let (i, _) = argmin(
                    embedding
                        .points
                        .iter()
                        .zip(&used)
                        .map(|(p, &u)| if u { f64::INFINITY } else { sq_dist(p, c) }),
                );
                used[i] = true;
                i
            })
            .collect()
    };
    Ok(medoid_model(data, d, medoids, seed))
}

fn medoid_model(data: &[Interaction], d: &DistanceMatrix, mut medoids: Vec<usize>, seed: u64) -> ClusterModel {
    let k = medoids.len();
    let mut history = vec![medoid_objective(d, &medoids)];
    if k < data.len() {
        swap_medoids(d, &mut medoids, &mut history);
    }
    let assignments = medoid_assignments(d, &medoids);
    let objective = medoid_objective(d, &medoids);
    ClusterModel {
        method: Method::MdsMedoid,
        k,
        seed,
        objective,
        assignments,
        representatives: medoids.iter().map(|&m| data[m].clone()).collect(),
        representative_indices: Some(medoids),
        history,
    }
}

// ------------------------------------------------------------ geometric ones

/// Flat coordinates scaled by `sqrt(w_t)`, so squared Euclidean distance
/// between two of them is the weighted squared L2 distance of the curves.
fn weighted_features(inter: &Interaction, mu: &TimeMeasure) -> Vec<f64> {
    let t = inter.len();
    let root: Vec<f64> = mu.weights().iter().map(|w| w.sqrt()).collect();
    inter
        .to_flat()
        .into_iter()
        .enumerate()
        .map(|(idx, v)| v * root[(idx / 2) % t])
        .collect()
}

/// Pointwise mean of curves on a shared grid, summed in index order.
fn mean_curve(curves: &[&Interaction]) -> Result<Interaction> {
    let first = curves
        .first()
        .ok_or_else(|| Error::invalid("mean of an empty set of curves"))?;
    let mut sum = vec![0.0; 4 * first.len()];
    for c in curves {
        for (s, v) in sum.iter_mut().zip(c.to_flat()) {
            *s += v;
        }
    }
    let m = curves.len() as f64;
    sum.iter_mut().for_each(|v| *v /= m);
    Interaction::from_flat(first.grid(), &sum)
}

/// Every interaction aligned (without reordering) onto `data[anchor]`.
pub fn align_to_anchor(data: &[Interaction], mu: &TimeMeasure, anchor: usize) -> Result<Vec<Interaction>> {
    if anchor >= data.len() {
        return Err(Error::invalid(format!("anchor {anchor} out of range for {} interactions", data.len())));
    }
    check_grids(data, mu)?;
    data.par_iter()
        .map(|x| align(&data[anchor], x, mu).map(|(_, moved)| moved))
        .collect()
}

/// First geometric scheme with `data[0]` as the anchor.
pub fn cluster_geo1(data: &[Interaction], mu: &TimeMeasure, k: usize, seed: u64) -> Result<ClusterModel> {
    cluster_geo1_anchored(data, mu, k, seed, 0)
}

/// First geometric scheme: align every interaction to `data[anchor]`, run
/// Euclidean Lloyd on the weighted flat coordinates, and return the pointwise
/// means of the aligned curves. The objective is the weighted within-cluster
/// sum of squares in the aligned space.
pub fn cluster_geo1_anchored(
    data: &[Interaction],
    mu: &TimeMeasure,
    k: usize,
    seed: u64,
    anchor: usize,
) -> Result<ClusterModel> {
    check_k(data.len(), k)?;
    let aligned = align_to_anchor(data, mu, anchor)?;
    let features: Vec<Vec<f64>> = aligned.par_iter().map(|a| weighted_features(a, mu)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcome = lloyd(&features, k, &mut rng)?;
    let representatives = (0..k)
        .map(|j| {
            let members: Vec<&Interaction> = aligned
                .iter()
                .zip(&outcome.assignments)
                .filter(|(_, &z)| z == j)
                .map(|(a, _)| a)
                .collect();
            mean_curve(&members)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterModel {
        method: Method::Geo1,
        k,
        seed,
        objective: outcome.objective,
        assignments: outcome.assignments,
        representatives,
        representative_indices: None,
        history: outcome.history,
    })
}

/// Seeded random partition with every cluster nonempty.
fn random_partition(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut z = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        z[i] = if rank < k { rank } else { rng.random_range(0..k) };
    }
    z
}

/// Centroid per cluster: members aligned to the cluster's lowest-index member,
/// then averaged pointwise.
fn geo2_centroids(data: &[Interaction], mu: &TimeMeasure, z: &[usize], k: usize) -> Result<Vec<Interaction>> {
    (0..k)
        .into_par_iter()
        .map(|j| {
            let members: Vec<usize> = (0..data.len()).filter(|&i| z[i] == j).collect();
            let reference = &data[*members.first().ok_or_else(|| Error::Numerical(format!("cluster {j} is empty")))?];
            let moved = members
                .iter()
                .map(|&i| align(reference, &data[i], mu).map(|(_, m)| m))
                .collect::<Result<Vec<_>>>()?;
            mean_curve(&moved.iter().collect::<Vec<_>>())
        })
        .collect()
}

/// Squared aligned residual of every interaction against every centroid.
fn residual_table(data: &[Interaction], centroids: &[Interaction], mu: &TimeMeasure) -> Result<Vec<Vec<f64>>> {
    data.par_iter()
        .map(|x| centroids.iter().map(|c| aligned_residual(c, x, mu)).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geo2Options {
    pub max_iter: usize,
    /// Independent random starts; the lowest objective wins.
    pub restarts: usize,
}

impl Default for Geo2Options {
    fn default() -> Self {
        Self {
            max_iter: kmeans::MAX_ITER,
            restarts: 10,
        }
    }
}

/// Second geometric scheme with default restarts and the given iteration cap.
pub fn cluster_geo2(
    data: &[Interaction],
    mu: &TimeMeasure,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<ClusterModel> {
    let opts = Geo2Options {
        max_iter,
        ..Geo2Options::default()
    };
    cluster_geo2_with(data, mu, k, seed, &opts)
}

/// Second geometric scheme.
///
/// Each start is a seeded random partition. Each round forms centroids as in
/// [`geo2_centroids`], then reassigns every interaction to the centroid with
/// the smallest aligned residual. The objective is the sum of squared aligned
/// residuals to the assigned centroid. Because the centroid step is not an
/// exact minimizer, a round that would raise the objective ends the run and
/// the best state of that run is kept. Across starts the lowest objective
/// wins, ties going to the earlier start.
pub fn cluster_geo2_with(
    data: &[Interaction],
    mu: &TimeMeasure,
    k: usize,
    seed: u64,
    opts: &Geo2Options,
) -> Result<ClusterModel> {
    let n = data.len();
    check_k(n, k)?;
    check_grids(data, mu)?;
    if opts.max_iter == 0 || opts.restarts == 0 {
        return Err(Error::invalid("max_iter and restarts must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Geo2Run> = None;
    for _ in 0..opts.restarts {
        let start = random_partition(n, k, &mut rng);
        let run = geo2_run(data, mu, k, start, opts.max_iter)?;
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    let run = best.expect("restarts >= 1");
    Ok(ClusterModel {
        method: Method::Geo2,
        k,
        seed,
        objective: run.objective,
        assignments: run.assignments,
        representatives: run.centroids,
        representative_indices: None,
        history: run.history,
    })
}

struct Geo2Run {
    assignments: Vec<usize>,
    centroids: Vec<Interaction>,
    objective: f64,
    history: Vec<f64>,
}

fn geo2_run(data: &[Interaction], mu: &TimeMeasure, k: usize, mut z: Vec<usize>, max_iter: usize) -> Result<Geo2Run> {
    let mut best: Option<(Vec<usize>, Vec<Interaction>, f64)> = None;
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let centroids = geo2_centroids(data, mu, &z, k)?;
        let table = residual_table(data, &centroids, mu)?;
        let objective: f64 = z.iter().zip(&table).map(|(&j, row)| row[j]).sum();
        if let Some((_, _, prev)) = &best {
            if objective > *prev * (1.0 + 1e-12) {
                break;
            }
        }
        let settled = best
            .as_ref()
            .is_some_and(|(_, _, prev)| (prev - objective).abs() <= kmeans::REL_TOL * prev.abs());
        history.push(objective);
        best = Some((z.clone(), centroids, objective));
        if settled {
            break;
        }
        let mut next: Vec<usize> = table.iter().map(|row| argmin(row.iter().copied()).0).collect();
        kmeans::repair_empty(&mut next, |i, j| table[i][j], k);
        if next == z {
            break;
        }
        z = next;
    }
    let (assignments, centroids, objective) = best.expect("max_iter >= 1");
    Ok(Geo2Run {
        assignments,
        centroids,
        objective,
        history,
    })
}

// ------------------------------------------------------------ spline baseline

/// Sixteen cubic coefficients: constant to cubic term for x1, y1, x2, y2,
/// fitted over the grid mapped affinely onto `[0, 1]`.
pub fn spline_features(inter: &Interaction) -> Result<Vec<f64>> {
    let grid = inter.grid();
    let (t0, t1) = (grid[0], grid[grid.len() - 1]);
    let ts: Vec<f64> = grid.iter().map(|t| (t - t0) / (t1 - t0)).collect();
    let mut out = Vec::with_capacity(16);
    for series in inter.coordinate_series() {
        out.extend_from_slice(&fit_cubic(&ts, &series)?.coefficients);
    }
    Ok(out)
}

/// Evaluates 16 spline coefficients on the unit-normalized version of `grid`.
pub fn spline_curve(coefficients: &[f64], grid: &[f64]) -> Result<Interaction> {
    if coefficients.len() != 16 {
        return Err(Error::invalid("spline features have 16 coefficients"));
    }
    let (t0, t1) = (grid[0], grid[grid.len() - 1]);
    let eval = |c: &[f64], t: f64| c[0] + t * (c[1] + t * (c[2] + t * c[3]));
    let mut first = Vec::with_capacity(grid.len());
    let mut second = Vec::with_capacity(grid.len());
    for &g in grid {
        let s = (g - t0) / (t1 - t0);
        first.push([eval(&coefficients[0..4], s), eval(&coefficients[4..8], s)]);
        second.push([eval(&coefficients[8..12], s), eval(&coefficients[12..16], s)]);
    }
    Interaction::from_parts(grid.to_vec(), first, second)
}

/// Spline-coefficient baseline: Euclidean Lloyd on [`spline_features`].
/// Each representative is the cluster member whose features lie nearest the
/// cluster centroid; the objective is the within-cluster sum of squares in
/// coefficient space.
pub fn cluster_spline_coef(data: &[Interaction], k: usize, seed: u64) -> Result<ClusterModel> {
    check_k(data.len(), k)?;
    let features: Vec<Vec<f64>> = data.par_iter().map(spline_features).collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcome = lloyd(&features, k, &mut rng)?;
    let indices: Vec<usize> = (0..k)
        .map(|j| {
            let (i, _) = argmin(features.iter().zip(&outcome.assignments).map(|(f, &z)| {
                if z == j {
                    sq_dist(f, &outcome.centroids[j])
                } else {
                    f64::INFINITY
                }
            }));
            i
        })
        .collect();
    Ok(ClusterModel {
        method: Method::SplineCoef,
        k,
        seed,
        objective: outcome.objective,
        assignments: outcome.assignments,
        representatives: indices.iter().map(|&i| data[i].clone()).collect(),
        representative_indices: Some(indices),
        history: outcome.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procrustes::{distance_matrix, rotation};
    use crate::trajectory::{uniform_measure, unit_grid};

    fn curve(t: usize, f: impl Fn(f64) -> ([f64; 2], [f64; 2])) -> Interaction {
        let grid = unit_grid(t);
        let (a, b): (Vec<_>, Vec<_>) = grid.iter().map(|&s| f(s)).unzip();
        Interaction::from_parts(grid, a, b).unwrap()
    }

    fn two_groups() -> Vec<Interaction> {
        let a = curve(21, |s| ([s, 0.0], [s, 1.0]));
        let b = curve(21, |s| ([s, 0.0], [1.0 - s, 2.0 * s * s]));
        let mut out = Vec::new();
        for i in 0..4 {
            let th = 0.7 * i as f64;
            out.push(a.transformed(&rotation(th), [i as f64, -2.0]));
            out.push(b.transformed(&rotation(-th), [3.0, i as f64]));
        }
        out
    }

    fn separated(z: &[usize]) -> bool {
        (0..z.len()).all(|i| (z[i] == z[i % 2]) && z[0] != z[1])
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::MdsMedoid, Method::Geo1, Method::Geo2, Method::SplineCoef] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("spline-coef".parse::<Method>().unwrap(), Method::SplineCoef);
        assert_eq!("mds".parse::<Method>().unwrap(), Method::MdsMedoid);
        assert!("kmedoids".parse::<Method>().is_err());
    }

    #[test]
    fn mds_separates_rigid_copies() {
        let data = two_groups();
        let mu = uniform_measure(21).unwrap();
        let d = distance_matrix(&data, &mu, false).unwrap();
        let m = cluster_mds(&data, &d, 2, 2, 5).unwrap();
        assert!(separated(&m.assignments));
        assert!(m.objective < 1e-12);
        m.validate().unwrap();
    }

    #[test]
    fn k_equals_n_is_exact() {
        let data = two_groups();
        let mu = uniform_measure(21).unwrap();
        let d = distance_matrix(&data, &mu, false).unwrap();
        let m = cluster_mds(&data, &d, 2, data.len(), 1).unwrap();
        assert_eq!(m.objective, 0.0);
        assert_eq!(m.assignments, (0..data.len()).collect::<Vec<_>>());
        assert!(cluster_spline_coef(&data, data.len(), 1).unwrap().objective < 1e-18);
    }

    #[test]
    fn geo_schemes_separate_rigid_copies() {
        let data = two_groups();
        let mu = uniform_measure(21).unwrap();
        let g1 = cluster_geo1(&data, &mu, 2, 3).unwrap();
        assert!(separated(&g1.assignments), "{:?}", g1.assignments);
        let g2 = cluster_geo2(&data, &mu, 2, 3, 50).unwrap();
        assert!(separated(&g2.assignments), "{:?}", g2.assignments);
        assert!(g2.objective < 1e-18);
    }

    #[test]
    fn rejects_bad_k() {
        let data = two_groups();
        let mu = uniform_measure(21).unwrap();
        let d = distance_matrix(&data, &mu, false).unwrap();
        assert!(cluster_mds(&data, &d, 2, 9, 0).is_err());
        assert!(cluster_geo1(&data, &mu, 0, 0).is_err());
        assert!(cluster_geo2(&data, &mu, 9, 0, 10).is_err());
        assert!(cluster_spline_coef(&data, 9, 0).is_err());
    }

    #[test]
    fn geo1_matches_direct_lloyd() {
        let data = two_groups();
        let mu = uniform_measure(21).unwrap();
        let model = cluster_geo1(&data, &mu, 2, 11).unwrap();
        let aligned = align_to_anchor(&data, &mu, 0).unwrap();
        let features: Vec<Vec<f64>> = aligned.iter().map(|a| weighted_features(a, &mu)).collect();
        let direct = lloyd(&features, 2, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(model.assignments, direct.assignments);
    }

    #[test]
    fn weighted_features_give_weighted_l2() {
        let a = curve(11, |s| ([s, s * s], [0.0, 1.0 - s]));
        let b = curve(11, |s| ([2.0 * s, 0.5], [s, s]));
        let mu = uniform_measure(11).unwrap();
        let e = sq_dist(&weighted_features(&a, &mu), &weighted_features(&b, &mu));
        let l2 = crate::procrustes::l2_distance(&a, &b, &mu).unwrap();
        assert!((e.sqrt() - l2).abs() < 1e-12);
    }

    #[test]
    fn spline_features_recover_cubics() {
        let inter = curve(31, |s| {
            (
                [1.0 + 2.0 * s - s.powi(3), 0.5 * s * s],
                [-3.0 + s, 4.0 * s.powi(3) - s],
            )
        });
        let f = spline_features(&inter).unwrap();
        let expected = [
            1.0, 2.0, 0.0, -1.0, 0.0, 0.0, 0.5, 0.0, -3.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 4.0,
        ];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-8, "{f:?}");
        }
        let back = spline_curve(&f, inter.grid()).unwrap();
        assert!(crate::procrustes::l2_distance(&back, &inter, &uniform_measure(31).unwrap()).unwrap() < 1e-8);
    }

    #[test]
    fn model_json_round_trips() {
        let data = two_groups();
        let mu = uniform_measure(21).unwrap();
        let m = cluster_geo2(&data, &mu, 2, 0, 10).unwrap();
        let back = ClusterModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.assignments, m.assignments);
        assert_eq!(back.method, Method::Geo2);
        assert!(m.to_json().unwrap().contains("\"geo2\""));
    }
}
