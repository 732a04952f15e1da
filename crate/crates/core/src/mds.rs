//! Metric multidimensional scaling of a distance matrix.
//!
//! Torgerson (double-centering) coordinates seed a SMACOF majorization of the
//! raw stress `sum_{i,j} (|y_i - y_j| - d_ij)^2`, taken over ordered pairs.
//! Dimensions are built up one at a time: the solution in dimension `b - 1`,
//! padded with a zero column, is always one of the starts in dimension `b`,
//! so reported stress never increases with the dimension.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procrustes::DistanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdsOptions {
    pub max_iter: usize,
    /// Stop once the relative stress improvement of one step falls below this.
    pub tol: f64,
    /// Extra random starts per dimension.
    pub restarts: usize,
}

impl Default for MdsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    /// `n` rows of `beta` coordinates.
    pub points: Vec<Vec<f64>>,
    pub beta: usize,
    pub stress: f64,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.points.len()
    }
}

/// Raw stress over ordered pairs.
pub fn stress(points: &[Vec<f64>], d: &DistanceMatrix) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let e = euclid(&points[i], &points[j]) - d.get(i, j);
            total += e * e;
        }
    }
    2.0 * total
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Eigen-decomposition of the doubly centred squared-distance matrix,
/// eigenpairs sorted by decreasing eigenvalue.
fn torgerson(d: &DistanceMatrix) -> (Vec<f64>, DMatrix<f64>) {
    let n = d.n();
    let sq = DMatrix::from_fn(n, n, |i, j| d.get(i, j).powi(2));
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).clone_owned();
        // Sign convention: largest-magnitude component positive.
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Classical scaling coordinates; negative eigenvalues contribute nothing.
fn classical(values: &[f64], vectors: &DMatrix<f64>, beta: usize) -> Vec<Vec<f64>> {
    let n = vectors.nrows();
    (0..n)
        .map(|i| {
            (0..beta)
                .map(|k| {
                    let lambda = values.get(k).copied().unwrap_or(0.0).max(0.0);
                    vectors.get((i, k)).copied().unwrap_or(0.0) * lambda.sqrt()
                })
                .collect()
        })
        .collect()
}

/// SMACOF with unit weights: repeated Guttman transforms.
fn smacof(mut x: Vec<Vec<f64>>, d: &DistanceMatrix, opts: &MdsOptions) -> (Vec<Vec<f64>>, f64) {
    let n = x.len();
    let mut current = stress(&x, d);
    if n < 2 {
        return (x, current);
    }
    let beta = x[0].len();
    for _ in 0..opts.max_iter {
        if current == 0.0 {
            break;
        }
        let mut next = vec![vec![0.0; beta]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dist = euclid(&x[i], &x[j]);
                if dist <= 0.0 {
                    continue;
                }
                let ratio = d.get(i, j) / dist;
                for k in 0..beta {
                    next[i][k] += ratio * (x[i][k] - x[j][k]);
                }
            }
            next[i].iter_mut().for_each(|v| *v /= n as f64);
        }
        let updated = stress(&next, d);
        let improvement = current - updated;
        if updated <= current {
            x = next;
        }
        let done = improvement <= opts.tol * current;
        current = current.min(updated);
        if done {
            break;
        }
    }
    (x, current)
}

fn random_start(n: usize, beta: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..beta).map(|_| rng.random_range(-scale..=scale)).collect())
        .collect()
}

/// Embeddings for every dimension `1..=max_beta`, sharing one dimension ladder.
pub fn embed_all(
    d: &DistanceMatrix,
    max_beta: usize,
    seed: u64,
    opts: &MdsOptions,
) -> Result<Vec<Embedding>> {
    let n = d.n();
    if max_beta == 0 || (n > 1 && max_beta > n - 1) || (n <= 1 && max_beta > 1) {
        return Err(Error::invalid(format!(
            "embedding dimension {max_beta} outside 1..={}",
            n.saturating_sub(1).max(1)
        )));
    }
    let (values, vectors) = torgerson(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (d.entries().iter().map(|v| v * v).sum::<f64>() / (n * n) as f64).sqrt();
    let mut out: Vec<Embedding> = Vec::with_capacity(max_beta);
    for beta in 1..=max_beta {
        let mut starts = vec![classical(&values, &vectors, beta)];
        if let Some(prev) = out.last() {
            starts.push(prev.points.iter().map(|p| {
                let mut q = p.clone();
                q.push(0.0);
                q
            }).collect());
        }
        for _ in 0..opts.restarts {
            starts.push(random_start(n, beta, scale, &mut rng));
        }
        let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
        for start in starts {
            let (pts, s) = smacof(start, d, opts);
            // Later starts must win by a margin, so ties keep the earlier start.
            let better = match &best {
                None => true,
                Some((_, b)) => s < *b - 1e-12 * b.max(1e-300),
            };
            if better {
                best = Some((pts, s));
            }
        }
        let (points, stress) = best.expect("at least one start");
        out.push(Embedding { points, beta, stress });
    }
    Ok(out)
}

/// Embeds the rows of `d` in `beta` dimensions.
pub fn embed(d: &DistanceMatrix, beta: usize, seed: u64) -> Result<Embedding> {
    embed_with(d, beta, seed, &MdsOptions::default())
}

pub fn embed_with(d: &DistanceMatrix, beta: usize, seed: u64, opts: &MdsOptions) -> Result<Embedding> {
    let mut all = embed_all(d, beta, seed, opts)?;
    Ok(all.pop().expect("beta >= 1"))
}

/// Stress of the plain classical-scaling coordinates in dimension `beta`.
pub fn classical_stress(d: &DistanceMatrix, beta: usize) -> f64 {
    let (values, vectors) = torgerson(d);
    stress(&classical(&values, &vectors, beta), d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_points(pts: &[Vec<f64>]) -> DistanceMatrix {
        DistanceMatrix::from_fn(pts.len(), |i, j| euclid(&pts[i], &pts[j]))
    }

    #[test]
    fn recovers_planar_configuration() {
        let pts = vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 4.0], vec![1.0, 1.0]];
        let d = from_points(&pts);
        let e = embed(&d, 2, 0).unwrap();
        assert!(e.stress <= 1e-12, "stress {}", e.stress);
        for i in 0..4 {
            for j in 0..4 {
                assert!((euclid(&e.points[i], &e.points[j]) - d.get(i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_matrix_collapses() {
        let d = DistanceMatrix::from_fn(5, |_, _| 0.0);
        let e = embed(&d, 3, 7).unwrap();
        assert_eq!(e.stress, 0.0);
        for p in &e.points {
            assert_eq!(p, &e.points[0]);
        }
    }

    #[test]
    fn rejects_bad_beta() {
        let d = DistanceMatrix::from_fn(4, |i, j| (i as f64 - j as f64).abs());
        assert!(embed(&d, 0, 0).is_err());
        assert!(embed(&d, 4, 0).is_err());
        assert!(embed(&d, 3, 0).is_ok());
    }

    #[test]
    fn stress_does_not_increase_with_beta() {
        // Path-graph distances on a cycle: not Euclidean-realizable.
        let n = 8;
        let d = DistanceMatrix::from_fn(n, |i, j| {
            let k = (i as i64 - j as i64).unsigned_abs() as usize;
            k.min(n - k) as f64
        });
        let all = embed_all(&d, 5, 3, &MdsOptions::default()).unwrap();
        for w in all.windows(2) {
            assert!(w[1].stress <= w[0].stress + 1e-9);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let d = DistanceMatrix::from_fn(6, |i, j| ((i * 7 + j * 7) % 5) as f64 + 1.0);
        assert_eq!(embed(&d, 2, 11).unwrap(), embed(&d, 2, 11).unwrap());
    }
}
