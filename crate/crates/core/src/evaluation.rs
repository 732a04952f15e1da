//! Cluster quality and stability diagnostics.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    cluster_geo1_anchored, cluster_geo2_with, cluster_mds_embedded, cluster_spline_coef, spline_curve,
    spline_features, ClusterModel, Geo2Options, Method,
};
use crate::error::{Error, Result};
use crate::mds::{self, MdsOptions};
use crate::procrustes::{distance, DistanceMatrix};
use crate::trajectory::{Interaction, TimeMeasure};

fn cluster_count(assignments: &[usize]) -> usize {
    assignments.iter().max().map_or(0, |m| m + 1)
}

fn check_len(d: &DistanceMatrix, assignments: &[usize]) -> Result<()> {
    if d.n() != assignments.len() {
        return Err(Error::invalid(format!(
            "{} assignments for a {}x{} distance matrix",
            assignments.len(),
            d.n(),
            d.n()
        )));
    }
    Ok(())
}

/// Silhouette value of every point.
///
/// `a(i)` is the mean distance to the other members of its cluster, `b(i)` the
/// smallest mean distance to another nonempty cluster. Members of singleton
/// clusters, and points with `a(i) = b(i) = 0`, get 0.
pub fn silhouette(d: &DistanceMatrix, assignments: &[usize]) -> Result<Vec<f64>> {
    check_len(d, assignments)?;
    let k = cluster_count(assignments);
    let mut sizes = vec![0usize; k];
    for &z in assignments {
        sizes[z] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::invalid("silhouettes need at least two nonempty clusters"));
    }
    Ok((0..d.n())
        .into_par_iter()
        .map(|i| {
            let own = assignments[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, &z) in assignments.iter().enumerate() {
                if j != i {
                    sums[z] += d.get(i, j);
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect())
}

/// `(1 / 2n)` times the sum of squared distances over ordered same-cluster pairs.
pub fn stability_statistic(d: &DistanceMatrix, assignments: &[usize]) -> Result<f64> {
    check_len(d, assignments)?;
    let n = d.n();
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| assignments[j] == assignments[i])
                .map(|j| d.get(i, j).powi(2))
                .sum::<f64>()
        })
        .sum();
    Ok(total / (2 * n) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub method: Method,
    /// Distances measured to medoids (`true`) or to mean interactions (`false`).
    pub use_medoid: bool,
    /// Sum over points of the squared distance to the assigned representative.
    pub total_within: f64,
    /// Mean squared distance from members to their cluster's representative.
    pub per_cluster_within: Vec<f64>,
    /// Mean squared distance from non-members to the cluster's representative.
    pub per_cluster_between: Vec<f64>,
    /// Sample variances of the squared distances behind the two means.
    pub within_variance: Vec<f64>,
    pub between_variance: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
    /// `None` when fewer than two clusters are nonempty.
    pub silhouettes: Option<Vec<f64>>,
}

fn mean_and_sample_variance(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Member of each cluster minimizing the summed squared distance to the other
/// members; ties go to the lowest index.
pub fn cluster_medoids(d: &DistanceMatrix, assignments: &[usize], k: usize) -> Result<Vec<usize>> {
    check_len(d, assignments)?;
    (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..d.n()).filter(|&i| assignments[i] == c).collect();
            let mut best: Option<(usize, f64)> = None;
            for &m in &members {
                let cost: f64 = members.iter().map(|&i| d.get(i, m).powi(2)).sum();
                if best.is_none_or(|b| cost < b.1) {
                    best = Some((m, cost));
                }
            }
            best.map(|b| b.0).ok_or_else(|| Error::invalid(format!("cluster {c} is empty")))
        })
        .collect()
}

/// Within and between statistics, total within, and silhouettes for `model`.
///
/// With `use_medoid` the representative of a cluster is a data point: the
/// model's own medoid when it has one, otherwise the cluster medoid under
/// `d`. Without it the representative is the mean interaction (the aligned
/// mean for the geometric schemes, the curve of the mean coefficients for the
/// spline baseline); medoid-only models reject this.
pub fn quality(
    data: &[Interaction],
    model: &ClusterModel,
    d: &DistanceMatrix,
    mu: &TimeMeasure,
    use_medoid: bool,
) -> Result<QualityReport> {
    model.validate()?;
    let n = data.len();
    if model.n() != n || d.n() != n {
        return Err(Error::invalid("model, data and distance matrix disagree on the number of points"));
    }
    let k = model.k;
    // sq[i][c]: squared distance from point i to the representative of cluster c.
    let sq: Vec<Vec<f64>> = if use_medoid {
        let medoids = match &model.representative_indices {
            Some(idx) => idx.clone(),
            None => cluster_medoids(d, &model.assignments, k)?,
        };
        (0..n).map(|i| medoids.iter().map(|&m| d.get(i, m).powi(2)).collect()).collect()
    } else {
        let means = match model.method {
            Method::MdsMedoid => {
                return Err(Error::invalid(
                    "medoid models have no mean interactions; evaluate with medoids",
                ))
            }
            Method::Geo1 | Method::Geo2 => model.representatives.clone(),
            Method::SplineCoef => spline_means(data, &model.assignments, k)?,
        };
        data.par_iter()
            .map(|x| means.iter().map(|g| distance(x, g, mu).map(|v| v * v)).collect())
            .collect::<Result<_>>()?
    };

    let sizes = model.cluster_sizes();
    let mut within = Vec::with_capacity(k);
    let mut between = Vec::with_capacity(k);
    let mut within_var = Vec::with_capacity(k);
    let mut between_var = Vec::with_capacity(k);
    for c in 0..k {
        let (inside, outside): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| model.assignments[i] == c);
        let (wm, wv) = mean_and_sample_variance(&inside.iter().map(|&i| sq[i][c]).collect::<Vec<_>>());
        let (bm, bv) = mean_and_sample_variance(&outside.iter().map(|&i| sq[i][c]).collect::<Vec<_>>());
        within.push(wm);
        within_var.push(wv);
        between.push(bm);
        between_var.push(bv);
    }
    let total_within = (0..n).map(|i| sq[i][model.assignments[i]]).sum();
    let silhouettes = if sizes.iter().filter(|&&s| s > 0).count() >= 2 {
        Some(silhouette(d, &model.assignments)?)
    } else {
        None
    };
    Ok(QualityReport {
        method: model.method,
        use_medoid,
        total_within,
        per_cluster_within: within,
        per_cluster_between: between,
        within_variance: within_var,
        between_variance: between_var,
        cluster_sizes: sizes,
        silhouettes,
    })
}

/// Curves of the per-cluster mean spline coefficients on `data[0]`'s grid.
fn spline_means(data: &[Interaction], assignments: &[usize], k: usize) -> Result<Vec<Interaction>> {
    let features: Vec<Vec<f64>> = data.par_iter().map(spline_features).collect::<Result<_>>()?;
    let mut sums = vec![vec![0.0; 16]; k];
    let mut counts = vec![0usize; k];
    for (f, &z) in features.iter().zip(assignments) {
        counts[z] += 1;
        for (s, v) in sums[z].iter_mut().zip(f) {
            *s += v;
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &c)| {
            let mean: Vec<f64> = s.iter().map(|v| v / c.max(1) as f64).collect();
            spline_curve(&mean, data[0].grid())
        })
        .collect()
}

impl QualityReport {
    /// Rows `id,cluster,silhouette`, grouped by cluster with silhouettes descending.
    pub fn write_silhouette_csv<W: Write>(&self, ids: &[String], assignments: &[usize], mut out: W) -> Result<()> {
        let Some(values) = &self.silhouettes else {
            return Err(Error::invalid("silhouettes are undefined for fewer than two clusters"));
        };
        if ids.len() != values.len() || assignments.len() != values.len() {
            return Err(Error::invalid("ids, assignments and silhouettes differ in length"));
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| {
            assignments[a]
                .cmp(&assignments[b])
                .then(values[b].total_cmp(&values[a]))
                .then(a.cmp(&b))
        });
        writeln!(out, "id,cluster,silhouette")?;
        for i in order {
            writeln!(out, "{},{},{:?}", ids[i], assignments[i], values[i])?;
        }
        Ok(())
    }
}

/// Nearest primitive for every interaction; ties go to the lowest index.
pub fn transfer_primitives(data: &[Interaction], primitives: &[Interaction], mu: &TimeMeasure) -> Result<Vec<usize>> {
    if primitives.is_empty() {
        return Err(Error::invalid("no primitives to transfer"));
    }
    data.par_iter()
        .map(|x| {
            let mut best = (0, f64::INFINITY);
            for (j, p) in primitives.iter().enumerate() {
                let v = distance(x, p, mu)?;
                if v < best.1 {
                    best = (j, v);
                }
            }
            Ok(best.0)
        })
        .collect()
}

// ------------------------------------------------------------------- sweeps

/// A tuning parameter a stability sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    K,
    Beta,
    MaxIter,
    Anchor,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::Beta => "beta",
            SweepParam::MaxIter => "max_iter",
            SweepParam::Anchor => "anchor",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(SweepParam::K),
            "beta" => Ok(SweepParam::Beta),
            "max_iter" => Ok(SweepParam::MaxIter),
            "anchor" => Ok(SweepParam::Anchor),
            other => Err(Error::invalid(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

/// Method settings for one clustering run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodParams {
    pub method: Method,
    pub k: usize,
    pub beta: usize,
    pub max_iter: usize,
    pub anchor: usize,
    /// Random starts for geo2.
    pub restarts: usize,
    pub seed: u64,
}

impl MethodParams {
    fn with(mut self, param: SweepParam, value: usize) -> Self {
        match param {
            SweepParam::K => self.k = value,
            SweepParam::Beta => self.beta = value,
            SweepParam::MaxIter => self.max_iter = value,
            SweepParam::Anchor => self.anchor = value,
        }
        self
    }
}

/// Runs the configured method. `embeddings[b - 1]`, when present, is reused
/// as the dimension-`b` MDS embedding.
pub fn run_method(
    data: &[Interaction],
    d: &DistanceMatrix,
    mu: &TimeMeasure,
    params: &MethodParams,
    embeddings: Option<&[mds::Embedding]>,
) -> Result<ClusterModel> {
    match params.method {
        Method::MdsMedoid => {
            let cached = embeddings.and_then(|e| e.get(params.beta.wrapping_sub(1)));
            match cached {
                Some(e) => cluster_mds_embedded(data, d, e, params.k, params.seed),
                None => {
                    let e = mds::embed(d, params.beta, params.seed)?;
                    cluster_mds_embedded(data, d, &e, params.k, params.seed)
                }
            }
        }
        Method::Geo1 => cluster_geo1_anchored(data, mu, params.k, params.seed, params.anchor),
        Method::Geo2 => cluster_geo2_with(
            data,
            mu,
            params.k,
            params.seed,
            &Geo2Options {
                max_iter: params.max_iter,
                restarts: params.restarts,
            },
        ),
        Method::SplineCoef => cluster_spline_coef(data, params.k, params.seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityGrid {
    pub axis1_name: String,
    pub axis2_name: String,
    pub axis1_values: Vec<usize>,
    pub axis2_values: Vec<usize>,
    /// `values[a][b]`; `None` where the clustering run failed.
    pub values: Vec<Vec<Option<f64>>>,
    /// Difference from the previous cell along axis 1.
    pub delta1: Vec<Vec<Option<f64>>>,
    /// Difference from the previous cell along axis 2.
    pub delta2: Vec<Vec<Option<f64>>>,
    /// Diagnostics for the failed cells, as `(a, b, message)`.
    pub failures: Vec<(usize, usize, String)>,
}

impl StabilityGrid {
    /// Long-form rows `axis1,axis2,value,delta1,delta2`; missing entries are empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let cell = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
        writeln!(out, "{},{},value,delta1,delta2", self.axis1_name, self.axis2_name)?;
        for (a, &x) in self.axis1_values.iter().enumerate() {
            for (b, &y) in self.axis2_values.iter().enumerate() {
                writeln!(
                    out,
                    "{x},{y},{},{},{}",
                    cell(self.values[a][b]),
                    cell(self.delta1[a][b]),
                    cell(self.delta2[a][b])
                )?;
            }
        }
        Ok(())
    }
}

/// Reruns the method on every cell of a two-parameter grid and evaluates the
/// stability statistic on the true distance matrix `d`.
pub fn stability_sweep(
    data: &[Interaction],
    d: &DistanceMatrix,
    mu: &TimeMeasure,
    base: &MethodParams,
    axis1: (SweepParam, &[usize]),
    axis2: (SweepParam, &[usize]),
) -> Result<StabilityGrid> {
    let (p1, v1) = axis1;
    let (p2, v2) = axis2;
    if v1.is_empty() || v2.is_empty() {
        return Err(Error::invalid("sweep grids must be nonempty"));
    }
    if p1 == p2 {
        return Err(Error::invalid("sweep axes must be different parameters"));
    }
    // One MDS dimension ladder serves every beta in the grid.
    let embeddings = if base.method == Method::MdsMedoid && d.n() > 1 {
        let top = v1
            .iter()
            .map(|&v| base.with(p1, v).beta)
            .chain(v2.iter().map(|&v| base.with(p2, v).beta))
            .max()
            .unwrap_or(base.beta)
            .clamp(1, d.n() - 1);
        Some(mds::embed_all(d, top, base.seed, &MdsOptions::default())?)
    } else {
        None
    };
    let cells: Vec<(usize, usize)> = (0..v1.len()).flat_map(|a| (0..v2.len()).map(move |b| (a, b))).collect();
    let results: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(a, b)| {
            let params = base.with(p1, v1[a]).with(p2, v2[b]);
            let model = run_method(data, d, mu, &params, embeddings.as_deref())?;
            stability_statistic(d, &model.assignments)
        })
        .collect();
    let mut values = vec![vec![None; v2.len()]; v1.len()];
    let mut failures = Vec::new();
    for (&(a, b), r) in cells.iter().zip(results) {
        match r {
            Ok(v) => values[a][b] = Some(v),
            Err(e) => failures.push((a, b, e.to_string())),
        }
    }
    let diff = |x: Option<f64>, y: Option<f64>| x.zip(y).map(|(x, y)| x - y);
    let delta1 = (0..v1.len())
        .map(|a| {
            (0..v2.len())
                .map(|b| if a == 0 { None } else { diff(values[a][b], values[a - 1][b]) })
                .collect()
        })
        .collect();
    let delta2 = (0..v1.len())
        .map(|a| {
            (0..v2.len())
                .map(|b| if b == 0 { None } else { diff(values[a][b], values[a][b - 1]) })
                .collect()
        })
        .collect();
    Ok(StabilityGrid {
        axis1_name: p1.name().into(),
        axis2_name: p2.name().into(),
        axis1_values: v1.to_vec(),
        axis2_values: v2.to_vec(),
        values,
        delta1,
        delta2,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_statistic() {
        let d = DistanceMatrix::from_fn(4, |i, j| if i == j { 0.0 } else { 1.0 });
        assert_eq!(stability_statistic(&d, &[0, 0, 0, 0]).unwrap(), 1.5);
        assert_eq!(stability_statistic(&d, &[0, 1, 2, 3]).unwrap(), 0.0);
    }

    #[test]
    fn zero_diameter_clusters_score_one() {
        let d = DistanceMatrix::from_fn(4, |i, j| if (i < 2) == (j < 2) { 0.0 } else { 5.0 });
        let s = silhouette(&d, &[0, 0, 1, 1]).unwrap();
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn singletons_score_zero() {
        let d = DistanceMatrix::from_fn(3, |i, j| (i as f64 - j as f64).abs());
        let s = silhouette(&d, &[0, 0, 1]).unwrap();
        assert_eq!(s[2], 0.0);
        assert!(silhouette(&d, &[0, 0, 0]).is_err());
    }

    #[test]
    fn sample_variance() {
        let (m, v) = mean_and_sample_variance(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(mean_and_sample_variance(&[7.0]), (7.0, 0.0));
    }
}
