//! Rotation/translation/order-invariant distance between interactions.
//!
//! For two interactions `a = (a1, a2)` and `b = (b1, b2)` the distance is
//!
//! ```text
//! d(a, b) = min over orderings of b, rotations O (det +1) and shifts c of
//!           sqrt( sum_t w_t (|a1_t - O b1_t - c|^2 + |a2_t - O b2_t - c|^2) )
//! ```
//!
//! For a fixed ordering the minimization has a closed form: both pairs are
//! centred on their joint (two-curve) weighted mean and the rotation comes from
//! the SVD of the 2x2 cross-covariance.

use std::io::{BufRead, Write};

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Interaction, Point, TimeMeasure};

/// Optimal rigid motion carrying a source interaction onto a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Row-major 2x2 rotation with determinant +1.
    pub rotation: [[f64; 2]; 2],
    pub translation: Point,
    /// Whether the source pair order was reversed before rotating.
    pub swapped: bool,
}

impl Alignment {
    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0], [0.0, 1.0]],
            translation: [0.0, 0.0],
            swapped: false,
        }
    }

    /// Rotation angle in `(-pi, pi]`.
    pub fn angle(&self) -> f64 {
        self.rotation[1][0].atan2(self.rotation[0][0])
    }

    /// Applies the motion (including the optional swap) to `source`.
    pub fn apply(&self, source: &Interaction) -> Interaction {
        if self.swapped {
            source.swapped().transformed(&self.rotation, self.translation)
        } else {
            source.transformed(&self.rotation, self.translation)
        }
    }
}

struct Fit {
    rotation: Matrix2<f64>,
    translation: [f64; 2],
    residual: f64,
}

fn joint_mean(c1: &[Point], c2: &[Point], w: &[f64]) -> [f64; 2] {
    let mut m = [0.0; 2];
    for ((p, q), wt) in c1.iter().zip(c2).zip(w) {
        m[0] += wt * 0.5 * (p[0] + q[0]);
        m[1] += wt * 0.5 * (p[1] + q[1]);
    }
    m
}

/// Closed-form least-squares rigid fit of `(s1, s2)` onto `(a1, a2)` without reordering.
fn rigid_fit(a1: &[Point], a2: &[Point], s1: &[Point], s2: &[Point], w: &[f64]) -> Fit {
    let ma = joint_mean(a1, a2, w);
    let ms = joint_mean(s1, s2, w);

    // cross = sum_t w_t (s - ms)(a - ma)^T over both curves
    let mut cross = Matrix2::<f64>::zeros();
    let mut spread_a = 0.0;
    let mut spread_s = 0.0;
    for (target, source) in [(a1, s1), (a2, s2)] {
        for ((p, q), wt) in target.iter().zip(source).zip(w) {
            let da = [p[0] - ma[0], p[1] - ma[1]];
            let ds = [q[0] - ms[0], q[1] - ms[1]];
            for r in 0..2 {
                for c in 0..2 {
                    cross[(r, c)] += wt * ds[r] * da[c];
                }
            }
            spread_a += wt * (da[0] * da[0] + da[1] * da[1]);
            spread_s += wt * (ds[0] * ds[0] + ds[1] * ds[1]);
        }
    }

    let rotation = optimal_rotation(&cross, (spread_a * spread_s).sqrt());
    // Summed directly: the expanded form cancels catastrophically near zero.
    let mut residual = 0.0;
    for (target, source) in [(a1, s1), (a2, s2)] {
        for ((p, q), wt) in target.iter().zip(source).zip(w) {
            let ds = nalgebra::Vector2::new(q[0] - ms[0], q[1] - ms[1]);
            let moved = rotation * ds;
            let ex = p[0] - ma[0] - moved[0];
            let ey = p[1] - ma[1] - moved[1];
            residual += wt * (ex * ex + ey * ey);
        }
    }
    let rotated_ms = rotation * nalgebra::Vector2::new(ms[0], ms[1]);
    Fit {
        rotation,
        translation: [ma[0] - rotated_ms[0], ma[1] - rotated_ms[1]],
        residual,
    }
}

/// The rotation maximizing `trace(cross * O)` over SO(2).
///
/// Both transpose conventions of the SVD solution are formed and the one with
/// the larger objective kept.
fn optimal_rotation(cross: &Matrix2<f64>, scale: f64) -> Matrix2<f64> {
    let svd = cross.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Matrix2::identity();
    };
    let top = svd.singular_values.max();
    if !(top > f64::EPSILON * scale) || !top.is_finite() {
        return Matrix2::identity();
    }
    let v = v_t.transpose();
    let flip = |det: f64| Matrix2::new(1.0, 0.0, 0.0, det.signum());

    let classic = v * flip((v * u.transpose()).determinant()) * u.transpose();
    let written = v_t * flip((v_t * u).determinant()) * u;
    let score = |o: &Matrix2<f64>| (cross * o).trace();
    if score(&written) > score(&classic) {
        written
    } else {
        classic
    }
}

fn to_rows(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

fn check_shapes(a: &Interaction, b: &Interaction, mu: &TimeMeasure) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "grid length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if mu.len() != a.len() {
        return Err(Error::invalid(format!(
            "time measure has {} weights for a grid of {}",
            mu.len(),
            a.len()
        )));
    }
    Ok(())
}

fn fit_ordered(target: &Interaction, source: &Interaction, w: &[f64]) -> Fit {
    rigid_fit(
        target.first().samples(),
        target.second().samples(),
        source.first().samples(),
        source.second().samples(),
        w,
    )
}

/// Centres and reorients `source` onto `target` without changing its pair order.
///
/// Returns the optimal motion and the moved copy of `source`.
pub fn align(
    target: &Interaction,
    source: &Interaction,
    mu: &TimeMeasure,
) -> Result<(Alignment, Interaction)> {
    check_shapes(target, source, mu)?;
    let fit = fit_ordered(target, source, mu.weights());
    let alignment = Alignment {
        rotation: to_rows(&fit.rotation),
        translation: fit.translation,
        swapped: false,
    };
    let aligned = alignment.apply(source);
    Ok((alignment, aligned))
}

/// Squared residual of [`align`]: the minimum over rigid motions of the
/// weighted L2 distance, with the pair order held fixed.
pub fn aligned_residual(target: &Interaction, source: &Interaction, mu: &TimeMeasure) -> Result<f64> {
    check_shapes(target, source, mu)?;
    Ok(fit_ordered(target, source, mu.weights()).residual)
}

/// Procrustes distance together with the motion that realizes it.
pub fn distance_with_alignment(
    a: &Interaction,
    b: &Interaction,
    mu: &TimeMeasure,
) -> Result<(f64, Alignment)> {
    check_shapes(a, b, mu)?;
    let w = mu.weights();
    let direct = fit_ordered(a, b, w);
    let crossed = rigid_fit(
        a.first().samples(),
        a.second().samples(),
        b.second().samples(),
        b.first().samples(),
        w,
    );
    let (fit, swapped) = if crossed.residual < direct.residual {
        (crossed, true)
    } else {
        (direct, false)
    };
    Ok((
        fit.residual.sqrt(),
        Alignment {
            rotation: to_rows(&fit.rotation),
            translation: fit.translation,
            swapped,
        },
    ))
}

/// Procrustes distance between two interactions.
pub fn distance(a: &Interaction, b: &Interaction, mu: &TimeMeasure) -> Result<f64> {
    distance_with_alignment(a, b, mu).map(|(d, _)| d)
}

/// Weighted L2 distance with no alignment at all.
pub fn l2_distance(a: &Interaction, b: &Interaction, mu: &TimeMeasure) -> Result<f64> {
    check_shapes(a, b, mu)?;
    let mut total = 0.0;
    for (ca, cb) in [(a.first(), b.first()), (a.second(), b.second())] {
        for ((p, q), w) in ca.samples().iter().zip(cb.samples()).zip(mu.weights()) {
            total += w * ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2));
        }
    }
    Ok(total.sqrt())
}

/// Symmetric matrix of pairwise distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, zero diagonal and nonnegativity (tolerance 1e-10).
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i].abs() > 1e-10 {
                return Err(Error::invalid(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..n {
                let v = entries[i * n + j];
                if !v.is_finite() || v < -1e-10 {
                    return Err(Error::invalid(format!("entry ({i}, {j}) = {v} is invalid")));
                }
                if (v - entries[j * n + i]).abs() > 1e-10 {
                    return Err(Error::invalid(format!("entries ({i}, {j}) and ({j}, {i}) differ")));
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// Builds a matrix from a pairwise function evaluated once per unordered pair.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| ((i + 1)..n).map(|j| f(i, j)).collect())
            .collect();
        let mut entries = vec![0.0; n * n];
        for (i, row) in upper.into_iter().enumerate() {
            for (offset, v) in row.into_iter().enumerate() {
                let j = i + 1 + offset;
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Copy scaled so the largest entry is 1 (unchanged if all entries are 0).
    pub fn normalized(&self) -> Self {
        let m = self.max();
        if m <= 0.0 {
            return self.clone();
        }
        Self {
            n: self.n,
            entries: self.entries.iter().map(|v| v / m).collect(),
        }
    }

    /// Sub-matrix on the given indices, in order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let n = idx.len();
        let mut entries = Vec::with_capacity(n * n);
        for &i in idx {
            for &j in idx {
                entries.push(self.get(i, j));
            }
        }
        Self { n, entries }
    }

    /// CSV: a line holding `n`, then `n` comma-separated rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.n)?;
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads [`DistanceMatrix::write_csv`] output; lines starting with `#` are skipped.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut n = None;
        let mut entries = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = lineno + 1;
            match n {
                None => {
                    n = Some(line.parse::<usize>().map_err(|e| Error::parse(lineno, e.to_string()))?)
                }
                Some(n) => {
                    let row: Vec<f64> = line
                        .split(',')
                        .map(|f| f.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::parse(lineno, e.to_string()))?;
                    if row.len() != n {
                        return Err(Error::parse(lineno, format!("expected {n} values, got {}", row.len())));
                    }
                    entries.extend(row);
                }
            }
        }
        let n = n.ok_or_else(|| Error::parse(1, "missing matrix size"))?;
        Self::from_entries(n, entries)
    }

    /// Binary layout: `n` as little-endian u64, then `n * n` little-endian f64 row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.entries.len());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for v in &self.entries {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::invalid("binary distance matrix is truncated"));
        }
        let n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
        let expected = n
            .checked_mul(n)
            .and_then(|nn| nn.checked_mul(8))
            .and_then(|b| b.checked_add(8))
            .ok_or_else(|| Error::invalid("binary distance matrix size overflows"))?;
        if bytes.len() != expected {
            return Err(Error::invalid(format!(
                "binary distance matrix has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let entries = bytes[8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::from_entries(n, entries)
    }
}

/// All pairwise Procrustes distances, optionally scaled so the largest is 1.
pub fn distance_matrix(
    data: &[Interaction],
    mu: &TimeMeasure,
    normalize: bool,
) -> Result<DistanceMatrix> {
    if data.is_empty() {
        return Err(Error::invalid("cannot build a distance matrix from no interactions"));
    }
    for inter in data {
        check_shapes(&data[0], inter, mu)?;
    }
    let matrix = DistanceMatrix::from_fn(data.len(), |i, j| {
        distance(&data[i], &data[j], mu).expect("shapes checked above")
    });
    Ok(if normalize { matrix.normalized() } else { matrix })
}

/// Rotation matrix for angle `theta`, row-major.
pub fn rotation(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{uniform_measure, unit_grid};

    fn example_pair() -> (Interaction, Interaction) {
        let grid = unit_grid(11);
        let target = Interaction::from_parts(
            grid.clone(),
            grid.iter().map(|&t| [t, 0.0]).collect(),
            grid.iter().map(|&t| [0.0, t]).collect(),
        )
        .unwrap();
        let source = Interaction::from_parts(
            grid.clone(),
            grid.iter().map(|&t| [t, 0.1 * t]).collect(),
            grid.iter().map(|&t| [0.0, t]).collect(),
        )
        .unwrap();
        (target, source)
    }

    /// Residual for a fixed angle with the optimal translation (mean difference).
    fn residual_at(target: &Interaction, source: &Interaction, w: &[f64], theta: f64) -> f64 {
        let r = rotation(theta);
        let moved = source.transformed(&r, [0.0, 0.0]);
        let ma = joint_mean(target.first().samples(), target.second().samples(), w);
        let ms = joint_mean(moved.first().samples(), moved.second().samples(), w);
        let shifted = moved.transformed(&[[1.0, 0.0], [0.0, 1.0]], [ma[0] - ms[0], ma[1] - ms[1]]);
        let mu = TimeMeasure::new(w.to_vec()).unwrap();
        l2_distance(target, &shifted, &mu).unwrap().powi(2)
    }

    fn grid_search(target: &Interaction, source: &Interaction, w: &[f64], steps: usize) -> (f64, f64) {
        (0..steps)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
                (residual_at(target, source, w, theta), theta)
            })
            .fold((f64::INFINITY, 0.0), |best, cur| if cur.0 < best.0 { cur } else { best })
    }

    #[test]
    fn identity_alignment() {
        let (target, _) = example_pair();
        let mu = uniform_measure(11).unwrap();
        let (al, aligned) = align(&target, &target, &mu).unwrap();
        assert!((al.rotation[0][0] - 1.0).abs() < 1e-10 && al.rotation[1][0].abs() < 1e-10);
        assert!(al.translation[0].abs() < 1e-10 && al.translation[1].abs() < 1e-10);
        assert!(l2_distance(&aligned, &target, &mu).unwrap() < 1e-10);
    }

    #[test]
    fn recovers_rigid_motion() {
        let (target, _) = example_pair();
        let mu = uniform_measure(11).unwrap();
        let moved = target.transformed(&rotation(std::f64::consts::FRAC_PI_2), [3.0, -2.0]);
        let (al, aligned) = align(&target, &moved, &mu).unwrap();
        assert!(!al.swapped);
        for (p, q) in aligned.to_flat().iter().zip(target.to_flat()) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_fine_angle_grid() {
        let (target, source) = example_pair();
        let mu = uniform_measure(11).unwrap();
        let (al, _) = align(&target, &source, &mu).unwrap();
        let residual = aligned_residual(&target, &source, &mu).unwrap();
        let (best, theta) = grid_search(&target, &source, mu.weights(), 1_000_000);
        assert!((residual - best).abs() < 1e-5, "{residual} vs {best}");
        let diff = (al.angle() - theta).rem_euclid(2.0 * std::f64::consts::PI);
        assert!(diff.min(2.0 * std::f64::consts::PI - diff) < 1e-5);
    }

    #[test]
    fn distance_matches_grid_over_both_orders() {
        let (target, source) = example_pair();
        let mu = uniform_measure(11).unwrap();
        let d = distance(&target, &source, &mu).unwrap();
        let direct = grid_search(&target, &source, mu.weights(), 100_000).0;
        let crossed = grid_search(&target, &source.swapped(), mu.weights(), 100_000).0;
        assert!((d - direct.min(crossed).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn swapped_copy_is_at_zero_distance() {
        let (target, _) = example_pair();
        let mu = uniform_measure(11).unwrap();
        let copy = target.swapped().transformed(&rotation(1.1), [-4.0, 7.5]);
        let (d, al) = distance_with_alignment(&target, &copy, &mu).unwrap();
        assert!(d < 1e-9);
        assert!(al.swapped);
        assert!(l2_distance(&al.apply(&copy), &target, &mu).unwrap() < 1e-9);
    }

    #[test]
    fn coincident_points_give_identity() {
        let grid = unit_grid(5);
        let still = Interaction::from_parts(grid.clone(), vec![[1.0, 1.0]; 5], vec![[1.0, 1.0]; 5]).unwrap();
        let mu = uniform_measure(5).unwrap();
        let (al, _) = align(&still, &still, &mu).unwrap();
        assert_eq!(al.rotation, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let (target, _) = example_pair();
        let short = crate::trajectory::resample(&target, 7).unwrap();
        let mu = uniform_measure(11).unwrap();
        assert!(align(&target, &short, &mu).is_err());
        assert!(distance(&target, &short, &mu).is_err());
    }

    #[test]
    fn matrix_io_round_trip() {
        let m = DistanceMatrix::from_fn(3, |i, j| (i + j) as f64 / 7.0);
        let mut csv = Vec::new();
        m.write_csv(&mut csv).unwrap();
        assert_eq!(DistanceMatrix::read_csv(&csv[..]).unwrap(), m);
        assert_eq!(DistanceMatrix::from_bytes(&m.to_bytes()).unwrap(), m);
        assert!(DistanceMatrix::from_bytes(&m.to_bytes()[..20]).is_err());
    }

    #[test]
    fn empty_data_is_rejected() {
        let mu = uniform_measure(3).unwrap();
        assert!(distance_matrix(&[], &mu, false).is_err());
    }

    #[test]
    fn single_interaction_matrix() {
        let (target, _) = example_pair();
        let mu = uniform_measure(11).unwrap();
        let m = distance_matrix(&[target], &mu, true).unwrap();
        assert_eq!(m.n(), 1);
        assert_eq!(m.get(0, 0), 0.0);
    }
}
