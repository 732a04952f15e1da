//! Two-step spline change-point segmentation of raw encounters.
//!
//! Step one proposes change points per coordinate series with a recursive
//! midpoint search. Step two merges the proposals from all four series and
//! removes knots in a single forward pass controlled by a tolerance; the
//! tolerance itself is picked from a candidate grid by a penalized
//! squared-error criterion.
//!
//! All squared errors are measured on coordinates divided by one common
//! scale per encounter (the root mean of the four series variances), so
//! tolerances are unitless and the knot penalty is comparable across
//! encounters recorded in different units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{resample, Interaction, Trajectory};

/// Fewest raw samples a segment may hold.
pub const MIN_SEGMENT_SAMPLES: usize = 5;
/// Smallest index gap between surviving knots (`MIN_SEGMENT_SAMPLES - 1`).
const MIN_KNOT_GAP: usize = MIN_SEGMENT_SAMPLES - 1;
/// Each side of a proposed split must hold at least this many samples.
const MIN_FIT_SAMPLES: usize = 4;

/// Least-squares cubic `c0 + c1 t + c2 t^2 + c3 t^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicFit {
    pub coefficients: [f64; 4],
    pub sse: f64,
}

impl CubicFit {
    pub fn eval(&self, t: f64) -> f64 {
        let c = &self.coefficients;
        c[0] + t * (c[1] + t * (c[2] + t * c[3]))
    }
}

/// Solves the 4x4 system in place with partial pivoting.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    let scale = (0..4).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[pivot][col].abs() > 1e-12 * scale) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = ((row + 1)..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Fits a cubic by least squares through the normal equations.
///
/// Time is mapped to `[-1, 1]` before forming the normal equations and the
/// coefficients are converted back to the raw time basis afterwards.
pub fn fit_cubic(ts: &[f64], ys: &[f64]) -> Result<CubicFit> {
    if ts.len() != ys.len() {
        return Err(Error::invalid("time and value series differ in length"));
    }
    if ts.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "a cubic needs at least 4 samples, got {}",
            ts.len()
        )));
    }
    let (lo, hi) = ts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    if !(half > 0.0) {
        return Err(Error::DegenerateFit("all time stamps coincide".into()));
    }

    let mut gram = [[0.0; 4]; 4];
    let mut rhs = [0.0; 4];
    for (&t, &y) in ts.iter().zip(ys) {
        let s = (t - centre) / half;
        let pow = [1.0, s, s * s, s * s * s];
        for r in 0..4 {
            rhs[r] += pow[r] * y;
            for c in 0..4 {
                gram[r][c] += pow[r] * pow[c];
            }
        }
    }
    let scaled = solve4(gram, rhs)
        .ok_or_else(|| Error::DegenerateFit("fewer than 4 distinct time stamps".into()))?;

    let sse = ts
        .iter()
        .zip(ys)
        .map(|(&t, &y)| {
            let s = (t - centre) / half;
            let fit = scaled[0] + s * (scaled[1] + s * (scaled[2] + s * scaled[3]));
            (y - fit).powi(2)
        })
        .sum();

    // sum_k a_k ((t - c) / h)^k expanded in powers of t.
    const BINOM: [[f64; 4]; 4] = [
        [1.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0],
        [1.0, 3.0, 3.0, 1.0],
    ];
    let mut coefficients = [0.0; 4];
    for (k, a) in scaled.iter().enumerate() {
        let hk = half.powi(k as i32);
        for m in 0..=k {
            coefficients[m] += a / hk * BINOM[k][m] * (-centre).powi((k - m) as i32);
        }
    }
    Ok(CubicFit { coefficients, sse })
}

fn span_sse(ts: &[f64], ys: &[f64], start: usize, end: usize) -> Option<f64> {
    fit_cubic(&ts[start..=end], &ys[start..=end]).ok().map(|f| f.sse)
}

/// A raw encounter awaiting segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Encounter {
    pub id: String,
    pub interaction: Interaction,
}

impl Encounter {
    pub fn new(id: impl Into<String>, interaction: Interaction) -> Result<Self> {
        if interaction.len() < MIN_SEGMENT_SAMPLES {
            return Err(Error::invalid(format!(
                "an encounter needs at least {MIN_SEGMENT_SAMPLES} samples, got {}",
                interaction.len()
            )));
        }
        Ok(Self {
            id: id.into(),
            interaction,
        })
    }

    /// The four coordinate series divided by [`error_unit`].
    fn scaled_series(&self) -> [Vec<f64>; 4] {
        let series = self.interaction.coordinate_series();
        let unit = error_unit(&series).sqrt();
        series.map(|s| s.into_iter().map(|v| v / unit).collect())
    }
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Coefficients of one segment: a cubic for each of the four series.
const SEGMENT_PARAMS: f64 = 16.0;

/// Robust per-sample noise variance pooled over the series, from the median
/// absolute second difference (which has variance `6 sigma^2` on linear
/// stretches).
fn noise_variance(series: &[Vec<f64>]) -> f64 {
    let mut d2: Vec<f64> = series
        .iter()
        .flat_map(|s| s.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()))
        .collect();
    if d2.is_empty() {
        return 0.0;
    }
    d2.sort_by(f64::total_cmp);
    let median = d2[d2.len() / 2];
    let sigma = median / (0.674_489_750_196_081_7 * 6f64.sqrt());
    sigma * sigma
}

/// Squared-error unit shared by the tolerances and the penalized criterion:
/// the error reduction a segment's worth of coefficients buys by chance under
/// a BIC-style accounting, `sigma^2 * 16 * ln n`. A unit penalty per knot is
/// then one segment's cost. Floored relative to the data spread so noiseless
/// input stays finite.
fn error_unit(series: &[Vec<f64>]) -> f64 {
    let n = series.first().map_or(0, Vec::len).max(2) as f64;
    let spread = series.iter().map(|s| variance(s)).sum::<f64>() / series.len() as f64;
    let floor = 1e-12 * spread;
    let unit = noise_variance(series).max(floor) * SEGMENT_PARAMS * n.ln();
    if unit > 0.0 && unit.is_finite() {
        unit
    } else {
        1.0
    }
}

/// Knot indices into the raw grid, strictly increasing and interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointSet {
    pub points: Vec<usize>,
    /// Tolerance used by the pruning pass; `None` for raw proposals.
    pub tolerance: Option<f64>,
}

/// Recursive midpoint search on one series over the inclusive span `[start, end]`.
fn propose(ts: &[f64], ys: &[f64], start: usize, end: usize, out: &mut Vec<usize>) {
    if end - start < 2 * (MIN_FIT_SAMPLES - 1) {
        return;
    }
    let Ok(base) = fit_cubic(&ts[start..=end], &ys[start..=end]) else {
        return;
    };
    let window = &ys[start..=end];
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let total: f64 = window.iter().map(|y| (y - mean).powi(2)).sum();
    let margin = 1e-10 * total;
    let residual2: Vec<f64> = (start..=end).map(|i| (ys[i] - base.eval(ts[i])).powi(2)).collect();
    let half_error = |a: usize, b: usize| residual2[a - start..=b - start].iter().sum::<f64>();

    let (mut lo, mut hi) = (start, end);
    let mut found = None;
    loop {
        let mid = (lo + hi) / 2;
        if mid <= lo || mid >= hi || mid - start < MIN_FIT_SAMPLES - 1 || end - mid < MIN_FIT_SAMPLES - 1 {
            break;
        }
        let split = match (span_sse(ts, ys, start, mid), span_sse(ts, ys, mid, end)) {
            (Some(l), Some(r)) => l + r,
            _ => break,
        };
        if split < base.sse - margin {
            found = Some(mid);
            break;
        }
        // Keep searching in the half of the valid interval the single fit
        // explains worst; the other half is ruled out.
        if half_error(lo, mid) >= half_error(mid, hi) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if let Some(mid) = found {
        out.push(mid);
        propose(ts, ys, start, mid, out);
        propose(ts, ys, mid, end, out);
    }
}

/// Proposes change points for each coordinate of one trajectory and returns
/// the union.
pub fn add_change_points(traj: &Trajectory) -> ChangePointSet {
    let ts = traj.grid();
    let mut points = Vec::new();
    for axis in 0..2 {
        propose(ts, &traj.coordinate(axis), 0, ts.len() - 1, &mut points);
    }
    points.sort_unstable();
    points.dedup();
    ChangePointSet {
        points,
        tolerance: None,
    }
}

/// Union of the proposals for all four coordinate series of an encounter.
pub fn candidate_change_points(encounter: &Encounter) -> ChangePointSet {
    let ts = encounter.interaction.grid();
    let mut points = Vec::new();
    for series in encounter.scaled_series() {
        propose(ts, &series, 0, ts.len() - 1, &mut points);
    }
    points.sort_unstable();
    points.dedup();
    ChangePointSet {
        points,
        tolerance: None,
    }
}

fn pooled_sse(ts: &[f64], series: &[Vec<f64>; 4], start: usize, end: usize) -> Option<f64> {
    series.iter().map(|ys| span_sse(ts, ys, start, end)).sum()
}

fn prune_scaled(
    ts: &[f64],
    series: &[Vec<f64>; 4],
    candidates: &[usize],
    epsilon: f64,
) -> Vec<usize> {
    let last = ts.len() - 1;
    let mut knots: Vec<usize> = vec![0];
    let mut interior: Vec<usize> = candidates.iter().copied().filter(|&c| c > 0 && c < last).collect();
    interior.sort_unstable();
    interior.dedup();
    knots.extend(interior);
    knots.push(last);

    let mut removed = vec![false; knots.len()];
    let (mut left, mut mid, mut right) = (0, 1, 2);
    while right < knots.len() {
        let (a, b, c) = (knots[left], knots[mid], knots[right]);
        let crowded = b - a < MIN_KNOT_GAP || c - b < MIN_KNOT_GAP;
        let merged_fits = !crowded && pooled_sse(ts, series, a, c).is_some_and(|sse| sse < epsilon);
        if crowded || merged_fits {
            removed[mid] = true;
        } else {
            left = mid;
        }
        mid = right;
        right += 1;
    }
    knots
        .iter()
        .zip(&removed)
        .skip(1)
        .take(knots.len() - 2)
        .filter(|(_, &r)| !r)
        .map(|(&k, _)| k)
        .collect()
}

/// Single forward pass removing candidate knots whose removal keeps the
/// pooled cubic error of the merged span below `epsilon`, or that would leave
/// fewer than [`MIN_SEGMENT_SAMPLES`] samples on either side.
pub fn prune_change_points(
    encounter: &Encounter,
    candidates: &ChangePointSet,
    epsilon: f64,
) -> ChangePointSet {
    let series = encounter.scaled_series();
    ChangePointSet {
        points: prune_scaled(encounter.interaction.grid(), &series, &candidates.points, epsilon),
        tolerance: Some(epsilon),
    }
}

/// Inclusive `(start, end)` index spans cut at `knots`.
fn spans(knots: &[usize], last: usize) -> Vec<(usize, usize)> {
    let mut bounds = vec![0];
    bounds.extend_from_slice(knots);
    bounds.push(last);
    bounds.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Squared error of one cubic fit over `[start, end]`, charging only the
/// residuals of the half-open span `[start, end)` (closed at the last sample).
fn span_cost(ts: &[f64], series: &[Vec<f64>; 4], start: usize, end: usize) -> f64 {
    let last = ts.len() - 1;
    let stop = if end == last { end + 1 } else { end };
    let mut sse = 0.0;
    for ys in series {
        match fit_cubic(&ts[start..=end], &ys[start..=end]) {
            Ok(fit) => sse += (start..stop).map(|i| (ys[i] - fit.eval(ts[i])).powi(2)).sum::<f64>(),
            Err(_) => return f64::INFINITY,
        }
    }
    sse
}

/// Pooled squared error of the piecewise cubic fit plus `L + 2`. Each
/// residual is charged to the one segment whose half-open span holds it.
fn criterion(ts: &[f64], series: &[Vec<f64>; 4], knots: &[usize]) -> f64 {
    let sse: f64 = spans(knots, ts.len() - 1)
        .into_iter()
        .map(|(start, end)| span_cost(ts, series, start, end))
        .sum();
    sse + knots.len() as f64 + 2.0
}

const MAX_REFINE_PASSES: usize = 20;

/// Coordinate descent on knot positions: each knot moves to the index between
/// its neighbours that minimizes the pooled error of its two adjacent spans.
/// Moves happen only on strict improvement, so the criterion never increases.
fn refine_scaled(ts: &[f64], series: &[Vec<f64>; 4], knots: &[usize]) -> Vec<usize> {
    let last = ts.len() - 1;
    let mut knots = knots.to_vec();
    for _ in 0..MAX_REFINE_PASSES {
        let mut moved = false;
        for i in 0..knots.len() {
            let prev = if i == 0 { 0 } else { knots[i - 1] };
            let next = knots.get(i + 1).copied().unwrap_or(last);
            let lo = prev + MIN_KNOT_GAP;
            let hi = next.saturating_sub(MIN_KNOT_GAP);
            if lo > hi {
                continue;
            }
            let cost = |k: usize| span_cost(ts, series, prev, k) + span_cost(ts, series, k, next);
            let mut best = (knots[i], cost(knots[i]));
            for k in lo..=hi {
                let c = cost(k);
                if c < best.1 - 1e-12 * best.1.abs() {
                    best = (k, c);
                }
            }
            if best.0 != knots[i] {
                knots[i] = best.0;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    knots
}

/// Moves surviving knots to locally optimal positions; see [`segment`].
pub fn refine_change_points(encounter: &Encounter, knots: &ChangePointSet) -> ChangePointSet {
    let series = encounter.scaled_series();
    ChangePointSet {
        points: refine_scaled(encounter.interaction.grid(), &series, &knots.points),
        tolerance: knots.tolerance,
    }
}

/// Penalized criterion for the pruned and refined knots of each tolerance, in
/// the order given.
pub fn tolerance_scores(encounter: &Encounter, epsilons: &[f64]) -> Vec<(f64, ChangePointSet, f64)> {
    let ts = encounter.interaction.grid();
    let series = encounter.scaled_series();
    let candidates = candidate_change_points(encounter);
    epsilons
        .iter()
        .map(|&eps| {
            let pruned = prune_scaled(ts, &series, &candidates.points, eps);
            let knots = refine_scaled(ts, &series, &pruned);
            let score = criterion(ts, &series, &knots);
            (
                eps,
                ChangePointSet {
                    points: knots,
                    tolerance: Some(eps),
                },
                score,
            )
        })
        .collect()
}

fn check_epsilons(epsilons: &[f64]) -> Result<()> {
    if epsilons.is_empty() {
        return Err(Error::invalid("no candidate tolerances"));
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("tolerances must be positive"));
    }
    Ok(())
}

/// Best-scoring entry; ties go to the smallest tolerance.
fn best_scored(mut scored: Vec<(f64, ChangePointSet, f64)>) -> (f64, ChangePointSet, f64) {
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = 0;
    for i in 1..scored.len() {
        if scored[i].2 < scored[best].2 {
            best = i;
        }
    }
    scored.swap_remove(best)
}

/// The tolerance minimizing the penalized criterion; ties go to the smallest.
pub fn select_tolerance(encounter: &Encounter, epsilons: &[f64]) -> Result<f64> {
    check_epsilons(epsilons)?;
    Ok(best_scored(tolerance_scores(encounter, epsilons)).0)
}

/// Ten log-spaced tolerances from `1e-4` to `1e2`.
pub fn default_epsilons() -> Vec<f64> {
    (0..10).map(|k| 10f64.powf(-4.0 + 6.0 * k as f64 / 9.0)).collect()
}

/// Result of segmenting one encounter.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub encounter_id: String,
    pub knots: ChangePointSet,
    pub epsilon: f64,
    /// Inclusive raw-index spans of the segments.
    pub spans: Vec<(usize, usize)>,
    /// Segments resampled to the common grid.
    pub segments: Vec<Interaction>,
}

/// Merges spans holding fewer than [`MIN_SEGMENT_SAMPLES`] samples into their
/// left neighbour (the first span merges right).
fn merge_short(mut spans: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    let mut i = 0;
    while i < spans.len() {
        let (s, e) = spans[i];
        if e - s + 1 >= MIN_SEGMENT_SAMPLES || spans.len() == 1 {
            i += 1;
            continue;
        }
        if i > 0 {
            spans[i - 1].1 = e;
            spans.remove(i);
        } else {
            spans[1].0 = s;
            spans.remove(0);
        }
    }
    spans
}

/// Full pipeline: propose, prune and refine per tolerance, keep the
/// best-scoring tolerance, then cut and resample.
pub fn segment(encounter: &Encounter, epsilons: &[f64], grid_len: usize) -> Result<Segmentation> {
    check_epsilons(epsilons)?;
    let (epsilon, knots, _) = best_scored(tolerance_scores(encounter, epsilons));
    let inter = &encounter.interaction;
    let spans = merge_short(spans(&knots.points, inter.len() - 1));
    let segments = spans
        .iter()
        .map(|&(s, e)| resample(&inter.slice(s, e)?, grid_len))
        .collect::<Result<Vec<_>>>()?;
    let knots = ChangePointSet {
        points: spans.iter().skip(1).map(|&(s, _)| s).collect(),
        tolerance: Some(epsilon),
    };
    Ok(Segmentation {
        encounter_id: encounter.id.clone(),
        knots,
        epsilon,
        spans,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Point;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_cubic_coefficients() {
        let ts = grid(30);
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 - t + 3.0 * t.powi(3)).collect();
        let fit = fit_cubic(&ts, &ys).unwrap();
        let expected = [2.0, -1.0, 0.0, 3.0];
        for (c, e) in fit.coefficients.iter().zip(expected) {
            assert!((c - e).abs() < 1e-8, "{:?}", fit.coefficients);
        }
        assert!(fit.sse <= 1e-12);
    }

    #[test]
    fn four_points_interpolate() {
        let fit = fit_cubic(&[0.0, 1.0, 2.5, 4.0], &[1.0, -2.0, 0.5, 7.0]).unwrap();
        assert!(fit.sse < 1e-20);
    }

    #[test]
    fn raw_time_units_are_fine() {
        let ts: Vec<f64> = (0..50).map(|i| 1000.0 + 0.1 * i as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 0.5 * (t - 1000.0).powi(2)).collect();
        let fit = fit_cubic(&ts, &ys).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((fit.eval(*t) - y).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_designs_fail() {
        assert!(matches!(fit_cubic(&[0.0, 1.0, 2.0], &[0.0; 3]), Err(Error::DegenerateFit(_))));
        assert!(matches!(
            fit_cubic(&[0.0, 0.0, 1.0, 1.0, 2.0], &[0.0; 5]),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(fit_cubic(&[1.0; 5], &[0.0; 5]), Err(Error::DegenerateFit(_))));
    }

    fn traj(ts: &[f64], f: impl Fn(f64) -> Point) -> Trajectory {
        Trajectory::new(ts.to_vec(), ts.iter().map(|&t| f(t)).collect()).unwrap()
    }

    #[test]
    fn cubic_trajectory_has_no_change_points() {
        let ts = grid(61);
        let tr = traj(&ts, |t| [1.0 + t - 2.0 * t.powi(3), t * t]);
        assert!(add_change_points(&tr).points.is_empty());
    }

    #[test]
    fn midpoint_kink_is_found() {
        let ts = grid(41);
        let tr = traj(&ts, |t| [if t <= 0.5 { t } else { 0.5 + 3.0 * (t - 0.5) }, 0.0]);
        assert_eq!(add_change_points(&tr).points, vec![20]);
    }

    #[test]
    fn short_spans_merge_left() {
        assert_eq!(merge_short(vec![(0, 10), (10, 12), (12, 30)]), vec![(0, 12), (12, 30)]);
        assert_eq!(merge_short(vec![(0, 2), (2, 30)]), vec![(0, 30)]);
        assert_eq!(merge_short(vec![(0, 30)]), vec![(0, 30)]);
    }

    #[test]
    fn default_grid_spans_six_decades() {
        let eps = default_epsilons();
        assert_eq!(eps.len(), 10);
        assert!((eps[0] - 1e-4).abs() < 1e-16 && (eps[9] - 1e2).abs() < 1e-10);
    }

    #[test]
    fn short_encounter_is_rejected() {
        let ts = grid(4);
        let inter = Interaction::new(traj(&ts, |t| [t, 0.0]), traj(&ts, |t| [0.0, t])).unwrap();
        assert!(Encounter::new("e", inter).is_err());
    }
}
