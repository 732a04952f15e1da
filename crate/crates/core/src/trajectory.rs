//! Trajectories, interactions and the discrete time measure they are integrated against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A location in the plane.
pub type Point = [f64; 2];

/// Number of grid points used when none is given.
pub const DEFAULT_GRID_LEN: usize = 101;

const GRID_TOL: f64 = 1e-12;

/// A planar curve sampled on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Vec<f64>,
    samples: Vec<Point>,
}

impl Trajectory {
    pub fn new(grid: Vec<f64>, samples: Vec<Point>) -> Result<Self> {
        if grid.len() != samples.len() {
            return Err(Error::invalid(format!(
                "grid has {} stamps but {} samples were given",
                grid.len(),
                samples.len()
            )));
        }
        if grid.len() < 2 {
            return Err(Error::invalid("a trajectory needs at least 2 samples"));
        }
        if grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("non-finite time stamp"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time grid is not strictly increasing"));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        Ok(Self { grid, samples })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// One coordinate (0 = x, 1 = y) as a plain series.
    pub fn coordinate(&self, axis: usize) -> Vec<f64> {
        self.samples.iter().map(|p| p[axis]).collect()
    }

    /// Linear interpolation onto `targets`, which must lie inside the grid span.
    fn interpolate(&self, targets: &[f64]) -> Vec<Point> {
        let mut out = Vec::with_capacity(targets.len());
        let mut seg = 0;
        let last = self.grid.len() - 1;
        for &t in targets {
            while seg + 1 < last && self.grid[seg + 1] < t {
                seg += 1;
            }
            let (t0, t1) = (self.grid[seg], self.grid[seg + 1]);
            let (p0, p1) = (self.samples[seg], self.samples[seg + 1]);
            let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            out.push([p0[0] + w * (p1[0] - p0[0]), p0[1] + w * (p1[1] - p0[1])]);
        }
        out
    }

    fn slice(&self, start: usize, end: usize) -> Trajectory {
        Trajectory {
            grid: self.grid[start..=end].to_vec(),
            samples: self.samples[start..=end].to_vec(),
        }
    }
}

/// An ordered pair of trajectories on a shared time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InteractionRepr", into = "InteractionRepr")]
pub struct Interaction {
    first: Trajectory,
    second: Trajectory,
}

/// Inline-grid JSON layout: `{"t": [..], "first": [[x, y], ..], "second": [..]}`.
#[derive(Serialize, Deserialize)]
struct InteractionRepr {
    t: Vec<f64>,
    first: Vec<Point>,
    second: Vec<Point>,
}

impl TryFrom<InteractionRepr> for Interaction {
    type Error = Error;

    fn try_from(repr: InteractionRepr) -> Result<Self> {
        Interaction::from_parts(repr.t, repr.first, repr.second)
    }
}

impl From<Interaction> for InteractionRepr {
    fn from(inter: Interaction) -> Self {
        InteractionRepr {
            t: inter.first.grid,
            first: inter.first.samples,
            second: inter.second.samples,
        }
    }
}

impl Interaction {
    pub fn new(first: Trajectory, second: Trajectory) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::invalid(format!(
                "trajectories have different lengths ({} vs {})",
                first.len(),
                second.len()
            )));
        }
        let same_grid = first
            .grid
            .iter()
            .zip(&second.grid)
            .all(|(a, b)| (a - b).abs() <= GRID_TOL * a.abs().max(1.0));
        if !same_grid {
            return Err(Error::invalid("trajectories do not share a time grid"));
        }
        Ok(Self { first, second })
    }

    /// Builds an interaction from a grid and the two sample sequences.
    pub fn from_parts(grid: Vec<f64>, first: Vec<Point>, second: Vec<Point>) -> Result<Self> {
        let first = Trajectory::new(grid.clone(), first)?;
        let second = Trajectory::new(grid, second)?;
        Self::new(first, second)
    }

    pub fn first(&self) -> &Trajectory {
        &self.first
    }

    pub fn second(&self) -> &Trajectory {
        &self.second
    }

    pub fn grid(&self) -> &[f64] {
        &self.first.grid
    }

    /// Number of time stamps.
    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    /// The same interaction with the two trajectories exchanged.
    pub fn swapped(&self) -> Interaction {
        Interaction {
            first: self.second.clone(),
            second: self.first.clone(),
        }
    }

    /// Applies `p -> rotation * p + translation` to every sample of both curves.
    pub fn transformed(&self, rotation: &[[f64; 2]; 2], translation: Point) -> Interaction {
        let map = |traj: &Trajectory| Trajectory {
            grid: traj.grid.clone(),
            samples: traj
                .samples
                .iter()
                .map(|p| {
                    [
                        rotation[0][0] * p[0] + rotation[0][1] * p[1] + translation[0],
                        rotation[1][0] * p[0] + rotation[1][1] * p[1] + translation[1],
                    ]
                })
                .collect(),
        };
        Interaction {
            first: map(&self.first),
            second: map(&self.second),
        }
    }

    /// The four coordinate series `x1, y1, x2, y2`.
    pub fn coordinate_series(&self) -> [Vec<f64>; 4] {
        [
            self.first.coordinate(0),
            self.first.coordinate(1),
            self.second.coordinate(0),
            self.second.coordinate(1),
        ]
    }

    /// Flattens to `[x1_0, y1_0, .., x1_T, y1_T, x2_0, y2_0, ..]`, length `4T`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.first
            .samples
            .iter()
            .chain(&self.second.samples)
            .flat_map(|p| p.iter().copied())
            .collect()
    }

    /// Inverse of [`Interaction::to_flat`] on the given grid.
    pub fn from_flat(grid: &[f64], flat: &[f64]) -> Result<Self> {
        let t = grid.len();
        if flat.len() != 4 * t {
            return Err(Error::invalid(format!(
                "flat vector has length {} but the grid needs {}",
                flat.len(),
                4 * t
            )));
        }
        let pts: Vec<Point> = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        Self::from_parts(grid.to_vec(), pts[..t].to_vec(), pts[t..].to_vec())
    }

    /// Sub-interaction covering grid indices `start..=end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Interaction> {
        if end >= self.len() || end <= start {
            return Err(Error::invalid(format!(
                "slice {start}..={end} out of range for {} samples",
                self.len()
            )));
        }
        Ok(Interaction {
            first: self.first.slice(start, end),
            second: self.second.slice(start, end),
        })
    }
}

/// Discrete probability weights over the grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeMeasure {
    weights: Vec<f64>,
}

impl TimeMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::invalid("a time measure needs at least 2 weights"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("time-measure weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("time-measure weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// The uniform measure placing `1/T` on each of `T` grid points.
pub fn uniform_measure(t: usize) -> Result<TimeMeasure> {
    if t < 2 {
        return Err(Error::invalid("grid length must be at least 2"));
    }
    Ok(TimeMeasure {
        weights: vec![1.0 / t as f64; t],
    })
}

/// The uniform grid `0, 1/(T-1), .., 1`.
pub fn unit_grid(t: usize) -> Vec<f64> {
    let last = (t - 1) as f64;
    (0..t)
        .map(|j| if j + 1 == t { 1.0 } else { j as f64 / last })
        .collect()
}

/// Normalizes time to `[0, 1]` and linearly interpolates both curves onto
/// the uniform grid of length `t`.
pub fn resample(interaction: &Interaction, t: usize) -> Result<Interaction> {
    if t < 2 {
        return Err(Error::invalid("target grid length must be at least 2"));
    }
    let grid = interaction.grid();
    if grid.len() < 2 {
        return Err(Error::invalid("need at least 2 samples to resample"));
    }
    let (t0, t1) = (grid[0], grid[grid.len() - 1]);
    let span = t1 - t0;
    let unit = unit_grid(t);
    let targets: Vec<f64> = unit.iter().map(|u| t0 + u * span).collect();

    let resample_one = |traj: &Trajectory| {
        let mut pts = traj.interpolate(&targets);
        // Endpoints are copied, not interpolated.
        pts[0] = traj.samples[0];
        pts[t - 1] = traj.samples[traj.len() - 1];
        pts
    };
    Interaction::from_parts(
        unit.clone(),
        resample_one(&interaction.first),
        resample_one(&interaction.second),
    )
}
