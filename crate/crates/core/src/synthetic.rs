//! Synthetic encounters with known structure, for tests and demos.
//!
//! Planted-family data places every encounter of a family on the same
//! template up to a random rigid motion and Gaussian positional noise.
//! Kinked encounters are piecewise-linear drives whose headings change at
//! planted sample indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procrustes::{distance_matrix, rotation, DistanceMatrix};
use crate::segmentation::Encounter;
use crate::trajectory::{resample, uniform_measure, Interaction, Point};

/// Template shapes for two-vehicle encounters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Same direction, adjacent lanes.
    Parallel,
    /// Opposite directions, passing each other.
    Opposing,
    /// Perpendicular paths crossing near the middle.
    Crossing,
    /// One vehicle parked, the other driving past close by.
    StationaryNear,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Parallel,
        Family::Opposing,
        Family::Crossing,
        Family::StationaryNear,
    ];

    /// Positions of both vehicles at normalized time `s` in `[0, 1]`.
    fn template(self, s: f64) -> (Point, Point) {
        // 10 m/s for 10 s.
        let run = 100.0 * s;
        match self {
            Family::Parallel => ([run, 0.0], [run + 12.0, 3.5]),
            Family::Opposing => ([run, 0.0], [100.0 - run, 3.5]),
            Family::Crossing => ([run - 50.0, 0.0], [5.0, run - 45.0]),
            Family::StationaryNear => ([50.0, 0.0], [run, 4.0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub families: Vec<Family>,
    pub per_family: usize,
    /// Standard deviation of the positional noise, metres.
    pub noise: f64,
    /// Raw samples per encounter (10 Hz).
    pub samples: usize,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            families: Family::ALL[..3].to_vec(),
            per_family: 50,
            noise: 0.5,
            samples: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub ids: Vec<String>,
    /// Index into `families` for every encounter.
    pub labels: Vec<usize>,
    pub families: Vec<Family>,
    /// Planted knot indices per encounter (raw grid).
    pub knots: Vec<Vec<usize>>,
    /// Largest mean within-family distance over smallest mean between-family
    /// distance; `None` with fewer than two families.
    pub within_between_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub encounters: Vec<Encounter>,
    pub manifest: Manifest,
}

fn random_motion(rng: &mut ChaCha8Rng) -> ([[f64; 2]; 2], Point) {
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let shift = [rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0)];
    (rotation(theta), shift)
}

fn draw(noise: &Option<Normal<f64>>, rng: &mut ChaCha8Rng) -> f64 {
    noise.as_ref().map_or(0.0, |n| n.sample(rng))
}

fn jitter(p: Point, noise: &Option<Normal<f64>>, rng: &mut ChaCha8Rng) -> Point {
    [p[0] + draw(noise, rng), p[1] + draw(noise, rng)]
}

fn noise_dist(sigma: f64) -> Result<Option<Normal<f64>>> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::invalid("noise level must be finite and nonnegative"));
    }
    if sigma == 0.0 {
        return Ok(None);
    }
    Normal::new(0.0, sigma)
        .map(Some)
        .map_err(|e| Error::invalid(e.to_string()))
}

/// Encounters drawn from planted families, in family-major order.
pub fn generate_planted(spec: &PlantedSpec, seed: u64) -> Result<SyntheticSet> {
    if spec.families.is_empty() || spec.per_family == 0 {
        return Err(Error::invalid("need at least one family and one encounter per family"));
    }
    if spec.samples < 5 {
        return Err(Error::invalid("encounters need at least 5 samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = noise_dist(spec.noise)?;
    let grid: Vec<f64> = (0..spec.samples).map(|i| i as f64 / 10.0).collect();
    let last = (spec.samples - 1) as f64;

    let mut encounters = Vec::new();
    let mut labels = Vec::new();
    for (label, family) in spec.families.iter().enumerate() {
        for _ in 0..spec.per_family {
            let (rot, shift) = random_motion(&mut rng);
            let mut first = Vec::with_capacity(spec.samples);
            let mut second = Vec::with_capacity(spec.samples);
            for i in 0..spec.samples {
                let (a, b) = family.template(i as f64 / last);
                first.push(jitter(a, &noise, &mut rng));
                second.push(jitter(b, &noise, &mut rng));
            }
            let inter = Interaction::from_parts(grid.clone(), first, second)?
                .transformed(&rot, shift);
            let id = format!("e{:04}", encounters.len());
            encounters.push(Encounter::new(id, inter)?);
            labels.push(label);
        }
    }
    let ratio = family_ratio(&encounters, &labels, spec.families.len())?;
    let ids = encounters.iter().map(|e| e.id.clone()).collect();
    let knots = vec![Vec::new(); encounters.len()];
    Ok(SyntheticSet {
        encounters,
        manifest: Manifest {
            seed,
            ids,
            labels,
            families: spec.families.clone(),
            knots,
            within_between_ratio: ratio,
        },
    })
}

fn family_ratio(encounters: &[Encounter], labels: &[usize], families: usize) -> Result<Option<f64>> {
    if families < 2 {
        return Ok(None);
    }
    let data: Vec<Interaction> = encounters
        .iter()
        .map(|e| resample(&e.interaction, crate::trajectory::DEFAULT_GRID_LEN))
        .collect::<Result<_>>()?;
    let mu = uniform_measure(crate::trajectory::DEFAULT_GRID_LEN)?;
    let d = distance_matrix(&data, &mu, false)?;
    Ok(Some(within_between_ratio(&d, labels, families)))
}

/// Largest mean within-group distance divided by the smallest mean distance
/// between two different groups.
pub fn within_between_ratio(d: &DistanceMatrix, labels: &[usize], groups: usize) -> f64 {
    let mut sums = vec![vec![0.0; groups]; groups];
    let mut counts = vec![vec![0usize; groups]; groups];
    for i in 0..d.n() {
        for j in 0..d.n() {
            if i != j {
                sums[labels[i]][labels[j]] += d.get(i, j);
                counts[labels[i]][labels[j]] += 1;
            }
        }
    }
    let mean = |a: usize, b: usize| {
        if counts[a][b] == 0 {
            0.0
        } else {
            sums[a][b] / counts[a][b] as f64
        }
    };
    let within = (0..groups).map(|g| mean(g, g)).fold(0.0, f64::max);
    let mut between = f64::INFINITY;
    for a in 0..groups {
        for b in 0..groups {
            if a != b {
                between = between.min(mean(a, b));
            }
        }
    }
    within / between
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinkedSpec {
    pub samples: usize,
    /// Planted knot indices, strictly increasing and interior.
    pub knots: Vec<usize>,
    /// Noise standard deviation as a fraction of the coordinate range.
    pub noise_fraction: f64,
}

/// One encounter in which both vehicles drive straight and turn at the knots.
pub fn generate_kinked(spec: &KinkedSpec, seed: u64) -> Result<Encounter> {
    let n = spec.samples;
    if n < 5 {
        return Err(Error::invalid("encounters need at least 5 samples"));
    }
    if spec.knots.windows(2).any(|w| w[1] <= w[0]) || spec.knots.iter().any(|&k| k == 0 || k + 1 >= n) {
        return Err(Error::invalid("knots must be strictly increasing interior indices"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speed = 1.0;
    let mut heading = rng.random_range(0.0..std::f64::consts::TAU);
    let lead_gap = rng.random_range(5.0..15.0);

    // Lead vehicle path, then the follower trails it at a fixed lateral offset
    // and turns at the same indices.
    let mut lead = vec![[0.0, 0.0]];
    let mut follow = vec![[-lead_gap, 3.5]];
    let mut follow_heading = heading;
    for i in 1..n {
        if spec.knots.contains(&(i - 1)) {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let turn = sign * rng.random_range(1.2..1.9);
            heading += turn;
            follow_heading -= turn;
        }
        let p = lead[i - 1];
        lead.push([p[0] + speed * heading.cos(), p[1] + speed * heading.sin()]);
        let q = follow[i - 1];
        follow.push([q[0] + 0.8 * speed * follow_heading.cos(), q[1] + 0.8 * speed * follow_heading.sin()]);
    }

    // Each coordinate series gets noise proportional to its own range.
    let sigma = |path: &[Point], axis: usize| {
        let (lo, hi) = path
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[axis]), hi.max(p[axis])));
        spec.noise_fraction * (hi - lo)
    };
    let noisy = |path: Vec<Point>, rng: &mut ChaCha8Rng| -> Result<Vec<Point>> {
        let nx = noise_dist(sigma(&path, 0))?;
        let ny = noise_dist(sigma(&path, 1))?;
        Ok(path
            .into_iter()
            .map(|p| [p[0] + draw(&nx, rng), p[1] + draw(&ny, rng)])
            .collect())
    };
    let lead = noisy(lead, &mut rng)?;
    let follow = noisy(follow, &mut rng)?;
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / 10.0).collect();
    Encounter::new(format!("k{seed}"), Interaction::from_parts(grid, lead, follow)?)
}
