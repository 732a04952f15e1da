//! Shared generators for the integration tests.
#![allow(dead_code)]

use interaction_primitives::procrustes::rotation;
use interaction_primitives::trajectory::{uniform_measure, unit_grid, TimeMeasure};
use interaction_primitives::Interaction;
use rand::Rng;

/// Smooth random pair of curves: a random cubic per coordinate plus small jitter.
pub fn random_interaction<R: Rng>(rng: &mut R, t: usize) -> Interaction {
    let grid = unit_grid(t);
    let curve = |rng: &mut R| {
        let c: Vec<[f64; 4]> = (0..2)
            .map(|_| std::array::from_fn(|_| rng.random_range(-5.0..5.0)))
            .collect();
        grid.iter()
            .map(|&s| {
                let p = |k: usize| c[k][0] + c[k][1] * s + c[k][2] * s * s + c[k][3] * s * s * s;
                [p(0) + rng.random_range(-0.1..0.1), p(1) + rng.random_range(-0.1..0.1)]
            })
            .collect::<Vec<_>>()
    };
    let a = curve(rng);
    let b = curve(rng);
    Interaction::from_parts(grid.clone(), a, b).unwrap()
}

/// Random rigid motion of both curves, with an optional swap of the pair.
pub fn random_motion<R: Rng>(rng: &mut R, inter: &Interaction) -> Interaction {
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let shift = [rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)];
    let moved = inter.transformed(&rotation(theta), shift);
    if rng.random_bool(0.5) {
        moved.swapped()
    } else {
        moved
    }
}

/// Random positive weights normalized to one.
pub fn random_measure<R: Rng>(rng: &mut R, t: usize) -> TimeMeasure {
    let w: Vec<f64> = (0..t).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    TimeMeasure::new(w.into_iter().map(|x| x / s).collect()).unwrap_or_else(|_| uniform_measure(t).unwrap())
}
