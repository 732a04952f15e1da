//! Wasserstein distances between finitely supported measures of interactions.
//!
//! The transportation problem is solved exactly with the transportation
//! simplex: a northwest-corner spanning-tree basis, dual potentials from the
//! tree, Dantzig pricing, and pivots around the unique basis cycle. After a
//! run of degenerate pivots the pricing switches to Bland's rule, which
//! cannot cycle.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::procrustes::distance;
use crate::trajectory::{Interaction, TimeMeasure};

const WEIGHT_TOL: f64 = 1e-12;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct DiscreteMeasure {
    atoms: Vec<Interaction>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    weights: Vec<f64>,
    atoms: Vec<Interaction>,
}

impl TryFrom<MeasureRepr> for DiscreteMeasure {
    type Error = Error;

    fn try_from(r: MeasureRepr) -> Result<Self> {
        DiscreteMeasure::new(r.atoms, r.weights)
    }
}

impl From<DiscreteMeasure> for MeasureRepr {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureRepr {
            weights: m.weights,
            atoms: m.atoms,
        }
    }
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Interaction>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("a measure needs at least one atom"));
        }
        if atoms.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        let t = atoms[0].len();
        if atoms.iter().any(|a| a.len() != t) {
            return Err(Error::invalid("atoms must share one grid length"));
        }
        Ok(Self { atoms, weights })
    }

    pub fn atoms(&self) -> &[Interaction] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Mass `1/n` on every interaction.
pub fn empirical_measure(data: &[Interaction]) -> Result<DiscreteMeasure> {
    if data.is_empty() {
        return Err(Error::invalid("empirical measure of no interactions"));
    }
    let w = 1.0 / data.len() as f64;
    DiscreteMeasure::new(data.to_vec(), vec![w; data.len()])
}

/// Representatives weighted by the share of the `n` points in their cluster.
pub fn model_measure(model: &ClusterModel, n: usize) -> Result<DiscreteMeasure> {
    if n == 0 || model.n() != n {
        return Err(Error::invalid(format!(
            "model covers {} points, expected {n}",
            model.n()
        )));
    }
    let weights = model.cluster_sizes().into_iter().map(|c| c as f64 / n as f64).collect();
    DiscreteMeasure::new(model.representatives.clone(), weights)
}

/// An optimal coupling: total cost and the positive flows `(i, j, mass)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: f64,
    pub flows: Vec<(usize, usize, f64)>,
}

struct Basis {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
}

impl Basis {
    /// Northwest-corner rule: exactly `m + n - 1` cells, some possibly at zero flow.
    fn northwest(supply: &[f64], demand: &[f64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut a = supply.to_vec();
        let mut b = demand.to_vec();
        let mut cells = Vec::with_capacity(m + n - 1);
        let mut flow = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = a[i].min(b[j]).max(0.0);
            cells.push((i, j));
            flow.push(x);
            a[i] -= x;
            b[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (i < m - 1 && a[i] <= b[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { m, n, cells, flow }
    }

    /// Adjacency over row nodes `0..m` and column nodes `m..m+n`, by cell index.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (c, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push(c);
            adj[self.m + j].push(c);
        }
        adj
    }

    fn potentials(&self, cost: &[Vec<f64>], adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![f64::NAN; self.m];
        let mut v = vec![f64::NAN; self.n];
        u[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &c in &adj[node] {
                let (i, j) = self.cells[c];
                if node < self.m && v[j].is_nan() {
                    v[j] = cost[i][j] - u[i];
                    queue.push_back(self.m + j);
                } else if node >= self.m && u[i].is_nan() {
                    u[i] = cost[i][j] - v[j];
                    queue.push_back(i);
                }
            }
        }
        (u, v)
    }

    /// Cells on the tree path from column node `m + j` to row node `i`.
    fn path(&self, adj: &[Vec<usize>], i: usize, j: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut via = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        let start = self.m + j;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if node == i {
                break;
            }
            for &c in &adj[node] {
                let (ci, cj) = self.cells[c];
                let other = if node < self.m { self.m + cj } else { ci };
                if !seen[other] {
                    seen[other] = true;
                    via[other] = c;
                    queue.push_back(other);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = i;
        while node != start {
            let c = via[node];
            cells.push(c);
            let (ci, cj) = self.cells[c];
            node = if node < self.m { self.m + cj } else { ci };
        }
        cells.reverse();
        cells
    }
}

/// Exact minimum-cost coupling of `supply` and `demand` (each summing to the
/// same total) under `cost`.
pub fn optimal_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::invalid("transport between empty supports"));
    }
    if cost.len() != m || cost.iter().any(|row| row.len() != n) {
        return Err(Error::invalid("cost matrix shape does not match the supports"));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite transport cost".into()));
    }
    let scale = cost.iter().flatten().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);

    let mut basis = Basis::northwest(supply, demand);
    let cap = 100 * (m + n) * (m + n) + 1000;
    let mut degenerate_run = 0;
    for _ in 0..cap {
        let adj = basis.adjacency();
        let (u, v) = basis.potentials(cost, &adj);
        let mut in_basis = vec![false; m * n];
        for &(i, j) in &basis.cells {
            in_basis[i * n + j] = true;
        }
        let bland = degenerate_run >= DEGENERATE_RUN;
        let mut entering: Option<(usize, usize, f64)> = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if in_basis[i * n + j] {
                    continue;
                }
                let reduced = cost[i][j] - u[i] - v[j];
                if reduced < -tol && entering.is_none_or(|e| reduced < e.2) {
                    entering = Some((i, j, reduced));
                    if bland {
                        break 'scan;
                    }
                }
            }
        }
        let Some((i, j, _)) = entering else {
            let total = basis
                .cells
                .iter()
                .zip(&basis.flow)
                .map(|(&(i, j), &x)| x * cost[i][j])
                .sum::<f64>();
            let flows = basis
                .cells
                .iter()
                .zip(&basis.flow)
                .filter(|(_, &x)| x > 0.0)
                .map(|(&(i, j), &x)| (i, j, x))
                .collect();
            return Ok(TransportPlan { cost: total, flows });
        };

        // Cycle: the entering cell gains, then the tree path alternates lose/gain.
        let path = basis.path(&adj, i, j);
        let mut leave: Option<(usize, f64)> = None;
        for &c in path.iter().step_by(2) {
            let x = basis.flow[c];
            let better = match leave {
                None => true,
                Some((lc, lx)) => x < lx || (x == lx && basis.cells[c] < basis.cells[lc]),
            };
            if better {
                leave = Some((c, x));
            }
        }
        let (leaving, theta) = leave.expect("a cycle has a losing cell");
        for (pos, &c) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[c] -= theta;
            } else {
                basis.flow[c] += theta;
            }
        }
        basis.cells[leaving] = (i, j);
        basis.flow[leaving] = theta;
        degenerate_run = if theta > 0.0 { 0 } else { degenerate_run + 1 };
    }
    Err(Error::Numerical(format!(
        "transportation simplex did not converge in {cap} pivots"
    )))
}

/// Wasserstein distance of order `r` under the Procrustes ground metric.
pub fn wasserstein(f: &DiscreteMeasure, g: &DiscreteMeasure, r: f64, mu: &TimeMeasure) -> Result<f64> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::invalid(format!("order r = {r} must be a finite value >= 1")));
    }
    if f.atoms[0].len() != mu.len() || g.atoms[0].len() != mu.len() {
        return Err(Error::invalid("atoms and time measure disagree on grid length"));
    }
    let cost: Vec<Vec<f64>> = f
        .atoms
        .par_iter()
        .map(|a| {
            g.atoms
                .iter()
                .map(|b| distance(a, b, mu).map(|d| d.powf(r)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let plan = optimal_transport(&f.weights, &g.weights, &cost)?;
    Ok(plan.cost.max(0.0).powf(1.0 / r))
}
