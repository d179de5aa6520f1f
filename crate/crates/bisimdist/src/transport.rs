//! Finite transportation problems and couplings.
//!
//! A `TransportProblem` carries two positive marginals over state indices
//! and a cost per support pair. `solve_tp` runs the transportation simplex
//! and returns an optimal vertex coupling. Supports are kept sorted by
//! state index, which fixes the northwest-corner allocation and makes every
//! run deterministic.

use std::collections::BTreeMap;

use crate::tolerances;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("empty marginal support")]
    EmptySupport,
    #[error("non-positive or non-finite mass {mass} at state {state}")]
    BadMass { state: usize, mass: f64 },
    #[error("marginal totals differ: {left} vs {right}")]
    SumMismatch { left: f64, right: f64 },
    #[error("cost at ({row},{col}) outside [0,1]: {cost}")]
    BadCost { row: usize, col: usize, cost: f64 },
    #[error("coupling marginal at state {state} off by {defect}")]
    MarginalDefect { state: usize, defect: f64 },
    #[error("coupling has {cells} cells, a vertex allows at most {max}")]
    NotAVertex { cells: usize, max: usize },
}

fn normalize_support(s: &[(usize, f64)]) -> Result<Vec<(usize, f64)>, TransportError> {
    if s.is_empty() {
        return Err(TransportError::EmptySupport);
    }
    let mut map: BTreeMap<usize, f64> = BTreeMap::new();
    for &(state, mass) in s {
        if !mass.is_finite() || mass <= 0.0 {
            return Err(TransportError::BadMass { state, mass });
        }
        *map.entry(state).or_insert(0.0) += mass;
    }
    Ok(map.into_iter().collect())
}

/// A transportation problem between two marginals, costs in [0,1].
#[derive(Debug, Clone)]
pub struct TransportProblem {
    mu: Vec<(usize, f64)>,
    nu: Vec<(usize, f64)>,
    cost: Vec<f64>,
}

impl TransportProblem {
    pub fn new<F>(
        mu: &[(usize, f64)],
        nu: &[(usize, f64)],
        mut cost: F,
    ) -> Result<Self, TransportError>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mu = normalize_support(mu)?;
        let nu = normalize_support(nu)?;
        let left: f64 = mu.iter().map(|&(_, m)| m).sum();
        let right: f64 = nu.iter().map(|&(_, m)| m).sum();
        if (left - right).abs() > tolerances::MARGINAL {
            return Err(TransportError::SumMismatch { left, right });
        }
        let mut c = Vec::with_capacity(mu.len() * nu.len());
        for &(u, _) in &mu {
            for &(v, _) in &nu {
                let x = cost(u, v);
                if !x.is_finite()
                    || !(-tolerances::PROB_OVERSHOOT..=1.0 + tolerances::PROB_OVERSHOOT)
                        .contains(&x)
                {
                    return Err(TransportError::BadCost { row: u, col: v, cost: x });
                }
                c.push(x);
            }
        }
        Ok(TransportProblem { mu, nu, cost: c })
    }

    pub fn rows(&self) -> usize {
        self.mu.len()
    }

    pub fn cols(&self) -> usize {
        self.nu.len()
    }

    pub fn row_state(&self, i: usize) -> usize {
        self.mu[i].0
    }

    pub fn col_state(&self, j: usize) -> usize {
        self.nu[j].0
    }

    pub fn cost_at(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.nu.len() + j]
    }

    /// Cost between two support states, `None` if either lies outside the
    /// corresponding support.
    pub fn cost_between(&self, u: usize, v: usize) -> Option<f64> {
        let i = self.mu.binary_search_by_key(&u, |&(s, _)| s).ok()?;
        let j = self.nu.binary_search_by_key(&v, |&(s, _)| s).ok()?;
        Some(self.cost_at(i, j))
    }
}

/// A coupling as a sparse set of positive cells, sorted by (row, col)
/// state index.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    cells: Vec<(usize, usize, f64)>,
}

impl Coupling {
    /// Builds a coupling from cells, merging duplicates and dropping exact
    /// zeros. Negative or non-finite masses are rejected.
    pub fn from_cells(cells: &[(usize, usize, f64)]) -> Result<Self, TransportError> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(u, v, w) in cells {
            if !w.is_finite() || w < 0.0 {
                return Err(TransportError::BadMass { state: u, mass: w });
            }
            *map.entry((u, v)).or_insert(0.0) += w;
        }
        Ok(Coupling {
            cells: map
                .into_iter()
                .filter(|&(_, w)| w > 0.0)
                .map(|((u, v), w)| (u, v, w))
                .collect(),
        })
    }

    pub fn support(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn mass_between(&self, u: usize, v: usize) -> f64 {
        self.cells
            .binary_search_by_key(&(u, v), |&(a, b, _)| (a, b))
            .map_or(0.0, |i| self.cells[i].2)
    }

    /// Expected cost of the coupling under a ground cost.
    pub fn cost_under<F>(&self, mut cost: F) -> f64
    where
        F: FnMut(usize, usize) -> f64,
    {
        self.cells.iter().map(|&(u, v, w)| w * cost(u, v)).sum()
    }

    fn marginal(&self, pick_row: bool) -> Vec<(usize, f64)> {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for &(u, v, w) in &self.cells {
            *map.entry(if pick_row { u } else { v }).or_insert(0.0) += w;
        }
        map.into_iter().collect()
    }

    pub fn row_marginal(&self) -> Vec<(usize, f64)> {
        self.marginal(true)
    }

    pub fn col_marginal(&self) -> Vec<(usize, f64)> {
        self.marginal(false)
    }

    /// Verifies that this coupling couples `mu` with `nu` and is sparse
    /// enough to be a vertex of the transportation polytope.
    pub fn check(&self, mu: &[(usize, f64)], nu: &[(usize, f64)]) -> Result<(), TransportError> {
        let mu = normalize_support(mu)?;
        let nu = normalize_support(nu)?;
        for (want, got) in [
            (&mu, self.row_marginal()),
            (&nu, self.col_marginal()),
        ] {
            let want_map: BTreeMap<usize, f64> = want.iter().copied().collect();
            let got_map: BTreeMap<usize, f64> = got.into_iter().collect();
            for (&state, &m) in &want_map {
                let defect = (got_map.get(&state).copied().unwrap_or(0.0) - m).abs();
                if defect > tolerances::MARGINAL {
                    return Err(TransportError::MarginalDefect { state, defect });
                }
            }
            for (&state, &m) in &got_map {
                if !want_map.contains_key(&state) && m > tolerances::MARGINAL {
                    return Err(TransportError::MarginalDefect { state, defect: m });
                }
            }
        }
        let max = mu.len() + nu.len() - 1;
        if self.cells.len() > max {
            return Err(TransportError::NotAVertex { cells: self.cells.len(), max });
        }
        Ok(())
    }
}

/// The northwest-corner allocation for two marginals: fill greedily in
/// state-index order. Always a vertex, usually not optimal.
pub fn northwest_coupling(
    mu: &[(usize, f64)],
    nu: &[(usize, f64)],
) -> Result<Coupling, TransportError> {
    let mu = normalize_support(mu)?;
    let nu = normalize_support(nu)?;
    let left: f64 = mu.iter().map(|&(_, m)| m).sum();
    let right: f64 = nu.iter().map(|&(_, m)| m).sum();
    if (left - right).abs() > tolerances::MARGINAL {
        return Err(TransportError::SumMismatch { left, right });
    }
    let a: Vec<f64> = mu.iter().map(|&(_, m)| m).collect();
    let b: Vec<f64> = nu.iter().map(|&(_, m)| m).collect();
    let cells: Vec<(usize, usize, f64)> = nw_basis(&a, &b)
        .into_iter()
        .filter(|&(_, _, q)| q > 0.0)
        .map(|(i, j, q)| (mu[i].0, nu[j].0, q))
        .collect();
    Coupling::from_cells(&cells)
}

/// Northwest-corner basis over dense marginals: exactly r+c-1 cells, zero
/// quantities kept as degenerate basics.
fn nw_basis(a: &[f64], b: &[f64]) -> Vec<(usize, usize, f64)> {
    let (r, c) = (a.len(), b.len());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(r + c - 1);
    loop {
        let q = a[i].min(b[j]);
        out.push((i, j, q));
        a[i] -= q;
        b[j] -= q;
        if i + 1 == r && j + 1 == c {
            return out;
        }
        let move_row = if i + 1 == r {
            false
        } else if j + 1 == c {
            true
        } else {
            a[i] == 0.0
        };
        if move_row {
            i += 1;
        } else {
            j += 1;
        }
    }
}

/// An optimal vertex of a transportation problem.
#[derive(Debug, Clone)]
pub struct TpSolution {
    pub coupling: Coupling,
    pub value: f64,
    pub pivots: usize,
}

/// Transportation simplex: northwest-corner start, tree potentials, and
/// Bland-style entering choice (lexicographically first cell priced below
/// the threshold), so the run is finite and deterministic.
pub fn solve_tp(tp: &TransportProblem) -> TpSolution {
    let (r, c) = (tp.rows(), tp.cols());
    let a: Vec<f64> = tp.mu.iter().map(|&(_, m)| m).collect();
    let b: Vec<f64> = tp.nu.iter().map(|&(_, m)| m).collect();
    let mut basis = nw_basis(&a, &b);
    let mut pivots = 0usize;
    let cap = 200 * (r * c + r + c) + 1000;

    loop {
        let (u, v) = potentials(&basis, tp, r, c);
        let mut entering = None;
        'scan: for i in 0..r {
            for j in 0..c {
                if basis.iter().any(|&(bi, bj, _)| bi == i && bj == j) {
                    continue;
                }
                if tp.cost_at(i, j) - u[i] - v[j] < -tolerances::TP_REDUCED_COST {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else { break };
        pivot(&mut basis, ei, ej, r);
        pivots += 1;
        assert!(pivots <= cap, "transportation simplex exceeded its pivot budget");
    }

    let value = basis.iter().map(|&(i, j, q)| q * tp.cost_at(i, j)).sum();
    let cells: Vec<(usize, usize, f64)> = basis
        .iter()
        .filter(|&&(_, _, q)| q > 0.0)
        .map(|&(i, j, q)| (tp.row_state(i), tp.col_state(j), q))
        .collect();
    let coupling = Coupling::from_cells(&cells).expect("simplex quantities are non-negative");
    TpSolution { coupling, value, pivots }
}

/// Dual potentials from the basis tree: u[0] = 0, then u[i] + v[j] =
/// cost(i,j) propagated along basis cells.
fn potentials(basis: &[(usize, usize, f64)], tp: &TransportProblem, r: usize, c: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![f64::NAN; r];
    let mut v = vec![f64::NAN; c];
    let mut row_adj: Vec<Vec<usize>> = vec![Vec::new(); r];
    let mut col_adj: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (k, &(i, j, _)) in basis.iter().enumerate() {
        row_adj[i].push(k);
        col_adj[j].push(k);
    }
    u[0] = 0.0;
    let mut stack = vec![(0usize, true)];
    while let Some((node, is_row)) = stack.pop() {
        let adj = if is_row { &row_adj[node] } else { &col_adj[node] };
        for &k in adj {
            let (i, j, _) = basis[k];
            if is_row && v[j].is_nan() {
                v[j] = tp.cost_at(i, j) - u[i];
                stack.push((j, false));
            } else if !is_row && u[i].is_nan() {
                u[i] = tp.cost_at(i, j) - v[j];
                stack.push((i, true));
            }
        }
    }
    (u, v)
}

/// Brings cell (ei,ej) into the basis: find the unique cycle, shift the
/// largest feasible quantity around it, drop the blocking cell.
fn pivot(basis: &mut Vec<(usize, usize, f64)>, ei: usize, ej: usize, r: usize) {
    // Nodes: rows are 0..r, columns are r+j. Find the tree path from
    // Row(ei) to Col(ej) by breadth-first search over basis cells.
    let mut adj: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (k, &(i, j, _)) in basis.iter().enumerate() {
        adj.entry(i).or_default().push((r + j, k));
        adj.entry(r + j).or_default().push((i, k));
    }
    let target = r + ej;
    let mut parent: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut queue = std::collections::VecDeque::from([ei]);
    let mut seen = std::collections::BTreeSet::from([ei]);
    while let Some(node) = queue.pop_front() {
        if node == target {
            break;
        }
        if let Some(nbrs) = adj.get(&node) {
            for &(next, via) in nbrs {
                if seen.insert(next) {
                    parent.insert(next, (node, via));
                    queue.push_back(next);
                }
            }
        }
    }
    let mut path = Vec::new();
    let mut node = target;
    while node != ei {
        let (prev, via) = parent[&node];
        path.push(via);
        node = prev;
    }
    path.reverse();

    // Walking Row(ei) -> Col(ej), odd positions (0-based even indices) of
    // the path are minus cells; the entering cell is a plus cell.
    let minus: Vec<usize> = path.iter().copied().step_by(2).collect();
    let theta = minus
        .iter()
        .map(|&k| basis[k].2)
        .fold(f64::INFINITY, f64::min);
    let leaving = minus
        .iter()
        .copied()
        .filter(|&k| basis[k].2 <= theta)
        .min_by_key(|&k| (basis[k].0, basis[k].1))
        .expect("cycle has at least one minus cell");
    for (pos, &k) in path.iter().enumerate() {
        if pos % 2 == 0 {
            basis[k].2 -= theta;
        } else {
            basis[k].2 += theta;
        }
    }
    basis[leaving] = (ei, ej, theta);
    basis.sort_unstable_by_key(|&(i, j, _)| (i, j));
}

/// True when `coupling` already achieves the optimal cost of `tp` (within
/// the improvement tolerance).
pub fn is_optimal(tp: &TransportProblem, coupling: &Coupling) -> bool {
    let current = coupling.cost_under(|u, v| {
        tp.cost_between(u, v)
            .expect("coupling support must lie inside the problem supports")
    });
    current <= solve_tp(tp).value + tolerances::IMPROVE
}

/// A set of couplings indexed by canonical state pair (s,t), s <= t: rows
/// couple the distribution of s, columns that of t.
#[derive(Debug, Clone, Default)]
pub struct CouplingStructure {
    map: BTreeMap<(usize, usize), Coupling>,
}

impl CouplingStructure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: usize, t: usize) -> Option<&Coupling> {
        self.map.get(&(s, t))
    }

    /// Installs a coupling for (s,t) after checking it couples `mu` with
    /// `nu`.
    pub fn set(
        &mut self,
        s: usize,
        t: usize,
        coupling: Coupling,
        mu: &[(usize, f64)],
        nu: &[(usize, f64)],
    ) -> Result<(), TransportError> {
        coupling.check(mu, nu)?;
        self.map.insert((s, t), coupling);
        Ok(())
    }

    pub fn remove(&mut self, s: usize, t: usize) -> Option<Coupling> {
        self.map.remove(&(s, t))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.map.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
