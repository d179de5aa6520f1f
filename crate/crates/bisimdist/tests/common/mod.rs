//! Fixtures and independent oracles shared by the integration tests.

#![allow(dead_code)]

use bisimdist::model::SplitMix64;
use bisimdist::{Coupling, CouplingStructure, Ctmc, CtmcBuilder, DistanceMatrix, LabelMetric};

/// Two states that drift apart at a rate controlled by `lambda`; their
/// distance is lambda/(1+lambda) in closed form.
pub fn drift_model(lambda: f64) -> (Ctmc, LabelMetric) {
    let mut b = CtmcBuilder::new();
    b.state("s", "red", 1.0, &[("s", 1.0)]);
    b.state("t", "red", 1.0, &[("t", lambda), ("u", 1.0 - lambda)]);
    b.state("u", "blue", 1.0, &[("u", 1.0)]);
    (b.finish().unwrap(), LabelMetric::Discrete)
}

/// Four states over three labels with a fully hand-derived distance for
/// the pair (0,3): the greedy solver started from `worked_couplings`
/// replaces exactly one coupling on the way there.
pub fn worked_model() -> (Ctmc, LabelMetric) {
    let mut b = CtmcBuilder::new();
    b.state("s1", "red", 15.0, &[("s2", 5.0 / 7.0), ("s4", 2.0 / 7.0)]);
    b.state("s2", "blue", 9.0, &[("s1", 0.25), ("s2", 0.75)]);
    b.state("s3", "red", 15.0, &[("s2", 0.5), ("s4", 0.5)]);
    b.state(
        "s4",
        "green",
        9.0,
        &[("s2", 1.0 / 9.0), ("s3", 4.0 / 9.0), ("s4", 4.0 / 9.0)],
    );
    let entries = vec![
        ("red".to_string(), "blue".to_string(), 0.5),
        ("red".to_string(), "green".to_string(), 1.0 / 6.0),
        ("blue".to_string(), "green".to_string(), 2.0 / 3.0),
    ];
    (
        b.finish().unwrap(),
        LabelMetric::Table(bisimdist::MetricTable::from_entries(&entries)),
    )
}

/// Hand-picked starting couplings for `worked_model`, one per pair the
/// seeded query explores.
pub fn worked_couplings() -> Vec<((usize, usize), Coupling)> {
    let w14 = Coupling::from_cells(&[
        (1, 2, 4.0 / 9.0),
        (1, 3, 17.0 / 63.0),
        (3, 1, 1.0 / 9.0),
        (3, 3, 11.0 / 63.0),
    ])
    .unwrap();
    let w12 = Coupling::from_cells(&[(1, 1, 5.0 / 7.0), (3, 0, 0.25), (3, 1, 1.0 / 28.0)]).unwrap();
    let w23 = Coupling::from_cells(&[(0, 1, 0.25), (1, 1, 0.25), (1, 3, 0.5)]).unwrap();
    let w24 = Coupling::from_cells(&[
        (0, 1, 1.0 / 9.0),
        (0, 3, 5.0 / 36.0),
        (1, 2, 4.0 / 9.0),
        (1, 3, 11.0 / 36.0),
    ])
    .unwrap();
    vec![((0, 3), w14), ((0, 1), w12), ((1, 2), w23), ((1, 3), w24)]
}

/// Five states in two behavioural classes: the two red states split the
/// same mass between an absorbing green state and a blue two-cycle, and
/// `eps` skews the first red state's split. At `eps = 0` the reds are
/// equivalent and so are the blues; any `eps > 0` separates the reds.
pub fn two_class_model(eps: f64) -> (Ctmc, LabelMetric) {
    let mut b = CtmcBuilder::new();
    b.state(
        "s1",
        "red",
        3.0,
        &[("s3", 1.0 / 3.0 + eps), ("s4", 2.0 / 3.0 - eps)],
    );
    b.state(
        "s2",
        "red",
        3.0,
        &[("s3", 1.0 / 3.0), ("s4", 1.0 / 3.0), ("s5", 1.0 / 3.0)],
    );
    b.absorbing("s3", "green");
    b.state("s4", "blue", 5.0, &[("s5", 1.0)]);
    b.state("s5", "blue", 5.0, &[("s4", 1.0)]);
    (b.finish().unwrap(), LabelMetric::Discrete)
}

/// Every unordered off-diagonal pair of `0..n`.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for s in 0..n {
        for t in s + 1..n {
            out.push((s, t));
        }
    }
    out
}

/// Builds a distance matrix from per-pair values keyed by canonical pair.
pub fn matrix_from_values(
    n: usize,
    values: &std::collections::BTreeMap<(usize, usize), f64>,
) -> DistanceMatrix {
    DistanceMatrix::from_fn(n, |s, t| values[&(s, t)])
}

/// A pseudometric with values in [0,1]: embed the states at random points
/// of a cube and take the coordinatewise maximum distance.
pub fn random_pseudometric(n: usize, rng: &mut SplitMix64) -> DistanceMatrix {
    let points: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
        .collect();
    DistanceMatrix::from_fn(n, |s, t| {
        points[s]
            .iter()
            .zip(points[t].iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    })
}

/// An arbitrary symmetric zero-diagonal matrix with entries in [0,1]; no
/// triangle inequality.
pub fn random_symmetric(n: usize, rng: &mut SplitMix64) -> DistanceMatrix {
    let mut draws = std::collections::BTreeMap::new();
    for p in all_pairs(n) {
        draws.insert(p, rng.next_f64());
    }
    DistanceMatrix::from_fn(n, |s, t| draws[&(s, t)])
}

/// A random vertex of the coupling polytope: allocate the cells in a
/// random order, each time shipping as much as both marginals still
/// allow. Every saturation retires a row or a column, so the support is
/// a spanning forest, which is exactly the vertex property.
pub fn random_vertex(
    mu: &[(usize, f64)],
    nu: &[(usize, f64)],
    rng: &mut SplitMix64,
) -> Coupling {
    let mut order: Vec<(usize, usize)> = (0..mu.len())
        .flat_map(|i| (0..nu.len()).map(move |j| (i, j)))
        .collect();
    for k in (1..order.len()).rev() {
        order.swap(k, rng.below(k + 1));
    }
    let mut row: Vec<f64> = mu.iter().map(|&(_, x)| x).collect();
    let mut col: Vec<f64> = nu.iter().map(|&(_, x)| x).collect();
    let mut cells = Vec::new();
    for (i, j) in order {
        let a = row[i].min(col[j]);
        if a > 0.0 {
            cells.push((mu[i].0, nu[j].0, a));
            row[i] -= a;
            col[j] -= a;
        }
    }
    Coupling::from_cells(&cells).unwrap()
}

/// A coupling structure holding a random vertex for every pair of
/// distinct non-absorbing states.
pub fn random_vertex_structure(m: &Ctmc, rng: &mut SplitMix64) -> CouplingStructure {
    let mut cs = CouplingStructure::new();
    for (s, t) in all_pairs(m.len()) {
        if m.is_absorbing(s) || m.is_absorbing(t) {
            continue;
        }
        let w = random_vertex(m.successors(s), m.successors(t), rng);
        cs.set(s, t, w, m.successors(s), m.successors(t)).unwrap();
    }
    cs
}

/// A random transportation instance: supports of size 1..=4 over indices
/// below 8, normalized masses, and independent cell costs in [0,1].
pub fn random_tp(
    rng: &mut SplitMix64,
) -> (
    Vec<(usize, f64)>,
    Vec<(usize, f64)>,
    std::collections::BTreeMap<(usize, usize), f64>,
) {
    let mu = random_support(1 + rng.below(4), rng);
    let nu = random_support(1 + rng.below(4), rng);
    let mut cost = std::collections::BTreeMap::new();
    for &(u, _) in &mu {
        for &(v, _) in &nu {
            cost.insert((u, v), rng.next_f64());
        }
    }
    (mu, nu, cost)
}

fn random_support(k: usize, rng: &mut SplitMix64) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..8).collect();
    for i in (1..idx.len()).rev() {
        idx.swap(i, rng.below(i + 1));
    }
    let mut out: Vec<(usize, f64)> = idx[..k]
        .iter()
        .map(|&u| (u, rng.next_f64_pos()))
        .collect();
    out.sort_unstable_by_key(|&(u, _)| u);
    let total: f64 = out.iter().map(|&(_, x)| x).sum();
    for (_, x) in &mut out {
        *x /= total;
    }
    out
}

/// Transportation oracle by basis enumeration: every basic feasible
/// solution corresponds to a choice of m+n-1 cells forming a spanning
/// forest, and some vertex is optimal, so the minimum over feasible
/// bases is the optimum. Exponential, fine for supports up to 4.
pub fn brute_force_tp<F>(mu: &[(usize, f64)], nu: &[(usize, f64)], mut cost: F) -> f64
where
    F: FnMut(usize, usize) -> f64,
{
    let m = mu.len();
    let n = nu.len();
    let cells: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .collect();
    let k = m + n - 1;
    let mut comb: Vec<usize> = (0..k).collect();
    let mut best = f64::INFINITY;
    loop {
        if let Some(v) = basis_value(mu, nu, &cells, &comb, &mut cost) {
            best = best.min(v);
        }
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if comb[i] != i + cells.len() - k {
                comb[i] += 1;
                for j in i + 1..k {
                    comb[j] = comb[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Cost of the basic solution on the chosen cells, if they determine a
/// feasible one. A basis is a spanning forest, so some row or column
/// always holds exactly one remaining cell and its mass is forced;
/// subsets that get stuck contain a cycle and subsets that force
/// negative mass or leave marginals unmet are infeasible.
fn basis_value<F>(
    mu: &[(usize, f64)],
    nu: &[(usize, f64)],
    cells: &[(usize, usize)],
    comb: &[usize],
    cost: &mut F,
) -> Option<f64>
where
    F: FnMut(usize, usize) -> f64,
{
    let mut row_rem: Vec<f64> = mu.iter().map(|&(_, x)| x).collect();
    let mut col_rem: Vec<f64> = nu.iter().map(|&(_, x)| x).collect();
    let mut row_count = vec![0usize; mu.len()];
    let mut col_count = vec![0usize; nu.len()];
    for &c in comb {
        row_count[cells[c].0] += 1;
        col_count[cells[c].1] += 1;
    }
    let mut alive = vec![true; comb.len()];
    let mut total = 0.0;
    for _ in 0..comb.len() {
        let mut pick = None;
        for (slot, &c) in comb.iter().enumerate() {
            if !alive[slot] {
                continue;
            }
            let (i, j) = cells[c];
            if row_count[i] == 1 {
                pick = Some((slot, row_rem[i]));
                break;
            }
            if col_count[j] == 1 {
                pick = Some((slot, col_rem[j]));
                break;
            }
        }
        let (slot, x) = pick?;
        if x < -1e-9 {
            return None;
        }
        let (i, j) = cells[comb[slot]];
        total += x.max(0.0) * cost(mu[i].0, nu[j].0);
        row_rem[i] -= x;
        col_rem[j] -= x;
        row_count[i] -= 1;
        col_count[j] -= 1;
        alive[slot] = false;
    }
    let met = row_rem.iter().chain(col_rem.iter()).all(|&r| r.abs() <= 1e-9);
    if met {
        Some(total)
    } else {
        None
    }
}

/// Total variation distance between two exponential sojourn laws by
/// numeric integration of half the L1 distance between the densities,
/// independent of the closed form under test.
pub fn exp_tv_by_integration(r1: f64, r2: f64) -> f64 {
    let f = |x: f64| (r1 * (-r1 * x).exp() - r2 * (-r2 * x).exp()).abs();
    let hi = 60.0 / r1.min(r2);
    0.5 * adaptive_simpson(&f, 0.0, hi, 1e-11, 60)
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64, depth: usize) -> f64 {
    let c = 0.5 * (a + b);
    let whole = simpson(f, a, b);
    let left = simpson(f, a, c);
    let right = simpson(f, c, b);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * eps {
        left + right + err / 15.0
    } else {
        adaptive_simpson(f, a, c, 0.5 * eps, depth - 1)
            + adaptive_simpson(f, c, b, 0.5 * eps, depth - 1)
    }
}
