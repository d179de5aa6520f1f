//! The discounted distance operator and its fixed points.
//!
//! `delta_op` applies one step of the operator behind the behavioural
//! pseudometric; `iterate` runs it from the zero matrix often enough to
//! reach a requested accuracy. `gamma_op` is the variant where each state
//! pair uses a fixed coupling instead of an optimal one, and `discrepancy`
//! evaluates that variant exactly on the sub-system of pairs reachable
//! through the installed couplings.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::metrics::{kantorovich, label_dist, tv_exp, MetricsError};
use crate::model::{Ctmc, LabelMetric, ModelError};
use crate::simplex::{solve_lp, LpProblem, LpStatus, RowKind, Sense};
use crate::transport::{CouplingStructure, TransportError};

#[derive(Debug, thiserror::Error)]
pub enum FixpointError {
    #[error("discount factor {0} outside (0,1)")]
    BadDiscount(f64),
    #[error("tolerance {0} outside (0,1)")]
    BadTolerance(f64),
    #[error("distance matrix covers {got} states, model has {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("no coupling installed for pair ({s},{t})")]
    MissingCoupling { s: usize, t: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("discrepancy program ended {0:?}")]
    Lp(LpStatus),
}

/// A discount factor, strictly between 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discount(f64);

impl Discount {
    pub fn new(lambda: f64) -> Result<Self, FixpointError> {
        if lambda.is_finite() && 0.0 < lambda && lambda < 1.0 {
            Ok(Discount(lambda))
        } else {
            Err(FixpointError::BadDiscount(lambda))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// A symmetric matrix of values in [0,1] with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    /// The zero matrix, least element of the lattice.
    pub fn bottom(n: usize) -> Self {
        DistanceMatrix { n, d: vec![0.0; n * n] }
    }

    /// All ones off the diagonal, greatest element.
    pub fn top(n: usize) -> Self {
        let mut m = DistanceMatrix { n, d: vec![1.0; n * n] };
        for s in 0..n {
            m.d[s * n + s] = 0.0;
        }
        m
    }

    /// Builds from a function on ordered pairs s < t.
    pub fn from_fn<F>(n: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mut m = Self::bottom(n);
        for t in 0..n {
            for s in 0..t {
                m.set_pair(s, t, f(s, t));
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.d[s * self.n + t]
    }

    /// Sets both (s,t) and (t,s); the diagonal stays 0.
    pub fn set_pair(&mut self, s: usize, t: usize, v: f64) {
        if s == t {
            return;
        }
        debug_assert!(v.is_finite() && (-1e-9..=1.0 + 1e-9).contains(&v), "distance {v}");
        let v = v.clamp(0.0, 1.0);
        self.d[s * self.n + t] = v;
        self.d[t * self.n + s] = v;
    }

    /// Supremum norm of the pointwise difference.
    pub fn sup_distance(&self, other: &DistanceMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.d
            .iter()
            .zip(&other.d)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest violation of the triangle inequality, at most 0 for a
    /// genuine pseudometric.
    pub fn triangle_defect(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for s in 0..self.n {
            for t in 0..self.n {
                for u in 0..self.n {
                    worst = worst.max(self.get(s, u) - self.get(s, t) - self.get(t, u));
                }
            }
        }
        worst
    }
}

pub(crate) fn canonical(s: usize, t: usize) -> (usize, usize) {
    if s <= t {
        (s, t)
    } else {
        (t, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PairKind {
    /// Exactly one side absorbing: distance 1.
    Mixed,
    /// Both absorbing: distance is the label distance.
    Absorbing,
    /// Both carry dynamics: the recursive case.
    Active,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PairData {
    pub ell: f64,
    pub tv: f64,
    pub kind: PairKind,
}

/// Per-pair constants of the operator, indexed by canonical pair s < t.
pub(crate) struct Pairs {
    n: usize,
    data: Vec<PairData>,
}

impl Pairs {
    pub fn build(m: &Ctmc, metric: &LabelMetric) -> Result<Self, FixpointError> {
        let n = m.len();
        let mut data = Vec::with_capacity(n * (n - 1) / 2);
        for t in 0..n {
            for s in 0..t {
                let ell = label_dist(m, metric, s, t)?;
                let (kind, tv) = match (m.rate(s), m.rate(t)) {
                    (None, None) => (PairKind::Absorbing, 0.0),
                    (Some(rs), Some(rt)) => (PairKind::Active, tv_exp(rs, rt)?),
                    _ => (PairKind::Mixed, 0.0),
                };
                data.push(PairData { ell, tv, kind });
            }
        }
        Ok(Pairs { n, data })
    }

    pub fn get(&self, s: usize, t: usize) -> PairData {
        let (s, t) = canonical(s, t);
        debug_assert!(s < t && t < self.n);
        self.data[t * (t - 1) / 2 + s]
    }
}

fn check_size(m: &Ctmc, d: &DistanceMatrix) -> Result<(), FixpointError> {
    if d.n() != m.len() {
        return Err(FixpointError::SizeMismatch { got: d.n(), want: m.len() });
    }
    Ok(())
}

fn apply_once(
    m: &Ctmc,
    pairs: &Pairs,
    lambda: Discount,
    d: &DistanceMatrix,
    tp_solved: &mut usize,
) -> Result<DistanceMatrix, FixpointError> {
    let n = m.len();
    let l = lambda.get();
    let mut next = DistanceMatrix::bottom(n);
    for t in 0..n {
        for s in 0..t {
            let pd = pairs.get(s, t);
            let v = match pd.kind {
                PairKind::Mixed => 1.0,
                PairKind::Absorbing => pd.ell,
                PairKind::Active => {
                    let k = kantorovich(
                        |u, v| d.get(u, v),
                        m.successors(s),
                        m.successors(t),
                    )?;
                    *tp_solved += 1;
                    pd.ell.max(l * (pd.tv + (1.0 - pd.tv) * k))
                }
            };
            next.set_pair(s, t, v);
        }
    }
    Ok(next)
}

/// One application of the distance operator.
pub fn delta_op(
    m: &Ctmc,
    metric: &LabelMetric,
    lambda: Discount,
    d: &DistanceMatrix,
) -> Result<DistanceMatrix, FixpointError> {
    check_size(m, d)?;
    let pairs = Pairs::build(m, metric)?;
    let mut tp = 0;
    apply_once(m, &pairs, lambda, d, &mut tp)
}

#[derive(Debug, Clone)]
pub struct IterateRun {
    pub distances: DistanceMatrix,
    pub applications: usize,
    pub tp_solved: usize,
}

/// Applies the operator `applications` times starting from `start`.
pub fn iterate_from(
    m: &Ctmc,
    metric: &LabelMetric,
    lambda: Discount,
    start: DistanceMatrix,
    applications: usize,
) -> Result<IterateRun, FixpointError> {
    check_size(m, &start)?;
    let pairs = Pairs::build(m, metric)?;
    let mut d = start;
    let mut tp_solved = 0;
    for _ in 0..applications {
        d = apply_once(m, &pairs, lambda, &d, &mut tp_solved)?;
    }
    Ok(IterateRun { distances: d, applications, tp_solved })
}

/// Fixed-point iteration from the zero matrix. The operator contracts by
/// the discount factor and distances live in [0,1], so
/// ceil(ln eps / ln lambda) applications land within `eps` of the fixed
/// point, from below.
pub fn iterate(
    m: &Ctmc,
    metric: &LabelMetric,
    lambda: Discount,
    eps: f64,
) -> Result<IterateRun, FixpointError> {
    if !(eps.is_finite() && 0.0 < eps && eps < 1.0) {
        return Err(FixpointError::BadTolerance(eps));
    }
    let applications = (eps.ln() / lambda.get().ln()).ceil() as usize;
    iterate_from(m, metric, lambda, DistanceMatrix::bottom(m.len()), applications)
}

fn gamma_once(
    m: &Ctmc,
    pairs: &Pairs,
    lambda: Discount,
    couplings: &CouplingStructure,
    d: &DistanceMatrix,
) -> Result<DistanceMatrix, FixpointError> {
    let n = m.len();
    let l = lambda.get();
    let mut next = DistanceMatrix::bottom(n);
    for t in 0..n {
        for s in 0..t {
            let pd = pairs.get(s, t);
            let v = match pd.kind {
                PairKind::Mixed => 1.0,
                PairKind::Absorbing => pd.ell,
                PairKind::Active => {
                    let c = couplings
                        .get(s, t)
                        .ok_or(FixpointError::MissingCoupling { s, t })?;
                    let k = c.cost_under(|u, v| d.get(u, v));
                    pd.ell.max(l * (pd.tv + (1.0 - pd.tv) * k))
                }
            };
            next.set_pair(s, t, v);
        }
    }
    Ok(next)
}

/// One application of the operator with every active pair priced by its
/// installed coupling instead of an optimal one.
pub fn gamma_op(
    m: &Ctmc,
    metric: &LabelMetric,
    lambda: Discount,
    couplings: &CouplingStructure,
    d: &DistanceMatrix,
) -> Result<DistanceMatrix, FixpointError> {
    check_size(m, d)?;
    let pairs = Pairs::build(m, metric)?;
    gamma_once(m, &pairs, lambda, couplings, d)
}

#[derive(Debug, Clone)]
pub struct GammaRun {
    pub distances: DistanceMatrix,
    pub applications: usize,
}

/// Least fixed point of the coupling-priced operator, within `eps` from
/// below. Always an over-approximation of the true pseudometric once
/// converged, since any fixed coupling prices transport at or above the
/// optimum.
pub fn gamma_fixpoint(
    m: &Ctmc,
    metric: &LabelMetric,
    lambda: Discount,
    couplings: &CouplingStructure,
    eps: f64,
) -> Result<GammaRun, FixpointError> {
    if !(eps.is_finite() && 0.0 < eps && eps < 1.0) {
        return Err(FixpointError::BadTolerance(eps));
    }
    let pairs = Pairs::build(m, metric)?;
    let applications = (eps.ln() / lambda.get().ln()).ceil() as usize;
    let mut d = DistanceMatrix::bottom(m.len());
    for _ in 0..applications {
        d = gamma_once(m, &pairs, lambda, couplings, &d)?;
    }
    Ok(GammaRun { distances: d, applications })
}

/// Exact values of the coupling-priced fixed point on the pairs reachable
/// from the queries.
#[derive(Debug, Clone)]
pub struct DiscrepancyResult {
    /// Value per visited canonical pair, constants included.
    pub values: BTreeMap<(usize, usize), f64>,
    /// The visited pairs whose value had to be solved for (not constant).
    pub closure: BTreeSet<(usize, usize)>,
}

/// Solves the coupling-priced fixed point restricted to the closure of
/// `queries` under coupling supports. Pairs with forced values stop the
/// exploration: the diagonal, pairs disagreeing on absorption, pairs of
/// absorbing states, and pairs listed in `known`.
///
/// The fixed point is the unique minimizer of the pair-sum over all
/// prefixed points, which is what the linear program below computes.
pub fn discrepancy(
    m: &Ctmc,
    metric: &LabelMetric,
    lambda: Discount,
    couplings: &CouplingStructure,
    queries: &[(usize, usize)],
    known: &BTreeMap<(usize, usize), f64>,
) -> Result<DiscrepancyResult, FixpointError> {
    let pairs = Pairs::build(m, metric)?;
    let l = lambda.get();
    let const_val = |s: usize, t: usize| -> Option<f64> {
        if s == t {
            return Some(0.0);
        }
        if let Some(&v) = known.get(&canonical(s, t)) {
            return Some(v);
        }
        let pd = pairs.get(s, t);
        match pd.kind {
            PairKind::Mixed => Some(1.0),
            PairKind::Absorbing => Some(pd.ell),
            PairKind::Active => None,
        }
    };

    let mut values = BTreeMap::new();
    let mut variable: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut queue: VecDeque<(usize, usize)> = queries.iter().map(|&(s, t)| canonical(s, t)).collect();
    let mut seen: BTreeSet<(usize, usize)> = queue.iter().copied().collect();
    while let Some((s, t)) = queue.pop_front() {
        if let Some(v) = const_val(s, t) {
            values.insert((s, t), v);
            continue;
        }
        variable.insert((s, t));
        let c = couplings
            .get(s, t)
            .ok_or(FixpointError::MissingCoupling { s, t })?;
        for (u, v, _) in c.support() {
            let q = canonical(u, v);
            if seen.insert(q) {
                queue.push_back(q);
            }
        }
    }

    if !variable.is_empty() {
        let order: Vec<(usize, usize)> = variable.iter().copied().collect();
        let mut lp = LpProblem::new(Sense::Minimize);
        let mut var_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &(s, t) in &order {
            let pd = pairs.get(s, t);
            var_of.insert((s, t), lp.add_variable(1.0, pd.ell, 1.0));
        }
        for &(s, t) in &order {
            let pd = pairs.get(s, t);
            let c = couplings.get(s, t).expect("closure pairs have couplings");
            let mut weight: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for (u, v, w) in c.support() {
                *weight.entry(canonical(u, v)).or_insert(0.0) += w;
            }
            let scale = l * (1.0 - pd.tv);
            let mut coeffs = vec![(var_of[&(s, t)], 1.0)];
            let mut rhs = l * pd.tv;
            for (q, w) in weight {
                match var_of.get(&q) {
                    Some(&var) => coeffs.push((var, -scale * w)),
                    None => {
                        let v = const_val(q.0, q.1)
                            .expect("non-variable closure pairs are constant");
                        rhs += scale * w * v;
                    }
                }
            }
            lp.add_row(RowKind::Ge, &coeffs, rhs);
        }
        let sol = solve_lp(&lp);
        if sol.status != LpStatus::Optimal {
            return Err(FixpointError::Lp(sol.status));
        }
        for &(s, t) in &order {
            values.insert((s, t), sol.values[var_of[&(s, t)]].clamp(0.0, 1.0));
        }
    }

    Ok(DiscrepancyResult { values, closure: variable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CtmcBuilder;
    use crate::model::{random_ctmc, GenParams};
    use crate::transport::{solve_tp, TransportProblem};

    /// Two states that only differ in how fast they drift to a third,
    /// distinctly labelled one. The distance between the first two has the
    /// closed form lambda/(1+lambda).
    fn drift_model(lambda: f64) -> (Ctmc, LabelMetric) {
        let mut b = CtmcBuilder::new();
        b.state("s", "red", 1.0, &[("s", 1.0)]);
        b.state("t", "red", 1.0, &[("t", lambda), ("u", 1.0 - lambda)]);
        b.state("u", "blue", 1.0, &[("u", 1.0)]);
        (b.finish().unwrap(), LabelMetric::Discrete)
    }

    #[test]
    fn discount_rejects_out_of_range() {
        assert!(Discount::new(0.0).is_err());
        assert!(Discount::new(1.0).is_err());
        assert!(Discount::new(-0.3).is_err());
        assert!(Discount::new(f64::NAN).is_err());
        assert!(Discount::new(0.5).is_ok());
    }

    #[test]
    fn application_count_follows_the_contraction_bound() {
        let (m, metric) = drift_model(0.5);
        let run = iterate(&m, &metric, Discount::new(0.5).unwrap(), 1e-6).unwrap();
        assert_eq!(run.applications, 20);
    }

    #[test]
    fn matches_the_closed_form_on_the_drift_model() {
        for lambda in [0.3, 0.5, 0.9] {
            let (m, metric) = drift_model(lambda);
            let run = iterate(&m, &metric, Discount::new(lambda).unwrap(), 1e-9).unwrap();
            let want = lambda / (1.0 + lambda);
            assert!(
                (run.distances.get(0, 1) - want).abs() < 1e-9 + 1e-12,
                "lambda {lambda}: {} vs {want}",
                run.distances.get(0, 1)
            );
            assert_eq!(run.distances.get(0, 2), 1.0);
            assert_eq!(run.distances.get(1, 2), 1.0);
        }
    }

    #[test]
    fn early_iterates_follow_the_closed_form() {
        // From the zero matrix, the n-th iterate on the drifting pair is
        // (lambda - lambda^(2n-1)) / (1 + lambda).
        let lambda = 0.5;
        let (m, metric) = drift_model(lambda);
        let disc = Discount::new(lambda).unwrap();
        for n in 1..=6usize {
            let run =
                iterate_from(&m, &metric, disc, DistanceMatrix::bottom(3), n).unwrap();
            let want =
                (lambda - lambda.powi(2 * n as i32 - 1)) / (1.0 + lambda);
            assert!(
                (run.distances.get(0, 1) - want).abs() < 1e-12,
                "iterate {n}"
            );
        }
        let two = iterate_from(&m, &metric, disc, DistanceMatrix::bottom(3), 2).unwrap();
        assert!((two.distances.get(0, 1) - lambda * (1.0 - lambda)).abs() < 1e-12);
    }

    #[test]
    fn top_and_bottom_iterates_bracket_the_fixed_point() {
        let (m, metric) = drift_model(0.5);
        let disc = Discount::new(0.5).unwrap();
        let lo = iterate_from(&m, &metric, disc, DistanceMatrix::bottom(3), 20).unwrap();
        let hi = iterate_from(&m, &metric, disc, DistanceMatrix::top(3), 20).unwrap();
        for t in 0..3 {
            for s in 0..t {
                assert!(lo.distances.get(s, t) <= hi.distances.get(s, t) + 1e-12);
            }
        }
        assert!(lo.distances.sup_distance(&hi.distances) < 2e-6);
        assert!(lo.distances.triangle_defect() <= 1e-9);
    }

    fn optimal_couplings(
        m: &Ctmc,
        d: &DistanceMatrix,
    ) -> CouplingStructure {
        let mut cs = CouplingStructure::new();
        for t in 0..m.len() {
            for s in 0..t {
                if m.is_absorbing(s) || m.is_absorbing(t) {
                    continue;
                }
                let tp = TransportProblem::new(m.successors(s), m.successors(t), |u, v| {
                    d.get(u, v)
                })
                .unwrap();
                let sol = solve_tp(&tp);
                cs.set(s, t, sol.coupling, m.successors(s), m.successors(t)).unwrap();
            }
        }
        cs
    }

    #[test]
    fn gamma_with_optimal_couplings_equals_delta() {
        let (m, metric) = random_ctmc(&GenParams { states: 6, seed: 11, ..Default::default() }).unwrap();
        let disc = Discount::new(0.5).unwrap();
        let d = DistanceMatrix::from_fn(6, |s, t| ((s * 7 + t * 3) % 10) as f64 / 10.0);
        let cs = optimal_couplings(&m, &d);
        let via_gamma = gamma_op(&m, &metric, disc, &cs, &d).unwrap();
        let via_delta = delta_op(&m, &metric, disc, &d).unwrap();
        assert!(via_gamma.sup_distance(&via_delta) < 1e-9);
    }

    #[test]
    fn gamma_requires_couplings_for_active_pairs() {
        let (m, metric) = drift_model(0.5);
        let err = gamma_op(
            &m,
            &metric,
            Discount::new(0.5).unwrap(),
            &CouplingStructure::new(),
            &DistanceMatrix::bottom(3),
        )
        .unwrap_err();
        assert!(matches!(err, FixpointError::MissingCoupling { .. }));
    }

    #[test]
    fn discrepancy_solves_the_drift_pair_exactly() {
        let lambda = 0.5;
        let (m, metric) = drift_model(lambda);
        let disc = Discount::new(lambda).unwrap();
        // Each active pair has a product coupling because the row state is
        // deterministic; install them all.
        let mut cs = CouplingStructure::new();
        for t in 1..3 {
            for s in 0..t {
                let tp = TransportProblem::new(m.successors(s), m.successors(t), |_, _| 0.0)
                    .unwrap();
                cs.set(s, t, solve_tp(&tp).coupling, m.successors(s), m.successors(t))
                    .unwrap();
            }
        }
        let res = discrepancy(&m, &metric, disc, &cs, &[(0, 1)], &BTreeMap::new()).unwrap();
        assert!(res.closure.contains(&(0, 1)));
        assert!(res.closure.contains(&(0, 2)));
        assert!((res.values[&(0, 1)] - lambda / (1.0 + lambda)).abs() < 1e-9);
        assert!((res.values[&(0, 2)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn known_values_cut_the_closure() {
        let lambda = 0.5;
        let (m, metric) = drift_model(lambda);
        let disc = Discount::new(lambda).unwrap();
        let mut cs = CouplingStructure::new();
        let tp = TransportProblem::new(m.successors(0), m.successors(1), |_, _| 0.0).unwrap();
        cs.set(0, 1, solve_tp(&tp).coupling, m.successors(0), m.successors(1)).unwrap();
        let known: BTreeMap<(usize, usize), f64> = [((0usize, 2usize), 1.0)].into();
        let res = discrepancy(&m, &metric, disc, &cs, &[(0, 1)], &known).unwrap();
        assert_eq!(res.closure.len(), 1);
        assert!((res.values[&(0, 1)] - lambda / (1.0 + lambda)).abs() < 1e-9);
        assert!((res.values[&(0, 2)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn discrepancy_agrees_with_iterating_the_coupled_operator() {
        let (m, metric) = random_ctmc(&GenParams { states: 5, seed: 23, ..Default::default() }).unwrap();
        let disc = Discount::new(0.6).unwrap();
        let base = iterate(&m, &metric, disc, 1e-10).unwrap();
        let cs = optimal_couplings(&m, &base.distances);
        let fix = gamma_fixpoint(&m, &metric, disc, &cs, 1e-12).unwrap();
        let queries: Vec<(usize, usize)> =
            (0..5).flat_map(|t| (0..t).map(move |s| (s, t))).collect();
        let res = discrepancy(&m, &metric, disc, &cs, &queries, &BTreeMap::new()).unwrap();
        for (&(s, t), &v) in &res.values {
            assert!(
                (v - fix.distances.get(s, t)).abs() < 1e-8,
                "pair ({s},{t}): lp {v} vs iteration {}",
                fix.distances.get(s, t)
            );
        }
    }

    #[test]
    fn discrepancy_values_satisfy_the_fixed_point_equations() {
        let (m, metric) = random_ctmc(&GenParams { states: 6, seed: 37, ..Default::default() }).unwrap();
        let disc = Discount::new(0.5).unwrap();
        let base = iterate(&m, &metric, disc, 1e-10).unwrap();
        let cs = optimal_couplings(&m, &base.distances);
        let pairs = Pairs::build(&m, &metric).unwrap();
        let res = discrepancy(&m, &metric, disc, &cs, &[(0, 1)], &BTreeMap::new()).unwrap();
        for &(s, t) in &res.closure {
            let pd = pairs.get(s, t);
            let c = cs.get(s, t).unwrap();
            let k = c.cost_under(|u, v| res.values[&canonical(u, v)]);
            let want = pd.ell.max(disc.get() * (pd.tv + (1.0 - pd.tv) * k));
            assert!((res.values[&(s, t)] - want).abs() < 1e-9, "pair ({s},{t})");
        }
    }
}
