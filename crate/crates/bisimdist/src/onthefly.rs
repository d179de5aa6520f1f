//! Demand-driven distance computation for a query set of pairs.
//!
//! Instead of pricing every pair of states, the solver installs couplings
//! only for the pairs a query actually reaches, evaluates the resulting
//! partial structure exactly (the installed couplings restrict the
//! one-step operator to a contraction with a unique fixed point), and
//! greedily replaces couplings that a transport solve strictly beats.
//! When no replacement helps, the values are the true distances; they are
//! frozen and later queries reuse them as constants.

use std::collections::{BTreeMap, BTreeSet};

use crate::fixpoint::{canonical, Discount, FixpointError, PairKind, Pairs};
use crate::model::{Ctmc, LabelMetric};
use crate::tolerances;
use crate::transport::{
    northwest_coupling, solve_tp, Coupling, CouplingStructure, TransportError, TransportProblem,
};

/// Hard cap on coupling replacements per queried pair. Hitting it is
/// reported as an error rather than risking a silent non-termination.
const REPLACEMENT_CAP: usize = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum OtfError {
    #[error("state index {0} out of range for a model with {1} states")]
    BadState(usize, usize),
    #[error("pair ({0},{1}) resolves trivially and takes no coupling")]
    TrivialPair(usize, usize),
    #[error("pair ({0},{1}) is already settled")]
    SettledPair(usize, usize),
    #[error("known distance {2} for pair ({0},{1}) lies outside [0,1]")]
    BadKnown(usize, usize, f64),
    #[error("no optimal coupling structure within {0} replacements")]
    ReplacementCap(usize),
    #[error(transparent)]
    Fixpoint(#[from] FixpointError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// One step of a run, in the order it happened.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    /// A coupling was installed for a pair that had none.
    Installed { pair: (usize, usize) },
    /// The structure was evaluated; `value` is the root pair's value.
    Evaluated { pair: (usize, usize), value: f64 },
    /// A coupling was replaced by a strictly cheaper transport vertex.
    Replaced { pair: (usize, usize), old_cost: f64, new_cost: f64 },
    /// A pair's value was frozen for the rest of the run.
    Promoted { pair: (usize, usize), value: f64 },
}

/// Work counters for one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OtfStats {
    /// Distinct pairs touched: coupled, trivially resolved, or supplied.
    pub visited: usize,
    /// Size of the last explored query's final closure.
    pub reachable: usize,
    /// Coupling replacements performed.
    pub improvements: usize,
    /// Transportation problems solved during optimality scans.
    pub tp_solved: usize,
    /// Exact re-evaluations of the installed structure.
    pub evaluations: usize,
}

/// Extra inputs for `on_the_fly`.
#[derive(Debug, Clone, Default)]
pub struct OtfOptions {
    /// Trusted distance values, frozen before anything runs. The solver
    /// never revisits them, so the result is only as good as they are.
    pub known: Vec<((usize, usize), f64)>,
    /// Couplings to install up front instead of the northwest default.
    pub initial_couplings: Vec<((usize, usize), Coupling)>,
}

/// Result of an on-the-fly run.
#[derive(Debug, Clone)]
pub struct OtfRun {
    /// Value per canonical queried pair.
    pub values: BTreeMap<(usize, usize), f64>,
    /// Every pair settled during the run, queries included.
    pub exact: BTreeMap<(usize, usize), f64>,
    /// The coupling each settled pair held when it settled. Pricing the
    /// coupled fixed point with this structure reproduces the values.
    pub terminal: CouplingStructure,
    pub trace: Vec<TraceEvent>,
    pub stats: OtfStats,
}

/// Mutable state of the demand-driven solver.
pub struct OtfState<'a> {
    m: &'a Ctmc,
    lambda: Discount,
    pairs: Pairs,
    couplings: CouplingStructure,
    /// Values of the current structure on every installed pair, from the
    /// latest evaluation.
    d: BTreeMap<(usize, usize), f64>,
    /// Settled pairs; their values never change again.
    exact: BTreeMap<(usize, usize), f64>,
    visited: BTreeSet<(usize, usize)>,
    terminal: CouplingStructure,
    /// Last replaced pair; the next optimality scan resumes after it.
    scan_from: Option<(usize, usize)>,
    trace: Vec<TraceEvent>,
    stats: OtfStats,
}

impl<'a> OtfState<'a> {
    pub fn new(
        m: &'a Ctmc,
        metric: &'a LabelMetric,
        lambda: Discount,
    ) -> Result<Self, OtfError> {
        let pairs = Pairs::build(m, metric)?;
        Ok(OtfState {
            m,
            lambda,
            pairs,
            couplings: CouplingStructure::new(),
            d: BTreeMap::new(),
            exact: BTreeMap::new(),
            visited: BTreeSet::new(),
            terminal: CouplingStructure::new(),
            scan_from: None,
            trace: Vec::new(),
            stats: OtfStats::default(),
        })
    }

    fn check_state(&self, s: usize) -> Result<(), OtfError> {
        if s >= self.m.len() {
            Err(OtfError::BadState(s, self.m.len()))
        } else {
            Ok(())
        }
    }

    /// Forced value of a pair, if it has one.
    fn trivial(&self, s: usize, t: usize) -> Option<f64> {
        if s == t {
            return Some(0.0);
        }
        let pd = self.pairs.get(s, t);
        match pd.kind {
            PairKind::Mixed => Some(1.0),
            PairKind::Absorbing => Some(pd.ell),
            PairKind::Active => None,
        }
    }

    /// Cost of a transport cell under the current knowledge. Valued cells
    /// are priced exactly; forced cells by their forced value; never
    /// installed active cells by the label distance, a static lower bound
    /// on their true distance. A candidate that loses even with its
    /// unknown cells priced from below would lose under the true
    /// distances too, so a scan that adopts nothing certifies the current
    /// values; a candidate that wins on such a bet gets its unknown cells
    /// installed and valued, which confirms or reverts the bet with
    /// strictly more knowledge either way.
    fn price(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        let p = canonical(u, v);
        if let Some(&x) = self.exact.get(&p) {
            return x;
        }
        if let Some(&x) = self.d.get(&p) {
            return x;
        }
        let pd = self.pairs.get(u, v);
        match pd.kind {
            PairKind::Mixed => 1.0,
            PairKind::Absorbing | PairKind::Active => pd.ell,
        }
    }

    /// Freezes a pair at `value`, retiring its coupling into the terminal
    /// structure.
    fn settle(&mut self, p: (usize, usize), value: f64) {
        if let Some(c) = self.couplings.remove(p.0, p.1) {
            self.terminal
                .set(p.0, p.1, c, self.m.successors(p.0), self.m.successors(p.1))
                .expect("a settled coupling was valid when installed");
        }
        self.d.remove(&p);
        self.visited.insert(p);
        self.exact.insert(p, value);
        self.trace.push(TraceEvent::Promoted { pair: p, value });
    }

    fn install(&mut self, p: (usize, usize), w: Coupling) -> Result<(), OtfError> {
        let m = self.m;
        self.couplings
            .set(p.0, p.1, w, m.successors(p.0), m.successors(p.1))?;
        self.visited.insert(p);
        self.trace.push(TraceEvent::Installed { pair: p });
        Ok(())
    }

    /// Installs `w` at the active pair `(s,t)`, then walks the demanded
    /// pairs: trivial ones settle immediately, the rest get northwest
    /// guesses until the structure is closed under supports.
    pub fn set_pair(&mut self, s: usize, t: usize, w: Coupling) -> Result<(), OtfError> {
        self.check_state(s)?;
        self.check_state(t)?;
        let p = canonical(s, t);
        if self.trivial(p.0, p.1).is_some() {
            return Err(OtfError::TrivialPair(s, t));
        }
        if self.exact.contains_key(&p) {
            return Err(OtfError::SettledPair(s, t));
        }
        self.install(p, w)?;
        self.explore(p)
    }

    /// Closes the structure under coupling supports starting from `start`.
    fn explore(&mut self, start: (usize, usize)) -> Result<(), OtfError> {
        let mut work = vec![start];
        while let Some(p) = work.pop() {
            let cells: Vec<(usize, usize)> = match self.couplings.get(p.0, p.1) {
                Some(c) => c.support().map(|(u, v, _)| canonical(u, v)).collect(),
                None => continue,
            };
            for q in cells {
                if self.exact.contains_key(&q) || self.couplings.get(q.0, q.1).is_some() {
                    continue;
                }
                match self.trivial(q.0, q.1) {
                    Some(v) => self.settle(q, v),
                    None => {
                        let m = self.m;
                        let w = northwest_coupling(m.successors(q.0), m.successors(q.1))?;
                        self.install(q, w)?;
                        work.push(q);
                    }
                }
            }
        }
        Ok(())
    }

    /// The pairs whose value currently depends on installed couplings: the
    /// reflexive-transitive closure of positive coupling support from
    /// `(s,t)`, stopping at settled pairs. Empty if the root is settled or
    /// forced.
    pub fn reachable(&self, s: usize, t: usize) -> Result<BTreeSet<(usize, usize)>, OtfError> {
        let root = canonical(s, t);
        let mut out = BTreeSet::new();
        if self.exact.contains_key(&root) || self.trivial(root.0, root.1).is_some() {
            return Ok(out);
        }
        let mut work = vec![root];
        while let Some(p) = work.pop() {
            if !out.insert(p) {
                continue;
            }
            let c = self
                .couplings
                .get(p.0, p.1)
                .ok_or(FixpointError::MissingCoupling { s: p.0, t: p.1 })?;
            for (u, v, _) in c.support() {
                let q = canonical(u, v);
                if self.exact.contains_key(&q)
                    || self.trivial(q.0, q.1).is_some()
                    || out.contains(&q)
                {
                    continue;
                }
                work.push(q);
            }
        }
        Ok(out)
    }

    /// Evaluates the structure exactly on every installed pair, stores
    /// the fresh values, and freezes every pair pinned at zero or at its
    /// label distance: both bound the distance from below, so an
    /// over-approximation that reaches one is exact. Evaluating the whole
    /// structure, not just the closure of `(s,t)`, keeps a value on every
    /// explored pair; pairs that drop out of the root's closure would
    /// otherwise be re-priced by their padding bound and oscillate.
    /// Returns the root value.
    ///
    /// The installed couplings restrict the one-step operator to a sup
    /// norm contraction with factor `lambda` on the installed pairs, so
    /// the fixed point is unique and Gauss-Seidel sweeps converge to it
    /// from anywhere; warm-starting from the previous values makes the
    /// re-evaluation after a replacement nearly free.
    pub fn refresh(&mut self, s: usize, t: usize) -> Result<f64, OtfError> {
        let root = canonical(s, t);
        let lam = self.lambda.get();
        let keys: Vec<(usize, usize)> = self.couplings.pairs().collect();
        let index: BTreeMap<(usize, usize), usize> =
            keys.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        enum Cell {
            Fixed(f64),
            Var(usize),
        }
        struct Row {
            ell: f64,
            tv: f64,
            cells: Vec<(Cell, f64)>,
        }
        let rows: Vec<Row> = keys
            .iter()
            .map(|&p| {
                let pd = self.pairs.get(p.0, p.1);
                let c = self.couplings.get(p.0, p.1).expect("pair is installed");
                let cells = c
                    .support()
                    .map(|(u, v, w)| {
                        let q = canonical(u, v);
                        let cell = if u == v {
                            Cell::Fixed(0.0)
                        } else if let Some(&e) = self.exact.get(&q) {
                            Cell::Fixed(e)
                        } else {
                            Cell::Var(index[&q])
                        };
                        (cell, w)
                    })
                    .collect();
                Row { ell: pd.ell, tv: pd.tv, cells }
            })
            .collect();
        let mut val: Vec<f64> = keys
            .iter()
            .map(|p| self.d.get(p).copied().unwrap_or(0.0))
            .collect();
        let stop = 1e-13f64.max(1e-12 * (1.0 - lam));
        for _ in 0..200_000 {
            let mut moved = 0.0f64;
            for (i, r) in rows.iter().enumerate() {
                let mut k = 0.0;
                for (cell, w) in &r.cells {
                    let x = match cell {
                        Cell::Fixed(e) => *e,
                        Cell::Var(j) => val[*j],
                    };
                    k += w * x;
                }
                let next = r.ell.max(lam * (r.tv + (1.0 - r.tv) * k));
                moved = moved.max((next - val[i]).abs());
                val[i] = next;
            }
            if moved <= stop {
                break;
            }
        }
        self.stats.evaluations += 1;
        self.d = keys.into_iter().zip(val).collect();
        let value = self
            .d
            .get(&root)
            .or_else(|| self.exact.get(&root))
            .copied()
            .expect("the root pair is installed or settled");
        self.trace.push(TraceEvent::Evaluated { pair: root, value });
        let snapshot: Vec<((usize, usize), f64)> = self.d.iter().map(|(&p, &v)| (p, v)).collect();
        for (p, v) in snapshot {
            let pd = self.pairs.get(p.0, p.1);
            let pinned = if (v - pd.ell).abs() <= tolerances::EXACT {
                pd.ell
            } else if v.abs() <= tolerances::EXACT {
                0.0
            } else {
                continue;
            };
            self.settle(p, pinned);
        }
        Ok(value)
    }

    /// Prices the coupling at `p` against an optimal transport vertex and
    /// returns the replacement if the vertex is strictly cheaper.
    fn better_coupling(
        &mut self,
        p: (usize, usize),
    ) -> Result<Option<(Coupling, f64, f64)>, OtfError> {
        let c = self
            .couplings
            .get(p.0, p.1)
            .ok_or(FixpointError::MissingCoupling { s: p.0, t: p.1 })?;
        let current = c.cost_under(|u, v| self.price(u, v));
        let m = self.m;
        let tp = TransportProblem::new(m.successors(p.0), m.successors(p.1), |u, v| {
            self.price(u, v)
        })?;
        let sol = solve_tp(&tp);
        self.stats.tp_solved += 1;
        if current > sol.value + tolerances::IMPROVE {
            Ok(Some((sol.coupling, current, sol.value)))
        } else {
            Ok(None)
        }
    }

    /// One greedy pass for the query `(s,t)`: find an installed coupling
    /// that a transport vertex strictly beats, replace it, explore the
    /// pairs the replacement bets on, re-evaluate, and report whether
    /// anything changed. A replacement whose support is fully valued is a
    /// certified strict improvement; one that bets on unexplored cells
    /// grows the explored region, so either way the run makes progress.
    /// The scan resumes after the last replaced pair and wraps; values
    /// cannot move during a wrap that replaces nothing, so returning
    /// false certifies every current value exact (the query may also
    /// settle by pinning, which ends the loop without certifying the
    /// rest).
    pub fn improve_step(&mut self, s: usize, t: usize) -> Result<bool, OtfError> {
        let root = canonical(s, t);
        if self.exact.contains_key(&root) || self.trivial(root.0, root.1).is_some() {
            return Ok(false);
        }
        let scan: Vec<(usize, usize)> = self.couplings.pairs().collect();
        if scan.is_empty() {
            return Ok(false);
        }
        let start = match self.scan_from {
            Some(c) => scan.partition_point(|&p| p <= c) % scan.len(),
            None => 0,
        };
        for i in 0..scan.len() {
            let p = scan[(start + i) % scan.len()];
            if let Some((w, old_cost, new_cost)) = self.better_coupling(p)? {
                let m = self.m;
                self.couplings
                    .set(p.0, p.1, w, m.successors(p.0), m.successors(p.1))?;
                self.trace
                    .push(TraceEvent::Replaced { pair: p, old_cost, new_cost });
                self.stats.improvements += 1;
                self.scan_from = Some(p);
                self.explore(p)?;
                self.refresh(root.0, root.1)?;
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Current value of a pair, if the run has one.
    pub fn value(&self, s: usize, t: usize) -> Option<f64> {
        if s == t {
            return Some(0.0);
        }
        let p = canonical(s, t);
        self.exact.get(&p).or_else(|| self.d.get(&p)).copied()
    }

    pub fn exact(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.exact
    }

    pub fn visited(&self) -> &BTreeSet<(usize, usize)> {
        &self.visited
    }

    pub fn couplings(&self) -> &CouplingStructure {
        &self.couplings
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn stats(&self) -> OtfStats {
        OtfStats { visited: self.visited.len(), ..self.stats }
    }
}

/// Computes the distance for every queried pair, exploring only what the
/// queries demand. Results are exact up to arithmetic tolerance; supplied
/// `known` values are trusted as-is.
pub fn on_the_fly(
    m: &Ctmc,
    metric: &LabelMetric,
    lambda: Discount,
    queries: &[(usize, usize)],
    opts: &OtfOptions,
) -> Result<OtfRun, OtfError> {
    let mut st = OtfState::new(m, metric, lambda)?;
    for &((a, b), v) in &opts.known {
        st.check_state(a)?;
        st.check_state(b)?;
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(OtfError::BadKnown(a, b, v));
        }
        let p = canonical(a, b);
        st.exact.insert(p, v);
        st.visited.insert(p);
    }
    for ((a, b), w) in &opts.initial_couplings {
        st.check_state(*a)?;
        st.check_state(*b)?;
        let p = canonical(*a, *b);
        if st.trivial(p.0, p.1).is_some() {
            return Err(OtfError::TrivialPair(p.0, p.1));
        }
        if st.exact.contains_key(&p) {
            return Err(OtfError::SettledPair(p.0, p.1));
        }
        st.install(p, w.clone())?;
    }
    for &((a, b), _) in &opts.initial_couplings {
        st.explore(canonical(a, b))?;
    }

    let mut order: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &(a, b) in queries {
        st.check_state(a)?;
        st.check_state(b)?;
        order.insert(canonical(a, b));
    }

    let mut values = BTreeMap::new();
    for &q in &order {
        if let Some(&v) = st.exact.get(&q) {
            values.insert(q, v);
            continue;
        }
        if let Some(v) = st.trivial(q.0, q.1) {
            st.settle(q, v);
            values.insert(q, v);
            continue;
        }
        if st.couplings.get(q.0, q.1).is_none() {
            let w = northwest_coupling(m.successors(q.0), m.successors(q.1))?;
            st.install(q, w)?;
            st.explore(q)?;
        }
        st.refresh(q.0, q.1)?;
        let mut replacements = 0usize;
        while st.improve_step(q.0, q.1)? {
            replacements += 1;
            if replacements >= REPLACEMENT_CAP {
                return Err(OtfError::ReplacementCap(replacements));
            }
        }
        let closure = st.reachable(q.0, q.1)?;
        st.stats.reachable = closure.len();
        if let Some(&v) = st.exact.get(&q) {
            // pinned during the improvement loop; other installed pairs
            // keep their couplings, their values are not yet certified
            values.insert(q, v);
            continue;
        }
        // a clean scan certifies every current value, not just the
        // query's closure
        let certified: Vec<((usize, usize), f64)> = st.d.iter().map(|(&p, &v)| (p, v)).collect();
        for (p, v) in certified {
            st.settle(p, v);
        }
        let v = st
            .exact
            .get(&q)
            .copied()
            .expect("a queried pair settles with its certified value");
        values.insert(q, v);
    }
    let stats = st.stats();
    Ok(OtfRun {
        values,
        exact: st.exact,
        terminal: st.terminal,
        trace: st.trace,
        stats,
    })
}
