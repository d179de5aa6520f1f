//! The whole-system linear program for the pseudometric.
//!
//! One program holds a distance variable per state pair plus, for every
//! pair of non-absorbing states, a transport value k, a capped value m and
//! dual potentials y. Maximizing the sum of k and m pushes k to the
//! Kantorovich value (through the potential constraints) and m to the cap,
//! making the optimal d exactly the fixed point.
//!
//! Each pair only carries potentials for states its two successor
//! distributions can reach, so the y_u - y_v <= d_uv constraints live on
//! the union of the two supports. That relaxation lets transport shortcut
//! through intermediate support states when the interim d values violate
//! the triangle inequality, which only lowers the transport estimate; the
//! solved d is certified against the exact one-step equations afterwards,
//! where shortcuts vanish because the fixed point is a pseudometric.
//!
//! Even restricted to supports, far more potential constraints exist than
//! are ever tight, so they are generated lazily: solve, scan for
//! violations, activate the worst few per pair, repeat. The incremental
//! solver keeps its basis between rounds.

use crate::fixpoint::{canonical, Discount, DistanceMatrix, PairKind, Pairs};
use crate::metrics::MetricsError;
use crate::model::{Ctmc, LabelMetric, ModelError};
use crate::simplex::{LpProblem, LpStatus, RowKind, Sense, Solver};
use crate::tolerances;

#[derive(Debug, thiserror::Error)]
pub enum GlobalLpError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("distance program ended {0:?}")]
    Lp(LpStatus),
    #[error("potential constraints still violated by {0} after generation")]
    Residual(f64),
}

#[derive(Debug, Clone)]
pub struct GlobalLpRun {
    pub distances: DistanceMatrix,
    pub objective: f64,
    pub variables: usize,
    pub total_rows: usize,
    pub active_rows: usize,
    pub rounds: usize,
    pub pivots: usize,
}

struct Layout {
    n: usize,
    /// Pairs s < t with both states non-absorbing, in triangular order.
    eq_pairs: Vec<(usize, usize)>,
    /// Per pair, the sorted union of the two successor supports. Potentials
    /// and their difference constraints exist only on these states.
    support: Vec<Vec<usize>>,
    /// Prefix sums of the support sizes, for potential variable ids.
    y_offset: Vec<usize>,
    /// Prefix sums of len * (len - 1), for potential row ids.
    row_offset: Vec<usize>,
}

impl Layout {
    fn new(n: usize, eq_pairs: Vec<(usize, usize)>, support: Vec<Vec<usize>>) -> Self {
        let mut y_offset = Vec::with_capacity(support.len());
        let mut row_offset = Vec::with_capacity(support.len());
        let (mut ys, mut rows) = (0usize, 0usize);
        for u in &support {
            y_offset.push(ys);
            row_offset.push(rows);
            ys += u.len();
            rows += u.len() * (u.len() - 1);
        }
        Layout { n, eq_pairs, support, y_offset, row_offset }
    }

    fn d_var(&self, s: usize, t: usize) -> usize {
        let (s, t) = canonical(s, t);
        debug_assert!(s < t);
        t * (t - 1) / 2 + s
    }

    fn d_count(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    fn k_var(&self, p: usize) -> usize {
        self.d_count() + p
    }

    fn m_var(&self, p: usize) -> usize {
        self.d_count() + self.eq_pairs.len() + p
    }

    /// Potential variable for pair p and index i into its support.
    fn y_var(&self, p: usize, i: usize) -> usize {
        debug_assert!(i < self.support[p].len());
        self.d_count() + 2 * self.eq_pairs.len() + self.y_offset[p] + i
    }

    /// Row of y_u - y_v <= d_uv for pair p and support indices i != j.
    fn y_row(&self, p: usize, i: usize, j: usize) -> usize {
        debug_assert!(i != j);
        let len = self.support[p].len();
        let offset = i * (len - 1) + if j < i { j } else { j - 1 };
        3 * self.eq_pairs.len() + self.row_offset[p] + offset
    }
}

fn build(
    m: &Ctmc,
    pairs: &Pairs,
    lambda: Discount,
) -> (LpProblem, Layout) {
    let n = m.len();
    let l = lambda.get();
    let mut lp = LpProblem::new(Sense::Maximize);

    // Distance variables, triangular order. Pairs with forced values are
    // pinned by their bounds.
    let mut eq_pairs = Vec::new();
    for t in 0..n {
        for s in 0..t {
            let pd = pairs.get(s, t);
            let (lo, hi) = match pd.kind {
                PairKind::Mixed => (1.0, 1.0),
                PairKind::Absorbing => (pd.ell, pd.ell),
                PairKind::Active => {
                    eq_pairs.push((s, t));
                    (0.0, 1.0)
                }
            };
            lp.add_variable(0.0, lo, hi);
        }
    }
    let support: Vec<Vec<usize>> = eq_pairs
        .iter()
        .map(|&(s, t)| {
            let mut u: Vec<usize> = m
                .successors(s)
                .iter()
                .chain(m.successors(t))
                .map(|&(v, _)| v)
                .collect();
            u.sort_unstable();
            u.dedup();
            u
        })
        .collect();
    let layout = Layout::new(n, eq_pairs, support);
    let np = layout.eq_pairs.len();
    for p in 0..np {
        debug_assert_eq!(lp.num_variables(), layout.k_var(p));
        lp.add_variable(1.0, 0.0, 1.0);
    }
    for p in 0..np {
        let (s, t) = layout.eq_pairs[p];
        lp.add_variable(1.0, 0.0, pairs.get(s, t).ell);
    }
    for p in 0..np {
        for i in 0..layout.support[p].len() {
            debug_assert_eq!(lp.num_variables(), layout.y_var(p, i));
            lp.add_variable(0.0, f64::NEG_INFINITY, f64::INFINITY);
        }
    }

    // Structural rows, three per pair, then the potential rows in fixed
    // blocks so their ids are computable.
    for (p, &(s, t)) in layout.eq_pairs.iter().enumerate() {
        let pd = pairs.get(s, t);
        let scale = l * (1.0 - pd.tv);
        lp.add_row(
            RowKind::Eq,
            &[
                (layout.d_var(s, t), 1.0),
                (layout.k_var(p), -scale),
                (layout.m_var(p), 1.0),
            ],
            pd.ell + l * pd.tv,
        );
        lp.add_row(
            RowKind::Le,
            &[(layout.m_var(p), 1.0), (layout.k_var(p), -scale)],
            l * pd.tv,
        );
        let mut coeffs = vec![(layout.k_var(p), 1.0)];
        let mut delta: Vec<f64> = vec![0.0; n];
        for &(u, w) in m.successors(s) {
            delta[u] += w;
        }
        for &(u, w) in m.successors(t) {
            delta[u] -= w;
        }
        for (i, &u) in layout.support[p].iter().enumerate() {
            if delta[u] != 0.0 {
                coeffs.push((layout.y_var(p, i), -delta[u]));
            }
        }
        lp.add_row(RowKind::Eq, &coeffs, 0.0);
    }
    for p in 0..np {
        let states = &layout.support[p];
        for (i, &u) in states.iter().enumerate() {
            for (j, &v) in states.iter().enumerate() {
                if j == i {
                    continue;
                }
                debug_assert_eq!(lp.num_rows(), layout.y_row(p, i, j));
                lp.add_row(
                    RowKind::Le,
                    &[
                        (layout.y_var(p, i), 1.0),
                        (layout.y_var(p, j), -1.0),
                        (layout.d_var(u, v), -1.0),
                    ],
                    0.0,
                );
            }
        }
    }
    (lp, layout)
}

/// Computes the pseudometric by solving the whole-system program.
pub fn global_lp(
    m: &Ctmc,
    metric: &LabelMetric,
    lambda: Discount,
) -> Result<GlobalLpRun, GlobalLpError> {
    let n = m.len();
    let pairs = Pairs::build(m, metric).map_err(|e| match e {
        crate::fixpoint::FixpointError::Metrics(e) => GlobalLpError::Metrics(e),
        crate::fixpoint::FixpointError::Model(e) => GlobalLpError::Model(e),
        other => unreachable!("pair table construction: {other}"),
    })?;
    let (lp, layout) = build(m, &pairs, lambda);
    let np = layout.eq_pairs.len();
    let initial: Vec<usize> = (0..3 * np).collect();
    let mut solver = Solver::new(&lp, &initial);
    let mut rounds = 0usize;
    loop {
        let status = solver.solve();
        if status != LpStatus::Optimal {
            return Err(GlobalLpError::Lp(status));
        }
        rounds += 1;
        let mut added = 0usize;
        for p in 0..np {
            let states = &layout.support[p];
            let mut viols: Vec<(f64, usize)> = Vec::new();
            for (i, &u) in states.iter().enumerate() {
                let yu = solver.value(layout.y_var(p, i));
                for (j, &v) in states.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let row = layout.y_row(p, i, j);
                    if solver.is_active(row) {
                        continue;
                    }
                    let resid =
                        yu - solver.value(layout.y_var(p, j)) - solver.value(layout.d_var(u, v));
                    if resid > 1e-8 {
                        viols.push((resid, row));
                    }
                }
            }
            viols.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            for &(_, row) in viols.iter().take(4) {
                solver.activate_row(row);
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
    }

    let mut distances = DistanceMatrix::bottom(n);
    for t in 0..n {
        for s in 0..t {
            distances.set_pair(s, t, solver.value(layout.d_var(s, t)).clamp(0.0, 1.0));
        }
    }

    // Certify the solution against the exact one-step equations: each
    // active pair's distance must solve d = max(ell, l(tv + (1 - tv)K)),
    // with K computed by the exact transport solver under the solved d.
    let l = lambda.get();
    let mut worst = 0.0f64;
    for &(s, t) in &layout.eq_pairs {
        let pd = pairs.get(s, t);
        let k = crate::metrics::kantorovich(
            |u, v| distances.get(u, v),
            m.successors(s),
            m.successors(t),
        )?;
        let want = pd.ell.max(l * (pd.tv + (1.0 - pd.tv) * k));
        worst = worst.max((distances.get(s, t) - want).abs());
    }
    if worst > tolerances::LP_FEASIBILITY {
        return Err(GlobalLpError::Residual(worst));
    }

    Ok(GlobalLpRun {
        distances,
        objective: solver.objective(),
        variables: lp.num_variables(),
        total_rows: lp.num_rows(),
        active_rows: solver.num_active(),
        rounds,
        pivots: solver.pivots(),
    })
}
