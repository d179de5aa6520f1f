//! A bounded-variable revised simplex solver.
//!
//! Built for the distance programs in this crate: coefficients are O(1),
//! problems are dense-ish and medium sized, and rows arrive incrementally.
//! Infeasibility handling uses a symbolic big-M penalty: costs are pairs
//! (M part, unit part) compared lexicographically, so no concrete huge
//! constant ever mixes with problem data.
//!
//! `Solver` keeps a dense basis inverse. Activating a row extends the
//! inverse in place and warm-starts from the incumbent solution, which is
//! what makes row generation on the larger programs affordable.

use std::collections::HashMap;

use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
struct Column {
    cost: f64,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Clone)]
struct Row {
    kind: RowKind, // Le or Eq after normalization
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
}

/// A linear program: variables with box bounds (infinities allowed), then
/// sparse rows. Ge rows are stored negated as Le.
#[derive(Debug, Clone)]
pub struct LpProblem {
    sense: Sense,
    cols: Vec<Column>,
    rows: Vec<Row>,
}

impl LpProblem {
    pub fn new(sense: Sense) -> Self {
        LpProblem { sense, cols: Vec::new(), rows: Vec::new() }
    }

    pub fn add_variable(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        assert!(cost.is_finite(), "variable cost must be finite");
        assert!(!lower.is_nan() && !upper.is_nan() && lower <= upper, "bad bounds");
        self.cols.push(Column { cost, lower, upper });
        self.cols.len() - 1
    }

    pub fn add_row(&mut self, kind: RowKind, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        assert!(rhs.is_finite(), "row rhs must be finite");
        let mut merged: HashMap<usize, f64> = HashMap::new();
        for &(v, a) in coeffs {
            assert!(v < self.cols.len(), "row references unknown variable {v}");
            assert!(a.is_finite(), "row coefficient must be finite");
            *merged.entry(v).or_insert(0.0) += a;
        }
        let mut coeffs: Vec<(usize, f64)> =
            merged.into_iter().filter(|&(_, a)| a != 0.0).collect();
        coeffs.sort_unstable_by_key(|&(v, _)| v);
        let (kind, coeffs, rhs) = match kind {
            RowKind::Ge => {
                (RowKind::Le, coeffs.iter().map(|&(v, a)| (v, -a)).collect(), -rhs)
            }
            k => (k, coeffs, rhs),
        };
        self.rows.push(Row { kind, coeffs, rhs });
        self.rows.len() - 1
    }

    pub fn num_variables(&self) -> usize {
        self.cols.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    FreeZero,
    /// An artificial that has left the basis. It never prices again.
    Dead,
}

#[derive(Debug, Clone, Copy)]
enum ColKind {
    Structural,
    Aux { pos: usize, sigma: f64 },
}

#[derive(Debug, Clone)]
struct VarMeta {
    lower: f64,
    upper: f64,
    cost_m: f64,
    cost_u: f64,
    col: ColKind,
}

/// Result of a one-shot solve.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
}

/// Solves a problem with every row active.
pub fn solve_lp(p: &LpProblem) -> LpSolution {
    let rows: Vec<usize> = (0..p.num_rows()).collect();
    let mut solver = Solver::new(p, &rows);
    let status = solver.solve();
    LpSolution { status, values: solver.values(), objective: solver.objective() }
}

/// Incremental simplex over a fixed problem: rows are activated one at a
/// time and each `solve` resumes from the previous basis.
pub struct Solver<'a> {
    p: &'a LpProblem,
    vars: Vec<VarMeta>,
    state: Vec<VarState>,
    active: Vec<usize>,
    row_pos: Vec<Option<usize>>,
    /// Structural columns: per variable, (row id, coefficient).
    col_index: Vec<Vec<(usize, f64)>>,
    basis: Vec<usize>,
    x_b: Vec<f64>,
    binv: Vec<f64>,
    pivots: usize,
    since_refresh: usize,
}

impl<'a> Solver<'a> {
    pub fn new(p: &'a LpProblem, rows: &[usize]) -> Self {
        let mut col_index: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.cols.len()];
        for (r, row) in p.rows.iter().enumerate() {
            for &(v, a) in &row.coeffs {
                col_index[v].push((r, a));
            }
        }
        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let vars: Vec<VarMeta> = p
            .cols
            .iter()
            .map(|c| VarMeta {
                lower: c.lower,
                upper: c.upper,
                cost_m: 0.0,
                cost_u: sign * c.cost,
                col: ColKind::Structural,
            })
            .collect();
        let state: Vec<VarState> = p
            .cols
            .iter()
            .map(|c| {
                if c.lower.is_finite() {
                    VarState::AtLower
                } else if c.upper.is_finite() {
                    VarState::AtUpper
                } else {
                    VarState::FreeZero
                }
            })
            .collect();
        let mut s = Solver {
            p,
            vars,
            state,
            active: Vec::new(),
            row_pos: vec![None; p.rows.len()],
            col_index,
            basis: Vec::new(),
            x_b: Vec::new(),
            binv: Vec::new(),
            pivots: 0,
            since_refresh: 0,
        };
        for &r in rows {
            s.activate_row(r);
        }
        s
    }

    pub fn is_active(&self, row: usize) -> bool {
        self.row_pos[row].is_some()
    }

    pub fn num_active(&self) -> usize {
        self.active.len()
    }

    pub fn pivots(&self) -> usize {
        self.pivots
    }

    fn val(&self, v: usize) -> f64 {
        match self.state[v] {
            VarState::Basic(i) => self.x_b[i],
            VarState::AtLower => self.vars[v].lower,
            VarState::AtUpper => self.vars[v].upper,
            VarState::FreeZero | VarState::Dead => 0.0,
        }
    }

    pub fn value(&self, var: usize) -> f64 {
        assert!(var < self.p.cols.len());
        self.val(var)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.p.cols.len()).map(|v| self.val(v)).collect()
    }

    /// Objective in the problem's own sense.
    pub fn objective(&self) -> f64 {
        (0..self.p.cols.len()).map(|v| self.p.cols[v].cost * self.val(v)).sum()
    }

    fn push_var(&mut self, meta: VarMeta, state: VarState) -> usize {
        self.vars.push(meta);
        self.state.push(state);
        self.vars.len() - 1
    }

    /// Brings a row into the problem. The incumbent solution is kept and
    /// the new row is balanced by its own slack or artificial, so the next
    /// `solve` warm-starts from a basis that is feasible up to artificials.
    pub fn activate_row(&mut self, row: usize) {
        assert!(self.row_pos[row].is_none(), "row {row} already active");
        let m = self.active.len();
        let (rhs, kind) = (self.p.rows[row].rhs, self.p.rows[row].kind);
        let mut rho = rhs;
        let mut a_b = vec![0.0; m];
        for &(v, a) in &self.p.rows[row].coeffs {
            rho -= a * self.val(v);
            if let VarState::Basic(i) = self.state[v] {
                a_b[i] += a;
            }
        }
        let (basic_var, sigma, basic_val) = match kind {
            RowKind::Le => {
                let slack = self.push_var(
                    VarMeta {
                        lower: 0.0,
                        upper: f64::INFINITY,
                        cost_m: 0.0,
                        cost_u: 0.0,
                        col: ColKind::Aux { pos: m, sigma: 1.0 },
                    },
                    VarState::AtLower,
                );
                if rho >= 0.0 {
                    (slack, 1.0, rho)
                } else {
                    let art = self.push_var(
                        VarMeta {
                            lower: 0.0,
                            upper: f64::INFINITY,
                            cost_m: 1.0,
                            cost_u: 0.0,
                            col: ColKind::Aux { pos: m, sigma: -1.0 },
                        },
                        VarState::AtLower,
                    );
                    (art, -1.0, -rho)
                }
            }
            RowKind::Eq => {
                let sigma = if rho >= 0.0 { 1.0 } else { -1.0 };
                let art = self.push_var(
                    VarMeta {
                        lower: 0.0,
                        upper: f64::INFINITY,
                        cost_m: 1.0,
                        cost_u: 0.0,
                        col: ColKind::Aux { pos: m, sigma },
                    },
                    VarState::AtLower,
                );
                (art, sigma, rho.abs())
            }
            RowKind::Ge => unreachable!("Ge rows are normalized on entry"),
        };

        // Extend the basis inverse:
        // [[B, 0], [a_B, sigma]]^{-1} = [[B^{-1}, 0], [-a_B B^{-1}/sigma, 1/sigma]]
        let mut bottom = vec![0.0; m + 1];
        for p_ in 0..m {
            let mut acc = 0.0;
            for i in 0..m {
                acc += a_b[i] * self.binv[i * m + p_];
            }
            bottom[p_] = -acc / sigma;
        }
        bottom[m] = 1.0 / sigma;
        let mut next = vec![0.0; (m + 1) * (m + 1)];
        for i in 0..m {
            next[i * (m + 1)..i * (m + 1) + m].copy_from_slice(&self.binv[i * m..(i + 1) * m]);
        }
        next[m * (m + 1)..].copy_from_slice(&bottom);
        self.binv = next;

        self.state[basic_var] = VarState::Basic(m);
        self.basis.push(basic_var);
        self.x_b.push(basic_val);
        self.active.push(row);
        self.row_pos[row] = Some(m);
    }

    fn duals(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.active.len();
        let mut y_m = vec![0.0; m];
        let mut y_u = vec![0.0; m];
        for i in 0..m {
            let v = self.basis[i];
            let (cm, cu) = (self.vars[v].cost_m, self.vars[v].cost_u);
            if cm == 0.0 && cu == 0.0 {
                continue;
            }
            for p_ in 0..m {
                let b = self.binv[i * m + p_];
                y_m[p_] += cm * b;
                y_u[p_] += cu * b;
            }
        }
        (y_m, y_u)
    }

    fn reduced_costs(&self, y_m: &[f64], y_u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut rc_m: Vec<f64> = self.vars.iter().map(|v| v.cost_m).collect();
        let mut rc_u: Vec<f64> = self.vars.iter().map(|v| v.cost_u).collect();
        for (p_, &row) in self.active.iter().enumerate() {
            if y_m[p_] == 0.0 && y_u[p_] == 0.0 {
                continue;
            }
            for &(v, a) in &self.p.rows[row].coeffs {
                rc_m[v] -= y_m[p_] * a;
                rc_u[v] -= y_u[p_] * a;
            }
        }
        for (v, meta) in self.vars.iter().enumerate() {
            if let ColKind::Aux { pos, sigma } = meta.col {
                rc_m[v] -= y_m[pos] * sigma;
                rc_u[v] -= y_u[pos] * sigma;
            }
        }
        (rc_m, rc_u)
    }

    /// B^{-1} times the column of variable `j` over active rows.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.active.len();
        let mut d = vec![0.0; m];
        match self.vars[j].col {
            ColKind::Structural => {
                for &(row, a) in &self.col_index[j] {
                    if let Some(p_) = self.row_pos[row] {
                        for i in 0..m {
                            d[i] += self.binv[i * m + p_] * a;
                        }
                    }
                }
            }
            ColKind::Aux { pos, sigma } => {
                for i in 0..m {
                    d[i] = self.binv[i * m + pos] * sigma;
                }
            }
        }
        d
    }

    /// Recomputes basic values from the basis inverse; falls back to a full
    /// refactorization when the incremental inverse has drifted, and to a
    /// basis restart when the refactorization finds the basis singular.
    /// Returns false when the basis or inverse was rebuilt, meaning any
    /// pricing done before the call is stale.
    fn refresh(&mut self) -> bool {
        self.since_refresh = 0;
        let fresh = self.basic_values();
        let drift = self
            .x_b
            .iter()
            .zip(&fresh)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if drift <= 1e-6 {
            self.x_b = fresh;
            return true;
        }
        if self.refactor() {
            self.x_b = self.basic_values();
        } else {
            self.restart_basis();
        }
        false
    }

    fn basic_values(&self) -> Vec<f64> {
        let m = self.active.len();
        let mut b_eff = vec![0.0; m];
        for (p_, &row) in self.active.iter().enumerate() {
            let mut rhs = self.p.rows[row].rhs;
            for &(v, a) in &self.p.rows[row].coeffs {
                if !matches!(self.state[v], VarState::Basic(_)) {
                    rhs -= a * self.val(v);
                }
            }
            b_eff[p_] = rhs;
        }
        let mut x = vec![0.0; m];
        for i in 0..m {
            let mut acc = 0.0;
            for p_ in 0..m {
                acc += self.binv[i * m + p_] * b_eff[p_];
            }
            x[i] = acc;
        }
        x
    }

    /// Rebuilds the basis inverse from scratch. Returns false if the basis
    /// matrix turns out singular, which can happen when an accumulated
    /// inverse error let a dependent column pivot in; the inverse is then
    /// left untouched and the caller must restart the basis.
    fn refactor(&mut self) -> bool {
        let m = self.active.len();
        // Basis matrix column i = column of basis[i] over active rows.
        let mut mat = vec![0.0; m * m];
        for (i, &v) in self.basis.iter().enumerate() {
            match self.vars[v].col {
                ColKind::Structural => {
                    for &(row, a) in &self.col_index[v] {
                        if let Some(p_) = self.row_pos[row] {
                            mat[p_ * m + i] += a;
                        }
                    }
                }
                ColKind::Aux { pos, sigma } => mat[pos * m + i] += sigma,
            }
        }
        // Gauss-Jordan inversion with partial pivoting.
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            for r in col + 1..m {
                if mat[r * m + col].abs() > mat[piv * m + col].abs() {
                    piv = r;
                }
            }
            if mat[piv * m + col].abs() <= 1e-12 {
                return false;
            }
            if piv != col {
                for k in 0..m {
                    mat.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let p_ = mat[col * m + col];
            for k in 0..m {
                mat[col * m + k] /= p_;
                inv[col * m + k] /= p_;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = mat[r * m + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    mat[r * m + k] -= f * mat[col * m + k];
                    inv[r * m + k] -= f * inv[col * m + k];
                }
            }
        }
        self.binv = inv;
        true
    }

    /// Abandons the current basis: every structural variable and slack goes
    /// back to a bound, artificials are retired, and each active row gets a
    /// fresh basic column (its slack when that fits, a new artificial
    /// otherwise), exactly as if the rows had just been activated. The
    /// result is primal feasible up to artificials and trivially invertible,
    /// so the next `solve` proceeds as a cold start.
    fn restart_basis(&mut self) {
        let m = self.active.len();
        for v in 0..self.vars.len() {
            if matches!(self.state[v], VarState::Dead) {
                continue;
            }
            self.state[v] = if self.vars[v].cost_m > 0.0 {
                VarState::Dead
            } else if self.vars[v].lower.is_finite() {
                VarState::AtLower
            } else if self.vars[v].upper.is_finite() {
                VarState::AtUpper
            } else {
                VarState::FreeZero
            };
        }
        let mut slack_at: Vec<Option<usize>> = vec![None; m];
        for (v, meta) in self.vars.iter().enumerate() {
            if let ColKind::Aux { pos, sigma } = meta.col {
                if meta.cost_m == 0.0 && sigma == 1.0 {
                    slack_at[pos] = Some(v);
                }
            }
        }
        self.basis.clear();
        self.x_b.clear();
        self.binv = vec![0.0; m * m];
        for p_ in 0..m {
            let row = self.active[p_];
            let mut rho = self.p.rows[row].rhs;
            for &(v, a) in &self.p.rows[row].coeffs {
                rho -= a * self.val(v);
            }
            let (bv, sigma, val) = if self.p.rows[row].kind == RowKind::Le && rho >= 0.0 {
                (slack_at[p_].expect("Le rows carry a slack"), 1.0, rho)
            } else {
                let sigma = if rho >= 0.0 { 1.0 } else { -1.0 };
                let art = self.push_var(
                    VarMeta {
                        lower: 0.0,
                        upper: f64::INFINITY,
                        cost_m: 1.0,
                        cost_u: 0.0,
                        col: ColKind::Aux { pos: p_, sigma },
                    },
                    VarState::AtLower,
                );
                (art, sigma, rho.abs())
            };
            self.state[bv] = VarState::Basic(p_);
            self.basis.push(bv);
            self.x_b.push(val);
            self.binv[p_ * m + p_] = 1.0 / sigma;
        }
    }

    /// Runs primal simplex to completion from the current basis.
    pub fn solve(&mut self) -> LpStatus {
        const RC: f64 = tolerances::LP_REDUCED_COST;
        let mut bland = false;
        let mut stall = 0usize;
        let cap = 50_000 + 200 * self.active.len();
        let mut steps = 0usize;
        loop {
            steps += 1;
            assert!(steps <= cap, "simplex exceeded its pivot budget");
            if self.since_refresh >= 256 {
                self.refresh();
            }
            let (y_m, y_u) = self.duals();
            let (rc_m, rc_u) = self.reduced_costs(&y_m, &y_u);

            let mut enter: Option<(usize, f64)> = None;
            let mut best = (0.0f64, 0.0f64);
            for v in 0..self.vars.len() {
                let neg = rc_m[v] < -RC || (rc_m[v].abs() <= RC && rc_u[v] < -RC);
                let pos = rc_m[v] > RC || (rc_m[v].abs() <= RC && rc_u[v] > RC);
                let dir = match self.state[v] {
                    VarState::AtLower if neg => 1.0,
                    VarState::AtUpper if pos => -1.0,
                    VarState::FreeZero if neg => 1.0,
                    VarState::FreeZero if pos => -1.0,
                    _ => continue,
                };
                if bland {
                    enter = Some((v, dir));
                    break;
                }
                let score = (rc_m[v].abs(), rc_u[v].abs());
                let better = match enter {
                    None => true,
                    Some(_) => {
                        score.0 > best.0 + RC
                            || ((score.0 - best.0).abs() <= RC && score.1 > best.1)
                    }
                };
                if better {
                    enter = Some((v, dir));
                    best = score;
                }
            }

            let Some((j, dir)) = enter else {
                if !self.refresh() {
                    // The inverse or basis was rebuilt, so the pricing that
                    // found no candidate is stale. Price again before
                    // concluding anything.
                    continue;
                }
                let infeasible = self.basis.iter().enumerate().any(|(i, &v)| {
                    self.vars[v].cost_m > 0.0 && self.x_b[i] > tolerances::LP_FEASIBILITY
                });
                return if infeasible { LpStatus::Infeasible } else { LpStatus::Optimal };
            };

            let d = self.ftran(j);
            let flip = if matches!(self.state[j], VarState::FreeZero) {
                f64::INFINITY
            } else {
                self.vars[j].upper - self.vars[j].lower
            };
            let mut theta = flip;
            for i in 0..self.basis.len() {
                let step = dir * d[i];
                if step.abs() <= tolerances::LP_PIVOT {
                    continue;
                }
                let bv = self.basis[i];
                let t = if step > 0.0 {
                    if !self.vars[bv].lower.is_finite() {
                        continue;
                    }
                    (self.x_b[i] - self.vars[bv].lower) / step
                } else {
                    if !self.vars[bv].upper.is_finite() {
                        continue;
                    }
                    (self.x_b[i] - self.vars[bv].upper) / step
                };
                theta = theta.min(t.max(0.0));
            }
            if theta.is_infinite() {
                return LpStatus::Unbounded;
            }

            if theta <= 1e-12 {
                stall += 1;
                if stall >= 30 {
                    bland = true;
                }
            } else {
                stall = 0;
            }

            if flip <= theta + 1e-12 && flip.is_finite() {
                // Bound flip: the entering variable crosses to its other
                // bound without any basis change.
                for i in 0..self.basis.len() {
                    self.x_b[i] -= flip * dir * d[i];
                }
                self.state[j] = match self.state[j] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    s => s,
                };
                continue;
            }

            // Leaving choice among ratio ties: Bland wants the smallest
            // variable id, otherwise take the largest pivot element.
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..self.basis.len() {
                let step = dir * d[i];
                if step.abs() <= tolerances::LP_PIVOT {
                    continue;
                }
                let bv = self.basis[i];
                let (t, to_upper) = if step > 0.0 {
                    if !self.vars[bv].lower.is_finite() {
                        continue;
                    }
                    (((self.x_b[i] - self.vars[bv].lower) / step).max(0.0), false)
                } else {
                    if !self.vars[bv].upper.is_finite() {
                        continue;
                    }
                    (((self.x_b[i] - self.vars[bv].upper) / step).max(0.0), true)
                };
                if t > theta + 1e-12 {
                    continue;
                }
                let replace = match leave {
                    None => true,
                    Some((cur, _)) => {
                        if bland {
                            self.basis[i] < self.basis[cur]
                        } else {
                            d[i].abs() > d[cur].abs()
                        }
                    }
                };
                if replace {
                    leave = Some((i, to_upper));
                }
            }
            let (r, to_upper) = leave.expect("bounded step must name a leaving variable");

            let enter_val = match self.state[j] {
                VarState::AtLower => self.vars[j].lower + theta,
                VarState::AtUpper => self.vars[j].upper - theta,
                VarState::FreeZero => dir * theta,
                _ => unreachable!("entering variable is nonbasic"),
            };
            for i in 0..self.basis.len() {
                if i != r {
                    self.x_b[i] -= theta * dir * d[i];
                }
            }
            let leaving = self.basis[r];
            self.state[leaving] = if self.vars[leaving].cost_m > 0.0 {
                VarState::Dead
            } else if to_upper {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
            self.basis[r] = j;
            self.state[j] = VarState::Basic(r);
            self.x_b[r] = enter_val;

            let m = self.active.len();
            let pivot = d[r];
            for i in 0..m {
                if i == r {
                    continue;
                }
                let f = d[i] / pivot;
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
            }
            for k in 0..m {
                self.binv[r * m + k] /= pivot;
            }
            self.pivots += 1;
            self.since_refresh += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SplitMix64;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b}");
    }

    #[test]
    fn covers_a_greater_equal_row() {
        let mut p = LpProblem::new(Sense::Minimize);
        let x = p.add_variable(1.0, 0.0, 1.0);
        let y = p.add_variable(1.0, 0.0, 1.0);
        p.add_row(RowKind::Ge, &[(x, 1.0), (y, 1.0)], 1.0);
        let sol = solve_lp(&p);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, 1.0, 1e-9);
        assert_close(sol.values[x] + sol.values[y], 1.0, 1e-9);
    }

    #[test]
    fn maximizes_over_an_equality() {
        let mut p = LpProblem::new(Sense::Maximize);
        let x = p.add_variable(3.0, 0.0, 1.0);
        let y = p.add_variable(2.0, 0.0, 1.0);
        p.add_row(RowKind::Eq, &[(x, 1.0), (y, 1.0)], 1.0);
        let sol = solve_lp(&p);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, 3.0, 1e-9);
        assert_close(sol.values[x], 1.0, 1e-9);
        assert_close(sol.values[y], 0.0, 1e-9);
    }

    #[test]
    fn survives_beale_degeneracy() {
        let mut p = LpProblem::new(Sense::Minimize);
        let x4 = p.add_variable(-0.75, 0.0, f64::INFINITY);
        let x5 = p.add_variable(150.0, 0.0, f64::INFINITY);
        let x6 = p.add_variable(-0.02, 0.0, f64::INFINITY);
        let x7 = p.add_variable(6.0, 0.0, f64::INFINITY);
        p.add_row(RowKind::Le, &[(x4, 0.25), (x5, -60.0), (x6, -1.0 / 25.0), (x7, 9.0)], 0.0);
        p.add_row(RowKind::Le, &[(x4, 0.5), (x5, -90.0), (x6, -1.0 / 50.0), (x7, 3.0)], 0.0);
        p.add_row(RowKind::Le, &[(x6, 1.0)], 1.0);
        let sol = solve_lp(&p);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, -0.05, 1e-9);
    }

    #[test]
    fn reports_infeasibility() {
        let mut p = LpProblem::new(Sense::Minimize);
        let x = p.add_variable(1.0, 0.0, 1.0);
        let y = p.add_variable(1.0, 0.0, 1.0);
        p.add_row(RowKind::Eq, &[(x, 1.0), (y, 1.0)], 3.0);
        assert_eq!(solve_lp(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn reports_unboundedness() {
        let mut p = LpProblem::new(Sense::Minimize);
        p.add_variable(-1.0, 0.0, f64::INFINITY);
        assert_eq!(solve_lp(&p).status, LpStatus::Unbounded);
    }

    #[test]
    fn lets_free_variables_go_negative() {
        let mut p = LpProblem::new(Sense::Minimize);
        let x = p.add_variable(1.0, f64::NEG_INFINITY, f64::INFINITY);
        p.add_row(RowKind::Ge, &[(x, 1.0)], -5.0);
        let sol = solve_lp(&p);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, -5.0, 1e-9);
    }

    #[test]
    fn flips_bounds_without_pivoting() {
        let mut p = LpProblem::new(Sense::Maximize);
        let x = p.add_variable(1.0, 0.0, 1.0);
        let y = p.add_variable(1.0, 0.0, 2.0);
        p.add_row(RowKind::Le, &[(x, 1.0), (y, 1.0)], 10.0);
        let sol = solve_lp(&p);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, 3.0, 1e-9);
    }

    #[test]
    fn restarting_the_basis_reaches_the_same_optimum() {
        let mut rng = SplitMix64::new(0xD1CE);
        for _ in 0..80 {
            let nv = 2 + rng.below(3);
            let nr = 1 + rng.below(4);
            let mut p = LpProblem::new(if rng.below(2) == 0 {
                Sense::Minimize
            } else {
                Sense::Maximize
            });
            for _ in 0..nv {
                let c = (rng.below(9) as f64 - 4.0) / 2.0;
                p.add_variable(c, 0.0, 1.0);
            }
            for _ in 0..nr {
                let coeffs: Vec<(usize, f64)> = (0..nv)
                    .map(|v| (v, (rng.below(7) as f64 - 3.0) / 2.0))
                    .filter(|&(_, a)| a != 0.0)
                    .collect();
                let rhs = (rng.below(9) as f64 - 2.0) / 2.0;
                let kind = match rng.below(3) {
                    0 => RowKind::Le,
                    1 => RowKind::Ge,
                    _ => RowKind::Eq,
                };
                p.add_row(kind, &coeffs, rhs);
            }
            let rows: Vec<usize> = (0..p.num_rows()).collect();
            let mut solver = Solver::new(&p, &rows);
            let first = solver.solve();
            let first_obj = solver.objective();
            // Throwing the optimal basis away and restarting must land on
            // the same verdict and value.
            solver.restart_basis();
            let second = solver.solve();
            assert_eq!(first, second);
            if first == LpStatus::Optimal {
                assert_close(solver.objective(), first_obj, 1e-7);
            }
        }
    }

    #[test]
    fn activating_rows_later_matches_a_one_shot_solve() {
        let mut rng = SplitMix64::new(0x51A7);
        for _ in 0..120 {
            let nv = 2 + rng.below(3);
            let nr = 1 + rng.below(4);
            let mut p = LpProblem::new(if rng.below(2) == 0 {
                Sense::Minimize
            } else {
                Sense::Maximize
            });
            for _ in 0..nv {
                let c = (rng.below(9) as f64 - 4.0) / 2.0;
                p.add_variable(c, 0.0, 1.0);
            }
            for _ in 0..nr {
                let coeffs: Vec<(usize, f64)> = (0..nv)
                    .map(|v| (v, (rng.below(7) as f64 - 3.0) / 2.0))
                    .filter(|&(_, a)| a != 0.0)
                    .collect();
                let rhs = (rng.below(9) as f64 - 2.0) / 2.0;
                let kind = match rng.below(3) {
                    0 => RowKind::Le,
                    1 => RowKind::Ge,
                    _ => RowKind::Eq,
                };
                p.add_row(kind, &coeffs, rhs);
            }
            let full = solve_lp(&p);

            let split = p.num_rows() / 2;
            let head: Vec<usize> = (0..split).collect();
            let mut inc = Solver::new(&p, &head);
            inc.solve();
            for r in split..p.num_rows() {
                inc.activate_row(r);
            }
            let status = inc.solve();
            assert_eq!(status, full.status);
            if status == LpStatus::Optimal {
                assert_close(inc.objective(), full.objective, 1e-7);
            }
        }
    }

    // Oracle: over a box with all-finite bounds, every optimum sits on a
    // vertex defined by nv tight constraints drawn from rows and bounds.
    fn brute_force(p: &LpProblem) -> Option<f64> {
        let nv = p.num_variables();
        #[derive(Clone)]
        struct Tight {
            coeffs: Vec<f64>,
            rhs: f64,
        }
        let mut tights: Vec<Tight> = Vec::new();
        for row in &p.rows {
            let mut c = vec![0.0; nv];
            for &(v, a) in &row.coeffs {
                c[v] += a;
            }
            tights.push(Tight { coeffs: c, rhs: row.rhs });
        }
        for v in 0..nv {
            let mut lo = vec![0.0; nv];
            lo[v] = 1.0;
            tights.push(Tight { coeffs: lo.clone(), rhs: p.cols[v].lower });
            tights.push(Tight { coeffs: lo, rhs: p.cols[v].upper });
        }
        let mut best: Option<f64> = None;
        let mut idx = vec![0usize; nv];
        let count = tights.len();
        fn rec(
            depth: usize,
            start: usize,
            nv: usize,
            count: usize,
            idx: &mut Vec<usize>,
            tights: &[Tight],
            p: &LpProblem,
            best: &mut Option<f64>,
        ) {
            if depth == nv {
                // Solve the tight system by Gaussian elimination.
                let mut a: Vec<f64> = Vec::with_capacity(nv * (nv + 1));
                for &t in idx.iter() {
                    a.extend_from_slice(&tights[t].coeffs);
                    a.push(tights[t].rhs);
                }
                let w = nv + 1;
                for col in 0..nv {
                    let mut piv = col;
                    for r in col + 1..nv {
                        if a[r * w + col].abs() > a[piv * w + col].abs() {
                            piv = r;
                        }
                    }
                    if a[piv * w + col].abs() < 1e-9 {
                        return; // singular choice of tights
                    }
                    for k in 0..w {
                        a.swap(piv * w + k, col * w + k);
                    }
                    let pv = a[col * w + col];
                    for k in 0..w {
                        a[col * w + k] /= pv;
                    }
                    for r in 0..nv {
                        if r != col {
                            let f = a[r * w + col];
                            for k in 0..w {
                                a[r * w + k] -= f * a[col * w + k];
                            }
                        }
                    }
                }
                let x: Vec<f64> = (0..nv).map(|r| a[r * w + nv]).collect();
                for (v, xv) in x.iter().enumerate() {
                    if *xv < p.cols[v].lower - 1e-7 || *xv > p.cols[v].upper + 1e-7 {
                        return;
                    }
                }
                for row in &p.rows {
                    let lhs: f64 = row.coeffs.iter().map(|&(v, c)| c * x[v]).sum();
                    match row.kind {
                        RowKind::Le if lhs > row.rhs + 1e-7 => return,
                        RowKind::Eq if (lhs - row.rhs).abs() > 1e-7 => return,
                        _ => {}
                    }
                }
                let obj: f64 = (0..nv).map(|v| p.cols[v].cost * x[v]).sum();
                *best = Some(match (*best, p.sense) {
                    (None, _) => obj,
                    (Some(b), Sense::Minimize) => b.min(obj),
                    (Some(b), Sense::Maximize) => b.max(obj),
                });
                return;
            }
            for t in start..count {
                idx[depth] = t;
                rec(depth + 1, t + 1, nv, count, idx, tights, p, best);
            }
        }
        rec(0, 0, nv, count, &mut idx, &tights, p, &mut best);
        best
    }

    #[test]
    fn matches_vertex_enumeration_on_random_boxed_programs() {
        let mut rng = SplitMix64::new(0xBEEF);
        for trial in 0..150 {
            let nv = 2 + rng.below(2);
            let nr = 1 + rng.below(3);
            let mut p = LpProblem::new(if rng.below(2) == 0 {
                Sense::Minimize
            } else {
                Sense::Maximize
            });
            for _ in 0..nv {
                let c = (rng.below(9) as f64 - 4.0) / 2.0;
                p.add_variable(c, 0.0, 1.0);
            }
            for _ in 0..nr {
                let coeffs: Vec<(usize, f64)> = (0..nv)
                    .map(|v| (v, (rng.below(7) as f64 - 3.0) / 2.0))
                    .filter(|&(_, a)| a != 0.0)
                    .collect();
                let rhs = (rng.below(7) as f64 - 1.0) / 2.0;
                let kind = match rng.below(3) {
                    0 => RowKind::Le,
                    1 => RowKind::Ge,
                    _ => RowKind::Eq,
                };
                p.add_row(kind, &coeffs, rhs);
            }
            let sol = solve_lp(&p);
            let oracle = brute_force(&p);
            match sol.status {
                LpStatus::Optimal => {
                    let want = oracle.expect("oracle must find a vertex when optimal");
                    assert!(
                        (sol.objective - want).abs() < 1e-7,
                        "trial {trial}: {} vs {want}",
                        sol.objective
                    );
                }
                LpStatus::Infeasible => {
                    assert!(oracle.is_none(), "trial {trial}: oracle found a feasible vertex");
                }
                LpStatus::Unbounded => panic!("boxed programs cannot be unbounded"),
            }
        }
    }
}
