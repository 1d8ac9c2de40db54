//! Two-phase primal simplex on bounded variables, dense storage.
//!
//! Inequality rows gain slack columns; rows that start infeasible gain
//! artificial columns. Phase 1 minimizes the artificial sum and yields a
//! Farkas certificate on failure; phase 2 optimizes the true objective and
//! yields an improving ray on unboundedness. Dantzig pricing with
//! lowest-index tie-breaking, falling back to Bland's rule after a run of
//! degenerate pivots.

use super::{
    Feasibility, Infeasibility, LinearProgram, LpError, LpOutcome, Optimum, Sense, UnboundedRay,
    FEAS_TOL, PIVOT_TOL,
};

const MAX_ITER: usize = 50_000;
const DEGENERATE_RUN_FOR_BLAND: usize = 64;
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
enum ColState {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

struct Tableau {
    m: usize,
    n_struct: usize,
    /// Column-major constraint matrix, row-scaled.
    cols: Vec<Vec<f64>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<ColState>,
    rhs: Vec<f64>,
    /// Rows of B^-1.
    binv: Vec<Vec<f64>>,
    basis: Vec<usize>,
    artificial_from: usize,
    row_scale: Vec<f64>,
    n_eq: usize,
    pivots: usize,
    degenerate_run: usize,
    bland: bool,
}

enum PhaseEnd {
    Optimal,
    Unbounded { entering: usize, direction: f64 },
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n_struct = lp.n_vars();
        let n_eq = lp.n_eq_rows();
        let n_le = lp.n_le_rows();
        let m = n_eq + n_le;

        // Dense rows, then per-row scaling by the largest coefficient.
        let mut dense = vec![vec![0.0; n_struct]; m];
        let mut rhs = vec![0.0; m];
        for (i, row) in lp.eq_rows().iter().enumerate() {
            for &(v, c) in &row.terms {
                dense[i][v] += c;
            }
            rhs[i] = row.rhs;
        }
        for (i, row) in lp.le_rows().iter().enumerate() {
            for &(v, c) in &row.terms {
                dense[n_eq + i][v] += c;
            }
            rhs[n_eq + i] = row.rhs;
        }
        let mut row_scale = vec![1.0; m];
        for i in 0..m {
            let a_max = dense[i].iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
            if a_max > 0.0 {
                row_scale[i] = 1.0 / a_max;
            }
            for c in dense[i].iter_mut() {
                *c *= row_scale[i];
            }
            rhs[i] *= row_scale[i];
        }

        let mut cols: Vec<Vec<f64>> = (0..n_struct)
            .map(|j| (0..m).map(|i| dense[i][j]).collect())
            .collect();
        let mut lower = lp.lower_slice().to_vec();
        let mut upper = lp.upper_slice().to_vec();
        let mut x = Vec::with_capacity(n_struct);
        let mut state = Vec::with_capacity(n_struct);
        for j in 0..n_struct {
            if lower[j].is_finite() {
                x.push(lower[j]);
                state.push(ColState::AtLower);
            } else if upper[j].is_finite() {
                x.push(upper[j]);
                state.push(ColState::AtUpper);
            } else {
                x.push(0.0);
                state.push(ColState::Free);
            }
        }

        // Slack columns for `<=` rows.
        for i in 0..n_le {
            let mut col = vec![0.0; m];
            col[n_eq + i] = 1.0;
            cols.push(col);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(0.0);
            state.push(ColState::AtLower);
        }

        let mut t = Tableau {
            m,
            n_struct,
            cols,
            lower,
            upper,
            x,
            state,
            rhs,
            binv: Vec::new(),
            basis: Vec::new(),
            artificial_from: usize::MAX,
            row_scale,
            n_eq,
            pivots: 0,
            degenerate_run: 0,
            bland: false,
        };
        t.install_start_basis();
        t
    }

    /// Initial basis: slack for inequality rows with nonnegative residual,
    /// a signed artificial elsewhere. B starts diagonal.
    fn install_start_basis(&mut self) {
        let m = self.m;
        let mut residual = self.rhs.clone();
        for j in 0..self.n_struct {
            if self.x[j] != 0.0 {
                for i in 0..m {
                    residual[i] -= self.cols[j][i] * self.x[j];
                }
            }
        }
        self.artificial_from = self.cols.len();
        self.basis = vec![usize::MAX; m];
        let mut binv_diag = vec![1.0; m];
        for i in 0..m {
            let slack_col = if i >= self.n_eq {
                Some(self.n_struct + (i - self.n_eq))
            } else {
                None
            };
            if let Some(s) = slack_col {
                if residual[i] >= 0.0 {
                    self.basis[i] = s;
                    self.x[s] = residual[i];
                    self.state[s] = ColState::Basic;
                    continue;
                }
            }
            let sign = if residual[i] < 0.0 { -1.0 } else { 1.0 };
            let mut col = vec![0.0; m];
            col[i] = sign;
            self.cols.push(col);
            self.lower.push(0.0);
            self.upper.push(f64::INFINITY);
            self.x.push(residual[i].abs());
            self.state.push(ColState::Basic);
            self.basis[i] = self.cols.len() - 1;
            binv_diag[i] = sign;
        }
        self.binv = (0..m)
            .map(|i| {
                let mut row = vec![0.0; m];
                row[i] = binv_diag[i];
                row
            })
            .collect();
    }

    fn n_cols(&self) -> usize {
        self.cols.len()
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.artificial_from
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            for k in 0..m {
                y[k] += cb * self.binv[r][k];
            }
        }
        y
    }

    fn tableau_column(&self, j: usize) -> Vec<f64> {
        let a = &self.cols[j];
        (0..self.m)
            .map(|r| {
                let row = &self.binv[r];
                let mut acc = 0.0;
                for k in 0..self.m {
                    acc += row[k] * a[k];
                }
                acc
            })
            .collect()
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        let mut acc = cost[j];
        let a = &self.cols[j];
        for k in 0..self.m {
            if a[k] != 0.0 {
                acc -= y[k] * a[k];
            }
        }
        acc
    }

    /// Rebuilds B^-1 from the basis columns and recomputes basic values.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        if m == 0 {
            return Ok(());
        }
        // Gauss-Jordan inversion of the basis matrix with partial pivoting.
        let mut a: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row: Vec<f64> = (0..m).map(|r| self.cols[self.basis[r]][i]).collect();
                let mut ident = vec![0.0; m];
                ident[i] = 1.0;
                row.append(&mut ident);
                row
            })
            .collect();
        for col in 0..m {
            let mut best = col;
            for r in col + 1..m {
                if a[r][col].abs() > a[best][col].abs() {
                    best = r;
                }
            }
            if a[best][col].abs() < 1e-12 {
                return Err(LpError::Numerical("singular basis on refactor".into()));
            }
            a.swap(col, best);
            let pivot = a[col][col];
            for v in a[col].iter_mut() {
                *v /= pivot;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r][col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..2 * m {
                    let delta = f * a[col][k];
                    a[r][k] -= delta;
                }
            }
        }
        // Rows of B^-1: the inverse's (row r) spans the appended block, but we
        // need binv[r][k] = (B^-1)[r][k]; after Jordan elimination row r of
        // [I | B^-1] holds it directly.
        for r in 0..m {
            for k in 0..m {
                self.binv[r][k] = a[r][m + k];
            }
        }
        self.recompute_basics();
        Ok(())
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.n_cols() {
            if self.state[j] != ColState::Basic && self.x[j] != 0.0 {
                for i in 0..m {
                    r[i] -= self.cols[j][i] * self.x[j];
                }
            }
        }
        for row in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += self.binv[row][k] * r[k];
            }
            self.x[self.basis[row]] = acc;
        }
    }

    /// Runs the simplex loop to optimality for the given costs.
    fn optimize(&mut self, cost: &[f64], allow_unbounded: bool) -> Result<PhaseEnd, LpError> {
        let dual_tol = 1e-9 * (1.0 + cost.iter().fold(0.0f64, |a, c| a.max(c.abs())));
        loop {
            if self.pivots > MAX_ITER {
                return Err(LpError::IterationLimit(self.pivots));
            }
            let y = self.duals(cost);

            // Pricing: Dantzig with lowest-index ties, or Bland.
            let mut entering = usize::MAX;
            let mut direction = 0.0;
            let mut best_score = dual_tol;
            for j in 0..self.n_cols() {
                let st = self.state[j];
                if st == ColState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = self.reduced_cost(cost, &y, j);
                let (eligible, dir) = match st {
                    ColState::AtLower => (d < -dual_tol, 1.0),
                    ColState::AtUpper => (d > dual_tol, -1.0),
                    ColState::Free => (d.abs() > dual_tol, if d > 0.0 { -1.0 } else { 1.0 }),
                    ColState::Basic => unreachable!(),
                };
                if !eligible {
                    continue;
                }
                if self.bland {
                    entering = j;
                    direction = dir;
                    break;
                }
                if d.abs() > best_score {
                    best_score = d.abs();
                    entering = j;
                    direction = dir;
                }
            }
            if entering == usize::MAX {
                return Ok(PhaseEnd::Optimal);
            }

            let t = self.tableau_column(entering);
            // Ratio test across basics, plus the entering variable's own span.
            let own_span = self.upper[entering] - self.lower[entering];
            let mut limit = if own_span.is_finite() {
                own_span
            } else {
                f64::INFINITY
            };
            let mut leaving_row = usize::MAX;
            for r in 0..self.m {
                let rate = direction * t[r];
                let b = self.basis[r];
                let ratio = if rate > PIVOT_TOL {
                    if self.lower[b].is_finite() {
                        ((self.x[b] - self.lower[b]) / rate).max(0.0)
                    } else {
                        continue;
                    }
                } else if rate < -PIVOT_TOL {
                    if self.upper[b].is_finite() {
                        ((self.upper[b] - self.x[b]) / -rate).max(0.0)
                    } else {
                        continue;
                    }
                } else {
                    continue;
                };
                if ratio < limit - 1e-12
                    || (ratio < limit + 1e-12
                        && leaving_row != usize::MAX
                        && self.basis[r] < self.basis[leaving_row])
                {
                    limit = ratio;
                    leaving_row = r;
                }
            }

            if limit.is_infinite() {
                if allow_unbounded {
                    return Ok(PhaseEnd::Unbounded {
                        entering,
                        direction,
                    });
                }
                return Err(LpError::Numerical(
                    "unexpected unbounded direction in feasibility phase".into(),
                ));
            }

            self.pivots += 1;
            if limit <= 1e-11 {
                self.degenerate_run += 1;
                if self.degenerate_run > DEGENERATE_RUN_FOR_BLAND {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }

            // Move the entering variable and adjust basics.
            let step = limit;
            if step > 0.0 {
                for r in 0..self.m {
                    if t[r] != 0.0 {
                        let b = self.basis[r];
                        self.x[b] -= direction * t[r] * step;
                    }
                }
            }
            if leaving_row == usize::MAX {
                // Bound flip: no basis change.
                self.x[entering] += direction * step;
                self.state[entering] = if direction > 0.0 {
                    ColState::AtUpper
                } else {
                    ColState::AtLower
                };
                // Snap exactly onto the bound.
                self.x[entering] = if direction > 0.0 {
                    self.upper[entering]
                } else {
                    self.lower[entering]
                };
                continue;
            }

            let leaving = self.basis[leaving_row];
            let pivot = t[leaving_row];
            if pivot.abs() < PIVOT_TOL {
                return Err(LpError::Numerical("pivot below tolerance".into()));
            }
            // Leaving variable lands exactly on the bound it hit.
            let rate = direction * pivot;
            self.state[leaving] = if rate > 0.0 {
                self.x[leaving] = self.lower[leaving];
                ColState::AtLower
            } else {
                self.x[leaving] = self.upper[leaving];
                ColState::AtUpper
            };
            self.x[entering] += direction * step;
            self.state[entering] = ColState::Basic;
            self.basis[leaving_row] = entering;

            // Eta update of B^-1.
            let pivot_row: Vec<f64> = self.binv[leaving_row].iter().map(|v| v / pivot).collect();
            for r in 0..self.m {
                if r == leaving_row {
                    continue;
                }
                let f = t[r];
                if f == 0.0 {
                    continue;
                }
                for k in 0..self.m {
                    self.binv[r][k] -= f * pivot_row[k];
                }
            }
            self.binv[leaving_row] = pivot_row;

            if self.pivots % REFACTOR_EVERY == 0 {
                self.refactor()?;
            }
        }
    }

    /// Phase-1 objective value.
    fn artificial_sum(&self) -> f64 {
        (self.artificial_from..self.n_cols())
            .map(|j| self.x[j])
            .sum()
    }

    /// After a feasible phase 1, pivot artificials out of the basis where
    /// possible and pin all of them to zero.
    fn retire_artificials(&mut self) -> Result<(), LpError> {
        for r in 0..self.m {
            let b = self.basis[r];
            if !self.is_artificial(b) {
                continue;
            }
            let mut replacement = usize::MAX;
            let mut t_r = 0.0;
            for j in 0..self.artificial_from {
                if self.state[j] == ColState::Basic {
                    continue;
                }
                let a = &self.cols[j];
                let mut acc = 0.0;
                for k in 0..self.m {
                    acc += self.binv[r][k] * a[k];
                }
                if acc.abs() > PIVOT_TOL * 10.0 {
                    replacement = j;
                    t_r = acc;
                    break;
                }
            }
            if replacement == usize::MAX {
                // Redundant row: keep the artificial basic at zero.
                self.lower[b] = 0.0;
                self.upper[b] = 0.0;
                continue;
            }
            let t = self.tableau_column(replacement);
            debug_assert!((t[r] - t_r).abs() < 1e-9);
            let leaving = self.basis[r];
            self.state[leaving] = ColState::AtLower;
            self.x[leaving] = 0.0;
            self.state[replacement] = ColState::Basic;
            self.basis[r] = replacement;
            let pivot = t[r];
            let pivot_row: Vec<f64> = self.binv[r].iter().map(|v| v / pivot).collect();
            for rr in 0..self.m {
                if rr == r {
                    continue;
                }
                let f = t[rr];
                if f == 0.0 {
                    continue;
                }
                for k in 0..self.m {
                    self.binv[rr][k] -= f * pivot_row[k];
                }
            }
            self.binv[r] = pivot_row;
            self.recompute_basics();
        }
        for j in self.artificial_from..self.n_cols() {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
            if self.state[j] != ColState::Basic {
                self.x[j] = 0.0;
                self.state[j] = ColState::AtLower;
            }
        }
        Ok(())
    }

    /// Unscaled row duals of the internal minimize problem.
    fn unscaled_duals(&self, cost: &[f64]) -> Vec<f64> {
        let y = self.duals(cost);
        (0..self.m).map(|i| y[i] * self.row_scale[i]).collect()
    }
}

fn internal_costs(lp: &LinearProgram, t: &Tableau) -> Vec<f64> {
    let flip = match lp.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut c = vec![0.0; t.n_cols()];
    for (j, &obj) in lp.objective_slice().iter().enumerate() {
        c[j] = flip * obj;
    }
    c
}

fn phase1(lp: &LinearProgram) -> Result<(Tableau, Option<Infeasibility>), LpError> {
    let mut t = Tableau::build(lp);
    let cost1: Vec<f64> = (0..t.n_cols())
        .map(|j| if t.is_artificial(j) { 1.0 } else { 0.0 })
        .collect();
    match t.optimize(&cost1, false)? {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded { .. } => {
            return Err(LpError::Numerical("phase 1 reported unbounded".into()))
        }
    }
    let b_norm = t.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if t.artificial_sum() > FEAS_TOL * (1.0 + b_norm) {
        let y = t.unscaled_duals(&cost1);
        let n_eq = lp.n_eq_rows();
        let eq_multipliers: Vec<f64> = y[..n_eq].iter().map(|v| -v).collect();
        let le_multipliers: Vec<f64> = y[n_eq..].iter().map(|v| (-v).max(0.0)).collect();
        return Ok((
            t,
            Some(Infeasibility {
                eq_multipliers,
                le_multipliers,
            }),
        ));
    }
    t.retire_artificials()?;
    t.refactor()?;
    Ok((t, None))
}

pub(super) fn check_feasible(lp: &LinearProgram) -> Result<Feasibility, LpError> {
    let (t, infeasible) = phase1(lp)?;
    match infeasible {
        Some(cert) => Ok(Feasibility::Infeasible(cert)),
        None => Ok(Feasibility::Feasible(t.x[..t.n_struct].to_vec())),
    }
}

pub(super) fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    let (mut t, infeasible) = phase1(lp)?;
    if let Some(cert) = infeasible {
        return Ok(LpOutcome::Infeasible(cert));
    }
    let cost2 = internal_costs(lp, &t);
    match t.optimize(&cost2, true)? {
        PhaseEnd::Optimal => {
            let primal = t.x[..t.n_struct].to_vec();
            let y = t.unscaled_duals(&cost2);
            let n_eq = lp.n_eq_rows();
            let sign = match lp.sense() {
                Sense::Minimize => 1.0,
                Sense::Maximize => -1.0,
            };
            let dual_eq: Vec<f64> = y[..n_eq].iter().map(|v| sign * v).collect();
            let dual_le: Vec<f64> = y[n_eq..].iter().map(|v| (-v).max(0.0)).collect();
            // Reduced costs against the unscaled original data, reported in
            // the problem's own sense.
            let mut reduced = vec![0.0; t.n_struct];
            for j in 0..t.n_struct {
                let mut acc = lp.objective_slice()[j] * if sign > 0.0 { 1.0 } else { -1.0 };
                // y is in unscaled row space already.
                for (i, row) in lp.eq_rows().iter().enumerate() {
                    for &(v, c) in &row.terms {
                        if v == j {
                            acc -= y[i] * c;
                        }
                    }
                }
                for (i, row) in lp.le_rows().iter().enumerate() {
                    for &(v, c) in &row.terms {
                        if v == j {
                            acc -= y[n_eq + i] * c;
                        }
                    }
                }
                reduced[j] = sign * acc;
            }
            let objective = lp.eval_objective(&primal);
            Ok(LpOutcome::Optimal(Optimum {
                primal,
                objective,
                dual_eq,
                dual_le,
                reduced_costs: reduced,
            }))
        }
        PhaseEnd::Unbounded {
            entering,
            direction,
        } => {
            let col = t.tableau_column(entering);
            let mut dir = vec![0.0; t.n_cols()];
            dir[entering] = direction;
            for r in 0..t.m {
                if col[r] != 0.0 {
                    dir[t.basis[r]] = -direction * col[r];
                }
            }
            Ok(LpOutcome::Unbounded(UnboundedRay {
                direction: dir[..t.n_struct].to_vec(),
            }))
        }
    }
}
