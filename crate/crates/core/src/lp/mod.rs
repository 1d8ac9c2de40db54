//! Dense linear-programming layer with exact status classification.
//!
//! Solves min/max of a linear objective over equality rows, `<=` rows and
//! variable bounds. Every outcome is certified: optimal solutions carry row
//! duals and reduced costs, infeasible outcomes carry a Farkas-style
//! multiplier vector, unbounded outcomes carry an improving feasible ray.

mod simplex;

use thiserror::Error;

/// Pivot magnitude below which a tableau entry is treated as zero.
pub const PIVOT_TOL: f64 = 1e-9;
/// Absolute feasibility tolerance for row residuals.
pub const FEAS_TOL: f64 = 1e-8;
/// Relative tolerance on the primal/dual objective gap.
pub const DUALITY_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Handle to a declared variable, valid only for the program that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(pub usize);

#[derive(Debug, Clone)]
pub(crate) struct SparseRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    sense: Sense,
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Vec<f64>,
    eq_rows: Vec<SparseRow>,
    le_rows: Vec<SparseRow>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("iteration limit exceeded ({0} pivots)")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            names: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            objective: Vec::new(),
            eq_rows: Vec::new(),
            le_rows: Vec::new(),
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Declares a variable with bounds (`-inf`/`+inf` allowed) and its
    /// objective coefficient. Returns the handle used in row terms.
    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        objective: f64,
    ) -> VarId {
        self.names.push(name.into());
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.push(objective);
        VarId(self.names.len() - 1)
    }

    /// Adds `sum(coeff * var) == rhs`. Duplicate variable terms accumulate.
    pub fn add_eq(&mut self, terms: &[(VarId, f64)], rhs: f64) -> usize {
        self.eq_rows.push(SparseRow {
            terms: terms.iter().map(|&(v, c)| (v.0, c)).collect(),
            rhs,
        });
        self.eq_rows.len() - 1
    }

    /// Adds `sum(coeff * var) <= rhs`.
    pub fn add_le(&mut self, terms: &[(VarId, f64)], rhs: f64) -> usize {
        self.le_rows.push(SparseRow {
            terms: terms.iter().map(|&(v, c)| (v.0, c)).collect(),
            rhs,
        });
        self.le_rows.len() - 1
    }

    /// Adds `sum(coeff * var) >= rhs`, stored as the negated `<=` row.
    pub fn add_ge(&mut self, terms: &[(VarId, f64)], rhs: f64) -> usize {
        self.le_rows.push(SparseRow {
            terms: terms.iter().map(|&(v, c)| (v.0, -c)).collect(),
            rhs: -rhs,
        });
        self.le_rows.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn n_eq_rows(&self) -> usize {
        self.eq_rows.len()
    }

    pub fn n_le_rows(&self) -> usize {
        self.le_rows.len()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.names[v.0]
    }

    pub fn bounds(&self, v: VarId) -> (f64, f64) {
        (self.lower[v.0], self.upper[v.0])
    }

    pub(crate) fn eq_rows(&self) -> &[SparseRow] {
        &self.eq_rows
    }

    pub(crate) fn le_rows(&self) -> &[SparseRow] {
        &self.le_rows
    }

    pub(crate) fn lower_slice(&self) -> &[f64] {
        &self.lower
    }

    pub(crate) fn upper_slice(&self) -> &[f64] {
        &self.upper
    }

    pub(crate) fn objective_slice(&self) -> &[f64] {
        &self.objective
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() {
                return Err(LpError::Malformed(format!("variable {j} has NaN bound")));
            }
            if l > u {
                return Err(LpError::Malformed(format!(
                    "variable {j} has lower bound {l} above upper bound {u}"
                )));
            }
            if !self.objective[j].is_finite() {
                return Err(LpError::Malformed(format!(
                    "variable {j} has non-finite objective coefficient"
                )));
            }
        }
        for (kind, rows) in [("eq", &self.eq_rows), ("le", &self.le_rows)] {
            for (i, row) in rows.iter().enumerate() {
                if !row.rhs.is_finite() {
                    return Err(LpError::Malformed(format!(
                        "{kind} row {i} has non-finite rhs"
                    )));
                }
                for &(v, c) in &row.terms {
                    if v >= n {
                        return Err(LpError::Malformed(format!(
                            "{kind} row {i} references undeclared variable {v}"
                        )));
                    }
                    if !c.is_finite() {
                        return Err(LpError::Malformed(format!(
                            "{kind} row {i} has non-finite coefficient on variable {v}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Solves the program. Status is exact: `Optimal` carries duals and
    /// reduced costs, `Infeasible` a Farkas certificate, `Unbounded` an
    /// improving ray.
    pub fn solve(&self) -> Result<LpOutcome, LpError> {
        self.validate()?;
        simplex::solve(self)
    }

    /// Feasibility test ignoring the objective.
    pub fn check_feasible(&self) -> Result<Feasibility, LpError> {
        self.validate()?;
        simplex::check_feasible(self)
    }

    /// Fixed-header text dump, one row per line, variables in declaration
    /// order. Intended for diffing in tests.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        writeln!(
            out,
            "lp sense={sense} vars={} eq={} le={}",
            self.n_vars(),
            self.eq_rows.len(),
            self.le_rows.len()
        )
        .unwrap();
        for j in 0..self.n_vars() {
            writeln!(
                out,
                "var {j} name={} lb={} ub={} obj={}",
                self.names[j], self.lower[j], self.upper[j], self.objective[j]
            )
            .unwrap();
        }
        for (kind, rows) in [("eq", &self.eq_rows), ("le", &self.le_rows)] {
            for (i, row) in rows.iter().enumerate() {
                let mut line = format!("{kind} {i} rhs={}", row.rhs);
                for &(v, c) in &row.terms {
                    line.push_str(&format!(" {v}={c}"));
                }
                writeln!(out, "{line}").unwrap();
            }
        }
        out
    }

    /// Residual helpers used by certificate verification and tests.
    pub fn eval_row_eq(&self, i: usize, x: &[f64]) -> f64 {
        self.eq_rows[i]
            .terms
            .iter()
            .map(|&(v, c)| c * x[v])
            .sum::<f64>()
    }

    pub fn eval_row_le(&self, i: usize, x: &[f64]) -> f64 {
        self.le_rows[i]
            .terms
            .iter()
            .map(|&(v, c)| c * x[v])
            .sum::<f64>()
    }

    pub fn eval_objective(&self, x: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(x.iter())
            .map(|(c, v)| c * v)
            .sum()
    }

    /// Largest violation of rows and bounds at `x` (0 when feasible).
    pub fn max_infeasibility(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.eq_rows.iter().enumerate() {
            worst = worst.max((self.eval_row_eq(i, x) - row.rhs).abs());
        }
        for (i, row) in self.le_rows.iter().enumerate() {
            worst = worst.max(self.eval_row_le(i, x) - row.rhs);
        }
        for j in 0..self.n_vars() {
            worst = worst.max(self.lower[j] - x[j]);
            worst = worst.max(x[j] - self.upper[j]);
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(Optimum),
    Infeasible(Infeasibility),
    Unbounded(UnboundedRay),
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<&Optimum> {
        match self {
            LpOutcome::Optimal(o) => Some(o),
            _ => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, LpOutcome::Infeasible(_))
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, LpOutcome::Unbounded(_))
    }
}

#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    Infeasible(Infeasibility),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }

    pub fn point(&self) -> Option<&[f64]> {
        match self {
            Feasibility::Feasible(x) => Some(x),
            Feasibility::Infeasible(_) => None,
        }
    }
}

/// Optimal solution. `dual_eq[i]` is the marginal value of the i-th equality
/// rhs in the problem's own sense; `dual_le[i]` is the nonnegative Lagrange
/// multiplier of the i-th `<=` row. `reduced_costs` follow the problem's own
/// sense: for a minimize problem a variable at its lower bound has
/// nonnegative reduced cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub primal: Vec<f64>,
    pub objective: f64,
    pub dual_eq: Vec<f64>,
    pub dual_le: Vec<f64>,
    pub reduced_costs: Vec<f64>,
}

impl Optimum {
    /// Dual objective under the bounded-variable dual; equals the primal
    /// objective at optimality up to tolerance.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let row_sign = match lp.sense {
            Sense::Minimize => -1.0,
            Sense::Maximize => 1.0,
        };
        let mut total = 0.0;
        for (i, row) in lp.eq_rows.iter().enumerate() {
            total += self.dual_eq[i] * row.rhs;
        }
        for (i, row) in lp.le_rows.iter().enumerate() {
            total += row_sign * self.dual_le[i] * row.rhs;
        }
        for j in 0..lp.n_vars() {
            let rc = self.reduced_costs[j];
            if rc.abs() <= 1e-12 {
                continue;
            }
            // Bound side that the reduced cost prices, by sense.
            let at_lower = match lp.sense {
                Sense::Minimize => rc > 0.0,
                Sense::Maximize => rc < 0.0,
            };
            let bound = if at_lower { lp.lower[j] } else { lp.upper[j] };
            if bound.is_finite() {
                total += rc * bound;
            }
        }
        total
    }

    /// Largest complementary-slackness defect over the `<=` rows.
    pub fn max_complementarity_defect(&self, lp: &LinearProgram) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in lp.le_rows.iter().enumerate() {
            let slack = row.rhs - self.eval_le(lp, i);
            worst = worst.max((self.dual_le[i] * slack).abs());
        }
        worst
    }

    fn eval_le(&self, lp: &LinearProgram, i: usize) -> f64 {
        lp.eval_row_le(i, &self.primal)
    }
}

/// Infeasibility certificate: a nonnegative combination of the `<=` rows plus
/// a signed combination of the equality rows that, after folding in variable
/// bounds, reduces to `0 <= margin` with `margin < -1e-8`.
#[derive(Debug, Clone, PartialEq)]
pub struct Infeasibility {
    pub eq_multipliers: Vec<f64>,
    pub le_multipliers: Vec<f64>,
}

impl Infeasibility {
    /// The contradiction margin. Sound certificates return a value below
    /// `-1e-8`; `+inf` means the combination fails to bound some variable.
    pub fn violation_margin(&self, lp: &LinearProgram) -> f64 {
        let n = lp.n_vars();
        let mut combined = vec![0.0; n];
        let mut rhs = 0.0;
        for (i, row) in lp.eq_rows.iter().enumerate() {
            let w = self.eq_multipliers[i];
            if w == 0.0 {
                continue;
            }
            for &(v, c) in &row.terms {
                combined[v] += w * c;
            }
            rhs += w * row.rhs;
        }
        for (i, row) in lp.le_rows.iter().enumerate() {
            let w = self.le_multipliers[i];
            if w == 0.0 {
                continue;
            }
            debug_assert!(w >= 0.0);
            for &(v, c) in &row.terms {
                combined[v] += w * c;
            }
            rhs += w * row.rhs;
        }
        // Minimum of the combined row over the variable box.
        let mut lhs_min = 0.0;
        for j in 0..n {
            let d = combined[j];
            if d.abs() <= 1e-12 {
                continue;
            }
            let bound = if d > 0.0 { lp.lower[j] } else { lp.upper[j] };
            if !bound.is_finite() {
                return f64::INFINITY;
            }
            lhs_min += d * bound;
        }
        rhs - lhs_min
    }

    pub fn is_sound(&self, lp: &LinearProgram) -> bool {
        self.violation_margin(lp) < -FEAS_TOL
    }
}

/// Feasible direction along which the objective improves without bound.
#[derive(Debug, Clone, PartialEq)]
pub struct UnboundedRay {
    pub direction: Vec<f64>,
}

impl UnboundedRay {
    /// Largest violation of the recession-cone conditions (0 when valid).
    pub fn max_defect(&self, lp: &LinearProgram) -> f64 {
        let d = &self.direction;
        let mut worst: f64 = 0.0;
        for row in lp.eq_rows.iter() {
            let v: f64 = row.terms.iter().map(|&(j, c)| c * d[j]).sum();
            worst = worst.max(v.abs());
        }
        for row in lp.le_rows.iter() {
            let v: f64 = row.terms.iter().map(|&(j, c)| c * d[j]).sum();
            worst = worst.max(v);
        }
        for j in 0..lp.n_vars() {
            if lp.lower[j].is_finite() {
                worst = worst.max(-d[j]);
            }
            if lp.upper[j].is_finite() {
                worst = worst.max(d[j]);
            }
        }
        worst
    }

    /// Objective change per unit step; positive means improving in the
    /// problem's own sense.
    pub fn improvement_rate(&self, lp: &LinearProgram) -> f64 {
        let raw = lp.eval_objective(&self.direction);
        match lp.sense {
            Sense::Minimize => -raw,
            Sense::Maximize => raw,
        }
    }
}

#[cfg(test)]
mod tests;
