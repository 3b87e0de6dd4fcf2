//! Instance representation shared by the simplex core, the branch-and-bound
//! search, and the MPS reader/writer.
//!
//! A [`Problem`] is a minimization instance over named, bounded, optionally
//! integer variables, with named linear constraints of sense `<=`, `>=` or
//! `==`. Constraint coefficients are stored row-major; the simplex core builds
//! its own column-major view when a solve starts.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Row sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Ge => write!(f, ">="),
            Sense::Eq => write!(f, "=="),
        }
    }
}

/// Domain of a decision variable. Binary variables are integer variables with
/// bounds `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
}

/// Index of a variable within its [`Problem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    /// Position of the variable in [`Problem::vars`] and in solution vectors.
    pub fn index(self) -> usize {
        self.0
    }
}

/// A decision variable: bounds, domain, and objective coefficient.
#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    pub objective: f64,
}

/// A linear constraint. Coefficients live in `Problem::rows` at the same
/// index.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization instance.
#[derive(Debug, Clone, Default)]
pub struct Problem {
    pub name: String,
    vars: Vec<Variable>,
    cons: Vec<Constraint>,
    /// Row-major coefficients: one `(column, coefficient)` list per constraint,
    /// sorted by column with no duplicates.
    rows: Vec<Vec<(usize, f64)>>,
    /// Constant added to the objective value after the variable terms.
    pub objective_offset: f64,
}

impl Problem {
    pub fn new(name: impl Into<String>) -> Self {
        Problem {
            name: name.into(),
            ..Problem::default()
        }
    }

    /// Adds a variable and returns its id. Names must be unique; this is
    /// enforced by [`Problem::validate`] rather than at insertion time so
    /// construction stays infallible.
    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        kind: VarKind,
        objective: f64,
    ) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
            objective,
        });
        VarId(self.vars.len() - 1)
    }

    /// Adds a constraint with the given terms. Terms are normalized: sorted by
    /// column, duplicate columns summed, exact zeros dropped.
    pub fn add_con(
        &mut self,
        name: impl Into<String>,
        sense: Sense,
        rhs: f64,
        terms: impl IntoIterator<Item = (VarId, f64)>,
    ) {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (VarId(col), coef) in terms {
            *merged.entry(col).or_insert(0.0) += coef;
        }
        let row: Vec<(usize, f64)> = merged.into_iter().filter(|&(_, c)| c != 0.0).collect();
        self.cons.push(Constraint {
            name: name.into(),
            sense,
            rhs,
        });
        self.rows.push(row);
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_cons(&self) -> usize {
        self.cons.len()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn cons(&self) -> &[Constraint] {
        &self.cons
    }

    /// Coefficients of constraint `row`, sorted by column.
    pub fn row(&self, row: usize) -> &[(usize, f64)] {
        &self.rows[row]
    }

    /// Tightens the bounds of a variable in place (used by branch-and-bound
    /// and by presolve-style fixing in tests).
    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) {
        self.vars[id.0].lower = lower;
        self.vars[id.0].upper = upper;
    }

    /// Number of structural nonzeros in the constraint matrix.
    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Objective value of an assignment, including the constant offset.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        let terms: f64 = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, x)| v.objective * x)
            .sum();
        terms + self.objective_offset
    }

    /// Structural well-formedness: unique names, finite coefficients,
    /// consistent bounds. Solvers call this before touching the instance.
    pub fn validate(&self) -> Result<(), SolverError> {
        let mut seen = BTreeMap::new();
        for (i, v) in self.vars.iter().enumerate() {
            if let Some(prev) = seen.insert(v.name.clone(), i) {
                return Err(SolverError::Malformed(format!(
                    "duplicate variable name {:?} (columns {prev} and {i})",
                    v.name
                )));
            }
            if v.lower > v.upper {
                return Err(SolverError::Malformed(format!(
                    "variable {:?} has empty bound interval [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower.is_nan() || v.upper.is_nan() || !v.objective.is_finite() {
                return Err(SolverError::Malformed(format!(
                    "variable {:?} has a non-finite bound or objective",
                    v.name
                )));
            }
        }
        let mut seen = BTreeMap::new();
        for (i, c) in self.cons.iter().enumerate() {
            if let Some(prev) = seen.insert(c.name.clone(), i) {
                return Err(SolverError::Malformed(format!(
                    "duplicate constraint name {:?} (rows {prev} and {i})",
                    c.name
                )));
            }
            if !c.rhs.is_finite() {
                return Err(SolverError::Malformed(format!(
                    "constraint {:?} has non-finite rhs",
                    c.name
                )));
            }
            for &(col, coef) in &self.rows[i] {
                if col >= self.vars.len() {
                    return Err(SolverError::Malformed(format!(
                        "constraint {:?} references unknown column {col}",
                        c.name
                    )));
                }
                if !coef.is_finite() {
                    return Err(SolverError::Malformed(format!(
                        "constraint {:?} has non-finite coefficient on column {col}",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Outcome classification of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Proven optimal (for MILP: relative gap closed below the configured
    /// threshold).
    Optimal,
    /// No feasible assignment exists.
    Infeasible,
    /// Objective unbounded below on the feasible set.
    Unbounded,
    /// Search stopped on a limit with a feasible incumbent still carrying an
    /// open gap, or an external result without an optimality certificate.
    GapLimit,
    /// Simplex iteration limit reached without a conclusion.
    IterationLimit,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::Unbounded => "Unbounded",
            SolveStatus::GapLimit => "GapLimit",
            SolveStatus::IterationLimit => "IterationLimit",
        };
        write!(f, "{s}")
    }
}

/// Result of a solve. `values` is indexed like `Problem::vars` and is fully
/// populated whenever `status` is `Optimal` or `GapLimit`; otherwise it is
/// empty.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    /// Objective of `values` (including the instance offset). Meaningless
    /// unless `values` is populated.
    pub objective: f64,
    /// Proven lower bound on the optimal objective. Equals `objective` when
    /// `status` is `Optimal`; `-inf` when nothing was proven.
    pub best_bound: f64,
    /// `(objective - best_bound) / max(1, |objective|)`; zero when optimal.
    pub gap: f64,
}

impl Solution {
    pub fn infeasible() -> Self {
        Solution {
            status: SolveStatus::Infeasible,
            values: Vec::new(),
            objective: f64::INFINITY,
            best_bound: f64::INFINITY,
            gap: 0.0,
        }
    }

    pub fn unbounded() -> Self {
        Solution {
            status: SolveStatus::Unbounded,
            values: Vec::new(),
            objective: f64::NEG_INFINITY,
            best_bound: f64::NEG_INFINITY,
            gap: 0.0,
        }
    }
}

/// Tolerances and limits for [`solve_lp`](crate::solve_lp) and
/// [`solve_milp`](crate::solve_milp).
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Maximum allowed primal constraint/bound violation.
    pub feasibility_tol: f64,
    /// Maximum distance from an integer for an integer variable to count as
    /// integral.
    pub integrality_tol: f64,
    /// Branch-and-bound stops and reports `Optimal` once the relative gap
    /// between incumbent and best bound falls below this.
    pub relative_gap: f64,
    /// Entries smaller than this are never accepted as simplex or LU pivots.
    pub pivot_tol: f64,
    /// Limit on branch-and-bound nodes; `None` means unlimited.
    pub node_limit: Option<usize>,
    /// Wall-clock limit for a whole solve; `None` means unlimited.
    pub time_limit: Option<std::time::Duration>,
    /// Limit on simplex iterations within one LP solve.
    pub iteration_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feasibility_tol: 1e-6,
            integrality_tol: 1e-6,
            relative_gap: 1e-4,
            pivot_tol: 1e-9,
            node_limit: None,
            time_limit: None,
            iteration_limit: 2_000_000,
        }
    }
}

/// Errors surfaced by solver entry points and the interchange formats.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("malformed instance: {0}")]
    Malformed(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("mps: {0}")]
    Mps(String),
    #[error("solution file line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("solution file names unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("external solver: {0}")]
    External(String),
    #[error("external solution failed feasibility audit: {0}")]
    AuditFailure(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Worst violations of an assignment against an instance, as produced by
/// [`audit`].
#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    /// Largest constraint violation and the offending row name.
    pub max_row_violation: f64,
    pub worst_row: Option<String>,
    /// Largest bound violation and the offending variable name.
    pub max_bound_violation: f64,
    pub worst_bound: Option<String>,
    /// Largest distance from integrality over integer variables.
    pub max_integrality_violation: f64,
    pub worst_integer: Option<String>,
}

impl AuditReport {
    pub fn max_violation(&self) -> f64 {
        self.max_row_violation
            .max(self.max_bound_violation)
            .max(self.max_integrality_violation)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(r) = &self.worst_row {
            parts.push(format!("row {:?} violated by {:.3e}", r, self.max_row_violation));
        }
        if let Some(b) = &self.worst_bound {
            parts.push(format!(
                "bound on {:?} violated by {:.3e}",
                b, self.max_bound_violation
            ));
        }
        if let Some(i) = &self.worst_integer {
            parts.push(format!(
                "integrality of {:?} off by {:.3e}",
                i, self.max_integrality_violation
            ));
        }
        if parts.is_empty() {
            "no violations".to_string()
        } else {
            parts.join("; ")
        }
    }
}

/// Measures how far an assignment is from satisfying an instance: per-row
/// residuals, bound violations, and integrality violations. `values` must
/// have one entry per variable.
pub fn audit(problem: &Problem, values: &[f64]) -> AuditReport {
    assert_eq!(
        values.len(),
        problem.num_vars(),
        "audit requires one value per variable"
    );
    let mut report = AuditReport::default();
    for (i, con) in problem.cons().iter().enumerate() {
        let lhs: f64 = problem
            .row(i)
            .iter()
            .map(|&(col, coef)| coef * values[col])
            .sum();
        let violation = match con.sense {
            Sense::Le => (lhs - con.rhs).max(0.0),
            Sense::Ge => (con.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - con.rhs).abs(),
        };
        if violation > report.max_row_violation {
            report.max_row_violation = violation;
            report.worst_row = Some(con.name.clone());
        }
    }
    for (v, &x) in problem.vars().iter().zip(values) {
        let violation = (v.lower - x).max(0.0).max(x - v.upper);
        if violation > report.max_bound_violation {
            report.max_bound_violation = violation;
            report.worst_bound = Some(v.name.clone());
        }
        if v.kind == VarKind::Integer {
            let frac = (x - x.round()).abs();
            if frac > report.max_integrality_violation {
                report.max_integrality_violation = frac;
                report.worst_integer = Some(v.name.clone());
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_con_merges_and_sorts_terms() {
        let mut p = Problem::new("t");
        let a = p.add_var("a", 0.0, 1.0, VarKind::Continuous, 0.0);
        let b = p.add_var("b", 0.0, 1.0, VarKind::Continuous, 0.0);
        p.add_con("r", Sense::Le, 1.0, vec![(b, 2.0), (a, 1.0), (b, 3.0), (a, -1.0)]);
        assert_eq!(p.row(0), &[(1, 5.0)]);
    }

    #[test]
    fn validate_rejects_duplicate_names_and_bad_bounds() {
        let mut p = Problem::new("t");
        p.add_var("x", 0.0, 1.0, VarKind::Continuous, 0.0);
        p.add_var("x", 0.0, 1.0, VarKind::Continuous, 0.0);
        assert!(matches!(p.validate(), Err(SolverError::Malformed(_))));

        let mut p = Problem::new("t");
        p.add_var("x", 2.0, 1.0, VarKind::Continuous, 0.0);
        assert!(matches!(p.validate(), Err(SolverError::Malformed(_))));
    }

    #[test]
    fn audit_reports_worst_violations() {
        let mut p = Problem::new("t");
        let x = p.add_var("x", 0.0, 10.0, VarKind::Integer, 1.0);
        let y = p.add_var("y", 0.0, 10.0, VarKind::Continuous, 0.0);
        p.add_con("cap", Sense::Le, 5.0, vec![(x, 1.0), (y, 1.0)]);
        p.add_con("link", Sense::Eq, 0.0, vec![(x, 1.0), (y, -1.0)]);

        let report = audit(&p, &[3.4, 2.0]);
        assert!((report.max_row_violation - 1.4).abs() < 1e-12);
        assert_eq!(report.worst_row.as_deref(), Some("link"));
        assert!((report.max_integrality_violation - 0.4).abs() < 1e-12);
        assert!(!report.within(1e-6));

        let clean = audit(&p, &[2.0, 2.0]);
        assert!(clean.within(1e-9));
    }

    #[test]
    fn objective_value_includes_offset() {
        let mut p = Problem::new("t");
        p.add_var("x", 0.0, 10.0, VarKind::Continuous, 2.0);
        p.objective_offset = 7.0;
        assert_eq!(p.objective_value(&[3.0]), 13.0);
    }
}
