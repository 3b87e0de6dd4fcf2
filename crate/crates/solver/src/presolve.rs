//! Limited presolve: singleton rows become variable bounds, and variables
//! whose bounds pin them to a single value are substituted out. Both
//! reductions are exact, so no tolerance games are needed at postsolve time;
//! anything more aggressive is deliberately out of scope.

use crate::problem::{Problem, Sense, VarKind};

/// Result of presolving an instance.
pub(crate) enum Presolved {
    /// Bound tightening alone proved the instance infeasible.
    Infeasible,
    Reduced(Reduction),
}

/// A reduced instance together with the data needed to expand a reduced
/// solution back to the original variable space.
pub(crate) struct Reduction {
    pub problem: Problem,
    /// Reduced column index -> original column index.
    pub col_map: Vec<usize>,
    /// Original column index -> pinned value, for substituted columns.
    fixed: Vec<(usize, f64)>,
    orig_n: usize,
}

impl Reduction {
    /// Expands reduced-space values (read via `get`) to the original space.
    pub(crate) fn expand(&self, get: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.orig_n];
        for (reduced, &orig) in self.col_map.iter().enumerate() {
            out[orig] = get(reduced);
        }
        for &(orig, v) in &self.fixed {
            out[orig] = v;
        }
        out
    }
}

pub(crate) fn presolve(p: &Problem, cfg: &crate::problem::SolverConfig) -> Presolved {
    let n = p.num_vars();
    let int_tol = cfg.integrality_tol;

    let mut lb: Vec<f64> = p.vars().iter().map(|v| v.lower).collect();
    let mut ub: Vec<f64> = p.vars().iter().map(|v| v.upper).collect();

    // Fold singleton rows into bounds.
    let mut drop_row = vec![false; p.num_cons()];
    for (r, con) in p.cons().iter().enumerate() {
        let row = p.row(r);
        if row.len() != 1 {
            continue;
        }
        let (j, a) = row[0];
        let v = con.rhs / a;
        let tighten_ub = matches!(
            (con.sense, a > 0.0),
            (Sense::Le, true) | (Sense::Ge, false) | (Sense::Eq, _)
        );
        let tighten_lb = matches!(
            (con.sense, a > 0.0),
            (Sense::Le, false) | (Sense::Ge, true) | (Sense::Eq, _)
        );
        if tighten_ub && v < ub[j] {
            ub[j] = v;
        }
        if tighten_lb && v > lb[j] {
            lb[j] = v;
        }
        drop_row[r] = true;
    }

    // Round integer bounds inward and check interval consistency.
    for (j, var) in p.vars().iter().enumerate() {
        if var.kind == VarKind::Integer {
            if lb[j].is_finite() {
                lb[j] = (lb[j] - int_tol).ceil();
            }
            if ub[j].is_finite() {
                ub[j] = (ub[j] + int_tol).floor();
            }
        }
        if lb[j] > ub[j] {
            if lb[j] - ub[j] <= 1e-9 && var.kind == VarKind::Continuous {
                let mid = 0.5 * (lb[j] + ub[j]);
                lb[j] = mid;
                ub[j] = mid;
            } else {
                return Presolved::Infeasible;
            }
        }
    }

    // Substitute out pinned columns.
    let mut fixed: Vec<(usize, f64)> = Vec::new();
    let mut col_map: Vec<usize> = Vec::new();
    let mut new_index = vec![usize::MAX; n];
    for j in 0..n {
        if lb[j] == ub[j] {
            fixed.push((j, lb[j]));
        } else {
            new_index[j] = col_map.len();
            col_map.push(j);
        }
    }
    let fixed_value = |j: usize| -> Option<f64> {
        if new_index[j] == usize::MAX {
            Some(lb[j])
        } else {
            None
        }
    };

    let mut reduced = Problem::new(p.name.clone());
    reduced.objective_offset = p.objective_offset;
    for &j in &col_map {
        let v = p.var(crate::problem::VarId(j));
        reduced.add_var(v.name.clone(), lb[j], ub[j], v.kind, v.objective);
    }
    for &(j, v) in &fixed {
        reduced.objective_offset += p.var(crate::problem::VarId(j)).objective * v;
    }

    for (r, con) in p.cons().iter().enumerate() {
        if drop_row[r] {
            continue;
        }
        let mut rhs = con.rhs;
        let mut terms: Vec<(crate::problem::VarId, f64)> = Vec::new();
        for &(j, a) in p.row(r) {
            match fixed_value(j) {
                Some(v) => rhs -= a * v,
                None => terms.push((crate::problem::VarId(new_index[j]), a)),
            }
        }
        if terms.is_empty() {
            let ok = match con.sense {
                Sense::Le => rhs >= -cfg.feasibility_tol,
                Sense::Ge => rhs <= cfg.feasibility_tol,
                Sense::Eq => rhs.abs() <= cfg.feasibility_tol,
            };
            if !ok {
                return Presolved::Infeasible;
            }
            continue;
        }
        reduced.add_con(con.name.clone(), con.sense, rhs, terms);
    }

    Presolved::Reduced(Reduction {
        problem: reduced,
        col_map,
        fixed,
        orig_n: n,
    })
}
