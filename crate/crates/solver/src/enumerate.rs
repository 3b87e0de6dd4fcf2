//! Exhaustive reference solvers for tiny instances.
//!
//! [`enumerate_lp`] visits every candidate vertex of a bounded feasible
//! region by solving all n-subsets of the active hyperplanes (constraint
//! boundaries plus variable bounds) with dense Gaussian elimination.
//! [`enumerate_milp`] additionally walks the full integer grid and solves
//! the continuous remainder per assignment. The cost is combinatorial:
//! these routines exist to cross-check the simplex and branch-and-bound
//! code on randomly generated instances, not to solve anything real.
//!
//! Both require finite bounds on every variable, which makes the feasible
//! region a polytope: the optimum (when the region is nonempty) is attained
//! at a vertex, so complete vertex enumeration is an exact oracle.

use crate::problem::{audit, Problem, Sense, VarKind};

/// Acceptance slack for candidate points. Generators used in tests produce
/// small-integer data, so true vertices satisfy constraints essentially
/// exactly and this only absorbs elimination round-off.
const FEAS_TOL: f64 = 1e-7;

fn assert_bounded(p: &Problem) {
    for v in p.vars() {
        assert!(
            v.lower.is_finite() && v.upper.is_finite(),
            "enumeration requires finite bounds; {} has [{}, {}]",
            v.name,
            v.lower,
            v.upper
        );
    }
}

/// Solves a tiny LP by complete vertex enumeration. Returns the optimal
/// objective and one optimal point, or `None` when infeasible.
pub fn enumerate_lp(p: &Problem) -> Option<(f64, Vec<f64>)> {
    assert_bounded(p);
    let n = p.num_vars();
    if n == 0 {
        let x = Vec::new();
        return audit(p, &x)
            .within(FEAS_TOL)
            .then(|| (p.objective_value(&x), x));
    }
    assert!(n <= 6, "enumeration is for tiny instances (got {n} vars)");

    // Hyperplanes: every constraint boundary plus both bounds of each
    // variable, as dense (normal, offset) pairs.
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in 0..p.num_cons() {
        let mut normal = vec![0.0; n];
        for &(c, v) in p.row(r) {
            normal[c] = v;
        }
        planes.push((normal, p.cons()[r].rhs));
    }
    for (j, var) in p.vars().iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), var.lower));
        planes.push((e, var.upper));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |x: &[f64]| {
        if !audit(p, x).within(FEAS_TOL) {
            return;
        }
        let val = p.objective_value(x);
        if best.as_ref().is_none_or(|(b, _)| val < *b) {
            best = Some((val, x.to_vec()));
        }
    };

    // All n-subsets of planes, by lexicographic index advance.
    let h = planes.len();
    if h < n {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = solve_square(&planes, &idx) {
            consider(&x);
        }
        // Advance the combination.
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] + 1 <= h - (n - k) {
                idx[k] += 1;
                for j in k + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Solves the square system given by the selected planes with partial
/// pivoting; `None` when (near-)singular.
fn solve_square(planes: &[(Vec<f64>, f64)], idx: &[usize]) -> Option<Vec<f64>> {
    let n = idx.len();
    let mut a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
    let mut b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-8 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Some(x)
}

/// Solves a tiny MILP by walking the integer grid and enumerating the
/// continuous remainder per assignment. Returns `None` when infeasible.
pub fn enumerate_milp(p: &Problem) -> Option<(f64, Vec<f64>)> {
    assert_bounded(p);
    let n = p.num_vars();
    let ints: Vec<usize> = (0..n)
        .filter(|&j| p.vars()[j].kind == VarKind::Integer)
        .collect();
    let conts: Vec<usize> = (0..n)
        .filter(|&j| p.vars()[j].kind == VarKind::Continuous)
        .collect();

    // Integer ranges, inclusive, after inward rounding.
    let mut ranges: Vec<(i64, i64)> = Vec::new();
    let mut grid_size = 1u64;
    for &j in &ints {
        let lo = p.vars()[j].lower.ceil() as i64;
        let hi = p.vars()[j].upper.floor() as i64;
        if lo > hi {
            return None;
        }
        grid_size = grid_size.saturating_mul((hi - lo + 1) as u64);
        ranges.push((lo, hi));
    }
    assert!(
        grid_size <= 200_000,
        "integer grid too large to enumerate ({grid_size} points)"
    );

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut assignment: Vec<i64> = ranges.iter().map(|&(lo, _)| lo).collect();
    loop {
        // Reduced problem over the continuous variables.
        let mut reduced = Problem::new("reduced");
        let mut back = Vec::new();
        for &j in &conts {
            let v = &p.vars()[j];
            back.push(reduced.add_var(
                v.name.clone(),
                v.lower,
                v.upper,
                VarKind::Continuous,
                v.objective,
            ));
        }
        let pos_of = |j: usize| conts.iter().position(|&c| c == j);
        let mut assignment_ok = true;
        for r in 0..p.num_cons() {
            let mut fixed = 0.0;
            let mut terms = Vec::new();
            for &(c, v) in p.row(r) {
                if let Some(k) = pos_of(c) {
                    terms.push((back[k], v));
                } else {
                    let zi = ints.iter().position(|&i| i == c).unwrap();
                    fixed += v * assignment[zi] as f64;
                }
            }
            let rhs = p.cons()[r].rhs - fixed;
            if terms.is_empty() {
                let ok = match p.cons()[r].sense {
                    Sense::Le => 0.0 <= rhs + FEAS_TOL,
                    Sense::Ge => 0.0 >= rhs - FEAS_TOL,
                    Sense::Eq => rhs.abs() <= FEAS_TOL,
                };
                if !ok {
                    assignment_ok = false;
                    break;
                }
            } else {
                reduced.add_con(format!("r{r}"), p.cons()[r].sense, rhs, terms);
            }
        }

        if assignment_ok {
            let solved = if conts.is_empty() {
                Some((0.0, Vec::new()))
            } else {
                enumerate_lp(&reduced)
            };
            if let Some((_, xc)) = solved {
                let mut x = vec![0.0; n];
                for (k, &j) in ints.iter().enumerate() {
                    x[j] = assignment[k] as f64;
                }
                for (k, &j) in conts.iter().enumerate() {
                    x[j] = xc[k];
                }
                let val = p.objective_value(&x);
                if best.as_ref().is_none_or(|(b, _)| val < *b) {
                    best = Some((val, x));
                }
            }
        }

        // Advance the mixed-radix counter.
        let mut k = assignment.len();
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if assignment[k] < ranges[k].1 {
                assignment[k] += 1;
                for j in k + 1..assignment.len() {
                    assignment[j] = ranges[j].0;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_the_box_corner() {
        let mut p = Problem::new("t");
        p.add_var("x", 0.0, 3.0, VarKind::Continuous, -1.0);
        p.add_var("y", -1.0, 2.0, VarKind::Continuous, -2.0);
        let (obj, x) = enumerate_lp(&p).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
        assert_eq!(obj, -7.0);
    }

    #[test]
    fn respects_a_cutting_constraint() {
        let mut p = Problem::new("t");
        let x = p.add_var("x", 0.0, 10.0, VarKind::Continuous, -1.0);
        let y = p.add_var("y", 0.0, 10.0, VarKind::Continuous, -1.0);
        p.add_con("cap", Sense::Le, 3.0, vec![(x, 1.0), (y, 1.0)]);
        let (obj, _) = enumerate_lp(&p).unwrap();
        assert_eq!(obj, -3.0);
    }

    #[test]
    fn reports_infeasibility() {
        let mut p = Problem::new("t");
        let x = p.add_var("x", 0.0, 1.0, VarKind::Continuous, 1.0);
        p.add_con("too_much", Sense::Ge, 5.0, vec![(x, 1.0)]);
        assert!(enumerate_lp(&p).is_none());
    }

    #[test]
    fn milp_grid_beats_naive_rounding() {
        // Relaxation optimum is (3, 1.5); rounding y up is infeasible and
        // rounding down gives 19, while the true integer optimum is (4, 0).
        let mut p = Problem::new("t");
        let x = p.add_var("x", 0.0, 4.0, VarKind::Integer, -5.0);
        let y = p.add_var("y", 0.0, 4.0, VarKind::Integer, -4.0);
        p.add_con("a", Sense::Le, 24.0, vec![(x, 6.0), (y, 4.0)]);
        p.add_con("b", Sense::Le, 6.0, vec![(x, 1.0), (y, 2.0)]);
        let (obj, z) = enumerate_milp(&p).unwrap();
        assert_eq!(obj, -20.0);
        assert_eq!(z, vec![4.0, 0.0]);
    }

    #[test]
    fn mixed_problem_solves_continuous_remainder() {
        let mut p = Problem::new("t");
        let z = p.add_var("z", 0.0, 2.0, VarKind::Integer, 10.0);
        let x = p.add_var("x", 0.0, 4.0, VarKind::Continuous, -1.0);
        // x can only be as large as 2 z: buying capacity costs 10 per unit.
        p.add_con("link", Sense::Le, 0.0, vec![(x, 1.0), (z, -2.0)]);
        p.add_con("need", Sense::Ge, 3.0, vec![(x, 1.0)]);
        let (obj, sol) = enumerate_milp(&p).unwrap();
        // z = 2 is forced (z = 1 caps x at 2 < 3); then x runs to its cap of
        // 4 because every unit of x earns back 1.
        assert_eq!(sol[z.index()], 2.0);
        assert_eq!(sol[x.index()], 4.0);
        assert_eq!(obj, 16.0);
    }

    #[test]
    fn pure_integer_rows_prune_assignments() {
        let mut p = Problem::new("t");
        let a = p.add_var("a", 0.0, 3.0, VarKind::Integer, -1.0);
        let b = p.add_var("b", 0.0, 3.0, VarKind::Integer, -1.0);
        p.add_con("parity_ish", Sense::Eq, 4.0, vec![(a, 2.0), (b, 2.0)]);
        let (obj, _) = enumerate_milp(&p).unwrap();
        assert_eq!(obj, -2.0);
    }
}
