//! Best-first branch-and-bound over the LP relaxation.
//!
//! Nodes are kept in a priority queue ordered by their parent's LP bound and
//! solved lazily when popped: the parent basis snapshot warm-starts a dual
//! simplex re-solve after the branching bound change. Branching picks the
//! most fractional integer column (lowest index on ties) and splits on
//! `floor`/`ceil` of its relaxation value. A round-and-fix heuristic tries to
//! produce an early incumbent from fractional relaxations.
//!
//! The search stops as soon as the relative gap between the incumbent and the
//! best open bound falls below `SolverConfig::relative_gap`, reporting
//! `Optimal`; hitting the node or time limit instead reports `GapLimit` when
//! an incumbent exists. The reported `best_bound` is always a valid lower
//! bound on the true optimum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use crate::presolve::{presolve, Presolved};
use crate::problem::{Problem, Solution, SolveStatus, SolverConfig, SolverError, VarKind};
use crate::simplex::{finish, Core, LpStatus, Snapshot};

#[derive(Clone, Copy)]
#[derive(Debug)]
struct BoundChange {
    col: usize,
    lower: f64,
    upper: f64,
}

struct Node {
    /// Lower bound inherited from the parent's solved relaxation.
    est: f64,
    /// Creation order; earlier nodes win ties so the search is reproducible.
    id: u64,
    changes: Vec<BoundChange>,
    snap: Rc<Snapshot>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap pops the maximum; invert so the smallest bound (then the
        // oldest node) comes out first.
        other
            .est
            .total_cmp(&self.est)
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / f64::max(1.0, incumbent.abs())).max(0.0)
}

fn most_fractional(core: &Core, int_cols: &[usize], tol: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for &j in int_cols {
        let v = core.structural_value(j);
        let f = v - v.floor();
        let score = f.min(1.0 - f);
        if score > tol && best.map_or(true, |(_, _, s)| score > s) {
            best = Some((j, v, score));
        }
    }
    best.map(|(j, v, _)| (j, v))
}

/// Solves a mixed-integer instance. Continuous instances fall through to a
/// single LP solve.
pub fn solve_milp(problem: &Problem, config: &SolverConfig) -> Result<Solution, SolverError> {
    problem.validate()?;
    let deadline = config.time_limit.map(|d| Instant::now() + d);

    let pre = match presolve(problem, config) {
        Presolved::Infeasible => return Ok(Solution::infeasible()),
        Presolved::Reduced(r) => r,
    };
    let rp = &pre.problem;
    let n = rp.num_vars();
    let offset = rp.objective_offset;
    let int_cols: Vec<usize> = rp
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Integer)
        .map(|(j, _)| j)
        .collect();

    let mut core = Core::new(rp, config)?;
    core.set_deadline(deadline);
    core.install_all_slack();
    let root_status = core.optimize()?;
    if int_cols.is_empty() || root_status != LpStatus::Optimal {
        return Ok(finish(problem, &pre, &core, root_status));
    }

    let root_lb: Vec<f64> = (0..n).map(|j| core.structural_bounds(j).0).collect();
    let root_ub: Vec<f64> = (0..n).map(|j| core.structural_bounds(j).1).collect();
    let root_obj = core.objective() + offset;

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut best_bound = root_obj;
    // Tightest bound proven for subtrees pruned against the incumbent; the
    // final bound must not overstate what was actually explored.
    let mut pruned_bound = f64::INFINITY;
    let mut next_id = 0u64;
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut processed: usize = 0;
    let mut stopped_on_limit = false;

    // Seed the search from the root relaxation.
    match most_fractional(&core, &int_cols, config.integrality_tol) {
        None => {
            let values: Vec<f64> = (0..n).map(|j| core.structural_value(j)).collect();
            incumbent = Some((root_obj, values));
        }
        Some((j, v)) => {
            let snap = Rc::new(core.snapshot());
            // Read before the heuristic below, which moves bounds around.
            let bounds = core.structural_bounds(j);
            if let Some((obj, values)) =
                try_round_and_fix(&mut core, &int_cols, &snap, offset)?
            {
                incumbent = Some((obj, values));
            }
            push_children(&mut heap, &mut next_id, root_obj, &[], &snap, j, v, bounds);
        }
    }

    while let Some(node) = heap.pop() {
        if let Some(d) = deadline {
            if Instant::now() >= d {
                stopped_on_limit = true;
                best_bound = node.est.min(pruned_bound);
                break;
            }
        }
        if let Some(limit) = config.node_limit {
            if processed >= limit {
                stopped_on_limit = true;
                best_bound = node.est.min(pruned_bound);
                break;
            }
        }
        // The queue is ordered by bound, so once the best open node cannot
        // improve on the incumbent the whole search is done.
        if let Some((inc, _)) = incumbent {
            if relative_gap(inc, node.est) <= config.relative_gap {
                best_bound = node.est.min(pruned_bound);
                break;
            }
        }

        for j in 0..n {
            core.set_structural_bounds(j, root_lb[j], root_ub[j]);
        }
        for ch in &node.changes {
            core.set_structural_bounds(ch.col, ch.lower, ch.upper);
        }
        let status = core.optimize_warm(&node.snap)?;
        processed += 1;
        match status {
            LpStatus::Infeasible => continue,
            LpStatus::Optimal => {}
            LpStatus::Unbounded => {
                // Tightening bounds cannot unbound a bounded relaxation.
                return Err(SolverError::Numerical(
                    "child relaxation reported unbounded".into(),
                ));
            }
            LpStatus::IterationLimit | LpStatus::TimeLimit => {
                stopped_on_limit = true;
                best_bound = node.est.min(pruned_bound);
                break;
            }
        }
        let obj = core.objective() + offset;
        if let Some((inc, _)) = incumbent {
            if relative_gap(inc, obj) <= config.relative_gap {
                pruned_bound = pruned_bound.min(obj);
                continue; // dominated subtree
            }
        }
        match most_fractional(&core, &int_cols, config.integrality_tol) {
            None => {
                let better = incumbent
                    .as_ref()
                    .map_or(true, |&(inc, _)| obj < inc - 1e-12);
                if better {
                    let values: Vec<f64> = (0..n).map(|j| core.structural_value(j)).collect();
                    incumbent = Some((obj, values));
                }
            }
            Some((j, v)) => {
                let snap = Rc::new(core.snapshot());
                // Read before the heuristic below, which moves bounds around.
                let bounds = core.structural_bounds(j);
                if incumbent.is_none() && processed % 64 == 0 {
                    if let Some((hobj, hvalues)) =
                        try_round_and_fix(&mut core, &int_cols, &snap, offset)?
                    {
                        incumbent = Some((hobj, hvalues));
                    }
                }
                push_children(
                    &mut heap,
                    &mut next_id,
                    obj,
                    &node.changes,
                    &snap,
                    j,
                    v,
                    bounds,
                );
            }
        }
    }

    if !stopped_on_limit && heap.is_empty() {
        // Search exhausted: the incumbent (if any) is optimal up to whatever
        // slack the pruning rule allowed.
        if let Some((inc, _)) = incumbent {
            best_bound = inc.min(pruned_bound);
        }
    }

    let result = match (&incumbent, stopped_on_limit) {
        (None, false) => Solution::infeasible(),
        (None, true) => Solution {
            status: SolveStatus::IterationLimit,
            values: Vec::new(),
            objective: f64::NAN,
            best_bound,
            gap: f64::INFINITY,
        },
        (Some((_, values)), limited) => {
            let expanded = pre.expand(|j| values[j]);
            let objective = problem.objective_value(&expanded);
            let bound = best_bound.min(objective);
            let gap = relative_gap(objective, bound);
            let status = if limited && gap > config.relative_gap {
                SolveStatus::GapLimit
            } else {
                SolveStatus::Optimal
            };
            Solution {
                status,
                values: expanded,
                objective,
                best_bound: bound,
                gap,
            }
        }
    };
    Ok(result)
}

/// Pushes the floor and ceil children of branching on `col` at fractional
/// `value`. Changes store absolute bounds (the node loop re-applies them over
/// the root bounds), so each child keeps the variable's untouched side from
/// `bounds`, the bounds in effect at the parent.
fn push_children(
    heap: &mut BinaryHeap<Node>,
    next_id: &mut u64,
    est: f64,
    parent_changes: &[BoundChange],
    snap: &Rc<Snapshot>,
    col: usize,
    value: f64,
    bounds: (f64, f64),
) {
    let (parent_lo, parent_hi) = bounds;
    let mut down = parent_changes.to_vec();
    down.push(BoundChange {
        col,
        lower: parent_lo,
        upper: value.floor(),
    });
    heap.push(Node {
        est,
        id: *next_id,
        changes: down,
        snap: Rc::clone(snap),
    });
    *next_id += 1;

    let mut up = parent_changes.to_vec();
    up.push(BoundChange {
        col,
        lower: value.ceil(),
        upper: parent_hi,
    });
    heap.push(Node {
        est,
        id: *next_id,
        changes: up,
        snap: Rc::clone(snap),
    });
    *next_id += 1;
}

/// Fixes every integer column of the current relaxation to a nearby integer
/// and re-solves for the continuous rest. Tries nearest-integer rounding
/// first, then rounding down (which tends to stay inside capacity-style
/// constraints). The caller restores bounds before the next node is solved.
fn try_round_and_fix(
    core: &mut Core,
    int_cols: &[usize],
    snap: &Rc<Snapshot>,
    offset: f64,
) -> Result<Option<(f64, Vec<f64>)>, SolverError> {
    let relaxation: Vec<(usize, f64)> = int_cols
        .iter()
        .map(|&j| (j, core.structural_value(j)))
        .collect();
    let saved: Vec<(usize, f64, f64)> = int_cols
        .iter()
        .map(|&j| {
            let (lo, hi) = core.structural_bounds(j);
            (j, lo, hi)
        })
        .collect();
    for round_down in [false, true] {
        for (idx, &(j, v)) in relaxation.iter().enumerate() {
            let (_, lo, hi) = saved[idx];
            let r = if round_down { v.floor() } else { v.round() }.clamp(lo, hi);
            core.set_structural_bounds(j, r, r);
        }
        let status = core.optimize_warm(snap)?;
        if status == LpStatus::Optimal {
            let n = core.num_structural();
            let values: Vec<f64> = (0..n).map(|j| core.structural_value(j)).collect();
            return Ok(Some((core.objective() + offset, values)));
        }
        for &(j, lo, hi) in &saved {
            core.set_structural_bounds(j, lo, hi);
        }
    }
    Ok(None)
}
