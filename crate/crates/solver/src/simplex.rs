//! Bounded-variable two-phase revised simplex with sparse LU basis factors.
//!
//! The internal form appends one slack column per row, turning every
//! constraint into an equality `A x + s = b` with sense captured in the slack
//! bounds (`<=`: `s >= 0`, `>=`: `s <= 0`, `==`: `s = 0`). Phase 1 drives a
//! composite infeasibility measure to zero starting from the all-slack basis;
//! phase 2 optimizes the true objective. A dual simplex loop with a
//! bound-flipping ratio test re-optimizes after bound changes, which is how
//! branch-and-bound warm-starts child nodes from the parent basis.
//!
//! Degeneracy is handled pragmatically: Dantzig pricing by default, with
//! Bland's smallest-index rule engaged after a run of degenerate pivots and
//! released after the next improving step. All tie-breaks are by index, so
//! solves are bit-reproducible.

use std::time::Instant;

use crate::lu::{Factors, Workspace};
use crate::problem::{Problem, Sense, Solution, SolveStatus, SolverConfig, SolverError};

const INF: f64 = f64::INFINITY;
/// Entries below this magnitude are treated as zero in pivot columns.
const ZERO_TOL: f64 = 1e-11;
/// Consecutive degenerate pivots before Bland's rule engages.
const DEGEN_LIMIT: usize = 200;
/// Eta updates accumulated before a refactorization.
const REFACTOR_LIMIT: usize = 80;
/// Dual-simplex iterations without progress before falling back to primal.
const DUAL_STALL_LIMIT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VStat {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

/// Basis snapshot used to warm-start related solves.
#[derive(Clone)]
pub(crate) struct Snapshot {
    basis: Vec<usize>,
    stat: Vec<VStat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    TimeLimit,
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    One,
    Two,
}

enum LoopEnd {
    /// Phase 1 reached feasibility.
    Feasible,
    /// No eligible entering column: optimal in phase 2, infeasible in phase 1.
    NoEntering,
    Unbounded,
    Limit(LpStatus),
}

enum DualEnd {
    PrimalFeasible,
    Infeasible,
    /// Numerical trouble or stalling; caller falls back to the primal path.
    Stall,
    Limit(LpStatus),
}

/// Revised simplex working state over the internal `[A | I]` form.
pub(crate) struct Core {
    m: usize,
    /// Structural column count; columns `n..n+m` are slacks.
    n: usize,
    // Structural matrix, column-major.
    colp: Vec<usize>,
    rowi: Vec<usize>,
    av: Vec<f64>,
    /// Structural objective (slacks cost zero).
    obj: Vec<f64>,
    rhs: Vec<f64>,
    /// Current bounds, length `n + m`; branch-and-bound edits the structural
    /// prefix between solves.
    lb: Vec<f64>,
    ub: Vec<f64>,
    /// Dual feasibility tolerance, scaled to the objective magnitude.
    dtol: f64,
    ftol: f64,
    pivot_tol: f64,

    basis: Vec<usize>,
    stat: Vec<VStat>,
    x: Vec<f64>,
    factors: Option<Factors>,
    lws: Workspace,
    /// Dense scratch, length m: entering column / dual vectors.
    va: Vec<f64>,
    vb: Vec<f64>,
    /// Nonzero positions of `va` after an ftran.
    wnz: Vec<usize>,

    pub(crate) iters: usize,
    iter_limit: usize,
    deadline: Option<Instant>,
    bland: bool,
    degen_run: usize,
}

impl Core {
    pub(crate) fn new(p: &Problem, cfg: &SolverConfig) -> Result<Core, SolverError> {
        let m = p.num_cons();
        let n = p.num_vars();

        // Build the structural CSC from the row-major input.
        let mut counts = vec![0usize; n];
        for r in 0..m {
            for &(c, _) in p.row(r) {
                counts[c] += 1;
            }
        }
        let mut colp = vec![0usize; n + 1];
        for j in 0..n {
            colp[j + 1] = colp[j] + counts[j];
        }
        let nnz = colp[n];
        let mut rowi = vec![0usize; nnz];
        let mut av = vec![0f64; nnz];
        let mut next = colp.clone();
        for r in 0..m {
            for &(c, v) in p.row(r) {
                rowi[next[c]] = r;
                av[next[c]] = v;
                next[c] += 1;
            }
        }

        let mut lb = Vec::with_capacity(n + m);
        let mut ub = Vec::with_capacity(n + m);
        let mut obj = Vec::with_capacity(n);
        for v in p.vars() {
            lb.push(v.lower);
            ub.push(v.upper);
            obj.push(v.objective);
        }
        let mut rhs = Vec::with_capacity(m);
        for c in p.cons() {
            rhs.push(c.rhs);
            let (sl, su) = match c.sense {
                Sense::Le => (0.0, INF),
                Sense::Ge => (-INF, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lb.push(sl);
            ub.push(su);
        }

        let maxc = obj.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let dtol = 1e-9 * (1.0 + maxc);

        Ok(Core {
            m,
            n,
            colp,
            rowi,
            av,
            obj,
            rhs,
            lb,
            ub,
            dtol,
            ftol: cfg.feasibility_tol,
            pivot_tol: cfg.pivot_tol,
            basis: Vec::new(),
            stat: Vec::new(),
            x: Vec::new(),
            factors: None,
            lws: Workspace::new(m),
            va: vec![0.0; m],
            vb: vec![0.0; m],
            wnz: Vec::new(),
            iters: 0,
            iter_limit: cfg.iteration_limit,
            deadline: None,
            bland: false,
            degen_run: 0,
        })
    }

    pub(crate) fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    pub(crate) fn num_structural(&self) -> usize {
        self.n
    }

    pub(crate) fn structural_value(&self, j: usize) -> f64 {
        self.x[j]
    }

    pub(crate) fn set_structural_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        debug_assert!(j < self.n);
        self.lb[j] = lower;
        self.ub[j] = upper;
    }

    pub(crate) fn structural_bounds(&self, j: usize) -> (f64, f64) {
        (self.lb[j], self.ub[j])
    }

    pub(crate) fn snapshot(&self) -> Snapshot {
        Snapshot {
            basis: self.basis.clone(),
            stat: self.stat.clone(),
        }
    }

    /// Objective of the current iterate (structural part only; the caller
    /// adds the instance offset).
    pub(crate) fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.obj[j] * self.x[j]).sum()
    }

    fn objective_column(&self, j: usize) -> f64 {
        if j < self.n {
            self.obj[j]
        } else {
            0.0
        }
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            let mut acc = 0.0;
            for k in self.colp[j]..self.colp[j + 1] {
                acc += self.av[k] * y[self.rowi[k]];
            }
            acc
        } else {
            y[j - self.n]
        }
    }

    fn col_axpy(&self, j: usize, s: f64, out: &mut [f64]) {
        if j < self.n {
            for k in self.colp[j]..self.colp[j + 1] {
                out[self.rowi[k]] += s * self.av[k];
            }
        } else {
            out[j - self.n] += s;
        }
    }

    /// Sets every column nonbasic at its most natural bound and the slack
    /// basis. The slack basis is an identity matrix, so it always factorizes.
    pub(crate) fn install_all_slack(&mut self) {
        let total = self.n + self.m;
        self.stat = vec![VStat::AtLower; total];
        self.x = vec![0.0; total];
        for j in 0..total {
            let (l, u) = (self.lb[j], self.ub[j]);
            let (st, v) = if l.is_finite() {
                (VStat::AtLower, l)
            } else if u.is_finite() {
                (VStat::AtUpper, u)
            } else {
                (VStat::Free, 0.0)
            };
            self.stat[j] = st;
            self.x[j] = v;
        }
        self.basis = (0..self.m).map(|i| self.n + i).collect();
        for i in 0..self.m {
            self.stat[self.n + i] = VStat::Basic;
        }
        self.factors = None;
    }

    /// Restores a basis snapshot, reconciling nonbasic statuses with the
    /// current bounds (which may have changed since the snapshot was taken).
    pub(crate) fn install_snapshot(&mut self, snap: &Snapshot) {
        let total = self.n + self.m;
        debug_assert_eq!(snap.stat.len(), total);
        self.basis = snap.basis.clone();
        self.stat = snap.stat.clone();
        self.x = vec![0.0; total];
        for j in 0..total {
            match self.stat[j] {
                VStat::Basic => {}
                VStat::AtLower => {
                    if self.lb[j].is_finite() {
                        self.x[j] = self.lb[j];
                    } else if self.ub[j].is_finite() {
                        self.stat[j] = VStat::AtUpper;
                        self.x[j] = self.ub[j];
                    } else {
                        self.stat[j] = VStat::Free;
                    }
                }
                VStat::AtUpper => {
                    if self.ub[j].is_finite() {
                        self.x[j] = self.ub[j];
                    } else if self.lb[j].is_finite() {
                        self.stat[j] = VStat::AtLower;
                        self.x[j] = self.lb[j];
                    } else {
                        self.stat[j] = VStat::Free;
                    }
                }
                VStat::Free => {
                    if self.lb[j].is_finite() || self.ub[j].is_finite() {
                        // A bound appeared since the snapshot; park there.
                        if self.lb[j].is_finite() {
                            self.stat[j] = VStat::AtLower;
                            self.x[j] = self.lb[j];
                        } else {
                            self.stat[j] = VStat::AtUpper;
                            self.x[j] = self.ub[j];
                        }
                    }
                }
            }
        }
        self.factors = None;
    }

    /// (Re)factorizes the current basis, repairing rank deficiency by
    /// swapping dependent columns for the slacks of unpivoted rows.
    fn refactorize(&mut self) -> Result<(), SolverError> {
        loop {
            let cols: Vec<Vec<(usize, f64)>> = (0..self.m)
                .map(|pos| {
                    let j = self.basis[pos];
                    if j < self.n {
                        (self.colp[j]..self.colp[j + 1])
                            .map(|k| (self.rowi[k], self.av[k]))
                            .collect()
                    } else {
                        vec![(j - self.n, 1.0)]
                    }
                })
                .collect();
            match Factors::factorize(self.m, &cols, self.pivot_tol) {
                Ok(f) => {
                    self.factors = Some(f);
                    return Ok(());
                }
                Err(sing) => {
                    for (&pos, &row) in sing.failed_cols.iter().zip(&sing.unpivoted_rows) {
                        let out = self.basis[pos];
                        // Park the dependent column at a bound (or zero).
                        let (l, u) = (self.lb[out], self.ub[out]);
                        let (st, v) = if l.is_finite() {
                            (VStat::AtLower, l)
                        } else if u.is_finite() {
                            (VStat::AtUpper, u)
                        } else {
                            (VStat::Free, 0.0)
                        };
                        self.stat[out] = st;
                        self.x[out] = v;
                        let slack = self.n + row;
                        debug_assert!(self.stat[slack] != VStat::Basic);
                        self.basis[pos] = slack;
                        self.stat[slack] = VStat::Basic;
                    }
                }
            }
        }
    }

    /// Recomputes all basic values from the bounds of the nonbasic columns.
    fn compute_beta(&mut self) {
        let mut va = std::mem::take(&mut self.va);
        va.copy_from_slice(&self.rhs);
        for j in 0..self.n + self.m {
            if self.stat[j] != VStat::Basic && self.x[j] != 0.0 {
                self.col_axpy(j, -self.x[j], &mut va);
            }
        }
        let f = self.factors.as_ref().expect("factorized");
        f.ftran(&mut va, &mut self.lws);
        for pos in 0..self.m {
            self.x[self.basis[pos]] = va[pos];
        }
        self.va = va;
    }

    fn total_infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for pos in 0..self.m {
            let c = self.basis[pos];
            let v = self.x[c];
            total += (self.lb[c] - v).max(0.0) + (v - self.ub[c]).max(0.0);
        }
        total
    }

    /// Dual vector for the given phase, left in `vb` (row space).
    fn compute_duals(&mut self, phase: Phase) {
        for pos in 0..self.m {
            let c = self.basis[pos];
            self.va[pos] = match phase {
                Phase::Two => self.objective_column(c),
                Phase::One => {
                    let v = self.x[c];
                    if v < self.lb[c] - self.ftol {
                        -1.0
                    } else if v > self.ub[c] + self.ftol {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
        self.vb.copy_from_slice(&self.va);
        let f = self.factors.as_ref().expect("factorized");
        f.btran(&mut self.vb, &mut self.lws);
    }

    /// Reduced cost of a nonbasic column against the duals in `vb`.
    fn reduced_cost(&self, phase: Phase, j: usize) -> f64 {
        let cj = match phase {
            Phase::Two => self.objective_column(j),
            Phase::One => 0.0,
        };
        cj - self.col_dot(j, &self.vb)
    }

    /// Picks the entering column, or `None` at (phase) optimality. Returns
    /// `(column, direction)` where direction +1 increases the column.
    fn price(&self, phase: Phase) -> Option<(usize, f64)> {
        let ptol = match phase {
            Phase::One => 1e-9,
            Phase::Two => self.dtol,
        };
        let mut best: Option<(usize, f64, f64)> = None; // (col, dir, score)
        for j in 0..self.n + self.m {
            match self.stat[j] {
                VStat::Basic => continue,
                _ if self.ub[j] - self.lb[j] <= 0.0 => continue, // fixed
                VStat::AtLower => {
                    let d = self.reduced_cost(phase, j);
                    if d < -ptol {
                        if self.bland {
                            return Some((j, 1.0));
                        }
                        if best.map_or(true, |(_, _, s)| -d > s) {
                            best = Some((j, 1.0, -d));
                        }
                    }
                }
                VStat::AtUpper => {
                    let d = self.reduced_cost(phase, j);
                    if d > ptol {
                        if self.bland {
                            return Some((j, -1.0));
                        }
                        if best.map_or(true, |(_, _, s)| d > s) {
                            best = Some((j, -1.0, d));
                        }
                    }
                }
                VStat::Free => {
                    let d = self.reduced_cost(phase, j);
                    if d.abs() > ptol {
                        let dir = if d < 0.0 { 1.0 } else { -1.0 };
                        if self.bland {
                            return Some((j, dir));
                        }
                        if best.map_or(true, |(_, _, s)| d.abs() > s) {
                            best = Some((j, dir, d.abs()));
                        }
                    }
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Computes `va = B^-1 a_j` and records its nonzero positions in `wnz`.
    fn ftran_column(&mut self, j: usize) {
        let mut va = std::mem::take(&mut self.va);
        va.iter_mut().for_each(|v| *v = 0.0);
        self.col_axpy(j, 1.0, &mut va);
        let f = self.factors.as_ref().expect("factorized");
        f.ftran(&mut va, &mut self.lws);
        self.wnz.clear();
        for (pos, &w) in va.iter().enumerate() {
            if w.abs() > ZERO_TOL {
                self.wnz.push(pos);
            }
        }
        self.va = va;
    }

    /// Blocking bound of a basic column moving by `delta_sign` in the given
    /// phase, or +/-inf when unblocked.
    fn blocking_bound(&self, phase: Phase, c: usize, delta_sign: f64) -> f64 {
        let v = self.x[c];
        let (l, u) = (self.lb[c], self.ub[c]);
        if delta_sign > 0.0 {
            match phase {
                Phase::One if v < l - self.ftol => l, // regains feasibility at l
                _ if v <= u + self.ftol => u,
                _ => INF, // already above u in phase 1: nothing blocks above
            }
        } else {
            match phase {
                Phase::One if v > u + self.ftol => u,
                _ if v >= l - self.ftol => l,
                _ => -INF,
            }
        }
    }

    /// One primal iteration's ratio test over the entering column in `va`.
    /// Returns the step and, for a basis change, the leaving position and the
    /// bound side the leaving variable lands on.
    fn ratio_test(&self, phase: Phase, j: usize, dir: f64) -> Ratio {
        let range = self.ub[j] - self.lb[j]; // INF for free/one-sided
        let mut tmin = if range.is_finite() { range } else { INF };
        let mut have_row_block = false;
        for &pos in &self.wnz {
            let w = self.va[pos];
            let c = self.basis[pos];
            let delta = -dir * w;
            let bound = self.blocking_bound(phase, c, delta);
            if bound.is_infinite() {
                continue;
            }
            let t = ((bound - self.x[c]) / delta).max(0.0);
            if t < tmin {
                tmin = t;
                have_row_block = true;
            } else if t == tmin {
                have_row_block = true;
            }
        }
        if tmin == INF {
            return Ratio::Unbounded;
        }
        if !have_row_block || (range.is_finite() && range <= tmin) {
            return Ratio::Flip(range.min(tmin));
        }
        // Second pass: among blocks within tolerance of the minimum, prefer a
        // large pivot (Bland mode: the smallest leaving column index).
        let tol = tmin + 1e-9 * (1.0 + tmin);
        let mut chosen: Option<(usize, f64, f64)> = None; // (pos, t, score)
        for &pos in &self.wnz {
            let w = self.va[pos];
            let c = self.basis[pos];
            let delta = -dir * w;
            let bound = self.blocking_bound(phase, c, delta);
            if bound.is_infinite() {
                continue;
            }
            let t = ((bound - self.x[c]) / delta).max(0.0);
            if t <= tol {
                let better = if self.bland {
                    chosen.map_or(true, |(p, _, _)| c < self.basis[p])
                } else {
                    let score = w.abs();
                    chosen.map_or(true, |(_, _, s)| score > s)
                };
                if better {
                    chosen = Some((pos, t, w.abs()));
                }
            }
        }
        let (pos, t, _) = chosen.expect("row block exists");
        let c = self.basis[pos];
        let delta = -dir * self.va[pos];
        let bound = self.blocking_bound(phase, c, delta);
        let to_upper = bound.is_finite() && bound == self.ub[c];
        Ratio::Pivot { pos, t, to_upper }
    }

    /// Applies a bound flip of the entering column by step `t`.
    fn apply_flip(&mut self, j: usize, dir: f64, t: f64) {
        let del = dir * t;
        for idx in 0..self.wnz.len() {
            let pos = self.wnz[idx];
            let c = self.basis[pos];
            self.x[c] -= del * self.va[pos];
        }
        self.x[j] += del;
        self.stat[j] = match self.stat[j] {
            VStat::AtLower => VStat::AtUpper,
            VStat::AtUpper => VStat::AtLower,
            s => s,
        };
        // Snap exactly onto the bound to stop drift.
        match self.stat[j] {
            VStat::AtLower => self.x[j] = self.lb[j],
            VStat::AtUpper => self.x[j] = self.ub[j],
            _ => {}
        }
    }

    /// Applies a basis change: column `j` enters with step `t` in direction
    /// `dir`; the variable at `pos` leaves to its `to_upper` bound.
    fn apply_pivot(&mut self, j: usize, dir: f64, t: f64, pos: usize, to_upper: bool) {
        let del = dir * t;
        let entering_val = self.x[j] + del;
        for idx in 0..self.wnz.len() {
            let p = self.wnz[idx];
            let c = self.basis[p];
            self.x[c] -= del * self.va[p];
        }
        let leaving = self.basis[pos];
        if to_upper {
            self.stat[leaving] = VStat::AtUpper;
            self.x[leaving] = self.ub[leaving];
        } else {
            self.stat[leaving] = VStat::AtLower;
            self.x[leaving] = self.lb[leaving];
        }
        self.basis[pos] = j;
        self.stat[j] = VStat::Basic;
        self.x[j] = entering_val;

        let pivot = self.va[pos];
        let entries: Vec<(usize, f64)> = self
            .wnz
            .iter()
            .filter(|&&p| p != pos)
            .map(|&p| (p, self.va[p]))
            .collect();
        self.factors
            .as_mut()
            .expect("factorized")
            .push_update(pos, pivot, entries);
    }

    fn track_degeneracy(&mut self, t: f64) {
        if t > 1e-10 {
            self.degen_run = 0;
            self.bland = false;
        } else {
            self.degen_run += 1;
            if self.degen_run > DEGEN_LIMIT {
                self.bland = true;
            }
        }
    }

    fn hit_limits(&self) -> Option<LpStatus> {
        if self.iters >= self.iter_limit {
            return Some(LpStatus::IterationLimit);
        }
        if self.iters % 256 == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Some(LpStatus::TimeLimit);
                }
            }
        }
        None
    }

    fn maybe_refactor(&mut self) -> Result<(), SolverError> {
        if self
            .factors
            .as_ref()
            .map_or(true, |f| f.num_updates() >= REFACTOR_LIMIT)
        {
            self.refactorize()?;
            self.compute_beta();
        }
        Ok(())
    }

    fn primal_loop(&mut self, phase: Phase) -> Result<LoopEnd, SolverError> {
        loop {
            if let Some(limit) = self.hit_limits() {
                return Ok(LoopEnd::Limit(limit));
            }
            if phase == Phase::One && self.total_infeasibility() <= self.ftol {
                return Ok(LoopEnd::Feasible);
            }
            self.compute_duals(phase);
            let Some((j, dir)) = self.price(phase) else {
                return Ok(LoopEnd::NoEntering);
            };
            self.ftran_column(j);
            match self.ratio_test(phase, j, dir) {
                Ratio::Unbounded => {
                    if phase == Phase::One {
                        // Cannot happen in exact arithmetic; treat as a
                        // numerical failure rather than mislabeling.
                        return Err(SolverError::Numerical(
                            "unbounded direction in phase 1".into(),
                        ));
                    }
                    return Ok(LoopEnd::Unbounded);
                }
                Ratio::Flip(t) => {
                    self.apply_flip(j, dir, t);
                    self.track_degeneracy(t);
                }
                Ratio::Pivot { pos, t, to_upper } => {
                    self.apply_pivot(j, dir, t, pos, to_upper);
                    self.track_degeneracy(t);
                    self.maybe_refactor()?;
                }
            }
            self.iters += 1;
        }
    }

    /// Full primal solve from the current basis: phase 1 if needed, then
    /// phase 2, with a final clean refactorization at optimality.
    pub(crate) fn optimize(&mut self) -> Result<LpStatus, SolverError> {
        if self.factors.is_none() {
            self.refactorize()?;
            self.compute_beta();
        }
        loop {
            if self.total_infeasibility() > self.ftol {
                match self.primal_loop(Phase::One)? {
                    LoopEnd::Feasible => {}
                    LoopEnd::NoEntering => return Ok(LpStatus::Infeasible),
                    LoopEnd::Unbounded => unreachable!("phase 1 rejects unbounded rays"),
                    LoopEnd::Limit(s) => return Ok(s),
                }
            }
            match self.primal_loop(Phase::Two)? {
                LoopEnd::NoEntering => {
                    // Refresh the iterate from a clean factorization; if
                    // drift pushed something out of bounds, go around again.
                    if self
                        .factors
                        .as_ref()
                        .is_some_and(|f| f.num_updates() > 0)
                    {
                        self.refactorize()?;
                        self.compute_beta();
                        if self.total_infeasibility() > self.ftol {
                            continue;
                        }
                        if self.price(Phase::Two).is_some() {
                            continue;
                        }
                    }
                    return Ok(LpStatus::Optimal);
                }
                LoopEnd::Unbounded => return Ok(LpStatus::Unbounded),
                LoopEnd::Feasible => unreachable!("phase 2 has no feasibility target"),
                LoopEnd::Limit(s) => return Ok(s),
            }
        }
    }

    /// True when every nonbasic reduced cost satisfies its sign condition.
    fn dual_feasible(&mut self) -> bool {
        self.compute_duals(Phase::Two);
        // Looser than the pricing tolerance: a parent-optimal basis carries
        // reduced costs that are only near-zero, and the dual loop tolerates
        // that slack.
        let tol = 1e3 * self.dtol;
        for j in 0..self.n + self.m {
            if self.stat[j] == VStat::Basic || self.ub[j] - self.lb[j] <= 0.0 {
                continue;
            }
            let d = self.reduced_cost(Phase::Two, j);
            let bad = match self.stat[j] {
                VStat::AtLower => d < -tol,
                VStat::AtUpper => d > tol,
                VStat::Free => d.abs() > tol,
                VStat::Basic => false,
            };
            if bad {
                return false;
            }
        }
        true
    }

    /// Dual simplex from a dual-feasible basis after bound changes. Returns
    /// `PrimalFeasible` once all basics are back inside their bounds.
    fn dual_loop(&mut self) -> Result<DualEnd, SolverError> {
        let mut best_viol = INF;
        let mut stall = 0usize;
        loop {
            if let Some(limit) = self.hit_limits() {
                return Ok(DualEnd::Limit(limit));
            }
            // Leaving: the most violated basic variable.
            let mut leave: Option<(usize, f64, bool)> = None; // (pos, viol, below)
            for pos in 0..self.m {
                let c = self.basis[pos];
                let v = self.x[c];
                let below = self.lb[c] - v;
                let above = v - self.ub[c];
                let (viol, is_below) = if below >= above { (below, true) } else { (above, false) };
                if viol > self.ftol && leave.map_or(true, |(_, w, _)| viol > w) {
                    leave = Some((pos, viol, is_below));
                }
            }
            let Some((pos, viol, below)) = leave else {
                return Ok(DualEnd::PrimalFeasible);
            };
            if viol < best_viol - 1e-12 {
                best_viol = viol;
                stall = 0;
            } else {
                stall += 1;
                if stall > DUAL_STALL_LIMIT {
                    return Ok(DualEnd::Stall);
                }
            }

            // Row pos of B^-1 A, via a unit btran.
            self.va.iter_mut().for_each(|v| *v = 0.0);
            self.va[pos] = 1.0;
            self.vb.copy_from_slice(&self.va);
            self.factors
                .as_ref()
                .expect("factorized")
                .btran(&mut self.vb, &mut self.lws);
            let rho = self.vb.clone();

            // Reduced costs for the admissibility ratio.
            self.compute_duals(Phase::Two);

            // Candidate entering columns, by the dual ratio with bound flips.
            let mut cands: Vec<(f64, usize, f64)> = Vec::new(); // (ratio, j, alpha)
            for j in 0..self.n + self.m {
                if self.stat[j] == VStat::Basic || self.ub[j] - self.lb[j] <= 0.0 {
                    continue;
                }
                let alpha = self.col_dot(j, &rho);
                if alpha.abs() <= ZERO_TOL {
                    continue;
                }
                let admissible = match self.stat[j] {
                    VStat::AtLower => {
                        if below {
                            alpha < 0.0
                        } else {
                            alpha > 0.0
                        }
                    }
                    VStat::AtUpper => {
                        if below {
                            alpha > 0.0
                        } else {
                            alpha < 0.0
                        }
                    }
                    VStat::Free => true,
                    VStat::Basic => false,
                };
                if admissible {
                    let d = self.reduced_cost(Phase::Two, j);
                    cands.push((d.abs() / alpha.abs(), j, alpha));
                }
            }
            if cands.is_empty() {
                return Ok(DualEnd::Infeasible);
            }
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

            // Bound-flipping walk: cheap flips absorb violation while the
            // dual slope stays positive; the first candidate that cannot be
            // flipped (or would close the slope) enters the basis.
            let mut slope = viol;
            let mut entering: Option<(usize, f64)> = None;
            let mut flips: Vec<usize> = Vec::new();
            for &(_, j, alpha) in &cands {
                let range = self.ub[j] - self.lb[j];
                if range.is_finite() && slope - alpha.abs() * range > self.ftol {
                    flips.push(j);
                    slope -= alpha.abs() * range;
                } else {
                    entering = Some((j, alpha));
                    break;
                }
            }
            if !flips.is_empty() {
                for &j in &flips {
                    self.stat[j] = match self.stat[j] {
                        VStat::AtLower => VStat::AtUpper,
                        VStat::AtUpper => VStat::AtLower,
                        s => s,
                    };
                    self.x[j] = match self.stat[j] {
                        VStat::AtLower => self.lb[j],
                        VStat::AtUpper => self.ub[j],
                        _ => 0.0,
                    };
                }
                self.compute_beta();
                // The flips may already have restored this row's
                // feasibility; if so, pick the leaving variable afresh.
                let c = self.basis[pos];
                let still_violated = if below {
                    self.lb[c] - self.x[c] > self.ftol
                } else {
                    self.x[c] - self.ub[c] > self.ftol
                };
                if entering.is_none() || !still_violated {
                    self.iters += 1;
                    continue;
                }
            }
            let Some((q, _alpha)) = entering else {
                self.iters += 1;
                continue;
            };

            // Standard dual pivot: q enters, the variable at pos leaves onto
            // its violated bound.
            self.ftran_column(q);
            let wr = self.va[pos];
            if wr.abs() < self.pivot_tol.max(1e-12) {
                return Ok(DualEnd::Stall);
            }
            let c = self.basis[pos];
            let target = if below { self.lb[c] } else { self.ub[c] };
            // x[c] may have moved if flips were applied above.
            let del = (self.x[c] - target) / wr;
            self.apply_pivot(q, 1.0, del, pos, !below);
            self.maybe_refactor()?;
            self.iters += 1;
        }
    }

    /// Re-optimizes after bound changes, warm-starting from `snap` when
    /// possible. Falls back to the cold primal path on any trouble.
    pub(crate) fn optimize_warm(&mut self, snap: &Snapshot) -> Result<LpStatus, SolverError> {
        self.install_snapshot(snap);
        self.refactorize()?;
        self.compute_beta();
        if self.total_infeasibility() > self.ftol && self.dual_feasible() {
            match self.dual_loop() {
                Ok(DualEnd::PrimalFeasible) | Ok(DualEnd::Stall) => {}
                Ok(DualEnd::Infeasible) => return Ok(LpStatus::Infeasible),
                Ok(DualEnd::Limit(s)) => return Ok(s),
                Err(_) => {
                    // Numerical trouble: restart cold below.
                    self.install_all_slack();
                }
            }
        }
        self.optimize()
    }
}

enum Ratio {
    Unbounded,
    /// The entering column hits its opposite bound first.
    Flip(f64),
    Pivot {
        pos: usize,
        t: f64,
        to_upper: bool,
    },
}

/// Solves the LP relaxation of `problem` (integrality is ignored). The
/// returned solution carries values for every variable when the status is
/// `Optimal`.
pub fn solve_lp(problem: &Problem, config: &SolverConfig) -> Result<Solution, SolverError> {
    problem.validate()?;
    let reduced = crate::presolve::presolve(problem, config);
    let pre = match reduced {
        crate::presolve::Presolved::Infeasible => return Ok(Solution::infeasible()),
        crate::presolve::Presolved::Reduced(pre) => pre,
    };
    let mut core = Core::new(&pre.problem, config)?;
    core.set_deadline(config.time_limit.map(|d| Instant::now() + d));
    core.install_all_slack();
    let status = core.optimize()?;
    Ok(finish(problem, &pre, &core, status))
}

/// Maps an internal outcome onto the public `Solution`, expanding presolve
/// substitutions.
pub(crate) fn finish(
    original: &Problem,
    pre: &crate::presolve::Reduction,
    core: &Core,
    status: LpStatus,
) -> Solution {
    match status {
        LpStatus::Optimal => {
            let values = pre.expand(|j| core.structural_value(j));
            let objective = original.objective_value(&values);
            Solution {
                status: SolveStatus::Optimal,
                values,
                objective,
                best_bound: objective,
                gap: 0.0,
            }
        }
        LpStatus::Infeasible => Solution::infeasible(),
        LpStatus::Unbounded => Solution::unbounded(),
        LpStatus::IterationLimit | LpStatus::TimeLimit => Solution {
            status: SolveStatus::IterationLimit,
            values: Vec::new(),
            objective: f64::NAN,
            best_bound: f64::NEG_INFINITY,
            gap: f64::INFINITY,
        },
    }
}
