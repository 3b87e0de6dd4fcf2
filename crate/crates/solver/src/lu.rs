//! Sparse LU factorization of the simplex basis, with product-form updates.
//!
//! The factorization is a left-looking method: each basis column is solved
//! against the already-factored columns (a sparse lower-triangular solve whose
//! nonzero pattern is found by depth-first reachability), then the largest
//! remaining entry is chosen as the pivot. Columns are processed in order of
//! increasing nonzero count, which keeps fill-in modest on the
//! near-triangular bases that network-style models produce.
//!
//! A rank-deficient basis does not abort the factorization: deficient columns
//! are skipped and reported together with the rows that never received a
//! pivot, so the caller can swap those columns for the slacks of the
//! unpivoted rows (which are provably not in the basis) and refactorize.
//!
//! Basis changes between refactorizations are absorbed as product-form eta
//! vectors; [`Factors::ftran`] and [`Factors::btran`] apply them after/before
//! the triangular solves. The simplex driver refactorizes once the eta file
//! grows past a threshold.

/// Rank deficiency report. `failed_cols` are basis positions whose columns
/// were linearly dependent on the others; `unpivoted_rows` are the rows left
/// without a pivot. Both lists are ascending and have equal length.
#[derive(Debug, Clone)]
pub struct Singular {
    pub failed_cols: Vec<usize>,
    pub unpivoted_rows: Vec<usize>,
}

/// One product-form update: the entering column expressed in the current
/// basis (`w = B^-1 a`), pivoted at basis position `pos`.
#[derive(Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    /// Off-pivot nonzeros of `w`, in basis-position space.
    entries: Vec<(usize, f64)>,
}

/// LU factors of a basis matrix plus any eta updates applied since the last
/// refactorization.
#[derive(Debug)]
pub struct Factors {
    m: usize,
    /// Column `k` of L below the unit diagonal, in original row indices.
    l_cols: Vec<Vec<(usize, f64)>>,
    /// Column `k` of U above the diagonal, indexed by elimination step.
    u_cols: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
    /// Elimination step -> original row chosen as pivot.
    pivot_rows: Vec<usize>,
    /// Elimination step -> basis position whose column was processed.
    col_order: Vec<usize>,
    etas: Vec<Eta>,
}

/// Scratch buffer reused across solves to avoid per-call allocation.
pub struct Workspace {
    step: Vec<f64>,
}

impl Workspace {
    pub fn new(m: usize) -> Self {
        Workspace { step: vec![0.0; m] }
    }
}

impl Factors {
    /// Factorizes the basis given as `m` sparse columns (row, value). Entries
    /// smaller than `pivot_tol` are never accepted as pivots.
    pub fn factorize(
        m: usize,
        cols: &[Vec<(usize, f64)>],
        pivot_tol: f64,
    ) -> Result<Factors, Singular> {
        assert_eq!(cols.len(), m, "basis must be square");
        const UNSET: usize = usize::MAX;

        // Process sparser columns first; ties broken by position for
        // determinism.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&j| (cols[j].len(), j));

        let mut l_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        let mut u_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        let mut u_diag: Vec<f64> = Vec::with_capacity(m);
        let mut pivot_rows: Vec<usize> = Vec::with_capacity(m);
        let mut col_order: Vec<usize> = Vec::with_capacity(m);
        let mut failed_cols: Vec<usize> = Vec::new();
        // Original row -> elimination step, or UNSET while unpivoted.
        let mut row_step: Vec<usize> = vec![UNSET; m];

        let mut work: Vec<f64> = vec![0.0; m];
        let mut touched: Vec<usize> = Vec::with_capacity(64);
        // Depth-first search state for the symbolic lower solve.
        let mut visited: Vec<bool> = vec![false; m];
        let mut dfs_stack: Vec<(usize, usize)> = Vec::with_capacity(64);
        let mut topo: Vec<usize> = Vec::with_capacity(64);

        for &j in &order {
            // Scatter column j into the dense accumulator.
            for &(r, v) in &cols[j] {
                work[r] = v;
                touched.push(r);
            }

            // Symbolic phase: find, in topological order, the elimination
            // steps whose L columns touch this one.
            topo.clear();
            for &(r, _) in &cols[j] {
                let start = row_step[r];
                if start == UNSET || visited[start] {
                    continue;
                }
                visited[start] = true;
                dfs_stack.push((start, 0));
                while let Some(&mut (t, ref mut child)) = dfs_stack.last_mut() {
                    let lcol = &l_cols[t];
                    let mut descended = false;
                    while *child < lcol.len() {
                        let next_row = lcol[*child].0;
                        *child += 1;
                        let s = row_step[next_row];
                        if s != UNSET && !visited[s] {
                            visited[s] = true;
                            dfs_stack.push((s, 0));
                            descended = true;
                            break;
                        }
                    }
                    if !descended {
                        dfs_stack.pop();
                        topo.push(t);
                    }
                }
            }

            // Numeric phase: apply the reached steps, ancestors first
            // (reverse postorder).
            for &t in topo.iter().rev() {
                visited[t] = false;
                let multiplier = work[pivot_rows[t]];
                if multiplier != 0.0 {
                    for &(r, lv) in &l_cols[t] {
                        if work[r] == 0.0 {
                            touched.push(r);
                        }
                        work[r] -= multiplier * lv;
                    }
                }
            }

            // Pivot: largest magnitude among rows without a pivot; smallest
            // row index on ties.
            let mut pivot_row = UNSET;
            let mut pivot_mag = 0.0_f64;
            for &r in &touched {
                if row_step[r] == UNSET {
                    let mag = work[r].abs();
                    if mag > pivot_mag || (mag == pivot_mag && mag > 0.0 && r < pivot_row) {
                        pivot_mag = mag;
                        pivot_row = r;
                    }
                }
            }
            if pivot_row == UNSET || pivot_mag < pivot_tol {
                // Linearly dependent column: skip it and keep going so the
                // full deficiency is known at the end.
                failed_cols.push(j);
                for &r in &touched {
                    work[r] = 0.0;
                }
                touched.clear();
                continue;
            }
            let pivot_val = work[pivot_row];

            // Gather U (already-pivoted rows) and L (remaining rows, scaled).
            let mut ucol = Vec::new();
            let mut lcol = Vec::new();
            touched.sort_unstable();
            touched.dedup();
            for &r in &touched {
                let v = work[r];
                work[r] = 0.0;
                if v == 0.0 || r == pivot_row {
                    continue;
                }
                match row_step[r] {
                    UNSET => lcol.push((r, v / pivot_val)),
                    t => ucol.push((t, v)),
                }
            }
            touched.clear();

            row_step[pivot_row] = l_cols.len();
            l_cols.push(lcol);
            u_cols.push(ucol);
            u_diag.push(pivot_val);
            pivot_rows.push(pivot_row);
            col_order.push(j);
        }

        if !failed_cols.is_empty() {
            failed_cols.sort_unstable();
            let unpivoted_rows: Vec<usize> =
                (0..m).filter(|&r| row_step[r] == UNSET).collect();
            debug_assert_eq!(failed_cols.len(), unpivoted_rows.len());
            return Err(Singular {
                failed_cols,
                unpivoted_rows,
            });
        }

        Ok(Factors {
            m,
            l_cols,
            u_cols,
            u_diag,
            pivot_rows,
            col_order,
            etas: Vec::new(),
        })
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// Records a basis change: the column entering at basis position `pos`,
    /// already expressed in the current basis as `w = B^-1 a`. `entries` are
    /// the off-pivot nonzeros of `w` and `pivot` is `w[pos]`.
    pub fn push_update(&mut self, pos: usize, pivot: f64, entries: Vec<(usize, f64)>) {
        debug_assert!(entries.iter().all(|&(i, _)| i != pos));
        self.etas.push(Eta {
            pos,
            pivot,
            entries,
        });
    }

    /// Solves `B x = b`. On entry `v` holds `b` indexed by row; on exit it
    /// holds `x` indexed by basis position.
    pub fn ftran(&self, v: &mut [f64], ws: &mut Workspace) {
        let m = self.m;
        debug_assert_eq!(v.len(), m);

        // L solve, in row space.
        for k in 0..m {
            let multiplier = v[self.pivot_rows[k]];
            if multiplier != 0.0 {
                for &(r, lv) in &self.l_cols[k] {
                    v[r] -= multiplier * lv;
                }
            }
        }
        // U solve, in elimination-step space.
        let y = &mut ws.step;
        for k in 0..m {
            y[k] = v[self.pivot_rows[k]];
        }
        for k in (0..m).rev() {
            let z = y[k] / self.u_diag[k];
            y[k] = z;
            if z != 0.0 {
                for &(t, uv) in &self.u_cols[k] {
                    y[t] -= z * uv;
                }
            }
        }
        // Map to basis-position space.
        for k in 0..m {
            v[self.col_order[k]] = y[k];
        }
        // Product-form updates, oldest first.
        for eta in &self.etas {
            let piv = v[eta.pos] / eta.pivot;
            v[eta.pos] = piv;
            if piv != 0.0 {
                for &(i, w) in &eta.entries {
                    v[i] -= w * piv;
                }
            }
        }
    }

    /// Solves `B^T y = c`. On entry `v` holds `c` indexed by basis position;
    /// on exit it holds `y` indexed by row.
    pub fn btran(&self, v: &mut [f64], ws: &mut Workspace) {
        let m = self.m;
        debug_assert_eq!(v.len(), m);

        // Transposed updates, newest first.
        for eta in self.etas.iter().rev() {
            let mut acc = v[eta.pos];
            for &(i, w) in &eta.entries {
                acc -= w * v[i];
            }
            v[eta.pos] = acc / eta.pivot;
        }
        // U^T solve (forward), in elimination-step space.
        let w = &mut ws.step;
        for k in 0..m {
            w[k] = v[self.col_order[k]];
        }
        for k in 0..m {
            let mut acc = w[k];
            for &(t, uv) in &self.u_cols[k] {
                acc -= uv * w[t];
            }
            w[k] = acc / self.u_diag[k];
        }
        // L^T solve (backward), writing row space.
        for k in (0..m).rev() {
            let mut acc = w[k];
            for &(r, lv) in &self.l_cols[k] {
                acc -= lv * v[r];
            }
            v[self.pivot_rows[k]] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense reference solve via Gaussian elimination with partial pivoting.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let m = b.len();
        let mut aug: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row: Vec<f64> = (0..m).map(|j| a[i][j]).collect();
                row.push(b[i]);
                row
            })
            .collect();
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
                .unwrap();
            aug.swap(col, piv);
            let pv = aug[col][col];
            assert!(pv.abs() > 1e-12, "singular test matrix");
            for i in 0..m {
                if i != col && aug[i][col] != 0.0 {
                    let f = aug[i][col] / pv;
                    for j in col..=m {
                        aug[i][j] -= f * aug[col][j];
                    }
                }
            }
        }
        (0..m).map(|i| aug[i][m] / aug[i][i]).collect()
    }

    fn to_sparse_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|j| {
                (0..m)
                    .filter_map(|i| (a[i][j] != 0.0).then_some((i, a[i][j])))
                    .collect()
            })
            .collect()
    }

    /// Deterministic pseudo-random matrix with controlled sparsity.
    fn test_matrix(m: usize, seed: u64, density: f64) -> Vec<Vec<f64>> {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut a = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                if next() < density {
                    a[i][j] = next() * 4.0 - 2.0;
                }
            }
            // Guarantee nonsingularity with a dominant diagonal.
            a[i][i] += 5.0 + next();
        }
        a
    }

    #[test]
    fn ftran_btran_match_dense_solves() {
        for seed in 0..8 {
            let m = 17;
            let a = test_matrix(m, seed, 0.2);
            let cols = to_sparse_cols(&a);
            let f = Factors::factorize(m, &cols, 1e-9).expect("factorize");
            let mut ws = Workspace::new(m);

            let b: Vec<f64> = (0..m).map(|i| (i as f64 * 0.7 + seed as f64).sin()).collect();
            let mut x = b.clone();
            f.ftran(&mut x, &mut ws);
            let x_ref = dense_solve(&a, &b);
            for i in 0..m {
                assert!((x[i] - x_ref[i]).abs() < 1e-8, "ftran mismatch at {i}");
            }

            let at: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| a[j][i]).collect()).collect();
            let mut y = b.clone();
            f.btran(&mut y, &mut ws);
            let y_ref = dense_solve(&at, &b);
            for i in 0..m {
                assert!((y[i] - y_ref[i]).abs() < 1e-8, "btran mismatch at {i}");
            }
        }
    }

    #[test]
    fn eta_update_matches_refactorization() {
        let m = 12;
        let a = test_matrix(m, 3, 0.3);
        let cols = to_sparse_cols(&a);
        let f0 = Factors::factorize(m, &cols, 1e-9).expect("factorize");
        let mut ws = Workspace::new(m);

        // Replace basis position 4 with a new column.
        let new_col: Vec<f64> = (0..m).map(|i| ((i * 3 + 1) as f64 * 0.37).cos()).collect();
        let mut w = new_col.clone();
        f0.ftran(&mut w, &mut ws);
        let mut f_eta = Factors::factorize(m, &cols, 1e-9).expect("factorize");
        let entries: Vec<(usize, f64)> = w
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != 4 && v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        f_eta.push_update(4, w[4], entries);

        let mut a2 = a.clone();
        for (i, row) in a2.iter_mut().enumerate() {
            row[4] = new_col[i];
        }
        let cols2 = to_sparse_cols(&a2);
        let f_fresh = Factors::factorize(m, &cols2, 1e-9).expect("refactorize");

        let b: Vec<f64> = (0..m).map(|i| (i as f64).cos() * 2.0).collect();
        let mut x_eta = b.clone();
        let mut x_fresh = b.clone();
        f_eta.ftran(&mut x_eta, &mut ws);
        f_fresh.ftran(&mut x_fresh, &mut ws);
        for i in 0..m {
            assert!((x_eta[i] - x_fresh[i]).abs() < 1e-8, "eta ftran mismatch at {i}");
        }

        let mut y_eta = b.clone();
        let mut y_fresh = b;
        f_eta.btran(&mut y_eta, &mut ws);
        f_fresh.btran(&mut y_fresh, &mut ws);
        for i in 0..m {
            assert!((y_eta[i] - y_fresh[i]).abs() < 1e-8, "eta btran mismatch at {i}");
        }
    }

    #[test]
    fn singular_basis_reports_deficiency_pairs() {
        // Columns 0 and 2 are identical; exactly one of them fails, and
        // exactly one row is left unpivoted.
        let cols = vec![
            vec![(0, 1.0), (1, 2.0)],
            vec![(1, 1.0), (2, 3.0)],
            vec![(0, 1.0), (1, 2.0)],
        ];
        let err = Factors::factorize(3, &cols, 1e-9).unwrap_err();
        assert_eq!(err.failed_cols.len(), 1);
        assert_eq!(err.unpivoted_rows.len(), 1);
        assert!(err.failed_cols[0] == 0 || err.failed_cols[0] == 2);
    }

    #[test]
    fn identity_roundtrip() {
        let cols: Vec<Vec<(usize, f64)>> = (0..5).map(|i| vec![(i, 1.0)]).collect();
        let f = Factors::factorize(5, &cols, 1e-9).unwrap();
        let mut ws = Workspace::new(5);
        let mut v = vec![1.0, -2.0, 3.0, -4.0, 5.0];
        f.ftran(&mut v, &mut ws);
        assert_eq!(v, vec![1.0, -2.0, 3.0, -4.0, 5.0]);
        f.btran(&mut v, &mut ws);
        assert_eq!(v, vec![1.0, -2.0, 3.0, -4.0, 5.0]);
    }
}
