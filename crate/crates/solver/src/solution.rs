//! Plain-text solution files: one `name value` pair per line.
//!
//! Lines starting with `#` are comments; blank lines are skipped. Variables
//! absent from the file default to zero, a duplicated name is an error, and a
//! name that matches no variable of the instance is an error. A file with no
//! assignments at all is treated as "the solver produced nothing" and yields
//! a [`SolveStatus::GapLimit`] solution with no values rather than an
//! all-zero vector that would silently masquerade as a result.
//!
//! When reading output of an external process, variable names may be the
//! short MPS column names; pass the [`MpsNames`] mapping from the write step
//! and both spellings are accepted.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::mps::MpsNames;
use crate::problem::{Problem, Solution, SolveStatus, SolverError};

/// Writes `solution` for `problem` to `path`, one `name value` line per
/// variable, preceded by comment lines recording status and objective.
pub fn write_solution(
    path: &Path,
    problem: &Problem,
    solution: &Solution,
) -> Result<(), SolverError> {
    let mut out = String::new();
    writeln!(out, "# status {:?}", solution.status).unwrap();
    if solution.objective.is_finite() {
        writeln!(out, "# objective {}", solution.objective).unwrap();
    }
    if solution.values.len() == problem.num_vars() {
        for (var, value) in problem.vars().iter().zip(&solution.values) {
            writeln!(out, "{} {}", var.name, value).unwrap();
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a solution file for `problem`. `names` optionally maps short MPS
/// column names back to variable names. The returned solution carries status
/// [`SolveStatus::GapLimit`]: a file asserts a feasible point, not a bound.
pub fn read_solution(
    path: &Path,
    problem: &Problem,
    names: Option<&MpsNames>,
) -> Result<Solution, SolverError> {
    let text = fs::read_to_string(path)?;

    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (j, var) in problem.vars().iter().enumerate() {
        index.insert(var.name.as_str(), j);
    }
    let mut short_index: BTreeMap<&str, usize> = BTreeMap::new();
    if let Some(names) = names {
        for (short, full) in &names.cols {
            if let Some(&j) = index.get(full.as_str()) {
                short_index.insert(short.as_str(), j);
            }
        }
    }

    let mut values = vec![0.0f64; problem.num_vars()];
    let mut seen = vec![false; problem.num_vars()];
    let mut any = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let line_no = idx + 1;
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value_str), None) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(SolverError::MalformedLine {
                line: line_no,
                reason: "expected `name value`".into(),
            });
        };
        let j = match index.get(name).or_else(|| short_index.get(name)) {
            Some(&j) => j,
            None => return Err(SolverError::UnknownVariable(name.to_string())),
        };
        if seen[j] {
            return Err(SolverError::MalformedLine {
                line: line_no,
                reason: format!("duplicate assignment for {name:?}"),
            });
        }
        let value: f64 = value_str.parse().map_err(|_| SolverError::MalformedLine {
            line: line_no,
            reason: format!("bad number {value_str:?}"),
        })?;
        seen[j] = true;
        values[j] = value;
        any = true;
    }

    if !any {
        return Ok(Solution {
            status: SolveStatus::GapLimit,
            values: Vec::new(),
            objective: f64::NAN,
            best_bound: f64::NEG_INFINITY,
            gap: f64::INFINITY,
        });
    }

    let objective = problem.objective_value(&values);
    Ok(Solution {
        status: SolveStatus::GapLimit,
        values,
        objective,
        best_bound: f64::NEG_INFINITY,
        gap: f64::INFINITY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Sense, VarKind};

    fn problem() -> Problem {
        let mut p = Problem::new("t");
        let x = p.add_var("unit_flow.H2_syn.H2.h0017", 0.0, 10.0, VarKind::Continuous, 2.0);
        let y = p.add_var("units_on.H2_syn.h0017", 0.0, 3.0, VarKind::Integer, 1.0);
        p.add_con("cap", Sense::Le, 12.0, vec![(x, 1.0), (y, 1.0)]);
        p
    }

    #[test]
    fn round_trips_values_and_defaults_missing_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.sol");
        fs::write(&path, "# comment\nunit_flow.H2_syn.H2.h0017 0.891\n\n").unwrap();
        let sol = read_solution(&path, &problem(), None).unwrap();
        assert_eq!(sol.values, vec![0.891, 0.0]);
        assert!((sol.objective - 2.0 * 0.891).abs() < 1e-15);
        assert_eq!(sol.status, SolveStatus::GapLimit);
    }

    #[test]
    fn empty_file_reports_gap_limit_without_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.sol");
        fs::write(&path, "# nothing here\n").unwrap();
        let sol = read_solution(&path, &problem(), None).unwrap();
        assert_eq!(sol.status, SolveStatus::GapLimit);
        assert!(sol.values.is_empty());
    }

    #[test]
    fn duplicate_assignment_is_a_malformed_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.sol");
        fs::write(
            &path,
            "units_on.H2_syn.h0017 1\nunits_on.H2_syn.h0017 2\n",
        )
        .unwrap();
        let err = read_solution(&path, &problem(), None).unwrap_err();
        assert!(matches!(err, SolverError::MalformedLine { line: 2, .. }));
    }

    #[test]
    fn unknown_variable_is_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("unk.sol");
        fs::write(&path, "no_such_var 1\n").unwrap();
        let err = read_solution(&path, &problem(), None).unwrap_err();
        assert!(matches!(err, SolverError::UnknownVariable(n) if n == "no_such_var"));
    }

    #[test]
    fn short_mps_names_resolve_through_the_mapping() {
        let p = problem();
        let dir = tempfile::tempdir().unwrap();
        let mps = dir.path().join("m.mps");
        let names = crate::mps::write_mps(&p, &mps).unwrap();
        let path = dir.path().join("short.sol");
        fs::write(&path, "C0000000 4.5\nC0000001 2\n").unwrap();
        let sol = read_solution(&path, &p, Some(&names)).unwrap();
        assert_eq!(sol.values, vec![4.5, 2.0]);
    }

    #[test]
    fn write_then_read_preserves_values() {
        let p = problem();
        let sol = Solution {
            status: SolveStatus::Optimal,
            values: vec![0.25, 3.0],
            objective: 3.5,
            best_bound: 3.5,
            gap: 0.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.sol");
        write_solution(&path, &p, &sol).unwrap();
        let back = read_solution(&path, &p, None).unwrap();
        assert_eq!(back.values, sol.values);
    }

    #[test]
    fn garbled_line_reports_its_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.sol");
        fs::write(&path, "# ok\nunit_flow.H2_syn.H2.h0017 1 extra\n").unwrap();
        let err = read_solution(&path, &problem(), None).unwrap_err();
        assert!(matches!(err, SolverError::MalformedLine { line: 2, .. }));
    }
}
