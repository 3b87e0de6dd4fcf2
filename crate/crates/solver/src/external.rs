//! Hand-off to an external MILP solver through the filesystem.
//!
//! The contract is a command template containing `{mps}` and `{sol}`
//! placeholders, e.g. `my-solver {mps} --out {sol}`. The instance is written
//! as MPS (with its name sidecar), the command runs via the shell, and the
//! solution file is read back as `name value` lines — either full variable
//! names or the short MPS column names. Solvers with a different output
//! format need a small wrapper script; the template makes that explicit
//! rather than guessing per-solver formats here.
//!
//! Every returned point is audited against the original instance at the
//! configured feasibility tolerance before being accepted. External output is
//! untrusted input: a claimed solution that violates a constraint surfaces as
//! [`SolverError::AuditFailure`] instead of propagating downstream.

use std::path::Path;
use std::process::Command;

use crate::mps::write_mps;
use crate::problem::{audit, Problem, Solution, SolverConfig, SolverError};
use crate::solution::read_solution;

/// Solves `problem` by invoking `template` (with `{mps}`/`{sol}` expanded)
/// in a temporary directory. Returns the audited solution; its status is
/// `GapLimit` because no bound certificate crosses the file boundary.
pub fn external_solve(
    problem: &Problem,
    template: &str,
    config: &SolverConfig,
) -> Result<Solution, SolverError> {
    if !template.contains("{mps}") || !template.contains("{sol}") {
        return Err(SolverError::External(
            "command template must contain {mps} and {sol} placeholders".into(),
        ));
    }
    let dir = tempfile::tempdir()?;
    let mps_path = dir.path().join("instance.mps");
    let sol_path = dir.path().join("instance.sol");
    run_external(problem, template, &mps_path, &sol_path, config)
}

/// As [`external_solve`], but with caller-chosen file locations so the MPS
/// and solution files survive for inspection.
pub fn run_external(
    problem: &Problem,
    template: &str,
    mps_path: &Path,
    sol_path: &Path,
    config: &SolverConfig,
) -> Result<Solution, SolverError> {
    let names = write_mps(problem, mps_path)?;
    let command = template
        .replace("{mps}", &mps_path.to_string_lossy())
        .replace("{sol}", &sol_path.to_string_lossy());

    let output = Command::new("sh").arg("-c").arg(&command).output()?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let excerpt: String = stderr.chars().take(400).collect();
        return Err(SolverError::External(format!(
            "command {command:?} exited with {}: {}",
            output.status,
            excerpt.trim()
        )));
    }
    if !sol_path.exists() {
        return Err(SolverError::External(format!(
            "command {command:?} succeeded but wrote no solution file"
        )));
    }

    let solution = read_solution(sol_path, problem, Some(&names))?;
    if solution.values.is_empty() {
        // Empty file: the solver ran but produced no assignment.
        return Ok(solution);
    }
    let report = audit(problem, &solution.values);
    if !report.within(config.feasibility_tol) {
        return Err(SolverError::AuditFailure(report.describe()));
    }
    Ok(solution)
}
