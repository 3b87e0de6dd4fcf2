//! MPS interchange: a column-aligned writer and a matching reader.
//!
//! Row names are derived from constraint tags, truncated to eight characters
//! and uniquified; column names are synthetic (`C0000000`, ...). The full
//! name of every row and column is preserved in a sidecar file next to the
//! MPS file (`<name>.tags`), which the reader applies when present so a
//! write/read cycle reproduces the original names as well as the matrix.
//!
//! Numbers are printed in Rust's shortest round-trip form, so re-parsing
//! yields bit-identical coefficients. The writer always emits the same seven
//! sections in the same order (NAME, ROWS, COLUMNS, RHS, RANGES, BOUNDS,
//! ENDATA) with deterministic content: byte-identical output for identical
//! instances.
//!
//! The objective row is named `COST`; a constant objective offset is encoded
//! as a negated right-hand side on that row, matching the widely implemented
//! convention. Integer columns sit between `INTORG`/`INTEND` markers and
//! always get explicit bound lines, sidestepping the ambiguity about default
//! integer bounds between MPS dialects.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::problem::{Problem, Sense, SolverError, VarKind};

const OBJECTIVE_ROW: &str = "COST";

/// Mapping between MPS names and full instance names, in emission order.
#[derive(Debug, Clone, Default)]
pub struct MpsNames {
    /// `(mps_row_name, constraint_name)` per constraint.
    pub rows: Vec<(String, String)>,
    /// `(mps_column_name, variable_name)` per variable.
    pub cols: Vec<(String, String)>,
}

impl MpsNames {
    /// Translates an MPS column name back to the full variable name.
    pub fn variable_for(&self, mps_col: &str) -> Option<&str> {
        self.cols
            .iter()
            .find(|(short, _)| short == mps_col)
            .map(|(_, full)| full.as_str())
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Truncates to eight characters, appending a numeric suffix on collision.
fn unique_short(name: &str, used: &mut BTreeSet<String>) -> String {
    let base = sanitize(name);
    let mut cand: String = base.chars().take(8).collect();
    if cand.is_empty() {
        cand = "X".to_string();
    }
    let mut counter = 0usize;
    while used.contains(&cand) {
        counter += 1;
        let suffix = counter.to_string();
        let keep = 8usize.saturating_sub(suffix.len());
        cand = base.chars().take(keep).collect::<String>() + &suffix;
    }
    used.insert(cand.clone());
    cand
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Writes `problem` to `path` in MPS form plus the `<path>.tags` sidecar, and
/// returns the name mapping. Output is byte-deterministic.
pub fn write_mps(problem: &Problem, path: &Path) -> Result<MpsNames, SolverError> {
    problem.validate()?;
    let mut used = BTreeSet::new();
    used.insert(OBJECTIVE_ROW.to_string());

    let mut names = MpsNames::default();
    for con in problem.cons() {
        let short = unique_short(&con.name, &mut used);
        names.rows.push((short, con.name.clone()));
    }
    for (j, var) in problem.vars().iter().enumerate() {
        names.cols.push((format!("C{j:07}"), var.name.clone()));
    }

    let mut out = String::new();
    let name = if problem.name.is_empty() {
        "INSTANCE"
    } else {
        &problem.name
    };
    writeln!(out, "NAME          {}", sanitize(name)).unwrap();

    writeln!(out, "ROWS").unwrap();
    writeln!(out, " N  {OBJECTIVE_ROW}").unwrap();
    for (i, con) in problem.cons().iter().enumerate() {
        let letter = match con.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        writeln!(out, " {}  {}", letter, names.rows[i].0).unwrap();
    }

    // Column-major entries, in variable order; constraint terms in row order.
    let mut col_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.num_vars()];
    for r in 0..problem.num_cons() {
        for &(c, v) in problem.row(r) {
            col_terms[c].push((r, v));
        }
    }

    writeln!(out, "COLUMNS").unwrap();
    let mut integer_mode = false;
    let mut marker = 0usize;
    for (j, var) in problem.vars().iter().enumerate() {
        let want_integer = var.kind == VarKind::Integer;
        if want_integer != integer_mode {
            let tag = if want_integer { "'INTORG'" } else { "'INTEND'" };
            writeln!(
                out,
                "    M{:<7}  {:<8}  {}",
                marker, "'MARKER'", tag
            )
            .unwrap();
            marker += 1;
            integer_mode = want_integer;
        }
        let col = &names.cols[j].0;
        let mut wrote_any = false;
        if var.objective != 0.0 {
            writeln!(
                out,
                "    {:<8}  {:<8}  {}",
                col,
                OBJECTIVE_ROW,
                fmt_num(var.objective)
            )
            .unwrap();
            wrote_any = true;
        }
        for &(r, v) in &col_terms[j] {
            writeln!(out, "    {:<8}  {:<8}  {}", col, names.rows[r].0, fmt_num(v)).unwrap();
            wrote_any = true;
        }
        if !wrote_any {
            // Keep the column visible so a read-back reproduces it.
            writeln!(out, "    {:<8}  {:<8}  0", col, OBJECTIVE_ROW).unwrap();
        }
    }
    if integer_mode {
        writeln!(
            out,
            "    M{:<7}  {:<8}  {}",
            marker, "'MARKER'", "'INTEND'"
        )
        .unwrap();
    }

    writeln!(out, "RHS").unwrap();
    if problem.objective_offset != 0.0 {
        writeln!(
            out,
            "    {:<8}  {:<8}  {}",
            "RHS",
            OBJECTIVE_ROW,
            fmt_num(-problem.objective_offset)
        )
        .unwrap();
    }
    for (i, con) in problem.cons().iter().enumerate() {
        if con.rhs != 0.0 {
            writeln!(
                out,
                "    {:<8}  {:<8}  {}",
                "RHS",
                names.rows[i].0,
                fmt_num(con.rhs)
            )
            .unwrap();
        }
    }

    writeln!(out, "RANGES").unwrap();

    writeln!(out, "BOUNDS").unwrap();
    for (j, var) in problem.vars().iter().enumerate() {
        let col = &names.cols[j].0;
        let (l, u) = (var.lower, var.upper);
        let integer = var.kind == VarKind::Integer;
        if l == u {
            writeln!(out, " FX {:<8}  {:<8}  {}", "BND", col, fmt_num(l)).unwrap();
            continue;
        }
        if l == f64::NEG_INFINITY && u == f64::INFINITY {
            writeln!(out, " FR {:<8}  {:<8}", "BND", col).unwrap();
            continue;
        }
        if l == f64::NEG_INFINITY {
            writeln!(out, " MI {:<8}  {:<8}", "BND", col).unwrap();
        } else if l != 0.0 || (u.is_finite() && u < 0.0) {
            writeln!(out, " LO {:<8}  {:<8}  {}", "BND", col, fmt_num(l)).unwrap();
        } else if integer && u == f64::INFINITY {
            // Make the zero lower bound explicit alongside the PL below so
            // dialects with [0, 1] integer defaults read the right range.
            writeln!(out, " LO {:<8}  {:<8}  0", "BND", col).unwrap();
        }
        if u.is_finite() {
            writeln!(out, " UP {:<8}  {:<8}  {}", "BND", col, fmt_num(u)).unwrap();
        } else if integer {
            writeln!(out, " PL {:<8}  {:<8}", "BND", col).unwrap();
        }
    }

    writeln!(out, "ENDATA").unwrap();
    fs::write(path, out)?;

    let mut sidecar = String::new();
    for (short, full) in &names.rows {
        writeln!(sidecar, "row {short} {full}").unwrap();
    }
    for (short, full) in &names.cols {
        writeln!(sidecar, "col {short} {full}").unwrap();
    }
    fs::write(tags_path(path), sidecar)?;
    Ok(names)
}

fn tags_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".tags");
    PathBuf::from(os)
}

/// Reads an MPS file written by [`write_mps`] (or a compatible dialect),
/// applying the `<path>.tags` sidecar when present so names round-trip.
pub fn read_mps(path: &Path) -> Result<Problem, SolverError> {
    let text = fs::read_to_string(path)?;
    let mut problem = Problem::new("");

    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        Start,
        Rows,
        Columns,
        Rhs,
        Ranges,
        Bounds,
        Done,
    }

    struct RowInfo {
        name: String,
        sense: Sense,
        rhs: f64,
        terms: Vec<(usize, f64)>,
    }
    struct ColInfo {
        name: String,
        lower: Option<f64>,
        upper: Option<f64>,
        fixed: Option<f64>,
        free: bool,
        kind: VarKind,
        objective: f64,
    }

    let mut section = Section::Start;
    let mut objective_row: Option<String> = None;
    let mut offset = 0.0f64;
    let mut rows: Vec<RowInfo> = Vec::new();
    let mut row_index: std::collections::BTreeMap<String, usize> = Default::default();
    let mut cols: Vec<ColInfo> = Vec::new();
    let mut col_index: std::collections::BTreeMap<String, usize> = Default::default();
    let mut integer_mode = false;

    let bad = |line_no: usize, why: &str| -> SolverError {
        SolverError::Mps(format!("line {line_no}: {why}"))
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.is_empty() || raw.starts_with('*') {
            continue;
        }
        let header = !raw.starts_with(' ') && !raw.starts_with('\t');
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if header {
            section = match tokens[0] {
                "NAME" => {
                    if let Some(n) = tokens.get(1) {
                        problem.name = (*n).to_string();
                    }
                    Section::Start
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::Done,
                other => return Err(bad(line_no, &format!("unknown section {other:?}"))),
            };
            continue;
        }
        match section {
            Section::Start | Section::Done => {
                return Err(bad(line_no, "data before ROWS or after ENDATA"))
            }
            Section::Rows => {
                if tokens.len() != 2 {
                    return Err(bad(line_no, "expected sense and row name"));
                }
                match tokens[0] {
                    "N" => {
                        if objective_row.is_some() {
                            return Err(bad(line_no, "multiple objective rows"));
                        }
                        objective_row = Some(tokens[1].to_string());
                    }
                    s => {
                        let sense = match s {
                            "L" => Sense::Le,
                            "G" => Sense::Ge,
                            "E" => Sense::Eq,
                            _ => return Err(bad(line_no, &format!("unknown sense {s:?}"))),
                        };
                        if row_index.insert(tokens[1].to_string(), rows.len()).is_some() {
                            return Err(bad(line_no, "duplicate row name"));
                        }
                        rows.push(RowInfo {
                            name: tokens[1].to_string(),
                            sense,
                            rhs: 0.0,
                            terms: Vec::new(),
                        });
                    }
                }
            }
            Section::Columns => {
                if tokens.contains(&"'MARKER'") {
                    if tokens.contains(&"'INTORG'") {
                        integer_mode = true;
                    } else if tokens.contains(&"'INTEND'") {
                        integer_mode = false;
                    } else {
                        return Err(bad(line_no, "marker without INTORG/INTEND"));
                    }
                    continue;
                }
                if tokens.len() < 3 || tokens.len() % 2 == 0 {
                    return Err(bad(line_no, "expected column then row/value pairs"));
                }
                let col_id = match col_index.get(tokens[0]) {
                    Some(&j) => j,
                    None => {
                        let j = cols.len();
                        col_index.insert(tokens[0].to_string(), j);
                        cols.push(ColInfo {
                            name: tokens[0].to_string(),
                            lower: None,
                            upper: None,
                            fixed: None,
                            free: false,
                            kind: if integer_mode {
                                VarKind::Integer
                            } else {
                                VarKind::Continuous
                            },
                            objective: 0.0,
                        });
                        j
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| bad(line_no, &format!("bad number {:?}", pair[1])))?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        cols[col_id].objective = value;
                    } else if let Some(&r) = row_index.get(pair[0]) {
                        if value != 0.0 {
                            rows[r].terms.push((col_id, value));
                        }
                    } else {
                        return Err(bad(line_no, &format!("unknown row {:?}", pair[0])));
                    }
                }
            }
            Section::Rhs => {
                if tokens.len() < 3 || tokens.len() % 2 == 0 {
                    return Err(bad(line_no, "expected set name then row/value pairs"));
                }
                for pair in tokens[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| bad(line_no, &format!("bad number {:?}", pair[1])))?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        offset = -value;
                    } else if let Some(&r) = row_index.get(pair[0]) {
                        rows[r].rhs = value;
                    } else {
                        return Err(bad(line_no, &format!("unknown row {:?}", pair[0])));
                    }
                }
            }
            Section::Ranges => {
                return Err(bad(
                    line_no,
                    "RANGES entries are not supported by this dialect",
                ));
            }
            Section::Bounds => {
                if tokens.len() < 3 {
                    return Err(bad(line_no, "expected bound type, set, column"));
                }
                let kind = tokens[0];
                let col = tokens[2];
                let Some(&j) = col_index.get(col) else {
                    return Err(bad(line_no, &format!("bound for unknown column {col:?}")));
                };
                let value = || -> Result<f64, SolverError> {
                    tokens
                        .get(3)
                        .ok_or_else(|| bad(line_no, "missing bound value"))?
                        .parse()
                        .map_err(|_| bad(line_no, "bad bound value"))
                };
                match kind {
                    "UP" => cols[j].upper = Some(value()?),
                    "LO" => cols[j].lower = Some(value()?),
                    "FX" => cols[j].fixed = Some(value()?),
                    "MI" => cols[j].lower = Some(f64::NEG_INFINITY),
                    "PL" => cols[j].upper = Some(f64::INFINITY),
                    "FR" => cols[j].free = true,
                    "BV" => {
                        cols[j].kind = VarKind::Integer;
                        cols[j].lower = Some(0.0);
                        cols[j].upper = Some(1.0);
                    }
                    other => {
                        return Err(bad(line_no, &format!("unknown bound type {other:?}")))
                    }
                }
            }
        }
    }
    if section != Section::Done {
        return Err(SolverError::Mps("missing ENDATA".into()));
    }

    // Apply the sidecar name mapping when present.
    let tags = tags_path(path);
    if tags.exists() {
        for (idx, line) in fs::read_to_string(&tags)?.lines().enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.is_empty() {
                continue;
            }
            if parts.len() != 3 {
                return Err(SolverError::Mps(format!(
                    "tags line {}: expected `row|col short full`",
                    idx + 1
                )));
            }
            match parts[0] {
                "row" => {
                    if let Some(&r) = row_index.get(parts[1]) {
                        rows[r].name = parts[2].to_string();
                    }
                }
                "col" => {
                    if let Some(&c) = col_index.get(parts[1]) {
                        cols[c].name = parts[2].to_string();
                    }
                }
                other => {
                    return Err(SolverError::Mps(format!(
                        "tags line {}: unknown kind {other:?}",
                        idx + 1
                    )))
                }
            }
        }
    }

    problem.objective_offset = offset;
    for c in &cols {
        let (lower, upper) = if let Some(v) = c.fixed {
            (v, v)
        } else if c.free {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            let l = c.lower.unwrap_or(0.0);
            // An UP bound below zero on a default lower bound would be an
            // empty interval; mirror the common dialect that drops the lower
            // bound to -inf in that case only when LO was never given.
            let u = c.upper.unwrap_or(f64::INFINITY);
            if c.lower.is_none() && u < 0.0 {
                (f64::NEG_INFINITY, u)
            } else {
                (l, u)
            }
        };
        problem.add_var(c.name.clone(), lower, upper, c.kind, c.objective);
    }
    for r in rows {
        problem.add_con(
            r.name,
            r.sense,
            r.rhs,
            r.terms
                .into_iter()
                .map(|(c, v)| (crate::problem::VarId(c), v)),
        );
    }
    problem.validate()?;
    Ok(problem)
}

/// Structural equality of two instances: same variables (name, bounds, kind,
/// objective), same constraints (name, sense, rhs), and bit-identical
/// coefficient matrices.
pub fn instances_match(a: &Problem, b: &Problem) -> bool {
    if a.num_vars() != b.num_vars()
        || a.num_cons() != b.num_cons()
        || a.objective_offset != b.objective_offset
    {
        return false;
    }
    for (va, vb) in a.vars().iter().zip(b.vars()) {
        if va.name != vb.name
            || va.lower != vb.lower
            || va.upper != vb.upper
            || va.kind != vb.kind
            || va.objective != vb.objective
        {
            return false;
        }
    }
    for i in 0..a.num_cons() {
        let (ca, cb) = (&a.cons()[i], &b.cons()[i]);
        if ca.name != cb.name || ca.sense != cb.sense || ca.rhs != cb.rhs {
            return false;
        }
        if a.row(i) != b.row(i) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn sample_problem() -> Problem {
        let mut p = Problem::new("sample");
        let x = p.add_var("unit_flow.H2_syn.H2.h0017", 0.0, f64::INFINITY, VarKind::Continuous, -2160.0);
        let n = p.add_var("units_invested.H2_syn.t00", 0.0, 22.0, VarKind::Integer, 318.7);
        let s = p.add_var("node_state.BESS.h0003", 0.0, 10.0, VarKind::Continuous, 0.0);
        let f = p.add_var("free_helper", f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous, 0.0);
        p.add_con("Eq5:H2_syn>H2:h0017", Sense::Le, 0.0, vec![(x, 1.0), (n, -0.235)]);
        p.add_con("Balance:H2:h0017", Sense::Eq, 0.5, vec![(x, 1.0), (s, -0.9999)]);
        p.add_con("Cap:cand", Sense::Le, 22.0, vec![(n, 1.0)]);
        p.add_con("Free:anchor", Sense::Ge, -3.25, vec![(f, 1.0), (x, 0.0081)]);
        p.objective_offset = 12.5;
        p
    }

    #[test]
    fn write_then_read_reproduces_the_instance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.mps");
        let p = sample_problem();
        write_mps(&p, &path).unwrap();
        let q = read_mps(&path).unwrap();
        assert!(instances_match(&p, &q));
    }

    #[test]
    fn output_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let p = sample_problem();
        let path1 = dir.path().join("a.mps");
        let path2 = dir.path().join("b.mps");
        write_mps(&p, &path1).unwrap();
        write_mps(&p, &path2).unwrap();
        assert_eq!(fs::read(&path1).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn without_sidecar_names_are_short_but_matrix_survives() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.mps");
        let p = sample_problem();
        write_mps(&p, &path).unwrap();
        fs::remove_file(tags_path(&path)).unwrap();
        let q = read_mps(&path).unwrap();
        assert_eq!(q.num_vars(), p.num_vars());
        assert_eq!(q.num_cons(), p.num_cons());
        for i in 0..p.num_cons() {
            assert_eq!(p.row(i), q.row(i));
            assert_eq!(p.cons()[i].rhs, q.cons()[i].rhs);
        }
        assert_eq!(q.vars()[1].upper, 22.0);
        assert_eq!(q.vars()[1].kind, VarKind::Integer);
    }

    #[test]
    fn colliding_row_names_are_uniquified() {
        let mut p = Problem::new("t");
        let x = p.add_var("x", 0.0, 1.0, VarKind::Continuous, 1.0);
        for i in 0..12 {
            p.add_con(
                format!("LongTagName:{i}"),
                Sense::Le,
                i as f64,
                vec![(x, 1.0)],
            );
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.mps");
        let names = write_mps(&p, &path).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for (short, _) in &names.rows {
            assert!(short.len() <= 8);
            assert!(seen.insert(short.clone()), "duplicate short name {short}");
        }
        let q = read_mps(&path).unwrap();
        assert!(instances_match(&p, &q));
    }

    #[test]
    fn minimal_instance_has_all_seven_sections() {
        let mut p = Problem::new("tiny");
        let x = p.add_var("x", 0.0, 1.0, VarKind::Continuous, 1.0);
        p.add_con("only", Sense::Le, 1.0, vec![(x, 1.0)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.mps");
        write_mps(&p, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        for section in ["NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"] {
            assert!(
                text.lines().any(|l| l.starts_with(section)),
                "missing section {section}"
            );
        }
    }

    #[test]
    fn rejects_ranges_entries_and_missing_endata() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mps");
        fs::write(
            &path,
            "NAME t\nROWS\n N  COST\n L  R1\nCOLUMNS\n    C1  R1  1\nRHS\nRANGES\n    RNG  R1  5\nBOUNDS\nENDATA\n",
        )
        .unwrap();
        assert!(matches!(read_mps(&path), Err(SolverError::Mps(_))));

        fs::write(&path, "NAME t\nROWS\n N  COST\n").unwrap();
        assert!(matches!(read_mps(&path), Err(SolverError::Mps(_))));
    }

    #[test]
    fn objective_offset_round_trips_via_negated_rhs() {
        let mut p = Problem::new("t");
        let x = p.add_var("x", 0.0, 5.0, VarKind::Continuous, 3.0);
        p.add_con("r", Sense::Le, 4.0, vec![(x, 1.0)]);
        p.objective_offset = -7.25;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.mps");
        write_mps(&p, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("7.25"), "offset should appear negated: {text}");
        let q = read_mps(&path).unwrap();
        assert_eq!(q.objective_offset, -7.25);
    }

    #[test]
    fn awkward_coefficients_round_trip_bitwise() {
        let mut p = Problem::new("t");
        let x = p.add_var("x", 0.0, f64::INFINITY, VarKind::Continuous, 0.1 + 0.2);
        let y = p.add_var("y", -1.0e-7, 9.9999, VarKind::Continuous, -0.0081);
        p.add_con(
            "r",
            Sense::Ge,
            1.0 / 3.0,
            vec![(x, 53.6), (y, 2.0_f64.powi(-40))],
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("awk.mps");
        write_mps(&p, &path).unwrap();
        let q = read_mps(&path).unwrap();
        assert!(instances_match(&p, &q));
    }
}
