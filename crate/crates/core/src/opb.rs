//! OPB instance files and the `s` / `o` / `v` solver output protocol of the
//! pseudo-Boolean competitions.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::pb::{Assignment, Lit, PbConstraint, PbRelation, PboInstance, Term, Var};
use crate::solver::{SolveOutcome, SolveStatus};

fn write_terms(out: &mut String, terms: &[Term]) {
    for t in terms {
        let _ = write!(out, "{:+} {} ", t.coef, t.lit);
    }
}

/// Serializes an instance. Terms are written in ascending variable order.
pub fn emit_opb(instance: &PboInstance) -> String {
    let mut out = format!(
        "* #variable= {} #constraint= {}\nmin: ",
        instance.num_vars,
        instance.constraints.len()
    );
    let mut objective = instance.objective.clone();
    objective.sort_by_key(|t| t.lit.var());
    write_terms(&mut out, &objective);
    out.push_str(";\n");
    for c in &instance.constraints {
        let mut terms = c.terms.clone();
        terms.sort_by_key(|t| t.lit.var());
        write_terms(&mut out, &terms);
        let rel = match c.relation {
            PbRelation::AtLeast => ">=",
            PbRelation::Equal => "=",
        };
        let _ = writeln!(out, "{rel} {} ;", c.bound);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OpbError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}

fn syntax(line: usize, reason: impl Into<String>) -> OpbError {
    OpbError::Syntax { line, reason: reason.into() }
}

fn parse_lit(tok: &str) -> Option<Lit> {
    let (negated, rest) = match tok.strip_prefix('~') {
        Some(r) => (true, r),
        None => (false, tok),
    };
    let n: u32 = rest.strip_prefix('x')?.parse().ok()?;
    Some(Lit::new(Var::from_number(n)?, negated))
}

fn parse_terms(tokens: &[&str], line: usize) -> Result<Vec<Term>, OpbError> {
    let mut terms = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = tokens[i];
        if let Some(lit) = parse_lit(tok) {
            terms.push(Term::new(1, lit));
            i += 1;
            continue;
        }
        let coef: i64 = tok
            .parse()
            .map_err(|_| syntax(line, format!("expected coefficient, got `{tok}`")))?;
        let lit_tok = tokens
            .get(i + 1)
            .ok_or_else(|| syntax(line, "coefficient without literal"))?;
        let lit = parse_lit(lit_tok).ok_or_else(|| syntax(line, format!("bad literal `{lit_tok}`")))?;
        terms.push(Term::new(coef, lit));
        i += 2;
    }
    Ok(terms)
}

/// Reads linear OPB. `<=` constraints are stored in `>=` form with negated
/// coefficients; everything else is kept term for term.
pub fn parse_opb(text: &str) -> Result<PboInstance, OpbError> {
    let mut declared_vars: Option<usize> = None;
    let mut instance = PboInstance::default();
    let mut pending = String::new();
    let mut pending_line = 0;
    let mut seen_objective = false;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('*') {
            if declared_vars.is_none() {
                let mut it = comment.split_whitespace();
                while let Some(tok) = it.next() {
                    if tok == "#variable=" {
                        declared_vars = it.next().and_then(|n| n.parse().ok());
                    }
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if pending.is_empty() {
            pending_line = line_no;
        }
        for part in line.split_inclusive(';') {
            pending.push(' ');
            pending.push_str(part);
            if !part.ends_with(';') {
                continue;
            }
            let stmt = core::mem::take(&mut pending);
            let stmt = stmt.trim().trim_end_matches(';').trim();
            if let Some(rest) = stmt.strip_prefix("min:") {
                if seen_objective || !instance.constraints.is_empty() {
                    return Err(syntax(pending_line, "objective must come first and only once"));
                }
                let toks: Vec<&str> = rest.split_whitespace().collect();
                instance.objective = parse_terms(&toks, pending_line)?;
                seen_objective = true;
            } else {
                instance.constraints.push(parse_constraint(stmt, pending_line)?);
            }
            pending_line = line_no;
        }
    }
    if !pending.trim().is_empty() {
        return Err(syntax(pending_line, "statement not terminated by `;`"));
    }
    let max_var = instance
        .constraints
        .iter()
        .filter_map(PbConstraint::max_var)
        .chain(instance.objective.iter().map(|t| t.lit.var()))
        .map(|v| v.index() + 1)
        .max()
        .unwrap_or(0);
    instance.num_vars = declared_vars.unwrap_or(0).max(max_var);
    Ok(instance)
}

fn parse_constraint(stmt: &str, line: usize) -> Result<PbConstraint, OpbError> {
    let toks: Vec<&str> = stmt.split_whitespace().collect();
    let pos = toks
        .iter()
        .position(|t| matches!(*t, ">=" | "=" | "<="))
        .ok_or_else(|| syntax(line, format!("no relation in `{stmt}`")))?;
    if pos + 2 != toks.len() {
        return Err(syntax(line, format!("expected a single bound after the relation in `{stmt}`")));
    }
    let terms = parse_terms(&toks[..pos], line)?;
    let bound: i64 = toks[pos + 1]
        .parse()
        .map_err(|_| syntax(line, format!("bad bound `{}`", toks[pos + 1])))?;
    let mut vars: Vec<Var> = terms.iter().map(|t| t.lit.var()).collect();
    vars.sort();
    if vars.windows(2).any(|w| w[0] == w[1]) {
        return Err(syntax(line, "variable repeated within a constraint"));
    }
    Ok(match toks[pos] {
        ">=" => PbConstraint::at_least(terms, bound),
        "=" => PbConstraint::equal(terms, bound),
        _ => PbConstraint::at_least(terms.into_iter().map(|t| Term::new(-t.coef, t.lit)).collect(), -bound),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputStatus {
    Optimum,
    Satisfiable,
    Unsatisfiable,
    Unknown,
}

impl OutputStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputStatus::Optimum => "OPTIMUM FOUND",
            OutputStatus::Satisfiable => "SATISFIABLE",
            OutputStatus::Unsatisfiable => "UNSATISFIABLE",
            OutputStatus::Unknown => "UNKNOWN",
        }
    }
}

impl From<SolveStatus> for OutputStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimum => OutputStatus::Optimum,
            SolveStatus::Satisfiable => OutputStatus::Satisfiable,
            SolveStatus::Unsatisfiable => OutputStatus::Unsatisfiable,
            SolveStatus::Unknown => OutputStatus::Unknown,
        }
    }
}

impl From<OutputStatus> for SolveStatus {
    fn from(s: OutputStatus) -> Self {
        match s {
            OutputStatus::Optimum => SolveStatus::Optimum,
            OutputStatus::Satisfiable => SolveStatus::Satisfiable,
            OutputStatus::Unsatisfiable => SolveStatus::Unsatisfiable,
            OutputStatus::Unknown => SolveStatus::Unknown,
        }
    }
}

/// What a solver printed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverOutput {
    pub status: OutputStatus,
    /// Literals from the `v` lines; present iff the status carries a model.
    pub assignment: Option<Vec<Lit>>,
    /// The last `o` line.
    pub objective_value: Option<i64>,
}

impl SolverOutput {
    pub fn to_assignment(&self, num_vars: usize) -> Option<Assignment> {
        self.assignment.as_ref().map(|lits| Assignment::from_lits(num_vars, lits))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OutputError {
    #[error("malformed solver output: {0}")]
    MalformedOutput(String),
}

fn malformed(reason: impl Into<String>) -> OutputError {
    OutputError::MalformedOutput(reason.into())
}

/// The lines of solver output, before status-dependent checks.
#[derive(Debug, Default)]
pub struct RawOutput {
    pub status: Option<OutputStatus>,
    pub lits: Option<Vec<Lit>>,
    pub objective_value: Option<i64>,
}

/// Collects the last `s` line, all `v` literals and the last `o` value.
/// Other lines are ignored.
pub fn scan_solver_output(text: &str, num_vars: usize) -> Result<RawOutput, OutputError> {
    let mut raw = RawOutput::default();
    let mut seen_vars = alloc::collections::BTreeSet::new();
    for line in text.lines() {
        let line = line.trim_end();
        if let Some(rest) = line.strip_prefix("s ") {
            raw.status = Some(match rest.trim() {
                "OPTIMUM FOUND" => OutputStatus::Optimum,
                "SATISFIABLE" => OutputStatus::Satisfiable,
                "UNSATISFIABLE" => OutputStatus::Unsatisfiable,
                "UNKNOWN" | "UNSUPPORTED" => OutputStatus::Unknown,
                other => return Err(malformed(format!("unknown status `{other}`"))),
            });
        } else if let Some(rest) = line.strip_prefix("o ") {
            let v = rest
                .trim()
                .parse()
                .map_err(|_| malformed(format!("bad objective line `{line}`")))?;
            raw.objective_value = Some(v);
        } else if let Some(rest) = line.strip_prefix("v ").or(if line == "v" { Some("") } else { None }) {
            let lits = raw.lits.get_or_insert_with(Vec::new);
            for tok in rest.split_whitespace() {
                let (negated, name) = match tok.strip_prefix('-') {
                    Some(n) => (true, n),
                    None => (false, tok),
                };
                let n: u32 = name
                    .strip_prefix('x')
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| malformed(format!("bad literal `{tok}`")))?;
                let var = Var::from_number(n).ok_or_else(|| malformed(format!("bad literal `{tok}`")))?;
                if var.index() >= num_vars {
                    return Err(malformed(format!("literal `{tok}` exceeds {num_vars} variables")));
                }
                if !seen_vars.insert(var) {
                    return Err(malformed(format!("variable {var} assigned twice")));
                }
                lits.push(Lit::new(var, negated));
            }
        }
    }
    Ok(raw)
}

/// Parses a complete solver transcript for an instance of `num_vars`
/// variables.
pub fn parse_solver_output(text: &str, num_vars: usize) -> Result<SolverOutput, OutputError> {
    let raw = scan_solver_output(text, num_vars)?;
    let status = raw.status.ok_or_else(|| malformed("no `s` line"))?;
    let assignment = match status {
        OutputStatus::Optimum | OutputStatus::Satisfiable => {
            Some(raw.lits.ok_or_else(|| malformed("satisfiable status without a `v` line"))?)
        }
        _ => None,
    };
    Ok(SolverOutput { status, assignment, objective_value: raw.objective_value })
}

/// Renders an outcome in the solver output protocol: `o`, `s`, `v` lines.
pub fn render_solver_output(outcome: &SolveOutcome) -> String {
    let mut out = String::new();
    if let Some(v) = outcome.objective {
        let _ = writeln!(out, "o {v}");
    }
    let _ = writeln!(out, "s {}", OutputStatus::from(outcome.status).as_str());
    if let Some(a) = &outcome.assignment {
        out.push_str(&render_model(a));
    }
    out
}

/// A `v` line listing every variable.
pub fn render_model(assignment: &Assignment) -> String {
    let mut out = "v".to_string();
    for lit in assignment.to_lits() {
        let _ = write!(out, " {}x{}", if lit.is_negated() { "-" } else { "" }, lit.var().number());
    }
    out.push('\n');
    out
}
