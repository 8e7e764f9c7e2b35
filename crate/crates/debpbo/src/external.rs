//! Running a PB-competition style solver as a child process.

use std::fs;
use std::io::{self, Write};
use std::os::unix::process::CommandExt;
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use debpbo_core::opb::{emit_opb, parse_solver_output, scan_solver_output, OutputError, OutputStatus, SolverOutput};
use debpbo_core::plan::BackendError;
use debpbo_core::{Backend, PboInstance, SolveOutcome};

#[derive(Debug, thiserror::Error)]
pub enum ExternalError {
    #[error("cannot start solver `{command}`: {source}")]
    SpawnFailure { command: String, source: io::Error },
    #[error("malformed solver output: {0}")]
    MalformedOutput(String),
    #[error("solver reported objective {reported} but the model evaluates to {recomputed}")]
    ObjectiveMismatch { reported: i64, recomputed: i64 },
    #[error("solver model violates constraint {index}: {constraint}")]
    InvalidModel { index: usize, constraint: String },
    #[error("empty solver command")]
    EmptyCommand,
    #[error(transparent)]
    Io(#[from] io::Error),
}

const POLL: Duration = Duration::from_millis(5);

/// Writes `instance` to a temporary OPB file, runs `command` with the file
/// path appended, and parses what the solver printed. The solver is killed
/// once `timeout` has passed; whatever complete model it printed by then is
/// kept as a SATISFIABLE answer, otherwise the result is UNKNOWN.
///
/// Models and objective values are checked against the instance, never
/// trusted.
pub fn run_external(instance: &PboInstance, command: &[String], timeout: Duration) -> Result<SolverOutput, ExternalError> {
    let (program, args) = command.split_first().ok_or(ExternalError::EmptyCommand)?;
    let mut opb = tempfile::Builder::new().prefix("debpbo-").suffix(".opb").tempfile()?;
    opb.write_all(emit_opb(instance).as_bytes())?;
    opb.flush()?;
    let stdout = tempfile::tempfile()?;

    let started = Instant::now();
    let mut child = Command::new(program)
        .args(args)
        .arg(opb.path())
        .stdin(Stdio::null())
        .stdout(stdout.try_clone()?)
        .stderr(Stdio::null())
        .process_group(0)
        .spawn()
        .map_err(|source| ExternalError::SpawnFailure { command: command.join(" "), source })?;

    let timed_out = loop {
        if child.try_wait()?.is_some() {
            break false;
        }
        if started.elapsed() >= timeout {
            kill_group(&mut child);
            break true;
        }
        thread::sleep(POLL.min(timeout.saturating_sub(started.elapsed())));
    };

    let text = read_all(stdout)?;
    let n = instance.num_vars;
    let output = if timed_out {
        salvage(&text, n)
    } else {
        parse_solver_output(&text, n).map_err(|OutputError::MalformedOutput(m)| ExternalError::MalformedOutput(m))?
    };
    check(instance, output)
}

fn read_all(mut file: fs::File) -> io::Result<String> {
    use std::io::{Read, Seek, SeekFrom};
    file.seek(SeekFrom::Start(0))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn kill_group(child: &mut Child) {
    let pid = child.id() as libc::pid_t;
    // SAFETY: kill(2) has no memory-safety preconditions. The child was
    // started as leader of its own process group, so -pid reaches it and
    // anything it spawned, and nothing else.
    unsafe {
        libc::kill(-pid, libc::SIGKILL);
    }
    let _ = child.kill();
    let _ = child.wait();
}

/// Output of a killed solver: a complete model counts, anything less is
/// UNKNOWN.
fn salvage(text: &str, num_vars: usize) -> SolverOutput {
    let unknown = SolverOutput { status: OutputStatus::Unknown, assignment: None, objective_value: None };
    let Ok(raw) = scan_solver_output(text, num_vars) else {
        return unknown;
    };
    match raw.lits {
        Some(lits) if lits.len() == num_vars => SolverOutput {
            status: OutputStatus::Satisfiable,
            assignment: Some(lits),
            objective_value: raw.objective_value,
        },
        _ => unknown,
    }
}

fn check(instance: &PboInstance, mut output: SolverOutput) -> Result<SolverOutput, ExternalError> {
    let Some(model) = output.to_assignment(instance.num_vars) else {
        output.objective_value = None;
        return Ok(output);
    };
    if let Some(index) = instance.first_violation(&model) {
        return Err(ExternalError::InvalidModel { index, constraint: instance.constraints[index].to_string() });
    }
    let recomputed = instance.objective_value(&model);
    match output.objective_value {
        Some(reported) if reported != recomputed => Err(ExternalError::ObjectiveMismatch { reported, recomputed }),
        _ => {
            output.objective_value = Some(recomputed);
            Ok(output)
        }
    }
}

/// A [`Backend`] that hands every instance to an external solver. All
/// solver calls made through one value share the same deadline.
#[derive(Debug, Clone)]
pub struct ExternalBackend {
    command: Vec<String>,
    deadline: Instant,
}

impl ExternalBackend {
    pub fn new(command: Vec<String>, deadline: Instant) -> Self {
        ExternalBackend { command, deadline }
    }
}

impl Backend for ExternalBackend {
    fn solve(&mut self, instance: &PboInstance) -> Result<SolveOutcome, BackendError> {
        let remaining = self.deadline.saturating_duration_since(Instant::now());
        let out = run_external(instance, &self.command, remaining)?;
        Ok(SolveOutcome {
            status: out.status.into(),
            assignment: out.to_assignment(instance.num_vars),
            objective: out.objective_value,
            stats: Default::default(),
        })
    }
}
