//! Choosing a solver backend and planning under a wall-clock limit.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use debpbo_core::solver::SolverStats;
use debpbo_core::{plan, Budget, ConstraintRef, EmbeddedBackend, PlanError, PlanOptions, TransactionPlan, Universe};

use crate::external::ExternalBackend;

/// Budget that runs out at a fixed instant.
#[derive(Debug, Clone, Copy)]
pub struct Deadline(pub Instant);

impl Deadline {
    pub fn after(timeout: Duration) -> Self {
        Deadline(Instant::now() + timeout)
    }
}

impl Budget for Deadline {
    fn exhausted(&mut self, _: &SolverStats) -> bool {
        Instant::now() >= self.0
    }
}

/// `embedded`, or `external:` followed by a command line (split with shell
/// quoting rules) to which the OPB file path is appended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Embedded,
    External(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown backend `{0}` (expected `embedded` or `external:COMMAND [ARGS]`)")]
pub struct UnknownBackend(pub String);

impl FromStr for BackendSpec {
    type Err = UnknownBackend;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "embedded" {
            return Ok(BackendSpec::Embedded);
        }
        match s.strip_prefix("external:") {
            Some(cmd) => match shlex::split(cmd) {
                Some(words) if !words.is_empty() => Ok(BackendSpec::External(words)),
                _ => Err(UnknownBackend(s.to_string())),
            },
            None => Err(UnknownBackend(s.to_string())),
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Embedded => f.write_str("embedded"),
            BackendSpec::External(cmd) => {
                let line = shlex::try_join(cmd.iter().map(String::as_str)).unwrap_or_else(|_| cmd.join(" "));
                write!(f, "external:{line}")
            }
        }
    }
}

/// Plans `request`, with every solver call of the plan sharing one
/// `timeout`.
pub fn plan_with(
    universe: &Universe,
    request: &[ConstraintRef],
    options: PlanOptions,
    backend: &BackendSpec,
    timeout: Duration,
) -> Result<TransactionPlan, PlanError> {
    let deadline = Deadline::after(timeout);
    match backend {
        BackendSpec::Embedded => {
            let mut b = EmbeddedBackend::new(move || deadline);
            plan(universe, request, options, &mut b)
        }
        BackendSpec::External(cmd) => {
            let mut b = ExternalBackend::new(cmd.clone(), deadline.0);
            plan(universe, request, options, &mut b)
        }
    }
}
