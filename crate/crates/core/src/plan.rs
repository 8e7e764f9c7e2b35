//! Transaction planning: dependency closure, the encode / solve loop and
//! decoding of the chosen assignment into package actions.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::encode::{encode_scope, EncodeError, Scope, VarMap, Weights};
use crate::pb::{Assignment, PboInstance};
use crate::solver::{Budget, SolveOutcome, SolveStatus, Solver};
use crate::universe::{ConstraintRef, UnitId, Universe};

pub type BackendError = Box<dyn core::error::Error + Send + Sync>;

/// Anything that can minimize a [`PboInstance`].
pub trait Backend {
    fn solve(&mut self, instance: &PboInstance) -> Result<SolveOutcome, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &mut B {
    fn solve(&mut self, instance: &PboInstance) -> Result<SolveOutcome, BackendError> {
        (**self).solve(instance)
    }
}

/// The in-process solver; `make_budget` is called once per solve.
pub struct EmbeddedBackend<F> {
    make_budget: F,
}

impl<F> EmbeddedBackend<F> {
    pub fn new(make_budget: F) -> Self {
        EmbeddedBackend { make_budget }
    }
}

impl<F, B> Backend for EmbeddedBackend<F>
where
    F: FnMut() -> B,
    B: Budget,
{
    fn solve(&mut self, instance: &PboInstance) -> Result<SolveOutcome, BackendError> {
        let mut budget = (self.make_budget)();
        Ok(Solver::new(instance).optimize(&mut budget, |_, _| {}))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("solver backend failed: {0}")]
    Backend(BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClosureMode {
    /// Full dependency closure before a single solve.
    #[default]
    Eager,
    /// Start from the newest requested versions and expand the units the
    /// solver actually selects, re-solving until nothing new is selected.
    Lazy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlanOptions {
    pub weights: Weights,
    pub mode: ClosureMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlanStatus {
    Optimal,
    /// The budget ran out; the plan is the best one found.
    FeasibleTimeout,
    Infeasible,
    /// The budget ran out before any plan was found.
    Unknown,
}

impl PlanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanStatus::Optimal => "OPTIMAL",
            PlanStatus::FeasibleTimeout => "FEASIBLE_TIMEOUT",
            PlanStatus::Infeasible => "INFEASIBLE",
            PlanStatus::Unknown => "UNKNOWN",
        }
    }
}

impl fmt::Display for PlanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Replacing one installed version with another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Upgrade {
    pub from: UnitId,
    pub to: UnitId,
    pub downgrade: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlanStats {
    pub solver_calls: u32,
    pub num_vars: usize,
    pub num_constraints: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionPlan {
    pub install: Vec<UnitId>,
    pub remove: Vec<UnitId>,
    pub upgrade: Vec<Upgrade>,
    pub keep: Vec<UnitId>,
    pub objective_value: Option<i64>,
    pub status: PlanStatus,
    pub stats: PlanStats,
}

impl TransactionPlan {
    /// A plan with no actions.
    pub fn empty(status: PlanStatus) -> Self {
        TransactionPlan {
            install: Vec::new(),
            remove: Vec::new(),
            upgrade: Vec::new(),
            keep: Vec::new(),
            objective_value: None,
            status,
            stats: PlanStats::default(),
        }
    }

    /// Units installed after applying the plan.
    pub fn post_state(&self) -> BTreeSet<UnitId> {
        self.install
            .iter()
            .chain(&self.keep)
            .copied()
            .chain(self.upgrade.iter().map(|u| u.to))
            .collect()
    }

    /// Number of units the plan brings onto the system.
    pub fn installed_count(&self) -> usize {
        self.install.len() + self.upgrade.len()
    }

    pub fn has_changes(&self) -> bool {
        !(self.install.is_empty() && self.remove.is_empty() && self.upgrade.is_empty())
    }

    /// Line-oriented dump: `install name version`, `remove name version`,
    /// `upgrade name from to`, `keep name version`, `objective N`,
    /// `status S`.
    pub fn machine_dump(&self, universe: &Universe) -> String {
        let mut out = String::new();
        for &id in &self.install {
            let u = universe.unit(id);
            out.push_str(&format!("install {} {}\n", u.name, u.version));
        }
        for &id in &self.remove {
            let u = universe.unit(id);
            out.push_str(&format!("remove {} {}\n", u.name, u.version));
        }
        for up in &self.upgrade {
            let (from, to) = (universe.unit(up.from), universe.unit(up.to));
            out.push_str(&format!("upgrade {} {} {}\n", from.name, from.version, to.version));
        }
        for &id in &self.keep {
            let u = universe.unit(id);
            out.push_str(&format!("keep {} {}\n", u.name, u.version));
        }
        if let Some(v) = self.objective_value {
            out.push_str(&format!("objective {v}\n"));
        }
        out.push_str(&format!("status {}\n", self.status));
        out
    }
}

fn resolve_request(universe: &Universe, request: &[ConstraintRef]) -> Result<Vec<Vec<UnitId>>, EncodeError> {
    request
        .iter()
        .map(|r| {
            let ids = universe.resolve_ref(r);
            if ids.is_empty() {
                Err(EncodeError::UnresolvableRequest(format!("{r}")))
            } else {
                Ok(ids)
            }
        })
        .collect()
}

/// Adds `ids` to the expanded set and their dependency targets to the scope.
fn expand(universe: &Universe, scope: &mut Scope, ids: impl IntoIterator<Item = UnitId>) {
    let mut work: Vec<UnitId> = ids.into_iter().collect();
    for &id in &work {
        scope.units.insert(id);
    }
    while let Some(id) = work.pop() {
        if !scope.expanded.insert(id) {
            continue;
        }
        for clause in &universe.unit(id).depends {
            for alt in clause.alternatives() {
                for target in universe.resolve_ref(alt) {
                    scope.units.insert(target);
                }
            }
        }
    }
}

/// Least set containing the request matches and installed units that is
/// closed under dependency resolution. Conflicts never add units.
pub fn closure(universe: &Universe, request: &[ConstraintRef]) -> Result<Scope, PlanError> {
    let matches = resolve_request(universe, request)?;
    let mut units: BTreeSet<UnitId> = matches.into_iter().flatten().collect();
    units.extend(universe.installed());
    let mut work: Vec<UnitId> = units.iter().copied().collect();
    while let Some(id) = work.pop() {
        for clause in &universe.unit(id).depends {
            for alt in clause.alternatives() {
                for target in universe.resolve_ref(alt) {
                    if units.insert(target) {
                        work.push(target);
                    }
                }
            }
        }
    }
    Ok(Scope::closed(units))
}

fn initial_lazy_scope(universe: &Universe, request: &[ConstraintRef]) -> Result<Scope, PlanError> {
    let matches = resolve_request(universe, request)?;
    let mut scope = Scope::default();
    scope.units.extend(matches.iter().flatten().copied());
    scope.units.extend(universe.installed());
    let newest: Vec<UnitId> = matches.iter().map(|m| m[0]).collect();
    expand(universe, &mut scope, newest);
    Ok(scope)
}

/// Plans the installation of `request`.
pub fn plan(
    universe: &Universe,
    request: &[ConstraintRef],
    options: PlanOptions,
    backend: &mut dyn Backend,
) -> Result<TransactionPlan, PlanError> {
    let mut scope = match options.mode {
        ClosureMode::Eager => closure(universe, request)?,
        ClosureMode::Lazy => initial_lazy_scope(universe, request)?,
    };
    let mut calls = 0;
    loop {
        let (instance, varmap) = encode_scope(universe, &scope, request, options.weights)?;
        let outcome = backend.solve(&instance).map_err(PlanError::Backend)?;
        calls += 1;
        let stats = PlanStats {
            solver_calls: calls,
            num_vars: instance.num_vars,
            num_constraints: instance.constraints.len(),
        };
        let status = match outcome.status {
            SolveStatus::Optimum => PlanStatus::Optimal,
            SolveStatus::Satisfiable => PlanStatus::FeasibleTimeout,
            SolveStatus::Unsatisfiable => PlanStatus::Infeasible,
            SolveStatus::Unknown => PlanStatus::Unknown,
        };
        let assignment = match outcome.assignment {
            Some(a) if matches!(status, PlanStatus::Optimal | PlanStatus::FeasibleTimeout) => a,
            _ => {
                let mut p = TransactionPlan::empty(status);
                p.stats = stats;
                return Ok(p);
            }
        };
        let frontier: Vec<UnitId> = varmap
            .iter()
            .filter(|&(v, id)| assignment.value(v) && !scope.expanded.contains(&id))
            .map(|(_, id)| id)
            .collect();
        if !frontier.is_empty() {
            expand(universe, &mut scope, frontier);
            continue;
        }
        let mut p = decode(&assignment, &varmap, universe);
        p.status = status;
        p.objective_value = Some(instance.objective_value(&assignment));
        p.stats = stats;
        return Ok(p);
    }
}

/// Diffs an assignment against the installed state, name by name.
pub fn decode(assignment: &Assignment, varmap: &VarMap, universe: &Universe) -> TransactionPlan {
    let mut plan = TransactionPlan::empty(PlanStatus::Optimal);
    let is_true = |id: UnitId| varmap.var(id).is_some_and(|v| assignment.value(v));
    for name in universe.names() {
        let versions = universe.versions_of(name);
        let chosen: Vec<UnitId> = versions.iter().copied().filter(|&id| is_true(id)).collect();
        let mut installed: Vec<UnitId> = versions
            .iter()
            .copied()
            .filter(|&id| universe.unit(id).installed)
            .collect();
        for &to in &chosen {
            if let Some(k) = installed.iter().position(|&id| id == to) {
                installed.remove(k);
                plan.keep.push(to);
            } else if !installed.is_empty() && chosen.len() == 1 {
                let from = installed.remove(0);
                let downgrade = universe.unit(from).version > universe.unit(to).version;
                plan.upgrade.push(Upgrade { from, to, downgrade });
            } else {
                plan.install.push(to);
            }
        }
        plan.remove.extend(installed);
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Unlimited;
    use crate::universe::parse_universe;
    use alloc::vec;

    fn embedded() -> EmbeddedBackend<impl FnMut() -> Unlimited> {
        EmbeddedBackend::new(|| Unlimited)
    }

    fn names(u: &Universe, ids: &[UnitId]) -> Vec<String> {
        ids.iter().map(|&i| format!("{}", u.unit(i))).collect()
    }

    #[test]
    fn chain_and_diamond_closures() {
        let u = parse_universe(
            "Package: a\nVersion: 1\nDepends: b\n\nPackage: b\nVersion: 1\nDepends: c\n\nPackage: c\nVersion: 1\n",
        )
        .unwrap();
        let s = closure(&u, &[ConstraintRef::any("a")]).unwrap();
        assert_eq!(s.units.len(), 3);

        let u = parse_universe(
            "Package: a\nVersion: 1\nDepends: b | c\n\nPackage: b\nVersion: 1\nDepends: d\n\n\
             Package: c\nVersion: 1\nDepends: d\n\nPackage: d\nVersion: 1\n\nPackage: e\nVersion: 1\nConflicts: a\n",
        )
        .unwrap();
        let s = closure(&u, &[ConstraintRef::any("a")]).unwrap();
        let got: Vec<&str> = s.units.iter().map(|&i| u.unit(i).name.as_str()).collect();
        assert_eq!(got, vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn standalone_install() {
        let u = parse_universe("Package: a\nVersion: 1.0\n").unwrap();
        let p = plan(&u, &[ConstraintRef::any("a")], PlanOptions::default(), &mut embedded()).unwrap();
        assert_eq!(p.status, PlanStatus::Optimal);
        assert_eq!(names(&u, &p.install), vec!["a@1.0"]);
        assert!(p.remove.is_empty() && p.upgrade.is_empty() && p.keep.is_empty());
        assert_eq!(p.machine_dump(&u), "install a 1.0\nobjective 1\nstatus OPTIMAL\n");
    }

    #[test]
    fn upgrade_when_staleness_outweighs_removal() {
        let u = parse_universe("Package: a\nVersion: 1.0\nInstalled: yes\n\nPackage: a\nVersion: 2.0\n").unwrap();
        let r = [ConstraintRef::any("a")];
        // upgrade: removal 6 + presence 1 = 7; keep: presence 1 + 2 * 100 = 201
        let p = plan(&u, &r, PlanOptions::default(), &mut embedded()).unwrap();
        assert_eq!(p.upgrade.len(), 1);
        let up = p.upgrade[0];
        assert_eq!((format!("{}", u.unit(up.from)), format!("{}", u.unit(up.to))), ("a@1.0".into(), "a@2.0".into()));
        assert!(!up.downgrade);
        assert_eq!(p.objective_value, Some(7));
        assert_eq!(p.machine_dump(&u), "upgrade a 1.0 2.0\nobjective 7\nstatus OPTIMAL\n");

        // an upgrade removes the old unit, so a removal weight above
        // 100 * W_v keeps the stale version
        let opts = PlanOptions { weights: Weights::new(1000, 1, 1).unwrap(), mode: ClosureMode::Eager };
        let p = plan(&u, &r, opts, &mut embedded()).unwrap();
        assert!(p.upgrade.is_empty());
        assert_eq!(p.objective_value, Some(101));
    }

    #[test]
    fn broken_dependency_is_infeasible() {
        let u = parse_universe("Package: a\nVersion: 1\nDepends: z\n").unwrap();
        let p = plan(&u, &[ConstraintRef::any("a")], PlanOptions::default(), &mut embedded()).unwrap();
        assert_eq!(p.status, PlanStatus::Infeasible);
        assert!(!p.has_changes() && p.keep.is_empty());
        assert_eq!(p.machine_dump(&u), "status INFEASIBLE\n");
    }

    #[test]
    fn decode_rules() {
        let u = parse_universe(
            "Package: b\nVersion: 1.0\nInstalled: yes\n\nPackage: b\nVersion: 2.0\n\nPackage: c\nVersion: 1\nInstalled: yes\n",
        )
        .unwrap();
        let all: BTreeSet<UnitId> = u.ids().collect();
        let map = VarMap::new(&u, &all);
        let b1 = u.find("b", &"1.0".parse().unwrap()).unwrap();
        let b2 = u.find("b", &"2.0".parse().unwrap()).unwrap();
        let c = u.find("c", &"1".parse().unwrap()).unwrap();
        let set = |ids: &[UnitId]| {
            let mut a = Assignment::all_false(map.len());
            for &id in ids {
                a.set(map.var(id).unwrap(), true);
            }
            a
        };
        let p = decode(&set(&[b1, c]), &map, &u);
        assert_eq!(p.keep, vec![b1, c]);
        assert!(!p.has_changes());

        let p = decode(&set(&[b2, c]), &map, &u);
        assert_eq!(p.upgrade, vec![Upgrade { from: b1, to: b2, downgrade: false }]);

        let p = decode(&set(&[c]), &map, &u);
        assert_eq!(p.remove, vec![b1]);
        assert_eq!(p.post_state(), [c].into_iter().collect());
    }

    #[test]
    fn lazy_matches_eager_on_a_chain() {
        let u = parse_universe(
            "Package: a\nVersion: 2\nDepends: b\n\nPackage: a\nVersion: 1\n\n\
             Package: b\nVersion: 1\nDepends: c\n\nPackage: c\nVersion: 1\n",
        )
        .unwrap();
        let r = [ConstraintRef::any("a")];
        let eager = plan(&u, &r, PlanOptions::default(), &mut embedded()).unwrap();
        let lazy_opts = PlanOptions { mode: ClosureMode::Lazy, ..PlanOptions::default() };
        let lazy = plan(&u, &r, lazy_opts, &mut embedded()).unwrap();
        assert_eq!(eager.objective_value, lazy.objective_value);
        assert_eq!(eager.stats.solver_calls, 1);
    }
}
