//! Translation of an install request into a PB optimization instance.
//!
//! Constraint families, in emission order:
//!
//! 1. request: `sum(matching units) >= 1` per requested reference;
//! 2. dependency: `sum(alternatives) - unit >= 0` per dependency clause;
//! 3. conflict: `a + b <= 1` per conflicting pair;
//! 4. same name: `sum(versions) <= 1` per package name.
//!
//! The objective is the weighted sum of removals of installed units,
//! the number of units present and their freshness penalty.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::pb::{PbConstraint, PboInstance, Term, Var};
use crate::universe::{ConstraintRef, UnitId, Universe};
use crate::Lit;

/// Objective weights: removal of an installed unit, presence of any unit
/// and staleness (multiplied by the 0..=100 freshness penalty).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Weights {
    pub removal: i64,
    pub presence: i64,
    pub version: i64,
}

impl Weights {
    pub fn new(removal: i64, presence: i64, version: i64) -> Result<Self, EncodeError> {
        if removal < 0 || presence < 0 || version < 0 || (removal, presence, version) == (0, 0, 0) {
            return Err(EncodeError::InvalidWeights);
        }
        Ok(Weights { removal, presence, version })
    }

    pub fn scaled(self, k: i64) -> Self {
        Weights { removal: self.removal * k, presence: self.presence * k, version: self.version * k }
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights { removal: 6, presence: 1, version: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("request `{0}` matches no package")]
    UnresolvableRequest(String),
    #[error("weights must be non-negative and not all zero")]
    InvalidWeights,
    #[error("dependency clause has no installable alternative")]
    EmptyAlternatives,
    #[error("a package cannot conflict with itself")]
    SelfConflict,
    #[error("worst-case objective exceeds 2^62")]
    ObjectiveOverflow,
}

/// The units an instance ranges over. Units in `units` but not in
/// `expanded` get no dependency constraints; the lazy planner uses this
/// to encode a relaxation of the not-yet-explored frontier.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scope {
    pub units: BTreeSet<UnitId>,
    pub expanded: BTreeSet<UnitId>,
}

impl Scope {
    /// A scope where every unit has its dependencies encoded.
    pub fn closed(units: BTreeSet<UnitId>) -> Self {
        Scope { expanded: units.clone(), units }
    }

    pub fn is_closed(&self) -> bool {
        self.units == self.expanded
    }
}

/// Bijection between units and variables. Variables are ordered by package
/// name, then newest version first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VarMap {
    units: Vec<UnitId>,
    vars: BTreeMap<UnitId, Var>,
}

impl VarMap {
    pub fn new(universe: &Universe, units: &BTreeSet<UnitId>) -> Self {
        let mut map = VarMap::default();
        for name in universe.names() {
            for &id in universe.versions_of(name) {
                if units.contains(&id) {
                    map.vars.insert(id, Var::from_index(map.units.len()));
                    map.units.push(id);
                }
            }
        }
        map
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn var(&self, unit: UnitId) -> Option<Var> {
        self.vars.get(&unit).copied()
    }

    pub fn unit(&self, var: Var) -> UnitId {
        self.units[var.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, UnitId)> + '_ {
        self.units.iter().enumerate().map(|(i, &u)| (Var::from_index(i), u))
    }
}

/// `sum(alternatives) - dependent >= 0`.
pub fn encode_dependency(dependent: Lit, alternatives: &[Lit]) -> Result<PbConstraint, EncodeError> {
    if alternatives.is_empty() {
        return Err(EncodeError::EmptyAlternatives);
    }
    let mut terms: Vec<Term> = alternatives.iter().map(|&l| Term::new(1, l)).collect();
    terms.push(Term::new(-1, dependent));
    Ok(PbConstraint::at_least(terms, 0))
}

/// `a + b <= 1`, in at-least form `~a + ~b >= 1`.
pub fn encode_conflict(a: Lit, b: Lit) -> Result<PbConstraint, EncodeError> {
    if a.var() == b.var() {
        return Err(EncodeError::SelfConflict);
    }
    Ok(PbConstraint::at_most(vec![Term::new(1, a), Term::new(1, b)], 1))
}

/// At most one of `versions`, as a single cardinality constraint.
pub fn encode_same_unit(versions: &[Lit]) -> PbConstraint {
    PbConstraint::at_most(versions.iter().map(|&l| Term::new(1, l)).collect(), 1)
}

/// Weighted objective terms, one or two per variable, ascending by
/// variable with the positive literal first. Zero coefficients are omitted.
pub fn build_objective(universe: &Universe, varmap: &VarMap, weights: Weights) -> Vec<Term> {
    let mut out = Vec::new();
    for (var, id) in varmap.iter() {
        let unit = universe.unit(id);
        let present = weights.presence + weights.version * i64::from(universe.freshness(id));
        if present != 0 {
            out.push(Term::new(present, var.pos()));
        }
        if unit.installed && weights.removal != 0 {
            out.push(Term::new(weights.removal, var.neg()));
        }
    }
    out
}

/// Encodes `request` over the full dependency closure of the request and
/// the installed units.
pub fn encode(
    universe: &Universe,
    request: &[ConstraintRef],
    weights: Weights,
) -> Result<(PboInstance, VarMap), EncodeError> {
    let scope = crate::plan::closure(universe, request).map_err(|e| match e {
        crate::plan::PlanError::Encode(e) => e,
        _ => unreachable!("closure only fails on encoding errors"),
    })?;
    encode_scope(universe, &scope, request, weights)
}

/// Encodes `request` restricted to the units of `scope`. Units outside the
/// scope are absent from the instance, i.e. fixed to "not installed".
pub fn encode_scope(
    universe: &Universe,
    scope: &Scope,
    request: &[ConstraintRef],
    weights: Weights,
) -> Result<(PboInstance, VarMap), EncodeError> {
    if (weights.removal, weights.presence, weights.version) == (0, 0, 0)
        || weights.removal < 0
        || weights.presence < 0
        || weights.version < 0
    {
        return Err(EncodeError::InvalidWeights);
    }
    let varmap = VarMap::new(universe, &scope.units);
    let mut inst = PboInstance::new(varmap.len());
    let in_scope = |ids: Vec<UnitId>| -> Vec<Var> { ids.into_iter().filter_map(|id| varmap.var(id)).collect() };

    for r in request {
        let vars = in_scope(universe.resolve_ref(r));
        if vars.is_empty() {
            return Err(EncodeError::UnresolvableRequest(alloc::format!("{r}")));
        }
        let terms = vars.iter().map(|v| Term::new(1, v.pos())).collect();
        inst.constraints.push(PbConstraint::at_least(terms, 1).normalized());
    }

    for (var, id) in varmap.iter() {
        if !scope.expanded.contains(&id) {
            continue;
        }
        'clauses: for clause in &universe.unit(id).depends {
            let mut alts: Vec<Var> = Vec::new();
            for alt in clause.alternatives() {
                for v in in_scope(universe.resolve_ref(alt)) {
                    if v == var {
                        // the unit satisfies its own dependency
                        continue 'clauses;
                    }
                    if !alts.contains(&v) {
                        alts.push(v);
                    }
                }
            }
            let lits: Vec<Lit> = alts.iter().map(|v| v.pos()).collect();
            let c = match encode_dependency(var.pos(), &lits) {
                Ok(c) => c,
                Err(_) => PbConstraint::at_least(vec![Term::new(-1, var.pos())], 0),
            };
            inst.constraints.push(c.normalized());
        }
    }

    let mut pairs: BTreeSet<(Var, Var)> = BTreeSet::new();
    for (var, id) in varmap.iter() {
        for c in &universe.unit(id).conflicts {
            for other in in_scope(universe.resolve_ref(c)) {
                let key = (var.min(other), var.max(other));
                if other == var || !pairs.insert(key) {
                    continue;
                }
                let c = encode_conflict(var.pos(), other.pos()).expect("distinct variables");
                inst.constraints.push(c.normalized());
            }
        }
    }

    for name in universe.names() {
        let lits: Vec<Lit> = in_scope(universe.versions_of(name).to_vec())
            .into_iter()
            .map(Var::pos)
            .collect();
        if lits.len() >= 2 {
            inst.constraints.push(encode_same_unit(&lits).normalized());
        }
    }

    inst.objective = build_objective(universe, &varmap, weights);
    let worst = inst
        .objective
        .iter()
        .try_fold(0i64, |acc, t| acc.checked_add(t.coef))
        .ok_or(EncodeError::ObjectiveOverflow)?;
    if worst > 1i64 << 62 {
        return Err(EncodeError::ObjectiveOverflow);
    }
    Ok((inst, varmap))
}
