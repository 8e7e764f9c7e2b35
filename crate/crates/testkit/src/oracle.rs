//! Package semantics checked directly on sets of units, and exhaustive PBO.

use std::collections::BTreeSet;

use debpbo_core::{
    Assignment, ConstraintRef, PackageUnit, PbRelation, PboInstance, Relation, UnitId, Universe, VarMap,
    Weights,
};

pub type State = BTreeSet<UnitId>;

/// Does unit `v` satisfy `r`? Unversioned references are also met by
/// anything providing the name.
pub fn satisfies(r: &ConstraintRef, v: &PackageUnit) -> bool {
    if v.name == r.name {
        return match &r.version {
            None => true,
            Some((rel, w)) => match rel {
                Relation::Eq => v.version == *w,
                Relation::Ge => v.version >= *w,
                Relation::Le => v.version <= *w,
                Relation::Gt => v.version > *w,
                Relation::Lt => v.version < *w,
            },
        };
    }
    r.version.is_none() && v.provides.contains(&r.name)
}

fn all_ids(u: &Universe) -> Vec<UnitId> {
    (0..u.len() as u32).map(UnitId).collect()
}

/// Request matches and installed units, closed under every dependency
/// alternative.
pub fn closure(u: &Universe, request: &[ConstraintRef]) -> State {
    let ids = all_ids(u);
    let mut set: State = ids
        .iter()
        .copied()
        .filter(|&id| u.unit(id).installed || request.iter().any(|r| satisfies(r, u.unit(id))))
        .collect();
    loop {
        let mut grew = false;
        for &id in &ids {
            if set.contains(&id) {
                continue;
            }
            let needed = set.iter().any(|&s| {
                u.unit(s)
                    .depends
                    .iter()
                    .any(|c| c.alternatives().iter().any(|a| satisfies(a, u.unit(id))))
            });
            if needed {
                set.insert(id);
                grew = true;
            }
        }
        if !grew {
            return set;
        }
    }
}

/// Is `state` an acceptable system after installing `request`?
pub fn is_valid(u: &Universe, request: &[ConstraintRef], state: &State) -> bool {
    let units: Vec<&PackageUnit> = state.iter().map(|&id| u.unit(id)).collect();
    if !request.iter().all(|r| units.iter().any(|v| satisfies(r, v))) {
        return false;
    }
    for (i, a) in units.iter().enumerate() {
        for clause in &a.depends {
            if !clause.alternatives().iter().any(|alt| units.iter().any(|v| satisfies(alt, v))) {
                return false;
            }
        }
        for c in &a.conflicts {
            if units.iter().enumerate().any(|(j, v)| j != i && satisfies(c, v)) {
                return false;
            }
        }
        if units[i + 1..].iter().any(|b| b.name == a.name) {
            return false;
        }
    }
    true
}

/// Every valid state using only units of the closure.
pub fn valid_states(u: &Universe, request: &[ConstraintRef]) -> BTreeSet<State> {
    let scope: Vec<UnitId> = closure(u, request).into_iter().collect();
    assert!(scope.len() <= 20, "closure of {} units is too large to enumerate", scope.len());
    let mut out = BTreeSet::new();
    for bits in 0u64..1 << scope.len() {
        let state: State = scope.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, &id)| id).collect();
        if is_valid(u, request, &state) {
            out.insert(state);
        }
    }
    out
}

/// `round(100 * rank / max(K - 1, 1))` over the downloadable versions of
/// the name, newest at rank 0; units not downloadable count as oldest.
pub fn freshness(u: &Universe, id: UnitId) -> i64 {
    let unit = u.unit(id);
    let mut versions: Vec<&PackageUnit> =
        all_ids(u).into_iter().map(|o| u.unit(o)).filter(|o| o.name == unit.name && o.available).collect();
    if !unit.available {
        return if versions.is_empty() { 0 } else { 100 };
    }
    versions.sort_by(|a, b| b.version.cmp(&a.version));
    let rank = versions.iter().position(|o| o.version == unit.version).unwrap() as f64;
    let denom = (versions.len() as f64 - 1.0).max(1.0);
    (100.0 * rank / denom + 0.5).floor() as i64
}

/// Removals of installed units, units present and their staleness, weighted.
pub fn cost(u: &Universe, state: &State, w: Weights) -> i64 {
    let removed = all_ids(u).into_iter().filter(|id| u.unit(*id).installed && !state.contains(id)).count() as i64;
    let present = state.len() as i64;
    let stale: i64 = state.iter().map(|&id| freshness(u, id)).sum();
    w.removal * removed + w.presence * present + w.version * stale
}

/// Minimum cost and the states reaching it, or `None` when nothing is
/// valid.
pub fn optimum(u: &Universe, request: &[ConstraintRef], w: Weights) -> Option<(i64, BTreeSet<State>)> {
    best_by(valid_states(u, request), |s| cost(u, s, w))
}

pub fn best_by<T: Ord>(items: impl IntoIterator<Item = T>, mut f: impl FnMut(&T) -> i64) -> Option<(i64, BTreeSet<T>)> {
    let mut best: Option<(i64, BTreeSet<T>)> = None;
    for item in items {
        let c = f(&item);
        match &mut best {
            Some((b, set)) if c == *b => {
                set.insert(item);
            }
            Some((b, _)) if c > *b => {}
            _ => best = Some((c, BTreeSet::from([item]))),
        }
    }
    best
}

/// Evaluates a constraint without going through the library.
pub fn constraint_holds(terms: &[(i64, u32, bool)], relation: PbRelation, bound: i64, bits: u64) -> bool {
    let lhs: i64 = terms
        .iter()
        .filter(|&&(_, var, negated)| (bits >> var & 1 == 1) != negated)
        .map(|&(c, _, _)| c)
        .sum();
    match relation {
        PbRelation::AtLeast => lhs >= bound,
        PbRelation::Equal => lhs == bound,
    }
}

/// Terms as `(coef, var, negated)`, relation and bound.
type Flat = (Vec<(i64, u32, bool)>, PbRelation, i64);

fn flatten(inst: &PboInstance) -> Vec<Flat> {
    inst.constraints
        .iter()
        .map(|c| {
            let terms = c.terms.iter().map(|t| (t.coef, t.lit.var().index() as u32, t.lit.is_negated())).collect();
            (terms, c.relation, c.bound)
        })
        .collect()
}

/// All satisfying assignments as bit masks (variable `i` is bit `i`).
pub fn models(inst: &PboInstance) -> Vec<u64> {
    assert!(inst.num_vars <= 24, "{} variables are too many to enumerate", inst.num_vars);
    let cs = flatten(inst);
    (0u64..1 << inst.num_vars)
        .filter(|&bits| cs.iter().all(|(t, r, b)| constraint_holds(t, *r, *b, bits)))
        .collect()
}

pub fn objective_of(inst: &PboInstance, bits: u64) -> i64 {
    inst.objective
        .iter()
        .filter(|t| (bits >> t.lit.var().index() & 1 == 1) != t.lit.is_negated())
        .map(|t| t.coef)
        .sum()
}

/// Exhaustive minimum of the objective and its minimizers.
pub fn pbo_optimum(inst: &PboInstance) -> Option<(i64, BTreeSet<u64>)> {
    best_by(models(inst), |&bits| objective_of(inst, bits))
}

pub fn bits_of(a: &Assignment) -> u64 {
    a.as_slice().iter().enumerate().fold(0, |acc, (i, &b)| acc | (b as u64) << i)
}

/// The set of installed units an assignment stands for.
pub fn state_of(bits: u64, varmap: &VarMap) -> State {
    varmap.iter().filter(|(v, _)| bits >> v.index() & 1 == 1).map(|(_, id)| id).collect()
}
