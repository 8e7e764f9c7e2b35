//! Small random universes and PB instances, sized for enumeration.

use debpbo_core::{
    ConstraintRef, DependencyClause, PackageUnit, PbConstraint, PboInstance, Relation, Term, Universe, Var,
    Version, Weights,
};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::oracle::satisfies;

const REAL: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
const VIRTUAL: [&str; 2] = ["mta", "www-browser"];
const MISSING: &str = "zz";
/// Strictly increasing under Debian ordering.
const VERSIONS: [&str; 7] = ["0.9", "1.0~rc1", "1.0", "1.0-2", "1.0.1", "2.0", "1:0.1"];
const RELATIONS: [Relation; 5] = [Relation::Eq, Relation::Ge, Relation::Le, Relation::Gt, Relation::Lt];

fn version(rng: &mut impl Rng) -> Version {
    Version::parse(VERSIONS.choose(rng).unwrap()).unwrap()
}

fn random_ref(rng: &mut impl Rng, broken_rate: f64) -> ConstraintRef {
    if rng.gen_bool(broken_rate) {
        return ConstraintRef::any(MISSING);
    }
    if rng.gen_bool(0.2) {
        return ConstraintRef::any(*VIRTUAL.choose(rng).unwrap());
    }
    let name = *REAL.choose(rng).unwrap();
    if rng.gen_bool(0.35) {
        ConstraintRef::versioned(name, *RELATIONS.choose(rng).unwrap(), version(rng))
    } else {
        ConstraintRef::any(name)
    }
}

/// A universe of at most `max_units` units over six real names, two
/// virtual ones and a missing one, with versioned references, provides,
/// conflicts, alternatives and a partly installed system.
pub fn micro_universe(rng: &mut impl Rng, max_units: usize) -> Universe {
    let mut units: Vec<PackageUnit> = Vec::new();
    for name in REAL {
        let k = rng.gen_range(0..=3);
        let mut picks: Vec<&str> = VERSIONS.choose_multiple(rng, k).copied().collect();
        picks.sort_by_key(|v| VERSIONS.iter().position(|x| x == v));
        for v in picks {
            if units.len() < max_units {
                units.push(PackageUnit::new(name, Version::parse(v).unwrap()));
            }
        }
    }
    let n = units.len();
    for unit in units.iter_mut() {
        for _ in 0..rng.gen_range(0..=2) {
            let alts = (0..rng.gen_range(1..=2)).map(|_| random_ref(rng, 0.08)).collect();
            unit.depends.extend(DependencyClause::new(alts));
        }
        if rng.gen_bool(0.35) {
            unit.conflicts.push(random_ref(rng, 0.0));
        }
        if rng.gen_bool(0.25) {
            unit.provides.push(VIRTUAL.choose(rng).unwrap().to_string());
        }
    }
    for name in REAL {
        let ids: Vec<usize> = (0..n).filter(|&i| units[i].name == name).collect();
        if !ids.is_empty() && rng.gen_bool(0.35) {
            let i = *ids.choose(rng).unwrap();
            units[i].installed = true;
            units[i].available = !rng.gen_bool(0.15);
        }
    }
    Universe::new(units).expect("distinct versions")
}

/// One or two references, each matched by at least one unit, or `None`
/// when the universe has nothing to request.
pub fn micro_request(rng: &mut impl Rng, u: &Universe) -> Option<Vec<ConstraintRef>> {
    let k = rng.gen_range(1..=2);
    let mut out = Vec::new();
    for _ in 0..50 {
        let r = random_ref(rng, 0.0);
        if u.units().iter().any(|v| satisfies(&r, v)) {
            out.push(r);
            if out.len() == k {
                return Some(out);
            }
        }
    }
    (!out.is_empty()).then_some(out)
}

pub fn weights(rng: &mut impl Rng) -> Weights {
    loop {
        let (r, p, v) = (rng.gen_range(0..=10), rng.gen_range(0..=10), rng.gen_range(0..=10));
        if let Ok(w) = Weights::new(r, p, v) {
            return w;
        }
    }
}

/// Random PB instance: `m` constraints over up to `width` literals with
/// coefficients in `-cmax..=cmax`, a few equalities, and an objective over
/// random literals.
pub fn pb_instance(rng: &mut impl Rng, n: usize, m: usize, width: usize, cmax: i64) -> PboInstance {
    let mut inst = PboInstance::new(n);
    let vars: Vec<usize> = (0..n).collect();
    for _ in 0..m {
        let k = rng.gen_range(1..=width.min(n));
        let mut terms = Vec::with_capacity(k);
        for &v in vars.choose_multiple(rng, k) {
            let mut coef = rng.gen_range(1..=cmax);
            if rng.gen_bool(0.2) {
                coef = -coef;
            }
            terms.push(Term::new(coef, lit(v, rng.gen_bool(0.5))));
        }
        terms.sort_by_key(|t| t.lit.var());
        let hi: i64 = terms.iter().map(|t| t.coef.max(0)).sum();
        let lo: i64 = terms.iter().map(|t| t.coef.min(0)).sum();
        let bound = rng.gen_range(lo..=lo + (hi - lo) * 2 / 3 + 1);
        if rng.gen_bool(0.08) {
            inst.constraints.push(PbConstraint::equal(terms, bound.min(hi)));
        } else {
            inst.constraints.push(PbConstraint::at_least(terms, bound));
        }
    }
    for &v in vars.iter() {
        if rng.gen_bool(0.7) {
            inst.objective.push(Term::new(rng.gen_range(0..=10), lit(v, rng.gen_bool(0.3))));
        }
    }
    inst
}

fn lit(v: usize, negated: bool) -> debpbo_core::Lit {
    let var = Var::from_index(v);
    if negated {
        var.neg()
    } else {
        var.pos()
    }
}
