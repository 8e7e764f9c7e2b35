//! Synthetic universes shaped like the conservative and aggressive Debian
//! scenarios, and the request streams run against them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::universe::{ConstraintRef, DependencyClause, PackageUnit, Relation, Universe, UnitId};
use crate::version::Version;

/// A distribution over non-negative counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistSpec {
    Fixed(u32),
    /// Uniform over `lo..=hi`.
    Uniform(u32, u32),
    /// `floor(m)` plus one with probability `m - floor(m)`.
    Mean(f64),
}

impl DistSpec {
    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        match *self {
            DistSpec::Fixed(k) => k,
            DistSpec::Uniform(lo, hi) => rng.gen_range(lo..=hi),
            DistSpec::Mean(m) => {
                let base = m as u32;
                let frac = m - base as f64;
                base + rng.gen_bool(frac) as u32
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistSpec::Fixed(k) => k as f64,
            DistSpec::Uniform(lo, hi) => (lo as f64 + hi as f64) / 2.0,
            DistSpec::Mean(m) => m,
        }
    }

    pub fn min(&self) -> u32 {
        match *self {
            DistSpec::Fixed(k) => k,
            DistSpec::Uniform(lo, _) => lo,
            DistSpec::Mean(m) if m == (m as u32) as f64 => m as u32,
            DistSpec::Mean(m) => m as u32,
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            DistSpec::Fixed(_) => true,
            DistSpec::Uniform(lo, hi) => lo <= hi,
            DistSpec::Mean(m) => m.is_finite() && m >= 0.0 && m < u32::MAX as f64,
        }
    }

    /// `3`, `1..4` (inclusive) or `mean 0.8`. A bare decimal is a mean.
    pub fn parse(text: &str) -> Result<Self, String> {
        let t = text.trim();
        let bad = || format!("bad distribution `{t}`");
        if let Some(m) = t.strip_prefix("mean") {
            let m: f64 = m.trim().parse().map_err(|_| bad())?;
            let d = DistSpec::Mean(m);
            return if d.is_valid() { Ok(d) } else { Err(bad()) };
        }
        if let Some((lo, hi)) = t.split_once("..") {
            let lo = lo.trim().parse().map_err(|_| bad())?;
            let hi = hi.trim().parse().map_err(|_| bad())?;
            let d = DistSpec::Uniform(lo, hi);
            return if d.is_valid() { Ok(d) } else { Err(bad()) };
        }
        if let Ok(k) = t.parse::<u32>() {
            return Ok(DistSpec::Fixed(k));
        }
        let m: f64 = t.parse().map_err(|_| bad())?;
        let d = DistSpec::Mean(m);
        if d.is_valid() {
            Ok(d)
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistSpec::Fixed(k) => write!(f, "{k}"),
            DistSpec::Uniform(lo, hi) => write!(f, "{lo}..{hi}"),
            DistSpec::Mean(m) => write!(f, "mean {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub package_names: u32,
    pub versions_per_name: DistSpec,
    pub deps_per_unit: DistSpec,
    pub alt_per_clause: DistSpec,
    /// Probability that a unit declares a conflict.
    pub conflict_rate: f64,
    /// Probability that a unit provides a name.
    pub provides_rate: f64,
    /// Probability that a name is seeded into the installed set.
    pub installed_fraction: f64,
    /// Probability that a dependency alternative can never be satisfied.
    pub broken_rate: f64,
    pub seed: u64,
    /// Requests drawn per benchmark batch.
    pub transactions: u32,
}

impl ScenarioSpec {
    /// Only the Lenny repositories, scaled down 100 times.
    pub fn conservative() -> Self {
        ScenarioSpec {
            name: "conservative".to_string(),
            package_names: 300,
            versions_per_name: DistSpec::Mean(0.8),
            deps_per_unit: DistSpec::Mean(6.125),
            alt_per_clause: DistSpec::Mean(1.1),
            conflict_rate: 0.05,
            provides_rate: 0.21,
            installed_fraction: 0.1,
            broken_rate: 0.0,
            seed: 1,
            transactions: 100,
        }
    }

    /// Lenny plus Sid and Backports, scaled down 100 times.
    pub fn aggressive() -> Self {
        ScenarioSpec {
            name: "aggressive".to_string(),
            package_names: 420,
            versions_per_name: DistSpec::Mean(1.22),
            deps_per_unit: DistSpec::Mean(6.377),
            alt_per_clause: DistSpec::Mean(1.1),
            conflict_rate: 0.05,
            provides_rate: 0.214,
            installed_fraction: 0.1,
            broken_rate: 0.0,
            seed: 1,
            transactions: 100,
        }
    }

    pub fn validate(&self) -> Result<(), InfeasibleSpec> {
        for (field, p) in [
            ("conflict_rate", self.conflict_rate),
            ("provides_rate", self.provides_rate),
            ("installed_fraction", self.installed_fraction),
            ("broken_rate", self.broken_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(InfeasibleSpec(format!("{field} must lie in [0, 1]")));
            }
        }
        for (field, d) in [
            ("versions_per_name", self.versions_per_name),
            ("deps_per_unit", self.deps_per_unit),
            ("alt_per_clause", self.alt_per_clause),
        ] {
            if !d.is_valid() {
                return Err(InfeasibleSpec(format!("{field}: invalid distribution {d}")));
            }
        }
        if self.deps_per_unit.mean() > 0.0 && self.alt_per_clause.min() == 0 {
            return Err(InfeasibleSpec("alt_per_clause can draw an empty dependency".to_string()));
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment. Keys not given keep
    /// their defaults from [`ScenarioSpec::conservative`].
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut spec = ScenarioSpec::conservative();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let err = |what: &str| format!("line {}: {key}: {what}", i + 1);
            let num = |v: &str| v.parse::<f64>().map_err(|_| err("expected a number"));
            match key {
                "name" => spec.name = value.to_string(),
                "package_names" => spec.package_names = value.parse().map_err(|_| err("expected a count"))?,
                "versions_per_name" => spec.versions_per_name = DistSpec::parse(value).map_err(|e| err(&e))?,
                "deps_per_unit" => spec.deps_per_unit = DistSpec::parse(value).map_err(|e| err(&e))?,
                "alt_per_clause" => spec.alt_per_clause = DistSpec::parse(value).map_err(|e| err(&e))?,
                "conflict_rate" => spec.conflict_rate = num(value)?,
                "provides_rate" => spec.provides_rate = num(value)?,
                "installed_fraction" => spec.installed_fraction = num(value)?,
                "broken_rate" => spec.broken_rate = num(value)?,
                "seed" => spec.seed = value.parse().map_err(|_| err("expected an integer"))?,
                "transactions" => spec.transactions = value.parse().map_err(|_| err("expected a count"))?,
                _ => return Err(err("unknown key")),
            }
        }
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }

    pub fn render(&self) -> String {
        format!(
            "name = {}\npackage_names = {}\nversions_per_name = {}\ndeps_per_unit = {}\nalt_per_clause = {}\n\
             conflict_rate = {}\nprovides_rate = {}\ninstalled_fraction = {}\nbroken_rate = {}\nseed = {}\ntransactions = {}\n",
            self.name,
            self.package_names,
            self.versions_per_name,
            self.deps_per_unit,
            self.alt_per_clause,
            self.conflict_rate,
            self.provides_rate,
            self.installed_fraction,
            self.broken_rate,
            self.seed,
            self.transactions
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("infeasible scenario spec: {0}")]
pub struct InfeasibleSpec(pub String);

// Share of dependency alternatives that carry a `>=` bound when the target
// has several versions.
const VERSIONED_REF_RATE: f64 = 0.3;

fn package_name(i: u32) -> String {
    format!("pkg{i:04}")
}

/// Builds a universe for `spec`. Identical specs give identical universes.
pub fn generate(spec: &ScenarioSpec) -> Result<Universe, InfeasibleSpec> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.package_names;

    // Versions per name.
    let mut units: Vec<PackageUnit> = Vec::new();
    let mut by_name: Vec<Vec<usize>> = Vec::with_capacity(n as usize);
    for i in 0..n {
        let k = spec.versions_per_name.sample(&mut rng);
        let mut ids = Vec::new();
        for j in 0..k {
            let text = format!("{}.{}-{}", j + 1, rng.gen_range(0..10), rng.gen_range(1..4));
            let version = Version::parse(&text).expect("generated version");
            ids.push(units.len());
            units.push(PackageUnit::new(package_name(i), version));
        }
        by_name.push(ids);
    }
    let real: Vec<u32> = (0..n).filter(|&i| !by_name[i as usize].is_empty()).collect();
    let mut uncovered: Vec<u32> = (0..n).filter(|&i| by_name[i as usize].is_empty()).collect();
    uncovered.reverse();

    if spec.conflict_rate > 0.0 && !units.is_empty() && real.len() < 2 {
        return Err(InfeasibleSpec("conflicts would all be self-conflicts".to_string()));
    }

    // Provides: cover virtual names first, then alias real ones.
    let mut covered: BTreeSet<u32> = BTreeSet::new();
    for unit in units.iter_mut() {
        if !rng.gen_bool(spec.provides_rate) {
            continue;
        }
        let own = unit.name.clone();
        let target = match uncovered.pop() {
            Some(v) => v,
            None => {
                let candidates: Vec<u32> = (0..n).filter(|&i| package_name(i) != own).collect();
                match candidates.choose(&mut rng) {
                    Some(&c) => c,
                    None => continue,
                }
            }
        };
        covered.insert(target);
        let name = package_name(target);
        if !unit.provides.contains(&name) {
            unit.provides.push(name);
        }
    }
    let resolvable: Vec<u32> = (0..n)
        .filter(|&i| !by_name[i as usize].is_empty() || covered.contains(&i))
        .collect();

    // Dependencies point at lower-numbered names, skewed towards the
    // lowest ones: a few core libraries carry most reverse dependencies.
    for u in 0..units.len() {
        let own: u32 = units[u].name[3..].parse().expect("generated name");
        let lower = resolvable.partition_point(|&i| i < own);
        let clauses = spec.deps_per_unit.sample(&mut rng);
        if lower == 0 {
            continue;
        }
        for _ in 0..clauses {
            let alts = spec.alt_per_clause.sample(&mut rng);
            let mut picked: Vec<u32> = Vec::new();
            for _ in 0..alts {
                let x: f64 = rng.gen();
                let t = resolvable[((lower as f64) * x * x * x) as usize];
                if !picked.contains(&t) {
                    picked.push(t);
                }
            }
            let mut refs: Vec<ConstraintRef> = Vec::new();
            for t in picked {
                let versions = &by_name[t as usize];
                let name = package_name(t);
                if rng.gen_bool(spec.broken_rate) {
                    refs.push(ConstraintRef::versioned(name, Relation::Ge, Version::parse("9999").unwrap()));
                } else if versions.len() > 1 && rng.gen_bool(VERSIONED_REF_RATE) {
                    let pick = versions[rng.gen_range(0..versions.len())];
                    refs.push(ConstraintRef::versioned(name, Relation::Ge, units[pick].version.clone()));
                } else {
                    refs.push(ConstraintRef::any(name));
                }
            }
            if let Some(clause) = DependencyClause::new(refs) {
                units[u].depends.push(clause);
            }
        }
    }

    // Installed state: seeds, then a greedy dependency closure.
    let draft = Universe::new(units.clone()).map_err(|e| InfeasibleSpec(e.to_string()))?;
    let mut installed: BTreeSet<UnitId> = BTreeSet::new();
    let mut installed_name: BTreeMap<String, UnitId> = BTreeMap::new();
    let mut work: Vec<UnitId> = Vec::new();
    for &i in &real {
        if rng.gen_bool(spec.installed_fraction) {
            let versions = &by_name[i as usize];
            let id = UnitId(versions[rng.gen_range(0..versions.len())] as u32);
            installed.insert(id);
            installed_name.insert(package_name(i), id);
            work.push(id);
        }
    }
    while let Some(id) = work.pop() {
        for clause in &draft.unit(id).depends {
            let satisfied = clause
                .alternatives()
                .iter()
                .any(|r| draft.resolve_ref(r).iter().any(|c| installed.contains(c)));
            if satisfied {
                continue;
            }
            let pick = clause.alternatives().iter().find_map(|r| {
                draft
                    .resolve_ref(r)
                    .into_iter()
                    .find(|&c| !installed_name.contains_key(draft.unit(c).name.as_str()))
            });
            if let Some(c) = pick {
                installed.insert(c);
                installed_name.insert(draft.unit(c).name.clone(), c);
                work.push(c);
            }
        }
    }
    for &id in &installed {
        units[id.index()].installed = true;
    }

    // Conflicts, avoiding ones the installed state already violates.
    for u in 0..units.len() {
        if !rng.gen_bool(spec.conflict_rate) {
            continue;
        }
        let own = units[u].name.clone();
        let others: Vec<u32> = real.iter().copied().filter(|&i| package_name(i) != own).collect();
        let Some(&t) = others.choose(&mut rng) else { continue };
        let versions = &by_name[t as usize];
        // Against a multi-version name only old versions clash, so an
        // upgrade always resolves it.
        let r = match versions.iter().map(|&v| &units[v].version).max() {
            Some(newest) if versions.len() > 1 => {
                ConstraintRef::versioned(package_name(t), Relation::Lt, newest.clone())
            }
            _ => ConstraintRef::any(package_name(t)),
        };
        let clash = units[u].installed && versions.iter().any(|&v| units[v].installed && r.matches(&units[v]));
        if !clash {
            units[u].conflicts.push(r);
        }
    }

    // Names neither versioned nor provided stay visible as obsolete
    // conflict targets.
    if !units.is_empty() {
        for v in uncovered.into_iter().rev() {
            let u = rng.gen_range(0..units.len());
            units[u].conflicts.push(ConstraintRef::any(package_name(v)));
        }
    }

    Universe::new(units).map_err(|e| InfeasibleSpec(e.to_string()))
}

/// Install requests drawn uniformly, with replacement, from names that have
/// at least one version not yet installed.
pub fn draw_requests(universe: &Universe, count: u32, seed: u64) -> Vec<ConstraintRef> {
    let candidates: Vec<&str> = universe
        .names()
        .filter(|name| universe.versions_of(name).iter().any(|&id| !universe.unit(id).installed))
        .collect();
    if candidates.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7a11_0000_0001);
    (0..count)
        .map(|_| ConstraintRef::any(*candidates.choose(&mut rng).expect("non-empty")))
        .collect()
}
