//! Package universe: repository stanzas, installed state and the
//! name / provides indices the encoder works from.
//!
//! The text format is a subset of Debian control stanzas:
//!
//! ```text
//! Package: exim
//! Version: 4.69-9
//! Depends: libc6 (>= 2.7), libdb4.6 | libdb4.7
//! Conflicts: sendmail
//! Provides: mail-transport-agent
//! Installed: yes
//! ```
//!
//! `Installed: local` marks a unit that is installed but no longer
//! downloadable from any repository.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::version::{freshness_from_rank, Version};

/// Index of a unit inside its [`Universe`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitId(pub u32);

impl UnitId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Version relation of a [`ConstraintRef`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Eq,
    Ge,
    Le,
    Gt,
    Lt,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Le => "<=",
            Relation::Gt => ">>",
            Relation::Lt => "<<",
        }
    }

    fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "=" => Relation::Eq,
            ">=" => Relation::Ge,
            "<=" => Relation::Le,
            ">>" => Relation::Gt,
            "<<" => Relation::Lt,
            _ => return None,
        })
    }

    pub fn holds(self, candidate: &Version, wanted: &Version) -> bool {
        let ord = candidate.cmp(wanted);
        match self {
            Relation::Eq => ord.is_eq(),
            Relation::Ge => ord.is_ge(),
            Relation::Le => ord.is_le(),
            Relation::Gt => ord.is_gt(),
            Relation::Lt => ord.is_lt(),
        }
    }
}

/// A reference to a package name, optionally restricted by version.
/// `version == None` is the unrestricted ("any") relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintRef {
    pub name: String,
    pub version: Option<(Relation, Version)>,
}

impl ConstraintRef {
    pub fn any(name: impl Into<String>) -> Self {
        ConstraintRef { name: name.into(), version: None }
    }

    pub fn versioned(name: impl Into<String>, relation: Relation, version: Version) -> Self {
        ConstraintRef { name: name.into(), version: Some((relation, version)) }
    }

    /// Parses `name`, `name (op version)` or the shorthand `name=version`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        if let Some(open) = text.find('(') {
            let name = text[..open].trim();
            let inner = text[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| format!("unbalanced parenthesis in `{text}`"))?
                .trim();
            let op_len = inner
                .find(|c: char| !matches!(c, '<' | '>' | '='))
                .ok_or_else(|| format!("missing version in `{text}`"))?;
            let relation = Relation::from_symbol(&inner[..op_len])
                .ok_or_else(|| format!("unknown relation `{}` in `{text}`", &inner[..op_len]))?;
            let version = Version::parse(inner[op_len..].trim()).map_err(|e| e.to_string())?;
            check_name(name)?;
            return Ok(ConstraintRef::versioned(name, relation, version));
        }
        if let Some((name, version)) = text.split_once('=') {
            check_name(name.trim())?;
            let version = Version::parse(version.trim()).map_err(|e| e.to_string())?;
            return Ok(ConstraintRef::versioned(name.trim(), Relation::Eq, version));
        }
        check_name(text)?;
        Ok(ConstraintRef::any(text))
    }

    pub fn matches(&self, unit: &PackageUnit) -> bool {
        unit.name == self.name
            && match &self.version {
                None => true,
                Some((rel, v)) => rel.holds(&unit.version, v),
            }
    }
}

impl fmt::Display for ConstraintRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.version {
            None => f.write_str(&self.name),
            Some((rel, v)) => write!(f, "{} ({} {})", self.name, rel.symbol(), v),
        }
    }
}

/// A disjunction of alternatives; never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyClause {
    alternatives: Vec<ConstraintRef>,
}

impl DependencyClause {
    pub fn new(alternatives: Vec<ConstraintRef>) -> Option<Self> {
        if alternatives.is_empty() {
            None
        } else {
            Some(DependencyClause { alternatives })
        }
    }

    pub fn alternatives(&self) -> &[ConstraintRef] {
        &self.alternatives
    }
}

impl fmt::Display for DependencyClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, alt) in self.alternatives.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{alt}")?;
        }
        Ok(())
    }
}

/// One concrete (name, version) pair: the atom that becomes a Boolean
/// variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackageUnit {
    pub name: String,
    pub version: Version,
    pub depends: Vec<DependencyClause>,
    pub conflicts: Vec<ConstraintRef>,
    pub provides: Vec<String>,
    pub installed: bool,
    /// False for units that are installed but absent from every repository.
    pub available: bool,
}

impl PackageUnit {
    pub fn new(name: impl Into<String>, version: Version) -> Self {
        PackageUnit {
            name: name.into(),
            version,
            depends: Vec::new(),
            conflicts: Vec::new(),
            provides: Vec::new(),
            installed: false,
            available: true,
        }
    }
}

impl fmt::Display for PackageUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: malformed stanza: {reason}")]
    MalformedStanza { line: usize, reason: String },
    #[error("duplicate unit {name}@{version}")]
    DuplicateUnit { name: String, version: String },
    #[error("line {line}: empty alternative in dependency list")]
    EmptyAlternative { line: usize },
}

/// A non-fatal parse diagnostic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Measured shape of a universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UniverseStats {
    /// Distinct names mentioned anywhere: unit names, provided names and
    /// names referenced by dependencies or conflicts.
    pub names: usize,
    pub units: usize,
    /// Dependency clauses summed over all units.
    pub dependencies: usize,
    /// (unit, virtual name) provides pairs.
    pub provides: usize,
    pub installed: usize,
}

/// The immutable package universe.
#[derive(Debug, Clone)]
pub struct Universe {
    units: Vec<PackageUnit>,
    by_name: BTreeMap<String, Vec<UnitId>>,
    providers: BTreeMap<String, Vec<UnitId>>,
}

impl PartialEq for Universe {
    fn eq(&self, other: &Self) -> bool {
        self.units == other.units
    }
}

impl Eq for Universe {}

impl Universe {
    /// Builds the indices. Fails on a duplicate (name, version).
    pub fn new(units: Vec<PackageUnit>) -> Result<Self, ParseError> {
        let mut by_name: BTreeMap<String, Vec<UnitId>> = BTreeMap::new();
        let mut providers: BTreeMap<String, Vec<UnitId>> = BTreeMap::new();
        for (i, unit) in units.iter().enumerate() {
            let id = UnitId(i as u32);
            let versions = by_name.entry(unit.name.clone()).or_default();
            if versions.iter().any(|&o| units[o.index()].version == unit.version) {
                return Err(ParseError::DuplicateUnit {
                    name: unit.name.clone(),
                    version: unit.version.to_string(),
                });
            }
            versions.push(id);
            let mut seen = BTreeSet::new();
            for virt in &unit.provides {
                if seen.insert(virt.as_str()) {
                    providers.entry(virt.clone()).or_default().push(id);
                }
            }
        }
        for ids in by_name.values_mut() {
            ids.sort_by(|a, b| units[b.index()].version.cmp(&units[a.index()].version));
        }
        Ok(Universe { units, by_name, providers })
    }

    pub fn empty() -> Self {
        Universe { units: Vec::new(), by_name: BTreeMap::new(), providers: BTreeMap::new() }
    }

    pub fn unit(&self, id: UnitId) -> &PackageUnit {
        &self.units[id.index()]
    }

    pub fn units(&self) -> &[PackageUnit] {
        &self.units
    }

    pub fn ids(&self) -> impl Iterator<Item = UnitId> + '_ {
        (0..self.units.len() as u32).map(UnitId)
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// All versions of `name`, newest first.
    pub fn versions_of(&self, name: &str) -> &[UnitId] {
        self.by_name.get(name).map_or(&[], Vec::as_slice)
    }

    /// Names that have at least one unit, in lexicographic order.
    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.by_name.keys().map(String::as_str)
    }

    /// Units providing the virtual `name`.
    pub fn providers_of(&self, name: &str) -> &[UnitId] {
        self.providers.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn installed(&self) -> impl Iterator<Item = UnitId> + '_ {
        self.ids().filter(move |&id| self.unit(id).installed)
    }

    pub fn find(&self, name: &str, version: &Version) -> Option<UnitId> {
        self.versions_of(name)
            .iter()
            .copied()
            .find(|&id| self.unit(id).version == *version)
    }

    /// Units satisfying `r`, newest first (ties by name), without repeats.
    /// Unversioned refs also match every provider of the name; versioned
    /// refs never match provides.
    pub fn resolve_ref(&self, r: &ConstraintRef) -> Vec<UnitId> {
        let mut out: Vec<UnitId> = self
            .versions_of(&r.name)
            .iter()
            .copied()
            .filter(|&id| r.matches(self.unit(id)))
            .collect();
        if r.version.is_none() {
            for &id in self.providers_of(&r.name) {
                if !out.contains(&id) {
                    out.push(id);
                }
            }
            out.sort_by(|&a, &b| {
                let (ua, ub) = (self.unit(a), self.unit(b));
                ub.version.cmp(&ua.version).then_with(|| ua.name.cmp(&ub.name))
            });
        }
        out
    }

    /// Freshness penalty in `0..=100`: the rank of the unit among the
    /// downloadable versions of its name, scaled so the newest is 0 and the
    /// oldest 100. Units missing from the repositories score 100.
    pub fn freshness(&self, id: UnitId) -> u32 {
        let unit = self.unit(id);
        let available: Vec<UnitId> = self
            .versions_of(&unit.name)
            .iter()
            .copied()
            .filter(|&o| self.unit(o).available)
            .collect();
        if !unit.available {
            return if available.is_empty() { 0 } else { 100 };
        }
        let rank = available.iter().position(|&o| o == id).unwrap_or(0);
        freshness_from_rank(rank, available.len())
    }

    pub fn stats(&self) -> UniverseStats {
        let mut names: BTreeSet<&str> = BTreeSet::new();
        let mut stats = UniverseStats { units: self.units.len(), ..Default::default() };
        for u in &self.units {
            names.insert(&u.name);
            for p in &u.provides {
                names.insert(p);
            }
            for c in &u.depends {
                for alt in c.alternatives() {
                    names.insert(&alt.name);
                }
            }
            for c in &u.conflicts {
                names.insert(&c.name);
            }
            stats.dependencies += u.depends.len();
            stats.provides += u.provides.len();
            stats.installed += u.installed as usize;
        }
        stats.names = names.len();
        stats
    }

    /// Renders the universe back into stanza text.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (i, u) in self.units.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("Package: {}\nVersion: {}\n", u.name, u.version));
            if !u.depends.is_empty() {
                out.push_str("Depends: ");
                out.push_str(&join(u.depends.iter()));
                out.push('\n');
            }
            if !u.conflicts.is_empty() {
                out.push_str("Conflicts: ");
                out.push_str(&join(u.conflicts.iter()));
                out.push('\n');
            }
            if !u.provides.is_empty() {
                out.push_str("Provides: ");
                out.push_str(&join(u.provides.iter()));
                out.push('\n');
            }
            match (u.installed, u.available) {
                (true, true) => out.push_str("Installed: yes\n"),
                (true, false) => out.push_str("Installed: local\n"),
                _ => {}
            }
        }
        out
    }
}

fn join<T: fmt::Display>(items: impl Iterator<Item = T>) -> String {
    let mut s = String::new();
    for (i, item) in items.enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        s.push_str(&item.to_string());
    }
    s
}

fn check_name(name: &str) -> Result<(), String> {
    if name.is_empty() {
        return Err("empty package name".to_string());
    }
    if let Some(c) = name
        .chars()
        .find(|c| !(c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '.' | '+' | '-')))
    {
        return Err(format!("invalid character {c:?} in package name `{name}`"));
    }
    Ok(())
}

pub fn parse_universe(text: &str) -> Result<Universe, ParseError> {
    parse_universe_with_warnings(text).map(|(u, _)| u)
}

/// Parses stanza text, also returning warnings for ignored fields.
pub fn parse_universe_with_warnings(text: &str) -> Result<(Universe, Vec<ParseWarning>), ParseError> {
    let mut units = Vec::new();
    let mut warnings = Vec::new();
    let mut stanza: Vec<(usize, String, String)> = Vec::new();

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
    loop {
        let next = lines.next();
        let at_break = match next {
            None => true,
            Some((_, l)) => l.trim().is_empty(),
        };
        if at_break {
            if !stanza.is_empty() {
                units.push(build_unit(core::mem::take(&mut stanza), &mut warnings)?);
            }
            if next.is_none() {
                break;
            }
            continue;
        }
        let (line_no, line) = next.unwrap();
        if line.starts_with('#') {
            continue;
        }
        if line.starts_with(' ') || line.starts_with('\t') {
            match stanza.last_mut() {
                Some((_, _, value)) => {
                    value.push(' ');
                    value.push_str(line.trim());
                }
                None => {
                    return Err(ParseError::MalformedStanza {
                        line: line_no,
                        reason: "continuation line without a field".to_string(),
                    })
                }
            }
            continue;
        }
        let (field, value) = line.split_once(':').ok_or_else(|| ParseError::MalformedStanza {
            line: line_no,
            reason: format!("expected `Field: value`, got `{line}`"),
        })?;
        stanza.push((line_no, field.trim().to_string(), value.trim().to_string()));
    }

    let universe = Universe::new(units)?;
    Ok((universe, warnings))
}

fn build_unit(
    fields: Vec<(usize, String, String)>,
    warnings: &mut Vec<ParseWarning>,
) -> Result<PackageUnit, ParseError> {
    let first_line = fields[0].0;
    let mut name = None;
    let mut version = None;
    let mut depends = Vec::new();
    let mut conflicts = Vec::new();
    let mut provides = Vec::new();
    let mut installed = false;
    let mut available = true;
    let mut seen: BTreeSet<String> = BTreeSet::new();

    for (line, field, value) in fields {
        let key = field.to_ascii_lowercase();
        let malformed = |reason: String| ParseError::MalformedStanza { line, reason };
        if !seen.insert(key.clone()) {
            return Err(malformed(format!("field `{field}` given twice")));
        }
        match key.as_str() {
            "package" => {
                check_name(&value).map_err(malformed)?;
                name = Some(value);
            }
            "version" => {
                version = Some(Version::parse(&value).map_err(|e| malformed(e.to_string()))?);
            }
            "depends" => {
                if value.is_empty() {
                    continue;
                }
                for clause in value.split(',') {
                    let mut alternatives = Vec::new();
                    for alt in clause.split('|') {
                        if alt.trim().is_empty() {
                            return Err(ParseError::EmptyAlternative { line });
                        }
                        alternatives.push(ConstraintRef::parse(alt).map_err(malformed)?);
                    }
                    depends.push(DependencyClause::new(alternatives).ok_or(ParseError::EmptyAlternative { line })?);
                }
            }
            "conflicts" => {
                for c in value.split(',').filter(|c| !c.trim().is_empty()) {
                    if c.contains('|') {
                        return Err(malformed("alternatives are not allowed in Conflicts".to_string()));
                    }
                    conflicts.push(ConstraintRef::parse(c).map_err(malformed)?);
                }
            }
            "provides" => {
                for p in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    check_name(p).map_err(malformed)?;
                    provides.push(p.to_string());
                }
            }
            "installed" => match value.as_str() {
                "yes" => installed = true,
                "local" => {
                    installed = true;
                    available = false;
                }
                "no" | "" => {}
                other => return Err(malformed(format!("Installed must be `yes`, got `{other}`"))),
            },
            _ => warnings.push(ParseWarning { line, message: format!("ignoring unknown field `{field}`") }),
        }
    }

    let malformed = |reason: &str| ParseError::MalformedStanza { line: first_line, reason: reason.to_string() };
    Ok(PackageUnit {
        name: name.ok_or_else(|| malformed("missing Package field"))?,
        version: version.ok_or_else(|| malformed("missing Version field"))?,
        depends,
        conflicts,
        provides,
        installed,
        available,
    })
}
