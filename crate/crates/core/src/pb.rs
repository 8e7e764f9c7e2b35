//! Linear pseudo-Boolean instances over literals.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Not;

/// A Boolean variable. Stored 0-based; rendered 1-based as `x<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u32);

impl Var {
    pub fn from_index(index: usize) -> Self {
        Var(index as u32)
    }

    /// From the 1-based number used in OPB files.
    pub fn from_number(n: u32) -> Option<Self> {
        n.checked_sub(1).map(Var)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn number(self) -> u32 {
        self.0 + 1
    }

    pub fn pos(self) -> Lit {
        Lit(self.0 << 1)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Lit {
        Lit((self.0 << 1) | 1)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.number())
    }
}

/// A variable or its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, negated: bool) -> Self {
        if negated {
            var.neg()
        } else {
            var.pos()
        }
    }

    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    /// Dense code `2 * var + negated`, for literal-indexed tables.
    pub fn code(self) -> usize {
        self.0 as usize
    }

    /// From a signed DIMACS-style number: `3` is `x3`, `-3` is `~x3`.
    pub fn from_signed(n: i64) -> Option<Self> {
        let var = Var::from_number(u32::try_from(n.unsigned_abs()).ok()?)?;
        Some(Lit::new(var, n < 0))
    }

    pub fn to_signed(self) -> i64 {
        let n = self.var().number() as i64;
        if self.is_negated() {
            -n
        } else {
            n
        }
    }
}

impl Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_negated() {
            f.write_str("~")?;
        }
        write!(f, "{}", self.var())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Term {
    pub coef: i64,
    pub lit: Lit,
}

impl Term {
    pub fn new(coef: i64, lit: Lit) -> Self {
        Term { coef, lit }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PbRelation {
    AtLeast,
    Equal,
}

/// `sum(terms) >= bound` or `sum(terms) = bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PbConstraint {
    pub terms: Vec<Term>,
    pub relation: PbRelation,
    pub bound: i64,
}

impl PbConstraint {
    pub fn at_least(terms: Vec<Term>, bound: i64) -> Self {
        PbConstraint { terms, relation: PbRelation::AtLeast, bound }
    }

    pub fn equal(terms: Vec<Term>, bound: i64) -> Self {
        PbConstraint { terms, relation: PbRelation::Equal, bound }
    }

    /// `sum(terms) <= bound`, stored as `sum(coef * ~lit) >= sum(coef) - bound`.
    pub fn at_most(terms: Vec<Term>, bound: i64) -> Self {
        let total: i64 = terms.iter().map(|t| t.coef).sum();
        let terms = terms.into_iter().map(|t| Term::new(t.coef, !t.lit)).collect();
        PbConstraint::at_least(terms, total - bound)
    }

    /// Rewrites negative coefficients onto the negated literal, drops zero
    /// terms and sorts by variable index.
    pub fn normalized(&self) -> PbConstraint {
        let mut bound = self.bound;
        let mut terms: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            match t.coef {
                0 => {}
                c if c < 0 => {
                    bound -= c;
                    terms.push(Term::new(-c, !t.lit));
                }
                c => terms.push(Term::new(c, t.lit)),
            }
        }
        terms.sort_by_key(|t| t.lit.var());
        PbConstraint { terms, relation: self.relation, bound }
    }

    pub fn lhs(&self, assignment: &Assignment) -> i64 {
        self.terms
            .iter()
            .filter(|t| assignment.lit_value(t.lit))
            .map(|t| t.coef)
            .sum()
    }

    pub fn is_satisfied(&self, assignment: &Assignment) -> bool {
        let lhs = self.lhs(assignment);
        match self.relation {
            PbRelation::AtLeast => lhs >= self.bound,
            PbRelation::Equal => lhs == self.bound,
        }
    }

    pub fn max_var(&self) -> Option<Var> {
        self.terms.iter().map(|t| t.lit.var()).max()
    }
}

impl fmt::Display for PbConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            write!(f, "{:+} {} ", t.coef, t.lit)?;
        }
        let rel = match self.relation {
            PbRelation::AtLeast => ">=",
            PbRelation::Equal => "=",
        };
        write!(f, "{} {}", rel, self.bound)
    }
}

/// Minimize `objective` subject to `constraints`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PboInstance {
    pub num_vars: usize,
    pub constraints: Vec<PbConstraint>,
    pub objective: Vec<Term>,
}

impl PboInstance {
    pub fn new(num_vars: usize) -> Self {
        PboInstance { num_vars, constraints: Vec::new(), objective: Vec::new() }
    }

    pub fn objective_value(&self, assignment: &Assignment) -> i64 {
        self.objective
            .iter()
            .filter(|t| assignment.lit_value(t.lit))
            .map(|t| t.coef)
            .sum()
    }

    /// Index of the first violated constraint, if any.
    pub fn first_violation(&self, assignment: &Assignment) -> Option<usize> {
        self.constraints.iter().position(|c| !c.is_satisfied(assignment))
    }

    pub fn is_satisfied_by(&self, assignment: &Assignment) -> bool {
        assignment.len() == self.num_vars && self.first_violation(assignment).is_none()
    }

    /// The objective folded per variable: positive coefficients on
    /// literals plus an additive constant.
    pub fn merged_objective(&self) -> (Vec<Term>, i64) {
        merge_terms(&self.objective)
    }
}

/// Folds repeated variables: `a*x + b*~x = (a - b)*x + b`. The result has
/// positive coefficients, one term per variable, sorted by variable, and a
/// constant offset.
pub fn merge_terms(terms: &[Term]) -> (Vec<Term>, i64) {
    let mut per_var: BTreeMap<Var, i64> = BTreeMap::new();
    let mut constant = 0i64;
    for t in terms {
        let slot = per_var.entry(t.lit.var()).or_insert(0);
        if t.lit.is_negated() {
            constant += t.coef;
            *slot -= t.coef;
        } else {
            *slot += t.coef;
        }
    }
    let mut out = Vec::with_capacity(per_var.len());
    for (var, c) in per_var {
        match c {
            0 => {}
            c if c > 0 => out.push(Term::new(c, var.pos())),
            c => {
                constant += c;
                out.push(Term::new(-c, var.neg()));
            }
        }
    }
    (out, constant)
}

/// A total truth assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn all_false(num_vars: usize) -> Self {
        Assignment(vec![false; num_vars])
    }

    pub fn from_bits(bits: u64, num_vars: usize) -> Self {
        Assignment((0..num_vars).map(|i| bits >> i & 1 == 1).collect())
    }

    /// Literals set true; variables not mentioned stay false.
    pub fn from_lits(num_vars: usize, lits: &[Lit]) -> Self {
        let mut a = Assignment::all_false(num_vars);
        for &l in lits {
            if l.var().index() < num_vars {
                a.0[l.var().index()] = !l.is_negated();
            }
        }
        a
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn value(&self, var: Var) -> bool {
        self.0[var.index()]
    }

    pub fn set(&mut self, var: Var, value: bool) {
        self.0[var.index()] = value;
    }

    pub fn lit_value(&self, lit: Lit) -> bool {
        self.0.get(lit.var().index()).copied().unwrap_or(false) != lit.is_negated()
    }

    /// One literal per variable, true ones positive.
    pub fn to_lits(&self) -> Vec<Lit> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &b)| Lit::new(Var::from_index(i), !b))
            .collect()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

impl From<Vec<bool>> for Assignment {
    fn from(v: Vec<bool>) -> Self {
        Assignment(v)
    }
}
