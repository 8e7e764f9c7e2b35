//! Embedded pseudo-Boolean optimizer.
//!
//! Conflict-driven search over normalized `sum(a_i * l_i) >= b` constraints.
//! General PB constraints propagate through slack counters
//! (`slack = sum of coefficients of non-false literals - bound`); clauses
//! use two watched literals. Conflict analysis learns clauses: each PB
//! reason contributes the clause formed by the literal it implied and a
//! subset of its false literals sufficient for the implication.
//!
//! Optimization is linear search on the objective: every model found
//! tightens the bound to `objective <= value - 1` until the instance
//! becomes unsatisfiable. When the budget runs out the best model so far
//! is returned.

use alloc::vec;
use alloc::vec::Vec;
use core::mem;

use crate::pb::{merge_terms, Assignment, Lit, PbRelation, PboInstance, Term, Var};

/// Decides when a search must stop early.
pub trait Budget {
    fn exhausted(&mut self, stats: &SolverStats) -> bool;
}

/// Never stops.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unlimited;

impl Budget for Unlimited {
    fn exhausted(&mut self, _: &SolverStats) -> bool {
        false
    }
}

/// Stops after a fixed number of conflicts.
#[derive(Debug, Clone, Copy)]
pub struct ConflictLimit(pub u64);

impl Budget for ConflictLimit {
    fn exhausted(&mut self, stats: &SolverStats) -> bool {
        stats.conflicts >= self.0
    }
}

impl<B: Budget + ?Sized> Budget for &mut B {
    fn exhausted(&mut self, stats: &SolverStats) -> bool {
        (**self).exhausted(stats)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub restarts: u64,
    pub learned: u64,
    pub solutions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimum,
    Satisfiable,
    Unsatisfiable,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub assignment: Option<Assignment>,
    pub objective: Option<i64>,
    pub stats: SolverStats,
}

impl SolveOutcome {
    pub fn unsatisfiable(stats: SolverStats) -> Self {
        SolveOutcome { status: SolveStatus::Unsatisfiable, assignment: None, objective: None, stats }
    }

    pub fn unknown(stats: SolverStats) -> Self {
        SolveOutcome { status: SolveStatus::Unknown, assignment: None, objective: None, stats }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Sat(Assignment),
    Unsat,
    Unknown,
}

/// Handle to a constraint that is violated under the current assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConflictId(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("conflict at decision level 0")]
pub struct RootConflict;

pub fn solve_decision(instance: &PboInstance, mut budget: impl Budget) -> Decision {
    Solver::new(instance).solve_decision(&mut budget)
}

pub fn optimize(instance: &PboInstance, mut budget: impl Budget) -> SolveOutcome {
    Solver::new(instance).optimize(&mut budget, |_, _| {})
}

const UNDEF: i8 = 0;
const RESTART_UNIT: u64 = 100;
const VAR_DECAY: f64 = 0.95;
const CLAUSE_DECAY: f64 = 0.999;

#[derive(Debug, Clone)]
struct Constr {
    lits: Vec<Lit>,
    /// Empty for clauses.
    coefs: Vec<i64>,
    bound: i64,
    slack: i64,
    max_coef: i64,
    total: i64,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

impl Constr {
    fn is_clause(&self) -> bool {
        self.coefs.is_empty()
    }
}

pub struct Solver {
    num_vars: usize,
    constrs: Vec<Constr>,
    values: Vec<i8>,
    levels: Vec<u32>,
    reasons: Vec<Option<u32>>,
    trail_pos: Vec<u32>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    /// Clauses watching a literal, indexed by literal code; visited when
    /// that literal becomes false.
    watches: Vec<Vec<u32>>,
    /// PB constraints containing a literal, with its coefficient.
    occurs: Vec<Vec<(u32, i64)>>,
    activity: Vec<f64>,
    var_inc: f64,
    clause_inc: f64,
    order: VarHeap,
    seen: Vec<bool>,
    unsat: bool,
    objective: Vec<Term>,
    merged_objective: (Vec<Term>, i64),
    /// The objective bound added by `optimize`, tightened in place.
    objective_bound: Option<u32>,
    luby_index: u32,
    conflicts_since_restart: u64,
    max_learnts: usize,
    num_learnts: usize,
    stats: SolverStats,
}

impl Solver {
    pub fn new(instance: &PboInstance) -> Self {
        let n = instance.num_vars;
        let mut s = Solver {
            num_vars: n,
            constrs: Vec::new(),
            values: vec![UNDEF; n],
            levels: vec![0; n],
            reasons: vec![None; n],
            trail_pos: vec![0; n],
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            qhead: 0,
            watches: vec![Vec::new(); 2 * n],
            occurs: vec![Vec::new(); 2 * n],
            activity: vec![0.0; n],
            var_inc: 1.0,
            clause_inc: 1.0,
            order: VarHeap::new(n),
            seen: vec![false; n],
            unsat: false,
            objective: instance.objective.clone(),
            merged_objective: instance.merged_objective(),
            objective_bound: None,
            luby_index: 0,
            conflicts_since_restart: 0,
            max_learnts: 0,
            num_learnts: 0,
            stats: SolverStats::default(),
        };
        for i in 0..n {
            s.order.insert(i as u32, &s.activity);
        }
        for c in &instance.constraints {
            let c = c.normalized();
            match c.relation {
                PbRelation::AtLeast => {
                    s.add_at_least(&c.terms, c.bound);
                }
                PbRelation::Equal => {
                    s.add_at_least(&c.terms, c.bound);
                    let flipped = PbConstraint::at_most(c.terms.clone(), c.bound).normalized();
                    s.add_at_least(&flipped.terms, flipped.bound);
                }
            }
            if s.unsat {
                break;
            }
        }
        s.max_learnts = (s.constrs.len() / 3).max(2000);
        s
    }

    pub fn stats(&self) -> &SolverStats {
        &self.stats
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Current learned clauses.
    pub fn learned_clauses(&self) -> impl Iterator<Item = &[Lit]> + '_ {
        self.constrs
            .iter()
            .filter(|c| c.learnt && !c.deleted)
            .map(|c| c.lits.as_slice())
    }

    pub fn value(&self, lit: Lit) -> Option<bool> {
        match self.lit_value(lit) {
            UNDEF => None,
            v => Some(v > 0),
        }
    }

    pub fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Opens a new decision level and assigns `lit`.
    pub fn decide(&mut self, lit: Lit) {
        debug_assert_eq!(self.lit_value(lit), UNDEF);
        self.trail_lim.push(self.trail.len());
        self.assign(lit, None);
    }

    pub fn solve_decision(&mut self, budget: &mut impl Budget) -> Decision {
        self.search(budget)
    }

    /// Linear-search minimization. `on_incumbent` sees every improving
    /// model with its objective value.
    pub fn optimize(
        &mut self,
        budget: &mut impl Budget,
        mut on_incumbent: impl FnMut(&Assignment, i64),
    ) -> SolveOutcome {
        let mut incumbent: Option<(Assignment, i64)> = None;
        let (terms, constant) = self.merged_objective.clone();
        let total: i64 = terms.iter().map(|t| t.coef).sum();
        let status = loop {
            match self.search(budget) {
                Decision::Sat(model) => {
                    let value = self.objective_value(&model);
                    self.stats.solutions += 1;
                    on_incumbent(&model, value);
                    incumbent = Some((model, value));
                    let rhs = value - 1 - constant;
                    if terms.is_empty() || rhs < 0 {
                        break SolveStatus::Optimum;
                    }
                    self.cancel_until(0);
                    // sum(c * l) <= rhs  <=>  sum(c * ~l) >= total - rhs
                    if !self.bound_objective(&terms, total - rhs) {
                        break SolveStatus::Optimum;
                    }
                }
                Decision::Unsat if incumbent.is_some() => break SolveStatus::Optimum,
                Decision::Unsat => break SolveStatus::Unsatisfiable,
                Decision::Unknown if incumbent.is_some() => break SolveStatus::Satisfiable,
                Decision::Unknown => break SolveStatus::Unknown,
            }
        };
        let (assignment, objective) = match incumbent {
            Some((a, v)) => (Some(a), Some(v)),
            None => (None, None),
        };
        SolveOutcome { status, assignment, objective, stats: self.stats }
    }

    fn objective_value(&self, model: &Assignment) -> i64 {
        self.objective
            .iter()
            .filter(|t| model.lit_value(t.lit))
            .map(|t| t.coef)
            .sum()
    }

    #[inline]
    fn lit_value(&self, lit: Lit) -> i8 {
        let v = self.values[lit.var().index()];
        if lit.is_negated() {
            -v
        } else {
            v
        }
    }

    fn assign(&mut self, lit: Lit, reason: Option<u32>) {
        let v = lit.var().index();
        debug_assert_eq!(self.values[v], UNDEF);
        self.values[v] = if lit.is_negated() { -1 } else { 1 };
        self.levels[v] = self.decision_level();
        self.reasons[v] = reason;
        self.trail_pos[v] = self.trail.len() as u32;
        self.trail.push(lit);
        for &(ci, coef) in &self.occurs[(!lit).code()] {
            self.constrs[ci as usize].slack -= coef;
        }
    }

    fn cancel_until(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let keep = self.trail_lim[level as usize];
        while self.trail.len() > keep {
            let lit = self.trail.pop().unwrap();
            let v = lit.var().index();
            self.values[v] = UNDEF;
            self.reasons[v] = None;
            for &(ci, coef) in &self.occurs[(!lit).code()] {
                self.constrs[ci as usize].slack += coef;
            }
            if !self.order.contains(v as u32) {
                self.order.insert(v as u32, &self.activity);
            }
        }
        self.trail_lim.truncate(level as usize);
        self.qhead = self.qhead.min(self.trail.len());
        debug_assert!(self.counters_consistent(), "slack counters drifted after backjump");
    }

    /// Recomputes every PB slack from scratch and compares.
    pub fn counters_consistent(&self) -> bool {
        self.constrs.iter().filter(|c| !c.is_clause() && !c.deleted).all(|c| {
            let live: i64 = c
                .lits
                .iter()
                .zip(&c.coefs)
                .filter(|(&l, _)| self.lit_value(l) >= 0)
                .map(|(_, &a)| a)
                .sum();
            live - c.bound == c.slack
        })
    }

    /// Adds `sum(terms) >= bound` (positive coefficients, distinct
    /// variables) at decision level 0. Returns false if the solver became
    /// unsatisfiable.
    /// Adds `sum(c * ~l) >= bound` over the merged objective terms, or
    /// raises the bound of the one added before. Coefficients are kept
    /// unsaturated so the constraint stays sound as the bound grows.
    fn bound_objective(&mut self, terms: &[Term], bound: i64) -> bool {
        debug_assert_eq!(self.decision_level(), 0);
        if self.unsat {
            return false;
        }
        let Some(ci) = self.objective_bound else {
            let negated: Vec<Term> = terms.iter().map(|t| Term::new(t.coef, !t.lit)).collect();
            let before = self.constrs.len();
            let ok = self.add_pb(&negated, bound, false);
            if self.constrs.len() > before && !self.constrs[before].is_clause() {
                self.objective_bound = Some(before as u32);
            }
            return ok;
        };
        let c = &mut self.constrs[ci as usize];
        debug_assert!(bound >= c.bound);
        c.slack -= bound - c.bound;
        c.bound = bound;
        if c.slack < 0 {
            self.unsat = true;
            return false;
        }
        self.propagate_root_pb(ci);
        true
    }

    fn propagate_root_pb(&mut self, ci: u32) {
        let implied: Vec<Lit> = {
            let c = &self.constrs[ci as usize];
            c.lits
                .iter()
                .zip(&c.coefs)
                .filter(|&(&l, &a)| a > c.slack && self.lit_value(l) == UNDEF)
                .map(|(&l, _)| l)
                .collect()
        };
        for l in implied {
            self.assign(l, Some(ci));
        }
    }

    fn add_at_least(&mut self, terms: &[Term], bound: i64) -> bool {
        self.add_pb(terms, bound, true)
    }

    fn add_pb(&mut self, terms: &[Term], bound: i64, saturate: bool) -> bool {
        debug_assert_eq!(self.decision_level(), 0);
        if self.unsat {
            return false;
        }
        let (terms, offset) = merge_terms(terms);
        let bound = bound - offset;
        if bound <= 0 {
            return true;
        }
        let mut lits = Vec::with_capacity(terms.len());
        let mut coefs = Vec::with_capacity(terms.len());
        for t in &terms {
            lits.push(t.lit);
            coefs.push(if saturate { t.coef.min(bound) } else { t.coef });
        }
        let total: i64 = coefs.iter().sum();
        if total < bound {
            self.unsat = true;
            return false;
        }
        if saturate && coefs.iter().all(|&c| c == bound) {
            return self.add_clause(lits, false);
        }
        let ci = self.constrs.len() as u32;
        let mut slack = -bound;
        for (&l, &a) in lits.iter().zip(&coefs) {
            if self.lit_value(l) >= 0 {
                slack += a;
            }
            self.occurs[l.code()].push((ci, a));
        }
        let max_coef = coefs.iter().copied().max().unwrap_or(0);
        self.constrs.push(Constr {
            lits,
            coefs,
            bound,
            slack,
            max_coef,
            total,
            learnt: false,
            deleted: false,
            activity: 0.0,
        });
        if slack < 0 {
            self.unsat = true;
            return false;
        }
        self.propagate_root_pb(ci);
        true
    }

    fn add_clause(&mut self, lits: Vec<Lit>, learnt: bool) -> bool {
        debug_assert!(!learnt);
        let mut kept = Vec::with_capacity(lits.len());
        for l in lits {
            match self.lit_value(l) {
                1 => return true,
                -1 => {}
                _ => {
                    if !kept.contains(&l) {
                        kept.push(l);
                    }
                }
            }
        }
        match kept.len() {
            0 => {
                self.unsat = true;
                false
            }
            1 => {
                self.assign(kept[0], None);
                true
            }
            _ => {
                self.attach_clause(kept, false);
                true
            }
        }
    }

    fn attach_clause(&mut self, lits: Vec<Lit>, learnt: bool) -> u32 {
        let ci = self.constrs.len() as u32;
        self.watches[lits[0].code()].push(ci);
        self.watches[lits[1].code()].push(ci);
        self.constrs.push(Constr {
            lits,
            coefs: Vec::new(),
            bound: 1,
            slack: 0,
            max_coef: 1,
            total: 0,
            learnt,
            deleted: false,
            activity: 0.0,
        });
        ci
    }

    /// Unit propagation to fixpoint; returns a violated constraint if one
    /// is found.
    pub fn propagate(&mut self) -> Option<ConflictId> {
        let mut implied: Vec<Lit> = Vec::new();
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;

            for k in 0..self.occurs[false_lit.code()].len() {
                let ci = self.occurs[false_lit.code()][k].0;
                let c = &self.constrs[ci as usize];
                if c.deleted {
                    continue;
                }
                if c.slack < 0 {
                    return Some(ConflictId(ci));
                }
                if c.slack >= c.max_coef {
                    continue;
                }
                implied.clear();
                for (&l, &a) in c.lits.iter().zip(&c.coefs) {
                    if a > c.slack && self.lit_value(l) == UNDEF {
                        implied.push(l);
                    }
                }
                for &l in &implied {
                    self.assign(l, Some(ci));
                }
            }

            let mut ws = mem::take(&mut self.watches[false_lit.code()]);
            let (mut i, mut j) = (0, 0);
            let mut conflict = None;
            while i < ws.len() {
                let ci = ws[i];
                i += 1;
                if self.constrs[ci as usize].deleted {
                    continue;
                }
                {
                    let lits = &mut self.constrs[ci as usize].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.constrs[ci as usize].lits[0];
                if self.lit_value(first) > 0 {
                    ws[j] = ci;
                    j += 1;
                    continue;
                }
                let len = self.constrs[ci as usize].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let l = self.constrs[ci as usize].lits[k];
                    if self.lit_value(l) >= 0 {
                        self.constrs[ci as usize].lits.swap(1, k);
                        self.watches[l.code()].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = ci;
                j += 1;
                if self.lit_value(first) < 0 {
                    conflict = Some(ConflictId(ci));
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.assign(first, Some(ci));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.code()] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    /// False literals of constraint `ci` whose conjunction already forces
    /// the implication (or the violation when `implied` is `None`).
    fn explanation(&self, ci: u32, implied: Option<Lit>, out: &mut Vec<Lit>) {
        out.clear();
        let c = &self.constrs[ci as usize];
        if c.is_clause() {
            out.extend(c.lits.iter().copied().filter(|&l| Some(l) != implied));
            return;
        }
        let limit = implied.map(|l| self.trail_pos[l.var().index()]);
        let implied_coef = implied
            .and_then(|l| c.lits.iter().position(|&m| m == l).map(|k| c.coefs[k]))
            .unwrap_or(0);
        let mut candidates: Vec<(i64, u32, Lit)> = c
            .lits
            .iter()
            .zip(&c.coefs)
            .filter(|(&l, _)| {
                self.lit_value(l) < 0 && limit.map_or(true, |p| self.trail_pos[l.var().index()] < p)
            })
            .map(|(&l, &a)| (a, self.trail_pos[l.var().index()], l))
            .collect();
        candidates.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
        // need: total - removed - bound < implied_coef (or < 0 for a conflict)
        let threshold = c.total - c.bound - implied_coef;
        let mut removed = 0;
        for (a, _, l) in candidates {
            if removed > threshold {
                break;
            }
            removed += a;
            out.push(l);
        }
        debug_assert!(removed > threshold, "explanation does not force the implication");
    }

    /// First-UIP conflict analysis. Returns the learned clause, asserting
    /// literal first, and the level to backjump to. May backtrack first if
    /// the conflict only involves lower decision levels.
    pub fn analyze(&mut self, conflict: ConflictId) -> Result<(Vec<Lit>, u32), RootConflict> {
        let mut reason_lits = Vec::new();
        self.explanation(conflict.0, None, &mut reason_lits);
        let conflict_level = reason_lits
            .iter()
            .map(|l| self.levels[l.var().index()])
            .max()
            .unwrap_or(0);
        if conflict_level == 0 {
            return Err(RootConflict);
        }
        if conflict_level < self.decision_level() {
            self.cancel_until(conflict_level);
        }
        self.bump_constraint(conflict.0);

        let mut learnt = vec![Lit::new(Var::from_index(0), false)];
        let mut path = 0usize;
        let mut idx = self.trail.len();
        let uip = loop {
            for &q in &reason_lits {
                let v = q.var().index();
                if !self.seen[v] && self.levels[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.levels[v] >= conflict_level {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            let p = loop {
                idx -= 1;
                let p = self.trail[idx];
                if self.seen[p.var().index()] {
                    break p;
                }
            };
            self.seen[p.var().index()] = false;
            path -= 1;
            if path == 0 {
                break p;
            }
            let reason = self.reasons[p.var().index()].expect("implied literal has a reason");
            self.bump_constraint(reason);
            self.explanation(reason, Some(p), &mut reason_lits);
        };
        learnt[0] = !uip;
        for l in &learnt[1..] {
            self.seen[l.var().index()] = false;
        }
        let backjump = if learnt.len() == 1 {
            0
        } else {
            let (k, level) = learnt[1..]
                .iter()
                .enumerate()
                .map(|(k, l)| (k + 1, self.levels[l.var().index()]))
                .max_by_key(|&(_, lv)| lv)
                .unwrap();
            learnt.swap(1, k);
            level
        };
        debug_assert!(learnt.iter().all(|&l| self.lit_value(l) < 0), "learned clause not falsified");
        Ok((learnt, backjump))
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.increase(v as u32, &self.activity);
    }

    fn bump_constraint(&mut self, ci: u32) {
        let c = &mut self.constrs[ci as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.clause_inc;
        if c.activity > 1e20 {
            for c in &mut self.constrs {
                c.activity *= 1e-20;
            }
            self.clause_inc *= 1e-20;
        }
    }

    fn learn(&mut self, learnt: Vec<Lit>) {
        self.stats.learned += 1;
        if learnt.len() == 1 {
            self.assign(learnt[0], None);
            return;
        }
        let asserting = learnt[0];
        let ci = self.attach_clause(learnt, true);
        self.num_learnts += 1;
        self.bump_constraint(ci);
        self.assign(asserting, Some(ci));
    }

    fn is_locked(&self, ci: u32) -> bool {
        let c = &self.constrs[ci as usize];
        let l = c.lits[0];
        self.reasons[l.var().index()] == Some(ci) && self.lit_value(l) > 0
    }

    /// Drops the less active half of the learned clauses.
    fn reduce_learnts(&mut self) {
        let mut cands: Vec<u32> = (0..self.constrs.len() as u32)
            .filter(|&ci| {
                let c = &self.constrs[ci as usize];
                c.learnt && !c.deleted && c.lits.len() > 2
            })
            .filter(|&ci| !self.is_locked(ci))
            .collect();
        cands.sort_by(|&a, &b| {
            self.constrs[a as usize]
                .activity
                .partial_cmp(&self.constrs[b as usize].activity)
                .unwrap()
                .then(a.cmp(&b))
        });
        for &ci in &cands[..cands.len() / 2] {
            let c = &mut self.constrs[ci as usize];
            c.deleted = true;
            c.lits = Vec::new();
            self.num_learnts -= 1;
        }
        self.max_learnts += self.max_learnts / 10;
    }

    fn pick_branch(&mut self) -> Option<Var> {
        while let Some(v) = self.order.pop(&self.activity) {
            if self.values[v as usize] == UNDEF {
                return Some(Var::from_index(v as usize));
            }
        }
        None
    }

    fn search(&mut self, budget: &mut impl Budget) -> Decision {
        if self.unsat {
            return Decision::Unsat;
        }
        let mut restart_limit = luby(self.luby_index) * RESTART_UNIT;
        loop {
            if let Some(conflict) = self.propagate() {
                self.stats.conflicts += 1;
                self.conflicts_since_restart += 1;
                if self.decision_level() == 0 {
                    self.unsat = true;
                    return Decision::Unsat;
                }
                match self.analyze(conflict) {
                    Err(RootConflict) => {
                        self.unsat = true;
                        return Decision::Unsat;
                    }
                    Ok((learnt, level)) => {
                        self.cancel_until(level);
                        debug_assert_eq!(self.lit_value(learnt[0]), UNDEF);
                        debug_assert!(learnt[1..].iter().all(|&l| self.lit_value(l) < 0), "learned clause not unit");
                        self.learn(learnt);
                    }
                }
                self.var_inc /= VAR_DECAY;
                self.clause_inc /= CLAUSE_DECAY;
                if budget.exhausted(&self.stats) {
                    self.cancel_until(0);
                    return Decision::Unknown;
                }
            } else {
                if self.conflicts_since_restart >= restart_limit {
                    self.conflicts_since_restart = 0;
                    self.luby_index += 1;
                    restart_limit = luby(self.luby_index) * RESTART_UNIT;
                    self.stats.restarts += 1;
                    self.cancel_until(0);
                    continue;
                }
                if self.num_learnts >= self.max_learnts + self.trail.len() {
                    self.reduce_learnts();
                }
                if self.stats.decisions % 128 == 0 && budget.exhausted(&self.stats) {
                    self.cancel_until(0);
                    return Decision::Unknown;
                }
                match self.pick_branch() {
                    None => {
                        let model: Vec<bool> = self.values.iter().map(|&v| v > 0).collect();
                        self.cancel_until(0);
                        return Decision::Sat(Assignment::from(model));
                    }
                    Some(v) => {
                        self.stats.decisions += 1;
                        self.decide(v.neg());
                    }
                }
            }
        }
    }
}

use crate::pb::PbConstraint;

/// The Luby sequence 1, 1, 2, 1, 1, 2, 4, ... at 0-based `i`.
fn luby(mut i: u32) -> u64 {
    let (mut size, mut seq) = (1u64, 0u32);
    while size < u64::from(i) + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    let mut x = u64::from(i);
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    i = seq;
    1u64 << i
}

/// Max-heap of variables by activity, ties to the lowest index.
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<usize>,
}

const ABSENT: usize = usize::MAX;

impl VarHeap {
    fn new(n: usize) -> Self {
        VarHeap { heap: Vec::with_capacity(n), pos: vec![ABSENT; n] }
    }

    fn contains(&self, v: u32) -> bool {
        self.pos[v as usize] != ABSENT
    }

    fn before(a: u32, b: u32, act: &[f64]) -> bool {
        let (x, y) = (act[a as usize], act[b as usize]);
        x > y || (x == y && a < b)
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        self.pos[v as usize] = self.heap.len();
        self.heap.push(v);
        self.up(self.heap.len() - 1, act);
    }

    fn increase(&mut self, v: u32, act: &[f64]) {
        if let Some(&i) = self.pos.get(v as usize).filter(|&&i| i != ABSENT) {
            self.up(i, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.pos[top as usize] = ABSENT;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.down(0, act);
        }
        Some(top)
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if !Self::before(v, self.heap[parent], act) {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.pos[self.heap[i] as usize] = i;
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i;
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        loop {
            let left = 2 * i + 1;
            if left >= self.heap.len() {
                break;
            }
            let right = left + 1;
            let child = if right < self.heap.len() && Self::before(self.heap[right], self.heap[left], act) {
                right
            } else {
                left
            };
            if !Self::before(self.heap[child], v, act) {
                break;
            }
            self.heap[i] = self.heap[child];
            self.pos[self.heap[i] as usize] = i;
            i = child;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(n: u32) -> Lit {
        Var::from_number(n).unwrap().pos()
    }

    fn inst(num_vars: usize, constraints: Vec<PbConstraint>, objective: Vec<Term>) -> PboInstance {
        PboInstance { num_vars, constraints, objective }
    }

    fn ge(terms: &[(i64, Lit)], bound: i64) -> PbConstraint {
        PbConstraint::at_least(terms.iter().map(|&(a, l)| Term::new(a, l)).collect(), bound)
    }

    #[test]
    fn luby_prefix() {
        let seq: Vec<u64> = (0..15).map(luby).collect();
        assert_eq!(seq, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }

    #[test]
    fn trivial_decisions() {
        let sat = inst(1, vec![ge(&[(1, x(1))], 1)], vec![]);
        assert_eq!(solve_decision(&sat, Unlimited), Decision::Sat(Assignment::from(vec![true])));
        let unsat = inst(1, vec![ge(&[(1, x(1))], 1), ge(&[(1, !x(1))], 1)], vec![]);
        assert_eq!(solve_decision(&unsat, Unlimited), Decision::Unsat);
    }

    #[test]
    fn avoidable_cost() {
        let i = inst(2, vec![ge(&[(1, x(1)), (1, x(2))], 1)], vec![Term::new(1, x(1))]);
        let out = optimize(&i, Unlimited);
        assert_eq!(out.status, SolveStatus::Optimum);
        assert_eq!(out.objective, Some(0));
        assert_eq!(out.assignment, Some(Assignment::from(vec![false, true])));
    }

    #[test]
    fn infeasible_has_no_incumbent() {
        let i = inst(1, vec![ge(&[(1, x(1))], 1), ge(&[(1, !x(1))], 1)], vec![Term::new(1, x(1))]);
        let out = optimize(&i, Unlimited);
        assert_eq!(out.status, SolveStatus::Unsatisfiable);
        assert!(out.assignment.is_none() && out.objective.is_none());
    }

    #[test]
    fn pb_propagation_by_slack() {
        // 2 x1 + x2 >= 2: x2 alone cannot reach the bound
        let i = inst(2, vec![ge(&[(2, x(1)), (1, x(2))], 2)], vec![]);
        let mut s = Solver::new(&i);
        s.decide(!x(2));
        assert_eq!(s.propagate(), None);
        assert_eq!(s.value(x(1)), Some(true));

        // 2 x1 + x2 + x3 >= 2 has slack 2; x2 = 0 drops it to 1 < 2
        let i = inst(3, vec![ge(&[(2, x(1)), (1, x(2)), (1, x(3))], 2)], vec![]);
        let mut s = Solver::new(&i);
        assert_eq!(s.propagate(), None);
        assert_eq!(s.value(x(1)), None);
        s.decide(!x(2));
        assert_eq!(s.propagate(), None);
        assert_eq!(s.value(x(1)), Some(true));
        assert_eq!(s.value(x(3)), None);
    }

    #[test]
    fn clause_needs_no_propagation_then_conflicts() {
        let i = inst(2, vec![ge(&[(1, x(1)), (1, x(2))], 1), ge(&[(2, x(1)), (1, x(2)), (1, x(3))], 2)], vec![]);
        let i = PboInstance { num_vars: 3, ..i };
        let mut s = Solver::new(&i);
        assert_eq!(s.propagate(), None);
        assert!(s.value(x(1)).is_none() && s.value(x(2)).is_none());
        s.decide(!x(1));
        // x1 + x2 >= 1 forces x2; 2x1 + x2 + x3 >= 2 forces x2 and x3
        assert_eq!(s.propagate(), None);
        assert_eq!(s.value(x(2)), Some(true));
        assert_eq!(s.value(x(3)), Some(true));
    }

    #[test]
    fn violated_clause_is_reported() {
        let i = inst(3, vec![ge(&[(1, x(1)), (1, x(2))], 1), ge(&[(1, x(3)), (1, !x(2))], 1), ge(&[(1, !x(3)), (1, !x(2))], 1)], vec![]);
        let mut s = Solver::new(&i);
        assert_eq!(s.propagate(), None);
        s.decide(!x(1));
        let conflict = s.propagate().expect("x2 forces x3 and ~x3");
        let (learnt, level) = s.analyze(conflict).unwrap();
        // x2 is the first unique implication point
        assert_eq!(learnt, vec![!x(2)]);
        assert_eq!(level, 0);
    }

    #[test]
    fn root_conflict() {
        let i = inst(2, vec![ge(&[(1, x(1)), (1, x(2))], 2), ge(&[(1, !x(1))], 1)], vec![]);
        let mut s = Solver::new(&i);
        // adding the second constraint already refutes the instance
        assert!(s.unsat || s.propagate().is_some());
        assert_eq!(solve_decision(&i, Unlimited), Decision::Unsat);
    }

    #[test]
    fn equality_is_split() {
        let i = inst(3, vec![PbConstraint::equal(vec![Term::new(1, x(1)), Term::new(1, x(2)), Term::new(1, x(3))], 2)], vec![Term::new(1, x(1))]);
        let out = optimize(&i, Unlimited);
        assert_eq!(out.status, SolveStatus::Optimum);
        assert_eq!(out.objective, Some(0));
        assert_eq!(out.assignment, Some(Assignment::from(vec![false, true, true])));
    }

    #[test]
    fn conflict_budget_returns_incumbent_or_unknown() {
        let i = inst(2, vec![ge(&[(1, x(1)), (1, x(2))], 1)], vec![Term::new(3, x(1)), Term::new(1, x(2))]);
        let out = optimize(&i, ConflictLimit(0));
        match out.status {
            SolveStatus::Unknown => assert!(out.assignment.is_none()),
            _ => assert!(i.is_satisfied_by(out.assignment.as_ref().unwrap())),
        }
        let out = optimize(&i, Unlimited);
        assert_eq!((out.status, out.objective), (SolveStatus::Optimum, Some(1)));
    }
}
