//! End-to-end acceptance checks, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the verdict lines are
//! always printed. Exits non-zero when any check fails.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Cursor;
use std::path::Path;
use std::time::{Duration, Instant};

use debpbo::cli::{main_with, Io};
use debpbo::{run_external, Deadline};
use debpbo_core::opb::OutputStatus;
use debpbo_core::scenario::{generate, ScenarioSpec};
use debpbo_core::solver::Solver;
use debpbo_core::{
    encode, optimize, plan, ConstraintRef, DependencyClause, EmbeddedBackend, Lit, PackageUnit, PbConstraint,
    PboInstance, PlanOptions, PlanStatus, SolveStatus, Term, Universe, Unlimited, Var, Version, Weights,
};
use debpbo_testkit::oracle::{self, bits_of, state_of};
use debpbo_testkit::random::{micro_request, micro_universe, pb_instance, weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
    /// Everything the check computed that must not change between runs.
    transcript: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>, transcript: String) -> Self {
        Verdict { pass, detail: detail.into(), transcript }
    }
}

type Case = (u64, Universe, Vec<ConstraintRef>, Weights);

/// The shared corpus of checks 1 and 2: universes of at most 18 units.
fn corpus() -> Vec<Case> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < 500 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xac12_0000 + seed);
        let u = micro_universe(&mut rng, 18);
        if let Some(req) = micro_request(&mut rng, &u) {
            let w = weights(&mut rng);
            out.push((seed, u, req, w));
        }
        seed += 1;
    }
    out
}

fn encoding_equivalence(corpus: &[Case]) -> Verdict {
    let started = Instant::now();
    let mut transcript = String::new();
    let (mut bad, mut max_vars) = (Vec::new(), 0);
    let (mut with_provides, mut with_conflicts, mut with_broken, mut multi_version) = (0, 0, 0, 0);
    for (seed, u, req, w) in corpus {
        let units = u.units();
        with_provides += units.iter().any(|x| !x.provides.is_empty()) as usize;
        with_conflicts += units.iter().any(|x| !x.conflicts.is_empty()) as usize;
        with_broken += units
            .iter()
            .any(|x| x.depends.iter().flat_map(|c| c.alternatives()).any(|r| u.resolve_ref(r).is_empty()))
            as usize;
        multi_version += units.iter().any(|x| units.iter().filter(|y| y.name == x.name).count() > 1) as usize;

        let (inst, varmap) = encode(u, req, *w).expect("requests resolve");
        max_vars = max_vars.max(inst.num_vars);
        let encoded: BTreeSet<_> = oracle::models(&inst).into_iter().map(|b| state_of(b, &varmap)).collect();
        let valid = oracle::valid_states(u, req);
        if encoded != valid {
            bad.push(*seed);
        }
        let _ = writeln!(transcript, "{seed} {} {:?}", inst.num_vars, encoded);
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = bad.is_empty() && max_vars <= 18 && secs < 120.0;
    let detail = format!(
        "{} universes, closures up to {max_vars} vars (provides {with_provides}, conflicts {with_conflicts}, broken deps {with_broken}, several versions {multi_version}), {} mismatches, {secs:.1} s",
        corpus.len(),
        bad.len()
    );
    Verdict::new(pass, detail, transcript)
}

fn optimality(corpus: &[Case]) -> Verdict {
    let mut transcript = String::new();
    let (mut bad, mut optimal, mut infeasible) = (Vec::new(), 0, 0);
    for (seed, u, req, w) in corpus {
        let (inst, varmap) = encode(u, req, *w).expect("requests resolve");
        let out = optimize(&inst, Unlimited);
        let ok = match oracle::optimum(u, req, *w) {
            None => {
                infeasible += 1;
                out.status == SolveStatus::Unsatisfiable
            }
            Some((best, states)) => {
                optimal += 1;
                out.status == SolveStatus::Optimum
                    && out.objective == Some(best)
                    && out.assignment.as_ref().is_some_and(|a| states.contains(&state_of(bits_of(a), &varmap)))
            }
        };
        if !ok {
            bad.push(*seed);
        }
        let _ = writeln!(transcript, "{seed} {:?} {:?} {:?}", out.status, out.objective, out.assignment.map(|a| bits_of(&a)));
    }
    let detail = format!("{optimal} optima and {infeasible} infeasible cases against brute force, {} mismatches", bad.len());
    Verdict::new(bad.is_empty(), detail, transcript)
}

fn unit(name: &str, version: &str) -> PackageUnit {
    PackageUnit::new(name, Version::parse(version).unwrap())
}

fn micro() -> Universe {
    let mut p = unit("p", "1");
    p.depends.extend(DependencyClause::new(vec![ConstraintRef::any("x")]));
    p.conflicts.push(ConstraintRef::parse("y (= 3)").unwrap());
    let mut y = unit("y", "3");
    y.installed = true;
    Universe::new(vec![p, unit("x", "1"), unit("x", "2"), y]).unwrap()
}

fn var(n: usize) -> Lit {
    Var::from_index(n - 1).pos()
}

fn sorted(mut cs: Vec<PbConstraint>) -> Vec<PbConstraint> {
    cs.iter_mut().for_each(|c| c.terms.sort_by_key(|t| t.lit.var()));
    cs.sort_by_key(|c| format!("{c}"));
    cs
}

fn worked_example() -> Verdict {
    let u = micro();
    let req = vec![ConstraintRef::any("p")];
    let w = Weights::new(1, 1, 1).unwrap();
    let (inst, varmap) = encode(&u, &req, w).unwrap();
    let names: Vec<String> =
        varmap.iter().map(|(_, id)| format!("{}@{}", u.unit(id).name, u.unit(id).version)).collect();
    let order_ok = names == ["p@1", "x@2", "x@1", "y@3"];

    // Variables 1..4 are p@1, x@2, x@1, y@3. Written out by hand:
    // p >= 1; x1 + x2 - p >= 0; ~p + ~y3 >= 1; x1 + x2 <= 1.
    let (p, x2, x1, y3) = (var(1), var(2), var(3), var(4));
    let expected = sorted(vec![
        PbConstraint::at_least(vec![Term::new(1, p)], 1),
        PbConstraint::at_least(vec![Term::new(1, !p), Term::new(1, x2), Term::new(1, x1)], 1),
        PbConstraint::at_least(vec![Term::new(1, !p), Term::new(1, !y3)], 1),
        PbConstraint::at_least(vec![Term::new(1, !x2), Term::new(1, !x1)], 1),
    ]);
    let multiset_ok = sorted(inst.constraints.clone()) == expected;

    // All 16 assignments, costed directly: removal of y, presence, freshness
    // 100 for the older x.
    let mut best: Option<(i64, u64)> = None;
    for bits in 0u64..16 {
        let on = |i: u32| bits >> i & 1 == 1;
        let valid = on(0) && (on(1) || on(2)) && !(on(0) && on(3)) && !(on(1) && on(2));
        if !valid {
            continue;
        }
        let cost = i64::from(!on(3)) + bits.count_ones() as i64 + if on(2) { 100 } else { 0 };
        if best.map_or(true, |(c, _)| cost < c) {
            best = Some((cost, bits));
        }
    }
    let brute_ok = best == Some((3, 0b0011));

    let mut backend = EmbeddedBackend::new(|| Unlimited);
    let plan = plan(&u, &req, PlanOptions { weights: w, ..Default::default() }, &mut backend).unwrap();
    let dump = plan.machine_dump(&u);
    let plan_ok = dump == "install p 1\ninstall x 2\nremove y 3\nobjective 3\nstatus OPTIMAL\n";

    let pass = order_ok && multiset_ok && brute_ok && plan_ok;
    let detail = format!(
        "variables {names:?}, constraint multiset {}, brute-force optimum {:?}, plan: {}",
        if multiset_ok { "as expected" } else { "differs" },
        best.map(|b| b.0),
        dump.trim_end().replace('\n', "; ")
    );
    let transcript = format!("{}\n{}\n{dump}", names.join(" "), inst.constraints.iter().map(|c| format!("{c}\n")).collect::<String>());
    Verdict::new(pass, detail, transcript)
}

/// Renders a constraint over named literals in the usual written notation,
/// keeping positive terms first.
fn written_form(c: &PbConstraint, names: &[&str], less_or_equal: bool) -> String {
    let name = |l: Lit| names[l.var().index()];
    let mut terms: Vec<&Term> = c.terms.iter().collect();
    terms.sort_by_key(|t| t.coef < 0);
    let mut out = String::new();
    for (i, t) in terms.iter().enumerate() {
        let coef = if t.coef.abs() == 1 { String::new() } else { t.coef.abs().to_string() };
        match (i, t.coef < 0) {
            (0, false) => out.push_str(&format!("{coef}{}", name(t.lit))),
            (0, true) => out.push_str(&format!("-{coef}{}", name(t.lit))),
            (_, false) => out.push_str(&format!(" + {coef}{}", name(t.lit))),
            (_, true) => out.push_str(&format!(" - {coef}{}", name(t.lit))),
        }
    }
    let rel = if less_or_equal { "<=" } else { ">=" };
    format!("{out} {rel} {}", c.bound)
}

fn literal_forms() -> Verdict {
    use debpbo_core::encode::{encode_conflict, encode_dependency};

    let mut found: Vec<String> = Vec::new();
    let mut ok = true;

    // "p1 >= 1": a request for the single unit p@1.
    let u = Universe::new(vec![unit("p", "1")]).unwrap();
    let (inst, _) = encode(&u, &[ConstraintRef::any("p")], Weights::default()).unwrap();
    found.push(written_form(&inst.constraints[0], &["p1"], false));

    // "x1 - p1 >= 0": p@1 depends on x, which has one version.
    let (x1, p1) = (var(1), var(2));
    let dep = encode_dependency(p1, &[x1]).unwrap();
    ok &= dep == PbConstraint::at_least(vec![Term::new(1, x1), Term::new(-1, p1)], 0);
    found.push(written_form(&dep, &["x1", "p1"], false));
    let mut p = unit("p", "1");
    p.depends.extend(DependencyClause::new(vec![ConstraintRef::any("x")]));
    let u = Universe::new(vec![p.clone(), unit("x", "1")]).unwrap();
    let (inst, vm) = encode(&u, &[ConstraintRef::any("p")], Weights::default()).unwrap();
    let lit = |name: &str| vm.iter().find(|(_, id)| u.unit(*id).name == name).unwrap().0.pos();
    ok &= inst.constraints.contains(&encode_dependency(lit("p"), &[lit("x")]).unwrap().normalized());

    // "x1 + x2 - p1 >= 0": the same dependency with two versions of x.
    let (x1, x2, p1) = (var(1), var(2), var(3));
    let dep = encode_dependency(p1, &[x1, x2]).unwrap();
    ok &= dep == PbConstraint::at_least(vec![Term::new(1, x1), Term::new(1, x2), Term::new(-1, p1)], 0);
    found.push(written_form(&dep, &["x1", "x2", "p1"], false));
    let u = Universe::new(vec![p, unit("x", "1"), unit("x", "2")]).unwrap();
    let (inst, vm) = encode(&u, &[ConstraintRef::any("p")], Weights::default()).unwrap();
    let xs: Vec<Lit> = vm.iter().filter(|(_, id)| u.unit(*id).name == "x").map(|(v, _)| v.pos()).collect();
    let pv = vm.iter().find(|(_, id)| u.unit(*id).name == "p").unwrap().0.pos();
    ok &= inst.constraints.contains(&encode_dependency(pv, &xs).unwrap().normalized());

    // "x1 + y3 <= 1": x@1 conflicts with y@3. Stored as ~x1 + ~y3 >= 1;
    // it must accept exactly the assignments with at most one of the two.
    let (x1, y3) = (var(1), var(2));
    let conflict = encode_conflict(x1, y3).unwrap();
    ok &= conflict == PbConstraint::at_least(vec![Term::new(1, !x1), Term::new(1, !y3)], 1);
    for bits in 0u64..4 {
        let a = debpbo_core::Assignment::from_bits(bits, 2);
        ok &= conflict.is_satisfied(&a) == (bits.count_ones() <= 1);
    }
    let as_written = PbConstraint::at_least(vec![Term::new(1, x1), Term::new(1, y3)], 1);
    found.push(written_form(&as_written, &["x1", "y3"], true));
    let mut x = unit("x", "1");
    x.conflicts.push(ConstraintRef::any("y"));
    let mut y = unit("y", "3");
    y.installed = true;
    let u = Universe::new(vec![x, y]).unwrap();
    let (inst, _) = encode(&u, &[ConstraintRef::any("x")], Weights::default()).unwrap();
    ok &= inst.constraints.contains(&conflict.normalized());

    let expected = ["p1 >= 1", "x1 - p1 >= 0", "x1 + x2 - p1 >= 0", "x1 + y3 <= 1"];
    let pass = ok && found == expected;
    let detail = found.join(", ");
    Verdict::new(pass, detail, found.join("\n"))
}

fn scaling_invariance() -> Verdict {
    let mut transcript = String::new();
    let (mut bad, mut n, mut seed) = (Vec::new(), 0, 0u64);
    while n < 100 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1e + seed);
        seed += 1;
        let u = micro_universe(&mut rng, 14);
        let Some(req) = micro_request(&mut rng, &u) else { continue };
        n += 1;
        let w = weights(&mut rng);
        let base = oracle::optimum(&u, &req, w);
        for k in [2, 5, 10] {
            let scaled = oracle::optimum(&u, &req, w.scaled(k));
            let same = match (&base, &scaled) {
                (None, None) => true,
                (Some((a, sa)), Some((b, sb))) => *b == a * k && sa == sb,
                _ => false,
            };
            if !same {
                bad.push((seed, k));
            }
        }
        let _ = writeln!(transcript, "{seed} {:?}", base.map(|(v, s)| (v, s.len())));
    }
    let detail = format!("{n} universes x k in {{2, 5, 10}}, {} changed optimal sets", bad.len());
    Verdict::new(bad.is_empty(), detail, transcript)
}

fn external_self_check() -> Verdict {
    let command = vec![env!("CARGO_BIN_EXE_debpbo").to_string(), "solve".to_string()];
    let mut transcript = String::new();
    let mut bad = Vec::new();
    let mut instances: Vec<PboInstance> = Vec::new();
    for seed in 0..60u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xe7e7 + seed);
        let n = rng.gen_range(1..=20);
        let m = rng.gen_range(0..=3 * n);
        instances.push(pb_instance(&mut rng, n, m, 6, 5));
    }
    let mut seed = 0u64;
    while instances.len() < 100 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xe7e8_0000 + seed);
        seed += 1;
        let u = micro_universe(&mut rng, 18);
        if let Some(req) = micro_request(&mut rng, &u) {
            instances.push(encode(&u, &req, weights(&mut rng)).unwrap().0);
        }
    }
    let (mut sat, mut unsat) = (0, 0);
    let mut first_error = None;
    for (i, inst) in instances.iter().enumerate() {
        let local = optimize(inst, Unlimited);
        match run_external(inst, &command, Duration::from_secs(60)) {
            Ok(remote) => {
                let same = SolveStatus::from(remote.status) == local.status
                    && remote.to_assignment(inst.num_vars) == local.assignment
                    && remote.objective_value == local.objective;
                if !same {
                    bad.push(i);
                }
                match remote.status {
                    OutputStatus::Unsatisfiable => unsat += 1,
                    _ => sat += 1,
                }
            }
            Err(e) => {
                bad.push(i);
                first_error.get_or_insert(e.to_string());
            }
        }
        let _ = writeln!(transcript, "{i} {:?} {:?} {:?}", local.status, local.objective, local.assignment.map(|a| a.to_lits()));
    }
    let mut detail = format!(
        "{} instances ({sat} satisfiable, {unsat} unsatisfiable) through the OPB boundary, {} differences",
        instances.len(),
        bad.len()
    );
    if let Some(e) = first_error {
        detail.push_str(&format!(" (first error: {e})"));
    }
    Verdict::new(bad.is_empty(), detail, transcript)
}

fn spec_file(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name).to_str().unwrap().to_string()
}

fn scenario_shape() -> Verdict {
    let within = |x: f64, target: f64| (x - target).abs() <= 0.1 * target;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut transcript = String::new();
    for (file, deps_target, versions_target) in [("conservative.spec", 4.90, 0.80), ("aggressive.spec", 7.78, 1.22)] {
        let spec = ScenarioSpec::parse(&std::fs::read_to_string(spec_file(file)).unwrap()).unwrap();
        let s = generate(&spec).unwrap().stats();
        let deps = s.dependencies as f64 / s.names as f64;
        let versions = s.units as f64 / s.names as f64;
        pass &= within(deps, deps_target) && within(versions, versions_target);
        parts.push(format!(
            "{}: deps/name {deps:.2} (target {deps_target:.2}), versions/name {versions:.2} (target {versions_target:.2})",
            spec.name
        ));
        let _ = writeln!(transcript, "{s:?}");
    }
    Verdict::new(pass, parts.join("; "), transcript)
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut stdin = Cursor::new(Vec::new());
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = main_with(args, &mut Io { stdin: &mut stdin, stdout: &mut stdout, stderr: &mut stderr });
    (code, String::from_utf8(stdout).unwrap(), String::from_utf8(stderr).unwrap())
}

fn protocol_reproduction() -> Verdict {
    let started = Instant::now();
    let labels = ["# Solved", "# Timeouts", "Average time", "Standard deviation"];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut transcript = String::new();
    for file in ["conservative.spec", "aggressive.spec"] {
        let path = spec_file(file);
        let (code, out, err) = run_cli(&["debpbo", "bench", &path, "--backend", "embedded", "--timeout", "150"]);
        let (table, csv) = out.split_once("\n\n").unwrap_or((&out, ""));
        let rows: Vec<(&str, &str)> = table
            .lines()
            .skip(1)
            .map(|l| l.trim_end().rsplit_once(' ').map(|(a, b)| (a.trim(), b)).unwrap_or((l, "")))
            .collect();
        let row_labels: Vec<&str> = rows.iter().map(|r| r.0).collect();
        let timeouts = rows.iter().find(|r| r.0 == "# Timeouts").map(|r| r.1).unwrap_or("?");
        let solved = rows.iter().find(|r| r.0 == "# Solved").map(|r| r.1).unwrap_or("?");
        let runs: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
        let infeasible = runs.iter().filter(|r| r[2] == "INFEASIBLE").count();
        let all_decided = runs.iter().all(|r| matches!(r[2], "OPTIMAL" | "INFEASIBLE"));
        pass &= code == 0 && row_labels == labels && timeouts == "0" && runs.len() == 100 && all_decided;
        parts.push(format!("{file}: {} runs, {solved} solved, {infeasible} infeasible, {timeouts} timeouts", runs.len()));
        let _ = writeln!(transcript, "{code}\n{solved} {timeouts}\n{err}");
        for r in &runs {
            let mut r = r.clone();
            r.remove(3);
            let _ = writeln!(transcript, "{}", r.join(","));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    Verdict::new(pass, format!("{}; four-row table; {secs:.1} s", parts.join("; ")), transcript)
}

/// A covering problem with large random coefficients: any superset of a
/// cover is feasible, but proving the cheapest one is out of reach.
fn hard_instance() -> PboInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4a2d);
    let n = 80;
    let mut inst = PboInstance::new(n);
    for _ in 0..12 {
        let terms: Vec<Term> = (0..n).map(|i| Term::new(rng.gen_range(1..=1000), var(i + 1))).collect();
        let total: i64 = terms.iter().map(|t| t.coef).sum();
        inst.constraints.push(PbConstraint::at_least(terms, total / 2));
    }
    inst.objective = (0..n).map(|i| Term::new(rng.gen_range(1..=1000), var(i + 1))).collect();
    inst
}

fn timeout_behaviour() -> Verdict {
    let inst = hard_instance();
    let budget = Duration::from_secs(2);
    let started = Instant::now();
    let out = Solver::new(&inst).optimize(&mut Deadline::after(budget), |_, _| {});
    let elapsed = started.elapsed();
    let timely = elapsed <= budget + Duration::from_millis(500);
    let (pass, what) = match (out.status, &out.assignment) {
        (SolveStatus::Satisfiable, Some(a)) => {
            let valid = inst.is_satisfied_by(a) && out.objective == Some(inst.objective_value(a));
            (valid, format!("FEASIBLE_TIMEOUT with a {} incumbent of value {:?}", if valid { "valid" } else { "INVALID" }, out.objective))
        }
        (SolveStatus::Unknown, None) => (true, "UNKNOWN".to_string()),
        (status, _) => (false, format!("unexpected {status:?}")),
    };
    let status = match out.status {
        SolveStatus::Satisfiable => PlanStatus::FeasibleTimeout,
        SolveStatus::Unknown => PlanStatus::Unknown,
        SolveStatus::Optimum => PlanStatus::Optimal,
        SolveStatus::Unsatisfiable => PlanStatus::Infeasible,
    };
    let detail = format!("80-var dense instance, 2 s budget: {what} ({status}) after {:.2} s", elapsed.as_secs_f64());
    Verdict::new(pass && timely, detail, String::new())
}

fn checks_one_to_eight() -> Vec<Verdict> {
    let corpus = corpus();
    vec![
        encoding_equivalence(&corpus),
        optimality(&corpus),
        worked_example(),
        literal_forms(),
        scaling_invariance(),
        external_self_check(),
        scenario_shape(),
        protocol_reproduction(),
    ]
}

fn main() {
    let titles = [
        "encoding matches brute-force valid states",
        "optimum equals brute-force minimum",
        "worked micro-universe",
        "literal constraint forms",
        "weight scaling keeps optimal states",
        "external self-check through OPB",
        "scenario shape",
        "benchmark protocol",
        "timeout keeps a valid incumbent",
        "determinism",
    ];
    let started = Instant::now();
    let mut verdicts = checks_one_to_eight();
    for (i, v) in verdicts.iter().enumerate() {
        report(i, titles[i], v);
    }
    let nine = timeout_behaviour();
    report(8, titles[8], &nine);

    let again = checks_one_to_eight();
    let differing: Vec<String> = verdicts
        .iter()
        .zip(&again)
        .enumerate()
        .filter(|(_, (a, b))| a.transcript != b.transcript)
        .map(|(i, _)| format!("AC{}", i + 1))
        .collect();
    let bytes: usize = verdicts.iter().map(|v| v.transcript.len()).sum();
    let ten = Verdict::new(
        differing.is_empty(),
        if differing.is_empty() {
            format!("checks 1-8 rerun, {bytes} bytes of output identical (wall times excluded)")
        } else {
            format!("outputs differ in {}", differing.join(", "))
        },
        String::new(),
    );
    report(9, titles[9], &ten);

    verdicts.push(nine);
    verdicts.push(ten);
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("{} of 10 criteria pass ({:.1} s)", 10 - failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn report(i: usize, title: &str, v: &Verdict) {
    println!("{} AC{} {title}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
}
