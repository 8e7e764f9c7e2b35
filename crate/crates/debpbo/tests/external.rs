use std::time::{Duration, Instant};

use debpbo::{run_external, ExternalError};
use debpbo_core::opb::OutputStatus;
use debpbo_core::{optimize, PbConstraint, PboInstance, Term, Unlimited, Var};
use debpbo_testkit::random::pb_instance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn one_var() -> PboInstance {
    let x1 = Var::from_index(0).pos();
    PboInstance {
        num_vars: 1,
        constraints: vec![PbConstraint::at_least(vec![Term::new(1, x1)], 1)],
        objective: vec![Term::new(1, x1)],
    }
}

fn sh(script: &str) -> Vec<String> {
    vec!["sh".into(), "-c".into(), script.into()]
}

fn self_solver() -> Vec<String> {
    vec![env!("CARGO_BIN_EXE_debpbo").into(), "solve".into()]
}

#[test]
fn missing_program_is_a_spawn_failure() {
    let err = run_external(&one_var(), &["/nonexistent".to_string()], Duration::from_secs(5)).unwrap_err();
    assert!(matches!(err, ExternalError::SpawnFailure { .. }), "{err}");
}

#[test]
fn silent_solver_times_out_as_unknown() {
    let started = Instant::now();
    let out = run_external(&one_var(), &sh("sleep 100"), Duration::from_secs(1)).unwrap();
    let elapsed = started.elapsed();
    assert_eq!(out.status, OutputStatus::Unknown);
    assert_eq!(out.assignment, None);
    assert!(elapsed >= Duration::from_millis(500) && elapsed <= Duration::from_millis(1500), "{elapsed:?}");
}

#[test]
fn model_printed_before_the_kill_is_kept() {
    let out = run_external(&one_var(), &sh("echo 'o 1'; echo 'v x1'; exec sleep 100"), Duration::from_millis(500)).unwrap();
    assert_eq!(out.status, OutputStatus::Satisfiable);
    assert_eq!(out.objective_value, Some(1));
}

#[test]
fn output_is_checked_not_trusted() {
    let t = Duration::from_secs(5);
    let err = run_external(&one_var(), &sh("echo hello"), t).unwrap_err();
    assert!(matches!(err, ExternalError::MalformedOutput(_)), "{err}");

    let err = run_external(&one_var(), &sh("printf 's OPTIMUM FOUND\\no 0\\nv x1\\n'"), t).unwrap_err();
    assert!(matches!(err, ExternalError::ObjectiveMismatch { reported: 0, recomputed: 1 }), "{err}");

    let err = run_external(&one_var(), &sh("printf 's OPTIMUM FOUND\\nv -x1\\n'"), t).unwrap_err();
    assert!(matches!(err, ExternalError::InvalidModel { index: 0, .. }), "{err}");

    let err = run_external(&one_var(), &sh("printf 's SATISFIABLE\\nv x2\\n'"), t).unwrap_err();
    assert!(matches!(err, ExternalError::MalformedOutput(_)), "{err}");

    let out = run_external(&one_var(), &sh("printf 's UNSATISFIABLE\\n'; exit 20"), t).unwrap();
    assert_eq!(out.status, OutputStatus::Unsatisfiable);
}

#[test]
fn opb_file_is_the_last_argument() {
    let out = run_external(&one_var(), &sh("grep -q '^+1 x1 >= 1 ;$' \"$0\" && printf 's OPTIMUM FOUND\\nv x1\\n'"), Duration::from_secs(5))
        .unwrap();
    assert_eq!(out.status, OutputStatus::Optimum);
}

#[test]
fn embedded_solver_as_a_subprocess() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = pb_instance(&mut rng, 12, 20, 4, 3);
        let local = optimize(&inst, Unlimited);
        let remote = run_external(&inst, &self_solver(), Duration::from_secs(60)).unwrap();
        assert_eq!(debpbo_core::SolveStatus::from(remote.status), local.status, "seed {seed}");
        assert_eq!(remote.to_assignment(inst.num_vars), local.assignment, "seed {seed}");
        assert_eq!(remote.objective_value, local.objective, "seed {seed}");
    }
}
