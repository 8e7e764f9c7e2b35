//! A second, deliberately plain OPB reader for round-trip checks. It
//! accepts only the canonical `+c lit` term spelling.

use debpbo_core::{Lit, PbConstraint, PboInstance, Term, Var};

fn read_lit(tok: &str) -> Lit {
    let (neg, body) = match tok.strip_prefix('~') {
        Some(b) => (true, b),
        None => (false, tok),
    };
    let n: usize = body.strip_prefix('x').unwrap_or_else(|| panic!("literal `{tok}`")).parse().unwrap();
    assert!(n >= 1, "variables are numbered from 1");
    let v = Var::from_index(n - 1);
    if neg {
        v.neg()
    } else {
        v.pos()
    }
}

fn read_terms(tokens: &[&str]) -> Vec<Term> {
    assert!(tokens.len() % 2 == 0, "terms come in coefficient / literal pairs: {tokens:?}");
    tokens
        .chunks(2)
        .map(|pair| {
            assert!(pair[0].starts_with('+') || pair[0].starts_with('-'), "unsigned coefficient {}", pair[0]);
            Term::new(pair[0].parse().unwrap(), read_lit(pair[1]))
        })
        .collect()
}

/// Panics on anything unexpected.
pub fn read(text: &str) -> PboInstance {
    let mut lines = text.lines();
    let header = lines.next().expect("header line");
    let fields: Vec<&str> = header.split_whitespace().collect();
    assert_eq!(fields[0], "*");
    assert_eq!(fields[1], "#variable=");
    assert_eq!(fields[3], "#constraint=");
    let num_vars: usize = fields[2].parse().unwrap();
    let num_constraints: usize = fields[4].parse().unwrap();

    let objective_line = lines.next().expect("objective line");
    let body = objective_line.strip_prefix("min:").expect("min: line").strip_suffix(';').expect("terminator");
    let objective = read_terms(&body.split_whitespace().collect::<Vec<_>>());

    let mut constraints = Vec::new();
    for line in lines {
        let toks: Vec<&str> = line.strip_suffix(';').expect("terminator").split_whitespace().collect();
        let (rel, bound) = (toks[toks.len() - 2], toks[toks.len() - 1].parse().unwrap());
        let terms = read_terms(&toks[..toks.len() - 2]);
        constraints.push(match rel {
            ">=" => PbConstraint::at_least(terms, bound),
            "=" => PbConstraint::equal(terms, bound),
            other => panic!("relation {other}"),
        });
    }
    assert_eq!(constraints.len(), num_constraints);
    PboInstance { num_vars, constraints, objective }
}
