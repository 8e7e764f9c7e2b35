use debpbo_core::universe::parse_universe;
use debpbo_core::ConstraintRef;
use debpbo_testkit::oracle::satisfies;
use debpbo_testkit::random::micro_universe;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn universe(seed: u64) -> debpbo_core::Universe {
    micro_universe(&mut ChaCha8Rng::seed_from_u64(seed), 18)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn serialization_round_trips(seed in any::<u64>()) {
        let u = universe(seed);
        let text = u.serialize();
        let back = parse_universe(&text).unwrap();
        prop_assert_eq!(&back, &u);
        prop_assert_eq!(back.serialize(), text);
    }

    #[test]
    fn resolve_ref_returns_exactly_the_satisfying_units(seed in any::<u64>()) {
        let u = universe(seed);
        let mut refs: Vec<ConstraintRef> = Vec::new();
        for unit in u.units() {
            refs.extend(unit.depends.iter().flat_map(|c| c.alternatives().iter().cloned()));
            refs.extend(unit.conflicts.iter().cloned());
        }
        for r in refs {
            let got = u.resolve_ref(&r);
            let expected: Vec<_> = u.ids().filter(|&id| satisfies(&r, u.unit(id))).collect();
            let mut sorted = got.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), got.len(), "repeats in {:?}", got);
            prop_assert_eq!(sorted, expected);
            prop_assert!(got.windows(2).all(|w| u.unit(w[0]).version >= u.unit(w[1]).version));
        }
    }

    #[test]
    fn versions_of_is_newest_first_and_freshness_is_monotone(seed in any::<u64>()) {
        let u = universe(seed);
        for name in u.names() {
            let ids = u.versions_of(name);
            prop_assert!(ids.windows(2).all(|w| u.unit(w[0]).version > u.unit(w[1]).version));
            let available: Vec<_> = ids.iter().copied().filter(|&id| u.unit(id).available).collect();
            if let Some(&newest) = available.first() {
                prop_assert_eq!(u.freshness(newest), 0);
            }
            prop_assert!(available.windows(2).all(|w| u.freshness(w[0]) < u.freshness(w[1])));
            if available.len() > 1 {
                prop_assert_eq!(u.freshness(*available.last().unwrap()), 100);
            }
        }
    }
}

#[test]
fn stanza_syntax() {
    let text = "# the system\nPackage: web\nVersion: 2.0-1\nDepends: libc (>= 2.7), mta | postfix\n  , www-data\nConflicts: apache (<< 2.0)\nProvides: httpd\nInstalled: yes\n\nPackage: libc\nVersion: 2.7\n";
    let u = parse_universe(text).unwrap();
    let web = u.unit(u.versions_of("web")[0]);
    assert_eq!(web.depends.len(), 3);
    assert_eq!(web.depends[1].alternatives().len(), 2);
    assert_eq!(web.provides, vec!["httpd".to_string()]);
    assert!(web.installed && web.available);
    let s = u.stats();
    assert_eq!((s.units, s.dependencies, s.provides, s.installed), (2, 3, 1, 1));
    // web, libc, mta, postfix, www-data, apache, httpd
    assert_eq!(s.names, 7);
}

#[test]
fn rejected_input() {
    assert!(parse_universe("Package: a\nVersion: 1.0\n\nPackage: a\nVersion: 1.00\n").is_err());
    assert!(parse_universe("Package: a\n").is_err());
    assert!(parse_universe("Package: a\nVersion: 1\nDepends: b |\n").is_err());
    assert!(parse_universe("Package: a\nVersion: 1\nConflicts: b | c\n").is_err());
    assert!(parse_universe("Package: A\nVersion: 1\n").is_err());
}
