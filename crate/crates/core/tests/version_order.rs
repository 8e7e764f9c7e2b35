use std::cmp::Ordering;

use debpbo_core::Version;
use proptest::prelude::*;

/// dpkg's `verrevcmp`, transcribed over byte slices with explicit indices.
fn verrevcmp(a: &[u8], b: &[u8]) -> i32 {
    fn order(c: Option<&u8>) -> i32 {
        match c {
            None => 0,
            Some(&c) if c.is_ascii_digit() => 0,
            Some(&c) if c.is_ascii_alphabetic() => c as i32,
            Some(b'~') => -1,
            Some(&c) => c as i32 + 256,
        }
    }
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let mut first_diff = 0;
        while (i < a.len() && !a[i].is_ascii_digit()) || (j < b.len() && !b[j].is_ascii_digit()) {
            let ac = order(a.get(i));
            let bc = order(b.get(j));
            if ac != bc {
                return ac - bc;
            }
            i += 1;
            j += 1;
        }
        while i < a.len() && a[i] == b'0' {
            i += 1;
        }
        while j < b.len() && b[j] == b'0' {
            j += 1;
        }
        while i < a.len() && a[i].is_ascii_digit() && j < b.len() && b[j].is_ascii_digit() {
            if first_diff == 0 {
                first_diff = a[i] as i32 - b[j] as i32;
            }
            i += 1;
            j += 1;
        }
        if i < a.len() && a[i].is_ascii_digit() {
            return 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            return -1;
        }
        if first_diff != 0 {
            return first_diff;
        }
    }
    0
}

fn split(s: &str) -> (u64, &str, &str) {
    let (epoch, rest) = match s.split_once(':') {
        Some((e, r)) => (e.parse().unwrap(), r),
        None => (0, s),
    };
    match rest.rsplit_once('-') {
        Some((u, r)) => (epoch, u, r),
        None => (epoch, rest, ""),
    }
}

fn reference(a: &str, b: &str) -> Ordering {
    let (ea, ua, ra) = split(a);
    let (eb, ub, rb) = split(b);
    ea.cmp(&eb)
        .then_with(|| verrevcmp(ua.as_bytes(), ub.as_bytes()).cmp(&0))
        .then_with(|| verrevcmp(ra.as_bytes(), rb.as_bytes()).cmp(&0))
}

fn v(s: &str) -> Version {
    Version::parse(s).unwrap()
}

#[test]
fn known_orderings() {
    let increasing = [
        "0.9", "0.10", "1.0~~", "1.0~~a", "1.0~", "1.0~rc1", "1.0", "1.0-1~bpo1", "1.0-1", "1.0-1ubuntu1",
        "1.0-2", "1.0a", "1.0b", "1.0+b1", "1.0.1", "2.6.9", "2.6.10", "1:0.1", "1:9.9", "2:0.1",
    ];
    for w in increasing.windows(2) {
        assert!(v(w[0]) < v(w[1]), "{} < {}", w[0], w[1]);
        assert_eq!(reference(w[0], w[1]), Ordering::Less, "reference: {} < {}", w[0], w[1]);
    }
    for (a, b) in [("1.0", "1.00"), ("0:1.0", "1.0"), ("1.0", "1.0-0"), ("01", "1")] {
        assert_eq!(v(a).cmp(&v(b)), Ordering::Equal, "{a} = {b}");
        assert_eq!(v(a), v(b));
    }
}

#[test]
fn malformed_versions() {
    for s in ["", ":1.0", "a:1.0", "1.0 beta", "-1", "1:-1", "1.0_2"] {
        assert!(Version::parse(s).is_err(), "{s:?}");
    }
}

fn version_text() -> impl Strategy<Value = String> {
    "([0-9]{1,2}:)?[0-9][0-9a-z.+~]{0,5}(-[0-9a-z.+~]{1,4})?"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn agrees_with_dpkg(a in version_text(), b in version_text()) {
        prop_assert_eq!(v(&a).cmp(&v(&b)), reference(&a, &b), "{} vs {}", a, b);
    }

    #[test]
    fn total_order(a in version_text(), b in version_text(), c in version_text()) {
        let (a, b, c) = (v(&a), v(&b), v(&c));
        prop_assert_eq!(a.cmp(&a), Ordering::Equal);
        prop_assert_eq!(a.cmp(&b), b.cmp(&a).reverse());
        if a <= b && b <= c {
            prop_assert!(a <= c);
        }
        prop_assert_eq!(a == b, a.cmp(&b) == Ordering::Equal);
    }

    #[test]
    fn display_reparses_to_an_equal_version(s in version_text()) {
        let x = v(&s);
        let y = v(&x.to_string());
        prop_assert_eq!(x.cmp(&y), Ordering::Equal);
        prop_assert_eq!(x.to_string(), y.to_string());
    }
}
