//! End-to-end checks of corpus proof scripts through the driver.

use ppv_core::driver::World;

fn corpus(rel: &str) -> String {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(rel);
    std::fs::read_to_string(&root).unwrap_or_else(|e| panic!("read {root:?}: {e}"))
}

#[test]
fn trivial_ax() {
    let mut w = World::new();
    let certs = w
        .load_str(
            "lemma t: context [x : real] assume [h : x = 1] goal pl: x = 1 proof exact h qed",
            false,
        )
        .unwrap();
    assert_eq!(certs.len(), 1);
    assert!(certs[0].1.assumptions.is_empty());
}

#[test]
fn markov_checks_assumption_free() {
    let mut w = World::new();
    let certs = w.load_str(&corpus("lemmas/markov.ppv"), true).unwrap();
    assert_eq!(certs.len(), 1);
    assert_eq!(certs[0].0, "markov");
    assert!(certs[0].1.assumptions.is_empty());
}

#[test]
fn chebyshev_checks_assumption_free() {
    let mut w = World::new();
    w.load_str(&corpus("lemmas/markov.ppv"), true).unwrap();
    let certs = w.load_str(&corpus("lemmas/chebyshev.ppv"), true).unwrap();
    assert!(certs[0].1.assumptions.is_empty());
}

#[test]
fn prelude_and_basics_load() {
    let mut w = World::new();
    w.load_str(&corpus("prelude/assumptions.ppv"), false).unwrap();
    w.load_str(&corpus("prelude/lifting_params.ppv"), true).unwrap();
    assert!(w.active_params.contains("S_ub"));
    assert!(w.active_params.contains("S_cpl"));
    w.load_str(&corpus("lemmas/basic.ppv"), true).unwrap();
}

#[test]
fn derived_eq_library_replays() {
    let mut w = World::new();
    w.load_str(&corpus("prelude/assumptions.ppv"), false).unwrap();
    let certs = w.load_str(&corpus("lemmas/derived_eq.ppv"), false).unwrap();
    for (name, cert) in &certs {
        if name == "gauss_conjugacy" {
            assert_eq!(cert.assumptions, vec!["gauss_density_complete_square".to_string()]);
        } else {
            assert!(cert.assumptions.is_empty(), "{name} used assumptions");
        }
    }
    assert!(certs.iter().any(|(n, _)| n == "marginal_law"));
    assert!(certs.iter().any(|(n, _)| n == "independence"));
    assert!(certs.iter().any(|(n, _)| n == "slicing_law"));
}

fn full_world() -> World {
    let mut w = World::new();
    for f in [
        "prelude/assumptions.ppv",
        "prelude/lifting_params.ppv",
        "lemmas/basic.ppv",
        "lemmas/markov.ppv",
        "lemmas/chebyshev.ppv",
        "lemmas/derived_eq.ppv",
    ] {
        w.load_str(&corpus(f), false)
            .unwrap_or_else(|e| panic!("loading {f}: {e}"));
    }
    w
}

#[test]
fn two_us_checks() {
    let mut w = full_world();
    let certs = w.load_str(&corpus("examples/two_us.ppv"), false).unwrap();
    let (_, cert) = certs.iter().find(|(n, _)| n == "two_us").unwrap();
    // only the uniform-distribution facts enter as assumptions
    for a in &cert.assumptions {
        assert!(a.starts_with("uniform") || a.starts_with("mass_one"), "{a}");
    }
}

#[test]
fn slicing_examples_check() {
    let mut w = full_world();
    w.load_str(&corpus("examples/slicing.ppv"), false).unwrap();
}

#[test]
fn slicing2_checks() {
    let mut w = full_world();
    w.load_str(&corpus("examples/slicing2_4.ppv"), false).unwrap();
}

#[test]
fn montecarlo_checks() {
    let mut w = full_world();
    w.load_str(&corpus("examples/montecarlo.ppv"), false).unwrap();
}
