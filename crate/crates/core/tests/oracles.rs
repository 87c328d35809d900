//! Solver optima against brute-force search on small random instances.

use casemix_validation::{backend, encoding_suite, oracle_instance};

#[test]
fn scalarizations_match_grid_search() {
    let be = backend();
    let mut checks = 0;
    for seed in 0..60 {
        checks += oracle_instance(seed, &be).unwrap_or_else(|e| panic!("{e}"));
    }
    assert_eq!(checks, 60 * 6);
}

#[test]
fn encoded_utilities_equal_direct_evaluation() {
    let be = backend();
    assert_eq!(encoding_suite(7, 500, &be).unwrap_or_else(|e| panic!("{e}")), 500);
}
