//! Series-algebra responses against explicit dense matrix constructions.

mod common;

use common::dense::{dense_cascade_worst, dense_single_worst};

const INSTANCES: usize = 50;
const TOL: f64 = 1e-10;

#[test]
fn single_loop_matches_dense_solve() {
    let worst = dense_single_worst(INSTANCES, 101);
    assert!(worst < TOL, "max abs diff {worst:e}");
}

#[test]
fn cascade_matches_dense_solve() {
    let worst = dense_cascade_worst(INSTANCES, 202);
    assert!(worst < TOL, "max abs diff {worst:e}");
}
