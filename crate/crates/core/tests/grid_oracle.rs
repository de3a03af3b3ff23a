//! Every positive-value singular tuple that a brute-force search can find on a
//! small odeco tensor must be one of the closed-form tuples.

mod common;

use common::{grid_oracle_2x2x2, multistart_oracle, same_tuple, OracleTuple};
use odeco::odeco::{all_tuples_on, random_odeco};
use odeco::{OdecoTensor, SingularTuple};

fn closed_form(t: &OdecoTensor) -> Vec<SingularTuple> {
    let r = t.rank();
    let mut out = Vec::new();
    for mask in 1u32..(1 << r) {
        let active: Vec<usize> = (0..r).filter(|k| mask >> k & 1 == 1).collect();
        out.extend(all_tuples_on(t, &active).unwrap());
    }
    out
}

fn covered(o: &OracleTuple, formula: &[SingularTuple]) -> bool {
    formula
        .iter()
        .any(|f| same_tuple(o.value, &o.vectors, f.value, &f.vectors, 1e-4))
}

fn check(t: &OdecoTensor, oracle: &[OracleTuple]) {
    let dense = t.to_dense();
    let formula = closed_form(t);
    for f in &formula {
        assert!(f.residual(&dense).unwrap() < 1e-8);
    }
    assert!(!oracle.is_empty());
    for o in oracle {
        assert!(
            covered(o, &formula),
            "oracle tuple missing from closed form: {o:?}"
        );
    }
    // The search is exhaustive enough to meet every distinct closed-form value.
    let mut values: Vec<f64> = formula.iter().map(|f| f.value).collect();
    values.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    for v in values {
        assert!(
            oracle.iter().any(|o| (o.value - v).abs() < 1e-6),
            "value {v} not found"
        );
    }
}

#[test]
fn grid_search_distinct_values() {
    let t = random_odeco(&[2, 2, 2], &[3.0, 1.0], 21).unwrap();
    let oracle = grid_oracle_2x2x2(&t.to_dense(), 90);
    check(&t, &oracle);
}

#[test]
fn grid_search_tied_values() {
    let t = random_odeco(&[2, 2, 2], &[2.0, 2.0], 22).unwrap();
    let oracle = grid_oracle_2x2x2(&t.to_dense(), 90);
    check(&t, &oracle);
}

#[test]
fn multistart_cubic() {
    let t = random_odeco(&[3, 3, 3], &[3.0, 2.0, 1.0], 23).unwrap();
    let oracle = multistart_oracle(&t.to_dense(), 600, 5);
    check(&t, &oracle);
}

#[test]
fn multistart_rectangular() {
    let t = random_odeco(&[2, 3, 3], &[2.5, 1.5], 24).unwrap();
    let oracle = multistart_oracle(&t.to_dense(), 400, 6);
    check(&t, &oracle);
}
