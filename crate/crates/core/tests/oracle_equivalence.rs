//! The library estimator against the brute-force transcription in
//! `support/oracle.rs`.

mod support;

use lrcorr::{
    expected_numerator, influence_column, logrank_numerator, raw_influence_column,
    validate_dataset, RawDataset, SubjectRecord, TrialDataset,
};
use support::oracle::{self, Toy};

fn to_dataset(toy: &Toy) -> TrialDataset {
    let subjects = (0..toy.arm.len())
        .map(|i| SubjectRecord {
            id: format!("s{i}"),
            arm: toy.arm[i],
            observed_time: vec![toy.time[i]],
            status: vec![toy.status[i]],
        })
        .collect();
    validate_dataset(RawDataset {
        endpoint_names: vec!["e".into()],
        subjects,
    })
    .unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn six_subject_toy_matches_entrywise() {
    let toy = oracle::toy_six();
    let ds = to_dataset(&toy);
    let lib = influence_column(&ds, "e").unwrap();
    let orc = oracle::influence(&toy);
    for (i, (a, b)) in lib.iter().zip(&orc).enumerate() {
        assert!(close(*a, *b, 1e-12), "subject {i}: {a} vs {b}");
    }
}

#[test]
fn twenty_toys_match_entrywise() {
    for (t, toy) in oracle::fixed_toys().iter().enumerate() {
        let ds = to_dataset(toy);
        let lib = influence_column(&ds, "e").unwrap();
        let orc = oracle::influence(toy);
        assert_eq!(lib.len(), orc.len());
        for (i, (a, b)) in lib.iter().zip(&orc).enumerate() {
            assert!(close(*a, *b, 1e-12), "toy {t} subject {i}: {a} vs {b}");
        }
        let raw = raw_influence_column(&ds, "e").unwrap();
        for (a, b) in raw.iter().zip(oracle::raw_influence(toy)) {
            assert!(close(*a, b, 1e-12));
        }
    }
}

#[test]
fn numerator_and_its_expectation_match() {
    for toy in oracle::fixed_toys() {
        let ds = to_dataset(&toy);
        assert!(close(
            logrank_numerator(&ds, "e").unwrap(),
            oracle::numerator(&toy),
            1e-12
        ));
        assert!(close(
            expected_numerator(&ds, "e").unwrap(),
            oracle::expected_numerator(&toy),
            1e-12
        ));
    }
}

#[test]
fn oracle_satisfies_the_sum_identity() {
    // The oracle itself obeys sum_i phi_i = n (G - E(G)), so the library and
    // the oracle agree with the identity independently.
    for toy in oracle::fixed_toys() {
        let n = toy.arm.len() as f64;
        let lhs: f64 = oracle::raw_influence(&toy).iter().sum();
        let rhs = n * (oracle::numerator(&toy) - oracle::expected_numerator(&toy));
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn plug_in_expectation_equals_the_numerator() {
    // Per event time, d1 - e d = (y0 d1 - y1 d0) / y = y1 (1 - e) (dG1 - dG0),
    // including times where one arm's risk set is empty, so the column of
    // influence values always sums to zero.
    for toy in oracle::fixed_toys() {
        let ds = to_dataset(&toy);
        let g = logrank_numerator(&ds, "e").unwrap();
        let e = expected_numerator(&ds, "e").unwrap();
        assert!((g - e).abs() <= 1e-14, "{g} vs {e}");
        let sum: f64 = raw_influence_column(&ds, "e").unwrap().iter().sum();
        assert!(sum.abs() <= 1e-12);
    }
}
