use std::collections::HashSet;

use tn_capacity::contract::contract;
use tn_capacity::shattering::{
    estimate_shattered_count, verify_certificate, verify_certificate_with, Construction, ShatterError,
    ShatteringCertificate, VerifyMode, VerifyOptions,
};
use tn_capacity::structure::{build_matrix, build_rank_one};
use tn_capacity::tensor::next_index;

fn table_size(c: Construction, d: usize, p: usize, r: usize) -> usize {
    match c {
        Construction::RankOne => (d - 1) * p,
        Construction::Tt | Construction::Tr => r * r * d,
        Construction::TtBlock | Construction::TrBlock => p * (d * d * d - 1) / 3,
        Construction::Tucker => r.pow(p as u32),
        Construction::Cp => r * d,
    }
}

#[test]
fn grid_of_small_constructions_is_shattered() {
    let mut verified = 0;
    for c in Construction::ALL {
        for d in 2..=3 {
            for r in 1..=3 {
                for p in 1..=6 {
                    let Ok(cert) = c.build(d, p, r) else { continue };
                    assert_eq!(cert.size(), table_size(c, d, p, r), "{c} d={d} p={p} r={r}");
                    if cert.size() > 16 {
                        continue;
                    }
                    let rec = verify_certificate(&cert, VerifyMode::Exhaustive).unwrap();
                    assert!(rec.enumerated);
                    assert_eq!(rec.patterns_realized, 1 << cert.size(), "{c} d={d} p={p} r={r}");
                    verified += 1;
                }
            }
        }
    }
    assert!(verified > 40, "{verified}");
}

fn all_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut ix = vec![0; shape.len()];
    loop {
        out.push(ix.clone());
        if !next_index(&mut ix, shape) {
            return out;
        }
    }
}

#[test]
fn funnels_vanish_outside_the_index_set() {
    for (c, d, p, r) in [
        (Construction::Tt, 2, 5, 2),
        (Construction::Tt, 3, 3, 2),
        (Construction::Tr, 2, 4, 2),
        (Construction::Tucker, 3, 2, 2),
        (Construction::Cp, 2, 3, 3),
    ] {
        let cert = c.build(d, p, r).unwrap();
        let values: Vec<f64> = (0..cert.size()).map(|i| i as f64 + 1.5).collect();
        let t = contract(&cert.structure, &cert.assemble(&values)).unwrap();
        let inside: HashSet<&Vec<usize>> = cert.index_set.iter().collect();
        for ix in all_indices(t.shape()) {
            if !inside.contains(&ix) {
                assert_eq!(t.get(&ix), 0.0, "{c} at {ix:?}");
            }
        }
        for (s, v) in cert.index_set.iter().zip(&values) {
            assert_eq!(t.get(s), *v);
        }
    }
}

#[test]
fn block_construction_is_an_outer_product() {
    let cert = Construction::TtBlock.build(2, 6, 2).unwrap();
    let values: Vec<f64> = (0..cert.size()).map(|i| (i as f64 - 6.0) / 4.0).collect();
    let cores = cert.assemble(&values);
    let t = contract(&cert.structure, &cores).unwrap();
    let (a, b) = (cores.get("v2").unwrap(), cores.get("v5").unwrap());
    for ix in all_indices(t.shape()) {
        assert_eq!(t.get(&ix), a.get(&ix[0..3]) * b.get(&ix[3..6]));
    }
}

#[test]
fn spot_checks_above_the_cap() {
    let cert = Construction::TtBlock.build(3, 3, 3).unwrap();
    assert_eq!(cert.size(), 26);
    let opts = VerifyOptions { spot_checks: 200, ..VerifyOptions::default() };
    let rec = verify_certificate_with(&cert, VerifyMode::Exhaustive, &opts).unwrap();
    assert!(!rec.enumerated);
    assert_eq!(rec.patterns_checked, 200);
}

#[test]
fn corrupted_certificates_are_rejected() {
    let mut cert = Construction::Tucker.build(3, 2, 2).unwrap();
    let last = cert.passthrough.len() - 1;
    cert.passthrough[last].position[1] = 0;
    assert!(matches!(
        verify_certificate(&cert, VerifyMode::Exhaustive),
        Err(ShatterError::Malformed(_))
    ));

    let mut cert = Construction::Cp.build(2, 2, 2).unwrap();
    let a = cert.passthrough[0].clone();
    cert.passthrough[0] = cert.passthrough[1].clone();
    cert.passthrough[1] = a;
    let err = verify_certificate(&cert, VerifyMode::Exhaustive).unwrap_err();
    assert!(matches!(err, ShatterError::VerificationFailed { .. }), "{err}");
}

#[test]
fn certificate_json_round_trip() {
    let cert = Construction::Tr.build(2, 3, 2).unwrap();
    let back: ShatteringCertificate = serde_json::from_str(&cert.to_json()).unwrap();
    assert_eq!(back, cert);
    assert_eq!(verify_certificate(&back, VerifyMode::Exhaustive).unwrap().patterns_realized, 256);
}

#[test]
fn estimator_properties() {
    let all = all_indices(&[2, 2]);
    let r1 = build_rank_one(&[2, 2]).unwrap();
    let mut last = 0;
    for samples in [1, 10, 100, 1000, 20_000] {
        let k = estimate_shattered_count(&r1, &all, samples, 42).unwrap();
        assert!(k >= last);
        assert!(k < 16, "rank one realized {k} patterns");
        last = k;
    }
    assert_eq!(last, 8);

    let m = build_matrix(2, 2, 2).unwrap();
    let a = estimate_shattered_count(&m, &all, 3000, 1).unwrap();
    assert_eq!(a, estimate_shattered_count(&m, &all, 3000, 1).unwrap());
    assert_eq!(estimate_shattered_count(&m, &[], 10, 1).unwrap(), 1);

    let too_many: Vec<Vec<usize>> = all_indices(&[3, 7]);
    assert!(estimate_shattered_count(&build_matrix(3, 7, 2).unwrap(), &too_many, 1, 0).is_err());
}
