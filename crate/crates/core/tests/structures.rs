use proptest::prelude::*;
use tn_capacity::structure::{build_family, Edge, Family, RankSpec, StructureError, TensorNetworkStructure};

fn family_strategy() -> impl Strategy<Value = (Family, Vec<usize>, RankSpec)> {
    (
        prop::sample::select(Family::ALL.to_vec()),
        prop::collection::vec(1usize..5, 2..6),
        1usize..4,
    )
        .prop_map(|(family, mut dims, r)| {
            let rank = match family {
                Family::PepsGrid => {
                    if dims.len() % 2 == 1 {
                        dims.pop();
                    }
                    RankSpec::Grid { height: 2, bond: r }
                }
                _ => RankSpec::Uniform(r),
            };
            if family == Family::Matrix {
                dims.truncate(2);
            }
            (family, dims, rank)
        })
}

proptest! {
    #[test]
    fn builders_round_trip_through_json((family, dims, rank) in family_strategy()) {
        let s = build_family(family, &dims, &rank).unwrap();
        prop_assert_eq!(s.output_shape(), dims.clone());
        let back: TensorNetworkStructure = serde_json::from_str(&s.to_json()).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert!(back.validate().is_ok());
        prop_assert_eq!(back.param_count(), s.param_count());
    }

    #[test]
    fn param_count_is_sum_of_core_sizes((family, dims, rank) in family_strategy()) {
        let s = build_family(family, &dims, &rank).unwrap();
        let total: usize = (0..s.vertex_count()).map(|v| s.core_shape(v).iter().product::<usize>()).sum();
        prop_assert_eq!(s.param_count(), total);
    }
}

#[test]
fn tt_example_counts() {
    let s = build_family(Family::Tt, &[4, 4, 4, 4], &RankSpec::Uniform(8)).unwrap();
    assert_eq!(s.param_count(), 576);
    assert_eq!(s.summary().dangling_count, 4);
    let per_edge = build_family(Family::Tt, &[2, 3, 2], &RankSpec::PerEdge(vec![2, 3])).unwrap();
    assert_eq!(per_edge.param_count(), 2 * 2 + 2 * 3 * 3 + 3 * 2);
}

#[test]
fn schema_errors() {
    let e = serde_json::from_str::<TensorNetworkStructure>(
        r#"{"vertices": ["a"], "edges": [{"endpoints": ["a", "z"], "dim": 2}]}"#,
    )
    .unwrap_err();
    assert!(e.to_string().contains("\"z\""), "{e}");

    let e = TensorNetworkStructure::new(["a", "b"], vec![Edge::new(["a"], 2)]).unwrap_err();
    assert!(matches!(e, StructureError::IsolatedVertex(ref v) if v == "b"));

    let e = TensorNetworkStructure::new(["a"], vec![Edge::new(["a"], 0)]).unwrap_err();
    assert!(matches!(e, StructureError::NonPositiveDim { .. }));

    assert!(build_family(Family::PepsGrid, &[2, 2, 2], &RankSpec::Grid { height: 2, bond: 2 }).is_err());
    assert!(build_family(Family::Tt, &[2, 2, 2], &RankSpec::PerEdge(vec![2])).is_err());
}

#[test]
fn family_names_parse() {
    for f in Family::ALL {
        assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
    }
    assert!("mps".parse::<Family>().is_err());
}
