mod common;

use std::collections::BTreeMap;

use common::arb_graph;
use fspm_bridge_core::graph::{canonical_diff, canonical_equal, EdgeType, PropertyValue, ValueKind};
use fspm_bridge_core::pipeline::{
    convert_env, decompose_scale, Aggregate, map_edge_types, run_pipeline, upscale_properties, AggregateOp, ConvertDirection,
    DecompositionScheme, EdgeTypeMap, Env, MapDirection, UnitRule, UpscaleSpec,
};
use fspm_bridge_core::toy::{builtin_file, builtin_pipeline, growth_export, GrowthState};
use fspm_bridge_core::{ExchangeGraph, NodeId, TransformMode};
use proptest::prelude::*;

fn scheme() -> DecompositionScheme {
    DecompositionScheme::from_xml(builtin_file("metamer_scheme.xml").unwrap()).unwrap()
}

fn edge_map() -> EdgeTypeMap {
    EdgeTypeMap::new([
        ("next".to_string(), EdgeType::Successor),
        ("lateral".to_string(), EdgeType::Branch),
        ("refinement".to_string(), EdgeType::Decomposition),
    ])
    .unwrap()
}

fn toy(seed: u64, steps: u64) -> ExchangeGraph {
    growth_export(&GrowthState::grown(seed, steps), TransformMode::Local)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn edge_maps_out_then_in_is_identity(g in arb_graph(30)) {
        let out = map_edge_types(&g, &edge_map(), MapDirection::Out).unwrap();
        prop_assert!(out.edges().all(|e| !e.etype.is_standard()));
        prop_assert!(out.validate().is_empty());
        let back = map_edge_types(&out, &edge_map(), MapDirection::In).unwrap();
        prop_assert!(canonical_equal(&g, &back, 0.0).unwrap());
    }

    #[test]
    fn conversion_round_trips(x in -1e4f64..1e4, a in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0], b in -1e3f64..1e3) {
        let env: Env = BTreeMap::from([("t".to_string(), PropertyValue::Double(x))]);
        for target in [ValueKind::Double, ValueKind::Float] {
            let rule = UnitRule::new("t", ValueKind::Double, target, a, b).unwrap();
            let (fwd, _) = convert_env(&env, std::slice::from_ref(&rule), ConvertDirection::Forward).unwrap();
            prop_assert_eq!(fwd["t"].kind(), target);
            let (back, _) = convert_env(&fwd, &[rule], ConvertDirection::Inverse).unwrap();
            let y = back["t"].as_f64().unwrap();
            // A float cast keeps about 7 significant digits of a·x + b.
            let rel = if target == ValueKind::Float { 1e-6 } else { 1e-12 };
            let scale = x.abs().max((a * x + b).abs() / a.abs()).max(1.0);
            prop_assert!((y - x).abs() <= rel * scale, "{target:?}: {x} -> {y}");
        }
    }

    #[test]
    fn decompose_then_upscale_is_identity(seed in any::<u64>(), steps in 0u64..25) {
        let g = toy(seed, steps);
        let s = scheme();
        let fine = decompose_scale(&g, &s).unwrap();
        prop_assert!(fine.validate().is_empty());
        prop_assert_eq!(fine.node_count(), g.node_count() + 3 * (g.node_count() - 1));
        let (back, _) = upscale_properties(&fine, &s, &UpscaleSpec::default()).unwrap();
        prop_assert_eq!(back.census(), g.census());
        prop_assert!(canonical_equal(&g, &back, 0.0).unwrap());
    }

    #[test]
    fn aggregates_match_a_brute_force_fold(seed in any::<u64>(), steps in 1u64..20, loads in prop::collection::vec((-1e3f64..1e3, -1000i64..1000), 100)) {
        let s = scheme();
        let mut fine = decompose_scale(&toy(seed, steps), &s).unwrap();
        let parts: Vec<NodeId> = fine.nodes().filter(|n| n.scale == 2).map(|n| n.id).collect();
        for (k, id) in parts.iter().enumerate() {
            let (x, i) = loads[k % loads.len()];
            let n = fine.node_mut(*id).unwrap();
            n.set_property("load", x + k as f64);
            n.set_property("count", i);
        }
        let mut spec = UpscaleSpec::default().with("count", AggregateOp::Sum);
        for (field, op, target) in [("load", AggregateOp::Sum, "load_sum"), ("load", AggregateOp::Mean, "load_mean"), ("load", AggregateOp::Max, "load_max")] {
            spec.aggregates.push(Aggregate { field: field.into(), op, target: target.into() });
        }
        let (coarse, warnings) = upscale_properties(&fine, &s, &spec).unwrap();
        prop_assert!(warnings.is_empty(), "{:?}", warnings);
        for m in coarse.nodes().filter(|n| n.type_name == "Metamer") {
            let mut xs = Vec::new();
            let mut is = Vec::new();
            for e in fine.edges().filter(|e| e.src == m.id && e.etype == EdgeType::Decomposition) {
                let p = fine.node(e.dst).unwrap();
                xs.push(p.property("load").and_then(PropertyValue::as_f64).unwrap());
                if let Some(PropertyValue::Int(i)) = p.property("count") {
                    is.push(*i);
                }
            }
            prop_assert_eq!(xs.len(), 3);
            let sum: f64 = xs.iter().sum();
            let get = |f: &str| m.property(f).and_then(PropertyValue::as_f64).unwrap();
            prop_assert!((get("load_sum") - sum).abs() <= 1e-12 * sum.abs().max(1.0));
            prop_assert!((get("load_mean") - sum / 3.0).abs() <= 1e-12 * sum.abs().max(1.0));
            prop_assert_eq!(get("load_max"), xs.iter().copied().fold(f64::MIN, f64::max));
            prop_assert_eq!(m.property("count"), Some(&PropertyValue::Int(is.iter().sum())));
        }
    }

    #[test]
    fn water_pipelines_are_inverse(seed in any::<u64>(), steps in 0u64..30) {
        let g = toy(seed, steps);
        let env: Env = BTreeMap::from([("temperature".to_string(), PropertyValue::Double(21.5))]);
        let there = run_pipeline(&g, &env, &builtin_pipeline("water_import.xml").unwrap()).unwrap();
        prop_assert!(there.graph.validate().is_empty());
        let back = run_pipeline(&there.graph, &there.env, &builtin_pipeline("water_export.xml").unwrap()).unwrap();
        let d = canonical_diff(&g, &back.graph, 1e-9).unwrap();
        prop_assert!(d.is_none(), "{:?}", d);
    }
}

#[test]
fn celsius_fixed_points() {
    let rule = UnitRule::celsius_to_fahrenheit("temperature");
    let f = |c: f64| rule.apply(&PropertyValue::Double(c), ConvertDirection::Forward).unwrap();
    assert_eq!(f(100.0), PropertyValue::Float(212.0));
    assert_eq!(f(0.0), PropertyValue::Float(32.0));
    assert_eq!(f(-40.0), PropertyValue::Float(-40.0));
}

#[test]
fn unmapped_edge_type_names_the_stage() {
    let mut g = toy(1, 2);
    let e = g.edges().next().unwrap().clone();
    g.remove_edge(&e);
    g.add_edge(fspm_bridge_core::GraphEdge::new(e.src.0, e.dst.0, EdgeType::Foreign("graft".into()))).unwrap();
    let err = run_pipeline(&g, &Env::new(), &builtin_pipeline("water_export.xml").unwrap()).unwrap_err();
    assert_eq!(err.stage_kind(), Some("map_edge_types"));
    assert!(err.to_string().contains("graft"), "{err}");
}

#[test]
fn decomposing_twice_is_refused() {
    let s = scheme();
    let fine = decompose_scale(&toy(2, 3), &s).unwrap();
    assert!(decompose_scale(&fine, &s).is_err());
}
