mod common;

use std::collections::BTreeMap;

use common::{arb_graph, arb_transform};
use fspm_bridge_core::geometry::{global_frames, globalize, localize, surface_area, ArgRule, GeometrySignature};
use fspm_bridge_core::graph::{canonical_diff, EdgeType, GraphEdge, GraphNode, PropertyValue};
use fspm_bridge_core::{ExchangeGraph, NodeId, Transform};
use proptest::prelude::*;

fn matmul(a: &[f64; 16], b: &[f64; 16]) -> [f64; 16] {
    let mut c = [0.0; 16];
    for i in 0..4 {
        for j in 0..4 {
            c[i * 4 + j] = (0..4).map(|k| a[i * 4 + k] * b[k * 4 + j]).sum();
        }
    }
    c
}

fn cross_norm(u: [f64; 3], v: [f64; 3]) -> f64 {
    let c = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

fn arb_vec3() -> impl Strategy<Value = [f64; 3]> {
    [-10.0f64..10.0, -10.0..10.0, -10.0..10.0]
}

fn parallelogram(o: [f64; 3], u: [f64; 3], v: [f64; 3]) -> GeometrySignature {
    GeometrySignature::new(
        "Parallelogram",
        vec![("origin", PropertyValue::Vec3(o)), ("u", PropertyValue::Vec3(u)), ("v", PropertyValue::Vec3(v))],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn parallelogram_triangulations_keep_area_and_corners(o in arb_vec3(), u in arb_vec3(), v in arb_vec3()) {
        let expect = cross_norm(u, v);
        prop_assume!(expect > 1e-6);
        let corners = [o, [o[0] + u[0], o[1] + u[1], o[2] + u[2]], [o[0] + u[0] + v[0], o[1] + u[1] + v[1], o[2] + u[2] + v[2]], [o[0] + v[0], o[1] + v[1], o[2] + v[2]]];
        for rule in [ArgRule::ParallelogramTri2, ArgRule::ParallelogramTri4] {
            let out = rule.apply(&parallelogram(o, u, v), "TriangleSet").unwrap();
            let area = surface_area(&out[0]).unwrap();
            prop_assert!((area - expect).abs() <= 1e-9 * expect, "{rule:?}: {area} vs {expect}");
            let verts: Vec<[f64; 3]> = out[0].arg("vertices").and_then(PropertyValue::as_list).unwrap().chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            for c in &corners {
                prop_assert!(verts.iter().any(|p| (0..3).all(|k| (p[k] - c[k]).abs() <= 1e-12 * (1.0 + c[k].abs()))));
            }
        }
    }

    #[test]
    fn frames_match_explicit_products(g in arb_graph(30)) {
        let frames = global_frames(&g).unwrap();
        let parents = g.frame_parents();
        for n in g.nodes() {
            // Multiply local matrices up the frame-parent chain by hand.
            let mut m = n.local_transform.unwrap_or_default().to_row_major();
            let mut at = n.id;
            while let Some(p) = parents.get(&at) {
                m = matmul(&g.node(*p).unwrap().local_transform.unwrap_or_default().to_row_major(), &m);
                at = *p;
            }
            let got = frames[&n.id].to_row_major();
            let scale = m.iter().fold(1.0f64, |a, x| a.max(x.abs()));
            for k in 0..16 {
                prop_assert!((got[k] - m[k]).abs() <= 1e-9 * scale, "node {}: {:?} vs {:?}", n.id, got, m);
            }
        }
    }

    #[test]
    fn globalize_localize_round_trip(g in arb_graph(30)) {
        let back = localize(&globalize(&g).unwrap()).unwrap();
        let d = canonical_diff(&g, &back, 1e-9).unwrap();
        prop_assert!(d.is_none(), "{:?}", d);
    }

    #[test]
    fn deep_chains_round_trip(locals in prop::collection::vec(arb_transform(), 20)) {
        let mut g = ExchangeGraph::with_root(GraphNode::new(1, "root", "Plant", 0)).unwrap();
        for (k, t) in locals.iter().enumerate() {
            let id = k as u64 + 2;
            g.add_node(GraphNode::new(id, "seg", "Metamer", 0).with_local(*t)).unwrap();
            g.add_edge(GraphEdge::new(id - 1, id, EdgeType::Successor)).unwrap();
        }
        let back = localize(&globalize(&g).unwrap()).unwrap();
        let d = canonical_diff(&g, &back, 1e-9).unwrap();
        prop_assert!(d.is_none(), "{:?}", d);
    }

    #[test]
    fn cylinder_rules_are_inverse(r in 0.001f64..1.0, l in 0.001f64..10.0) {
        let sig = GeometrySignature::new("Cylinder", vec![("radius", PropertyValue::Double(r)), ("length", PropertyValue::Double(l))]);
        let there = ArgRule::CylinderLengthToHeight.apply(&sig, "Cylinder").unwrap();
        prop_assert_eq!(there[0].arg("height"), Some(&PropertyValue::Double(l)));
        let back = ArgRule::CylinderHeightToLength.apply(&there[0], "Cylinder").unwrap();
        prop_assert_eq!(&back[0], &sig);
        prop_assert_eq!(surface_area(&there[0]).unwrap(), surface_area(&sig).unwrap());
    }
}

#[test]
fn bezier_tessellation_of_a_flat_patch_keeps_its_area() {
    // Bilinear control grid over [0, 2] × [0, 3]: the patch is the rectangle itself.
    let mut pts = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            pts.extend([2.0 * i as f64 / 3.0, 3.0 * j as f64 / 3.0, 0.0]);
        }
    }
    let sig = GeometrySignature::new(
        "BezierPatch",
        vec![
            ("rows", PropertyValue::Int(4)),
            ("cols", PropertyValue::Int(4)),
            ("control_points", PropertyValue::DoubleList(pts)),
        ],
    );
    let mesh = ArgRule::BezierTessellate.apply(&sig, "TriangleSet").unwrap();
    assert!((surface_area(&mesh[0]).unwrap() - 6.0).abs() < 1e-12);
    assert!((surface_area(&sig).unwrap() - 6.0).abs() < 1e-12);
}

#[test]
fn global_mode_frames_of_a_tiny_tree() {
    let t = |x| Transform::translation(fspm_bridge_core::Vec3d::new(x, 0.0, 0.0));
    let mut g = ExchangeGraph::with_root(GraphNode::new(1, "root", "Plant", 0).with_local(t(1.0))).unwrap();
    g.add_node(GraphNode::new(2, "a", "Metamer", 0).with_local(t(2.0))).unwrap();
    g.add_node(GraphNode::new(3, "b", "Metamer", 1).with_local(t(4.0))).unwrap();
    g.add_edge(GraphEdge::new(1, 2, EdgeType::Branch)).unwrap();
    g.add_edge(GraphEdge::new(2, 3, EdgeType::Decomposition)).unwrap();
    let frames: BTreeMap<NodeId, f64> =
        global_frames(&g).unwrap().into_iter().map(|(id, t)| (id, t.translation_part().x)).collect();
    assert_eq!(frames, BTreeMap::from([(NodeId(1), 1.0), (NodeId(2), 3.0), (NodeId(3), 7.0)]));
}
