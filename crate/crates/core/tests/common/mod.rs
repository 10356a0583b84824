#![allow(dead_code)]

use fspm_bridge_core::graph::{EdgeType, ExchangeGraph, GraphEdge, GraphNode, PropertyValue};
use fspm_bridge_core::math::{compose_transforms, TransformOp};
use fspm_bridge_core::{Transform, Vec3d};
use proptest::prelude::*;

pub fn arb_value() -> impl Strategy<Value = PropertyValue> {
    let f = -1e6f64..1e6;
    prop_oneof![
        any::<i64>().prop_map(PropertyValue::Int),
        (-1e6f32..1e6).prop_map(PropertyValue::Float),
        f.clone().prop_map(PropertyValue::Double),
        prop_oneof![Just(1e-300f64), Just(-0.0), Just(5e-324), Just(f64::MAX)].prop_map(PropertyValue::Double),
        any::<bool>().prop_map(PropertyValue::Bool),
        "[a-z <>&\"'\t\n]{0,10}".prop_map(PropertyValue::Text),
        [f.clone(), f.clone(), f.clone()].prop_map(PropertyValue::Vec3),
        prop::collection::vec(f.clone(), 16).prop_map(|v| PropertyValue::Matrix4(v.try_into().unwrap())),
        prop::collection::vec(f, 0..8).prop_map(PropertyValue::DoubleList),
    ]
}

pub fn arb_op() -> impl Strategy<Value = TransformOp<f64>> {
    prop_oneof![
        [-5.0f64..5.0, -5.0..5.0, -5.0..5.0].prop_map(|t| TransformOp::Translation(Vec3d::from_array(t))),
        ([-1.0f64..1.0, -1.0..1.0, -1.0..1.0], -180.0f64..180.0)
            .prop_filter("axis must be non-zero", |(a, _)| a.iter().map(|x| x * x).sum::<f64>() > 1e-4)
            .prop_map(|(a, angle)| TransformOp::Rotation { axis: Vec3d::from_array(a), angle_deg: angle }),
        [0.5f64..2.0, 0.5..2.0, 0.5..2.0].prop_map(|s| TransformOp::Scaling(Vec3d::from_array(s))),
    ]
}

pub fn arb_transform() -> impl Strategy<Value = Transform> {
    prop::collection::vec(arb_op(), 1..4).prop_map(|ops| compose_transforms(&ops).unwrap())
}

#[derive(Debug, Clone)]
pub struct NodeSpec {
    parent: usize,
    link: u8,
    name: usize,
    props: Vec<(usize, PropertyValue)>,
    local: Option<Transform>,
}

const NAMES: [&str; 4] = ["plant", "metamer", "internode", "leaf"];
const TYPES: [&str; 4] = ["Plant", "Metamer", "Cylinder", "Sphere"];
const FIELDS: [&str; 5] = ["color", "length", "radius", "water_content", "age"];

fn arb_spec() -> impl Strategy<Value = NodeSpec> {
    (
        any::<usize>(),
        0u8..3,
        0usize..4,
        prop::collection::vec((0usize..5, arb_value()), 0..4),
        prop::option::of(arb_transform()),
    )
        .prop_map(|(parent, link, name, props, local)| NodeSpec { parent, link, name, props, local })
}

fn build(specs: &[NodeSpec], extra: &[(usize, usize)]) -> ExchangeGraph {
    let mut g = ExchangeGraph::with_root(GraphNode::new(1, "plant", "Plant", 0)).unwrap();
    let mut scales = vec![0u32];
    let mut has_successor = vec![false];
    for (k, s) in specs.iter().enumerate() {
        let id = k as u64 + 2;
        let parent = s.parent % (k + 1);
        let etype = match s.link {
            0 if !has_successor[parent] => EdgeType::Successor,
            2 => EdgeType::Decomposition,
            _ => EdgeType::Branch,
        };
        if etype == EdgeType::Successor {
            has_successor[parent] = true;
        }
        let scale = scales[parent] + u32::from(etype == EdgeType::Decomposition);
        let mut n = GraphNode::new(id, NAMES[s.name], TYPES[s.name], scale);
        for (f, v) in &s.props {
            n.set_property(FIELDS[*f], v.clone());
        }
        n.local_transform = s.local;
        g.add_node(n).unwrap();
        g.add_edge(GraphEdge::new(parent as u64 + 1, id, etype)).unwrap();
        scales.push(scale);
        has_successor.push(false);
    }
    let n = specs.len() + 1;
    for (a, b) in extra {
        let (a, b) = (a % n, b % n);
        let (src, dst) = (a.min(b) as u64 + 1, a.max(b) as u64 + 1);
        if src != dst && dst != 1 {
            let e = GraphEdge::new(src, dst, EdgeType::Branch);
            if !g.edges().any(|x| *x == e) {
                g.add_edge(e).unwrap();
            }
        }
    }
    g
}

/// Valid local-mode graphs: a random spanning tree of successor, branch and
/// decomposition edges plus a few forward branch edges.
pub fn arb_graph(max_nodes: usize) -> impl Strategy<Value = ExchangeGraph> {
    (
        prop::collection::vec(arb_spec(), 0..max_nodes),
        prop::collection::vec((any::<usize>(), any::<usize>()), 0..3),
    )
        .prop_map(|(specs, extra)| build(&specs, &extra))
}

/// Same graph with ids replaced by `perm` (a permutation of node indices)
/// offset by `offset`, and nodes and edges inserted in a different order.
pub fn relabel(g: &ExchangeGraph, perm: &[usize], offset: u64) -> ExchangeGraph {
    let ids: Vec<u64> = g.nodes().map(|n| n.id.0).collect();
    let new_id = |old: u64| {
        let i = ids.iter().position(|x| *x == old).unwrap();
        perm[i] as u64 + offset
    };
    let root = g.root().unwrap();
    let mut rn = g.node(root).unwrap().clone();
    rn.id.0 = new_id(root.0);
    let mut out = ExchangeGraph::with_root(rn).unwrap();
    out.set_transform_mode(g.transform_mode());
    let mut nodes: Vec<_> = g.nodes().filter(|n| n.id != root).cloned().collect();
    nodes.reverse();
    for mut n in nodes {
        n.id.0 = new_id(n.id.0);
        out.add_node(n).unwrap();
    }
    let mut edges: Vec<_> = g.edges().cloned().collect();
    edges.reverse();
    for e in edges {
        out.add_edge(GraphEdge::new(new_id(e.src.0), new_id(e.dst.0), e.etype)).unwrap();
    }
    out
}

pub fn arb_relabelled(max_nodes: usize) -> impl Strategy<Value = (ExchangeGraph, ExchangeGraph)> {
    arb_graph(max_nodes)
        .prop_flat_map(|g| {
            let n = g.node_count();
            (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle(), 1u64..1000)
        })
        .prop_map(|(g, perm, offset)| {
            let r = relabel(&g, &perm, offset);
            (g, r)
        })
}
