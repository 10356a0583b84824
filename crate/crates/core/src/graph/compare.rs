//! Structural comparison of two graphs, ignoring node ids.
//!
//! Both graphs are walked depth-first from the root. Siblings are ordered by
//! edge class, then by an id-free key made of the node's type, name, scale and
//! non-floating property content, then by their floating point content, then
//! by how they connect to the rest of the graph. Ids only decide between siblings that agree on
//! all of that, so renumbering nodes does not change the walk.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};
use std::fmt;

use super::{ExchangeGraph, GraphError, GraphNode, NodeId, PropertyValue};
use crate::Transform;

/// Relative tolerance used when callers do not supply one.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Absolute floor, as a fraction of the relative tolerance (1e-12 at the default).
const ABS_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Difference(pub String);

impl fmt::Display for Difference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn canonical_equal(a: &ExchangeGraph, b: &ExchangeGraph, tol: f64) -> Result<bool, GraphError> {
    canonical_diff(a, b, tol).map(|d| d.is_none())
}

/// First structural difference between `a` and `b`, or `None` if they are
/// equal. Floats are compared with relative tolerance `tol` (exactly when
/// `tol == 0`).
pub fn canonical_diff(a: &ExchangeGraph, b: &ExchangeGraph, tol: f64) -> Result<Option<Difference>, GraphError> {
    a.ensure_valid()?;
    b.ensure_valid()?;
    let diff = |s: String| Ok(Some(Difference(s)));

    if a.transform_mode() != b.transform_mode() {
        return diff(format!(
            "transform mode differs: {} vs {}",
            a.transform_mode().name(),
            b.transform_mode().name()
        ));
    }
    if a.node_count() != b.node_count() || a.edge_count() != b.edge_count() {
        return diff(format!(
            "census differs: {} nodes/{} edges vs {} nodes/{} edges",
            a.node_count(),
            a.edge_count(),
            b.node_count(),
            b.edge_count()
        ));
    }

    let order_a = canonical_walk(a);
    let order_b = canonical_walk(b);
    let cmp = FloatCmp::new(tol);
    for (pos, (ia, ib)) in order_a.iter().zip(&order_b).enumerate() {
        let na = a.node(*ia).expect("walked node exists");
        let nb = b.node(*ib).expect("walked node exists");
        if let Some(d) = compare_nodes(na, nb, &cmp) {
            return diff(format!("node #{pos} ({} {:?} / ids {} vs {}): {d}", na.type_name, na.name, ia, ib));
        }
    }

    let ea = indexed_edges(a, &order_a);
    let eb = indexed_edges(b, &order_b);
    if let Some((x, y)) = ea.iter().zip(&eb).find(|(x, y)| x != y) {
        return diff(format!(
            "edge differs: #{} -{}-> #{} vs #{} -{}-> #{}",
            x.0, x.1, x.2, y.0, y.1, y.2
        ));
    }
    Ok(None)
}

struct FloatCmp {
    rel: f64,
    abs: f64,
}

impl FloatCmp {
    fn new(tol: f64) -> Self {
        FloatCmp { rel: tol, abs: tol * ABS_FRACTION }
    }

    fn eq(&self, a: f64, b: f64) -> bool {
        if a == b || (a.is_nan() && b.is_nan()) {
            return true;
        }
        let d = (a - b).abs();
        d <= self.rel * a.abs().max(b.abs()) || d <= self.abs
    }

    fn eq_slice(&self, a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| self.eq(*x, *y))
    }

    fn eq_value(&self, a: &PropertyValue, b: &PropertyValue) -> bool {
        use PropertyValue as P;
        match (a, b) {
            (P::Float(x), P::Float(y)) => self.eq(*x as f64, *y as f64),
            (P::Double(x), P::Double(y)) => self.eq(*x, *y),
            (P::Vec3(x), P::Vec3(y)) => self.eq_slice(x, y),
            (P::Matrix4(x), P::Matrix4(y)) => self.eq_slice(x, y),
            (P::DoubleList(x), P::DoubleList(y)) => self.eq_slice(x, y),
            _ => a == b,
        }
    }

    fn eq_transform(&self, a: Option<&Transform>, b: Option<&Transform>) -> bool {
        let id = Transform::identity();
        let (a, b) = (a.unwrap_or(&id), b.unwrap_or(&id));
        a.approx_eq(b, self.rel, self.abs)
    }
}

fn compare_nodes(a: &GraphNode, b: &GraphNode, cmp: &FloatCmp) -> Option<String> {
    if a.type_name != b.type_name {
        return Some(format!("type differs: {:?} vs {:?}", a.type_name, b.type_name));
    }
    if a.name != b.name {
        return Some(format!("name differs: {:?} vs {:?}", a.name, b.name));
    }
    if a.scale != b.scale {
        return Some(format!("scale differs: {} vs {}", a.scale, b.scale));
    }
    let names: BTreeSet<&String> = a.properties.keys().chain(b.properties.keys()).collect();
    for name in names {
        match (a.properties.get(name), b.properties.get(name)) {
            (Some(x), Some(y)) if !cmp.eq_value(x, y) => {
                return Some(format!("property {name:?} differs: {x} vs {y}"));
            }
            (Some(_), None) => return Some(format!("property {name:?} missing on the right")),
            (None, Some(_)) => return Some(format!("property {name:?} missing on the left")),
            _ => {}
        }
    }
    if !cmp.eq_transform(a.local_transform.as_ref(), b.local_transform.as_ref()) {
        return Some("local transform differs".to_string());
    }
    if !cmp.eq_transform(a.global_transform.as_ref(), b.global_transform.as_ref()) {
        return Some("global transform differs".to_string());
    }
    None
}

fn structural_key(n: &GraphNode) -> String {
    use std::fmt::Write;
    let mut k = format!("{}\u{1f}{}\u{1f}{}", n.type_name, n.name, n.scale);
    for (name, v) in &n.properties {
        let _ = write!(k, "\u{1e}{name}:{}", v.kind());
        match v {
            PropertyValue::Int(_) | PropertyValue::Bool(_) | PropertyValue::Text(_) => {
                let _ = write!(k, "={v}");
            }
            _ => {}
        }
    }
    k
}

/// Coarse copy of a float for ordering only: nine significant digits, and
/// anything below 1e-12 in magnitude is zero. Values that compare equal under
/// a tolerance almost always coarsen to the same number.
fn coarse(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        return 0.0;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Every floating point value of a node in a fixed order, coarsened. An
/// absent transform counts as the identity.
fn float_content(n: &GraphNode) -> Vec<f64> {
    let mut out = Vec::new();
    for v in n.properties.values() {
        match v {
            PropertyValue::Float(x) => out.push(f64::from(*x)),
            PropertyValue::Double(x) => out.push(*x),
            PropertyValue::Vec3(x) => out.extend(x),
            PropertyValue::Matrix4(x) => out.extend(x),
            PropertyValue::DoubleList(x) => out.extend(x),
            _ => {}
        }
    }
    for t in [n.local_transform, n.global_transform] {
        out.extend(t.unwrap_or_default().to_row_major());
    }
    out.into_iter().map(coarse).collect()
}

fn hash_of(h: &impl Hash) -> u64 {
    let mut s = DefaultHasher::new();
    h.hash(&mut s);
    s.finish()
}

/// Colour refinement: a node's colour summarises its own seed and, after
/// enough rounds, its position among everything connected to it in either
/// direction. Rounds stop once the number of distinct colours stops growing.
fn refine(g: &ExchangeGraph, seed: impl Fn(&GraphNode) -> u64) -> BTreeMap<NodeId, u64> {
    let incoming = g.incoming_index();
    let mut colour: BTreeMap<NodeId, u64> = g.nodes().map(|n| (n.id, seed(n))).collect();
    let mut classes = colour.values().collect::<BTreeSet<_>>().len();
    for _ in 0..g.node_count() {
        let next: BTreeMap<NodeId, u64> = colour
            .iter()
            .map(|(id, c)| {
                let mut out: Vec<(&str, u64)> = g.out_edges(*id).map(|e| (e.etype.name(), colour[&e.dst])).collect();
                let mut inc: Vec<(&str, u64)> = incoming
                    .get(id)
                    .into_iter()
                    .flatten()
                    .map(|e| (e.etype.name(), colour[&e.src]))
                    .collect();
                out.sort_unstable();
                inc.sort_unstable();
                (*id, hash_of(&(c, out, inc)))
            })
            .collect();
        let n = next.values().collect::<BTreeSet<_>>().len();
        colour = next;
        if n == classes {
            break;
        }
        classes = n;
    }
    colour
}

struct SiblingKey<'a> {
    etype: &'a str,
    structure: &'a str,
    floats: &'a [f64],
    /// Position in the graph's shape, floats excluded.
    shape: u64,
    /// The same with (coarsened) floats; separates siblings that only differ
    /// further away.
    exact: u64,
    id: NodeId,
}

impl SiblingKey<'_> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.etype
            .cmp(o.etype)
            .then_with(|| self.structure.cmp(o.structure))
            .then_with(|| {
                let by_value = self.floats.iter().zip(o.floats).map(|(a, b)| a.total_cmp(b)).find(|c| c.is_ne());
                by_value.unwrap_or_else(|| self.floats.len().cmp(&o.floats.len()))
            })
            .then_with(|| self.shape.cmp(&o.shape))
            .then_with(|| self.exact.cmp(&o.exact))
            .then_with(|| self.id.cmp(&o.id))
    }
}

/// Preorder walk with id-independent sibling ordering. Ids only break ties
/// between siblings that colour refinement cannot tell apart.
fn canonical_walk(g: &ExchangeGraph) -> Vec<NodeId> {
    let keys: BTreeMap<NodeId, String> = g.nodes().map(|n| (n.id, structural_key(n))).collect();
    let floats: BTreeMap<NodeId, Vec<f64>> = g.nodes().map(|n| (n.id, float_content(n))).collect();
    let shape = refine(g, |n| hash_of(&keys[&n.id]));
    let exact = refine(g, |n| {
        let bits: Vec<u64> = floats[&n.id].iter().map(|x| x.to_bits()).collect();
        hash_of(&(&keys[&n.id], bits))
    });
    let Some(root) = g.root() else { return Vec::new() };
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(g.node_count());
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            continue;
        }
        out.push(id);
        let mut kids: Vec<SiblingKey> = g
            .out_edges(id)
            .map(|e| SiblingKey {
                etype: e.etype.name(),
                structure: &keys[&e.dst],
                floats: &floats[&e.dst],
                shape: shape[&e.dst],
                exact: exact[&e.dst],
                id: e.dst,
            })
            .collect();
        kids.sort_by(|a, b| a.cmp(b));
        stack.extend(kids.into_iter().rev().map(|k| k.id).filter(|k| !seen.contains(k)));
    }
    out
}

fn indexed_edges(g: &ExchangeGraph, order: &[NodeId]) -> Vec<(usize, String, usize)> {
    let pos: BTreeMap<NodeId, usize> = order.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut v: Vec<_> = g
        .edges()
        .map(|e| (pos[&e.src], e.etype.name().to_string(), pos[&e.dst]))
        .collect();
    v.sort();
    v
}
