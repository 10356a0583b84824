//! Local ↔ global placement.
//!
//! A node's frame parent is the source of its first incoming successor or
//! branch edge, or, failing that, of its decomposition edge; the root has none
//! and its frame is the identity. `global(n) = global(parent) · local(n)`.

use std::collections::BTreeMap;

use super::GeometryError;
use crate::graph::{ExchangeGraph, NodeId, TransformMode};
use crate::Transform;

fn expect_mode(g: &ExchangeGraph, expected: TransformMode) -> Result<(), GeometryError> {
    if g.transform_mode() != expected {
        return Err(GeometryError::WrongMode { expected: expected.name(), found: g.transform_mode().name() });
    }
    Ok(())
}

/// Frame-parent tree as child lists, plus the root.
fn frame_tree(g: &ExchangeGraph) -> Result<(NodeId, BTreeMap<NodeId, Vec<NodeId>>), GeometryError> {
    g.ensure_valid()?;
    let root = g.root().expect("valid graph has a root");
    let mut kids: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for (child, parent) in g.frame_parents() {
        kids.entry(parent).or_default().push(child);
    }
    Ok((root, kids))
}

/// Walks the frame tree depth-first, calling `visit(node, parent)` parents first.
fn walk(
    g: &ExchangeGraph,
    root: NodeId,
    kids: &BTreeMap<NodeId, Vec<NodeId>>,
    mut visit: impl FnMut(NodeId, Option<NodeId>) -> Result<(), GeometryError>,
) -> Result<(), GeometryError> {
    let mut stack = vec![(root, None)];
    let mut visited = 0usize;
    while let Some((id, parent)) = stack.pop() {
        visit(id, parent)?;
        visited += 1;
        for k in kids.get(&id).into_iter().flatten().rev() {
            stack.push((*k, Some(id)));
        }
    }
    if visited != g.node_count() {
        return Err(GeometryError::FrameCycle);
    }
    Ok(())
}

/// Global transform of every node of a local-mode graph, without modifying it.
pub fn global_frames(g: &ExchangeGraph) -> Result<BTreeMap<NodeId, Transform>, GeometryError> {
    expect_mode(g, TransformMode::Local)?;
    let (root, kids) = frame_tree(g)?;
    let mut out: BTreeMap<NodeId, Transform> = BTreeMap::new();
    walk(g, root, &kids, |id, parent| {
        let local = g.node(id).and_then(|n| n.local_transform).unwrap_or_default();
        let global = match parent {
            Some(p) => out[&p].then_local(&local),
            None => local,
        };
        out.insert(id, global);
        Ok(())
    })?;
    Ok(out)
}

/// Local mode → global mode in one depth-first pass over the frame tree.
pub fn globalize(g: &ExchangeGraph) -> Result<ExchangeGraph, GeometryError> {
    let frames = global_frames(g)?;
    let mut out = g.clone();
    for n in out.nodes_mut() {
        n.global_transform = Some(frames[&n.id]);
        n.local_transform = None;
    }
    out.set_transform_mode(TransformMode::Global);
    Ok(out)
}

/// Global mode → local mode: `local(n) = global(parent)⁻¹ · global(n)`.
pub fn localize(g: &ExchangeGraph) -> Result<ExchangeGraph, GeometryError> {
    expect_mode(g, TransformMode::Global)?;
    let (root, kids) = frame_tree(g)?;
    let global = |id: NodeId| g.node(id).and_then(|n| n.global_transform).unwrap_or_default();
    let mut locals = BTreeMap::new();
    let mut inverses: BTreeMap<NodeId, Transform> = BTreeMap::new();
    walk(g, root, &kids, |id, parent| {
        let local = match parent {
            Some(p) => {
                let inv = match inverses.get(&p) {
                    Some(inv) => *inv,
                    None => {
                        let inv = global(p).inverse().map_err(|_| GeometryError::SingularParentTransform(p))?;
                        inverses.insert(p, inv);
                        inv
                    }
                };
                inv.then_local(&global(id))
            }
            None => global(id),
        };
        locals.insert(id, local);
        Ok(())
    })?;
    let mut out = g.clone();
    for n in out.nodes_mut() {
        n.local_transform = Some(locals[&n.id]);
        n.global_transform = None;
    }
    out.set_transform_mode(TransformMode::Local);
    Ok(out)
}
