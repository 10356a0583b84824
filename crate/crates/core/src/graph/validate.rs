use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use super::{EdgeType, GraphEdge, GraphNode, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MissingRoot,
    UnknownRoot(NodeId),
    ZeroId,
    DuplicateId(NodeId),
    DanglingEdge { edge: GraphEdge, missing: NodeId },
    SelfLoop(NodeId),
    DuplicateEdge(GraphEdge),
    ScaleViolation { edge: GraphEdge, src_scale: u32, dst_scale: u32 },
    RootHasIncoming(GraphEdge),
    /// A non-root node with no incoming edge that itself has children.
    MultipleRoots(NodeId),
    Unreachable(NodeId),
    SuccessorFanOut { node: NodeId, count: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingRoot => write!(f, "missing root: graph has no root node"),
            Violation::UnknownRoot(id) => write!(f, "unknown root: root id {id} is not a node"),
            Violation::ZeroId => write!(f, "zero id: node ids must be positive"),
            Violation::DuplicateId(id) => write!(f, "duplicate id: {id} is used by more than one node"),
            Violation::DanglingEdge { edge, missing } => {
                write!(f, "dangling edge: {edge} references missing node {missing}")
            }
            Violation::SelfLoop(id) => write!(f, "self loop: node {id}"),
            Violation::DuplicateEdge(edge) => write!(f, "duplicate edge: {edge}"),
            Violation::ScaleViolation { edge, src_scale, dst_scale } => write!(
                f,
                "scale violation: {edge} goes from scale {src_scale} to {dst_scale}, expected {}",
                src_scale + 1
            ),
            Violation::RootHasIncoming(edge) => write!(f, "root has incoming edge: {edge}"),
            Violation::MultipleRoots(id) => write!(f, "multiple roots: node {id} has no parent but has children"),
            Violation::Unreachable(id) => write!(f, "unreachable: node {id} cannot be reached from the root"),
            Violation::SuccessorFanOut { node, count } => {
                write!(f, "successor fan-out: node {node} has {count} successor children")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every graph invariant over loose parts, so that inputs that could
/// never be assembled into an [`super::ExchangeGraph`] (duplicate ids, dangling
/// edges) are still reported in full.
pub fn validate_parts(root: Option<NodeId>, nodes: &[GraphNode], edges: &[GraphEdge]) -> ValidationReport {
    let mut v = Vec::new();

    let mut scale: BTreeMap<NodeId, u32> = BTreeMap::new();
    let mut dup_reported = BTreeSet::new();
    for n in nodes {
        if n.id.0 == 0 {
            v.push(Violation::ZeroId);
        }
        if scale.insert(n.id, n.scale).is_some() && dup_reported.insert(n.id) {
            v.push(Violation::DuplicateId(n.id));
        }
    }

    match root {
        None => v.push(Violation::MissingRoot),
        Some(r) if !scale.contains_key(&r) => v.push(Violation::UnknownRoot(r)),
        _ => {}
    }

    let mut seen_edges = BTreeSet::new();
    let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut has_incoming = BTreeSet::new();
    let mut successor_count: BTreeMap<NodeId, usize> = BTreeMap::new();
    for e in edges {
        if !seen_edges.insert(e.clone()) {
            v.push(Violation::DuplicateEdge(e.clone()));
            continue;
        }
        if e.src == e.dst {
            v.push(Violation::SelfLoop(e.src));
            continue;
        }
        let (s, d) = match (scale.get(&e.src), scale.get(&e.dst)) {
            (Some(s), Some(d)) => (*s, *d),
            (None, _) => {
                v.push(Violation::DanglingEdge { edge: e.clone(), missing: e.src });
                continue;
            }
            (_, None) => {
                v.push(Violation::DanglingEdge { edge: e.clone(), missing: e.dst });
                continue;
            }
        };
        if e.etype == EdgeType::Decomposition && d != s + 1 {
            v.push(Violation::ScaleViolation { edge: e.clone(), src_scale: s, dst_scale: d });
        }
        if Some(e.dst) == root {
            v.push(Violation::RootHasIncoming(e.clone()));
        }
        if e.etype == EdgeType::Successor {
            *successor_count.entry(e.src).or_default() += 1;
        }
        has_incoming.insert(e.dst);
        out.entry(e.src).or_default().push(e.dst);
    }

    for (node, count) in successor_count {
        if count > 1 {
            v.push(Violation::SuccessorFanOut { node, count });
        }
    }

    for id in scale.keys() {
        if Some(*id) != root && !has_incoming.contains(id) && out.contains_key(id) {
            v.push(Violation::MultipleRoots(*id));
        }
    }

    let mut reached = BTreeSet::new();
    if let Some(r) = root.filter(|r| scale.contains_key(r)) {
        let mut queue = VecDeque::from([r]);
        reached.insert(r);
        while let Some(id) = queue.pop_front() {
            for k in out.get(&id).into_iter().flatten() {
                if reached.insert(*k) {
                    queue.push_back(*k);
                }
            }
        }
    }
    for id in scale.keys() {
        if !reached.contains(id) {
            v.push(Violation::Unreachable(*id));
        }
    }

    ValidationReport { violations: v }
}
