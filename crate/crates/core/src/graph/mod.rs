//! The mediating data model: a single-rooted, multiscale property graph with
//! typed edges.
//!
//! Scales are plain integers, 0 being the coarsest. A decomposition edge always
//! goes exactly one scale finer. Edges are kept ordered by
//! `(src, type, dst)` with successor < branch < decomposition, which is also the
//! canonical child order used by traversals and serialization.

mod compare;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::Transform;

pub use compare::{canonical_diff, canonical_equal, Difference, DEFAULT_TOLERANCE};
pub use validate::{validate_parts, ValidationReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Edge tag. The mediating model only uses the first three; `Foreign` holds a
/// platform-native name (e.g. `refinement`) until an edge map rewrites it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeType {
    Successor,
    Branch,
    Decomposition,
    Foreign(String),
}

impl EdgeType {
    pub fn name(&self) -> &str {
        match self {
            EdgeType::Successor => "successor",
            EdgeType::Branch => "branch",
            EdgeType::Decomposition => "decomposition",
            EdgeType::Foreign(s) => s,
        }
    }

    /// Standard names map to their variant, anything else is kept as `Foreign`.
    pub fn from_name(name: &str) -> EdgeType {
        match name {
            "successor" => EdgeType::Successor,
            "branch" => EdgeType::Branch,
            "decomposition" => EdgeType::Decomposition,
            other => EdgeType::Foreign(other.to_string()),
        }
    }

    pub fn is_standard(&self) -> bool {
        !matches!(self, EdgeType::Foreign(_))
    }

    /// Successor or branch: the edges that carry topological placement.
    pub fn is_topological(&self) -> bool {
        matches!(self, EdgeType::Successor | EdgeType::Branch)
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueKind {
    Int,
    Float,
    Double,
    Bool,
    Text,
    Vec3,
    Matrix4,
    DoubleList,
}

impl ValueKind {
    pub const ALL: [ValueKind; 8] = [
        ValueKind::Int,
        ValueKind::Float,
        ValueKind::Double,
        ValueKind::Bool,
        ValueKind::Text,
        ValueKind::Vec3,
        ValueKind::Matrix4,
        ValueKind::DoubleList,
    ];

    /// Tag used in XEG `type` attributes.
    pub fn tag(self) -> &'static str {
        match self {
            ValueKind::Int => "int",
            ValueKind::Float => "float",
            ValueKind::Double => "double",
            ValueKind::Bool => "bool",
            ValueKind::Text => "string",
            ValueKind::Vec3 => "vec3",
            ValueKind::Matrix4 => "matrix4",
            ValueKind::DoubleList => "doublelist",
        }
    }

    pub fn from_tag(tag: &str) -> Option<ValueKind> {
        ValueKind::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ValueKind::Int | ValueKind::Float | ValueKind::Double)
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A typed property value. Values never coerce between kinds inside a graph.
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyValue {
    Int(i64),
    Float(f32),
    Double(f64),
    Bool(bool),
    Text(String),
    Vec3([f64; 3]),
    Matrix4([f64; 16]),
    DoubleList(Vec<f64>),
}

impl PropertyValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            PropertyValue::Int(_) => ValueKind::Int,
            PropertyValue::Float(_) => ValueKind::Float,
            PropertyValue::Double(_) => ValueKind::Double,
            PropertyValue::Bool(_) => ValueKind::Bool,
            PropertyValue::Text(_) => ValueKind::Text,
            PropertyValue::Vec3(_) => ValueKind::Vec3,
            PropertyValue::Matrix4(_) => ValueKind::Matrix4,
            PropertyValue::DoubleList(_) => ValueKind::DoubleList,
        }
    }

    /// Numeric scalars widened to `f64`; `None` for everything else.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            PropertyValue::Int(v) => Some(v as f64),
            PropertyValue::Float(v) => Some(v as f64),
            PropertyValue::Double(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            PropertyValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            PropertyValue::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_vec3(&self) -> Option<[f64; 3]> {
        match *self {
            PropertyValue::Vec3(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[f64]> {
        match self {
            PropertyValue::DoubleList(v) => Some(v),
            _ => None,
        }
    }
}

impl From<f64> for PropertyValue {
    fn from(v: f64) -> Self {
        PropertyValue::Double(v)
    }
}

impl From<i64> for PropertyValue {
    fn from(v: i64) -> Self {
        PropertyValue::Int(v)
    }
}

impl From<bool> for PropertyValue {
    fn from(v: bool) -> Self {
        PropertyValue::Bool(v)
    }
}

impl From<&str> for PropertyValue {
    fn from(v: &str) -> Self {
        PropertyValue::Text(v.to_string())
    }
}

impl From<String> for PropertyValue {
    fn from(v: String) -> Self {
        PropertyValue::Text(v)
    }
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::Int(v) => write!(f, "{v}"),
            PropertyValue::Float(v) => write!(f, "{v:?}f"),
            PropertyValue::Double(v) => write!(f, "{v:?}"),
            PropertyValue::Bool(v) => write!(f, "{v}"),
            PropertyValue::Text(v) => write!(f, "{v:?}"),
            PropertyValue::Vec3(v) => write!(f, "{v:?}"),
            PropertyValue::Matrix4(v) => write!(f, "{v:?}"),
            PropertyValue::DoubleList(v) => write!(f, "{v:?}"),
        }
    }
}

/// Which of a node's transforms is authoritative for the whole graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransformMode {
    #[default]
    Local,
    Global,
}

impl TransformMode {
    pub fn name(self) -> &'static str {
        match self {
            TransformMode::Local => "local",
            TransformMode::Global => "global",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub id: NodeId,
    pub name: String,
    pub type_name: String,
    pub scale: u32,
    pub properties: BTreeMap<String, PropertyValue>,
    pub local_transform: Option<Transform>,
    pub global_transform: Option<Transform>,
}

impl GraphNode {
    pub fn new(id: u64, name: impl Into<String>, type_name: impl Into<String>, scale: u32) -> Self {
        GraphNode {
            id: NodeId(id),
            name: name.into(),
            type_name: type_name.into(),
            scale,
            properties: BTreeMap::new(),
            local_transform: None,
            global_transform: None,
        }
    }

    pub fn with_property(mut self, name: impl Into<String>, value: impl Into<PropertyValue>) -> Self {
        self.properties.insert(name.into(), value.into());
        self
    }

    pub fn with_local(mut self, t: Transform) -> Self {
        self.local_transform = Some(t);
        self
    }

    pub fn property(&self, name: &str) -> Option<&PropertyValue> {
        self.properties.get(name)
    }

    pub fn set_property(&mut self, name: impl Into<String>, value: impl Into<PropertyValue>) {
        self.properties.insert(name.into(), value.into());
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraphEdge {
    pub src: NodeId,
    pub etype: EdgeType,
    pub dst: NodeId,
}

impl GraphEdge {
    pub fn new(src: u64, dst: u64, etype: EdgeType) -> Self {
        GraphEdge { src: NodeId(src), etype, dst: NodeId(dst) }
    }
}

impl fmt::Display for GraphEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -{}-> {}", self.src, self.etype, self.dst)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("node id {0} is already present")]
    DuplicateId(NodeId),
    #[error("node id must be positive")]
    ZeroId,
    #[error("edge endpoint {0} is not in the graph")]
    UnknownEndpoint(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("decomposition edge {src} -> {dst} goes from scale {src_scale} to {dst_scale}, expected {expected}", expected = .src_scale + 1)]
    ScaleViolation { src: NodeId, dst: NodeId, src_scale: u32, dst_scale: u32 },
    #[error("edge {0} -> {0} is a self loop")]
    SelfLoop(NodeId),
    #[error("edge {0} is already present")]
    DuplicateEdge(GraphEdge),
    #[error("cannot remove the root node {0}")]
    RootRemoval(NodeId),
    #[error("invalid graph: {0}")]
    InvalidGraph(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExchangeGraph {
    root: Option<NodeId>,
    nodes: BTreeMap<NodeId, GraphNode>,
    edges: BTreeSet<GraphEdge>,
    transform_mode: TransformMode,
}

impl ExchangeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Graph holding only `root`.
    pub fn with_root(root: GraphNode) -> Result<Self, GraphError> {
        let mut g = Self::new();
        g.add_node(root)?;
        Ok(g)
    }

    pub fn root(&self) -> Option<NodeId> {
        self.root
    }

    pub fn transform_mode(&self) -> TransformMode {
        self.transform_mode
    }

    pub fn set_transform_mode(&mut self, mode: TransformMode) {
        self.transform_mode = mode;
    }

    /// Inserts a node. The first node of an empty graph becomes its root.
    pub fn add_node(&mut self, node: GraphNode) -> Result<(), GraphError> {
        if node.id.0 == 0 {
            return Err(GraphError::ZeroId);
        }
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::DuplicateId(node.id));
        }
        if self.root.is_none() {
            self.root = Some(node.id);
        }
        self.nodes.insert(node.id, node);
        Ok(())
    }

    pub fn set_root(&mut self, id: NodeId) -> Result<(), GraphError> {
        if !self.nodes.contains_key(&id) {
            return Err(GraphError::UnknownNode(id));
        }
        self.root = Some(id);
        Ok(())
    }

    /// Inserts an edge after checking the local invariants (endpoints, self
    /// loop, decomposition scale step). Global shape (reachability, successor
    /// fan-out) is left to [`ExchangeGraph::validate`].
    pub fn add_edge(&mut self, edge: GraphEdge) -> Result<(), GraphError> {
        if edge.src == edge.dst {
            return Err(GraphError::SelfLoop(edge.src));
        }
        let src = self.nodes.get(&edge.src).ok_or(GraphError::UnknownEndpoint(edge.src))?;
        let dst = self.nodes.get(&edge.dst).ok_or(GraphError::UnknownEndpoint(edge.dst))?;
        if edge.etype == EdgeType::Decomposition && dst.scale != src.scale + 1 {
            return Err(GraphError::ScaleViolation {
                src: edge.src,
                dst: edge.dst,
                src_scale: src.scale,
                dst_scale: dst.scale,
            });
        }
        if self.edges.contains(&edge) {
            return Err(GraphError::DuplicateEdge(edge));
        }
        self.edges.insert(edge);
        Ok(())
    }

    pub fn remove_edge(&mut self, edge: &GraphEdge) -> bool {
        self.edges.remove(edge)
    }

    /// Removes a node together with every incident edge.
    pub fn remove_node(&mut self, id: NodeId) -> Result<GraphNode, GraphError> {
        if self.root == Some(id) {
            return Err(GraphError::RootRemoval(id));
        }
        let node = self.nodes.remove(&id).ok_or(GraphError::UnknownNode(id))?;
        self.edges.retain(|e| e.src != id && e.dst != id);
        Ok(node)
    }

    /// Replaces every edge at once, e.g. after retagging.
    pub(crate) fn replace_edges(&mut self, edges: BTreeSet<GraphEdge>) {
        self.edges = edges;
    }

    pub fn node(&self, id: NodeId) -> Option<&GraphNode> {
        self.nodes.get(&id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut GraphNode> {
        self.nodes.get_mut(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values()
    }

    pub fn nodes_mut(&mut self) -> impl Iterator<Item = &mut GraphNode> {
        self.nodes.values_mut()
    }

    /// Edges in `(src, type, dst)` order.
    pub fn edges(&self) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `(nodes, edges)`.
    pub fn census(&self) -> (usize, usize) {
        (self.nodes.len(), self.edges.len())
    }

    /// Smallest id above every id in use.
    pub fn next_id(&self) -> u64 {
        self.nodes.keys().next_back().map_or(1, |id| id.0 + 1)
    }

    /// Outgoing edges of `id` in canonical order.
    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &GraphEdge> {
        let lo = GraphEdge { src: id, etype: EdgeType::Successor, dst: NodeId(0) };
        self.edges.range(lo..).take_while(move |e| e.src == id)
    }

    /// Children in canonical order: successor, branch, decomposition (then
    /// foreign tags by name), ascending id within a class.
    pub fn children(&self, id: NodeId, filter: Option<&EdgeType>) -> Result<Vec<NodeId>, GraphError> {
        if !self.nodes.contains_key(&id) {
            return Err(GraphError::UnknownNode(id));
        }
        Ok(self
            .out_edges(id)
            .filter(|e| filter.is_none_or(|f| &e.etype == f))
            .map(|e| e.dst)
            .collect())
    }

    /// Incoming edges of every node, each list in canonical edge order.
    pub fn incoming_index(&self) -> BTreeMap<NodeId, Vec<&GraphEdge>> {
        let mut idx: BTreeMap<NodeId, Vec<&GraphEdge>> = BTreeMap::new();
        for e in &self.edges {
            idx.entry(e.dst).or_default().push(e);
        }
        idx
    }

    /// Source of the first incoming successor/branch edge of each node that
    /// has one, otherwise of its first incoming decomposition edge. This is the
    /// frame a node's local transform is expressed in.
    pub fn frame_parents(&self) -> BTreeMap<NodeId, NodeId> {
        let mut out = BTreeMap::new();
        for (dst, inc) in self.incoming_index() {
            let pick = inc
                .iter()
                .find(|e| e.etype.is_topological())
                .or_else(|| inc.iter().find(|e| e.etype == EdgeType::Decomposition));
            if let Some(e) = pick {
                out.insert(dst, e.src);
            }
        }
        out
    }

    pub fn validate(&self) -> ValidationReport {
        let nodes: Vec<GraphNode> = self.nodes.values().cloned().collect();
        let edges: Vec<GraphEdge> = self.edges.iter().cloned().collect();
        validate_parts(self.root, &nodes, &edges)
    }

    pub fn ensure_valid(&self) -> Result<(), GraphError> {
        let report = self.validate();
        if report.is_empty() {
            Ok(())
        } else {
            Err(GraphError::InvalidGraph(report))
        }
    }

    /// Depth-first preorder from the root following canonical child order,
    /// each node visited once.
    pub fn preorder(&self) -> Vec<NodeId> {
        let Some(root) = self.root else { return Vec::new() };
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            out.push(id);
            let kids: Vec<NodeId> = self.out_edges(id).map(|e| e.dst).collect();
            stack.extend(kids.into_iter().rev().filter(|k| !seen.contains(k)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_node_becomes_root() {
        let g = ExchangeGraph::with_root(GraphNode::new(1, "r", "Node", 0)).unwrap();
        assert_eq!(g.root(), Some(NodeId(1)));
        assert_eq!(g.census(), (1, 0));
    }

    #[test]
    fn decomposition_needs_next_scale() {
        let mut g = ExchangeGraph::with_root(GraphNode::new(1, "r", "Node", 0)).unwrap();
        g.add_node(GraphNode::new(2, "a", "Node", 1)).unwrap();
        g.add_node(GraphNode::new(3, "b", "Node", 2)).unwrap();
        g.add_edge(GraphEdge::new(1, 2, EdgeType::Decomposition)).unwrap();
        let err = g.add_edge(GraphEdge::new(1, 3, EdgeType::Decomposition)).unwrap_err();
        assert!(matches!(err, GraphError::ScaleViolation { src_scale: 0, dst_scale: 2, .. }));
    }

    #[test]
    fn builder_errors() {
        let mut g = ExchangeGraph::with_root(GraphNode::new(1, "r", "Node", 0)).unwrap();
        assert_eq!(g.add_node(GraphNode::new(1, "x", "Node", 0)), Err(GraphError::DuplicateId(NodeId(1))));
        assert_eq!(g.add_node(GraphNode::new(0, "x", "Node", 0)), Err(GraphError::ZeroId));
        assert_eq!(
            g.add_edge(GraphEdge::new(1, 7, EdgeType::Branch)),
            Err(GraphError::UnknownEndpoint(NodeId(7)))
        );
        assert_eq!(g.add_edge(GraphEdge::new(1, 1, EdgeType::Branch)), Err(GraphError::SelfLoop(NodeId(1))));
        g.add_node(GraphNode::new(2, "x", "Node", 0)).unwrap();
        g.add_edge(GraphEdge::new(1, 2, EdgeType::Branch)).unwrap();
        assert!(matches!(
            g.add_edge(GraphEdge::new(1, 2, EdgeType::Branch)),
            Err(GraphError::DuplicateEdge(_))
        ));
    }

    #[test]
    fn children_order() {
        let mut g = ExchangeGraph::with_root(GraphNode::new(1, "r", "Node", 0)).unwrap();
        for id in [3, 5, 7, 8] {
            g.add_node(GraphNode::new(id, "n", "Node", if id >= 7 { 1 } else { 0 })).unwrap();
        }
        g.add_edge(GraphEdge::new(1, 8, EdgeType::Decomposition)).unwrap();
        g.add_edge(GraphEdge::new(1, 5, EdgeType::Branch)).unwrap();
        g.add_edge(GraphEdge::new(1, 7, EdgeType::Decomposition)).unwrap();
        g.add_edge(GraphEdge::new(1, 3, EdgeType::Successor)).unwrap();
        let ids = |v: Vec<NodeId>| v.into_iter().map(|n| n.0).collect::<Vec<_>>();
        assert_eq!(ids(g.children(NodeId(1), None).unwrap()), vec![3, 5, 7, 8]);
        assert_eq!(ids(g.children(NodeId(1), Some(&EdgeType::Decomposition)).unwrap()), vec![7, 8]);
        assert!(g.children(NodeId(3), None).unwrap().is_empty());
        assert_eq!(g.children(NodeId(42), None), Err(GraphError::UnknownNode(NodeId(42))));
    }

    #[test]
    fn remove_node_drops_incident_edges() {
        let mut g = ExchangeGraph::with_root(GraphNode::new(1, "r", "Node", 0)).unwrap();
        g.add_node(GraphNode::new(2, "a", "Node", 0)).unwrap();
        g.add_node(GraphNode::new(3, "b", "Node", 0)).unwrap();
        g.add_edge(GraphEdge::new(1, 2, EdgeType::Successor)).unwrap();
        g.add_edge(GraphEdge::new(2, 3, EdgeType::Successor)).unwrap();
        g.remove_node(NodeId(2)).unwrap();
        assert_eq!(g.census(), (2, 0));
        assert_eq!(g.remove_node(NodeId(1)), Err(GraphError::RootRemoval(NodeId(1))));
    }

    #[test]
    fn edge_type_names() {
        for t in [EdgeType::Successor, EdgeType::Branch, EdgeType::Decomposition] {
            assert_eq!(EdgeType::from_name(t.name()), t);
        }
        assert_eq!(EdgeType::from_name("refinement"), EdgeType::Foreign("refinement".into()));
    }
}
