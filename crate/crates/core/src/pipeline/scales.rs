//! Scale-system transformation: decomposing composite nodes into elementary
//! parts on an additional finer scale, and folding the parts back.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::TransformError;
use crate::geometry::{global_frames, GeometryError};
use crate::graph::{EdgeType, ExchangeGraph, GraphEdge, GraphNode, NodeId, PropertyValue, TransformMode, ValueKind};
use crate::math::{compose_transforms, TransformOp};
use crate::xml::{parse_document, Element};
use crate::xeg::decode_value;
use crate::{Transform, Vec3d};

/// A number in a part template: a literal, or `@field` naming a numeric
/// property of the composite.
#[derive(Debug, Clone, PartialEq)]
pub enum TemplateArg {
    Literal(f64),
    Field(String),
}

impl TemplateArg {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s.strip_prefix('@') {
            Some(f) if !f.is_empty() => Ok(TemplateArg::Field(f.to_string())),
            Some(_) => Err("empty field reference".into()),
            None => s.trim().parse().map(TemplateArg::Literal).map_err(|_| format!("bad number {s:?}")),
        }
    }

    fn resolve(&self, part: &str, composite: &GraphNode) -> Result<f64, TransformError> {
        match self {
            TemplateArg::Literal(x) => Ok(*x),
            TemplateArg::Field(f) => composite.property(f).and_then(PropertyValue::as_f64).ok_or_else(|| {
                TransformError::TemplateArity {
                    part: part.to_string(),
                    detail: format!("composite {} has no numeric field {f:?}", composite.id),
                }
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TemplateOp {
    Translate([TemplateArg; 3]),
    Rotate { axis: [TemplateArg; 3], angle_deg: TemplateArg },
    Scale([TemplateArg; 3]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartTemplate {
    pub name: String,
    pub target_type: String,
    /// Applied first to last, like a transform chain.
    pub transform: Vec<TemplateOp>,
    /// `(composite field, part field)` pairs copied onto the part.
    pub forward: Vec<(String, String)>,
    pub constants: Vec<(String, PropertyValue)>,
}

impl PartTemplate {
    pub fn new(name: impl Into<String>, target_type: impl Into<String>) -> Self {
        PartTemplate {
            name: name.into(),
            target_type: target_type.into(),
            transform: Vec::new(),
            forward: Vec::new(),
            constants: Vec::new(),
        }
    }

    /// The part's transform relative to its composite.
    pub fn instantiate(&self, composite: &GraphNode) -> Result<Transform, TransformError> {
        let v = |args: &[TemplateArg; 3]| -> Result<Vec3d, TransformError> {
            Ok(Vec3d::new(
                args[0].resolve(&self.name, composite)?,
                args[1].resolve(&self.name, composite)?,
                args[2].resolve(&self.name, composite)?,
            ))
        };
        let mut ops = Vec::with_capacity(self.transform.len());
        for op in &self.transform {
            ops.push(match op {
                TemplateOp::Translate(a) => TransformOp::Translation(v(a)?),
                TemplateOp::Scale(a) => TransformOp::Scaling(v(a)?),
                TemplateOp::Rotate { axis, angle_deg } => TransformOp::Rotation {
                    axis: v(axis)?,
                    angle_deg: angle_deg.resolve(&self.name, composite)?,
                },
            });
        }
        compose_transforms(&ops).map_err(|e| TransformError::TemplateArity {
            part: self.name.clone(),
            detail: format!("composite {}: {e}", composite.id),
        })
    }

    /// Part-side names this template writes.
    fn produced_fields(&self) -> impl Iterator<Item = &str> {
        self.forward.iter().map(|(_, to)| to.as_str()).chain(self.constants.iter().map(|(k, _)| k.as_str()))
    }
}

/// How one composite type breaks down into parts on the next finer scale.
///
/// A successor or branch edge between two composites is mirrored from the
/// `attach_from` part of its source to the `attach_to` part of its target.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionScheme {
    pub composite_type: String,
    pub parts: Vec<PartTemplate>,
    pub intra_edges: Vec<(usize, usize, EdgeType)>,
    pub attach_from: usize,
    pub attach_to: usize,
}

impl DecompositionScheme {
    pub fn new(
        composite_type: impl Into<String>,
        parts: Vec<PartTemplate>,
        intra_edges: Vec<(usize, usize, EdgeType)>,
        attach_from: usize,
        attach_to: usize,
    ) -> Result<Self, TransformError> {
        let bad = |m: String| Err(TransformError::InvalidScheme(m));
        let n = parts.len();
        if n == 0 {
            return bad("scheme has no parts".into());
        }
        let mut names = BTreeSet::new();
        for p in &parts {
            if !names.insert(p.name.as_str()) {
                return bad(format!("part name {:?} used twice", p.name));
            }
        }
        if attach_from >= n || attach_to >= n {
            return bad("attach part index out of range".into());
        }
        let mut parent = vec![None; n];
        let mut successors = vec![0usize; n];
        for (i, j, t) in &intra_edges {
            if *i >= n || *j >= n {
                return bad(format!("intra edge {i} -> {j} references a missing part"));
            }
            if i == j {
                return bad(format!("intra edge {i} -> {j} is a self loop"));
            }
            if !t.is_topological() {
                return bad(format!("intra edge {i} -> {j} must be successor or branch, not {t}"));
            }
            if parent[*j].replace(*i).is_some() {
                return bad(format!("part {j} has two incoming intra edges"));
            }
            if *t == EdgeType::Successor {
                successors[*i] += 1;
            }
        }
        if parent[attach_to].is_some() {
            return bad("the attach_to part must not have an incoming intra edge".into());
        }
        if successors[attach_from] > 0 || successors.iter().any(|c| *c > 1) {
            return bad("too many successor edges out of one part".into());
        }
        for start in 0..n {
            let mut at = start;
            for _ in 0..n {
                match parent[at] {
                    Some(p) => at = p,
                    None => break,
                }
            }
            if parent[at].is_some() {
                return bad("intra edges form a cycle".into());
            }
        }
        Ok(DecompositionScheme { composite_type: composite_type.into(), parts, intra_edges, attach_from, attach_to })
    }

    fn part_index(&self, name: &str) -> Option<usize> {
        self.parts.iter().position(|p| p.name == name)
    }

    /// ```text
    /// <scheme composite="Metamer" attach_from="internode" attach_to="internode">
    ///   <part name="internode" type="Cylinder">
    ///     <forward from="internode_radius" to="radius"/>
    ///     <constant name="rows" type="int" value="4"/>
    ///     <scale x="1" y="1" z="@internode_length"/>
    ///     <rotate x="1" y="0" z="0" angle="30"/>
    ///     <translate x="0" y="0" z="1"/>
    ///   </part>
    ///   <edge from="internode" to="petiole" type="branch"/>
    /// </scheme>
    /// ```
    pub fn from_xml(text: &str) -> Result<Self, TransformError> {
        let root = parse_document(text).map_err(|e| TransformError::InvalidScheme(e.to_string()))?;
        Self::from_element(&root)
    }

    pub fn from_element(root: &Element) -> Result<Self, TransformError> {
        let bad = TransformError::InvalidScheme;
        if root.name != "scheme" {
            return Err(bad(format!("{}: expected <scheme>", root.at())));
        }
        let composite = root.require("composite").map_err(bad)?;
        let mut parts = Vec::new();
        for el in root.children_named("part") {
            parts.push(parse_part(el)?);
        }
        let mut scheme = DecompositionScheme {
            composite_type: composite.to_string(),
            parts,
            intra_edges: Vec::new(),
            attach_from: 0,
            attach_to: 0,
        };
        let index = |el: &Element, attr: &str| -> Result<usize, TransformError> {
            let name = el.require(attr).map_err(bad)?;
            scheme.part_index(name).ok_or_else(|| bad(format!("{}: no part named {name:?}", el.at())))
        };
        let mut intra = Vec::new();
        for el in &root.children {
            match el.name.as_str() {
                "part" => {}
                "edge" => {
                    let t = EdgeType::from_name(el.require("type").map_err(bad)?);
                    intra.push((index(el, "from")?, index(el, "to")?, t));
                }
                other => return Err(bad(format!("{}: unexpected element <{other}>", el.at()))),
            }
        }
        let attach_from = index(root, "attach_from")?;
        let attach_to = index(root, "attach_to")?;
        scheme.intra_edges = intra;
        DecompositionScheme::new(scheme.composite_type, scheme.parts, scheme.intra_edges, attach_from, attach_to)
    }
}

fn parse_part(el: &Element) -> Result<PartTemplate, TransformError> {
    let bad = TransformError::InvalidScheme;
    let mut part = PartTemplate::new(el.require("name").map_err(bad)?, el.require("type").map_err(bad)?);
    let arg = |c: &Element, a: &str| -> Result<TemplateArg, TransformError> {
        TemplateArg::parse(c.require(a).map_err(bad)?).map_err(|m| bad(format!("{}: {m}", c.at())))
    };
    let xyz = |c: &Element| -> Result<[TemplateArg; 3], TransformError> { Ok([arg(c, "x")?, arg(c, "y")?, arg(c, "z")?]) };
    for c in &el.children {
        match c.name.as_str() {
            "forward" => part
                .forward
                .push((c.require("from").map_err(bad)?.to_string(), c.require("to").map_err(bad)?.to_string())),
            "constant" => {
                let tag = c.require("type").map_err(bad)?;
                let kind = ValueKind::from_tag(tag).ok_or_else(|| bad(format!("{}: unknown type {tag:?}", c.at())))?;
                let value = decode_value(kind, c.require("value").map_err(bad)?)
                    .map_err(|m| bad(format!("{}: {m}", c.at())))?;
                part.constants.push((c.require("name").map_err(bad)?.to_string(), value));
            }
            "translate" => part.transform.push(TemplateOp::Translate(xyz(c)?)),
            "scale" => part.transform.push(TemplateOp::Scale(xyz(c)?)),
            "rotate" => part.transform.push(TemplateOp::Rotate { axis: xyz(c)?, angle_deg: arg(c, "angle")? }),
            other => return Err(bad(format!("{}: unexpected element <{other}>", c.at()))),
        }
    }
    Ok(part)
}

fn composites<'a>(graph: &'a ExchangeGraph, scheme: &'a DecompositionScheme) -> impl Iterator<Item = NodeId> + 'a {
    graph.nodes().filter(move |n| n.type_name == scheme.composite_type).map(|n| n.id)
}

/// Adds a finer scale holding the parts of every composite. Coarse nodes and
/// edges are kept. Part ids are allocated above the graph's largest id, in
/// composite id order and then part order.
pub fn decompose_scale(graph: &ExchangeGraph, scheme: &DecompositionScheme) -> Result<ExchangeGraph, TransformError> {
    graph.ensure_valid()?;
    let targets: Vec<NodeId> = composites(graph, scheme).collect();
    if targets.is_empty() {
        return Ok(graph.clone());
    }
    for c in &targets {
        if graph.out_edges(*c).any(|e| e.etype == EdgeType::Decomposition) {
            return Err(TransformError::AlreadyDecomposed(*c));
        }
    }
    let frames: BTreeMap<NodeId, Transform> = match graph.transform_mode() {
        TransformMode::Local => global_frames(graph)?,
        TransformMode::Global => graph.nodes().map(|n| (n.id, n.global_transform.unwrap_or_default())).collect(),
    };

    let mut out = graph.clone();
    let mut next = graph.next_id();
    let mut parts: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    // Part id -> (composite, transform relative to the composite).
    let mut relative: BTreeMap<NodeId, (NodeId, Transform)> = BTreeMap::new();
    for c in &targets {
        let comp = graph.node(*c).expect("composite id from graph");
        let mut ids = Vec::with_capacity(scheme.parts.len());
        for tpl in &scheme.parts {
            let t = tpl.instantiate(comp)?;
            let mut n = GraphNode::new(next, tpl.name.clone(), tpl.target_type.clone(), comp.scale + 1);
            for (from, to) in &tpl.forward {
                if let Some(v) = comp.property(from) {
                    n.set_property(to.clone(), v.clone());
                }
            }
            for (k, v) in &tpl.constants {
                n.set_property(k.clone(), v.clone());
            }
            out.add_node(n)?;
            out.add_edge(GraphEdge { src: *c, etype: EdgeType::Decomposition, dst: NodeId(next) })?;
            relative.insert(NodeId(next), (*c, t));
            ids.push(NodeId(next));
            next += 1;
        }
        for (i, j, t) in &scheme.intra_edges {
            out.add_edge(GraphEdge { src: ids[*i], etype: t.clone(), dst: ids[*j] })?;
        }
        parts.insert(*c, ids);
    }
    for e in graph.edges().filter(|e| e.etype.is_topological()) {
        if let (Some(a), Some(b)) = (parts.get(&e.src), parts.get(&e.dst)) {
            out.add_edge(GraphEdge { src: a[scheme.attach_from], etype: e.etype.clone(), dst: b[scheme.attach_to] })?;
        }
    }

    let desired: BTreeMap<NodeId, Transform> =
        relative.iter().map(|(id, (c, t))| (*id, frames[c].then_local(t))).collect();
    match graph.transform_mode() {
        TransformMode::Global => {
            for (id, g) in &desired {
                out.node_mut(*id).expect("part added").global_transform = Some(*g);
            }
        }
        TransformMode::Local => {
            let fp = out.frame_parents();
            for (id, (c, t)) in &relative {
                let parent = fp[id];
                let local = if parent == *c {
                    *t
                } else {
                    let pg = desired.get(&parent).or_else(|| frames.get(&parent)).expect("parent has a frame");
                    let inv = pg.inverse().map_err(|_| GeometryError::SingularParentTransform(parent))?;
                    inv.then_local(&desired[id])
                };
                out.node_mut(*id).expect("part added").local_transform = Some(local);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateOp {
    Sum,
    Mean,
    Min,
    Max,
    First,
    LogicalAnd,
    LogicalOr,
}

impl AggregateOp {
    pub const ALL: [AggregateOp; 7] = [
        AggregateOp::Sum,
        AggregateOp::Mean,
        AggregateOp::Min,
        AggregateOp::Max,
        AggregateOp::First,
        AggregateOp::LogicalAnd,
        AggregateOp::LogicalOr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggregateOp::Sum => "sum",
            AggregateOp::Mean => "mean",
            AggregateOp::Min => "min",
            AggregateOp::Max => "max",
            AggregateOp::First => "first",
            AggregateOp::LogicalAnd => "logical-and",
            AggregateOp::LogicalOr => "logical-or",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.name() == s)
    }

    /// Folds the values in order. Numeric results keep the input tag when all
    /// inputs share it (a mean of ints is a double); mixed numeric tags give a
    /// double.
    pub fn apply(self, field: &str, values: &[&PropertyValue]) -> Result<PropertyValue, TransformError> {
        let first = values.first().expect("at least one value");
        let mismatch = |kind: ValueKind| TransformError::OperatorTypeMismatch {
            field: field.to_string(),
            op: self.name(),
            kind: kind.tag(),
        };
        match self {
            AggregateOp::First => return Ok((*first).clone()),
            AggregateOp::LogicalAnd | AggregateOp::LogicalOr => {
                let mut acc = self == AggregateOp::LogicalAnd;
                for v in values {
                    let b = v.as_bool().ok_or_else(|| mismatch(v.kind()))?;
                    acc = if self == AggregateOp::LogicalAnd { acc && b } else { acc || b };
                }
                return Ok(PropertyValue::Bool(acc));
            }
            _ => {}
        }
        if let Some(v) = values.iter().find(|v| !v.kind().is_numeric()) {
            return Err(mismatch(v.kind()));
        }
        let kind = first.kind();
        let uniform = values.iter().all(|v| v.kind() == kind);
        if uniform && kind == ValueKind::Int {
            let ints: Vec<i64> = values.iter().map(|v| if let PropertyValue::Int(i) = v { *i } else { 0 }).collect();
            return Ok(match self {
                AggregateOp::Sum => PropertyValue::Int(ints.iter().fold(0i64, |a, b| a.saturating_add(*b))),
                AggregateOp::Min => PropertyValue::Int(*ints.iter().min().expect("non-empty")),
                AggregateOp::Max => PropertyValue::Int(*ints.iter().max().expect("non-empty")),
                _ => PropertyValue::Double(ints.iter().map(|i| *i as f64).sum::<f64>() / ints.len() as f64),
            });
        }
        let xs: Vec<f64> = values.iter().map(|v| v.as_f64().expect("numeric")).collect();
        let y = match self {
            AggregateOp::Sum => xs.iter().sum::<f64>(),
            AggregateOp::Mean => xs.iter().sum::<f64>() / xs.len() as f64,
            AggregateOp::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
            _ => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        };
        Ok(if uniform && kind == ValueKind::Float { PropertyValue::Float(y as f32) } else { PropertyValue::Double(y) })
    }
}

/// Aggregation of a part field onto a composite field.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub field: String,
    pub op: AggregateOp,
    /// Composite field written; usually the same name.
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpscaleSpec {
    pub aggregates: Vec<Aggregate>,
}

impl UpscaleSpec {
    pub fn new(aggregates: Vec<Aggregate>) -> Result<Self, TransformError> {
        let mut seen = BTreeSet::new();
        for a in &aggregates {
            if !seen.insert(a.target.as_str()) {
                return Err(TransformError::InvalidScheme(format!("field {:?} aggregated twice", a.target)));
            }
        }
        Ok(UpscaleSpec { aggregates })
    }

    pub fn with(mut self, field: &str, op: AggregateOp) -> Self {
        self.aggregates.push(Aggregate { field: field.into(), op, target: field.into() });
        self
    }

    /// `<aggregate field op [target]/>` children of `el`.
    pub fn from_element(el: &Element) -> Result<Self, TransformError> {
        let bad = TransformError::InvalidScheme;
        let mut out = Vec::new();
        for c in el.children_named("aggregate") {
            let field = c.require("field").map_err(bad)?;
            let op_name = c.require("op").map_err(bad)?;
            let op = AggregateOp::from_name(op_name)
                .ok_or_else(|| bad(format!("{}: unknown operator {op_name:?}", c.at())))?;
            out.push(Aggregate { field: field.into(), op, target: c.attr("target").unwrap_or(field).into() });
        }
        UpscaleSpec::new(out)
    }
}

/// Writes aggregated part fields onto every composite and removes the finer
/// scale added by [`decompose_scale`]. Part fields that neither the aggregates nor
/// the scheme account for are dropped and reported once each.
pub fn upscale_properties(
    graph: &ExchangeGraph,
    scheme: &DecompositionScheme,
    spec: &UpscaleSpec,
) -> Result<(ExchangeGraph, Vec<String>), TransformError> {
    graph.ensure_valid()?;
    let known: BTreeSet<&str> = scheme
        .parts
        .iter()
        .flat_map(PartTemplate::produced_fields)
        .chain(spec.aggregates.iter().map(|a| a.field.as_str()))
        .collect();
    let mut dropped: BTreeSet<String> = BTreeSet::new();
    let mut out = graph.clone();
    let mut fine: BTreeSet<NodeId> = BTreeSet::new();
    for c in composites(graph, scheme) {
        let kids = graph.children(c, Some(&EdgeType::Decomposition))?;
        if kids.is_empty() {
            return Err(TransformError::MissingFineScale(c));
        }
        let part_nodes: Vec<&GraphNode> = kids.iter().map(|k| graph.node(*k).expect("child in graph")).collect();
        for agg in &spec.aggregates {
            let values: Vec<&PropertyValue> = part_nodes.iter().filter_map(|n| n.property(&agg.field)).collect();
            if values.is_empty() {
                continue;
            }
            let v = agg.op.apply(&agg.field, &values)?;
            out.node_mut(c).expect("composite in graph").set_property(agg.target.clone(), v);
        }
        for n in &part_nodes {
            dropped.extend(n.properties.keys().filter(|k| !known.contains(k.as_str())).cloned());
        }
        fine.extend(kids);
    }

    // Nodes hanging off the parts (e.g. extra translated shapes) go too.
    let mut queue: VecDeque<NodeId> = fine.iter().copied().collect();
    while let Some(id) = queue.pop_front() {
        let scale = graph.node(id).expect("in graph").scale;
        for e in graph.out_edges(id) {
            let dst = graph.node(e.dst).expect("edge endpoint");
            if dst.scale >= scale && dst.type_name != scheme.composite_type && fine.insert(e.dst) {
                queue.push_back(e.dst);
            }
        }
    }
    for id in &fine {
        out.remove_node(*id)?;
    }
    let warnings = dropped
        .into_iter()
        .map(|f| format!("part field {f:?} has no upscale operator and was dropped"))
        .collect();
    Ok((out, warnings))
}
