//! XEG: the XML form of an [`ExchangeGraph`].
//!
//! ```text
//! <graph root="1" version="1.0">
//!   <node id="1" name="plant" type="Plant" scale="0">
//!     <property name="age" type="int" value="3"/>
//!     <transform kind="local" value="1.0 0.0 0.0 0.0 0.0 1.0 0.0 0.0 0.0 0.0 1.0 0.0 0.0 0.0 0.0 1.0"/>
//!   </node>
//!   <edge src_id="1" dst_id="2" type="successor"/>
//! </graph>
//! ```
//!
//! Matrices are written row-major. The graph element gains
//! `transform_mode="global"` only when global transforms are authoritative.
//! Canonical output lists nodes in canonical preorder, then edges grouped by
//! source in that same order; properties are sorted by name; floats use the
//! shortest decimal that parses back to the same value.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{
    validate_parts, EdgeType, ExchangeGraph, GraphEdge, GraphNode, NodeId, PropertyValue, TransformMode,
    ValidationReport, ValueKind,
};
use crate::xml::{parse_document, Element, XmlSyntaxError, XmlWriter};
use crate::Transform;

pub const XEG_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum XegError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("semantic error: {0}")]
    Semantic(ValidationReport),
    #[error("graph is not valid: {0}")]
    InvalidGraph(ValidationReport),
}

impl From<XmlSyntaxError> for XegError {
    fn from(e: XmlSyntaxError) -> Self {
        XegError::Syntax { line: e.line, col: e.col, message: e.message }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Collect unknown attributes and elements as warnings instead of failing.
    pub lenient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct XegDocument {
    pub version: String,
    pub graph: ExchangeGraph,
}

#[derive(Debug, Clone)]
pub struct ParsedXeg {
    pub graph: ExchangeGraph,
    pub warnings: Vec<String>,
}

/// Strict parse.
pub fn parse_xeg(text: &str) -> Result<ExchangeGraph, XegError> {
    parse_xeg_with(text, ParseOptions::default()).map(|p| p.graph)
}

pub fn parse_xeg_with(text: &str, opts: ParseOptions) -> Result<ParsedXeg, XegError> {
    let root = parse_document(text)?;
    let mut warnings = Vec::new();
    let graph = graph_from_element(&root, opts, &mut warnings)?;
    Ok(ParsedXeg { graph, warnings })
}

impl XegDocument {
    pub fn parse(text: &str) -> Result<Self, XegError> {
        Ok(XegDocument { version: XEG_VERSION.to_string(), graph: parse_xeg(text)? })
    }

    pub fn to_xml(&self) -> Result<String, XegError> {
        serialize_xeg(&self.graph)
    }
}

/// Canonical serialization; the graph must be valid.
pub fn serialize_xeg(g: &ExchangeGraph) -> Result<String, XegError> {
    let mut w = XmlWriter::new();
    write_graph(&mut w, g)?;
    Ok(w.finish())
}

/// Shortest round-trip decimal for an `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn format_f32(v: f32) -> String {
    format!("{v:?}")
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| format_f64(*x)).collect::<Vec<_>>().join(" ")
}

/// Kind tag and text form of a value, as written in `type`/`value` attributes.
pub fn encode_value(v: &PropertyValue) -> (&'static str, String) {
    let text = match v {
        PropertyValue::Int(x) => x.to_string(),
        PropertyValue::Float(x) => format_f32(*x),
        PropertyValue::Double(x) => format_f64(*x),
        PropertyValue::Bool(x) => x.to_string(),
        PropertyValue::Text(s) => s.clone(),
        PropertyValue::Vec3(a) => join_f64(a),
        PropertyValue::Matrix4(a) => join_f64(a),
        PropertyValue::DoubleList(a) => join_f64(a),
    };
    (v.kind().tag(), text)
}

fn parse_list(text: &str, expect: Option<usize>) -> Result<Vec<f64>, String> {
    let v = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("{t:?} is not a number")))
        .collect::<Result<Vec<_>, _>>()?;
    match expect {
        Some(n) if v.len() != n => Err(format!("expected {n} numbers, found {}", v.len())),
        _ => Ok(v),
    }
}

/// Inverse of [`encode_value`].
pub fn decode_value(kind: ValueKind, text: &str) -> Result<PropertyValue, String> {
    let bad = |what: &str| format!("{text:?} is not a valid {what}");
    Ok(match kind {
        ValueKind::Int => PropertyValue::Int(text.trim().parse().map_err(|_| bad("int"))?),
        ValueKind::Float => PropertyValue::Float(text.trim().parse().map_err(|_| bad("float"))?),
        ValueKind::Double => PropertyValue::Double(text.trim().parse().map_err(|_| bad("double"))?),
        ValueKind::Bool => match text.trim() {
            "true" => PropertyValue::Bool(true),
            "false" => PropertyValue::Bool(false),
            _ => return Err(bad("bool")),
        },
        ValueKind::Text => PropertyValue::Text(text.to_string()),
        ValueKind::Vec3 => {
            let v = parse_list(text, Some(3))?;
            PropertyValue::Vec3([v[0], v[1], v[2]])
        }
        ValueKind::Matrix4 => {
            let v = parse_list(text, Some(16))?;
            PropertyValue::Matrix4(v.try_into().expect("length checked"))
        }
        ValueKind::DoubleList => PropertyValue::DoubleList(parse_list(text, None)?),
    })
}

fn check_attrs(el: &Element, allowed: &[&str], opts: ParseOptions, warnings: &mut Vec<String>) -> Result<(), XegError> {
    let unknown = el.unknown_attrs(allowed);
    if unknown.is_empty() {
        return Ok(());
    }
    if opts.lenient {
        warnings.extend(unknown);
        Ok(())
    } else {
        Err(XegError::Schema(unknown.join("; ")))
    }
}

fn unknown_element(el: &Element, opts: ParseOptions, warnings: &mut Vec<String>) -> Result<(), XegError> {
    let msg = format!("{}: unexpected element <{}>", el.at(), el.name);
    if opts.lenient {
        warnings.push(msg);
        Ok(())
    } else {
        Err(XegError::Schema(msg))
    }
}

fn schema<T>(msg: String) -> Result<T, XegError> {
    Err(XegError::Schema(msg))
}

fn parse_u64(el: &Element, attr: &str) -> Result<u64, XegError> {
    let raw = el.require(attr).map_err(XegError::Schema)?;
    raw.parse::<u64>()
        .map_err(|_| XegError::Schema(format!("{}: attribute {attr}={raw:?} is not a non-negative integer", el.at())))
}

fn parse_transform(el: &Element) -> Result<(TransformMode, Transform), XegError> {
    let kind = match el.require("kind").map_err(XegError::Schema)? {
        "local" => TransformMode::Local,
        "global" => TransformMode::Global,
        other => return schema(format!("{}: bad transform kind {other:?}", el.at())),
    };
    let raw = el.require("value").map_err(XegError::Schema)?;
    let v = parse_list(raw, Some(16)).map_err(|m| XegError::Schema(format!("{}: transform {m}", el.at())))?;
    let t = Transform::from_row_major(v.try_into().expect("length checked"))
        .map_err(|e| XegError::Schema(format!("{}: transform {e}", el.at())))?;
    Ok((kind, t))
}

fn parse_node(el: &Element, opts: ParseOptions, warnings: &mut Vec<String>) -> Result<GraphNode, XegError> {
    check_attrs(el, &["id", "name", "type", "scale"], opts, warnings)?;
    let id = parse_u64(el, "id")?;
    let scale = parse_u64(el, "scale")?;
    let scale = u32::try_from(scale).map_err(|_| XegError::Schema(format!("{}: scale out of range", el.at())))?;
    let name = el.require("name").map_err(XegError::Schema)?;
    let type_name = el.require("type").map_err(XegError::Schema)?;
    let mut node = GraphNode::new(id, name, type_name, scale);
    for child in &el.children {
        match child.name.as_str() {
            "property" => {
                check_attrs(child, &["name", "type", "value"], opts, warnings)?;
                let pname = child.require("name").map_err(XegError::Schema)?;
                let tag = child.require("type").map_err(XegError::Schema)?;
                let kind = ValueKind::from_tag(tag)
                    .ok_or_else(|| XegError::Schema(format!("{}: bad property type tag {tag:?}", child.at())))?;
                let raw = child.require("value").map_err(XegError::Schema)?;
                let value = decode_value(kind, raw)
                    .map_err(|m| XegError::Schema(format!("{}: property {pname:?}: {m}", child.at())))?;
                if node.properties.insert(pname.to_string(), value).is_some() {
                    return schema(format!("{}: duplicate property {pname:?} on node {id}", child.at()));
                }
            }
            "transform" => {
                check_attrs(child, &["kind", "value"], opts, warnings)?;
                let (kind, t) = parse_transform(child)?;
                let slot = match kind {
                    TransformMode::Local => &mut node.local_transform,
                    TransformMode::Global => &mut node.global_transform,
                };
                if slot.replace(t).is_some() {
                    return schema(format!("{}: duplicate {} transform on node {id}", child.at(), kind.name()));
                }
            }
            _ => unknown_element(child, opts, warnings)?,
        }
    }
    Ok(node)
}

fn valid_edge_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':'))
}

/// Reads a `<graph>` element (a whole file or the payload of a message).
pub(crate) fn graph_from_element(
    el: &Element,
    opts: ParseOptions,
    warnings: &mut Vec<String>,
) -> Result<ExchangeGraph, XegError> {
    if el.name != "graph" {
        return schema(format!("{}: expected <graph>, found <{}>", el.at(), el.name));
    }
    check_attrs(el, &["root", "version", "transform_mode"], opts, warnings)?;
    let version = el.require("version").map_err(XegError::Schema)?;
    if version != XEG_VERSION {
        return schema(format!("{}: unsupported version {version:?}", el.at()));
    }
    let root = NodeId(parse_u64(el, "root")?);
    let mode = match el.attr("transform_mode") {
        None | Some("local") => TransformMode::Local,
        Some("global") => TransformMode::Global,
        Some(other) => return schema(format!("{}: bad transform_mode {other:?}", el.at())),
    };

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for child in &el.children {
        match child.name.as_str() {
            "node" => nodes.push(parse_node(child, opts, warnings)?),
            "edge" => {
                check_attrs(child, &["src_id", "dst_id", "type"], opts, warnings)?;
                let src = parse_u64(child, "src_id")?;
                let dst = parse_u64(child, "dst_id")?;
                let tag = child.require("type").map_err(XegError::Schema)?;
                if !valid_edge_name(tag) {
                    return schema(format!("{}: bad edge type {tag:?}", child.at()));
                }
                edges.push((child.at(), GraphEdge::new(src, dst, EdgeType::from_name(tag))));
            }
            _ => unknown_element(child, opts, warnings)?,
        }
    }

    let mut ids = BTreeSet::new();
    for n in &nodes {
        if !ids.insert(n.id) {
            return schema(format!("duplicate node id {}", n.id));
        }
    }
    for (at, e) in &edges {
        for end in [e.src, e.dst] {
            if !ids.contains(&end) {
                return schema(format!("{at}: edge {e} references unknown node id {end}"));
            }
        }
    }
    if !ids.contains(&root) {
        return schema(format!("{}: root references unknown node id {root}", el.at()));
    }

    let edges: Vec<GraphEdge> = edges.into_iter().map(|(_, e)| e).collect();
    let report = validate_parts(Some(root), &nodes, &edges);
    if !report.is_empty() {
        return Err(XegError::Semantic(report));
    }

    let mut g = ExchangeGraph::new();
    g.set_transform_mode(mode);
    for n in nodes {
        g.add_node(n).expect("ids checked unique");
    }
    g.set_root(root).expect("root checked");
    for e in edges {
        g.add_edge(e).map_err(|err| XegError::Schema(err.to_string()))?;
    }
    Ok(g)
}

fn transform_attr(t: &Transform) -> String {
    join_f64(&t.to_row_major())
}

pub(crate) fn write_graph(w: &mut XmlWriter, g: &ExchangeGraph) -> Result<(), XegError> {
    let report = g.validate();
    if !report.is_empty() {
        return Err(XegError::InvalidGraph(report));
    }
    let root = g.root().expect("valid graph has a root");
    let mut attrs = vec![("root", root.to_string()), ("version", XEG_VERSION.to_string())];
    if g.transform_mode() == TransformMode::Global {
        attrs.push(("transform_mode", "global".to_string()));
    }
    w.open("graph", &attrs);
    let order = g.preorder();
    for id in &order {
        let n = g.node(*id).expect("preorder yields graph nodes");
        let attrs = [
            ("id", n.id.to_string()),
            ("name", n.name.clone()),
            ("type", n.type_name.clone()),
            ("scale", n.scale.to_string()),
        ];
        if n.properties.is_empty() && n.local_transform.is_none() && n.global_transform.is_none() {
            w.empty("node", &attrs);
            continue;
        }
        w.open("node", &attrs);
        let props: BTreeMap<&String, &PropertyValue> = n.properties.iter().collect();
        for (name, v) in props {
            let (tag, text) = encode_value(v);
            w.empty("property", &[("name", name.clone()), ("type", tag.to_string()), ("value", text)]);
        }
        if let Some(t) = &n.local_transform {
            w.empty("transform", &[("kind", "local".to_string()), ("value", transform_attr(t))]);
        }
        if let Some(t) = &n.global_transform {
            w.empty("transform", &[("kind", "global".to_string()), ("value", transform_attr(t))]);
        }
        w.close("node");
    }
    for id in &order {
        for e in g.out_edges(*id) {
            w.empty(
                "edge",
                &[("src_id", e.src.to_string()), ("dst_id", e.dst.to_string()), ("type", e.etype.name().to_string())],
            );
        }
    }
    w.close("graph");
    Ok(())
}
