//! Geometry semantics: graphic-type signatures, the translation dictionary
//! between two graphics libraries, surface areas, and conversion between local
//! and global placement.

mod area;
mod frames;
mod rules;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{EdgeType, ExchangeGraph, GraphEdge, GraphError, GraphNode, NodeId, PropertyValue};
use crate::math::MathError;
use crate::xml::{parse_document, Element, XmlSyntaxError, XmlWriter};

pub use area::{parallelogram_area, surface_area, triangle_area};
pub use frames::{global_frames, globalize, localize};
pub use rules::{ArgRule, BEZIER_TESSELLATION_CELLS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("no dictionary entry for graphic type {type_name:?} (form {form:?})")]
    NoEntry { type_name: String, form: Option<String> },
    #[error("graphic type {0:?} has several forms and no default")]
    AmbiguousForm(String),
    #[error("bad arguments for {type_name}: {detail}")]
    BadArgs { type_name: String, detail: String },
    #[error("surface area not supported for {0:?}")]
    UnsupportedType(String),
    #[error("duplicate dictionary entry ({0}, {1})")]
    DuplicateEntry(String, String),
    #[error("default form {form:?} for {source_type:?} has no entry")]
    UnknownDefault { source_type: String, form: String },
    #[error("unknown argument rule {0:?}")]
    UnknownRule(String),
    #[error("expected transform mode {expected}, graph is in {found}")]
    WrongMode { expected: &'static str, found: &'static str },
    #[error("transform of node {0} is singular")]
    SingularParentTransform(NodeId),
    #[error("frame parents form a cycle")]
    FrameCycle,
    #[error("dictionary file: {0}")]
    Schema(String),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl From<XmlSyntaxError> for GeometryError {
    fn from(e: XmlSyntaxError) -> Self {
        GeometryError::Schema(e.to_string())
    }
}

/// A graphic type name with positional argument values.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySignature {
    pub type_name: String,
    pub args: Vec<(String, PropertyValue)>,
}

impl GeometrySignature {
    pub fn new(type_name: impl Into<String>, args: Vec<(&str, PropertyValue)>) -> Self {
        GeometrySignature {
            type_name: type_name.into(),
            args: args.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn arg(&self, name: &str) -> Option<&PropertyValue> {
        self.args.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    pub(crate) fn bad(&self, detail: impl Into<String>) -> GeometryError {
        GeometryError::BadArgs { type_name: self.type_name.clone(), detail: detail.into() }
    }

    pub(crate) fn vec3(&self, name: &str) -> Result<[f64; 3], GeometryError> {
        self.arg(name)
            .and_then(PropertyValue::as_vec3)
            .ok_or_else(|| self.bad(format!("{name} must be a vec3")))
    }

    pub(crate) fn number(&self, name: &str) -> Result<f64, GeometryError> {
        self.arg(name)
            .and_then(PropertyValue::as_f64)
            .ok_or_else(|| self.bad(format!("{name} must be numeric")))
    }

    pub(crate) fn list(&self, name: &str) -> Result<&[f64], GeometryError> {
        self.arg(name)
            .and_then(PropertyValue::as_list)
            .ok_or_else(|| self.bad(format!("{name} must be a doublelist")))
    }
}

/// Argument names of the graphic types this crate understands, in signature order.
pub fn shape_args(type_name: &str) -> Option<&'static [&'static str]> {
    match type_name {
        "Parallelogram" => Some(&["origin", "u", "v"]),
        "TriangleSet" => Some(&["vertices", "indices"]),
        "Cylinder" => Some(&["radius", "length", "height"]),
        "BezierPatch" => Some(&["rows", "cols", "control_points"]),
        _ => None,
    }
}

/// Signature of a node whose type is a known graphic type.
pub fn signature_of(node: &GraphNode) -> Option<GeometrySignature> {
    let names = shape_args(&node.type_name)?;
    let args = names
        .iter()
        .filter_map(|n| node.properties.get(*n).map(|v| (n.to_string(), v.clone())))
        .collect();
    Some(GeometrySignature { type_name: node.type_name.clone(), args })
}

/// Replaces the node's geometry with `sig`, leaving non-geometric properties alone.
pub fn apply_signature(node: &mut GraphNode, sig: &GeometrySignature) {
    if let Some(old) = shape_args(&node.type_name) {
        for n in old {
            node.properties.remove(*n);
        }
    }
    node.type_name = sig.type_name.clone();
    for (k, v) in &sig.args {
        node.properties.insert(k.clone(), v.clone());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryEntry {
    pub source_type: String,
    pub form_id: String,
    pub target_type: String,
    pub rule: ArgRule,
}

/// Translation table from one graphics library's types to another's.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dictionary {
    entries: Vec<DictionaryEntry>,
    default_form: BTreeMap<String, String>,
}

impl Dictionary {
    pub fn new(
        entries: Vec<DictionaryEntry>,
        default_form: BTreeMap<String, String>,
    ) -> Result<Self, GeometryError> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &entries {
            if !seen.insert((e.source_type.clone(), e.form_id.clone())) {
                return Err(GeometryError::DuplicateEntry(e.source_type.clone(), e.form_id.clone()));
            }
        }
        for (source_type, form) in &default_form {
            if !seen.contains(&(source_type.clone(), form.clone())) {
                return Err(GeometryError::UnknownDefault { source_type: source_type.clone(), form: form.clone() });
            }
        }
        Ok(Dictionary { entries, default_form })
    }

    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn has_source(&self, type_name: &str) -> bool {
        self.entries.iter().any(|e| e.source_type == type_name)
    }

    /// Entry for `type_name` in the requested form, else the default form,
    /// else the only form there is.
    pub fn lookup(&self, type_name: &str, form: Option<&str>) -> Result<&DictionaryEntry, GeometryError> {
        let no_entry = || GeometryError::NoEntry { type_name: type_name.to_string(), form: form.map(str::to_string) };
        let form = form.or_else(|| self.default_form.get(type_name).map(String::as_str));
        let mut candidates = self.entries.iter().filter(|e| e.source_type == type_name);
        match form {
            Some(f) => candidates.find(|e| e.form_id == f).ok_or_else(no_entry),
            None => {
                let first = candidates.next().ok_or_else(no_entry)?;
                if candidates.next().is_some() {
                    return Err(GeometryError::AmbiguousForm(type_name.to_string()));
                }
                Ok(first)
            }
        }
    }

    /// `<dictionary><entry source form target rule/>…<default source form/>…</dictionary>`
    pub fn from_xml(text: &str) -> Result<Self, GeometryError> {
        let root = parse_document(text)?;
        Self::from_element(&root)
    }

    pub(crate) fn from_element(root: &Element) -> Result<Self, GeometryError> {
        let schema = GeometryError::Schema;
        if root.name != "dictionary" {
            return Err(schema(format!("{}: expected <dictionary>", root.at())));
        }
        let mut entries = Vec::new();
        let mut defaults = BTreeMap::new();
        for el in &root.children {
            match el.name.as_str() {
                "entry" => {
                    let rule_name = el.require("rule").map_err(schema)?;
                    entries.push(DictionaryEntry {
                        source_type: el.require("source").map_err(schema)?.to_string(),
                        form_id: el.require("form").map_err(schema)?.to_string(),
                        target_type: el.require("target").map_err(schema)?.to_string(),
                        rule: ArgRule::from_name(rule_name)
                            .ok_or_else(|| GeometryError::UnknownRule(rule_name.to_string()))?,
                    });
                }
                "default" => {
                    defaults.insert(
                        el.require("source").map_err(schema)?.to_string(),
                        el.require("form").map_err(schema)?.to_string(),
                    );
                }
                other => return Err(schema(format!("{}: unexpected element <{other}>", el.at()))),
            }
        }
        Dictionary::new(entries, defaults)
    }

    pub fn to_xml(&self) -> String {
        let mut w = XmlWriter::new();
        w.open("dictionary", &[]);
        for e in &self.entries {
            w.empty(
                "entry",
                &[
                    ("source", e.source_type.clone()),
                    ("form", e.form_id.clone()),
                    ("target", e.target_type.clone()),
                    ("rule", e.rule.name().to_string()),
                ],
            );
        }
        for (s, f) in &self.default_form {
            w.empty("default", &[("source", s.clone()), ("form", f.clone())]);
        }
        w.close("dictionary");
        w.finish()
    }
}

/// Translates one signature through the dictionary. The source is not modified.
pub fn translate_signature(
    sig: &GeometrySignature,
    dict: &Dictionary,
    form: Option<&str>,
) -> Result<Vec<GeometrySignature>, GeometryError> {
    let entry = dict.lookup(&sig.type_name, form)?;
    entry.rule.apply(sig, &entry.target_type)
}

/// Translates every geometry node of `graph`. Nodes of a known graphic type
/// without an entry fail the run; nodes of any other type pass through.
/// When a rule yields several signatures, the first replaces the node and the
/// rest become new branch children at the same scale.
pub fn translate_geometry(
    graph: &ExchangeGraph,
    dict: &Dictionary,
    forms: &BTreeMap<String, String>,
) -> Result<ExchangeGraph, GeometryError> {
    let mut out = graph.clone();
    let ids: Vec<NodeId> = graph.nodes().map(|n| n.id).collect();
    let mut next_id = graph.next_id();
    for id in ids {
        let node = graph.node(id).expect("id from graph");
        if !dict.has_source(&node.type_name) {
            if shape_args(&node.type_name).is_some() {
                return Err(GeometryError::NoEntry { type_name: node.type_name.clone(), form: None });
            }
            continue;
        }
        let sig = signature_of(node).unwrap_or_else(|| GeometrySignature {
            type_name: node.type_name.clone(),
            args: Vec::new(),
        });
        let targets = translate_signature(&sig, dict, forms.get(&node.type_name).map(String::as_str))?;
        let mut targets = targets.into_iter();
        let first = targets.next().ok_or_else(|| sig.bad("rule produced no signature"))?;
        apply_signature(out.node_mut(id).expect("id from graph"), &first);
        for (k, extra) in targets.enumerate() {
            let mut n = GraphNode::new(next_id, format!("{}#{}", node.name, k + 1), extra.type_name.clone(), node.scale);
            apply_signature(&mut n, &extra);
            out.add_node(n)?;
            out.add_edge(GraphEdge::new(id.0, next_id, EdgeType::Branch))?;
            next_id += 1;
        }
    }
    Ok(out)
}
