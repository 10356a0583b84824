//! Renaming edge tags between a platform vocabulary and the mediating one.

use std::collections::{BTreeMap, BTreeSet};

use super::TransformError;
use crate::graph::{EdgeType, ExchangeGraph, GraphEdge};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    /// Platform names → mediating tags.
    In,
    /// Mediating tags → platform names.
    Out,
}

impl MapDirection {
    pub fn name(self) -> &'static str {
        match self {
            MapDirection::In => "in",
            MapDirection::Out => "out",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "in" => Some(MapDirection::In),
            "out" => Some(MapDirection::Out),
            _ => None,
        }
    }
}

/// One-to-one table between platform edge names and mediating edge types.
///
/// Standard names that are neither keys nor images of the table map to
/// themselves, so a map holding only `refinement → decomposition` still lets
/// successor and branch edges through. Anything else is unmapped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeTypeMap {
    forward: BTreeMap<String, EdgeType>,
    inverse: BTreeMap<EdgeType, String>,
}

impl EdgeTypeMap {
    pub fn new(pairs: impl IntoIterator<Item = (String, EdgeType)>) -> Result<Self, TransformError> {
        let mut forward = BTreeMap::new();
        let mut inverse = BTreeMap::new();
        for (name, etype) in pairs {
            if !etype.is_standard() {
                return Err(TransformError::InvalidEdgeMap(format!("{name:?} maps to non-standard tag {etype}")));
            }
            let own = EdgeType::from_name(&name);
            if own.is_standard() && own != etype {
                return Err(TransformError::InvalidEdgeMap(format!(
                    "standard name {name:?} cannot be remapped to {etype}"
                )));
            }
            if forward.insert(name.clone(), etype.clone()).is_some() {
                return Err(TransformError::InvalidEdgeMap(format!("{name:?} is mapped twice")));
            }
            if let Some(prev) = inverse.insert(etype.clone(), name.clone()) {
                return Err(TransformError::InvalidEdgeMap(format!("{prev:?} and {name:?} both map to {etype}")));
            }
        }
        Ok(EdgeTypeMap { forward, inverse })
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &EdgeType)> {
        self.forward.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn map_in(&self, etype: &EdgeType) -> Result<EdgeType, TransformError> {
        if let Some(t) = self.forward.get(etype.name()) {
            return Ok(t.clone());
        }
        if etype.is_standard() && !self.inverse.contains_key(etype) {
            return Ok(etype.clone());
        }
        Err(TransformError::UnmappedEdgeType(etype.name().to_string()))
    }

    pub fn map_out(&self, etype: &EdgeType) -> Result<EdgeType, TransformError> {
        if let Some(name) = self.inverse.get(etype) {
            return Ok(EdgeType::from_name(name));
        }
        if etype.is_standard() && !self.forward.contains_key(etype.name()) {
            return Ok(etype.clone());
        }
        Err(TransformError::UnmappedEdgeType(etype.name().to_string()))
    }
}

/// Rewrites every edge tag; nodes are left alone.
pub fn map_edge_types(
    graph: &ExchangeGraph,
    map: &EdgeTypeMap,
    direction: MapDirection,
) -> Result<ExchangeGraph, TransformError> {
    let mut edges = BTreeSet::new();
    for e in graph.edges() {
        let etype = match direction {
            MapDirection::In => map.map_in(&e.etype)?,
            MapDirection::Out => map.map_out(&e.etype)?,
        };
        edges.insert(GraphEdge { src: e.src, etype, dst: e.dst });
    }
    let mut out = graph.clone();
    out.replace_edges(edges);
    Ok(out)
}
