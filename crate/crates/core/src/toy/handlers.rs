use std::collections::{BTreeMap, VecDeque};

use super::ToyError;
use crate::graph::{ExchangeGraph, NodeId, PropertyValue};
use crate::pipeline::Env;
use crate::protocol::{SessionMode, StepOutcome, TargetModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterParams {
    /// Pressure at the base of the shoot.
    pub base_pressure: f64,
    /// Pressure lost per internode above the base.
    pub loss_per_node: f64,
}

impl WaterParams {
    /// `None` unless both values are finite and the loss is non-negative.
    pub fn new(base_pressure: f64, loss_per_node: f64) -> Option<Self> {
        (base_pressure.is_finite() && loss_per_node.is_finite() && loss_per_node >= 0.0)
            .then_some(WaterParams { base_pressure, loss_per_node })
    }
}

impl Default for WaterParams {
    fn default() -> Self {
        WaterParams { base_pressure: 100.0, loss_per_node: 2.5 }
    }
}

/// Toy water transport over the internodes of an elementary-scale plant.
///
/// An internode's depth is its successor/branch distance from a basal
/// internode (one with no incoming topological edge from another internode).
/// Every internode gets `pressure = base - loss * depth` and turns green; no
/// other node is touched.
pub fn water_handler(mut graph: ExchangeGraph, params: &WaterParams) -> Result<ExchangeGraph, ToyError> {
    let internodes: Vec<NodeId> = graph.nodes().filter(|n| n.name == "internode").map(|n| n.id).collect();
    if internodes.is_empty() {
        return Err(ToyError::MissingFineScale);
    }
    let is_internode = |g: &ExchangeGraph, id: NodeId| g.node(id).is_some_and(|n| n.name == "internode");
    let mut has_parent: BTreeMap<NodeId, bool> = internodes.iter().map(|i| (*i, false)).collect();
    let mut next: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for e in graph.edges() {
        if e.etype.is_topological() && is_internode(&graph, e.src) && is_internode(&graph, e.dst) {
            has_parent.insert(e.dst, true);
            next.entry(e.src).or_default().push(e.dst);
        }
    }
    let mut depth: BTreeMap<NodeId, u32> = BTreeMap::new();
    let mut queue: VecDeque<NodeId> = has_parent.iter().filter(|(_, p)| !**p).map(|(id, _)| *id).collect();
    for id in &queue {
        depth.insert(*id, 0);
    }
    while let Some(id) = queue.pop_front() {
        let d = depth[&id];
        for k in next.get(&id).into_iter().flatten() {
            if !depth.contains_key(k) {
                depth.insert(*k, d + 1);
                queue.push_back(*k);
            }
        }
    }
    for n in graph.nodes_mut() {
        if let Some(d) = depth.get(&n.id) {
            n.set_property("color", "green");
            n.set_property("pressure", params.base_pressure - params.loss_per_node * f64::from(*d));
        }
    }
    Ok(graph)
}

/// One-line summary of what arrived: census and the step temperature, `-`
/// when the environment has none.
pub fn status_handler(graph: &ExchangeGraph, env: &Env) -> String {
    let (nodes, edges) = graph.census();
    let temperature = match env.get("temperature") {
        Some(PropertyValue::Float(v)) => v.to_string(),
        Some(PropertyValue::Double(v)) => v.to_string(),
        Some(PropertyValue::Int(v)) => v.to_string(),
        _ => "-".to_string(),
    };
    format!("ok: {nodes} nodes, {edges} edges, step env {temperature}")
}

/// Retroactive target running [`water_handler`].
#[derive(Debug, Clone, Default)]
pub struct WaterModel {
    pub params: WaterParams,
}

impl TargetModel for WaterModel {
    fn supports(&self, mode: SessionMode) -> bool {
        mode == SessionMode::Retroactive
    }

    fn step(&mut self, _index: u64, graph: ExchangeGraph, _env: &Env) -> Result<StepOutcome, String> {
        water_handler(graph, &self.params).map(StepOutcome::Updated).map_err(|e| e.to_string())
    }
}

/// Non-retroactive target answering with [`status_handler`].
#[derive(Debug, Clone, Default)]
pub struct StatusModel;

impl TargetModel for StatusModel {
    fn supports(&self, mode: SessionMode) -> bool {
        mode == SessionMode::NonRetroactive
    }

    fn step(&mut self, _index: u64, graph: ExchangeGraph, env: &Env) -> Result<StepOutcome, String> {
        Ok(StepOutcome::Status(status_handler(&graph, env)))
    }
}
