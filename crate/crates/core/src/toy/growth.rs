use std::any::Any;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ToyError;
use crate::graph::{EdgeType, ExchangeGraph, GraphEdge, GraphNode, PropertyValue, TransformMode};
use crate::math::{compose_transforms, TransformOp};
use crate::pipeline::{AdapterError, ExportAdapter};
use crate::protocol::SourceModel;
use crate::{Transform, Vec3d};

pub const GROWTH_MODEL_KIND: &str = "toy-growth";

/// One metamer. `index` is its creation order; main-shoot metamers and their
/// branches share one numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct MetamerRecord {
    pub index: usize,
    /// Creation index of the bearing metamer; `None` for the first one.
    pub parent: Option<usize>,
    /// Attached to its parent by a branch rather than a successor edge.
    pub branch: bool,
    /// Position along the main shoot (a branch takes its bearer's rank + 1).
    pub rank: u32,
    pub internode_length: f64,
    pub internode_radius: f64,
    pub petiole_length: f64,
    pub petiole_radius: f64,
    pub leaf_width: f64,
    pub leaf_length: f64,
    /// Rotation about the shoot axis relative to the parent, degrees.
    pub phyllotaxis: f64,
    pub color: String,
    pub water_content: f64,
    pub pressure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthState {
    pub seed: u64,
    pub step: u64,
    pub metamers: Vec<MetamerRecord>,
    main_tip: Option<usize>,
}

impl GrowthState {
    pub fn new(seed: u64) -> Self {
        GrowthState { seed, step: 0, metamers: Vec::new(), main_tip: None }
    }

    /// State after `steps` growth steps from an empty plant.
    pub fn grown(seed: u64, steps: u64) -> Self {
        let mut s = Self::new(seed);
        for _ in 0..steps {
            s.grow();
        }
        s
    }

    fn metamer(&self, parent: Option<usize>, branch: bool, rank: u32) -> MetamerRecord {
        let index = self.metamers.len();
        // Each metamer draws from its own stream, so its values depend only on
        // the seed and its creation index.
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut jitter = |spread: f64| 1.0 + rng.random_range(-spread..spread);
        let decay = 0.95f64.powi(rank as i32);
        MetamerRecord {
            index,
            parent,
            branch,
            rank,
            internode_length: 0.2 * decay,
            internode_radius: 0.02 * decay * jitter(0.05),
            petiole_length: 0.05 * jitter(0.1),
            petiole_radius: 0.004,
            leaf_width: 0.06 * jitter(0.1),
            leaf_length: 0.1 * jitter(0.1),
            phyllotaxis: 137.5 * jitter(0.02),
            color: "brown".to_string(),
            water_content: 0.0,
            pressure: None,
        }
    }

    /// Adds one metamer to the main shoot; every third one also bears a
    /// one-metamer branch.
    pub fn grow(&mut self) {
        let rank = self.main_tip.map_or(0, |t| self.metamers[t].rank + 1);
        let m = self.metamer(self.main_tip, false, rank);
        let idx = m.index;
        self.metamers.push(m);
        self.main_tip = Some(idx);
        if rank % 3 == 2 {
            let b = self.metamer(Some(idx), true, rank + 1);
            self.metamers.push(b);
        }
        self.step += 1;
    }

    pub fn node_name(index: usize) -> String {
        format!("metamer_{index}")
    }

    fn local_transform(&self, m: &MetamerRecord) -> Transform {
        let Some(p) = m.parent else { return Transform::identity() };
        let z = Vec3d::new(0.0, 0.0, 1.0);
        let mut ops = vec![TransformOp::Rotation { axis: z, angle_deg: m.phyllotaxis }];
        if m.branch {
            ops.push(TransformOp::Rotation { axis: Vec3d::new(1.0, 0.0, 0.0), angle_deg: 40.0 });
        }
        ops.push(TransformOp::Translation(Vec3d::new(0.0, 0.0, self.metamers[p].internode_length)));
        compose_transforms(&ops).expect("fixed non-zero axes")
    }

    /// Writes fields sent back by a target model into the matching metamers.
    pub fn install(&mut self, graph: &ExchangeGraph) -> Result<(), ToyError> {
        let bad = |m: String| Err(ToyError::Install(m));
        let mut seen = vec![false; self.metamers.len()];
        for n in graph.nodes().filter(|n| n.type_name == "Metamer") {
            let Some(i) = n.name.strip_prefix("metamer_").and_then(|s| s.parse::<usize>().ok()) else {
                return bad(format!("unexpected metamer name {:?}", n.name));
            };
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return bad(format!("metamer {i} is unknown or repeated"));
            }
            let m = &mut self.metamers[i];
            let num = |field: &str, slot: &mut f64| {
                if let Some(v) = n.property(field).and_then(PropertyValue::as_f64) {
                    *slot = v;
                }
            };
            num("internode_length", &mut m.internode_length);
            num("internode_radius", &mut m.internode_radius);
            num("petiole_length", &mut m.petiole_length);
            num("petiole_radius", &mut m.petiole_radius);
            num("leaf_width", &mut m.leaf_width);
            num("leaf_length", &mut m.leaf_length);
            num("water_content", &mut m.water_content);
            if let Some(c) = n.property("color").and_then(PropertyValue::as_text) {
                m.color = c.to_string();
            }
            if let Some(p) = n.property("pressure").and_then(PropertyValue::as_f64) {
                m.pressure = Some(p);
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return bad(format!("metamer {i} missing from the returned graph"));
        }
        Ok(())
    }
}

/// Exports the plant in one pass over the metamers (parents precede their
/// children in creation order). In global mode the global placements are
/// accumulated during the same pass.
pub fn growth_export(state: &GrowthState, mode: TransformMode) -> ExchangeGraph {
    let mut g = ExchangeGraph::with_root(GraphNode::new(1, "plant", "Plant", 0).with_property("step", state.step as i64))
        .expect("fresh graph");
    g.set_transform_mode(mode);
    let mut globals: Vec<Transform> = Vec::with_capacity(state.metamers.len());
    for m in &state.metamers {
        let id = 2 + m.index as u64;
        let local = state.local_transform(m);
        let mut n = GraphNode::new(id, GrowthState::node_name(m.index), "Metamer", 1)
            .with_property("rank", m.rank as i64)
            .with_property("internode_length", m.internode_length)
            .with_property("internode_radius", m.internode_radius)
            .with_property("petiole_length", m.petiole_length)
            .with_property("petiole_radius", m.petiole_radius)
            .with_property("leaf_width", m.leaf_width)
            .with_property("leaf_length", m.leaf_length)
            .with_property("color", m.color.as_str())
            .with_property("water_content", m.water_content);
        if let Some(p) = m.pressure {
            n.set_property("pressure", p);
        }
        let global = match m.parent {
            Some(p) => globals[p].then_local(&local),
            None => local,
        };
        globals.push(global);
        match mode {
            TransformMode::Local => n.local_transform = Some(local),
            TransformMode::Global => n.global_transform = Some(global),
        }
        g.add_node(n).expect("unique ids");
        let (src, etype) = match m.parent {
            None => (1, EdgeType::Successor),
            Some(p) if m.branch => (2 + p as u64, EdgeType::Branch),
            Some(p) => (2 + p as u64, EdgeType::Successor),
        };
        g.add_edge(GraphEdge::new(src, id, etype)).expect("endpoints exist");
    }
    if mode == TransformMode::Global {
        g.node_mut(crate::graph::NodeId(1)).expect("root").global_transform = Some(Transform::identity());
    }
    g
}

impl SourceModel for GrowthState {
    fn advance(&mut self) -> Result<(), String> {
        self.grow();
        Ok(())
    }

    fn export(&self) -> Result<ExchangeGraph, String> {
        Ok(growth_export(self, TransformMode::Local))
    }

    fn install(&mut self, graph: &ExchangeGraph) -> Result<(), String> {
        GrowthState::install(self, graph).map_err(|e| e.to_string())
    }
}

pub struct GrowthAdapter;

impl ExportAdapter for GrowthAdapter {
    fn model_kind(&self) -> &str {
        GROWTH_MODEL_KIND
    }

    fn export(&self, state: &dyn Any, mode: TransformMode) -> Result<ExchangeGraph, AdapterError> {
        let s = state
            .downcast_ref::<GrowthState>()
            .ok_or_else(|| AdapterError { node: None, detail: "state is not a GrowthState".into() })?;
        Ok(growth_export(s, mode))
    }
}
