//! Extract, transform, load: exporting model state into the Exchange Graph
//! and the staged transformations applied on the way to a target model.

mod edges;
mod scales;
mod units;

use std::any::Any;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::geometry::{globalize, localize, translate_geometry, Dictionary, GeometryError};
use crate::graph::{EdgeType, ExchangeGraph, GraphError, NodeId, TransformMode, ValueKind};
use crate::xml::{parse_document, Element};

pub use edges::{map_edge_types, EdgeTypeMap, MapDirection};
pub use scales::{
    decompose_scale, upscale_properties, Aggregate, AggregateOp, DecompositionScheme, PartTemplate, TemplateArg,
    TemplateOp, UpscaleSpec,
};
pub use units::{convert_env, ConvertDirection, Env, UnitRule};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("unmapped edge type {0:?}")]
    UnmappedEdgeType(String),
    #[error("invalid edge map: {0}")]
    InvalidEdgeMap(String),
    #[error("field {field:?}: expected {expected}, found {found}")]
    TypeMismatch { field: String, expected: &'static str, found: &'static str },
    #[error("invalid unit rule: {0}")]
    InvalidUnitRule(String),
    #[error("invalid decomposition scheme: {0}")]
    InvalidScheme(String),
    #[error("part template {part:?}: {detail}")]
    TemplateArity { part: String, detail: String },
    #[error("composite {0} is already decomposed")]
    AlreadyDecomposed(NodeId),
    #[error("composite {0} has no parts on the finer scale")]
    MissingFineScale(NodeId),
    #[error("operator {op} cannot aggregate {kind} values of {field:?}")]
    OperatorTypeMismatch { field: String, op: &'static str, kind: &'static str },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("pipeline config: {0}")]
    Config(String),
    #[error("stage {index} ({kind}): {source}")]
    Stage { index: usize, kind: &'static str, source: TransformError },
    #[error("no export adapter registered for model kind {0:?}")]
    NoAdapter(String),
    #[error("export adapter {kind:?} failed{}: {detail}", node.map(|n| format!(" at node {n}")).unwrap_or_default())]
    AdapterFailure { kind: String, node: Option<NodeId>, detail: String },
}

impl PipelineError {
    pub fn stage_kind(&self) -> Option<&'static str> {
        match self {
            PipelineError::Stage { kind, .. } => Some(kind),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    MapEdgeTypes { map: EdgeTypeMap, direction: MapDirection },
    Globalize,
    Localize,
    TranslateGeometry { dictionary: Dictionary, forms: BTreeMap<String, String> },
    ConvertEnv { rules: Vec<UnitRule>, direction: ConvertDirection },
    DecomposeScale { scheme: DecompositionScheme },
    UpscaleProperties { scheme: DecompositionScheme, spec: UpscaleSpec },
}

impl Stage {
    pub fn kind(&self) -> &'static str {
        match self {
            Stage::MapEdgeTypes { .. } => "map_edge_types",
            Stage::Globalize => "globalize",
            Stage::Localize => "localize",
            Stage::TranslateGeometry { .. } => "translate_geometry",
            Stage::ConvertEnv { .. } => "convert_env",
            Stage::DecomposeScale { .. } => "decompose_scale",
            Stage::UpscaleProperties { .. } => "upscale_properties",
        }
    }

    /// Applies the stage. Graph stages leave `env` alone and vice versa.
    pub fn apply(
        &self,
        graph: &ExchangeGraph,
        env: &Env,
        warnings: &mut Vec<String>,
    ) -> Result<(ExchangeGraph, Env), TransformError> {
        let g = match self {
            Stage::MapEdgeTypes { map, direction } => map_edge_types(graph, map, *direction)?,
            Stage::Globalize => globalize(graph)?,
            Stage::Localize => localize(graph)?,
            Stage::TranslateGeometry { dictionary, forms } => translate_geometry(graph, dictionary, forms)?,
            Stage::ConvertEnv { rules, direction } => {
                let (env, w) = convert_env(env, rules, *direction)?;
                warnings.extend(w);
                return Ok((graph.clone(), env));
            }
            Stage::DecomposeScale { scheme } => decompose_scale(graph, scheme)?,
            Stage::UpscaleProperties { scheme, spec } => {
                let (g, w) = upscale_properties(graph, scheme, spec)?;
                warnings.extend(w);
                g
            }
        };
        Ok((g, env.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PipelineDirection {
    /// Toward a target model.
    #[default]
    Import,
    /// From a target model back to the source.
    Export,
}

impl PipelineDirection {
    pub fn name(self) -> &'static str {
        match self {
            PipelineDirection::Import => "import",
            PipelineDirection::Export => "export",
        }
    }
}

/// An ordered list of stages, read from
/// `<pipeline direction="import|export"><stage kind="…" …/>…</pipeline>`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub direction: PipelineDirection,
    pub stages: Vec<Stage>,
}

/// Loads a file referenced from a pipeline config (dictionary, scheme).
pub type Resolver<'a> = &'a dyn Fn(&str) -> Result<String, String>;

impl PipelineConfig {
    pub fn new(direction: PipelineDirection, stages: Vec<Stage>) -> Self {
        PipelineConfig { direction, stages }
    }

    /// Reads a pipeline file; referenced files are resolved relative to it.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let resolve = move |rel: &str| {
            let p = base.join(rel);
            std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))
        };
        Self::from_xml(&text, &resolve)
    }

    pub fn from_xml(text: &str, resolve: Resolver<'_>) -> Result<Self, PipelineError> {
        let root = parse_document(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        if root.name != "pipeline" {
            return Err(PipelineError::Config(format!("{}: expected <pipeline>", root.at())));
        }
        let direction = match root.attr("direction") {
            None | Some("import") => PipelineDirection::Import,
            Some("export") => PipelineDirection::Export,
            Some(other) => return Err(PipelineError::Config(format!("bad direction {other:?}"))),
        };
        let mut stages = Vec::new();
        for el in &root.children {
            if el.name != "stage" {
                return Err(PipelineError::Config(format!("{}: unexpected element <{}>", el.at(), el.name)));
            }
            stages.push(parse_stage(el, resolve).map_err(|m| PipelineError::Config(format!("{}: {m}", el.at())))?);
        }
        Ok(PipelineConfig { direction, stages })
    }
}

/// The inline child `<name>` of a stage, or the file named by its `name` attribute.
fn referenced(el: &Element, name: &str, resolve: Resolver<'_>) -> Result<Element, String> {
    if let Some(inline) = el.children_named(name).next() {
        return Ok(inline.clone());
    }
    let path = el.require(name)?;
    let text = resolve(path)?;
    parse_document(&text).map_err(|e| format!("{path}: {e}"))
}

fn number(el: &Element, attr: &str) -> Result<f64, String> {
    let s = el.require(attr)?;
    s.trim().parse().map_err(|_| format!("{}: {attr}={s:?} is not a number", el.at()))
}

fn parse_stage(el: &Element, resolve: Resolver<'_>) -> Result<Stage, String> {
    let text = |e: TransformError| e.to_string();
    let kind = el.require("kind")?;
    Ok(match kind {
        "map_edge_types" => {
            let direction = MapDirection::from_name(el.require("direction")?)
                .ok_or_else(|| "direction must be in or out".to_string())?;
            let mut pairs = Vec::new();
            for m in el.children_named("map") {
                pairs.push((m.require("name")?.to_string(), EdgeType::from_name(m.require("type")?)));
            }
            Stage::MapEdgeTypes { map: EdgeTypeMap::new(pairs).map_err(text)?, direction }
        }
        "globalize" => Stage::Globalize,
        "localize" => Stage::Localize,
        "translate_geometry" => {
            let dict_el = referenced(el, "dictionary", resolve)?;
            let dictionary = Dictionary::from_element(&dict_el).map_err(|e| e.to_string())?;
            let mut forms = BTreeMap::new();
            for f in el.children_named("form") {
                forms.insert(f.require("type")?.to_string(), f.require("form")?.to_string());
            }
            Stage::TranslateGeometry { dictionary, forms }
        }
        "convert_env" => {
            let direction = ConvertDirection::from_name(el.require("direction")?)
                .ok_or_else(|| "direction must be forward or inverse".to_string())?;
            let mut rules = Vec::new();
            for r in el.children_named("rule") {
                let tag = |a: &str| -> Result<ValueKind, String> {
                    let t = r.require(a)?;
                    ValueKind::from_tag(t).ok_or_else(|| format!("unknown type {t:?}"))
                };
                rules.push(
                    UnitRule::new(r.require("field")?, tag("source")?, tag("target")?, number(r, "a")?, number(r, "b")?)
                        .map_err(text)?,
                );
            }
            Stage::ConvertEnv { rules, direction }
        }
        "decompose_scale" => {
            let scheme = DecompositionScheme::from_element(&referenced(el, "scheme", resolve)?).map_err(text)?;
            Stage::DecomposeScale { scheme }
        }
        "upscale_properties" => {
            let scheme = DecompositionScheme::from_element(&referenced(el, "scheme", resolve)?).map_err(text)?;
            Stage::UpscaleProperties { scheme, spec: UpscaleSpec::from_element(el).map_err(text)? }
        }
        other => return Err(format!("unknown stage kind {other:?}")),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub kind: &'static str,
    pub elapsed: Duration,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub graph: ExchangeGraph,
    pub env: Env,
    pub stages: Vec<StageReport>,
}

impl PipelineOutput {
    pub fn warnings(&self) -> impl Iterator<Item = (&'static str, &str)> {
        self.stages.iter().flat_map(|s| s.warnings.iter().map(move |w| (s.kind, w.as_str())))
    }
}

/// Runs the stages in order. The first failure aborts the run.
pub fn run_pipeline(graph: &ExchangeGraph, env: &Env, config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let mut g = graph.clone();
    let mut e = env.clone();
    let mut reports = Vec::with_capacity(config.stages.len());
    for (index, stage) in config.stages.iter().enumerate() {
        let started = Instant::now();
        let mut warnings = Vec::new();
        let (ng, ne) = stage
            .apply(&g, &e, &mut warnings)
            .map_err(|source| PipelineError::Stage { index, kind: stage.kind(), source })?;
        for w in &warnings {
            log::debug!("{}: {w}", stage.kind());
        }
        reports.push(StageReport { kind: stage.kind(), elapsed: started.elapsed(), warnings });
        g = ng;
        e = ne;
    }
    Ok(PipelineOutput { graph: g, env: e, stages: reports })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterError {
    pub node: Option<NodeId>,
    pub detail: String,
}

/// Model-specific exporter. It walks the model once; when `mode` is global
/// the global placements are accumulated during that same walk.
pub trait ExportAdapter: Send + Sync {
    fn model_kind(&self) -> &str;
    fn export(&self, state: &dyn Any, mode: TransformMode) -> Result<ExchangeGraph, AdapterError>;
}

#[derive(Default)]
pub struct AdapterRegistry {
    adapters: BTreeMap<String, Box<dyn ExportAdapter>>,
}

impl AdapterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, adapter: Box<dyn ExportAdapter>) {
        self.adapters.insert(adapter.model_kind().to_string(), adapter);
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.adapters.keys().map(String::as_str)
    }

    /// Exports `state` and checks that the result is a valid graph.
    pub fn export_to_eg(&self, kind: &str, state: &dyn Any, mode: TransformMode) -> Result<ExchangeGraph, PipelineError> {
        let adapter = self.adapters.get(kind).ok_or_else(|| PipelineError::NoAdapter(kind.to_string()))?;
        let failure = |node, detail| PipelineError::AdapterFailure { kind: kind.to_string(), node, detail };
        let g = adapter.export(state, mode).map_err(|e| failure(e.node, e.detail))?;
        let report = g.validate();
        if !report.is_empty() {
            return Err(failure(None, format!("exported graph is invalid: {report}")));
        }
        if g.transform_mode() != mode {
            return Err(failure(None, format!("asked for {} transforms, got {}", mode.name(), g.transform_mode().name())));
        }
        Ok(g)
    }
}
