//! Lockstep exchange between one source-model client and one or more
//! target-model servers.
//!
//! On the wire every message is a frame: a 4-byte big-endian payload length
//! followed by that many bytes of UTF-8 XML holding one `<message>` element.

mod client;
mod frame;
mod server;

use std::fmt;

use thiserror::Error;

use crate::graph::{ExchangeGraph, ValueKind};
use crate::pipeline::Env;
use crate::xeg::{decode_value, encode_value, graph_from_element, write_graph, ParseOptions};
use crate::xml::{parse_document, Element, XmlWriter};

pub use client::{client_run, ClientError, ClientOptions, Roster, RunReport, ServerEntry, SourceModel, StepRecord};
pub use frame::{decode_frame, encode_frame, read_frame, write_frame, FrameError, MAX_FRAME_LEN};
pub use server::{serve, serve_session, ServerOptions, SessionSummary, StepOutcome, TargetModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SessionMode {
    /// The server returns updated plant information.
    Retroactive,
    /// The server returns status text only.
    NonRetroactive,
}

impl SessionMode {
    pub fn name(self) -> &'static str {
        match self {
            SessionMode::Retroactive => "retroactive",
            SessionMode::NonRetroactive => "non_retroactive",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "retroactive" => Some(SessionMode::Retroactive),
            "non_retroactive" => Some(SessionMode::NonRetroactive),
            _ => None,
        }
    }
}

impl fmt::Display for SessionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    BadHandshake,
    ModeRejected,
    OutOfOrderStep,
    HandlerFailure,
    MalformedMessage,
    /// A code this side does not know, kept verbatim.
    Other(String),
}

impl ErrorCode {
    pub fn name(&self) -> &str {
        match self {
            ErrorCode::BadHandshake => "BadHandshake",
            ErrorCode::ModeRejected => "ModeRejected",
            ErrorCode::OutOfOrderStep => "OutOfOrderStep",
            ErrorCode::HandlerFailure => "HandlerFailure",
            ErrorCode::MalformedMessage => "MalformedMessage",
            ErrorCode::Other(s) => s,
        }
    }

    pub fn from_name(s: &str) -> ErrorCode {
        match s {
            "BadHandshake" => ErrorCode::BadHandshake,
            "ModeRejected" => ErrorCode::ModeRejected,
            "OutOfOrderStep" => ErrorCode::OutOfOrderStep,
            "HandlerFailure" => ErrorCode::HandlerFailure,
            "MalformedMessage" => ErrorCode::MalformedMessage,
            other => ErrorCode::Other(other.to_string()),
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello { mode: SessionMode },
    HelloOk { mode: SessionMode },
    Step { index: u64, env: Env, graph: ExchangeGraph },
    StepOk { index: u64, status: String },
    StepUpdate { index: u64, graph: ExchangeGraph },
    Error { code: ErrorCode, detail: String },
    Bye,
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::HelloOk { .. } => "hello_ok",
            Message::Step { .. } => "step",
            Message::StepOk { .. } => "step_ok",
            Message::StepUpdate { .. } => "step_update",
            Message::Error { .. } => "error",
            Message::Bye => "bye",
        }
    }

    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        Message::Error { code, detail: detail.into() }
    }

    /// XML text of the message. Fails only when an embedded graph is invalid.
    pub fn to_xml(&self) -> Result<String, MessageError> {
        let mut w = XmlWriter::new();
        let kind = ("kind", self.kind().to_string());
        match self {
            Message::Hello { mode } | Message::HelloOk { mode } => {
                w.empty("message", &[kind, ("mode", mode.name().to_string())]);
            }
            Message::Step { index, env, graph } => {
                w.open("message", &[kind, ("index", index.to_string())]);
                if env.is_empty() {
                    w.empty("env", &[]);
                } else {
                    w.open("env", &[]);
                    for (name, v) in env {
                        let (tag, text) = encode_value(v);
                        w.empty("var", &[("name", name.clone()), ("type", tag.to_string()), ("value", text)]);
                    }
                    w.close("env");
                }
                write_graph(&mut w, graph).map_err(|e| MessageError(e.to_string()))?;
                w.close("message");
            }
            Message::StepOk { index, status } => {
                w.empty("message", &[kind, ("index", index.to_string()), ("status", status.clone())]);
            }
            Message::StepUpdate { index, graph } => {
                w.open("message", &[kind, ("index", index.to_string())]);
                write_graph(&mut w, graph).map_err(|e| MessageError(e.to_string()))?;
                w.close("message");
            }
            Message::Error { code, detail } => {
                w.empty("message", &[kind, ("code", code.name().to_string()), ("detail", detail.clone())]);
            }
            Message::Bye => w.empty("message", &[kind]),
        }
        Ok(w.finish())
    }

    pub fn from_xml(text: &str) -> Result<Self, MessageError> {
        let el = parse_document(text).map_err(|e| MessageError(e.to_string()))?;
        Self::from_element(&el)
    }

    fn from_element(el: &Element) -> Result<Self, MessageError> {
        let err = |m: String| MessageError(m);
        if el.name != "message" {
            return Err(err(format!("expected <message>, found <{}>", el.name)));
        }
        let kind = el.require("kind").map_err(err)?;
        let allowed: &[&str] = match kind {
            "hello" | "hello_ok" => &["kind", "mode"],
            "step" | "step_update" => &["kind", "index"],
            "step_ok" => &["kind", "index", "status"],
            "error" => &["kind", "code", "detail"],
            "bye" => &["kind"],
            other => return Err(err(format!("unknown message kind {other:?}"))),
        };
        if let Some(m) = el.unknown_attrs(allowed).into_iter().next() {
            return Err(err(m));
        }
        let index = || -> Result<u64, MessageError> {
            let s = el.require("index").map_err(err)?;
            s.parse().map_err(|_| err(format!("bad step index {s:?}")))
        };
        let mode = || -> Result<SessionMode, MessageError> {
            let s = el.require("mode").map_err(err)?;
            SessionMode::from_name(s).ok_or_else(|| err(format!("unknown mode {s:?}")))
        };
        let graph = |el: &Element| -> Result<ExchangeGraph, MessageError> {
            let g = el.children_named("graph").next().ok_or_else(|| err("message carries no <graph>".into()))?;
            let mut warnings = Vec::new();
            graph_from_element(g, ParseOptions::default(), &mut warnings).map_err(|e| err(e.to_string()))
        };
        let expect_children = |names: &[&str]| -> Result<(), MessageError> {
            let found: Vec<&str> = el.children.iter().map(|c| c.name.as_str()).collect();
            if found != names {
                return Err(err(format!("{kind} message must contain {names:?}, found {found:?}")));
            }
            Ok(())
        };
        Ok(match kind {
            "hello" => {
                expect_children(&[])?;
                Message::Hello { mode: mode()? }
            }
            "hello_ok" => {
                expect_children(&[])?;
                Message::HelloOk { mode: mode()? }
            }
            "step" => {
                expect_children(&["env", "graph"])?;
                let mut env = Env::new();
                for v in &el.children[0].children {
                    if v.name != "var" {
                        return Err(err(format!("unexpected <{}> in <env>", v.name)));
                    }
                    let name = v.require("name").map_err(err)?;
                    let tag = v.require("type").map_err(err)?;
                    let kind = ValueKind::from_tag(tag).ok_or_else(|| err(format!("unknown type {tag:?}")))?;
                    let value = decode_value(kind, v.require("value").map_err(err)?).map_err(err)?;
                    if env.insert(name.to_string(), value).is_some() {
                        return Err(err(format!("env variable {name:?} given twice")));
                    }
                }
                Message::Step { index: index()?, env, graph: graph(el)? }
            }
            "step_ok" => {
                expect_children(&[])?;
                Message::StepOk { index: index()?, status: el.require("status").map_err(err)?.to_string() }
            }
            "step_update" => {
                expect_children(&["graph"])?;
                Message::StepUpdate { index: index()?, graph: graph(el)? }
            }
            "error" => {
                expect_children(&[])?;
                Message::Error {
                    code: ErrorCode::from_name(el.require("code").map_err(err)?),
                    detail: el.attr("detail").unwrap_or_default().to_string(),
                }
            }
            _ => {
                expect_children(&[])?;
                Message::Bye
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("malformed message: {0}")]
pub struct MessageError(pub String);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeType, GraphEdge, GraphNode, PropertyValue};

    fn graph() -> ExchangeGraph {
        let mut g = ExchangeGraph::with_root(GraphNode::new(1, "plant", "Plant", 0)).unwrap();
        g.add_node(GraphNode::new(2, "m0", "Metamer", 1).with_property("color", "brown")).unwrap();
        g.add_node(GraphNode::new(3, "m1", "Metamer", 1)).unwrap();
        g.add_edge(GraphEdge::new(1, 2, EdgeType::Successor)).unwrap();
        g.add_edge(GraphEdge::new(2, 3, EdgeType::Branch)).unwrap();
        g
    }

    #[test]
    fn every_kind_round_trips() {
        let env = Env::from([("temperature".to_string(), PropertyValue::Float(212.0))]);
        let all = [
            Message::Hello { mode: SessionMode::Retroactive },
            Message::HelloOk { mode: SessionMode::NonRetroactive },
            Message::Step { index: 3, env, graph: graph() },
            Message::Step { index: 0, env: Env::new(), graph: graph() },
            Message::StepOk { index: 7, status: "ok: \"5\" <nodes>".into() },
            Message::StepUpdate { index: 1, graph: graph() },
            Message::error(ErrorCode::OutOfOrderStep, "expected 4, got 6"),
            Message::error(ErrorCode::Other("Custom".into()), ""),
            Message::Bye,
        ];
        for m in all {
            let xml = m.to_xml().unwrap();
            assert_eq!(Message::from_xml(&xml).unwrap(), m, "{xml}");
        }
    }

    #[test]
    fn bye_text() {
        assert_eq!(Message::Bye.to_xml().unwrap(), "<message kind=\"bye\"/>\n");
    }

    #[test]
    fn malformed() {
        for bad in [
            "<message/>",
            "<message kind=\"dance\"/>",
            "<message kind=\"hello\" mode=\"sometimes\"/>",
            "<message kind=\"step\" index=\"-1\"><env/><graph root=\"1\" version=\"1.0\"><node id=\"1\" name=\"r\" type=\"P\" scale=\"0\"/></graph></message>",
            "<message kind=\"step\" index=\"1\"/>",
            "<message kind=\"bye\" extra=\"1\"/>",
            "<msg kind=\"bye\"/>",
            "not xml",
        ] {
            assert!(Message::from_xml(bad).is_err(), "{bad}");
        }
    }
}
