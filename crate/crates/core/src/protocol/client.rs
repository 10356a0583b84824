use std::io::BufReader;
use std::net::{TcpStream, ToSocketAddrs};
use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::frame::{read_frame, write_frame, FrameError};
use super::{ErrorCode, Message, SessionMode};
use crate::graph::ExchangeGraph;
use crate::pipeline::{run_pipeline, Env, PipelineConfig, PipelineError};
use crate::xml::parse_document;

/// The model driving a run. It is the only holder of plant state.
pub trait SourceModel {
    fn advance(&mut self) -> Result<(), String>;
    fn export(&self) -> Result<ExchangeGraph, String>;
    /// Replaces the model's state with a graph sent back by a retroactive server.
    fn install(&mut self, graph: &ExchangeGraph) -> Result<(), String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerEntry {
    pub address: String,
    pub port: u16,
    pub mode: SessionMode,
    /// Run on the graph before it is sent.
    pub import: PipelineConfig,
    /// Run on a graph the server sends back.
    pub export: PipelineConfig,
}

impl ServerEntry {
    pub fn label(&self) -> String {
        format!("{}:{}", self.address, self.port)
    }
}

/// Servers in the order they are visited within a step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Roster {
    pub servers: Vec<ServerEntry>,
}

impl Roster {
    /// `<roster><server address port mode [import] [export]/>…</roster>`, with
    /// pipeline paths relative to the roster file.
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_xml(&text, &|rel| PipelineConfig::from_file(&base.join(rel)).map_err(|e| e.to_string()))
    }

    pub fn from_xml(text: &str, load: &dyn Fn(&str) -> Result<PipelineConfig, String>) -> Result<Self, String> {
        let root = parse_document(text).map_err(|e| e.to_string())?;
        if root.name != "roster" {
            return Err(format!("{}: expected <roster>", root.at()));
        }
        let mut servers = Vec::new();
        for el in &root.children {
            if el.name != "server" {
                return Err(format!("{}: unexpected element <{}>", el.at(), el.name));
            }
            let port = el.require("port")?;
            let mode = el.require("mode")?;
            let pipeline = |attr: &str| match el.attr(attr) {
                Some(p) => load(p),
                None => Ok(PipelineConfig::default()),
            };
            servers.push(ServerEntry {
                address: el.require("address")?.to_string(),
                port: port.parse().map_err(|_| format!("{}: bad port {port:?}", el.at()))?,
                mode: SessionMode::from_name(mode).ok_or_else(|| format!("{}: bad mode {mode:?}", el.at()))?,
                import: pipeline("import")?,
                export: pipeline("export")?,
            });
        }
        if servers.is_empty() {
            return Err("roster lists no servers".into());
        }
        Ok(Roster { servers })
    }
}

#[derive(Debug, Clone)]
pub struct ClientOptions {
    /// Limit on connecting and on waiting for each response.
    pub timeout: Duration,
}

impl Default for ClientOptions {
    fn default() -> Self {
        ClientOptions { timeout: Duration::from_secs(30) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub server: String,
    pub latency: Duration,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub steps: u64,
    pub records: Vec<StepRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot connect to {server}: {detail}")]
    ConnectRefused { server: String, detail: String },
    #[error("{server} rejected {mode} mode: {detail}")]
    ModeRejected { server: String, mode: SessionMode, detail: String },
    #[error("{server} answered step {got}, expected {expected}")]
    StepIndexMismatch { server: String, expected: u64, got: u64 },
    #[error("{server} reported {code}: {detail}")]
    ServerError { server: String, code: ErrorCode, detail: String },
    #[error("{server} did not answer within {timeout:?}")]
    Timeout { server: String, timeout: Duration },
    #[error("{server}: {detail}")]
    Unexpected { server: String, detail: String },
    #[error("{server}: {source}")]
    Frame { server: String, source: FrameError },
    #[error("{server}: {source}")]
    Pipeline { server: String, source: PipelineError },
    #[error("source model: {0}")]
    Source(String),
}

struct Connection {
    label: String,
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    timeout: Duration,
    open: bool,
}

impl Connection {
    fn open(entry: &ServerEntry, timeout: Duration) -> Result<Self, ClientError> {
        let label = entry.label();
        let refused = |detail: String| ClientError::ConnectRefused { server: label.clone(), detail };
        let addrs = (entry.address.as_str(), entry.port).to_socket_addrs().map_err(|e| refused(e.to_string()))?;
        let mut last = "address resolved to nothing".to_string();
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, timeout) {
                Ok(stream) => {
                    stream.set_read_timeout(Some(timeout)).map_err(|e| refused(e.to_string()))?;
                    stream.set_write_timeout(Some(timeout)).map_err(|e| refused(e.to_string()))?;
                    stream.set_nodelay(true).ok();
                    let reader = BufReader::new(stream.try_clone().map_err(|e| refused(e.to_string()))?);
                    return Ok(Connection { label, reader, writer: stream, timeout, open: true });
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(refused(last))
    }

    fn frame_error(&self, source: FrameError) -> ClientError {
        if source.is_timeout() {
            ClientError::Timeout { server: self.label.clone(), timeout: self.timeout }
        } else {
            ClientError::Frame { server: self.label.clone(), source }
        }
    }

    fn call(&mut self, m: &Message) -> Result<Message, ClientError> {
        write_frame(&mut self.writer, m).map_err(|e| self.frame_error(e))?;
        match read_frame(&mut self.reader) {
            Ok(Some(reply)) => Ok(reply),
            Ok(None) => {
                self.open = false;
                Err(ClientError::Unexpected { server: self.label.clone(), detail: "connection closed".into() })
            }
            Err(e) => Err(self.frame_error(e)),
        }
    }

    fn server_error(&self, code: ErrorCode, detail: String) -> ClientError {
        ClientError::ServerError { server: self.label.clone(), code, detail }
    }

    fn unexpected(&self, m: &Message) -> ClientError {
        ClientError::Unexpected { server: self.label.clone(), detail: format!("unexpected {} message", m.kind()) }
    }

    fn handshake(&mut self, mode: SessionMode) -> Result<(), ClientError> {
        match self.call(&Message::Hello { mode })? {
            Message::HelloOk { mode: m } if m == mode => Ok(()),
            Message::Error { code: ErrorCode::ModeRejected, detail } => {
                Err(ClientError::ModeRejected { server: self.label.clone(), mode, detail })
            }
            Message::Error { code, detail } => Err(self.server_error(code, detail)),
            other => Err(self.unexpected(&other)),
        }
    }

    /// Sends `bye` and waits briefly for the server to close the socket.
    fn close(&mut self) {
        if !self.open {
            return;
        }
        self.open = false;
        if write_frame(&mut self.writer, &Message::Bye).is_ok() {
            self.reader.get_ref().set_read_timeout(Some(Duration::from_secs(1))).ok();
            let _ = read_frame(&mut self.reader);
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        self.close();
    }
}

/// Drives `source` for `n_steps` lockstep steps. Within a step the servers
/// are visited in roster order; a retroactive server's reply is installed
/// into the source before the next server sees the state.
pub fn client_run(
    roster: &Roster,
    source: &mut dyn SourceModel,
    n_steps: u64,
    env_schedule: &dyn Fn(u64) -> Env,
    opts: &ClientOptions,
) -> Result<RunReport, ClientError> {
    let mut conns = Vec::with_capacity(roster.servers.len());
    for entry in &roster.servers {
        let mut c = Connection::open(entry, opts.timeout)?;
        c.handshake(entry.mode)?;
        conns.push(c);
    }
    let mut report = RunReport::default();
    for step in 0..n_steps {
        source.advance().map_err(ClientError::Source)?;
        let env = env_schedule(step);
        for (entry, conn) in roster.servers.iter().zip(conns.iter_mut()) {
            let pipeline_err = |source| ClientError::Pipeline { server: entry.label(), source };
            let graph = source.export().map_err(ClientError::Source)?;
            let sent = run_pipeline(&graph, &env, &entry.import).map_err(pipeline_err)?;
            report.warnings.extend(sent.warnings().map(|(k, w)| format!("{}: {k}: {w}", entry.label())));
            let started = Instant::now();
            let reply = conn.call(&Message::Step { index: step, env: sent.env.clone(), graph: sent.graph })?;
            let latency = started.elapsed();
            let status = match (entry.mode, reply) {
                (_, Message::Error { code, detail }) => return Err(conn.server_error(code, detail)),
                (SessionMode::NonRetroactive, Message::StepOk { index, status }) => {
                    check_index(conn, step, index)?;
                    status
                }
                (SessionMode::Retroactive, Message::StepUpdate { index, graph }) => {
                    check_index(conn, step, index)?;
                    let back = run_pipeline(&graph, &sent.env, &entry.export).map_err(pipeline_err)?;
                    report.warnings.extend(back.warnings().map(|(k, w)| format!("{}: {k}: {w}", entry.label())));
                    source.install(&back.graph).map_err(ClientError::Source)?;
                    let (n, m) = back.graph.census();
                    format!("updated: {n} nodes, {m} edges")
                }
                (_, other) => return Err(conn.unexpected(&other)),
            };
            log::info!("step {step} at {}: {status} in {latency:?}", entry.label());
            report.records.push(StepRecord { step, server: entry.label(), latency, status });
        }
        report.steps += 1;
    }
    for c in &mut conns {
        c.close();
    }
    Ok(report)
}

fn check_index(conn: &Connection, expected: u64, got: u64) -> Result<(), ClientError> {
    if expected != got {
        return Err(ClientError::StepIndexMismatch { server: conn.label.clone(), expected, got });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roster_from_xml() {
        let load = |p: &str| -> Result<PipelineConfig, String> {
            if p == "a.xml" {
                Ok(PipelineConfig::default())
            } else {
                Err(format!("missing {p}"))
            }
        };
        let r = Roster::from_xml(
            r#"<roster>
  <server address="127.0.0.1" port="7001" mode="retroactive" import="a.xml" export="a.xml"/>
  <server address="localhost" port="7002" mode="non_retroactive"/>
</roster>"#,
            &load,
        )
        .unwrap();
        assert_eq!(r.servers.len(), 2);
        assert_eq!(r.servers[1].mode, SessionMode::NonRetroactive);
        assert_eq!(r.servers[0].label(), "127.0.0.1:7001");
        assert!(Roster::from_xml("<roster/>", &load).is_err());
        assert!(Roster::from_xml(r#"<roster><server address="h" port="x" mode="retroactive"/></roster>"#, &load).is_err());
        assert!(Roster::from_xml(r#"<roster><server address="h" port="1" mode="retroactive" import="b.xml"/></roster>"#, &load).is_err());
    }

    #[test]
    fn refused_connection() {
        // Bind then drop to get a port with nothing listening.
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let roster = Roster {
            servers: vec![ServerEntry {
                address: "127.0.0.1".into(),
                port,
                mode: SessionMode::Retroactive,
                import: PipelineConfig::default(),
                export: PipelineConfig::default(),
            }],
        };
        struct Nothing;
        impl SourceModel for Nothing {
            fn advance(&mut self) -> Result<(), String> {
                Ok(())
            }
            fn export(&self) -> Result<ExchangeGraph, String> {
                Err("unused".into())
            }
            fn install(&mut self, _: &ExchangeGraph) -> Result<(), String> {
                Ok(())
            }
        }
        let err = client_run(&roster, &mut Nothing, 1, &|_| Env::new(), &ClientOptions::default()).unwrap_err();
        assert!(matches!(err, ClientError::ConnectRefused { .. }));
    }
}
