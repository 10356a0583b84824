use std::io::{self, BufReader, Read, Write};
use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};

use super::frame::{read_frame, write_frame, FrameError};
use super::{ErrorCode, Message, SessionMode};
use crate::graph::ExchangeGraph;
use crate::pipeline::Env;

/// What a target model answers to one step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Status(String),
    Updated(ExchangeGraph),
}

/// A target model behind a server. Calls arrive one at a time.
pub trait TargetModel {
    fn supports(&self, mode: SessionMode) -> bool;
    fn step(&mut self, index: u64, graph: ExchangeGraph, env: &Env) -> Result<StepOutcome, String>;
}

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    /// Stop accepting after this many sessions.
    pub max_sessions: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionSummary {
    pub mode: Option<SessionMode>,
    pub steps: u64,
    pub errors: Vec<ErrorCode>,
    pub said_bye: bool,
}

struct Session<'a, W: Write> {
    out: W,
    model: &'a mut dyn TargetModel,
    summary: SessionSummary,
}

impl<W: Write> Session<'_, W> {
    fn reply(&mut self, m: &Message) -> Result<(), FrameError> {
        if let Message::Error { code, detail } = m {
            log::warn!("replying {code}: {detail}");
            self.summary.errors.push(code.clone());
        }
        write_frame(&mut self.out, m)
    }

    fn fail(&mut self, code: ErrorCode, detail: String) -> Result<(), FrameError> {
        self.reply(&Message::Error { code, detail })
    }

    fn step(&mut self, mode: SessionMode, index: u64, env: Env, graph: ExchangeGraph) -> Result<(), FrameError> {
        if index != self.summary.steps {
            let detail = format!("expected step {}, got {index}", self.summary.steps);
            return self.fail(ErrorCode::OutOfOrderStep, detail);
        }
        let outcome = catch_unwind(AssertUnwindSafe(|| self.model.step(index, graph, &env)))
            .unwrap_or_else(|_| Err("handler panicked".to_string()));
        let reply = match (mode, outcome) {
            (_, Err(e)) => return self.fail(ErrorCode::HandlerFailure, e),
            (SessionMode::NonRetroactive, Ok(StepOutcome::Status(status))) => Message::StepOk { index, status },
            (SessionMode::Retroactive, Ok(StepOutcome::Updated(graph))) => Message::StepUpdate { index, graph },
            (mode, Ok(_)) => {
                return self.fail(ErrorCode::HandlerFailure, format!("handler answered out of {mode} mode"));
            }
        };
        self.summary.steps += 1;
        self.reply(&reply)
    }
}

/// Runs one client session to completion: until `bye`, end of stream, or an
/// unrecoverable framing error. Protocol violations are answered with error
/// messages and the session continues.
pub fn serve_session(
    input: impl Read,
    output: impl Write,
    model: &mut dyn TargetModel,
) -> Result<SessionSummary, FrameError> {
    let mut input = BufReader::new(input);
    let mut s = Session { out: output, model, summary: SessionSummary::default() };
    loop {
        let msg = match read_frame(&mut input) {
            Ok(Some(m)) => m,
            Ok(None) => break,
            Err(FrameError::Malformed(e)) => {
                s.fail(ErrorCode::MalformedMessage, e.0)?;
                continue;
            }
            Err(e @ FrameError::Oversize { .. }) => {
                // The payload cannot be skipped safely, so the session ends here.
                s.fail(ErrorCode::MalformedMessage, e.to_string())?;
                break;
            }
            Err(FrameError::Truncated { .. }) => break,
            Err(e) => return Err(e),
        };
        log::debug!("received {}", msg.kind());
        match (s.summary.mode, msg) {
            (_, Message::Bye) => {
                s.summary.said_bye = true;
                break;
            }
            (None, Message::Hello { mode }) => {
                if s.model.supports(mode) {
                    s.summary.mode = Some(mode);
                    s.reply(&Message::HelloOk { mode })?;
                } else {
                    s.fail(ErrorCode::ModeRejected, format!("this server does not run {mode} sessions"))?;
                }
            }
            (None, other) => s.fail(ErrorCode::BadHandshake, format!("expected hello, got {}", other.kind()))?,
            (Some(_), Message::Hello { .. }) => s.fail(ErrorCode::BadHandshake, "session already established".into())?,
            (Some(mode), Message::Step { index, env, graph }) => s.step(mode, index, env, graph)?,
            (Some(_), other) => {
                s.fail(ErrorCode::MalformedMessage, format!("a client does not send {}", other.kind()))?
            }
        }
    }
    Ok(s.summary)
}

/// Accepts sessions one after another on `listener`.
pub fn serve(listener: &TcpListener, model: &mut dyn TargetModel, opts: &ServerOptions) -> io::Result<usize> {
    let mut sessions = 0;
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_else(|_| "?".into());
        log::info!("session with {peer} opened");
        let reader = stream.try_clone()?;
        match serve_session(reader, &stream, model) {
            Ok(summary) => log::info!("session with {peer} closed after {} steps", summary.steps),
            Err(e) => log::warn!("session with {peer} aborted: {e}"),
        }
        sessions += 1;
        if opts.max_sessions.is_some_and(|m| sessions >= m) {
            break;
        }
    }
    Ok(sessions)
}
