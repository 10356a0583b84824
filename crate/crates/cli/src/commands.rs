use std::io::Write;
use std::net::TcpListener;
use std::path::Path;
use std::time::Duration;

use fspm_bridge_core::graph::canonical_diff;
use fspm_bridge_core::pipeline::{run_pipeline, Env, PipelineConfig, PipelineDirection};
use fspm_bridge_core::protocol::{client_run, ClientOptions, Roster, RunReport, ServerOptions, TargetModel};
use fspm_bridge_core::toy::{growth_export, GrowthState, StatusModel, WaterModel, WaterParams};
use fspm_bridge_core::xeg::{parse_xeg_with, serialize_xeg, ParseOptions, XegError};
use fspm_bridge_core::{ExchangeGraph, PropertyValue, TransformMode};
use serde_json::json;

use crate::{Exit, ModelKind};

/// Environment sent with step `k`: a temperature in °C rising one degree per
/// step from 15.
pub fn step_env(step: u64) -> Env {
    Env::from([("temperature".to_string(), PropertyValue::Double(15.0 + step as f64))])
}

fn read_text(path: &Path) -> Result<String, Exit> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        Exit::Io
    })
}

fn parse_graph(path: &Path, lenient: bool) -> Result<Result<ExchangeGraph, XegError>, Exit> {
    let text = read_text(path)?;
    Ok(parse_xeg_with(&text, ParseOptions { lenient }).map(|p| {
        for w in &p.warnings {
            eprintln!("warning: {}: {w}", path.display());
        }
        p.graph
    }))
}

fn read_graph(path: &Path, lenient: bool) -> Result<ExchangeGraph, Exit> {
    parse_graph(path, lenient)?.map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        Exit::Io
    })
}

pub fn write_output(path: &Path, text: &str) -> Result<(), Exit> {
    let res = if path.as_os_str() == "-" {
        std::io::stdout().write_all(text.as_bytes())
    } else {
        std::fs::write(path, text)
    };
    res.map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        Exit::Io
    })
}

fn serialize(g: &ExchangeGraph) -> Result<String, Exit> {
    serialize_xeg(g).map_err(|e| {
        eprintln!("error: {e}");
        Exit::Runtime
    })
}

fn finish(r: Result<Exit, Exit>) -> Exit {
    r.unwrap_or_else(|e| e)
}

pub fn convert(input: &Path, pipeline: Option<&Path>, output: &Path, lenient: bool) -> Exit {
    finish((|| {
        let g = read_graph(input, lenient)?;
        let config = match pipeline {
            Some(p) => PipelineConfig::from_file(p).map_err(|e| {
                eprintln!("error: {}: {e}", p.display());
                Exit::Io
            })?,
            None => PipelineConfig::new(PipelineDirection::Import, Vec::new()),
        };
        let out = run_pipeline(&g, &Env::new(), &config).map_err(|e| {
            eprintln!("error: {e}");
            Exit::Runtime
        })?;
        for (stage, w) in out.warnings() {
            eprintln!("warning: {stage}: {w}");
        }
        write_output(output, &serialize(&out.graph)?)?;
        Ok(Exit::Ok)
    })())
}

/// Prints one violation per line on stdout.
pub fn validate(path: &Path, lenient: bool) -> Exit {
    finish((|| match parse_graph(path, lenient)? {
        Ok(_) => Ok(Exit::Ok),
        Err(XegError::Semantic(report)) => {
            for v in &report.violations {
                println!("{v}");
            }
            Ok(Exit::Difference)
        }
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            Ok(Exit::Io)
        }
    })())
}

pub fn diff(a: &Path, b: &Path, tol: f64, lenient: bool) -> Exit {
    if !(tol >= 0.0 && tol.is_finite()) {
        eprintln!("error: --tol must be a finite non-negative number");
        return Exit::Usage;
    }
    finish((|| {
        let (ga, gb) = (read_graph(a, lenient)?, read_graph(b, lenient)?);
        match canonical_diff(&ga, &gb, tol) {
            Ok(None) => Ok(Exit::Ok),
            Ok(Some(d)) => {
                println!("{d}");
                Ok(Exit::Difference)
            }
            Err(e) => {
                eprintln!("error: {e}");
                Ok(Exit::Runtime)
            }
        }
    })())
}

pub fn serve(bind: &str, port: u16, model: ModelKind, base: f64, loss: f64, once: bool) -> Exit {
    let Some(params) = WaterParams::new(base, loss) else {
        eprintln!("error: pressures must be finite and --loss-per-node non-negative");
        return Exit::Usage;
    };
    let listener = match TcpListener::bind((bind, port)) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {bind}:{port}: {e}");
            return Exit::Runtime;
        }
    };
    let bound = listener.local_addr().map(|a| a.port()).unwrap_or(port);
    println!("{bound}");
    let _ = std::io::stdout().flush();
    let mut water = WaterModel { params };
    let mut status = StatusModel;
    let target: &mut dyn TargetModel = match model {
        ModelKind::Water => &mut water,
        ModelKind::Status => &mut status,
    };
    let opts = ServerOptions { max_sessions: once.then_some(1) };
    match fspm_bridge_core::protocol::serve(&listener, target, &opts) {
        Ok(_) => Exit::Ok,
        Err(e) => {
            eprintln!("error: {e}");
            Exit::Runtime
        }
    }
}

pub fn report_json(report: &RunReport) -> serde_json::Value {
    let records: Vec<_> = report
        .records
        .iter()
        .map(|r| {
            json!({
                "step": r.step,
                "server": r.server,
                "latency_ms": r.latency.as_secs_f64() * 1e3,
                "status": r.status,
            })
        })
        .collect();
    json!({ "steps": report.steps, "records": records, "warnings": report.warnings })
}

pub fn run(roster: &Path, steps: u64, seed: u64, out: &Path, timeout_s: u64) -> Exit {
    finish((|| {
        let roster = Roster::from_file(roster).map_err(|e| {
            eprintln!("error: {e}");
            Exit::Io
        })?;
        let mut state = GrowthState::new(seed);
        let opts = ClientOptions { timeout: Duration::from_secs(timeout_s) };
        let report = client_run(&roster, &mut state, steps, &step_env, &opts).map_err(|e| {
            eprintln!("error: {e}");
            Exit::Runtime
        })?;
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        write_output(out, &serialize(&growth_export(&state, TransformMode::Local))?)?;
        println!("{}", report_json(&report));
        Ok(Exit::Ok)
    })())
}
