//! The retroactive loop end to end: a water server in a child process, the
//! growth model as client, and an in-process offline run as the oracle.

use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use fspm_bridge_core::graph::canonical_diff;
use fspm_bridge_core::pipeline::{run_pipeline, PipelineConfig};
use fspm_bridge_core::protocol::{client_run, ClientOptions, Roster, ServerEntry, SessionMode};
use fspm_bridge_core::toy::{builtin_pipeline, growth_export, water_handler, GrowthState, WaterParams};
use fspm_bridge_core::xeg::{parse_xeg, serialize_xeg};
use fspm_bridge_core::TransformMode;

use crate::commands::{step_env, write_output};
use crate::Exit;

pub struct DemoOptions {
    pub steps: u64,
    pub seed: u64,
    pub base_pressure: f64,
    pub loss_per_node: f64,
    pub connect_port: Option<u16>,
    pub out: Option<PathBuf>,
    pub timeout_s: u64,
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn_server(o: &DemoOptions) -> Result<(Server, u16), String> {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let child = Command::new(exe)
        .args(["serve", "--port", "0", "--model", "water", "--once"])
        .arg(format!("--base-pressure={}", o.base_pressure))
        .arg(format!("--loss-per-node={}", o.loss_per_node))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| format!("cannot start server: {e}"))?;
    let mut server = Server(child);
    let stdout = server.0.stdout.take().expect("piped");
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line).map_err(|e| e.to_string())?;
    let port = line.trim().parse().map_err(|_| format!("server did not report a port (got {line:?})"))?;
    Ok((server, port))
}

/// The same exchange without a network: import, handler, export, install.
fn offline(o: &DemoOptions, params: &WaterParams, import: &PipelineConfig, export: &PipelineConfig) -> Result<GrowthState, String> {
    let mut state = GrowthState::new(o.seed);
    for step in 0..o.steps {
        state.grow();
        let sent = run_pipeline(&growth_export(&state, TransformMode::Local), &step_env(step), import)
            .map_err(|e| e.to_string())?;
        let wet = water_handler(sent.graph, params).map_err(|e| e.to_string())?;
        let back = run_pipeline(&wet, &sent.env, export).map_err(|e| e.to_string())?;
        state.install(&back.graph).map_err(|e| e.to_string())?;
    }
    Ok(state)
}

/// Every check the demo makes; the first failure is returned.
fn check(
    o: &DemoOptions,
    params: &WaterParams,
    live: &GrowthState,
    import: &PipelineConfig,
    export: &PipelineConfig,
) -> Result<String, String> {
    let g = growth_export(live, TransformMode::Local);
    let fresh = growth_export(&GrowthState::grown(o.seed, o.steps), TransformMode::Local);
    if g.census() != fresh.census() {
        return Err(format!("census {:?}, expected {:?}", g.census(), fresh.census()));
    }
    for m in &live.metamers {
        if m.color != "green" {
            return Err(format!("metamer {} is {:?}, expected green", m.index, m.color));
        }
        let expect = params.base_pressure - params.loss_per_node * f64::from(m.rank);
        if m.pressure != Some(expect) {
            return Err(format!("metamer {} pressure {:?}, expected {expect}", m.index, m.pressure));
        }
    }
    let bytes = serialize_xeg(&g).map_err(|e| e.to_string())?;
    let oracle = serialize_xeg(&growth_export(&offline(o, params, import, export)?, TransformMode::Local))
        .map_err(|e| e.to_string())?;
    if bytes != oracle {
        return Err("final plant differs from the offline run".into());
    }
    // The final plant survives a further trip through both pipelines.
    let parsed = parse_xeg(&bytes).map_err(|e| e.to_string())?;
    let env = step_env(o.steps);
    let there = run_pipeline(&parsed, &env, import).map_err(|e| e.to_string())?;
    let back = run_pipeline(&there.graph, &there.env, export).map_err(|e| e.to_string())?;
    if let Some(d) = canonical_diff(&g, &back.graph, 1e-9).map_err(|e| e.to_string())? {
        return Err(format!("pipeline round trip changed the plant: {d}"));
    }
    let (n, m) = g.census();
    Ok(format!("steps={} metamers={} nodes={n} edges={m}", o.steps, live.metamers.len()))
}

pub fn demo_roundtrip(o: &DemoOptions) -> Exit {
    let Some(params) = WaterParams::new(o.base_pressure, o.loss_per_node) else {
        eprintln!("error: pressures must be finite and --loss-per-node non-negative");
        return Exit::Usage;
    };
    let (import, export) = match (builtin_pipeline("water_import.xml"), builtin_pipeline("water_export.xml")) {
        (Ok(i), Ok(e)) => (i, e),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("error: {e}");
            return Exit::Runtime;
        }
    };
    let (_server, port) = match o.connect_port {
        Some(p) => (None, p),
        None => match spawn_server(o) {
            Ok((s, p)) => (Some(s), p),
            Err(e) => {
                eprintln!("error: {e}");
                return Exit::Runtime;
            }
        },
    };
    let roster = Roster {
        servers: vec![ServerEntry {
            address: "127.0.0.1".into(),
            port,
            mode: SessionMode::Retroactive,
            import: import.clone(),
            export: export.clone(),
        }],
    };
    let mut live = GrowthState::new(o.seed);
    let opts = ClientOptions { timeout: Duration::from_secs(o.timeout_s) };
    if let Err(e) = client_run(&roster, &mut live, o.steps, &step_env, &opts) {
        eprintln!("error: {e}");
        return Exit::Runtime;
    }
    if let Some(path) = &o.out {
        match serialize_xeg(&growth_export(&live, TransformMode::Local)) {
            Ok(text) => {
                if let Err(code) = write_output(path, &text) {
                    return code;
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return Exit::Runtime;
            }
        }
    }
    match check(o, &params, &live, &import, &export) {
        Ok(summary) => {
            println!("PASS demo-roundtrip {summary}");
            Exit::Ok
        }
        Err(why) => {
            println!("FAIL demo-roundtrip {why}");
            Exit::Difference
        }
    }
}
