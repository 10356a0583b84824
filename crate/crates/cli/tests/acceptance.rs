//! Acceptance checks, one line per criterion. Exits non-zero if any fails.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use fspm_bridge_core::geometry::{globalize, localize, surface_area, ArgRule, GeometrySignature};
use fspm_bridge_core::graph::{canonical_diff, canonical_equal, EdgeType, GraphEdge, GraphNode, PropertyValue};
use fspm_bridge_core::math::{compose_transforms, TransformOp};
use fspm_bridge_core::pipeline::{
    convert_env, decompose_scale, run_pipeline, upscale_properties, Aggregate, AggregateOp, ConvertDirection,
    DecompositionScheme, Env, PipelineConfig, UnitRule, UpscaleSpec,
};
use fspm_bridge_core::protocol::{
    client_run, decode_frame, encode_frame, read_frame, write_frame, ClientOptions, ErrorCode, Message, Roster,
    ServerEntry, SessionMode,
};
use fspm_bridge_core::toy::{builtin_file, builtin_pipeline, growth_export, GrowthState};
use fspm_bridge_core::xeg::{parse_xeg, serialize_xeg};
use fspm_bridge_core::{ExchangeGraph, NodeId, TransformMode, Vec3d};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_fspm-bridge");

type Outcome = Result<String, String>;

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Metamer count after `steps` growth steps: one per step plus one branch
/// for every main-shoot rank r with r % 3 == 2.
fn metamers_after(steps: u64) -> usize {
    (steps + (0..steps).filter(|r| r % 3 == 2).count() as u64) as usize
}

fn identity_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let import = builtin_pipeline("water_import.xml").map_err(err)?;
    let export = builtin_pipeline("water_export.xml").map_err(err)?;
    let env = Env::from([("temperature".to_string(), PropertyValue::Double(18.0))]);
    let mut cases: Vec<u64> = (0..12).map(|_| rng.random_range(0..=150)).collect();
    cases.push(150);
    let mut slowest = Duration::ZERO;
    for steps in &cases {
        let seed = rng.random();
        let started = Instant::now();
        let state = GrowthState::grown(seed, *steps);
        ensure(state.metamers.len() == metamers_after(*steps) && state.metamers.len() <= 200, || {
            format!("unexpected metamer count {}", state.metamers.len())
        })?;
        let sent = serialize_xeg(&growth_export(&state, TransformMode::Local)).map_err(err)?;
        let parsed = parse_xeg(&sent).map_err(err)?;
        let there = run_pipeline(&parsed, &env, &import).map_err(err)?;
        let back = run_pipeline(&there.graph, &there.env, &export).map_err(err)?;
        let received = serialize_xeg(&back.graph).map_err(err)?;
        let (a, b) = (parse_xeg(&sent).map_err(err)?, parse_xeg(&received).map_err(err)?);
        if let Some(d) = canonical_diff(&a, &b, 1e-9).map_err(err)? {
            return Err(format!("seed {seed}, {steps} steps: {d}"));
        }
        let t = started.elapsed();
        slowest = slowest.max(t);
        ensure(t < Duration::from_secs(5), || format!("{steps} steps took {t:?}"))?;
    }
    Ok(format!("{} cases up to 200 metamers, tol 1e-9, slowest {slowest:.2?}", cases.len()))
}

fn retroactive_loop() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let out = dir.path().join("final.xeg");
    let (base, loss) = (100.0, 2.5);
    let started = Instant::now();
    let o = Command::new(BIN)
        .args(["demo-roundtrip", "--steps", "5", "--seed", "11"])
        .arg(format!("--base-pressure={base}"))
        .arg(format!("--loss-per-node={loss}"))
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(err)?;
    let elapsed = started.elapsed();
    let stdout = String::from_utf8_lossy(&o.stdout).to_string();
    ensure(o.status.code() == Some(0) && stdout.starts_with("PASS"), || {
        format!("demo exited {:?}: {stdout}{}", o.status.code(), String::from_utf8_lossy(&o.stderr))
    })?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;

    // Independent look at the final plant.
    let g = parse_xeg(&std::fs::read_to_string(&out).map_err(err)?).map_err(err)?;
    let m = metamers_after(5);
    ensure(g.census() == (m + 1, m), || format!("census {:?}, expected ({}, {m})", g.census(), m + 1))?;
    let first = g.nodes().find(|n| n.name == "metamer_0").ok_or("no metamer_0")?.id;
    let mut depth = BTreeMap::from([(first, 0u32)]);
    let mut queue = vec![first];
    while let Some(id) = queue.pop() {
        for e in g.out_edges(id).filter(|e| matches!(e.etype, EdgeType::Successor | EdgeType::Branch)) {
            depth.insert(e.dst, depth[&id] + 1);
            queue.push(e.dst);
        }
    }
    for n in g.nodes().filter(|n| n.type_name == "Metamer") {
        ensure(n.property("color") == Some(&PropertyValue::from("green")), || format!("{} not green", n.name))?;
        let expect = base - loss * f64::from(depth[&n.id]);
        ensure(n.property("pressure") == Some(&PropertyValue::Double(expect)), || {
            format!("{} pressure {:?}, expected {expect}", n.name, n.property("pressure"))
        })?;
    }
    Ok(format!("5 steps, {m} metamers green, pressures exact, census unchanged, {elapsed:.2?} wall"))
}

fn decompose_upscale_inverse() -> Outcome {
    let scheme = DecompositionScheme::from_xml(builtin_file("metamer_scheme.xml").ok_or("no scheme")?).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut spec = UpscaleSpec::default();
    for (op, target) in [(AggregateOp::Sum, "load_sum"), (AggregateOp::Mean, "load_mean")] {
        spec.aggregates.push(Aggregate { field: "load".into(), op, target: target.into() });
    }
    for case in 0..1000 {
        let g = growth_export(&GrowthState::grown(rng.random(), rng.random_range(0..40)), TransformMode::Local);
        let mut fine = decompose_scale(&g, &scheme).map_err(err)?;
        let plain = upscale_properties(&fine, &scheme, &UpscaleSpec::default()).map_err(err)?.0;
        ensure(plain.census() == g.census(), || format!("case {case}: census {:?} vs {:?}", plain.census(), g.census()))?;
        if let Some(d) = canonical_diff(&g, &plain, 0.0).map_err(err)? {
            return Err(format!("case {case}: {d}"));
        }
        let parts: Vec<NodeId> = fine.nodes().filter(|n| n.scale == 2).map(|n| n.id).collect();
        for id in parts {
            let x: f64 = rng.random_range(-10.0..10.0);
            fine.node_mut(id).ok_or("part vanished")?.set_property("load", x);
        }
        let coarse = upscale_properties(&fine, &scheme, &spec).map_err(err)?.0;
        for m in coarse.nodes().filter(|n| n.type_name == "Metamer") {
            // Brute force: scan every edge for this composite's parts.
            let xs: Vec<f64> = fine
                .edges()
                .filter(|e| e.src == m.id && e.etype == EdgeType::Decomposition)
                .filter_map(|e| fine.node(e.dst)?.property("load")?.as_f64())
                .collect();
            let mut sum = 0.0;
            for x in &xs {
                sum += x;
            }
            let got = |f: &str| m.property(f).and_then(PropertyValue::as_f64).unwrap_or(f64::NAN);
            let scale = sum.abs().max(1.0);
            ensure(xs.len() == 3, || format!("case {case}: {} parts under {}", xs.len(), m.name))?;
            ensure((got("load_sum") - sum).abs() <= 1e-12 * scale, || format!("case {case}: sum {} vs {sum}", got("load_sum")))?;
            ensure((got("load_mean") - sum / 3.0).abs() <= 1e-12 * scale, || {
                format!("case {case}: mean {} vs {}", got("load_mean"), sum / 3.0)
            })?;
        }
    }
    Ok("1000 graphs: census and properties exact, sum/mean match brute force".into())
}

fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> [f64; 3] {
    [rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r)]
}

fn geometry_translation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 1000 {
        let (o, u, v) = (random_vec(&mut rng, 10.0), random_vec(&mut rng, 5.0), random_vec(&mut rng, 5.0));
        let c = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        let area = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        if area < 1e-6 {
            continue;
        }
        let add = |a: [f64; 3], b: [f64; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
        let corners = [o, add(o, u), add(add(o, u), v), add(o, v)];
        let sig = GeometrySignature::new(
            "Parallelogram",
            vec![("origin", PropertyValue::Vec3(o)), ("u", PropertyValue::Vec3(u)), ("v", PropertyValue::Vec3(v))],
        );
        for rule in [ArgRule::ParallelogramTri2, ArgRule::ParallelogramTri4] {
            let out = rule.apply(&sig, "TriangleSet").map_err(err)?;
            let a = surface_area(&out[0]).map_err(err)?;
            ensure((a - area).abs() <= 1e-9 * area, || format!("{}: area {a} vs {area}", rule.name()))?;
            let verts = out[0].arg("vertices").and_then(PropertyValue::as_list).ok_or("no vertices")?;
            let idx = out[0].arg("indices").and_then(PropertyValue::as_list).ok_or("no indices")?;
            let used: Vec<[f64; 3]> =
                idx.iter().map(|i| *i as usize * 3).map(|k| [verts[k], verts[k + 1], verts[k + 2]]).collect();
            for corner in corners {
                ensure(used.iter().any(|p| (0..3).all(|k| (p[k] - corner[k]).abs() <= 1e-12 * (1.0 + corner[k].abs()))), || {
                    format!("{}: corner {corner:?} lost", rule.name())
                })?;
            }
            // No vertex outside the corners except the tri4 centroid.
            let extra = verts.len() / 3 - 4;
            ensure(extra == usize::from(rule == ArgRule::ParallelogramTri4), || format!("{}: {extra} extra vertices", rule.name()))?;
        }
        checked += 1;
    }
    for chain in 0..200 {
        let mut g = ExchangeGraph::with_root(GraphNode::new(1, "root", "Plant", 0)).map_err(err)?;
        for k in 0..20u64 {
            let ops = [
                TransformOp::Rotation {
                    axis: Vec3d::from_array(random_vec(&mut rng, 1.0)),
                    angle_deg: rng.random_range(-180.0..180.0),
                },
                TransformOp::Scaling(Vec3d::new(
                    rng.random_range(0.5..2.0),
                    rng.random_range(0.5..2.0),
                    rng.random_range(0.5..2.0),
                )),
                TransformOp::Translation(Vec3d::from_array(random_vec(&mut rng, 3.0))),
            ];
            let local = compose_transforms(&ops).map_err(err)?;
            g.add_node(GraphNode::new(k + 2, "seg", "Metamer", 0).with_local(local)).map_err(err)?;
            g.add_edge(GraphEdge::new(k + 1, k + 2, EdgeType::Successor)).map_err(err)?;
        }
        let back = localize(&globalize(&g).map_err(err)?).map_err(err)?;
        if let Some(d) = canonical_diff(&g, &back, 1e-9).map_err(err)? {
            return Err(format!("chain {chain}: {d}"));
        }
    }
    Ok("1000 parallelograms x {tri2, tri4}: area rel 1e-9, corners kept; 200 chains of 20 round-trip at 1e-9".into())
}

fn unit_conversion() -> Outcome {
    let rule = UnitRule::celsius_to_fahrenheit("temperature");
    let fwd = |c: f64| rule.apply(&PropertyValue::Double(c), ConvertDirection::Forward).map_err(err);
    ensure(fwd(100.0)? == PropertyValue::Float(212.0), || "100 C is not 212 F".into())?;
    ensure(fwd(0.0)? == PropertyValue::Float(32.0), || "0 C is not 32 F".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let c: f64 = rng.random_range(-60.0..60.0);
        let env = Env::from([("temperature".to_string(), PropertyValue::Double(c))]);
        let (f, _) = convert_env(&env, std::slice::from_ref(&rule), ConvertDirection::Forward).map_err(err)?;
        let (back, _) = convert_env(&f, std::slice::from_ref(&rule), ConvertDirection::Inverse).map_err(err)?;
        let y = back["temperature"].as_f64().ok_or("not numeric")?;
        // Relative to the Fahrenheit magnitude the float cast rounds in.
        let scale = (1.8 * c + 32.0).abs().max(c.abs()).max(1.0);
        ensure((y - c).abs() <= 1e-6 * scale, || format!("{c} came back as {y}"))?;
    }
    Ok("100->212 and 0->32 exact; 1000 forward/inverse pairs within rel 1e-6".into())
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const CHARS: &[char] = &['a', 'z', ' ', '<', '>', '&', '"', '\'', '\n', '\t', 'é', '木', '0'];
    (0..rng.random_range(0..12)).map(|_| CHARS[rng.random_range(0..CHARS.len())]).collect()
}

fn random_value(rng: &mut ChaCha8Rng) -> PropertyValue {
    let x = |rng: &mut ChaCha8Rng| rng.random_range(-1e9..1e9) * 10f64.powi(rng.random_range(-20..5));
    match rng.random_range(0..8) {
        0 => PropertyValue::Int(rng.random()),
        1 => PropertyValue::Float(x(rng) as f32),
        2 => PropertyValue::Double(x(rng)),
        3 => PropertyValue::Bool(rng.random()),
        4 => PropertyValue::Text(random_text(rng)),
        5 => PropertyValue::Vec3([x(rng), x(rng), x(rng)]),
        6 => PropertyValue::Matrix4(std::array::from_fn(|_| x(rng))),
        _ => PropertyValue::DoubleList((0..rng.random_range(0..6)).map(|_| x(rng)).collect()),
    }
}

fn random_graph(rng: &mut ChaCha8Rng) -> ExchangeGraph {
    let state = GrowthState::grown(rng.random(), rng.random_range(0..8));
    let mode = if rng.random() { TransformMode::Local } else { TransformMode::Global };
    let mut g = growth_export(&state, mode);
    for n in g.nodes_mut() {
        for k in 0..rng.random_range(0..3) {
            n.set_property(format!("extra_{k}"), random_value(rng));
        }
    }
    g
}

fn random_message(rng: &mut ChaCha8Rng) -> Message {
    let mode = |rng: &mut ChaCha8Rng| if rng.random() { SessionMode::Retroactive } else { SessionMode::NonRetroactive };
    match rng.random_range(0..7) {
        0 => Message::Hello { mode: mode(rng) },
        1 => Message::HelloOk { mode: mode(rng) },
        2 => {
            let env = (0..rng.random_range(0..4)).map(|k| (format!("v{k}"), random_value(rng))).collect();
            Message::Step { index: rng.random(), env, graph: random_graph(rng) }
        }
        3 => Message::StepOk { index: rng.random(), status: random_text(rng) },
        4 => Message::StepUpdate { index: rng.random(), graph: random_graph(rng) },
        5 => {
            let code = match rng.random_range(0..6) {
                0 => ErrorCode::BadHandshake,
                1 => ErrorCode::ModeRejected,
                2 => ErrorCode::OutOfOrderStep,
                3 => ErrorCode::HandlerFailure,
                4 => ErrorCode::MalformedMessage,
                _ => ErrorCode::Other(format!("Custom{}", rng.random::<u16>())),
            };
            Message::Error { code, detail: random_text(rng) }
        }
        _ => Message::Bye,
    }
}

fn same_message(a: &Message, b: &Message) -> Result<bool, String> {
    Ok(match (a, b) {
        (Message::Step { index: i, env: e, graph: g }, Message::Step { index: j, env: f, graph: h }) => {
            i == j && e == f && canonical_equal(g, h, 0.0).map_err(err)?
        }
        (Message::StepUpdate { index: i, graph: g }, Message::StepUpdate { index: j, graph: h }) => {
            i == j && canonical_equal(g, h, 0.0).map_err(err)?
        }
        _ => a == b,
    })
}

struct Server(Child, u16);

impl Server {
    fn spawn(model: &str) -> Result<Self, String> {
        let mut child = Command::new(BIN)
            .args(["serve", "--port", "0", "--model", model, "--once"])
            .stdout(Stdio::piped())
            .spawn()
            .map_err(err)?;
        let mut line = String::new();
        BufReader::new(child.stdout.take().ok_or("no stdout")?).read_line(&mut line).map_err(err)?;
        let port = line.trim().parse().map_err(|_| format!("bad port line {line:?}"))?;
        Ok(Server(child, port))
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn protocol_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for i in 0..10_000 {
        let m = random_message(&mut rng);
        let bytes = encode_frame(&m).map_err(err)?;
        let (back, used) = decode_frame(&bytes).map_err(err)?;
        ensure(used == bytes.len(), || format!("message {i}: consumed {used} of {}", bytes.len()))?;
        ensure(same_message(&m, &back)?, || format!("message {i} changed: {m:?} -> {back:?}"))?;
        ensure(encode_frame(&back).map_err(err)? == bytes, || format!("message {i} re-encodes differently"))?;
    }

    let server = Server::spawn("status")?;
    let roster = Roster {
        servers: vec![ServerEntry {
            address: "127.0.0.1".into(),
            port: server.1,
            mode: SessionMode::NonRetroactive,
            import: builtin_pipeline("status_import.xml").map_err(err)?,
            export: PipelineConfig::default(),
        }],
    };
    let schedule = |k: u64| Env::from([("temperature".to_string(), PropertyValue::Double(k as f64))]);
    let mut live = GrowthState::new(21);
    let report = client_run(&roster, &mut live, 6, &schedule, &ClientOptions::default()).map_err(err)?;
    ensure(report.records.len() == 6 && report.records.iter().all(|r| r.status.starts_with("ok: ")), || {
        format!("{:?}", report.records)
    })?;
    let online = serialize_xeg(&growth_export(&live, TransformMode::Local)).map_err(err)?;
    let offline = serialize_xeg(&growth_export(&GrowthState::grown(21, 6), TransformMode::Local)).map_err(err)?;
    ensure(online == offline, || "non-retroactive run changed the client state".into())?;
    drop(server);

    let server = Server::spawn("status")?;
    let stream = TcpStream::connect(("127.0.0.1", server.1)).map_err(err)?;
    stream.set_read_timeout(Some(Duration::from_secs(10))).map_err(err)?;
    let mut reader = BufReader::new(stream.try_clone().map_err(err)?);
    let mut writer = stream;
    let mut call = |m: &Message| -> Result<Message, String> {
        write_frame(&mut writer, m).map_err(err)?;
        read_frame(&mut reader).map_err(err)?.ok_or_else(|| "connection closed".to_string())
    };
    let code = |m: Message| match m {
        Message::Error { code, .. } => Some(code),
        _ => None,
    };
    let step = |index| Message::Step {
        index,
        env: Env::new(),
        graph: growth_export(&GrowthState::grown(1, 1), TransformMode::Local),
    };
    let mismatch = code(call(&Message::Hello { mode: SessionMode::Retroactive })?);
    ensure(mismatch == Some(ErrorCode::ModeRejected), || format!("mode mismatch gave {mismatch:?}"))?;
    let ok = call(&Message::Hello { mode: SessionMode::NonRetroactive })?;
    ensure(matches!(ok, Message::HelloOk { .. }), || format!("corrected hello gave {ok:?}"))?;
    for i in 0..4 {
        let r = call(&step(i))?;
        ensure(matches!(r, Message::StepOk { index, .. } if index == i), || format!("step {i} gave {r:?}"))?;
    }
    let skipped = code(call(&step(5))?);
    ensure(skipped == Some(ErrorCode::OutOfOrderStep), || format!("step 5 after 3 gave {skipped:?}"))?;
    let _ = call(&Message::Bye);
    Ok("10^4 messages round-trip; non-retroactive state byte-identical; ModeRejected and OutOfOrderStep returned".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("identity round trip", identity_round_trip),
        ("retroactive loop", retroactive_loop),
        ("decompose/upscale inverse", decompose_upscale_inverse),
        ("geometry translation", geometry_translation),
        ("unit conversion", unit_conversion),
        ("protocol suite", protocol_suite),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        match check() {
            Ok(detail) => println!("PASS {name}: {detail} [{:.2?}]", started.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
