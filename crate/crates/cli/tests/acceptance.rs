//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! fails. Run with `cargo test -p moralgrid-cli --test acceptance`.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use moralgrid_client::ServiceClient;
use moralgrid_core::agents::{exact_solve, q_learn, RewardMode, ScriptedPolicy, SolveOptions, TrainConfig};
use moralgrid_core::engine::{ActionKind, InteractEffect, World};
use moralgrid_core::env::MoralEnv;
use moralgrid_core::eval::{compare, evaluate, EvalOptions, DEFAULT_EPISODES};
use moralgrid_core::ledger::{CostConfig, NormEvent};
use moralgrid_core::morality::{
    build_chain, compute_weights, morality_metric, weights_for_len, Beta, DeonticModality, MoralityChain,
    NormCategory, NormSpec, Subject,
};
use moralgrid_core::protocol::{Request, SessionDefaults};
use moralgrid_core::scenario::{
    bind_chain, instantiate_variant, load_scenario, Catalogue, ChainDocument, ChainPreset, ScenarioConfig,
    VariantConfig,
};
use moralgrid_core::service::{EvaluateRequest, PlayRequest, PolicySpec, Selection, Service};
use moralgrid_server::{serve_http, serve_tcp, AppState};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const BETA: f64 = 0.01;
const NPH_MH: &str = include_str!("../../core/data/chains/nph_mh.json");
const MH_NPH: &str = include_str!("../../core/data/chains/mh_nph.json");

type Check = Result<String, String>;
type Criterion = (&'static str, Option<Duration>, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn catalogue() -> Catalogue {
    Catalogue::builtin()
}

fn scenario(name: &str) -> ScenarioConfig {
    catalogue().get(name).unwrap().clone()
}

fn random_actions(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<ActionKind> {
    let n = rng.gen_range(0..=max_len);
    (0..n).map(|_| ActionKind::ALL[rng.gen_range(0..6)]).collect()
}

/// Plain chain of k prohibited outcome norms with forces k..1.
fn plain_chain(k: usize) -> MoralityChain {
    let norms = (0..k)
        .map(|i| {
            NormSpec::new(
                format!("n{i}"),
                NormCategory::Outcome,
                Some(Subject::Human),
                (k - i) as u32,
                DeonticModality::Prohibited,
            )
        })
        .collect();
    build_chain("acceptance", norms).unwrap()
}

/// Weights for beta = 1/m in integers: last is 1, each earlier one is
/// m times (everything after it, plus one).
fn integer_weights(k: usize, m: u128) -> Vec<u128> {
    let mut rev = vec![1u128];
    let mut tail = 0u128;
    while rev.len() < k {
        tail += *rev.last().unwrap();
        rev.push(m * (tail + 1));
    }
    rev.reverse();
    rev
}

fn c1_weights() -> Check {
    let two = compute_weights(&plain_chain(2), BETA).map_err(|e| e.to_string())?;
    let three = compute_weights(&plain_chain(3), BETA).map_err(|e| e.to_string())?;
    let ints = |v: &[u128]| -> Vec<BigRational> { v.iter().map(|x| BigRational::from_integer(BigInt::from(*x))).collect() };
    ensure(two.exact() == ints(&[200, 1]).as_slice(), || format!("k=2 gave {:?}", two.values()))?;
    ensure(three.exact() == ints(&[20200, 200, 1]).as_slice(), || format!("k=3 gave {:?}", three.values()))?;

    let beta = Beta::new(BETA).map_err(|e| e.to_string())?;
    let one = BigRational::from_integer(BigInt::from(1));
    for k in 1..=7 {
        let w = weights_for_len(k, &beta);
        let exact = w.exact();
        ensure(exact == ints(&integer_weights(k, 100)).as_slice(), || format!("k={k} differs from the integer oracle"))?;
        ensure(exact[k - 1] == one, || format!("k={k}: last weight is not 1"))?;
        for i in 1..k {
            let tail: BigRational = exact[i..].iter().cloned().sum();
            ensure(exact[i - 1] == (tail + &one) / beta.exact(), || format!("k={k}: recursion breaks at {i}"))?;
        }
    }
    let dpah = bind_chain(&ChainPreset::DualProcessAgentHarm.document(), &scenario("SwitchStandard").kind_totals())
        .map_err(|e| e.to_string())?;
    let w = compute_weights(&dpah, BETA).map_err(|e| e.to_string())?;
    ensure(w.exact() == ints(&integer_weights(dpah.norms.len(), 100)).as_slice(), || "DPAH weights".into())?;
    Ok(format!("[200, 1], [20200, 200, 1], k=1..7 exact; DPAH k={}", dpah.norms.len()))
}

fn two_norm(m_top: f64, m_low: f64) -> f64 {
    (200.0 * m_top + m_low) / 201.0
}

fn c2_push_or_switch() -> Check {
    let cfg = scenario("PushOrSwitch");
    let walk = |prefix: &[ActionKind], n: usize| {
        let mut v = prefix.to_vec();
        v.extend(std::iter::repeat_n(ActionKind::Right, n));
        v
    };
    let policies = || {
        vec![
            ScriptedPolicy::named("DoNothing", walk(&[], 6)),
            ScriptedPolicy::named("FlipSwitch", walk(&[ActionKind::Interact], 6)),
            ScriptedPolicy::named("Push", walk(&[ActionKind::Right, ActionKind::Interact], 5)),
        ]
    };
    // Personal harm only when pushing; 5, 2 or 1 of the five-person range harmed.
    let cases = [
        (NPH_MH, [two_norm(1.0, 0.0), two_norm(1.0, 0.6), two_norm(0.0, 0.8)], [0.995025, 0.998010, 0.003980], "FlipSwitch"),
        (MH_NPH, [two_norm(0.0, 1.0), two_norm(0.6, 1.0), two_norm(0.8, 0.0)], [0.004975, 0.601990, 0.796020], "Push"),
    ];
    let mut shown = Vec::new();
    for (doc, formula, rounded, best) in cases {
        let doc = ChainDocument::parse(doc).map_err(|e| e.to_string())?;
        let mut reports = Vec::new();
        for mut p in policies() {
            reports.push(evaluate(&cfg, &doc, &mut p, &EvalOptions::default()).map_err(|e| e.to_string())?);
        }
        for ((r, f), q) in reports.iter().zip(formula).zip(rounded) {
            ensure((r.metric - f).abs() <= 1e-9, || format!("{}/{}: {} vs {f}", doc.name, r.policy, r.metric))?;
            ensure((r.metric - q).abs() <= 5e-7, || format!("{}/{}: {} vs {q}", doc.name, r.policy, r.metric))?;
            shown.push(format!("{:.6}", r.metric));
        }
        let ranking = compare(&reports).map_err(|e| e.to_string())?;
        ensure(ranking[0].policy == best, || format!("{} prefers {}", doc.name, ranking[0].policy))?;
    }
    Ok(format!("metrics {}", shown.join(" ")))
}

const PRESETS: [ChainPreset; 4] = [
    ChainPreset::Utility,
    ChainPreset::UtilityAgentHarm,
    ChainPreset::DualProcess,
    ChainPreset::DualProcessAgentHarm,
];

struct Played {
    costs: Vec<f64>,
    events: Vec<NormEvent>,
    env: MoralEnv,
}

fn play_env(cfg: ScenarioConfig, doc: ChainDocument, normalize: bool, actions: &[ActionKind], seed: u64) -> Played {
    let cost = CostConfig {
        normalize,
        ..CostConfig::default()
    };
    let mut env = MoralEnv::new(cfg, doc, cost).unwrap();
    env.reset(seed);
    let mut script = actions.iter().copied().chain(std::iter::repeat(ActionKind::Stay));
    let (mut costs, mut events) = (Vec::new(), Vec::new());
    loop {
        let out = env.step(script.next().unwrap()).unwrap();
        costs.push(out.info.cost);
        events.extend(out.info.norm_events.iter().cloned());
        if out.done() {
            break;
        }
    }
    Played { costs, events, env }
}

/// Episode cost from the final world and the fired events alone.
fn oracle_cost(p: &Played) -> f64 {
    let world = p.env.world();
    let totals = p.env.config().kind_totals();
    let mut total = 0.0;
    for (norm, w) in p.env.chain().norms.iter().zip(p.env.weights().values()) {
        if norm.category == NormCategory::Utility {
            let subject = norm.subject.unwrap();
            let harmed: u32 = world
                .characters
                .iter()
                .filter(|c| c.harmed && c.kind.subject() == subject)
                .map(|c| c.quantity)
                .sum();
            let max: u32 = totals.iter().filter(|(k, _)| k.subject() == subject).map(|(_, n)| *n).sum();
            total += w * f64::from(harmed) / f64::from(max.max(1));
        } else if p.events.iter().any(|e| e.norm_id == norm.id) {
            total += w;
        }
    }
    if p.env.tracker().config().normalize {
        total /= p.env.weights().total();
    }
    total
}

fn c3_costs() -> Check {
    let cat = catalogue();
    let variant = VariantConfig::parse(
        r#"{"base":"SwitchStandard","characters":[{"id":"main_group","quantity":3},{"id":"side_group","quantity":2}]}"#,
    )
    .map_err(|e| e.to_string())?;
    let cfg = instantiate_variant(cat.get("SwitchStandard").unwrap(), &variant).map_err(|e| e.to_string())?;
    let played = play_env(cfg, ChainPreset::Utility.document(), false, &[], 0);
    let idx = played.env.chain().index_of("min_humans_harmed").unwrap();
    let w = played.env.weights().values()[idx];
    let range = played.env.chain().norms[idx].utility_range.unwrap();
    ensure(range.max == 5.0, || format!("human range max {}", range.max))?;
    ensure(played.env.tracker().total_cost() == w * 3.0 / 5.0, || {
        format!("cost {} vs {}", played.env.tracker().total_cost(), w * 3.0 / 5.0)
    })?;

    let names = cat.names();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = Vec::new();
    for i in 0..1000 {
        let name = &names[rng.gen_range(0..names.len())];
        let preset = PRESETS[rng.gen_range(0..PRESETS.len())];
        let normalize = rng.gen_bool(0.5);
        let actions = random_actions(&mut rng, 40);
        let p = play_env(cat.get(name).unwrap().clone(), preset.document(), normalize, &actions, i);
        let sum: f64 = p.costs.iter().sum();
        let expected = oracle_cost(&p);
        if (sum - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            violations.push(format!("{name}/{}: sum {sum} vs {expected}", preset.name()));
        }
        // Step by step: utility norms pay for the newly harmed, event norms
        // pay their weight on the first step they fire and never again.
        let chain = p.env.chain();
        let weights = p.env.weights().values();
        let scale = if normalize { 1.0 / p.env.weights().total() } else { 1.0 };
        let mut fired = BTreeSet::new();
        for (s, charged) in p.costs.iter().enumerate() {
            let t = s as u32 + 1;
            let mut expected = 0.0;
            for e in p.events.iter().filter(|e| e.t == t) {
                let k = chain.index_of(&e.norm_id).unwrap();
                match chain.norms[k].utility_range {
                    Some(r) => expected += weights[k] * e.magnitude() / (r.max - r.min),
                    None if fired.insert(e.norm_id.clone()) => expected += weights[k],
                    None => {}
                }
            }
            expected *= scale;
            if (charged - expected).abs() > 1e-9 * expected.abs().max(1.0) {
                violations.push(format!("{name}/{} step {t}: charged {charged}, expected {expected}", preset.name()));
            }
        }
    }
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok(format!("3/5 cost = {}; 1000 random episodes, 0 violations", w * 3.0 / 5.0))
}

fn c4_dominance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = 0usize;
    let mut trials = 0usize;
    for k in 2..=7 {
        let chain = plain_chain(k);
        let w = compute_weights(&chain, BETA).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let mut u: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let mut v: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let i = rng.gen_range(0..k);
            v[..i].copy_from_slice(&u[..i]);
            v[i] = rng.gen_range(0.0..=1.0 - BETA);
            u[i] = rng.gen_range(v[i] + BETA..=1.0);
            let mu = morality_metric(&chain, &w, &u, None).map_err(|e| e.to_string())?;
            let mv = morality_metric(&chain, &w, &v, None).map_err(|e| e.to_string())?;
            trials += 1;
            if mu <= mv {
                failures += 1;
            }
        }
    }
    ensure(failures == 0, || format!("{failures} of {trials} pairs misordered"))?;
    Ok(format!("{trials} pairs over k=2..7, all ordered by the higher rank"))
}

/// Servers on loopback for criterion 5, alive for the rest of the process.
fn start_servers() -> (SocketAddr, SocketAddr) {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let cat = Arc::new(catalogue());
            let defaults = SessionDefaults {
                scenario: cat.get("SwitchStandard").unwrap().clone(),
                chain: ChainPreset::Utility.document(),
                cost: CostConfig::default(),
            };
            let lines = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            let http = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send((lines.local_addr().unwrap(), http.local_addr().unwrap())).unwrap();
            let state = AppState::new(Service::shared(Arc::clone(&cat)), defaults.clone());
            let _ = tokio::join!(serve_tcp(lines, cat, defaults), serve_http(http, state));
        });
    });
    rx.recv().unwrap()
}

/// The fields compared between the two paths, in a fixed layout.
fn stream_record(reward: &Value, cost: &Value, events: &Value, done: (&Value, &Value), digest: &Value) -> String {
    json!({
        "reward": reward,
        "cost": cost,
        "norm_events": events,
        "terminated": done.0,
        "truncated": done.1,
        "state_digest": digest,
    })
    .to_string()
}

fn c5_protocol() -> Check {
    let (lines_addr, http_addr) = start_servers();
    let stream = TcpStream::connect(lines_addr).map_err(|e| e.to_string())?;
    let mut writer = stream.try_clone().map_err(|e| e.to_string())?;
    let mut reader = BufReader::new(stream);
    let mut send = |req: &Request| -> Result<Value, String> {
        writer
            .write_all(format!("{}\n", serde_json::to_string(req).unwrap()).as_bytes())
            .map_err(|e| e.to_string())?;
        let mut line = String::new();
        reader.read_line(&mut line).map_err(|e| e.to_string())?;
        serde_json::from_str(&line).map_err(|e| format!("{e}: {line}"))
    };

    let cat = catalogue();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut episodes = 0;
    let mut steps = 0;
    for name in cat.names() {
        for preset in PRESETS {
            let seed = rng.gen_range(0..1000);
            let actions = random_actions(&mut rng, 30);
            let mut env = MoralEnv::new(cat.get(&name).unwrap().clone(), preset.document(), CostConfig::default())
                .map_err(|e| e.to_string())?;
            env.reset(seed);
            let mut reset = Request::reset(seed);
            reset.scenario = Some(Value::String(name.clone()));
            reset.chain = Some(Value::String(preset.name().into()));
            let r = send(&reset)?;
            ensure(r["ok"] == true, || format!("reset failed: {r}"))?;

            let mut script = actions.iter().copied().chain(std::iter::repeat(ActionKind::Stay));
            loop {
                let a = script.next().unwrap();
                let local = env.step(a).map_err(|e| e.to_string())?;
                let remote = send(&Request::step(a))?;
                let info = serde_json::to_value(&local.info).unwrap();
                let here = stream_record(
                    &json!(local.reward),
                    &info["cost"],
                    &info["norm_events"],
                    (&json!(local.terminated), &json!(local.truncated)),
                    &info["state_digest"],
                );
                let there = stream_record(
                    &remote["reward"],
                    &remote["info"]["cost"],
                    &remote["info"]["norm_events"],
                    (&remote["terminated"], &remote["truncated"]),
                    &remote["info"]["state_digest"],
                );
                ensure(here == there, || format!("{name}/{} step {}: {here} != {there}", preset.name(), local.info.t))?;
                steps += 1;
                if local.done() {
                    break;
                }
            }
            episodes += 1;
        }
    }

    // Whole traces: in process twice, then through the HTTP API.
    let svc = Service::new(catalogue());
    let client = ServiceClient::new(format!("http://{http_addr}"));
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    for name in ["SwitchStandard", "PushOrSwitch", "SwitchSelfSacrifice"] {
        let req = PlayRequest {
            selection: Selection::new(name, "DPAH"),
            actions: random_actions(&mut rng, 20),
            seed: 11,
            normalize_cost: true,
            render: false,
        };
        let a = svc.play(&req).map_err(|e| e.to_string())?.trace;
        let b = svc.play(&req).map_err(|e| e.to_string())?.trace;
        let c = rt.block_on(client.play(&req)).map_err(|e| e.to_string())?.trace;
        ensure(a == b, || format!("{name}: in-process traces differ"))?;
        ensure(a == c, || format!("{name}: served trace differs"))?;
    }
    Ok(format!("{episodes} episodes / {steps} steps over TCP identical; 3 traces byte-equal over HTTP"))
}

fn c6_solver() -> Check {
    let cfg = scenario("SwitchStandard");
    let doc = ChainPreset::Utility.document();
    let best = exact_solve(&cfg, &doc, &SolveOptions::default()).map_err(|e| e.to_string())?;

    // Replay the solution and count lever toggles.
    let mut env = MoralEnv::new(cfg.clone(), doc.clone(), CostConfig::default()).map_err(|e| e.to_string())?;
    env.reset(0);
    let mut toggles = 0;
    let mut script = best.actions.iter().copied().chain(std::iter::repeat(ActionKind::Stay));
    loop {
        let out = env.step(script.next().unwrap()).map_err(|e| e.to_string())?;
        if matches!(out.info.interact, InteractEffect::LeverToggled { .. }) {
            toggles += 1;
        }
        if out.done() {
            break;
        }
    }
    ensure(toggles % 2 == 1, || format!("solution toggles the lever {toggles} times"))?;
    let humans: u32 = cfg.kind_totals().iter().filter(|(k, _)| k.subject() == Subject::Human).map(|(_, n)| *n).sum();
    let harmed: u32 = env
        .world()
        .characters
        .iter()
        .filter(|c| c.harmed && c.kind.subject() == Subject::Human)
        .map(|c| c.quantity)
        .sum();
    ensure(harmed == 1 && humans == 6, || format!("{harmed} harmed of {humans}"))?;
    ensure(best.per_norm_adherence["min_humans_harmed"] == 1.0 / 6.0, || {
        format!("adherence {:?}", best.per_norm_adherence)
    })?;

    // Scripted alternatives that leave the lever where it started.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let walk: Vec<ActionKind> = best.actions.iter().map(|a| if *a == ActionKind::Interact { ActionKind::Stay } else { *a }).collect();
    let mut alternatives = vec![
        ("DoNothing", vec![]),
        ("WalkOnly", walk),
        ("ToggleTwice", vec![ActionKind::Interact, ActionKind::Interact]),
    ];
    for _ in 0..200 {
        let a: Vec<ActionKind> = random_actions(&mut rng, 30).into_iter().filter(|a| *a != ActionKind::Interact).collect();
        alternatives.push(("RandomNoInteract", a));
    }
    let mut worst_gap = f64::INFINITY;
    for (label, actions) in &alternatives {
        let mut p = ScriptedPolicy::named(*label, actions.clone());
        let r = evaluate(&cfg, &doc, &mut p, &EvalOptions { episodes: 1, ..EvalOptions::default() })
            .map_err(|e| e.to_string())?;
        ensure(best.metric > r.metric, || format!("{label} reaches {} vs solver {}", r.metric, best.metric))?;
        worst_gap = worst_gap.min(best.metric - r.metric);
    }
    Ok(format!(
        "toggles lever, 1 of 6 harmed, metric {:.6} beats {} alternatives (min gap {:.3e}), {} states",
        best.metric,
        alternatives.len(),
        worst_gap,
        best.states_explored
    ))
}

fn c7_shaping() -> Check {
    let cfg = scenario("SwitchStandard");
    let doc = ChainPreset::Utility.document();
    let mut rows = Vec::new();
    for seed in 0..3 {
        let metric = |mode| -> Result<f64, String> {
            let trained = q_learn(
                &cfg,
                &doc,
                &TrainConfig {
                    reward_mode: mode,
                    seed,
                    ..TrainConfig::default()
                },
            )
            .map_err(|e| e.to_string())?;
            let mut p = trained.policy;
            Ok(evaluate(&cfg, &doc, &mut p, &EvalOptions { base_seed: seed, ..EvalOptions::default() })
                .map_err(|e| e.to_string())?
                .metric)
        };
        let shaped = metric(RewardMode::Shaped { lambda: 1.0 })?;
        let env_only = metric(RewardMode::EnvOnly)?;
        ensure(shaped >= env_only, || format!("seed {seed}: shaped {shaped} < env-only {env_only}"))?;
        rows.push(format!("seed {seed}: {shaped:.4} >= {env_only:.4}"));
    }
    Ok(rows.join("; "))
}

fn c8_evaluation() -> Check {
    ensure(DEFAULT_EPISODES == 100, || format!("default {DEFAULT_EPISODES}"))?;
    let svc = Service::new(catalogue());
    let report = svc
        .evaluate(&EvaluateRequest {
            selection: Selection::new("SwitchStandard", "Utility"),
            policy: PolicySpec::Random { seed: 1 },
            episodes: None,
            seed: None,
            normalize_cost: false,
            subset: None,
        })
        .map_err(|e| e.to_string())?;
    ensure(report.episodes == 100 && report.provenance.seeds.len() == 100, || {
        format!("service ran {} episodes", report.episodes)
    })?;
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_moralgrid"))
        .args(["evaluate", "--scenario", "PushStandard"])
        .env_remove("MORALGRID_REMOTE")
        .env_remove("MORALGRID_DATA_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    let cli: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    ensure(cli["episodes"] == 100, || format!("cli ran {} episodes", cli["episodes"]))?;

    // Deterministic scripts: the 100-episode mean equals one direct episode.
    let cat = catalogue();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut compared = 0;
    for name in cat.names() {
        for preset in PRESETS {
            let actions = random_actions(&mut rng, 25);
            let cfg = cat.get(&name).unwrap().clone();
            let direct = play_env(cfg.clone(), preset.document(), false, &actions, 0);
            let exact = direct.env.episode_morality().map_err(|e| e.to_string())?;
            let mut p = ScriptedPolicy::named("script", actions);
            let r = evaluate(&cfg, &preset.document(), &mut p, &EvalOptions::default()).map_err(|e| e.to_string())?;
            let mc: Vec<f64> = r.per_norm_m.values().copied().collect();
            ensure(mc == exact.m, || format!("{name}/{}: {mc:?} vs {:?}", preset.name(), exact.m))?;
            compared += 1;
        }
    }
    Ok(format!("default 100 episodes (service and CLI); {compared} deterministic scripts match exactly"))
}

fn c9_catalogue() -> Check {
    let cat = catalogue();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for name in cat.names() {
        let cfg = cat.get(&name).unwrap();
        cfg.validate().map_err(|e| format!("{name}: {e}"))?;
        let again = load_scenario(&cfg.to_json_pretty()).map_err(|e| format!("{name}: {e}"))?;
        ensure(&again == cfg, || format!("{name} does not round-trip"))?;
        let mut world = World::new(cfg.clone()).map_err(|e| format!("{name}: {e}"))?;
        for _ in 0..50 {
            if world.episode_over {
                world = World::new(cfg.clone()).map_err(|e| e.to_string())?;
            }
            world
                .step(ActionKind::ALL[rng.gen_range(0..6)])
                .map_err(|e| format!("{name}: {e}"))?;
        }
    }
    for v in cat.variant_names() {
        let variant = cat.variant(&v).unwrap();
        let cfg = cat.resolve_with_variant(&variant.base, Some(&v)).map_err(|e| format!("{v}: {e}"))?;
        cfg.validate().map_err(|e| format!("{v}: {e}"))?;
    }
    Ok(format!("{} scenarios, {} variants", cat.names().len(), cat.variant_names().len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("weight recursion", Some(Duration::from_secs(1)), c1_weights),
        ("PushOrSwitch hand policies", Some(Duration::from_secs(5)), c2_push_or_switch),
        ("cost bookkeeping", None, c3_costs),
        ("lexicographic dominance", None, c4_dominance),
        ("determinism and protocol equivalence", Some(Duration::from_secs(10)), c5_protocol),
        ("exact solver oracle", Some(Duration::from_secs(10)), c6_solver),
        ("shaping effect direction", None, c7_shaping),
        ("evaluation contract", None, c8_evaluation),
        ("catalogue integrity", None, c9_catalogue),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(l)) if elapsed > l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
            (r, _) => r,
        };
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {} {name} ({elapsed:.2?}): {detail}", i + 1);
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
