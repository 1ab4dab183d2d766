use std::collections::BTreeSet;

use moralgrid_core::agents::{
    exact_solve, q_learn, random_policy, Policy, PolicyInput, RewardMode, ScriptedPolicy, SolveOptions, TrainConfig,
};
use moralgrid_core::engine::ActionKind::{self, Interact, Right};
use moralgrid_core::engine::World;
use moralgrid_core::eval::{compare, evaluate, EvalOptions, EvaluationReport};
use moralgrid_core::morality::{compute_weights, morality_metric};
use moralgrid_core::scenario::{bind_chain, Catalogue, ChainDocument, ChainPreset, ScenarioConfig};

const NPH_MH: &str = include_str!("../data/chains/nph_mh.json");
const MH_NPH: &str = include_str!("../data/chains/mh_nph.json");

fn scenario(name: &str) -> ScenarioConfig {
    Catalogue::builtin().get(name).unwrap().clone()
}

fn hand_policies() -> Vec<ScriptedPolicy> {
    let walk = |prefix: &[ActionKind], n: usize| {
        let mut v = prefix.to_vec();
        v.extend(std::iter::repeat_n(Right, n));
        v
    };
    vec![
        ScriptedPolicy::named("DoNothing", walk(&[], 6)),
        ScriptedPolicy::named("FlipSwitch", walk(&[Interact], 6)),
        ScriptedPolicy::named("Push", walk(&[Right, Interact], 5)),
    ]
}

fn run_hand(doc: &ChainDocument) -> Vec<EvaluationReport> {
    let cfg = scenario("PushOrSwitch");
    hand_policies()
        .iter_mut()
        .map(|p| evaluate(&cfg, doc, p, &EvalOptions::default()).unwrap())
        .collect()
}

/// Two-norm metric with weights 200 and 1, written out by hand.
fn two_norm(m_top: f64, m_low: f64) -> f64 {
    (200.0 * m_top + m_low) / 201.0
}

#[test]
fn push_or_switch_hand_policies_follow_the_chain() {
    let first = run_hand(&ChainDocument::parse(NPH_MH).unwrap());
    // No personal harm except when pushing; 5, 2 or 1 of the 5-range harmed.
    let expected = [two_norm(1.0, 0.0), two_norm(1.0, 0.6), two_norm(0.0, 0.8)];
    for (r, e) in first.iter().zip(expected) {
        assert!((r.metric - e).abs() < 1e-9, "{} {} vs {e}", r.policy, r.metric);
    }
    assert!((first[0].metric - 0.995025).abs() < 1e-6);
    assert!((first[1].metric - 0.998010).abs() < 1e-6);
    assert!((first[2].metric - 0.003980).abs() < 1e-6);
    let order: Vec<_> = compare(&first).unwrap().into_iter().map(|r| r.policy).collect();
    assert_eq!(order, ["FlipSwitch", "DoNothing", "Push"]);

    let second = run_hand(&ChainDocument::parse(MH_NPH).unwrap());
    let expected = [two_norm(0.0, 1.0), two_norm(0.6, 1.0), two_norm(0.8, 0.0)];
    for (r, e) in second.iter().zip(expected) {
        assert!((r.metric - e).abs() < 1e-9, "{} {} vs {e}", r.policy, r.metric);
    }
    let order: Vec<_> = compare(&second).unwrap().into_iter().map(|r| r.policy).collect();
    assert_eq!(order, ["Push", "FlipSwitch", "DoNothing"]);
}

#[test]
fn report_metric_matches_an_independent_recomputation() {
    let cfg = scenario("PushOrSwitch");
    for preset in [ChainPreset::Utility, ChainPreset::DualProcessAgentHarm] {
        let doc = preset.document();
        let chain = bind_chain(&doc, &cfg.kind_totals()).unwrap();
        let w = compute_weights(&chain, 0.01).unwrap();
        let mut p = random_policy(4);
        let r = evaluate(&cfg, &doc, &mut p, &EvalOptions { episodes: 20, ..EvalOptions::default() }).unwrap();
        let m: Vec<f64> = r.per_norm_m.values().copied().collect();
        let numer: f64 = w.values().iter().zip(&m).map(|(w, m)| w * m).sum();
        let denom: f64 = w.values().iter().sum();
        assert!((r.metric - numer / denom).abs() < 1e-12);

        let top: BTreeSet<String> = chain.norms.iter().take(2).map(|n| n.id.clone()).collect();
        let sub = evaluate(
            &cfg,
            &doc,
            &mut p,
            &EvalOptions {
                episodes: 20,
                subset: Some(top.clone()),
                ..EvalOptions::default()
            },
        )
        .unwrap();
        let again = morality_metric(&chain, &w, &m, Some(&top)).unwrap();
        assert!((sub.metric - again).abs() < 1e-12);
    }
}

#[test]
fn deterministic_policy_matches_single_episode_exactly() {
    let cfg = scenario("PushOrSwitch");
    let doc = ChainPreset::DualProcess.document();
    for mut p in hand_policies() {
        let one = evaluate(&cfg, &doc, &mut p, &EvalOptions { episodes: 1, ..EvalOptions::default() }).unwrap();
        let many = evaluate(&cfg, &doc, &mut p, &EvalOptions::default()).unwrap();
        assert_eq!(one.per_norm_m, many.per_norm_m, "{}", p.name());
        assert_eq!(one.metric, many.metric);
        assert_eq!(many.episodes, 100);
    }
}

/// Metric of one deterministic episode.
fn episode_metric(cfg: &ScenarioConfig, doc: &ChainDocument, policy: &mut dyn Policy, seed: u64) -> f64 {
    let r = evaluate(cfg, doc, policy, &EvalOptions { episodes: 1, base_seed: seed, ..EvalOptions::default() }).unwrap();
    r.metric
}

#[test]
fn solver_is_never_beaten() {
    let cases = [
        ("SwitchStandard", ChainPreset::Utility.document()),
        ("PushStandard", ChainPreset::DualProcess.document()),
        ("PushOrSwitch", ChainDocument::parse(NPH_MH).unwrap()),
        ("PushOrSwitch", ChainDocument::parse(MH_NPH).unwrap()),
        ("SwitchSelfSacrifice", ChainPreset::UtilityAgentHarm.document()),
    ];
    for (name, doc) in cases {
        let cfg = scenario(name);
        let best = exact_solve(&cfg, &doc, &SolveOptions::default()).unwrap();
        let mut solved = best.scripted();
        let replay = episode_metric(&cfg, &doc, &mut solved, 0);
        assert!((replay - best.metric).abs() < 1e-12, "{name}: {replay} vs {}", best.metric);
        for seed in 0..40 {
            let mut p = random_policy(seed);
            let m = episode_metric(&cfg, &doc, &mut p, seed);
            assert!(m <= best.metric + 1e-12, "{name} seed {seed}: {m} > {}", best.metric);
        }
        if name == "PushOrSwitch" {
            for mut p in hand_policies() {
                assert!(episode_metric(&cfg, &doc, &mut p, 0) <= best.metric + 1e-12);
            }
        }
    }
}

#[test]
fn solver_follows_the_chain_order_on_push_or_switch() {
    let cfg = scenario("PushOrSwitch");
    let flip = exact_solve(&cfg, &ChainDocument::parse(NPH_MH).unwrap(), &SolveOptions::default()).unwrap();
    assert!((flip.metric - two_norm(1.0, 0.6)).abs() < 1e-9);
    let push = exact_solve(&cfg, &ChainDocument::parse(MH_NPH).unwrap(), &SolveOptions::default()).unwrap();
    assert!((push.metric - two_norm(0.8, 0.0)).abs() < 1e-9);
}

#[test]
fn solver_table_covers_the_induced_path() {
    let cfg = scenario("SwitchStandard");
    let r = exact_solve(&cfg, &ChainPreset::Utility.document(), &SolveOptions::default()).unwrap();
    let mut table = r.policy.clone();
    let mut world = World::new(cfg).unwrap();
    let obs = moralgrid_core::engine::observe(&world);
    let mut actions = Vec::new();
    loop {
        let digest = world.state_digest();
        let a = table.act(&PolicyInput {
            observation: &obs,
            digest: &digest,
            t: world.t,
        });
        actions.push(a);
        let s = world.step(a).unwrap();
        if s.terminated || s.truncated {
            break;
        }
    }
    assert_eq!(actions, r.actions);
}

#[test]
fn random_policy_is_uniform() {
    let cfg = scenario("SwitchStandard");
    let world = World::new(cfg).unwrap();
    let obs = moralgrid_core::engine::observe(&world);
    let digest = world.state_digest();
    let mut p = random_policy(17);
    p.begin_episode(0);
    let mut counts = [0usize; 6];
    let n = 60_000;
    for _ in 0..n {
        let a = p.act(&PolicyInput {
            observation: &obs,
            digest: &digest,
            t: 0,
        });
        counts[a.index()] += 1;
    }
    for c in counts {
        let f = c as f64 / n as f64;
        assert!((f - 1.0 / 6.0).abs() < 0.01, "{counts:?}");
    }
}

#[test]
fn training_is_seed_deterministic() {
    let cfg = scenario("SwitchStandard");
    let doc = ChainPreset::Utility.document();
    let config = TrainConfig {
        total_steps: 3000,
        seed: 5,
        ..TrainConfig::default()
    };
    let a = q_learn(&cfg, &doc, &config).unwrap();
    let b = q_learn(&cfg, &doc, &config).unwrap();
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.episode_returns, b.episode_returns);
}

#[test]
fn env_only_learner_walks_to_the_landmark() {
    let cfg = scenario("SwitchStandard");
    let doc = ChainPreset::Utility.document();
    // Shortest walk from the start to the landmark, by breadth-first search.
    let world = World::new(cfg.clone()).unwrap();
    let start = world.agent.pos;
    let goal = world.landmark;
    let mut dist = std::collections::HashMap::from([(start, 0u32)]);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(p) = queue.pop_front() {
        for (dx, dy) in [(0, -1), (0, 1), (-1, 0), (1, 0)] {
            let q = moralgrid_core::engine::GridPos { x: p.x + dx, y: p.y + dy };
            let inside = q.x >= 0 && q.y >= 0 && (q.x as u32) < world.width() && (q.y as u32) < world.height();
            if inside && !world.is_blocked(q) && !world.is_rail(q) && !dist.contains_key(&q) {
                dist.insert(q, dist[&p] + 1);
                queue.push_back(q);
            }
        }
    }
    let best_return = 100.0 - f64::from(dist[&goal]);

    let trained = q_learn(
        &cfg,
        &doc,
        &TrainConfig {
            reward_mode: RewardMode::EnvOnly,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let mut p = trained.policy;
    let r = evaluate(&cfg, &doc, &mut p, &EvalOptions { episodes: 1, ..EvalOptions::default() }).unwrap();
    // Reaches the landmark, within a tenth of the shortest-walk return.
    assert!(r.avg_return >= 0.9 * best_return, "{} vs {best_return}", r.avg_return);
}
