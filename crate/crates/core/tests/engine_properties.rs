use moralgrid_core::engine::{ActionKind, GridPos, World};
use moralgrid_core::scenario::Catalogue;
use proptest::prelude::*;

fn scenario_names() -> Vec<String> {
    Catalogue::builtin().names()
}

fn world(name: &str) -> World {
    World::new(Catalogue::builtin().get(name).unwrap().clone()).unwrap()
}

fn arb_case() -> impl Strategy<Value = (String, Vec<ActionKind>)> {
    let names = scenario_names();
    (
        prop::sample::select(names),
        prop::collection::vec(prop::sample::select(ActionKind::ALL.to_vec()), 0..45),
    )
}

fn in_grid(w: &World, p: GridPos) -> bool {
    p.x >= 0 && p.y >= 0 && (p.x as u32) < w.width() && (p.y as u32) < w.height()
}

/// Runs until the script or the episode ends, returning per-step snapshots.
fn run(name: &str, actions: &[ActionKind]) -> Vec<(String, f64, bool, bool)> {
    let mut w = world(name);
    let mut out = Vec::new();
    for a in actions {
        if w.episode_over {
            break;
        }
        let r = w.step(*a).unwrap();
        out.push((w.canonical_state(), r.reward, r.terminated, r.truncated));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn identical_inputs_give_identical_runs((name, actions) in arb_case()) {
        prop_assert_eq!(run(&name, &actions), run(&name, &actions));
    }

    #[test]
    fn per_step_invariants((name, actions) in arb_case()) {
        let mut w = world(&name);
        let quantity = w.total_quantity();
        let cfg = w.config().reward;
        for a in actions {
            if w.episode_over {
                prop_assert!(w.step(a).is_err(), "step after the end must be rejected");
                break;
            }
            let before = w.clone();
            let r = w.step(a).unwrap();

            // Harm never heals.
            for (old, new) in before.characters.iter().zip(&w.characters) {
                prop_assert!(!old.harmed || new.harmed, "{} healed", old.id);
            }
            prop_assert!(!before.agent.harmed || w.agent.harmed);

            // Groups are never created or removed.
            prop_assert_eq!(w.characters.len(), before.characters.len());
            prop_assert_eq!(w.total_quantity(), quantity);

            // Everything stays on the grid and off blocked cells.
            prop_assert!(in_grid(&w, w.agent.pos) && !w.is_blocked(w.agent.pos));
            for c in &w.characters {
                prop_assert!(in_grid(&w, c.pos) && !w.is_blocked(c.pos), "{} at {:?}", c.id, c.pos);
            }
            for t in &w.trolleys {
                prop_assert!(in_grid(&w, w.trolley_pos(t)));
            }

            // Reward is the step penalty plus the landmark and agent-harm terms.
            let reached_now = !before.reached && w.reached;
            let agent_hit = !before.agent.harmed && w.agent.harmed;
            let mut expected = cfg.step_penalty;
            if reached_now && !w.agent.harmed {
                expected += cfg.landmark_reward;
            }
            if agent_hit {
                expected += cfg.agent_harm_penalty;
            }
            prop_assert_eq!(r.reward, expected);
            prop_assert_eq!(r.terminated, w.reached || w.agent.harmed);
            prop_assert!(!(r.terminated && r.truncated));
            prop_assert_eq!(w.t, before.t + 1);
        }
    }
}

#[test]
fn max_steps_truncates_every_scenario() {
    for name in scenario_names() {
        let mut w = world(&name);
        let max = w.config().reward.max_steps;
        let mut steps = 0;
        loop {
            let r = w.step(ActionKind::Stay).unwrap();
            steps += 1;
            if r.terminated || r.truncated {
                assert!(steps <= max, "{name}");
                if r.truncated {
                    assert_eq!(steps, max, "{name}");
                }
                break;
            }
        }
        let err = w.step(ActionKind::Stay).unwrap_err();
        assert!(err.to_string().contains("episode finished"), "{err}");
    }
}
