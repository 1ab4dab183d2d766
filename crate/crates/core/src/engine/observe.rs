use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::types::CharacterKind;
use super::world::World;

/// One entity's slice of an observation. Booleans are encoded as 0/1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EntityObs {
    Agent {
        x: f64,
        y: f64,
        harmed: u8,
        terminated: u8,
    },
    Character {
        x: f64,
        y: f64,
        harmed: u8,
        quantity: u32,
        kind: CharacterKind,
    },
    Lever {
        state: u32,
        num_states: u32,
    },
    Trolley {
        x: f64,
        y: f64,
        harmed: u8,
        active: u8,
    },
    Switch {
        active_index: u32,
    },
    Landmark {
        x: f64,
        y: f64,
    },
}

impl EntityObs {
    pub fn width(&self) -> usize {
        match self {
            EntityObs::Agent { .. } | EntityObs::Trolley { .. } => 4,
            EntityObs::Character { .. } => 4 + CharacterKind::ALL.len(),
            EntityObs::Lever { num_states, .. } => *num_states as usize,
            EntityObs::Switch { .. } => 1,
            EntityObs::Landmark { .. } => 2,
        }
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        match self {
            EntityObs::Agent {
                x,
                y,
                harmed,
                terminated,
            } => out.extend([*x, *y, f64::from(*harmed), f64::from(*terminated)]),
            EntityObs::Character {
                x,
                y,
                harmed,
                quantity,
                kind,
            } => {
                out.extend([*x, *y, f64::from(*harmed), f64::from(*quantity)]);
                out.extend(CharacterKind::ALL.iter().map(|k| if k == kind { 1.0 } else { 0.0 }));
            }
            EntityObs::Lever { state, num_states } => {
                out.extend((0..*num_states).map(|s| if s == *state { 1.0 } else { 0.0 }));
            }
            EntityObs::Trolley { x, y, harmed, active } => {
                out.extend([*x, *y, f64::from(*harmed), f64::from(*active)])
            }
            EntityObs::Switch { active_index } => out.push(f64::from(*active_index)),
            EntityObs::Landmark { x, y } => out.extend([*x, *y]),
        }
    }
}

/// Entity name to record, in the scenario's observation order.
pub type Observation = IndexMap<String, EntityObs>;

pub fn observe(world: &World) -> Observation {
    let cfg = world.config();
    let normalize = cfg.observation.normalize;
    let (w, h) = (world.width(), world.height());
    let coord = |v: i32, extent: u32| -> f64 {
        if normalize {
            if extent > 1 {
                f64::from(v) / f64::from(extent - 1)
            } else {
                0.0
            }
        } else {
            f64::from(v)
        }
    };
    let b = |v: bool| u8::from(v);
    let mut obs = IndexMap::new();
    for name in cfg.observation_entities() {
        let record = if name == "agent" {
            EntityObs::Agent {
                x: coord(world.agent.pos.x, w),
                y: coord(world.agent.pos.y, h),
                harmed: b(world.agent.harmed),
                terminated: b(world.reached || world.agent.harmed),
            }
        } else if name == "landmark" {
            EntityObs::Landmark {
                x: coord(world.landmark.x, w),
                y: coord(world.landmark.y, h),
            }
        } else if let Some(c) = world.characters.iter().find(|c| c.id == name) {
            EntityObs::Character {
                x: coord(c.pos.x, w),
                y: coord(c.pos.y, h),
                harmed: b(c.harmed),
                quantity: c.quantity,
                kind: c.kind,
            }
        } else if let Some(l) = world.levers.iter().find(|l| l.id == name) {
            EntityObs::Lever {
                state: l.state,
                num_states: l.num_states,
            }
        } else if let Some(t) = world.trolleys.iter().find(|t| t.id == name) {
            let p = world.trolley_pos(t);
            EntityObs::Trolley {
                x: coord(p.x, w),
                y: coord(p.y, h),
                harmed: b(t.harmed),
                active: b(t.active),
            }
        } else if let Some(s) = world.switches.iter().find(|s| s.id == name) {
            EntityObs::Switch {
                active_index: s.active_index as u32,
            }
        } else {
            // validated scenarios never list unknown names
            continue;
        };
        obs.insert(name, record);
    }
    obs
}

/// Concatenates records in observation order.
pub fn flatten_observation(obs: &Observation) -> Vec<f64> {
    let mut out = Vec::with_capacity(obs.values().map(EntityObs::width).sum());
    for record in obs.values() {
        record.flatten_into(&mut out);
    }
    out
}

/// Length of [`flatten_observation`] for this world's scenario.
pub fn flat_len(world: &World) -> usize {
    observe(world).values().map(EntityObs::width).sum()
}
