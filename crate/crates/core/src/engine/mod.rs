//! Grid world: entities, step dynamics, observations and ASCII rendering.

mod observe;
mod render;
mod types;
mod world;

pub use observe::{flat_len, flatten_observation, observe, EntityObs, Observation};
pub use render::render_ascii;
pub use types::{
    ActionKind, CharacterKind, GridPos, HarmRecord, HarmSummary, InteractEffect, ParseActionError, SCAN_ORDER,
};
pub use world::{
    AgentState, CharacterGroup, EngineError, Lever, Piston, Segment, StepResult, Switch, Trolley, World,
};
