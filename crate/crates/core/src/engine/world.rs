use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::types::{ActionKind, CharacterKind, GridPos, HarmRecord, InteractEffect, SCAN_ORDER};
use crate::morality::Subject;
use crate::scenario::{LandmarkMode, ScenarioConfig, ScenarioError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("episode finished; reset to start a new one")]
    EpisodeOver,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub id: String,
    pub cells: Vec<GridPos>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Switch {
    pub id: String,
    pub location: GridPos,
    /// Segment indices.
    pub branches: Vec<usize>,
    pub active_index: usize,
    pub initial_index: usize,
}

impl Switch {
    pub fn is_changed(&self) -> bool {
        self.active_index != self.initial_index
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lever {
    pub id: String,
    pub pos: GridPos,
    pub num_states: u32,
    pub state: u32,
    pub linked_switch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piston {
    pub id: String,
    pub pos: GridPos,
    pub linked_lever: Option<usize>,
    pub extended: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterGroup {
    pub id: String,
    pub kind: CharacterKind,
    pub quantity: u32,
    pub pos: GridPos,
    pub harmed: bool,
    pub pushable: bool,
    pub pushed_by_agent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trolley {
    pub id: String,
    pub segment: usize,
    pub index: usize,
    pub speed: u32,
    pub delay: u32,
    pub active: bool,
    pub harmed: bool,
    /// Passed a switch whose setting differs from the initial one.
    pub diverted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentState {
    pub pos: GridPos,
    pub harmed: bool,
}

/// What one call to [`World::step`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub harms: Vec<HarmRecord>,
    pub interact: InteractEffect,
    pub reached_landmark: bool,
}

/// Mutable grid state. Deterministic given the config and the action sequence.
#[derive(Debug, Clone)]
pub struct World {
    config: Arc<ScenarioConfig>,
    blocked: BTreeSet<GridPos>,
    pub segments: Vec<Segment>,
    pub switches: Vec<Switch>,
    pub levers: Vec<Lever>,
    pub pistons: Vec<Piston>,
    pub characters: Vec<CharacterGroup>,
    pub trolleys: Vec<Trolley>,
    /// Trolley indices sorted by id.
    trolley_order: Vec<usize>,
    switch_at: BTreeMap<GridPos, usize>,
    pub agent: AgentState,
    pub landmark: GridPos,
    pub t: u32,
    pub reached: bool,
    pub episode_over: bool,
}

impl World {
    pub fn new(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        Self::from_shared(Arc::new(config))
    }

    pub fn from_shared(config: Arc<ScenarioConfig>) -> Result<Self, ScenarioError> {
        config.validate()?;
        let seg_index: BTreeMap<&str, usize> = config
            .rails
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i))
            .collect();
        let segments = config
            .rails
            .iter()
            .map(|r| Segment {
                id: r.id.clone(),
                cells: r.cells.clone(),
            })
            .collect();
        let switches: Vec<Switch> = config
            .switches
            .iter()
            .map(|s| Switch {
                id: s.id.clone(),
                location: s.location,
                branches: s.branches.iter().map(|b| seg_index[b.as_str()]).collect(),
                active_index: s.active_index as usize,
                initial_index: s.active_index as usize,
            })
            .collect();
        let switch_index: BTreeMap<&str, usize> = config
            .switches
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), i))
            .collect();
        let levers: Vec<Lever> = config
            .levers
            .iter()
            .map(|l| Lever {
                id: l.id.clone(),
                pos: l.pos,
                num_states: l.num_states,
                state: l.state,
                linked_switch: l.linked_switch.as_deref().map(|s| switch_index[s]),
            })
            .collect();
        let lever_index: BTreeMap<&str, usize> = config
            .levers
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.as_str(), i))
            .collect();
        let pistons = config
            .pistons
            .iter()
            .map(|p| Piston {
                id: p.id.clone(),
                pos: p.pos,
                linked_lever: p.linked_lever.as_deref().map(|l| lever_index[l]),
                extended: p.extended,
            })
            .collect();
        let characters = config
            .characters
            .iter()
            .map(|c| CharacterGroup {
                id: c.id.clone(),
                kind: c.kind,
                quantity: c.quantity,
                pos: c.pos,
                harmed: false,
                pushable: c.pushable,
                pushed_by_agent: false,
            })
            .collect();
        let trolleys: Vec<Trolley> = config
            .trolleys
            .iter()
            .map(|t| Trolley {
                id: t.id.clone(),
                segment: seg_index[t.segment.as_str()],
                index: t.index as usize,
                speed: t.speed,
                delay: t.delay,
                active: true,
                harmed: false,
                diverted: false,
            })
            .collect();
        let mut trolley_order: Vec<usize> = (0..trolleys.len()).collect();
        trolley_order.sort_by(|a, b| trolleys[*a].id.cmp(&trolleys[*b].id));
        let switch_at = switches.iter().enumerate().map(|(i, s)| (s.location, i)).collect();
        Ok(Self {
            blocked: config.grid.blocked.iter().copied().collect(),
            segments,
            switches,
            levers,
            pistons,
            characters,
            trolleys,
            trolley_order,
            switch_at,
            agent: AgentState {
                pos: config.agent_start,
                harmed: false,
            },
            landmark: config.landmark,
            t: 0,
            reached: false,
            episode_over: false,
            config,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn shared_config(&self) -> Arc<ScenarioConfig> {
        Arc::clone(&self.config)
    }

    pub fn width(&self) -> u32 {
        self.config.grid.width
    }

    pub fn height(&self) -> u32 {
        self.config.grid.height
    }

    pub fn is_blocked(&self, p: GridPos) -> bool {
        self.blocked.contains(&p)
    }

    pub fn is_rail(&self, p: GridPos) -> bool {
        self.segments.iter().any(|s| s.cells.contains(&p))
    }

    pub fn switch_at(&self, p: GridPos) -> Option<&Switch> {
        self.switch_at.get(&p).map(|i| &self.switches[*i])
    }

    pub fn trolley_pos(&self, t: &Trolley) -> GridPos {
        self.segments[t.segment].cells[t.index]
    }

    pub fn trolley_at(&self, p: GridPos) -> Option<&Trolley> {
        self.trolleys.iter().find(|t| self.trolley_pos(t) == p)
    }

    pub fn lever_at(&self, p: GridPos) -> Option<&Lever> {
        self.levers.iter().find(|l| l.pos == p)
    }

    pub fn character_at(&self, p: GridPos) -> Option<&CharacterGroup> {
        self.characters.iter().find(|c| c.pos == p)
    }

    fn agent_can_enter(&self, p: GridPos) -> bool {
        self.config.in_grid(p)
            && !self.is_blocked(p)
            && self.character_at(p).is_none()
            && self.lever_at(p).is_none()
            && !self.trolleys.iter().any(|t| t.active && self.trolley_pos(t) == p)
    }

    pub fn step(&mut self, action: ActionKind) -> Result<StepResult, EngineError> {
        if self.episode_over {
            return Err(EngineError::EpisodeOver);
        }
        self.t += 1;
        let mut harms = Vec::new();
        let mut interact = InteractEffect::None;
        let mut reached_now = false;

        match action.delta() {
            Some(d) => {
                let target = self.agent.pos.offset(d);
                if self.agent_can_enter(target) {
                    self.agent.pos = target;
                }
                if self.config.landmark_mode == LandmarkMode::Arrive && self.agent.pos == self.landmark {
                    reached_now = true;
                }
            }
            None if action == ActionKind::Interact => {
                interact = self.resolve_interact(&mut harms);
                if interact == InteractEffect::LandmarkActivated {
                    reached_now = true;
                }
            }
            None => {
                if self.config.landmark_mode == LandmarkMode::Arrive && self.agent.pos == self.landmark {
                    reached_now = true;
                }
            }
        }
        self.reached |= reached_now;

        let agent_was_harmed = self.agent.harmed;
        self.advance_trolleys(&mut harms);
        let newly_harmed = self.agent.harmed && !agent_was_harmed;

        let reward_cfg = self.config.reward;
        let mut reward = reward_cfg.step_penalty;
        if reached_now && !self.agent.harmed {
            reward += reward_cfg.landmark_reward;
        }
        if newly_harmed {
            reward += reward_cfg.agent_harm_penalty;
        }
        let terminated = self.reached || self.agent.harmed;
        let truncated = !terminated && self.t >= reward_cfg.max_steps;
        self.episode_over = terminated || truncated;
        Ok(StepResult {
            reward,
            terminated,
            truncated,
            harms,
            interact,
            reached_landmark: reached_now,
        })
    }

    /// Lever, then pushable group, then (interact mode) the landmark.
    fn resolve_interact(&mut self, harms: &mut Vec<HarmRecord>) -> InteractEffect {
        let here = self.agent.pos;
        for d in SCAN_ORDER {
            let p = here.offset(d);
            if let Some(li) = self.levers.iter().position(|l| l.pos == p) {
                return self.toggle_lever(li);
            }
        }
        for d in SCAN_ORDER {
            let p = here.offset(d);
            let Some(ci) = self
                .characters
                .iter()
                .position(|c| c.pos == p && c.pushable && !c.harmed)
            else {
                continue;
            };
            return self.push(ci, d, harms);
        }
        if self.config.landmark_mode == LandmarkMode::Interact
            && (here == self.landmark || here.is_adjacent(self.landmark))
        {
            return InteractEffect::LandmarkActivated;
        }
        InteractEffect::None
    }

    fn toggle_lever(&mut self, li: usize) -> InteractEffect {
        let lever = &mut self.levers[li];
        lever.state = (lever.state + 1) % lever.num_states;
        let state = lever.state;
        let id = lever.id.clone();
        let mut switch = None;
        let mut active_index = None;
        if let Some(si) = lever.linked_switch {
            let sw = &mut self.switches[si];
            sw.active_index = (sw.initial_index + state as usize) % sw.branches.len();
            switch = Some(sw.id.clone());
            active_index = Some(sw.active_index as u32);
        }
        for p in self.pistons.iter_mut().filter(|p| p.linked_lever == Some(li)) {
            p.extended = !p.extended;
        }
        InteractEffect::LeverToggled {
            lever: id,
            state,
            switch,
            active_index,
        }
    }

    fn push(&mut self, ci: usize, d: (i32, i32), harms: &mut Vec<HarmRecord>) -> InteractEffect {
        let from = self.characters[ci].pos;
        let to = from.offset(d);
        let group = self.characters[ci].id.clone();
        let stopped_trolley = self.trolleys.iter().any(|t| !t.active && self.trolley_pos(t) == to);
        if !self.config.in_grid(to)
            || self.is_blocked(to)
            || self.character_at(to).is_some()
            || self.lever_at(to).is_some()
            || self.agent.pos == to
            || stopped_trolley
        {
            return InteractEffect::PushBlocked { group };
        }
        let hit = self
            .trolleys
            .iter()
            .position(|t| t.active && self.trolley_pos(t) == to);
        let ch = &mut self.characters[ci];
        ch.pos = to;
        ch.pushed_by_agent = true;
        let kind = ch.kind;
        if let Some(ti) = hit {
            ch.harmed = true;
            let quantity = ch.quantity;
            let trolley = &mut self.trolleys[ti];
            trolley.active = false;
            trolley.harmed = true;
            harms.push(HarmRecord {
                target: group.clone(),
                kind: kind.subject(),
                count: quantity,
                personal: true,
                via_lever: trolley.diverted,
                trolley: Some(trolley.id.clone()),
            });
        }
        InteractEffect::Pushed {
            group,
            kind,
            from,
            to,
            harmed_immediately: hit.is_some(),
        }
    }

    fn advance_trolleys(&mut self, harms: &mut Vec<HarmRecord>) {
        for oi in 0..self.trolley_order.len() {
            let ti = self.trolley_order[oi];
            if !self.trolleys[ti].active || self.t <= self.trolleys[ti].delay {
                continue;
            }
            for _ in 0..self.trolleys[ti].speed {
                if !self.trolleys[ti].active || !self.advance_one(ti, harms) {
                    break;
                }
            }
        }
    }

    /// Moves trolley `ti` one cell. Returns false when it could not move.
    fn advance_one(&mut self, ti: usize, harms: &mut Vec<HarmRecord>) -> bool {
        let (mut seg, mut idx) = (self.trolleys[ti].segment, self.trolleys[ti].index);
        let here = self.segments[seg].cells[idx];
        if let Some(&si) = self.switch_at.get(&here) {
            let sw = &self.switches[si];
            let branch = sw.branches[sw.active_index];
            if let Some(pos) = self.segments[branch].cells.iter().position(|c| *c == here) {
                seg = branch;
                idx = pos;
            }
            if sw.is_changed() {
                self.trolleys[ti].diverted = true;
            }
        }
        if idx + 1 >= self.segments[seg].cells.len() {
            self.trolleys[ti].active = false;
            return false;
        }
        let next = self.segments[seg].cells[idx + 1];
        if self
            .trolleys
            .iter()
            .enumerate()
            .any(|(j, o)| j != ti && self.trolley_pos(o) == next)
        {
            return false;
        }
        let trolley = &mut self.trolleys[ti];
        trolley.segment = seg;
        trolley.index = idx + 1;
        let diverted = trolley.diverted;
        let tid = trolley.id.clone();

        let mut hit = false;
        for ch in self.characters.iter_mut().filter(|c| c.pos == next && !c.harmed) {
            ch.harmed = true;
            hit = true;
            harms.push(HarmRecord {
                target: ch.id.clone(),
                kind: ch.kind.subject(),
                count: ch.quantity,
                personal: ch.pushed_by_agent,
                via_lever: diverted,
                trolley: Some(tid.clone()),
            });
        }
        if self.agent.pos == next && !self.agent.harmed {
            self.agent.harmed = true;
            hit = true;
            harms.push(HarmRecord {
                target: "agent".into(),
                kind: Subject::Agent,
                count: 1,
                personal: false,
                via_lever: diverted,
                trolley: Some(tid),
            });
        }
        let at_dead_end = idx + 2 >= self.segments[seg].cells.len() && !self.switch_at.contains_key(&next);
        let trolley = &mut self.trolleys[ti];
        if hit {
            trolley.active = false;
            trolley.harmed = true;
        } else if at_dead_end {
            trolley.active = false;
        }
        true
    }

    /// Line-oriented canonical form of the dynamic state.
    pub fn canonical_state(&self) -> String {
        let mut s = String::new();
        let b = |v: bool| u8::from(v);
        let _ = writeln!(
            s,
            "agent {} {} {}",
            self.agent.pos.x,
            self.agent.pos.y,
            b(self.agent.harmed)
        );
        for l in &self.levers {
            let _ = writeln!(s, "lever {} {}", l.id, l.state);
        }
        for sw in &self.switches {
            let _ = writeln!(s, "switch {} {}", sw.id, sw.active_index);
        }
        for t in &self.trolleys {
            let _ = writeln!(
                s,
                "trolley {} {} {} {} {} {}",
                t.id,
                self.segments[t.segment].id,
                t.index,
                b(t.active),
                b(t.harmed),
                b(t.diverted)
            );
        }
        for c in &self.characters {
            let _ = writeln!(
                s,
                "group {} {} {} {} {}",
                c.id,
                c.pos.x,
                c.pos.y,
                b(c.harmed),
                b(c.pushed_by_agent)
            );
        }
        for p in &self.pistons {
            let _ = writeln!(s, "piston {} {}", p.id, b(p.extended));
        }
        let _ = writeln!(s, "t {}", self.t);
        let _ = write!(s, "over {} {}", b(self.episode_over), b(self.reached));
        s
    }

    /// First 16 bytes of SHA-256 over [`World::canonical_state`], hex encoded.
    pub fn state_digest(&self) -> String {
        Self::digest_of(&self.canonical_state())
    }

    pub fn digest_of(canonical: &str) -> String {
        let full = Sha256::digest(canonical.as_bytes());
        hex::encode(&full[..16])
    }

    pub fn harmed_totals(&self) -> BTreeMap<CharacterKind, u32> {
        let mut m: BTreeMap<CharacterKind, u32> = CharacterKind::ALL.iter().map(|k| (*k, 0)).collect();
        for c in self.characters.iter().filter(|c| c.harmed) {
            *m.entry(c.kind).or_default() += c.quantity;
        }
        m
    }

    pub fn total_harmed(&self) -> u32 {
        self.harmed_totals().values().sum()
    }

    pub fn total_quantity(&self) -> u32 {
        self.characters.iter().map(|c| c.quantity).sum()
    }
}
