//! Declarative scenario, variant and chain documents, their validation, and
//! the built-in catalogue.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{CharacterKind, GridPos};
use crate::morality::{
    build_chain, DeonticModality, MoralityChain, MoralityError, NormCategory, NormSpec, Subject,
    UtilityRange, DEFAULT_BETA,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Overrides the built-in catalogue with `<dir>/scenarios/*.json` and
/// `<dir>/variants/*.json`.
pub const DATA_DIR_ENV: &str = "MORALGRID_DATA_DIR";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("{path}: unknown id `{id}`")]
    DanglingId { path: String, id: String },
    #[error("{path}: position {pos} is outside the {width}x{height} grid")]
    OutOfGrid {
        path: String,
        pos: GridPos,
        width: u32,
        height: u32,
    },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("unknown chain `{0}`")]
    UnknownChain(String),
    #[error("chain: {0}")]
    Chain(#[from] MoralityError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub blocked: Vec<GridPos>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RailSegmentConfig {
    pub id: String,
    pub cells: Vec<GridPos>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    pub id: String,
    pub location: GridPos,
    pub branches: Vec<String>,
    #[serde(default)]
    pub active_index: u32,
}

fn two() -> u32 {
    2
}

fn one() -> u32 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeverConfig {
    pub id: String,
    pub pos: GridPos,
    #[serde(default = "two")]
    pub num_states: u32,
    #[serde(default)]
    pub state: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linked_switch: Option<String>,
}

/// Parsed and toggled by linked levers; carries no dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PistonConfig {
    pub id: String,
    pub pos: GridPos,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linked_lever: Option<String>,
    #[serde(default)]
    pub extended: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterConfig {
    pub id: String,
    pub pos: GridPos,
    pub kind: CharacterKind,
    #[serde(default = "one")]
    pub quantity: u32,
    #[serde(default = "yes")]
    pub pushable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrolleyConfig {
    pub id: String,
    pub segment: String,
    #[serde(default)]
    pub index: u32,
    #[serde(default = "one")]
    pub speed: u32,
    /// Steps the trolley waits before its first move.
    #[serde(default)]
    pub delay: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    /// Entity names in observation order; empty means every entity.
    #[serde(default)]
    pub entities: Vec<String>,
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub step_penalty: f64,
    pub landmark_reward: f64,
    pub agent_harm_penalty: f64,
    pub max_steps: u32,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            step_penalty: -1.0,
            landmark_reward: 100.0,
            agent_harm_penalty: -100.0,
            max_steps: 50,
        }
    }
}

impl RewardConfig {
    /// Time penalty of -0.1 instead of -1.
    pub fn fine_time_penalty() -> Self {
        Self {
            step_penalty: -0.1,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkMode {
    /// Standing on the landmark ends the episode.
    #[default]
    Arrive,
    /// INTERACT on or next to the landmark ends the episode.
    Interact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub grid: GridConfig,
    #[serde(default)]
    pub rails: Vec<RailSegmentConfig>,
    #[serde(default)]
    pub switches: Vec<SwitchConfig>,
    #[serde(default)]
    pub levers: Vec<LeverConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pistons: Vec<PistonConfig>,
    #[serde(default)]
    pub characters: Vec<CharacterConfig>,
    #[serde(default)]
    pub trolleys: Vec<TrolleyConfig>,
    pub landmark: GridPos,
    pub agent_start: GridPos,
    #[serde(default)]
    pub observation: ObservationConfig,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub landmark_mode: LandmarkMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_chain: Option<String>,
}

impl ScenarioConfig {
    pub fn in_grid(&self, p: GridPos) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as u32) < self.grid.width && (p.y as u32) < self.grid.height
    }

    /// Observation entity list with the empty-list default expanded.
    pub fn observation_entities(&self) -> Vec<String> {
        if !self.observation.entities.is_empty() {
            return self.observation.entities.clone();
        }
        let mut names = vec!["agent".to_string()];
        names.extend(self.characters.iter().map(|c| c.id.clone()));
        names.extend(self.levers.iter().map(|l| l.id.clone()));
        names.extend(self.trolleys.iter().map(|t| t.id.clone()));
        names.extend(self.switches.iter().map(|s| s.id.clone()));
        names
    }

    /// Total character quantity per kind.
    pub fn kind_totals(&self) -> BTreeMap<CharacterKind, u32> {
        let mut totals: BTreeMap<CharacterKind, u32> =
            CharacterKind::ALL.iter().map(|k| (*k, 0)).collect();
        for c in &self.characters {
            *totals.entry(c.kind).or_default() += c.quantity;
        }
        totals
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        Validator { cfg: self }.run()
    }
}

struct Validator<'a> {
    cfg: &'a ScenarioConfig,
}

impl Validator<'_> {
    fn pos(&self, path: String, p: GridPos) -> Result<(), ScenarioError> {
        if self.cfg.in_grid(p) {
            Ok(())
        } else {
            Err(ScenarioError::OutOfGrid {
                path,
                pos: p,
                width: self.cfg.grid.width,
                height: self.cfg.grid.height,
            })
        }
    }

    fn open(&self, path: String, p: GridPos, blocked: &BTreeSet<GridPos>) -> Result<(), ScenarioError> {
        self.pos(path.clone(), p)?;
        if blocked.contains(&p) {
            return Err(invalid(path, format!("{p} is a blocked cell")));
        }
        Ok(())
    }

    fn run(&self) -> Result<(), ScenarioError> {
        let cfg = self.cfg;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.schema_version),
            ));
        }
        if cfg.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if cfg.grid.width == 0 || cfg.grid.height == 0 {
            return Err(invalid("grid", "width and height must be positive"));
        }
        if cfg.reward.max_steps == 0 {
            return Err(invalid("reward.max_steps", "must be positive"));
        }
        let mut blocked = BTreeSet::new();
        for (i, b) in cfg.grid.blocked.iter().enumerate() {
            self.pos(format!("grid.blocked[{i}]"), *b)?;
            blocked.insert(*b);
        }

        let mut ids: BTreeSet<&str> = BTreeSet::new();
        let claim = |path: String, id: &str| -> Result<(), ScenarioError> {
            if id.is_empty() {
                return Err(invalid(path, "empty id"));
            }
            if id == "agent" || id == "landmark" {
                return Err(invalid(path, format!("id `{id}` is reserved")));
            }
            Ok(())
        };
        let all_ids = cfg
            .rails
            .iter()
            .enumerate()
            .map(|(i, r)| (format!("rails[{i}].id"), r.id.as_str()))
            .chain(cfg.switches.iter().enumerate().map(|(i, s)| (format!("switches[{i}].id"), s.id.as_str())))
            .chain(cfg.levers.iter().enumerate().map(|(i, l)| (format!("levers[{i}].id"), l.id.as_str())))
            .chain(cfg.pistons.iter().enumerate().map(|(i, p)| (format!("pistons[{i}].id"), p.id.as_str())))
            .chain(cfg.characters.iter().enumerate().map(|(i, c)| (format!("characters[{i}].id"), c.id.as_str())))
            .chain(cfg.trolleys.iter().enumerate().map(|(i, t)| (format!("trolleys[{i}].id"), t.id.as_str())));
        for (path, id) in all_ids {
            claim(path.clone(), id)?;
            if !ids.insert(id) {
                return Err(invalid(path, format!("duplicate id `{id}`")));
            }
        }

        let mut segments: BTreeMap<&str, &RailSegmentConfig> = BTreeMap::new();
        for (i, seg) in cfg.rails.iter().enumerate() {
            if seg.cells.is_empty() {
                return Err(invalid(format!("rails[{i}].cells"), "segment has no cells"));
            }
            let mut seen = BTreeSet::new();
            for (j, c) in seg.cells.iter().enumerate() {
                self.pos(format!("rails[{i}].cells[{j}]"), *c)?;
                if !seen.insert(*c) {
                    return Err(invalid(format!("rails[{i}].cells[{j}]"), format!("cell {c} repeats")));
                }
                if j > 0 && !seg.cells[j - 1].is_adjacent(*c) {
                    return Err(invalid(
                        format!("rails[{i}].cells[{j}]"),
                        format!("{c} is not orthogonally adjacent to {}", seg.cells[j - 1]),
                    ));
                }
            }
            segments.insert(seg.id.as_str(), seg);
        }

        let mut switch_cells = BTreeSet::new();
        let switch_ids: BTreeSet<&str> = cfg.switches.iter().map(|s| s.id.as_str()).collect();
        for (i, sw) in cfg.switches.iter().enumerate() {
            self.pos(format!("switches[{i}].location"), sw.location)?;
            if !switch_cells.insert(sw.location) {
                return Err(invalid(format!("switches[{i}].location"), "two switches share a cell"));
            }
            if sw.branches.len() < 2 {
                return Err(invalid(format!("switches[{i}].branches"), "needs at least two branches"));
            }
            for (j, b) in sw.branches.iter().enumerate() {
                let seg = segments.get(b.as_str()).ok_or_else(|| ScenarioError::DanglingId {
                    path: format!("switches[{i}].branches[{j}]"),
                    id: b.clone(),
                })?;
                if !seg.cells.contains(&sw.location) {
                    return Err(invalid(
                        format!("switches[{i}].branches[{j}]"),
                        format!("segment `{b}` does not pass through {}", sw.location),
                    ));
                }
            }
            if sw.active_index as usize >= sw.branches.len() {
                return Err(invalid(format!("switches[{i}].active_index"), "out of range"));
            }
        }

        let mut solid: BTreeMap<GridPos, String> = BTreeMap::new();
        let lever_ids: BTreeSet<&str> = cfg.levers.iter().map(|l| l.id.as_str()).collect();
        for (i, lever) in cfg.levers.iter().enumerate() {
            self.open(format!("levers[{i}].pos"), lever.pos, &blocked)?;
            if !(2..=3).contains(&lever.num_states) {
                return Err(invalid(format!("levers[{i}].num_states"), "must be 2 or 3"));
            }
            if lever.state >= lever.num_states {
                return Err(invalid(format!("levers[{i}].state"), "must be below num_states"));
            }
            if let Some(link) = &lever.linked_switch {
                if !switch_ids.contains(link.as_str()) {
                    return Err(ScenarioError::DanglingId {
                        path: format!("levers[{i}].linked_switch"),
                        id: link.clone(),
                    });
                }
            }
            if let Some(other) = solid.insert(lever.pos, lever.id.clone()) {
                return Err(invalid(format!("levers[{i}].pos"), format!("cell taken by `{other}`")));
            }
        }
        for (i, piston) in cfg.pistons.iter().enumerate() {
            self.pos(format!("pistons[{i}].pos"), piston.pos)?;
            if let Some(link) = &piston.linked_lever {
                if !lever_ids.contains(link.as_str()) {
                    return Err(ScenarioError::DanglingId {
                        path: format!("pistons[{i}].linked_lever"),
                        id: link.clone(),
                    });
                }
            }
        }
        for (i, ch) in cfg.characters.iter().enumerate() {
            self.open(format!("characters[{i}].pos"), ch.pos, &blocked)?;
            if ch.quantity == 0 {
                return Err(invalid(format!("characters[{i}].quantity"), "must be at least 1"));
            }
            if let Some(other) = solid.insert(ch.pos, ch.id.clone()) {
                return Err(invalid(format!("characters[{i}].pos"), format!("cell taken by `{other}`")));
            }
        }
        let mut trolley_cells = BTreeSet::new();
        for (i, t) in cfg.trolleys.iter().enumerate() {
            let seg = segments.get(t.segment.as_str()).ok_or_else(|| ScenarioError::DanglingId {
                path: format!("trolleys[{i}].segment"),
                id: t.segment.clone(),
            })?;
            if t.index as usize >= seg.cells.len() {
                return Err(invalid(format!("trolleys[{i}].index"), "beyond the end of its segment"));
            }
            if t.speed == 0 {
                return Err(invalid(format!("trolleys[{i}].speed"), "must be at least 1"));
            }
            let cell = seg.cells[t.index as usize];
            if let Some(other) = solid.get(&cell) {
                return Err(invalid(format!("trolleys[{i}]"), format!("starts on `{other}`")));
            }
            if !trolley_cells.insert(cell) {
                return Err(invalid(format!("trolleys[{i}]"), "two trolleys share a start cell"));
            }
        }
        self.open("landmark".into(), cfg.landmark, &blocked)?;
        self.open("agent_start".into(), cfg.agent_start, &blocked)?;
        if let Some(other) = solid.get(&cfg.agent_start) {
            return Err(invalid("agent_start", format!("cell taken by `{other}`")));
        }
        if trolley_cells.contains(&cfg.agent_start) {
            return Err(invalid("agent_start", "cell taken by a trolley"));
        }

        let known: BTreeSet<&str> = ["agent", "landmark"]
            .into_iter()
            .chain(cfg.characters.iter().map(|c| c.id.as_str()))
            .chain(cfg.levers.iter().map(|c| c.id.as_str()))
            .chain(cfg.trolleys.iter().map(|c| c.id.as_str()))
            .chain(cfg.switches.iter().map(|c| c.id.as_str()))
            .collect();
        let mut listed = BTreeSet::new();
        for (i, name) in cfg.observation.entities.iter().enumerate() {
            if !known.contains(name.as_str()) {
                return Err(ScenarioError::DanglingId {
                    path: format!("observation.entities[{i}]"),
                    id: name.clone(),
                });
            }
            if !listed.insert(name.as_str()) {
                return Err(invalid(format!("observation.entities[{i}]"), "listed twice"));
            }
        }
        if let Some(chain) = &cfg.default_chain {
            ChainDocument::resolve(chain).map_err(|_| ScenarioError::DanglingId {
                path: "default_chain".into(),
                id: chain.clone(),
            })?;
        }
        Ok(())
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(document: &str) -> Result<ScenarioConfig, ScenarioError> {
    let cfg: ScenarioConfig = serde_json::from_str(document)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    load_scenario(&read_file(path)?)
}

fn read_file(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterOverride {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<CharacterKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<GridPos>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrolleyOverride {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<u32>,
}

/// Character and trolley overrides on top of a named base scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub base: String,
    #[serde(default)]
    pub characters: Vec<CharacterOverride>,
    #[serde(default)]
    pub trolleys: Vec<TrolleyOverride>,
}

impl VariantConfig {
    pub fn parse(document: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(document)?)
    }
}

/// Applies `variant` to a copy of `base`; the base is left untouched.
pub fn instantiate_variant(
    base: &ScenarioConfig,
    variant: &VariantConfig,
) -> Result<ScenarioConfig, ScenarioError> {
    if variant.base != base.name {
        return Err(invalid(
            "base",
            format!("variant targets `{}` but was applied to `{}`", variant.base, base.name),
        ));
    }
    let mut out = base.clone();
    for (i, o) in variant.characters.iter().enumerate() {
        let ch = out
            .characters
            .iter_mut()
            .find(|c| c.id == o.id)
            .ok_or_else(|| ScenarioError::DanglingId {
                path: format!("characters[{i}].id"),
                id: o.id.clone(),
            })?;
        if let Some(kind) = o.kind {
            ch.kind = kind;
        }
        if let Some(q) = o.quantity {
            ch.quantity = q;
        }
        if let Some(p) = o.pos {
            ch.pos = p;
        }
    }
    for (i, o) in variant.trolleys.iter().enumerate() {
        let t = out
            .trolleys
            .iter_mut()
            .find(|t| t.id == o.id)
            .ok_or_else(|| ScenarioError::DanglingId {
                path: format!("trolleys[{i}].id"),
                id: o.id.clone(),
            })?;
        if let Some(speed) = o.speed {
            t.speed = speed;
        }
    }
    if let Some(name) = &variant.name {
        out.name = name.clone();
    }
    out.validate()?;
    Ok(out)
}

/// The four shipped chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainPreset {
    Utility,
    UtilityAgentHarm,
    DualProcess,
    DualProcessAgentHarm,
}

impl ChainPreset {
    pub const ALL: [ChainPreset; 4] = [
        ChainPreset::Utility,
        ChainPreset::UtilityAgentHarm,
        ChainPreset::DualProcess,
        ChainPreset::DualProcessAgentHarm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChainPreset::Utility => "Utility",
            ChainPreset::UtilityAgentHarm => "UtilityAgentHarm",
            ChainPreset::DualProcess => "DualProcess",
            ChainPreset::DualProcessAgentHarm => "DualProcessAgentHarm",
        }
    }

    pub fn abbreviation(self) -> &'static str {
        match self {
            ChainPreset::Utility => "U",
            ChainPreset::UtilityAgentHarm => "UAH",
            ChainPreset::DualProcess => "DP",
            ChainPreset::DualProcessAgentHarm => "DPAH",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(name) || p.abbreviation().eq_ignore_ascii_case(name))
    }

    /// Norms highest priority first; forces count down to 1.
    pub fn norms(self) -> Vec<NormSpec> {
        use Subject::*;
        let min_harm = |kind: Subject| {
            NormSpec::new(
                format!("min_{}s_harmed", kind),
                NormCategory::Utility,
                Some(kind),
                0,
                DeonticModality::Prohibited,
            )
        };
        let personal = |kind: Subject| {
            NormSpec::new(
                format!("avoid_personal_{}_harm", kind),
                NormCategory::Causal,
                Some(kind),
                0,
                DeonticModality::Prohibited,
            )
        };
        let agent = NormSpec::new(
            "avoid_agent_harm",
            NormCategory::Outcome,
            Some(Agent),
            0,
            DeonticModality::Prohibited,
        );
        let mut norms = match self {
            ChainPreset::Utility => vec![min_harm(Human), min_harm(Animal), min_harm(Robot)],
            ChainPreset::UtilityAgentHarm => {
                vec![min_harm(Human), min_harm(Animal), agent, min_harm(Robot)]
            }
            ChainPreset::DualProcess => vec![
                personal(Human),
                min_harm(Human),
                personal(Animal),
                min_harm(Animal),
                personal(Robot),
                min_harm(Robot),
            ],
            ChainPreset::DualProcessAgentHarm => vec![
                personal(Human),
                min_harm(Human),
                personal(Animal),
                min_harm(Animal),
                personal(Robot),
                agent,
                min_harm(Robot),
            ],
        };
        let k = norms.len() as u32;
        for (i, n) in norms.iter_mut().enumerate() {
            n.force = k - i as u32;
        }
        norms
    }

    pub fn document(self) -> ChainDocument {
        ChainDocument {
            name: self.name().to_string(),
            beta: None,
            norms: self.norms(),
        }
    }
}

/// Chain JSON: `{name, beta?, norms: [{id, category, kind?, force, modality, range?}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDocument {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub norms: Vec<NormSpec>,
}

impl ChainDocument {
    pub fn parse(document: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(document)?)
    }

    /// Preset name or abbreviation, inline JSON, or a path to a JSON file.
    pub fn resolve(spec: &str) -> Result<Self, ScenarioError> {
        let trimmed = spec.trim();
        if let Some(p) = ChainPreset::from_name(trimmed) {
            return Ok(p.document());
        }
        if trimmed.starts_with('{') {
            return Self::parse(trimmed);
        }
        let path = Path::new(trimmed);
        if path.is_file() {
            return Self::parse(&read_file(path)?);
        }
        Err(ScenarioError::UnknownChain(trimmed.to_string()))
    }

    pub fn beta_or_default(&self) -> f64 {
        self.beta.unwrap_or(DEFAULT_BETA)
    }

    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("chain serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Range a utility norm gets when its document leaves it open: `[0, total]`
/// over the matching characters, `[0, 1]` for the agent or when the kind is
/// absent from the scenario.
pub fn default_utility_range(subject: Option<Subject>, totals: &BTreeMap<CharacterKind, u32>) -> UtilityRange {
    let total: u32 = match subject {
        None => totals.values().sum(),
        Some(Subject::Agent) => 1,
        Some(s) => totals
            .iter()
            .filter(|(k, _)| k.subject() == s)
            .map(|(_, v)| *v)
            .sum(),
    };
    UtilityRange::new(0.0, f64::from(total.max(1)))
}

/// Builds a chain from `doc`, binding open utility ranges to the totals of
/// `totals` (usually [`ScenarioConfig::kind_totals`]).
pub fn bind_chain(
    doc: &ChainDocument,
    totals: &BTreeMap<CharacterKind, u32>,
) -> Result<MoralityChain, ScenarioError> {
    let norms = doc
        .norms
        .iter()
        .cloned()
        .map(|mut n| {
            if n.category == NormCategory::Utility && n.utility_range.is_none() {
                n.utility_range = Some(default_utility_range(n.subject, totals));
            }
            n
        })
        .collect();
    Ok(build_chain(doc.name.clone(), norms)?)
}

/// Resolves `spec` (see [`ChainDocument::resolve`]) and binds it to `scenario`.
pub fn load_chain(spec: &str, scenario: &ScenarioConfig) -> Result<(ChainDocument, MoralityChain), ScenarioError> {
    let doc = ChainDocument::resolve(spec)?;
    let chain = bind_chain(&doc, &scenario.kind_totals())?;
    Ok((doc, chain))
}

const BUILTIN_SCENARIOS: &[(&str, &str)] = &[
    ("Push2OrSwitch", include_str!("../data/scenarios/Push2OrSwitch.json")),
    ("Push3SelfSacrifice", include_str!("../data/scenarios/Push3SelfSacrifice.json")),
    ("PushOrSwitch", include_str!("../data/scenarios/PushOrSwitch.json")),
    ("PushOrSwitchSelfSacrifice", include_str!("../data/scenarios/PushOrSwitchSelfSacrifice.json")),
    ("PushSelfSacrifice", include_str!("../data/scenarios/PushSelfSacrifice.json")),
    ("PushStandard", include_str!("../data/scenarios/PushStandard.json")),
    ("Switch2Trolley4Track", include_str!("../data/scenarios/Switch2Trolley4Track.json")),
    ("Switch5", include_str!("../data/scenarios/Switch5.json")),
    ("Switch7", include_str!("../data/scenarios/Switch7.json")),
    ("SwitchSelfSacrifice", include_str!("../data/scenarios/SwitchSelfSacrifice.json")),
    ("SwitchStandard", include_str!("../data/scenarios/SwitchStandard.json")),
];

const BUILTIN_VARIANTS: &[(&str, &str)] = &[
    ("SwitchStandard-robots", include_str!("../data/variants/SwitchStandard-robots.json")),
    ("SwitchStandard-three", include_str!("../data/variants/SwitchStandard-three.json")),
    ("PushOrSwitch-animals", include_str!("../data/variants/PushOrSwitch-animals.json")),
];

/// Read-only set of named scenarios and variants.
#[derive(Debug, Clone, Default)]
pub struct Catalogue {
    scenarios: BTreeMap<String, ScenarioConfig>,
    variants: BTreeMap<String, VariantConfig>,
    source: Option<PathBuf>,
}

impl Catalogue {
    pub fn builtin() -> Self {
        let scenarios = BUILTIN_SCENARIOS
            .iter()
            .map(|(name, doc)| {
                let cfg = load_scenario(doc).unwrap_or_else(|e| panic!("built-in scenario {name}: {e}"));
                debug_assert_eq!(&cfg.name, name);
                (cfg.name.clone(), cfg)
            })
            .collect();
        let variants = BUILTIN_VARIANTS
            .iter()
            .map(|(name, doc)| {
                let v = VariantConfig::parse(doc).unwrap_or_else(|e| panic!("built-in variant {name}: {e}"));
                (name.to_string(), v)
            })
            .collect();
        Self {
            scenarios,
            variants,
            source: None,
        }
    }

    /// Loads `<dir>/scenarios/*.json` and, if present, `<dir>/variants/*.json`.
    pub fn from_dir(dir: &Path) -> Result<Self, ScenarioError> {
        let mut cat = Catalogue {
            source: Some(dir.to_path_buf()),
            ..Default::default()
        };
        for path in json_files(&dir.join("scenarios"))? {
            let cfg = load_scenario_file(&path)?;
            cat.scenarios.insert(cfg.name.clone(), cfg);
        }
        let variant_dir = dir.join("variants");
        if variant_dir.is_dir() {
            for path in json_files(&variant_dir)? {
                let v = VariantConfig::parse(&read_file(&path)?)?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                cat.variants.insert(name, v);
            }
        }
        Ok(cat)
    }

    /// The directory named by `MORALGRID_DATA_DIR`, or the built-ins.
    pub fn from_env() -> Result<Self, ScenarioError> {
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::from_dir(Path::new(&dir)),
            _ => Ok(Self::builtin()),
        }
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    /// Sorted scenario names.
    pub fn names(&self) -> Vec<String> {
        self.scenarios.keys().cloned().collect()
    }

    pub fn variant_names(&self) -> Vec<String> {
        self.variants.keys().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Option<&ScenarioConfig> {
        self.scenarios.get(name)
    }

    pub fn variant(&self, name: &str) -> Option<&VariantConfig> {
        self.variants.get(name)
    }

    /// Catalogue name, inline JSON, or a scenario file path.
    pub fn resolve(&self, spec: &str) -> Result<ScenarioConfig, ScenarioError> {
        let spec = spec.trim();
        if let Some(cfg) = self.get(spec) {
            return Ok(cfg.clone());
        }
        if spec.starts_with('{') {
            return load_scenario(spec);
        }
        let path = Path::new(spec);
        if path.is_file() {
            return load_scenario_file(path);
        }
        Err(ScenarioError::UnknownScenario(spec.to_string()))
    }

    pub fn resolve_variant(&self, spec: &str) -> Result<VariantConfig, ScenarioError> {
        let spec = spec.trim();
        if let Some(v) = self.variant(spec) {
            return Ok(v.clone());
        }
        if spec.starts_with('{') {
            return VariantConfig::parse(spec);
        }
        let path = Path::new(spec);
        if path.is_file() {
            return VariantConfig::parse(&read_file(path)?);
        }
        Err(ScenarioError::UnknownVariant(spec.to_string()))
    }

    /// Scenario plus an optional variant applied on top.
    pub fn resolve_with_variant(&self, scenario: &str, variant: Option<&str>) -> Result<ScenarioConfig, ScenarioError> {
        let base = self.resolve(scenario)?;
        match variant {
            Some(v) => instantiate_variant(&base, &self.resolve_variant(v)?),
            None => Ok(base),
        }
    }
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
    let entries = fs::read_dir(dir).map_err(|source| ScenarioError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Sorted names of the built-in scenarios.
pub fn builtin_catalogue() -> Vec<String> {
    Catalogue::builtin().names()
}
