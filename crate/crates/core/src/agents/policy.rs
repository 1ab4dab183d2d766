use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{ActionKind, Observation};
use crate::Error;

/// What a policy sees each step.
#[derive(Debug, Clone, Copy)]
pub struct PolicyInput<'a> {
    pub observation: &'a Observation,
    /// Hex state digest; the key for tabular policies.
    pub digest: &'a str,
    pub t: u32,
}

pub trait Policy: Send {
    fn act(&mut self, input: &PolicyInput<'_>) -> ActionKind;

    /// Called before every episode with that episode's seed.
    fn begin_episode(&mut self, _episode_seed: u64) {}

    /// Deterministic policies never draw random numbers.
    fn is_deterministic(&self) -> bool;

    fn name(&self) -> String;
}

/// Uniform over the six actions. Each episode draws from a stream derived
/// from the policy seed and the episode seed.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_action(&mut self) -> ActionKind {
        ActionKind::ALL[self.rng.gen_range(0..ActionKind::ALL.len())]
    }
}

pub fn random_policy(seed: u64) -> RandomPolicy {
    RandomPolicy::new(seed)
}

impl Policy for RandomPolicy {
    fn act(&mut self, _input: &PolicyInput<'_>) -> ActionKind {
        self.next_action()
    }

    fn begin_episode(&mut self, episode_seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(episode_seed);
        self.rng = rng;
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn name(&self) -> String {
        format!("random(seed={})", self.seed)
    }
}

/// Replays a fixed action list, then STAYs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedPolicy {
    label: String,
    actions: Vec<ActionKind>,
    cursor: usize,
}

impl ScriptedPolicy {
    pub fn new(actions: Vec<ActionKind>) -> Self {
        Self::named("scripted", actions)
    }

    pub fn named(label: impl Into<String>, actions: Vec<ActionKind>) -> Self {
        Self {
            label: label.into(),
            actions,
            cursor: 0,
        }
    }

    pub fn actions(&self) -> &[ActionKind] {
        &self.actions
    }
}

pub fn scripted_policy(actions: Vec<ActionKind>) -> ScriptedPolicy {
    ScriptedPolicy::new(actions)
}

impl Policy for ScriptedPolicy {
    fn act(&mut self, _input: &PolicyInput<'_>) -> ActionKind {
        let a = self.actions.get(self.cursor).copied().unwrap_or(ActionKind::Stay);
        self.cursor += 1;
        a
    }

    fn begin_episode(&mut self, _episode_seed: u64) {
        self.cursor = 0;
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        self.label.clone()
    }
}

/// Parses an action script: one action per line or whitespace/comma separated;
/// `#` starts a comment. Errors carry 1-based line numbers.
pub fn parse_action_script(text: &str) -> Result<Vec<ActionKind>, Error> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for token in body.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let a = token
                .parse::<ActionKind>()
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
            out.push(a);
        }
    }
    Ok(out)
}

pub const TABLE_FORMAT: &str = "moralgrid-qtable";
pub const TABLE_VERSION: u32 = 1;

/// Greedy lookup over digest -> action values. Unknown digests and ties pick
/// the earliest action in [`ActionKind::ALL`] order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TabularPolicy {
    #[serde(default)]
    pub label: String,
    pub table: BTreeMap<String, [f64; 6]>,
}

/// On-disk form of a [`TabularPolicy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub scenario: String,
    #[serde(default)]
    pub chain: String,
    pub actions: Vec<ActionKind>,
    pub entries: BTreeMap<String, [f64; 6]>,
}

pub fn greedy(values: &[f64; 6]) -> ActionKind {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    ActionKind::ALL[best]
}

impl TabularPolicy {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            table: BTreeMap::new(),
        }
    }

    pub fn lookup(&self, digest: &str) -> ActionKind {
        self.table.get(digest).map(greedy).unwrap_or(ActionKind::ALL[0])
    }

    pub fn to_file(&self, scenario: &str, chain: &str) -> TableFile {
        TableFile {
            format: TABLE_FORMAT.into(),
            version: TABLE_VERSION,
            scenario: scenario.into(),
            chain: chain.into(),
            actions: ActionKind::ALL.to_vec(),
            entries: self.table.clone(),
        }
    }

    pub fn from_file(file: TableFile) -> Result<Self, Error> {
        if file.format != TABLE_FORMAT {
            return Err(Error::Config(format!("not a policy table (format `{}`)", file.format)));
        }
        if file.version != TABLE_VERSION {
            return Err(Error::Config(format!(
                "unsupported policy table version {} (expected {TABLE_VERSION})",
                file.version
            )));
        }
        if file.actions != ActionKind::ALL {
            return Err(Error::Config("policy table action order does not match".into()));
        }
        Ok(Self {
            label: format!("table({})", file.scenario),
            table: file.entries,
        })
    }

    pub fn save(&self, path: &Path, scenario: &str, chain: &str) -> Result<(), Error> {
        let text = serde_json::to_string_pretty(&self.to_file(scenario, chain))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path)?;
        Self::from_file(serde_json::from_str(&text)?)
    }
}

impl Policy for TabularPolicy {
    fn act(&mut self, input: &PolicyInput<'_>) -> ActionKind {
        self.lookup(input.digest)
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        if self.label.is_empty() {
            "table".into()
        } else {
            self.label.clone()
        }
    }
}
