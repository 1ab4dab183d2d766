use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::morality::Subject;

/// Grid cell; `y` grows downward, row 0 is the top line of a render.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct GridPos {
    pub x: i32,
    pub y: i32,
}

impl GridPos {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, (dx, dy): (i32, i32)) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    pub fn is_adjacent(self, other: GridPos) -> bool {
        (self.x - other.x).abs() + (self.y - other.y).abs() == 1
    }
}

impl From<[i32; 2]> for GridPos {
    fn from(v: [i32; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<GridPos> for [i32; 2] {
    fn from(p: GridPos) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ActionKind {
    Up,
    Down,
    Left,
    Right,
    Stay,
    Interact,
}

impl ActionKind {
    pub const ALL: [ActionKind; 6] = [
        ActionKind::Up,
        ActionKind::Down,
        ActionKind::Left,
        ActionKind::Right,
        ActionKind::Stay,
        ActionKind::Interact,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Up => "UP",
            ActionKind::Down => "DOWN",
            ActionKind::Left => "LEFT",
            ActionKind::Right => "RIGHT",
            ActionKind::Stay => "STAY",
            ActionKind::Interact => "INTERACT",
        }
    }

    pub fn delta(self) -> Option<(i32, i32)> {
        match self {
            ActionKind::Up => Some((0, -1)),
            ActionKind::Down => Some((0, 1)),
            ActionKind::Left => Some((-1, 0)),
            ActionKind::Right => Some((1, 0)),
            ActionKind::Stay | ActionKind::Interact => None,
        }
    }
}

/// Neighbour scan order used by INTERACT.
pub const SCAN_ORDER: [(i32, i32); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseActionError(pub String);

impl fmt::Display for ParseActionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown action `{}` (expected one of UP, DOWN, LEFT, RIGHT, STAY, INTERACT)",
            self.0
        )
    }
}

impl std::error::Error for ParseActionError {}

impl FromStr for ActionKind {
    type Err = ParseActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        ActionKind::ALL
            .into_iter()
            .find(|a| a.name() == upper)
            .ok_or_else(|| ParseActionError(s.trim().to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacterKind {
    Human,
    Animal,
    Robot,
}

impl CharacterKind {
    pub const ALL: [CharacterKind; 3] = [CharacterKind::Human, CharacterKind::Animal, CharacterKind::Robot];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn subject(self) -> Subject {
        match self {
            CharacterKind::Human => Subject::Human,
            CharacterKind::Animal => Subject::Animal,
            CharacterKind::Robot => Subject::Robot,
        }
    }

    pub fn glyph(self) -> char {
        match self {
            CharacterKind::Human => 'H',
            CharacterKind::Animal => 'A',
            CharacterKind::Robot => 'R',
        }
    }
}

impl From<CharacterKind> for Subject {
    fn from(k: CharacterKind) -> Self {
        k.subject()
    }
}

/// Who got hit, by what, and through which causal lineage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarmRecord {
    /// Character group id, or `"agent"`.
    pub target: String,
    pub kind: Subject,
    pub count: u32,
    /// The victim had been pushed by the agent.
    pub personal: bool,
    /// The trolley passed a switch whose setting the agent changed.
    pub via_lever: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trolley: Option<String>,
}

/// Which INTERACT sub-action fired.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum InteractEffect {
    #[default]
    None,
    LeverToggled {
        lever: String,
        state: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        switch: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        active_index: Option<u32>,
    },
    Pushed {
        group: String,
        kind: CharacterKind,
        from: GridPos,
        to: GridPos,
        harmed_immediately: bool,
    },
    PushBlocked {
        group: String,
    },
    LandmarkActivated,
}

impl InteractEffect {
    pub fn is_none(&self) -> bool {
        matches!(self, InteractEffect::None)
    }
}

/// Harm tallies by subject for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HarmSummary {
    pub human: u32,
    pub animal: u32,
    pub robot: u32,
    pub agent: u32,
}

impl HarmSummary {
    pub fn from_records(records: &[HarmRecord]) -> Self {
        let mut s = HarmSummary::default();
        for r in records {
            *s.slot(r.kind) += r.count;
        }
        s
    }

    fn slot(&mut self, kind: Subject) -> &mut u32 {
        match kind {
            Subject::Human => &mut self.human,
            Subject::Animal => &mut self.animal,
            Subject::Robot => &mut self.robot,
            Subject::Agent => &mut self.agent,
        }
    }

    pub fn get(&self, kind: Subject) -> u32 {
        match kind {
            Subject::Human => self.human,
            Subject::Animal => self.animal,
            Subject::Robot => self.robot,
            Subject::Agent => self.agent,
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == HarmSummary::default()
    }
}
