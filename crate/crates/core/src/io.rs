//! File formats: game and strategy JSON, CSV number formatting.
//!
//! Game file:
//!
//! ```json
//! {
//!   "n": 2,
//!   "delta": 0.9,
//!   "tables": [[[3.0, 1.0], [4.0, 0.0]], [[3.0, 3.0], [1.0, 1.0]]],
//!   "initial_probs": [0.0, 0.0],
//!   "kind": "pgg",
//!   "equalizer": {"omega": [1.0], "gamma": 2.0, "phi": 0.5, "leader_init": 0.0}
//! }
//! ```
//!
//! `tables[i][0][k]` is player `i`'s payoff for action 1 with `k` other
//! 1-selectors, `tables[i][1][k]` the same for action 2. `kind` and
//! `equalizer` are optional.
//!
//! Strategy file: `{"strategies": [{"probs": [...], "init_prob": 0.0}, ...]}`
//! with `probs` indexed by 1-based full state minus one.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, MemoryOneStrategy, PayoffTable};
use crate::zd::EqualizerSpec;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualizerFile {
    pub omega: Vec<f64>,
    pub gamma: f64,
    pub phi: f64,
    pub leader_init: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameFile {
    pub n: usize,
    pub delta: f64,
    pub tables: Vec<[Vec<f64>; 2]>,
    pub initial_probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equalizer: Option<EqualizerFile>,
}

/// A parsed game file.
#[derive(Clone, Debug, PartialEq)]
pub struct GameDocument {
    pub game: GameSpec,
    pub kind: Option<String>,
    pub equalizer: Option<EqualizerSpec>,
}

impl GameDocument {
    pub fn new(game: GameSpec) -> Self {
        GameDocument {
            game,
            kind: None,
            equalizer: None,
        }
    }

    pub fn to_file(&self) -> GameFile {
        GameFile {
            n: self.game.n(),
            delta: self.game.delta(),
            tables: self
                .game
                .tables()
                .iter()
                .map(|t| {
                    [
                        t.row(crate::game::Action::One).to_vec(),
                        t.row(crate::game::Action::Two).to_vec(),
                    ]
                })
                .collect(),
            initial_probs: self.game.initial_probs().to_vec(),
            kind: self.kind.clone(),
            equalizer: self.equalizer.as_ref().map(|e| EqualizerFile {
                omega: e.omega().to_vec(),
                gamma: e.gamma(),
                phi: e.phi(),
                leader_init: e.leader_init(),
            }),
        }
    }

    pub fn from_file(file: GameFile) -> Result<Self> {
        if file.tables.len() != file.n {
            return Err(Error::InvalidGame(format!(
                "n = {} but {} tables given",
                file.n,
                file.tables.len()
            )));
        }
        let tables = file
            .tables
            .into_iter()
            .map(|[one, two]| PayoffTable::new(one, two))
            .collect::<Result<Vec<_>>>()?;
        let game = GameSpec::new(file.delta, tables, file.initial_probs)?;
        let equalizer = file
            .equalizer
            .map(|e| EqualizerSpec::new(e.omega, e.gamma, e.phi, e.leader_init))
            .transpose()?;
        Ok(GameDocument {
            game,
            kind: file.kind,
            equalizer,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())? + "\n")
    }

    /// Parses a game document. JSON has no NaN/Inf literals and
    /// out-of-range numbers are rejected by the parser, so every accepted
    /// number is finite.
    pub fn from_json(text: &str) -> Result<Self> {
        GameDocument::from_file(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        GameDocument::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyEntry {
    pub probs: Vec<f64>,
    pub init_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyFile {
    pub strategies: Vec<StrategyEntry>,
}

impl StrategyFile {
    pub fn from_strategies(strategies: &[MemoryOneStrategy]) -> Self {
        StrategyFile {
            strategies: strategies
                .iter()
                .map(|s| StrategyEntry {
                    probs: s.probs().to_vec(),
                    init_prob: s.init_prob(),
                })
                .collect(),
        }
    }

    pub fn into_strategies(self) -> Result<Vec<MemoryOneStrategy>> {
        self.strategies
            .into_iter()
            .map(|e| MemoryOneStrategy::new(e.probs, e.init_prob))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
