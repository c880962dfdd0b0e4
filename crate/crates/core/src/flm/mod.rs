//! Factored n-gram language models over word and prosody-class streams.
//!
//! Every predicted word `w0` may be conditioned on up to four factors: the two
//! preceding words (`w-2`, `w-1`), the prosody class of the preceding word
//! (`p-1`), and the prosody class of the predicted word itself (`p0`). Seven
//! fixed configurations select subsets of these. Unseen contexts back off
//! along a linear path that drops one factor at a time, in the order `w-2`,
//! `p-1`, `p0`, `w-1`, until the empty context is reached.

mod eval;
mod io;
mod model;

use std::fmt;
use std::str::FromStr;

pub use eval::{avg_word_probability, perplexity, PerplexityReport};
pub use model::{FactorValue, FactoredLm, Smoothing, TrainOptions, BOS, EOS, UNK};

use crate::error::Error;

/// One conditioning factor, relative to the predicted position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Factor {
    /// Word two positions back.
    W2,
    /// Preceding word.
    W1,
    /// Prosody class of the preceding word.
    P1,
    /// Prosody class of the predicted word.
    P0,
}

impl Factor {
    /// Canonical slot order used for context keys.
    pub const SLOTS: [Factor; 4] = [Factor::W2, Factor::W1, Factor::P1, Factor::P0];

    /// Order in which factors are dropped when backing off.
    pub const DROP_ORDER: [Factor; 4] = [Factor::W2, Factor::P1, Factor::P0, Factor::W1];

    pub fn slot(self) -> usize {
        match self {
            Factor::W2 => 0,
            Factor::W1 => 1,
            Factor::P1 => 2,
            Factor::P0 => 3,
        }
    }

    pub fn is_word(self) -> bool {
        matches!(self, Factor::W2 | Factor::W1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Factor::W2 => "W-2",
            Factor::W1 => "W-1",
            Factor::P1 => "P-1",
            Factor::P0 => "P0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelConfig {
    Uni,
    Bi,
    Tri,
    BiProsUni,
    BiProsBi,
    TriProsUni,
    TriProsBi,
}

impl ModelConfig {
    pub const ALL: [ModelConfig; 7] = [
        ModelConfig::Uni,
        ModelConfig::Bi,
        ModelConfig::Tri,
        ModelConfig::BiProsUni,
        ModelConfig::BiProsBi,
        ModelConfig::TriProsUni,
        ModelConfig::TriProsBi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelConfig::Uni => "uni",
            ModelConfig::Bi => "bi",
            ModelConfig::Tri => "tri",
            ModelConfig::BiProsUni => "bi_prosUni",
            ModelConfig::BiProsBi => "bi_prosBi",
            ModelConfig::TriProsUni => "tri_prosUni",
            ModelConfig::TriProsBi => "tri_prosBi",
        }
    }

    /// Conditioning factors, in slot order.
    pub fn context(self) -> &'static [Factor] {
        use Factor::*;
        match self {
            ModelConfig::Uni => &[],
            ModelConfig::Bi => &[W1],
            ModelConfig::Tri => &[W2, W1],
            ModelConfig::BiProsUni => &[W1, P0],
            ModelConfig::BiProsBi => &[W1, P1, P0],
            ModelConfig::TriProsUni => &[W2, W1, P0],
            ModelConfig::TriProsBi => &[W2, W1, P1, P0],
        }
    }

    pub fn uses_prosody(self) -> bool {
        self.context().iter().any(|f| !f.is_word())
    }

    pub fn backoff_graph(self) -> BackoffGraph {
        BackoffGraph::linear(self.context())
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        ModelConfig::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model configuration {s:?}")))
    }
}

/// Backoff path from the full context down to the empty context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackoffGraph {
    nodes: Vec<Vec<Factor>>,
}

impl BackoffGraph {
    pub fn linear(context: &[Factor]) -> Self {
        let mut current: Vec<Factor> = context.to_vec();
        current.sort_by_key(|f| f.slot());
        let mut nodes = vec![current.clone()];
        for drop in Factor::DROP_ORDER {
            if let Some(pos) = current.iter().position(|f| *f == drop) {
                current.remove(pos);
                nodes.push(current.clone());
            }
        }
        BackoffGraph { nodes }
    }

    /// Nodes from richest to empty; consecutive nodes differ by one factor.
    pub fn nodes(&self) -> &[Vec<Factor>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
