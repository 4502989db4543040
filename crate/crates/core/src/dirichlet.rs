//! Dirichlet pseudo-count tables for initial-state and transition
//! distributions, one pair per discrete covariate pattern.
//!
//! Every count starts at the Jeffreys value 1/2 and grows by exactly one per
//! observed event, so `count - 1/2` is always the number of events seen.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const JEFFREYS: f64 = 0.5;

/// Canonical bitstring rendering of a binary covariate vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatternKey(String);

impl PatternKey {
    pub fn from_bits(bits: &[bool]) -> Self {
        PatternKey(bits.iter().map(|b| if *b { '1' } else { '0' }).collect())
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s.chars().all(|c| c == '0' || c == '1') {
            Ok(PatternKey(s.into()))
        } else {
            Err(Error::Input(format!("pattern `{}` is not a bitstring", s)))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for PatternKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Which Dirichlet vector governs the next state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateContext {
    BeginsSequence,
    Previous(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCounts {
    pub initial: Vec<f64>,
    pub transitions: Matrix,
}

impl PatternCounts {
    fn jeffreys(k: usize) -> Self {
        let mut transitions = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                transitions[(i, j)] = JEFFREYS;
            }
        }
        PatternCounts { initial: vec![JEFFREYS; k], transitions }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletTable {
    states: usize,
    pattern_len: usize,
    patterns: BTreeMap<PatternKey, PatternCounts>,
}

impl DirichletTable {
    pub fn new(states: usize, pattern_len: usize) -> Result<Self> {
        if states < 2 {
            return Err(Error::Config(format!("need at least 2 states, got {}", states)));
        }
        Ok(DirichletTable { states, pattern_len, patterns: BTreeMap::new() })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn pattern_len(&self) -> usize {
        self.pattern_len
    }

    pub fn patterns(&self) -> impl Iterator<Item = (&PatternKey, &PatternCounts)> {
        self.patterns.iter()
    }

    /// Counts for `s`, or the Jeffreys prior when the pattern was never updated.
    pub fn counts(&self, s: &PatternKey) -> PatternCounts {
        self.patterns.get(s).cloned().unwrap_or_else(|| PatternCounts::jeffreys(self.states))
    }

    fn entry(&mut self, s: &PatternKey) -> Result<&mut PatternCounts> {
        if s.len() != self.pattern_len {
            return Err(Error::Dimension(format!(
                "pattern `{}` has length {}, expected {}",
                s,
                s.len(),
                self.pattern_len
            )));
        }
        let k = self.states;
        Ok(self.patterns.entry(s.clone()).or_insert_with(|| PatternCounts::jeffreys(k)))
    }

    fn check_state(&self, index: usize) -> Result<()> {
        if index < self.states {
            Ok(())
        } else {
            Err(Error::StateIndex { index, states: self.states })
        }
    }

    pub fn observe_initial(&mut self, s: &PatternKey, j: usize) -> Result<()> {
        self.check_state(j)?;
        self.entry(s)?.initial[j] += 1.0;
        Ok(())
    }

    pub fn observe_transition(&mut self, s: &PatternKey, k: usize, j: usize) -> Result<()> {
        self.check_state(k)?;
        self.check_state(j)?;
        self.entry(s)?.transitions[(k, j)] += 1.0;
        Ok(())
    }

    pub fn observe(&mut self, s: &PatternKey, context: StateContext, j: usize) -> Result<()> {
        match context {
            StateContext::BeginsSequence => self.observe_initial(s, j),
            StateContext::Previous(k) => self.observe_transition(s, k, j),
        }
    }

    /// Posterior mean of the initial-state distribution.
    pub fn initial_probabilities(&self, s: &PatternKey) -> Vec<f64> {
        normalized(&self.counts(s).initial)
    }

    /// Posterior mean of the transition row out of state `k`.
    pub fn transition_probabilities(&self, s: &PatternKey, k: usize) -> Result<Vec<f64>> {
        self.check_state(k)?;
        Ok(normalized(self.counts(s).transitions.row(k)))
    }

    /// Dirichlet parameters of the relevant distribution divided by their
    /// concentration.
    pub fn expected_state_vector(&self, s: &PatternKey, context: StateContext) -> Result<Vec<f64>> {
        match context {
            StateContext::BeginsSequence => Ok(self.initial_probabilities(s)),
            StateContext::Previous(k) => self.transition_probabilities(s, k),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.states < 2 {
            return Err(Error::Config(format!("need at least 2 states, got {}", self.states)));
        }
        for (key, c) in &self.patterns {
            if key.len() != self.pattern_len
                || c.initial.len() != self.states
                || c.transitions.shape() != (self.states, self.states)
            {
                return Err(Error::Dimension(format!("pseudo-count table for `{}`", key)));
            }
            if c.initial.iter().chain(c.transitions.as_slice()).any(|v| !(*v >= JEFFREYS)) {
                return Err(Error::Input(format!("pseudo-count below 1/2 for `{}`", key)));
            }
        }
        Ok(())
    }
}

fn normalized(b: &[f64]) -> Vec<f64> {
    let total: f64 = b.iter().sum();
    b.iter().map(|v| v / total).collect()
}
