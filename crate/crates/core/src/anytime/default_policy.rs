//! Compiled default policies: context-indexed advice that becomes available
//! after a small fixed number of steps and is never refined further.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AnytimeEngine, AnytimeError, Estimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultPolicyEntry {
    pub context_key: String,
    pub action: String,
    pub precision: f64,
    pub availability_steps: u64,
}

/// Lookup table of compiled advice, keyed by context.
///
/// File format: a structured-object list of
/// `{context_key, action, precision, availability_steps}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DefaultPolicyTable {
    entries: BTreeMap<String, DefaultPolicyEntry>,
}

impl DefaultPolicyTable {
    pub fn new(entries: impl IntoIterator<Item = DefaultPolicyEntry>) -> Self {
        DefaultPolicyTable {
            entries: entries
                .into_iter()
                .map(|e| (e.context_key.clone(), e))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let entries: Vec<DefaultPolicyEntry> = serde_json::from_str(text)?;
        Ok(Self::new(entries))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries.values().collect::<Vec<_>>()).unwrap()
    }

    pub fn get(&self, context_key: &str) -> Option<&DefaultPolicyEntry> {
        self.entries.get(context_key)
    }
}

pub struct DefaultPolicyEngine {
    entry: DefaultPolicyEntry,
    steps: u64,
}

impl DefaultPolicyEngine {
    pub fn new(table: &DefaultPolicyTable, context_key: &str) -> Result<Self, AnytimeError> {
        let entry = table
            .get(context_key)
            .ok_or_else(|| AnytimeError::UnknownContextKey(context_key.to_string()))?
            .clone();
        Ok(DefaultPolicyEngine { entry, steps: 0 })
    }

    pub fn recommended_action(&self) -> Option<&str> {
        (self.steps >= self.entry.availability_steps).then_some(self.entry.action.as_str())
    }
}

impl AnytimeEngine for DefaultPolicyEngine {
    fn strategy_id(&self) -> &str {
        "default"
    }

    fn step(&mut self, n: u64) {
        self.steps = (self.steps + n).min(self.entry.availability_steps);
    }

    fn estimate(&self) -> Estimate {
        if self.steps < self.entry.availability_steps {
            return Estimate {
                support: self.steps,
                ..Estimate::vacuous(false)
            };
        }
        let width = 1.0 - self.entry.precision.clamp(0.0, 1.0);
        Estimate {
            mean: 0.5,
            low: 0.5 - width / 2.0,
            high: 0.5 + width / 2.0,
            support: self.steps,
            well_founded: false,
        }
    }

    fn is_complete(&self) -> bool {
        self.steps >= self.entry.availability_steps
    }
}
