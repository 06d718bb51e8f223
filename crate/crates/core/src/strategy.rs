//! Named solvers for the uplink phase, selectable at runtime.

use crate::decision::{broadcast_mode_select, Mode, TransmissionContext};
use crate::error::{Error, Result};
use crate::optimizer::{baseline, exhaustive_search, jmsra, Assignment, ScenarioInstance, Split};
use crate::workload::WorkloadConstants;

/// A media-selection and bandwidth policy.
pub trait Strategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(&self, scenario: &ScenarioInstance, delta: f64) -> Result<Assignment>;

    /// Medium of the EA's multicast to `receivers`.
    fn broadcast_mode(
        &self,
        k: &WorkloadConstants,
        receivers: &[TransmissionContext],
    ) -> Result<Mode> {
        broadcast_mode_select(k, receivers)
    }
}

pub struct Jmsra;

impl Strategy for Jmsra {
    fn name(&self) -> &'static str {
        "jmsra"
    }

    fn solve(&self, scenario: &ScenarioInstance, delta: f64) -> Result<Assignment> {
        jmsra(scenario, delta)
    }
}

pub struct Exhaustive;

impl Strategy for Exhaustive {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn solve(&self, scenario: &ScenarioInstance, delta: f64) -> Result<Assignment> {
        exhaustive_search(scenario, delta)
    }
}

/// Every transmission, multicast included, forced to one medium.
pub struct Fixed {
    pub mode: Mode,
    pub split: Split,
}

impl Strategy for Fixed {
    fn name(&self) -> &'static str {
        match (self.mode, self.split) {
            (Mode::Nl, Split::Uniform) => "all-nl-uniform",
            (Mode::Nl, Split::Optimized) => "all-nl-opt",
            (Mode::Kv, Split::Uniform) => "all-kv-uniform",
            (Mode::Kv, Split::Optimized) => "all-kv-opt",
        }
    }

    fn solve(&self, scenario: &ScenarioInstance, delta: f64) -> Result<Assignment> {
        baseline(scenario, self.mode, self.split, delta)
    }

    fn broadcast_mode(
        &self,
        _: &WorkloadConstants,
        receivers: &[TransmissionContext],
    ) -> Result<Mode> {
        if receivers.is_empty() {
            return Err(Error::NoAgents);
        }
        Ok(self.mode)
    }
}

/// Strategies looked up by name.
pub struct Registry {
    entries: Vec<Box<dyn Strategy>>,
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// JMSRA, the exhaustive oracle and the four fixed-mode baselines.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Jmsra));
        r.register(Box::new(Exhaustive));
        for mode in [Mode::Nl, Mode::Kv] {
            for split in [Split::Uniform, Split::Optimized] {
                r.register(Box::new(Fixed { mode, split }));
            }
        }
        r
    }

    /// Adds a strategy, replacing any with the same name.
    pub fn register(&mut self, strategy: Box<dyn Strategy>) {
        self.entries.retain(|s| s.name() != strategy.name());
        self.entries.push(strategy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Strategy> {
        self.entries
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|s| s.name()).collect()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_names() {
        let r = Registry::standard();
        assert_eq!(
            r.names(),
            [
                "jmsra",
                "exhaustive",
                "all-nl-uniform",
                "all-nl-opt",
                "all-kv-uniform",
                "all-kv-opt"
            ]
        );
        assert!(r.get("jmsra").is_ok());
        assert_eq!(
            r.get("nope").err(),
            Some(Error::UnknownStrategy("nope".into()))
        );
    }

    #[test]
    fn register_replaces_same_name() {
        let mut r = Registry::standard();
        r.register(Box::new(Jmsra));
        assert_eq!(r.names().len(), 6);
        assert_eq!(r.names().last(), Some(&"jmsra"));
    }
}
