use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConfigId, NetworkConfig};
use crate::reuse::{plan_reuse, ReusePlan, WeightArchive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Reuse,
    Both,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "reuse" => Ok(Mode::Reuse),
            "both" => Ok(Mode::Both),
            _ => Err(Error::Parse {
                what: "mode (baseline|reuse|both)",
                input: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::Reuse => "reuse",
            Mode::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialKind {
    Baseline,
    Reuse(ReusePlan),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialNode {
    pub config: NetworkConfig,
    pub kind: TrialKind,
    /// Indices of nodes that must finish first.
    pub deps: Vec<usize>,
    /// True for a baseline added only to supply weights to a reuse trial
    /// whose source lies outside the searched grid.
    pub auxiliary: bool,
}

impl TrialNode {
    pub fn key(&self) -> TrialKey {
        TrialKey::new(&self.config.id(), matches!(self.kind, TrialKind::Reuse(_)))
    }

    pub fn is_reuse(&self) -> bool {
        matches!(self.kind, TrialKind::Reuse(_))
    }
}

/// Identifies a trial within a run: the config id, suffixed `+reuse` for
/// reuse trials.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrialKey(String);

impl TrialKey {
    pub fn new(id: &ConfigId, reuse: bool) -> Self {
        TrialKey(if reuse { format!("{id}+reuse") } else { id.to_string() })
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TrialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Trials and their baseline → reuse dependency edges.
#[derive(Debug, Clone, Default)]
pub struct Schedule {
    pub nodes: Vec<TrialNode>,
    pub warnings: Vec<String>,
}

impl Schedule {
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(i, n)| n.deps.iter().map(move |&d| (d, i)))
    }

    pub fn baseline_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_reuse()).count()
    }

    pub fn reuse_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_reuse()).count()
    }

    /// Kahn's algorithm; errors if the graph has a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let mut indegree: Vec<usize> = self.nodes.iter().map(|n| n.deps.len()).collect();
        let mut dependents = vec![Vec::new(); self.nodes.len()];
        for (from, to) in self.edges() {
            dependents[from].push(to);
        }
        let mut ready: Vec<usize> = (0..self.nodes.len()).filter(|&i| indegree[i] == 0).rev().collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(i) = ready.pop() {
            order.push(i);
            for &d in dependents[i].iter().rev() {
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    ready.push(d);
                }
            }
        }
        if order.len() != self.nodes.len() {
            return Err(Error::invalid("schedule", "dependency cycle"));
        }
        Ok(order)
    }
}

/// Builds the trial DAG for `configs`.
///
/// In `Reuse` mode every source baseline must already be in `archive`. In
/// `Both` mode sources missing from `configs` are added as auxiliary
/// baseline nodes.
pub fn build_schedule(configs: &[NetworkConfig], mode: Mode, archive: Option<&WeightArchive>) -> Result<Schedule> {
    let mut schedule = Schedule::default();
    let mut baseline_index: HashMap<ConfigId, usize> = HashMap::new();

    if mode != Mode::Reuse {
        for c in configs {
            if baseline_index.contains_key(&c.id()) {
                continue;
            }
            baseline_index.insert(c.id(), schedule.nodes.len());
            schedule.nodes.push(TrialNode {
                config: c.clone(),
                kind: TrialKind::Baseline,
                deps: Vec::new(),
                auxiliary: false,
            });
        }
    }
    if mode == Mode::Baseline {
        return Ok(schedule);
    }

    let mut missing = Vec::new();
    for c in configs.iter().filter(|c| c.conv_layers > 1) {
        let plan = plan_reuse(c)?;
        let source = plan.source_id();
        let deps = match (mode, baseline_index.get(&source)) {
            (Mode::Both, Some(&i)) => vec![i],
            (Mode::Both, None) => {
                let i = schedule.nodes.len();
                baseline_index.insert(source.clone(), i);
                schedule.nodes.push(TrialNode {
                    config: plan.source.clone(),
                    kind: TrialKind::Baseline,
                    deps: Vec::new(),
                    auxiliary: true,
                });
                vec![i]
            }
            _ => {
                if !archive.is_some_and(|a| a.contains(&source)) {
                    missing.push(source.to_string());
                }
                Vec::new()
            }
        };
        schedule.nodes.push(TrialNode {
            config: c.clone(),
            kind: TrialKind::Reuse(plan),
            deps,
            auxiliary: false,
        });
    }
    if !missing.is_empty() {
        return Err(Error::MissingDependency(format!(
            "reuse mode needs baseline weights for {} source configs, e.g. {}",
            missing.len(),
            missing[0]
        )));
    }
    if schedule.reuse_count() == 0 {
        let msg = "no configuration has more than one conv layer; nothing to reuse".to_string();
        log::warn!("{msg}");
        schedule.warnings.push(msg);
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{preset_large, preset_small};

    #[test]
    fn large_both() {
        let s = build_schedule(&preset_large().enumerate(), Mode::Both, None).unwrap();
        assert_eq!(s.baseline_count(), 756);
        assert_eq!(s.reuse_count(), 504);
        assert_eq!(s.edges().count(), 504);
        assert!(s.nodes.iter().all(|n| !n.auxiliary));
        for (from, to) in s.edges() {
            let (b, r) = (&s.nodes[from], &s.nodes[to]);
            assert!(!b.is_reuse() && r.is_reuse());
            assert_eq!(b.config, r.config.with_conv_layers(r.config.conv_layers - 1));
        }
        assert_eq!(s.topological_order().unwrap().len(), 1260);
    }

    #[test]
    fn small_both_and_baseline() {
        let configs = preset_small().enumerate();
        let s = build_schedule(&configs, Mode::Both, None).unwrap();
        assert_eq!((s.baseline_count(), s.reuse_count()), (252, 168));
        let s = build_schedule(&configs, Mode::Baseline, None).unwrap();
        assert_eq!((s.baseline_count(), s.reuse_count(), s.edges().count()), (252, 0, 0));
    }

    #[test]
    fn reuse_mode_needs_archive() {
        let configs = preset_small().enumerate();
        let err = build_schedule(&configs, Mode::Reuse, None).unwrap_err();
        assert!(matches!(err, Error::MissingDependency(_)));
    }

    #[test]
    fn single_conv_reuse_is_empty() {
        let c = preset_small().enumerate().remove(0);
        assert_eq!(c.conv_layers, 1);
        let s = build_schedule(&[c], Mode::Reuse, None).unwrap();
        assert!(s.nodes.is_empty());
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn auxiliary_sources() {
        let configs: Vec<_> = preset_small()
            .enumerate()
            .into_iter()
            .filter(|c| c.conv_layers == 3)
            .take(2)
            .collect();
        let s = build_schedule(&configs, Mode::Both, None).unwrap();
        // two targets, their two 2-conv sources added as auxiliaries
        assert_eq!(s.baseline_count(), 4);
        assert_eq!(s.nodes.iter().filter(|n| n.auxiliary).count(), 2);
        let order = s.topological_order().unwrap();
        let pos = |i: usize| order.iter().position(|&x| x == i).unwrap();
        for (from, to) in s.edges() {
            assert!(pos(from) < pos(to));
        }
    }

    #[test]
    fn keys_and_modes() {
        let c = preset_small().enumerate().remove(100);
        assert_eq!(TrialKey::new(&c.id(), true).as_str(), format!("{}+reuse", c.id()));
        assert_eq!("both".parse::<Mode>().unwrap(), Mode::Both);
        assert!("compare".parse::<Mode>().is_err());
    }
}
