//! JSON file formats for graphs, potentials, rewards, trajectories, lassos
//! and dynamics, plus the output documents of the CLI.
//!
//! Unknown keys are rejected everywhere. Object keys are written in a fixed
//! order and floats use the shortest representation that round-trips, so
//! identical inputs always serialize to identical bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Potential, Reward};
use crate::graph::{
    DeterministicDynamics, GraphSpec, LassoTrajectory, Trajectory, TransitionGraph, TransitionSpec,
};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub gamma: f64,
    pub states: Vec<StateEntry>,
    pub actions: Vec<String>,
    pub transitions: Vec<TransitionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    pub id: String,
    #[serde(default = "one")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub from: String,
    pub action: String,
    pub to: String,
    #[serde(default = "one")]
    pub weight: f64,
}

impl From<GraphFile> for GraphSpec {
    fn from(file: GraphFile) -> Self {
        GraphSpec {
            gamma: file.gamma,
            states: file.states.into_iter().map(|s| (s.id, s.weight)).collect(),
            actions: file.actions,
            transitions: file
                .transitions
                .into_iter()
                .map(|t| TransitionSpec {
                    src: t.from,
                    action: t.action,
                    dst: t.to,
                    weight: t.weight,
                })
                .collect(),
        }
    }
}

impl GraphFile {
    pub fn from_graph(graph: &TransitionGraph) -> Self {
        let spec = graph.to_spec();
        Self {
            gamma: spec.gamma,
            states: spec
                .states
                .into_iter()
                .map(|(id, weight)| StateEntry { id, weight })
                .collect(),
            actions: spec.actions,
            transitions: spec
                .transitions
                .into_iter()
                .map(|t| TransitionEntry {
                    from: t.src,
                    action: t.action,
                    to: t.dst,
                    weight: t.weight,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFile {
    pub values: BTreeMap<String, f64>,
}

impl PotentialFile {
    pub fn from_potential(graph: &TransitionGraph, p: &Potential) -> Self {
        Self {
            values: p.to_map(graph),
        }
    }

    pub fn to_potential(&self, graph: &TransitionGraph) -> Result<Potential> {
        Potential::from_map(graph, &self.values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardFile {
    pub rewards: Vec<RewardEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardEntry {
    pub from: String,
    pub action: String,
    pub to: String,
    pub value: f64,
}

impl RewardFile {
    pub fn from_reward(graph: &TransitionGraph, r: &Reward) -> Self {
        Self {
            rewards: r
                .values()
                .iter()
                .enumerate()
                .map(|(e, &value)| {
                    let (from, action, to) = graph.transition_labels(e);
                    RewardEntry {
                        from: from.to_string(),
                        action: action.to_string(),
                        to: to.to_string(),
                        value,
                    }
                })
                .collect(),
        }
    }

    pub fn to_reward(&self, graph: &TransitionGraph) -> Result<Reward> {
        Reward::from_entries(
            graph,
            self.rewards
                .iter()
                .map(|e| (e.from.as_str(), e.action.as_str(), e.to.as_str(), e.value)),
        )
    }
}

/// A transition reference, as used in curl and dynamics documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRef {
    pub from: String,
    pub action: String,
    pub to: String,
}

impl TransitionRef {
    pub fn of(graph: &TransitionGraph, edge: usize) -> Self {
        let (from, action, to) = graph.transition_labels(edge);
        Self {
            from: from.to_string(),
            action: action.to_string(),
            to: to.to_string(),
        }
    }

    pub fn resolve(&self, graph: &TransitionGraph) -> Result<usize> {
        graph.transition_by_label(&self.from, &self.action, &self.to)
    }
}

/// One trajectory step with its position in the trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepEntry {
    pub order: usize,
    pub from: String,
    pub action: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    pub start: String,
    pub steps: Vec<StepEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LassoFile {
    pub start: String,
    pub prefix: Vec<StepEntry>,
    pub cycle: Vec<StepEntry>,
}

fn steps_of(graph: &TransitionGraph, t: &Trajectory) -> Vec<StepEntry> {
    t.steps()
        .iter()
        .enumerate()
        .map(|(order, &e)| {
            let (from, action, to) = graph.transition_labels(e);
            StepEntry {
                order,
                from: from.to_string(),
                action: action.to_string(),
                to: to.to_string(),
            }
        })
        .collect()
}

fn resolve_steps(
    graph: &TransitionGraph,
    start: &str,
    steps: &[StepEntry],
    what: &str,
) -> Result<Trajectory> {
    let start_idx = graph.require_state(start)?;
    let mut sorted: Vec<&StepEntry> = steps.iter().collect();
    sorted.sort_by_key(|s| s.order);
    for (i, s) in sorted.iter().enumerate() {
        if s.order != i {
            return Err(Error::InvalidTrajectory(format!(
                "{what}: step orders must be 0..{} without gaps or repeats (found order {})",
                steps.len(),
                s.order
            )));
        }
    }
    let mut current = start;
    let mut edges = Vec::with_capacity(sorted.len());
    for s in sorted {
        if s.from != current {
            return Err(Error::InvalidTrajectory(format!(
                "{what}: step {} starts at {} but the previous step ended at {current}",
                s.order, s.from
            )));
        }
        edges.push(graph.transition_by_label(&s.from, &s.action, &s.to)?);
        current = &s.to;
    }
    Trajectory::new(graph, start_idx, edges)
}

impl TrajectoryFile {
    pub fn from_trajectory(graph: &TransitionGraph, t: &Trajectory) -> Self {
        Self {
            start: graph.state(t.start()).0.clone(),
            steps: steps_of(graph, t),
        }
    }

    pub fn to_trajectory(&self, graph: &TransitionGraph) -> Result<Trajectory> {
        resolve_steps(graph, &self.start, &self.steps, "trajectory")
    }
}

impl LassoFile {
    pub fn from_lasso(graph: &TransitionGraph, lasso: &LassoTrajectory) -> Self {
        Self {
            start: graph.state(lasso.start()).0.clone(),
            prefix: steps_of(graph, lasso.prefix()),
            cycle: steps_of(graph, lasso.cycle()),
        }
    }

    pub fn to_lasso(&self, graph: &TransitionGraph) -> Result<LassoTrajectory> {
        let prefix = resolve_steps(graph, &self.start, &self.prefix, "lasso prefix")?;
        let at = graph.state(prefix.end(graph)).0.clone();
        let cycle = resolve_steps(graph, &at, &self.cycle, "lasso cycle")?;
        LassoTrajectory::new(graph, prefix, cycle)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsFile {
    pub choices: Vec<TransitionRef>,
    /// Defaults to every state when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_support: Option<Vec<String>>,
}

impl DynamicsFile {
    pub fn from_dynamics(graph: &TransitionGraph, d: &DeterministicDynamics) -> Self {
        Self {
            choices: d
                .chosen_transitions()
                .into_iter()
                .map(|e| TransitionRef::of(graph, e))
                .collect(),
            initial_support: Some(
                d.initial_support()
                    .iter()
                    .map(|&s| graph.state(s).0.clone())
                    .collect(),
            ),
        }
    }

    pub fn to_dynamics(&self, graph: &TransitionGraph) -> Result<DeterministicDynamics> {
        let chosen = self
            .choices
            .iter()
            .map(|c| c.resolve(graph))
            .collect::<Result<Vec<_>>>()?;
        let support = match &self.initial_support {
            Some(states) => states
                .iter()
                .map(|s| graph.require_state(s))
                .collect::<Result<Vec<_>>>()?,
            None => (0..graph.num_states()).collect(),
        };
        DeterministicDynamics::new(graph, &chosen, support)
    }
}

/// Parses a JSON document, naming the file in the error.
pub fn parse<T: for<'de> Deserialize<'de>>(
    text: &str,
    origin: &str,
) -> std::result::Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("{origin}: {e}"))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output documents always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRAPH: &str = r#"{
        "gamma": 0.9,
        "states": [{"id": "s1"}, {"id": "s0", "weight": 2.0}],
        "actions": ["a"],
        "transitions": [
            {"from": "s0", "action": "a", "to": "s1"},
            {"from": "s1", "action": "a", "to": "s0", "weight": 0.5},
            {"from": "s1", "action": "a", "to": "s1"}
        ]
    }"#;

    fn graph() -> TransitionGraph {
        let file: GraphFile = parse(GRAPH, "g.json").unwrap();
        GraphSpec::from(file).build().unwrap()
    }

    #[test]
    fn graph_defaults_and_order() {
        let g = graph();
        assert_eq!(g.state(0).as_str(), "s0");
        assert_eq!(g.state_weight(0), 2.0);
        assert_eq!(g.state_weight(1), 1.0);
        assert_eq!(g.transition(1).weight, 0.5);
        let back = GraphFile::from_graph(&g);
        assert_eq!(
            GraphSpec::from(back).build().unwrap().to_spec(),
            g.to_spec()
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = GRAPH.replace("\"gamma\"", "\"colour\": 1, \"gamma\"");
        assert!(parse::<GraphFile>(&bad, "g.json")
            .unwrap_err()
            .contains("g.json"));
        assert!(parse::<PotentialFile>(r#"{"values": {}, "x": 1}"#, "p.json").is_err());
    }

    #[test]
    fn reward_file_round_trip() {
        let g = graph();
        let r = Reward::from_values(&g, vec![0.1, -1.0 / 3.0, 1e-300]).unwrap();
        let text = to_json(&RewardFile::from_reward(&g, &r));
        let back: RewardFile = parse(&text, "r.json").unwrap();
        assert_eq!(back.to_reward(&g).unwrap(), r);
    }

    #[test]
    fn trajectory_files() {
        let g = graph();
        let t = TrajectoryFile {
            start: "s0".into(),
            steps: vec![
                StepEntry {
                    order: 1,
                    from: "s1".into(),
                    action: "a".into(),
                    to: "s1".into(),
                },
                StepEntry {
                    order: 0,
                    from: "s0".into(),
                    action: "a".into(),
                    to: "s1".into(),
                },
            ],
        };
        let traj = t.to_trajectory(&g).unwrap();
        assert_eq!(traj.len(), 2);
        assert_eq!(
            TrajectoryFile::from_trajectory(&g, &traj)
                .to_trajectory(&g)
                .unwrap(),
            traj
        );

        let gap = TrajectoryFile {
            start: "s0".into(),
            steps: vec![StepEntry {
                order: 1,
                from: "s0".into(),
                action: "a".into(),
                to: "s1".into(),
            }],
        };
        assert!(gap.to_trajectory(&g).is_err());

        let lasso = LassoFile {
            start: "s0".into(),
            prefix: vec![StepEntry {
                order: 0,
                from: "s0".into(),
                action: "a".into(),
                to: "s1".into(),
            }],
            cycle: vec![StepEntry {
                order: 0,
                from: "s1".into(),
                action: "a".into(),
                to: "s1".into(),
            }],
        };
        let l = lasso.to_lasso(&g).unwrap();
        assert_eq!(LassoFile::from_lasso(&g, &l), lasso);
    }

    #[test]
    fn dynamics_file_defaults_to_full_support() {
        let g = graph();
        let file: DynamicsFile = parse(
            r#"{"choices": [{"from": "s0", "action": "a", "to": "s1"}, {"from": "s1", "action": "a", "to": "s0"}]}"#,
            "d.json",
        )
        .unwrap();
        let d = file.to_dynamics(&g).unwrap();
        assert_eq!(d.initial_support(), &[0, 1]);
        assert_eq!(
            DynamicsFile::from_dynamics(&g, &d).to_dynamics(&g).unwrap(),
            d
        );
    }
}
