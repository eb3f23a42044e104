//! Finite weighted transition graphs.
//!
//! A [`TransitionGraph`] is the tuple `(S, A, T, gamma, lambda, w)`: labelled
//! states with positive weights, labelled actions, a set of allowed
//! transitions `(src, action, dst)` with positive weights, and a discount
//! factor in `[0, 1]`. Graphs are only constructed through [`GraphSpec`],
//! which is validated first; every `TransitionGraph` value therefore
//! satisfies the structural invariants (no dead ends, positive weights,
//! unique transitions).
//!
//! States, actions and transitions are stored in canonical order: states and
//! actions sorted by label, transitions sorted by `(src, action, dst)`. All
//! other modules address them by index into these orderings.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Enumeration cap for [`enumerate_trajectories`].
pub const DEFAULT_TRAJECTORY_CAP: u128 = 1_000_000;
/// Enumeration cap for [`enumerate_diamonds`].
pub const DEFAULT_DIAMOND_CAP: u128 = 1_000_000;
/// Default number of dynamics visited by [`enumerate_deterministic_dynamics`].
pub const DEFAULT_DYNAMICS_BUDGET: u128 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub String);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl StateId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl ActionId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// An allowed transition, addressed by state and action indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub src: usize,
    pub action: usize,
    pub dst: usize,
    pub weight: f64,
}

impl Transition {
    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }
}

/// Unvalidated description of a transition graph, in whatever order the
/// caller supplied it.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub gamma: f64,
    pub states: Vec<(String, f64)>,
    pub actions: Vec<String>,
    pub transitions: Vec<TransitionSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSpec {
    pub src: String,
    pub action: String,
    pub dst: String,
    pub weight: f64,
}

impl GraphSpec {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            states: Vec::new(),
            actions: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn state(mut self, id: &str) -> Self {
        self.states.push((id.to_string(), 1.0));
        self
    }

    pub fn weighted_state(mut self, id: &str, weight: f64) -> Self {
        self.states.push((id.to_string(), weight));
        self
    }

    pub fn action(mut self, id: &str) -> Self {
        self.actions.push(id.to_string());
        self
    }

    pub fn transition(self, src: &str, action: &str, dst: &str) -> Self {
        self.weighted_transition(src, action, dst, 1.0)
    }

    pub fn weighted_transition(mut self, src: &str, action: &str, dst: &str, weight: f64) -> Self {
        self.transitions.push(TransitionSpec {
            src: src.to_string(),
            action: action.to_string(),
            dst: dst.to_string(),
            weight,
        });
        self
    }

    pub fn build(self) -> Result<TransitionGraph> {
        TransitionGraph::try_from(self)
    }
}

/// A single broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoStates,
    GammaOutOfRange(f64),
    EmptyStateLabel,
    EmptyActionLabel,
    DuplicateState(String),
    DuplicateAction(String),
    NonPositiveStateWeight {
        state: String,
        weight: f64,
    },
    UnknownSource {
        src: String,
        action: String,
        dst: String,
    },
    UnknownTarget {
        src: String,
        action: String,
        dst: String,
    },
    UnknownAction {
        src: String,
        action: String,
        dst: String,
    },
    NonPositiveTransitionWeight {
        src: String,
        action: String,
        dst: String,
        weight: f64,
    },
    DuplicateTransition {
        src: String,
        action: String,
        dst: String,
    },
    DeadEnd(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoStates => write!(f, "graph has no states"),
            Violation::GammaOutOfRange(g) => write!(f, "gamma out of range: {g}"),
            Violation::EmptyStateLabel => write!(f, "empty state label"),
            Violation::EmptyActionLabel => write!(f, "empty action label"),
            Violation::DuplicateState(s) => write!(f, "duplicate state: {s}"),
            Violation::DuplicateAction(a) => write!(f, "duplicate action: {a}"),
            Violation::NonPositiveStateWeight { state, weight } => {
                write!(f, "non-positive state weight: {state} ({weight})")
            }
            Violation::UnknownSource { src, action, dst } => {
                write!(f, "unknown source state: ({src}, {action}, {dst})")
            }
            Violation::UnknownTarget { src, action, dst } => {
                write!(f, "unknown target state: ({src}, {action}, {dst})")
            }
            Violation::UnknownAction { src, action, dst } => {
                write!(f, "unknown action: ({src}, {action}, {dst})")
            }
            Violation::NonPositiveTransitionWeight {
                src,
                action,
                dst,
                weight,
            } => {
                write!(
                    f,
                    "non-positive transition weight: ({src}, {action}, {dst}) ({weight})"
                )
            }
            Violation::DuplicateTransition { src, action, dst } => {
                write!(f, "duplicate transition: ({src}, {action}, {dst})")
            }
            Violation::DeadEnd(s) => write!(f, "dead end: {s}"),
        }
    }
}

/// Checks every structural invariant of a transition graph and reports all
/// violations found. An empty list means the spec builds a valid graph.
pub fn validate(spec: &GraphSpec) -> Vec<Violation> {
    let mut violations = Vec::new();
    if spec.states.is_empty() {
        violations.push(Violation::NoStates);
    }
    if !(0.0..=1.0).contains(&spec.gamma) {
        violations.push(Violation::GammaOutOfRange(spec.gamma));
    }

    let mut states = BTreeSet::new();
    for (id, weight) in &spec.states {
        if id.is_empty() {
            violations.push(Violation::EmptyStateLabel);
        }
        if !states.insert(id.as_str()) {
            violations.push(Violation::DuplicateState(id.clone()));
        }
        if !(weight.is_finite() && *weight > 0.0) {
            violations.push(Violation::NonPositiveStateWeight {
                state: id.clone(),
                weight: *weight,
            });
        }
    }
    let mut actions = BTreeSet::new();
    for id in &spec.actions {
        if id.is_empty() {
            violations.push(Violation::EmptyActionLabel);
        }
        if !actions.insert(id.as_str()) {
            violations.push(Violation::DuplicateAction(id.clone()));
        }
    }

    let mut seen = BTreeSet::new();
    let mut has_outgoing = BTreeSet::new();
    for t in &spec.transitions {
        let key = || (t.src.clone(), t.action.clone(), t.dst.clone());
        if !states.contains(t.src.as_str()) {
            let (src, action, dst) = key();
            violations.push(Violation::UnknownSource { src, action, dst });
        }
        if !states.contains(t.dst.as_str()) {
            let (src, action, dst) = key();
            violations.push(Violation::UnknownTarget { src, action, dst });
        }
        if !actions.contains(t.action.as_str()) {
            let (src, action, dst) = key();
            violations.push(Violation::UnknownAction { src, action, dst });
        }
        if !(t.weight.is_finite() && t.weight > 0.0) {
            let (src, action, dst) = key();
            violations.push(Violation::NonPositiveTransitionWeight {
                src,
                action,
                dst,
                weight: t.weight,
            });
        }
        if !seen.insert((t.src.as_str(), t.action.as_str(), t.dst.as_str())) {
            let (src, action, dst) = key();
            violations.push(Violation::DuplicateTransition { src, action, dst });
        }
        has_outgoing.insert(t.src.as_str());
    }
    for state in &states {
        if !has_outgoing.contains(state) {
            violations.push(Violation::DeadEnd(state.to_string()));
        }
    }
    violations
}

/// A validated finite weighted transition graph.
#[derive(Debug, Clone)]
pub struct TransitionGraph {
    gamma: f64,
    states: Vec<StateId>,
    state_weights: Vec<f64>,
    actions: Vec<ActionId>,
    transitions: Vec<Transition>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    state_index: HashMap<String, usize>,
    action_index: HashMap<String, usize>,
    transition_index: HashMap<(usize, usize, usize), usize>,
}

impl TryFrom<GraphSpec> for TransitionGraph {
    type Error = Error;

    fn try_from(spec: GraphSpec) -> Result<Self> {
        let violations = validate(&spec);
        if !violations.is_empty() {
            return Err(Error::InvalidGraph(violations));
        }

        let mut states = spec.states;
        states.sort_by(|a, b| a.0.cmp(&b.0));
        let mut actions = spec.actions;
        actions.sort();

        let state_index: HashMap<String, usize> = states
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (id.clone(), i))
            .collect();
        let action_index: HashMap<String, usize> = actions
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();

        let mut transitions: Vec<Transition> = spec
            .transitions
            .iter()
            .map(|t| Transition {
                src: state_index[&t.src],
                action: action_index[&t.action],
                dst: state_index[&t.dst],
                weight: t.weight,
            })
            .collect();
        transitions.sort_by_key(|t| (t.src, t.action, t.dst));

        let n = states.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        let mut transition_index = HashMap::with_capacity(transitions.len());
        for (i, t) in transitions.iter().enumerate() {
            out_edges[t.src].push(i);
            in_edges[t.dst].push(i);
            transition_index.insert((t.src, t.action, t.dst), i);
        }

        Ok(Self {
            gamma: spec.gamma,
            state_weights: states.iter().map(|(_, w)| *w).collect(),
            states: states.into_iter().map(|(id, _)| StateId(id)).collect(),
            actions: actions.into_iter().map(ActionId).collect(),
            transitions,
            out_edges,
            in_edges,
            state_index,
            action_index,
            transition_index,
        })
    }
}

impl TransitionGraph {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Returns a copy of this graph with a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidGraph(vec![Violation::GammaOutOfRange(gamma)]));
        }
        let mut graph = self.clone();
        graph.gamma = gamma;
        Ok(graph)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, index: usize) -> &Transition {
        &self.transitions[index]
    }

    pub fn state_weight(&self, state: usize) -> f64 {
        self.state_weights[state]
    }

    pub fn state_weights(&self) -> &[f64] {
        &self.state_weights
    }

    pub fn state(&self, index: usize) -> &StateId {
        &self.states[index]
    }

    pub fn action(&self, index: usize) -> &ActionId {
        &self.actions[index]
    }

    pub fn state_index(&self, id: &str) -> Option<usize> {
        self.state_index.get(id).copied()
    }

    pub fn action_index(&self, id: &str) -> Option<usize> {
        self.action_index.get(id).copied()
    }

    pub fn require_state(&self, id: &str) -> Result<usize> {
        self.state_index(id)
            .ok_or_else(|| Error::UnknownState(id.to_string()))
    }

    pub fn find_transition(&self, src: usize, action: usize, dst: usize) -> Option<usize> {
        self.transition_index.get(&(src, action, dst)).copied()
    }

    /// Looks up a transition by labels.
    pub fn transition_by_label(&self, src: &str, action: &str, dst: &str) -> Result<usize> {
        let unknown = || Error::UnknownTransition {
            src: src.to_string(),
            action: action.to_string(),
            dst: dst.to_string(),
        };
        let s = self.state_index(src).ok_or_else(unknown)?;
        let a = self.action_index(action).ok_or_else(unknown)?;
        let d = self.state_index(dst).ok_or_else(unknown)?;
        self.find_transition(s, a, d).ok_or_else(unknown)
    }

    /// Indices of transitions leaving `state`, in canonical order.
    pub fn outgoing(&self, state: usize) -> &[usize] {
        &self.out_edges[state]
    }

    /// Indices of transitions entering `state`, in canonical order.
    pub fn incoming(&self, state: usize) -> &[usize] {
        &self.in_edges[state]
    }

    /// Distinct successor states of `state`, sorted.
    pub fn successors(&self, state: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self.out_edges[state]
            .iter()
            .map(|&e| self.transitions[e].dst)
            .collect();
        set.into_iter().collect()
    }

    /// `(src, action, dst)` labels of a transition.
    pub fn transition_labels(&self, index: usize) -> (&str, &str, &str) {
        let t = &self.transitions[index];
        (
            self.states[t.src].as_str(),
            self.actions[t.action].as_str(),
            self.states[t.dst].as_str(),
        )
    }

    /// Human-readable `(src, action, dst)` form of a transition.
    pub fn describe_transition(&self, index: usize) -> String {
        let (s, a, d) = self.transition_labels(index);
        format!("({s}, {a}, {d})")
    }

    /// The spec this graph was built from, in canonical order.
    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            gamma: self.gamma,
            states: self
                .states
                .iter()
                .zip(&self.state_weights)
                .map(|(s, w)| (s.0.clone(), *w))
                .collect(),
            actions: self.actions.iter().map(|a| a.0.clone()).collect(),
            transitions: self
                .transitions
                .iter()
                .map(|t| TransitionSpec {
                    src: self.states[t.src].0.clone(),
                    action: self.actions[t.action].0.clone(),
                    dst: self.states[t.dst].0.clone(),
                    weight: t.weight,
                })
                .collect(),
        }
    }
}

/// A finite path `s_0, a_0, s_1, ...` through allowed transitions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trajectory {
    start: usize,
    steps: Vec<usize>,
}

impl Trajectory {
    pub fn empty(start: usize) -> Self {
        Self {
            start,
            steps: Vec::new(),
        }
    }

    /// Builds a trajectory from transition indices, checking that each step
    /// leaves the state the previous one entered.
    pub fn new(graph: &TransitionGraph, start: usize, steps: Vec<usize>) -> Result<Self> {
        let trajectory = Self { start, steps };
        trajectory.check(graph)?;
        Ok(trajectory)
    }

    /// Builds a trajectory from labels: a start state and `(action, next state)` pairs.
    pub fn from_labels(
        graph: &TransitionGraph,
        start: &str,
        steps: &[(&str, &str)],
    ) -> Result<Self> {
        let start_idx = graph.require_state(start)?;
        let mut current = start;
        let mut edges = Vec::with_capacity(steps.len());
        for (action, next) in steps {
            edges.push(graph.transition_by_label(current, action, next)?);
            current = next;
        }
        Self::new(graph, start_idx, edges)
    }

    pub fn check(&self, graph: &TransitionGraph) -> Result<()> {
        if self.start >= graph.num_states() {
            return Err(Error::InvalidTrajectory(format!(
                "start index {} out of range",
                self.start
            )));
        }
        let mut current = self.start;
        for (i, &e) in self.steps.iter().enumerate() {
            if e >= graph.num_transitions() {
                return Err(Error::InvalidTrajectory(format!(
                    "step {i} refers to transition index {e}, which is not in the graph"
                )));
            }
            let t = graph.transition(e);
            if t.src != current {
                return Err(Error::InvalidTrajectory(format!(
                    "step {i} {} does not start at {}",
                    graph.describe_transition(e),
                    graph.state(current)
                )));
            }
            current = t.dst;
        }
        Ok(())
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn end(&self, graph: &TransitionGraph) -> usize {
        self.steps
            .last()
            .map_or(self.start, |&e| graph.transition(e).dst)
    }

    /// Visited states `s_0 .. s_T`.
    pub fn states(&self, graph: &TransitionGraph) -> Vec<usize> {
        std::iter::once(self.start)
            .chain(self.steps.iter().map(|&e| graph.transition(e).dst))
            .collect()
    }

    /// Appends a step. The caller guarantees contiguity.
    pub(crate) fn push(&mut self, edge: usize) {
        self.steps.push(edge);
    }

    pub(crate) fn pop(&mut self) {
        self.steps.pop();
    }
}

/// An eventually periodic infinite trajectory `prefix . cycle . cycle ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LassoTrajectory {
    prefix: Trajectory,
    cycle: Trajectory,
}

impl LassoTrajectory {
    pub fn new(graph: &TransitionGraph, prefix: Trajectory, cycle: Trajectory) -> Result<Self> {
        prefix.check(graph)?;
        cycle.check(graph)?;
        if cycle.is_empty() {
            return Err(Error::InvalidTrajectory(
                "lasso cycle must have at least one step".into(),
            ));
        }
        if cycle.end(graph) != cycle.start() {
            return Err(Error::InvalidTrajectory(format!(
                "lasso cycle starts at {} but ends at {}",
                graph.state(cycle.start()),
                graph.state(cycle.end(graph))
            )));
        }
        if prefix.end(graph) != cycle.start() {
            return Err(Error::InvalidTrajectory(format!(
                "lasso prefix ends at {} but the cycle starts at {}",
                graph.state(prefix.end(graph)),
                graph.state(cycle.start())
            )));
        }
        Ok(Self { prefix, cycle })
    }

    pub fn prefix(&self) -> &Trajectory {
        &self.prefix
    }

    pub fn cycle(&self) -> &Trajectory {
        &self.cycle
    }

    pub fn start(&self) -> usize {
        self.prefix.start()
    }
}

/// An ordered pair of length-two trajectories with common endpoints, stored
/// as transition indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Diamond {
    pub first: [usize; 2],
    pub second: [usize; 2],
}

impl Diamond {
    pub fn start(&self, graph: &TransitionGraph) -> usize {
        graph.transition(self.first[0]).src
    }

    pub fn end(&self, graph: &TransitionGraph) -> usize {
        graph.transition(self.first[1]).dst
    }

    pub fn swapped(&self) -> Self {
        Self {
            first: self.second,
            second: self.first,
        }
    }

    pub fn first_trajectory(&self, graph: &TransitionGraph) -> Trajectory {
        Trajectory {
            start: self.start(graph),
            steps: self.first.to_vec(),
        }
    }

    pub fn second_trajectory(&self, graph: &TransitionGraph) -> Trajectory {
        Trajectory {
            start: self.start(graph),
            steps: self.second.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyReport {
    pub is_complete: bool,
    pub has_distinguishing_actions: bool,
    pub is_diamond_complete: bool,
    pub every_state_in_loop: bool,
    /// States reachable from each state in zero or more steps.
    pub reachable_from: BTreeMap<StateId, BTreeSet<StateId>>,
}

/// Reachability in one or more steps, ignoring actions.
pub(crate) fn reachable_sets(graph: &TransitionGraph) -> Vec<Vec<bool>> {
    let n = graph.num_states();
    let successors: Vec<Vec<usize>> = (0..n).map(|s| graph.successors(s)).collect();
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut queue: VecDeque<usize> = successors[s].iter().copied().collect();
            for &u in &successors[s] {
                seen[u] = true;
            }
            while let Some(u) = queue.pop_front() {
                for &v in &successors[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            seen
        })
        .collect()
}

pub fn topology_report(graph: &TransitionGraph) -> TopologyReport {
    let n = graph.num_states();
    let is_complete = graph.num_transitions() == n * graph.num_actions() * n;

    let has_distinguishing_actions = (0..n).all(|s| {
        let mut by_successor: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for &e in graph.outgoing(s) {
            let t = graph.transition(e);
            by_successor.entry(t.dst).or_default().insert(t.action);
        }
        let groups: Vec<&BTreeSet<usize>> = by_successor.values().collect();
        groups.iter().enumerate().all(|(i, a1)| {
            groups[i + 1..]
                .iter()
                .all(|a2| !(a1.len() == 1 && a2.len() == 1 && *a1 == *a2))
        })
    });

    let successor_sets: Vec<BTreeSet<usize>> = (0..n)
        .map(|s| graph.successors(s).into_iter().collect())
        .collect();
    let is_diamond_complete = (0..n).all(|s| {
        let succ: Vec<usize> = successor_sets[s].iter().copied().collect();
        succ.iter().enumerate().all(|(i, &u)| {
            succ[i..]
                .iter()
                .all(|&v| !successor_sets[u].is_disjoint(&successor_sets[v]))
        })
    });

    let reach = reachable_sets(graph);
    let every_state_in_loop = (0..n).all(|s| reach[s][s]);
    let reachable_from = (0..n)
        .map(|s| {
            let set: BTreeSet<StateId> = (0..n)
                .filter(|&u| u == s || reach[s][u])
                .map(|u| graph.state(u).clone())
                .collect();
            (graph.state(s).clone(), set)
        })
        .collect();

    TopologyReport {
        is_complete,
        has_distinguishing_actions,
        is_diamond_complete,
        every_state_in_loop,
        reachable_from,
    }
}

/// Number of diamonds in the graph, without materializing them.
pub fn count_diamonds(graph: &TransitionGraph) -> u128 {
    (0..graph.num_states())
        .map(|s| {
            two_step_groups(graph, s)
                .values()
                .map(|g| (g.len() as u128).pow(2))
                .sum::<u128>()
        })
        .sum()
}

/// Length-two trajectories from `start`, grouped by end state, each group in
/// canonical order.
fn two_step_groups(graph: &TransitionGraph, start: usize) -> BTreeMap<usize, Vec<[usize; 2]>> {
    let mut groups: BTreeMap<usize, Vec<[usize; 2]>> = BTreeMap::new();
    for &e1 in graph.outgoing(start) {
        for &e2 in graph.outgoing(graph.transition(e1).dst) {
            groups
                .entry(graph.transition(e2).dst)
                .or_default()
                .push([e1, e2]);
        }
    }
    groups
}

/// Visits every diamond in canonical order: by start state, then end state,
/// then first leg, then second leg.
pub fn for_each_diamond(graph: &TransitionGraph, mut visit: impl FnMut(Diamond)) {
    for s in 0..graph.num_states() {
        for group in two_step_groups(graph, s).values() {
            for &first in group {
                for &second in group {
                    visit(Diamond { first, second });
                }
            }
        }
    }
}

pub fn enumerate_diamonds(graph: &TransitionGraph, cap: u128) -> Result<Vec<Diamond>> {
    let count = count_diamonds(graph);
    if count > cap {
        return Err(Error::CapExceeded {
            what: "diamonds",
            count,
            cap,
        });
    }
    let mut diamonds = Vec::with_capacity(count as usize);
    for_each_diamond(graph, |d| diamonds.push(d));
    Ok(diamonds)
}

/// Number of trajectories of exactly `length` steps from `start`, saturating.
pub fn count_trajectories(graph: &TransitionGraph, start: usize, length: usize) -> u128 {
    let n = graph.num_states();
    let mut counts = vec![0u128; n];
    counts[start] = 1;
    for _ in 0..length {
        let mut next = vec![0u128; n];
        for (s, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for &e in graph.outgoing(s) {
                let d = graph.transition(e).dst;
                next[d] = next[d].saturating_add(c);
            }
        }
        counts = next;
    }
    counts.into_iter().fold(0u128, u128::saturating_add)
}

/// All trajectories of exactly `length` steps from `start`, in lexicographic
/// order of their transitions.
pub fn enumerate_trajectories(
    graph: &TransitionGraph,
    start: usize,
    length: usize,
    cap: u128,
) -> Result<Vec<Trajectory>> {
    if start >= graph.num_states() {
        return Err(Error::UnknownState(format!("#{start}")));
    }
    let count = count_trajectories(graph, start, length);
    if count > cap {
        return Err(Error::CapExceeded {
            what: "trajectories",
            count,
            cap,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut current = Trajectory::empty(start);
    walk(graph, &mut current, length, &mut |t| out.push(t.clone()));
    Ok(out)
}

/// Depth-first visit of every extension of `current` by `remaining` steps.
pub(crate) fn walk(
    graph: &TransitionGraph,
    current: &mut Trajectory,
    remaining: usize,
    visit: &mut dyn FnMut(&Trajectory),
) {
    if remaining == 0 {
        visit(current);
        return;
    }
    let at = current.end(graph);
    for &e in graph.outgoing(at) {
        current.push(e);
        walk(graph, current, remaining - 1, visit);
        current.pop();
    }
}

/// Deterministic dynamics compatible with a graph: for every `(state,
/// action)` pair that has at least one allowed transition, the transition
/// that is taken with probability one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicDynamics {
    num_actions: usize,
    choice: Vec<Option<usize>>,
    initial_support: Vec<usize>,
}

impl DeterministicDynamics {
    /// Builds dynamics from one chosen transition per available `(state,
    /// action)` pair. Fails if a pair is missing or chosen twice.
    pub fn new(
        graph: &TransitionGraph,
        chosen: &[usize],
        initial_support: Vec<usize>,
    ) -> Result<Self> {
        let na = graph.num_actions();
        let mut choice = vec![None; graph.num_states() * na];
        for &e in chosen {
            if e >= graph.num_transitions() {
                return Err(Error::Precondition(format!(
                    "transition index {e} is not in the graph"
                )));
            }
            let t = graph.transition(e);
            let slot = &mut choice[t.src * na + t.action];
            if slot.is_some() {
                return Err(Error::Precondition(format!(
                    "dynamics choose more than one successor for ({}, {})",
                    graph.state(t.src),
                    graph.action(t.action)
                )));
            }
            *slot = Some(e);
        }
        for t in graph.transitions() {
            if choice[t.src * na + t.action].is_none() {
                return Err(Error::Precondition(format!(
                    "dynamics choose no successor for ({}, {})",
                    graph.state(t.src),
                    graph.action(t.action)
                )));
            }
        }
        let mut support = initial_support;
        support.sort_unstable();
        support.dedup();
        if support.is_empty() {
            return Err(Error::Precondition(
                "initial support must not be empty".into(),
            ));
        }
        if let Some(&s) = support.iter().find(|&&s| s >= graph.num_states()) {
            return Err(Error::Precondition(format!(
                "initial support state #{s} is not in the graph"
            )));
        }
        Ok(Self {
            num_actions: na,
            choice,
            initial_support: support,
        })
    }

    /// The transition taken from `state` under `action`, if the action is available there.
    pub fn chosen(&self, state: usize, action: usize) -> Option<usize> {
        self.choice[state * self.num_actions + action]
    }

    pub fn successor(&self, graph: &TransitionGraph, state: usize, action: usize) -> Option<usize> {
        self.chosen(state, action).map(|e| graph.transition(e).dst)
    }

    /// Chosen transitions in canonical `(state, action)` order.
    pub fn chosen_transitions(&self) -> Vec<usize> {
        self.choice.iter().flatten().copied().collect()
    }

    pub fn initial_support(&self) -> &[usize] {
        &self.initial_support
    }

    /// True when every chosen transition exists in `graph` and belongs to its slot.
    pub fn is_compatible(&self, graph: &TransitionGraph) -> bool {
        let na = graph.num_actions();
        if na != self.num_actions || self.choice.len() != graph.num_states() * na {
            return false;
        }
        self.choice.iter().enumerate().all(|(slot, c)| match c {
            Some(e) => graph
                .transitions()
                .get(*e)
                .is_some_and(|t| t.src * na + t.action == slot),
            None => true,
        })
    }
}

/// Odometer over every compatible deterministic dynamics, in lexicographic
/// order of the per-`(state, action)` successor choices.
#[derive(Debug, Clone)]
pub struct DynamicsEnumeration<'g> {
    graph: &'g TransitionGraph,
    options: Vec<Vec<usize>>,
    digits: Vec<usize>,
    total: u128,
    budget: u128,
    yielded: u128,
    exhausted: bool,
}

impl DynamicsEnumeration<'_> {
    /// Product of the per-pair successor counts (saturating).
    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn budget(&self) -> u128 {
        self.budget
    }

    pub fn is_truncated(&self) -> bool {
        self.total > self.budget
    }
}

impl Iterator for DynamicsEnumeration<'_> {
    type Item = DeterministicDynamics;

    fn next(&mut self) -> Option<Self::Item> {
        if self.exhausted || self.yielded >= self.budget {
            return None;
        }
        let na = self.graph.num_actions();
        let mut choice = vec![None; self.graph.num_states() * na];
        for (options, &digit) in self.options.iter().zip(&self.digits) {
            let e = options[digit];
            let t = self.graph.transition(e);
            choice[t.src * na + t.action] = Some(e);
        }
        let item = DeterministicDynamics {
            num_actions: na,
            choice,
            initial_support: (0..self.graph.num_states()).collect(),
        };
        self.yielded += 1;

        // last pair varies fastest
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.exhausted = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.options[i].len() {
                break;
            }
            self.digits[i] = 0;
        }
        Some(item)
    }
}

/// Enumerates compatible deterministic dynamics with full initial support,
/// stopping after `budget` items. `total()` reports the full count.
pub fn enumerate_deterministic_dynamics(
    graph: &TransitionGraph,
    budget: u128,
) -> DynamicsEnumeration<'_> {
    let na = graph.num_actions();
    let mut options: Vec<Vec<usize>> = Vec::new();
    let mut slot_of: BTreeMap<usize, usize> = BTreeMap::new();
    for (e, t) in graph.transitions().iter().enumerate() {
        let slot = t.src * na + t.action;
        let idx = *slot_of.entry(slot).or_insert_with(|| {
            options.push(Vec::new());
            options.len() - 1
        });
        options[idx].push(e);
    }
    let total = options
        .iter()
        .fold(1u128, |acc, o| acc.saturating_mul(o.len() as u128));
    DynamicsEnumeration {
        graph,
        digits: vec![0; options.len()],
        options,
        total,
        budget,
        yielded: 0,
        exhausted: false,
    }
}
