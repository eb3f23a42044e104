#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use reward_calculus::graph::{enumerate_trajectories, topology_report, Trajectory};
use reward_calculus::operators::line_integral_finite;
use reward_calculus::{GraphSpec, Potential, Reward, Tolerance, TransitionGraph};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Edge list over integer states and actions, turned into a graph at the end.
#[derive(Debug, Clone)]
pub struct Draft {
    pub states: usize,
    pub actions: usize,
    pub edges: BTreeSet<(usize, usize, usize)>,
    pub state_weights: Vec<f64>,
    pub weight_range: Option<(f64, f64)>,
}

impl Draft {
    pub fn new(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            edges: BTreeSet::new(),
            state_weights: vec![1.0; states],
            weight_range: None,
        }
    }

    pub fn successors(&self, s: usize) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter(|e| e.0 == s)
            .map(|e| e.2)
            .collect()
    }

    pub fn out(&self, s: usize) -> Vec<(usize, usize, usize)> {
        self.edges.iter().filter(|e| e.0 == s).copied().collect()
    }

    /// Adds a random transition out of every state that has none.
    pub fn close_dead_ends(&mut self, rng: &mut impl Rng) {
        for s in 0..self.states {
            if self.successors(s).is_empty() {
                let a = rng.gen_range(0..self.actions);
                let d = rng.gen_range(0..self.states);
                self.edges.insert((s, a, d));
            }
        }
    }

    pub fn build(&self, rng: &mut impl Rng, gamma: f64) -> TransitionGraph {
        let names: Vec<String> = (0..self.states).map(|i| format!("s{i}")).collect();
        let acts: Vec<String> = (0..self.actions).map(|i| format!("a{i}")).collect();
        let mut spec = GraphSpec::new(gamma);
        for (i, name) in names.iter().enumerate() {
            spec = spec.weighted_state(name, self.state_weights[i]);
        }
        for a in &acts {
            spec = spec.action(a);
        }
        for &(s, a, d) in &self.edges {
            let w = match self.weight_range {
                Some((lo, hi)) => rng.gen_range(lo..=hi),
                None => 1.0,
            };
            spec = spec.weighted_transition(&names[s], &acts[a], &names[d], w);
        }
        spec.build().expect("generated graph is valid")
    }
}

/// Random sparse transition structure without dead ends.
pub fn random_draft(
    rng: &mut impl Rng,
    max_states: usize,
    max_actions: usize,
    density: f64,
) -> Draft {
    let n = rng.gen_range(2.min(max_states)..=max_states);
    let m = rng.gen_range(1..=max_actions);
    let mut draft = Draft::new(n, m);
    for s in 0..n {
        for a in 0..m {
            for d in 0..n {
                if rng.gen_bool(density) {
                    draft.edges.insert((s, a, d));
                }
            }
        }
    }
    draft.close_dead_ends(rng);
    draft
}

pub fn with_random_weights(mut draft: Draft, rng: &mut impl Rng, lo: f64, hi: f64) -> Draft {
    draft.state_weights = (0..draft.states).map(|_| rng.gen_range(lo..=hi)).collect();
    draft.weight_range = Some((lo, hi));
    draft
}

pub fn random_graph(
    rng: &mut impl Rng,
    max_states: usize,
    max_actions: usize,
    gamma: f64,
) -> TransitionGraph {
    random_graph_with_density(rng, max_states, max_actions, gamma, 0.3)
}

pub fn random_graph_with_density(
    rng: &mut impl Rng,
    max_states: usize,
    max_actions: usize,
    gamma: f64,
    density: f64,
) -> TransitionGraph {
    let draft = random_draft(rng, max_states, max_actions, density);
    let draft = with_random_weights(draft, rng, 0.5, 2.0);
    draft.build(rng, gamma)
}

/// Adds transitions until any two transitions out of a common state extend
/// to a diamond.
pub fn repair_diamonds(draft: &mut Draft, rng: &mut impl Rng) {
    loop {
        let mut changed = false;
        for s in 0..draft.states {
            let out = draft.out(s);
            for (i, e1) in out.iter().enumerate() {
                for e2 in &out[i..] {
                    let x = e1.2;
                    let y = e2.2;
                    let sx = draft.successors(x);
                    let sy = draft.successors(y);
                    if sx.intersection(&sy).next().is_none() {
                        let z = *sx.iter().next().expect("no dead ends");
                        let a = rng.gen_range(0..draft.actions);
                        draft.edges.insert((y, a, z));
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return;
        }
    }
}

pub fn diamond_complete_graph(
    rng: &mut impl Rng,
    max_states: usize,
    max_actions: usize,
    gamma: f64,
) -> TransitionGraph {
    let mut draft = random_draft(rng, max_states, max_actions, 0.2);
    repair_diamonds(&mut draft, rng);
    let graph = draft.build(rng, gamma);
    assert!(topology_report(&graph).is_diamond_complete);
    graph
}

/// Two successors of a state are never reachable only under one and the same
/// action.
pub fn distinguishing_graph(rng: &mut impl Rng, max_states: usize, gamma: f64) -> TransitionGraph {
    let n = rng.gen_range(2..=max_states);
    let mut draft = Draft::new(n, 2);
    for s in 0..n {
        for a in 0..2 {
            for d in 0..n {
                if rng.gen_bool(0.35) {
                    draft.edges.insert((s, a, d));
                }
            }
        }
    }
    draft.close_dead_ends(rng);
    for s in 0..n {
        let succ: Vec<usize> = draft.successors(s).into_iter().collect();
        if succ.len() < 2 {
            continue;
        }
        for &d in &succ[1..] {
            let acts: Vec<usize> = draft
                .out(s)
                .into_iter()
                .filter(|e| e.2 == d)
                .map(|e| e.1)
                .collect();
            if acts.len() == 1 {
                draft.edges.insert((s, 1 - acts[0], d));
            }
        }
    }
    let graph = draft.build(rng, gamma);
    assert!(topology_report(&graph).has_distinguishing_actions);
    graph
}

/// Every state lies on the cycle s0 -> s1 -> ... -> s0, plus random extra transitions.
pub fn looped_graph(
    rng: &mut impl Rng,
    max_states: usize,
    max_actions: usize,
    gamma: f64,
) -> TransitionGraph {
    let mut draft = random_draft(rng, max_states, max_actions, 0.2);
    let n = draft.states;
    for s in 0..n {
        draft.edges.insert((s, 0, (s + 1) % n));
    }
    draft = with_random_weights(draft, rng, 0.1, 10.0);
    let graph = draft.build(rng, gamma);
    assert!(topology_report(&graph).every_state_in_loop);
    graph
}

/// `s0` has a self-loop and reaches every state.
pub fn rooted_graph(
    rng: &mut impl Rng,
    max_states: usize,
    max_actions: usize,
    gamma: f64,
) -> TransitionGraph {
    let mut draft = random_draft(rng, max_states, max_actions, 0.2);
    let n = draft.states;
    draft.edges.insert((0, 0, 0));
    let mut order: Vec<usize> = (1..n).collect();
    order.shuffle(rng);
    let mut placed = vec![0usize];
    for s in order {
        let parent = *placed.choose(rng).unwrap();
        let a = rng.gen_range(0..draft.actions);
        draft.edges.insert((parent, a, s));
        placed.push(s);
    }
    draft = with_random_weights(draft, rng, 0.5, 2.0);
    draft.build(rng, gamma)
}

pub fn random_potential(rng: &mut impl Rng, graph: &TransitionGraph, scale: f64) -> Potential {
    let values = (0..graph.num_states())
        .map(|_| rng.gen_range(-scale..=scale))
        .collect();
    Potential::from_values(graph, values).unwrap()
}

pub fn random_reward(rng: &mut impl Rng, graph: &TransitionGraph, scale: f64) -> Reward {
    let values = (0..graph.num_transitions())
        .map(|_| rng.gen_range(-scale..=scale))
        .collect();
    Reward::from_values(graph, values).unwrap()
}

pub fn random_trajectory(
    rng: &mut impl Rng,
    graph: &TransitionGraph,
    max_len: usize,
) -> Trajectory {
    let start = rng.gen_range(0..graph.num_states());
    let len = rng.gen_range(0..=max_len);
    let mut state = start;
    let mut steps = Vec::with_capacity(len);
    for _ in 0..len {
        let e = *graph.outgoing(state).choose(rng).unwrap();
        steps.push(e);
        state = graph.transition(e).dst;
    }
    Trajectory::new(graph, start, steps).unwrap()
}

/// Brute-force finite conservativeness: enumerate every trajectory of each
/// length up to `max_len` and compare integrals with matching start and end.
/// `None` if the enumeration would exceed `cap` trajectories per start and length.
pub fn brute_force_finitely_conservative(
    graph: &TransitionGraph,
    r: &Reward,
    max_len: usize,
    tol: Tolerance,
    cap: u128,
) -> Option<bool> {
    for start in 0..graph.num_states() {
        for len in 1..=max_len {
            let all = enumerate_trajectories(graph, start, len, cap).ok()?;
            let mut first: Vec<Option<f64>> = vec![None; graph.num_states()];
            for t in &all {
                let v = line_integral_finite(graph, r, t).unwrap();
                let end = t.end(graph);
                match first[end] {
                    None => first[end] = Some(v),
                    Some(w) if !tol.close(v, w) => return Some(false),
                    Some(_) => {}
                }
            }
        }
    }
    Some(true)
}
