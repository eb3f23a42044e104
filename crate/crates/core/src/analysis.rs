//! Checks for conservativeness, curl-freeness, action independence and
//! optimality preservation, plus two ways of recovering a potential from a
//! conservative reward.
//!
//! On a finite graph with `gamma < 1` a reward is conservative exactly when
//! it lies in the image of `grad`, so [`solve_potential`] (a weighted least
//! squares fit) is the authoritative test. The trajectory and lasso searches
//! exist to produce human-readable witnesses.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{reward_combine, reward_norm, Potential, Reward, Tolerance};
use crate::graph::{
    enumerate_deterministic_dynamics, enumerate_trajectories, DeterministicDynamics, Diamond,
    LassoTrajectory, Trajectory, TransitionGraph,
};
use crate::operators::{grad, lasso_integral_unchecked, max_abs_curl};

/// Default gap allowed between Q-values of actions that should tie.
pub const DEFAULT_GAP_TOLERANCE: f64 = 1e-8;
/// Sup-norm change at which value iteration stops.
pub const VALUE_ITERATION_EPSILON: f64 = 1e-12;
pub const DEFAULT_FINITE_HORIZON: usize = 6;
pub const DEFAULT_LASSO_PREFIX: usize = 4;
pub const DEFAULT_LASSO_CYCLE: usize = 4;
/// Upper bound on lassos visited per witness search.
pub const DEFAULT_LASSO_CAP: u128 = 1_000_000;

fn require_discounted(graph: &TransitionGraph, operation: &'static str) -> Result<()> {
    if graph.gamma() >= 1.0 {
        return Err(Error::GammaNotBelowOne {
            operation,
            gamma: graph.gamma(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionIndependence {
    pub independent: bool,
    /// Two transitions with equal endpoints and different actions whose rewards differ.
    pub witness: Option<(usize, usize)>,
}

pub fn is_action_independent(
    graph: &TransitionGraph,
    r: &Reward,
    tol: Tolerance,
) -> Result<ActionIndependence> {
    r.check_domain(graph)?;
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (e, t) in graph.transitions().iter().enumerate() {
        groups.entry((t.src, t.dst)).or_default().push(e);
    }
    for edges in groups.values() {
        for (i, &a) in edges.iter().enumerate() {
            for &b in &edges[i + 1..] {
                if !tol.close(r.get(a), r.get(b)) {
                    return Ok(ActionIndependence {
                        independent: false,
                        witness: Some((a, b)),
                    });
                }
            }
        }
    }
    Ok(ActionIndependence {
        independent: true,
        witness: None,
    })
}

/// Weighted least-squares fit of `grad phi ~ r`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialFit {
    /// Minimum-norm least-squares potential.
    pub potential: Potential,
    /// `||grad potential - r||` in the transition-weighted norm.
    pub residual: f64,
    /// True when the residual is within tolerance, i.e. `r` is a gradient.
    pub exact: bool,
}

impl PotentialFit {
    /// The potential, if it certifies `r` as a gradient.
    pub fn certificate(&self) -> Option<&Potential> {
        self.exact.then_some(&self.potential)
    }
}

/// Solves `min ||grad phi - r||_w` through an SVD of the weighted gradient
/// matrix, picking the minimum-norm solution when it is not unique.
pub fn solve_potential(
    graph: &TransitionGraph,
    r: &Reward,
    tol: Tolerance,
) -> Result<PotentialFit> {
    r.check_domain(graph)?;
    let gamma = graph.gamma();
    let (m, n) = (graph.num_transitions(), graph.num_states());
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for (e, t) in graph.transitions().iter().enumerate() {
        let sw = t.weight.sqrt();
        a[(e, t.src)] -= sw;
        a[(e, t.dst)] += gamma * sw;
        b[e] = sw * r.get(e);
    }
    let svd = a.svd(true, true);
    let largest = svd
        .singular_values
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v));
    let eps = (1e-12 * largest).max(f64::MIN_POSITIVE);
    let x = svd
        .solve(&b, eps)
        .map_err(|e| Error::Numerical(format!("least-squares potential solve failed: {e}")))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "least-squares potential has non-finite values".into(),
        ));
    }
    let potential = Potential::from_raw(x.iter().copied().collect());
    let residual = reward_norm(
        graph,
        &reward_combine(1.0, &grad(graph, &potential)?, -1.0, r)?,
    )?;
    let scale = reward_norm(graph, r)?;
    Ok(PotentialFit {
        potential,
        residual,
        exact: tol.negligible(residual, scale),
    })
}

/// Two finite trajectories with common start, end and length whose integrals differ.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryWitness {
    pub first: Trajectory,
    pub second: Trajectory,
    pub first_integral: f64,
    pub second_integral: f64,
}

/// Two lassos with a common start whose integrals differ.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoWitness {
    pub first: LassoTrajectory,
    pub second: LassoTrajectory,
    pub first_integral: f64,
    pub second_integral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    Finite(TrajectoryWitness),
    Lasso(LassoWitness),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteConservativeness {
    /// No violation among trajectories of length `<= horizon`.
    pub holds: bool,
    pub horizon: usize,
    pub witness: Option<TrajectoryWitness>,
}

/// Compares the integrals of all trajectories sharing start, end and length,
/// for every length up to `max_len`.
///
/// Works layer by layer: if every trajectory of length `L` from `s` to `u`
/// has the same integral, the trajectories of length `L + 1` into `v` only
/// need to be compared against one representative each. This is exactly
/// the pairwise comparison, in `O(max_len * |S| * |T|)`.
pub fn check_finitely_conservative(
    graph: &TransitionGraph,
    r: &Reward,
    max_len: usize,
    tol: Tolerance,
) -> Result<FiniteConservativeness> {
    r.check_domain(graph)?;
    if max_len == 0 {
        return Err(Error::Precondition("max_len must be at least 1".into()));
    }
    let gamma = graph.gamma();
    let n = graph.num_states();
    for start in 0..n {
        let mut layer: Vec<Option<(f64, Trajectory)>> = vec![None; n];
        layer[start] = Some((0.0, Trajectory::empty(start)));
        let mut discount = 1.0;
        for _ in 0..max_len {
            let mut next: Vec<Option<(f64, Trajectory)>> = vec![None; n];
            for (value, rep) in layer.iter().flatten() {
                let at = rep.end(graph);
                for &e in graph.outgoing(at) {
                    let v = graph.transition(e).dst;
                    let candidate = value + discount * r.get(e);
                    match &next[v] {
                        None => {
                            let mut t = rep.clone();
                            t.push(e);
                            next[v] = Some((candidate, t));
                        }
                        Some((existing, first)) => {
                            if !tol.close(*existing, candidate) {
                                let mut second = rep.clone();
                                second.push(e);
                                return Ok(FiniteConservativeness {
                                    holds: false,
                                    horizon: max_len,
                                    witness: Some(TrajectoryWitness {
                                        first: first.clone(),
                                        second,
                                        first_integral: *existing,
                                        second_integral: candidate,
                                    }),
                                });
                            }
                        }
                    }
                }
            }
            layer = next;
            discount *= gamma;
        }
    }
    Ok(FiniteConservativeness {
        holds: true,
        horizon: max_len,
        witness: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConservativenessKind {
    Conservative,
    /// Not conservative, but no finite violation up to the searched horizon.
    FinitelyConservativeOnly,
    NotFinitelyConservative,
}

impl ConservativenessKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConservativenessKind::Conservative => "conservative",
            ConservativenessKind::FinitelyConservativeOnly => "finitely_conservative_only",
            ConservativenessKind::NotFinitelyConservative => "not_finitely_conservative",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservativenessVerdict {
    pub kind: ConservativenessKind,
    pub witness: Option<Witness>,
    pub potential: Option<Potential>,
    pub residual: f64,
    /// Horizon of the finite check used to separate the two negative kinds.
    pub finite_horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservativeOptions {
    pub tolerance: Tolerance,
    pub max_prefix: usize,
    pub max_cycle: usize,
    pub finite_horizon: usize,
    pub lasso_cap: u128,
}

impl Default for ConservativeOptions {
    fn default() -> Self {
        Self {
            tolerance: Tolerance::default(),
            max_prefix: DEFAULT_LASSO_PREFIX,
            max_cycle: DEFAULT_LASSO_CYCLE,
            finite_horizon: DEFAULT_FINITE_HORIZON,
            lasso_cap: DEFAULT_LASSO_CAP,
        }
    }
}

/// Decides conservativeness by the least-squares residual. When the reward
/// is not conservative, looks for a lasso witness and runs the finite check
/// to tell the two negative kinds apart.
pub fn check_conservative(
    graph: &TransitionGraph,
    r: &Reward,
    options: ConservativeOptions,
) -> Result<ConservativenessVerdict> {
    require_discounted(graph, "conservativeness check")?;
    let fit = solve_potential(graph, r, options.tolerance)?;
    if fit.exact {
        return Ok(ConservativenessVerdict {
            kind: ConservativenessKind::Conservative,
            witness: None,
            potential: Some(fit.potential),
            residual: fit.residual,
            finite_horizon: options.finite_horizon,
        });
    }
    let lasso = find_lasso_witness(graph, r, &options)?;
    let finite =
        check_finitely_conservative(graph, r, options.finite_horizon.max(1), options.tolerance)?;
    let kind = if finite.holds {
        ConservativenessKind::FinitelyConservativeOnly
    } else {
        ConservativenessKind::NotFinitelyConservative
    };
    let witness = lasso
        .map(Witness::Lasso)
        .or_else(|| finite.witness.map(Witness::Finite));
    Ok(ConservativenessVerdict {
        kind,
        witness,
        potential: None,
        residual: fit.residual,
        finite_horizon: options.finite_horizon,
    })
}

/// Searches lassos from each start state, shortest first, for two whose
/// integrals differ. Returns `None` if none is found within the bounds.
pub fn find_lasso_witness(
    graph: &TransitionGraph,
    r: &Reward,
    options: &ConservativeOptions,
) -> Result<Option<LassoWitness>> {
    require_discounted(graph, "lasso witness search")?;
    r.check_domain(graph)?;
    let gamma = graph.gamma();
    let tol = options.tolerance;
    let mut visited: u128 = 0;
    let mut cycles: BTreeMap<(usize, usize), Vec<Trajectory>> = BTreeMap::new();

    for start in 0..graph.num_states() {
        let mut reference: Option<(Trajectory, Trajectory, f64)> = None;
        for total in 1..=options.max_prefix + options.max_cycle {
            for cycle_len in 1..=options.max_cycle.min(total) {
                let prefix_len = total - cycle_len;
                if prefix_len > options.max_prefix {
                    continue;
                }
                let Ok(prefixes) =
                    enumerate_trajectories(graph, start, prefix_len, options.lasso_cap)
                else {
                    continue;
                };
                for prefix in prefixes {
                    let at = prefix.end(graph);
                    let closed = cycles.entry((at, cycle_len)).or_insert_with(|| {
                        enumerate_trajectories(graph, at, cycle_len, options.lasso_cap)
                            .map(|ts| ts.into_iter().filter(|t| t.end(graph) == at).collect())
                            .unwrap_or_default()
                    });
                    for cycle in closed.iter() {
                        visited += 1;
                        if visited > options.lasso_cap {
                            return Ok(None);
                        }
                        let value =
                            lasso_integral_unchecked(gamma, r, prefix.steps(), cycle.steps());
                        match &reference {
                            None => reference = Some((prefix.clone(), cycle.clone(), value)),
                            Some((p0, c0, v0)) => {
                                if !tol.close(*v0, value) {
                                    return Ok(Some(LassoWitness {
                                        first: LassoTrajectory::new(graph, p0.clone(), c0.clone())?,
                                        second: LassoTrajectory::new(
                                            graph,
                                            prefix.clone(),
                                            cycle.clone(),
                                        )?,
                                        first_integral: *v0,
                                        second_integral: value,
                                    }));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurlCheck {
    pub curl_free: bool,
    pub max_abs_curl: f64,
    pub worst_diamond: Option<Diamond>,
}

pub fn check_curl_free(graph: &TransitionGraph, r: &Reward, tol: Tolerance) -> Result<CurlCheck> {
    let (max, worst) = max_abs_curl(graph, r)?;
    Ok(CurlCheck {
        curl_free: tol.negligible(max, r.max_abs()),
        max_abs_curl: max,
        worst_diamond: worst,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPathPotential {
    pub potential: Potential,
    /// Largest breadth-first depth from the root, the `N` of the boundedness estimate.
    pub depth: usize,
    /// `max_t |grad potential (t) - r(t)|`
    pub max_gradient_error: f64,
    /// False when `grad potential != r`; the input was then not finitely conservative.
    pub reproduces_reward: bool,
}

/// Builds `phi(s) = gamma^-|tau_s| (int_tau_s r + r(s0, s0) / (gamma - 1))`
/// from a shortest trajectory `tau_s` from `root` to every state.
///
/// Breadth-first search expands states in canonical order and keeps the
/// first transition that discovers a state, so the result is deterministic
/// even when the input is not finitely conservative.
pub fn construct_potential_shortest_path(
    graph: &TransitionGraph,
    r: &Reward,
    root: usize,
    tol: Tolerance,
) -> Result<ShortestPathPotential> {
    r.check_domain(graph)?;
    let gamma = graph.gamma();
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Precondition(format!(
            "shortest-path potential requires 0 < gamma < 1 (got {gamma})"
        )));
    }
    if root >= graph.num_states() {
        return Err(Error::UnknownState(format!("#{root}")));
    }
    let self_loop = graph
        .outgoing(root)
        .iter()
        .copied()
        .find(|&e| graph.transition(e).is_self_loop())
        .ok_or_else(|| {
            Error::Precondition(format!("state {} has no self-loop", graph.state(root)))
        })?;

    let n = graph.num_states();
    // (depth, discounted integral along the tree path)
    let mut reached: Vec<Option<(usize, f64)>> = vec![None; n];
    reached[root] = Some((0, 0.0));
    let mut frontier = vec![root];
    while !frontier.is_empty() {
        frontier.sort_unstable();
        let mut next = Vec::new();
        for &u in &frontier {
            let (depth, integral) = reached[u].expect("frontier states are reached");
            let discount = gamma.powi(depth as i32);
            for &e in graph.outgoing(u) {
                let v = graph.transition(e).dst;
                if reached[v].is_none() {
                    reached[v] = Some((depth + 1, integral + discount * r.get(e)));
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    if let Some(s) = reached.iter().position(Option::is_none) {
        return Err(Error::Precondition(format!(
            "state {} is not reachable from {}",
            graph.state(s),
            graph.state(root)
        )));
    }

    let base = r.get(self_loop) / (gamma - 1.0);
    let mut depth = 0;
    let values: Vec<f64> = reached
        .iter()
        .map(|entry| {
            let (k, integral) = entry.expect("all states reached");
            depth = depth.max(k);
            (integral + base) / gamma.powi(k as i32)
        })
        .collect();
    let potential = Potential::from_raw(values);
    let g = grad(graph, &potential)?;
    let max_gradient_error = g
        .values()
        .iter()
        .zip(r.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let reproduces_reward = g
        .values()
        .iter()
        .zip(r.values())
        .all(|(a, b)| tol.close(*a, *b));
    Ok(ShortestPathPotential {
        potential,
        depth,
        max_gradient_error,
        reproduces_reward,
    })
}

/// A deterministic stationary policy: one available action per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub choice: Vec<usize>,
}

/// Optimal action values under fixed deterministic dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct QValues {
    num_actions: usize,
    values: Vec<Option<f64>>,
    pub iterations: usize,
}

impl QValues {
    /// `Q*(s, a)`, or `None` when `a` is not available in `s`.
    pub fn get(&self, state: usize, action: usize) -> Option<f64> {
        self.values[state * self.num_actions + action]
    }

    /// Available actions in `state` with their values.
    pub fn available(&self, state: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.num_actions).filter_map(move |a| self.get(state, a).map(|q| (a, q)))
    }

    pub fn state_value(&self, state: usize) -> f64 {
        self.available(state)
            .map(|(_, q)| q)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Actions within `tol` of the best one.
    pub fn optimal_actions(&self, state: usize, tol: f64) -> Vec<usize> {
        let best = self.state_value(state);
        self.available(state)
            .filter(|(_, q)| best - q <= tol)
            .map(|(a, _)| a)
            .collect()
    }

    /// Greedy policy, breaking ties towards the first action.
    pub fn greedy_policy(&self, num_states: usize) -> Policy {
        Policy {
            choice: (0..num_states)
                .map(|s| {
                    let best = self.state_value(s);
                    self.available(s)
                        .find(|(_, q)| *q == best)
                        .map(|(a, _)| a)
                        .expect("every state has an available action")
                })
                .collect(),
        }
    }
}

/// Value iteration to sup-norm change `<= 1e-12`, capped at the iteration
/// count after which the geometric error bound drops below `1e-12`.
pub fn q_star(
    graph: &TransitionGraph,
    dynamics: &DeterministicDynamics,
    r: &Reward,
) -> Result<QValues> {
    require_discounted(graph, "Q* computation")?;
    r.check_domain(graph)?;
    if !dynamics.is_compatible(graph) {
        return Err(Error::Precondition(
            "dynamics are not compatible with the graph".into(),
        ));
    }
    let gamma = graph.gamma();
    let (n, na) = (graph.num_states(), graph.num_actions());
    let choices: Vec<Vec<usize>> = (0..n)
        .map(|s| (0..na).filter_map(|a| dynamics.chosen(s, a)).collect())
        .collect();

    let scale = r.max_abs();
    let bound = if scale == 0.0 || gamma == 0.0 {
        1
    } else {
        let k = (VALUE_ITERATION_EPSILON * (1.0 - gamma) / scale).ln() / gamma.ln();
        (k.ceil().max(1.0)) as usize
    };

    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    while iterations < bound {
        let mut change = 0.0f64;
        for s in 0..n {
            let best = choices[s]
                .iter()
                .map(|&e| r.get(e) + gamma * v[graph.transition(e).dst])
                .fold(f64::NEG_INFINITY, f64::max);
            change = change.max((best - v[s]).abs());
            next[s] = best;
        }
        std::mem::swap(&mut v, &mut next);
        iterations += 1;
        if change <= VALUE_ITERATION_EPSILON {
            break;
        }
    }

    let mut values = vec![None; n * na];
    for s in 0..n {
        for a in 0..na {
            if let Some(e) = dynamics.chosen(s, a) {
                values[s * na + a] = Some(r.get(e) + gamma * v[graph.transition(e).dst]);
            }
        }
    }
    Ok(QValues {
        num_actions: na,
        values,
        iterations,
    })
}

/// States reachable from the initial support when every action may be taken.
pub fn reachable_under(graph: &TransitionGraph, dynamics: &DeterministicDynamics) -> Vec<bool> {
    let (n, na) = (graph.num_states(), graph.num_actions());
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in dynamics.initial_support() {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        for a in 0..na {
            if let Some(d) = dynamics.successor(graph, s, a) {
                if !seen[d] {
                    seen[d] = true;
                    queue.push_back(d);
                }
            }
        }
    }
    seen
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOptimality {
    pub all_optimal: bool,
    /// Largest `max_a Q* - min_a Q*` over reachable states.
    pub max_gap: f64,
    /// State attaining the largest gap with its best and worst actions.
    pub worst: Option<(usize, usize, usize)>,
}

/// Whether every policy is optimal for reward `f` under `dynamics`, i.e.
/// `Q*_f(s, .)` is constant over the available actions at every reachable state.
pub fn all_policies_optimal(
    graph: &TransitionGraph,
    dynamics: &DeterministicDynamics,
    f: &Reward,
    gap_tolerance: f64,
) -> Result<PolicyOptimality> {
    let q = q_star(graph, dynamics, f)?;
    let reachable = reachable_under(graph, dynamics);
    let mut max_gap = 0.0;
    let mut worst = None;
    for s in (0..graph.num_states()).filter(|&s| reachable[s]) {
        let mut hi: Option<(usize, f64)> = None;
        let mut lo: Option<(usize, f64)> = None;
        for (a, v) in q.available(s) {
            if hi.is_none_or(|(_, h)| v > h) {
                hi = Some((a, v));
            }
            if lo.is_none_or(|(_, l)| v < l) {
                lo = Some((a, v));
            }
        }
        if let (Some((ah, h)), Some((al, l))) = (hi, lo) {
            if h - l > max_gap {
                max_gap = h - l;
                worst = Some((s, ah, al));
            }
        }
    }
    Ok(PolicyOptimality {
        all_optimal: max_gap <= gap_tolerance,
        max_gap,
        worst,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub dynamics: DeterministicDynamics,
    /// Index of the dynamics in canonical enumeration order.
    pub index: u128,
    pub state: usize,
    pub better_action: usize,
    pub worse_action: usize,
    pub gap: f64,
}

impl Counterexample {
    /// Recomputes Q* under the stored dynamics and returns the action gap at the stored state.
    pub fn replay(&self, graph: &TransitionGraph, f: &Reward) -> Result<f64> {
        let q = q_star(graph, &self.dynamics, f)?;
        let hi = q.get(self.state, self.better_action);
        let lo = q.get(self.state, self.worse_action);
        match (hi, lo) {
            (Some(h), Some(l)) => Ok(h - l),
            _ => Err(Error::Precondition(
                "counterexample actions are not available".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimalityOutcome {
    CounterexampleFound,
    NoCounterexampleWithinBudget,
}

impl OptimalityOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimalityOutcome::CounterexampleFound => "counterexample_found",
            OptimalityOutcome::NoCounterexampleWithinBudget => "no_counterexample_within_budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityVerdict {
    pub verdict: OptimalityOutcome,
    pub counterexample: Option<Counterexample>,
    pub dynamics_checked: u128,
    pub total_dynamics: u128,
    /// Largest action gap seen across all checked dynamics.
    pub max_gap: f64,
}

impl OptimalityVerdict {
    /// True when every compatible deterministic dynamics was checked.
    pub fn exhaustive(&self) -> bool {
        self.dynamics_checked == self.total_dynamics
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalityOptions {
    pub budget: u128,
    pub gap_tolerance: f64,
    pub threads: usize,
}

impl Default for OptimalityOptions {
    fn default() -> Self {
        Self {
            budget: crate::graph::DEFAULT_DYNAMICS_BUDGET,
            gap_tolerance: DEFAULT_GAP_TOLERANCE,
            threads: 1,
        }
    }
}

const PARALLEL_BATCH: usize = 256;

/// Searches compatible deterministic dynamics (full initial support) for one
/// under which some reachable state has actions with different `Q*_f`.
/// The reported counterexample is the first in canonical order regardless
/// of the thread count.
pub fn check_optimality_preserving(
    graph: &TransitionGraph,
    f: &Reward,
    options: OptimalityOptions,
) -> Result<OptimalityVerdict> {
    require_discounted(graph, "optimality-preservation check")?;
    f.check_domain(graph)?;
    let mut enumeration = enumerate_deterministic_dynamics(graph, options.budget);
    let total = enumeration.total();

    let evaluate =
        |index: u128, dynamics: DeterministicDynamics| -> Result<(f64, Option<Counterexample>)> {
            let check = all_policies_optimal(graph, &dynamics, f, options.gap_tolerance)?;
            let counterexample = match (check.all_optimal, check.worst) {
                (false, Some((state, better_action, worse_action))) => Some(Counterexample {
                    dynamics,
                    index,
                    state,
                    better_action,
                    worse_action,
                    gap: check.max_gap,
                }),
                _ => None,
            };
            Ok((check.max_gap, counterexample))
        };

    let mut checked: u128 = 0;
    let mut max_gap = 0.0f64;
    let pool = if options.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(options.threads)
                .build()
                .map_err(|e| Error::Precondition(format!("cannot start thread pool: {e}")))?,
        )
    } else {
        None
    };

    loop {
        let batch: Vec<(u128, DeterministicDynamics)> = enumeration
            .by_ref()
            .take(if pool.is_some() { PARALLEL_BATCH } else { 1 })
            .enumerate()
            .map(|(i, d)| (checked + i as u128, d))
            .collect();
        if batch.is_empty() {
            break;
        }
        let results: Vec<Result<(f64, Option<Counterexample>)>> = match &pool {
            Some(pool) => {
                pool.install(|| batch.into_par_iter().map(|(i, d)| evaluate(i, d)).collect())
            }
            None => batch.into_iter().map(|(i, d)| evaluate(i, d)).collect(),
        };
        for result in results {
            let (gap, counterexample) = result?;
            checked += 1;
            max_gap = max_gap.max(gap);
            if let Some(c) = counterexample {
                return Ok(OptimalityVerdict {
                    verdict: OptimalityOutcome::CounterexampleFound,
                    counterexample: Some(c),
                    dynamics_checked: checked,
                    total_dynamics: total,
                    max_gap,
                });
            }
        }
    }
    Ok(OptimalityVerdict {
        verdict: OptimalityOutcome::NoCounterexampleWithinBudget,
        counterexample: None,
        dynamics_checked: checked,
        total_dynamics: total,
        max_gap,
    })
}
