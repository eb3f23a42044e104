//! Potentials (functions on states) and rewards (functions on allowed
//! transitions), with the weighted inner products
//!
//! ```text
//! <p, q>_lambda = sum_s lambda(s) p(s) q(s)
//! <r, q>_w      = sum_t w(t) r(t) q(t)
//! ```
//!
//! Values are stored densely in the graph's canonical state / transition
//! order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::TransitionGraph;

/// Comparison policy shared by every check: `|x - y| <= abs + rel * max(|x|, |y|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-9,
            rel: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    pub fn close(&self, x: f64, y: f64) -> bool {
        (x - y).abs() <= self.abs + self.rel * x.abs().max(y.abs())
    }

    /// True when `value` is negligible relative to `scale`.
    pub fn negligible(&self, value: f64, scale: f64) -> bool {
        value.abs() <= self.abs + self.rel * scale.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    values: Vec<f64>,
}

impl Potential {
    pub fn zeros(graph: &TransitionGraph) -> Self {
        Self {
            values: vec![0.0; graph.num_states()],
        }
    }

    pub fn constant(graph: &TransitionGraph, c: f64) -> Self {
        Self {
            values: vec![c; graph.num_states()],
        }
    }

    /// Indicator of a single state.
    pub fn indicator(graph: &TransitionGraph, state: usize) -> Self {
        let mut values = vec![0.0; graph.num_states()];
        values[state] = 1.0;
        Self { values }
    }

    pub fn from_values(graph: &TransitionGraph, values: Vec<f64>) -> Result<Self> {
        if values.len() != graph.num_states() {
            return Err(Error::DomainMismatch {
                what: "potential",
                expected: graph.num_states(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "potential at state {}",
                graph.state(i)
            )));
        }
        Ok(Self { values })
    }

    /// Builds a potential from a label map whose keys must be exactly the graph's states.
    pub fn from_map(graph: &TransitionGraph, map: &BTreeMap<String, f64>) -> Result<Self> {
        let mut values = vec![None; graph.num_states()];
        for (label, &v) in map {
            let s = graph.require_state(label)?;
            values[s] = Some(v);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(s, v)| {
                v.ok_or_else(|| {
                    Error::Precondition(format!(
                        "potential has no value for state {}",
                        graph.state(s)
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(graph, values)
    }

    pub fn to_map(&self, graph: &TransitionGraph) -> BTreeMap<String, f64> {
        graph
            .states()
            .iter()
            .zip(&self.values)
            .map(|(s, v)| (s.0.clone(), *v))
            .collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, state: usize) -> f64 {
        self.values[state]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub(crate) fn check_domain(&self, graph: &TransitionGraph) -> Result<()> {
        if self.values.len() != graph.num_states() {
            return Err(Error::DomainMismatch {
                what: "potential",
                expected: graph.num_states(),
                found: self.values.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reward {
    values: Vec<f64>,
}

impl Reward {
    pub fn zeros(graph: &TransitionGraph) -> Self {
        Self {
            values: vec![0.0; graph.num_transitions()],
        }
    }

    pub fn from_values(graph: &TransitionGraph, values: Vec<f64>) -> Result<Self> {
        if values.len() != graph.num_transitions() {
            return Err(Error::DomainMismatch {
                what: "reward",
                expected: graph.num_transitions(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "reward at {}",
                graph.describe_transition(i)
            )));
        }
        Ok(Self { values })
    }

    /// Builds a reward from labelled entries, which must cover every allowed
    /// transition exactly once.
    pub fn from_entries<'a>(
        graph: &TransitionGraph,
        entries: impl IntoIterator<Item = (&'a str, &'a str, &'a str, f64)>,
    ) -> Result<Self> {
        let mut values = vec![None; graph.num_transitions()];
        for (src, action, dst, v) in entries {
            let e = graph.transition_by_label(src, action, dst)?;
            if values[e].replace(v).is_some() {
                return Err(Error::DuplicateReward {
                    src: src.to_string(),
                    action: action.to_string(),
                    dst: dst.to_string(),
                });
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(e, v)| {
                v.ok_or_else(|| {
                    let (src, action, dst) = graph.transition_labels(e);
                    Error::MissingReward {
                        src: src.to_string(),
                        action: action.to_string(),
                        dst: dst.to_string(),
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(graph, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, transition: usize) -> f64 {
        self.values[transition]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sup norm `max_t |r(t)|`.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub(crate) fn check_domain(&self, graph: &TransitionGraph) -> Result<()> {
        if self.values.len() != graph.num_transitions() {
            return Err(Error::DomainMismatch {
                what: "reward",
                expected: graph.num_transitions(),
                found: self.values.len(),
            });
        }
        Ok(())
    }
}

pub fn inner_product_potentials(
    graph: &TransitionGraph,
    p: &Potential,
    q: &Potential,
) -> Result<f64> {
    p.check_domain(graph)?;
    q.check_domain(graph)?;
    Ok(graph
        .state_weights()
        .iter()
        .zip(p.values.iter().zip(&q.values))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

pub fn inner_product_rewards(graph: &TransitionGraph, r: &Reward, q: &Reward) -> Result<f64> {
    r.check_domain(graph)?;
    q.check_domain(graph)?;
    Ok(graph
        .transitions()
        .iter()
        .zip(r.values.iter().zip(&q.values))
        .map(|(t, (a, b))| t.weight * a * b)
        .sum())
}

pub fn reward_norm(graph: &TransitionGraph, r: &Reward) -> Result<f64> {
    Ok(inner_product_rewards(graph, r, r)?.sqrt())
}

/// Weighted norm `sqrt(<p, p>_lambda)` on potentials.
pub fn potential_norm(graph: &TransitionGraph, p: &Potential) -> Result<f64> {
    Ok(inner_product_potentials(graph, p, p)?.sqrt())
}

/// Pointwise `a * r + b * q`.
pub fn reward_combine(a: f64, r: &Reward, b: f64, q: &Reward) -> Result<Reward> {
    if r.len() != q.len() {
        return Err(Error::DomainMismatch {
            what: "reward",
            expected: r.len(),
            found: q.len(),
        });
    }
    Ok(Reward {
        values: r
            .values
            .iter()
            .zip(&q.values)
            .map(|(x, y)| a * x + b * y)
            .collect(),
    })
}
