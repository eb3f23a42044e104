//! Discounted differential operators on a transition graph.
//!
//! * `grad p (s, a, s') = gamma * p(s') - p(s)`
//! * line integral `int_tau r = sum_t gamma^t r(s_t, a_t, s_{t+1})`
//! * `curl r (d1, d2) = int_d1 r - int_d2 r` over diamonds
//! * `div r (s) = (sum_out w r - gamma * sum_in w r) / lambda(s)`, the negative
//!   adjoint of `grad` under the weighted inner products
//! * `laplacian = div . grad`
//!
//! All sums run in the graph's canonical order, so results are bit-for-bit
//! reproducible.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::{Potential, Reward};
use crate::graph::{
    count_diamonds, for_each_diamond, Diamond, LassoTrajectory, Trajectory, TransitionGraph,
};

/// Relative singular-value threshold below which the Laplacian is treated as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-10;

pub fn grad(graph: &TransitionGraph, p: &Potential) -> Result<Reward> {
    p.check_domain(graph)?;
    let gamma = graph.gamma();
    Ok(Reward::from_raw(
        graph
            .transitions()
            .iter()
            .map(|t| gamma * p.get(t.dst) - p.get(t.src))
            .collect(),
    ))
}

/// Discounted sum of rewards along a finite trajectory (its return).
pub fn line_integral_finite(
    graph: &TransitionGraph,
    r: &Reward,
    trajectory: &Trajectory,
) -> Result<f64> {
    r.check_domain(graph)?;
    trajectory.check(graph)?;
    Ok(discounted_sum(graph.gamma(), r, trajectory.steps()))
}

fn discounted_sum(gamma: f64, r: &Reward, steps: &[usize]) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for &e in steps {
        total += discount * r.get(e);
        discount *= gamma;
    }
    total
}

/// Closed form of the infinite line integral over `prefix . cycle . cycle ...`:
/// `int_prefix r + gamma^|prefix| * int_cycle r / (1 - gamma^|cycle|)`.
pub fn line_integral_lasso(
    graph: &TransitionGraph,
    r: &Reward,
    lasso: &LassoTrajectory,
) -> Result<f64> {
    r.check_domain(graph)?;
    let gamma = graph.gamma();
    if gamma >= 1.0 {
        return Err(Error::GammaNotBelowOne {
            operation: "lasso line integral",
            gamma,
        });
    }
    lasso.prefix().check(graph)?;
    lasso.cycle().check(graph)?;
    Ok(lasso_integral_unchecked(
        gamma,
        r,
        lasso.prefix().steps(),
        lasso.cycle().steps(),
    ))
}

pub(crate) fn lasso_integral_unchecked(
    gamma: f64,
    r: &Reward,
    prefix: &[usize],
    cycle: &[usize],
) -> f64 {
    let head = discounted_sum(gamma, r, prefix);
    let loop_sum = discounted_sum(gamma, r, cycle);
    let prefix_discount = gamma.powi(prefix.len() as i32);
    let cycle_discount = gamma.powi(cycle.len() as i32);
    head + prefix_discount * loop_sum / (1.0 - cycle_discount)
}

/// Curl values in canonical diamond order.
#[derive(Debug, Clone, PartialEq)]
pub struct CurlField {
    diamonds: Vec<Diamond>,
    values: Vec<f64>,
}

impl CurlField {
    pub fn diamonds(&self) -> &[Diamond] {
        &self.diamonds
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Diamond, f64)> {
        self.diamonds.iter().zip(self.values.iter().copied())
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
}

fn diamond_curl(gamma: f64, r: &Reward, d: &Diamond) -> f64 {
    let first = r.get(d.first[0]) + gamma * r.get(d.first[1]);
    let second = r.get(d.second[0]) + gamma * r.get(d.second[1]);
    first - second
}

/// Materializes the curl over every diamond. Fails when the diamond count exceeds `cap`;
/// use [`max_abs_curl`] for graphs beyond the cap.
pub fn curl(graph: &TransitionGraph, r: &Reward, cap: u128) -> Result<CurlField> {
    r.check_domain(graph)?;
    let count = count_diamonds(graph);
    if count > cap {
        return Err(Error::CapExceeded {
            what: "diamonds",
            count,
            cap,
        });
    }
    let gamma = graph.gamma();
    let mut diamonds = Vec::with_capacity(count as usize);
    let mut values = Vec::with_capacity(count as usize);
    for_each_diamond(graph, |d| {
        values.push(diamond_curl(gamma, r, &d));
        diamonds.push(d);
    });
    Ok(CurlField { diamonds, values })
}

/// Streaming `max |curl r|` over all diamonds, with the first diamond attaining it.
pub fn max_abs_curl(graph: &TransitionGraph, r: &Reward) -> Result<(f64, Option<Diamond>)> {
    r.check_domain(graph)?;
    let gamma = graph.gamma();
    let mut best = 0.0;
    let mut arg = None;
    for_each_diamond(graph, |d| {
        let v = diamond_curl(gamma, r, &d).abs();
        if v > best {
            best = v;
            arg = Some(d);
        }
    });
    Ok((best, arg))
}

/// Out-flow minus discounted in-flow per unit state weight. A self-loop
/// contributes to both sums.
pub fn divergence(graph: &TransitionGraph, r: &Reward) -> Result<Potential> {
    r.check_domain(graph)?;
    let gamma = graph.gamma();
    let values = (0..graph.num_states())
        .map(|s| {
            let out: f64 = graph
                .outgoing(s)
                .iter()
                .map(|&e| graph.transition(e).weight * r.get(e))
                .sum();
            let inflow: f64 = graph
                .incoming(s)
                .iter()
                .map(|&e| graph.transition(e).weight * r.get(e))
                .sum();
            (out - gamma * inflow) / graph.state_weight(s)
        })
        .collect();
    Ok(Potential::from_raw(values))
}

pub fn laplacian_apply(graph: &TransitionGraph, p: &Potential) -> Result<Potential> {
    divergence(graph, &grad(graph, p)?)
}

/// Dense matrix of the Laplacian in canonical state order, with singular
/// value diagnostics.
#[derive(Debug, Clone)]
pub struct LaplacianMatrix {
    pub entries: DMatrix<f64>,
    pub rank: usize,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
    pub invertible: bool,
}

impl LaplacianMatrix {
    pub fn apply(&self, p: &Potential) -> Potential {
        let v = DVector::from_column_slice(p.values());
        Potential::from_raw((&self.entries * v).iter().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Row-major copy of the entries.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.entries.nrows())
            .map(|i| self.entries.row(i).iter().copied().collect())
            .collect()
    }
}

/// Column `j` is the Laplacian applied to the indicator of state `j`.
pub fn laplacian_matrix(graph: &TransitionGraph) -> Result<LaplacianMatrix> {
    let n = graph.num_states();
    let mut entries = DMatrix::zeros(n, n);
    for j in 0..n {
        let column = laplacian_apply(graph, &Potential::indicator(graph, j))?;
        for (i, v) in column.values().iter().enumerate() {
            entries[(i, j)] = *v;
        }
    }
    let singular = entries.clone().svd(false, false).singular_values;
    let largest = singular.iter().fold(0.0f64, |m, &v| m.max(v));
    let smallest = singular.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let threshold = SINGULAR_THRESHOLD * largest;
    let rank = singular
        .iter()
        .filter(|&&v| largest > 0.0 && v > threshold)
        .count();
    Ok(LaplacianMatrix {
        entries,
        rank,
        smallest_singular_value: smallest,
        largest_singular_value: largest,
        invertible: rank == n,
    })
}
