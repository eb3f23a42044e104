//! Orthogonal decomposition `r = r' + grad phi` with `div r' = 0`,
//! divergence-free canonicalization and the shaping-invariant distance.
//!
//! The potential solves `laplacian phi = div r`. When the Laplacian is
//! numerically invertible this is a direct LU solve; otherwise the
//! minimum-norm least-squares solution is used. The divergence-free part is
//! unique either way.

use nalgebra::linalg::LU;
use nalgebra::{DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::fields::{potential_norm, reward_combine, reward_norm, Potential, Reward};
use crate::graph::TransitionGraph;
use crate::operators::{divergence, grad, laplacian_matrix, LaplacianMatrix, SINGULAR_THRESHOLD};

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub divergence_free: Reward,
    pub potential: Potential,
    /// `||divergence_free + grad potential - r||`
    pub reconstruction_residual: f64,
    /// `||div divergence_free||` in the state-weighted norm.
    pub divergence_residual: f64,
    pub laplacian_invertible: bool,
}

enum Solver {
    Lu(LU<f64, Dyn, Dyn>),
    PseudoInverse(DMatrix<f64>),
}

/// Factorized Laplacian of one graph, reusable across many rewards.
pub struct Decomposer<'g> {
    graph: &'g TransitionGraph,
    laplacian: LaplacianMatrix,
    solver: Solver,
}

impl<'g> Decomposer<'g> {
    pub fn new(graph: &'g TransitionGraph) -> Result<Self> {
        let laplacian = laplacian_matrix(graph)?;
        let solver = if laplacian.invertible {
            Solver::Lu(laplacian.entries.clone().lu())
        } else {
            let eps =
                (SINGULAR_THRESHOLD * laplacian.largest_singular_value).max(f64::MIN_POSITIVE);
            let pinv = laplacian
                .entries
                .clone()
                .svd(true, true)
                .pseudo_inverse(eps)
                .map_err(|e| {
                    Error::Numerical(format!("pseudo-inverse of the Laplacian failed: {e}"))
                })?;
            Solver::PseudoInverse(pinv)
        };
        Ok(Self {
            graph,
            laplacian,
            solver,
        })
    }

    pub fn laplacian(&self) -> &LaplacianMatrix {
        &self.laplacian
    }

    pub fn graph(&self) -> &TransitionGraph {
        self.graph
    }

    pub fn decompose(&self, r: &Reward) -> Result<Decomposition> {
        let graph = self.graph;
        let div = divergence(graph, r)?;
        let rhs = DVector::from_column_slice(div.values());
        let solution = match &self.solver {
            Solver::Lu(lu) => lu
                .solve(&rhs)
                .ok_or_else(|| Error::Numerical("LU solve of the Laplacian failed".into()))?,
            Solver::PseudoInverse(pinv) => pinv * rhs,
        };
        if solution.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "Laplacian solve produced non-finite values".into(),
            ));
        }
        let potential = Potential::from_raw(solution.iter().copied().collect());
        let shaping = grad(graph, &potential)?;
        let divergence_free = reward_combine(1.0, r, -1.0, &shaping)?;

        let rebuilt = reward_combine(1.0, &divergence_free, 1.0, &shaping)?;
        let reconstruction_residual = reward_norm(graph, &reward_combine(1.0, &rebuilt, -1.0, r)?)?;
        let divergence_residual = potential_norm(graph, &divergence(graph, &divergence_free)?)?;

        Ok(Decomposition {
            divergence_free,
            potential,
            reconstruction_residual,
            divergence_residual,
            laplacian_invertible: self.laplacian.invertible,
        })
    }

    pub fn canonicalize(&self, r: &Reward) -> Result<Reward> {
        Ok(self.decompose(r)?.divergence_free)
    }

    pub fn shaping_distance(
        &self,
        r1: &Reward,
        r2: &Reward,
        normalization: Normalization,
    ) -> Result<f64> {
        let mut c1 = self.canonicalize(r1)?;
        let mut c2 = self.canonicalize(r2)?;
        if normalization == Normalization::UnitNorm {
            c1 = unit(self.graph, c1)?;
            c2 = unit(self.graph, c2)?;
        }
        reward_norm(self.graph, &reward_combine(1.0, &c1, -1.0, &c2)?)
    }
}

/// Optional rescaling applied to canonical rewards before measuring their distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    None,
    /// Divide each canonical reward by its norm (zero stays zero).
    UnitNorm,
}

fn unit(graph: &TransitionGraph, r: Reward) -> Result<Reward> {
    let norm = reward_norm(graph, &r)?;
    Ok(if norm > 0.0 { r.scaled(1.0 / norm) } else { r })
}

pub fn decompose(graph: &TransitionGraph, r: &Reward) -> Result<Decomposition> {
    r.check_domain(graph)?;
    Decomposer::new(graph)?.decompose(r)
}

/// The divergence-free representative of `r`'s potential-shaping class.
pub fn canonicalize(graph: &TransitionGraph, r: &Reward) -> Result<Reward> {
    Ok(decompose(graph, r)?.divergence_free)
}

/// `||C(r1) - C(r2)||` in the transition-weighted norm.
pub fn shaping_distance(graph: &TransitionGraph, r1: &Reward, r2: &Reward) -> Result<f64> {
    r1.check_domain(graph)?;
    r2.check_domain(graph)?;
    Decomposer::new(graph)?.shaping_distance(r1, r2, Normalization::None)
}
