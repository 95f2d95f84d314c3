//! Gauss quadrature of a discrete measure from its moments.
//!
//! Nodes are the generalized eigenvalues of `<u Q_s Q_t> psi = u <Q_s Q_t> psi`,
//! reduced to a standard symmetric problem through the Cholesky factor of the
//! Gram matrix. Weights are Christoffel function values at the nodes.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::christoffel::{backward_solve, congruence, factorize, KernelState};
use crate::error::{Error, Result};
use crate::poly_basis::{BasisSpec, GramMatrix, MomentVector, ProductTable};

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// `d`-point Gauss rule: raw-coordinate nodes (ascending), positive weights and
/// the generalized eigenvectors (column `i` belongs to node `i`, normalized so
/// that `psi^T G psi = 1`).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    spec: BasisSpec,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    eigvecs: DMatrix<f64>,
}

impl QuadratureRule {
    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `1 / (sum_t psi_t Q_t(y_i))^2`, the eigenvector form of weight `i`.
    pub fn eigvec_weight(&self, i: usize) -> f64 {
        let q = self.spec.eval(self.nodes[i]);
        let s: f64 = self.eigvecs.column(i).iter().zip(&q).map(|(a, b)| a * b).sum();
        1.0 / (s * s)
    }

    /// `sum_i w_i f(y_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * f(y))
            .sum()
    }
}

/// Builds the Gauss rule of the measure whose Gram matrix is `gram` (factorized
/// in `state`) and whose `<u Q_s Q_t>` matrix is `ygram`.
///
/// Weight `i` equals `1 / K(y_i, y_i)`. It is computed as `m_0 v_0^2` from the
/// first component of the orthonormal eigenvector, which keeps the weights
/// summing to `m_0` when the Gram matrix is poorly conditioned.
pub fn gauss_rule(
    gram: &GramMatrix,
    ygram: &DMatrix<f64>,
    state: &KernelState,
) -> Result<QuadratureRule> {
    let spec = *gram.spec();
    let d = gram.dim();
    assert_eq!(ygram.nrows(), d, "ygram dimension mismatch");
    let l = state.factor();
    let mass = l[(0, 0)] * l[(0, 0)];
    let reduced = congruence(l, ygram);
    let eig = reduced
        .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::EigenFailure)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }

    let map = spec.map();
    let mut order: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &u)| (map.to_raw(u), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut nodes = Vec::with_capacity(d);
    let mut weights = Vec::with_capacity(d);
    let mut eigvecs = DMatrix::zeros(d, d);
    for (col, &(node, i)) in order.iter().enumerate() {
        let mut psi: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        backward_solve(l, &mut psi);
        if psi[0] < 0.0 {
            psi.iter_mut().for_each(|v| *v = -*v);
        }
        for (r, v) in psi.into_iter().enumerate() {
            eigvecs[(r, col)] = v;
        }
        nodes.push(node);
        let v0 = eig.eigenvectors[(0, i)];
        weights.push(mass * v0 * v0);
    }
    Ok(QuadratureRule {
        spec,
        nodes,
        weights,
        eigvecs,
    })
}

/// Gauss rule straight from a moment vector of order at least `2d - 1`.
pub fn gauss_rule_from_moments(
    spec: &BasisSpec,
    moments: &MomentVector,
    ridge: Option<f64>,
) -> Result<QuadratureRule> {
    let table = ProductTable::new(spec.family(), spec.degree());
    let gram = table.gram(spec, moments)?;
    let ygram = table.ygram(spec, moments)?;
    let state = factorize(&gram, ridge)?;
    gauss_rule(&gram, &ygram, &state)
}

/// Possible outcomes and their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub total_mass: f64,
}

pub fn normalize(rule: &QuadratureRule) -> OutcomeDistribution {
    let total_mass = rule.total_weight();
    OutcomeDistribution {
        nodes: rule.nodes.clone(),
        weights: rule.weights.clone(),
        probabilities: rule.weights.iter().map(|w| w / total_mass).collect(),
        total_mass,
    }
}

/// Probability-weighted mean of the outcomes.
pub fn rule_mean(dist: &OutcomeDistribution) -> f64 {
    dist.nodes
        .iter()
        .zip(&dist.probabilities)
        .map(|(y, p)| y * p)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly_basis::{accumulate_moments, BasisFamily};
    use approx::assert_relative_eq;

    fn rule_for(spec: &BasisSpec, pts: &[f64], w: Option<&[f64]>) -> QuadratureRule {
        let m = accumulate_moments(spec, pts, w, 2 * spec.degree() - 1).unwrap();
        gauss_rule_from_moments(spec, &m, None).unwrap()
    }

    #[test]
    fn three_point_measure_two_nodes() {
        let spec = BasisSpec::canonical(BasisFamily::Chebyshev, 2).unwrap();
        let r = rule_for(&spec, &[-1.0, 0.0, 1.0], None);
        let a = (2.0f64 / 3.0).sqrt();
        assert_relative_eq!(r.nodes()[0], -a, epsilon = 1e-14);
        assert_relative_eq!(r.nodes()[1], a, epsilon = 1e-14);
        assert_relative_eq!(r.weights()[0], 1.5, epsilon = 1e-14);
        assert_relative_eq!(r.weights()[1], 1.5, epsilon = 1e-14);
        for i in 0..2 {
            assert_relative_eq!(r.eigvec_weight(i), r.weights()[i], max_relative = 1e-12);
            assert!(r.eigvecs()[(0, i)] >= 0.0);
        }
        let dist = normalize(&r);
        assert_relative_eq!(dist.total_mass, 3.0, max_relative = 1e-14);
        assert_relative_eq!(rule_mean(&dist), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn single_node_is_mean_and_mass() {
        let spec =
            BasisSpec::fitted(BasisFamily::Legendre, 1, &[2.0, 3.0, 7.0]).unwrap();
        let r = rule_for(&spec, &[2.0, 3.0, 7.0], Some(&[1.0, 2.0, 3.0]));
        assert_eq!(r.len(), 1);
        assert_relative_eq!(r.nodes()[0], 29.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(r.weights()[0], 6.0, max_relative = 1e-12);
        assert_eq!(normalize(&r).probabilities, vec![1.0]);
    }

    #[test]
    fn d_atoms_reproduce_the_measure() {
        let pts = [-0.8, 0.1, 0.65];
        let w = [0.5, 2.0, 1.25];
        for fam in BasisFamily::ALL {
            let spec = BasisSpec::fitted(fam, 3, &pts).unwrap();
            let r = rule_for(&spec, &pts, Some(&w));
            for i in 0..3 {
                assert_relative_eq!(r.nodes()[i], pts[i], epsilon = 1e-8);
                assert_relative_eq!(r.weights()[i], w[i], max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let spec = BasisSpec::canonical(BasisFamily::Chebyshev, 2).unwrap();
        let rule = QuadratureRule {
            spec,
            nodes: vec![-1.0, 1.0],
            weights: vec![1.0, 3.0],
            eigvecs: DMatrix::identity(2, 2),
        };
        let d = normalize(&rule);
        assert_eq!(d.probabilities, vec![0.25, 0.75]);
        assert_eq!(d.total_mass, 4.0);
        assert_eq!(rule_mean(&d), 0.5);

        let one = QuadratureRule {
            spec: spec.with_degree(1).unwrap(),
            nodes: vec![0.3],
            weights: vec![3.0],
            eigvecs: DMatrix::identity(1, 1),
        };
        assert_eq!(normalize(&one).probabilities, vec![1.0]);
    }

    #[test]
    fn symmetric_nodes_have_zero_mean() {
        let d = OutcomeDistribution {
            nodes: vec![-0.4, 0.4],
            weights: vec![2.0, 2.0],
            probabilities: vec![0.5, 0.5],
            total_mass: 4.0,
        };
        assert_eq!(rule_mean(&d), 0.0);
    }
}
