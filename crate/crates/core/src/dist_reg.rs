//! Distribution regression with Christoffel functions.
//!
//! Each bag gets its own Christoffel function `lambda_l(x)` built from the
//! bag's x-observations. For a query `x`, bag `l` enters the y-measure with
//! weight `lambda_l(x)`, and the Christoffel function of that weighted measure
//! is `lambda(y | x)`. Its Gauss quadrature gives the possible outcomes and
//! their probabilities.

use log::warn;
use nalgebra::DMatrix;

use crate::christoffel::{factorize, KernelState};
use crate::error::{Error, Result};
use crate::poly_basis::{
    accumulate_moments, weighted_domain_map, BasisFamily, BasisSpec, GramMatrix, MomentVector,
    ProductTable,
};
use crate::quadrature::{gauss_rule, normalize, OutcomeDistribution, QuadratureRule};

/// Ratio of basis size to sample count above which the fit is flagged.
pub const OVERFIT_WARN_RATIO: f64 = 0.2;

/// Basis sizes above this still work but are outside the usual operating range.
pub const DEGREE_WARN: usize = 15;

/// `N` x-observations sharing one outcome `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    pub id: String,
    pub xs: Vec<f64>,
    pub y: f64,
}

impl Bag {
    pub fn new(id: impl Into<String>, xs: Vec<f64>, y: f64) -> Self {
        Bag {
            id: id.into(),
            xs,
            y,
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

fn count_distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Bags plus the x and y bases.
#[derive(Debug, Clone)]
pub struct Dataset {
    bags: Vec<Bag>,
    x_spec: BasisSpec,
    y_spec: BasisSpec,
}

impl Dataset {
    /// Checks `M >= dy` and `N >= dx` for every bag.
    pub fn new(bags: Vec<Bag>, x_spec: BasisSpec, y_spec: BasisSpec) -> Result<Self> {
        if bags.len() < y_spec.degree() {
            return Err(Error::TooFewBags {
                bags: bags.len(),
                degree: y_spec.degree(),
            });
        }
        for bag in &bags {
            if bag.len() < x_spec.degree() {
                return Err(Error::BagTooSmall {
                    bag_id: bag.id.clone(),
                    size: bag.len(),
                    degree: x_spec.degree(),
                });
            }
            if !bag.y.is_finite() {
                return Err(Error::NonFinite(bag.y));
            }
            if let Some(&bad) = bag.xs.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(bad));
            }
        }
        let ds = Dataset {
            bags,
            x_spec,
            y_spec,
        };
        for w in ds.warnings() {
            warn!("{w}");
        }
        Ok(ds)
    }

    /// Fits the x map to the pooled observations and the y map to the outcomes.
    pub fn fit(bags: Vec<Bag>, family: BasisFamily, dx: usize, dy: usize) -> Result<Self> {
        if bags.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let pooled: Vec<f64> = bags.iter().flat_map(|b| b.xs.iter().copied()).collect();
        let ys: Vec<f64> = bags.iter().map(|b| b.y).collect();
        let x_spec = BasisSpec::fitted(family, dx, &pooled)?;
        let y_spec = BasisSpec::fitted(family, dy, &ys)?;
        Self::new(bags, x_spec, y_spec)
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn x_spec(&self) -> &BasisSpec {
        &self.x_spec
    }

    pub fn y_spec(&self) -> &BasisSpec {
        &self.y_spec
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.bags.iter().map(|b| b.y).collect()
    }

    pub fn min_bag_size(&self) -> usize {
        self.bags.iter().map(Bag::len).min().unwrap_or(0)
    }

    /// `(dx / N_min, dy / M)`.
    pub fn overfit_ratios(&self) -> (f64, f64) {
        (
            self.x_spec.degree() as f64 / self.min_bag_size() as f64,
            self.y_spec.degree() as f64 / self.bags.len() as f64,
        )
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let (rx, ry) = self.overfit_ratios();
        if rx > OVERFIT_WARN_RATIO {
            out.push(format!(
                "overfit: dx/N = {rx:.3} exceeds {OVERFIT_WARN_RATIO} (dx = {}, smallest bag N = {})",
                self.x_spec.degree(),
                self.min_bag_size()
            ));
        }
        if ry > OVERFIT_WARN_RATIO {
            out.push(format!(
                "overfit: dy/M = {ry:.3} exceeds {OVERFIT_WARN_RATIO} (dy = {}, M = {})",
                self.y_spec.degree(),
                self.bags.len()
            ));
        }
        for (name, d) in [("dx", self.x_spec.degree()), ("dy", self.y_spec.degree())] {
            if d > DEGREE_WARN {
                out.push(format!("{name} = {d} is above the usual range of {DEGREE_WARN}"));
            }
        }
        out
    }
}

/// Christoffel function of one bag in x-space.
#[derive(Debug, Clone)]
pub struct BagEvaluator {
    id: String,
    state: KernelState,
}

impl BagEvaluator {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> &KernelState {
        &self.state
    }

    /// `lambda_l(x)`.
    pub fn weight(&self, x: f64) -> f64 {
        self.state.christoffel(x)
    }
}

/// Moments to order `2 dx - 1`, Gram from moments, factorization.
///
/// Only the family and degree of `x_spec` are used; the domain map is refitted
/// to the bag's own x-values.
pub fn bag_evaluator(bag: &Bag, x_spec: &BasisSpec, ridge: Option<f64>) -> Result<BagEvaluator> {
    let table = ProductTable::new(x_spec.family(), x_spec.degree());
    bag_evaluator_with(bag, x_spec, &table, ridge)
}

fn bag_evaluator_with(
    bag: &Bag,
    x_spec: &BasisSpec,
    table: &ProductTable,
    ridge: Option<f64>,
) -> Result<BagEvaluator> {
    if bag.is_empty() {
        return Err(Error::EmptySamples);
    }
    let d = x_spec.degree();
    let rank_error = || Error::InsufficientRank {
        bag_id: bag.id.clone(),
        distinct: count_distinct(bag.xs.iter().copied()),
        degree: d,
    };
    if ridge.is_none() && count_distinct(bag.xs.iter().copied()) < d {
        return Err(rank_error());
    }
    // lambda_l is invariant under affine maps of x; a map fitted to the bag
    // itself keeps its Gram matrix well conditioned
    let local = BasisSpec::fitted(x_spec.family(), d, &bag.xs)?;
    let moments = accumulate_moments(&local, &bag.xs, None, 2 * d - 1)?;
    let gram = table.gram(&local, &moments)?;
    let state = factorize(&gram, ridge).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => rank_error(),
        other => other,
    })?;
    Ok(BagEvaluator {
        id: bag.id.clone(),
        state,
    })
}

pub fn bag_weight(ev: &BagEvaluator, x: f64) -> f64 {
    ev.weight(x)
}

/// The y-measure with per-bag weights, its Gram matrices and factorization.
#[derive(Debug, Clone)]
pub struct ConditionalModel {
    x: Option<f64>,
    weights: Vec<f64>,
    moments: MomentVector,
    gram: GramMatrix,
    ygram: DMatrix<f64>,
    state: KernelState,
}

impl ConditionalModel {
    /// Builds the weighted y-measure `sum_l weights[l] * delta(y_l)`.
    pub fn from_weights(
        y_spec: &BasisSpec,
        ys: &[f64],
        weights: Vec<f64>,
        x: Option<f64>,
        ridge: Option<f64>,
    ) -> Result<Self> {
        let table = ProductTable::new(y_spec.family(), y_spec.degree());
        Self::from_weights_with(y_spec, &table, ys, weights, x, ridge)
    }

    fn from_weights_with(
        y_spec: &BasisSpec,
        table: &ProductTable,
        ys: &[f64],
        weights: Vec<f64>,
        x: Option<f64>,
        ridge: Option<f64>,
    ) -> Result<Self> {
        let d = y_spec.degree();
        let moments = accumulate_moments(y_spec, ys, Some(&weights), 2 * d - 1)?;
        let gram = table.gram(y_spec, &moments)?;
        let ygram = table.ygram(y_spec, &moments)?;
        let support = count_distinct(
            ys.iter()
                .zip(&weights)
                .filter(|(_, &w)| w > 0.0)
                .map(|(&y, _)| y),
        );
        if ridge.is_none() && support < d {
            return Err(Error::SingularConditionalGram(Box::new(
                Error::NotPositiveDefinite {
                    pivot: support,
                    value: 0.0,
                },
            )));
        }
        let state = factorize(&gram, ridge).map_err(|e| match e {
            e @ Error::NotPositiveDefinite { .. } => Error::SingularConditionalGram(Box::new(e)),
            other => other,
        })?;
        Ok(ConditionalModel {
            x,
            weights,
            moments,
            gram,
            ygram,
            state,
        })
    }

    /// Query point, or `None` for the unconditional model.
    pub fn x(&self) -> Option<f64> {
        self.x
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn moments(&self) -> &MomentVector {
        &self.moments
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn ygram(&self) -> &DMatrix<f64> {
        &self.ygram
    }

    pub fn state(&self) -> &KernelState {
        &self.state
    }

    /// `lambda(y | x)`.
    pub fn lambda(&self, y: f64) -> f64 {
        self.state.christoffel(y)
    }

    pub fn rule(&self) -> Result<QuadratureRule> {
        gauss_rule(&self.gram, &self.ygram, &self.state)
    }

    pub fn outcomes(&self) -> Result<OutcomeDistribution> {
        Ok(normalize(&self.rule()?))
    }
}

/// Which y domain map a weighted measure is expanded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YMap {
    /// Refit to the weighted mean and spread of each measure. A conditional
    /// measure concentrates near the query, and the dataset-wide map leaves
    /// its Gram matrix nearly singular.
    #[default]
    Adaptive,
    /// The dataset's y map.
    Fixed,
}

impl YMap {
    /// Spec for the measure `sum_l weights[l] * delta(ys[l])`.
    pub fn spec_for(self, base: &BasisSpec, ys: &[f64], weights: &[f64]) -> Result<BasisSpec> {
        match self {
            YMap::Fixed => Ok(*base),
            YMap::Adaptive => BasisSpec::new(
                base.family(),
                base.degree(),
                weighted_domain_map(ys, weights, base.family(), base.degree())?,
            ),
        }
    }
}

/// A dataset with its per-bag evaluators built once and reused across queries.
#[derive(Debug, Clone)]
pub struct Model {
    dataset: Dataset,
    evaluators: Vec<BagEvaluator>,
    y_table: ProductTable,
    ys: Vec<f64>,
    ridge: Option<f64>,
    y_map: YMap,
}

impl Model {
    /// Builds every bag evaluator; the first rank-deficient bag is an error.
    pub fn build(dataset: Dataset, ridge: Option<f64>) -> Result<Self> {
        let x_spec = *dataset.x_spec();
        let x_table = ProductTable::new(x_spec.family(), x_spec.degree());
        let evaluators = dataset
            .bags()
            .iter()
            .map(|bag| bag_evaluator_with(bag, &x_spec, &x_table, ridge))
            .collect::<Result<Vec<_>>>()?;
        let y_spec = dataset.y_spec();
        let y_table = ProductTable::new(y_spec.family(), y_spec.degree());
        let ys = dataset.outcomes();
        Ok(Model {
            dataset,
            evaluators,
            y_table,
            ys,
            ridge,
            y_map: YMap::default(),
        })
    }

    pub fn with_y_map(mut self, y_map: YMap) -> Self {
        self.y_map = y_map;
        self
    }

    pub fn y_map(&self) -> YMap {
        self.y_map
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn evaluators(&self) -> &[BagEvaluator] {
        &self.evaluators
    }

    pub fn ridge(&self) -> Option<f64> {
        self.ridge
    }

    /// `lambda_l(x)` for every bag, in bag order.
    pub fn bag_weights(&self, x: f64) -> Vec<f64> {
        self.evaluators.iter().map(|ev| ev.weight(x)).collect()
    }

    /// Conditional model from arbitrary nonnegative per-bag weights.
    pub fn with_weights(&self, weights: Vec<f64>, x: Option<f64>) -> Result<ConditionalModel> {
        let spec = self.y_map.spec_for(self.dataset.y_spec(), &self.ys, &weights)?;
        ConditionalModel::from_weights_with(
            &spec,
            &self.y_table,
            &self.ys,
            weights,
            x,
            self.ridge,
        )
    }

    pub fn conditional(&self, x: f64) -> Result<ConditionalModel> {
        self.with_weights(self.bag_weights(x), Some(x))
    }

    /// Every bag weighted by one.
    pub fn unconditional(&self) -> Result<ConditionalModel> {
        self.with_weights(vec![1.0; self.ys.len()], None)
    }

    pub fn outcomes(&self, x: f64) -> Result<OutcomeDistribution> {
        self.conditional(x)?.outcomes()
    }
}

/// One-shot conditional model; builds all bag evaluators. Prefer [`Model`]
/// for repeated queries.
pub fn conditional_model(ds: &Dataset, x: f64, ridge: Option<f64>) -> Result<ConditionalModel> {
    Model::build(ds.clone(), ridge)?.conditional(x)
}

pub fn conditional_lambda(model: &ConditionalModel, y: f64) -> f64 {
    model.lambda(y)
}

pub fn conditional_outcomes(ds: &Dataset, x: f64) -> Result<OutcomeDistribution> {
    conditional_model(ds, x, None)?.outcomes()
}

/// Unit-weight model with the default y map; does not need the x-observations.
pub fn unconditional_model(ds: &Dataset) -> Result<ConditionalModel> {
    let ys = ds.outcomes();
    let weights = vec![1.0; ys.len()];
    let spec = YMap::default().spec_for(ds.y_spec(), &ys, &weights)?;
    ConditionalModel::from_weights(&spec, &ys, weights, None, None)
}
