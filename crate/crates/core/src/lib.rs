//! Distribution regression with Christoffel functions.
//!
//! A bag of x-observations maps to one outcome y. For a query x, each bag is
//! weighted by the Christoffel function of its own x-sample evaluated at x;
//! the Christoffel function of the resulting weighted y-measure, `lambda(y | x)`,
//! tells how many observations support outcome y. The Gauss quadrature of
//! the same measure gives a finite set of possible outcomes with probabilities.
//!
//! ```
//! use christoffel_dr::{Bag, BasisFamily, Dataset, Model};
//!
//! let bags = (0..50)
//!     .map(|l| {
//!         let y = -1.0 + 2.0 * l as f64 / 49.0;
//!         Bag::new(l.to_string(), vec![y - 0.05, y, y + 0.05], y)
//!     })
//!     .collect();
//! let ds = Dataset::fit(bags, BasisFamily::Chebyshev, 3, 4).unwrap();
//! let model = Model::build(ds, None).unwrap();
//! let dist = model.outcomes(0.2).unwrap();
//! assert_eq!(dist.nodes.len(), 4);
//! assert!((dist.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod christoffel;
pub mod dist_reg;
pub mod error;
pub mod io;
pub mod poly_basis;
pub mod quadrature;
pub mod report;
pub mod synth;

pub use christoffel::{factorize, KernelState};
pub use dist_reg::{Bag, BagEvaluator, ConditionalModel, Dataset, Model};
pub use error::{Error, Result};
pub use poly_basis::{BasisFamily, BasisSpec, DomainMap, GramMatrix, MomentVector};
pub use quadrature::{normalize, rule_mean, OutcomeDistribution, QuadratureRule};
