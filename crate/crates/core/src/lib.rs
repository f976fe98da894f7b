//! Robust single-item and multi-unit auction design when the seller only
//! observes the distribution of one order statistic of the bidders' values.
//!
//! The crate is organised bottom-up:
//!
//! * [`dist`]: one-dimensional value distributions (atoms plus a
//!   piecewise-linear CDF), revenue curves, ironing and virtual values.
//! * [`orderstat`]: the `H_{n,k}` bijection, consistent i.i.d. inversion,
//!   Poisson-binomial order-statistic marginals and dominance checks.
//! * [`mech`]: per-profile outcomes for posted price, second price with
//!   reserve, i.i.d. Myerson, multi-unit and laddered position auctions.
//! * [`revenue`]: closed-form and Monte Carlo expected revenue, worst-case
//!   revenue over the ambiguity set and reserve optimisation.
//! * [`oracle`]: brute-force certifiers on small discrete instances.

// Negated comparisons such as `!(lo < hi)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod error;
pub mod mech;
pub mod oracle;
pub mod orderstat;
mod quad;
pub mod revenue;

pub use dist::{Dist, DistLiteral, Knot, RevenueCurve, VirtualValueFn};
pub use error::{Error, Result};
pub use mech::{Mechanism, Outcome, Profile, TieBreak, TopKClass};
pub use orderstat::{AmbiguitySpec, ProductDist};
pub use revenue::{Method, ReserveFamily, RevenueReport};
