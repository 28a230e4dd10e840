//! Numerical machinery for non-uniformly hyperbolic horseshoes near a
//! heteroclinic quadratic tangency.
//!
//! The crate implements, at desk scale, the computational core of the
//! bifurcation analysis: implicitly represented affine-like maps with a full
//! first/second-order derivative calculus, simple and parabolic composition,
//! a concrete two-symbol model family with a folding map, the inductive
//! construction of rectangle classes gated by a transversality relation,
//! parameter-interval scale trees with their exponent calculus, and
//! transfer-operator computation of the transverse Hausdorff dimension and
//! Gibbs measure of the stable lamination.

pub mod cheb;
pub mod compose;
pub mod config;
pub mod dimension;
pub mod error;
pub mod family;
pub mod field;
pub mod fold;
pub mod forest;
pub mod geom;
pub mod map;
pub mod parabolic;
pub mod params;
pub mod rclass;
pub mod report;
pub mod strip;
pub mod transversality;
pub mod word;

pub use config::RunConfig;
pub use error::{ClassError, DimError, FamilyError, FieldError, FoldError, MapError, ParamError};
pub use family::{make_family, FamilyConfig, ModelFamily};
pub use field::ScalarField2;
pub use fold::{make_model_fold, FoldConfig, FoldMap};
pub use geom::{ChartId, Interval, Rect};
pub use map::{ConeParams, ImplicitMap};
pub use parabolic::{parabolic_compose, DisplacementQuad, ParabolicConfig, ParabolicPair};
pub use params::{exponents, ExponentSet, ParamInterval};
pub use rclass::{Budgets, Element, RClass};
pub use strip::Strip;
pub use word::{Sign, Word};
