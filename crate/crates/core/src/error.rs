//! Error types for the affine-like calculus and the class machinery.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum FieldError {
    #[error("requested degrees {degrees:?} cannot represent the samples (tail {tail:.3e})")]
    DegreeTooLow { degrees: (usize, usize), tail: f64 },
}

#[derive(Debug, Clone, Error)]
pub enum MapError {
    #[error("|A_x| or |B_y| falls below the derivative floor ({0:.3e})")]
    VanishingDerivative(f64),
    #[error("A_x^-1 B_y changes sign on the definition rectangle")]
    OrientationInconsistent,
    #[error("graph projection is not invertible: Newton failed at node ({y:.6}, {x:.6})")]
    ProjectionNotInvertible { y: f64, x: f64 },
    #[error("elimination determinant |Delta| = {0:.3e} below the floor")]
    DeltaDegenerate(f64),
    #[error("domain strips do not intersect")]
    EmptyIntersection,
    #[error("image chart {0} does not match domain chart {1}")]
    ChartMismatch(u8, u8),
    #[error("cone aperture parameters violate 1 < u v <= lambda^2")]
    InvalidConeParams,
}

#[derive(Debug, Clone, Error)]
pub enum FoldError {
    #[error("tongue bounds exceed the chart rectangle")]
    InvalidGeometry,
    #[error("(PC1) bound violated: {quantity} = {value:.3e} exceeds b = {bound:.3e}")]
    PC1Violated {
        quantity: &'static str,
        value: f64,
        bound: f64,
    },
    #[error("(PC2) violated: displacement {delta:.3e} <= {required:.3e}")]
    PC2Violated { delta: f64, required: f64 },
    #[error("curves do not intersect: min -C over the rectangle is {0:.3e} <= 0")]
    NoIntersection(f64),
    #[error("curve family is not monotone in the parameter")]
    FamilyNotMonotone,
    #[error("tangency not unfolded at t = {0:.6e}")]
    NotUnfolded(f64),
}

#[derive(Debug, Clone, Error)]
pub enum FamilyError {
    #[error("({0}, {1}) is not a transition of the family")]
    NotATransition(u8, u8),
    #[error("invalid family configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Error)]
pub enum ClassError {
    #[error("budget exhausted: {0} frontier elements left (n_max {1}, width floor {2:.1e})")]
    BudgetExhausted(usize, usize, f64),
    #[error("element {0} is not stored in the class")]
    UnknownElement(String),
}

#[derive(Debug, Clone, Error)]
pub enum ParamError {
    #[error("convention violated: d_s^0 = {0} < d_u^0 = {1} (swap the arguments)")]
    ConventionViolated(f64, f64),
    #[error("subdivision yields {0} < 2 candidates")]
    TooFewCandidates(usize),
    #[error("up-set of node {0} is not a finite chain")]
    NotAForest(usize),
}

#[derive(Debug, Clone, Error)]
pub enum DimError {
    #[error("lambda does not straddle 1 on [{0}, {1}]: ({2:.6}, {3:.6})")]
    BracketFailure(f64, f64, f64, f64),
    #[error("truncation too coarse: excluded tail mass {0:.3e} > {1:.3e}")]
    TruncationTooCoarse(f64, f64),
    #[error("power iteration did not converge in {0} iterations")]
    PowerIterationDiverged(usize),
}
