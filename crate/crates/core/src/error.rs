//! Crate-wide error type.
//!
//! Each subsystem reports through the same enum; variants carry enough
//! context to name the failing quantity in CLI output.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    // curve
    #[error("polynomial degree {0} unsupported, need 5 or 6")]
    BadDegree(usize),
    #[error("polynomial is not squarefree: roots {0:e} apart (scale {1:e})")]
    NotSquarefree(f64, f64),
    #[error("eta index {0} does not address a Weierstrass point (have {1})")]
    BadEtaIndex(usize, usize),
    #[error("point does not satisfy curve equation: residual {0:e}")]
    PointNotOnCurve(f64),

    // periods
    #[error("quadrature failed to converge: last delta {0:e}, target {1:e}")]
    QuadratureNotConverged(f64, f64),
    #[error("A-period matrix ill conditioned: cond {0:e}")]
    IllConditionedPeriods(f64),
    #[error("integration path cannot clear branch point (clearance {0:e})")]
    PathThroughBranchPoint(f64),
    #[error("no homology sign choice yields a Riemann matrix (best symmetry gap {0:e})")]
    NoSymplecticBasis(f64),

    // theta
    #[error("theta truncation radius {0} exceeds limit 64")]
    RadiusOverflow(usize),
    #[error("jet order {0} exceeds limit 4")]
    JetOrderTooLarge(usize),

    // jacobian
    #[error("operands belong to different period data")]
    MixedPeriodData,
    #[error("theta intersection root sweep found {0} roots, expected 2")]
    RootCountMismatch(usize),
    #[error("theta divisors coincide (a = b)")]
    CoincidentDivisors,

    // projective linear algebra
    #[error("nullspace is not one-dimensional: sigma ratio {0:e}")]
    NullspaceNotOneDimensional(f64),
    #[error("point lies in the base locus of the polar map (gradient norm {0:e})")]
    IndeterminacyPoint(f64),

    // embeddings
    #[error("translate span has projective dimension {0}, expected 4")]
    WrongSpanDimension(i64),
    #[error("involution eigenvalue clusters are not of sizes 1 and 4: {0:?}")]
    EigensplitFailed(Vec<usize>),
    #[error("point is not 3-torsion")]
    NotThreeTorsion,
    #[error("projective-linear fit did not determine a unique map: sigma ratio {0:e}")]
    MapFitAmbiguous(f64),
    #[error("cached fit failed: {0}")]
    FitFailed(String),

    // kummer maps
    #[error("support points do not sum to zero: |sum| = {0:e}")]
    SumNotZero(f64),
    #[error("product section expansion residual {0:e} exceeds 1e-5")]
    ExpansionResidualTooLarge(f64),
    #[error("span intersection is empty (supports likely do not sum to zero)")]
    EmptyIntersection,
    #[error("intersection has projective dimension {0}, expected {1}")]
    UnexpectedDimension(i64, i64),
    #[error("polar map hit its contracted locus")]
    OnContractedLocus,
    #[error("sample violates genericity guard: {0}")]
    GenericityViolated(String),

    // secants
    #[error("point is not on the secant line: distance {0:e}")]
    PointNotOnSecant(f64),
    #[error("point is not on the tangent line: distance {0:e}")]
    PointNotOnTangent(f64),
    #[error("secant classification mismatch: numeric {0}, predicted {1}")]
    ClassificationMismatch(String, String),
    #[error("unexpected secant incidence: {0}")]
    UnexpectedIncidence(String),

    // io / cli
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
